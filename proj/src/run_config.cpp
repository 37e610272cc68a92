#include "bmd/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace bmd {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& scope) {
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key()))
            throw std::runtime_error("unknown config key '" + scope + item.key() + "'");
    }
}

Matrix matrix_from_json(const json& value, std::size_t rows, std::size_t cols,
                        const std::string& key) {
    if (!value.is_array() || value.size() != rows)
        throw std::runtime_error("config key '" + key + "' must be an array of " +
                                 std::to_string(rows) + " rows");
    Matrix out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const json& row = value[r];
        if (!row.is_array() || row.size() != cols)
            throw std::runtime_error("config key '" + key + "' row " + std::to_string(r) +
                                     " must have " + std::to_string(cols) + " entries");
        for (std::size_t c = 0; c < cols; ++c) out(r, c) = row[c].get<double>();
    }
    return out;
}

GmmDomainSpec custom_spec_from_json(const json& b) {
    reject_unknown_keys(b,
                        {"profile", "seed", "num_classes", "dim", "means", "cov_scales", "shifts",
                         "source_counts", "target_counts"},
                        "benchmark.");
    for (const char* key : {"num_classes", "dim", "means", "cov_scales", "shifts",
                            "source_counts", "target_counts"}) {
        if (!b.contains(key))
            throw std::runtime_error("custom benchmark requires key 'benchmark." +
                                     std::string(key) + "'");
    }
    GmmDomainSpec spec;
    spec.num_classes = b.at("num_classes").get<std::size_t>();
    spec.dim = b.at("dim").get<std::size_t>();
    spec.means = matrix_from_json(b.at("means"), spec.num_classes, spec.dim, "benchmark.means");
    spec.shifts = matrix_from_json(b.at("shifts"), spec.num_classes, spec.dim, "benchmark.shifts");
    spec.cov_scales = b.at("cov_scales").get<std::vector<double>>();
    spec.source_counts = b.at("source_counts").get<std::vector<std::size_t>>();
    spec.target_counts = b.at("target_counts").get<std::vector<std::size_t>>();
    if (b.contains("seed")) spec.seed = b.at("seed").get<std::uint64_t>();
    return spec;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw std::runtime_error("config root must be a JSON object");

    reject_unknown_keys(doc,
                        {"strategy", "epochs", "source_epochs", "batch_size", "learning_rate",
                         "ratio", "prototypes_per_class", "refinement_rounds", "alpha", "beta",
                         "lambda", "seed", "label_smoothing_eps", "feature_dim", "activation",
                         "benchmark", "seeds"},
                        "");

    RunConfig cfg;
    AdaptationConfig& a = cfg.adaptation;
    if (doc.contains("strategy")) {
        const auto name = doc.at("strategy").get<std::string>();
        if (!parse_strategy(name, a.strategy))
            throw std::runtime_error("unknown strategy '" + name +
                                     "' (valid: naive, mono, bp, bmp, bmd)");
    }
    if (doc.contains("epochs")) a.epochs = doc.at("epochs").get<std::size_t>();
    if (doc.contains("source_epochs")) a.source_epochs = doc.at("source_epochs").get<std::size_t>();
    if (doc.contains("batch_size")) a.batch_size = doc.at("batch_size").get<std::size_t>();
    if (doc.contains("learning_rate")) a.learning_rate = doc.at("learning_rate").get<double>();
    if (doc.contains("ratio")) a.ratio = doc.at("ratio").get<double>();
    if (doc.contains("prototypes_per_class"))
        a.prototypes_per_class = doc.at("prototypes_per_class").get<std::size_t>();
    if (doc.contains("refinement_rounds"))
        a.refinement_rounds = doc.at("refinement_rounds").get<std::size_t>();
    if (doc.contains("alpha")) a.loss_weights.alpha = doc.at("alpha").get<double>();
    if (doc.contains("beta")) a.loss_weights.beta = doc.at("beta").get<double>();
    if (doc.contains("lambda")) a.lambda = doc.at("lambda").get<double>();
    if (doc.contains("seed")) a.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("label_smoothing_eps"))
        a.label_smoothing_eps = doc.at("label_smoothing_eps").get<double>();
    if (doc.contains("feature_dim")) a.feature_dim = doc.at("feature_dim").get<std::size_t>();
    if (doc.contains("activation")) {
        const auto name = doc.at("activation").get<std::string>();
        if (name == "identity") a.activation = Activation::identity;
        else if (name == "tanh") a.activation = Activation::tanh_act;
        else throw std::runtime_error("unknown activation '" + name + "' (valid: identity, tanh)");
    }
    if (doc.contains("seeds")) cfg.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();

    if (doc.contains("benchmark")) {
        const json& b = doc.at("benchmark");
        if (!b.is_object()) throw std::runtime_error("config key 'benchmark' must be an object");
        cfg.benchmark_profile = b.value("profile", std::string("hard_truck"));
        if (cfg.benchmark_profile == "custom") {
            cfg.custom_benchmark = custom_spec_from_json(b);
        } else if (cfg.benchmark_profile == "hard_truck" || cfg.benchmark_profile == "separable") {
            reject_unknown_keys(b, {"profile", "seed"}, "benchmark.");
        } else {
            throw std::runtime_error("unknown benchmark profile '" + cfg.benchmark_profile +
                                     "' (valid: hard_truck, separable, custom)");
        }
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

GmmDomainSpec resolve_benchmark(const RunConfig& config, std::uint64_t seed) {
    if (config.benchmark_profile == "hard_truck") return make_hard_truck_spec(seed);
    if (config.benchmark_profile == "separable") return make_separable_spec(seed);
    GmmDomainSpec spec = config.custom_benchmark;
    spec.seed = seed;
    return spec;
}

}  // namespace bmd
