#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bmd/benchmark.hpp"
#include "bmd/engine.hpp"
#include "bmd/feature_bank.hpp"
#include "bmd/metrics.hpp"
#include "bmd/run_config.hpp"

namespace {

using bmd::AdaptationConfig;
using bmd::AdaptationStrategy;
using bmd::FeatureBank;
using bmd::Matrix;
using bmd::RunConfig;
using ordered_json = nlohmann::ordered_json;

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << contents;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

// wall time and other non-reproducible details go here, never into data files
void write_sidecar_log(const std::filesystem::path& path, const std::string& contents) {
    write_text_file(path, contents);
}

std::filesystem::path prepare_out_dir(const std::string& out) {
    std::filesystem::path dir(out.empty() ? "." : out);
    std::filesystem::create_directories(dir);
    return dir;
}

ordered_json config_to_json(const AdaptationConfig& cfg) {
    ordered_json j;
    j["strategy"] = bmd::to_string(cfg.strategy);
    j["epochs"] = cfg.epochs;
    j["source_epochs"] = cfg.source_epochs;
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["ratio"] = cfg.ratio;
    j["prototypes_per_class"] = cfg.prototypes_per_class;
    j["refinement_rounds"] = cfg.refinement_rounds;
    j["alpha"] = cfg.loss_weights.alpha;
    j["beta"] = cfg.loss_weights.beta;
    j["lambda"] = cfg.lambda;
    j["seed"] = cfg.seed;
    j["label_smoothing_eps"] = cfg.label_smoothing_eps;
    j["feature_dim"] = cfg.feature_dim;
    j["activation"] = cfg.activation == bmd::Activation::identity ? "identity" : "tanh";
    return j;
}

ordered_json metrics_to_json(const bmd::MetricsReport& m) {
    ordered_json j;
    j["overall_accuracy"] = m.overall_accuracy;
    j["per_class"] = m.per_class;  // NaN serializes as null for missing classes
    j["acc_mean"] = m.acc_mean;
    j["acc_std"] = m.acc_std;
    j["coeff_var"] = m.coeff_var;
    return j;
}

Matrix classifier_logits(const bmd::SoftmaxLinearModel& model, const Matrix& features) {
    Matrix logits = bmd::pairwise_similarity(features, model.classifier_w);
    for (std::size_t i = 0; i < logits.rows(); ++i)
        for (std::size_t k = 0; k < logits.cols(); ++k) logits(i, k) += model.classifier_b[k];
    return logits;
}

bmd::SoftmaxLinearModel trained_source_model(const bmd::GmmDomainSpec& spec,
                                             const AdaptationConfig& cfg,
                                             const bmd::LabeledSet& source) {
    const bmd::SoftmaxLinearModel init =
        bmd::make_model(spec.dim, cfg.feature_dim, spec.num_classes, cfg.activation,
                        bmd::mix_seed(cfg.seed, 6));
    return bmd::train_source(init, source, cfg);
}

int cmd_label(const std::string& input, const std::string& strategy_name,
              const std::string& config_path, bool seed_given, std::uint64_t seed,
              const std::string& out) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = bmd::load_run_config(config_path);
    const AdaptationConfig& a = cfg.adaptation;
    if (!seed_given) seed = a.seed;

    FeatureBank bank;
    try {
        bank = bmd::read_feature_bank(input);
    } catch (const bmd::BankParseError& e) {
        throw std::runtime_error(input + ": " + e.what());
    }
    if (!bank.has_logits())
        throw std::runtime_error("strategy '" + strategy_name +
                                 "' requires logits in the feature bank (header logits=1)");

    const Matrix probs = bmd::softmax_rows(bank.logits);
    const Matrix fhat = bmd::l2_normalize_rows(bank.features);
    const bmd::SamplingSpec spec{a.ratio, bank.num_classes, fhat.rows()};
    bmd::KMeansConfig kcfg;
    kcfg.max_iters = 100;
    kcfg.tol = 1e-6;
    kcfg.seed = bmd::mix_seed(bmd::mix_seed(seed, 3), 0);
    kcfg.init = bmd::KMeansInit::kmeans_plus_plus;

    bmd::LabelBank labels;
    if (strategy_name == "naive") {
        labels = bmd::naive_labels(probs);
    } else if (strategy_name == "mono") {
        const bmd::PrototypeBank weighted = bmd::mono_prototypes(fhat, probs);
        bmd::LabelBank assigned = bmd::nearest_prototype_labels(fhat, weighted);
        labels = bmd::mono_refine(fhat, assigned, a.refinement_rounds, &weighted).second;
    } else if (strategy_name == "bp") {
        labels = bmd::bp_prototypes(fhat, probs, spec, a.refinement_rounds).labels;
    } else if (strategy_name == "bmp" || strategy_name == "bmd-static") {
        labels = bmd::bmp_prototypes(fhat, probs, spec, a.prototypes_per_class, kcfg,
                                     a.refinement_rounds)
                     .labels;
    } else {
        throw std::runtime_error("unknown strategy '" + strategy_name +
                                 "' (valid: naive, mono, bp, bmp, bmd-static)");
    }

    std::ostringstream os;
    os << "index,hard_label";
    for (std::size_t k = 0; k < bank.num_classes; ++k) os << ",soft_" << k;
    os << "\n";
    for (std::size_t i = 0; i < fhat.rows(); ++i) {
        os << i << ',' << labels.hard_labels[i];
        for (std::size_t k = 0; k < bank.num_classes; ++k)
            os << ',' << bmd::format_double(labels.soft_labels(i, k));
        os << "\n";
    }
    write_text_file(prepare_out_dir(out) / "labels.csv", os.str());
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& strategy_override,
            bool seed_given, std::uint64_t seed, const std::string& out) {
    RunConfig cfg = bmd::load_run_config(config_path);
    if (seed_given) cfg.adaptation.seed = seed;
    if (!strategy_override.empty() &&
        !bmd::parse_strategy(strategy_override, cfg.adaptation.strategy))
        throw std::runtime_error("unknown strategy '" + strategy_override +
                                 "' (valid: naive, mono, bp, bmp, bmd)");

    const bmd::GmmDomainSpec spec = bmd::resolve_benchmark(cfg, cfg.adaptation.seed);
    const bmd::DomainPair pair = bmd::generate_domain_pair(spec);
    const bmd::SoftmaxLinearModel trained = trained_source_model(spec, cfg.adaptation, pair.source);
    const bmd::AdaptResult res =
        bmd::adapt(trained, pair.target_x, cfg.adaptation, &pair.target_eval);

    const auto dir = prepare_out_dir(out);
    ordered_json j;
    j["config"] = config_to_json(res.record.config);
    j["benchmark"] = {{"profile", cfg.benchmark_profile}, {"seed", spec.seed}};
    j["curves"] = {{"pseudo_label_accuracy", res.record.pseudo_label_accuracy},
                   {"predicted_accuracy", res.record.predicted_accuracy}};
    j["final_metrics"] = metrics_to_json(res.record.final_metrics);
    write_text_file(dir / "run.json", j.dump(2) + "\n");

    std::ostringstream curves;
    curves << "epoch,pseudo_label_accuracy,predicted_accuracy\n";
    for (std::size_t e = 0; e < res.record.pseudo_label_accuracy.size(); ++e) {
        curves << e << ',' << bmd::format_double(res.record.pseudo_label_accuracy[e]) << ','
               << bmd::format_double(res.record.predicted_accuracy[e]) << "\n";
    }
    write_text_file(dir / "curves.csv", curves.str());

    std::ostringstream log;
    log << "wall_time_seconds=" << res.record.wall_time_seconds << "\n";
    write_sidecar_log(dir / "run.log", log.str());
    return 0;
}

int cmd_ablate(const std::string& config_path, bool seed_given, std::uint64_t seed,
               std::size_t seeds_count, const std::string& out) {
    RunConfig cfg = bmd::load_run_config(config_path);
    if (seed_given) cfg.adaptation.seed = seed;

    std::vector<std::uint64_t> seeds = cfg.seeds;
    if (seeds_count > 0 || seeds.empty()) {
        const std::size_t count = seeds_count > 0 ? seeds_count : 5;
        seeds.clear();
        for (std::size_t i = 0; i < count; ++i) seeds.push_back(cfg.adaptation.seed + i);
    }

    const auto t0 = std::chrono::steady_clock::now();
    const bmd::GmmDomainSpec base_spec = bmd::resolve_benchmark(cfg, cfg.adaptation.seed);
    const bmd::AblationTable table = bmd::ablation_suite(base_spec, cfg.adaptation, seeds);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const auto dir = prepare_out_dir(out);
    ordered_json j;
    j["seeds"] = table.seeds;
    j["benchmark"] = {{"profile", cfg.benchmark_profile}};
    j["config"] = config_to_json(cfg.adaptation);
    j["rows"] = ordered_json::array();
    for (const bmd::AblationRow& row : table.rows) {
        ordered_json r;
        r["strategy"] = bmd::to_string(row.strategy);
        r["final_accuracy"] = row.final_accuracy;
        r["final_coeff_var"] = row.final_coeff_var;
        r["epoch0_pseudo_accuracy"] = row.epoch0_pseudo_acc;
        r["mean_accuracy"] = row.mean_accuracy;
        r["std_accuracy"] = row.std_accuracy;
        r["mean_coeff_var"] = row.mean_coeff_var;
        r["mean_epoch0_pseudo_accuracy"] = row.mean_epoch0_pseudo_acc;
        j["rows"].push_back(r);
    }
    write_text_file(dir / "ablate.json", j.dump(2) + "\n");

    std::ostringstream csv;
    csv << "strategy,mean_accuracy,std_accuracy,mean_coeff_var,mean_epoch0_pseudo_accuracy\n";
    for (const bmd::AblationRow& row : table.rows) {
        csv << bmd::to_string(row.strategy) << ',' << bmd::format_double(row.mean_accuracy) << ','
            << bmd::format_double(row.std_accuracy) << ',' << bmd::format_double(row.mean_coeff_var)
            << ',' << bmd::format_double(row.mean_epoch0_pseudo_acc) << "\n";
    }
    write_text_file(dir / "ablate.csv", csv.str());

    std::ostringstream log;
    log << "wall_time_seconds=" << elapsed << "\n";
    write_sidecar_log(dir / "ablate.log", log.str());
    return 0;
}

int cmd_gen_data(const std::string& config_path, bool seed_given, std::uint64_t seed,
                 const std::string& out) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = bmd::load_run_config(config_path);
    if (seed_given) cfg.adaptation.seed = seed;

    const bmd::GmmDomainSpec spec = bmd::resolve_benchmark(cfg, cfg.adaptation.seed);
    const bmd::DomainPair pair = bmd::generate_domain_pair(spec);
    const bmd::SoftmaxLinearModel trained = trained_source_model(spec, cfg.adaptation, pair.source);
    const bmd::ForwardResult fwd = bmd::forward(trained, pair.target_x);

    FeatureBank bank;
    bank.features = fwd.features;
    bank.logits = classifier_logits(trained, fwd.features);
    bank.labels = pair.target_eval.labels;
    bank.num_classes = spec.num_classes;
    bmd::write_feature_bank((prepare_out_dir(out) / "bank.csv").string(), bank);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Balanced multicentric prototype pseudo-labeling toolkit"};
    app.require_subcommand(1);

    std::string input;
    std::string strategy;
    std::string config_path;
    std::string out = ".";
    std::uint64_t seed = 0;
    std::size_t seeds_count = 0;

    CLI::App* label = app.add_subcommand("label", "Pseudo-label a feature bank file");
    label->add_option("input", input, "feature bank CSV path")->required();
    label->add_option("--strategy", strategy, "naive | mono | bp | bmp | bmd-static")->required();
    label->add_option("--config", config_path, "run config JSON (ratio/S/rounds)");
    CLI::Option* label_seed = label->add_option("--seed", seed, "rng seed");
    label->add_option("--out", out, "output directory");

    CLI::App* run = app.add_subcommand("run", "Source-train, adapt, and evaluate on the benchmark");
    run->add_option("--config", config_path, "run config JSON")->required();
    run->add_option("--strategy", strategy, "override config strategy");
    CLI::Option* run_seed = run->add_option("--seed", seed, "override config seed");
    run->add_option("--out", out, "output directory");

    CLI::App* ablate = app.add_subcommand("ablate", "Compare all strategies over a seed set");
    ablate->add_option("--config", config_path, "run config JSON")->required();
    CLI::Option* ablate_seed = ablate->add_option("--seed", seed, "base seed");
    ablate->add_option("--seeds", seeds_count, "number of consecutive seeds");
    ablate->add_option("--out", out, "output directory");

    CLI::App* gen = app.add_subcommand("gen-data", "Emit a benchmark feature bank");
    gen->add_option("--config", config_path, "run config JSON");
    CLI::Option* gen_seed = gen->add_option("--seed", seed, "benchmark seed");
    gen->add_option("--out", out, "output directory");

    try {
        app.parse(argc, argv);
        if (label->parsed())
            return cmd_label(input, strategy, config_path, label_seed->count() > 0, seed, out);
        if (run->parsed())
            return cmd_run(config_path, strategy, run_seed->count() > 0, seed, out);
        if (ablate->parsed())
            return cmd_ablate(config_path, ablate_seed->count() > 0, seed, seeds_count, out);
        if (gen->parsed()) return cmd_gen_data(config_path, gen_seed->count() > 0, seed, out);
        throw std::runtime_error("no subcommand given");
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
