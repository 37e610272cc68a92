#include "bmd/engine.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bmd/rng.hpp"

namespace bmd {

const char* to_string(AdaptationStrategy s) {
    switch (s) {
        case AdaptationStrategy::naive: return "naive";
        case AdaptationStrategy::mono: return "mono";
        case AdaptationStrategy::bp: return "bp";
        case AdaptationStrategy::bmp: return "bmp";
        case AdaptationStrategy::bmd: return "bmd";
    }
    return "unknown";
}

bool parse_strategy(const std::string& name, AdaptationStrategy& out) {
    if (name == "naive") out = AdaptationStrategy::naive;
    else if (name == "mono") out = AdaptationStrategy::mono;
    else if (name == "bp") out = AdaptationStrategy::bp;
    else if (name == "bmp") out = AdaptationStrategy::bmp;
    else if (name == "bmd") out = AdaptationStrategy::bmd;
    else return false;
    return true;
}

AdaptationConfig validate_config(const AdaptationConfig& config) {
    AdaptationConfig cfg = config;
    if (cfg.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    if (cfg.learning_rate < 0.0) throw std::invalid_argument("learning_rate must be >= 0");
    if (cfg.ratio <= 0.0) throw std::invalid_argument("ratio must be positive");
    if (cfg.lambda <= 0.0 || cfg.lambda >= 1.0)
        throw std::invalid_argument("lambda must be in (0, 1)");
    if (cfg.label_smoothing_eps < 0.0 || cfg.label_smoothing_eps > 1.0)
        throw std::invalid_argument("label_smoothing_eps must be in [0, 1]");
    if (cfg.feature_dim == 0) throw std::invalid_argument("feature_dim must be >= 1");
    if (cfg.loss_weights.alpha < 0.0 || cfg.loss_weights.beta < 0.0)
        throw std::invalid_argument("loss weights must be >= 0");
    if (cfg.strategy == AdaptationStrategy::bmd) {
        if (cfg.prototypes_per_class == 0)
            throw std::invalid_argument("bmd requires prototypes_per_class >= 1");
    } else {
        cfg.loss_weights.beta = 0.0;  // dynamic term only exists under bmd
    }
    if (cfg.strategy == AdaptationStrategy::bmp && cfg.prototypes_per_class == 0)
        throw std::invalid_argument("bmp requires prototypes_per_class >= 1");
    if (cfg.strategy == AdaptationStrategy::mono && cfg.refinement_rounds == 0)
        throw std::invalid_argument("mono requires refinement_rounds >= 1");
    if (cfg.loss_weights.alpha == 0.0 && cfg.loss_weights.beta == 0.0)
        throw std::invalid_argument("loss weights must not both be zero");
    return cfg;
}

namespace {

Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx, std::size_t begin,
                   std::size_t end) {
    Matrix out(end - begin, src.cols());
    for (std::size_t i = begin; i < end; ++i) out.set_row(i - begin, src.row_ptr(idx[i]));
    return out;
}

std::vector<int> argmax_rows(const Matrix& probs) {
    std::vector<int> out(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < probs.cols(); ++k)
            if (probs(i, k) > probs(i, best)) best = k;
        out[i] = static_cast<int>(best);
    }
    return out;
}

struct EpochLabels {
    LabelBank labels;
    PrototypeBank bank;  // fresh bmp bank, only filled under bmd
};

EpochLabels refresh_static_labels(const Matrix& fhat, const Matrix& probs,
                                  const AdaptationConfig& cfg, std::size_t epoch) {
    const SamplingSpec spec{cfg.ratio, probs.cols(), fhat.rows()};
    KMeansConfig kcfg;
    kcfg.max_iters = 100;
    kcfg.tol = 1e-6;
    kcfg.seed = mix_seed(mix_seed(cfg.seed, 3), epoch);
    kcfg.init = KMeansInit::kmeans_plus_plus;

    EpochLabels out;
    switch (cfg.strategy) {
        case AdaptationStrategy::naive:
            out.labels = naive_labels(probs);
            break;
        case AdaptationStrategy::mono: {
            const PrototypeBank weighted = mono_prototypes(fhat, probs);
            LabelBank assigned = nearest_prototype_labels(fhat, weighted);
            out.labels = mono_refine(fhat, assigned, cfg.refinement_rounds, &weighted).second;
            break;
        }
        case AdaptationStrategy::bp:
            out.labels = bp_prototypes(fhat, probs, spec, cfg.refinement_rounds).labels;
            break;
        case AdaptationStrategy::bmp:
            out.labels = bmp_prototypes(fhat, probs, spec, cfg.prototypes_per_class, kcfg,
                                        cfg.refinement_rounds)
                             .labels;
            break;
        case AdaptationStrategy::bmd: {
            StaticPrototypeResult res = bmp_prototypes(fhat, probs, spec, cfg.prototypes_per_class,
                                                       kcfg, cfg.refinement_rounds);
            out.labels = std::move(res.labels);
            out.bank = std::move(res.bank);
            break;
        }
    }
    return out;
}

}  // namespace

SoftmaxLinearModel train_source(const SoftmaxLinearModel& model, const LabeledSet& source,
                                const AdaptationConfig& config) {
    const AdaptationConfig cfg = validate_config(config);
    if (source.x.rows() == 0) throw std::invalid_argument("empty input");
    if (source.x.rows() != source.labels.size())
        throw std::invalid_argument("features and labels disagree on instance count");
    SoftmaxLinearModel trained = model;
    SgdMomentum opt;
    opt.learning_rate = cfg.learning_rate;

    const std::size_t n = source.x.rows();
    std::vector<std::size_t> order(n);
    for (std::size_t epoch = 0; epoch < cfg.source_epochs; ++epoch) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        SeededRng rng(mix_seed(mix_seed(cfg.seed, 5), epoch));
        rng.shuffle(order);
        for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
            const std::size_t end = std::min(n, begin + cfg.batch_size);
            const Matrix batch = gather_rows(source.x, order, begin, end);
            std::vector<int> labels(end - begin);
            for (std::size_t i = begin; i < end; ++i) labels[i - begin] = source.labels[order[i]];
            const ModelGradients g =
                source_gradients(trained, batch, labels, cfg.label_smoothing_eps);
            opt.apply(trained, g);
        }
    }
    return trained;
}

AdaptResult adapt(const SoftmaxLinearModel& model, const Matrix& target_x,
                  const AdaptationConfig& config, const EvalLabels* eval) {
    const auto t0 = std::chrono::steady_clock::now();
    const AdaptationConfig cfg = validate_config(config);
    if (target_x.rows() == 0) throw std::invalid_argument("empty input");
    if (eval && eval->labels.size() != target_x.rows())
        throw std::invalid_argument("eval labels and target disagree on instance count");
    const std::size_t n = target_x.rows();
    const std::size_t K = model.num_classes();
    constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

    AdaptResult out;
    out.model = model;
    out.record.config = cfg;
    out.record.has_eval = eval != nullptr;

    SgdMomentum opt;
    opt.learning_rate = cfg.learning_rate;
    std::vector<std::size_t> order(n);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // full pass: refresh static labels (and the EMA bank under bmd)
        ForwardResult full = forward(out.model, target_x);
        Matrix fhat = l2_normalize_rows(full.features);
        full.features = Matrix();
        EpochLabels el = refresh_static_labels(fhat, full.probs, cfg, epoch);
        if (eval) {
            out.record.pseudo_label_accuracy.push_back(
                label_match_fraction(el.labels.hard_labels, eval->labels));
            out.record.predicted_accuracy.push_back(
                label_match_fraction(argmax_rows(full.probs), eval->labels));
        } else {
            out.record.pseudo_label_accuracy.push_back(kNaN);
            out.record.predicted_accuracy.push_back(kNaN);
        }
        full = ForwardResult();
        fhat = Matrix();

        DynamicPrototypeState state;
        const bool dynamic_path = cfg.strategy == AdaptationStrategy::bmd;
        if (dynamic_path) {
            state.bank = std::move(el.bank);
            state.lambda = cfg.lambda;
        }

        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        SeededRng rng(mix_seed(mix_seed(cfg.seed, 4), epoch));
        rng.shuffle(order);

        for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
            const std::size_t end = std::min(n, begin + cfg.batch_size);
            const Matrix batch = gather_rows(target_x, order, begin, end);
            std::vector<int> hard(end - begin);
            for (std::size_t i = begin; i < end; ++i)
                hard[i - begin] = el.labels.hard_labels[order[i]];

            Matrix dyn;
            Matrix bhat;
            if (dynamic_path) {
                const ForwardResult bfwd = forward(out.model, batch);
                bhat = l2_normalize_rows(bfwd.features);
                dyn = dynamic_soft_labels(bhat, state);
            }
            const ExtractorGradients g =
                gradients(out.model, batch, hard, dyn, cfg.loss_weights);
            opt.apply(out.model, g);
            if (dynamic_path) {
                ema_update(state, batch_prototype_estimate(bhat, state));
            }
        }
    }

    const ForwardResult final_pass = forward(out.model, target_x);
    if (eval) {
        out.record.final_metrics = compute_metrics(argmax_rows(final_pass.probs), eval->labels, K);
    }
    out.record.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

AblationTable ablation_suite(const GmmDomainSpec& base_spec, const AdaptationConfig& base_config,
                             const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw std::invalid_argument("seeds must be nonempty");
    constexpr AdaptationStrategy kOrder[] = {AdaptationStrategy::naive, AdaptationStrategy::mono,
                                             AdaptationStrategy::bp, AdaptationStrategy::bmp,
                                             AdaptationStrategy::bmd};
    AblationTable table;
    table.seeds = seeds;
    table.rows.resize(std::size(kOrder));
    for (std::size_t s = 0; s < std::size(kOrder); ++s) table.rows[s].strategy = kOrder[s];

    for (const std::uint64_t seed : seeds) {
        GmmDomainSpec spec = base_spec;
        spec.seed = seed;
        const DomainPair pair = generate_domain_pair(spec);

        AdaptationConfig cfg = base_config;
        cfg.seed = seed;
        const SoftmaxLinearModel init = make_model(spec.dim, cfg.feature_dim, spec.num_classes,
                                                   cfg.activation, mix_seed(seed, 6));
        const SoftmaxLinearModel trained = train_source(init, pair.source, cfg);

        for (std::size_t s = 0; s < std::size(kOrder); ++s) {
            AdaptationConfig run_cfg = cfg;
            run_cfg.strategy = kOrder[s];
            const AdaptResult res = adapt(trained, pair.target_x, run_cfg, &pair.target_eval);
            AblationRow& row = table.rows[s];
            row.final_accuracy.push_back(res.record.final_metrics.overall_accuracy);
            row.final_coeff_var.push_back(res.record.final_metrics.coeff_var);
            row.epoch0_pseudo_acc.push_back(res.record.pseudo_label_accuracy.empty()
                                                ? std::numeric_limits<double>::quiet_NaN()
                                                : res.record.pseudo_label_accuracy.front());
        }
    }

    for (AblationRow& row : table.rows) {
        const auto count = static_cast<double>(row.final_accuracy.size());
        double acc = 0.0, cv = 0.0, ps = 0.0;
        for (std::size_t i = 0; i < row.final_accuracy.size(); ++i) {
            acc += row.final_accuracy[i];
            cv += row.final_coeff_var[i];
            ps += row.epoch0_pseudo_acc[i];
        }
        row.mean_accuracy = acc / count;
        row.mean_coeff_var = cv / count;
        row.mean_epoch0_pseudo_acc = ps / count;
        double sq = 0.0;
        for (const double v : row.final_accuracy) {
            const double d = v - row.mean_accuracy;
            sq += d * d;
        }
        row.std_accuracy = row.final_accuracy.size() > 1
                               ? std::sqrt(sq / (count - 1.0))
                               : 0.0;
    }
    return table;
}

}  // namespace bmd
