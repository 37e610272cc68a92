#include "bmd/labeling.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bmd/rng.hpp"

namespace bmd {

const char* to_string(LabelStrategy s) {
    switch (s) {
        case LabelStrategy::naive: return "naive";
        case LabelStrategy::mono: return "mono";
        case LabelStrategy::bp: return "bp";
        case LabelStrategy::bmp: return "bmp";
    }
    return "unknown";
}

namespace {

constexpr double kDegenerateNorm = 1e-12;

void refresh_degenerate_flags(PrototypeBank& bank) {
    const std::size_t total = bank.num_classes * bank.per_class_count;
    bank.degenerate.assign(total, 0);
    for (std::size_t r = 0; r < total; ++r) {
        if (row_norm(bank.prototypes, r) < kDegenerateNorm) bank.degenerate[r] = 1;
    }
}

void check_label_inputs(const Matrix& features, const Matrix& probs) {
    if (features.rows() == 0) throw std::invalid_argument("empty input");
    if (features.rows() != probs.rows())
        throw std::invalid_argument("features and probs disagree on instance count");
    if (!is_finite(features) || !is_finite(probs))
        throw std::domain_error("non-finite input");
}

std::vector<double> column_of(const Matrix& m, std::size_t c) {
    std::vector<double> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] = m(i, c);
    return out;
}

}  // namespace

std::size_t compute_M(const SamplingSpec& spec) {
    if (spec.num_classes == 0) throw std::invalid_argument("num_classes must be >= 1");
    if (spec.ratio <= 0.0) throw std::invalid_argument("ratio must be positive");
    const double budget =
        static_cast<double>(spec.num_instances) / (spec.ratio * static_cast<double>(spec.num_classes));
    const auto m = static_cast<std::size_t>(std::floor(budget));
    return std::max<std::size_t>(std::size_t{1}, m);
}

std::vector<std::size_t> top_m_select(const std::vector<double>& scores, std::size_t m) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t keep = std::min(m, scores.size());
    // descending score, ties to the lowest index
    std::stable_sort(order.begin(), order.end(),
                     [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(keep);
    std::sort(order.begin(), order.end());
    return order;
}

LabelBank naive_labels(const Matrix& probs) {
    if (probs.rows() == 0) throw std::invalid_argument("empty input");
    if (!is_finite(probs)) throw std::domain_error("non-finite input");
    LabelBank out;
    out.strategy = LabelStrategy::naive;
    out.hard_labels.resize(probs.rows());
    out.soft_labels = probs;
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < probs.cols(); ++k) {
            if (probs(i, k) > probs(i, best)) best = k;
        }
        out.hard_labels[i] = static_cast<int>(best);
    }
    return out;
}

PrototypeBank mono_prototypes(const Matrix& features, const Matrix& probs) {
    check_label_inputs(features, probs);
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    const std::size_t K = probs.cols();

    PrototypeBank bank;
    bank.num_classes = K;
    bank.per_class_count = 1;
    bank.prototypes = Matrix(K, d);
    bank.degenerate.assign(K, 0);
    for (std::size_t k = 0; k < K; ++k) {
        double wsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = probs(i, k);
            const double* f = features.row_ptr(i);
            for (std::size_t c = 0; c < d; ++c) bank.prototypes(k, c) += w * f[c];
            wsum += w;
        }
        if (wsum < kDegenerateNorm) {
            for (std::size_t c = 0; c < d; ++c) bank.prototypes(k, c) = 0.0;
        } else {
            for (std::size_t c = 0; c < d; ++c) bank.prototypes(k, c) /= wsum;
        }
    }
    bank.prototypes = l2_normalize_rows(bank.prototypes);
    bank.normalized = true;
    refresh_degenerate_flags(bank);
    return bank;
}

ClassScores class_max_similarity(const Matrix& features, const PrototypeBank& bank) {
    if (features.cols() != bank.prototypes.cols())
        throw std::invalid_argument("dimension mismatch");
    const std::size_t n = features.rows();
    const std::size_t K = bank.num_classes;
    const std::size_t S = bank.per_class_count;

    ClassScores out;
    out.max_sim = Matrix(n, K);
    out.class_valid.assign(K, 0);
    for (std::size_t k = 0; k < K; ++k) out.class_valid[k] = bank.class_valid(k) ? 1 : 0;

    const Matrix sim = pairwise_similarity(features, bank.prototypes);  // n x (K*S)
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < K; ++k) {
            if (!out.class_valid[k]) continue;
            bool seen = false;
            double best = 0.0;
            for (std::size_t s = 0; s < S; ++s) {
                if (bank.is_degenerate(k, s)) continue;
                const double v = sim(i, k * S + s);
                if (!seen || v > best) {
                    best = v;
                    seen = true;
                }
            }
            out.max_sim(i, k) = best;
        }
    }
    return out;
}

std::vector<int> hard_assign(const ClassScores& scores) {
    const std::size_t n = scores.max_sim.rows();
    const std::size_t K = scores.max_sim.cols();
    std::vector<int> labels(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = K;
        for (std::size_t k = 0; k < K; ++k) {
            if (!scores.class_valid[k]) continue;
            if (best == K || scores.max_sim(i, k) > scores.max_sim(i, best)) best = k;
        }
        if (best == K) throw std::domain_error("all prototypes degenerate");
        labels[i] = static_cast<int>(best);
    }
    return labels;
}

namespace {

Matrix masked_row_softmax(const ClassScores& scores) {
    const std::size_t n = scores.max_sim.rows();
    const std::size_t K = scores.max_sim.cols();
    bool any_valid = false;
    for (std::size_t k = 0; k < K; ++k) any_valid = any_valid || scores.class_valid[k] != 0;
    if (!any_valid) throw std::domain_error("all prototypes degenerate");

    Matrix out(n, K);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = 0.0;
        bool seen = false;
        for (std::size_t k = 0; k < K; ++k) {
            if (!scores.class_valid[k]) continue;
            const double v = scores.max_sim(i, k);
            if (!seen || v > mx) {
                mx = v;
                seen = true;
            }
        }
        double total = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            if (!scores.class_valid[k]) continue;
            const double e = std::exp(scores.max_sim(i, k) - mx);
            out(i, k) = e;
            total += e;
        }
        for (std::size_t k = 0; k < K; ++k) {
            if (scores.class_valid[k]) out(i, k) /= total;
        }
    }
    return out;
}

}  // namespace

Matrix prototype_soft_assign(const Matrix& features, const PrototypeBank& bank) {
    return masked_row_softmax(class_max_similarity(features, bank));
}

LabelBank nearest_prototype_labels(const Matrix& features, const PrototypeBank& bank,
                                   PrototypeDistance distance) {
    (void)distance;  // cosine is the only supported metric
    if (bank.per_class_count != 1)
        throw std::invalid_argument("nearest_prototype_labels expects one prototype per class");
    const Matrix unit = l2_normalize_rows(features);
    const ClassScores scores = class_max_similarity(unit, bank);
    LabelBank out;
    out.strategy = LabelStrategy::mono;
    out.hard_labels = hard_assign(scores);
    out.soft_labels = masked_row_softmax(scores);
    return out;
}

std::pair<PrototypeBank, LabelBank> mono_refine(const Matrix& features, const LabelBank& labels,
                                                std::size_t rounds, const PrototypeBank* previous) {
    if (rounds == 0) throw std::invalid_argument("rounds must be >= 1");
    if (features.rows() != labels.hard_labels.size())
        throw std::invalid_argument("features and labels disagree on instance count");
    if (features.rows() == 0) throw std::invalid_argument("empty input");
    std::size_t K = previous ? previous->num_classes : 0;
    for (const int l : labels.hard_labels) {
        if (l < 0) throw std::invalid_argument("negative label");
        K = std::max(K, static_cast<std::size_t>(l) + 1);
    }
    if (labels.soft_labels.rows() > 0) K = std::max(K, labels.soft_labels.cols());

    const std::size_t d = features.cols();
    LabelBank current = labels;
    current.strategy = LabelStrategy::mono;
    PrototypeBank bank;
    bank.num_classes = K;
    bank.per_class_count = 1;
    bank.normalized = true;

    for (std::size_t r = 0; r < rounds; ++r) {
        const PrototypeBank* fallback = (r == 0) ? previous : &bank;
        PrototypeBank next;
        next.num_classes = K;
        next.per_class_count = 1;
        next.prototypes = Matrix(K, d);
        next.degenerate.assign(K, 0);
        for (std::size_t k = 0; k < K; ++k) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < features.rows(); ++i) {
                if (static_cast<std::size_t>(current.hard_labels[i]) == k) members.push_back(i);
            }
            if (members.empty()) {
                if (fallback && fallback->num_classes == K && fallback->prototypes.cols() == d &&
                    fallback->prototypes.rows() == K) {
                    next.prototypes.set_row(k, fallback->prototype_row(k, 0));
                    next.degenerate[k] = fallback->degenerate[k];
                } else {
                    next.degenerate[k] = 1;  // zero row, stays degenerate
                }
            } else {
                const std::vector<double> mean = mean_of_rows(features, members);
                next.prototypes.set_row(k, mean.data());
            }
        }
        next.prototypes = l2_normalize_rows(next.prototypes);
        next.normalized = true;
        // keep carried-over flags, rederive the rest from the norms
        for (std::size_t k = 0; k < K; ++k) {
            if (next.degenerate[k] == 0 && row_norm(next.prototypes, k) < kDegenerateNorm)
                next.degenerate[k] = 1;
        }
        bank = std::move(next);
        const std::size_t done = current.refinement_rounds_used + 1;
        current = nearest_prototype_labels(features, bank);
        current.refinement_rounds_used = done;
    }
    return {std::move(bank), std::move(current)};
}

namespace {

// Selection scores for one round: classifier probabilities on round 0,
// prototype-softmax membership afterwards.
std::vector<std::vector<std::size_t>> select_per_class(const Matrix& scores, std::size_t m) {
    std::vector<std::vector<std::size_t>> picks(scores.cols());
    for (std::size_t k = 0; k < scores.cols(); ++k) {
        picks[k] = top_m_select(column_of(scores, k), m);
        assert(!picks[k].empty());
    }
    return picks;
}

Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), src.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.set_row(i, src.row_ptr(idx[i]));
    return out;
}

void finalize_static_result(const Matrix& features, StaticPrototypeResult& result,
                            LabelStrategy strategy, std::size_t rounds) {
    const ClassScores scores = class_max_similarity(features, result.bank);
    result.labels.hard_labels = hard_assign(scores);
    result.labels.soft_labels = masked_row_softmax(scores);
    result.labels.strategy = strategy;
    result.labels.refinement_rounds_used = rounds;
}

}  // namespace

StaticPrototypeResult bp_prototypes(const Matrix& features, const Matrix& probs,
                                    const SamplingSpec& spec, std::size_t rounds) {
    check_label_inputs(features, probs);
    if (probs.cols() != spec.num_classes)
        throw std::invalid_argument("probs and spec disagree on class count");
    const std::size_t K = spec.num_classes;
    const std::size_t d = features.cols();
    const std::size_t M = compute_M(spec);

    StaticPrototypeResult result;
    result.bank.num_classes = K;
    result.bank.per_class_count = 1;
    result.selections = select_per_class(probs, M);

    for (std::size_t round = 0;; ++round) {
        Matrix protos(K, d);
        for (std::size_t k = 0; k < K; ++k) {
            const std::vector<double> mean = mean_of_rows(features, result.selections[k]);
            protos.set_row(k, mean.data());
        }
        result.bank.prototypes = l2_normalize_rows(protos);
        result.bank.normalized = true;
        refresh_degenerate_flags(result.bank);
        if (round == rounds) break;
        result.selections = select_per_class(prototype_soft_assign(features, result.bank), M);
    }
    finalize_static_result(features, result, LabelStrategy::bp, rounds);
    return result;
}

StaticPrototypeResult bmp_prototypes(const Matrix& features, const Matrix& probs,
                                     const SamplingSpec& spec, std::size_t per_class_prototypes,
                                     const KMeansConfig& kcfg, std::size_t rounds) {
    check_label_inputs(features, probs);
    if (probs.cols() != spec.num_classes)
        throw std::invalid_argument("probs and spec disagree on class count");
    if (per_class_prototypes == 0) throw std::invalid_argument("per_class_prototypes must be >= 1");
    const std::size_t K = spec.num_classes;
    const std::size_t S = per_class_prototypes;
    const std::size_t d = features.cols();
    const std::size_t M = compute_M(spec);

    StaticPrototypeResult result;
    result.bank.num_classes = K;
    result.bank.per_class_count = S;
    result.selections = select_per_class(probs, M);

    for (std::size_t round = 0;; ++round) {
        Matrix protos(K * S, d);
        for (std::size_t k = 0; k < K; ++k) {
            KMeansConfig cfg = kcfg;
            cfg.num_clusters = S;
            cfg.seed = mix_seed(mix_seed(kcfg.seed, round), k);
            const KMeansResult res = kmeans(gather_rows(features, result.selections[k]), cfg);
            for (std::size_t s = 0; s < S; ++s)
                protos.set_row(k * S + s, res.centroids.row_ptr(s));
        }
        result.bank.prototypes = l2_normalize_rows(protos);
        result.bank.normalized = true;
        refresh_degenerate_flags(result.bank);
        if (round == rounds) break;
        result.selections = select_per_class(prototype_soft_assign(features, result.bank), M);
    }
    finalize_static_result(features, result, LabelStrategy::bmp, rounds);
    return result;
}

}  // namespace bmd
