#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "bmd/kmeans.hpp"
#include "bmd/matrix.hpp"

namespace bmd {

enum class LabelStrategy { naive, mono, bp, bmp };

const char* to_string(LabelStrategy s);

/// S prototypes per class, stored as a (K*S) x d matrix; row k*S+i is the
/// i-th prototype of class k. Prototypes with (near-)zero norm are flagged
/// degenerate and excluded from assignment.
struct PrototypeBank {
    Matrix prototypes;
    std::size_t num_classes = 0;
    std::size_t per_class_count = 1;
    bool normalized = false;
    std::vector<std::uint8_t> degenerate;

    const double* prototype_row(std::size_t k, std::size_t i) const {
        return prototypes.row_ptr(k * per_class_count + i);
    }
    bool is_degenerate(std::size_t k, std::size_t i) const {
        return degenerate[k * per_class_count + i] != 0;
    }
    bool class_valid(std::size_t k) const {
        for (std::size_t i = 0; i < per_class_count; ++i)
            if (!is_degenerate(k, i)) return true;
        return false;
    }
};

/// Hard pseudo-labels plus optional per-class soft scores, tagged with the
/// strategy that produced them.
struct LabelBank {
    std::vector<int> hard_labels;
    Matrix soft_labels;  // n x K, row-stochastic when non-empty
    LabelStrategy strategy = LabelStrategy::naive;
    std::size_t refinement_rounds_used = 0;
};

/// Inputs of the per-class selection budget M = max{1, floor(n_t / (r*K))}.
struct SamplingSpec {
    double ratio = 3.0;
    std::size_t num_classes = 0;
    std::size_t num_instances = 0;
};

std::size_t compute_M(const SamplingSpec& spec);

/// Indices of the min(M, n) largest scores, ties to the lowest index,
/// returned in ascending index order.
std::vector<std::size_t> top_m_select(const std::vector<double>& scores, std::size_t m);

/// Per-class selection and clustering output of the balanced strategies.
struct StaticPrototypeResult {
    PrototypeBank bank;
    LabelBank labels;
    std::vector<std::vector<std::size_t>> selections;  // final-round pick per class
};

/// argmax label per row of a row-stochastic matrix; ties to the lowest index.
LabelBank naive_labels(const Matrix& probs);

/// Classifier-probability-weighted class means. A class whose total weight
/// falls below 1e-12 gets a zero prototype flagged degenerate. Prototypes are
/// L2-normalized.
PrototypeBank mono_prototypes(const Matrix& features, const Matrix& probs);

enum class PrototypeDistance { cosine };

/// Nearest-prototype assignment under cosine distance, for S=1 banks.
/// Degenerate prototypes are skipped; throws when every class is degenerate.
LabelBank nearest_prototype_labels(const Matrix& features, const PrototypeBank& bank,
                                   PrototypeDistance distance = PrototypeDistance::cosine);

/// Alternates indicator-weighted class means with nearest-prototype
/// re-assignment. Classes that lose every member keep their prototype from
/// `previous` (or stay degenerate when none is given).
std::pair<PrototypeBank, LabelBank> mono_refine(const Matrix& features, const LabelBank& labels,
                                                std::size_t rounds,
                                                const PrototypeBank* previous = nullptr);

/// Inter-class balanced prototypes: per class, average the top-M instances by
/// classifier probability; each refinement round re-selects the top-M by
/// prototype-softmax membership and re-averages. Selection pools are
/// independent per class, so one instance may be picked by several classes.
StaticPrototypeResult bp_prototypes(const Matrix& features, const Matrix& probs,
                                    const SamplingSpec& spec, std::size_t rounds);

/// Balanced multicentric prototypes: same top-M selection, then per-class
/// k-means into S centroids; assignment takes the max over each class's
/// prototypes before normalizing across classes. kcfg supplies the k-means
/// init/iteration/seed settings; its cluster count is overridden by S.
StaticPrototypeResult bmp_prototypes(const Matrix& features, const Matrix& probs,
                                     const SamplingSpec& spec, std::size_t per_class_prototypes,
                                     const KMeansConfig& kcfg, std::size_t rounds);

/// Max-over-prototypes similarity per (instance, class); degenerate
/// prototypes are excluded. class_valid marks classes with at least one
/// usable prototype.
struct ClassScores {
    Matrix max_sim;  // n x K
    std::vector<std::uint8_t> class_valid;
};

ClassScores class_max_similarity(const Matrix& features, const PrototypeBank& bank);

/// Row-stochastic soft assignment: softmax over valid classes of the
/// max-over-prototypes similarities. Throws when every class is degenerate.
Matrix prototype_soft_assign(const Matrix& features, const PrototypeBank& bank);

/// Hard labels from ClassScores (argmax over valid classes, ties low).
std::vector<int> hard_assign(const ClassScores& scores);

}  // namespace bmd
