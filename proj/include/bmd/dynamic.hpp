#pragma once

#include <cstddef>

#include "bmd/labeling.hpp"
#include "bmd/matrix.hpp"

namespace bmd {

/// EMA-maintained prototype bank used for per-minibatch soft labels. lambda
/// stays fixed over a run; the bank is re-initialized from fresh static
/// prototypes at each epoch boundary by the adaptation loop.
struct DynamicPrototypeState {
    PrototypeBank bank;
    double lambda = 0.9999;
    std::size_t updates_applied = 0;
};

/// Soft distribution over classes per batch row: max-over-prototypes
/// exp(similarity), normalized across classes. Rows sum to 1.
Matrix dynamic_soft_labels(const Matrix& batch_features, const DynamicPrototypeState& state);

/// Per-prototype responsibility-weighted batch means, shaped like the bank's
/// prototype matrix. Responsibilities are exp(similarity) normalized over all
/// K*S live prototypes; a prototype whose responsibility mass falls below
/// 1e-12 keeps its current row.
Matrix batch_prototype_estimate(const Matrix& batch_features, const DynamicPrototypeState& state);

/// c <- lambda * c + (1 - lambda) * estimate, elementwise, then row
/// re-normalization (skippable for decay-rate tests). Refreshes degenerate
/// flags and bumps updates_applied.
void ema_update(DynamicPrototypeState& state, const Matrix& estimate, bool renormalize = true);

}  // namespace bmd
