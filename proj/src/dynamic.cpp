#include "bmd/dynamic.hpp"

#include <cmath>
#include <stdexcept>

namespace bmd {

Matrix dynamic_soft_labels(const Matrix& batch_features, const DynamicPrototypeState& state) {
    if (batch_features.rows() == 0) throw std::invalid_argument("empty input");
    return prototype_soft_assign(batch_features, state.bank);
}

Matrix batch_prototype_estimate(const Matrix& batch_features, const DynamicPrototypeState& state) {
    if (batch_features.rows() == 0) throw std::invalid_argument("empty input");
    const PrototypeBank& bank = state.bank;
    const std::size_t n = batch_features.rows();
    const std::size_t d = batch_features.cols();
    const std::size_t total = bank.prototypes.rows();
    if (d != bank.prototypes.cols()) throw std::invalid_argument("dimension mismatch");

    const Matrix sim = pairwise_similarity(batch_features, bank.prototypes);

    // softmax over all live prototypes, per instance
    Matrix resp(n, total);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = 0.0;
        bool seen = false;
        for (std::size_t j = 0; j < total; ++j) {
            if (bank.degenerate[j]) continue;
            if (!seen || sim(i, j) > mx) {
                mx = sim(i, j);
                seen = true;
            }
        }
        if (!seen) continue;  // every prototype degenerate: all rows fall back below
        double sum = 0.0;
        for (std::size_t j = 0; j < total; ++j) {
            if (bank.degenerate[j]) continue;
            const double e = std::exp(sim(i, j) - mx);
            resp(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < total; ++j) {
            if (!bank.degenerate[j]) resp(i, j) /= sum;
        }
    }

    Matrix estimate(total, d);
    for (std::size_t j = 0; j < total; ++j) {
        double mass = 0.0;
        for (std::size_t i = 0; i < n; ++i) mass += resp(i, j);
        if (mass < 1e-12) {
            estimate.set_row(j, bank.prototypes.row_ptr(j));
            continue;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double w = resp(i, j);
            const double* f = batch_features.row_ptr(i);
            for (std::size_t c = 0; c < d; ++c) estimate(j, c) += w * f[c];
        }
        for (std::size_t c = 0; c < d; ++c) estimate(j, c) /= mass;
    }
    return estimate;
}

void ema_update(DynamicPrototypeState& state, const Matrix& estimate, bool renormalize) {
    Matrix& protos = state.bank.prototypes;
    if (estimate.rows() != protos.rows() || estimate.cols() != protos.cols())
        throw std::invalid_argument("dimension mismatch");
    const double step = 1.0 - state.lambda;
    std::vector<double> updated(protos.cols());
    for (std::size_t r = 0; r < protos.rows(); ++r) {
        // delta form keeps estimate == prototype an exact no-op per row
        bool changed = false;
        for (std::size_t c = 0; c < protos.cols(); ++c) {
            updated[c] = protos(r, c) + step * (estimate(r, c) - protos(r, c));
            changed = changed || updated[c] != protos(r, c);
        }
        if (!changed) continue;
        if (renormalize) {
            double sq = 0.0;
            for (const double v : updated) sq += v * v;
            const double norm = std::sqrt(sq);
            if (norm >= 1e-12) {
                for (double& v : updated) v /= norm;
            }
        }
        protos.set_row(r, updated.data());
        state.bank.degenerate[r] = row_norm(protos, r) < 1e-12 ? 1 : 0;
    }
    if (!renormalize) state.bank.normalized = false;
    ++state.updates_applied;
}

}  // namespace bmd
