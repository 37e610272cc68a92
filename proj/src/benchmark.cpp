#include "bmd/benchmark.hpp"

#include <cmath>
#include <stdexcept>

#include "bmd/rng.hpp"

namespace bmd {

namespace {

void validate_spec(const GmmDomainSpec& spec) {
    if (spec.num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
    if (spec.dim == 0) throw std::invalid_argument("dim must be >= 1");
    if (spec.means.rows() != spec.num_classes || spec.means.cols() != spec.dim ||
        spec.shifts.rows() != spec.num_classes || spec.shifts.cols() != spec.dim)
        throw std::invalid_argument("means/shifts shape mismatch");
    if (spec.cov_scales.size() != spec.num_classes ||
        spec.source_counts.size() != spec.num_classes ||
        spec.target_counts.size() != spec.num_classes)
        throw std::invalid_argument("per-class vectors must have num_classes entries");
    for (std::size_t k = 0; k < spec.num_classes; ++k) {
        if (spec.source_counts[k] == 0 || spec.target_counts[k] == 0)
            throw std::invalid_argument("per-class counts must be >= 1");
        if (spec.cov_scales[k] < 0.0) throw std::invalid_argument("cov_scales must be >= 0");
    }
}

void sample_class(Matrix& x, std::vector<int>& labels, std::size_t& row, std::size_t k,
                  std::size_t count, const double* mean, const double* shift, double cov,
                  SeededRng& rng) {
    const std::size_t d = x.cols();
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            const double base = mean[c] + (shift ? shift[c] : 0.0);
            x(row, c) = base + cov * rng.next_normal();
        }
        labels[row] = static_cast<int>(k);
        ++row;
    }
}

}  // namespace

DomainPair generate_domain_pair(const GmmDomainSpec& spec) {
    validate_spec(spec);
    std::size_t n_source = 0;
    std::size_t n_target = 0;
    for (std::size_t k = 0; k < spec.num_classes; ++k) {
        n_source += spec.source_counts[k];
        n_target += spec.target_counts[k];
    }

    DomainPair pair;
    pair.source.x = Matrix(n_source, spec.dim);
    pair.source.labels.assign(n_source, 0);
    pair.target_x = Matrix(n_target, spec.dim);
    pair.target_eval.labels.assign(n_target, 0);

    std::size_t src_row = 0;
    std::size_t tgt_row = 0;
    for (std::size_t k = 0; k < spec.num_classes; ++k) {
        SeededRng src_rng(mix_seed(mix_seed(spec.seed, 0xA1), k));
        sample_class(pair.source.x, pair.source.labels, src_row, k, spec.source_counts[k],
                     spec.means.row_ptr(k), nullptr, spec.cov_scales[k], src_rng);
        SeededRng tgt_rng(mix_seed(mix_seed(spec.seed, 0xB2), k));
        sample_class(pair.target_x, pair.target_eval.labels, tgt_row, k, spec.target_counts[k],
                     spec.means.row_ptr(k), spec.shifts.row_ptr(k), spec.cov_scales[k], tgt_rng);
    }
    return pair;
}

GmmDomainSpec make_hard_truck_spec(std::uint64_t seed) {
    constexpr std::size_t K = 6;
    constexpr std::size_t D = 16;
    constexpr std::size_t kHard = K - 1;
    constexpr double kMeanScale = 2.0;
    constexpr double kHardShiftFactor = 4.0;
    // The hard cluster lands at this fraction of the rival distance: well past
    // the source decision midpoint (0.5) so confidence collapses, but far
    // enough short of the rival mean that the shifted points stay a clean
    // cluster of their own and a balanced prototype can recover the class.
    constexpr double kHardRivalFrac = 0.67;

    GmmDomainSpec spec;
    spec.num_classes = K;
    spec.dim = D;
    spec.seed = seed;
    spec.means = Matrix(K, D);
    spec.shifts = Matrix(K, D);
    // tight enough that the decision-midpoint and rival-separation windows
    // below do not overlap for typical draws of the means
    spec.cov_scales.assign(K, 0.6);
    spec.source_counts.assign(K, 80);
    spec.target_counts.assign(K, 80);
    spec.target_counts[kHard] = 40;  // half the usual mass on the hard class

    // The profile promises five easy classes and one uniquely hard one. A draw
    // where two means nearly coincide, or where the hard class has two
    // equidistant rivals, breaks that promise, so such draws are redrawn.
    // Only the raw mean positions are inspected here.
    constexpr double kMinPairDist = 6.0;
    constexpr double kMinRivalGap = 1.0;

    SeededRng mean_rng(mix_seed(seed, 0xC3));
    std::size_t rival = 0;
    double rival_dist = 0.0;
    for (;;) {
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t c = 0; c < D; ++c)
                spec.means(k, c) = kMeanScale * mean_rng.next_normal();

        double min_pair = 0.0;
        for (std::size_t a = 0; a < K; ++a)
            for (std::size_t b = a + 1; b < K; ++b) {
                const double d =
                    std::sqrt(squared_distance(spec.means.row_ptr(a), spec.means.row_ptr(b), D));
                if ((a == 0 && b == 1) || d < min_pair) min_pair = d;
            }

        // nearest and second-nearest rival of the hard class
        double best = 0.0, second = 0.0;
        for (std::size_t j = 0; j + 1 < K; ++j) {
            const double d =
                std::sqrt(squared_distance(spec.means.row_ptr(kHard), spec.means.row_ptr(j), D));
            if (j == 0 || d < best) {
                second = (j == 0) ? d : best;
                best = d;
                rival = j;
            } else if (j == 1 || d < second) {
                second = d;
            }
        }
        rival_dist = best;
        if (min_pair >= kMinPairDist && second - best >= kMinRivalGap) break;
    }
    // shift magnitudes scale with the geometry; /4 then *4 keeps the hard:base
    // ratio exactly kHardShiftFactor
    const double base_mag = kHardRivalFrac * rival_dist / kHardShiftFactor;
    const double hard_mag = kHardShiftFactor * base_mag;

    SeededRng shift_rng(mix_seed(seed, 0xD4));
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<double> dir(D);
        if (k == kHard) {
            for (std::size_t c = 0; c < D; ++c)
                dir[c] = spec.means(rival, c) - spec.means(kHard, c);
        } else {
            for (std::size_t c = 0; c < D; ++c) dir[c] = shift_rng.next_normal();
        }
        double sq = 0.0;
        for (const double v : dir) sq += v * v;
        const double norm = std::sqrt(sq);
        const double mag = (k == kHard) ? hard_mag : base_mag;
        for (std::size_t c = 0; c < D; ++c) spec.shifts(k, c) = mag * dir[c] / norm;
    }
    return spec;
}

GmmDomainSpec make_separable_spec(std::uint64_t seed) {
    constexpr std::size_t K = 4;
    constexpr std::size_t D = 8;

    GmmDomainSpec spec;
    spec.num_classes = K;
    spec.dim = D;
    spec.seed = seed;
    spec.means = Matrix(K, D);
    spec.shifts = Matrix(K, D);
    spec.cov_scales.assign(K, 0.05);
    spec.source_counts.assign(K, 40);
    spec.target_counts.assign(K, 40);

    for (std::size_t k = 0; k < K; ++k) spec.means(k, k % D) = 12.0;

    SeededRng shift_rng(mix_seed(seed, 0xD4));
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<double> dir(D);
        double sq = 0.0;
        for (std::size_t c = 0; c < D; ++c) {
            dir[c] = shift_rng.next_normal();
            sq += dir[c] * dir[c];
        }
        const double norm = std::sqrt(sq);
        for (std::size_t c = 0; c < D; ++c) spec.shifts(k, c) = 0.2 * dir[c] / norm;
    }
    return spec;
}

}  // namespace bmd
