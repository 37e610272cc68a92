#pragma once

#include <cstdint>
#include <vector>

#include "bmd/matrix.hpp"
#include "bmd/rng.hpp"

namespace bmd {

enum class KMeansInit { kmeans_plus_plus, first_s_points };

struct KMeansConfig {
    std::size_t num_clusters = 1;
    std::size_t max_iters = 100;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    KMeansInit init = KMeansInit::kmeans_plus_plus;
};

struct KMeansResult {
    Matrix centroids;                       // num_clusters x d
    std::vector<std::size_t> assignments;   // per point, in [0, num_clusters)
    double inertia = 0.0;                   // sum of squared distances at convergence
    std::size_t iterations_run = 0;
    std::vector<double> inertia_history;    // one entry per assignment pass
};

/// D^2-weighted seeding. When fewer distinct choices remain than requested
/// (all remaining mass is zero) the draw falls back to a uniform pick, which
/// duplicates points; n=1 therefore yields S copies of the single point.
Matrix kmeans_plus_plus_init(const Matrix& points, std::size_t num_clusters, SeededRng& rng);

/// Lloyd iterations with squared-Euclidean distance. Ties in assignment go to
/// the lowest cluster index. Empty clusters are reseeded at the point farthest
/// from its assigned centroid (each repair in a pass claims a distinct point).
/// With n < S the points themselves are duplicated cyclically as centroids.
/// Throws on an empty point set.
KMeansResult kmeans(const Matrix& points, const KMeansConfig& cfg);

}  // namespace bmd
