#include "bmd/kmeans.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bmd {

namespace {

// Nearest centroid for one point; ties resolve to the lowest index.
std::size_t nearest_centroid(const double* point, const Matrix& centroids, double* best_sq) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        const double d = squared_distance(point, centroids.row_ptr(c), centroids.cols());
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (best_sq) *best_sq = best_d;
    return best;
}

}  // namespace

Matrix kmeans_plus_plus_init(const Matrix& points, std::size_t num_clusters, SeededRng& rng) {
    const std::size_t n = points.rows();
    if (n == 0) throw std::invalid_argument("empty cluster input");
    Matrix centroids(num_clusters, points.cols());

    std::size_t first = rng.next_index(n);
    centroids.set_row(0, points.row_copy(first));

    std::vector<double> dist_sq(n);
    for (std::size_t i = 0; i < n; ++i)
        dist_sq[i] = squared_distance(points.row_ptr(i), centroids.row_ptr(0), points.cols());

    for (std::size_t c = 1; c < num_clusters; ++c) {
        double total = 0.0;
        for (double d : dist_sq) total += d;

        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.next_index(n);  // every point already chosen; duplicate one
        } else {
            const double u = rng.next_double() * total;
            double cum = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                cum += dist_sq[i];
                if (u < cum) {
                    pick = i;
                    break;
                }
            }
        }
        centroids.set_row(c, points.row_copy(pick));
        for (std::size_t i = 0; i < n; ++i) {
            const double d = squared_distance(points.row_ptr(i), centroids.row_ptr(c), points.cols());
            if (d < dist_sq[i]) dist_sq[i] = d;
        }
    }
    return centroids;
}

KMeansResult kmeans(const Matrix& points, const KMeansConfig& cfg) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    const std::size_t s = cfg.num_clusters;
    if (n == 0) throw std::invalid_argument("empty cluster input");
    if (s < 1) throw std::invalid_argument("num_clusters must be >= 1");

    KMeansResult result;

    if (n < s) {
        // Fewer points than clusters: duplicate points cyclically. Duplicated
        // centroids never change a max-over-prototypes result downstream.
        result.centroids = Matrix(s, d);
        for (std::size_t c = 0; c < s; ++c) result.centroids.set_row(c, points.row_copy(c % n));
        result.assignments.resize(n);
        for (std::size_t i = 0; i < n; ++i) result.assignments[i] = i;
        result.inertia = 0.0;
        result.inertia_history = {0.0};
        result.iterations_run = 0;
        return result;
    }

    Matrix centroids;
    if (cfg.init == KMeansInit::first_s_points) {
        centroids = Matrix(s, d);
        for (std::size_t c = 0; c < s; ++c) centroids.set_row(c, points.row_copy(c));
    } else {
        SeededRng rng(cfg.seed);
        centroids = kmeans_plus_plus_init(points, s, rng);
    }

    std::vector<std::size_t> assignments(n, 0);
    std::vector<double> point_sq(n, 0.0);
    std::vector<std::size_t> counts(s, 0);

    for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
        // Assignment pass; inertia is recorded here.
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            assignments[i] = nearest_centroid(points.row_ptr(i), centroids, &point_sq[i]);
            inertia += point_sq[i];
        }
        result.inertia_history.push_back(inertia);
        result.inertia = inertia;
        result.iterations_run = iter + 1;

        // Update pass: means of nonempty clusters, through mean_of_rows so
        // duplicated points and the S=1 reduction stay bitwise exact.
        Matrix updated(s, d);
        counts.assign(s, 0);
        std::vector<std::vector<std::size_t>> members(s);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = assignments[i];
            ++counts[c];
            members[c].push_back(i);
        }
        for (std::size_t c = 0; c < s; ++c) {
            if (counts[c] == 0) continue;
            updated.set_row(c, mean_of_rows(points, members[c]));
        }

        // Empty-cluster repair: reseed at the point farthest from its
        // assigned centroid; each repair in this pass claims a distinct point.
        std::vector<bool> claimed(n, false);
        for (std::size_t c = 0; c < s; ++c) {
            if (counts[c] != 0) continue;
            std::size_t farthest = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (claimed[i]) continue;
                if (point_sq[i] > far_d) {
                    far_d = point_sq[i];
                    farthest = i;
                }
            }
            if (farthest == n) break;  // more empty clusters than points
            claimed[farthest] = true;
            updated.set_row(c, points.row_copy(farthest));
        }

        double max_shift_sq = 0.0;
        for (std::size_t c = 0; c < s; ++c) {
            const double shift = squared_distance(centroids.row_ptr(c), updated.row_ptr(c), d);
            if (shift > max_shift_sq) max_shift_sq = shift;
        }
        centroids = std::move(updated);
        if (std::sqrt(max_shift_sq) < cfg.tol) break;
    }

    // Sync assignments and inertia with the final centroids.
    double final_inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double sq = 0.0;
        assignments[i] = nearest_centroid(points.row_ptr(i), centroids, &sq);
        final_inertia += sq;
    }
    result.inertia_history.push_back(final_inertia);
    result.inertia = final_inertia;
    result.centroids = std::move(centroids);
    result.assignments = std::move(assignments);
    return result;
}

}  // namespace bmd
