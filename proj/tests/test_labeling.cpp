#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "bmd/kmeans.hpp"
#include "bmd/labeling.hpp"
#include "bmd/matrix.hpp"
#include "bmd/rng.hpp"

using bmd::KMeansConfig;
using bmd::LabelBank;
using bmd::LabelStrategy;
using bmd::Matrix;
using bmd::PrototypeBank;
using bmd::SamplingSpec;
using bmd::SeededRng;
using bmd::StaticPrototypeResult;

namespace {

Matrix random_matrix(std::size_t n, std::size_t d, SeededRng& rng) {
    Matrix m(n, d);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) m(r, c) = rng.next_normal();
    return m;
}

Matrix random_probs(std::size_t n, std::size_t k, SeededRng& rng) {
    Matrix m(n, k);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < k; ++c) m(r, c) = rng.next_normal();
    return bmd::softmax_rows(m);
}

void check_row_stochastic(const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double total = 0.0;
        for (std::size_t k = 0; k < m.cols(); ++k) {
            CHECK(m(i, k) >= 0.0);
            total += m(i, k);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
}

}  // namespace

TEST_CASE("per-class budget follows floor(n / (r*K)) with a floor of one") {
    CHECK(bmd::compute_M({3.0, 10, 300}) == 10);
    CHECK(bmd::compute_M({3.0, 5, 10}) == 1);
    CHECK(bmd::compute_M({3.0, 12, 55000}) == 1527);
    CHECK_THROWS_AS(bmd::compute_M({3.0, 0, 10}), std::invalid_argument);
    CHECK_THROWS_AS(bmd::compute_M({0.0, 4, 10}), std::invalid_argument);
    CHECK_THROWS_AS(bmd::compute_M({-1.0, 4, 10}), std::invalid_argument);
}

TEST_CASE("top-M selection keeps the largest scores, ties to the lowest index") {
    const std::vector<double> scores = {0.1, 0.9, 0.5, 0.9};
    CHECK(bmd::top_m_select(scores, 2) == std::vector<std::size_t>{1, 3});
    CHECK(bmd::top_m_select(scores, 3) == std::vector<std::size_t>{1, 2, 3});
    CHECK(bmd::top_m_select(scores, 10) == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(bmd::top_m_select(scores, 1) == std::vector<std::size_t>{1});
}

TEST_CASE("top-M selection matches a full-sort oracle on a large tied vector") {
    SeededRng rng(7);
    std::vector<double> scores(1000);
    for (double& s : scores) s = static_cast<double>(rng.next_index(50));  // heavy ties

    for (const std::size_t m : {1ul, 17ul, 250ul, 999ul, 1000ul, 2000ul}) {
        const std::vector<std::size_t> got = bmd::top_m_select(scores, m);

        std::vector<std::size_t> order(scores.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
            return scores[a] > scores[b];
        });
        order.resize(std::min(m, scores.size()));
        std::sort(order.begin(), order.end());
        CHECK(got == order);
    }
}

TEST_CASE("naive labels take the row argmax with ties to the lowest index") {
    const Matrix probs = Matrix::from_rows({{0.2, 0.5, 0.3}, {0.4, 0.4, 0.2}, {0.1, 0.1, 0.8}});
    const LabelBank bank = bmd::naive_labels(probs);
    CHECK(bank.hard_labels == std::vector<int>{1, 0, 2});
    CHECK(bank.soft_labels == probs);
    CHECK(bank.strategy == LabelStrategy::naive);

    SeededRng rng(11);
    const Matrix rand = random_probs(64, 5, rng);
    const LabelBank rb = bmd::naive_labels(rand);
    for (std::size_t i = 0; i < rand.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < rand.cols(); ++k)
            if (rand(i, k) > rand(i, best)) best = k;
        CHECK(rb.hard_labels[i] == static_cast<int>(best));
    }
    CHECK_THROWS_WITH_AS(bmd::naive_labels(Matrix()), "empty input", std::invalid_argument);
}

TEST_CASE("uniform posteriors collapse every monocentric prototype onto the global mean") {
    SeededRng rng(13);
    const Matrix feats = random_matrix(12, 3, rng);
    Matrix probs(12, 4);
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t k = 0; k < 4; ++k) probs(i, k) = 0.25;
    const PrototypeBank bank = bmd::mono_prototypes(feats, probs);
    REQUIRE(bank.prototypes.rows() == 4);
    CHECK(bank.normalized);
    for (std::size_t k = 1; k < 4; ++k)
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(bank.prototypes(k, c) == doctest::Approx(bank.prototypes(0, c)).epsilon(1e-12));
}

TEST_CASE("one-hot posteriors give normalized class means") {
    const Matrix feats = Matrix::from_rows({{2, 0}, {4, 0}, {0, 3}, {0, 5}});
    const Matrix probs = Matrix::from_rows({{1, 0}, {1, 0}, {0, 1}, {0, 1}});
    const PrototypeBank bank = bmd::mono_prototypes(feats, probs);
    // class means (3,0) and (0,4) normalize to the axes
    CHECK(bank.prototypes(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(bank.prototypes(0, 1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(bank.prototypes(1, 0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(bank.prototypes(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("monocentric prototypes match an independent weighted-mean oracle") {
    SeededRng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 5 + rng.next_index(40);
        const std::size_t d = 2 + rng.next_index(5);
        const std::size_t k = 2 + rng.next_index(4);
        const Matrix feats = random_matrix(n, d, rng);
        const Matrix probs = random_probs(n, k, rng);
        const PrototypeBank bank = bmd::mono_prototypes(feats, probs);

        for (std::size_t cls = 0; cls < k; ++cls) {
            std::vector<double> acc(d, 0.0);
            double wsum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t c = 0; c < d; ++c) acc[c] += probs(i, cls) * feats(i, c);
                wsum += probs(i, cls);
            }
            double norm = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                acc[c] /= wsum;
                norm += acc[c] * acc[c];
            }
            norm = std::sqrt(norm);
            for (std::size_t c = 0; c < d; ++c)
                CHECK(bank.prototypes(cls, c) == doctest::Approx(acc[c] / norm).epsilon(1e-12));
        }
    }
}

TEST_CASE("a class with zero total weight becomes a degenerate prototype") {
    const Matrix feats = Matrix::from_rows({{1, 0}, {0, 1}});
    const Matrix probs = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}});  // class 2 never weighted
    const PrototypeBank bank = bmd::mono_prototypes(feats, probs);
    CHECK(bank.is_degenerate(2, 0));
    CHECK_FALSE(bank.is_degenerate(0, 0));
    CHECK_FALSE(bank.is_degenerate(1, 0));
    CHECK(bank.class_valid(0));
    CHECK_FALSE(bank.class_valid(2));

    // assignment never produces the degenerate class
    const LabelBank labels = bmd::nearest_prototype_labels(feats, bank);
    for (const int l : labels.hard_labels) CHECK(l != 2);
    // and its soft column is exactly zero
    for (std::size_t i = 0; i < labels.soft_labels.rows(); ++i)
        CHECK(labels.soft_labels(i, 2) == 0.0);
}

TEST_CASE("nearest-prototype assignment uses cosine similarity with ties to the lowest class") {
    PrototypeBank bank;
    bank.num_classes = 2;
    bank.per_class_count = 1;
    bank.prototypes = Matrix::from_rows({{1, 0}, {0, 1}});
    bank.degenerate.assign(2, 0);
    bank.normalized = true;

    const Matrix feats = Matrix::from_rows({{2, 0}, {0, 3}, {1, 1}});
    const LabelBank labels = bmd::nearest_prototype_labels(feats, bank);
    CHECK(labels.hard_labels == std::vector<int>{0, 1, 0});  // (1,1) ties, lowest class wins
    check_row_stochastic(labels.soft_labels);
    CHECK(labels.soft_labels(0, 0) > labels.soft_labels(0, 1));
    CHECK(labels.soft_labels(2, 0) == doctest::Approx(0.5).epsilon(1e-12));

    PrototypeBank dead = bank;
    dead.degenerate.assign(2, 1);
    CHECK_THROWS_WITH_AS(bmd::nearest_prototype_labels(feats, dead), "all prototypes degenerate",
                         std::domain_error);
}

TEST_CASE("one refinement round corrects a mislabeled boundary point") {
    const Matrix feats = Matrix::from_rows(
        {{1, 0}, {0.9, 0.1}, {1, -0.1}, {0, 1}, {0.1, 1}, {-0.1, 1}});
    LabelBank labels;
    labels.hard_labels = {0, 0, 1, 1, 1, 1};  // row 2 starts on the wrong side

    const auto [bank, refined] = bmd::mono_refine(feats, labels, 1);
    CHECK(refined.hard_labels == std::vector<int>{0, 0, 0, 1, 1, 1});
    CHECK(refined.refinement_rounds_used == 1);
    CHECK(refined.strategy == LabelStrategy::mono);

    // a second round recomputes means from the corrected split and stays put
    const auto [bank2, refined2] = bmd::mono_refine(feats, labels, 2);
    CHECK(refined2.hard_labels == refined.hard_labels);
    CHECK(refined2.refinement_rounds_used == 2);
    const auto [bank3, refined3] = bmd::mono_refine(feats, refined, 1);
    CHECK(bank3.prototypes == bank2.prototypes);  // fixed point, bit for bit
    CHECK(refined3.hard_labels == refined2.hard_labels);
}

TEST_CASE("refinement keeps the previous prototype when a class loses all members") {
    const Matrix feats = Matrix::from_rows({{1, 0}, {0.9, 0.05}});
    LabelBank labels;
    labels.hard_labels = {0, 0};

    PrototypeBank previous;
    previous.num_classes = 2;
    previous.per_class_count = 1;
    previous.prototypes = Matrix::from_rows({{1, 0}, {0, 1}});
    previous.degenerate.assign(2, 0);
    previous.normalized = true;

    const auto [bank, refined] = bmd::mono_refine(feats, labels, 1, &previous);
    REQUIRE(bank.num_classes == 2);
    CHECK(bank.prototypes(1, 0) == previous.prototypes(1, 0));
    CHECK(bank.prototypes(1, 1) == previous.prototypes(1, 1));
    CHECK_FALSE(bank.is_degenerate(1, 0));

    // without a fallback bank the class goes degenerate and is never assigned
    LabelBank wide = labels;
    wide.soft_labels = Matrix::from_rows({{1, 0}, {1, 0}});
    const auto [bank2, refined2] = bmd::mono_refine(feats, wide, 1);
    CHECK(bank2.is_degenerate(1, 0));
    for (const int l : refined2.hard_labels) CHECK(l == 0);
}

TEST_CASE("refinement requires at least one round") {
    const Matrix feats = Matrix::from_rows({{1, 0}});
    LabelBank labels;
    labels.hard_labels = {0};
    CHECK_THROWS_AS(bmd::mono_refine(feats, labels, 0), std::invalid_argument);
}

TEST_CASE("balanced prototypes with one class average the top-M instances") {
    const Matrix feats = Matrix::from_rows({{2, 0}, {4, 0}, {0, 6}, {6, 0}, {8, 0}, {10, 0}});
    Matrix probs(6, 1);
    const double conf[6] = {0.9, 0.8, 0.1, 0.7, 0.6, 0.5};
    for (std::size_t i = 0; i < 6; ++i) probs(i, 0) = conf[i];

    SamplingSpec spec{3.0, 1, 6};  // M = 2
    const StaticPrototypeResult res = bmd::bp_prototypes(feats, probs, spec, 0);
    REQUIRE(res.selections.size() == 1);
    CHECK(res.selections[0] == std::vector<std::size_t>{0, 1});
    // mean (3,0) normalizes to (1,0)
    CHECK(res.bank.prototypes(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(res.bank.prototypes(0, 1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    for (const int l : res.labels.hard_labels) CHECK(l == 0);
    for (std::size_t i = 0; i < 6; ++i) CHECK(res.labels.soft_labels(i, 0) == 1.0);
}

TEST_CASE("balanced prototypes label well-separated clouds perfectly") {
    SeededRng rng(19);
    const std::size_t per_class = 30;
    Matrix feats(2 * per_class, 2);
    Matrix probs(2 * per_class, 2);
    std::vector<int> truth(2 * per_class);
    for (std::size_t i = 0; i < per_class; ++i) {
        feats(i, 0) = 5.0 + 0.1 * rng.next_normal();
        feats(i, 1) = 0.1 * rng.next_normal();
        truth[i] = 0;
        // noisy but better-than-chance classifier scores
        const double p = 0.55 + 0.4 * rng.next_double();
        probs(i, 0) = p;
        probs(i, 1) = 1.0 - p;

        const std::size_t j = per_class + i;
        feats(j, 0) = 0.1 * rng.next_normal();
        feats(j, 1) = 5.0 + 0.1 * rng.next_normal();
        truth[j] = 1;
        const double q = 0.55 + 0.4 * rng.next_double();
        probs(j, 0) = 1.0 - q;
        probs(j, 1) = q;
    }

    const Matrix unit = bmd::l2_normalize_rows(feats);
    SamplingSpec spec{3.0, 2, 2 * per_class};
    for (const std::size_t rounds : {0ul, 1ul, 2ul}) {
        const StaticPrototypeResult res = bmd::bp_prototypes(unit, probs, spec, rounds);
        for (std::size_t i = 0; i < truth.size(); ++i)
            CHECK(res.labels.hard_labels[i] == truth[i]);
        CHECK(res.labels.refinement_rounds_used == rounds);
        check_row_stochastic(res.labels.soft_labels);
    }
}

TEST_CASE("a stable selection makes the refined balanced bank an exact fixed point") {
    // duplicated points: re-selection by membership keeps the lowest indices,
    // which already carry the highest classifier scores
    Matrix feats(8, 2);
    Matrix probs(8, 2);
    for (std::size_t i = 0; i < 4; ++i) {
        feats(i, 0) = 1.0;
        feats(i, 1) = 0.0;
        probs(i, 0) = 0.9;
        probs(i, 1) = 0.1;
        feats(4 + i, 0) = 0.0;
        feats(4 + i, 1) = 1.0;
        probs(4 + i, 0) = 0.1;
        probs(4 + i, 1) = 0.9;
    }
    SamplingSpec spec{2.0, 2, 8};  // M = 2
    const StaticPrototypeResult r0 = bmd::bp_prototypes(feats, probs, spec, 0);
    const StaticPrototypeResult r1 = bmd::bp_prototypes(feats, probs, spec, 1);
    CHECK(r0.selections == r1.selections);
    CHECK(r0.bank.prototypes == r1.bank.prototypes);
    CHECK(r0.labels.hard_labels == r1.labels.hard_labels);
    CHECK(r0.labels.soft_labels == r1.labels.soft_labels);
}

TEST_CASE("multicentric with S=1 reproduces the balanced strategy bit for bit") {
    SeededRng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 2 + rng.next_index(4);
        const std::size_t n = k * (3 + rng.next_index(10));
        const std::size_t d = 2 + rng.next_index(5);
        const Matrix feats = bmd::l2_normalize_rows(random_matrix(n, d, rng));
        const Matrix probs = random_probs(n, k, rng);
        SamplingSpec spec{3.0, k, n};
        const std::size_t rounds = rng.next_index(3);

        KMeansConfig kcfg;
        kcfg.seed = rng.next_u64();
        const StaticPrototypeResult bp = bmd::bp_prototypes(feats, probs, spec, rounds);
        const StaticPrototypeResult bmp = bmd::bmp_prototypes(feats, probs, spec, 1, kcfg, rounds);

        CHECK(bmp.bank.prototypes == bp.bank.prototypes);
        CHECK(bmp.bank.degenerate == bp.bank.degenerate);
        CHECK(bmp.selections == bp.selections);
        CHECK(bmp.labels.hard_labels == bp.labels.hard_labels);
        CHECK(bmp.labels.soft_labels == bp.labels.soft_labels);
    }
}

TEST_CASE("a second centroid rescues a bimodal class that one prototype mislabels") {
    // class 0 lives in two modes at -30 and 90 degrees, class 1 at 120; the
    // single balanced prototype lands between the class-0 modes and loses the
    // 90-degree points to class 1, while two centroids recover them exactly
    const double s3 = std::sqrt(3.0) / 2.0;
    Matrix feats(9, 2);
    Matrix probs(9, 2);
    for (std::size_t i = 0; i < 3; ++i) {
        feats(i, 0) = s3;  // mode A, -30 degrees
        feats(i, 1) = -0.5;
        probs(i, 0) = 0.9;
        probs(i, 1) = 0.1;
        feats(3 + i, 0) = 0.0;  // mode B, 90 degrees
        feats(3 + i, 1) = 1.0;
        probs(3 + i, 0) = 0.8;
        probs(3 + i, 1) = 0.2;
        feats(6 + i, 0) = -0.5;  // class 1, 120 degrees
        feats(6 + i, 1) = s3;
        probs(6 + i, 0) = 0.3;
        probs(6 + i, 1) = 0.7;
    }
    const std::vector<int> truth = {0, 0, 0, 0, 0, 0, 1, 1, 1};
    SamplingSpec spec{0.75, 2, 9};  // M = 6

    const StaticPrototypeResult bp = bmd::bp_prototypes(feats, probs, spec, 0);
    std::size_t bp_correct = 0;
    for (std::size_t i = 0; i < 9; ++i)
        if (bp.labels.hard_labels[i] == truth[i]) ++bp_correct;
    CHECK(bp_correct == 6);  // the 90-degree mode is lost
    CHECK(bp.labels.hard_labels[3] == 1);

    KMeansConfig kcfg;
    kcfg.seed = 97;
    const StaticPrototypeResult bmp = bmd::bmp_prototypes(feats, probs, spec, 2, kcfg, 0);
    CHECK(bmp.labels.hard_labels == truth);
    CHECK(bmp.bank.per_class_count == 2);

    // a feature equal to a class-0 prototype gets class 0
    Matrix probe(1, 2);
    probe.set_row(0, bmp.bank.prototype_row(0, 0));
    const std::vector<int> probe_label =
        bmd::hard_assign(bmd::class_max_similarity(probe, bmp.bank));
    CHECK(probe_label[0] == 0);
}

TEST_CASE("every class selects exactly min(M, n) instances") {
    SeededRng rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t k = 2 + rng.next_index(5);
        const std::size_t n = 4 + rng.next_index(60);
        const Matrix feats = random_matrix(n, 3, rng);
        const Matrix probs = random_probs(n, k, rng);
        SamplingSpec spec{3.0, k, n};
        const std::size_t m = std::min(bmd::compute_M(spec), n);

        KMeansConfig kcfg;
        kcfg.seed = trial;
        const StaticPrototypeResult bp = bmd::bp_prototypes(feats, probs, spec, 1);
        const StaticPrototypeResult bmp = bmd::bmp_prototypes(feats, probs, spec, 3, kcfg, 1);
        for (std::size_t cls = 0; cls < k; ++cls) {
            CHECK(bp.selections[cls].size() == m);
            CHECK(bmp.selections[cls].size() == m);
        }
        check_row_stochastic(bp.labels.soft_labels);
        check_row_stochastic(bmp.labels.soft_labels);
    }
}

TEST_CASE("balanced strategies are deterministic") {
    SeededRng rng(31);
    const Matrix feats = bmd::l2_normalize_rows(random_matrix(40, 4, rng));
    const Matrix probs = random_probs(40, 3, rng);
    SamplingSpec spec{3.0, 3, 40};
    KMeansConfig kcfg;
    kcfg.seed = 1234;

    const StaticPrototypeResult a = bmd::bmp_prototypes(feats, probs, spec, 4, kcfg, 2);
    const StaticPrototypeResult b = bmd::bmp_prototypes(feats, probs, spec, 4, kcfg, 2);
    CHECK(a.bank.prototypes == b.bank.prototypes);
    CHECK(a.labels.hard_labels == b.labels.hard_labels);
    CHECK(a.labels.soft_labels == b.labels.soft_labels);
    CHECK(a.selections == b.selections);
}

TEST_CASE("balanced selection follows a permutation of the instances") {
    SeededRng rng(37);
    const std::size_t n = 24;
    const Matrix feats = bmd::l2_normalize_rows(random_matrix(n, 3, rng));
    const Matrix probs = random_probs(n, 2, rng);  // continuous scores, no ties
    SamplingSpec spec{3.0, 2, n};

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    Matrix pfeats(n, 3), pprobs(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        pfeats.set_row(i, feats.row_ptr(perm[i]));
        pprobs.set_row(i, probs.row_ptr(perm[i]));
    }

    const StaticPrototypeResult base = bmd::bp_prototypes(feats, probs, spec, 0);
    const StaticPrototypeResult moved = bmd::bp_prototypes(pfeats, pprobs, spec, 0);
    for (std::size_t cls = 0; cls < 2; ++cls) {
        std::vector<std::size_t> mapped;
        for (const std::size_t i : moved.selections[cls]) mapped.push_back(perm[i]);
        std::sort(mapped.begin(), mapped.end());
        CHECK(mapped == base.selections[cls]);
    }
    for (std::size_t c = 0; c < 2 * 3; ++c)
        CHECK(moved.bank.prototypes(c / 3, c % 3) ==
              doctest::Approx(base.bank.prototypes(c / 3, c % 3)).epsilon(1e-12));
    for (std::size_t i = 0; i < n; ++i)
        CHECK(moved.labels.hard_labels[i] == base.labels.hard_labels[perm[i]]);
}

TEST_CASE("strategy names round-trip") {
    CHECK(std::string(bmd::to_string(LabelStrategy::naive)) == "naive");
    CHECK(std::string(bmd::to_string(LabelStrategy::mono)) == "mono");
    CHECK(std::string(bmd::to_string(LabelStrategy::bp)) == "bp");
    CHECK(std::string(bmd::to_string(LabelStrategy::bmp)) == "bmp");
}

TEST_CASE("balanced strategies validate their inputs") {
    const Matrix feats = Matrix::from_rows({{1, 0}});
    const Matrix probs = Matrix::from_rows({{0.5, 0.5}});
    SamplingSpec spec{3.0, 3, 1};  // class count disagrees with probs
    CHECK_THROWS_AS(bmd::bp_prototypes(feats, probs, spec, 0), std::invalid_argument);
    KMeansConfig kcfg;
    CHECK_THROWS_AS(bmd::bmp_prototypes(feats, probs, spec, 4, kcfg, 0), std::invalid_argument);
    SamplingSpec ok{3.0, 2, 1};
    CHECK_THROWS_AS(bmd::bmp_prototypes(feats, probs, ok, 0, kcfg, 0), std::invalid_argument);
    CHECK_THROWS_WITH_AS(bmd::bp_prototypes(Matrix(), Matrix(), ok, 0), "empty input",
                         std::invalid_argument);
}
