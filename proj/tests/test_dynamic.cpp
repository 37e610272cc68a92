#include <cmath>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "bmd/dynamic.hpp"
#include "bmd/kmeans.hpp"
#include "bmd/labeling.hpp"
#include "bmd/matrix.hpp"
#include "bmd/rng.hpp"

using bmd::DynamicPrototypeState;
using bmd::Matrix;
using bmd::PrototypeBank;
using bmd::SeededRng;

namespace {

PrototypeBank make_bank(Matrix protos, std::size_t num_classes, std::size_t per_class) {
    PrototypeBank bank;
    bank.num_classes = num_classes;
    bank.per_class_count = per_class;
    bank.degenerate.assign(protos.rows(), 0);
    for (std::size_t r = 0; r < protos.rows(); ++r)
        if (bmd::row_norm(protos, r) < 1e-12) bank.degenerate[r] = 1;
    bank.prototypes = std::move(protos);
    bank.normalized = true;
    return bank;
}

Matrix random_unit_rows(std::size_t n, std::size_t d, SeededRng& rng) {
    Matrix m(n, d);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) m(r, c) = rng.next_normal();
    return bmd::l2_normalize_rows(m);
}

}  // namespace

TEST_CASE("opposed prototypes give the logistic split of the similarity gap") {
    DynamicPrototypeState state;
    state.bank = make_bank(Matrix::from_rows({{1, 0}, {-1, 0}}), 2, 1);

    const Matrix batch = Matrix::from_rows({{1, 0}});
    const Matrix soft = bmd::dynamic_soft_labels(batch, state);
    // similarities +1 / -1: softmax = (e / (e + e^-1), e^-1 / (e + e^-1))
    CHECK(soft(0, 0) == doctest::Approx(0.8807970779778824).epsilon(1e-12));
    CHECK(soft(0, 1) == doctest::Approx(0.11920292202211756).epsilon(1e-12));
}

TEST_CASE("identical prototypes yield uniform soft labels") {
    DynamicPrototypeState state;
    state.bank = make_bank(Matrix::from_rows({{0, 1}, {0, 1}, {0, 1}}), 3, 1);
    SeededRng rng(3);
    const Matrix batch = random_unit_rows(8, 2, rng);
    const Matrix soft = bmd::dynamic_soft_labels(batch, state);
    for (std::size_t i = 0; i < soft.rows(); ++i)
        for (std::size_t k = 0; k < 3; ++k)
            CHECK(soft(i, k) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("with one prototype per class the soft labels equal a plain softmax") {
    SeededRng rng(5);
    const Matrix protos = random_unit_rows(4, 6, rng);
    DynamicPrototypeState state;
    state.bank = make_bank(protos, 4, 1);
    const Matrix batch = random_unit_rows(16, 6, rng);

    const Matrix got = bmd::dynamic_soft_labels(batch, state);
    const Matrix want = bmd::softmax_rows(bmd::pairwise_similarity(batch, protos));
    CHECK(got == want);  // identical accumulation path, bit for bit
}

TEST_CASE("a single-instance batch pulls every estimate row onto that instance") {
    SeededRng rng(7);
    DynamicPrototypeState state;
    state.bank = make_bank(random_unit_rows(6, 4, rng), 3, 2);
    const Matrix batch = random_unit_rows(1, 4, rng);

    const Matrix est = bmd::batch_prototype_estimate(batch, state);
    REQUIRE(est.rows() == 6);
    for (std::size_t j = 0; j < 6; ++j)
        for (std::size_t c = 0; c < 4; ++c)
            CHECK(est(j, c) == doctest::Approx(batch(0, c)).epsilon(1e-12));
}

TEST_CASE("prototypes orthogonal to the batch estimate the batch mean") {
    // features live in the first two coordinates, prototypes in the third:
    // every similarity is zero, responsibilities are uniform
    SeededRng rng(11);
    Matrix batch(10, 3);
    for (std::size_t i = 0; i < 10; ++i) {
        batch(i, 0) = rng.next_normal();
        batch(i, 1) = rng.next_normal();
        batch(i, 2) = 0.0;
    }
    DynamicPrototypeState state;
    state.bank = make_bank(Matrix::from_rows({{0, 0, 1}, {0, 0, -1}}), 2, 1);

    const Matrix est = bmd::batch_prototype_estimate(batch, state);
    std::vector<std::size_t> all(10);
    for (std::size_t i = 0; i < 10; ++i) all[i] = i;
    const std::vector<double> mean = bmd::mean_of_rows(batch, all);
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(est(j, c) == doctest::Approx(mean[c]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("batch estimate matches an independent double-loop oracle") {
    SeededRng rng(13);
    for (int trial = 0; trial < 8; ++trial) {
        const std::size_t total = 2 + rng.next_index(6);
        const std::size_t d = 2 + rng.next_index(4);
        const std::size_t n = 1 + rng.next_index(20);
        DynamicPrototypeState state;
        state.bank = make_bank(random_unit_rows(total, d, rng), total, 1);
        const Matrix batch = random_unit_rows(n, d, rng);

        const Matrix est = bmd::batch_prototype_estimate(batch, state);

        Matrix resp(n, total);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> sims(total);
            double mx = -1e300;
            for (std::size_t j = 0; j < total; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < d; ++c) s += batch(i, c) * state.bank.prototypes(j, c);
                sims[j] = s;
                mx = std::max(mx, s);
            }
            double sum = 0.0;
            for (std::size_t j = 0; j < total; ++j) sum += std::exp(sims[j] - mx);
            for (std::size_t j = 0; j < total; ++j) resp(i, j) = std::exp(sims[j] - mx) / sum;
        }
        for (std::size_t j = 0; j < total; ++j) {
            double mass = 0.0;
            std::vector<double> acc(d, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                mass += resp(i, j);
                for (std::size_t c = 0; c < d; ++c) acc[c] += resp(i, j) * batch(i, c);
            }
            for (std::size_t c = 0; c < d; ++c)
                CHECK(est(j, c) == doctest::Approx(acc[c] / mass).epsilon(1e-12).scale(1.0));
        }
    }
}

TEST_CASE("an EMA step at lambda 0.5 lands on the diagonal") {
    DynamicPrototypeState state;
    state.bank = make_bank(Matrix::from_rows({{1, 0}}), 1, 1);
    state.lambda = 0.5;
    bmd::ema_update(state, Matrix::from_rows({{0, 1}}));
    CHECK(state.bank.prototypes(0, 0) == doctest::Approx(0.7071067811865476).epsilon(1e-12));
    CHECK(state.bank.prototypes(0, 1) == doctest::Approx(0.7071067811865476).epsilon(1e-12));
    CHECK(state.updates_applied == 1);
}

TEST_CASE("an estimate equal to the bank is an exact EMA fixed point") {
    SeededRng rng(17);
    DynamicPrototypeState state;
    state.bank = make_bank(random_unit_rows(8, 5, rng), 4, 2);
    const Matrix before = state.bank.prototypes;

    for (int step = 0; step < 50; ++step) bmd::ema_update(state, before);
    CHECK(state.bank.prototypes == before);  // bit for bit
    CHECK(state.updates_applied == 50);

    // the low-mass fallback path feeds the current row back in, so a far-away
    // batch leaves unreachable prototypes untouched too
    DynamicPrototypeState far;
    far.bank = make_bank(Matrix::from_rows({{1, 0, 0}, {0, 0, 0}}), 2, 1);
    const Matrix est = bmd::batch_prototype_estimate(Matrix::from_rows({{1, 0, 0}}), far);
    CHECK(est(1, 0) == 0.0);
    CHECK(est(1, 1) == 0.0);
    CHECK(est(1, 2) == 0.0);
    bmd::ema_update(far, est);
    CHECK(far.bank.is_degenerate(1, 0));
    CHECK_FALSE(far.bank.is_degenerate(0, 0));
}

TEST_CASE("without renormalization the EMA follows the exponential decay law") {
    for (const double lambda : {0.5, 0.9, 0.9999}) {
        DynamicPrototypeState state;
        state.bank = make_bank(Matrix::from_rows({{1, 0}}), 1, 1);
        state.lambda = lambda;
        const Matrix zero(1, 2);
        const int steps = 1000;
        for (int s = 0; s < steps; ++s) bmd::ema_update(state, zero, false);
        const double want = std::pow(lambda, static_cast<double>(steps));
        CHECK(state.bank.prototypes(0, 0) ==
              doctest::Approx(want).epsilon(1e-9));
        CHECK(state.bank.prototypes(0, 1) == 0.0);
        CHECK_FALSE(state.bank.normalized);
        CHECK(state.updates_applied == static_cast<std::size_t>(steps));
    }
}

TEST_CASE("renormalized EMA keeps every live row on the unit sphere") {
    SeededRng rng(19);
    DynamicPrototypeState state;
    state.bank = make_bank(random_unit_rows(6, 4, rng), 3, 2);
    state.lambda = 0.9;
    for (int step = 0; step < 20; ++step) {
        const Matrix batch = random_unit_rows(5, 4, rng);
        bmd::ema_update(state, bmd::batch_prototype_estimate(batch, state));
        for (std::size_t r = 0; r < 6; ++r)
            CHECK(bmd::row_norm(state.bank.prototypes, r) == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(state.bank.normalized);
}

TEST_CASE("dynamic soft labels are row-stochastic and reject empty batches") {
    SeededRng rng(23);
    DynamicPrototypeState state;
    state.bank = make_bank(random_unit_rows(12, 3, rng), 4, 3);
    const Matrix batch = random_unit_rows(32, 3, rng);
    const Matrix soft = bmd::dynamic_soft_labels(batch, state);
    REQUIRE(soft.cols() == 4);
    for (std::size_t i = 0; i < soft.rows(); ++i) {
        double total = 0.0;
        for (std::size_t k = 0; k < 4; ++k) total += soft(i, k);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK_THROWS_WITH_AS(bmd::dynamic_soft_labels(Matrix(), state), "empty input",
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(bmd::batch_prototype_estimate(Matrix(), state), "empty input",
                         std::invalid_argument);
    bmd::ema_update(state, state.bank.prototypes);
    CHECK_THROWS_AS(bmd::ema_update(state, Matrix(2, 2)), std::invalid_argument);
}
