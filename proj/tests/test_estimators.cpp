#include <cmath>
#include <numbers>

#include "doctest.h"
#include "tailshape/estimators.hpp"

using namespace tailshape;

namespace {

constexpr std::uint32_t S = 0, U = 1;

Sample at(double t, double norm, std::uint32_t z, Mode m = Mode::normal, std::int32_t grid = -1, double align = 1.0) {
    Sample s;
    s.t = t;
    s.state_norm = norm;
    s.energy = norm;
    s.regime = z;
    s.mode = m;
    s.grid_index = grid;
    s.alignment = align;
    return s;
}

// Grid on [0, T] with step dt; z(t) and ||X(t)|| supplied by callbacks.
template <class Z, class N>
Trajectory synthetic(double horizon, double dt, Z&& regime_of, N&& norm_of) {
    Trajectory tr;
    tr.horizon = horizon;
    const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
    std::uint32_t prev = regime_of(0.0);
    for (std::size_t j = 0; j <= steps; ++j) {
        const double t = j * dt;
        const std::uint32_t z = regime_of(t);
        if (z != prev) {
            // Switch sample: grid point with old labels, then the new labels.
            tr.samples.push_back(at(t, norm_of(t), prev, Mode::normal, static_cast<std::int32_t>(j)));
            tr.samples.push_back(at(t, norm_of(t), z));
            prev = z;
            continue;
        }
        tr.samples.push_back(at(t, norm_of(t), z, Mode::normal, static_cast<std::int32_t>(j)));
    }
    return tr;
}

}  // namespace

TEST_CASE("detect_uncontrolled_dwells") {
    Trajectory never;
    never.samples = {at(0, 1, S, Mode::normal, 0), at(1, 1, S, Mode::normal, 1)};
    CHECK(detect_uncontrolled_dwells(never, U, 0.1).empty());

    Trajectory tr;
    tr.samples = {at(0, 1, S, Mode::normal, 0), at(1, 1, U), at(2, 2, U, Mode::verify), at(3, 3, S),
                  at(4, 3, S, Mode::normal, 4)};
    auto iv = detect_uncontrolled_dwells(tr, U, 0.5);
    REQUIRE(iv.size() == 1);
    CHECK(iv[0].t0 == 1);
    CHECK(iv[0].t1 == 2);
    CHECK(iv[0].norm1 == 2);

    Trajectory two;
    two.samples = {at(0, 1, S, Mode::normal, 0), at(1, 1, U), at(1.4, 1, S), at(2, 1, U), at(3.2, 1, S),
                   at(4, 1, S, Mode::normal, 1)};
    auto iv2 = detect_uncontrolled_dwells(two, U, 0.5);
    REQUIRE(iv2.size() == 1);
    CHECK(iv2[0].t0 == 2);
    CHECK(iv2[0].t1 == doctest::Approx(3.2));
}

TEST_CASE("gamma_dwell") {
    std::vector<DwellInterval> iv{{0, 1, 3, U, Mode::normal, 2.0, 2.0 * std::exp(1.0)}};
    auto g = gamma_dwell(iv);
    CHECK(g.samples[0] == doctest::Approx(0.5));
    iv[0].norm1 = 2.0;
    CHECK(gamma_dwell(iv).samples[0] == 0.0);

    std::vector<DwellInterval> five;
    for (double r : {0.1, 0.3, 0.5, 0.7, 0.9}) five.push_back({0, 0, 1, U, Mode::normal, 1.0, std::exp(r)});
    CHECK(gamma_dwell(five, 0.9).value == doctest::Approx(0.9));

    // Scale invariance.
    auto scaled = five;
    for (auto& d : scaled) {
        d.norm0 *= 7.5;
        d.norm1 *= 7.5;
    }
    auto a = gamma_dwell(five), b = gamma_dwell(scaled);
    for (std::size_t i = 0; i < 5; ++i) CHECK(a.samples[i] == doctest::Approx(b.samples[i]).epsilon(1e-14));

    five.push_back({0, 0, 1, U, Mode::normal, 0.0, 1.0});
    CHECK(gamma_dwell(five).skipped == 1);
}

TEST_CASE("gamma_operator") {
    auto op = LiftedOperator::from_matrix(Matrix{{-2, 0.5}, {1, -1}});
    CHECK(gamma_operator(op) == log_norm_2(op.matrix()));
    CHECK(gamma_operator(op) == doctest::Approx((-3 + std::sqrt(1 + 2.25)) / 2));
}

TEST_CASE("alignment_ratio") {
    Vector v{0.6, 0.8};
    CHECK(*alignment_ratio(Vector{3, 4}, v) == doctest::Approx(1));
    CHECK(std::abs(*alignment_ratio(Vector{-4, 3}, v)) < 1e-15);
    CHECK(*alignment_ratio(Vector{-0.6, -0.8}, v) == doctest::Approx(-1));
    CHECK_FALSE(alignment_ratio(Vector{0, 0}, v).has_value());
}

TEST_CASE("gamma_cone") {
    const double gamma = 0.4;
    auto all_u = synthetic(10, 0.01, [](double) { return U; }, [&](double t) { return std::exp(gamma * t); });
    auto g = gamma_cone({&all_u}, U, 0.5, 10);
    REQUIRE(g.available);
    CHECK(g.value == doctest::Approx(gamma).epsilon(1e-12));
    CHECK_FALSE(gamma_cone({&all_u}, U, 1.0 + 1e-9, 10).available);

    // Two segments growing at 0.2 and 0.6 in equal proportion.
    auto mixed = synthetic(
        20, 0.01, [](double) { return U; },
        [](double t) { return t < 10 ? std::exp(0.2 * t) : std::exp(2.0 + 0.6 * (t - 10)); });
    auto gm = gamma_cone({&mixed}, U, 0.5, 10);
    CHECK(gm.value == doctest::Approx(0.6).epsilon(1e-9));

    // Windows must not straddle a regime switch.
    auto switching = synthetic(
        10, 0.01, [](double t) { return t < 5 ? U : S; }, [](double t) { return t <= 5 ? std::exp(0.1 * t) : 100.0; });
    auto rates = cone_window_rates(switching, U, 0.0, 10);
    for (double r : rates) CHECK(r == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(rates.size() == 491);
}

TEST_CASE("cone estimate never exceeds the operator rate along the top direction") {
    // x' = A x started on v_U: at alpha = 1 and a one-step window the window
    // rate is bounded by mu_2.
    Matrix a{{-0.2, 1.5}, {0.0, -0.5}};
    auto op = LiftedOperator::from_matrix(a);
    SolverConfig cfg;
    cfg.output_intervals = 1000;
    RegimePath path;
    path.horizon = 1.0;
    path.states = {0};
    TrajectoryOptions opt;
    opt.probe = op.top_direction();
    auto tr = integrate_trajectory(constant_table(op), Forcing{Forcing::Kind::none, 0, 0, 0}, path, PolicyConfig{},
                                   op.top_direction(), cfg, opt);
    auto g = gamma_cone({&tr}, 0, 1.0 - 1e-12, 1);
    REQUIRE(g.available);
    CHECK(g.value <= gamma_operator(op) + 1e-6);
}

TEST_CASE("forcing_projection_diagnostic") {
    Forcing f{Forcing::Kind::sinusoid, 1, 2.0, 1.0};
    auto d0 = forcing_projection_diagnostic(f, Vector{1, 0, 0}, 10);
    CHECK(d0.min == 0);
    CHECK(d0.mean == 0);
    // Grid of 2001 points on [0, 2 pi] includes 3 pi / 2.
    auto d1 = forcing_projection_diagnostic(f, Vector{0, 1, 0}, 2 * std::numbers::pi, 2001);
    CHECK(d1.min == doctest::Approx(-2.0).epsilon(1e-12));
    Forcing c{Forcing::Kind::constant, 1, 3.0, 0.0};
    auto d2 = forcing_projection_diagnostic(c, Vector{0, 0.5, 0}, 10);
    CHECK(d2.min == doctest::Approx(1.5));
    CHECK(d2.mean == doctest::Approx(1.5));
}
