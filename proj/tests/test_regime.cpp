#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "tailshape/errors.hpp"
#include "tailshape/regime.hpp"

using namespace tailshape;

TEST_CASE("absorbing start yields a single dwell") {
    auto gen = GeneratorSpec::two_state(0.0, 1.0);
    auto path = sample_path(gen, 100.0, 7);
    CHECK(path.jump_times.empty());
    CHECK(path.states == std::vector<std::size_t>{0});
    CHECK_THROWS_AS(gen.validate(), ParameterError);
}

TEST_CASE("paths are deterministic and well formed") {
    auto gen = GeneratorSpec::two_state(0.5, 2.0);
    auto a = sample_path(gen, 50.0, 123, 4);
    auto b = sample_path(gen, 50.0, 123, 4);
    CHECK(a == b);
    auto c = sample_path(gen, 50.0, 123, 5);
    CHECK_FALSE(a == c);
    for (std::size_t k = 0; k < a.jump_times.size(); ++k) {
        CHECK(a.jump_times[k] > 0);
        CHECK(a.jump_times[k] < 50);
        if (k) CHECK(a.jump_times[k] > a.jump_times[k - 1]);
        CHECK(a.states[k] != a.states[k + 1]);
    }
    std::ostringstream s1, s2;
    write_path_csv(s1, a, gen.states);
    write_path_csv(s2, b, gen.states);
    CHECK(s1.str() == s2.str());
}

TEST_CASE("dwell statistics") {
    auto gen = GeneratorSpec::two_state(1.0, 2.0);
    std::vector<double> dwells;
    std::vector<RegimePath> paths;
    for (std::uint64_t i = 0; dwells.size() < 100000; ++i) {
        paths.push_back(sample_path(gen, 200.0, 99, i));
        auto d = completed_dwells(paths.back(), 1);
        dwells.insert(dwells.end(), d.begin(), d.end());
    }
    double mean = 0;
    for (double d : dwells) mean += d;
    mean /= static_cast<double>(dwells.size());
    CHECK(mean >= 0.49);
    CHECK(mean <= 0.51);

    std::sort(dwells.begin(), dwells.end());
    std::vector<double> sub(dwells.begin(), dwells.end());
    double ks = 0;
    const double n = static_cast<double>(sub.size());
    for (std::size_t i = 0; i < sub.size(); ++i) {
        const double cdf = 1 - std::exp(-2.0 * sub[i]);
        ks = std::max({ks, std::abs(cdf - i / n), std::abs(cdf - (i + 1) / n)});
    }
    CHECK(ks <= 0.02);

    auto est = estimate_dwell_rates(paths, gen.states);
    CHECK(est[1].rate >= 1.96);
    CHECK(est[1].rate <= 2.04);
    CHECK(est[1].standard_error == doctest::Approx(est[1].rate / std::sqrt(static_cast<double>(est[1].count))));
}

TEST_CASE("dwell estimator arithmetic and censoring") {
    RegimePath p;
    p.horizon = 10;
    // S [0,1), U [1,1.5), S [1.5,3), U [3,4.5), S [4.5,10] (censored)
    p.jump_times = {1.0, 1.5, 3.0, 4.5};
    p.states = {0, 1, 0, 1, 0};
    auto est = estimate_dwell_rates({p}, {"S", "U"});
    CHECK(est[1].count == 2);
    CHECK(est[1].rate == doctest::Approx(1.0));
    CHECK(est[0].count == 2);
    CHECK(est[0].total_time == doctest::Approx(2.5));

    RegimePath only;
    only.horizon = 5;
    only.states = {1};
    auto none = estimate_dwell_rates({only}, {"S", "U"});
    CHECK_FALSE(none[1].available);
}

TEST_CASE("stationary distribution") {
    auto pi = stationary_distribution(GeneratorSpec::two_state(1.0, 3.0));
    CHECK(pi[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(pi[1] == doctest::Approx(0.25).epsilon(1e-12));
    auto sym = stationary_distribution(GeneratorSpec::two_state(2.0, 2.0));
    CHECK(sym[0] == doctest::Approx(0.5));
    auto scaled = stationary_distribution(GeneratorSpec::two_state(5.0, 15.0));
    CHECK(scaled[0] == doctest::Approx(0.75).epsilon(1e-12));

    GeneratorSpec red;
    red.states = {"A", "B", "C"};
    red.rates = Matrix{{0, 1, 0}, {1, 0, 0}, {1, 0, 0}};
    red.initial = {1, 0, 0};
    CHECK_THROWS_WITH_AS(stationary_distribution(red), doctest::Contains("C"), ParameterError);
}

TEST_CASE("ergodic time fraction") {
    auto gen = GeneratorSpec::two_state(1.0, 3.0);
    auto path = sample_path(gen, 20000.0, 5);
    double in_u = 0, start = 0;
    for (std::size_t k = 0; k <= path.jump_times.size(); ++k) {
        const double end = k < path.jump_times.size() ? path.jump_times[k] : path.horizon;
        if (path.states[k] == 1) in_u += end - start;
        start = end;
    }
    CHECK(std::abs(in_u / path.horizon - 0.25) <= 0.02 * 0.25 + 0.005);
}

TEST_CASE("three-state jump chain uses the embedded probabilities") {
    GeneratorSpec g;
    g.states = {"A", "B", "C"};
    g.rates = Matrix{{0, 1, 3}, {1, 0, 1}, {1, 1, 0}};
    g.initial = {1, 0, 0};
    std::size_t to_b = 0, total = 0;
    for (std::uint64_t i = 0; i < 20000; ++i) {
        auto p = sample_path(g, 50.0, 1, i);
        if (p.jump_times.empty()) continue;
        ++total;
        if (p.states[1] == 1) ++to_b;
    }
    CHECK(static_cast<double>(to_b) / total == doctest::Approx(0.25).epsilon(0.05));
}
