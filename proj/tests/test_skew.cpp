#include <catch2/catch_amalgamated.hpp>

#include "stairwind/skew.hpp"

#include <algorithm>
#include <cmath>

using namespace stairwind;

namespace {

SkewSystem half_width_skew(const Rat& slope, int sign = +1) {
    return quotient_base(WidthSequence::constant(Rat(1, 2)), Direction{slope, sign});
}

}  // namespace

TEST_CASE("quotient base requires a periodic width sequence") {
    Direction d{Rat(1, 5), +1};
    CHECK_NOTHROW(quotient_base(WidthSequence::constant(Rat(1, 2)), d));
    CHECK_NOTHROW(quotient_base(WidthSequence::zero(), d));
    CHECK_NOTHROW(quotient_base(WidthSequence::periodic({Rat(1, 3), Rat(1, 2)}), d));
    CHECK_THROWS_AS(quotient_base(WidthSequence::reciprocal_decay(), d), std::invalid_argument);
    CHECK_THROWS_AS(
        quotient_base(WidthSequence(0, {Rat(1, 2)}, TailKind::Constant, Rat(1, 2)), d),
        std::invalid_argument);
    CHECK(quotient_base(WidthSequence::periodic({Rat(1, 3), Rat(1, 2), Rat(1, 4)}), d).period() ==
          3);
    CHECK(quotient_base(WidthSequence::constant(Rat(1, 2)), d).period() == 1);
}

TEST_CASE("constant-width base splits into three pieces with symbols -1, 0, +1") {
    const Rat c(1, 3);
    SkewSystem sk = quotient_base(WidthSequence::constant(c), Direction{Rat(1, 5), +1});
    std::vector<Rat> cuts = sk.cuts(0);
    REQUIRE(cuts.size() == 3);
    std::sort(cuts.begin(), cuts.end());

    // walk the circular pieces between consecutive cuts
    std::vector<Rat> lengths;
    std::vector<int> psis;
    for (std::size_t i = 0; i < cuts.size(); ++i) {
        Rat lo = cuts[i];
        Rat hi = i + 1 < cuts.size() ? cuts[i + 1] : Rat(cuts[0] + 2);
        Rat mid = mod2((lo + hi) / 2);
        auto st = sk.base_step(0, mid);
        REQUIRE(st.has_value());
        lengths.push_back(hi - lo);
        psis.push_back(st->psi);
    }
    // collect by symbol: lengths must be (c, 2-2c, c) for psi = (-1, 0, +1)
    for (std::size_t i = 0; i < psis.size(); ++i) {
        if (psis[i] == -1) CHECK(lengths[i] == c);
        if (psis[i] == 0) CHECK(lengths[i] == 2 - 2 * c);
        if (psis[i] == +1) CHECK(lengths[i] == c);
    }
    std::vector<int> sorted_psis = psis;
    std::sort(sorted_psis.begin(), sorted_psis.end());
    CHECK(sorted_psis == std::vector<int>{-1, 0, +1});
}

TEST_CASE("skew orbit reproduces the staircase orbit through the cocycle") {
    auto run = [](const WidthSequence& w, const Direction& d, std::int64_t steps) {
        SkewSystem sk(w, d);
        const std::int64_t p = sk.period();
        SectionPoint z(0, Rat(17, 64));
        std::int64_t r = 0, fiber = 0;
        Rat x = z.x;
        for (std::int64_t t = 0; t < steps; ++t) {
            StepOutcome out = step(w, d, z);
            REQUIRE(out.moved());
            auto st = sk.base_step(r, x);
            REQUIRE(st.has_value());
            z = out.as_moved().to;
            fiber += st->psi;
            r = st->residue;
            x = st->x;
            REQUIRE(x == z.x);
            REQUIRE(fiber == z.level);
            REQUIRE(r == ((z.level % p) + p) % p);
        }
    };
    run(WidthSequence::constant(Rat(1, 2)), Direction{Rat(2521, 8191), +1}, 10000);
    run(WidthSequence::periodic({Rat(1, 3), Rat(1, 2), Rat(1, 4)}), Direction{Rat(2521, 8191), -1},
        2000);
}

TEST_CASE("invariant measure at a = 0 has exactly zero residual") {
    SkewSystem sk = half_width_skew(Rat(1, 4096));
    ConformalMeasure mu = solve_conformal(sk, 0.0, 1 << 14);
    CHECK(mu.residual == 0.0);
    CHECK(mu.residual_exact_zero);
    CHECK(mu.iterations == 0);
    // Lebesgue: every cell carries the same mass
    for (double m : mu.mass[0]) CHECK(m == mu.mass[0][0]);
}

TEST_CASE("conformal measure at a = 0.1 certifies a tiny residual on the exact grid") {
    SkewSystem sk = half_width_skew(Rat(1, 4096));
    ConformalMeasure mu = solve_conformal(sk, 0.1, 1 << 14);
    CHECK(mu.residual < 1e-8);
    CHECK_FALSE(mu.residual_exact_zero);
    double total = 0;
    for (double m : mu.mass[0]) {
        CHECK(m >= 0);
        total += m;
    }
    CHECK(total == Catch::Approx(1.0).margin(1e-12));
    // density is genuinely non-uniform
    auto [lo, hi] = std::minmax_element(mu.mass[0].begin(), mu.mass[0].end());
    CHECK(*hi > *lo);
}

TEST_CASE("reflection conjugacy pairs the measures for +a and -a") {
    const std::int64_t cells = 1 << 14;
    ConformalMeasure plus = solve_conformal(half_width_skew(Rat(1, 4096), +1), 0.1, cells);
    ConformalMeasure minus = solve_conformal(half_width_skew(Rat(1, 4096), -1), -0.1, cells);
    double worst = 0;
    for (std::int64_t i = 0; i < cells; ++i)
        worst = std::max(worst, std::fabs(plus.mass[0][static_cast<std::size_t>(i)] -
                                          minus.mass[0][static_cast<std::size_t>(cells - 1 - i)]));
    CHECK(worst < 1e-8);
}

TEST_CASE("transfer iteration handles incompatible grids and reports failure honestly") {
    SkewSystem sk = half_width_skew(Rat(1, 3));
    REQUIRE_FALSE(detail::grid_compatible(sk, 8));
    ConformalMeasure flat = solve_conformal(sk, 0.0, 8, 1e-10, 200);
    CHECK(flat.iterations >= 1);
    CHECK(flat.residual <= 1e-10);
    try {
        solve_conformal(sk, 0.3, 8, 1e-10, 200);
        FAIL("expected NonConvergence");
    } catch (const NonConvergence& e) {
        CHECK(e.residual_trace.size() == 200);
        CHECK(e.residual_trace.back() > 1e-10);
    }
}

TEST_CASE("fiber masses follow the exponential law exactly") {
    SkewSystem sk = half_width_skew(Rat(1, 4096));
    MaharamMeasure m = maharam_measure(solve_conformal(sk, 0.1, 1 << 14));
    CHECK(m.fiber_weight(0) == 1.0);
    for (std::int64_t n = -5; n <= 5; ++n) {
        CHECK(m.cylinder_mass(0, 7, n) == m.fiber_weight(n) * m.base.mass[0][7]);
        CHECK(m.cylinder_mass(0, 7, n + 1) / m.cylinder_mass(0, 7, n) ==
              Catch::Approx(std::exp(-0.1)).epsilon(1e-12));
    }
}

TEST_CASE("Maharam invariance defect vanishes exactly at a = 0") {
    SkewSystem sk = half_width_skew(Rat(1, 4096));
    MaharamMeasure m = maharam_measure(solve_conformal(sk, 0.0, 1 << 14));
    CHECK(maharam_invariance_check(sk, m, 10) == 0.0);
    CHECK(maharam_residual_exact_zero(sk, m));
}

TEST_CASE("Maharam invariance defect is small at a = 0.1 and scales homogeneously") {
    SkewSystem sk = half_width_skew(Rat(1, 4096));
    MaharamMeasure m = maharam_measure(solve_conformal(sk, 0.1, 1 << 14));
    CHECK_FALSE(maharam_residual_exact_zero(sk, m));
    double r1 = maharam_invariance_check(sk, m, 10);
    CHECK(r1 < 1e-6);
    m.scale = 3.0;
    double r3 = maharam_invariance_check(sk, m, 10);
    CHECK(r3 == Catch::Approx(3.0 * r1).margin(1e-18));
}

TEST_CASE("two Maharam parameters give genuinely non-proportional measures") {
    auto w = WidthSequence::constant(Rat(1, 2));
    Direction d{Rat(1, 4096), +1};
    CHECK_THROWS_AS(non_uniqueness_demo(w, d, 0.1, 0.1, 1 << 10), std::invalid_argument);
    NonUniquenessReport rep = non_uniqueness_demo(w, d, 0.1, -0.1, 1 << 14);
    CHECK(rep.invariance_residual_1 < 1e-6);
    CHECK(rep.invariance_residual_2 < 1e-6);
    CHECK(rep.ratios_non_constant);
    REQUIRE(rep.fiber_ratio.size() >= 3);
    CHECK(rep.fiber_ratio[0] == 1.0);
    for (std::size_t n = 0; n + 1 < rep.fiber_ratio.size(); ++n)
        CHECK(rep.fiber_ratio[n + 1] / rep.fiber_ratio[n] ==
              Catch::Approx(std::exp(-0.2)).epsilon(1e-12));
}
