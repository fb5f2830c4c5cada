#pragma once

// Test-function family (dyadic tents with positive floors), Hopf ratio
// averages with exact targets, uniform-convergence profiles on compact
// rings, the either-direction ratio criterion, and the perturbation-scale
// checks A0..A3 against a ringed staircase.

#include "stairwind/section_system.hpp"
#include "stairwind/singular.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace stairwind {

namespace detail {
inline bool dyadic(const Rat& r) {
    auto d = rat_den(r);
    while (d % 2 == 0) d /= 2;
    return d == 1;
}
}  // namespace detail

/// Continuous positive test function on the window X^N = {-N+1..N} x [0,2):
/// a sum of tent profiles on a dyadic grid plus a constant floor 2^{-q}.
class TestFunction {
public:
    struct Tent {
        Level level;
        Rat center, halfwidth, height;  // dyadic, 0 < halfwidth <= 1
    };

    TestFunction(Level N, int floor_q, std::vector<Tent> tents)
        : N_(N), floor_(1), tents_(std::move(tents)) {
        if (N < 1) throw std::invalid_argument("TestFunction: N >= 1 required");
        if (floor_q < 0 || floor_q > 62) throw std::invalid_argument("floor exponent out of range");
        floor_ = Rat(1, std::int64_t(1) << floor_q);
        rebuild_fast();
        for (const auto& t : tents_) {
            if (t.level < -N + 1 || t.level > N)
                throw std::invalid_argument("tent outside the support window");
            if (t.halfwidth <= 0 || t.halfwidth > 1 || t.height < 0)
                throw std::invalid_argument("bad tent shape");
            if (!detail::dyadic(t.center) || !detail::dyadic(t.halfwidth) ||
                !detail::dyadic(t.height))
                throw std::invalid_argument("tent parameters must be dyadic");
        }
    }

    static TestFunction floor_only(Level N, int floor_q) { return TestFunction(N, floor_q, {}); }

    Level window() const { return N_; }
    const Rat& floor() const { return floor_; }
    const std::vector<Tent>& tents() const { return tents_; }

    bool in_window(std::int64_t component) const {
        return component >= -N_ + 1 && component <= N_;
    }

    Rat value_exact(const SysPoint& p) const {
        if (!in_window(p.component)) return 0;
        Rat v = floor_;
        for (const auto& t : tents_) {
            if (t.level != p.component) continue;
            Rat dist = circle_dist(p.pos, t.center, 2);
            if (dist < t.halfwidth) v += t.height * (1 - dist / t.halfwidth);
        }
        return v;
    }

    double value(const SysPoint& p) const { return value(p.component, to_double(p.pos)); }

    /// Fast float evaluation; pos is the double image of the exact position.
    double value(std::int64_t component, double pos) const {
        if (!in_window(component)) return 0.0;
        double v = floor_d_;
        for (const auto& t : fast_tents_) {
            if (t.level != component) continue;
            double dist = std::fabs(pos - t.center);
            if (dist > 1.0) dist = 2.0 - dist;
            if (dist < t.halfwidth) v += t.height * (1.0 - dist / t.halfwidth);
        }
        return v;
    }

    /// Exact integral over X^N with the length measure: each tent contributes
    /// height * halfwidth, the floor contributes 2^{-q} * (2 levels * 2N).
    Rat integral() const {
        Rat total = floor_ * 4 * N_;
        for (const auto& t : tents_) total += t.height * t.halfwidth;
        return total;
    }

    TestFunction scaled(const Rat& c) const {
        if (c <= 0 || !detail::dyadic(c)) throw std::invalid_argument("scale must be dyadic > 0");
        std::vector<Tent> ts = tents_;
        for (auto& t : ts) t.height *= c;
        TestFunction out(N_, 0, std::move(ts));
        out.floor_ = floor_ * c;
        out.rebuild_fast();
        return out;
    }

private:
    struct FastTent {
        std::int64_t level;
        double center, halfwidth, height;
    };

    void rebuild_fast() {
        floor_d_ = to_double(floor_);
        fast_tents_.clear();
        for (const auto& t : tents_)
            fast_tents_.push_back({t.level, to_double(t.center), to_double(t.halfwidth),
                                   to_double(t.height)});
    }

    Level N_;
    Rat floor_;
    std::vector<Tent> tents_;
    double floor_d_ = 0;
    std::vector<FastTent> fast_tents_;
};

// ---------------------------------------------------------------------------
// Hopf ratio averages

enum class SumBackend { Rational, Float64 };

struct RatioRow {
    std::int64_t ell = 0;
    double num = 0, den = 0, ratio = 0, abs_dev = 0;
};

struct RatioReport {
    std::vector<RatioRow> rows;
    Rat target_exact;
    double target = 0;
    int sign = +1;
    bool truncated = false;       // orbit hit a singularity before the horizon
    std::int64_t steps_done = 0;  // points actually summed
};

class DenominatorZero : public std::runtime_error {
public:
    explicit DenominatorZero(std::int64_t ell)
        : std::runtime_error("Hopf denominator sum is zero at checkpoint " +
                             std::to_string(ell)) {}
};

/// Hopf ratios H_ell = sum_{i<ell} h_j(T^i z) / sum_{i<ell} h_n(T^i z) for
/// several (h_j, h_n) pairs over one shared orbit, reported at the requested
/// checkpoints; sign = -1 runs the inverse map.
inline std::vector<RatioReport> hopf_average_multi(
    const SectionSystem& sys, const std::vector<std::pair<TestFunction, TestFunction>>& pairs,
    const SysPoint& z, const std::vector<std::int64_t>& checkpoints, int sign,
    SumBackend backend = SumBackend::Float64) {
    if (checkpoints.empty()) throw std::invalid_argument("hopf_average: no checkpoints");
    for (std::size_t i = 0; i + 1 < checkpoints.size(); ++i)
        if (checkpoints[i] >= checkpoints[i + 1] || checkpoints[i] < 1)
            throw std::invalid_argument("hopf_average: checkpoints must be increasing, >= 1");
    const bool exact = backend == SumBackend::Rational;
    const std::size_t np = pairs.size();

    std::vector<RatioReport> reps(np);
    for (std::size_t q = 0; q < np; ++q) {
        reps[q].target_exact = pairs[q].first.integral() / pairs[q].second.integral();
        reps[q].target = to_double(reps[q].target_exact);
        reps[q].sign = sign;
    }

    std::vector<double> num_f(np, 0), den_f(np, 0);
    std::vector<Rat> num_r(np, 0), den_r(np, 0);
    SysPoint p = z;
    std::size_t next_cp = 0;
    const std::int64_t horizon = checkpoints.back();

    auto flush = [&](std::int64_t ell) {
        for (std::size_t q = 0; q < np; ++q) {
            double num = exact ? to_double(num_r[q]) : num_f[q];
            double den = exact ? to_double(den_r[q]) : den_f[q];
            if (den == 0) throw DenominatorZero(ell);
            RatioRow row{ell, num, den, num / den, 0};
            row.abs_dev = std::fabs(row.ratio - reps[q].target);
            reps[q].rows.push_back(row);
        }
    };

    for (std::int64_t i = 0; i < horizon; ++i) {
        if (exact) {
            for (std::size_t q = 0; q < np; ++q) {
                num_r[q] += pairs[q].first.value_exact(p);
                den_r[q] += pairs[q].second.value_exact(p);
            }
        } else {
            const double pos = to_double(p.pos);
            for (std::size_t q = 0; q < np; ++q) {
                num_f[q] += pairs[q].first.value(p.component, pos);
                den_f[q] += pairs[q].second.value(p.component, pos);
            }
        }
        for (auto& r : reps) ++r.steps_done;
        if (i + 1 == checkpoints[next_cp]) {
            flush(i + 1);
            ++next_cp;
        }
        if (i + 1 == horizon) break;
        SysOutcome out = sign >= 0 ? sys.forward(p) : sys.backward(p);
        if (!out.moved) {
            for (auto& r : reps) r.truncated = true;
            if (next_cp < checkpoints.size()) flush(i + 1);
            return reps;
        }
        p = out.to;
    }
    return reps;
}

inline RatioReport hopf_average(const SectionSystem& sys, const TestFunction& hj,
                                const TestFunction& hn, const SysPoint& z,
                                const std::vector<std::int64_t>& checkpoints, int sign,
                                SumBackend backend = SumBackend::Float64) {
    return hopf_average_multi(sys, {{hj, hn}}, z, checkpoints, sign, backend).front();
}

// ---------------------------------------------------------------------------
// Uniform convergence profile on a compact ring

struct UniformProfileRow {
    std::int64_t ell = 0;
    double sup_dev = 0;
};

struct UniformProfile {
    std::vector<UniformProfileRow> rows;
    std::size_t skipped = 0;  // grid points whose orbit truncated early
};

/// sup over the grid of |H_ell(z) - target| at each requested ell.
inline UniformProfile uniform_hopf_profile(const SectionSystem& sys, const TestFunction& hj,
                                           const TestFunction& hn,
                                           const std::vector<std::int64_t>& ell_list,
                                           const std::vector<SysPoint>& grid, int sign = +1) {
    UniformProfile prof;
    for (std::int64_t ell : ell_list) prof.rows.push_back({ell, 0.0});
    for (const SysPoint& z : grid) {
        RatioReport rep = hopf_average(sys, hj, hn, z, ell_list, sign);
        if (rep.truncated) {
            ++prof.skipped;
            continue;
        }
        for (std::size_t i = 0; i < prof.rows.size(); ++i)
            if (rep.rows[i].abs_dev > prof.rows[i].sup_dev)
                prof.rows[i].sup_dev = rep.rows[i].abs_dev;
    }
    return prof;
}

// ---------------------------------------------------------------------------
// Either-direction ratio criterion

enum class RatioVerdict { ForwardOk, BackwardOk, Fail };

struct CriterionReport {
    std::vector<RatioVerdict> verdicts;  // one per sample point
    double certified_fraction = 1.0;     // forward-ok or backward-ok share
};

/// For each sample point, check whether all pairs' forward Hopf ratios (or,
/// failing that, all backward ones) are within tol of the exact targets at
/// the final checkpoint.
inline CriterionReport uniqueness_criterion_check(
    const SectionSystem& sys,
    const std::vector<std::pair<TestFunction, TestFunction>>& pairs,
    const std::vector<SysPoint>& z_samples, const std::vector<std::int64_t>& ell_list,
    double tol) {
    CriterionReport rep;
    std::size_t ok = 0;
    for (const SysPoint& z : z_samples) {
        auto all_within = [&](int sign) {
            for (const auto& [hj, hn] : pairs) {
                RatioReport r = hopf_average(sys, hj, hn, z, ell_list, sign);
                // tol is relative to the target ratio
                if (r.truncated || r.rows.back().abs_dev > tol * std::fabs(r.target))
                    return false;
            }
            return true;
        };
        RatioVerdict v = RatioVerdict::Fail;
        if (all_within(+1)) v = RatioVerdict::ForwardOk;
        else if (all_within(-1)) v = RatioVerdict::BackwardOk;
        if (v != RatioVerdict::Fail) ++ok;
        rep.verdicts.push_back(v);
    }
    rep.certified_fraction =
        z_samples.empty() ? 1.0 : static_cast<double>(ok) / static_cast<double>(z_samples.size());
    return rep;
}

// ---------------------------------------------------------------------------
// Perturbation-scale checks A0..A3

struct GenericityReport {
    bool a0 = false;  // all widths on the window levels are positive
    bool a1 = false;  // partition min-gap at most halved by the perturbation
    bool a2 = false;  // Hopf ratios move by < gamma under the interval matching
    bool a3 = false;  // backward/forward separation at most halved
    double max_a2_dev = 0;  // the minimal passing gamma is this value (exclusive)
    bool all() const { return a0 && a1 && a2 && a3; }
};

/// Compare the perturbed staircase w against the ringed reference on a set
/// of directions: width positivity (A0), partition-gap stability (A1),
/// Hopf-ratio stability across the interval matching (A2, both signs), and
/// separation stability (A3).  The Hopf pair is a canonical level-bottom
/// tent against the floor function.
inline GenericityReport genericity_scale_check(const WidthSequence& w_ringed,
                                               const WidthSequence& w,
                                               const std::vector<Direction>& d_set, Level N,
                                               int ell, double gamma) {
    GenericityReport rep;
    rep.a0 = true;
    for (Level j = -N + 1; j <= N - 1; ++j)
        if (w.at(j) <= 0) rep.a0 = false;

    TestFunction hj(N, 6, {{-N + 1, Rat(1, 2), Rat(1, 4), Rat(1)}});
    TestFunction hn = TestFunction::floor_only(N, 6);
    const std::vector<std::int64_t> cps = {ell};

    rep.a1 = rep.a2 = rep.a3 = true;
    for (const Direction& d : d_set) {
        if (!(separation_iota(w, d, N, ell) > separation_iota(w_ringed, d, N, ell) / 2))
            rep.a3 = false;

        const Rat eta_r = continuity_partition(w_ringed, d, N, ell).min_gap;
        for (int sign : {+1, -1}) {
            MatchingMap zeta = zeta_map(w_ringed, w, d, N, ell, sign);
            // A1 over the surviving (matched) intervals: the bifurcation
            // newborns are excluded, their width is the perturbation itself
            for (const auto& pr : zeta.pairs)
                if (!(pr.to.hi - pr.to.lo > eta_r / 2)) rep.a1 = false;
            StaircaseSystem sys_r(w_ringed, Direction(d.slope, sign));
            StaircaseSystem sys_w(w, Direction(d.slope, sign));
            for (const auto& pr : zeta.pairs) {
                // midpoint of the perturbed interval, matched affinely
                Rat zw = mod2((pr.to.lo + pr.to.hi) / 2);
                Rat zr = mod2(pr.from.lo + (pr.from.hi - pr.from.lo) / 2);
                RatioReport rw = hopf_average(sys_w, hj, hn, {pr.to.level, zw}, cps, +1);
                RatioReport rr = hopf_average(sys_r, hj, hn, {pr.from.level, zr}, cps, +1);
                if (rw.truncated || rr.truncated) continue;
                double dev = std::fabs(rw.rows.back().ratio - rr.rows.back().ratio);
                if (dev > rep.max_a2_dev) rep.max_a2_dev = dev;
                if (!(dev < gamma)) rep.a2 = false;
            }
        }
    }
    return rep;
}

}  // namespace stairwind
