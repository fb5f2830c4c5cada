#pragma once

// Periodic staircases as skew products over a finite union of circles,
// numerically solved conformal measures (cell-exact when the refinement
// grid is compatible with the map, transfer-operator iteration otherwise),
// Maharam measures on the Z-cover, and the non-proportionality witness.

#include "stairwind/staircase.hpp"

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace stairwind {

// ---------------------------------------------------------------------------
// Skew product over the level-shift quotient

/// Quotient of a p-periodic staircase return map by the level shift: the
/// base tau acts on {0..p-1} x [0,2), the cocycle psi in {-1,0,+1} is the
/// slit symbol, and the skew map is (x, n) -> (tau x, n + psi(x)).
class SkewSystem {
public:
    struct BaseStep {
        std::int64_t residue;
        Rat x;
        int psi;  // slit symbol of the underlying step
    };

    SkewSystem(WidthSequence w, Direction d) : w_(std::move(w)), d_(std::move(d)) {
        switch (w_.tail()) {
            case TailKind::Constant:
            case TailKind::Zero:
                p_ = 1;
                break;
            case TailKind::PeriodicFromWindow:
                p_ = static_cast<std::int64_t>(w_.window().size());
                break;
            default:
                throw std::invalid_argument("quotient_base: width sequence must be periodic");
        }
        if (w_.tail() != TailKind::PeriodicFromWindow && !w_.window().empty())
            throw std::invalid_argument("quotient_base: explicit window breaks periodicity");
    }

    std::int64_t period() const { return p_; }
    const WidthSequence& widths() const { return w_; }
    const Direction& direction() const { return d_; }

    std::optional<BaseStep> base_step(std::int64_t r, const Rat& x) const {
        StepOutcome out = step(w_, d_, SectionPoint(r, x));
        if (!out.moved()) return std::nullopt;
        const auto& m = out.as_moved();
        int psi = static_cast<int>(m.slit);
        std::int64_t r2 = ((r + psi) % p_ + p_) % p_;
        return BaseStep{r2, m.to.x, psi};
    }

    /// Forward singular positions on the residue-r circle.
    std::vector<Rat> cuts(std::int64_t r) const {
        const Rat sdelta = d_.vertical_sign >= 0 ? d_.half_step() : -d_.half_step();
        std::vector<Rat> out;
        for (const Rat& j : {w_.at(r - 1), 2 - w_.at(r), Rat(2)}) out.push_back(mod2(j - sdelta));
        return out;
    }

private:
    WidthSequence w_;
    Direction d_;
    std::int64_t p_ = 1;
};

inline SkewSystem quotient_base(WidthSequence w, Direction d) {
    return SkewSystem(std::move(w), std::move(d));
}

// ---------------------------------------------------------------------------
// Conformal measures

struct ConformalMeasure {
    double a = 0;
    std::int64_t cells = 0;                 // uniform cells per residue circle
    std::vector<std::vector<double>> mass;  // [residue][cell], sums to 1
    double residual = 0;                    // sup-cell conformality defect
    bool residual_exact_zero = false;       // certified by rational arithmetic
    std::int64_t iterations = 0;            // 0 for the cell-exact path

    double density(std::int64_t r, std::int64_t cell) const {
        return mass[static_cast<std::size_t>(r)][static_cast<std::size_t>(cell)] *
               static_cast<double>(cells) / 2.0;
    }
};

class NonConvergence : public std::runtime_error {
public:
    NonConvergence(std::string what, std::vector<double> trace)
        : std::runtime_error(std::move(what)), residual_trace(std::move(trace)) {}
    std::vector<double> residual_trace;
};

namespace detail {

/// True iff every cut and every piece translation of the base is an integer
/// multiple of the cell width 2/cells, so tau permutes the grid cells.
inline bool grid_compatible(const SkewSystem& sk, std::int64_t cells) {
    const Rat h(2, cells);
    for (std::int64_t r = 0; r < sk.period(); ++r) {
        for (const Rat& c : sk.cuts(r))
            if (rat_den(Rat(c / h)) != 1) return false;
        // translation amounts: sample one interior point per piece
        std::vector<Rat> ends = sk.cuts(r);
        ends.push_back(0);
        ends.push_back(2);
        std::sort(ends.begin(), ends.end());
        for (std::size_t i = 0; i + 1 < ends.size(); ++i) {
            if (ends[i] == ends[i + 1]) continue;
            Rat mid = (ends[i] + ends[i + 1]) / 2;
            auto st = sk.base_step(r, mid);
            if (!st) return false;
            if (rat_den(Rat((st->x - mid) / h)) != 1) return false;
        }
    }
    return true;
}

struct CellMap {
    std::vector<std::int64_t> target;  // flat cell index -> image cell index
    std::vector<int> psi;
};

inline CellMap build_cell_permutation(const SkewSystem& sk, std::int64_t cells) {
    const std::int64_t p = sk.period();
    CellMap cm;
    cm.target.resize(static_cast<std::size_t>(p * cells));
    cm.psi.resize(static_cast<std::size_t>(p * cells));
    const Rat h(2, cells);
    for (std::int64_t r = 0; r < p; ++r)
        for (std::int64_t i = 0; i < cells; ++i) {
            Rat mid = h * i + h / 2;
            auto st = sk.base_step(r, mid);
            if (!st) throw std::logic_error("cell midpoint is singular on a compatible grid");
            Rat pos = st->x / h;
            std::int64_t j = static_cast<std::int64_t>(rat_num(pos) / rat_den(pos));
            cm.target[static_cast<std::size_t>(r * cells + i)] = st->residue * cells + j;
            cm.psi[static_cast<std::size_t>(r * cells + i)] = st->psi;
        }
    return cm;
}

}  // namespace detail

/// Solve mu(tau A) = e^{a psi(A)} mu(A) on a uniform grid of `cells` cells
/// per residue circle.  When tau exactly permutes the cells, masses are
/// assigned cycle-by-cycle in closed form (cycles with net level drift must
/// carry zero mass).  Otherwise the weighted transfer operator is iterated
/// until the conformality residual falls below tol.
inline ConformalMeasure solve_conformal(const SkewSystem& sk, double a, std::int64_t cells,
                                        double tol = 1e-10, std::int64_t max_iter = 20000) {
    if (cells < 2 || cells % 2 != 0) throw std::invalid_argument("cells must be even, >= 2");
    const std::int64_t p = sk.period();
    const std::size_t n = static_cast<std::size_t>(p * cells);

    ConformalMeasure out;
    out.a = a;
    out.cells = cells;
    out.mass.assign(static_cast<std::size_t>(p), std::vector<double>(cells, 0.0));

    if (detail::grid_compatible(sk, cells)) {
        detail::CellMap cm = detail::build_cell_permutation(sk, cells);
        std::vector<double> mass(n, 0.0);
        std::vector<char> seen(n, 0);
        bool any = false;
        for (std::size_t s = 0; s < n; ++s) {
            if (seen[s]) continue;
            // walk the cycle, tracking the partial drift sums
            std::vector<std::size_t> cyc;
            std::vector<long> drift;
            long acc = 0;
            std::size_t c = s;
            do {
                cyc.push_back(c);
                drift.push_back(acc);
                acc += cm.psi[c];
                seen[c] = 1;
                c = static_cast<std::size_t>(cm.target[c]);
            } while (c != s);
            if (acc != 0 && a != 0.0) continue;  // drifting cycle: zero mass
            any = true;
            for (std::size_t i = 0; i < cyc.size(); ++i)
                mass[cyc[i]] = std::exp(a * static_cast<double>(drift[i]));
        }
        if (!any)
            throw NonConvergence("no drift-free cycle on the grid carries a conformal measure",
                                 {});
        double total = std::accumulate(mass.begin(), mass.end(), 0.0);
        for (auto& m : mass) m /= total;

        // honest residual: |mu(tau A) - e^{a psi(A)} mu(A)| over cells
        double res = 0;
        for (std::size_t c = 0; c < n; ++c) {
            double d = std::fabs(mass[static_cast<std::size_t>(cm.target[c])] -
                                 std::exp(a * cm.psi[c]) * mass[c]);
            if (d > res) res = d;
        }
        out.residual = res;
        out.residual_exact_zero = a == 0.0;  // uniform mass, permutation: exact
        for (std::int64_t r = 0; r < p; ++r)
            for (std::int64_t i = 0; i < cells; ++i)
                out.mass[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] =
                    mass[static_cast<std::size_t>(r * cells + i)];
        return out;
    }

    // incompatible grid: iterate the weighted, overlap-averaged transfer map
    const Rat h(2, cells);
    struct Edge {
        std::int64_t from, to;
        double frac, weight;
    };
    std::vector<Edge> edges;
    for (std::int64_t r = 0; r < p; ++r)
        for (std::int64_t i = 0; i < cells; ++i) {
            // split the cell at the map's cuts, push each piece
            std::vector<Rat> ends = {h * i, h * (i + 1)};
            for (const Rat& c : sk.cuts(r))
                if (c > ends[0] && c < ends[1]) ends.push_back(c);
            std::sort(ends.begin(), ends.end());
            for (std::size_t e = 0; e + 1 < ends.size(); ++e) {
                Rat mid = (ends[e] + ends[e + 1]) / 2;
                auto st = sk.base_step(r, mid);
                if (!st) continue;
                Rat lo = mod2(ends[e] + (st->x - mid));
                Rat len = ends[e + 1] - ends[e];
                double weight = std::exp(a * st->psi);
                double frac_piece = to_double(len / h);
                // distribute [lo, lo+len) over target cells
                Rat cursor = lo;
                Rat remaining = len;
                while (remaining > 0) {
                    Rat cpos = cursor / h;
                    std::int64_t j = static_cast<std::int64_t>(rat_num(cpos) / rat_den(cpos));
                    if (j >= cells) { j = 0; cursor = 0; }
                    Rat cell_end = h * (j + 1);
                    Rat take = cell_end - cursor < remaining ? Rat(cell_end - cursor) : remaining;
                    edges.push_back({r * cells + i, st->residue * cells + j,
                                     frac_piece * to_double(take / len), weight});
                    cursor = mod2(cursor + take);
                    remaining -= take;
                }
            }
        }

    std::vector<double> mu(n, 1.0 / static_cast<double>(n)), next(n, 0.0);
    std::vector<double> got(n, 0.0), want(n, 0.0);
    std::vector<double> trace;

    // mu(tau A_c) = sum over image pieces of density at the target cell times
    // the piece length: got[c]; the conformal demand is want[c].
    auto residual_now = [&]() {
        std::fill(got.begin(), got.end(), 0.0);
        std::fill(want.begin(), want.end(), 0.0);
        for (const Edge& e : edges) {
            got[static_cast<std::size_t>(e.from)] += mu[static_cast<std::size_t>(e.to)] * e.frac;
            want[static_cast<std::size_t>(e.from)] +=
                e.weight * mu[static_cast<std::size_t>(e.from)] * e.frac;
        }
        double res = 0;
        for (std::size_t c = 0; c < n; ++c) {
            double d = std::fabs(got[c] - want[c]);
            if (d > res) res = d;
        }
        return res;
    };

    for (std::int64_t it = 0; it < max_iter; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        for (const Edge& e : edges)
            next[static_cast<std::size_t>(e.to)] +=
                mu[static_cast<std::size_t>(e.from)] * e.frac * e.weight;
        double total = std::accumulate(next.begin(), next.end(), 0.0);
        for (auto& m : next) m /= total;
        std::swap(mu, next);
        double res = residual_now();
        trace.push_back(res);
        out.iterations = it + 1;
        if (res <= tol) {
            out.residual = res;
            for (std::int64_t r = 0; r < p; ++r)
                for (std::int64_t i = 0; i < cells; ++i)
                    out.mass[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] =
                        mu[static_cast<std::size_t>(r * cells + i)];
            return out;
        }
    }
    throw NonConvergence("transfer iteration did not certify the conformality residual", trace);
}

// ---------------------------------------------------------------------------
// Maharam measures on the Z-cover

struct MaharamMeasure {
    ConformalMeasure base;
    double a = 0;

    double fiber_weight(std::int64_t nlevel) const {
        return std::exp(-a * static_cast<double>(nlevel));
    }
    /// Mass of the cylinder (residue r, cell i, fiber n).
    double cylinder_mass(std::int64_t r, std::int64_t cell, std::int64_t nlevel) const {
        return fiber_weight(nlevel) *
               base.mass[static_cast<std::size_t>(r)][static_cast<std::size_t>(cell)];
    }
    double scale = 1.0;
};

inline MaharamMeasure maharam_measure(ConformalMeasure mu) {
    MaharamMeasure m;
    m.a = mu.a;
    m.base = std::move(mu);
    return m;
}

/// Max over cylinders (grid cell x fiber |n| <= depth) of
/// |m(T^{-1} E) - m(E)|, scaled by m.scale.
inline double maharam_invariance_check(const SkewSystem& sk, const MaharamMeasure& m,
                                       std::int64_t depth) {
    const std::int64_t cells = m.base.cells;
    if (!detail::grid_compatible(sk, cells))
        throw std::invalid_argument("invariance check needs a grid-compatible measure");
    detail::CellMap cm = detail::build_cell_permutation(sk, cells);
    const std::int64_t p = sk.period();
    double worst = 0;
    for (std::int64_t r = 0; r < p; ++r)
        for (std::int64_t i = 0; i < cells; ++i) {
            std::size_t c = static_cast<std::size_t>(r * cells + i);
            std::size_t tc = static_cast<std::size_t>(cm.target[c]);
            std::int64_t tr = cm.target[c] / cells, ti = cm.target[c] % cells;
            (void)tc;
            for (std::int64_t nlevel = -depth; nlevel <= depth; ++nlevel) {
                // E = (target cell, n + psi); T^{-1}E = (source cell, n)
                double mE = m.cylinder_mass(tr, ti, nlevel + cm.psi[c]);
                double mPre = m.cylinder_mass(r, i, nlevel);
                double d = std::fabs(mE - mPre) * m.scale;
                if (d > worst) worst = d;
            }
        }
    return worst;
}

/// True when the a = 0 construction makes the invariance defect vanish
/// identically: uniform rational masses on a permutation cancel exactly.
inline bool maharam_residual_exact_zero(const SkewSystem& sk, const MaharamMeasure& m) {
    return m.a == 0.0 && m.base.residual_exact_zero;
}

// ---------------------------------------------------------------------------
// Non-proportionality demonstration

struct NonUniquenessReport {
    MaharamMeasure m1, m2;
    double invariance_residual_1 = 0, invariance_residual_2 = 0;
    std::vector<double> fiber_ratio;  // (m1 fiber n)/(m2 fiber n), n = 0,1,2,...
    bool ratios_non_constant = false;
};

inline NonUniquenessReport non_uniqueness_demo(const WidthSequence& w, const Direction& d,
                                               double a1, double a2, std::int64_t cells,
                                               std::int64_t cylinder_depth = 10) {
    if (a1 == a2) throw std::invalid_argument("non_uniqueness_demo: need two distinct parameters");
    SkewSystem sk(w, d);
    NonUniquenessReport rep;
    rep.m1 = maharam_measure(solve_conformal(sk, a1, cells));
    rep.m2 = maharam_measure(solve_conformal(sk, a2, cells));
    rep.invariance_residual_1 = maharam_invariance_check(sk, rep.m1, cylinder_depth);
    rep.invariance_residual_2 = maharam_invariance_check(sk, rep.m2, cylinder_depth);
    for (std::int64_t nlevel = 0; nlevel <= 4; ++nlevel)
        rep.fiber_ratio.push_back(rep.m1.fiber_weight(nlevel) / rep.m2.fiber_weight(nlevel));
    for (std::size_t i = 0; i + 1 < rep.fiber_ratio.size(); ++i)
        if (rep.fiber_ratio[i] != rep.fiber_ratio[i + 1]) rep.ratios_non_constant = true;
    return rep;
}

}  // namespace stairwind
