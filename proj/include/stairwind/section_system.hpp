#pragma once

// A uniform "piecewise isometry on a countable union of circles" interface
// over the staircase and wind-tree return maps, with orbit iteration,
// exact interval pushforward, and the conservativity box certificate.

#include "stairwind/staircase.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace stairwind {

struct SysPoint {
    std::int64_t component = 0;
    Rat pos;

    bool operator==(const SysPoint& o) const { return component == o.component && pos == o.pos; }
};

struct SysOutcome {
    bool moved = false;
    SysPoint to;     // valid iff moved
    int label = 0;   // system-specific branch label (staircase: slit symbol)
};

/// Countable union of circles with a piecewise-translation dynamic on it.
/// forward/backward are mutually inverse off singular orbits; forward_cuts
/// lists the finitely many singular positions of the forward map per circle.
class SectionSystem {
public:
    virtual ~SectionSystem() = default;
    virtual Rat circumference(std::int64_t component) const = 0;
    virtual SysOutcome forward(const SysPoint& p) const = 0;
    virtual SysOutcome backward(const SysPoint& p) const = 0;
    virtual std::vector<Rat> forward_cuts(std::int64_t component) const = 0;
};

/// Staircase return map as a SectionSystem; component = level.
class StaircaseSystem final : public SectionSystem {
public:
    StaircaseSystem(WidthSequence w, Direction d) : w_(std::move(w)), d_(std::move(d)) {}

    Rat circumference(std::int64_t) const override { return 2; }

    SysOutcome forward(const SysPoint& p) const override { return convert(step(w_, d_, lift(p))); }

    SysOutcome backward(const SysPoint& p) const override {
        return convert(inverse_step(w_, d_, lift(p)));
    }

    std::vector<Rat> forward_cuts(std::int64_t k) const override {
        const Rat sdelta = d_.vertical_sign >= 0 ? d_.half_step() : -d_.half_step();
        std::set<Rat> cuts;
        for (const Rat& j : {w_.at(k - 1), 2 - w_.at(k), Rat(2)}) cuts.insert(mod2(j - sdelta));
        return {cuts.begin(), cuts.end()};
    }

    const WidthSequence& widths() const { return w_; }
    const Direction& direction() const { return d_; }

private:
    static SectionPoint lift(const SysPoint& p) { return SectionPoint(p.component, p.pos); }
    static SysOutcome convert(const StepOutcome& out) {
        if (!out.moved()) return {};
        const auto& m = out.as_moved();
        return {true, {m.to.level, m.to.x}, static_cast<int>(m.slit)};
    }

    WidthSequence w_;
    Direction d_;
};

// ---------------------------------------------------------------------------
// Orbits

enum class OrbitEnd { Budget, Singular };

struct OrbitRecord {
    SysPoint start;
    std::vector<SysPoint> points;  // images after 1..n steps
    std::vector<int> labels;       // branch label per step
    OrbitEnd end = OrbitEnd::Budget;
};

inline OrbitRecord orbit(const SectionSystem& sys, const SysPoint& start, std::int64_t budget) {
    if (budget < 0) throw std::invalid_argument("orbit budget must be >= 0");
    OrbitRecord rec;
    rec.start = start;
    rec.points.reserve(static_cast<std::size_t>(budget));
    SysPoint p = start;
    for (std::int64_t i = 0; i < budget; ++i) {
        SysOutcome out = sys.forward(p);
        if (!out.moved) {
            rec.end = OrbitEnd::Singular;
            return rec;
        }
        p = out.to;
        rec.points.push_back(p);
        rec.labels.push_back(out.label);
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Interval pushforward

/// Half-open arc [lo, hi) on one component circle, 0 <= lo < hi <= circumference.
struct Arc {
    std::int64_t component = 0;
    Rat lo, hi;

    Rat length() const { return hi - lo; }
};

/// Exact image of the half-open interval [a,b) on a component circle under
/// one forward step.  The interval is split at the forward cuts; each piece
/// maps by the translation sampled at its midpoint; wrapping pieces are
/// split again at the 0 ~ circumference seam.
inline std::vector<Arc> pushforward_interval(const SectionSystem& sys, std::int64_t component,
                                             const Rat& a, const Rat& b) {
    const Rat circ = sys.circumference(component);
    if (a < 0 || b > circ || a >= b)
        throw std::invalid_argument("pushforward_interval: need 0 <= a < b <= circumference");

    std::vector<Rat> ends = {a, b};
    for (const Rat& c : sys.forward_cuts(component))
        if (c > a && c < b) ends.push_back(c);
    std::sort(ends.begin(), ends.end());

    std::vector<Arc> out;
    for (std::size_t i = 0; i + 1 < ends.size(); ++i) {
        const Rat& lo = ends[i];
        const Rat& hi = ends[i + 1];
        const Rat mid = (lo + hi) / 2;
        SysOutcome img = sys.forward({component, mid});
        if (!img.moved) throw std::logic_error("pushforward: singular point inside an open piece");
        const Rat tcirc = sys.circumference(img.to.component);
        Rat shift = img.to.pos - mid;  // translation of this piece, mod tcirc
        Rat ilo = rmod(lo + shift, tcirc);
        Rat ihi = ilo + (hi - lo);
        if (ihi <= tcirc) {
            out.push_back({img.to.component, ilo, ihi});
        } else {
            out.push_back({img.to.component, ilo, tcirc});
            out.push_back({img.to.component, Rat(0), ihi - tcirc});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Conservativity boxes

struct BoxSequence {
    std::vector<std::vector<std::int64_t>> boxes;  // increasing finite component sets
};

/// Exact length of the set of points of the components Y that leave Y in one
/// forward step.
inline Rat box_escape_measure(const SectionSystem& sys,
                              const std::vector<std::int64_t>& box) {
    std::set<std::int64_t> y(box.begin(), box.end());
    Rat total = 0;
    for (std::int64_t comp : y)
        for (const Arc& arc : pushforward_interval(sys, comp, 0, sys.circumference(comp)))
            if (!y.count(arc.component)) total += arc.length();
    return total;
}

struct BoxReport {
    std::vector<Rat> escapes;       // one per box
    std::vector<bool> within;       // escape <= epsilon, per box
    std::int64_t first_within = -1; // first box index meeting the bound, or -1
    bool certified = false;         // the final (deepest) box meets the bound
    // Finite-depth check of the almost-invariant-box hypothesis only; it is
    // evidence for conservativity at the examined depth, never a proof.
};

inline BoxReport certify_conservativity(const SectionSystem& sys, const BoxSequence& boxes,
                                        const Rat& epsilon) {
    if (boxes.boxes.empty()) throw std::invalid_argument("certify_conservativity: empty box list");
    std::set<std::int64_t> prev;
    BoxReport rep;
    for (std::size_t i = 0; i < boxes.boxes.size(); ++i) {
        std::set<std::int64_t> cur(boxes.boxes[i].begin(), boxes.boxes[i].end());
        if (!std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()))
            throw std::invalid_argument("certify_conservativity: boxes must be increasing");
        prev = std::move(cur);
        Rat esc = box_escape_measure(sys, boxes.boxes[i]);
        bool ok = esc <= epsilon;
        if (ok && rep.first_within < 0) rep.first_within = static_cast<std::int64_t>(i);
        rep.escapes.push_back(std::move(esc));
        rep.within.push_back(ok);
    }
    rep.certified = rep.within.back();
    return rep;
}

}  // namespace stairwind
