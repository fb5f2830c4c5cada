#pragma once

// Bi-infinite staircase surfaces modelled as flat tori of circumference 2
// joined along horizontal slits, and the exact first-return map to the
// mid-height section circles {k} x [0,2).  See docs/staircase-model.md for
// the derivation of the case formulas.

#include "stairwind/rational.hpp"

#include <cstdint>
#include <stdexcept>
#include <variant>
#include <vector>

namespace stairwind {

using Level = std::int64_t;

// ---------------------------------------------------------------------------
// Width sequences

enum class TailKind { Constant, Zero, PeriodicFromWindow, ReciprocalDecay };

/// Widths w_k in [0,1], one per level gap: a finite explicit window plus a
/// total tail rule.  ReciprocalDecay is w_k = 1/(|k|+2).
class WidthSequence {
public:
    WidthSequence(Level window_start, std::vector<Rat> window, TailKind tail,
                  Rat tail_constant = 0)
        : window_start_(window_start), window_(std::move(window)),
          tail_(tail), tail_constant_(std::move(tail_constant)) {
        for (const Rat& w : window_)
            if (w < 0 || w > 1) throw std::invalid_argument("width outside [0,1]");
        if (tail_ == TailKind::Constant && (tail_constant_ < 0 || tail_constant_ > 1))
            throw std::invalid_argument("tail constant outside [0,1]");
        if (tail_ == TailKind::PeriodicFromWindow && window_.empty())
            throw std::invalid_argument("periodic tail needs a non-empty window");
    }

    static WidthSequence constant(Rat c) {
        return WidthSequence(0, {}, TailKind::Constant, std::move(c));
    }
    static WidthSequence zero() { return WidthSequence(0, {}, TailKind::Zero); }
    static WidthSequence reciprocal_decay() {
        return WidthSequence(0, {}, TailKind::ReciprocalDecay);
    }
    static WidthSequence periodic(std::vector<Rat> window, Level window_start = 0) {
        return WidthSequence(window_start, std::move(window), TailKind::PeriodicFromWindow);
    }
    /// Explicit window, zero outside: the usual way to build ringed surfaces.
    static WidthSequence windowed(Level window_start, std::vector<Rat> window) {
        return WidthSequence(window_start, std::move(window), TailKind::Zero);
    }

    Rat at(Level k) const {
        Level n = static_cast<Level>(window_.size());
        if (k >= window_start_ && k < window_start_ + n)
            return window_[static_cast<std::size_t>(k - window_start_)];
        switch (tail_) {
            case TailKind::Constant: return tail_constant_;
            case TailKind::Zero: return 0;
            case TailKind::PeriodicFromWindow: {
                Level r = (k - window_start_) % n;
                if (r < 0) r += n;
                return window_[static_cast<std::size_t>(r)];
            }
            case TailKind::ReciprocalDecay: {
                Level a = k < 0 ? -k : k;
                return Rat(1, a + 2);
            }
        }
        throw std::logic_error("unreachable");
    }

    Level window_start() const { return window_start_; }
    const std::vector<Rat>& window() const { return window_; }
    TailKind tail() const { return tail_; }
    const Rat& tail_constant() const { return tail_constant_; }

private:
    Level window_start_;
    std::vector<Rat> window_;
    TailKind tail_;
    Rat tail_constant_;
};

/// True iff w_N = w_{-N} = 0 and w_j is in (0,1) for |j| < N.
inline bool ringed(const WidthSequence& w, Level N) {
    if (N < 1) throw std::invalid_argument("ringed: N >= 1 required");
    if (w.at(N) != 0 || w.at(-N) != 0) return false;
    for (Level j = -N + 1; j <= N - 1; ++j) {
        Rat wj = w.at(j);
        if (wj == 0 || wj == 1) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Directions and section points

/// A direction is stored as the exact slope tau (signed horizontal
/// displacement per unit of vertical ascent) plus the vertical sign that
/// selects the forward or backward return map.  No angles anywhere.
struct Direction {
    Rat slope;
    int vertical_sign = +1;

    Direction(Rat s, int sign = +1) : slope(std::move(s)), vertical_sign(sign) {
        if (sign != 1 && sign != -1) throw std::invalid_argument("vertical_sign must be +-1");
    }
    /// Half-level displacement delta = tau / 2.
    Rat half_step() const { return slope / 2; }
    Direction reversed() const { return Direction(slope, -vertical_sign); }
};

struct SectionPoint {
    Level level = 0;
    Rat x;  // in [0, 2)

    SectionPoint() = default;
    SectionPoint(Level k, Rat xx) : level(k), x(std::move(xx)) {
        if (x < 0 || x >= 2) throw std::invalid_argument("section coordinate outside [0,2)");
    }
    bool operator==(const SectionPoint& o) const { return level == o.level && x == o.x; }
};

// ---------------------------------------------------------------------------
// Step outcomes

enum class Slit : int { Down = -1, Stay = 0, Up = +1 };

/// Identity of a singular point on the edge circle of level k.  The three
/// possible u-coordinates are w_{k-1} (end of the down slit), 2 - w_k (end
/// of the up slit) and 2 ~ 0 (the reference corner).
enum class SingularKind : unsigned { DownEnd = 1, UpEnd = 2, Corner = 4 };

struct SingularHit {
    Level level = 0;
    unsigned kinds = 0;  // bitmask of SingularKind; >1 bit = coincident identities
    Rat u;               // exact location on the edge circle, in [0,2)

    bool has(SingularKind k) const { return kinds & static_cast<unsigned>(k); }
};

struct Moved {
    SectionPoint to;
    Slit slit = Slit::Stay;
};

struct StepOutcome {
    std::variant<Moved, SingularHit> v;

    bool moved() const { return std::holds_alternative<Moved>(v); }
    bool singular() const { return std::holds_alternative<SingularHit>(v); }
    const Moved& as_moved() const { return std::get<Moved>(v); }
    const SingularHit& as_singular() const { return std::get<SingularHit>(v); }
};

// ---------------------------------------------------------------------------
// The return map

namespace detail {
inline unsigned singular_kinds_at(const Rat& u, const Rat& w_dn, const Rat& w_up) {
    unsigned kinds = 0;
    if (u == w_dn) kinds |= static_cast<unsigned>(SingularKind::DownEnd);
    if (u == mod2(2 - w_up)) kinds |= static_cast<unsigned>(SingularKind::UpEnd);
    if (u == 0) kinds |= static_cast<unsigned>(SingularKind::Corner);
    return kinds;
}
}  // namespace detail

/// One application of the first-return map T (vertical_sign = +1) or its
/// inverse (vertical_sign = -1).  With s the sign and delta = slope/2, the
/// intermediate edge coordinate is u = (x + s*delta) mod 2, and
///   u in (2 - w_k, 2)   -> level k+1 at (u + w_k + s*delta) mod 2   [Up]
///   u in (0, w_{k-1})   -> level k-1 at (u - w_{k-1} + s*delta)     [Down]
///   u in (w_{k-1}, 2-w_k) -> level k at (u + s*delta)               [Stay]
///   u in {0, w_{k-1}, 2 - w_k} -> SingularHit.
inline StepOutcome step(const WidthSequence& w, const Direction& d, const SectionPoint& p) {
    const Rat sdelta = d.vertical_sign >= 0 ? d.half_step() : -d.half_step();
    const Level k = p.level;
    const Rat w_dn = w.at(k - 1), w_up = w.at(k);
    const Rat u = mod2(p.x + sdelta);

    if (unsigned kinds = detail::singular_kinds_at(u, w_dn, w_up))
        return {SingularHit{k, kinds, u}};
    if (u < w_dn)
        return {Moved{SectionPoint(k - 1, mod2(u - w_dn + sdelta)), Slit::Down}};
    if (w_up > 0 && u > 2 - w_up)
        return {Moved{SectionPoint(k + 1, mod2(u + w_up + sdelta)), Slit::Up}};
    return {Moved{SectionPoint(k, mod2(u + sdelta)), Slit::Stay}};
}

inline StepOutcome inverse_step(const WidthSequence& w, const Direction& d,
                                const SectionPoint& p) {
    return step(w, d.reversed(), p);
}

/// One-sided step: the image of x approached from above (side = +1) or
/// below (side = -1).  Never singular; used for endpoint itineraries of
/// continuity intervals.  Both branches are increasing translations, so the
/// side is preserved along the orbit.
inline Moved step_sided(const WidthSequence& w, const Direction& d,
                        const SectionPoint& p, int side) {
    const Rat sdelta = d.vertical_sign >= 0 ? d.half_step() : -d.half_step();
    const Level k = p.level;
    const Rat w_dn = w.at(k - 1), w_up = w.at(k);
    Rat u = mod2(p.x + sdelta);
    if (side >= 0) {
        // u approached from above: case intervals are [0,w_dn), [w_dn,2-w_up), [2-w_up,2)
        if (u < w_dn)
            return Moved{SectionPoint(k - 1, mod2(u - w_dn + sdelta)), Slit::Down};
        if (w_up > 0 && u >= 2 - w_up)
            return Moved{SectionPoint(k + 1, mod2(u + w_up + sdelta)), Slit::Up};
        return Moved{SectionPoint(k, mod2(u + sdelta)), Slit::Stay};
    }
    // u approached from below: (0,w_dn], (w_dn,2-w_up], (2-w_up,2]
    if (u == 0) u = 2;
    if (w_dn > 0 && u <= w_dn)
        return Moved{SectionPoint(k - 1, mod2(u - w_dn + sdelta)), Slit::Down};
    if (u > 2 - w_up)
        return Moved{SectionPoint(k + 1, mod2(u + w_up + sdelta)), Slit::Up};
    return Moved{SectionPoint(k, mod2(u + sdelta)), Slit::Stay};
}

// ---------------------------------------------------------------------------
// Continuous suspension (the planar staircase picture)

/// Anchor abscissa of rectangle k: X_0 = 0, X_{k+1} = X_k + 2 - w_k.
inline Rat rect_anchor(const WidthSequence& w, Level k) {
    Rat x = 0;
    for (Level j = 0; j < k; ++j) x += 2 - w.at(j);
    for (Level j = -1; j >= k; --j) x -= 2 - w.at(j);
    return x;
}

struct FlowVertex {
    Rat x, y;          // planar coordinates
    bool jump_before;  // true when the trajectory teleported to this vertex
};

struct FlowTrace {
    std::vector<FlowVertex> polyline;
    std::vector<SectionPoint> crossings;  // section hits after the start point
    bool stopped_singular = false;
};

/// Straight-line flow in the planar picture: rectangle k is
/// [X_k, X_k+2] x [k, k+1], vertical sides wrap mod 2, and the free parts of
/// the horizontal sides are identified by vertical translations.  Crossing
/// the line y = k+1 upward at rectangle-k abscissa t:
///   t in (2-w_k, 2): continue into rectangle k+1 (no jump);
///   t in (w_{k-1}, 2-w_k): drop by 1 to the bottom of rectangle k;
///   t in (0, w_{k-1}): drop by 2 into rectangle k-1.
/// Mirrored rules hold going down.  height_budget is total vertical travel.
inline FlowTrace flow_trace(const WidthSequence& w, const Direction& d,
                            const SectionPoint& start, const Rat& height_budget) {
    if (height_budget < 0) throw std::invalid_argument("height_budget must be >= 0");
    const int s = d.vertical_sign;
    const Rat hx = s > 0 ? d.slope : -d.slope;  // horizontal rate per unit of travel

    FlowTrace out;
    Level k = start.level;
    Rat xr = start.x;                      // abscissa relative to X_k
    if (hx < 0 && xr == 0) xr = 2;         // 0 ~ 2; keep xr ahead of a leftward run
    Rat y = Rat(k) + Rat(1, 2);            // global height
    Rat anchor = rect_anchor(w, k);
    Rat budget = height_budget;
    out.polyline.push_back({anchor + xr, y, false});

    auto emit = [&](bool jump) { out.polyline.push_back({anchor + xr, y, jump}); };

    while (budget > 0) {
        // next stop: the mid-height section or the next integer line
        const Rat mid = Rat(k) + Rat(1, 2);
        Rat next_y;
        if (s > 0) next_y = y < mid ? mid : Rat(k) + 1;
        else       next_y = y > mid ? mid : Rat(k);
        const Rat to_stop = s > 0 ? next_y - y : y - next_y;
        const Rat dy = to_stop < budget ? to_stop : budget;

        // advance by dy, wrapping across the vertical sides as needed
        Rat remaining = dy;
        while (remaining > 0) {
            Rat target = xr + hx * remaining;  // hx is signed, dy is not
            if (target > 0 && target < 2) {
                xr = target;
                y += s > 0 ? remaining : -remaining;
                remaining = 0;
            } else if (hx > 0) {
                Rat run = (2 - xr) / hx;  // vertical distance to the right side
                y += s > 0 ? run : -run;
                remaining -= run;
                xr = 2;
                emit(false);
                xr = 0;
                emit(true);
            } else {
                Rat run = xr / (-hx);
                y += s > 0 ? run : -run;
                remaining -= run;
                xr = 0;
                emit(false);
                xr = 2;
                emit(true);
            }
        }
        budget -= dy;
        emit(false);
        if (dy < to_stop) break;  // budget ran out mid-segment

        if (y == mid) {
            out.crossings.push_back(SectionPoint(k, mod2(xr)));
            continue;
        }

        // crossing a horizontal integer line
        const Rat t = mod2(xr);
        if (s > 0) {
            const Rat w_dn = w.at(k - 1), w_up = w.at(k);
            if (detail::singular_kinds_at(t, w_dn, w_up)) { out.stopped_singular = true; break; }
            if (w_up > 0 && t > 2 - w_up) {
                anchor += 2 - w_up;  // into rectangle k+1, planar-contiguous
                xr = t - (2 - w_up);
                ++k;
            } else if (t < w_dn) {
                y -= 2;  // drop into rectangle k-1
                anchor -= 2 - w_dn;
                xr = t + (2 - w_dn);
                --k;
                emit(true);
            } else {
                y -= 1;  // drop to the bottom of rectangle k
                emit(true);
            }
        } else {
            const Rat w_dn = w.at(k - 1), w_up = w.at(k);
            if (detail::singular_kinds_at(t, w_dn, w_up)) { out.stopped_singular = true; break; }
            if (w_dn > 0 && t < w_dn) {
                anchor -= 2 - w_dn;  // into rectangle k-1, planar-contiguous
                xr = t + (2 - w_dn);
                --k;
            } else if (w_up > 0 && t > 2 - w_up) {
                y += 2;  // lift into rectangle k+1
                anchor += 2 - w_up;
                xr = t - (2 - w_up);
                ++k;
                emit(true);
            } else {
                y += 1;
                emit(true);
            }
        }
    }
    return out;
}

}  // namespace stairwind
