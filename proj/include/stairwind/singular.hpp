#pragma once

// Singular sets of the staircase return map, backward-orbit continuity
// partitions of the ring window X^N = {-N+1..N} x [0,2), gap statistics,
// interval matching between a ringed staircase and its perturbations, and
// saddle-connection detection at a fixed direction.

#include "stairwind/staircase.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace stairwind {

// ---------------------------------------------------------------------------
// Sigma sets

/// A section point whose forward step is singular.  kinds is the bitmask of
/// coincident singularity identities; more than one bit set marks a blocking
/// point (identities merged because a width vanished).
struct SigmaPoint {
    SectionPoint p;
    unsigned kinds = 0;

    bool blocking() const { return kinds != 0 && (kinds & (kinds - 1)) != 0; }
    bool has_kind(SingularKind k) const { return kinds & static_cast<unsigned>(k); }
};

struct SingularSet {
    Level first_level = 0;                          // = -N+1
    std::vector<std::vector<SigmaPoint>> by_level;  // levels first_level..N

    const std::vector<SigmaPoint>& at(Level k) const {
        return by_level.at(static_cast<std::size_t>(k - first_level));
    }
};

/// Singular section points of step (with d's vertical_sign) on the levels
/// -N+1..N: x = (j - s*delta) mod 2 for j in {w_{k-1}, 2-w_k, 2}.
inline SingularSet sigma_set(const WidthSequence& w, const Direction& d, Level N) {
    if (N < 1) throw std::invalid_argument("sigma_set: N >= 1 required");
    const Rat sdelta = d.vertical_sign >= 0 ? d.half_step() : -d.half_step();
    SingularSet out;
    out.first_level = -N + 1;
    for (Level k = -N + 1; k <= N; ++k) {
        std::map<Rat, unsigned> pts;
        pts[mod2(w.at(k - 1) - sdelta)] |= static_cast<unsigned>(SingularKind::DownEnd);
        pts[mod2(2 - w.at(k) - sdelta)] |= static_cast<unsigned>(SingularKind::UpEnd);
        pts[mod2(2 - sdelta)] |= static_cast<unsigned>(SingularKind::Corner);
        std::vector<SigmaPoint> lvl;
        for (const auto& [x, kinds] : pts) lvl.push_back({SectionPoint(k, x), kinds});
        out.by_level.push_back(std::move(lvl));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Continuity partitions

/// Provenance of a partition cut: which singularity it is the backward orbit
/// of, and how many backward steps deep.
struct CutIdentity {
    Level src_level = 0;
    SingularKind kind = SingularKind::Corner;
    int back_index = 0;

    bool operator==(const CutIdentity& o) const {
        return src_level == o.src_level && kind == o.kind && back_index == o.back_index;
    }
    bool operator<(const CutIdentity& o) const {
        if (src_level != o.src_level) return src_level < o.src_level;
        if (kind != o.kind) return kind < o.kind;
        return back_index < o.back_index;
    }
};

struct Cut {
    Rat x;
    std::vector<CutIdentity> ids;  // coincident provenances (blocking points)
};

struct LevelCuts {
    Level level = 0;
    std::vector<Cut> cuts;  // sorted by x
};

struct ContinuityPartition {
    Level N = 1;
    int ell = 0;
    std::vector<LevelCuts> levels;  // levels -N+1..N
    Rat min_gap;                    // smallest cyclic gap between distinct cuts

    const LevelCuts& at(Level k) const {
        return levels.at(static_cast<std::size_t>(k + N - 1));
    }
};

class SaddleConnectionFound : public std::runtime_error {
public:
    SaddleConnectionFound(CutIdentity origin, int steps, SingularHit hit)
        : std::runtime_error(describe(origin, steps, hit)),
          origin(origin), steps(steps), hit(std::move(hit)) {}

    CutIdentity origin;  // identity whose orbit ran into a singularity
    int steps;           // map applications performed before the hit
    SingularHit hit;

private:
    static std::string describe(const CutIdentity& o, int steps, const SingularHit& h) {
        std::ostringstream os;
        os << "saddle connection: singularity orbit from level " << o.src_level
           << " kind " << static_cast<unsigned>(o.kind) << " hits level " << h.level
           << " kinds " << h.kinds << " after " << steps << " step(s)";
        return os.str();
    }
};

/// Cuts of X^N into continuity intervals of T^{ell+1}: the backward orbits
/// T^{-j}, j = 0..ell, of every sigma point, restricted to levels -N+1..N.
/// Throws SaddleConnectionFound if a backward orbit dies before depth ell.
inline ContinuityPartition continuity_partition(const WidthSequence& w, const Direction& d,
                                                Level N, int ell) {
    if (ell < 0) throw std::invalid_argument("continuity_partition: ell >= 0 required");
    const SingularSet sigma = sigma_set(w, d, N);

    std::map<Level, std::map<Rat, std::vector<CutIdentity>>> acc;
    for (const auto& lvl : sigma.by_level) {
        for (const SigmaPoint& s : lvl) {
            SectionPoint p = s.p;
            // identities carry the level of the originating singularity
            auto src = [&](unsigned bit, int j) {
                return CutIdentity{s.p.level, static_cast<SingularKind>(bit), j};
            };
            for (int j = 0; j <= ell; ++j) {
                if (p.level >= -N + 1 && p.level <= N)
                    for (unsigned bit : {1u, 2u, 4u})
                        if (s.kinds & bit) acc[p.level][p.x].push_back(src(bit, j));
                if (j == ell) break;
                StepOutcome back = inverse_step(w, d, p);
                if (!back.moved()) {
                    unsigned bit = s.kinds & ~(s.kinds - 1);  // lowest identity bit
                    throw SaddleConnectionFound(src(bit, j), j + 1, back.as_singular());
                }
                p = back.as_moved().to;
            }
        }
    }

    ContinuityPartition part;
    part.N = N;
    part.ell = ell;
    part.min_gap = 2;
    for (Level k = -N + 1; k <= N; ++k) {
        LevelCuts lc;
        lc.level = k;
        for (auto& [x, ids] : acc[k]) {
            std::sort(ids.begin(), ids.end());
            ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
            lc.cuts.push_back({x, std::move(ids)});
        }
        const std::size_t m = lc.cuts.size();
        for (std::size_t i = 0; i < m; ++i) {
            Rat gap = i + 1 < m ? Rat(lc.cuts[i + 1].x - lc.cuts[i].x)
                                : Rat(lc.cuts[0].x + 2 - lc.cuts[i].x);
            if (m > 1 && gap < part.min_gap) part.min_gap = gap;
        }
        part.levels.push_back(std::move(lc));
    }
    return part;
}

/// Continuity witness: on every partition interval, the one-sided itineraries
/// of T^{ell+1} from both endpoints agree (levels and slit symbols).
inline bool continuity_witness_ok(const WidthSequence& w, const Direction& d,
                                  const ContinuityPartition& part) {
    for (const auto& lc : part.levels) {
        const std::size_t m = lc.cuts.size();
        for (std::size_t i = 0; i < m; ++i) {
            SectionPoint left = SectionPoint(lc.level, lc.cuts[i].x);
            SectionPoint right = SectionPoint(lc.level, lc.cuts[(i + 1) % m].x);
            SectionPoint a = left, b = right;
            for (int j = 0; j <= part.ell; ++j) {
                Moved ma = step_sided(w, d, a, +1);   // left endpoint from above
                Moved mb = step_sided(w, d, b, -1);   // right endpoint from below
                if (ma.slit != mb.slit || ma.to.level != mb.to.level) return false;
                a = ma.to;
                b = mb.to;
            }
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Separation between backward and forward singular orbits

/// Section points whose backward step is singular: x = (j + s*delta) mod 2.
/// These are the continuations of the singularities in the forward direction.
inline SingularSet sigma_out_set(const WidthSequence& w, const Direction& d, Level N) {
    return sigma_set(w, d.reversed(), N);
}

/// Minimum same-level cyclic distance between the backward orbit points
/// (depth 0..ell) of the singular set and the forward orbit points (depth
/// 0..ell) of its outgoing continuation.  Zero is valid output and is
/// saddle-connection evidence.
inline Rat separation_iota(const WidthSequence& w, const Direction& d, Level N, int ell) {
    if (ell < 0) throw std::invalid_argument("separation_iota: ell >= 0 required");
    std::map<Level, std::vector<Rat>> bwd, fwd;

    for (const auto& lvl : sigma_set(w, d, N).by_level)
        for (const SigmaPoint& s : lvl) {
            SectionPoint p = s.p;
            for (int j = 0; j <= ell; ++j) {
                if (p.level >= -N + 1 && p.level <= N) bwd[p.level].push_back(p.x);
                if (j == ell) break;
                StepOutcome back = inverse_step(w, d, p);
                if (!back.moved())
                    throw SaddleConnectionFound({s.p.level, SingularKind::Corner, j}, j + 1,
                                                back.as_singular());
                p = back.as_moved().to;
            }
        }
    for (const auto& lvl : sigma_out_set(w, d, N).by_level)
        for (const SigmaPoint& s : lvl) {
            SectionPoint p = s.p;
            for (int j = 0; j <= ell; ++j) {
                if (p.level >= -N + 1 && p.level <= N) fwd[p.level].push_back(p.x);
                if (j == ell) break;
                StepOutcome out = step(w, d, p);
                if (!out.moved())
                    throw SaddleConnectionFound({s.p.level, SingularKind::Corner, j}, j + 1,
                                                out.as_singular());
                p = out.as_moved().to;
            }
        }

    Rat best = 2;
    for (const auto& [k, bs] : bwd) {
        auto it = fwd.find(k);
        if (it == fwd.end()) continue;
        for (const Rat& b : bs)
            for (const Rat& f : it->second) {
                Rat dist = circle_dist(b, f, 2);
                if (dist < best) best = dist;
            }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Saddle-connection detection

struct SaddleWitness {
    SectionPoint start;  // outgoing continuation of the source singularity
    unsigned start_kinds = 0;
    int steps = 0;       // forward map applications until the hit
    SingularHit hit;
};

/// Search for a singularity-to-singularity orbit of combinatorial length
/// <= ell through the window X^N: iterate each outgoing continuation point
/// forward and report the first singular hit, if any.
inline std::optional<SaddleWitness> detect_saddle(const WidthSequence& w, const Direction& d,
                                                  Level N, int ell) {
    if (ell < 0) throw std::invalid_argument("detect_saddle: ell >= 0 required");
    for (const auto& lvl : sigma_out_set(w, d, N).by_level)
        for (const SigmaPoint& s : lvl) {
            SectionPoint p = s.p;
            for (int t = 0; t < ell; ++t) {
                StepOutcome out = step(w, d, p);
                if (!out.moved()) return SaddleWitness{s.p, s.kinds, t, out.as_singular()};
                p = out.as_moved().to;
            }
        }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Interval matching between a ringed staircase and a perturbation

struct IntervalRef {
    Level level = 0;
    Rat lo, hi;  // hi may exceed 2 for the wrapping interval; length = hi - lo
    std::vector<CutIdentity> left_ids, right_ids;
};

struct MatchedPair {
    IntervalRef from, to;  // ringed interval and its partner
    Rat displacement;      // max cyclic endpoint displacement
};

struct MatchingMap {
    std::vector<MatchedPair> pairs;
    std::vector<IntervalRef> new_intervals;  // unmatched intervals of the perturbed partition
    Rat sup_displacement;
};

class MatchFailed : public std::runtime_error {
public:
    explicit MatchFailed(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
inline std::vector<IntervalRef> partition_intervals(const ContinuityPartition& part) {
    std::vector<IntervalRef> out;
    for (const auto& lc : part.levels) {
        const std::size_t m = lc.cuts.size();
        for (std::size_t i = 0; i < m; ++i) {
            const Cut& left = lc.cuts[i];
            const Cut& right = lc.cuts[(i + 1) % m];
            Rat hi = i + 1 < m ? right.x : Rat(right.x + 2);
            if (m == 1) hi = left.x + 2;  // single cut: the whole circle
            out.push_back({lc.level, left.x, hi, left.ids, right.ids});
        }
    }
    return out;
}

inline bool ids_intersect(const std::vector<CutIdentity>& a, const std::vector<CutIdentity>& b) {
    for (const auto& x : a)
        for (const auto& y : b)
            if (x == y) return true;
    return false;
}
}  // namespace detail

/// Pair each continuity interval of the ringed staircase with the interval
/// of the perturbed partition carrying the same cut provenances on both
/// sides.  Unmatched perturbed intervals are the newly created ones.
inline MatchingMap zeta_map(const WidthSequence& w_ringed, const WidthSequence& w,
                            const Direction& d, Level N, int ell, int direction_sign) {
    Direction dd(d.slope, direction_sign);
    auto part_r = continuity_partition(w_ringed, dd, N, ell);
    auto part_w = continuity_partition(w, dd, N, ell);
    auto ivr = detail::partition_intervals(part_r);
    auto ivw = detail::partition_intervals(part_w);

    MatchingMap map;
    map.sup_displacement = 0;
    std::vector<bool> used(ivw.size(), false);
    for (const auto& I : ivr) {
        int found = -1;
        for (std::size_t j = 0; j < ivw.size(); ++j) {
            if (used[j] || ivw[j].level != I.level) continue;
            if (detail::ids_intersect(I.left_ids, ivw[j].left_ids) &&
                detail::ids_intersect(I.right_ids, ivw[j].right_ids)) {
                if (found >= 0) throw MatchFailed("ambiguous interval pairing");
                found = static_cast<int>(j);
            }
        }
        if (found < 0) throw MatchFailed("unmatched ringed interval");
        used[static_cast<std::size_t>(found)] = true;
        const auto& J = ivw[static_cast<std::size_t>(found)];
        Rat disp = circle_dist(mod2(I.lo), mod2(J.lo), 2);
        Rat dhi = circle_dist(mod2(I.hi), mod2(J.hi), 2);
        if (dhi > disp) disp = dhi;
        if (disp > map.sup_displacement) map.sup_displacement = disp;
        map.pairs.push_back({I, J, disp});
    }
    for (std::size_t j = 0; j < ivw.size(); ++j)
        if (!used[j]) map.new_intervals.push_back(ivw[j]);
    return map;
}

}  // namespace stairwind
