#pragma once

// Symbolic coding of section-map orbits: itineraries through the continuity
// pieces of the return map, the shift conjugacy they satisfy, and an
// empirical census of cylinder frequencies on compact (ringed) surfaces.

#include "stairwind/section_system.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace stairwind {

// ---------------------------------------------------------------------------
// Itineraries

/// Which labels an itinerary records per step.
///   Slits:  the branch symbol Down/Stay/Up (-1/0/+1), one letter per level
///           transition; this is the coarse three-letter coding.
///   Pieces: the index of the continuity interval of the one-step partition
///           of the current circle (arcs between consecutive forward cuts,
///           counted from the first cut); refines Slits, since every such
///           arc maps by a single branch.
enum class AlphabetMode { Slits, Pieces };

struct Itinerary {
    AlphabetMode mode = AlphabetMode::Slits;
    std::vector<int> word;  // Slits: -1/0/+1 per step; Pieces: arc index per step
    bool complete = true;   // false iff the orbit hit a singular point early

    bool operator==(const Itinerary& o) const {
        return mode == o.mode && word == o.word && complete == o.complete;
    }

    /// Letter form of a slit word: 'D', 'S', 'U'.
    std::string text() const {
        if (mode != AlphabetMode::Slits)
            throw std::logic_error("text() is defined for the slit alphabet only");
        std::string s;
        s.reserve(word.size());
        for (int c : word) s.push_back(c < 0 ? 'D' : c > 0 ? 'U' : 'S');
        return s;
    }
};

namespace detail {

/// Index of the partition arc of the component circle containing pos: arcs
/// run between consecutive forward cuts, arc i starting at cut i (the arc
/// wrapping the seam belongs to the last cut).  pos must not be a cut.
inline int arc_index(const SectionSystem& sys, const SysPoint& p) {
    std::vector<Rat> cuts = sys.forward_cuts(p.component);
    if (cuts.empty()) return 0;
    auto it = std::upper_bound(cuts.begin(), cuts.end(), p.pos);
    int le = static_cast<int>(it - cuts.begin());  // cuts <= pos (none equal by precondition)
    int m = static_cast<int>(cuts.size());
    return (le + m - 1) % m;
}

}  // namespace detail

/// The first `depth` symbols of the coding of z: the labels of the
/// continuity pieces its forward orbit passes through.  If the orbit
/// reaches a singular point before completing, the word is truncated and
/// the completeness flag cleared.
inline Itinerary itinerary(const SectionSystem& sys, const SysPoint& z, int depth,
                           AlphabetMode mode = AlphabetMode::Slits) {
    if (depth < 0) throw std::invalid_argument("itinerary: depth >= 0 required");
    Itinerary it;
    it.mode = mode;
    it.word.reserve(static_cast<std::size_t>(depth));
    SysPoint p = z;
    for (int j = 0; j < depth; ++j) {
        SysOutcome out = sys.forward(p);
        if (!out.moved) {
            it.complete = false;
            return it;
        }
        it.word.push_back(mode == AlphabetMode::Slits ? out.label : detail::arc_index(sys, p));
        p = out.to;
    }
    return it;
}

/// Drop the first symbol: the image of a word under the shift map.  The
/// coding intertwines the dynamics with it: for every point z with a
/// non-singular first step, shift(itinerary(z, d+1)) = itinerary(T z, d).
inline Itinerary shift(Itinerary it) {
    if (it.word.empty()) throw std::invalid_argument("shift: empty word");
    it.word.erase(it.word.begin());
    return it;
}

// ---------------------------------------------------------------------------
// Cylinder census

/// Empirical depth-d cylinder frequencies for a compact (ringed) staircase:
/// sample points uniformly on the ring window {-N+1..N} x [0,2), record their
/// slit words, and report frequencies over the completed words (which sum
/// to 1; samples whose orbit dies on a singularity only count as attempts).
struct CylinderCensus {
    int depth = 0;
    std::int64_t attempted = 0;
    std::int64_t completed = 0;
    std::map<std::string, std::int64_t> counts;  // slit word -> occurrences

    double frequency(const std::string& word) const {
        auto it = counts.find(word);
        if (it == counts.end() || completed == 0) return 0.0;
        return static_cast<double>(it->second) / static_cast<double>(completed);
    }
};

/// Canonical serialization: {"depth": d, "counts": {"USD...": k, ...}}.
inline std::string census_to_json(const CylinderCensus& census) {
    std::string out = "{\"depth\": " + std::to_string(census.depth) + ", \"counts\": {";
    bool first = true;
    for (const auto& [word, n] : census.counts) {
        if (!first) out += ", ";
        first = false;
        out += "\"" + word + "\": " + std::to_string(n);
    }
    return out + "}}";
}

inline CylinderCensus cylinder_census(const StaircaseSystem& sys, Level ring, int depth,
                                      std::int64_t sample, std::uint64_t seed = 0) {
    if (depth < 0) throw std::invalid_argument("cylinder_census: depth >= 0 required");
    if (sample <= 0) throw std::invalid_argument("cylinder_census: sample >= 1 required");
    if (ring >= 1 && !ringed(sys.widths(), ring))
        throw std::invalid_argument("cylinder_census: widths are not ringed at the given level");

    // dyadic grid fine enough that sampling artifacts are far below the
    // statistical noise of any practical sample size
    constexpr std::int64_t kGrid = std::int64_t(1) << 40;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::int64_t> num(0, 2 * kGrid - 1);
    std::uniform_int_distribution<std::int64_t> lvl(-ring + 1, ring);

    CylinderCensus census;
    census.depth = depth;
    for (std::int64_t i = 0; i < sample; ++i) {
        SysPoint z{ring >= 1 ? lvl(rng) : 0, Rat(num(rng), kGrid)};
        ++census.attempted;
        Itinerary it = itinerary(sys, z, depth, AlphabetMode::Slits);
        if (!it.complete) continue;
        ++census.completed;
        ++census.counts[it.text()];
    }
    return census;
}

}  // namespace stairwind
