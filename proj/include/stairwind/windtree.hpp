#pragma once

// Wind-tree billiard tables: rhombus (L1-ball) scatterer configurations,
// the spherical Hausdorff metric on configuration space, ring generation,
// tree enumeration, and the first-return billiard map for a fixed
// direction class.

#include "stairwind/rational.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <variant>
#include <vector>

namespace stairwind::wind {

// ---------------------------------------------------------------------------
// Centers and configurations

struct Pt {
    Rat x, y;
    friend bool operator==(const Pt& a, const Pt& b) { return a.x == b.x && a.y == b.y; }
    friend bool operator<(const Pt& a, const Pt& b) {
        return a.x != b.x ? a.x < b.x : a.y < b.y;
    }
};

struct Box {
    Rat xlo, xhi, ylo, yhi;
};

inline Rat l1_dist(const Pt& a, const Pt& b) {
    Rat dx = a.x - b.x, dy = a.y - b.y;
    if (dx < 0) dx = -dx;
    if (dy < 0) dy = -dy;
    return dx + dy;
}

/// A rhombus scatterer field: every tree is the L1 ball of diameter s about
/// its center; any two centers keep L1 distance >= s (hard-core constraint,
/// verified on every query).  Sources are pure and immutable, so queries are
/// deterministic and consistent across overlapping regions.
class Configuration {
public:
    struct Explicit {
        std::vector<Pt> centers;
    };
    struct Lattice {
        Rat spacing;
        Pt offset;
    };
    struct Perturbed {
        std::shared_ptr<const Configuration> base;
        std::function<Pt(const Pt&)> displaced;  // center -> new center, pure
        Rat bound;                               // sup-L-infinity displacement
    };
    struct Ringed {
        std::int64_t n;
    };
    struct Union {
        std::vector<std::shared_ptr<const Configuration>> parts;
    };
    using Source = std::variant<Explicit, Lattice, Perturbed, Ringed, Union>;

    Configuration(Rat s, Source src) : s_(std::move(s)), src_(std::move(src)) {
        if (s_ <= 0) throw std::invalid_argument("tree diameter must be positive");
        if (const auto* lat = std::get_if<Lattice>(&src_))
            if (lat->spacing < s_) throw std::invalid_argument("lattice spacing below diameter");
    }

    const Rat& diameter() const { return s_; }

    std::vector<Pt> centers_in_region(const Box& box) const {
        std::vector<Pt> out;
        collect(box, out);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        for (std::size_t i = 0; i < out.size(); ++i)
            for (std::size_t j = i + 1; j < out.size(); ++j)
                if (l1_dist(out[i], out[j]) < s_)
                    throw std::invalid_argument("configuration violates the hard-core spacing");
        return out;
    }

private:
    static bool inside(const Pt& p, const Box& b) {
        return p.x >= b.xlo && p.x <= b.xhi && p.y >= b.ylo && p.y <= b.yhi;
    }

    void collect(const Box& box, std::vector<Pt>& out) const {
        if (const auto* e = std::get_if<Explicit>(&src_)) {
            for (const Pt& p : e->centers)
                if (inside(p, box)) out.push_back(p);
        } else if (const auto* lat = std::get_if<Lattice>(&src_)) {
            auto lo_index = [](const Rat& lo, const Rat& off, const Rat& sp) {
                Rat q = (lo - off) / sp;  // smallest i with off + i*sp >= lo
                boost::multiprecision::cpp_int i = rat_num(q) / rat_den(q);
                if (Rat(i) < q) ++i;
                return i;
            };
            for (auto i = lo_index(box.xlo, lat->offset.x, lat->spacing);
                 lat->offset.x + Rat(i) * lat->spacing <= box.xhi; ++i)
                for (auto j = lo_index(box.ylo, lat->offset.y, lat->spacing);
                     lat->offset.y + Rat(j) * lat->spacing <= box.yhi; ++j)
                    out.push_back(Pt{lat->offset.x + Rat(i) * lat->spacing,
                                     lat->offset.y + Rat(j) * lat->spacing});
        } else if (const auto* per = std::get_if<Perturbed>(&src_)) {
            Box big{box.xlo - per->bound, box.xhi + per->bound, box.ylo - per->bound,
                    box.yhi + per->bound};
            for (const Pt& p : per->base->centers_in_region(big)) {
                Pt q = per->displaced(p);
                if (l1_dist(p, q) > 2 * per->bound)
                    throw std::invalid_argument("displacement exceeds its declared bound");
                if (inside(q, box)) out.push_back(q);
            }
        } else if (const auto* ring = std::get_if<Ringed>(&src_)) {
            const Rat h = s_ / 2;
            for (std::int64_t j = 0; j <= 2 * ring->n; ++j) {
                Rat x = Rat(ring->n) * s_ - Rat(j) * h, y = Rat(j) * h;
                for (const Pt& p :
                     {Pt{x, y}, Pt{-x, y}, Pt{x, -y}, Pt{-x, -y}})
                    if (inside(p, box)) out.push_back(p);
            }
        } else {
            for (const auto& part : std::get<Union>(src_).parts) part->collect(box, out);
        }
    }

    Rat s_;
    Source src_;
};

inline Configuration explicit_config(Rat s, std::vector<Pt> centers) {
    return Configuration(std::move(s), Configuration::Explicit{std::move(centers)});
}
inline Configuration lattice_config(Rat s, Rat spacing, Pt offset) {
    return Configuration(std::move(s), Configuration::Lattice{std::move(spacing), std::move(offset)});
}
inline Configuration perturbed_config(Configuration base, std::function<Pt(const Pt&)> displaced,
                                      Rat bound) {
    Rat s = base.diameter();
    return Configuration(std::move(s),
                         Configuration::Perturbed{
                             std::make_shared<const Configuration>(std::move(base)),
                             std::move(displaced), std::move(bound)});
}

/// The ring R(n): 8n trees covering {|x| + |y| = n s} side-to-side, with
/// consecutive centers at L1 distance exactly s.
inline Configuration ringed_config(std::int64_t n, Rat s) {
    if (n < 1) throw std::invalid_argument("ring index must be >= 1");
    return Configuration(std::move(s), Configuration::Ringed{n});
}
inline Configuration union_config(std::vector<Configuration> parts) {
    if (parts.empty()) throw std::invalid_argument("empty union");
    Rat s = parts.front().diameter();
    Configuration::Union u;
    for (Configuration& p : parts) {
        if (p.diameter() != s) throw std::invalid_argument("union mixes tree diameters");
        u.parts.push_back(std::make_shared<const Configuration>(std::move(p)));
    }
    return Configuration(std::move(s), std::move(u));
}

// ---------------------------------------------------------------------------
// Enumeration by increasing distance to the origin

/// Centers within L1 distance R of the origin, sorted by that distance
/// (the norm whose balls the trees are); ties are broken by angle (atan2),
/// then lexicographically.  The tie-break is an artifact decision: strictly
/// increasing distances only hold generically.
inline std::vector<Pt> enumerate_trees(const Configuration& g, const Rat& R) {
    std::vector<Pt> pts = g.centers_in_region(Box{-R, R, -R, R});
    pts.erase(std::remove_if(pts.begin(), pts.end(),
                             [&](const Pt& p) { return l1_dist(p, Pt{0, 0}) > R; }),
              pts.end());
    std::stable_sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) {
        Rat da = l1_dist(a, Pt{0, 0}), db = l1_dist(b, Pt{0, 0});
        if (da != db) return da < db;
        double ta = std::atan2(to_double(a.y), to_double(a.x));
        double tb = std::atan2(to_double(b.y), to_double(b.x));
        if (ta != tb) return ta < tb;
        return a < b;
    });
    return pts;
}

// ---------------------------------------------------------------------------
// Spherical Hausdorff metric on configurations

struct SphereCoord {
    double colat;  // 0 = north pole (the point at infinity), pi = south pole
    double lon;
};

/// Inverse stereographic projection: a plane point at distance r from the
/// origin lands at colatitude 2 arctan(1/r).
inline SphereCoord project_to_sphere(const Pt& p) {
    double x = to_double(p.x), y = to_double(p.y);
    double r = std::hypot(x, y);
    if (r == 0) return {M_PI, 0.0};
    return {2.0 * std::atan(1.0 / r), std::atan2(y, x)};
}

inline double geodesic(const SphereCoord& a, const SphereCoord& b) {
    double c = std::cos(a.colat) * std::cos(b.colat) +
               std::sin(a.colat) * std::sin(b.colat) * std::cos(a.lon - b.lon);
    return std::acos(std::clamp(c, -1.0, 1.0));
}

struct HausdorffResult {
    double distance = 0;
    double truncation_bound = 0;  // spherical diameter of the region beyond R
};

inline HausdorffResult hausdorff_distance(const Configuration& g1, const Configuration& g2,
                                          const Rat& R) {
    auto project_all = [&](const Configuration& g) {
        std::vector<SphereCoord> s = {{0.0, 0.0}};  // the adjoined north pole
        const Rat R2 = R * R;
        for (const Pt& p : g.centers_in_region(Box{-R, R, -R, R}))
            if (p.x * p.x + p.y * p.y <= R2) s.push_back(project_to_sphere(p));
        return s;
    };
    std::vector<SphereCoord> a = project_all(g1), b = project_all(g2);
    auto directed = [](const std::vector<SphereCoord>& from, const std::vector<SphereCoord>& to) {
        double worst = 0;
        for (const SphereCoord& p : from) {
            double best = M_PI;
            for (const SphereCoord& q : to) best = std::min(best, geodesic(p, q));
            worst = std::max(worst, best);
        }
        return worst;
    };
    HausdorffResult out;
    out.distance = std::max(directed(a, b), directed(b, a));
    out.truncation_bound = std::min(M_PI, 4.0 * std::atan(1.0 / to_double(R)));
    return out;
}

// ---------------------------------------------------------------------------
// The billiard map

/// Boundary phase space for the direction class
/// [theta] = {theta, 3pi/2 - theta, pi + theta, pi/2 - theta}: a tree index,
/// a coordinate along one diagonal of the tree, and the quadrant index of
/// the outgoing direction.  With t = tan(theta) in (0,1) the four direction
/// vectors are q1 = (1,t), q2 = (-t,-1), q3 = (-1,-t), q4 = (t,1); odd
/// quadrants parametrize the boundary by the vertical diagonal, even ones by
/// the horizontal diagonal.
template <class S>
struct BoundaryStateT {
    std::int64_t tree_index = 0;
    S s_coord{};
    int quadrant = 1;
};
using BoundaryState = BoundaryStateT<Rat>;

template <class S>
struct HitT {
    BoundaryStateT<S> to;
    double flight_length = 0;
};
template <class S>
struct CornerStopT {
    S x{}, y{};
};
struct Escape {
    double traveled = 0;
};
template <class S>
using BilliardOutcomeT = std::variant<HitT<S>, CornerStopT<S>, Escape>;
using BilliardOutcome = BilliardOutcomeT<Rat>;

namespace detail {

template <class S>
struct Tolerance {
    static constexpr bool exact = true;
    static S seg(const S&) { return S(0); }
};
template <>
struct Tolerance<double> {
    static constexpr bool exact = false;
    static double seg(const double& s) { return 1e-9 * s; }
};

template <class S>
S to_scalar(const Rat& r) {
    if constexpr (std::is_same_v<S, Rat>) return r;
    else return to_double(r);
}

}  // namespace detail

/// Billiard in a fixed direction class over a configuration.  Exact when
/// S = Rat (corner hits are detected exactly); S = double runs long generic
/// orbits without coordinate blow-up.  Trees are enumerated lazily; indices
/// are stable as the known radius grows.
template <class S>
class BilliardEngine {
public:
    BilliardEngine(Configuration g, Rat theta_tan, std::optional<Rat> r_max = std::nullopt)
        : g_(std::move(g)), tan_(std::move(theta_tan)) {
        if (tan_ <= 0 || tan_ >= 1)
            throw std::invalid_argument("need 0 < tan(theta) < 1: side-parallel and "
                                        "axis-parallel directions are excluded");
        r_max_ = r_max.value_or(Rat(10000) * g_.diameter());
        s_ = detail::to_scalar<S>(g_.diameter());
        t_ = detail::to_scalar<S>(tan_);
    }

    const Configuration& config() const { return g_; }
    const Rat& escape_radius() const { return r_max_; }

    /// The outgoing direction vector of quadrant q (not normalized).
    std::pair<S, S> direction(int q) const {
        switch (q) {
            case 1: return {S(1), t_};
            case 2: return {-t_, S(-1)};
            case 3: return {S(-1), -t_};
            case 4: return {t_, S(1)};
        }
        throw std::invalid_argument("quadrant must be 1..4");
    }

    std::int64_t index_of(const Pt& center) {
        Rat ax = center.x < 0 ? Rat(-center.x) : center.x;
        Rat ay = center.y < 0 ? Rat(-center.y) : center.y;
        ensure_radius(ax + ay + 1);  // L1 norm dominates the L2 distance
        for (std::size_t i = 0; i < order_.size(); ++i)
            if (order_[i] == center) return static_cast<std::int64_t>(i);
        throw std::out_of_range("center not in configuration");
    }

    const Pt& center(std::int64_t index) {
        while (static_cast<std::size_t>(index) >= order_.size()) {
            std::size_t before = order_.size();
            ensure_radius(covered_ <= 0 ? Rat(4) * g_.diameter() : Rat(covered_ * 2));
            if (order_.size() == before && covered_ > Rat(16) * r_max_)
                throw std::out_of_range("tree index beyond the configuration");
        }
        return order_[static_cast<std::size_t>(index)];
    }

    /// The diagonal coordinate splits at the vertex image, which depends on
    /// the quadrant: (1 - t) s/2 for q1 and q4, (1 + t) s/2 for q2 and q3.
    S vertex_coord(int q) const {
        S h = s_ / 2;
        return (q == 1 || q == 4) ? S((S(1) - t_) * h) : S((S(1) + t_) * h);
    }

    /// Inverse of the along-direction projection onto the tree diagonal:
    /// odd quadrants use the vertical diagonal and the transversal y - t x,
    /// even quadrants the horizontal diagonal and x - t y.
    std::pair<S, S> boundary_point(const BoundaryStateT<S>& b) {
        const Pt& zc = center(b.tree_index);
        S zx = detail::to_scalar<S>(zc.x), zy = detail::to_scalar<S>(zc.y);
        S h = s_ / 2;
        if (b.s_coord < S(0) || b.s_coord > s_)
            throw std::invalid_argument("diagonal coordinate outside [0, s]");
        const S brk = vertex_coord(b.quadrant);
        const bool upper = b.s_coord >= brk;
        const S num = b.s_coord - brk;
        switch (b.quadrant) {
            case 1: {
                S w = upper ? S(num / (S(1) + t_)) : S(b.s_coord / (S(1) - t_) - h);
                return {upper ? S(zx + h - w) : S(zx + h + w), zy + w};
            }
            case 3: {
                S w = upper ? S(num / (S(1) - t_)) : S(b.s_coord / (S(1) + t_) - h);
                return {upper ? S(zx - h + w) : S(zx - h - w), zy + w};
            }
            case 4: {
                S u = upper ? S(num / (S(1) + t_)) : S(num / (S(1) - t_));
                return {zx + u, upper ? S(zy + h - u) : S(zy + h + u)};
            }
            case 2: {
                S u = upper ? S(num / (S(1) - t_)) : S(num / (S(1) + t_));
                return {zx + u, upper ? S(zy - h + u) : S(zy - h - u)};
            }
        }
        throw std::invalid_argument("quadrant must be 1..4");
    }

    /// Forward projection: the diagonal coordinate of a boundary point for a
    /// given departing quadrant.
    S diagonal_coord(int q, const S& x, const S& y, const S& zx, const S& zy) const {
        S h = s_ / 2;
        if (q % 2 == 1) return (y - zy) - t_ * (x - zx) + h;
        return (x - zx) - t_ * (y - zy) + h;
    }

    BilliardOutcomeT<S> step(const BoundaryStateT<S>& b) {
        auto [px, py] = boundary_point(b);
        auto [vx, vy] = direction(b.quadrant);
        const Pt own = center(b.tree_index);

        // expanding-window search: any obstacle met before parameter u has
        // its center within L1 distance s of the ray, hence inside the box
        Rat u_cap = Rat(4) * g_.diameter();
        while (true) {
            if (u_cap > r_max_) u_cap = r_max_;
            Hitinfo best = nearest_hit(px, py, vx, vy, own, u_cap);
            if (best.found) {
                if (best.corner) return CornerStopT<S>{best.x, best.y};
                return make_hit(best, vx, vy);
            }
            if (u_cap == r_max_)
                return Escape{to_double(r_max_) * std::hypot(1.0, to_double(tan_))};
            u_cap *= 4;
        }
    }

    /// The same boundary point re-emitted along the time-reversed ray: the
    /// reversed outgoing direction, reflected off the local side.  Undefined
    /// at the diagonal midpoint (a vertex).
    BoundaryStateT<S> reversed(const BoundaryStateT<S>& b) {
        if (b.s_coord == vertex_coord(b.quadrant))
            throw std::invalid_argument("reversal undefined at a vertex");
        // side slopes: q1 uses NE(-1)/SE(+1), q3 NW(+1)/SW(-1),
        // q4 NE(-1)/NW(+1), q2 SE(+1)/SW(-1); above the vertex image is the
        // first-named side
        bool upper = b.s_coord > vertex_coord(b.quadrant);
        int slope;
        switch (b.quadrant) {
            case 1: slope = upper ? -1 : +1; break;
            case 3: slope = upper ? +1 : -1; break;
            case 4: slope = upper ? -1 : +1; break;
            default: slope = upper ? +1 : -1; break;
        }
        auto [vx, vy] = direction(b.quadrant);
        S rx = -vx, ry = -vy;
        S wx = slope > 0 ? S(ry) : S(-ry);
        S wy = slope > 0 ? S(rx) : S(-rx);
        BoundaryStateT<S> out;
        out.tree_index = b.tree_index;
        out.quadrant = quadrant_of(wx, wy);
        auto [px, py] = boundary_point(b);
        const Pt& zc = center(b.tree_index);
        S zx = detail::to_scalar<S>(zc.x), zy = detail::to_scalar<S>(zc.y);
        out.s_coord = diagonal_coord(out.quadrant, px, py, zx, zy);
        return out;
    }

private:
    struct Hitinfo {
        bool found = false, corner = false;
        S u{}, x{}, y{};
        Pt tree{};
        int slope = 0;
    };

    int quadrant_of(const S& vx, const S& vy) const {
        if (vx == S(1)) return 1;
        if (vy == S(-1)) return 2;
        if (vx == S(-1)) return 3;
        if (vy == S(1)) return 4;
        throw std::logic_error("direction left the closed class");
    }

    static double scalar_to_double(const S& v) {
        if constexpr (std::is_same_v<S, Rat>) return to_double(v);
        else return v;
    }

    HitT<S> make_hit(const Hitinfo& best, const S& vx, const S& vy) {
        S wx = best.slope > 0 ? S(vy) : S(-vy);  // elastic reflection
        S wy = best.slope > 0 ? S(vx) : S(-vx);
        BoundaryStateT<S> to;
        to.quadrant = quadrant_of(wx, wy);
        to.tree_index = index_of(best.tree);
        S zx = detail::to_scalar<S>(best.tree.x), zy = detail::to_scalar<S>(best.tree.y);
        to.s_coord = diagonal_coord(to.quadrant, best.x, best.y, zx, zy);
        double fl = scalar_to_double(best.u) * std::hypot(1.0, to_double(tan_));
        return HitT<S>{to, fl};
    }

    Hitinfo nearest_hit(const S& px, const S& py, const S& vx, const S& vy, const Pt& own,
                        const Rat& u_cap_r) {
        S u_cap = detail::to_scalar<S>(u_cap_r);
        Box box = ray_box(px, py, vx, vy, u_cap_r);
        ensure_covers(box);
        Hitinfo best;
        const S tol = detail::Tolerance<S>::seg(s_);
        for (const Pt& zc : cache_) {
            if (zc == own) continue;
            S zx = detail::to_scalar<S>(zc.x), zy = detail::to_scalar<S>(zc.y);
            S h = s_ / 2;
            // four sides: (line constant, slope, x-range)
            struct Side {
                S c, xlo, xhi;
                int slope;
            };
            const Side sides[4] = {
                {S(zx + zy + h), zx, S(zx + h), -1},   // NE: x + y = c
                {S(zx - zy - h), S(zx - h), zx, +1},   // NW: x - y = c
                {S(zx + zy - h), S(zx - h), zx, -1},   // SW: x + y = c
                {S(zx - zy + h), zx, S(zx + h), +1},   // SE: x - y = c
            };
            for (const Side& sd : sides) {
                S den = sd.slope < 0 ? S(vx + vy) : S(vx - vy);
                S num = sd.slope < 0 ? S(sd.c - px - py) : S(sd.c - px + py);
                if (den == S(0)) continue;  // excluded by the direction domain
                S u = num / den;
                if (u <= tol || u > u_cap) continue;
                S hx = px + u * vx, hy = py + u * vy;
                if (hx < sd.xlo - tol || hx > sd.xhi + tol) continue;
                bool at_end = (hx <= sd.xlo + tol) || (hx >= sd.xhi - tol);
                if (best.found && u > best.u) continue;
                if (best.found && u == best.u) {
                    // simultaneous hit: a vertex, or the interior of a side
                    // shared by two trees (kept on the lexicographically
                    // smaller tree for determinism)
                    best.corner = best.corner || at_end;
                    if (zc < best.tree) best.tree = zc;
                    continue;
                }
                best.found = true;
                best.u = u;
                best.x = hx;
                best.y = hy;
                best.tree = zc;
                best.slope = sd.slope;
                best.corner = at_end;
            }
        }
        return best;
    }

    Box ray_box(const S& px, const S& py, const S& vx, const S& vy, const Rat& u_cap) const {
        auto lo_hi = [&](const S& p, const S& v) {
            Rat a = to_rat(p), b = to_rat(S(p + detail::to_scalar<S>(u_cap) * v));
            if (a > b) std::swap(a, b);
            return std::pair<Rat, Rat>{a - g_.diameter(), b + g_.diameter()};
        };
        auto [xlo, xhi] = lo_hi(px, vx);
        auto [ylo, yhi] = lo_hi(py, vy);
        return Box{xlo - 1, xhi + 1, ylo - 1, yhi + 1};
    }

    static Rat to_rat(const S& v) {
        if constexpr (std::is_same_v<S, Rat>) return v;
        else {
            // conservative rational envelope for double coordinates
            return Rat(static_cast<long long>(std::floor(v)));
        }
    }

    void ensure_covers(const Box& b) {
        Rat need = std::max({Rat(b.xhi), Rat(-b.xlo), Rat(b.yhi), Rat(-b.ylo), Rat(1)});
        if (need > covered_) ensure_radius(need);
    }

    void ensure_radius(Rat r) {
        if (r <= covered_) return;
        covered_ = r;
        std::vector<Pt> pts = g_.centers_in_region(Box{-covered_ - 1, covered_ + 1,
                                                       -covered_ - 1, covered_ + 1});
        cache_ = pts;
        // stable enumeration: order by distance within the covered disc only,
        // so growing the radius appends strictly farther trees
        std::vector<Pt> in = enumerate_trees(g_, covered_);
        for (std::size_t i = order_.size(); i < in.size(); ++i) order_.push_back(in[i]);
    }

    Configuration g_;
    Rat tan_, r_max_;
    S s_{}, t_{};
    Rat covered_ = 0;
    std::vector<Pt> cache_;   // all centers in the covered square
    std::vector<Pt> order_;   // enumeration by increasing distance
};

using WindTreeBilliard = BilliardEngine<Rat>;
using FastBilliard = BilliardEngine<double>;

/// One first-return step of the billiard map for direction class tan(theta).
inline BilliardOutcome billiard_step(const Configuration& g, const Rat& theta_tan,
                                     const BoundaryState& b,
                                     std::optional<Rat> r_max = std::nullopt) {
    WindTreeBilliard engine(g, theta_tan, std::move(r_max));
    return engine.step(b);
}

}  // namespace stairwind::wind
