#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <stdexcept>
#include <string>

namespace stairwind {

using Rat = boost::multiprecision::cpp_rational;
using Int = boost::multiprecision::cpp_int;

inline Int rat_num(const Rat& r) { return numerator(r); }
inline Int rat_den(const Rat& r) { return denominator(r); }

inline double to_double(const Rat& r) { return r.convert_to<double>(); }

/// Reduce x into [0, m). m > 0.
inline Rat rmod(Rat x, const Rat& m) {
    if (x >= 0 && x < m) return x;
    Rat q = x / m;
    Int f = rat_num(q) / rat_den(q);   // truncates toward zero
    x -= Rat(f) * m;
    if (x < 0) x += m;
    if (x >= m) x -= m;
    return x;
}

/// Reduce x into [0, 2), the circumference of a section circle.
inline Rat mod2(const Rat& x) { return rmod(x, 2); }

/// Cyclic distance between two points on a circle of circumference m.
inline Rat circle_dist(const Rat& a, const Rat& b, const Rat& m) {
    Rat d = rmod(a - b, m);
    return d <= m - d ? d : m - d;
}

/// Parse an exact rational written as "p/q" or "p". Rejects q = 0,
/// empty strings and anything with trailing garbage.
inline std::optional<Rat> parse_rational(const std::string& s) {
    auto slash = s.find('/');
    try {
        if (slash == std::string::npos) {
            if (s.empty()) return std::nullopt;
            return Rat(Int(s));
        }
        std::string ps = s.substr(0, slash), qs = s.substr(slash + 1);
        if (ps.empty() || qs.empty()) return std::nullopt;
        Int p(ps), q(qs);
        if (q == 0) return std::nullopt;
        return Rat(p, q);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

inline Rat parse_rational_or_throw(const std::string& s) {
    auto r = parse_rational(s);
    if (!r) throw std::invalid_argument("invalid rational: '" + s + "'");
    return *r;
}

/// Canonical "p/q" form (always includes the denominator).
inline std::string format_rational(const Rat& r) {
    return rat_num(r).str() + "/" + rat_den(r).str();
}

}  // namespace stairwind
