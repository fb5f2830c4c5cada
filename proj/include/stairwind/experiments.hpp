#pragma once

// Reproducible experiment runner: JSON config ingestion (exact rationals
// only), manifest hashing, deterministic CSV emission, and one runner per
// CLI subcommand.  Every output file cross-references the manifest hash of
// the run that produced it; identical manifests reproduce identical bytes.

#include "stairwind/coding.hpp"
#include "stairwind/observables.hpp"
#include "stairwind/skew.hpp"
#include "stairwind/windtree.hpp"

#include <json.hpp>

#include <atomic>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace stairwind::lab {

using nlohmann::json;

inline constexpr int kArtifactVersion = 1;

/// Invalid or malformed configuration: the CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Config ingestion

/// Exact rational from a config value: an integer, or a "p/q" string.
/// Floating-point numbers are refused so the exact backend stays honest.
inline Rat rat_from(const json& v, const std::string& where) {
    if (v.is_number_integer()) return Rat(v.get<std::int64_t>());
    if (v.is_string()) {
        auto r = parse_rational(v.get<std::string>());
        if (!r) throw ConfigError(where + ": malformed rational '" + v.get<std::string>() + "'");
        return *r;
    }
    throw ConfigError(where + ": expected an integer or a \"p/q\" string");
}

inline const json& field(const json& j, const std::string& key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(where + ": missing field '" + key + "'");
    return *it;
}

inline std::int64_t int_from(const json& v, const std::string& where) {
    if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
    return v.get<std::int64_t>();
}

/// Width sequence schema: an optional window plus a tail object:
///   {"window_start": 0, "window": ["1/2"], "tail": {"kind": "zero"}}
///   {"tail": {"kind": "constant", "constant": "1/2"}}
///   {"window": ["1/3", "1/2"], "tail": {"kind": "periodic"}}
///   {"tail": {"kind": "reciprocal"}}
inline WidthSequence width_from(const json& j, const std::string& where = "widths") {
    const json& tj = field(j, "tail", where);
    if (!tj.is_object()) throw ConfigError(where + ".tail: expected an object with 'kind'");
    const std::string kind = field(tj, "kind", where + ".tail").get<std::string>();
    std::vector<Rat> window;
    if (j.contains("window"))
        for (const auto& v : j["window"]) window.push_back(rat_from(v, where + ".window"));
    Level start = j.contains("window_start")
                      ? static_cast<Level>(int_from(j["window_start"], where))
                      : 0;
    if (kind == "constant") {
        Rat c = rat_from(field(tj, "constant", where + ".tail"), where + ".tail.constant");
        if (!window.empty()) return WidthSequence(start, window, TailKind::Constant, c);
        return WidthSequence::constant(c);
    }
    if (kind == "zero") return WidthSequence::windowed(start, window);
    if (kind == "periodic") {
        if (window.empty()) throw ConfigError(where + ": periodic tail needs a window");
        return WidthSequence::periodic(window, start);
    }
    if (kind == "reciprocal") return WidthSequence::reciprocal_decay();
    throw ConfigError(where + ".tail.kind: unknown kind '" + kind + "'");
}

/// {"slope": "p/q", "sign": 1}; the sign defaults to +1.
inline Direction direction_from(const json& j, const std::string& where = "direction") {
    Rat slope = rat_from(field(j, "slope", where), where + ".slope");
    int sign = j.contains("sign") ? static_cast<int>(int_from(j["sign"], where)) : +1;
    if (sign != 1 && sign != -1) throw ConfigError(where + ": sign must be +-1");
    return Direction(std::move(slope), sign);
}

inline SysPoint point_from(const json& j, const std::string& where = "start") {
    SysPoint p;
    p.component = int_from(field(j, "level", where), where + ".level");
    p.pos = rat_from(field(j, "x", where), where + ".x");
    if (p.pos < 0 || p.pos >= 2) throw ConfigError(where + ".x: outside [0,2)");
    return p;
}

inline TestFunction test_function_from(const json& j, const std::string& where) {
    Level N = static_cast<Level>(int_from(field(j, "N", where), where + ".N"));
    int floor_q = static_cast<int>(int_from(field(j, "floor_q", where), where + ".floor_q"));
    std::vector<TestFunction::Tent> tents;
    if (j.contains("tents"))
        for (const auto& t : j["tents"])
            tents.push_back({static_cast<Level>(int_from(field(t, "level", where), where)),
                             rat_from(field(t, "center", where), where),
                             rat_from(field(t, "halfwidth", where), where),
                             rat_from(field(t, "height", where), where)});
    try {
        return TestFunction(N, floor_q, std::move(tents));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

inline json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    return j;
}

// ---------------------------------------------------------------------------
// Manifest hashing

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return buf;
}

/// Everything that determines the outputs: kind, full parameter object and
/// artifact version.  The hash covers exactly these (canonical key-sorted
/// dump); the timestamp lives only in the manifest file and is excluded.
struct Manifest {
    std::string kind;
    json params;
    int version = kArtifactVersion;

    std::string hash() const {
        json canon{{"kind", kind}, {"params", params}, {"version", version}};
        return hex64(fnv1a64(canon.dump()));
    }

    json to_json(bool with_timestamp = true) const {
        json j{{"kind", kind}, {"params", params}, {"version", version}, {"hash", hash()}};
        if (with_timestamp) j["timestamp"] = static_cast<std::int64_t>(std::time(nullptr));
        return j;
    }
};

// ---------------------------------------------------------------------------
// CSV emission (comma, LF, '.' decimal, rationals as "p/q")

inline std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_num(const Rat& r) { return format_rational(r); }
inline std::string csv_num(std::int64_t v) { return std::to_string(v); }

class CsvFile {
public:
    CsvFile(const std::filesystem::path& path, const std::string& manifest_hash,
            const std::vector<std::string>& columns)
        : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        out_ << "# manifest " << manifest_hash << "\n";
        write_row(columns);
    }

    void write_row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

inline void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Parallel map with deterministic aggregation

namespace detail {

/// Evaluate fn(0..n-1) on up to `threads` workers; results land in index
/// order, so the aggregate is independent of the thread count.
template <typename T>
std::vector<T> parallel_map(std::size_t n, int threads, const std::function<T(std::size_t)>& fn) {
    std::vector<T> out(n);
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) out[i] = fn(i);
    };
    std::vector<std::thread> pool;
    int k = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    for (int t = 0; t < k; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Runners

struct RunResult {
    int exit_code = 0;
    std::vector<std::string> files;  // paths written, relative to out_dir
    std::string error;               // empty on success
};

struct RunContext {
    std::filesystem::path out;
    int threads = 1;
    std::optional<SumBackend> backend;  // --backend override, when given
};

namespace detail {

inline SumBackend backend_from(const json& cfg, const RunContext& ctx) {
    if (ctx.backend) return *ctx.backend;
    if (!cfg.contains("backend")) return SumBackend::Float64;
    std::string b = cfg["backend"].get<std::string>();
    if (b == "rational") return SumBackend::Rational;
    if (b == "float64") return SumBackend::Float64;
    throw ConfigError("backend: expected 'rational' or 'float64'");
}

inline std::vector<std::int64_t> checkpoints_from(const json& cfg, const std::string& key) {
    std::vector<std::int64_t> cps;
    for (const auto& v : field(cfg, key, "config")) cps.push_back(int_from(v, key));
    if (cps.empty()) throw ConfigError(key + ": must be non-empty");
    return cps;
}

}  // namespace detail

inline RunResult run_orbit(const json& cfg, const RunContext& ctx) {
    WidthSequence w = width_from(field(cfg, "widths", "config"));
    Direction d = direction_from(field(cfg, "direction", "config"));
    SysPoint z = point_from(field(cfg, "start", "config"));
    std::int64_t steps = int_from(field(cfg, "steps", "config"), "steps");
    StaircaseSystem sys(w, d);

    Manifest man{"orbit", cfg};
    OrbitRecord rec = orbit(sys, z, steps);
    CsvFile csv(ctx.out / "orbit.csv", man.hash(),
                {"step", "level", "x_num", "x_den", "slit_symbol"});
    auto num = [](const Rat& r) { return rat_num(r).str(); };
    auto den = [](const Rat& r) { return rat_den(r).str(); };
    csv.write_row({"0", csv_num(z.component), num(z.pos), den(z.pos), ""});
    for (std::size_t i = 0; i < rec.points.size(); ++i)
        csv.write_row({csv_num(static_cast<std::int64_t>(i + 1)), csv_num(rec.points[i].component),
                       num(rec.points[i].pos), den(rec.points[i].pos),
                       csv_num(static_cast<std::int64_t>(rec.labels[i]))});
    write_json_file(ctx.out / "summary.json",
                    {{"manifest", man.hash()},
                     {"steps_done", rec.points.size()},
                     {"end", rec.end == OrbitEnd::Budget ? "budget" : "singular"}});
    write_json_file(ctx.out / "manifest.json", man.to_json());
    return {0, {"orbit.csv", "summary.json", "manifest.json"}, ""};
}

inline RunResult run_boxes(const json& cfg, const RunContext& ctx) {
    WidthSequence w = width_from(field(cfg, "widths", "config"));
    Direction d = direction_from(field(cfg, "direction", "config"));
    std::int64_t m_max = int_from(field(cfg, "m_max", "config"), "m_max");
    Rat epsilon = rat_from(field(cfg, "epsilon", "config"), "epsilon");
    if (m_max < 1) throw ConfigError("m_max: must be >= 1");
    StaircaseSystem sys(w, d);

    Manifest man{"boxes", cfg};
    BoxSequence seq;
    for (std::int64_t m = 1; m <= m_max; ++m) {
        std::vector<std::int64_t> box;
        for (std::int64_t k = -m + 1; k <= m; ++k) box.push_back(k);
        seq.boxes.push_back(std::move(box));
    }
    BoxReport rep = certify_conservativity(sys, seq, epsilon);
    CsvFile csv(ctx.out / "boxes.csv", man.hash(), {"m", "escape", "within"});
    for (std::size_t i = 0; i < rep.escapes.size(); ++i)
        csv.write_row({csv_num(static_cast<std::int64_t>(i + 1)), csv_num(rep.escapes[i]),
                       rep.within[i] ? "1" : "0"});
    write_json_file(ctx.out / "summary.json", {{"manifest", man.hash()},
                                               {"certified", rep.certified},
                                               {"first_within", rep.first_within}});
    write_json_file(ctx.out / "manifest.json", man.to_json());
    return {0, {"boxes.csv", "summary.json", "manifest.json"}, ""};
}

inline RunResult run_sigma(const json& cfg, const RunContext& ctx) {
    WidthSequence w = width_from(field(cfg, "widths", "config"));
    Direction d = direction_from(field(cfg, "direction", "config"));
    Level N = static_cast<Level>(int_from(field(cfg, "N", "config"), "N"));

    Manifest man{"sigma", cfg};
    SingularSet sigma = sigma_set(w, d, N);
    CsvFile csv(ctx.out / "sigma.csv", man.hash(), {"level", "x", "kinds", "blocking"});
    for (const auto& lvl : sigma.by_level)
        for (const SigmaPoint& s : lvl)
            csv.write_row({csv_num(static_cast<std::int64_t>(s.p.level)), csv_num(s.p.x),
                           csv_num(static_cast<std::int64_t>(s.kinds)), s.blocking() ? "1" : "0"});
    write_json_file(ctx.out / "manifest.json", man.to_json());
    return {0, {"sigma.csv", "manifest.json"}, ""};
}

inline RunResult run_partition(const json& cfg, const RunContext& ctx) {
    WidthSequence w = width_from(field(cfg, "widths", "config"));
    Direction d = direction_from(field(cfg, "direction", "config"));
    Level N = static_cast<Level>(int_from(field(cfg, "N", "config"), "N"));
    int ell = static_cast<int>(int_from(field(cfg, "ell", "config"), "ell"));

    Manifest man{"partition", cfg};
    ContinuityPartition part = continuity_partition(w, d, N, ell);
    CsvFile csv(ctx.out / "partition.csv", man.hash(),
                {"level", "cut_x", "source_identity", "backward_index"});
    std::size_t cuts = 0;
    for (const LevelCuts& lc : part.levels)
        for (const Cut& c : lc.cuts) {
            for (const CutIdentity& id : c.ids) {
                static const char* kind_name[] = {"", "down-end", "up-end", "", "corner"};
                std::string src = std::to_string(id.src_level) + ":" +
                                  kind_name[static_cast<unsigned>(id.kind)];
                csv.write_row({csv_num(static_cast<std::int64_t>(lc.level)), csv_num(c.x), src,
                               csv_num(static_cast<std::int64_t>(id.back_index))});
            }
            ++cuts;
        }
    write_json_file(ctx.out / "summary.json", {{"manifest", man.hash()},
                                               {"min_gap", format_rational(part.min_gap)},
                                               {"cuts", cuts}});
    write_json_file(ctx.out / "manifest.json", man.to_json());
    return {0, {"partition.csv", "summary.json", "manifest.json"}, ""};
}

inline RunResult run_hopf(const json& cfg, const RunContext& ctx) {
    WidthSequence w = width_from(field(cfg, "widths", "config"));
    Direction d = direction_from(field(cfg, "direction", "config"));
    SysPoint z = point_from(field(cfg, "start", "config"));
    auto cps = detail::checkpoints_from(cfg, "checkpoints");
    TestFunction hj = test_function_from(field(cfg, "numerator", "config"), "numerator");
    TestFunction hn = test_function_from(field(cfg, "denominator", "config"), "denominator");
    int sign = cfg.contains("sign") ? static_cast<int>(int_from(cfg["sign"], "sign")) : +1;
    SumBackend backend = detail::backend_from(cfg, ctx);
    StaircaseSystem sys(w, d);

    Manifest man{"hopf", cfg};
    RatioReport rep = hopf_average(sys, hj, hn, z, cps, sign, backend);
    CsvFile csv(ctx.out / "hopf.csv", man.hash(),
                {"ell", "num", "den", "ratio", "target", "abs_dev"});
    for (const RatioRow& r : rep.rows)
        csv.write_row({csv_num(r.ell), csv_num(r.num), csv_num(r.den), csv_num(r.ratio),
                       csv_num(rep.target), csv_num(r.abs_dev)});
    write_json_file(ctx.out / "summary.json",
                    {{"manifest", man.hash()},
                     {"target", format_rational(rep.target_exact)},
                     {"truncated", rep.truncated},
                     {"steps_done", rep.steps_done}});
    write_json_file(ctx.out / "manifest.json", man.to_json());
    return {0, {"hopf.csv", "summary.json", "manifest.json"}, ""};
}

inline RunResult run_uniform(const json& cfg, const RunContext& ctx) {
    WidthSequence w = width_from(field(cfg, "widths", "config"));
    Direction d = direction_from(field(cfg, "direction", "config"));
    auto ells = detail::checkpoints_from(cfg, "checkpoints");
    TestFunction hj = test_function_from(field(cfg, "numerator", "config"), "numerator");
    TestFunction hn = test_function_from(field(cfg, "denominator", "config"), "denominator");
    std::int64_t per_level = int_from(field(cfg, "grid_per_level", "config"), "grid_per_level");
    if (per_level < 1) throw ConfigError("grid_per_level: must be >= 1");
    Level N = hj.window();
    StaircaseSystem sys(w, d);

    std::vector<SysPoint> grid;
    for (Level k = -N + 1; k <= N; ++k)
        for (std::int64_t i = 0; i < per_level; ++i)
            grid.push_back({k, Rat(2 * i + 1, per_level)});

    Manifest man{"uniform", cfg};
    UniformProfile prof = uniform_hopf_profile(sys, hj, hn, ells, grid);
    CsvFile csv(ctx.out / "uniform.csv", man.hash(), {"ell", "sup_dev"});
    for (const auto& r : prof.rows) csv.write_row({csv_num(r.ell), csv_num(r.sup_dev)});
    write_json_file(ctx.out / "summary.json",
                    {{"manifest", man.hash()}, {"skipped", prof.skipped}});
    write_json_file(ctx.out / "manifest.json", man.to_json());
    return {0, {"uniform.csv", "summary.json", "manifest.json"}, ""};
}

inline RunResult run_generic_check(const json& cfg, const RunContext& ctx) {
    WidthSequence w_ringed = width_from(field(cfg, "ringed_widths", "config"), "ringed_widths");
    WidthSequence w = width_from(field(cfg, "widths", "config"));
    Level N = static_cast<Level>(int_from(field(cfg, "N", "config"), "N"));
    int ell = static_cast<int>(int_from(field(cfg, "ell", "config"), "ell"));
    double gamma = field(cfg, "gamma", "config").get<double>();
    std::vector<Direction> dirs;
    for (const auto& v : field(cfg, "directions", "config"))
        dirs.push_back(direction_from(v, "directions[]"));

    Manifest man{"generic-check", cfg};
    GenericityReport rep = genericity_scale_check(w_ringed, w, dirs, N, ell, gamma);
    CsvFile csv(ctx.out / "generic.csv", man.hash(), {"a0", "a1", "a2", "a3", "max_a2_dev"});
    csv.write_row({rep.a0 ? "1" : "0", rep.a1 ? "1" : "0", rep.a2 ? "1" : "0",
                   rep.a3 ? "1" : "0", csv_num(rep.max_a2_dev)});
    write_json_file(ctx.out / "summary.json", {{"manifest", man.hash()},
                                               {"all", rep.all()},
                                               {"max_a2_dev", rep.max_a2_dev}});
    write_json_file(ctx.out / "manifest.json", man.to_json());
    return {0, {"generic.csv", "summary.json", "manifest.json"}, ""};
}

inline RunResult run_maharam(const json& cfg, const RunContext& ctx) {
    WidthSequence w = width_from(field(cfg, "widths", "config"));
    Direction d = direction_from(field(cfg, "direction", "config"));
    double a = field(cfg, "a", "config").get<double>();
    std::int64_t cells = int_from(field(cfg, "cells", "config"), "cells");
    int depth = cfg.contains("cylinder_depth")
                    ? static_cast<int>(int_from(cfg["cylinder_depth"], "cylinder_depth"))
                    : 10;

    Manifest man{"maharam", cfg};
    SkewSystem sk = quotient_base(w, d);
    ConformalMeasure mu = solve_conformal(sk, a, cells);
    MaharamMeasure m = maharam_measure(mu);
    double inv = maharam_invariance_check(sk, m, depth);

    CsvFile csv(ctx.out / "density.csv", man.hash(),
                {"residue", "cell_left", "cell_right", "density"});
    for (std::size_t r = 0; r < mu.mass.size(); ++r)
        for (std::size_t c = 0; c < mu.mass[r].size(); ++c)
            csv.write_row({csv_num(static_cast<std::int64_t>(r)),
                           csv_num(Rat(2 * static_cast<std::int64_t>(c), cells)),
                           csv_num(Rat(2 * (static_cast<std::int64_t>(c) + 1), cells)),
                           csv_num(mu.density(static_cast<std::int64_t>(r),
                                              static_cast<std::int64_t>(c)))});
    write_json_file(ctx.out / "summary.json",
                    {{"manifest", man.hash()},
                     {"depth", cells},
                     {"tol", 1e-10},
                     {"residual", mu.residual},
                     {"residual_exact_zero", mu.residual_exact_zero},
                     {"invariance_residual", inv},
                     {"iterations", mu.iterations}});
    write_json_file(ctx.out / "manifest.json", man.to_json());
    return {0, {"density.csv", "summary.json", "manifest.json"}, ""};
}

inline RunResult run_windtree_orbit(const json& cfg, const RunContext& ctx) {
    // configuration schema: {"s": "p/q", "source": {"type": ..., ...}}
    const json& gj = field(cfg, "configuration", "config");
    Rat s = rat_from(field(gj, "s", "configuration"), "configuration.s");
    const json& src = field(gj, "source", "configuration");
    std::string type = field(src, "type", "configuration.source").get<std::string>();
    wind::Configuration g = [&] {
        try {
            if (type == "ringed")
                return wind::ringed_config(int_from(field(src, "n", "source"), "n"), s);
            if (type == "lattice")
                return wind::lattice_config(
                    s, rat_from(field(src, "spacing", "source"), "spacing"),
                    wind::Pt{rat_from(field(src, "offset_x", "source"), "offset_x"),
                             rat_from(field(src, "offset_y", "source"), "offset_y")});
            if (type == "explicit") {
                std::vector<wind::Pt> centers;
                for (const auto& c : field(src, "centers", "source"))
                    centers.push_back({rat_from(c.at(0), "centers"), rat_from(c.at(1), "centers")});
                return wind::explicit_config(s, std::move(centers));
            }
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("configuration: ") + e.what());
        }
        throw ConfigError("configuration.source.type: expected ringed, lattice or explicit");
    }();
    Rat slope = rat_from(field(cfg, "slope", "config"), "slope");
    std::int64_t steps = int_from(field(cfg, "steps", "config"), "steps");
    const json& sj = field(cfg, "start", "config");
    wind::Pt start_tree{rat_from(field(sj, "tree_x", "start"), "start.tree_x"),
                        rat_from(field(sj, "tree_y", "start"), "start.tree_y")};
    Rat s_coord = rat_from(field(sj, "s_coord", "start"), "start.s_coord");
    int quadrant = static_cast<int>(int_from(field(sj, "quadrant", "start"), "start.quadrant"));

    Manifest man{"windtree-orbit", cfg};
    CsvFile csv(ctx.out / "windtree.csv", man.hash(),
                {"step", "tree_x", "tree_y", "quadrant", "s_coord", "flight_length"});
    std::string end = "budget";
    std::int64_t done = 0;
    try {
        wind::WindTreeBilliard eng(g, slope);
        wind::BoundaryState cur{eng.index_of(start_tree), s_coord, quadrant};
        csv.write_row({"0", csv_num(start_tree.x), csv_num(start_tree.y), csv_num(
                           static_cast<std::int64_t>(quadrant)), csv_num(s_coord), ""});
        for (; done < steps; ) {
            auto out = eng.step(cur);
            if (auto* h = std::get_if<wind::HitT<Rat>>(&out)) {
                cur = h->to;
                const wind::Pt& z = eng.center(cur.tree_index);
                ++done;
                csv.write_row({csv_num(done), csv_num(z.x), csv_num(z.y),
                               csv_num(static_cast<std::int64_t>(cur.quadrant)),
                               csv_num(cur.s_coord), csv_num(h->flight_length)});
            } else {
                end = std::holds_alternative<wind::Escape>(out) ? "escape" : "corner";
                break;
            }
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("windtree: ") + e.what());
    }
    write_json_file(ctx.out / "summary.json",
                    {{"manifest", man.hash()}, {"steps_done", done}, {"end", end}});
    write_json_file(ctx.out / "manifest.json", man.to_json());
    return {0, {"windtree.csv", "summary.json", "manifest.json"}, ""};
}

/// Per-direction summary over a rational slope grid: saddle flag within the
/// given combinatorial budget, partition gap eta, separation iota, and the
/// Hopf deviation of a canonical pair at the final checkpoint.  Directions
/// are processed in the order given; parallel workers aggregate by index.
inline RunResult run_theta_scan(const json& cfg, const RunContext& ctx) {
    WidthSequence w = width_from(field(cfg, "widths", "config"));
    Level N = static_cast<Level>(int_from(field(cfg, "N", "config"), "N"));
    int ell = static_cast<int>(int_from(field(cfg, "ell", "config"), "ell"));
    std::int64_t hopf_ell = int_from(field(cfg, "hopf_ell", "config"), "hopf_ell");
    std::vector<Rat> slopes;
    for (const auto& v : field(cfg, "slopes", "config")) slopes.push_back(rat_from(v, "slopes"));

    Manifest man{"theta-scan", cfg};
    TestFunction hj(N, 6, {{-N + 1, Rat(1, 2), Rat(1, 4), Rat(1)}});
    TestFunction hn = TestFunction::floor_only(N, 6);

    struct Row {
        std::string slope, saddle, eta, iota, hopf_dev;
    };
    auto scan_one = [&](std::size_t i) -> Row {
        Direction d(slopes[i]);
        Row row{format_rational(slopes[i]), "0", "", "", ""};
        if (detect_saddle(w, d, N, ell)) {
            row.saddle = "1";
            return row;
        }
        row.eta = format_rational(continuity_partition(w, d, N, ell).min_gap);
        row.iota = format_rational(separation_iota(w, d, N, ell));
        RatioReport rep = hopf_average(StaircaseSystem(w, d), hj, hn, {0, Rat(17, 64)},
                                       {hopf_ell}, +1);
        if (!rep.truncated) row.hopf_dev = csv_num(rep.rows.back().abs_dev);
        return row;
    };
    std::vector<Row> rows =
        detail::parallel_map<Row>(slopes.size(), ctx.threads, scan_one);

    CsvFile csv(ctx.out / "theta_scan.csv", man.hash(),
                {"slope", "saddle", "eta", "iota", "hopf_dev"});
    for (const Row& r : rows) csv.write_row({r.slope, r.saddle, r.eta, r.iota, r.hopf_dev});
    write_json_file(ctx.out / "manifest.json", man.to_json());
    return {0, {"theta_scan.csv", "manifest.json"}, ""};
}

// ---------------------------------------------------------------------------
// Dispatcher

/// Run one subcommand against a parsed config.  Exit codes: 0 success,
/// 2 invalid config, 3 solver non-convergence, 1 anything else; on failure
/// an error.json with the machine-readable reason is written to out.
inline RunResult run(const std::string& sub, const json& cfg, const RunContext& ctx) {
    std::error_code ec;
    std::filesystem::create_directories(ctx.out, ec);
    auto fail = [&](int code, const std::string& kind, const std::string& msg,
                    json extra = json::object()) {
        json err{{"error", kind}, {"message", msg}};
        for (auto& [k, v] : extra.items()) err[k] = v;
        write_json_file(ctx.out / "error.json", err);
        return RunResult{code, {"error.json"}, msg};
    };
    try {
        if (sub == "orbit") return run_orbit(cfg, ctx);
        if (sub == "boxes") return run_boxes(cfg, ctx);
        if (sub == "sigma") return run_sigma(cfg, ctx);
        if (sub == "partition") return run_partition(cfg, ctx);
        if (sub == "hopf") return run_hopf(cfg, ctx);
        if (sub == "uniform") return run_uniform(cfg, ctx);
        if (sub == "generic-check") return run_generic_check(cfg, ctx);
        if (sub == "maharam") return run_maharam(cfg, ctx);
        if (sub == "windtree-orbit") return run_windtree_orbit(cfg, ctx);
        if (sub == "theta-scan") return run_theta_scan(cfg, ctx);
        return fail(2, "unknown-subcommand", "no such subcommand: " + sub);
    } catch (const ConfigError& e) {
        return fail(2, "invalid-config", e.what());
    } catch (const json::exception& e) {
        return fail(2, "invalid-config", e.what());
    } catch (const NonConvergence& e) {
        json trace = json::array();
        for (double r : e.residual_trace) trace.push_back(r);
        return fail(3, "non-convergence", e.what(), {{"residual_trace", trace}});
    } catch (const std::exception& e) {
        return fail(1, "runtime-error", e.what());
    }
}

inline RunResult run_file(const std::string& sub, const std::string& config_path,
                          const RunContext& ctx) {
    try {
        return run(sub, load_config(config_path), ctx);
    } catch (const ConfigError& e) {
        std::error_code ec;
        std::filesystem::create_directories(ctx.out, ec);
        write_json_file(ctx.out / "error.json",
                        {{"error", "invalid-config"}, {"message", e.what()}});
        return {2, {"error.json"}, e.what()};
    }
}

}  // namespace stairwind::lab
