#pragma once

#include <charconv>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bubbles.hpp"
#include "common.hpp"
#include "kernel.hpp"
#include "manifold.hpp"
#include "solver.hpp"
#include "sobolev.hpp"

namespace fracsob {

using Json = nlohmann::ordered_json;

// Config parsing ---------------------------------------------------------------------------

template <class T>
T json_get(const Json& j, const char* key, const T& fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

template <class T>
T json_require(const Json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("config key '") + key + "' is required");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

inline ManifoldDesc parse_manifold(const Json& j) {
    if (!j.is_object()) throw ConfigError("config key 'manifold' must be an object");
    ManifoldDesc d;
    d.kind = parse_manifold_kind(json_require<std::string>(j, "kind"));
    d.dim = json_get<int>(j, "dim", d.kind == ManifoldKind::circle ? 1 : 2);
    d.scale = json_get<double>(j, "scale", 1.0);
    d.validate();
    return d;
}

inline Point parse_point(const Json& j) {
    if (!j.is_array() || j.empty() || j.size() > 2) throw ConfigError("a point must be an array of 1 or 2 numbers");
    return {j.at(0).get<double>(), j.size() > 1 ? j.at(1).get<double>() : 0.0};
}

/// {"kind": "pure"|"tail", "s", "p", "alpha", "lambda"}; n comes from the manifold.
inline KernelSpec parse_kernel(const Json& j, int n) {
    if (!j.is_object()) throw ConfigError("config key 'kernel' must be an object");
    const FracParams fp(n, json_require<double>(j, "s"), json_get<double>(j, "p", 2.0));
    const auto kind = parse_kernel_kind(json_get<std::string>(j, "kind", "pure"));
    const double lambda = json_get<double>(j, "lambda", 2.0);
    switch (kind) {
        case KernelKind::pure_fractional: return KernelSpec::pure(fp, lambda);
        case KernelKind::fractional_plus_tail: return KernelSpec::tail(fp, json_require<double>(j, "alpha"), lambda);
        case KernelKind::custom: break;
    }
    throw ConfigError("custom kernels cannot be given in a config file");
}

/// Potential or weight on a grid: constant {value}, samples {values}, or fourier {c0, modes}.
/// A fourier mode {"k": [kx, ky], "cos": a, "sin": b} adds a cos(2 pi k.x / L) + b sin(2 pi k.x / L).
inline DiscreteFunction parse_field(const Json& j, const GridPtr& grid) {
    if (j.is_number()) return DiscreteFunction::constant(grid, j.get<double>());
    if (!j.is_object()) throw ConfigError("a field must be a number or an object");
    const auto kind = json_require<std::string>(j, "kind");
    if (kind == "constant") return DiscreteFunction::constant(grid, json_require<double>(j, "value"));
    if (kind == "samples") {
        auto v = json_require<std::vector<double>>(j, "values");
        if (v.size() != grid->count())
            throw ConfigError("field samples: expected " + std::to_string(grid->count()) + " values, got " +
                              std::to_string(v.size()));
        return {grid, std::move(v)};
    }
    if (kind == "fourier") {
        const auto& m = grid->manifold;
        if (m.kind == ManifoldKind::sphere) throw ConfigError("fourier fields need a flat manifold or the circle");
        const double period = m.kind == ManifoldKind::circle ? 2.0 * kPi : m.scale;
        std::vector<double> v(grid->count(), json_get<double>(j, "c0", 0.0));
        for (const auto& mode : json_get<Json>(j, "modes", Json::array())) {
            const auto k = json_require<std::vector<int>>(mode, "k");
            if (k.empty() || k.size() > 2) throw ConfigError("fourier mode 'k' must have 1 or 2 entries");
            const double a = json_get<double>(mode, "cos", 0.0), b = json_get<double>(mode, "sin", 0.0);
            for (std::size_t i = 0; i < v.size(); ++i) {
                const auto& x = grid->points[i];
                const double ph = 2.0 * kPi * (k[0] * x[0] + (k.size() > 1 ? k[1] * x[1] : 0.0)) / period;
                v[i] += a * std::cos(ph) + b * std::sin(ph);
            }
        }
        return {grid, std::move(v)};
    }
    throw ConfigError("unsupported field kind: " + kind);
}

// JSON views of values and reports ---------------------------------------------------------

inline Json to_json(const ManifoldDesc& d) {
    return {{"kind", to_string(d.kind)}, {"dim", d.dim}, {"scale", d.scale}};
}

inline Json to_json(const FracParams& fp) {
    return {{"n", fp.n}, {"s", fp.s}, {"p", fp.p}, {"pstar", fp.n > fp.s * fp.p ? fp.pstar() : 0.0}};
}

inline Json to_json(const KernelSpec& k) {
    Json j{{"kind", to_string(k.kind)}, {"params", to_json(k.params)}, {"lambda", k.lambda_bound}};
    if (k.kind == KernelKind::fractional_plus_tail) j["alpha"] = k.alpha;
    return j;
}

inline Json to_json(const Grid& g, bool with_points = false) {
    Json j{{"manifold", to_json(g.manifold)},
           {"count", g.count()},
           {"lattice_resolution", g.lattice_res},
           {"spacing", g.spacing()},
           {"total_weight", g.total_weight()},
           {"volume", g.manifold.volume()}};
    if (with_points) {
        Json pts = Json::array();
        for (const auto& p : g.points) pts.push_back({p[0], p[1]});
        j["points"] = std::move(pts);
        j["weights"] = g.weights;
    }
    return j;
}

inline Json to_json(const K3Report& r) {
    return {{"inf", r.inf}, {"sup", r.sup}, {"lambda", r.lambda_bound}, {"d_min", r.d_min}, {"d_max", r.d_max},
            {"passes", r.passes}};
}

inline Json to_json(const K4Report& r) { return {{"eps", r.eps}, {"max_deviation", r.max_deviation}}; }

inline Json to_json(const EnergyReport& r) {
    return {{"seminorm_p", r.seminorm_p}, {"kernel_energy", r.kernel_energy}, {"lp_norm_p", r.lp_norm_p},
            {"resolution", r.resolution}, {"excluded_pairs", r.excluded_pairs}};
}

inline Json to_json(const LocalizedNormReport& r) {
    return {{"ratio", r.ratio}, {"ratio_lower", r.ratio_lower}, {"global_norm_p", r.global_norm_p},
            {"local_sum", r.local_sum}, {"jensen_rhs", r.jensen_rhs}, {"jensen_holds", r.jensen_holds()},
            {"charts", r.charts}};
}

inline Json to_json(const RichardsonFit& f) {
    return {{"limit", f.limit}, {"coefficient", f.coefficient}, {"order", f.order}, {"max_residual", f.max_residual}};
}

inline Json to_json(const RayleighReport& r) {
    Json levels = Json::array();
    for (const auto& l : r.levels)
        levels.push_back({{"resolution", l.resolution},
                          {"h", l.h},
                          {"seminorm_box", l.seminorm.box},
                          {"seminorm_coupling", l.seminorm.coupling},
                          {"seminorm_exterior", l.seminorm.exterior},
                          {"seminorm", l.seminorm.total()},
                          {"crit_norm", l.crit.total()},
                          {"rayleigh", l.rayleigh}});
    return {{"levels", std::move(levels)},       {"seminorm_fit", to_json(r.seminorm_fit)},
            {"seminorm", r.seminorm},            {"crit_norm", r.crit_norm},
            {"rayleigh", r.rayleigh},            {"kconst", r.kconst},
            {"richardson_change", r.richardson_change}};
}

inline Json to_json(const CoercivityReport& r) {
    return {{"c_est", r.c_est}, {"probes", r.probes}, {"skipped", r.skipped}, {"argmin", r.argmin}};
}

inline Json to_json(const SolveResult& r) {
    return {{"mu", r.mu},
            {"residual", r.residual},
            {"projected_gradient", r.projected_gradient},
            {"multiplier", r.multiplier},
            {"constraint_defect", r.constraint_defect},
            {"iterations", r.iterations},
            {"converged", r.converged}};
}

inline Json to_json(const StageReport& s) {
    return {{"q", s.q},         {"mu", s.mu},         {"gap", s.gap},
            {"holder", s.holder}, {"residual", s.residual}, {"iterations", s.iterations}};
}

inline Json to_json(const ConditionReport& r) {
    return {{"kconst", r.kconst},
            {"kinv", r.kinv},
            {"threshold", r.threshold},
            {"mu_constant", r.mu_constant},
            {"mu_continuation", std::isnan(r.mu_continuation) ? Json(nullptr) : Json(r.mu_continuation)},
            {"inf_JK_est", r.inf_JK_est},
            {"corollary_lhs", r.corollary_lhs},
            {"condition_holds", r.condition_holds},
            {"corollary_holds", r.corollary_holds}};
}

// Files ------------------------------------------------------------------------------------

/// Shortest representation that round-trips.
inline std::string format_number(double x) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

/// RFC-4180 CSV writer (CRLF line endings, quoted fields when needed).
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}

    void header(std::initializer_list<std::string> cols) {
        bool first = true;
        for (const auto& c : cols) {
            if (!first) os_ << ',';
            os_ << quote(c);
            first = false;
        }
        os_ << "\r\n";
    }

    void row(const std::vector<double>& vals) {
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (i) os_ << ',';
            if (!std::isnan(vals[i])) os_ << format_number(vals[i]);
        }
        os_ << "\r\n";
    }

    static std::string quote(const std::string& s) {
        if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c;
        }
        return out + '"';
    }

private:
    std::ostream& os_;
};

inline void write_json_file(const std::string& path, const Json& j) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path);
    os << j.dump(2) << '\n';
}

inline Json read_json_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read config file " + path);
    try {
        return Json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
}

}  // namespace fracsob
