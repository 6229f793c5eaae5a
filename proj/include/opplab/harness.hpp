#ifndef OPPLAB_HARNESS_HPP
#define OPPLAB_HARNESS_HPP

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "calibrate.hpp"
#include "calibration.hpp"
#include "diophantine.hpp"
#include "errors.hpp"
#include "forms.hpp"
#include "lattice.hpp"
#include "orbit.hpp"
#include "parallel.hpp"
#include "shell.hpp"
#include "solver.hpp"
#include "theta.hpp"

#ifndef OPPLAB_VERSION
#define OPPLAB_VERSION "1.0.0"
#endif

namespace opplab {

using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitPrecondition = 2;
inline constexpr int kExitBudget = 3;

inline int exit_code_for(ErrorKind k) {
    switch (k) {
        case ErrorKind::precondition: return kExitPrecondition;
        case ErrorKind::budget: return kExitBudget;
        default: return kExitInternal;
    }
}

struct ExperimentConfig {
    std::string command;
    std::string subcommand;
    json form;  // path string, inline form object, or null
    json params = json::object();
    std::uint64_t seed = 1;
    std::uint64_t budget = 0;  // 0 = command default
    unsigned threads = 0;
    std::string out;
    std::string calibration;

    json to_json() const {
        return {{"command", command}, {"subcommand", subcommand}, {"form", form},       {"params", params},
                {"seed", seed},       {"budget", budget},         {"threads", threads}, {"out", out},
                {"calibration", calibration}};
    }

    static ExperimentConfig from_json(const json& j) {
        if (!j.is_object()) throw ParseError("config must be a JSON object");
        if (!j.contains("command") || !j["command"].is_string()) throw ParseError("config needs a string \"command\"");
        ExperimentConfig c;
        try {
            c.command = j["command"].get<std::string>();
            c.subcommand = j.value("subcommand", std::string());
            c.form = j.contains("form") ? j["form"] : json();
            c.params = j.contains("params") ? j["params"] : json::object();
            if (!c.params.is_object()) throw ParseError("params must be an object");
            c.seed = j.value("seed", std::uint64_t{1});
            c.budget = j.value("budget", std::uint64_t{0});
            c.threads = j.value("threads", 0u);
            c.out = j.value("out", std::string());
            c.calibration = j.value("calibration", std::string());
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad config field: ") + e.what());
        }
        return c;
    }
};

struct RunRecord {
    json config;
    json results;
    double runtime_ms = 0.0;
    json versions;
    std::string status = "ok";
    int exit_code = 0;
    json error;

    json to_json() const {
        json j = {{"config", config}, {"results", results},   {"runtime_ms", runtime_ms},
                  {"versions", versions}, {"status", status}, {"exit_code", exit_code}};
        if (!error.is_null()) j["error"] = error;
        return j;
    }
};

namespace detail {

// CLI values arrive as strings; plain floats first, then form literals like sqrt(2).
inline double number_from_string(const std::string& s) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (!s.empty() && end == s.c_str() + s.size()) return v;
    return parse_scalar(json(s)).value;
}

struct Params {
    const json& j;

    bool has(const char* k) const { return j.contains(k) && !j[k].is_null(); }
    double num(const char* k, double def) const { return has(k) ? get_num(k) : def; }
    double num(const char* k) const {
        if (!has(k)) throw InvalidArgument(std::string("missing parameter '") + k + "'");
        return get_num(k);
    }
    double get_num(const char* k) const {
        const json& v = j[k];
        if (v.is_number()) return v.get<double>();
        if (v.is_string()) return number_from_string(v.get<std::string>());
        throw InvalidArgument(std::string("parameter '") + k + "' must be a number");
    }
    std::int64_t integer(const char* k, std::int64_t def) const {
        double v = num(k, static_cast<double>(def));
        if (v != std::floor(v)) throw InvalidArgument(std::string("parameter '") + k + "' must be an integer");
        return static_cast<std::int64_t>(v);
    }
    std::string str(const char* k, const std::string& def) const {
        if (!has(k)) return def;
        if (!j[k].is_string()) throw InvalidArgument(std::string("parameter '") + k + "' must be a string");
        return j[k].get<std::string>();
    }
    bool flag(const char* k) const { return has(k) && j[k].is_boolean() && j[k].get<bool>(); }
    std::vector<double> list(const char* k) const {
        std::vector<double> out;
        if (!has(k)) return out;
        const json& v = j[k];
        if (v.is_array()) {
            for (const auto& x : v) out.push_back(x.is_string() ? number_from_string(x.get<std::string>()) : x.get<double>());
        } else if (v.is_string()) {
            std::stringstream ss(v.get<std::string>());
            std::string item;
            while (std::getline(ss, item, ','))
                if (!item.empty()) out.push_back(number_from_string(item));
        } else if (v.is_number()) {
            out.push_back(v.get<double>());
        } else {
            throw InvalidArgument(std::string("parameter '") + k + "' must be a list");
        }
        return out;
    }
};

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw ParseError("malformed JSON in " + path + ": " + e.what());
    }
}

inline QuadForm resolve_form(const ExperimentConfig& c) {
    if (c.form.is_string()) return load_form(c.form.get<std::string>());
    if (c.form.is_object()) return form_from_json(c.form);
    throw InvalidArgument("command '" + c.command + "' needs --form");
}

inline json vec_json(const IVec& v) { return std::vector<std::int64_t>(v.data(), v.data() + v.size()); }

inline json cert_json(const SolutionCert& c) {
    json j = {{"m", vec_json(c.m)},       {"value", c.value},           {"size", c.size},     {"norm", c.norm},
              {"method", c.method},       {"bound_eval", c.bound_eval}, {"epsilon", c.epsilon}, {"nodes", c.nodes},
              {"fallback", c.fallback}};
    if (c.method == "resonant" || c.fallback) {
        j["t0"] = c.t0;
        j["alpha_d"] = c.alpha_d;
        j["gamma"] = c.gamma;
        j["sublattice_det"] = c.sublattice_det;
        j["bd_bound"] = c.bd_bound;
        j["radius2"] = c.radius2;
        if (c.partner.size()) j["partner"] = vec_json(c.partner);
    }
    return j;
}

inline ShellSpec shell_spec(const ExperimentConfig& c, const Params& p) {
    ShellSpec s;
    s.form = resolve_form(c);
    if (p.has("shift")) {
        auto sh = p.list("shift");
        require(static_cast<int>(sh.size()) == s.form.dim, "shift must have the form's dimension");
        s.form = with_shift(s.form, Eigen::Map<Vec>(sh.data(), s.form.dim));
    }
    s.a = p.num("a");
    s.b = p.num("b");
    s.r = p.num("r");
    s.c0 = p.num("c0", s.c0);
    return s;
}

inline VolumeMethod volume_method(const std::string& m) {
    if (m == "quad" || m == "quadrature") return VolumeMethod::quadrature;
    if (m == "mc" || m == "montecarlo") return VolumeMethod::montecarlo;
    if (m == "auto" || m == "automatic") return VolumeMethod::automatic;
    throw InvalidArgument("unknown volume method '" + m + "'");
}

inline std::uint64_t or_default(std::uint64_t b, std::uint64_t def) { return b == 0 ? def : b; }

inline json run_lat(const ExperimentConfig& c, const Params& p) {
    if (!p.has("basis")) throw InvalidArgument("lat needs --basis");
    LatticeBasis basis = basis_from_json(read_json_file(p.str("basis", "")));
    const std::uint64_t budget = or_default(c.budget, kDefaultEnumBudget);
    const std::string sub = c.subcommand.empty() ? "minima" : c.subcommand;
    if (sub == "minima") {
        auto mp = successive_minima(basis, nullptr, budget);
        json w = json::array();
        for (const auto& x : mp.witnesses) w.push_back(vec_json(x));
        return {{"minima", mp.minima}, {"witnesses", w}, {"nodes", mp.nodes}, {"det", basis.det_lattice}};
    }
    if (sub == "alpha") {
        std::string mode = p.str("mode", "surrogate");
        AlphaMode m = mode == "exact" || mode == "exact-small" ? AlphaMode::exact_small : AlphaMode::minima_surrogate;
        if (m == AlphaMode::minima_surrogate && mode != "surrogate" && mode != "minima-surrogate")
            throw InvalidArgument("unknown alpha mode '" + mode + "'");
        auto a = alpha_profile(basis, m, budget);
        return {{"alpha", a.alpha}, {"alpha_max", a.alpha_max}, {"argmax", a.argmax}, {"mode", to_string(a.mode)}};
    }
    if (sub == "dual") {
        LatticeBasis d = dual_lattice(basis);
        return {{"dual", basis_to_json(d)}, {"det", d.det_lattice}};
    }
    if (sub == "count") return {{"mu", p.num("mu")}, {"count", count_in_ball(basis, p.num("mu"), budget, c.threads)}};
    if (sub == "lll") {
        auto r = lll_reduce(basis, p.num("delta", 0.99));
        return {{"reduced", basis_to_json(r.basis)}, {"path", r.path}};
    }
    throw InvalidArgument("unknown lat subcommand '" + sub + "'");
}

inline json run_orbit(const ExperimentConfig& c, const Params& p) {
    const std::string sub = c.subcommand.empty() ? "gamma" : c.subcommand;
    if (sub == "gamma") {
        QuadForm f = resolve_form(c);
        auto g = gamma_scan(f, p.num("r"), p.num("tmin", 0.5), p.num("tmax", 2.0), p.num("beta", 0.45),
                            static_cast<int>(p.integer("grid", 256)), static_cast<int>(p.integer("refine", 12)),
                            or_default(c.budget, kDefaultEnumBudget), c.threads);
        return {{"gamma", g.gamma}, {"argmax_t", g.argmax_t}, {"alpha_max", g.alpha_max}, {"resolution", g.resolution},
                {"grid_points", g.grid.size()}};
    }
    if (sub == "tau") {
        double lam = p.num("lambda"), a = p.num("a");
        return {{"lambda", lam}, {"a", a}, {"tau", tau_hat(lam, a)}, {"c_lambda", c_lambda(lam)}};
    }
    if (sub == "gm") {
        const int d = static_cast<int>(p.integer("d", 2));
        auto a = p.list("a");
        if (a.empty()) a = {2, 4, 8, 16, 32};
        auto fit = gm_slope_check(LatticeBasis::from_generators(Mat::Identity(2 * d, 2 * d)), p.num("beta", 1.2), a,
                                  static_cast<int>(p.integer("quad_n", 64)));
        return {{"slope", fit.slope}, {"intercept", fit.intercept}, {"a", fit.a}, {"average", fit.average}};
    }
    throw InvalidArgument("unknown orbit subcommand '" + sub + "'");
}

inline json run_dio(const ExperimentConfig& c, const Params& p) {
    const std::string sub = c.subcommand.empty() ? "min" : c.subcommand;
    if (sub == "min") {
        Mat A;
        if (p.has("A") && p.j["A"].is_string()) {
            json m = read_json_file(p.str("A", ""));
            if (m.is_object() && m.contains("matrix")) m = m["matrix"];
            if (!m.is_array() || m.empty() || !m[0].is_array()) throw ParseError("A must be a JSON array of rows");
            A.resize(static_cast<int>(m.size()), static_cast<int>(m[0].size()));
            for (std::size_t i = 0; i < m.size(); ++i) {
                if (m[i].size() != m[0].size()) throw ParseError("A rows must share one length");
                for (std::size_t k = 0; k < m[i].size(); ++k) A(static_cast<int>(i), static_cast<int>(k)) = parse_scalar(m[i][k]).value;
            }
        } else {
            QuadForm f = resolve_form(c);
            A = p.num("t", 1.0) * f.matrix;
        }
        auto r = dio_min(A, p.integer("R", 1000), c.threads);
        json M = json::array();
        for (int i = 0; i < r.best_M.rows(); ++i) {
            json row = json::array();
            for (int k = 0; k < r.best_M.cols(); ++k) row.push_back(r.best_M(i, k));
            M.push_back(row);
        }
        return {{"best_m", r.best_m}, {"best_M", M}, {"delta", r.delta}, {"R", r.R}};
    }
    if (sub == "type") {
        QuadForm f = resolve_form(c);
        auto t = dio_type_fit(f, p.integer("rmax", 4096), c.threads);
        return {{"kappa_hat", t.kappa_hat}, {"A_hat", t.A_hat}, {"fit_range", {t.R_min, t.R_max}}, {"in_range", t.in_range},
                {"record_m", t.record_m},   {"record_delta", t.record_delta}, {"residuals", t.residuals},
                {"grid_resolution", t.grid_resolution}};
    }
    if (sub == "rho") {
        QuadForm f = resolve_form(c);
        auto rep = rho_eval(f, p.num("r"), p.num("width", 1.0), p.num("beta", 0.45), static_cast<int>(p.integer("grid", 12)),
                            static_cast<int>(p.integer("gamma_grid", 64)), c.threads);
        json grid = json::array();
        for (const auto& g : rep.grid)
            grid.push_back({{"T_minus", g.T_minus}, {"T_plus", g.T_plus}, {"gamma", g.gamma}, {"gamma_term", g.gamma_term},
                            {"c_term", g.c_term}, {"value", g.value}});
        return {{"rho", rep.rho}, {"argmin_T_minus", rep.argmin_T_minus}, {"varsigma", rep.varsigma}, {"c_Q", rep.c_Q},
                {"b_minus_a", rep.b_minus_a}, {"beta", rep.beta}, {"r", rep.r}, {"grid", grid}};
    }
    throw InvalidArgument("unknown dio subcommand '" + sub + "'");
}

inline json dispatch(const ExperimentConfig& c) {
    const Params p{c.params};
    const std::string& cmd = c.command;
    if (cmd == "count") {
        auto s = shell_spec(c, p);
        auto r = count_shell(s, or_default(c.budget, kDefaultCountBudget), c.threads);
        return {{"count_lo", r.count_lo}, {"count_hi", r.count_hi}, {"work", r.work}, {"admissible", s.admissible()}};
    }
    if (cmd == "volume") {
        auto s = shell_spec(c, p);
        auto v = shell_volume(s, volume_method(p.str("method", "auto")), or_default(c.budget, 10000000), c.seed, c.threads);
        return {{"volume", v.volume}, {"ci", v.ci}, {"method", v.method}, {"samples", v.samples}};
    }
    if (cmd == "delta") {
        auto s = shell_spec(c, p);
        auto r = relative_remainder(s, volume_method(p.str("method", "auto")),
                                    static_cast<std::uint64_t>(p.num("volume_budget", 10000000)), c.seed,
                                    or_default(c.budget, kDefaultCountBudget), c.threads);
        return {{"count_lo", r.count_lo}, {"count_hi", r.count_hi}, {"volume", r.volume}, {"ci", r.volume_ci},
                {"delta", r.delta},       {"volume_method", r.volume_method}};
    }
    if (cmd == "theta") {
        QuadForm f = resolve_form(c);
        auto vv = p.list("v");
        Vec v = vv.empty() ? Vec::Zero(f.dim) : Vec(Eigen::Map<Vec>(vv.data(), static_cast<Eigen::Index>(vv.size())));
        const double r = p.num("r"), t = p.num("t");
        auto th = theta_sum(f, r, t, v, p.num("tol", 1e-16), or_default(c.budget, kDefaultThetaBudget), c.threads);
        json out = {{"re", th.value.real()}, {"im", th.value.imag()}, {"abs", std::abs(th.value)},
                    {"truncation_bound", th.truncation_bound}, {"terms", th.terms}, {"method", th.method}};
        if (p.flag("integral")) {
            cplx ti = theta_integral(f, r, t, v);
            out["integral"] = {{"re", ti.real()}, {"im", ti.imag()}};
        }
        if (p.has("poisson_terms"))
            out["poisson_residual"] = poisson_residual(f, r, t, v, static_cast<int>(p.integer("poisson_terms", 5)));
        return out;
    }
    if (cmd == "psi") {
        QuadForm f = resolve_form(c);
        auto s = psi_majorant(f, p.num("r"), p.num("t"), p.num("tol", 1e-14), or_default(c.budget, kDefaultThetaBudget), c.threads);
        return {{"value", s.value}, {"truncation_bound", s.truncation_bound}, {"terms", s.terms}, {"method", s.method}};
    }
    if (cmd == "lat") return run_lat(c, p);
    if (cmd == "orbit") return run_orbit(c, p);
    if (cmd == "dio") return run_dio(c, p);
    if (cmd == "solve") {
        QuadForm f = resolve_form(c);
        const double eps = p.num("eps");
        const std::string method = p.str("method", "enumeration");
        const std::uint64_t budget = or_default(c.budget, kDefaultEnumBudget);
        if (method == "enumeration") {
            // the radius doubling stops at the first hit, so a generous cap is cheap
            double cap = p.num("size_cap", f.dim >= 5 ? std::max(1e6, size_bound_formula(f)) : 1e6);
            return cert_json(find_small_solution(f, eps, cap, budget, c.threads));
        }
        if (method == "resonant") {
            ResonantOptions o;
            o.epsilon = eps;
            o.budget = budget;
            o.threads = c.threads;
            o.fallback = !p.flag("no_fallback");
            o.grid_n = static_cast<int>(p.integer("grid", 64));
            return cert_json(resonant_solution(f, p.num("rcap", 64), p.num("tmin", 0.5), p.num("tmax", 2.0), p.num("beta", 0.45), o));
        }
        throw InvalidArgument("unknown solve method '" + method + "'");
    }
    if (cmd == "gaps") {
        QuadForm f = resolve_form(c);
        auto g = value_gaps(f, p.num("r"), p.num("c0", 0.25), or_default(c.budget, 2000000000ULL));
        json out = {{"r", g.r}, {"c0", g.c0}, {"window", {g.lo, g.hi}}, {"d_r", g.d_r}, {"n_values", g.values.size()}};
        if (p.flag("values")) out["values"] = g.values;
        return out;
    }
    if (cmd == "bounds") {
        QuadForm f = resolve_form(c);
        TheoremConstants k;
        k.eta = p.num("eta", k.eta);
        k.kappa = p.num("kappa", k.kappa);
        k.delta = p.num("delta", k.delta);
        k.beta = p.num("beta", k.beta);
        const double eps = p.num("eps");
        std::optional<SolutionCert> cert;
        try {
            cert = find_small_solution(f, eps, size_bound_formula(f, k.eta), or_default(c.budget, kDefaultEnumBudget), c.threads);
        } catch (const NotFoundWithinCap&) {
        }
        auto b = bound_report(f, eps, k, cert);
        json out = {{"d", b.d},       {"size_exponent", b.size_exponent}, {"size_bound", b.size_bound},
                    {"norm_bound", b.norm_bound}, {"nu0", b.nu0}, {"nu1", b.nu1}, {"nu2", b.nu2}, {"hermite", b.hermite},
                    {"actual_size", b.actual_size ? json(*b.actual_size) : json()}, {"ratio", b.ratio ? json(*b.ratio) : json()}};
        if (cert) out["certificate"] = cert_json(*cert);
        return out;
    }
    if (cmd == "calibrate") {
        json cal = run_calibration(c.seed);
        if (p.has("write")) {
            std::ofstream o(p.str("write", ""));
            if (!o) throw InvalidArgument("cannot write " + p.str("write", ""));
            o << cal.dump(2) << "\n";
        }
        return cal;
    }
    throw InvalidArgument("unknown command '" + cmd + "'");
}

inline json versions(const ExperimentConfig& c) {
    json v = {{"artifact", OPPLAB_VERSION}, {"calibration", nullptr}};
    try {
        v["calibration"] = Calibration::load(c.calibration.empty() ? calibration_path() : c.calibration).version;
    } catch (const CalibrationMissing&) {
    }
    return v;
}

}  // namespace detail

// Executes one config; errors are captured into the record with their exit code.
inline RunRecord run(const ExperimentConfig& config) {
    RunRecord rec;
    rec.config = config.to_json();
    rec.versions = detail::versions(config);
    auto t0 = std::chrono::steady_clock::now();
    try {
        rec.results = detail::dispatch(config);
    } catch (const Error& e) {
        rec.status = "error";
        rec.exit_code = exit_code_for(e.kind());
        rec.error = {{"kind", e.name()}, {"message", e.what()}};
    } catch (const json::exception& e) {
        rec.status = "error";
        rec.exit_code = kExitPrecondition;
        rec.error = {{"kind", "ParseError"}, {"message", e.what()}};
    } catch (const std::exception& e) {
        rec.status = "error";
        rec.exit_code = kExitInternal;
        rec.error = {{"kind", "internal"}, {"message", e.what()}};
    }
    rec.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (rec.results.is_null()) rec.results = json::object();
    return rec;
}

inline const std::vector<std::string>& suite_columns() {
    static const std::vector<std::string> cols = {"index", "command", "status", "exit_code", "count_lo", "volume",
                                                  "delta", "gamma", "rho", "d_r", "cert_size", "runtime_ms"};
    return cols;
}

namespace detail {

inline std::string csv_field(const json& results, const char* key) {
    if (!results.is_object() || !results.contains(key) || results[key].is_null()) return "";
    const json& v = results[key];
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_number()) {
        std::ostringstream os;
        os.precision(17);
        os << v.get<double>();
        return os.str();
    }
    return "";
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
}

}  // namespace detail

// One CSV row per config; failed runs are marked in the status column.
inline std::string suite(const std::vector<ExperimentConfig>& manifest, bool parallel = false, std::vector<RunRecord>* records = nullptr) {
    require(!manifest.empty(), "suite manifest is empty");
    std::vector<RunRecord> recs(manifest.size());
    parallel_for(static_cast<std::int64_t>(manifest.size()), parallel ? 0u : 1u,
                 [&](std::int64_t i) { recs[static_cast<std::size_t>(i)] = run(manifest[static_cast<std::size_t>(i)]); });
    std::ostringstream os;
    const auto& cols = suite_columns();
    for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
    os << "\n";
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const RunRecord& r = recs[i];
        const json& res = r.results;
        std::string cmd = manifest[i].command + (manifest[i].subcommand.empty() ? "" : " " + manifest[i].subcommand);
        std::string cert = res.contains("size") ? detail::csv_field(res, "size") : "";
        if (cert.empty() && res.contains("certificate")) cert = detail::csv_field(res["certificate"], "size");
        std::ostringstream rt;
        rt.precision(6);
        rt << r.runtime_ms;
        os << i << "," << detail::csv_quote(cmd) << "," << r.status << "," << r.exit_code << "," << detail::csv_field(res, "count_lo")
           << "," << detail::csv_field(res, "volume") << "," << detail::csv_field(res, "delta") << ","
           << detail::csv_field(res, "gamma") << "," << detail::csv_field(res, "rho") << "," << detail::csv_field(res, "d_r")
           << "," << cert << "," << rt.str() << "\n";
    }
    if (records) *records = std::move(recs);
    return os.str();
}

inline std::vector<ExperimentConfig> load_manifest(const json& j) {
    const json& arr = j.is_object() && j.contains("runs") ? j["runs"] : j;
    if (!arr.is_array()) throw ParseError("manifest must be an array of configs or {\"runs\": [...]}");
    std::vector<ExperimentConfig> out;
    for (const auto& c : arr) out.push_back(ExperimentConfig::from_json(c));
    return out;
}

}  // namespace opplab

#endif
