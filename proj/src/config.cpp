#include "escaise/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

namespace escaise::config {

namespace {

const std::vector<std::string> kEscKeys{"k_g", "k_esc", "omega_esc", "a_esc", "omega_l", "omega_h", "u0"};
const std::vector<std::string> kAiseKeys{"n_e",     "n_f",   "r_z",   "r_d",   "r_theta", "r_inf", "eta_vrf",
                                         "tau_n",   "tau_d", "alpha", "eta_l", "eta_u",   "beta"};
const std::vector<std::string> kAbsKeys{"m", "j_w", "r", "b_f", "g", "lambda_star", "mu_star", "c",
                                        "nu_eps", "nu0", "omega0"};
const std::vector<std::string> kTopNumeric{"t_s", "horizon", "max_time", "k_init", "k_end", "u_opt"};
const std::set<std::string> kTopKeys{"format_version", "example", "modes", "trials", "seed", "esc", "aise",
                                     "abs", "noise", "t_s", "horizon", "max_time", "k_init", "k_end", "u_opt"};

bool contains(const std::vector<std::string>& v, const std::string& s)
{
    return std::find(v.begin(), v.end(), s) != v.end();
}

[[noreturn]] void fail(const std::string& key, const std::string& what)
{
    throw ConfigError("config key '" + key + "': " + what);
}

double factor(std::string tok, const std::string& key)
{
    tok.erase(std::remove_if(tok.begin(), tok.end(), [](unsigned char c) { return std::isspace(c); }), tok.end());
    if (tok == "pi") {
        return std::numbers::pi;
    }
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used == tok.size()) {
            return v;
        }
    } catch (const std::exception&) {
    }
    fail(key, "cannot read '" + tok + "' as a number");
}

void check_keys(const nlohmann::json& obj, const std::vector<std::string>& allowed, const std::string& section)
{
    if (!obj.is_object()) {
        fail(section, "expected an object");
    }
    for (const auto& [k, _] : obj.items()) {
        if (!contains(allowed, k)) {
            fail(section + "." + k, "unknown key");
        }
    }
    for (const auto& k : allowed) {
        if (!obj.contains(k)) {
            fail(section + "." + k, "missing");
        }
    }
}

int as_int(const nlohmann::json& v, const std::string& key)
{
    const double x = eval_number(v, key);
    if (x != std::floor(x) || std::fabs(x) > 2e9) {
        fail(key, "expected an integer");
    }
    return static_cast<int>(x);
}

long as_long(const nlohmann::json& v, const std::string& key)
{
    const double x = eval_number(v, key);
    if (x != std::floor(x)) {
        fail(key, "expected an integer");
    }
    return static_cast<long>(x);
}

}  // namespace

double eval_number(const nlohmann::json& value, const std::string& key)
{
    if (value.is_number()) {
        return value.get<double>();
    }
    if (!value.is_string()) {
        fail(key, "expected a number");
    }
    const std::string s = value.get<std::string>();
    double acc = 1.0;
    char op = '*';
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == '*' || s[i] == '/') {
            const double f = factor(s.substr(start, i - start), key);
            acc = op == '*' ? acc * f : acc / f;
            if (i < s.size()) op = s[i];
            start = i + 1;
        }
    }
    if (!std::isfinite(acc)) {
        fail(key, "value is not finite");
    }
    return acc;
}

esc::GradientPath parse_mode(const std::string& name)
{
    if (name == "esc") return esc::GradientPath::HighPass;
    if (name == "esc-aise") return esc::GradientPath::Aise;
    fail("modes", "unknown mode '" + name + "' (expected esc or esc-aise)");
}

Experiment parse(const nlohmann::json& doc)
{
    if (!doc.is_object()) {
        fail("<root>", "expected an object");
    }
    for (const auto& [k, _] : doc.items()) {
        if (!kTopKeys.contains(k)) {
            fail(k, "unknown key");
        }
    }
    for (const char* k : {"format_version", "example", "t_s", "esc", "aise", "k_init", "u_opt"}) {
        if (!doc.contains(k)) {
            fail(k, "missing");
        }
    }
    if (as_int(doc["format_version"], "format_version") != 1) {
        fail("format_version", "unsupported version");
    }

    Experiment exp;
    exp.source = doc;
    if (!doc["example"].is_string()) {
        fail("example", "expected a string");
    }
    exp.example = doc["example"].get<std::string>();
    auto& run = exp.run;
    if (exp.example == "quadratic") {
        run.plant = harness::PlantKind::Quadratic;
    } else if (exp.example == "abs") {
        run.plant = harness::PlantKind::Abs;
    } else {
        fail("example", "expected quadratic or abs");
    }

    const double t_s = eval_number(doc["t_s"], "t_s");

    const auto& e = doc["esc"];
    check_keys(e, kEscKeys, "esc");
    run.esc.t_s = t_s;
    run.esc.k_g = eval_number(e["k_g"], "esc.k_g");
    run.esc.k_esc = eval_number(e["k_esc"], "esc.k_esc");
    run.esc.omega_esc = eval_number(e["omega_esc"], "esc.omega_esc");
    run.esc.a_esc = eval_number(e["a_esc"], "esc.a_esc");
    run.esc.omega_l = eval_number(e["omega_l"], "esc.omega_l");
    run.esc.omega_h = eval_number(e["omega_h"], "esc.omega_h");
    run.esc.u0 = eval_number(e["u0"], "esc.u0");

    const auto& a = doc["aise"];
    check_keys(a, kAiseKeys, "aise");
    run.aise.t_s = t_s;
    run.aise.n_e = as_int(a["n_e"], "aise.n_e");
    run.aise.n_f = as_int(a["n_f"], "aise.n_f");
    run.aise.r_z = eval_number(a["r_z"], "aise.r_z");
    run.aise.r_d = eval_number(a["r_d"], "aise.r_d");
    run.aise.r_theta = eval_number(a["r_theta"], "aise.r_theta");
    run.aise.r_inf = eval_number(a["r_inf"], "aise.r_inf");
    run.aise.eta_vrf = eval_number(a["eta_vrf"], "aise.eta_vrf");
    run.aise.tau_n = as_int(a["tau_n"], "aise.tau_n");
    run.aise.tau_d = as_int(a["tau_d"], "aise.tau_d");
    run.aise.alpha = eval_number(a["alpha"], "aise.alpha");
    run.aise.eta_l = eval_number(a["eta_l"], "aise.eta_l");
    run.aise.eta_u = eval_number(a["eta_u"], "aise.eta_u");
    run.aise.beta = eval_number(a["beta"], "aise.beta");

    if (run.plant == harness::PlantKind::Abs) {
        if (!doc.contains("abs")) {
            fail("abs", "missing");
        }
        const auto& p = doc["abs"];
        check_keys(p, kAbsKeys, "abs");
        run.abs.m = eval_number(p["m"], "abs.m");
        run.abs.j_w = eval_number(p["j_w"], "abs.j_w");
        run.abs.r = eval_number(p["r"], "abs.r");
        run.abs.b_f = eval_number(p["b_f"], "abs.b_f");
        run.abs.g = eval_number(p["g"], "abs.g");
        run.abs.lambda_star = eval_number(p["lambda_star"], "abs.lambda_star");
        run.abs.mu_star = eval_number(p["mu_star"], "abs.mu_star");
        run.abs.c = eval_number(p["c"], "abs.c");
        run.abs.nu_eps = eval_number(p["nu_eps"], "abs.nu_eps");
        run.abs_initial = {eval_number(p["nu0"], "abs.nu0"), eval_number(p["omega0"], "abs.omega0"), 0.0};
        run.max_time = doc.contains("max_time") ? eval_number(doc["max_time"], "max_time") : 50.0;
        if (doc.contains("horizon")) {
            fail("horizon", "not used by the abs example (use max_time)");
        }
    } else {
        if (doc.contains("abs")) {
            fail("abs", "only valid for the abs example");
        }
        if (doc.contains("max_time")) {
            fail("max_time", "only valid for the abs example");
        }
        if (!doc.contains("horizon")) {
            fail("horizon", "missing");
        }
        run.horizon = as_long(doc["horizon"], "horizon");
    }
    run.k_init = as_long(doc["k_init"], "k_init");
    run.k_end = doc.contains("k_end") ? as_long(doc["k_end"], "k_end") : run.last_step();
    run.u_opt = eval_number(doc["u_opt"], "u_opt");

    if (doc.contains("noise") && !doc["noise"].is_null()) {
        const auto& n = doc["noise"];
        if (!n.is_array()) {
            fail("noise", "expected an array of {k_start, sigma}");
        }
        std::vector<noise::Segment> segs;
        for (std::size_t i = 0; i < n.size(); ++i) {
            const std::string key = "noise[" + std::to_string(i) + "]";
            check_keys(n[i], {"k_start", "sigma"}, key);
            segs.push_back({as_long(n[i]["k_start"], key + ".k_start"), eval_number(n[i]["sigma"], key + ".sigma")});
        }
        try {
            run.noise = noise::Schedule(std::move(segs));
        } catch (const std::invalid_argument& ex) {
            fail("noise", ex.what());
        }
    }

    if (doc.contains("modes")) {
        if (!doc["modes"].is_array() || doc["modes"].empty()) {
            fail("modes", "expected a non-empty array");
        }
        for (const auto& m : doc["modes"]) {
            if (!m.is_string()) fail("modes", "expected strings");
            exp.modes.push_back(parse_mode(m.get<std::string>()));
        }
    } else {
        exp.modes = {esc::GradientPath::HighPass, esc::GradientPath::Aise};
    }
    exp.trials = doc.contains("trials") ? as_int(doc["trials"], "trials") : 1;
    if (exp.trials < 1) {
        fail("trials", "must be >= 1");
    }
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned()) fail("seed", "expected a non-negative integer");
        exp.seed = doc["seed"].get<std::uint64_t>();
    }

    for (auto mode : exp.modes) {
        try {
            for_mode(exp, mode).validate();
        } catch (const std::invalid_argument& ex) {
            throw ConfigError(std::string("invalid configuration: ") + ex.what());
        }
    }
    return exp;
}

harness::RunConfig for_mode(const Experiment& exp, esc::GradientPath mode)
{
    harness::RunConfig run = exp.run;
    run.esc.mode = mode;
    return run;
}

nlohmann::json load_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string section_of(const std::string& param)
{
    if (contains(kEscKeys, param)) return "esc";
    if (contains(kAiseKeys, param)) return "aise";
    if (contains(kAbsKeys, param)) return "abs";
    if (contains(kTopNumeric, param)) return "";
    throw ConfigError("unknown parameter '" + param + "'");
}

void set_param(nlohmann::json& doc, const std::string& param, double value)
{
    const std::string section = section_of(param);
    if (section.empty()) {
        doc[param] = value;
    } else {
        if (!doc.contains(section)) {
            throw ConfigError("parameter '" + param + "' needs a '" + section + "' section");
        }
        doc[section][param] = value;
    }
}

}  // namespace escaise::config
