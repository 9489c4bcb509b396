#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "escaise/config.hpp"
#include "escaise/harness.hpp"
#include "escaise/io.hpp"

namespace fs = std::filesystem;
using namespace escaise;

namespace {

constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string config_path;
    std::string example;
    std::vector<std::string> modes;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    bool no_noise = false;
    std::string out = ".";
    unsigned threads = 0;
};

void add_common(CLI::App* app, Common& c)
{
    app->add_option("--config", c.config_path, "JSON configuration file");
    app->add_option("--example", c.example, "Shipped parameter set")->check(CLI::IsMember({"quadratic", "abs"}));
    app->add_option("--mode", c.modes, "Controller variant(s)")->check(CLI::IsMember({"esc", "esc-aise"}));
    app->add_option("--set", c.sets, "Override a parameter, NAME=VALUE");
    app->add_option("--seed", c.seed, "Base seed");
    app->add_flag("--no-noise", c.no_noise, "Disable sensor noise");
    app->add_option("--out", c.out, "Output directory");
    app->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
}

std::string fmt(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct Loaded {
    config::Experiment exp;
    nlohmann::json overrides = nlohmann::json::object();
};

Loaded load(const Common& c, const std::map<std::string, double>& extra = {})
{
    nlohmann::json doc;
    if (!c.config_path.empty()) {
        doc = config::load_file(c.config_path);
    } else if (!c.example.empty()) {
        doc = config::builtin(c.example);
    } else {
        throw UsageError("one of --config or --example is required");
    }

    Loaded out;
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw UsageError("--set expects NAME=VALUE, got '" + s + "'");
        }
        const std::string name = s.substr(0, eq);
        const double value = config::eval_number(nlohmann::json(s.substr(eq + 1)), name);
        config::set_param(doc, name, value);
        out.overrides[name] = value;
    }
    for (const auto& [name, value] : extra) {
        config::set_param(doc, name, value);
        out.overrides[name] = value;
    }
    if (!c.modes.empty()) {
        doc["modes"] = c.modes;
        out.overrides["modes"] = c.modes;
    }
    if (c.seed) {
        doc["seed"] = *c.seed;
        out.overrides["seed"] = *c.seed;
    }
    if (c.no_noise) {
        doc["noise"] = nullptr;
        out.overrides["noise"] = nullptr;
    }
    out.exp = config::parse(doc);
    return out;
}

fs::path ensure_out(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
    }
    return fs::path(dir);
}

nlohmann::json provenance(const Loaded& l)
{
    return {{"config", l.exp.source}, {"overrides", l.overrides}};
}

int cmd_run(const Common& c)
{
    const Loaded l = load(c);
    const fs::path dir = ensure_out(c.out);
    nlohmann::json metrics = provenance(l);
    metrics["format_version"] = io::kFormatVersion;
    metrics["seed"] = l.exp.seed;
    metrics["runs"] = nlohmann::json::array();

    for (auto mode : l.exp.modes) {
        const auto traj = harness::run_closed_loop(config::for_mode(l.exp, mode), l.exp.seed);
        const fs::path csv =
            dir / (l.exp.example + "_" + io::mode_name(mode) + "_" + std::to_string(l.exp.seed) + ".csv");
        io::write_trajectory_csv(traj, csv);
        metrics["runs"].push_back(io::trajectory_metrics_json(traj));
        std::cout << io::mode_name(mode) << ": rmse=" << fmt(traj.rmse);
        if (traj.plant == harness::PlantKind::Abs) {
            std::cout << " t_stop=" << (traj.t_stop ? fmt(*traj.t_stop) + " s" : "none");
        }
        std::cout << "  -> " << csv.string() << '\n';
    }
    io::write_json(metrics, dir / "metrics.json");
    return 0;
}

void print_table(const config::Experiment& exp, const std::vector<std::pair<esc::GradientPath, harness::Aggregate>>& rows)
{
    const bool wheel = exp.run.plant == harness::PlantKind::Abs;
    std::printf("%-10s %14s", "Method", "Average RMSE");
    if (wheel) std::printf(" %16s %9s", "Average t_stop", "Stopped");
    std::printf(" %7s\n", "Failed");
    for (const auto& [mode, agg] : rows) {
        std::printf("%-10s %14.6g", io::mode_name(mode).c_str(), agg.mean_rmse);
        if (wheel) {
            if (agg.mean_t_stop) {
                std::printf(" %14.4g s", *agg.mean_t_stop);
            } else {
                std::printf(" %16s", "-");
            }
            std::printf(" %8.0f%%", 100.0 * agg.stopped_fraction);
        }
        std::printf(" %7d\n", agg.n_failed);
    }
}

int cmd_montecarlo(const Common& c, std::optional<int> trials)
{
    if (trials && *trials < 1) {
        throw UsageError("--trials must be >= 1");
    }
    Loaded l = load(c);
    const int n = trials.value_or(l.exp.trials);
    if (trials) l.overrides["trials"] = n;
    const fs::path dir = ensure_out(c.out);

    nlohmann::json out = provenance(l);
    out["format_version"] = io::kFormatVersion;
    out["seed"] = l.exp.seed;
    out["n_trials"] = n;
    out["modes"] = nlohmann::json::object();
    std::vector<std::pair<esc::GradientPath, harness::Aggregate>> rows;
    for (auto mode : l.exp.modes) {
        auto agg = harness::monte_carlo(config::for_mode(l.exp, mode), n, l.exp.seed, c.threads);
        out["modes"][io::mode_name(mode)] = io::aggregate_json(agg, l.exp.seed);
        rows.emplace_back(mode, std::move(agg));
    }
    print_table(l.exp, rows);
    const fs::path path = dir / (l.exp.example + "_montecarlo.json");
    io::write_json(out, path);
    std::cout << "-> " << path.string() << '\n';
    return 0;
}

int cmd_sweep(const Common& c, const std::string& param, const std::vector<std::string>& values,
              std::optional<int> trials)
{
    if (values.empty()) {
        throw UsageError("--values needs at least one value");
    }
    if (trials && *trials < 1) {
        throw UsageError("--trials must be >= 1");
    }
    const std::string section = config::section_of(param);

    std::vector<double> parsed;
    for (const auto& v : values) parsed.push_back(config::eval_number(nlohmann::json(v), "--values"));

    const Loaded probe = load(c, {{param, parsed.front()}});
    const auto& modes = probe.exp.modes;
    const bool has_esc = std::find(modes.begin(), modes.end(), esc::GradientPath::HighPass) != modes.end();
    const bool has_aise = std::find(modes.begin(), modes.end(), esc::GradientPath::Aise) != modes.end();
    if ((param == "omega_h" && !has_esc) || (section == "aise" && !has_aise)) {
        throw UsageError("parameter '" + param + "' is not used by the selected mode(s)");
    }

    const fs::path dir = ensure_out(c.out);
    const fs::path path = dir / ("sweep_" + param + ".csv");
    std::ofstream csv(path);
    if (!csv) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    csv << "# format_version=" << io::kFormatVersion << " seed=" << probe.exp.seed << " param=" << param << '\n';
    csv << "value";
    for (auto m : modes) {
        csv << ',' << io::mode_name(m) << "_mean_rmse," << io::mode_name(m) << "_stopped_fraction";
    }
    csv << '\n';

    for (double v : parsed) {
        const Loaded l = load(c, {{param, v}});
        const int n = trials.value_or(l.exp.trials);
        csv << fmt(v);
        std::cout << param << '=' << fmt(v);
        for (auto mode : l.exp.modes) {
            const auto agg = harness::monte_carlo(config::for_mode(l.exp, mode), n, l.exp.seed, c.threads);
            csv << ',' << fmt(agg.mean_rmse) << ',' << fmt(agg.stopped_fraction);
            std::cout << "  " << io::mode_name(mode) << " rmse=" << fmt(agg.mean_rmse);
        }
        csv << '\n';
        std::cout << '\n';
    }
    if (!csv) {
        throw std::runtime_error("write failed: " + path.string());
    }
    std::cout << "-> " << path.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Extremum-seeking control with adaptive input and state estimation"};
    app.require_subcommand(1);

    Common run_opts, mc_opts, sweep_opts;
    std::optional<int> mc_trials, sweep_trials;
    std::string sweep_param;
    std::vector<std::string> sweep_values;

    auto* run = app.add_subcommand("run", "Single closed-loop run per mode");
    add_common(run, run_opts);
    auto* mc = app.add_subcommand("montecarlo", "Paired Monte Carlo trials per mode");
    add_common(mc, mc_opts);
    mc->add_option("--trials", mc_trials, "Number of trials");
    auto* sweep = app.add_subcommand("sweep", "Monte Carlo over a list of parameter values");
    add_common(sweep, sweep_opts);
    sweep->add_option("--trials", sweep_trials, "Number of trials per value");
    sweep->add_option("--param", sweep_param, "Parameter name")->required();
    sweep->add_option("--values", sweep_values, "Comma-separated values")->required()->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageError;
    }

    try {
        if (*run) return cmd_run(run_opts);
        if (*mc) return cmd_montecarlo(mc_opts, mc_trials);
        return cmd_sweep(sweep_opts, sweep_param, sweep_values, sweep_trials);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const config::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
