#include "escaise/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace escaise::io {

namespace {

std::string num(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

double parse_double(const std::string& s, const std::filesystem::path& path)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) {
            throw std::invalid_argument(s);
        }
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(path.string() + ": not a number: '" + s + "'");
    }
}

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, sep)) {
        out.push_back(cell);
    }
    return out;
}

const std::vector<std::string>& base_columns()
{
    static const std::vector<std::string> cols{"k", "t", "u", "y", "v", "y_n", "y_h", "y_l", "y_esc"};
    return cols;
}

const std::vector<std::string>& wheel_columns()
{
    static const std::vector<std::string> cols{"lambda", "mu", "nu", "omega"};
    return cols;
}

}  // namespace

std::string mode_name(esc::GradientPath mode)
{
    return mode == esc::GradientPath::Aise ? "esc-aise" : "esc";
}

std::string plant_name(harness::PlantKind plant)
{
    return plant == harness::PlantKind::Abs ? "abs" : "quadratic";
}

void write_trajectory_csv(const harness::Trajectory& traj, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    const bool wheel = traj.plant == harness::PlantKind::Abs;
    out << "# format_version=" << kFormatVersion << " seed=" << traj.seed << " plant=" << plant_name(traj.plant)
        << " mode=" << mode_name(traj.mode) << " rmse=" << num(traj.rmse)
        << " t_stop=" << (traj.t_stop ? num(*traj.t_stop) : "none") << " stopped=" << (traj.stopped ? 1 : 0)
        << '\n';

    std::string header;
    for (const auto& c : base_columns()) header += (header.empty() ? "" : ",") + c;
    if (wheel) {
        for (const auto& c : wheel_columns()) header += "," + c;
    }
    out << header << '\n';

    for (const auto& r : traj.rows) {
        out << r.k << ',' << num(r.t) << ',' << num(r.u) << ',' << num(r.y) << ',' << num(r.v) << ','
            << num(r.y_n) << ',' << num(r.y_h) << ',' << num(r.y_l) << ',' << num(r.y_esc);
        if (wheel) {
            out << ',' << num(r.lambda) << ',' << num(r.mu) << ',' << num(r.nu) << ',' << num(r.omega);
        }
        out << '\n';
    }
    if (!out) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

harness::Trajectory read_trajectory_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    harness::Trajectory traj;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
        throw std::runtime_error(path.string() + ": missing metadata line");
    }
    for (const auto& field : split(line.substr(2), ' ')) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = field.substr(0, eq);
        const std::string val = field.substr(eq + 1);
        if (key == "format_version" && std::stoi(val) != kFormatVersion) {
            throw std::runtime_error(path.string() + ": unsupported format_version " + val);
        } else if (key == "seed") {
            traj.seed = std::stoull(val);
        } else if (key == "plant") {
            traj.plant = val == "abs" ? harness::PlantKind::Abs : harness::PlantKind::Quadratic;
        } else if (key == "mode") {
            traj.mode = val == "esc-aise" ? esc::GradientPath::Aise : esc::GradientPath::HighPass;
        } else if (key == "rmse") {
            traj.rmse = parse_double(val, path);
        } else if (key == "t_stop" && val != "none") {
            traj.t_stop = parse_double(val, path);
        } else if (key == "stopped") {
            traj.stopped = val == "1";
        }
    }

    if (!std::getline(in, line)) {
        throw std::runtime_error(path.string() + ": missing header");
    }
    const auto header = split(line, ',');
    const bool wheel = traj.plant == harness::PlantKind::Abs;
    const std::size_t width = base_columns().size() + (wheel ? wheel_columns().size() : 0);
    if (header.size() != width) {
        throw std::runtime_error(path.string() + ": expected " + std::to_string(width) + " columns");
    }

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != width) {
            throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
        }
        std::vector<double> v;
        v.reserve(width);
        for (std::size_t i = 1; i < cells.size(); ++i) v.push_back(parse_double(cells[i], path));
        harness::Row r{};
        r.k = std::stol(cells[0]);
        r.t = v[0];
        r.u = v[1];
        r.y = v[2];
        r.v = v[3];
        r.y_n = v[4];
        r.y_h = v[5];
        r.y_l = v[6];
        r.y_esc = v[7];
        if (wheel) {
            r.lambda = v[8];
            r.mu = v[9];
            r.nu = v[10];
            r.omega = v[11];
        }
        traj.rows.push_back(r);
    }
    return traj;
}

nlohmann::json trajectory_metrics_json(const harness::Trajectory& traj)
{
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["seed"] = traj.seed;
    j["plant"] = plant_name(traj.plant);
    j["mode"] = mode_name(traj.mode);
    j["rmse"] = traj.rmse;
    j["t_stop"] = traj.t_stop ? nlohmann::json(*traj.t_stop) : nlohmann::json(nullptr);
    j["stopped"] = traj.stopped;
    j["steps"] = traj.rows.size();
    return j;
}

nlohmann::json aggregate_json(const harness::Aggregate& agg, std::uint64_t base_seed)
{
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["seed"] = base_seed;
    j["n_trials"] = agg.n_trials;
    j["n_failed"] = agg.n_failed;
    j["mean_rmse"] = agg.mean_rmse;
    j["std_rmse"] = agg.std_rmse;
    j["mean_t_stop"] = agg.mean_t_stop ? nlohmann::json(*agg.mean_t_stop) : nlohmann::json(nullptr);
    j["stopped_fraction"] = agg.stopped_fraction;
    auto& trials = j["trials"] = nlohmann::json::array();
    for (const auto& t : agg.trials) {
        nlohmann::json tj{{"seed", t.seed}, {"ok", t.ok}};
        if (t.ok) {
            tj["rmse"] = t.rmse;
            tj["t_stop"] = t.t_stop ? nlohmann::json(*t.t_stop) : nlohmann::json(nullptr);
        } else {
            tj["error"] = t.error;
        }
        trials.push_back(std::move(tj));
    }
    return j;
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

}  // namespace escaise::io
