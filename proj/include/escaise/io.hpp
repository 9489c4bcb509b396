#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "escaise/harness.hpp"

namespace escaise::io {

inline constexpr int kFormatVersion = 1;

[[nodiscard]] std::string mode_name(esc::GradientPath mode);
[[nodiscard]] std::string plant_name(harness::PlantKind plant);

// CSV layout: one comment line "# format_version=1 seed=<s> plant=<p> mode=<m>
// rmse=<r> t_stop=<t|none> stopped=<0|1>", then the header
// k,t,u,y,v,y_n,y_h,y_l,y_esc and, for the wheel, lambda,mu,nu,omega.
// Numbers carry 17 significant digits.
void write_trajectory_csv(const harness::Trajectory& traj, const std::filesystem::path& path);
[[nodiscard]] harness::Trajectory read_trajectory_csv(const std::filesystem::path& path);

[[nodiscard]] nlohmann::json trajectory_metrics_json(const harness::Trajectory& traj);
[[nodiscard]] nlohmann::json aggregate_json(const harness::Aggregate& agg, std::uint64_t base_seed);

// Writes with a trailing newline; I/O errors name the path.
void write_json(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace escaise::io
