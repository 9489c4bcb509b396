#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "escaise/harness.hpp"

namespace escaise::config {

// Raised for any invalid configuration; the message names the offending key.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Experiment {
    std::string example;  // "quadratic" or "abs"
    harness::RunConfig run;
    std::vector<esc::GradientPath> modes;
    int trials = 1;
    std::uint64_t seed = 0;
    nlohmann::json source;  // the validated document, overrides applied
};

// Evaluates a numeric literal or a product/quotient of literals and "pi",
// e.g. "2*pi/1000".
[[nodiscard]] double eval_number(const nlohmann::json& value, const std::string& key);

[[nodiscard]] Experiment parse(const nlohmann::json& doc);
[[nodiscard]] nlohmann::json load_file(const std::filesystem::path& path);

// The shipped parameter sets, as JSON documents.
[[nodiscard]] nlohmann::json builtin(const std::string& example);

// Section ("esc", "aise", "abs" or top level) holding a numeric parameter.
// Throws ConfigError for unknown names.
[[nodiscard]] std::string section_of(const std::string& param);

// Sets a numeric parameter anywhere in the document.
void set_param(nlohmann::json& doc, const std::string& param, double value);

// Builds the run configuration for one mode, with noise disabled if requested.
[[nodiscard]] harness::RunConfig for_mode(const Experiment& exp, esc::GradientPath mode);

[[nodiscard]] esc::GradientPath parse_mode(const std::string& name);

}  // namespace escaise::config
