#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tailshape/experiment.hpp"

namespace tailshape {

struct SweepSpec {
    SweepAxis axis = SweepAxis::regime_rates;
    std::vector<double> grid;
};

/// One configuration file: the scenario, an optional sweep, and the text it
/// was read from.
struct RunConfig {
    ScenarioConfig scenario;
    std::optional<SweepSpec> sweep;
    std::string text;
    bool has_kernel = false;  // the file has a kernel section
    std::filesystem::path source;
};

/// Parses YAML text. Relative file references (edge lists, tabulated
/// kernels) resolve against `base_dir`. Throws ConfigError carrying the line
/// of the offending node; unknown keys are errors.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {},
                       const std::string& source_name = "config");

RunConfig load_config(const std::filesystem::path& path);

/// YAML for a preset, in the same schema parse_config reads.
std::string preset_yaml(Preset preset);

}  // namespace tailshape
