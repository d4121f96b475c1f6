#pragma once

#include <string>

#include "corseg/metrics.hpp"
#include "corseg/pipeline.hpp"

namespace corseg {

struct MeshOptions {
    double smooth_lambda = 0.5;
    int smooth_passes = 0;  // 0 leaves marching-cubes surfaces untouched

    void validate() const;
};

// Everything a run needs, loadable from a TOML file. The accepted grammar is
// a strict subset: [section] and [dotted.section] headers, bare keys, values
// that are numbers, booleans, quoted strings, or single-line number arrays,
// and '#' comments. Unknown keys and schema versions other than 1 are input
// errors, so a typo cannot silently fall back to a default.
struct AppConfig {
    int schema = 1;
    PipelineConfig pipeline;
    SectionConfig sections;
    MeshOptions mesh;

    void validate() const;
};

AppConfig default_config();

std::string config_to_toml(const AppConfig& cfg);
// source_name is used in error messages only.
AppConfig config_from_toml(const std::string& text, const std::string& source_name);

AppConfig load_config(const std::string& path);
void save_config(const AppConfig& cfg, const std::string& path);

} // namespace corseg
