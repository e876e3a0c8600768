#pragma once

#include <optional>
#include <string>
#include <vector>

#include "c2f/data.hpp"
#include "c2f/model.hpp"
#include "c2f/train.hpp"

namespace c2f::cli {

struct ParseError {
    int line = 0;
    std::string message;
};

/// Declarative run description: model dims, data source, multi-phase
/// schedule, stop rule. Grammar documented in the README.
struct RunConfig {
    model::ModelConfig model;
    std::string manifest_path;
    dsp::FramingParams framing;  // parse-time geometry; manifest must agree at load
    train::Schedule schedule;
};

struct ConfigResult {
    std::optional<RunConfig> config;
    std::vector<ParseError> errors;

    bool ok() const { return errors.empty() && config.has_value(); }
};

/// Parses and fully validates the section/key=value run configuration.
/// Unknown keys are errors, and every error carries its line number.
ConfigResult parse_config(const std::string& text);

struct SpecResult {
    std::optional<data::SyntheticSpec> spec;
    std::vector<ParseError> errors;

    bool ok() const { return errors.empty() && spec.has_value(); }
};

/// Parses the synthetic corpus description ([corpus] plus repeated [class]).
SpecResult parse_synthetic_spec(const std::string& text);

}  // namespace c2f::cli
