// Copyright 2026 The hqdl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hqdl/experiments.hpp"

namespace hqdl::cli {

/// Invalid configuration; the message starts with "source:line:column:"
/// when the offending node is known.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Command-line flags; each one set here wins over the config file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<NoiseMode> noise;
    std::optional<std::size_t> jobs;
    std::optional<std::string> out;
};

using Spec = std::variant<experiments::DcdSweepSpec, experiments::TomoSweepSpec, experiments::BlockSpec,
                          experiments::GradcheckSpec, experiments::QramFitSpec, experiments::OverheadSpec>;

struct Experiment {
    std::string command;
    Spec spec;
    std::string out; ///< empty: standard output
};

const std::vector<std::string> &command_names();

/// Parses YAML (or JSON) text into a validated experiment. `source` names
/// the text in error messages.
Experiment parse_experiment(const std::string &command, const std::string &text, const std::string &source,
                            const Overrides &flags);

/// As parse_experiment, reading `path`; an empty path means all defaults.
Experiment load_experiment(const std::string &command, const std::string &path, const Overrides &flags);

experiments::Table run(const Experiment &e);

/// A gradcheck table containing a failed row.
bool failed(const Experiment &e, const experiments::Table &t);

enum class Format { Csv, Json };

Format parse_format(const std::string &s);

/// JSON mirror: an array of row objects; numeric cells become numbers and
/// empty cells null.
void write_table(const experiments::Table &t, std::ostream &out, Format format);

} // namespace hqdl::cli
