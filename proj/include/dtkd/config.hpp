#pragma once

// Plain-text experiment configuration: `section.key = value` lines, full-line
// # comments, unknown keys rejected with the offending key and line number.

#include "dtkd/harness.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace dtkd::harness {

class ConfigError : public std::runtime_error {
  public:
    ConfigError(const std::string &message, std::size_t line)
        : std::runtime_error(message), line_(line) {}
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

ExperimentConfig default_config();

/// Parses config text over the defaults. Throws ConfigError naming the key
/// and line on unknown keys or bad values.
ExperimentConfig parse_config(const std::string &text);
ExperimentConfig load_config(const std::filesystem::path &path);

/// Writes every key so that load_config(write_config(c)) == c.
void write_config(const ExperimentConfig &config, const std::filesystem::path &path);

} // namespace dtkd::harness
