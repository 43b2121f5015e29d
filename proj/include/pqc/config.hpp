#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pqc/harness.hpp"

namespace pqc {

class ConfigError : public std::runtime_error {
public:
    enum class Kind { MissingFile, Parse, InvariantViolation, UnknownKey };

    ConfigError(Kind kind, std::string key, const std::string& message)
        : std::runtime_error(message), kind_(kind), key_(std::move(key)) {}

    Kind kind() const { return kind_; }
    /// Dotted key path the error refers to; empty when none applies.
    const std::string& key() const { return key_; }

private:
    Kind kind_;
    std::string key_;
};

const char* to_string(ConfigError::Kind kind);

using Override = std::pair<std::string, std::string>;

/// Splits `key=value`. Throws ConfigError(Parse) without '='.
Override parse_override(const std::string& text);

/// Config text is one `dotted.key = value` per line; `#` starts a comment.
/// Absent keys keep their defaults. Relative trace paths resolve against
/// `base_dir`.
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::vector<Override>& overrides = {},
                                   const std::string& base_dir = ".");

/// Reads `path` (must exist) and applies `overrides` on top.
ExperimentConfig parse_config(const std::string& path, const std::vector<Override>& overrides = {});

/// Inverse of parse_config_text: every key, in canonical order.
std::string emit_config(const ExperimentConfig& config);

/// Applies one `key=value` to an existing config (same rules as the file).
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value,
                   const std::string& base_dir = ".");

/// Canonical text of one key's current value, as emit_config writes it.
std::string config_value(const ExperimentConfig& config, const std::string& key);

/// All accepted keys, in canonical order.
std::vector<std::string> config_keys();

}  // namespace pqc
