#pragma once

#include <map>
#include <string>

#include "resgcnn/model.hpp"
#include "resgcnn/social_graph.hpp"

namespace resgcnn {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

/// Parse plain-text "key = value" lines ('#' starts a comment).
/// Keys keep their dotted prefixes (e.g. "train.batch_size").
std::map<std::string, std::string> parse_kv_text(const std::string& text,
                                                 const std::string& origin = "<string>");
std::map<std::string, std::string> parse_kv_file(const std::string& path);

/// Apply "model."/"kernel." entries to the configs; unknown keys under a
/// known prefix raise ConfigError.
void apply_model_key(ModelConfig& cfg, const std::string& key, const std::string& value);
void apply_kernel_key(KernelConfig& cfg, const std::string& key, const std::string& value);

std::string model_config_text(const ModelConfig& cfg);
std::string kernel_config_text(const KernelConfig& cfg);

ModelConfig parse_model_config_text(const std::string& text);
KernelConfig parse_kernel_config_text(const std::string& text);

}  // namespace resgcnn
