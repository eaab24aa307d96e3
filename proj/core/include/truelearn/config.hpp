#pragma once

#include <string>
#include <string_view>

#include "truelearn/eval.hpp"
#include "truelearn/models.hpp"

namespace truelearn {

// TOML-style `key = value` lines; `#` starts a comment.
//
//   model = "truelearn-novelty"
//   init_mean = 0.0
//   init_variance = 1.0
//   beta = 0.5
//   tau = 0.0
//   use_negative = true
//   top_k = 5
//   kt_noise = 0.1
//   default_engagement_rate = 0.5
//
// Keys absent from the text keep their value in `base`. Setting `model`
// alone switches to that kind's defaults before other keys apply.
// Throws UsageError on unknown keys, malformed values or a config that
// fails ModelConfig::validate.
ModelConfig parse_config(std::string_view text, const ModelConfig& base = {});

// Inverse of parse_config; every key is written.
std::string config_to_text(const ModelConfig& cfg);

// Grid file: one list per swept hyperparameter, e.g.
//   init_variance = [0.5, 1.0]
//   tau = [0.0, 0.05]
// Accepted keys: init_variance, kt_noise, tau, beta.
GridSpec parse_grid(std::string_view text);

}  // namespace truelearn
