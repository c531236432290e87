#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "revisit/loggen.hpp"
#include "revisit/ranker.hpp"
#include "revisit/types.hpp"

namespace revisit {

/// Everything one pipeline run needs. Parsed from a key = value config file:
/// generator keys at top level, then optional [pipeline], [train] and
/// [weights] sections. `#` starts a comment at line start or after
/// whitespace. Arrays are bracketed: key = [a, b, c].
struct PipelineConfig {
  GenConfig gen;
  TrainConfig train;
  std::array<double, kTaskCount> loss_weights = kDefaultLossWeights;
  std::array<double, kTaskCount> utility_weights = kDefaultUtilityWeights;
  /// When set, overrides the revisit-head utility after all other keys:
  /// utility_weights[rp_rv] = ratio * utility_weights[repin].
  std::optional<double> u_rp_rv_ratio;

  std::string out_dir = "out";
  std::string event_log_path;  // empty + generate stage on = synthesize the log
  std::string sidecar_path;
  std::int64_t eval_last_days = 3;
  std::int64_t eval_k = 3;
  bool run_generate = true;
  bool run_train = true;
  bool run_evaluate = true;
  bool run_analyze = true;
  bool plot_data = false;
};

/// Recomputes utility_weights[rp_rv] from u_rp_rv_ratio if one is set.
/// parse_config_* already call this; CLI overrides call it again.
void apply_rp_rv_ratio(PipelineConfig& cfg);

/// Parses config text. Unknown keys, unknown sections, malformed values and
/// wrong array lengths all raise Error with the line number.
PipelineConfig parse_config_text(const std::string& text);

/// Reads and parses a config file; a missing file raises Error naming the path.
PipelineConfig parse_config_file(const std::string& path);

}  // namespace revisit
