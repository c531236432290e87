#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "revisit/dataset.hpp"
#include "revisit/types.hpp"

namespace revisit {

inline constexpr std::array<double, kTaskCount> kDefaultLossWeights = {1.0, 1.0, 1.0, 1.0, 1.0};
/// Only the revisit/repin ratio (1.27) is externally given; the absolute
/// values are config knobs. u(rp_rv) = 1.27 * u(repin) = 2.54.
inline constexpr std::array<double, kTaskCount> kDefaultUtilityWeights = {1.0, 2.0, 1.0, 1.0,
                                                                          2.54};
inline constexpr double kDefaultRpRvUtilityRatio = 1.27;

/// Shared ReLU trunk (default input -> 64 -> 32) with five sigmoid heads.
/// layer_sizes holds [input, hidden..., trunk_out]; an input-only list means
/// heads act directly on the features.
struct ModelParams {
  std::vector<std::int64_t> layer_sizes;
  std::vector<std::vector<double>> trunk_weights;  // layer l: sizes[l+1] x sizes[l], row-major
  std::vector<std::vector<double>> trunk_biases;   // layer l: sizes[l+1]
  std::array<std::vector<double>, kTaskCount> head_weights;
  std::array<double, kTaskCount> head_biases{};
  std::array<double, kTaskCount> loss_weights = kDefaultLossWeights;
  std::array<double, kTaskCount> utility_weights = kDefaultUtilityWeights;
};

/// Structural checks: consistent layer shapes, finite parameters,
/// non-negative loss weights. Throws Error.
void validate(const ModelParams& params);

std::int64_t input_dim(const ModelParams& params);
std::int64_t trunk_output_dim(const ModelParams& params);

/// Deterministic uniform Xavier init. hidden_sizes may be empty.
ModelParams init_model(std::int64_t input_dim, const std::vector<std::int64_t>& hidden_sizes,
                       std::uint64_t seed);

/// Flat parameter order: per trunk layer weights then bias, then per task
/// head weights then bias. Gradients use the same layout.
std::vector<double> flatten_parameters(const ModelParams& params);
void assign_parameters(ModelParams& params, const std::vector<double>& flat);
std::size_t parameter_count(const ModelParams& params);

/// Head probabilities, all strictly in (0,1). Throws on a feature-dim
/// mismatch or non-finite input.
std::array<double, kTaskCount> forward(const ModelParams& params, const std::vector<double>& x);

/// Trunk pre-activation values per layer, for inspecting ReLU kinks.
std::vector<std::vector<double>> trunk_preactivations(const ModelParams& params,
                                                      const std::vector<double>& x);

/// Mean over examples of sum_i w_i * BCE(p_i, y_i), probabilities clamped
/// to [1e-12, 1 - 1e-12] before the logs. The action_* variants run the
/// same accumulation truncated to the four direct-action heads; with
/// w[rp_rv] = 0 the five-task values are bit-identical to them.
double loss(const ModelParams& params, const std::vector<TrainingExample>& rows,
            const std::array<double, kTaskCount>& w);
double action_loss(const ModelParams& params, const std::vector<TrainingExample>& rows,
                   const std::array<double, kTaskCount>& w);

/// Analytic gradient of `loss` in flatten_parameters layout. The clamp is
/// treated as the identity (it only guards the log evaluation).
std::vector<double> loss_gradient(const ModelParams& params,
                                  const std::vector<TrainingExample>& rows,
                                  const std::array<double, kTaskCount>& w);
std::vector<double> action_loss_gradient(const ModelParams& params,
                                         const std::vector<TrainingExample>& rows,
                                         const std::array<double, kTaskCount>& w);

double score(const std::array<double, kTaskCount>& probs,
             const std::array<double, kTaskCount>& u);
double action_score(const std::array<double, kTaskCount>& probs,
                    const std::array<double, kTaskCount>& u);

struct RankedCandidate {
  std::string pin_id;
  std::array<double, kTaskCount> probs{};
  double score = 0.0;
  std::array<std::uint8_t, kTaskCount> labels{};

  bool operator==(const RankedCandidate&) const = default;
};

/// Descending score, ties by ascending pin_id.
std::vector<RankedCandidate> rank(const ModelParams& params,
                                  const std::array<double, kTaskCount>& u,
                                  const std::vector<TrainingExample>& candidates);
std::vector<RankedCandidate> action_rank(const ModelParams& params,
                                         const std::array<double, kTaskCount>& u,
                                         const std::vector<TrainingExample>& candidates);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::int64_t batch_size = 1024;
  std::int64_t epochs = 1;
  double momentum = 0.9;
  std::vector<std::int64_t> hidden_sizes = {64, 32};
  std::uint64_t rng_seed = 42;
};

void validate(const TrainConfig& cfg);

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_losses;  // mean per-example training loss
};

/// Sequential mini-batch SGD with momentum; per-epoch Fisher-Yates shuffle
/// seeded from (rng_seed, epoch), so results are deterministic and
/// independent of thread count. Aborts on a non-finite loss.
TrainResult train(const Dataset& dataset, const TrainConfig& cfg,
                  const std::array<double, kTaskCount>& w,
                  const std::array<double, kTaskCount>& u);

void save_model(const ModelParams& params, const std::string& path);
ModelParams load_model(const std::string& path);

}  // namespace revisit
