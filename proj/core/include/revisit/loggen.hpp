#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "revisit/types.hpp"

namespace revisit {

/// Day-0..9 anchors 0.146 / 0.195 / 0.087 with linear interpolation between.
/// Treated as per-save probabilities (the source framing is per-user).
inline constexpr std::array<double, 10> kDefaultRevisitImpressionProbs = {
    0.146, 0.195, 0.1815, 0.168, 0.1545, 0.141, 0.1275, 0.114, 0.1005, 0.087,
};

/// Day-0..9 anchors 0.047 / 0.0235 / 0.005 / 0.003 with linear interpolation.
/// Per-save marginal probability of a grid-click revisit on day d.
inline constexpr std::array<double, 10> kDefaultRevisitGridProbs = {
    0.047, 0.0235, 0.018875, 0.01425, 0.009625, 0.005, 0.0045, 0.004, 0.0035, 0.003,
};

inline constexpr int kRevisitCurveDays = 10;

namespace detail {
template <std::size_t N>
constexpr std::array<double, N> filled_array(double v) {
  std::array<double, N> a{};
  for (double& x : a) x = v;
  return a;
}
}  // namespace detail

struct GenConfig {
  std::int64_t n_users = 200;
  std::int64_t n_days = 16;
  double requests_per_user_day = 4.0;
  std::int64_t candidates_per_request = 5;
  std::int64_t pins_per_topic = 2000;
  double p_repin = 0.08;
  double p_grid_click = 0.10;
  double p_click = 0.05;
  double p_long_click_given_click = 0.5;
  std::array<double, kRevisitCurveDays> revisit_impression_probs = kDefaultRevisitImpressionProbs;
  std::array<double, kRevisitCurveDays> revisit_grid_probs = kDefaultRevisitGridProbs;
  /// Per-topic day tilt on the grid curve: effective pG[d] = pG[d] * tilt^d.
  /// 1.0 leaves the curve unchanged. A flat multiplier cannot move the
  /// long/short revisit share, so the per-topic knob tilts the day shape
  /// instead, anchored at day 0.
  std::array<double, kTopicCount> topic_tilts = detail::filled_array<kTopicCount>(1.0);
  std::array<double, kTopicCount> topic_mixture =
      detail::filled_array<kTopicCount>(1.0 / kTopicCount);
  std::int64_t feature_dim = 8;
  /// Scales how strongly sidecar coordinate f0 predicts revisits; 0 = none.
  double planted_signal_strength = 1.0;
  std::uint64_t rng_seed = 42;
};

/// Throws Error on out-of-range probabilities, a non-simplex mixture,
/// n_days < 10, or an effective grid probability pushed past 1 by a tilt.
void validate(const GenConfig& cfg);

/// Per-pin latent revisit propensity in [-1, 1), a pure hash of
/// (rng_seed, pin_id). Sidecar coordinate f0 equals this value.
double pin_signal(const GenConfig& cfg, const std::string& pin_id);

/// Offset L such that the mean of sigmoid(L + beta*z) over z ~ U(-1,1)
/// equals target. Requires target in (0,1); beta >= 0.
double solve_marginal_offset(double target, double beta);

/// Tilt t such that sum_{d=3..6} pG[d]*t^d / sum_{d=0..6} pG[d]*t^d equals
/// target_long_share. Requires a target strictly between the shares reached
/// at the bisection bounds [1e-6, 100].
double fit_topic_tilt(const std::array<double, kRevisitCurveDays>& grid_probs,
                      double target_long_share);

/// Deterministic synthetic log: RelatedPins request/impression/action events
/// per user-day, plus OwnProfile revisit events sampled from the per-day
/// curves for every save. Sorted by (ts, user_id, pin_id, request_id,
/// action, slot); byte-stable across thread counts.
std::vector<EventRecord> generate_log(const GenConfig& cfg);

struct SidecarRow {
  std::string request_id;
  std::string pin_id;
  std::vector<double> features;

  bool operator==(const SidecarRow&) const = default;
};

/// One feature row per RelatedPins impression, recomputed purely from
/// (config, request_id, pin_id): f0 = pin_signal, the rest hash-derived
/// noise in [-1, 1). Rows sorted by (request_id, pin_id). Throws if the log
/// references users, pins, or days outside the config's ranges.
std::vector<SidecarRow> emit_feature_sidecar(const GenConfig& cfg,
                                             const std::vector<EventRecord>& log);

std::string sidecar_header(std::int64_t feature_dim);
void write_sidecar_file(const std::vector<SidecarRow>& rows, std::int64_t feature_dim,
                        const std::string& path);
std::vector<SidecarRow> parse_sidecar_file(const std::string& path);

}  // namespace revisit
