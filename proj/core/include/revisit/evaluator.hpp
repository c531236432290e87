#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "revisit/ranker.hpp"
#include "revisit/types.hpp"

namespace revisit {

/// One served request with its candidates in ranked order (best first).
struct RankedFeed {
  std::string request_id;
  std::vector<RankedCandidate> candidates;

  bool operator==(const RankedFeed&) const = default;
};

enum class Metric : std::uint8_t {
  Ndcg = 0,
  Map = 1,
  RecipRank = 2,
  Recall = 3,
  PairwiseAcc = 4,
  Hits = 5,
};
inline constexpr int kMetricCount = 6;
inline constexpr Metric kAllMetrics[] = {Metric::Ndcg,   Metric::Map,         Metric::RecipRank,
                                         Metric::Recall, Metric::PairwiseAcc, Metric::Hits};

std::string_view to_token(Metric m);

/// value = average over the n_requests feeds where the metric was defined;
/// n_skipped counts feeds where it was not (no positive label, or no
/// positive/negative pair for pairwise accuracy).
struct MetricValue {
  double value = 0.0;
  std::int64_t n_requests = 0;
  std::int64_t n_skipped = 0;

  bool operator==(const MetricValue&) const = default;
};

struct EvalResult {
  int k = 3;
  std::int64_t n_feeds = 0;
  std::array<std::array<MetricValue, kMetricCount>, kTaskCount> values{};

  const MetricValue& at(TaskId task, Metric metric) const {
    return values[static_cast<std::size_t>(task)][static_cast<std::size_t>(metric)];
  }
};

/// Binary-relevance metrics at cutoff k, per task:
///   NDCG   log2-discounted DCG over ideal DCG
///   MAP    average precision truncated at k, normalized by min(P, k)
///   RR     1/rank of the first positive when within k, else 0
///   Recall positives in the top k over all positives
///   Pairwise  concordant (positive, negative) pairs over all such pairs
///   Hits   1 when any top-k candidate is positive, over ALL feeds
/// Rank-quality metrics skip feeds without a positive for the task; Hits
/// counts them as misses. Feeds with no candidates are ignored entirely.
EvalResult eval_feed(const std::vector<RankedFeed>& feeds, int k);

/// 100 * (a - b) / b per (task, metric); nullopt when b's value is 0.
struct LiftResult {
  int k = 3;
  std::array<std::array<std::optional<double>, kMetricCount>, kTaskCount> pct{};
};

LiftResult lift(const EvalResult& a, const EvalResult& b);

/// Groups dataset rows by request_id and ranks each group with the model.
/// Feeds sorted by request_id. action_heads_only scores without the revisit
/// head (the pre-revisit system).
std::vector<RankedFeed> build_feeds(const ModelParams& params,
                                    const std::array<double, kTaskCount>& u,
                                    const Dataset& dataset, bool action_heads_only = false);

inline constexpr std::string_view kEvalReportHeader = "task,metric,value,n_requests,n_skipped";
inline constexpr std::string_view kLiftReportHeader =
    "task,metric,value,n_requests,n_skipped,lift_pct";

void write_eval_report(const EvalResult& result, const std::string& path);
/// value/n columns come from `a`; lift_pct is empty where undefined.
void write_lift_report(const EvalResult& a, const LiftResult& lifts, const std::string& path);

}  // namespace revisit
