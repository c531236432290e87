#include "revisit/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "revisit/util.hpp"

namespace revisit {

namespace {

constexpr std::string_view kMetricTokens[] = {"ndcg", "map", "recip_rank",
                                              "recall", "pairwise_acc", "hits"};

double log2_discount(std::size_t rank_1based) {
  return 1.0 / std::log2(static_cast<double>(rank_1based) + 1.0);
}

}  // namespace

std::string_view to_token(Metric m) {
  auto idx = static_cast<std::size_t>(m);
  if (idx >= std::size(kMetricTokens)) throw Error("invalid Metric value");
  return kMetricTokens[idx];
}

EvalResult eval_feed(const std::vector<RankedFeed>& feeds, int k) {
  if (feeds.empty()) throw Error("eval_feed: no feeds");
  if (k < 1) throw Error("eval_feed: k must be >= 1");

  EvalResult result;
  result.k = k;
  std::array<std::array<double, kMetricCount>, kTaskCount> sums{};

  for (const RankedFeed& feed : feeds) {
    const auto& cands = feed.candidates;
    if (cands.empty()) continue;
    ++result.n_feeds;
    std::size_t n = cands.size();
    std::size_t cutoff = std::min(n, static_cast<std::size_t>(k));

    for (int task = 0; task < kTaskCount; ++task) {
      auto ti = static_cast<std::size_t>(task);
      std::size_t positives = 0;
      for (const RankedCandidate& c : cands) positives += c.labels[ti] != 0 ? 1 : 0;

      auto& value_row = result.values[ti];
      auto& sum_row = sums[ti];
      auto record = [&](Metric m, double v) {
        sum_row[static_cast<std::size_t>(m)] += v;
        ++value_row[static_cast<std::size_t>(m)].n_requests;
      };
      auto skip = [&](Metric m) { ++value_row[static_cast<std::size_t>(m)].n_skipped; };

      bool hit = false;
      for (std::size_t r = 0; r < cutoff && !hit; ++r) hit = cands[r].labels[ti] != 0;
      record(Metric::Hits, hit ? 1.0 : 0.0);

      if (positives == 0) {
        skip(Metric::Ndcg);
        skip(Metric::Map);
        skip(Metric::RecipRank);
        skip(Metric::Recall);
        skip(Metric::PairwiseAcc);
        continue;
      }

      double dcg = 0.0;
      double precision_hits = 0.0;
      double ap = 0.0;
      double rr = 0.0;
      std::size_t top_k_positives = 0;
      for (std::size_t r = 0; r < cutoff; ++r) {
        bool rel = cands[r].labels[ti] != 0;
        if (!rel) continue;
        dcg += log2_discount(r + 1);
        ++precision_hits;
        ap += precision_hits / static_cast<double>(r + 1);
        if (rr == 0.0) rr = 1.0 / static_cast<double>(r + 1);
        ++top_k_positives;
      }
      double idcg = 0.0;
      for (std::size_t r = 0; r < std::min(positives, static_cast<std::size_t>(k)); ++r)
        idcg += log2_discount(r + 1);
      record(Metric::Ndcg, dcg / idcg);
      record(Metric::Map, ap / static_cast<double>(std::min(positives,
                                                            static_cast<std::size_t>(k))));
      record(Metric::RecipRank, rr);
      record(Metric::Recall,
             std::min(1.0, static_cast<double>(top_k_positives) / static_cast<double>(positives)));

      std::size_t negatives = n - positives;
      if (negatives == 0) {
        skip(Metric::PairwiseAcc);
      } else {
        std::size_t concordant = 0;
        std::size_t pos_seen = 0;
        for (std::size_t r = 0; r < n; ++r) {
          if (cands[r].labels[ti] != 0)
            ++pos_seen;
          else
            concordant += pos_seen;
        }
        record(Metric::PairwiseAcc, static_cast<double>(concordant) /
                                        static_cast<double>(positives * negatives));
      }
    }
  }

  if (result.n_feeds == 0) throw Error("eval_feed: all feeds empty");
  for (int task = 0; task < kTaskCount; ++task) {
    for (int m = 0; m < kMetricCount; ++m) {
      MetricValue& mv = result.values[static_cast<std::size_t>(task)][static_cast<std::size_t>(m)];
      mv.value = mv.n_requests > 0
                     ? sums[static_cast<std::size_t>(task)][static_cast<std::size_t>(m)] /
                           static_cast<double>(mv.n_requests)
                     : 0.0;
    }
  }
  return result;
}

LiftResult lift(const EvalResult& a, const EvalResult& b) {
  if (a.k != b.k)
    throw Error("lift: mismatched k (" + std::to_string(a.k) + " vs " + std::to_string(b.k) + ")");
  LiftResult out;
  out.k = a.k;
  for (int task = 0; task < kTaskCount; ++task) {
    for (int m = 0; m < kMetricCount; ++m) {
      auto ti = static_cast<std::size_t>(task);
      auto mi = static_cast<std::size_t>(m);
      double av = a.values[ti][mi].value;
      double bv = b.values[ti][mi].value;
      if (bv == 0.0)
        out.pct[ti][mi] = std::nullopt;
      else
        out.pct[ti][mi] = 100.0 * (av - bv) / bv;
    }
  }
  return out;
}

std::vector<RankedFeed> build_feeds(const ModelParams& params,
                                    const std::array<double, kTaskCount>& u,
                                    const Dataset& dataset, bool action_heads_only) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dataset.rows.size(); ++i)
    groups[dataset.rows[i].request_id].push_back(i);

  std::vector<RankedFeed> feeds(groups.size());
  std::vector<const std::pair<const std::string, std::vector<std::size_t>>*> entries;
  entries.reserve(groups.size());
  for (const auto& entry : groups) entries.push_back(&entry);

  parallel_shards(entries.size(), [&](std::size_t gi) {
    std::vector<TrainingExample> candidates;
    candidates.reserve(entries[gi]->second.size());
    for (std::size_t row : entries[gi]->second) candidates.push_back(dataset.rows[row]);
    RankedFeed feed;
    feed.request_id = entries[gi]->first;
    feed.candidates =
        action_heads_only ? action_rank(params, u, candidates) : rank(params, u, candidates);
    feeds[gi] = std::move(feed);
  });
  return feeds;
}

namespace {

void append_report_rows(std::ostringstream& out, const EvalResult& result,
                        const LiftResult* lifts) {
  for (int task = 0; task < kTaskCount; ++task) {
    for (Metric m : kAllMetrics) {
      auto ti = static_cast<std::size_t>(task);
      const MetricValue& mv = result.values[ti][static_cast<std::size_t>(m)];
      out << to_token(static_cast<TaskId>(task)) << ',' << to_token(m) << '@' << result.k << ','
          << format_real(mv.value) << ',' << mv.n_requests << ',' << mv.n_skipped;
      if (lifts != nullptr) {
        out << ',';
        const auto& pct = lifts->pct[ti][static_cast<std::size_t>(m)];
        if (pct.has_value()) out << format_real(*pct);
      }
      out << '\n';
    }
  }
}

}  // namespace

void write_eval_report(const EvalResult& result, const std::string& path) {
  std::ostringstream out;
  out << kEvalReportHeader << '\n';
  append_report_rows(out, result, nullptr);
  write_file_atomic(path, out.str());
}

void write_lift_report(const EvalResult& a, const LiftResult& lifts, const std::string& path) {
  if (a.k != lifts.k) throw Error("write_lift_report: mismatched k");
  std::ostringstream out;
  out << kLiftReportHeader << '\n';
  append_report_rows(out, a, &lifts);
  write_file_atomic(path, out.str());
}

}  // namespace revisit
