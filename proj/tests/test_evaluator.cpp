#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "revisit/dataset.hpp"
#include "revisit/evaluator.hpp"
#include "revisit/ranker.hpp"
#include "revisit/types.hpp"
#include "revisit/util.hpp"

using namespace revisit;
using testutil::contains;
using testutil::error_of;

namespace {

/// Feed whose candidates carry labels only; ranking metrics read nothing else.
RankedFeed feed_from_labels(const std::string& rid,
                            const std::vector<std::array<std::uint8_t, kTaskCount>>& labels) {
  RankedFeed feed;
  feed.request_id = rid;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    RankedCandidate c;
    c.pin_id = "p" + std::to_string(i);
    c.labels = labels[i];
    feed.candidates.push_back(std::move(c));
  }
  return feed;
}

/// Single-task shorthand: the same label pattern on every task.
RankedFeed uniform_feed(const std::string& rid, const std::vector<std::uint8_t>& labels) {
  std::vector<std::array<std::uint8_t, kTaskCount>> rows;
  for (std::uint8_t y : labels) rows.push_back({y, y, y, y, y});
  return feed_from_labels(rid, rows);
}

}  // namespace

TEST_SUITE("evaluator") {

TEST_CASE("random feeds match the per-feed metric definitions") {
  Rng rng(321);
  std::vector<RankedFeed> feeds;
  const int k = 3;
  for (int i = 0; i < 1000; ++i) {
    std::size_t n = rng.uniform_below(9);  // empty feeds included on purpose
    if (i == 0) n = 5;                     // guarantee at least one non-empty
    std::vector<std::array<std::uint8_t, kTaskCount>> labels(n);
    for (auto& row : labels)
      for (auto& y : row) y = rng.bernoulli(0.35) ? 1 : 0;
    feeds.push_back(feed_from_labels("r" + std::to_string(i), labels));
  }

  EvalResult got = eval_feed(feeds, k);

  std::int64_t non_empty = 0;
  for (const auto& f : feeds) non_empty += f.candidates.empty() ? 0 : 1;
  CHECK(got.n_feeds == non_empty);

  for (TaskId task : kAllTasks) {
    double sums[kMetricCount] = {};
    std::int64_t counts[kMetricCount] = {};
    std::int64_t skips[kMetricCount] = {};
    for (const RankedFeed& f : feeds) {
      if (f.candidates.empty()) continue;
      auto m = testutil::oracle_feed_metrics(testutil::task_labels(f, task), k);
      sums[5] += m.hits;
      counts[5] += 1;
      auto tally = [&](int mi, const std::optional<double>& v) {
        if (v) {
          sums[mi] += *v;
          counts[mi] += 1;
        } else {
          skips[mi] += 1;
        }
      };
      tally(0, m.ndcg);
      tally(1, m.map);
      tally(2, m.rr);
      tally(3, m.recall);
      tally(4, m.pairwise);
    }
    for (Metric metric : kAllMetrics) {
      auto mi = static_cast<std::size_t>(metric);
      const MetricValue& mv = got.at(task, metric);
      CHECK(mv.n_requests == counts[mi]);
      CHECK(mv.n_skipped == skips[mi]);
      double want = counts[mi] > 0 ? sums[mi] / static_cast<double>(counts[mi]) : 0.0;
      CHECK(mv.value == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("hand-checked fixture at k = 3") {
  auto result = eval_feed({uniform_feed("r1", {1, 0, 1, 1, 0})}, 3);
  const double idcg = 1.0 + 1.0 / std::log2(3.0) + 0.5;
  for (TaskId task : kAllTasks) {
    CHECK(result.at(task, Metric::Ndcg).value == doctest::Approx(1.5 / idcg).epsilon(1e-12));
    CHECK(result.at(task, Metric::Map).value == doctest::Approx(5.0 / 9.0).epsilon(1e-12));
    CHECK(result.at(task, Metric::RecipRank).value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(result.at(task, Metric::Recall).value == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    // Pairwise runs over the whole list, not the cutoff: 4 of 6 pairs.
    CHECK(result.at(task, Metric::PairwiseAcc).value ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(result.at(task, Metric::Hits).value == 1.0);
  }
}

TEST_CASE("a perfect ranking scores NDCG 1") {
  auto result = eval_feed({uniform_feed("r1", {1, 1, 0, 0})}, 3);
  CHECK(result.at(TaskId::Repin, Metric::Ndcg).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(result.at(TaskId::Repin, Metric::Map).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(result.at(TaskId::Repin, Metric::Recall).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(result.at(TaskId::Repin, Metric::PairwiseAcc).value == doctest::Approx(1.0));
}

TEST_CASE("a feed with no positives counts as a Hits miss and skips the rest") {
  auto result = eval_feed({uniform_feed("r1", {0, 0, 0})}, 3);
  for (Metric m : {Metric::Ndcg, Metric::Map, Metric::RecipRank, Metric::Recall,
                   Metric::PairwiseAcc}) {
    CHECK(result.at(TaskId::Repin, m).n_requests == 0);
    CHECK(result.at(TaskId::Repin, m).n_skipped == 1);
    CHECK(result.at(TaskId::Repin, m).value == 0.0);
  }
  CHECK(result.at(TaskId::Repin, Metric::Hits).n_requests == 1);
  CHECK(result.at(TaskId::Repin, Metric::Hits).value == 0.0);
}

TEST_CASE("an all-positive feed skips pairwise accuracy only") {
  auto result = eval_feed({uniform_feed("r1", {1, 1, 1})}, 2);
  CHECK(result.at(TaskId::Click, Metric::PairwiseAcc).n_skipped == 1);
  CHECK(result.at(TaskId::Click, Metric::Ndcg).n_requests == 1);
  // Recall is capped by the cutoff: 2 of 3 positives visible.
  CHECK(result.at(TaskId::Click, Metric::Recall).value ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("empty feeds are ignored; an all-empty batch is an error") {
  std::vector<RankedFeed> feeds = {feed_from_labels("r0", {}),
                                   uniform_feed("r1", {1, 0})};
  auto result = eval_feed(feeds, 3);
  CHECK(result.n_feeds == 1);

  CHECK(contains(error_of([&] { eval_feed({feed_from_labels("r0", {})}, 3); }),
                 "all feeds empty"));
  CHECK(contains(error_of([&] { eval_feed({}, 3); }), "no feeds"));
  CHECK(contains(error_of([&] { eval_feed(feeds, 0); }), "k must be"));
}

TEST_CASE("reversing a feed complements pairwise accuracy") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 2 + rng.uniform_below(7);
    std::vector<std::uint8_t> labels(n);
    bool pos = false, neg = false;
    for (auto& y : labels) {
      y = rng.bernoulli(0.5) ? 1 : 0;
      (y ? pos : neg) = true;
    }
    if (!pos || !neg) continue;
    auto fwd = eval_feed({uniform_feed("r", labels)}, 3);
    std::vector<std::uint8_t> reversed(labels.rbegin(), labels.rend());
    auto rev = eval_feed({uniform_feed("r", reversed)}, 3);
    double a = fwd.at(TaskId::GridClick, Metric::PairwiseAcc).value;
    double b = rev.at(TaskId::GridClick, Metric::PairwiseAcc).value;
    CHECK(a + b == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("hits is monotone in k") {
  Rng rng(303);
  std::vector<RankedFeed> feeds;
  for (int i = 0; i < 60; ++i) {
    std::vector<std::uint8_t> labels(6);
    for (auto& y : labels) y = rng.bernoulli(0.25) ? 1 : 0;
    feeds.push_back(uniform_feed("r" + std::to_string(i), labels));
  }
  double prev = 0.0;
  for (int k : {1, 2, 3, 5, 8}) {
    double hits = eval_feed(feeds, k).at(TaskId::LongClick, Metric::Hits).value;
    CHECK(hits >= prev);
    prev = hits;
  }
}

TEST_CASE("lift arithmetic, zero baselines, and k mismatches") {
  auto a = eval_feed({uniform_feed("r1", {1, 0, 1})}, 3);
  auto b = eval_feed({uniform_feed("r1", {0, 1, 1})}, 3);
  auto lifts = lift(a, b);

  for (TaskId task : kAllTasks) {
    auto ti = static_cast<std::size_t>(task);
    double av = a.at(task, Metric::Map).value;
    double bv = b.at(task, Metric::Map).value;
    REQUIRE(lifts.pct[ti][static_cast<std::size_t>(Metric::Map)].has_value());
    CHECK(*lifts.pct[ti][static_cast<std::size_t>(Metric::Map)] ==
          doctest::Approx(100.0 * (av - bv) / bv).epsilon(1e-12));
  }

  // Zero baseline: Hits of an all-miss baseline.
  auto miss = eval_feed({uniform_feed("r1", {0, 0, 0})}, 3);
  auto vs_miss = lift(a, miss);
  CHECK(!vs_miss.pct[0][static_cast<std::size_t>(Metric::Hits)].has_value());

  auto a5 = eval_feed({uniform_feed("r1", {1, 0, 1})}, 5);
  CHECK(contains(error_of([&] { lift(a5, b); }), "mismatched k"));
}

TEST_CASE("build_feeds groups rows by request and ranks each group") {
  Rng rng(404);
  Dataset ds;
  ds.feature_dim = 3;
  for (int r = 2; r >= 0; --r) {  // insertion order deliberately scrambled
    for (int i = 0; i < 4; ++i) {
      TrainingExample ex;
      ex.request_id = "req" + std::to_string(r);
      ex.pin_id = "p" + std::to_string(i) + "_" + std::to_string(r);
      ex.user_id = "u0";
      ex.features = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      ex.labels = {static_cast<std::uint8_t>(i % 2), 0, 0, 0, 0};
      ds.rows.push_back(std::move(ex));
    }
  }
  ModelParams params = init_model(3, {4}, 11);

  auto feeds = build_feeds(params, kDefaultUtilityWeights, ds);
  REQUIRE(feeds.size() == 3);
  for (std::size_t i = 0; i + 1 < feeds.size(); ++i)
    CHECK(feeds[i].request_id < feeds[i + 1].request_id);
  for (const RankedFeed& feed : feeds) {
    std::vector<TrainingExample> group;
    for (const auto& row : ds.rows)
      if (row.request_id == feed.request_id) group.push_back(row);
    CHECK(feed.candidates == rank(params, kDefaultUtilityWeights, group));
  }

  auto action_feeds = build_feeds(params, kDefaultUtilityWeights, ds, true);
  for (const RankedFeed& feed : action_feeds) {
    std::vector<TrainingExample> group;
    for (const auto& row : ds.rows)
      if (row.request_id == feed.request_id) group.push_back(row);
    CHECK(feed.candidates == action_rank(params, kDefaultUtilityWeights, group));
  }
}

TEST_CASE("report files carry one row per task and metric") {
  auto result = eval_feed({uniform_feed("r1", {1, 0, 1, 0})}, 3);
  testutil::TempDir dir("evalrep");
  write_eval_report(result, dir.file("report.csv"));
  std::string text = read_file(dir.file("report.csv"));

  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  REQUIRE(lines.size() == 1 + kTaskCount * kMetricCount);
  CHECK(lines[0] == std::string(kEvalReportHeader));
  CHECK(contains(lines[1], "grid_click,ndcg@3,"));
  for (std::size_t i = 1; i < lines.size(); ++i) CHECK(split_csv(lines[i]).size() == 5);

  auto base = eval_feed({uniform_feed("r1", {0, 1, 1, 0})}, 3);
  write_lift_report(result, lift(result, base), dir.file("lift.csv"));
  std::string lift_text = read_file(dir.file("lift.csv"));
  CHECK(contains(lift_text, std::string(kLiftReportHeader)));
  auto first_row_start = lift_text.find('\n') + 1;
  auto first_row = lift_text.substr(first_row_start, lift_text.find('\n', first_row_start) -
                                                         first_row_start);
  CHECK(split_csv(first_row).size() == 6);
}

}  // TEST_SUITE
