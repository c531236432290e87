#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "revisit/analyzer.hpp"
#include "revisit/attribution.hpp"
#include "revisit/types.hpp"
#include "revisit/util.hpp"

using namespace revisit;
using testutil::contains;
using testutil::error_of;
using testutil::ev;

namespace {

std::int64_t day_ts(DayIndex day, std::int64_t offset) { return day * kSecondsPerDay + offset; }

struct Derived {
  std::vector<SaveRecord> saves;
  std::vector<RevisitEvent> revisits;
};

Derived derived(const std::vector<EventRecord>& events) {
  return {derive_saves(events), derive_revisit_events(events)};
}

/// Three-user fixture: u1 saves twice on day 0 and revisits both; u2 saves on
/// day 1 without revisits; u3 saves on day 8 and revisits on day 9.
std::vector<EventRecord> curve_fixture() {
  return {
      ev(day_ts(0, 100), "u1", "p1", Surface::RelatedPins, Action::Repin, "r1", Topic::Travel, 0),
      ev(day_ts(0, 150), "u1", "p4", Surface::RelatedPins, Action::Repin, "r2", Topic::Travel, 0),
      ev(day_ts(0, 200), "u1", "p1", Surface::OwnProfile, Action::Impression),
      ev(day_ts(0, 250), "u1", "p4", Surface::OwnProfile, Action::Impression),
      ev(day_ts(2, 300), "u1", "p1", Surface::OwnProfile, Action::GridClick),
      ev(day_ts(1, 100), "u2", "p2", Surface::RelatedPins, Action::Repin, "r3", Topic::Travel, 0),
      ev(day_ts(8, 100), "u3", "p3", Surface::RelatedPins, Action::Repin, "r4", Topic::Travel, 0),
      ev(day_ts(9, 100), "u3", "p3", Surface::OwnProfile, Action::Impression),
  };
}

}  // namespace

TEST_SUITE("analyzer") {

TEST_CASE("daily curves count users or saves against the full-window cohort") {
  auto [saves, revisits] = derived(curve_fixture());
  // Last observed day is 9; max_day 2 keeps saves on days 0..7 eligible, so
  // u3's day-8 save drops out of both numerator and denominator.
  auto users = daily_revisit_user_fraction(saves, revisits, 2);
  CHECK(users.max_day == 2);
  CHECK(users.denominator == 2);  // u1, u2
  CHECK(users.impression_count == std::vector<std::int64_t>{1, 0, 0});
  CHECK(users.grid_count == std::vector<std::int64_t>{0, 0, 1});
  CHECK(users.impression_fraction[0] == doctest::Approx(0.5));
  CHECK(users.grid_fraction[2] == doctest::Approx(0.5));

  // Per-save denominators: three eligible saves, two revisited on day 0.
  auto volume = daily_revisit_volume_fraction(saves, revisits, 2);
  CHECK(volume.denominator == 3);  // u1 x2, u2
  CHECK(volume.impression_count == std::vector<std::int64_t>{2, 0, 0});
  CHECK(volume.impression_fraction[0] == doctest::Approx(2.0 / 3.0));
  CHECK(volume.grid_fraction[2] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("multiple revisits of one save count once per day offset") {
  std::vector<EventRecord> events = {
      ev(day_ts(0, 100), "u1", "p1", Surface::RelatedPins, Action::Repin, "r1", Topic::Art, 0),
      ev(day_ts(0, 200), "u1", "p1", Surface::OwnProfile, Action::Impression),
      ev(day_ts(0, 300), "u1", "p1", Surface::OwnProfile, Action::Impression),
      ev(day_ts(0, 400), "u1", "p1", Surface::OwnProfile, Action::Impression),
  };
  auto [saves, revisits] = derived(events);
  auto volume = daily_revisit_volume_fraction(saves, revisits, 2, 2);
  CHECK(volume.impression_count[0] == 1);
  CHECK(volume.denominator == 1);
}

TEST_CASE("the last-day hint widens eligibility but cannot shrink it") {
  std::vector<EventRecord> events = {
      ev(day_ts(0, 100), "u1", "p1", Surface::RelatedPins, Action::Repin, "r1", Topic::Art, 0),
  };
  auto [saves, revisits] = derived(events);
  // Without the hint the lone save has no 9-day window: observed range ends
  // the day it was made.
  CHECK(contains(error_of([&] { daily_revisit_user_fraction(saves, revisits, 9); }),
                 "observation window"));
  // Telling the analyzer the log really ran 10 days makes it eligible.
  auto curves = daily_revisit_user_fraction(saves, revisits, 9, 9);
  CHECK(curves.denominator == 1);
  for (double f : curves.impression_fraction) CHECK(f == 0.0);

  // A hint earlier than observed activity is a contradiction.
  auto fixture = derived(curve_fixture());
  CHECK(contains(error_of([&] {
                   daily_revisit_user_fraction(fixture.saves, fixture.revisits, 2, 5);
                 }),
                 "precedes observed activity"));
}

TEST_CASE("eligibility filters the join output, not its input") {
  // The day-8 resave absorbs the day-8 revisit. Filtering saves before the
  // join would hand that revisit to the day-0 save at offset 8 instead.
  std::vector<EventRecord> events = {
      ev(day_ts(0, 100), "u1", "p1", Surface::RelatedPins, Action::Repin, "r1", Topic::Art, 0),
      ev(day_ts(8, 100), "u1", "p1", Surface::RelatedPins, Action::Repin, "r2", Topic::Art, 0),
      ev(day_ts(8, 200), "u1", "p1", Surface::OwnProfile, Action::GridClick),
  };
  auto [saves, revisits] = derived(events);
  auto curves = daily_revisit_volume_fraction(saves, revisits, 9, 9);
  CHECK(curves.denominator == 1);  // the day-0 save only
  for (DayIndex d = 0; d <= 9; ++d) {
    CHECK(curves.grid_count[static_cast<std::size_t>(d)] == 0);
    CHECK(curves.impression_count[static_cast<std::size_t>(d)] == 0);
  }
}

TEST_CASE("activity split by revisit status, hand case") {
  std::vector<EventRecord> events = {
      // u1: saves day 0, revisits within t=1, then active on days 2 and 3.
      ev(day_ts(0, 100), "u1", "pa", Surface::RelatedPins, Action::Repin, "r1", Topic::Art, 0),
      ev(day_ts(1, 100), "u1", "pa", Surface::OwnProfile, Action::Impression),
      ev(day_ts(2, 100), "u1", "px", Surface::Other, Action::Impression),
      ev(day_ts(3, 100), "u1", "px", Surface::Other, Action::Click),
      // u2: saves day 0, never revisits, active on day 3 only.
      ev(day_ts(0, 200), "u2", "pb", Surface::RelatedPins, Action::Repin, "r2", Topic::Art, 0),
      ev(day_ts(3, 200), "u2", "py", Surface::Other, Action::Impression),
      // u3: saves day 4; the 2-day follow-up window overruns the log.
      ev(day_ts(4, 100), "u3", "pc", Surface::RelatedPins, Action::Repin, "r3", Topic::Art, 0),
  };
  auto report = activity_by_revisit_status(events, 1, 2);
  CHECK(report.t == 1);
  CHECK(report.horizon == 2);
  CHECK(report.n_revisited == 1);
  CHECK(report.n_not_revisited == 1);
  CHECK(report.n_skipped == 1);
  CHECK(report.revisited_hist == std::vector<std::int64_t>{0, 0, 1});
  CHECK(report.not_revisited_hist == std::vector<std::int64_t>{0, 1, 0});
  CHECK(report.mean_active_revisited == doctest::Approx(2.0));
  CHECK(report.mean_active_not_revisited == doctest::Approx(1.0));
}

TEST_CASE("activity report rejects degenerate inputs") {
  auto events = curve_fixture();
  CHECK(!error_of([&] { activity_by_revisit_status(events, -1, 2); }).empty());
  CHECK(!error_of([&] { activity_by_revisit_status(events, 1, 0); }).empty());
  CHECK(contains(error_of([&] { activity_by_revisit_status({}, 1, 2); }), "no events"));
  std::vector<EventRecord> no_saves = {
      ev(100, "u1", "p1", Surface::Other, Action::Impression)};
  CHECK(contains(error_of([&] { activity_by_revisit_status(no_saves, 1, 2); }), "no saves"));
  // Horizon longer than the log skips everyone.
  CHECK(contains(error_of([&] { activity_by_revisit_status(events, 6, 28); }), "too short"));
}

TEST_CASE("point_biserial equals a plain Pearson and guards degenerate splits") {
  Rng rng(1717);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 6 + rng.uniform_below(40);
    std::vector<std::uint8_t> x(n);
    std::vector<double> xd(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.bernoulli(0.4) ? 1 : 0;
      xd[i] = x[i];
      y[i] = rng.uniform(-2.0, 2.0);
    }
    std::size_t n1 = 0;
    for (auto v : x) n1 += v;
    auto got = point_biserial(x, y);
    if (n1 < 2 || n - n1 < 2) {
      CHECK(!got.has_value());
      continue;
    }
    auto want = testutil::oracle_pearson(xd, y);
    REQUIRE(got.has_value() == want.has_value());
    if (got) CHECK(*got == doctest::Approx(*want).epsilon(1e-12));
  }

  CHECK(!point_biserial({1, 0, 1}, {1.0, 2.0, 3.0}).has_value());      // one zero only
  CHECK(!point_biserial({1, 1, 0, 0}, {2.0, 2.0, 2.0, 2.0}).has_value());  // flat outcome
  CHECK(!error_of([] { point_biserial({1, 0}, {1.0}); }).empty());
}

TEST_CASE("fisher intervals match the closed form") {
  for (double r : {-0.8, -0.2, 0.0, 0.35, 0.9}) {
    for (std::int64_t n : {4, 10, 250}) {
      auto ci = fisher_z_interval(r, n);
      REQUIRE(ci.has_value());
      const double z = std::atanh(r);
      const double se = 1.0 / std::sqrt(static_cast<double>(n - 3));
      const double z975 = 1.959963984540054;
      CHECK(ci->lo == doctest::Approx(std::tanh(z - z975 * se)).epsilon(1e-12));
      CHECK(ci->hi == doctest::Approx(std::tanh(z + z975 * se)).epsilon(1e-12));
      CHECK(ci->lo <= ci->hi);
      CHECK(ci->lo >= -1.0);
      CHECK(ci->hi <= 1.0);
    }
  }
  CHECK(!fisher_z_interval(0.5, 3).has_value());
  // Perfect correlation is clamped, not infinite.
  auto ci = fisher_z_interval(1.0, 10);
  REQUIRE(ci.has_value());
  CHECK(std::isfinite(ci->lo));
  CHECK(ci->hi <= 1.0);
}

TEST_CASE("engagement correlation cells match independent reassembly") {
  Rng rng(2626);
  const DayIndex max_day = 2;
  const int horizon = 3;
  int checked_trials = 0;
  for (int trial = 0; trial < 25; ++trial) {
    testutil::SoupOpts opts;
    opts.n_users = 6;
    opts.n_pins = 8;
    opts.n_days = 14;
    opts.n_events = 420;
    auto events = testutil::random_soup(rng, opts);

    EngagementCorrelation corr;
    try {
      corr = revisit_engagement_correlation(events, max_day, horizon);
    } catch (const Error&) {
      continue;  // no user fit the cohort this draw
    }
    ++checked_trials;

    // Independent reassembly of the cohort, indicators and deltas.
    DayIndex first_day = day_index(events.front().timestamp), last_day = first_day;
    std::map<std::string, std::set<DayIndex>> days;
    for (const EventRecord& e : events) {
      first_day = std::min(first_day, day_index(e.timestamp));
      last_day = std::max(last_day, day_index(e.timestamp));
      days[e.user_id].insert(day_index(e.timestamp));
    }
    auto saves = derive_saves(events);
    std::map<std::string, DayIndex> s0;
    for (const auto& s : saves) {
      auto [it, inserted] = s0.emplace(s.user_id, s.save_day);
      if (!inserted) it->second = std::min(it->second, s.save_day);
    }
    std::map<std::string, std::array<DayIndex, 2>> min_off;
    for (const auto& p :
         testutil::oracle_join(saves, derive_revisit_events(events), max_day)) {
      if (p.save.save_day != s0.at(p.save.user_id)) continue;
      auto& slots = min_off.try_emplace(p.save.user_id, std::array<DayIndex, 2>{1 << 20, 1 << 20})
                        .first->second;
      auto k = static_cast<std::size_t>(p.revisit.kind);
      slots[k] = std::min(slots[k], p.day_offset());
    }
    std::vector<std::pair<std::string, DayIndex>> cohort;
    for (const auto& [user, anchor] : s0)
      if (anchor - horizon + 1 >= first_day && anchor + max_day + horizon <= last_day)
        cohort.emplace_back(user, anchor);

    REQUIRE(corr.n_users == static_cast<std::int64_t>(cohort.size()));
    auto active_in = [&](const std::string& user, DayIndex lo, DayIndex hi) {
      std::int64_t c = 0;
      for (DayIndex d : days.at(user))
        if (d > lo && d <= hi) ++c;
      return c;
    };
    for (DayIndex day = 0; day <= max_day; ++day) {
      std::vector<double> delta;
      for (const auto& [user, anchor] : cohort)
        delta.push_back(static_cast<double>(active_in(user, anchor + day, anchor + day + horizon) -
                                            active_in(user, anchor + day - horizon, anchor + day)));
      for (std::size_t k = 0; k < 2; ++k) {
        std::vector<double> ind;
        std::int64_t n_positive = 0;
        for (const auto& [user, anchor] : cohort) {
          auto it = min_off.find(user);
          bool hit = it != min_off.end() && it->second[k] <= day;
          ind.push_back(hit ? 1.0 : 0.0);
          n_positive += hit ? 1 : 0;
        }
        const CorrelationCell& cell = corr.cells[static_cast<std::size_t>(day)][k];
        CHECK(cell.n == corr.n_users);
        CHECK(cell.n_positive == n_positive);
        const auto n = static_cast<std::int64_t>(cohort.size());
        bool split_ok = n_positive >= 2 && n - n_positive >= 2;
        if (!split_ok) {
          CHECK(!cell.r.has_value());
          continue;
        }
        auto want = testutil::oracle_pearson(ind, delta);
        CHECK(cell.r.has_value() == want.has_value());
        if (cell.r && want) {
          CHECK(*cell.r == doctest::Approx(*want).epsilon(1e-10));
          REQUIRE(cell.ci.has_value());
          auto ci = fisher_z_interval(*cell.r, cell.n);
          CHECK(cell.ci->lo == ci->lo);
          CHECK(cell.ci->hi == ci->hi);
        }
      }
    }
  }
  // The soup is dense enough that most draws produce a usable cohort.
  CHECK(checked_trials >= 10);
}

TEST_CASE("engagement correlation needs a long enough log") {
  std::vector<EventRecord> events = {
      ev(day_ts(0, 100), "u1", "p1", Surface::RelatedPins, Action::Repin, "r1", Topic::Art, 0),
      ev(day_ts(1, 100), "u1", "p1", Surface::OwnProfile, Action::Impression),
  };
  CHECK(contains(error_of([&] { revisit_engagement_correlation(events, 6, 28); }), "too short"));
}

TEST_CASE("topic report, hand-checked two-topic fixture") {
  std::vector<EventRecord> events = {
      // Travel: pins t1, t2. Four impressions, two saves, two grid revisits.
      ev(day_ts(0, 100), "u1", "t1", Surface::RelatedPins, Action::Impression, "r1",
         Topic::Travel, 0),
      ev(day_ts(0, 101), "u1", "t1", Surface::RelatedPins, Action::Impression, "r2",
         Topic::Travel, 0),
      ev(day_ts(0, 110), "u1", "t1", Surface::RelatedPins, Action::Repin, "r1", Topic::Travel, 0),
      ev(day_ts(0, 120), "u1", "t1", Surface::OwnProfile, Action::GridClick, "", Topic::Travel),
      ev(day_ts(0, 200), "u2", "t2", Surface::RelatedPins, Action::Impression, "r3",
         Topic::Travel, 0),
      ev(day_ts(0, 201), "u2", "t2", Surface::RelatedPins, Action::Impression, "r4",
         Topic::Travel, 0),
      ev(day_ts(0, 210), "u2", "t2", Surface::RelatedPins, Action::Repin, "r3", Topic::Travel, 0),
      ev(day_ts(3, 50), "u2", "t2", Surface::OwnProfile, Action::GridClick, "", Topic::Travel),
      // Finance: pin f1. Two impressions, one save, one short grid revisit.
      ev(day_ts(0, 300), "u3", "f1", Surface::RelatedPins, Action::Impression, "r5",
         Topic::Finance, 0),
      ev(day_ts(0, 301), "u3", "f1", Surface::RelatedPins, Action::Impression, "r6",
         Topic::Finance, 0),
      ev(day_ts(0, 310), "u3", "f1", Surface::RelatedPins, Action::Repin, "r5", Topic::Finance, 0),
      ev(day_ts(1, 60), "u3", "f1", Surface::OwnProfile, Action::GridClick, "", Topic::Finance),
      // Art: present with zero impressions. The day-6 events pin last_day so
      // every save above has its full 7-day label window.
      ev(day_ts(6, 10), "u9", "t1", Surface::Other, Action::Click, "", Topic::Travel),
      ev(day_ts(6, 20), "u9", "a1", Surface::Other, Action::Click, "", Topic::Art),
  };
  auto saves = derive_saves(events);
  auto labels = build_labels(join_revisits(saves, derive_revisit_events(events), 6), saves);

  auto rows = topic_report(events, labels);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].topic == Topic::Travel);
  CHECK(rows[1].topic == Topic::Art);
  CHECK(rows[2].topic == Topic::Finance);

  const TopicReportRow& travel = rows[0];
  CHECK(travel.n_impressions == 4);
  CHECK(travel.n_repins == 2);
  CHECK(travel.n_labeled_saves == 2);
  CHECK(travel.grid_pairs_total == 2);
  CHECK(travel.grid_pairs_long == 1);  // the day-3 revisit of t2
  CHECK(travel.repin_rate == doctest::Approx(0.5));
  CHECK(travel.revisit_rate == doctest::Approx(1.0));
  CHECK(travel.revisit_grid_rate == doctest::Approx(1.0));
  CHECK(travel.long_short_ratio == doctest::Approx(0.5));
  CHECK(!travel.mean_p_rp_rv.has_value());          // no feeds supplied
  CHECK(!travel.repin_volume_lift_pct.has_value());

  const TopicReportRow& art = rows[1];
  CHECK(art.n_impressions == 0);
  CHECK(!art.repin_rate.has_value());
  CHECK(!art.revisit_rate.has_value());
  CHECK(!art.long_short_ratio.has_value());

  const TopicReportRow& finance = rows[2];
  CHECK(finance.repin_rate == doctest::Approx(0.5));
  CHECK(finance.grid_pairs_total == 1);
  CHECK(finance.long_short_ratio == doctest::Approx(0.0));

  SUBCASE("feeds add the model columns") {
    auto cand = [](const std::string& pin, double p_rv, std::uint8_t repin) {
      RankedCandidate c;
      c.pin_id = pin;
      c.probs[static_cast<std::size_t>(TaskId::RepinAndRevisit)] = p_rv;
      c.labels[static_cast<std::size_t>(TaskId::Repin)] = repin;
      return c;
    };
    std::vector<RankedFeed> feeds_a = {{"fr1", {cand("t1", 0.8, 1), cand("t2", 0.4, 1),
                                                cand("f1", 0.2, 0)}}};
    std::vector<RankedFeed> feeds_b = {{"fr1", {cand("f1", 0.1, 0), cand("t1", 0.3, 1),
                                                cand("t2", 0.5, 1)}}};
    auto with = topic_report(events, labels, &feeds_a, &feeds_b, 2);
    REQUIRE(with.size() == 3);
    CHECK(*with[0].mean_p_rp_rv == doctest::Approx(0.6));  // (0.8 + 0.4) / 2
    CHECK(*with[2].mean_p_rp_rv == doctest::Approx(0.2));
    // Top-2 repin labels: 2 for travel in feeds_a vs 1 in feeds_b.
    REQUIRE(with[0].repin_volume_lift_pct.has_value());
    CHECK(*with[0].repin_volume_lift_pct == doctest::Approx(100.0));
    CHECK(!with[2].repin_volume_lift_pct.has_value());  // finance baseline is 0
  }

  SUBCASE("a pin under two topics is an error") {
    auto bad = events;
    bad.push_back(ev(day_ts(1, 10), "u1", "t1", Surface::Other, Action::Click, "", Topic::Art));
    CHECK(contains(error_of([&] { topic_report(bad, labels); }), "appears under both"));
  }
  SUBCASE("a label for an unseen pin is an error") {
    auto bad_labels = labels;
    bad_labels[0].pin_id = "ghost";
    CHECK(contains(error_of([&] { topic_report(events, bad_labels); }), "absent from the log"));
  }
  SUBCASE("a feed candidate outside the log is an error") {
    RankedCandidate ghost;
    ghost.pin_id = "ghost";
    std::vector<RankedFeed> feeds = {{"fr1", {ghost}}};
    CHECK(contains(error_of([&] { topic_report(events, labels, &feeds); }), "absent"));
  }
  SUBCASE("top_k must be positive") {
    CHECK(!error_of([&] { topic_report(events, labels, nullptr, nullptr, 0); }).empty());
  }
}

TEST_CASE("long/short ratio reproduces an 80/19 planted split exactly") {
  // 99 single-save users with one grid revisit each: 80 short (day 1),
  // 19 long (day 4), plus one user who never returns.
  std::vector<EventRecord> events;
  for (int i = 0; i < 100; ++i) {
    std::string user = "u" + std::to_string(i);
    std::string pin = "q" + std::to_string(i);
    events.push_back(ev(day_ts(0, 100 + i), user, pin, Surface::RelatedPins, Action::Repin,
                        "r" + std::to_string(i), Topic::Quotes, 0));
    if (i >= 99) continue;
    DayIndex d = i < 80 ? 1 : 4;
    events.push_back(
        ev(day_ts(d, 200 + i), user, pin, Surface::OwnProfile, Action::GridClick, "", Topic::Quotes));
  }
  events.push_back(ev(day_ts(6, 5), "u0", "q0", Surface::Other, Action::Click, "", Topic::Quotes));

  auto saves = derive_saves(events);
  auto labels = build_labels(join_revisits(saves, derive_revisit_events(events), 6), saves);
  auto rows = topic_report(events, labels);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].grid_pairs_total == 99);
  CHECK(rows[0].grid_pairs_long == 19);
  REQUIRE(rows[0].long_short_ratio.has_value());
  CHECK(*rows[0].long_short_ratio == doctest::Approx(1.9 / 9.9).epsilon(1e-9));
}

TEST_CASE("plot CSVs carry the expected headers and shapes") {
  auto [saves, revisits] = derived(curve_fixture());
  testutil::TempDir dir("plots");

  auto curves = daily_revisit_user_fraction(saves, revisits, 2);
  write_fig3a_csv(curves, dir.file("fig3a.csv"));
  std::string fig3a = read_file(dir.file("fig3a.csv"));
  CHECK(contains(fig3a, "day,impression_fraction,grid_fraction,n_users"));
  write_fig3b_csv(daily_revisit_volume_fraction(saves, revisits, 2), dir.file("fig3b.csv"));
  CHECK(contains(read_file(dir.file("fig3b.csv")), "n_saves"));

  std::vector<EventRecord> act_events = {
      ev(day_ts(0, 100), "u1", "pa", Surface::RelatedPins, Action::Repin, "r1", Topic::Art, 0),
      ev(day_ts(1, 100), "u1", "pa", Surface::OwnProfile, Action::Impression),
      ev(day_ts(3, 100), "u1", "px", Surface::Other, Action::Click),
  };
  write_fig4_csv(activity_by_revisit_status(act_events, 1, 2), dir.file("fig4.csv"));
  std::string fig4 = read_file(dir.file("fig4.csv"));
  CHECK(contains(fig4, "active_days,revisited_users,not_revisited_users"));

  // fig5 rows always have six fields, defined cells or not.
  EngagementCorrelation corr;
  corr.max_day = 1;
  corr.horizon = 2;
  corr.n_users = 5;
  corr.cells.resize(2);
  corr.cells[0][0] = {0.5, fisher_z_interval(0.5, 5), 5, 3};
  corr.cells[0][1] = {std::nullopt, std::nullopt, 5, 0};
  corr.cells[1][0] = {std::nullopt, std::nullopt, 5, 1};
  corr.cells[1][1] = {0.1, fisher_z_interval(0.1, 5), 5, 2};
  write_fig5_csv(corr, dir.file("fig5.csv"));
  std::string fig5 = read_file(dir.file("fig5.csv"));
  CHECK(contains(fig5, "day,kind,r,ci_lo,ci_hi,n"));
  std::istringstream in(fig5);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) CHECK(split_csv(line).size() == 6);
  CHECK(contains(fig5, "0,grid_click,,,,5"));  // null r and ci stay empty
}

TEST_CASE("table3 sorts by ratio descending with absent ratios last") {
  auto mk = [](Topic t, std::optional<double> ratio, std::int64_t pairs) {
    TopicReportRow row;
    row.topic = t;
    row.long_short_ratio = ratio;
    row.grid_pairs_total = pairs;
    return row;
  };
  std::vector<TopicReportRow> rows = {
      mk(Topic::Health, 0.10, 10),
      mk(Topic::Travel, 0.50, 8),
      mk(Topic::Art, std::nullopt, 0),
      mk(Topic::Beauty, 0.50, 4),
      mk(Topic::EventPlanning, std::nullopt, 0),
  };
  testutil::TempDir dir("table3");
  write_table3_csv(rows, dir.file("table3.csv"));
  std::string text = read_file(dir.file("table3.csv"));

  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 6);
  CHECK(lines[0] == "topic,long_short_ratio,n_grid_pairs");
  CHECK(contains(lines[1], "travel,0.5"));  // ties break by topic order
  CHECK(contains(lines[2], "beauty,0.5"));
  CHECK(contains(lines[3], "health,0.1"));
  CHECK(contains(lines[4], "event_planning,,"));
  CHECK(contains(lines[5], "art,,"));

  write_fig8_csv(rows, dir.file("fig8.csv"));
  CHECK(contains(read_file(dir.file("fig8.csv")), "topic,mean_p_rp_rv,repin_volume_lift_pct"));
  write_fig9_csv(rows, dir.file("fig9.csv"));
  CHECK(contains(read_file(dir.file("fig9.csv")),
                 "topic,repin_rate,revisit_rate,revisit_grid_rate,n_impressions,n_labeled_saves"));
  write_topic_report_csv(rows, dir.file("topics.csv"));
  CHECK(contains(read_file(dir.file("topics.csv")), "topic,repin_rate,revisit_rate"));
}

}  // TEST_SUITE
