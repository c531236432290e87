#include "revisit/analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "revisit/util.hpp"

namespace revisit {

namespace {

std::string save_identity(const SaveRecord& s) {
  std::string k;
  k.reserve(s.user_id.size() + s.pin_id.size() + s.request_id.size() + 24);
  k += s.user_id;
  k += '\x1f';
  k += s.pin_id;
  k += '\x1f';
  k += std::to_string(s.save_timestamp);
  k += '\x1f';
  k += s.request_id;
  return k;
}

DailyCurves daily_curves(const std::vector<SaveRecord>& saves,
                         const std::vector<RevisitEvent>& revisits, DayIndex max_day,
                         std::optional<DayIndex> last_day_hint, bool per_user) {
  if (max_day < 0) throw Error("daily revisit curves: max_day must be >= 0");
  if (saves.empty()) throw Error("daily revisit curves: no saves");

  DayIndex last_day = saves.front().save_day;
  for (const SaveRecord& s : saves) last_day = std::max(last_day, s.save_day);
  for (const RevisitEvent& r : revisits) last_day = std::max(last_day, r.revisit_day);
  if (last_day_hint) {
    if (*last_day_hint < last_day)
      throw Error("daily revisit curves: last_day precedes observed activity");
    last_day = *last_day_hint;
  }
  const DayIndex cutoff = last_day - max_day;

  DailyCurves curves;
  curves.max_day = max_day;
  auto n = static_cast<std::size_t>(max_day) + 1;
  curves.impression_count.assign(n, 0);
  curves.grid_count.assign(n, 0);
  curves.impression_fraction.assign(n, 0.0);
  curves.grid_fraction.assign(n, 0.0);

  // Eligibility filters the join output, not its input: dropping a later
  // (windowless) save before the join would re-attribute its revisits to an
  // earlier save.
  std::unordered_set<std::string> denom_keys;
  for (const SaveRecord& s : saves) {
    if (s.save_day > cutoff) continue;
    denom_keys.insert(per_user ? s.user_id : save_identity(s));
  }
  if (denom_keys.empty())
    throw Error("daily revisit curves: no saves with a full " + std::to_string(max_day) +
                "-day observation window");
  curves.denominator = static_cast<std::int64_t>(denom_keys.size());

  std::vector<std::unordered_set<std::string>> seen_imp(n);
  std::vector<std::unordered_set<std::string>> seen_grid(n);
  for (const AttributedRevisit& p : join_revisits(saves, revisits, max_day)) {
    if (p.save.save_day > cutoff) continue;
    auto d = static_cast<std::size_t>(p.day_offset());
    std::string key = per_user ? p.save.user_id : save_identity(p.save);
    if (p.revisit.kind == RevisitKind::ImpressionRevisit)
      seen_imp[d].insert(std::move(key));
    else
      seen_grid[d].insert(std::move(key));
  }
  for (std::size_t d = 0; d < n; ++d) {
    curves.impression_count[d] = static_cast<std::int64_t>(seen_imp[d].size());
    curves.grid_count[d] = static_cast<std::int64_t>(seen_grid[d].size());
    curves.impression_fraction[d] =
        static_cast<double>(curves.impression_count[d]) / static_cast<double>(curves.denominator);
    curves.grid_fraction[d] =
        static_cast<double>(curves.grid_count[d]) / static_cast<double>(curves.denominator);
  }
  return curves;
}

// Distinct event days per user, sorted, for windowed activity counts.
std::unordered_map<std::string, std::vector<DayIndex>> active_days_by_user(
    const std::vector<EventRecord>& events) {
  std::unordered_map<std::string, std::vector<DayIndex>> days;
  for (const EventRecord& e : events) days[e.user_id].push_back(day_index(e.timestamp));
  for (auto& [user, d] : days) {
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
  }
  return days;
}

// Count of distinct active days in (lo, hi].
std::int64_t active_in(const std::vector<DayIndex>& days, DayIndex lo, DayIndex hi) {
  auto first = std::upper_bound(days.begin(), days.end(), lo);
  auto last = std::upper_bound(days.begin(), days.end(), hi);
  return last - first;
}

std::unordered_map<std::string, DayIndex> first_save_day(const std::vector<SaveRecord>& saves) {
  std::unordered_map<std::string, DayIndex> s0;
  for (const SaveRecord& s : saves) {
    auto [it, inserted] = s0.emplace(s.user_id, s.save_day);
    if (!inserted) it->second = std::min(it->second, s.save_day);
  }
  return s0;
}

}  // namespace

DailyCurves daily_revisit_user_fraction(const std::vector<SaveRecord>& saves,
                                        const std::vector<RevisitEvent>& revisits,
                                        DayIndex max_day, std::optional<DayIndex> last_day) {
  return daily_curves(saves, revisits, max_day, last_day, /*per_user=*/true);
}

DailyCurves daily_revisit_volume_fraction(const std::vector<SaveRecord>& saves,
                                          const std::vector<RevisitEvent>& revisits,
                                          DayIndex max_day, std::optional<DayIndex> last_day) {
  return daily_curves(saves, revisits, max_day, last_day, /*per_user=*/false);
}

ActivityReport activity_by_revisit_status(const std::vector<EventRecord>& events, DayIndex t,
                                          int horizon) {
  if (t < 0) throw Error("activity report: t must be >= 0");
  if (horizon < 1) throw Error("activity report: horizon must be >= 1");
  if (events.empty()) throw Error("activity report: no events");

  DayIndex last_day = day_index(events.front().timestamp);
  for (const EventRecord& e : events) last_day = std::max(last_day, day_index(e.timestamp));

  auto saves = derive_saves(events);
  if (saves.empty()) throw Error("activity report: log has no saves");
  auto s0 = first_save_day(saves);
  auto pairs = join_revisits(saves, derive_revisit_events(events), t);

  std::unordered_set<std::string> revisited;
  for (const AttributedRevisit& p : pairs) {
    if (p.save.save_day == s0.at(p.save.user_id)) revisited.insert(p.save.user_id);
  }

  auto days = active_days_by_user(events);

  ActivityReport report;
  report.t = t;
  report.horizon = horizon;
  report.revisited_hist.assign(static_cast<std::size_t>(horizon) + 1, 0);
  report.not_revisited_hist.assign(static_cast<std::size_t>(horizon) + 1, 0);
  std::int64_t sum_rev = 0;
  std::int64_t sum_not = 0;
  for (const auto& [user, anchor] : s0) {
    if (anchor + t + horizon > last_day) {
      ++report.n_skipped;
      continue;
    }
    std::int64_t active = active_in(days.at(user), anchor + t, anchor + t + horizon);
    if (revisited.count(user) != 0) {
      ++report.revisited_hist[static_cast<std::size_t>(active)];
      ++report.n_revisited;
      sum_rev += active;
    } else {
      ++report.not_revisited_hist[static_cast<std::size_t>(active)];
      ++report.n_not_revisited;
      sum_not += active;
    }
  }
  if (report.n_revisited + report.n_not_revisited == 0)
    throw Error("activity report: log horizon too short; no user fits first-save day + " +
                std::to_string(t) + " + " + std::to_string(horizon) + " days");
  if (report.n_revisited > 0)
    report.mean_active_revisited =
        static_cast<double>(sum_rev) / static_cast<double>(report.n_revisited);
  if (report.n_not_revisited > 0)
    report.mean_active_not_revisited =
        static_cast<double>(sum_not) / static_cast<double>(report.n_not_revisited);
  return report;
}

std::optional<double> point_biserial(const std::vector<std::uint8_t>& indicator,
                                     const std::vector<double>& values) {
  if (indicator.size() != values.size())
    throw Error("point_biserial: indicator and values lengths differ");
  const std::size_t n = indicator.size();
  std::size_t n1 = 0;
  for (std::uint8_t x : indicator) n1 += x != 0 ? 1 : 0;
  if (n1 < 2 || n - n1 < 2) return std::nullopt;

  double mean_x = static_cast<double>(n1) / static_cast<double>(n);
  double mean_y = 0.0;
  for (double y : values) mean_y += y;
  mean_y /= static_cast<double>(n);

  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = (indicator[i] != 0 ? 1.0 : 0.0) - mean_x;
    double dy = values[i] - mean_y;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::optional<ConfidenceInterval> fisher_z_interval(double r, std::int64_t n) {
  if (n < 4) return std::nullopt;
  constexpr double kLimit = 1.0 - 1e-15;
  constexpr double kZ975 = 1.959963984540054;  // standard normal 97.5% quantile
  double rc = std::clamp(r, -kLimit, kLimit);
  double z = std::atanh(rc);
  double se = 1.0 / std::sqrt(static_cast<double>(n - 3));
  return ConfidenceInterval{std::tanh(z - kZ975 * se), std::tanh(z + kZ975 * se)};
}

EngagementCorrelation revisit_engagement_correlation(const std::vector<EventRecord>& events,
                                                     DayIndex max_day, int horizon) {
  if (max_day < 0) throw Error("engagement correlation: max_day must be >= 0");
  if (horizon < 1) throw Error("engagement correlation: horizon must be >= 1");
  if (events.empty()) throw Error("engagement correlation: no events");

  DayIndex first_day = day_index(events.front().timestamp);
  DayIndex last_day = first_day;
  for (const EventRecord& e : events) {
    first_day = std::min(first_day, day_index(e.timestamp));
    last_day = std::max(last_day, day_index(e.timestamp));
  }

  auto saves = derive_saves(events);
  if (saves.empty()) throw Error("engagement correlation: log has no saves");
  auto s0 = first_save_day(saves);
  auto pairs = join_revisits(saves, derive_revisit_events(events), max_day);

  // Earliest revisit offset per (user, kind), restricted to first-day saves.
  constexpr DayIndex kNone = std::numeric_limits<DayIndex>::max();
  std::unordered_map<std::string, std::array<DayIndex, 2>> min_offset;
  for (const AttributedRevisit& p : pairs) {
    if (p.save.save_day != s0.at(p.save.user_id)) continue;
    auto& slots = min_offset.try_emplace(p.save.user_id, std::array<DayIndex, 2>{kNone, kNone})
                      .first->second;
    auto k = static_cast<std::size_t>(p.revisit.kind);
    slots[k] = std::min(slots[k], p.day_offset());
  }

  std::vector<std::pair<std::string, DayIndex>> cohort;
  for (const auto& [user, anchor] : s0) {
    if (anchor - horizon + 1 < first_day) continue;
    if (anchor + max_day + horizon > last_day) continue;
    cohort.emplace_back(user, anchor);
  }
  if (cohort.empty())
    throw Error("engagement correlation: log horizon too short; no user has both " +
                std::to_string(horizon) + "-day windows in range");
  std::sort(cohort.begin(), cohort.end());

  auto days = active_days_by_user(events);

  EngagementCorrelation corr;
  corr.max_day = max_day;
  corr.horizon = horizon;
  corr.n_users = static_cast<std::int64_t>(cohort.size());
  corr.cells.resize(static_cast<std::size_t>(max_day) + 1);

  std::vector<double> delta(cohort.size());
  std::vector<std::uint8_t> indicator(cohort.size());
  for (DayIndex day = 0; day <= max_day; ++day) {
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      const auto& [user, anchor] = cohort[i];
      const auto& d = days.at(user);
      delta[i] = static_cast<double>(active_in(d, anchor + day, anchor + day + horizon) -
                                     active_in(d, anchor + day - horizon, anchor + day));
    }
    for (std::size_t k = 0; k < 2; ++k) {
      for (std::size_t i = 0; i < cohort.size(); ++i) {
        auto it = min_offset.find(cohort[i].first);
        indicator[i] = it != min_offset.end() && it->second[k] <= day ? 1 : 0;
      }
      CorrelationCell cell;
      cell.n = corr.n_users;
      for (std::uint8_t x : indicator) cell.n_positive += x;
      cell.r = point_biserial(indicator, delta);
      if (cell.r) cell.ci = fisher_z_interval(*cell.r, cell.n);
      corr.cells[static_cast<std::size_t>(day)][k] = cell;
    }
  }
  return corr;
}

std::vector<TopicReportRow> topic_report(const std::vector<EventRecord>& events,
                                         const std::vector<RevisitLabelRecord>& labels,
                                         const std::vector<RankedFeed>* feeds_a,
                                         const std::vector<RankedFeed>* feeds_b, int top_k) {
  if (top_k < 1) throw Error("topic report: top_k must be >= 1");
  if (events.empty()) throw Error("topic report: no events");

  DayIndex last_day = day_index(events.front().timestamp);
  for (const EventRecord& e : events) last_day = std::max(last_day, day_index(e.timestamp));

  std::unordered_map<std::string, Topic> pin_topic;
  constexpr std::size_t kRows = kTopicCount + 1;  // + Unknown
  std::array<bool, kRows> present{};
  std::array<std::int64_t, kRows> impressions{};
  std::array<std::int64_t, kRows> repins{};
  for (const EventRecord& e : events) {
    auto ti = static_cast<std::size_t>(e.topic);
    present[ti] = true;
    auto [it, inserted] = pin_topic.emplace(e.pin_id, e.topic);
    if (!inserted && it->second != e.topic)
      throw Error("topic report: pin " + e.pin_id + " appears under both topic \"" +
                  std::string(to_token(it->second)) + "\" and \"" +
                  std::string(to_token(e.topic)) + "\"");
    if (e.action == Action::Impression) ++impressions[ti];
    if (e.action == Action::Repin) ++repins[ti];
  }

  // Label rates over saves old enough to have the whole 7-day revisit window.
  std::array<std::int64_t, kRows> labeled{};
  std::array<std::int64_t, kRows> labeled_merged{};
  std::array<std::int64_t, kRows> labeled_grid{};
  for (const RevisitLabelRecord& rec : labels) {
    auto it = pin_topic.find(rec.pin_id);
    if (it == pin_topic.end())
      throw Error("topic report: label references pin " + rec.pin_id + " absent from the log");
    if (day_index(rec.save_timestamp) + 6 > last_day) continue;
    auto ti = static_cast<std::size_t>(it->second);
    ++labeled[ti];
    labeled_merged[ti] += rec.merged ? 1 : 0;
    labeled_grid[ti] += rec.flag_7d_rev_grid ? 1 : 0;
  }

  std::array<std::int64_t, kRows> grid_total{};
  std::array<std::int64_t, kRows> grid_long{};
  auto saves = derive_saves(events);
  for (const AttributedRevisit& p : join_revisits(saves, derive_revisit_events(events), 6)) {
    if (p.revisit.kind != RevisitKind::GridClickRevisit) continue;
    if (p.save.save_day + 6 > last_day) continue;
    auto ti = static_cast<std::size_t>(p.save.topic);
    ++grid_total[ti];
    if (p.day_offset() >= 3) ++grid_long[ti];
  }

  std::array<double, kRows> p_sum{};
  std::array<std::int64_t, kRows> p_cnt{};
  std::array<std::int64_t, kRows> top_a{};
  std::array<std::int64_t, kRows> top_b{};
  auto scan_feeds = [&](const std::vector<RankedFeed>& feeds, std::array<std::int64_t, kRows>& top,
                        bool accumulate_probs) {
    for (const RankedFeed& feed : feeds) {
      for (std::size_t i = 0; i < feed.candidates.size(); ++i) {
        const RankedCandidate& c = feed.candidates[i];
        auto it = pin_topic.find(c.pin_id);
        if (it == pin_topic.end())
          throw Error("topic report: feed candidate pin " + c.pin_id + " absent from the log");
        auto ti = static_cast<std::size_t>(it->second);
        if (accumulate_probs) {
          p_sum[ti] += c.probs[static_cast<std::size_t>(TaskId::RepinAndRevisit)];
          ++p_cnt[ti];
        }
        if (i < static_cast<std::size_t>(top_k) &&
            c.labels[static_cast<std::size_t>(TaskId::Repin)] != 0)
          ++top[ti];
      }
    }
  };
  if (feeds_a != nullptr) scan_feeds(*feeds_a, top_a, true);
  if (feeds_b != nullptr) scan_feeds(*feeds_b, top_b, false);

  std::vector<TopicReportRow> rows;
  for (std::size_t ti = 0; ti < kRows; ++ti) {
    if (!present[ti]) continue;
    TopicReportRow row;
    row.topic = static_cast<Topic>(ti);
    row.n_impressions = impressions[ti];
    row.n_repins = repins[ti];
    row.n_labeled_saves = labeled[ti];
    row.grid_pairs_total = grid_total[ti];
    row.grid_pairs_long = grid_long[ti];
    if (impressions[ti] == 0) {
      rows.push_back(std::move(row));
      continue;
    }
    row.repin_rate = static_cast<double>(repins[ti]) / static_cast<double>(impressions[ti]);
    if (labeled[ti] > 0) {
      row.revisit_rate =
          static_cast<double>(labeled_merged[ti]) / static_cast<double>(labeled[ti]);
      row.revisit_grid_rate =
          static_cast<double>(labeled_grid[ti]) / static_cast<double>(labeled[ti]);
    }
    if (grid_total[ti] > 0)
      row.long_short_ratio =
          static_cast<double>(grid_long[ti]) / static_cast<double>(grid_total[ti]);
    if (feeds_a != nullptr && p_cnt[ti] > 0)
      row.mean_p_rp_rv = p_sum[ti] / static_cast<double>(p_cnt[ti]);
    if (feeds_a != nullptr && feeds_b != nullptr && top_b[ti] > 0)
      row.repin_volume_lift_pct = 100.0 * static_cast<double>(top_a[ti] - top_b[ti]) /
                                  static_cast<double>(top_b[ti]);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string opt_field(const std::optional<double>& v) {
  return v ? format_real(*v) : std::string();
}

void write_daily_csv(const DailyCurves& curves, const char* denom_name,
                     const std::string& path) {
  std::ostringstream out;
  out << "day,impression_fraction,grid_fraction," << denom_name << '\n';
  for (DayIndex d = 0; d <= curves.max_day; ++d) {
    auto i = static_cast<std::size_t>(d);
    out << d << ',' << format_real(curves.impression_fraction[i]) << ','
        << format_real(curves.grid_fraction[i]) << ',' << curves.denominator << '\n';
  }
  write_file_atomic(path, out.str());
}

}  // namespace

void write_fig3a_csv(const DailyCurves& curves, const std::string& path) {
  write_daily_csv(curves, "n_users", path);
}

void write_fig3b_csv(const DailyCurves& curves, const std::string& path) {
  write_daily_csv(curves, "n_saves", path);
}

void write_fig4_csv(const ActivityReport& report, const std::string& path) {
  std::ostringstream out;
  out << "active_days,revisited_users,not_revisited_users\n";
  for (std::size_t i = 0; i < report.revisited_hist.size(); ++i)
    out << i << ',' << report.revisited_hist[i] << ',' << report.not_revisited_hist[i] << '\n';
  write_file_atomic(path, out.str());
}

void write_fig5_csv(const EngagementCorrelation& corr, const std::string& path) {
  std::ostringstream out;
  out << "day,kind,r,ci_lo,ci_hi,n\n";
  for (DayIndex day = 0; day <= corr.max_day; ++day) {
    for (std::size_t k = 0; k < 2; ++k) {
      const CorrelationCell& cell = corr.cells[static_cast<std::size_t>(day)][k];
      out << day << ',' << to_token(static_cast<RevisitKind>(k)) << ','
          << opt_field(cell.r) << ',';
      if (cell.ci)
        out << format_real(cell.ci->lo) << ',' << format_real(cell.ci->hi);
      else
        out << ',';
      out << ',' << cell.n << '\n';
    }
  }
  write_file_atomic(path, out.str());
}

void write_topic_report_csv(const std::vector<TopicReportRow>& rows, const std::string& path) {
  std::ostringstream out;
  out << "topic,repin_rate,revisit_rate,revisit_grid_rate,long_short_ratio,mean_p_rp_rv,"
         "repin_volume_lift_pct,n_impressions,n_repins,n_labeled_saves,n_grid_pairs,"
         "n_grid_pairs_long\n";
  for (const TopicReportRow& row : rows) {
    out << to_token(row.topic) << ',' << opt_field(row.repin_rate) << ','
        << opt_field(row.revisit_rate) << ',' << opt_field(row.revisit_grid_rate) << ','
        << opt_field(row.long_short_ratio) << ',' << opt_field(row.mean_p_rp_rv) << ','
        << opt_field(row.repin_volume_lift_pct) << ',' << row.n_impressions << ','
        << row.n_repins << ',' << row.n_labeled_saves << ',' << row.grid_pairs_total << ','
        << row.grid_pairs_long << '\n';
  }
  write_file_atomic(path, out.str());
}

void write_fig8_csv(const std::vector<TopicReportRow>& rows, const std::string& path) {
  std::ostringstream out;
  out << "topic,mean_p_rp_rv,repin_volume_lift_pct\n";
  for (const TopicReportRow& row : rows)
    out << to_token(row.topic) << ',' << opt_field(row.mean_p_rp_rv) << ','
        << opt_field(row.repin_volume_lift_pct) << '\n';
  write_file_atomic(path, out.str());
}

void write_fig9_csv(const std::vector<TopicReportRow>& rows, const std::string& path) {
  std::ostringstream out;
  out << "topic,repin_rate,revisit_rate,revisit_grid_rate,n_impressions,n_labeled_saves\n";
  for (const TopicReportRow& row : rows)
    out << to_token(row.topic) << ',' << opt_field(row.repin_rate) << ','
        << opt_field(row.revisit_rate) << ',' << opt_field(row.revisit_grid_rate) << ','
        << row.n_impressions << ',' << row.n_labeled_saves << '\n';
  write_file_atomic(path, out.str());
}

void write_table3_csv(const std::vector<TopicReportRow>& rows, const std::string& path) {
  std::vector<const TopicReportRow*> order;
  order.reserve(rows.size());
  for (const TopicReportRow& row : rows) order.push_back(&row);
  std::stable_sort(order.begin(), order.end(), [](const TopicReportRow* a,
                                                  const TopicReportRow* b) {
    if (a->long_short_ratio.has_value() != b->long_short_ratio.has_value())
      return a->long_short_ratio.has_value();
    if (a->long_short_ratio.has_value() && *a->long_short_ratio != *b->long_short_ratio)
      return *a->long_short_ratio > *b->long_short_ratio;
    return a->topic < b->topic;
  });
  std::ostringstream out;
  out << "topic,long_short_ratio,n_grid_pairs\n";
  for (const TopicReportRow* row : order)
    out << to_token(row->topic) << ',' << opt_field(row->long_short_ratio) << ','
        << row->grid_pairs_total << '\n';
  write_file_atomic(path, out.str());
}

}  // namespace revisit
