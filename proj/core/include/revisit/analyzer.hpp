#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "revisit/attribution.hpp"
#include "revisit/evaluator.hpp"
#include "revisit/types.hpp"

namespace revisit {

/// Per-day revisit curves. Only saves with a full observation window count
/// (save_day <= last_day - max_day); later saves cannot show the whole curve
/// and would bias the tail downward.
struct DailyCurves {
  DayIndex max_day = 9;
  std::int64_t denominator = 0;  // users or saves, depending on the operation
  std::vector<std::int64_t> impression_count;  // size max_day + 1, index = day offset
  std::vector<std::int64_t> grid_count;
  std::vector<double> impression_fraction;
  std::vector<double> grid_fraction;
};

/// Fraction of saving users with at least one attributed revisit at exactly
/// offset d, per revisit kind. Inputs must be ordered as the derive_*
/// functions produce them. last_day defaults to the latest save or revisit
/// day present; pass the log's true last day when revisits are sparse.
DailyCurves daily_revisit_user_fraction(const std::vector<SaveRecord>& saves,
                                        const std::vector<RevisitEvent>& revisits,
                                        DayIndex max_day = 9,
                                        std::optional<DayIndex> last_day = std::nullopt);

/// Fraction of saves with at least one attributed revisit at exactly offset d,
/// per revisit kind.
DailyCurves daily_revisit_volume_fraction(const std::vector<SaveRecord>& saves,
                                          const std::vector<RevisitEvent>& revisits,
                                          DayIndex max_day = 9,
                                          std::optional<DayIndex> last_day = std::nullopt);

/// Activity distribution split by revisit status. Each saving user is
/// anchored at their first save day s0; "revisited" means some pin saved on
/// s0 drew an own-profile revisit within t days. Active days are distinct
/// event days in (s0 + t, s0 + t + horizon]. Users whose window overruns the
/// log are skipped and counted.
struct ActivityReport {
  DayIndex t = 6;
  int horizon = 28;
  std::vector<std::int64_t> revisited_hist;  // index = active-day count, size horizon + 1
  std::vector<std::int64_t> not_revisited_hist;
  std::int64_t n_revisited = 0;
  std::int64_t n_not_revisited = 0;
  std::int64_t n_skipped = 0;
  double mean_active_revisited = 0.0;
  double mean_active_not_revisited = 0.0;
};

ActivityReport activity_by_revisit_status(const std::vector<EventRecord>& events, DayIndex t,
                                          int horizon = 28);

/// Pearson correlation between a binary indicator and a numeric outcome.
/// Undefined (nullopt) when either indicator group has < 2 members or the
/// outcome has zero variance.
std::optional<double> point_biserial(const std::vector<std::uint8_t>& indicator,
                                     const std::vector<double>& values);

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
};

/// 95% interval for a correlation via the Fisher z-transform; needs n >= 4.
/// r is clamped away from +-1 so atanh stays finite.
std::optional<ConfidenceInterval> fisher_z_interval(double r, std::int64_t n);

struct CorrelationCell {
  std::optional<double> r;
  std::optional<ConfidenceInterval> ci;
  std::int64_t n = 0;
  std::int64_t n_positive = 0;
};

/// Per-day, per-kind correlation between "revisited by day X via kind" and
/// the change in active days across two adjacent horizon-length windows:
/// delta = active(s0 + X, s0 + X + horizon] - active(s0 + X - horizon, s0 + X].
/// One cohort serves every cell: users whose first save day s0 satisfies
/// s0 - horizon + 1 >= first_day and s0 + max_day + horizon <= last_day, so
/// the per-day estimates are comparable.
struct EngagementCorrelation {
  DayIndex max_day = 6;
  int horizon = 28;
  std::int64_t n_users = 0;
  std::vector<std::array<CorrelationCell, 2>> cells;  // [day][RevisitKind]
};

EngagementCorrelation revisit_engagement_correlation(const std::vector<EventRecord>& events,
                                                     DayIndex max_day = 6, int horizon = 28);

/// Per-topic behavioral summary. Counts are always filled; rates are null
/// when their denominator is zero, and every rate is null for a topic with
/// zero impressions.
struct TopicReportRow {
  Topic topic = Topic::Unknown;
  std::int64_t n_impressions = 0;
  std::int64_t n_repins = 0;
  std::int64_t n_labeled_saves = 0;   // saves with a full 7-day window
  std::int64_t grid_pairs_total = 0;  // attributed grid revisits at offsets 0..6
  std::int64_t grid_pairs_long = 0;   // offsets 3..6
  std::optional<double> repin_rate;
  std::optional<double> revisit_rate;       // merged-flag rate over labeled saves
  std::optional<double> revisit_grid_rate;  // 7-day grid-flag rate
  std::optional<double> long_short_ratio;   // grid_pairs_long / grid_pairs_total
  std::optional<double> mean_p_rp_rv;       // over feeds_a candidates; needs feeds_a
  std::optional<double> repin_volume_lift_pct;  // top_k repin labels, feeds_a vs feeds_b
};

/// One row per topic present in the log, in topic order. labels must come
/// from the same log (a label whose pin is absent raises an error, as does a
/// pin appearing under two topics). feeds_a/feeds_b are optional; the lift
/// column needs both.
std::vector<TopicReportRow> topic_report(const std::vector<EventRecord>& events,
                                         const std::vector<RevisitLabelRecord>& labels,
                                         const std::vector<RankedFeed>* feeds_a = nullptr,
                                         const std::vector<RankedFeed>* feeds_b = nullptr,
                                         int top_k = 3);

// Full topic report: every rate with its denominators, one row per topic.
void write_topic_report_csv(const std::vector<TopicReportRow>& rows, const std::string& path);

// Plot-data writers, one CSV per figure. Null values become empty fields.
void write_fig3a_csv(const DailyCurves& curves, const std::string& path);
void write_fig3b_csv(const DailyCurves& curves, const std::string& path);
void write_fig4_csv(const ActivityReport& report, const std::string& path);
void write_fig5_csv(const EngagementCorrelation& corr, const std::string& path);
void write_fig8_csv(const std::vector<TopicReportRow>& rows, const std::string& path);
void write_fig9_csv(const std::vector<TopicReportRow>& rows, const std::string& path);
// Sorted by long/short ratio, highest first, null ratios last.
void write_table3_csv(const std::vector<TopicReportRow>& rows, const std::string& path);

}  // namespace revisit
