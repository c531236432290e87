#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "revisit/attribution.hpp"
#include "revisit/types.hpp"

namespace revisit {

/// The five revisitation popularity families. Rp* families count revisits
/// attributed (by join_revisits) to saves made on RelatedPins; Overall*
/// families count own-profile interactions on any pin the acting user saved
/// earlier on any surface, with no day-gap limit.
enum class FeatureFamily : std::uint8_t {
  Rp1dRevImpre = 0,
  Rp1dRevGrid = 1,
  Rp7dRevGrid = 2,
  OverallRevImpre = 3,
  OverallRevGrid = 4,
};
inline constexpr int kFeatureFamilyCount = 5;
inline constexpr FeatureFamily kAllFeatureFamilies[] = {
    FeatureFamily::Rp1dRevImpre,    FeatureFamily::Rp1dRevGrid, FeatureFamily::Rp7dRevGrid,
    FeatureFamily::OverallRevImpre, FeatureFamily::OverallRevGrid,
};

std::string_view to_token(FeatureFamily f);
FeatureFamily feature_family_from_token(std::string_view tok);

inline constexpr int kWindowDays[] = {7, 30, 90};

/// Refresh cadence: 7-day windows daily, 30-day every 3 days, 90-day weekly.
int cadence_for_window(int window_days);

struct QualifyingTriple {
  std::string pin_id;
  std::string user_id;
  DayIndex day = 0;

  bool operator==(const QualifyingTriple&) const = default;
};

struct WindowCounts {
  std::int64_t action_count = 0;
  std::int64_t unique_user_count = 0;

  bool operator==(const WindowCounts&) const = default;
};

struct PinPerfFeature {
  std::string pin_id;
  FeatureFamily family = FeatureFamily::Rp1dRevImpre;
  int window_days = 7;
  DayIndex as_of_day = 0;
  std::int64_t action_count = 0;
  std::int64_t unique_user_count = 0;

  bool operator==(const PinPerfFeature&) const = default;
};

struct RefreshTask {
  DayIndex as_of_day = 0;
  int window_days = 7;

  bool operator==(const RefreshTask&) const = default;
};

/// (pin, user, day) triples matching the family definition. Rp* families
/// need the attribution join output (pass it via `join_output`; null is an
/// error for them). Output sorted by (day, pin_id, user_id); duplicates are
/// kept because action_count counts events, not distinct users.
std::vector<QualifyingTriple> qualifying_events(const std::vector<EventRecord>& events,
                                                const std::vector<AttributedRevisit>* join_output,
                                                FeatureFamily family);

/// Exact windowed counts over triples with day in
/// [as_of_day - window_days + 1, as_of_day]. Shards by pin hash when the
/// input is large; shard merge is a disjoint map union, so the result does
/// not depend on the worker count.
std::map<std::string, WindowCounts> aggregate_window(const std::vector<QualifyingTriple>& triples,
                                                     int window_days, DayIndex as_of_day);

/// All (as_of_day, window) refresh tasks for the inclusive day range,
/// anchored at first_day. Ordered by day then window.
std::vector<RefreshTask> refresh_plan(DayIndex first_day, DayIndex last_day);

/// Fraction of candidate pins with a positive action_count anywhere in the
/// table. Empty candidate set is an error.
double coverage(const std::vector<PinPerfFeature>& table,
                const std::vector<std::string>& candidate_pins);

/// Runs every family through every refresh task for [first_day, last_day].
/// `rp_pairs` must come from join_revisits over RelatedPins saves. Rows with
/// action_count = 0 are omitted (lookups default to zero). Output sorted by
/// (family, window, as_of_day, pin_id).
std::vector<PinPerfFeature> build_feature_tables(const std::vector<EventRecord>& events,
                                                 const std::vector<AttributedRevisit>& rp_pairs,
                                                 DayIndex first_day, DayIndex last_day);

/// Point-in-time view over built tables. A request on day D sees the latest
/// refresh with as_of_day <= D - 1, per the window's cadence; anything
/// earlier than the anchor yields zeros.
class FeatureStore {
 public:
  FeatureStore() = default;
  FeatureStore(std::vector<PinPerfFeature> rows, DayIndex anchor_day);

  /// Counts for (pin, family, window) as visible on request_day.
  WindowCounts lookup(const std::string& pin_id, FeatureFamily family, int window_days,
                      DayIndex request_day) const;

  DayIndex anchor_day() const { return anchor_day_; }
  std::size_t row_count() const { return row_count_; }

 private:
  struct TableKey {
    int family = 0;
    int window = 0;
    DayIndex as_of = 0;
    bool operator<(const TableKey& o) const {
      if (family != o.family) return family < o.family;
      if (window != o.window) return window < o.window;
      return as_of < o.as_of;
    }
  };
  std::map<TableKey, std::unordered_map<std::string, WindowCounts>> tables_;
  DayIndex anchor_day_ = 0;
  std::size_t row_count_ = 0;
};

inline constexpr std::string_view kFeatureTableHeader =
    "pin_id,family,window,as_of_day,action_count,unique_users";

void write_feature_table(const std::vector<PinPerfFeature>& rows, const std::string& path);
std::vector<PinPerfFeature> parse_feature_table(const std::string& path);

}  // namespace revisit
