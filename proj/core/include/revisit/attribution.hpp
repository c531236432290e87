#pragma once

#include <optional>
#include <string>
#include <vector>

#include "revisit/types.hpp"

namespace revisit {

/// One save action, derived from a Repin event.
struct SaveRecord {
  std::string user_id;
  std::string pin_id;
  std::int64_t save_timestamp = 0;
  DayIndex save_day = 0;
  std::string request_id;
  Surface surface_of_save = Surface::RelatedPins;
  Topic topic = Topic::Unknown;

  bool operator==(const SaveRecord&) const = default;
};

enum class RevisitKind : std::uint8_t { ImpressionRevisit = 0, GridClickRevisit = 1 };

std::string_view to_token(RevisitKind k);
RevisitKind revisit_kind_from_token(std::string_view tok);

/// One own-profile return interaction with a pin.
struct RevisitEvent {
  std::string user_id;
  std::string pin_id;
  std::int64_t revisit_timestamp = 0;
  DayIndex revisit_day = 0;
  RevisitKind kind = RevisitKind::ImpressionRevisit;

  bool operator==(const RevisitEvent&) const = default;
};

/// A revisit attributed to the latest prior qualifying save.
struct AttributedRevisit {
  SaveRecord save;
  RevisitEvent revisit;

  /// Calendar-day offset of the revisit relative to the save.
  DayIndex day_offset() const { return revisit.revisit_day - save.save_day; }

  bool operator==(const AttributedRevisit&) const = default;
};

/// Per-save revisitation flags; `merged` is the training label for the
/// joint save-and-revisit head.
struct RevisitLabelRecord {
  std::string user_id;
  std::string pin_id;
  std::int64_t save_timestamp = 0;
  std::string request_id;
  bool flag_1d_rev_impre = false;
  bool flag_1d_rev_grid = false;
  bool flag_7d_rev_grid = false;
  bool merged = false;

  bool operator==(const RevisitLabelRecord&) const = default;
};

/// Extracts one SaveRecord per Repin event matching the surface filter
/// (no filter = all surfaces). Output sorted by (user_id, pin_id, timestamp).
std::vector<SaveRecord> derive_saves(const std::vector<EventRecord>& events,
                                     std::optional<Surface> surface_filter = Surface::RelatedPins);

/// Extracts own-profile Impression/GridClick events.
/// Output sorted by (user_id, pin_id, timestamp, kind).
std::vector<RevisitEvent> derive_revisit_events(const std::vector<EventRecord>& events);

/// Cross-surface, cross-session join. Emits one pair per revisit that has a
/// qualifying save: same (user, pin), save_ts < revisit_ts, and day offset
/// in [0, max_day_offset]. A revisit with several qualifying saves is
/// attributed to the latest prior one only. Inputs must be sorted as the
/// derive_* functions produce them; unsorted input raises an error.
/// max_day_offset is 6 for label construction and may be extended for
/// analysis (the behavior curves go out to day 9).
std::vector<AttributedRevisit> join_revisits(const std::vector<SaveRecord>& saves,
                                             const std::vector<RevisitEvent>& revisits,
                                             DayIndex max_day_offset = 6);

/// One label record per save (saves without revisits get all-false flags).
/// Throws if a pair references a save absent from `saves`.
std::vector<RevisitLabelRecord> build_labels(const std::vector<AttributedRevisit>& pairs,
                                             const std::vector<SaveRecord>& saves);

// Labels file: header then one row per record, booleans as 0|1.
inline constexpr std::string_view kLabelsHeader =
    "user_id,pin_id,save_ts,request_id,f_1d_imp,f_1d_grid,f_7d_grid,merged";

void write_labels_file(const std::vector<RevisitLabelRecord>& labels, const std::string& path);
std::vector<RevisitLabelRecord> parse_labels_file(const std::string& path);

// Attributed-pairs file: pipeline interchange between the join stage and
// the label constructor / feature stages.
inline constexpr std::string_view kPairsHeader =
    "user_id,pin_id,save_ts,save_day,request_id,save_surface,topic,"
    "revisit_ts,revisit_day,kind";

void write_pairs_file(const std::vector<AttributedRevisit>& pairs, const std::string& path);
std::vector<AttributedRevisit> parse_pairs_file(const std::string& path);

}  // namespace revisit
