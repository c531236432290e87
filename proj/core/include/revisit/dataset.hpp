#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "revisit/attribution.hpp"
#include "revisit/loggen.hpp"
#include "revisit/perf_features.hpp"
#include "revisit/types.hpp"

namespace revisit {

/// Per-(request, candidate) action booleans extracted from RelatedPins
/// events. rp_rv stays false until attach_revisit_label.
struct ActionLabelRow {
  std::string request_id;
  std::string pin_id;
  std::string user_id;
  std::int64_t impression_ts = 0;
  DayIndex request_day = 0;
  Topic topic = Topic::Unknown;
  bool grid_click = false;
  bool repin = false;
  bool click = false;
  bool long_click = false;
  std::int64_t repin_ts = 0;  // meaningful only when repin
  bool rp_rv = false;

  bool operator==(const ActionLabelRow&) const = default;
};

/// One row per impressed (request, candidate), sorted by
/// (request_id, pin_id). A RelatedPins action without an impression for the
/// same (request, pin) is an integrity error.
std::vector<ActionLabelRow> extract_action_labels(const std::vector<EventRecord>& events);

/// Adds the merged revisit flag to the save's originating row. Throws when a
/// label's (request, pin) has no row, the row has no Repin, or the label's
/// user/save_ts disagree with the row.
std::vector<ActionLabelRow> attach_revisit_label(std::vector<ActionLabelRow> rows,
                                                 const std::vector<RevisitLabelRecord>& labels);

inline constexpr int kAppendedPerfFeatureCount =
    kFeatureFamilyCount * 3 * 2;  // families x windows x (actions, uniques)

struct TrainingExample {
  std::string request_id;
  std::string pin_id;
  std::string user_id;
  DayIndex request_day = 0;  // carried in memory, not serialized
  std::vector<double> features;
  std::array<std::uint8_t, kTaskCount> labels{};  // TaskId order

  bool operator==(const TrainingExample&) const = default;
};

struct Dataset {
  std::vector<TrainingExample> rows;
  std::int64_t feature_dim = 0;  // total = sidecar dim + appended
};

/// Joins sidecar features, point-in-time perf counts, and labels into the
/// training layout: sidecar coordinates then, per family in enum order and
/// window in (7, 30, 90), log1p(action_count) and log1p(unique_users).
/// Rows sorted by (request_id, pin_id). Missing perf rows contribute zeros;
/// a missing sidecar row or a sidecar dim mismatch is an error.
Dataset assemble(const std::vector<SidecarRow>& sidecar, const FeatureStore& store,
                 const std::vector<ActionLabelRow>& rows, std::int64_t sidecar_dim);

std::string dataset_header(std::int64_t feature_dim);
void write_dataset(const Dataset& dataset, const std::string& path);
Dataset parse_dataset(const std::string& path);

// Internal interchange for the extraction stage.
inline constexpr std::string_view kActionLabelsHeader =
    "request_id,pin_id,user_id,impression_ts,topic,y_grid,y_repin,y_click,y_longclick,"
    "repin_ts,y_rp_rv";

void write_action_labels(const std::vector<ActionLabelRow>& rows, const std::string& path);
std::vector<ActionLabelRow> parse_action_labels(const std::string& path);

}  // namespace revisit
