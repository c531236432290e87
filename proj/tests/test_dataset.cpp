#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "revisit/attribution.hpp"
#include "revisit/dataset.hpp"
#include "revisit/loggen.hpp"
#include "revisit/perf_features.hpp"
#include "revisit/types.hpp"
#include "revisit/util.hpp"

using namespace revisit;
using testutil::contains;
using testutil::error_of;
using testutil::ev;

namespace {

GenConfig tiny_gen() {
  GenConfig cfg;
  cfg.n_users = 40;
  cfg.n_days = 10;
  cfg.requests_per_user_day = 2.0;
  cfg.candidates_per_request = 4;
  cfg.pins_per_topic = 40;
  cfg.p_repin = 0.25;
  cfg.feature_dim = 2;
  cfg.rng_seed = 5150;
  return cfg;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("extraction matches a per-request rescan of a generated log") {
  auto events = generate_log(tiny_gen());
  auto rows = extract_action_labels(events);
  REQUIRE(!rows.empty());

  // Oracle: group RelatedPins events by (request, pin) directly.
  std::map<std::pair<std::string, std::string>, ActionLabelRow> want;
  for (const EventRecord& e : events) {
    if (e.surface != Surface::RelatedPins || e.action != Action::Impression) continue;
    auto key = std::make_pair(e.request_id, e.pin_id);
    if (want.count(key)) continue;
    ActionLabelRow r;
    r.request_id = e.request_id;
    r.pin_id = e.pin_id;
    r.user_id = e.user_id;
    r.impression_ts = e.timestamp;
    r.request_day = day_index(e.timestamp);
    r.topic = e.topic;
    want.emplace(key, std::move(r));
  }
  for (const EventRecord& e : events) {
    if (e.surface != Surface::RelatedPins || e.action == Action::Impression) continue;
    ActionLabelRow& r = want.at({e.request_id, e.pin_id});
    if (e.action == Action::GridClick) r.grid_click = true;
    if (e.action == Action::Click) r.click = true;
    if (e.action == Action::LongClick) r.long_click = true;
    if (e.action == Action::Repin && !r.repin) {
      r.repin = true;
      r.repin_ts = e.timestamp;
    }
  }
  REQUIRE(rows.size() == want.size());
  std::size_t i = 0;
  for (const auto& [key, r] : want) {  // map order == (request, pin) sort order
    CHECK(rows[i] == r);
    ++i;
  }
}

TEST_CASE("duplicate impressions keep the first; repin_ts is the first repin") {
  std::vector<EventRecord> events = {
      ev(100, "u1", "p1", Surface::RelatedPins, Action::Impression, "r1", Topic::Art, 0),
      ev(150, "u1", "p1", Surface::RelatedPins, Action::Impression, "r1", Topic::Art, 1),
      ev(200, "u1", "p1", Surface::RelatedPins, Action::Repin, "r1", Topic::Art, 0),
      ev(300, "u1", "p1", Surface::RelatedPins, Action::Repin, "r1", Topic::Art, 0),
  };
  auto rows = extract_action_labels(events);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].impression_ts == 100);
  CHECK(rows[0].repin);
  CHECK(rows[0].repin_ts == 200);
  CHECK(!rows[0].rp_rv);
}

TEST_CASE("an action without its impression is an integrity error") {
  std::vector<EventRecord> events = {
      ev(100, "u1", "p1", Surface::RelatedPins, Action::GridClick, "r1", Topic::Art, 0),
  };
  CHECK(contains(error_of([&] { extract_action_labels(events); }), "no matching impression"));
}

TEST_CASE("attach_revisit_label ORs the merged flag onto the saving row") {
  std::vector<EventRecord> events = {
      ev(100, "u1", "p1", Surface::RelatedPins, Action::Impression, "r1", Topic::Art, 0),
      ev(120, "u1", "p1", Surface::RelatedPins, Action::Repin, "r1", Topic::Art, 0),
      ev(100, "u1", "p2", Surface::RelatedPins, Action::Impression, "r1", Topic::Art, 1),
  };
  auto rows = extract_action_labels(events);

  RevisitLabelRecord label;
  label.user_id = "u1";
  label.pin_id = "p1";
  label.save_timestamp = 120;
  label.request_id = "r1";
  label.merged = true;

  auto out = attach_revisit_label(rows, {label});
  REQUIRE(out.size() == 2);
  CHECK(out[0].rp_rv);   // p1
  CHECK(!out[1].rp_rv);  // p2 untouched

  // A false merged flag leaves the row false.
  label.merged = false;
  out = attach_revisit_label(rows, {label});
  CHECK(!out[0].rp_rv);

  SUBCASE("label without a matching row") {
    label.pin_id = "p9";
    CHECK(contains(error_of([&] { attach_revisit_label(rows, {label}); }), "no example row"));
  }
  SUBCASE("label onto a row that never repinned") {
    label.pin_id = "p2";
    CHECK(contains(error_of([&] { attach_revisit_label(rows, {label}); }), "no Repin"));
  }
  SUBCASE("user mismatch") {
    label.merged = true;
    label.user_id = "u2";
    CHECK(contains(error_of([&] { attach_revisit_label(rows, {label}); }), "key mismatch"));
  }
  SUBCASE("save timestamp mismatch") {
    label.save_timestamp = 121;
    CHECK(contains(error_of([&] { attach_revisit_label(rows, {label}); }), "key mismatch"));
  }
}

TEST_CASE("assemble lays out sidecar then per-family windowed counts") {
  // One row, two sidecar dims, one perf cell populated.
  ActionLabelRow row;
  row.request_id = "r1";
  row.pin_id = "p1";
  row.user_id = "u1";
  row.impression_ts = 5 * kSecondsPerDay + 7;
  row.request_day = 5;
  row.repin = true;
  row.rp_rv = true;

  SidecarRow side{"r1", "p1", {0.5, -0.25}};

  // Rp7dRevGrid x 30-day window, as_of 3: visible on request day 5
  // (visible day 4 snaps to 3 on the 3-day cadence).
  std::vector<PinPerfFeature> perf = {{"p1", FeatureFamily::Rp7dRevGrid, 30, 3, 7, 2}};
  FeatureStore store(perf, 0);

  Dataset ds = assemble({side}, store, {row}, 2);
  CHECK(ds.feature_dim == 2 + kAppendedPerfFeatureCount);
  REQUIRE(ds.rows.size() == 1);
  const TrainingExample& ex = ds.rows[0];
  REQUIRE(ex.features.size() == static_cast<std::size_t>(ds.feature_dim));
  CHECK(ex.features[0] == 0.5);
  CHECK(ex.features[1] == -0.25);
  // Family index 2 (Rp7dRevGrid), window index 1 (30d): offset 2 + 2*6 + 1*2.
  const std::size_t base = 2 + 2 * 6 + 1 * 2;
  CHECK(ex.features[base] == std::log1p(7.0));
  CHECK(ex.features[base + 1] == std::log1p(2.0));
  for (std::size_t i = 2; i < ex.features.size(); ++i) {
    if (i == base || i == base + 1) continue;
    CHECK(ex.features[i] == 0.0);
  }
  CHECK(ex.labels == std::array<std::uint8_t, kTaskCount>{0, 1, 0, 0, 1});
  CHECK(ex.request_day == 5);
}

TEST_CASE("assemble is point-in-time: same-day counts stay invisible") {
  ActionLabelRow row;
  row.request_id = "r1";
  row.pin_id = "p1";
  row.user_id = "u1";
  row.request_day = 3;
  SidecarRow side{"r1", "p1", {1.0}};
  // The only refresh is as_of = request day itself; a request may only see
  // up to the previous day, so everything reads zero.
  std::vector<PinPerfFeature> perf = {{"p1", FeatureFamily::Rp1dRevImpre, 7, 3, 9, 9}};
  Dataset ds = assemble({side}, FeatureStore(perf, 0), {row}, 1);
  for (std::size_t i = 1; i < ds.rows[0].features.size(); ++i)
    CHECK(ds.rows[0].features[i] == 0.0);

  // Moving the request one day later exposes the refresh.
  row.request_day = 4;
  ds = assemble({side}, FeatureStore(perf, 0), {row}, 1);
  CHECK(ds.rows[0].features[1] == std::log1p(9.0));
}

TEST_CASE("assemble sorts rows and rejects inconsistent inputs") {
  ActionLabelRow a;
  a.request_id = "r2";
  a.pin_id = "p1";
  a.user_id = "u1";
  ActionLabelRow b = a;
  b.request_id = "r1";
  b.pin_id = "p9";
  std::vector<SidecarRow> side = {{"r2", "p1", {0.0}}, {"r1", "p9", {0.0}}};
  FeatureStore store({}, 0);

  Dataset ds = assemble(side, store, {a, b}, 1);
  REQUIRE(ds.rows.size() == 2);
  CHECK(ds.rows[0].request_id == "r1");
  CHECK(ds.rows[1].request_id == "r2");

  SUBCASE("missing sidecar row") {
    side.pop_back();
    CHECK(contains(error_of([&] { assemble(side, store, {a, b}, 1); }), "no sidecar features"));
  }
  SUBCASE("sidecar dim mismatch") {
    CHECK(contains(error_of([&] { assemble(side, store, {a, b}, 2); }), "dim"));
  }
  SUBCASE("rp_rv without repin") {
    a.rp_rv = true;
    CHECK(contains(error_of([&] { assemble(side, store, {a, b}, 1); }), "rp_rv"));
  }
}

TEST_CASE("dataset files round-trip exactly on short decimals") {
  Dataset ds;
  ds.feature_dim = 3;
  TrainingExample ex;
  ex.request_id = "r1";
  ex.pin_id = "p1";
  ex.user_id = "u1";
  ex.features = {0.5, -0.25, 3.0};
  ex.labels = {1, 1, 0, 0, 1};
  ds.rows.push_back(ex);
  ex.pin_id = "p2";
  ex.features = {0.0, 2.0, -1.5};
  ex.labels = {0, 0, 0, 0, 0};
  ds.rows.push_back(ex);

  testutil::TempDir dir("dataset");
  write_dataset(ds, dir.file("data.csv"));
  Dataset back = parse_dataset(dir.file("data.csv"));
  CHECK(back.feature_dim == ds.feature_dim);
  REQUIRE(back.rows.size() == 2);
  // request_day is in-memory only; compare the serialized fields.
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.rows[i].request_id == ds.rows[i].request_id);
    CHECK(back.rows[i].pin_id == ds.rows[i].pin_id);
    CHECK(back.rows[i].user_id == ds.rows[i].user_id);
    CHECK(back.rows[i].features == ds.rows[i].features);
    CHECK(back.rows[i].labels == ds.rows[i].labels);
  }

  SUBCASE("rp_rv without repin is rejected on write") {
    ds.rows[1].labels = {0, 0, 0, 0, 1};
    CHECK(contains(error_of([&] { write_dataset(ds, dir.file("bad.csv")); }), "rp_rv"));
  }
  SUBCASE("and on parse") {
    std::string text = dataset_header(1) + "\nr1,p1,u1,0.5,0,0,0,0,1\n";
    write_file_atomic(dir.file("bad2.csv"), text);
    CHECK(!error_of([&] { parse_dataset(dir.file("bad2.csv")); }).empty());
  }
  SUBCASE("labels must be 0 or 1") {
    std::string text = dataset_header(1) + "\nr1,p1,u1,0.5,2,0,0,0,0\n";
    write_file_atomic(dir.file("bad3.csv"), text);
    CHECK(!error_of([&] { parse_dataset(dir.file("bad3.csv")); }).empty());
  }
}

TEST_CASE("action label files round-trip through the interchange format") {
  auto events = generate_log(tiny_gen());
  auto rows = extract_action_labels(events);
  auto saves = derive_saves(events);
  auto labels = build_labels(join_revisits(saves, derive_revisit_events(events), 6), saves);
  rows = attach_revisit_label(std::move(rows), labels);

  testutil::TempDir dir("actlab");
  write_action_labels(rows, dir.file("rows.csv"));
  auto back = parse_action_labels(dir.file("rows.csv"));
  // request_day is derived on parse; everything serialized must match.
  REQUIRE(back.size() == rows.size());
  CHECK(back == rows);

  write_file_atomic(dir.file("bad.csv"),
                    std::string(kActionLabelsHeader) + "\nr1,p1,u1,100,travel,0,0,0,0,0,1\n");
  CHECK(!error_of([&] { parse_action_labels(dir.file("bad.csv")); }).empty());
}

TEST_CASE("end-to-end assembly over a generated log is deterministic") {
  GenConfig cfg = tiny_gen();
  auto events = generate_log(cfg);
  auto sidecar = emit_feature_sidecar(cfg, events);
  auto saves = derive_saves(events);
  auto pairs = join_revisits(saves, derive_revisit_events(events), 6);
  auto rows = attach_revisit_label(extract_action_labels(events), build_labels(pairs, saves));
  auto table = build_feature_tables(events, pairs, 0, cfg.n_days - 1);
  FeatureStore store(table, 0);

  Dataset a = assemble(sidecar, store, rows, cfg.feature_dim);
  Dataset b = assemble(sidecar, store, rows, cfg.feature_dim);
  CHECK(a.rows == b.rows);
  CHECK(a.feature_dim == cfg.feature_dim + kAppendedPerfFeatureCount);
  REQUIRE(!a.rows.empty());

  // Sanity: every row came from an impression row and labels imply order.
  for (const TrainingExample& ex : a.rows) {
    if (ex.labels[static_cast<std::size_t>(TaskId::RepinAndRevisit)])
      CHECK(ex.labels[static_cast<std::size_t>(TaskId::Repin)]);
  }
}

}  // TEST_SUITE
