#include "revisit/perf_features.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>
#include <unordered_set>

#include "revisit/util.hpp"

namespace revisit {

namespace {

constexpr std::string_view kFamilyTokens[] = {
    "rp_1d_rev_impre", "rp_1d_rev_grid", "rp_7d_rev_grid", "overall_rev_impre",
    "overall_rev_grid",
};

bool is_rp_family(FeatureFamily f) {
  return f == FeatureFamily::Rp1dRevImpre || f == FeatureFamily::Rp1dRevGrid ||
         f == FeatureFamily::Rp7dRevGrid;
}

std::string user_pin_key(const std::string& user, const std::string& pin) {
  std::string k;
  k.reserve(user.size() + pin.size() + 1);
  k += user;
  k += '\x1f';
  k += pin;
  return k;
}

void sort_triples(std::vector<QualifyingTriple>& triples) {
  std::sort(triples.begin(), triples.end(),
            [](const QualifyingTriple& a, const QualifyingTriple& b) {
              if (a.day != b.day) return a.day < b.day;
              if (a.pin_id != b.pin_id) return a.pin_id < b.pin_id;
              return a.user_id < b.user_id;
            });
}

}  // namespace

std::string_view to_token(FeatureFamily f) {
  auto idx = static_cast<std::size_t>(f);
  if (idx >= std::size(kFamilyTokens)) throw Error("invalid FeatureFamily value");
  return kFamilyTokens[idx];
}

FeatureFamily feature_family_from_token(std::string_view tok) {
  for (std::size_t i = 0; i < std::size(kFamilyTokens); ++i)
    if (tok == kFamilyTokens[i]) return static_cast<FeatureFamily>(i);
  throw Error("unknown feature family token: \"" + std::string(tok) + "\"");
}

int cadence_for_window(int window_days) {
  switch (window_days) {
    case 7: return 1;
    case 30: return 3;
    case 90: return 7;
    default: throw Error("unsupported window length: " + std::to_string(window_days));
  }
}

std::vector<QualifyingTriple> qualifying_events(const std::vector<EventRecord>& events,
                                                const std::vector<AttributedRevisit>* join_output,
                                                FeatureFamily family) {
  std::vector<QualifyingTriple> triples;
  if (is_rp_family(family)) {
    if (join_output == nullptr)
      throw Error("qualifying_events: " + std::string(to_token(family)) +
                  " requires the attribution join output");
    for (const AttributedRevisit& p : *join_output) {
      if (p.save.surface_of_save != Surface::RelatedPins) continue;
      DayIndex d = p.day_offset();
      bool ok = false;
      switch (family) {
        case FeatureFamily::Rp1dRevImpre:
          ok = p.revisit.kind == RevisitKind::ImpressionRevisit && d == 0;
          break;
        case FeatureFamily::Rp1dRevGrid:
          ok = p.revisit.kind == RevisitKind::GridClickRevisit && d == 0;
          break;
        case FeatureFamily::Rp7dRevGrid:
          ok = p.revisit.kind == RevisitKind::GridClickRevisit && d >= 0 && d <= 6;
          break;
        default: break;
      }
      if (ok) triples.push_back({p.revisit.pin_id, p.revisit.user_id, p.revisit.revisit_day});
    }
  } else {
    // First save per (user, pin) on any surface; an own-profile interaction
    // qualifies when some save by the same user precedes it strictly.
    std::unordered_map<std::string, std::int64_t> first_save;
    for (const EventRecord& e : events) {
      if (e.action != Action::Repin) continue;
      auto [it, inserted] = first_save.emplace(user_pin_key(e.user_id, e.pin_id), e.timestamp);
      if (!inserted && e.timestamp < it->second) it->second = e.timestamp;
    }
    Action wanted =
        family == FeatureFamily::OverallRevImpre ? Action::Impression : Action::GridClick;
    for (const EventRecord& e : events) {
      if (e.surface != Surface::OwnProfile || e.action != wanted) continue;
      auto it = first_save.find(user_pin_key(e.user_id, e.pin_id));
      if (it == first_save.end() || it->second >= e.timestamp) continue;
      triples.push_back({e.pin_id, e.user_id, day_index(e.timestamp)});
    }
  }
  sort_triples(triples);
  return triples;
}

std::map<std::string, WindowCounts> aggregate_window(const std::vector<QualifyingTriple>& triples,
                                                     int window_days, DayIndex as_of_day) {
  if (window_days <= 0) throw Error("aggregate_window: window must be positive");
  DayIndex lo = as_of_day - window_days + 1;
  DayIndex hi = as_of_day;

  auto aggregate_range = [&](std::size_t begin, std::size_t end,
                             std::unordered_map<std::string, std::pair<std::int64_t,
                                                                       std::unordered_set<std::string>>>&
                                 acc) {
    for (std::size_t i = begin; i < end; ++i) {
      const QualifyingTriple& t = triples[i];
      if (t.day < lo || t.day > hi) continue;
      auto& slot = acc[t.pin_id];
      slot.first += 1;
      slot.second.insert(t.user_id);
    }
  };

  using Acc =
      std::unordered_map<std::string, std::pair<std::int64_t, std::unordered_set<std::string>>>;
  std::map<std::string, WindowCounts> out;

  constexpr std::size_t kParallelThreshold = 1 << 16;
  std::size_t workers = worker_count();
  if (triples.size() >= kParallelThreshold && workers > 1) {
    // Shard by pin hash: shard maps have disjoint key sets, so the merged
    // result is independent of the shard count.
    std::size_t n_shards = workers;
    std::vector<std::vector<std::size_t>> shard_rows(n_shards);
    for (std::size_t i = 0; i < triples.size(); ++i)
      shard_rows[fnv1a64(triples[i].pin_id) % n_shards].push_back(i);
    std::vector<Acc> shard_acc(n_shards);
    parallel_shards(n_shards, [&](std::size_t s) {
      for (std::size_t i : shard_rows[s]) aggregate_range(i, i + 1, shard_acc[s]);
    });
    for (const Acc& acc : shard_acc)
      for (const auto& [pin, slot] : acc)
        out[pin] = WindowCounts{slot.first, static_cast<std::int64_t>(slot.second.size())};
  } else {
    Acc acc;
    aggregate_range(0, triples.size(), acc);
    for (const auto& [pin, slot] : acc)
      out[pin] = WindowCounts{slot.first, static_cast<std::int64_t>(slot.second.size())};
  }
  return out;
}

std::vector<RefreshTask> refresh_plan(DayIndex first_day, DayIndex last_day) {
  if (last_day < first_day) throw Error("refresh_plan: empty day range");
  std::vector<RefreshTask> tasks;
  for (DayIndex d = first_day; d <= last_day; ++d) {
    for (int w : kWindowDays) {
      if ((d - first_day) % cadence_for_window(w) == 0) tasks.push_back({d, w});
    }
  }
  return tasks;
}

double coverage(const std::vector<PinPerfFeature>& table,
                const std::vector<std::string>& candidate_pins) {
  if (candidate_pins.empty()) throw Error("coverage: empty candidate set");
  std::unordered_set<std::string> covered;
  for (const PinPerfFeature& row : table)
    if (row.action_count > 0) covered.insert(row.pin_id);
  std::size_t hit = 0;
  for (const std::string& pin : candidate_pins)
    if (covered.count(pin)) ++hit;
  return static_cast<double>(hit) / static_cast<double>(candidate_pins.size());
}

std::vector<PinPerfFeature> build_feature_tables(const std::vector<EventRecord>& events,
                                                 const std::vector<AttributedRevisit>& rp_pairs,
                                                 DayIndex first_day, DayIndex last_day) {
  std::vector<RefreshTask> tasks = refresh_plan(first_day, last_day);
  std::vector<PinPerfFeature> rows;
  std::mutex rows_mu;

  for (FeatureFamily family : kAllFeatureFamilies) {
    std::vector<QualifyingTriple> triples = qualifying_events(events, &rp_pairs, family);
    parallel_shards(tasks.size(), [&](std::size_t ti) {
      const RefreshTask& task = tasks[ti];
      auto counts = aggregate_window(triples, task.window_days, task.as_of_day);
      std::vector<PinPerfFeature> local;
      local.reserve(counts.size());
      for (const auto& [pin, wc] : counts) {
        if (wc.action_count == 0) continue;
        local.push_back(
            {pin, family, task.window_days, task.as_of_day, wc.action_count, wc.unique_user_count});
      }
      std::lock_guard<std::mutex> lock(rows_mu);
      rows.insert(rows.end(), local.begin(), local.end());
    });
  }

  std::sort(rows.begin(), rows.end(), [](const PinPerfFeature& a, const PinPerfFeature& b) {
    if (a.family != b.family) return a.family < b.family;
    if (a.window_days != b.window_days) return a.window_days < b.window_days;
    if (a.as_of_day != b.as_of_day) return a.as_of_day < b.as_of_day;
    return a.pin_id < b.pin_id;
  });
  return rows;
}

FeatureStore::FeatureStore(std::vector<PinPerfFeature> rows, DayIndex anchor_day)
    : anchor_day_(anchor_day), row_count_(rows.size()) {
  for (PinPerfFeature& row : rows) {
    cadence_for_window(row.window_days);  // validates
    TableKey key{static_cast<int>(row.family), row.window_days, row.as_of_day};
    tables_[key].emplace(std::move(row.pin_id),
                         WindowCounts{row.action_count, row.unique_user_count});
  }
}

WindowCounts FeatureStore::lookup(const std::string& pin_id, FeatureFamily family,
                                  int window_days, DayIndex request_day) const {
  int cadence = cadence_for_window(window_days);
  DayIndex visible = request_day - 1;  // yesterday's refresh at the latest
  if (visible < anchor_day_) return {};
  DayIndex as_of = anchor_day_ + (visible - anchor_day_) / cadence * cadence;
  auto table = tables_.find(TableKey{static_cast<int>(family), window_days, as_of});
  if (table == tables_.end()) return {};
  auto row = table->second.find(pin_id);
  if (row == table->second.end()) return {};
  return row->second;
}

void write_feature_table(const std::vector<PinPerfFeature>& rows, const std::string& path) {
  std::ostringstream out;
  out << kFeatureTableHeader << '\n';
  for (const PinPerfFeature& r : rows) {
    if (r.unique_user_count > r.action_count)
      throw Error("feature row for pin " + r.pin_id + ": unique_users exceeds action_count");
    out << r.pin_id << ',' << to_token(r.family) << ',' << r.window_days << ',' << r.as_of_day
        << ',' << r.action_count << ',' << r.unique_user_count << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<PinPerfFeature> parse_feature_table(const std::string& path) {
  std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kFeatureTableHeader)
    throw Error("feature table " + path + ": bad or missing header");
  std::vector<PinPerfFeature> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 6)
      throw Error("feature table line " + std::to_string(line_no) + ": expected 6 fields, got " +
                  std::to_string(f.size()));
    PinPerfFeature r;
    r.pin_id = f[0];
    r.family = feature_family_from_token(f[1]);
    r.window_days = static_cast<int>(parse_int(f[2], "window"));
    cadence_for_window(r.window_days);
    r.as_of_day = parse_int(f[3], "as_of_day");
    r.action_count = parse_int(f[4], "action_count");
    r.unique_user_count = parse_int(f[5], "unique_users");
    if (r.action_count < 0 || r.unique_user_count < 0 || r.unique_user_count > r.action_count)
      throw Error("feature table line " + std::to_string(line_no) + ": invalid counts");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace revisit
