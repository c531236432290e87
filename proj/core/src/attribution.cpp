#include "revisit/attribution.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "revisit/util.hpp"

namespace revisit {

namespace {

// Full ordering so equal-timestamp saves still sort deterministically.
auto save_key(const SaveRecord& s) {
  return std::tie(s.user_id, s.pin_id, s.save_timestamp, s.request_id);
}

auto revisit_key(const RevisitEvent& r) {
  return std::make_tuple(std::string_view(r.user_id), std::string_view(r.pin_id),
                         r.revisit_timestamp, static_cast<int>(r.kind));
}

}  // namespace

std::string_view to_token(RevisitKind k) {
  switch (k) {
    case RevisitKind::ImpressionRevisit: return "impression";
    case RevisitKind::GridClickRevisit: return "grid_click";
  }
  throw Error("invalid RevisitKind value");
}

RevisitKind revisit_kind_from_token(std::string_view tok) {
  if (tok == "impression") return RevisitKind::ImpressionRevisit;
  if (tok == "grid_click") return RevisitKind::GridClickRevisit;
  throw Error("unknown revisit kind token: \"" + std::string(tok) + "\"");
}

std::vector<SaveRecord> derive_saves(const std::vector<EventRecord>& events,
                                     std::optional<Surface> surface_filter) {
  std::vector<SaveRecord> saves;
  for (const EventRecord& e : events) {
    if (e.action != Action::Repin) continue;
    if (surface_filter && e.surface != *surface_filter) continue;
    SaveRecord s;
    s.user_id = e.user_id;
    s.pin_id = e.pin_id;
    s.save_timestamp = e.timestamp;
    s.save_day = day_index(e.timestamp);
    s.request_id = e.request_id;
    s.surface_of_save = e.surface;
    s.topic = e.topic;
    saves.push_back(std::move(s));
  }
  std::sort(saves.begin(), saves.end(),
            [](const SaveRecord& a, const SaveRecord& b) { return save_key(a) < save_key(b); });
  return saves;
}

std::vector<RevisitEvent> derive_revisit_events(const std::vector<EventRecord>& events) {
  std::vector<RevisitEvent> revisits;
  for (const EventRecord& e : events) {
    if (e.surface != Surface::OwnProfile) continue;
    if (e.action != Action::Impression && e.action != Action::GridClick) continue;
    RevisitEvent r;
    r.user_id = e.user_id;
    r.pin_id = e.pin_id;
    r.revisit_timestamp = e.timestamp;
    r.revisit_day = day_index(e.timestamp);
    r.kind = e.action == Action::Impression ? RevisitKind::ImpressionRevisit
                                            : RevisitKind::GridClickRevisit;
    revisits.push_back(std::move(r));
  }
  std::sort(revisits.begin(), revisits.end(), [](const RevisitEvent& a, const RevisitEvent& b) {
    return revisit_key(a) < revisit_key(b);
  });
  return revisits;
}

std::vector<AttributedRevisit> join_revisits(const std::vector<SaveRecord>& saves,
                                             const std::vector<RevisitEvent>& revisits,
                                             DayIndex max_day_offset) {
  if (max_day_offset < 0) throw Error("join_revisits: max_day_offset must be >= 0");
  for (std::size_t i = 1; i < saves.size(); ++i) {
    if (save_key(saves[i - 1]) > save_key(saves[i]))
      throw Error("join_revisits: saves not sorted at index " + std::to_string(i));
  }
  for (std::size_t i = 1; i < revisits.size(); ++i) {
    if (revisit_key(revisits[i - 1]) > revisit_key(revisits[i]))
      throw Error("join_revisits: revisits not sorted at index " + std::to_string(i));
  }

  std::vector<AttributedRevisit> pairs;
  std::size_t si = 0;
  std::size_t rj = 0;
  while (si < saves.size() && rj < revisits.size()) {
    auto skey = std::tie(saves[si].user_id, saves[si].pin_id);
    auto rkey = std::tie(revisits[rj].user_id, revisits[rj].pin_id);
    if (skey < rkey) {
      ++si;
      continue;
    }
    if (rkey < skey) {
      ++rj;
      continue;
    }
    // One (user, pin) group on both sides.
    std::size_t s_end = si;
    while (s_end < saves.size() &&
           std::tie(saves[s_end].user_id, saves[s_end].pin_id) == skey)
      ++s_end;
    std::size_t r_end = rj;
    while (r_end < revisits.size() &&
           std::tie(revisits[r_end].user_id, revisits[r_end].pin_id) == skey)
      ++r_end;

    // Revisit timestamps are non-decreasing, so the candidate pointer only
    // moves forward. The latest prior save has the smallest day offset, so
    // it is the attribution target whenever any prior save fits the window.
    std::size_t cand = si;
    for (std::size_t r = rj; r < r_end; ++r) {
      while (cand < s_end && saves[cand].save_timestamp < revisits[r].revisit_timestamp) ++cand;
      if (cand == si) continue;  // no save strictly before this revisit
      const SaveRecord& save = saves[cand - 1];
      DayIndex offset = revisits[r].revisit_day - save.save_day;
      if (offset > max_day_offset) continue;
      pairs.push_back(AttributedRevisit{save, revisits[r]});
    }
    si = s_end;
    rj = r_end;
  }
  return pairs;
}

std::vector<RevisitLabelRecord> build_labels(const std::vector<AttributedRevisit>& pairs,
                                             const std::vector<SaveRecord>& saves) {
  std::vector<RevisitLabelRecord> labels;
  labels.reserve(saves.size());
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(saves.size() * 2);
  auto key_of = [](const std::string& user, const std::string& pin, std::int64_t ts,
                   const std::string& req) {
    std::string k;
    k.reserve(user.size() + pin.size() + req.size() + 24);
    k += user;
    k += '\x1f';
    k += pin;
    k += '\x1f';
    k += std::to_string(ts);
    k += '\x1f';
    k += req;
    return k;
  };
  for (const SaveRecord& s : saves) {
    RevisitLabelRecord rec;
    rec.user_id = s.user_id;
    rec.pin_id = s.pin_id;
    rec.save_timestamp = s.save_timestamp;
    rec.request_id = s.request_id;
    index.emplace(key_of(s.user_id, s.pin_id, s.save_timestamp, s.request_id), labels.size());
    labels.push_back(std::move(rec));
  }
  for (const AttributedRevisit& p : pairs) {
    auto it = index.find(
        key_of(p.save.user_id, p.save.pin_id, p.save.save_timestamp, p.save.request_id));
    if (it == index.end())
      throw Error("build_labels: pair references a save not present in the save list (user " +
                  p.save.user_id + ", pin " + p.save.pin_id + ")");
    RevisitLabelRecord& rec = labels[it->second];
    DayIndex d = p.day_offset();
    if (d < 0) throw Error("build_labels: negative day offset in attributed pair");
    if (p.revisit.kind == RevisitKind::ImpressionRevisit) {
      if (d == 0) rec.flag_1d_rev_impre = true;
    } else {
      if (d == 0) rec.flag_1d_rev_grid = true;
      if (d <= 6) rec.flag_7d_rev_grid = true;
    }
  }
  for (RevisitLabelRecord& rec : labels)
    rec.merged = rec.flag_1d_rev_impre || rec.flag_1d_rev_grid || rec.flag_7d_rev_grid;
  return labels;
}

void write_labels_file(const std::vector<RevisitLabelRecord>& labels, const std::string& path) {
  std::ostringstream out;
  out << kLabelsHeader << '\n';
  for (const RevisitLabelRecord& r : labels) {
    out << r.user_id << ',' << r.pin_id << ',' << r.save_timestamp << ',' << r.request_id << ','
        << int(r.flag_1d_rev_impre) << ',' << int(r.flag_1d_rev_grid) << ','
        << int(r.flag_7d_rev_grid) << ',' << int(r.merged) << '\n';
  }
  write_file_atomic(path, out.str());
}

namespace {

bool parse_flag(std::string_view field, const char* name, std::size_t line_no) {
  if (field == "0") return false;
  if (field == "1") return true;
  throw Error("labels line " + std::to_string(line_no) + ": " + name + " must be 0 or 1, got \"" +
              std::string(field) + "\"");
}

}  // namespace

std::vector<RevisitLabelRecord> parse_labels_file(const std::string& path) {
  std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kLabelsHeader)
    throw Error("labels file " + path + ": bad or missing header");
  std::vector<RevisitLabelRecord> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 8)
      throw Error("labels line " + std::to_string(line_no) + ": expected 8 fields, got " +
                  std::to_string(f.size()));
    RevisitLabelRecord r;
    r.user_id = f[0];
    r.pin_id = f[1];
    r.save_timestamp = parse_int(f[2], "save_ts");
    r.request_id = f[3];
    r.flag_1d_rev_impre = parse_flag(f[4], "f_1d_imp", line_no);
    r.flag_1d_rev_grid = parse_flag(f[5], "f_1d_grid", line_no);
    r.flag_7d_rev_grid = parse_flag(f[6], "f_7d_grid", line_no);
    r.merged = parse_flag(f[7], "merged", line_no);
    if (r.flag_1d_rev_grid && !r.flag_7d_rev_grid)
      throw Error("labels line " + std::to_string(line_no) +
                  ": f_1d_grid set without f_7d_grid");
    labels.push_back(std::move(r));
  }
  return labels;
}

void write_pairs_file(const std::vector<AttributedRevisit>& pairs, const std::string& path) {
  std::ostringstream out;
  out << kPairsHeader << '\n';
  for (const AttributedRevisit& p : pairs) {
    out << p.save.user_id << ',' << p.save.pin_id << ',' << p.save.save_timestamp << ','
        << p.save.save_day << ',' << p.save.request_id << ',' << to_token(p.save.surface_of_save)
        << ',' << to_token(p.save.topic) << ',' << p.revisit.revisit_timestamp << ','
        << p.revisit.revisit_day << ',' << to_token(p.revisit.kind) << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<AttributedRevisit> parse_pairs_file(const std::string& path) {
  std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kPairsHeader)
    throw Error("pairs file " + path + ": bad or missing header");
  std::vector<AttributedRevisit> pairs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 10)
      throw Error("pairs line " + std::to_string(line_no) + ": expected 10 fields, got " +
                  std::to_string(f.size()));
    AttributedRevisit p;
    p.save.user_id = f[0];
    p.save.pin_id = f[1];
    p.save.save_timestamp = parse_int(f[2], "save_ts");
    p.save.save_day = parse_int(f[3], "save_day");
    p.save.request_id = f[4];
    p.save.surface_of_save = surface_from_token(f[5]);
    p.save.topic = topic_from_token(f[6]);
    p.revisit.user_id = f[0];
    p.revisit.pin_id = f[1];
    p.revisit.revisit_timestamp = parse_int(f[7], "revisit_ts");
    p.revisit.revisit_day = parse_int(f[8], "revisit_day");
    p.revisit.kind = revisit_kind_from_token(f[9]);
    if (p.save.save_timestamp >= p.revisit.revisit_timestamp)
      throw Error("pairs line " + std::to_string(line_no) + ": save_ts must precede revisit_ts");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace revisit
