#include "revisit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "revisit/util.hpp"

namespace revisit {

namespace {

std::string request_pin_key(const std::string& request, const std::string& pin) {
  std::string k;
  k.reserve(request.size() + pin.size() + 1);
  k += request;
  k += '\x1f';
  k += pin;
  return k;
}

}  // namespace

std::vector<ActionLabelRow> extract_action_labels(const std::vector<EventRecord>& events) {
  std::vector<ActionLabelRow> rows;
  std::unordered_map<std::string, std::size_t> index;
  for (const EventRecord& e : events) {
    if (e.surface != Surface::RelatedPins || e.action != Action::Impression) continue;
    std::string key = request_pin_key(e.request_id, e.pin_id);
    auto [it, inserted] = index.emplace(std::move(key), rows.size());
    if (!inserted) continue;  // duplicate impression, keep the first
    ActionLabelRow row;
    row.request_id = e.request_id;
    row.pin_id = e.pin_id;
    row.user_id = e.user_id;
    row.impression_ts = e.timestamp;
    row.request_day = day_index(e.timestamp);
    row.topic = e.topic;
    rows.push_back(std::move(row));
  }
  for (const EventRecord& e : events) {
    if (e.surface != Surface::RelatedPins || e.action == Action::Impression) continue;
    auto it = index.find(request_pin_key(e.request_id, e.pin_id));
    if (it == index.end())
      throw Error("action labels: " + std::string(to_token(e.action)) + " on request " +
                  e.request_id + " pin " + e.pin_id + " has no matching impression");
    ActionLabelRow& row = rows[it->second];
    switch (e.action) {
      case Action::GridClick: row.grid_click = true; break;
      case Action::Repin:
        if (!row.repin) row.repin_ts = e.timestamp;
        row.repin = true;
        break;
      case Action::Click: row.click = true; break;
      case Action::LongClick: row.long_click = true; break;
      case Action::Impression: break;
    }
  }
  std::sort(rows.begin(), rows.end(), [](const ActionLabelRow& a, const ActionLabelRow& b) {
    if (a.request_id != b.request_id) return a.request_id < b.request_id;
    return a.pin_id < b.pin_id;
  });
  return rows;
}

std::vector<ActionLabelRow> attach_revisit_label(std::vector<ActionLabelRow> rows,
                                                 const std::vector<RevisitLabelRecord>& labels) {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(rows.size() * 2);
  for (std::size_t i = 0; i < rows.size(); ++i)
    index.emplace(request_pin_key(rows[i].request_id, rows[i].pin_id), i);
  for (const RevisitLabelRecord& label : labels) {
    auto it = index.find(request_pin_key(label.request_id, label.pin_id));
    if (it == index.end())
      throw Error("attach_revisit_label: label for request " + label.request_id + " pin " +
                  label.pin_id + " has no example row");
    ActionLabelRow& row = rows[it->second];
    if (!row.repin)
      throw Error("attach_revisit_label: label for request " + label.request_id + " pin " +
                  label.pin_id + " but the row has no Repin");
    if (row.user_id != label.user_id || row.repin_ts != label.save_timestamp)
      throw Error("attach_revisit_label: label key mismatch for request " + label.request_id +
                  " pin " + label.pin_id);
    row.rp_rv = row.rp_rv || label.merged;
  }
  return rows;
}

Dataset assemble(const std::vector<SidecarRow>& sidecar, const FeatureStore& store,
                 const std::vector<ActionLabelRow>& rows, std::int64_t sidecar_dim) {
  if (sidecar_dim < 0) throw Error("assemble: negative feature dim");
  std::unordered_map<std::string, const SidecarRow*> sidecar_index;
  sidecar_index.reserve(sidecar.size() * 2);
  for (const SidecarRow& row : sidecar) {
    if (static_cast<std::int64_t>(row.features.size()) != sidecar_dim)
      throw Error("assemble: sidecar row for request " + row.request_id + " has dim " +
                  std::to_string(row.features.size()) + ", expected " +
                  std::to_string(sidecar_dim));
    sidecar_index.emplace(request_pin_key(row.request_id, row.pin_id), &row);
  }

  Dataset dataset;
  dataset.feature_dim = sidecar_dim + kAppendedPerfFeatureCount;
  dataset.rows.resize(rows.size());
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a].request_id != rows[b].request_id) return rows[a].request_id < rows[b].request_id;
    return rows[a].pin_id < rows[b].pin_id;
  });

  parallel_shards(order.size(), [&](std::size_t oi) {
    const ActionLabelRow& src = rows[order[oi]];
    auto side = sidecar_index.find(request_pin_key(src.request_id, src.pin_id));
    if (side == sidecar_index.end())
      throw Error("assemble: no sidecar features for request " + src.request_id + " pin " +
                  src.pin_id);
    TrainingExample ex;
    ex.request_id = src.request_id;
    ex.pin_id = src.pin_id;
    ex.user_id = src.user_id;
    ex.request_day = src.request_day;
    ex.features.reserve(static_cast<std::size_t>(dataset.feature_dim));
    ex.features = side->second->features;
    for (FeatureFamily family : kAllFeatureFamilies) {
      for (int window : kWindowDays) {
        WindowCounts wc = store.lookup(src.pin_id, family, window, src.request_day);
        ex.features.push_back(std::log1p(static_cast<double>(wc.action_count)));
        ex.features.push_back(std::log1p(static_cast<double>(wc.unique_user_count)));
      }
    }
    ex.labels[static_cast<std::size_t>(TaskId::GridClick)] = src.grid_click ? 1 : 0;
    ex.labels[static_cast<std::size_t>(TaskId::Repin)] = src.repin ? 1 : 0;
    ex.labels[static_cast<std::size_t>(TaskId::Click)] = src.click ? 1 : 0;
    ex.labels[static_cast<std::size_t>(TaskId::LongClick)] = src.long_click ? 1 : 0;
    ex.labels[static_cast<std::size_t>(TaskId::RepinAndRevisit)] = src.rp_rv ? 1 : 0;
    if (ex.labels[4] && !ex.labels[1])
      throw Error("assemble: rp_rv label without repin on request " + src.request_id);
    dataset.rows[oi] = std::move(ex);
  });
  return dataset;
}

std::string dataset_header(std::int64_t feature_dim) {
  std::string h = "request_id,pin_id,user_id";
  for (std::int64_t k = 0; k < feature_dim; ++k) h += ",f" + std::to_string(k);
  h += ",y_grid,y_repin,y_click,y_longclick,y_rp_rv";
  return h;
}

void write_dataset(const Dataset& dataset, const std::string& path) {
  std::ostringstream out;
  out << dataset_header(dataset.feature_dim) << '\n';
  for (const TrainingExample& ex : dataset.rows) {
    if (static_cast<std::int64_t>(ex.features.size()) != dataset.feature_dim)
      throw Error("dataset row for request " + ex.request_id + ": feature dim " +
                  std::to_string(ex.features.size()) + " != " +
                  std::to_string(dataset.feature_dim));
    if (ex.labels[static_cast<std::size_t>(TaskId::RepinAndRevisit)] &&
        !ex.labels[static_cast<std::size_t>(TaskId::Repin)])
      throw Error("dataset row for request " + ex.request_id + ": rp_rv without repin");
    out << ex.request_id << ',' << ex.pin_id << ',' << ex.user_id;
    for (double f : ex.features) out << ',' << format_real(f);
    for (std::uint8_t y : ex.labels) out << ',' << int(y != 0);
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

Dataset parse_dataset(const std::string& path) {
  std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("dataset file " + path + ": empty");
  std::string header(trim(line));
  auto header_fields = split_csv(header);
  if (header_fields.size() < 8) throw Error("dataset file " + path + ": bad header");
  auto dim = static_cast<std::int64_t>(header_fields.size()) - 8;
  if (header != dataset_header(dim)) throw Error("dataset file " + path + ": bad header");
  Dataset dataset;
  dataset.feature_dim = dim;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto f = split_csv(line);
    if (f.size() != header_fields.size())
      throw Error("dataset line " + std::to_string(line_no) + ": expected " +
                  std::to_string(header_fields.size()) + " fields, got " +
                  std::to_string(f.size()));
    TrainingExample ex;
    ex.request_id = f[0];
    ex.pin_id = f[1];
    ex.user_id = f[2];
    ex.features.reserve(static_cast<std::size_t>(dim));
    for (std::int64_t k = 0; k < dim; ++k)
      ex.features.push_back(parse_real(f[static_cast<std::size_t>(3 + k)], "feature"));
    for (int t = 0; t < kTaskCount; ++t) {
      std::string_view v = f[static_cast<std::size_t>(3 + dim + t)];
      if (v != "0" && v != "1")
        throw Error("dataset line " + std::to_string(line_no) + ": label must be 0 or 1");
      ex.labels[static_cast<std::size_t>(t)] = v == "1" ? 1 : 0;
    }
    if (ex.labels[static_cast<std::size_t>(TaskId::RepinAndRevisit)] &&
        !ex.labels[static_cast<std::size_t>(TaskId::Repin)])
      throw Error("dataset line " + std::to_string(line_no) + ": rp_rv without repin");
    dataset.rows.push_back(std::move(ex));
  }
  return dataset;
}

void write_action_labels(const std::vector<ActionLabelRow>& rows, const std::string& path) {
  std::ostringstream out;
  out << kActionLabelsHeader << '\n';
  for (const ActionLabelRow& r : rows) {
    out << r.request_id << ',' << r.pin_id << ',' << r.user_id << ',' << r.impression_ts << ','
        << to_token(r.topic) << ',' << int(r.grid_click) << ',' << int(r.repin) << ','
        << int(r.click) << ',' << int(r.long_click) << ',' << (r.repin ? r.repin_ts : 0) << ','
        << int(r.rp_rv) << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<ActionLabelRow> parse_action_labels(const std::string& path) {
  std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kActionLabelsHeader)
    throw Error("action labels file " + path + ": bad or missing header");
  std::vector<ActionLabelRow> rows;
  std::size_t line_no = 1;
  auto flag = [&](std::string_view v, const char* name) {
    if (v == "0") return false;
    if (v == "1") return true;
    throw Error("action labels line " + std::to_string(line_no) + ": " + name +
                " must be 0 or 1");
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 11)
      throw Error("action labels line " + std::to_string(line_no) + ": expected 11 fields, got " +
                  std::to_string(f.size()));
    ActionLabelRow r;
    r.request_id = f[0];
    r.pin_id = f[1];
    r.user_id = f[2];
    r.impression_ts = parse_int(f[3], "impression_ts");
    r.request_day = day_index(r.impression_ts);
    r.topic = topic_from_token(f[4]);
    r.grid_click = flag(f[5], "y_grid");
    r.repin = flag(f[6], "y_repin");
    r.click = flag(f[7], "y_click");
    r.long_click = flag(f[8], "y_longclick");
    r.repin_ts = parse_int(f[9], "repin_ts");
    r.rp_rv = flag(f[10], "y_rp_rv");
    if (r.rp_rv && !r.repin)
      throw Error("action labels line " + std::to_string(line_no) + ": rp_rv without repin");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace revisit
