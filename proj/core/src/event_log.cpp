#include "revisit/event_log.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "revisit/util.hpp"

namespace revisit {

namespace {

EventRecord parse_line(std::string_view line, std::size_t line_no) {
  const std::string context = "line " + std::to_string(line_no);
  const auto fields = split_csv(line);
  if (fields.size() != 8) {
    throw Error(context + ": expected 8 fields, got " + std::to_string(fields.size()));
  }
  EventRecord rec;
  rec.timestamp = parse_int(fields[0], context + ", field ts");
  rec.user_id = std::string(fields[1]);
  rec.pin_id = std::string(fields[2]);
  try {
    rec.surface = surface_from_token(fields[3]);
    rec.action = action_from_token(fields[4]);
  } catch (const Error& e) {
    throw Error(context + ": " + e.what());
  }
  rec.request_id = std::string(fields[5]);
  try {
    rec.topic = topic_from_token(fields[6]);
  } catch (const Error& e) {
    throw Error(context + ": " + e.what());
  }
  if (!fields[7].empty()) {
    const std::int64_t slot = parse_int(fields[7], context + ", field slot");
    if (slot < 0) throw Error(context + ": slot must be non-negative");
    rec.slot = static_cast<std::uint32_t>(slot);
  }
  validate_record(rec, context);
  return rec;
}

}  // namespace

std::vector<EventRecord> parse_event_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error("empty input: missing event log header");
  }
  if (trim(line) != kEventLogHeader) {
    throw Error("line 1: bad header: \"" + line + "\"");
  }
  std::vector<EventRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = line;
    if (!sv.empty() && sv.back() == '\r') sv.remove_suffix(1);
    if (sv.empty()) continue;
    records.push_back(parse_line(sv, line_no));
  }
  return records;
}

std::vector<EventRecord> parse_event_log_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open event log: " + path);
  return parse_event_log(in);
}

std::string format_event_line(const EventRecord& rec) {
  std::string out;
  out.reserve(64);
  out += std::to_string(rec.timestamp);
  out += ',';
  out += rec.user_id;
  out += ',';
  out += rec.pin_id;
  out += ',';
  out += to_token(rec.surface);
  out += ',';
  out += to_token(rec.action);
  out += ',';
  out += rec.request_id;
  out += ',';
  out += to_token(rec.topic);
  out += ',';
  if (rec.slot.has_value()) out += std::to_string(*rec.slot);
  return out;
}

void write_event_log(const std::vector<EventRecord>& records, std::ostream& out) {
  out << kEventLogHeader << '\n';
  std::size_t line_no = 1;
  for (const auto& rec : records) {
    ++line_no;
    validate_record(rec, "record at line " + std::to_string(line_no));
    out << format_event_line(rec) << '\n';
  }
}

void write_event_log_file(const std::vector<EventRecord>& records, const std::string& path) {
  std::ostringstream ss;
  write_event_log(records, ss);
  write_file_atomic(path, ss.str());
}

}  // namespace revisit
