#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "revisit/types.hpp"

namespace revisit {

// Event log file format: UTF-8, line-delimited, comma-separated, no quoting.
// Header is exactly kEventLogHeader. Empty string encodes an absent
// request_id or slot. Ids must not contain commas or newlines.

inline constexpr std::string_view kEventLogHeader =
    "ts,user_id,pin_id,surface,action,request_id,topic,slot";

/// Parses a full event log. Order of records equals line order.
/// Throws Error with the line number and offending field on malformed input.
std::vector<EventRecord> parse_event_log(std::istream& in);
std::vector<EventRecord> parse_event_log_file(const std::string& path);

void write_event_log(const std::vector<EventRecord>& records, std::ostream& out);
void write_event_log_file(const std::vector<EventRecord>& records, const std::string& path);

std::string format_event_line(const EventRecord& rec);

}  // namespace revisit
