#include "revisit/types.hpp"

namespace revisit {

namespace {

constexpr std::array<std::string_view, 3> kSurfaceTokens = {
    "related_pins", "own_profile", "other"};

constexpr std::array<std::string_view, 5> kActionTokens = {
    "impression", "grid_click", "repin", "click", "long_click"};

constexpr std::array<std::string_view, kTopicCount + 1> kTopicTokens = {
    "event_planning", "health",        "home_decor", "diy_and_crafts",
    "quotes",         "beauty",        "parenting",  "travel",
    "entertainment",  "animals",       "education",  "art",
    "architecture",   "vehicles",      "electronics", "finance",
    "unknown"};

constexpr std::array<std::string_view, kTaskCount> kTaskTokens = {
    "grid_click", "repin", "click", "long_click", "rp_rv"};

template <typename Enum, std::size_t N>
Enum from_token(std::string_view tok, const std::array<std::string_view, N>& tokens,
                std::string_view what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (tokens[i] == tok) return static_cast<Enum>(i);
  }
  throw Error("unknown " + std::string(what) + " token: \"" + std::string(tok) + "\"");
}

}  // namespace

std::string_view to_token(Surface s) { return kSurfaceTokens[static_cast<std::size_t>(s)]; }
std::string_view to_token(Action a) { return kActionTokens[static_cast<std::size_t>(a)]; }
std::string_view to_token(Topic t) { return kTopicTokens[static_cast<std::size_t>(t)]; }
std::string_view to_token(TaskId t) { return kTaskTokens[static_cast<std::size_t>(t)]; }

Surface surface_from_token(std::string_view tok) {
  return from_token<Surface>(tok, kSurfaceTokens, "surface");
}
Action action_from_token(std::string_view tok) {
  return from_token<Action>(tok, kActionTokens, "action");
}
Topic topic_from_token(std::string_view tok) {
  return from_token<Topic>(tok, kTopicTokens, "topic");
}
TaskId task_from_token(std::string_view tok) {
  return from_token<TaskId>(tok, kTaskTokens, "task");
}

void validate_record(const EventRecord& rec, const std::string& context) {
  auto fail = [&](const std::string& msg) { throw Error(context + ": " + msg); };
  if (rec.timestamp < 0) fail("timestamp must be >= 0");
  if (rec.user_id.empty()) fail("user_id must be non-empty");
  if (rec.pin_id.empty()) fail("pin_id must be non-empty");
  if (rec.surface == Surface::RelatedPins && rec.request_id.empty()) {
    fail("request_id must be non-empty for related_pins events");
  }
  if (rec.slot.has_value() && rec.surface != Surface::RelatedPins) {
    fail("slot is only valid for related_pins events");
  }
}

}  // namespace revisit
