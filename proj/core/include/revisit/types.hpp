#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace revisit {

/// Error type thrown by every module. Messages carry enough context
/// (line numbers, offending tokens, file paths) to act on.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

enum class Surface : std::uint8_t { RelatedPins = 0, OwnProfile = 1, Other = 2 };

enum class Action : std::uint8_t {
  Impression = 0,
  GridClick = 1,
  Repin = 2,
  Click = 3,
  LongClick = 4,
};

/// The 16 content topics tracked by the analyzer, plus Unknown.
enum class Topic : std::uint8_t {
  EventPlanning = 0,
  Health,
  HomeDecor,
  DiyAndCrafts,
  Quotes,
  Beauty,
  Parenting,
  Travel,
  Entertainment,
  Animals,
  Education,
  Art,
  Architecture,
  Vehicles,
  Electronics,
  Finance,
  Unknown,
};

inline constexpr std::size_t kTopicCount = 16;  // excludes Unknown

/// Prediction heads of the ranking model. The first four are the
/// engagement tasks; RepinAndRevisit is the joint save-and-revisit head.
enum class TaskId : std::uint8_t {
  GridClick = 0,
  Repin = 1,
  Click = 2,
  LongClick = 3,
  RepinAndRevisit = 4,
};

inline constexpr std::size_t kActionTaskCount = 4;
inline constexpr std::size_t kTaskCount = 5;

/// Calendar day in UTC: floor(epoch_seconds / 86400). All "day 0 .. day 6"
/// offsets in the pipeline are differences of these values.
using DayIndex = std::int64_t;

inline constexpr std::int64_t kSecondsPerDay = 86400;

inline DayIndex day_index(std::int64_t timestamp) { return timestamp / kSecondsPerDay; }

/// One logged user action. The universal input unit of every stage.
struct EventRecord {
  std::int64_t timestamp = 0;  // epoch seconds UTC, >= 0
  std::string user_id;
  std::string pin_id;
  Surface surface = Surface::Other;
  Action action = Action::Impression;
  std::string request_id;  // empty allowed off the RelatedPins surface
  Topic topic = Topic::Unknown;
  std::optional<std::uint32_t> slot;  // grid position; RelatedPins only

  bool operator==(const EventRecord&) const = default;
};

std::string_view to_token(Surface s);
std::string_view to_token(Action a);
std::string_view to_token(Topic t);
std::string_view to_token(TaskId t);

Surface surface_from_token(std::string_view tok);
Action action_from_token(std::string_view tok);
Topic topic_from_token(std::string_view tok);
TaskId task_from_token(std::string_view tok);

inline constexpr std::array<Surface, 3> kAllSurfaces = {
    Surface::RelatedPins, Surface::OwnProfile, Surface::Other};
inline constexpr std::array<Action, 5> kAllActions = {
    Action::Impression, Action::GridClick, Action::Repin, Action::Click, Action::LongClick};
inline constexpr std::array<TaskId, 5> kAllTasks = {
    TaskId::GridClick, TaskId::Repin, TaskId::Click, TaskId::LongClick,
    TaskId::RepinAndRevisit};

/// Validates the per-record invariants; throws Error naming the field.
/// `context` is prepended to messages (e.g. "line 12").
void validate_record(const EventRecord& rec, const std::string& context);

}  // namespace revisit
