#pragma once

// Shared test scaffolding: event builders, random log soup, temp dirs, and
// a subprocess runner for the CLI binary.

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "revisit/types.hpp"
#include "revisit/util.hpp"

namespace testutil {

inline revisit::EventRecord ev(std::int64_t ts, std::string user, std::string pin,
                               revisit::Surface surface, revisit::Action action,
                               std::string request_id = "",
                               revisit::Topic topic = revisit::Topic::Travel,
                               std::optional<std::uint32_t> slot = std::nullopt) {
  revisit::EventRecord e;
  e.timestamp = ts;
  e.user_id = std::move(user);
  e.pin_id = std::move(pin);
  e.surface = surface;
  e.action = action;
  e.request_id = std::move(request_id);
  e.topic = topic;
  e.slot = slot;
  return e;
}

struct SoupOpts {
  int n_users = 3;
  int n_pins = 4;
  int n_days = 12;
  int n_events = 120;
  // Coarse timestamp grid provokes equal-timestamp collisions; 0 = full range.
  int ts_grid = 0;
};

/// Random event soup with heavy (user, pin) collisions. Topics are a fixed
/// function of the pin so any pin appears under one topic only. Every
/// RelatedPins event carries a unique request id, so save identities stay
/// unambiguous even on a coarse timestamp grid.
inline std::vector<revisit::EventRecord> random_soup(revisit::Rng& rng, const SoupOpts& o) {
  using namespace revisit;
  std::vector<EventRecord> events;
  events.reserve(static_cast<std::size_t>(o.n_events));
  const std::int64_t horizon = static_cast<std::int64_t>(o.n_days) * kSecondsPerDay;
  for (int i = 0; i < o.n_events; ++i) {
    std::int64_t ts;
    if (o.ts_grid > 0) {
      std::int64_t step = horizon / o.ts_grid;
      ts = static_cast<std::int64_t>(rng.uniform_below(static_cast<std::uint64_t>(o.ts_grid))) *
           step;
    } else {
      ts = static_cast<std::int64_t>(rng.uniform_below(static_cast<std::uint64_t>(horizon)));
    }
    std::string user = "u" + std::to_string(rng.uniform_below(static_cast<std::uint64_t>(o.n_users)));
    auto pin_idx = rng.uniform_below(static_cast<std::uint64_t>(o.n_pins));
    std::string pin = "p" + std::to_string(pin_idx);
    Topic topic = static_cast<Topic>(pin_idx % kTopicCount);
    Surface surface = kAllSurfaces[rng.uniform_below(3)];
    Action action = kAllActions[rng.uniform_below(5)];
    std::string request;
    std::optional<std::uint32_t> slot;
    if (surface == Surface::RelatedPins) {
      request = "q" + std::to_string(i);
      slot = static_cast<std::uint32_t>(rng.uniform_below(8));
    }
    events.push_back(ev(ts, user, pin, surface, action, request, topic, slot));
  }
  return events;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("revisit_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

/// Runs a shell command, returns its exit code (-1 if it did not exit
/// normally). Appends stderr redirection when `stderr_file` is given.
inline int run_cmd(std::string cmd, const std::string& stderr_file = "") {
  if (!stderr_file.empty()) cmd += " 2>" + stderr_file;
  int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

/// True when `text` contains `needle`; keeps failure output readable.
inline bool contains(const std::string& text, const std::string& needle) {
  return text.find(needle) != std::string::npos;
}

/// Scoped environment override, restoring the previous value on exit.
/// worker_count() reads its variable fresh on every call, so this is enough
/// to steer sharding inside one test.
class EnvGuard {
 public:
  EnvGuard(std::string name, const std::string& value) : name_(std::move(name)) {
    const char* old = std::getenv(name_.c_str());
    if (old != nullptr) previous_ = old;
    ::setenv(name_.c_str(), value.c_str(), 1);
  }
  ~EnvGuard() {
    if (previous_)
      ::setenv(name_.c_str(), previous_->c_str(), 1);
    else
      ::unsetenv(name_.c_str());
  }
  EnvGuard(const EnvGuard&) = delete;
  EnvGuard& operator=(const EnvGuard&) = delete;

 private:
  std::string name_;
  std::optional<std::string> previous_;
};

/// Runs fn and returns the Error message it threw, or empty if it did not throw.
template <typename Fn>
std::string error_of(Fn&& fn) {
  try {
    fn();
  } catch (const revisit::Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace testutil
