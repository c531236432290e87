#include "revisit/loggen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "revisit/util.hpp"

namespace revisit {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Mean of sigmoid(L + beta*z) over z ~ U(-1,1), composite Simpson.
double mean_sigmoid(double offset, double beta) {
  if (beta == 0.0) return sigmoid(offset);
  constexpr int kIntervals = 1024;  // even
  double h = 2.0 / kIntervals;
  double acc = sigmoid(offset - beta) + sigmoid(offset + beta);
  for (int i = 1; i < kIntervals; ++i) {
    double z = -1.0 + h * i;
    acc += sigmoid(offset + beta * z) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return acc * h / 3.0 / 2.0;
}

std::string pad_number(std::int64_t value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) >= width) return digits;
  return std::string(width - digits.size(), '0') + digits;
}

std::string user_name(std::int64_t index) { return "u" + pad_number(index, 6); }

std::string pin_name(Topic topic, std::int64_t index) {
  return "p_" + std::string(to_token(topic)) + "_" + pad_number(index, 5);
}

// Sentinels saturate sigmoid to exactly 0 or 1.
constexpr double kNeverOffset = -1e300;
constexpr double kAlwaysOffset = 1e300;

double offset_for_target(double target, double beta) {
  if (target <= 0.0) return kNeverOffset;
  if (target >= 1.0) return kAlwaysOffset;
  return solve_marginal_offset(target, beta);
}

struct EventSortKey {
  static std::tuple<std::int64_t, const std::string&, const std::string&, const std::string&, int,
                    int, std::uint32_t>
  of(const EventRecord& e) {
    return {e.timestamp,       e.user_id,
            e.pin_id,          e.request_id,
            int(e.action),     e.slot.has_value() ? 1 : 0,
            e.slot.value_or(0)};
  }
};

}  // namespace

void validate(const GenConfig& cfg) {
  if (cfg.n_users <= 0) throw Error("gen config: n_users must be positive");
  if (cfg.n_days < 10) throw Error("gen config: n_days must be at least 10");
  if (!(cfg.requests_per_user_day > 0.0))
    throw Error("gen config: requests_per_user_day must be positive");
  if (cfg.candidates_per_request <= 0)
    throw Error("gen config: candidates_per_request must be positive");
  if (cfg.pins_per_topic <= 0) throw Error("gen config: pins_per_topic must be positive");
  if (cfg.candidates_per_request > cfg.pins_per_topic)
    throw Error("gen config: candidates_per_request exceeds pins_per_topic");
  if (cfg.feature_dim < 0) throw Error("gen config: feature_dim must be non-negative");
  if (!(cfg.planted_signal_strength >= 0.0))
    throw Error("gen config: planted_signal_strength must be >= 0");

  auto check_prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
      throw Error("gen config: " + std::string(name) + " must be in [0,1]");
  };
  check_prob(cfg.p_repin, "p_repin");
  check_prob(cfg.p_grid_click, "p_grid_click");
  check_prob(cfg.p_click, "p_click");
  check_prob(cfg.p_long_click_given_click, "p_long_click_given_click");
  for (int d = 0; d < kRevisitCurveDays; ++d) {
    check_prob(cfg.revisit_impression_probs[d], "revisit_impression_probs entry");
    check_prob(cfg.revisit_grid_probs[d], "revisit_grid_probs entry");
  }

  double mixture_sum = 0.0;
  for (int t = 0; t < kTopicCount; ++t) {
    if (!(cfg.topic_mixture[t] >= 0.0))
      throw Error("gen config: topic_mixture entries must be >= 0");
    mixture_sum += cfg.topic_mixture[t];
    if (!(cfg.topic_tilts[t] > 0.0)) throw Error("gen config: topic_tilts must be positive");
    double tilt_pow = 1.0;
    for (int d = 0; d < kRevisitCurveDays; ++d) {
      double eff = cfg.revisit_grid_probs[d] * tilt_pow;
      if (eff > 1.0)
        throw Error("gen config: tilted grid probability exceeds 1 for topic " +
                    std::string(to_token(static_cast<Topic>(t))) + " day " + std::to_string(d));
      tilt_pow *= cfg.topic_tilts[t];
    }
  }
  if (std::abs(mixture_sum - 1.0) > 1e-9)
    throw Error("gen config: topic_mixture must sum to 1 (got " + format_real(mixture_sum) + ")");
}

double pin_signal(const GenConfig& cfg, const std::string& pin_id) {
  Rng rng(derive_seed(cfg.rng_seed, "pinz", pin_id));
  return rng.uniform() * 2.0 - 1.0;
}

double solve_marginal_offset(double target, double beta) {
  if (!(target > 0.0 && target < 1.0))
    throw Error("solve_marginal_offset: target must be in (0,1)");
  if (!(beta >= 0.0)) throw Error("solve_marginal_offset: beta must be >= 0");
  double lo = -60.0 - beta;
  double hi = 60.0 + beta;
  for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
    double mid = 0.5 * (lo + hi);
    if (mean_sigmoid(mid, beta) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double fit_topic_tilt(const std::array<double, kRevisitCurveDays>& grid_probs,
                      double target_long_share) {
  auto share = [&](double tilt) {
    double late = 0.0;
    double total = 0.0;
    double tilt_pow = 1.0;
    for (int d = 0; d <= 6; ++d) {
      double v = grid_probs[d] * tilt_pow;
      total += v;
      if (d >= 3) late += v;
      tilt_pow *= tilt;
    }
    if (total <= 0.0) throw Error("fit_topic_tilt: grid curve sums to zero over days 0..6");
    return late / total;
  };
  double lo = 1e-6;
  double hi = 100.0;
  if (!(target_long_share > share(lo) && target_long_share < share(hi)))
    throw Error("fit_topic_tilt: target share " + format_real(target_long_share) +
                " outside attainable range [" + format_real(share(lo)) + ", " +
                format_real(share(hi)) + "]");
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    double mid = 0.5 * (lo + hi);
    if (share(mid) < target_long_share)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<EventRecord> generate_log(const GenConfig& cfg) {
  validate(cfg);
  double beta = 1.6 * cfg.planted_signal_strength;

  std::array<double, kRevisitCurveDays> imp_offset{};
  for (int d = 0; d < kRevisitCurveDays; ++d)
    imp_offset[d] = offset_for_target(cfg.revisit_impression_probs[d], beta);
  std::array<std::array<double, kRevisitCurveDays>, kTopicCount> grid_offset{};
  for (int t = 0; t < kTopicCount; ++t) {
    double tilt_pow = 1.0;
    for (int d = 0; d < kRevisitCurveDays; ++d) {
      grid_offset[t][d] = offset_for_target(cfg.revisit_grid_probs[d] * tilt_pow, beta);
      tilt_pow *= cfg.topic_tilts[t];
    }
  }

  int last_topic_with_mass = -1;
  for (int t = 0; t < kTopicCount; ++t)
    if (cfg.topic_mixture[t] > 0.0) last_topic_with_mass = t;
  if (last_topic_with_mass < 0) throw Error("gen config: topic_mixture has no mass");

  std::vector<std::vector<EventRecord>> per_user(static_cast<std::size_t>(cfg.n_users));
  parallel_shards(static_cast<std::size_t>(cfg.n_users), [&](std::size_t ui) {
    std::string uid = user_name(static_cast<std::int64_t>(ui));
    Rng rng(derive_seed(cfg.rng_seed, "user", uid));
    std::vector<EventRecord>& out = per_user[ui];

    auto emit = [&](std::int64_t ts, const std::string& pin, Surface surface, Action action,
                    const std::string& request, Topic topic, std::optional<std::uint32_t> slot) {
      EventRecord e;
      e.timestamp = ts;
      e.user_id = uid;
      e.pin_id = pin;
      e.surface = surface;
      e.action = action;
      e.request_id = request;
      e.topic = topic;
      e.slot = slot;
      out.push_back(std::move(e));
    };

    for (std::int64_t day = 0; day < cfg.n_days; ++day) {
      std::int64_t n_requests = rng.poisson(cfg.requests_per_user_day);
      for (std::int64_t q = 0; q < n_requests; ++q) {
        std::int64_t ts = day * kSecondsPerDay +
                          static_cast<std::int64_t>(rng.uniform_below(kSecondsPerDay));
        double u = rng.uniform();
        int topic_idx = last_topic_with_mass;
        double acc = 0.0;
        for (int t = 0; t < kTopicCount; ++t) {
          acc += cfg.topic_mixture[t];
          if (u < acc) {
            topic_idx = t;
            break;
          }
        }
        Topic topic = static_cast<Topic>(topic_idx);
        std::string request_id = "r_" + uid + "_" + pad_number(day, 3) + "_" + pad_number(q, 2);

        std::vector<std::int64_t> chosen;
        chosen.reserve(static_cast<std::size_t>(cfg.candidates_per_request));
        while (chosen.size() < static_cast<std::size_t>(cfg.candidates_per_request)) {
          auto idx = static_cast<std::int64_t>(
              rng.uniform_below(static_cast<std::uint64_t>(cfg.pins_per_topic)));
          if (std::find(chosen.begin(), chosen.end(), idx) == chosen.end()) chosen.push_back(idx);
        }

        for (std::size_t slot = 0; slot < chosen.size(); ++slot) {
          std::string pin = pin_name(topic, chosen[slot]);
          auto slot_no = static_cast<std::uint32_t>(slot);
          emit(ts, pin, Surface::RelatedPins, Action::Impression, request_id, topic, slot_no);
          bool repin = rng.bernoulli(cfg.p_repin);
          bool grid = rng.bernoulli(cfg.p_grid_click);
          bool click = rng.bernoulli(cfg.p_click);
          bool long_click = click && rng.bernoulli(cfg.p_long_click_given_click);
          if (repin)
            emit(ts, pin, Surface::RelatedPins, Action::Repin, request_id, topic, slot_no);
          if (grid)
            emit(ts, pin, Surface::RelatedPins, Action::GridClick, request_id, topic, slot_no);
          if (click)
            emit(ts, pin, Surface::RelatedPins, Action::Click, request_id, topic, slot_no);
          if (long_click)
            emit(ts, pin, Surface::RelatedPins, Action::LongClick, request_id, topic, slot_no);

          if (!repin) continue;
          double z = pin_signal(cfg, pin);
          for (int d = 0; d < kRevisitCurveDays; ++d) {
            std::int64_t revisit_day = day + d;
            if (revisit_day >= cfg.n_days) break;
            std::int64_t day_start = revisit_day * kSecondsPerDay;
            std::int64_t day_end = day_start + kSecondsPerDay - 1;
            // Same-day revisits must land strictly after the save; a save in
            // the day's last second leaves no room and is skipped.
            std::int64_t lo = d == 0 ? ts + 1 : day_start;
            if (rng.bernoulli(sigmoid(imp_offset[d] + beta * z)) && lo <= day_end) {
              std::int64_t rts =
                  lo + static_cast<std::int64_t>(
                           rng.uniform_below(static_cast<std::uint64_t>(day_end - lo + 1)));
              emit(rts, pin, Surface::OwnProfile, Action::Impression, "", topic, std::nullopt);
            }
            if (rng.bernoulli(sigmoid(grid_offset[topic_idx][d] + beta * z)) && lo <= day_end) {
              std::int64_t rts =
                  lo + static_cast<std::int64_t>(
                           rng.uniform_below(static_cast<std::uint64_t>(day_end - lo + 1)));
              emit(rts, pin, Surface::OwnProfile, Action::GridClick, "", topic, std::nullopt);
            }
          }
        }
      }
    }
  });

  std::size_t total = 0;
  for (const auto& v : per_user) total += v.size();
  std::vector<EventRecord> log;
  log.reserve(total);
  for (auto& v : per_user) {
    log.insert(log.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
    v.clear();
  }
  std::sort(log.begin(), log.end(), [](const EventRecord& a, const EventRecord& b) {
    return EventSortKey::of(a) < EventSortKey::of(b);
  });
  return log;
}

namespace {

std::int64_t parse_id_index(std::string_view id, std::string_view prefix, const char* what) {
  if (id.size() <= prefix.size() || id.substr(0, prefix.size()) != prefix)
    throw Error("sidecar: malformed " + std::string(what) + " id \"" + std::string(id) + "\"");
  return parse_int(id.substr(prefix.size()), what);
}

void check_log_matches_config(const GenConfig& cfg, const std::vector<EventRecord>& log) {
  std::int64_t horizon = cfg.n_days * kSecondsPerDay;
  for (const EventRecord& e : log) {
    if (e.timestamp < 0 || e.timestamp >= horizon)
      throw Error("sidecar: event timestamp " + std::to_string(e.timestamp) +
                  " outside the configured horizon");
    std::int64_t user_idx = parse_id_index(e.user_id, "u", "user index");
    if (user_idx < 0 || user_idx >= cfg.n_users)
      throw Error("sidecar: user id " + e.user_id + " outside the configured population");
    if (e.topic == Topic::Unknown) throw Error("sidecar: event with unknown topic");
    std::string pin_prefix = "p_" + std::string(to_token(e.topic)) + "_";
    std::int64_t pin_idx = parse_id_index(e.pin_id, pin_prefix, "pin index");
    if (pin_idx < 0 || pin_idx >= cfg.pins_per_topic)
      throw Error("sidecar: pin id " + e.pin_id + " outside the configured pool");
  }
}

}  // namespace

std::vector<SidecarRow> emit_feature_sidecar(const GenConfig& cfg,
                                             const std::vector<EventRecord>& log) {
  validate(cfg);
  check_log_matches_config(cfg, log);
  std::vector<SidecarRow> rows;
  for (const EventRecord& e : log) {
    if (e.surface != Surface::RelatedPins || e.action != Action::Impression) continue;
    SidecarRow row;
    row.request_id = e.request_id;
    row.pin_id = e.pin_id;
    row.features.resize(static_cast<std::size_t>(cfg.feature_dim));
    if (cfg.feature_dim > 0) {
      row.features[0] = pin_signal(cfg, e.pin_id);
      Rng rng(derive_seed(derive_seed(cfg.rng_seed, "feat", e.request_id), "pin", e.pin_id));
      for (std::int64_t k = 1; k < cfg.feature_dim; ++k)
        row.features[static_cast<std::size_t>(k)] = rng.uniform() * 2.0 - 1.0;
    }
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const SidecarRow& a, const SidecarRow& b) {
    if (a.request_id != b.request_id) return a.request_id < b.request_id;
    return a.pin_id < b.pin_id;
  });
  return rows;
}

std::string sidecar_header(std::int64_t feature_dim) {
  std::string h = "request_id,pin_id";
  for (std::int64_t k = 0; k < feature_dim; ++k) h += ",f" + std::to_string(k);
  return h;
}

void write_sidecar_file(const std::vector<SidecarRow>& rows, std::int64_t feature_dim,
                        const std::string& path) {
  std::ostringstream out;
  out << sidecar_header(feature_dim) << '\n';
  for (const SidecarRow& r : rows) {
    if (static_cast<std::int64_t>(r.features.size()) != feature_dim)
      throw Error("sidecar row for request " + r.request_id + ": feature dim " +
                  std::to_string(r.features.size()) + " != " + std::to_string(feature_dim));
    out << r.request_id << ',' << r.pin_id;
    for (double f : r.features) out << ',' << format_real(f);
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<SidecarRow> parse_sidecar_file(const std::string& path) {
  std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("sidecar file " + path + ": empty");
  std::string header(trim(line));
  auto header_fields = split_csv(header);
  if (header_fields.size() < 2) throw Error("sidecar file " + path + ": bad header");
  auto dim = static_cast<std::int64_t>(header_fields.size()) - 2;
  if (header != sidecar_header(dim)) throw Error("sidecar file " + path + ": bad header");
  std::vector<SidecarRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto f = split_csv(line);
    if (f.size() != header_fields.size())
      throw Error("sidecar line " + std::to_string(line_no) + ": expected " +
                  std::to_string(header_fields.size()) + " fields, got " +
                  std::to_string(f.size()));
    SidecarRow row;
    row.request_id = f[0];
    row.pin_id = f[1];
    row.features.reserve(static_cast<std::size_t>(dim));
    for (std::size_t k = 2; k < f.size(); ++k)
      row.features.push_back(parse_real(f[k], "feature"));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace revisit
