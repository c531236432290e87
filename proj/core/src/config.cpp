#include "revisit/config.hpp"

#include <cctype>
#include <sstream>
#include <string_view>
#include <vector>

#include "revisit/util.hpp"

namespace revisit {

namespace {

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw Error("config line " + std::to_string(line_no) + ": " + what);
}

// Strips a comment: '#' at line start or after whitespace.
std::string_view strip_comment(std::string_view line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '#' && (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1]))))
      return line.substr(0, i);
  }
  return line;
}

struct Entry {
  std::size_t line_no;
  std::string key;
  std::string value;
};

bool is_array(std::string_view value) { return !value.empty() && value.front() == '['; }

std::vector<std::string> parse_array(std::string_view value, std::size_t line_no) {
  if (value.size() < 2 || value.front() != '[' || value.back() != ']')
    fail(line_no, "array value must be bracketed: [a, b, c]");
  std::string_view inner = trim(value.substr(1, value.size() - 2));
  std::vector<std::string> items;
  if (inner.empty()) return items;
  for (std::string_view piece : split_csv(inner)) {
    std::string_view item = trim(piece);
    if (item.empty()) fail(line_no, "empty array element");
    items.emplace_back(item);
  }
  return items;
}

class Assigner {
 public:
  explicit Assigner(const Entry& e) : e_(e) {}

  void to(double& out) const { out = parse_real(e_.value, e_.key); }
  void to(std::int64_t& out) const { out = parse_int(e_.value, e_.key); }
  void to(std::uint64_t& out) const {
    std::int64_t v = parse_int(e_.value, e_.key);
    if (v < 0) fail(e_.line_no, e_.key + " must be >= 0");
    out = static_cast<std::uint64_t>(v);
  }
  void to(std::string& out) const {
    if (e_.value.empty()) fail(e_.line_no, e_.key + " must not be empty");
    out = e_.value;
  }
  void to(bool& out) const {
    if (e_.value == "true")
      out = true;
    else if (e_.value == "false")
      out = false;
    else
      fail(e_.line_no, e_.key + " must be true or false, got \"" + e_.value + "\"");
  }
  template <std::size_t N>
  void to(std::array<double, N>& out) const {
    auto items = parse_array(e_.value, e_.line_no);
    if (items.size() != N)
      fail(e_.line_no,
           e_.key + " needs " + std::to_string(N) + " values, got " + std::to_string(items.size()));
    for (std::size_t i = 0; i < N; ++i) out[i] = parse_real(items[i], e_.key);
  }
  void to(std::vector<std::int64_t>& out) const {
    auto items = parse_array(e_.value, e_.line_no);
    out.clear();
    for (const std::string& item : items) out.push_back(parse_int(item, e_.key));
  }

 private:
  const Entry& e_;
};

bool assign_gen_key(const Entry& e, GenConfig& gen) {
  Assigner a(e);
  if (e.key == "n_users") a.to(gen.n_users);
  else if (e.key == "n_days") a.to(gen.n_days);
  else if (e.key == "requests_per_user_day") a.to(gen.requests_per_user_day);
  else if (e.key == "candidates_per_request") a.to(gen.candidates_per_request);
  else if (e.key == "pins_per_topic") a.to(gen.pins_per_topic);
  else if (e.key == "p_repin") a.to(gen.p_repin);
  else if (e.key == "p_grid_click") a.to(gen.p_grid_click);
  else if (e.key == "p_click") a.to(gen.p_click);
  else if (e.key == "p_long_click_given_click") a.to(gen.p_long_click_given_click);
  else if (e.key == "revisit_impression_probs") a.to(gen.revisit_impression_probs);
  else if (e.key == "revisit_grid_probs") a.to(gen.revisit_grid_probs);
  else if (e.key == "topic_tilts") a.to(gen.topic_tilts);
  else if (e.key == "topic_mixture") a.to(gen.topic_mixture);
  else if (e.key == "feature_dim") a.to(gen.feature_dim);
  else if (e.key == "planted_signal_strength") a.to(gen.planted_signal_strength);
  else if (e.key == "rng_seed") a.to(gen.rng_seed);
  else return false;
  return true;
}

bool assign_pipeline_key(const Entry& e, PipelineConfig& cfg) {
  Assigner a(e);
  if (e.key == "out_dir") a.to(cfg.out_dir);
  else if (e.key == "event_log") a.to(cfg.event_log_path);
  else if (e.key == "sidecar") a.to(cfg.sidecar_path);
  else if (e.key == "eval_last_days") a.to(cfg.eval_last_days);
  else if (e.key == "k") a.to(cfg.eval_k);
  else if (e.key == "generate") a.to(cfg.run_generate);
  else if (e.key == "train") a.to(cfg.run_train);
  else if (e.key == "evaluate") a.to(cfg.run_evaluate);
  else if (e.key == "analyze") a.to(cfg.run_analyze);
  else if (e.key == "plot_data") a.to(cfg.plot_data);
  else return false;
  return true;
}

bool assign_train_key(const Entry& e, TrainConfig& train) {
  Assigner a(e);
  if (e.key == "learning_rate") a.to(train.learning_rate);
  else if (e.key == "batch_size") a.to(train.batch_size);
  else if (e.key == "epochs") a.to(train.epochs);
  else if (e.key == "momentum") a.to(train.momentum);
  else if (e.key == "hidden_sizes") a.to(train.hidden_sizes);
  else if (e.key == "rng_seed") a.to(train.rng_seed);
  else return false;
  return true;
}

bool assign_weights_key(const Entry& e, PipelineConfig& cfg) {
  Assigner a(e);
  if (e.key == "loss_weights") a.to(cfg.loss_weights);
  else if (e.key == "utility_weights") a.to(cfg.utility_weights);
  else if (e.key == "u_rp_rv_ratio") {
    double ratio = 0.0;
    a.to(ratio);
    cfg.u_rp_rv_ratio = ratio;
  } else
    return false;
  return true;
}

}  // namespace

void apply_rp_rv_ratio(PipelineConfig& cfg) {
  if (!cfg.u_rp_rv_ratio) return;
  cfg.utility_weights[static_cast<std::size_t>(TaskId::RepinAndRevisit)] =
      *cfg.u_rp_rv_ratio * cfg.utility_weights[static_cast<std::size_t>(TaskId::Repin)];
}

PipelineConfig parse_config_text(const std::string& text) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  std::string section;  // empty = top level (generator keys)
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated section header");
      std::string name(trim(line.substr(1, line.size() - 2)));
      if (name != "pipeline" && name != "train" && name != "weights")
        fail(line_no, "unknown section [" + name + "]");
      section = name;
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected key = value");
    Entry e;
    e.line_no = line_no;
    e.key = std::string(trim(line.substr(0, eq)));
    e.value = std::string(trim(line.substr(eq + 1)));
    if (e.key.empty()) fail(line_no, "empty key");
    // Bare (non-array) values must be a single token; catches a stray comma.
    if (!is_array(e.value) && e.value.find(',') != std::string::npos)
      fail(line_no, e.key + ": scalar value contains a comma (array values need brackets)");

    bool known = false;
    if (section.empty()) known = assign_gen_key(e, cfg.gen);
    else if (section == "pipeline") known = assign_pipeline_key(e, cfg);
    else if (section == "train") known = assign_train_key(e, cfg.train);
    else if (section == "weights") known = assign_weights_key(e, cfg);
    if (!known) {
      std::string where = section.empty() ? "at top level" : "in section [" + section + "]";
      fail(line_no, "unknown key \"" + e.key + "\" " + where);
    }
  }
  apply_rp_rv_ratio(cfg);
  return cfg;
}

PipelineConfig parse_config_file(const std::string& path) {
  return parse_config_text(read_file(path));
}

}  // namespace revisit
