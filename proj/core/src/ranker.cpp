#include "revisit/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "revisit/util.hpp"

namespace revisit {

namespace {

constexpr double kProbEps = 1e-12;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double bce(double p, bool y) {
  double pc = std::clamp(p, kProbEps, 1.0 - kProbEps);
  return y ? -std::log(pc) : -std::log(1.0 - pc);
}

std::size_t trunk_layer_count(const ModelParams& p) { return p.layer_sizes.size() - 1; }

struct FlatLayout {
  std::vector<std::size_t> w_off, b_off;
  std::array<std::size_t, kTaskCount> hw_off{}, hb_off{};
  std::size_t total = 0;
};

FlatLayout layout_of(const ModelParams& p) {
  FlatLayout lay;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
    auto in = static_cast<std::size_t>(p.layer_sizes[l]);
    auto out = static_cast<std::size_t>(p.layer_sizes[l + 1]);
    lay.w_off.push_back(off);
    off += in * out;
    lay.b_off.push_back(off);
    off += out;
  }
  auto trunk_out = static_cast<std::size_t>(p.layer_sizes.back());
  for (int i = 0; i < kTaskCount; ++i) {
    lay.hw_off[static_cast<std::size_t>(i)] = off;
    off += trunk_out;
    lay.hb_off[static_cast<std::size_t>(i)] = off;
    off += 1;
  }
  lay.total = off;
  return lay;
}

struct ForwardCache {
  std::vector<std::vector<double>> pre;  // per trunk layer
  std::vector<std::vector<double>> act;  // act[0] = x, act[l+1] = relu(pre[l])
  std::array<double, kTaskCount> logits{};
  std::array<double, kTaskCount> probs{};
};

void run_forward(const ModelParams& p, const std::vector<double>& x, ForwardCache& cache) {
  if (static_cast<std::int64_t>(x.size()) != p.layer_sizes.front())
    throw Error("forward: feature dim " + std::to_string(x.size()) + " != model input dim " +
                std::to_string(p.layer_sizes.front()));
  for (double v : x)
    if (!std::isfinite(v)) throw Error("forward: non-finite input feature");

  std::size_t n_layers = trunk_layer_count(p);
  cache.pre.resize(n_layers);
  cache.act.resize(n_layers + 1);
  cache.act[0] = x;
  for (std::size_t l = 0; l < n_layers; ++l) {
    auto in = static_cast<std::size_t>(p.layer_sizes[l]);
    auto out = static_cast<std::size_t>(p.layer_sizes[l + 1]);
    const std::vector<double>& a = cache.act[l];
    std::vector<double>& z = cache.pre[l];
    z.assign(out, 0.0);
    const std::vector<double>& W = p.trunk_weights[l];
    for (std::size_t j = 0; j < out; ++j) {
      double acc = p.trunk_biases[l][j];
      const double* row = W.data() + j * in;
      for (std::size_t k = 0; k < in; ++k) acc += row[k] * a[k];
      z[j] = acc;
    }
    std::vector<double>& a_next = cache.act[l + 1];
    a_next.resize(out);
    for (std::size_t j = 0; j < out; ++j) a_next[j] = z[j] > 0.0 ? z[j] : 0.0;
  }
  const std::vector<double>& top = cache.act[n_layers];
  for (int i = 0; i < kTaskCount; ++i) {
    auto ti = static_cast<std::size_t>(i);
    double acc = p.head_biases[ti];
    const std::vector<double>& hw = p.head_weights[ti];
    for (std::size_t k = 0; k < top.size(); ++k) acc += hw[k] * top[k];
    cache.logits[ti] = acc;
    cache.probs[ti] = sigmoid(acc);
  }
}

/// Shared five/four-task loss; the four-task value is the same accumulation
/// stopped before the revisit head, which keeps the w[rp_rv] = 0 case
/// bit-identical.
double loss_over(const ModelParams& params, const std::vector<TrainingExample>& rows,
                 const std::array<double, kTaskCount>& w, int n_tasks) {
  if (rows.empty()) throw Error("loss: empty batch");
  for (int i = 0; i < n_tasks; ++i)
    if (!(w[static_cast<std::size_t>(i)] >= 0.0))
      throw Error("loss: negative loss weight for task " +
                  std::string(to_token(static_cast<TaskId>(i))));
  ForwardCache cache;
  double total = 0.0;
  for (const TrainingExample& row : rows) {
    run_forward(params, row.features, cache);
    double ex = 0.0;
    for (int i = 0; i < n_tasks; ++i) {
      auto ti = static_cast<std::size_t>(i);
      ex += w[ti] * bce(cache.probs[ti], row.labels[ti] != 0);
    }
    total += ex;
  }
  return total / static_cast<double>(rows.size());
}

/// Gradient and mean loss in one pass over the index span.
double grad_and_loss(const ModelParams& p, const std::vector<TrainingExample>& rows,
                     const std::size_t* idx, std::size_t n, const std::array<double, kTaskCount>& w,
                     int n_tasks, std::vector<double>& grad) {
  if (n == 0) throw Error("loss: empty batch");
  FlatLayout lay = layout_of(p);
  grad.assign(lay.total, 0.0);
  std::size_t n_layers = trunk_layer_count(p);
  auto trunk_out = static_cast<std::size_t>(p.layer_sizes.back());

  ForwardCache cache;
  std::vector<double> d_act, dz, d_prev;
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const TrainingExample& row = rows[idx[r]];
    run_forward(p, row.features, cache);
    double ex = 0.0;
    d_act.assign(trunk_out, 0.0);
    for (int i = 0; i < n_tasks; ++i) {
      auto ti = static_cast<std::size_t>(i);
      bool y = row.labels[ti] != 0;
      ex += w[ti] * bce(cache.probs[ti], y);
      double g = w[ti] * (cache.probs[ti] - (y ? 1.0 : 0.0));
      double* hw_grad = grad.data() + lay.hw_off[ti];
      const std::vector<double>& top = cache.act[n_layers];
      for (std::size_t k = 0; k < trunk_out; ++k) hw_grad[k] += g * top[k];
      grad[lay.hb_off[ti]] += g;
      const std::vector<double>& hw = p.head_weights[ti];
      for (std::size_t k = 0; k < trunk_out; ++k) d_act[k] += g * hw[k];
    }
    total += ex;

    for (std::size_t l = n_layers; l-- > 0;) {
      auto in = static_cast<std::size_t>(p.layer_sizes[l]);
      auto out = static_cast<std::size_t>(p.layer_sizes[l + 1]);
      dz.resize(out);
      for (std::size_t j = 0; j < out; ++j)
        dz[j] = cache.pre[l][j] > 0.0 ? d_act[j] : 0.0;  // ReLU kink resolved to 0
      double* w_grad = grad.data() + lay.w_off[l];
      const std::vector<double>& a = cache.act[l];
      for (std::size_t j = 0; j < out; ++j) {
        double* w_row = w_grad + j * in;
        for (std::size_t k = 0; k < in; ++k) w_row[k] += dz[j] * a[k];
        grad[lay.b_off[l] + j] += dz[j];
      }
      if (l > 0) {
        d_prev.assign(in, 0.0);
        const std::vector<double>& W = p.trunk_weights[l];
        for (std::size_t j = 0; j < out; ++j) {
          const double* w_row = W.data() + j * in;
          for (std::size_t k = 0; k < in; ++k) d_prev[k] += w_row[k] * dz[j];
        }
        d_act = d_prev;
      }
    }
  }
  double inv_n = 1.0 / static_cast<double>(n);
  for (double& g : grad) g *= inv_n;
  return total * inv_n;
}

std::vector<double> gradient_over(const ModelParams& params,
                                  const std::vector<TrainingExample>& rows,
                                  const std::array<double, kTaskCount>& w, int n_tasks) {
  std::vector<std::size_t> idx(rows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<double> grad;
  grad_and_loss(params, rows, idx.data(), idx.size(), w, n_tasks, grad);
  return grad;
}

double score_over(const std::array<double, kTaskCount>& probs,
                  const std::array<double, kTaskCount>& u, int n_tasks) {
  double acc = 0.0;
  for (int i = 0; i < n_tasks; ++i)
    acc += u[static_cast<std::size_t>(i)] * probs[static_cast<std::size_t>(i)];
  return acc;
}

std::vector<RankedCandidate> rank_over(const ModelParams& params,
                                       const std::array<double, kTaskCount>& u,
                                       const std::vector<TrainingExample>& candidates,
                                       int n_tasks) {
  if (candidates.empty()) throw Error("rank: no candidates");
  std::vector<RankedCandidate> out;
  out.reserve(candidates.size());
  for (const TrainingExample& c : candidates) {
    RankedCandidate rc;
    rc.pin_id = c.pin_id;
    rc.probs = forward(params, c.features);
    rc.score = score_over(rc.probs, u, n_tasks);
    rc.labels = c.labels;
    out.push_back(std::move(rc));
  }
  std::sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.pin_id < b.pin_id;
  });
  return out;
}

}  // namespace

void validate(const ModelParams& p) {
  if (p.layer_sizes.empty()) throw Error("model: empty layer_sizes");
  for (std::int64_t s : p.layer_sizes)
    if (s <= 0) throw Error("model: layer sizes must be positive");
  std::size_t n_layers = trunk_layer_count(p);
  if (p.trunk_weights.size() != n_layers || p.trunk_biases.size() != n_layers)
    throw Error("model: trunk layer count mismatch");
  auto check_finite = [](const std::vector<double>& v, const char* what) {
    for (double x : v)
      if (!std::isfinite(x)) throw Error("model: non-finite " + std::string(what));
  };
  for (std::size_t l = 0; l < n_layers; ++l) {
    auto in = static_cast<std::size_t>(p.layer_sizes[l]);
    auto out = static_cast<std::size_t>(p.layer_sizes[l + 1]);
    if (p.trunk_weights[l].size() != in * out)
      throw Error("model: trunk layer " + std::to_string(l) + " weight shape mismatch");
    if (p.trunk_biases[l].size() != out)
      throw Error("model: trunk layer " + std::to_string(l) + " bias shape mismatch");
    check_finite(p.trunk_weights[l], "trunk weight");
    check_finite(p.trunk_biases[l], "trunk bias");
  }
  auto trunk_out = static_cast<std::size_t>(p.layer_sizes.back());
  for (int i = 0; i < kTaskCount; ++i) {
    auto ti = static_cast<std::size_t>(i);
    if (p.head_weights[ti].size() != trunk_out)
      throw Error("model: head " + std::string(to_token(static_cast<TaskId>(i))) +
                  " weight shape mismatch");
    check_finite(p.head_weights[ti], "head weight");
    if (!std::isfinite(p.head_biases[ti])) throw Error("model: non-finite head bias");
    if (!(p.loss_weights[ti] >= 0.0)) throw Error("model: negative loss weight");
    if (!std::isfinite(p.utility_weights[ti])) throw Error("model: non-finite utility weight");
  }
}

std::int64_t input_dim(const ModelParams& p) {
  if (p.layer_sizes.empty()) throw Error("model: empty layer_sizes");
  return p.layer_sizes.front();
}

std::int64_t trunk_output_dim(const ModelParams& p) {
  if (p.layer_sizes.empty()) throw Error("model: empty layer_sizes");
  return p.layer_sizes.back();
}

ModelParams init_model(std::int64_t in_dim, const std::vector<std::int64_t>& hidden_sizes,
                       std::uint64_t seed) {
  if (in_dim <= 0) throw Error("init_model: input dim must be positive");
  ModelParams p;
  p.layer_sizes.push_back(in_dim);
  for (std::int64_t h : hidden_sizes) {
    if (h <= 0) throw Error("init_model: hidden sizes must be positive");
    p.layer_sizes.push_back(h);
  }
  std::size_t n_layers = trunk_layer_count(p);
  for (std::size_t l = 0; l < n_layers; ++l) {
    auto in = static_cast<std::size_t>(p.layer_sizes[l]);
    auto out = static_cast<std::size_t>(p.layer_sizes[l + 1]);
    double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Rng rng(derive_seed(seed, "trunk", std::to_string(l)));
    std::vector<double> W(in * out);
    for (double& v : W) v = rng.uniform(-limit, limit);
    p.trunk_weights.push_back(std::move(W));
    p.trunk_biases.emplace_back(out, 0.0);
  }
  auto trunk_out = static_cast<std::size_t>(p.layer_sizes.back());
  for (int i = 0; i < kTaskCount; ++i) {
    auto ti = static_cast<std::size_t>(i);
    double limit = std::sqrt(6.0 / static_cast<double>(trunk_out + 1));
    Rng rng(derive_seed(seed, "head", to_token(static_cast<TaskId>(i))));
    std::vector<double> hw(trunk_out);
    for (double& v : hw) v = rng.uniform(-limit, limit);
    p.head_weights[ti] = std::move(hw);
    p.head_biases[ti] = 0.0;
  }
  validate(p);
  return p;
}

std::vector<double> flatten_parameters(const ModelParams& p) {
  validate(p);
  FlatLayout lay = layout_of(p);
  std::vector<double> flat(lay.total);
  for (std::size_t l = 0; l < trunk_layer_count(p); ++l) {
    std::copy(p.trunk_weights[l].begin(), p.trunk_weights[l].end(), flat.begin() + lay.w_off[l]);
    std::copy(p.trunk_biases[l].begin(), p.trunk_biases[l].end(), flat.begin() + lay.b_off[l]);
  }
  for (int i = 0; i < kTaskCount; ++i) {
    auto ti = static_cast<std::size_t>(i);
    std::copy(p.head_weights[ti].begin(), p.head_weights[ti].end(),
              flat.begin() + lay.hw_off[ti]);
    flat[lay.hb_off[ti]] = p.head_biases[ti];
  }
  return flat;
}

void assign_parameters(ModelParams& p, const std::vector<double>& flat) {
  FlatLayout lay = layout_of(p);
  if (flat.size() != lay.total)
    throw Error("assign_parameters: expected " + std::to_string(lay.total) + " values, got " +
                std::to_string(flat.size()));
  for (std::size_t l = 0; l < trunk_layer_count(p); ++l) {
    std::copy(flat.begin() + lay.w_off[l], flat.begin() + lay.w_off[l] + p.trunk_weights[l].size(),
              p.trunk_weights[l].begin());
    std::copy(flat.begin() + lay.b_off[l], flat.begin() + lay.b_off[l] + p.trunk_biases[l].size(),
              p.trunk_biases[l].begin());
  }
  for (int i = 0; i < kTaskCount; ++i) {
    auto ti = static_cast<std::size_t>(i);
    std::copy(flat.begin() + lay.hw_off[ti],
              flat.begin() + lay.hw_off[ti] + p.head_weights[ti].size(),
              p.head_weights[ti].begin());
    p.head_biases[ti] = flat[lay.hb_off[ti]];
  }
}

std::size_t parameter_count(const ModelParams& p) { return layout_of(p).total; }

std::array<double, kTaskCount> forward(const ModelParams& p, const std::vector<double>& x) {
  ForwardCache cache;
  run_forward(p, x, cache);
  return cache.probs;
}

std::vector<std::vector<double>> trunk_preactivations(const ModelParams& p,
                                                      const std::vector<double>& x) {
  ForwardCache cache;
  run_forward(p, x, cache);
  return cache.pre;
}

double loss(const ModelParams& params, const std::vector<TrainingExample>& rows,
            const std::array<double, kTaskCount>& w) {
  return loss_over(params, rows, w, kTaskCount);
}

double action_loss(const ModelParams& params, const std::vector<TrainingExample>& rows,
                   const std::array<double, kTaskCount>& w) {
  return loss_over(params, rows, w, kActionTaskCount);
}

std::vector<double> loss_gradient(const ModelParams& params,
                                  const std::vector<TrainingExample>& rows,
                                  const std::array<double, kTaskCount>& w) {
  return gradient_over(params, rows, w, kTaskCount);
}

std::vector<double> action_loss_gradient(const ModelParams& params,
                                         const std::vector<TrainingExample>& rows,
                                         const std::array<double, kTaskCount>& w) {
  return gradient_over(params, rows, w, kActionTaskCount);
}

double score(const std::array<double, kTaskCount>& probs,
             const std::array<double, kTaskCount>& u) {
  return score_over(probs, u, kTaskCount);
}

double action_score(const std::array<double, kTaskCount>& probs,
                    const std::array<double, kTaskCount>& u) {
  return score_over(probs, u, kActionTaskCount);
}

std::vector<RankedCandidate> rank(const ModelParams& params,
                                  const std::array<double, kTaskCount>& u,
                                  const std::vector<TrainingExample>& candidates) {
  return rank_over(params, u, candidates, kTaskCount);
}

std::vector<RankedCandidate> action_rank(const ModelParams& params,
                                         const std::array<double, kTaskCount>& u,
                                         const std::vector<TrainingExample>& candidates) {
  return rank_over(params, u, candidates, kActionTaskCount);
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw Error("train config: learning_rate must be positive");
  if (cfg.batch_size <= 0) throw Error("train config: batch_size must be positive");
  if (cfg.epochs < 1) throw Error("train config: epochs must be >= 1");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
    throw Error("train config: momentum must be in [0,1)");
  for (std::int64_t h : cfg.hidden_sizes)
    if (h <= 0) throw Error("train config: hidden sizes must be positive");
}

TrainResult train(const Dataset& dataset, const TrainConfig& cfg,
                  const std::array<double, kTaskCount>& w,
                  const std::array<double, kTaskCount>& u) {
  validate(cfg);
  if (dataset.rows.empty()) throw Error("train: empty dataset");
  if (dataset.feature_dim <= 0) throw Error("train: dataset has no features");

  TrainResult result;
  result.params = init_model(dataset.feature_dim, cfg.hidden_sizes, cfg.rng_seed);
  result.params.loss_weights = w;
  result.params.utility_weights = u;

  std::vector<double> flat = flatten_parameters(result.params);
  std::vector<double> velocity(flat.size(), 0.0);
  std::vector<double> grad;

  std::size_t n = dataset.rows.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.rng_seed, "shuffle", std::to_string(epoch)));
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(shuffle_rng.uniform_below(i));
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss_sum = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t len = std::min(static_cast<std::size_t>(cfg.batch_size), n - start);
      double batch_loss =
          grad_and_loss(result.params, dataset.rows, order.data() + start, len, w, kTaskCount,
                        grad);
      if (!std::isfinite(batch_loss))
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                    std::to_string(batch_no));
      for (std::size_t i = 0; i < flat.size(); ++i) {
        velocity[i] = cfg.momentum * velocity[i] - cfg.learning_rate * grad[i];
        flat[i] += velocity[i];
      }
      assign_parameters(result.params, flat);
      epoch_loss_sum += batch_loss * static_cast<double>(len);
      ++batch_no;
    }
    result.epoch_losses.push_back(epoch_loss_sum / static_cast<double>(n));
  }
  validate(result.params);
  return result;
}

void save_model(const ModelParams& p, const std::string& path) {
  validate(p);
  std::ostringstream out;
  out << "layers";
  for (std::int64_t s : p.layer_sizes) out << ' ' << s;
  out << '\n';
  for (std::size_t l = 0; l < trunk_layer_count(p); ++l) {
    out << "trunk_weight " << l;
    for (double v : p.trunk_weights[l]) out << ' ' << format_real_exact(v);
    out << '\n';
    out << "trunk_bias " << l;
    for (double v : p.trunk_biases[l]) out << ' ' << format_real_exact(v);
    out << '\n';
  }
  for (int i = 0; i < kTaskCount; ++i) {
    auto ti = static_cast<std::size_t>(i);
    std::string_view tok = to_token(static_cast<TaskId>(i));
    out << "head_weight " << tok;
    for (double v : p.head_weights[ti]) out << ' ' << format_real_exact(v);
    out << '\n';
    out << "head_bias " << tok << ' ' << format_real_exact(p.head_biases[ti]) << '\n';
  }
  for (int i = 0; i < kTaskCount; ++i)
    out << "loss_weight " << to_token(static_cast<TaskId>(i)) << ' '
        << format_real_exact(p.loss_weights[static_cast<std::size_t>(i)]) << '\n';
  for (int i = 0; i < kTaskCount; ++i)
    out << "utility_weight " << to_token(static_cast<TaskId>(i)) << ' '
        << format_real_exact(p.utility_weights[static_cast<std::size_t>(i)]) << '\n';
  write_file_atomic(path, out.str());
}

namespace {

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream in(line);
  std::string t;
  while (in >> t) toks.push_back(std::move(t));
  return toks;
}

std::vector<std::string> expect_line(std::istream& in, std::size_t& line_no,
                                     const std::string& tag, std::size_t n_values,
                                     const std::string& arg = "") {
  std::string line;
  if (!std::getline(in, line)) throw Error("model file: unexpected end, expected " + tag);
  ++line_no;
  auto toks = split_tokens(line);
  std::size_t expected = n_values + (arg.empty() ? 1 : 2);
  if (toks.size() != expected || toks[0] != tag || (!arg.empty() && toks[1] != arg))
    throw Error("model file line " + std::to_string(line_no) + ": expected \"" + tag +
                (arg.empty() ? "" : " " + arg) + "\" with " + std::to_string(n_values) +
                " values");
  return toks;
}

}  // namespace

ModelParams load_model(const std::string& path) {
  std::string text = read_file(path);
  std::istringstream in(text);
  std::size_t line_no = 0;

  std::string line;
  if (!std::getline(in, line)) throw Error("model file " + path + ": empty");
  ++line_no;
  auto toks = split_tokens(line);
  if (toks.size() < 2 || toks[0] != "layers")
    throw Error("model file " + path + ": first line must list layer sizes");
  ModelParams p;
  for (std::size_t i = 1; i < toks.size(); ++i)
    p.layer_sizes.push_back(parse_int(toks[i], "layer size"));
  for (std::int64_t s : p.layer_sizes)
    if (s <= 0) throw Error("model file " + path + ": layer sizes must be positive");

  for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
    auto in_dim = static_cast<std::size_t>(p.layer_sizes[l]);
    auto out_dim = static_cast<std::size_t>(p.layer_sizes[l + 1]);
    auto wt = expect_line(in, line_no, "trunk_weight", in_dim * out_dim, std::to_string(l));
    std::vector<double> W;
    W.reserve(in_dim * out_dim);
    for (std::size_t i = 2; i < wt.size(); ++i) W.push_back(parse_real(wt[i], "trunk weight"));
    p.trunk_weights.push_back(std::move(W));
    auto bt = expect_line(in, line_no, "trunk_bias", out_dim, std::to_string(l));
    std::vector<double> b;
    b.reserve(out_dim);
    for (std::size_t i = 2; i < bt.size(); ++i) b.push_back(parse_real(bt[i], "trunk bias"));
    p.trunk_biases.push_back(std::move(b));
  }
  auto trunk_out = static_cast<std::size_t>(p.layer_sizes.back());
  for (int i = 0; i < kTaskCount; ++i) {
    auto ti = static_cast<std::size_t>(i);
    std::string tok(to_token(static_cast<TaskId>(i)));
    auto wt = expect_line(in, line_no, "head_weight", trunk_out, tok);
    std::vector<double> hw;
    hw.reserve(trunk_out);
    for (std::size_t k = 2; k < wt.size(); ++k) hw.push_back(parse_real(wt[k], "head weight"));
    p.head_weights[ti] = std::move(hw);
    auto bt = expect_line(in, line_no, "head_bias", 1, tok);
    p.head_biases[ti] = parse_real(bt[2], "head bias");
  }
  for (int i = 0; i < kTaskCount; ++i) {
    auto lt = expect_line(in, line_no, "loss_weight", 1, std::string(to_token(static_cast<TaskId>(i))));
    p.loss_weights[static_cast<std::size_t>(i)] = parse_real(lt[2], "loss weight");
  }
  for (int i = 0; i < kTaskCount; ++i) {
    auto ut = expect_line(in, line_no, "utility_weight", 1,
                          std::string(to_token(static_cast<TaskId>(i))));
    p.utility_weights[static_cast<std::size_t>(i)] = parse_real(ut[2], "utility weight");
  }
  while (std::getline(in, line))
    if (!trim(line).empty()) throw Error("model file " + path + ": trailing content");
  validate(p);
  return p;
}

}  // namespace revisit
