// Single-binary CLI over the revisit laboratory: log synthesis, the
// attribution join, feature tables, dataset assembly, training, ranking
// evaluation, behavioral reports, and the end-to-end pipeline.
//
// Exit codes: 0 success, 1 runtime or config error, 2 usage error.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "revisit/analyzer.hpp"
#include "revisit/attribution.hpp"
#include "revisit/config.hpp"
#include "revisit/dataset.hpp"
#include "revisit/evaluator.hpp"
#include "revisit/event_log.hpp"
#include "revisit/loggen.hpp"
#include "revisit/perf_features.hpp"
#include "revisit/pipeline.hpp"
#include "revisit/ranker.hpp"
#include "revisit/util.hpp"

namespace {

using namespace revisit;

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());
}

PipelineConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return PipelineConfig{};
  return parse_config_file(path);
}

struct DayRange {
  DayIndex first = 0;
  DayIndex last = 0;
};

DayRange day_range(const std::vector<EventRecord>& events) {
  if (events.empty()) throw Error("event log is empty");
  DayRange r{day_index(events.front().timestamp), day_index(events.front().timestamp)};
  for (const EventRecord& e : events) {
    r.first = std::min(r.first, day_index(e.timestamp));
    r.last = std::max(r.last, day_index(e.timestamp));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Subcommand handlers.
// ---------------------------------------------------------------------------

struct GenerateOpts {
  std::string config;
  std::string out = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void cmd_generate(const GenerateOpts& o) {
  PipelineConfig cfg = load_config_or_default(o.config);
  if (o.seed_set) cfg.gen.rng_seed = o.seed;
  validate(cfg.gen);
  ensure_dir(o.out);
  auto events = generate_log(cfg.gen);
  auto sidecar = emit_feature_sidecar(cfg.gen, events);
  write_event_log_file(events, join_path(o.out, "events.csv"));
  write_sidecar_file(sidecar, cfg.gen.feature_dim, join_path(o.out, "sidecar.csv"));
  std::cout << "wrote " << events.size() << " events and " << sidecar.size()
            << " sidecar rows to " << o.out << "\n";
}

struct AttributeOpts {
  std::string log;
  std::string out = "out";
  std::int64_t max_day = 6;
};

void cmd_attribute(const AttributeOpts& o) {
  std::string log = o.log.empty() ? join_path(o.out, "events.csv") : o.log;
  auto events = parse_event_log_file(log);
  auto saves = derive_saves(events);
  auto pairs = join_revisits(saves, derive_revisit_events(events), o.max_day);
  ensure_dir(o.out);
  write_pairs_file(pairs, join_path(o.out, "pairs.csv"));
  auto labels = build_labels(pairs, saves);
  write_labels_file(labels, join_path(o.out, "labels.csv"));
  std::cout << "joined " << pairs.size() << " revisit pairs over " << saves.size()
            << " saves; wrote pairs.csv and labels.csv to " << o.out << "\n";
}

struct FeaturesOpts {
  std::string log;
  std::string out = "out";
};

void cmd_features(const FeaturesOpts& o) {
  std::string log = o.log.empty() ? join_path(o.out, "events.csv") : o.log;
  auto events = parse_event_log_file(log);
  auto range = day_range(events);
  auto saves = derive_saves(events);
  auto pairs = join_revisits(saves, derive_revisit_events(events), 6);
  auto rows = build_feature_tables(events, pairs, range.first, range.last);
  ensure_dir(o.out);
  write_feature_table(rows, join_path(o.out, "features.csv"));
  std::cout << "wrote " << rows.size() << " feature rows to " << o.out << "\n";
}

struct AssembleOpts {
  std::string log;
  std::string sidecar;
  std::string out = "out";
  std::int64_t eval_last_days = 3;
};

void cmd_assemble(const AssembleOpts& o) {
  if (o.eval_last_days < 1) throw Error("--eval-last-days must be >= 1");
  std::string log = o.log.empty() ? join_path(o.out, "events.csv") : o.log;
  std::string sidecar_path = o.sidecar.empty() ? join_path(o.out, "sidecar.csv") : o.sidecar;
  auto events = parse_event_log_file(log);
  auto range = day_range(events);
  auto sidecar = parse_sidecar_file(sidecar_path);
  std::int64_t sidecar_dim =
      sidecar.empty() ? 0 : static_cast<std::int64_t>(sidecar.front().features.size());
  auto rows = attach_revisit_label(extract_action_labels(events),
                                   parse_labels_file(join_path(o.out, "labels.csv")));
  FeatureStore store(parse_feature_table(join_path(o.out, "features.csv")), range.first);

  DayIndex usable = range.last - 6;  // 7-day revisit labels must be complete
  DayIndex train_cut = usable - o.eval_last_days;
  if (train_cut < range.first)
    throw Error("log too short to split: labels mature after 6 days and " +
                std::to_string(o.eval_last_days) + " eval days are held out");
  std::vector<ActionLabelRow> train_rows;
  std::vector<ActionLabelRow> eval_rows;
  for (auto& row : rows) {
    if (row.request_day <= train_cut)
      train_rows.push_back(std::move(row));
    else if (row.request_day <= usable)
      eval_rows.push_back(std::move(row));
  }
  if (train_rows.empty()) throw Error("train split is empty");
  if (eval_rows.empty()) throw Error("eval split is empty");
  Dataset train_ds = assemble(sidecar, store, train_rows, sidecar_dim);
  Dataset eval_ds = assemble(sidecar, store, eval_rows, sidecar_dim);
  write_dataset(train_ds, join_path(o.out, "train.csv"));
  write_dataset(eval_ds, join_path(o.out, "eval.csv"));
  std::cout << "wrote " << train_ds.rows.size() << " train rows and " << eval_ds.rows.size()
            << " eval rows to " << o.out << "\n";
}

struct TrainOpts {
  std::string config;
  std::string data;
  std::string out = "out";
  std::int64_t epochs = 0;
  double lr = 0.0;
  std::int64_t batch_size = 0;
  double momentum = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::int64_t> hidden;
  double u_rp_rv_ratio = 0.0;
  // which flags were passed
  bool epochs_set = false, lr_set = false, batch_set = false, momentum_set = false;
  bool seed_set = false, hidden_set = false, ratio_set = false;
};

void cmd_train(const TrainOpts& o) {
  PipelineConfig cfg = load_config_or_default(o.config);
  if (o.epochs_set) cfg.train.epochs = o.epochs;
  if (o.lr_set) cfg.train.learning_rate = o.lr;
  if (o.batch_set) cfg.train.batch_size = o.batch_size;
  if (o.momentum_set) cfg.train.momentum = o.momentum;
  if (o.seed_set) cfg.train.rng_seed = o.seed;
  if (o.hidden_set) cfg.train.hidden_sizes = o.hidden;
  if (o.ratio_set) cfg.u_rp_rv_ratio = o.u_rp_rv_ratio;
  apply_rp_rv_ratio(cfg);
  validate(cfg.train);
  std::string data = o.data.empty() ? join_path(o.out, "train.csv") : o.data;
  Dataset ds = parse_dataset(data);
  TrainResult result = train(ds, cfg.train, cfg.loss_weights, cfg.utility_weights);
  ensure_dir(o.out);
  save_model(result.params, join_path(o.out, "model.txt"));
  std::cout << "trained on " << ds.rows.size() << " rows;";
  for (std::size_t i = 0; i < result.epoch_losses.size(); ++i)
    std::cout << " epoch " << i << " loss " << format_real(result.epoch_losses[i]);
  std::cout << "; wrote model.txt to " << o.out << "\n";
}

struct EvaluateOpts {
  std::string model;
  std::string data;
  std::string baseline;
  std::string out = "out";
  std::int64_t k = 3;
};

void cmd_evaluate(const EvaluateOpts& o) {
  if (o.k < 1) throw Error("--k must be >= 1");
  std::string model_path = o.model.empty() ? join_path(o.out, "model.txt") : o.model;
  std::string data = o.data.empty() ? join_path(o.out, "eval.csv") : o.data;
  ModelParams params = load_model(model_path);
  Dataset ds = parse_dataset(data);
  auto feeds = build_feeds(params, params.utility_weights, ds, /*action_heads_only=*/false);
  EvalResult result = eval_feed(feeds, static_cast<int>(o.k));
  ensure_dir(o.out);
  write_eval_report(result, join_path(o.out, "report.csv"));
  std::cout << "evaluated " << result.n_feeds << " feeds at k=" << o.k
            << "; wrote report.csv to " << o.out << "\n";
  if (o.baseline.empty()) return;
  ModelParams base = load_model(o.baseline);
  auto base_feeds = build_feeds(base, base.utility_weights, ds, /*action_heads_only=*/false);
  EvalResult base_result = eval_feed(base_feeds, static_cast<int>(o.k));
  write_lift_report(result, lift(result, base_result), join_path(o.out, "lift.csv"));
  std::cout << "wrote lift.csv (vs " << o.baseline << ") to " << o.out << "\n";
}

struct AnalyzeOpts {
  std::string log;
  std::string labels;
  std::string model;
  std::string data;
  std::string out = "out";
  std::int64_t k = 3;
  bool plot_data = false;
  bool model_set = false;
};

void cmd_analyze(const AnalyzeOpts& o) {
  if (o.k < 1) throw Error("--k must be >= 1");
  std::string log = o.log.empty() ? join_path(o.out, "events.csv") : o.log;
  std::string labels_path = o.labels.empty() ? join_path(o.out, "labels.csv") : o.labels;
  std::string model_path = o.model.empty() ? join_path(o.out, "model.txt") : o.model;
  std::string data = o.data.empty() ? join_path(o.out, "eval.csv") : o.data;

  auto events = parse_event_log_file(log);
  auto labels = parse_labels_file(labels_path);

  std::vector<RankedFeed> feeds_a;
  std::vector<RankedFeed> feeds_b;
  bool have_feeds = false;
  if (o.model_set ||
      (std::filesystem::exists(model_path) && std::filesystem::exists(data))) {
    ModelParams params = load_model(model_path);
    Dataset ds = parse_dataset(data);
    feeds_a = build_feeds(params, params.utility_weights, ds, /*action_heads_only=*/false);
    feeds_b = build_feeds(params, params.utility_weights, ds, /*action_heads_only=*/true);
    have_feeds = true;
  } else {
    std::cout << "no model/eval artifacts; feed-dependent columns stay empty\n";
  }

  auto rows = topic_report(events, labels, have_feeds ? &feeds_a : nullptr,
                           have_feeds ? &feeds_b : nullptr, static_cast<int>(o.k));
  ensure_dir(o.out);
  write_topic_report_csv(rows, join_path(o.out, "topics.csv"));
  std::cout << "wrote topics.csv (" << rows.size() << " topics) to " << o.out << "\n";

  if (!o.plot_data) return;
  auto range = day_range(events);
  auto saves = derive_saves(events);
  auto revisits = derive_revisit_events(events);
  auto emit = [&](const char* name, const std::function<void(const std::string&)>& writer) {
    try {
      writer(join_path(o.out, name));
      std::cout << "wrote " << name << "\n";
    } catch (const std::exception& ex) {
      std::cout << name << " skipped: " << ex.what() << "\n";
    }
  };
  emit("fig3a.csv", [&](const std::string& p) {
    write_fig3a_csv(daily_revisit_user_fraction(saves, revisits, 9, range.last), p);
  });
  emit("fig3b.csv", [&](const std::string& p) {
    write_fig3b_csv(daily_revisit_volume_fraction(saves, revisits, 9, range.last), p);
  });
  emit("fig4.csv", [&](const std::string& p) {
    write_fig4_csv(activity_by_revisit_status(events, 6, 28), p);
  });
  emit("fig5.csv", [&](const std::string& p) {
    write_fig5_csv(revisit_engagement_correlation(events, 6, 28), p);
  });
  emit("fig8.csv", [&](const std::string& p) { write_fig8_csv(rows, p); });
  emit("fig9.csv", [&](const std::string& p) { write_fig9_csv(rows, p); });
  emit("table3.csv", [&](const std::string& p) { write_table3_csv(rows, p); });
}

struct PipelineOpts {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void cmd_pipeline(const PipelineOpts& o) {
  PipelineConfig cfg = load_config_or_default(o.config);
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.seed_set) {
    cfg.gen.rng_seed = o.seed;
    cfg.train.rng_seed = o.seed;
  }
  PipelineResult result = run_pipeline(cfg);
  for (const StageRecord& rec : result.stages) {
    std::cout << "stage " << rec.name << ": " << rec.status;
    for (const std::string& note : rec.notes) std::cout << " (" << note << ")";
    std::cout << "\n";
  }
  std::cout << "manifest: " << result.manifest_path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"revisit laboratory: synthetic logs, revisit attribution, ranking"};
  app.require_subcommand(1);

  GenerateOpts gen_opts;
  auto* gen_cmd = app.add_subcommand("generate", "Synthesize an event log and feature sidecar");
  gen_cmd->add_option("--config", gen_opts.config, "Config file (generator keys)");
  gen_cmd->add_option("--out", gen_opts.out, "Output directory")->capture_default_str();
  auto* gen_seed = gen_cmd->add_option("--seed", gen_opts.seed, "Generator seed override");

  AttributeOpts attr_opts;
  auto* attr_cmd =
      app.add_subcommand("attribute", "Join saves to own-profile revisits; emit pairs and labels");
  attr_cmd->add_option("--log", attr_opts.log, "Event log (default <out>/events.csv)");
  attr_cmd->add_option("--out", attr_opts.out, "Output directory")->capture_default_str();
  attr_cmd->add_option("--max-day", attr_opts.max_day, "Attribution window in days")
      ->capture_default_str();

  FeaturesOpts feat_opts;
  auto* feat_cmd = app.add_subcommand("features", "Build windowed pin performance tables");
  feat_cmd->add_option("--log", feat_opts.log, "Event log (default <out>/events.csv)");
  feat_cmd->add_option("--out", feat_opts.out, "Output directory")->capture_default_str();

  AssembleOpts asm_opts;
  auto* asm_cmd =
      app.add_subcommand("assemble", "Assemble train/eval datasets from labels and features");
  asm_cmd->add_option("--log", asm_opts.log, "Event log (default <out>/events.csv)");
  asm_cmd->add_option("--sidecar", asm_opts.sidecar, "Feature sidecar (default <out>/sidecar.csv)");
  asm_cmd->add_option("--out", asm_opts.out, "Workspace directory")->capture_default_str();
  asm_cmd->add_option("--eval-last-days", asm_opts.eval_last_days,
                      "Trailing usable days held out for evaluation")
      ->capture_default_str();

  TrainOpts train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train the multi-task ranker");
  train_cmd->add_option("--config", train_opts.config, "Config file ([train]/[weights] sections)");
  train_cmd->add_option("--data", train_opts.data, "Training dataset (default <out>/train.csv)");
  train_cmd->add_option("--out", train_opts.out, "Output directory")->capture_default_str();
  auto* t_epochs = train_cmd->add_option("--epochs", train_opts.epochs, "Training epochs");
  auto* t_lr = train_cmd->add_option("--lr", train_opts.lr, "Learning rate");
  auto* t_batch = train_cmd->add_option("--batch-size", train_opts.batch_size, "Mini-batch size");
  auto* t_mom = train_cmd->add_option("--momentum", train_opts.momentum, "SGD momentum");
  auto* t_seed = train_cmd->add_option("--seed", train_opts.seed, "Shuffle/init seed");
  auto* t_hidden = train_cmd->add_option("--hidden-sizes", train_opts.hidden,
                                         "Trunk hidden layer sizes, comma separated")
                       ->delimiter(',');
  auto* t_ratio = train_cmd->add_option("--u-rp-rv-ratio", train_opts.u_rp_rv_ratio,
                                        "Revisit-head utility as a ratio of the repin utility");

  EvaluateOpts eval_opts;
  auto* eval_cmd = app.add_subcommand("evaluate", "Rank the eval feeds and report metrics");
  eval_cmd->add_option("--model", eval_opts.model, "Model file (default <out>/model.txt)");
  eval_cmd->add_option("--data", eval_opts.data, "Eval dataset (default <out>/eval.csv)");
  eval_cmd->add_option("--baseline", eval_opts.baseline, "Second model; also writes lift.csv");
  eval_cmd->add_option("--out", eval_opts.out, "Output directory")->capture_default_str();
  eval_cmd->add_option("--k", eval_opts.k, "Ranking cutoff")->capture_default_str();

  AnalyzeOpts an_opts;
  auto* an_cmd = app.add_subcommand("analyze", "Behavioral reports and figure plot-data");
  an_cmd->add_option("--log", an_opts.log, "Event log (default <out>/events.csv)");
  an_cmd->add_option("--labels", an_opts.labels, "Labels file (default <out>/labels.csv)");
  auto* an_model = an_cmd->add_option("--model", an_opts.model,
                                      "Model for feed-dependent columns (default <out>/model.txt)");
  an_cmd->add_option("--data", an_opts.data, "Eval dataset (default <out>/eval.csv)");
  an_cmd->add_option("--out", an_opts.out, "Output directory")->capture_default_str();
  an_cmd->add_option("--k", an_opts.k, "Top-k cutoff for the repin volume lift")
      ->capture_default_str();
  an_cmd->add_flag("--plot-data", an_opts.plot_data, "Also emit per-figure CSVs");

  PipelineOpts pipe_opts;
  auto* pipe_cmd = app.add_subcommand("pipeline", "Run the full stage DAG");
  pipe_cmd->add_option("--config", pipe_opts.config, "Config file");
  pipe_cmd->add_option("--out", pipe_opts.out, "Output directory override");
  auto* p_seed = pipe_cmd->add_option("--seed", pipe_opts.seed,
                                      "Seed override for generation and training");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);  // prints help or the parse error
    return code == 0 ? 0 : 2;
  }

  gen_opts.seed_set = gen_seed->count() > 0;
  train_opts.epochs_set = t_epochs->count() > 0;
  train_opts.lr_set = t_lr->count() > 0;
  train_opts.batch_set = t_batch->count() > 0;
  train_opts.momentum_set = t_mom->count() > 0;
  train_opts.seed_set = t_seed->count() > 0;
  train_opts.hidden_set = t_hidden->count() > 0;
  train_opts.ratio_set = t_ratio->count() > 0;
  an_opts.model_set = an_model->count() > 0;
  pipe_opts.seed_set = p_seed->count() > 0;

  try {
    if (app.got_subcommand(gen_cmd)) cmd_generate(gen_opts);
    if (app.got_subcommand(attr_cmd)) cmd_attribute(attr_opts);
    if (app.got_subcommand(feat_cmd)) cmd_features(feat_opts);
    if (app.got_subcommand(asm_cmd)) cmd_assemble(asm_opts);
    if (app.got_subcommand(train_cmd)) cmd_train(train_opts);
    if (app.got_subcommand(eval_cmd)) cmd_evaluate(eval_opts);
    if (app.got_subcommand(an_cmd)) cmd_analyze(an_opts);
    if (app.got_subcommand(pipe_cmd)) cmd_pipeline(pipe_opts);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
