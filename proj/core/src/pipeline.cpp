#include "revisit/pipeline.hpp"

#include <algorithm>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <utility>

#include "json.hpp"
#include "revisit/analyzer.hpp"
#include "revisit/attribution.hpp"
#include "revisit/dataset.hpp"
#include "revisit/evaluator.hpp"
#include "revisit/event_log.hpp"
#include "revisit/loggen.hpp"
#include "revisit/perf_features.hpp"
#include "revisit/ranker.hpp"
#include "revisit/util.hpp"

namespace revisit {

namespace {

using nlohmann::json;

enum StageIndex : std::size_t {
  kGenerate = 0,
  kPerfFeatures,
  kActionLabels,
  kRevisitJoin,
  kBuildLabels,
  kAssemble,
  kTrain,
  kEvaluate,
  kAnalyze,
  kStageCount,
};

struct Ctx {
  const PipelineConfig& cfg;
  std::filesystem::path out_dir;
  std::vector<EventRecord> events;
  std::vector<SidecarRow> sidecar;
  std::int64_t sidecar_dim = 0;
  DayIndex first_day = 0;
  DayIndex last_day = 0;
  ArtifactRef log_ref;  // "events.csv" when generated, the configured path otherwise
  ArtifactRef sidecar_ref;
  std::array<StageRecord, kStageCount> stages;
};

std::string fs_path(const Ctx& ctx, const std::string& name) {
  return (ctx.out_dir / name).string();
}

// Out-dir artifacts enter the manifest under their bare name, so the bytes
// do not depend on where the run was rooted.
ArtifactRef artifact(const Ctx& ctx, const std::string& name) {
  return ArtifactRef{name, file_digest(fs_path(ctx, name))};
}

// ---------------------------------------------------------------------------
// Stage bodies. Each fills its record's inputs/outputs; run_stage owns status.
// ---------------------------------------------------------------------------

void stage_generate(Ctx& ctx, StageRecord& rec) {
  const PipelineConfig& cfg = ctx.cfg;
  if (cfg.run_generate) {
    validate(cfg.gen);
    ctx.events = generate_log(cfg.gen);
    ctx.sidecar = emit_feature_sidecar(cfg.gen, ctx.events);
    ctx.sidecar_dim = cfg.gen.feature_dim;
    write_event_log_file(ctx.events, fs_path(ctx, "events.csv"));
    write_sidecar_file(ctx.sidecar, ctx.sidecar_dim, fs_path(ctx, "sidecar.csv"));
    ctx.log_ref = artifact(ctx, "events.csv");
    ctx.sidecar_ref = artifact(ctx, "sidecar.csv");
    rec.outputs = {ctx.log_ref, ctx.sidecar_ref};
  } else {
    ctx.events = parse_event_log_file(cfg.event_log_path);
    ctx.sidecar = parse_sidecar_file(cfg.sidecar_path);
    ctx.sidecar_dim =
        ctx.sidecar.empty() ? 0 : static_cast<std::int64_t>(ctx.sidecar.front().features.size());
    ctx.log_ref = ArtifactRef{cfg.event_log_path, file_digest(cfg.event_log_path)};
    ctx.sidecar_ref = ArtifactRef{cfg.sidecar_path, file_digest(cfg.sidecar_path)};
    rec.inputs = {ctx.log_ref, ctx.sidecar_ref};
    rec.notes.push_back("synthesis disabled; ingested the provided log");
  }
  if (ctx.events.empty()) throw Error("event log is empty");
  ctx.first_day = day_index(ctx.events.front().timestamp);
  ctx.last_day = ctx.first_day;
  for (const EventRecord& e : ctx.events) {
    ctx.first_day = std::min(ctx.first_day, day_index(e.timestamp));
    ctx.last_day = std::max(ctx.last_day, day_index(e.timestamp));
  }
}

// Runs its own copy of the join: the concurrent group stages depend only on
// the log, never on each other.
void stage_perf_features(Ctx& ctx, StageRecord& rec) {
  rec.inputs = {ctx.log_ref};
  auto saves = derive_saves(ctx.events);
  auto pairs = join_revisits(saves, derive_revisit_events(ctx.events), 6);
  auto rows = build_feature_tables(ctx.events, pairs, ctx.first_day, ctx.last_day);
  write_feature_table(rows, fs_path(ctx, "features.csv"));
  rec.outputs = {artifact(ctx, "features.csv")};
}

void stage_action_labels(Ctx& ctx, StageRecord& rec) {
  rec.inputs = {ctx.log_ref};
  auto rows = extract_action_labels(ctx.events);
  write_action_labels(rows, fs_path(ctx, "action_labels.csv"));
  rec.outputs = {artifact(ctx, "action_labels.csv")};
}

void stage_revisit_join(Ctx& ctx, StageRecord& rec) {
  rec.inputs = {ctx.log_ref};
  auto saves = derive_saves(ctx.events);
  auto pairs = join_revisits(saves, derive_revisit_events(ctx.events), 6);
  write_pairs_file(pairs, fs_path(ctx, "pairs.csv"));
  rec.outputs = {artifact(ctx, "pairs.csv")};
}

void stage_build_labels(Ctx& ctx, StageRecord& rec) {
  rec.inputs = {artifact(ctx, "pairs.csv"), ctx.log_ref};
  auto pairs = parse_pairs_file(fs_path(ctx, "pairs.csv"));
  auto labels = build_labels(pairs, derive_saves(ctx.events));
  write_labels_file(labels, fs_path(ctx, "labels.csv"));
  rec.outputs = {artifact(ctx, "labels.csv")};
}

void stage_assemble(Ctx& ctx, StageRecord& rec) {
  rec.inputs = {artifact(ctx, "action_labels.csv"), artifact(ctx, "labels.csv"),
                artifact(ctx, "features.csv"), ctx.sidecar_ref};
  auto rows = attach_revisit_label(parse_action_labels(fs_path(ctx, "action_labels.csv")),
                                   parse_labels_file(fs_path(ctx, "labels.csv")));
  FeatureStore store(parse_feature_table(fs_path(ctx, "features.csv")), ctx.first_day);

  // A request is usable once its 7-day revisit label window has closed.
  DayIndex usable = ctx.last_day - 6;
  DayIndex train_cut = usable - ctx.cfg.eval_last_days;
  if (train_cut < ctx.first_day)
    throw Error("log too short to split: labels mature after 6 days and " +
                std::to_string(ctx.cfg.eval_last_days) + " eval days are held out");
  std::vector<ActionLabelRow> train_rows;
  std::vector<ActionLabelRow> eval_rows;
  for (auto& row : rows) {
    if (row.request_day <= train_cut)
      train_rows.push_back(std::move(row));
    else if (row.request_day <= usable)
      eval_rows.push_back(std::move(row));
    // Later requests have immature revisit labels and are dropped.
  }
  if (train_rows.empty()) throw Error("train split is empty");
  if (eval_rows.empty()) throw Error("eval split is empty");
  write_dataset(assemble(ctx.sidecar, store, train_rows, ctx.sidecar_dim),
                fs_path(ctx, "train.csv"));
  write_dataset(assemble(ctx.sidecar, store, eval_rows, ctx.sidecar_dim),
                fs_path(ctx, "eval.csv"));
  rec.outputs = {artifact(ctx, "train.csv"), artifact(ctx, "eval.csv")};
  rec.notes.push_back("train: request_day <= " + std::to_string(train_cut) +
                      "; eval: request_day in (" + std::to_string(train_cut) + ", " +
                      std::to_string(usable) + "]; later days dropped (immature labels)");
}

void stage_train(Ctx& ctx, StageRecord& rec) {
  rec.inputs = {artifact(ctx, "train.csv")};
  validate(ctx.cfg.train);
  Dataset ds = parse_dataset(fs_path(ctx, "train.csv"));
  TrainResult result = train(ds, ctx.cfg.train, ctx.cfg.loss_weights, ctx.cfg.utility_weights);
  save_model(result.params, fs_path(ctx, "model.txt"));
  rec.epoch_losses = std::move(result.epoch_losses);
  rec.outputs = {artifact(ctx, "model.txt")};
}

void stage_evaluate(Ctx& ctx, StageRecord& rec) {
  rec.inputs = {artifact(ctx, "model.txt"), artifact(ctx, "eval.csv")};
  ModelParams params = load_model(fs_path(ctx, "model.txt"));
  Dataset ds = parse_dataset(fs_path(ctx, "eval.csv"));
  auto feeds = build_feeds(params, params.utility_weights, ds, /*action_heads_only=*/false);
  EvalResult result = eval_feed(feeds, static_cast<int>(ctx.cfg.eval_k));
  write_eval_report(result, fs_path(ctx, "report.csv"));
  rec.outputs = {artifact(ctx, "report.csv")};
}

void stage_analyze(Ctx& ctx, StageRecord& rec) {
  rec.inputs = {ctx.log_ref, artifact(ctx, "labels.csv")};
  auto labels = parse_labels_file(fs_path(ctx, "labels.csv"));

  // Feed-dependent columns need a trained model and the eval split; compare
  // full-utility ranking against the action-heads-only control.
  std::vector<RankedFeed> feeds_a;
  std::vector<RankedFeed> feeds_b;
  bool have_feeds = false;
  if (std::filesystem::exists(fs_path(ctx, "model.txt")) &&
      std::filesystem::exists(fs_path(ctx, "eval.csv"))) {
    ModelParams params = load_model(fs_path(ctx, "model.txt"));
    Dataset ds = parse_dataset(fs_path(ctx, "eval.csv"));
    feeds_a = build_feeds(params, params.utility_weights, ds, /*action_heads_only=*/false);
    feeds_b = build_feeds(params, params.utility_weights, ds, /*action_heads_only=*/true);
    have_feeds = true;
    rec.inputs.push_back(artifact(ctx, "model.txt"));
    rec.inputs.push_back(artifact(ctx, "eval.csv"));
  } else {
    rec.notes.push_back("no model/eval artifacts; feed-dependent columns are empty");
  }

  auto rows = topic_report(ctx.events, labels, have_feeds ? &feeds_a : nullptr,
                           have_feeds ? &feeds_b : nullptr, static_cast<int>(ctx.cfg.eval_k));
  write_topic_report_csv(rows, fs_path(ctx, "topics.csv"));
  rec.outputs = {artifact(ctx, "topics.csv")};

  if (!ctx.cfg.plot_data) return;
  auto emit = [&](const char* name, const std::function<void(const std::string&)>& writer) {
    try {
      writer(fs_path(ctx, name));
      rec.outputs.push_back(artifact(ctx, name));
    } catch (const std::exception& ex) {
      rec.notes.push_back(std::string(name) + " skipped: " + ex.what());
    }
  };
  auto saves = derive_saves(ctx.events);
  auto revisits = derive_revisit_events(ctx.events);
  emit("fig3a.csv", [&](const std::string& p) {
    write_fig3a_csv(daily_revisit_user_fraction(saves, revisits, 9, ctx.last_day), p);
  });
  emit("fig3b.csv", [&](const std::string& p) {
    write_fig3b_csv(daily_revisit_volume_fraction(saves, revisits, 9, ctx.last_day), p);
  });
  emit("fig4.csv", [&](const std::string& p) {
    write_fig4_csv(activity_by_revisit_status(ctx.events, 6, 28), p);
  });
  emit("fig5.csv", [&](const std::string& p) {
    write_fig5_csv(revisit_engagement_correlation(ctx.events, 6, 28), p);
  });
  emit("fig8.csv", [&](const std::string& p) { write_fig8_csv(rows, p); });
  emit("fig9.csv", [&](const std::string& p) { write_fig9_csv(rows, p); });
  emit("table3.csv", [&](const std::string& p) { write_table3_csv(rows, p); });
}

// ---------------------------------------------------------------------------
// Orchestration, manifest, DAG check.
// ---------------------------------------------------------------------------

using StageFn = void (*)(Ctx&, StageRecord&);

void run_stage(Ctx& ctx, std::size_t idx, StageFn fn) {
  StageRecord& rec = ctx.stages[idx];
  try {
    fn(ctx, rec);
    rec.status = "ok";
  } catch (const std::exception& ex) {
    rec.status = "failed";
    rec.error = ex.what();
    throw Error("stage " + rec.name + ": " + ex.what());
  }
}

void maybe_run_stage(Ctx& ctx, std::size_t idx, bool enabled, StageFn fn) {
  if (!enabled) {
    ctx.stages[idx].status = "skipped";
    ctx.stages[idx].notes.push_back("disabled in config");
    return;
  }
  run_stage(ctx, idx, fn);
}

// The concurrent group: every member runs to completion (matching what
// threads would do) and failures are collected, not propagated mid-group.
void run_group(Ctx& ctx, const std::vector<std::string>& serial_order) {
  constexpr std::array<std::pair<std::size_t, StageFn>, 3> kTasks = {{
      {kPerfFeatures, &stage_perf_features},
      {kActionLabels, &stage_action_labels},
      {kRevisitJoin, &stage_revisit_join},
  }};
  auto run_one = [&](std::size_t t) {
    auto [idx, fn] = kTasks[t];
    StageRecord& rec = ctx.stages[idx];
    try {
      fn(ctx, rec);
      rec.status = "ok";
    } catch (const std::exception& ex) {
      rec.status = "failed";
      rec.error = ex.what();
    }
  };
  if (!serial_order.empty()) {
    for (const std::string& name : serial_order) {
      for (std::size_t t = 0; t < kTasks.size(); ++t) {
        if (ctx.stages[kTasks[t].first].name == name) run_one(t);
      }
    }
  } else {
    parallel_shards(kTasks.size(), run_one);
  }
  for (auto [idx, fn] : kTasks) {
    const StageRecord& rec = ctx.stages[idx];
    if (rec.status == "failed") throw Error("stage " + rec.name + ": " + rec.error);
  }
}

json artifact_json(const ArtifactRef& a) {
  json j = json::object();
  j["path"] = a.path;
  j["digest"] = a.digest;
  return j;
}

json stage_json(const StageRecord& rec) {
  json j = json::object();
  j["name"] = rec.name;
  j["status"] = rec.status;
  if (!rec.error.empty()) j["error"] = rec.error;
  json ins = json::array();
  for (const ArtifactRef& a : rec.inputs) ins.push_back(artifact_json(a));
  j["inputs"] = std::move(ins);
  json outs = json::array();
  for (const ArtifactRef& a : rec.outputs) outs.push_back(artifact_json(a));
  j["outputs"] = std::move(outs);
  if (!rec.notes.empty()) j["notes"] = rec.notes;
  if (!rec.epoch_losses.empty()) j["epoch_losses"] = rec.epoch_losses;
  return j;
}

// out_dir is deliberately not echoed: the manifest lives inside it, and its
// bytes must not depend on where the run was rooted.
json config_json(const PipelineConfig& cfg) {
  json gen = json::object();
  gen["n_users"] = cfg.gen.n_users;
  gen["n_days"] = cfg.gen.n_days;
  gen["requests_per_user_day"] = cfg.gen.requests_per_user_day;
  gen["candidates_per_request"] = cfg.gen.candidates_per_request;
  gen["pins_per_topic"] = cfg.gen.pins_per_topic;
  gen["p_repin"] = cfg.gen.p_repin;
  gen["p_grid_click"] = cfg.gen.p_grid_click;
  gen["p_click"] = cfg.gen.p_click;
  gen["p_long_click_given_click"] = cfg.gen.p_long_click_given_click;
  gen["revisit_impression_probs"] = cfg.gen.revisit_impression_probs;
  gen["revisit_grid_probs"] = cfg.gen.revisit_grid_probs;
  gen["topic_tilts"] = cfg.gen.topic_tilts;
  gen["topic_mixture"] = cfg.gen.topic_mixture;
  gen["feature_dim"] = cfg.gen.feature_dim;
  gen["planted_signal_strength"] = cfg.gen.planted_signal_strength;
  gen["rng_seed"] = cfg.gen.rng_seed;

  json train = json::object();
  train["learning_rate"] = cfg.train.learning_rate;
  train["batch_size"] = cfg.train.batch_size;
  train["epochs"] = cfg.train.epochs;
  train["momentum"] = cfg.train.momentum;
  train["hidden_sizes"] = cfg.train.hidden_sizes;
  train["rng_seed"] = cfg.train.rng_seed;

  json j = json::object();
  j["gen"] = std::move(gen);
  j["train"] = std::move(train);
  j["loss_weights"] = cfg.loss_weights;
  j["utility_weights"] = cfg.utility_weights;
  if (cfg.u_rp_rv_ratio) j["u_rp_rv_ratio"] = *cfg.u_rp_rv_ratio;
  j["event_log"] = cfg.event_log_path;
  j["sidecar"] = cfg.sidecar_path;
  j["eval_last_days"] = cfg.eval_last_days;
  j["eval_k"] = cfg.eval_k;
  j["run_generate"] = cfg.run_generate;
  j["run_train"] = cfg.run_train;
  j["run_evaluate"] = cfg.run_evaluate;
  j["run_analyze"] = cfg.run_analyze;
  j["plot_data"] = cfg.plot_data;
  return j;
}

// No stage may consume an artifact produced by a later stage, and the
// concurrent stages may not consume each other's outputs.
void check_dag(const Ctx& ctx) {
  std::map<std::string, std::size_t> producer;
  for (std::size_t i = 0; i < kStageCount; ++i) {
    for (const ArtifactRef& out : ctx.stages[i].outputs) {
      auto [it, inserted] = producer.emplace(out.path, i);
      if (!inserted)
        throw Error("pipeline DAG check: " + out.path + " produced by both stage " +
                    ctx.stages[it->second].name + " and stage " + ctx.stages[i].name);
    }
  }
  auto in_group = [](std::size_t i) { return i >= kPerfFeatures && i <= kRevisitJoin; };
  for (std::size_t i = 0; i < kStageCount; ++i) {
    for (const ArtifactRef& in : ctx.stages[i].inputs) {
      auto it = producer.find(in.path);
      if (it == producer.end()) continue;  // external input
      if (it->second >= i)
        throw Error("pipeline DAG check: stage " + ctx.stages[i].name + " consumes " + in.path +
                    ", produced by stage " + ctx.stages[it->second].name + " which is not earlier");
      if (in_group(it->second) && in_group(i))
        throw Error("pipeline DAG check: concurrent stages share artifact " + in.path);
    }
  }
}

void write_manifest(const Ctx& ctx) {
  check_dag(ctx);
  json stages = json::array();
  for (const StageRecord& rec : ctx.stages) stages.push_back(stage_json(rec));
  json m = json::object();
  m["config"] = config_json(ctx.cfg);
  m["stage_order"] = std::vector<std::string>(kPipelineStageNames.begin(),
                                              kPipelineStageNames.end());
  m["concurrent_stages"] = std::vector<std::string>(kConcurrentStageNames.begin(),
                                                    kConcurrentStageNames.end());
  m["stages"] = std::move(stages);
  write_file_atomic(fs_path(ctx, "manifest.json"), m.dump(2) + "\n");
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg,
                            const std::vector<std::string>* concurrent_order) {
  if (cfg.out_dir.empty()) throw Error("pipeline: out_dir must not be empty");
  if (cfg.eval_last_days < 1) throw Error("pipeline: eval_last_days must be >= 1");
  if (cfg.eval_k < 1) throw Error("pipeline: k must be >= 1");
  if (cfg.run_generate && (!cfg.event_log_path.empty() || !cfg.sidecar_path.empty()))
    throw Error(
        "pipeline: event_log/sidecar are set but the generate stage is on; "
        "disable it to ingest existing files");
  if (!cfg.run_generate && (cfg.event_log_path.empty() || cfg.sidecar_path.empty()))
    throw Error("pipeline: generate is disabled, so event_log and sidecar paths are required");

  std::vector<std::string> serial_order;
  if (concurrent_order != nullptr) {
    serial_order = *concurrent_order;
    std::set<std::string> got(serial_order.begin(), serial_order.end());
    std::set<std::string> want(kConcurrentStageNames.begin(), kConcurrentStageNames.end());
    if (serial_order.size() != kConcurrentStageNames.size() || got != want)
      throw Error("pipeline: concurrent_order must be a permutation of the concurrent stages");
  }

  Ctx ctx{cfg};
  ctx.out_dir = cfg.out_dir;
  std::error_code ec;
  std::filesystem::create_directories(ctx.out_dir, ec);
  if (ec) throw Error("pipeline: cannot create out_dir " + cfg.out_dir + ": " + ec.message());
  for (std::size_t i = 0; i < kStageCount; ++i)
    ctx.stages[i].name = std::string(kPipelineStageNames[i]);

  auto finalize = [&ctx]() {
    write_manifest(ctx);
    PipelineResult result;
    result.stages.assign(ctx.stages.begin(), ctx.stages.end());
    result.manifest_path = fs_path(ctx, "manifest.json");
    return result;
  };

  try {
    run_stage(ctx, kGenerate, &stage_generate);
    run_group(ctx, serial_order);
    run_stage(ctx, kBuildLabels, &stage_build_labels);
    run_stage(ctx, kAssemble, &stage_assemble);
    maybe_run_stage(ctx, kTrain, cfg.run_train, &stage_train);
    maybe_run_stage(ctx, kEvaluate, cfg.run_evaluate, &stage_evaluate);
    maybe_run_stage(ctx, kAnalyze, cfg.run_analyze, &stage_analyze);
  } catch (...) {
    for (StageRecord& rec : ctx.stages) {
      if (rec.status == "pending") {
        rec.status = "skipped";
        rec.notes.push_back("not run: upstream failure");
      }
    }
    try {
      finalize();
    } catch (...) {
      // The original failure is the one worth reporting.
    }
    throw;
  }
  return finalize();
}

}  // namespace revisit
