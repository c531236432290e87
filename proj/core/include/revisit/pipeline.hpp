#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "revisit/config.hpp"

namespace revisit {

/// A file a stage read or wrote. Artifacts inside out_dir are recorded by
/// their name only, so a rerun into any directory produces the same manifest
/// bytes; externally supplied inputs keep their configured path.
struct ArtifactRef {
  std::string path;
  std::string digest;

  bool operator==(const ArtifactRef&) const = default;
};

struct StageRecord {
  std::string name;
  std::string status = "pending";  // pending -> ok | failed | skipped
  std::string error;               // set when failed
  std::vector<ArtifactRef> inputs;
  std::vector<ArtifactRef> outputs;
  std::vector<std::string> notes;
  std::vector<double> epoch_losses;  // train stage only
};

/// Logical stage order. The three middle stages after generate are
/// independent and run concurrently; everything later is sequential.
inline constexpr std::array<std::string_view, 9> kPipelineStageNames = {
    "generate",  "perf_features", "action_labels", "revisit_join", "build_labels",
    "assemble",  "train",         "evaluate",      "analyze"};

inline constexpr std::array<std::string_view, 3> kConcurrentStageNames = {
    "perf_features", "action_labels", "revisit_join"};

struct PipelineResult {
  std::vector<StageRecord> stages;  // kPipelineStageNames order
  std::string manifest_path;
};

/// Runs the full flow: synthesize or ingest the log; perf features, action
/// labels and the revisit join concurrently; label construction; dataset
/// assembly with a train/eval split on request day; then the optional
/// train/evaluate/analyze stages. Writes out_dir/manifest.json (sorted keys,
/// no timestamps) recording per-stage status, input and output digests;
/// the manifest is also written, with partial state, before a failure is
/// rethrown. Reruns with identical config and inputs are byte-identical
/// regardless of worker count.
///
/// concurrent_order is a test hook: when non-null the concurrent group runs
/// serially in exactly that order (a permutation of kConcurrentStageNames).
PipelineResult run_pipeline(const PipelineConfig& cfg,
                            const std::vector<std::string>* concurrent_order = nullptr);

}  // namespace revisit
