#pragma once

// Entry points behind the `framesearch` subcommands. Each takes a plain
// options struct so the same code path serves the CLI, tests and bindings.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "framesearch/episode.hpp"
#include "framesearch/hmm.hpp"
#include "framesearch/sweep.hpp"

namespace framesearch {

enum class InitialMode { kEmpirical, kStationary };

struct TrainOptions {
  std::string labels_path;
  std::string scores_path;
  double smoothing = 1.0;
  InitialMode initial = InitialMode::kEmpirical;
  std::optional<std::string> out_path;
};

/// Fits params on videos with at least one frame of interest: quantile
/// boundaries over all their scores, then transition, emission and initial.
HmmParams cmd_train(const TrainOptions& options);

/// Same fit from records already in memory.
HmmParams train_params(std::vector<VideoRecord> records, double smoothing,
                       InitialMode initial = InitialMode::kEmpirical);

struct EvalOptions {
  std::string labels_path;
  std::optional<std::string> scores_path;
  std::optional<std::string> server_address;
  std::string params_path;
  std::string grid = kDefaultGrid;
  std::size_t max_clip_len = 300;
  bool uniform_baseline = false;
  bool frame_weighted = false;
  std::size_t jobs = 1;
  std::optional<std::string> out_csv;
  std::optional<std::string> plot_path;
};

/// Loads, filters to videos with a frame of interest, clips, and sweeps.
SweepResult cmd_eval(const EvalOptions& options);

/// Evaluation clips as cmd_eval builds them.
std::vector<VideoRecord> evaluation_clips(std::vector<VideoRecord> records,
                                          std::size_t max_clip_len);

struct QueryOptions {
  std::string params_path;
  std::string video_id;
  std::optional<std::string> labels_path;
  std::optional<std::string> scores_path;
  std::optional<std::string> server_address;
  double bandwidth_ratio = 0.0;
  bool uniform_baseline = false;
  std::vector<FrameIndex> opening_frames;
  std::optional<std::string> dump_path;
  std::optional<std::string> losses_path;
};

/// One episode on one video; optionally dumps the result and the per-step
/// expected-loss vectors.
EpisodeResult cmd_query(const QueryOptions& options);

struct SynthOptions {
  std::optional<std::string> params_path;
  std::string preset = "persistent";
  std::size_t num_videos = 100;
  std::size_t frames = 300;
  std::uint64_t seed = 0;
  std::string out_dir;
};

struct SynthDataset {
  HmmParams params;
  std::vector<VideoRecord> records;
};

/// Writes labels.jsonl, scores.jsonl and params.json under out_dir.
SynthDataset cmd_synth(const SynthOptions& options);

/// In-memory part of cmd_synth.
SynthDataset synthesize(const HmmParams& params, std::size_t num_videos, std::size_t frames,
                        std::uint64_t seed);

/// Named generator settings. Throws InvalidArgument for unknown names.
HmmParams preset_params(const std::string& name);

}  // namespace framesearch
