#include "framesearch/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "framesearch/data.hpp"
#include "framesearch/error.hpp"
#include "framesearch/policy.hpp"
#include "framesearch/server.hpp"

namespace framesearch {
namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot write file");
  out << text;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<VideoRecord> with_frames_of_interest(std::vector<VideoRecord> records) {
  std::erase_if(records, [](const VideoRecord& r) { return !r.has_frame_of_interest(); });
  return records;
}

}  // namespace

HmmParams train_params(std::vector<VideoRecord> records, double smoothing, InitialMode initial) {
  records = with_frames_of_interest(std::move(records));
  if (records.empty()) throw DataError("no frames of interest in training set");

  std::vector<double> pooled;
  for (const auto& r : records) {
    if (!r.scores) throw DataError("video \"" + r.video_id + "\" has no scores");
    pooled.insert(pooled.end(), r.scores->begin(), r.scores->end());
  }
  const auto binner = compute_quantiles(pooled);

  std::vector<std::vector<Label>> labels;
  std::vector<std::vector<Symbol>> symbols;
  for (const auto& r : records) {
    labels.push_back(r.labels);
    std::vector<Symbol> x;
    x.reserve(r.frames());
    for (double s : *r.scores) x.push_back(binner.discretize(s));
    symbols.push_back(std::move(x));
  }

  HmmParams params;
  params.transition = estimate_transition(labels, smoothing);
  params.emission = estimate_emission(labels, symbols, smoothing);
  params.initial = initial == InitialMode::kEmpirical ? estimate_initial(labels)
                                                      : stationary_distribution(params.transition);
  params.boundaries = binner.boundaries();
  return params;
}

HmmParams cmd_train(const TrainOptions& options) {
  auto records = load_labels(options.labels_path);
  load_scores(options.scores_path, records);
  auto params = train_params(std::move(records), options.smoothing, options.initial);
  if (options.out_path) save_params(params, *options.out_path);
  return params;
}

std::vector<VideoRecord> evaluation_clips(std::vector<VideoRecord> records,
                                          std::size_t max_clip_len) {
  records = with_frames_of_interest(std::move(records));
  if (records.empty()) throw DataError("empty evaluation set: no video has a frame of interest");
  std::vector<VideoRecord> clips;
  for (const auto& r : records) {
    for (auto& clip : clip_video(r, max_clip_len)) clips.push_back(std::move(clip));
  }
  return clips;
}

SweepResult cmd_eval(const EvalOptions& options) {
  const auto params = load_params(options.params_path);
  const QuantileBinner binner(params.boundaries);
  const auto grid = parse_grid(options.grid);

  auto records = load_labels(options.labels_path);
  SourceFactory sources;
  if (options.server_address) {
    sources = remote_sources(*options.server_address, options.max_clip_len);
  } else if (options.scores_path) {
    load_scores(*options.scores_path, records);
    sources = local_sources();
  } else {
    throw InvalidArgument("eval needs --scores or --server");
  }
  const auto clips = evaluation_clips(std::move(records), options.max_clip_len);

  SweepOptions sweep;
  sweep.uniform_baseline = options.uniform_baseline;
  sweep.frame_weighted = options.frame_weighted;
  sweep.jobs = options.jobs;
  auto result = run_sweep(params, binner, clips, grid, sources, sweep);
  if (options.out_csv) write_text(*options.out_csv, to_csv(result));
  if (options.plot_path) write_text(*options.plot_path, to_plot_data(result));
  return result;
}

EpisodeResult cmd_query(const QueryOptions& options) {
  const auto params = load_params(options.params_path);
  const QuantileBinner binner(params.boundaries);

  std::optional<VideoRecord> record;
  if (options.labels_path) {
    auto records = load_labels(*options.labels_path);
    if (options.scores_path && !options.server_address) load_scores(*options.scores_path, records);
    for (auto& r : records) {
      if (r.video_id == options.video_id) record = std::move(r);
    }
    if (!record) throw DataError("no such video: \"" + options.video_id + "\"");
  } else if (options.scores_path) {
    throw InvalidArgument("--scores needs --labels to locate the video");
  }

  std::unique_ptr<FrameSource> source;
  if (options.server_address) {
    source = std::make_unique<RemoteFrameSource>(*options.server_address, options.video_id);
  } else if (record && record->scores) {
    source = std::make_unique<InMemoryFrameSource>(*record->scores);
  } else {
    throw InvalidArgument("query needs --labels with --scores, or --server");
  }

  std::optional<std::span<const Label>> labels;
  if (record) labels = std::span<const Label>(record->labels);

  auto steps = nlohmann::ordered_json::array();
  StepObserver on_step;
  if (options.losses_path) {
    on_step = [&](const QueryPlan& plan, const Belief&) {
      nlohmann::ordered_json step;
      step["next"] = plan.next;
      step["expected_losses"] = losses_to_json(plan);
      steps.push_back(std::move(step));
    };
  }
  const auto result =
      options.uniform_baseline
          ? uniform_baseline_episode(params, binner, *source, options.bandwidth_ratio, labels)
          : run_episode_with_opening(params, binner, *source, options.bandwidth_ratio,
                                     options.opening_frames, labels, on_step);
  if (options.dump_path) write_text(*options.dump_path, to_json(result).dump() + "\n");
  if (options.losses_path) write_text(*options.losses_path, steps.dump() + "\n");
  return result;
}

HmmParams preset_params(const std::string& name) {
  if (name == "persistent") {
    HmmParams params;
    params.transition = {{{0.98, 0.02}, {0.04, 0.96}}};
    params.emission = {{{0.7, 0.2, 0.1}, {0.1, 0.2, 0.7}}};
    params.initial = {2.0 / 3.0, 1.0 / 3.0};
    params.boundaries = {1.0 / 3.0, 2.0 / 3.0};
    return params;
  }
  throw InvalidArgument("unknown preset \"" + name + "\"");
}

SynthDataset synthesize(const HmmParams& params, std::size_t num_videos, std::size_t frames,
                        std::uint64_t seed) {
  if (num_videos == 0) throw InvalidArgument("num_videos must be at least 1");
  SynthDataset out;
  out.params = params;
  out.params.boundaries = {1.0 / 3.0, 2.0 / 3.0};
  for (std::size_t i = 0; i < num_videos; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "synth-%05zu", i);
    out.records.push_back(
        generate_synthetic(params, frames, splitmix64(seed ^ splitmix64(i)), id).record);
  }
  return out;
}

SynthDataset cmd_synth(const SynthOptions& options) {
  const auto params =
      options.params_path ? load_params(*options.params_path) : preset_params(options.preset);
  auto dataset = synthesize(params, options.num_videos, options.frames, options.seed);
  std::filesystem::create_directories(options.out_dir);
  const std::filesystem::path dir(options.out_dir);
  write_labels((dir / "labels.jsonl").string(), dataset.records);
  write_scores((dir / "scores.jsonl").string(), dataset.records);
  save_params(dataset.params, (dir / "params.json").string());
  return dataset;
}

}  // namespace framesearch
