#pragma once

// Accuracy-versus-bandwidth sweeps over a set of evaluation clips.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "framesearch/data.hpp"
#include "framesearch/episode.hpp"
#include "framesearch/hmm.hpp"

namespace framesearch {

struct SweepRow {
  double bandwidth_ratio = 0.0;
  double mean_accuracy = 0.0;
  std::size_t episodes = 0;
  std::optional<double> uniform_accuracy;

  bool operator==(const SweepRow&) const = default;
};

struct SweepResult {
  std::vector<SweepRow> rows;

  bool operator==(const SweepResult&) const = default;
};

/// "start:stop:step" (inclusive within 1e-9) or a comma-separated list.
/// Values must be strictly increasing and lie in [0, 1].
std::vector<double> parse_grid(const std::string& text);

inline constexpr const char* kDefaultGrid = "0:0.1:0.005";

/// Opens a frame source for one evaluation clip.
using SourceFactory = std::function<std::unique_ptr<FrameSource>(const VideoRecord& clip)>;

struct SweepOptions {
  bool uniform_baseline = false;
  bool frame_weighted = false;
  std::size_t jobs = 1;
};

/// Runs every clip at every ratio and averages accuracy per ratio. Clips must
/// carry labels; scores are drawn from `open_source`. Work is spread over
/// `jobs` threads and reduced in clip order, so the result does not depend on
/// scheduling.
SweepResult run_sweep(const HmmParams& params, const QuantileBinner& binner,
                      std::span<const VideoRecord> clips, std::span<const double> grid,
                      const SourceFactory& open_source, const SweepOptions& options = {});

/// Source factory reading the clip's own in-memory scores.
SourceFactory local_sources();

/// Source factory fetching from a frame server. Clip ids "<video>#<k>" are
/// mapped back to frames [k * max_clip_len, ...) of "<video>".
SourceFactory remote_sources(std::string address, std::size_t max_clip_len);

/// Accuracy of the posterior when every frame is observed.
double full_observation_accuracy(const HmmParams& params, const QuantileBinner& binner,
                                 const VideoRecord& clip);

std::string to_csv(const SweepResult& result);
SweepResult sweep_from_csv(const std::string& text);
/// Two whitespace-separated columns: ratio and mean accuracy.
std::string to_plot_data(const SweepResult& result);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

}  // namespace framesearch
