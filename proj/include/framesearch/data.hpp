#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "framesearch/hmm.hpp"

namespace framesearch {

/// One video (or clip): ground-truth labels and, optionally, per-frame scores.
struct VideoRecord {
  std::string video_id;
  std::vector<Label> labels;
  std::optional<std::vector<double>> scores;

  std::size_t frames() const { return labels.size(); }
  bool has_frame_of_interest() const;
  bool operator==(const VideoRecord&) const = default;
};

/// Maps raw scores to one of three right-closed bins; ties go to the lower bin.
class QuantileBinner {
 public:
  QuantileBinner() = default;
  explicit QuantileBinner(QuantileBoundaries boundaries);

  const QuantileBoundaries& boundaries() const { return boundaries_; }
  Symbol discretize(double score) const;

 private:
  QuantileBoundaries boundaries_{};
};

/// Nearest-rank 1/3 and 2/3 quantiles: b1 = x_(ceil(n/3)), b2 = x_(ceil(2n/3)).
/// Throws DataError("insufficient data") for fewer than three scores.
QuantileBinner compute_quantiles(std::span<const double> scores);

/// Consecutive clips of at most `max_len` frames, ids "<video_id>#<k>".
std::vector<VideoRecord> clip_video(const VideoRecord& record, std::size_t max_len);

/// A synthetic record plus the symbols that generated its scores.
struct SyntheticVideo {
  VideoRecord record;
  std::vector<Symbol> symbols;
};

/// Samples labels from the chain and symbols from the emission rows. The score
/// for symbol k is (k + u) / 3 with u ~ U[0,1), so binning with (1/3, 2/3)
/// recovers the symbol exactly.
SyntheticVideo generate_synthetic(const HmmParams& params, std::size_t frames, std::uint64_t seed,
                                  std::string video_id = "synthetic");

/// JSON-lines readers. Errors name the file and the 1-based line number.
std::vector<VideoRecord> load_labels(const std::string& path);
void load_scores(const std::string& path, std::vector<VideoRecord>& records);

/// Scores file on its own, as (video_id, scores) in file order.
std::vector<std::pair<std::string, std::vector<double>>> read_score_file(const std::string& path);

void write_labels(const std::string& path, std::span<const VideoRecord> records);
void write_scores(const std::string& path, std::span<const VideoRecord> records);

}  // namespace framesearch
