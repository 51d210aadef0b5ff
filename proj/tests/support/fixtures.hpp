#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <unistd.h>

#include "framesearch/commands.hpp"
#include "framesearch/data.hpp"
#include "framesearch/hmm.hpp"

namespace framesearch::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("framesearch-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

/// Params used by several worked examples: A=[[.9,.1],[.2,.8]], uniform
/// start, mirrored emission rows.
inline HmmParams example_params() {
  HmmParams params;
  params.transition = {{{0.9, 0.1}, {0.2, 0.8}}};
  params.emission = {{{0.6, 0.3, 0.1}, {0.1, 0.3, 0.6}}};
  params.initial = {0.5, 0.5};
  return params;
}

/// A 60-frame clip whose label switches 0 -> 1 at frame 30, with scores in
/// the middle of the lowest and highest bins.
inline VideoRecord boundary_video() {
  VideoRecord video;
  video.video_id = "boundary";
  video.labels.assign(60, 0);
  std::fill(video.labels.begin() + 30, video.labels.end(), 1);
  std::vector<double> scores;
  for (Label y : video.labels) scores.push_back(y == 1 ? 5.0 / 6.0 : 1.0 / 6.0);
  video.scores = std::move(scores);
  return video;
}

/// Opening evidence of the boundary case: opposite observations at 10 and 50.
inline constexpr FrameIndex kBoundaryOpening[] = {10, 50};

/// Synthetic records from the persistent preset with at least one positive.
inline std::vector<VideoRecord> persistent_videos(std::size_t count, std::size_t frames,
                                                  std::uint64_t seed) {
  const auto params = preset_params("persistent");
  std::vector<VideoRecord> out;
  for (std::uint64_t i = 0; out.size() < count; ++i) {
    auto v = generate_synthetic(params, frames, seed * 1000003 + i, "v" + std::to_string(i));
    if (v.record.has_frame_of_interest()) out.push_back(std::move(v.record));
  }
  return out;
}

}  // namespace framesearch::testing
