#include "framesearch/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <sstream>
#include <thread>

#include "framesearch/error.hpp"
#include "framesearch/server.hpp"

namespace framesearch {
namespace {

double parse_number(const std::string& text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && std::isspace(static_cast<unsigned char>(*first))) ++first;
  while (last > first && std::isspace(static_cast<unsigned char>(last[-1]))) --last;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw DataError("not a number: \"" + text + "\"");
  return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(text);
  while (std::getline(in, part, sep)) parts.push_back(part);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

// Cleans accumulated floating error from start + i * step.
double snap(double value) { return std::round(value * 1e12) / 1e12; }

struct ClipOutcome {
  std::vector<double> greedy;
  std::vector<double> uniform;
};

class OwningClipSource final : public FrameSource {
 public:
  OwningClipSource(std::unique_ptr<FrameSource> inner, std::size_t offset, std::size_t length)
      : inner_(std::move(inner)), clip_(*inner_, offset, length) {}

  std::size_t frame_count() const override { return clip_.frame_count(); }
  double fetch(FrameIndex t) override { return clip_.fetch(t); }
  std::size_t requests() const override { return clip_.requests(); }

 private:
  std::unique_ptr<FrameSource> inner_;
  ClipFrameSource clip_;
};

}  // namespace

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw InvalidArgument("grid must be start:stop:step");
    const double start = parse_number(parts[0]);
    const double stop = parse_number(parts[1]);
    const double step = parse_number(parts[2]);
    if (!(step > 0.0) || stop < start) throw InvalidArgument("grid needs step > 0 and stop >= start");
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) grid.push_back(snap(start + step * i));
  } else {
    for (const auto& part : split(text, ',')) grid.push_back(parse_number(part));
  }
  if (grid.empty()) throw InvalidArgument("empty grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0 && grid[i] <= 1.0)) throw InvalidArgument("grid values must lie in [0,1]");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw InvalidArgument("grid must be strictly increasing");
  }
  return grid;
}

SourceFactory local_sources() {
  return [](const VideoRecord& clip) -> std::unique_ptr<FrameSource> {
    if (!clip.scores) throw DataError("clip \"" + clip.video_id + "\" has no scores");
    return std::make_unique<InMemoryFrameSource>(*clip.scores);
  };
}

SourceFactory remote_sources(std::string address, std::size_t max_clip_len) {
  return [address = std::move(address),
          max_clip_len](const VideoRecord& clip) -> std::unique_ptr<FrameSource> {
    const auto hash = clip.video_id.rfind('#');
    if (hash == std::string::npos) {
      return std::make_unique<RemoteFrameSource>(address, clip.video_id);
    }
    const std::string video = clip.video_id.substr(0, hash);
    const std::size_t k = std::stoul(clip.video_id.substr(hash + 1));
    auto remote = std::make_unique<RemoteFrameSource>(address, video);
    return std::make_unique<OwningClipSource>(std::move(remote), k * max_clip_len,
                                              clip.frames());
  };
}

SweepResult run_sweep(const HmmParams& params, const QuantileBinner& binner,
                      std::span<const VideoRecord> clips, std::span<const double> grid,
                      const SourceFactory& open_source, const SweepOptions& options) {
  if (clips.empty()) throw DataError("empty evaluation set");
  if (grid.empty()) throw InvalidArgument("empty grid");

  std::vector<ClipOutcome> outcomes(clips.size());
  auto evaluate = [&](std::size_t i) {
    const auto& clip = clips[i];
    const std::span<const Label> labels(clip.labels);
    std::vector<std::size_t> budgets;
    for (double b : grid) budgets.push_back(query_budget(b, clip.frames()));

    auto source = open_source(clip);
    if (source->frame_count() != clip.frames()) {
      throw DataError("source for \"" + clip.video_id + "\" has a different frame count");
    }
    auto& out = outcomes[i];
    for (const auto& r : run_episode_budgets(params, binner, *source, budgets, labels)) {
      out.greedy.push_back(*r.accuracy);
    }
    if (options.uniform_baseline) {
      for (double b : grid) {
        auto baseline_source = open_source(clip);
        out.uniform.push_back(
            *uniform_baseline_episode(params, binner, *baseline_source, b, labels).accuracy);
      }
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, clips.size()));
  if (jobs == 1) {
    for (std::size_t i = 0; i < clips.size(); ++i) evaluate(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < clips.size(); i = next++) evaluate(i);
        } catch (...) {
          errors[w] = std::current_exception();
          next = clips.size();
        }
      });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  SweepResult result;
  double total_weight = 0.0;
  for (const auto& clip : clips) {
    total_weight += options.frame_weighted ? static_cast<double>(clip.frames()) : 1.0;
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    SweepRow row;
    row.bandwidth_ratio = grid[g];
    row.episodes = clips.size();
    double greedy = 0.0;
    double uniform = 0.0;
    for (std::size_t i = 0; i < clips.size(); ++i) {
      const double w = options.frame_weighted ? static_cast<double>(clips[i].frames()) : 1.0;
      greedy += w * outcomes[i].greedy[g];
      if (options.uniform_baseline) uniform += w * outcomes[i].uniform[g];
    }
    row.mean_accuracy = greedy / total_weight;
    if (options.uniform_baseline) row.uniform_accuracy = uniform / total_weight;
    result.rows.push_back(row);
  }
  return result;
}

double full_observation_accuracy(const HmmParams& params, const QuantileBinner& binner,
                                 const VideoRecord& clip) {
  if (!clip.scores) throw DataError("clip \"" + clip.video_id + "\" has no scores");
  ObservationSet observations;
  for (std::size_t t = 0; t < clip.frames(); ++t) {
    observations.add(t, binner.discretize((*clip.scores)[t]));
  }
  const auto belief = forward_backward(params, clip.frames(), observations);
  return accuracy(classify(belief), clip.labels);
}

std::string to_csv(const SweepResult& result) {
  const bool baseline = !result.rows.empty() && result.rows.front().uniform_accuracy.has_value();
  std::string out = "bandwidth_ratio,mean_accuracy,episodes";
  if (baseline) out += ",uniform_accuracy";
  out += "\n";
  for (const auto& row : result.rows) {
    out += format_number(row.bandwidth_ratio) + "," + format_number(row.mean_accuracy) + "," +
           std::to_string(row.episodes);
    if (baseline) out += "," + format_number(row.uniform_accuracy.value_or(0.0));
    out += "\n";
  }
  return out;
}

SweepResult sweep_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV");
  const auto header = split(line, ',');
  const bool baseline = header.size() == 4 && header[3] == "uniform_accuracy";
  if (header.size() < 3 || header[0] != "bandwidth_ratio" || header[1] != "mean_accuracy" ||
      header[2] != "episodes" || (header.size() == 4 && !baseline) || header.size() > 4) {
    throw DataError("unexpected CSV header: " + line);
  }
  SweepResult result;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw DataError("CSV line " + std::to_string(line_no) + ": wrong number of columns");
    }
    SweepRow row;
    row.bandwidth_ratio = parse_number(cells[0]);
    row.mean_accuracy = parse_number(cells[1]);
    row.episodes = static_cast<std::size_t>(parse_number(cells[2]));
    if (baseline) row.uniform_accuracy = parse_number(cells[3]);
    result.rows.push_back(row);
  }
  return result;
}

std::string to_plot_data(const SweepResult& result) {
  std::string out = "# bandwidth_ratio mean_accuracy\n";
  for (const auto& row : result.rows) {
    out += format_number(row.bandwidth_ratio) + " " + format_number(row.mean_accuracy) + "\n";
  }
  return out;
}

}  // namespace framesearch
