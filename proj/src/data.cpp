#include "framesearch/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "framesearch/error.hpp"

namespace framesearch {
namespace {

std::size_t nearest_rank(std::size_t n, std::size_t numerator) {
  // ceil(numerator * n / 3), 1-based
  return (numerator * n + 2) / 3;
}

template <std::size_t N>
std::size_t sample_index(std::mt19937_64& rng, const std::array<double, N>& probs) {
  // Inverse-CDF draw; avoids std::discrete_distribution's
  // implementation-defined behavior so outputs are portable across stdlibs.
  const double u = std::generate_canonical<double, 53>(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < N; ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return N - 1;
}

std::string line_error(const std::string& path, std::size_t line, const std::string& what) {
  return path + ":" + std::to_string(line) + ": " + what;
}

template <typename Fn>
void for_each_json_line(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open file");
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
      throw DataError(line_error(path, line, "malformed JSON"));
    }
    try {
      fn(doc);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(line_error(path, line, e.what()));
    } catch (const DataError& e) {
      throw DataError(line_error(path, line, e.what()));
    }
  }
}

}  // namespace

bool VideoRecord::has_frame_of_interest() const {
  return std::find(labels.begin(), labels.end(), 1) != labels.end();
}

QuantileBinner::QuantileBinner(QuantileBoundaries boundaries) : boundaries_(boundaries) {
  if (!(boundaries_.lower <= boundaries_.upper)) {
    throw InvalidArgument("quantile boundaries must be ascending");
  }
}

Symbol QuantileBinner::discretize(double score) const {
  if (score <= boundaries_.lower) return 0;
  if (score <= boundaries_.upper) return 1;
  return 2;
}

QuantileBinner compute_quantiles(std::span<const double> scores) {
  if (scores.size() < 3) throw DataError("insufficient data: need at least 3 scores");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  return QuantileBinner({sorted[nearest_rank(n, 1) - 1], sorted[nearest_rank(n, 2) - 1]});
}

std::vector<VideoRecord> clip_video(const VideoRecord& record, std::size_t max_len) {
  if (max_len == 0) throw InvalidArgument("max clip length must be positive");
  std::vector<VideoRecord> clips;
  const std::size_t frames = record.frames();
  for (std::size_t start = 0, k = 0; start < frames; start += max_len, ++k) {
    const std::size_t stop = std::min(frames, start + max_len);
    VideoRecord clip;
    clip.video_id = record.video_id + "#" + std::to_string(k);
    clip.labels.assign(record.labels.begin() + start, record.labels.begin() + stop);
    if (record.scores) {
      clip.scores.emplace(record.scores->begin() + start, record.scores->begin() + stop);
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

SyntheticVideo generate_synthetic(const HmmParams& params, std::size_t frames, std::uint64_t seed,
                                  std::string video_id) {
  if (frames == 0) throw InvalidArgument("frame count must be at least 1");
  std::mt19937_64 rng(seed);
  SyntheticVideo out;
  out.record.video_id = std::move(video_id);
  out.record.labels.resize(frames);
  out.symbols.resize(frames);
  std::vector<double> scores(frames);

  Label y = static_cast<Label>(sample_index(rng, params.initial));
  for (std::size_t t = 0; t < frames; ++t) {
    if (t > 0) y = static_cast<Label>(sample_index(rng, params.transition[y]));
    const auto x = static_cast<Symbol>(sample_index(rng, params.emission[y]));
    const double jitter = std::generate_canonical<double, 53>(rng);
    out.record.labels[t] = y;
    out.symbols[t] = x;
    // Keep the score strictly inside its bin: (x + u)/3 with u in [0,1) can
    // round onto the boundary for x > 0, which would bin one lower.
    double score = (x + jitter) / 3.0;
    if (x > 0 && score <= x / 3.0) score = std::nextafter(x / 3.0, 1.0);
    scores[t] = score;
  }
  out.record.scores = std::move(scores);
  return out;
}

std::vector<VideoRecord> load_labels(const std::string& path) {
  std::vector<VideoRecord> records;
  for_each_json_line(path, [&](const nlohmann::json& doc) {
    VideoRecord record;
    record.video_id = doc.at("video_id").get<std::string>();
    record.labels = doc.at("labels").get<std::vector<Label>>();
    if (record.labels.empty()) throw DataError("video has no frames");
    for (Label y : record.labels) {
      if (y != 0 && y != 1) throw DataError("label outside {0,1}");
    }
    records.push_back(std::move(record));
  });
  return records;
}

void load_scores(const std::string& path, std::vector<VideoRecord>& records) {
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < records.size(); ++i) by_id.emplace(records[i].video_id, i);
  for_each_json_line(path, [&](const nlohmann::json& doc) {
    const auto id = doc.at("video_id").get<std::string>();
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("unknown video_id \"" + id + "\"");
    auto scores = doc.at("scores").get<std::vector<double>>();
    auto& record = records[it->second];
    if (scores.size() != record.labels.size()) {
      throw DataError("misaligned sequences: \"" + id + "\" has " +
                      std::to_string(record.labels.size()) + " labels and " +
                      std::to_string(scores.size()) + " scores");
    }
    record.scores = std::move(scores);
  });
}

std::vector<std::pair<std::string, std::vector<double>>> read_score_file(const std::string& path) {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  for_each_json_line(path, [&](const nlohmann::json& doc) {
    out.emplace_back(doc.at("video_id").get<std::string>(),
                     doc.at("scores").get<std::vector<double>>());
    if (out.back().second.empty()) throw DataError("video has no frames");
  });
  return out;
}

void write_labels(const std::string& path, std::span<const VideoRecord> records) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot write file");
  for (const auto& r : records) {
    nlohmann::ordered_json doc;
    doc["video_id"] = r.video_id;
    doc["labels"] = r.labels;
    out << doc.dump() << '\n';
  }
}

void write_scores(const std::string& path, std::span<const VideoRecord> records) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot write file");
  for (const auto& r : records) {
    if (!r.scores) throw DataError("record \"" + r.video_id + "\" has no scores");
    nlohmann::ordered_json doc;
    doc["video_id"] = r.video_id;
    doc["scores"] = *r.scores;
    out << doc.dump() << '\n';
  }
}

}  // namespace framesearch
