#include "framesearch/episode.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "framesearch/policy.hpp"

namespace framesearch {
namespace {

void check_ratio(double bandwidth_ratio) {
  if (!(bandwidth_ratio >= 0.0 && bandwidth_ratio <= 1.0)) {
    throw InvalidArgument("bandwidth ratio must lie in [0, 1]");
  }
}

void check_labels(std::optional<std::span<const Label>> labels, std::size_t frames) {
  if (labels && labels->size() != frames) {
    throw InvalidArgument("label count differs from source frame count");
  }
}

EpisodeResult finish(std::vector<QueryRecord> queries, Belief belief,
                     std::optional<std::span<const Label>> labels) {
  EpisodeResult result;
  result.budget_used = queries.size();
  result.queries = std::move(queries);
  result.predictions = classify(belief);
  result.final_belief = std::move(belief);
  if (labels) result.accuracy = accuracy(result.predictions, *labels);
  return result;
}

// Fetches frame t, records it, and folds it into the evidence. A fetch failure
// aborts with the episode state as of the previous query.
void observe(const HmmParams& params, const QuantileBinner& binner, FrameSource& source,
             FrameIndex t, ObservationSet& observations, std::vector<QueryRecord>& queries,
             Belief& belief, std::optional<std::span<const Label>> labels) {
  double score = 0.0;
  try {
    score = source.fetch(t);
  } catch (const TransportError& e) {
    throw EpisodeAborted(e.what(), finish(queries, belief, labels));
  }
  const Symbol symbol = binner.discretize(score);
  observations.add(t, symbol, score);
  queries.push_back({t, score, symbol});
  belief = forward_backward(params, source.frame_count(), observations);
}

}  // namespace

InMemoryFrameSource::InMemoryFrameSource(std::vector<double> scores) : scores_(std::move(scores)) {
  if (scores_.empty()) throw InvalidArgument("frame source has no frames");
}

double InMemoryFrameSource::fetch(FrameIndex t) {
  if (t >= scores_.size()) throw InvalidArgument("index out of bounds: frame " + std::to_string(t));
  ++requests_;
  return scores_[t];
}

ClipFrameSource::ClipFrameSource(FrameSource& inner, std::size_t offset, std::size_t length)
    : inner_(inner), offset_(offset), length_(length) {
  if (length == 0 || offset + length > inner.frame_count()) {
    throw InvalidArgument("clip window outside source");
  }
}

double ClipFrameSource::fetch(FrameIndex t) {
  if (t >= length_) throw InvalidArgument("index out of bounds: frame " + std::to_string(t));
  const double score = inner_.fetch(offset_ + t);
  ++requests_;
  return score;
}

std::size_t query_budget(double bandwidth_ratio, std::size_t frames) {
  check_ratio(bandwidth_ratio);
  const double raw = std::floor(bandwidth_ratio * static_cast<double>(frames) + 1e-9);
  return std::min(frames, static_cast<std::size_t>(raw));
}

std::vector<Label> classify(const Belief& belief) {
  std::vector<Label> out(belief.size());
  std::transform(belief.probs.begin(), belief.probs.end(), out.begin(),
                 [](double p) { return p >= 0.5 ? 1 : 0; });
  return out;
}

double accuracy(std::span<const Label> predictions, std::span<const Label> labels) {
  if (predictions.size() != labels.size() || labels.empty()) {
    throw InvalidArgument("accuracy needs equal-length, nonempty vectors");
  }
  std::size_t hits = 0;
  for (std::size_t t = 0; t < labels.size(); ++t) hits += predictions[t] == labels[t];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

EpisodeResult run_episode(const HmmParams& params, const QuantileBinner& binner,
                          FrameSource& source, double bandwidth_ratio,
                          std::optional<std::span<const Label>> labels,
                          const StepObserver& on_step) {
  return run_episode_with_opening(params, binner, source, bandwidth_ratio, {}, labels, on_step);
}

EpisodeResult run_episode_with_opening(const HmmParams& params, const QuantileBinner& binner,
                                       FrameSource& source, double bandwidth_ratio,
                                       std::span<const FrameIndex> opening_frames,
                                       std::optional<std::span<const Label>> labels,
                                       const StepObserver& on_step) {
  const std::size_t frames = source.frame_count();
  const std::size_t budget = query_budget(bandwidth_ratio, frames);
  const std::size_t b[] = {budget};
  return run_episode_budgets(params, binner, source, b, labels, on_step, opening_frames).front();
}

std::vector<EpisodeResult> run_episode_budgets(const HmmParams& params,
                                               const QuantileBinner& binner, FrameSource& source,
                                               std::span<const std::size_t> budgets,
                                               std::optional<std::span<const Label>> labels,
                                               const StepObserver& on_step,
                                               std::span<const FrameIndex> opening_frames) {
  const std::size_t frames = source.frame_count();
  if (frames == 0) throw InvalidArgument("frame source has no frames");
  check_labels(labels, frames);
  for (std::size_t i = 0; i < opening_frames.size(); ++i) {
    if (opening_frames[i] >= frames) {
      throw InvalidArgument("index out of bounds: frame " + std::to_string(opening_frames[i]));
    }
    if (std::find(opening_frames.begin(), opening_frames.begin() + i, opening_frames[i]) !=
        opening_frames.begin() + i) {
      throw InvalidArgument("opening frames repeat frame " + std::to_string(opening_frames[i]));
    }
  }
  std::vector<std::size_t> order(budgets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return budgets[a] < budgets[b]; });

  std::vector<EpisodeResult> results(budgets.size());
  ObservationSet observations;
  std::vector<QueryRecord> queries;
  Belief belief = forward_backward(params, frames, observations);
  for (std::size_t i : order) {
    const std::size_t budget = std::min(budgets[i], frames);
    while (queries.size() < budget) {
      if (queries.size() < opening_frames.size()) {
        observe(params, binner, source, opening_frames[queries.size()], observations, queries,
                belief, labels);
        continue;
      }
      const auto plan = select_next_query(params, frames, observations, belief);
      if (on_step) on_step(plan, belief);
      observe(params, binner, source, plan.next, observations, queries, belief, labels);
    }
    results[i] = finish(queries, belief, labels);
  }
  return results;
}

std::vector<FrameIndex> uniform_query_indices(std::size_t frames, std::size_t budget) {
  budget = std::min(budget, frames);
  std::vector<FrameIndex> out;
  out.reserve(budget);
  for (std::size_t i = 1; i <= budget; ++i) {
    const double position = static_cast<double>(i) * static_cast<double>(frames) /
                            static_cast<double>(budget + 1);
    auto t = static_cast<FrameIndex>(std::llround(position));
    t = std::min(t, frames - 1);
    if (out.empty() || out.back() != t) out.push_back(t);
  }
  // Rounding collisions (budget close to T) leave fewer than `budget` frames;
  // top up with the lowest unused indices so the full budget is spent.
  if (out.size() < budget) {
    std::vector<bool> used(frames, false);
    for (FrameIndex t : out) used[t] = true;
    for (FrameIndex t = 0; t < frames && out.size() < budget; ++t) {
      if (!used[t]) out.push_back(t);
    }
    std::sort(out.begin(), out.end());
  }
  return out;
}

EpisodeResult uniform_baseline_episode(const HmmParams& params, const QuantileBinner& binner,
                                       FrameSource& source, double bandwidth_ratio,
                                       std::optional<std::span<const Label>> labels) {
  const std::size_t frames = source.frame_count();
  if (frames == 0) throw InvalidArgument("frame source has no frames");
  check_labels(labels, frames);
  const std::size_t budget = query_budget(bandwidth_ratio, frames);

  ObservationSet observations;
  std::vector<QueryRecord> queries;
  Belief belief = forward_backward(params, frames, observations);
  for (FrameIndex t : uniform_query_indices(frames, budget)) {
    observe(params, binner, source, t, observations, queries, belief, labels);
  }
  return finish(std::move(queries), std::move(belief), labels);
}

nlohmann::ordered_json to_json(const EpisodeResult& result) {
  nlohmann::ordered_json doc;
  auto queries = nlohmann::ordered_json::array();
  for (const auto& q : result.queries) queries.push_back({q.frame, q.score, q.symbol});
  doc["queries"] = std::move(queries);
  doc["belief"] = result.final_belief.probs;
  doc["predictions"] = result.predictions;
  if (result.accuracy) {
    doc["accuracy"] = *result.accuracy;
  } else {
    doc["accuracy"] = nullptr;
  }
  doc["budget_used"] = result.budget_used;
  return doc;
}

EpisodeResult episode_from_json(const nlohmann::json& doc) {
  try {
    EpisodeResult result;
    for (const auto& q : doc.at("queries")) {
      result.queries.push_back(
          {q.at(0).get<FrameIndex>(), q.at(1).get<double>(), q.at(2).get<Symbol>()});
    }
    result.final_belief.probs = doc.at("belief").get<std::vector<double>>();
    result.predictions = doc.at("predictions").get<std::vector<Label>>();
    if (!doc.at("accuracy").is_null()) result.accuracy = doc.at("accuracy").get<double>();
    result.budget_used = doc.at("budget_used").get<std::size_t>();
    return result;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("episode JSON: ") + e.what());
  }
}

}  // namespace framesearch
