#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "framesearch/data.hpp"
#include "framesearch/error.hpp"
#include "framesearch/hmm.hpp"

namespace framesearch {

/// Supplies raw frame scores on request. Every successful fetch costs one
/// unit of bandwidth and bumps requests().
class FrameSource {
 public:
  virtual ~FrameSource() = default;

  virtual std::size_t frame_count() const = 0;
  virtual double fetch(FrameIndex t) = 0;
  virtual std::size_t requests() const = 0;
};

/// Scores held in memory.
class InMemoryFrameSource final : public FrameSource {
 public:
  explicit InMemoryFrameSource(std::vector<double> scores);

  std::size_t frame_count() const override { return scores_.size(); }
  double fetch(FrameIndex t) override;
  std::size_t requests() const override { return requests_; }

 private:
  std::vector<double> scores_;
  std::size_t requests_ = 0;
};

/// A contiguous window [offset, offset + length) of another source, re-indexed
/// from zero. Used to evaluate clips of a longer remote video.
class ClipFrameSource final : public FrameSource {
 public:
  ClipFrameSource(FrameSource& inner, std::size_t offset, std::size_t length);

  std::size_t frame_count() const override { return length_; }
  double fetch(FrameIndex t) override;
  std::size_t requests() const override { return requests_; }

 private:
  FrameSource& inner_;
  std::size_t offset_;
  std::size_t length_;
  std::size_t requests_ = 0;
};

struct QueryRecord {
  FrameIndex frame = 0;
  double score = 0.0;
  Symbol symbol = 0;

  bool operator==(const QueryRecord&) const = default;
};

struct EpisodeResult {
  std::vector<QueryRecord> queries;
  Belief final_belief;
  std::vector<Label> predictions;
  std::optional<double> accuracy;
  std::size_t budget_used = 0;

  bool operator==(const EpisodeResult&) const = default;
};

/// Raised when a fetch fails mid-episode; carries what was gathered so far.
class EpisodeAborted : public TransportError {
 public:
  EpisodeAborted(const std::string& what, EpisodeResult partial)
      : TransportError(what), partial_(std::move(partial)) {}
  const EpisodeResult& partial() const { return partial_; }

 private:
  EpisodeResult partial_;
};

struct QueryPlan;

/// Called before each greedy fetch with the plan and the belief it was made from.
using StepObserver = std::function<void(const QueryPlan& plan, const Belief& belief)>;

/// floor(B * T) with a 1e-9 guard against representation error, capped at T.
std::size_t query_budget(double bandwidth_ratio, std::size_t frames);

/// Threshold at 0.5, ties predicting 1.
std::vector<Label> classify(const Belief& belief);

/// Fraction of frames where prediction equals label.
double accuracy(std::span<const Label> predictions, std::span<const Label> labels);

/// Greedy episode: query, fetch, discretize and re-infer until the budget
struct QueryPlan;

/// Called before each greedy fetch with the plan and the belief it was made from.
using StepObserver = std::function<void(const QueryPlan& plan, const Belief& belief)>;

/// floor(B * T) is spent, then classify every frame.
EpisodeResult run_episode(const HmmParams& params, const QuantileBinner& binner,
                          FrameSource& source, double bandwidth_ratio,
                          std::optional<std::span<const Label>> labels = std::nullopt,
                          const StepObserver& on_step = {});

/// run_episode whose first fetches are `opening_frames` (in order, counted
/// against the budget); greedy selection takes over once they are spent.
EpisodeResult run_episode_with_opening(const HmmParams& params, const QuantileBinner& binner,
                                       FrameSource& source, double bandwidth_ratio,
                                       std::span<const FrameIndex> opening_frames,
                                       std::optional<std::span<const Label>> labels = std::nullopt,
                                       const StepObserver& on_step = {});

/// Same protocol with evenly spaced queries round(i T / (k + 1)), i = 1..k.
EpisodeResult uniform_baseline_episode(const HmmParams& params, const QuantileBinner& binner,
                                       FrameSource& source, double bandwidth_ratio,
                                       std::optional<std::span<const Label>> labels = std::nullopt);

/// Evenly spaced query indices for a budget of k frames out of T, deduplicated
/// and topped up with the lowest unused frames when rounding collides.
std::vector<FrameIndex> uniform_query_indices(std::size_t frames, std::size_t budget);

/// Runs one greedy trajectory up to the largest budget and reports the
/// EpisodeResult for each requested budget. The greedy choice does not depend
/// on the budget, so each result equals run_episode at that budget.
std::vector<EpisodeResult> run_episode_budgets(const HmmParams& params,
                                               const QuantileBinner& binner, FrameSource& source,
                                               std::span<const std::size_t> budgets,
                                               std::optional<std::span<const Label>> labels,
                                               const StepObserver& on_step = {},
                                               std::span<const FrameIndex> opening_frames = {});

nlohmann::ordered_json to_json(const EpisodeResult& result);
EpisodeResult episode_from_json(const nlohmann::json& doc);

}  // namespace framesearch
