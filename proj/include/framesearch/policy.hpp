#pragma once

// Greedy query selection: pick the unobserved frame whose observation is
// expected to most reduce the mean per-frame entropy of the belief.

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "framesearch/hmm.hpp"

namespace framesearch {

/// Probabilities are clamped to [kProbabilityFloor, 1 - kProbabilityFloor]
/// before any logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

/// Mean binary entropy of the belief, in nats. 0 log 0 is taken as 0.
double expected_cross_entropy(std::span<const double> probs);
inline double expected_cross_entropy(const Belief& belief) {
  return expected_cross_entropy(belief.probs);
}

/// P(X_q = x) when Y_q ~ Bernoulli(p_q).
SymbolDistribution observation_predictive(const HmmParams& params, double p_q);

/// Expected entropy after observing frame q, averaged over the model's
/// predictive distribution for X_q. Throws InvalidArgument if q is already
/// observed or out of range.
double expected_loss_for_query(const HmmParams& params, std::size_t frames,
                               const ObservationSet& observations, FrameIndex q,
                               const Belief& current_belief);

struct QueryPlan {
  FrameIndex next = 0;
  /// Expected loss per frame; nullopt for already-observed frames.
  std::vector<std::optional<double>> expected_losses;
};

/// Evaluates every unobserved frame and returns the argmin (smallest index on
/// ties). Throws InvalidArgument("budget exceeds frames") when nothing is left.
QueryPlan select_next_query(const HmmParams& params, std::size_t frames,
                            const ObservationSet& observations);

/// Same as above with the current belief supplied by the caller.
QueryPlan select_next_query(const HmmParams& params, std::size_t frames,
                            const ObservationSet& observations, const Belief& current_belief);

/// Loss vector as a JSON array, null for observed frames.
nlohmann::json losses_to_json(const QueryPlan& plan);

}  // namespace framesearch
