#include "framesearch/policy.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "framesearch/error.hpp"

namespace framesearch {
namespace {

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  const double c = std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
  return -(c * std::log(c) + (1.0 - c) * std::log1p(-c));
}

// Loss for candidate q using a caller-owned dense evidence vector whose
// entry q is currently -1. The vector is restored before returning.
double expected_loss_dense(const HmmParams& params, std::vector<Symbol>& symbols, FrameIndex q,
                           double p_q, std::vector<double>& scratch) {
  const auto predictive = observation_predictive(params, p_q);
  double loss = 0.0;
  for (std::size_t x = 0; x < kNumSymbols; ++x) {
    if (predictive[x] <= 0.0) continue;
    symbols[q] = static_cast<Symbol>(x);
    smooth(params, symbols, scratch);
    loss += predictive[x] * expected_cross_entropy(scratch);
  }
  symbols[q] = -1;
  return loss;
}

}  // namespace

double expected_cross_entropy(std::span<const double> probs) {
  if (probs.empty()) return 0.0;
  double total = 0.0;
  for (double p : probs) total += binary_entropy(p);
  return total / static_cast<double>(probs.size());
}

SymbolDistribution observation_predictive(const HmmParams& params, double p_q) {
  SymbolDistribution out{};
  for (std::size_t x = 0; x < kNumSymbols; ++x) {
    out[x] = (1.0 - p_q) * params.emission[0][x] + p_q * params.emission[1][x];
  }
  return out;
}

double expected_loss_for_query(const HmmParams& params, std::size_t frames,
                               const ObservationSet& observations, FrameIndex q,
                               const Belief& current_belief) {
  if (q >= frames) throw InvalidArgument("index out of bounds: frame " + std::to_string(q));
  if (observations.contains(q)) {
    throw InvalidArgument("frame already observed: " + std::to_string(q));
  }
  if (current_belief.size() != frames) throw InvalidArgument("belief length differs from frames");
  auto symbols = observations.dense(frames);
  std::vector<double> scratch;
  return expected_loss_dense(params, symbols, q, current_belief[q], scratch);
}

QueryPlan select_next_query(const HmmParams& params, std::size_t frames,
                            const ObservationSet& observations) {
  return select_next_query(params, frames, observations,
                           forward_backward(params, frames, observations));
}

QueryPlan select_next_query(const HmmParams& params, std::size_t frames,
                            const ObservationSet& observations, const Belief& current_belief) {
  if (observations.size() >= frames) throw InvalidArgument("budget exceeds frames");
  if (current_belief.size() != frames) throw InvalidArgument("belief length differs from frames");
  auto symbols = observations.dense(frames);
  std::vector<double> scratch;

  QueryPlan plan;
  plan.expected_losses.assign(frames, std::nullopt);
  double best = std::numeric_limits<double>::infinity();
  std::optional<FrameIndex> best_index;
  for (FrameIndex q = 0; q < frames; ++q) {
    if (symbols[q] >= 0) continue;
    const double loss = expected_loss_dense(params, symbols, q, current_belief[q], scratch);
    plan.expected_losses[q] = loss;
    if (!best_index || loss < best) {
      best = loss;
      best_index = q;
    }
  }
  plan.next = *best_index;
  return plan;
}

nlohmann::json losses_to_json(const QueryPlan& plan) {
  auto out = nlohmann::json::array();
  for (const auto& loss : plan.expected_losses) {
    if (loss) {
      out.push_back(*loss);
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}

}  // namespace framesearch
