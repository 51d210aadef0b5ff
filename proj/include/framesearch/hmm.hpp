#pragma once

// Two-state / three-symbol hidden Markov model over frame labels.
//
// Hidden state Y_t is the binary frame label; the observed symbol X_t is the
// frame score binned into one of three quantiles. Only a sparse subset of
// frames is ever observed, so inference treats every unobserved frame as
// carrying a unit likelihood for both labels.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace framesearch {

inline constexpr std::size_t kNumLabels = 2;
inline constexpr std::size_t kNumSymbols = 3;

using FrameIndex = std::size_t;
using Label = int;
using Symbol = int;

using TransitionMatrix = std::array<std::array<double, kNumLabels>, kNumLabels>;
using EmissionMatrix = std::array<std::array<double, kNumSymbols>, kNumLabels>;
using LabelDistribution = std::array<double, kNumLabels>;
using SymbolDistribution = std::array<double, kNumSymbols>;

/// Score thresholds (b1, b2) splitting scores into three right-closed bins.
struct QuantileBoundaries {
  double lower = 1.0 / 3.0;
  double upper = 2.0 / 3.0;

  bool operator==(const QuantileBoundaries&) const = default;
};

/// Full generative model: transition[y][y'] = P(Y_{t+1}=y' | Y_t=y),
/// emission[y][x] = P(X_t=x | Y_t=y), initial[y] = P(Y_0=y).
struct HmmParams {
  TransitionMatrix transition{};
  EmissionMatrix emission{};
  LabelDistribution initial{};
  QuantileBoundaries boundaries{};

  /// Throws DataError unless every row is a probability vector (within 1e-12)
  /// and the boundaries are ordered.
  void validate() const;

  bool operator==(const HmmParams&) const = default;
};

nlohmann::ordered_json to_json(const HmmParams& params);
HmmParams params_from_json(const nlohmann::json& doc);
HmmParams load_params(const std::string& path);
void save_params(const HmmParams& params, const std::string& path);

/// Per-frame posterior P(Y_t = 1 | observations).
struct Belief {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](FrameIndex t) const { return probs[t]; }
  bool operator==(const Belief&) const = default;
};

struct Observation {
  Symbol symbol = 0;
  std::optional<double> score;  // raw score when the symbol came from a frame fetch

  bool operator==(const Observation&) const = default;
};

/// Sparse evidence: at most one observation per frame.
class ObservationSet {
 public:
  ObservationSet() = default;

  /// Throws InvalidArgument if `t` is already present or `symbol` is not a
  /// valid observation symbol.
  void add(FrameIndex t, Symbol symbol, std::optional<double> score = std::nullopt);

  bool contains(FrameIndex t) const { return entries_.contains(t); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Observation& at(FrameIndex t) const { return entries_.at(t); }

  /// Largest observed index + 1, or 0 when empty.
  std::size_t extent() const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Dense per-frame view of length `frames`; -1 marks unobserved frames.
  /// Throws InvalidArgument("index out of bounds") if any index >= frames.
  std::vector<Symbol> dense(std::size_t frames) const;

 private:
  std::map<FrameIndex, Observation> entries_;
};

/// Transition rates from adjacent label pairs with add-`smoothing` counts.
TransitionMatrix estimate_transition(std::span<const std::vector<Label>> label_sequences,
                                     double smoothing = 1.0);

/// Emission rates from label/symbol co-occurrence with add-`smoothing` counts.
EmissionMatrix estimate_emission(std::span<const std::vector<Label>> label_sequences,
                                 std::span<const std::vector<Symbol>> symbol_sequences,
                                 double smoothing = 1.0);

/// Empirical label frequency over all frames.
LabelDistribution estimate_initial(std::span<const std::vector<Label>> label_sequences);

/// Stationary distribution of a two-state chain; uniform when the chain is
/// the identity (every distribution is stationary).
LabelDistribution stationary_distribution(const TransitionMatrix& transition);

/// Exact marginals given sparse evidence, via scaled forward-backward.
Belief forward_backward(const HmmParams& params, std::size_t frames,
                        const ObservationSet& observations);

/// Dense-evidence variant. `symbols[t] < 0` marks an unobserved frame. Writes
/// P(Y_t=1 | evidence) into `out` (resized to symbols.size()).
void smooth(const HmmParams& params, std::span<const Symbol> symbols, std::vector<double>& out);

}  // namespace framesearch
