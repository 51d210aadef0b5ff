#include "framesearch/hmm.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "framesearch/error.hpp"

namespace framesearch {
namespace {

constexpr double kRowTolerance = 1e-12;

template <std::size_t N>
void check_distribution(const std::array<double, N>& row, const char* what) {
  double sum = 0.0;
  for (double v : row) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DataError(std::string(what) + ": entry outside [0,1]");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kRowTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << ": row sums to " << sum << ", expected 1";
    throw DataError(msg.str());
  }
}

template <std::size_t N>
std::array<double, N> normalized_row(const std::array<double, N>& counts, double smoothing,
                                     const char* what) {
  double total = 0.0;
  for (double c : counts) total += c + smoothing;
  if (total <= 0.0) {
    throw DataError(std::string(what) + ": degenerate row (no counts; raise smoothing)");
  }
  std::array<double, N> row{};
  for (std::size_t i = 0; i < N; ++i) row[i] = (counts[i] + smoothing) / total;
  return row;
}

void check_label(Label y) {
  if (y != 0 && y != 1) throw DataError("label outside {0,1}");
}

template <std::size_t N>
std::array<double, N> array_from_json(const nlohmann::json& node, const char* key) {
  if (!node.is_array() || node.size() != N) {
    throw DataError(std::string("params: \"") + key + "\" has wrong shape");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!node[i].is_number()) throw DataError(std::string("params: \"") + key + "\" not numeric");
    out[i] = node[i].get<double>();
  }
  return out;
}

}  // namespace

void HmmParams::validate() const {
  for (const auto& row : transition) check_distribution(row, "transition");
  for (const auto& row : emission) check_distribution(row, "emission");
  check_distribution(initial, "initial");
  if (!(boundaries.lower <= boundaries.upper)) {
    throw DataError("quantile boundaries must be ascending");
  }
}

nlohmann::ordered_json to_json(const HmmParams& params) {
  nlohmann::ordered_json doc;
  doc["transition"] = params.transition;
  doc["emission"] = params.emission;
  doc["initial"] = params.initial;
  doc["quantile_boundaries"] = {params.boundaries.lower, params.boundaries.upper};
  return doc;
}

HmmParams params_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw DataError("params: expected a JSON object");
  for (const char* key : {"transition", "emission", "initial", "quantile_boundaries"}) {
    if (!doc.contains(key)) throw DataError(std::string("params: missing \"") + key + "\"");
  }
  HmmParams params;
  const auto& transition = doc["transition"];
  const auto& emission = doc["emission"];
  if (!transition.is_array() || transition.size() != kNumLabels) {
    throw DataError("params: \"transition\" has wrong shape");
  }
  if (!emission.is_array() || emission.size() != kNumLabels) {
    throw DataError("params: \"emission\" has wrong shape");
  }
  for (std::size_t y = 0; y < kNumLabels; ++y) {
    params.transition[y] = array_from_json<kNumLabels>(transition[y], "transition");
    params.emission[y] = array_from_json<kNumSymbols>(emission[y], "emission");
  }
  params.initial = array_from_json<kNumLabels>(doc["initial"], "initial");
  const auto bounds = array_from_json<2>(doc["quantile_boundaries"], "quantile_boundaries");
  params.boundaries = {bounds[0], bounds[1]};
  params.validate();
  return params;
}

HmmParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open params file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
  try {
    return params_from_json(doc);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void save_params(const HmmParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot write params file");
  out << to_json(params).dump(2) << '\n';
}

void ObservationSet::add(FrameIndex t, Symbol symbol, std::optional<double> score) {
  if (symbol < 0 || static_cast<std::size_t>(symbol) >= kNumSymbols) {
    throw InvalidArgument("observation symbol outside {0,1,2}");
  }
  if (!entries_.emplace(t, Observation{symbol, score}).second) {
    throw InvalidArgument("frame already observed: " + std::to_string(t));
  }
}

std::size_t ObservationSet::extent() const {
  return entries_.empty() ? 0 : entries_.rbegin()->first + 1;
}

std::vector<Symbol> ObservationSet::dense(std::size_t frames) const {
  if (extent() > frames) {
    throw InvalidArgument("index out of bounds: frame " + std::to_string(extent() - 1) +
                          " with " + std::to_string(frames) + " frames");
  }
  std::vector<Symbol> symbols(frames, -1);
  for (const auto& [t, obs] : entries_) symbols[t] = obs.symbol;
  return symbols;
}

TransitionMatrix estimate_transition(std::span<const std::vector<Label>> label_sequences,
                                     double smoothing) {
  if (!(smoothing >= 0.0)) throw InvalidArgument("smoothing must be nonnegative");
  std::array<std::array<double, kNumLabels>, kNumLabels> counts{};
  std::size_t pairs = 0;
  for (const auto& seq : label_sequences) {
    for (Label y : seq) check_label(y);
    for (std::size_t t = 1; t < seq.size(); ++t) {
      counts[seq[t - 1]][seq[t]] += 1.0;
      ++pairs;
    }
  }
  if (pairs == 0) throw DataError("insufficient data: no adjacent label pairs");
  TransitionMatrix out{};
  for (std::size_t y = 0; y < kNumLabels; ++y) {
    out[y] = normalized_row(counts[y], smoothing, "transition");
  }
  return out;
}

EmissionMatrix estimate_emission(std::span<const std::vector<Label>> label_sequences,
                                 std::span<const std::vector<Symbol>> symbol_sequences,
                                 double smoothing) {
  if (!(smoothing >= 0.0)) throw InvalidArgument("smoothing must be nonnegative");
  if (label_sequences.size() != symbol_sequences.size()) {
    throw DataError("misaligned sequences: sequence counts differ");
  }
  std::array<std::array<double, kNumSymbols>, kNumLabels> counts{};
  for (std::size_t i = 0; i < label_sequences.size(); ++i) {
    const auto& labels = label_sequences[i];
    const auto& symbols = symbol_sequences[i];
    if (labels.size() != symbols.size()) {
      throw DataError("misaligned sequences: sequence " + std::to_string(i) + " has " +
                      std::to_string(labels.size()) + " labels and " +
                      std::to_string(symbols.size()) + " observations");
    }
    for (std::size_t t = 0; t < labels.size(); ++t) {
      check_label(labels[t]);
      if (symbols[t] < 0 || static_cast<std::size_t>(symbols[t]) >= kNumSymbols) {
        throw DataError("observation symbol outside {0,1,2}");
      }
      counts[labels[t]][symbols[t]] += 1.0;
    }
  }
  EmissionMatrix out{};
  for (std::size_t y = 0; y < kNumLabels; ++y) {
    out[y] = normalized_row(counts[y], smoothing, "emission");
  }
  return out;
}

LabelDistribution estimate_initial(std::span<const std::vector<Label>> label_sequences) {
  std::array<double, kNumLabels> counts{};
  for (const auto& seq : label_sequences) {
    for (Label y : seq) {
      check_label(y);
      counts[y] += 1.0;
    }
  }
  return normalized_row(counts, 0.0, "initial");
}

LabelDistribution stationary_distribution(const TransitionMatrix& transition) {
  // Balance: pi0 * a01 = pi1 * a10.
  const double leave0 = transition[0][1];
  const double leave1 = transition[1][0];
  if (leave0 + leave1 <= 0.0) return {0.5, 0.5};
  return {leave1 / (leave0 + leave1), leave0 / (leave0 + leave1)};
}

void smooth(const HmmParams& params, std::span<const Symbol> symbols, std::vector<double>& out) {
  const std::size_t frames = symbols.size();
  out.resize(frames);
  if (frames == 0) return;

  const auto& A = params.transition;
  const auto& E = params.emission;
  auto likelihood = [&](std::size_t t, std::size_t y) {
    return symbols[t] < 0 ? 1.0 : E[y][symbols[t]];
  };

  // Scaled forward messages: alpha[t] = P(Y_t | x_0..x_t), normalized per step.
  thread_local std::vector<std::array<double, kNumLabels>> alpha;
  alpha.resize(frames);
  {
    double a0 = params.initial[0] * likelihood(0, 0);
    double a1 = params.initial[1] * likelihood(0, 1);
    double norm = a0 + a1;
    if (!(norm > 0.0)) throw DataError("evidence has zero probability under the model");
    alpha[0] = {a0 / norm, a1 / norm};
  }
  for (std::size_t t = 1; t < frames; ++t) {
    const auto& prev = alpha[t - 1];
    double a0 = (prev[0] * A[0][0] + prev[1] * A[1][0]) * likelihood(t, 0);
    double a1 = (prev[0] * A[0][1] + prev[1] * A[1][1]) * likelihood(t, 1);
    double norm = a0 + a1;
    if (!(norm > 0.0)) throw DataError("evidence has zero probability under the model");
    alpha[t] = {a0 / norm, a1 / norm};
  }

  // Backward pass with a running scaled beta; posterior is alpha * beta.
  double b0 = 1.0;
  double b1 = 1.0;
  for (std::size_t t = frames; t-- > 0;) {
    double g0 = alpha[t][0] * b0;
    double g1 = alpha[t][1] * b1;
    out[t] = g1 / (g0 + g1);
    if (t == 0) break;
    double w0 = b0 * likelihood(t, 0);
    double w1 = b1 * likelihood(t, 1);
    double nb0 = A[0][0] * w0 + A[0][1] * w1;
    double nb1 = A[1][0] * w0 + A[1][1] * w1;
    double norm = nb0 + nb1;
    b0 = nb0 / norm;
    b1 = nb1 / norm;
  }
}

Belief forward_backward(const HmmParams& params, std::size_t frames,
                        const ObservationSet& observations) {
  if (frames == 0) throw InvalidArgument("frame count must be at least 1");
  const auto symbols = observations.dense(frames);
  Belief belief;
  smooth(params, symbols, belief.probs);
  return belief;
}

}  // namespace framesearch
