#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "framesearch/data.hpp"
#include "framesearch/error.hpp"
#include "framesearch/hmm.hpp"
#include "support/fixtures.hpp"
#include "support/oracle.hpp"

using namespace framesearch;
using namespace framesearch::testing;

namespace {

template <typename Matrix>
void check_rows_stochastic(const Matrix& m) {
  for (const auto& row : m) {
    double sum = 0.0;
    for (double v : row) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

}  // namespace

TEST_SUITE("estimate_transition") {
  TEST_CASE("counts adjacent pairs") {
    const std::vector<std::vector<Label>> seqs = {{0, 0, 1, 1, 1, 0}};
    const auto a = estimate_transition(seqs, 0.0);
    CHECK(a[0][0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(a[0][1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(a[1][0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(a[1][1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  }

  TEST_CASE("add-one smoothing makes an unseen row uniform") {
    const std::vector<std::vector<Label>> seqs = {{0, 0, 0}};
    const auto a = estimate_transition(seqs, 1.0);
    CHECK(a[0][0] == 0.75);
    CHECK(a[0][1] == 0.25);
    CHECK(a[1][0] == 0.5);
    CHECK(a[1][1] == 0.5);
  }

  TEST_CASE("off-diagonal pairs") {
    const std::vector<std::vector<Label>> seqs = {{0, 1}, {1, 0}};
    const auto a = estimate_transition(seqs, 0.0);
    CHECK(a == TransitionMatrix{{{0.0, 1.0}, {1.0, 0.0}}});
  }

  TEST_CASE("errors") {
    const std::vector<std::vector<Label>> none;
    CHECK_THROWS_WITH_AS(estimate_transition(none, 1.0), doctest::Contains("insufficient data"),
                         DataError);
    const std::vector<std::vector<Label>> short_seqs = {{1}, {0}};
    CHECK_THROWS_WITH_AS(estimate_transition(short_seqs, 1.0),
                         doctest::Contains("insufficient data"), DataError);
    const std::vector<std::vector<Label>> zeros = {{0, 0, 0}};
    CHECK_THROWS_WITH_AS(estimate_transition(zeros, 0.0), doctest::Contains("degenerate row"),
                         DataError);
    CHECK_THROWS_AS(estimate_transition(zeros, -1.0), InvalidArgument);
  }
}

TEST_SUITE("estimate_emission") {
  TEST_CASE("co-occurrence rates") {
    const std::vector<std::vector<Label>> labels = {{0, 0, 1}};
    const std::vector<std::vector<Symbol>> obs = {{0, 1, 2}};
    const auto e = estimate_emission(labels, obs, 0.0);
    CHECK(e == EmissionMatrix{{{0.5, 0.5, 0.0}, {0.0, 0.0, 1.0}}});
  }

  TEST_CASE("smoothing with an unobserved label") {
    const std::vector<std::vector<Label>> labels = {{1}};
    const std::vector<std::vector<Symbol>> obs = {{2}};
    const auto e = estimate_emission(labels, obs, 1.0);
    for (double v : e[0]) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(e[1][0] == 0.25);
    CHECK(e[1][1] == 0.25);
    CHECK(e[1][2] == 0.5);
  }

  TEST_CASE("perfectly separating observations") {
    const std::vector<std::vector<Label>> labels = {{0, 1}};
    const std::vector<std::vector<Symbol>> obs = {{0, 2}};
    CHECK(estimate_emission(labels, obs, 0.0) == EmissionMatrix{{{1, 0, 0}, {0, 0, 1}}});
  }

  TEST_CASE("errors") {
    const std::vector<std::vector<Label>> labels = {{0, 1, 1}};
    const std::vector<std::vector<Symbol>> short_obs = {{0, 2}};
    CHECK_THROWS_WITH_AS(estimate_emission(labels, short_obs, 1.0),
                         doctest::Contains("misaligned sequences"), DataError);
    const std::vector<std::vector<Label>> ones = {{1, 1}};
    const std::vector<std::vector<Symbol>> obs = {{0, 2}};
    CHECK_THROWS_WITH_AS(estimate_emission(ones, obs, 0.0), doctest::Contains("degenerate row"),
                         DataError);
  }

  TEST_CASE("estimated matrices are row-stochastic on random input") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> label(0, 1);
    std::uniform_int_distribution<int> symbol(0, 2);
    std::uniform_int_distribution<std::size_t> length(2, 40);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<std::vector<Label>> labels(3);
      std::vector<std::vector<Symbol>> obs(3);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto n = length(rng);
        for (std::size_t t = 0; t < n; ++t) {
          labels[i].push_back(label(rng));
          obs[i].push_back(symbol(rng));
        }
      }
      check_rows_stochastic(estimate_transition(labels, 0.5));
      check_rows_stochastic(estimate_emission(labels, obs, 0.5));
    }
  }
}

TEST_SUITE("forward_backward") {
  TEST_CASE("absorbing chain without evidence keeps the start distribution") {
    HmmParams params = example_params();
    params.transition = {{{1.0, 0.0}, {0.0, 1.0}}};
    params.initial = {0.3, 0.7};
    const auto belief = forward_backward(params, 5, {});
    REQUIRE(belief.size() == 5);
    for (double p : belief.probs) CHECK(p == doctest::Approx(0.7).epsilon(1e-12));
  }

  TEST_CASE("three-frame worked example matches enumeration") {
    ObservationSet obs;
    obs.add(1, 2);
    const auto belief = forward_backward(example_params(), 3, obs);
    // Frozen from exhaustive enumeration over the 8 label sequences.
    const double expected[] = {0.7692307692307693, 0.8307692307692307, 0.6815384615384615};
    const auto oracle = enumerate_marginals(example_params(), {-1, 2, -1});
    for (std::size_t t = 0; t < 3; ++t) {
      CHECK(std::abs(belief[t] - expected[t]) <= 1e-12);
      CHECK(std::abs(oracle[t] - expected[t]) <= 1e-12);
    }
  }

  TEST_CASE("single frame is Bayes rule") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      const auto params = random_params(rng);
      for (Symbol x = 0; x < 3; ++x) {
        ObservationSet obs;
        obs.add(0, x);
        const double num = params.initial[1] * params.emission[1][x];
        const double den = params.initial[0] * params.emission[0][x] + num;
        CHECK(forward_backward(params, 1, obs)[0] == doctest::Approx(num / den).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("observation past the end is rejected") {
    ObservationSet obs;
    obs.add(5, 1);
    CHECK_THROWS_WITH_AS(forward_backward(example_params(), 5, obs),
                         doctest::Contains("index out of bounds"), InvalidArgument);
    CHECK_THROWS_AS(forward_backward(example_params(), 0, {}), InvalidArgument);
  }

  TEST_CASE("marginals equal brute-force enumeration for T <= 12") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> length(1, 12);
    std::uniform_real_distribution<double> density(0.0, 0.8);
    for (int trial = 0; trial < 150; ++trial) {
      const auto params = random_params(rng);
      const auto symbols = random_evidence(rng, length(rng), density(rng));
      const auto belief = forward_backward(params, symbols.size(), to_observation_set(symbols));
      const auto oracle = enumerate_marginals(params, symbols);
      for (std::size_t t = 0; t < symbols.size(); ++t) {
        CHECK(std::abs(belief[t] - oracle[t]) <= 1e-9);
      }
    }
  }

  TEST_CASE("stationary start without evidence gives a flat belief") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      auto params = random_params(rng);
      params.initial = stationary_distribution(params.transition);
      const auto belief = forward_backward(params, 40, {});
      for (double p : belief.probs) CHECK(std::abs(p - belief[0]) <= 1e-12);
    }
  }

  TEST_CASE("long chains stay finite") {
    const auto params = preset_params("persistent");
    const std::size_t frames = 200000;
    const auto video = generate_synthetic(params, frames, 3);
    ObservationSet obs;
    for (std::size_t t = 0; t < frames; t += 7) obs.add(t, video.symbols[t]);
    const auto belief = forward_backward(params, frames, obs);
    for (double p : belief.probs) {
      REQUIRE(std::isfinite(p));
      REQUIRE(p >= 0.0);
      REQUIRE(p <= 1.0);
    }
  }
}

TEST_SUITE("params") {
  TEST_CASE("stationary distribution solves the balance equation") {
    const TransitionMatrix a = {{{0.98, 0.02}, {0.04, 0.96}}};
    const auto pi = stationary_distribution(a);
    CHECK(pi[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(pi[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    const auto identity = stationary_distribution({{{1.0, 0.0}, {0.0, 1.0}}});
    CHECK(identity == LabelDistribution{0.5, 0.5});
  }

  TEST_CASE("empirical initial distribution") {
    const std::vector<std::vector<Label>> seqs = {{0, 0, 1}, {1}};
    const auto pi = estimate_initial(seqs);
    CHECK(pi[0] == 0.5);
    CHECK(pi[1] == 0.5);
  }

  TEST_CASE("JSON round trip and schema") {
    const auto params = preset_params("persistent");
    const auto doc = to_json(params);
    CHECK(doc.contains("transition"));
    CHECK(doc.contains("emission"));
    CHECK(doc.contains("initial"));
    CHECK(doc["quantile_boundaries"].size() == 2);
    CHECK(params_from_json(nlohmann::json::parse(doc.dump())) == params);

    TempDir dir;
    save_params(params, dir.file("p.json"));
    CHECK(load_params(dir.file("p.json")) == params);
  }

  TEST_CASE("invalid documents are rejected") {
    auto doc = nlohmann::json::parse(to_json(example_params()).dump());
    auto missing = doc;
    missing.erase("initial");
    CHECK_THROWS_WITH_AS(params_from_json(missing), doctest::Contains("initial"), DataError);
    auto bad_row = doc;
    bad_row["transition"][0] = {0.5, 0.6};
    CHECK_THROWS_AS(params_from_json(bad_row), DataError);
    auto bad_shape = doc;
    bad_shape["emission"][1] = {0.5, 0.5};
    CHECK_THROWS_AS(params_from_json(bad_shape), DataError);
    auto reversed = doc;
    reversed["quantile_boundaries"] = {0.7, 0.2};
    CHECK_THROWS_AS(params_from_json(reversed), DataError);
  }

  TEST_CASE("observation sets hold one entry per frame") {
    ObservationSet obs;
    obs.add(3, 1, 0.5);
    CHECK_THROWS_WITH_AS(obs.add(3, 2), doctest::Contains("already observed"), InvalidArgument);
    CHECK_THROWS_AS(obs.add(4, 3), InvalidArgument);
    CHECK(obs.extent() == 4);
    CHECK(obs.dense(5) == std::vector<Symbol>{-1, -1, -1, 1, -1});
  }
}

TEST_CASE("re-estimation recovers sampling params") {
  const auto params = preset_params("persistent");
  const auto video = generate_synthetic(params, 100000, 99);
  const std::vector<std::vector<Label>> labels = {video.record.labels};
  const std::vector<std::vector<Symbol>> symbols = {video.symbols};
  const auto a = estimate_transition(labels, 1.0);
  const auto e = estimate_emission(labels, symbols, 1.0);
  for (std::size_t y = 0; y < kNumLabels; ++y) {
    for (std::size_t j = 0; j < kNumLabels; ++j) {
      CHECK(std::abs(a[y][j] - params.transition[y][j]) <= 0.01);
    }
    for (std::size_t x = 0; x < kNumSymbols; ++x) {
      CHECK(std::abs(e[y][x] - params.emission[y][x]) <= 0.01);
    }
  }
}
