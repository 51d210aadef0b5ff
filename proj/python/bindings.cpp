#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "framesearch/commands.hpp"
#include "framesearch/data.hpp"
#include "framesearch/episode.hpp"
#include "framesearch/error.hpp"
#include "framesearch/hmm.hpp"
#include "framesearch/policy.hpp"
#include "framesearch/server.hpp"
#include "framesearch/sweep.hpp"

namespace py = pybind11;
namespace fs = framesearch;

namespace {

fs::ObservationSet to_observations(const std::map<fs::FrameIndex, fs::Symbol>& evidence) {
  fs::ObservationSet out;
  for (const auto& [t, x] : evidence) out.add(t, x);
  return out;
}

py::dict episode_dict(const fs::EpisodeResult& r) {
  py::dict d;
  py::list queries;
  for (const auto& q : r.queries) queries.append(py::make_tuple(q.frame, q.score, q.symbol));
  d["queries"] = queries;
  d["belief"] = r.final_belief.probs;
  d["predictions"] = r.predictions;
  d["accuracy"] = r.accuracy;
  d["budget_used"] = r.budget_used;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "HMM-guided frame querying under a bandwidth budget";

  auto base = py::register_exception<fs::Error>(m, "Error");
  py::register_exception<fs::InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<fs::DataError>(m, "DataError", base.ptr());
  py::register_exception<fs::TransportError>(m, "TransportError", base.ptr());

  m.attr("NUM_LABELS") = fs::kNumLabels;
  m.attr("NUM_SYMBOLS") = fs::kNumSymbols;

  py::class_<fs::HmmParams>(m, "HmmParams")
      .def(py::init<>())
      .def(py::init([](fs::TransitionMatrix transition, fs::EmissionMatrix emission,
                       fs::LabelDistribution initial, std::pair<double, double> boundaries) {
             fs::HmmParams p{transition, emission, initial, {boundaries.first, boundaries.second}};
             p.validate();
             return p;
           }),
           py::arg("transition"), py::arg("emission"), py::arg("initial"),
           py::arg("boundaries") = std::make_pair(1.0 / 3.0, 2.0 / 3.0))
      .def_readwrite("transition", &fs::HmmParams::transition)
      .def_readwrite("emission", &fs::HmmParams::emission)
      .def_readwrite("initial", &fs::HmmParams::initial)
      .def_property(
          "boundaries",
          [](const fs::HmmParams& p) {
            return std::make_pair(p.boundaries.lower, p.boundaries.upper);
          },
          [](fs::HmmParams& p, std::pair<double, double> b) { p.boundaries = {b.first, b.second}; })
      .def("validate", &fs::HmmParams::validate)
      .def("to_json", [](const fs::HmmParams& p) { return fs::to_json(p).dump(); })
      .def_static("from_json",
                  [](const std::string& text) {
                    return fs::params_from_json(nlohmann::json::parse(text));
                  })
      .def_static("load", &fs::load_params)
      .def("save", [](const fs::HmmParams& p, const std::string& path) { fs::save_params(p, path); })
      .def(py::self == py::self);

  m.def("preset_params", &fs::preset_params, py::arg("name") = "persistent");

  m.def(
      "forward_backward",
      [](const fs::HmmParams& params, std::size_t frames,
         const std::map<fs::FrameIndex, fs::Symbol>& evidence) {
        return fs::forward_backward(params, frames, to_observations(evidence)).probs;
      },
      py::arg("params"), py::arg("frames"), py::arg("observations") = py::dict(),
      "Posterior P(Y_t = 1) for every frame given {frame: symbol} evidence.");

  using Sequences = std::vector<std::vector<fs::Label>>;
  m.def(
      "estimate_transition",
      [](const Sequences& labels, double smoothing) {
        return fs::estimate_transition(labels, smoothing);
      },
      py::arg("label_sequences"), py::arg("smoothing") = 1.0);
  m.def(
      "estimate_emission",
      [](const Sequences& labels, const std::vector<std::vector<fs::Symbol>>& symbols,
         double smoothing) { return fs::estimate_emission(labels, symbols, smoothing); },
      py::arg("label_sequences"), py::arg("symbol_sequences"), py::arg("smoothing") = 1.0);
  m.def(
      "estimate_initial", [](const Sequences& labels) { return fs::estimate_initial(labels); },
      py::arg("label_sequences"));
  m.def("stationary_distribution", &fs::stationary_distribution);

  m.def(
      "expected_cross_entropy",
      [](const std::vector<double>& probs) { return fs::expected_cross_entropy(probs); },
      "Mean binary entropy of a belief vector, in nats.");
  m.def("observation_predictive", &fs::observation_predictive);
  m.def(
      "expected_loss_for_query",
      [](const fs::HmmParams& params, std::size_t frames,
         const std::map<fs::FrameIndex, fs::Symbol>& evidence, fs::FrameIndex q) {
        const auto observations = to_observations(evidence);
        const auto belief = fs::forward_backward(params, frames, observations);
        return fs::expected_loss_for_query(params, frames, observations, q, belief);
      },
      py::arg("params"), py::arg("frames"), py::arg("observations"), py::arg("q"));
  m.def(
      "select_next_query",
      [](const fs::HmmParams& params, std::size_t frames,
         const std::map<fs::FrameIndex, fs::Symbol>& evidence) {
        const auto plan = fs::select_next_query(params, frames, to_observations(evidence));
        return py::make_tuple(plan.next, plan.expected_losses);
      },
      py::arg("params"), py::arg("frames"), py::arg("observations") = py::dict(),
      "Returns (next_frame, expected_losses) with None for observed frames.");

  m.def(
      "compute_quantiles",
      [](const std::vector<double>& scores) {
        const auto b = fs::compute_quantiles(scores).boundaries();
        return std::make_pair(b.lower, b.upper);
      },
      py::arg("scores"));
  m.def(
      "discretize",
      [](std::pair<double, double> boundaries, double score) {
        return fs::QuantileBinner({boundaries.first, boundaries.second}).discretize(score);
      },
      py::arg("boundaries"), py::arg("score"));
  m.def(
      "generate_synthetic",
      [](const fs::HmmParams& params, std::size_t frames, std::uint64_t seed) {
        auto v = fs::generate_synthetic(params, frames, seed);
        py::dict d;
        d["labels"] = v.record.labels;
        d["scores"] = *v.record.scores;
        d["symbols"] = v.symbols;
        return d;
      },
      py::arg("params"), py::arg("frames"), py::arg("seed"));
  m.def("query_budget", &fs::query_budget);
  m.def("uniform_query_indices", &fs::uniform_query_indices);

  m.def(
      "run_episode",
      [](const fs::HmmParams& params, std::vector<double> scores, double bandwidth_ratio,
         std::optional<std::vector<fs::Label>> labels, bool uniform) {
        fs::InMemoryFrameSource source(std::move(scores));
        const fs::QuantileBinner binner(params.boundaries);
        std::optional<std::span<const fs::Label>> view;
        if (labels) view = std::span<const fs::Label>(*labels);
        const auto r = uniform
                           ? fs::uniform_baseline_episode(params, binner, source, bandwidth_ratio, view)
                           : fs::run_episode(params, binner, source, bandwidth_ratio, view);
        auto d = episode_dict(r);
        d["requests"] = source.requests();
        return d;
      },
      py::arg("params"), py::arg("scores"), py::arg("bandwidth_ratio"),
      py::arg("labels") = py::none(), py::arg("uniform") = false);
  m.def(
      "run_remote_episode",
      [](const fs::HmmParams& params, const std::string& address, const std::string& video,
         double bandwidth_ratio) {
        fs::RemoteFrameSource source(address, video);
        const fs::QuantileBinner binner(params.boundaries);
        const auto r = fs::run_episode(params, binner, source, bandwidth_ratio);
        auto d = episode_dict(r);
        d["requests"] = source.requests();
        d["server_counters"] = source.server_counters();
        return d;
      },
      py::arg("params"), py::arg("address"), py::arg("video"), py::arg("bandwidth_ratio"));

  m.def(
      "run_sweep",
      [](const fs::HmmParams& params,
         const std::vector<std::pair<std::vector<fs::Label>, std::vector<double>>>& videos,
         const std::string& grid, bool uniform_baseline, std::size_t jobs) {
        std::vector<fs::VideoRecord> clips;
        for (std::size_t i = 0; i < videos.size(); ++i) {
          clips.push_back({"v" + std::to_string(i), videos[i].first, videos[i].second});
        }
        const auto result = fs::run_sweep(params, fs::QuantileBinner(params.boundaries), clips,
                                          fs::parse_grid(grid), fs::local_sources(),
                                          {uniform_baseline, false, jobs});
        return fs::to_csv(result);
      },
      py::arg("params"), py::arg("videos"), py::arg("grid") = fs::kDefaultGrid,
      py::arg("uniform_baseline") = false, py::arg("jobs") = 1,
      "Sweeps (labels, scores) pairs over the grid; returns the CSV text.");

  py::class_<fs::FrameServer>(m, "FrameServer")
      .def(py::init([](const std::map<std::string, std::vector<double>>& videos,
                       const std::string& listen) {
             fs::ServerCatalog catalog;
             for (const auto& [id, scores] : videos) catalog.add(id, scores);
             return std::make_unique<fs::FrameServer>(std::move(catalog), listen);
           }),
           py::arg("videos"), py::arg("listen") = "127.0.0.1:0")
      .def("start", &fs::FrameServer::start, py::call_guard<py::gil_scoped_release>())
      .def("stop", &fs::FrameServer::stop, py::call_guard<py::gil_scoped_release>())
      .def_property_readonly("port", &fs::FrameServer::port)
      .def_property_readonly("total_frame_responses", &fs::FrameServer::total_frame_responses);
}
