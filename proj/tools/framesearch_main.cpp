// framesearch: train, evaluate, inspect and serve the frame-query agent.

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "framesearch/commands.hpp"
#include "framesearch/error.hpp"
#include "framesearch/server.hpp"

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

using namespace framesearch;

int run_serve(const std::string& listen, const std::string& scores_path) {
  ServerCatalog catalog;
  for (auto& [id, scores] : read_score_file(scores_path)) catalog.add(id, std::move(scores));
  FrameServer server(std::move(catalog), listen);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto port = server.start();
  std::cout << "listening on port " << port << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  std::cerr << "served " << server.total_frame_responses() << " frame requests\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bandwidth-constrained frame-of-interest search"};
  app.require_subcommand(1);

  // Accepted everywhere; only synth draws random numbers.
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  TrainOptions train;
  std::string initial = "empirical";
  auto* train_cmd = app.add_subcommand("train", "Estimate HMM params from labels and scores");
  train_cmd->add_option("--labels", train.labels_path, "Labels JSON-lines file")->required();
  train_cmd->add_option("--scores", train.scores_path, "Scores JSON-lines file")->required();
  train_cmd->add_option("--smoothing", train.smoothing, "Additive count smoothing")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--initial", initial, "Initial distribution: empirical|stationary")
      ->capture_default_str()
      ->check(CLI::IsMember({"empirical", "stationary"}));
  train_cmd->add_option("--out,--params", train.out_path, "Output params JSON")->required();
  train_cmd->add_option("--seed", seed);

  EvalOptions eval;
  std::string baseline;
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy-versus-bandwidth sweep");
  eval_cmd->add_option("--labels", eval.labels_path, "Labels JSON-lines file")->required();
  auto* eval_scores = eval_cmd->add_option("--scores", eval.scores_path, "Scores JSON-lines file");
  eval_cmd->add_option("--server", eval.server_address, "Frame server host:port")
      ->excludes(eval_scores);
  eval_cmd->add_option("--params", eval.params_path, "Params JSON")->required();
  eval_cmd->add_option("--grid", eval.grid, "start:stop:step or comma list")->capture_default_str();
  eval_cmd->add_option("--max-clip-len", eval.max_clip_len)->capture_default_str()->check(
      CLI::PositiveNumber);
  eval_cmd->add_option("--baseline", baseline, "Add a baseline column (uniform)")
      ->check(CLI::IsMember({"uniform"}));
  eval_cmd->add_flag("--frame-weighted", eval.frame_weighted, "Weight clips by frame count");
  eval_cmd->add_option("--jobs", jobs)->capture_default_str()->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", eval.out_csv, "CSV output (stdout when omitted)");
  eval_cmd->add_option("--plot-data", eval.plot_path, "Two-column file for gnuplot");
  eval_cmd->add_option("--seed", seed);

  QueryOptions query;
  auto* query_cmd = app.add_subcommand("query", "Run one episode and dump it");
  query_cmd->add_option("--params", query.params_path, "Params JSON")->required();
  query_cmd->add_option("--video", query.video_id, "Video id")->required();
  query_cmd->add_option("--labels", query.labels_path, "Labels JSON-lines file");
  auto* query_scores = query_cmd->add_option("--scores", query.scores_path, "Scores file");
  query_cmd->add_option("--server", query.server_address, "Frame server host:port")
      ->excludes(query_scores);
  query_cmd->add_option("--bandwidth,-B", query.bandwidth_ratio, "Bandwidth ratio B")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  query_cmd->add_option("--first-frames", query.opening_frames,
                        "Frames to fetch before greedy selection starts")
      ->delimiter(',');
  query_cmd->add_flag("--uniform", query.uniform_baseline, "Use evenly spaced queries");
  query_cmd->add_option("--out,--dump-episode", query.dump_path, "Episode JSON output");
  query_cmd->add_option("--dump-losses", query.losses_path, "Per-step expected losses JSON");
  query_cmd->add_option("--seed", seed);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset");
  auto* synth_params = synth_cmd->add_option("--params", synth.params_path, "Generating params");
  synth_cmd->add_option("--preset", synth.preset, "Named params preset")
      ->capture_default_str()
      ->excludes(synth_params);
  synth_cmd->add_option("--videos", synth.num_videos)->capture_default_str()->check(
      CLI::PositiveNumber);
  synth_cmd->add_option("--frames", synth.frames)->capture_default_str()->check(
      CLI::PositiveNumber);
  synth_cmd->add_option("--seed", seed)->capture_default_str();
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();

  std::string listen = "127.0.0.1:7070";
  std::string serve_scores;
  auto* serve_cmd = app.add_subcommand("serve", "Serve frame scores over TCP");
  serve_cmd->add_option("--listen", listen, "Bind address host:port")->capture_default_str();
  serve_cmd->add_option("--scores", serve_scores, "Scores JSON-lines file")->required();
  serve_cmd->add_option("--labels", "Ignored by the server; labels never leave the client");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      train.initial = initial == "stationary" ? InitialMode::kStationary : InitialMode::kEmpirical;
      cmd_train(train);
    } else if (*eval_cmd) {
      eval.uniform_baseline = baseline == "uniform";
      eval.jobs = jobs;
      const auto result = cmd_eval(eval);
      if (!eval.out_csv) std::cout << to_csv(result);
    } else if (*query_cmd) {
      const auto result = cmd_query(query);
      if (!query.dump_path) std::cout << to_json(result).dump() << '\n';
    } else if (*synth_cmd) {
      synth.seed = seed;
      cmd_synth(synth);
    } else if (*serve_cmd) {
      return run_serve(listen, serve_scores);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
