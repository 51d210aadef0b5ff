#include <doctest.h>

#include <nlohmann/json.hpp>

#include "framesearch/commands.hpp"
#include "framesearch/error.hpp"
#include "framesearch/policy.hpp"
#include "framesearch/server.hpp"
#include "framesearch/sweep.hpp"
#include "support/fixtures.hpp"

using namespace framesearch;
using namespace framesearch::testing;

TEST_SUITE("grid") {
  TEST_CASE("default grid has 21 points") {
    const auto grid = parse_grid(kDefaultGrid);
    REQUIRE(grid.size() == 21);
    CHECK(grid.front() == 0.0);
    CHECK(grid[4] == 0.02);
    CHECK(grid.back() == 0.1);
  }

  TEST_CASE("lists and errors") {
    CHECK(parse_grid("0.5,1") == std::vector<double>{0.5, 1.0});
    CHECK(parse_grid("1:1:1") == std::vector<double>{1.0});
    CHECK_THROWS_AS(parse_grid("0:1"), InvalidArgument);
    CHECK_THROWS_AS(parse_grid("0:1:0"), InvalidArgument);
    CHECK_THROWS_AS(parse_grid("0.2,0.1"), InvalidArgument);
    CHECK_THROWS_AS(parse_grid("0,2"), InvalidArgument);
    CHECK_THROWS_AS(parse_grid("a,b"), DataError);
  }
}

TEST_SUITE("sweep") {
  TEST_CASE("CSV round trip") {
    SweepResult result;
    result.rows = {{0.0, 0.625, 3, 0.6}, {0.005, 2.0 / 3.0, 3, 0.1 + 0.2}};
    const auto text = to_csv(result);
    CHECK(text.rfind("bandwidth_ratio,mean_accuracy,episodes,uniform_accuracy\n", 0) == 0);
    CHECK(sweep_from_csv(text) == result);
    result.rows[0].uniform_accuracy.reset();
    result.rows[1].uniform_accuracy.reset();
    CHECK(to_csv(result).rfind("bandwidth_ratio,mean_accuracy,episodes\n", 0) == 0);
    CHECK(sweep_from_csv(to_csv(result)) == result);
    CHECK_THROWS_AS(sweep_from_csv("a,b\n"), DataError);
  }

  TEST_CASE("B = 1 matches the fully observed posterior") {
    const auto params = preset_params("persistent");
    const QuantileBinner binner(params.boundaries);
    const auto clips = persistent_videos(1, 120, 9);
    const std::vector<double> grid = {1.0};
    const auto result = run_sweep(params, binner, clips, grid, local_sources());
    REQUIRE(result.rows.size() == 1);
    CHECK(result.rows[0].mean_accuracy == full_observation_accuracy(params, binner, clips[0]));
    CHECK(result.rows[0].episodes == 1);
  }

  TEST_CASE("parallel sweep equals sequential sweep") {
    const auto params = preset_params("persistent");
    const QuantileBinner binner(params.boundaries);
    const auto clips = persistent_videos(6, 100, 3);
    const auto grid = parse_grid("0:0.1:0.02");
    SweepOptions one{true, false, 1};
    SweepOptions many{true, false, 4};
    CHECK(to_csv(run_sweep(params, binner, clips, grid, local_sources(), one)) ==
          to_csv(run_sweep(params, binner, clips, grid, local_sources(), many)));
  }

  TEST_CASE("frame weighting") {
    const auto params = preset_params("persistent");
    const QuantileBinner binner(params.boundaries);
    auto clips = persistent_videos(2, 100, 4);
    clips[1].labels.resize(10);
    clips[1].scores->resize(10);
    const std::vector<double> grid = {1.0};
    const double a = full_observation_accuracy(params, binner, clips[0]);
    const double b = full_observation_accuracy(params, binner, clips[1]);
    const auto equal = run_sweep(params, binner, clips, grid, local_sources());
    const auto weighted = run_sweep(params, binner, clips, grid, local_sources(), {false, true, 1});
    CHECK(equal.rows[0].mean_accuracy == doctest::Approx((a + b) / 2).epsilon(1e-14));
    CHECK(weighted.rows[0].mean_accuracy == doctest::Approx((100 * a + 10 * b) / 110).epsilon(1e-14));
  }
}

TEST_SUITE("cmd_train") {
  TEST_CASE("videos without a frame of interest are ignored") {
    auto videos = persistent_videos(3, 50, 1);
    VideoRecord quiet;
    quiet.video_id = "quiet";
    quiet.labels.assign(50, 0);
    quiet.scores = std::vector<double>(50, 0.99);
    auto with_quiet = videos;
    with_quiet.push_back(quiet);
    CHECK(train_params(with_quiet, 1.0) == train_params(videos, 1.0));
  }

  TEST_CASE("two frames cannot define quantiles") {
    VideoRecord v{"v", {0, 1}, std::vector<double>{0.1, 0.9}};
    CHECK_THROWS_WITH_AS(train_params({v}, 1.0), doctest::Contains("insufficient data"),
                         DataError);
  }

  TEST_CASE("no frames of interest") {
    VideoRecord v{"v", {0, 0, 0, 0}, std::vector<double>{0.1, 0.9, 0.3, 0.2}};
    CHECK_THROWS_WITH_AS(train_params({v}, 1.0),
                         doctest::Contains("no frames of interest in training set"), DataError);
  }

  TEST_CASE("files in, params out") {
    TempDir dir;
    const auto videos = persistent_videos(20, 100, 2);
    write_labels(dir.file("l.jsonl"), videos);
    write_scores(dir.file("s.jsonl"), videos);
    TrainOptions options{dir.file("l.jsonl"), dir.file("s.jsonl"), 1.0, InitialMode::kStationary,
                         dir.file("p.json")};
    const auto params = cmd_train(options);
    CHECK(load_params(dir.file("p.json")) == params);
    CHECK(params.initial == stationary_distribution(params.transition));
    CHECK(params.boundaries.lower < params.boundaries.upper);
  }
}

TEST_SUITE("cmd_synth") {
  TEST_CASE("fixed seed writes identical files") {
    TempDir a;
    TempDir b;
    SynthOptions options;
    options.num_videos = 5;
    options.frames = 40;
    options.seed = 17;
    options.out_dir = a.path().string();
    cmd_synth(options);
    options.out_dir = b.path().string();
    cmd_synth(options);
    for (const char* name : {"labels.jsonl", "scores.jsonl", "params.json"}) {
      CHECK(read_file(a.file(name)) == read_file(b.file(name)));
      CHECK_FALSE(read_file(a.file(name)).empty());
    }
  }

  TEST_CASE("positive fraction near the stationary value") {
    const auto dataset = synthesize(preset_params("persistent"), 100, 300, 1);
    double positives = 0.0;
    double frames = 0.0;
    for (const auto& r : dataset.records) {
      for (Label y : r.labels) positives += y;
      frames += static_cast<double>(r.frames());
    }
    CHECK(std::abs(positives / frames - 1.0 / 3.0) <= 0.05);
  }

  TEST_CASE("single-frame videos") {
    const auto dataset = synthesize(preset_params("persistent"), 4, 1, 2);
    for (const auto& r : dataset.records) {
      CHECK(r.frames() == 1);
      CHECK(r.scores->size() == 1);
    }
    CHECK_THROWS_AS(preset_params("bogus"), InvalidArgument);
  }
}

TEST_SUITE("cmd_query") {
  struct QueryFixture {
    TempDir dir;
    QueryOptions options;

    QueryFixture() {
      const std::vector<VideoRecord> videos = {boundary_video()};
      write_labels(dir.file("l.jsonl"), videos);
      write_scores(dir.file("s.jsonl"), videos);
      save_params(preset_params("persistent"), dir.file("p.json"));
      options.params_path = dir.file("p.json");
      options.video_id = "boundary";
      options.labels_path = dir.file("l.jsonl");
      options.scores_path = dir.file("s.jsonl");
      options.dump_path = dir.file("episode.json");
    }
  };

  TEST_CASE("B = 0 dumps the prior") {
    QueryFixture f;
    f.options.bandwidth_ratio = 0.0;
    cmd_query(f.options);
    const auto doc = nlohmann::json::parse(read_file(f.dir.file("episode.json")));
    CHECK(doc["queries"].empty());
    CHECK(doc["budget_used"] == 0);
    const auto prior = forward_backward(preset_params("persistent"), 60, {});
    CHECK(doc["belief"].get<std::vector<double>>() == prior.probs);
  }

  TEST_CASE("dumped queries match budget_used") {
    QueryFixture f;
    f.options.bandwidth_ratio = 0.15;
    f.options.losses_path = f.dir.file("losses.json");
    const auto result = cmd_query(f.options);
    const auto doc = nlohmann::json::parse(read_file(f.dir.file("episode.json")));
    CHECK(doc["queries"].size() == doc["budget_used"].get<std::size_t>());
    CHECK(doc["budget_used"] == 9);
    const auto losses = nlohmann::json::parse(read_file(f.dir.file("losses.json")));
    REQUIRE(losses.size() == 9);
    for (std::size_t i = 0; i < losses.size(); ++i) {
      CHECK(losses[i]["next"] == result.queries[i].frame);
      CHECK(losses[i]["expected_losses"].size() == 60);
    }
  }

  TEST_CASE("boundary case queries stay in the uncertain stretch") {
    QueryFixture f;
    f.options.bandwidth_ratio = 0.1;
    f.options.opening_frames = {10, 50};
    const auto result = cmd_query(f.options);
    const auto params = preset_params("persistent");
    ObservationSet obs;
    for (std::size_t i = 0; i < result.queries.size(); ++i) {
      const auto& q = result.queries[i];
      if (i >= 2) {
        const double before = forward_backward(params, 60, obs)[q.frame];
        CHECK(before >= 0.2);
        CHECK(before <= 0.8);
      }
      obs.add(q.frame, q.symbol);
    }
  }

  TEST_CASE("unknown video") {
    QueryFixture f;
    f.options.video_id = "nope";
    CHECK_THROWS_WITH_AS(cmd_query(f.options), doctest::Contains("no such video"), DataError);
  }
}

TEST_SUITE("cmd_eval") {
  TEST_CASE("local and loopback sweeps write identical CSVs") {
    TempDir dir;
    auto videos = persistent_videos(4, 130, 5);
    write_labels(dir.file("l.jsonl"), videos);
    write_scores(dir.file("s.jsonl"), videos);
    save_params(preset_params("persistent"), dir.file("p.json"));

    EvalOptions options;
    options.labels_path = dir.file("l.jsonl");
    options.scores_path = dir.file("s.jsonl");
    options.params_path = dir.file("p.json");
    options.grid = "0:0.1:0.025";
    options.max_clip_len = 50;
    options.uniform_baseline = true;
    options.out_csv = dir.file("local.csv");
    const auto local = cmd_eval(options);
    CHECK(local.rows.size() == 5);
    CHECK(local.rows[0].episodes == 12);

    FrameServer server(ServerCatalog(videos), "127.0.0.1:0");
    server.start();
    options.scores_path.reset();
    options.server_address = "127.0.0.1:" + std::to_string(server.port());
    options.out_csv = dir.file("remote.csv");
    options.jobs = 3;
    cmd_eval(options);
    CHECK(read_file(dir.file("local.csv")) == read_file(dir.file("remote.csv")));
    CHECK(sweep_from_csv(read_file(dir.file("local.csv"))) == local);
  }

  TEST_CASE("empty evaluation set") {
    VideoRecord v{"v", {0, 0}, std::vector<double>{0.1, 0.2}};
    CHECK_THROWS_AS(evaluation_clips({v}, 300), DataError);
  }
}
