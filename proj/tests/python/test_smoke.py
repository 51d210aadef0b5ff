import math

import pytest

import framesearch as fs


def example_params():
    return fs.HmmParams(
        transition=[[0.9, 0.1], [0.2, 0.8]],
        emission=[[0.6, 0.3, 0.1], [0.1, 0.3, 0.6]],
        initial=[0.5, 0.5],
    )


def test_forward_backward_matches_frozen_marginals():
    probs = fs.forward_backward(example_params(), 3, {1: 2})
    expected = [0.7692307692307693, 0.8307692307692307, 0.6815384615384615]
    assert probs == pytest.approx(expected, abs=1e-12)


def test_no_evidence_gives_prior_marginals():
    params = example_params()
    probs = fs.forward_backward(params, 4)
    assert probs[0] == pytest.approx(0.5)


def test_planner_never_raises_entropy():
    params = example_params()
    evidence = {0: 2, 2: 1}
    h = fs.expected_cross_entropy(fs.forward_backward(params, 5, evidence))
    nxt, losses = fs.select_next_query(params, 5, evidence)
    assert losses[0] is None and losses[2] is None
    assert all(l is None or l <= h + 1e-9 for l in losses)
    assert losses[nxt] == min(l for l in losses if l is not None)
    assert fs.expected_loss_for_query(params, 5, evidence, nxt) == pytest.approx(losses[nxt])


def test_entropy_is_in_nats():
    assert fs.expected_cross_entropy([0.5]) == pytest.approx(math.log(2))


def test_quantiles_and_binning():
    b = fs.compute_quantiles([0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    assert b == (0.2, 0.4)
    assert fs.discretize(b, 0.2) == 0
    assert fs.discretize(b, 0.3) == 1
    assert fs.discretize(b, 0.9) == 2


def test_estimators_and_json_round_trip():
    a = fs.estimate_transition([[0, 0, 1, 1]], smoothing=0.0)
    assert a[0] == pytest.approx([0.5, 0.5])
    assert a[1] == pytest.approx([0.0, 1.0])
    e = fs.estimate_emission([[0, 1]], [[0, 2]], smoothing=0.0)
    assert e[0] == pytest.approx([1.0, 0.0, 0.0])
    assert fs.estimate_initial([[0, 1, 1, 1]]) == pytest.approx([0.25, 0.75])
    params = fs.preset_params("persistent")
    assert fs.HmmParams.from_json(params.to_json()) == params


def test_episode_respects_budget_and_is_deterministic():
    params = fs.preset_params("persistent")
    video = fs.generate_synthetic(params, 300, 11)
    first = fs.run_episode(params, video["scores"], 0.02, labels=video["labels"])
    second = fs.run_episode(params, video["scores"], 0.02, labels=video["labels"])
    assert first == second
    assert first["requests"] == 6 == first["budget_used"]
    assert 0.0 <= first["accuracy"] <= 1.0
    uniform = fs.run_episode(params, video["scores"], 0.02, uniform=True)
    assert [q[0] for q in uniform["queries"]] == fs.uniform_query_indices(300, 6)


def test_remote_episode_counts_requests():
    params = fs.preset_params("persistent")
    video = fs.generate_synthetic(params, 300, 3)
    server = fs.FrameServer({"clip": video["scores"]})
    port = server.start()
    try:
        remote = fs.run_remote_episode(params, f"127.0.0.1:{port}", "clip", 0.02)
        local = fs.run_episode(params, video["scores"], 0.02)
        assert remote["requests"] == 6
        assert remote["server_counters"] == {"clip": 6}
        assert remote["queries"] == local["queries"]
        assert server.total_frame_responses == 6
        with pytest.raises(fs.DataError):
            fs.run_remote_episode(params, f"127.0.0.1:{port}", "missing", 0.02)
    finally:
        server.stop()


def test_sweep_csv():
    params = fs.preset_params("persistent")
    videos = []
    for seed in range(4):
        v = fs.generate_synthetic(params, 100, seed)
        videos.append((v["labels"], v["scores"]))
    csv = fs.run_sweep(params, videos, grid="0,0.05,0.1", uniform_baseline=True)
    lines = csv.strip().splitlines()
    assert lines[0] == "bandwidth_ratio,mean_accuracy,episodes,uniform_accuracy"
    assert len(lines) == 4


def test_invalid_params_raise():
    with pytest.raises(fs.DataError, match="row sums"):
        fs.HmmParams(
            transition=[[0.5, 0.6], [0.2, 0.8]],
            emission=[[0.6, 0.3, 0.1], [0.1, 0.3, 0.6]],
            initial=[0.5, 0.5],
        )
