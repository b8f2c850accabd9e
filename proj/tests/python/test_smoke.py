"""Smoke tests for the native module: every main operation is callable from
Python and returns sane values on small inputs."""

import math
import os
import subprocess

import numpy as np
import pytest

try:
    import ralacs as m
except ImportError:
    import _ralacs as m


def test_iou_hand_case():
    assert m.iou((0, 0, 2, 2), (1, 1, 3, 3)) == pytest.approx(1.0 / 7.0)
    assert m.iou((0, 0, 1, 1), (5, 5, 6, 6)) == 0.0


def test_softmax_probability_vector():
    p = m.softmax([1.0, 2.0, 3.0])
    assert sum(p) == pytest.approx(1.0)
    assert p == sorted(p)


def test_bilinear_and_upsample():
    feat = np.arange(4.0).reshape(1, 1, 2, 2)
    assert m.bilinear_sample(feat, 0.5, 0.5, 0) == pytest.approx(1.5)
    up = m.upsample_nearest_2x(feat)
    assert up.shape == (1, 1, 4, 4)
    assert up[0, 0, 0, 1] == feat[0, 0, 0, 0]


def test_conv1x1_identity():
    rng = np.random.default_rng(3)
    feat = rng.normal(size=(1, 3, 2, 2))
    out = m.conv1x1(feat, np.eye(3), np.zeros(3))
    np.testing.assert_allclose(out, feat)


def test_layer_norm_statistics():
    rng = np.random.default_rng(5)
    feat = rng.normal(size=(1, 8, 3, 3))
    normed = m.layer_norm(feat, 1e-5)
    np.testing.assert_allclose(normed.mean(axis=1), 0.0, atol=1e-9)


def test_flow_colorwheel_zero_is_white():
    zero = np.zeros((4, 4))
    img = m.flow_to_colorwheel(zero, zero)
    np.testing.assert_allclose(img, 1.0)


def test_fuse_fpn_zero_flow_identity():
    rng = np.random.default_rng(7)
    rgb = [rng.normal(size=(1, 2, 8, 8)), rng.normal(size=(1, 2, 4, 4))]
    zeros = [np.zeros_like(level) for level in rgb]
    fused = m.fuse_fpn(rgb, zeros)
    np.testing.assert_allclose(fused[1], rgb[1])
    np.testing.assert_allclose(
        fused[0], rgb[0] + np.kron(rgb[1], np.ones((1, 1, 2, 2))))


def test_synthetic_provider_deterministic():
    rng = np.random.default_rng(9)
    image = rng.uniform(size=(1, 3, 16, 16))
    a = m.synthetic_feature_provider(image, 2, 4, 42)
    b = m.synthetic_feature_provider(image, 2, 4, 42)
    for la, lb in zip(a, b):
        np.testing.assert_array_equal(la, lb)
    assert a[0].shape == (1, 4, 8, 8)
    assert a[1].shape == (1, 4, 4, 4)


def test_pseudo_labels():
    out = m.generate_pseudo_labels(
        [(0.95, (0, 0, 4, 4)), (0.8, (10, 10, 14, 14))],
        [(40, 40, 44, 44)],
    )
    assert len(out) == 1
    assert out[0][0] == pytest.approx(0.95)


def test_roi_align_constant_map():
    feat = np.full((1, 2, 8, 8), 2.5)
    out = m.roi_align(feat, (1.5, 1.5, 6.5, 6.5))
    assert out.shape == (1, 2, 7, 7)
    np.testing.assert_allclose(out, 2.5)


def test_droi_matches_keyframe_for_constant_time():
    rng = np.random.default_rng(11)
    fast_slice = rng.normal(size=(1, 3, 8, 8))
    fast = np.repeat(fast_slice, 4, axis=0)
    slow = fast_slice.copy()
    box = (1.0, 2.0, 6.0, 7.0)
    via_droi = m.droi_align(slow, fast, [box] * 4)
    via_key = m.keyframe_align(slow, fast, box)
    np.testing.assert_allclose(via_droi, via_key, atol=1e-9)
    assert m.slow_align_indices(4, 32) == [3, 7, 11, 15, 19, 23, 27, 31]


def test_tracker_births_and_ids():
    tracker = m.OnlineTracker()
    emitted = []
    for f in range(8):
        dets = [(1, 0.9, (10 + f, 20, 22 + f, 32))]
        emitted.append(tracker.step(f, dets))
    assert emitted[0] == [] and emitted[1] == []
    assert all(len(e) == 1 for e in emitted[2:])
    assert {e[0][0] for e in emitted[2:]} == {0}
    tubes = tracker.tubelets(0, 7, 4)
    assert len(tubes) == 1
    track_id, class_id, start, boxes = tubes[0]
    assert (track_id, class_id, start) == (0, 1, 0)
    assert all(b is not None for b in boxes)


def test_hr2o_single_agent_and_residual():
    rng = np.random.default_rng(13)
    feats = [rng.normal(size=(1, 3, 2, 2)) for _ in range(2)]
    wq = rng.normal(size=(3, 3)) * 0.5
    zeros3 = np.zeros(3)
    out = m.hr2o_forward(
        feats, wq, zeros3, wq, zeros3, wq, zeros3, np.zeros((3, 3)), zeros3)
    # zero output conv leaves the residual identity
    for got, orig in zip(out, feats):
        np.testing.assert_array_equal(got, orig)


def test_classify_and_focal_loss():
    feat = np.full((1, 1, 2, 2), 0.1)
    scores = m.classify(feat, np.zeros((2, 4)), np.zeros(2))
    assert scores == pytest.approx([0.5, 0.5])
    loss, grad = m.focal_loss([0.7, 0.2], [1, 0], 0.0, 0.5)
    expected = -0.5 * (math.log(0.7) + math.log(0.8))
    assert loss == pytest.approx(expected)
    assert grad[0] == pytest.approx(0.5 * (0.7 - 1.0))


def test_trim_and_mask():
    boxes = [(0, 0, 4, 4)] * 4
    scores = [[0.0005], [0.6], [0.7], [0.0002]]
    tracks = m.trim_tube(10, boxes, scores, 0, 0.001)
    assert len(tracks) == 1
    assert tracks[0]["start_frame"] == 11
    assert tracks[0]["end_frame"] == 12
    assert m.online_mask([0.5, 1e-5], 0.001) == [0.5, 0.0]


def test_time_sync_two_pointer():
    assert m.time_sync([10.0, 8.0, 6.0], [9.9, 7.0]) == [0, 1, 1]


def test_handle_pedestrian_table():
    stop = m.action_names().index("Stop")
    mov = m.action_names().index("Mov")
    assert m.handle_pedestrian([(stop, 9.5), (stop, 9.0)], 10.0)
    assert not m.handle_pedestrian(
        [(stop, 9.8), (mov, 9.6), (mov, 9.4), (mov, 9.2), (stop, 9.0)], 10.0)
    history = m.append_action([], [0.1, 0.9], now=3.0)
    assert history == [(1, 3.0)]


def test_frame_map_fixture():
    gt = [(0, 1, (0, 0, 4, 4)), (1, 1, (10, 0, 14, 4))]
    preds = [
        (0, 1, 0.9, (0, 0, 4, 4)),
        (0, 1, 0.8, (100, 0, 104, 4)),
        (1, 1, 0.7, (10, 0, 14, 4)),
    ]
    report = m.frame_map(preds, gt)
    assert report["mean_ap"] == pytest.approx(5.0 / 6.0)


def test_video_map_identity():
    tracks = [(1, 0, [(0, 0, 4, 4)] * 5, [1.0] * 5)]
    assert m.video_map(tracks, tracks)["mean_ap"] == pytest.approx(1.0)


def test_end_to_end_scenario():
    scenario = """
seed=5
duration=24
width=64
height=64
ego_dx=0.25
agent 0 class=1 active=1
traj 0 0 20 20 10 12 Wait2X
traj 0 23 36 20 10 12 Wait2X
agent 1 class=2 active=1
traj 1 0 44 46 12 10 MovTow
traj 1 23 28 46 12 10 MovTow
"""
    cfg = m.PipelineConfig()
    cfg.clip_length = 8
    cfg.slow_frames = 2
    cfg.feature_channels = 6
    cfg.reduced_channels = 8
    cfg.attention_dim = 8
    cfg.roi_out = 5
    cfg.train_epochs = 40
    cfg.train_stride = 2
    cfg.learning_rate = 0.02
    cfg.dropout_rate = 0.0
    report = m.run_scenario(scenario, cfg)
    assert report["frame"]["mean_ap"] >= 0.9


@pytest.mark.skipif("RALACS_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_conflict_round_trip(tmp_path):
    cli = os.environ["RALACS_CLI"]
    history = tmp_path / "history.jsonl"
    history.write_text(
        '{"label":"Stop","stamp":9.5}\n'
        '{"label":"Stop","stamp":9.0}\n'
        '{"label":"Mov","stamp":1.0}\n'
    )
    out = subprocess.run(
        [cli, "conflict", "--history", str(history), "--now", "10",
         "--int-set", "Stop,Wait2X", "--window", "5"],
        capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "true"


@pytest.mark.skipif("RALACS_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_flowviz_round_trip(tmp_path):
    cli = os.environ["RALACS_CLI"]
    # write a flow tensor through the binding conventions: (1,2,H,W) f32 file
    flow_file = tmp_path / "flow.bin"
    img_file = tmp_path / "img.bin"
    header = b"RLCTNSR1" + np.array([1, 2, 3, 3], dtype="<u4").tobytes()
    payload = np.zeros(18, dtype="<f4").tobytes()
    flow_file.write_bytes(header + payload)
    subprocess.run(
        [cli, "flowviz", "--flow", str(flow_file), "--out", str(img_file)], check=True)
    raw = img_file.read_bytes()
    assert raw[:8] == b"RLCTNSR1"
    dims = np.frombuffer(raw[8:24], dtype="<u4")
    assert list(dims) == [1, 3, 3, 3]
    values = np.frombuffer(raw[24:], dtype="<f4")
    assert np.allclose(values, 1.0)  # zero flow encodes to white
