"""Smoke tests for the python bindings against the built extension."""

import json

import numpy as np
import pytest

import glformer


SMALL = json.dumps(
    {
        "N": 2,
        "c": 8,
        "h": 2,
        "w": 2,
        "D": 8,
        "seed": 11,
        "sttm": {"T": 2},
        "stgm": {"h_e": 8},
    }
)


def test_version_and_default_config():
    assert glformer.__version__
    cfg = json.loads(glformer.default_config())
    assert cfg["N"] == 25
    assert cfg["sttm"]["T"] == 6
    assert cfg["stgm"]["l_dgc"] == 2
    assert cfg["stgm"]["gamma"] == [0.1, 0.3, 1.0]


def test_positional_encoding_shape_and_origin():
    pe = glformer.positional_encoding(2, 3, 8)
    assert pe.shape == (6, 8)
    np.testing.assert_allclose(pe[0, 0::2], 0.0)  # sin slots at (0, 0)
    np.testing.assert_allclose(pe[0, 1::2], 1.0)  # cos slots at (0, 0)
    assert np.all(np.abs(pe) <= 1.0)


def test_tokenize_is_the_channel_major_reshape():
    frame = np.arange(2 * 1 * 2, dtype=float).reshape(2, 1, 2)
    tokens = glformer.tokenize(frame)
    np.testing.assert_array_equal(tokens, frame.reshape(2, 2).T)


def test_softmax_rows_sum_to_one():
    x = np.random.default_rng(0).normal(size=(4, 5))
    s = glformer.softmax(x, 1)
    np.testing.assert_allclose(s.sum(axis=1), 1.0, atol=1e-12)


def test_run_pipeline_shapes_report_and_determinism():
    frames = glformer.synth(SMALL, 11)
    assert frames.shape == (2, 8, 2, 2)

    b1, report1 = glformer.run(frames, SMALL)
    b2, _ = glformer.run(frames, SMALL)
    assert b1.shape == (8, 8)  # (D, N*M)
    np.testing.assert_array_equal(b1, b2)

    report = json.loads(report1)
    assert set(report["invariants"].values()) == {True}
    assert "stage_timings_ms" in report and "checksums" in report


def test_global_and_local_features_blend_within_bounds():
    frames = glformer.synth(SMALL, 11)
    g = glformer.global_features(frames, SMALL)
    l = glformer.local_features(frames, SMALL)
    assert g.shape == l.shape == (8, 8)  # (N*M, D)

    b, _ = glformer.run(frames, SMALL)
    lo = np.minimum(g.T, l.T)
    hi = np.maximum(g.T, l.T)
    assert np.all(b >= lo - 1e-12) and np.all(b <= hi + 1e-12)


def test_blend_weights_sum_to_one():
    rng = np.random.default_rng(1)
    g = rng.normal(size=(4, 6))
    l = rng.normal(size=(4, 6))
    w = rng.normal(size=(8, 8))
    agf, alf = glformer.blend_weights(g, l, w)
    np.testing.assert_allclose(agf + alf, 1.0, atol=1e-12)

    mid = glformer.blend(g, l, np.zeros((8, 8)))
    np.testing.assert_allclose(mid, (g + l) / 2, atol=1e-14)


def test_resolve_config_round_trips():
    resolved = json.loads(glformer.resolve_config(SMALL))
    assert resolved["N"] == 2 and resolved["sttm"]["T"] == 2
    assert resolved["sttm"]["d_ff"] == 32  # 4 * D default


def test_pruned_graph_bundle():
    r = np.random.default_rng(4).normal(size=(4, 8))
    cfg = json.dumps(json.loads(SMALL) | {"h": 2, "w": 2})
    g = glformer.pruned_graph(r, cfg)
    np.testing.assert_array_equal(g["node_features"], r.T)
    np.testing.assert_allclose(g["adjacency"].sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(
        g["probabilities"], 0.3 * g["adjacency"] / 2.0, atol=1e-12
    )
    assert g["slices"].shape == (3, 4, 4)
    assert np.all(g["normalized"] >= 0.0)


def test_pruned_adjacency_and_slices():
    rng = np.random.default_rng(2)
    r = rng.normal(size=(5, 8))
    cfg = json.dumps(json.loads(SMALL) | {"h": 1, "w": 5})
    abar = glformer.pruned_adjacency(r, cfg)
    assert abar.shape == (5, 5)
    assert np.all(abar >= 0.0)

    a = np.abs(rng.normal(size=(5, 5))) + 0.01
    a /= a.sum(axis=1, keepdims=True)
    slices = glformer.adjacency_tensor(a, cfg)
    assert slices.shape == (3, 5, 5)
    np.testing.assert_array_equal(slices[0], np.eye(5))
    np.testing.assert_array_equal(slices[2], 0.0)  # top slice empty under defaults


def test_tzr_round_trip(tmp_path):
    t = np.random.default_rng(3).normal(size=(3, 4))
    path = str(tmp_path / "t.tzr")
    glformer.write_tzr(path, t)
    np.testing.assert_array_equal(glformer.read_tzr(path), t)


def test_config_errors_surface_as_value_error():
    with pytest.raises(ValueError):
        glformer.synth(json.dumps({"N": 0}), 0)


def test_oracle_check_passes():
    results = glformer.oracle_check(SMALL, 0)
    assert results, "oracle table must not be empty"
    assert all(entry["pass"] for entry in results)


def test_gradcheck_blender_passes():
    results = glformer.gradcheck(SMALL, 0, "blender")
    assert results
    assert all(entry["pass"] for entry in results)
