import math

import numpy as np
import pytest

import pnplab


def test_chirp_shape_and_rate():
    x = pnplab.synth_chirp(724.0, 8.0, 1.4)
    assert x.shape == (32768,)
    assert pnplab.sample_rate("chirp") == 8192.0
    assert np.all(np.isfinite(x))
    assert np.max(np.abs(x)) > 0.1


def test_drum_shape():
    x = pnplab.synth_drum(2 * math.pi * 200, 1.0, 0.01, 0.01, 0.5)
    assert x.shape == (65536,)
    assert x[0] == 0.0


def test_scale_round_trip():
    bar = pnplab.scale("chirp", [724.0, 8.0, 1.4])
    assert all(-1.0 <= v <= 1.0 for v in bar)
    back = pnplab.unscale("chirp", bar)
    assert back == pytest.approx([724.0, 8.0, 1.4], rel=1e-12)
    assert pnplab.scale("chirp", [512.0, 4.0, 0.5]) == pytest.approx([-1.0, -1.0, -1.0])


def test_range_error_carries_kind():
    with pytest.raises(pnplab.PnpError) as info:
        pnplab.scale("chirp", [100.0, 8.0, 1.4])
    assert info.value.kind == "range-error"
    assert info.value.exit_code == 2


def test_features_silence_and_distance():
    z = pnplab.features(np.zeros(32768), "chirp")
    assert z.ndim == 1 and z.size > 0
    assert np.all(z == 0.0)
    x = pnplab.synth_chirp(724.0, 8.0, 1.4)
    assert pnplab.mss_distance(x, x) == 0.0
    assert pnplab.mss_distance(x, -x) == pytest.approx(0.0, abs=1e-9)


def test_kernel_algebra():
    rng = np.random.default_rng(0)
    jac = rng.normal(size=(7, 3))
    m = pnplab.metric(jac)
    np.testing.assert_allclose(m, jac.T @ jac, rtol=1e-12)
    values, vectors = pnplab.eig_sym(m)
    assert values[0] >= values[1] >= values[2] >= 0.0
    np.testing.assert_allclose(vectors @ np.diag(values) @ vectors.T, m, atol=1e-9)
    d = rng.normal(size=3)
    assert pnplab.pnp_quadratic(d, m, 0.5) == pytest.approx(d @ (m + 0.5 * np.eye(3)) @ d, rel=1e-10)
    assert pnplab.damped_condition(m, values[0]) <= math.sqrt(2) + 1e-12


def test_jacobian_shape():
    j = pnplab.jacobian("chirp", [0.1, -0.2, 0.3])
    assert j.shape[1] == 3
    assert j.shape[0] == pnplab.features(pnplab.synth_chirp(724.0, 8.0, 1.4), "chirp").size
    assert np.linalg.norm(j) > 0.0


def test_resolve_config():
    text, digest = pnplab.resolve_config("synth = drum\n")
    assert "synth = drum" in text
    assert len(digest) == 16
    again, digest2 = pnplab.resolve_config(text)
    assert again == text and digest2 == digest
    with pytest.raises(pnplab.PnpError) as info:
        pnplab.resolve_config("nonsense = 1\n")
    assert info.value.kind == "config"
