"""Smoke tests for the fqvlab extension module."""

import json

import numpy as np
import pytest

import fqvlab


def test_version_string():
    assert isinstance(fqvlab.version(), str)
    assert fqvlab.version().count(".") == 2


def test_generate_shapes_and_determinism():
    t, w, label = fqvlab.generate("brownian:seed=7,grid=4096")
    assert t.shape == (4097,)
    assert w.shape == (4097, 1)
    assert w[0, 0] == 0.0
    assert "brownian" in label
    t2, w2, _ = fqvlab.generate("brownian:seed=7,grid=4096")
    assert np.array_equal(t, t2)
    assert np.array_equal(w, w2)


def test_constant_path_has_zero_quadratic_variation():
    qv = fqvlab.quadratic_variation("constant:3.0,grid=4096", n_min=4, n_max=8)
    assert qv.shape == (5, 2)
    assert np.all(qv[:, 1] == 0.0)


def test_identity_isometry_gap_is_rounding_level():
    gaps = fqvlab.isometry_gap("identity", "brownian:seed=42,grid=65536", n_min=4, n_max=10)
    assert gaps.shape[1] == 4
    assert np.all(gaps[:, 3] <= 1e-12)


def test_integral_variants_coincide_for_cylindrical_functionals():
    a = fqvlab.follmer_integral("x2", "brownian:seed=42,grid=16384", level=8,
                                variant="along_approx")
    b = fqvlab.follmer_integral("x2", "brownian:seed=42,grid=16384", level=8,
                                variant="along_path")
    assert a == b


def test_evaluate_and_gradient():
    spec = "brownian:seed=11,grid=4096"
    _, w, _ = fqvlab.generate(spec)
    value = fqvlab.evaluate("x2", spec)
    assert value == pytest.approx(w[-1, 0] ** 2, rel=1e-12)
    grad = fqvlab.vertical_gradient("x2", spec)
    assert grad.shape == (1,)
    assert grad[0] == pytest.approx(2.0 * w[-1, 0], rel=1e-12)


def test_decompose_identity_is_exact():
    out = fqvlab.decompose("identity", "brownian:seed=42,grid=16384", n_min=4, n_max=8)
    assert not out["degenerate_qv"]
    for level in out["levels"]:
        assert level["qv_ratio"] == 0.0


def test_run_experiment_reproduces_bytes():
    config = json.dumps({
        "kind": "isometry",
        "functional": "x2",
        "path": {"kind": "brownian", "seed": 7, "grid": 4096},
        "partition": {"kind": "dyadic", "n_min": 4, "n_max": 8},
    })
    a = fqvlab.run_experiment(config, include_timestamp=False)
    b = fqvlab.run_experiment(config, include_timestamp=False)
    assert a == b
    parsed = json.loads(a)
    assert parsed["kind"] == "isometry"
    assert parsed["pass"] is True
    assert "timestamp" not in parsed
    csv_a = fqvlab.run_experiment_csv(config)
    assert csv_a.startswith("n,mesh,osc,lhs,rhs,gap,")


def test_config_errors_map_to_value_error():
    with pytest.raises(ValueError):
        fqvlab.generate("levy:seed=1")
    with pytest.raises(ValueError):
        fqvlab.run_experiment("{not json")


def test_ito_mc_summary_keys():
    out = fqvlab.ito_isometry_mc("x2", seeds=64, seed0=500, level=8, grid=4096)
    assert out["seeds"] == 64
    assert out["se_combined"] > 0.0
    assert abs(out["mean_lhs"] - out["mean_rhs"]) <= 6.0 * out["se_combined"]
