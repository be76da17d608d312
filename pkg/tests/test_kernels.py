import os
import subprocess
import sys

import numpy as np
import pytest

from cmspde import kernels
from cmspde._accel import HAVE_NUMBA
from cmspde.stochastic_core import ensemble_increments

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def _both(name, *args):
    return kernels.run(name, *args, backend="numba"), kernels.run(name, *args, backend="numpy")


@needs_numba
def test_quad_backends_agree():
    dW = ensemble_increments(1, range(4), 2000, 0.005)[:, :, 0]
    (r1, b1), (r2, b2) = _both("quad", dW, 0.005, 3.0, 8.0, 200, 300)
    np.testing.assert_allclose(r1, r2, rtol=1e-12, atol=1e-15)
    assert np.array_equal(b1, b2)


@needs_numba
@pytest.mark.parametrize("variant", [kernels.NAIVE, kernels.NORMAL_FORM])
def test_strong_backends_agree(variant):
    dW = ensemble_increments(2, range(4), 1000, 0.01)[:, :, 0]
    a0, z0 = np.full(4, 0.3), np.zeros((4, 7))
    (r1, b1), (r2, b2) = _both("strong", a0, z0, dW, 0.01, -0.03, 1.5, variant, 10)
    np.testing.assert_allclose(r1, r2, rtol=1e-11, atol=1e-15)
    assert np.array_equal(b1, b2)


@needs_numba
def test_weak_backends_agree():
    dW = ensemble_increments(3, range(4), 500, 0.1, 2)
    coefs = np.array([0.3, 0.05])
    (r1, b1), (r2, b2) = _both("weak", np.full(4, 0.5), dW, 0.1, -0.01, coefs, 5)
    np.testing.assert_allclose(r1, r2, rtol=1e-12)
    assert np.array_equal(b1, b2)


@needs_numba
def test_spde_backends_agree():
    n = 15
    x = np.pi / 16 * np.arange(1, n + 1)
    u0 = np.tile(0.5 * np.sin(x), (3, 1))
    dW = ensemble_increments(4, range(3), 400, 0.01)
    forcing = np.sin(2 * x)[None]
    (r1, b1), (r2, b2) = _both("spde", u0, dW, 0.01, np.pi / 16, -0.03, 1.0, forcing, 1.0, 20)
    np.testing.assert_allclose(r1, r2, rtol=1e-11, atol=1e-14)
    assert np.array_equal(b1, b2)


@pytest.mark.parametrize("backend", ["numpy"] + (["numba"] if HAVE_NUMBA else []))
def test_blowup_marks_only_offending_member(backend):
    dW = np.zeros((3, 40))
    a0 = np.array([0.3, 1e5, 0.2])
    rec, blow = kernels.run("weak", a0, dW[:, :, None], 1.0, 0.0, np.array([0.0]), 1,
                            backend=backend)
    assert blow[0] == -1 and blow[2] == -1 and blow[1] >= 0
    assert np.all(np.isnan(rec[1, blow[1]:]))
    assert np.all(np.isfinite(rec[[0, 2]]))


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.run("weak", np.zeros(1), np.zeros((1, 1, 1)), 1.0, 0.0, np.zeros(1), 1,
                    backend="fortran")


@pytest.mark.parametrize("flag, expected", [("0", "numpy"), ("off", "numpy")]
                         + ([("1", "numba")] if HAVE_NUMBA else []))
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, CMSPDE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c",
                          "from cmspde import default_backend; print(default_backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected


def test_rhs_numpy_zero_boundary():
    u = np.array([1.0, 2.0, 3.0])
    rhs = kernels.spde_rhs_numpy(u, 1.0, 0.0, 0.0)
    np.testing.assert_allclose(rhs, u + np.array([0 - 2 + 2, 1 - 4 + 3, 2 - 6 + 0]))
