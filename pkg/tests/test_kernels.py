import math
import os
import subprocess
import sys

import numpy as np
import pytest

from cimsde import _pykernels, kernels
from cimsde.ising import ring_antiferromagnet

needs_ext = pytest.mark.skipif("compiled" not in kernels.available(), reason="extension not built")


def _exact_args(n=4, m=40, steps=300, seed=0):
    rng = np.random.default_rng(seed)
    return [
        np.zeros((n, m), complex), np.zeros((n, m), complex), np.full((n, m), 1.0 / m),
        np.ascontiguousarray(ring_antiferromagnet(n).coupling_matrix), np.linspace(0.5, 1.5, steps),
        rng.standard_normal((steps, n, m)), rng.standard_normal((steps, n, m)),
        rng.standard_normal((steps, n)), rng.random((steps, n)),
        0.05, 2.0, 0.3, 0.01, 0.5, 100.0,
    ]


@needs_ext
def test_exact_kernels_agree():
    comp = kernels.get("compiled")
    a, b = _exact_args(), _exact_args()
    ta, tb = np.zeros((300, 4, kernels.NCOL)), np.zeros((300, 4, kernels.NCOL))
    ra = comp.exact_block(*a, ta)
    rb = _pykernels.exact_block(*b, tb)
    assert ra == rb and ra[1] > 0  # resampling exercised
    for x, y in zip(a[:3], b[:3]):
        assert np.allclose(x, y, rtol=1e-10, atol=1e-13)
    assert np.allclose(ta, tb, rtol=1e-9, atol=1e-11)


@needs_ext
def test_gaussian_kernels_agree():
    comp = kernels.get("compiled")
    rng = np.random.default_rng(1)
    n, steps = 6, 2000
    J = np.ascontiguousarray(ring_antiferromagnet(n).coupling_matrix)
    eps = np.linspace(0, 120, steps)
    z = rng.standard_normal((steps, n))
    out = []
    for mod in (comp, _pykernels):
        mu, var = np.zeros(n), np.full(n, 0.25)
        tr = np.zeros((steps, n, kernels.NCOL))
        res = mod.gaussian_block(mu, var, J, eps, z, 1.0, 10.0, 0.1, 0.1, 0.3, 0.01, 1e-6, tr)
        out.append((res, mu, var, tr))
    assert out[0][0] == out[1][0]
    for x, y in zip(out[0][1:], out[1][1:]):
        assert np.allclose(x, y, rtol=1e-10, atol=1e-12)


@needs_ext
def test_divergence_status_agrees():
    args = _exact_args(steps=5)
    args[0] += 200.0
    for mod in (kernels.get("compiled"), _pykernels):
        a = [x.copy() if isinstance(x, np.ndarray) else x for x in args]
        done, _, status = mod.exact_block(*a, None)
        assert status == kernels.DIVERGED and done == 0


def test_selection_and_env_override():
    assert kernels.KERNEL in kernels.available()
    env = dict(os.environ, CIMSDE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from cimsde import kernels; print(kernels.KERNEL)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_kernel():
    with pytest.raises(Exception):
        kernels.get("fortran")


def test_systematic_indices():
    w = np.array([0.1, 0.2, 0.3, 0.4])
    idx = _pykernels.systematic_indices(w, 0.5)
    assert list(idx) == [1, 2, 3, 3]
    assert list(_pykernels.systematic_indices(np.array([0, 0, 1.0, 0]), 0.9)) == [2, 2, 2, 2]
