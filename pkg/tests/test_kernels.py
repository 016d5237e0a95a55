import os
import subprocess
import sys

import numpy as np
import pytest

from vranpool import kernels
from vranpool.kernels import _pykernels

_ck = pytest.importorskip("vranpool.kernels._ckernels")


def random_inputs(rng, n_phys, n_vbs, k):
    masks = rng.integers(0, 2, (k, 2 * n_phys)).astype(np.uint8)
    masks[masks.sum(axis=1) == 0, 0] = 1
    eff = rng.uniform(0.0, 3.0, k)
    eff[0] = 0.0
    demand = rng.uniform(0, 10, (n_vbs, 2))
    link = rng.uniform(5, 40, (n_vbs, 2))
    return (masks, eff, demand, link, rng.standard_normal(2 * n_phys), 0.625, 0.05, 2.5, 1e-3,
            0.4, 0.2, 0.05, 0.6)


def test_evaluate_parity():
    rng = np.random.default_rng(0)
    for _ in range(300):
        inp = random_inputs(rng, int(rng.integers(1, 5)), int(rng.integers(1, 6)), int(rng.integers(1, 20)))
        for a, b in zip(_pykernels.evaluate_vectors(*inp), _ck.evaluate_vectors(*inp)):
            np.testing.assert_allclose(np.asarray(a, float), np.asarray(b, float), rtol=0, atol=1e-12)


def test_core_costs_parity():
    rng = np.random.default_rng(1)
    for _ in range(300):
        n = int(rng.integers(1, 6))
        u = rng.random(2 * n) * (rng.random(2 * n) < 0.5)
        np.testing.assert_allclose(_pykernels.core_costs(u, n, 0.4, 0.2, 0.05, 0.6),
                                   _ck.core_costs(u, n, 0.4, 0.2, 0.05, 0.6), rtol=0, atol=1e-12)


def test_default_backend_is_compiled():
    if os.environ.get("VRANPOOL_PURE_PYTHON", "") in ("", "0"):
        assert kernels.BACKEND == "cython"


def test_env_var_forces_fallback():
    code = "from vranpool import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True,
                         env={**os.environ, "VRANPOOL_PURE_PYTHON": "1"})
    assert out.stdout.strip() == "python"
