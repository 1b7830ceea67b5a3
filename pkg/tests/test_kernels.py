"""The numba and pure-numpy kernels must agree."""

import numpy as np
import pytest

from ms_steer import kernels

pytestmark = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


def close(a, b):
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def test_pair_flat_bottom(rng):
    x = rng.normal(scale=8, size=(40, 3))
    ii = rng.integers(0, 40, 25)
    jj = (ii + rng.integers(1, 39, 25)) % 40
    dmin = rng.uniform(0, 5, 25)
    dmax = np.where(rng.random(25) < 0.3, np.inf, dmin + rng.uniform(1, 10, 25))
    for a, b in zip(kernels.pair_flat_bottom_numpy(x, ii, jj, dmin, dmax),
                    kernels.pair_flat_bottom_numba(x, ii, jj, dmin, dmax)):
        close(a, b)


def test_softmin_contact(rng):
    x = rng.normal(scale=8, size=(30, 3))
    subj = np.array([0, 3, 7])
    partners = np.r_[np.arange(15, 30), np.arange(15, 22), np.arange(20, 30)]
    ptr = np.array([0, 15, 22, 32])
    dmax = np.array([4.0, 6.0, 8.0])
    for a, b in zip(kernels.softmin_contact_numpy(x, subj, ptr, partners, dmax, 2.0),
                    kernels.softmin_contact_numba(x, subj, ptr, partners, dmax, 2.0)):
        close(a, b)


def test_burial_loss(rng):
    x = rng.normal(scale=6, size=(30, 3))
    subj = np.array([1, 4, 29])
    neigh = np.arange(30)
    for a, b in zip(kernels.burial_loss_numpy(x, subj, neigh, 5.0, 5.0, 0.1, 20.0),
                    kernels.burial_loss_numba(x, subj, neigh, 5.0, 5.0, 0.1, 20.0)):
        close(a, b)


def test_sasa(rng):
    xyz = rng.normal(scale=4, size=(60, 3))
    xyz[5] = xyz[4]  # exercise the coincident-centre rule
    radii = rng.uniform(2.5, 3.3, 60)
    pts = kernels.fibonacci_sphere(300)
    close(kernels.sasa_numpy(xyz, radii, pts), kernels.sasa_numba(xyz, radii, pts))


def test_fibonacci_sphere_unit_norm():
    p = kernels.fibonacci_sphere(500)
    np.testing.assert_allclose(np.linalg.norm(p, axis=1), 1.0)
    assert np.abs(p.mean(axis=0)).max() < 1e-2


def test_env_flag_selects_numpy_kernels():
    import os
    import subprocess
    import sys

    code = "from ms_steer import kernels as k; print(k.USE_NUMBA, k.sasa is k.sasa_numpy)"
    env = {**os.environ, "MS_STEER_PURE_NUMPY": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "True"]
