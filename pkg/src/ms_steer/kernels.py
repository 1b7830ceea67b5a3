"""Hot numeric kernels.

Every kernel exists twice: a loop version compiled with ``numba.njit`` and a
vectorised pure-numpy version.  The public names point at the numba variants
unless numba is missing or ``MS_STEER_PURE_NUMPY=1`` is set in the
environment when this module is first imported.  Both variants are always
importable under ``*_numba`` / ``*_numpy`` so they can be compared.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("MS_STEER_PURE_NUMPY", "0").lower() not in ("1", "true", "yes")

# coincident-centre tolerance (Angstrom) for the SASA tie rule
_COINCIDENT = 1e-8


def _jit(fn):
    if HAVE_NUMBA:
        return njit(cache=True, nogil=True)(fn)
    return fn


# ---------------------------------------------------------------------------
# flat-bottom pair restraints
# ---------------------------------------------------------------------------

def pair_flat_bottom_numpy(x, ii, jj, dmin, dmax):
    """Per-pair ``max(0, d-dmax)^2 + max(0, dmin-d)^2`` and its gradient."""
    diff = x[ii] - x[jj]
    d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    over = np.maximum(0.0, d - dmax)
    under = np.maximum(0.0, dmin - d)
    energy = over * over + under * under
    dE_dd = 2.0 * over - 2.0 * under
    safe = np.where(d > 0.0, d, 1.0)
    g = (dE_dd / safe)[:, None] * diff
    g[d == 0.0] = 0.0
    grad = np.zeros_like(x)
    np.add.at(grad, ii, g)
    np.add.at(grad, jj, -g)
    return energy, grad


@_jit
def pair_flat_bottom_numba(x, ii, jj, dmin, dmax):
    n = ii.shape[0]
    energy = np.zeros(n)
    grad = np.zeros_like(x)
    for p in range(n):
        a = ii[p]
        b = jj[p]
        dx = x[a, 0] - x[b, 0]
        dy = x[a, 1] - x[b, 1]
        dz = x[a, 2] - x[b, 2]
        d = np.sqrt(dx * dx + dy * dy + dz * dz)
        over = d - dmax[p]
        if over < 0.0:
            over = 0.0
        under = dmin[p] - d
        if under < 0.0:
            under = 0.0
        energy[p] = over * over + under * under
        if d > 0.0:
            s = (2.0 * over - 2.0 * under) / d
            grad[a, 0] += s * dx
            grad[a, 1] += s * dy
            grad[a, 2] += s * dz
            grad[b, 0] -= s * dx
            grad[b, 1] -= s * dy
            grad[b, 2] -= s * dz
    return energy, grad


# ---------------------------------------------------------------------------
# soft-minimum contact restraint (one subject against a partner set)
# ---------------------------------------------------------------------------

def softmin_contact_numpy(x, subj, ptr, partners, dmax, beta):
    """Energy ``max(0, softmin_j d(subj, j) - dmax)^2`` per subject.

    ``partners[ptr[c]:ptr[c+1]]`` lists the partner atoms of subject ``c``.
    Returns (energy, gradient, softmin distance) per subject.
    """
    n = subj.shape[0]
    energy = np.zeros(n)
    smin = np.zeros(n)
    grad = np.zeros_like(x)
    for c in range(n):
        js = partners[ptr[c]:ptr[c + 1]]
        diff = x[subj[c]] - x[js]
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        z = -beta * d
        zmax = z.max()
        w = np.exp(z - zmax)
        tot = w.sum()
        m = -(zmax + np.log(tot)) / beta
        w /= tot
        smin[c] = m
        v = m - dmax[c]
        if v <= 0.0:
            continue
        energy[c] = v * v
        safe = np.where(d > 0.0, d, 1.0)
        coef = np.where(d > 0.0, 2.0 * v * w / safe, 0.0)
        g = coef[:, None] * diff
        grad[subj[c]] += g.sum(axis=0)
        np.add.at(grad, js, -g)
    return energy, grad, smin


@_jit
def softmin_contact_numba(x, subj, ptr, partners, dmax, beta):
    n = subj.shape[0]
    energy = np.zeros(n)
    smin = np.zeros(n)
    grad = np.zeros_like(x)
    for c in range(n):
        i = subj[c]
        lo = ptr[c]
        hi = ptr[c + 1]
        m_p = hi - lo
        d = np.empty(m_p)
        zmax = -np.inf
        for q in range(m_p):
            j = partners[lo + q]
            dx = x[i, 0] - x[j, 0]
            dy = x[i, 1] - x[j, 1]
            dz = x[i, 2] - x[j, 2]
            d[q] = np.sqrt(dx * dx + dy * dy + dz * dz)
            if -beta * d[q] > zmax:
                zmax = -beta * d[q]
        tot = 0.0
        for q in range(m_p):
            tot += np.exp(-beta * d[q] - zmax)
        m = -(zmax + np.log(tot)) / beta
        smin[c] = m
        v = m - dmax[c]
        if v <= 0.0:
            continue
        energy[c] = v * v
        for q in range(m_p):
            if d[q] <= 0.0:
                continue
            j = partners[lo + q]
            w = np.exp(-beta * d[q] - zmax) / tot
            s = 2.0 * v * w / d[q]
            for k in range(3):
                g = s * (x[i, k] - x[j, k])
                grad[i, k] += g
                grad[j, k] -= g
    return energy, grad, smin


# ---------------------------------------------------------------------------
# Gaussian neighbour count -> pseudo-SASA -> quadratic protection loss
# ---------------------------------------------------------------------------

def burial_loss_numpy(x, subj, neigh, sigma, burial_ref, tau, k):
    """Per-subject loss ``k max(0, exp(-b/b_ref) - tau)^2`` with
    ``b = sum_j exp(-d^2 / 2 sigma^2)`` over ``neigh`` (subject excluded).

    Returns (loss, gradient, burial, pseudo_sasa) per subject.
    """
    diff = x[subj][:, None, :] - x[neigh][None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    w = np.exp(-d2 / (2.0 * sigma * sigma))
    w[subj[:, None] == neigh[None, :]] = 0.0
    burial = w.sum(axis=1)
    sasa = np.exp(-burial / burial_ref)
    excess = np.maximum(0.0, sasa - tau)
    loss = k * excess * excess
    # dL/db = 2k(S - tau) * (-S / b_ref); db/dx_subj = -sum_j w_j (x_subj - x_j) / sigma^2
    dL_db = -2.0 * k * excess * sasa / burial_ref
    coef = (dL_db[:, None] * w) * (-1.0 / (sigma * sigma))
    g = coef[:, :, None] * diff
    grad = np.zeros_like(x)
    np.add.at(grad, subj, g.sum(axis=1))
    np.add.at(grad, neigh, -g.sum(axis=0))
    return loss, grad, burial, sasa


@_jit
def burial_loss_numba(x, subj, neigh, sigma, burial_ref, tau, k):
    n = subj.shape[0]
    m = neigh.shape[0]
    loss = np.zeros(n)
    burial = np.zeros(n)
    sasa = np.zeros(n)
    grad = np.zeros_like(x)
    inv2s2 = 1.0 / (2.0 * sigma * sigma)
    w = np.empty(m)
    for c in range(n):
        i = subj[c]
        b = 0.0
        for q in range(m):
            j = neigh[q]
            if j == i:
                w[q] = 0.0
                continue
            dx = x[i, 0] - x[j, 0]
            dy = x[i, 1] - x[j, 1]
            dz = x[i, 2] - x[j, 2]
            w[q] = np.exp(-(dx * dx + dy * dy + dz * dz) * inv2s2)
            b += w[q]
        s = np.exp(-b / burial_ref)
        burial[c] = b
        sasa[c] = s
        excess = s - tau
        if excess <= 0.0:
            continue
        loss[c] = k * excess * excess
        dL_db = -2.0 * k * excess * s / burial_ref
        for q in range(m):
            if w[q] == 0.0:
                continue
            j = neigh[q]
            coef = -dL_db * w[q] / (sigma * sigma)
            for kk in range(3):
                g = coef * (x[i, kk] - x[j, kk])
                grad[i, kk] += g
                grad[j, kk] -= g
    return loss, grad, burial, sasa


# ---------------------------------------------------------------------------
# Shrake-Rupley
# ---------------------------------------------------------------------------

def fibonacci_sphere(n: int) -> np.ndarray:
    """Deterministic, near-uniform unit-sphere points (golden-angle spiral)."""
    k = np.arange(n, dtype=np.float64) + 0.5
    z = 1.0 - 2.0 * k / n
    r = np.sqrt(1.0 - z * z)
    phi = k * np.pi * (3.0 - np.sqrt(5.0))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def sasa_numpy(xyz, radii, points):
    """Per-atom accessible area; ``radii`` already include the probe."""
    n = xyz.shape[0]
    n_pts = points.shape[0]
    out = np.zeros(n)
    for i in range(n):
        diff = xyz - xyz[i]
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        near = d < radii + radii[i]
        near[i] = False
        coincident = d < _COINCIDENT
        # coincident spheres: the earlier (or strictly larger) atom owns the surface
        if np.any(coincident & near & ((np.arange(n) < i) & (radii >= radii[i]) | (radii > radii[i]))):
            continue
        near &= ~coincident
        if not near.any():
            out[i] = 4.0 * np.pi * radii[i] ** 2
            continue
        surf = xyz[i] + radii[i] * points
        nb = xyz[near]
        d2 = ((surf[:, None, :] - nb[None, :, :]) ** 2).sum(axis=2)
        buried = (d2 < (radii[near] ** 2)[None, :]).any(axis=1)
        out[i] = 4.0 * np.pi * radii[i] ** 2 * (n_pts - buried.sum()) / n_pts
    return out


@_jit
def sasa_numba(xyz, radii, points):
    n = xyz.shape[0]
    n_pts = points.shape[0]
    out = np.zeros(n)
    nb = np.empty(n, dtype=np.int64)
    for i in range(n):
        n_nb = 0
        skip = False
        for j in range(n):
            if j == i:
                continue
            dx = xyz[j, 0] - xyz[i, 0]
            dy = xyz[j, 1] - xyz[i, 1]
            dz = xyz[j, 2] - xyz[i, 2]
            d = np.sqrt(dx * dx + dy * dy + dz * dz)
            if d >= radii[i] + radii[j]:
                continue
            if d < 1e-8:
                if radii[j] > radii[i] or (j < i and radii[j] >= radii[i]):
                    skip = True
                    break
                continue
            nb[n_nb] = j
            n_nb += 1
        if skip:
            continue
        exposed = 0
        last = 0
        for p in range(n_pts):
            sx = xyz[i, 0] + radii[i] * points[p, 0]
            sy = xyz[i, 1] + radii[i] * points[p, 1]
            sz = xyz[i, 2] + radii[i] * points[p, 2]
            hit = False
            # start with the neighbour that buried the previous point
            for q in range(n_nb):
                jj = nb[(q + last) % n_nb]
                ex = sx - xyz[jj, 0]
                ey = sy - xyz[jj, 1]
                ez = sz - xyz[jj, 2]
                if ex * ex + ey * ey + ez * ez < radii[jj] * radii[jj]:
                    hit = True
                    last = (q + last) % n_nb
                    break
            if not hit:
                exposed += 1
        out[i] = 4.0 * np.pi * radii[i] * radii[i] * exposed / n_pts
    return out


if USE_NUMBA:
    pair_flat_bottom = pair_flat_bottom_numba
    softmin_contact = softmin_contact_numba
    burial_loss = burial_loss_numba
    sasa = sasa_numba
else:
    pair_flat_bottom = pair_flat_bottom_numpy
    softmin_contact = softmin_contact_numpy
    burial_loss = burial_loss_numpy
    sasa = sasa_numpy
