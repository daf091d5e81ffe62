"""Hot numeric kernels with optional numba acceleration.

The bound-constrained contact solve is the innermost loop of every
control scenario (it runs once per loss evaluation inside the voltage
optimizer), so it is written as a single self-contained function that
numba can compile.  When numba is importable and the environment flag
``SOFTCRAWL_PURE_NUMPY`` is unset, the compiled version is used;
otherwise the identical source runs as plain Python/numpy.

``contact_active_set_py`` always refers to the interpreted version so
the two paths can be compared side by side (see benchmarks/).
"""

from __future__ import annotations

import math
import os

import numpy as np

PURE_NUMPY_ENV = "SOFTCRAWL_PURE_NUMPY"


def _numba_requested() -> bool:
    flag = os.environ.get(PURE_NUMPY_ENV, "").strip().lower()
    return flag not in {"1", "true", "yes", "on"}


if _numba_requested():
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a hard dependency
        njit = None
        _HAVE_NUMBA = False
else:
    njit = None
    _HAVE_NUMBA = False

NUMBA_ENABLED = _HAVE_NUMBA

# Solver status codes.
STATUS_OK = 0
STATUS_MAX_ITER = 1
STATUS_SINGULAR = 2


def _contact_active_set_impl(h0, h1, h2, f, max_iter, drop_tol, ridge_scale):
    """Minimize 0.5*y'Hy - f'y subject to y >= 0 for pentadiagonal H.

    H is symmetric positive semidefinite with main diagonal ``h0`` (n,),
    first off-diagonal ``h1`` (n-1,) and second off-diagonal ``h2``
    (n-2,).  Primal active-set iteration starting from the feasible
    point y = 0 with every bound in the working set; constraints are
    dropped by Murty's least-index rule, which also breaks ties when a
    blocking constraint is added.  Equality subproblems are solved with
    a banded Cholesky factorization of the free-free block (removing
    rows keeps the bandwidth <= 2).  A tiny ridge is added only when
    fewer than two bounds remain active, where the bending operator's
    affine null space would otherwise make the subproblem singular.

    The drop test compares multipliers against a threshold that scales
    with ``max(h0) * max|y|``: the multiplier of an active node is a sum
    of O(h0 * y) terms that cancel almost exactly near degeneracy, so a
    fixed tolerance far below that roundoff floor reads cancellation
    noise as a negative multiplier and cycles (drop, block at zero step,
    re-add).  ``drop_tol`` acts as a floor so the behavior at y = 0 is
    unchanged.

    Returns ``(y, lam, free, n_iter, status)`` where ``lam`` holds the
    constraint multipliers (zero on free nodes) and ``free`` marks nodes
    off the working set.
    """
    n = h0.shape[0]
    h0max = 0.0
    for i in range(n):
        if h0[i] > h0max:
            h0max = h0[i]
    y = np.zeros(n)
    lam = np.zeros(n)
    free = np.zeros(n, dtype=np.bool_)
    idx = np.empty(n, dtype=np.int64)
    bd0 = np.empty(n)
    bd1 = np.empty(n)
    bd2 = np.empty(n)
    l0 = np.empty(n)
    l1 = np.empty(n)
    l2 = np.empty(n)
    z = np.empty(n)
    ystar = np.empty(n)
    status = STATUS_MAX_ITER

    it = 0
    while it < max_iter:
        it += 1
        nf = 0
        for i in range(n):
            if free[i]:
                idx[nf] = i
                nf += 1

        moved = False
        if nf > 0:
            # Compressed pentadiagonal free-free block: removing rows
            # only shrinks index gaps, so entries further than the
            # original two-off-diagonal coupling are exact zeros.
            base_ridge = ridge_scale if (n - nf) < 2 else 0.0
            attempt = 0
            fail = True
            while attempt < 2 and fail:
                ridge = base_ridge if attempt == 0 else ridge_scale * 1e6
                for a in range(nf):
                    i = idx[a]
                    bd0[a] = h0[i] + ridge
                    if a + 1 < nf:
                        gap = idx[a + 1] - i
                        if gap == 1:
                            bd1[a] = h1[i]
                        elif gap == 2:
                            bd1[a] = h2[i]
                        else:
                            bd1[a] = 0.0
                    if a + 2 < nf:
                        bd2[a] = h2[i] if idx[a + 2] - i == 2 else 0.0
                fail = False
                for a in range(nf):
                    t = bd0[a]
                    if a >= 1:
                        t -= l1[a - 1] * l1[a - 1]
                    if a >= 2:
                        t -= l2[a - 2] * l2[a - 2]
                    if t <= 0.0:
                        fail = True
                        break
                    l0[a] = math.sqrt(t)
                    if a + 1 < nf:
                        b = bd1[a]
                        if a >= 1:
                            b -= l1[a - 1] * l2[a - 1]
                        l1[a] = b / l0[a]
                    if a + 2 < nf:
                        l2[a] = bd2[a] / l0[a]
                attempt += 1
            if fail:
                status = STATUS_SINGULAR
                break

            for a in range(nf):
                t = f[idx[a]]
                if a >= 1:
                    t -= l1[a - 1] * z[a - 1]
                if a >= 2:
                    t -= l2[a - 2] * z[a - 2]
                z[a] = t / l0[a]
            for a in range(nf - 1, -1, -1):
                t = z[a]
                if a + 1 < nf:
                    t -= l1[a] * ystar[a + 1]
                if a + 2 < nf:
                    t -= l2[a] * ystar[a + 2]
                ystar[a] = t / l0[a]

            pmax = 0.0
            for a in range(nf):
                d = abs(ystar[a] - y[idx[a]])
                if d > pmax:
                    pmax = d

            if pmax > 0.0:
                alpha = 1.0
                for a in range(nf):
                    if ystar[a] < 0.0:
                        i = idx[a]
                        r = y[i] / (y[i] - ystar[a])
                        if r < alpha:
                            alpha = r
                jblock = -1
                if alpha < 1.0:
                    tol_r = alpha + 1e-12
                    for a in range(nf):
                        if ystar[a] < 0.0:
                            i = idx[a]
                            r = y[i] / (y[i] - ystar[a])
                            if r <= tol_r:
                                jblock = i
                                break
                for a in range(nf):
                    i = idx[a]
                    y[i] += alpha * (ystar[a] - y[i])
                    if y[i] < 0.0:
                        y[i] = 0.0
                if jblock >= 0:
                    y[jblock] = 0.0
                    free[jblock] = False
                moved = True

        if not moved:
            # Stationary on the current working set: inspect multipliers
            # lam = (H y - f) on active nodes, drop the least index that
            # points into the feasible region.
            ymax = 0.0
            for i in range(n):
                if y[i] > ymax:
                    ymax = y[i]
            thr = drop_tol
            noise = 1e-10 * h0max * ymax
            if noise > thr:
                thr = noise
            jdrop = -1
            for i in range(n):
                if not free[i]:
                    t = h0[i] * y[i] - f[i]
                    if i >= 1:
                        t += h1[i - 1] * y[i - 1]
                    if i >= 2:
                        t += h2[i - 2] * y[i - 2]
                    if i + 1 < n:
                        t += h1[i] * y[i + 1]
                    if i + 2 < n:
                        t += h2[i] * y[i + 2]
                    lam[i] = t
                    if jdrop < 0 and t < -thr:
                        jdrop = i
            if jdrop < 0:
                status = STATUS_OK
                break
            free[jdrop] = True

    for i in range(n):
        if free[i]:
            lam[i] = 0.0
    return y, lam, free, it, status


contact_active_set_py = _contact_active_set_impl

if NUMBA_ENABLED:
    contact_active_set = njit(cache=True)(_contact_active_set_impl)
else:
    contact_active_set = _contact_active_set_impl
