"""Hot inner loops, each with a numba and a pure-numpy implementation.

The public functions dispatch on ``backend`` ("numba" or "numpy"); ``None``
picks numba unless it is missing or disabled through the
``TENSORMMSB_DISABLE_NUMBA`` environment variable. The two paths agree to
rounding error, not bit for bit.
"""
import numpy as np

from ._accel import USE_NUMBA, HAVE_NUMBA, njit


def default_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def _resolve(backend):
    if backend is None:
        return default_backend()
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend


# ---------------------------------------------------------------- 3-star sums

def _threestar_numpy(a, b, c):
    return np.einsum("ip,iq,ir->pqr", a, b, c, optimize=True)


@njit
def _threestar_numba(a, b, c):
    n, k = a.shape
    out = np.zeros((k, k, k))
    for i in range(n):
        for p in range(k):
            ap = a[i, p]
            for q in range(k):
                apq = ap * b[i, q]
                for r in range(k):
                    out[p, q, r] += apq * c[i, r]
    return out


def threestar_accumulate(a, b, c, backend=None):
    """Sum over rows i of a[i] (x) b[i] (x) c[i], accumulated in row order."""
    a, b, c = (np.ascontiguousarray(x, dtype=np.float64) for x in (a, b, c))
    if _resolve(backend) == "numba":
        return _threestar_numba(a, b, c)
    return _threestar_numpy(a, b, c)


# ---------------------------------------------------- adaptive power iteration

def _power_numpy(T, thetas, lam, phi, xi, n_iter, tol):
    thetas = thetas.copy()
    L = thetas.shape[0]
    alive = np.ones(L, dtype=np.bool_)
    active = np.ones(L, dtype=np.bool_)
    steps = np.zeros(L, dtype=np.int64)
    for _ in range(n_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        th = thetas[idx]
        u = np.einsum("pqr,lq,lr->lp", T, th, th)
        if lam.size:
            d = th @ phi
            mask = np.abs(d * lam) > xi
            u -= (mask * lam * d * d) @ phi.T
        nrm = np.sqrt((u * u).sum(axis=1))
        ok = np.isfinite(nrm) & (nrm > 0)
        dead = idx[~ok]
        alive[dead] = False
        active[dead] = False
        idx, u, th, nrm = idx[ok], u[ok], th[ok], nrm[ok]
        u /= nrm[:, None]
        diff = np.sqrt(((u - th) ** 2).sum(axis=1))
        thetas[idx] = u
        steps[idx] += 1
        active[idx[diff < tol]] = False
    return thetas, alive, steps


@njit
def _power_numba(T, thetas, lam, phi, xi, n_iter, tol):
    L, k = thetas.shape
    m = lam.shape[0]
    out = thetas.copy()
    alive = np.ones(L, dtype=np.bool_)
    steps = np.zeros(L, dtype=np.int64)
    th = np.empty(k)
    u = np.empty(k)
    for l in range(L):
        for p in range(k):
            th[p] = out[l, p]
        for _ in range(n_iter):
            for p in range(k):
                s = 0.0
                for q in range(k):
                    tq = 0.0
                    for r in range(k):
                        tq += T[p, q, r] * th[r]
                    s += tq * th[q]
                u[p] = s
            for j in range(m):
                d = 0.0
                for p in range(k):
                    d += th[p] * phi[p, j]
                if abs(lam[j] * d) > xi:
                    w = lam[j] * d * d
                    for p in range(k):
                        u[p] -= w * phi[p, j]
            nrm = 0.0
            for p in range(k):
                nrm += u[p] * u[p]
            nrm = np.sqrt(nrm)
            if not (nrm > 0.0) or not np.isfinite(nrm):
                alive[l] = False
                break
            diff = 0.0
            for p in range(k):
                u[p] /= nrm
                diff += (u[p] - th[p]) ** 2
                th[p] = u[p]
            steps[l] += 1
            if np.sqrt(diff) < tol:
                break
        for p in range(k):
            out[l, p] = th[p]
    return out, alive, steps


def power_iterate(T, thetas, lam, phi, xi, n_iter, tol=1e-13, backend=None):
    """Run adaptive-deflation power iterations for a batch of unit starting rows.

    At every step the previously found pairs (lam[j], phi[:, j]) with
    |lam[j] <theta, phi_j>| > xi are subtracted from T before applying
    theta <- T(I, theta, theta) / ||T(I, theta, theta)||.

    Returns (thetas, alive, steps); ``alive`` is False for trajectories that
    hit a zero or non-finite update.
    """
    T = np.ascontiguousarray(T, dtype=np.float64)
    thetas = np.ascontiguousarray(np.atleast_2d(thetas), dtype=np.float64)
    lam = np.ascontiguousarray(lam, dtype=np.float64).reshape(-1)
    k = T.shape[0]
    phi = np.ascontiguousarray(phi, dtype=np.float64).reshape(k, lam.size)
    if _resolve(backend) == "numba":
        return _power_numba(T, thetas, lam, phi, float(xi), int(n_iter), float(tol))
    return _power_numpy(T, thetas, lam, phi, float(xi), int(n_iter), float(tol))


def deflated_values(T, thetas, lam, phi, xi):
    """T~(theta, theta, theta) for each row, with the same adaptive deflation rule."""
    thetas = np.atleast_2d(thetas)
    val = np.einsum("pqr,lp,lq,lr->l", T, thetas, thetas, thetas)
    lam = np.asarray(lam, dtype=np.float64).reshape(-1)
    if lam.size:
        d = thetas @ np.asarray(phi).reshape(T.shape[0], lam.size)
        mask = np.abs(d * lam) > xi
        val -= (mask * lam * d**3).sum(axis=1)
    return val
