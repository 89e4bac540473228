"""Spectral primitives: truncated SVD, symmetric dilation, norms, alignment.

Two SVD routes are provided. Matrices whose smaller side is at most
``DENSE_CUTOFF`` go through a one-sided (Hestenes) Jacobi SVD with a
round-robin pair schedule; larger ones go through blocked subspace
iteration with Rayleigh-Ritz extraction.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import qr

from .types import NoConvergence, TruncatedSvd

DENSE_CUTOFF = 300
_EPS = np.finfo(float).eps


def _circle_shift(n):
    """Slot permutation for one round of the circle method (n even).

    Pairs are (slot i, slot n/2 + i); slot 0 stays fixed and every other
    player moves one place around the circle.
    """
    h = n // 2
    top = np.arange(h)
    bot = np.arange(h, n)
    new_top = np.concatenate([[top[0]], [bot[0]], top[1:h - 1]]) if h > 1 else top
    new_bot = np.concatenate([bot[1:], [top[h - 1]]]) if h > 1 else bot
    return np.concatenate([new_top, new_bot])


def _apply_shift(src, dst, h):
    """dst = src[_circle_shift(2h)] using contiguous slice copies."""
    nn = 2 * h
    dst[0] = src[0]
    if h == 1:
        dst[1] = src[1]
        return
    dst[1] = src[h]
    dst[2:h] = src[1:h - 1]
    dst[h:nn - 1] = src[h + 1:]
    dst[nn - 1] = src[h - 1]


def _orthonormal_complete(u, good):
    """Replace the columns of ``u`` not flagged ``good`` by an orthonormal completion."""
    m, n = u.shape
    bad = np.flatnonzero(~good)
    if bad.size == 0:
        return u
    basis = u[:, good]
    out = u.copy()
    filled = 0
    # deterministic candidates: standard basis vectors
    for j in range(m):
        if filled == bad.size:
            break
        v = np.zeros(m)
        v[j] = 1.0
        if basis.shape[1]:
            v = v - basis @ (basis.T @ v)
            v = v - basis @ (basis.T @ v)
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            v = v / nv
            out[:, bad[filled]] = v
            basis = np.column_stack([basis, v])
            filled += 1
    return out


def _jacobi_rows(w, tol, max_sweeps):
    """Orthogonalize the rows of square ``w`` by plane rotations.

    Returns the rotated rows and the accumulated orthogonal factor ``vt``
    (rows of vt transform like rows of w), both in original row order.
    """
    n = w.shape[0]
    nn = n + (n % 2)
    h = nn // 2
    # rotate [w | vt] together so each round is one fused update
    cur = np.zeros((nn, n + nn))
    cur[:n, :n] = w
    cur[:, n:] = np.eye(nn)
    nxt = np.empty_like(cur)
    tmp = np.empty((h, n + nn))
    slot = np.arange(nn)
    shift = _circle_shift(nn)
    for _ in range(max_sweeps):
        off = 0.0
        sq = np.einsum("ij,ij->i", cur[:, :n], cur[:, :n])
        # rows at rounding level are numerically zero; rotating them never settles
        floor = (n * _EPS) ** 2 * float(sq.max())
        for _ in range(nn - 1):
            top, bot = cur[:h], cur[h:]
            alpha, beta = sq[:h], sq[h:]
            gamma = np.einsum("ij,ij->i", top[:, :n], bot[:, :n])
            denom = np.sqrt(alpha * beta)
            act = (alpha > floor) & (beta > floor)
            rel = np.zeros(h)
            rel[act] = np.abs(gamma[act]) / denom[act]
            off = max(off, float(rel.max()))
            act &= rel > tol
            if np.any(act):
                zeta = np.zeros(h)
                zeta[act] = (beta[act] - alpha[act]) / (2.0 * gamma[act])
                t = np.sign(zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                t[act & (zeta == 0)] = 1.0
                t[~act] = 0.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = (c * t)[:, None]
                c = c[:, None]
                np.multiply(top, c, out=tmp)
                tmp -= s * bot
                bot *= c
                bot += s * top
                top[...] = tmp
                tg = t * gamma
                sq = np.concatenate([alpha - tg, beta + tg])
            _apply_shift(cur, nxt, h)
            cur, nxt = nxt, cur
            sq = sq[shift]
            slot = slot[shift]
        if off <= tol:
            break
    else:
        raise NoConvergence(max_sweeps, "Jacobi SVD did not converge")
    inv = np.argsort(slot)
    cur = cur[inv]
    return cur[:n, :n], cur[:n, n:n + n]


def jacobi_svd(a, tol=None, max_sweeps=60):
    """Thin SVD by one-sided Jacobi rotations.

    Returns (u, s, v) with ``a = u @ diag(s) @ v.T``, s nonincreasing,
    u of shape (m, r), v of shape (n, r), r = min(m, n).
    """
    a = np.asarray(a, dtype=float)
    m, n = a.shape
    if m < n:
        v, s, u = jacobi_svd(a.T, tol=tol, max_sweeps=max_sweeps)
        return u, s, v
    if n == 0:
        return np.zeros((m, 0)), np.zeros(0), np.zeros((0, 0))
    if tol is None:
        tol = n * _EPS
    # Pivoted QR preconditioning, then rotate the rows of R:
    # a[:, piv] = Q R and R = Vr S Ur^T once the rows of Vr^T R are orthogonal.
    q, r, piv = qr(a, mode="economic", pivoting=True)
    w, vt = _jacobi_rows(r.copy(), tol, max_sweeps)
    sig = np.linalg.norm(w, axis=1)
    order = np.lexsort((np.arange(n), -sig))
    sig = sig[order]
    w = w[order]
    vt = vt[order]
    scale = sig[0] if sig[0] > 0 else 1.0
    good = sig > scale * n * _EPS
    right = np.zeros((n, n))
    right[:, good] = (w[good] / sig[good, None]).T
    right = _orthonormal_complete(right, good)
    sig = np.where(good, sig, 0.0)
    v = np.empty_like(right)
    v[piv] = right
    u = q @ vt.T
    return u, sig, v


def _orth(x):
    q, _ = np.linalg.qr(x)
    return q


def _subspace_iteration(a, k, tol, max_iter, oversample, seed):
    """Block power iteration with a Jacobi Rayleigh-Ritz step.

    Stops once the top-k singular values move by less than ``tol`` (relative)
    and the residuals ||a.T u_i - s_i v_i|| are below 100 * tol * s_1. The
    values alone converge about twice as fast as the vectors, so the residual
    test is what makes the subspaces accurate.
    """
    n1, n2 = a.shape
    b = min(k + oversample, n1, n2)
    rng = np.random.Generator(np.random.Philox(key=seed))
    qv = _orth(rng.standard_normal((n2, b)))
    prev = None
    for it in range(1, max_iter + 1):
        u, s, w = jacobi_svd(a @ qv)
        vv = qv @ w
        z = a.T @ u
        top = s[:k]
        scale = max(top[0], np.finfo(float).tiny)
        if prev is not None:
            change = np.max(np.abs(top - prev)) / scale
            resid = np.linalg.norm(z[:, :k] - vv[:, :k] * top, axis=0).max() / scale
            if change < tol and resid < 100 * tol:
                return u[:, :k], top, vv[:, :k], it
        prev = top
        qv = _orth(z)
    raise NoConvergence(max_iter, "subspace iteration did not converge")


def truncated_svd(a, k, tol=1e-10, max_iter=500, seed=0, oversample=4, method=None):
    """Top-k singular triplets of ``a``.

    ``method`` is "jacobi", "subspace" or None (pick by size).
    """
    a = np.asarray(a, dtype=float)
    n1, n2 = a.shape
    if not 1 <= k <= min(n1, n2):
        raise ValueError(f"k={k} must lie in [1, {min(n1, n2)}]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method is None:
        method = "jacobi" if min(n1, n2) <= DENSE_CUTOFF else "subspace"
    if method == "jacobi":
        u, s, v = jacobi_svd(a)
        return TruncatedSvd(u[:, :k], s[:k], v[:, :k], iterations=0, method="jacobi")
    if method != "subspace":
        raise ValueError(f"unknown method {method!r}")
    u, s, v, it = _subspace_iteration(a, k, tol, max_iter, oversample, seed)
    return TruncatedSvd(u, s, v, iterations=it, method="subspace")


def rank_k_approximation(a, k, **kwargs):
    """Best rank-k approximation T_k(a) and the underlying TruncatedSvd."""
    svd = truncated_svd(a, k, **kwargs)
    return svd.reconstruct(), svd


def singular_values(a):
    """All singular values, nonincreasing (Jacobi route)."""
    return jacobi_svd(a)[1]


class DilatedMatrix:
    """Symmetric dilation [[0, a], [a.T, 0]] held as an operator."""

    def __init__(self, block):
        self.block = np.asarray(block, dtype=float)

    @property
    def size(self):
        n1, n2 = self.block.shape
        return n1 + n2

    @property
    def shape(self):
        return (self.size, self.size)

    def matvec(self, x):
        n1 = self.block.shape[0]
        x = np.asarray(x, dtype=float)
        top = self.block @ x[n1:]
        bottom = self.block.T @ x[:n1]
        return np.concatenate([top, bottom])

    def __matmul__(self, x):
        return self.matvec(x)

    def __add__(self, other):
        return DilatedMatrix(self.block + other.block)

    def __sub__(self, other):
        return DilatedMatrix(self.block - other.block)

    def to_dense(self):
        n1, n2 = self.block.shape
        out = np.zeros((n1 + n2, n1 + n2))
        out[:n1, n1:] = self.block
        out[n1:, :n1] = self.block.T
        return out

    def eigenvalues(self):
        """Spectrum {+sigma_i} U {-sigma_i} U {0}, sorted nonincreasing."""
        s = singular_values(self.block)
        zeros = np.zeros(self.size - 2 * s.size)
        return np.sort(np.concatenate([s, -s, zeros]))[::-1]

    def eigenvectors(self, k=None):
        """W = [[U, U], [V, -V]] / sqrt(2) for the top-k singular triplets."""
        u, s, v = jacobi_svd(self.block)
        if k is not None:
            u, s, v = u[:, :k], s[:k], v[:, :k]
        w = np.block([[u, u], [v, -v]]) / np.sqrt(2.0)
        return np.concatenate([s, -s]), w

    def operator_norm(self):
        s = singular_values(self.block)
        return float(s[0]) if s.size else 0.0

    def frobenius_norm(self):
        return float(np.sqrt(2.0) * np.linalg.norm(self.block))


def dilate(a):
    return DilatedMatrix(a)


def operator_norm(a, tol=1e-10, max_iter=20000, seed=0):
    """Largest singular value by power iteration on a.T a from a random start."""
    a = np.asarray(a, dtype=float)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if a.size == 0 or not np.any(a):
        return 0.0
    rng = np.random.Generator(np.random.Philox(key=seed))
    x = rng.standard_normal(a.shape[1])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(max_iter):
        y = a @ x
        z = a.T @ y
        nz = np.linalg.norm(z)
        if nz == 0:
            return 0.0
        new = np.linalg.norm(y)
        x = z / nz
        if est > 0 and abs(new - est) <= tol * new:
            return float(new)
        est = new
    raise NoConvergence(max_iter, "power iteration did not converge")


def spectral_norm(a):
    """Largest singular value through the SVD route (accurate, no tolerance)."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    return float(truncated_svd(a, 1).sigma[0])


def align_orthogonal(z_hat, z_ref):
    """Orthogonal Procrustes: Q minimizing ||z_hat - z_ref Q||_F, and the minimum."""
    z_hat = np.asarray(z_hat, dtype=float)
    z_ref = np.asarray(z_ref, dtype=float)
    if z_hat.shape != z_ref.shape:
        raise ValueError("shape mismatch")
    u, _, v = jacobi_svd(z_ref.T @ z_hat)
    q = u @ v.T
    err = float(np.linalg.norm(z_hat - z_ref @ q))
    return q, err


def projection(z):
    z = np.asarray(z, dtype=float)
    return z @ z.T


def subspace_sines(z1, z2):
    """Sines of the principal angles between the column spans of z1 and z2."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    resid = z2 - z1 @ (z1.T @ z2)
    return np.sort(np.linalg.svd(resid, compute_uv=False))[::-1]


def row_projection_via_dilation(a, k):
    """Projection onto the top-k left singular subspace, read off the dilation.

    The top 2k eigenvectors of the dilation (ordered by absolute eigenvalue)
    stack as [[U, U], [V, -V]] / sqrt(2) up to a rotation, so the upper
    block W1 satisfies W1 W1^T = U U^T for any orthonormal basis choice.
    """
    dense = DilatedMatrix(a).to_dense()
    # SVD of a symmetric matrix orders eigenpairs by absolute value
    w, _, _ = jacobi_svd(dense)
    n1 = np.asarray(a).shape[0]
    top = w[:n1, :2 * k]
    return top @ top.T


def row_projection_direct(a, k):
    u = truncated_svd(a, k).u
    return u @ u.T
