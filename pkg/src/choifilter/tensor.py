"""Dense real tensor algebra: contraction, truncated SVD and a Lanczos solver.

Tensors are plain ``numpy.ndarray`` objects of dtype float64 in C (row-major)
order. Axis conventions are positional and documented at each call site.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DimensionError, InputError


@dataclass(frozen=True)
class SvdResult:
    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray
    discarded_weight: float

    @property
    def rank(self) -> int:
        return len(self.singular_values)


def as_tensor(data, dims: Sequence[int] | None = None) -> np.ndarray:
    """Copy ``data`` into a float64 C-ordered array, optionally reshaped."""
    arr = np.array(data, dtype=np.float64, order="C")
    if dims is not None:
        if int(np.prod(dims)) != arr.size:
            raise DimensionError(f"cannot view {arr.size} scalars as {tuple(dims)}")
        arr = arr.reshape(tuple(dims))
    return arr


def contract(a: np.ndarray, b: np.ndarray, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Sum over paired axes ``(axis_of_a, axis_of_b)``.

    Result axes are the free axes of ``a`` followed by the free axes of ``b``,
    each in their original order.
    """
    axes_a = [p[0] for p in pairs]
    axes_b = [p[1] for p in pairs]
    for i, j in pairs:
        if a.shape[i] != b.shape[j]:
            raise DimensionError(
                f"axis {i} of a has extent {a.shape[i]} but axis {j} of b has {b.shape[j]}"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def _svd(m: np.ndarray):
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge on ill-conditioned input
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


def svd_truncate(m: np.ndarray, max_rank: int | None = None, cutoff: float = 0.0) -> SvdResult:
    """Truncated SVD of a matrix, ``m ~= left @ diag(s) @ right``.

    Keeps at most ``max_rank`` values and drops every value below
    ``cutoff * s[0]``. At least one value is always kept.
    """
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {m.shape}")
    if max_rank is not None and max_rank < 1:
        raise InputError("max_rank must be >= 1")
    if cutoff < 0:
        raise InputError("cutoff must be >= 0")
    u, s, vt = _svd(m)
    keep = len(s)
    if max_rank is not None:
        keep = min(keep, max_rank)
    if cutoff > 0 and len(s) and s[0] > 0:
        keep = min(keep, int(np.count_nonzero(s >= cutoff * s[0])))
    keep = max(keep, 1)
    discarded = float(np.sum(s[keep:] ** 2))
    return SvdResult(
        np.ascontiguousarray(u[:, :keep]),
        s[:keep].copy(),
        np.ascontiguousarray(vt[:keep, :]),
        discarded,
    )


def _fix_sign(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def lanczos_ground(
    apply: Callable[[np.ndarray], np.ndarray],
    dim: int,
    tol: float = 1e-10,
    max_iter: int = 500,
    v0: np.ndarray | None = None,
    krylov_dim: int = 40,
    seed: int = 0,
) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of a real symmetric operator given as a matvec.

    Restarted Lanczos with full reorthogonalisation. Convergence means
    ``||A v - E v|| <= tol * scale`` where ``scale`` is the largest Ritz value
    magnitude seen (at least 1). ``max_iter`` bounds the number of matvecs.
    The returned vector has unit norm and its largest component positive.
    """
    if dim < 1:
        raise InputError("dim must be >= 1")
    if v0 is None:
        v = np.random.default_rng(seed).standard_normal(dim)
    else:
        v = np.asarray(v0, dtype=np.float64).reshape(dim).copy()
        if not np.any(v):
            v = np.random.default_rng(seed).standard_normal(dim)
    v /= np.linalg.norm(v)
    m_max = max(1, min(krylov_dim, dim))
    n_matvec = 0
    scale = 1.0
    best = (np.inf, None, np.inf)  # (residual, vector, energy)

    while True:
        basis = np.empty((m_max, dim))
        alphas: list[float] = []
        betas: list[float] = []
        basis[0] = v
        w_last = None
        for k in range(m_max):
            w = apply(basis[k])
            n_matvec += 1
            a = float(np.dot(basis[k], w))
            alphas.append(a)
            w = w - basis[: k + 1].T @ (basis[: k + 1] @ w)
            w = w - basis[: k + 1].T @ (basis[: k + 1] @ w)
            b = float(np.linalg.norm(w))
            w_last = w
            if k + 1 == m_max or n_matvec >= max_iter:
                break
            if b <= 1e-13 * max(scale, abs(a)):
                break
            betas.append(b)
            basis[k + 1] = w / b
        m = len(alphas)
        if m == 1:
            theta, y = np.array([alphas[0]]), np.ones((1, 1))
        else:
            theta, y = scipy.linalg.eigh_tridiagonal(np.array(alphas), np.array(betas[: m - 1]))
        scale = max(scale, float(np.max(np.abs(theta))))
        energy = float(theta[0])
        vec = basis[:m].T @ y[:, 0]
        vec /= np.linalg.norm(vec)
        residual_est = abs(float(np.linalg.norm(w_last)) * y[m - 1, 0])
        if residual_est < best[0]:
            best = (residual_est, vec, energy)
        if residual_est <= tol * scale:
            # the recurrence estimate drifts after reorthogonalisation; confirm explicitly
            r = apply(vec) - energy * vec
            n_matvec += 1
            res = float(np.linalg.norm(r))
            if res <= tol * scale:
                return energy, _fix_sign(vec)
            best = (res, vec, energy)
        if n_matvec >= max_iter:
            raise ConvergenceError(
                f"Lanczos not converged after {n_matvec} matvecs (residual {best[0]:.3e})",
                residual=best[0],
                energy=best[2],
                vector=_fix_sign(best[1]),
            )
        v = vec
