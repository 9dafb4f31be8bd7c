"""Exact-diagonalisation reference for small ladders.

Two pictures are kept side by side: the physical density matrix on ``L``
spins (``2^L x 2^L``) and its Choi vector on the ``2L``-site ladder, with
components ``v[k_u, m_l] = rho[m, k]`` laid out in the interleaved site order
of :mod:`choifilter.mps`. The Choi vector here is ``sum_k |k> (x) rho|k>``
without the ``1/sqrt(dim)`` factor, so ``<<rho|rho>> = Tr rho^2`` and
``<<1|rho>> = Tr rho`` for the unnormalised triplet product ``|1>>``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import InputError
from .models import ChannelSpec, ModelParams, SATURATED

MAX_SPINS = 20


def _zdiag(L: int, site: int) -> np.ndarray:
    """Diagonal of ``Z_site`` on ``L`` spins (site 0 most significant)."""
    bits = (np.arange(2 ** L) >> (L - 1 - site)) & 1
    return 1.0 - 2.0 * bits


def _flip_index(L: int, site: int) -> np.ndarray:
    return np.arange(2 ** L) ^ (1 << (L - 1 - site))


def tfim_chain_dense(J: float, h: float, L: int, periodic: bool = True) -> np.ndarray:
    dim = 2 ** L
    H = np.zeros((dim, dim))
    bonds = range(L) if periodic else range(L - 1)
    diag = np.zeros(dim)
    for j in bonds:
        diag -= J * _zdiag(L, j) * _zdiag(L, (j + 1) % L)
    H[np.diag_indices(dim)] = diag
    idx = np.arange(dim)
    for j in range(L):
        H[idx, _flip_index(L, j)] -= h
    return H


def ladder_dense(J: float, h: float, L: int, lambda_zz: float = 0.0, lambda_x: float = 0.0,
                 periodic: bool = True) -> np.ndarray:
    """Dense qAT ladder (doubled TFIM when both lambdas vanish) in interleaved site order."""
    n = 2 * L
    if n > 12:
        raise InputError("dense ladder Hamiltonian limited to 12 spins")
    dim = 2 ** n
    u = lambda j: 2 * j
    lo = lambda j: 2 * j + 1
    diag = np.zeros(dim)
    bonds = range(L) if periodic else range(L - 1)
    for j in bonds:
        k = (j + 1) % L
        zu = _zdiag(n, u(j)) * _zdiag(n, u(k))
        zl = _zdiag(n, lo(j)) * _zdiag(n, lo(k))
        diag -= J * (zu + zl + lambda_zz * zu * zl)
    H = np.diag(diag)
    idx = np.arange(dim)
    for j in range(L):
        H[idx, _flip_index(n, u(j))] -= h
        H[idx, _flip_index(n, lo(j))] -= h
        H[idx, _flip_index(n, u(j)) ^ (1 << (n - 1 - lo(j)))] -= h * lambda_x
    return H


def tfim_exact_energy(J: float, h: float, L: int, parity: int = 1) -> float:
    """Ground energy of the periodic chain ``-sum (J ZZ + h X)`` in the ``prod X = parity`` sector.

    Jordan-Wigner fermions with ``n_j = (1 - X_j)/2``; even fermion parity takes
    antiperiodic momenta, odd parity periodic momenta with the unpaired
    ``k = 0`` (and ``k = pi`` for even ``L``) modes treated explicitly.
    """
    if L < 2:
        raise InputError("L must be >= 2")
    if parity not in (1, -1):
        raise InputError("parity must be +1 or -1")

    def eps(k):
        return 2.0 * math.sqrt(J * J + h * h - 2.0 * J * h * math.cos(k))

    if parity == 1:
        ks = [math.pi * (2 * n + 1) / L for n in range(L)]
        return -0.5 * sum(eps(k) for k in ks)
    ks = [2.0 * math.pi * n / L for n in range(L)]
    paired = [k for k in ks if not (math.isclose(k, 0.0) or math.isclose(k, math.pi))]
    base = -0.5 * sum(eps(k) for k in paired)
    # unpaired modes: energy 2 (h - J cos k)(n_k - 1/2)
    unpaired = [2.0 * (h - J * math.cos(k)) for k in ks if k not in paired]
    gap = min((eps(k) for k in paired), default=math.inf)
    best = math.inf
    for occ in range(2 ** len(unpaired)):
        ns = [(occ >> i) & 1 for i in range(len(unpaired))]
        e = sum(w * (n - 0.5) for w, n in zip(unpaired, ns))
        if sum(ns) % 2 == 1:
            best = min(best, e)
        else:
            # odd total parity then needs one broken pair
            best = min(best, e + gap)
    return base + best


# ---------------------------------------------------------------------------
# states


def vectorize(rho: np.ndarray, L: int) -> np.ndarray:
    """Choi vector of ``rho`` in interleaved ladder order."""
    t = np.asarray(rho).reshape([2] * (2 * L))  # axes m_0..m_{L-1}, k_0..k_{L-1}
    order = []
    for j in range(L):
        order += [L + j, j]
    return t.transpose(order).reshape(-1).copy()


def devectorize(v: np.ndarray, L: int) -> np.ndarray:
    t = np.asarray(v).reshape([2] * (2 * L))  # axes k_0, m_0, k_1, m_1, ...
    order = [2 * j + 1 for j in range(L)] + [2 * j for j in range(L)]
    return t.transpose(order).reshape(2 ** L, 2 ** L).copy()


def interleave(psi_u: np.ndarray, psi_l: np.ndarray, L: int) -> np.ndarray:
    """Ladder vector of ``psi_u (x) psi_l`` with the legs interleaved."""
    return vectorize(np.outer(psi_l, psi_u), L)


@dataclass
class DenseState:
    L: int
    rho: np.ndarray  # physical picture
    choi: np.ndarray  # doubled picture
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_rho(cls, rho: np.ndarray, L: int, **meta) -> "DenseState":
        return cls(L, rho, vectorize(rho, L), dict(meta))


def _check_size(L: int):
    if 2 * L > MAX_SPINS:
        raise InputError(f"dense oracle limited to {MAX_SPINS} spins (L <= {MAX_SPINS // 2})")


def chain_ground_state(J: float, h: float, L: int, periodic: bool = True,
                       degeneracy_tol: float = 1e-8) -> tuple[float, np.ndarray]:
    """Lowest chain eigenpair; a degenerate pair is rotated into its ``prod X = +1`` member."""
    H = tfim_chain_dense(J, h, L, periodic)
    w, V = np.linalg.eigh(H)
    psi = V[:, 0]
    if L > 1 and w[1] - w[0] < degeneracy_tol:
        pair = V[:, :2]
        flipped = pair[::-1, :]  # prod X reverses the computational index
        m = pair.T @ flipped
        pw, pv = np.linalg.eigh(0.5 * (m + m.T))
        psi = pair @ pv[:, np.argmax(pw)]
    psi = psi / np.linalg.norm(psi)
    if psi.sum() < 0:
        psi = -psi
    return float(w[0]), psi


def ground_state_dense(p: ModelParams) -> DenseState:
    """Pure ``rho0 = |psi><psi|`` of the chain ground state; the Choi vector is ``psi (x) psi``."""
    _check_size(p.L)
    e, psi = chain_ground_state(p.J, p.h, p.L, p.periodic)
    rho = np.outer(psi, psi)
    return DenseState.from_rho(rho, p.L, energy=2.0 * e, chain_energy=e, psi=psi)


# ---------------------------------------------------------------------------
# channels


def _apply_zz_physical(rho, L, p, periodic=True):
    bonds = range(L) if periodic else range(L - 1)
    for j in bonds:
        z = _zdiag(L, j) * _zdiag(L, (j + 1) % L)
        rho = (1.0 - p) * rho + p * (z[:, None] * rho * z[None, :])
    return rho


def _apply_x_physical(rho, L, p):
    for j in range(L):
        f = _flip_index(L, j)
        rho = (1.0 - p) * rho + p * rho[np.ix_(f, f)]
    return rho


def apply_channel_physical(rho: np.ndarray, L: int, p_zz: float, p_x: float,
                           order: str = "x_then_zz", periodic: bool = True) -> np.ndarray:
    """Operator-sum form ``(1-p) rho + p K rho K`` for every bond / site."""
    if order == "x_then_zz":
        return _apply_zz_physical(_apply_x_physical(rho, L, p_x), L, p_zz, periodic)
    if order == "zz_then_x":
        return _apply_x_physical(_apply_zz_physical(rho, L, p_zz, periodic), L, p_x)
    raise InputError(f"unknown order {order!r}")


def apply_filters_doubled(v: np.ndarray, L: int, tau_zz: float, tau_x: float) -> np.ndarray:
    """Products of ``exp(tau h)`` filters on the Choi vector (projector when saturated), no prefactor."""
    n = 2 * L
    out = np.asarray(v, dtype=np.float64).copy()

    def coeffs(t):
        return (0.5, 0.5) if t == SATURATED else (math.cosh(t), math.sinh(t))

    a, b = coeffs(tau_x)
    for j in range(L):
        f = _flip_index(n, 2 * j) ^ (1 << (n - 2 - 2 * j))
        out = a * out + b * out[f]
    a, b = coeffs(tau_zz)
    for j in range(L):
        k = (j + 1) % L
        z = _zdiag(n, 2 * j) * _zdiag(n, 2 * j + 1) * _zdiag(n, 2 * k) * _zdiag(n, 2 * k + 1)
        out = a * out + b * z * out
    return out


def apply_channel_dense(s: DenseState, p_zz: float, p_x: float) -> DenseState:
    """Decohere both pictures independently.

    The physical matrix uses the operator-sum form; the Choi vector uses the
    filter gates times the analytic prefactor ``C(p_zz, p_x, L)``.
    """
    chan = ChannelSpec.from_probabilities(p_zz, p_x, s.L)
    rho = apply_channel_physical(s.rho, s.L, p_zz, p_x)
    choi = math.exp(chan.log_prefactor) * apply_filters_doubled(s.choi, s.L, chan.tau_zz, chan.tau_x)
    return DenseState(s.L, rho, choi, dict(s.meta, p_zz=p_zz, p_x=p_x))


# ---------------------------------------------------------------------------
# observables


def identity_choi_dense(L: int) -> np.ndarray:
    return vectorize(np.eye(2 ** L), L)


def prefix_entropy_dense(v: np.ndarray, n_sites: int) -> float:
    v = np.asarray(v, dtype=np.float64)
    m = v.reshape(2 ** n_sites, -1)
    sv = np.linalg.svd(m, compute_uv=False)
    p = sv ** 2 / np.sum(sv ** 2)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def subsystem_entropy_dense(v: np.ndarray, n_total: int, sites: Iterable[int]) -> float:
    """Entropy of an arbitrary site subset, by permuting it to the front."""
    sites = list(sites)
    rest = [k for k in range(n_total) if k not in sites]
    t = np.asarray(v).reshape([2] * n_total).transpose(sites + rest)
    return prefix_entropy_dense(t.reshape(-1), len(sites))


@dataclass
class DenseObservables:
    chi_renyi2_zz: float
    chi_strange_z: float
    chi_upper_zz: float
    entropy_cut: float
    entropy_profile: list[float]
    purity: float
    nn_renyi2_zz: float
    plaquette_entropy: float
    renyi2_zz: np.ndarray  # C^II(0, r), r = 0..L-1
    canonical_zz: np.ndarray  # Tr[rho Z_0 Z_r] / Tr rho
    upper_zz: np.ndarray


def renyi2_correlator_dense(rho: np.ndarray, L: int, i: int, j: int) -> float:
    z = _zdiag(L, i) * _zdiag(L, j)
    return float(np.sum(z[:, None] * z[None, :] * rho * rho) / np.sum(rho * rho))


def observables_dense(s: DenseState) -> DenseObservables:
    """All correlators from the physical matrix; entropies from its Choi vector."""
    L, rho = s.L, s.rho
    _check_size(L)
    tr = float(np.trace(rho))
    pur = float(np.sum(rho * rho))
    rho2_diag = np.einsum("ij,ji->i", rho, rho)
    z0 = _zdiag(L, 0)
    c2 = np.array([renyi2_correlator_dense(rho, L, 0, r) for r in range(L)])
    can = np.array([float(np.sum(z0 * _zdiag(L, r) * np.diag(rho)) / tr) for r in range(L)])
    up = np.array([float(np.sum(z0 * _zdiag(L, r) * rho2_diag) / pur) for r in range(L)])
    rs = range(1, L // 2 + 1)
    v = vectorize(rho, L)
    nn = float(np.mean([renyi2_correlator_dense(rho, L, j, (j + 1) % L) for j in range(L)]))
    return DenseObservables(
        chi_renyi2_zz=2.0 / L * float(sum(c2[r] for r in rs)),
        chi_strange_z=2.0 / L * float(sum(can[r] for r in rs)),
        chi_upper_zz=2.0 / L * float(sum(up[r] for r in rs)),
        entropy_cut=prefix_entropy_dense(v, L + 1),
        entropy_profile=[prefix_entropy_dense(v, 2 * x) for x in range(1, L)],
        purity=pur / tr ** 2,
        nn_renyi2_zz=nn,
        plaquette_entropy=prefix_entropy_dense(v, 4),
        renyi2_zz=c2,
        canonical_zz=can,
        upper_zz=up,
    )


# ---------------------------------------------------------------------------
# golden data

GOLDEN_COLUMNS = ["L", "J", "h", "p_zz", "p_x", "observable", "value"]


def golden_rows(L: int, J: float, h: float, grid: Iterable[float], mode: str = "zz_only",
                observables: Iterable[str] = ("nn_renyi2_zz", "plaquette_entropy")):
    """ED reference rows for the MPS validation harness."""
    from .models import map_px

    base = ground_state_dense(ModelParams(J=J, L=L, h=h))
    rows = []
    for p_zz in grid:
        p_x = 0.0 if mode == "zz_only" else map_px(p_zz, J, h)
        obs = observables_dense(apply_channel_dense(base, p_zz, p_x))
        for name in observables:
            rows.append({"L": L, "J": J, "h": h, "p_zz": float(p_zz), "p_x": float(p_x),
                         "observable": name, "value": float(getattr(obs, name))})
    return rows


def write_golden_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=GOLDEN_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in GOLDEN_COLUMNS})


def read_golden_csv(path) -> list[dict]:
    out = []
    with open(Path(path), newline="") as fh:
        for r in csv.DictReader(fh):
            out.append({"L": int(r["L"]), "J": float(r["J"]), "h": float(r["h"]),
                        "p_zz": float(r["p_zz"]), "p_x": float(r["p_x"]),
                        "observable": r["observable"], "value": float(r["value"])})
    return out
