"""Correlators, susceptibilities, entanglement entropies and purity of filtered states."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import FitError, InputError
from .filtering import FilteredState
from .models import Z
from .mps import (MpsState, apply_local_ops, canonicalize, entropies, inner, overlap_ratio,
                  prefix_entropy)


class CorrelatorKind(str, Enum):
    RENYI2_ZZ = "renyi2_zz"  # <<rho|Z_iu Z_ju Z_il Z_jl|rho>> / <<rho|rho>>
    STRANGE_Z = "strange_z"  # <<1|Z_iu Z_ju|rho>> / <<1|rho>>
    UPPER_ZZ = "upper_zz"  # <<rho|Z_iu Z_ju|rho>> / <<rho|rho>>


@dataclass
class EntropyProfile:
    L: int
    points: list[tuple[int, float]]

    @property
    def x(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=float)

    @property
    def S(self) -> np.ndarray:
        return np.array([p[1] for p in self.points], dtype=float)


def identity_choi_state(L: int) -> MpsState:
    """``|1>> = prod_j (|up up> + |down down>)``, i.e. ``sum_k |k>|k>`` (so ``<<1|rho>> = Tr rho``)."""
    up = np.zeros((1, 2, 2))
    up[0, 0, 0] = up[0, 1, 1] = 1.0
    lo = np.zeros((2, 2, 1))
    lo[0, 0, 0] = lo[1, 1, 0] = 1.0
    return MpsState([up, lo] * L, center=None)


def _ops(kind: CorrelatorKind, i: int, j: int) -> dict[int, np.ndarray]:
    sites = [2 * i, 2 * j]
    if kind is CorrelatorKind.RENYI2_ZZ:
        sites += [2 * i + 1, 2 * j + 1]
    ops: dict[int, np.ndarray] = {}
    for s in sites:
        ops[s] = ops[s] @ Z if s in ops else Z
    return ops


def correlator(f: FilteredState, kind: CorrelatorKind | str, i: int, j: int) -> float:
    kind = CorrelatorKind(kind)
    L = f.L
    if not (0 <= i < L and 0 <= j < L):
        raise InputError(f"rungs ({i}, {j}) out of range for L={L}")
    ops = _ops(kind, i, j)
    rho = f.state
    if kind is CorrelatorKind.STRANGE_Z:
        one = identity_choi_state(L)
        return overlap_ratio(inner(apply_local_ops(one, ops), rho), inner(one, rho))
    return overlap_ratio(inner(rho, apply_local_ops(rho, ops)), inner(rho, rho))


def _transfer(env, a, op=None):
    t = np.tensordot(env, a, axes=(1, 0))  # (a', s, b)
    if op is not None:
        t = np.tensordot(op, t, axes=(1, 1)).transpose(1, 0, 2)
    return np.tensordot(a, t, axes=([0, 1], [0, 1]))  # (b', b)


def correlations_from_origin(f: FilteredState, kind: CorrelatorKind | str) -> np.ndarray:
    """``C(0, r)`` for ``r = 0 .. L/2`` in one pass over the chain."""
    kind = CorrelatorKind(kind)
    L = f.L
    rmax = L // 2
    if kind is CorrelatorKind.STRANGE_Z:
        one = identity_choi_state(L)
        den = inner(one, f.state)
        out = [1.0]
        for r in range(1, rmax + 1):
            out.append(overlap_ratio(inner(apply_local_ops(one, _ops(kind, 0, r)), f.state), den))
        return np.array(out)
    # right-canonical beyond the centre: closing a contraction is a trace
    s = canonicalize(f.state, 0)
    t = s.tensors
    lower_too = kind is CorrelatorKind.RENYI2_ZZ
    env = _transfer(np.ones((1, 1)), t[0], Z)
    env = _transfer(env, t[1], Z if lower_too else None)
    out = [1.0]
    for r in range(1, rmax + 1):
        e = _transfer(env, t[2 * r], Z)
        e = _transfer(e, t[2 * r + 1], Z if lower_too else None)
        out.append(float(np.trace(e)))
        if r < rmax:
            env = _transfer(_transfer(env, t[2 * r]), t[2 * r + 1])
    return np.array(out)


def susceptibility(f: FilteredState, kind: CorrelatorKind | str) -> float:
    """``(2/L) sum_{r=1}^{L/2} C(0, r)``."""
    L = f.L
    if L % 2:
        raise InputError("susceptibility needs an even number of rungs")
    c = correlations_from_origin(f, kind)
    return 2.0 / L * float(np.sum(c[1:]))


def mean_nn_renyi2(f: FilteredState) -> float:
    """``(1/L) sum_j C^II(j, j+1)`` over all periodic bonds."""
    L = f.L
    return float(np.mean([correlator(f, CorrelatorKind.RENYI2_ZZ, j, (j + 1) % L) for j in range(L)]))


def entropy_cut(f: FilteredState) -> float:
    """Entropy of rungs ``0..L/2-1`` plus the upper site of rung ``L/2`` (``L+1`` sites)."""
    if f.L % 2:
        raise InputError("the diagonal+vertical cut needs an even number of rungs")
    return prefix_entropy(f.state, f.L + 1)


def plaquette_entropy(f: FilteredState) -> float:
    """Entropy of the four sites of rungs 0 and 1."""
    return prefix_entropy(f.state, 4)


def entropy_profile(f: FilteredState) -> EntropyProfile:
    """Entropy of the first ``x`` whole rungs for ``x = 1..L-1``."""
    s = entropies(f.state)
    return EntropyProfile(f.L, [(x, s[2 * x - 1]) for x in range(1, f.L)])


def fit_ceff(p: EntropyProfile, x_min: int = 2, x_max: int | None = None) -> tuple[float, float, float]:
    """Fit ``S = (c_eff/3) ln(2L sin(pi x/L)) + B`` on ``x_min <= x <= x_max`` (default ``L-2``).

    Returns ``(c_eff, B, rms_residual)``.
    """
    if x_max is None:
        x_max = p.L - 2
    x, S = p.x, p.S
    sel = (x >= x_min) & (x <= x_max)
    x, S = x[sel], S[sel]
    if len(x) < 4:
        raise FitError(f"need at least 4 profile points in the window, have {len(x)}")
    u = np.log(2.0 * p.L * np.sin(np.pi * x / p.L)) / 3.0
    if np.ptp(u) < 1e-12:
        raise FitError("degenerate design: all abscissae coincide")
    A = np.column_stack([u, np.ones_like(u)])
    coef, *_ = np.linalg.lstsq(A, S, rcond=None)
    resid = S - A @ coef
    return float(coef[0]), float(coef[1]), float(math.sqrt(np.mean(resid ** 2)))


def purity_log(f: FilteredState) -> float:
    """``ln Tr[rho_D^2] = 2 (log_norm + ln C)``.

    Saturated channels are applied as the exact projector form of the channel,
    so the value stays exact there too (check ``f.channel.saturated``).
    """
    return 2.0 * f.log_norm


def measure(f: FilteredState, profile: bool = False) -> dict:
    """Everything recorded per sweep point."""
    out = {
        "chi_renyi2_zz": susceptibility(f, CorrelatorKind.RENYI2_ZZ),
        "chi_strange_z": susceptibility(f, CorrelatorKind.STRANGE_Z),
        "chi_upper_zz": susceptibility(f, CorrelatorKind.UPPER_ZZ),
        "S_A": entropy_cut(f),
        "purity_log": purity_log(f),
    }
    if profile:
        out["profile"] = entropy_profile(f)
    return out
