"""Hamiltonians, filtering gates, projectors and decoherence parameter maps.

All operators live on the interleaved ladder of :mod:`choifilter.mps`
(upper leg of rung ``j`` at site ``2j``, lower leg at ``2j+1``). Periodic
couplings are carried through the open MPO chain by identity pass-through.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError
from .mps import LOWER, UPPER, Mpo, site_index

I2 = np.eye(2)
X = np.array([[0.0, 1.0], [1.0, 0.0]])
Z = np.array([[1.0, 0.0], [0.0, -1.0]])

SATURATED = math.inf  # gate angle standing for the p = 1/2 projector limit


@dataclass(frozen=True)
class ModelParams:
    J: float
    L: int
    h: float = 1.0
    periodic: bool = True

    def __post_init__(self):
        if not self.h > 0:
            raise InputError("h must be positive")
        if self.L < 2:
            raise InputError("need at least two rungs")


@dataclass(frozen=True)
class QatParams:
    J: float
    h: float
    lambda_zz: float
    lambda_x: float
    L: int
    periodic: bool = True


def _check_probability(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 0.5:
        raise InputError(f"probability {p} outside [0, 1/2]")
    return p


def tau_of_p(p: float) -> float:
    """Filter angle ``atanh(p / (1 - p))``; ``p = 1/2`` returns :data:`SATURATED`."""
    p = _check_probability(p)
    if p == 0.5:
        return SATURATED
    return math.atanh(p / (1.0 - p))


def map_px(p_zz: float, J: float, h: float = 1.0) -> float:
    """X-dephasing strength that keeps ``tau_zz / J == tau_x / h`` (equal qAT couplings)."""
    p_zz = _check_probability(p_zz)
    if J <= 0:
        raise InputError("J must be positive")
    if p_zz == 0.0:
        return 0.0
    if h == J:
        return p_zz
    return 0.5 - 0.5 * (1.0 - 2.0 * p_zz) ** (h / J)


def lambdas_from_taus(tau_zz: float, tau_x: float, J: float, h: float = 1.0, c: float = 1.0):
    """Effective qAT couplings ``(lambda_zz, lambda_x)`` with proportionality constant ``c``."""
    return c * tau_zz / J, c * tau_x / h


@dataclass(frozen=True)
class ChannelSpec:
    p_zz: float
    p_x: float
    tau_zz: float
    tau_x: float
    L: int
    # ln C(p_zz, p_x, L); saturated channels are applied as exact projectors and add nothing
    log_prefactor: float

    @classmethod
    def from_probabilities(cls, p_zz: float, p_x: float, L: int) -> "ChannelSpec":
        tz, tx = tau_of_p(p_zz), tau_of_p(p_x)
        logc = 0.0
        for p, t in ((p_zz, tz), (p_x, tx)):
            if t != SATURATED:
                logc += 0.5 * L * math.log1p(-2.0 * p)
        return cls(float(p_zz), float(p_x), tz, tx, L, logc)

    @property
    def saturated(self) -> bool:
        return self.tau_zz == SATURATED or self.tau_x == SATURATED


def _filter_coefficients(tau: float) -> tuple[float, float]:
    """``(a, b)`` with the filter equal to ``a * 1 + b * P`` for a Pauli string ``P``."""
    if tau == SATURATED:
        return 0.5, 0.5
    return math.cosh(tau), math.sinh(tau)


# ---------------------------------------------------------------------------
# generic MPO assembly


def mpo_from_terms(n_sites: int, terms: Sequence[tuple[float, Mapping[int, np.ndarray]]]) -> Mpo:
    """MPO of ``sum_t coeff_t * prod_k op_{t,k}`` built as a finite-state machine.

    Each multi-site term gets its own channel on every bond it spans, which is
    optimal for the short and wrap-around strings used here.
    """
    spans = []
    for coeff, ops in terms:
        sites = sorted(ops)
        if not sites or sites[0] < 0 or sites[-1] >= n_sites:
            raise InputError(f"term sites {sites} out of range")
        spans.append((sites[0], sites[-1]))

    # channel lists per bond b (b = 0 .. n_sites), bond b sits left of site b
    def channels(b):
        if b == 0:
            return ["start"]
        if b == n_sites:
            return ["done"]
        return ["start", "done"] + [t for t, (lo, hi) in enumerate(spans) if lo < b <= hi]

    tensors = []
    for k in range(n_sites):
        left, right = channels(k), channels(k + 1)
        li = {c: i for i, c in enumerate(left)}
        ri = {c: i for i, c in enumerate(right)}
        w = np.zeros((len(left), 2, 2, len(right)))
        if "start" in li and "start" in ri:
            w[li["start"], :, :, ri["start"]] = I2
        if "done" in li and "done" in ri:
            w[li["done"], :, :, ri["done"]] = I2
        for t, ((coeff, ops), (lo, hi)) in enumerate(zip(terms, spans)):
            if not lo <= k <= hi:
                continue
            op = np.asarray(ops.get(k, I2), dtype=np.float64)
            src = li["start"] if k == lo else li[t]
            dst = ri["done"] if k == hi else ri[t]
            w[src, :, :, dst] += (coeff * op) if k == lo else op
        tensors.append(w)
    return Mpo(tensors)


def _tfim_terms(J, h, L, periodic, site_of):
    terms = []
    bonds = L if (periodic and L > 2) else L - 1
    for j in range(bonds):
        a, b = site_of(j), site_of((j + 1) % L)
        terms.append((-J, {a: Z, b: Z}))
    if periodic and L == 2:
        # both bonds of a two-site ring connect the same pair
        terms[-1] = (-2.0 * J, terms[-1][1])
    for j in range(L):
        terms.append((-h, {site_of(j): X}))
    return terms


def tfim_chain_mpo(J: float, h: float, L: int, periodic: bool = True) -> Mpo:
    """Single chain ``-sum (J Z_j Z_{j+1} + h X_j)``."""
    return mpo_from_terms(L, _tfim_terms(J, h, L, periodic, lambda j: j))


def _doubled_terms(J, h, L, periodic):
    terms = []
    for leg in (UPPER, LOWER):
        terms += _tfim_terms(J, h, L, periodic, lambda j, leg=leg: site_index(j, leg))
    return terms


def build_doubled_tfim_mpo(p: ModelParams) -> Mpo:
    """Two decoupled TFIM chains on the ladder legs."""
    return mpo_from_terms(2 * p.L, _doubled_terms(p.J, p.h, p.L, p.periodic))


def build_qat_mpo(q: QatParams) -> Mpo:
    """Quantum Ashkin-Teller ladder: doubled TFIM plus plaquette ZZZZ and rung XX couplings."""
    L = q.L
    terms = _doubled_terms(q.J, q.h, L, q.periodic)
    bonds = L if (q.periodic and L > 2) else L - 1
    for j in range(bonds):
        k = (j + 1) % L
        ops = {site_index(j, UPPER): Z, site_index(j, LOWER): Z,
               site_index(k, UPPER): Z, site_index(k, LOWER): Z}
        coeff = -q.J * q.lambda_zz * (2.0 if (q.periodic and L == 2) else 1.0)
        terms.append((coeff, ops))
    for j in range(L):
        terms.append((-q.h * q.lambda_x, {site_index(j, UPPER): X, site_index(j, LOWER): X}))
    return mpo_from_terms(2 * L, terms)


# ---------------------------------------------------------------------------
# filters and projectors


def build_x_rung_gate(tau_x: float) -> np.ndarray:
    """``cosh(t) 1 + sinh(t) X(x)X`` on one rung; the saturated limit is ``(1 + X(x)X)/2``."""
    a, b = _filter_coefficients(tau_x)
    return a * np.eye(4) + b * np.kron(X, X)


def _string_mpo(n_sites: int, a: float, b: float, ops: Mapping[int, np.ndarray]) -> Mpo:
    """Bond-2 MPO of ``a * 1 + b * prod ops`` with identity outside ``[min, max]`` of the string."""
    lo, hi = min(ops), max(ops)
    tensors = []
    for k in range(n_sites):
        op = np.asarray(ops.get(k, I2), dtype=np.float64)
        if k < lo or k > hi:
            w = I2.reshape(1, 2, 2, 1).copy()
        elif lo == hi:
            w = (a * I2 + b * op).reshape(1, 2, 2, 1)
        elif k == lo:
            w = np.zeros((1, 2, 2, 2))
            w[0, :, :, 0] = a * I2
            w[0, :, :, 1] = b * op
        elif k == hi:
            w = np.zeros((2, 2, 2, 1))
            w[0, :, :, 0] = I2
            w[1, :, :, 0] = op
        else:
            w = np.zeros((2, 2, 2, 2))
            w[0, :, :, 0] = I2
            w[1, :, :, 1] = op
        tensors.append(w)
    return Mpo(tensors)


def plaquette_sites(rung_j: int, L: int) -> list[int]:
    k = (rung_j + 1) % L
    return [site_index(rung_j, UPPER), site_index(rung_j, LOWER),
            site_index(k, UPPER), site_index(k, LOWER)]


def build_zz_plaquette_mpo(tau_zz: float, rung_j: int, L: int) -> Mpo:
    """``cosh(t) 1 + sinh(t) Z Z Z Z`` on rungs ``j, j+1``; rung ``L-1`` wraps to rung 0."""
    if not 0 <= rung_j < L:
        raise InputError(f"rung {rung_j} out of range")
    a, b = _filter_coefficients(tau_zz)
    return _string_mpo(2 * L, a, b, {s: Z for s in plaquette_sites(rung_j, L)})


def parity_projector_mpo(n_sites: int, sites: Sequence[int]) -> Mpo:
    """``(1 + prod_{k in sites} X_k) / 2``."""
    return _string_mpo(n_sites, 0.5, 0.5, {s: X for s in sites})


def build_parity_projector_mpo(leg: str, L: int) -> Mpo:
    """Projector on ``prod X = +1`` over the upper leg, lower leg, or both (``"both"``)."""
    if leg == "both":
        sites = list(range(2 * L))
    elif leg in (UPPER, LOWER):
        sites = [site_index(j, leg) for j in range(L)]
    else:
        raise InputError(f"unknown leg selector {leg!r}")
    return parity_projector_mpo(2 * L, sites)
