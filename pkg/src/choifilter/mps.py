"""Open-boundary matrix-product states and operators on the two-leg ladder.

Site tensors have axes ``(left_bond, physical, right_bond)``; MPO tensors have
``(left_bond, phys_out, phys_in, right_bond)``. Ladder rungs are interleaved
column by column: rung ``j`` upper leg is site ``2j``, lower leg site ``2j+1``.

An :class:`MpsState` represents ``exp(log_norm) * contract(tensors)``. Every
routine that moves the canonical centre rescales the centre tensor to unit
norm and folds the factor into ``log_norm``, so stored tensors stay O(1)
however small the true norm becomes.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import DimensionError, InputError
from .tensor import svd_truncate

UPPER, LOWER = "u", "l"

_MAGIC = b"CHMP"
_VERSION = 1


def site_index(rung: int, leg: str) -> int:
    if leg == UPPER:
        return 2 * rung
    if leg == LOWER:
        return 2 * rung + 1
    raise InputError(f"unknown leg {leg!r}")


def rung_leg(site: int) -> tuple[int, str]:
    return site // 2, (UPPER if site % 2 == 0 else LOWER)


@dataclass(frozen=True)
class TruncationPolicy:
    """``max_bond=None`` means unbounded; ``sv_cutoff`` is relative to the largest value."""

    max_bond: int | None = 200
    sv_cutoff: float = 1e-6

    def __post_init__(self):
        if self.max_bond is not None and self.max_bond < 1:
            raise InputError("max_bond must be >= 1")
        if not 0.0 <= self.sv_cutoff < 1.0:
            raise InputError("sv_cutoff must lie in [0, 1)")


EXACT = TruncationPolicy(max_bond=None, sv_cutoff=0.0)


@dataclass
class MpsState:
    tensors: list[np.ndarray]
    center: int | None = None
    log_norm: float = 0.0
    # cumulative relative weight dropped by truncations
    discarded_weight: float = 0.0

    def __post_init__(self):
        if not self.tensors:
            raise InputError("an MPS needs at least one site")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise DimensionError("boundary bonds must have extent 1")
        for k in range(len(self.tensors) - 1):
            if self.tensors[k].shape[2] != self.tensors[k + 1].shape[0]:
                raise DimensionError(f"bond mismatch between sites {k} and {k + 1}")

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)


@dataclass
class Mpo:
    tensors: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[3] != 1:
            raise DimensionError("boundary MPO bonds must have extent 1")
        for k in range(len(self.tensors) - 1):
            if self.tensors[k].shape[3] != self.tensors[k + 1].shape[0]:
                raise DimensionError(f"MPO bond mismatch between sites {k} and {k + 1}")

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    def support(self) -> tuple[int, int] | None:
        """First and last site that is not a bond-1 identity, or None."""
        eye = np.eye(2)
        active = [
            k
            for k, w in enumerate(self.tensors)
            if not (w.shape == (1, 2, 2, 1) and np.array_equal(w[0, :, :, 0], eye))
        ]
        if not active:
            return None
        return active[0], active[-1]


# ---------------------------------------------------------------------------
# construction


def from_product(local_states: Iterable) -> MpsState:
    tensors = []
    log_norm = 0.0
    for k, v in enumerate(local_states):
        v = np.asarray(v, dtype=np.float64).reshape(-1)
        nrm = float(np.linalg.norm(v))
        if nrm == 0.0:
            raise InputError(f"local state at site {k} is zero")
        tensors.append((v / nrm).reshape(1, -1, 1))
        log_norm += math.log(nrm)
    return MpsState(tensors, center=0, log_norm=log_norm)


def random_mps(n_sites: int, bond: int, seed: int = 0, d: int = 2) -> MpsState:
    """Random Gaussian MPS with bond dims capped by ``bond`` and the exact Schmidt rank."""
    rng = np.random.default_rng(seed)
    dims = [1] + [min(bond, d ** k, d ** (n_sites - k)) for k in range(1, n_sites)] + [1]
    tensors = [rng.standard_normal((dims[k], d, dims[k + 1])) for k in range(n_sites)]
    return MpsState(tensors, center=None)


def from_dense(vec: np.ndarray, n_sites: int, trunc: TruncationPolicy = EXACT) -> MpsState:
    """Exact (or truncated) MPS of a dense vector in row-major site order."""
    psi = np.asarray(vec, dtype=np.float64).reshape(-1)
    if psi.size != 2 ** n_sites:
        raise DimensionError(f"vector of length {psi.size} is not 2**{n_sites}")
    nrm = float(np.linalg.norm(psi))
    if nrm == 0.0:
        raise InputError("zero vector")
    rest = (psi / nrm).reshape(1, -1)
    tensors = []
    discarded = 0.0
    for k in range(n_sites - 1):
        dl = rest.shape[0]
        res = svd_truncate(rest.reshape(dl * 2, -1), trunc.max_bond, trunc.sv_cutoff)
        discarded += res.discarded_weight
        tensors.append(res.left.reshape(dl, 2, -1))
        rest = res.singular_values[:, None] * res.right
    last = rest.reshape(rest.shape[0], 2, 1)
    last_norm = float(np.linalg.norm(last))
    tensors.append(last / last_norm)
    return MpsState(tensors, center=n_sites - 1, log_norm=math.log(nrm * last_norm),
                    discarded_weight=discarded)


def to_dense(s: MpsState, max_sites: int = 24) -> np.ndarray:
    """Full state vector, ``exp(log_norm)`` included. Site 0 is the most significant index."""
    if s.n_sites > max_sites:
        raise InputError(f"refusing to expand {s.n_sites} sites densely")
    psi = s.tensors[0].reshape(-1, s.tensors[0].shape[2])
    for t in s.tensors[1:]:
        psi = np.tensordot(psi, t, axes=(1, 0)).reshape(-1, t.shape[2])
    return psi.reshape(-1) * math.exp(s.log_norm)


def mpo_to_dense(o: Mpo, max_sites: int = 12) -> np.ndarray:
    if o.n_sites > max_sites:
        raise InputError(f"refusing to expand {o.n_sites} sites densely")
    m = o.tensors[0][0]  # (out, in, right)
    for w in o.tensors[1:]:
        # m: (OUT, IN, r) ; w: (r, o, i, r')
        m = np.tensordot(m, w, axes=(2, 0))  # (OUT, IN, o, i, r')
        OUT, IN, d_o, d_i, r = m.shape
        m = m.transpose(0, 2, 1, 3, 4).reshape(OUT * d_o, IN * d_i, r)
    return m[:, :, 0]


# ---------------------------------------------------------------------------
# canonical form


def _normalize_site(tensors: list[np.ndarray], k: int) -> float:
    nrm = float(np.linalg.norm(tensors[k]))
    if nrm == 0.0 or not math.isfinite(nrm):
        raise InputError("state was annihilated (zero norm)")
    tensors[k] = tensors[k] / nrm
    return math.log(nrm)


def _shift_right(tensors: list[np.ndarray], k: int) -> float:
    a = tensors[k]
    dl, d, dr = a.shape
    q, r = np.linalg.qr(a.reshape(dl * d, dr))
    tensors[k] = q.reshape(dl, d, -1)
    tensors[k + 1] = np.tensordot(r, tensors[k + 1], axes=(1, 0))
    return _normalize_site(tensors, k + 1)


def _shift_left(tensors: list[np.ndarray], k: int) -> float:
    a = tensors[k]
    dl, d, dr = a.shape
    q, r = np.linalg.qr(a.reshape(dl, d * dr).T)
    tensors[k] = q.T.reshape(-1, d, dr)
    tensors[k - 1] = np.tensordot(tensors[k - 1], r.T, axes=(2, 0))
    return _normalize_site(tensors, k - 1)


def canonicalize(s: MpsState, center: int) -> MpsState:
    """Mixed-canonical form with orthogonality centre ``center`` (unit-norm centre tensor)."""
    n = s.n_sites
    if not 0 <= center < n:
        raise InputError(f"center {center} out of range for {n} sites")
    tensors = list(s.tensors)
    log_norm = s.log_norm
    if s.center is None:
        log_norm += _normalize_site(tensors, 0)
        for k in range(n - 1):
            log_norm += _shift_right(tensors, k)
        cur = n - 1
    else:
        cur = s.center
    while cur < center:
        log_norm += _shift_right(tensors, cur)
        cur += 1
    while cur > center:
        log_norm += _shift_left(tensors, cur)
        cur -= 1
    log_norm += _normalize_site(tensors, center)
    return replace(s, tensors=tensors, center=center, log_norm=log_norm)


def normalized(s: MpsState) -> MpsState:
    """Same direction, unit norm (``log_norm = 0``), canonical."""
    c = 0 if s.center is None else s.center
    return replace(canonicalize(s, c), log_norm=0.0)


# ---------------------------------------------------------------------------
# operator application


def apply_two_site_gate(
    s: MpsState, left_site: int, gate: np.ndarray, trunc: TruncationPolicy = EXACT
) -> MpsState:
    """Apply a 4x4 ``gate`` (row index = out pair, ``kron(A, B)`` puts A on ``left_site``).

    The centre ends on ``left_site + 1``.
    """
    if not 0 <= left_site < s.n_sites - 1:
        raise InputError(f"no site pair starting at {left_site}")
    s = canonicalize(s, left_site)
    tensors = list(s.tensors)
    a, b = tensors[left_site], tensors[left_site + 1]
    dl, dr = a.shape[0], b.shape[2]
    theta = np.tensordot(a, b, axes=(2, 0))  # (dl, s1, s2, dr)
    g = np.asarray(gate, dtype=np.float64).reshape(2, 2, 2, 2)
    theta = np.tensordot(g, theta, axes=([2, 3], [1, 2]))  # (o1, o2, dl, dr)
    theta = theta.transpose(2, 0, 1, 3).reshape(dl * 2, 2 * dr)
    total = float(np.sum(theta * theta))
    if total == 0.0:
        raise InputError("gate annihilated the state")
    res = svd_truncate(theta, trunc.max_bond, trunc.sv_cutoff)
    tensors[left_site] = res.left.reshape(dl, 2, -1)
    tensors[left_site + 1] = (res.singular_values[:, None] * res.right).reshape(-1, 2, dr)
    log_norm = s.log_norm + _normalize_site(tensors, left_site + 1)
    return replace(
        s,
        tensors=tensors,
        center=left_site + 1,
        log_norm=log_norm,
        discarded_weight=s.discarded_weight + res.discarded_weight / total,
    )


def apply_mpo(s: MpsState, o: Mpo, trunc: TruncationPolicy = EXACT) -> MpsState:
    """``o @ s`` compressed back to ``trunc``; only the MPO's support is touched.

    The centre ends on the first site of the support.
    """
    if o.n_sites != s.n_sites:
        raise DimensionError(f"MPO has {o.n_sites} sites, state has {s.n_sites}")
    span = o.support()
    if span is None:
        return replace(s, tensors=list(s.tensors))
    a, b = span
    s = canonicalize(s, a)
    tensors = list(s.tensors)
    log_norm = s.log_norm
    for k in range(a, b + 1):
        w, t = o.tensors[k], tensors[k]
        x = np.tensordot(w, t, axes=(2, 1))  # (wl, o, wr, dl, dr)
        wl, d, wr, dl, dr = x.shape
        tensors[k] = x.transpose(0, 3, 1, 2, 4).reshape(wl * dl, d, wr * dr)
    log_norm += _normalize_site(tensors, a)
    for k in range(a, b):
        log_norm += _shift_right(tensors, k)
    discarded = s.discarded_weight
    for k in range(b, a, -1):
        t = tensors[k]
        dl, d, dr = t.shape
        res = svd_truncate(t.reshape(dl, d * dr), trunc.max_bond, trunc.sv_cutoff)
        tensors[k] = res.right.reshape(-1, d, dr)
        tensors[k - 1] = np.tensordot(tensors[k - 1], res.left * res.singular_values, axes=(2, 0))
        discarded += res.discarded_weight  # centre tensor has unit norm
        log_norm += _normalize_site(tensors, k - 1)
    return replace(s, tensors=tensors, center=a, log_norm=log_norm, discarded_weight=discarded)


def apply_local_ops(s: MpsState, ops: Mapping[int, np.ndarray]) -> MpsState:
    """Multiply single-site operators into the tensors (no truncation, canonical form dropped)."""
    tensors = list(s.tensors)
    for k, op in ops.items():
        tensors[k] = np.tensordot(np.asarray(op, dtype=np.float64), tensors[k], axes=(1, 1)).transpose(1, 0, 2)
    return replace(s, tensors=tensors, center=None)


def swap_legs(s: MpsState) -> MpsState:
    """Exchange upper and lower legs on every rung (exact)."""
    swap = np.eye(4)[[0, 2, 1, 3]]
    for j in range(s.n_sites // 2):
        s = apply_two_site_gate(s, 2 * j, swap, EXACT)
    return s


# ---------------------------------------------------------------------------
# scalars


def inner(a: MpsState, b: MpsState) -> tuple[float, int]:
    """``<a|b>`` as ``(log|value|, sign)``; an exactly vanishing overlap gives ``(-inf, 0)``."""
    if a.n_sites != b.n_sites:
        raise DimensionError("states have different lengths")
    env = np.ones((1, 1))
    log_mag = a.log_norm + b.log_norm
    for ta, tb in zip(a.tensors, b.tensors):
        env = np.tensordot(env, ta, axes=(0, 0))  # (b, s, a')
        env = np.tensordot(env, tb, axes=([0, 1], [0, 1]))  # (a', b')
        m = float(np.max(np.abs(env)))
        if m == 0.0:
            return -math.inf, 0
        env = env / m
        log_mag += math.log(m)
    v = float(env[0, 0])
    if v == 0.0:
        return -math.inf, 0
    return log_mag + math.log(abs(v)), (1 if v > 0 else -1)


def overlap_ratio(num: tuple[float, int], den: tuple[float, int]) -> float:
    """Ratio of two ``(log|x|, sign)`` pairs."""
    if den[1] == 0:
        raise ZeroDivisionError("vanishing denominator overlap")
    if num[1] == 0:
        return 0.0
    return num[1] * den[1] * math.exp(num[0] - den[0])


def expectation(s: MpsState, ops: Mapping[int, np.ndarray]) -> float:
    """``<s|O|s>/<s|s>`` for a product ``O`` of single-site operators."""
    return overlap_ratio(inner(s, apply_local_ops(s, ops)), inner(s, s))


def _entropy(svals: np.ndarray) -> float:
    p = svals.astype(np.float64) ** 2
    p = p / p.sum()
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def prefix_entropy(s: MpsState, n_sites: int) -> float:
    """Von Neumann entropy (natural log) of the first ``n_sites`` sites of the normalised state."""
    if not 1 <= n_sites < s.n_sites:
        raise InputError(f"cut after {n_sites} sites is not inside a {s.n_sites}-site chain")
    c = canonicalize(s, n_sites - 1)
    t = c.tensors[n_sites - 1]
    svals = np.linalg.svd(t.reshape(-1, t.shape[2]), compute_uv=False)
    return _entropy(svals)


def bond_spectra(s: MpsState) -> list[np.ndarray]:
    """Normalised Schmidt values on every bond; entry ``k`` is the cut after ``k + 1`` sites."""
    c = canonicalize(s, 0)
    tensors = list(c.tensors)
    out = []
    for k in range(c.n_sites - 1):
        t = tensors[k]
        dl, d, dr = t.shape
        u, sv, vt = np.linalg.svd(t.reshape(dl * d, dr), full_matrices=False)
        tensors[k] = u.reshape(dl, d, -1)
        tensors[k + 1] = np.tensordot(sv[:, None] * vt, tensors[k + 1], axes=(1, 0))
        out.append(sv / np.linalg.norm(sv))
    return out


def entropies(s: MpsState) -> list[float]:
    return [_entropy(sv) for sv in bond_spectra(s)]


# ---------------------------------------------------------------------------
# binary checkpoints


def save_mps(s: MpsState, path) -> None:
    """Write ``s`` to ``path``.

    Little-endian layout, version 1::

        4s   magic "CHMP"
        u32  version
        u32  n_sites
        i32  center (-1 when not canonical)
        f64  log_norm
        f64  discarded_weight
        per site: u32 left, u32 phys, u32 right, then left*phys*right f64 (row-major)
    """
    center = -1 if s.center is None else s.center
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIIidd", _MAGIC, _VERSION, s.n_sites, center, s.log_norm,
                             s.discarded_weight))
        for t in s.tensors:
            fh.write(struct.pack("<III", *t.shape))
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_mps(path) -> MpsState:
    data = Path(path).read_bytes()
    head = struct.calcsize("<4sIIidd")
    if len(data) < head or data[:4] != _MAGIC:
        raise InputError(f"{path} is not an MPS checkpoint")
    magic, version, n, center, log_norm, discarded = struct.unpack_from("<4sIIidd", data, 0)
    if magic != _MAGIC:
        raise InputError(f"{path} is not an MPS checkpoint")
    if version != _VERSION:
        raise InputError(f"unsupported MPS checkpoint version {version}")
    off = head
    tensors = []
    for _ in range(n):
        if off + 12 > len(data):
            raise InputError(f"{path} is truncated")
        dims = struct.unpack_from("<III", data, off)
        off += 12
        count = dims[0] * dims[1] * dims[2]
        if off + 8 * count > len(data):
            raise InputError(f"{path} is truncated")
        t = np.frombuffer(data, dtype="<f8", count=count, offset=off).astype(np.float64)
        off += 8 * count
        tensors.append(t.reshape(dims))
    return MpsState(tensors, center=None if center < 0 else center, log_norm=log_norm,
                    discarded_weight=discarded)
