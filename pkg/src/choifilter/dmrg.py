"""Two-site DMRG and preparation of the Choi-doubled TFIM ground state."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConvergenceError, InputError
from .models import (ModelParams, build_doubled_tfim_mpo, build_parity_projector_mpo,
                     parity_projector_mpo, tfim_chain_mpo)
from .mps import (EXACT, LOWER, UPPER, MpsState, Mpo, TruncationPolicy, apply_mpo,
                  canonicalize, inner)
from .tensor import lanczos_ground, svd_truncate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DmrgConfig:
    trunc: TruncationPolicy = field(default_factory=TruncationPolicy)
    energy_tol: float = 1e-4
    max_sweeps: int = 50
    eigen_tol: float = 1e-9
    seed: int = 0
    min_sweeps: int = 2
    lanczos_max_iter: int = 400

    def __post_init__(self):
        if not (self.energy_tol > 0 and self.eigen_tol > 0):
            raise InputError("tolerances must be positive")
        if self.max_sweeps < 1:
            raise InputError("max_sweeps must be >= 1")


@dataclass
class DmrgReport:
    energy: float
    sweep_energies: list[float]
    final_bond_profile: list[int]
    converged: bool
    total_discarded_weight: float


# environments carry axes (bra bond, mpo bond, ket bond)


def _left_env(env, w, a):
    t = np.tensordot(env, a, axes=(2, 0))  # (a', w, s, b)
    t = np.tensordot(t, w, axes=([1, 2], [0, 2]))  # (a', b, s', w')
    t = np.tensordot(a, t, axes=([0, 1], [0, 2]))  # (b', b, w')
    return t.transpose(0, 2, 1)


def _right_env(env, w, b):
    t = np.tensordot(b, env, axes=(2, 2))  # (a, s, b', w')
    t = np.tensordot(t, w, axes=([1, 3], [2, 3]))  # (a, b', w, s')
    t = np.tensordot(b, t, axes=([1, 2], [3, 1]))  # (a', a, w)
    return t.transpose(0, 2, 1)


def _two_site_matvec(lenv, w1, w2, renv, shape):
    def matvec(x):
        y = np.tensordot(lenv, x.reshape(shape), axes=(2, 0))  # (a', w, s, t, c)
        y = np.tensordot(y, w1, axes=([1, 2], [0, 2]))  # (a', t, c, s', w2)
        y = np.tensordot(y, w2, axes=([1, 4], [2, 0]))  # (a', c, s', t', w3)
        y = np.tensordot(y, renv, axes=([1, 4], [2, 1]))  # (a', s', t', c')
        return y.reshape(-1)

    return matvec


def random_initial_state(n_sites: int, seed: int = 0, bond: int = 8) -> MpsState:
    """Seeded random MPS with positive entries and small bond dimension.

    Positive amplitudes overlap every Perron-Frobenius ground state of the
    TFIM. Some entanglement is required: on the interleaved ladder
    neighbouring sites belong to different legs, so two-site updates started
    from a product state never couple them.
    """
    rng = np.random.default_rng(seed)
    dims = [1] + [min(bond, 2 ** k, 2 ** (n_sites - k)) for k in range(1, n_sites)] + [1]
    tensors = [rng.uniform(0.0, 1.0, size=(dims[k], 2, dims[k + 1])) for k in range(n_sites)]
    return canonicalize(MpsState(tensors, center=None), 0)


def find_ground_state(h: Mpo, init: MpsState, cfg: DmrgConfig = DmrgConfig()) -> tuple[MpsState, DmrgReport]:
    """Minimise ``<H>`` over MPS by two-site sweeps.

    Returns the best state (unit norm, centre 0) and a report; when
    ``max_sweeps`` runs out the report has ``converged=False``.
    """
    n = h.n_sites
    if init.n_sites != n:
        raise InputError(f"initial state has {init.n_sites} sites, MPO has {n}")
    if n < 2:
        raise InputError("DMRG needs at least two sites")
    psi = canonicalize(init, 0)
    tensors = list(psi.tensors)
    W = h.tensors
    lenvs: list = [None] * (n + 1)
    renvs: list = [None] * (n + 1)
    lenvs[0] = np.ones((1, 1, 1))
    renvs[n] = np.ones((1, 1, 1))
    for k in range(n - 1, 0, -1):
        renvs[k] = _right_env(renvs[k + 1], W[k], tensors[k])

    trunc = cfg.trunc
    discarded = 0.0
    energies: list[float] = []
    converged = False

    def solve(k):
        nonlocal discarded
        a, b = tensors[k], tensors[k + 1]
        theta = np.tensordot(a, b, axes=(2, 0))
        shape = theta.shape
        mv = _two_site_matvec(lenvs[k], W[k], W[k + 1], renvs[k + 2], shape)
        try:
            e, vec = lanczos_ground(mv, theta.size, tol=cfg.eigen_tol, v0=theta.reshape(-1),
                                    max_iter=cfg.lanczos_max_iter, seed=cfg.seed)
        except ConvergenceError as err:
            e, vec = err.energy, err.vector
        dl, dr = shape[0], shape[3]
        res = svd_truncate(vec.reshape(dl * 2, 2 * dr), trunc.max_bond, trunc.sv_cutoff)
        discarded += res.discarded_weight
        return e, res, dl, dr

    energy = math.inf
    for sweep in range(cfg.max_sweeps):
        for k in range(n - 1):
            energy, res, dl, dr = solve(k)
            tensors[k] = res.left.reshape(dl, 2, -1)
            sv = res.singular_values / np.linalg.norm(res.singular_values)
            tensors[k + 1] = (sv[:, None] * res.right).reshape(-1, 2, dr)
            lenvs[k + 1] = _left_env(lenvs[k], W[k], tensors[k])
        for k in range(n - 2, -1, -1):
            energy, res, dl, dr = solve(k)
            sv = res.singular_values / np.linalg.norm(res.singular_values)
            tensors[k + 1] = res.right.reshape(-1, 2, dr)
            tensors[k] = (res.left * sv).reshape(dl, 2, -1)
            renvs[k + 1] = _right_env(renvs[k + 2], W[k + 1], tensors[k + 1])
        log.debug("sweep %d: E=%.12f maxbond=%d", sweep, energy, max(t.shape[2] for t in tensors))
        prev = energies[-1] if energies else None
        energies.append(float(energy))
        if prev is not None and sweep + 1 >= cfg.min_sweeps and abs(energy - prev) < cfg.energy_tol:
            converged = True
            break

    state = MpsState(tensors, center=0, log_norm=0.0, discarded_weight=discarded)
    state = replace(canonicalize(state, 0), log_norm=0.0)
    report = DmrgReport(
        energy=float(energy),
        sweep_energies=energies,
        final_bond_profile=state.bond_dims,
        converged=converged,
        total_discarded_weight=discarded,
    )
    return state, report


# ---------------------------------------------------------------------------
# Choi-doubled initial state


def interleave_mps(a: MpsState, b: MpsState, trunc: TruncationPolicy = EXACT) -> MpsState:
    """Ladder MPS of ``a (x) b`` with ``a`` on the upper and ``b`` on the lower leg.

    Both inputs are brought to right-canonical form, which the interleaved
    product inherits, so a single left-to-right truncated SVD sweep is
    optimal bond by bond. Bonds of the exact product are never formed.
    """
    if a.n_sites != b.n_sites:
        raise InputError("legs must have equal length")
    a = canonicalize(a, 0)
    b = canonicalize(b, 0)
    L = a.n_sites
    out = []
    discarded = 0.0
    log_norm = a.log_norm + b.log_norm
    m = np.ones((1, 1, 1))  # (chi, a bond, b bond)
    for j in range(L):
        A, B = a.tensors[j], b.tensors[j]
        # upper site: absorb A, b bond passes through
        t = np.tensordot(m, A, axes=(1, 0))  # (chi, db, s, dc)
        chi, db, _, dc = t.shape
        t = t.transpose(0, 2, 3, 1).reshape(chi * 2, dc * db)
        res = svd_truncate(t, trunc.max_bond, trunc.sv_cutoff)
        total = float(np.sum(res.singular_values ** 2)) + res.discarded_weight
        discarded += res.discarded_weight / total
        out.append(res.left.reshape(chi, 2, -1))
        m = (res.singular_values[:, None] * res.right).reshape(-1, dc, db)
        nrm = float(np.linalg.norm(m))
        m /= nrm
        log_norm += math.log(nrm)
        # lower site: absorb B, a bond passes through
        t = np.tensordot(m, B, axes=(2, 0))  # (chi, dc, s, de)
        chi, dc, _, de = t.shape
        last = j == L - 1
        t = t.transpose(0, 2, 1, 3).reshape(chi * 2, dc * de)
        if last:
            out.append(t.reshape(chi, 2, 1))
            break
        res = svd_truncate(t, trunc.max_bond, trunc.sv_cutoff)
        total = float(np.sum(res.singular_values ** 2)) + res.discarded_weight
        discarded += res.discarded_weight / total
        out.append(res.left.reshape(chi, 2, -1))
        m = (res.singular_values[:, None] * res.right).reshape(-1, dc, de)
        nrm = float(np.linalg.norm(m))
        m /= nrm
        log_norm += math.log(nrm)
    state = MpsState(out, center=2 * L - 1, log_norm=log_norm, discarded_weight=discarded)
    return canonicalize(state, 0)


def prepare_initial_choi_state(p: ModelParams, cfg: DmrgConfig = DmrgConfig(), method: str = "chains",
                               project: bool | None = None) -> tuple[MpsState, DmrgReport]:
    """Unit-norm ``|rho0>> = |psi0>|psi0>`` on the ladder, centre 0.

    ``method="ladder"`` runs DMRG on the doubled Hamiltonian directly.
    ``method="chains"`` runs DMRG on one chain and interleaves two copies,
    which is the same ground state because the legs are decoupled.
    For ``J/h > 1`` (or ``project=True``) each leg is projected on
    ``prod X = +1`` to select the symmetric cat state.
    """
    if project is None:
        project = p.J / p.h > 1.0
    if method == "chains":
        H = tfim_chain_mpo(p.J, p.h, p.L, p.periodic)
        psi, rep = find_ground_state(H, random_initial_state(p.L, cfg.seed), cfg)
        if project:
            psi = _project(psi, parity_projector_mpo(p.L, range(p.L)), cfg.trunc)
        state = interleave_mps(psi, psi, cfg.trunc)
        rep = DmrgReport(
            energy=2.0 * rep.energy,
            sweep_energies=[2.0 * e for e in rep.sweep_energies],
            final_bond_profile=state.bond_dims,
            converged=rep.converged,
            total_discarded_weight=rep.total_discarded_weight + state.discarded_weight,
        )
    elif method == "ladder":
        H = build_doubled_tfim_mpo(p)
        state, rep = find_ground_state(H, random_initial_state(2 * p.L, cfg.seed), cfg)
        if project:
            for leg in (UPPER, LOWER):
                state = _project(state, build_parity_projector_mpo(leg, p.L), cfg.trunc)
            rep.final_bond_profile = state.bond_dims
    else:
        raise InputError(f"unknown preparation method {method!r}")
    state = replace(canonicalize(state, 0), log_norm=0.0)
    return state, rep


def _project(psi: MpsState, proj: Mpo, trunc: TruncationPolicy) -> MpsState:
    before = inner(psi, psi)[0]
    out = apply_mpo(psi, proj, trunc)
    kept = math.exp(2 * out.log_norm - before) if math.isfinite(out.log_norm) else 0.0
    if kept < 1e-8:
        raise ConvergenceError(f"parity projection kept only {kept:.2e} of the norm")
    return replace(canonicalize(out, 0), log_norm=0.0)
