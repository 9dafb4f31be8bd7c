"""The seven acceptance criteria at their stated tolerances.

Each test prints one PASS/FAIL line (repeated in the terminal summary).
Finite-size sweeps are checkpointed per (J/h, L) under ``$CHOIFILTER_CACHE``
(default ``.acceptance_cache`` in the repository) and resumed on later runs;
delete that directory to recompute everything from scratch.
"""

import math
import os
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from choifilter import ed
from choifilter.dmrg import DmrgConfig, find_ground_state, prepare_initial_choi_state, random_initial_state
from choifilter.filtering import filter_state
from choifilter.models import X, ModelParams, build_doubled_tfim_mpo, map_px, tfim_chain_mpo
from choifilter.mps import LOWER, UPPER, TruncationPolicy, expectation, inner, random_mps, site_index, swap_legs
from choifilter.observables import (correlator, entropy_profile, fit_ceff, identity_choi_state, mean_nn_renyi2,
                                    plaquette_entropy, purity_log)
from choifilter.sweep import SweepConfig, classify_regime, default_sizes, extrapolate_pc, run_sweep

from conftest import DATA, report

CACHE = Path(os.environ.get("CHOIFILTER_CACHE", Path(__file__).resolve().parents[1] / ".acceptance_cache"))
APPC_GRID = [round(0.05 * k, 10) for k in range(11)]
PC_REF = {0.8: 0.372, 1.0: 0.308, 1.2: 0.393}


def golden(name, J):
    rows = ed.read_golden_csv(DATA / "ed_zz_only_L8.csv")
    return {r["p_zz"]: r["value"] for r in rows if r["observable"] == name and r["J"] == J}


def appendix_c(J, measure):
    t0 = time.perf_counter()
    s0, _ = prepare_initial_choi_state(ModelParams(J, 8))
    vals = {p: measure(filter_state(s0, p, J, TruncationPolicy(), mode="zz_only")) for p in APPC_GRID}
    return vals, time.perf_counter() - t0


def test_criterion_1_appendix_c_renyi2():
    ref = golden("nn_renyi2_zz", 0.1)
    vals, wall = appendix_c(0.1, mean_nn_renyi2)
    err = max(abs(vals[p] - ref[p]) for p in APPC_GRID)
    ok = err <= 1e-4 and wall < 60
    report(1, ok, f"L=8 J=0.1 nn Renyi-2 vs ED: max |dev| {err:.2e} (tol 1e-4), {wall:.1f}s")
    assert ok


def test_criterion_2_appendix_c_plaquette_entropy():
    ref = golden("plaquette_entropy", 0.01)
    vals, wall = appendix_c(0.01, plaquette_entropy)
    err = max(abs(vals[p] - ref[p]) for p in APPC_GRID)
    ok = err <= 1e-4 and wall < 60
    report(2, ok, f"L=8 J=0.01 plaquette entropy vs ED: max |dev| {err:.2e} (tol 1e-4), {wall:.1f}s")
    assert ok


def test_criterion_3_dmrg():
    t0 = time.perf_counter()
    e_ed = 2.0 * np.linalg.eigvalsh(ed.tfim_chain_dense(1.0, 1.0, 8))[0]
    _, rep = prepare_initial_choi_state(ModelParams(1.0, 8), method="ladder")
    _, chain = find_ground_state(tfim_chain_mpo(1.0, 1.0, 16), random_initial_state(16, 0), DmrgConfig())
    e_ff = ed.tfim_exact_energy(1.0, 1.0, 16)
    wall = time.perf_counter() - t0
    d1 = abs(rep.energy - e_ed)
    d2 = abs(chain.energy - e_ff) / abs(e_ff)
    ok = d1 <= 1e-6 and d2 <= 1e-3 and wall < 300
    report(3, ok, f"ladder L=8 |E-E_ED| {d1:.1e} (tol 1e-6); chain L=16 rel. err {d2:.1e} (tol 1e-3); {wall:.1f}s")
    assert ok


@lru_cache(maxsize=None)
def size_sweep(j_over_h, L):
    """Default-grid sweep for one size, checkpointed so interrupted runs resume."""
    cfg = SweepConfig(J_over_h=j_over_h, L_list=[L], output_path=str(CACHE / f"J{j_over_h}_L{L}.csv"), resume=True)
    return run_sweep(cfg)


def transition(j_over_h, sizes):
    peaks = [(L, size_sweep(j_over_h, L).fits[L]) for L in sizes]
    return peaks, extrapolate_pc(peaks)


@pytest.mark.slow
@pytest.mark.parametrize("j_over_h", [0.8, 1.0, 1.2])
def test_criterion_4_reduced_transition(j_over_h):
    peaks, (a, pc, _) = transition(j_over_h, [12, 16, 20])
    ok = abs(pc - PC_REF[j_over_h]) <= 0.04
    shown = ", ".join(f"{L}:{p:.4f}" for L, p in peaks)
    report(4, ok, f"reduced J/h={j_over_h}: peaks {shown} -> p_c {pc:.4f} vs {PC_REF[j_over_h]} (tol 0.04)")
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("j_over_h", [0.8, 1.0, 1.2])
def test_criterion_4_full_transition(j_over_h):
    peaks, (a, pc, _) = transition(j_over_h, default_sizes(j_over_h))
    ok = abs(pc - PC_REF[j_over_h]) <= 0.02
    shown = ", ".join(f"{L}:{p:.4f}" for L, p in peaks)
    report(4, ok, f"full J/h={j_over_h}: peaks {shown} -> p_c {pc:.4f} vs {PC_REF[j_over_h]} (tol 0.02)")
    assert ok


@pytest.mark.slow
def test_criterion_5_regimes():
    want = {(0.8, 0.05): "I", (0.8, 0.45): "II", (1.2, 0.05): "III", (1.2, 0.45): "II"}
    got = {}
    for (j, p), _ in want.items():
        (row,) = [r for r in size_sweep(j, 28).rows if r["p_zz"] == p]
        got[(j, p)] = (classify_regime(row), row["chi_renyi2_zz"], row["chi_strange_z"], row["chi_upper_zz"])
    ok = all(got[k][0] == v for k, v in want.items())
    shown = "; ".join(f"J/h={j} p={p}: {g[0]} ({g[1]:.3f},{g[2]:.3f},{g[3]:.3f})" for (j, p), g in got.items())
    report(5, ok, f"L=28 {shown}")
    assert ok


@pytest.mark.slow
def test_criterion_6_entanglement_scaling():
    t0 = time.perf_counter()
    s0, _ = prepare_initial_choi_state(ModelParams(1.0, 20))
    c = {p: fit_ceff(entropy_profile(filter_state(s0, p, 1.0)))[0] for p in (0.0, 0.3, 0.5)}
    wall = time.perf_counter() - t0
    ok = abs(c[0.0] - 1) <= 0.15 and abs(c[0.3] - 1) <= 0.15 and abs(c[0.5]) < 0.15 and wall < 1800
    report(6, ok, f"L=20 c_eff p=0: {c[0.0]:.3f}, p=0.3: {c[0.3]:.3f} (1 +- 0.15); p=0.5: {c[0.5]:.3f} (< 0.15); "
                  f"{wall:.0f}s")
    assert ok


def test_criterion_7_properties():
    checks = {}
    L, J, p = 8, 1.2, 0.3
    # identities of the filtered representation: prepare |rho0>> well below the filter's truncation
    # level so preparation error does not mask them; filtering keeps the production policy
    prep = DmrgConfig(trunc=TruncationPolicy(max_bond=200, sv_cutoff=1e-10), energy_tol=1e-10)
    s0, _ = prepare_initial_choi_state(ModelParams(J, L), prep)
    f = filter_state(s0, p, J)
    one = identity_choi_state(L)
    lm0, _ = inner(one, s0)
    lm, sign = inner(one, f.state)
    checks["trace"] = sign == 1 and abs(math.exp(lm + f.log_prefactor_applied) - math.exp(lm0)) <= 1e-6
    d = ed.apply_channel_dense(ed.ground_state_dense(ModelParams(J, L)), p, map_px(p, J))
    dense = ed.observables_dense(d)
    checks["purity-norm"] = abs(math.exp(purity_log(f)) / dense.purity - 1.0) <= 1e-6
    rng = np.random.default_rng(0)
    a = rng.standard_normal((8, 8))
    rho = a @ a.T / np.trace(a @ a.T)
    checks["layer commutativity"] = np.max(np.abs(ed.apply_channel_physical(rho, 3, 0.2, 0.35)
                                                  - ed.apply_channel_physical(rho, 3, 0.2, 0.35, "zz_then_x"))) <= 1e-8
    par = [expectation(f.state, {site_index(j, leg): X for j in range(L)}) for leg in (UPPER, LOWER)]
    checks["strong symmetry"] = all(abs(v - 1.0) <= 1e-8 for v in par)
    lm, sign = inner(f.state, swap_legs(f.state))
    checks["leg swap"] = sign == 1 and abs(math.exp(lm - inner(f.state, f.state)[0]) - 1.0) <= 1e-8
    pairs = [(random_mps(10, 6, 2 * k), random_mps(10, 6, 2 * k + 1)) for k in range(20)]
    checks["Cauchy-Schwarz"] = all(inner(x, y)[0] <= 0.5 * (inner(x, x)[0] + inner(y, y)[0]) + 1e-12 for x, y in pairs)
    e_ladder = 2.0 * np.linalg.eigvalsh(ed.tfim_chain_dense(1.0, 1.0, 4))[0]
    _, rep = find_ground_state(build_doubled_tfim_mpo(ModelParams(1.0, 4)), random_initial_state(8, 1),
                               DmrgConfig(trunc=TruncationPolicy(max_bond=3, sv_cutoff=0.0), max_sweeps=6))
    checks["variational bound"] = min(rep.sweep_energies) >= e_ladder - 1e-10
    checks["strange = canonical"] = all(abs(correlator(f, "strange_z", 0, r) - dense.canonical_zz[r]) <= 1e-5
                                        for r in range(1, L))
    g = filter_state(s0, 0.0, J)
    pure = []
    for r in range(1, L // 2 + 1):
        u = correlator(g, "upper_zz", 0, r)
        pure += [abs(correlator(g, "renyi2_zz", 0, r) - u * u), abs(correlator(g, "strange_z", 0, r) - u)]
    checks["pure-state identities"] = max(pure) <= 1e-8
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    report(7, ok, f"{len(checks) - len(failed)}/{len(checks)} properties hold" + (f"; failed: {failed}" if failed else ""))
    assert ok
