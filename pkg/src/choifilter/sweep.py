"""Parameter sweeps over (J/h, p_zz, L), S_A peak fits and 1/L extrapolation."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .dmrg import DmrgConfig, prepare_initial_choi_state
from .errors import ConvergenceError, FitError, InputError
from .filtering import filter_state
from .models import ModelParams, map_px
from .mps import MpsState, TruncationPolicy, load_mps, save_mps
from .observables import fit_ceff, measure

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ROW_COLUMNS = ["L", "J", "h", "p_zz", "p_x", "chi_renyi2_zz", "chi_strange_z", "chi_upper_zz", "S_A",
               "purity_log", "max_bond_used", "total_discarded_weight", "regime", "status"]
CHI_KEYS = ("chi_renyi2_zz", "chi_strange_z", "chi_upper_zz")


def default_grid() -> list[float]:
    return [round(0.025 * k, 6) for k in range(21)]


def default_sizes(j_over_h: float) -> list[int]:
    sizes = [12, 16, 20, 24, 28]
    if j_over_h == 1.0:
        sizes.append(32)
    return sizes


@dataclass
class SweepConfig:
    J_over_h: float
    L_list: list[int]
    p_zz_grid: list[float] = field(default_factory=default_grid)
    h: float = 1.0
    dmrg: DmrgConfig = field(default_factory=DmrgConfig)
    trunc: TruncationPolicy = field(default_factory=TruncationPolicy)
    profiles: bool = False  # also keep the rung entropy profile of every point
    output_path: str | None = None
    mode: str = "full"
    threads: int = 1
    resume: bool = False
    project: bool | None = None  # cat-state projection; None means automatic for J/h > 1

    def __post_init__(self):
        g = [float(p) for p in self.p_zz_grid]
        if not g or any(p < 0 or p > 0.5 for p in g):
            raise InputError("p_zz grid must lie in [0, 0.5]")
        if any(b <= a for a, b in zip(g, g[1:])):
            raise InputError("p_zz grid must be strictly increasing")
        if not self.L_list or any(int(L) != L or L < 4 or L % 2 for L in self.L_list):
            raise InputError("sizes must be even rung counts >= 4")
        if not (self.J_over_h > 0 and self.h > 0):
            raise InputError("J/h and h must be positive")
        if self.mode not in ("full", "zz_only"):
            raise InputError(f"unknown mode {self.mode!r}")
        if self.threads < 1:
            raise InputError("threads must be >= 1")
        self.p_zz_grid = g
        self.L_list = [int(L) for L in self.L_list]

    @property
    def J(self) -> float:
        return self.J_over_h * self.h


@dataclass
class SweepResult:
    rows: list[dict]
    fits: dict[int, float] = field(default_factory=dict)
    fit_errors: dict[int, str] = field(default_factory=dict)
    extrapolation: tuple[float, float, float] | None = None
    profiles: dict[tuple[int, float], list[float]] = field(default_factory=dict)
    wall_times: dict[tuple[int, float], float] = field(default_factory=dict)

    def curve(self, L: int, key: str = "S_A") -> list[tuple[float, float]]:
        return [(r["p_zz"], r[key]) for r in self.rows if r["L"] == L and r["status"] != "error"]


# ---------------------------------------------------------------------------
# analysis


def find_peak(curve: Sequence[tuple[float, float]], window: int = 9, degree: int = 6) -> float:
    """Maximiser of a degree-``degree`` least-squares polynomial around the sample argmax."""
    pts = sorted((float(p), float(s)) for p, s in curve)
    if len(pts) < max(8, degree + 2):
        raise FitError(f"need at least {max(8, degree + 2)} points, have {len(pts)}")
    p = np.array([q[0] for q in pts])
    s = np.array([q[1] for q in pts])
    if not np.all(np.isfinite(s)):
        raise FitError("curve contains non-finite values")
    k = int(np.argmax(s))
    for w in (window, window + 4):
        w = min(max(w, degree + 1), len(p))
        lo = min(max(k - w // 2, 0), len(p) - w)
        x, y = p[lo:lo + w], s[lo:lo + w]
        poly = np.polynomial.Polynomial.fit(x, y, degree)
        a, b = x[0], x[-1]
        crit = [r.real for r in poly.deriv().roots() if abs(r.imag) < 1e-9 and a < r.real < b]
        cands = [(poly(c), c) for c in crit]
        edge = max(poly(a), poly(b))
        if cands:
            best_val, best = max(cands)
            if best_val >= edge:
                return float(best)
        log.debug("peak fit maximiser on the window edge (width %d)", w)
    raise FitError("polynomial maximum sits on the window boundary")


def extrapolate_pc(peaks: Sequence[tuple[int, float]]) -> tuple[float, float, float]:
    """Fit ``p_peak = a/L + p_c``. Returns ``(a, p_c, rms_residual)``."""
    if len({L for L, _ in peaks}) < 3:
        raise FitError("need peaks for at least three sizes")
    inv = np.array([1.0 / L for L, _ in peaks])
    y = np.array([p for _, p in peaks], dtype=float)
    A = np.column_stack([inv, np.ones_like(inv)])
    (a, pc), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([a, pc])
    return float(a), float(pc), float(math.sqrt(np.mean(resid ** 2)))


def classify_regime(row, low: float = 0.1, high: float = 0.4) -> str:
    """``"I"``, ``"II"``, ``"III"`` or ``"crossover"`` from the three susceptibilities.

    ``row`` is a mapping with the ``chi_*`` keys or a triple ``(chi_II, chi_strange, chi_upper)``.
    """
    if not low < high:
        raise InputError("thresholds need low < high")
    if isinstance(row, Mapping):
        c2, cs, cu = (float(row[k]) for k in CHI_KEYS)
    else:
        c2, cs, cu = (float(v) for v in row)
    if c2 < low and cs < low and cu < low:
        return "I"
    if c2 >= high and cs < low and cu < low:
        return "II"
    if c2 >= high and cs >= high and cu >= high:
        return "III"
    return "crossover"


def fit_all(result: SweepResult) -> SweepResult:
    result.fits.clear()
    result.fit_errors.clear()
    for L in sorted({r["L"] for r in result.rows}):
        try:
            result.fits[L] = find_peak(result.curve(L))
        except FitError as e:
            result.fit_errors[L] = str(e)
    result.extrapolation = None
    if len(result.fits) >= 3:
        result.extrapolation = extrapolate_pc(sorted(result.fits.items()))
    return result


def ceff_table(profiles: Mapping[tuple[int, float], Sequence[float]]) -> list[dict]:
    """c_eff fits for stored rung profiles (entries for x = 1 .. L-1)."""
    from .observables import EntropyProfile

    out = []
    for (L, p), S in sorted(profiles.items()):
        prof = EntropyProfile(L, list(zip(range(1, L), S)))
        c, B, rms = fit_ceff(prof)
        out.append({"L": L, "p_zz": p, "c_eff": c, "B": B, "rms": rms})
    return out


# ---------------------------------------------------------------------------
# running


def output_paths(out: str | None):
    if out is None:
        return None
    base = Path(out)
    stem = str(base.with_suffix("")) if base.suffix == ".csv" else str(base)
    return {
        "rows": base,
        "fits": Path(stem + ".fits.json"),
        "timing": Path(stem + ".timing.csv"),
        "profiles": Path(stem + ".profiles.json"),
        "ckpt": Path(stem + ".ckpt"),
    }


def checkpoint_name(J: float, h: float, L: int, seed: int) -> str:
    return f"rho0_J{J!r}_h{h!r}_L{L}_s{seed}.mps"


def _prepare(cfg: SweepConfig, L: int, ckpt: Path | None) -> tuple[MpsState, bool]:
    path = ckpt / checkpoint_name(cfg.J, cfg.h, L, cfg.dmrg.seed) if ckpt else None
    if path is not None and cfg.resume and path.exists():
        meta = json.loads(path.with_suffix(".json").read_text())
        return load_mps(path), bool(meta["converged"])
    state, rep = prepare_initial_choi_state(ModelParams(cfg.J, L, cfg.h), cfg.dmrg, project=cfg.project)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_mps(state, path)
        path.with_suffix(".json").write_text(json.dumps(
            {"energy": rep.energy, "converged": rep.converged, "sweeps": len(rep.sweep_energies)}))
    if not rep.converged:
        log.warning("DMRG did not converge for L=%d (E=%.10f)", L, rep.energy)
    return state, rep.converged


def _measure_point(cfg: SweepConfig, L: int, s0: MpsState, p: float, converged: bool):
    t0 = time.perf_counter()
    p_x = map_px(p, cfg.J, cfg.h) if cfg.mode == "full" else 0.0
    row = {"L": L, "J": cfg.J, "h": cfg.h, "p_zz": p, "p_x": p_x}
    prof = None
    try:
        f = filter_state(s0, p, cfg.J, cfg.trunc, h=cfg.h, mode=cfg.mode)
        m = measure(f, profile=cfg.profiles)
        prof = m.pop("profile", None)
        row.update(m)
        row["max_bond_used"] = f.state.max_bond
        row["total_discarded_weight"] = f.state.discarded_weight
        row["regime"] = classify_regime(row)
        row["status"] = "ok" if converged else "dmrg_unconverged"
    except (ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as e:
        log.error("L=%d p_zz=%g failed: %s", L, p, e)
        for k in ROW_COLUMNS[5:12]:
            row[k] = math.nan
        row["regime"] = ""
        row["status"] = "error"
    return row, (None if prof is None else [float(v) for v in prof.S]), time.perf_counter() - t0


def _row_key(r) -> tuple[int, float]:
    return int(r["L"]), float(r["p_zz"])


def run_sweep(cfg: SweepConfig, progress: Callable[[dict], None] | None = None) -> SweepResult:
    """One preparation per size, then filter + measure every grid point from the same ``|rho0>>``.

    With an output path, the prepared states and finished rows are checkpointed
    so that ``resume=True`` skips completed work.
    """
    paths = output_paths(cfg.output_path)
    journal = paths["ckpt"] / "rows.jsonl" if paths else None
    done: dict[tuple[int, float], dict] = {}
    if journal is not None and cfg.resume and journal.exists():
        for line in journal.read_text().splitlines():
            if line.strip():
                rec = json.loads(line)
                done[_row_key(rec["row"])] = rec
    result = SweepResult(rows=[])
    for L in cfg.L_list:
        todo = [p for p in cfg.p_zz_grid if (L, p) not in done]
        if todo:
            s0, converged = _prepare(cfg, L, paths["ckpt"] if paths else None)
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                futures = [pool.submit(_measure_point, cfg, L, s0, p, converged) for p in todo]
                for fut in futures:
                    row, prof, wall = fut.result()
                    rec = {"row": row, "profile": prof, "wall_time": wall}
                    done[_row_key(row)] = rec
                    if journal is not None:
                        journal.parent.mkdir(parents=True, exist_ok=True)
                        with open(journal, "a") as fh:
                            fh.write(json.dumps(rec) + "\n")
                    if progress:
                        progress(row)
        for p in cfg.p_zz_grid:
            rec = done[(L, p)]
            result.rows.append(rec["row"])
            result.wall_times[(L, p)] = rec["wall_time"]
            if rec.get("profile") is not None:
                result.profiles[(L, p)] = rec["profile"]
    fit_all(result)
    if paths:
        write_outputs(result, cfg, paths)
    return result


# ---------------------------------------------------------------------------
# files


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows_csv(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROW_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in ROW_COLUMNS])


def read_rows_csv(path) -> list[dict]:
    ints = {"L", "max_bond_used"}
    strs = {"regime", "status"}
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for k in ROW_COLUMNS:
                v = rec[k]
                if k in strs:
                    row[k] = v
                elif k in ints:
                    row[k] = int(v) if v not in ("", "nan") else -1
                else:
                    row[k] = float(v)
            rows.append(row)
    return rows


def fits_document(result: SweepResult, cfg: SweepConfig | None = None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "peaks": {str(L): p for L, p in sorted(result.fits.items())},
        "peak_errors": {str(L): e for L, e in sorted(result.fit_errors.items())},
        "extrapolation": None,
    }
    if result.extrapolation is not None:
        a, pc, res = result.extrapolation
        doc["extrapolation"] = {"a": a, "p_c": pc, "residual": res}
    if result.profiles:
        try:
            doc["c_eff"] = ceff_table(result.profiles)
        except FitError as e:
            doc["c_eff_error"] = str(e)
    if cfg is not None:
        doc["config"] = config_document(cfg)
    return doc


def config_document(cfg: SweepConfig) -> dict:
    d = asdict(cfg)
    d.pop("output_path")
    d.pop("resume")
    d.pop("threads")
    return d


def write_outputs(result: SweepResult, cfg: SweepConfig, paths) -> None:
    """Rows CSV, fits JSON, optional profiles JSON and a wall-time sidecar.

    Wall times live in their own file so the other outputs are reproducible byte for byte.
    """
    Path(paths["rows"]).parent.mkdir(parents=True, exist_ok=True)
    write_rows_csv(result.rows, paths["rows"])
    with open(paths["fits"], "w") as fh:
        json.dump(fits_document(result, cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if result.profiles:
        with open(paths["profiles"], "w") as fh:
            json.dump({"schema_version": SCHEMA_VERSION,
                       "profiles": [{"L": L, "p_zz": p, "S": S} for (L, p), S in sorted(result.profiles.items())]},
                      fh, indent=2)
            fh.write("\n")
    with open(paths["timing"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["L", "p_zz", "wall_time"])
        for (L, p), t in sorted(result.wall_times.items()):
            w.writerow([L, repr(p), f"{t:.3f}"])


def read_profiles_json(path) -> dict[tuple[int, float], list[float]]:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise InputError(f"unsupported profiles schema {doc.get('schema_version')}")
    return {(int(e["L"]), float(e["p_zz"])): list(e["S"]) for e in doc["profiles"]}


def cpu_threads() -> int:
    return os.cpu_count() or 1
