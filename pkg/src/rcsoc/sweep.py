"""Phase-diagram scans over (pump strength, cavity detuning).

Each detuning line is processed independently (parallelisable); along a
line the points run in pump order with warm starts, in an up pass, a
down pass, or both (default), so branch tracking follows the adiabatic
paths on both sides of the first-order boundary and rides the
density-wave branch down to its bifurcation.  Fresh multi-seed solves
are computed once per point and compete with the warm candidates by
energy.

Every intermediate result goes into an append-only JSONL checkpoint
keyed by (point, stage); a resumed run recomputes only missing stages
from the checkpointed chain states, which makes the final CSV output
byte-identical no matter how often the sweep was interrupted.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field, asdict, replace
from pathlib import Path

import numpy as np

from ._version import __version__ as _pkg_version
from .bogoliubov import (build_bogoliubov_matrix, excitation_spectrum,
                         goldstone_index, lowest_branches, mode_sector,
                         stability_check)
from .errors import NotConvergedError, SpecMismatchError
from .meanfield import SolverConfig, derive_seed, solve_steady_state
from .model import ModelParams, SteadyState, make_symmetric_params
from .observables import (DEFAULT_TOL_DW, PHASE_COLUMNS, classify_phase,
                          momentum_parity_weights, order_parameters,
                          phase_row)

SPECTRUM_COLUMNS = ("eta", "delta", "branch_index", "re_omega", "im_omega",
                    "even_odd_sector", "goldstone_flag")


@dataclass(frozen=True)
class SweepSpec:
    """Scan definition; everything that affects results enters the spec
    hash (the output directory and worker count do not)."""

    eta_min: float
    eta_max: float
    eta_steps: int
    delta_min: float
    delta_max: float
    delta_steps: int
    solver: SolverConfig = dc_field(default_factory=SolverConfig)
    with_spectrum: bool = False
    warm_start: str = "nearest"     # "off" | "nearest"
    direction: str = "both"         # "up" | "down" | "both"
    tol_dw: float = DEFAULT_TOL_DW
    tol_im: float = 0.1
    basis_cutoff: int = 12
    n_grid: int = 128

    def __post_init__(self):
        if self.eta_steps < 1 or self.delta_steps < 1:
            raise ValueError("steps must be >= 1")
        for v in (self.eta_min, self.eta_max, self.delta_min,
                  self.delta_max):
            if not np.isfinite(v):
                raise ValueError("ranges must be finite")
        if self.direction not in ("up", "down", "both"):
            raise ValueError("direction must be up, down or both")
        if self.warm_start not in ("off", "nearest"):
            raise ValueError("warm_start must be off or nearest")

    @property
    def etas(self) -> np.ndarray:
        if self.eta_steps == 1:
            return np.array([self.eta_min])
        return np.linspace(self.eta_min, self.eta_max, self.eta_steps)

    @property
    def deltas(self) -> np.ndarray:
        if self.delta_steps == 1:
            return np.array([self.delta_min])
        return np.linspace(self.delta_min, self.delta_max,
                           self.delta_steps)

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        d = dict(d)
        d["solver"] = SolverConfig(**d["solver"])
        return cls(**d)

    def spec_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()


def _params_at(spec: SweepSpec, eta: float, delta: float) -> ModelParams:
    return make_symmetric_params(delta, eta)


def _passes(spec: SweepSpec) -> list[str]:
    if spec.warm_start == "off":
        return []
    return {"up": ["up"], "down": ["down"],
            "both": ["up", "down"]}[spec.direction]


# ----------------------------------------------------------------------
# Per-point computations
# ----------------------------------------------------------------------

def _solve_fresh(spec: SweepSpec, i_eta: int, i_delta: int) -> SteadyState:
    p = _params_at(spec, float(spec.etas[i_eta]),
                   float(spec.deltas[i_delta]))
    seed = derive_seed(spec.solver.seed0, i_eta, i_delta)
    cfg = replace(spec.solver, seed0=seed)
    from .model import PlaneWaveBasis
    basis = PlaneWaveBasis(cutoff=spec.basis_cutoff, n_grid=spec.n_grid)
    return solve_steady_state(p, cfg, basis=basis)


def _solve_warm(spec: SweepSpec, i_eta: int, i_delta: int,
                prev: SteadyState) -> SteadyState:
    p = _params_at(spec, float(spec.etas[i_eta]),
                   float(spec.deltas[i_delta]))
    cfg = replace(spec.solver, n_seeds=0, parity_seeds=False,
                  continuation=False,
                  seed0=derive_seed(spec.solver.seed0, i_eta, i_delta))
    return solve_steady_state(p, cfg, init=prev)


def _select(states: list[tuple[str, SteadyState]]) -> tuple[str, SteadyState]:
    """Deterministic winner: converged beats unconverged, then the
    lowest chemical potential rounded to 1e-8, then stage order."""
    def key(item):
        i, (stage, st) = item
        return (st.diverged, not st.converged, round(st.mu, 8), i)

    i, best = min(enumerate(states), key=key)
    return best


def _point_record(spec: SweepSpec, i_eta: int, i_delta: int,
                  state: SteadyState) -> dict:
    eta = float(spec.etas[i_eta])
    delta = float(spec.deltas[i_delta])
    p = _params_at(spec, eta, delta)
    pt = order_parameters(state.spinor, state.cavity, state.mu,
                          eta=eta, delta=delta)
    pt.residual = state.residual
    pt.seed = derive_seed(spec.solver.seed0, i_eta, i_delta)
    pt.converged = state.converged
    pt.diverged = state.diverged

    spectrum_rows = []
    stability = None
    if spec.with_spectrum and state.converged and not state.diverged:
        try:
            mb = build_bogoliubov_matrix(state, p)
            es = excitation_spectrum(mb)
            stab = stability_check(es, tol_im=spec.tol_im)
            stability = stab.stable
            pt.stability_margin = stab.max_imag
            gold = goldstone_index(es, state)
            for b, (re, im, idx) in enumerate(
                    lowest_branches(es, state, n=5)):
                spectrum_rows.append({
                    "eta": eta, "delta": delta, "branch_index": b,
                    "re_omega": re, "im_omega": im,
                    "even_odd_sector": mode_sector(es, idx, state),
                    "goldstone_flag": 1 if idx == gold else 0})
        except NotConvergedError:
            stability = None
    pt.label = classify_phase(pt, tol_dw=spec.tol_dw, stability=stability)
    even, odd = momentum_parity_weights(state.spinor)
    s_z = (np.abs(state.spinor.psi[1]) ** 2
           - np.abs(state.spinor.psi[0]) ** 2)
    j = state.spinor.basis.modes
    momenta = {}
    for comp, idx in (("dn", 0), ("up", 1)):
        for jj in range(-3, 4):
            momenta[f"{comp},{jj}"] = float(abs(
                pt.momenta[idx, np.searchsorted(j, jj)]))
    return {"i_eta": i_eta, "i_delta": i_delta,
            "row": phase_row(pt), "label": pt.label,
            "winding": pt.winding, "mu": state.mu,
            "converged": state.converged, "diverged": state.diverged,
            "abs_alpha_m": abs(state.cavity.alpha_m),
            "abs_beta_p": abs(state.cavity.beta_p),
            "abs_nw_dn": abs(pt.nw_dn), "abs_nw_up": abs(pt.nw_up),
            "abs_nw": abs(pt.nw_dn) + abs(pt.nw_up),
            "parity_purity": max(even, odd),
            "max_sz": float(np.max(np.abs(s_z))),
            "momenta": momenta,
            "spectrum": spectrum_rows}


# ----------------------------------------------------------------------
# Checkpointing
# ----------------------------------------------------------------------

class SweepCheckpoint:
    """Append-only JSONL journal of finished stages.

    Stage keys: ("fresh"|"up"|"down", i_eta, i_delta); each record holds
    the solved state (for warm chains on resume) so that resumed runs
    replay the exact chain an uninterrupted run would have used.
    """

    def __init__(self, path: Path, spec: SweepSpec):
        self.path = Path(path)
        self.spec = spec
        self.records: dict[tuple, dict] = {}
        self.corrupt = 0

    @classmethod
    def open_or_create(cls, path, spec: SweepSpec) -> "SweepCheckpoint":
        ck = cls(Path(path), spec)
        if ck.path.exists():
            ck._load()
        else:
            ck.path.parent.mkdir(parents=True, exist_ok=True)
            with open(ck.path, "w") as fh:
                fh.write(json.dumps({"kind": "header",
                                     "spec": spec.to_dict(),
                                     "spec_hash": spec.spec_hash()})
                         + "\n")
        return ck

    def _load(self):
        with open(self.path) as fh:
            lines = fh.readlines()
        if not lines:
            raise SpecMismatchError("empty checkpoint file")
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise SpecMismatchError(f"unreadable checkpoint header: {exc}")
        if header.get("kind") != "header":
            raise SpecMismatchError("checkpoint does not start with a "
                                    "header record")
        if header.get("spec_hash") != self.spec.spec_hash():
            raise SpecMismatchError(
                "checkpoint belongs to a different sweep spec "
                f"({header.get('spec_hash')} != {self.spec.spec_hash()})")
        for line in lines[1:]:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                key = (rec["stage"], rec["i_eta"], rec["i_delta"])
                rec["state_obj"] = SteadyState.from_dict(rec["state"])
                self.records[key] = rec
            except Exception:
                self.corrupt += 1  # damaged line: stage re-queued

    @classmethod
    def peek_spec(cls, path) -> SweepSpec:
        with open(path) as fh:
            header = json.loads(fh.readline())
        if header.get("kind") != "header":
            raise SpecMismatchError("not a sweep checkpoint")
        spec = SweepSpec.from_dict(header["spec"])
        if header.get("spec_hash") != spec.spec_hash():
            raise SpecMismatchError("checkpoint header hash mismatch")
        return spec

    def get(self, stage: str, i_eta: int, i_delta: int):
        return self.records.get((stage, i_eta, i_delta))

    def put(self, stage: str, i_eta: int, i_delta: int,
            state: SteadyState, record: dict):
        rec = {"kind": "stage", "stage": stage, "i_eta": i_eta,
               "i_delta": i_delta, "state": state.to_dict(),
               "record": record}
        with open(self.path, "a") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        rec["state_obj"] = state
        self.records[(stage, i_eta, i_delta)] = rec


# ----------------------------------------------------------------------
# Line driver
# ----------------------------------------------------------------------

def _canonical_state(st: SteadyState) -> SteadyState:
    """Round-trip through the checkpoint serialisation so in-memory
    chains and resumed chains see bit-identical states (floats survive
    JSON exactly, but the grid reconstruction from coefficients does
    not commute with the solver's internal representation)."""
    return SteadyState.from_dict(json.loads(json.dumps(st.to_dict())))


def _run_line(spec: SweepSpec, i_delta: int,
              existing: dict | None = None, on_record=None):
    """All stages of one detuning line.  ``existing`` maps stage keys to
    checkpoint records; completed stages are never recomputed.
    ``on_record`` (if given) is called after every newly computed stage
    so the coordinator can checkpoint at point granularity."""
    existing = existing or {}
    n = len(spec.etas)
    out = []

    def have(stage, i_eta):
        return existing.get((stage, i_eta, i_delta))

    def done(stage, i_eta, st, point):
        out.append((stage, i_eta, i_delta, st, point))
        if on_record is not None:
            on_record(stage, i_eta, i_delta, st, point)

    states: dict[tuple, SteadyState] = {}
    records: dict[tuple, dict] = {}

    for i_eta in range(n):
        rec = have("fresh", i_eta)
        if rec is not None:
            states[("fresh", i_eta)] = rec["state_obj"]
            records[("fresh", i_eta)] = rec["record"]
        else:
            st = _canonical_state(_solve_fresh(spec, i_eta, i_delta))
            point = _point_record(spec, i_eta, i_delta, st)
            states[("fresh", i_eta)] = st
            records[("fresh", i_eta)] = point
            done("fresh", i_eta, st, point)

    for direction in _passes(spec):
        order = range(n) if direction == "up" else range(n - 1, -1, -1)
        prev: SteadyState | None = None
        for i_eta in order:
            rec = have(direction, i_eta)
            if rec is not None:
                st = rec["state_obj"]
                states[(direction, i_eta)] = st
                records[(direction, i_eta)] = rec["record"]
                prev = st
                continue
            cands = [("fresh", states[("fresh", i_eta)])]
            if prev is not None and not prev.diverged:
                warm = _canonical_state(
                    _solve_warm(spec, i_eta, i_delta, prev))
                cands.append(("warm", warm))
            _, st = _select(cands)
            point = _point_record(spec, i_eta, i_delta, st)
            states[(direction, i_eta)] = st
            records[(direction, i_eta)] = point
            done(direction, i_eta, st, point)
            prev = st

    # final per-point merge across passes (pure function of records)
    merged = []
    stages = _passes(spec) or ["fresh"]
    for i_eta in range(n):
        cands = [(s, states[(s, i_eta)]) for s in stages]
        stage, st = _select(cands)
        merged.append(records[(stage, i_eta)])
    return out, merged


# ----------------------------------------------------------------------
# Result container and writers
# ----------------------------------------------------------------------

@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list  # merged point records, ordered by (i_delta, i_eta)

    def grid_labels(self) -> np.ndarray:
        g = np.empty((self.spec.delta_steps, self.spec.eta_steps),
                     dtype=object)
        for r in self.rows:
            g[r["i_delta"], r["i_eta"]] = r["label"]
        return g

    def phase_csv(self) -> str:
        lines = [",".join(PHASE_COLUMNS)]
        lines += [r["row"] for r in self.rows]
        return "\n".join(lines) + "\n"

    def spectrum_csv(self) -> str:
        lines = [",".join(SPECTRUM_COLUMNS)]
        f = lambda x: f"{x:.12e}"
        for r in self.rows:
            for s in r["spectrum"]:
                lines.append(",".join([
                    f(s["eta"]), f(s["delta"]), str(s["branch_index"]),
                    f(s["re_omega"]), f(s["im_omega"]),
                    s["even_odd_sector"], str(s["goldstone_flag"])]))
        return "\n".join(lines) + "\n"

    def write(self, out_dir, wall_time: float = 0.0):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "phase_points.csv").write_text(self.phase_csv())
        if self.spec.with_spectrum:
            (out / "spectrum.csv").write_text(self.spectrum_csv())
        manifest = {"version": _pkg_version,
                    "spec": self.spec.to_dict(),
                    "spec_hash": self.spec.spec_hash(),
                    "seed0": self.spec.solver.seed0,
                    "n_points": len(self.rows),
                    "wall_time_s": wall_time}
        (out / "manifest.json").write_text(
            json.dumps(manifest, indent=1, sort_keys=True) + "\n")
        return out / "phase_points.csv"


def run_sweep(spec: SweepSpec, out_dir=None, jobs: int = 1) -> SweepResult:
    """Execute (or finish) a sweep; reuses any checkpoint in out_dir."""
    t0 = time.time()
    ck = None
    if out_dir is not None:
        ck = SweepCheckpoint.open_or_create(
            Path(out_dir) / "checkpoint.jsonl", spec)
    existing = ck.records if ck else {}

    merged_by_line = {}
    if jobs > 1 and spec.delta_steps > 1:
        # lines are independent; the coordinator is the single
        # checkpoint writer (line granularity in parallel mode)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                i_d: pool.submit(_run_line, spec, i_d,
                                 {k: v for k, v in existing.items()
                                  if k[2] == i_d})
                for i_d in range(spec.delta_steps)}
            for i_d, fut in futures.items():
                new, merged = fut.result()
                merged_by_line[i_d] = merged
                if ck:
                    for stage, i_eta, i_delta, st, point in new:
                        ck.put(stage, i_eta, i_delta, st, point)
    else:
        on_record = ck.put if ck else None
        for i_d in range(spec.delta_steps):
            _, merged = _run_line(spec, i_d, existing,
                                  on_record=on_record)
            merged_by_line[i_d] = merged

    rows = []
    for i_d in range(spec.delta_steps):
        rows.extend(merged_by_line[i_d])
    result = SweepResult(spec=spec, rows=rows)
    if out_dir is not None:
        result.write(out_dir, wall_time=time.time() - t0)
    return result


def resume_sweep(checkpoint_path, out_dir=None, jobs: int = 1) -> SweepResult:
    """Finish a sweep from its checkpoint; completes only the missing
    stages and rewrites byte-identical outputs."""
    checkpoint_path = Path(checkpoint_path)
    spec = SweepCheckpoint.peek_spec(checkpoint_path)
    return run_sweep(spec, out_dir=out_dir or checkpoint_path.parent,
                     jobs=jobs)


# ----------------------------------------------------------------------
# Boundary detection
# ----------------------------------------------------------------------

@dataclass
class Boundary:
    labels: tuple  # (label_low, label_high) across increasing eta
    order: str  # "first" | "second"
    topological: bool
    points: list  # (eta_mid, delta) polyline vertices


def detect_boundaries(result: SweepResult) -> list[Boundary]:
    """Label changes along each pump line; a boundary is first order
    when the order parameters jump discontinuously (adjacent-point jump
    above five times the local slope scale) and topological when the
    winding flips there."""
    spec = result.spec
    by_point = {(r["i_delta"], r["i_eta"]): r for r in result.rows}
    segments: dict[tuple, Boundary] = {}
    etas = spec.etas
    for i_d in range(spec.delta_steps):
        line = [by_point[(i_d, i_e)] for i_e in range(spec.eta_steps)]
        vals = np.array([r["abs_alpha_m"] + r["abs_nw"] for r in line])
        for i in range(len(line) - 1):
            a, b = line[i], line[i + 1]
            if a["label"] == b["label"]:
                continue
            if "UNCONVERGED" in (a["label"], b["label"]):
                continue
            jump = abs(vals[i + 1] - vals[i])
            neigh = []
            for lo, hi in ((max(0, i - 4), i), (i + 1, min(len(line) - 1,
                                                           i + 5))):
                if hi > lo:
                    neigh.extend(np.abs(np.diff(vals[lo:hi + 1])))
            slope = float(np.median(neigh)) if neigh else 0.0
            wind_flip = a["winding"] != b["winding"]
            first = wind_flip and jump > 5.0 * max(slope, 1e-12)
            key = (tuple(sorted((a["label"], b["label"]))),
                   "first" if first else "second", wind_flip)
            seg = segments.get(key)
            if seg is None:
                seg = Boundary(labels=(a["label"], b["label"]),
                               order=key[1], topological=wind_flip,
                               points=[])
                segments[key] = seg
            seg.points.append((float(0.5 * (etas[i] + etas[i + 1])),
                               float(spec.deltas[i_d])))
    return list(segments.values())


__all__ = ["SweepSpec", "SweepCheckpoint", "SweepResult", "run_sweep",
           "resume_sweep", "Boundary", "detect_boundaries",
           "SPECTRUM_COLUMNS"]
