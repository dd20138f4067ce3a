"""Command-line runner: single pipelines, diagnostics over saved samples, and figure recipes.

Exit codes: 0 success, 1 configuration or parse error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, fields, replace
from itertools import product
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (coupon_expected_shots, coupon_highprob_shots, divergence_report,
                          network_dynamic_range, shot_lower_bound, support_report, unboundedness_witness)
from .groundtruth import ITERATIVE_MAX, cached_ground_state
from .measurement import Dataset
from .neural import NeuralNet
from .pauli import build_tfim
from .simulator import SampleSet, bits_to_str
from .training import TrainingConfig, TrainingTrace, VQEResult, run_vqe, train_dnp, train_uvqnhe

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class ConfigError(ValueError):
    pass


# --- recipes ----------------------------------------------------------------------

@dataclass
class ExperimentRecipe:
    """A grid of training runs sharing one VQE circuit per (n, layers).

    ``grid`` maps TrainingConfig field names to value lists; the cartesian
    product is crossed with ``seeds`` replicates whose seeds are
    ``master_seed + replicate``. With ``shots_from_r`` set, both shot counts at
    each point follow the accuracy bound at that point's ``r`` (floor rounding).
    """

    name: str
    base: dict
    grid: dict[str, list]
    seeds: int = 5
    kinds: tuple[str, ...] = ("dnp",)
    shots_from_r: float | None = None

    def points(self, master_seed: int) -> list[tuple[str, TrainingConfig]]:
        keys = list(self.grid)
        out = []
        for values in product(*(self.grid[k] for k in keys)):
            for rep in range(self.seeds):
                d = dict(self.base, **dict(zip(keys, values)), seed=master_seed + rep)
                if self.shots_from_r is not None:
                    n_shots = shot_lower_bound(d["r"], self.shots_from_r, "floor")
                    d.update(shots_term=n_shots, shots_ansatz=n_shots)
                pid = "_".join(f"{k}={v}" for k, v in zip(keys, values)) or "run"
                try:
                    cfg = TrainingConfig.from_dict(d)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{self.name} point {pid} seed {d['seed']}: {exc}") from exc
                out.append((f"{pid}_seed={d['seed']}", cfg))
        return out


RECIPES = {
    "fig1_divergence": ExperimentRecipe(
        "fig1_divergence",
        base=dict(n=7, layers=1, mode="amp_positive", r=None, epochs=200, lr=0.01,
                  shots_term=500, shots_ansatz=500),
        grid={}, seeds=10),
    "fig3_constrained_sweep": ExperimentRecipe(
        "fig3_constrained_sweep",
        base=dict(n=10, layers=1, mode="amp_bounded", epochs=200, lr=0.01,
                  refresh_samples=True, final_window=20),
        grid={"r": [1.5, 2.5, 3.5, 4.5, 5.5]}, seeds=5, shots_from_r=0.05),
    "fig4a_size_sweep": ExperimentRecipe(
        "fig4a_size_sweep",
        base=dict(layers=1, mode="amp_bounded", r=3.0, epochs=200, lr=0.01,
                  shots_term=10_000, shots_ansatz=10_000),
        grid={"n": [8, 10, 12]}, seeds=5),
    "fig4b_uvqnhe_vs_vqnhe": ExperimentRecipe(
        "fig4b_uvqnhe_vs_vqnhe",
        base=dict(n=12, layers=2, mode="amp_bounded", r=3.0, epochs=200, lr=0.001,
                  shots_term=10_000, shots_ansatz=10_000),
        grid={}, seeds=5, kinds=("dnp", "uvqnhe")),
}


def recipe_with_overrides(name: str, overrides: dict) -> ExperimentRecipe:
    if name not in RECIPES:
        raise ConfigError(f"unknown recipe {name!r}; choose from {sorted(RECIPES)}")
    rec = RECIPES[name]
    base, grid = dict(rec.base), dict(rec.grid)
    meta = {f.name for f in fields(ExperimentRecipe)} - {"name", "base", "grid"}
    known = {f.name for f in fields(TrainingConfig)}
    extra = {}
    for k, v in overrides.items():
        if k in meta:
            extra[k] = tuple(v) if k == "kinds" else v
        elif k in known and isinstance(v, list):
            grid[k] = v
            base.pop(k, None)
        elif k in known:
            base[k] = v
            grid.pop(k, None)
        else:
            raise ConfigError(f"unknown recipe field {k!r}")
    return replace(rec, base=base, grid=grid, **extra)


# --- output helpers ----------------------------------------------------------------

def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else str(x)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def nn_output_rows(trace: TrainingTrace) -> list[list]:
    """Final network value per bit string, flagged measured if the ansatz histogram saw it."""
    F = trace.net.basis_values()
    seen = set(trace.dataset.ansatz.support.tolist())
    return [[i, bits_to_str(i, trace.net.n_in), repr(float(F[i])), int(i in seen)] for i in range(F.size)]


def run_summary(trace: TrainingTrace, cfg: TrainingConfig, e_gs: float | None, vqe_energy: float) -> dict:
    rep = support_report(trace.dataset.ansatz, trace.dataset.real)
    out = {
        "kind": trace.kind, "seed": cfg.seed, "termination": trace.termination,
        "final_energy": _num(trace.final_energy), "final_exact_energy": _num(trace.final_exact_energy),
        "vqe_energy": vqe_energy, "E_gs": e_gs,
        "epoch0_energy": _num(trace.records[0].energy) if trace.records else None,
        "min_energy": _num(np.min(trace.energies)) if trace.records else None,
        "shots_term": None if cfg.exact else cfg.shots_term,
        "shots_ansatz": None if cfg.exact else cfg.shots_ansatz,
        "inclusion_holds": rep.inclusion_holds, "missing_count": len(rep.missing),
    }
    stderrs = [r.stderr for r in trace.records if r.stderr is not None]
    out["shot_sigma"] = float(np.median(stderrs)) if stderrs else None
    if e_gs is not None:
        out["final_minus_egs"] = _num(trace.final_energy - e_gs)
        out["vqe_minus_egs"] = vqe_energy - e_gs
    return out


def _ground_energy(cfg: TrainingConfig) -> float | None:
    if cfg.n > ITERATIVE_MAX:
        return None
    return cached_ground_state(cfg.hamiltonian()).E_gs


@dataclass
class RunResult:
    point: str
    kind: str
    config: TrainingConfig
    trace: TrainingTrace
    vqe: VQEResult
    E_gs: float | None


def iter_runs(recipe: ExperimentRecipe, master_seed: int):
    """Yield one :class:`RunResult` per (grid point, replicate, kind).

    The VQE circuit is optimized once per (n, h, boundary, layers) with the
    master seed and shared by every replicate, so replicates differ only in
    shot noise and network initialization.
    """
    vqe_cache: dict[tuple, VQEResult] = {}
    for pid, cfg in recipe.points(master_seed):
        H = cfg.hamiltonian()
        key = (cfg.n, cfg.h, cfg.boundary, cfg.layers, cfg.ansatz_boundary)
        if key not in vqe_cache:
            vqe_cache[key] = run_vqe(replace(cfg, seed=master_seed), H)
        vqe = vqe_cache[key]
        e_gs = _ground_energy(cfg)
        for kind in recipe.kinds:
            train = train_uvqnhe if kind == "uvqnhe" else train_dnp
            yield RunResult(pid, kind, cfg, train(vqe.theta, cfg, H), vqe, e_gs)


def run_recipe(recipe: ExperimentRecipe, master_seed: int, out: Path, wall_time: bool = False) -> dict:
    """Run every grid point; a diverging point is recorded, never fatal."""
    root = out / recipe.name
    results, vqes = [], {}
    for run in iter_runs(recipe, master_seed):
        pid, kind, cfg, trace = run.point, run.kind, run.config, run.trace
        vqes[f"n={cfg.n},layers={cfg.layers}"] = run.vqe.energy
        _write(root / f"{pid}_{kind}.csv", trace.to_csv(include_wall=wall_time))
        summary = run_summary(trace, cfg, run.E_gs, run.vqe.energy)
        summary.update(point=pid, config=cfg.to_dict())
        if recipe.name == "fig1_divergence":
            _write(root / f"{pid}_nn_outputs.csv",
                   _csv(["index", "bitstring", "f", "measured"], nn_output_rows(trace)))
            _write(root / f"{pid}_samples.json", json.dumps(trace.dataset.to_dict()))
            wit = unboundedness_witness(trace.dataset, trace.net, cfg.hamiltonian())
            summary["witness"] = None if wit is None else [[k, e, z] for k, e, z in wit]
        results.append(summary)

    summary = {"recipe": recipe.name, "version": __version__, "master_seed": master_seed,
               "resolved": {"base": recipe.base, "grid": recipe.grid, "seeds": recipe.seeds,
                            "kinds": list(recipe.kinds), "shots_from_r": recipe.shots_from_r},
               "vqe": vqes,
               "runs": results}
    summary["medians"] = _medians(recipe, results)
    _write(root / "summary.json", json.dumps(summary, indent=2))
    _write(root / "final_energies.csv", _final_table(recipe, results))
    return summary


def _group_key(recipe: ExperimentRecipe, run: dict) -> str:
    parts = [f"{k}={run['config'][k]}" for k in recipe.grid]
    return ",".join(parts + [f"kind={run['kind']}"])


def _medians(recipe: ExperimentRecipe, results: list[dict]) -> dict:
    groups: dict[str, list[dict]] = {}
    for run in results:
        groups.setdefault(_group_key(recipe, run), []).append(run)
    out = {}
    for key, runs in groups.items():
        fin = [r["final_energy"] for r in runs if isinstance(r["final_energy"], float)]
        exa = [r["final_exact_energy"] for r in runs if isinstance(r["final_exact_energy"], float)]
        out[key] = {"median_final_energy": float(np.median(fin)) if fin else None,
                    "median_final_exact_energy": float(np.median(exa)) if exa else None,
                    "runs": len(runs)}
    return out


def _final_table(recipe: ExperimentRecipe, results: list[dict]) -> str:
    header = ["point", "kind", "seed", "n", "r", "shots_term", "final_energy", "final_exact_energy",
              "E_gs", "vqe_energy", "final_minus_egs", "vqe_minus_egs", "termination", "inclusion_flag"]
    rows = []
    for run in results:
        c = run["config"]
        rows.append([run["point"], run["kind"], run["seed"], c["n"], c["r"], run["shots_term"],
                     repr(run["final_energy"]), repr(run["final_exact_energy"]), repr(run["E_gs"]),
                     repr(run["vqe_energy"]), repr(run.get("final_minus_egs")), repr(run.get("vqe_minus_egs")),
                     run["termination"], int(run["inclusion_holds"])])
    return _csv(header, rows)


# --- single pipelines --------------------------------------------------------------------

def _single(kind: str, cfg: TrainingConfig, out: Path, wall_time: bool) -> dict:
    H = cfg.hamiltonian()
    vqe = run_vqe(cfg, H)
    e_gs = _ground_energy(cfg)
    base = {"version": __version__, "config": cfg.to_dict(), "vqe_energy": vqe.energy, "E_gs": e_gs,
            "theta": vqe.theta.tolist(), "vqe_evaluations": vqe.evaluations}
    _write(out / "vqe_trace.csv", _csv(["evaluation", "best_energy"],
                                       [[i, repr(e)] for i, e in enumerate(vqe.trace)]))
    if kind == "vqe":
        _write(out / "summary.json", json.dumps(base, indent=2))
        return base
    train = train_uvqnhe if kind == "uvqnhe" else train_dnp
    trace = train(vqe.theta, cfg, H)
    _write(out / f"{kind}_trace.csv", trace.to_csv(include_wall=wall_time))
    _write(out / "network.json", trace.net.to_json())
    _write(out / "samples.json", json.dumps(trace.dataset.to_dict()))
    base.update(run_summary(trace, cfg, e_gs, vqe.energy))
    _write(out / "summary.json", json.dumps(base, indent=2))
    return base


# --- diagnose ------------------------------------------------------------------------------

def _load_json(path: Path):
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc


def load_samples(path: Path) -> Dataset:
    """A Dataset JSON, or a bare SampleSet JSON treated as the ansatz histogram."""
    d = _load_json(path)
    try:
        if "ansatz" in d:
            return Dataset.from_dict(d)
        ss = SampleSet.from_json_dict(d)
        return Dataset(ss, {}, {})
    except (KeyError, TypeError, ValueError, StopIteration) as exc:
        raise ConfigError(f"{path}:1: not a SampleSet or Dataset ({exc})") from exc


def diagnose(paths: list[Path], checkpoint: Path | None, out: Path, h: float = 1.0,
             boundary: str = "open", delta: float = 0.1) -> dict:
    reports = {}
    for path in paths:
        ds = load_samples(path)
        rep = support_report(ds.ansatz, ds.real)
        entry = {"support": rep.to_dict(),
                 "coupon": {"N_M": len(rep.numerator_support),
                            "expected_shots": coupon_expected_shots(ds.n, len(rep.numerator_support)),
                            "delta": delta,
                            "highprob_shots": coupon_highprob_shots(ds.n, len(rep.numerator_support), delta)}}
        if ds.n <= ITERATIVE_MAX and ds.n >= 2:
            p = cached_ground_state(build_tfim(ds.n, h, boundary)).distribution
            entry["divergence_vs_ground_state"] = divergence_report(p, ds.ansatz.frequencies).to_dict()
        reports[str(path)] = entry
    result = {"version": __version__, "samples": reports}
    if checkpoint is not None:
        try:
            net = NeuralNet.from_dict(_load_json(checkpoint))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{checkpoint}:1: not a network checkpoint ({exc})") from exc
        info = {"mode": net.mode, "r": net.r}
        if net.mode != "phase":
            gamma = network_dynamic_range(net.basis_values())
            info["gamma"] = gamma
            if net.mode == "amp_bounded":
                info["gamma_cap"] = net.r ** 2
                info["within_cap"] = gamma <= net.r ** 2
        result["network"] = info
    _write(out / "diagnostics.json", json.dumps(result, indent=2))
    return result


# --- argument handling ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vqnhe-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed_required=False):
        p.add_argument("--config", type=Path, help="JSON document with config fields")
        p.add_argument("--seed", type=int, required=seed_required)
        p.add_argument("--out", type=Path, default=Path("out"))
        p.add_argument("--exact", action="store_true", help="exact-probability mode")
        p.add_argument("--shots-ansatz", type=int)
        p.add_argument("--shots-term", type=int)
        p.add_argument("--wall-time", action="store_true",
                       help="add a wall_ms column to trace CSVs (breaks byte-identical reruns)")

    for name in ("vqe", "vqnhe", "uvqnhe"):
        common(sub.add_parser(name))
    rp = sub.add_parser("recipe")
    rp.add_argument("name", choices=sorted(RECIPES))
    common(rp, seed_required=True)
    dp = sub.add_parser("diagnose")
    dp.add_argument("samples", nargs="+", type=Path)
    dp.add_argument("--checkpoint", type=Path)
    dp.add_argument("--out", type=Path, default=Path("out"))
    dp.add_argument("--h", type=float, default=1.0)
    dp.add_argument("--boundary", default="open")
    dp.add_argument("--delta", type=float, default=0.1)
    return ap


def _flag_overrides(args) -> dict:
    d = {}
    if args.seed is not None:
        d["seed"] = args.seed
    if args.exact:
        d.update(exact=True, shots_term=None, shots_ansatz=None)
    if args.shots_ansatz is not None:
        d["shots_ansatz"] = args.shots_ansatz
    if args.shots_term is not None:
        d["shots_term"] = args.shots_term
    return d


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "diagnose":
            diagnose(args.samples, args.checkpoint, args.out, args.h, args.boundary, args.delta)
            return EXIT_OK
        overrides = _load_json(args.config) if args.config else {}
        if not isinstance(overrides, dict):
            raise ConfigError(f"{args.config}: top level must be an object")
        overrides.update(_flag_overrides(args))
        if args.command == "recipe":
            seed = overrides.pop("seed")
            recipe = recipe_with_overrides(args.name, overrides)
            recipe.points(seed)
            run_recipe(recipe, seed, args.out, args.wall_time)
            return EXIT_OK
        try:
            cfg = TrainingConfig.from_dict(overrides)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        _single(args.command, cfg, args.out, args.wall_time)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
