"""Scenario-driven command line front end.

Usage::

    condfield condition scenario.json
    condfield m scenario.json
    condfield sample scenario.json --law conditional -n 100 --seed 3
    condfield verify scenario.json
    condfield demo-minfinity --ratio 2 --max-bumps 6 [scenario.json]

Exit codes: 0 success, 2 invalid config, 3 observation outside the support,
4 identity check failed, 5 statistical check failed. The output directory
comes from the scenario's ``outputs`` field unless ``CONDFIELD_OUTPUT_DIR``
is set.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import montecarlo as mc
from .core import CUTOFF, compute_m_opnorm, condition, factorize, verify_identities
from .errors import ConditioningError
from .grid import Grid, SubsetMask, build_grid, mask_from_intervals, restrict
from .kernels import PSD_TOLERANCE, CovarianceMatrix, KernelSpec, assemble, validate
from .oracle import ORACLE_MAX_T, schur_condition

log = logging.getLogger("condfield")

SCHEMA_VERSION = "1.0"
OUTPUT_ENV = "CONDFIELD_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_IN_Y0 = 3
EXIT_IDENTITY = 4
EXIT_STATISTICAL = 5


class ConfigError(ConditioningError):
    def __init__(self, message: str):
        super().__init__("config-invalid", message)


@dataclass
class Scenario:
    grid: Grid
    mask: SubsetMask
    kernel: KernelSpec
    cov: CovarianceMatrix
    observation: object
    psd_tol: float = PSD_TOLERANCE
    cutoff: float = CUTOFF
    identity_tol: float = 1e-8
    y0_tol: float = 1e-6
    n_outer: int = 2000
    n_inner: int = 50
    seed: int = 0
    scales: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    rejection: Optional[dict] = None
    outputs: Path = Path("outputs")
    cov_scale: float = 1.0
    base_dir: Path = Path(".")


def _num(d, key, default, positive=True, integer=False, where=""):
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}{key} must be a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{where}{key} must be an integer")
    if positive and not v > 0:
        raise ConfigError(f"{where}{key} must be positive")
    return int(v) if integer else float(v)


def load_scenario(path, require_observation: bool = False) -> Scenario:
    """Parse and validate a JSON scenario file."""
    path = Path(path)
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})")
    return scenario_from_dict(cfg, base_dir=path.parent, require_observation=require_observation)


def scenario_from_dict(cfg: dict, base_dir=".", require_observation: bool = False) -> Scenario:
    base_dir = Path(base_dir)
    if not isinstance(cfg, dict):
        raise ConfigError("top level must be a JSON object")
    try:
        g = cfg["grid"]
        grid = build_grid(g["t_min"], g["t_max"], g["n"])
    except KeyError as exc:
        raise ConfigError(f"grid.{exc.args[0]} is missing")
    except TypeError:
        raise ConfigError("grid must be an object with t_min, t_max, n")
    except ConditioningError as exc:
        raise ConfigError(f"grid: {exc}")
    if "subset" not in cfg:
        raise ConfigError("subset is missing")
    try:
        mask = mask_from_intervals(grid, cfg["subset"])
    except (ConditioningError, TypeError, ValueError) as exc:
        raise ConfigError(f"subset: {exc}")

    kcfg = dict(cfg.get("kernel") or {})
    if "matrix_file" in kcfg:
        f = base_dir / kcfg["matrix_file"]
        if not f.exists():
            raise ConfigError(f"kernel.matrix_file {f} does not exist")
        kcfg["matrix_file"] = str(f)
    tol = cfg.get("tolerances", {})
    psd_tol = _num(tol, "psd", PSD_TOLERANCE, where="tolerances.")
    try:
        spec = KernelSpec.from_dict(kcfg)
        cov = assemble(spec, grid, mask, psd_tolerance=psd_tol)
    except ConditioningError as exc:
        raise ConfigError(f"kernel: {exc}")
    except TypeError as exc:
        raise ConfigError(f"kernel: {exc}")
    report = validate(cov)
    if not report.passed:
        raise ConfigError(
            f"kernel: covariance fails validation (min eigenvalue {report.min_eigenvalue:.3g}, "
            f"Schwarz violation {report.schwarz_violation:.3g})"
        )

    obs = cfg.get("observation")
    if isinstance(obs, str) and not re.fullmatch(r"\s*sample\(\s*-?\d+\s*\)\s*", obs):
        f = base_dir / obs
        if not f.exists():
            raise ConfigError(f"observation file {f} does not exist")
        obs = f
    if require_observation and obs is None:
        raise ConfigError("observation is missing")

    m = cfg.get("mc", {})
    cont = cfg.get("continuity", {})
    scales = cont.get("scales", [1e-1, 1e-2, 1e-3])
    if not isinstance(scales, list) or not all(isinstance(s, (int, float)) and s >= 0 for s in scales):
        raise ConfigError("continuity.scales must be a list of nonnegative numbers")
    rej = cfg.get("rejection")
    if rej is not None:
        for key in ("points", "values", "delta"):
            if key not in rej:
                raise ConfigError(f"rejection.{key} is missing")
    outputs = os.environ.get(OUTPUT_ENV) or cfg.get("outputs", "outputs")
    outputs = Path(outputs)
    if not outputs.is_absolute() and not os.environ.get(OUTPUT_ENV):
        outputs = base_dir / outputs
    fault = cfg.get("fault_injection", {})

    return Scenario(
        grid=grid,
        mask=mask,
        kernel=spec,
        cov=cov,
        observation=obs,
        psd_tol=psd_tol,
        cutoff=_num(tol, "cutoff", CUTOFF, where="tolerances."),
        identity_tol=_num(tol, "identity", 1e-8, where="tolerances."),
        y0_tol=_num(tol, "y0", 1e-6, where="tolerances."),
        n_outer=_num(m, "n_outer", 2000, integer=True, where="mc."),
        n_inner=_num(m, "n_inner", 50, integer=True, where="mc."),
        seed=_num(m, "seed", 0, positive=False, integer=True, where="mc."),
        scales=[float(s) for s in scales],
        rejection=rej,
        outputs=outputs,
        cov_scale=_num(fault, "cond_cov_scale", 1.0, where="fault_injection."),
        base_dir=base_dir,
    )


def resolve_observation(sc: Scenario) -> np.ndarray:
    obs = sc.observation
    if obs is None:
        raise ConfigError("observation is missing")
    if isinstance(obs, str):
        seed = int(re.search(r"-?\d+", obs).group())
        factor = factorize(sc.cov, sc.mask, sc.cutoff)
        return restrict(mc.sample_prior(factor, 1, seed).paths[0], sc.mask)
    if isinstance(obs, Path):
        with open(obs, newline="") as fh:
            vals = [float(v) for row in csv.reader(fh) for v in row if v.strip()]
        y = np.array(vals)
    else:
        try:
            y = np.asarray(obs, dtype=float).ravel()
        except (TypeError, ValueError):
            raise ConfigError("observation must be a list of numbers, a CSV path or 'sample(seed)'")
    if y.size != sc.mask.size:
        raise ConfigError(f"observation has {y.size} values but the subset has {sc.mask.size} grid points")
    return y


# ----------------------------------------------------------------------------
# writers

def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_csv(path, rows, header=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header is not None:
            w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_json(path, obj):
    payload = {"schema_version": SCHEMA_VERSION, **obj}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return path


def _outdir(sc: Scenario) -> Path:
    sc.outputs.mkdir(parents=True, exist_ok=True)
    return sc.outputs


# ----------------------------------------------------------------------------
# commands

def cmd_condition(sc: Scenario, plots: bool = True) -> int:
    y = resolve_observation(sc)
    law = condition(sc.cov, sc.mask, y, tol=sc.y0_tol, cutoff=sc.cutoff, seed=sc.seed)
    ident = verify_identities(law, sc.cov, sc.mask, sc.identity_tol)
    out = _outdir(sc)
    t = sc.grid.points
    write_csv(out / "mean.csv", zip(t, law.mean), header=["t", "mean"])
    write_csv(out / "cond_cov.csv", law.cond_cov)
    lo, hi = law.envelope(2.0)
    write_csv(out / "envelope.csv", zip(t, law.mean, lo, hi), header=["t", "mean", "lower", "upper"])
    write_json(
        out / "report.json",
        {
            "kernel": sc.kernel.to_dict(),
            "grid_size": sc.grid.size,
            "subset_size": sc.mask.size,
            "m_report": law.m_report.to_dict(),
            "projection_residual": law.projection_residual,
            "identities": ident.to_dict(),
        },
    )
    if plots:
        from .plotting import plot_conditional_law

        draws = mc.sample_conditional(law, 5, sc.seed).paths
        plot_conditional_law(out / "condition.png", t, law.mean, lo, hi, t[sc.mask.indices], law.y_projected, draws)
    log.info("conditioned on %d nodes; identities %s", sc.mask.size, "pass" if ident.passed else "FAIL")
    return EXIT_OK if ident.passed else EXIT_IDENTITY


def cmd_m(sc: Scenario, search_budget: int = 64) -> int:
    report = compute_m_opnorm(sc.cov, sc.mask, search_budget, sc.seed, sc.cutoff)
    write_json(_outdir(sc) / "m_report.json", {"kernel": sc.kernel.to_dict(), **report.to_dict()})
    print(json.dumps(report.to_dict()))
    return EXIT_OK


def cmd_sample(sc: Scenario, law: str = "prior", n: int = 10, seed: int = 0, plots: bool = True) -> int:
    if law == "prior":
        batch = mc.sample_prior(factorize(sc.cov, sc.mask, sc.cutoff), n, seed)
    else:
        y = resolve_observation(sc)
        cl = condition(sc.cov, sc.mask, y, tol=sc.y0_tol, cutoff=sc.cutoff, seed=sc.seed)
        batch = mc.sample_conditional(cl, n, seed)
    out = _outdir(sc)
    write_csv(out / "samples.csv", batch.paths, header=[_fmt(t) for t in sc.grid.points])
    if plots and batch.n:
        from .plotting import plot_samples

        plot_samples(out / "samples.png", sc.grid.points, batch.paths, title=batch.law_tag)
    return EXIT_OK


def default_functionals(sc: Scenario) -> list:
    n = sc.grid.size
    w = np.random.default_rng(sc.seed).standard_normal(n) / np.sqrt(n)
    return [mc.constant(1.0), mc.coordinate(n - 1), mc.squared_coordinate(n - 1), mc.tanh_linear(w)]


def cmd_verify(sc: Scenario, plots: bool = True) -> int:
    warnings = []
    result = {}
    ok = True
    if sc.n_outer < 2:
        warnings.append("stderr-unreliable: mc.n_outer < 2")

    reps = mc.check_disintegration(
        sc.cov, sc.mask, default_functionals(sc), sc.n_outer, sc.n_inner, sc.seed, sc.cutoff, sc.cov_scale
    )
    result["disintegration"] = [r.to_dict() for r in reps]
    ok &= all(r.passed for r in reps)

    y = resolve_observation(sc) if sc.observation is not None else None
    if y is None:
        factor = factorize(sc.cov, sc.mask, sc.cutoff)
        y = restrict(mc.sample_prior(factor, 1, sc.seed).paths[0], sc.mask)
    law = condition(sc.cov, sc.mask, y, tol=sc.y0_tol, cutoff=sc.cutoff, seed=sc.seed)
    gap = mc.total_variance_gap(law, sc.cov)
    result["total_variance"] = {"gap": gap, "pass": gap <= sc.identity_tol}
    ok &= gap <= sc.identity_tol
    ident = verify_identities(law, sc.cov, sc.mask, sc.identity_tol)
    result["identities"] = ident.to_dict()
    ok &= ident.passed

    cont = mc.check_weak_continuity(sc.cov, sc.mask, law.y_projected, sc.scales, sc.seed,
                                    tol=sc.identity_tol, y_tol=sc.y0_tol, cutoff=sc.cutoff)
    result["continuity"] = cont.to_dict()
    ok &= cont.passed

    if sc.grid.size <= ORACLE_MAX_T:
        o = schur_condition(sc.cov, sc.mask, law.y_projected)
        ynorm = max(1.0, float(np.max(np.abs(law.y_projected))))
        dm = float(np.max(np.abs(o.mean - law.mean)))
        dc = float(np.max(np.abs(o.cov - law.cond_cov)))
        passed = dm <= sc.identity_tol * ynorm and dc <= sc.identity_tol
        result["oracle"] = {"method": o.method_tag, "mean_diff": dm, "cov_diff": dc, "pass": passed}
        ok &= passed
    else:
        result["oracle"] = {"skipped": f"grid larger than {ORACLE_MAX_T}"}

    if sc.rejection is not None:
        rj = sc.rejection
        probe = [sc.grid.index_of(p) for p in rj["points"]]
        t_idx = [sc.grid.index_of(p) for p in rj.get("t_points", [sc.grid.points[-1]])]
        reps = mc.rejection_oracle(sc.cov, sc.mask, rj["values"], float(rj["delta"]), probe,
                                   int(rj.get("n", 200000)), sc.seed, t_idx, sc.cutoff)
        result["rejection"] = [r.to_dict() for r in reps]
        ok &= all(r.passed for r in reps)

    result["warnings"] = warnings
    result["all_pass"] = bool(ok)
    out = _outdir(sc)
    write_json(out / "verify.json", result)
    if plots:
        from .plotting import plot_z_scores

        plot_z_scores(out / "verify.png", result["disintegration"] + result.get("rejection", []))
    for w in warnings:
        log.warning(w)
    return EXIT_OK if ok else EXIT_STATISTICAL


DEMO_DEFAULT = {"grid": {"t_min": 0.0, "t_max": 1.0, "n": 101}, "subset": [[0.0, 0.5]]}


def cmd_demo_minfinity(ratio: float, max_bumps: int, sc_grid: Grid, sc_mask: SubsetMask, outputs: Path,
                       seed: int = 0, plots: bool = True) -> int:
    if not ratio > 1:
        raise ConfigError("--ratio must exceed 1")
    if max_bumps < 1:
        raise ConfigError("--max-bumps must be at least 1")
    try:
        rows = mc.divergence_demo(ratio, range(1, max_bumps + 1), sc_grid, sc_mask, seed)
    except ConditioningError as exc:
        raise ConfigError(str(exc))
    table = [r.to_dict() for r in rows]
    outputs.mkdir(parents=True, exist_ok=True)
    write_json(outputs / "divergence.json", {"height_ratio": ratio, "rows": table})
    cols = ["n_bumps", "m_delta", "y_norm", "mean_norm", "expected_mean_norm"]
    write_csv(outputs / "divergence.csv", [[r[c] for c in cols] for r in table], header=cols)
    if plots:
        from .plotting import plot_divergence

        plot_divergence(outputs / "divergence.png", table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="condfield", description=__doc__.split("\n")[0],
                                formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        if config_required:
            sp.add_argument("config", help="scenario JSON file")
        else:
            sp.add_argument("config", nargs="?", help="scenario JSON file (grid and subset are read)")
        sp.add_argument("--no-plots", dest="plots", action="store_false", help="skip figure rendering")

    common(sub.add_parser("condition", help="conditional mean and covariance"))
    sp = sub.add_parser("m", help="continuity ratio report")
    sp.add_argument("config")
    sp.add_argument("--search-budget", type=int, default=64)
    sp = sub.add_parser("sample", help="draw prior or conditional paths")
    common(sp)
    sp.add_argument("--law", choices=["prior", "conditional"], default="prior")
    sp.add_argument("-n", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    common(sub.add_parser("verify", help="Monte Carlo and oracle verification"))
    sp = sub.add_parser("demo-minfinity", help="divergence table for the bumps family")
    common(sp, config_required=False)
    sp.add_argument("--ratio", type=float, default=2.0)
    sp.add_argument("--max-bumps", type=int, default=6)
    sp.add_argument("--outputs", default=None, help="output directory when no config is given")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "condition":
            return cmd_condition(load_scenario(args.config, require_observation=True), args.plots)
        if args.command == "m":
            return cmd_m(load_scenario(args.config), args.search_budget)
        if args.command == "sample":
            if args.n < 0:
                raise ConfigError("-n must be nonnegative")
            sc = load_scenario(args.config, require_observation=args.law == "conditional")
            return cmd_sample(sc, args.law, args.n, args.seed, args.plots)
        if args.command == "verify":
            return cmd_verify(load_scenario(args.config), args.plots)
        if args.command == "demo-minfinity":
            if args.config:
                with open(args.config, encoding="utf-8") as fh:
                    try:
                        cfg = json.load(fh)
                    except json.JSONDecodeError as exc:
                        raise ConfigError(f"{args.config}: not valid JSON ({exc})")
                base = Path(args.config).parent
            else:
                cfg, base = dict(DEMO_DEFAULT), Path(".")
            try:
                g = cfg.get("grid", DEMO_DEFAULT["grid"])
                grid = build_grid(g["t_min"], g["t_max"], g["n"])
                mask = mask_from_intervals(grid, cfg.get("subset", DEMO_DEFAULT["subset"]))
            except (ConditioningError, KeyError, TypeError) as exc:
                raise ConfigError(f"grid/subset: {exc}")
            outputs = os.environ.get(OUTPUT_ENV) or args.outputs or cfg.get("outputs", "outputs")
            outputs = Path(outputs)
            if not outputs.is_absolute() and args.config and not (os.environ.get(OUTPUT_ENV) or args.outputs):
                outputs = base / outputs
            seed = cfg.get("mc", {}).get("seed", 0)
            return cmd_demo_minfinity(args.ratio, args.max_bumps, grid, mask, outputs, seed, args.plots)
    except ConditioningError as exc:
        print(f"condfield: error: {exc}", file=sys.stderr)
        if exc.code == "y-not-in-Y0":
            return EXIT_NOT_IN_Y0
        return EXIT_CONFIG
    return EXIT_CONFIG


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
