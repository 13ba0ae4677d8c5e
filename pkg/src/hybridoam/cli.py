"""Batch command-line front-end.

Subcommands run the configured experiment end-to-end and write JSON (and
CSV count tables) into the --out directory.  Precedence: built-in defaults,
then the --config JSON file, then explicit flags.  Every output carries a
provenance block (command, effective config, seed, package version) and
floats are serialized at 17 significant digits, so identical config + seed
gives byte-identical files.

Exit codes: 0 success, 2 usage/config errors, 1 simulation or
reconstruction failures (with an error JSON on stdout).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import bell
from . import budget as budget_mod
from . import elements as el
from . import measurement as ms
from . import source as src
from . import tomography as tg
from .states import matrix_to_json

_DEFAULT_DURATIONS = {"tomography": 15.0, "chsh": 60.0, "fringe": 15.0}
_DEFAULT_RATE = 100.0
_DEFAULT_SEED = 0
_DEFAULT_RESAMPLES = 100
_FRINGE_POINTS = 16


class ConfigError(ValueError):
    """Bad config file or flag combination (usage error, exit 2)."""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        # normalize to 17 significant digits for byte-stable output
        return float(f"{float(obj):.17g}")
    return obj


def write_json(payload: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    known = {"noise", "budget", "rate_cps", "durations", "seed"}
    extra = set(cfg) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    return cfg


def _parse_noise(spec) -> src.NoiseModel:
    if spec is None:
        return src.noise_preset("ideal")
    if isinstance(spec, src.NoiseModel):
        return spec
    if isinstance(spec, dict):
        try:
            return src.NoiseModel.from_dict(spec)
        except ValueError as exc:
            raise ConfigError(f"bad noise model: {exc}") from exc
    text = str(spec).strip()
    if text.startswith("{"):
        try:
            return src.NoiseModel.from_dict(json.loads(text))
        except (json.JSONDecodeError, ValueError) as exc:
            raise ConfigError(f"bad inline noise JSON: {exc}") from exc
    try:
        return src.noise_preset(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


class _Resolved:
    """Effective settings after merging defaults, config file, and flags."""

    def __init__(self, args):
        cfg = _load_config(args.config)
        self.seed = (
            args.seed
            if args.seed is not None
            else int(cfg.get("seed", _DEFAULT_SEED))
        )
        self.rate_cps = (
            args.rate_cps
            if args.rate_cps is not None
            else float(cfg.get("rate_cps", _DEFAULT_RATE))
        )
        if self.rate_cps < 0:
            raise ConfigError("rate_cps must be non-negative")
        durations = dict(_DEFAULT_DURATIONS)
        cfg_durations = cfg.get("durations", {})
        if not isinstance(cfg_durations, dict):
            raise ConfigError('"durations" must be an object')
        durations.update({k: float(v) for k, v in cfg_durations.items()})
        self.durations = durations
        self.duration_flag = args.duration_s
        noise_spec = args.noise if args.noise is not None else cfg.get("noise")
        self.noise = _parse_noise(noise_spec)
        self.deterministic = bool(args.deterministic_transferrers)
        self.exact = bool(getattr(args, "exact", False))
        self.resamples = (
            args.resamples if args.resamples is not None else _DEFAULT_RESAMPLES
        )
        if self.resamples < 0:
            raise ConfigError("resamples must be non-negative")
        try:
            b = budget_mod.RateBudget.from_dict(cfg.get("budget", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad budget config: {exc}") from exc
        if self.deterministic:
            b = budget_mod.RateBudget(
                **{
                    **b.as_dict(),
                    "deterministic_prep": True,
                    "deterministic_det": True,
                }
            )
        self.budget = b
        self.out = Path(args.out)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {self.out}: {exc}") from exc

    def duration_for(self, command: str) -> float:
        if self.duration_flag is not None:
            return float(self.duration_flag)
        return self.durations[command]

    def mode(self) -> str:
        return el.DETERMINISTIC if self.deterministic else el.PROBABILISTIC

    def provenance(self, command: str, **extras) -> dict:
        eff = {
            "noise": self.noise.as_dict(),
            "rate_cps": self.rate_cps,
            "seed": self.seed,
            "deterministic_transferrers": self.deterministic,
            "exact": self.exact,
        }
        eff.update(extras)
        return {
            "command": command,
            "config": eff,
            "seed": self.seed,
            "version": __version__,
        }


def _prepare(res: _Resolved):
    rho = src.apply_noise(src.singlet(), res.noise)
    return src.hybrid_state(rho, res.mode())


def _point_metrics(run: tg.TomographyRun) -> dict:
    target = src.hybrid_singlet_ket()
    return {
        "fidelity": tg.fidelity(run.rho_mle, target),
        "concurrence": tg.concurrence(run.rho_mle),
        "linear_entropy": tg.linear_entropy(run.rho_mle),
        "uncertainties": None,
    }


def _cmd_tomography(res: _Resolved, args) -> dict:
    duration = res.duration_for("tomography")
    if args.counts_csv:
        records = ms.read_counts_csv(args.counts_csv)
        success = None
    else:
        rho, success = _prepare(res)
        records = tg.simulate_tomography(
            rho, res.rate_cps, duration, res.seed, exact=res.exact
        )
        ms.write_counts_csv(records, res.out / "tomography_counts.csv")
    run = tg.reconstruct(records)
    if res.resamples > 0:
        metrics = tg.metric_uncertainties(
            records, n_resamples=res.resamples, seed=res.seed
        ).as_dict()
    else:
        metrics = _point_metrics(run)
    payload = {
        "rho_linear": matrix_to_json(run.rho_linear),
        "rho_mle": matrix_to_json(run.rho_mle),
        "metrics": metrics,
        "loglik": run.loglik,
        "converged": run.converged,
        "success_probability": success,
        "provenance": res.provenance(
            "tomography", duration_s=duration, resamples=res.resamples
        ),
    }
    write_json(payload, res.out / "tomography.json")
    return payload


def _cmd_fringe(res: _Resolved, args) -> dict:
    duration = res.duration_for("fringe")
    rho, _ = _prepare(res)
    grid = np.linspace(0.0, 2.0 * np.pi, args.points, endpoint=False)
    records = ms.fringe_scan_records(
        rho,
        args.bob,
        grid,
        res.rate_cps,
        duration,
        seed=res.seed,
        exact=res.exact,
    )
    points = [(float(t), float(r.counts)) for t, r in zip(grid, records)]
    n0, vis, phi0 = ms.fit_fringe(points)
    ms.write_counts_csv(records, res.out / "fringe_counts.csv")
    payload = {
        "bob": args.bob,
        "n0": n0,
        "visibility": vis,
        "phi0": phi0,
        "visibility_minmax": ms.visibility_minmax(points),
        "points": [[t, c] for t, c in points],
        "provenance": res.provenance(
            "fringe", duration_s=duration, bob=args.bob, points=args.points
        ),
    }
    write_json(payload, res.out / "fringe.json")
    return payload


def _cmd_chsh(res: _Resolved, args) -> dict:
    duration = res.duration_for("chsh")
    rho, _ = _prepare(res)
    if res.exact:
        result = bell.chsh_exact(rho)
    else:
        result = bell.chsh_empirical(
            rho, rate_cps=res.rate_cps, duration_s=duration, seed=res.seed
        )
    payload = result.as_dict()
    payload["provenance"] = res.provenance("chsh", duration_s=duration)
    write_json(payload, res.out / "chsh.json")
    return payload


def _cmd_budget(res: _Resolved, args) -> dict:
    report = budget_mod.budget_report(res.budget)
    payload = dict(report)
    payload["provenance"] = res.provenance("budget")
    write_json(payload, res.out / "budget.json")
    print(budget_mod.format_report(report))
    return payload


def _cmd_pipeline(res: _Resolved, args) -> dict:
    rho, success = _prepare(res)
    records = tg.simulate_tomography(
        rho, res.rate_cps, res.durations["tomography"], res.seed, exact=res.exact
    )
    ms.write_counts_csv(records, res.out / "pipeline_tomography_counts.csv")
    run = tg.reconstruct(records)
    if res.resamples > 0:
        metrics = tg.metric_uncertainties(
            records, n_resamples=res.resamples, seed=res.seed
        ).as_dict()
    else:
        metrics = _point_metrics(run)
    fringes = {}
    for scan_index, bob in enumerate(("+2", "h")):
        grid = np.linspace(0.0, 2.0 * np.pi, _FRINGE_POINTS, endpoint=False)
        recs = ms.fringe_scan_records(
            rho,
            bob,
            grid,
            res.rate_cps,
            res.durations["fringe"],
            seed=res.seed,
            scan_index=scan_index,
            exact=res.exact,
        )
        pts = [(float(t), float(r.counts)) for t, r in zip(grid, recs)]
        n0, vis, phi0 = ms.fit_fringe(pts)
        fringes[bob] = {
            "n0": n0,
            "visibility": vis,
            "phi0": phi0,
            "visibility_minmax": ms.visibility_minmax(pts),
            "points": [[t, c] for t, c in pts],
        }
    if res.exact:
        chsh_result = bell.chsh_exact(rho)
    else:
        chsh_result = bell.chsh_empirical(
            rho,
            rate_cps=res.rate_cps,
            duration_s=res.durations["chsh"],
            seed=res.seed,
        )
    payload = {
        "success_probability": success,
        "budget": budget_mod.budget_report(res.budget),
        "tomography": {
            "rho_linear": matrix_to_json(run.rho_linear),
            "rho_mle": matrix_to_json(run.rho_mle),
            "metrics": metrics,
            "loglik": run.loglik,
            "converged": run.converged,
        },
        "fringe": fringes,
        "chsh": chsh_result.as_dict(),
        "provenance": res.provenance("pipeline", resamples=res.resamples),
    }
    write_json(payload, res.out / "pipeline.json")
    return payload


_COMMANDS = {
    "tomography": _cmd_tomography,
    "fringe": _cmd_fringe,
    "chsh": _cmd_chsh,
    "budget": _cmd_budget,
    "pipeline": _cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridoam",
        description="Simulate the hybrid polarization-OAM entanglement bench.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="global RNG seed")
        p.add_argument(
            "--duration-s", type=float, default=None,
            help="seconds per setting (default 15, chsh 60)",
        )
        p.add_argument("--rate-cps", type=float, default=None,
                       help="detected pair rate (default 100)")
        p.add_argument("--noise", default=None,
                       help='noise preset name or inline JSON {"werner_p":...}')
        p.add_argument("--deterministic-transferrers", action="store_true",
                       help="unit-success transferrers in state prep and budget")
        p.add_argument("--resamples", type=int, default=None,
                       help="bootstrap resamples for uncertainties (0 disables)")

    p = sub.add_parser("tomography", help="36-setting reconstruction")
    common(p)
    p.add_argument("--exact", action="store_true", help="expected counts, no noise")
    p.add_argument("--counts-csv", default=None,
                   help="reconstruct from an existing count table")

    p = sub.add_parser("fringe", help="analyzer rotation scan")
    common(p)
    p.add_argument("--exact", action="store_true", help="expected counts, no noise")
    p.add_argument("--bob", default="+2", help="Bob projector label (default +2)")
    p.add_argument("--points", type=int, default=_FRINGE_POINTS,
                   help="grid points over one period")

    p = sub.add_parser("chsh", help="S measurement")
    common(p)
    p.add_argument("--exact", action="store_true", help="Born-rule correlations")

    p = sub.add_parser("budget", help="rate bookkeeping")
    common(p)

    p = sub.add_parser("pipeline", help="tomography + fringes + chsh + budget")
    common(p)
    p.add_argument("--exact", action="store_true", help="expected counts, no noise")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        res = _Resolved(args)
    except ConfigError as exc:
        parser.error(str(exc))  # exits 2
    try:
        _COMMANDS[args.command](res, args)
    except Exception as exc:  # runtime failure contract: error JSON, exit 1
        record = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(record, sort_keys=True))
        return 1
    return 0
