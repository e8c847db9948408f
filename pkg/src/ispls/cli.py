"""Command-line interface: ``ispls {fit,cv,simulate,benchmark,ooi,replay}``.

Exit codes: 0 on success (including a non-converged fit, which is recorded),
2 for usage or data errors, 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __name__ as _pkg
from .benchmark import METHODS, BenchmarkSettings, ooi_study, run_benchmark
from .data import DataError, MultiStudyData, PenaltySpec, build_cross_products, standardize
from .io import read_json, read_manifest, write_json, write_matrix, write_studies
from .simulation import Scenario, ScenarioSpec, gen_scenario
from .solver import IsplsConfig, SolverError, solve_directions, study_models
from .tuning import TuningGrid, cross_validate, default_grid

EXIT_OK, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("fit", "cv", "simulate", "benchmark", "ooi")


@dataclass
class RunConfig:
    """Every resolved option of one command; written to and read from run.json."""

    command: str
    out: str
    manifest: str | None = None
    model: str = "homo"
    contrast: str = "mag"
    mu1: float = 0.0
    mu2: float = 0.0
    kappa: float = 0.5
    a: float = 6.0
    b: float | None = None
    tau2: float = 0.5
    max_iter: int = 100
    tol: float = 1e-4
    standardize: bool = True
    folds: int = 5
    seed: int = 0
    mu1_grid: list | None = None
    mu2_grid: list | None = None
    scenario: list | None = None
    rho: float = 0.2
    n: int = 40
    p: int = 100
    L: int = 4
    q: int = 5
    replicates: int = 1
    methods: list | None = None
    workers: int | None = None
    resamples: int = 100
    split: float = 0.75

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise DataError(f"unknown command {self.command!r}")
        if self.command in ("fit", "cv", "ooi") and not self.manifest:
            raise DataError(f"{self.command} needs --manifest")
        if self.model not in ("homo", "hetero") or self.contrast not in ("mag", "sign"):
            raise DataError("--model must be homo|hetero and --contrast mag|sign")
        for m in self.methods or []:
            if m not in METHODS:
                raise DataError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        for s in self.scenario or []:
            if s not in Scenario.__members__:
                raise DataError(f"unknown scenario {s!r}")
        if self.folds < 2:
            raise DataError("--folds must be >= 2")
        # validates the penalty fields up front
        try:
            self.penalty()
        except ValueError as exc:
            raise DataError(str(exc)) from None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise DataError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    def penalty(self) -> PenaltySpec:
        return PenaltySpec(
            model=self.model, contrast=self.contrast, mu1=self.mu1, mu2=self.mu2,
            a=self.a, b=self.b, tau2=self.tau2, kappa=self.kappa,
        )

    def solver(self, spec: PenaltySpec | None = None) -> IsplsConfig:
        return IsplsConfig(penalty=spec or self.penalty(), outer_max_iter=self.max_iter, outer_tol=self.tol)

    def scenarios(self) -> list[ScenarioSpec]:
        return [
            ScenarioSpec(scenario=s, L=self.L, p=self.p, q=self.q, n=self.n, rho=self.rho, seed=self.seed)
            for s in (self.scenario or ["S1"])
        ]


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _names(text: str) -> list:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ispls", description="Integrative sparse PLS across studies.")
    sub = parser.add_subparsers(dest="command", required=True)

    def penalty_flags(p):
        p.add_argument("--manifest", required=True, help="JSON study manifest")
        p.add_argument("--model", choices=["homo", "hetero"], default="homo")
        p.add_argument("--contrast", choices=["mag", "sign"], default="mag")
        p.add_argument("--kappa", type=float, default=0.5)
        p.add_argument("--a", type=float, default=6.0)
        p.add_argument("--b", type=float, default=None, help="outer MCP concavity (default: linked to mu1)")
        p.add_argument("--tau2", type=float, default=0.5)
        p.add_argument("--max-iter", dest="max_iter", type=int, default=100)
        p.add_argument("--tol", type=float, default=1e-4)
        p.add_argument("--no-standardize", dest="standardize", action="store_false")

    fit = sub.add_parser("fit", help="fit at fixed (mu1, mu2)")
    penalty_flags(fit)
    fit.add_argument("--mu1", type=float, default=0.0)
    fit.add_argument("--mu2", type=float, default=0.0)

    cv = sub.add_parser("cv", help="cross-validate (mu1, mu2), then fit at the best point")
    penalty_flags(cv)
    cv.add_argument("--mu1", dest="mu1_grid", type=_floats, default=None, help="comma-separated mu1 grid")
    cv.add_argument("--mu2", dest="mu2_grid", type=_floats, default=None, help="comma-separated mu2 grid")
    cv.add_argument("--folds", type=int, default=5)

    def scenario_flags(p):
        p.add_argument("--scenario", type=_names, default=["S1"], help="comma-separated, e.g. S1,S2")
        p.add_argument("--rho", type=float, default=0.2)
        p.add_argument("--n", type=int, default=40)
        p.add_argument("--p", type=int, default=100)
        p.add_argument("--L", type=int, default=4)
        p.add_argument("--q", type=int, default=5)

    sim = sub.add_parser("simulate", help="write one simulated scenario draw")
    scenario_flags(sim)

    bench = sub.add_parser("benchmark", help="replicated simulation benchmark")
    scenario_flags(bench)
    bench.add_argument("--methods", type=_names, default=list(METHODS))
    bench.add_argument("--replicates", type=int, default=1)
    bench.add_argument("--folds", type=int, default=5)
    bench.add_argument("--workers", type=int, default=None, help="worker processes (default ISPLS_THREADS or 1)")

    ooi = sub.add_parser("ooi", help="observed occurrence index under random splits")
    ooi.add_argument("--manifest", required=True)
    ooi.add_argument("--methods", type=_names, default=["meta_spls", "ispls_homo_m"])
    ooi.add_argument("--resamples", type=int, default=100)
    ooi.add_argument("--split", type=float, default=0.75)
    ooi.add_argument("--folds", type=int, default=5)
    ooi.add_argument("--no-standardize", dest="standardize", action="store_false")

    replay = sub.add_parser("replay", help="re-run a command from its run.json")
    replay.add_argument("run_manifest")

    for p in (fit, cv, sim, bench, ooi):
        p.add_argument("--seed", type=int, default=0)
    for p in (fit, cv, sim, bench, ooi, replay):
        p.add_argument("--out", required=True, help="output directory")
    return parser


def _load(cfg: RunConfig):
    data = read_manifest(cfg.manifest)
    notes = []
    if cfg.standardize:
        data, notes = standardize(data)
    return data, notes


def _write_fit(out: Path, data: MultiStudyData, cfg: RunConfig, spec: PenaltySpec, extra: dict) -> dict:
    fit = solve_directions(build_cross_products(data), cfg.solver(spec))
    if not np.all(np.isfinite(fit.c)):
        raise SolverError("non-finite surrogate iterates")
    models = study_models(data, fit.directions)
    write_matrix(out / "directions.csv", fit.directions)
    write_matrix(out / "selection.csv", fit.directions != 0)
    for study, m in zip(data, models):
        write_matrix(out / f"beta_{study.id}.csv", m.beta)
    return {
        "converged": fit.converged,
        "iterations": fit.iterations,
        "objective_trace": fit.objective_trace,
        "penalty": {**asdict(spec), "model": spec.model.value, "contrast": spec.contrast.value},
        "studies": [s.id for s in data],
        **extra,
    }


def cmd_fit(cfg: RunConfig, out: Path) -> dict:
    data, notes = _load(cfg)
    spec = cfg.penalty().resolved(data.L)
    return _write_fit(out, data, cfg, spec, {"warnings": notes})


def cmd_cv(cfg: RunConfig, out: Path) -> dict:
    data, notes = _load(cfg)
    base = default_grid(data, cfg.folds, cfg.seed)
    grid = TuningGrid(
        tuple(cfg.mu1_grid) if cfg.mu1_grid else base.mu1_values,
        tuple(cfg.mu2_grid) if cfg.mu2_grid else base.mu2_values,
        cfg.folds,
        cfg.seed,
    )
    template = cfg.penalty()
    res = cross_validate(data, template, grid, cfg.solver(template))
    lines = ["mu1,mu2,score"]
    for i, m1 in enumerate(grid.mu1_values):
        for j, m2 in enumerate(grid.mu2_values):
            lines.append("%.17g,%.17g,%.17g" % (m1, m2, res.scores[i, j]))
    (out / "cv_scores.csv").write_text("\n".join(lines) + "\n")
    best = {"mu1": res.best[0], "mu2": res.best[1], "score": float(np.nanmin(res.scores)), "folds": cfg.folds, "seed": cfg.seed}
    write_json(out / "best.json", best)
    spec = template.with_tuning(*res.best).resolved(data.L)
    return _write_fit(out, data, cfg, spec, {"warnings": notes, "best": best})


def cmd_simulate(cfg: RunConfig, out: Path) -> dict:
    specs = cfg.scenarios()
    records = []
    for spec in specs:
        target = out / spec.scenario.value if len(specs) > 1 else out
        data, truth = gen_scenario(spec)
        write_studies(target, data)
        write_matrix(target / "truth_support.csv", truth.support)
        write_matrix(target / "truth_beta1.csv", truth.beta1)
        for l, study in enumerate(data):
            write_matrix(target / f"truth_beta_{study.id}.csv", truth.beta[l])
        write_json(target / "scenario.json", spec.to_dict())
        records.append(spec.to_dict())
    return {"scenarios": records}


def cmd_benchmark(cfg: RunConfig, out: Path) -> dict:
    settings = BenchmarkSettings(folds=cfg.folds, outer_max_iter=cfg.max_iter, outer_tol=cfg.tol)
    report = run_benchmark(cfg.scenarios(), cfg.methods or list(METHODS), cfg.replicates, cfg.seed, cfg.workers, settings)
    (out / "results_long.csv").write_text(report.long_csv())
    (out / "aggregate.csv").write_text(report.aggregate_csv())
    (out / "loadings.csv").write_text(report.loadings_csv())
    (out / "errors.csv").write_text(report.errors_csv())
    return {"failures": len(report.errors), "scenarios": [s.to_dict() for s in report.scenarios]}


def cmd_ooi(cfg: RunConfig, out: Path) -> dict:
    data, notes = _load(cfg)
    settings = BenchmarkSettings(folds=cfg.folds, outer_max_iter=cfg.max_iter, outer_tol=cfg.tol)
    results = ooi_study(data, cfg.methods or ["meta_spls", "ispls_homo_m"], cfg.resamples, cfg.split, cfg.seed, settings)
    lines = ["method,study,variable,ooi,identified"]
    summary = ["method,median_ooi,mean_rmse"]
    for r in results:
        for l, study in enumerate(data):
            for j in range(data.p):
                lines.append(f"{r.method},{study.id},{j},%.17g,{int(r.identified[l, j])}" % r.ooi[l, j])
        summary.append(f"{r.method},%.17g,%.17g" % (r.median_ooi, r.mean_rmse))
    (out / "ooi.csv").write_text("\n".join(lines) + "\n")
    (out / "ooi_summary.csv").write_text("\n".join(summary) + "\n")
    return {"warnings": notes, "tuning": {r.method: r.tuning for r in results}}


HANDLERS = {"fit": cmd_fit, "cv": cmd_cv, "simulate": cmd_simulate, "benchmark": cmd_benchmark, "ooi": cmd_ooi}


def execute(cfg: RunConfig, argv=None) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    record = HANDLERS[cfg.command](cfg, out)
    manifest = {"package": _pkg, "argv": list(argv or []), "config": asdict(cfg), "result": record}
    if cfg.manifest:
        manifest["config"]["manifest"] = str(Path(cfg.manifest).resolve())
    write_json(out / "run.json", manifest)
    return EXIT_OK


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    d = {k: v for k, v in vars(ns).items() if k in {f.name for f in fields(RunConfig)}}
    return RunConfig(**d)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_DATA
    try:
        if ns.command == "replay":
            doc = read_json(ns.run_manifest)
            cfg = RunConfig.from_dict({**doc.get("config", {}), "out": ns.out})
        else:
            cfg = config_from_args(ns)
        return execute(cfg, argv)
    except (SolverError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
