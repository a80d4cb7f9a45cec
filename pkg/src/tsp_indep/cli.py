"""Command-line entry point: ``tsp-indep {mi,test,sweep,detect,grow,baseline-grid}``.

Exit codes are 0 on success, 1 on runtime failure and 2 on usage errors.
Every CSV starts with a ``# schema=... manifest=...`` line; JSON outputs carry
the same two fields.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import KINDS as BASELINE_KINDS
from .baselines import GridSpec, baseline_decide, grid_counts, product_grid
from .harness import (
    BaselineMethod,
    DetectionRecord,
    TspMethod,
    default_jobs,
    detection_pmf,
    detection_time,
    run_trials,
    sampling_complexity,
    size_grid,
    trial_seed,
    tradeoff_curves,
)
from .independence import Schedule, decide_independence, estimate_mi, schedule_at
from .models import KINDS as MODEL_KINDS
from .models import ModelConfig, sample
from .partition import Dataset, grow_full_tree

log = logging.getLogger("tsp_indep")

SCHEMA_PREFIX = "tsp-indep"
SCHEMAS = {
    "mi": "mi/v1",
    "test": "test/v1",
    "curves": "curves/v1",
    "records": "records/v1",
    "pmf": "pmf/v1",
    "tree": "tree/v1",
    "grid": "grid/v1",
    "manifest": "manifest/v1",
}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# ---------------------------------------------------------------- run config


@dataclass
class GridConfig:
    n_min: int = 10
    n_max: int = 100_000
    per_decade: int = 30

    def build(self) -> np.ndarray:
        return size_grid(self.n_max, self.n_min, self.per_decade)


@dataclass
class BaselineConfig:
    kind: str = "loglik"
    p_exp: float = 0.2
    Cs: list[float] = field(default_factory=list)
    mode: str = "quantile"


@dataclass
class RunConfig:
    """Everything an experiment command needs; round-trips through JSON."""

    command: str
    model: dict
    schedule: dict
    seed: int
    grid: GridConfig = field(default_factory=GridConfig)
    trials: int = 200
    alphas: list[float] = field(default_factory=list)
    sigmas: list[float] = field(default_factory=list)
    epsilon: float = 0.05
    hypothesis: str = "H1"
    baseline: BaselineConfig | None = None
    plot: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        doc["grid"] = GridConfig(**doc.get("grid", {}))
        if doc.get("baseline") is not None:
            doc["baseline"] = BaselineConfig(**doc["baseline"])
        return cls(**doc)

    def validate(self) -> None:
        ModelConfig.from_dict(self.model)
        Schedule(**self.schedule)
        self.grid.build()
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.hypothesis not in ("H0", "H1"):
            raise ValueError("hypothesis must be H0 or H1")
        if self.baseline is not None and self.baseline.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline {self.baseline.kind!r}")


def manifest_for(config: dict) -> dict:
    return {"schema": f"{SCHEMA_PREFIX}/{SCHEMAS['manifest']}", "code_version": __version__, "config": config}


def manifest_hash(manifest: dict) -> str:
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------- output


def atomic_write(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "censored" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def csv_text(schema: str, mhash: str, header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA_PREFIX}/{SCHEMAS[schema]} manifest={mhash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def emit_json(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write(Path(out), text)


def svg_loglog(series, title: str, xlabel: str, ylabel: str, width: int = 640, height: int = 480) -> str:
    """Minimal log-log line plot; ``series`` is ``[(label, xs, ys), ...]``.

    Non-finite or non-positive points are dropped.
    """
    left, right, top, bottom = 70, 160, 40, 60
    pts = []
    for label, xs, ys in series:
        keep = [(math.log10(x), math.log10(y)) for x, y in zip(xs, ys)
                if math.isfinite(x) and math.isfinite(y) and x > 0 and y > 0]
        pts.append((label, keep))
    allx = [p[0] for _, k in pts for p in k] or [0.0, 1.0]
    ally = [p[1] for _, k in pts for p in k] or [0.0, 1.0]
    x0, x1 = math.floor(min(allx)), max(math.ceil(max(allx)), math.floor(min(allx)) + 1)
    y0, y1 = math.floor(min(ally)), max(math.ceil(max(ally)), math.floor(min(ally)) + 1)
    pw, ph = width - left - right, height - top - bottom

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{left + pw / 2:.1f}" y="20" text-anchor="middle">{_esc(title)}</text>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 15}" text-anchor="middle">{_esc(xlabel)}</text>',
        f'<text x="18" y="{top + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 18 {top + ph / 2:.1f})">{_esc(ylabel)}</text>',
    ]
    for e in range(x0, x1 + 1):
        out.append(f'<text x="{sx(e):.1f}" y="{top + ph + 18}" text-anchor="middle">1e{e}</text>')
    for e in range(y0, y1 + 1):
        out.append(f'<text x="{left - 6}" y="{sy(e) + 4:.1f}" text-anchor="end">1e{e}</text>')
    for i, (label, keep) in enumerate(pts):
        color = colors[i % len(colors)]
        if keep:
            coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in keep)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = top + 14 + 16 * i
        out.append(f'<line x1="{width - right + 10}" y1="{ly - 4}" x2="{width - right + 30}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{width - right + 35}" y="{ly}">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


# ---------------------------------------------------------------- argument parsing


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_schedule(p: argparse.ArgumentParser) -> None:
    d = Schedule()
    g = p.add_argument_group("schedule")
    g.add_argument("--w", type=float, default=d.w, help="b_n = w * n^-l (default %(default)s)")
    g.add_argument("--l", type=float, default=d.l, help="(default %(default)s)")
    g.add_argument("--alpha", type=float, default=d.alpha, help="penalty multiplier (default %(default)s)")
    g.add_argument("--delta-exp", type=float, default=d.delta_exp, help="delta_n = exp(-n^delta_exp)")
    g.add_argument("--a-scale", type=float, default=d.a_scale, help="a_n = a_scale * n^-a_exp")
    g.add_argument("--a-exp", type=float, default=d.a_exp)
    g.add_argument("--report-base", type=float, default=d.report_base, help="log base of reported MI")
    g.add_argument("--threshold-unit", choices=("nats", "bits"), default=d.threshold_unit)


def _add_model(p: argparse.ArgumentParser, with_n: bool = True) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=MODEL_KINDS, help="draw data from a synthetic model")
    g.add_argument("--sigma", type=float, default=0.0)
    g.add_argument("--pairs", type=int, default=1)
    g.add_argument("--dof", type=float, default=2.0)
    g.add_argument("--theta", type=float, default=0.0)
    g.add_argument("--target-mi", type=float, default=None, help="bits; overrides --sigma")
    if with_n:
        g.add_argument("--n", type=int, help="sample size")


def _add_data(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--data", help="CSV file of samples, X columns first")
    g.add_argument("--p", type=int, help="dimension of X")
    g.add_argument("--q", type=int, help="dimension of Y")


def _add_grid(p: argparse.ArgumentParser) -> None:
    d = GridConfig()
    g = p.add_argument_group("size grid")
    g.add_argument("--n-min", type=int, default=d.n_min)
    g.add_argument("--n-max", type=int, default=d.n_max)
    g.add_argument("--per-decade", type=int, default=d.per_decade)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsp-indep", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mi", help="estimate mutual information")
    _add_data(p)
    _add_model(p)
    _add_schedule(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output JSON (default stdout)")

    p = sub.add_parser("test", help="test independence")
    _add_data(p)
    _add_model(p)
    _add_schedule(p)
    p.add_argument("--method", choices=("tsp",) + BASELINE_KINDS, default="tsp")
    p.add_argument("--p-exp", type=float, default=0.2, help="baseline bins per coordinate n^p_exp")
    p.add_argument("--C", type=float, default=1.0, help="baseline threshold multiplier")
    p.add_argument("--binning", choices=("quantile", "equal_width"), default="quantile")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output JSON (default stdout)")

    for name, helptext in (("sweep", "trade-off curves M0 vs M1 over alpha"),
                           ("detect", "detection-time records and pmfs")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="RunConfig JSON; replaces the experiment flags")
        _add_model(p, with_n=False)
        _add_schedule(p)
        _add_grid(p)
        p.add_argument("--alphas", type=_float_list, help="comma-separated alpha values")
        p.add_argument("--trials", type=int, default=200)
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, default=None, help="worker processes (default $TSP_INDEP_JOBS or 1)")
        p.add_argument("--out-dir", required=True)
        if name == "sweep":
            p.add_argument("--sigmas", type=_float_list, help="comma-separated H1 correlations")
            p.add_argument("--epsilon", type=float, default=0.05)
            p.add_argument("--baseline", choices=BASELINE_KINDS, help="also sweep a grid baseline")
            p.add_argument("--Cs", type=_float_list, help="baseline threshold multipliers")
            p.add_argument("--p-exp", type=float, default=0.2)
            p.add_argument("--no-plot", action="store_true")
        else:
            p.add_argument("--hypothesis", choices=("H0", "H1"), default="H1")
            p.add_argument("--forced-decisions", help="fixture mode: file of 0/1 strings, one per trial")

    p = sub.add_parser("grow", help="dump the full tree as JSON")
    _add_data(p)
    _add_model(p)
    _add_schedule(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = sub.add_parser("baseline-grid", help="dump a baseline product grid and its counts as JSON")
    _add_data(p)
    _add_model(p)
    p.add_argument("--p-exp", type=float, default=0.2)
    p.add_argument("--binning", choices=("quantile", "equal_width"), default="quantile")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    return parser


def _schedule(args) -> Schedule:
    return Schedule(
        w=args.w, l=args.l, alpha=args.alpha, delta_exp=args.delta_exp, a_scale=args.a_scale,
        a_exp=args.a_exp, report_base=args.report_base, threshold_unit=args.threshold_unit,
    )


def _model(args, sigma=None) -> ModelConfig:
    return ModelConfig(
        kind=args.model or "gaussian", sigma=args.sigma if sigma is None else sigma, pairs=args.pairs,
        dof=args.dof, theta=args.theta, target_mi=None if sigma is not None else args.target_mi,
    )


def _load_data(args) -> tuple[Dataset, dict]:
    if args.data is not None:
        if args.p is None or args.q is None:
            raise UsageError("--data needs both --p and --q")
        try:
            data = Dataset.from_csv(args.data, args.p, args.q)
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot load {args.data}: {exc}") from None
        return data, {"data": str(args.data), "p": args.p, "q": args.q}
    if args.model is None:
        raise UsageError("give either --data or --model")
    if args.seed is None:
        raise UsageError("--seed is required when sampling from a model")
    if args.n is None:
        raise UsageError("--n is required with --model")
    model = _model(args)
    return sample(model, args.n, args.seed), {"model": model.to_dict(), "n": args.n, "seed": args.seed}


# ---------------------------------------------------------------- commands


def cmd_mi(args) -> int:
    s = _schedule(args)
    data, source = _load_data(args)
    mi, leafset = estimate_mi(data, s)
    dec = decide_independence(data, s)
    man = manifest_for({"command": "mi", "source": source, "schedule": s.to_dict()})
    doc = {"schema": f"{SCHEMA_PREFIX}/{SCHEMAS['mi']}", "manifest": manifest_hash(man), **dec.to_record()}
    doc["mi_reported"] = mi
    doc["leaf_count"] = leafset.size
    emit_json(doc, args.out)
    return 0


def cmd_test(args) -> int:
    data, source = _load_data(args)
    if args.method == "tsp":
        s = _schedule(args)
        cfg = {"method": "tsp", "schedule": s.to_dict()}
        record = decide_independence(data, s).to_record()
    else:
        spec = GridSpec(args.p_exp, args.C, args.binning)
        cfg = {"method": args.method, "grid": asdict(spec)}
        record = baseline_decide(data, spec, args.method).to_record()
    man = manifest_for({"command": "test", "source": source, **cfg})
    doc = {"schema": f"{SCHEMA_PREFIX}/{SCHEMAS['test']}", "manifest": manifest_hash(man), "method": args.method, **record}
    emit_json(doc, args.out)
    return 0


def _run_config(args, command: str) -> RunConfig:
    if args.config is not None:
        try:
            cfg = RunConfig.from_dict(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if cfg.command != command:
            raise UsageError(f"config is for {cfg.command!r}, not {command!r}")
    else:
        if args.seed is None:
            raise UsageError("--seed is required for experiment commands")
        if args.model is None:
            raise UsageError("--model is required")
        s = _schedule(args)
        cfg = RunConfig(
            command=command,
            model=_model(args).to_dict(),
            schedule=s.to_dict(),
            seed=args.seed,
            grid=GridConfig(args.n_min, args.n_max, args.per_decade),
            trials=args.trials,
            alphas=list(args.alphas) if args.alphas else [s.alpha],
        )
        if command == "sweep":
            cfg.sigmas = list(args.sigmas) if args.sigmas else []
            cfg.epsilon = args.epsilon
            cfg.plot = not args.no_plot
            if args.baseline:
                if not args.Cs:
                    raise UsageError("--baseline needs --Cs")
                cfg.baseline = BaselineConfig(args.baseline, args.p_exp, list(args.Cs))
        else:
            cfg.hypothesis = args.hypothesis
    cfg.validate()
    return cfg


def cmd_sweep(args) -> int:
    cfg = _run_config(args, "sweep")
    out = Path(args.out_dir)
    jobs = args.jobs or default_jobs()
    man = manifest_for(cfg.to_dict())
    mh = manifest_hash(man)
    base_model = ModelConfig.from_dict(cfg.model)
    schedule = Schedule(**cfg.schedule)
    grid = cfg.grid.build()
    models = [ModelConfig.from_dict({**cfg.model, "sigma": s, "target_mi": None}) for s in cfg.sigmas] or [base_model]

    methods = [TspMethod(schedule, tuple(cfg.alphas))]
    if cfg.baseline is not None:
        b = cfg.baseline
        methods.append(BaselineMethod(b.kind, b.p_exp, tuple(b.Cs), b.mode))

    rows, series = [], []
    for model in models:
        for curve in tradeoff_curves(model, methods, cfg.epsilon, cfg.trials, cfg.seed, grid, jobs):
            for a, m0, m1 in zip(curve.params, curve.m0, curve.m1):
                rows.append([curve.method, a, m0, m1, cfg.epsilon, model.kind, model.sigma, model.pairs, model.theta])
            series.append((f"{curve.method} sigma={model.sigma:g}", curve.m0, curve.m1))
    header = ["method", "param", "M0", "M1", "epsilon", "kind", "sigma", "pairs", "theta"]
    atomic_write(out / "curves.csv", csv_text("curves", mh, header, rows))
    atomic_write(out / "manifest.json", json.dumps({**man, "manifest": mh}, sort_keys=True, indent=2) + "\n")
    if cfg.plot:
        svg = svg_loglog(series, f"trade-off, eps={cfg.epsilon:g}", "M0(eps)", "M1(eps)")
        atomic_write(out / "curves.svg", svg)
    return 0


def _records_from_forced(path: str, grid: np.ndarray, cfg: RunConfig) -> list[DetectionRecord]:
    hypothesis, seed, alpha = cfg.hypothesis, cfg.seed, cfg.alphas[0]
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if len(lines) != cfg.trials:
        raise UsageError(f"forced decisions file has {len(lines)} trials, --trials is {cfg.trials}")
    grid_t = tuple(int(v) for v in grid)
    out = []
    for t, ln in enumerate(lines):
        if len(ln) != len(grid_t) or set(ln) - {"0", "1"}:
            raise UsageError(f"forced decisions line {t + 1}: need {len(grid_t)} characters of 0/1")
        bits = tuple(int(c) for c in ln)
        tt, cens = detection_time(bits, grid_t, hypothesis)
        out.append(DetectionRecord(t, trial_seed(seed, t, hypothesis), hypothesis, bits, tt, cens, "tsp", alpha, grid_t))
    return out


def cmd_detect(args) -> int:
    cfg = _run_config(args, "detect")
    out = Path(args.out_dir)
    jobs = args.jobs or default_jobs()
    grid = cfg.grid.build()
    forced = getattr(args, "forced_decisions", None)
    doc = cfg.to_dict()
    if forced is not None:
        doc["forced_decisions"] = Path(forced).read_text()
    man = manifest_for(doc)
    mh = manifest_hash(man)
    if forced is not None:
        by_alpha = {cfg.alphas[0]: _records_from_forced(forced, grid, cfg)}
    else:
        model = ModelConfig.from_dict(cfg.model)
        method = TspMethod(Schedule(**cfg.schedule), tuple(cfg.alphas))
        res = run_trials(model, [method], grid, cfg.trials, cfg.seed, cfg.hypothesis, jobs)
        by_alpha = {a: res[("tsp", float(a))] for a in cfg.alphas}

    rows = []
    for a, recs in by_alpha.items():
        for r in recs:
            rows.append([r.trial, r.seed, r.hypothesis, a, r.packed(), r.t_tilde, int(r.censored)])
    header = ["trial", "seed", "hypothesis", "alpha", "decisions", "T_tilde", "censored"]
    atomic_write(out / "records.csv", csv_text("records", mh, header, rows))
    summary = []
    for i, (a, recs) in enumerate(by_alpha.items()):
        pmf = detection_pmf(recs)
        atomic_write(out / f"pmf_{i}.csv", csv_text("pmf", mh, ["alpha", "T_tilde", "probability"],
                                                    [[a, v, pr] for v, pr in pmf]))
        summary.append({"alpha": a, "file": f"pmf_{i}.csv", "M": _fmt(sampling_complexity(recs, 0.05))})
    atomic_write(out / "manifest.json", json.dumps({**man, "manifest": mh, "pmfs": summary}, sort_keys=True, indent=2) + "\n")
    return 0


def cmd_grow(args) -> int:
    s = _schedule(args)
    data, source = _load_data(args)
    vals = schedule_at(s, data.n)
    tree = grow_full_tree(data, vals.b)
    man = manifest_for({"command": "grow", "source": source, "schedule": s.to_dict()})
    doc = {"schema": f"{SCHEMA_PREFIX}/{SCHEMAS['tree']}", "manifest": manifest_hash(man),
           "b_n": vals.b, "leaf_count": tree.leaf_count, "tree": tree.to_dict()}
    emit_json(doc, args.out)
    return 0


def cmd_baseline_grid(args) -> int:
    data, source = _load_data(args)
    spec = GridSpec(args.p_exp, 1.0, args.binning)
    m = spec.bins(data.n)
    grid = product_grid(data, m, spec.mode)
    g = grid_counts(data, grid)
    man = manifest_for({"command": "baseline-grid", "source": source, "grid": asdict(spec)})
    doc = {
        "schema": f"{SCHEMA_PREFIX}/{SCHEMAS['grid']}",
        "manifest": manifest_hash(man),
        "m": m,
        "bins": list(grid.bins),
        "edges": [e.tolist() for e in grid.edges],
        "occupied_cells": int(len(g.counts)),
        "counts": g.counts.tolist(),
    }
    emit_json(doc, args.out)
    return 0


COMMANDS = {
    "mi": cmd_mi,
    "test": cmd_test,
    "sweep": cmd_sweep,
    "detect": cmd_detect,
    "grow": cmd_grow,
    "baseline-grid": cmd_baseline_grid,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError) as exc:
        # bad flags or configs that argparse cannot see
        print(f"tsp-indep {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"tsp-indep {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
