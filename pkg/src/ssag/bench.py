"""Experiment orchestration, artifact emission, and the command-line entry.

Workflow: a JSON config describes dataset, objective, optimizer, seeds, and
budget; `run_experiment` executes one deterministic run per seed and
aggregates seed means; `emit_csv` / `emit_plot` write the artifacts; the CLI
wires the pieces into subcommands (gen-data, estimate-constants, run,
compare, verify-bound, plot).  Identical configs yield byte-identical CSVs
apart from the wall-time column.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import traceback
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._version import __version__
from .core import Dataset, estimate_constants
from .errors import ConfigError, FormatError, SsagError
from .ingest import SyntheticSpec, gen_synthetic, read_idx, read_text, write_text
from .objectives import Objective, make_objective
from .optimizers import RunConfig, run, steps_for_passes
from .records import CSV_COLUMNS, Aggregate, RunRecord, aggregate
from .theory import (CviInputs, check_envelope, cvi_envelope, cvi_lambda, cvi_rho,
                     reference_optimum, theorem2_bound, theorem2_inputs_for)

#: Environment variable holding the default output directory.
OUT_DIR_ENV = "SSAG_OUT_DIR"

_DATASET_KINDS = ("synthetic", "text", "idx")


@dataclass
class ExperimentConfig:
    """Declarative description of a multi-seed experiment.

    Mirrors the JSON config document one to one; every leaf field can be
    overridden from the command line by a flag of the same (dotted) name.
    """

    dataset: dict
    objective: dict
    optimizer: dict
    seeds: list[int]
    cadence: int = 1
    passes: float | None = None
    steps: int | None = None
    out_dir: str | None = None
    label: str | None = None
    record_dist: bool = False
    record_variance: bool = False

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds must be a nonempty list")
        if self.cadence < 1:
            raise ConfigError("cadence must be >= 1")
        if (self.passes is None) == (self.steps is None):
            raise ConfigError("exactly one of 'passes' or 'steps' must be set")
        if self.passes is not None and self.passes <= 0:
            raise ConfigError("pass budget must be > 0")
        if self.steps is not None and self.steps < 0:
            raise ConfigError("step budget must be >= 0")
        if self.dataset.get("kind") not in _DATASET_KINDS:
            raise ConfigError(f"dataset kind must be one of {_DATASET_KINDS}")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"dataset", "objective", "optimizer", "seeds"} - set(doc)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """Platform-stable hash of the canonical JSON form."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    def resolved_label(self) -> str:
        return self.label or str(self.optimizer.get("kind", "run"))

    def resolved_out_dir(self) -> Path:
        return Path(self.out_dir or os.environ.get(OUT_DIR_ENV, "results"))


def build_dataset(spec: dict) -> tuple[Dataset, Dataset | None]:
    """Construct (train, optional test) datasets from a config section."""
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "synthetic":
        synth = SyntheticSpec(means=np.asarray(spec["means"], dtype=np.float64),
                              counts=tuple(spec["counts"]),
                              stddev=float(spec.get("stddev", 1.0)),
                              seed=int(spec.get("seed", 0)))
        train = gen_synthetic(synth)
        test = None
        if "test_seed" in spec or "test_counts" in spec:
            test = gen_synthetic(SyntheticSpec(
                means=synth.means,
                counts=tuple(spec.get("test_counts", synth.counts)),
                stddev=synth.stddev,
                seed=int(spec.get("test_seed", synth.seed + 1))))
        return train, test
    if kind == "text":
        train = read_text(spec["path"], add_bias=bool(spec.get("add_bias", False)))
        test = (read_text(spec["test_path"], add_bias=bool(spec.get("add_bias", False)))
                if spec.get("test_path") else None)
        return train, test
    if kind == "idx":
        train = read_idx(spec["images"], spec["labels"],
                         add_bias=bool(spec.get("add_bias", False)),
                         limit=spec.get("limit"))
        test = None
        if spec.get("test_images"):
            test = read_idx(spec["test_images"], spec["test_labels"],
                            add_bias=bool(spec.get("add_bias", False)),
                            limit=spec.get("test_limit"))
        return train, test
    raise ConfigError(f"unknown dataset kind {kind!r}")


@dataclass
class ExperimentResult:
    """Per-seed records plus their seed-mean aggregate and problem handles."""

    config: ExperimentConfig
    objective: Objective
    records: list[RunRecord] = field(default_factory=list)
    agg: Aggregate | None = None
    test_dataset: Dataset | None = None
    w_star: np.ndarray | None = None
    constants: object = None


def _resolve_h(optimizer_spec: dict) -> float | None:
    h = optimizer_spec.get("h", "auto")
    if h in ("auto", None):
        return None
    return float(h)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute one run per seed and aggregate; deterministic given the seeds."""
    train, test = build_dataset(config.dataset)
    obj = make_objective(config.objective, train)
    opt = dict(config.optimizer)
    kind = opt.get("kind")
    if kind is None:
        raise ConfigError("optimizer section needs a 'kind'")
    constants = None
    if obj.kind in ("ridge", "logistic", "quadratic"):
        constants = estimate_constants(obj)
    w_star = None
    if config.record_dist:
        if obj.kind == "mlp":
            raise ConfigError("record_dist requires an objective with a reference optimum")
        w_star = reference_optimum(obj, constants=constants)
    n = int(opt.get("n", 1))
    m = opt.get("m")
    steps = (config.steps if config.steps is not None
             else steps_for_passes(kind, config.passes, train.n_samples, n=n, m=m))
    result = ExperimentResult(config=config, objective=obj, test_dataset=test,
                              w_star=w_star)
    result.constants = constants
    chash = config.config_hash()
    for seed in sorted(config.seeds):
        rc = RunConfig(kind=kind, steps=steps, h=_resolve_h(opt), n=n,
                       m=None if m is None else int(m),
                       prox_l1=opt.get("prox_l1"),
                       schedule=opt.get("schedule", "constant"),
                       seed=int(seed), cadence=config.cadence,
                       record_variance=config.record_variance)
        result.records.append(run(rc, obj, constants=constants, w_star=w_star,
                                  test_dataset=test, config_hash=chash))
    result.agg = aggregate(result.records)
    return result


# ---------------------------------------------------------------------------
# CSV emission


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def emit_csv(records: list[RunRecord], out_dir, label: str = "run") -> list[Path]:
    """Write one CSV per run (`<label>_s<seed>.csv`) with the pinned schema.

    UTF-8, LF line endings, full-precision floats; missing metrics are 'nan'.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for rec in records:
        path = out_dir / f"{label}_s{rec.seed}.csv"
        lines = [",".join(CSV_COLUMNS)]
        for i in range(len(rec)):
            lines.append(",".join(_fmt(rec.column(name)[i]) for name in CSV_COLUMNS))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
        paths.append(path)
    return paths


def emit_summary_csv(agg: Aggregate, out_dir, name: str = "summary.csv") -> Path:
    """Write per-config seed-mean/seed-std aggregates."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = ("loss", "test_acc", "dist_sq", "sigma_sq")
    header = ["k", "passes"]
    for mname in metrics:
        header += [f"{mname}_mean", f"{mname}_std"]
    lines = [",".join(header)]
    for i in range(agg.k.size):
        row = [_fmt(agg.k[i]), _fmt(agg.passes[i])]
        for mname in metrics:
            row += [_fmt(agg.mean[mname][i]), _fmt(agg.std[mname][i])]
        lines.append(",".join(row))
    path = out_dir / name
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    """Parse back a per-run CSV into column arrays."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].split(",") != list(CSV_COLUMNS):
        raise FormatError(f"{path}: missing or wrong CSV header "
                          f"(expected {','.join(CSV_COLUMNS)})")
    cols = {name: [] for name in CSV_COLUMNS}
    for ln in lines[1:]:
        if not ln.strip():
            continue
        cells = ln.split(",")
        for name, cell in zip(CSV_COLUMNS, cells):
            cols[name].append(float(cell))
    out = {}
    for name in CSV_COLUMNS:
        dtype = np.int64 if name in ("k", "grad_evals") else np.float64
        out[name] = np.asarray(cols[name], dtype=dtype)
    return out


# ---------------------------------------------------------------------------
# SVG plotting

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
            "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


def _ticks_linear(lo: float, hi: float, count: int = 6) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = np.linspace(lo, hi, count)
    return [float(v) for v in raw]


def emit_plot(series: list[tuple[str, np.ndarray, np.ndarray]], path, *,
              metric_label: str = "loss", title: str | None = None,
              x_label: str = "effective passes") -> Path:
    """Write an SVG 1.1 line chart: log-scale y against a linear x axis.

    ``series`` is a list of (label, x, y) triples; one polyline per series
    with a distinct stroke color and a legend entry.  Points with
    non-positive or non-finite y are dropped (log scale); an error is raised
    if nothing plottable remains.
    """
    cleaned = []
    for label, x, y in series:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        keep = np.isfinite(x) & np.isfinite(y) & (y > 0.0)
        if np.any(keep):
            cleaned.append((label, x[keep], y[keep]))
    if not cleaned:
        raise SsagError("no positive finite data to plot")

    width, height = 720, 480
    ml, mr, mt, mb = 70, 24, 42, 52
    pw, ph = width - ml - mr, height - mt - mb
    x_lo = min(float(x.min()) for _, x, _ in cleaned)
    x_hi = max(float(x.max()) for _, x, _ in cleaned)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    y_lo = min(float(y.min()) for _, _, y in cleaned)
    y_hi = max(float(y.max()) for _, _, y in cleaned)
    log_lo = np.floor(np.log10(y_lo))
    log_hi = np.ceil(np.log10(y_hi))
    if log_hi == log_lo:
        log_hi = log_lo + 1.0

    def sx(v: float) -> float:
        return ml + (v - x_lo) / (x_hi - x_lo) * pw

    def sy(v: float) -> float:
        return mt + (log_hi - np.log10(v)) / (log_hi - log_lo) * ph

    parts = ['<?xml version="1.0" encoding="UTF-8"?>',
             f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
             f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
             f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>']
    if title:
        parts.append(f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="15">{_esc(title)}</text>')
    # axes frame
    parts.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" '
                 'fill="none" stroke="#333333" stroke-width="1"/>')
    # y decade ticks
    decades = np.arange(log_lo, log_hi + 0.5)
    step = max(1, int(np.ceil(decades.size / 9)))
    for d in decades[::step]:
        yy = sy(10.0 ** d)
        parts.append(f'<line x1="{ml}" y1="{yy:.2f}" x2="{ml + pw}" y2="{yy:.2f}" '
                     'stroke="#dddddd" stroke-width="1"/>')
        parts.append(f'<text x="{ml - 8}" y="{yy + 4:.2f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">1e{int(d)}</text>')
    # x ticks
    for v in _ticks_linear(x_lo, x_hi):
        xx = sx(v)
        parts.append(f'<line x1="{xx:.2f}" y1="{mt + ph}" x2="{xx:.2f}" '
                     f'y2="{mt + ph + 5}" stroke="#333333" stroke-width="1"/>')
        parts.append(f'<text x="{xx:.2f}" y="{mt + ph + 20}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{v:g}</text>')
    parts.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="13">{_esc(x_label)}</text>')
    parts.append(f'<text x="18" y="{mt + ph / 2:.1f}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="13" '
                 f'transform="rotate(-90 18 {mt + ph / 2:.1f})">{_esc(metric_label)}</text>')
    # polylines + legend
    for idx, (label, x, y) in enumerate(cleaned):
        color = _PALETTE[idx % len(_PALETTE)]
        pts = " ".join(f"{sx(float(a)):.2f},{sy(float(b)):.2f}" for a, b in zip(x, y))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     'stroke-width="1.5"/>')
        ly = mt + 14 + 16 * idx
        parts.append(f'<line x1="{ml + pw - 150}" y1="{ly}" x2="{ml + pw - 126}" '
                     f'y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{ml + pw - 120}" y="{ly + 4}" font-family="sans-serif" '
                     f'font-size="11">{_esc(label)}</text>')
    parts.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n", encoding="utf-8", newline="\n")
    return path


def _esc(text: str) -> str:
    return (str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


# ---------------------------------------------------------------------------
# CLI


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_overrides(doc: dict, extras: list[str]) -> dict:
    """Apply config overrides from leftover flags.

    `--section.key value` sets a field inside the dataset/objective/optimizer
    sections; `--key value` sets a top-level config field of that name.
    """
    i = 0
    while i < len(extras):
        token = extras[i]
        if not token.startswith("--"):
            raise _UsageError(f"unrecognized argument: {token}")
        if i + 1 >= len(extras):
            raise _UsageError(f"flag {token} needs a value")
        name = token[2:]
        if "." in name:
            section, key = name.split(".", 1)
            if section not in ("dataset", "objective", "optimizer"):
                raise _UsageError(f"cannot override unknown section {section!r}")
            doc.setdefault(section, {})[key] = _parse_value(extras[i + 1])
        else:
            key = name.replace("-", "_")
            if key not in ExperimentConfig.__dataclass_fields__:
                raise _UsageError(f"unknown config field {name!r}")
            doc[key] = _parse_value(extras[i + 1])
        i += 2
    return doc


def _load_config(args, extras) -> ExperimentConfig:
    doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    doc = _apply_overrides(doc, extras)
    if getattr(args, "seed", None) is not None:
        doc["seeds"] = [args.seed]
    if getattr(args, "seeds", None):
        doc["seeds"] = [int(s) for s in args.seeds.split(",")]
    if getattr(args, "passes", None) is not None:
        doc["passes"] = args.passes
        doc.pop("steps", None)
    if getattr(args, "steps", None) is not None:
        doc["steps"] = args.steps
        doc.pop("passes", None)
    for name in ("cadence", "label"):
        value = getattr(args, name, None)
        if value is not None:
            doc[name] = value
    if getattr(args, "out", None):
        doc["out_dir"] = args.out
    return ExperimentConfig.from_dict(doc)


def _auto_means(classes: int, dim: int, separation: float) -> np.ndarray:
    """Deterministic well-separated class means: +-separation/2 on axes."""
    means = np.zeros((classes, dim))
    for j in range(classes):
        coord = (j // 2) % dim
        means[j, coord] = separation / 2.0 * (1.0 if j % 2 == 0 else -1.0)
    return means


def _cmd_gen_data(args) -> int:
    if args.means:
        means = np.asarray([[float(v) for v in row.split(",")]
                            for row in args.means.split(";")])
    else:
        means = _auto_means(args.classes, args.dim, args.separation)
    counts = ([int(c) for c in args.counts.split(",")] if args.counts
              else [args.count] * means.shape[0])
    spec = SyntheticSpec(means=means, counts=tuple(counts),
                         stddev=args.stddev, seed=args.seed)
    ds = gen_synthetic(spec)
    write_text(ds, args.out)
    print(f"wrote {ds.n_samples} samples, {ds.n_classes} classes, "
          f"{ds.n_features} features to {args.out}")
    return 0


def _cmd_estimate_constants(args) -> int:
    ds = read_text(args.data, add_bias=args.add_bias)
    obj = make_objective({"kind": args.objective, "lam": args.lam}, ds)
    const = estimate_constants(obj)
    C = ds.n_classes
    print(f"L = {const.L:.12g}")
    print(f"mu = {const.mu:.12g}")
    print(f"condition = {const.condition:.12g}")
    if not const.strongly_convex:
        print("warning: mu = 0, not strongly convex")
    print(f"h_ssag = {1.0 / (2.0 * C * const.L):.12g}")
    print(f"h_fgd = {1.0 / const.L:.12g}")
    print(f"h_sag = {1.0 / (16.0 * const.L):.12g}")
    print(f"h_svrg = {1.0 / (3.0 * const.L):.12g}")
    print(f"h_saga = {1.0 / (3.0 * const.L):.12g}")
    return 0


def _cmd_run(args, extras) -> int:
    config = _load_config(args, extras)
    result = run_experiment(config)
    out_dir = config.resolved_out_dir()
    paths = emit_csv(result.records, out_dir, config.resolved_label())
    emit_summary_csv(result.agg, out_dir)
    final_loss = result.agg.mean["loss"][-1]
    print(f"{config.resolved_label()}: {len(result.records)} runs, "
          f"{result.agg.passes[-1]:.3g} passes, final mean loss {final_loss:.6g}")
    if result.agg.n_diverged:
        print(f"warning: {result.agg.n_diverged} runs diverged")
    if args.plot:
        emit_plot([(config.resolved_label(), result.agg.passes, result.agg.mean["loss"])],
                  args.plot, metric_label="training loss")
        print(f"plot written to {args.plot}")
    print(f"csv written to {paths[0].parent}")
    return 0


def _cmd_compare(args) -> int:
    out_dir = Path(args.out or os.environ.get(OUT_DIR_ENV, "results"))
    out_dir.mkdir(parents=True, exist_ok=True)
    series = []
    summary_rows = []
    for path in args.configs:
        config = ExperimentConfig.load(path)
        result = run_experiment(config)
        label = config.resolved_label()
        emit_csv(result.records, out_dir, label)
        emit_summary_csv(result.agg, out_dir, f"{label}_summary.csv")
        agg = result.agg
        series.append((label, agg.passes, agg.mean[args.metric]))
        summary_rows.append([label, str(agg.n_seeds), _fmt(agg.passes[-1])]
                            + [_fmt(agg.mean[m][-1]) for m in ("loss", "test_acc", "dist_sq")]
                            + [_fmt(agg.std[m][-1]) for m in ("loss", "test_acc", "dist_sq")])
    header = ("label,seeds,passes,loss_avg,test_acc_avg,dist_sq_avg,"
              "loss_std,test_acc_std,dist_sq_std")
    (out_dir / "summary.csv").write_text(
        "\n".join([header] + [",".join(r) for r in summary_rows]) + "\n",
        encoding="utf-8", newline="\n")
    plot_path = out_dir / "compare.svg"
    emit_plot(series, plot_path, metric_label=args.metric)
    for row in summary_rows:
        print(f"{row[0]}: final loss {row[3]} at {row[2]} passes ({row[1]} seeds)")
    print(f"joint plot written to {plot_path}")
    return 0


def _cmd_verify_bound(args, extras) -> int:
    config = _load_config(args, extras)
    doc = config.to_dict()
    doc["record_dist"] = True
    if args.theorem == 1:
        doc["record_variance"] = True
    config = ExperimentConfig.from_dict(doc)
    result = run_experiment(config)
    agg = result.agg
    obj = result.objective
    const = result.constants
    if const is None:
        raise SsagError("bound verification needs certified convexity constants")
    opt = config.optimizer
    kind = opt.get("kind")
    h = _resolve_h(opt)
    if h is None:
        from .optimizers import default_step_size
        h = default_step_size(kind, obj, const)
    N = obj.dataset.n_samples
    eps = np.finfo(float).eps
    if args.theorem == 2:
        if kind != "ssag":
            raise SsagError("the distance envelope applies to the ssag optimizer")
        w0 = obj.init_params(seed=sorted(config.seeds)[0])
        inp = theorem2_inputs_for(obj, n=int(opt.get("n", 1)), w0=w0,
                                  constants=const, w_star=result.w_star,
                                  per_class=args.per_class_f)
        bounds = np.array([theorem2_bound(int(k), inp) for k in agg.k])
        # squared distances cannot be measured below the float64 resolution
        # of the iterate itself; clamp the envelope there
        floor = 16.0 * obj.dim * (eps * (1.0 + float(np.linalg.norm(result.w_star)))) ** 2
        report = check_envelope(agg.k, agg.mean["dist_sq"], np.maximum(bounds, floor),
                                n_seeds=agg.n_seeds, slack=args.slack,
                                min_seeds=args.min_seeds)
        print("theorem: squared-distance envelope (stratified average gradient)")
        print(f"rate = {inp.rate:.12g}, bracket = {inp.bracket:.6g}, "
              f"resolution floor = {floor:.3g}")
    else:
        if kind not in ("fgd", "sgd", "minibatch"):
            raise SsagError("the gap envelope applies to fgd, sgd, or minibatch")
        n = N if kind == "fgd" else (int(opt.get("n", 1)) if kind == "minibatch" else 1)
        f = n / N
        sigma_sq = 0.0
        if f < 1.0:
            sigma_sq = float(agg.mean["sigma_sq"][-1])
        inp = CviInputs(h=h, L=const.L, mu=const.mu, f=f, n=n, sigma_sq=sigma_sq)
        lam = cvi_lambda(inp)
        rho = cvi_rho(h, const.L, const.mu)
        j_star = obj.loss_full(result.w_star)
        gaps = agg.mean["loss"] - j_star
        anchor = 1 if agg.k.size > 1 else 0
        k0 = int(agg.k[anchor])
        gap0 = float(gaps[anchor])
        bounds = np.array([cvi_envelope(int(k) - k0, lam, rho, gap0)
                           for k in agg.k[anchor:]])
        # gaps are differences of O(|J*|) losses: clamp the envelope at the
        # float64 resolution of that subtraction
        floor = 8.0 * eps * max(1.0, abs(j_star))
        report = check_envelope(agg.k[anchor:], gaps[anchor:],
                                np.maximum(bounds, floor),
                                n_seeds=agg.n_seeds, slack=args.slack,
                                min_seeds=args.min_seeds)
        print("theorem: optimality-gap envelope (convergence-variance inequality)")
        print(f"lambda = {lam:.6g}, rho = {rho:.12g}, sigma_sq = {sigma_sq:.6g}, "
              f"resolution floor = {floor:.3g}")
    print(report.summary())
    if report.pass_fraction >= args.min_pass:
        print(f"PASS (pass fraction >= {args.min_pass})")
        return 0
    print(f"FAIL (pass fraction < {args.min_pass})")
    return 2


def _cmd_plot(args) -> int:
    series = []
    for path in args.csvs:
        cols = read_csv(path)
        x = cols["passes"] if args.x == "passes" else cols["k"].astype(np.float64)
        series.append((Path(path).stem, x, cols[args.metric]))
    emit_plot(series, args.out, metric_label=args.metric,
              x_label="effective passes" if args.x == "passes" else "step")
    print(f"plot written to {args.out}")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="ssag", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ssag {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset text file")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--count", type=int, default=100, help="samples per class")
    p.add_argument("--counts", help="comma-separated per-class counts")
    p.add_argument("--means", help="semicolon-separated class means, e.g. '1,0;-1,0'")
    p.add_argument("--separation", type=float, default=4.0)
    p.add_argument("--stddev", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("estimate-constants",
                       help="print L, mu, and default step sizes for a dataset")
    p.add_argument("--data", required=True, help="dataset in text format")
    p.add_argument("--objective", default="ridge", choices=("ridge", "logistic", "quadratic"))
    p.add_argument("--lam", type=float, default=0.0)
    p.add_argument("--add-bias", action="store_true")

    for name, help_text in (("run", "execute a config and emit CSV records"),
                            ("verify-bound", "run a config and check a bound envelope")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", "-c", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--seeds", help="comma-separated seed list")
        p.add_argument("--cadence", type=int)
        p.add_argument("--passes", type=float)
        p.add_argument("--steps", type=int)
        p.add_argument("--label")
        p.add_argument("--out", help="output directory")
        if name == "run":
            p.add_argument("--plot", help="also write a loss plot to this SVG path")
        else:
            p.add_argument("--theorem", type=int, choices=(1, 2), required=True)
            p.add_argument("--slack", type=float, default=0.05)
            p.add_argument("--min-pass", type=float, default=0.99)
            p.add_argument("--min-seeds", type=int, default=20)
            p.add_argument("--per-class-f", action="store_true",
                           help="use per-stratum sampling ratios in the bound")

    p = sub.add_parser("compare", help="run several configs and plot them jointly")
    p.add_argument("configs", nargs="+")
    p.add_argument("--metric", default="loss",
                   choices=("loss", "test_acc", "dist_sq"))
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("plot", help="plot emitted CSV records")
    p.add_argument("csvs", nargs="+")
    p.add_argument("--metric", default="loss", choices=("loss", "test_acc", "dist_sq"))
    p.add_argument("--x", default="passes", choices=("passes", "k"))
    p.add_argument("--out", required=True)
    return parser


def cli(argv: list[str] | None = None) -> int:
    """Entry point; returns 0 on success, 1 on usage error, 2 on failure."""
    parser = _build_parser()
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        if argv and argv[0] in ("run", "verify-bound"):
            args, extras = parser.parse_known_args(argv)
        else:
            args, extras = parser.parse_args(argv), []
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "gen-data":
            return _cmd_gen_data(args)
        if args.command == "estimate-constants":
            return _cmd_estimate_constants(args)
        if args.command == "run":
            return _cmd_run(args, extras)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "verify-bound":
            return _cmd_verify_bound(args, extras)
        return _cmd_plot(args)
    except (_UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure -> exit 2
        traceback.print_exc()
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
