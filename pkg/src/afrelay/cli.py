"""Experiment runner: figure sweeps, invariant validation, plot scripts and
schedule tables.

Configs are TOML files (or bundled presets) with flag overrides.  SNRs are
given in dB here and converted to linear scale before anything else sees
them.  Exit codes: 0 ok, 1 config error, 2 numerical failure, 3 invariant
failure.
"""
import argparse
import csv
import hashlib
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import stats

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .allocation import POLICY_KINDS, ConstraintSpec, QosContext, constraint_report, resolve_policy
from .capacity import (MIN_MC_SAMPLES, effective_capacity_analytic, effective_capacity_mc,
                       theta_grid)
from .channel import LinkBudget, cdf_gamma_eq, pdf_gamma_eq, sample_fading
from .errors import NumericalError
from .protocol import schedule, schedule_table
from .specfun import integrate_semi_infinite

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INVARIANT = 0, 1, 2, 3
CONSTRAINTS = ("weak-short", "weak-long", "strong-short", "strong-long")
PRESETS = tuple(f"fig{k}" for k in range(2, 9))

COLUMNS = ("theta", "tilde_theta", "gamma_bar_db", "q0_db", "policy", "constraint",
           "gamma_t", "ec_mc", "ec_mc_stderr", "ec_analytic",
           "ec_mc_norm", "ec_mc_stderr_norm", "ec_analytic_norm")
PLOT_COLUMNS = ("theta", "policy", "q0_db")

# policies whose shape depends on q0 get one series per q0 value
_Q0_POLICIES = ("optimal", "truncated_inversion")


class ConfigError(ValueError):
    pass


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class ThetaGrid:
    min: float = 1e-4
    max: float = 1e-1
    points: int = 25

    def values(self):
        return theta_grid(self.min, self.max, self.points)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "custom"
    gamma_bar_db: float = 10.0
    q0_db: tuple = ()
    constraint: str = "weak-long"
    policies: tuple = ("optimal",)
    theta: ThetaGrid = field(default_factory=ThetaGrid)
    mc_samples: int = 10**6
    seed: int = 0
    bandwidth_hz: float = 1e5
    symbol_time_s: float = 1e-3
    frame_symbols: int = None
    output_path: str = None

    def __post_init__(self):
        if self.constraint not in CONSTRAINTS:
            raise ConfigError(f"constraint must be one of {CONSTRAINTS}")
        bad = [p for p in self.policies if p not in POLICY_KINDS]
        if bad or not self.policies:
            raise ConfigError(f"policies must be a non-empty subset of {POLICY_KINDS}")
        if self.theta.points < 1 or not 0 < self.theta.min <= self.theta.max:
            raise ConfigError("theta grid must be non-empty with 0 < min <= max")
        if self.mc_samples < MIN_MC_SAMPLES:
            raise ConfigError(f"mc_samples must be >= {MIN_MC_SAMPLES}")
        if not (self.bandwidth_hz > 0 and self.symbol_time_s > 0):
            raise ConfigError("bandwidth and symbol time must be positive")
        if self.frame_symbols is not None and self.frame_symbols < 1:
            raise ConfigError("frame_symbols must be >= 1")
        if "truncated_inversion" in self.policies and not self.q0_db:
            raise ConfigError("truncated_inversion needs at least one q0_db")

    @classmethod
    def from_mapping(cls, data):
        data = dict(data)
        theta = data.pop("theta", {})
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            grid = ThetaGrid(float(theta.get("min", 1e-4)), float(theta.get("max", 1e-1)),
                             int(theta.get("points", 25)))
            for key in ("q0_db", "policies"):
                if key in data:
                    v = data[key]
                    data[key] = tuple(v) if isinstance(v, (list, tuple)) else (v,)
            data["q0_db"] = tuple(float(q) for q in data.get("q0_db", ()))
            return cls(theta=grid, **data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def canonical(self):
        d = asdict(self)
        d.pop("output_path")
        return d

    def config_hash(self):
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def series(self):
        """(policy, q0_db) pairs in output order; q0_db None means no q0."""
        out = []
        for p in self.policies:
            if p in _Q0_POLICIES and self.q0_db:
                out.extend((p, q) for q in self.q0_db)
            else:
                out.append((p, None))
        return out

    def context(self, theta):
        return QosContext(theta, self.bandwidth_hz, self.symbol_time_s, self.frame_symbols)

    def budget(self):
        return LinkBudget.symmetric(db_to_linear(self.gamma_bar_db))


def load_config(path=None, preset=None):
    if path is not None and preset is not None:
        raise ConfigError("give either a config file or a preset, not both")
    try:
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError(f"unknown preset {preset!r}; choose from {PRESETS}")
            text = resources.files("afrelay.presets").joinpath(f"{preset}.toml").read_text()
        elif path is not None:
            text = Path(path).read_text()
        else:
            return ExperimentConfig()
        return ExperimentConfig.from_mapping(tomllib.loads(text))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(str(exc)) from exc


def _policy_for(config, policy, q0_db, theta):
    """Resolved PowerPolicy, its cutoff solution and the context it runs in."""
    ctx = config.context(theta)
    if policy == "hd_baseline":
        ctx = ctx.half_duplex()
    constraint = None
    if q0_db is not None:
        constraint = ConstraintSpec.parse(config.constraint, db_to_linear(q0_db))
    pol, sol = resolve_policy(policy, config.budget(), ctx.tilde_theta, constraint)
    return pol, sol, ctx


def _has_analytic(policy, config):
    if policy == "hd_baseline":
        return True
    return policy == "optimal" and config.constraint.endswith("long")


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return format(float(x), ".12g")


def run_cell(config, policy, q0_db, theta):
    """One CSV row.  Every cell reuses the config seed (common random numbers)."""
    try:
        pol, sol, ctx = _policy_for(config, policy, q0_db, theta)
        budget = config.budget()
        mc = effective_capacity_mc(pol, budget, ctx, config.mc_samples, config.seed)
        an = None
        if _has_analytic(policy, config):
            an = effective_capacity_analytic(sol.gamma_t, budget.gamma_bar, ctx)
    except NumericalError as exc:
        raise type(exc)(f"cell policy={policy} q0_db={q0_db} theta={theta:.6g}: {exc}") from exc
    uses_constraint = policy in _Q0_POLICIES and q0_db is not None
    row = {
        "theta": theta,
        "tilde_theta": ctx.tilde_theta,
        "gamma_bar_db": config.gamma_bar_db,
        "q0_db": "none" if q0_db is None else q0_db,
        "policy": policy,
        "constraint": config.constraint if uses_constraint else "none",
        "gamma_t": None if sol is None else sol.gamma_t,
        "ec_mc": mc.value,
        "ec_mc_stderr": mc.std_error,
        "ec_analytic": None if an is None else an.value,
        "ec_mc_norm": mc.normalized,
        "ec_mc_stderr_norm": mc.std_error / ctx.frame_scale,
        "ec_analytic_norm": None if an is None else an.normalized,
    }
    return [_fmt(row[c]) for c in COLUMNS]


def _run_cell_args(args):
    return run_cell(*args)


def header_lines(config, kind):
    return [
        f"# afrelay {kind}",
        f"# version: {__version__}",
        f"# config_hash: {config.config_hash()}",
        f"# seed: {config.seed}",
        f"# config: {json.dumps(config.canonical(), sort_keys=True)}",
    ]


def run_sweep(config, jobs=1):
    """CSV text with one row per (series, theta) cell, in a fixed order."""
    cells = [(config, p, q, float(t)) for p, q in config.series() for t in config.theta.values()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell_args, cells))
    else:
        rows = [_run_cell_args(c) for c in cells]
    buf = io.StringIO()
    buf.write("\n".join(header_lines(config, "sweep")) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    writer.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

KS_SAMPLES = 10**5
KS_ALPHA = 0.01
PDF_NORM_TOL = 1e-8
MEAN_SE_BOUND = 4.0
MC_ANALYTIC_REL = 0.02


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    passed: bool

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name}: value={self.value:.6g} threshold={self.threshold:.6g}"


def _validate_theta(config, max_points=3):
    grid = config.theta.values()
    idx = sorted({0, len(grid) // 2, len(grid) - 1})[:max_points]
    return [float(grid[i]) for i in idx]


def run_validate(config, cutoff_scale=1.0):
    """Run the invariant suite; returns a list of Check.

    ``cutoff_scale`` multiplies every resolved cutoff before checking, which
    is how a corrupted solver is simulated.
    """
    budget = config.budget()
    gbar = budget.gamma_bar
    checks = []

    norm = integrate_semi_infinite(lambda x: pdf_gamma_eq(x, gbar), 0.0, scale=0.5 * gbar)
    checks.append(Check("pdf_normalization", abs(norm - 1.0), PDF_NORM_TOL,
                        abs(norm - 1.0) <= PDF_NORM_TOL))

    g = sample_fading(budget, KS_SAMPLES, config.seed).gamma_eq
    d = stats.kstest(g, lambda x: cdf_gamma_eq(x, gbar)).statistic
    crit = stats.kstwo.ppf(1 - KS_ALPHA, KS_SAMPLES)
    checks.append(Check("ks_gamma_eq", d, crit, d < crit))

    # an independent stream for the empirical checks
    stream = sample_fading(budget, config.mc_samples, config.seed + 1)
    for policy, q0_db in config.series():
        for theta in _validate_theta(config):
            tag = f"{policy}[q0_db={q0_db},theta={theta:.3g}]"
            pol, sol, ctx = _policy_for(config, policy, q0_db, theta)
            if sol is None:
                continue
            pol = pol.with_cutoff(pol.cutoff_gamma_t * cutoff_scale)
            rep = constraint_report(stream, pol)
            z = abs(rep["mean_mu"] - sol.target_mean_mu) / rep["mean_mu_se"]
            checks.append(Check(f"mean_power {tag}", z, MEAN_SE_BOUND, z <= MEAN_SE_BOUND))
            c = pol.constraint
            if policy == "optimal" and c is not None and c.horizon == "short_term":
                v = rep["violation_fraction"]
                checks.append(Check(f"iri_violations {tag}", v, 0.0, v == 0.0))
            if policy == "optimal" and c is not None and config.constraint == "weak-long":
                target = min(c.q0, gbar * 1.0)
                z = abs(rep["mean_iri"] - target) / rep["mean_iri_se"]
                checks.append(Check(f"mean_iri {tag}", z, MEAN_SE_BOUND, z <= MEAN_SE_BOUND))
            if _has_analytic(policy, config):
                mc = effective_capacity_mc(pol, budget, ctx, config.mc_samples, config.seed)
                an = effective_capacity_analytic(pol.cutoff_gamma_t, gbar, ctx)
                delta = abs(mc.value - an.value)
                bound = max(MC_ANALYTIC_REL * an.value, 4.0 * mc.std_error)
                checks.append(Check(f"mc_vs_analytic {tag}", delta, bound, delta <= bound))
    return checks


def format_report(config, checks):
    lines = header_lines(config, "validate")
    lines += [c.line() for c in checks]
    ok = all(c.passed for c in checks)
    lines.append(f"verdict: {'PASS' if ok else 'FAIL'} ({sum(c.passed for c in checks)}/{len(checks)})")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Plot scripts
# ---------------------------------------------------------------------------

_PLOT_TEMPLATE = '''\
import matplotlib.pyplot as plt

SERIES = {series!r}

fig, ax = plt.subplots(figsize=(6, 4))
for label, (theta, ec) in SERIES.items():
    ax.plot(theta, ec, marker="o", markersize=3, label=label)
ax.set_xscale("log")
ax.set_xlabel("QoS exponent theta (1/bit)")
ax.set_ylabel({ylabel!r})
ax.grid(True, which="both", alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig({png!r}, dpi=150)
'''


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return rows


def emit_plot_script(csv_path, out_path=None, style="normalized"):
    """Write a matplotlib script drawing E_C vs theta, one line per
    (policy, q0) series.  Returns (script path, number of series)."""
    value_col = {"normalized": "ec_mc_norm", "absolute": "ec_mc"}.get(style)
    if value_col is None:
        raise ConfigError(f"unknown plot style {style!r}")
    rows = read_sweep_csv(csv_path)
    missing = [c for c in (*PLOT_COLUMNS, value_col) if c not in rows[0]]
    if missing:
        raise ConfigError(f"{csv_path}: missing columns {missing}")
    series = {}
    for r in rows:
        label = r["policy"] if r["q0_db"] == "none" else f"{r['policy']} q0={r['q0_db']} dB"
        theta, ec = series.setdefault(label, ([], []))
        theta.append(float(r["theta"]))
        ec.append(float(r[value_col]))
    out_path = Path(out_path) if out_path else Path(csv_path).with_suffix(".plot.py")
    ylabel = "normalized E_C" if style == "normalized" else "E_C (bits/slot)"
    out_path.write_text(_PLOT_TEMPLATE.format(
        series=series, ylabel=ylabel, png=str(out_path.with_suffix(".png"))))
    return out_path, len(series)


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------

def _float_list(text):
    if text.strip().lower() in ("", "none"):
        return ()
    return tuple(float(v) for v in text.split(","))


def _add_config_args(p):
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--preset", help=f"bundled config ({', '.join(PRESETS)})")
    p.add_argument("--gamma-bar-db", type=float)
    p.add_argument("--q0-db", type=_float_list, help="comma-separated, or 'none'")
    p.add_argument("--constraint", choices=CONSTRAINTS)
    p.add_argument("--policy", type=lambda s: tuple(s.split(",")),
                   help=f"comma-separated subset of {POLICY_KINDS}")
    p.add_argument("--theta-min", type=float)
    p.add_argument("--theta-max", type=float)
    p.add_argument("--theta-points", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")


def config_from_args(args):
    cfg = load_config(args.config, args.preset)
    simple = {"gamma_bar_db": args.gamma_bar_db, "q0_db": args.q0_db,
              "constraint": args.constraint, "policies": args.policy,
              "mc_samples": args.samples, "seed": args.seed, "output_path": args.out}
    grid = {"min": args.theta_min, "max": args.theta_max, "points": args.theta_points}
    over = {k: v for k, v in simple.items() if v is not None}
    theta = replace(cfg.theta, **{k: v for k, v in grid.items() if v is not None})
    return replace(cfg, theta=theta, **over)


def _emit(text, path):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def build_parser():
    parser = argparse.ArgumentParser(prog="afrelay", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="effective capacity over a theta grid, as CSV")
    _add_config_args(p)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("validate", help="run the invariant suite")
    _add_config_args(p)
    p.add_argument("--cutoff-scale", type=float, default=1.0,
                   help="multiply resolved cutoffs (fault injection)")

    p = sub.add_parser("plot", help="write a matplotlib script for a sweep CSV")
    p.add_argument("csv")
    p.add_argument("--out")
    p.add_argument("--style", default="normalized", choices=("normalized", "absolute"))

    p = sub.add_parser("schedule", help="print the relay slot schedule")
    p.add_argument("--frame-symbols", "-t", type=int, default=5)
    p.add_argument("--format", default="text", choices=("text", "csv"))
    p.add_argument("--out")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            cfg = config_from_args(args)
            _emit(run_sweep(cfg, jobs=args.jobs), cfg.output_path)
        elif args.command == "validate":
            cfg = config_from_args(args)
            checks = run_validate(cfg, cutoff_scale=args.cutoff_scale)
            _emit(format_report(cfg, checks), cfg.output_path)
            if not all(c.passed for c in checks):
                return EXIT_INVARIANT
        elif args.command == "plot":
            path, n = emit_plot_script(args.csv, args.out, args.style)
            print(f"wrote {path} ({n} series)")
        elif args.command == "schedule":
            _emit(schedule_table(schedule(args.frame_symbols), args.format), args.out)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
