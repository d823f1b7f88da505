"""Command-line front end.

Four subcommands: ``calibrate``, ``covert``, ``optimize`` and ``figure``.
Settings come from an optional JSON file (``--config``) and from flags; flags
win.  Every list-valued setting accepts a scalar, a comma list
(``0.1,0.2``) or an inclusive range ``start:stop:step``.

Exit codes: 0 ok, 2 bad config, 3 calibration failure, 4 conditioning
starvation, 5 infeasible.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import CalibrationError, calibrate_shewhart, cusum_arl, threshold_for
from .covert import covert_prob
from .covert.sr import DEFAULT_N
from .detectors import CUSUM, SHEWHART, SR, TESTS, Detector, ThresholdError
from .montecarlo import ConditioningStarvation, CensoringError, estimate_arl2fa, estimate_covert_prob
from .optimizer import (
    ALGORITHM1,
    APPROX,
    EXHAUSTIVE,
    METHODS,
    Optimum,
    approx_shewhart,
    exhaustive_shewhart,
    feasibility_check,
    scan_curves,
    shewhart_duration,
    utility,
)
from .signal_model import ScenarioParams

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_CALIBRATION, EXIT_STARVATION, EXIT_INFEASIBLE = 0, 2, 3, 4, 5

FIGURES = (
    "covert-vs-L",
    "covert-vs-q",
    "I-vs-q",
    "I-vs-L",
    "I-vs-noise-ratio",
    "I-vs-nu",
    "I-vs-theta",
    "I-vs-gamma",
)

# defaults used by figure sweeps when the config leaves the swept axis at one value
SWEEP_DEFAULTS = {
    "I-vs-noise-ratio": ("sigma_ratio", [0.25, 0.5, 1.0, 2.0, 4.0]),
    "I-vs-nu": ("nu", [0, 10, 20, 50, 100, 200, 500]),
    "I-vs-theta": ("theta", [0.9, 0.92, 0.95, 0.97, 0.99, 0.995]),
    "I-vs-gamma": ("gamma", [100.0, 200.0, 500.0, 1000.0]),
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    test: list[str] = field(default_factory=lambda: [SHEWHART])
    gamma: list[float] = field(default_factory=lambda: [500.0])
    theta: list[float] = field(default_factory=lambda: [0.95])
    nu: list[int] = field(default_factory=lambda: [0])
    q: list[float] = field(default_factory=lambda: [0.15])
    L: list[int] = field(default_factory=lambda: [15])
    sigma_ratio: list[float] = field(default_factory=lambda: [1.0])
    N: int = DEFAULT_N
    trials: int = 0
    seed: int = 0
    output: str | None = None
    format: str = "text"
    method: str = ALGORITHM1
    q_min: float = 1e-3
    q_max: float = 2.0
    dq: float = 1e-3
    engine: str = "auto"

    def validate(self) -> "ExperimentConfig":
        for t in self.test:
            if t not in TESTS:
                raise ConfigError(f"unknown test {t!r}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.format not in ("text", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.N < 2 or self.trials < 0:
            raise ConfigError("need N >= 2 and trials >= 0")
        if not (self.q_min > 0 and self.dq > 0 and self.q_max > self.q_min):
            raise ConfigError("need q_min > 0, dq > 0 and q_max > q_min")
        try:
            for q in self.q:
                for g in self.gamma:
                    for th in self.theta:
                        for s in self.sigma_ratio:
                            ScenarioParams(q, s, g, th, min(self.nu), min(self.L))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def one(self, name: str):
        values = getattr(self, name)
        if len(values) != 1:
            raise ConfigError(f"{name} must be a single value here, got {values}")
        return values[0]

    def echo(self) -> str:
        # the output path is left out so that reruns elsewhere are byte-identical
        d = dataclasses.asdict(self)
        d.pop("output")
        return json.dumps(d, sort_keys=True)


LIST_FIELDS = {"test": str, "gamma": float, "theta": float, "nu": int, "q": float, "L": int, "sigma_ratio": float}
SCALAR_FIELDS = {f.name: f.type for f in dataclasses.fields(ExperimentConfig) if f.name not in LIST_FIELDS}


def parse_values(raw, kind):
    """Scalar, list, ``a,b,c`` or inclusive ``start:stop:step``."""
    if isinstance(raw, list):
        return [kind(v) for v in raw]
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return [kind(raw)]
    text = str(raw).strip()
    if kind is not str and ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) == 2:
            parts.append(1.0)
        start, stop, step = parts
        if step <= 0 or stop < start:
            raise ConfigError(f"bad range {text!r}")
        n = int(math.floor((stop - start) / step + 1e-9))
        return [kind(round(start + k * step, 12)) for k in range(n + 1)]
    return [kind(v) for v in text.split(",") if v.strip()]


def build_config(file_values: dict, flag_values: dict) -> ExperimentConfig:
    merged = dict(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    unknown = set(merged) - set(LIST_FIELDS) - set(SCALAR_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw = {}
    try:
        for k, v in merged.items():
            if k in LIST_FIELDS:
                kw[k] = parse_values(v, LIST_FIELDS[k])
            elif k in ("N", "trials", "seed"):
                kw[k] = int(v)
            elif k in ("q_min", "q_max", "dq"):
                kw[k] = float(v)
            else:
                kw[k] = v
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return ExperimentConfig(**kw).validate()


def fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else f"{v:.10g}"
    return str(v)


def write_csv(rows: list[dict], columns: list[str], cfg: ExperimentConfig, path: str | None, kind: str) -> str:
    buf = io.StringIO()
    buf.write(f"# covertseq {kind} schema={SCHEMA_VERSION}\n")
    buf.write(f"# config={cfg.echo()}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) for c in columns])
    text = buf.getvalue()
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


def row_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


# --- commands -----------------------------------------------------------------

def cmd_calibrate(cfg: ExperimentConfig, verify: bool = False) -> int:
    reports = []
    for k, (test, gamma, q) in enumerate((t, g, q) for t in cfg.test for g in cfg.gamma for q in cfg.q):
        thr = threshold_for(test, gamma, q)
        rep = {"test": test, "gamma": gamma, "q": q, "threshold": thr}
        if test == SHEWHART:
            rep["name"] = "eta_s_prime"
        elif test == CUSUM:
            rep["name"] = "eta_hat_c"
            rep["arl_analytic"] = cusum_arl(thr, q)
        else:
            rep["name"] = "eta_r"
            rep["arl_analytic"] = gamma
        if verify:
            trials = cfg.trials or 100_000
            est = estimate_arl2fa(Detector(test, thr, q), trials, row_seed(cfg.seed, k))
            rep.update(arl_mc=est.mean, arl_mc_stderr=est.std_error, trials=trials,
                       arl_ci95=(est.mean - 1.96 * est.std_error, est.mean + 1.96 * est.std_error))
        reports.append(rep)
    if cfg.format == "json":
        out = json.dumps(reports, indent=2)
    else:
        lines = []
        for r in reports:
            line = f"{r['test']}: gamma={fmt(r['gamma'])} q={fmt(r['q'])} {r['name']}={r['threshold']:.6g}"
            if "arl_mc" in r:
                lo, hi = r["arl_ci95"]
                line += f" ARL_mc={r['arl_mc']:.6g} (95% CI {lo:.6g}..{hi:.6g}, {r['trials']} runs)"
            lines.append(line)
        out = "\n".join(lines)
    _emit(out, cfg.output)
    return EXIT_OK


def cmd_covert(cfg: ExperimentConfig) -> int:
    rows = []
    grid = [(t, q, L, nu) for t in cfg.test for q in cfg.q for L in cfg.L for nu in cfg.nu]
    gamma = cfg.one("gamma")
    for k, (test, q, L, nu) in enumerate(grid):
        kw = {"N": cfg.N} if test == SR else ({"engine": cfg.engine} if test == CUSUM else {})
        res = covert_prob(test, q, L, nu, gamma, **kw)
        row = {"q": q, "L": L, "nu": nu, "test": test, "Q_analytic": res.value, "Q_mc": math.nan, "mc_stderr": math.nan}
        if cfg.trials:
            det = Detector(test, threshold_for(test, gamma, q), q)
            est = estimate_covert_prob(det, nu, L, cfg.trials, row_seed(cfg.seed, k))
            row.update(Q_mc=est.mean, mc_stderr=est.std_error)
        rows.append(row)
    text = write_csv(rows, ["q", "L", "nu", "test", "Q_analytic", "Q_mc", "mc_stderr"], cfg, cfg.output, "covert")
    if not cfg.output:
        sys.stdout.write(text)
    return EXIT_OK


def _optimum(cfg: ExperimentConfig, test: str, method: str, gamma, theta, nu, ratio) -> Optimum:
    if test == SHEWHART:
        if method == APPROX:
            return approx_shewhart(gamma, theta, ratio)
        return exhaustive_shewhart(gamma, theta, ratio)
    if method != ALGORITHM1:
        raise ConfigError(f"method {method!r} applies to the Shewhart test only")
    scan = scan_curves(test, [nu], theta, gamma, cfg.q_min, cfg.q_max, cfg.dq, n_grid=cfg.N, engine=cfg.engine)
    return scan.optimum(nu, theta, ratio)


def cmd_optimize(cfg: ExperimentConfig, trace: str | None = None, bits: bool = False) -> int:
    test, gamma, theta = cfg.one("test"), cfg.one("gamma"), cfg.one("theta")
    nu, ratio = cfg.one("nu"), cfg.one("sigma_ratio")
    method = cfg.method
    if test == SHEWHART and method == ALGORITHM1:
        method = EXHAUSTIVE
    opt = _optimum(cfg, test, method, gamma, theta, nu, ratio)
    scale = 1.0 / math.log(2.0) if bits else 1.0
    unit = "bits" if bits else "nats"
    if trace:
        rows = [{"q": q, "L": L, "Q": v, "I": i * scale} for q, L, v, i in opt.trace]
        write_csv(rows, ["q", "L", "Q", "I"], cfg, trace, "trace")
    if not opt.feasible:
        diag = _infeasibility_diagnostic(test, gamma, theta, nu, cfg)
        _emit(json.dumps({"feasible": False, "test": test, "method": opt.method, **diag}, indent=2)
              if cfg.format == "json" else f"infeasible: {diag['reason']}", cfg.output)
        return EXIT_INFEASIBLE
    report = {"test": test, "method": opt.method, "q_star": opt.q_star, "L_star": opt.l_star,
              "I_star": opt.i_star * scale, "unit": unit, "gamma": gamma, "theta": theta, "nu": nu}
    report.update({k: v for k, v in opt.diagnostics.items() if isinstance(v, (int, float, str))})
    if cfg.format == "json":
        out = json.dumps(report, indent=2)
    else:
        out = f"{test} ({opt.method}): q*={opt.q_star:.10g} L*={opt.l_star} I*={opt.i_star * scale:.10g} {unit}"
    _emit(out, cfg.output)
    return EXIT_OK


def _infeasibility_diagnostic(test, gamma, theta, nu, cfg) -> dict:
    if test == SHEWHART:
        return {"reason": f"theta={theta} must be below 1 - 1/gamma = {1 - 1 / gamma:.10g}", "theta_max": 1 - 1 / gamma}
    # the one-sample bound at the smallest grid power is the most permissive screen
    rep = feasibility_check(test, cfg.q_min, nu, gamma, n_grid=cfg.N)
    return {"reason": f"no grid pair reaches theta={theta}; at q={cfg.q_min:g} no duration is covert above {rep.max_theta:.10g}",
            "theta_max_at_q_min": rep.max_theta}


# --- figures ------------------------------------------------------------------

def figure_rows(fig: str, test: str, cfg: ExperimentConfig) -> tuple[list[dict], list[str]]:
    """Rows and columns of one figure for one test."""
    gamma, theta, nu, ratio = cfg.gamma[0], cfg.theta[0], cfg.nu[0], cfg.sigma_ratio[0]
    kw = {"N": cfg.N} if test == SR else ({"engine": cfg.engine} if test == CUSUM else {})
    if fig == "covert-vs-L":
        Ls = cfg.L if len(cfg.L) > 1 else list(range(1, 41))
        rows = [{"L": L, "Q": covert_prob(test, cfg.q[0], L, nu, gamma, **kw).value} for L in Ls]
        return rows, ["L", "Q"]
    if fig == "covert-vs-q":
        qs = cfg.q if len(cfg.q) > 1 else parse_values("0.01:1:0.01", float)
        rows = [{"q": q, "Q": covert_prob(test, q, cfg.L[0], nu, gamma, **kw).value} for q in qs]
        return rows, ["q", "Q"]
    if fig in ("I-vs-q", "I-vs-L"):
        opt = _frontier(cfg, test, gamma, theta, nu, ratio)
        return _frontier_rows(fig, opt), (["q", "L", "Q", "I"] if fig == "I-vs-q" else ["L", "q", "Q", "I"])
    axis, default = SWEEP_DEFAULTS[fig]
    values = getattr(cfg, axis) if len(getattr(cfg, axis)) > 1 else default
    rows = []
    if test == SHEWHART:
        for v in values:
            p = {"gamma": gamma, "theta": theta, "sigma_ratio": ratio, axis: v}
            opt = exhaustive_shewhart(p["gamma"], p["theta"], p["sigma_ratio"])
            rows.append(_opt_row(axis, v, opt))
        return rows, [axis, "q_star", "L_star", "I_star", "feasible"]
    if axis == "gamma":
        for v in values:
            scan = scan_curves(test, [nu], theta, v, cfg.q_min, cfg.q_max, cfg.dq, n_grid=cfg.N, engine=cfg.engine)
            rows.append(_opt_row(axis, v, scan.optimum(nu, theta, ratio)))
    else:
        nus = values if axis == "nu" else [nu]
        th_min = min(values) if axis == "theta" else theta
        scan = scan_curves(test, nus, th_min, gamma, cfg.q_min, cfg.q_max, cfg.dq, n_grid=cfg.N, engine=cfg.engine)
        for v in values:
            p = {"nu": nu, "theta": theta, "sigma_ratio": ratio, axis: v}
            rows.append(_opt_row(axis, v, scan.optimum(int(p["nu"]), p["theta"], p["sigma_ratio"])))
    return rows, [axis, "q_star", "L_star", "I_star", "feasible"]


def _opt_row(axis, v, opt: Optimum) -> dict:
    return {axis: v, "q_star": opt.q_star, "L_star": opt.l_star, "I_star": opt.i_star, "feasible": int(opt.feasible)}


def _frontier(cfg, test, gamma, theta, nu, ratio) -> list[tuple[float, int, float, float]]:
    """Longest covert duration at each grid power."""
    if test == SHEWHART:
        out = []
        for q in parse_values(f"{cfg.q_min}:{cfg.q_max}:{cfg.dq}", float):
            L = shewhart_duration(q, gamma, theta)
            if L >= 1:
                out.append((q, L, (1.0 - 1.0 / gamma ** (1.0 / (1.0 + q))) ** L, utility(q, L, ratio)))
        return out
    scan = scan_curves(test, [nu], theta, gamma, cfg.q_min, cfg.q_max, cfg.dq, n_grid=cfg.N, engine=cfg.engine)
    out = []
    for q, cq in zip(scan.qs, scan.curves):
        if cq is None:
            continue
        ok = [v >= theta for v in cq[nu]]
        L = ok.index(False) if False in ok else len(ok)
        if L >= 1:
            out.append((float(q), L, cq[nu][L - 1], utility(float(q), L, ratio)))
    return out


def _frontier_rows(fig, frontier) -> list[dict]:
    if fig == "I-vs-q":
        return [{"q": q, "L": L, "Q": v, "I": i} for q, L, v, i in frontier]
    best: dict[int, tuple] = {}
    for q, L, v, i in frontier:
        if L not in best or i > best[L][3]:
            best[L] = (q, L, v, i)
    return [{"L": L, "q": q, "Q": v, "I": i} for L, (q, _, v, i) in sorted(best.items())]


def cmd_figure(cfg: ExperimentConfig, fig: str, out_dir: str) -> int:
    if fig not in FIGURES:
        raise ConfigError(f"unknown figure {fig!r}; choose from {', '.join(FIGURES)}")
    for test in cfg.test:
        rows, cols = figure_rows(fig, test, cfg)
        path = Path(out_dir) / f"{fig}_{test}.csv"
        write_csv(rows, cols, cfg, str(path), f"figure {fig} {test}")
        print(path)
    return EXIT_OK


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text + "\n")
    else:
        print(text)


# --- argument parsing ---------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of settings; flags override it")
    p.add_argument("--test", help="shewhart, cusum, sr or a comma list")
    p.add_argument("--gamma", help="ARL to false alarm")
    p.add_argument("--theta", help="covert-probability floor")
    p.add_argument("--nu", help="change point(s)")
    p.add_argument("--q", help="normalized power(s)")
    p.add_argument("--L", help="duration(s)")
    p.add_argument("--sigma-ratio", dest="sigma_ratio", help="Bob-to-Willie noise ratio in the utility")
    p.add_argument("--N", type=int, help="SR quadrature cells")
    p.add_argument("--trials", type=int, help="Monte Carlo runs (0 disables)")
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="write results here instead of stdout")
    p.add_argument("--format", choices=("text", "json"))
    p.add_argument("--q-min", dest="q_min", type=float)
    p.add_argument("--q-max", dest="q_max", type=float)
    p.add_argument("--dq", type=float)
    p.add_argument("--engine", choices=("auto", "tables", "oracle"), help="CUSUM evaluation engine")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covertseq", description="Covert transmission against sequential detectors.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("calibrate", help="thresholds for a target ARL to false alarm")
    _common(p)
    p.add_argument("--verify", action="store_true", help="check the ARL by Monte Carlo")
    p = sub.add_parser("covert", help="covert probabilities on a grid, as CSV")
    _common(p)
    p = sub.add_parser("optimize", help="maximize throughput under the covert floor")
    _common(p)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--trace", help="CSV path for every evaluated (q, L, Q, I)")
    p.add_argument("--bits", action="store_true", help="report utility in bits")
    p = sub.add_parser("figure", help="CSV data for one figure, one file per test")
    _common(p)
    p.add_argument("figure", choices=FIGURES)
    p.add_argument("--out-dir", default="figures")
    return parser


CONFIG_FLAGS = tuple(LIST_FIELDS) + ("N", "trials", "seed", "output", "format", "q_min", "q_max", "dq", "engine", "method")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        file_values = {}
        if args.config:
            try:
                file_values = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
            if not isinstance(file_values, dict):
                raise ConfigError("config file must hold a JSON object")
        flags = {k: getattr(args, k, None) for k in CONFIG_FLAGS}
        if args.command == "optimize" and args.method is None and "method" not in file_values:
            flags["method"] = ALGORITHM1
        cfg = build_config(file_values, flags)
        if args.command == "calibrate":
            return cmd_calibrate(cfg, args.verify)
        if args.command == "covert":
            return cmd_covert(cfg)
        if args.command == "optimize":
            return cmd_optimize(cfg, args.trace, args.bits)
        return cmd_figure(cfg, args.figure, args.out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CalibrationError, ThresholdError, CensoringError) as exc:
        print(f"calibration error: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except ConditioningStarvation as exc:
        print(f"conditioning starvation: {exc}", file=sys.stderr)
        return EXIT_STARVATION


if __name__ == "__main__":
    sys.exit(main())
