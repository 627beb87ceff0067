"""Command-line front end: ``run``, ``loe`` and ``plot``.

Config files are flat ``key = value`` text; ``#`` starts a comment. Attack
schedules use indexed keys such as ``attack.1.start``, ``attack.1.end``
(``none`` for open-ended) and ``attack.1.vpo``.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .bench import pcrb_curve
from .metrics import TRACKER_NAMES, AggregateTable, run_monte_carlo, tracker_spec
from .models import MeasurementModel, build_cv_model
from .sim import AttackSchedule, ScenarioConfig, generate_trajectory, scenario
from .tracker import LifecycleThresholds

CSV_COLUMNS = ("k", "tracker", "rmse_m", "p_jam", "bias_true_m", "bias_est_m", "bias_std_m",
               "c_k_mean")
LOE_COLUMN = "pcrb_m"
PANELS = (("rmse", "rmse_m", "position RMSE [m]"),
          ("p_jam", "p_jam", "jamming probability"),
          ("bias", "bias_est_m", "bias [m]"),
          ("c_k", "c_k_mean", "awake components"))


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    scenario: int = 1
    trackers: tuple = ("adaptive", "nonadaptive", "naive", "clairvoyant")
    n_runs: int = 100
    seed: int = 0
    prune_threshold: float = 1e-5
    cap: int = 100
    alpha: float = 10.0
    lambda1_bar: float = 3.0
    b_na: float = 70.0
    na_eig_los: float = 500.0
    na_eig_perp: float = 1.0
    u_act: float = 5.0
    t_act: float = 7.0
    u_dorm: float = 5.0
    t_dorm: float = 4.0
    multi_component: Optional[bool] = None
    n_steps: Optional[int] = None
    sigma_q: Optional[float] = None
    sigma_r: Optional[float] = None
    initial_state: Optional[tuple] = None
    attacks: Optional[tuple] = None
    out: str = "out"
    echo: dict = field(default_factory=dict)

    def scenario_config(self) -> ScenarioConfig:
        cfg = scenario(self.scenario)
        kw = {}
        for name in ("n_steps", "sigma_q", "sigma_r", "initial_state", "attacks"):
            v = getattr(self, name)
            if v is not None:
                kw[name] = v
        return replace(cfg, **kw)

    def tracker_overrides(self) -> dict:
        return dict(prune_threshold=self.prune_threshold, cap=self.cap, alpha=self.alpha,
                    lambda1_bar=self.lambda1_bar, b_na=self.b_na,
                    na_eigvals=(self.na_eig_los, self.na_eig_perp),
                    thresholds=LifecycleThresholds(self.u_act, self.t_act, self.u_dorm, self.t_dorm))


def _positive(cast):
    def conv(s):
        v = cast(s)
        if not v > 0:
            raise ValueError("must be positive")
        return v
    return conv


def _nonneg_int(s):
    v = int(s)
    if v < 0:
        raise ValueError("must be nonnegative")
    return v


def _nonneg_float(s):
    v = float(s)
    if not v >= 0:
        raise ValueError("must be nonnegative")
    return v


def _prob(s):
    v = float(s)
    if not 0 <= v < 1:
        raise ValueError("must lie in [0, 1)")
    return v


def _bool_or_auto(s):
    s = s.strip().lower()
    if s == "auto":
        return None
    if s in ("true", "yes", "1"):
        return True
    if s in ("false", "no", "0"):
        return False
    raise ValueError("expected true, false or auto")


def _trackers(s):
    names = tuple(x.strip() for x in s.split(",") if x.strip())
    bad = [x for x in names if x not in TRACKER_NAMES]
    if bad or not names:
        raise ValueError(f"expected a comma-separated subset of {', '.join(TRACKER_NAMES)}")
    return names


def _vector4(s):
    v = tuple(float(x) for x in s.split(","))
    if len(v) != 4:
        raise ValueError("expected four comma-separated numbers")
    return v


def _scenario_id(s):
    v = int(s)
    if v not in (1, 2, 3, 4):
        raise ValueError("must be 1, 2, 3 or 4")
    return v


KEYS = {
    "scenario": _scenario_id,
    "trackers": _trackers,
    "runs": _positive(int),
    "seed": _nonneg_int,
    "prune_threshold": _prob,
    "cap": _positive(int),
    "alpha": _positive(float),
    "lambda1_bar": _positive(float),
    "b_na": _nonneg_float,
    "na_eig_los": _positive(float),
    "na_eig_perp": _positive(float),
    "u_act": _positive(float),
    "t_act": _positive(float),
    "u_dorm": _positive(float),
    "t_dorm": _positive(float),
    "multi_component": _bool_or_auto,
    "n_steps": _positive(int),
    "sigma_q": _nonneg_float,
    "sigma_r": _positive(float),
    "initial_state": _vector4,
    "out": str,
}
FIELD_FOR_KEY = {"runs": "n_runs"}
ATTACK_KEY = re.compile(r"^attack\.(\d+)\.(start|end|vpo)$")


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse flat ``key = value`` text; raise ConfigError naming line and key."""
    cfg = ExperimentConfig()
    attacks: dict = {}
    seen: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: key {key!r} already set on line {seen[key]}")
        seen[key] = lineno
        m = ATTACK_KEY.match(key)
        try:
            if m:
                idx, part = int(m.group(1)), m.group(2)
                if idx < 1:
                    raise ValueError("attack indices start at 1")
                if part == "end" and value.lower() == "none":
                    v = None
                elif part == "vpo":
                    v = _positive(float)(value)
                else:
                    v = _positive(int)(value)
                attacks.setdefault(idx, {})[part] = (v, lineno)
            elif key in KEYS:
                setattr(cfg, FIELD_FOR_KEY.get(key, key), KEYS[key](value))
            else:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{source}:{lineno}: invalid value {value!r} for {key!r}: {exc}") from None
        cfg.echo[key] = value
    if attacks:
        sched = []
        for idx in sorted(attacks):
            parts = attacks[idx]
            missing = [p for p in ("start", "vpo") if p not in parts]
            if missing:
                line = min(ln for _, ln in parts.values())
                raise ConfigError(f"{source}:{line}: attack.{idx} is missing {', '.join(missing)}")
            try:
                sched.append(AttackSchedule(parts["start"][0], parts.get("end", (None, 0))[0],
                                            parts["vpo"][0]))
            except ValueError as exc:
                raise ConfigError(f"{source}:{parts['start'][1]}: attack.{idx}: {exc}") from None
        cfg.attacks = tuple(sched)
    return cfg


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(round(x, 6)) if x != 0 else "0.0"


def table_to_csv(tab: AggregateTable) -> str:
    cols = CSV_COLUMNS + ((LOE_COLUMN,) if tab.pcrb is not None else ())
    lines = [",".join(cols)]
    for row in tab.rows():
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def read_metrics_csv(path) -> dict:
    """Load a metrics CSV into ``{column: list}``; validates header and body."""
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    for col in CSV_COLUMNS:
        if col not in header:
            raise ConfigError(f"{path}: missing column {col!r}")
    rows = list(reader)
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    cols = {c: [r[c] for r in rows] for c in header}
    try:
        for c in header:
            if c == "tracker":
                continue
            cols[c] = [float(v) for v in cols[c]]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed value in column {c!r}: {exc}") from None
    return cols


def write_plots(cols: dict, out_dir) -> list[Path]:
    """Write one SVG per panel; output bytes depend only on ``cols``."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = list(dict.fromkeys(cols["tracker"]))
    k = np.asarray(cols["k"])
    tr = np.asarray(cols["tracker"])
    paths = []
    with plt.rc_context({"svg.hashsalt": "rgpo-rfs", "svg.fonttype": "none"}):
        for panel, col, label in PANELS:
            fig, ax = plt.subplots(figsize=(6, 3.5))
            for name in names:
                sel = tr == name
                y = np.asarray(cols[col])[sel]
                if np.all(np.isnan(y)):
                    continue
                ax.plot(k[sel], y, label=name)
                if panel == "bias":
                    s = np.asarray(cols["bias_std_m"])[sel]
                    ax.fill_between(k[sel], y - s, y + s, alpha=0.2)
            if panel == "bias":
                first = tr == names[0]
                ax.plot(k[first], np.asarray(cols["bias_true_m"])[first], "k--", label="true")
            if panel == "rmse" and LOE_COLUMN in cols:
                first = tr == names[0]
                ax.plot(k[first], np.asarray(cols[LOE_COLUMN])[first], "k:", label="PCRB")
            ax.set_xlabel("time step k")
            ax.set_ylabel(label)
            ax.grid(True, alpha=0.3)
            if ax.lines:
                ax.legend(fontsize="small")
            fig.tight_layout()
            path = out_dir / f"{panel}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths.append(path)
    return paths


def _write_outputs(tab: AggregateTable, exp: ExperimentConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "metrics.csv").write_text(table_to_csv(tab), encoding="utf-8", newline="\n")
    lines = [f"{k} = {v}" for k, v in sorted(_config_echo(exp).items())]
    (out_dir / "config_used.txt").write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    write_plots(read_metrics_csv(out_dir / "metrics.csv"), out_dir)


def _config_echo(exp: ExperimentConfig) -> dict:
    scen = exp.scenario_config()
    out = {"scenario": exp.scenario, "trackers": ",".join(exp.trackers), "runs": exp.n_runs,
           "seed": exp.seed, "prune_threshold": exp.prune_threshold, "cap": exp.cap,
           "alpha": exp.alpha, "lambda1_bar": exp.lambda1_bar, "b_na": exp.b_na,
           "na_eig_los": exp.na_eig_los, "na_eig_perp": exp.na_eig_perp, "u_act": exp.u_act,
           "t_act": exp.t_act, "u_dorm": exp.u_dorm, "t_dorm": exp.t_dorm,
           "multi_component": "auto" if exp.multi_component is None else str(exp.multi_component).lower(),
           "n_steps": scen.n_steps, "sigma_q": scen.sigma_q, "sigma_r": scen.sigma_r,
           "initial_state": ",".join(_fmt(v) for v in scen.initial_state), "out": exp.out}
    for i, a in enumerate(scen.attacks, start=1):
        out[f"attack.{i}.start"] = a.start_step
        out[f"attack.{i}.end"] = "none" if a.end_step is None else a.end_step
        out[f"attack.{i}.vpo"] = a.pull_off_velocity
    return {k: _fmt(v) if not isinstance(v, str) else v for k, v in out.items()}


def _summary(tab: AggregateTable) -> list[str]:
    lines = []
    for name in tab.trackers:
        rmse = tab.rmse[name]
        pj = tab.p_jam[name]
        pj_txt = "n/a" if np.all(np.isnan(pj)) else f"{np.nanmean(pj):.3f}"
        lines.append(f"{name}: mean RMSE {np.mean(rmse):.2f} m, final RMSE {rmse[-1]:.2f} m, "
                     f"mean p_jam {pj_txt}, mean C_k {np.mean(tab.c_k[name]):.2f}")
    return lines


def run_experiment(exp: ExperimentConfig, loe: bool = False) -> AggregateTable:
    scen = exp.scenario_config()
    if loe:
        scen = replace(scen, attacks=(), turn_starts=(), turn_directions=(), sigma_q=0.0)
    specs = [tracker_spec(name, scen, exp.multi_component, **exp.tracker_overrides())
             for name in exp.trackers]
    truth = generate_trajectory(scen)
    pcrb = None
    if loe:
        t0 = specs[0].config
        curve = pcrb_curve(build_cv_model(scen.delta, 0.0, 0.0, 0), MeasurementModel.position(scen.sigma_r),
                           np.diag(t0.prior_var), scen.n_steps)
        pcrb = curve.bound[1:]
    return run_monte_carlo(scen, specs, exp.n_runs, exp.seed, truth=truth, pcrb=pcrb)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rgpo-rfs", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)
    for verb, helptext in (("run", "Monte Carlo experiment on a scenario"),
                           ("loe", "attack-free loss-of-efficiency study against the PCRB")):
        sp = sub.add_parser(verb, help=helptext)
        sp.add_argument("config", nargs="?", help="flat key = value config file")
        sp.add_argument("--scenario", type=int, choices=(1, 2, 3, 4))
        sp.add_argument("--runs", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--tracker", action="append", choices=TRACKER_NAMES,
                        help="tracker to run; repeatable (default: all)")
        sp.add_argument("--out", help="output directory")
    sp = sub.add_parser("plot", help="regenerate SVG panels from a metrics CSV")
    sp.add_argument("csv")
    sp.add_argument("--out", help="output directory (default: the CSV's directory)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "plot":
            cols = read_metrics_csv(args.csv)
            out = Path(args.out) if args.out else Path(args.csv).parent
            for path in write_plots(cols, out):
                print(path)
            return 0
        if args.config:
            path = Path(args.config)
            try:
                text = path.read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
            exp = parse_config(text, str(path))
        else:
            exp = ExperimentConfig()
        if args.scenario is not None:
            exp.scenario = args.scenario
        if args.runs is not None:
            if args.runs < 1:
                raise ConfigError("--runs must be at least 1")
            exp.n_runs = args.runs
        if args.seed is not None:
            exp.seed = args.seed
        if args.tracker:
            exp.trackers = tuple(dict.fromkeys(args.tracker))
        if args.out is not None:
            exp.out = args.out
        if args.verb == "loe":
            exp.attacks = ()
        tab = run_experiment(exp, loe=args.verb == "loe")
        _write_outputs(tab, exp, Path(exp.out))
        for line in _summary(tab):
            print(line)
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
