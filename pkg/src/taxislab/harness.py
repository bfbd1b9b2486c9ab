"""Experiment orchestration and persistence.

Every file written here starts with a ``# config_hash=<sha256>`` line; the
hash is taken over the canonical text of the configuration that produced
it (``config.ini`` in the same directory).  :func:`load_result` refuses
directories where the two disagree.
"""

from __future__ import annotations

import csv
import io
import json
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import plots
from .analysis import FitError, ModelSelection, fits_to_csv, select_rate_model, summary_block
from .config import ExperimentConfig, config_hash, config_keys, parse_config, to_ini
from .functionals import (
    WeightSet,
    default_eta,
    differential_inequality_residuals,
    records_to_csv,
    weights_for_regime,
)
from .grid import Grid
from .inequalities import TestFieldSpec, estimate_constants, measured_poincare_constant
from .model import Parameters, RegimeTag, SteadyState, classify_regime, steady_state
from .solver import (
    BlowUp,
    StepControl,
    TimeSeries,
    perturb_steady_state,
    save_checkpoint,
    simulate,
)

HASH_PREFIX = "# config_hash="


class HarnessError(RuntimeError):
    """A stage of an experiment failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class HarnessIOError(OSError):
    pass


class ResultMismatchError(ValueError):
    pass


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    config_hash: str
    regime: str
    u_star: float
    v_star: float
    weights: WeightSet | None = None
    series: TimeSeries | None = None
    selection: ModelSelection | None = None
    fit_error: str | None = None
    files: dict = field(default_factory=dict)
    status: str = "ok"
    directory: Path | None = None

    @property
    def exit_time(self):
        return None if self.series is None else self.series.exit_time

    def summary(self) -> dict:
        sel = self.selection
        return {
            "config_hash": self.config_hash,
            "status": self.status,
            "regime": self.regime,
            "steady_state": [self.u_star, self.v_star],
            "weights": None if self.weights is None else list(self.weights.six),
            "exit_time": self.exit_time,
            "clipped_mass": None if self.series is None else self.series.clipped_mass,
            "max_cfl": None if self.series is None else self.series.max_cfl,
            "winner": None if sel is None else sel.winner,
            "predicted": None if sel is None else sel.predicted,
            "K2": None if sel is None else sel.winner_fit().K2,
            "residual_factor": None if sel is None else sel.residual_factor,
            "fit_error": self.fit_error,
            "files": dict(sorted(self.files.items())),
        }


def _grid_of(cfg: ExperimentConfig) -> Grid:
    pts = cfg.grid.points
    lengths = cfg.grid.lengths if len(cfg.grid.lengths) == len(pts) else cfg.grid.lengths * len(pts)
    return Grid(pts, lengths)


def _weights(cfg, p, s, regime, grid) -> WeightSet:
    if cfg.monitoring.weights is not None:
        return WeightSet(*cfg.monitoring.weights)
    return weights_for_regime(p, s, regime, poincare_constant=measured_poincare_constant(grid))


def execute(cfg: ExperimentConfig) -> ExperimentResult:
    """Run one experiment in memory; no files are touched."""
    stage = "classify"
    try:
        p = cfg.parameters
        regime = classify_regime(p)
        stage = "grid"
        grid = _grid_of(cfg)
        stage = "steady_state"
        s = steady_state(p, grid.volume)
        result = ExperimentResult(cfg, config_hash(cfg), regime.tag.value, s.u_star, s.v_star)
        stage = "weights"
        result.weights = _weights(cfg, p, s, regime, grid)
        stage = "perturbation"
        pt = cfg.perturbation
        initial = perturb_steady_state(
            s, grid, pt.epsilon, pt.u_modes, pt.v_modes, seed=pt.seed,
            random_modes=pt.random_modes, preserve_mass=regime.tag is RegimeTag.H1,
            fold_v=pt.fold_v)
        stage = "simulate"
        st = cfg.stepping
        ctl = StepControl(st.dt, st.scheme, st.clip_negative, st.stability_guard)
        eta = cfg.monitoring.eta if cfg.monitoring.eta is not None else default_eta(s)
        result.series = simulate(initial, p, ctl, st.t_end, st.sample_interval, eta,
                                 result.weights, cfg.outputs.snapshot_times)
    except BlowUp as exc:
        raise HarnessError("simulate (blow-up sentinel)", exc) from exc
    except Exception as exc:
        raise HarnessError(stage, exc) from exc
    try:
        result.selection = select_rate_model(result.series.times, result.series.distance(),
                                             regime, cfg.monitoring.tail_fraction)
    except FitError as exc:
        result.fit_error = str(exc)
    return result


def _header(cfg_hash: str, extra=()) -> list[str]:
    return [f"config_hash={cfg_hash}", *extra]


def write_artifacts(result: ExperimentResult, out_dir) -> ExperimentResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg, h = result.config, result.config_hash
    files = result.files
    (out / "config.ini").write_text(to_ini(cfg))
    files["config"] = "config.ini"
    head = _header(h, [f"regime={result.regime}"])
    ser = result.series
    (out / "timeseries.csv").write_text(records_to_csv(ser.records, head))
    files["timeseries"] = "timeseries.csv"

    p = cfg.parameters
    s = SteadyState(result.u_star, result.v_star)
    try:
        ledger = differential_inequality_residuals(ser, p, s, result.weights, ser.eta)
        buf = io.StringIO()
        for line in head:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        names = sorted(ledger.slack)
        w.writerow(["t", "in_tube"] + names)
        for i, t in enumerate(ledger.t):
            w.writerow([f"{t:.17g}", int(ledger.applicable[i])] + [f"{ledger.slack[n][i]:.17g}" for n in names])
        (out / "monitors.csv").write_text(buf.getvalue())
        files["monitors"] = "monitors.csv"
    except ValueError:
        pass

    if result.selection is not None:
        sel = result.selection
        (out / "fits.csv").write_text(fits_to_csv([sel.exponential, sel.algebraic],
                                                  head + [f"winner={sel.winner}"]))
        files["fits"] = "fits.csv"
    if ser.snapshots:
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        for i, (t, (u, v)) in enumerate(sorted(ser.snapshots.items())):
            lines = [f"# {x}" for x in head + [f"t={t!r}", "order=axis0-fastest"]] + ["u,v"]
            lines += [f"{a:.17g},{b:.17g}" for a, b in
                      zip(np.ravel(u, order="F"), np.ravel(v, order="F"))]
            name = f"snapshot_{i:03d}.csv"
            (snap_dir / name).write_text("\n".join(lines) + "\n")
            files[f"snapshot_{i:03d}"] = f"snapshots/{name}"
    if ser.final_state is not None:
        st = cfg.stepping
        ctl = StepControl(st.dt, st.scheme, st.clip_negative, st.stability_guard)
        save_checkpoint(out / "checkpoint", ser.final_state, p, ctl, cfg.perturbation.seed,
                        {"config_hash": h})
        files["checkpoint"] = "checkpoint.csv"
    summary = [f"config hash : {h}", f"regime      : {result.regime}",
               f"steady state: ({result.u_star!r}, {result.v_star!r})",
               f"exit time   : {result.exit_time}",
               f"clipped mass: {ser.clipped_mass!r}"]
    if result.selection is not None:
        summary.append(summary_block(result.selection))
    elif result.fit_error:
        summary.append(f"fit skipped : {result.fit_error}")
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    files["summary"] = "summary.txt"
    if cfg.outputs.plots:
        (out / "plot_timeseries.py").write_text(plots.timeseries_script("timeseries.csv"))
        files["plot"] = "plot_timeseries.py"
    (out / "result.json").write_text(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")
    result.directory = out
    return result


def _mark_failed(out_dir, exc: BaseException, cfg: ExperimentConfig | None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stage = getattr(exc, "stage", "unknown")
    lines = [f"stage: {stage}", f"error: {exc}"]
    if cfg is not None:
        lines.insert(0, f"config_hash={config_hash(cfg)}")
        (out / "config.ini").write_text(to_ini(cfg))
    lines.append("".join(traceback.format_exception(exc)).rstrip())
    (out / "FAILED").write_text("\n".join(lines) + "\n")


def run_simulate(cfg: ExperimentConfig, out_dir=None) -> ExperimentResult:
    try:
        result = execute(cfg)
    except HarnessError as exc:
        if out_dir is not None:
            _mark_failed(out_dir, exc, cfg)
        raise
    if out_dir is not None:
        try:
            write_artifacts(result, out_dir)
        except OSError as exc:
            raise HarnessIOError(f"cannot write results to {out_dir}: {exc}") from exc
    return result


# -- sweeps --------------------------------------------------------------

SWEEP_COLUMNS = ("value", "regime", "winner", "K2", "exit_status")


def _qualify(axis: str) -> str:
    if "." in axis:
        return axis
    if axis in Parameters.__dataclass_fields__:
        return f"parameters.{axis}"
    raise ValueError(f"cannot resolve sweep axis {axis!r}; use section.key")


def _sweep_point(args):
    text, axis, value, out_dir = args
    row = {"value": value, "regime": "", "winner": "", "K2": float("nan"), "exit_status": ""}
    try:
        cfg = parse_config(text, [f"{axis}={value!r}"])
    except Exception as exc:
        row.update(regime="invalid", exit_status=f"failed: {exc}".replace("\n", " "))
        return row
    try:
        res = run_simulate(cfg, out_dir)
    except Exception as exc:
        try:
            row["regime"] = classify_regime(cfg.parameters).tag.value
        except Exception:
            row["regime"] = "invalid"
        row["exit_status"] = f"failed: {exc}".replace("\n", " ")
        return row
    row["regime"] = res.regime
    if res.selection is not None:
        row["winner"] = res.selection.winner
        row["K2"] = res.selection.winner_fit().K2
    row["exit_status"] = "inside" if res.exit_time is None else f"exit@{res.exit_time!r}"
    return row


def run_sweep(cfg: ExperimentConfig, axis: str, values, out_dir=None, workers: int = 1) -> list[dict]:
    values = [float(v) for v in values]
    if not values:
        return []
    axis = _qualify(axis)
    section, _, key = axis.partition(".")
    if key not in config_keys().get(section, ()):
        raise ValueError(f"unknown sweep axis {axis!r}")
    text = to_ini(cfg)
    out = None if out_dir is None else Path(out_dir)
    jobs = [(text, axis, v, None if out is None else out / f"point_{i:03d}")
            for i, v in enumerate(values)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(job) for job in jobs]
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(sweep_to_csv(rows, [f"config_hash={config_hash(cfg)}",
                                                           f"axis={axis}"]))
        (out / "config.ini").write_text(text)
        if cfg.outputs.plots:
            (out / "plot_sweep.py").write_text(plots.sweep_script("sweep.csv"))
    return rows


def sweep_to_csv(rows, header=()) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([f"{r['value']:.17g}", r["regime"], r["winner"], f"{r['K2']:.17g}", r["exit_status"]])
    return buf.getvalue()


# -- inequality campaigns and fits --------------------------------------

def run_inequalities(cfg: ExperimentConfig, out_dir=None):
    iq = cfg.inequalities
    dim = len(cfg.grid.points)
    lengths = cfg.grid.lengths if len(cfg.grid.lengths) == dim else cfg.grid.lengths * dim
    grid = Grid((iq.points,) * dim, lengths)
    spec = TestFieldSpec(seed=iq.seed, max_mode=(iq.max_mode,) * dim, decay=iq.decay, count=iq.count)
    reports = estimate_constants(spec, grid)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        h = config_hash(cfg)
        (out / "config.ini").write_text(to_ini(cfg))
        for name, rep in reports.items():
            (out / f"inequality_{name}.csv").write_text(
                rep.to_csv(_header(h, [f"family={name}", "empirical lower bound on the best constant"])))
        if cfg.outputs.plots:
            (out / "plot_inequalities.py").write_text(plots.inequality_script(sorted(reports)))
    return reports


def read_series_csv(path):
    """Return ``(columns, data, header_lines)`` of a commented CSV file."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise HarnessIOError(f"no such file: {path}") from None
    except OSError as exc:
        raise HarnessIOError(f"cannot read {path}: {exc}") from None
    header = [ln[1:].strip() for ln in text.splitlines() if ln.startswith("#")]
    rows = list(csv.reader(ln for ln in text.splitlines() if ln and not ln.startswith("#")))
    if not rows:
        raise HarnessIOError(f"{path} holds no table")
    cols = rows[0]
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise HarnessIOError(f"{path}: non-numeric entry ({exc})") from None
    return cols, data.reshape(-1, len(cols)), header


def run_fit(path, regime=None, tail_fraction: float = 0.8) -> ModelSelection:
    cols, data, header = read_series_csv(path)
    if "t" not in cols:
        raise HarnessIOError(f"{path} has no 't' column")
    t = data[:, cols.index("t")]
    if "w22_u" in cols and "w22_v" in cols:
        d = data[:, cols.index("w22_u")] + data[:, cols.index("w22_v")]
    elif "d" in cols:
        d = data[:, cols.index("d")]
    else:
        raise HarnessIOError(f"{path} has neither a 'd' column nor w22_u/w22_v")
    if regime is None:
        tags = [ln.partition("=")[2] for ln in header if ln.startswith("regime=")]
        regime = tags[0] if tags else RegimeTag.COEXISTENCE.value
    return select_rate_model(t, d, RegimeTag(regime), tail_fraction)


def file_hash(path) -> str | None:
    with open(path) as fh:
        for line in fh:
            if line.startswith(HASH_PREFIX):
                return line[len(HASH_PREFIX):].strip()
            if not line.startswith("#"):
                break
    return None


def load_result(out_dir) -> dict:
    """Read ``result.json`` after checking every artifact against ``config.ini``."""
    out = Path(out_dir)
    try:
        cfg = parse_config((out / "config.ini").read_text())
        summary = json.loads((out / "result.json").read_text())
    except FileNotFoundError as exc:
        raise HarnessIOError(f"incomplete result directory {out}: {exc}") from None
    h = config_hash(cfg)
    if summary.get("config_hash") != h:
        raise ResultMismatchError("result.json does not belong to config.ini")
    for key, name in summary.get("files", {}).items():
        path = out / name
        if not path.exists():
            raise ResultMismatchError(f"referenced file {name} is missing")
        if path.suffix == ".csv" and key != "checkpoint" and file_hash(path) != h:
            raise ResultMismatchError(f"{name} carries a different config hash")
    meta = json.loads((out / "checkpoint.json").read_text()) if (out / "checkpoint.json").exists() else None
    if meta is not None and meta.get("extra", {}).get("config_hash") != h:
        raise ResultMismatchError("checkpoint metadata carries a different config hash")
    return summary
