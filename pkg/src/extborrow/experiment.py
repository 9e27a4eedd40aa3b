"""Scenario runs, Table-1 style summaries, and CSV / plot-data emission."""

from __future__ import annotations

import csv
import dataclasses
import enum
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .borrow_estimation import (
    Method,
    SolverConfig,
    Stability,
    d_eff_exact,
    d_eff_generalized,
    ehss_events,
    ehss_patients,
)
from .errors import EvaluationFailed, FitError
from .survival_models import ModelKind, fit_model
from .trial_sim import ScenarioConfig, simulate_dataset

log = logging.getLogger(__name__)


class Scenario(str, enum.Enum):
    EXPONENTIAL = "exponential"
    WEIBULL = "weibull"

    @property
    def model_kind(self) -> ModelKind:
        return ModelKind.EXPONENTIAL if self is Scenario.EXPONENTIAL else ModelKind.COX

    @property
    def default_shape(self) -> float:
        return 1.0 if self is Scenario.EXPONENTIAL else 1.15


def scenario_config(scenario: Scenario | str, **overrides) -> ScenarioConfig:
    scenario = Scenario(scenario)
    overrides.setdefault("weibull_shape", scenario.default_shape)
    return ScenarioConfig(**overrides)


@dataclass(frozen=True)
class SimulationRecord:
    scenario: Scenario
    hr: float
    sim_index: int
    seed_info: tuple
    n_C: int
    n_E: int
    d_C: int
    d_E: int
    d_ext: int
    kappa: float
    tau2_ref: float
    tau2_hyb: float
    estimate_exact: Optional[float]
    estimate_ehss_events: float
    estimate_ehss_patients: float
    estimate_generalized: Optional[float]
    derivative: Optional[float]
    stability: Stability
    effective_patients_generalized: Optional[float]
    regeneration_count: int

    @property
    def stratum(self) -> str:
        return "stable" if self.stability is Stability.STABLE else "unstable"


@dataclass(frozen=True)
class SummaryRow:
    stability_stratum: str
    hr: float
    method: str
    n_sims: int
    bias: float
    sd: Optional[float]


@dataclass
class RunResult:
    records: list
    fit_failures: int = 0
    regenerations: int = 0

    @property
    def failure_fraction(self) -> float:
        return self.fit_failures / max(len(self.records), 1)


def simulate_record(
    config: ScenarioConfig,
    scenario: Scenario | str,
    hr_index: int,
    sim_index: int,
    solver: SolverConfig = SolverConfig(),
) -> tuple[SimulationRecord, int]:
    """One dataset through every estimator. Returns ``(record, fit_failures)``.

    A failed reference or hybrid fit regenerates the dataset from a fresh
    stream; a failed refit inside the root search yields ``unstable-no-root``.
    """
    scenario = Scenario(scenario)
    kind = scenario.model_kind
    failures = 0
    attempt = 0
    while True:
        snap, attempt = simulate_dataset(config, hr_index, sim_index, start_attempt=attempt)
        try:
            tau2_ref = fit_model(kind, snap.trial_subjects).precision
            tau2_hyb = fit_model(kind, list(snap.subjects)).precision
        except FitError as exc:
            failures += 1
            log.warning("fit failed hr_index=%d sim=%d attempt=%d: %s; regenerating", hr_index, sim_index, attempt, exc)
            attempt += 1
            continue
        break

    exact = None
    if kind is ModelKind.EXPONENTIAL:
        exact = d_eff_exact(tau2_hyb, snap.d_C, snap.d_E)
    try:
        gen = d_eff_generalized(snap, tau2_hyb, kind, solver, kappa=snap.kappa)
        gen_value, slope, stability, patients = gen.d_eff_hat, gen.derivative_at_solution, gen.stability, gen.effective_patients
    except EvaluationFailed as exc:
        failures += 1
        log.warning("generalized search failed hr_index=%d sim=%d: %s", hr_index, sim_index, exc)
        gen_value = slope = patients = None
        stability = Stability.UNSTABLE_NO_ROOT

    record = SimulationRecord(
        scenario=scenario,
        hr=config.hazard_ratios[hr_index],
        sim_index=sim_index,
        seed_info=(config.base_seed, hr_index, sim_index, attempt),
        n_C=snap.n_C,
        n_E=snap.n_E,
        d_C=snap.d_C,
        d_E=snap.d_E,
        d_ext=snap.d_ext,
        kappa=snap.kappa,
        tau2_ref=tau2_ref,
        tau2_hyb=tau2_hyb,
        estimate_exact=exact,
        estimate_ehss_events=ehss_events(tau2_hyb, tau2_ref, snap.d_C, snap.d_E),
        estimate_ehss_patients=ehss_patients(tau2_hyb, tau2_ref, snap.n_C, snap.n_E),
        estimate_generalized=gen_value,
        derivative=slope,
        stability=stability,
        effective_patients_generalized=patients,
        regeneration_count=attempt,
    )
    return record, failures


def _simulate_task(task):
    return simulate_record(*task)


def _sort_key(r: SimulationRecord):
    return (r.scenario.value, r.hr, r.sim_index)


def run_scenario(
    config: ScenarioConfig,
    scenario: Scenario | str,
    solver: SolverConfig = SolverConfig(),
    jobs: int = 1,
) -> RunResult:
    scenario = Scenario(scenario)
    tasks = [
        (config, scenario, h, s, solver)
        for h in range(len(config.hazard_ratios))
        for s in range(config.sims_per_hr)
    ]
    if jobs > 1:
        chunk = max(1, len(tasks) // (jobs * 8))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_simulate_task, tasks, chunksize=chunk))
    else:
        results = [_simulate_task(t) for t in tasks]
    records = sorted((r for r, _ in results), key=_sort_key)
    out = RunResult(
        records=records,
        fit_failures=sum(f for _, f in results),
        regenerations=sum(r.regeneration_count for r in records),
    )
    log.info(
        "%s: %d records, %d regenerations, %d fit failures",
        scenario.value, len(records), out.regenerations, out.fit_failures,
    )
    return out


SUMMARY_METHODS = (
    (Method.GENERALIZED, "estimate_generalized"),
    (Method.EXACT, "estimate_exact"),
    (Method.EHSS_EVENTS, "estimate_ehss_events"),
)


def summarize(records: Sequence[SimulationRecord], unfiltered: bool = False) -> list[SummaryRow]:
    """Bias and SD of ``estimate - d_ext`` by (stability stratum, HR, method).

    Generalized estimates appear only in the stable stratum unless
    ``unfiltered`` is set; the other methods appear in both strata.
    """
    if not records:
        raise ValueError("no records to summarize")
    rows = []
    hrs = sorted({r.hr for r in records})
    for stratum in ("stable", "unstable"):
        for hr in hrs:
            group = [r for r in records if r.hr == hr and r.stratum == stratum]
            for method, attr in SUMMARY_METHODS:
                if method is Method.GENERALIZED and stratum == "unstable" and not unfiltered:
                    continue
                errs = np.array(
                    [getattr(r, attr) - r.d_ext for r in group if getattr(r, attr) is not None],
                    dtype=float,
                )
                if errs.size == 0:
                    continue
                sd = float(np.std(errs, ddof=1)) if errs.size > 1 else None
                rows.append(SummaryRow(stratum, hr, method.value, int(errs.size), float(errs.mean()), sd))
    return rows


# --- CSV ---------------------------------------------------------------------

def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ":".join(str(v) for v in value)
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".10g")
    return str(value)


def _parser(annotation: str):
    optional = annotation.startswith("Optional[")
    base = annotation[len("Optional["):-1] if optional else annotation
    conv = {
        "float": float,
        "int": int,
        "str": str,
        "tuple": lambda s: tuple(int(v) for v in s.split(":")),
        "Scenario": Scenario,
        "Stability": Stability,
    }[base]

    def parse(text):
        if text == "":
            if optional:
                return None
            raise ValueError(f"missing required {base} value")
        return conv(text)

    return parse


def emit_csv(rows: Iterable, path, row_type=None) -> Path:
    rows = list(rows)
    row_type = row_type or (type(rows[0]) if rows else SimulationRecord)
    names = [f.name for f in dataclasses.fields(row_type)]
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(names)
            for row in rows:
                writer.writerow([_format(getattr(row, n)) for n in names])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path, row_type=SimulationRecord) -> list:
    fields = dataclasses.fields(row_type)
    parsers = {f.name: _parser(f.type) for f in fields}
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = set(parsers) - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"{path}: missing columns {sorted(missing)}")
            return [row_type(**{n: p(row[n]) for n, p in parsers.items()}) for row in reader]
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc


# --- plot data ---------------------------------------------------------------

@dataclass(frozen=True)
class PlotPoint:
    panel: str
    scenario: str
    hr: float
    method: str
    stability_stratum: str
    sim_index: int
    truth: int
    estimate: float


def plot_points(records: Sequence[SimulationRecord], unfiltered: bool = False) -> list[PlotPoint]:
    """Scatter points (truth = d_ext, estimate) grouped into figure panels.

    Weibull runs are split into stable generalized, stable EHSS_d and
    unstable EHSS_d panel groups; exponential runs and ``unfiltered`` output
    keep every point in a single stratum labelled ``all``.
    """
    points = []
    for r in records:
        split = r.scenario is Scenario.WEIBULL and not unfiltered
        stratum = r.stratum if split else "all"
        for method, attr in SUMMARY_METHODS:
            value = getattr(r, attr)
            if value is None:
                continue
            if method is Method.GENERALIZED and split and stratum != "stable":
                continue
            panel = f"{r.scenario.value}-{method.value}-{stratum}"
            points.append(PlotPoint(panel, r.scenario.value, r.hr, method.value, stratum, r.sim_index, r.d_ext, value))
    points.sort(key=lambda p: (p.panel, p.hr, p.sim_index))
    return points


def emit_plot_data(records: Sequence[SimulationRecord], out_dir, unfiltered: bool = False, render: bool = True) -> list[Path]:
    out_dir = Path(out_dir)
    points = plot_points(records, unfiltered)
    written = [emit_csv(points, out_dir / "plot_data.csv", PlotPoint)]
    if render:
        written += _render_svgs(points, out_dir)
    return written


def _render_svgs(points: Sequence[PlotPoint], out_dir: Path) -> list[Path]:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; skipping SVG rendering")
        return []
    plt.rcParams["svg.hashsalt"] = "extborrow"
    written = []
    for panel in sorted({p.panel for p in points}):
        pts = [p for p in points if p.panel == panel]
        hrs = sorted({p.hr for p in pts})
        fig, axes = plt.subplots(1, len(hrs), figsize=(3.2 * len(hrs), 3.2), squeeze=False)
        for ax, hr in zip(axes[0], hrs):
            x = np.array([p.truth for p in pts if p.hr == hr], dtype=float)
            y = np.array([p.estimate for p in pts if p.hr == hr])
            ax.scatter(x, y, s=4, alpha=0.4, color="black")
            lo = min(x.min(), y.min())
            hi = max(x.max(), y.max())
            ax.plot([lo, hi], [lo, hi], "r--", lw=1)
            ax.set_title(f"HR = {hr:g}")
            ax.set_xlabel("external events (truth)")
        axes[0][0].set_ylabel(panel)
        fig.tight_layout()
        path = out_dir / f"{panel}.svg"
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
        written.append(path)
    return written

