"""Estimators for the number of external events effectively borrowed.

Three estimators, from cheapest to most general:

* :func:`d_eff_exact` inverts the exponential precision ``d_C d_E / (d_C + d_E)``
  with ``d_C`` replaced by ``d_C + d_eff``.
* :func:`ehss_events` / :func:`ehss_patients` are the linear approximation
  ``size * (tau2_hyb / tau2_ref - 1)``.
* :func:`d_eff_generalized` up-weights trial controls by a common case weight
  ``w = d_eff / d_C + 1``, refits the reference model, and root-finds the
  ``d_eff`` whose precision matches the hybrid precision. The slope of the
  precision curve at the root is the stability diagnostic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, EvaluationFailed, FitError, KappaZero, PrecisionAtOrAbovePole
from .survival_models import ModelKind, SurvivalArrays, exponential_precision, fit_cox


class Method(str, enum.Enum):
    EXACT = "exact-exponential"
    EHSS_EVENTS = "ehss-events"
    EHSS_PATIENTS = "ehss-patients"
    GENERALIZED = "generalized"


class Stability(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE_DERIVATIVE = "unstable-derivative"
    UNSTABLE_NO_ROOT = "unstable-no-root"
    NOT_APPLICABLE = "not-applicable"

    @property
    def is_stable(self) -> bool:
        return self is Stability.STABLE


@dataclass(frozen=True)
class BorrowEstimate:
    method: Method
    d_eff_hat: Optional[float]
    derivative_at_solution: Optional[float] = None
    stability: Stability = Stability.NOT_APPLICABLE
    effective_patients: Optional[float] = None


@dataclass(frozen=True)
class SolverConfig:
    search_lower_offset: float = 0.001
    search_upper: float = 1000.0
    fd_epsilon: float = 0.0001
    derivative_cutoff: float = math.exp(-3)
    root_tolerance: float = 1e-8

    def __post_init__(self):
        for name in ("search_lower_offset", "search_upper", "fd_epsilon", "derivative_cutoff", "root_tolerance"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.fd_epsilon >= self.search_lower_offset:
            # the derivative probe at the lower end must keep w > 0
            raise ConfigError("fd_epsilon must be smaller than search_lower_offset")

    def interval(self, d_c: float) -> tuple[float, float]:
        lo, hi = -d_c + self.search_lower_offset, self.search_upper
        if not lo < hi:
            raise ConfigError(f"empty search interval ({lo}, {hi})")
        return lo, hi


def hybrid_precision_exponential(d_c: float, d_e: float, d_eff: float) -> float:
    """Exponential precision with ``d_eff`` extra control events."""
    return (d_c + d_eff) * d_e / (d_c + d_e + d_eff)


def d_eff_exact(tau2_hyb: float, d_C: int, d_E: int) -> float:
    if d_C < 1 or d_E < 1:
        raise ValueError("d_C and d_E must be >= 1")
    if tau2_hyb >= d_E:
        raise PrecisionAtOrAbovePole(f"tau2_hyb={tau2_hyb} >= d_E={d_E}")
    return (tau2_hyb * (d_C + d_E) - d_C * d_E) / (d_E - tau2_hyb)


def ehss_events(tau2_hyb: float, tau2_ref: float, d_C: int, d_E: int) -> float:
    if not (tau2_hyb > 0 and tau2_ref > 0 and d_C > 0 and d_E > 0):
        raise ValueError("inputs must be positive")
    return (d_C + d_E) * (tau2_hyb / tau2_ref - 1.0)


def ehss_patients(tau2_hyb: float, tau2_ref: float, n_C: int, n_E: int) -> float:
    if not (tau2_hyb > 0 and tau2_ref > 0 and n_C > 0 and n_E > 0):
        raise ValueError("inputs must be positive")
    return (n_C + n_E) * (tau2_hyb / tau2_ref - 1.0)


def events_to_patients(d_eff: float, kappa: float) -> float:
    if not kappa > 0:
        raise KappaZero(f"kappa must be > 0, got {kappa}")
    return d_eff / kappa


def derivative_diagnostic(precision_fn: Callable[[float], float], at: float, epsilon: float) -> float:
    """Central finite difference of ``precision_fn`` at ``at``."""
    try:
        hi = precision_fn(at + epsilon)
        lo = precision_fn(at - epsilon)
    except FitError as exc:
        raise EvaluationFailed(f"precision curve not evaluable near {at}: {exc}") from exc
    return (hi - lo) / (2.0 * epsilon)


class ReferencePrecision:
    """``d_eff -> tau2_ref(d_eff)`` for a trial-only dataset.

    Controls get weight ``d_eff / d_C + 1``; experimental subjects get 1.
    The most recent evaluations are memoized.
    """

    def __init__(self, trial_subjects, d_C: int, model_kind: ModelKind | str, cache_size: int = 8):
        self.arrays = SurvivalArrays.from_subjects(trial_subjects)
        self.d_C = d_C
        self.model_kind = ModelKind(model_kind)
        self._control = self.arrays.control
        self._cache: dict[float, float] = {}
        self._cache_size = cache_size
        self.n_evaluations = 0

    def weight_for(self, d_eff: float) -> float:
        return d_eff / self.d_C + 1.0

    def __call__(self, d_eff: float) -> float:
        d_eff = float(d_eff)
        hit = self._cache.get(d_eff)
        if hit is not None:
            return hit
        w = self.weight_for(d_eff)
        if not w > 0:
            raise EvaluationFailed(f"d_eff={d_eff} gives non-positive control weight {w}")
        arr = self.arrays.with_weights(np.where(self._control, w, 1.0))
        try:
            if self.model_kind is ModelKind.EXPONENTIAL:
                value = exponential_precision(arr)
            else:
                value = fit_cox(arr).precision
        except FitError as exc:
            raise EvaluationFailed(f"reference refit failed at d_eff={d_eff}: {exc}") from exc
        self.n_evaluations += 1
        if len(self._cache) >= self._cache_size:
            self._cache.pop(next(iter(self._cache)))
        self._cache[d_eff] = value
        return value


def _trial_parts(trial_snapshot):
    subjects = getattr(trial_snapshot, "trial_subjects", None)
    if subjects is None:
        raise TypeError("expected an InterimSnapshot-like object with trial_subjects and d_C")
    return subjects, trial_snapshot.d_C


def weighted_reference_precision(trial_snapshot, d_eff: float, model_kind: ModelKind | str) -> float:
    subjects, d_c = _trial_parts(trial_snapshot)
    if not d_eff > -d_c:
        raise ValueError(f"d_eff must exceed -d_C={-d_c}")
    return ReferencePrecision(subjects, d_c, model_kind)(d_eff)


def d_eff_generalized(
    trial_snapshot,
    tau2_hyb: float,
    model_kind: ModelKind | str,
    solver: SolverConfig = SolverConfig(),
    kappa: Optional[float] = None,
) -> BorrowEstimate:
    """Root-find the weighted-refit precision curve against ``tau2_hyb``.

    If ``psi`` does not change sign on the search interval, or the bracketing
    solver fails, the estimate is reported as ``unstable-no-root``.
    """
    subjects, d_c = _trial_parts(trial_snapshot)
    curve = ReferencePrecision(subjects, d_c, model_kind)
    return solve_generalized(curve, tau2_hyb, solver, kappa)


def solve_generalized(curve, tau2_hyb, solver=SolverConfig(), kappa=None) -> BorrowEstimate:
    lo, hi = solver.interval(curve.d_C)

    def psi(d):
        return curve(d) - tau2_hyb

    no_root = BorrowEstimate(Method.GENERALIZED, None, None, Stability.UNSTABLE_NO_ROOT)
    f_lo, f_hi = psi(lo), psi(hi)
    if f_lo * f_hi > 0:
        return no_root
    try:
        root = brentq(psi, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200)
    except (RuntimeError, ValueError):
        return no_root
    if not abs(psi(root)) < solver.root_tolerance:
        return no_root
    slope = derivative_diagnostic(curve, root, solver.fd_epsilon)
    stability = Stability.STABLE if slope >= solver.derivative_cutoff else Stability.UNSTABLE_DERIVATIVE
    patients = events_to_patients(root, kappa) if kappa is not None else None
    return BorrowEstimate(Method.GENERALIZED, float(root), float(slope), stability, patients)
