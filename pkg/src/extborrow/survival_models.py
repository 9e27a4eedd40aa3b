"""Two-arm survival models with per-subject case weights.

Both models return the log hazard ratio (experimental vs control) and its
precision. The exponential model is closed form; the Cox model maximizes the
case-weighted Efron partial likelihood by safeguarded Newton iterations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import EmptyArm, NoEventsInArm, NonConvergence, Separation
from .kernels import efron_terms

MAX_NEWTON_ITER = 25
BETA_TOL = 1e-9
# |beta| beyond this means exp(beta) dominates every risk set: treat as divergent
BETA_LIMIT = 50.0


class Cohort(str, enum.Enum):
    TRIAL_CONTROL = "trial-control"
    TRIAL_EXPERIMENTAL = "trial-experimental"
    EXTERNAL = "external"


class ModelKind(str, enum.Enum):
    EXPONENTIAL = "exponential"
    COX = "cox"


#: cohort -> is-experimental. External subjects sit in the control stratum.
DEFAULT_ARMS: Mapping[Cohort, bool] = {
    Cohort.TRIAL_CONTROL: False,
    Cohort.TRIAL_EXPERIMENTAL: True,
    Cohort.EXTERNAL: False,
}


@dataclass(frozen=True)
class Subject:
    id: object
    cohort: Cohort
    enrollment_time: float
    followup_time: float
    event_flag: bool
    case_weight: float = 1.0

    def __post_init__(self):
        if not self.followup_time > 0:
            raise ValueError(f"subject {self.id!r}: followup_time must be > 0, got {self.followup_time}")
        if not self.case_weight > 0:
            raise ValueError(f"subject {self.id!r}: case_weight must be > 0, got {self.case_weight}")
        if self.enrollment_time < 0:
            raise ValueError(f"subject {self.id!r}: enrollment_time must be >= 0")
        if self.cohort is Cohort.EXTERNAL and self.enrollment_time != 0:
            raise ValueError(f"external subject {self.id!r} must have enrollment_time 0")


@dataclass(frozen=True)
class ModelFit:
    model_kind: ModelKind
    log_hr: float
    variance: float
    precision: float
    converged: bool
    iterations: int

    @classmethod
    def from_information(cls, kind, log_hr, information, converged=True, iterations=0):
        return cls(kind, float(log_hr), 1.0 / information, float(information), converged, iterations)


class SurvivalArrays:
    """Column view of a subject list, sorted by follow-up time.

    Sorting happens once; refits with new weights reuse the order, which is
    what makes repeated weighted refits cheap.
    """

    def __init__(self, time, event, experimental, weight=None):
        time = np.asarray(time, dtype=np.float64)
        order = np.argsort(time, kind="stable")
        self.time = np.ascontiguousarray(time[order])
        self.event = np.ascontiguousarray(np.asarray(event, dtype=np.uint8)[order])
        self.experimental = np.ascontiguousarray(np.asarray(experimental, dtype=np.uint8)[order])
        if weight is None:
            weight = np.ones(time.shape[0])
        self.weight = np.ascontiguousarray(np.asarray(weight, dtype=np.float64)[order])
        self.order = order
        if np.any(self.time <= 0):
            raise ValueError("follow-up times must be > 0")
        if np.any(self.weight <= 0):
            raise ValueError("case weights must be > 0")

    @classmethod
    def from_subjects(cls, subjects: Sequence[Subject], arm_of: Mapping[Cohort, bool] | None = None):
        arm_of = DEFAULT_ARMS if arm_of is None else arm_of
        return cls(
            [s.followup_time for s in subjects],
            [s.event_flag for s in subjects],
            [arm_of[s.cohort] for s in subjects],
            [s.case_weight for s in subjects],
        )

    def __len__(self):
        return self.time.shape[0]

    @property
    def control(self):
        return self.experimental == 0

    def with_weights(self, weight):
        """Copy sharing the sorted columns but with ``weight`` (already in sorted order)."""
        new = object.__new__(SurvivalArrays)
        new.time, new.event, new.experimental, new.order = self.time, self.event, self.experimental, self.order
        new.weight = np.ascontiguousarray(weight, dtype=np.float64)
        return new


Data = Union[Sequence[Subject], SurvivalArrays]


def _as_arrays(data: Data, arm_of=None) -> SurvivalArrays:
    if isinstance(data, SurvivalArrays):
        return data
    return SurvivalArrays.from_subjects(data, arm_of)


def _arm_event_mass(arr: SurvivalArrays):
    exp_mask = arr.experimental.astype(bool)
    if not exp_mask.any() or exp_mask.all():
        raise EmptyArm("both arms need at least one subject")
    ev = arr.event.astype(bool)
    w = arr.weight
    d_c = float(np.sum(w[~exp_mask & ev]))
    d_e = float(np.sum(w[exp_mask & ev]))
    if d_c <= 0 or d_e <= 0:
        raise NoEventsInArm(f"weighted event mass is zero in an arm (control={d_c}, experimental={d_e})")
    return exp_mask, d_c, d_e


def fit_exponential(data: Data, arm_of: Mapping[Cohort, bool] | None = None) -> ModelFit:
    """Closed-form two-arm exponential fit.

    The rate in each arm is weighted event mass over weighted exposure, and
    the precision of the log hazard ratio is ``D_C * D_E / (D_C + D_E)``.
    """
    arr = _as_arrays(data, arm_of)
    exp_mask, d_c, d_e = _arm_event_mass(arr)
    t_c = float(np.sum(arr.weight[~exp_mask] * arr.time[~exp_mask]))
    t_e = float(np.sum(arr.weight[exp_mask] * arr.time[exp_mask]))
    log_hr = math.log((d_e / t_e) / (d_c / t_c))
    return ModelFit.from_information(ModelKind.EXPONENTIAL, log_hr, d_c * d_e / (d_c + d_e))


def exponential_precision(data: Data, arm_of=None) -> float:
    """Precision only; skips the exposure sums."""
    _, d_c, d_e = _arm_event_mass(_as_arrays(data, arm_of))
    return d_c * d_e / (d_c + d_e)


def _check_separation(arr: SurvivalArrays):
    # An interior maximizer exists iff some control event has an experimental
    # subject at risk and some experimental event has a control at risk.
    exp_mask = arr.experimental.astype(bool)
    ev = arr.event.astype(bool)
    t = arr.time
    ctrl_events = t[ev & ~exp_mask]
    exp_events = t[ev & exp_mask]
    if ctrl_events.size == 0 or exp_events.size == 0:
        raise NoEventsInArm("Cox fit needs at least one event in each arm")
    if ctrl_events.min() > t[exp_mask].max() or exp_events.min() > t[~exp_mask].max():
        raise Separation("partial likelihood is monotone in beta")


def cox_log_partial_likelihood(data: Data, beta: float, arm_of=None) -> float:
    arr = _as_arrays(data, arm_of)
    return efron_terms(float(beta), arr.time, arr.event, arr.experimental, arr.weight)[0]


def fit_cox(data: Data, arm_of: Mapping[Cohort, bool] | None = None) -> ModelFit:
    """Weighted Cox fit with a single arm indicator and Efron ties.

    Newton-Raphson from beta = 0. A step that lowers the log partial
    likelihood is halved until it does not. Converged when the accepted step
    is below ``BETA_TOL``; the variance is the inverse observed information
    at the returned beta.
    """
    arr = _as_arrays(data, arm_of)
    if not arr.experimental.any() or arr.experimental.all():
        raise EmptyArm("both arms need at least one subject")
    _check_separation(arr)
    args = (arr.time, arr.event, arr.experimental, arr.weight)

    beta = 0.0
    loglik, score, info = efron_terms(beta, *args)
    for iteration in range(1, MAX_NEWTON_ITER + 1):
        if not info > 0:
            raise Separation(f"non-positive information at beta={beta}")
        newton = step = score / info
        # decreases at roundoff level are noise, not overshoot
        slack = 1e-12 * (1.0 + abs(loglik))
        for _ in range(40):
            cand = beta + step
            c_loglik, c_score, c_info = efron_terms(cand, *args)
            if c_loglik >= loglik - slack:
                break
            step *= 0.5
        beta, loglik, score, info = cand, c_loglik, c_score, c_info
        if abs(beta) > BETA_LIMIT:
            raise Separation(f"coefficient diverging (beta={beta})")
        if abs(newton) < BETA_TOL:
            if not info > 0:
                raise Separation(f"non-positive information at beta={beta}")
            return ModelFit.from_information(ModelKind.COX, beta, info, True, iteration)
    raise NonConvergence(f"Newton did not converge in {MAX_NEWTON_ITER} iterations (beta={beta})")


def fit_model(kind: ModelKind | str, data: Data, arm_of=None) -> ModelFit:
    kind = ModelKind(kind)
    if kind is ModelKind.EXPONENTIAL:
        return fit_exponential(data, arm_of)
    return fit_cox(data, arm_of)
