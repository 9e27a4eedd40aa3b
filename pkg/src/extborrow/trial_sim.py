"""Simulated hybrid-trial datasets frozen at an event-triggered interim.

Trials enroll linearly with alternating 1:1 assignment. Event times are
Weibull (exponential at shape 1) with proportional hazards, and censoring is
an independent exponential competing time. The interim fires at the first
calendar time where enough events have been observed overall and in each
arm. An external control cohort is then drawn from the trial-control
distribution and truncated at the trial's maximum follow-up.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, ExternalSizeInfeasible, TriggerNeverReached
from .survival_models import Cohort, Subject

log = logging.getLogger(__name__)

MAX_REGENERATIONS = 1000


@dataclass(frozen=True)
class ScenarioConfig:
    hazard_ratios: tuple = (0.4, 0.6, 0.8, 1.0)
    sims_per_hr: int = 1000
    trial_size_range: tuple = (60, 100)
    censor_prob_range: tuple = (0.05, 0.1)
    interim_event_fraction: float = 0.33
    min_events_per_arm: int = 10
    enrollment_rate: float = 2.0
    control_hazard: float = 1.0 / 12.0
    weibull_shape: float = 1.0
    external_size_min: int = 10
    base_seed: int = 20200101

    def __post_init__(self):
        object.__setattr__(self, "hazard_ratios", tuple(float(h) for h in self.hazard_ratios))
        object.__setattr__(self, "trial_size_range", tuple(int(v) for v in self.trial_size_range))
        object.__setattr__(self, "censor_prob_range", tuple(float(v) for v in self.censor_prob_range))
        lo, hi = self.trial_size_range
        plo, phi = self.censor_prob_range
        checks = [
            (len(self.hazard_ratios) > 0 and all(h > 0 for h in self.hazard_ratios), "hazard_ratios must be positive"),
            (self.sims_per_hr >= 1, "sims_per_hr must be >= 1"),
            (0 < lo <= hi, "trial_size_range must be a nonempty positive interval"),
            (0 <= plo <= phi < 1, "censor_prob_range must lie in [0, 1)"),
            (0 < self.interim_event_fraction < 1, "interim_event_fraction must be in (0, 1)"),
            (self.min_events_per_arm >= 1, "min_events_per_arm must be >= 1"),
            (self.enrollment_rate > 0, "enrollment_rate must be > 0"),
            (self.control_hazard > 0, "control_hazard must be > 0"),
            (self.weibull_shape > 0, "weibull_shape must be > 0"),
            (self.external_size_min >= 1, "external_size_min must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @property
    def scale(self) -> float:
        """Weibull scale of the control arm; equals the mean at shape 1."""
        return 1.0 / self.control_hazard

    def event_threshold(self, n: int) -> int:
        # guard against 0.33 * 100 landing a hair above 33
        return math.ceil(self.interim_event_fraction * n - 1e-9)


@dataclass
class TrialTrajectory:
    """Full (uncensored-by-interim) trajectories of one simulated trial."""

    hr: float
    censor_prob: float
    enrollment_time: np.ndarray
    experimental: np.ndarray
    event_time: np.ndarray
    censor_time: np.ndarray

    @property
    def n(self) -> int:
        return self.enrollment_time.shape[0]

    @property
    def event_observed(self) -> np.ndarray:
        return self.event_time <= self.censor_time

    @property
    def observed_time(self) -> np.ndarray:
        return np.minimum(self.event_time, self.censor_time)


@dataclass(frozen=True)
class InterimSnapshot:
    interim_time: float
    subjects: tuple
    n_C: int
    n_E: int
    d_C: int
    d_E: int
    d_ext: int
    kappa: float
    max_followup: float
    censor_prob: float = field(default=float("nan"), compare=False)

    @property
    def trial_subjects(self) -> list:
        return [s for s in self.subjects if s.cohort is not Cohort.EXTERNAL]

    @property
    def external_subjects(self) -> list:
        return [s for s in self.subjects if s.cohort is Cohort.EXTERNAL]

    def with_external(self, external: Sequence[Subject], d_ext: int) -> "InterimSnapshot":
        return replace(self, subjects=tuple(self.trial_subjects) + tuple(external), d_ext=int(d_ext))


def rng_for(base_seed: int, hr_index: int, sim_index: int, attempt: int = 0) -> np.random.Generator:
    """Independent stream keyed on (base_seed, hr_index, sim_index, attempt)."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(hr_index), int(sim_index), int(attempt)))
    return np.random.Generator(np.random.PCG64(ss))


def _event_times(rng, size, config: ScenarioConfig, hr: float):
    k = config.weibull_shape
    return config.scale * hr ** (-1.0 / k) * rng.weibull(k, size)


def _censor_times(rng, size, config: ScenarioConfig, p: float):
    if p <= 0:
        return np.full(size, np.inf)
    rate = config.control_hazard * p / (1.0 - p)
    return rng.exponential(1.0 / rate, size)


def generate_trial(config: ScenarioConfig, hr: float, rng: np.random.Generator) -> TrialTrajectory:
    lo, hi = config.trial_size_range
    n = int(rng.integers(lo, hi, endpoint=True))
    p = float(rng.uniform(*config.censor_prob_range))
    idx = np.arange(n)
    experimental = idx % 2 == 1
    enrollment = idx / config.enrollment_rate
    event_time = np.where(
        experimental,
        _event_times(rng, n, config, hr),
        _event_times(rng, n, config, 1.0),
    )
    censor_time = _censor_times(rng, n, config, p)
    return TrialTrajectory(hr, p, enrollment, experimental, event_time, censor_time)


def find_interim_time(trial: TrialTrajectory, config: ScenarioConfig) -> float:
    """Earliest calendar time meeting both the total and per-arm event counts."""
    observed = trial.event_observed
    ids = np.flatnonzero(observed)
    calendar = trial.enrollment_time[ids] + trial.event_time[ids]
    order = np.lexsort((ids, calendar))
    arm = trial.experimental[ids][order]
    total = np.arange(1, order.size + 1)
    n_exp = np.cumsum(arm)
    n_ctl = total - n_exp
    ok = (
        (total >= config.event_threshold(trial.n))
        & (n_exp >= config.min_events_per_arm)
        & (n_ctl >= config.min_events_per_arm)
    )
    hit = np.flatnonzero(ok)
    if hit.size == 0:
        raise TriggerNeverReached(
            f"interim condition never met (N={trial.n}, observed events={order.size})"
        )
    return float(calendar[order][hit[0]])


def apply_interim(trial: TrialTrajectory, interim_time: float) -> InterimSnapshot:
    """Freeze the trial at ``interim_time`` with administrative censoring.

    Events at exactly the interim time count, so the triggering event is kept.
    """
    subjects = []
    n_c = n_e = d_c = d_e = 0
    obs_time = trial.observed_time
    observed = trial.event_observed
    for i in range(trial.n):
        enroll = float(trial.enrollment_time[i])
        if not enroll < interim_time:
            continue
        if enroll + obs_time[i] <= interim_time:
            followup, flag = float(obs_time[i]), bool(observed[i])
        else:
            followup, flag = interim_time - enroll, False
        is_exp = bool(trial.experimental[i])
        cohort = Cohort.TRIAL_EXPERIMENTAL if is_exp else Cohort.TRIAL_CONTROL
        subjects.append(Subject(i, cohort, enroll, followup, flag))
        if is_exp:
            n_e += 1
            d_e += flag
        else:
            n_c += 1
            d_c += flag
    return InterimSnapshot(
        interim_time=float(interim_time),
        subjects=tuple(subjects),
        n_C=n_c,
        n_E=n_e,
        d_C=d_c,
        d_E=d_e,
        d_ext=0,
        kappa=d_c / n_c if n_c else float("nan"),
        max_followup=max(s.followup_time for s in subjects),
        censor_prob=trial.censor_prob,
    )


def generate_external(
    snapshot: InterimSnapshot,
    config: ScenarioConfig,
    rng: np.random.Generator,
    hr_external: float = 1.0,
) -> tuple[list, int]:
    """Draw the external cohort; returns ``(subjects, d_ext)``.

    Size is uniform on ``[external_size_min, n_C]``. Times come from the
    trial-control distribution (scaled by ``hr_external``) with the trial's
    censoring rate, then truncated at ``snapshot.max_followup``.
    """
    if snapshot.n_C < config.external_size_min:
        raise ExternalSizeInfeasible(
            f"n_C={snapshot.n_C} below external_size_min={config.external_size_min}"
        )
    m = int(rng.integers(config.external_size_min, snapshot.n_C, endpoint=True))
    t = _event_times(rng, m, config, hr_external)
    c = _censor_times(rng, m, config, snapshot.censor_prob)
    cap = snapshot.max_followup
    subjects = []
    d_ext = 0
    for j in range(m):
        followup = min(t[j], c[j], cap)
        flag = bool(t[j] <= c[j] and t[j] <= cap)
        d_ext += flag
        subjects.append(Subject(f"ext{j}", Cohort.EXTERNAL, 0.0, float(followup), flag))
    return subjects, d_ext


def simulate_dataset(config: ScenarioConfig, hr_index: int, sim_index: int, start_attempt: int = 0):
    """Generate one complete interim dataset, regenerating on infeasible draws.

    Returns ``(snapshot, attempt)`` where ``attempt`` is the number of
    regenerations consumed; the result is a pure function of the arguments.
    """
    hr = config.hazard_ratios[hr_index]
    for attempt in range(start_attempt, start_attempt + MAX_REGENERATIONS):
        rng = rng_for(config.base_seed, hr_index, sim_index, attempt)
        trial = generate_trial(config, hr, rng)
        try:
            interim = find_interim_time(trial, config)
            snap = apply_interim(trial, interim)
            external, d_ext = generate_external(snap, config, rng)
        except (TriggerNeverReached, ExternalSizeInfeasible) as exc:
            log.info("regenerating hr=%s sim=%d attempt=%d: %s", hr, sim_index, attempt, exc)
            continue
        return snap.with_external(external, d_ext), attempt
    raise RuntimeError(f"no feasible dataset after {MAX_REGENERATIONS} attempts")
