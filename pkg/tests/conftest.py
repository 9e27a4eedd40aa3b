import pytest

from extborrow.survival_models import Cohort, Subject
from extborrow.trial_sim import InterimSnapshot

_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record a one-line acceptance verdict, printed in the terminal summary."""
    def _report(criterion, ok, detail=""):
        _ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_subjects(control, experimental, control_weight=1.0):
    """(time, event) pairs per arm -> Subject list."""
    subjects = [
        Subject(f"c{i}", Cohort.TRIAL_CONTROL, 0.0, t, bool(d), control_weight)
        for i, (t, d) in enumerate(control)
    ]
    subjects += [
        Subject(f"e{i}", Cohort.TRIAL_EXPERIMENTAL, 0.0, t, bool(d))
        for i, (t, d) in enumerate(experimental)
    ]
    return subjects


def make_snapshot(control, experimental):
    subjects = make_subjects(control, experimental)
    d_c = sum(d for _, d in control)
    d_e = sum(d for _, d in experimental)
    return InterimSnapshot(
        interim_time=max(t for t, _ in control + experimental),
        subjects=tuple(subjects),
        n_C=len(control),
        n_E=len(experimental),
        d_C=d_c,
        d_E=d_e,
        d_ext=0,
        kappa=d_c / len(control),
        max_followup=max(t for t, _ in control + experimental),
    )


# 6-subject Cox fixture: distinct times, 3 per arm.
SIX_CONTROL = [(2.0, 1), (5.0, 0), (7.0, 1)]
SIX_EXPERIMENTAL = [(3.0, 1), (6.0, 1), (8.0, 0)]

# 10-subject fixture for the weighted refit (d_C = 3).
TEN_CONTROL = [(1.5, 1), (4.0, 1), (4.5, 0), (9.0, 1), (11.0, 0)]
TEN_EXPERIMENTAL = [(2.5, 1), (3.0, 0), (6.0, 1), (7.5, 1), (12.0, 0)]
