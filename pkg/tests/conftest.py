import numpy as np
import pytest

from wheelspeed.drivetrain import DrivetrainParams, simulate_suite, standard_scenario_suite
from wheelspeed.sensors import degrade_frame
from wheelspeed.signal import SignalFrame


def make_frame(lengths, rate=50.0, seed=0, channels=("a", "b")):
    rng = np.random.default_rng(seed)
    n = sum(lengths)
    segs, pos = [], 0
    for k, m in enumerate(lengths):
        segs.append((f"m{k:02d}", pos, pos + m))
        pos += m
    return SignalFrame(rate, {c: rng.normal(size=n) for c in channels}, segs)


@pytest.fixture(scope="session")
def small_dataset():
    """12 short maneuvers (15 s each) through the full sensor chain."""
    params = DrivetrainParams()
    scripts = standard_scenario_suite(seed=3, total_duration=180.0, n_maneuvers=12, params=params)
    truth = simulate_suite(params, scripts, seed=3)
    return truth, degrade_frame(truth, seed=4)


class Criterion:
    """Collects the checks behind one acceptance criterion."""

    def __init__(self, number, title):
        self.number, self.title, self.checks = number, title, []

    def check(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))
        return bool(ok)

    @property
    def ok(self):
        return bool(self.checks) and all(c[1] for c in self.checks)

    def line(self):
        parts = "; ".join(f"{n} {'ok' if ok else 'FAIL'}{f' ({d})' if d else ''}" for n, ok, d in self.checks)
        return f"criterion {self.number} {'PASS' if self.ok else 'FAIL'}: {self.title}: {parts or 'no result'}"


_CRITERIA = {}


@pytest.fixture
def criterion():
    made = []

    def make(number, title):
        c = Criterion(number, title)
        made.append(c)
        return c

    yield make
    for c in made:
        _CRITERIA[c.number] = c.line()
        print(c.line())


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
