import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from resilient_gp.harness.config import config_from_dict

settings.register_profile("repo", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_config(**sections):
    """A fast toy scenario; keyword arguments override whole sections."""
    doc = {
        "network": {"n": 8, "alpha": 0.125, "beta": 0.125, "points_per_round": 5},
        "attack": {"kind": "same-value", "c": 100.0},
        "data": {"n_s": 160, "n_test": 20, "grid_resolution": 500},
    }
    for name, body in sections.items():
        # an attack override replaces the whole section, others merge
        doc[name] = body if name == "attack" else {**doc.get(name, {}), **body}
    return config_from_dict(doc)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
