import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_hermitian(rng, n=16, scale=1.0, stack=()):
    a = rng.normal(size=stack + (n, n)) + 1j * rng.normal(size=stack + (n, n))
    return scale * 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance criterion outcome for the end-of-run summary."""

    def record(number, title, ok, detail):
        _ACCEPTANCE.append((number, title, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {number:2d}. {title}: {detail}")
