import numpy as np
import pytest

from sharpholder.coeff_field import AngularProfile

ACCEPTANCE_LINES = []


def random_fourier(rng, mean_range=(1.0, 3.0), modes=3, rel=0.6):
    """Random trigonometric profile whose oscillation stays below ``rel * mean``."""
    mean = rng.uniform(*mean_range)
    c = rng.normal(size=modes)
    s = rng.normal(size=modes)
    scale = rel * mean / (np.abs(c).sum() + np.abs(s).sum())
    return AngularProfile.fourier(mean, (c * scale).tolist(), (s * scale).tolist())


def random_piecewise(rng, lo=0.5, hi=4.0, sectors=(2, 9)):
    m = int(rng.integers(*sectors))
    return AngularProfile.piecewise(rng.uniform(lo, hi, size=m).tolist())


def random_profile(rng, smooth=None):
    if smooth is None:
        smooth = bool(rng.integers(2))
    return random_fourier(rng) if smooth else random_piecewise(rng)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
