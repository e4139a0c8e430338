import numpy as np
import pytest

from iealm.keystream import ChannelSums, KeyMaterial

_acceptance = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion, reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        number, title = marker.args
        _acceptance.append((number, title, rep.outcome, rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome, duration in sorted(_acceptance, key=lambda r: int(r[0])):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{verdict}] criterion {number}: {title} ({duration:.2f}s)")


def random_key(rng: np.random.Generator, mn: int) -> KeyMaterial:
    b = float(rng.uniform(1.69, 2.0))
    return KeyMaterial(b, ChannelSums(*(int(s) for s in rng.integers(0, 255 * mn + 1, 3))))


@pytest.fixture
def rng():
    return np.random.default_rng(20221)


@pytest.fixture(scope="session")
def portrait():
    """Deterministic 64x64 RGB test picture: smooth gradients, a disc and mild texture."""
    yy, xx = np.mgrid[0:64, 0:64].astype(float)
    r = 120 + 80 * np.sin(xx / 9.0) * np.cos(yy / 13.0)
    g = 60 + 2.2 * yy + 30 * ((xx - 32) ** 2 + (yy - 28) ** 2 < 300)
    b = 200 - 1.5 * xx + 10 * np.sin((xx + yy) / 3.0)
    img = np.stack([r, g, b], axis=-1)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)
