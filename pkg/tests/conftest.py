import numpy as np
import pytest


def piecewise_constant(n: int = 128, seed: int = 0, boxes: int = 8) -> np.ndarray:
    """Flat background with overlapping flat rectangles."""
    rng = np.random.default_rng(seed)
    img = np.full((n, n), 0.2)
    for _ in range(boxes):
        i, j = rng.integers(0, n - n // 8, 2)
        h, w = rng.integers(n // 8, int(n * 0.44), 2)
        img[i:i + h, j:j + w] = rng.uniform(0.1, 0.9)
    return img


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
