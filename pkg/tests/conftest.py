import math

import numpy as np
import pytest

from freqbs.fock import FrequencyBin, Mode, ModeRegistry

W1 = 3.26e14


@pytest.fixture
def bins():
    return FrequencyBin(1, W1, "w1"), FrequencyBin(2, W1 - 1e9, "w2")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def line_registry(n: int) -> ModeRegistry:
    """n modes on one path, one bin each, 1 GHz apart."""
    return ModeRegistry([Mode("p", FrequencyBin(i + 1, W1 + i * 1e9, f"f{i}")) for i in range(n)])


def wootters_reference(rho: np.ndarray) -> float:
    """Textbook concurrence from the eigenvalues of rho * rho_tilde (independent of the package)."""
    sy = np.array([[0, -1j], [1j, 0]])
    yy = np.kron(sy, sy)
    r = rho @ yy @ rho.conj() @ yy
    lam = np.sqrt(np.clip(np.sort(np.linalg.eigvals(r).real)[::-1], 0, None))
    return max(0.0, lam[0] - lam[1] - lam[2] - lam[3])


def bell(phase: float = 0.0) -> np.ndarray:
    return np.array([1, 0, 0, np.exp(1j * phase)]) / math.sqrt(2)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion; failures still fail the test."""

    def record(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
