import functools

import numpy as np
import pytest

from hafit.hearing_loss import Audiogram, HearingLossModel
from hafit.prescriptions import standard_audiogram
from hafit.synthetic import speech_like


@functools.lru_cache(maxsize=None)
def model_for(name: str) -> HearingLossModel:
    a = Audiogram.normal() if name == "normal" else standard_audiogram(name)
    return HearingLossModel.build(a)


@pytest.fixture(scope="session")
def speech():
    """One second of speech-like signal at 65 dB SPL."""
    return speech_like(1.0, seed=7)


@pytest.fixture(scope="session")
def speech_2s():
    return speech_like(2.0, seed=3)


@pytest.fixture(scope="session")
def models():
    return model_for


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance outcomes, printed once at the end of the session
ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture(scope="session")
def acceptance():
    def record(number: int, ok: bool, detail: str, soft: bool = False) -> None:
        status = "PASS" if ok else ("FAIL (reported)" if soft else "FAIL")
        ACCEPTANCE[number] = (status, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {detail}")
