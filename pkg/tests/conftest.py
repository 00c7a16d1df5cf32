import numpy as np
import pytest

from maskfusion.dsp import Waveform, magnitude, stft
from maskfusion.evalkit import CorpusSpec, synth_corpus
from maskfusion.masks import compute_irm, compute_tbm


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_corpus():
    """Small fixed-seed corpus for integration-style tests."""
    return synth_corpus(CorpusSpec(seed=11, n_train=4, n_dev=2, n_test=2, duration=1.0))


def oracle_masks(mix):
    clean_mag = magnitude(stft(mix.clean))
    noise_mag = magnitude(stft(mix.noise))
    return compute_irm(clean_mag, noise_mag), compute_tbm(clean_mag)
