"""Shared fixtures: small generated corpora and a frozen random vision model."""

import numpy as np
import pytest

from aha.dataset import load_omniglot
from aha.ltm import LtmConfig, VisionLtm
from aha.synthglyphs import generate_corpus, run_test_spec, small_test_spec


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus_small")
    generate_corpus(root, small_test_spec())
    return root


@pytest.fixture(scope="session")
def run_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus_runs")
    generate_corpus(root, run_test_spec())
    return root


@pytest.fixture(scope="session")
def run_dataset(run_corpus):
    return load_omniglot(run_corpus)


@pytest.fixture(scope="session")
def random_ltm():
    # Untrained but frozen: encodings are still a deterministic pure function
    # of the image, which is all the harness contracts need.
    return VisionLtm(LtmConfig(), 52, rng=np.random.default_rng(1234)).freeze()
