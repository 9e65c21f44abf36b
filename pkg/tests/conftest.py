"""
Test configuration module for mflab.
This module provides pytest fixtures for the lab tests: a fresh lab
configuration for every test, the standard potential descriptors and a
factory writing experiment documents into a temporary directory.
"""
import json

import numpy as np
import pytest
from dotenv import load_dotenv

load_dotenv()

from src.mflab_config import config_manager
from src.mflab_potentials import capped_saddle1d, curie_weiss, pca, quadratic, quartic1d
from src.mflab_process import init_pool


@pytest.fixture(scope="function", autouse=True)
def fresh_lab_config():
    """Every test starts from the default configuration and a single worker."""
    config_manager.reset()
    config_manager.load_from_dict({"log_file": None})
    init_pool(1)
    yield
    config_manager.reset()
    init_pool(1)


@pytest.fixture
def toy_quadratic():
    """V = 0 with kappa = 1."""
    return quadratic(1.0, 1)


@pytest.fixture
def double_well():
    """quartic1d with kappa = 1, so V_kappa(x) = x^4/4 - x^2/2."""
    return quartic1d(1.0)


@pytest.fixture
def pca_spec():
    """PCA landscape with M = diag(1, 0.25) and kappa = 0.5."""
    return pca(np.diag([1.0, 0.25]), 0.5)


@pytest.fixture
def curie_weiss_hot():
    """Supercritical Curie-Weiss model."""
    return curie_weiss(1.0, 1.0)


@pytest.fixture
def capped_saddle():
    """Capped saddle with lam = kappa = a = c = 1."""
    return capped_saddle1d()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def write_document(tmp_path):
    """Write an experiment document and return its path."""
    def _write(document, name="experiment.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return str(path)
    return _write
