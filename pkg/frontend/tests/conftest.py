"""Session-scoped datasets shared across test modules."""

import pytest

from helpers import make_dataset


@pytest.fixture(scope="session")
def one_sample_dir(tmp_path_factory):
    """One noise-free sample triple at 16x16x5 with a 32x32 detector."""
    return make_dataset(tmp_path_factory.mktemp("one"), 1, seed0=0, snr="inf")


@pytest.fixture(scope="session")
def twenty_sample_dir(tmp_path_factory):
    """Twenty samples at 30 dB detector noise."""
    return make_dataset(tmp_path_factory.mktemp("twenty"), 20, seed0=50,
                        snr="30")
