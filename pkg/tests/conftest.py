import numpy as np
import pytest

from eegvideo.eegio import standard_layout_22, synth_recording


@pytest.fixture(scope="session")
def layout22():
    return standard_layout_22()


@pytest.fixture(scope="session")
def small_rec(layout22):
    return synth_recording(7, 4, 10, layout22, 250.0, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
