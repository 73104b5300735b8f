import numpy as np
import pytest

import inference
import randmat
import varcore


@pytest.fixture
def rng():
    return randmat.RngStream(12345, 0)


@pytest.fixture
def simulated_data():
    """60 observations of a 3-variable VAR(1) with Sigma ~ IW(8, 4 I)."""
    m = 3
    data, truth = varcore.simulate_var(m, 60, 1, varcore.default_coefficients(m, 1),
                                       varcore.InverseWishartSource(8), randmat.RngStream(7, 0))
    return data, truth


@pytest.fixture
def fast_sampler():
    return inference.SamplerConfig(iterations=300, burn_in=100, thin=1, mh_step=3, seed=11)


@pytest.fixture
def write_csv(tmp_path):
    """Returns a helper that writes text to a CSV file under tmp_path."""
    def write(text, name='data.csv'):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write


@pytest.fixture
def spd3():
    return np.array([[2.0, 0.3, 0.1],
                     [0.3, 1.5, -0.2],
                     [0.1, -0.2, 1.0]])
