import numpy as np
import pytest

from pwdpd.plant import ArrayPlant, PaModel
from pwdpd.signals import IqSignal


def identity_coupling(n, taps=1):
    c = np.zeros((n, n, taps), dtype=np.complex128)
    for i in range(n):
        c[i, i, 0] = 1.0
    return c


def single_element_plant(table, kind="memoryless_poly", sat=np.inf, coupling_strength=0.0):
    pa = PaModel(kind, table, saturation_level=sat)
    return ArrayPlant((pa,), np.ones(1, dtype=complex), identity_coupling(1),
                      np.ones((1, 1), dtype=complex), np.ones(1, dtype=complex),
                      coupling_strength=coupling_strength)


def random_signal(n, rms=0.5, seed=0, sample_rate=1.0):
    rng = np.random.default_rng(seed)
    x = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * (rms / np.sqrt(2))
    return IqSignal(x, sample_rate)


class PlantLoop:
    """Minimal closed-loop source over a plant with Gaussian blocks."""

    def __init__(self, plant, rms=0.3, seed=0, fixed_data=False, sample_rate=1.0):
        self.plant = plant
        self.rms = rms
        self.seed = seed
        self.fixed_data = fixed_data
        self.sample_rate = sample_rate
        self._k = 0
        self._noise_rng = np.random.default_rng(seed + 991)

    def next_block(self, n):
        if not self.fixed_data:
            self._k += 1
        return random_signal(n, self.rms, self.seed + self._k, self.sample_rate)

    def transmit(self, x, noise_floor_dbc=None):
        from pwdpd.plant import array_forward, observation_receive
        per, _ = array_forward(self.plant, x)
        return observation_receive(self.plant, per, noise_floor_dbc, self._noise_rng)


@pytest.fixture
def cubic_plant():
    return single_element_plant({(1, 0): 1.0, (3, 0): -0.12 + 0.03j})
