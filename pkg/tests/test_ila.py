import numpy as np
import pytest

from pwdpd.basis import BasisSpec, regularized_lstsq, COVARIANCE_LOADING
from pwdpd.dpd import predistort
from pwdpd.errors import ConfigError, DegenerateRegionError
from pwdpd.ila import ila_learn
from pwdpd.partition import RegionPartition

from conftest import PlantLoop, random_signal, single_element_plant


def test_regularized_lstsq_against_normal_equations():
    rng = np.random.default_rng(1)
    for n, b in ((50, 4), (200, 10), (120, 7)):
        a = rng.standard_normal((n, b)) + 1j * rng.standard_normal((n, b))
        y = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        got = regularized_lstsq(a, y)
        lam = COVARIANCE_LOADING * np.sum(np.abs(a) ** 2) / b
        oracle = np.linalg.solve(a.conj().T @ a + lam * np.eye(b), a.conj().T @ y)
        np.testing.assert_allclose(got, oracle, rtol=1e-8, atol=1e-12)


def test_ila_linear_plant_identity():
    plant = single_element_plant({(1, 0): 1.0})
    loop = PlantLoop(plant, rms=0.3, seed=2)
    model, _ = ila_learn(loop, BasisSpec("memoryless", 5), iterations=2, block_size=2000)
    assert np.max(np.abs(model.gamma)) < 1e-8


def test_ila_invertible_cubic_converges():
    plant = single_element_plant({(1, 0): 1.0, (3, 0): -0.1})
    loop = PlantLoop(plant, rms=0.25, seed=3)
    model, trace = ila_learn(loop, BasisSpec("memoryless", 7), iterations=4, block_size=4000)
    assert trace[-1].error_power_dbc <= -40


def test_pw_ila_single_region_matches_plain():
    plant = single_element_plant({(1, 0): 1.0, (3, 0): -0.1})
    spec = BasisSpec("memoryless", 5)
    piecewise = spec.with_partition(RegionPartition([0.0, 100.0]))
    plain_model, _ = ila_learn(PlantLoop(plant, rms=0.25, seed=4), spec,
                               iterations=2, block_size=2000)
    pw_model, _ = ila_learn(PlantLoop(plant, rms=0.25, seed=4), piecewise,
                            iterations=2, block_size=2000)
    np.testing.assert_array_equal(plain_model.gamma, pw_model.gamma)


def test_pw_ila_degenerate_region():
    plant = single_element_plant({(1, 0): 1.0, (3, 0): -0.1})
    # a region sliver so narrow the regressor never lands in it
    part = RegionPartition([0.0, 0.9999999, 1.0])
    spec = BasisSpec("memoryless", 5, partition=part)
    with pytest.raises(DegenerateRegionError):
        ila_learn(PlantLoop(plant, rms=0.25, seed=5), spec, iterations=1, block_size=2000)


def test_ila_validation():
    with pytest.raises(ConfigError):
        ila_learn(None, BasisSpec("memoryless", 5), iterations=0)
    with pytest.raises(ConfigError):
        ila_learn(None, BasisSpec("full_dual_input", 9, 3), block_size=100)


def test_ila_model_predistorts_toward_inverse():
    plant = single_element_plant({(1, 0): 1.0, (3, 0): -0.1})
    loop = PlantLoop(plant, rms=0.25, seed=6)
    model, _ = ila_learn(loop, BasisSpec("memoryless", 7), iterations=3, block_size=4000)
    probe = random_signal(4000, rms=0.25, seed=7)
    x = predistort(model, probe)
    from pwdpd.plant import array_forward, observation_receive
    per, _ = array_forward(plant, x)
    z = observation_receive(plant, per)
    from pwdpd.dpd import estimate_gain, error_signal
    g = estimate_gain(probe, z)
    res = np.mean(np.abs(error_signal(z, probe, g).samples) ** 2) / (abs(g) ** 2 * probe.power)
    assert 10 * np.log10(res) < -38
