import numpy as np
import pytest

from saltflow.constitutive import FlowParameters, density, kc_scaling_factor, kozeny_carman


@pytest.fixture
def params():
    return FlowParameters()


def test_density_endpoints(params):
    assert density(0.0, params) == 1000.0
    assert density(1.0, params) == 1200.0
    assert density(0.5, params) == 1100.0


def test_density_is_affine(params):
    rng = np.random.default_rng(7)
    a, b = rng.uniform(-0.5, 1.5, size=(2, 50))
    alpha = rng.uniform(0.0, 1.0, size=50)
    lhs = density(alpha * a + (1 - alpha) * b, params)
    rhs = alpha * density(a, params) + (1 - alpha) * density(b, params)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=0.0)


def test_kc_scaling_factor_table_values(params):
    # arithmetic inversion of the Kozeny-Carman law at the mean values
    kappa = kc_scaling_factor(params)
    assert kappa == pytest.approx(4.845e-13 * 0.99 / 1e-3, rel=1e-14)
    assert kappa == pytest.approx(4.79655e-10, rel=1e-5)
    # hand arithmetic at phi = 0.5, K = 1
    p2 = FlowParameters(phi_mean=0.5, K_mean=1.0)
    assert kc_scaling_factor(p2) == pytest.approx(6.0, rel=1e-14)


def test_kc_round_trip_identity():
    rng = np.random.default_rng(11)
    for _ in range(50):
        p = FlowParameters(phi_mean=rng.uniform(0.02, 0.9),
                           K_mean=10.0 ** rng.uniform(-15, -9))
        K = kozeny_carman(p.phi_mean, kc_scaling_factor(p))
        assert K == pytest.approx(p.K_mean, rel=1e-14)


def test_kozeny_carman_values(params):
    kappa = kc_scaling_factor(params)
    assert kozeny_carman(0.1, kappa) == pytest.approx(4.845e-13, rel=1e-14)
    assert kozeny_carman(0.5, 6.0) == pytest.approx(1.0, rel=1e-14)


def test_kozeny_carman_monotone():
    phis = np.linspace(0.01, 0.99, 200)
    K = kozeny_carman(phis, 1.0)
    assert np.all(np.diff(K) > 0)


def test_kozeny_carman_domain_errors():
    with pytest.raises(ValueError):
        kozeny_carman(0.0, 1.0)
    with pytest.raises(ValueError):
        kozeny_carman(1.0, 1.0)
    with pytest.raises(ValueError):
        kozeny_carman(np.array([0.5, 1.2]), 1.0)


def test_parameter_validation():
    with pytest.raises(ValueError):
        FlowParameters(rho0=1200.0, rho1=1000.0)
    with pytest.raises(ValueError):
        FlowParameters(mu=0.0)
    with pytest.raises(ValueError):
        FlowParameters(phi_mean=1.0)
    with pytest.raises(ValueError):
        FlowParameters(K_mean=-1.0)
