import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvng import fock_oracle as fo
from cvng import symplectic as sy
from cvng import wigner as wg
from cvng.errors import NumericalError, ValidationError


def test_ladder_matrices():
    a, ad = fo.ladder(6)
    n1 = fo.fock_ket(1, 6)
    assert np.vdot(n1, ad @ a @ n1).real == pytest.approx(1.0)
    np.testing.assert_allclose(a @ fo.fock_ket(0, 6), 0.0)
    comm = a @ ad - ad @ a
    np.testing.assert_allclose(comm[:-1, :-1], np.eye(5), atol=1e-12)
    with pytest.raises(ValidationError):
        fo.ladder(1)


def test_displacement_identity_and_poisson_statistics():
    np.testing.assert_allclose(fo.displacement([0.0, 0.0], 10), np.eye(10), atol=1e-12)
    alpha = np.array([2.0, 1.0])
    ket = fo.coherent_ket(alpha, 40)
    n = np.arange(40)
    p = np.abs(ket) ** 2
    mean = alpha @ alpha / 4
    assert p @ n == pytest.approx(mean, abs=1e-10)
    assert p @ n**2 - (p @ n) ** 2 == pytest.approx(mean, abs=1e-10)


def test_hong_ou_mandel_interference():
    d = 6
    ket = fo.fock_ket([1, 1], d).ravel()
    out = fo.beamsplitter(np.pi / 4, d) @ ket
    out = out.reshape(d, d)
    assert abs(out[1, 1]) < 1e-8
    assert abs(out[2, 0]) == pytest.approx(1 / np.sqrt(2), abs=1e-8)
    assert abs(out[0, 2]) == pytest.approx(1 / np.sqrt(2), abs=1e-8)
    assert out[2, 0] * np.conj(out[0, 2]) == pytest.approx(-0.5, abs=1e-8)


def test_displaced_parity_at_origin():
    vac = fo.fock_state(0, 20)
    one = fo.fock_state(1, 20)
    assert fo.wigner_displaced_parity(vac, [0.0, 0.0]) == pytest.approx(1 / (2 * np.pi), abs=1e-12)
    assert fo.wigner_displaced_parity(one, [0.0, 0.0]) == pytest.approx(-1 / (2 * np.pi), abs=1e-12)


def test_squeezed_vacuum_matches_gaussian_wigner():
    rng = np.random.default_rng(1)
    st0 = sy.GaussianState.squeezed(2.0)
    rho = fo.gaussian_to_fock(st0.V, st0.xi, d=40)
    pts = rng.uniform(-2.5, 2.5, size=(25, 2))
    np.testing.assert_allclose(fo.wigner_grid(rho, pts), wg.gaussian_wigner(st0)(pts), atol=1e-7)


def test_characteristic_function():
    vac = fo.fock_state(0, 20)
    lam = np.array([0.7, -0.4])
    assert fo.characteristic(vac, [0.0, 0.0]) == pytest.approx(1.0)
    assert fo.characteristic(vac, lam) == pytest.approx(np.exp(-0.5 * lam @ lam), abs=1e-12)
    xi = np.array([1.0, 0.5])
    coh = fo.from_ket(fo.coherent_ket(xi, 40), 40)
    assert fo.characteristic(coh, lam) == pytest.approx(np.exp(1j * lam @ xi - 0.5 * lam @ lam), abs=1e-8)


def test_entropies_and_fidelities():
    assert fo.entropy_fidelity(fo.fock_state(1, 10), fo.fock_ket(1, 10))[1] == pytest.approx(1.0)
    assert fo.von_neumann_entropy(fo.fock_state(3, 10)) == 0.0
    S, _ = fo.entropy_fidelity(fo.thermal_state(3.0, 60))
    assert S == pytest.approx(2 * np.log(2), abs=1e-4)
    assert S == pytest.approx(sy.gaussian_entropy(3 * np.eye(2)), abs=1e-4)


def test_single_photon_moments():
    xi, V = fo.moments(fo.fock_state(1, 10))
    np.testing.assert_allclose(xi, 0.0, atol=1e-14)
    np.testing.assert_allclose(V, 3 * np.eye(2), atol=1e-12)


def test_gaussian_preparation_examples():
    vac = fo.gaussian_to_fock(np.eye(2), d=10)
    assert abs(vac.ket[0]) == pytest.approx(1.0)
    xi, V = fo.moments(fo.gaussian_to_fock(np.diag([2.0, 0.5]), d=40))
    np.testing.assert_allclose(V, np.diag([2.0, 0.5]), atol=1e-6)
    epr = sy.GaussianState.epr(2.0)
    xi, V = fo.moments(fo.gaussian_to_fock(epr.V, d=30))
    np.testing.assert_allclose(V, epr.V, atol=1e-5)


def test_leakage_is_flagged():
    with pytest.raises(NumericalError):
        fo.gaussian_to_fock(sy.GaussianState.squeezed(50.0).V, d=8)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_random_single_mode_recipes_reproduce_moments(seed):
    rng = np.random.default_rng(seed)
    V = sy.random_covariance(1, rng, max_db=6.0, max_nu=2.0)
    xi = rng.uniform(-1.0, 1.0, 2)
    xi_o, V_o = fo.moments(fo.gaussian_to_fock(V, xi, d=60))
    np.testing.assert_allclose(xi_o, xi, atol=1e-5)
    np.testing.assert_allclose(V_o, V, atol=1e-5)


def test_two_mode_pure_recipe_reproduces_moments():
    rng = np.random.default_rng(11)
    S = sy.random_symplectic(2, rng, max_db=3.0)
    V = S @ S.T
    xi = np.array([0.3, -0.2, 0.1, 0.4])
    xi_o, V_o = fo.moments(fo.gaussian_to_fock(V, xi, d=24))
    np.testing.assert_allclose(xi_o, xi, atol=1e-5)
    np.testing.assert_allclose(V_o, V, atol=1e-5)


def test_annihilation_matches_photon_number():
    coh = fo.from_ket(fo.coherent_ket(np.array([1.2, 0.0]), 40), 40)
    out = fo.annihilate(coh, np.array([1.0, 0.0]))
    # a coherent state is an eigenstate of the annihilation operator
    assert fo.fidelity(out, coh.ket) == pytest.approx(1.0, abs=1e-10)
