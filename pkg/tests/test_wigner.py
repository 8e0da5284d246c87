import numpy as np
import pytest
from hypothesis import given, strategies as st

from cvng import fock_oracle as fo
from cvng import symplectic as sy
from cvng import wigner as wg
from cvng.errors import ValidationError

seeds = st.integers(0, 2**32 - 1)


def grid(m=1, lo=-2.5, hi=2.5, k=5):
    ax = np.linspace(lo, hi, k)
    mesh = np.meshgrid(*([ax] * 2 * m), indexing="ij")
    return np.column_stack([a.ravel() for a in mesh])


def test_vacuum_and_single_photon_at_origin():
    assert wg.vacuum_wigner()(np.zeros((1, 2)))[0] == pytest.approx(1 / (2 * np.pi))
    assert wg.fock_wigner(1)(np.zeros((1, 2)))[0] == pytest.approx(-1 / (2 * np.pi))


@pytest.mark.parametrize("n", range(5))
def test_fock_wigner_matches_oracle(n):
    X = grid()
    ref = fo.wigner_grid(fo.fock_state(n, 40), X)
    np.testing.assert_allclose(wg.fock_wigner(n)(X), ref, atol=1e-10)


@pytest.mark.parametrize("parity", [1, -1])
def test_cat_matches_oracle(parity):
    alpha = np.array([2.0, 1.0])
    d = 40
    ket = fo.coherent_ket(alpha, d) + parity * fo.coherent_ket(-alpha, d)
    X = grid(lo=-3, hi=3, k=7)
    ref = fo.wigner_grid(fo.from_ket(ket, d), X)
    np.testing.assert_allclose(wg.cat_wigner(parity, alpha)(X), ref, atol=1e-9)


def test_gaussian_wigner_matches_oracle_for_displaced_squeezed_thermal():
    S = sy.squeezer(1.8) @ sy.rotation(0.4)
    V = S @ (1.3 * np.eye(2)) @ S.T
    xi = np.array([0.5, -0.3])
    X = grid()
    ref = fo.wigner_grid(fo.gaussian_to_fock(V, xi, d=50), X)
    np.testing.assert_allclose(wg.gaussian_wigner(sy.GaussianState(xi, V))(X), ref, atol=1e-8)


@pytest.mark.parametrize("W", [
    wg.vacuum_wigner(2), wg.fock_wigner(3), wg.cat_wigner(1, [3.0, 0.0]), wg.cat_wigner(-1, [0.5, 0.5]),
    wg.fock_vacuum_mixture(0.3, 2), wg.gkp_wigner(0, 4.0, 0.3), wg.multimode_fock_wigner([1, 2]),
])
def test_constructors_are_normalised(W):
    assert W.integral() == pytest.approx(1.0, abs=1e-10)


def test_pure_state_purities():
    assert wg.purity(wg.fock_wigner(2)) == pytest.approx(1.0, abs=1e-12)
    assert wg.purity(wg.cat_wigner(1, [6.0, 0.0])) == pytest.approx(1.0, abs=1e-10)
    assert wg.purity(wg.gaussian_wigner(sy.GaussianState.thermal(2.0))) == pytest.approx(0.5)
    assert wg.purity(wg.fock_vacuum_mixture(0.5, 1)) == pytest.approx(0.5)


def test_overlaps_of_orthogonal_states():
    assert wg.overlap(wg.fock_wigner(0), wg.fock_wigner(1)) == pytest.approx(0.0, abs=1e-13)
    assert wg.overlap(wg.cat_wigner(1, [2.0, 0.0]), wg.cat_wigner(-1, [2.0, 0.0])) == pytest.approx(0.0, abs=1e-12)


def test_marginal_of_product_state():
    W = wg.multimode_fock_wigner([1, 0])
    M = W.marginal_modes([0])
    X = grid()
    np.testing.assert_allclose(M(X), wg.fock_wigner(1)(X), atol=1e-13)


def test_quadrature_marginal_is_a_probability_density():
    p = wg.fock_wigner(1).marginal([0])
    x = np.linspace(-4, 4, 9)[:, None]
    ref = x[:, 0] ** 2 * np.exp(-x[:, 0] ** 2 / 2) / np.sqrt(2 * np.pi)
    np.testing.assert_allclose(p(x), ref, atol=1e-13)


def test_gkp_peaks_sit_on_the_lattice():
    W = wg.gkp_wigner(0, 8.0, 0.2)
    px = W.marginal([0])
    peaks = 2 * np.sqrt(np.pi) * np.arange(-2, 3)
    valleys = peaks[:-1] + np.sqrt(np.pi)
    assert px(peaks[:, None]).min() > 10 * px(valleys[:, None]).max()
    W1 = wg.gkp_wigner(1, 8.0, 0.2).marginal([0])
    assert W1(np.array([[np.sqrt(np.pi)]]))[0] > 10 * W1(np.array([[0.0]]))[0]


def test_q_function_of_vacuum():
    assert wg.q_function(wg.vacuum_wigner(), [0.0, 0.0]) == pytest.approx(1 / (4 * np.pi))
    assert wg.q_function(wg.fock_wigner(1), [0.0, 0.0]) == pytest.approx(0.0, abs=1e-15)


def test_negativity_of_gaussians_vanishes():
    W = wg.gaussian_wigner(sy.GaussianState(np.array([1.0, 0.0]), np.diag([3.0, 0.5])))
    assert wg.negativity_volume(W) == pytest.approx(0.0, abs=1e-9)


def test_minimum_value_signs():
    assert wg.minimum_value(wg.fock_wigner(1)) == pytest.approx(-1 / (2 * np.pi))
    assert not wg.is_negative(wg.vacuum_wigner())
    assert wg.is_negative(wg.cat_wigner(1, [3.0, 0.0]))


def test_orthonormality_of_mode_basis_is_checked():
    with pytest.raises(ValidationError):
        wg.multimode_fock_wigner([1, 1], np.array([[1.0, 0, 0, 0], [1.0, 0, 0, 0]]).T)


def test_extended_precision_keeps_highly_squeezed_subtraction_pure():
    from cvng import conditional as cd
    state = sy.GaussianState.epr(1000.0)
    with wg.extended_precision(40):
        W = cd.photon_subtract(state, [0.0, 0.0, 1.0, 0.0]).form
        assert float(wg.purity(W)) == pytest.approx(1.0, abs=1e-9)


@given(seeds)
def test_negativity_invariant_under_gaussian_unitaries(seed):
    rng = np.random.default_rng(seed)
    S = sy.random_symplectic(1, rng, max_db=6.0)
    alpha = rng.uniform(-1, 1, 2)
    W = wg.fock_wigner(1).transformed(S, alpha)
    assert W.integral() == pytest.approx(1.0, abs=1e-10)
    assert wg.negativity_volume(W) == pytest.approx(0.42612, abs=1e-4)


@given(seeds)
def test_q_function_is_non_negative(seed):
    rng = np.random.default_rng(seed)
    alpha = rng.uniform(-4, 4, 2)
    for W in (wg.fock_wigner(2), wg.cat_wigner(-1, [2.0, 0.5])):
        assert wg.q_function(W, alpha) >= -1e-14


@given(seeds)
def test_trace_rule_agrees_with_oracle_overlap(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(-1.5, 1.5, 2), rng.uniform(-1.5, 1.5, 2)
    lhs = wg.overlap(wg.coherent_wigner(a), wg.fock_wigner(1).transformed(np.eye(2), b))
    d = 40
    ka = fo.coherent_ket(a, d)
    kb = fo.displacement(b, d + 30)[:d, :d] @ fo.fock_ket(1, d)
    assert lhs == pytest.approx(abs(np.vdot(ka, kb)) ** 2, abs=1e-9)
