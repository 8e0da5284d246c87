import numpy as np
import pytest
from hypothesis import given, strategies as st

from cvng import conditional as cd
from cvng import fock_oracle as fo
from cvng import symplectic as sy
from cvng import wigner as wg
from cvng.errors import ValidationError

seeds = st.integers(0, 2**32 - 1)


def grid(m=1, lo=-2.5, hi=2.5, k=5):
    ax = np.linspace(lo, hi, k)
    mesh = np.meshgrid(*([ax] * 2 * m), indexing="ij")
    return np.column_stack([a.ravel() for a in mesh])


def test_bipartition_validation():
    with pytest.raises(ValidationError):
        cd.Bipartition((0,), (0, 1))
    with pytest.raises(ValidationError):
        cd.Bipartition((0,), (2,))
    with pytest.raises(ValidationError):
        cd.Bipartition((), (0,))
    p = cd.split(3, [1])
    assert p.g_modes == (0, 2) and p.f_idx == [2, 3]


def test_conditional_gaussian_of_epr():
    s = 3.0
    a = (s * s + 1) / (2 * s)
    cond = cd.conditional_gaussian(cd.blocks(sy.GaussianState.epr(s), cd.split(2, [0])))
    np.testing.assert_allclose(cond.V_schur, np.eye(2) / a, atol=1e-12)
    np.testing.assert_allclose(cond.mean([1.0, 1.0]), [(s * s - 1) / (s * s + 1), -(s * s - 1) / (s * s + 1)])


def test_identity_herald_is_trivial():
    state = sy.GaussianState.epr(2.0)
    out = cd.herald(state, cd.split(2, [0]), cd.povm_identity(1))
    assert out.probability == pytest.approx(1.0)
    X = grid()
    np.testing.assert_allclose(out(X), wg.gaussian_wigner(state.reduced([0]))(X), atol=1e-13)


def test_vacuum_herald_on_epr_leaves_vacuum():
    s = 2.0
    out = cd.herald(sy.GaussianState.epr(s), cd.split(2, [0]), cd.povm_vacuum(1))
    # P(0,0) of a two-mode squeezed vacuum is 1 - tanh(r)^2 = 4s/(s+1)^2
    assert out.probability == pytest.approx(4 * s / (s + 1) ** 2)
    X = grid()
    np.testing.assert_allclose(out(X), wg.vacuum_wigner()(X), atol=1e-13)


def test_zero_probability_herald_rejected():
    with pytest.raises(ValidationError):
        cd.herald(sy.GaussianState.vacuum(2), cd.split(2, [0]), cd.povm_fock(1))
    with pytest.raises(ValidationError):
        cd.photon_subtract(sy.GaussianState.vacuum(1), [1.0, 0.0])


def test_click_povm_is_complement_of_vacuum():
    X = grid()
    np.testing.assert_allclose(cd.povm_click()(X) + cd.povm_vacuum()(X), 1 / (4 * np.pi))


def test_subtracted_squeezed_vacuum_matches_oracle():
    state = sy.GaussianState.squeezed(2.0)
    d = 40
    ref_state = fo.annihilate(fo.gaussian_to_fock(state.V, d=d), [1.0, 0.0])
    X = grid()
    np.testing.assert_allclose(cd.photon_subtract(state, [1.0, 0.0])(X), fo.wigner_grid(ref_state, X), atol=1e-8)


def test_multimode_subtraction_matches_oracle():
    state = sy.GaussianState.epr(2.0).displaced([0.3, 0.0, -0.2, 0.4])
    b = np.array([0.6, 0.0, 0.0, 0.8])
    d = 20
    ref = fo.annihilate(fo.gaussian_to_fock(state.V, state.xi, d=d), b)
    X = grid(2, -2.0, 2.0, 3)
    np.testing.assert_allclose(cd.photon_subtract(state, b)(X), fo.wigner_grid(ref, X), atol=1e-8)


def test_photon_added_coherent_matches_oracle():
    alpha = np.array([1.0, 0.5])
    d = 40
    ref = fo.create(fo.from_ket(fo.coherent_ket(alpha, d), d), [1.0, 0.0])
    X = grid()
    W = cd.photon_add(sy.GaussianState.coherent(alpha), [1.0, 0.0])
    np.testing.assert_allclose(W(X), fo.wigner_grid(ref, X), atol=1e-8)


def test_finite_tap_approaches_subtraction_limit():
    state = sy.GaussianState.squeezed(3.0)
    X = grid()
    limit = cd.photon_subtract(state, [1.0, 0.0])(X)
    errs = [np.max(np.abs(cd.photon_subtract_finite(state, [1.0, 0.0], t)(X) - limit)) for t in (0.1, 0.05)]
    assert errs[1] < errs[0] / 3
    assert errs[1] < 1e-3


def test_subtraction_probability_rate_is_theta_squared_nbar():
    state = sy.GaussianState.squeezed(3.0).displaced([0.4, 0.0])
    nbar = sy.mean_photon_number(state)
    theta = 1e-3
    p = cd.photon_subtract_finite(state, [1.0, 0.0], theta).probability
    assert p / theta**2 == pytest.approx(nbar, rel=1e-4)
    assert cd.subtraction_probability_rate(state, [1.0, 0.0], theta) == pytest.approx(theta**2 * nbar)


def test_photon_addition_gain_range():
    with pytest.raises(ValidationError):
        cd.photon_add_finite(sy.GaussianState.vacuum(), [1.0, 0.0], 0.5)


@given(seeds)
def test_heralded_states_are_normalised_with_valid_probability(seed):
    rng = np.random.default_rng(seed)
    V = sy.random_covariance(2, rng, max_db=6.0, max_nu=2.0)
    state = sy.GaussianState(rng.uniform(-1, 1, 4), V)
    out = cd.herald(state, cd.split(2, [0]), cd.povm_fock(int(rng.integers(0, 3))))
    assert 0.0 < out.probability <= 1.0 + 1e-12
    assert out.form.integral() == pytest.approx(1.0, abs=1e-9)


@given(seeds)
def test_subtraction_limit_agrees_with_weak_tap(seed):
    rng = np.random.default_rng(seed)
    V = sy.random_covariance(2, rng, max_db=6.0, max_nu=2.0)
    state = sy.GaussianState(rng.uniform(-1, 1, 4), V)
    b = [1.0, 0.0, 0.0, 0.0]
    h = cd.photon_subtract(state, b)
    assert h.form.integral() == pytest.approx(1.0, abs=1e-9)
    X = rng.uniform(-3, 3, size=(50, 4))
    np.testing.assert_allclose(cd.photon_subtract_finite(state, b, 0.005)(X), h(X), atol=1e-4)
