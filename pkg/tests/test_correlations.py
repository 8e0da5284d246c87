import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvng import conditional as cd
from cvng import correlations as cr
from cvng import fock_oracle as fo
from cvng import symplectic as sy
from cvng import wigner as wg
from cvng.errors import ValidationError

seeds = st.integers(0, 2**32 - 1)
PART = cd.split(2, [0])
B2 = np.array([0.0, 0.0, 1.0, 0.0])


def test_renyi2_of_epr():
    s = 3.0
    val = cr.renyi2_gaussian(sy.GaussianState.epr(s), PART).value
    assert val == pytest.approx(np.log((s * s + 1) / (2 * s)))
    assert cr.renyi2_pure(wg.gaussian_wigner(sy.GaussianState.epr(s)), PART).value == pytest.approx(val)


def test_renyi2_of_beamsplit_photon_is_log_two():
    assert cr.renyi2_pure(cr.beamsplit_photon_wigner(), PART).value == pytest.approx(np.log(2))


def test_renyi2_rejects_mixed_states():
    with pytest.raises(ValidationError):
        cr.renyi2_gaussian(sy.GaussianState.thermal(2.0, 2), PART)
    with pytest.raises(ValidationError):
        cr.renyi2_pure(wg.gaussian_wigner(sy.GaussianState.thermal(2.0, 2)), PART)


def test_subtraction_gain_matches_oracle_purity():
    s = 2.0
    state = sy.GaussianState.epr(s)
    d = 25
    sub = fo.annihilate(fo.gaussian_to_fock(state.V, d=d), B2)
    mu = np.real(np.trace(np.linalg.matrix_power(fo.partial_trace(sub, [0]).density(), 2)))
    expected = -np.log(mu) - cr.renyi2_gaussian(state, PART).value
    assert cr.subtraction_gain(state, B2, PART) == pytest.approx(expected, abs=1e-8)


def test_subtraction_mode_must_be_local():
    with pytest.raises(ValidationError):
        cr.subtraction_gain(sy.GaussianState.epr(2.0), np.array([1.0, 0, 1.0, 0]) / np.sqrt(2), PART)


@pytest.mark.parametrize("s_db", [0.5, 3.0, 10.0, 20.0, 30.0])
def test_fig4_solid_curves_match_closed_forms(s_db):
    s = float(cr.db_to_ratio(s_db))
    rows = dict(((v, sdb), g) for sdb, g, v in cr.fig4_rows([s_db], ("epr", "split")))
    assert rows[("epr", s_db)] == pytest.approx(cr.epr_gain_closed_form(s), abs=1e-8)
    assert rows[("split", s_db)] == pytest.approx(cr.split_squeezer_gain_closed_form(s), abs=1e-8)


def test_fig4_zero_squeezing_is_the_continuous_limit():
    rows = {v: g for _, g, v in cr.fig4_rows([0.0], ("epr", "split"))}
    assert rows["epr"] == pytest.approx(0.0, abs=1e-8)
    assert rows["split"] == pytest.approx(np.log(2), abs=1e-8)


def test_fig4_split_high_squeezing_approaches_log_four_thirds():
    vals = [g for _, g, _ in cr.fig4_rows([20.0, 30.0], ("split",))]
    assert abs(vals[1] - np.log(4 / 3)) < abs(vals[0] - np.log(4 / 3))
    assert vals[1] == pytest.approx(np.log(4 / 3), abs=2e-3)


def test_epr_mean_field_lowers_gain():
    rows = {v: g for _, g, v in cr.fig4_rows([5.0, 30.0], ("epr", "epr-meanfield")) if _ == 5.0}
    assert rows["epr-meanfield"] < rows["epr"]
    high = [g for sdb, g, v in cr.fig4_rows([30.0], ("epr-meanfield",))]
    assert high[0] == pytest.approx(np.log(2), abs=5e-3)


def test_fig5_balanced_curve():
    thetas = np.linspace(0, np.pi / 2, 9)
    vals = np.array([g for _, g, _ in cr.fig5_rows(thetas, ("balanced",))])
    np.testing.assert_allclose(vals, cr.balanced_creation_closed_form(thetas), atol=1e-8)
    assert vals[4] == pytest.approx(np.log(2), abs=1e-12)


def test_fig5_mean_field_reduces_created_entanglement():
    thetas = np.linspace(0.05, np.pi / 2 - 0.05, 15)
    rows = cr.fig5_rows(thetas)
    best = {}
    for _, g, c in rows:
        best[c] = max(best.get(c, -np.inf), g)
    for c in ("balanced-meanfield-x1", "balanced-meanfield-x2"):
        assert best[c] < best["balanced"]
    for c in ("unbalanced-meanfield-x1", "unbalanced-meanfield-x2"):
        assert best[c] < best["unbalanced"]
    # the more squeezed mode makes creation more resilient to its own displacement
    assert best["unbalanced-meanfield-x1"] > best["unbalanced-meanfield-x2"]


def test_unknown_figure_variants_rejected():
    with pytest.raises(ValidationError):
        cr.fig4_rows([1.0], ("nope",))
    with pytest.raises(ValidationError):
        cr.fig5_rows([0.1], ("nope",))


def test_epr_is_ppt_entangled_and_steerable_both_ways():
    state = sy.GaussianState.epr(4.0)
    assert cr.ppt_entangled(state, PART)
    assert cr.gaussian_steerable(state, PART).steerable
    assert cr.gaussian_steerable(state, PART.swapped()).steerable


def test_product_states_are_neither():
    state = sy.direct_sum(sy.GaussianState.squeezed(3.0), sy.GaussianState.thermal(2.0))
    assert not cr.ppt_entangled(state, PART)
    assert not cr.gaussian_steerable(state, PART).steerable


def test_inference_product_of_epr_beats_bound():
    s = 4.0
    x, p = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    prod = cr.inference_product(sy.GaussianState.epr(s), PART, x, p, x, -p)
    a = (s * s + 1) / (2 * s)
    assert prod == pytest.approx(1 / a**2)
    assert prod < cr.inference_bound(x, p)


def test_chsh_violations():
    epr = wg.gaussian_wigner(sy.GaussianState.epr(3.0))
    assert cr.chsh_scan(epr, budget=500).violated
    assert cr.chsh_scan(cr.beamsplit_photon_wigner(), budget=500).violated


def test_chsh_product_gaussian_respects_bound():
    W = wg.gaussian_wigner(sy.direct_sum(sy.GaussianState.squeezed(2.0), sy.GaussianState.coherent([0.5, 0.0])))
    assert not cr.chsh_grid(W).violated


def test_chsh_zero_budget_evaluates_origin():
    W = wg.gaussian_wigner(sy.GaussianState.epr(3.0))
    w = cr.chsh_scan(W, budget=0)
    assert w.value == pytest.approx(2 * W(np.zeros((1, 4)))[0])


@settings(max_examples=15)
@given(seeds)
def test_gain_never_exceeds_log_two(seed):
    rng = np.random.default_rng(seed)
    S = sy.random_symplectic(2, rng, max_db=12.0)
    state = sy.GaussianState(rng.uniform(-1.5, 1.5, 4), S @ S.T)
    assert cr.subtraction_gain(state, B2, PART) <= np.log(2) + 1e-9


@given(seeds)
def test_ppt_and_steering_are_invariant_under_local_unitaries(seed):
    rng = np.random.default_rng(seed)
    V = sy.random_covariance(2, rng, max_db=6.0, max_nu=1.5)
    state = sy.GaussianState(np.zeros(4), V)
    S = np.zeros((4, 4))
    S[:2, :2] = sy.random_symplectic(1, rng)
    S[2:, 2:] = sy.random_symplectic(1, rng)
    moved = state.transformed(S)
    assert cr.ppt_entangled(moved, PART) == cr.ppt_entangled(state, PART)
    m0 = cr.gaussian_steerable(state, PART).schur_min_eig
    m1 = cr.gaussian_steerable(moved, PART).schur_min_eig
    if abs(m0) > 1e-6:
        assert (m0 < 0) == (m1 < 0)


@given(seeds)
def test_steering_implies_entanglement(seed):
    rng = np.random.default_rng(seed)
    V = sy.random_covariance(2, rng, max_db=8.0, max_nu=1.5)
    state = sy.GaussianState(np.zeros(4), V)
    if cr.gaussian_steerable(state, PART).steerable or cr.gaussian_steerable(state, PART.swapped()).steerable:
        assert cr.ppt_entangled(state, PART)
