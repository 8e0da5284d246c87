"""End-to-end acceptance checks, one test per criterion at its stated tolerance and time budget."""

import time

import numpy as np
import pytest

from cvng import conditional as cd
from cvng import correlations as cr
from cvng import fock_oracle as fo
from cvng import sampler as sm
from cvng import symplectic as sy
from cvng import wigner as wg
from cvng import witnesses as wt

PART = cd.split(2, [0])


@pytest.fixture
def criterion(record_property):
    """Tag the test with its criterion and enforce the time budget once the body has run."""
    state = {}

    def start(num, title, budget):
        record_property("criterion", (num, title))
        state.update(budget=budget, t0=time.perf_counter())

    def detail(text):
        record_property("detail", text)

    start.detail = detail
    yield start
    elapsed = time.perf_counter() - state["t0"]
    assert elapsed < state["budget"], f"took {elapsed:.1f} s, budget {state['budget']} s"


def grid(m, lo, hi, k=5):
    ax = np.linspace(lo, hi, k)
    mesh = np.meshgrid(*([ax] * 2 * m), indexing="ij")
    return np.column_stack([a.ravel() for a in mesh])


def test_fock_negativity_volumes(criterion):
    criterion(1, "Fock negativity volumes", 10)
    vol = [0.42612, 0.72899, 0.97667]
    log = [0.354959, 0.547537, 0.681415]
    for n in (1, 2, 3):
        W = wg.fock_wigner(n)
        assert wg.negativity_volume(W) == pytest.approx(vol[n - 1], abs=1e-4)
        assert wg.log_negativity(W) == pytest.approx(log[n - 1], abs=1e-4)


def test_additivity_and_hom_ordering(criterion):
    criterion(2, "log-negativity additivity and HOM ordering", 30)
    tol = 1e-6
    one = wg.log_negativity(wg.fock_wigner(1), tol)
    pair = wg.log_negativity(wg.multimode_fock_wigner([1, 1]), tol)
    hom = wg.log_negativity(wg.multimode_fock_wigner([1, 1]).transformed(sy.beamsplitter(np.pi / 4)), tol)
    two = wg.log_negativity(wg.fock_wigner(2), tol)
    criterion.detail(f"pair-2*one={pair - 2 * one:.1e} hom-2*one={hom - 2 * one:.1e}")
    assert pair == pytest.approx(2 * one, abs=1e-6)
    assert hom == pytest.approx(2 * one, abs=1e-6)
    assert hom > two


def test_entanglement_gain_closed_forms(criterion):
    criterion(3, "subtraction entanglement-gain closed forms and log 2 bound", 60)
    s_db = np.linspace(0.0, 30.0, 61)
    rows = cr.fig4_rows(s_db, ("epr", "split"))
    worst = 0.0
    for sdb, gain, variant in rows:
        s = float(cr.db_to_ratio(sdb))
        ref = cr.epr_gain_closed_form(s) if variant == "epr" else cr.split_squeezer_gain_closed_form(s)
        worst = max(worst, abs(gain - ref))
    rng = np.random.default_rng(31)
    top = -np.inf
    for _ in range(200):
        S = sy.random_symplectic(2, rng, max_db=12.0)
        state = sy.GaussianState(rng.uniform(-1.5, 1.5, 4), S @ S.T)
        phi = rng.uniform(0, np.pi)
        b = np.array([0.0, 0.0, np.cos(phi), np.sin(phi)])
        top = max(top, cr.subtraction_gain(state, b, PART))
    criterion.detail(f"max closed-form error {worst:.1e}, largest random gain {top:.4f}")
    assert worst < 1e-8
    assert top <= np.log(2) + 1e-9


def test_entanglement_creation_closed_form(criterion):
    criterion(4, "balanced entanglement-creation closed form", 30)
    theta = np.linspace(0.0, np.pi / 2, 101)
    vals = np.array([e for _, e, _ in cr.fig5_rows(theta, ("balanced",))])
    err = np.max(np.abs(vals - cr.balanced_creation_closed_form(theta)))
    criterion.detail(f"max error {err:.1e}")
    assert err < 1e-8
    assert vals[0] == pytest.approx(0.0, abs=1e-8) and vals[-1] == pytest.approx(0.0, abs=1e-8)
    assert np.argmax(vals) == 50
    assert vals[50] == pytest.approx(np.log(2), abs=1e-8)


def test_closed_forms_against_displaced_parity_oracle(criterion):
    criterion(5, "closed-form Wigner functions against the Fock oracle", 300)
    d = 40
    X = grid(1, -2.5, 2.5)
    cases = []
    S = sy.squeezer(1.8) @ sy.rotation(0.4)
    g1 = sy.GaussianState(np.array([0.5, -0.3]), S @ (1.3 * np.eye(2)) @ S.T)
    cases.append(("gaussian", wg.gaussian_wigner(g1), fo.gaussian_to_fock(g1.V, g1.xi, d=d), X, fo.DEFAULT_PAD))
    g2 = sy.GaussianState.epr(2.0).displaced([0.3, 0.0, -0.2, 0.4])
    cases.append(("gaussian-2", wg.gaussian_wigner(g2), fo.gaussian_to_fock(g2.V, g2.xi, d=d),
                  grid(2, -2.0, 2.0), fo.DEFAULT_PAD))
    for n in range(5):
        cases.append((f"fock-{n}", wg.fock_wigner(n), fo.fock_state(n, d), X, fo.DEFAULT_PAD))
    alpha = np.array([6.0, 0.0])
    for parity in (1, -1):
        ket = fo.coherent_ket(alpha, d) + parity * fo.coherent_ket(-alpha, d)
        cases.append((f"cat{parity:+d}", wg.cat_wigner(parity, alpha), fo.from_ket(ket, d), grid(1, -7, 7), 60))
    sq = sy.GaussianState.squeezed(2.0)
    cases.append(("subtracted", cd.photon_subtract(sq, [1.0, 0.0]),
                  fo.annihilate(fo.gaussian_to_fock(sq.V, d=d), [1.0, 0.0]), X, fo.DEFAULT_PAD))
    coh = np.array([1.0, 0.5])
    cases.append(("added", cd.photon_add(sy.GaussianState.coherent(coh), [1.0, 0.0]),
                  fo.create(fo.from_ket(fo.coherent_ket(coh, d), d), [1.0, 0.0]), X, fo.DEFAULT_PAD))
    errs = {}
    for name, W, ref_state, pts, pad in cases:
        ref = np.array([fo.wigner_displaced_parity(ref_state, x, pad=pad) for x in pts])
        errs[name] = float(np.max(np.abs(W(pts) - ref)))
    worst = max(errs, key=errs.get)
    criterion.detail(f"worst {worst} {errs[worst]:.1e}")
    assert errs[worst] < 1e-6, errs


def test_decomposition_round_trips(criterion):
    criterion(6, "Williamson and Bloch-Messiah round trips", 30)
    rng = np.random.default_rng(6)
    worst = 0.0
    for i in range(100):
        m = 1 + i % 4
        V = sy.random_covariance(m, rng)
        S = sy.random_symplectic(m, rng)
        worst = max(worst, np.linalg.norm(sy.williamson(V).reconstruct() - V),
                    np.linalg.norm(sy.bloch_messiah(S).reconstruct() - S))
    criterion.detail(f"worst Frobenius error {worst:.1e}")
    assert worst < 1e-8


def test_sampler_statistical_contract(criterion):
    criterion(7, "EPR heterodyne sampling statistics and reproducibility", 120)
    s = 3.0
    c = sm.Circuit([sy.GaussianState.squeezed(1 / s), sy.GaussianState.squeezed(s)],
                   [sm.LocalChannel((0, 1), sy.GaussianChannel.unitary(sy.beamsplitter(np.pi / 4)))])
    mu, V = sm.heterodyne_targets(c)
    np.testing.assert_allclose(V, sy.GaussianState.epr(s).V + np.eye(4), atol=1e-12)
    cfg = sm.RunConfig(100_000, seed=2024)
    Y = sm.outcome_matrix(sm.run(c, cfg))
    chk = sm.moment_check(Y, mu, V)
    criterion.detail(f"max |z| {chk.max_abs_z:.2f}")
    assert chk.max_abs_z < 5
    again = sm.outcome_matrix(sm.run(c, sm.RunConfig(2000, seed=2024)))
    np.testing.assert_array_equal(again, Y[:2000])


def test_steering_needed_for_heralded_negativity(criterion):
    criterion(8, "heralded Wigner negativity requires steering", 120)
    rng = np.random.default_rng(8)
    one = cd.povm_fock(1)
    negative = steerable = bad = 0
    for _ in range(50):
        V = sy.random_covariance(2, rng, max_db=10.0, max_nu=1.6)
        state = sy.GaussianState(rng.uniform(-1, 1, 4), V)
        W = cd.herald(state, PART, one).form
        neg = wg.minimum_value(W) < -1e-12
        st = cr.gaussian_steerable(state, PART).steerable
        negative += neg
        steerable += st
        bad += neg and not st
    criterion.detail(f"negative {negative}/50, steerable {steerable}/50, counterexamples {bad}")
    assert negative > 0 and steerable < 50
    assert bad == 0


def test_energy_witness_interval(criterion):
    criterion(9, "energy-bounded non-Gaussianity witness interval", 5)

    def certified(g):
        return wt.qng_energy_witness(*wt.fock_mixture_origin(g))

    lo, hi = 0.0, 1.0
    assert not certified(lo) and certified(hi)
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if certified(mid) else (mid, hi)
    g_star = wt.fock_mixture_threshold()
    criterion.detail(f"threshold {g_star:.6f}, bisection {hi:.6f}")
    assert hi == pytest.approx(g_star, abs=1e-4)
    gammas = np.linspace(0.0, 1.0, 1001)
    flags = np.array([certified(g) for g in gammas])
    np.testing.assert_array_equal(flags[np.abs(gammas - g_star) > 1e-4], gammas[np.abs(gammas - g_star) > 1e-4] > g_star)


def test_chsh_wigner(criterion):
    criterion(10, "CHSH test on Wigner values", 120)
    epr = cr.chsh_scan(wg.gaussian_wigner(sy.GaussianState.epr(3.0)), budget=2000, seed=10)
    photon = cr.chsh_scan(cr.beamsplit_photon_wigner(), budget=2000, seed=10)
    products = [
        sy.direct_sum(sy.GaussianState.squeezed(2.0), sy.GaussianState.coherent([0.5, 0.0])),
        sy.direct_sum(sy.GaussianState.vacuum(), sy.GaussianState.vacuum()),
        sy.direct_sum(sy.GaussianState.thermal(2.0), sy.GaussianState.squeezed(0.2)),
    ]
    prod = [cr.chsh_grid(wg.gaussian_wigner(p)) for p in products]
    criterion.detail(f"EPR {epr.value / epr.bound:.3f}x bound, photon {abs(photon.value) / photon.bound:.3f}x bound")
    assert epr.violated and photon.violated
    assert not any(w.violated for w in prod)


def test_central_limit_convergence(criterion):
    criterion(11, "central-limit convergence of averaged single photons", 10)
    core = wt.CoreState.fock(1)
    devs = [wt.clt_convergence(core, N) for N in (1, 10, 100, 10_000)]
    criterion.detail("deviations " + ", ".join(f"{v:.1e}" for v in devs))
    assert all(a > b for a, b in zip(devs, devs[1:]))
    assert devs[-1] < 1e-3
