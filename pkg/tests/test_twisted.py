import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zeroqueue import catalog
from zeroqueue.errors import AlgebraError, RegimeError, SolverError
from zeroqueue.traffic import Structure, walk_drift
from zeroqueue.twisted import (Stability, StationaryLaw, balance_residual, classify, departure_rate,
                               level_mass, load_of, make_solution, psi_map, solve_tte, stability,
                               stationary_probability, support_closed)

from conftest import ALL_EXAMPLES, PLAIN_EXAMPLES


def z3z3_rho(p, lam, mu):
    num = 4 * lam ** 2 * p ** 2 - 2 * lam ** 2 * p + lam * mu + lam ** 2
    den = 4 * lam ** 2 * p ** 2 - 2 * lam ** 2 * p + 4 * lam * mu + lam ** 2 + 4 * mu ** 2
    return 2 * num / den


def z3z3_r_a(p, lam, mu):
    q = 0.5 - p
    return (-4 * p * q * lam + lam + 4 * p * mu) / (4 * (-4 * p * q * lam + lam + mu))


def nb_cubic(Y, p, lam, mu):
    # the displayed cubic with the sign of the Y^2 coefficient corrected
    return (mu ** 2 * Y ** 3 - (mu ** 2 + mu * lam + lam * mu * p) * Y ** 2
            + (lam ** 2 * p + lam * mu * p) * Y - lam ** 2 * p ** 2 + lam ** 2 * p)


def test_psi_map_examples(z3z3, rng):
    pair, nu = z3z3
    for x in rng.dirichlet(np.ones(4), size=50):
        assert psi_map(pair, nu, 1.0, 1.0, x).sum() == pytest.approx(1.0, abs=1e-12)
    assert psi_map(pair, nu, 1, 1, np.full(4, 0.25)) == pytest.approx(np.full(4, 0.25))
    pm, nm = catalog.mm1()
    assert psi_map(pm, nm, 1.0, 3.0, [1.0]) == pytest.approx([1.0])
    bic, _ = catalog.bicyclic(0.4)
    with pytest.warns(UserWarning), pytest.raises(SolverError):
        psi_map(bic, [1.0, 0.0], 1, 1, [0.0, 1.0])


def test_rates_must_be_positive(z3z3):
    with pytest.raises(ValueError):
        solve_tte(*z3z3, 0.0, 1.0)
    with pytest.raises(ValueError):
        solve_tte(*z3z3, 1.0, -1.0)


def test_z3z3_solution(z3z3):
    (sol,) = solve_tte(*z3z3, 1.0, 1.0)
    assert sol.rho == pytest.approx(0.4, abs=1e-10)
    assert np.allclose(sol.r, 0.25, atol=1e-10)
    assert sol.residual < 1e-10


@pytest.mark.parametrize("p,lam,mu", [(0.1, 1, 1), (0.25, 2, 1), (0.4, 0.5, 1), (0.3, 3, 2)])
def test_z3z3_closed_form(p, lam, mu):
    pair, nu = catalog.z3_star_z3(p)
    (sol,) = solve_tte(pair, nu, lam, mu)
    assert sol.rho == pytest.approx(z3z3_rho(p, lam, mu), abs=1e-10)
    ra = z3z3_r_a(p, lam, mu)
    assert sol.r == pytest.approx([ra, 0.5 - ra, ra, 0.5 - ra], abs=1e-10)


@pytest.mark.parametrize("p,lam,mu", [(0.5, 1, 1), (0.3, 0.7, 1), (0.8, 0.5, 2)])
def test_nb_rho_solves_sign_corrected_cubic(p, lam, mu):
    pair, nu = catalog.n_star_b(p)
    (sol,) = solve_tte(pair, nu, lam, mu)
    assert abs(nb_cubic(sol.rho, p, lam, mu)) < 1e-10
    # the relation holds with the first generator's mass
    assert sol.rho == pytest.approx((sol.r[0] * (1 - p) + p) * lam / mu, abs=1e-10)


def test_z_pair_two_boundary_solutions():
    pair, nu = catalog.z_pair(0.6)
    sols = solve_tte(pair, nu, 1.0, 1.0)
    assert len(sols) == 2
    (lo, hi) = sols
    assert lo.rho == pytest.approx(0.4 / 1.6, abs=1e-9) and lo.r == pytest.approx([0, 1], abs=1e-9)
    assert hi.rho == pytest.approx(0.6 / 1.4, abs=1e-9) and hi.r == pytest.approx([1, 0], abs=1e-9)


@pytest.mark.parametrize("p", [0.6, 0.75, 0.9])
def test_bicyclic_two_solutions(p):
    pair, nu = catalog.bicyclic(p)
    sols = solve_tte(pair, nu, 1.0, 1.0)
    assert len(sols) == 2
    first = min(sols, key=lambda s: s.r[0])
    second = max(sols, key=lambda s: s.r[0])
    assert first.rho == pytest.approx((1 - p) / (1 + p), abs=1e-9)
    assert first.r == pytest.approx([0, 1], abs=1e-9)
    assert second.rho == pytest.approx(p / (1 + 1 - p), abs=1e-9)
    assert second.r == pytest.approx([(2 * p - 1) / p, (1 - p) / p], abs=1e-9)


@pytest.mark.parametrize("p", [0.2, 0.4, 0.5])
def test_bicyclic_single_solution(p):
    pair, nu = catalog.bicyclic(p)
    (sol,) = solve_tte(pair, nu, 1.0, 1.0)
    assert sol.rho == pytest.approx((1 - p) / (1 + p), abs=1e-9)


def test_bicyclic_c_solution():
    pair, nu = catalog.bicyclic_star_c(0.4, 0.4)
    (sol,) = solve_tte(pair, nu, 1.0, 1.0)
    assert sol.rho == pytest.approx(2 / 3, abs=1e-9)
    assert sol.r == pytest.approx([0.25, 0.5, 0.25], abs=1e-9)
    assert sol.rho == pytest.approx((1 - 0.4 * sol.r[1]) / (1 + 0.4 * sol.r[1]), abs=1e-9)


@pytest.mark.parametrize("name", sorted(ALL_EXAMPLES))
def test_solution_invariants(name):
    pair, nu = ALL_EXAMPLES[name]()
    s = Structure(pair, nu)
    for sol in solve_tte(pair, nu, 1.0, 1.7):
        assert sol.r.sum() == pytest.approx(1.0, abs=1e-12)
        assert sol.residual < 1e-9
        assert abs(sol.rho - load_of(s, 1.0, 1.7, sol.r)) < 1e-10
        assert support_closed(pair, sol.r)


@pytest.mark.parametrize("name", sorted(PLAIN_EXAMPLES))
def test_plain_tte_uniqueness_across_random_starts(name, rng):
    pair, nu = PLAIN_EXAMPLES[name]()
    gamma = walk_drift(pair, nu)
    lam = 0.8 / gamma
    starts = list(rng.dirichlet(np.ones(pair.size), size=100))
    assert len(solve_tte(pair, nu, lam, 1.0, starts=starts)) == 1


def test_null_recurrent_branch(z3z3):
    pair, nu = z3z3
    sols = solve_tte(pair, nu, 4.0, 1.0)
    assert any(abs(s.rho - 1) < 1e-9 and np.allclose(s.r, 0.25, atol=1e-9) for s in sols)
    assert classify(4.0, 1.0, walk_drift(pair, nu)) is Stability.NULL_RECURRENT


def test_classify_examples():
    assert classify(1, 1, 0.25) is Stability.ERGODIC
    assert classify(1, 0.25, 0.25) is Stability.NULL_RECURRENT
    assert classify(2, 1, 0.6) is Stability.TRANSIENT
    v = stability(2, 1, 0.6)
    assert v.margin == pytest.approx(0.2)
    with pytest.raises(ValueError):
        classify(1, 1, -0.1)


@pytest.mark.parametrize("name", ["z3z3", "z3z3_p01", "nb", "nzb", "zc", "mm1"])
@pytest.mark.parametrize("ratio", [0.3, 0.9, 1.1, 2.0])
def test_load_sign_matches_stability(name, ratio):
    pair, nu = PLAIN_EXAMPLES[name]()
    gamma = walk_drift(pair, nu)
    lam = ratio / gamma
    sols = solve_tte(pair, nu, lam, 1.0)
    verdict = classify(lam, 1.0, gamma)
    assert len(sols) == 1
    assert (sols[0].rho < 1) == (verdict is Stability.ERGODIC)


def test_stationary_probability_examples(z3z3):
    pair, nu = z3z3
    law = StationaryLaw(pair, solve_tte(pair, nu, 1, 1)[0])
    assert stationary_probability(law, ()) == pytest.approx(0.6)
    assert law.probability(pair.word("b")) == pytest.approx(0.06)
    assert law.probability(pair.word("a b")) == pytest.approx(0.012)
    assert level_mass(law, 0) == pytest.approx(0.6)
    assert level_mass(law, 2) == pytest.approx(0.096)
    assert sum(level_mass(law, n) for n in range(200)) == pytest.approx(1.0)
    assert departure_rate(law, 1.0) == pytest.approx(0.4)
    with pytest.raises(AlgebraError):
        law.probability(pair.word("a a"))


def test_level_mass_matches_word_sum(z3z3):
    from zeroqueue.oracle import enumerate_words
    pair, nu = z3z3
    law = StationaryLaw(pair, solve_tte(pair, nu, 1, 1)[0])
    words = enumerate_words(pair, 5)
    for n in range(6):
        assert sum(law.probability(w) for w in words if len(w) == n) == pytest.approx(level_mass(law, n))


def test_unsupported_letters_get_zero():
    pair, nu = catalog.bicyclic(0.4)
    law = StationaryLaw(pair, solve_tte(pair, nu, 1, 1)[0])
    assert law.probability((0,)) == 0.0
    assert law.probability((1, 1)) > 0


def test_transient_law_is_rejected():
    pair, nu = catalog.z3_star_z3(0.25)
    (sol,) = solve_tte(pair, nu, 5.0, 1.0)
    assert sol.rho > 1
    with pytest.raises(RegimeError):
        StationaryLaw(pair, sol)


def test_mm1_burke():
    pair, nu = catalog.mm1()
    (sol,) = solve_tte(pair, nu, 1.0, 2.0)
    law = StationaryLaw(pair, sol)
    assert departure_rate(law, 2.0) == pytest.approx(1.0)
    for n in range(10):
        assert law.probability((0,) * n) == pytest.approx(0.5 ** (n + 1), abs=1e-15)


@pytest.mark.parametrize("name", sorted(ALL_EXAMPLES))
def test_global_balance(name):
    pair, nu = ALL_EXAMPLES[name]()
    for sol in solve_tte(pair, nu, 1.0, 1.0):
        assert balance_residual(pair, nu, 1.0, 1.0, sol, 6) < 1e-10


def test_balance_detects_perturbation(z3z3):
    pair, nu = z3z3
    (sol,) = solve_tte(pair, nu, 1, 1)
    r = sol.r + np.array([1e-3, -1e-3, 0, 0])
    bad = make_solution(pair, nu, 1, 1, sol.rho + 1e-3, r)
    assert balance_residual(pair, nu, 1, 1, bad, 6) > 1e-5


@settings(max_examples=5)
@given(st.floats(0.0, 1.0))
def test_symmetric_z_pair_any_boundary(t):
    pair, nu = catalog.z_pair(0.5)
    lam, mu = 1.0, 1.0
    r = np.array([t, 1 - t])
    sol = make_solution(pair, nu, lam, mu, lam / (2 * mu + lam), r)
    assert sol.residual < 1e-12
    assert balance_residual(pair, nu, lam, mu, sol, 6) < 1e-10


@pytest.mark.parametrize("name", ["z3z3", "z3z3_p01", "nb", "nzb", "zc", "mm1"])
def test_saturation_inequality(name):
    pair, nu = PLAIN_EXAMPLES[name]()
    gamma = walk_drift(pair, nu)
    for lam in (0.2 / gamma, 0.6 / gamma, 0.95 / gamma):
        (sol,) = solve_tte(pair, nu, lam, 1.0)
        assert lam * gamma <= sol.rho * 1.0 + 1e-12 < 1.0


@pytest.mark.parametrize("nu_c", [0.05, 0.02, 0.01, 0.005])
def test_bicyclic_c_unique_for_small_c(nu_c):
    pair, nu = catalog.bicyclic_star_c(0.6, 0.4 - nu_c)
    assert len(solve_tte(pair, nu, 1, 1)) == 1
