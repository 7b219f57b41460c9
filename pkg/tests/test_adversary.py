import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gamecoding import adversary as adv
from gamecoding import envelope as E
from gamecoding import honest_noise as hn
from gamecoding.errors import ConfigurationError, DomainError, InfeasibleError, UndefinedConditionalError
from gamecoding.adversary import DiscreteSymmetricNoise as DSN, SignedMixture


def naive_best_pair(k, nu, alpha):
    best = -np.inf
    for i in range(k.size):
        for j in range(k.size):
            if k[i] < alpha or k[j] > alpha:
                continue
            if k[i] == k[j]:
                v = nu[i] if abs(k[i] - alpha) <= 1e-12 else -np.inf
            else:
                lam = (alpha - k[j]) / (k[i] - k[j])
                v = lam * nu[i] + (1 - lam) * nu[j]
            best = max(best, v)
    return best


class TestDiscreteSymmetricNoise:
    def test_zero_atom_carries_double_weight(self):
        g = DSN(((0.0, 0.5),))
        assert g.to_signed().points == ((0.0, 1.0),)

    def test_signed_expansion(self):
        g = DSN(((0.5, 0.25), (2.0, 0.25)))
        np.testing.assert_allclose(g.to_signed().z, [-2.0, -0.5, 0.5, 2.0])

    @pytest.mark.parametrize(
        "atoms",
        [(), ((1.0, 0.3),), ((-1.0, 0.5),), ((1.0, 0.25), (1.0, 0.25)), ((1.0, 0.6), (2.0, -0.1))],
    )
    def test_validation(self, atoms):
        with pytest.raises(ConfigurationError):
            DSN(atoms)

    def test_json_round_trip(self):
        g = DSN(((0.5, 0.125), (3.25, 0.375)))
        doc = json.loads(json.dumps(g.to_json()))
        assert DSN.from_json(doc) == g

    def test_json_absolute_units(self):
        doc = {"delta_units": False, "atoms": [{"z": 5.0, "w": 0.5}]}
        assert DSN.from_json(doc, delta=2.5).atoms == ((2.0, 0.5),)


class TestClosedForms:
    def test_inner_atom(self, uniform):
        ev = adv.evaluate(DSN(((1.0, 0.5),)), uniform, 2.0)
        assert ev.pa == 1.0
        assert ev.mse_mean == pytest.approx(1 / 3)

    def test_band_atom(self, uniform):
        ev = adv.evaluate(DSN(((4.0, 0.5),)), uniform, 4.0)
        assert ev.pa == pytest.approx(0.5)
        assert ev.mse_mean == pytest.approx(61 / 12)

    def test_never_accepted(self, uniform):
        g = DSN(((3.0, 0.5),))
        assert adv.acceptance_probability(g, uniform, 2.0) == 0.0
        assert adv.evaluate(g, uniform, 2.0).degenerate
        with pytest.raises(UndefinedConditionalError):
            adv.mse_mean(g, uniform, 2.0)

    def test_eta_domain(self, uniform):
        with pytest.raises(DomainError):
            adv.evaluate(DSN(((1.0, 0.5),)), uniform, 1.0)

    @pytest.mark.parametrize("noise_name", ["uniform", "triangular", "bumpy"])
    def test_matches_direct_integration(self, noise_name, request):
        noise = request.getfixturevalue(noise_name)
        rng = np.random.default_rng(11)
        for _ in range(25):
            eta = rng.uniform(2, 7)
            n = rng.integers(1, 5)
            z = np.sort(rng.choice(np.linspace(0, (eta + 1.5), 400), n, replace=False))
            w = rng.dirichlet(np.ones(n)) / 2
            g = DSN(tuple(zip(z, w)))
            a, b = adv.evaluate(g, noise, eta), adv.evaluate_signed(g.to_signed(), noise, eta)
            assert a.pa == pytest.approx(b.pa, abs=1e-12)
            if a.pa > 0:
                assert a.mse_mean == pytest.approx(b.mse_mean, rel=1e-10)


class TestSymmetrize:
    def test_mass_folding(self):
        g = adv.symmetrize(SignedMixture(((-1.0, 0.2), (1.0, 0.4), (0.0, 0.4))))
        np.testing.assert_allclose(g.z, [0.0, 1.0])
        np.testing.assert_allclose(g.w, [0.2, 0.3], atol=1e-15)

    @settings(max_examples=80, deadline=None)
    @given(
        st.lists(st.tuples(st.floats(-6, 6), st.floats(0.01, 1)), min_size=1, max_size=6, unique_by=lambda t: t[0]),
        st.floats(2.0, 5.0),
    )
    def test_invariance(self, pts, eta):
        noise = hn.HonestNoise.uniform()
        total = sum(p for _, p in pts)
        mix = SignedMixture(tuple((z, p / total) for z, p in pts))
        a = adv.evaluate_signed(mix, noise, eta)
        b = adv.evaluate(adv.symmetrize(mix), noise, eta)
        assert b.pa == pytest.approx(a.pa, abs=1e-12)
        if a.pa > 1e-9:
            assert b.mse_mean == pytest.approx(a.mse_mean, abs=1e-12 * max(1, a.mse_mean))

    def test_is_symmetric(self):
        assert SignedMixture(((-1.0, 0.5), (1.0, 0.5))).is_symmetric()
        assert not SignedMixture(((-1.0, 0.4), (1.0, 0.6))).is_symmetric()


class TestSynthesis:
    @pytest.mark.parametrize("eta, alpha", [(2.0, 0.9), (2.0, 0.3), (3.0, 0.5), (6.75, 0.807), (8.0, 1.0)])
    def test_attains_beta(self, uniform, eta, alpha):
        g = adv.synthesize_optimal_noise(uniform, eta, alpha)
        env = E.build_envelope(uniform, eta)
        ev = adv.evaluate(g, uniform, eta)
        assert ev.pa == pytest.approx(alpha, abs=1e-12)
        assert ev.mse_mean == pytest.approx(E.beta(env, alpha), abs=1e-9)

    def test_segment_uses_two_magnitudes(self, uniform):
        g = adv.synthesize_optimal_noise(uniform, 2.0, 0.9)
        # tangency at q = 11/14 and the inner edge z = 1
        np.testing.assert_allclose(g.z, [1.0, 3 - 22 / 14])

    def test_tabulated(self, bumpy):
        for alpha in (0.1, 0.6, 0.95):
            g = adv.synthesize_optimal_noise(bumpy, 2.5, alpha)
            assert adv.evaluate(g, bumpy, 2.5).pa == pytest.approx(alpha, abs=1e-9)

    def test_domain(self, uniform):
        with pytest.raises(DomainError):
            adv.synthesize_optimal_noise(uniform, 3.0, 0.0)


class TestBruteForce:
    def test_pair_frontier_matches_naive_search(self):
        rng = np.random.default_rng(2)
        for _ in range(60):
            n = rng.integers(2, 12)
            k = np.sort(rng.random(n))[::-1]
            nu = rng.random(n) * 4
            alphas = np.concatenate([rng.random(4), [k[0], k[-1]]])
            vals = adv.pair_frontier(k, nu, alphas)[0]
            for a, v in zip(alphas, vals):
                ref = naive_best_pair(k, nu, a)
                assert (np.isinf(ref) and np.isinf(v)) or v == pytest.approx(ref, abs=1e-12)

    def test_pair_weights_hit_alpha(self):
        k = np.array([1.0, 0.6, 0.2, 0.0])
        nu = np.array([1.0, 2.5, 2.0, 0.0])
        v, i, j, lam = adv.best_pair(k, nu, 0.4)
        assert lam * k[i] + (1 - lam) * k[j] == pytest.approx(0.4)
        assert v == pytest.approx(lam * nu[i] + (1 - lam) * nu[j])

    def test_below_envelope(self, uniform):
        rng = np.random.default_rng(4)
        for _ in range(8):
            eta, alpha = rng.uniform(2, 8), rng.uniform(0.05, 1)
            b = E.beta(E.build_envelope(uniform, eta), alpha)
            bf = adv.brute_force_beta(uniform, eta, alpha, grid_n=501)
            assert bf <= b + 1e-9
            assert b - bf <= 5e-3

    def test_grid_too_small(self, uniform):
        with pytest.raises(ConfigurationError):
            adv.brute_force_beta(uniform, 3.0, 0.5, grid_n=8)

    def test_infeasible(self):
        v, i, j, _ = adv.best_pair(np.array([0.5, 0.4]), np.array([1.0, 1.0]), 0.9)
        assert v == -np.inf and i == j == -1
