import math

import numpy as np
import pytest

from sparsesa.baselines import energies, enumerate_boltzmann, exhaustive, omp
from sparsesa.errors import TooLarge
from sparsesa.linalg import Instance, Support, solve_restricted
from sparsesa.sampler import anneal

from conftest import brute_force_min, lstsq_rss, random_instance


class TestOmp:
    def test_single_atom(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(10, 8))
        inst = Instance(a, 3 * a[:, 5])
        support, st = omp(inst, 1)
        assert support.ones == (5,)
        assert st.rss < 1e-20

    def test_empty(self):
        inst = random_instance(5, 6)
        support, st = omp(inst, 0)
        assert support.k == 0 and st.rss == pytest.approx(0.5 * inst.yy)

    @pytest.mark.parametrize("seed", range(12))
    def test_never_beats_exhaustive(self, seed):
        inst = random_instance(9, 12 + seed % 3, seed=seed)
        for k in (1, 2, 3):
            _, st = omp(inst, k)
            _, opt = brute_force_min(inst.a, inst.y, k)
            assert st.rss >= opt - 1e-12
            assert st.rss <= 0.5 * inst.yy + 1e-12

    def test_skips_dependent_column(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(10, 5))
        a[:, 3] = a[:, 1]
        inst = Instance(a, a[:, 1] + 0.1 * rng.normal(size=10))
        support, _ = omp(inst, 2)
        assert not {1, 3} <= set(support.ones)


class TestExhaustive:
    def test_full_support(self):
        inst = random_instance(6, 4)
        support, rss = exhaustive(inst, 4)
        assert support.ones == (0, 1, 2, 3)
        assert rss == pytest.approx(lstsq_rss(inst.a, inst.y, range(4)), rel=1e-10)

    def test_matches_brute_force(self):
        inst = random_instance(8, 12, seed=3)
        support, rss = exhaustive(inst, 2)
        cols, opt = brute_force_min(inst.a, inst.y, 2)
        assert support.ones == cols and rss == pytest.approx(opt, rel=1e-10)

    def test_nonincreasing_in_k(self):
        inst = random_instance(9, 10, seed=4)
        vals = [exhaustive(inst, k)[1] for k in range(0, 6)]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))

    def test_order_independent(self):
        inst = random_instance(8, 12, seed=5)
        fwd = exhaustive(inst, 2)
        rev = min(energies(inst, 2, reverse=True), key=lambda sr: sr[1])
        assert fwd[0] == rev[0]

    def test_cap(self):
        with pytest.raises(TooLarge):
            exhaustive(random_instance(5, 40), 10)

    def test_sa_never_beats_exhaustive(self):
        inst = random_instance(8, 11, seed=6)
        _, opt = exhaustive(inst, 3)
        for seed in range(5):
            assert anneal(inst, 3, rng=seed).best_rss >= opt - 1e-12


class TestBoltzmann:
    def test_beta_zero_uniform(self):
        t = enumerate_boltzmann(random_instance(6, 7), 2, 0.0)
        assert len(t.supports) == math.comb(7, 2)
        np.testing.assert_allclose(t.probabilities, 1 / 21, rtol=1e-12)

    def test_normalised(self):
        t = enumerate_boltzmann(random_instance(6, 9, seed=2), 3, 7.5)
        assert abs(t.probabilities.sum() - 1) < 1e-12
        np.testing.assert_allclose(t.probabilities, np.exp(-7.5 * t.energies - t.log_g), rtol=1e-10)

    def test_concentrates_at_large_beta(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(10, 8))
        inst = Instance(a, 5 * a[:, 3] + 0.01 * rng.normal(size=10))
        t = enumerate_boltzmann(inst, 1, 1e3)
        es = np.sort(t.energies)
        gap = es[1] - es[0]
        assert gap >= 0.1
        bound = (len(es) - 1) * math.exp(-1e3 * gap)
        top = t.probabilities.max()
        assert 1 - top <= bound + 1e-15
        assert top > 1 - 1e-10
        assert t.supports[int(np.argmax(t.probabilities))] == Support((3,))

    def test_rank_deficient_supports_get_zero(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=(6, 5))
        a[:, 4] = a[:, 0]
        t = enumerate_boltzmann(Instance(a, rng.normal(size=6)), 2, 1.0)
        assert t.rank_deficient == [Support((0, 4))]
        assert t.as_dict()[Support((0, 4))] == 0.0
        assert abs(t.probabilities.sum() - 1) < 1e-12

    def test_mean_energy_decreases_with_beta(self):
        inst = random_instance(7, 9, seed=5)
        means = [enumerate_boltzmann(inst, 2, b).mean_energy() for b in (0.0, 0.5, 2.0, 10.0, 100.0)]
        assert all(b <= a + 1e-12 for a, b in zip(means, means[1:]))

    def test_energies_agree_with_solver(self):
        inst = random_instance(7, 8, seed=6)
        t = enumerate_boltzmann(inst, 3, 1.0)
        for s, e in zip(t.supports[:10], t.energies[:10]):
            assert e == pytest.approx(solve_restricted(inst, s).rss, rel=1e-12)
