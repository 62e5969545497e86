"""Timing pipeline tests: measurement model, predictor, worst case, and
the YES/NO decision."""

import random
from fractions import Fraction

import pytest

from scid import benchmarks, timing
from scid.frontend import build_dag, parse
from scid.paths import PathVector, extract_feasible_basis


def platform_for(cfg, name, seed=0):
    plat = timing.PlatformModel.from_json(benchmarks.path(name), seed=seed)
    return plat.bind(cfg)


@pytest.fixture(scope="module")
def zero_platform(modexp_cfg):
    return platform_for(modexp_cfg, "modexp_zero.json")


@pytest.fixture(scope="module")
def uniform_platform(modexp_cfg):
    return platform_for(modexp_cfg, "modexp_uniform.json")


@pytest.fixture(scope="module")
def modexp_paths(modexp_cfg):
    return [PathVector.from_edges(modexp_cfg, e)
            for e in modexp_cfg.enumerate_paths()]


class TestMeasure:
    def test_zero_law_is_exact(self, modexp_cfg, zero_platform, modexp_basis):
        for pv in modexp_basis.paths:
            assert timing.measure(zero_platform, pv, None) == \
                timing.true_time(zero_platform, pv)

    def test_single_edge_weight(self):
        cfg = build_dag(parse("func main(x) { return x; }"))
        plat = timing.PlatformModel(weights=(Fraction(7),)).bind(cfg)
        (pv,) = [PathVector.from_edges(cfg, e) for e in cfg.enumerate_paths()]
        assert timing.measure(plat, pv, None) == 7

    def test_deterministic_in_seed_and_trial(self, modexp_basis, uniform_platform):
        pv = modexp_basis.paths[0]
        a = timing.measure(uniform_platform, pv, None, trial=5)
        b = timing.measure(uniform_platform, pv, None, trial=5)
        c = timing.measure(uniform_platform, pv, None, trial=6)
        assert a == b and a != c

    def test_empirical_mean_within_mu_max(self, modexp_cfg, modexp_basis):
        pv = modexp_basis.paths[-1]
        for law in ("uniform", "cachelike"):
            plat = timing.PlatformModel(
                weights=tuple([Fraction(10)] * modexp_cfg.n_edges),
                law=law, mu_max=Fraction(2), seed=9).bind(modexp_cfg)
            n = 10_000
            total = sum(timing.measure(plat, pv, None, trial=k) for k in range(n))
            mean_pert = total / n - timing.true_time(plat, pv)
            assert 0 <= mean_pert <= plat.mu_max

    def test_weight_length_validated(self, modexp_cfg):
        plat = timing.PlatformModel(weights=(Fraction(1),))
        with pytest.raises(timing.TimingError):
            plat.bind(modexp_cfg)


class TestTrials:
    def test_round_robin_covers_each_once(self, modexp_basis, zero_platform):
        log = timing.run_trials(zero_platform, modexp_basis,
                                modexp_basis.size, seed=0, round_robin=True)
        assert sorted(i for i, _ in log.trials) == list(range(modexp_basis.size))

    def test_uniform_frequencies(self, modexp_basis, zero_platform):
        n = 10_000
        b = modexp_basis.size
        log = timing.run_trials(zero_platform, modexp_basis, n, seed=4)
        counts = [0] * b
        for i, _ in log.trials:
            counts[i] += 1
        p = 1 / b
        sigma = (n * p * (1 - p)) ** 0.5
        for c in counts:
            assert abs(c - n * p) <= 5 * sigma

    def test_identical_seeds_identical_logs(self, modexp_basis, uniform_platform):
        a = timing.run_trials(uniform_platform, modexp_basis, 50, seed=7)
        b = timing.run_trials(uniform_platform, modexp_basis, 50, seed=7)
        assert a == b

    def test_too_few_trials_rejected(self, modexp_basis, zero_platform):
        with pytest.raises(timing.TimingError):
            timing.run_trials(zero_platform, modexp_basis,
                              modexp_basis.size - 1, seed=0)


class TestPredictor:
    def test_zero_noise_fits_exactly(self, modexp_basis, zero_platform):
        log = timing.run_trials(zero_platform, modexp_basis, 30, seed=2)
        lengths = timing.fit_predictor(modexp_basis, log)
        for i, pv in enumerate(modexp_basis.paths):
            assert lengths[i] == timing.true_time(zero_platform, pv)

    def test_mean_of_two(self, modexp_basis):
        log = timing.MeasurementLog(((0, Fraction(10)), (0, Fraction(12)))
                                    + tuple((i, Fraction(1))
                                            for i in range(1, modexp_basis.size)))
        lengths = timing.fit_predictor(modexp_basis, log)
        assert lengths[0] == 11

    def test_unobserved_path_named(self, modexp_basis):
        log = timing.MeasurementLog(((0, Fraction(1)),))
        with pytest.raises(timing.TimingError) as err:
            timing.fit_predictor(modexp_basis, log)
        assert "1" in str(err.value)

    def test_noise_bounded_fit_over_seeds(self, modexp_cfg, modexp_basis):
        # |mean - w.b| <= mu_max plus sampling slack, across 100 seeds.
        slack = Fraction(1, 2)
        for seed in range(100):
            plat = platform_for(modexp_cfg, "modexp_uniform.json", seed=seed)
            log = timing.run_trials(plat, modexp_basis, 200, seed=seed)
            lengths = timing.fit_predictor(modexp_basis, log)
            for i, pv in enumerate(modexp_basis.paths):
                err = abs(lengths[i] - timing.true_time(plat, pv))
                assert err <= plat.mu_max + slack


class TestPrediction:
    def test_basis_path_predicts_its_mean(self, modexp_basis, zero_platform):
        log = timing.run_trials(zero_platform, modexp_basis, 40, seed=3)
        lengths = timing.fit_predictor(modexp_basis, log)
        for k, pv in enumerate(modexp_basis.paths):
            assert timing.predict_time(modexp_basis, lengths, pv) == lengths[k]

    def test_noiseless_exactness_all_paths(self, modexp_cfg, modexp_basis,
                                           zero_platform, modexp_paths):
        log = timing.run_trials(zero_platform, modexp_basis, 20, seed=1,
                                round_robin=True)
        lengths = timing.fit_predictor(modexp_basis, log)
        for pv in modexp_paths:
            assert timing.predict_time(modexp_basis, lengths, pv) == \
                timing.true_time(zero_platform, pv)

    def test_linearity(self, modexp_basis, zero_platform, modexp_paths):
        log = timing.run_trials(zero_platform, modexp_basis, 20, seed=1,
                                round_robin=True)
        lengths = timing.fit_predictor(modexp_basis, log)
        p0, p1, p2 = modexp_paths[0], modexp_paths[1], modexp_paths[2]
        combo = tuple(a + b - c for a, b, c in zip(p1.bits, p2.bits, p0.bits))
        pred = timing.predict_time(modexp_basis, lengths, PathVector(combo)) \
            if all(x in (0, 1) for x in combo) else None
        lhs = (timing.predict_time(modexp_basis, lengths, p1)
               + timing.predict_time(modexp_basis, lengths, p2)
               - timing.predict_time(modexp_basis, lengths, p0))
        if pred is not None:
            assert pred == lhs

    def test_not_in_span_propagates(self, modexp_cfg, modexp_basis):
        lengths = tuple(Fraction(1) for _ in range(modexp_basis.size))
        outside = PathVector(tuple(1 for _ in range(modexp_cfg.n_edges)))
        with pytest.raises(timing.NotInSpan):
            timing.predict_time(modexp_basis, lengths, outside)


class TestWorstCase:
    def test_single_path(self):
        cfg = build_dag(parse("func main(x) { return x; }"))
        plat = timing.PlatformModel(weights=(Fraction(3),)).bind(cfg)
        basis = extract_feasible_basis(cfg)
        log = timing.run_trials(plat, basis, 1, seed=0)
        lengths = timing.fit_predictor(basis, log)
        pv, test, predicted = timing.find_worst_case(cfg, basis, lengths)
        assert predicted == 3

    def test_modexp_worst_is_255(self, modexp_cfg, modexp_basis, zero_platform,
                                 modexp_oracle):
        log = timing.run_trials(zero_platform, modexp_basis, 20, seed=1,
                                round_robin=True)
        lengths = timing.fit_predictor(modexp_basis, log)
        pv, test, predicted = timing.find_worst_case(
            modexp_cfg, modexp_basis, lengths, oracle=modexp_oracle)
        assert test["exp"] == 255
        assert predicted == timing.true_time(zero_platform, pv)

    def test_synthetic_argmax_matches_brute_force(self):
        cfg = build_dag(parse("""
            func main(x) {
                y = 0;
                if ((x & 1) == 1) { y = y + 1; }
                if ((x & 2) == 2) { y = y + 2; }
                return y;
            }
        """))
        rng = random.Random(5)
        weights = tuple(Fraction(rng.randrange(1, 50)) for _ in range(cfg.n_edges))
        plat = timing.PlatformModel(weights=weights).bind(cfg)
        basis = extract_feasible_basis(cfg)
        log = timing.run_trials(plat, basis, basis.size, seed=0, round_robin=True)
        lengths = timing.fit_predictor(basis, log)
        _, _, predicted = timing.find_worst_case(cfg, basis, lengths)
        brute = max(timing.true_time(plat, PathVector.from_edges(cfg, e))
                    for e in cfg.enumerate_paths())
        assert predicted == brute


class TestAnswerTa:
    def test_huge_tau_yes(self, modexp_cfg, zero_platform):
        verdict = timing.answer_ta(modexp_cfg, zero_platform, 10 ** 9, 0.05, seed=1)
        assert verdict.answer == "YES"
        assert verdict.witness_test is None

    def test_tau_just_below_worst_no(self, modexp_cfg, zero_platform, modexp_paths):
        truth = max(timing.true_time(zero_platform, pv) for pv in modexp_paths)
        verdict = timing.answer_ta(modexp_cfg, zero_platform, truth - 1, 0.05, seed=1)
        assert verdict.answer == "NO"
        assert verdict.witness_test["exp"] == 255
        assert verdict.tau_star == truth

    def test_margin_promise_holds(self, modexp_cfg, uniform_platform):
        assert timing.margin_check(modexp_cfg, uniform_platform) == \
            uniform_platform.rho

    def test_probabilistic_soundness_smoke(self, modexp_cfg, modexp_paths):
        # 10-run smoke version of the acceptance harness.
        base = timing.PlatformModel.from_json(
            benchmarks.path("modexp_uniform.json")).bind(modexp_cfg)
        truth = max(timing.true_time(base, pv) for pv in modexp_paths)
        correct = 0
        for seed in range(10):
            plat = timing.PlatformModel.from_json(
                benchmarks.path("modexp_uniform.json"), seed=seed).bind(modexp_cfg)
            verdict = timing.answer_ta(modexp_cfg, plat, truth - 12, 0.05, seed=seed)
            correct += verdict.answer == "NO"
        assert correct >= 9

    def test_bad_arguments(self, modexp_cfg, zero_platform):
        with pytest.raises(timing.TimingError):
            timing.answer_ta(modexp_cfg, zero_platform, -1, 0.05)
        with pytest.raises(timing.TimingError):
            timing.answer_ta(modexp_cfg, zero_platform, 10, 1.5)
