import math

import numpy as np
import pytest

from prefbayes.domain import Dataset
from prefbayes.likelihood import (
    PC_RT_ATT,
    EXPONENTIAL,
    PosteriorKernel,
    VariantSpec,
)
from prefbayes.sampler import (
    DiagnosticError,
    SamplerConfig,
    SampleSet,
    autocorrelation,
    diagnostics,
    ess,
    leapfrog,
    load_draws_csv,
    rhat,
    run_chain,
    run_sampler,
    save_draws_csv,
)
from prefbayes.valuefn import PiecewiseConfig

from conftest import make_record


def std_normal(dim):
    def logp_and_grad(x):
        return -0.5 * float(x @ x), -x

    return logp_and_grad


class TestLeapfrog:
    def test_zero_steps_identity(self):
        q0 = np.array([1.0, -2.0])
        p0 = np.array([0.3, 0.7])
        q, p, div = leapfrog(q0, p0, 0.1, 0, lambda x: -x)
        assert np.array_equal(q, q0) and np.array_equal(p, p0) and not div

    def test_reversibility(self):
        lp = std_normal(3)
        rng = np.random.default_rng(0)
        q0, p0 = rng.normal(size=3), rng.normal(size=3)
        q1, p1, _ = leapfrog(q0, p0, 0.05, 40, lambda x: -x)
        q2, p2, _ = leapfrog(q1, -p1, 0.05, 40, lambda x: -x)
        assert q2 == pytest.approx(q0, abs=1e-10)
        assert -p2 == pytest.approx(p0, abs=1e-10)

    def test_energy_nearly_conserved(self):
        rng = np.random.default_rng(1)
        q0, p0 = rng.normal(size=5), rng.normal(size=5)

        def h(q, p):
            return 0.5 * float(q @ q) + 0.5 * float(p @ p)

        q1, p1, _ = leapfrog(q0, p0, 0.01, 100, lambda x: -x)
        assert abs(h(q1, p1) - h(q0, p0)) < 1e-3

    def test_nonfinite_gradient_flags_divergence(self):
        def bad_grad(x):
            return np.full_like(x, np.nan)

        _, _, div = leapfrog(np.zeros(2), np.ones(2), 0.1, 5, bad_grad)
        assert div


class TestRunChain:
    def test_standard_normal_moments(self):
        cfg = SamplerConfig(draws=4000, warmup=500, chains=1, step_size=0.2)
        out = run_chain(std_normal(5), 5, cfg, chain_seed=123)
        draws = out["draws"]
        assert np.abs(draws.mean(axis=0)).max() < 0.1
        assert np.abs(draws.var(axis=0) - 1.0).max() < 0.15
        assert 0.6 < out["accept_rate"] <= 1.0

    def test_deterministic_given_seed(self):
        cfg = SamplerConfig(draws=200, warmup=100, chains=1)
        a = run_chain(std_normal(3), 3, cfg, chain_seed=7)
        b = run_chain(std_normal(3), 3, cfg, chain_seed=7)
        assert np.array_equal(a["draws"], b["draws"])
        assert a["step_size"] == b["step_size"]

    def test_different_seeds_differ(self):
        cfg = SamplerConfig(draws=50, warmup=50, chains=1)
        a = run_chain(std_normal(2), 2, cfg, chain_seed=1)
        b = run_chain(std_normal(2), 2, cfg, chain_seed=2)
        assert not np.array_equal(a["draws"], b["draws"])

    def test_persistent_divergence_raises(self):
        def nasty(x):
            # Pathological target: no proposal ever has finite energy.
            return float("nan"), np.full_like(x, np.nan)

        cfg = SamplerConfig(draws=50, warmup=50, chains=1, step_size=1.0)
        with pytest.raises(DiagnosticError):
            run_chain(nasty, 2, cfg, chain_seed=0)


class TestRhat:
    def test_textbook_example(self):
        # Two chains [1,2,3,4] and shifted copy: within = 5/3 * ... known value.
        chains = np.array([[1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0]])
        assert rhat(chains) == pytest.approx(math.sqrt(3.0 / 4.0), abs=1e-12)

    def test_shifted_chain_inflates(self):
        rng = np.random.default_rng(0)
        base = rng.normal(size=(1, 500))
        same = np.vstack([base, rng.normal(size=(1, 500))])
        shifted = np.vstack([base, rng.normal(size=(1, 500)) + 5.0])
        assert rhat(same) < 1.02
        assert rhat(shifted) > 2.0

    def test_constant_chains_convention(self):
        chains = np.full((3, 10), 2.5)
        assert rhat(chains) == 1.0

    def test_white_noise_near_one(self):
        rng = np.random.default_rng(3)
        assert abs(rhat(rng.normal(size=(4, 2000))) - 1.0) < 0.01

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            rhat(np.zeros((1, 100)))


class TestAutocorrelationAndESS:
    def test_iid_noise_small_acf(self):
        rng = np.random.default_rng(4)
        acf = autocorrelation(rng.normal(size=5000), 50)
        assert acf[0] == pytest.approx(1.0)
        assert np.abs(acf[1:]).max() < 0.06

    def test_ar1_matches_phi_powers(self):
        rng = np.random.default_rng(5)
        phi = 0.9
        n = 200_000
        x = np.empty(n)
        x[0] = rng.normal()
        eps = rng.normal(size=n)
        for t in range(1, n):
            x[t] = phi * x[t - 1] + eps[t]
        acf = autocorrelation(x, 10)
        for lag in range(1, 6):
            assert acf[lag] == pytest.approx(phi**lag, abs=0.02)

    def test_iid_ess_close_to_n(self):
        rng = np.random.default_rng(6)
        n = 5000
        assert ess(rng.normal(size=n)) > 0.8 * n

    def test_correlated_series_low_ess(self):
        rng = np.random.default_rng(7)
        phi = 0.95
        n = 20_000
        x = np.empty(n)
        x[0] = 0.0
        for t in range(1, n):
            x[t] = phi * x[t - 1] + rng.normal()
        # AR(1) integrated autocorrelation time is (1+phi)/(1-phi) = 39.
        assert ess(x) < n / 15

    def test_constant_series_convention(self):
        acf = autocorrelation(np.full(100, 3.0), 10)
        assert acf[0] == 1.0 and np.all(acf[1:] == 0.0)
        assert ess(np.full(100, 3.0)) == pytest.approx(100.0)


@pytest.fixture(scope="module")
def small_samples(tiny_problem_module):
    problem = tiny_problem_module
    ds = Dataset(
        "tiny",
        [
            make_record(("a", "b"), "b", rt=2.0),
            make_record(("b", "c"), "c", rt=1.5),
            make_record(("a", "c"), "c", rt=2.5),
        ],
    )
    config = PiecewiseConfig.shared(problem, 2)
    kern = PosteriorKernel(
        ds, problem, config, VariantSpec(channels=PC_RT_ATT, family=EXPONENTIAL)
    )
    cfg = SamplerConfig(draws=400, warmup=200, chains=2, seed=42)
    return run_sampler(kern, cfg)


class TestRunSampler:
    def test_shapes_and_simplex(self, small_samples):
        s = small_samples
        assert s.u.shape == (2, 400, 4)
        assert s.c.shape == (2, 400, 2)
        assert s.Sigma.shape == (2, 400, 2, 2)
        assert np.all(s.u > 0)
        assert s.u.sum(axis=2) == pytest.approx(np.ones((2, 400)), abs=1e-10)
        for ch in range(2):
            for it in (0, 199, 399):
                assert np.all(np.linalg.eigvalsh(s.Sigma[ch, it]) > 0)

    def test_deterministic_end_to_end(self, small_samples, tiny_problem_module):
        ds = Dataset(
            "tiny",
            [
                make_record(("a", "b"), "b", rt=2.0),
                make_record(("b", "c"), "c", rt=1.5),
                make_record(("a", "c"), "c", rt=2.5),
            ],
        )
        config = PiecewiseConfig.shared(tiny_problem_module, 2)
        kern = PosteriorKernel(
            ds,
            tiny_problem_module,
            config,
            VariantSpec(channels=PC_RT_ATT, family=EXPONENTIAL),
        )
        again = run_sampler(kern, SamplerConfig(draws=400, warmup=200, chains=2, seed=42))
        assert np.array_equal(again.u, small_samples.u)
        assert np.array_equal(again.c, small_samples.c)

    def test_progress_callback(self, tiny_problem_module):
        ds = Dataset("tiny", [make_record(("a", "b"), "b")])
        config = PiecewiseConfig.shared(tiny_problem_module, 2)
        from prefbayes.likelihood import PC_ONLY

        kern = PosteriorKernel(ds, tiny_problem_module, config, VariantSpec(channels=PC_ONLY))
        seen = []
        run_sampler(
            kern,
            SamplerConfig(draws=50, warmup=50, chains=3, seed=1),
            progress_callback=seen.append,
        )
        assert seen == [1, 2, 3]

    def test_diagnostics_keys(self, small_samples):
        d = diagnostics(small_samples)
        assert len(d["rhat_u"]) == 4
        assert len(d["ess_u"]) == 4
        assert len(d["rhat_c"]) == 2
        assert len(d["accept_rate"]) == 2
        assert all(len(row) == 2 for row in d["acf50_u"])


class TestDrawsCSV:
    def test_roundtrip(self, small_samples, tmp_path):
        path = tmp_path / "posterior.csv"
        save_draws_csv(small_samples, str(path))
        back = load_draws_csv(str(path))
        assert np.array_equal(back.u, small_samples.u)
        assert np.array_equal(back.c, small_samples.c)
        assert np.array_equal(back.mu, small_samples.mu)
        assert np.array_equal(back.Sigma, small_samples.Sigma)

    def test_header_layout(self, small_samples, tmp_path):
        path = tmp_path / "posterior.csv"
        save_draws_csv(small_samples, str(path))
        header = path.read_text().splitlines()[0].split(",")
        assert header[:2] == ["chain", "iter"]
        assert "u_1" in header and "u_4" in header
        assert "Sigma_1_2" in header and "Sigma_2_1" not in header
