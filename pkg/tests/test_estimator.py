import numpy as np
import pytest
from pytest import approx
from scipy import integrate, stats

from fracbridge.bridge import ModelParams, build_bridge, grid_moments
from fracbridge.estimator import (
    DegeneratePathError,
    EvalLadder,
    alpha_hat_direct,
    alpha_hat_identity,
    estimate_ladder,
    lse_from_samples,
    renormalized_denominator,
    renormalized_errors,
    terminal_functional,
)
from fracbridge.fbm import (
    GaussianPath,
    HurstParam,
    TimeGrid,
    sample_davies_harte,
    sample_hosking,
    stream,
)
from fracbridge.limits import Regime, renormalizer
from fracbridge.specialfn import DomainError


def bridge(params, grid, seed, index=0):
    tag, rng = stream(seed, index)
    path = sample_davies_harte(params.hurst, grid, rng, tag)
    return build_bridge(path, params)


class TestLadderClass:
    def test_geometric(self):
        """Geometric ladders use offsets T 10^-k..."""
        ladder = EvalLadder.geometric(2.0, levels=3)
        assert ladder.epsilons == approx((0.2, 0.02, 0.002))
        assert ladder.times == approx([1.8, 1.98, 1.998])
        assert len(ladder) == 3

    def test_invalid(self):
        """Ladders must be non-empty, decreasing and inside (0, T)..."""
        with pytest.raises(DomainError):
            EvalLadder(1.0, ())
        with pytest.raises(DomainError):
            EvalLadder(1.0, (0.1, 0.1))
        with pytest.raises(DomainError):
            EvalLadder(1.0, (0.01, 0.1))
        with pytest.raises(DomainError):
            EvalLadder(1.0, (1.0, 0.1))
        with pytest.raises(DomainError):
            EvalLadder(1.0, (0.1, 0.0))

    def test_snap(self):
        """Ladder times snap to the grid node at or below them..."""
        ladder = EvalLadder(1.0, (0.1, 0.013, 1e-3))
        grid = TimeGrid.for_horizon(1.0, 1000, 1e-3)
        indices = ladder.snap(grid)
        snapped = grid.times[indices]
        assert np.all(snapped <= ladder.times + 1e-12)
        assert np.all(ladder.times - snapped < grid.delta)
        assert indices[-1] == 1000

    def test_resolution(self):
        """Grid spacing must be below a tenth of the smallest offset..."""
        ladder = EvalLadder(1.0, (0.1, 1e-3))
        ladder.check_resolution(TimeGrid.for_horizon(1.0, 2**14, 1e-3))
        with pytest.raises(DomainError):
            ladder.check_resolution(TimeGrid.for_horizon(1.0, 2**9, 1e-3))


class TestFormulaClass:
    def test_ramp_quadrature(self):
        """Estimator of a ramp path matches adaptive quadrature..."""
        horizon, alpha, t_end = 1.0, 0.3, 0.5
        params = ModelParams(alpha, horizon, 0.7)

        def x(u):
            r = horizon - u
            return r**alpha * (horizon ** (1 - alpha) - r ** (1 - alpha)) / (1 - alpha)

        def dx(u):
            return -alpha * x(u) / (horizon - u) + 1

        numerator = integrate.quad(lambda u: x(u) / (horizon - u) * dx(u), 0, t_end)[0]
        denominator = integrate.quad(lambda u: x(u) ** 2 / (horizon - u) ** 2, 0, t_end)[0]
        expected = -numerator / denominator

        grid = TimeGrid(t_end, 2**16)
        path = GaussianPath(grid, grid.times.copy(), HurstParam(0.7))
        paths = build_bridge(path, params)
        assert alpha_hat_direct(paths, params, t_end) == approx(expected, abs=1e-4)
        assert alpha_hat_identity(paths, params, t_end) == approx(expected, abs=1e-4)

    def test_half_identity(self):
        """For α = 1/2 the identity formula reduces to 1/2 - ξ²/(2 denom)..."""
        params = ModelParams(0.5, 1.0, 0.7)
        grid = TimeGrid.for_horizon(1.0, 2**12, 1e-3)
        paths = bridge(params, grid, 1)
        t = grid.t_max
        expected = 0.5 - paths.xi[-1] ** 2 / (2 * paths.denom[-1])
        assert alpha_hat_identity(paths, params, t) == approx(expected, rel=1e-12)

    def test_quadratic_variation(self):
        """Brownian identity estimates carry the quadratic variation of ξ..."""
        params = ModelParams(1.0, 1.0, 0.5)
        grid = TimeGrid.for_horizon(1.0, 2**16, 1e-3)
        remaining = 1.0 - grid.t_max
        for index in range(5):
            paths = bridge(params, grid, 15, index)
            denom = paths.denom[-1]
            plain = paths.xi[-1] ** 2 * remaining / (2 * denom) + 0.5
            corrected = 1.0 - alpha_hat_identity(paths, params, grid.t_max)
            # The weighted quadratic variation of ξ tends to log(T/(T-t)).
            variation = 2 * denom * (plain - corrected)
            assert variation / np.log(1 / remaining) == approx(1, abs=0.1)

    @pytest.mark.parametrize(
        "alpha,hurst",
        [
            (0.1, 0.6), (0.3, 0.7), (0.45, 0.8), (0.5, 0.7), (0.8, 0.9), (0.25, 0.5),
            (1.0, 0.5),
        ],
        ids=["R1", "R2", "R3", "R4", "NC", "B9", "B11"],
    )
    def test_agreement(self, alpha, hurst):
        """Direct and identity formulas agree under refinement in every regime..."""
        params = ModelParams(alpha, 1.0, hurst)
        grid = TimeGrid.for_horizon(1.0, 2**16, 1e-3)
        t = grid.t_max
        gaps = {16: [], 4: [], 1: []}
        residuals = {16: [], 4: [], 1: []}
        for index in range(10):
            tag, rng = stream(2, index)
            path = sample_davies_harte(params.hurst, grid, rng, tag)
            for factor in gaps:
                paths = build_bridge(path.coarsen(factor), params)
                direct = alpha_hat_direct(paths, params, t)
                identity = alpha_hat_identity(paths, params, t)
                gaps[factor].append(abs(direct - identity))
                # α - α̂ = η/denom in continuous time.
                eta_form = paths.eta[-1] / paths.denom[-1]
                residuals[factor].append(abs(alpha - identity - eta_form))
        medians = [np.median(gaps[f]) for f in (16, 4, 1)]
        assert medians[0] > medians[1] > medians[2]
        assert medians[2] < 1e-2
        medians = [np.median(residuals[f]) for f in (16, 4, 1)]
        assert medians[0] > medians[1] > medians[2]
        assert medians[2] < 1e-2

    def test_scale_equivariance(self):
        """Scaling the driving path leaves the estimator unchanged..."""
        params = ModelParams(0.3, 1.0, 0.7)
        grid = TimeGrid.for_horizon(1.0, 2**12, 1e-3)
        tag, rng = stream(3, 0)
        path = sample_davies_harte(params.hurst, grid, rng, tag)
        paths = build_bridge(path, params)
        scaled = build_bridge(path.scaled(4.0), params)
        for t in [0.5, 0.9, grid.t_max]:
            assert alpha_hat_direct(scaled, params, t) == approx(
                alpha_hat_direct(paths, params, t), rel=1e-12
            )
            assert alpha_hat_identity(scaled, params, t) == approx(
                alpha_hat_identity(paths, params, t), rel=1e-12
            )

    def test_from_samples(self):
        """Estimates from raw samples match the bridge estimates exactly..."""
        params = ModelParams(0.3, 1.0, 0.7)
        grid = TimeGrid.for_horizon(1.0, 2**10, 1e-2)
        paths = bridge(params, grid, 4)
        for t in [0.3, 0.9]:
            index = grid.index_at(t)
            direct = lse_from_samples(paths.times, paths.x, 1.0, index)
            assert direct == alpha_hat_direct(paths, params, t)

    def test_degenerate(self):
        """Vanishing denominators are reported..."""
        params = ModelParams(0.3, 1.0, 0.7)
        grid = TimeGrid.for_horizon(1.0, 64, 1e-2)
        flat = build_bridge(GaussianPath(grid, np.zeros(65), HurstParam(0.7)), params)
        with pytest.raises(DegeneratePathError):
            alpha_hat_direct(flat, params, 0.5)
        with pytest.raises(DegeneratePathError):
            alpha_hat_identity(flat, params, 0.5)
        assert terminal_functional(flat, params) is None

        paths = bridge(params, grid, 5)
        with pytest.raises(DegeneratePathError):
            alpha_hat_direct(paths, params, 0.0)
        with pytest.raises(DomainError):
            alpha_hat_identity(paths, params, 0.995)

    def test_sampler_invariance(self):
        """Estimator law does not depend on the sampler..."""
        reps = 300
        params = ModelParams(0.3, 1.0, 0.7)
        grid = TimeGrid.for_horizon(1.0, 2**9, 1e-2)
        t = grid.t_max
        values = {sample_davies_harte: [], sample_hosking: []}
        for sampler, seed in [(sample_davies_harte, 6), (sample_hosking, 7)]:
            for i in range(reps):
                tag, rng = stream(seed, i)
                paths = build_bridge(sampler(params.hurst, grid, rng, tag), params)
                values[sampler].append(alpha_hat_identity(paths, params, t))
        distance = stats.ks_2samp(values[sample_davies_harte], values[sample_hosking])
        assert distance.statistic < 1.95 * np.sqrt(2 / reps)


class TestLadderEstimatesClass:
    def test_entries(self):
        """Ladder estimates hold both formulas and the renormalized error..."""
        params = ModelParams(0.3, 1.0, 0.7)
        ladder = EvalLadder(1.0, (0.1, 0.01, 0.001))
        grid = TimeGrid.for_horizon(1.0, 2**14, 1e-3)
        paths = bridge(params, grid, 8)
        result = estimate_ladder(paths, params, ladder)

        assert len(result.entries) == 3
        assert result.column("epsilon") == approx([0.1, 0.01, 0.001])
        xi_T = paths.xi[-1]
        assert result.xi_terminal == xi_T
        for entry, index in zip(result.entries, ladder.snap(grid)):
            assert entry.t == grid.times[index]
            assert entry.xi == paths.xi[index]
            assert entry.denom == paths.denom[index]
            assert entry.alpha_hat_direct == alpha_hat_direct(paths, params, entry.t)
            assert entry.alpha_hat_identity == alpha_hat_identity(paths, params, entry.t)
            assert entry.error == params.alpha - entry.alpha_hat_identity
            # The path-wise equivalent of (T-t)^(2α-1).
            expected = entry.error * entry.denom * 0.4 / xi_T**2
            assert entry.renormalized[Regime.R3_AS_RANDOM] == approx(expected)
        assert np.array_equal(
            result.renormalized("R3_as_random"),
            [e.renormalized[Regime.R3_AS_RANDOM] for e in result.entries],
        )
        expected = 0.4 * paths.eta[-1] / paths.xi[-1] ** 2
        assert result.terminal_functional == approx(expected)

    def test_without_renormalization(self):
        """Ladder estimates work without a regime, even for α = 0..."""
        params = ModelParams(0.0, 1.0, 0.7)
        ladder = EvalLadder(1.0, (0.1, 0.01))
        grid = TimeGrid.for_horizon(1.0, 2**10, 1e-2)
        result = estimate_ladder(bridge(params, grid, 9), params, ladder, renormalize=False)
        assert all(entry.renormalized == {} for entry in result.entries)
        with pytest.raises(DomainError):
            estimate_ladder(bridge(params, grid, 9), params, ladder)

    def test_not_consistent(self):
        """For α > 1/2 the stored value is the distance of α̂ from 1/2..."""
        params = ModelParams(0.8, 1.0, 0.9)
        ladder = EvalLadder(1.0, (0.1, 0.01))
        grid = TimeGrid.for_horizon(1.0, 2**11, 1e-2)
        result = estimate_ladder(bridge(params, grid, 10), params, ladder)
        for entry in result.entries:
            assert entry.renormalized[Regime.NC_HALF] == 0.5 - entry.alpha_hat_identity

    def test_explicit_regime(self):
        """Renormalized errors can be filled in for another regime..."""
        params = ModelParams(0.3, 1.0, 0.7)
        ladder = EvalLadder(1.0, (0.1, 0.01))
        grid = TimeGrid.for_horizon(1.0, 2**10, 1e-2)
        result = estimate_ladder(bridge(params, grid, 11), params, ladder)
        renormalized_errors(result, params, Regime.R1_CAUCHY)
        for entry in result.entries:
            assert set(entry.renormalized) == {Regime.R3_AS_RANDOM, Regime.R1_CAUCHY}
            factor = renormalizer(Regime.R1_CAUCHY, params, 1.0 - entry.t)
            assert entry.renormalized[Regime.R1_CAUCHY] == approx(factor * entry.error)

    def test_centering(self):
        """Cauchy regimes remove the location term fixed by the moments..."""
        params = ModelParams(0.1, 1.0, 0.7)
        ladder = EvalLadder(1.0, (0.1, 0.01))
        grid = TimeGrid.for_horizon(1.0, 2**10, 1e-2)
        paths = bridge(params, grid, 16)
        result = estimate_ladder(paths, params, ladder)
        for entry, index in zip(result.entries, ladder.snap(grid)):
            moments = grid_moments(params, grid, index)
            centred = entry.error - moments.bias(entry.xi, entry.denom)
            factor = renormalizer(Regime.R1_CAUCHY, params, 1.0 - entry.t)
            assert entry.renormalized[Regime.R1_CAUCHY] == approx(factor * centred)
        with pytest.raises(DomainError):
            renormalized_errors(result, params, moments=[moments])

    def test_almost_sure_half(self):
        """For α = 1/2 the renormalized error is the denominator over ξ_T²..."""
        params = ModelParams(0.5, 1.0, 0.7)
        ladder = EvalLadder(1.0, (0.1, 0.01))
        grid = TimeGrid.for_horizon(1.0, 2**10, 1e-2)
        result = estimate_ladder(bridge(params, grid, 17), params, ladder)
        for entry in result.entries:
            expected = entry.error * entry.denom / result.xi_terminal**2
            assert entry.renormalized[Regime.R4_AS_HALF] == approx(expected)
            # α - α̂ = ξ²/(2 denom) exactly for α = 1/2 and H > 1/2.
            assert expected == approx(entry.xi**2 / (2 * result.xi_terminal**2))

        result.xi_terminal = 0.0
        with pytest.raises(DegeneratePathError):
            renormalized_errors(result, params)


class TestDenominatorClass:
    def test_convergence(self):
        """Normalized denominators approach their almost sure limits..."""
        params = ModelParams(0.3, 1.0, 0.7)
        grid = TimeGrid.for_horizon(1.0, 2**16, 1e-4)
        far, near = [], []
        for index in range(10):
            paths = bridge(params, grid, 12, index)
            for t, errors in [(0.9, far), (1 - 1e-3, near)]:
                value, target = renormalized_denominator(paths, params, t)
                errors.append(abs(value / target - 1))
        assert np.median(near) < np.median(far)

    def test_cases(self):
        """Normalized denominators depend on the position of α..."""
        grid = TimeGrid.for_horizon(1.0, 2**10, 1e-2)
        half = ModelParams(0.5, 1.0, 0.7)
        paths = bridge(half, grid, 13)
        value, target = renormalized_denominator(paths, half, 0.9)
        index = grid.index_at(0.9)
        remaining = 1.0 - grid.times[index]
        assert value == approx(paths.denom[index] / abs(np.log(remaining)))
        assert target == paths.xi[-1] ** 2

        above = ModelParams(0.6, 1.0, 0.7)
        paths = bridge(above, grid, 14)
        value, target = renormalized_denominator(paths, above, 0.9)
        assert target == paths.denom[-1]

        with pytest.raises(DomainError):
            renormalized_denominator(paths, ModelParams(0.7, 1.0, 0.7), 0.9)
