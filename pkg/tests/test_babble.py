"""Tests for the babble NHMM and its CCCP state update."""

import numpy as np
import pytest
from scipy.special import digamma

from babblenhmm.babble import (
    BabbleNhmm,
    CccpStats,
    babble_state_loglik,
    cccp_step,
    cccp_surrogate,
    concave_gradient,
    estimate_gain_scale,
    init_states,
    neg_expected_loglik,
    nmf_project,
    train_babble,
    update_beta,
)
from babblenhmm.errors import InputError
from babblenhmm.gamma_hmm import SpeechHmm, gain_marginal_loglik, state_loglik


def babble_power(
    speech: SpeechHmm, state_value: np.ndarray, n_frames: int, seed: int, gain_scale: float = 1.0 / 15.0
) -> np.ndarray:
    """Exponential babble frames from a single fixed state vector."""
    rng = np.random.default_rng(seed)
    gains = rng.gamma(15.0, gain_scale, size=n_frames)
    return rng.gamma(1.0, (speech.basis @ state_value)[:, np.newaxis] * gains[np.newaxis, :])


class TestBabbleNhmm:
    """Tests for model invariants."""

    def test_scales(self, tiny_babble_model: BabbleNhmm) -> None:
        """Test per-state scales are basis times state vectors."""
        expected = tiny_babble_model.speech.basis @ tiny_babble_model.state_values.T
        assert np.allclose(tiny_babble_model.scales, expected)
        assert tiny_babble_model.n_states == 2
        assert tiny_babble_model.n_bins == 3

    def test_rejects_negative_weights(self, tiny_speech_model: SpeechHmm) -> None:
        """Test that state vectors must be nonnegative."""
        with pytest.raises(ValueError):
            BabbleNhmm(
                trans=np.eye(1),
                state_values=np.array([[1.0, -0.1]]),
                shape=np.ones(3),
                gain_shape=1.0,
                speech=tiny_speech_model,
            )

    def test_rejects_wrong_length(self, tiny_speech_model: SpeechHmm) -> None:
        """Test that state vectors must have one weight per speech state."""
        with pytest.raises(ValueError):
            BabbleNhmm(
                trans=np.eye(1),
                state_values=np.array([[1.0, 0.5, 0.5]]),
                shape=np.ones(3),
                gain_shape=1.0,
                speech=tiny_speech_model,
            )

    def test_rejects_zero_state(self, tiny_speech_model: SpeechHmm) -> None:
        """Test that an all-zero state vector is rejected."""
        with pytest.raises(ValueError):
            BabbleNhmm(
                trans=np.eye(1),
                state_values=np.zeros((1, 2)),
                shape=np.ones(3),
                gain_shape=1.0,
                speech=tiny_speech_model,
            )

    def test_state_loglik_uses_composed_scales(self, tiny_babble_model: BabbleNhmm) -> None:
        """Test the emission is the gain-marginal density under the composed scales."""
        obs = np.array([0.4, 1.1, 2.5])
        m = tiny_babble_model
        expected = gain_marginal_loglik(obs, m.scales, m.shape, m.gain_shape, 0.7)[0]
        assert np.allclose(babble_state_loglik(m, 0.7, obs), expected)

    @pytest.mark.parametrize("gain_scale", [0.05, 0.7, 3.0])
    def test_indicator_states_reduce_to_speech(self, small_speech_model: SpeechHmm, gain_scale: float) -> None:
        """Test that one-hot state vectors with the speech shapes give the speech emissions."""
        speech = small_speech_model
        babble = BabbleNhmm(
            trans=speech.trans,
            state_values=np.eye(speech.n_states),
            shape=speech.shape,
            gain_shape=speech.gain_shape,
            speech=speech,
        )
        obs = np.random.default_rng(5).gamma(1.0, 1.0, size=speech.n_bins)
        assert np.allclose(babble_state_loglik(babble, gain_scale, obs), state_loglik(speech, gain_scale, obs))


class TestCccp:
    """Tests for the CCCP subproblem."""

    @pytest.fixture
    def problem(self) -> tuple[np.ndarray, np.ndarray, CccpStats, np.ndarray]:
        """Random 6-bin, 3-state instance with a known minimiser."""
        rng = np.random.default_rng(3)
        basis = rng.uniform(0.2, 2.0, size=(6, 3))
        shape = rng.uniform(0.5, 2.0, size=6)
        optimum = np.array([0.8, 0.0, 1.5])
        occupancy = 40.0
        stats = CccpStats(weighted_obs=occupancy * shape * (basis @ optimum), occupancy=occupancy)
        return basis, shape, stats, optimum

    def test_gradient_matches_finite_difference(self, problem) -> None:  # type: ignore[no-untyped-def]
        """Test the surrogate gradient numerically."""
        basis, shape, stats, _ = problem
        x = np.array([1.0, 0.5, 0.7])
        linear = concave_gradient(np.array([0.9, 0.4, 1.1]), stats, basis, shape)
        _, gradient, _ = cccp_surrogate(x, linear, stats, basis)
        h = 1e-6
        numeric = np.array(
            [
                (cccp_surrogate(x + h * e, linear, stats, basis)[0] - cccp_surrogate(x - h * e, linear, stats, basis)[0]) / (2 * h)
                for e in np.eye(3)
            ]
        )
        assert np.allclose(gradient, numeric, rtol=1e-5)

    def test_hessian_matches_finite_difference(self, problem) -> None:  # type: ignore[no-untyped-def]
        """Test the surrogate Hessian numerically."""
        basis, shape, stats, _ = problem
        x = np.array([1.0, 0.5, 0.7])
        linear = concave_gradient(x, stats, basis, shape)
        _, _, hessian = cccp_surrogate(x, linear, stats, basis)
        h = 1e-5
        numeric = np.column_stack(
            [
                (cccp_surrogate(x + h * e, linear, stats, basis)[1] - cccp_surrogate(x - h * e, linear, stats, basis)[1]) / (2 * h)
                for e in np.eye(3)
            ]
        )
        assert np.allclose(hessian, numeric, rtol=1e-4)

    def test_concave_gradient_matches_finite_difference(self, problem) -> None:  # type: ignore[no-untyped-def]
        """Test the linearisation of the log term."""
        basis, shape, stats, _ = problem
        x = np.array([0.6, 1.2, 0.3])

        def concave(v: np.ndarray) -> float:
            return stats.occupancy * float(np.sum(shape * np.log(basis @ v)))

        h = 1e-6
        numeric = np.array([(concave(x + h * e) - concave(x - h * e)) / (2 * h) for e in np.eye(3)])
        assert np.allclose(concave_gradient(x, stats, basis, shape), numeric, rtol=1e-5)

    def test_objective_non_increasing(self, problem) -> None:  # type: ignore[no-untyped-def]
        """Test every CCCP round lowers -Q or keeps it."""
        basis, shape, stats, _ = problem
        x = np.array([1.0, 1.0, 1.0])
        previous = neg_expected_loglik(x, stats, basis, shape)
        for _ in range(15):
            x = cccp_step(x, stats, basis, shape).state_value
            current = neg_expected_loglik(x, stats, basis, shape)
            assert current <= previous + 1e-9 * abs(previous)
            previous = current

    def test_converges_to_known_minimiser(self, problem) -> None:  # type: ignore[no-untyped-def]
        """Test repeated rounds reach the constructed optimum, including the zero at the bound."""
        basis, shape, stats, optimum = problem
        x = np.array([1.0, 1.0, 1.0])
        for _ in range(60):
            x = cccp_step(x, stats, basis, shape).state_value
        assert np.all(x >= 0)
        assert np.allclose(x, optimum, atol=1e-4)

    @pytest.mark.parametrize("seed", range(10))
    def test_reaches_stationary_point(self, seed: int) -> None:
        """Test the KKT conditions of -Q on random instances after many rounds."""
        rng = np.random.default_rng(seed)
        basis = rng.uniform(0.2, 2.0, size=(5, 3))
        shape = rng.uniform(0.5, 2.0, size=5)
        stats = CccpStats(weighted_obs=rng.uniform(1.0, 10.0, size=5), occupancy=5.0)
        x = np.ones(3)
        for _ in range(150):
            x = cccp_step(x, stats, basis, shape).state_value

        bx = basis @ x
        gradient = -basis.T @ (stats.weighted_obs / bx**2) + stats.occupancy * (basis.T @ (shape / bx))
        scale = float(np.max(np.abs(stats.occupancy * (basis.T @ (shape / bx)))))
        assert np.all(x >= 0)
        assert np.all(np.abs(gradient[x > 1e-8]) <= 1e-6 * scale)
        assert np.all(gradient[x <= 1e-8] >= -1e-6 * scale)

    def test_empty_state_unchanged(self, problem) -> None:  # type: ignore[no-untyped-def]
        """Test that a state without occupancy is returned as is."""
        basis, shape, _, _ = problem
        x = np.array([0.2, 0.3, 0.4])
        result = cccp_step(x, CccpStats(weighted_obs=np.zeros(6), occupancy=0.0), basis, shape)
        assert np.array_equal(result.state_value, x)
        assert result.newton_iters == 0

    def test_negative_start_rejected(self, problem) -> None:  # type: ignore[no-untyped-def]
        """Test that an infeasible start raises."""
        basis, shape, stats, _ = problem
        with pytest.raises(InputError):
            cccp_step(np.array([-1.0, 0.5, 0.5]), stats, basis, shape)


class TestShapeUpdate:
    """Tests for the per-bin shape update."""

    def test_inverts_digamma(self) -> None:
        """Test digamma(beta) = c."""
        beta = np.array([0.5, 1.0, 4.0])
        assert np.allclose(update_beta(digamma(beta)), beta, rtol=1e-9)


class TestInitStates:
    """Tests for state initialisation from speaker streams."""

    def test_sorted_and_nonnegative(self, rng: np.random.Generator) -> None:
        """Test ordering by decreasing total weight."""
        streams = [rng.uniform(0.0, 1.0, size=(3, 100)) for _ in range(2)]
        states = init_states(streams, 4, seed=0)
        assert states.shape == (4, 3)
        assert np.all(states >= 0)
        assert np.all(np.diff(states.sum(axis=1)) <= 0)

    def test_streams_are_summed(self) -> None:
        """Test that a single cluster is the mean of the summed streams."""
        a = np.ones((2, 10))
        b = 2.0 * np.ones((2, 12))
        assert np.allclose(init_states([a, b], 1, seed=0), [[3.0, 3.0]])

    def test_empty(self) -> None:
        """Test that at least one stream is needed."""
        with pytest.raises(InputError):
            init_states([], 2, seed=0)

    def test_one_state_per_frame(self, rng: np.random.Generator) -> None:
        """Test that as many states as frames reproduce the frames."""
        stream = rng.uniform(0.1, 1.0, size=(3, 5))
        states = init_states([stream], 5, seed=0)
        assert states.shape == (5, 3)
        assert np.allclose(np.sort(states.sum(axis=1)), np.sort(stream.sum(axis=0)))
        assert np.all(np.diff(states.sum(axis=1)) <= 0)

    def test_duplicate_frames(self) -> None:
        """Test repeated coefficient frames with just enough distinct values."""
        stream = np.tile(np.array([[1.0, 0.2], [0.0, 0.5]]), (1, 20))
        states = init_states([stream], 2, seed=0)
        assert np.allclose(states, [[1.0, 0.0], [0.2, 0.5]])

    def test_too_few_distinct_frames(self) -> None:
        """Test that identical frames cannot seed several states."""
        with pytest.raises(InputError, match="distinct"):
            init_states([np.ones((3, 30))], 2, seed=0)


class TestTraining:
    """Tests for babble EM training."""

    def test_loglik_non_decreasing(self, small_speech_model: SpeechHmm, small_babble_model: BabbleNhmm) -> None:
        """Test EM with CCCP does not lower the likelihood."""
        corpus = [babble_power(small_speech_model, small_babble_model.state_values[s], 200, seed=s) for s in range(2)]
        result = train_babble(corpus, small_speech_model, n_states=2, n_iters=6, seed=0, threads=1)
        trace = np.array(result.loglik_trace)
        assert np.all(np.diff(trace) >= -1e-6 * np.abs(trace[1:]))
        assert len(result.cccp_iterations) == 6

    def test_scale_normalised(self, small_speech_model: SpeechHmm) -> None:
        """Test mean l1 norm of the state vectors is one."""
        corpus = [babble_power(small_speech_model, np.array([0.3, 0.3, 0.4]), 300, seed=1)]
        result = train_babble(corpus, small_speech_model, n_states=2, n_iters=3, seed=0, threads=1)
        assert float(np.mean(result.model.state_values.sum(axis=1))) == pytest.approx(1.0)

    @pytest.mark.parametrize("speech_state", [0, 1, 2])
    def test_single_speaker_concentrates_on_its_state(self, small_speech_model: SpeechHmm, speech_state: int) -> None:
        """Test babble made of one speech state is explained by that state."""
        truth = np.eye(3)[speech_state]
        corpus = [babble_power(small_speech_model, truth, 1500, seed=7)]
        result = train_babble(corpus, small_speech_model, n_states=1, n_iters=8, seed=0, threads=1)
        weights = result.model.state_values[0]
        assert weights[speech_state] / weights.sum() > 0.5

    def test_stationary_profile_recovered(self, small_speech_model: SpeechHmm) -> None:
        """Test a single babble state reproduces the generating weight profile."""
        truth = np.array([0.5, 0.3, 0.2])
        corpus = [babble_power(small_speech_model, truth, 2000, seed=5)]
        result = train_babble(corpus, small_speech_model, n_states=1, n_iters=12, seed=0, threads=1)
        found = result.model.state_values[0] / result.model.state_values[0].sum()
        assert np.max(np.abs(found - truth)) < 0.08

    def test_bin_mismatch(self, small_speech_model: SpeechHmm) -> None:
        """Test that the corpus must match the speech basis."""
        with pytest.raises(InputError):
            train_babble([np.ones((5, 50))], small_speech_model, n_states=1, n_iters=1, seed=0)


class TestProjection:
    """Tests for the babble NMF view."""

    def test_factorisation(self, small_babble_model: BabbleNhmm) -> None:
        """Test coefficients are nonnegative and the approximation factorises."""
        power = babble_power(small_babble_model.speech, np.array([0.4, 0.4, 0.2]), 100, seed=2)
        gain = estimate_gain_scale(small_babble_model, power)
        projection = nmf_project(small_babble_model, gain, power)
        assert projection.coefficients.shape == (3, 100)
        assert np.all(projection.coefficients >= 0)
        assert np.allclose(projection.approximation, projection.basis @ projection.coefficients)
