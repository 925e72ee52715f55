import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uaboost.core import (
    EnsembleMode,
    InvalidScore,
    MissingModality,
    ProbabilisticPrediction,
    ShapeMismatch,
    fuse_mean,
)
from uaboost.ensemble import boost_fit, derive_weights, predict, rank_modalities
from uaboost.experiment import ExperimentConfig, run_benchmark
from uaboost.forest import ForestConfig, RandomForest
from uaboost.mlp import GaussianMLP, MlpConfig


class Stub:
    """Predicts a fixed mean and sigma per row; remembers its training weights."""

    def __init__(self, mean, sigma):
        self.mean, self.sigma = mean, sigma
        self.weights = None

    def fit(self, x, y, sample_weight=None):
        self.weights = np.array(sample_weight)
        return self

    def predict(self, x):
        n = np.asarray(x).shape[0]
        return ProbabilisticPrediction(np.full(n, self.mean), np.full(n, self.sigma))


class Failing:
    def fit(self, x, y, sample_weight=None):
        raise FloatingPointError("boom")


def test_rank_examples():
    assert rank_modalities({"Acoustic": 6.66, "Disfluency": 5.71, "Interventions": 6.41}) == [
        "Disfluency", "Interventions", "Acoustic"]
    assert rank_modalities({"Frequency": 3.32, "Amplitude": 3.21}) == ["Amplitude", "Frequency"]
    assert rank_modalities({"b": 1.0, "a": 1.0}) == ["a", "b"]
    with pytest.raises(InvalidScore):
        rank_modalities({"a": float("nan")})
    with pytest.raises(InvalidScore):
        rank_modalities({})


def test_derive_weights_examples():
    y = np.array([1.0, 2.0])
    p = ProbabilisticPrediction([0.0, 0.0], [1.0, 3.0])
    np.testing.assert_allclose(derive_weights(EnsembleMode.UA, p, y), [0.5, 1.5])
    np.testing.assert_allclose(derive_weights("ua-weighted", p, y), [0.5, 1.5])
    np.testing.assert_allclose(derive_weights(EnsembleMode.VANILLA, p, y), [0.4, 1.6])
    exact = ProbabilisticPrediction(y, [1.0, 1.0])
    np.testing.assert_array_equal(derive_weights("vanilla", exact, y), [1.0, 1.0])
    with pytest.raises(ShapeMismatch):
        derive_weights("ua", p, [1.0])


def test_stage_weights_come_from_previous_stage_only():
    x = np.zeros((4, 1))
    y = np.array([0.0, 1.0, 2.0, 3.0])
    stubs = {"a": Stub(1.0, 2.0), "b": Stub(0.0, 1.0), "c": Stub(0.0, 1.0)}
    chain, trace = boost_fit("vanilla", {m: x for m in stubs}, y, stubs.__getitem__, ["a", "b", "c"])
    np.testing.assert_array_equal(stubs["a"].weights, np.ones(4))
    # residuals of stage a are y - 1, squared [1, 0, 1, 4]; the zero sits on the floor
    expected = np.maximum(np.array([1.0, 0.0, 1.0, 4.0]) * (4 - 1e-6) / 6, 1e-6)
    np.testing.assert_allclose(stubs["b"].weights, expected, rtol=1e-12)
    np.testing.assert_allclose(stubs["c"].weights, np.maximum(y ** 2 * (4 - 1e-6) / 14, 1e-6), rtol=1e-12)
    assert chain.order == ["a", "b", "c"]
    assert trace.n_derivations == 2
    assert trace.stages[-1].next_raw_weights is None


def test_ua_weighted_fusion_example():
    x = np.zeros((1, 1))
    stubs = {"a": Stub(2.0, 1.0), "b": Stub(4.0, 2.0)}
    chain, _ = boost_fit("ua-weighted", {"a": x, "b": x}, [3.0], stubs.__getitem__, ["a", "b"])
    fused, per = predict(chain, {"a": x, "b": x})
    assert fused[0] == pytest.approx(8 / 3, abs=1e-12)
    assert set(per) == {"a", "b"}
    fused_ua, _ = predict(chain.with_mode("ua"), {"a": x, "b": x})
    assert fused_ua[0] == 3.0


def test_equal_sigmas_make_weighted_fusion_the_mean():
    x = np.zeros((3, 1))
    stubs = {"a": Stub(1.0, 0.7), "b": Stub(5.0, 0.7), "c": Stub(-2.0, 0.7)}
    chain, _ = boost_fit("ua-weighted", {m: x for m in stubs}, np.zeros(3), stubs.__getitem__, ["a", "b", "c"])
    fw, per = predict(chain, {m: x for m in stubs})
    np.testing.assert_allclose(fw, fuse_mean(list(per.values())), atol=1e-12)


def test_errors_carry_stage_and_modality():
    x = np.zeros((3, 1))
    factory = {"a": lambda: Stub(0.0, 1.0), "b": Failing}
    with pytest.raises(FloatingPointError) as info:
        boost_fit("ua", {"a": x, "b": x}, np.zeros(3), lambda m: factory[m](), ["a", "b"])
    assert info.value.stage == 1 and info.value.modality_id == "b"
    with pytest.raises(MissingModality):
        boost_fit("ua", {"a": x}, np.zeros(3), lambda m: Stub(0, 1), ["a", "b"])
    with pytest.raises(ShapeMismatch):
        boost_fit("ua", {"a": x}, np.zeros(4), lambda m: Stub(0, 1), ["a"])
    chain, _ = boost_fit("ua", {"a": x}, np.zeros(3), lambda m: Stub(0, 1), ["a"])
    with pytest.raises(MissingModality):
        predict(chain, {"b": x})


def two_modalities(seed, n=150):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, 2))
    y = z[:, 0] + 0.5 * z[:, 1] + 0.3 * rng.normal(size=n) * (1 + np.abs(z[:, 0]))
    data = {"p": z + 0.1 * rng.normal(size=(n, 2)), "q": np.c_[z[:, 1], z[:, 0] ** 2]}
    return data, y


def mlp_factory(m):
    return GaussianMLP(MlpConfig(hidden_layer_sizes=(8,), max_epochs=15, seed=7))


def test_single_modality_chain_equals_standalone_learner():
    data, y = two_modalities(0)
    chain, trace = boost_fit("ua", {"p": data["p"]}, y, mlp_factory, ["p"])
    alone = mlp_factory("p").fit(data["p"], y)
    fused, _ = predict(chain, data)
    np.testing.assert_array_equal(fused, alone.predict(data["p"]).means)
    assert trace.n_derivations == 0


def test_first_stage_shared_across_modes():
    data, y = two_modalities(1)
    chains = {m: boost_fit(m, data, y, mlp_factory, ["p", "q"]) for m in EnsembleMode}
    thetas = [c.stages[0][1].theta_ for c, _ in chains.values()]
    for t in thetas[1:]:
        np.testing.assert_array_equal(t, thetas[0])
    ua, uaw = chains[EnsembleMode.UA][0], chains[EnsembleMode.UA_WEIGHTED][0]
    np.testing.assert_array_equal(ua.stages[1][1].theta_, uaw.stages[1][1].theta_)
    van = chains[EnsembleMode.VANILLA][0]
    assert not np.array_equal(van.stages[1][1].theta_, ua.stages[1][1].theta_)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.sampled_from(list(EnsembleMode)))
def test_trace_weights_have_unit_mean(seed, mode):
    data, y = two_modalities(seed, n=60)
    factory = lambda m: RandomForest(ForestConfig(n_trees=10, seed=seed))  # noqa: E731
    _, trace = boost_fit(mode, data, y, factory, ["q", "p"])
    assert trace.n_derivations == 1
    for rec in trace.stages:
        assert abs(rec.weights.mean() - 1) < 1e-9
        assert rec.weights.min() >= 1e-6


def test_first_stage_reuse():
    data, y = two_modalities(2)
    first = mlp_factory("p").fit(data["p"], y)
    chain, _ = boost_fit("ua", data, y, mlp_factory, ["p", "q"], first_stage=first)
    ref, _ = boost_fit("ua", data, y, mlp_factory, ["p", "q"])
    assert chain.stages[0][1] is first
    np.testing.assert_array_equal(chain.stages[1][1].theta_, ref.stages[1][1].theta_)


def test_uncertainty_weighting_keeps_entropy_below_residual_weighting():
    cfg = ExperimentConfig(dataset="synthetic", learner="mlp", mode="all", repeats=1, folds=None,
                           n_samples=800, seed=0)
    m = run_benchmark(cfg).metrics()
    h = {mode: [m[f"entropy/{mode}/stage{j}"].mean for j in (1, 2, 3)] for mode in ("vanilla", "ua")}
    assert h["ua"][0] == h["vanilla"][0]
    assert h["ua"][1] < h["vanilla"][1]
    assert np.mean(h["ua"][1:]) < np.mean(h["vanilla"][1:])
