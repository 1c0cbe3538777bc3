import json

import numpy as np
import pytest

from nbeats_forecasting import diagnostics
from nbeats_forecasting.modules.nbeats import BlockWeights, ModelConfig, block_trunk, build_model, model_forward
from nbeats_forecasting.modules.utils import DenseLayer


def _shared_model(seed: int, block_count: int = 5, act: str = "relu", width: int = 32):
    cfg = ModelConfig(horizon=4, lookback=2, block_count=block_count, layers=3, width=width, share_weights=True,
                      activation=act)
    return build_model(cfg, seed)


def _without_biases(model):
    return model.with_parameters({
        name: np.zeros_like(value) if name.endswith(".bias") else value
        for name, value in model.parameters().items()
    })


def _block(weight: np.ndarray, horizon: int = 1) -> BlockWeights:
    width, t = weight.shape
    return BlockWeights(
        fc_layers=(DenseLayer(weight, np.zeros(width)),),
        backcast_head=np.ones((t, width)),
        forecast_head=np.ones((horizon, width))
    )


def test_shifts_follow_the_backcasts(small_model, rng):
    x = rng.uniform(size=small_model.input_size)
    trace = model_forward(small_model, x)
    shifts = diagnostics.extract_shifts(trace)
    assert shifts.block_count == small_model.block_count
    assert np.allclose(shifts.shifts[1], trace.backcasts[0], rtol=1e-12, atol=1e-14)
    assert shifts.recursion_error(trace.backcasts) < 1e-12
    with pytest.raises(ValueError):
        shifts.recursion_error(trace.backcasts[:-1])


def test_jacobian_of_linear_trunk():
    model = _shared_model(0, act="identity", width=16)
    block = model.block(0)
    f, _ = diagnostics.trunk_affine(block)
    estimate = diagnostics.jacobian_f(block, np.linspace(-1, 1, model.input_size))
    assert estimate.jitters == 0 and estimate.scheme == "central"
    assert np.allclose(estimate.matrix, f, rtol=1e-6, atol=1e-8)


def test_jacobian_of_dead_and_identity_units():
    dead = diagnostics.jacobian_f(_block(-np.ones((3, 2))), np.array([1.0, 2.0]))
    assert np.array_equal(dead.matrix, np.zeros((3, 2)))
    alive = diagnostics.jacobian_f(_block(np.eye(2)), np.array([1.0, 2.0]))
    assert np.allclose(alive.matrix, np.eye(2), atol=1e-9)


def test_jacobian_matches_finite_differences_of_relu_trunk(rng):
    block = _shared_model(3).block(0)
    x0 = rng.uniform(0.5, 1.5, size=block.input_size)
    estimate = diagnostics.jacobian_f(block, x0)
    direction = rng.normal(size=block.input_size)
    step = 1e-7
    plus = block_trunk(block, estimate.point + step * direction)
    minus = block_trunk(block, estimate.point - step * direction)
    assert np.allclose(estimate.matrix @ direction, (plus - minus) / (2 * step), rtol=1e-5, atol=1e-7)


def test_jacobian_moves_off_kinks():
    block = _block(np.array([[1.0, -1.0]]))
    estimate = diagnostics.jacobian_f(block, np.array([1.0, 1.0]))
    assert estimate.jitters >= 1
    assert not np.array_equal(estimate.point, np.array([1.0, 1.0]))
    # pre-activations stay within the kink threshold whatever the jitter
    flat = _block(np.array([[1e-6, -1e-6]]))
    with pytest.raises(RuntimeError):
        diagnostics.jacobian_f(flat, np.array([1.0, 1.0]))


def test_linearization_is_exact_without_backcast(rng):
    model = _shared_model(1)
    x = rng.uniform(0.5, 1.5, size=model.input_size)
    result = diagnostics.linearized_forecast(model, x, eps_scale=0.0)
    assert np.array_equal(result.linearized, result.full)
    assert result.residual == 0.0
    assert len(result.projection) == model.block_count


def test_linearization_of_single_block_is_exact(rng):
    model = _shared_model(2, block_count=1)
    result = diagnostics.linearized_forecast(model, rng.uniform(size=model.input_size))
    assert result.residual == 0.0


def test_linearization_needs_shared_weights(small_model, rng):
    with pytest.raises(ValueError):
        diagnostics.linearized_forecast(small_model, rng.uniform(size=small_model.input_size))


def test_linearization_order():
    models = [_shared_model(seed) for seed in range(10)]
    order = diagnostics.linearization_order(models, probes=20, scales=(1e-1, 1e-2, 1e-3), seed=0)
    assert order.samples == 200
    assert order.mean_residuals[0] > order.mean_residuals[1] > order.mean_residuals[2]
    assert order.order >= 1.7


@pytest.mark.parametrize("block_count", range(1, 9))
def test_linear_stack_collapses_to_closed_form(block_count):
    for seed in range(20):
        model = _without_biases(_shared_model(seed, block_count=block_count, act="identity", width=16))
        x = np.random.default_rng(seed).uniform(0.5, 1.5, size=model.input_size)
        check = diagnostics.linear_collapse_check(model, x)
        assert check.max_rel_diff < 1e-9

        block = model.block(0)
        f, c = diagnostics.trunk_affine(block)
        assert np.array_equal(c, np.zeros_like(c))
        sums = diagnostics.neumann_partial_sums(f, block.backcast_head, block.forecast_head, x, block_count)
        assert np.allclose(sums[-1], check.closed_form, rtol=1e-9, atol=1e-12)


def test_collapse_check_includes_biases(rng):
    model = _shared_model(4, act="identity", width=8)
    model = model.with_parameters({
        name: value + rng.normal(scale=0.1, size=value.shape) if name.endswith(".bias") else value
        for name, value in model.parameters().items()
    })
    check = diagnostics.linear_collapse_check(model, rng.uniform(size=model.input_size))
    assert check.max_rel_diff < 1e-9
    with pytest.raises(ValueError):
        diagnostics.trunk_affine(_shared_model(4).block(0))


@pytest.mark.parametrize("alpha", [0.3, 0.5, 1.5])
def test_neumann_series_converges_for_contracting_steps(alpha, rng):
    f = rng.normal(size=(12, 6))
    g = rng.normal(size=(3, 12))
    x = rng.normal(size=6)
    q = alpha * np.linalg.pinv(f)
    sums = diagnostics.neumann_partial_sums(f, q, g, x, 200)
    steps = np.linalg.norm(np.diff(sums[:40], axis=0), axis=1)
    # consecutive increments shrink by |1 - alpha|
    assert np.all(steps[1:] <= steps[:-1] * (abs(1 - alpha) + 1e-6) + 1e-12)
    limit = diagnostics.neumann_limit(f, q, g, x)
    assert np.allclose(sums[-1], limit, rtol=1e-8, atol=1e-10)
    assert np.allclose(limit, g @ f @ x / alpha, rtol=1e-8)


def test_run_diagnostics_report():
    shared = diagnostics.run_diagnostics(_shared_model(5, block_count=3), seed=1, probes=4)
    assert shared["share_weights"] and shared["block_count"] == 3
    assert shared["shift_recursion_error"] < 1e-12
    assert set(shared["linearization"]) == {"order", "scales", "mean_residuals", "samples"}
    assert shared["linear_collapse"]["max_rel_diff"] < 1e-9
    json.dumps(shared)

    unique = build_model(ModelConfig(horizon=2, block_count=3, layers=2, width=8), seed=0)
    report = diagnostics.run_diagnostics(unique, seed=0, probes=3)
    assert "skipped" in report["linearization"]
    assert report["schema_version"] == diagnostics.DIAGNOSTICS_SCHEMA_VERSION
