"""Tests for the reverse-mode tape, primitives, gradient checks and optimizers."""

import numpy as np
import pytest

from src.autodiff import (
    Adam,
    BatchNormState,
    GradCheckResult,
    Tape,
    Tensor,
    backward,
    check_parameters,
    clip_global_norm,
    global_norm,
    gradient_check,
    ops,
)
from src.core.errors import DimensionError, TapeError
from src.graph import build_graph, erdos_renyi, incidence_pseudoinverses, reduced_incidence


def grad_of(fn, *leaves):
    with Tape() as tape:
        out = fn(*leaves)
    return backward(tape, out, list(leaves))


class TestTape:
    """Tests for recording and the reverse pass."""

    def test_sum_of_squares(self):
        """d/dx sum(x^2) at [1, -2] is [2, -4]."""
        x = Tensor([1.0, -2.0], requires_grad=True)
        print("\n INPUT: x=[1, -2]")
        (grad,) = grad_of(ops.sum_sq, x)
        print(f" OUTPUT: {grad.tolist()}")
        np.testing.assert_array_equal(grad, [2.0, -4.0])
        np.testing.assert_array_equal(x.grad, [2.0, -4.0])

    def test_relu_subgradient_at_zero(self):
        x = Tensor([-1.0, 0.0, 2.0], requires_grad=True)
        (grad,) = grad_of(lambda t: ops.sum_all(ops.relu(t)), x)
        np.testing.assert_array_equal(grad, [0.0, 0.0, 1.0])

    def test_chain_rule(self):
        """sum(sin(x)^2) has gradient 2 sin(x) cos(x)."""
        x = Tensor([0.3, -1.1, 2.0], requires_grad=True)
        (grad,) = grad_of(lambda t: ops.sum_all(ops.hadamard(ops.sin(t), ops.sin(t))), x)
        np.testing.assert_allclose(grad, np.sin(2 * x.value))

    def test_shared_subexpression_accumulates(self):
        """x * x + x uses x three times."""
        x = Tensor([1.5, -0.5], requires_grad=True)
        (grad,) = grad_of(lambda t: ops.sum_all(t * t + t), x)
        np.testing.assert_allclose(grad, 2 * x.value + 1)

    def test_disconnected_leaf_gets_zeros(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        unused = Tensor(np.ones((2, 2)), requires_grad=True)
        grad_x, grad_unused = grad_of(lambda a, b: ops.sum_sq(a), x, unused)
        np.testing.assert_array_equal(grad_x, [2.0, 4.0])
        np.testing.assert_array_equal(grad_unused, np.zeros((2, 2)))

    def test_stale_tape(self):
        x = Tensor([1.0], requires_grad=True)
        with Tape() as tape:
            out = ops.sum_sq(x)
        backward(tape, out, [x])
        with pytest.raises(TapeError, match="stale"):
            backward(tape, out, [x])
        with pytest.raises(TapeError):
            with tape:
                pass

    def test_backward_while_recording(self):
        x = Tensor([1.0], requires_grad=True)
        with Tape() as tape:
            out = ops.sum_sq(x)
            with pytest.raises(TapeError, match="stops recording"):
                backward(tape, out, [x])

    def test_non_scalar_output(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Tape() as tape:
            out = ops.exp(x)
        with pytest.raises(TapeError, match="scalar"):
            backward(tape, out, [x])

    def test_nothing_recorded_without_tape(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        out = ops.sum_sq(x)
        assert not out.requires_grad
        assert out.item() == 5.0

    def test_constants_not_recorded(self):
        with Tape() as tape:
            ops.sum_sq(Tensor([1.0]))
        assert len(tape) == 0

    def test_dict_result_without_wrt(self):
        x = Tensor([3.0], requires_grad=True)
        with Tape() as tape:
            out = ops.sum_sq(x)
        grads = backward(tape, out)
        np.testing.assert_array_equal(grads[x], [6.0])

    def test_item_needs_scalar(self):
        with pytest.raises(TapeError):
            Tensor([1.0, 2.0]).item()


class TestPrimitives:
    """Finite-difference checks over the primitive set."""

    def test_elementwise_chain(self):
        def fn(x):
            y = ops.add(ops.softplus(x), ops.sigmoid(ops.scale(x, 0.5)))
            y = ops.hadamard(ops.cos(y), ops.exp(ops.scale(x, -0.3)))
            return ops.sum_all(ops.add(ops.log(ops.add(ops.abs_(x), 1.0)), y))

        result = gradient_check(fn, np.array([0.4, -1.3, 2.2, -0.7]))
        print(f"\n OUTPUT: max rel error {result.max_rel_error:.2e}")
        assert result.passed(1e-7)

    def test_linear_algebra(self, rng):
        m = rng.standard_normal((3, 4))
        weights = Tensor(np.arange(6.0) - 2.5)

        def fn(x):
            y = ops.matmul(m, x)
            z = ops.transpose(ops.reshape(y, (6, 3)))
            w = ops.matvec(z, weights)
            return ops.sum_all(ops.hadamard(w, ops.sum_axis(ops.slice_(x, slice(0, 3)), 1)))

        assert gradient_check(fn, rng.standard_normal((4, 6))).passed(1e-7)

    def test_concat_stack_slice(self, rng):
        def fn(x):
            parts = [ops.slice_(x, (slice(None), 0)), ops.slice_(x, (slice(None), 2))]
            joined = ops.concat([ops.stack(parts, axis=1), x], axis=1)
            return ops.sum_sq(ops.batch_scale(joined, Tensor([1.0, -2.0, 0.5])))

        assert gradient_check(fn, rng.standard_normal((3, 4))).passed(1e-7)

    def test_operator_apply_on_p3(self, p3, rng):
        """Apply L along the node axis of a (batch, nodes) tensor."""
        lap = p3.laplacian
        x = Tensor(rng.standard_normal((2, 3)))
        out = ops.operator_apply(lap, x, axis=1)
        np.testing.assert_allclose(out.value, x.value @ lap.toarray().T)
        assert gradient_check(lambda t: ops.sum_sq(ops.operator_apply(lap, t, axis=1)), x.value).passed(1e-7)
        with pytest.raises(DimensionError):
            ops.operator_apply(lap, Tensor(np.ones((2, 4))), axis=1)

    def test_quadratic_form(self, rng):
        m = rng.standard_normal((4, 4))
        result = gradient_check(lambda x: ops.sum_all(ops.quadratic_form(x, m)), rng.standard_normal((3, 4)))
        print(f"\n OUTPUT: max rel error {result.max_rel_error:.2e}")
        assert result.max_rel_error < 1e-8

    def test_bias_broadcast(self, rng):
        bias = rng.standard_normal(3)
        (grad,) = grad_of(lambda b: ops.sum_all(ops.add(np.ones((4, 3)), b)), Tensor(bias, requires_grad=True))
        np.testing.assert_array_equal(grad, [4.0, 4.0, 4.0])
        with pytest.raises(DimensionError):
            ops.add(Tensor(np.ones((4, 3))), Tensor(np.ones(4)))

    def test_shape_errors(self):
        with pytest.raises(DimensionError):
            ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
        with pytest.raises(DimensionError):
            ops.scale(Tensor(np.ones(2)), Tensor(np.ones(2)))
        with pytest.raises(DimensionError):
            ops.quadratic_form(Tensor(np.ones(3)), np.eye(2))


class TestBatchNorm:
    """Tests for batch normalization."""

    def test_eval_uses_running_statistics(self, rng):
        state = BatchNormState.fresh(3)
        x = rng.standard_normal((1, 3))
        out = ops.batch_norm(x, np.full(3, 2.0), np.full(3, 0.5), state, training=False)
        np.testing.assert_allclose(out.value, 2.0 * x / np.sqrt(1.0 + state.eps) + 0.5)

    def test_train_normalizes_and_updates(self, rng):
        state = BatchNormState.fresh(2)
        x = 3.0 + rng.standard_normal((16, 2))
        out = ops.batch_norm(x, np.ones(2), np.zeros(2), state, training=True)
        np.testing.assert_allclose(out.value.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(state.running_mean, 0.1 * x.mean(axis=0))
        np.testing.assert_allclose(state.running_var, 0.9 + 0.1 * x.var(axis=0, ddof=1))

    def test_train_needs_two_samples(self):
        with pytest.raises(TapeError, match="at least 2"):
            ops.batch_norm(np.ones((1, 3)), np.ones(3), np.zeros(3), BatchNormState.fresh(3), training=True)

    def test_train_gradient(self, rng):
        gamma, beta = rng.standard_normal(3), rng.standard_normal(3)
        weights = rng.standard_normal((5, 3))

        def fn(x):
            out = ops.batch_norm(x, gamma, beta, BatchNormState.fresh(3), training=True)
            return ops.sum_all(ops.hadamard(out, weights))

        assert gradient_check(fn, rng.standard_normal((5, 3))).passed(1e-6)


class TestGraphCovarianceOps:
    """Gradients of the pseudo-inverse primitives used by the likelihood and the GKNet regularizer."""

    def test_precision_quadratic(self, er8, rng):
        inv = incidence_pseudoinverses(er8)
        eps = rng.standard_normal((2, er8.n))
        a = rng.uniform(0.5, 2.0, er8.m)
        assert gradient_check(lambda t: ops.sum_all(ops.precision_quadratic(t, a, inv)), eps).passed(1e-6)
        assert gradient_check(lambda t: ops.sum_all(ops.precision_quadratic(eps, t, inv)), a).passed(1e-6)

    def test_log_pdet_and_trace(self, rng):
        g = erdos_renyi(6, 0.6, 4)
        red = reduced_incidence(g)
        root = rng.standard_normal((6, 6))
        w = root @ root.T
        a = rng.uniform(0.5, 2.0, g.m)
        assert gradient_check(lambda t: ops.log_pdet(t, red), a).passed(1e-6)
        assert gradient_check(lambda t: ops.precision_trace(w, t, red), a).passed(1e-6)
        assert gradient_check(lambda t: ops.precision_trace(t, a, red), w).passed(1e-6)

    def test_diag_congruence(self, rng):
        b = build_graph([(0, 1), (1, 2), (0, 2)]).incidence.toarray()
        weights = rng.standard_normal((3, 3))
        a = rng.uniform(0.5, 1.5, 3)
        out = ops.diag_congruence(b, Tensor(a))
        np.testing.assert_allclose(out.value, b @ np.diag(a) @ b.T)
        assert gradient_check(lambda t: ops.sum_all(ops.hadamard(ops.diag_congruence(b, t), weights)), a).passed(1e-7)


class TestGradientCheck:
    """Tests for the finite-difference harness itself."""

    def test_detects_wrong_gradient(self):
        """A primitive with a deliberately wrong pullback fails the check."""
        from src.autodiff.tensor import record

        def broken(x):
            return record("broken", np.sum(x.value**2), (x,), lambda g: (g * x.value,))

        result = gradient_check(broken, np.array([1.0, 2.0]))
        assert not result.passed(1e-3)
        assert result.worst_index == (1,)

    def test_nudge_moves_off_kink(self):
        result = gradient_check(lambda x: ops.sum_all(ops.relu(x)), np.zeros(4), nudge=0.1, seed=3)
        assert result.passed(1e-7)

    def test_check_parameters_nudges_zero_bias_off_kink(self, rng):
        """A zero bias feeding a ReLU with zero input sits on the kink until nudged."""
        x = np.zeros((4, 3))
        w = Tensor(rng.standard_normal((3, 3)), requires_grad=True)
        b = Tensor(np.zeros(3), requires_grad=True)

        def loss():
            return ops.sum_all(ops.relu(ops.add(ops.matmul(x, w), b)))

        at_kink = check_parameters(loss, [w, b])
        assert not at_kink[1].passed(1e-4)
        nudged = check_parameters(loss, [w, b], nudge=0.05, seed=4)
        print(f"\n OUTPUT: at kink {at_kink[1].max_rel_error:.2e}, nudged {nudged[1].max_rel_error:.2e}")
        assert np.all(b.value != 0.0)
        assert all(result.passed(1e-7) for result in nudged.values())

    def test_check_parameters_keyed_by_position(self, rng):
        w = Tensor(rng.standard_normal((3, 3)), requires_grad=True)
        b = Tensor(rng.standard_normal(3), requires_grad=True)
        x = rng.standard_normal((4, 3))
        results = check_parameters(lambda: ops.sum_sq(ops.add(ops.matmul(x, w), b)), [w, b])
        assert set(results) == {0, 1}
        assert all(isinstance(r, GradCheckResult) and r.passed(1e-7) for r in results.values())

    def test_fifty_step_recurrence(self, rng):
        """Backprop through time on h_{t+1} = sigmoid(W h_t + x_t) for 50 steps."""
        inputs = 0.5 * rng.standard_normal((50, 3))

        def fn(w):
            h = Tensor(np.zeros(3))
            for x in inputs:
                h = ops.sigmoid(ops.add(ops.matvec(w, h), x))
            return ops.sum_sq(h)

        result = gradient_check(fn, 0.5 * rng.standard_normal((3, 3)))
        print(f"\n OUTPUT: max rel error {result.max_rel_error:.2e}")
        assert result.passed(1e-6)


class TestOptimizers:
    """Tests for Adam and gradient clipping."""

    def test_adam_minimizes_quadratic(self):
        x = Tensor([3.0, -2.0])
        opt = Adam([x], lr=0.1)
        for _ in range(1000):
            opt.step([2.0 * x.value])
        print(f"\n OUTPUT: {x.value.tolist()}")
        assert np.all(np.abs(x.value) < 5e-2)

    def test_first_adam_step_is_lr(self):
        """Bias correction makes the first step exactly lr * sign(g)."""
        x = Tensor([1.0, 1.0])
        Adam([x], lr=0.01).step([np.array([5.0, -0.1])])
        np.testing.assert_allclose(x.value, [0.99, 1.01], atol=1e-8)

    def test_clip_global_norm(self):
        grads, norm = clip_global_norm([np.array([3.0]), np.array([4.0])], max_norm=1.0)
        assert norm == 5.0
        np.testing.assert_allclose(np.concatenate(grads), [0.6, 0.8])
        assert global_norm(grads) == pytest.approx(1.0)

    def test_clip_leaves_small_gradients(self):
        grads, norm = clip_global_norm([np.array([0.3, 0.4])], max_norm=5.0)
        assert norm == pytest.approx(0.5)
        np.testing.assert_array_equal(grads[0], [0.3, 0.4])
