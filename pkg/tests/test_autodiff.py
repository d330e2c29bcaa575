"""Tape mechanics, op semantics, broadcasting limits and the conv adjoint."""
import numpy as np
import pytest

from aligngan import autodiff as ad
from aligngan.autodiff import ShapeError, Tape, backward, grad_check


def _scalarize(t):
    return ad.mean(ad.square(t))


class TestTapeMechanics:
    def test_leaf_records_float64(self):
        tape = Tape()
        t = tape.leaf([[1, 2], [3, 4]])
        assert t.data.dtype == np.float64
        assert t.shape == (2, 2)

    def test_node_ids_are_insertion_indices(self):
        tape = Tape()
        a = tape.leaf(1.0)
        b = tape.leaf(2.0)
        c = ad.add(a, b)
        assert (a.node_id, b.node_id, c.node_id) == (0, 1, 2)

    def test_backward_requires_scalar_loss(self):
        tape = Tape()
        t = tape.leaf(np.ones(3))
        with pytest.raises(ShapeError):
            backward(tape, t)

    def test_unused_leaf_absent_from_gradients(self):
        tape = Tape()
        used = tape.leaf(np.ones(3))
        unused = tape.leaf(np.ones(3))
        gmap = backward(tape, ad.mean(used))
        assert used.node_id in gmap
        assert unused.node_id not in gmap

    def test_fan_out_gradients_accumulate(self):
        tape = Tape()
        x = tape.leaf(np.array([2.0]))
        y = ad.mean(ad.add(x, x))  # dy/dx = 2
        g = backward(tape, y)[x.node_id]
        np.testing.assert_allclose(g, [2.0])


class TestElementwiseOps:
    def test_add_sub_mul_values(self):
        tape = Tape()
        a = tape.leaf([1.0, 2.0])
        b = tape.leaf([3.0, 5.0])
        np.testing.assert_array_equal(ad.add(a, b).data, [4.0, 7.0])
        np.testing.assert_array_equal(ad.sub(a, b).data, [-2.0, -3.0])
        np.testing.assert_array_equal(ad.mul(a, b).data, [3.0, 10.0])

    def test_scale_and_shift_constants(self):
        tape = Tape()
        a = tape.leaf([1.0, -1.0])
        np.testing.assert_array_equal(ad.scale(a, 3.0).data, [3.0, -3.0])
        np.testing.assert_array_equal(ad.shift(a, 1.5).data, [2.5, 0.5])

    def test_batch_axis_broadcast(self):
        tape = Tape()
        a = tape.leaf(np.ones((4, 3)))
        b = tape.leaf(np.arange(3.0))
        out = ad.add(a, b)
        assert out.shape == (4, 3)
        g = backward(tape, ad.mean(out))
        # broadcast leaf's gradient is summed over the batch axis
        assert g[b.node_id].shape == (3,)
        np.testing.assert_allclose(g[b.node_id], np.full(3, 4 / 12))

    def test_scalar_broadcast(self):
        tape = Tape()
        a = tape.leaf(np.ones((2, 2)))
        s = tape.leaf(3.0)
        g = backward(tape, ad.mean(ad.mul(a, s)))
        assert g[s.node_id].shape == ()
        np.testing.assert_allclose(g[s.node_id], 1.0)

    def test_middle_axis_broadcast_rejected(self):
        tape = Tape()
        a = tape.leaf(np.ones((2, 3, 4)))
        b = tape.leaf(np.ones((2, 4)))
        with pytest.raises(ShapeError):
            ad.add(a, b)

    def test_mismatched_shapes_rejected(self):
        tape = Tape()
        with pytest.raises(ShapeError):
            ad.add(tape.leaf(np.ones(3)), tape.leaf(np.ones(4)))


class TestUnaryOps:
    def test_leaky_relu_values(self):
        tape = Tape()
        t = ad.leaky_relu(tape.leaf([-1.0, 0.0, 2.0]), 0.2)
        np.testing.assert_allclose(t.data, [-0.2, 0.0, 2.0])

    def test_tanh_sigmoid_range(self):
        tape = Tape()
        x = tape.leaf(np.linspace(-5, 5, 11))
        assert np.all(np.abs(ad.tanh(x).data) < 1.0)
        s = ad.sigmoid(x).data
        assert np.all((s > 0.0) & (s < 1.0))

    def test_log_without_clamp_rejects_nonpositive(self):
        tape = Tape()
        with pytest.raises(ValueError):
            ad.log(tape.leaf([1.0, 0.0]))

    def test_log_clamp_value_and_zero_gradient(self):
        tape = Tape()
        x = tape.leaf([1e-12, 1.0])
        out = ad.log(x, eps=1e-7)
        np.testing.assert_allclose(out.data[0], np.log(1e-7))
        g = backward(tape, ad.mean(out))[x.node_id]
        assert g[0] == 0.0  # clamped region gets exactly zero
        np.testing.assert_allclose(g[1], 0.5)

    def test_mean_gradient_uniform(self):
        tape = Tape()
        x = tape.leaf(np.arange(6.0).reshape(2, 3))
        g = backward(tape, ad.mean(x))[x.node_id]
        np.testing.assert_allclose(g, np.full((2, 3), 1 / 6))

    def test_narrow_slices_and_scatters(self):
        tape = Tape()
        x = tape.leaf(np.arange(12.0).reshape(3, 4))
        out = ad.narrow(x, 1, 1, 2)
        np.testing.assert_array_equal(out.data, [[1, 2], [5, 6], [9, 10]])
        g = backward(tape, ad.mean(out))[x.node_id]
        assert g[:, 0].sum() == 0.0 and g[:, 3].sum() == 0.0
        assert g[:, 1:3].sum() > 0.0


class TestStructuralOps:
    def test_concat_round_trip_gradient(self):
        tape = Tape()
        a = tape.leaf(np.ones((2, 3)))
        b = tape.leaf(np.ones((2, 5)))
        out = ad.concat([a, b], axis=1)
        assert out.shape == (2, 8)
        g = backward(tape, ad.mean(out))
        assert g[a.node_id].shape == (2, 3)
        assert g[b.node_id].shape == (2, 5)

    def test_concat_shape_mismatch(self):
        tape = Tape()
        with pytest.raises(ShapeError):
            ad.concat([tape.leaf(np.ones((2, 3))), tape.leaf(np.ones((3, 3)))],
                      axis=1)

    def test_concat_empty_rejected(self):
        with pytest.raises(ValueError):
            ad.concat([], axis=0)

    def test_matmul_value(self):
        tape = Tape()
        a = tape.leaf(np.arange(6.0).reshape(2, 3))
        b = tape.leaf(np.arange(12.0).reshape(3, 4))
        np.testing.assert_array_equal(ad.matmul(a, b).data, a.data @ b.data)

    def test_matmul_rejects_vector(self):
        tape = Tape()
        with pytest.raises(ShapeError):
            ad.matmul(tape.leaf(np.ones(3)), tape.leaf(np.ones((3, 2))))


class TestConvolution:
    def test_conv2d_matches_direct_computation(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, (2, 3, 5, 5))
        k = rng.uniform(-1, 1, (4, 3, 3, 3))
        tape = Tape()
        out = ad.conv2d(tape.leaf(x), tape.leaf(k), stride=1, pad=0)
        assert out.shape == (2, 4, 3, 3)
        # direct dot product at one output position
        want = (x[1, :, 1:4, 2:5] * k[2]).sum()
        np.testing.assert_allclose(out.data[1, 2, 1, 2], want)

    def test_conv2d_stride_and_pad_shapes(self):
        tape = Tape()
        x = tape.leaf(np.zeros((1, 1, 8, 8)))
        k = tape.leaf(np.zeros((6, 1, 4, 4)))
        out = ad.conv2d(x, k, stride=2, pad=1)
        assert out.shape == (1, 6, 4, 4)

    def test_conv2d_incompatible_extent_rejected(self):
        tape = Tape()
        with pytest.raises(ShapeError):
            ad.conv2d(tape.leaf(np.zeros((1, 1, 5, 5))),
                      tape.leaf(np.zeros((1, 1, 4, 4))), stride=2, pad=0)

    def test_transposed_conv_inverts_conv_shape(self):
        tape = Tape()
        y = tape.leaf(np.zeros((1, 6, 4, 4)))
        k = tape.leaf(np.zeros((6, 1, 4, 4)))
        out = ad.transposed_conv2d(y, k, stride=2, pad=1)
        assert out.shape == (1, 1, 8, 8)

    def test_exact_adjoint_identity(self):
        # <conv(x), y> == <x, transposed_conv(y)> with the same kernel
        rng = np.random.default_rng(1)
        x = rng.uniform(-1, 1, (2, 3, 8, 8))
        k = rng.uniform(-1, 1, (5, 3, 4, 4))
        y = rng.uniform(-1, 1, (2, 5, 4, 4))
        tape = Tape()
        cx = ad.conv2d(tape.leaf(x), tape.leaf(k), stride=2, pad=1).data
        ty = ad.transposed_conv2d(tape.leaf(y), tape.leaf(k.transpose(0, 1, 2, 3)),
                                  stride=2, pad=1).data
        lhs = float((cx * y).sum())
        rhs = float((x * ty).sum())
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_conv_bias_broadcast(self):
        tape = Tape()
        x = tape.leaf(np.zeros((1, 1, 4, 4)))
        k = tape.leaf(np.zeros((3, 1, 2, 2)))
        b = tape.leaf(np.array([1.0, 2.0, 3.0]))
        out = ad.conv2d(x, k, bias=b, stride=2, pad=0)
        np.testing.assert_allclose(out.data[0, :, 0, 0], [1.0, 2.0, 3.0])


class TestGradCheckOracle:
    def test_simple_quadratic(self):
        err = grad_check(lambda t: ad.mean(ad.square(t)),
                         np.array([1.0, -2.0, 3.0]))
        assert err < 1e-6

    def test_detects_wrong_gradient(self):
        # a hand-recorded op whose backward rule is off by 1%
        def bad_square(t):
            def bwd(g):
                return ((t.node_id, g * 2.02 * t.data),)
            return t.tape.record("bad_square", t.data * t.data,
                                 (t.node_id,), bwd)

        err = grad_check(lambda t: ad.mean(bad_square(t)),
                         np.array([1.0, -2.0, 3.0]))
        assert err > 1e-4
