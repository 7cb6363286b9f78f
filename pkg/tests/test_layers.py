import math

import mpmath
import numpy as np
import pytest

from dereco.config import DimensionError
from dereco.nn import (
    LstmCellState,
    LstmParams,
    Mlp,
    MlpSpec,
    ParamStore,
    Tensor,
    dense_forward,
    init_lstm_params,
    lstm_cell_forward,
    orthogonal,
)


def tensor(x):
    return Tensor(np.asarray(x, dtype=np.float64))


class TestDenseForward:
    def test_identity_linear(self):
        out = dense_forward(
            tensor([[1.0, 2.0]]), tensor([[1.0, 0.0], [0.0, 1.0]]), tensor([0.0, 0.0]), "linear"
        )
        np.testing.assert_array_equal(out.data, [[1.0, 2.0]])

    def test_relu_clamps_negatives(self):
        out = dense_forward(tensor([[-3.0]]), tensor([[1.0]]), tensor([0.0]), "relu")
        np.testing.assert_array_equal(out.data, [[0.0]])

    def test_tanh_scalar_value(self):
        out = dense_forward(tensor([[0.5]]), tensor([[2.0]]), tensor([0.1]), "tanh")
        expected = float(mpmath.tanh(mpmath.mpf("1.1")))
        assert abs(out.data[0, 0] - expected) < 1e-12
        assert abs(out.data[0, 0] - 0.80050) < 1e-5

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(DimensionError) as err:
            dense_forward(tensor([[1.0, 2.0]]), tensor([[1.0]]), tensor([0.0]))
        assert "(1, 2)" in str(err.value) and "(1, 1)" in str(err.value)

    def test_bias_mismatch(self):
        with pytest.raises(DimensionError):
            dense_forward(tensor([[1.0]]), tensor([[1.0, 2.0]]), tensor([0.0]))


class TestLstmCell:
    def test_zero_everything_gives_zero_state(self):
        params = LstmParams(
            tensor(np.zeros((3, 8))), tensor(np.zeros((2, 8))), tensor(np.zeros(8))
        )
        out, state = lstm_cell_forward(
            tensor(np.zeros((1, 3))), LstmCellState.zeros(1, 2), params
        )
        np.testing.assert_array_equal(out.data, np.zeros((1, 2)))
        np.testing.assert_array_equal(state.c.data, np.zeros((1, 2)))

    def test_saturated_forget_gate_preserves_cell(self):
        hidden = 2
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 100.0
        params = LstmParams(
            tensor(np.zeros((3, 4 * hidden))),
            tensor(np.zeros((hidden, 4 * hidden))),
            tensor(b),
        )
        c0 = np.array([[0.3, -0.7]])
        state = LstmCellState(tensor(np.zeros((1, hidden))), tensor(c0))
        _, nxt = lstm_cell_forward(tensor(np.zeros((1, 3))), state, params)
        np.testing.assert_allclose(nxt.c.data, c0, atol=1e-12)

    def test_matches_scalar_gate_oracle(self):
        # independent per-element recomputation of the gate equations
        rng = np.random.default_rng(42)
        in_w, hidden = 3, 4
        wx = rng.standard_normal((in_w, 4 * hidden))
        wh = rng.standard_normal((hidden, 4 * hidden))
        b = rng.standard_normal(4 * hidden)
        x = rng.standard_normal((1, in_w))
        h0 = rng.standard_normal((1, hidden))
        c0 = rng.standard_normal((1, hidden))

        def sig(v):
            return 1.0 / (1.0 + math.exp(-v))

        expect_h, expect_c = [], []
        for j in range(hidden):
            zi = b[j] + sum(x[0, k] * wx[k, j] for k in range(in_w))
            zf = b[hidden + j] + sum(x[0, k] * wx[k, hidden + j] for k in range(in_w))
            zg = b[2 * hidden + j] + sum(
                x[0, k] * wx[k, 2 * hidden + j] for k in range(in_w)
            )
            zo = b[3 * hidden + j] + sum(
                x[0, k] * wx[k, 3 * hidden + j] for k in range(in_w)
            )
            for m in range(hidden):
                zi += h0[0, m] * wh[m, j]
                zf += h0[0, m] * wh[m, hidden + j]
                zg += h0[0, m] * wh[m, 2 * hidden + j]
                zo += h0[0, m] * wh[m, 3 * hidden + j]
            c1 = sig(zf) * c0[0, j] + sig(zi) * math.tanh(zg)
            expect_c.append(c1)
            expect_h.append(sig(zo) * math.tanh(c1))

        params = LstmParams(tensor(wx), tensor(wh), tensor(b))
        out, nxt = lstm_cell_forward(
            tensor(x), LstmCellState(tensor(h0), tensor(c0)), params
        )
        np.testing.assert_allclose(out.data[0], expect_h, rtol=1e-12)
        np.testing.assert_allclose(nxt.c.data[0], expect_c, rtol=1e-12)

    def test_hidden_state_bounded_by_one(self):
        rng = np.random.default_rng(3)
        store = ParamStore()
        params = init_lstm_params(store, "enc", 5, 16, rng)
        state = LstmCellState.zeros(4, 16)
        for _ in range(20):
            x = tensor(rng.standard_normal((4, 5)) * 3.0)
            out, state = lstm_cell_forward(x, state, params)
            assert np.all(np.abs(out.data) <= 1.0)

    def test_state_shape_mismatch(self):
        store = ParamStore()
        params = init_lstm_params(store, "enc", 3, 4, np.random.default_rng(0))
        with pytest.raises(DimensionError):
            lstm_cell_forward(tensor(np.zeros((1, 3))), LstmCellState.zeros(1, 5), params)


class TestMlp:
    def test_orthogonal_columns(self):
        w = orthogonal(np.random.default_rng(0), 8, 4, 1.0)
        np.testing.assert_allclose(w.T @ w, np.eye(4), atol=1e-10)

    def test_orthogonal_gain_wide(self):
        w = orthogonal(np.random.default_rng(1), 3, 6, 2.0)
        np.testing.assert_allclose(w @ w.T, 4.0 * np.eye(3), atol=1e-10)

    def test_tanh_head_bounded(self):
        store = ParamStore()
        mlp = Mlp(
            store,
            "actor",
            MlpSpec([7, 16, 16, 4], output_activation="tanh"),
            np.random.default_rng(5),
            output_gain=0.01,
        )
        x = tensor(np.random.default_rng(6).standard_normal((32, 7)) * 10.0)
        out = mlp(x)
        assert np.all(out.data > -1.0) and np.all(out.data < 1.0)

    def test_forward_finite_on_finite_inputs(self):
        store = ParamStore()
        mlp = Mlp(store, "m", MlpSpec([4, 8, 2]), np.random.default_rng(9))
        out = mlp(tensor(np.random.default_rng(2).standard_normal((16, 4))))
        assert np.all(np.isfinite(out.data))
