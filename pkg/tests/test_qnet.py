import numpy as np
import pytest

from cellpower.qnet import (
    MLP,
    CheckpointError,
    RMSprop,
    load_checkpoint,
    save_checkpoint,
    train_batch,
)

from conftest import finite_difference_max_error, selected_unit_loss


class TestInit:
    @pytest.mark.parametrize("sizes", [(100, 720, 360), (200, 1440, 720),
                                       (300, 2160, 1080)])
    def test_reference_layer_sizes(self, sizes, rng):
        mlp = MLP.init(sizes, rng)
        assert mlp.layer_sizes == sizes
        assert mlp.w1.shape == (sizes[1], sizes[0])
        assert mlp.w2.shape == (sizes[2], sizes[1])

    def test_zero_input_gives_zero_output(self, rng):
        mlp = MLP.init((10, 20, 5), rng)
        assert np.array_equal(mlp.forward(np.zeros(10)), np.zeros(5))

    def test_he_scale(self, rng):
        mlp = MLP.init((400, 800, 100), rng)
        assert mlp.w1.std() == pytest.approx(np.sqrt(2.0 / 400), rel=0.05)
        assert np.all(mlp.b1 == 0.0) and np.all(mlp.b2 == 0.0)

    def test_bad_sizes_rejected(self, rng):
        with pytest.raises(ValueError):
            MLP.init((0, 5, 5), rng)


class TestForward:
    def test_zero_weights_zero_output(self):
        mlp = MLP(np.zeros((3, 2)), np.zeros(3), np.zeros((4, 3)), np.zeros(4))
        assert np.array_equal(mlp.forward(np.ones(2)), np.zeros(4))

    def test_rectifier_identity_net(self):
        mlp = MLP(np.ones((1, 1)), np.zeros(1), np.ones((1, 1)), np.zeros(1))
        assert mlp.forward(np.array([2.0]))[0] == 2.0
        assert mlp.forward(np.array([-2.0]))[0] == 0.0

    def test_batch_equals_loop(self, rng):
        mlp = MLP.init((6, 11, 4), rng)
        states = rng.normal(size=(7, 6))
        batched = mlp.forward(states)
        for i in range(7):
            # BLAS may batch with different instruction paths; demand agreement
            # to the last few ulps rather than bitwise identity
            assert np.allclose(batched[i], mlp.forward(states[i]),
                               rtol=1e-13, atol=1e-13)

    def test_dimension_mismatch_rejected(self, rng):
        mlp = MLP.init((6, 11, 4), rng)
        with pytest.raises(ValueError):
            mlp.forward(np.zeros(5))

    def test_forward_is_pure(self, rng):
        mlp = MLP.init((6, 11, 4), rng)
        x = rng.normal(size=6)
        assert np.array_equal(mlp.forward(x), mlp.forward(x))


class TestTrainBatch:
    def _random_problem(self, rng, n=5, sizes=(6, 9, 8), num_cells=2):
        mlp = MLP.init(sizes, rng)
        block = sizes[2] // num_cells
        states = rng.normal(size=(n, sizes[0]))
        actions = rng.integers(0, block, size=(n, num_cells))
        targets = rng.normal(size=(n, num_cells))
        return mlp, states, actions, targets, block

    def test_perfect_targets_leave_parameters_unchanged(self, rng):
        mlp, states, actions, targets, block = self._random_problem(rng)
        q = mlp.forward(states)
        for i in range(len(states)):
            for k in range(2):
                targets[i, k] = q[i, k * block + actions[i, k]]
        opt = RMSprop(mlp, learning_rate=0.01)
        before = [p.copy() for p in mlp.parameters()]
        loss = train_batch(mlp, opt, states, actions, targets, block)
        assert loss == 0.0
        for p, b in zip(mlp.parameters(), before):
            assert np.array_equal(p, b)

    def test_analytic_gradient_linear_regime(self):
        # positive input keeps the rectifier in its linear branch:
        # q = w2 * s, dL/dw2 = 2 (q - y) s
        mlp = MLP(np.array([[1.0]]), np.zeros(1), np.array([[0.7]]), np.zeros(1))
        s, y = 1.7, 0.3
        q = mlp.forward(np.array([s]))[0]
        from cellpower.qnet import backprop
        grads = backprop(mlp, np.array([[s]]), np.array([[2.0 * (q - y)]]))
        assert grads[2][0, 0] == pytest.approx(2.0 * (q - y) * s, rel=1e-12)

    def test_gradients_match_finite_differences(self, rng):
        for _ in range(5):
            mlp, states, actions, targets, block = self._random_problem(rng)
            err = finite_difference_max_error(mlp, states, actions, targets, block)
            assert err < 1e-4

    def test_returns_pre_update_loss(self, rng):
        mlp, states, actions, targets, block = self._random_problem(rng)
        expected = selected_unit_loss(mlp, states, actions, targets, block)
        loss = train_batch(mlp, RMSprop(mlp), states, actions, targets, block)
        assert loss == pytest.approx(expected, rel=1e-12)
        assert loss >= 0.0

    def test_batch_loss_is_mean_of_samples(self, rng):
        mlp, states, actions, targets, block = self._random_problem(rng, n=6)
        per_sample = [selected_unit_loss(mlp, states[i:i + 1], actions[i:i + 1],
                                         targets[i:i + 1], block)
                      for i in range(6)]
        whole = selected_unit_loss(mlp, states, actions, targets, block)
        assert whole == pytest.approx(np.mean(per_sample), rel=1e-12)

    def test_non_finite_loss_raises(self, rng):
        mlp, states, actions, targets, block = self._random_problem(rng)
        targets[0, 0] = np.inf
        with pytest.raises(FloatingPointError):
            train_batch(mlp, RMSprop(mlp), states, actions, targets, block)

    def test_training_reduces_loss(self, rng):
        mlp, states, actions, targets, block = self._random_problem(rng, n=16)
        opt = RMSprop(mlp, learning_rate=0.01)
        first = train_batch(mlp, opt, states, actions, targets, block)
        for _ in range(200):
            last = train_batch(mlp, opt, states, actions, targets, block)
        assert last < first * 0.1


class TestRmsprop:
    def test_zero_gradient_is_a_no_op(self, rng):
        mlp = MLP.init((4, 6, 3), rng)
        opt = RMSprop(mlp, learning_rate=0.5)
        opt.acc = [np.abs(rng.normal(size=a.shape)) for a in opt.acc]
        before = [p.copy() for p in mlp.parameters()]
        acc_before = [a.copy() for a in opt.acc]
        opt.apply(mlp, [np.zeros_like(p) for p in mlp.parameters()])
        for p, b in zip(mlp.parameters(), before):
            assert np.array_equal(p, b)
        for a, b in zip(opt.acc, acc_before):   # accumulators only decay
            assert np.allclose(a, b * opt.decay)


class TestClone:
    def test_clone_outputs_match(self, rng):
        mlp = MLP.init((5, 8, 4), rng)
        twin = mlp.clone()
        x = rng.normal(size=5)
        assert np.array_equal(mlp.forward(x), twin.forward(x))

    def test_training_original_leaves_clone_unchanged(self, rng):
        mlp = MLP.init((5, 8, 4), rng)
        twin = mlp.clone()
        x = rng.normal(size=5)
        before = twin.forward(x).copy()
        train_batch(mlp, RMSprop(mlp, learning_rate=0.1),
                    rng.normal(size=(3, 5)), rng.integers(0, 2, size=(3, 2)),
                    rng.normal(size=(3, 2)), 2)
        assert np.array_equal(twin.forward(x), before)
        assert not np.array_equal(mlp.forward(x), before)

    def test_clone_of_clone(self, rng):
        mlp = MLP.init((5, 8, 4), rng)
        assert np.array_equal(mlp.clone().clone().w1, mlp.w1)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path, rng):
        mlp = MLP.init((7, 12, 6), rng)
        opt = RMSprop(mlp, learning_rate=0.003, decay=0.9, epsilon=1e-5)
        train_batch(mlp, opt, rng.normal(size=(4, 7)),
                    rng.integers(0, 3, size=(4, 2)), rng.normal(size=(4, 2)), 3)
        path = tmp_path / "net.ckpt"
        save_checkpoint(path, mlp, opt)
        loaded, lopt = load_checkpoint(path)
        states = rng.normal(size=(100, 7))
        assert np.array_equal(mlp.forward(states), loaded.forward(states))
        assert lopt.learning_rate == opt.learning_rate
        assert lopt.decay == opt.decay
        assert lopt.epsilon == opt.epsilon
        for a, b in zip(opt.acc, lopt.acc):
            assert np.array_equal(a, b)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOTACKPT" + b"\x00" * 64)
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_truncated_rejected(self, tmp_path, rng):
        mlp = MLP.init((7, 12, 6), rng)
        path = tmp_path / "net.ckpt"
        save_checkpoint(path, mlp, RMSprop(mlp))
        data = path.read_bytes()
        path.write_bytes(data[:len(data) // 2])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_trailing_bytes_rejected(self, tmp_path, rng):
        mlp = MLP.init((3, 4, 2), rng)
        path = tmp_path / "net.ckpt"
        save_checkpoint(path, mlp, RMSprop(mlp))
        path.write_bytes(path.read_bytes() + b"x")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
