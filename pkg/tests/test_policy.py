import numpy as np
import pytest

from fastgates import policy as pol


def small_net(seed=0, input_dim=3, n_actions=21):
    return pol.PolicyNet(input_dim, n_actions, hidden=(8, 8), seed=seed)


def random_trajectory(rng, net, n_steps=6):
    states = tuple(tuple(rng.normal(size=net.input_dim)) for _ in range(n_steps))
    actions = tuple(int(rng.integers(net.n_actions)) for _ in range(n_steps))
    rewards = tuple(float(rng.normal()) for _ in range(n_steps))
    return pol.Trajectory(states, actions, rewards)


def objective(net, traj, beta):
    """What reinforce_gradient ascends: sum_j coeff_j log pi(u_j|s_j)."""
    g = pol.returns_to_go(traj.rewards, beta)
    coeff = g - g.mean() if len(g) > 1 else g
    probs = net.forward_batch(np.array(traj.states))
    logp = np.log(probs[np.arange(len(traj)), traj.actions])
    return float(coeff @ logp)


def numeric_gradient(net, traj, beta, h=1e-5):
    grads = []
    for p in net.parameters():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            up = objective(net, traj, beta)
            p[idx] = orig - h
            down = objective(net, traj, beta)
            p[idx] = orig
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


class TestPolicyNet:
    def test_zero_parameters_uniform(self):
        net = small_net()
        for w in net.weights:
            w[:] = 0.0
        for b in net.biases:
            b[:] = 0.0
        probs = net.forward(np.zeros(3))
        np.testing.assert_allclose(probs, 1.0 / 21, atol=1e-15)

    def test_distribution_valid(self):
        rng = np.random.default_rng(1)
        net = small_net(seed=5)
        for _ in range(20):
            probs = net.forward(rng.normal(size=3))
            assert abs(probs.sum() - 1.0) < 1e-9
            assert probs.min() > 0

    def test_output_bias_shift_invariance(self):
        net = small_net(seed=2)
        state = np.array([0.3, -1.0, 0.5])
        before = net.forward(state)
        net.biases[-1] += 7.5
        np.testing.assert_allclose(net.forward(state), before, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dim"):
            small_net().forward(np.zeros(4))

    def test_constructor_validation(self):
        with pytest.raises(ValueError):
            pol.PolicyNet(0, 21)
        with pytest.raises(ValueError):
            pol.PolicyNet(3, 1)

    def test_clone_is_independent(self):
        net = small_net(seed=3)
        dup = net.clone()
        dup.weights[0][0, 0] += 1.0
        assert net.weights[0][0, 0] != dup.weights[0][0, 0]

    def test_init_reproducible(self):
        a, b = small_net(seed=9), small_net(seed=9)
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)


class TestTrajectory:
    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            pol.Trajectory((), (), ())

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="equal length"):
            pol.Trajectory(((0.0,),), (0, 1), (0.5,))

    def test_non_finite_reward(self):
        with pytest.raises(ValueError, match="finite"):
            pol.Trajectory(((0.0,),), (0,), (float("nan"),))


class TestReturns:
    def test_hand_example(self):
        g = pol.returns_to_go([1.0, 2.0, 3.0], beta=0.5)
        np.testing.assert_allclose(g, [2.75, 3.5, 3.0])

    def test_undiscounted_suffix_sums(self):
        g = pol.returns_to_go([1.0, 1.0, 1.0], beta=1.0)
        np.testing.assert_allclose(g, [3.0, 2.0, 1.0])


class TestReinforce:
    def test_zero_rewards_no_update(self):
        net = small_net(seed=4)
        before = [p.copy() for p in net.parameters()]
        traj = pol.Trajectory(
            ((0.1, 0.2, 0.3), (0.5, -0.1, 0.0)), (3, 7), (0.0, 0.0)
        )
        pol.reinforce_update(net, traj, beta=0.95, learning_rate=0.1)
        for p, q in zip(net.parameters(), before):
            np.testing.assert_array_equal(p, q)

    def test_single_step_action_reinforced(self):
        net = small_net(seed=6)
        state = (0.2, -0.4, 1.0)
        traj = pol.Trajectory((state,), (5,), (1.0,))
        p0 = net.forward(np.array(state))[5]
        for _ in range(20):
            pol.reinforce_update(net, traj, beta=0.95, learning_rate=0.05)
        assert net.forward(np.array(state))[5] > p0

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        net = small_net(seed=seed + 10)
        traj = random_trajectory(rng, net)
        grads_w, grads_b = pol.reinforce_gradient(net, traj, beta=0.95)
        analytic = []
        for gw, gb in zip(grads_w, grads_b):
            analytic.extend((gw, gb))
        numeric = numeric_gradient(net, traj, beta=0.95)
        flat_a = np.concatenate([g.ravel() for g in analytic])
        flat_n = np.concatenate([g.ravel() for g in numeric])
        err = np.linalg.norm(flat_a - flat_n) / np.linalg.norm(flat_n)
        assert err < 1e-4

    def test_non_finite_gradient_rejected(self):
        net = small_net(seed=7)
        net.weights[0][0, 0] = float("nan")
        traj = pol.Trajectory(((0.1, 0.1, 0.1),), (2,), (1.0,))
        with pytest.raises(pol.NumericError, match="non-finite"):
            pol.reinforce_update(net, traj, beta=0.95, learning_rate=0.1)


class TestSampleAction:
    def test_one_hot(self):
        probs = np.zeros(21)
        probs[13] = 1.0
        rng = np.random.default_rng(0)
        assert all(pol.sample_action(probs, rng) == 13 for _ in range(50))

    def test_uniform_frequencies(self):
        n = 100_000
        p = 1.0 / 21
        probs = np.full(21, p)
        rng = np.random.default_rng(8)
        draws = np.array([pol.sample_action(probs, rng) for _ in range(n)])
        bound = 4 * np.sqrt(p * (1 - p) / n)
        for a in range(21):
            assert abs((draws == a).mean() - p) < bound

    def test_seed_reproducible(self):
        probs = np.full(4, 0.25)
        a = [pol.sample_action(probs, np.random.default_rng(3)) for _ in range(10)]
        b = [pol.sample_action(probs, np.random.default_rng(3)) for _ in range(10)]
        assert a == b

    def test_rejects_non_distribution(self):
        with pytest.raises(ValueError):
            pol.sample_action(np.array([0.5, 0.2]), np.random.default_rng(0))


class TestPretrain:
    def test_zero_width_one_hot(self):
        grid = [0.0, 0.1, 0.2]
        t = pol.pretrain_target(grid, 0.12, width=0.0)
        np.testing.assert_array_equal(t, [0.0, 1.0, 0.0])

    def test_target_normalized(self):
        grid = np.linspace(0.0, 0.2, 21)
        t = pol.pretrain_target(grid, 0.07, width=0.01)
        assert t.sum() == pytest.approx(1.0)
        assert t.argmax() == 7

    def test_converges_to_nearest_grid_point(self):
        net = small_net(seed=11)
        grid = np.linspace(0.0, 0.2, 21)
        state = np.array([0.5, 0.5, 0.1])
        for _ in range(400):
            pol.mse_pretrain_step(net, state, 0.132, grid, width=0.01, learning_rate=2.0)
        assert net.forward(state).argmax() == 13

    def test_loss_monotone_at_small_rate(self):
        net = pol.PolicyNet(3, 21, seed=12)
        grid = np.linspace(0.0, 0.2, 21)
        state = np.array([0.2, -0.3, 0.9])
        losses = [
            pol.mse_pretrain_step(net, state, 0.05, grid, width=0.01, learning_rate=1e-2)
            for _ in range(100)
        ]
        diffs = np.diff(losses)
        assert (diffs <= 1e-12).all()

    def test_grid_size_mismatch(self):
        net = small_net()
        with pytest.raises(ValueError, match="grid"):
            pol.mse_pretrain_step(net, np.zeros(3), 0.1, [0.0, 0.1], 0.01, 0.1)


class TestOptimizers:
    def test_momentum_accumulates(self):
        p = np.zeros(1)
        opt = pol.Sgd(momentum=0.9)
        opt.step([p], [np.ones(1)], 0.1)
        first = p.copy()
        opt.step([p], [np.ones(1)], 0.1)
        assert p[0] - first[0] > first[0]

    def test_adam_deterministic(self):
        a, b = np.zeros(3), np.zeros(3)
        g = np.array([1.0, -2.0, 0.5])
        opt1, opt2 = pol.Adam(), pol.Adam()
        for _ in range(5):
            opt1.step([a], [g], 0.01)
            opt2.step([b], [g], 0.01)
        np.testing.assert_array_equal(a, b)

    def test_factory(self):
        assert isinstance(pol.make_optimizer("sgd"), pol.Sgd)
        assert isinstance(pol.make_optimizer("adam"), pol.Adam)
        with pytest.raises(ValueError):
            pol.make_optimizer("lbfgs")


class TestCheckpoints:
    def test_round_trip_exact(self, tmp_path):
        net = small_net(seed=13)
        grid = np.linspace(0.0, 0.2, 21)
        path = tmp_path / "x_agent.json"
        pol.save_checkpoint(net, grid, path, normalization={"mean": [0.0], "std": [1.0]})
        loaded, payload = pol.load_checkpoint(path)
        state = np.array([0.1, 0.2, 0.3])
        np.testing.assert_array_equal(loaded.forward(state), net.forward(state))
        assert payload["normalization"] == {"mean": [0.0], "std": [1.0]}
        assert payload["grid"][1] == pytest.approx(0.01)

    def test_schema_enforced(self):
        with pytest.raises(ValueError, match="schema"):
            pol.net_from_checkpoint({"schema": "other", "layers": []})

    def test_byte_deterministic(self, tmp_path):
        net = small_net(seed=14)
        grid = [0.0, 0.1]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        pol.save_checkpoint(net, grid, a)
        pol.save_checkpoint(net, grid, b)
        assert a.read_bytes() == b.read_bytes()
