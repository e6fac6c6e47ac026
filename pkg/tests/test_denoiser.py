import math

import numpy as np
import pytest

from arrowgen import denoiser as dn
from arrowgen.diffusion import apply_mask, sample_t_sigma
from arrowgen.graph import Graph


def make_params(n=6, d=4, c=8, seed=0):
    return dn.init_denoiser(n, d, embed_dim=c, seed=seed)


class TestForward:
    def test_shape_and_determinism(self):
        p = make_params()
        tokens = np.array([0, 6, 6, 3])  # 6 is the absorbing id for n=6
        a = dn.forward(p, tokens, t=2)
        b = dn.forward(p, tokens, t=2)
        assert a.shape == (4, 6)
        assert np.array_equal(a, b)

    def test_token_range_checked(self):
        p = make_params()
        with pytest.raises(ValueError):
            dn.forward(p, np.array([0, 1, 7, 2]), t=1)
        with pytest.raises(ValueError):
            dn.forward(p, np.array([0, -1, 2, 3]), t=1)

    def test_t_range_checked(self):
        p = make_params()
        tokens = np.zeros(4, dtype=np.int64)
        with pytest.raises(ValueError):
            dn.forward(p, tokens, t=0)
        with pytest.raises(ValueError):
            dn.forward(p, tokens, t=5)

    def test_time_conditioning_changes_output(self):
        p = make_params()
        tokens = np.array([0, 6, 6, 6])
        a = dn.forward(p, tokens, t=1)
        b = dn.forward(p, tokens, t=3)
        assert not np.allclose(a, b)

    def test_position_awareness(self):
        # two absorbing tokens at different positions get distinct logits
        p = make_params()
        logits = dn.forward(p, np.array([0, 6, 6, 3]), t=2)
        assert not np.allclose(logits[1], logits[2])

    def test_forward_rows_matches_full_forward(self):
        p = make_params()
        rng = np.random.default_rng(1)
        tokens = rng.integers(0, 7, size=(3, 4))
        positions = np.array([0, 2, 3])
        rows = dn.forward_rows(p, tokens, 2, positions)
        for i in range(3):
            full = dn.forward(p, tokens[i], 2)
            assert np.allclose(rows[i], full[positions[i]], atol=1e-10)

    def test_walk_len_validation(self):
        with pytest.raises(ValueError):
            dn.init_denoiser(5, 3)
        with pytest.raises(ValueError):
            dn.init_denoiser(5, 2)


class TestBackward:
    def test_gradients_match_finite_differences(self):
        p = make_params(n=5, d=4, c=6, seed=2)
        rng = np.random.default_rng(3)
        walk = rng.integers(0, 5, size=4)
        t, sigma = sample_t_sigma(4, rng)
        masked = apply_mask(walk, sigma, t, 5)
        grads = dn.backward(p, masked.tokens, t, walk, masked.mask)

        def loss_value():
            val, _ = dn.batch_loss_and_grads(
                p, walk[None, :], masked.tokens[None, :], np.array([t]), masked.mask[None, :]
            )
            return val

        eps = 1e-5
        checked = 0
        for name, theta in p.tensors.items():
            flat = theta.ravel()
            g = grads[name].ravel()
            idxs = rng.choice(flat.size, size=min(10, flat.size), replace=False)
            for i in idxs:
                old = flat[i]
                flat[i] = old + eps
                lp = loss_value()
                flat[i] = old - eps
                lm = loss_value()
                flat[i] = old
                fd = (lp - lm) / (2 * eps)
                assert g[i] == pytest.approx(fd, rel=1e-3, abs=1e-7), name
                checked += 1
        assert checked == sum(min(10, t.size) for t in p.tensors.values())

    def test_batch_loss_averages_per_walk_losses(self):
        p = make_params(n=5, d=4, c=6, seed=4)
        rng = np.random.default_rng(5)
        walks = rng.integers(0, 5, size=(3, 4))
        ts = np.empty(3, dtype=np.int64)
        masks = np.empty((3, 4), dtype=bool)
        tokens = np.empty_like(walks)
        singles = []
        for i in range(3):
            t, sigma = sample_t_sigma(4, rng)
            m = apply_mask(walks[i], sigma, t, 5)
            ts[i], masks[i], tokens[i] = t, m.mask, m.tokens
            v, _ = dn.batch_loss_and_grads(
                p, walks[i : i + 1], tokens[i : i + 1], ts[i : i + 1], masks[i : i + 1]
            )
            singles.append(v)
        batch, _ = dn.batch_loss_and_grads(p, walks, tokens, ts, masks)
        assert batch == pytest.approx(np.mean(singles), rel=1e-10)


class TestAdam:
    def test_first_step_closed_form(self):
        p = make_params(n=4, d=4, c=4, seed=6)
        before = {k: v.copy() for k, v in p.tensors.items()}
        grads = {k: np.full_like(v, 0.5) for k, v in p.tensors.items()}
        lr, eps = 1e-2, 1e-8
        dn.adam_step(p, grads, lr=lr, eps=eps)
        # bias-corrected m_hat = g, v_hat = g^2 -> update = lr*g/(|g|+eps)
        expected_delta = lr * 0.5 / (0.5 + eps)
        for k in p.tensors:
            assert np.allclose(before[k] - p.tensors[k], expected_delta)
        assert p.step == 1

    def test_two_steps_reduce_loss_on_fixed_batch(self):
        p = make_params(n=5, d=4, c=8, seed=7)
        rng = np.random.default_rng(8)
        walks = rng.integers(0, 5, size=(8, 4))
        ts = np.full(8, 2, dtype=np.int64)
        masks = np.zeros((8, 4), dtype=bool)
        masks[:, 0] = True
        tokens = np.where(masks, walks, 5)
        l0, g = dn.batch_loss_and_grads(p, walks, tokens, ts, masks)
        for _ in range(20):
            dn.adam_step(p, g, lr=1e-2)
            l1, g = dn.batch_loss_and_grads(p, walks, tokens, ts, masks)
        assert l1 < l0


class TestTraining:
    def test_p2_training_learns_deterministic_transitions(self):
        # on the two-node path every walk alternates; once any position is
        # visible the rest are determined, so loss conditioned on t >= 2
        # goes to zero while the full objective approaches the t=1 floor
        # of ln 2 per position (nothing visible, marginals are uniform)
        g = Graph.from_edges(2, np.array([(0, 1)]))
        cfg = dn.DenoiserConfig(
            walk_len=4, embed_dim=16, lr=5e-3, batch_size=32, steps=500, seed=0
        )
        params, log = dn.train_denoiser(g, cfg)
        rng = np.random.default_rng(1)
        cond_losses = []
        for _ in range(100):
            start = int(rng.integers(0, 2))
            walk = np.array([start, 1 - start, start, 1 - start])
            t = int(rng.integers(2, 5))
            sigma = np.argsort(rng.random(4)) + 1
            masked = apply_mask(walk, sigma, t, 2)
            if masked.mask.all():
                continue
            from arrowgen.diffusion import elbo_loss

            cond_losses.append(
                elbo_loss(walk, masked, dn.forward(params, masked.tokens, t))
            )
        assert np.mean(cond_losses) < 0.1
        # full-objective floor: with everything masked the best attainable
        # per-position NLL is ln 2, so late losses sit near but above ~ln 2 / 2
        late = [loss for step, loss, _ in log if step >= 400]
        assert np.mean(late) < 1.6  # well below the 4*ln2 untrained level

    def test_k3_uniform_floor(self):
        # triangle: next node is uniform over the other two, so even a
        # perfect model pays ln 2 per fully-hidden position
        g = Graph.from_edges(3, np.array([(0, 1), (1, 2), (2, 0)]))
        cfg = dn.DenoiserConfig(
            walk_len=4, embed_dim=16, lr=5e-3, batch_size=32, steps=400, seed=1
        )
        params, log = dn.train_denoiser(g, cfg)
        late = [loss for step, loss, _ in log if step >= 300]
        # expected loss at optimum is bounded below by ln 2 (conditional
        # entropy of each hidden position given a visible neighbor)
        assert np.mean(late) > math.log(2) * 0.9

    def test_time_budget_stops_early(self):
        g = Graph.from_edges(2, np.array([(0, 1)]))
        cfg = dn.DenoiserConfig(
            walk_len=4, embed_dim=8, steps=10_000, time_budget_s=0.5, seed=2
        )
        _, log = dn.train_denoiser(g, cfg)
        assert log[-1][0] < 10_000
        assert log[-1][2] / 1e3 < 5.0

    def test_training_deterministic(self):
        g = Graph.from_edges(3, np.array([(0, 1), (1, 2)]))
        cfg = dn.DenoiserConfig(walk_len=4, embed_dim=8, steps=30, seed=3)
        a, la = dn.train_denoiser(g, cfg)
        b, lb = dn.train_denoiser(g, cfg)
        assert [(s, l) for s, l, _ in la] == [(s, l) for s, l, _ in lb]
        for k in a.tensors:
            assert np.array_equal(a.tensors[k], b.tensors[k])

    def test_empty_graph_rejected(self):
        g = Graph.from_edges(3, np.zeros((0, 2)))
        with pytest.raises(ValueError):
            dn.train_denoiser(g, dn.DenoiserConfig(walk_len=4, steps=1))
