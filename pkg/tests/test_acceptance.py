"""Acceptance gate: one check per shipping criterion, one verdict line each.

Criteria needing the real citation-network datasets skip with an explicit
reason when the edge lists are not present under ARROWGEN_DATA_DIR.
"""

import json
import math
import time

import numpy as np
import pytest

import conftest
from arrowgen import denoiser as dn
from arrowgen import generator as gen
from arrowgen import gnn
from arrowgen import graph as gr
from arrowgen import metrics as mt
from arrowgen.cli import main as cli_main
from arrowgen.diffusion import (
    apply_mask,
    elbo_loss,
    enumerate_expected_loss,
    sample_t_sigma,
    sample_walk_conditioned,
    sample_walk_conditioned_batch,
)
from conftest import (
    brute_assortativity,
    brute_clustering,
    brute_triangles,
    dataset_path,
    random_er_graph,
)


def record(num: int, name: str, passed: bool, detail: str = ""):
    verdict = "PASS" if passed else "FAIL"
    suffix = f" ({detail})" if detail else ""
    conftest.acceptance_lines.append(f"[criterion {num}] {name}: {verdict}{suffix}")
    assert passed, f"criterion {num} ({name}) failed{suffix}"


def record_skip(num: int, name: str, reason: str):
    conftest.acceptance_lines.append(f"[criterion {num}] {name}: SKIP ({reason})")


GROUND_TRUTH = {
    # max_degree, assortativity, triangles, power_law, avg_cc, global_cc
    "citeseer_lcc.edges": (85, -0.165, 771, 2.23, 0.153, 0.007),
    "cora_ml_lcc.edges": (246, -0.077, 5247, 1.77, 0.278, 0.004),
}


@pytest.mark.parametrize("fname", sorted(GROUND_TRUTH))
def test_criterion_1_ground_truth_metrics(tmp_path, fname):
    name = f"ground-truth metrics ({fname.split('_')[0]})"
    try:
        path = dataset_path(fname)
    except BaseException:
        record_skip(1, name, f"dataset file {conftest.DATA_DIR / fname} not present")
        raise
    max_deg, assort, tris, alpha, avg_cc, glob_cc = GROUND_TRUTH[fname]
    prep = tmp_path / "prep"
    assert cli_main(["prepare", "--edges", str(path), "--out", str(prep),
                     "--val-frac", "0.0", "--test-frac", "0.0"]) == 0
    ev = tmp_path / "eval"
    assert cli_main(["evaluate", "--prepared", str(prep), "--out", str(ev),
                     "--original-only"]) == 0
    r = json.loads((ev / "report.json").read_text())["original"]
    checks = [
        ("max_degree", r["max_degree"] == max_deg),
        ("triangles", r["triangle_count"] == tris),
        ("avg_clustering", abs(r["avg_clustering"] - avg_cc) <= 0.002),
        ("global_clustering", abs(r["global_clustering"] - glob_cc) <= 0.001),
        ("assortativity", abs(r["assortativity"] - assort) <= 0.005),
        ("power_law", abs(r["power_law_exp"] - alpha) <= 0.1),
    ]
    bad = [label for label, ok in checks if not ok]
    record(1, name, not bad, "mismatch: " + ", ".join(bad) if bad else "all six metrics")


def test_criterion_2_metric_oracle_equivalence():
    rng = np.random.default_rng(42)
    worst = 0.0
    for i in range(50):
        n = int(rng.integers(4, 31))
        g = random_er_graph(n, float(rng.uniform(0.1, 0.5)), rng)
        deg = g.degrees()
        # independent degree oracle from the dense adjacency
        brute_deg = conftest.adjacency(g).sum(axis=1)
        assert np.array_equal(deg, brute_deg)
        assert int(deg.max()) == int(brute_deg.max())
        assert mt.triangle_count(g) == brute_triangles(g)
        avg, glob = mt.clustering_coefficients(g)
        b_avg, b_glob = brute_clustering(g)
        worst = max(worst, abs(avg - b_avg), abs(glob - b_glob))
        ours_a, brute_a = mt.assortativity(g), brute_assortativity(g)
        if brute_a is None:
            assert ours_a is None
        else:
            worst = max(worst, abs(ours_a - brute_a))
        pos = deg[deg > 0]
        if len(pos):
            brute_alpha = 1 + len(pos) / sum(math.log(d / 0.5) for d in pos)
            worst = max(worst, abs(mt.power_law_exponent(pos) - brute_alpha))
    record(2, "metric oracle equivalence on 50 random graphs", worst < 1e-9,
           f"worst abs diff {worst:.1e}")


def test_criterion_3_diffusion_core():
    rng = np.random.default_rng(0)
    d = 8
    walk = np.arange(d)
    # mask-count law: exactly D - t + 1 masked positions on every draw
    law_ok = True
    for _ in range(10_000):
        t, sigma = sample_t_sigma(d, rng)
        m = apply_mask(walk, sigma, t, num_nodes=d)
        if int((~m.mask).sum()) != d - t + 1:
            law_ok = False
            break

    # enumeration vs Monte-Carlo for D=3, N=2
    d3, n2 = 3, 2
    w3 = np.array([1, 0, 1])
    base = np.random.default_rng(1).normal(size=(d3, n2 + 1, d3, n2))

    def logits_fn(tokens, t):
        return base[np.arange(d3), tokens, t - 1]

    exact = enumerate_expected_loss(w3, n2, logits_fn)
    samples = np.empty(100_000)
    for i in range(len(samples)):
        t, sigma = sample_t_sigma(d3, rng)
        masked = apply_mask(w3, sigma, t, n2)
        samples[i] = elbo_loss(w3, masked, logits_fn(masked.tokens, t))
    se = samples.std(ddof=1) / np.sqrt(len(samples))
    mc_ok = abs(samples.mean() - exact) < 3 * se

    # conditional sampler: position 1 fixed, never rescored or resampled
    first_tokens = []

    def f_full(tokens, t):
        first_tokens.append(int(tokens[0]))
        return np.zeros((6, 4))

    fixed_ok = True
    for start in range(4):
        for _ in range(50):
            out = sample_walk_conditioned(f_full, start, 6, 4, rng)
            fixed_ok &= int(out[0]) == start
        fixed_ok &= all(tok == start for tok in first_tokens)
        first_tokens.clear()

    scored_positions = []

    def f_rows(tokens, t, positions):
        scored_positions.extend(int(k) for k in positions)
        return np.zeros((len(tokens), 4))

    walks = sample_walk_conditioned_batch(f_rows, np.array([0, 1, 2, 3]), 6, 4, rng)
    fixed_ok &= np.array_equal(walks[:, 0], [0, 1, 2, 3])
    fixed_ok &= 0 not in scored_positions

    record(
        3,
        "diffusion core (mask law, enumeration vs MC, fixed start)",
        law_ok and mc_ok and fixed_ok,
        f"MC gap {abs(samples.mean() - exact):.2e} vs 3se {3 * se:.2e}",
    )


def test_criterion_4_gradient_correctness():
    rng = np.random.default_rng(2)
    worst = 0.0

    def rel(a, b):
        return abs(a - b) / max(abs(a), abs(b), 1e-8)

    # denoiser: 10 probes over randomly chosen tensors
    params = dn.init_denoiser(5, 4, embed_dim=6, seed=3)
    walk = rng.integers(0, 5, size=4)
    t, sigma = sample_t_sigma(4, rng)
    masked = apply_mask(walk, sigma, t, 5)
    args = (walk[None, :], masked.tokens[None, :], np.array([t]), masked.mask[None, :])
    _, grads = dn.batch_loss_and_grads(params, *args)
    eps = 1e-5
    names = list(params.tensors)
    for _ in range(10):
        name = names[rng.integers(len(names))]
        flat = params.tensors[name].ravel()
        i = int(rng.integers(flat.size))
        old = flat[i]
        flat[i] = old + eps
        lp, _ = dn.batch_loss_and_grads(params, *args)
        flat[i] = old - eps
        lm, _ = dn.batch_loss_and_grads(params, *args)
        flat[i] = old
        fd = (lp - lm) / (2 * eps)
        if abs(fd) > 1e-6:
            worst = max(worst, rel(grads[name].ravel()[i], fd))

    # GCN: 10 probes
    g = conftest.random_connected_graph(8, 0.3, rng)
    x = rng.normal(size=(8, 5))
    gp = gnn.init_gcn(5, hidden_dim=4, out_dim=3, seed=4)
    edges = g.undirected_edges()[:5]
    labels = np.array([1, 0, 1, 1, 0])
    _, ggrads = gnn.bce_loss_and_grads(gp, g, x, edges, labels)
    for _ in range(10):
        name = ("W1", "W2")[rng.integers(2)]
        flat = gp.tensors[name].ravel()
        i = int(rng.integers(flat.size))
        old = flat[i]
        flat[i] = old + eps
        lp, _ = gnn.bce_loss_and_grads(gp, g, x, edges, labels)
        flat[i] = old - eps
        lm, _ = gnn.bce_loss_and_grads(gp, g, x, edges, labels)
        flat[i] = old
        fd = (lp - lm) / (2 * eps)
        if abs(fd) > 1e-6:
            worst = max(worst, rel(ggrads[name].ravel()[i], fd))

    record(4, "gradients vs central finite differences", worst < 1e-3,
           f"worst rel err {worst:.1e}")


@pytest.fixture(scope="module")
def citeseer_models(tmp_path_factory):
    try:
        path = dataset_path("citeseer_lcc.edges")
    except BaseException:
        reason = f"dataset file {conftest.DATA_DIR / 'citeseer_lcc.edges'} not present"
        record_skip(5, "end-to-end quality on citation network", reason)
        record_skip(6, "edge count shrinks from 1 to 5 refinement iterations", reason)
        raise
    root = tmp_path_factory.mktemp("citeseer")
    prep = root / "prep"
    assert cli_main(["prepare", "--edges", str(path), "--out", str(prep),
                     "--val-frac", "0.1", "--test-frac", "0.05", "--seed", "0"]) == 0
    models = root / "models"
    assert cli_main(["train", "--prepared", str(prep), "--out", str(models),
                     "--walk-len", "16", "--embed-dim", "64",
                     "--time-budget-s", "1800", "--seed", "0"]) == 0
    return root


def test_criterion_5_end_to_end_citeseer(citeseer_models):
    name = "end-to-end quality on citation network"
    root = citeseer_models
    runs = root / "runs"
    t0 = time.perf_counter()
    assert cli_main(["generate", "--prepared", str(root / "prep"),
                     "--models", str(root / "models"), "--out", str(runs),
                     "--runs", "10", "--iterations", "10", "--seed", "0"]) == 0
    per_graph = (time.perf_counter() - t0) / 10
    ev = root / "eval"
    assert cli_main(["evaluate", "--prepared", str(root / "prep"),
                     "--runs", str(runs), "--out", str(ev)]) == 0
    m = json.loads((ev / "report.json").read_text())["generated_mean"]
    checks = [
        ("edge_overlap>=0.2", m["edge_overlap"] >= 0.20),
        ("triangles in [200,2500]", 200 <= m["triangle_count"] <= 2500),
        ("power_law within 0.35 of 2.23", abs(m["power_law_exp"] - 2.23) <= 0.35),
        ("generation <= 60s/graph", per_graph <= 60),
    ]
    bad = [label for label, ok in checks if not ok]
    record(5, name, not bad, ", ".join(bad) if bad else
           f"overlap {m['edge_overlap']:.3f}, tri {m['triangle_count']:.0f}")


def test_criterion_6_iteration_sweep_trend(citeseer_models):
    from arrowgen import checkpoint as ck
    from arrowgen.generator import generate

    root = citeseer_models
    lcc = gr.load_edge_list((root / "prep" / "lcc.edges").read_text())
    x = gr.load_features((root / "prep" / "features.txt").read_text())
    dn_params = ck.load_denoiser(root / "models" / "denoiser.ckpt")
    gnn_params = ck.load_gcn(root / "models" / "gnn.ckpt")
    d_target = lcc.degrees()
    counts = {1: [], 5: []}
    for l in counts:
        for k in range(10):
            g, _ = generate(dn_params, gnn_params, x, d_target, l, seed=10_000 * l + k)
            counts[l].append(g.num_undirected_edges)
    m1, m5 = np.mean(counts[1]), np.mean(counts[5])
    record(6, "edge count shrinks from 1 to 5 refinement iterations", m1 > m5,
           f"mean edges L=1: {m1:.0f}, L=5: {m5:.0f}")


def test_criterion_7_generation_time_scaling():
    sizes = [500, 1000, 2000, 4000]
    times = []
    for n in sizes:
        half = n // 2
        # two equal blocks, average degree held near 10 across sizes
        p_in = 8.0 / half
        p_out = 2.0 / half
        g = gr.sbm_generate([half, half], p_in, p_out, seed=n)
        x = gr.positional_encodings(n, 32)
        den = dn.init_denoiser(n, 16, embed_dim=64, seed=0)
        gcn = gnn.init_gcn(32, hidden_dim=100, out_dim=10, seed=0)
        best = np.inf
        for rep in range(2):
            _, manifest = gen.generate(
                den, gcn, x, g.degrees(), num_iterations=2, seed=rep
            )
            best = min(best, manifest["total_wall_s"])
        times.append(best)
    slope = np.polyfit(np.log(sizes), np.log(times), 1)[0]
    record(7, "generation wall time vs graph size (log-log slope <= 1.3)",
           slope <= 1.3, f"slope {slope:.2f}, times {[round(t, 2) for t in times]}")


def test_criterion_8_sbm_structure_recovery():
    sizes = [60, 100, 200]
    sbm = gr.sbm_generate(sizes, 0.1345, 0.0064, seed=7)
    split = gr.split_edges(sbm, 0.1, 0.05, seed=7)
    x = gr.positional_encodings(sbm.num_nodes, 64)
    dcfg = dn.DenoiserConfig(
        walk_len=8, embed_dim=64, batch_size=128, steps=6000, lr=2e-3, seed=0
    )
    params, _ = dn.train_denoiser(split.train_graph(), dcfg)
    gp, _ = gnn.train_gnn(split, x, gnn.GcnConfig(steps=400, seed=0))

    block = gr.sbm_block_of(sizes)
    intra_pairs = sum(s * (s - 1) // 2 for s in sizes)
    inter_pairs = (sum(sizes) ** 2 - sum(s * s for s in sizes)) // 2
    intra_ok = 0
    tri_ok = 0
    for k in range(10):
        g, _ = gen.generate(params, gp, x, sbm.degrees(), num_iterations=5, seed=100 + k)
        e = g.undirected_edges()
        n_intra = int((block[e[:, 0]] == block[e[:, 1]]).sum()) if len(e) else 0
        n_inter = len(e) - n_intra
        intra_ok += n_intra / intra_pairs > n_inter / inter_pairs
        tri_ok += 3623 / 2 <= mt.triangle_count(g) <= 3623 * 2
    record(
        8,
        "block structure recovery on 360-node benchmark",
        intra_ok >= 8 and tri_ok >= 5,
        f"intra>inter in {intra_ok}/10, triangles within 2x of 3623 in {tri_ok}/10",
    )
