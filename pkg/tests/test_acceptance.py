"""Exit criteria for the build, one test per criterion.

Each test prints a PASS/FAIL line (also collected into the terminal summary).
"""

import time

import numpy as np

from nexttdnn.blocks import grn, ts_convnext_block, ffn, msc
from nexttdnn.model import ASPParams, Model, ModelConfig, asp_pool, count_macs, count_params
from nexttdnn.ops import conv1d_general, dconv1d, layer_norm, pconv1d
from nexttdnn.pipeline import embed_batch, embed_samples, time_per_segment
from nexttdnn.scoring import compute_eer, compute_mindcf, dcf_at
from conftest import ACCEPTANCE_LINES, random_block
from oracles import brute_force_eer, naive_asp, naive_block, naive_conv, naive_dconv, naive_pconv, rel_err

LIGHT, FULL = "ts_convnext_light", "ts_convnext"
FRAMES_3S = 298

PARAMS_TABLE = [
    (LIGHT, 192, 1, 1.6e6), (LIGHT, 128, 3, 1.6e6), (LIGHT, 384, 1, 5.9e6), (LIGHT, 256, 3, 6.0e6),
    (FULL, 192, 1, 1.8e6), (FULL, 128, 3, 1.9e6), (FULL, 384, 1, 6.7e6), (FULL, 256, 3, 7.1e6),
]
MACS_TABLE = [
    (LIGHT, 192, 1, 0.417e9), (LIGHT, 128, 3, 0.441e9), (LIGHT, 384, 1, 1.609e9), (LIGHT, 256, 3, 1.695e9),
    (FULL, 192, 1, 0.478e9), (FULL, 128, 3, 0.519e9), (FULL, 384, 1, 1.862e9), (FULL, 256, 3, 2.027e9),
]


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_1_parameter_counts():
    worst = 0.0
    rows = []
    for variant, C, B, ref in PARAMS_TABLE:
        ours = count_params(ModelConfig(C=C, B=B, variant=variant))
        dev = ours / ref - 1
        worst = max(worst, abs(dev))
        rows.append(f"{'l' if variant == LIGHT else 'f'}{C}/{B}:{ours / 1e6:.2f}M({dev:+.1%})")
    report(1, "params within 10% of reference", worst <= 0.10, f"worst {worst:.1%}; " + " ".join(rows))


def test_2_mac_counts():
    worst = 0.0
    rows = []
    for variant, C, B, ref in MACS_TABLE:
        ours = count_macs(ModelConfig(C=C, B=B, variant=variant), FRAMES_3S)
        dev = ours / ref - 1
        worst = max(worst, abs(dev))
        rows.append(f"{'l' if variant == LIGHT else 'f'}{C}/{B}:{ours / 1e9:.3f}G({dev:+.1%})")
    report(2, "MACs at T=298 within 15% of reference", worst <= 0.15, f"worst {worst:.1%}; " + " ".join(rows))


def test_3_kernel_oracles():
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst = {"pconv1d": 0.0, "dconv1d": 0.0, "conv1d_general": 0.0}
    n = 100
    for i in range(n):
        c_in, c_out, T = rng.integers(1, 9), rng.integers(1, 9), rng.integers(1, 33)
        K = [1, 3, 4, 7, 65][i % 5]
        x = rng.normal(size=(c_in, T))
        w, b = rng.normal(size=(c_out, c_in)), rng.normal(size=c_out)
        worst["pconv1d"] = max(worst["pconv1d"], rel_err(pconv1d(x, w, b), naive_pconv(x, w, b)))
        k, kb = rng.normal(size=(c_in, K)), rng.normal(size=c_in)
        worst["dconv1d"] = max(worst["dconv1d"], rel_err(dconv1d(x, k, kb), naive_dconv(x, k, kb)))
        w3 = rng.normal(size=(c_out, c_in, K))
        worst["conv1d_general"] = max(
            worst["conv1d_general"], rel_err(conv1d_general(x, w3, b), naive_conv(x, w3, b))
        )
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-6 and elapsed < 10
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(3, f"{n} random instances per kernel within 1e-6 rel", ok, f"{detail}; {elapsed:.2f}s")


def test_4_block_equations():
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    worst_block = worst_loop = worst_perm = worst_homo = 0.0
    identity_exact = True
    for i in range(50):
        kernels = [(7, 65), (7, 15, 33, 65), (65,)][i % 3]
        p = random_block(rng, C=8, kernel_set=kernels)
        x = rng.normal(size=(8, int(rng.integers(1, 33)))).astype(np.float32)
        mid = x + msc(layer_norm(x, *p.norm1), p)
        step = mid + ffn(layer_norm(mid, *p.norm2), p)
        y = ts_convnext_block(x, p)
        worst_block = max(worst_block, rel_err(y, step))
        worst_loop = max(worst_loop, rel_err(y, naive_block(x, p)))

        ch, T = int(rng.integers(1, 33)), int(rng.integers(1, 33))
        G = rng.normal(size=(ch, T)).astype(np.float32)
        identity_exact &= np.array_equal(grn(G, np.zeros(ch), np.zeros(ch)), G)
        g, bt = rng.normal(size=ch), rng.normal(size=ch)
        perm = rng.permutation(T)
        worst_perm = max(worst_perm, rel_err(grn(G[:, perm], g, bt), grn(G, g, bt)[:, perm]))
        c = float(rng.uniform(0.01, 100))
        zero = np.zeros(ch)
        worst_homo = max(worst_homo, rel_err(grn(c * G.astype(np.float64), g, zero), c * grn(G, g, zero).astype(np.float64)))
    elapsed = time.perf_counter() - t0
    ok = worst_block <= 1e-6 and worst_loop <= 1e-6 and identity_exact and worst_perm <= 1e-6 and worst_homo <= 1e-6 and elapsed < 10
    report(
        4, "block recursion, GRN identity/equivariance/homogeneity", ok,
        f"block vs steps {worst_block:.1e}, vs loops {worst_loop:.1e}, zero-GRN identity exact={identity_exact}, "
        f"perm {worst_perm:.1e}, homog {worst_homo:.1e}; {elapsed:.2f}s",
    )


def test_5_asp_statistics():
    rng = np.random.default_rng(5)
    uniform = ASPParams(np.zeros((4, 1)), np.zeros(4), np.zeros((1, 4)), np.full(1, 0.3))
    hand = asp_pool([[1.0, 3.0]], uniform)
    hand_err = float(np.max(np.abs(hand - [2.0, 1.0])))
    worst = 0.0
    for _ in range(20):
        C, d, T = int(rng.integers(1, 9)), int(rng.integers(1, 6)), int(rng.integers(1, 33))
        H = rng.normal(size=(C, T))
        p = ASPParams(rng.normal(size=(d, C)), rng.normal(size=d), rng.normal(size=(C, d)), rng.normal(size=C))
        worst = max(worst, rel_err(asp_pool(H, p), naive_asp(H, p)))
    ok = hand_err <= 1e-6 and worst <= 1e-6
    report(5, "ASP mean/std vs hand values and loop oracle", ok,
           f"[[1,3]] -> mu={hand[0]:.6f} sigma={hand[1]:.6f}; oracle {worst:.1e}")


def test_6_metrics():
    rng = np.random.default_rng(6)
    eer_ok = dcf_ok = True
    worst_gap = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 201))
        n_t = int(rng.integers(1, n))
        labels = np.r_[np.ones(n_t, int), np.zeros(n - n_t, int)]
        scores = rng.normal(size=n) + labels * rng.uniform(0, 3)
        eer, _ = compute_eer(scores, labels)
        tol = 1 / (2 * min(n_t, n - n_t))
        gap = abs(eer - brute_force_eer(scores, labels))
        worst_gap = max(worst_gap, gap / tol)
        eer_ok &= gap <= tol
        min_dcf, _ = compute_mindcf(scores, labels)
        probes = rng.uniform(scores.min() - 1, scores.max() + 1, size=20)
        dcf_ok &= bool(np.all(min_dcf <= dcf_at(scores, labels, probes) + 1e-12))
    hand_eer, _ = compute_eer([0.9, 0.8, 0.7, 0.4, 0.6, 0.3, 0.2, 0.1], [1, 1, 1, 1, 0, 0, 0, 0])
    flat_dcf, _ = compute_mindcf([0.5] * 10, [1] * 3 + [0] * 7)
    ok = eer_ok and dcf_ok and hand_eer == 0.25 and flat_dcf == 1.0
    report(6, "EER vs brute force, minDCF bound, hand sets", ok,
           f"worst EER gap {worst_gap:.2f} x tolerance; minDCF<=probes {dcf_ok}; "
           f"hand EER {hand_eer}; identical-score minDCF {flat_dcf}")


def test_7_end_to_end_smoke():
    model = Model.random(ModelConfig(C=128, B=3), seed=7)
    noise = np.random.default_rng(7).uniform(-0.5, 0.5, 48000)
    embed_samples(noise, model)  # warm-up
    t0 = time.perf_counter()
    a = embed_samples(noise, model)
    elapsed = time.perf_counter() - t0
    b = embed_samples(noise, model)
    pool1 = embed_batch(model, [noise, noise[::-1].copy()], workers=1)
    pool8 = embed_batch(model, [noise, noise[::-1].copy()], workers=8)
    ok = (
        a.shape == (192,)
        and bool(np.all(np.isfinite(a)))
        and np.array_equal(a, b)
        and all(np.array_equal(x, y) for x, y in zip(pool1, pool8))
        and np.array_equal(pool1[0], a)
        and elapsed < 1.0
    )
    report(7, "seeded C=128/B=3 model on 3 s noise", ok,
           f"dim {a.shape[0]}, finite, bitwise-stable across runs and 1/8 workers; {elapsed * 1000:.0f} ms")


def test_8_timing_stability():
    model = Model.random(ModelConfig(C=128, B=3), seed=8)
    noise = np.random.default_rng(8).uniform(-0.5, 0.5, 48000)
    time_per_segment(model, noise, repeats=2)  # warm-up
    runs = np.array([time_per_segment(model, noise, repeats=3) for _ in range(5)])
    spread = float(np.max(np.abs(runs / np.median(runs) - 1)))
    report(8, "per-segment wall clock stable within 20% over 5 runs (EER/minDCF/RTF reproduction out of scope)",
           spread <= 0.20, f"median {np.median(runs) * 1000:.1f} ms, max deviation {spread:.1%}")
