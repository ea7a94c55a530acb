"""Acceptance criteria. Each test reports one PASS/FAIL line with its measured value;
the lines are printed in the terminal summary.

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python3 tests/test_acceptance.py``.
"""
import math
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from mlorc.compress import correct_nonneg
from mlorc.harness import config_from_dict, emit_csv, run_experiment
from mlorc.lowrank import RngStream, reconstruct, rsvd
from mlorc.metrics import LoraAdamWState, measured_state_elements, memory_count
from mlorc.optimizers import HyperParams, init_state, optimizer_step
from mlorc.problems import finite_diff_grad, make_logistic, make_quadratic

pytestmark = pytest.mark.acceptance


def report(n, ok, detail):
    line = f"[criterion {n:2d}] {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# Harness configs shared with the determinism check.
CONFIGS = {
    "full_rank_adamw": {
        "seed": 1, "steps": 200, "spectral_k": 0,
        "problem": {"kind": "quadratic", "m": 20, "n": 16, "planted_rank": 8},
        "optimizer": {"kind": "adamw", "alpha": 1e-2, "beta1": 0.9},
    },
    "full_rank_mlorc_adamw": {
        "seed": 1, "steps": 200, "spectral_k": 0,
        "problem": {"kind": "quadratic", "m": 20, "n": 16, "planted_rank": 8},
        "optimizer": {"kind": "mlorc-adamw", "alpha": 1e-2, "beta1": 0.9, "rank": 16},
    },
    "full_rank_lion": {
        "seed": 1, "steps": 200, "spectral_k": 0,
        "problem": {"kind": "quadratic", "m": 20, "n": 16, "planted_rank": 8},
        "optimizer": {"kind": "lion", "alpha": 1e-3},
    },
    "full_rank_mlorc_lion": {
        "seed": 1, "steps": 200, "spectral_k": 0,
        "problem": {"kind": "quadratic", "m": 20, "n": 16, "planted_rank": 8},
        "optimizer": {"kind": "mlorc-lion", "alpha": 1e-3, "rank": 16},
    },
    "spectra": {
        "seed": 8, "steps": 500, "record_every": 10,
        "problem": {"kind": "quadratic", "m": 24, "n": 20, "planted_rank": 4, "noise_std": 1.0},
        "optimizer": {"kind": "mlorc-adamw", "alpha": 1e-2, "rank": 4},
    },
    "galore": {
        "seed": 9, "steps": 500, "record_every": 50,
        "problem": {"kind": "quadratic", "m": 16, "n": 12, "planted_rank": 4},
        "optimizer": {"kind": "galore-adamw", "alpha": 1e-2, "rank": 4, "galore_update_freq": 50},
    },
}


def run_cfg(name, callback=None):
    return run_experiment(config_from_dict(CONFIGS[name]), callback=callback, write=False)


def test_full_rank_equivalence():
    start = time.perf_counter()
    exact = run_cfg("full_rank_adamw")
    comp = run_cfg("full_rank_mlorc_adamw")
    worst = max(
        np.linalg.norm(a.weights - b.weights) / max(np.linalg.norm(b.weights), 1e-300)
        for a, b in zip(comp[1:], exact[1:])
    )

    signs = {}
    for name in ("full_rank_lion", "full_rank_mlorc_lion"):
        recs = run_cfg(name)
        ws = [r.weights for r in recs]
        signs[name] = [np.sign(b - a) for a, b in zip(ws, ws[1:])]
    same_signs = all(np.array_equal(a, b) for a, b in zip(signs["full_rank_lion"], signs["full_rank_mlorc_lion"]))
    elapsed = time.perf_counter() - start
    report(1, worst <= 1e-8 and same_signs and elapsed < 5,
           f"max rel weight diff {worst:.2e} (<= 1e-8), Lion signs identical={same_signs}, {elapsed:.2f}s (< 5s)")


def planted_8x8():
    rng = np.random.default_rng(2)
    u, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    v, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    return (u * np.array([3, 2, 1, 0.5, 0, 0, 0, 0.0])) @ v.T


def test_rsvd_bound():
    start = time.perf_counter()
    a = planted_8x8()
    errs = [np.linalg.norm(reconstruct(rsvd(a, 2, 2, RngStream(s))) - a) for s in range(500)]
    mean = float(np.mean(errs))
    best = math.sqrt(1.25)
    upper = 1.05 * math.sqrt(3) * best
    elapsed = time.perf_counter() - start
    report(2, best - 1e-9 <= mean <= upper and elapsed < 2,
           f"mean error {mean:.6f} in [{best:.6f}, {upper:.6f}], {elapsed:.2f}s (< 2s)")


def test_compression_error_bound():
    start = time.perf_counter()
    prob, _ = make_quadratic(16, 12, seed=3)
    hp = HyperParams(alpha=1e-2, beta1=0.9, beta2=0.99, rank=2, oversample=2)
    gamma = math.sqrt(1 + hp.rank / (hp.oversample - 1))
    checkpoints = (10, 25, 50)
    errs = {t: [] for t in checkpoints}
    bounds = {t: [] for t in checkpoints}
    for rep in range(200):
        w = np.zeros(prob.shape)
        state = init_state("mlorc-lion", prob.shape, hp)
        for t in range(1, 51):
            g = prob.grad(w)
            trace = {}
            w, state = optimizer_step("mlorc-lion", w, g, state, hp, rng=RngStream(rep, 0, t), trace=trace)
            if t in errs:
                errs[t].append(trace["comp_err_m"])
                bounds[t].append(gamma * (1 - hp.beta2) * np.linalg.norm(g))
    ratios = {t: np.mean(errs[t]) / (1.05 * np.mean(bounds[t])) for t in checkpoints}
    elapsed = time.perf_counter() - start
    ok = all(r <= 1.0 for r in ratios.values()) and elapsed < 30
    detail = ", ".join(f"t={t}: mean/(1.05*bound)={r:.3f}" for t, r in ratios.items())
    report(3, ok, f"{detail} (<= 1), {elapsed:.2f}s (< 30s)")


def test_lion_convergence():
    start = time.perf_counter()
    prob, _ = make_quadratic(24, 20, planted_rank=4, seed=4)
    T = 2000
    w = np.zeros(prob.shape)
    delta = prob.loss(w)  # f* = 0 at the planted solution
    alpha = math.sqrt(delta / (prob.smoothness() * w.size * T))
    hp = HyperParams(alpha=alpha, beta1=0.9, beta2=0.99, rank=4, oversample=0)
    state = init_state("mlorc-lion", prob.shape, hp)
    norms = []
    for t in range(1, T + 1):
        g = prob.grad(w)
        norms.append(np.abs(g).sum())
        w, state = optimizer_step("mlorc-lion", w, g, state, hp, rng=RngStream(4, 0, t))
    norms = np.array(norms)
    running = np.cumsum(norms) / np.arange(1, T + 1)
    ratio = running[-1] / running[9]
    ts = np.arange(10, T + 1)
    running_min = np.minimum.accumulate(norms)[9:]
    slope = np.polyfit(np.log(ts), np.log(running_min), 1)[0]
    elapsed = time.perf_counter() - start
    report(4, ratio <= 0.1 and slope <= -0.3 and elapsed < 10,
           f"alpha={alpha:.4g}, avg ratio T/10 {ratio:.3f} (<= 0.1), min-norm slope {slope:.2f} (<= -0.3), "
           f"{elapsed:.2f}s (< 10s)")


def test_memory_accounting():
    mismatches = []
    for m, n in ((20, 16), (64, 64), (128, 32)):
        for r in (2, 4, 8):
            hp = HyperParams(rank=r)
            states = {
                "full-adamw": init_state("adamw", (m, n), hp),
                "lora-adamw": LoraAdamWState.zeros(m, n, r),
                "galore": init_state("galore-adamw", (m, n), hp),
                "mlorc-adamw": init_state("mlorc-adamw", (m, n), hp),
            }
            for method, state in states.items():
                if measured_state_elements(state) != memory_count(method, m, n, r).optimizer_states:
                    mismatches.append((method, m, n, r))
    report(5, not mismatches, f"{36 - len(mismatches)}/36 (method, shape, r) cells match exactly")


def test_second_moment_repair():
    example = correct_nonneg(np.array([[1.0, -2.0], [-4.0, 3.0]]))
    example_ok = np.array_equal(example, np.array([[1.0, 3.0], [3.0, 3.0]]))
    prob, _ = make_quadratic(20, 16, planted_rank=8, seed=6, noise_std=0.5)
    hp = HyperParams(alpha=1e-2, beta1=0.8, rank=2)
    w = np.zeros(prob.shape)
    state = init_state("mlorc-adamw", prob.shape, hp)
    worst, corrected_steps = np.inf, 0
    for t in range(1, 501):
        g = prob.stoch_grad(w, 1, RngStream(6, 1, t)).grad
        trace = {}
        w, state = optimizer_step("mlorc-adamw", w, g, state, hp, rng=RngStream(6, 3, t), trace=trace)
        worst = min(worst, float(trace["v_corrected"].min()))
        corrected_steps += trace["negative_count"] > 0
    report(6, example_ok and worst >= 0,
           f"example exact={example_ok}, min corrected v over 500 steps {worst:.3e} (>= 0), "
           f"{corrected_steps} steps needed repair")


def test_gradient_oracles():
    worst = 0.0
    for i in range(20):
        rng = np.random.default_rng(700 + i)
        quad, _ = make_quadratic(6, 5, seed=i, target_noise=0.2)
        logit = make_logistic(30, 3, 5, seed=i, l2_reg=0.05)
        for prob in (quad, logit):
            w = rng.standard_normal(prob.shape)
            g = prob.grad(w)
            worst = max(worst, np.linalg.norm(finite_diff_grad(prob, w, 1e-5) - g) / np.linalg.norm(g))
    sigma, b, n = 0.5, 2, 10_000
    prob, _ = make_quadratic(6, 5, seed=7, noise_std=sigma)
    w = np.ones(prob.shape)
    mean = np.mean([prob.stoch_grad(w, b, RngStream(7, i)).grad for i in range(n)], axis=0)
    dev = np.linalg.norm(mean - prob.grad(w))
    band = 4 * sigma * math.sqrt(w.size) / math.sqrt(n * b)
    report(7, worst <= 1e-5 and dev <= band,
           f"worst FD rel error {worst:.2e} (<= 1e-5), stochastic mean deviation {dev:.2e} (<= 4-sigma {band:.2e})")


def test_spectra():
    start = time.perf_counter()
    recs = run_cfg("spectra")
    g = np.mean([r.topk_g for r in recs])
    m = np.mean([r.topk_m for r in recs])
    v = np.mean([r.topk_v for r in recs])
    elapsed = time.perf_counter() - start
    report(8, v - g >= 0 and elapsed < 60,
           f"mean top-8 ratio g={g:.3f} m={m:.3f} v={v:.3f}, v-g={v - g:.3f} (>= 0), {elapsed:.2f}s (< 60s)")


def test_galore_sanity():
    worst_orth, worst_span = 0.0, 0.0

    def check(t, w, g, state, trace):
        nonlocal worst_orth, worst_span
        p = state.projector
        worst_orth = max(worst_orth, np.abs(p.T @ p - np.eye(p.shape[1])).max())
        check.prev.append((w, p))

    check.prev = []
    recs = run_cfg("galore", callback=check)
    for (w, p), (w_next, _) in zip(check.prev[:-1], check.prev[1:]):
        d = w_next - w
        worst_span = max(worst_span, np.linalg.norm(d - p @ (p.T @ d)) / max(np.linalg.norm(d), 1e-300))
    decreased = recs[-1].loss < recs[0].loss
    report(9, worst_orth <= 1e-10 and worst_span <= 1e-10 and decreased,
           f"max |P^T P - I| {worst_orth:.1e}, max off-span increment {worst_span:.1e} (<= 1e-10), "
           f"loss {recs[0].loss:.3g} -> {recs[-1].loss:.3g}")


def test_determinism(tmp_path):
    differing = []
    for name in CONFIGS:
        blobs = []
        for rep in range(2):
            path = tmp_path / f"{name}_{rep}.csv"
            emit_csv(run_cfg(name), path)
            blobs.append(path.read_bytes())
        if blobs[0] != blobs[1]:
            differing.append(name)
    report(10, not differing, f"{len(CONFIGS) - len(differing)}/{len(CONFIGS)} configs byte-identical on rerun")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
