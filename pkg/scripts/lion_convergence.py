"""Deterministic Lion vs MLorc-Lion on a convex quadratic.

Step size alpha = sqrt(delta / (L * d * T)); prints the running average of
the l1,1 gradient norm at a few checkpoints for several ranks.
"""
import argparse
import math

import numpy as np

from mlorc.lowrank import RngStream
from mlorc.optimizers import HyperParams, init_state, optimizer_step
from mlorc.problems import make_quadratic


def running_avg(kind, prob, hp, steps, seed):
    w = np.zeros(prob.shape)
    state = init_state(kind, prob.shape, hp)
    norms = []
    for t in range(1, steps + 1):
        g = prob.grad(w)
        norms.append(np.abs(g).sum())
        w, state = optimizer_step(kind, w, g, state, hp, rng=RngStream(seed, 0, t))
    return np.cumsum(norms) / np.arange(1, steps + 1)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--m", type=int, default=24)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--planted-rank", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    prob, _ = make_quadratic(args.m, args.n, planted_rank=args.planted_rank, seed=args.seed)
    T = args.steps
    alpha = math.sqrt(prob.loss(np.zeros(prob.shape)) / (prob.smoothness() * prob.shape[0] * prob.shape[1] * T))
    checkpoints = sorted({t for t in (10, 100, 500, 1000) if t < T} | {T})
    print(f"alpha = {alpha:.4g}")
    print(f"{'run':<16}" + "".join(f"{'t=' + str(t):>12}" for t in checkpoints))
    runs = [("lion", 1)] + [("mlorc-lion", r) for r in (1, 2, 4, 8)]
    for kind, r in runs:
        hp = HyperParams(alpha=alpha, beta1=0.9, beta2=0.99, rank=r)
        avg = running_avg(kind, prob, hp, T, args.seed)
        label = kind if kind == "lion" else f"{kind} r={r}"
        print(f"{label:<16}" + "".join(f"{avg[t - 1]:>12.4g}" for t in checkpoints))


if __name__ == "__main__":
    main()
