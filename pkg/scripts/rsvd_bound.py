"""Monte-Carlo RSVD error versus oversampling on a planted-spectrum matrix.

Compares the mean Frobenius error with the best rank-r error and with the
expected-error bound sqrt(1 + r/(p-1)) * tail.
"""
import argparse
import math

import numpy as np

from mlorc.lowrank import RngStream, reconstruct, rsvd


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=32)
    ap.add_argument("--rank", type=int, default=4)
    ap.add_argument("--decay", type=float, default=0.7, help="geometric singular value decay")
    ap.add_argument("--trials", type=int, default=300)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    u, _ = np.linalg.qr(rng.standard_normal((args.size, args.size)))
    v, _ = np.linalg.qr(rng.standard_normal((args.size, args.size)))
    spectrum = args.decay ** np.arange(args.size)
    a = (u * spectrum) @ v.T
    tail = math.sqrt(np.sum(spectrum[args.rank:] ** 2))

    print(f"best rank-{args.rank} error {tail:.5f}")
    print(f"{'p':>3}{'mean error':>13}{'mean/best':>11}{'bound':>10}")
    for p in (0, 2, 4, 8):
        errs = [np.linalg.norm(reconstruct(rsvd(a, args.rank, p, RngStream(s))) - a) for s in range(args.trials)]
        bound = f"{math.sqrt(1 + args.rank / (p - 1)) * tail:10.5f}" if p >= 2 else f"{'-':>10}"
        print(f"{p:>3}{np.mean(errs):>13.5f}{np.mean(errs) / tail:>11.3f}{bound}")


if __name__ == "__main__":
    main()
