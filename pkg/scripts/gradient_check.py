"""Compare tape gradients of the joint loss with central differences on random small instances."""
import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
from oracles import central_differences, random_instance, relative_error  # noqa: E402

from hsusynth.network import joint_gradients  # noqa: E402


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--instances", type=int, default=20)
    parser.add_argument("--eps", type=float, default=1e-5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    start = time.perf_counter()
    worst = {}
    for i in range(args.instances):
        params, enc = random_instance(np.random.default_rng(args.seed + i), batch=2)
        _, grads = joint_gradients(enc, params)
        numeric = central_differences(params, enc, eps=args.eps)
        for name in grads:
            worst[name] = max(worst.get(name, 0.0), relative_error(grads[name], numeric[name]))
    for name, err in sorted(worst.items(), key=lambda kv: -kv[1]):
        print(f"{name:16s} {err:.2e}")
    print(f"{args.instances} instances in {time.perf_counter() - start:.1f}s; worst {max(worst.values()):.2e}")


if __name__ == "__main__":
    main()
