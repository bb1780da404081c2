"""Compare the compiled kernels against the pure-numpy fallback.

Per-kernel timings import both implementations side by side; the end-to-end
row re-runs episodic evaluation in a subprocess per backend because the
backend is chosen once at import time (FEWSCALE_KERNELS).

Usage: python3 benchmarks/bench_kernels.py [--way 5] [--shot 5] [--dim 512]
       [--queries 75] [--repeats 2000] [--skip-end-to-end]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from fewscale import _kernels_py

try:
    from fewscale import _kernels
except ImportError:
    _kernels = None


def episode_arrays(way: int, shot: int, dim: int, queries: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    support = rng.standard_normal((way * shot, dim))
    slots = np.repeat(np.arange(way, dtype=np.int64), shot)
    qvecs = rng.standard_normal((queries, dim))
    weights = rng.uniform(-0.3, 0.3, size=(way, dim))
    bias = rng.uniform(-0.3, 0.3, size=way)
    return support, slots, qvecs, weights, bias


def time_call(fn, repeats: int) -> float:
    """Best-of-3 average seconds per call."""
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best


def bench_kernels(args) -> None:
    support, slots, qvecs, weights, bias = episode_arrays(
        args.way, args.shot, args.dim, args.queries
    )
    protos = _kernels_py.proto_means(support, slots, args.way)

    def cases(mod):
        return {
            "proto_means": lambda: mod.proto_means(support, slots, args.way),
            "proto_predict": lambda: mod.proto_predict(protos, qvecs),
            "matching_predict": lambda: mod.matching_predict(
                support, slots, qvecs, args.way
            ),
            "head_loss": lambda: mod.head_loss(weights, bias, support, slots),
            "head_grad": lambda: mod.head_grad(weights, bias, support, slots),
            "head_fit": lambda: mod.head_fit(
                weights.copy(), bias.copy(), support, slots, 5, 0.01
            ),
            "head_predict": lambda: mod.head_predict(weights, bias, qvecs),
        }

    py = cases(_kernels_py)
    cy = cases(_kernels) if _kernels is not None else None
    print(
        f"episode: way={args.way} shot={args.shot} dim={args.dim} "
        f"queries={args.queries}, {args.repeats} calls per timing"
    )
    header = f"{'kernel':18s} {'python':>12s} {'cython':>12s} {'speedup':>9s}"
    print(header)
    print("-" * len(header))
    for name, py_fn in py.items():
        t_py = time_call(py_fn, args.repeats)
        if cy is None:
            print(f"{name:18s} {t_py * 1e6:10.1f}us {'n/a':>12s} {'n/a':>9s}")
            continue
        t_cy = time_call(cy[name], args.repeats)
        print(
            f"{name:18s} {t_py * 1e6:10.1f}us {t_cy * 1e6:10.1f}us "
            f"{t_py / t_cy:8.1f}x"
        )


END_TO_END = """
import time
import numpy as np
from fewscale import EpisodeConfig, kernels, run_evaluation
from fewscale.datasets import EmbeddingDataset

classes, per_class, dim = 20, 40, {dim}
rng = np.random.default_rng(1)
centers = rng.normal(scale=2.0, size=(classes, dim))
vectors = (centers[:, None, :] + rng.normal(size=(classes, per_class, dim)))
ds = EmbeddingDataset(
    dim=dim,
    sample_ids=np.arange(classes * per_class, dtype=np.uint64),
    class_ids=np.repeat(np.arange(classes, dtype=np.uint32), per_class),
    vectors=vectors.reshape(-1, dim).astype(np.float32),
)
cfg = EpisodeConfig(way=5, shot=5, queries_per_class=5, trials=200, master_seed=3)
t0 = time.perf_counter()
run_evaluation(ds, cfg)
print(f"{{kernels.backend_name()}} {{time.perf_counter() - t0:.3f}}")
"""


def bench_end_to_end(args) -> None:
    print(
        f"\nend-to-end: 200 trials x 3 methods, 5-way 5-shot, dim={args.dim}"
    )
    for backend in ("python", "cython"):
        if backend == "cython" and _kernels is None:
            print("cython backend unavailable; skipping")
            continue
        env = dict(os.environ, FEWSCALE_KERNELS=backend)
        proc = subprocess.run(
            [sys.executable, "-c", END_TO_END.format(dim=args.dim)],
            capture_output=True,
            text=True,
            env=env,
        )
        if proc.returncode != 0:
            print(f"{backend}: failed\n{proc.stderr}", file=sys.stderr)
            continue
        name, seconds = proc.stdout.split()
        print(f"{name:8s} {float(seconds):.3f}s")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--way", type=int, default=5)
    parser.add_argument("--shot", type=int, default=5)
    parser.add_argument("--dim", type=int, default=512)
    parser.add_argument("--queries", type=int, default=75)
    parser.add_argument("--repeats", type=int, default=2000)
    parser.add_argument("--skip-end-to-end", action="store_true")
    args = parser.parse_args()
    if _kernels is None:
        print("compiled extension not importable; python timings only")
    bench_kernels(args)
    if not args.skip_end_to_end:
        bench_end_to_end(args)


if __name__ == "__main__":
    main()
