"""Time the compiled activation kernels against the NumPy fallback.

Runs each elementwise kernel over LSTM-shaped arrays for both backends and
then a full tape forward+backward so the end-to-end effect is visible too.
Matrix products ride on BLAS either way, so the interesting numbers are the
activation loops.

Usage:
    python3 benchmarks/bench_kernels.py [--rows 512] [--repeats 200] [--csv]
"""
import argparse
import time
from datetime import datetime, timezone

import numpy as np

from gridcast import kernels
from gridcast.features import WindowSample
from gridcast.forecaster import Hyperparams, _CompiledNet, _init_weights


def best_of(fn, repeats: int) -> float:
    """Best wall time in seconds; best-of beats mean under CPU noise."""
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(rows: int):
    rng = np.random.default_rng(0)
    gates = rng.normal(0.0, 2.0, (rows, 256))      # batch x 4H gate block
    act = kernels.sigmoid(gates)
    grad = rng.normal(0.0, 1.0, gates.shape)
    fc = rng.normal(0.0, 2.0, (rows * 3, 64))
    fc_grad = rng.normal(0.0, 1.0, fc.shape)
    return [
        ("sigmoid", lambda: kernels.sigmoid(gates)),
        ("sigmoid_grad", lambda: kernels.sigmoid_grad(act, grad)),
        ("tanh", lambda: kernels.tanh(gates)),
        ("tanh_grad", lambda: kernels.tanh_grad(act, grad)),
        ("softplus", lambda: kernels.softplus(gates)),
        ("softplus_grad", lambda: kernels.softplus_grad(gates, grad)),
        ("leaky_relu", lambda: kernels.leaky_relu(fc, 0.1)),
        ("leaky_relu_grad", lambda: kernels.leaky_relu_grad(fc, fc_grad, 0.1)),
    ]


def tape_case(batch: int = 16):
    """One forward+backward through the real training graph."""
    hp = Hyperparams(lstm_hidden=32)
    rng = np.random.default_rng(1)
    net = _CompiledNet(hp, 11, 10, _init_weights(hp, 11, 10, rng), batch=batch)
    samples = [
        WindowSample(encoder_inputs=rng.uniform(0, 1, (hp.history_horizon, 11)),
                     decoder_inputs=rng.uniform(0, 1, (hp.forecast_horizon, 10)),
                     target=rng.uniform(0, 1, hp.forecast_horizon),
                     day_start=datetime(2021, 6, 1, tzinfo=timezone.utc))
        for _ in range(batch)
    ]
    bindings = net.bindings(samples, rng=rng)

    def run():
        net.tape.forward(bindings)
        net.tape.backward()
    return run


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=512,
                        help="rows in the gate-block arrays (default 512)")
    parser.add_argument("--repeats", type=int, default=200,
                        help="timing repeats per case (default 200)")
    parser.add_argument("--csv", action="store_true",
                        help="machine-readable output")
    args = parser.parse_args()

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("note: compiled backend unavailable, timing numpy against itself")

    cases = kernel_cases(args.rows)
    results = []
    for name, fn in cases:
        row = {"case": name}
        for backend in backends:
            kernels.use_backend(backend)
            fn()  # warm up
            row[backend] = best_of(fn, args.repeats)
        results.append(row)

    tape_repeats = max(5, args.repeats // 20)
    row = {"case": "tape_fwd_bwd"}
    for backend in backends:
        kernels.use_backend(backend)
        run = tape_case()
        run()
        row[backend] = best_of(run, tape_repeats)
    results.append(row)
    kernels.use_backend("cython" if "cython" in backends else "numpy")

    if args.csv:
        cols = ["case", *backends, "speedup"]
        print(",".join(cols))
        for row in results:
            speedup = (row["numpy"] / row["cython"]) if "cython" in row else 1.0
            cells = [row["case"]] + [f"{row[b] * 1e6:.2f}" for b in backends]
            print(",".join(cells + [f"{speedup:.2f}"]))
        return

    width = max(len(r["case"]) for r in results)
    header = f"{'case':<{width}}  " + "  ".join(f"{b + ' (us)':>14}" for b in backends)
    print(header + ("  speedup" if "cython" in backends else ""))
    print("-" * len(header) + ("  -------" if "cython" in backends else ""))
    for row in results:
        line = f"{row['case']:<{width}}  "
        line += "  ".join(f"{row[b] * 1e6:>14.2f}" for b in backends)
        if "cython" in backends:
            line += f"  {row['numpy'] / row['cython']:>7.2f}x"
        print(line)


if __name__ == "__main__":
    main()
