"""Time the numba kernels against their pure-numpy fallbacks.

Each kernel is run on identical inputs through both implementations; the
outputs are checked for agreement before timing. A final section times one
full training step (forward + gradient) of the scoring network in a child
process per backend, since the backend is fixed at import time.

    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --quick
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from polyscore import kernels
from polyscore._accel import ENV_FLAG, HAVE_NUMBA


def _best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_gop(rng, repeat, quick):
    values = rng.dirichlet(np.ones(40), size=2000)
    spans = [(int(a), int(a) + int(n)) for a, n in zip(rng.integers(0, 1900, 200), rng.integers(1, 60, 200))]
    cols = rng.integers(0, 40, 200)

    def run(f):
        return lambda: [f(values, lo, hi, int(c), 1e-10) for (lo, hi), c in zip(spans, cols)]

    a, b = run(kernels._frame_log_mean_np)(), run(kernels._frame_log_mean_nb)()
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
    n = 3 if quick else 20
    return _best(run(kernels._frame_log_mean_np), repeat, n), _best(run(kernels._frame_log_mean_nb), repeat, n)


def bench_lstm(rng, repeat, quick):
    B, H = 16, 256
    z = rng.standard_normal((B, 4 * H))
    c = rng.standard_normal((B, H))
    h = rng.standard_normal((B, H))
    mask = (rng.random(B) > 0.2).astype(np.float64)
    dh, dc = rng.standard_normal((B, H)), rng.standard_normal((B, H))

    def step(fwd, bwd):
        def go():
            _, _, gates, tc = fwd(z, c, h, mask)
            return bwd(dh, dc, gates, tc, c, mask)

        return go

    a = step(kernels._lstm_step_fwd_np, kernels._lstm_step_bwd_np)()
    b = step(kernels._lstm_step_fwd_nb, kernels._lstm_step_bwd_nb)()
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12)
    n = 50 if quick else 500
    return (
        _best(step(kernels._lstm_step_fwd_np, kernels._lstm_step_bwd_np), repeat, n),
        _best(step(kernels._lstm_step_fwd_nb, kernels._lstm_step_bwd_nb), repeat, n),
    )


def bench_sgns(rng, repeat, quick):
    V, D, K = 100, 32, 5
    n_pairs = 2000 if quick else 20000
    centers = rng.integers(0, V, n_pairs)
    contexts = rng.integers(0, V, n_pairs)
    negs = rng.integers(0, V, (n_pairs, K))
    W0 = rng.uniform(-0.5 / D, 0.5 / D, (V, D))

    def run(f):
        def go():
            W, C = W0.copy(), np.zeros((V, D))
            return f(W, C, centers, contexts, negs, 0.025, 1e-4, 0, n_pairs), W

        return go

    (la, Wa), (lb, Wb) = run(kernels._sgns_pass_np)(), run(kernels._sgns_pass_nb)()
    np.testing.assert_allclose(Wa, Wb, rtol=1e-9, atol=1e-12)
    assert abs(la - lb) <= 1e-9 * abs(la)
    return _best(run(kernels._sgns_pass_np), repeat, 1), _best(run(kernels._sgns_pass_nb), repeat, 1)


_STEP_SCRIPT = """
import timeit, numpy as np
from polyscore.scoring import ScoringModel, Example, loss_and_gradient
rng = np.random.default_rng(0)
H = {hidden}
m = ScoringModel(47, ("en",), hidden=H, seed=0)
batch = [Example(str(i), "en", rng.standard_normal((int(n), 47)), rng.uniform(-1, 1, 3), np.zeros(3), 1.0, 5.0)
         for i, n in enumerate(rng.integers(7, 16, 16))]
loss_and_gradient(m, batch)
print(min(timeit.repeat(lambda: loss_and_gradient(m, batch), repeat={repeat}, number=1)))
"""


def bench_train_step(hidden, repeat):
    out = {}
    for name, flag in (("numpy", "1"), ("numba", "0")):
        env = dict(os.environ, **{ENV_FLAG: flag})
        res = subprocess.run(
            [sys.executable, "-c", _STEP_SCRIPT.format(hidden=hidden, repeat=repeat)],
            env=env, capture_output=True, text=True, check=True,
        )
        out[name] = float(res.stdout.strip().splitlines()[-1])
    return out["numpy"], out["numba"]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--quick", action="store_true", help="smaller inputs, fewer repeats")
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--hidden", type=int, default=256, help="hidden size for the training-step timing")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1
    repeat = 2 if args.quick else args.repeat
    rng = np.random.default_rng(args.seed)
    rows = [
        ("gop frame mean (200 segments)", bench_gop(rng, repeat, args.quick)),
        ("lstm step fwd+bwd (B=16, H=256)", bench_lstm(rng, repeat, args.quick)),
        ("sgns pass", bench_sgns(rng, repeat, args.quick)),
        (f"training step (H={args.hidden}, B=16)", bench_train_step(args.hidden, repeat)),
    ]
    print(f"{'kernel':<36} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8}")
    for name, (t_np, t_nb) in rows:
        print(f"{name:<36} {1e3 * t_np:>11.3f} {1e3 * t_nb:>11.3f} {t_np / t_nb:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
