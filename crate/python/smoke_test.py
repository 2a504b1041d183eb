"""Smoke test for the lt_tensor extension.

Build the extension (e.g. `maturin develop -m crates/python/Cargo.toml`, or
`cargo build -p lt-python --features extension-module` and copy the shared
library to `lt_tensor.so` on PYTHONPATH), then run `python python/smoke_test.py`.
"""

import json
import random

import lt_tensor as lt


def rand_matrix(rng, rows, cols):
    return [[complex(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(cols)] for _ in range(rows)]


def kron(a, b):
    ra, ca, rb, cb = len(a), len(a[0]), len(b), len(b[0])
    return [[a[i // rb][j // cb] * b[i % rb][j % cb] for j in range(ca * cb)] for i in range(ra * rb)]


def max_diff(a, b):
    return max(abs(x - y) for ra, rb in zip(a, b) for x, y in zip(ra, rb))


def main():
    rng = random.Random(0)
    lam = lt.Lambda.kronecker(2)
    assert lam.arity == 2 and lam.name

    a, b = rand_matrix(rng, 2, 2), rand_matrix(rng, 3, 3)
    one = [[1 + 0j]]
    x = lt.Decomposition(1, one, [a, b], one)
    flat = lt.realize(lam, x)
    assert max_diff(flat, kron(a, b)) < 1e-12, "elementary realization"

    xs = lt.star(lam, x)
    adj = [[flat[j][i].conjugate() for j in range(6)] for i in range(6)]
    assert max_diff(lt.realize(lam, xs), adj) < 1e-12, "star"

    ub, idx = lt.lambda_norm_ub(lam, flat, 1, [2, 3], [x])
    assert idx == 0 and ub >= lt.min_norm(flat) - 1e-9

    y = lt.Decomposition(1, one, [rand_matrix(rng, 2, 2), rand_matrix(rng, 3, 3)], one)
    p, pflat = lt.multiply(lam, x, y)
    assert p.value() <= x.value() * y.value() * (1 + 1e-12) + 1e-9, "submultiplicativity"

    c = lt.scalar_certificate(lam, [[1 + 0j]], [2, 3])
    s = lt.cone_add(lam, c, c)
    valid, residual = lt.verify_certificate(lam, s)
    assert valid, residual

    value, ok = lt.lambda_capital_ub(lam, x)
    assert ok and value >= 0

    report = json.loads(lam.check_axioms(max_level=2, trials=20))
    assert isinstance(report, dict)

    round_trip = lt.Decomposition.from_json(x.to_json())
    assert max_diff(lt.realize(lam, round_trip), flat) < 1e-12, "json round trip"

    print("lt_tensor", lt.__version__, "smoke test OK")


if __name__ == "__main__":
    main()
