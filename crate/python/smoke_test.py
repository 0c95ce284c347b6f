"""Smoke test for the misisun_py extension module.

Build the module first, e.g.

    cargo build --release -p misisun-py --features extension-module
    cp target/release/libmisisun_py.so python/misisun_py.so
    python3 python/smoke_test.py
"""

import math
import sys

import misisun_py as mu


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    d, e, b = mu.generate_library(bands=40, atoms=15, endmembers=3, seed=1)
    assert len(d) == 40 and len(d[0]) == 15
    assert len(e) == 40 and len(e[0]) == 3
    assert all(close(sum(b[j][k] for j in range(15)), 1.0, 1e-12) for k in range(3))

    y, a = mu.generate_sim2(e, rho=0.8, snr_db=30.0, seed=1, height=20, width=20)
    assert len(y) == 40 and len(y[0]) == 400
    assert max(max(col) for col in zip(*a)) <= 0.8

    clean, _ = mu.generate_sim2(e, rho=0.8, snr_db=math.inf, seed=1, height=20, width=20)
    a_hat = mu.solve_fclsu(clean, e, mu_a=50.0, iters=2000)
    assert mu.sre_db(a, a_hat) > 50.0

    cfg = mu.SolverConfig(3, "quick")
    cfg.outer_iters = 100
    assert cfg.lambda_ == 0.3 and cfg.mu_a == 50.0
    res = mu.solve_misisun(y, d, cfg)
    assert res.iterations_run == 100
    assert len(res.abundances) == 3 and len(res.abundances[0]) == 400
    assert res.objective_trace[-1] < res.objective_trace[0]

    cfg.lambda_ = 0.0
    zero = mu.solve_misisun(y, d, cfg)
    fasun = mu.solve_fasun(y, d, mu.SolverConfig(3, "quick"))
    assert len(fasun.objective_trace) == 1000
    cfg_f = mu.SolverConfig(3, "quick")
    cfg_f.outer_iters = 100
    assert zero.abundances == mu.solve_fasun(y, d, cfg_f).abundances

    x = mu.solve_sunsal(y, d, lambda_l1=1e-3, iters=200)
    assert len(x) == 15 and min(min(row) for row in x) >= 0.0

    q = mu.quec_solve([[1.0, 0.0], [0.0, 1.0]], [[1.0], [0.0]], [[0.0], [0.0]], 1.0)
    assert close(q[0][0], 0.75, 1e-15) and close(q[1][0], 0.25, 1e-15)

    assert mu.sad_degrees([1.0, 2.0], [2.0, 4.0]) == 0.0
    shuffled = [[row[2], row[0], row[1]] for row in e]
    assert mu.align_endmembers(e, shuffled) == [1, 2, 0]
    noisy = mu.add_noise(clean, 20.0, 7)
    num = math.sqrt(sum(v * v for row in clean for v in row))
    den = math.sqrt(sum((p - c) ** 2 for rp, rc in zip(noisy, clean) for p, c in zip(rp, rc)))
    assert close(20 * math.log10(num / den), 20.0, 1e-9)

    for bad in (lambda: mu.SolverConfig(3, "nope"),
                lambda: mu.generate_sim2(e, rho=0.1),
                lambda: mu.sre_db([[1.0, 2.0]], [[1.0], [2.0]]),
                lambda: mu.quec_solve([[1.0, 2.0], [3.0]], [[1.0]], [[1.0]], 1.0)):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")

    print(f"misisun_py {mu.__version__}: smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
