"""Smoke test for the hermex_py extension.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/hermex-*.whl
"""

import cmath
import math

import hermex_py as hx


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def main():
    assert hx.problem_names() == ["bell", "ghz", "crotonic"]
    assert "0.25 XX" in hx.problem_operator("bell")

    # e^{-i·0.7·Z·t} is diagonal with phases ∓0.7t
    u = hx.exact_unitary("0.7 Z", 0.3)
    assert close(u[0][0], cmath.exp(-0.21j)) and close(u[1][1], cmath.exp(0.21j))
    assert close(abs(u[0][1]), 0.0)
    assert close(hx.process_fidelity(u, u), 1.0)

    s1 = hx.train_strategy1("bell", 0.05)
    assert s1["final_fidelity"] >= 0.99 and s1["converged"], s1

    s2 = hx.train_strategy2("bell", 0.05)
    assert s2["stages"] == 10 and s2["final_fidelity"] >= 0.99, s2

    a = hx.trotter_infidelity("0.8 X\n0.6 Z", 1.0, 8)
    b = hx.trotter_infidelity("0.8 X\n0.6 Z", 1.0, 16)
    assert 1.5 <= math.sqrt(a / b) <= 2.5, (a, b)

    k1 = hx.expressibility("circuit1", samples=2000)
    k3 = hx.expressibility("circuit3", samples=2000)
    assert k1 > k3, (k1, k3)

    for bad in (lambda: hx.problem_operator("h2o"), lambda: hx.expressibility("circuit9")):
        try:
            bad()
        except KeyError:
            pass
        else:
            raise AssertionError("expected KeyError")
    try:
        hx.exact_unitary("1.0 QQ", 0.1)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    print(f"smoke test ok: strategy1 f={s1['final_fidelity']:.5f}, "
          f"strategy2 f={s2['final_fidelity']:.8f}, KL c1={k1:.3f} c3={k3:.4f}")


if __name__ == "__main__":
    main()
