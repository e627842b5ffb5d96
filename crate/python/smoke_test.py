"""Smoke test for the `mipt` extension module.

Build and install it first, e.g. `maturin develop -m crates/py/Cargo.toml`,
then run `python python/smoke_test.py`.
"""

import cmath
import math

import mipt


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    p = mipt.ModelParams(8, 1.5, 0.2)
    assert p.l == 8 and close(p.sigma, 0.2 * math.sqrt(8), 1e-15), p

    r_sv, p_sv = mipt.survival_statevector(p, 50)
    r_ff, p_ff = mipt.survival_freefermion(p, 50)
    worst = max(abs(a - b) for a, b in zip(r_sv, r_ff))
    assert worst <= 1e-8, worst
    assert all(x >= y - 1e-12 for x, y in zip(r_ff, r_ff[1:]))
    assert close(sum(p_ff) + r_ff[-1], 1.0, 1e-10)

    f = mipt.overlaps(p, 2)
    c = mipt.recursion_coefficients(p, 2)
    assert f[0] == 1
    assert close(c[1], -f[1], 1e-15)
    assert close(c[2], f[1] ** 2 - f[2], 1e-15)
    assert close(r_ff[0], 1 - abs(f[1]) ** 2, 1e-12)

    rho, phi = mipt.rho_phi(p, 3)
    assert close(rho * cmath.exp(1j * phi), mipt.overlaps(p, 3)[3], 1e-12)
    assert close(mipt.alpha(mipt.ModelParams(10, 0.5, 0.0)), 1.0, 1e-12)

    s = 1 / math.sqrt(2)
    bell = [s, 0, 0, s]
    assert close(mipt.entropy(bell, 1), math.log(2), 1e-12)
    ghz = [0j] * 64
    ghz[0] = ghz[63] = s
    assert mipt.ggm(ghz) == 0.5
    third = 1 / math.sqrt(3)
    w = [0, third, third, 0, third, 0, 0, 0]
    assert close(mipt.ggm(w, "all"), 1 / 3, 1e-10)
    assert close(sum(mipt.schmidt_spectrum(w, 1)), 1.0, 1e-12)

    up = [1] + [0] * 15
    out = mipt.evolve(up, 0.5, 0.3)
    assert close(sum(abs(a) ** 2 for a in out), 1.0, 1e-12)

    records = mipt.entanglement_series(mipt.ModelParams(8, 0.5, 0.3), 5)
    assert len(records) == 5 and all(r["sag"] <= r["survival"] + 1e-12 for r in records)

    height, start, cutoff, fallback = mipt.plateau_height([0.5, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4])
    assert close(height, 0.4, 1e-15) and not fallback
    mids, slopes = mipt.two_point_derivative([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 3.0, 4.0])
    assert mids == [0.5, 1.5, 2.5] and slopes == [1.0, 2.0, 1.0]
    x, value, index, boundary = mipt.peak_location(mids, slopes)
    assert (x, value, index, boundary) == (1.5, 2.0, 1, False)
    a, b, r2 = mipt.log_decay_fit([1 - 0.1 * math.log(n) for n in range(1, 101)], 10, 100)
    assert close(b, 0.1, 1e-12) and close(r2, 1.0, 1e-12)

    tau_c, peak, _, _ = mipt.transition_scan(12, 0.5, [0.025 * i for i in range(1, 25)], 20)
    assert 0.1 <= tau_c <= 0.4, tau_c

    curves = mipt.survival_sweep(8, 0.5, [0.1, 0.2], 10, engine="statevector")
    assert len(curves) == 2 and len(curves[0]) == 10

    checks = mipt.validate(steps=20)
    failed = [name for name, ok, _, _ in checks if not ok]
    assert not failed, failed

    try:
        mipt.ModelParams(0, 0.5, 0.1)
    except ValueError:
        pass
    else:
        raise AssertionError("L = 0 accepted")

    print(f"smoke test passed ({len(checks)} validation checks)")


if __name__ == "__main__":
    main()
