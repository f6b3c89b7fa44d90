"""Smoke test for the singlewell extension module.

Build first with `maturin develop --release` inside crates/python.
"""

import math

import singlewell as sw


def main():
    dom = sw.Domain.interval(-1.0, 1.0)
    eps, b = 1e-2, 1.0
    mesh = sw.Mesh(dom, int(math.ceil(16 / eps)) + 1)
    w = sw.minimize_smm_b_quadratic(mesh, eps, [(0.0, b)])
    exact = sw.closed_form_minimizer(eps, b, mesh.nodes())
    err = max(abs(a - c) for a, c in zip(w.values(), exact))
    assert err < 1e-3, err
    assert abs(w.interpolate(0.0) - 1 / (1 + b)) < 1e-3

    quad = sw.Potential.quadratic()
    report = sw.energy_smm_b(w, eps, quad, [(0.0, b)])
    assert abs(report.total - report.gradient - report.potential - report.penalty) < 1e-14

    q, cost = sw.limit_pointwise_minimizer(b, quad)
    xi0 = sw.SetValuedLimit(dom, [(0.0, q, 1.0)])
    assert sw.limit_energy_smm_b(xi0, quad, [(0.0, b)]) == b / (b + 1)

    torus = sw.Domain.torus()
    xi = sw.SetValuedLimit(torus, [(0.3, 0.5, 1.0), (0.7, 0.0, 1.2)])
    assert abs(sw.limit_energy_smm(xi, quad) - 1.29) < 1e-12
    rows = sw.verify_limsup(xi, quad, [1e-1, 1e-2, 1e-3], 0.05)
    assert all(r[4] for r in rows), rows

    line = sw.Field(sw.Mesh(sw.Domain.interval(0.0, 1.0), 101), [k / 100 for k in range(101)])
    s, x, u = sw.unfold(line)
    assert abs(s[-1] - math.sqrt(2)) < 1e-12

    step_mesh = sw.Mesh(sw.Domain.interval(0.0, 1.0), 201)
    g = sw.Field(step_mesh, [0.0 if t < 0.5 else 1.0 for t in step_mesh.nodes()])
    u, v, rep, hist = sw.minimize_kwc_alternating(g, 0.02, 1.0, quad, 1e3)
    assert abs(min(v.values()) - 0.5) < 5e-2
    assert all(b2 <= a2 * (1 + 1e-12) + 1e-12 for a2, b2 in zip(hist, hist[1:]))

    try:
        sw.Mesh(dom, 1)
    except ValueError:
        pass
    else:
        raise AssertionError("a one-node mesh should be rejected")

    print("smoke test passed")


if __name__ == "__main__":
    main()
