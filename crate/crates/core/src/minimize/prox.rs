//! Exact proximal step for the weighted total variation.
//!
//! Minimizes `Σ_k a_k (u_k - y_k)^2 + Σ_e c_e |u_{e+1} - u_e|` with `a_k > 0`.
//! On a chain this is a dynamic program over the derivative of the partial
//! objective, which stays piecewise linear and nondecreasing (a taut-string
//! scheme with per-node and per-edge weights). The torus is reduced to chains
//! by dualizing the closing edge.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::fields::{edge_weight, Field};

const DUAL_BISECTIONS: usize = 200;

/// A breakpoint of the piecewise-linear derivative: crossing `x` from left to
/// right adds `slope` to the linear coefficient and `offset` to the constant.
#[derive(Debug, Clone, Copy)]
struct Knot {
    x: f64,
    slope: f64,
    offset: f64,
}

/// Chain solve. `c.len() == y.len() - 1`.
fn chain_prox(y: &[f64], a: &[f64], c: &[f64]) -> Vec<f64> {
    let n = y.len();
    if n == 1 {
        return y.to_vec();
    }
    let mut knots: VecDeque<Knot> = VecDeque::with_capacity(2 * n);
    // derivative is left.0 * x + left.1 before the first knot, right.* after the last
    let mut left = (0.0, 0.0);
    let mut right = (0.0, 0.0);
    let mut lo = vec![0.0; n - 1];
    let mut hi = vec![0.0; n - 1];

    for k in 0..n - 1 {
        left.0 += 2.0 * a[k];
        left.1 -= 2.0 * a[k] * y[k];
        right.0 += 2.0 * a[k];
        right.1 -= 2.0 * a[k] * y[k];
        let ck = c[k];

        // clip from below at -c
        let (mut sa, mut sb) = left;
        while let Some(front) = knots.front() {
            if sa * front.x + sb >= -ck {
                break;
            }
            sa += front.slope;
            sb += front.offset;
            knots.pop_front();
        }
        let x_lo = (-ck - sb) / sa;
        knots.push_front(Knot { x: x_lo, slope: sa, offset: sb + ck });
        left = (0.0, -ck);
        if knots.len() == 1 {
            right = (sa, sb);
        }

        // clip from above at +c, never removing the knot just placed
        let (mut ra, mut rb) = right;
        while knots.len() > 1 {
            let back = *knots.back().unwrap();
            if ra * back.x + rb <= ck {
                break;
            }
            ra -= back.slope;
            rb -= back.offset;
            knots.pop_back();
        }
        let x_hi = ((ck - rb) / ra).max(x_lo);
        knots.push_back(Knot { x: x_hi, slope: -ra, offset: ck - rb });
        right = (0.0, ck);

        lo[k] = x_lo;
        hi[k] = x_hi;
    }

    // root of the full derivative
    let last = n - 1;
    let (mut sa, mut sb) = (left.0 + 2.0 * a[last], left.1 - 2.0 * a[last] * y[last]);
    for knot in &knots {
        if sa * knot.x + sb >= 0.0 {
            break;
        }
        sa += knot.slope;
        sb += knot.offset;
    }
    let mut u = vec![0.0; n];
    u[last] = -sb / sa;
    for k in (0..last).rev() {
        u[k] = u[k + 1].clamp(lo[k], hi[k]);
    }
    u
}

/// Torus solve: `c.len() == y.len()`, edge `n-1` closes the cycle.
fn cycle_prox(y: &[f64], a: &[f64], c: &[f64]) -> Vec<f64> {
    let n = y.len();
    let c_cut = c[n - 1];
    let chain_c = &c[..n - 1];
    let solve = |p: f64| {
        let mut z = y.to_vec();
        z[n - 1] -= p / (2.0 * a[n - 1]);
        z[0] += p / (2.0 * a[0]);
        chain_prox(&z, a, chain_c)
    };
    // φ'(p) = u_{n-1}(p) - u_0(p) is nonincreasing in p
    let slope = |u: &[f64]| u[n - 1] - u[0];
    if c_cut == 0.0 {
        return solve(0.0);
    }
    let u_lo = solve(-c_cut);
    if slope(&u_lo) <= 0.0 {
        return u_lo;
    }
    let u_hi = solve(c_cut);
    if slope(&u_hi) >= 0.0 {
        return u_hi;
    }
    let (mut p_lo, mut p_hi) = (-c_cut, c_cut);
    for _ in 0..DUAL_BISECTIONS {
        let mid = 0.5 * (p_lo + p_hi);
        if mid <= p_lo || mid >= p_hi {
            break;
        }
        if slope(&solve(mid)) > 0.0 {
            p_lo = mid;
        } else {
            p_hi = mid;
        }
    }
    solve(0.5 * (p_lo + p_hi))
}

/// `argmin_u σ Σ_e min(v_i^2, v_j^2) |u_j - u_i| + λ ∫ (u - g)^2`, with the
/// integral by the trapezoid rule. Exact up to rounding.
pub fn prox_weighted_tv(g: &Field, v: &Field, sigma: f64, lambda: f64) -> Result<Field> {
    if g.mesh() != v.mesh() {
        return Err(Error::Shape("prox_weighted_tv: g and v live on different meshes".into()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Argument(format!("lambda must be positive, got {lambda}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Argument(format!("sigma must be nonnegative, got {sigma}")));
    }
    let mesh = *g.mesh();
    if sigma == 0.0 {
        return Ok(g.clone());
    }
    let a: Vec<f64> = (0..mesh.len()).map(|k| lambda * mesh.quadrature_weight(k)).collect();
    let vv = v.values();
    let c: Vec<f64> = (0..mesh.num_cells())
        .map(|e| {
            let (i, j) = mesh.cell(e);
            sigma * edge_weight(vv[i], vv[j])
        })
        .collect();
    let u = if mesh.domain().is_torus() {
        cycle_prox(g.values(), &a, &c)
    } else {
        chain_prox(g.values(), &a, &c)
    };
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::Internal("prox produced non-finite values".into()));
    }
    Field::new(mesh, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Domain1D, Mesh};

    #[test]
    fn two_point_merge() {
        let m = Mesh::new(Domain1D::interval(0.0, 1.0).unwrap(), 2).unwrap();
        let g = Field::new(m, vec![0.0, 1.0]).unwrap();
        let v = Field::constant(m, 1.0);
        let u = prox_weighted_tv(&g, &v, 1.0, 1.0).unwrap();
        assert!((u.values()[0] - 0.5).abs() < 1e-15);
        assert!((u.values()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_point_partial_shrink() {
        // a = (1, 1), c = 0.5: u0 = 0.25, u1 = 0.75
        let u = chain_prox(&[0.0, 1.0], &[1.0, 1.0], &[0.5]);
        assert!((u[0] - 0.25).abs() < 1e-15);
        assert!((u[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn zero_sigma_is_identity() {
        let m = Mesh::new(Domain1D::Torus, 7).unwrap();
        let g = Field::from_fn(m, |x| (6.0 * x).sin());
        let v = Field::constant(m, 1.0);
        assert_eq!(prox_weighted_tv(&g, &v, 0.0, 2.0).unwrap(), g);
    }

    #[test]
    fn large_sigma_gives_weighted_mean() {
        let y = [1.0, -2.0, 4.0, 0.5];
        let a = [1.0, 2.0, 0.5, 1.5];
        let mean = y.iter().zip(&a).map(|(y, a)| y * a).sum::<f64>() / a.iter().sum::<f64>();
        for u in [chain_prox(&y, &a, &[100.0; 3]), cycle_prox(&y, &a, &[100.0; 4])] {
            assert!(u.iter().all(|x| (x - mean).abs() < 1e-12), "{u:?}");
        }
    }

    #[test]
    fn lambda_zero_rejected() {
        let m = Mesh::new(Domain1D::Torus, 4).unwrap();
        let f = Field::constant(m, 1.0);
        assert!(matches!(prox_weighted_tv(&f, &f, 1.0, 0.0), Err(Error::Argument(_))));
    }
}
