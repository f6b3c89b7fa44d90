use crate::error::{Error, Result};
use crate::fields::{Field, Mesh, PointPenalty};
use crate::potential::Potential;

use super::tridiag::SymTridiagonal;
use super::{SolveOptions, StepRule};

/// Lower clamp on `F''` in the descent preconditioner, so the metric stays
/// positive definite for flat or nonconvex potentials.
const CURVATURE_FLOOR: f64 = 1e-8;
const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// `w_ε` on `[-1, 1]` for `F = (v-1)^2` and a single penalty `b v(0)^2`,
/// with Neumann conditions at `±1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormMinimizer {
    eps: f64,
    b: f64,
    denom: f64,
}

pub fn closed_form_minimizer(eps: f64, b: f64) -> Result<ClosedFormMinimizer> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Argument(format!("eps must be positive, got {eps}")));
    }
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::Argument(format!("b must be nonnegative, got {b}")));
    }
    let q = (-2.0 / eps).exp();
    let denom = 1.0 - q * q + b * (1.0 + q) * (1.0 + q);
    Ok(ClosedFormMinimizer { eps, b, denom })
}

impl ClosedFormMinimizer {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.b == 0.0 {
            return 1.0;
        }
        let (eps, b, d) = (self.eps, self.b, self.denom);
        let ax = x.abs();
        // e^{|x|/ε} never appears on its own; it is folded into e^{(|x|-2)/ε}
        // and e^{(|x|-4)/ε}, which stay below 1 on [-1, 1].
        let q = (-2.0 / eps).exp();
        let decaying = -b * (q + 1.0) / d * (-ax / eps).exp();
        let growing = -b * (((ax - 2.0) / eps).exp() + ((ax - 4.0) / eps).exp()) / d;
        1.0 + decaying + growing
    }

    pub fn sample(&self, mesh: Mesh) -> Field {
        Field::from_fn(mesh, |x| self.eval(x))
    }
}

/// Penalty acting on `c0 v_{k0} + c1 v_{k1}` with weight `b`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PenaltyStencil {
    pub k0: usize,
    pub k1: usize,
    pub c0: f64,
    pub c1: f64,
    pub b: f64,
}

impl PenaltyStencil {
    pub fn nodal(k: usize, b: f64) -> Self {
        Self { k0: k, k1: k, c0: 1.0, c1: 0.0, b }
    }

    fn value(&self, v: &[f64]) -> f64 {
        self.c0 * v[self.k0] + self.c1 * v[self.k1]
    }
}

pub(crate) fn stencils(mesh: &Mesh, penalties: &[PointPenalty]) -> Result<Vec<PenaltyStencil>> {
    penalties
        .iter()
        .map(|pen| {
            pen.check_interior(&mesh.domain())?;
            let (k0, k1, t) = mesh.locate(pen.a)?;
            Ok(PenaltyStencil { k0, k1, c0: 1.0 - t, c1: t, b: pen.b })
        })
        .collect()
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("eps must be positive, got {eps}")))
    }
}

/// `(ε/h) L` plus the penalty couplings; the potential part is added by callers.
fn base_matrix(mesh: &Mesh, eps: f64, st: &[PenaltyStencil]) -> SymTridiagonal {
    let n = mesh.len();
    let mut m = SymTridiagonal::new(n, mesh.domain().is_torus());
    let s = eps / mesh.spacing();
    for e in 0..mesh.num_cells() {
        let (i, j) = mesh.cell(e);
        m.add(i, i, s);
        m.add(j, j, s);
        m.add(i, j, -s);
    }
    for p in st {
        m.add(p.k0, p.k0, 2.0 * p.b * p.c0 * p.c0);
        m.add(p.k1, p.k1, 2.0 * p.b * p.c1 * p.c1);
        if p.k0 == p.k1 {
            m.add(p.k0, p.k0, 4.0 * p.b * p.c0 * p.c1);
        } else {
            m.add(p.k0, p.k1, 2.0 * p.b * p.c0 * p.c1);
        }
    }
    m
}

pub(crate) fn solve_quadratic_stencils(mesh: Mesh, eps: f64, st: &[PenaltyStencil]) -> Result<Field> {
    check_eps(eps)?;
    let mut m = base_matrix(&mesh, eps, st);
    let rhs: Vec<f64> = (0..mesh.len()).map(|k| mesh.quadrature_weight(k) / eps).collect();
    for (k, r) in rhs.iter().enumerate() {
        m.add(k, k, *r);
    }
    let v = m.solve(&rhs)?;
    Field::new(mesh, v)
}

/// Unique minimizer of the discrete `E^ε_sMM + Σ b_ℓ v(a_ℓ)^2` for `F = (v-1)^2`.
///
/// Natural boundary conditions on intervals. Each penalty acts on the
/// interpolated value `v(a_ℓ)`, the same quantity [`crate::fields::energy_smm_b`] charges, so
/// the result is the exact minimizer of that discrete energy.
pub fn minimize_smm_b_quadratic(mesh: Mesh, eps: f64, penalties: &[PointPenalty]) -> Result<Field> {
    let st = stencils(&mesh, penalties)?;
    if st.iter().all(|s| s.b == 0.0) {
        // the well itself, without solver roundoff
        check_eps(eps)?;
        return Ok(Field::constant(mesh, 1.0));
    }
    solve_quadratic_stencils(mesh, eps, &st)
}

fn gradient_values(
    mesh: &Mesh,
    v: &[f64],
    eps: f64,
    p: &Potential,
    st: &[PenaltyStencil],
) -> Result<Vec<f64>> {
    let s = eps / mesh.spacing();
    let mut g = vec![0.0; v.len()];
    for e in 0..mesh.num_cells() {
        let (i, j) = mesh.cell(e);
        let d = s * (v[i] - v[j]);
        g[i] += d;
        g[j] -= d;
    }
    for (k, gk) in g.iter_mut().enumerate() {
        *gk += mesh.quadrature_weight(k) / (2.0 * eps) * p.eval_df(v[k])?;
    }
    for pen in st {
        let c = 2.0 * pen.b * pen.value(v);
        g[pen.k0] += c * pen.c0;
        g[pen.k1] += c * pen.c1;
    }
    Ok(g)
}

/// Partial derivatives of the discrete `E^ε_sMM + Σ b_ℓ v(a_ℓ)^2` with respect
/// to the nodal values. For `F = (v-1)^2` this is the Euler-Lagrange residual.
pub fn smm_b_el_residual(
    v: &Field,
    eps: f64,
    p: &Potential,
    penalties: &[PointPenalty],
) -> Result<Vec<f64>> {
    check_eps(eps)?;
    let st = stencils(v.mesh(), penalties)?;
    gradient_values(v.mesh(), v.values(), eps, p, &st)
}

fn energy_values(mesh: &Mesh, v: &[f64], eps: f64, p: &Potential, st: &[PenaltyStencil]) -> f64 {
    let s = 0.5 * eps / mesh.spacing();
    let mut e = 0.0;
    for c in 0..mesh.num_cells() {
        let (i, j) = mesh.cell(c);
        e += s * (v[j] - v[i]).powi(2);
    }
    for (k, &x) in v.iter().enumerate() {
        match p.eval_f(x) {
            Ok(f) => e += mesh.quadrature_weight(k) / (2.0 * eps) * f,
            Err(_) => return f64::INFINITY,
        }
    }
    for pen in st {
        e += pen.b * pen.value(v).powi(2);
    }
    e
}

fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Critical point of the discrete `E^ε_sMM + Σ b_ℓ v(a_ℓ)^2` for a general
/// potential, by descent from `v ≡ 1`.
///
/// Each step is preconditioned by `(ε/h) L + diag(h F''(v)/2ε) + penalties`,
/// with `F''` clamped from below, so for convex `F` this is a damped Newton
/// method. Stops when the sup-norm of the nodal gradient is at most
/// `opts.tolerance`.
pub fn minimize_smm_b_general(
    mesh: Mesh,
    eps: f64,
    p: &Potential,
    penalties: &[PointPenalty],
    opts: &SolveOptions,
) -> Result<Field> {
    let st = stencils(&mesh, penalties)?;
    let report = p.check_conditions();
    if !report.f1 {
        return Err(Error::Potential("potential must vanish exactly at v = 1 and be nonnegative".into()));
    }
    minimize_smm_b_general_from(Field::constant(mesh, 1.0), eps, p, &st, opts)
}

pub(crate) fn minimize_smm_b_general_from(
    start: Field,
    eps: f64,
    p: &Potential,
    st: &[PenaltyStencil],
    opts: &SolveOptions,
) -> Result<Field> {
    check_eps(eps)?;
    opts.validate()?;
    let mesh = *start.mesh();
    let mut v = start.into_values();
    let base = base_matrix(&mesh, eps, st);
    let mut energy = energy_values(&mesh, &v, eps, p, st);
    if !energy.is_finite() {
        return Err(Error::Argument("initial guess lies outside the potential's range".into()));
    }
    for _ in 0..opts.max_iterations {
        let g = gradient_values(&mesh, &v, eps, p, st)?;
        if sup_norm(&g) <= opts.tolerance {
            return Field::new(mesh, v);
        }
        let mut metric = base.clone();
        for (k, &x) in v.iter().enumerate() {
            let curv = p.eval_d2f(x)?.max(CURVATURE_FLOOR);
            metric.add(k, k, mesh.quadrature_weight(k) / (2.0 * eps) * curv);
        }
        let dir: Vec<f64> = metric.solve(&g)?.into_iter().map(|d| -d).collect();
        let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let trial = |t: f64| -> Vec<f64> { v.iter().zip(&dir).map(|(a, d)| a + t * d).collect() };
        let (next, next_energy) = match opts.step_rule {
            StepRule::Fixed => {
                let w = trial(1.0);
                let e = energy_values(&mesh, &w, eps, p, st);
                (w, e)
            }
            StepRule::Backtracking => {
                // allow for rounding in the energy once the predicted decrease
                // drops below machine resolution
                let slack = 1e-14 * (1.0 + energy.abs());
                let mut t = 1.0;
                let mut accepted = None;
                for _ in 0..MAX_HALVINGS {
                    let w = trial(t);
                    let e = energy_values(&mesh, &w, eps, p, st);
                    if e <= energy + ARMIJO_C * t * slope + slack {
                        accepted = Some((w, e));
                        break;
                    }
                    t *= 0.5;
                }
                match accepted {
                    Some(step) => step,
                    None => break,
                }
            }
        };
        if !next_energy.is_finite() {
            break;
        }
        v = next;
        energy = next_energy;
    }
    let gnorm = sup_norm(&gradient_values(&mesh, &v, eps, p, st)?);
    if gnorm <= opts.tolerance {
        return Field::new(mesh, v);
    }
    Err(Error::Convergence {
        iterations: opts.max_iterations,
        gradient: gnorm,
        last: Box::new(Field::new(mesh, v)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Domain1D, Mesh};

    fn unit_mesh(n: usize) -> Mesh {
        Mesh::new(Domain1D::interval(-1.0, 1.0).unwrap(), n).unwrap()
    }

    #[test]
    fn closed_form_values() {
        let w = closed_form_minimizer(0.1, 0.0).unwrap();
        assert_eq!(w.eval(0.3), 1.0);
        let w = closed_form_minimizer(0.1, 1.0).unwrap();
        assert!((w.eval(0.0) - 0.5).abs() < 1e-8);
        let w = closed_form_minimizer(1e-3, 1.0).unwrap();
        assert!((w.eval(0.0) - 0.5).abs() < 1e-12);
        assert!(w.eval(1.0).is_finite());
    }

    #[test]
    fn closed_form_satisfies_jump_and_neumann() {
        // independent check: ε(w'(0+) - w'(0-)) = 2 b w(0) and w'(±1) = 0
        for (eps, b) in [(0.5, 1.0), (0.2, 3.0), (1.0, 0.5)] {
            let w = closed_form_minimizer(eps, b).unwrap();
            let d = 1e-6;
            let slope_right = (w.eval(d) - w.eval(0.0)) / d;
            assert!((eps * 2.0 * slope_right - 2.0 * b * w.eval(0.0)).abs() < 1e-4);
            let slope_end = (w.eval(1.0) - w.eval(1.0 - d)) / d;
            assert!(slope_end.abs() < 1e-4);
        }
    }

    #[test]
    fn no_penalty_gives_one() {
        let v = minimize_smm_b_quadratic(unit_mesh(33), 0.1, &[]).unwrap();
        assert!(v.values().iter().all(|x| (x - 1.0).abs() < 1e-14));
        let t = Mesh::new(Domain1D::Torus, 17).unwrap();
        let v = minimize_smm_b_quadratic(t, 0.1, &[]).unwrap();
        assert!(v.values().iter().all(|x| (x - 1.0).abs() < 1e-14));
    }

    #[test]
    fn quadratic_residual_small() {
        let pen = [PointPenalty::new(0.013, 2.0).unwrap()];
        let v = minimize_smm_b_quadratic(unit_mesh(201), 0.05, &pen).unwrap();
        let r = smm_b_el_residual(&v, 0.05, &Potential::quadratic(), &pen).unwrap();
        assert!(sup_norm(&r) < 1e-12);
    }

    #[test]
    fn general_matches_quadratic() {
        let mesh = unit_mesh(161);
        let pen = [PointPenalty::new(0.0, 1.0).unwrap()];
        let q = minimize_smm_b_quadratic(mesh, 0.1, &pen).unwrap();
        let opts = SolveOptions::default();
        let g = minimize_smm_b_general(mesh, 0.1, &Potential::quadratic(), &pen, &opts).unwrap();
        let diff = q
            .values()
            .iter()
            .zip(g.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 10.0 * opts.tolerance);
    }

    #[test]
    fn iteration_cap_reports_last_iterate() {
        let mesh = unit_mesh(41);
        let pen = [PointPenalty::new(0.0, 1.0).unwrap()];
        let p = Potential::from_fn(-2.0, 4.0, 601, 1e-3, |v| (v - 1.0).powi(4)).unwrap();
        let opts = SolveOptions {
            max_iterations: 1,
            tolerance: 1e-14,
            ..Default::default()
        };
        match minimize_smm_b_general(mesh, 0.1, &p, &pen, &opts) {
            Err(Error::Convergence { last, .. }) => assert_eq!(last.len(), 41),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }
}
