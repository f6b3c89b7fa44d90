//! Uniform 1D meshes, continuous piecewise-linear fields and the discrete
//! ε-level energies.
//!
//! All integrals use the trapezoid rule on the mesh, so for a piecewise-linear
//! field the gradient term is exact and the potential and fidelity terms are
//! second-order accurate.
//!
//! The weighted total variation charges the jump `|u_{k+1} - u_k|` across a cell
//! by the smaller of `v_k^2` and `v_{k+1}^2`. A jump sitting where `v` dips is
//! charged at the bottom of the dip, matching how the limit energy charges a
//! jump at an exceptional point by `(ξ⁻)^2`. Midpoint or max weighting would
//! over-charge such dips.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::Potential;

/// Tolerance used when matching CSV abscissae against mesh nodes.
const NODE_MATCH_TOL: f64 = 1e-9;

/// `M = [a, b]` or the unit torus `R/Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain1D {
    Interval { a: f64, b: f64 },
    Torus,
}

impl Domain1D {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let d = Domain1D::Interval { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn torus() -> Self {
        Domain1D::Torus
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Domain1D::Interval { a, b } if !(a.is_finite() && b.is_finite() && a < b) => Err(
                Error::Domain(format!("interval endpoints must satisfy a < b, got [{a}, {b}]")),
            ),
            _ => Ok(()),
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Domain1D::Torus)
    }

    pub fn length(&self) -> f64 {
        match *self {
            Domain1D::Interval { a, b } => b - a,
            Domain1D::Torus => 1.0,
        }
    }

    /// `[a, b]` for intervals, `[0, 1)` for the torus.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Domain1D::Interval { a, b } => (a, b),
            Domain1D::Torus => (0.0, 1.0),
        }
    }

    /// `d_M(x, y)`: `|x - y|` on intervals, the periodic distance on the torus.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        match self {
            Domain1D::Interval { .. } => (x - y).abs(),
            Domain1D::Torus => {
                let d = (x - y).rem_euclid(1.0);
                d.min(1.0 - d)
            }
        }
    }

    /// Maps a coordinate into the canonical chart (`[0, 1)` on the torus).
    pub fn wrap(&self, x: f64) -> f64 {
        match self {
            Domain1D::Interval { .. } => x,
            Domain1D::Torus => {
                let w = x.rem_euclid(1.0);
                if w >= 1.0 {
                    0.0
                } else {
                    w
                }
            }
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Domain1D::Interval { a, b } => (a..=b).contains(&x),
            Domain1D::Torus => x.is_finite(),
        }
    }

    /// Membership in the interior `M̊`; every point of the torus is interior.
    pub fn is_interior(&self, x: f64) -> bool {
        match *self {
            Domain1D::Interval { a, b } => a < x && x < b,
            Domain1D::Torus => x.is_finite(),
        }
    }

    /// Whether `x` is an endpoint of an interval, up to `tol`.
    pub fn is_boundary(&self, x: f64, tol: f64) -> bool {
        match *self {
            Domain1D::Interval { a, b } => (x - a).abs() <= tol || (x - b).abs() <= tol,
            Domain1D::Torus => false,
        }
    }
}

/// Uniform mesh. Interval meshes include both endpoints; torus meshes hold
/// `n` nodes `k/n` with node `n` identified with node `0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    domain: Domain1D,
    n: usize,
}

impl Mesh {
    pub fn new(domain: Domain1D, n: usize) -> Result<Self> {
        domain.validate()?;
        if n < 2 {
            return Err(Error::Argument(format!("a mesh needs at least 2 nodes, got {n}")));
        }
        Ok(Self { domain, n })
    }

    /// Mesh with spacing at most `h_max`.
    pub fn with_max_spacing(domain: Domain1D, h_max: f64) -> Result<Self> {
        if !(h_max > 0.0) {
            return Err(Error::Argument(format!("mesh spacing must be positive, got {h_max}")));
        }
        let cells = (domain.length() / h_max).ceil().max(1.0) as usize;
        match domain {
            Domain1D::Interval { .. } => Self::new(domain, cells + 1),
            Domain1D::Torus => Self::new(domain, cells.max(2)),
        }
    }

    pub fn domain(&self) -> Domain1D {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        match self.domain {
            Domain1D::Interval { a, b } => (b - a) / (self.n - 1) as f64,
            Domain1D::Torus => 1.0 / self.n as f64,
        }
    }

    pub fn node(&self, k: usize) -> f64 {
        match self.domain {
            Domain1D::Interval { a, b } => {
                if k == self.n - 1 {
                    b
                } else {
                    a + (b - a) * k as f64 / (self.n - 1) as f64
                }
            }
            Domain1D::Torus => k as f64 / self.n as f64,
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.node(k)).collect()
    }

    pub fn num_cells(&self) -> usize {
        match self.domain {
            Domain1D::Interval { .. } => self.n - 1,
            Domain1D::Torus => self.n,
        }
    }

    /// Node indices `(k, k+1)` of cell `e`, cyclic on the torus.
    pub fn cell(&self, e: usize) -> (usize, usize) {
        (e, (e + 1) % self.n)
    }

    /// Trapezoid weight of node `k` (including the factor `h`).
    pub fn quadrature_weight(&self, k: usize) -> f64 {
        let h = self.spacing();
        match self.domain {
            Domain1D::Interval { .. } if k == 0 || k == self.n - 1 => 0.5 * h,
            _ => h,
        }
    }

    /// Locates `x` as `(k0, k1, t)` with `x = (1-t) x_{k0} + t x_{k1}` along a cell.
    pub fn locate(&self, x: f64) -> Result<(usize, usize, f64)> {
        match self.domain {
            Domain1D::Interval { a, b } => {
                if !(a..=b).contains(&x) {
                    return Err(Error::Domain(format!("point {x} lies outside [{a}, {b}]")));
                }
                let h = self.spacing();
                let k = (((x - a) / h).floor() as usize).min(self.n - 2);
                let t = ((x - self.node(k)) / h).clamp(0.0, 1.0);
                Ok((k, k + 1, t))
            }
            Domain1D::Torus => {
                if !x.is_finite() {
                    return Err(Error::Domain(format!("point {x} is not finite")));
                }
                let w = self.domain.wrap(x) * self.n as f64;
                let k = (w.floor() as usize).min(self.n - 1);
                let t = (w - k as f64).clamp(0.0, 1.0);
                Ok((k, (k + 1) % self.n, t))
            }
        }
    }

    pub fn nearest_node(&self, x: f64) -> Result<usize> {
        let (k0, k1, t) = self.locate(x)?;
        Ok(if t <= 0.5 { k0 } else { k1 })
    }
}

/// Continuous piecewise-linear field given by its nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    mesh: Mesh,
    values: Vec<f64>,
}

impl Field {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::Shape(format!(
                "field has {} values for a mesh of {} nodes",
                values.len(),
                mesh.len()
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn constant(mesh: Mesh, c: f64) -> Self {
        Self {
            mesh,
            values: vec![c; mesh.len()],
        }
    }

    pub fn from_fn(mesh: Mesh, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..mesh.len()).map(|k| f(mesh.node(k))).collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn domain(&self) -> Domain1D {
        self.mesh.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            mesh: self.mesh,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn try_map(&self, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect::<Result<Vec<_>>>()?;
        Ok(Self { mesh: self.mesh, values })
    }

    pub fn interpolate(&self, x: f64) -> Result<f64> {
        let (k0, k1, t) = self.mesh.locate(x)?;
        Ok((1.0 - t) * self.values[k0] + t * self.values[k1])
    }

    /// Plain discrete total variation `Σ |u_{k+1} - u_k|` over all cells.
    pub fn total_variation(&self) -> f64 {
        (0..self.mesh.num_cells())
            .map(|e| {
                let (i, j) = self.mesh.cell(e);
                (self.values[j] - self.values[i]).abs()
            })
            .sum()
    }

    /// Trapezoid integral of the field.
    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, &v)| self.mesh.quadrature_weight(k) * v)
            .sum()
    }

    /// Cyclic shift of the node values, `out[k] = self[k + shift]` (torus only).
    pub fn rotated(&self, shift: usize) -> Result<Self> {
        if !self.mesh.domain.is_torus() {
            return Err(Error::Domain("rotation is only defined on the torus".into()));
        }
        let n = self.len();
        let values = (0..n).map(|k| self.values[(k + shift) % n]).collect();
        Ok(Self { mesh: self.mesh, values })
    }

    /// `(min, max)` of the field over the ball `{y : d_M(y, x) < r}` (closure).
    pub fn extrema_on_ball(&self, x: f64, r: f64) -> Result<(f64, f64)> {
        let domain = self.domain();
        if !domain.contains(x) {
            return Err(Error::Domain(format!("point {x} lies outside the domain")));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut push = |v: f64| {
            lo = lo.min(v);
            hi = hi.max(v);
        };
        if domain.is_torus() && r >= 0.5 {
            self.values.iter().for_each(|&v| push(v));
            return Ok((lo, hi));
        }
        for (k, &v) in self.values.iter().enumerate() {
            if domain.distance(self.mesh.node(k), x) < r {
                push(v);
            }
        }
        let (a, b) = domain.bounds();
        for y in [x - r, x, x + r] {
            let y = match domain {
                Domain1D::Interval { .. } => y.clamp(a, b),
                Domain1D::Torus => domain.wrap(y),
            };
            push(self.interpolate(y)?);
        }
        Ok((lo, hi))
    }

    /// Reads `x,value` rows that must match the mesh nodes in order.
    pub fn from_csv_reader<R: Read>(mesh: Mesh, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "value" {
            return Err(Error::Parse("field CSV header must be `x,value`".into()));
        }
        let mut values = Vec::with_capacity(mesh.len());
        for (k, record) in rdr.records().enumerate() {
            let record = record?;
            let parse = |i: usize| -> Result<f64> {
                record[i]
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", k + 2)))
            };
            let x = parse(0)?;
            if k >= mesh.len() || (x - mesh.node(k)).abs() > NODE_MATCH_TOL * mesh.domain.length().max(1.0) {
                return Err(Error::Shape(format!(
                    "field CSV row {} at x = {x} does not match the declared mesh",
                    k + 2
                )));
            }
            values.push(parse(1)?);
        }
        Self::new(mesh, values)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["x", "value"])?;
        for (k, v) in self.values.iter().enumerate() {
            wtr.write_record([self.mesh.node(k).to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// A point penalty `b v(a)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPenalty {
    pub a: f64,
    pub b: f64,
}

impl PointPenalty {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !(b >= 0.0) || !b.is_finite() {
            return Err(Error::Argument(format!("penalty needs finite a and b >= 0, got ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    pub fn check_interior(&self, domain: &Domain1D) -> Result<()> {
        if domain.is_interior(self.a) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "penalty location {} is not in the interior of the domain",
                self.a
            )))
        }
    }
}

/// Breakdown of a discrete energy. `total` is the sum of the other terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EnergyReport {
    pub gradient: f64,
    pub potential: f64,
    pub penalty: f64,
    pub weighted_tv: f64,
    pub fidelity: f64,
    pub total: f64,
}

impl EnergyReport {
    fn finish(mut self) -> Self {
        self.total = self.gradient + self.potential + self.penalty + self.weighted_tv + self.fidelity;
        self
    }

    /// The single-well Modica-Mortola part, `gradient + potential`.
    pub fn smm(&self) -> f64 {
        self.gradient + self.potential
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("eps must be positive, got {eps}")))
    }
}

fn check_same_mesh(a: &Field, b: &Field, what: &str) -> Result<()> {
    if a.mesh != b.mesh {
        return Err(Error::Shape(format!("{what}: fields live on different meshes")));
    }
    Ok(())
}

/// `(ε/2) ∫ |v'|^2 + (1/2ε) ∫ F(v)`.
pub fn energy_smm(v: &Field, eps: f64, p: &Potential) -> Result<EnergyReport> {
    check_eps(eps)?;
    let mesh = v.mesh();
    let h = mesh.spacing();
    let vals = v.values();
    let gradient = 0.5 * eps / h
        * (0..mesh.num_cells())
            .map(|e| {
                let (i, j) = mesh.cell(e);
                let d = vals[j] - vals[i];
                d * d
            })
            .sum::<f64>();
    let mut potential = 0.0;
    for (k, &x) in vals.iter().enumerate() {
        potential += mesh.quadrature_weight(k) * p.eval_f(x)?;
    }
    potential *= 0.5 / eps;
    Ok(EnergyReport {
        gradient,
        potential,
        ..Default::default()
    }
    .finish())
}

/// `Σ_ℓ b_ℓ v(a_ℓ)^2` with `v(a)` interpolated; rejects boundary locations.
pub fn penalty_energy(v: &Field, penalties: &[PointPenalty]) -> Result<f64> {
    let domain = v.domain();
    let mut sum = 0.0;
    for pen in penalties {
        pen.check_interior(&domain)?;
        let va = v.interpolate(pen.a)?;
        sum += pen.b * va * va;
    }
    Ok(sum)
}

/// [`energy_smm`] plus point penalties `Σ b_ℓ v(a_ℓ)^2`.
pub fn energy_smm_b(
    v: &Field,
    eps: f64,
    p: &Potential,
    penalties: &[PointPenalty],
) -> Result<EnergyReport> {
    let mut report = energy_smm(v, eps, p)?;
    report.penalty = penalty_energy(v, penalties)?;
    Ok(report.finish())
}

/// `σ Σ_k min(v_k^2, v_{k+1}^2) |u_{k+1} - u_k|`.
pub fn weighted_tv(u: &Field, v: &Field, sigma: f64) -> Result<f64> {
    check_same_mesh(u, v, "weighted_tv")?;
    if !(sigma >= 0.0) {
        return Err(Error::Argument(format!("sigma must be nonnegative, got {sigma}")));
    }
    let mesh = u.mesh();
    let (uv, vv) = (u.values(), v.values());
    let sum: f64 = (0..mesh.num_cells())
        .map(|e| {
            let (i, j) = mesh.cell(e);
            edge_weight(vv[i], vv[j]) * (uv[j] - uv[i]).abs()
        })
        .sum();
    Ok(sigma * sum)
}

/// Weight of one cell in the weighted total variation.
pub fn edge_weight(vi: f64, vj: f64) -> f64 {
    (vi * vi).min(vj * vj)
}

/// `λ ∫ (u - g)^2` by the trapezoid rule.
pub fn fidelity(u: &Field, g: &Field, lambda: f64) -> Result<f64> {
    check_same_mesh(u, g, "fidelity")?;
    let mesh = u.mesh();
    let sum: f64 = u
        .values()
        .iter()
        .zip(g.values())
        .enumerate()
        .map(|(k, (a, b))| mesh.quadrature_weight(k) * (a - b) * (a - b))
        .sum();
    Ok(lambda * sum)
}

/// Kobayashi-Warren-Carter energy with optional fidelity term.
pub fn energy_kwc(
    u: &Field,
    v: &Field,
    eps: f64,
    sigma: f64,
    p: &Potential,
    lambda: f64,
    g: Option<&Field>,
) -> Result<EnergyReport> {
    check_same_mesh(u, v, "energy_kwc")?;
    if !(lambda >= 0.0) {
        return Err(Error::Argument(format!("lambda must be nonnegative, got {lambda}")));
    }
    let fid = match (lambda > 0.0, g) {
        (true, Some(g)) => fidelity(u, g, lambda)?,
        (true, None) => {
            return Err(Error::Argument("lambda > 0 requires a fidelity datum g".into()));
        }
        (false, _) => 0.0,
    };
    let mut report = energy_smm(v, eps, p)?;
    report.weighted_tv = weighted_tv(u, v, sigma)?;
    report.fidelity = fid;
    Ok(report.finish())
}
