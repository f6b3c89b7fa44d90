//! Recovery sequences for the limsup inequality.
//!
//! Each exceptional point gets a block made of one or two optimal profiles
//! `dv/dx = √F(v)`, cut off to finite support by a unit-slope affine cap and
//! rescaled by ε. The ξ⁻ profile sits at `x_i` and the ξ⁺ profile abuts it. At
//! an interval endpoint the profile with the larger `G` is centred on the
//! endpoint, so only half of it is paid for, and the other one sits inside.
//! That gives the limit cost `2 min(G⁻, G⁺) + max(G⁻, G⁺)`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{energy_smm_b, Domain1D, Field, Mesh, PointPenalty};
use crate::limits::limit_energy_smm_b;
use crate::potential::Potential;
use crate::setvalued::{graph_distance, ExceptionalPoint, SetValuedLimit, SNAP_TOL};

/// Tabulated profiles are integrated down to `|v - 1| = DISTANCE_FLOOR · β`.
const DISTANCE_FLOOR: f64 = 1e-12;
/// Upper cap on the cutoff parameter.
const DELTA_CAP: f64 = 0.25;
/// Each included profile must span at least this many cells of its radius.
const MIN_CELLS_PER_RADIUS: f64 = 4.0;
const MAX_PROFILE_STEP: f64 = 1e-2;

/// `v(x, ξ)` for `x ≥ 0`, extended evenly.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    xi: f64,
    beta: f64,
    sign: f64,
    closed_form: bool,
    xs: Vec<f64>,
    vs: Vec<f64>,
    x_star: Option<f64>,
}

/// Samples `v(x, ξ)` on `[0, x_max]` with spacing `step`. The quadratic well
/// uses `v = 1 ∓ |1 - ξ| e^{-x}`; other potentials invert
/// `|∫_ξ^v dρ/√F(ρ)| = x` by Simpson steps of size about `step` in `x`.
pub fn profile(xi: f64, p: &Potential, x_max: f64, step: f64) -> Result<Profile> {
    if !(step > 0.0) || !(x_max > 0.0) {
        return Err(Error::Argument("profile needs positive x_max and step".into()));
    }
    let mut pr = build_profile(xi, p, step)?;
    if pr.closed_form {
        let m = (x_max / step).ceil() as usize;
        pr.xs = (0..=m).map(|k| x_max * k as f64 / m as f64).collect();
        pr.vs = pr.xs.iter().map(|&x| pr.eval(x)).collect();
    } else {
        let keep = pr.xs.partition_point(|&x| x < x_max) + 1;
        pr.xs.truncate(keep.min(pr.xs.len()));
        pr.vs.truncate(pr.xs.len());
    }
    Ok(pr)
}

fn build_profile(xi: f64, p: &Potential, step: f64) -> Result<Profile> {
    if !xi.is_finite() || xi == 1.0 {
        return Err(Error::Argument(format!("profile needs a finite ξ ≠ 1, got {xi}")));
    }
    let beta = (xi - 1.0).abs();
    let sign = (xi - 1.0).signum();
    if p.is_quadratic() {
        return Ok(Profile {
            xi,
            beta,
            sign,
            closed_form: true,
            xs: vec![0.0],
            vs: vec![xi],
            x_star: None,
        });
    }
    let (tv, tf) = p.samples().expect("tabulated potential has samples");
    let (lo, hi) = p.range().expect("tabulated potential has a range");
    if !(lo <= xi.min(1.0) && xi.max(1.0) <= hi) {
        return Err(Error::Range { value: xi, min: lo, max: hi });
    }
    for (&v, &f) in tv.iter().zip(tf) {
        let between = (v - xi) * (v - 1.0) < 0.0 || v == xi;
        if between && f <= 0.0 {
            return Err(Error::Potential(format!(
                "F vanishes at v = {v} between ξ = {xi} and 1; the profile is undefined"
            )));
        }
    }
    let tail = well_tail(tv, tf, sign);
    let inv_root = |d: f64| -> Result<f64> {
        let f = match tail {
            Some(t) if d < t.d1 => t.f(d),
            _ => p.eval_f(1.0 + sign * d)?,
        };
        if f <= 0.0 {
            return Err(Error::Potential(format!("F vanishes at v = {}", 1.0 + sign * d)));
        }
        Ok(1.0 / f.sqrt())
    };
    let floor = DISTANCE_FLOOR * beta;
    let mut xs = vec![0.0];
    let mut vs = vec![xi];
    let mut ds = vec![beta];
    let (mut d, mut x) = (beta, 0.0);
    while d > floor {
        let root = inv_root(d)?.recip();
        let dd = (step * root).min(0.5 * d).max(f64::MIN_POSITIVE);
        let next = (d - dd).max(floor);
        let h = d - next;
        x += h / 6.0 * (inv_root(d)? + 4.0 * inv_root(0.5 * (d + next))? + inv_root(next)?);
        d = next;
        xs.push(x);
        vs.push(1.0 + sign * d);
        ds.push(d);
    }
    let x_end = *xs.last().unwrap();
    let x_star = match tail {
        Some(t) if floor < t.d1 => t.remaining(floor).map(|r| x_end + r),
        _ => {
            // no usable model: the tail converges when little length is added over the last decades
            let x_mid = interp_desc(&ds, &xs, 1e-8 * beta);
            (x_end - x_mid <= 1e-2 * x_end.max(1.0)).then_some(x_end)
        }
    };
    Ok(Profile { xi, beta, sign, closed_form: false, xs, vs, x_star })
}

/// Power law `F ≈ f1 (d / d1)^q` in the table cell next to the well, fitted
/// through the two nearest samples. PCHIP would flatten a cusp there.
#[derive(Debug, Clone, Copy)]
struct WellTail {
    d1: f64,
    f1: f64,
    q: f64,
}

impl WellTail {
    fn f(&self, d: f64) -> f64 {
        self.f1 * (d / self.d1).powf(self.q)
    }

    /// `∫_0^d dρ / √F`, finite only for `q < 2`.
    fn remaining(&self, d: f64) -> Option<f64> {
        let a = 1.0 - 0.5 * self.q;
        (self.q < 1.9).then(|| self.d1.powf(0.5 * self.q) / self.f1.sqrt() * d.powf(a) / a)
    }
}

fn well_tail(tv: &[f64], tf: &[f64], sign: f64) -> Option<WellTail> {
    let j = tv.iter().position(|&v| (v - 1.0).abs() <= 1e-12)?;
    if tf[j] > 0.0 {
        return None;
    }
    let (k1, k2) = if sign > 0.0 {
        (j + 1, j + 2)
    } else {
        (j.checked_sub(1)?, j.checked_sub(2)?)
    };
    let (&v1, &f1) = (tv.get(k1)?, tf.get(k1)?);
    let (&v2, &f2) = (tv.get(k2)?, tf.get(k2)?);
    let (d1, d2) = ((v1 - 1.0).abs(), (v2 - 1.0).abs());
    if !(f1 > 0.0 && f2 > 0.0) {
        return None;
    }
    let q = (f2 / f1).ln() / (d2 / d1).ln();
    (q.is_finite() && q > 0.0).then_some(WellTail { d1, f1, q })
}

/// Linear interpolation of `ys` at `t` along strictly decreasing `ts`.
fn interp_desc(ts: &[f64], ys: &[f64], t: f64) -> f64 {
    let k = ts.partition_point(|&s| s > t);
    if k == 0 {
        return ys[0];
    }
    if k >= ts.len() {
        return *ys.last().unwrap();
    }
    let w = (ts[k - 1] - t) / (ts[k - 1] - ts[k]);
    ys[k - 1] + w * (ys[k] - ys[k - 1])
}

impl Profile {
    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// `|ξ - 1|`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Length after which `v = 1`; `None` when `v` only approaches 1 asymptotically.
    pub fn x_star(&self) -> Option<f64> {
        self.x_star
    }

    pub fn samples(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.vs)
    }

    /// `v(|x|, ξ)`. Past the tabulated range a finite `x_*` gives 1, otherwise
    /// the last sample is held.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        if self.closed_form {
            return 1.0 + self.sign * self.beta * (-x).exp();
        }
        if let Some(xs) = self.x_star {
            if x >= xs {
                return 1.0;
            }
        }
        let k = self.xs.partition_point(|&s| s <= x);
        if k >= self.xs.len() {
            return *self.vs.last().unwrap();
        }
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        self.vs[k - 1] + t * (self.vs[k] - self.vs[k - 1])
    }

    /// The `x` at which `|v - 1| = d`, for `0 < d ≤ β`.
    pub fn x_at_distance(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) {
            return Err(Error::Argument(format!("distance must be positive, got {d}")));
        }
        if d >= self.beta {
            return Ok(0.0);
        }
        if self.closed_form {
            return Ok((self.beta / d).ln());
        }
        let ds: Vec<f64> = self.vs.iter().map(|v| (v - 1.0).abs()).collect();
        if d < *ds.last().unwrap() {
            return Err(Error::Argument(format!("distance {d} is below the tabulated profile")));
        }
        Ok(interp_desc(&ds, &self.xs, d))
    }
}

/// Profile with the tail `|v - 1| < δβ` replaced by a unit-slope affine cap,
/// equal to 1 for `|x| ≥ η`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffProfile {
    base: Profile,
    delta: f64,
    x_switch: f64,
    eta: f64,
}

pub fn cutoff(pr: &Profile, delta: f64) -> Result<CutoffProfile> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Argument(format!("cutoff parameter must lie in (0, 1), got {delta}")));
    }
    let cap = delta * pr.beta;
    let x_switch = pr.x_at_distance(cap)?;
    Ok(CutoffProfile {
        base: pr.clone(),
        delta,
        x_switch,
        eta: x_switch + cap,
    })
}

impl CutoffProfile {
    pub fn base(&self) -> &Profile {
        &self.base
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Where the profile hands over to the cap.
    pub fn x_switch(&self) -> f64 {
        self.x_switch
    }

    /// Support radius.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        if x <= self.x_switch {
            self.base.eval(x)
        } else if x < self.eta {
            1.0 + self.base.sign * (self.eta - x)
        } else {
            1.0
        }
    }
}

/// `δ_F(β)`: at most 0.25, and small enough that `F ≤ 1` wherever the cap lives.
fn delta_f(p: &Potential, beta: f64) -> f64 {
    let radius = match p.samples() {
        None => 1.0,
        Some((tv, tf)) => {
            let (lo, hi) = p.range().unwrap();
            let mut r = (1.0 - lo).max(hi - 1.0);
            for (&v, &f) in tv.iter().zip(tf) {
                if f > 1.0 {
                    r = r.min((v - 1.0).abs());
                }
            }
            r
        }
    };
    DELTA_CAP.min(radius / beta)
}

#[derive(Debug, Clone, PartialEq)]
struct Part {
    center: f64,
    profile: CutoffProfile,
}

/// One patched block of a recovery field.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryBlock {
    pub entry: ExceptionalPoint,
    pub delta: f64,
    pub boundary: bool,
    /// Support `[lo, hi]`; on the torus it may extend past `[0, 1)`.
    pub support: (f64, f64),
    /// Energy bound of this block.
    pub bound: f64,
    parts: Vec<Part>,
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub field: Field,
    /// `Σ` of the block bounds over included blocks.
    pub bound: f64,
    /// Included blocks, in order of decreasing `β`.
    pub blocks: Vec<RecoveryBlock>,
    eps: f64,
    domain: Domain1D,
}

impl Recovery {
    /// The continuous patched function at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        1.0 + self
            .blocks
            .iter()
            .flat_map(|b| b.parts.iter())
            .map(|part| part.profile.eval(displacement(&self.domain, x, part.center) / self.eps) - 1.0)
            .sum::<f64>()
    }

    pub fn included(&self) -> usize {
        self.blocks.len()
    }
}

fn displacement(domain: &Domain1D, x: f64, center: f64) -> f64 {
    match domain {
        Domain1D::Interval { .. } => x - center,
        Domain1D::Torus => (x - center + 0.5).rem_euclid(1.0) - 0.5,
    }
}

fn overlaps(domain: &Domain1D, a: (f64, f64), b: (f64, f64)) -> bool {
    let shifts: &[f64] = match domain {
        Domain1D::Interval { .. } => &[0.0],
        Domain1D::Torus => &[-2.0, -1.0, 0.0, 1.0, 2.0],
    };
    shifts.iter().any(|m| a.1 > b.0 + m && b.1 + m > a.0)
}

fn profile_step(p: &Potential) -> f64 {
    p.quadrature_step().unwrap_or(MAX_PROFILE_STEP).min(MAX_PROFILE_STEP)
}

/// Builds a block, or `None` when it does not fit in the domain at this ε.
fn build_block(
    e: &ExceptionalPoint,
    delta: f64,
    eps: f64,
    p: &Potential,
    domain: &Domain1D,
) -> Result<Option<RecoveryBlock>> {
    let step = profile_step(p);
    let make = |xi: f64| -> Result<Option<(CutoffProfile, f64)>> {
        if xi == 1.0 {
            return Ok(None);
        }
        let c = cutoff(&build_profile(xi, p, step)?, delta)?;
        Ok(Some((c, p.eval_g(xi)?)))
    };
    let minus = make(e.lo)?;
    let plus = make(e.hi)?;
    let radius = |part: &Option<(CutoffProfile, f64)>| part.as_ref().map_or(0.0, |(c, _)| eps * c.eta());
    let (r_minus, r_plus) = (radius(&minus), radius(&plus));
    let (g_minus, g_plus) = (p.eval_g(e.lo)?, p.eval_g(e.hi)?);
    let beta = e.beta();
    let x = e.x;
    let boundary = domain.is_boundary(x, SNAP_TOL);

    let mut parts = Vec::new();
    let (support, bound) = if boundary {
        let (a, b) = domain.bounds();
        let inward = if (x - b).abs() <= SNAP_TOL { -1.0 } else { 1.0 };
        let x = if inward < 0.0 { b } else { a };
        // the larger-G profile goes on the endpoint
        let (big, small, r_big, r_small) = if g_minus >= g_plus {
            (minus, plus, r_minus, r_plus)
        } else {
            (plus, minus, r_plus, r_minus)
        };
        if let Some((c, _)) = big {
            parts.push(Part { center: x, profile: c });
        }
        if let Some((c, _)) = small {
            parts.push(Part { center: x + inward * (r_big + r_small), profile: c });
        }
        let far = x + inward * (r_big + 2.0 * r_small);
        let support = if inward < 0.0 { (far, x) } else { (x, far) };
        let bound = 2.0 * g_minus.min(g_plus) + g_minus.max(g_plus) + 3.0 * beta * delta;
        (support, bound)
    } else {
        let mut right = true;
        let mut support = (x - r_minus, x + r_minus + 2.0 * r_plus);
        if let Domain1D::Interval { a, b } = *domain {
            if support.1 > b {
                right = false;
                support = (x - r_minus - 2.0 * r_plus, x + r_minus);
            }
            if support.0 < a || support.1 > b {
                return Ok(None);
            }
        }
        if let Some((c, _)) = minus {
            parts.push(Part { center: x, profile: c });
        }
        if let Some((c, _)) = plus {
            let offset = r_minus + r_plus;
            let center = if right { x + offset } else { x - offset };
            parts.push(Part { center, profile: c });
        }
        (support, 2.0 * (g_minus + g_plus) + 4.0 * beta * delta)
    };
    match domain {
        Domain1D::Interval { a, b } => {
            if support.0 < *a - SNAP_TOL || support.1 > *b + SNAP_TOL {
                return Ok(None);
            }
        }
        Domain1D::Torus => {
            if support.1 - support.0 >= 1.0 {
                return Ok(None);
            }
        }
    }
    Ok(Some(RecoveryBlock {
        entry: *e,
        delta,
        boundary,
        support,
        bound,
        parts,
    }))
}

/// Patched recovery field `w = 1 + Σ_{i ≤ j(μ,ε)} (v_i - 1)` on `mesh`.
///
/// Entries are taken in order of decreasing `β_i` with `δ_i = 2^{-i-2} μ`
/// (capped by `δ_F`). The longest prefix of blocks that fit in the domain with
/// mutually disjoint supports is included.
pub fn build_recovery(xi: &SetValuedLimit, eps: f64, mu: f64, p: &Potential, mesh: Mesh) -> Result<Recovery> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Argument(format!("eps must be positive, got {eps}")));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Argument(format!("mu must be positive, got {mu}")));
    }
    let domain = xi.domain();
    if mesh.domain() != domain {
        return Err(Error::Argument("mesh and set-valued limit live on different domains".into()));
    }
    let mut entries: Vec<ExceptionalPoint> = xi.exceptional().to_vec();
    entries.sort_by(|a, b| b.beta().total_cmp(&a.beta()).then(a.x.total_cmp(&b.x)));

    let mut blocks: Vec<RecoveryBlock> = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        let delta = (0.5f64.powi(i as i32 + 3) * mu).min(delta_f(p, e.beta()));
        let Some(block) = build_block(e, delta, eps, p, &domain)? else {
            break;
        };
        if blocks.iter().any(|b| overlaps(&domain, b.support, block.support)) {
            break;
        }
        blocks.push(block);
    }

    let h = mesh.spacing();
    for b in &blocks {
        for part in &b.parts {
            let r = eps * part.profile.eta();
            if r < MIN_CELLS_PER_RADIUS * h {
                return Err(Error::Resolution(format!(
                    "profile radius {r:.3e} at x = {} spans fewer than {MIN_CELLS_PER_RADIUS} cells of size {h:.3e}",
                    b.entry.x
                )));
            }
        }
    }

    let bound = blocks.iter().fold(0.0, |s, b| s + b.bound);
    let mut recovery = Recovery {
        field: Field::constant(mesh, 1.0),
        bound,
        blocks,
        eps,
        domain,
    };
    recovery.field = Field::from_fn(mesh, |x| recovery.eval(x));
    Ok(recovery)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimsupOptions {
    /// Mesh spacing is `ε / cells_per_eps`.
    pub cells_per_eps: f64,
    /// Sampling resolution for graph distances.
    pub resolution: f64,
    /// Allowed excess of the discrete energy over `limit + μ`.
    pub slack: f64,
    pub penalties: Vec<PointPenalty>,
}

impl Default for LimsupOptions {
    fn default() -> Self {
        Self {
            cells_per_eps: 16.0,
            resolution: 1e-3,
            slack: 0.02,
            penalties: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimsupRow {
    pub eps: f64,
    pub discrete_energy: f64,
    pub limit_energy: f64,
    pub mu: f64,
    pub graph_distance: f64,
    pub bound: f64,
    pub included: usize,
    pub energy_ok: bool,
    pub distance_ok: bool,
}

impl LimsupRow {
    pub fn pass(&self) -> bool {
        self.energy_ok && self.distance_ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimsupTable {
    pub rows: Vec<LimsupRow>,
}

impl LimsupTable {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(LimsupRow::pass)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "eps",
            "discrete_energy",
            "limit_energy",
            "mu",
            "graph_distance",
            "bound",
            "included",
            "pass",
        ])?;
        for r in &self.rows {
            wtr.write_record([
                r.eps.to_string(),
                r.discrete_energy.to_string(),
                r.limit_energy.to_string(),
                r.mu.to_string(),
                r.graph_distance.to_string(),
                r.bound.to_string(),
                r.included.to_string(),
                r.pass().to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Builds the recovery field at each ε of a strictly decreasing schedule and
/// tabulates its energy against the limit energy and its graph distance to `Ξ`.
///
/// A row passes when `energy ≤ limit + μ + slack` and the graph distance has
/// not grown since the previous row by more than the sampling resolution.
pub fn verify_limsup(
    xi: &SetValuedLimit,
    p: &Potential,
    eps_schedule: &[f64],
    mu: f64,
    opts: &LimsupOptions,
) -> Result<LimsupTable> {
    if eps_schedule.is_empty() {
        return Err(Error::Argument("the ε schedule is empty".into()));
    }
    if eps_schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Argument("the ε schedule must be strictly decreasing".into()));
    }
    if !(opts.cells_per_eps > 0.0) || !(opts.resolution > 0.0) || !(opts.slack >= 0.0) {
        return Err(Error::Argument("invalid mesh rule, resolution or slack".into()));
    }
    let limit = limit_energy_smm_b(xi, p, &opts.penalties)?;
    let measured: Vec<(f64, f64, f64, usize)> = eps_schedule
        .par_iter()
        .map(|&eps| {
            let mesh = Mesh::with_max_spacing(xi.domain(), eps / opts.cells_per_eps)?;
            let rec = build_recovery(xi, eps, mu, p, mesh)?;
            let energy = energy_smm_b(&rec.field, eps, p, &opts.penalties)?.total;
            let dist = graph_distance(&rec.field, xi, opts.resolution)?;
            Ok((energy, dist, rec.bound, rec.included()))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(measured.len());
    let mut prev: Option<f64> = None;
    for (&eps, &(energy, dist, bound, included)) in eps_schedule.iter().zip(&measured) {
        rows.push(LimsupRow {
            eps,
            discrete_energy: energy,
            limit_energy: limit,
            mu,
            graph_distance: dist,
            bound,
            included,
            energy_ok: energy <= limit + mu + opts.slack,
            distance_ok: prev.map_or(true, |d| dist <= d + opts.resolution),
        });
        prev = Some(dist);
    }
    Ok(LimsupTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::energy_smm;

    #[test]
    fn quadratic_profile_values() {
        let p = Potential::quadratic();
        let pr = profile(0.0, &p, 5.0, 0.01).unwrap();
        assert!((pr.eval(2f64.ln()) - 0.5).abs() < 1e-15);
        assert_eq!(pr.eval(0.0), 0.0);
        assert!(pr.x_star().is_none());
        // dv/dx = √F(v) = |v - 1|
        let x = 0.7;
        let d = 1e-6;
        let slope = (pr.eval(x + d) - pr.eval(x - d)) / (2.0 * d);
        assert!((slope - (1.0 - pr.eval(x))).abs() < 1e-8);
        assert!(profile(1.0, &p, 5.0, 0.01).is_err());
    }

    #[test]
    fn tabulated_profile_matches_closed_form() {
        let q = Potential::quadratic();
        let t = Potential::from_fn(-1.0, 3.0, 4001, 1e-3, |v| (v - 1.0) * (v - 1.0)).unwrap();
        for xi in [0.0, 0.4, 1.8] {
            let exact = profile(xi, &q, 8.0, 0.01).unwrap();
            let tab = profile(xi, &t, 8.0, 1e-3).unwrap();
            for k in 0..60 {
                let x = 0.1 * k as f64;
                assert!((exact.eval(x) - tab.eval(x)).abs() < 1e-5, "xi = {xi}, x = {x}");
            }
            assert!(tab.x_star().is_none());
        }
    }

    #[test]
    fn finite_blowup_detected() {
        // F = |v - 1| reaches 1 at x_* = 2√β
        let t = Potential::from_fn(-1.0, 3.0, 40001, 1e-4, |v| (v - 1.0).abs()).unwrap();
        let pr = profile(0.0, &t, 5.0, 1e-3).unwrap();
        let xs = pr.x_star().expect("finite x_*");
        assert!((xs - 2.0).abs() < 1e-3);
        assert_eq!(pr.eval(3.0), 1.0);
    }

    #[test]
    fn profile_through_second_zero_rejected() {
        let t = Potential::from_fn(-2.0, 3.0, 501, 1e-3, |v| (v - 1.0).powi(2) * (v + 1.0).powi(2)).unwrap();
        assert!(matches!(profile(-1.5, &t, 5.0, 1e-3), Err(Error::Potential(_))));
    }

    #[test]
    fn cutoff_quadratic() {
        let p = Potential::quadratic();
        let pr = profile(0.0, &p, 10.0, 0.01).unwrap();
        let c = cutoff(&pr, 0.1).unwrap();
        assert!((c.x_switch() - 10f64.ln()).abs() < 1e-14);
        assert!((c.eta() - (10f64.ln() + 0.1)).abs() < 1e-14);
        assert_eq!(c.eval(c.eta()), 1.0);
        assert_eq!(c.eval(-c.eta() - 1.0), 1.0);
        let c2 = cutoff(&pr, 0.01).unwrap();
        assert!(c2.eta() > c.eta());
        assert!(cutoff(&pr, 1.0).is_err());
    }

    #[test]
    fn empty_limit_gives_one() {
        let mesh = Mesh::new(Domain1D::Torus, 64).unwrap();
        let r = build_recovery(&SetValuedLimit::empty(Domain1D::Torus), 0.01, 0.1, &Potential::quadratic(), mesh)
            .unwrap();
        assert!(r.field.values().iter().all(|&v| v == 1.0));
        assert_eq!(r.bound, 0.0);
    }

    #[test]
    fn torus_single_entry_energy() {
        let p = Potential::quadratic();
        let xi = SetValuedLimit::new(Domain1D::Torus, vec![ExceptionalPoint { x: 0.5, lo: 0.5, hi: 1.0 }]).unwrap();
        let eps = 0.01;
        let mesh = Mesh::with_max_spacing(Domain1D::Torus, eps / 32.0).unwrap();
        let r = build_recovery(&xi, eps, 0.1, &p, mesh).unwrap();
        assert_eq!(r.included(), 1);
        let e = energy_smm(&r.field, eps, &p).unwrap().total;
        assert!(e <= 0.25 + 0.1 + 1e-3, "energy {e}");
        assert!(e <= r.bound + 1e-3);
        assert_eq!(r.eval(0.5), 0.5);
    }

    #[test]
    fn right_endpoint_block() {
        let p = Potential::quadratic();
        let d = Domain1D::interval(0.0, 1.0).unwrap();
        let xi = SetValuedLimit::new(d, vec![ExceptionalPoint { x: 1.0, lo: 0.0, hi: 1.0 }]).unwrap();
        let mesh = Mesh::with_max_spacing(d, 0.01 / 32.0).unwrap();
        let r = build_recovery(&xi, 0.01, 0.1, &p, mesh).unwrap();
        let b = &r.blocks[0];
        assert!(b.boundary);
        let delta = b.delta;
        assert!((b.bound - (0.5 + 3.0 * delta)).abs() < 1e-15);
        assert_eq!(r.eval(1.0), 0.0);
        let e = energy_smm(&r.field, 0.01, &p).unwrap().total;
        assert!(e <= b.bound + 1e-3, "energy {e}");
    }

    #[test]
    fn coarse_mesh_is_resolution_error() {
        let p = Potential::quadratic();
        let xi = SetValuedLimit::new(Domain1D::Torus, vec![ExceptionalPoint { x: 0.5, lo: 0.5, hi: 1.0 }]).unwrap();
        let mesh = Mesh::new(Domain1D::Torus, 50).unwrap();
        assert!(matches!(build_recovery(&xi, 1e-3, 0.1, &p, mesh), Err(Error::Resolution(_))));
    }
}
