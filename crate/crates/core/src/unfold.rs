//! Arc-length unfolding of graphs and the diagnostics built on it: relaxed
//! limits of field sequences, pointwise semi-limits read off an unfolding, and
//! the decomposition of an unfolded profile into bumps over exceptional fibers.
//!
//! A piecewise-linear graph unfolds exactly: every cell becomes one segment of
//! the arc-length curve, so the unfolded total variation equals the original.
//! On the torus the graph is cut at node 0 and the closing cell becomes the
//! last segment.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fields::{Domain1D, Field};

/// Relative slack for the Lipschitz checks on supplied samples.
const LIP_TOL: f64 = 1e-12;
/// Slack for the monotone-table assertions in [`relaxed_limits`].
const TABLE_TOL: f64 = 1e-12;

/// Samples `(s_k, x(s_k), U(s_k))` of an arc-length parametrized graph,
/// linear between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedCurve {
    s: Vec<f64>,
    x: Vec<f64>,
    values: Vec<f64>,
    periodic: bool,
}

impl UnfoldedCurve {
    /// Builds a curve from samples, checking that `s` starts at 0, is
    /// nondecreasing, and that `x` and `U` are 1-Lipschitz in `s`.
    pub fn from_samples(s: Vec<f64>, x: Vec<f64>, values: Vec<f64>, periodic: bool) -> Result<Self> {
        if s.len() < 2 || s.len() != x.len() || s.len() != values.len() {
            return Err(Error::Shape("unfolded curve needs at least two matching samples".into()));
        }
        if s[0] != 0.0 {
            return Err(Error::Argument("arc length must start at 0".into()));
        }
        for k in 0..s.len() - 1 {
            let ds = s[k + 1] - s[k];
            let slack = LIP_TOL * ds.abs().max(1e-300) + f64::EPSILON * s[k + 1].abs();
            if !(ds >= 0.0) {
                return Err(Error::Argument(format!("arc length decreases at sample {k}")));
            }
            if (x[k + 1] - x[k]).abs() > ds + slack || (values[k + 1] - values[k]).abs() > ds + slack {
                return Err(Error::Argument(format!("samples are not 1-Lipschitz at segment {k}")));
            }
        }
        Ok(Self { s, x, values, periodic })
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// `U(s_k)`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Total length `L`.
    pub fn length(&self) -> f64 {
        *self.s.last().unwrap()
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn total_variation(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    fn segment_at(&self, s: f64) -> (usize, f64) {
        let s = s.clamp(0.0, self.length());
        let k = self.s.partition_point(|&t| t <= s).clamp(1, self.s.len() - 1) - 1;
        let ds = self.s[k + 1] - self.s[k];
        let t = if ds > 0.0 { ((s - self.s[k]) / ds).clamp(0.0, 1.0) } else { 0.0 };
        (k, t)
    }

    /// `x(s)`, with `s` clamped to `[0, L]`.
    pub fn x_at(&self, s: f64) -> f64 {
        let (k, t) = self.segment_at(s);
        (1.0 - t) * self.x[k] + t * self.x[k + 1]
    }

    /// `U(s)`, with `s` clamped to `[0, L]`.
    pub fn value_at(&self, s: f64) -> f64 {
        let (k, t) = self.segment_at(s);
        (1.0 - t) * self.values[k] + t * self.values[k + 1]
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["s", "x", "U"])?;
        for k in 0..self.s.len() {
            wtr.write_record([self.s[k].to_string(), self.x[k].to_string(), self.values[k].to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Unfolds the graph of `u` by arc length.
pub fn unfold(u: &Field) -> UnfoldedCurve {
    let mesh = u.mesh();
    let h = mesh.spacing();
    let vals = u.values();
    let periodic = mesh.domain().is_torus();
    let count = if periodic { vals.len() + 1 } else { vals.len() };
    let mut s = Vec::with_capacity(count);
    let mut x = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    s.push(0.0);
    x.push(mesh.node(0));
    values.push(vals[0]);
    for e in 0..mesh.num_cells() {
        let (i, j) = mesh.cell(e);
        let du = vals[j] - vals[i];
        s.push(s[e] + h.hypot(du));
        x.push(if j == 0 { 1.0 } else { mesh.node(j) });
        values.push(vals[j]);
    }
    UnfoldedCurve { s, x, values, periodic }
}

/// Largest `|x_a(s) - x_b(s)|` over the union of both sample grids, each curve
/// clamped to its own length. A finite-scale proxy for uniform convergence of
/// the inverse arc-length maps.
pub fn x_deviation(a: &UnfoldedCurve, b: &UnfoldedCurve) -> f64 {
    a.s.iter()
        .chain(b.s.iter())
        .map(|&s| (a.x_at(s) - b.x_at(s)).abs())
        .fold(0.0, f64::max)
}

/// Finite-sequence relaxed limits at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedLimits {
    pub liminf: f64,
    pub limsup: f64,
    /// `sup{g_k(y) : d(y, x) < 1/j, k ≥ j}` for `j = 1..J`; nonincreasing.
    pub sup_table: Vec<f64>,
    /// The matching infima; nondecreasing.
    pub inf_table: Vec<f64>,
}

/// `limsup*` and `liminf*` of a finite sequence at `x`, reported as the last
/// entries of the monotone tables. Fields may live on different meshes of the
/// same domain.
pub fn relaxed_limits(seq: &[Field], x: f64) -> Result<RelaxedLimits> {
    let first = seq
        .first()
        .ok_or_else(|| Error::Argument("relaxed limits need a nonempty sequence".into()))?;
    let domain = first.domain();
    if seq.iter().any(|f| f.domain() != domain) {
        return Err(Error::Domain("all fields must share a domain".into()));
    }
    let count = seq.len();
    let mut sup_table = vec![f64::NEG_INFINITY; count];
    let mut inf_table = vec![f64::INFINITY; count];
    for j in 0..count {
        let r = 1.0 / (j + 1) as f64;
        for field in &seq[j..] {
            let (lo, hi) = field.extrema_on_ball(x, r)?;
            sup_table[j] = sup_table[j].max(hi);
            inf_table[j] = inf_table[j].min(lo);
        }
    }
    for w in sup_table.windows(2) {
        if w[1] > w[0] + TABLE_TOL * (1.0 + w[0].abs()) {
            return Err(Error::Internal("sup table is not nonincreasing".into()));
        }
    }
    for w in inf_table.windows(2) {
        if w[1] < w[0] - TABLE_TOL * (1.0 + w[0].abs()) {
            return Err(Error::Internal("inf table is not nondecreasing".into()));
        }
    }
    Ok(RelaxedLimits {
        liminf: inf_table[count - 1],
        limsup: sup_table[count - 1],
        sup_table,
        inf_table,
    })
}

fn curve_distance(periodic: bool, a: f64, b: f64) -> f64 {
    if periodic {
        Domain1D::Torus.distance(a, b)
    } else {
        (a - b).abs()
    }
}

/// Pieces of segment `k` on which `d(x(s), x0) ≤ tol`, as parameter ranges in `[0, 1]`.
fn window_pieces(curve: &UnfoldedCurve, k: usize, x0: f64, tol: f64) -> Vec<(f64, f64)> {
    let (xa, xb) = (curve.x[k], curve.x[k + 1]);
    let mut cuts = vec![0.0, 1.0];
    let shifts: &[f64] = if curve.periodic { &[-1.0, 0.0, 1.0] } else { &[0.0] };
    if xb != xa {
        for m in shifts {
            for c in [x0 + m - tol, x0 + m + tol] {
                let t = (c - xa) / (xb - xa);
                if t > 0.0 && t < 1.0 {
                    cuts.push(t);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2)
        .filter(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let xm = xa + mid * (xb - xa);
            w[1] > w[0] && curve_distance(curve.periodic, xm, x0) <= tol
        })
        .map(|w| (w[0], w[1]))
        .collect()
}

/// `(min, max)` of `U(s)` over `{s : d(x(s), x) ≤ tol}`.
pub fn pointwise_semilimits_from_unfolding(curve: &UnfoldedCurve, x: f64, tol: f64) -> Result<(f64, f64)> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..curve.len() - 1 {
        for (t0, t1) in window_pieces(curve, k, x, tol) {
            for t in [t0, t1] {
                let v = (1.0 - t) * curve.values[k] + t * curve.values[k + 1];
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if lo > hi {
        return Err(Error::Domain(format!("no sample of the unfolded curve lies within {tol} of x = {x}")));
    }
    Ok((lo, hi))
}

/// One maximal s-interval of a fiber on which `V > zero_tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoPart {
    pub s_start: f64,
    pub s_end: f64,
    /// Peak `ρ_{x,j}` of `V` on the interval.
    pub rho: f64,
    /// `1/2` when the interval reaches an end of a non-periodic curve, else `1`.
    pub chi_bar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoEntry {
    pub x: f64,
    pub parts: Vec<RhoPart>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoDecomposition {
    pub entries: Vec<RhoEntry>,
    /// `Σ_x Σ_j 2 χ̄ ρ_{x,j}`.
    pub bound: f64,
}

impl RhoDecomposition {
    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(|e| e.parts.is_empty())
    }
}

/// Default zero band: `1e-9 · max V`.
pub fn default_zero_tol(curve: &UnfoldedCurve) -> f64 {
    1e-9 * curve.values.iter().cloned().fold(0.0, f64::max)
}

/// Splits the fibers `{s : d(x(s), x_i) ≤ fiber_tol}` at the zeros of `V`
/// (values `≤ zero_tol`) and records the peak of each piece.
///
/// A point of the curve within `fiber_tol` of several `x_i` belongs to the
/// nearest one, so no stretch of the curve is counted twice.
pub fn rho_decomposition(
    curve: &UnfoldedCurve,
    exceptional_xs: &[f64],
    zero_tol: f64,
    fiber_tol: f64,
) -> Result<RhoDecomposition> {
    if !(zero_tol >= 0.0) || !(fiber_tol > 0.0) {
        return Err(Error::Argument("zero_tol must be nonnegative and fiber_tol positive".into()));
    }
    let periodic = curve.periodic;
    let owner = |x: f64| -> Option<usize> {
        exceptional_xs
            .iter()
            .enumerate()
            .map(|(i, &xi)| (i, curve_distance(periodic, x, xi)))
            .filter(|&(_, d)| d <= fiber_tol)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    };

    // candidate x-coordinates where ownership can change
    let mut x_cuts: Vec<f64> = Vec::new();
    let mut sorted: Vec<f64> = exceptional_xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &xi in &sorted {
        x_cuts.push(xi - fiber_tol);
        x_cuts.push(xi + fiber_tol);
    }
    for w in sorted.windows(2) {
        x_cuts.push(0.5 * (w[0] + w[1]));
    }
    if periodic && sorted.len() > 1 {
        x_cuts.push(0.5 * (sorted[sorted.len() - 1] + sorted[0] + 1.0));
    }
    let shifts: &[f64] = if periodic { &[-1.0, 0.0, 1.0] } else { &[0.0] };

    struct Run {
        owner: usize,
        start: f64,
        end: f64,
        peak: f64,
    }
    let mut runs: Vec<Run> = Vec::new();
    let mut current: Option<Run> = None;
    let length = curve.length();

    for k in 0..curve.len() - 1 {
        let (xa, xb) = (curve.x[k], curve.x[k + 1]);
        let (va, vb) = (curve.values[k], curve.values[k + 1]);
        let (sa, sb) = (curve.s[k], curve.s[k + 1]);
        let mut ts = vec![0.0, 1.0];
        if xb != xa {
            for &c in &x_cuts {
                for m in shifts {
                    let t = (c + m - xa) / (xb - xa);
                    if t > 0.0 && t < 1.0 {
                        ts.push(t);
                    }
                }
            }
        }
        if vb != va {
            let t = (zero_tol - va) / (vb - va);
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        for w in ts.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let tm = 0.5 * (t0 + t1);
            let vm = va + tm * (vb - va);
            let who = owner(xa + tm * (xb - xa)).filter(|_| vm > zero_tol);
            let s0 = sa + t0 * (sb - sa);
            let s1 = sa + t1 * (sb - sa);
            let peak = (va + t0 * (vb - va)).max(va + t1 * (vb - va));
            match (who, current.as_mut()) {
                (Some(i), Some(run)) if run.owner == i => {
                    run.end = s1;
                    run.peak = run.peak.max(peak);
                }
                (Some(i), _) => {
                    if let Some(run) = current.take() {
                        runs.push(run);
                    }
                    current = Some(Run { owner: i, start: s0, end: s1, peak });
                }
                (None, _) => {
                    if let Some(run) = current.take() {
                        runs.push(run);
                    }
                }
            }
        }
    }
    if let Some(run) = current.take() {
        runs.push(run);
    }

    // join the run that crosses the seam of a periodic curve
    if periodic && runs.len() > 1 {
        let first_touches = runs[0].start <= 0.0;
        let last = runs.len() - 1;
        let last_touches = runs[last].end >= length;
        if first_touches && last_touches && runs[0].owner == runs[last].owner {
            let tail = runs.pop().unwrap();
            runs[0].start = tail.start - length;
            runs[0].peak = runs[0].peak.max(tail.peak);
        }
    }

    let mut entries: Vec<RhoEntry> = exceptional_xs
        .iter()
        .map(|&x| RhoEntry { x, parts: Vec::new() })
        .collect();
    let mut bound = 0.0;
    for run in runs {
        let touches = !periodic && (run.start <= 0.0 || run.end >= length);
        let chi_bar = if touches { 0.5 } else { 1.0 };
        bound += 2.0 * chi_bar * run.peak;
        entries[run.owner].parts.push(RhoPart {
            s_start: run.start,
            s_end: run.end,
            rho: run.peak,
            chi_bar,
        });
    }
    for e in &mut entries {
        e.parts.sort_by(|a, b| a.s_start.total_cmp(&b.s_start));
    }
    Ok(RhoDecomposition { entries, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Mesh;

    fn interval(a: f64, b: f64, n: usize) -> Mesh {
        Mesh::new(Domain1D::interval(a, b).unwrap(), n).unwrap()
    }

    #[test]
    fn flat_graph() {
        let c = unfold(&Field::constant(interval(0.0, 2.5, 11), 3.0));
        assert!((c.length() - 2.5).abs() < 1e-14);
        assert!(c.values().iter().all(|&v| v == 3.0));
        for (s, x) in c.s().iter().zip(c.x()) {
            assert!((s - x).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_graph() {
        let c = unfold(&Field::from_fn(interval(0.0, 1.0, 17), |x| x));
        assert!((c.length() - 2f64.sqrt()).abs() < 1e-14);
        for (s, u) in c.s().iter().zip(c.values()) {
            assert!((u - s / 2f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn torus_unfold_closes() {
        let m = Mesh::new(Domain1D::Torus, 8).unwrap();
        let u = Field::from_fn(m, |x| (std::f64::consts::TAU * x).sin());
        let c = unfold(&u);
        assert_eq!(c.len(), 9);
        assert!(c.is_periodic());
        assert_eq!(c.x()[8], 1.0);
        assert_eq!(c.values()[8], c.values()[0]);
        assert!((c.total_variation() - u.total_variation()).abs() < 1e-14);
    }

    #[test]
    fn from_samples_rejects_steep() {
        assert!(UnfoldedCurve::from_samples(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 0.5], false).is_ok());
        assert!(UnfoldedCurve::from_samples(vec![0.0, 1.0], vec![0.0, 0.5], vec![0.0, 1.5], false).is_err());
        assert!(UnfoldedCurve::from_samples(vec![0.1, 1.0], vec![0.0, 0.5], vec![0.0, 0.5], false).is_err());
    }

    #[test]
    fn plateau_semilimits() {
        // x rises to 0.5, stays while V climbs 0.2 -> 0.9 -> 0.2, then rises again
        let s = vec![0.0, 0.5, 0.7, 1.4, 2.1, 2.6];
        let x = vec![0.0, 0.5, 0.5, 0.5, 0.5, 1.0];
        let v = vec![0.2, 0.2, 0.2, 0.9, 0.2, 0.2];
        let c = UnfoldedCurve::from_samples(s, x, v, false).unwrap();
        let (lo, hi) = pointwise_semilimits_from_unfolding(&c, 0.5, 1e-9).unwrap();
        assert_eq!((lo, hi), (0.2, 0.9));
        assert!(matches!(pointwise_semilimits_from_unfolding(&c, 3.0, 1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn relaxed_limits_spike() {
        let seq: Vec<Field> = (1..=6)
            .map(|j| {
                let w = 0.5 / j as f64;
                Field::from_fn(interval(-1.0, 1.0, 401), move |x| {
                    if x.abs() < w {
                        x.abs() / w
                    } else {
                        1.0
                    }
                })
            })
            .collect();
        let r = relaxed_limits(&seq, 0.0).unwrap();
        assert_eq!(r.liminf, 0.0);
        assert_eq!(r.limsup, 1.0);
        assert!(relaxed_limits(&[], 0.0).is_err());
    }

    #[test]
    fn rho_bumps() {
        // interior bump
        let s: Vec<f64> = (0..=4).map(|k| k as f64).collect();
        let x = vec![0.0, 1.0, 1.0, 1.0, 2.0];
        let v = vec![0.0, 0.0, 0.7, 0.0, 0.0];
        let c = UnfoldedCurve::from_samples(s.clone(), x, v, false).unwrap();
        let d = rho_decomposition(&c, &[1.0], 1e-12, 1e-6).unwrap();
        assert!((d.bound - 1.4).abs() < 1e-14);
        assert_eq!(d.entries[0].parts.len(), 1);

        // bump touching the left end
        let x = vec![0.0, 0.0, 0.0, 1.0, 2.0];
        let v = vec![0.4, 0.6, 0.0, 0.0, 0.0];
        let c = UnfoldedCurve::from_samples(s.clone(), x, v, false).unwrap();
        let d = rho_decomposition(&c, &[0.0], 1e-12, 1e-6).unwrap();
        assert!((d.bound - 0.6).abs() < 1e-14);
        assert_eq!(d.entries[0].parts[0].chi_bar, 0.5);

        let c = UnfoldedCurve::from_samples(s, vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![0.0; 5], false).unwrap();
        let d = rho_decomposition(&c, &[2.0], 1e-12, 0.5).unwrap();
        assert!(d.is_empty());
        assert_eq!(d.bound, 0.0);
    }
}
