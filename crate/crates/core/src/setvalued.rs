//! Set-valued limits with finitely many exceptional points, graphs sampled as
//! point sets, and the Hausdorff distance between graphs.
//!
//! Points of `M × R` are compared with `(d_M(x, x')^2 + (y - y')^2)^{1/2}`,
//! where `d_M` is the periodic distance on the torus. Sampled graphs carry the
//! spacing they were generated with. The Hausdorff distance of two samplings
//! is within the larger resolution of the distance between the true graphs.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Domain1D, Field};

/// Two exceptional locations closer than this are the same point.
pub const SNAP_TOL: f64 = 1e-12;
/// Slack on the sweep cutoff; covers rounding in `d_M` and the square root.
const SWEEP_SLACK: f64 = 1e-12;

/// `Ξ(x_i) = [lo, hi]` with `lo ≤ 1 ≤ hi` and `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalPoint {
    pub x: f64,
    pub lo: f64,
    pub hi: f64,
}

impl ExceptionalPoint {
    /// `max(|ξ⁺ - 1|, |ξ⁻ - 1|)`.
    pub fn beta(&self) -> f64 {
        (self.hi - 1.0).abs().max((self.lo - 1.0).abs())
    }
}

#[derive(Deserialize)]
struct RawLimit {
    domain: Domain1D,
    #[serde(default)]
    exceptional: Vec<ExceptionalPoint>,
}

/// A set-valued function equal to `{1}` except at finitely many points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetValuedLimit {
    domain: Domain1D,
    exceptional: Vec<ExceptionalPoint>,
}

impl SetValuedLimit {
    /// Validates the entries, wraps torus locations into `[0, 1)` and sorts by `x`.
    pub fn new(domain: Domain1D, entries: Vec<ExceptionalPoint>) -> Result<Self> {
        domain.validate()?;
        let mut exceptional = Vec::with_capacity(entries.len());
        for e in entries {
            if !(e.x.is_finite() && e.lo.is_finite() && e.hi.is_finite()) {
                return Err(Error::Argument(format!("non-finite exceptional entry {e:?}")));
            }
            if !(e.lo <= 1.0 && 1.0 <= e.hi && e.lo < e.hi) {
                return Err(Error::Argument(format!(
                    "exceptional value [{}, {}] at x = {} must contain 1 and be nondegenerate",
                    e.lo, e.hi, e.x
                )));
            }
            if !domain.contains(e.x) {
                return Err(Error::Domain(format!("exceptional point {} lies outside the domain", e.x)));
            }
            exceptional.push(ExceptionalPoint { x: domain.wrap(e.x), ..e });
        }
        exceptional.sort_by(|a, b| a.x.total_cmp(&b.x));
        for (i, a) in exceptional.iter().enumerate() {
            for b in &exceptional[i + 1..] {
                if domain.distance(a.x, b.x) <= SNAP_TOL {
                    return Err(Error::Argument(format!("exceptional point {} appears twice", a.x)));
                }
            }
        }
        Ok(Self { domain, exceptional })
    }

    pub fn empty(domain: Domain1D) -> Self {
        Self { domain, exceptional: Vec::new() }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: RawLimit = serde_json::from_str(s)?;
        Self::new(raw.domain, raw.exceptional)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn domain(&self) -> Domain1D {
        self.domain
    }

    pub fn exceptional(&self) -> &[ExceptionalPoint] {
        &self.exceptional
    }

    /// The entry at `x`, matched up to [`SNAP_TOL`].
    pub fn entry_at(&self, x: f64) -> Option<&ExceptionalPoint> {
        self.exceptional
            .iter()
            .find(|e| self.domain.distance(e.x, x) <= SNAP_TOL)
    }

    /// `Ξ(x)` as `(lo, hi)`; `(1, 1)` off the exceptional set.
    pub fn value_at(&self, x: f64) -> (f64, f64) {
        self.entry_at(x).map_or((1.0, 1.0), |e| (e.lo, e.hi))
    }

    /// `min Ξ(x)`.
    pub fn min_at(&self, x: f64) -> f64 {
        self.value_at(x).0
    }
}

/// Finite sample of a graph in `M × R`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSet {
    domain: Domain1D,
    points: Vec<(f64, f64)>,
    resolution: f64,
}

impl GraphSet {
    pub fn new(domain: Domain1D, points: Vec<(f64, f64)>, resolution: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Argument("a graph sample needs at least one point".into()));
        }
        if !(resolution > 0.0) {
            return Err(Error::Argument(format!("resolution must be positive, got {resolution}")));
        }
        Ok(Self { domain, points, resolution })
    }

    pub fn domain(&self) -> Domain1D {
        self.domain
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn check_resolution(resolution: f64) -> Result<()> {
    if resolution > 0.0 && resolution.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("resolution must be positive, got {resolution}")))
    }
}

/// Appends samples of the segment `p -> q` with spacing at most `resolution`,
/// skipping `p` itself.
fn push_segment(out: &mut Vec<(f64, f64)>, p: (f64, f64), q: (f64, f64), resolution: f64) {
    let len = (q.0 - p.0).hypot(q.1 - p.1);
    let m = ((len / resolution).ceil() as usize).max(1);
    for k in 1..=m {
        let t = k as f64 / m as f64;
        let pt = if k == m {
            q
        } else {
            (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
        };
        out.push(pt);
    }
}

/// Samples the piecewise-linear graph of `u`.
pub fn graph_of_field(u: &Field, resolution: f64) -> Result<GraphSet> {
    check_resolution(resolution)?;
    let mesh = u.mesh();
    let vals = u.values();
    let mut pts = vec![(mesh.node(0), vals[0])];
    for e in 0..mesh.num_cells() {
        let (i, j) = mesh.cell(e);
        let xj = if j == 0 { 1.0 } else { mesh.node(j) };
        push_segment(&mut pts, (mesh.node(i), vals[i]), (xj, vals[j]), resolution);
    }
    if mesh.domain().is_torus() {
        // (1, u_0) duplicates (0, u_0)
        pts.pop();
    }
    GraphSet::new(mesh.domain(), pts, resolution)
}

/// Samples the graph of `Ξ`: the line `y = 1` plus a vertical segment at each
/// exceptional point.
pub fn graph_of_limit(xi: &SetValuedLimit, resolution: f64) -> Result<GraphSet> {
    check_resolution(resolution)?;
    let domain = xi.domain();
    let (a, b) = domain.bounds();
    let mut pts = vec![(a, 1.0)];
    push_segment(&mut pts, (a, 1.0), (b, 1.0), resolution);
    if domain.is_torus() {
        pts.pop();
    }
    for e in xi.exceptional() {
        pts.push((e.x, e.lo));
        push_segment(&mut pts, (e.x, e.lo), (e.x, e.hi), resolution);
    }
    GraphSet::new(domain, pts, resolution)
}

/// `(d_M(x, x')^2 + (y - y')^2)^{1/2}`.
pub fn point_distance(domain: &Domain1D, p: (f64, f64), q: (f64, f64)) -> f64 {
    let dx = domain.distance(p.0, q.0);
    let dy = p.1 - q.1;
    (dx * dx + dy * dy).sqrt()
}

/// Points of `b` sorted by (wrapped) `x`, with shifted copies on the torus.
struct SweepIndex {
    keys: Vec<f64>,
    points: Vec<(f64, f64)>,
}

impl SweepIndex {
    fn new(domain: &Domain1D, b: &[(f64, f64)]) -> Self {
        let shifts: &[f64] = if domain.is_torus() { &[-1.0, 0.0, 1.0] } else { &[0.0] };
        let mut entries: Vec<(f64, (f64, f64))> = b
            .iter()
            .flat_map(|&p| {
                let x = domain.wrap(p.0);
                shifts.iter().map(move |m| (x + m, p))
            })
            .collect();
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            keys: entries.iter().map(|e| e.0).collect(),
            points: entries.iter().map(|e| e.1).collect(),
        }
    }

    fn nearest(&self, domain: &Domain1D, p: (f64, f64)) -> f64 {
        let x = domain.wrap(p.0);
        let start = self.keys.partition_point(|&k| k < x);
        let mut best = f64::INFINITY;
        let mut right = start;
        while right < self.keys.len() && self.keys[right] - x <= best + SWEEP_SLACK {
            best = best.min(point_distance(domain, p, self.points[right]));
            right += 1;
        }
        let mut left = start;
        while left > 0 && x - self.keys[left - 1] <= best + SWEEP_SLACK {
            left -= 1;
            best = best.min(point_distance(domain, p, self.points[left]));
        }
        best
    }
}

fn directed(domain: &Domain1D, a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let index = SweepIndex::new(domain, b);
    a.par_iter()
        .map(|&p| index.nearest(domain, p))
        .reduce(|| 0.0, f64::max)
}

/// Hausdorff distance of two samples, by a sorted sweep over `x`. Returns
/// exactly the all-pairs value.
pub fn hausdorff(a: &GraphSet, b: &GraphSet) -> Result<f64> {
    if a.domain.is_torus() != b.domain.is_torus() {
        return Err(Error::Argument("cannot compare graphs over an interval and the torus".into()));
    }
    let d = a.domain;
    Ok(directed(&d, &a.points, &b.points).max(directed(&d, &b.points, &a.points)))
}

/// `d_g` between the graph of `u` and the graph of `Ξ`, both sampled at `resolution`.
pub fn graph_distance(u: &Field, xi: &SetValuedLimit, resolution: f64) -> Result<f64> {
    if u.domain() != xi.domain() {
        return Err(Error::Argument("field and set-valued limit live on different domains".into()));
    }
    hausdorff(&graph_of_field(u, resolution)?, &graph_of_limit(xi, resolution)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Mesh;

    fn unit() -> Domain1D {
        Domain1D::interval(-1.0, 1.0).unwrap()
    }

    #[test]
    fn json_roundtrip() {
        let s = r#"{"domain":{"kind":"interval","a":-1.0,"b":1.0},"exceptional":[{"x":0.0,"lo":0.5,"hi":1.0}]}"#;
        let xi = SetValuedLimit::from_json_str(s).unwrap();
        assert_eq!(xi.exceptional().len(), 1);
        assert_eq!(SetValuedLimit::from_json_str(&xi.to_json().unwrap()).unwrap(), xi);
        let t = SetValuedLimit::from_json_str(r#"{"domain":{"kind":"torus"},"exceptional":[{"x":1.25,"lo":0.0,"hi":1.0}]}"#)
            .unwrap();
        assert_eq!(t.exceptional()[0].x, 0.25);
    }

    #[test]
    fn invalid_entries() {
        let e = |x, lo, hi| ExceptionalPoint { x, lo, hi };
        assert!(SetValuedLimit::new(unit(), vec![e(0.0, 1.0, 1.0)]).is_err());
        assert!(SetValuedLimit::new(unit(), vec![e(0.0, 1.1, 1.5)]).is_err());
        assert!(SetValuedLimit::new(unit(), vec![e(2.0, 0.5, 1.0)]).is_err());
        assert!(SetValuedLimit::new(unit(), vec![e(0.0, 0.5, 1.0), e(0.0, 0.2, 1.0)]).is_err());
        assert!(SetValuedLimit::new(Domain1D::Torus, vec![e(0.0, 0.5, 1.0), e(1.0, 0.2, 1.0)]).is_err());
    }

    #[test]
    fn graph_of_limit_extent() {
        let xi = SetValuedLimit::new(unit(), vec![ExceptionalPoint { x: 0.5, lo: 0.0, hi: 1.2 }]).unwrap();
        let g = graph_of_limit(&xi, 0.05).unwrap();
        let vert: Vec<f64> = g.points().iter().filter(|p| p.0 == 0.5).map(|p| p.1).collect();
        let lo = vert.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vert.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((lo, hi), (0.0, 1.2));
        assert!(g.points().iter().filter(|p| p.0 != 0.5).all(|p| p.1 == 1.0));
    }

    #[test]
    fn field_graph_spacing() {
        let m = Mesh::new(Domain1D::interval(0.0, 1.0).unwrap(), 4).unwrap();
        let g = graph_of_field(&Field::from_fn(m, |x| x), 0.1).unwrap();
        assert!(g.points().iter().all(|p| p.0 == p.1));
        assert!(g.len() as f64 >= 2f64.sqrt() / 0.1);
        for w in g.points().windows(2) {
            assert!(point_distance(&g.domain(), w[0], w[1]) <= 0.1 + 1e-15);
        }
    }

    #[test]
    fn simple_distances() {
        let d = Domain1D::interval(0.0, 1.0).unwrap();
        let a = GraphSet::new(d, vec![(0.0, 0.0)], 1.0).unwrap();
        let b = GraphSet::new(d, vec![(0.0, 1.0)], 1.0).unwrap();
        assert_eq!(hausdorff(&a, &b).unwrap(), 1.0);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        let t = GraphSet::new(Domain1D::Torus, vec![(0.0, 0.0)], 1.0).unwrap();
        assert!(hausdorff(&a, &t).is_err());
        let t2 = GraphSet::new(Domain1D::Torus, vec![(0.95, 0.0)], 1.0).unwrap();
        assert!((hausdorff(&t, &t2).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn flat_field_vs_dip() {
        let m = Mesh::new(unit(), 201).unwrap();
        let one = Field::constant(m, 1.0);
        let empty = SetValuedLimit::empty(unit());
        assert!(graph_distance(&one, &empty, 0.01).unwrap() <= 0.01);
        let xi = SetValuedLimit::new(unit(), vec![ExceptionalPoint { x: 0.0, lo: 0.0, hi: 1.0 }]).unwrap();
        assert!((graph_distance(&one, &xi, 0.01).unwrap() - 1.0).abs() <= 0.01);
    }
}
