//! Single-well potentials `F` and the associated `G(v) = |∫_1^v √F(τ) dτ|`.
//!
//! Two kinds are supported. The quadratic well `F(v) = (v-1)^2` is evaluated
//! in closed form (`G(v) = (v-1)^2 / 2`). Tabulated potentials are read from a
//! table of samples `(v_k, F_k)` and interpolated with a monotone piecewise
//! cubic Hermite interpolant, which keeps `F` nonnegative between samples and
//! continuously differentiable. `G` for a tabulated potential is the composite
//! trapezoid rule of `√F` with a fixed quadrature step anchored at `v = 1`.
//!
//! A finite table cannot say anything about `F` beyond its last sample: every
//! evaluation outside the tabulated range is a [`Error::Range`], and the
//! growth condition at infinity is only checked at the table endpoints.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Growth constants `(c0, c1)` used for the quadratic well: `(v-1)^2 >= v^2/2 - 1`.
pub const QUADRATIC_GROWTH: (f64, f64) = (0.5, 1.0);

#[derive(Debug, Clone)]
pub struct Potential {
    kind: PotentialKind,
    c0: f64,
    c1: f64,
}

#[derive(Debug, Clone)]
pub enum PotentialKind {
    Quadratic,
    Tabulated(Table),
}

/// Samples of `F` plus everything precomputed from them.
#[derive(Debug, Clone)]
pub struct Table {
    v: Vec<f64>,
    f: Vec<f64>,
    slopes: Vec<f64>,
    step: f64,
    // G at 1 + k*step and at 1 - k*step, when 1 lies in the table range.
    g_up: Vec<f64>,
    g_down: Vec<f64>,
}

/// Outcome of [`Potential::check_conditions`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    /// `F >= 0` with its only zero at `v = 1`.
    pub f1: bool,
    /// `F > 0` far from the well; only the table endpoints are inspected.
    pub f2: bool,
    /// `F(v) >= c0 v^2 - c1` with the stored constants.
    pub f2_prime: bool,
    pub c0: f64,
    pub c1: f64,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.f1 && self.f2 && self.f2_prime
    }
}

impl Potential {
    pub fn quadratic() -> Self {
        Self {
            kind: PotentialKind::Quadratic,
            c0: QUADRATIC_GROWTH.0,
            c1: QUADRATIC_GROWTH.1,
        }
    }

    /// Builds a tabulated potential from samples with strictly increasing `v`.
    ///
    /// `step` is the quadrature step used for `G`.
    pub fn tabulated(v: Vec<f64>, f: Vec<f64>, step: f64) -> Result<Self> {
        let table = Table::new(v, f, step)?;
        let (c0, c1) = table.default_growth_constants();
        Ok(Self {
            kind: PotentialKind::Tabulated(table),
            c0,
            c1,
        })
    }

    /// Samples `f` on `n` equispaced points of `[lo, hi]`.
    pub fn from_fn(lo: f64, hi: f64, n: usize, step: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 || !(lo < hi) {
            return Err(Error::Argument(format!(
                "need n >= 2 and lo < hi, got n={n}, [{lo}, {hi}]"
            )));
        }
        let v: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
        let fv = v.iter().map(|&x| f(x)).collect();
        Self::tabulated(v, fv, step)
    }

    /// Reads a two-column CSV with header `v,F`.
    pub fn from_csv_reader<R: Read>(reader: R, step: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "v" || &headers[1] != "F" {
            return Err(Error::Parse(format!(
                "potential CSV header must be `v,F`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut v = Vec::new();
        let mut f = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let parse = |i: usize| -> Result<f64> {
                record[i].parse::<f64>().map_err(|e| {
                    Error::Parse(format!("row {}: column {}: {e}", line + 2, i + 1))
                })
            };
            v.push(parse(0)?);
            f.push(parse(1)?);
        }
        Self::tabulated(v, f, step)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, step: f64) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file, step)
    }

    /// Replaces the growth constants reported for the `(F2')` check.
    pub fn with_growth_constants(mut self, c0: f64, c1: f64) -> Self {
        self.c0 = c0;
        self.c1 = c1;
        self
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.kind, PotentialKind::Quadratic)
    }

    pub fn growth_constants(&self) -> (f64, f64) {
        (self.c0, self.c1)
    }

    /// Tabulated range, `None` for the quadratic well.
    pub fn range(&self) -> Option<(f64, f64)> {
        match &self.kind {
            PotentialKind::Quadratic => None,
            PotentialKind::Tabulated(t) => Some(t.range()),
        }
    }

    /// Table samples `(v, F)`, `None` for the quadratic well.
    pub fn samples(&self) -> Option<(&[f64], &[f64])> {
        match &self.kind {
            PotentialKind::Quadratic => None,
            PotentialKind::Tabulated(t) => Some((&t.v, &t.f)),
        }
    }

    /// Quadrature step of a tabulated potential.
    pub fn quadrature_step(&self) -> Option<f64> {
        match &self.kind {
            PotentialKind::Quadratic => None,
            PotentialKind::Tabulated(t) => Some(t.step),
        }
    }

    pub fn eval_f(&self, v: f64) -> Result<f64> {
        match &self.kind {
            PotentialKind::Quadratic => Ok((v - 1.0) * (v - 1.0)),
            PotentialKind::Tabulated(t) => t.eval(v).map(|(f, _, _)| f),
        }
    }

    /// `F'(v)`.
    pub fn eval_df(&self, v: f64) -> Result<f64> {
        match &self.kind {
            PotentialKind::Quadratic => Ok(2.0 * (v - 1.0)),
            PotentialKind::Tabulated(t) => t.eval(v).map(|(_, df, _)| df),
        }
    }

    /// `F''(v)`; piecewise linear for tabulated potentials.
    pub fn eval_d2f(&self, v: f64) -> Result<f64> {
        match &self.kind {
            PotentialKind::Quadratic => Ok(2.0),
            PotentialKind::Tabulated(t) => t.eval(v).map(|(_, _, d2f)| d2f),
        }
    }

    pub fn eval_g(&self, v: f64) -> Result<f64> {
        match &self.kind {
            PotentialKind::Quadratic => Ok(0.5 * (v - 1.0) * (v - 1.0)),
            PotentialKind::Tabulated(t) => t.eval_g(v),
        }
    }

    pub fn check_conditions(&self) -> ConditionReport {
        let mut notes = Vec::new();
        match &self.kind {
            PotentialKind::Quadratic => {
                // (v-1)^2 - (c0 v^2 - c1) is a quadratic in v; check it on a
                // wide grid and at its vertex.
                let ok = |v: f64| (v - 1.0) * (v - 1.0) >= self.c0 * v * v - self.c1;
                let mut f2_prime = self.c0 > 0.0 && (-1000..=1000).all(|k| ok(k as f64 * 0.1));
                if self.c0 < 1.0 {
                    f2_prime &= ok(1.0 / (1.0 - self.c0));
                }
                notes.push("quadratic well: conditions hold on all of R".to_string());
                ConditionReport {
                    f1: true,
                    f2: true,
                    f2_prime,
                    c0: self.c0,
                    c1: self.c1,
                    notes,
                }
            }
            PotentialKind::Tabulated(t) => {
                let (lo, hi) = t.range();
                let contains_one = lo <= 1.0 && 1.0 <= hi;
                let nonneg = t.f.iter().all(|&f| f >= 0.0);
                let zero_at_one = contains_one && t.eval(1.0).map(|r| r.0 == 0.0).unwrap_or(false);
                let unique = t.v.iter().zip(&t.f).all(|(&v, &f)| v == 1.0 || f > 0.0);
                if !contains_one {
                    notes.push(format!("table range [{lo}, {hi}] does not contain v = 1"));
                }
                if !unique {
                    notes.push("F vanishes at a sample other than v = 1".to_string());
                }
                let f2 = t.f[0] > 0.0 && *t.f.last().unwrap() > 0.0;
                notes.push("(F2) checked at the table endpoints only".to_string());
                let f2_prime = self.c0 > 0.0
                    && t
                        .v
                        .iter()
                        .zip(&t.f)
                        .all(|(&v, &f)| f >= self.c0 * v * v - self.c1);
                ConditionReport {
                    f1: nonneg && zero_at_one && unique,
                    f2,
                    f2_prime,
                    c0: self.c0,
                    c1: self.c1,
                    notes,
                }
            }
        }
    }
}

impl Table {
    fn new(v: Vec<f64>, f: Vec<f64>, step: f64) -> Result<Self> {
        if v.len() != f.len() {
            return Err(Error::Shape(format!(
                "potential table has {} v samples and {} F samples",
                v.len(),
                f.len()
            )));
        }
        if v.len() < 2 {
            return Err(Error::Argument("potential table needs at least two samples".into()));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Argument(format!("quadrature step must be positive, got {step}")));
        }
        if v.iter().chain(&f).any(|x| !x.is_finite()) {
            return Err(Error::Argument("potential table contains non-finite values".into()));
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("potential table v column must be strictly increasing".into()));
        }
        let slopes = pchip_slopes(&v, &f);
        let mut table = Self {
            v,
            f,
            slopes,
            step,
            g_up: Vec::new(),
            g_down: Vec::new(),
        };
        table.build_g();
        Ok(table)
    }

    fn range(&self) -> (f64, f64) {
        (self.v[0], *self.v.last().unwrap())
    }

    fn sqrt_f(&self, v: f64) -> f64 {
        // only called inside the range
        self.eval(v).map(|r| r.0.max(0.0).sqrt()).unwrap_or(0.0)
    }

    fn build_g(&mut self) {
        let (lo, hi) = self.range();
        if !(lo <= 1.0 && 1.0 <= hi) {
            return;
        }
        let h = self.step;
        let mut up = vec![0.0];
        let mut k = 0usize;
        while 1.0 + (k + 1) as f64 * h <= hi {
            let a = 1.0 + k as f64 * h;
            let b = 1.0 + (k + 1) as f64 * h;
            let next = up[k] + 0.5 * h * (self.sqrt_f(a) + self.sqrt_f(b));
            up.push(next);
            k += 1;
        }
        let mut down = vec![0.0];
        k = 0;
        while 1.0 - (k + 1) as f64 * h >= lo {
            let a = 1.0 - k as f64 * h;
            let b = 1.0 - (k + 1) as f64 * h;
            let next = down[k] + 0.5 * h * (self.sqrt_f(a) + self.sqrt_f(b));
            down.push(next);
            k += 1;
        }
        self.g_up = up;
        self.g_down = down;
    }

    fn range_error(&self, value: f64) -> Error {
        let (min, max) = self.range();
        Error::Range { value, min, max }
    }

    /// `(F, F', F'')` at `v`.
    fn eval(&self, v: f64) -> Result<(f64, f64, f64)> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&v) {
            return Err(self.range_error(v));
        }
        let k = match self.v.partition_point(|&x| x <= v) {
            0 => 0,
            p => (p - 1).min(self.v.len() - 2),
        };
        let h = self.v[k + 1] - self.v[k];
        let t = (v - self.v[k]) / h;
        let (f0, f1) = (self.f[k], self.f[k + 1]);
        let (d0, d1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let t2 = t * t;
        // factored basis keeps relative accuracy next to a zero of F
        let s = (self.v[k + 1] - v) / h;
        let f = (1.0 + 2.0 * t) * s * s * f0 + t * s * s * d0 + t2 * (1.0 + 2.0 * s) * f1 - t2 * s * d1;
        let df = ((6.0 * t2 - 6.0 * t) * f0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * f1
            + (3.0 * t2 - 2.0 * t) * d1)
            / h;
        let d2f = ((12.0 * t - 6.0) * f0 + (6.0 * t - 4.0) * d0 + (-12.0 * t + 6.0) * f1 + (6.0 * t - 2.0) * d1)
            / (h * h);
        Ok((f.max(0.0), df, d2f))
    }

    fn eval_g(&self, v: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&v) {
            return Err(self.range_error(v));
        }
        if self.g_up.is_empty() {
            // 1 is outside the table, so the integral leaves the range
            return Err(self.range_error(1.0));
        }
        let dist = (v - 1.0).abs();
        let (cumulative, sign) = if v >= 1.0 { (&self.g_up, 1.0) } else { (&self.g_down, -1.0) };
        let k = ((dist / self.step).floor() as usize).min(cumulative.len() - 1);
        let node = 1.0 + sign * k as f64 * self.step;
        let rest = dist - k as f64 * self.step;
        if rest <= 0.0 {
            return Ok(cumulative[k]);
        }
        Ok(cumulative[k] + 0.5 * rest * (self.sqrt_f(node) + self.sqrt_f(v)))
    }

    fn default_growth_constants(&self) -> (f64, f64) {
        let ends = [(self.v[0], self.f[0]), (*self.v.last().unwrap(), *self.f.last().unwrap())];
        let c0 = ends
            .iter()
            .filter(|(v, _)| v.abs() > 0.0)
            .map(|(v, f)| 0.5 * f / (v * v))
            .fold(f64::INFINITY, f64::min);
        let c0 = if c0.is_finite() { c0.max(0.0) } else { 0.0 };
        let c1 = self
            .v
            .iter()
            .zip(&self.f)
            .map(|(&v, &f)| c0 * v * v - f)
            .fold(0.0, f64::max);
        (c0, c1)
    }
}

/// Fritsch-Carlson slopes for a shape-preserving cubic Hermite interpolant.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] <= 0.0 {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    d[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn edge_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}
