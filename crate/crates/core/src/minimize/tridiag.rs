//! Symmetric (cyclic) tridiagonal systems.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix. `off[k]` couples rows `k` and `k+1`; in the
/// cyclic case `off[n-1]` couples row `n-1` with row `0`.
#[derive(Debug, Clone)]
pub(crate) struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    pub cyclic: bool,
}

impl SymTridiagonal {
    pub fn new(n: usize, cyclic: bool) -> Self {
        let m = if cyclic { n } else { n.saturating_sub(1) };
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; m],
            cyclic,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    /// Adds `s` to the symmetric entry `(i, j)`; `i` and `j` must be equal or
    /// neighbours in the (cyclic) chain.
    pub fn add(&mut self, i: usize, j: usize, s: f64) {
        let n = self.len();
        if i == j {
            self.diag[i] += s;
        } else if j == i + 1 {
            self.off[i] += s;
        } else if i == j + 1 {
            self.off[j] += s;
        } else if self.cyclic && ((i == n - 1 && j == 0) || (j == n - 1 && i == 0)) {
            self.off[n - 1] += s;
        } else {
            panic!("entry ({i}, {j}) is outside the tridiagonal pattern");
        }
    }

    #[cfg(test)]
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for (k, &e) in self.off.iter().enumerate() {
            let j = (k + 1) % n;
            y[k] += e * x[j];
            y[j] += e * x[k];
        }
        y
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if rhs.len() != n {
            return Err(Error::Internal("tridiagonal right-hand side has wrong length".into()));
        }
        let x = if !self.cyclic {
            thomas(&self.diag, &self.off, rhs)?
        } else if n == 2 {
            let (a, b, c) = (self.diag[0], self.off[0] + self.off[1], self.diag[1]);
            let det = a * c - b * b;
            if !(det.abs() > 0.0) {
                return Err(Error::Internal("singular 2x2 system".into()));
            }
            vec![(c * rhs[0] - b * rhs[1]) / det, (a * rhs[1] - b * rhs[0]) / det]
        } else {
            self.solve_cyclic(rhs)?
        };
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(Error::Internal("tridiagonal solve produced non-finite values".into()))
        }
    }

    // Sherman-Morrison on the corner coupling.
    fn solve_cyclic(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let corner = self.off[n - 1];
        let gamma = -self.diag[0];
        let mut d = self.diag.clone();
        d[0] -= gamma;
        d[n - 1] -= corner * corner / gamma;
        let e = &self.off[..n - 1];
        let x = thomas(&d, e, rhs)?;
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = corner;
        let z = thomas(&d, e, &u)?;
        let f = corner / gamma;
        let denom = 1.0 + z[0] + f * z[n - 1];
        if !(denom.abs() > 0.0) {
            return Err(Error::Internal("singular cyclic system".into()));
        }
        let s = (x[0] + f * x[n - 1]) / denom;
        Ok(x.iter().zip(&z).map(|(a, b)| a - s * b).collect())
    }
}

fn thomas(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return Err(Error::Internal("zero pivot in tridiagonal solve".into()));
    }
    if n > 1 {
        c[0] = off[0] / denom;
    }
    d[0] = rhs[0] / denom;
    for k in 1..n {
        denom = diag[k] - off[k - 1] * c[k - 1];
        if denom == 0.0 {
            return Err(Error::Internal("zero pivot in tridiagonal solve".into()));
        }
        if k < n - 1 {
            c[k] = off[k] / denom;
        }
        d[k] = (rhs[k] - off[k - 1] * d[k - 1]) / denom;
    }
    for k in (0..n - 1).rev() {
        d[k] -= c[k] * d[k + 1];
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(m: &SymTridiagonal, x: &[f64], b: &[f64]) -> f64 {
        m.apply(x)
            .iter()
            .zip(b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn chain_solve() {
        let mut m = SymTridiagonal::new(5, false);
        for k in 0..5 {
            m.add(k, k, 3.0 + k as f64);
        }
        for k in 0..4 {
            m.add(k, k + 1, -1.0);
        }
        let b = [1.0, -2.0, 0.5, 4.0, 1.0];
        let x = m.solve(&b).unwrap();
        assert!(residual(&m, &x, &b) < 1e-13);
    }

    #[test]
    fn cyclic_solve() {
        for n in [2usize, 3, 4, 9] {
            let mut m = SymTridiagonal::new(n, true);
            for k in 0..n {
                m.add(k, k, 4.0);
                m.add(k, (k + 1) % n, -1.0 - 0.1 * k as f64);
            }
            let b: Vec<f64> = (0..n).map(|k| (k as f64).sin()).collect();
            let x = m.solve(&b).unwrap();
            assert!(residual(&m, &x, &b) < 1e-13, "n = {n}");
        }
    }
}
