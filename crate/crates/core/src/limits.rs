//! Γ-limit energies on set-valued limits and the pointwise limit minimizer.
//!
//! A jump of `u` at an exceptional point `x_i` is charged `d_i (ξ_i⁻)^2`; every
//! other jump is charged its full size. Since an exceptional point without a
//! jump carries no variation of `u`, summing over `J_u ∩ Σ` and over `Σ` give the
//! same value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Domain1D, Field, Mesh, PointPenalty};
use crate::potential::Potential;
use crate::setvalued::{SetValuedLimit, SNAP_TOL};

const GOLDEN_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub x: f64,
    pub d: f64,
}

#[derive(Deserialize)]
struct RawJumpFunction {
    #[serde(default)]
    domain: Option<Domain1D>,
    #[serde(default)]
    jumps: Vec<Jump>,
    #[serde(default)]
    ac_tv: f64,
    #[serde(default)]
    anchor: f64,
}

/// Finitely many jumps plus a lump of absolutely continuous variation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpFunction {
    domain: Domain1D,
    jumps: Vec<Jump>,
    ac_tv: f64,
    anchor: f64,
}

impl JumpFunction {
    pub fn new(domain: Domain1D, jumps: Vec<Jump>, ac_tv: f64, anchor: f64) -> Result<Self> {
        domain.validate()?;
        if !(ac_tv >= 0.0 && ac_tv.is_finite()) || !anchor.is_finite() {
            return Err(Error::Argument("ac_tv must be finite and nonnegative".into()));
        }
        let mut jumps: Vec<Jump> = jumps
            .into_iter()
            .map(|j| {
                if !(j.d > 0.0 && j.d.is_finite()) {
                    return Err(Error::Argument(format!("jump size at {} must be positive", j.x)));
                }
                if !domain.is_interior(j.x) {
                    return Err(Error::Domain(format!("jump location {} is not interior", j.x)));
                }
                Ok(Jump { x: domain.wrap(j.x), d: j.d })
            })
            .collect::<Result<_>>()?;
        jumps.sort_by(|a, b| a.x.total_cmp(&b.x));
        for (i, a) in jumps.iter().enumerate() {
            if jumps[i + 1..].iter().any(|b| domain.distance(a.x, b.x) <= SNAP_TOL) {
                return Err(Error::Argument(format!("jump location {} appears twice", a.x)));
            }
        }
        Ok(Self { domain, jumps, ac_tv, anchor })
    }

    /// Parses the JSON form; a missing `domain` falls back to `default_domain`.
    pub fn from_json_str(s: &str, default_domain: Domain1D) -> Result<Self> {
        let raw: RawJumpFunction = serde_json::from_str(s)?;
        Self::new(raw.domain.unwrap_or(default_domain), raw.jumps, raw.ac_tv, raw.anchor)
    }

    pub fn domain(&self) -> Domain1D {
        self.domain
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn ac_tv(&self) -> f64 {
        self.ac_tv
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    /// Nodal samples of the piecewise-constant function starting at `anchor`
    /// and stepping up by `d_ℓ` after each `a_ℓ`. Needs `ac_tv == 0`.
    pub fn sample(&self, mesh: Mesh) -> Result<Field> {
        if mesh.domain() != self.domain {
            return Err(Error::Argument("mesh and jump function live on different domains".into()));
        }
        if self.ac_tv != 0.0 {
            return Err(Error::Argument("only pure jump functions can be sampled".into()));
        }
        Ok(Field::from_fn(mesh, |x| {
            self.anchor + self.jumps.iter().filter(|j| x > j.x).map(|j| j.d).sum::<f64>()
        }))
    }
}

/// `E^0_sMM(Ξ, M) = Σ_i [2(G(ξ_i⁻) + G(ξ_i⁺)) - κ_i max(G(ξ_i⁻), G(ξ_i⁺))]`,
/// with `κ_i = 1` exactly at interval endpoints.
pub fn limit_energy_smm(xi: &SetValuedLimit, p: &Potential) -> Result<f64> {
    let domain = xi.domain();
    let mut total = 0.0;
    for e in xi.exceptional() {
        let (gl, gh) = (p.eval_g(e.lo)?, p.eval_g(e.hi)?);
        let kappa = if domain.is_boundary(e.x, SNAP_TOL) { 1.0 } else { 0.0 };
        total += 2.0 * (gl + gh) - kappa * gl.max(gh);
    }
    Ok(total)
}

/// [`limit_energy_smm`] plus `Σ_ℓ b_ℓ (min Ξ(a_ℓ))^2`.
pub fn limit_energy_smm_b(xi: &SetValuedLimit, p: &Potential, penalties: &[PointPenalty]) -> Result<f64> {
    let mut total = limit_energy_smm(xi, p)?;
    for pen in penalties {
        pen.check_interior(&xi.domain())?;
        total += pen.b * xi.min_at(pen.a).powi(2);
    }
    Ok(total)
}

/// `E^0_KWC(u, Ξ) = σ (ac_tv + Σ_{a_ℓ ∉ Σ} d_ℓ) + σ Σ_{x_i ∈ J_u} d_i (ξ_i⁻)^2 + E^0_sMM(Ξ, M)`.
pub fn limit_energy_kwc(u: &JumpFunction, xi: &SetValuedLimit, sigma: f64, p: &Potential) -> Result<f64> {
    if u.domain() != xi.domain() {
        return Err(Error::Argument("jump function and set-valued limit live on different domains".into()));
    }
    if !(sigma >= 0.0) {
        return Err(Error::Argument(format!("sigma must be nonnegative, got {sigma}")));
    }
    let mut tv = u.ac_tv();
    for j in u.jumps() {
        tv += match xi.entry_at(j.x) {
            Some(e) => j.d * e.lo * e.lo,
            None => j.d,
        };
    }
    Ok(sigma * tv + limit_energy_smm(xi, p)?)
}

/// Minimizer of `q ↦ 2G(q) + b q^2` on `[0, 1]` and its value.
///
/// The quadratic potential uses the closed form `1/(b+1)`. Otherwise a golden
/// section search is refined by one parabolic step and compared against both
/// endpoints.
pub fn limit_pointwise_minimizer(b: f64, p: &Potential) -> Result<(f64, f64)> {
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::Argument(format!("b must be nonnegative, got {b}")));
    }
    if b == 0.0 {
        return Ok((1.0, 0.0));
    }
    if p.is_quadratic() {
        return Ok((1.0 / (b + 1.0), b / (b + 1.0)));
    }
    let phi = |q: f64| -> Result<f64> { Ok(2.0 * p.eval_g(q)? + b * q * q) };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (phi(c)?, phi(d)?);
    for _ in 0..GOLDEN_ITERATIONS {
        if hi - lo < 1e-13 {
            break;
        }
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = phi(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = phi(d)?;
        }
    }
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    // parabola through lo, best, hi
    let (x0, x1, x2) = (lo, best.0, hi);
    let (f0, f1, f2) = (phi(x0)?, best.1, phi(x2)?);
    let denom = (x1 - x0) * (f1 - f2) - (x1 - x2) * (f1 - f0);
    if denom != 0.0 {
        let num = (x1 - x0).powi(2) * (f1 - f2) - (x1 - x2).powi(2) * (f1 - f0);
        let q = x1 - 0.5 * num / denom;
        if q > x0 && q < x2 {
            let fq = phi(q)?;
            if fq < best.1 {
                best = (q, fq);
            }
        }
    }
    for q in [0.0, 1.0] {
        let fq = phi(q)?;
        if fq < best.1 {
            best = (q, fq);
        }
    }
    Ok(best)
}
