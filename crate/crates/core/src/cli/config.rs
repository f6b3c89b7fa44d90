//! JSON experiment configs. Relative paths resolve against the config's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fields::{Domain1D, Field, Mesh, PointPenalty};
use crate::minimize::SolveOptions;
use crate::potential::Potential;
use crate::setvalued::{ExceptionalPoint, SetValuedLimit};

fn default_table_step() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Quadratic,
    /// Two-column `v,F` table.
    Csv {
        path: PathBuf,
        #[serde(default = "default_table_step")]
        step: f64,
    },
}

impl PotentialSpec {
    pub fn build(&self, base: &Path) -> Result<Potential> {
        match self {
            PotentialSpec::Quadratic => Ok(Potential::quadratic()),
            PotentialSpec::Csv { path, step } => Potential::from_csv_path(base.join(path), *step),
        }
    }
}

/// Number of nodes used at a given ε.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshRule {
    /// `ceil(k / ε)` cells.
    CellsPerInvEps(f64),
    /// Fixed node count.
    Nodes(usize),
}

impl Default for MeshRule {
    fn default() -> Self {
        MeshRule::CellsPerInvEps(16.0)
    }
}

impl MeshRule {
    pub fn mesh(&self, domain: Domain1D, eps: f64) -> Result<Mesh> {
        match *self {
            MeshRule::CellsPerInvEps(k) => {
                if !(k > 0.0 && k.is_finite()) {
                    return Err(Error::Argument(format!("cells_per_inv_eps must be positive, got {k}")));
                }
                let cells = (k / eps).ceil();
                if cells > 1e8 {
                    return Err(Error::Argument(format!("{cells} cells requested at eps = {eps}")));
                }
                let cells = cells as usize;
                Mesh::new(domain, if domain.is_torus() { cells.max(2) } else { cells + 1 })
            }
            MeshRule::Nodes(n) => Mesh::new(domain, n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldSource {
    /// `x,value` CSV on the declared mesh.
    Csv { path: PathBuf },
    /// `left` for `x < at`, `right` from `at` on.
    Step { at: f64, left: f64, right: f64 },
    Linear { slope: f64, offset: f64 },
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub domain: Domain1D,
    pub nodes: usize,
    pub source: FieldSource,
}

impl FieldSpec {
    pub fn build(&self, base: &Path) -> Result<Field> {
        let mesh = Mesh::new(self.domain, self.nodes)?;
        let field = match &self.source {
            FieldSource::Csv { path } => Field::from_csv_reader(mesh, std::fs::File::open(base.join(path))?)?,
            &FieldSource::Step { at, left, right } => Field::from_fn(mesh, |x| if x < at { left } else { right }),
            &FieldSource::Linear { slope, offset } => Field::from_fn(mesh, |x| slope * x + offset),
            &FieldSource::Constant { value } => Field::constant(mesh, value),
        };
        if field.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("field values must be finite".into()));
        }
        Ok(field)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitSpec {
    pub domain: Domain1D,
    #[serde(default)]
    pub exceptional: Vec<ExceptionalPoint>,
}

impl LimitSpec {
    pub fn build(&self) -> Result<SetValuedLimit> {
        SetValuedLimit::new(self.domain, self.exceptional.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub domain: Domain1D,
    pub eps: Vec<f64>,
    #[serde(default)]
    pub penalties: Vec<PointPenalty>,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub mesh: MeshRule,
    #[serde(default)]
    pub solver: SolveOptions,
    pub resolution: Option<f64>,
    #[serde(default)]
    pub svg: bool,
}

fn default_cells_per_eps() -> f64 {
    16.0
}

fn default_slack() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryConfig {
    pub limit: LimitSpec,
    pub eps: Vec<f64>,
    pub mu: f64,
    #[serde(default)]
    pub potential: PotentialSpec,
    /// Mesh spacing is at most `ε / cells_per_eps`.
    #[serde(default = "default_cells_per_eps")]
    pub cells_per_eps: f64,
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default)]
    pub penalties: Vec<PointPenalty>,
    pub resolution: Option<f64>,
    /// Also write each recovery field.
    #[serde(default)]
    pub fields: bool,
    #[serde(default)]
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KwcConfig {
    pub g: FieldSpec,
    pub eps: f64,
    pub sigma: f64,
    pub lambda: f64,
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnfoldConfig {
    pub field: FieldSpec,
    #[serde(default)]
    pub svg: bool,
}

/// Checks an ε schedule: nonempty, positive, strictly decreasing.
pub fn check_schedule(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::Argument("the eps schedule is empty".into()));
    }
    if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::Argument("eps values must be positive and finite".into()));
    }
    if eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Argument("the eps schedule must be strictly decreasing".into()));
    }
    Ok(())
}

pub fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} must be positive, got {x}")))
    }
}

pub fn check_nonnegative(name: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} must be nonnegative, got {x}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_defaults() {
        let cfg: SweepConfig =
            serde_json::from_str(r#"{"domain":{"kind":"interval","a":-1,"b":1},"eps":[0.1]}"#).unwrap();
        assert_eq!(cfg.mesh, MeshRule::CellsPerInvEps(16.0));
        assert_eq!(cfg.potential, PotentialSpec::Quadratic);
        assert_eq!(cfg.mesh.mesh(cfg.domain, 0.1).unwrap().len(), 161);
    }

    #[test]
    fn unknown_field_rejected() {
        let r: std::result::Result<UnfoldConfig, _> = serde_json::from_str(
            r#"{"field":{"domain":{"kind":"torus"},"nodes":4,"source":{"kind":"constant","value":1}},"bogus":1}"#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn schedules() {
        assert!(check_schedule(&[0.1, 0.01]).is_ok());
        assert!(check_schedule(&[0.1, 0.1]).is_err());
        assert!(check_schedule(&[]).is_err());
        assert!(check_schedule(&[-0.1]).is_err());
    }
}
