//! Batch experiment runner behind the `singlewell` binary.
//!
//! Every subcommand reads a JSON config, validates it completely, computes all
//! results in memory and only then writes its CSV files into the output
//! directory. Invalid configs therefore leave no partial outputs. Rows are
//! written in schedule order and floats use Rust's shortest round-trip format,
//! so identical inputs give byte-identical files.

pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::fields::{energy_smm_b, Field, Mesh, PointPenalty};
use crate::limits::limit_pointwise_minimizer;
use crate::minimize::{minimize_kwc_alternating, minimize_smm_b_general, minimize_smm_b_quadratic};
use crate::potential::Potential;
use crate::recovery::{build_recovery, verify_limsup, LimsupOptions};
use crate::setvalued::{graph_distance, ExceptionalPoint, SetValuedLimit};
use crate::unfold::unfold;

pub use config::{FieldSource, FieldSpec, KwcConfig, LimitSpec, MeshRule, PotentialSpec, RecoveryConfig, SweepConfig, UnfoldConfig};
use config::{check_nonnegative, check_positive, check_schedule};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const DEFAULT_RESOLUTION: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn numerical_err(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Where a run reads its config and writes its outputs.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub config: PathBuf,
    pub out: PathBuf,
    /// Overrides the config's graph-sampling resolution.
    pub resolution: Option<f64>,
}

impl Invocation {
    fn base_dir(&self) -> PathBuf {
        self.config.parent().map(Path::to_path_buf).unwrap_or_default()
    }

    fn load<T: serde::de::DeserializeOwned>(&self) -> Result<T, CliError> {
        let text = std::fs::read_to_string(&self.config)
            .map_err(|e| config_err(format!("cannot read {}: {e}", self.config.display())))?;
        serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", self.config.display())))
    }

    fn resolution(&self, from_config: Option<f64>) -> Result<f64, CliError> {
        let r = self.resolution.or(from_config).unwrap_or(DEFAULT_RESOLUTION);
        check_positive("resolution", r).map_err(config_err)?;
        Ok(r)
    }
}

/// Files of one run, written together once everything has been computed.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn csv(&mut self, name: impl Into<String>, write: impl FnOnce(&mut Vec<u8>) -> crate::error::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write(&mut buf).map_err(numerical_err)?;
        self.add(name, buf);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| config_err(format!("cannot create {}: {e}", dir.display())))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| config_err(format!("cannot write {}: {e}", path.display())))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Outcome of a run: the files written and, if some row failed, the error to exit with.
#[derive(Debug)]
pub struct RunReport {
    pub written: Vec<PathBuf>,
    pub failure: Option<CliError>,
}

fn finish(out: &Outputs, dir: &Path, failure: Option<CliError>) -> Result<RunReport, CliError> {
    let written = out.write(dir)?;
    Ok(RunReport { written, failure })
}

fn eps_tag(eps: f64) -> String {
    format!("{eps:e}")
}

fn field_csv(f: &Field) -> crate::error::Result<Vec<u8>> {
    let mut buf = Vec::new();
    f.write_csv(&mut buf)?;
    Ok(buf)
}

/// `Ξ₀`: at each penalized point the interval `[q_b, 1]` from the pointwise minimizer.
pub fn predicted_limit(domain: crate::fields::Domain1D, penalties: &[PointPenalty], p: &Potential) -> crate::error::Result<SetValuedLimit> {
    let mut entries = Vec::new();
    for pen in penalties {
        let (q, _) = limit_pointwise_minimizer(pen.b, p)?;
        if q < 1.0 {
            entries.push(ExceptionalPoint { x: pen.a, lo: q, hi: 1.0 });
        }
    }
    SetValuedLimit::new(domain, entries)
}

struct SweepRow {
    eps: f64,
    nodes: usize,
    values_at_a: Vec<f64>,
    energy: f64,
    distance: f64,
    status: String,
    field: Option<Field>,
}

/// Minimizes `E^ε_{sMM,b}` at each ε and compares against the predicted limit.
///
/// Writes `sweep.csv` with one row per ε and `field_eps_<ε>.csv` per solved ε.
/// A solver failure still writes its row with the error in the `status`
/// column, then the run exits with the numerical-failure code.
pub fn run_minimize_sweep(inv: &Invocation) -> Result<RunReport, CliError> {
    let cfg: SweepConfig = inv.load()?;
    let base = inv.base_dir();
    let resolution = inv.resolution(cfg.resolution)?;
    check_schedule(&cfg.eps).map_err(config_err)?;
    cfg.solver.validate().map_err(config_err)?;
    let p = cfg.potential.build(&base).map_err(config_err)?;
    let mut penalties = Vec::with_capacity(cfg.penalties.len());
    for pen in &cfg.penalties {
        let pen = PointPenalty::new(pen.a, pen.b).map_err(config_err)?;
        pen.check_interior(&cfg.domain).map_err(config_err)?;
        penalties.push(pen);
    }
    let meshes: Vec<Mesh> = cfg
        .eps
        .iter()
        .map(|&e| cfg.mesh.mesh(cfg.domain, e))
        .collect::<crate::error::Result<_>>()
        .map_err(config_err)?;
    let xi0 = predicted_limit(cfg.domain, &penalties, &p).map_err(config_err)?;

    let rows: Vec<SweepRow> = cfg
        .eps
        .par_iter()
        .zip(meshes.par_iter())
        .map(|(&eps, &mesh)| {
            let solved = if p.is_quadratic() {
                minimize_smm_b_quadratic(mesh, eps, &penalties)
            } else {
                minimize_smm_b_general(mesh, eps, &p, &penalties, &cfg.solver)
            };
            let measured = solved.and_then(|w| {
                let values_at_a = penalties.iter().map(|pen| w.interpolate(pen.a)).collect::<crate::error::Result<Vec<_>>>()?;
                let energy = energy_smm_b(&w, eps, &p, &penalties)?.total;
                let distance = graph_distance(&w, &xi0, resolution)?;
                Ok((w, values_at_a, energy, distance))
            });
            match measured {
                Ok((w, values_at_a, energy, distance)) => SweepRow {
                    eps,
                    nodes: mesh.len(),
                    values_at_a,
                    energy,
                    distance,
                    status: "ok".into(),
                    field: Some(w),
                },
                Err(e) => SweepRow {
                    eps,
                    nodes: mesh.len(),
                    values_at_a: vec![f64::NAN; penalties.len()],
                    energy: f64::NAN,
                    distance: f64::NAN,
                    status: e.to_string(),
                    field: None,
                },
            }
        })
        .collect();

    let mut out = Outputs::default();
    out.csv("sweep.csv", |buf| {
        let mut wtr = csv::Writer::from_writer(buf);
        let mut header = vec!["eps".to_string(), "nodes".into()];
        header.extend((0..penalties.len()).map(|l| format!("v_a{l}")));
        header.extend(["energy", "graph_distance", "status"].map(String::from));
        wtr.write_record(&header)?;
        for r in &rows {
            let mut rec = vec![r.eps.to_string(), r.nodes.to_string()];
            rec.extend(r.values_at_a.iter().map(f64::to_string));
            rec.extend([r.energy.to_string(), r.distance.to_string(), r.status.clone()]);
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    for r in &rows {
        if let Some(w) = &r.field {
            out.add(format!("field_eps_{}.csv", eps_tag(r.eps)), field_csv(w).map_err(numerical_err)?);
        }
    }
    if cfg.svg {
        let series: Vec<_> = rows
            .iter()
            .filter_map(|r| r.field.as_ref().map(|w| (format!("eps = {}", r.eps), polyline(w))))
            .collect();
        out.add("sweep.svg", svg(&series).into_bytes());
    }
    let failure = rows
        .iter()
        .find(|r| r.status != "ok")
        .map(|r| CliError::Numerical(format!("eps = {}: {}", r.eps, r.status)));
    finish(&out, &inv.out, failure)
}

/// Runs `verify_limsup` on the configured limit and writes `recovery.csv`.
pub fn run_recovery(inv: &Invocation) -> Result<RunReport, CliError> {
    let cfg: RecoveryConfig = inv.load()?;
    let base = inv.base_dir();
    let resolution = inv.resolution(cfg.resolution)?;
    check_schedule(&cfg.eps).map_err(config_err)?;
    check_positive("mu", cfg.mu).map_err(config_err)?;
    check_positive("cells_per_eps", cfg.cells_per_eps).map_err(config_err)?;
    check_nonnegative("slack", cfg.slack).map_err(config_err)?;
    let xi = cfg.limit.build().map_err(config_err)?;
    let p = cfg.potential.build(&base).map_err(config_err)?;
    for pen in &cfg.penalties {
        PointPenalty::new(pen.a, pen.b).map_err(config_err)?.check_interior(&xi.domain()).map_err(config_err)?;
    }
    let opts = LimsupOptions {
        cells_per_eps: cfg.cells_per_eps,
        resolution,
        slack: cfg.slack,
        penalties: cfg.penalties.clone(),
    };
    let table = verify_limsup(&xi, &p, &cfg.eps, cfg.mu, &opts).map_err(numerical_err)?;

    let mut out = Outputs::default();
    out.csv("recovery.csv", |buf| table.write_csv(buf))?;
    if cfg.fields || cfg.svg {
        let fields: Vec<(f64, Field)> = cfg
            .eps
            .par_iter()
            .map(|&eps| {
                let mesh = Mesh::with_max_spacing(xi.domain(), eps / cfg.cells_per_eps)?;
                Ok((eps, build_recovery(&xi, eps, cfg.mu, &p, mesh)?.field))
            })
            .collect::<crate::error::Result<_>>()
            .map_err(numerical_err)?;
        if cfg.fields {
            for (eps, w) in &fields {
                out.add(format!("recovery_eps_{}.csv", eps_tag(*eps)), field_csv(w).map_err(numerical_err)?);
            }
        }
        if cfg.svg {
            let series: Vec<_> = fields.iter().map(|(eps, w)| (format!("eps = {eps}"), polyline(w))).collect();
            out.add("recovery.svg", svg(&series).into_bytes());
        }
    }
    finish(&out, &inv.out, None)
}

/// Alternating KWC minimization from `u = g`, `v ≡ 1`.
///
/// Writes `kwc.csv` (`x,g,u,v`), `kwc_history.csv` with the energy after each
/// half-step and `kwc_summary.csv` with the final energy split.
pub fn run_kwc(inv: &Invocation) -> Result<RunReport, CliError> {
    let cfg: KwcConfig = inv.load()?;
    let base = inv.base_dir();
    inv.resolution(None)?;
    check_positive("eps", cfg.eps).map_err(config_err)?;
    check_nonnegative("sigma", cfg.sigma).map_err(config_err)?;
    check_positive("lambda", cfg.lambda).map_err(config_err)?;
    cfg.solver.validate().map_err(config_err)?;
    let g = cfg.g.build(&base).map_err(config_err)?;
    let p = cfg.potential.build(&base).map_err(config_err)?;
    let res = minimize_kwc_alternating(&g, cfg.eps, cfg.sigma, &p, cfg.lambda, &cfg.solver).map_err(numerical_err)?;

    let mut out = Outputs::default();
    out.csv("kwc.csv", |buf| {
        let mut wtr = csv::Writer::from_writer(buf);
        wtr.write_record(["x", "g", "u", "v"])?;
        for k in 0..g.len() {
            wtr.write_record([
                g.mesh().node(k).to_string(),
                g.values()[k].to_string(),
                res.u.values()[k].to_string(),
                res.v.values()[k].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    out.csv("kwc_history.csv", |buf| {
        let mut wtr = csv::Writer::from_writer(buf);
        wtr.write_record(["half_step", "energy"])?;
        for (i, e) in res.history.iter().enumerate() {
            wtr.write_record([i.to_string(), e.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    out.csv("kwc_summary.csv", |buf| {
        let r = &res.report;
        let mut wtr = csv::Writer::from_writer(buf);
        wtr.write_record(["weighted_tv", "gradient", "potential", "fidelity", "total", "half_steps"])?;
        wtr.write_record([
            r.weighted_tv.to_string(),
            r.gradient.to_string(),
            r.potential.to_string(),
            r.fidelity.to_string(),
            r.total.to_string(),
            (res.history.len() - 1).to_string(),
        ])?;
        wtr.flush()?;
        Ok(())
    })?;
    if cfg.svg {
        let series = vec![("g".into(), polyline(&g)), ("u".into(), polyline(&res.u)), ("v".into(), polyline(&res.v))];
        out.add("kwc.svg", svg(&series).into_bytes());
    }
    finish(&out, &inv.out, None)
}

/// Arc-length unfolding of a field: `unfold.csv` (`s,x,U`) and
/// `unfold_summary.csv` with the curve length `L`.
pub fn run_unfold(inv: &Invocation) -> Result<RunReport, CliError> {
    let cfg: UnfoldConfig = inv.load()?;
    let base = inv.base_dir();
    inv.resolution(None)?;
    let u = cfg.field.build(&base).map_err(config_err)?;
    let curve = unfold(&u);

    let mut out = Outputs::default();
    out.csv("unfold.csv", |buf| curve.write_csv(buf))?;
    out.csv("unfold_summary.csv", |buf| {
        let mut wtr = csv::Writer::from_writer(buf);
        wtr.write_record(["L", "total_variation", "periodic", "samples"])?;
        wtr.write_record([
            curve.length().to_string(),
            curve.total_variation().to_string(),
            curve.is_periodic().to_string(),
            curve.len().to_string(),
        ])?;
        wtr.flush()?;
        Ok(())
    })?;
    if cfg.svg {
        let pts: Vec<(f64, f64)> = curve.s().iter().copied().zip(curve.values().iter().copied()).collect();
        out.add("unfold.svg", svg(&[("U(s)".into(), pts)]).into_bytes());
    }
    finish(&out, &inv.out, None)
}

fn polyline(f: &Field) -> Vec<(f64, f64)> {
    f.mesh().nodes().into_iter().zip(f.values().iter().copied()).collect()
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Polylines in a fixed 800×400 viewport with a shared bounding box.
pub fn svg(series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h, pad) = (800.0, 400.0, 20.0);
    let pts = series.iter().flat_map(|(_, p)| p.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        (x0, x1) = (x0.min(0.0), x0.max(0.0) + 1.0);
    }
    if !(y1 > y0) {
        (y0, y1) = (y0.min(0.0) - 0.5, y0.max(0.0) + 0.5);
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n");
    for (i, (label, p)) in series.iter().enumerate() {
        let _ = write!(
            s,
            "  <polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1\" points=\"",
            PALETTE[i % PALETTE.len()]
        );
        for (j, &(x, y)) in p.iter().filter(|(x, y)| x.is_finite() && y.is_finite()).enumerate() {
            if j > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{:.3},{:.3}", sx(x), sy(y));
        }
        let _ = writeln!(s, "\"><title>{label}</title></polyline>");
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Domain1D;

    #[test]
    fn predicted_limit_quadratic() {
        let d = Domain1D::interval(-1.0, 1.0).unwrap();
        let xi = predicted_limit(d, &[PointPenalty { a: 0.0, b: 1.0 }, PointPenalty { a: 0.5, b: 0.0 }], &Potential::quadratic())
            .unwrap();
        assert_eq!(xi.exceptional(), &[ExceptionalPoint { x: 0.0, lo: 0.5, hi: 1.0 }]);
    }

    #[test]
    fn svg_is_deterministic() {
        let s = vec![("a".to_string(), vec![(0.0, 1.0), (1.0, 2.0)])];
        assert_eq!(svg(&s), svg(&s));
        assert!(svg(&s).contains("20.000,380.000 780.000,20.000"));
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Numerical(String::new()).exit_code(), 3);
    }
}
