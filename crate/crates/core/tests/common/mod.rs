//! Oracles and property checks shared by the `properties` and `acceptance` targets.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use singlewell_core::fields::{energy_kwc, energy_smm, weighted_tv, Domain1D, Field, Mesh};
use singlewell_core::minimize::{minimize_kwc_alternating, prox_weighted_tv, SolveOptions};
use singlewell_core::potential::Potential;
use singlewell_core::setvalued::{graph_of_field, hausdorff, point_distance, GraphSet};

/// The printed minimizer of `E^ε_b` on (-1, 1) with the penalty at 0, with the
/// growing exponential folded into the decaying factors so nothing overflows.
pub fn closed_form_oracle(eps: f64, b: f64, x: f64) -> f64 {
    let e2 = (-2.0 / eps).exp();
    let e4 = (-4.0 / eps).exp();
    let d = 1.0 - e4 + b * (1.0 + e2) * (1.0 + e2);
    let ax = x.abs();
    let decaying = b * (-e2 - 1.0) / d * (-ax / eps).exp();
    let growing = -b * (((ax - 2.0) / eps).exp() + ((ax - 4.0) / eps).exp()) / d;
    1.0 + decaying + growing
}

/// `Σ_i 2(G(ξ_i⁻) + G(ξ_i⁺))` with `G(v) = (v - 1)^2 / 2`.
pub fn quadratic_limit_energy(entries: &[(f64, f64, f64)]) -> f64 {
    entries
        .iter()
        .map(|&(_, lo, hi)| (lo - 1.0).powi(2) + (hi - 1.0).powi(2))
        .sum()
}

/// Weighted-TV prox by enumerating every edge pattern `sign(u_j - u_i) ∈ {-1, 0, 1}`.
///
/// For a fixed pattern the objective is a separable quadratic in the values
/// of the merged groups, solved in closed form. The minimizer is the
/// candidate of its own pattern, so the best candidate under the true
/// objective is the prox.
pub fn prox_oracle(g: &Field, v: &Field, sigma: f64, lambda: f64) -> Vec<f64> {
    let mesh = g.mesh();
    let n = g.len();
    let w: Vec<f64> = (0..n).map(|k| lambda * mesh.quadrature_weight(k)).collect();
    let edges: Vec<(usize, usize, f64)> = (0..mesh.num_cells())
        .map(|e| {
            let (i, j) = mesh.cell(e);
            let (a, b) = (v.values()[i], v.values()[j]);
            (i, j, sigma * (a * a).min(b * b))
        })
        .collect();
    let objective = |u: &[f64]| -> f64 {
        let tv: f64 = edges.iter().map(|&(i, j, c)| c * (u[j] - u[i]).abs()).sum();
        let fid: f64 = (0..n).map(|k| w[k] * (u[k] - g.values()[k]).powi(2)).sum();
        tv + fid
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let patterns = 3usize.pow(edges.len() as u32);
    for code in 0..patterns {
        let mut signs = Vec::with_capacity(edges.len());
        let mut c = code;
        for _ in 0..edges.len() {
            signs.push(c % 3);
            c /= 3;
        }
        // union-find over merged edges
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                i = p[i];
            }
            i
        }
        for (e, &(i, j, _)) in edges.iter().enumerate() {
            if signs[e] == 1 {
                let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                parent[ri] = rj;
            }
        }
        let mut linear = vec![0.0; n];
        for (e, &(i, j, c)) in edges.iter().enumerate() {
            let s = match signs[e] {
                0 => -1.0,
                1 => continue,
                _ => 1.0,
            };
            linear[j] += s * c;
            linear[i] -= s * c;
        }
        let mut num = vec![0.0; n];
        let mut den = vec![0.0; n];
        for k in 0..n {
            let r = root(&mut parent, k);
            num[r] += w[k] * g.values()[k] - 0.5 * linear[k];
            den[r] += w[k];
        }
        let u: Vec<f64> = (0..n)
            .map(|k| {
                let r = root(&mut parent, k);
                num[r] / den[r]
            })
            .collect();
        let f = objective(&u);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, u));
        }
    }
    best.unwrap().1
}

/// All-pairs symmetric Hausdorff distance.
pub fn brute_hausdorff(a: &GraphSet, b: &GraphSet) -> f64 {
    let d = a.domain();
    let one_sided = |p: &[(f64, f64)], q: &[(f64, f64)]| -> f64 {
        p.iter()
            .map(|&x| q.iter().map(|&y| point_distance(&d, x, y)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_sided(a.points(), b.points()).max(one_sided(b.points(), a.points()))
}

pub fn domain_strategy() -> impl Strategy<Value = Domain1D> {
    prop_oneof![
        Just(Domain1D::torus()),
        (-2.0..0.0f64, 0.5..3.0f64).prop_map(|(a, len)| Domain1D::interval(a, a + len).unwrap()),
    ]
}

/// Random nodal values on a random mesh.
pub fn field_strategy(max_nodes: usize, amplitude: f64) -> impl Strategy<Value = Field> {
    (domain_strategy(), 2..=max_nodes).prop_flat_map(move |(d, n)| {
        proptest::collection::vec(-amplitude..amplitude, n)
            .prop_map(move |vals| Field::new(Mesh::new(d, n).unwrap(), vals).unwrap())
    })
}

/// Three random fields on one shared mesh.
pub fn field_triple(max_nodes: usize) -> impl Strategy<Value = (Field, Field, Field)> {
    (domain_strategy(), 2..=max_nodes).prop_flat_map(|(d, n)| {
        let mesh = Mesh::new(d, n).unwrap();
        let vals = || proptest::collection::vec(-2.0..2.0f64, n);
        (vals(), vals(), vals()).prop_map(move |(a, b, c)| {
            (
                Field::new(mesh, a).unwrap(),
                Field::new(mesh, b).unwrap(),
                Field::new(mesh, c).unwrap(),
            )
        })
    })
}

/// A tabulated potential that is not quadratic: `F = (v-1)^2 (1 + (v-1)^2 / 4)`.
pub fn quartic_potential() -> Potential {
    Potential::from_fn(-4.0, 6.0, 10001, 1e-3, |v| {
        let d = v - 1.0;
        d * d * (1.0 + 0.25 * d * d)
    })
    .unwrap()
}

/// Slack constant `C` in `Q(h) = C h` for the discrete Modica-Mortola inequality.
/// The quadratic well needs none; the constant covers the curvature of `√F`
/// for the tabulated well.
pub const MM_SLACK: f64 = 1.0;

pub fn smooth_field(mesh: Mesh, coeffs: &[(f64, f64)]) -> Field {
    let (a, b) = mesh.domain().bounds();
    Field::from_fn(mesh, |x| {
        let t = (x - a) / (b - a);
        1.0 + coeffs
            .iter()
            .enumerate()
            .map(|(j, &(amp, ph))| amp * (2.0 * std::f64::consts::PI * (j + 1) as f64 * t + ph).sin())
            .sum::<f64>()
    })
}

pub fn mm_inputs() -> impl Strategy<Value = (Field, f64, bool)> {
    (
        domain_strategy(),
        8usize..400,
        proptest::collection::vec((-1.0..1.0f64, 0.0..6.3f64), 1..4),
        0.02..1.0f64,
        any::<bool>(),
    )
        .prop_map(|(d, n, coeffs, eps, quartic)| (smooth_field(Mesh::new(d, n).unwrap(), &coeffs), eps, quartic))
}

/// `energy_smm(v) ≥ Σ_cells |G(v_j) - G(v_i)| - C h`.
pub fn check_mm_inequality(v: &Field, eps: f64, quartic: bool) -> Result<(), TestCaseError> {
    let p = if quartic { quartic_potential() } else { Potential::quadratic() };
    let e = energy_smm(v, eps, &p).unwrap().total;
    let mesh = v.mesh();
    let mut jumps = 0.0;
    for c in 0..mesh.num_cells() {
        let (i, j) = mesh.cell(c);
        jumps += (p.eval_g(v.values()[j]).unwrap() - p.eval_g(v.values()[i]).unwrap()).abs();
    }
    let slack = MM_SLACK * mesh.spacing();
    prop_assert!(e >= jumps - slack, "energy {} < {} - {}", e, jumps, slack);
    Ok(())
}

/// Totals are the exact sum of their parts; `v ≡ 1` reduces weighted TV to TV;
/// energies are invariant under rotation of torus node indices.
pub fn check_additivity(u: &Field, v: &Field, g: &Field, eps: f64, sigma: f64, lambda: f64) -> Result<(), TestCaseError> {
    let p = Potential::quadratic();
    let r = energy_kwc(u, v, eps, sigma, &p, lambda, Some(g)).unwrap();
    prop_assert_eq!(r.total, r.gradient + r.potential + r.penalty + r.weighted_tv + r.fidelity);
    prop_assert_eq!(r.penalty, 0.0);
    let ones = Field::constant(*u.mesh(), 1.0);
    prop_assert_eq!(weighted_tv(u, &ones, 1.0).unwrap(), u.total_variation());
    if u.domain().is_torus() {
        let shift = u.len() / 2 + 1;
        let rot = |f: &Field| f.rotated(shift).unwrap();
        let r2 = energy_kwc(&rot(u), &rot(v), eps, sigma, &p, lambda, Some(&rot(g))).unwrap();
        prop_assert!((r2.total - r.total).abs() <= 1e-12 * (1.0 + r.total.abs()));
    }
    Ok(())
}

pub fn additivity_inputs() -> impl Strategy<Value = ((Field, Field, Field), f64, f64, f64)> {
    (field_triple(64), 0.01..2.0f64, 0.0..3.0f64, 0.0..10.0f64)
}

/// `‖P g₁ - P g₂‖_W ≤ ‖g₁ - g₂‖_W` in the fidelity metric `W = λ w_k`.
pub fn check_prox_nonexpansive(g1: &Field, g2: &Field, v: &Field, sigma: f64, lambda: f64) -> Result<(), TestCaseError> {
    let p1 = prox_weighted_tv(g1, v, sigma, lambda).unwrap();
    let p2 = prox_weighted_tv(g2, v, sigma, lambda).unwrap();
    let mesh = g1.mesh();
    let norm = |a: &Field, b: &Field| -> f64 {
        (0..a.len())
            .map(|k| mesh.quadrature_weight(k) * (a.values()[k] - b.values()[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let (out, inp) = (norm(&p1, &p2), norm(g1, g2));
    prop_assert!(out <= inp * (1.0 + 1e-9) + 1e-12, "{} > {}", out, inp);
    Ok(())
}

pub fn prox_inputs() -> impl Strategy<Value = ((Field, Field, Field), f64, f64)> {
    (field_triple(128), 0.0..3.0f64, 0.05..10.0f64)
}

/// The recorded energy never increases between half-steps.
pub fn check_alternating_monotone(g: &Field, eps: f64, sigma: f64, lambda: f64) -> Result<(), TestCaseError> {
    let opts = SolveOptions { rounds: 20, ..SolveOptions::default() };
    let res = minimize_kwc_alternating(g, eps, sigma, &Potential::quadratic(), lambda, &opts).unwrap();
    for w in res.history.windows(2) {
        prop_assert!(w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()), "{} -> {}", w[0], w[1]);
    }
    Ok(())
}

pub fn alternating_inputs() -> impl Strategy<Value = (Field, f64, f64, f64)> {
    (field_strategy(40, 1.5), 0.05..0.5f64, 0.0..2.0f64, 1.0..100.0f64)
}

/// Halving the resolution moves a sampled graph by at most half the coarse
/// resolution, and a graph distance by at most the coarse resolution.
pub fn check_hausdorff_refinement(u: &Field, w: &Field, r: f64) -> Result<(), TestCaseError> {
    let (gu, gu_fine) = (graph_of_field(u, r).unwrap(), graph_of_field(u, r / 2.0).unwrap());
    let (gw, gw_fine) = (graph_of_field(w, r).unwrap(), graph_of_field(w, r / 2.0).unwrap());
    let tol = 1e-12;
    prop_assert!(hausdorff(&gu, &gu_fine).unwrap() <= r / 2.0 + tol);
    let coarse = hausdorff(&gu, &gw).unwrap();
    let fine = hausdorff(&gu_fine, &gw_fine).unwrap();
    prop_assert!((coarse - fine).abs() <= r + tol, "coarse {} fine {}", coarse, fine);
    Ok(())
}

pub fn refinement_inputs() -> impl Strategy<Value = ((Field, Field, Field), f64)> {
    (field_triple(48), 0.02..0.3f64)
}

/// Runs a property with a fixed seed; returns the failure message if any.
pub fn run_property<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new_with_rng(
        Config { cases, failure_persistence: None, ..Config::default() },
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    runner.run(&strategy, test).map_err(|e| e.to_string())
}
