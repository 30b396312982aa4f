use freefall_autodiff::{Dual, Field};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::collision::{pose_collides, CollisionModel};
use crate::geometry::{LegGeometry, LegIndex};
use crate::kinematics::solve_closure;

/// Logistic gate times a linear ramp over the housing tilt:
/// `σ(m) · (slope · m + intercept)` with
/// `σ(m) = 1 / (1 + exp(−steepness (m − center)))`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LogisticGate {
    pub center: f64,
    pub steepness: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl LogisticGate {
    pub fn eval<F: Field>(&self, m: F) -> F {
        let one = F::one();
        let sig = one
            / (one
                + (-(F::from_f64(self.steepness) * (m - F::from_f64(self.center)))).exp());
        sig * (F::from_f64(self.slope) * m + F::from_f64(self.intercept))
    }
}

/// Nonlinear tilt-vs-swing boundary: a degree-5 polynomial row over
/// `(φ_MH, φ_12)` and a gated-linear row over `(φ_MH, φ_11)`. The
/// collision set is symmetric under the in-plane mirror
/// `(φ_11, φ_12) → (−φ_11, −φ_12)` (the allocation maps rely on it),
/// so each row is evaluated for both signs with shared parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonlinearRows {
    /// `P_5` coefficients, ascending powers of `φ_MH`.
    pub poly: [f64; 6],
    pub gates: [LogisticGate; 2],
    /// Bounds: `g[0]` for the `φ_12` rows, `g[1]` for the `φ_11` rows.
    pub g: [f64; 2],
}

pub fn poly_eval<F: Field>(coeffs: &[f64; 6], x: F) -> F {
    let mut acc = F::zero();
    for &c in coeffs.iter().rev() {
        acc = acc * x + F::from_f64(c);
    }
    acc
}

/// One linear workspace row `a · (φ_MH, φ_11, φ_12) ≤ b`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LinearRow {
    pub a: [f64; 3],
    pub b: f64,
}

/// Fitted workspace constraints plus the state boxes. All residuals
/// strictly negative means collision-free.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorkspaceConstraints {
    pub linear: Vec<LinearRow>,
    pub nonlinear: Option<NonlinearRows>,
    pub phi_min: [f64; 5],
    pub phi_max: [f64; 5],
    pub phidot_max: [f64; 5],
}

impl WorkspaceConstraints {
    /// Joint boxes only; what extraction degenerates to when no
    /// colliding poses exist.
    pub fn box_only(geom: &LegGeometry) -> Self {
        Self {
            linear: Vec::new(),
            nonlinear: None,
            phi_min: geom.phi_min,
            phi_max: geom.phi_max,
            phidot_max: geom.phidot_max,
        }
    }

    pub fn n_linear(&self) -> usize {
        self.linear.len()
    }

    pub fn n_nonlinear(&self) -> usize {
        if self.nonlinear.is_some() {
            4
        } else {
            0
        }
    }

    /// Nonlinear residual rows over the actuated angles, generic so the
    /// planner can seed duals through them.
    pub fn nonlinear_rows_generic<F: Field>(&self, mh: F, p11: F, p12: F) -> Vec<F> {
        match &self.nonlinear {
            None => Vec::new(),
            Some(rows) => {
                let p = poly_eval(&rows.poly, mh);
                let p_neg = poly_eval(&rows.poly, -mh);
                let gate = rows.gates[0].eval(mh) + rows.gates[1].eval(mh);
                let gate_neg = rows.gates[0].eval(-mh) + rows.gates[1].eval(-mh);
                let g0 = F::from_f64(rows.g[0]);
                let g1 = F::from_f64(rows.g[1]);
                vec![
                    p + p12 - g0,
                    p_neg - p12 - g0,
                    gate + p11 - g1,
                    gate_neg - p11 - g1,
                ]
            }
        }
    }

    pub fn linear_rows(&self, mh: f64, p11: f64, p12: f64) -> Vec<f64> {
        self.linear
            .iter()
            .map(|row| row.a[0] * mh + row.a[1] * p11 + row.a[2] * p12 - row.b)
            .collect()
    }

    /// True when the actuated triple passes box, linear and nonlinear
    /// constraints.
    pub fn actuated_free(&self, act: &[f64; 3]) -> bool {
        let idx = [0usize, 1, 3];
        for (k, &j) in idx.iter().enumerate() {
            if act[k] < self.phi_min[j] || act[k] > self.phi_max[j] {
                return false;
            }
        }
        if self
            .linear_rows(act[0], act[1], act[2])
            .iter()
            .any(|&r| r >= 0.0)
        {
            return false;
        }
        self.nonlinear_rows_generic::<f64>(act[0], act[1], act[2])
            .iter()
            .all(|&r| r < 0.0)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("workspace serializes")
    }
}

/// Residuals of the fitted constraints at a full joint vector:
/// `(C φ − c, G(φ) − g)`; every component `< 0` means collision-free.
pub fn workspace_eval(phi: &[f64; 5], ws: &WorkspaceConstraints) -> (DVector<f64>, DVector<f64>) {
    let lin = ws.linear_rows(phi[0], phi[1], phi[3]);
    let nl = ws.nonlinear_rows_generic::<f64>(phi[0], phi[1], phi[3]);
    (DVector::from_vec(lin), DVector::from_vec(nl))
}

/// Gradient of every constraint row with respect to the actuated
/// triple `(φ_MH, φ_11, φ_12)`.
pub fn workspace_gradients(
    ws: &WorkspaceConstraints,
    act: &[f64; 3],
) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let lin = ws.linear.iter().map(|r| r.a).collect();
    type D = Dual<3, f64>;
    let rows = ws.nonlinear_rows_generic::<D>(
        D::variable(act[0], 0),
        D::variable(act[1], 1),
        D::variable(act[2], 2),
    );
    let nl = rows.iter().map(|r| r.eps).collect();
    (lin, nl)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Label {
    Unreachable,
    Free,
    Collide,
}

struct GridNode {
    act: [f64; 3],
    label: Label,
}

/// Collision label symmetrized over the allocation mirrors: a pose is
/// colliding when the front-right leg collides there or at the
/// in-plane mirrored pose the other legs are slaved to.
fn symmetrized_collides(geom: &LegGeometry, model: &CollisionModel, act: &[f64; 3]) -> Label {
    let mut any_reachable = false;
    for (s1, s2) in [(1.0, 1.0), (-1.0, -1.0)] {
        let a = [act[0], s1 * act[1], s2 * act[2]];
        match solve_closure(geom, a[1], a[2]) {
            Err(_) => continue,
            Ok((k1, k2)) => {
                any_reachable = true;
                let phi = [a[0], a[1], k1, a[2], k2];
                if pose_collides(geom, model, LegIndex::FrontRight, &phi) {
                    return Label::Collide;
                }
            }
        }
    }
    if any_reachable {
        Label::Free
    } else {
        Label::Unreachable
    }
}

struct LabeledGrid {
    n: usize,
    nodes: Vec<GridNode>,
}

impl LabeledGrid {
    fn at(&self, i: usize, j: usize, k: usize) -> &GridNode {
        &self.nodes[(i * self.n + j) * self.n + k]
    }
}

fn label_grid(geom: &LegGeometry, model: &CollisionModel, n: usize) -> LabeledGrid {
    let (lo, hi) = geom.actuated_box();
    let mut nodes = Vec::with_capacity(n * n * n);
    let lin = |a: f64, b: f64, i: usize| a + (b - a) * (i as f64) / ((n - 1) as f64);
    for i in 0..n {
        let m = lin(lo[0], hi[0], i);
        for j in 0..n {
            let p11 = lin(lo[1], hi[1], j);
            for k in 0..n {
                let p12 = lin(lo[2], hi[2], k);
                let act = [m, p11, p12];
                // Knee-range screening happens through closure: poses
                // whose passive solution leaves the knee box are not
                // part of the operating set.
                let label = match solve_closure(geom, p11, p12) {
                    Err(_) => Label::Unreachable,
                    Ok((k1, k2)) => {
                        if k1 < geom.phi_min[2]
                            || k1 > geom.phi_max[2]
                            || k2 < geom.phi_min[4]
                            || k2 > geom.phi_max[4]
                        {
                            Label::Unreachable
                        } else {
                            symmetrized_collides(geom, model, &act)
                        }
                    }
                };
                nodes.push(GridNode { act, label });
            }
        }
    }
    LabeledGrid { n, nodes }
}

fn polyfit5(xs: &[f64], ys: &[f64], ws: &[f64]) -> [f64; 6] {
    let rows = xs.len();
    let mut a = DMatrix::zeros(rows, 6);
    for (r, &x) in xs.iter().enumerate() {
        let mut p = ws[r];
        for c in 0..6 {
            a[(r, c)] = p;
            p *= x;
        }
    }
    let b = DVector::from_fn(rows, |r, _| ys[r] * ws[r]);
    let svd = a.svd(true, true);
    let sol = svd.solve(&b, 1e-12).expect("polyfit solve");
    let mut out = [0.0; 6];
    for c in 0..6 {
        out[c] = sol[c];
    }
    out
}

/// Per-tilt onset of each swing coordinate: the smallest colliding
/// `|swing|` among nodes whose own swing axis still has free room (a
/// collision counts toward this boundary only when moving that
/// coordinate could have avoided it). Buckets where everything
/// collides map to zero; collision-free buckets map to `None`.
fn axis_boundaries(grid: &LabeledGrid, axis: usize) -> Vec<(f64, Option<f64>)> {
    let n = grid.n;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let m = grid.at(i, 0, 0).act[0];
        let mut any_free = false;
        let mut any_collide = false;
        let mut onset = f64::INFINITY;
        for j in 0..n {
            for k in 0..n {
                let nd = grid.at(i, j, k);
                match nd.label {
                    Label::Free => any_free = true,
                    Label::Collide => {
                        any_collide = true;
                        // Relief along this node's own swing axis?
                        let relief = (0..n).any(|t| {
                            let other = if axis == 2 {
                                grid.at(i, j, t)
                            } else {
                                grid.at(i, t, k)
                            };
                            other.label == Label::Free
                        });
                        if relief {
                            let v = if axis == 2 { nd.act[2] } else { nd.act[1] };
                            onset = onset.min(v.abs());
                        }
                    }
                    Label::Unreachable => {}
                }
            }
        }
        let b = if !any_collide {
            None
        } else if !any_free {
            Some(0.0)
        } else if onset.is_finite() {
            Some(onset)
        } else {
            None
        };
        out.push((m, b));
    }
    out
}

/// Gate centers at the two sharpest jumps of the boundary curve.
fn pick_gate_centers(samples: &[(f64, f64)]) -> ([f64; 2], f64) {
    let mut jumps: Vec<(f64, f64)> = Vec::new();
    for w in samples.windows(2) {
        let mid = 0.5 * (w[0].0 + w[1].0);
        jumps.push((mid, (w[1].1 - w[0].1).abs()));
    }
    jumps.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let c0 = jumps.first().map(|j| j.0).unwrap_or(0.0);
    let c1 = jumps
        .iter()
        .find(|j| (j.0 - c0).abs() > 0.2)
        .map(|j| j.0)
        .unwrap_or(c0 + 0.4);
    let width = samples
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).abs())
        .fold(f64::INFINITY, f64::min)
        .max(1e-3);
    ([c0.min(c1), c0.max(c1)], 4.0 / width)
}

/// Least-squares for the gate ramps with fixed gate shapes. The first
/// gate faces the low-tilt side (negative steepness, saturating toward
/// outboard), the second faces the high-tilt side, so the loose region
/// between the two transitions stays unconstrained.
fn fit_gates(
    centers: [f64; 2],
    steepness: f64,
    xs: &[f64],
    ys: &[f64],
    weights: &[f64],
) -> [LogisticGate; 2] {
    let rows = xs.len();
    let ks = [-steepness, steepness];
    let sig = |c: f64, k: f64, x: f64| 1.0 / (1.0 + (-(k * (x - c))).exp());
    let mut a = DMatrix::zeros(rows, 4);
    for (r, &x) in xs.iter().enumerate() {
        let s0 = sig(centers[0], ks[0], x);
        let s1 = sig(centers[1], ks[1], x);
        a[(r, 0)] = s0 * x * weights[r];
        a[(r, 1)] = s0 * weights[r];
        a[(r, 2)] = s1 * x * weights[r];
        a[(r, 3)] = s1 * weights[r];
    }
    let b = DVector::from_fn(rows, |r, _| ys[r] * weights[r]);
    let svd = a.svd(true, true);
    let sol = svd.solve(&b, 1e-12).expect("gate fit solve");
    [
        LogisticGate {
            center: centers[0],
            steepness: ks[0],
            slope: sol[0],
            intercept: sol[1],
        },
        LogisticGate {
            center: centers[1],
            steepness: ks[1],
            slope: sol[2],
            intercept: sol[3],
        },
    ]
}

/// Outcome of a constraint-extraction run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub grid: usize,
    pub reachable: usize,
    pub colliding: usize,
    pub false_negatives: usize,
    /// Fraction of capsule-free poses the fitted set rejects.
    pub over_rejection: f64,
    /// Fraction of reachable poses classified free.
    pub free_volume: f64,
}

/// Grid the actuated angles, label collisions with the capsule model
/// and fit the polytopic / polynomial-logistic constraint forms so no
/// colliding grid pose is classified free.
pub fn extract_workspace(
    geom: &LegGeometry,
    model: &CollisionModel,
    n: usize,
) -> (WorkspaceConstraints, ExtractionReport) {
    let grid = label_grid(geom, model, n);
    let (lo, hi) = geom.actuated_box();

    let reachable: Vec<&GridNode> = grid
        .nodes
        .iter()
        .filter(|nd| nd.label != Label::Unreachable)
        .collect();
    let colliding: Vec<&GridNode> = reachable
        .iter()
        .copied()
        .filter(|nd| nd.label == Label::Collide)
        .collect();

    let mut ws = WorkspaceConstraints::box_only(geom);
    let mut report = ExtractionReport {
        grid: n,
        reachable: reachable.len(),
        colliding: colliding.len(),
        false_negatives: 0,
        over_rejection: 0.0,
        free_volume: 0.0,
    };

    if !colliding.is_empty() {
        // Stage 1: clip the tilt box where entire tilt slices collide
        // regardless of swing (deep inboard folds the leg into the
        // torso for every configuration).
        let nb = grid.n;
        let bucket = (hi[0] - lo[0]) / ((nb - 1) as f64);
        let mut free_bucket = vec![false; nb];
        for (i, f) in free_bucket.iter_mut().enumerate() {
            for j in 0..nb {
                for k in 0..nb {
                    if grid.at(i, j, k).label == Label::Free {
                        *f = true;
                        break;
                    }
                }
            }
        }
        if let Some(first) = free_bucket.iter().position(|&f| f) {
            if first > 0 {
                ws.phi_min[0] = grid.at(first, 0, 0).act[0] - 0.5 * bucket;
            }
        }
        if let Some(last) = free_bucket.iter().rposition(|&f| f) {
            if last + 1 < nb {
                ws.phi_max[0] = grid.at(last, 0, 0).act[0] + 0.5 * bucket;
            }
        }

        // Stage 2: boundary samples per tilt bucket. Collision-free
        // buckets get a pseudo-target just past the joint box so the
        // fits stay loose there without wasting capacity.
        let loose12 = hi[2].max(-lo[2]) + 0.1;
        let loose11 = hi[1].max(-lo[1]) + 0.1;
        let b12 = axis_boundaries(&grid, 2);
        let b11 = axis_boundaries(&grid, 1);
        let in_box = |m: f64| m >= ws.phi_min[0] && m <= ws.phi_max[0];
        let xs: Vec<f64> = b12
            .iter()
            .filter(|(m, _)| in_box(*m))
            .map(|(m, _)| *m)
            .collect();
        let u12: Vec<f64> = b12
            .iter()
            .filter(|(m, _)| in_box(*m))
            .map(|(_, b)| b.unwrap_or(loose12).min(loose12))
            .collect();
        let u11: Vec<f64> = b11
            .iter()
            .filter(|(m, _)| in_box(*m))
            .map(|(_, b)| b.unwrap_or(loose11).min(loose11))
            .collect();

        // Stage 3: the polynomial and gated rows, weighted least
        // squares on the boundary curves (tight buckets count more
        // than loose pseudo-targets).
        let weights: Vec<f64> = u12
            .iter()
            .map(|&u| if u < loose12 - 1e-9 { 3.0 } else { 1.0 })
            .collect();
        let g0 = u12.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let t12: Vec<f64> = u12.iter().map(|u| g0 - u).collect();
        let poly = polyfit5(&xs, &t12, &weights);
        let samples: Vec<(f64, f64)> = xs.iter().cloned().zip(u11.iter().cloned()).collect();
        let (centers, steepness) = pick_gate_centers(&samples);
        let g1 = u11.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let t11: Vec<f64> = u11.iter().map(|u| g1 - u).collect();
        let w11: Vec<f64> = u11
            .iter()
            .map(|&u| if u < loose11 - 1e-9 { 3.0 } else { 1.0 })
            .collect();
        let gates = fit_gates(centers, steepness, &xs, &t11, &w11);
        ws.nonlinear = Some(NonlinearRows {
            poly,
            gates,
            g: [g0, g1],
        });

        // Stage 5: joint tightening until no colliding grid pose is
        // classified free; each miss tightens the row closest to
        // catching it.
        'tighten: for _pass in 0..500 {
            let mut worst: Option<(usize, f64)> = None;
            let mut missed = 0usize;
            for nd in &colliding {
                if !ws.actuated_free(&nd.act) {
                    continue;
                }
                missed += 1;
                let nl = ws.nonlinear_rows_generic::<f64>(nd.act[0], nd.act[1], nd.act[2]);
                let lin = ws.linear_rows(nd.act[0], nd.act[1], nd.act[2]);
                // Row order: nl rows first, then linear rows.
                let mut best_row = 0usize;
                let mut best_val = f64::NEG_INFINITY;
                for (r, &v) in nl.iter().chain(lin.iter()).enumerate() {
                    if v > best_val {
                        best_val = v;
                        best_row = r;
                    }
                }
                match worst {
                    Some((_, v)) if v <= best_val => {}
                    _ => worst = Some((best_row, best_val)),
                }
            }
            if missed == 0 {
                break 'tighten;
            }
            // Tighten the selected row just past the closest miss.
            let (row, resid) = worst.unwrap();
            let delta = resid.min(0.0).abs() + 1e-9;
            if row < 4 {
                let rows = ws.nonlinear.as_mut().unwrap();
                rows.g[row / 2] -= delta;
            } else {
                ws.linear[row - 4].b -= delta;
            }
        }
    }

    // Final bookkeeping on the training grid.
    let mut fn_count = 0;
    let mut rejected_free = 0;
    let mut free_total = 0;
    let mut classified_free = 0;
    for nd in &reachable {
        let free = ws.actuated_free(&nd.act);
        if free {
            classified_free += 1;
        }
        match nd.label {
            Label::Collide if free => fn_count += 1,
            Label::Free => {
                free_total += 1;
                if !free {
                    rejected_free += 1;
                }
            }
            _ => {}
        }
    }
    report.false_negatives = fn_count;
    report.over_rejection = if free_total > 0 {
        rejected_free as f64 / free_total as f64
    } else {
        0.0
    };
    report.free_volume = if report.reachable > 0 {
        classified_free as f64 / report.reachable as f64
    } else {
        0.0
    };
    (ws, report)
}

/// Dump the labeled actuated-angle grid for inspection.
pub fn export_grid_csv<W: std::io::Write>(
    geom: &LegGeometry,
    model: &CollisionModel,
    ws: &WorkspaceConstraints,
    n: usize,
    out: W,
) -> Result<(), crate::LegError> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["phi_mh", "phi_11", "phi_12", "label", "classified_free"])
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
    for nd in label_grid(geom, model, n).nodes {
        let label = match nd.label {
            Label::Unreachable => "unreachable",
            Label::Free => "free",
            Label::Collide => "collide",
        };
        wtr.write_record([
            format!("{:.6}", nd.act[0]),
            format!("{:.6}", nd.act[1]),
            format!("{:.6}", nd.act[2]),
            label.to_string(),
            format!("{}", ws.actuated_free(&nd.act)),
        ])
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn setup() -> (LegGeometry, CollisionModel) {
        (LegGeometry::default(), CollisionModel::default())
    }

    #[test]
    fn nominal_stance_passes_fitted_constraints() {
        let (geom, model) = setup();
        let (ws, report) = extract_workspace(&geom, &model, 25);
        assert!(report.colliding > 0, "expected a non-trivial collision set");
        assert!(ws.actuated_free(&[0.0, 0.55, -0.55]));
        let phi = crate::kinematics::solve_full_configuration(&geom, &[0.0, 0.55, -0.55]).unwrap();
        let (lin, nl) = workspace_eval(&phi, &ws);
        assert!(lin.iter().all(|&r| r < 0.0));
        assert!(nl.iter().all(|&r| r < 0.0));
    }

    #[test]
    fn colliding_corner_is_rejected() {
        let (geom, model) = setup();
        let (ws, _) = extract_workspace(&geom, &model, 25);
        // Deep inboard tilt with the leg swung up: collides in the
        // capsule model, must be rejected by the fitted set.
        let act = [1.3, 0.9, -0.2];
        assert_eq!(
            symmetrized_collides(&geom, &model, &act),
            Label::Collide,
            "corner pose should collide in the capsule model"
        );
        assert!(!ws.actuated_free(&act));
    }

    #[test]
    fn fit_has_zero_false_negatives_and_bounded_over_rejection() {
        let (geom, model) = setup();
        let (_, report) = extract_workspace(&geom, &model, 50);
        assert_eq!(report.false_negatives, 0);
        assert!(
            report.over_rejection <= 0.10,
            "over-rejection {:.3}",
            report.over_rejection
        );
    }

    #[test]
    fn torso_far_away_reduces_to_box_bounds() {
        let (geom, mut model) = setup();
        for cap in &mut model.torso {
            cap.a += Vector3::new(0.0, 0.0, 100.0);
            cap.b += Vector3::new(0.0, 0.0, 100.0);
        }
        let (ws, report) = extract_workspace(&geom, &model, 15);
        assert_eq!(report.colliding, 0);
        assert!(ws.nonlinear.is_none());
        assert!(ws.linear.is_empty());
    }

    #[test]
    fn refit_on_finer_grid_is_stable() {
        let (geom, model) = setup();
        let (ws_coarse, _) = extract_workspace(&geom, &model, 50);
        let (ws_fine, _) = extract_workspace(&geom, &model, 100);
        // Evaluate both safe sets on the fine grid.
        let nodes = label_grid(&geom, &model, 100).nodes;
        let mut reachable = 0usize;
        let mut free_coarse = 0usize;
        let mut free_fine = 0usize;
        for nd in &nodes {
            if nd.label == Label::Unreachable {
                continue;
            }
            reachable += 1;
            if ws_coarse.actuated_free(&nd.act) {
                free_coarse += 1;
            }
            if ws_fine.actuated_free(&nd.act) {
                free_fine += 1;
            }
        }
        let va = free_coarse as f64 / reachable as f64;
        let vb = free_fine as f64 / reachable as f64;
        assert!(
            (va - vb).abs() / va.max(1e-9) <= 0.05,
            "safe-set volume moved {va:.4} → {vb:.4}"
        );
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (geom, model) = setup();
        let (ws, _) = extract_workspace(&geom, &model, 20);
        let act = [0.4, 0.6, -0.3];
        let (_, nl_grad) = workspace_gradients(&ws, &act);
        let eps = 1e-6;
        for (row, grad) in nl_grad.iter().enumerate() {
            for k in 0..3 {
                let mut hi = act;
                let mut lo = act;
                hi[k] += eps;
                lo[k] -= eps;
                let rh = ws.nonlinear_rows_generic::<f64>(hi[0], hi[1], hi[2])[row];
                let rl = ws.nonlinear_rows_generic::<f64>(lo[0], lo[1], lo[2])[row];
                let fd = (rh - rl) / (2.0 * eps);
                assert!(
                    (fd - grad[k]).abs() <= 1e-6 * fd.abs().max(1.0),
                    "row {row} grad {k}: {fd} vs {}",
                    grad[k]
                );
            }
        }
    }
}
