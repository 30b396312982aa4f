use serde::{Deserialize, Serialize};

use crate::geometry::LegGeometry;
use crate::kinematics::{closure_jacobian_generic, solve_closure};

/// Outcome of the constraint-Jacobian rank sweep over the thigh-angle
/// grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankReport {
    pub grid: usize,
    pub reachable: usize,
    pub unreachable: usize,
    pub min_singular_value: f64,
    /// Grid points where `H` lost rank (σ_min ≤ threshold).
    pub failures: Vec<(f64, f64, f64)>,
}

impl RankReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Smallest singular value of the 2×5 constraint Jacobian via the 2×2
/// normal matrix.
pub fn min_singular_value(h: &[[f64; 5]; 2]) -> f64 {
    let mut s = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            s[r][c] = (0..5).map(|k| h[r][k] * h[c][k]).sum();
        }
    }
    let tr = s[0][0] + s[1][1];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    (tr / 2.0 - disc).max(0.0).sqrt()
}

/// Sweep a uniform `n×n` grid over the thigh-angle ranges, solve the
/// passive joints at each node and verify the constraint Jacobian
/// keeps full rank. Unsolvable nodes are counted as unreachable, not
/// as failures.
pub fn check_constraint_rank(geom: &LegGeometry, n: usize, sigma_min: f64) -> RankReport {
    let mut report = RankReport {
        grid: n,
        reachable: 0,
        unreachable: 0,
        min_singular_value: f64::INFINITY,
        failures: Vec::new(),
    };
    for i in 0..n {
        for j in 0..n {
            let phi11 = geom.phi_min[1]
                + (geom.phi_max[1] - geom.phi_min[1]) * (i as f64) / ((n - 1) as f64);
            let phi12 = geom.phi_min[3]
                + (geom.phi_max[3] - geom.phi_min[3]) * (j as f64) / ((n - 1) as f64);
            match solve_closure(geom, phi11, phi12) {
                Err(_) => report.unreachable += 1,
                Ok((k1, k2)) => {
                    // Skip solutions outside the passive ranges; the box
                    // bounds exclude them from operation.
                    if k1 < geom.phi_min[2]
                        || k1 > geom.phi_max[2]
                        || k2 < geom.phi_min[4]
                        || k2 > geom.phi_max[4]
                    {
                        report.unreachable += 1;
                        continue;
                    }
                    report.reachable += 1;
                    let phi = [0.0, phi11, k1, phi12, k2];
                    let h = closure_jacobian_generic::<f64>(geom, &phi);
                    let sv = min_singular_value(&h);
                    report.min_singular_value = report.min_singular_value.min(sv);
                    if sv <= sigma_min {
                        report.failures.push((phi11, phi12, sv));
                    }
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::solve_full_configuration;
    use nalgebra::Matrix2x5;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_geometry_keeps_full_rank_on_grid() {
        let geom = LegGeometry::default();
        let report = check_constraint_rank(&geom, 200, 1e-8);
        assert!(report.passed(), "failures: {:?}", &report.failures[..report.failures.len().min(5)]);
        assert!(report.reachable > 10_000);
        assert!(report.min_singular_value > 1e-4);
    }

    #[test]
    fn degenerate_geometry_reports_failures() {
        let mut geom = LegGeometry::default();
        // Zero-length shins collapse the constraint Jacobian columns.
        geom.l2 = 1e-9;
        geom.l4 = 1e-9;
        let report = check_constraint_rank(&geom, 50, 1e-8);
        assert!(!report.passed() || report.reachable == 0);
    }

    #[test]
    fn min_singular_value_matches_dense_svd() {
        let geom = LegGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut checked = 0;
        while checked < 10 {
            let a1 = rng.gen_range(-1.0..1.0);
            let a2 = rng.gen_range(-1.0..1.0);
            if let Ok(phi) = solve_full_configuration(&geom, &[0.0, a1, a2]) {
                let h = closure_jacobian_generic::<f64>(&geom, &phi);
                let hm = Matrix2x5::from_fn(|r, c| h[r][c]);
                let svd = hm.svd(false, false);
                let oracle = svd.singular_values.min();
                let fast = min_singular_value(&h);
                assert!(
                    (oracle - fast).abs() <= 1e-10,
                    "σ_min mismatch: {oracle} vs {fast}"
                );
                checked += 1;
            }
        }
    }
}
