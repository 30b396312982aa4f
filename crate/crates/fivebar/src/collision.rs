use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{LegGeometry, LegIndex};
use crate::kinematics::dir;

/// Swept-sphere segment; degenerates to a sphere when the endpoints
/// coincide.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Capsule {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

impl Capsule {
    pub fn sphere(center: Vector3<f64>, radius: f64) -> Self {
        Self {
            a: center,
            b: center,
            radius,
        }
    }
}

/// Closest distance between two segments (Ericson, Real-Time Collision
/// Detection §5.1.9).
pub fn segment_distance(
    p1: &Vector3<f64>,
    q1: &Vector3<f64>,
    p2: &Vector3<f64>,
    q2: &Vector3<f64>,
) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let (s, t);
    if a <= 1e-14 && e <= 1e-14 {
        return r.norm();
    }
    if a <= 1e-14 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= 1e-14 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s_ = if denom > 1e-14 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t_ = (b * s_ + f) / e;
            if t_ < 0.0 {
                t_ = 0.0;
                s_ = (-c / a).clamp(0.0, 1.0);
            } else if t_ > 1.0 {
                t_ = 1.0;
                s_ = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s_;
            t = t_;
        }
    }
    ((p1 + s * d1) - (p2 + t * d2)).norm()
}

pub fn capsule_distance(a: &Capsule, b: &Capsule) -> f64 {
    segment_distance(&a.a, &a.b, &b.a, &b.b) - a.radius - b.radius
}

/// Collision primitives: torso capsules in the body frame plus the
/// swept radii of the leg links. Stands in for the mesh geometry the
/// controller constraints were extracted from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CollisionModel {
    pub torso: Vec<Capsule>,
    pub link_radius: f64,
    pub paw_radius: f64,
}

impl Default for CollisionModel {
    fn default() -> Self {
        // Two longitudinal capsules approximating the 0.68 × 0.40 × 0.20
        // torso box.
        Self {
            torso: vec![
                Capsule {
                    a: Vector3::new(-0.27, -0.10, 0.0),
                    b: Vector3::new(0.27, -0.10, 0.0),
                    radius: 0.10,
                },
                Capsule {
                    a: Vector3::new(-0.27, 0.10, 0.0),
                    b: Vector3::new(0.27, 0.10, 0.0),
                    radius: 0.10,
                },
            ],
            link_radius: 0.018,
            paw_radius: 0.03,
        }
    }
}

/// Leg link capsules in the body frame for a full joint configuration.
pub fn leg_capsules(
    geom: &LegGeometry,
    model: &CollisionModel,
    leg: LegIndex,
    phi: &[f64; 5],
) -> Vec<Capsule> {
    let mount = geom.mount(leg);
    let (s, c) = (phi[0].sin(), phi[0].cos());
    let lift = |px: f64, py: f64| -> Vector3<f64> {
        let p_m = Vector3::new(px, py * s, -py * c);
        mount.rotation * p_m + mount.translation
    };
    let mut out = Vec::with_capacity(5);
    let chains = [
        (geom.l0 / 2.0, geom.l1, geom.l2, phi[1], phi[1] + phi[2]),
        (-geom.l0 / 2.0, geom.l3, geom.l4, phi[3], phi[3] + phi[4]),
    ];
    let mut paw = Vector3::zeros();
    for (px0, lt, ls, theta_t, theta_s) in chains {
        let ut = dir::<f64>(theta_t);
        let us = dir::<f64>(theta_s);
        let pivot = lift(px0, 0.0);
        let knee = lift(px0 + lt * ut[0], lt * ut[1]);
        let foot = lift(px0 + lt * ut[0] + ls * us[0], lt * ut[1] + ls * us[1]);
        out.push(Capsule {
            a: pivot,
            b: knee,
            radius: model.link_radius,
        });
        out.push(Capsule {
            a: knee,
            b: foot,
            radius: model.link_radius,
        });
        paw = foot;
    }
    out.push(Capsule::sphere(paw, model.paw_radius));
    out
}

/// Smallest leg-to-torso clearance; negative means overlap.
pub fn torso_clearance(
    geom: &LegGeometry,
    model: &CollisionModel,
    leg: LegIndex,
    phi: &[f64; 5],
) -> f64 {
    let caps = leg_capsules(geom, model, leg, phi);
    let mut min = f64::INFINITY;
    for lc in &caps {
        for tc in &model.torso {
            min = min.min(capsule_distance(lc, tc));
        }
    }
    min
}

/// Capsule-model collision test for one leg pose.
pub fn pose_collides(
    geom: &LegGeometry,
    model: &CollisionModel,
    leg: LegIndex,
    phi: &[f64; 5],
) -> bool {
    torso_clearance(geom, model, leg, phi) < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::solve_full_configuration;
    use approx::assert_relative_eq;

    #[test]
    fn segment_distance_basics() {
        let o = Vector3::zeros();
        let x = Vector3::x();
        // Parallel unit segments one apart.
        assert_relative_eq!(
            segment_distance(&o, &x, &Vector3::y(), &(Vector3::y() + x)),
            1.0
        );
        // Crossing segments.
        assert_relative_eq!(
            segment_distance(
                &Vector3::new(-1.0, 0.0, 0.5),
                &Vector3::new(1.0, 0.0, 0.5),
                &Vector3::new(0.0, -1.0, 0.0),
                &Vector3::new(0.0, 1.0, 0.0)
            ),
            0.5
        );
        // Point vs segment interior.
        assert_relative_eq!(
            segment_distance(&Vector3::new(0.5, 2.0, 0.0), &Vector3::new(0.5, 2.0, 0.0), &o, &x),
            2.0
        );
    }

    #[test]
    fn nominal_stance_is_collision_free() {
        let geom = LegGeometry::default();
        let model = CollisionModel::default();
        let phi = solve_full_configuration(&geom, &[0.0, 0.55, -0.55]).unwrap();
        for leg in LegIndex::ALL {
            assert!(
                !pose_collides(&geom, &model, leg, &phi),
                "{} collides at nominal stance",
                leg.short_name()
            );
        }
    }

    #[test]
    fn deep_inboard_tilt_collides() {
        let geom = LegGeometry::default();
        let model = CollisionModel::default();
        // Tilted far toward the torso with the leg folded upward.
        let phi = solve_full_configuration(&geom, &[1.1, 0.55, -0.55]).unwrap();
        assert!(pose_collides(&geom, &model, LegIndex::FrontRight, &phi));
    }

    #[test]
    fn outboard_tilt_stays_free_below_horizontal() {
        let geom = LegGeometry::default();
        let model = CollisionModel::default();
        for swing in [-0.6f64, -0.3, 0.0, 0.3, 0.6] {
            if let Ok(phi) = solve_full_configuration(&geom, &[-1.2, 0.55 + swing, -0.55 + swing])
            {
                assert!(
                    !pose_collides(&geom, &model, LegIndex::FrontRight, &phi),
                    "outboard pose collides at swing {swing}"
                );
            }
        }
    }
}
