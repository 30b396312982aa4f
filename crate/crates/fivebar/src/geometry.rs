use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::LegError;

/// One of the four legs. Front-right is the planning leg; the others
/// follow it through the allocation maps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LegIndex {
    FrontRight,
    FrontLeft,
    RearRight,
    RearLeft,
}

impl LegIndex {
    pub const ALL: [LegIndex; 4] = [
        LegIndex::FrontRight,
        LegIndex::FrontLeft,
        LegIndex::RearRight,
        LegIndex::RearLeft,
    ];

    pub fn as_usize(self) -> usize {
        match self {
            LegIndex::FrontRight => 0,
            LegIndex::FrontLeft => 1,
            LegIndex::RearRight => 2,
            LegIndex::RearLeft => 3,
        }
    }

    pub fn is_left(self) -> bool {
        matches!(self, LegIndex::FrontLeft | LegIndex::RearLeft)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            LegIndex::FrontRight => "FR",
            LegIndex::FrontLeft => "FL",
            LegIndex::RearRight => "RR",
            LegIndex::RearLeft => "RL",
        }
    }
}

/// Pose of a hip mount: rotation and translation from the body frame
/// to the motor-housing axis frame. The housing tilts about the mount
/// x axis.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MountPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl MountPose {
    pub fn identity_at(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }
}

/// Rigid parameters of one leg plus the four hip mount poses.
///
/// Both chains default to identical links; the chain pivots are
/// coaxial (`l0 = 0`). Link center-of-mass offsets are measured along
/// the link from its proximal joint; rod inertias are about the link's
/// own COM (axial / perpendicular).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct LegGeometry {
    /// Chain pivot separation in the linkage plane (m).
    pub l0: f64,
    /// Link lengths: chain-1 thigh, chain-1 shin, chain-2 thigh, chain-2 shin (m).
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,

    pub housing_mass: f64,
    /// Housing COM planar position (forward, extension) in the plane frame.
    pub housing_com: [f64; 2],
    /// Housing inertia about the tilt axis through its own COM.
    pub housing_inertia_axis: f64,

    pub thigh_mass: f64,
    pub thigh_com: f64,
    pub thigh_inertia_perp: f64,
    pub thigh_inertia_axial: f64,

    pub shin_mass: f64,
    pub shin_com: f64,
    pub shin_inertia_perp: f64,
    pub shin_inertia_axial: f64,

    /// Extra point mass carried at the paw (end effector), kg.
    pub paw_mass: f64,

    /// Viscous joint damping, one entry per joint (N·m·s/rad).
    pub damping: [f64; 5],
    /// Actuated torque limits (N·m), symmetric, on (φ_MH, φ_11, φ_12).
    pub torque_limit: [f64; 3],

    /// Joint range box (rad).
    pub phi_min: [f64; 5],
    pub phi_max: [f64; 5],
    /// Joint velocity box (rad/s).
    pub phidot_max: [f64; 5],

    /// +1 selects the paw branch on the extended (downward) side of the
    /// knee-circle intersection.
    pub knee_sign: f64,

    /// Total leg mass the configuration is expected to add up to (kg).
    pub total_mass: f64,

    /// Hip mount poses, indexed by [`LegIndex::as_usize`].
    pub mounts: [MountPose; 4],
}

impl Default for LegGeometry {
    fn default() -> Self {
        // Masses add up to the 2.02 kg leg budget:
        // housing 0.72 + 2×0.35 thigh + 2×0.30 shin.
        let thigh_mass = 0.35;
        let thigh_len = 0.18;
        let shin_mass = 0.30;
        let shin_len = 0.28;
        Self {
            l0: 0.0,
            l1: thigh_len,
            l2: shin_len,
            l3: thigh_len,
            l4: shin_len,
            housing_mass: 0.72,
            housing_com: [0.0, 0.03],
            housing_inertia_axis: 8e-4,
            thigh_mass,
            thigh_com: thigh_len / 2.0,
            thigh_inertia_perp: thigh_mass * thigh_len * thigh_len / 12.0,
            thigh_inertia_axial: 1e-5,
            shin_mass,
            shin_com: shin_len / 2.0,
            shin_inertia_perp: shin_mass * shin_len * shin_len / 12.0,
            shin_inertia_axial: 1e-5,
            paw_mass: 0.0,
            damping: [0.02, 0.02, 0.005, 0.02, 0.005],
            torque_limit: [12.0, 12.0, 12.0],
            phi_min: [-1.35, -2.2, -2.9, -2.2, 0.05],
            phi_max: [1.35, 2.2, -0.05, 2.2, 2.9],
            phidot_max: [25.0, 25.0, 40.0, 25.0, 40.0],
            knee_sign: 1.0,
            total_mass: 2.02,
            mounts: [
                MountPose::identity_at(Vector3::new(0.26, -0.23, -0.02)),
                MountPose::identity_at(Vector3::new(0.26, 0.23, -0.02)),
                MountPose::identity_at(Vector3::new(-0.26, -0.23, -0.02)),
                MountPose::identity_at(Vector3::new(-0.26, 0.23, -0.02)),
            ],
        }
    }
}

impl LegGeometry {
    pub fn validate(&self) -> Result<(), LegError> {
        for (name, v) in [
            ("l1", self.l1),
            ("l2", self.l2),
            ("l3", self.l3),
            ("l4", self.l4),
        ] {
            if v <= 0.0 {
                return Err(LegError::BadGeometry(format!("{name} must be positive")));
            }
        }
        if self.l0 < 0.0 {
            return Err(LegError::BadGeometry("l0 must be non-negative".into()));
        }
        for (name, v) in [
            ("housing_mass", self.housing_mass),
            ("thigh_mass", self.thigh_mass),
            ("shin_mass", self.shin_mass),
        ] {
            if v <= 0.0 {
                return Err(LegError::BadGeometry(format!("{name} must be positive")));
            }
        }
        if self.paw_mass < 0.0 {
            return Err(LegError::BadGeometry("paw_mass must be non-negative".into()));
        }
        if self.damping.iter().any(|&d| d < 0.0) {
            return Err(LegError::BadGeometry("damping must be non-negative".into()));
        }
        let mass = self.housing_mass + 2.0 * self.thigh_mass + 2.0 * self.shin_mass;
        if (mass - self.total_mass).abs() > 1e-6 {
            return Err(LegError::BadGeometry(format!(
                "link masses add to {mass} kg, configured leg mass is {} kg",
                self.total_mass
            )));
        }
        for k in 0..5 {
            if self.phi_min[k] >= self.phi_max[k] {
                return Err(LegError::BadGeometry(format!(
                    "empty joint range on joint {k}"
                )));
            }
        }
        Ok(())
    }

    pub fn mount(&self, leg: LegIndex) -> &MountPose {
        &self.mounts[leg.as_usize()]
    }

    /// Actuated-angle box, in (φ_MH, φ_11, φ_12) order.
    pub fn actuated_box(&self) -> ([f64; 3], [f64; 3]) {
        (
            [self.phi_min[0], self.phi_min[1], self.phi_min[3]],
            [self.phi_max[0], self.phi_max[1], self.phi_max[3]],
        )
    }

    pub fn from_json(text: &str) -> Result<Self, LegError> {
        let geom: LegGeometry = serde_json::from_str(text)
            .map_err(|e| LegError::BadGeometry(format!("geometry JSON: {e}")))?;
        geom.validate()?;
        Ok(geom)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("geometry serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry_is_valid_and_matches_leg_mass() {
        let g = LegGeometry::default();
        g.validate().unwrap();
        assert!(
            (g.housing_mass + 2.0 * g.thigh_mass + 2.0 * g.shin_mass - 2.02).abs() < 1e-12
        );
    }

    #[test]
    fn json_roundtrip() {
        let g = LegGeometry::default();
        let g2 = LegGeometry::from_json(&g.to_json()).unwrap();
        assert_eq!(g2.l2, g.l2);
        assert_eq!(g2.mounts[3].translation, g.mounts[3].translation);
    }

    #[test]
    fn bad_mass_budget_rejected() {
        let mut g = LegGeometry::default();
        g.total_mass = 3.0;
        assert!(g.validate().is_err());
    }
}
