//! Five-bar closed-chain leg model.
//!
//! Each leg is a planar five-bar linkage (two serial two-link chains
//! sharing the paw) carried by a motor-housing joint that tilts the
//! linkage plane about the hip axis. Joint order throughout is
//! `[φ_MH, φ_11, φ_21, φ_12, φ_22]`: housing tilt, chain-1 thigh,
//! chain-1 knee, chain-2 thigh, chain-2 knee. The thighs and the
//! housing are actuated, the knees are passive and follow the loop
//! closure.
//!
//! In-plane angles are measured from the extended (downward) axis,
//! positive toward the leg's forward direction; knee angles are
//! relative to their thigh. The two chain pivots are coaxial by
//! default (`l0 = 0`), which makes the left/right and fore/aft mirror
//! maps plain sign flips on the joint vector.

pub mod collision;
pub mod dynamics;
pub mod geometry;
pub mod kinematics;
pub mod momentum;
pub mod rank;
pub mod workspace;

pub use dynamics::{leg_dynamics, mass_matrix, ActuatedTorque, LegState};
pub use geometry::{LegGeometry, LegIndex, MountPose};
pub use kinematics::{closure_residual, solve_closure};
pub use momentum::{angular_momentum, momentum_matrix, reaction_torque};
pub use rank::{check_constraint_rank, RankReport};
pub use workspace::{extract_workspace, workspace_eval, WorkspaceConstraints};

use thiserror::Error;

/// Number of generalized coordinates of one leg.
pub const NQ: usize = 5;
/// Actuated joint indices within the 5-vector.
pub const ACTUATED: [usize; 3] = [0, 1, 3];
/// Passive joint indices within the 5-vector.
pub const PASSIVE: [usize; 2] = [2, 4];

#[derive(Debug, Error)]
pub enum LegError {
    #[error("closure constraint unreachable at the requested actuated angles")]
    ClosureUnreachable,
    #[error("constraint system ill-conditioned (cond {cond:.3e})")]
    IllConditioned { cond: f64 },
    #[error("numerical failure: {0}")]
    NumericalFailure(&'static str),
    #[error("invalid geometry: {0}")]
    BadGeometry(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
