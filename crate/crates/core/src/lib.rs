//! Polyconvex invariant bases for anisotropic hyperelasticity and
//! physics-augmented neural network (PANN) potentials built on them.
//!
//! The crate is organised bottom-up: [`kinematics`] and [`symmetry`] provide
//! tensors, frames and rotation groups; [`invariants`] and [`relations`]
//! evaluate and cross-check the invariant bases; [`network`] and [`pann`]
//! assemble the potentials; [`calibrate`], [`data`] and [`diagnostics`]
//! fit and certify them.

pub mod calibrate;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod invariants;
pub mod kinematics;
pub mod material;
pub mod network;
pub mod pann;
pub mod relations;
pub mod symmetry;

pub use error::{Error, Result};
pub use invariants::{BasisId, BasisKind, InvariantVector};
pub use kinematics::{ExtendedArgs, KinematicBundle, Tensor2, Tensor4, Vec3};
pub use material::Hyperelastic;
pub use network::{ArchitectureSpec, ConstraintMode, NetworkParams};
pub use pann::{PannModel, Variant};
pub use symmetry::{GroupId, PreferredFrame, RotationSet};
