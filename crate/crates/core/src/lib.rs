//! Dual-quaternion toolkit for a seven-degree-of-freedom anthropomorphic
//! lower limb: quaternion and dual quaternion algebra, a configurable
//! hip-knee-ankle model with range-of-motion screening, forward kinematics
//! for pose and velocity, minimum-jerk task-space planning, a trainable
//! inverse kinematics approximator with iterative refinement, and inverse
//! dynamics over dual quaternion transforms.

pub mod dq;
pub mod dynamics;
pub mod error;
pub mod ik;
pub mod kinematics;
pub mod limb;
pub mod quat;
pub mod trajectory;
pub mod verify;

pub use dq::{DualQuaternion, Twist, Wrench};
pub use error::{Error, Result};
pub use limb::{JointAccels, JointRates, JointState, LimbModel, RomTable, Segment};
pub use quat::{PureQuaternion, Quaternion};
