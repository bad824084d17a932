//! Closed-form rigid registration of 3-D point correspondences.
//!
//! The [`solver`] module computes the optimal rotation and translation from
//! weighted correspondences by solving the characteristic quartic of a 4x4
//! symmetric matrix analytically. [`oracle`] holds iterative SVD and
//! eigen-decomposition baselines, [`icp`] a point-to-point ICP loop, and
//! [`datagen`] a deterministic synthetic-case generator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod datagen;
pub mod error;
pub mod geom;
pub mod icp;
pub mod io;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
pub use icp::{icp_register, IcpConfig, IcpResult, PointCloud};
pub use geom::{Mat3, Mat4Sym, Quaternion, RigidTransform, Vec3};
pub use solver::{solve, CorrespondenceSet, Method, Solution, SolverConfig};
