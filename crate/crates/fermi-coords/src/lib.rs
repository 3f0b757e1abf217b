//! Geodesic normal coordinates adapted to a submanifold.
//!
//! Given a pseudo-Riemannian metric in a coordinate chart and a nondegenerate
//! submanifold through a base point, this crate builds the adapted normal
//! chart (intrinsic normal coordinates along the submanifold, parallel normal
//! frames, normal geodesics transverse to it), measures the Taylor expansion
//! of the metric in that chart, and cross-checks the expansion against
//! curvature and second-fundamental-form data computed independently in the
//! original chart.
//!
//! All Taylor data is carried by truncated multivariate jets ([`jet::Jet`]);
//! geodesic and transport equations are integrated with jet-valued state so a
//! single solve yields the full coefficient table of the chart map.

pub mod catalog;
pub mod chart;
pub mod config;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod fermi;
pub mod frame;
pub mod jet;
pub mod linalg;
pub mod runner;
pub mod scalar;
pub mod second_form;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
