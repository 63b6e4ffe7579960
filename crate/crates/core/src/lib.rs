//! Small-gain certification of input-to-state stability for networks of
//! nonlinear subsystems.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod gain;
pub mod graph;
pub mod lyapunov;
pub mod network;
pub mod parser;
pub mod path;
pub mod scalar;
pub mod sim;
pub mod smallgain;

pub use gain::{GainClass, GainExpr, InvertError};
pub use lyapunov::{compose, derive_phi, CompositeLyapunov, ExternalMode, LyapunovError, LyapunovFn, SubsystemSpec};
pub use network::{DiagOp, ExternalCoupling, GainNetwork, GainOperator, Maf, MonotoneOperator, NetworkError};
pub use parser::{format_gain, parse_gain, ParseError};
pub use path::{construct_path, OmegaPath, PathError, PathOptions, PathReport, ValidatedPath};
pub use scalar::Scalar;
pub use smallgain::{check_sgc, SgcStatus, SgcVerdict};

pub type GainExpr64 = GainExpr<f64>;
pub type GainExpr32 = GainExpr<f32>;
pub type GainNetwork64 = GainNetwork<f64>;
pub type GainNetwork32 = GainNetwork<f32>;
pub type OmegaPath64 = OmegaPath<f64>;
pub type OmegaPath32 = OmegaPath<f32>;
pub type CompositeLyapunov64 = CompositeLyapunov<f64>;
pub type CompositeLyapunov32 = CompositeLyapunov<f32>;
