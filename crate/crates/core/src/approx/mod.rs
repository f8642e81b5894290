//! Nonlinear functions from additions and multiplications only.
//!
//! Everything here is generic over [`Engine`](crate::arith::Engine), so the
//! same routine evaluates plaintext tensors or shares.

mod cheb;
mod exp;
mod newton;

pub use cheb::{cheb_eval_odd, cheb_fit_odd, logistic, normal_cdf, preset, ChebOddSeries, PRESETS};
pub use exp::{exp_nonpos, exp_scaled, softmax_public, softmax_reference, softmax_shifted, ExpConfig, SoftmaxConfig};
pub use newton::{abs, newton_invroot8, newton_invsqrt, newton_recip, newton_sgn, relu, NewtonConfig};
