//! Truthful-in-expectation combinatorial auctions for subadditive bidders.
//!
//! Bidders are replaced by c-proxy valuations, the configuration LP over the
//! proxies is solved exactly, and the fractional solution is rounded by a
//! tentative draw, a per-item lottery and a personal cancellation step whose
//! probabilities make the expected welfare exactly `p` times the LP optimum.
//! Payments are the expected VCG charges over that distributional range.
//!
//! [`verify`] computes the exact outcome law by enumeration and checks the
//! identities the construction relies on.

pub mod caps;
pub mod commands;
pub mod error;
pub mod format;
pub mod generate;
pub mod instance;
pub mod items;
pub mod lp;
pub mod mechanism;
pub mod scalar;
pub mod valuations;
pub mod verify;

pub use caps::Caps;
pub use error::{Error, Result};
pub use instance::Instance;
pub use items::ItemSet;
pub use mechanism::{MechanismConfig, Outcome, Prepared, QVariant};
pub use scalar::{Arithmetic, Rational, Scalar};
pub use valuations::{KeepRate, ProxyValuation, Valuation, ValuationKind};
