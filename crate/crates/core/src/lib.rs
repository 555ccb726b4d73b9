//! Generalized Bernstein-type approximation operators `A_n[f](x) = E f(S_n)`
//! and their non-asymptotic error analysis.
//!
//! * [`function`]: target functions with endpoint clamping and a small catalog.
//! * [`family`]: the Bernoulli and Poisson families behind the Bernstein and
//!   Szász operators, with exact pmfs, sampling and normalized log-MGFs.
//! * [`operators`]: exact and Monte Carlo operator evaluation, sup-errors.
//! * [`modulus`]: the weighted (Ditzian–Totik) modulus of continuity.
//! * [`tail`]: tail curves, log-MGF envelopes and Young–Fenchel conjugates.
//! * [`bounds`]: Stieltjes-integral upper bounds and lower-bound constants.
//! * [`experiments`]: config-driven convergence studies and reports.

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod family;
pub mod function;
pub mod modulus;
pub mod numeric;
pub mod operators;
pub mod tail;

pub use error::{Error, Result};
pub use family::{Family, FamilyKind};
pub use function::{HolderSpec, Interval, TargetFunction};
pub use numeric::GridSpec;
