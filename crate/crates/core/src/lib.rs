//! Numerics for the exterior Dirichlet problem of special Lagrangian
//! equations with critical and supercritical phase.
//!
//! The crate is organised bottom-up:
//!
//! * [`symfun`]: elementary and generalized symmetric polynomials, exact or
//!   floating point, plus the binomial identities behind the phase polynomials.
//! * [`phasepoly`]: the phase `H`, the polynomials `X, Y, X̂, Ŷ, Z, Ẑ` and the
//!   certified real roots of `t ↦ Z(ta)`.
//! * [`xiquant`]: extremal weights `ξ̲_k, ξ̄_k`, the decay exponent `m(Θ, a)`
//!   and admissibility.
//! * [`odepsi`]: the profile ODE for `ψ(r, β)`, solved by an adaptive
//!   Runge–Kutta scheme and by its implicit closed form.
//! * [`subsol`]: the generalized radially symmetric functions built from `ψ`,
//!   their Hessians and pointwise subsolution checks.
//! * [`cli`]: batch drivers behind the `lagphase` binary.

pub mod cli;
pub mod error;
pub mod odepsi;
pub mod phasepoly;
pub mod quad;
pub mod subsol;
pub mod symfun;
pub mod xiquant;

pub use error::{Error, Result};
