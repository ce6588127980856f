//! Finite-dimensional rate-independent evolutions of the form
//!
//! ```text
//! ∂ψ(y'(t)) + A y(t) ∋ ℓ(t),    y(0) = y₀,
//! ```
//!
//! where `A` is a symmetric positive semidefinite operator on `R^N` and `ψ` is a
//! positively 1-homogeneous convex dissipation potential (the support function of a
//! closed convex set `C*` of admissible generalized stresses). This is the abstract
//! shape of linearized elastoplasticity with linear kinematic, isotropic, or combined
//! hardening at material-point or small Galerkin scale.
//!
//! The crate provides
//!
//! * the three classical hardening models and their assembly into the abstract
//!   problem ([`materials`]),
//! * the θ-scheme time discretization with exact closed-form return maps and a
//!   generic proximal fallback ([`solver`]),
//! * the nonnegative trajectory functionals that vanish exactly on solutions and
//!   whose value on any candidate bounds its squared uniform distance to the
//!   solution ([`functional`]),
//! * a posteriori error certificates, Lipschitz-bound verification, adaptive
//!   time-step refinement, and convergence-rate studies ([`certify`]),
//! * subspace restriction and nested space/time convergence experiments
//!   ([`galerkin`]).
//!
//! See the book under `book/` for a guided tour; its code snippets double as
//! doc-tests of this crate.

// `!(x > 0.0)` guards reject NaN along with the out-of-range values; the
// un-negated comparisons would silently accept NaN parameters.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod dissipation;
pub mod energy;
pub mod error;
pub mod extended;
pub mod functional;
pub mod galerkin;
pub mod materials;
pub mod problem;
pub mod solver;

pub use crate::dissipation::{CharacteristicSet, ConjugacyReport, DissipationPotential};
pub use crate::energy::{CoercivityScope, QuadraticEnergy};
pub use crate::error::{Error, Result};
pub use crate::extended::Extended;
pub use crate::functional::{FunctionalReport, Quadrature};
pub use crate::materials::{HardeningKind, LoadPath, MaterialModel};
pub use crate::problem::{Problem, Tolerances};
pub use crate::solver::{Partition, StepDiagnostics, Trajectory};

/// A point of the state space `R^N` (plastic-strain block followed by the
/// internal-variable block for the hardening models).
pub type StateVector = nalgebra::DVector<f64>;

/// A dual-space vector (generalized stresses, load values). Same concrete
/// representation as [`StateVector`]; kept as a separate alias to mark roles.
pub type DualVector = nalgebra::DVector<f64>;

#[cfg(doctest)]
mod book {
    //! Runs every fenced Rust snippet of the book as a doc-test, so the guide
    //! can never drift from the library.
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }
    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(dissipation, "../../../book/src/dissipation.md");
    chapter!(
        energy_and_materials,
        "../../../book/src/energy-and-materials.md"
    );
    chapter!(theta_scheme, "../../../book/src/theta-scheme.md");
    chapter!(functionals, "../../../book/src/functionals.md");
    chapter!(certificates, "../../../book/src/certificates.md");
    chapter!(galerkin, "../../../book/src/galerkin.md");
}
