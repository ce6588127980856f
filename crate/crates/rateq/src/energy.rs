//! Quadratic stored energies `φ(y) = ½⟨Ay, y⟩` and their coercivity bookkeeping.
//!
//! Every quantitative bound downstream (Lipschitz bounds, distance
//! certificates, adaptive budgets) consumes the coercivity constant `α` with
//! `⟨Ay, y⟩ ≥ α|y|²` on a declared scope, so `α` is stored explicitly and can
//! be validated against a sampled Rayleigh-quotient minimum rather than used
//! silently.

use crate::error::{check_dim, Error, Result};
use crate::StateVector;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Where the declared coercivity constant is claimed to hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CoercivityScope {
    /// Only on the dissipation domain cone `C = D(ψ)`.
    OnC,
    /// On differences `C − C`; what the uniform-distance machinery needs.
    OnCMinusC,
    /// On the whole space.
    Global,
}

impl CoercivityScope {
    /// Distance certificates convert `φ`-bounds into norm bounds only when
    /// the constant holds on differences of trajectories.
    pub fn supports_norm_bounds(self) -> bool {
        matches!(self, CoercivityScope::OnCMinusC | CoercivityScope::Global)
    }
}

/// A symmetric positive semidefinite operator with a certified coercivity
/// constant. Immutable after construction.
#[derive(Debug, Clone)]
pub struct QuadraticEnergy {
    matrix: DMatrix<f64>,
    alpha: f64,
    scope: CoercivityScope,
    lambda_min: f64,
    lambda_max: f64,
}

impl QuadraticEnergy {
    /// Validates symmetry (`‖A − Aᵀ‖ ≤ 1e-12·‖A‖`) and positive
    /// semidefiniteness (eigenvalues ≥ `−1e-10·‖A‖`), then caches the
    /// spectral bounds.
    pub fn new(matrix: DMatrix<f64>, alpha: f64, scope: CoercivityScope) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidParameter(format!(
                "energy operator must be square and nonempty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = matrix.norm().max(1e-300);
        let asym = (&matrix - matrix.transpose()).norm();
        if asym > 1e-12 * scale {
            return Err(Error::InvalidParameter(format!(
                "energy operator is not symmetric (relative asymmetry {:.3e})",
                asym / scale
            )));
        }
        let eigen = nalgebra::SymmetricEigen::new(matrix.clone());
        let lambda_min = eigen
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let lambda_max = eigen
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if lambda_min < -1e-10 * scale {
            return Err(Error::InvalidParameter(format!(
                "energy operator is not positive semidefinite (lambda_min {lambda_min:.3e})"
            )));
        }
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "coercivity constant must be > 0, got {alpha}"
            )));
        }
        Ok(QuadraticEnergy {
            matrix,
            alpha,
            scope,
            lambda_min,
            lambda_max,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scope(&self) -> CoercivityScope {
        self.scope
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// `A y`, the differential of `φ`.
    pub fn gradient(&self, y: &StateVector) -> Result<StateVector> {
        check_dim(self.dim(), y.len())?;
        Ok(&self.matrix * y)
    }

    /// `φ(y) = ½⟨Ay, y⟩`, computed through [`Self::gradient`] so the identity
    /// `φ(y) == ½⟨gradient(y), y⟩` holds to the bit.
    pub fn eval(&self, y: &StateVector) -> Result<f64> {
        Ok(0.5 * self.gradient(y)?.dot(y))
    }

    /// Sampled Rayleigh-quotient minimum `min 2φ(y)/|y|²` over the vectors a
    /// sampler yields. Near-zero samples are skipped; an empty effective
    /// sample set is an error.
    pub fn estimate_alpha(
        &self,
        n_samples: usize,
        mut sampler: impl FnMut() -> StateVector,
    ) -> Result<f64> {
        let mut best = f64::INFINITY;
        let mut used = 0usize;
        for _ in 0..n_samples {
            let y = sampler();
            let norm2 = y.norm_squared();
            if norm2 <= 1e-24 {
                continue;
            }
            let quotient = 2.0 * self.eval(&y)? / norm2;
            best = best.min(quotient);
            used += 1;
        }
        if used == 0 {
            return Err(Error::EmptySampleSet);
        }
        Ok(best)
    }

    /// Checks the declared constant against a sampled estimate
    /// (`alpha ≤ estimate + 1e-8`).
    pub fn validate_alpha(
        &self,
        n_samples: usize,
        sampler: impl FnMut() -> StateVector,
    ) -> Result<()> {
        let estimate = self.estimate_alpha(n_samples, sampler)?;
        if self.alpha > estimate + 1e-8 {
            return Err(Error::InvalidParameter(format!(
                "declared coercivity constant {} exceeds the sampled Rayleigh minimum {estimate}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// A seeded Gaussian-direction sampler over the whole space.
pub fn global_sampler(dim: usize, seed: u64) -> impl FnMut() -> StateVector {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    move || DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0))
}
