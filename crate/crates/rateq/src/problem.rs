//! The assembled evolution problem and the tolerance policy.

use crate::dissipation::DissipationPotential;
use crate::energy::QuadraticEnergy;
use crate::error::{check_dim, Error, Result};
use crate::materials::LoadPath;
use crate::solver::StepKernel;
use crate::{DualVector, StateVector};
use serde::{Deserialize, Serialize};

/// Scale-aware tolerance factors. A band of `factor · (1 + scale)` is applied
/// wherever a float has to stand in for an exact zero.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Feasibility band factor for deciding `q ∈ C*` (i.e. `ψ*(q) = 0`).
    pub tau_feas: f64,
    /// Per-step optimality band factor for the incremental solves.
    pub tau_kkt: f64,
    /// Functional-level zero band factor (`F`, `F_n^θ`, energy balance).
    pub tau_func: f64,
    /// Iteration cap for the proximal-gradient fallback.
    pub max_inner_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tau_feas: 1e-9,
            tau_kkt: 1e-10,
            tau_func: 1e-9,
            max_inner_iterations: 100_000,
        }
    }
}

impl Tolerances {
    pub fn feas_band(&self, scale: f64) -> f64 {
        self.tau_feas * (1.0 + scale)
    }

    pub fn kkt_band(&self, scale: f64) -> f64 {
        self.tau_kkt * (1.0 + scale)
    }

    pub fn func_band(&self, scale: f64) -> f64 {
        self.tau_func * (1.0 + scale)
    }
}

/// An evolution problem `∂ψ(y') + Ay ∋ ℓ`, `y(0) = y₀`, on `[0, T]`.
///
/// Construction validates the data contract: matching dimensions, `y₀` in the
/// dissipation domain cone, and stability of `y₀` at `t = 0` (the load
/// residual `ℓ(0) − A y₀` must lie in `C*`). Immutable afterwards; all solver
/// and functional routines take `&Problem` and are pure.
#[derive(Debug, Clone)]
pub struct Problem {
    energy: QuadraticEnergy,
    dissipation: DissipationPotential,
    load: LoadPath,
    y0: StateVector,
    tolerances: Tolerances,
    kernel: StepKernel,
}

impl Problem {
    pub fn new(
        energy: QuadraticEnergy,
        dissipation: DissipationPotential,
        load: LoadPath,
        y0: StateVector,
        tolerances: Tolerances,
    ) -> Result<Self> {
        let dim = energy.dim();
        check_dim(dim, dissipation.dim())?;
        check_dim(dim, load.dim())?;
        check_dim(dim, y0.len())?;
        if !dissipation.in_domain(&y0) {
            return Err(Error::OutsideDomainCone);
        }
        let residual0 = load.eval(0.0) - energy.gradient(&y0)?;
        let distance = dissipation.dist_to_cstar(&residual0)?;
        if distance > tolerances.feas_band(residual0.norm()) {
            return Err(Error::UnstableInitialState { distance });
        }
        let kernel = StepKernel::detect(&energy, &dissipation);
        Ok(Problem {
            energy,
            dissipation,
            load,
            y0,
            tolerances,
            kernel,
        })
    }

    pub fn dim(&self) -> usize {
        self.energy.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.load.horizon()
    }

    pub fn energy(&self) -> &QuadraticEnergy {
        &self.energy
    }

    pub fn dissipation(&self) -> &DissipationPotential {
        &self.dissipation
    }

    pub fn load(&self) -> &LoadPath {
        &self.load
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.y0
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tolerances
    }

    pub fn alpha(&self) -> f64 {
        self.energy.alpha()
    }

    pub(crate) fn kernel(&self) -> &StepKernel {
        &self.kernel
    }

    /// The dual residual `ℓ(t) − A y`; stability of `y` at time `t` means this
    /// lies in `C*`.
    pub fn dual_residual(&self, t: f64, y: &StateVector) -> Result<DualVector> {
        Ok(self.load.eval(t) - self.energy.gradient(y)?)
    }

    /// Same problem with a different tolerance policy (used by the CLI).
    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Self {
        self.tolerances = tolerances;
        self
    }
}
