//! Linear-hardening constitutive models, load paths, and the scalar oracle.
//!
//! A material model at material-point (or small Galerkin) scale assembles to
//! the abstract problem data: state `y = (p, ξ)`, operator
//! `A = blockdiag(ℂ + 𝕙_p, 𝕙_ξ)`, dissipation `ψ` from the model kind, load
//! `ℓ`, and a certified coercivity constant:
//!
//! * kinematic (`𝕙_p` definite, no `ξ`): `A = ℂ + 𝕙_p`, globally coercive;
//! * isotropic (`𝕙_p = 0`, `𝕙_ξ = h_ξ > 0`): coercive with
//!   `α = min(λ_min(ℂ), h_ξ)`, declared on `C − C`;
//! * combined (both definite): globally coercive.
//!
//! In every case the declared `α` is the smallest eigenvalue of the assembled
//! operator, which the sampled Rayleigh validator can only confirm.

use crate::dissipation::DissipationPotential;
use crate::energy::{CoercivityScope, QuadraticEnergy};
use crate::error::{check_dim, Error, Result};
use crate::problem::{Problem, Tolerances};
use crate::{DualVector, StateVector};
use nalgebra::{DMatrix, DVector};

/// Piecewise-linear load path `ℓ : [0, T] → Y*`, stored by its knots.
///
/// Piecewise-linear paths make the Lipschitz bound `‖ℓ'‖_∞` exact (the
/// maximal segment slope) and allow exact time integrals.
#[derive(Debug, Clone)]
pub struct LoadPath {
    knots: Vec<(f64, DualVector)>,
    lipschitz: f64,
}

impl LoadPath {
    /// Knot times must start at `0`, increase strictly, and carry vectors of
    /// one common dimension.
    pub fn new(knots: Vec<(f64, DualVector)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidLoad("need at least two knots".into()));
        }
        if knots[0].0 != 0.0 {
            return Err(Error::InvalidLoad(format!(
                "first knot must sit at t = 0, got {}",
                knots[0].0
            )));
        }
        let dim = knots[0].1.len();
        let mut lipschitz = 0.0_f64;
        for w in knots.windows(2) {
            let (t0, v0) = (&w[0].0, &w[0].1);
            let (t1, v1) = (&w[1].0, &w[1].1);
            check_dim(dim, v1.len())?;
            if !(t1 > t0) {
                return Err(Error::InvalidLoad(format!(
                    "knot times must increase strictly ({t0} then {t1})"
                )));
            }
            lipschitz = lipschitz.max((v1 - v0).norm() / (t1 - t0));
        }
        if knots
            .iter()
            .any(|(t, v)| !t.is_finite() || v.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::InvalidLoad("knots must be finite".into()));
        }
        Ok(LoadPath { knots, lipschitz })
    }

    /// The constant path `t ↦ value` on `[0, horizon]`.
    pub fn constant(value: DualVector, horizon: f64) -> Result<Self> {
        LoadPath::new(vec![(0.0, value.clone()), (horizon, value)])
    }

    pub fn dim(&self) -> usize {
        self.knots[0].1.len()
    }

    pub fn horizon(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    /// Exact `max |Δℓ| / Δt` over the segments.
    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz
    }

    pub fn knots(&self) -> &[(f64, DualVector)] {
        &self.knots
    }

    /// Sup norm of the path; attained at a knot by piecewise linearity.
    pub fn sup_norm(&self) -> f64 {
        self.knots.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max)
    }

    /// Linear interpolation, clamped to the end values outside `[0, T]`.
    pub fn eval(&self, t: f64) -> DualVector {
        if t <= self.knots[0].0 {
            return self.knots[0].1.clone();
        }
        let last = self.knots.len() - 1;
        if t >= self.knots[last].0 {
            return self.knots[last].1.clone();
        }
        let hi = self.knots.partition_point(|(tk, _)| *tk <= t);
        let (t0, v0) = &self.knots[hi - 1];
        let (t1, v1) = &self.knots[hi];
        let s = (t - t0) / (t1 - t0);
        v0 * (1.0 - s) + v1 * s
    }

    /// Knot times strictly inside `(a, b)`, for exact piecewise integration.
    pub fn interior_knot_times(&self, a: f64, b: f64) -> Vec<f64> {
        self.knots
            .iter()
            .map(|(t, _)| *t)
            .filter(|t| *t > a && *t < b)
            .collect()
    }

    /// Exact `∫_a^b ℓ(t) dt` (trapezoid on each affine piece).
    pub fn integrate(&self, a: f64, b: f64) -> DualVector {
        let mut times = vec![a];
        times.extend(self.interior_knot_times(a, b));
        times.push(b);
        let mut acc = DVector::zeros(self.dim());
        for w in times.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            acc += (self.eval(lo) + self.eval(hi)) * (0.5 * (hi - lo));
        }
        acc
    }

    /// The same values on reparametrized knot times. `map` must be strictly
    /// increasing with `map(0) = 0`; the path traces the identical curve in
    /// `Y*`, only at a different pace.
    pub fn reparametrized(&self, map: impl Fn(f64) -> f64) -> Result<LoadPath> {
        LoadPath::new(
            self.knots
                .iter()
                .map(|(t, v)| (map(*t), v.clone()))
                .collect(),
        )
    }

    /// Values pushed through a linear map (subspace restriction).
    pub fn mapped_values(&self, map: impl Fn(&DualVector) -> DualVector) -> Result<LoadPath> {
        LoadPath::new(self.knots.iter().map(|(t, v)| (*t, map(v))).collect())
    }
}

/// Which linear-hardening law a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HardeningKind {
    Kinematic,
    Isotropic,
    Combined,
}

/// A linear-hardening material: elasticity `ℂ` and hardening moduli on the
/// plastic block, scalar internal-variable modulus `𝕙_ξ` (the internal
/// variable is always one-dimensional here), and yield stress `σ_y`.
#[derive(Debug, Clone)]
pub struct MaterialModel {
    pub kind: HardeningKind,
    pub elastic: DMatrix<f64>,
    pub hardening_p: DMatrix<f64>,
    pub hardening_xi: f64,
    pub sigma_y: f64,
    pub p_dim: usize,
}

impl MaterialModel {
    pub fn kinematic(elastic: DMatrix<f64>, hardening_p: DMatrix<f64>, sigma_y: f64) -> Self {
        let p_dim = elastic.nrows();
        MaterialModel {
            kind: HardeningKind::Kinematic,
            elastic,
            hardening_p,
            hardening_xi: 0.0,
            sigma_y,
            p_dim,
        }
    }

    pub fn isotropic(elastic: DMatrix<f64>, hardening_xi: f64, sigma_y: f64) -> Self {
        let p_dim = elastic.nrows();
        MaterialModel {
            kind: HardeningKind::Isotropic,
            elastic,
            hardening_p: DMatrix::zeros(p_dim, p_dim),
            hardening_xi,
            sigma_y,
            p_dim,
        }
    }

    pub fn combined(
        elastic: DMatrix<f64>,
        hardening_p: DMatrix<f64>,
        hardening_xi: f64,
        sigma_y: f64,
    ) -> Self {
        let p_dim = elastic.nrows();
        MaterialModel {
            kind: HardeningKind::Combined,
            elastic,
            hardening_p,
            hardening_xi,
            sigma_y,
            p_dim,
        }
    }

    /// Scalar kinematic model with stiffness `c + h_p` (the 1D ramp problems).
    pub fn kinematic_scalar(c: f64, h_p: f64, sigma_y: f64) -> Self {
        Self::kinematic(
            DMatrix::from_element(1, 1, c),
            DMatrix::from_element(1, 1, h_p),
            sigma_y,
        )
    }

    /// State dimension: the kinematic model evolves `p` only, the others
    /// append the scalar internal variable.
    pub fn state_dim(&self) -> usize {
        match self.kind {
            HardeningKind::Kinematic => self.p_dim,
            _ => self.p_dim + 1,
        }
    }

    /// Per-kind parameter contract.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_y > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "yield stress must be > 0, got {}",
                self.sigma_y
            )));
        }
        let pd = |m: &DMatrix<f64>, what: &str| -> Result<f64> {
            if m.nrows() != self.p_dim || m.ncols() != self.p_dim {
                return Err(Error::InvalidParameter(format!(
                    "{what} must be {0}x{0}",
                    self.p_dim
                )));
            }
            let sym = (m - m.transpose()).norm();
            if sym > 1e-12 * m.norm().max(1e-300) {
                return Err(Error::InvalidParameter(format!("{what} must be symmetric")));
            }
            let min = nalgebra::SymmetricEigen::new(m.clone())
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            Ok(min)
        };
        let elastic_min = pd(&self.elastic, "elastic tensor")?;
        if elastic_min <= 0.0 {
            return Err(Error::InvalidParameter(
                "elastic tensor must be positive definite".into(),
            ));
        }
        let hp_min = pd(&self.hardening_p, "plastic hardening modulus")?;
        match self.kind {
            HardeningKind::Kinematic => {
                if hp_min <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "kinematic hardening requires a positive definite plastic modulus".into(),
                    ));
                }
                if self.hardening_xi != 0.0 {
                    return Err(Error::InvalidParameter(
                        "kinematic hardening has no internal-variable modulus".into(),
                    ));
                }
            }
            HardeningKind::Isotropic => {
                if self.hardening_p.norm() != 0.0 {
                    return Err(Error::InvalidParameter(
                        "isotropic hardening requires a zero plastic modulus".into(),
                    ));
                }
                if !(self.hardening_xi > 0.0) {
                    return Err(Error::InvalidParameter(
                        "isotropic hardening requires h_xi > 0".into(),
                    ));
                }
            }
            HardeningKind::Combined => {
                if hp_min <= 0.0 || !(self.hardening_xi > 0.0) {
                    return Err(Error::InvalidParameter(
                        "combined hardening requires both moduli positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The assembled operator `blockdiag(ℂ + 𝕙_p, 𝕙_ξ)` (no `ξ` row for the
    /// kinematic kind).
    pub fn operator(&self) -> DMatrix<f64> {
        let p_block = &self.elastic + &self.hardening_p;
        match self.kind {
            HardeningKind::Kinematic => p_block,
            _ => {
                let n = self.p_dim + 1;
                let mut a = DMatrix::zeros(n, n);
                a.view_mut((0, 0), (self.p_dim, self.p_dim))
                    .copy_from(&p_block);
                a[(self.p_dim, self.p_dim)] = self.hardening_xi;
                a
            }
        }
    }

    /// The model's dissipation potential.
    pub fn dissipation(&self) -> Result<DissipationPotential> {
        match self.kind {
            HardeningKind::Kinematic => DissipationPotential::kinematic(self.sigma_y, self.p_dim),
            _ => DissipationPotential::isotropic(self.sigma_y, self.p_dim),
        }
    }

    fn coercivity_scope(&self) -> CoercivityScope {
        match self.kind {
            // The isotropic operator is still definite at this scale, but the
            // guarantee the certificates rely on is the one on C - C.
            HardeningKind::Isotropic => CoercivityScope::OnCMinusC,
            _ => CoercivityScope::Global,
        }
    }

    /// Assembles `(A, ψ, ℓ, y₀)` into a validated [`Problem`], with
    /// `α = λ_min(A)` certified on the declared scope.
    pub fn assemble(
        &self,
        load: LoadPath,
        y0: StateVector,
        tolerances: Tolerances,
    ) -> Result<Problem> {
        self.validate()?;
        check_dim(self.state_dim(), load.dim())?;
        check_dim(self.state_dim(), y0.len())?;
        let matrix = self.operator();
        let lambda_min = nalgebra::SymmetricEigen::new(matrix.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let energy = QuadraticEnergy::new(matrix, lambda_min, self.coercivity_scope())?;
        Problem::new(energy, self.dissipation()?, load, y0, tolerances)
    }
}

/// Exact solution of the scalar ramp problem
/// `σ ∂|·|(y') + a y ∋ rate·t`, `y(0) = 0`: the scalar play operator stays at
/// rest while the load is inside the elastic interval and then tracks the
/// yield surface, `y(t) = (rate·t − σ)/a`.
pub fn exact_ramp_response(a: f64, sigma: f64, rate: f64, t: f64) -> f64 {
    debug_assert!(a > 0.0 && sigma > 0.0 && rate >= 0.0 && t >= 0.0);
    ((rate * t - sigma).max(0.0)) / a
}
