//! Subspace restriction and nested space/time convergence experiments.
//!
//! A restriction to a subspace `Y_h = span(B)` (orthonormal columns) poses the
//! same evolution in coordinates: `A_h = BᵀAB`, `ψ_h = ψ∘B`, `ℓ_h = Bᵀℓ`,
//! `y_{0,h} = Bᵀy₀`. The identity `⟨A_h v, w⟩ = ⟨A Bv, Bw⟩` holds by
//! construction, and for the restricted potential the coercivity constant
//! survives unchanged (`|Bv| = |v|`). Solving restricted problems over a
//! strictly nested chain of subspaces, and jointly refining the partition,
//! realizes the space/time convergence diagram at finite dimension.

use crate::dissipation::DissipationPotential;
use crate::energy::{CoercivityScope, QuadraticEnergy};
use crate::error::{check_dim, Error, Result};
use crate::functional::{discrete_functional, energy_balance_residual};
use crate::problem::Problem;
use crate::solver::{check_theta, solve_theta, Partition, Trajectory};
use crate::StateVector;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// An orthonormal basis of a subspace of the ambient state space.
#[derive(Debug, Clone)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Columns must be orthonormal to `1e-12` and at most as many as rows.
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let (n, k) = (basis.nrows(), basis.ncols());
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "subspace dimension must lie in 1..={n}, got {k}"
            )));
        }
        let gram = basis.transpose() * &basis;
        let defect = (&gram - DMatrix::identity(k, k)).norm();
        if defect > 1e-12 * (k as f64).sqrt() {
            return Err(Error::InvalidParameter(format!(
                "basis columns are not orthonormal (defect {defect:.3e})"
            )));
        }
        Ok(Subspace { basis })
    }

    /// The whole space with the identity basis.
    pub fn full(n: usize) -> Subspace {
        Subspace {
            basis: DMatrix::identity(n, n),
        }
    }

    /// Span of the given coordinate axes.
    pub fn coordinate(n: usize, axes: &[usize]) -> Result<Subspace> {
        let mut basis = DMatrix::zeros(n, axes.len());
        for (j, &i) in axes.iter().enumerate() {
            if i >= n {
                return Err(Error::InvalidParameter(format!(
                    "axis {i} out of range for dim {n}"
                )));
            }
            basis[(i, j)] = 1.0;
        }
        Subspace::new(basis)
    }

    /// A strictly nested chain of the given dimensions, drawn from one seeded
    /// random orthogonal frame (level `j` spans the first `dims[j]` columns).
    pub fn nested_random_chain(n: usize, dims: &[usize], seed: u64) -> Result<Vec<Subspace>> {
        if dims.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NotNested(
                "chain dimensions must increase strictly".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let q = raw.qr().q();
        dims.iter()
            .map(|&k| Subspace::new(q.columns(0, k).into_owned()))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `B v`: coordinates to ambient.
    pub fn lift(&self, v: &StateVector) -> StateVector {
        &self.basis * v
    }

    /// `Bᵀ y`: ambient to coordinates (least-squares coefficients).
    pub fn coefficients(&self, y: &StateVector) -> StateVector {
        self.basis.transpose() * y
    }

    /// Whether this subspace contains the other's span.
    pub fn contains(&self, other: &Subspace) -> bool {
        let projected = &self.basis * (self.basis.transpose() * other.basis());
        (projected - other.basis()).norm() <= 1e-10 * (other.dim() as f64).sqrt().max(1.0)
    }
}

/// How the restricted dissipation is chosen.
pub enum PsiMode {
    /// `ψ_h = ψ ∘ B` (the conformal default).
    Restrict,
    /// A caller-supplied potential on the subspace coordinates. The
    /// restricted problem re-estimates its coercivity constant on sampled
    /// domain differences and downgrades the scope to `OnC`, refusing norm
    /// certificates, since no inherited guarantee exists.
    Custom(DissipationPotential),
}

/// Poses the problem in subspace coordinates.
pub fn restrict(problem: &Problem, subspace: &Subspace, mode: PsiMode) -> Result<Problem> {
    check_dim(problem.dim(), subspace.ambient_dim())?;
    let b = subspace.basis();
    let a_h = b.transpose() * problem.energy().matrix() * b;
    let load_h = problem.load().mapped_values(|v| b.transpose() * v)?;
    let y0_h = subspace.coefficients(problem.initial_state());

    let (dissipation_h, energy_h) = match mode {
        PsiMode::Restrict => {
            let dissipation_h = problem.dissipation().restricted(b)?;
            // coercivity transfers verbatim: |Bv| = |v| on the lifted scope
            let energy_h = QuadraticEnergy::new(a_h, problem.alpha(), problem.energy().scope())?;
            (dissipation_h, energy_h)
        }
        PsiMode::Custom(pot) => {
            check_dim(subspace.dim(), pot.dim())?;
            let mut rng = ChaCha8Rng::seed_from_u64(0x9a1e);
            let k = subspace.dim();
            // sample differences of domain-cone points through the prox map
            let mut sampler = || {
                let raw = DVector::from_fn(k, |_, _| rng.gen_range(-1.0..1.0));
                let raw2 = DVector::from_fn(k, |_, _| rng.gen_range(-1.0..1.0));
                let a = pot.prox(&raw, 1.0).expect("dimension checked");
                let b = pot.prox(&raw2, 1.0).expect("dimension checked");
                a - b
            };
            let trial = QuadraticEnergy::new(a_h.clone(), 1.0, CoercivityScope::OnC)?;
            let estimate = trial.estimate_alpha(2000, &mut sampler)?;
            if !(estimate > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "coercivity lost on the restricted cone (sampled minimum {estimate:.3e})"
                )));
            }
            let alpha_h = estimate * (1.0 - 1e-9);
            (
                pot,
                QuadraticEnergy::new(a_h, alpha_h, CoercivityScope::OnC)?,
            )
        }
    };
    Problem::new(energy_h, dissipation_h, load_h, y0_h, *problem.tolerances())
}

/// One level of the nested study.
#[derive(Debug, Clone, Serialize)]
pub struct NestedLevel {
    pub dim: usize,
    /// `max_i |B yⁱ_h − yⁱ|` against the full-space solution on the same
    /// partition.
    pub distance_to_full: f64,
    /// Discrete functional of the level's own restricted problem.
    pub functional: f64,
    /// Energy-balance residual of the level's exact solve.
    pub energy_residual: f64,
}

/// One cell of the simultaneous space/time refinement diagonal.
#[derive(Debug, Clone, Serialize)]
pub struct DiagonalCell {
    pub dim: usize,
    pub steps: usize,
    /// Uniform distance of the lifted interpolant to the fine full-space
    /// reference.
    pub error: f64,
}

/// Report of [`nested_convergence`].
#[derive(Debug, Clone, Serialize)]
pub struct NestedReport {
    pub levels: Vec<NestedLevel>,
    /// Distance of the last (full-dimensional) level to the full-space solve.
    pub final_level_distance: f64,
    pub diagonal: Vec<DiagonalCell>,
    /// Sup norm of the reference trajectory (for relative reads of the
    /// diagonal errors).
    pub reference_sup: f64,
}

impl NestedReport {
    /// The space/time refinement table as CSV (17 significant digits,
    /// round-trip exact).
    pub fn diagonal_csv(&self) -> String {
        let mut out = String::from("dim,steps,uniform_error\n");
        for cell in &self.diagonal {
            out.push_str(&format!(
                "{},{},{:.16e}\n",
                cell.dim, cell.steps, cell.error
            ));
        }
        out
    }

    /// The per-level distances to the full-space solution as CSV.
    pub fn levels_csv(&self) -> String {
        let mut out = String::from("dim,distance_to_full,functional,energy_residual\n");
        for level in &self.levels {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e}\n",
                level.dim, level.distance_to_full, level.functional, level.energy_residual
            ));
        }
        out
    }
}

/// Solves the θ-scheme on every restriction of a strictly nested chain whose
/// last level spans the full space, measuring lifted distances to the
/// full-space solution on the given partition. When `diagonal_steps` is
/// nonempty (one entry per level) it additionally builds the simultaneous
/// space/time refinement table against a fine full-space reference run.
pub fn nested_convergence(
    problem: &Problem,
    chain: &[Subspace],
    partition: &Partition,
    theta: f64,
    diagonal_steps: &[usize],
) -> Result<NestedReport> {
    check_theta(theta)?;
    if chain.is_empty() {
        return Err(Error::NotNested("empty chain".into()));
    }
    for pair in chain.windows(2) {
        if pair[0].dim() >= pair[1].dim() || !pair[1].contains(&pair[0]) {
            return Err(Error::NotNested(format!(
                "level of dim {} does not nest into the next of dim {}",
                pair[0].dim(),
                pair[1].dim()
            )));
        }
    }
    let last = &chain[chain.len() - 1];
    if last.dim() != problem.dim() {
        return Err(Error::NotNested(format!(
            "last level must span the full space (dim {}, need {})",
            last.dim(),
            problem.dim()
        )));
    }
    if !diagonal_steps.is_empty() && diagonal_steps.len() != chain.len() {
        return Err(Error::InvalidParameter(
            "need one diagonal step count per chain level".into(),
        ));
    }

    let full = solve_theta(problem, partition, theta)?;
    let mut levels = Vec::with_capacity(chain.len());
    for subspace in chain {
        let restricted = restrict(problem, subspace, PsiMode::Restrict)?;
        let traj = solve_theta(&restricted, partition, theta)?;
        let distance = (0..traj.states.len())
            .map(|i| (subspace.lift(&traj.states[i]) - &full.states[i]).norm())
            .fold(0.0, f64::max);
        let functional =
            discrete_functional(&restricted, &traj.states, partition, theta)?.total_f64();
        let energy_residual = energy_balance_residual(&restricted, &traj)?;
        levels.push(NestedLevel {
            dim: subspace.dim(),
            distance_to_full: distance,
            functional,
            energy_residual,
        });
    }
    let final_level_distance = levels[levels.len() - 1].distance_to_full;

    let mut diagonal = Vec::new();
    let mut reference_sup = full.states.iter().map(|y| y.norm()).fold(0.0, f64::max);
    if !diagonal_steps.is_empty() {
        let fine_steps = 2 * diagonal_steps.iter().cloned().max().unwrap_or(1);
        let fine_partition = Partition::uniform(problem.horizon(), fine_steps)?;
        let reference = solve_theta(problem, &fine_partition, theta)?;
        reference_sup = reference
            .states
            .iter()
            .map(|y| y.norm())
            .fold(0.0, f64::max);
        for (subspace, &steps) in chain.iter().zip(diagonal_steps) {
            let restricted = restrict(problem, subspace, PsiMode::Restrict)?;
            let cell_partition = Partition::uniform(problem.horizon(), steps)?;
            let traj = solve_theta(&restricted, &cell_partition, theta)?;
            let error = fine_partition
                .times()
                .iter()
                .map(|&t| (subspace.lift(&traj.value_at(t)) - reference.value_at(t)).norm())
                .fold(0.0, f64::max);
            diagonal.push(DiagonalCell {
                dim: subspace.dim(),
                steps,
                error,
            });
        }
    }

    Ok(NestedReport {
        levels,
        final_level_distance,
        diagonal,
        reference_sup,
    })
}

/// Lifts a restricted trajectory back to ambient coordinates.
pub fn lift_trajectory(subspace: &Subspace, trajectory: &Trajectory) -> Trajectory {
    Trajectory {
        partition: trajectory.partition.clone(),
        states: trajectory.states.iter().map(|v| subspace.lift(v)).collect(),
        diagnostics: trajectory.diagnostics.clone(),
    }
}
