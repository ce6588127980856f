//! The θ-scheme.
//!
//! One step from `y_prev` across `[t_prev, t_next]` solves the incremental
//! convex minimization
//!
//! ```text
//! y ∈ argmin  θ φ(y) − ⟨ℓ(t_θ) − (1−θ) A y_prev, y⟩ + ψ(y − y_prev),
//! ```
//!
//! with `t_θ = θ t_next + (1−θ) t_prev`. In the increment `z = y − y_prev`
//! this is `min_z  θ φ(z) − ⟨r, z⟩ + ψ(z)` for the trial residual
//! `r = ℓ(t_θ) − A y_prev`, which has closed-form "return map" solutions for
//! the hardening model structures and is otherwise handled by proximal
//! gradient (the prox of `tψ` is a projection by Moreau's identity).
//!
//! A computed step is accepted only with its optimality certificate: the
//! updated dual residual `ℓ(t_θ) − A y_θ` must lie in `C*` within the
//! feasibility band, and the scalar Fenchel gap of the step must sit under
//! the per-step tolerance. No time step appears in the optimality system, so
//! the scheme is rate-independent: partitions enter through load values only.

use crate::dissipation::{CharacteristicSet, DissipationPotential, DomainCone};
use crate::energy::QuadraticEnergy;
use crate::error::{check_dim, Error, Result};
use crate::extended::Extended;
use crate::problem::Problem;
use crate::{DualVector, StateVector};
use nalgebra::DVector;
use serde::Serialize;

/// Validates `θ ∈ [1/2, 1]`. Smaller values make the scheme unconditionally
/// unstable and are only reachable through [`solve_theta_unchecked`].
pub fn check_theta(theta: f64) -> Result<()> {
    if !(0.5..=1.0).contains(&theta) {
        return Err(Error::ThetaOutOfRange(theta));
    }
    Ok(())
}

/// A time partition `0 = t⁰ < t¹ < … < t^N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    times: Vec<f64>,
}

impl Partition {
    /// Strictly increasing times starting at exactly `0`.
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidPartition(
                "a partition needs at least one step".into(),
            ));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidPartition(format!(
                "partition must start at t = 0, got {}",
                times[0]
            )));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidPartition(format!(
                    "times must increase strictly ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(Partition { times })
    }

    /// `n` equal steps on `[0, horizon]`; the final time is set to `horizon`
    /// exactly.
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        if n == 0 || !(horizon > 0.0) {
            return Err(Error::InvalidPartition(format!(
                "need n >= 1 steps and a positive horizon (n = {n}, horizon = {horizon})"
            )));
        }
        let mut times: Vec<f64> = (0..=n).map(|i| horizon * (i as f64) / (n as f64)).collect();
        times[n] = horizon;
        Partition::from_times(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Length `τ^i` of step `i` (0-based: step `i` spans `[tⁱ, tⁱ⁺¹]`).
    pub fn step(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }

    /// Diameter `max_i τ^i`.
    pub fn diameter(&self) -> f64 {
        (0..self.n_steps())
            .map(|i| self.step(i))
            .fold(0.0, f64::max)
    }

    /// The θ-intermediate time `θ tⁱ⁺¹ + (1−θ) tⁱ` of step `i`.
    pub fn theta_time(&self, i: usize, theta: f64) -> f64 {
        theta * self.times[i + 1] + (1.0 - theta) * self.times[i]
    }

    /// All steps equal within rounding (the constant-step stability bound for
    /// θ strictly between ½ and 1 only applies then).
    pub fn has_constant_steps(&self) -> bool {
        let n = self.n_steps();
        let tau = self.step(0);
        (1..n).all(|i| (self.step(i) - tau).abs() <= 1e-12 * tau.max(1e-300))
    }

    /// A refinement with marked steps bisected (midpoint insertion).
    pub fn bisected(&self, marks: &[bool]) -> Result<Partition> {
        if marks.len() != self.n_steps() {
            return Err(Error::InvalidPartition(
                "need one bisection mark per step".into(),
            ));
        }
        let mut times = Vec::with_capacity(self.times.len() + marks.iter().filter(|m| **m).count());
        for (i, bisect) in marks.iter().enumerate() {
            times.push(self.times[i]);
            if *bisect {
                times.push(0.5 * (self.times[i] + self.times[i + 1]));
            }
        }
        times.push(self.end());
        Partition::from_times(times)
    }

    /// Index of the step whose half-open interval `(tⁱ, tⁱ⁺¹]` contains `t`
    /// (clamped at the ends).
    pub fn step_containing(&self, t: f64) -> usize {
        if t <= self.times[0] {
            return 0;
        }
        let n = self.n_steps();
        if t >= self.end() {
            return n - 1;
        }
        self.times
            .partition_point(|tk| *tk < t)
            .saturating_sub(1)
            .min(n - 1)
    }
}

/// Per-step solver record.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepDiagnostics {
    /// Inner iterations spent (0 for a closed-form return map).
    pub inner_iterations: usize,
    /// Final scalar optimality gap of the accepted step.
    pub residual: f64,
    /// `ψ(yⁱ − yⁱ⁻¹)`, the dissipation spent in the step.
    pub dissipation_increment: f64,
}

/// States on a partition, with the interpolant views the analysis uses.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub partition: Partition,
    pub states: Vec<StateVector>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    /// A trajectory from raw states (e.g. a parsed candidate); diagnostics
    /// are zeroed.
    pub fn from_states(partition: Partition, states: Vec<StateVector>) -> Result<Self> {
        if states.len() != partition.n_steps() + 1 {
            return Err(Error::InvalidPartition(format!(
                "need {} states for {} steps, got {}",
                partition.n_steps() + 1,
                partition.n_steps(),
                states.len()
            )));
        }
        let n = partition.n_steps();
        Ok(Trajectory {
            partition,
            states,
            diagnostics: vec![
                StepDiagnostics {
                    inner_iterations: 0,
                    residual: 0.0,
                    dissipation_increment: 0.0
                };
                n
            ],
        })
    }

    pub fn n_steps(&self) -> usize {
        self.partition.n_steps()
    }

    pub fn final_state(&self) -> &StateVector {
        &self.states[self.states.len() - 1]
    }

    /// Piecewise-linear interpolant `ŷ(t)`.
    pub fn value_at(&self, t: f64) -> StateVector {
        let i = self.partition.step_containing(t);
        let (t0, t1) = (self.partition.times()[i], self.partition.times()[i + 1]);
        let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        &self.states[i] * (1.0 - s) + &self.states[i + 1] * s
    }

    /// Backward-constant interpolant `ȳ(t)`.
    pub fn backward_value_at(&self, t: f64) -> StateVector {
        if t <= self.partition.times()[0] {
            return self.states[0].clone();
        }
        let i = self.partition.step_containing(t);
        self.states[i + 1].clone()
    }

    /// The θ-combination `θ yⁱ⁺¹ + (1−θ) yⁱ` of step `i`.
    pub fn theta_state(&self, i: usize, theta: f64) -> StateVector {
        &self.states[i + 1] * theta + &self.states[i] * (1.0 - theta)
    }

    /// Step increment `yⁱ⁺¹ − yⁱ`.
    pub fn increment(&self, i: usize) -> StateVector {
        &self.states[i + 1] - &self.states[i]
    }

    /// `max_i |yⁱ⁺¹ − yⁱ| / τⁱ`, the raw discrete velocity sup-norm.
    pub fn max_slope(&self) -> f64 {
        (0..self.n_steps())
            .map(|i| self.increment(i).norm() / self.partition.step(i))
            .fold(0.0, f64::max)
    }

    /// Velocity sup-norm of the θ-combination interpolant (the piecewise
    /// linear interpolant of the values `yⁱ_θ = θyⁱ + (1−θ)yⁱ⁻¹`, started at
    /// `y⁰`). This is the quantity the scheme's stability bound controls; for
    /// `θ = 1` it coincides with [`Self::max_slope`]. Raw increments can
    /// overshoot it transiently (the midpoint scheme oscillates around the
    /// yield crossing while its θ-combination stays bounded).
    pub fn theta_slope_max(&self, theta: f64) -> f64 {
        let n = self.n_steps();
        if n == 0 {
            return 0.0;
        }
        let mut worst = theta * self.increment(0).norm() / self.partition.step(0);
        for i in 1..n {
            let combined = self.increment(i) * theta + self.increment(i - 1) * (1.0 - theta);
            worst = worst.max(combined.norm() / self.partition.step(i));
        }
        worst
    }

    /// Uniform distance of node values against another trajectory on the
    /// same partition.
    pub fn node_distance(&self, other: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// How the incremental problem is solved for a given problem structure.
#[derive(Debug, Clone)]
pub(crate) enum StepKernel {
    /// `A = γ I`, `ψ = σ|·|`: the classical radial return.
    RadialReturn { stiffness: f64, sigma: f64 },
    /// `A = diag(c I, h)`, capped-cone dissipation: two-regime return map.
    TwoBlockReturn {
        c: f64,
        h: f64,
        sigma: f64,
        p_dim: usize,
    },
    /// Anything else: proximal gradient on the strongly convex objective.
    Proximal,
}

impl StepKernel {
    pub(crate) fn detect(energy: &QuadraticEnergy, dissipation: &DissipationPotential) -> Self {
        let a = energy.matrix();
        let n = energy.dim();
        match (dissipation.cstar(), dissipation.domain()) {
            (CharacteristicSet::NormBall { radius, dim }, DomainCone::Whole(_)) if *dim == n => {
                let gamma = a.trace() / n as f64;
                let mut dev = a.clone();
                for i in 0..n {
                    dev[(i, i)] -= gamma;
                }
                if dev.norm() <= 1e-14 * a.norm().max(1e-300) && gamma > 0.0 {
                    return StepKernel::RadialReturn {
                        stiffness: gamma,
                        sigma: *radius,
                    };
                }
                StepKernel::Proximal
            }
            (CharacteristicSet::ConeCapped { sigma_y, p_dim }, _) if p_dim + 1 == n => {
                let p_dim = *p_dim;
                let c = a[(0, 0)];
                let h = a[(p_dim, p_dim)];
                let mut dev = a.clone();
                for i in 0..p_dim {
                    dev[(i, i)] -= c;
                }
                dev[(p_dim, p_dim)] -= h;
                if dev.norm() <= 1e-14 * a.norm().max(1e-300) && c > 0.0 && h > 0.0 {
                    return StepKernel::TwoBlockReturn {
                        c,
                        h,
                        sigma: *sigma_y,
                        p_dim,
                    };
                }
                StepKernel::Proximal
            }
            _ => StepKernel::Proximal,
        }
    }
}

/// Radial return: elastic for `|r| ≤ σ`, otherwise pull back onto the yield
/// surface along the trial direction.
fn radial_return(r: &DualVector, theta: f64, gamma: f64, sigma: f64) -> StateVector {
    let rn = r.norm();
    if rn <= sigma {
        DVector::zeros(r.len())
    } else {
        r * ((rn - sigma) / (theta * gamma * rn))
    }
}

/// Two-regime return map for the capped-cone dissipation with
/// `A = diag(c I, h)`; see the KKT split in the module of the dual set.
fn two_block_return(
    r: &DualVector,
    theta: f64,
    c: f64,
    h: f64,
    sigma: f64,
    p_dim: usize,
) -> StateVector {
    let rp = r.rows(0, p_dim).into_owned();
    let rxi = r[p_dim];
    let rp_norm = rp.norm();
    let mut z = DVector::zeros(p_dim + 1);
    if rp_norm + rxi <= sigma {
        return z; // elastic
    }
    if c * (rxi - sigma) >= h * rp_norm {
        // cone constraint inactive: blocks decouple
        z.rows_mut(0, p_dim).copy_from(&(&rp / (theta * c)));
        z[p_dim] = (rxi - sigma) / (theta * h);
    } else {
        // active regime: |ṗ| = ξ̇ = m along the trial direction
        let m = (rp_norm + rxi - sigma) / (theta * (c + h));
        z.rows_mut(0, p_dim).copy_from(&(&rp * (m / rp_norm)));
        z[p_dim] = m;
    }
    z
}

/// Scalar optimality gap of an increment `z` against the dual point
/// `ξ = r − θAz`, paired at the projection of `ξ` onto `C*` so the value is a
/// true (nonnegative) Fenchel gap even inside the feasibility band.
fn step_gap(
    dissipation: &DissipationPotential,
    z: &StateVector,
    xi: &DualVector,
) -> Result<(f64, f64)> {
    let distance = dissipation.dist_to_cstar(xi)?;
    let psi = match dissipation.eval(z)? {
        Extended::Finite(v) => v,
        Extended::Infinite => return Ok((f64::INFINITY, distance)),
    };
    let paired = dissipation.project_cstar(xi)?.dot(z);
    Ok((psi - paired, distance))
}

/// Proximal gradient on `z ↦ θφ(z) − ⟨r, z⟩ + ψ(z)` with fixed step
/// `1/(θ λ_max(A))`, stopping on the optimality certificate.
fn proximal_increment(
    problem: &Problem,
    r: &DualVector,
    theta: f64,
    gap_tol: f64,
    start: Option<StateVector>,
) -> Result<(StateVector, usize, f64)> {
    let energy = problem.energy();
    let dissipation = problem.dissipation();
    let lambda = theta * energy.lambda_max();
    if !(lambda > 0.0) {
        return Err(Error::NonConvergence {
            iterations: 0,
            residual: f64::INFINITY,
        });
    }
    let step = 1.0 / lambda;
    let scaled = dissipation.cstar().scaled(step);

    let mut z = start.unwrap_or_else(|| DVector::zeros(r.len()));
    let max_iter = problem.tolerances().max_inner_iterations;
    let mut last_gap = f64::INFINITY;
    for iter in 0..=max_iter {
        let a_z = energy.gradient(&z)?;
        let xi = r - &a_z * theta;
        let (gap, distance) = step_gap(dissipation, &z, &xi)?;
        last_gap = gap;
        if distance <= problem.tolerances().feas_band(xi.norm()) && gap <= gap_tol {
            return Ok((z, iter, gap));
        }
        let w = &z + (&xi) * step; // z − step · (θAz − r)
        z = &w - scaled.project(&w);
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: last_gap,
    })
}

/// A single incremental solve. `y_prev` must lie in the dissipation domain
/// cone. The returned state carries its optimality certificate in the
/// diagnostics (final gap as `residual`).
pub fn incremental_step(
    problem: &Problem,
    y_prev: &StateVector,
    t_theta: f64,
    theta: f64,
) -> Result<(StateVector, StepDiagnostics)> {
    check_theta(theta)?;
    let load_scale = problem.load().eval(t_theta).norm();
    step_with_gap_tol(
        problem,
        y_prev,
        t_theta,
        theta,
        problem.tolerances().kkt_band(load_scale),
        false,
    )
}

fn step_with_gap_tol(
    problem: &Problem,
    y_prev: &StateVector,
    t_theta: f64,
    theta: f64,
    gap_tol: f64,
    force_proximal: bool,
) -> Result<(StateVector, StepDiagnostics)> {
    check_dim(problem.dim(), y_prev.len())?;
    if !problem.dissipation().in_domain(y_prev) {
        return Err(Error::OutsideDomainCone);
    }
    let r = problem.dual_residual(t_theta, y_prev)?;

    let (z, iterations) = if force_proximal {
        let (z, it, _) = proximal_increment(problem, &r, theta, gap_tol, None)?;
        (z, it)
    } else {
        match problem.kernel() {
            StepKernel::RadialReturn { stiffness, sigma } => {
                (radial_return(&r, theta, *stiffness, *sigma), 0)
            }
            StepKernel::TwoBlockReturn { c, h, sigma, p_dim } => {
                (two_block_return(&r, theta, *c, *h, *sigma, *p_dim), 0)
            }
            StepKernel::Proximal => {
                let (z, it, _) = proximal_increment(problem, &r, theta, gap_tol, None)?;
                (z, it)
            }
        }
    };

    let xi = &r - problem.energy().gradient(&z)? * theta;
    let (gap, distance) = step_gap(problem.dissipation(), &z, &xi)?;
    debug_assert!(
        distance <= problem.tolerances().feas_band(xi.norm()) * 2.0,
        "accepted step violates dual feasibility: {distance:e}"
    );
    let dissipation_increment = problem
        .dissipation()
        .eval(&z)?
        .expect_finite("increment produced by a return map stays in the domain cone");
    Ok((
        &z + y_prev,
        StepDiagnostics {
            inner_iterations: iterations,
            residual: gap,
            dissipation_increment,
        },
    ))
}

fn run_scheme(
    problem: &Problem,
    partition: &Partition,
    theta: f64,
    per_step_gap: impl Fn(usize, f64) -> f64,
    force_proximal: bool,
) -> Result<Trajectory> {
    if partition.end() != problem.horizon() {
        return Err(Error::InvalidPartition(format!(
            "partition ends at {} but the load horizon is {}",
            partition.end(),
            problem.horizon()
        )));
    }
    let n = partition.n_steps();
    let mut states = Vec::with_capacity(n + 1);
    let mut diagnostics = Vec::with_capacity(n);
    states.push(problem.initial_state().clone());
    for i in 0..n {
        let t_theta = partition.theta_time(i, theta);
        let load_scale = problem.load().eval(t_theta).norm();
        let (y, diag) = step_with_gap_tol(
            problem,
            &states[i],
            t_theta,
            theta,
            per_step_gap(n, load_scale),
            force_proximal,
        )?;
        states.push(y);
        diagnostics.push(diag);
    }
    Ok(Trajectory {
        partition: partition.clone(),
        states,
        diagnostics,
    })
}

/// Runs the θ-scheme over the partition. The per-step optimality tolerance is
/// tightened by the step count so that the summed residuals stay below the
/// functional-level band.
pub fn solve_theta(problem: &Problem, partition: &Partition, theta: f64) -> Result<Trajectory> {
    check_theta(theta)?;
    solve_theta_inner(problem, partition, theta)
}

/// The θ-scheme without the `θ ∈ [1/2, 1]` guard. Exists to reproduce the
/// instability of smaller θ in studies; never use it for certified runs.
pub fn solve_theta_unchecked(
    problem: &Problem,
    partition: &Partition,
    theta: f64,
) -> Result<Trajectory> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::ThetaOutOfRange(theta));
    }
    solve_theta_inner(problem, partition, theta)
}

fn solve_theta_inner(problem: &Problem, partition: &Partition, theta: f64) -> Result<Trajectory> {
    let sup = problem.load().sup_norm();
    let tol = *problem.tolerances();
    run_scheme(
        problem,
        partition,
        theta,
        move |n, load_scale| {
            let summed_budget = 0.5 * tol.func_band(sup) / n as f64;
            tol.kkt_band(load_scale).min(summed_budget)
        },
        false,
    )
}

/// The generalized (inexact) θ-method: every step is solved by the proximal
/// iteration and stopped as soon as its functional contribution drops below
/// `inner_tol / N`, so the whole vector satisfies `F_n^θ ≤ inner_tol` while
/// remaining dual-feasible within the band.
pub fn solve_theta_inexact(
    problem: &Problem,
    partition: &Partition,
    theta: f64,
    inner_tol: f64,
) -> Result<Trajectory> {
    check_theta(theta)?;
    if !(inner_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "inner tolerance must be > 0, got {inner_tol}"
        )));
    }
    run_scheme(
        problem,
        partition,
        theta,
        move |n, _| inner_tol / n as f64,
        true,
    )
}
