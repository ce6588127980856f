//! The trajectory functionals that characterize solutions.
//!
//! With the Lagrangian
//!
//! ```text
//! L(t, y, v) = ψ(v) + ψ*(ℓ(t) − Ay) − ⟨ℓ(t) − Ay, v⟩  ≥ 0  (Fenchel),
//! ```
//!
//! the path functional `F(y) = ∫₀ᵀ L(t, y, y') dt + χ(y(0) − y₀)` with
//! `χ = φ + |·|²` is nonnegative, convex, and vanishes exactly on solutions.
//! Its discrete counterpart on a vector of node states is
//!
//! ```text
//! Fᶿ(y⁰..y^N) = Σᵢ [ ψ(yⁱ−yⁱ⁻¹) + ψ*(ξⁱ) − ⟨ξⁱ, yⁱ−yⁱ⁻¹⟩ ] + χ(y⁰ − y₀),
//! ξⁱ = ℓ(tⁱ_θ) − A yⁱ_θ,
//! ```
//!
//! which is independent of the step sizes (1-homogeneity) and vanishes
//! exactly on θ-scheme solutions. Its value on any candidate bounds the
//! squared uniform distance to the exact discrete solution, which is what the
//! certificates in [`crate::certify`] package.
//!
//! Floating-point conventions: `ψ*` is the indicator of `C*` decided against
//! the feasibility band, and the duality pairing is taken at the projection
//! of `ξ` onto `C*`, so every per-interval term is a true Fenchel gap and
//! stays nonnegative even for band-feasible data.

use crate::error::{check_dim, Error, Result};
use crate::extended::Extended;
use crate::problem::Problem;
use crate::solver::{Partition, Trajectory};
use crate::StateVector;
use serde::Serialize;

/// How the dual-feasibility term of the continuous functional is evaluated on
/// a piecewise-linear trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quadrature {
    /// One-point quadrature of `L` at the θ-intermediate time of every
    /// interval. This makes the continuous evaluation coincide with the
    /// discrete functional by construction and is the contractual default.
    ThetaPoint(f64),
    /// Exact piecewise integration of the finite terms, with dual feasibility
    /// decided at the affine breakpoints of the dual path (exact by
    /// convexity) and the given number of interior samples reported as
    /// diagnostics.
    Sampled(usize),
}

/// Decomposed functional value.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionalReport {
    /// Total value; `+∞` when any interval is infeasible beyond the band.
    pub total: Extended,
    /// Per-interval finite parts (an `f64::INFINITY` entry marks a primal
    /// increment outside the domain cone). Reported even when the total is
    /// infinite, for adaptivity.
    pub per_interval: Vec<f64>,
    /// `χ(y⁰ − y₀) = φ(y⁰ − y₀) + |y⁰ − y₀|²`.
    pub initial_penalty: f64,
    /// `Σ ψ(yⁱ − yⁱ⁻¹)`, the total dissipation along the path.
    pub dissipation_total: f64,
    /// `(interval, distance)` for every interval whose dual point leaves `C*`
    /// beyond the feasibility band.
    pub feasibility_violations: Vec<(usize, f64)>,
}

impl FunctionalReport {
    /// The total collapsed to a float (`+∞` possible), for reporting.
    pub fn total_f64(&self) -> f64 {
        self.total.to_f64()
    }

    pub fn is_feasible(&self) -> bool {
        self.total.is_finite()
    }
}

/// `χ(e) = φ(e) + |e|²`; zero exactly at `e = 0`.
pub fn initial_penalty(problem: &Problem, deviation: &StateVector) -> Result<f64> {
    Ok(problem.energy().eval(deviation)? + deviation.norm_squared())
}

/// The pointwise Lagrangian `L(t, y, v)`; nonnegative, zero exactly when
/// `ℓ(t) − Ay ∈ ∂ψ(v)`.
pub fn lagrangian(
    problem: &Problem,
    t: f64,
    y: &StateVector,
    rate: &StateVector,
) -> Result<Extended> {
    check_dim(problem.dim(), y.len())?;
    check_dim(problem.dim(), rate.len())?;
    let xi = problem.dual_residual(t, y)?;
    let dist = problem.dissipation().dist_to_cstar(&xi)?;
    if dist > problem.tolerances().feas_band(xi.norm()) {
        return Ok(Extended::Infinite);
    }
    let psi = match problem.dissipation().eval(rate)? {
        Extended::Finite(v) => v,
        Extended::Infinite => return Ok(Extended::Infinite),
    };
    let paired = problem.dissipation().project_cstar(&xi)?.dot(rate);
    Ok(Extended::Finite(psi - paired))
}

/// Whether `y` is stable at time `t` (`ℓ(t) − Ay ∈ C*` within the band),
/// together with the distance itself.
pub fn stability(problem: &Problem, t: f64, y: &StateVector) -> Result<(bool, f64)> {
    check_dim(problem.dim(), y.len())?;
    let xi = problem.dual_residual(t, y)?;
    let dist = problem.dissipation().dist_to_cstar(&xi)?;
    Ok((dist <= problem.tolerances().feas_band(xi.norm()), dist))
}

/// The discrete functional `Fᶿ` on a vector of node states.
pub fn discrete_functional(
    problem: &Problem,
    states: &[StateVector],
    partition: &Partition,
    theta: f64,
) -> Result<FunctionalReport> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::ThetaOutOfRange(theta));
    }
    let n = partition.n_steps();
    if states.len() != n + 1 {
        return Err(Error::InvalidPartition(format!(
            "need {} states for {n} steps, got {}",
            n + 1,
            states.len()
        )));
    }
    for y in states {
        check_dim(problem.dim(), y.len())?;
    }
    let dissipation = problem.dissipation();
    let mut per_interval = Vec::with_capacity(n);
    let mut violations = Vec::new();
    let mut dissipation_total = 0.0_f64;
    let mut finite = true;
    for i in 0..n {
        let d = &states[i + 1] - &states[i];
        let y_theta = &states[i + 1] * theta + &states[i] * (1.0 - theta);
        let t_theta = partition.theta_time(i, theta);
        let xi = problem.dual_residual(t_theta, &y_theta)?;
        let dist = dissipation.dist_to_cstar(&xi)?;
        if dist > problem.tolerances().feas_band(xi.norm()) {
            violations.push((i, dist));
            finite = false;
        }
        let term = match dissipation.eval(&d)? {
            Extended::Finite(psi) => {
                dissipation_total += psi;
                psi - dissipation.project_cstar(&xi)?.dot(&d)
            }
            Extended::Infinite => {
                finite = false;
                dissipation_total = f64::INFINITY;
                f64::INFINITY
            }
        };
        per_interval.push(term);
    }
    let initial = initial_penalty(problem, &(&states[0] - problem.initial_state()))?;
    let total = if finite {
        Extended::Finite(per_interval.iter().sum::<f64>() + initial)
    } else {
        Extended::Infinite
    };
    Ok(FunctionalReport {
        total,
        per_interval,
        initial_penalty: initial,
        dissipation_total,
        feasibility_violations: violations,
    })
}

/// The continuous functional `F` on a piecewise-linear trajectory.
///
/// `ThetaPoint(θ)` evaluates each interval by one-point quadrature of `L` at
/// the θ-intermediate time, which reproduces [`discrete_functional`] exactly.
/// `Sampled(k)` integrates the finite terms exactly (the dual path is
/// piecewise affine, so trapezoids on the breakpoints are exact and
/// feasibility at the breakpoints decides feasibility everywhere by
/// convexity) and additionally reports the worst dual distance seen at `k`
/// interior sample points per interval.
pub fn trajectory_functional(
    problem: &Problem,
    trajectory: &Trajectory,
    quadrature: Quadrature,
) -> Result<FunctionalReport> {
    match quadrature {
        Quadrature::ThetaPoint(theta) => {
            discrete_functional(problem, &trajectory.states, &trajectory.partition, theta)
        }
        Quadrature::Sampled(k) => sampled_functional(problem, trajectory, k),
    }
}

/// Per-interval exact value of `∫ L(t, ŷ, ŷ') dt` together with the worst
/// dual-feasibility violation seen; shared by the sampled functional and the
/// adaptive refinement driver.
pub(crate) fn interval_lagrangian_integral(
    problem: &Problem,
    trajectory: &Trajectory,
    interval: usize,
    extra_samples: usize,
) -> Result<(f64, f64)> {
    let partition = &trajectory.partition;
    let (a, b) = (partition.times()[interval], partition.times()[interval + 1]);
    let tau = b - a;
    let d = trajectory.increment(interval);
    let dissipation = problem.dissipation();

    let mut breakpoints = vec![a];
    breakpoints.extend(problem.load().interior_knot_times(a, b));
    breakpoints.push(b);

    // worst dual distance beyond the band, over breakpoints plus the
    // requested interior samples
    let mut worst = 0.0_f64;
    {
        let mut check = |t: f64| -> Result<()> {
            let xi = problem.dual_residual(t, &trajectory.value_at(t))?;
            let dist = dissipation.dist_to_cstar(&xi)?;
            if dist > problem.tolerances().feas_band(xi.norm()) {
                worst = worst.max(dist);
            }
            Ok(())
        };
        for &t in &breakpoints {
            check(t)?;
        }
        for j in 0..extra_samples {
            check(a + tau * (j as f64 + 1.0) / (extra_samples as f64 + 1.0))?;
        }
    }

    let psi = match dissipation.eval(&d)? {
        Extended::Finite(v) => v,
        Extended::Infinite => return Ok((f64::INFINITY, worst)),
    };
    // exact trapezoid of ⟨ξ(t), ŷ'⟩ on each affine piece, paired at the
    // projected dual so the Fenchel sign survives the band
    let slope = &d / tau;
    let mut paired = 0.0_f64;
    for w in breakpoints.windows(2) {
        let xi_a =
            dissipation.project_cstar(&problem.dual_residual(w[0], &trajectory.value_at(w[0]))?)?;
        let xi_b =
            dissipation.project_cstar(&problem.dual_residual(w[1], &trajectory.value_at(w[1]))?)?;
        paired += 0.5 * (w[1] - w[0]) * (xi_a.dot(&slope) + xi_b.dot(&slope));
    }
    Ok((psi - paired, worst))
}

fn sampled_functional(
    problem: &Problem,
    trajectory: &Trajectory,
    samples: usize,
) -> Result<FunctionalReport> {
    let n = trajectory.n_steps();
    let mut per_interval = Vec::with_capacity(n);
    let mut violations = Vec::new();
    let mut dissipation_total = 0.0_f64;
    let mut finite = true;
    for i in 0..n {
        let (term, worst) = interval_lagrangian_integral(problem, trajectory, i, samples)?;
        if worst > 0.0 {
            violations.push((i, worst));
            finite = false;
        }
        if term.is_infinite() {
            finite = false;
            dissipation_total = f64::INFINITY;
        } else {
            dissipation_total += problem
                .dissipation()
                .eval(&trajectory.increment(i))?
                .expect_finite("finite interval term implies a domain-cone increment");
        }
        per_interval.push(term);
    }
    let initial = initial_penalty(problem, &(&trajectory.states[0] - problem.initial_state()))?;
    let total = if finite {
        Extended::Finite(per_interval.iter().sum::<f64>() + initial)
    } else {
        Extended::Infinite
    };
    Ok(FunctionalReport {
        total,
        per_interval,
        initial_penalty: initial,
        dissipation_total,
        feasibility_violations: violations,
    })
}

/// Signed defect of the energy balance at the final time,
///
/// ```text
/// [φ(y(T)) − ⟨ℓ(T), y(T)⟩ + ∫₀ᵀ ψ(ŷ')] − [φ(y(0)) − ⟨ℓ(0), y(0)⟩ − ∫₀ᵀ ⟨ℓ', ŷ⟩],
/// ```
///
/// with both integrals exact for piecewise-linear data. Solutions balance to
/// zero; merely stable trajectories overshoot (nonnegative residual).
pub fn energy_balance_residual(problem: &Problem, trajectory: &Trajectory) -> Result<f64> {
    let states = &trajectory.states;
    let partition = &trajectory.partition;
    let n = partition.n_steps();
    let horizon = partition.end();

    let mut dissipated = 0.0_f64;
    for i in 0..n {
        match problem.dissipation().eval(&trajectory.increment(i))? {
            Extended::Finite(v) => dissipated += v,
            Extended::Infinite => return Ok(f64::INFINITY),
        }
    }

    // ∫ ⟨ℓ', ŷ⟩ split at the union of partition times and load knots
    let mut cuts: Vec<f64> = partition.times().to_vec();
    cuts.extend(problem.load().interior_knot_times(0.0, horizon));
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("times are finite"));
    cuts.dedup();
    let mut work = 0.0_f64;
    for w in cuts.windows(2) {
        let dl = problem.load().eval(w[1]) - problem.load().eval(w[0]);
        let mid = (trajectory.value_at(w[0]) + trajectory.value_at(w[1])) * 0.5;
        work += dl.dot(&mid);
    }

    let y_end = &states[n];
    let y_start = &states[0];
    let lhs = problem.energy().eval(y_end)? - problem.load().eval(horizon).dot(y_end) + dissipated;
    let rhs = problem.energy().eval(y_start)? - problem.load().eval(0.0).dot(y_start) - work;
    Ok(lhs - rhs)
}
