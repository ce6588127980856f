//! Bit-stable emission: CSV with 17 significant digits and JSON that never
//! carries a NaN (infinities serialize as the string "inf").

use nalgebra::DVector;
use rateq::solver::{Partition, Trajectory};
use rateq::{Extended, Problem};
use serde::Serialize;
use std::fmt::Write as _;

/// 17 significant digits: exact round-trip for 64-bit floats. NaN is a bug
/// upstream and is refused loudly rather than serialized.
pub fn fmt_f64(x: f64) -> String {
    assert!(!x.is_nan(), "attempted to serialize a NaN");
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.16e}")
}

/// Trajectory CSV: one row per node with the per-step diagnostics of the step
/// ending at that node (zeros on the initial row).
///
/// Columns: `i, t, y0..y{d-1}, step_norm, dissipation_increment,
/// step_functional, dual_distance` where `step_functional` is the step's
/// contribution to the discrete functional and `dual_distance` the distance
/// of the θ-point dual residual to the admissible set.
pub fn trajectory_csv(
    problem: &Problem,
    trajectory: &Trajectory,
    theta: f64,
) -> Result<String, String> {
    let dim = problem.dim();
    let report = rateq::functional::discrete_functional(
        problem,
        &trajectory.states,
        &trajectory.partition,
        theta,
    )
    .map_err(|e| e.to_string())?;
    let mut out = String::new();
    let mut header = String::from("i,t");
    for j in 0..dim {
        let _ = write!(header, ",y{j}");
    }
    header.push_str(",step_norm,dissipation_increment,step_functional,dual_distance");
    out.push_str(&header);
    out.push('\n');
    for (i, t) in trajectory.partition.times().iter().enumerate() {
        let y = &trajectory.states[i];
        let (step_norm, dissipation, functional, distance) = if i == 0 {
            (0.0, 0.0, 0.0, 0.0)
        } else {
            let k = i - 1;
            let y_theta = trajectory.theta_state(k, theta);
            let t_theta = trajectory.partition.theta_time(k, theta);
            let xi = problem
                .dual_residual(t_theta, &y_theta)
                .map_err(|e| e.to_string())?;
            let dist = problem
                .dissipation()
                .dist_to_cstar(&xi)
                .map_err(|e| e.to_string())?;
            (
                trajectory.increment(k).norm(),
                trajectory
                    .diagnostics
                    .get(k)
                    .map(|d| d.dissipation_increment)
                    .unwrap_or(0.0),
                report.per_interval[k],
                dist,
            )
        };
        let mut row = format!("{i},{}", fmt_f64(*t));
        for j in 0..dim {
            let _ = write!(row, ",{}", fmt_f64(y[j]));
        }
        let _ = write!(
            row,
            ",{},{},{},{}",
            fmt_f64(step_norm),
            fmt_f64(dissipation),
            fmt_f64(functional),
            fmt_f64(distance)
        );
        out.push_str(&row);
        out.push('\n');
    }
    Ok(out)
}

/// Parses the node times and state columns back out of a trajectory CSV
/// (extra diagnostic columns are ignored).
pub fn parse_trajectory_csv(
    text: &str,
    dim: usize,
) -> Result<(Partition, Vec<DVector<f64>>), String> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 + dim {
            return Err(format!(
                "candidate row {lineno}: need at least {} columns, got {}",
                2 + dim,
                fields.len()
            ));
        }
        let t: f64 = fields[1]
            .parse()
            .map_err(|_| format!("candidate row {lineno}: bad time '{}'", fields[1]))?;
        let mut y = DVector::zeros(dim);
        for j in 0..dim {
            y[j] = fields[2 + j]
                .parse()
                .map_err(|_| format!("candidate row {lineno}: bad value '{}'", fields[2 + j]))?;
        }
        times.push(t);
        states.push(y);
    }
    let partition = Partition::from_times(times).map_err(|e| format!("candidate: {e}"))?;
    Ok((partition, states))
}

#[derive(Serialize)]
pub struct LipschitzJson {
    pub max_slope: f64,
    pub raw_max_slope: f64,
    pub load_lipschitz: f64,
    pub bound: Option<f64>,
    pub margin: Option<f64>,
}

#[derive(Serialize)]
pub struct SolveSummary {
    pub theta: f64,
    pub n_steps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub inner_tol: Option<f64>,
    pub functional_total: Extended,
    pub initial_penalty: f64,
    pub dissipation_total: Extended,
    pub energy_residual: Extended,
    pub lipschitz: LipschitzJson,
    pub final_state: Vec<f64>,
}

#[derive(Serialize)]
pub struct AdaptSummary {
    pub converged: bool,
    pub rounds: usize,
    pub n_steps: usize,
    pub tol: f64,
    pub budget_divisor: f64,
    pub certificate: rateq::certify::Certificate,
}

#[derive(Serialize)]
pub struct ConvergeSummary {
    pub theta: f64,
    pub slope: Option<f64>,
    pub step_counts: Vec<usize>,
    pub uniform_errors: Vec<Extended>,
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize infallibly");
    s.push('\n');
    s
}
