//! Run configuration: a strict JSON document (unknown keys rejected) that
//! assembles to a validated [`rateq::Problem`].

use nalgebra::{DMatrix, DVector};
use rateq::solver::Partition;
use rateq::{LoadPath, MaterialModel, Problem, Tolerances};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub load: LoadConfig,
    pub partition: PartitionConfig,
    pub theta: f64,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub seed: u64,
    /// Initial state; zeros when omitted (the usual elastoplastic datum).
    #[serde(default)]
    pub initial_state: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Kinematic,
    Isotropic,
    Combined,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub p_dim: usize,
    /// Elasticity matrix on the plastic block, row-major.
    pub elastic_c: Vec<Vec<f64>>,
    /// Plastic hardening modulus; required for kinematic and combined kinds.
    #[serde(default)]
    pub hardening_hp: Option<Vec<Vec<f64>>>,
    /// Internal-variable modulus; required for isotropic and combined kinds.
    #[serde(default)]
    pub h_xi: Option<f64>,
    pub sigma_y: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    pub t_end: f64,
    pub knots: Vec<KnotConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnotConfig {
    pub t: f64,
    pub value: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub tau_feas: Option<f64>,
    pub tau_kkt: Option<f64>,
    pub tau_func: Option<f64>,
    pub max_inner_iterations: Option<usize>,
    /// Per-run inexact tolerance; when set, `solve` runs the generalized
    /// (inexact) scheme.
    pub inner_tol: Option<f64>,
}

fn matrix_from(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, String> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(format!("{what} must be a square row-major matrix"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl ModelConfig {
    pub fn build(&self) -> Result<MaterialModel, String> {
        let elastic = matrix_from(&self.elastic_c, "model.elastic_c")?;
        if elastic.nrows() != self.p_dim {
            return Err(format!(
                "model.elastic_c must be {0}x{0} to match p_dim",
                self.p_dim
            ));
        }
        let model = match self.kind {
            ModelKind::Kinematic => {
                let hp = self
                    .hardening_hp
                    .as_ref()
                    .ok_or("model.hardening_hp is required for the kinematic kind")?;
                if self.h_xi.is_some() {
                    return Err("model.h_xi must be absent for the kinematic kind".into());
                }
                MaterialModel::kinematic(
                    elastic,
                    matrix_from(hp, "model.hardening_hp")?,
                    self.sigma_y,
                )
            }
            ModelKind::Isotropic => {
                if self.hardening_hp.is_some() {
                    return Err("model.hardening_hp must be absent for the isotropic kind".into());
                }
                let h = self
                    .h_xi
                    .ok_or("model.h_xi is required for the isotropic kind")?;
                MaterialModel::isotropic(elastic, h, self.sigma_y)
            }
            ModelKind::Combined => {
                let hp = self
                    .hardening_hp
                    .as_ref()
                    .ok_or("model.hardening_hp is required for the combined kind")?;
                let h = self
                    .h_xi
                    .ok_or("model.h_xi is required for the combined kind")?;
                MaterialModel::combined(
                    elastic,
                    matrix_from(hp, "model.hardening_hp")?,
                    h,
                    self.sigma_y,
                )
            }
        };
        model.validate().map_err(|e| format!("model: {e}"))?;
        Ok(model)
    }
}

impl ToleranceConfig {
    pub fn build(&self) -> Tolerances {
        let mut t = Tolerances::default();
        if let Some(v) = self.tau_feas {
            t.tau_feas = v;
        }
        if let Some(v) = self.tau_kkt {
            t.tau_kkt = v;
        }
        if let Some(v) = self.tau_func {
            t.tau_func = v;
        }
        if let Some(v) = self.max_inner_iterations {
            t.max_inner_iterations = v;
        }
        t
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        serde_json::from_str(text).map_err(|e| format!("config: {e}"))
    }

    pub fn build_problem(&self) -> Result<Problem, String> {
        let model = self.model.build()?;
        let dim = model.state_dim();
        let mut knots = Vec::with_capacity(self.load.knots.len());
        for k in &self.load.knots {
            if k.value.len() != dim {
                return Err(format!(
                    "load.knots: value at t = {} has {} entries, the state dimension is {dim}",
                    k.t,
                    k.value.len()
                ));
            }
            knots.push((k.t, DVector::from_vec(k.value.clone())));
        }
        let load = LoadPath::new(knots).map_err(|e| format!("load: {e}"))?;
        if load.horizon() != self.load.t_end {
            return Err(format!(
                "load.t_end ({}) must equal the last knot time ({})",
                self.load.t_end,
                load.horizon()
            ));
        }
        let y0 = match &self.initial_state {
            Some(v) if v.len() != dim => {
                return Err(format!(
                    "initial_state has {} entries, the state dimension is {dim}",
                    v.len()
                ))
            }
            Some(v) => DVector::from_vec(v.clone()),
            None => DVector::zeros(dim),
        };
        rateq::solver::check_theta(self.theta).map_err(|e| format!("theta: {e}"))?;
        model
            .assemble(load, y0, self.tolerances.build())
            .map_err(|e| format!("assembly: {e}"))
    }

    pub fn build_partition(&self, horizon: f64) -> Result<Partition, String> {
        match (&self.partition.n, &self.partition.times) {
            (Some(_), Some(_)) => {
                Err("partition: give either n or explicit times, not both".into())
            }
            (Some(n), None) => {
                Partition::uniform(horizon, *n).map_err(|e| format!("partition: {e}"))
            }
            (None, Some(times)) => {
                let p =
                    Partition::from_times(times.clone()).map_err(|e| format!("partition: {e}"))?;
                if p.end() != horizon {
                    return Err(format!(
                        "partition: final time {} must equal load.t_end {}",
                        p.end(),
                        horizon
                    ));
                }
                Ok(p)
            }
            (None, None) => Err("partition: need n or explicit times".into()),
        }
    }
}
