use serde::{Deserialize, Serialize};

use super::{run_case, CaseResult, CaseSpec, ProblemSpec, RELIABILITY_SLACK};
use crate::error::{config, Result};
use crate::operator::SpdOperator;
use crate::problems::{SampleRule, SineSeriesSolution};
use crate::residual::DEFAULT_QUAD_POINTS;
use crate::scheme::{Formulation, ZeroSource};

fn default_problem() -> ProblemSpec {
    ProblemSpec::Preset { preset: 1 }
}
fn default_unstable() -> f64 {
    2.2
}
fn default_control() -> f64 {
    1.5
}
fn default_q1() -> f64 {
    0.5
}
fn default_steps() -> usize {
    24
}
fn default_quad_points() -> usize {
    DEFAULT_QUAD_POINTS
}
fn default_true() -> bool {
    true
}

/// Leap-frog beyond its stability limit, a stable leap-frog control and an
/// unconditionally stable cosine run, all on the solution's own modes with a
/// fixed number of steps (`T = steps * k`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CflConfig {
    pub name: String,
    #[serde(default = "default_problem")]
    pub problem: ProblemSpec,
    /// `k sqrt(lambda_max)` of the unstable run; must exceed 2.
    #[serde(default = "default_unstable")]
    pub k_sqrt_lambda: f64,
    #[serde(default = "default_control")]
    pub control_k_sqrt_lambda: f64,
    /// `q1` of the cosine run at the unstable step.
    #[serde(default = "default_q1")]
    pub cosine_q1: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_quad_points")]
    pub quad_points: usize,
    #[serde(default)]
    pub samples: SampleRule,
    #[serde(default = "default_true")]
    pub record_wall_time: bool,
}

impl CflConfig {
    pub fn preset1(name: &str) -> Self {
        serde_json::from_value(serde_json::json!({ "name": name })).expect("defaults are valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config(format!("invalid CFL config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(config(format!("scenario name {:?} is not a valid file stem", self.name)));
        }
        if !(self.k_sqrt_lambda.is_finite() && self.k_sqrt_lambda > 2.0) {
            return Err(config(format!(
                "the scenario needs k sqrt(lambda_max) > 2, got {}",
                self.k_sqrt_lambda
            )));
        }
        if !(self.control_k_sqrt_lambda > 0.0 && self.control_k_sqrt_lambda < 2.0) {
            return Err(config(format!(
                "the control run needs 0 < k sqrt(lambda_max) < 2, got {}",
                self.control_k_sqrt_lambda
            )));
        }
        if !(self.cosine_q1.is_finite() && self.cosine_q1 >= 0.25) {
            return Err(config(format!("the cosine run needs q1 >= 1/4, got {}", self.cosine_q1)));
        }
        if self.steps < 4 {
            return Err(config("the scenario needs at least 4 steps"));
        }
        if self.quad_points == 0 {
            return Err(config("quad_points must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CflVerdict {
    /// Final `sup e_L` over the initial energy norm.
    pub error_growth: f64,
    /// Final `eta_1` over the initial energy norm.
    pub estimator_growth: f64,
    pub grows_thousandfold: bool,
    /// `eta_1(t^m) >= sup_{[0, t^m]} e_R` at every node.
    pub bounds_e_r_at_every_node: bool,
    /// `eta_1(t^m) >= sup_{[0, t^m]} e_L` at every node.
    pub bounds_e_l_at_every_node: bool,
    /// First node of the unstable phase: where `e_L` first exceeds ten times
    /// the initial energy norm.
    pub unstable_phase_start: Option<f64>,
    pub iei_median: f64,
    pub iei_min: f64,
    pub iei_max: f64,
    /// Instantaneous `e_L / eta_1` stays within a factor 10 of its median
    /// over the unstable phase.
    pub iei_within_decade: bool,
    /// The control run is stable and its error stays below ten times the
    /// initial energy norm.
    pub control_bounded: bool,
    pub control_reliable: bool,
    pub cosine_bounded: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CflReport {
    pub config: CflConfig,
    pub unstable: CaseResult,
    pub control: CaseResult,
    pub cosine: CaseResult,
    pub verdict: CflVerdict,
}

fn case(
    op: &SpdOperator,
    solution: &SineSeriesSolution,
    cfg: &CflConfig,
    level: usize,
    kx: f64,
    formulation: Formulation,
) -> Result<CaseResult> {
    let k = kx / op.spectral_bound().sqrt();
    let spec = CaseSpec {
        level,
        h: None,
        k,
        n_steps: cfg.steps,
        formulation,
        quad_points: cfg.quad_points,
        samples: cfg.samples,
        record_wall_time: cfg.record_wall_time,
    };
    run_case(op, solution, &ZeroSource, &spec)
}

/// Runs the three cases and judges growth, reliability and the IEI profile.
pub fn run_cfl_scenario(cfg: &CflConfig) -> Result<CflReport> {
    cfg.validate()?;
    let solution = cfg.problem.solution()?;
    let op = SpdOperator::spectral_sine(solution.c(), solution.modes())?;
    let unstable = case(&op, &solution, cfg, 0, cfg.k_sqrt_lambda, Formulation::LeapFrog)?;
    let control = case(&op, &solution, cfg, 1, cfg.control_k_sqrt_lambda, Formulation::LeapFrog)?;
    let cosine = case(&op, &solution, cfg, 2, cfg.k_sqrt_lambda, Formulation::Cosine2 { q1: cfg.cosine_q1 })?;
    let verdict = judge(&unstable, &control, &cosine);
    Ok(CflReport {
        config: cfg.clone(),
        unstable,
        control,
        cosine,
        verdict,
    })
}

fn judge(unstable: &CaseResult, control: &CaseResult, cosine: &CaseResult) -> CflVerdict {
    let row = &unstable.row;
    let e0 = row.initial_energy_norm;
    let error_growth = row.sup_e_l / e0;
    let estimator_growth = row.eta1 / e0;
    let tol = |eta: f64| eta * (1.0 + RELIABILITY_SLACK);
    let bounds_e_r = unstable.profile.iter().all(|p| p.sup_e_r <= tol(p.eta1));
    let bounds_e_l = unstable.profile.iter().all(|p| p.sup_e_l <= tol(p.eta1));

    let phase: Vec<_> = unstable
        .profile
        .iter()
        .skip_while(|p| p.e_l <= 10.0 * e0)
        .collect();
    let mut iei: Vec<f64> = phase.iter().map(|p| p.iei).collect();
    iei.sort_by(f64::total_cmp);
    let (median, lo, hi) = if iei.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let m = iei.len();
        let median = if m % 2 == 1 { iei[m / 2] } else { 0.5 * (iei[m / 2 - 1] + iei[m / 2]) };
        (median, iei[0], iei[m - 1])
    };
    let within = !iei.is_empty() && lo >= median / 10.0 && hi <= median * 10.0;

    let grows = error_growth > 1e3 && estimator_growth > 1e3;
    // phase errors of a stable run stay O(1) relative to the data
    let control_bounded = control.row.stable && control.row.sup_e_l <= 10.0 * e0;
    let control_reliable = control.row.iei <= 1.0 + RELIABILITY_SLACK && control.row.is_reliable();
    let cosine_bounded = cosine.row.stable;
    CflVerdict {
        error_growth,
        estimator_growth,
        grows_thousandfold: grows,
        bounds_e_r_at_every_node: bounds_e_r,
        bounds_e_l_at_every_node: bounds_e_l,
        unstable_phase_start: phase.first().map(|p| p.t),
        iei_median: median,
        iei_min: lo,
        iei_max: hi,
        iei_within_decade: within,
        control_bounded,
        control_reliable,
        cosine_bounded,
        passed: grows && bounds_e_r && bounds_e_l && within && control_bounded && control_reliable && cosine_bounded,
    }
}
