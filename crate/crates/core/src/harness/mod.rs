//! Experiment runner: convergence studies, the CFL-violation scenario, EOC and
//! IEI bookkeeping, and report emission.

mod cfl;
mod config;
mod report;

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

pub use cfl::{run_cfl_scenario, CflConfig, CflReport, CflVerdict};
pub use config::{OperatorChoice, ProblemSpec, StudyConfig};
pub use report::{emit_cfl_report, emit_report, ReportPaths, CSV_HEADER};

use crate::error::{config as config_error, Error, Result};
use crate::operator::SpdOperator;
use crate::problems::{errors_sup, reconstruction_energy, ExactSolution, NodeErrors, SampleRule};
use crate::reconstruct::reconstruct;
use crate::residual::{eta1, initial_reconstruction_error, residual_functions, residuals, IntervalContribution};
use crate::scheme::{run, Formulation, Source, ZeroSource};

/// Values at or beyond this magnitude are reported as this value.
pub const CLAMP: f64 = 1e300;
/// A run counts as blown up once its trajectory exceeds this multiple of the
/// initial data.
pub const BLOW_UP_FACTOR: f64 = 1e6;
/// Slack allowed in `IEI <= 1` for quadrature and round-off.
pub const RELIABILITY_SLACK: f64 = 1e-6;

pub fn clamp(x: f64) -> f64 {
    if x.is_nan() || x.abs() >= CLAMP {
        CLAMP.copysign(if x.is_nan() { 1.0 } else { x })
    } else {
        x
    }
}

/// `log(a(i+1)/a(i)) / log(h(i+1)/h(i))`.
pub fn eoc(a: &[f64], h: &[f64], i: usize) -> Result<f64> {
    if i + 1 >= a.len() || i + 1 >= h.len() {
        return Err(Error::Domain(format!("EOC index {i} needs entries {i} and {}", i + 1)));
    }
    let (a0, a1, h0, h1) = (a[i], a[i + 1], h[i], h[i + 1]);
    if !(a0 > 0.0 && a1 > 0.0 && h0 > 0.0 && h1 > 0.0) {
        return Err(Error::Domain(format!(
            "EOC needs positive entries, got a = ({a0}, {a1}), h = ({h0}, {h1})"
        )));
    }
    if h1.partial_cmp(&h0) != Some(std::cmp::Ordering::Less) {
        return Err(Error::Domain(format!("EOC needs decreasing h, got ({h0}, {h1})")));
    }
    Ok((a1 / a0).ln() / (h1 / h0).ln())
}

/// Inverse effectivity index `sup_error / eta1`.
pub fn iei(sup_error: f64, eta1: f64) -> Result<f64> {
    if eta1 > 0.0 {
        Ok(sup_error / eta1)
    } else if sup_error == 0.0 {
        Err(Error::Domain("IEI is undefined when both error and estimator vanish".into()))
    } else {
        Err(Error::ReliabilityViolation {
            error: sup_error,
            estimator: eta1,
        })
    }
}

/// One fully specified run.
#[derive(Clone, Debug)]
pub struct CaseSpec {
    pub level: usize,
    pub h: Option<f64>,
    pub k: f64,
    pub n_steps: usize,
    pub formulation: Formulation,
    pub quad_points: usize,
    pub samples: SampleRule,
    pub record_wall_time: bool,
}

/// Per-node time series of a run.
#[derive(Clone, Debug, Serialize)]
pub struct NodeProfile {
    pub t: f64,
    pub e_r: f64,
    pub e_l: f64,
    pub sup_e_r: f64,
    pub sup_e_l: f64,
    /// `eta_1` over `[0, t]`.
    pub eta1: f64,
    /// `e_L(t) / eta_1(t)`.
    pub iei: f64,
    /// Running `sup e_L / eta_1(t)`.
    pub iei_sup: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyRow {
    pub level: usize,
    pub h: Option<f64>,
    pub k: f64,
    pub n_steps: usize,
    pub k_sqrt_lambda_max: f64,
    pub stable: bool,
    pub sup_e_r: f64,
    pub sup_e_l: f64,
    pub eta1: f64,
    pub eoc_e_r: Option<f64>,
    pub eoc_e_l: Option<f64>,
    pub eoc_eta1: Option<f64>,
    /// `sup e_L / eta_1`.
    pub iei: f64,
    /// `sup e_R / eta_1`, the ratio the reliability bound controls.
    pub iei_r: f64,
    pub energy_t: f64,
    pub wall_ms: u64,
    /// `eta_1` with twice the quadrature points.
    pub eta1_doubled: f64,
    pub initial_energy_norm: f64,
    pub max_rho_u: f64,
    pub max_rho_v: f64,
}

impl StudyRow {
    /// `eta_1` relative change when the quadrature points are doubled.
    pub fn quadrature_change(&self) -> f64 {
        if self.eta1 == 0.0 {
            0.0
        } else {
            (self.eta1_doubled - self.eta1).abs() / self.eta1
        }
    }

    /// `sup e_R <= eta_1` up to the slack, checked on stable rows only.
    pub fn is_reliable(&self) -> bool {
        !self.stable || self.iei_r <= 1.0 + RELIABILITY_SLACK
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseResult {
    pub row: StudyRow,
    pub profile: Vec<NodeProfile>,
    pub intervals: Vec<IntervalContribution>,
}

/// Runs one case: scheme, residuals, reconstructions, estimator, errors.
pub fn run_case(op: &SpdOperator, exact: &dyn ExactSolution, source: &dyn Source, spec: &CaseSpec) -> Result<CaseResult> {
    let start = Instant::now();
    let init = exact.state(op, 0.0)?;
    let traj = run(op, spec.formulation, &init.phi1, &init.phi2, source, spec.k, spec.n_steps)?;
    let k_sqrt_lambda_max = spec.k * op.spectral_bound().sqrt();
    let scale = init.phi1.max_abs().max(spec.k * init.phi2.max_abs());
    let blown_up = !traj.max_abs().is_finite() || traj.max_abs() > BLOW_UP_FACTOR * scale.max(f64::MIN_POSITIVE);
    let stable = spec.formulation.family().is_stable_for(k_sqrt_lambda_max) && !blown_up;

    let rho = residuals(op, &traj)?;
    let recon = reconstruct(op, &traj, &rho)?;
    let res = residual_functions(op, &traj, &recon, &rho)?;
    let e0 = initial_reconstruction_error(&init.phi1, &init.phi2, &recon)?;
    let t_end = traj.final_time();
    let est = eta1(op, &res, source, &e0, t_end, spec.quad_points)?;
    let est_doubled = eta1(op, &res, source, &e0, t_end, 2 * spec.quad_points)?;
    let errors = errors_sup(op, &traj, &recon, exact, spec.samples)?;

    let profile = errors
        .nodes
        .iter()
        .zip(&est.node_profile)
        .map(|(e, &(_, eta)): (&NodeErrors, _)| {
            Ok(NodeProfile {
                t: e.t,
                e_r: clamp(e.e_r),
                e_l: clamp(e.e_l),
                sup_e_r: clamp(e.sup_e_r),
                sup_e_l: clamp(e.sup_e_l),
                eta1: clamp(eta),
                iei: ratio(e.e_l, eta),
                iei_sup: ratio(e.sup_e_l, eta),
                energy: clamp(reconstruction_energy(op, &recon, e.t)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let row = StudyRow {
        level: spec.level,
        h: spec.h,
        k: spec.k,
        n_steps: spec.n_steps,
        k_sqrt_lambda_max,
        stable,
        sup_e_r: clamp(errors.sup_e_r),
        sup_e_l: clamp(errors.sup_e_l),
        eta1: clamp(est.eta1),
        eoc_e_r: None,
        eoc_e_l: None,
        eoc_eta1: None,
        iei: ratio(errors.sup_e_l, est.eta1),
        iei_r: ratio(errors.sup_e_r, est.eta1),
        energy_t: clamp(reconstruction_energy(op, &recon, t_end)?),
        wall_ms: if spec.record_wall_time { start.elapsed().as_millis() as u64 } else { 0 },
        eta1_doubled: clamp(est_doubled.eta1),
        initial_energy_norm: op.energy_norm(&init)?,
        max_rho_u: clamp(rho.max_rho_u(op)?),
        max_rho_v: clamp(rho.max_rho_v(op)?),
    };
    Ok(CaseResult {
        row,
        profile,
        intervals: est.intervals,
    })
}

/// `error / eta1`, with `0/0 = 0` and overflow clamped.
fn ratio(error: f64, eta1: f64) -> f64 {
    if error == 0.0 {
        0.0
    } else if eta1 > 0.0 && eta1.is_finite() && error.is_finite() {
        clamp(error / eta1)
    } else {
        CLAMP
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub cases: Vec<CaseResult>,
}

impl StudyResult {
    pub fn rows(&self) -> Vec<&StudyRow> {
        self.cases.iter().map(|c| &c.row).collect()
    }

    /// First stable row whose `sup e_R` exceeds `eta_1` beyond the slack.
    pub fn reliability_violation(&self) -> Option<&StudyRow> {
        self.cases.iter().map(|c| &c.row).find(|r| !r.is_reliable())
    }
}

/// Fills the EOC columns from consecutive levels, using `h` when every level
/// has one and `k` otherwise.
pub fn fill_eoc(rows: &mut [StudyRow]) {
    let param: Vec<f64> = if rows.iter().all(|r| r.h.is_some()) {
        rows.iter().map(|r| r.h.unwrap()).collect()
    } else {
        rows.iter().map(|r| r.k).collect()
    };
    let column = |f: fn(&StudyRow) -> f64, rows: &[StudyRow]| -> Vec<Option<f64>> {
        let a: Vec<f64> = rows.iter().map(f).collect();
        (0..rows.len())
            .map(|i| if i == 0 { None } else { eoc(&a, &param, i - 1).ok() })
            .collect()
    };
    let er = column(|r| r.sup_e_r, rows);
    let el = column(|r| r.sup_e_l, rows);
    let et = column(|r| r.eta1, rows);
    for (i, row) in rows.iter_mut().enumerate() {
        row.eoc_e_r = er[i];
        row.eoc_e_l = el[i];
        row.eoc_eta1 = et[i];
    }
}

/// Number of steps covering `[0, t_end]` with step at most `k`, and the
/// resulting uniform step.
pub fn steps_for(t_end: f64, k: f64) -> Result<(usize, f64)> {
    if !(k > 0.0 && t_end > 0.0) || !k.is_finite() || !t_end.is_finite() {
        return Err(config_error(format!("need positive final time and step, got T = {t_end}, k = {k}")));
    }
    let n = ((t_end / k) * (1.0 - 1e-12)).ceil().max(2.0) as usize;
    Ok((n, t_end / n as f64))
}

/// Runs every level of a study, concurrently, and assembles rows in level
/// order.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    let plan = cfg.plan()?;
    let solution = cfg.problem.solution()?;
    let work = |(op, spec): &(SpdOperator, CaseSpec)| run_case(op, &solution, &ZeroSource, spec);
    let mut cases: Vec<CaseResult> = if cfg.parallel {
        plan.par_iter().map(work).collect::<Result<_>>()?
    } else {
        plan.iter().map(work).collect::<Result<_>>()?
    };
    let mut rows: Vec<StudyRow> = cases.iter().map(|c| c.row.clone()).collect();
    fill_eoc(&mut rows);
    for (case, row) in cases.iter_mut().zip(rows) {
        case.row = row;
    }
    Ok(StudyResult {
        config: cfg.clone(),
        cases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eoc_examples() {
        assert!((eoc(&[0.04, 0.01], &[0.2, 0.1], 0).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(eoc(&[0.3, 0.3], &[0.2, 0.1], 0).unwrap(), 0.0);
        assert!(matches!(eoc(&[0.0, 0.1], &[0.2, 0.1], 0), Err(Error::Domain(_))));
        assert!(matches!(eoc(&[0.1, 0.1], &[0.1, 0.2], 0), Err(Error::Domain(_))));
        assert!(eoc(&[0.1], &[0.1], 0).is_err());
    }

    #[test]
    fn iei_examples() {
        assert_eq!(iei(0.5, 1.0).unwrap(), 0.5);
        assert_eq!(iei(0.0, 2.0).unwrap(), 0.0);
        assert!(matches!(iei(1.0, 0.0), Err(Error::ReliabilityViolation { .. })));
    }

    #[test]
    fn step_count_rounds_up() {
        assert_eq!(steps_for(1.0, 0.1).unwrap().0, 10);
        let (n, k) = steps_for(1.0, 0.3).unwrap();
        assert_eq!(n, 4);
        assert_eq!(k, 0.25);
        assert!(steps_for(1.0, 0.0).is_err());
    }

    #[test]
    fn clamping() {
        assert_eq!(clamp(f64::INFINITY), CLAMP);
        assert_eq!(clamp(f64::NEG_INFINITY), -CLAMP);
        assert_eq!(clamp(f64::NAN), CLAMP);
        assert_eq!(clamp(3.0), 3.0);
    }
}
