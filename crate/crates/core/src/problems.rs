//! Manufactured sine-series solutions, the three example presets, exact
//! semidiscrete references, and the true errors of a run.
//!
//! A term `(k, j, alpha, beta)` stands for
//! `sin(k pi x) sin(j pi y) (alpha cos(xi pi t) + beta sin(xi pi t))` with
//! `xi = c sqrt(k^2 + j^2)`. The reference solution of the semidiscrete
//! system `U'' + A U = 0` starts from the same data,
//! `u(0) = sum alpha phi`, `u'(0) = sum xi pi beta phi`, and evolves every mode
//! with the frequency `omega = sqrt(lambda)` of `A` itself. For the spectral
//! operator `omega = xi pi`, so the two coincide.

use serde::{Deserialize, Serialize};

use crate::error::{config, contract, Result};
use crate::operator::{BasisKind, SpdOperator, StatePair, StateVector};
use crate::reconstruct::Reconstruction;
use crate::scheme::StaggeredTrajectory;

/// A reference solution `t -> (u(t), u'(t))` in an operator's basis.
pub trait ExactSolution: Sync {
    fn state(&self, op: &SpdOperator, t: f64) -> Result<StatePair>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub k: u32,
    pub j: u32,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSeries")]
pub struct SineSeriesSolution {
    c: f64,
    terms: Vec<SineTerm>,
}

#[derive(Deserialize)]
struct RawSeries {
    c: f64,
    terms: Vec<SineTerm>,
}

impl TryFrom<RawSeries> for SineSeriesSolution {
    type Error = crate::Error;

    fn try_from(raw: RawSeries) -> Result<Self> {
        Self::new(raw.c, raw.terms)
    }
}

impl SineSeriesSolution {
    pub fn new(c: f64, terms: Vec<SineTerm>) -> Result<Self> {
        if !c.is_finite() || c == 0.0 {
            return Err(config(format!("wave speed must be finite and nonzero, got {c}")));
        }
        for (i, t) in terms.iter().enumerate() {
            if !t.alpha.is_finite() || !t.beta.is_finite() {
                return Err(config(format!("term {i} has a non-finite amplitude")));
            }
            if terms[..i].iter().any(|s| (s.k, s.j) == (t.k, t.j)) {
                return Err(config(format!("mode ({}, {}) appears twice", t.k, t.j)));
            }
        }
        Ok(Self { c, terms })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn terms(&self) -> &[SineTerm] {
        &self.terms
    }

    /// `xi_{k,j} = c sqrt(k^2 + j^2)`.
    pub fn xi(&self, term: &SineTerm) -> f64 {
        self.c * ((term.k as f64).powi(2) + (term.j as f64).powi(2)).sqrt()
    }

    /// Modes `(k, j)` of all terms, in order.
    pub fn modes(&self) -> Vec<(u32, u32)> {
        self.terms.iter().map(|t| (t.k, t.j)).collect()
    }

    fn modal_data(&self, op: &SpdOperator) -> Result<Vec<(StateVector, f64, f64, f64)>> {
        self.terms
            .iter()
            .map(|term| {
                let phi = op.mode_vector(term.k, term.j).map_err(|e| {
                    config(format!(
                        "solution mode ({}, {}) is not representable by the operator: {e}",
                        term.k, term.j
                    ))
                })?;
                let omega = op.mode_eigenvalue(term.k, term.j)?.sqrt();
                let velocity = self.xi(term) * std::f64::consts::PI * term.beta;
                Ok((phi, omega, term.alpha, velocity))
            })
            .collect()
    }

    /// `(u(0), u'(0))`.
    pub fn initial_data(&self, op: &SpdOperator) -> Result<(StateVector, StateVector)> {
        let s = self.state(op, 0.0)?;
        Ok((s.phi1, s.phi2))
    }

    /// A reusable evaluator with the mode vectors precomputed.
    pub fn evaluator(&self, op: &SpdOperator) -> Result<SeriesEvaluator> {
        Ok(SeriesEvaluator {
            modes: self.modal_data(op)?,
            zero: op.zeros(),
        })
    }
}

impl ExactSolution for SineSeriesSolution {
    fn state(&self, op: &SpdOperator, t: f64) -> Result<StatePair> {
        self.evaluator(op)?.state(t)
    }
}

/// [`SineSeriesSolution`] bound to one operator.
#[derive(Clone, Debug)]
pub struct SeriesEvaluator {
    modes: Vec<(StateVector, f64, f64, f64)>,
    zero: StateVector,
}

impl SeriesEvaluator {
    pub fn state(&self, t: f64) -> Result<StatePair> {
        let mut u = self.zero.clone();
        let mut v = self.zero.clone();
        for (phi, omega, a, b) in &self.modes {
            let (s, c) = (omega * t).sin_cos();
            u.axpy(a * c + b / omega * s, phi);
            v.axpy(-a * omega * s + b * c, phi);
        }
        StatePair::new(u, v)
    }
}

/// `(u(t), u'(t))` of the semidiscrete reference in the operator's basis.
pub fn exact_state(sol: &SineSeriesSolution, op: &SpdOperator, t: f64) -> Result<StatePair> {
    sol.state(op, t)
}

/// `k = C h^r`, or an explicit list of steps (one per level).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TimeStepRule {
    Scaled { c: f64, r: u32 },
    Explicit { k: Vec<f64> },
}

impl TimeStepRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Scaled { c, r } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(config(format!("time-step constant must be positive, got {c}")));
                }
                if !(1..=2).contains(r) {
                    return Err(config(format!("time-step exponent must be 1 or 2, got {r}")));
                }
            }
            Self::Explicit { k } => {
                if k.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
                    return Err(config("explicit time steps must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn step(&self, h: f64, level: usize) -> Result<f64> {
        match self {
            Self::Scaled { c, r } => Ok(c * h.powi(*r as i32)),
            Self::Explicit { k } => k
                .get(level)
                .copied()
                .ok_or_else(|| config(format!("no explicit time step for level {level}"))),
        }
    }
}

/// One of the three example problems with its default refinement sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExamplePreset {
    pub id: u8,
    pub solution: SineSeriesSolution,
    pub h: Vec<f64>,
    pub time_step: TimeStepRule,
}

fn single_term(c: f64, k: u32, amplitude: f64) -> SineSeriesSolution {
    SineSeriesSolution::new(c, vec![SineTerm { k, j: k, alpha: amplitude, beta: amplitude }]).expect("valid preset")
}

/// The finite element constant `(p + 1)^2` for `p = 2`.
const FE_FACTOR: f64 = 9.0;

impl ExamplePreset {
    /// Presets 1 to 3, with `k = C h` and `C = 0.4/9` (presets 1, 2) or
    /// `C = 0.1/9` (preset 3).
    pub fn get(id: u8) -> Result<Self> {
        let coarse = vec![0.5, 0.25, 1.0 / (4.0 * 2f64.sqrt()), 0.125, 0.1];
        let fine = vec![1.0 / (4.0 * 2f64.sqrt()), 0.125, 0.1, 1.0 / 12.0, 1.0 / 14.0];
        let (solution, h, c) = match id {
            1 => (single_term(1.0, 1, 15.0), coarse, 0.4),
            2 => (single_term(1.0, 3, 1.0), fine, 0.4),
            3 => (single_term(5.0, 1, 15.0), coarse, 0.1),
            other => return Err(config(format!("unknown preset {other}, expected 1, 2 or 3"))),
        };
        Ok(Self {
            id,
            solution,
            h,
            time_step: TimeStepRule::Scaled { c: c / FE_FACTOR, r: 1 },
        })
    }

    /// Preset 3 with the finer rule `k = (0.4/9) h^2`.
    pub fn preset3_quadratic() -> Self {
        let mut p = Self::get(3).expect("preset 3 exists");
        p.time_step = TimeStepRule::Scaled { c: 0.4 / FE_FACTOR, r: 2 };
        p
    }
}

/// Where the errors are sampled: every `k/2` breakpoint plus
/// `interior_points` equispaced points inside each half step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRule {
    pub interior_points: usize,
}

impl Default for SampleRule {
    fn default() -> Self {
        Self { interior_points: 4 }
    }
}

/// Error values at the node `t^m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NodeErrors {
    pub t: f64,
    pub e_r: f64,
    pub e_l: f64,
    /// Running sup over all samples in `[0, t^m]`.
    pub sup_e_r: f64,
    pub sup_e_l: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub sup_e_r: f64,
    pub sup_e_l: f64,
    pub nodes: Vec<NodeErrors>,
}

/// Sup over the sample set of `e_R = |||(u - U^, u' - V^)|||` and
/// `e_L = |||(u - U, u' - V)|||` on `[0, t^N]`, with `U`, `V` the piecewise
/// linear interpolants.
pub fn errors_sup(
    op: &SpdOperator,
    traj: &StaggeredTrajectory,
    recon: &Reconstruction,
    exact: &dyn ExactSolution,
    rule: SampleRule,
) -> Result<ErrorReport> {
    let n_steps = traj.n_steps();
    let half = 0.5 * traj.k();
    let per_half = rule.interior_points + 1;
    let mut nodes = Vec::with_capacity(n_steps + 1);
    let (mut sup_r, mut sup_l) = (0.0_f64, 0.0_f64);
    for j in 0..=2 * n_steps {
        let subs = if j == 0 { 1 } else { per_half };
        for m in (0..subs).rev() {
            // samples of (t^{(j-1)/2}, t^{j/2}], ending on the breakpoint
            let t = if m == 0 { j as f64 * half } else { (j as f64 - m as f64 / per_half as f64) * half };
            let u = exact.state(op, t)?;
            let e_r = op.energy_norm_of(&(&u.phi1 - &recon.u_hat.eval(t)?), &(&u.phi2 - &recon.v_hat.eval(t)?))?;
            let e_l = op.energy_norm_of(
                &(&u.phi1 - &recon.interpolants.u.eval(t)?),
                &(&u.phi2 - &recon.interpolants.v.eval(t)?),
            )?;
            sup_r = sup_r.max(e_r);
            sup_l = sup_l.max(e_l);
            if m == 0 && j % 2 == 0 {
                nodes.push(NodeErrors {
                    t,
                    e_r,
                    e_l,
                    sup_e_r: sup_r,
                    sup_e_l: sup_l,
                });
            }
        }
    }
    Ok(ErrorReport {
        sup_e_r: sup_r,
        sup_e_l: sup_l,
        nodes,
    })
}

/// `|||(U^(t), V^(t))|||^2 / 2`.
pub fn reconstruction_energy(op: &SpdOperator, recon: &Reconstruction, t: f64) -> Result<f64> {
    let end = recon.u_hat.grid().end();
    if !(0.0..=end * (1.0 + 1e-12)).contains(&t) {
        return Err(contract(format!("t = {t} lies outside [0, {end}]")));
    }
    let e = op.energy_norm_of(&recon.u_hat.eval(t)?, &recon.v_hat.eval(t)?)?;
    Ok(0.5 * e * e)
}

/// `|||(u, u')|||^2 / 2` of the reference.
pub fn exact_energy(op: &SpdOperator, exact: &dyn ExactSolution, t: f64) -> Result<f64> {
    let e = op.energy_norm(&exact.state(op, t)?)?;
    Ok(0.5 * e * e)
}

/// Grid operator of the given kind for mesh size `h`, with
/// `n_interior = round(1/h) - 1`; spectral operators ignore `h`.
pub fn operator_for(kind: BasisKind, c: f64, modes: &[(u32, u32)], h: f64) -> Result<SpdOperator> {
    let n = || -> Result<usize> {
        if !(h > 0.0 && h < 1.0) {
            return Err(config(format!("mesh size must lie in (0, 1), got {h}")));
        }
        Ok(((1.0 / h).round() as usize).saturating_sub(1).max(1))
    };
    match kind {
        BasisKind::SpectralModes => SpdOperator::spectral_sine(c, modes.to_vec()),
        BasisKind::Grid1d => SpdOperator::fd_laplacian_1d(c, n()?),
        BasisKind::Grid2d => SpdOperator::fd_laplacian_2d(c, n()?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reconstruct::reconstruct;
    use crate::residual::residuals;
    use crate::scheme::{run, Formulation, ZeroSource};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn preset_one_initial_state() {
        let p = ExamplePreset::get(1).unwrap();
        let op = SpdOperator::spectral_sine(1.0, vec![(1, 1), (2, 1)]).unwrap();
        let s = exact_state(&p.solution, &op, 0.0).unwrap();
        assert_eq!(s.phi1.coeffs(), &[15.0, 0.0]);
        assert_relative_eq!(s.phi2.coeffs()[0], 15.0 * 2f64.sqrt() * PI, max_relative = 1e-15);
        assert_eq!(s.phi2.coeffs()[1], 0.0);
    }

    #[test]
    fn cosine_only_series_starts_at_rest() {
        let sol = SineSeriesSolution::new(2.0, vec![SineTerm { k: 2, j: 1, alpha: 3.0, beta: 0.0 }]).unwrap();
        let op = SpdOperator::spectral_sine(2.0, vec![(2, 1)]).unwrap();
        assert!(exact_state(&sol, &op, 0.0).unwrap().phi2.is_zero());
    }

    #[test]
    fn periodic_in_time() {
        let p = ExamplePreset::get(1).unwrap();
        let op = SpdOperator::spectral_sine(1.0, vec![(1, 1)]).unwrap();
        let period = 2.0 / p.solution.xi(&p.solution.terms()[0]);
        let a = exact_state(&p.solution, &op, 0.0).unwrap();
        let b = exact_state(&p.solution, &op, period).unwrap();
        assert!((&a.phi1 - &b.phi1).max_abs() < 1e-12);
        assert!((&a.phi2 - &b.phi2).max_abs() < 1e-11);
    }

    #[test]
    fn missing_mode_is_a_configuration_error() {
        let p = ExamplePreset::get(2).unwrap();
        let op = SpdOperator::spectral_sine(1.0, vec![(1, 1)]).unwrap();
        assert!(matches!(exact_state(&p.solution, &op, 0.0), Err(crate::Error::Config(_))));
    }

    #[test]
    fn reference_solves_the_semidiscrete_system() {
        let sol = SineSeriesSolution::new(
            1.0,
            vec![
                SineTerm { k: 1, j: 1, alpha: 1.0, beta: 0.5 },
                SineTerm { k: 2, j: 3, alpha: -0.3, beta: 0.2 },
            ],
        )
        .unwrap();
        let op = SpdOperator::fd_laplacian_2d(1.0, 7).unwrap();
        let d = 1e-4;
        for t in [0.1, 0.37, 0.8] {
            let m = exact_state(&sol, &op, t).unwrap().phi1;
            let l = exact_state(&sol, &op, t - d).unwrap().phi1;
            let r = exact_state(&sol, &op, t + d).unwrap().phi1;
            let second = (&(&l + &r) - &m.scaled(2.0)) * (1.0 / (d * d));
            let defect = &second + &op.apply(&m).unwrap();
            assert!(defect.max_abs() <= 1e-6 * op.apply(&m).unwrap().max_abs());
        }
    }

    #[test]
    fn exact_energy_is_conserved() {
        for id in 1..=3 {
            let p = ExamplePreset::get(id).unwrap();
            let op = SpdOperator::spectral_sine(p.solution.c(), p.solution.modes()).unwrap();
            let e0 = exact_energy(&op, &p.solution, 0.0).unwrap();
            for t in [0.13, 0.5, 1.0] {
                assert_relative_eq!(exact_energy(&op, &p.solution, t).unwrap(), e0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn serde_rejects_duplicate_modes() {
        let json = r#"{"c": 1.0, "terms": [{"k":1,"j":1,"alpha":1,"beta":0},{"k":1,"j":1,"alpha":2,"beta":0}]}"#;
        assert!(serde_json::from_str::<SineSeriesSolution>(json).is_err());
        let p = ExamplePreset::get(3).unwrap();
        let back: ExamplePreset = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    fn preset1_errors(k: f64) -> ErrorReport {
        let p = ExamplePreset::get(1).unwrap();
        let op = SpdOperator::spectral_sine(1.0, vec![(1, 1)]).unwrap();
        let (u0, v0) = p.solution.initial_data(&op).unwrap();
        let n = (1.0 / k).round() as usize;
        let traj = run(&op, Formulation::LeapFrog, &u0, &v0, &ZeroSource, k, n).unwrap();
        let rho = residuals(&op, &traj).unwrap();
        let recon = reconstruct(&op, &traj, &rho).unwrap();
        errors_sup(&op, &traj, &recon, &p.solution, SampleRule::default()).unwrap()
    }

    #[test]
    fn errors_converge_at_second_order() {
        let a = preset1_errors(1.0 / 40.0);
        let b = preset1_errors(1.0 / 80.0);
        let c = preset1_errors(1.0 / 160.0);
        for (x, y) in [(&a, &b), (&b, &c)] {
            let rr = x.sup_e_r / y.sup_e_r;
            let rl = x.sup_e_l / y.sup_e_l;
            assert!((3.4..=4.6).contains(&rr), "{rr}");
            assert!((3.4..=4.6).contains(&rl), "{rl}");
        }
        assert_eq!(c.nodes.len(), 161);
        // e_R(0) = (0, (k^2/8) A v0) exactly when f = 0
        let (lambda, v0) = (2.0 * PI * PI, 15.0 * 2f64.sqrt() * PI);
        let k: f64 = 1.0 / 160.0;
        assert_relative_eq!(c.nodes[0].e_r, k * k / 8.0 * lambda * v0, max_relative = 1e-9);
        let last = c.nodes.last().unwrap();
        assert_eq!(last.sup_e_r, c.sup_e_r);
    }

    #[test]
    fn zero_problem_has_zero_error_and_energy() {
        let sol = SineSeriesSolution::new(1.0, vec![SineTerm { k: 1, j: 1, alpha: 0.0, beta: 0.0 }]).unwrap();
        let op = SpdOperator::spectral_sine(1.0, vec![(1, 1)]).unwrap();
        let traj = run(&op, Formulation::LeapFrog, &op.zeros(), &op.zeros(), &ZeroSource, 0.1, 5).unwrap();
        let rho = residuals(&op, &traj).unwrap();
        let recon = reconstruct(&op, &traj, &rho).unwrap();
        let e = errors_sup(&op, &traj, &recon, &sol, SampleRule::default()).unwrap();
        assert_eq!((e.sup_e_r, e.sup_e_l), (0.0, 0.0));
        assert_eq!(reconstruction_energy(&op, &recon, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn scalar_reconstruction_energy_by_hand() {
        // A = [1]: spectral mode (1, 1) with c = 1 / (pi sqrt 2)
        let op = SpdOperator::spectral_sine(1.0 / (PI * 2f64.sqrt()), vec![(1, 1)]).unwrap();
        let u0 = op.vector(vec![1.0]).unwrap();
        let traj = run(&op, Formulation::LeapFrog, &u0, &op.zeros(), &ZeroSource, 0.1, 10).unwrap();
        let rho = residuals(&op, &traj).unwrap();
        let recon = reconstruct(&op, &traj, &rho).unwrap();
        // U^(t^1) = U^1 = 0.995; V^(t^1) = V^{1/2} + (k/2)(-U_1 + rho_U^1) averaged over the first half
        let v_half = (0.995 - 1.0) / 0.1;
        let u_half_1 = (0.98005 + 0.995) / 2.0;
        let u_half_0 = (0.995 + 1.0) / 2.0;
        let rho1 = (0.98005 - 2.0 * 0.995 + 1.0) / 4.0;
        let u1_at_t1 = 0.5 * (u_half_0 + u_half_1);
        let v_at_t1 = v_half + 0.05 * (-(u_half_0 + u1_at_t1) / 2.0 + rho1);
        let expected = 0.5 * (0.995 * 0.995 + v_at_t1 * v_at_t1);
        assert_relative_eq!(reconstruction_energy(&op, &recon, 0.1).unwrap(), expected, max_relative = 1e-13);
        assert!(reconstruction_energy(&op, &recon, 1.5).is_err());
    }

    #[test]
    fn operator_for_maps_mesh_size() {
        let op = operator_for(BasisKind::Grid2d, 1.0, &[], 1.0 / (4.0 * 2f64.sqrt())).unwrap();
        assert_eq!(op.dim(), 25);
        assert_eq!(operator_for(BasisKind::Grid1d, 1.0, &[], 0.1).unwrap().dim(), 9);
        assert!(operator_for(BasisKind::Grid1d, 1.0, &[], 1.5).is_err());
        assert_eq!(operator_for(BasisKind::SpectralModes, 1.0, &[(1, 1)], 7.0).unwrap().dim(), 1);
    }
}
