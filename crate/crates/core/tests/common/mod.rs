//! Randomized stable runs shared by the acceptance target and the property
//! suite.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wavecheck::operator::{SpdOperator, StateVector};
use wavecheck::reconstruct::{reconstruct, Reconstruction};
use wavecheck::residual::residuals;
use wavecheck::scheme::{discrete_energy, run, step_defect, FnSource, Formulation, Source, StaggeredTrajectory, ZeroSource};
use wavecheck::Result;

#[derive(Clone, Debug)]
pub enum OperatorParams {
    Spectral { c: f64, modes: Vec<(u32, u32)> },
    Fd1d { n: usize },
    Fd2d { n: usize },
}

impl OperatorParams {
    pub fn build(&self) -> SpdOperator {
        match self {
            Self::Spectral { c, modes } => SpdOperator::spectral_sine(*c, modes.clone()),
            Self::Fd1d { n } => SpdOperator::fd_laplacian_1d(1.0, *n),
            Self::Fd2d { n } => SpdOperator::fd_laplacian_2d(1.0, *n),
        }
        .expect("valid operator parameters")
    }
}

/// A stable run: `k sqrt(lambda_max)` below the family's limit.
#[derive(Clone, Debug)]
pub struct CaseParams {
    pub operator: OperatorParams,
    pub formulation: Formulation,
    /// `k sqrt(lambda_max)`.
    pub courant: f64,
    pub n_steps: usize,
    pub seed: u64,
    /// Amplitude of a smooth forcing; zero selects `ZeroSource`.
    pub forcing: f64,
}

impl CaseParams {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let operator = match rng.gen_range(0..3) {
            0 => {
                let count = rng.gen_range(1..=4);
                let mut modes: Vec<(u32, u32)> = Vec::new();
                while modes.len() < count {
                    let m = (rng.gen_range(1..=5), rng.gen_range(1..=5));
                    if !modes.contains(&m) {
                        modes.push(m);
                    }
                }
                OperatorParams::Spectral {
                    c: rng.gen_range(0.3..3.0),
                    modes,
                }
            }
            1 => OperatorParams::Fd1d { n: rng.gen_range(2..=15) },
            _ => OperatorParams::Fd2d { n: rng.gen_range(2..=6) },
        };
        let (formulation, courant) = match rng.gen_range(0..3) {
            0 => (Formulation::LeapFrog, rng.gen_range(0.05..1.9)),
            1 => (Formulation::Cosine1 { q1: random_q1(rng) }, rng.gen_range(0.05..3.0)),
            _ => (Formulation::Cosine2 { q1: random_q1(rng) }, rng.gen_range(0.05..3.0)),
        };
        let forcing = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(-2.0..2.0) };
        Self {
            operator,
            formulation,
            courant,
            n_steps: rng.gen_range(2..=40),
            seed: rng.gen(),
            forcing,
        }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::random(&mut ChaCha8Rng::seed_from_u64(seed))
    }
}

fn random_q1(rng: &mut ChaCha8Rng) -> f64 {
    match rng.gen_range(0..4) {
        0 => 0.25,
        1 => 0.5,
        _ => rng.gen_range(0.25..1.5),
    }
}

pub struct BuiltCase {
    pub op: SpdOperator,
    pub traj: StaggeredTrajectory,
    pub recon: Reconstruction,
    pub v0: StateVector,
    pub forced: bool,
}

fn random_vector(op: &SpdOperator, rng: &mut ChaCha8Rng) -> StateVector {
    let coeffs = (0..op.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    op.vector(coeffs).expect("dimension matches")
}

pub fn build(params: &CaseParams) -> Result<BuiltCase> {
    let op = params.operator.build();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let u0 = random_vector(&op, &mut rng);
    let v0 = random_vector(&op, &mut rng);
    let shape = random_vector(&op, &mut rng);
    let omega = rng.gen_range(0.5..5.0);
    let k = params.courant / op.spectral_bound().sqrt();
    let amplitude = params.forcing;
    let forcing = FnSource::new(move |_: &SpdOperator, t: f64| Ok(shape.scaled(amplitude * (omega * t).cos())));
    let source: &dyn Source = if amplitude == 0.0 { &ZeroSource } else { &forcing };
    let traj = run(&op, params.formulation, &u0, &v0, source, k, params.n_steps)?;
    let rho = residuals(&op, &traj)?;
    let recon = reconstruct(&op, &traj, &rho)?;
    Ok(BuiltCase {
        op,
        traj,
        recon,
        v0,
        forced: amplitude != 0.0,
    })
}

/// Largest defect of each structural identity, relative to the run's size.
#[derive(Clone, Copy, Debug, Default)]
pub struct Defects {
    pub ghost: f64,
    pub midpoint: f64,
    pub continuity: f64,
    /// Leap-frog with `f = 0` only.
    pub energy: Option<f64>,
}

impl Defects {
    pub fn max(&self) -> f64 {
        self.ghost.max(self.midpoint).max(self.continuity).max(self.energy.unwrap_or(0.0))
    }
}

fn dist(a: &StateVector, b: &StateVector, scale: f64) -> f64 {
    (a - b).max_abs() / scale
}

pub fn defects(case: &BuiltCase) -> Result<Defects> {
    let BuiltCase { op, traj, recon, v0, .. } = case;
    let k = traj.k();
    let n = traj.n_steps() as i64;
    let u_scale = traj.max_abs().max(1.0);
    let v_scale = traj.velocities().iter().map(StateVector::max_abs).fold(1.0, f64::max);

    let ghost_v = StateVector::lincomb(2.0, v0, -1.0, traj.v_after(0));
    let ghost_u = StateVector::lincomb(1.0, traj.u(0), -k, traj.v_after(-1));
    let defect0 = step_defect(op, traj, 0)?;
    let force_scale = op.apply(traj.u(0))?.max_abs().max(traj.f(0).max_abs()).max(1.0);
    let ghost = dist(&ghost_v, traj.v_after(-1), v_scale)
        .max(dist(&ghost_u, traj.u(-1), u_scale))
        .max(defect0.max_abs() / (force_scale + v_scale / k));

    let mut midpoint: f64 = 0.0;
    for m in 0..=n {
        let t_node = m as f64 * k;
        midpoint = midpoint.max(dist(&recon.u_hat.eval(t_node)?, traj.u(m), u_scale));
        let t_half = (m as f64 + 0.5) * k;
        midpoint = midpoint.max(dist(&recon.v_hat.eval(t_half)?, traj.v_after(m), v_scale));
    }
    if recon.v_hat.grid().start() <= -0.5 * k {
        midpoint = midpoint.max(dist(&recon.v_hat.eval(-0.5 * k)?, traj.v_after(-1), v_scale));
    }

    let continuity = recon.u_hat.continuity_defect().max(recon.v_hat.continuity_defect());

    let energy = if matches!(traj.formulation(), Formulation::LeapFrog) && !case.forced {
        let e = discrete_energy(op, traj)?;
        let e_scale = e.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        Some(e.iter().map(|x| (x - e[0]).abs() / e_scale).fold(0.0, f64::max))
    } else {
        None
    };
    Ok(Defects {
        ghost,
        midpoint,
        continuity,
        energy,
    })
}
