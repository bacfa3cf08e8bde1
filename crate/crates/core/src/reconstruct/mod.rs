//! Time interpolants of a staggered trajectory and the continuous
//! piecewise-quadratic reconstructions `U^`, `V^`.
//!
//! The reconstructions integrate the scheme's own data,
//!
//! ```text
//! V^(t) = V^{n-1/2} + int_{t^{n-1/2}}^t (-A U_1 + I~_1 f + rho_U)   on (t^{n-1/2}, t^{n+1/2}]
//! U^(t) = U^{n-1}   + int_{t^{n-1}}^t   (V_1 + rho_V)               on (t^{n-1}, t^n]
//! ```
//!
//! in closed form, so that the mid-point rule returns the next discrete value
//! exactly and both functions are globally continuous.

mod piecewise;

pub use piecewise::{eval_piece, BreakpointGrid, GridTag, Piece, PiecewiseStateFunction};

use crate::error::{contract, Result};
use crate::operator::{SpdOperator, StateVector};
use crate::residual::ResidualSet;
use crate::scheme::StaggeredTrajectory;

/// `U^{n+1/2} = (U^{n+1} + U^n)/2` for `n = -1..=N` and
/// `V^n = (V^{n+1/2} + V^{n-1/2})/2` for `n = 0..=N`.
#[derive(Clone, Debug)]
pub struct MidpointValues {
    u_half: Vec<StateVector>,
    v_nodes: Vec<StateVector>,
}

impl MidpointValues {
    /// `U^{n+1/2}`, `-1 <= n <= N`.
    pub fn u_half(&self, n: i64) -> &StateVector {
        &self.u_half[(n + 1) as usize]
    }

    /// `V^n`, `0 <= n <= N`.
    pub fn v_node(&self, n: i64) -> &StateVector {
        &self.v_nodes[n as usize]
    }
}

pub fn midpoint_values(traj: &StaggeredTrajectory) -> MidpointValues {
    let n_steps = traj.n_steps() as i64;
    let u_half = (-1..=n_steps)
        .map(|n| StateVector::lincomb(0.5, traj.u(n + 1), 0.5, traj.u(n)))
        .collect();
    let v_nodes = (0..=n_steps)
        .map(|n| StateVector::lincomb(0.5, traj.v_after(n), 0.5, traj.v_after(n - 1)))
        .collect();
    MidpointValues { u_half, v_nodes }
}

/// The four continuous piecewise linear interpolants of a run.
#[derive(Clone, Debug)]
pub struct LinearInterpolants {
    /// Through `U^n` at `t^n`, `n = -1..=N+1`.
    pub u: PiecewiseStateFunction,
    /// Through `V^{n+1/2}` at `t^{n+1/2}`, `n = -1..=N`.
    pub v: PiecewiseStateFunction,
    /// Through `U^{n+1/2}` at `t^{n+1/2}`, `n = -1..=N`.
    pub u1: PiecewiseStateFunction,
    /// Through `V^n` at `t^n`, `n = 0..=N`.
    pub v1: PiecewiseStateFunction,
}

pub fn build_linear_interpolants(traj: &StaggeredTrajectory) -> Result<LinearInterpolants> {
    let k = traj.k();
    let n = traj.n_steps() as i64;
    let mid = midpoint_values(traj);
    Ok(LinearInterpolants {
        u: PiecewiseStateFunction::linear_interpolant(BreakpointGrid::nodes(k, -1, n + 1), traj.displacements())?,
        v: PiecewiseStateFunction::linear_interpolant(BreakpointGrid::half_nodes(k, -1, n), traj.velocities())?,
        u1: PiecewiseStateFunction::linear_interpolant(BreakpointGrid::half_nodes(k, -1, n), &mid.u_half)?,
        v1: PiecewiseStateFunction::linear_interpolant(BreakpointGrid::nodes(k, 0, n), &mid.v_nodes)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstantInterpolator {
    /// Midpoint values on the node intervals `(t^{n-1}, t^n]`.
    I0,
    /// Midpoint values on the staggered intervals `(t^{n-1/2}, t^{n+1/2}]`.
    ITilde0,
}

/// Piecewise constant midpoint interpolation of `source` on its own mesh.
/// `I0` expects a function on node intervals, `ITilde0` one on staggered
/// intervals.
pub fn interpolate_constant(
    which: ConstantInterpolator,
    source: &PiecewiseStateFunction,
) -> Result<PiecewiseStateFunction> {
    let expected = match which {
        ConstantInterpolator::I0 => GridTag::Nodes,
        ConstantInterpolator::ITilde0 => GridTag::HalfNodes,
    };
    if source.grid().tag() != expected {
        return Err(contract(format!(
            "{which:?} needs a function on {expected:?} intervals, got {:?}",
            source.grid().tag()
        )));
    }
    Ok(source.midpoint_constant())
}

/// `I~_1 f`: on each staggered interval `(t^{n-1/2}, t^{n+1/2}]`, `n = 0..=N`,
/// the linear function with value `f^n` at `t^n` and central-difference slope
/// `(f^{n+1} - f^{n-1}) / (2k)`. `samples` holds `f^{-1}..f^{N+1}`.
///
/// Being linear on each staggered interval and centred at `t^n`, it integrates
/// to exactly `k f^n` there.
pub fn interpolate_source_linear(samples: &[StateVector], k: f64) -> Result<PiecewiseStateFunction> {
    if samples.len() < 3 {
        return Err(contract("need samples f^-1..f^(N+1) with N >= 1"));
    }
    let n_last = samples.len() as i64 - 3;
    let grid = BreakpointGrid::half_nodes(k, -1, n_last);
    let pieces = samples
        .windows(3)
        .map(|w| {
            let slope = (&w[2] - &w[0]) * (0.5 / k);
            let left = StateVector::lincomb(1.0, &w[1], -0.5 * k, &slope);
            [left, slope, StateVector::zeros(w[1].basis())]
        })
        .collect();
    PiecewiseStateFunction::new(grid, pieces, false)
}

fn expect_grid(f: &PiecewiseStateFunction, expected: BreakpointGrid, what: &str) -> Result<()> {
    if !f.grid().same_points(&expected) {
        return Err(contract(format!(
            "{what} is defined on [{}, {}] with spacing {}, expected [{}, {}] with spacing {}",
            f.grid().start(),
            f.grid().end(),
            f.grid().spacing(),
            expected.start(),
            expected.end(),
            expected.spacing()
        )));
    }
    Ok(())
}

/// `V^` on `(t^{-1/2}, t^{N+1/2}]`, one quadratic per staggered interval.
pub fn reconstruct_v_hat(
    op: &SpdOperator,
    traj: &StaggeredTrajectory,
    u1: &PiecewiseStateFunction,
    source_interp: &PiecewiseStateFunction,
    rho_u: &PiecewiseStateFunction,
) -> Result<PiecewiseStateFunction> {
    let grid = BreakpointGrid::half_nodes(traj.k(), -1, traj.n_steps() as i64);
    expect_grid(u1, grid, "U_1")?;
    expect_grid(source_interp, grid, "I~_1 f")?;
    expect_grid(rho_u, grid, "rho_U")?;
    if rho_u.degree() > 0 || u1.degree() > 1 || source_interp.degree() > 1 {
        return Err(contract("V^ expects linear U_1, I~_1 f and constant rho_U"));
    }
    let pieces = (0..grid.n_intervals())
        .map(|p| {
            let [u0, u_slope, _] = u1.piece(p);
            let [f0, f_slope, _] = source_interp.piece(p);
            let rho = &rho_u.piece(p)[0];
            let mut g0 = -op.apply(u0)?;
            g0 += f0;
            g0 += rho;
            let mut g1 = -op.apply(u_slope)?;
            g1 += f_slope;
            let start = traj.v_after(p as i64 - 1).clone();
            Ok([start, g0, g1 * 0.5])
        })
        .collect::<Result<Vec<_>>>()?;
    PiecewiseStateFunction::new(grid, pieces, true)
}

/// `U^` on `(t^0, t^N]`, one quadratic per node interval.
pub fn reconstruct_u_hat(
    traj: &StaggeredTrajectory,
    v1: &PiecewiseStateFunction,
    rho_v: &PiecewiseStateFunction,
) -> Result<PiecewiseStateFunction> {
    let grid = BreakpointGrid::nodes(traj.k(), 0, traj.n_steps() as i64);
    expect_grid(v1, grid, "V_1")?;
    expect_grid(rho_v, grid, "rho_V")?;
    if rho_v.degree() > 0 || v1.degree() > 1 {
        return Err(contract("U^ expects linear V_1 and constant rho_V"));
    }
    let pieces = (0..grid.n_intervals())
        .map(|p| {
            let [v0, v_slope, _] = v1.piece(p);
            let g0 = v0 + &rho_v.piece(p)[0];
            [traj.u(p as i64).clone(), g0, v_slope * 0.5]
        })
        .collect();
    PiecewiseStateFunction::new(grid, pieces, true)
}

/// Everything built on top of a trajectory for error estimation.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub interpolants: LinearInterpolants,
    pub source_interp: PiecewiseStateFunction,
    pub u_hat: PiecewiseStateFunction,
    pub v_hat: PiecewiseStateFunction,
}

pub fn reconstruct(op: &SpdOperator, traj: &StaggeredTrajectory, rho: &ResidualSet) -> Result<Reconstruction> {
    let interpolants = build_linear_interpolants(traj)?;
    let samples: Vec<StateVector> = (-1..=traj.n_steps() as i64 + 1).map(|n| traj.f(n).clone()).collect();
    let source_interp = interpolate_source_linear(&samples, traj.k())?;
    let v_hat = reconstruct_v_hat(op, traj, &interpolants.u1, &source_interp, &rho.rho_u)?;
    let u_hat = reconstruct_u_hat(traj, &interpolants.v1, &rho.rho_v)?;
    Ok(Reconstruction {
        interpolants,
        source_interp,
        u_hat,
        v_hat,
    })
}
