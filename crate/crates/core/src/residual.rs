//! Piecewise constant perturbation terms `rho_U`, `rho_V` of the three
//! staggered formulations, the residuals of the reconstructed error
//! equation, and the estimator
//!
//! ```text
//! eta_1 = ( 2 |||e_R(0)|||^2 + 4 ( int_0^T |||(R_2, R_1 + R_f)||| dt )^2 )^{1/2}.
//! ```

use gauss_quad::GaussLegendre;
use serde::Serialize;

use crate::error::{contract, Error, Result};
use crate::operator::{SpdOperator, StatePair, StateVector};
use crate::reconstruct::{eval_piece, BreakpointGrid, Piece, PiecewiseStateFunction, Reconstruction};
use crate::scheme::{Formulation, Source, StaggeredTrajectory};

pub const DEFAULT_QUAD_POINTS: usize = 3;

/// `rho_U` on the staggered intervals `(t^{n-1/2}, t^{n+1/2}]`, `n = 0..=N`, and
/// `rho_V` on the node intervals `(t^n, t^{n+1}]`, `n = 0..N`.
#[derive(Clone, Debug)]
pub struct ResidualSet {
    pub rho_u: PiecewiseStateFunction,
    pub rho_v: PiecewiseStateFunction,
    pub formulation: Formulation,
    /// `f~^n`, `n = 0..=N`.
    pub modified_source: Vec<StateVector>,
}

impl ResidualSet {
    /// `max_n |||(0, rho_U^n)||| = max_n |rho_U^n|_h`.
    pub fn max_rho_u(&self, op: &SpdOperator) -> Result<f64> {
        self.rho_u
            .pieces()
            .iter()
            .map(|p| op.l2_norm(&p[0]))
            .try_fold(0.0_f64, |m, x| x.map(|x| m.max(x)))
    }

    /// `max_n |||(rho_V^{n+1/2}, 0)||| = max_n |A^{1/2} rho_V^{n+1/2}|`.
    pub fn max_rho_v(&self, op: &SpdOperator) -> Result<f64> {
        self.rho_v
            .pieces()
            .iter()
            .map(|p| op.energy_norm_of(&p[0], &op.zeros()))
            .try_fold(0.0_f64, |m, x| x.map(|x| m.max(x)))
    }
}

fn check_formulation(traj: &StaggeredTrajectory, requested: Formulation) -> Result<()> {
    let have = traj.formulation();
    let ok = if requested.q1() == 0.0 {
        have.q1() == 0.0
    } else {
        have == requested
    };
    if !ok {
        return Err(contract(format!(
            "residuals for {requested:?} requested on a trajectory produced by {have:?}"
        )));
    }
    Ok(())
}

fn residuals_with(
    op: &SpdOperator,
    traj: &StaggeredTrajectory,
    formulation: Formulation,
    u_coeff: f64,
) -> Result<ResidualSet> {
    check_formulation(traj, formulation)?;
    let k = traj.k();
    let n_steps = traj.n_steps() as i64;
    let q1 = formulation.q1();

    let rho_u = (0..=n_steps)
        .map(|n| {
            let second = StateVector::lincomb(1.0, traj.u(n + 1), 1.0, traj.u(n - 1)) - traj.u(n).scaled(2.0);
            let mut r = op.apply(&second)? * u_coeff;
            if q1 != 0.0 {
                let f_second = StateVector::lincomb(1.0, traj.f(n + 1), 1.0, traj.f(n - 1)) - traj.f(n).scaled(2.0);
                r.axpy(q1, &f_second);
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;

    let rho_v = (0..n_steps)
        .map(|n| {
            let second = StateVector::lincomb(1.0, traj.v_after(n + 1), 1.0, traj.v_after(n - 1))
                - traj.v_after(n).scaled(2.0);
            let mut r = second * -0.25;
            if let Formulation::Cosine2 { q1 } = formulation {
                if q1 != 0.0 {
                    let du = (traj.u(n + 1) - traj.u(n)) * (1.0 / k);
                    r.axpy(-k * k * q1, &op.apply(&du)?);
                }
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;

    let modified_source = (0..=n_steps).map(|n| traj.modified_source(n)).collect();
    Ok(ResidualSet {
        rho_u: PiecewiseStateFunction::constant(BreakpointGrid::half_nodes(k, -1, n_steps), rho_u)?,
        rho_v: PiecewiseStateFunction::constant(BreakpointGrid::nodes(k, 0, n_steps), rho_v)?,
        formulation,
        modified_source,
    })
}

/// `R_U^n = A(U^{n+1} - 2U^n + U^{n-1})/4`, `R_V^{n+1/2} = -(V^{n+3/2} - 2V^{n+1/2} + V^{n-1/2})/4`.
pub fn rho_leapfrog(op: &SpdOperator, traj: &StaggeredTrajectory) -> Result<ResidualSet> {
    residuals_with(op, traj, Formulation::LeapFrog, 0.25)
}

/// `R_U^{cos,n} = (1 - 4 q1)/4 A(U^{n+1} - 2U^n + U^{n-1}) + q1 (f^{n+1} - 2f^n + f^{n-1})`,
/// `R_V^{cos}` as for leap-frog.
pub fn rho_cosine1(op: &SpdOperator, traj: &StaggeredTrajectory, q1: f64) -> Result<ResidualSet> {
    residuals_with(op, traj, Formulation::Cosine1 { q1 }, (1.0 - 4.0 * q1) / 4.0)
}

/// `R_U^{cos,2,n} = A(U^{n+1} - 2U^n + U^{n-1})/4 + q1 (f^{n+1} - 2f^n + f^{n-1})`,
/// `R_V^{cos,2,n+1/2} = -k^2 q1 A (U^{n+1} - U^n)/k - (V^{n+3/2} - 2V^{n+1/2} + V^{n-1/2})/4`.
pub fn rho_cosine2(op: &SpdOperator, traj: &StaggeredTrajectory, q1: f64) -> Result<ResidualSet> {
    residuals_with(op, traj, Formulation::Cosine2 { q1 }, 0.25)
}

/// Residual set matching the trajectory's own formulation.
pub fn residuals(op: &SpdOperator, traj: &StaggeredTrajectory) -> Result<ResidualSet> {
    match traj.formulation() {
        Formulation::LeapFrog => rho_leapfrog(op, traj),
        Formulation::Cosine1 { q1 } => rho_cosine1(op, traj, q1),
        Formulation::Cosine2 { q1 } => rho_cosine2(op, traj, q1),
    }
}

/// `R_1 = -A(U^ - U_1) - rho_U` and `R_2 = V^ - V_1 - rho_V` on the union
/// grid over `[0, T]`; `R_f = f - I~_1 f` is evaluated on demand.
#[derive(Clone, Debug)]
pub struct ResidualFunctions {
    pub r1: PiecewiseStateFunction,
    pub r2: PiecewiseStateFunction,
    pub source_interp: PiecewiseStateFunction,
}

pub fn residual_functions(
    op: &SpdOperator,
    traj: &StaggeredTrajectory,
    recon: &Reconstruction,
    rho: &ResidualSet,
) -> Result<ResidualFunctions> {
    let k = traj.k();
    let last = 2 * traj.n_steps() as i64;
    let union = BreakpointGrid::union(k, 0, last);
    let mut r1 = Vec::with_capacity(last as usize);
    let mut r2 = Vec::with_capacity(last as usize);
    for j in 0..last {
        let u_hat = recon.u_hat.on_half_step(j)?;
        let u1 = recon.interpolants.u1.on_half_step(j)?;
        let rho_u = rho.rho_u.on_half_step(j)?;
        let mut piece1: Vec<StateVector> = Vec::with_capacity(3);
        for d in 0..3 {
            let mut c = -op.apply(&(&u_hat[d] - &u1[d]))?;
            c -= &rho_u[d];
            piece1.push(c);
        }
        let v_hat = recon.v_hat.on_half_step(j)?;
        let v1 = recon.interpolants.v1.on_half_step(j)?;
        let rho_v = rho.rho_v.on_half_step(j)?;
        let piece2: Vec<StateVector> = (0..3).map(|d| &(&v_hat[d] - &v1[d]) - &rho_v[d]).collect();
        r1.push(into_piece(piece1));
        r2.push(into_piece(piece2));
    }
    Ok(ResidualFunctions {
        r1: PiecewiseStateFunction::new(union, r1, false)?,
        r2: PiecewiseStateFunction::new(union, r2, false)?,
        source_interp: recon.source_interp.clone(),
    })
}

fn into_piece(v: Vec<StateVector>) -> Piece {
    let mut it = v.into_iter();
    [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
}

/// `e_R(0) = (u0 - U^(0), v0 - V^(0))`.
pub fn initial_reconstruction_error(
    u0: &StateVector,
    v0: &StateVector,
    recon: &Reconstruction,
) -> Result<StatePair> {
    let u_hat0 = recon.u_hat.eval(0.0)?;
    let v_hat0 = recon.v_hat.eval(0.0)?;
    StatePair::new(u0 - &u_hat0, v0 - &v_hat0)
}

#[derive(Clone, Debug, Serialize)]
pub struct IntervalContribution {
    pub index: usize,
    pub t_left: f64,
    pub t_right: f64,
    pub contribution: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimatorReport {
    pub eta1: f64,
    /// `int_0^{up_to} |||(R_2, R_1 + R_f)|||`.
    pub integral: f64,
    pub initial_error: f64,
    pub intervals: Vec<IntervalContribution>,
    /// `(t^m, eta_1 over [0, t^m])` at every node up to `up_to`.
    pub node_profile: Vec<(f64, f64)>,
    pub quad_points: usize,
}

fn combine(initial_error: f64, integral: f64) -> f64 {
    (2.0 * initial_error * initial_error + 4.0 * integral * integral).sqrt()
}

/// Relative accuracy demanded of every panel integral.
const PANEL_REL_TOL: f64 = 1e-13;
/// Panel errors below this fraction of `max g * width` are accepted.
const PANEL_FLOOR: f64 = 1e-14;
const MAX_BISECTIONS: u32 = 24;
/// Rounding noise of a forced integrand, in units of `eps` times the size of
/// the terms it combines.
const NOISE_FACTOR: f64 = 64.0;

fn gauss_rule<G>(g: &mut G, a: f64, b: f64, pairs: &[(f64, f64)]) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
{
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for &(x, w) in pairs {
        sum += w * g(a + half * (x + 1.0))?;
    }
    Ok(half * sum)
}

/// Adaptive composite Gauss-Legendre integration of `g >= 0` over `[0, width]`:
/// a panel is accepted once the `n`-point and `2n`-point rules agree, and
/// bisected otherwise. `|||(R_2, R_1 + R_f)|||` may nearly vanish inside a
/// subinterval, where it has a kink that no fixed rule resolves. Panel errors
/// below `noise * width` (the rounding level of `g`) are accepted.
fn integrate_adaptive<G>(g: &mut G, width: f64, base: &[(f64, f64)], doubled: &[(f64, f64)], noise: f64) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
{
    let mut g_max = 0.0_f64;
    for &(x, _) in doubled {
        g_max = g_max.max(g(0.5 * width * (x + 1.0))?);
    }
    let whole = gauss_rule(g, 0.0, width, doubled)?;
    if g_max == 0.0 && whole == 0.0 {
        return Ok(0.0);
    }
    let tol = PANEL_REL_TOL * whole.abs();
    let floor = (PANEL_FLOOR * g_max).max(noise);
    // depth-first, left child first: summation runs left to right
    let mut stack = vec![(0.0, width, 0u32)];
    let mut total = 0.0;
    while let Some((a, b, depth)) = stack.pop() {
        let coarse = gauss_rule(g, a, b, base)?;
        let fine = gauss_rule(g, a, b, doubled)?;
        let share = (tol / width).max(floor) * (b - a);
        if (coarse - fine).abs() <= share || depth >= MAX_BISECTIONS {
            total += fine;
        } else {
            let mid = 0.5 * (a + b);
            stack.push((mid, b, depth + 1));
            stack.push((a, mid, depth + 1));
        }
    }
    Ok(total)
}

/// Upper triangular `R` with `|||(r_2(s), r_1(s))||| = |R (1, s, s^2)|` for
/// quadratic pieces, by modified Gram-Schmidt in the energy inner product.
/// Avoids the cancellation of expanding the squared norm in monomials.
fn energy_factor(op: &SpdOperator, r1: &Piece, r2: &Piece) -> Result<[[f64; 3]; 3]> {
    let w = op.mass_weight();
    // columns (x2, x1) with metric images (A x2, x1)
    let mut cols: Vec<(StateVector, StateVector, StateVector)> = Vec::with_capacity(3);
    for d in 0..3 {
        cols.push((r2[d].clone(), op.apply(&r2[d])?, r1[d].clone()));
    }
    let inner = |p: &(StateVector, StateVector, StateVector), q: &(StateVector, StateVector, StateVector)| {
        w * (p.1.dot(&q.0) + p.2.dot(&q.2))
    };
    let mut r = [[0.0; 3]; 3];
    let mut basis: Vec<Option<(StateVector, StateVector, StateVector)>> = Vec::with_capacity(3);
    for d in 0..3 {
        let mut c = cols[d].clone();
        for (e, q) in basis.iter().enumerate() {
            if let Some(q) = q {
                let coef = inner(&c, q);
                r[e][d] = coef;
                c.0.axpy(-coef, &q.0);
                c.1.axpy(-coef, &q.1);
                c.2.axpy(-coef, &q.2);
            }
        }
        let norm = inner(&c, &c).max(0.0).sqrt();
        r[d][d] = norm;
        basis.push(if norm > 0.0 {
            let inv = 1.0 / norm;
            Some((c.0.scaled(inv), c.1.scaled(inv), c.2.scaled(inv)))
        } else {
            None
        });
    }
    Ok(r)
}

/// Evaluates `eta_1` over `[0, up_to]`. On every `k/2` subinterval the time
/// integral uses `quad_points`-point Gauss-Legendre panels, refined until
/// doubling the points no longer changes a panel beyond a relative `1e-13`.
/// `quad_points` must be at least 1.
/// Contributions are summed left to right.
pub fn eta1(
    op: &SpdOperator,
    res: &ResidualFunctions,
    source: &dyn Source,
    e_r0: &StatePair,
    up_to: f64,
    quad_points: usize,
) -> Result<EstimatorReport> {
    let grid = *res.r1.grid();
    let t_end = grid.end();
    if !(up_to > 0.0 && up_to <= t_end * (1.0 + 1e-12)) {
        return Err(contract(format!("up_to = {up_to} must lie in (0, {t_end}]")));
    }
    let rule_of = |n: usize| {
        GaussLegendre::new(n)
            .map_err(|e| Error::Config(format!("invalid number of quadrature points {quad_points}: {e}")))
    };
    let base: Vec<(f64, f64)> = rule_of(quad_points)?.as_node_weight_pairs().to_vec();
    let doubled: Vec<(f64, f64)> = rule_of(2 * quad_points)?.as_node_weight_pairs().to_vec();
    let h = grid.spacing();
    let initial_error = op.energy_norm(e_r0)?;

    let mut intervals = Vec::new();
    let mut node_profile = vec![(0.0, combine(initial_error, 0.0))];
    let mut integral = 0.0;
    for j in 0..grid.n_intervals() {
        let t_left = grid.point(j);
        if t_left >= up_to * (1.0 - 1e-14) {
            break;
        }
        let full = t_left + h <= up_to * (1.0 + 1e-12);
        let width = if full { h } else { up_to - t_left };
        let r1 = res.r1.piece(j);
        let r2 = res.r2.piece(j);
        let contribution = if source.is_zero() {
            let r = energy_factor(op, r1, r2)?;
            let mut g = |s: f64| {
                let z = [r[0][0] + s * (r[0][1] + s * r[0][2]), s * (r[1][1] + s * r[1][2]), s * s * r[2][2]];
                Ok(z[0].hypot(z[1]).hypot(z[2]))
            };
            integrate_adaptive(&mut g, width, &base, &doubled, 0.0)?
        } else {
            let a_r2: Vec<StateVector> = r2.iter().map(|c| op.apply(c)).collect::<Result<_>>()?;
            let a_r2: Piece = into_piece(a_r2);
            let f_interp = res.source_interp.on_half_step(grid.half_index(j))?;
            let w = op.mass_weight();
            let mut noise = 0.0_f64;
            for &(x, _) in &doubled {
                let s = 0.5 * width * (x + 1.0);
                let terms = [
                    eval_piece(r1, s).norm(),
                    source.sample(op, t_left + s)?.norm(),
                    eval_piece(&f_interp, s).norm(),
                ];
                let energy = (eval_piece(&a_r2, s).dot(&eval_piece(r2, s))).abs().sqrt();
                noise = noise.max(w.sqrt() * (terms.iter().sum::<f64>() + energy));
            }
            noise *= NOISE_FACTOR * f64::EPSILON;
            let mut g = |s: f64| -> Result<f64> {
                let v2 = eval_piece(r2, s);
                let mut v1 = eval_piece(r1, s);
                v1 += &source.sample(op, t_left + s)?;
                v1 -= &eval_piece(&f_interp, s);
                Ok((w * (eval_piece(&a_r2, s).dot(&v2) + v1.dot(&v1))).max(0.0).sqrt())
            };
            integrate_adaptive(&mut g, width, &base, &doubled, noise)?
        };
        integral += contribution;
        intervals.push(IntervalContribution {
            index: j,
            t_left,
            t_right: t_left + width,
            contribution,
        });
        if grid.half_index(j + 1) % 2 == 0 && full {
            node_profile.push((grid.point(j + 1), combine(initial_error, integral)));
        }
    }
    Ok(EstimatorReport {
        eta1: combine(initial_error, integral),
        integral,
        initial_error,
        intervals,
        node_profile,
        quad_points,
    })
}
