//! Leap-frog and second-order cosine two-step integrators, written out as
//! staggered displacement/velocity trajectories.
//!
//! Every run stores the ghost values `U^{-1}`, `V^{-1/2}` and one step past the
//! final time (`U^{N+1}`, `V^{N+1/2}`), which the reconstructions need.

use serde::{Deserialize, Serialize};

use crate::error::{config, contract, Result};
use crate::operator::{SpdOperator, StateVector};

/// A time-dependent right-hand side `f(t)`.
pub trait Source: Sync {
    fn sample(&self, op: &SpdOperator, t: f64) -> Result<StateVector>;

    /// `true` when `f` vanishes identically, which lets callers skip work.
    fn is_zero(&self) -> bool {
        false
    }

    /// Whether `f` may be evaluated at negative times (needed for `f(-k)`).
    fn defined_before_start(&self) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroSource;

impl Source for ZeroSource {
    fn sample(&self, op: &SpdOperator, _t: f64) -> Result<StateVector> {
        Ok(op.zeros())
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// Source given by a closure.
pub struct FnSource<F> {
    f: F,
    before_start: bool,
}

impl<F> FnSource<F>
where
    F: Fn(&SpdOperator, f64) -> Result<StateVector> + Sync,
{
    pub fn new(f: F) -> Self {
        Self { f, before_start: true }
    }

    /// A source that must not be evaluated at negative times; `f(-k)` is then
    /// replaced by zero.
    pub fn from_start(f: F) -> Self {
        Self { f, before_start: false }
    }
}

impl<F> Source for FnSource<F>
where
    F: Fn(&SpdOperator, f64) -> Result<StateVector> + Sync,
{
    fn sample(&self, op: &SpdOperator, t: f64) -> Result<StateVector> {
        (self.f)(op, t)
    }

    fn defined_before_start(&self) -> bool {
        self.before_start
    }
}

/// How the sample `f^{-1}` was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceExtension {
    Evaluated,
    ZeroExtended,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SchemeFamily {
    LeapFrog,
    /// `U'' ~ d^2 U + q1 A U^{n+1} - 2 p1 A U^n + q1 A U^{n-1}` with
    /// `p1 = q1 - 1/2`.
    Cosine { q1: f64 },
}

impl SchemeFamily {
    pub fn q1(&self) -> f64 {
        match *self {
            SchemeFamily::LeapFrog => 0.0,
            SchemeFamily::Cosine { q1 } => q1,
        }
    }

    pub fn p1(&self) -> f64 {
        self.q1() - 0.5
    }

    /// Amplification `r(x) = (1 + p1 x^2) / (1 + q1 x^2)` approximating `cos x`.
    pub fn cosine_approximation(&self, x: f64) -> f64 {
        let x2 = x * x;
        (1.0 + self.p1() * x2) / (1.0 + self.q1() * x2)
    }

    /// Whether every mode with `k sqrt(lambda) <= k sqrt(lambda_max)` stays
    /// bounded.
    pub fn is_stable_for(&self, k_sqrt_lambda_max: f64) -> bool {
        let q1 = self.q1();
        if q1 >= 0.25 {
            return true;
        }
        k_sqrt_lambda_max < 2.0 / (1.0 - 4.0 * q1).sqrt()
    }
}

/// The scheme together with the definition of the staggered velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "formulation", rename_all = "snake_case")]
pub enum Formulation {
    /// Leap-frog with `V^{n+1/2} = (U^{n+1} - U^n) / k`.
    LeapFrog,
    /// Cosine scheme with `V^{n+1/2} = (U^{n+1} - U^n) / k`.
    Cosine1 { q1: f64 },
    /// Cosine scheme with `V^{n+1/2} = (I + k^2 q1 A)(U^{n+1} - U^n) / k`.
    Cosine2 { q1: f64 },
}

impl Formulation {
    pub fn family(&self) -> SchemeFamily {
        match *self {
            Formulation::LeapFrog => SchemeFamily::LeapFrog,
            Formulation::Cosine1 { q1 } | Formulation::Cosine2 { q1 } => SchemeFamily::Cosine { q1 },
        }
    }

    pub fn q1(&self) -> f64 {
        self.family().q1()
    }

    pub fn p1(&self) -> f64 {
        self.family().p1()
    }

    pub fn uses_shifted_velocity(&self) -> bool {
        matches!(self, Formulation::Cosine2 { .. })
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let q1 = self.q1();
        if !q1.is_finite() || q1 < 0.0 {
            return Err(config(format!("q1 must be finite and nonnegative, got {q1}")));
        }
        Ok(())
    }
}

/// Discrete solution on the staggered time grid.
#[derive(Clone, Debug)]
pub struct StaggeredTrajectory {
    k: f64,
    n_steps: usize,
    /// `U^n` for `n = -1..=N+1`, stored at `n + 1`.
    u: Vec<StateVector>,
    /// `V^{n+1/2}` for `n = -1..=N`, stored at `n + 1`.
    v: Vec<StateVector>,
    /// `f^n` for `n = -1..=N+1`, stored at `n + 1`.
    f: Vec<StateVector>,
    v0: StateVector,
    formulation: Formulation,
    source_extension: SourceExtension,
    source_is_zero: bool,
}

impl StaggeredTrajectory {
    /// Assembles a trajectory from raw sequences, checking their lengths.
    /// `u` holds `U^{-1}..U^{N+1}`, `v` holds `V^{-1/2}..V^{N+1/2}` and `f`
    /// holds `f^{-1}..f^{N+1}`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        k: f64,
        n_steps: usize,
        u: Vec<StateVector>,
        v: Vec<StateVector>,
        f: Vec<StateVector>,
        v0: StateVector,
        formulation: Formulation,
        source_extension: SourceExtension,
    ) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(contract(format!("time step must be positive, got {k}")));
        }
        if u.len() != n_steps + 3 {
            return Err(contract(format!(
                "expected U^-1..U^(N+1) ({} states), got {}; the estimator requires the extra step U^(N+1)",
                n_steps + 3,
                u.len()
            )));
        }
        if v.len() != n_steps + 2 {
            return Err(contract(format!(
                "expected V^-1/2..V^(N+1/2) ({} states), got {}; the estimator requires the extra step V^(N+1/2)",
                n_steps + 2,
                v.len()
            )));
        }
        if f.len() != n_steps + 3 {
            return Err(contract(format!("expected f^-1..f^(N+1) ({} samples), got {}", n_steps + 3, f.len())));
        }
        let basis = v0.basis();
        if u.iter().chain(&v).chain(&f).any(|x| x.basis() != basis) {
            return Err(contract("trajectory states live in different bases"));
        }
        let source_is_zero = f.iter().all(StateVector::is_zero);
        Ok(Self {
            k,
            n_steps,
            u,
            v,
            f,
            v0,
            formulation,
            source_extension,
            source_is_zero,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn final_time(&self) -> f64 {
        self.n_steps as f64 * self.k
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    pub fn source_extension(&self) -> SourceExtension {
        self.source_extension
    }

    pub fn source_is_zero(&self) -> bool {
        self.source_is_zero
    }

    pub fn v0(&self) -> &StateVector {
        &self.v0
    }

    /// `U^n`, `-1 <= n <= N + 1`.
    pub fn u(&self, n: i64) -> &StateVector {
        &self.u[(n + 1) as usize]
    }

    /// `V^{n+1/2}`, `-1 <= n <= N`.
    pub fn v_after(&self, n: i64) -> &StateVector {
        &self.v[(n + 1) as usize]
    }

    /// `f^n`, `-1 <= n <= N + 1`.
    pub fn f(&self, n: i64) -> &StateVector {
        &self.f[(n + 1) as usize]
    }

    pub fn node_time(&self, n: i64) -> f64 {
        n as f64 * self.k
    }

    pub fn displacements(&self) -> &[StateVector] {
        &self.u
    }

    pub fn velocities(&self) -> &[StateVector] {
        &self.v
    }

    /// Largest coefficient magnitude over all stored displacements and
    /// velocities.
    pub fn max_abs(&self) -> f64 {
        self.u.iter().chain(&self.v).map(StateVector::max_abs).fold(0.0, f64::max)
    }

    /// `f~^n = q1 f^{n+1} - 2 p1 f^n + q1 f^{n-1}`, the source seen by the
    /// cosine schemes; equal to `f^n` for leap-frog.
    pub fn modified_source(&self, n: i64) -> StateVector {
        modified_source(self.formulation.family(), self.f(n - 1), self.f(n), self.f(n + 1))
    }
}

fn modified_source(
    family: SchemeFamily,
    f_prev: &StateVector,
    f_curr: &StateVector,
    f_next: &StateVector,
) -> StateVector {
    let q1 = family.q1();
    if q1 == 0.0 {
        return f_curr.clone();
    }
    let mut out = f_curr.scaled(-2.0 * family.p1());
    out.axpy(q1, f_next);
    out.axpy(q1, f_prev);
    out
}

/// Leap-frog starting value `U^1 = U^0 + k v0 + (k^2 / 2)(f^0 - A U^0)`.
pub fn initial_step(
    op: &SpdOperator,
    u0: &StateVector,
    v0: &StateVector,
    f0: &StateVector,
    k: f64,
) -> Result<StateVector> {
    op.check(u0)?;
    op.check(v0)?;
    op.check(f0)?;
    let mut u1 = u0.clone();
    u1.axpy(k, v0);
    let force = f0 - &op.apply(u0)?;
    u1.axpy(0.5 * k * k, &force);
    Ok(u1)
}

/// Starting value for a given formulation. Leap-frog uses [`initial_step`];
/// the cosine formulations pick `U^1` so that their own scheme holds at
/// `n = 0` with the ghost velocity `V^{-1/2} = 2 v0 - V^{1/2}`:
///
/// * Formulation 1: `(U^1 - U^0)/k = v0 + (k/2)(I + k^2 q1 A)^{-1}(f~^0 - A U^0)`
/// * Formulation 2: `(I + k^2 q1 A)(U^1 - U^0)/k = v0 + (k/2)(f~^0 - A U^0)`
///
/// Both reduce to [`initial_step`] at `q1 = 0`.
#[allow(clippy::too_many_arguments)]
pub fn starting_step(
    op: &SpdOperator,
    formulation: Formulation,
    u0: &StateVector,
    v0: &StateVector,
    f_prev: &StateVector,
    f0: &StateVector,
    f_next: &StateVector,
    k: f64,
) -> Result<StateVector> {
    let q1 = formulation.q1();
    if q1 == 0.0 {
        return initial_step(op, u0, v0, f0, k);
    }
    let alpha = k * k * q1;
    let force = modified_source(formulation.family(), f_prev, f0, f_next) - op.apply(u0)?;
    let slope = match formulation {
        Formulation::LeapFrog | Formulation::Cosine1 { .. } => {
            let mut s = v0.clone();
            s.axpy(0.5 * k, &op.solve_shifted(alpha, &force)?);
            s
        }
        Formulation::Cosine2 { .. } => {
            let mut rhs = v0.clone();
            rhs.axpy(0.5 * k, &force);
            op.solve_shifted(alpha, &rhs)?
        }
    };
    let mut u1 = u0.clone();
    u1.axpy(k, &slope);
    Ok(u1)
}

/// One step of the two-step recurrence, returning `U^{n+1}`.
///
/// Leap-frog: `U^{n+1} = 2U^n - U^{n-1} + k^2 (f^n - A U^n)`.
/// Cosine: `(I + k^2 q1 A)(U^{n+1} - 2U^n + U^{n-1}) = k^2 (f~^n - A U^n)`,
/// which is the cosine scheme rewritten with `p1 = q1 - 1/2`.
#[allow(clippy::too_many_arguments)]
pub fn advance(
    op: &SpdOperator,
    scheme: SchemeFamily,
    u_prev: &StateVector,
    u_curr: &StateVector,
    f_prev: &StateVector,
    f_curr: &StateVector,
    f_next: &StateVector,
    k: f64,
) -> Result<StateVector> {
    if !(k.is_finite() && k > 0.0) {
        return Err(contract(format!("time step must be positive, got {k}")));
    }
    op.check(u_prev)?;
    let q1 = scheme.q1();
    if !(q1.is_finite() && q1 >= 0.0) {
        return Err(contract(format!("q1 must be nonnegative, got {q1}")));
    }
    let force = modified_source(scheme, f_prev, f_curr, f_next) - op.apply(u_curr)?;
    let second_diff = op.solve_shifted(k * k * q1, &(force * (k * k)))?;
    let mut next = u_curr.scaled(2.0);
    next -= u_prev;
    next += &second_diff;
    Ok(next)
}

/// Runs `n_steps` steps of size `k` from `(u0, v0)`, plus the extra step.
pub fn run(
    op: &SpdOperator,
    formulation: Formulation,
    u0: &StateVector,
    v0: &StateVector,
    source: &dyn Source,
    k: f64,
    n_steps: usize,
) -> Result<StaggeredTrajectory> {
    formulation.validate()?;
    if n_steps < 2 {
        return Err(config(format!("at least 2 time steps are required, got {n_steps}")));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(config(format!("time step must be positive, got {k}")));
    }
    op.check(u0)?;
    op.check(v0)?;

    let (f_minus, source_extension) = if source.is_zero() {
        (op.zeros(), SourceExtension::Evaluated)
    } else if source.defined_before_start() {
        (source.sample(op, -k)?, SourceExtension::Evaluated)
    } else {
        (op.zeros(), SourceExtension::ZeroExtended)
    };
    let mut f = Vec::with_capacity(n_steps + 3);
    f.push(f_minus);
    for n in 0..=n_steps + 1 {
        let sample = if source.is_zero() {
            op.zeros()
        } else {
            source.sample(op, n as f64 * k)?
        };
        op.check(&sample)?;
        f.push(sample);
    }
    let fs = |n: i64| &f[(n + 1) as usize];

    // U^0 .. U^{N+1}
    let mut u: Vec<StateVector> = Vec::with_capacity(n_steps + 3);
    u.push(u0.clone());
    u.push(starting_step(op, formulation, u0, v0, fs(-1), fs(0), fs(1), k)?);
    let family = formulation.family();
    for n in 1..=n_steps {
        let next = advance(op, family, &u[n - 1], &u[n], fs(n as i64 - 1), fs(n as i64), fs(n as i64 + 1), k)?;
        u.push(next);
    }

    // V^{1/2} .. V^{N+1/2}
    let alpha = k * k * formulation.q1();
    let mut v: Vec<StateVector> = Vec::with_capacity(n_steps + 2);
    v.push(op.zeros());
    for n in 0..=n_steps {
        let diff = (&u[n + 1] - &u[n]) * (1.0 / k);
        let vel = if formulation.uses_shifted_velocity() {
            let mut shifted = op.apply(&diff)?;
            shifted = shifted * alpha;
            shifted += &diff;
            shifted
        } else {
            diff
        };
        v.push(vel);
    }
    // ghosts
    v[0] = StateVector::lincomb(2.0, v0, -1.0, &v[1]);
    let u_ghost = StateVector::lincomb(1.0, &u[0], -k, &v[0]);
    u.insert(0, u_ghost);

    StaggeredTrajectory::from_parts(k, n_steps, u, v, f, v0.clone(), formulation, source_extension)
}

/// Velocities from the recurrence `V^{n+1/2} = V^{n-1/2} + k (f^n - A U^n)`,
/// `n = 0..=N`, started from the trajectory's ghost `V^{-1/2}`. For leap-frog
/// this reproduces the stored difference quotients.
pub fn leapfrog_velocity_recurrence(op: &SpdOperator, traj: &StaggeredTrajectory) -> Result<Vec<StateVector>> {
    let mut out = Vec::with_capacity(traj.n_steps + 2);
    out.push(traj.v_after(-1).clone());
    for n in 0..=traj.n_steps as i64 {
        let mut next = out.last().expect("nonempty").clone();
        let force = traj.f(n) - &op.apply(traj.u(n))?;
        next.axpy(traj.k, &force);
        out.push(next);
    }
    Ok(out)
}

/// Leap-frog discrete energy `E^{n+1/2} = |V^{n+1/2}|^2 / 2 + (A U^n, U^{n+1}) / 2`
/// for `n = -1..=N`.
pub fn discrete_energy(op: &SpdOperator, traj: &StaggeredTrajectory) -> Result<Vec<f64>> {
    (-1..=traj.n_steps as i64)
        .map(|n| {
            let v = traj.v_after(n);
            Ok(0.5 * op.inner(v, v)? + 0.5 * op.inner(&op.apply(traj.u(n))?, traj.u(n + 1))?)
        })
        .collect()
}

/// Defect of the staggered velocity equation at step `n` (`0 <= n <= N`):
///
/// * leap-frog: `dV^{n+1/2} + A U^n - f^n`
/// * cosine 1: `dV^{n+1/2} + q1 A U^{n+1} - 2 p1 A U^n + q1 A U^{n-1} - f~^n`
/// * cosine 2: `dV^{n+1/2} + A U^n - f~^n`
///
/// with `dV^{n+1/2} = (V^{n+1/2} - V^{n-1/2}) / k`.
pub fn step_defect(op: &SpdOperator, traj: &StaggeredTrajectory, n: i64) -> Result<StateVector> {
    let k = traj.k;
    let mut d = (traj.v_after(n) - traj.v_after(n - 1)) * (1.0 / k);
    match traj.formulation {
        Formulation::LeapFrog => {
            d += &op.apply(traj.u(n))?;
            d -= traj.f(n);
        }
        Formulation::Cosine1 { q1 } => {
            let p1 = traj.formulation.p1();
            let mut combo = traj.u(n).scaled(-2.0 * p1);
            combo.axpy(q1, traj.u(n + 1));
            combo.axpy(q1, traj.u(n - 1));
            d += &op.apply(&combo)?;
            d -= &traj.modified_source(n);
        }
        Formulation::Cosine2 { .. } => {
            d += &op.apply(traj.u(n))?;
            d -= &traj.modified_source(n);
        }
    }
    Ok(d)
}
