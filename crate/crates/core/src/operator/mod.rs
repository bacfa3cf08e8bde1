//! The positive definite self-adjoint operator `A`, its state space and the
//! energy inner product of the first-order wave system.
//!
//! Two families are provided, both with closed-form spectra:
//!
//! * a spectral operator diagonal in the Dirichlet sine basis
//!   `sin(k pi x) sin(j pi y)` of the unit square, with eigenvalues
//!   `c^2 pi^2 (k^2 + j^2)`;
//! * the standard 3-point (1d) and 5-point (2d) finite-difference Laplacians
//!   `-c^2 Delta_h` on a uniform grid with homogeneous Dirichlet data.
//!
//! Vectors are plain coefficient arrays under the Euclidean inner product, in
//! which both operators are symmetric.

mod cg;
mod state;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use state::{BasisKind, BasisTag, StatePair, StateVector};

use crate::error::{config, contract, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorKind {
    SpectralSine { c: f64, modes: Vec<(u32, u32)> },
    FdLaplacian1d { c: f64, n_interior: usize },
    FdLaplacian2d { c: f64, n_interior: usize },
}

/// Stopping rule for the iterative shifted solves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    pub tolerance: f64,
    /// The iteration cap is `max_iter_factor * dimension`.
    pub max_iter_factor: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-14,
            max_iter_factor: 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpdOperator {
    kind: OperatorKind,
    basis: BasisTag,
    /// Diagonal of the spectral operator; empty for grid operators.
    eigenvalues: Vec<f64>,
    solver: SolverSettings,
}

fn check_speed(c: f64) -> Result<()> {
    if !c.is_finite() || c == 0.0 {
        return Err(config(format!("wave speed must be finite and nonzero, got {c}")));
    }
    Ok(())
}

impl SpdOperator {
    pub fn new(kind: OperatorKind) -> Result<Self> {
        match kind {
            OperatorKind::SpectralSine { c, modes } => Self::spectral_sine(c, modes),
            OperatorKind::FdLaplacian1d { c, n_interior } => Self::fd_laplacian_1d(c, n_interior),
            OperatorKind::FdLaplacian2d { c, n_interior } => Self::fd_laplacian_2d(c, n_interior),
        }
    }

    pub fn spectral_sine(c: f64, modes: Vec<(u32, u32)>) -> Result<Self> {
        check_speed(c)?;
        if modes.is_empty() {
            return Err(config("spectral operator needs at least one mode"));
        }
        if let Some(m) = modes.iter().find(|(k, j)| *k == 0 || *j == 0) {
            return Err(config(format!("mode indices must be >= 1, got {m:?}")));
        }
        let mut sorted = modes.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(config("spectral mode list contains duplicates"));
        }
        let eigenvalues = modes
            .iter()
            .map(|&(k, j)| spectral_eigenvalue(c, k, j))
            .collect();
        Ok(Self {
            basis: BasisTag::spectral(&modes),
            kind: OperatorKind::SpectralSine { c, modes },
            eigenvalues,
            solver: SolverSettings::default(),
        })
    }

    pub fn fd_laplacian_1d(c: f64, n_interior: usize) -> Result<Self> {
        check_speed(c)?;
        if n_interior == 0 {
            return Err(config("grid needs at least one interior node"));
        }
        Ok(Self {
            kind: OperatorKind::FdLaplacian1d { c, n_interior },
            basis: BasisTag::grid_1d(n_interior),
            eigenvalues: Vec::new(),
            solver: SolverSettings::default(),
        })
    }

    pub fn fd_laplacian_2d(c: f64, n_interior: usize) -> Result<Self> {
        check_speed(c)?;
        if n_interior == 0 {
            return Err(config("grid needs at least one interior node"));
        }
        Ok(Self {
            kind: OperatorKind::FdLaplacian2d { c, n_interior },
            basis: BasisTag::grid_2d(n_interior),
            eigenvalues: Vec::new(),
            solver: SolverSettings::default(),
        })
    }

    pub fn with_solver_settings(mut self, solver: SolverSettings) -> Self {
        self.solver = solver;
        self
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn basis(&self) -> BasisTag {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn wave_speed(&self) -> f64 {
        match self.kind {
            OperatorKind::SpectralSine { c, .. }
            | OperatorKind::FdLaplacian1d { c, .. }
            | OperatorKind::FdLaplacian2d { c, .. } => c,
        }
    }

    /// Grid spacing of a finite-difference operator.
    pub fn grid_spacing(&self) -> Option<f64> {
        match self.kind {
            OperatorKind::SpectralSine { .. } => None,
            OperatorKind::FdLaplacian1d { n_interior, .. }
            | OperatorKind::FdLaplacian2d { n_interior, .. } => Some(1.0 / (n_interior + 1) as f64),
        }
    }

    pub fn zeros(&self) -> StateVector {
        StateVector::zeros(self.basis)
    }

    pub fn vector(&self, coeffs: Vec<f64>) -> Result<StateVector> {
        StateVector::new(self.basis, coeffs)
    }

    pub(crate) fn check(&self, v: &StateVector) -> Result<()> {
        if v.basis() != self.basis {
            return Err(contract(format!(
                "vector basis {:?} does not match operator basis {:?}",
                v.basis(),
                self.basis
            )));
        }
        Ok(())
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        self.check(v)?;
        let x = v.coeffs();
        let out = match self.kind {
            OperatorKind::SpectralSine { .. } => {
                x.iter().zip(&self.eigenvalues).map(|(a, l)| a * l).collect()
            }
            OperatorKind::FdLaplacian1d { c, n_interior } => stencil_1d(c, n_interior, x),
            OperatorKind::FdLaplacian2d { c, n_interior } => stencil_2d(c, n_interior, x),
        };
        Ok(StateVector::from_raw(self.basis, out))
    }

    /// Solves `(I + alpha A) x = b`.
    pub fn solve_shifted(&self, alpha: f64, b: &StateVector) -> Result<StateVector> {
        self.check(b)?;
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(contract(format!("shift must be finite and nonnegative, got {alpha}")));
        }
        if alpha == 0.0 {
            return Ok(b.clone());
        }
        match self.kind {
            OperatorKind::SpectralSine { .. } => Ok(StateVector::from_raw(
                self.basis,
                b.coeffs()
                    .iter()
                    .zip(&self.eigenvalues)
                    .map(|(bi, l)| bi / (1.0 + alpha * l))
                    .collect(),
            )),
            OperatorKind::FdLaplacian1d { c, n_interior } => self.cg_shifted(alpha, b, |x| stencil_1d(c, n_interior, x)),
            OperatorKind::FdLaplacian2d { c, n_interior } => self.cg_shifted(alpha, b, |x| stencil_2d(c, n_interior, x)),
        }
    }

    fn cg_shifted(
        &self,
        alpha: f64,
        b: &StateVector,
        stencil: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Result<StateVector> {
        let shifted = |x: &[f64]| {
            let ax = stencil(x);
            x.iter().zip(ax).map(|(xi, axi)| xi + alpha * axi).collect::<Vec<_>>()
        };
        let cap = self.solver.max_iter_factor * self.dim();
        // CG cannot resolve the residual below roughly eps * cond(I + alpha A)
        let attainable = 8.0 * f64::EPSILON * (1.0 + alpha * self.spectral_bound());
        let tol = self.solver.tolerance.max(attainable);
        let out = cg::solve(shifted, b.coeffs(), tol, cap.max(1));
        if !out.converged {
            return Err(Error::SolverFailure {
                iterations: out.iterations,
                residual: out.relative_residual,
            });
        }
        Ok(StateVector::from_raw(self.basis, out.x))
    }

    /// Weight `w` of the inner product `(v, w)_h = w * v . w`: the cell
    /// volume `h^d` on grids, so that grid norms approximate `L^2` norms
    /// independently of `h`, and `1` for spectral coefficients.
    pub fn mass_weight(&self) -> f64 {
        match self.kind {
            OperatorKind::SpectralSine { .. } => 1.0,
            OperatorKind::FdLaplacian1d { n_interior, .. } => 1.0 / (n_interior + 1) as f64,
            OperatorKind::FdLaplacian2d { n_interior, .. } => 1.0 / ((n_interior + 1) as f64).powi(2),
        }
    }

    /// `(v, w)_h`.
    pub fn inner(&self, v: &StateVector, w: &StateVector) -> Result<f64> {
        self.check(v)?;
        self.check(w)?;
        Ok(self.mass_weight() * v.dot(w))
    }

    /// `|v|_h`.
    pub fn l2_norm(&self, v: &StateVector) -> Result<f64> {
        Ok(self.inner(v, v)?.max(0.0).sqrt())
    }

    /// `((P, Q)) = (A p1, q1)_h + (p2, q2)_h`, which equals
    /// `(A^{1/2} p1, A^{1/2} q1)_h + (p2, q2)_h` by self-adjointness.
    pub fn energy_inner(&self, p: &StatePair, q: &StatePair) -> Result<f64> {
        for v in [&p.phi1, &p.phi2, &q.phi1, &q.phi2] {
            self.check(v)?;
        }
        Ok(self.mass_weight() * (self.apply(&p.phi1)?.dot(&q.phi1) + p.phi2.dot(&q.phi2)))
    }

    pub fn energy_norm(&self, p: &StatePair) -> Result<f64> {
        Ok(self.energy_inner(p, p)?.max(0.0).sqrt())
    }

    /// Energy norm of `(phi1, phi2)` given by reference, without building a pair.
    pub(crate) fn energy_norm_of(&self, phi1: &StateVector, phi2: &StateVector) -> Result<f64> {
        self.check(phi1)?;
        self.check(phi2)?;
        let sq = self.mass_weight() * (self.apply(phi1)?.dot(phi1) + phi2.dot(phi2));
        Ok(sq.max(0.0).sqrt())
    }

    /// Largest eigenvalue of `A`, from the closed-form spectrum.
    pub fn spectral_bound(&self) -> f64 {
        match self.kind {
            OperatorKind::SpectralSine { .. } => self.eigenvalues.iter().cloned().fold(0.0, f64::max),
            OperatorKind::FdLaplacian1d { c, n_interior } => fd_extreme_1d(c, n_interior, n_interior),
            OperatorKind::FdLaplacian2d { c, n_interior } => 2.0 * fd_extreme_1d(c, n_interior, n_interior),
        }
    }

    /// Smallest eigenvalue of `A`.
    pub fn spectral_min(&self) -> f64 {
        match self.kind {
            OperatorKind::SpectralSine { .. } => {
                self.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
            }
            OperatorKind::FdLaplacian1d { c, n_interior } => fd_extreme_1d(c, n_interior, 1),
            OperatorKind::FdLaplacian2d { c, n_interior } => 2.0 * fd_extreme_1d(c, n_interior, 1),
        }
    }

    /// Leap-frog stability threshold `2 / sqrt(lambda_max)`.
    pub fn leapfrog_step_limit(&self) -> f64 {
        2.0 / self.spectral_bound().sqrt()
    }

    /// Eigenvalue belonging to the sine mode `(k, j)`. One-dimensional grids
    /// use `j = 0`.
    pub fn mode_eigenvalue(&self, k: u32, j: u32) -> Result<f64> {
        self.check_mode(k, j)?;
        Ok(match self.kind {
            OperatorKind::SpectralSine { c, .. } => spectral_eigenvalue(c, k, j),
            OperatorKind::FdLaplacian1d { c, n_interior } => fd_eigenvalue_1d(c, n_interior, k),
            OperatorKind::FdLaplacian2d { c, n_interior } => {
                fd_eigenvalue_1d(c, n_interior, k) + fd_eigenvalue_1d(c, n_interior, j)
            }
        })
    }

    /// The sine mode `(k, j)` expressed in this operator's basis: a unit
    /// coefficient for the spectral operator, grid samples otherwise. In every
    /// case the result is an exact eigenvector of `A`.
    pub fn mode_vector(&self, k: u32, j: u32) -> Result<StateVector> {
        self.check_mode(k, j)?;
        let coeffs = match &self.kind {
            OperatorKind::SpectralSine { modes, .. } => {
                let idx = modes.iter().position(|&m| m == (k, j)).expect("checked");
                let mut v = vec![0.0; modes.len()];
                v[idx] = 1.0;
                v
            }
            OperatorKind::FdLaplacian1d { n_interior, .. } => {
                let h = 1.0 / (*n_interior + 1) as f64;
                (1..=*n_interior)
                    .map(|i| (k as f64 * PI * i as f64 * h).sin())
                    .collect()
            }
            OperatorKind::FdLaplacian2d { n_interior, .. } => {
                let n = *n_interior;
                let h = 1.0 / (n + 1) as f64;
                let sx: Vec<f64> = (1..=n).map(|i| (k as f64 * PI * i as f64 * h).sin()).collect();
                let sy: Vec<f64> = (1..=n).map(|i| (j as f64 * PI * i as f64 * h).sin()).collect();
                let mut v = Vec::with_capacity(n * n);
                for y in &sy {
                    for x in &sx {
                        v.push(x * y);
                    }
                }
                v
            }
        };
        Ok(StateVector::from_raw(self.basis, coeffs))
    }

    fn check_mode(&self, k: u32, j: u32) -> Result<()> {
        match &self.kind {
            OperatorKind::SpectralSine { modes, .. } => {
                if !modes.contains(&(k, j)) {
                    return Err(config(format!("mode ({k},{j}) is not in the operator's mode list")));
                }
            }
            OperatorKind::FdLaplacian1d { n_interior, .. } => {
                if j != 0 || k == 0 || k as usize > *n_interior {
                    return Err(config(format!(
                        "1d grid with {n_interior} interior nodes resolves modes (k, 0) with 1 <= k <= {n_interior}, got ({k},{j})"
                    )));
                }
            }
            OperatorKind::FdLaplacian2d { n_interior, .. } => {
                let n = *n_interior as u32;
                if k == 0 || j == 0 || k > n || j > n {
                    return Err(config(format!(
                        "2d grid with {n} interior nodes per axis resolves modes 1..={n}, got ({k},{j})"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn spectral_eigenvalue(c: f64, k: u32, j: u32) -> f64 {
    let (k, j) = (k as f64, j as f64);
    c * c * PI * PI * (k * k + j * j)
}

fn fd_eigenvalue_1d(c: f64, n_interior: usize, k: u32) -> f64 {
    let h = 1.0 / (n_interior + 1) as f64;
    let s = (k as f64 * PI * h / 2.0).sin();
    4.0 * c * c / (h * h) * s * s
}

/// `(2 c^2 / h^2)(1 - cos(pi h m))`, the 1d eigenvalue of index `m`.
fn fd_extreme_1d(c: f64, n_interior: usize, m: usize) -> f64 {
    let h = 1.0 / (n_interior + 1) as f64;
    2.0 * c * c / (h * h) * (1.0 - (PI * h * m as f64).cos())
}

fn stencil_1d(c: f64, n: usize, x: &[f64]) -> Vec<f64> {
    let h = 1.0 / (n + 1) as f64;
    let s = c * c / (h * h);
    (0..n)
        .map(|i| {
            let left = if i > 0 { x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] } else { 0.0 };
            s * (2.0 * x[i] - left - right)
        })
        .collect()
}

fn stencil_2d(c: f64, n: usize, x: &[f64]) -> Vec<f64> {
    let h = 1.0 / (n + 1) as f64;
    let s = c * c / (h * h);
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let idx = i + n * j;
            let mut acc = 4.0 * x[idx];
            if i > 0 {
                acc -= x[idx - 1];
            }
            if i + 1 < n {
                acc -= x[idx + 1];
            }
            if j > 0 {
                acc -= x[idx - n];
            }
            if j + 1 < n {
                acc -= x[idx + n];
            }
            out[idx] = s * acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_mode() -> SpdOperator {
        SpdOperator::spectral_sine(1.0, vec![(1, 1)]).unwrap()
    }

    #[test]
    fn spectral_apply_multiplies_by_eigenvalue() {
        let op = unit_mode();
        let v = op.vector(vec![1.0]).unwrap();
        let av = op.apply(&v).unwrap();
        assert_relative_eq!(av.coeffs()[0], 2.0 * PI * PI, max_relative = 1e-15);
        assert_relative_eq!(av.coeffs()[0], 19.7392088, max_relative = 1e-8);
    }

    #[test]
    fn apply_zero_is_zero() {
        for op in [
            unit_mode(),
            SpdOperator::fd_laplacian_1d(2.0, 7).unwrap(),
            SpdOperator::fd_laplacian_2d(1.0, 5).unwrap(),
        ] {
            assert!(op.apply(&op.zeros()).unwrap().is_zero());
        }
    }

    #[test]
    fn fd_1d_sine_mode_is_eigenvector() {
        let op = SpdOperator::fd_laplacian_1d(1.0, 3).unwrap();
        let v = op
            .vector(vec![(PI / 4.0).sin(), (PI / 2.0).sin(), (3.0 * PI / 4.0).sin()])
            .unwrap();
        let lambda = 32.0 * (1.0 - (PI / 4.0).cos());
        let av = op.apply(&v).unwrap();
        for (a, x) in av.coeffs().iter().zip(v.coeffs()) {
            assert_relative_eq!(*a, lambda * x, max_relative = 1e-14);
        }
        assert_relative_eq!(op.mode_eigenvalue(1, 0).unwrap(), lambda, max_relative = 1e-14);
    }

    #[test]
    fn mismatched_basis_is_rejected() {
        let a = unit_mode();
        let b = SpdOperator::fd_laplacian_1d(1.0, 1).unwrap();
        let v = b.vector(vec![1.0]).unwrap();
        assert!(matches!(a.apply(&v), Err(Error::Contract(_))));
        assert!(matches!(a.solve_shifted(1.0, &v), Err(Error::Contract(_))));
        let other = SpdOperator::spectral_sine(1.0, vec![(2, 1)]).unwrap();
        assert!(a.apply(&other.vector(vec![1.0]).unwrap()).is_err());
    }

    #[test]
    fn shifted_solve_cases() {
        let op = unit_mode();
        let b = op.vector(vec![1.0]).unwrap();
        assert_eq!(op.solve_shifted(0.0, &b).unwrap(), b);
        let x = op.solve_shifted(1.0, &b).unwrap();
        assert_relative_eq!(x.coeffs()[0], 1.0 / (1.0 + 2.0 * PI * PI), max_relative = 1e-15);
        assert!(op.solve_shifted(-1.0, &b).is_err());
        assert!(op.solve_shifted(f64::NAN, &b).is_err());

        let fd = SpdOperator::fd_laplacian_1d(1.0, 3).unwrap();
        let b = fd.mode_vector(1, 0).unwrap();
        let lambda = 32.0 * (1.0 - (PI / 4.0).cos());
        let x = fd.solve_shifted(0.01, &b).unwrap();
        for (xi, bi) in x.coeffs().iter().zip(b.coeffs()) {
            assert_relative_eq!(*xi, bi / (1.0 + 0.01 * lambda), max_relative = 1e-12);
        }
    }

    #[test]
    fn solver_cap_is_reported() {
        let fd = SpdOperator::fd_laplacian_2d(1.0, 20)
            .unwrap()
            .with_solver_settings(SolverSettings {
                tolerance: 1e-15,
                max_iter_factor: 0,
            });
        let b = fd.vector((0..400).map(|i| (i as f64).sin()).collect()).unwrap();
        match fd.solve_shifted(1.0, &b) {
            Err(Error::SolverFailure { residual, .. }) => assert!(residual > 0.0),
            other => panic!("expected solver failure, got {other:?}"),
        }
    }

    #[test]
    fn energy_inner_examples() {
        let op = unit_mode();
        let w = op.vector(vec![3.0]).unwrap();
        let p = StatePair::new(op.zeros(), w.clone()).unwrap();
        assert_relative_eq!(op.energy_inner(&p, &p).unwrap(), 9.0);
        let q = StatePair::new(op.vector(vec![1.0]).unwrap(), op.zeros()).unwrap();
        assert_relative_eq!(op.energy_inner(&q, &q).unwrap(), 2.0 * PI * PI, max_relative = 1e-15);
        assert_relative_eq!(op.energy_norm(&q).unwrap(), PI * 2f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(op.energy_norm(&q).unwrap(), 4.44288, max_relative = 1e-6);
        assert_eq!(op.energy_norm(&StatePair::zeros(op.basis())).unwrap(), 0.0);
    }

    #[test]
    fn spectral_bounds() {
        let op = SpdOperator::spectral_sine(1.0, vec![(1, 1), (3, 3)]).unwrap();
        assert_relative_eq!(op.spectral_bound(), 18.0 * PI * PI, max_relative = 1e-15);
        assert_relative_eq!(op.spectral_min(), 2.0 * PI * PI, max_relative = 1e-15);

        let n = 9;
        let h = 0.1;
        let fd1 = SpdOperator::fd_laplacian_1d(1.5, n).unwrap();
        let expected = 2.0 * 2.25 / (h * h) * (1.0 - (PI * h * n as f64).cos());
        assert_relative_eq!(fd1.spectral_bound(), expected, max_relative = 1e-14);
        let fd2 = SpdOperator::fd_laplacian_2d(1.5, n).unwrap();
        assert_relative_eq!(fd2.spectral_bound(), 2.0 * expected, max_relative = 1e-14);
        assert_relative_eq!(
            fd2.spectral_bound(),
            fd2.mode_eigenvalue(n as u32, n as u32).unwrap(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn mode_checks() {
        let fd1 = SpdOperator::fd_laplacian_1d(1.0, 4).unwrap();
        assert!(fd1.mode_vector(1, 1).is_err());
        assert!(fd1.mode_vector(5, 0).is_err());
        let sp = unit_mode();
        assert!(sp.mode_vector(2, 2).is_err());
        assert!(SpdOperator::spectral_sine(1.0, vec![(1, 1), (1, 1)]).is_err());
        assert!(SpdOperator::spectral_sine(1.0, vec![(0, 1)]).is_err());
        assert!(SpdOperator::spectral_sine(0.0, vec![(1, 1)]).is_err());
    }

    #[test]
    fn non_finite_vectors_are_rejected() {
        let op = unit_mode();
        assert!(op.vector(vec![f64::NAN]).is_err());
        assert!(op.vector(vec![1.0, 2.0]).is_err());
    }
}
