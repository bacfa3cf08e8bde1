use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{contract, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisKind {
    SpectralModes,
    Grid1d,
    Grid2d,
}

/// Identifies the basis a coefficient vector is expressed in.
///
/// Two vectors can only be combined when their tags agree; an operator only
/// accepts vectors carrying its own tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisTag {
    kind: BasisKind,
    dim: usize,
    fingerprint: u64,
}

impl BasisTag {
    pub(crate) fn spectral(modes: &[(u32, u32)]) -> Self {
        let mut hasher = DefaultHasher::new();
        modes.hash(&mut hasher);
        Self {
            kind: BasisKind::SpectralModes,
            dim: modes.len(),
            fingerprint: hasher.finish(),
        }
    }

    pub(crate) fn grid_1d(n_interior: usize) -> Self {
        Self {
            kind: BasisKind::Grid1d,
            dim: n_interior,
            fingerprint: n_interior as u64,
        }
    }

    pub(crate) fn grid_2d(n_interior: usize) -> Self {
        Self {
            kind: BasisKind::Grid2d,
            dim: n_interior * n_interior,
            fingerprint: n_interior as u64,
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Coefficients of an element of the state space in a given basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    coeffs: Vec<f64>,
    basis: BasisTag,
}

impl StateVector {
    pub fn new(basis: BasisTag, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.dim() {
            return Err(contract(format!(
                "vector of length {} does not match basis dimension {}",
                coeffs.len(),
                basis.dim()
            )));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(contract(format!("non-finite coefficient at index {i}")));
        }
        Ok(Self { coeffs, basis })
    }

    /// Like [`StateVector::new`] but without the finiteness check; used for
    /// results of arithmetic on already validated vectors, where an unstable
    /// run may legitimately overflow.
    pub(crate) fn from_raw(basis: BasisTag, coeffs: Vec<f64>) -> Self {
        debug_assert_eq!(coeffs.len(), basis.dim());
        Self { coeffs, basis }
    }

    pub fn zeros(basis: BasisTag) -> Self {
        Self {
            coeffs: vec![0.0; basis.dim()],
            basis,
        }
    }

    pub fn basis(&self) -> BasisTag {
        self.basis
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    fn check_same(&self, other: &Self) {
        assert_eq!(
            self.basis, other.basis,
            "state vectors from different bases cannot be combined"
        );
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.check_same(other);
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &Self) {
        self.check_same(x);
        for (s, xi) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *s += alpha * xi;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self::from_raw(self.basis, self.coeffs.iter().map(|c| alpha * c).collect())
    }

    /// `a * x + b * y`
    pub fn lincomb(a: f64, x: &Self, b: f64, y: &Self) -> Self {
        x.check_same(y);
        Self::from_raw(
            x.basis,
            x.coeffs
                .iter()
                .zip(&y.coeffs)
                .map(|(xi, yi)| a * xi + b * yi)
                .collect(),
        )
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.basis, self.coeffs.iter().map(|&c| f(c)).collect())
    }

    pub(crate) fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        self.check_same(other);
        Self::from_raw(
            self.basis,
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }
}

impl Add for &StateVector {
    type Output = StateVector;
    fn add(self, rhs: &StateVector) -> StateVector {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &StateVector {
    type Output = StateVector;
    fn sub(self, rhs: &StateVector) -> StateVector {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Add for StateVector {
    type Output = StateVector;
    fn add(mut self, rhs: StateVector) -> StateVector {
        self += &rhs;
        self
    }
}

impl Sub for StateVector {
    type Output = StateVector;
    fn sub(mut self, rhs: StateVector) -> StateVector {
        self -= &rhs;
        self
    }
}

impl Neg for &StateVector {
    type Output = StateVector;
    fn neg(self) -> StateVector {
        self.map(|c| -c)
    }
}

impl Neg for StateVector {
    type Output = StateVector;
    fn neg(mut self) -> StateVector {
        self.coeffs.iter_mut().for_each(|c| *c = -*c);
        self
    }
}

impl Mul<f64> for &StateVector {
    type Output = StateVector;
    fn mul(self, rhs: f64) -> StateVector {
        self.scaled(rhs)
    }
}

impl Mul<f64> for StateVector {
    type Output = StateVector;
    fn mul(mut self, rhs: f64) -> StateVector {
        self.coeffs.iter_mut().for_each(|c| *c *= rhs);
        self
    }
}

impl AddAssign<&StateVector> for StateVector {
    fn add_assign(&mut self, rhs: &StateVector) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&StateVector> for StateVector {
    fn sub_assign(&mut self, rhs: &StateVector) {
        self.axpy(-1.0, rhs);
    }
}

/// A displacement/velocity pair `(phi1, phi2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StatePair {
    pub phi1: StateVector,
    pub phi2: StateVector,
}

impl StatePair {
    pub fn new(phi1: StateVector, phi2: StateVector) -> Result<Self> {
        if phi1.basis() != phi2.basis() {
            return Err(contract("pair components live in different bases"));
        }
        Ok(Self { phi1, phi2 })
    }

    pub fn zeros(basis: BasisTag) -> Self {
        Self {
            phi1: StateVector::zeros(basis),
            phi2: StateVector::zeros(basis),
        }
    }

    pub fn basis(&self) -> BasisTag {
        self.phi1.basis()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            phi1: self.phi1.scaled(s),
            phi2: self.phi2.scaled(s),
        }
    }
}

impl Sub for &StatePair {
    type Output = StatePair;
    fn sub(self, rhs: &StatePair) -> StatePair {
        StatePair {
            phi1: &self.phi1 - &rhs.phi1,
            phi2: &self.phi2 - &rhs.phi2,
        }
    }
}
