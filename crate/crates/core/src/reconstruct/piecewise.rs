//! Piecewise polynomials of degree at most two with values in the state
//! space, on uniform subgrids of the `k/2` union grid.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::operator::{BasisTag, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridTag {
    /// Breakpoints at `t^n = n k`.
    Nodes,
    /// Breakpoints at `t^{n+1/2}`.
    HalfNodes,
    /// Breakpoints at every multiple of `k/2`.
    Union,
}

/// Uniform breakpoints `(first + stride * i) * k/2`, `i = 0..=n_intervals`.
///
/// Positions are kept as integer half-step indices so that different grids
/// of the same run can be matched exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BreakpointGrid {
    half_step: f64,
    first: i64,
    stride: i64,
    n_intervals: usize,
    tag: GridTag,
}

impl BreakpointGrid {
    /// Nodes `t^from .. t^to`.
    pub fn nodes(k: f64, from: i64, to: i64) -> Self {
        assert!(to > from, "grid needs at least one interval");
        Self {
            half_step: 0.5 * k,
            first: 2 * from,
            stride: 2,
            n_intervals: (to - from) as usize,
            tag: GridTag::Nodes,
        }
    }

    /// Half-nodes `t^{from+1/2} .. t^{to+1/2}`.
    pub fn half_nodes(k: f64, from: i64, to: i64) -> Self {
        assert!(to > from, "grid needs at least one interval");
        Self {
            half_step: 0.5 * k,
            first: 2 * from + 1,
            stride: 2,
            n_intervals: (to - from) as usize,
            tag: GridTag::HalfNodes,
        }
    }

    /// Every multiple of `k/2` from `first_half * k/2` to `last_half * k/2`.
    pub fn union(k: f64, first_half: i64, last_half: i64) -> Self {
        assert!(last_half > first_half, "grid needs at least one interval");
        Self {
            half_step: 0.5 * k,
            first: first_half,
            stride: 1,
            n_intervals: (last_half - first_half) as usize,
            tag: GridTag::Union,
        }
    }

    pub fn tag(&self) -> GridTag {
        self.tag
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    pub fn n_points(&self) -> usize {
        self.n_intervals + 1
    }

    pub fn spacing(&self) -> f64 {
        self.half_step * self.stride as f64
    }

    pub fn half_step(&self) -> f64 {
        self.half_step
    }

    /// Position of breakpoint `i` in units of `k/2`.
    pub fn half_index(&self, i: usize) -> i64 {
        self.first + self.stride * i as i64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.half_index(i) as f64 * self.half_step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points()).map(|i| self.point(i)).collect()
    }

    pub fn start(&self) -> f64 {
        self.point(0)
    }

    pub fn end(&self) -> f64 {
        self.point(self.n_intervals)
    }

    /// Interval containing the union subinterval `[j, j+1]` (half-step
    /// indices) and the offset of `j` from that interval's left end.
    pub fn piece_of_half_step(&self, j: i64) -> Option<(usize, f64)> {
        let rel = j - self.first;
        if rel < 0 || rel >= self.stride * self.n_intervals as i64 {
            return None;
        }
        let p = rel.div_euclid(self.stride);
        let offset = (rel - p * self.stride) as f64 * self.half_step;
        Some((p as usize, offset))
    }

    /// Interval containing `t` under the `(left, right]` convention (the first
    /// interval also owns its left end) and the local coordinate `t - left`.
    pub fn locate(&self, t: f64) -> Option<(usize, f64)> {
        let mut r = (t / self.half_step - self.first as f64) / self.stride as f64;
        let nearest = r.round();
        if (r - nearest).abs() < 1e-9 {
            r = nearest;
        }
        if r < 0.0 || r > self.n_intervals as f64 {
            return None;
        }
        let p = if r == 0.0 { 0 } else { (r.ceil() as usize).saturating_sub(1) };
        let p = p.min(self.n_intervals - 1);
        Some((p, t - self.point(p)))
    }

    pub(crate) fn same_points(&self, other: &Self) -> bool {
        self.first == other.first
            && self.stride == other.stride
            && self.n_intervals == other.n_intervals
            && self.half_step == other.half_step
    }
}

/// Coefficients `(a0, a1, a2)` of `a0 + a1 s + a2 s^2`, `s = t - t_left`.
pub type Piece = [StateVector; 3];

fn shift(piece: &Piece, d: f64) -> Piece {
    if d == 0.0 {
        return piece.clone();
    }
    let [a0, a1, a2] = piece;
    let mut b0 = a0.clone();
    b0.axpy(d, a1);
    b0.axpy(d * d, a2);
    let mut b1 = a1.clone();
    b1.axpy(2.0 * d, a2);
    [b0, b1, a2.clone()]
}

/// Evaluates a local polynomial at `s`.
pub fn eval_piece(piece: &Piece, s: f64) -> StateVector {
    let [a0, a1, a2] = piece;
    let mut out = a2.scaled(s);
    out += a1;
    let mut out = out * s;
    out += a0;
    out
}

fn eval_piece_derivative(piece: &Piece, s: f64) -> StateVector {
    let mut out = piece[1].clone();
    out.axpy(2.0 * s, &piece[2]);
    out
}

#[derive(Clone, Debug)]
pub struct PiecewiseStateFunction {
    grid: BreakpointGrid,
    pieces: Vec<Piece>,
    continuous: bool,
}

impl PiecewiseStateFunction {
    pub fn new(grid: BreakpointGrid, pieces: Vec<Piece>, continuous: bool) -> Result<Self> {
        if pieces.len() != grid.n_intervals() {
            return Err(contract(format!(
                "{} pieces given for a grid with {} intervals",
                pieces.len(),
                grid.n_intervals()
            )));
        }
        let basis = pieces[0][0].basis();
        if pieces.iter().flatten().any(|c| c.basis() != basis) {
            return Err(contract("piece coefficients live in different bases"));
        }
        Ok(Self { grid, pieces, continuous })
    }

    pub fn zero(grid: BreakpointGrid, basis: BasisTag) -> Self {
        let z = StateVector::zeros(basis);
        Self {
            pieces: vec![[z.clone(), z.clone(), z]; grid.n_intervals()],
            grid,
            continuous: true,
        }
    }

    /// Piecewise constant function taking `values[i]` on interval `i`.
    pub fn constant(grid: BreakpointGrid, values: Vec<StateVector>) -> Result<Self> {
        let pieces = values
            .into_iter()
            .map(|v| {
                let z = StateVector::zeros(v.basis());
                [v, z.clone(), z]
            })
            .collect();
        Self::new(grid, pieces, false)
    }

    /// Continuous piecewise linear function through `(grid.point(i), values[i])`.
    pub fn linear_interpolant(grid: BreakpointGrid, values: &[StateVector]) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(contract(format!(
                "{} values given for a grid with {} points",
                values.len(),
                grid.n_points()
            )));
        }
        let h = grid.spacing();
        let pieces = values
            .windows(2)
            .map(|w| {
                let slope = (&w[1] - &w[0]) * (1.0 / h);
                [w[0].clone(), slope, StateVector::zeros(w[0].basis())]
            })
            .collect();
        Self::new(grid, pieces, true)
    }

    pub fn grid(&self) -> &BreakpointGrid {
        &self.grid
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn piece(&self, i: usize) -> &Piece {
        &self.pieces[i]
    }

    pub fn is_continuous(&self) -> bool {
        self.continuous
    }

    pub fn basis(&self) -> BasisTag {
        self.pieces[0][0].basis()
    }

    pub fn degree(&self) -> usize {
        if self.pieces.iter().any(|p| !p[2].is_zero()) {
            2
        } else if self.pieces.iter().any(|p| !p[1].is_zero()) {
            1
        } else {
            0
        }
    }

    pub fn eval(&self, t: f64) -> Result<StateVector> {
        let (p, s) = self
            .grid
            .locate(t)
            .ok_or_else(|| contract(format!("t = {t} lies outside [{}, {}]", self.grid.start(), self.grid.end())))?;
        Ok(eval_piece(&self.pieces[p], s))
    }

    pub fn eval_in_piece(&self, p: usize, s: f64) -> StateVector {
        eval_piece(&self.pieces[p], s)
    }

    /// Limit from the left at breakpoint `i >= 1`.
    pub fn left_limit(&self, i: usize) -> StateVector {
        eval_piece(&self.pieces[i - 1], self.grid.spacing())
    }

    /// Limit from the right at breakpoint `i < n_intervals`.
    pub fn right_limit(&self, i: usize) -> StateVector {
        self.pieces[i][0].clone()
    }

    pub fn left_derivative(&self, i: usize) -> StateVector {
        eval_piece_derivative(&self.pieces[i - 1], self.grid.spacing())
    }

    pub fn right_derivative(&self, i: usize) -> StateVector {
        eval_piece_derivative(&self.pieces[i], 0.0)
    }

    /// Largest jump at an interior breakpoint, relative to `max(1, |value|)`.
    pub fn continuity_defect(&self) -> f64 {
        (1..self.grid.n_intervals())
            .map(|i| {
                let l = self.left_limit(i);
                let r = self.right_limit(i);
                (&l - &r).norm() / l.norm().max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// The polynomial restricted to the union subinterval `[j, j+1]` (half-step
    /// indices), re-expanded about that subinterval's left end.
    pub fn on_half_step(&self, j: i64) -> Result<Piece> {
        let (p, d) = self.grid.piece_of_half_step(j).ok_or_else(|| {
            contract(format!(
                "half step {j} is not covered by a grid on [{}, {}]",
                self.grid.start(),
                self.grid.end()
            ))
        })?;
        Ok(shift(&self.pieces[p], d))
    }

    /// Replaces every piece by its value at the interval midpoint.
    pub fn midpoint_constant(&self) -> Self {
        let mid = 0.5 * self.grid.spacing();
        let values: Vec<StateVector> = self.pieces.iter().map(|p| eval_piece(p, mid)).collect();
        Self::constant(self.grid, values).expect("same grid")
    }

    /// Re-expresses the function on a grid whose intervals each lie inside
    /// one interval of the current grid.
    pub fn refine_to(&self, target: BreakpointGrid) -> Result<Self> {
        if target.half_step != self.grid.half_step {
            return Err(contract("grids belong to different time steps"));
        }
        let pieces = (0..target.n_intervals())
            .map(|i| {
                let j0 = target.half_index(i);
                let (p, d) = self
                    .grid
                    .piece_of_half_step(j0)
                    .ok_or_else(|| contract(format!("target interval {i} leaves the source grid")))?;
                let (p_end, _) = self
                    .grid
                    .piece_of_half_step(target.half_index(i + 1) - 1)
                    .ok_or_else(|| contract(format!("target interval {i} leaves the source grid")))?;
                if p_end != p {
                    return Err(contract(format!("target interval {i} straddles a source breakpoint")));
                }
                Ok(shift(&self.pieces[p], d))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(target, pieces, self.continuous)
    }
}
