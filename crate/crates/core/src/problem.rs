//! Domain types shared by every other module: the problem instance, the
//! uniform time grid and the discrete control and state signals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary conditions and control bound of one problem instance.
///
/// The car starts at position `s0` with velocity `v0` and must reach `sf`
/// with velocity `vf` at `t = 1` using a control with `|u(t)| <= a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub s0: f64,
    pub sf: f64,
    pub v0: f64,
    pub vf: f64,
    pub a: f64,
}

impl ProblemSpec {
    pub fn new(s0: f64, sf: f64, v0: f64, vf: f64, a: f64) -> Result<Self> {
        for (name, v) in [("s0", s0), ("sf", sf), ("v0", v0), ("vf", vf)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite, got {v}")));
            }
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid(format!(
                "control bound a must be positive, got {a}"
            )));
        }
        Ok(Self { s0, sf, v0, vf, a })
    }

    /// The instance used throughout the experiments: start at 0 with unit
    /// speed, return to 0 at rest.
    pub fn benchmark(a: f64) -> Result<Self> {
        Self::new(0.0, 0.0, 1.0, 0.0, a)
    }

    /// Same boundary conditions with a different control bound.
    pub fn with_bound(&self, a: f64) -> Result<Self> {
        Self::new(self.s0, self.sf, self.v0, self.vf, a)
    }
}

/// Uniform partition `0 = t_0 < t_1 < ... < t_n = 1` with step `h = 1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("grid needs at least one subinterval"));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Node `t_i = i / n`, for `i` in `0..=n`.
    pub fn t(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    /// All `n + 1` nodes.
    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.t(i)).collect()
    }

    /// The `n` left endpoints carrying control samples.
    pub fn control_nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.t(i)).collect()
    }
}

/// Control samples `u_i ~ u(t_i)` on the left endpoints `t_0..t_{n-1}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlVector(Vec<f64>);

impl ControlVector {
    pub fn new(samples: Vec<f64>) -> Self {
        Self(samples)
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self(vec![0.0; grid.n()])
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self(vec![value; grid.n()])
    }

    /// Samples `f(t_i)` on the control nodes of `grid`.
    pub fn sample(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self((0..grid.n()).map(|i| f(grid.t(i))).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        Error::check_len(grid.n(), self.len())
    }
}

impl From<Vec<f64>> for ControlVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl std::ops::Index<usize> for ControlVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Position and velocity on all `n + 1` nodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateTrajectory {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
}

impl StateTrajectory {
    pub fn new(x1: Vec<f64>, x2: Vec<f64>) -> Result<Self> {
        Error::check_len(x1.len(), x2.len())?;
        Ok(Self { x1, x2 })
    }

    pub fn len(&self) -> usize {
        self.x1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x1.is_empty()
    }

    /// `(x1[n], x2[n])`.
    pub fn terminal(&self) -> (f64, f64) {
        (
            *self.x1.last().expect("trajectory has at least one node"),
            *self.x2.last().expect("trajectory has at least one node"),
        )
    }
}

/// Discrete max-norm distance `max_i |u_i - v_i|`.
pub fn linf_dist(u: &ControlVector, v: &ControlVector) -> Result<f64> {
    Error::check_len(u.len(), v.len())?;
    Ok(max_abs_diff(u.as_slice(), v.as_slice()))
}

pub(crate) fn max_abs_diff(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Left-endpoint quadrature of the L² norm, `(h Σ u_i²)^{1/2}`.
pub fn l2_norm(u: &ControlVector, grid: &Grid) -> Result<f64> {
    u.check_grid(grid)?;
    let sum: f64 = u.as_slice().iter().map(|x| x * x).sum();
    Ok((grid.h() * sum).sqrt())
}

/// Discrete L² inner product `h Σ u_i v_i`.
pub fn l2_inner(u: &ControlVector, v: &ControlVector, grid: &Grid) -> Result<f64> {
    u.check_grid(grid)?;
    v.check_grid(grid)?;
    let dot: f64 = u
        .as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(a, b)| a * b)
        .sum();
    Ok(grid.h() * dot)
}
