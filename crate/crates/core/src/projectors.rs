//! Closed-form projectors onto the two constraint sets.
//!
//! * `A`: controls whose Euler trajectory from `(s0, v0)` hits `(sf, vf)`.
//!   The projection adds an affine correction `c1 t + c2`, with `c` found by
//!   one Newton (shooting) step on the terminal near-miss.
//! * `B`: the box `|u_i| <= a`; the projection is componentwise clipping.

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, terminal_from};
use crate::error::{Error, Result};
use crate::problem::{ControlVector, Grid, ProblemSpec};

/// Coefficients of the affine correction `c1 t + c2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ShootingConstants {
    pub c1: f64,
    pub c2: f64,
}

impl ShootingConstants {
    pub fn new(c1: f64, c2: f64) -> Self {
        Self { c1, c2 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.c1 * t + self.c2
    }

    pub fn is_finite(&self) -> bool {
        self.c1.is_finite() && self.c2.is_finite()
    }
}

impl std::ops::Add for ShootingConstants {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(self.c1 + rhs.c1, self.c2 + rhs.c2)
    }
}

impl std::ops::AddAssign for ShootingConstants {
    fn add_assign(&mut self, rhs: Self) {
        self.c1 += rhs.c1;
        self.c2 += rhs.c2;
    }
}

impl std::ops::Mul<f64> for ShootingConstants {
    type Output = Self;

    fn mul(self, k: f64) -> Self {
        Self::new(self.c1 * k, self.c2 * k)
    }
}

/// Which Jacobian the shooting step inverts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    /// Inverse of the continuous-time sensitivity `[[1/6, 1/2], [1/2, 1]]`,
    /// applied to Euler terminal states. An O(h) approximation of the
    /// orthogonal projection onto the discrete affine set.
    #[default]
    PaperContinuous,
    /// Sensitivities of the Euler recursion itself, which makes the operator
    /// the exact orthogonal projection onto the discrete affine set.
    ExactDiscrete,
}

/// Terminal miss `(x1[n] - sf, x2[n] - vf)` of the Euler trajectory driven by
/// `u_i + c1 t_i + c2`.
pub fn near_miss(
    c: ShootingConstants,
    u: &ControlVector,
    spec: &ProblemSpec,
    grid: &Grid,
) -> Result<(f64, f64)> {
    u.check_grid(grid)?;
    let (p, v) = dynamics::terminal_with_affine(u.as_slice(), c.c1, c.c2, spec.s0, spec.v0, grid);
    Ok((p - spec.sf, v - spec.vf))
}

/// Projector onto the affine dynamics set, with the shooting gain `-J⁻¹`
/// and the control nodes precomputed for repeated use.
#[derive(Debug, Clone)]
pub struct AffineProjector {
    spec: ProblemSpec,
    grid: Grid,
    mode: JacobianMode,
    gain: [[f64; 2]; 2],
    nodes: Vec<f64>,
}

impl AffineProjector {
    pub fn new(spec: &ProblemSpec, grid: &Grid, mode: JacobianMode) -> Result<Self> {
        let gain = match mode {
            // -[[-12, 6], [6, -2]]
            JacobianMode::PaperContinuous => [[12.0, -6.0], [-6.0, 2.0]],
            JacobianMode::ExactDiscrete => exact_gain(grid)?,
        };
        Ok(Self {
            spec: *spec,
            grid: *grid,
            mode,
            gain,
            nodes: grid.control_nodes(),
        })
    }

    pub fn mode(&self) -> JacobianMode {
        self.mode
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Writes the projection of `input` into `out` and returns the applied
    /// correction constants.
    pub fn project_into(&self, input: &[f64], out: &mut [f64]) -> ShootingConstants {
        debug_assert_eq!(input.len(), self.nodes.len());
        debug_assert_eq!(out.len(), self.nodes.len());
        let (p, v) = terminal_from(input, self.spec.s0, self.spec.v0, self.grid.h());
        let d1 = p - self.spec.sf;
        let d2 = v - self.spec.vf;
        let g = &self.gain;
        let c = ShootingConstants::new(g[0][0] * d1 + g[0][1] * d2, g[1][0] * d1 + g[1][1] * d2);
        for ((o, &x), &t) in out.iter_mut().zip(input).zip(&self.nodes) {
            *o = x + c.c1 * t + c.c2;
        }
        c
    }

    pub fn project(&self, u: &ControlVector) -> Result<(ControlVector, ShootingConstants)> {
        u.check_grid(&self.grid)?;
        let mut out = vec![0.0; u.len()];
        let c = self.project_into(u.as_slice(), &mut out);
        Ok((out.into(), c))
    }
}

/// `-J_h⁻¹` where `J_h` holds the Euler sensitivities of `(x1[n], x2[n])`
/// with respect to `(c1, c2)`, obtained by integrating the variational
/// recursions (zero initial state, forcing `t_i` and `1`).
fn exact_gain(grid: &Grid) -> Result<[[f64; 2]; 2]> {
    let h = grid.h();
    let (j11, j21) = terminal_from(&grid.control_nodes(), 0.0, 0.0, h);
    let (j12, j22) = terminal_from(&vec![1.0; grid.n()], 0.0, 0.0, h);
    let det = j11 * j22 - j12 * j21;
    let scale = (j11 * j22).abs().max((j12 * j21).abs());
    if det.is_nan() || det.abs() <= 1e-12 * scale {
        return Err(Error::SingularShooting { n: grid.n() });
    }
    Ok([[-j22 / det, j12 / det], [j21 / det, -j11 / det]])
}

/// Projects `u_minus` onto the affine dynamics set.
pub fn project_a(
    u_minus: &ControlVector,
    spec: &ProblemSpec,
    grid: &Grid,
    mode: JacobianMode,
) -> Result<(ControlVector, ShootingConstants)> {
    AffineProjector::new(spec, grid, mode)?.project(u_minus)
}

/// Projector onto the box `[-a, a]^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxProjector {
    a: f64,
}

impl BoxProjector {
    pub fn new(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid(format!(
                "box bound must be positive, got {a}"
            )));
        }
        Ok(Self { a })
    }

    pub fn bound(&self) -> f64 {
        self.a
    }

    pub fn project_into(&self, input: &[f64], out: &mut [f64]) {
        debug_assert_eq!(input.len(), out.len());
        for (o, &x) in out.iter_mut().zip(input) {
            *o = x.clamp(-self.a, self.a);
        }
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.iter().all(|x| x.abs() <= self.a)
    }
}

/// Clips every sample of `u_minus` to `[-a, a]`.
pub fn project_b(u_minus: &ControlVector, a: f64) -> Result<ControlVector> {
    let b = BoxProjector::new(a)?;
    let mut out = vec![0.0; u_minus.len()];
    b.project_into(u_minus.as_slice(), &mut out);
    Ok(out.into())
}
