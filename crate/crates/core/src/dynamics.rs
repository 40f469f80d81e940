//! Forward Euler integration of the double integrator `x1' = x2, x2' = u`
//! with the control held at the left endpoint of each subinterval.

use crate::error::Result;
use crate::problem::{ControlVector, Grid, ProblemSpec, StateTrajectory};

/// Integrates `u` from `(s0, v0)`:
/// `x1[i+1] = x1[i] + h x2[i]`, `x2[i+1] = x2[i] + h u_i`.
pub fn euler_integrate(
    u: &ControlVector,
    spec: &ProblemSpec,
    grid: &Grid,
) -> Result<StateTrajectory> {
    u.check_grid(grid)?;
    Ok(integrate_from(u.as_slice(), spec.s0, spec.v0, grid.h()))
}

pub(crate) fn integrate_from(u: &[f64], x1_0: f64, x2_0: f64, h: f64) -> StateTrajectory {
    let mut x1 = Vec::with_capacity(u.len() + 1);
    let mut x2 = Vec::with_capacity(u.len() + 1);
    let (mut p, mut v) = (x1_0, x2_0);
    x1.push(p);
    x2.push(v);
    for &ui in u {
        p += h * v;
        v += h * ui;
        x1.push(p);
        x2.push(v);
    }
    StateTrajectory { x1, x2 }
}

/// Terminal state `(x1[n], x2[n])` of the same recursion without storing the
/// path. Bit-identical to the last node of [`euler_integrate`].
pub(crate) fn terminal_from(u: &[f64], x1_0: f64, x2_0: f64, h: f64) -> (f64, f64) {
    let (mut p, mut v) = (x1_0, x2_0);
    for &ui in u {
        p += h * v;
        v += h * ui;
    }
    (p, v)
}

/// Terminal state of the Euler recursion driven by `u_i + c1 t_i + c2`.
pub(crate) fn terminal_with_affine(
    u: &[f64],
    c1: f64,
    c2: f64,
    x1_0: f64,
    x2_0: f64,
    grid: &Grid,
) -> (f64, f64) {
    let h = grid.h();
    let (mut p, mut v) = (x1_0, x2_0);
    for (i, &ui) in u.iter().enumerate() {
        p += h * v;
        v += h * (ui + c1 * grid.t(i) + c2);
    }
    (p, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(s0: f64, v0: f64) -> ProblemSpec {
        ProblemSpec::new(s0, 0.0, v0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn rest_stays_at_rest() {
        let g = Grid::new(50).unwrap();
        let x = euler_integrate(&ControlVector::zeros(&g), &spec(0.0, 0.0), &g).unwrap();
        assert!(x.x1.iter().chain(&x.x2).all(|&v| v == 0.0));
        assert_eq!(x.len(), 51);
    }

    #[test]
    fn constant_velocity() {
        let g = Grid::new(64).unwrap();
        let x = euler_integrate(&ControlVector::zeros(&g), &spec(0.0, 1.0), &g).unwrap();
        assert!(x.x2.iter().all(|&v| v == 1.0));
        for (i, &p) in x.x1.iter().enumerate() {
            assert_relative_eq!(p, g.t(i), epsilon = 1e-14);
        }
        assert_eq!(x.terminal().0, 1.0);
    }

    #[test]
    fn two_steps_by_hand() {
        let g = Grid::new(2).unwrap();
        let x = euler_integrate(&ControlVector::constant(&g, 1.0), &spec(0.0, 0.0), &g).unwrap();
        assert_eq!(x.x2, vec![0.0, 0.5, 1.0]);
        assert_eq!(x.x1, vec![0.0, 0.0, 0.25]);
    }

    #[test]
    fn length_mismatch() {
        let g = Grid::new(4).unwrap();
        assert!(euler_integrate(&ControlVector::new(vec![0.0; 5]), &spec(0.0, 0.0), &g).is_err());
    }

    #[test]
    fn terminal_matches_full_path() {
        let g = Grid::new(37).unwrap();
        let u = ControlVector::sample(&g, |t| (3.0 * t).sin() - 0.2);
        let s = spec(0.3, -1.1);
        let x = euler_integrate(&u, &s, &g).unwrap();
        let (p, v) = terminal_from(u.as_slice(), s.s0, s.v0, g.h());
        assert_eq!(x.terminal(), (p, v));
        let (p0, v0) = terminal_with_affine(u.as_slice(), 0.0, 0.0, s.s0, s.v0, &g);
        assert_eq!((p, v), (p0, v0));
    }

    #[test]
    fn superposition() {
        let g = Grid::new(40).unwrap();
        let u = ControlVector::sample(&g, |t| t * t - 0.5);
        let s = spec(0.7, -0.4);
        let full = euler_integrate(&u, &s, &g).unwrap();
        let zero_state = euler_integrate(&u, &spec(0.0, 0.0), &g).unwrap();
        let zero_input = euler_integrate(&ControlVector::zeros(&g), &s, &g).unwrap();
        for i in 0..=g.n() {
            assert_relative_eq!(
                full.x1[i],
                zero_state.x1[i] + zero_input.x1[i],
                epsilon = 1e-14
            );
            assert_relative_eq!(
                full.x2[i],
                zero_state.x2[i] + zero_input.x2[i],
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn terminal_velocity_is_first_order() {
        // u(t) = 3t² integrates to 1 exactly; the left-endpoint sum misses by O(h).
        for n in [100, 1000, 10000] {
            let g = Grid::new(n).unwrap();
            let u = ControlVector::sample(&g, |t| 3.0 * t * t);
            let x = euler_integrate(&u, &spec(0.0, 0.5), &g).unwrap();
            let miss = (x.terminal().1 - 1.5).abs();
            assert!(miss <= 2.0 * g.h(), "n = {n}: miss {miss}");
        }
    }
}
