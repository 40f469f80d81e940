//! Ground truth for the error metrics.
//!
//! The adjoint `λ2` is affine in time and the optimal control is
//! `clip(-λ2, -a, a)`, so the discrete optimum is determined by two numbers.
//! [`oracle_solve`] finds them directly with a damped Newton iteration on the
//! terminal miss, independently of the projection machinery.

use crate::dynamics::{euler_integrate, terminal_from};
use crate::problem::{ControlVector, Grid, ProblemSpec, StateTrajectory};
use crate::projectors::ShootingConstants;

/// Constants of the unconstrained optimum `u(t) = c1 t + c2`.
pub fn unconstrained_constants(spec: &ProblemSpec) -> ShootingConstants {
    let ds = spec.sf - spec.s0;
    ShootingConstants::new(
        -12.0 * ds + 6.0 * (spec.v0 + spec.vf),
        6.0 * ds - 2.0 * (2.0 * spec.v0 + spec.vf),
    )
}

/// Closed-form solution ignoring the control bound, sampled on `grid`.
pub fn unconstrained_solution(spec: &ProblemSpec, grid: &Grid) -> (ControlVector, StateTrajectory) {
    let c = unconstrained_constants(spec);
    let u = ControlVector::sample(grid, |t| c.eval(t));
    let nodes = grid.nodes();
    let x1 = nodes
        .iter()
        .map(|&t| c.c1 * t.powi(3) / 6.0 + c.c2 * t * t / 2.0 + spec.v0 * t + spec.s0)
        .collect();
    let x2 = nodes
        .iter()
        .map(|&t| c.c1 * t * t / 2.0 + c.c2 * t + spec.v0)
        .collect();
    (u, StateTrajectory { x1, x2 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub constants: ShootingConstants,
    /// `u_i = clip(c1 t_i + c2, -a, a)`.
    pub control: ControlVector,
    pub trajectory: StateTrajectory,
    /// Terminal miss of `trajectory`.
    pub miss: (f64, f64),
    pub feasible: bool,
}

const MAX_NEWTON_STEPS: usize = 200;
const MAX_HALVINGS: usize = 30;
const COARSE_RANGE: f64 = 50.0;
const COARSE_STEP: f64 = 10.0;

/// Finds `(c1, c2)` such that the clipped affine control meets both terminal
/// conditions to within `tol` (max-norm).
///
/// Starts from the unconstrained constants, then from a coarse grid over
/// `[-50, 50]²` in row-major order. `feasible` is false if no start converges.
pub fn oracle_solve(spec: &ProblemSpec, grid: &Grid, tol: f64) -> OracleSolution {
    assert!(tol > 0.0, "oracle tolerance must be positive");
    let map = ClippedMiss::new(spec, grid);

    let mut best: Option<(ShootingConstants, f64)> = None;
    for start in starts(spec) {
        let (c, norm) = map.newton(start, tol);
        if norm <= tol {
            return map.solution(c, true);
        }
        if best.is_none_or(|(_, b)| norm < b) {
            best = Some((c, norm));
        }
    }
    let (c, _) = best.expect("at least one start");
    map.solution(c, false)
}

fn starts(spec: &ProblemSpec) -> impl Iterator<Item = ShootingConstants> {
    let k = (2.0 * COARSE_RANGE / COARSE_STEP).round() as usize;
    let coarse = (0..=k).flat_map(move |i| {
        (0..=k).map(move |j| {
            ShootingConstants::new(
                -COARSE_RANGE + i as f64 * COARSE_STEP,
                -COARSE_RANGE + j as f64 * COARSE_STEP,
            )
        })
    });
    std::iter::once(unconstrained_constants(spec)).chain(coarse)
}

struct ClippedMiss<'a> {
    spec: &'a ProblemSpec,
    grid: &'a Grid,
    nodes: Vec<f64>,
    buf: std::cell::RefCell<Vec<f64>>,
}

impl<'a> ClippedMiss<'a> {
    fn new(spec: &'a ProblemSpec, grid: &'a Grid) -> Self {
        Self {
            spec,
            grid,
            nodes: grid.control_nodes(),
            buf: std::cell::RefCell::new(vec![0.0; grid.n()]),
        }
    }

    fn fill(&self, c: ShootingConstants, out: &mut [f64]) {
        let a = self.spec.a;
        for (o, &t) in out.iter_mut().zip(&self.nodes) {
            *o = (c.c1 * t + c.c2).clamp(-a, a);
        }
    }

    fn eval(&self, c: ShootingConstants) -> [f64; 2] {
        let mut u = self.buf.borrow_mut();
        self.fill(c, &mut u);
        let (p, v) = terminal_from(&u, self.spec.s0, self.spec.v0, self.grid.h());
        [p - self.spec.sf, v - self.spec.vf]
    }

    fn jacobian(&self, c: ShootingConstants) -> [[f64; 2]; 2] {
        let step = 1e-6 * 1f64.max(c.c1.abs()).max(c.c2.abs());
        let column = |d1: f64, d2: f64| {
            let fp = self.eval(ShootingConstants::new(c.c1 + d1, c.c2 + d2));
            let fm = self.eval(ShootingConstants::new(c.c1 - d1, c.c2 - d2));
            [
                (fp[0] - fm[0]) / (2.0 * step),
                (fp[1] - fm[1]) / (2.0 * step),
            ]
        };
        let d_c1 = column(step, 0.0);
        let d_c2 = column(0.0, step);
        [[d_c1[0], d_c2[0]], [d_c1[1], d_c2[1]]]
    }

    /// Damped Newton from `c`. Returns the last iterate and its miss norm.
    fn newton(&self, mut c: ShootingConstants, tol: f64) -> (ShootingConstants, f64) {
        let mut f = self.eval(c);
        let mut norm = inf_norm(f);
        for _ in 0..MAX_NEWTON_STEPS {
            if norm <= tol {
                break;
            }
            let j = self.jacobian(c);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == 0.0 || !det.is_finite() {
                break;
            }
            let d1 = -(j[1][1] * f[0] - j[0][1] * f[1]) / det;
            let d2 = -(-j[1][0] * f[0] + j[0][0] * f[1]) / det;

            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                let trial = ShootingConstants::new(c.c1 + t * d1, c.c2 + t * d2);
                let ft = self.eval(trial);
                let nt = inf_norm(ft);
                if nt < norm {
                    c = trial;
                    f = ft;
                    norm = nt;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        (c, norm)
    }

    fn solution(&self, c: ShootingConstants, feasible: bool) -> OracleSolution {
        let mut u = vec![0.0; self.grid.n()];
        self.fill(c, &mut u);
        let control = ControlVector::new(u);
        let trajectory =
            euler_integrate(&control, self.spec, self.grid).expect("control sampled on grid");
        let (p, v) = trajectory.terminal();
        OracleSolution {
            constants: c,
            control,
            trajectory,
            miss: (p - self.spec.sf, v - self.spec.vf),
            feasible,
        }
    }
}

fn inf_norm(f: [f64; 2]) -> f64 {
    let n = f[0].abs().max(f[1].abs());
    if n.is_nan() {
        f64::INFINITY
    } else {
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::linf_dist;
    use approx::assert_relative_eq;

    #[test]
    fn benchmark_unconstrained_constants() {
        let c = unconstrained_constants(&ProblemSpec::benchmark(9.0).unwrap());
        assert_eq!((c.c1, c.c2), (6.0, -4.0));
    }

    #[test]
    fn at_rest_on_target_needs_no_control() {
        let s = ProblemSpec::new(0.7, 0.7, 0.0, 0.0, 1.0).unwrap();
        let g = Grid::new(20).unwrap();
        let (u, x) = unconstrained_solution(&s, &g);
        assert!(u.as_slice().iter().all(|&v| v == 0.0));
        assert!(x.x1.iter().all(|&p| p == 0.7));
    }

    #[test]
    fn closed_form_meets_boundary_conditions() {
        for s in [
            ProblemSpec::benchmark(9.0).unwrap(),
            ProblemSpec::new(-1.0, 2.0, 0.5, -3.0, 1.0).unwrap(),
        ] {
            let g = Grid::new(10).unwrap();
            let (_, x) = unconstrained_solution(&s, &g);
            assert_relative_eq!(x.x1[0], s.s0);
            assert_relative_eq!(x.x2[0], s.v0);
            let (p, v) = x.terminal();
            assert_relative_eq!(p, s.sf, epsilon = 1e-13);
            assert_relative_eq!(v, s.vf, epsilon = 1e-13);
        }
    }

    #[test]
    fn oracle_with_inactive_bound() {
        let g = Grid::new(2000).unwrap();
        let s = ProblemSpec::benchmark(9.0).unwrap();
        let o = oracle_solve(&s, &g, 1e-12);
        assert!(o.feasible);
        // Discrete optimum sits O(h) away from the continuous constants.
        assert!((o.constants.c1 - 6.0).abs() < 10.0 * g.h());
        assert!((o.constants.c2 + 4.0).abs() < 10.0 * g.h());
        let (u, _) = unconstrained_solution(&s, &g);
        assert!(linf_dist(&o.control, &u).unwrap() < 10.0 * g.h());
        assert!(o.control.as_slice().iter().all(|x| x.abs() < 9.0));
    }

    #[test]
    fn oracle_detects_infeasible_bound() {
        let g = Grid::new(2000).unwrap();
        let o = oracle_solve(&ProblemSpec::benchmark(2.4).unwrap(), &g, 1e-10);
        assert!(!o.feasible);
    }

    #[test]
    fn oracle_saturates_at_start() {
        let g = Grid::new(2000).unwrap();
        let o = oracle_solve(&ProblemSpec::benchmark(2.5).unwrap(), &g, 1e-12);
        assert!(o.feasible);
        assert_eq!(o.control[0], -2.5);
        assert!(o.miss.0.abs() <= 1e-12 && o.miss.1.abs() <= 1e-12);
        // Lower bound, a stretch of interior nodes, then the upper bound.
        assert_eq!(o.control[g.n() - 1], 2.5);
        assert!(o.control.as_slice().iter().any(|u| u.abs() < 2.0));
        assert!(o.control.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn constants_approach_unconstrained_as_bound_grows() {
        let g = Grid::new(1000).unwrap();
        let target = unconstrained_constants(&ProblemSpec::benchmark(9.0).unwrap());
        let dist = |a: f64| {
            let o = oracle_solve(&ProblemSpec::benchmark(a).unwrap(), &g, 1e-12);
            assert!(o.feasible);
            (o.constants.c1 - target.c1).hypot(o.constants.c2 - target.c2)
        };
        let d: Vec<f64> = [3.0, 4.0, 6.0, 9.0].iter().map(|&a| dist(a)).collect();
        assert!(d.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{d:?}");
        assert!(d[3] < 10.0 * g.h());
    }
}
