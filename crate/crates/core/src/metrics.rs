//! Error measurement against a reference solution on a nested grid.

use crate::dynamics::euler_integrate;
use crate::error::{Error, Result};
use crate::problem::{ControlVector, Grid, ProblemSpec, StateTrajectory};
use crate::projectors::ShootingConstants;
use crate::reference::ReferenceSolution;
use crate::solvers::{IterationObserver, SolveReport};

fn stride(coarse: usize, fine: usize) -> Result<usize> {
    if coarse == 0 || !fine.is_multiple_of(coarse) {
        return Err(Error::NonNestedGrids { coarse, fine });
    }
    Ok(fine / coarse)
}

/// `max_i |u_i - u*(t_i)|`, sampling `reference` at the nodes of `u`.
pub fn control_error(u: &ControlVector, reference: &ControlVector) -> Result<f64> {
    control_error_slice(u.as_slice(), reference.as_slice())
}

fn control_error_slice(u: &[f64], reference: &[f64]) -> Result<f64> {
    let s = stride(u.len(), reference.len())?;
    Ok(u.iter()
        .enumerate()
        .map(|(i, &ui)| (ui - reference[i * s]).abs())
        .fold(0.0, f64::max))
}

/// `max_i max(|x1_i - x1*(t_i)|, |x2_i - x2*(t_i)|)` over all nodes.
pub fn state_error(x: &StateTrajectory, reference: &StateTrajectory) -> Result<f64> {
    let intervals = x.len().saturating_sub(1);
    let s = stride(intervals, reference.len().saturating_sub(1))?;
    Ok((0..x.len())
        .map(|i| {
            let j = i * s;
            (x.x1[i] - reference.x1[j])
                .abs()
                .max((x.x2[i] - reference.x2[j]).abs())
        })
        .fold(0.0, f64::max))
}

/// Per-iteration control and state errors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorTrace {
    pub sigma_u: Vec<f64>,
    pub sigma_x: Vec<f64>,
}

impl ErrorTrace {
    pub fn len(&self) -> usize {
        self.sigma_u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_u.is_empty()
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        Some((*self.sigma_u.last()?, *self.sigma_x.last()?))
    }
}

/// Errors of every recorded monitored iterate in `report`.
pub fn error_trace(
    report: &SolveReport,
    spec: &ProblemSpec,
    grid: &Grid,
    reference: &ReferenceSolution,
) -> Result<ErrorTrace> {
    let shadow = report
        .shadow
        .as_ref()
        .ok_or_else(|| Error::invalid("solve report has no recorded iterates"))?;
    let mut tracker = ErrorTracker::new(spec, grid, reference)?;
    for (k, u) in shadow.iter().enumerate() {
        tracker.observe(
            k,
            u.as_slice(),
            report.residuals.get(k).copied().unwrap_or(f64::NAN),
        );
    }
    tracker.finish()
}

/// Streaming variant of [`error_trace`]: an observer that evaluates the
/// errors as the solver runs, without keeping the iterates.
pub struct ErrorTracker<'a> {
    spec: ProblemSpec,
    grid: Grid,
    reference: &'a ReferenceSolution,
    trace: ErrorTrace,
    error: Option<Error>,
}

impl<'a> ErrorTracker<'a> {
    pub fn new(spec: &ProblemSpec, grid: &Grid, reference: &'a ReferenceSolution) -> Result<Self> {
        stride(grid.n(), reference.grid.n())?;
        Ok(Self {
            spec: *spec,
            grid: *grid,
            reference,
            trace: ErrorTrace::default(),
            error: None,
        })
    }

    pub fn finish(self) -> Result<ErrorTrace> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.trace),
        }
    }

    fn measure(&self, u: &[f64]) -> Result<(f64, f64)> {
        let control = ControlVector::new(u.to_vec());
        let x = euler_integrate(&control, &self.spec, &self.grid)?;
        Ok((
            control_error(&control, &self.reference.control)?,
            state_error(&x, &self.reference.trajectory)?,
        ))
    }
}

impl IterationObserver for ErrorTracker<'_> {
    fn observe(&mut self, _k: usize, monitored: &[f64], _residual: f64) {
        if self.error.is_some() {
            return;
        }
        match self.measure(monitored) {
            Ok((su, sx)) => {
                self.trace.sigma_u.push(su);
                self.trace.sigma_x.push(sx);
            }
            Err(e) => self.error = Some(e),
        }
    }
}

/// Agreement of a control with the pointwise rule `u = clip(-λ2, -a, a)`
/// for an affine adjoint `λ2(t) = -(c1 t + c2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximumPrincipleCheck {
    /// `max |u_i + λ2(t_i)|` over nodes with `|u_i| < a - margin`.
    pub interior_residual: f64,
    pub interior_nodes: usize,
    /// Saturated nodes where `λ2` has the wrong sign or lies inside
    /// `(-a + margin, a - margin)`.
    pub sign_violations: usize,
    pub saturated_nodes: usize,
}

pub fn maximum_principle_check(
    u: &ControlVector,
    adjoint: ShootingConstants,
    grid: &Grid,
    a: f64,
    margin: f64,
) -> Result<MaximumPrincipleCheck> {
    u.check_grid(grid)?;
    let mut check = MaximumPrincipleCheck {
        interior_residual: 0.0,
        interior_nodes: 0,
        sign_violations: 0,
        saturated_nodes: 0,
    };
    for (i, &ui) in u.as_slice().iter().enumerate() {
        let lambda2 = -adjoint.eval(grid.t(i));
        if ui.abs() < a - margin {
            check.interior_nodes += 1;
            check.interior_residual = check.interior_residual.max((ui + lambda2).abs());
        } else {
            check.saturated_nodes += 1;
            // u = a needs λ2 <= -a, u = -a needs λ2 >= a.
            let consistent = if ui > 0.0 {
                lambda2 <= -a + margin
            } else {
                lambda2 >= a - margin
            };
            if !consistent {
                check.sign_violations += 1;
            }
        }
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{solve, SolverConfig};

    #[test]
    fn identical_and_shifted_controls() {
        let fine = ControlVector::sample(&Grid::new(1000).unwrap(), |t| t * t);
        assert_eq!(control_error(&fine, &fine).unwrap(), 0.0);

        let coarse_grid = Grid::new(100).unwrap();
        let coarse = ControlVector::sample(&coarse_grid, |t| t * t + 0.25);
        let e = control_error(&coarse, &fine).unwrap();
        assert!((e - 0.25).abs() < 1e-12);
    }

    #[test]
    fn non_nested_grids_rejected() {
        let a = ControlVector::zeros(&Grid::new(3).unwrap());
        let b = ControlVector::zeros(&Grid::new(10).unwrap());
        assert!(matches!(
            control_error(&a, &b),
            Err(Error::NonNestedGrids {
                coarse: 3,
                fine: 10
            })
        ));
        let xa = StateTrajectory::new(vec![0.0; 4], vec![0.0; 4]).unwrap();
        let xb = StateTrajectory::new(vec![0.0; 11], vec![0.0; 11]).unwrap();
        assert!(state_error(&xa, &xb).is_err());
    }

    #[test]
    fn state_error_takes_componentwise_max() {
        let x = StateTrajectory::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(state_error(&x, &x).unwrap(), 0.0);
        let r = StateTrajectory::new(
            vec![0.0, 0.5, 1.0, 1.5, 2.0],
            vec![0.1, 0.0, -0.3, 0.0, 0.0],
        )
        .unwrap();
        assert!((state_error(&x, &r).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn trace_requires_shadow() {
        let spec = ProblemSpec::benchmark(2.5).unwrap();
        let grid = Grid::new(100).unwrap();
        let reference = ReferenceSolution::build(&spec, &Grid::new(1000).unwrap(), 1e-12).unwrap();
        let r = solve(&spec, &grid, &SolverConfig::dykstra()).unwrap();
        assert!(error_trace(&r, &spec, &grid, &reference).is_err());
    }

    #[test]
    fn first_trace_entry_is_the_reference_sup_norm() {
        // The first monitored iterate is P_B(0) = 0 and the reference saturates.
        let spec = ProblemSpec::benchmark(2.5).unwrap();
        let grid = Grid::new(200).unwrap();
        let reference = ReferenceSolution::build(&spec, &Grid::new(2000).unwrap(), 1e-12).unwrap();
        for cfg in [
            SolverConfig::dykstra(),
            SolverConfig::douglas_rachford(0.7466),
            SolverConfig::aragon_artacho_campoy(1.0, 0.8617),
        ] {
            let r = solve(&spec, &grid, &cfg.recording_shadow(true)).unwrap();
            let t = error_trace(&r, &spec, &grid, &reference).unwrap();
            assert_eq!(t.len(), r.iterations);
            assert_eq!(t.sigma_u[0], 2.5);
            assert!(t
                .sigma_u
                .iter()
                .chain(&t.sigma_x)
                .all(|v| v.is_finite() && *v >= 0.0));
            let last = t.last().unwrap();
            assert_eq!(
                last.0,
                control_error(&r.control, &reference.control).unwrap()
            );
        }
    }

    #[test]
    fn maximum_principle_on_unconstrained_line() {
        let grid = Grid::new(50).unwrap();
        let c = ShootingConstants::new(6.0, -4.0);
        let u = ControlVector::sample(&grid, |t| c.eval(t).clamp(-3.0, 3.0));
        let check = maximum_principle_check(&u, c, &grid, 3.0, 1e-3).unwrap();
        assert!(check.interior_residual < 1e-12);
        assert_eq!(check.sign_violations, 0);
        assert!(check.saturated_nodes > 0);

        let flipped = maximum_principle_check(&u, c * -1.0, &grid, 3.0, 1e-3).unwrap();
        assert_eq!(flipped.sign_violations, flipped.saturated_nodes);
    }
}
