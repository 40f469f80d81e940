//! Iterative schemes driving toward `P_{A∩B}(0)`, the minimum-norm
//! feasible control.
//!
//! Every scheme alternates the two projectors and stops once the driver
//! sequence satisfies `max_i |u^{k+1}_i - u^k_i| <= epsilon`. The returned
//! control is the *monitored* iterate of the last pass: the first projection
//! of the pass (`ũ`), except for Dykstra in [`Order::AffineFirst`] which
//! monitors `u^{k+1}` itself.
//!
//! In [`Order::BoxFirst`] the monitored iterate is always a box projection,
//! so every reported control satisfies `|u_i| <= a` exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{max_abs_diff, ControlVector, Grid, ProblemSpec};
use crate::projectors::{AffineProjector, BoxProjector, JacobianMode, ShootingConstants};

pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dykstra,
    #[serde(rename = "dr")]
    DouglasRachford,
    #[serde(rename = "aac")]
    AragonArtachoCampoy,
    #[serde(rename = "map")]
    AlternatingProjections,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Dykstra => "dykstra",
            Method::DouglasRachford => "dr",
            Method::AragonArtachoCampoy => "aac",
            Method::AlternatingProjections => "map",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dykstra" => Ok(Method::Dykstra),
            "dr" => Ok(Method::DouglasRachford),
            "aac" => Ok(Method::AragonArtachoCampoy),
            "map" => Ok(Method::AlternatingProjections),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

/// Which projector a pass applies first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Order {
    #[default]
    BoxFirst,
    AffineFirst,
}

impl Order {
    pub fn name(&self) -> &'static str {
        match self {
            Order::BoxFirst => "box-first",
            Order::AffineFirst => "affine-first",
        }
    }
}

/// Starting point `u^0` of the driver sequence.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialIterate {
    #[default]
    Zero,
    Constant(f64),
    Samples(ControlVector),
}

impl InitialIterate {
    fn materialize(&self, grid: &Grid) -> Result<Vec<f64>> {
        match self {
            InitialIterate::Zero => Ok(vec![0.0; grid.n()]),
            InitialIterate::Constant(c) if c.is_finite() => Ok(vec![*c; grid.n()]),
            InitialIterate::Constant(c) => Err(Error::invalid(format!(
                "initial constant must be finite, got {c}"
            ))),
            InitialIterate::Samples(u) => {
                u.check_grid(grid)?;
                if u.as_slice().iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid(
                        "initial iterate contains non-finite samples",
                    ));
                }
                Ok(u.as_slice().to_vec())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub order: Order,
    pub epsilon: f64,
    pub max_iter: usize,
    /// Douglas–Rachford scaling, in `(0, 1)`.
    pub lambda: Option<f64>,
    /// Aragón Artacho–Campoy relaxation, in `(0, 1]`.
    pub alpha: Option<f64>,
    /// Aragón Artacho–Campoy reflection weight, in `(0, 1)`.
    pub beta: Option<f64>,
    pub jacobian_mode: JacobianMode,
    pub initial: InitialIterate,
    /// Keep a copy of every monitored iterate in [`SolveReport::shadow`].
    pub record_shadow: bool,
}

impl SolverConfig {
    fn base(method: Method) -> Self {
        Self {
            method,
            order: Order::BoxFirst,
            epsilon: DEFAULT_EPSILON,
            max_iter: DEFAULT_MAX_ITER,
            lambda: None,
            alpha: None,
            beta: None,
            jacobian_mode: JacobianMode::PaperContinuous,
            initial: InitialIterate::Zero,
            record_shadow: false,
        }
    }

    pub fn dykstra() -> Self {
        Self::base(Method::Dykstra)
    }

    pub fn douglas_rachford(lambda: f64) -> Self {
        Self {
            lambda: Some(lambda),
            ..Self::base(Method::DouglasRachford)
        }
    }

    pub fn aragon_artacho_campoy(alpha: f64, beta: f64) -> Self {
        Self {
            alpha: Some(alpha),
            beta: Some(beta),
            ..Self::base(Method::AragonArtachoCampoy)
        }
    }

    pub fn alternating_projections() -> Self {
        Self::base(Method::AlternatingProjections)
    }

    pub fn with_order(mut self, order: Order) -> Self {
        self.order = order;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_jacobian(mut self, mode: JacobianMode) -> Self {
        self.jacobian_mode = mode;
        self
    }

    pub fn with_initial(mut self, initial: InitialIterate) -> Self {
        self.initial = initial;
        self
    }

    pub fn recording_shadow(mut self, record: bool) -> Self {
        self.record_shadow = record;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::invalid(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        let (needs_lambda, needs_ab) = match self.method {
            Method::DouglasRachford => (true, false),
            Method::AragonArtachoCampoy => (false, true),
            Method::Dykstra | Method::AlternatingProjections => (false, false),
        };
        let m = self.method;
        match (needs_lambda, self.lambda) {
            (true, None) => return Err(Error::invalid(format!("{m} requires lambda"))),
            (true, Some(l)) if !(l > 0.0 && l < 1.0) => {
                return Err(Error::invalid(format!(
                    "lambda must lie in (0, 1), got {l}"
                )))
            }
            (false, Some(_)) => {
                return Err(Error::invalid(format!("lambda does not apply to {m}")))
            }
            _ => {}
        }
        match (needs_ab, self.alpha, self.beta) {
            (true, None, _) => return Err(Error::invalid(format!("{m} requires alpha"))),
            (true, _, None) => return Err(Error::invalid(format!("{m} requires beta"))),
            (true, Some(alpha), Some(beta)) => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(Error::invalid(format!(
                        "alpha must lie in (0, 1], got {alpha}"
                    )));
                }
                if !(beta > 0.0 && beta < 1.0) {
                    return Err(Error::invalid(format!(
                        "beta must lie in (0, 1), got {beta}"
                    )));
                }
            }
            (false, Some(_), _) => {
                return Err(Error::invalid(format!("alpha does not apply to {m}")))
            }
            (false, _, Some(_)) => {
                return Err(Error::invalid(format!("beta does not apply to {m}")))
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Monitored iterate at termination.
    pub control: ControlVector,
    pub iterations: usize,
    pub converged: bool,
    /// `max_i |u^{k+1}_i - u^k_i|` for every pass.
    pub residuals: Vec<f64>,
    /// Monitored iterate of every pass, when recording was requested.
    pub shadow: Option<Vec<ControlVector>>,
    /// Estimate of the affine adjoint: `λ2(t) = -(c1 t + c2)`, read off the
    /// shooting constants of the affine projections. `None` for alternating
    /// projections, whose corrections vanish at the limit.
    pub adjoint: Option<ShootingConstants>,
}

impl SolveReport {
    pub fn final_residual(&self) -> Option<f64> {
        self.residuals.last().copied()
    }
}

/// Receives `(k, monitored iterate, residual)` after each pass, `k` counted
/// from zero.
pub trait IterationObserver {
    fn observe(&mut self, k: usize, monitored: &[f64], residual: f64);
}

impl<F: FnMut(usize, &[f64], f64)> IterationObserver for F {
    fn observe(&mut self, k: usize, monitored: &[f64], residual: f64) {
        self(k, monitored, residual)
    }
}

struct NoObserver;

impl IterationObserver for NoObserver {
    fn observe(&mut self, _: usize, _: &[f64], _: f64) {}
}

/// Runs whichever scheme `cfg.method` selects.
pub fn solve(spec: &ProblemSpec, grid: &Grid, cfg: &SolverConfig) -> Result<SolveReport> {
    solve_observed(spec, grid, cfg, &mut NoObserver)
}

pub fn solve_observed(
    spec: &ProblemSpec,
    grid: &Grid,
    cfg: &SolverConfig,
    observer: &mut dyn IterationObserver,
) -> Result<SolveReport> {
    cfg.validate()?;
    if cfg.alpha == Some(1.0) {
        static ALPHA_ONE: std::sync::Once = std::sync::Once::new();
        ALPHA_ONE.call_once(|| {
            log::warn!("alpha = 1 lies outside the range covered by AAC convergence theory")
        });
    }
    let ops = Projections {
        affine: AffineProjector::new(spec, grid, cfg.jacobian_mode)?,
        boxp: BoxProjector::new(spec.a)?,
        order: cfg.order,
    };
    let u0 = cfg.initial.materialize(grid)?;
    let n = grid.n();
    match cfg.method {
        Method::Dykstra => drive(
            Dykstra {
                ops,
                q: vec![0.0; n],
                sum: vec![0.0; n],
                tilde: vec![0.0; n],
                total: ShootingConstants::default(),
            },
            u0,
            cfg,
            observer,
        ),
        Method::DouglasRachford => drive(
            DouglasRachford {
                ops,
                lambda: cfg.lambda.expect("validated"),
                tmp: vec![0.0; n],
                hat: vec![0.0; n],
                last: ShootingConstants::default(),
            },
            u0,
            cfg,
            observer,
        ),
        Method::AragonArtachoCampoy => drive(
            AragonArtachoCampoy {
                ops,
                alpha: cfg.alpha.expect("validated"),
                beta: cfg.beta.expect("validated"),
                tmp: vec![0.0; n],
                hat: vec![0.0; n],
                last: ShootingConstants::default(),
            },
            u0,
            cfg,
            observer,
        ),
        Method::AlternatingProjections => drive(Alternating { ops }, u0, cfg, observer),
    }
}

fn require(cfg: &SolverConfig, method: Method) -> Result<()> {
    if cfg.method == method {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "configuration is for {}, not {method}",
            cfg.method
        )))
    }
}

/// Dykstra's algorithm. `q` accumulates the box corrections; the affine set
/// needs no correction sequence of its own.
pub fn dykstra_solve(spec: &ProblemSpec, grid: &Grid, cfg: &SolverConfig) -> Result<SolveReport> {
    require(cfg, Method::Dykstra)?;
    solve(spec, grid, cfg)
}

/// Douglas–Rachford with anchor `z = 0`.
pub fn dr_solve(spec: &ProblemSpec, grid: &Grid, cfg: &SolverConfig) -> Result<SolveReport> {
    require(cfg, Method::DouglasRachford)?;
    solve(spec, grid, cfg)
}

/// Aragón Artacho–Campoy with anchor `z = 0`.
pub fn aac_solve(spec: &ProblemSpec, grid: &Grid, cfg: &SolverConfig) -> Result<SolveReport> {
    require(cfg, Method::AragonArtachoCampoy)?;
    solve(spec, grid, cfg)
}

/// Plain alternating projections.
pub fn map_solve(spec: &ProblemSpec, grid: &Grid, cfg: &SolverConfig) -> Result<SolveReport> {
    require(cfg, Method::AlternatingProjections)?;
    solve(spec, grid, cfg)
}

struct Projections {
    affine: AffineProjector,
    boxp: BoxProjector,
    order: Order,
}

impl Projections {
    fn affine(&self, input: &[f64], out: &mut [f64]) -> ShootingConstants {
        self.affine.project_into(input, out)
    }

    fn clip(&self, input: &[f64], out: &mut [f64]) {
        self.boxp.project_into(input, out)
    }

    /// Applies the first projector of the pass; returns the affine
    /// correction if the affine projector was the one applied.
    fn first(&self, input: &[f64], out: &mut [f64]) -> Option<ShootingConstants> {
        match self.order {
            Order::BoxFirst => {
                self.clip(input, out);
                None
            }
            Order::AffineFirst => Some(self.affine(input, out)),
        }
    }

    fn second(&self, input: &[f64], out: &mut [f64]) -> Option<ShootingConstants> {
        match self.order {
            Order::BoxFirst => Some(self.affine(input, out)),
            Order::AffineFirst => {
                self.clip(input, out);
                None
            }
        }
    }
}

trait Scheme {
    /// One pass from `u`; writes `u^{k+1}` into `next` and the monitored
    /// iterate into `monitored`.
    fn step(&mut self, u: &[f64], next: &mut [f64], monitored: &mut [f64]);

    fn adjoint(&self) -> Option<ShootingConstants>;
}

struct Dykstra {
    ops: Projections,
    q: Vec<f64>,
    sum: Vec<f64>,
    tilde: Vec<f64>,
    total: ShootingConstants,
}

impl Scheme for Dykstra {
    fn step(&mut self, u: &[f64], next: &mut [f64], monitored: &mut [f64]) {
        for ((t, &ui), &qi) in self.sum.iter_mut().zip(u).zip(&self.q) {
            *t = ui + qi;
        }
        self.ops.clip(&self.sum, &mut self.tilde);
        self.total += self.ops.affine(&self.tilde, next);
        for ((qi, &si), &ti) in self.q.iter_mut().zip(&self.sum).zip(&self.tilde) {
            *qi = si - ti;
        }
        match self.ops.order {
            Order::BoxFirst => monitored.copy_from_slice(&self.tilde),
            Order::AffineFirst => monitored.copy_from_slice(next),
        }
    }

    /// With `u^0 = q^0 = 0`, `u^k + q^k` equals the running sum of affine
    /// corrections, and `ũ` is its clip, so the sum is `-λ2`.
    fn adjoint(&self) -> Option<ShootingConstants> {
        Some(self.total)
    }
}

struct DouglasRachford {
    ops: Projections,
    lambda: f64,
    tmp: Vec<f64>,
    hat: Vec<f64>,
    last: ShootingConstants,
}

impl Scheme for DouglasRachford {
    fn step(&mut self, u: &[f64], next: &mut [f64], tilde: &mut [f64]) {
        for (t, &ui) in self.tmp.iter_mut().zip(u) {
            *t = self.lambda * ui;
        }
        let c1 = self.ops.first(&self.tmp, tilde);
        for ((t, &ti), &ui) in self.tmp.iter_mut().zip(tilde.iter()).zip(u) {
            *t = 2.0 * ti - ui;
        }
        let c2 = self.ops.second(&self.tmp, &mut self.hat);
        self.last = c1.or(c2).expect("one projection is affine");
        for (((x, &ui), &hi), &ti) in next.iter_mut().zip(u).zip(&self.hat).zip(tilde.iter()) {
            *x = ui + hi - ti;
        }
    }

    // At a fixed point on unsaturated nodes: box-first gives ũ = λ/(1-λ)·C,
    // affine-first gives ũ = C/(1-λ).
    fn adjoint(&self) -> Option<ShootingConstants> {
        let l = self.lambda;
        Some(match self.ops.order {
            Order::BoxFirst => self.last * (l / (1.0 - l)),
            Order::AffineFirst => self.last * (1.0 / (1.0 - l)),
        })
    }
}

struct AragonArtachoCampoy {
    ops: Projections,
    alpha: f64,
    beta: f64,
    tmp: Vec<f64>,
    hat: Vec<f64>,
    last: ShootingConstants,
}

impl Scheme for AragonArtachoCampoy {
    fn step(&mut self, u: &[f64], next: &mut [f64], tilde: &mut [f64]) {
        let c1 = self.ops.first(u, tilde);
        let two_beta = 2.0 * self.beta;
        for ((t, &ti), &ui) in self.tmp.iter_mut().zip(tilde.iter()).zip(u) {
            *t = two_beta * ti - ui;
        }
        let c2 = self.ops.second(&self.tmp, &mut self.hat);
        self.last = c1.or(c2).expect("one projection is affine");
        let gain = 2.0 * self.alpha * self.beta;
        for (((x, &ui), &hi), &ti) in next.iter_mut().zip(u).zip(&self.hat).zip(tilde.iter()) {
            *x = ui + gain * (hi - ti);
        }
    }

    // Unsaturated fixed-point nodes satisfy C = 2(1-β)ũ in either order.
    fn adjoint(&self) -> Option<ShootingConstants> {
        Some(self.last * (1.0 / (2.0 * (1.0 - self.beta))))
    }
}

struct Alternating {
    ops: Projections,
}

impl Scheme for Alternating {
    fn step(&mut self, u: &[f64], next: &mut [f64], inner: &mut [f64]) {
        self.ops.first(u, inner);
        self.ops.second(inner, next);
    }

    fn adjoint(&self) -> Option<ShootingConstants> {
        None
    }
}

fn drive<S: Scheme>(
    mut scheme: S,
    mut u: Vec<f64>,
    cfg: &SolverConfig,
    observer: &mut dyn IterationObserver,
) -> Result<SolveReport> {
    let n = u.len();
    let mut next = vec![0.0; n];
    let mut monitored = vec![0.0; n];
    let mut residuals = Vec::new();
    let mut shadow = cfg.record_shadow.then(Vec::new);
    let mut converged = false;

    for k in 0..cfg.max_iter {
        scheme.step(&u, &mut next, &mut monitored);
        let residual = max_abs_diff(&next, &u);
        residuals.push(residual);
        if let Some(s) = shadow.as_mut() {
            s.push(ControlVector::new(monitored.clone()));
        }
        observer.observe(k, &monitored, residual);
        std::mem::swap(&mut u, &mut next);
        if residual <= cfg.epsilon {
            converged = true;
            break;
        }
        if !residual.is_finite() {
            log::warn!("{} diverged at pass {k}", cfg.method);
            break;
        }
    }

    Ok(SolveReport {
        control: ControlVector::new(monitored),
        iterations: residuals.len(),
        converged,
        residuals,
        shadow,
        adjoint: scheme.adjoint(),
    })
}
