//! Iteration counts over grids of algorithm parameters.
//!
//! Every cell is an independent solve, so cells run in parallel and are
//! collected back in grid order: the result does not depend on scheduling.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmt::{num, parse_num};
use crate::problem::{Grid, ProblemSpec};
use crate::projectors::JacobianMode;
use crate::solvers::{solve, Order, SolverConfig, DEFAULT_EPSILON, DEFAULT_MAX_ITER};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub epsilon: f64,
    pub max_iter: usize,
    pub order: Order,
    pub jacobian_mode: JacobianMode,
    /// Worker threads; `None` uses the global rayon pool.
    pub jobs: Option<usize>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            max_iter: DEFAULT_MAX_ITER,
            order: Order::BoxFirst,
            jacobian_mode: JacobianMode::PaperContinuous,
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Douglas–Rachford over `λ`.
    Lambda,
    /// Aragón Artacho–Campoy over `(α, β)`.
    AlphaBeta,
}

impl SweepKind {
    fn header(&self) -> &'static str {
        match self {
            SweepKind::Lambda => "a,lambda,iterations,converged",
            SweepKind::AlphaBeta => "a,alpha,beta,iterations,converged",
        }
    }

    fn n_params(&self) -> usize {
        match self {
            SweepKind::Lambda => 1,
            SweepKind::AlphaBeta => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub a: f64,
    /// `[λ]` or `[α, β]`.
    pub params: Vec<f64>,
    /// Iteration count, or `max_iter + 1` when the solve did not converge.
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub spec: ProblemSpec,
    pub n: usize,
    pub settings: SweepSettings,
    pub a_values: Vec<f64>,
    /// One axis for λ sweeps, `[α axis, β axis]` for AAC sweeps.
    pub axes: Vec<Vec<f64>>,
    /// Ordered by `a`, then by the axes in row-major order.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn sentinel(&self) -> usize {
        self.settings.max_iter + 1
    }

    pub fn cells_for(&self, a: f64) -> impl Iterator<Item = &SweepCell> {
        self.cells.iter().filter(move |c| c.a == a)
    }

    /// Converged cell with the fewest iterations for bound `a`; ties go to
    /// the earlier cell.
    pub fn best(&self, a: f64) -> Option<&SweepCell> {
        self.cells_for(a)
            .filter(|c| c.converged)
            .fold(None, |best: Option<&SweepCell>, c| match best {
                Some(b) if b.iterations <= c.iterations => Some(b),
                _ => Some(c),
            })
    }

    /// Cells where `a` needs fewer iterations than `envelope_a` at the same
    /// parameters. Reported, never enforced: the envelope is an observation.
    pub fn envelope_violations(&self, envelope_a: f64) -> Vec<(SweepCell, usize)> {
        let env: Vec<&SweepCell> = self.cells_for(envelope_a).collect();
        self.cells
            .iter()
            .filter(|c| c.a != envelope_a)
            .filter_map(|c| {
                let e = env.iter().find(|e| e.params == c.params)?;
                (c.iterations < e.iterations).then(|| (c.clone(), e.iterations))
            })
            .collect()
    }

    pub fn table(&self) -> SweepTable {
        SweepTable {
            kind: self.kind,
            rows: self
                .cells
                .iter()
                .map(|c| SweepRow {
                    a: c.a,
                    params: c.params.clone(),
                    iterations: c.converged.then_some(c.iterations),
                    converged: c.converged,
                })
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        self.table().to_csv()
    }
}

/// One row of the CSV form. Non-converged cells have an empty iteration
/// field.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub a: f64,
    pub params: Vec<f64>,
    pub iterations: Option<usize>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(self.kind.header());
        out.push('\n');
        for r in &self.rows {
            out.push_str(&num(r.a));
            for p in &r.params {
                out.push(',');
                out.push_str(&num(*p));
            }
            out.push(',');
            if let Some(k) = r.iterations {
                out.push_str(&k.to_string());
            }
            out.push(',');
            out.push_str(if r.converged { "true" } else { "false" });
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            what: "sweep CSV",
            detail,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty input".into()))?;
        let kind = [SweepKind::Lambda, SweepKind::AlphaBeta]
            .into_iter()
            .find(|k| k.header() == header)
            .ok_or_else(|| bad(format!("unknown header '{header}'")))?;
        let width = kind.n_params() + 3;
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != width {
                return Err(bad(format!("line {}: expected {width} fields", lineno + 2)));
            }
            let number = |s: &str| parse_num(s).ok_or_else(|| bad(format!("bad number '{s}'")));
            let a = number(fields[0])?;
            let params = fields[1..=kind.n_params()]
                .iter()
                .map(|s| number(s))
                .collect::<Result<Vec<_>>>()?;
            let it = fields[width - 2];
            let iterations = if it.is_empty() {
                None
            } else {
                Some(it.parse().map_err(|_| bad(format!("bad count '{it}'")))?)
            };
            let converged = match fields[width - 1] {
                "true" => true,
                "false" => false,
                other => return Err(bad(format!("bad flag '{other}'"))),
            };
            rows.push(SweepRow {
                a,
                params,
                iterations,
                converged,
            });
        }
        Ok(Self { kind, rows })
    }
}

fn check_axis(name: &str, values: &[f64], lo: f64, hi: f64, hi_inclusive: bool) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid(format!("{name} grid is empty")));
    }
    if !values.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid(format!(
            "{name} grid must be strictly increasing"
        )));
    }
    for &v in values {
        let inside = v > lo && (v < hi || (hi_inclusive && v == hi));
        if !inside {
            let close = if hi_inclusive { ']' } else { ')' };
            return Err(Error::invalid(format!(
                "{name} = {v} lies outside ({lo}, {hi}{close}"
            )));
        }
    }
    Ok(())
}

fn check_bounds(a_values: &[f64]) -> Result<()> {
    if a_values.is_empty() {
        return Err(Error::invalid("list of bounds a is empty"));
    }
    if let Some(a) = a_values.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::invalid(format!("bound a must be positive, got {a}")));
    }
    Ok(())
}

fn run_cells<F>(jobs: Option<usize>, count: usize, cell: F) -> Result<Vec<SweepCell>>
where
    F: Fn(usize) -> Result<SweepCell> + Sync + Send,
{
    let work = || {
        (0..count)
            .into_par_iter()
            .map(&cell)
            .collect::<Result<Vec<_>>>()
    };
    match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::invalid(format!("cannot start {j} workers: {e}")))?
            .install(work),
        None => work(),
    }
}

fn count(spec: &ProblemSpec, grid: &Grid, cfg: &SolverConfig) -> Result<(usize, bool)> {
    let r = solve(spec, grid, cfg)?;
    Ok(if r.converged {
        (r.iterations, true)
    } else {
        (cfg.max_iter + 1, false)
    })
}

fn base_config(cfg: SolverConfig, s: &SweepSettings) -> SolverConfig {
    cfg.with_order(s.order)
        .with_epsilon(s.epsilon)
        .with_max_iter(s.max_iter)
        .with_jacobian(s.jacobian_mode)
}

/// One Douglas–Rachford solve per `(a, λ)` cell.
pub fn sweep_lambda(
    spec: &ProblemSpec,
    grid: &Grid,
    a_values: &[f64],
    lambda_grid: &[f64],
    settings: &SweepSettings,
) -> Result<SweepResult> {
    check_bounds(a_values)?;
    check_axis("lambda", lambda_grid, 0.0, 1.0, false)?;
    let m = lambda_grid.len();
    let cells = run_cells(settings.jobs, a_values.len() * m, |idx| {
        let a = a_values[idx / m];
        let lambda = lambda_grid[idx % m];
        let cfg = base_config(SolverConfig::douglas_rachford(lambda), settings);
        let (iterations, converged) = count(&spec.with_bound(a)?, grid, &cfg)?;
        Ok(SweepCell {
            a,
            params: vec![lambda],
            iterations,
            converged,
        })
    })?;
    Ok(SweepResult {
        kind: SweepKind::Lambda,
        spec: *spec,
        n: grid.n(),
        settings: *settings,
        a_values: a_values.to_vec(),
        axes: vec![lambda_grid.to_vec()],
        cells,
    })
}

/// One Aragón Artacho–Campoy solve per `(a, α, β)` cell.
pub fn sweep_alpha_beta(
    spec: &ProblemSpec,
    grid: &Grid,
    a_values: &[f64],
    alpha_grid: &[f64],
    beta_grid: &[f64],
    settings: &SweepSettings,
) -> Result<SweepResult> {
    check_bounds(a_values)?;
    check_axis("alpha", alpha_grid, 0.0, 1.0, true)?;
    check_axis("beta", beta_grid, 0.0, 1.0, false)?;
    let (na, nb) = (alpha_grid.len(), beta_grid.len());
    let per_a = na * nb;
    let cells = run_cells(settings.jobs, a_values.len() * per_a, |idx| {
        let a = a_values[idx / per_a];
        let alpha = alpha_grid[(idx % per_a) / nb];
        let beta = beta_grid[idx % nb];
        let cfg = base_config(SolverConfig::aragon_artacho_campoy(alpha, beta), settings);
        let (iterations, converged) = count(&spec.with_bound(a)?, grid, &cfg)?;
        Ok(SweepCell {
            a,
            params: vec![alpha, beta],
            iterations,
            converged,
        })
    })?;
    Ok(SweepResult {
        kind: SweepKind::AlphaBeta,
        spec: *spec,
        n: grid.n(),
        settings: *settings,
        a_values: a_values.to_vec(),
        axes: vec![alpha_grid.to_vec(), beta_grid.to_vec()],
        cells,
    })
}

/// Result of zooming in on the best cell of one bound.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedMinimum {
    pub a: f64,
    /// Refined `[λ]` or `[α, β]`; only the last entry is refined.
    pub params: Vec<f64>,
    pub iterations: usize,
}

/// Refines the arg-min of the last parameter axis around the best cell for
/// `a`: each level evaluates `points` equispaced values across the current
/// bracket and recentres a bracket of two spacings on the best one.
///
/// Downward spikes are narrow, so this finds minimisers that a uniform grid
/// would need an impractical resolution to hit.
pub fn refine_minimum(
    result: &SweepResult,
    a: f64,
    levels: usize,
    points: usize,
) -> Result<Option<RefinedMinimum>> {
    let Some(best) = result.best(a) else {
        return Ok(None);
    };
    let axis = result.axes.last().expect("sweep has an axis");
    let pos = axis
        .iter()
        .position(|&v| v == *best.params.last().expect("cell has parameters"))
        .expect("best cell lies on the grid");
    // Both refined parameters (λ and β) live in the open interval (0, 1).
    let hi_limit = 1.0;
    let lo_edge = if pos > 0 {
        axis[pos - 1]
    } else {
        axis[pos] * 0.5
    };
    let hi_edge = if pos + 1 < axis.len() {
        axis[pos + 1]
    } else {
        (axis[pos] + hi_limit) * 0.5
    };
    let spec = result.spec.with_bound(a)?;
    let grid = Grid::new(result.n)?;
    let s = result.settings;
    let fixed: Vec<f64> = best.params[..best.params.len() - 1].to_vec();
    let config = |x: f64| -> SolverConfig {
        let cfg = match result.kind {
            SweepKind::Lambda => SolverConfig::douglas_rachford(x),
            SweepKind::AlphaBeta => SolverConfig::aragon_artacho_campoy(fixed[0], x),
        };
        base_config(cfg, &s)
    };

    let points = points.max(3);
    let (mut lo, mut hi) = (lo_edge, hi_edge);
    let mut best_x = *best.params.last().unwrap();
    let mut best_k = best.iterations;
    for _ in 0..levels {
        let step = (hi - lo) / (points - 1) as f64;
        let xs: Vec<f64> = (0..points)
            .map(|i| round12(lo + i as f64 * step))
            .filter(|&x| x > 0.0 && x < hi_limit)
            .collect();
        let counts = run_cells(s.jobs, xs.len(), |i| {
            let (k, ok) = count(&spec, &grid, &config(xs[i]))?;
            Ok(SweepCell {
                a,
                params: vec![xs[i]],
                iterations: k,
                converged: ok,
            })
        })?;
        for c in counts.iter().filter(|c| c.converged) {
            if c.iterations < best_k {
                best_k = c.iterations;
                best_x = c.params[0];
            }
        }
        lo = (best_x - step).max(f64::MIN_POSITIVE);
        hi = (best_x + step).min(hi_limit);
    }
    let mut params = fixed;
    params.push(best_x);
    Ok(Some(RefinedMinimum {
        a,
        params,
        iterations: best_k,
    }))
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Parses `lo:hi:step` into `lo, lo + step, ...` up to `hi` inclusive.
/// Values are rounded to 12 decimals so `0.01:0.99:0.01` yields clean
/// numbers.
pub fn parse_grid_spec(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::invalid(format!("malformed grid '{text}', expected lo:hi:step"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| parse_num(p).ok_or_else(bad))
        .collect::<Result<_>>()?;
    let (lo, hi, step) = (v[0], v[1], v[2]);
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || step <= 0.0 || hi < lo {
        return Err(bad());
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if count > 10_000_000 {
        return Err(Error::invalid(format!("grid '{text}' has too many points")));
    }
    Ok((0..count).map(|i| round12(lo + i as f64 * step)).collect())
}
