//! Richardson and Chebyshev iterations driven by masked residuals.
//!
//! All three methods share one loop shape: evaluate `r = b - A x`, zero it
//! on the constrained nodes, then move `x` along `r` (or along a recurrence
//! direction built from past residuals). The residual norm of every iterate
//! `x^0 ..= x^iters` is recorded.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::operator::{mask_dirichlet, DirichletData, LinearOperator};
use crate::{dist2, norm2};

/// Interval `[lambda1, lambda2]` enclosing the spectrum on the free nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl SpectralBounds {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1.is_finite() && lambda2.is_finite() && lambda1 > 0.0 && lambda2 >= lambda1) {
            return Err(Error::Parameter(format!("need 0 < lambda1 <= lambda2, got [{lambda1}, {lambda2}]")));
        }
        Ok(SpectralBounds { lambda1, lambda2 })
    }

    /// Midpoint of the interval.
    pub fn center(&self) -> f64 {
        (self.lambda2 + self.lambda1) / 2.0
    }

    /// Half-width of the interval.
    pub fn half_width(&self) -> f64 {
        (self.lambda2 - self.lambda1) / 2.0
    }

    /// `ω = 2 / (λ1 + λ2)`.
    pub fn richardson_step(&self) -> f64 {
        2.0 / (self.lambda2 + self.lambda1)
    }

    /// Per-step error contraction of optimally damped Richardson.
    pub fn richardson_rate(&self) -> f64 {
        (self.lambda2 - self.lambda1) / (self.lambda2 + self.lambda1)
    }

    /// `(√λ2 - √λ1) / (√λ2 + √λ1)`.
    pub fn chebyshev_rate(&self) -> f64 {
        let (a, b) = (self.lambda1.sqrt(), self.lambda2.sqrt());
        (b - a) / (b + a)
    }

    /// Upper bound `2 ρ^n` on the relative error after `n` Chebyshev steps.
    pub fn chebyshev_error_bound(&self, n: usize) -> f64 {
        2.0 * self.chebyshev_rate().powi(n as i32)
    }
}

/// Roots of the Chebyshev polynomial shifted to `[λ1, λ2]`, in the order
/// the cyclic iteration visits them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevCycle {
    pub n: usize,
    pub alphas: Vec<f64>,
    pub center: f64,
    pub half_width: f64,
}

/// Traversal order of the roots within one cycle of the two-level method.
///
/// The root set is the same either way, but rounding errors are amplified
/// very differently within a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RootOrder {
    /// Smallest root first, `α_k = d - c·cos(π(k + 1/2)/N)`. Early steps are
    /// long (`1/α ≈ 1/λ1`) and blow up the upper end of the spectrum, which
    /// later steps must cancel.
    #[default]
    Ascending,
    /// Largest root first, `α_k = d + c·cos(π(k + 1/2)/N)`.
    Descending,
}

/// `α_k = d + c·cos(π(k + 1/2)/N)` for `k = 0..N` (largest root first).
///
/// The cosine is evaluated as `sin(π(N - 2k - 1)/(2N))`, which is the same
/// value but makes mirrored roots exact negatives of each other around `d`
/// and gives exactly `d` for the middle root of an odd cycle.
pub fn chebyshev_roots(bounds: &SpectralBounds, n: usize) -> Result<ChebyshevCycle> {
    if n == 0 {
        return Err(Error::Parameter("Chebyshev cycle length must be positive".into()));
    }
    let d = bounds.center();
    let c = bounds.half_width();
    let alphas = (0..n)
        .map(|k| {
            let num = n as f64 - 2.0 * k as f64 - 1.0;
            d + c * (PI * num / (2.0 * n as f64)).sin()
        })
        .collect();
    Ok(ChebyshevCycle { n, alphas, center: d, half_width: c })
}

/// Roots in the requested traversal order.
pub fn chebyshev_roots_ordered(bounds: &SpectralBounds, n: usize, order: RootOrder) -> Result<ChebyshevCycle> {
    let mut cycle = chebyshev_roots(bounds, n)?;
    if order == RootOrder::Ascending {
        cycle.alphas.reverse();
    }
    Ok(cycle)
}

/// `C_k = T_k((λ1 + λ2)/(λ2 - λ1))` by the three-term recurrence.
pub fn chebyshev_scaling_factor(bounds: &SpectralBounds, k: usize) -> Result<f64> {
    if bounds.lambda1 >= bounds.lambda2 {
        return Err(Error::Parameter("scaling factors need lambda1 < lambda2".into()));
    }
    let t = (bounds.lambda1 + bounds.lambda2) / (bounds.lambda2 - bounds.lambda1);
    let (mut prev, mut cur) = (1.0, t);
    if k == 0 {
        return Ok(prev);
    }
    for _ in 1..k {
        (prev, cur) = (cur, 2.0 * t * cur - prev);
    }
    Ok(cur)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Richardson,
    /// Cyclic two-level Chebyshev with the given cycle length.
    Chebyshev2 { cycle: usize, order: RootOrder },
    Chebyshev3,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Richardson => "richardson",
            Method::Chebyshev2 { .. } => "cheb2",
            Method::Chebyshev3 => "cheb3",
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions<'a> {
    /// Number of updates to perform.
    pub iters: usize,
    /// Stop early once `‖r^k‖ ≤ tol · ‖r^0‖`.
    pub tol: Option<f64>,
    /// Exact solution; enables `error_norms`.
    pub reference: Option<&'a [f64]>,
}

impl<'a> SolveOptions<'a> {
    pub fn iters(iters: usize) -> Self {
        SolveOptions { iters, ..Default::default() }
    }

    pub fn with_reference(mut self, u: &'a [f64]) -> Self {
        self.reference = Some(u);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = Some(tol);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceHistory {
    /// `‖r^k‖₂` for `k = 0..=iterations`.
    pub residual_norms: Vec<f64>,
    /// `‖x^k - u‖₂`, present when a reference solution was supplied.
    pub error_norms: Option<Vec<f64>>,
    pub wall_time: Duration,
    /// A non-finite iterate or residual was met; recording stopped there.
    pub diverged: bool,
    /// Updates actually performed.
    pub iterations: usize,
}

impl ConvergenceHistory {
    pub fn final_residual(&self) -> Option<f64> {
        self.residual_norms.last().copied()
    }

    pub fn final_error(&self) -> Option<f64> {
        self.error_norms.as_ref().and_then(|e| e.last().copied())
    }

    /// `true` if no residual norm exceeds its predecessor.
    pub fn is_monotone(&self) -> bool {
        self.residual_norms.windows(2).all(|w| w[1] <= w[0])
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub history: ConvergenceHistory,
}

pub fn richardson<O: LinearOperator + ?Sized>(
    op: &O,
    d: &DirichletData,
    x0: &[f64],
    bounds: &SpectralBounds,
    opts: SolveOptions,
) -> Result<Solution> {
    solve(op, d, x0, bounds, Method::Richardson, opts)
}

/// Cyclic two-level Chebyshev with the roots visited largest first.
pub fn chebyshev2<O: LinearOperator + ?Sized>(
    op: &O,
    d: &DirichletData,
    x0: &[f64],
    bounds: &SpectralBounds,
    cycle: usize,
    opts: SolveOptions,
) -> Result<Solution> {
    solve(op, d, x0, bounds, Method::Chebyshev2 { cycle, order: RootOrder::Descending }, opts)
}

pub fn chebyshev3<O: LinearOperator + ?Sized>(
    op: &O,
    d: &DirichletData,
    x0: &[f64],
    bounds: &SpectralBounds,
    opts: SolveOptions,
) -> Result<Solution> {
    solve(op, d, x0, bounds, Method::Chebyshev3, opts)
}

pub fn solve<O: LinearOperator + ?Sized>(
    op: &O,
    d: &DirichletData,
    x0: &[f64],
    bounds: &SpectralBounds,
    method: Method,
    opts: SolveOptions,
) -> Result<Solution> {
    solve_observed(op, d, x0, bounds, method, opts, |_, _| {})
}

/// Like [`solve`], calling `observer(k, x^k)` for every recorded iterate.
pub fn solve_observed<O, F>(
    op: &O,
    d: &DirichletData,
    x0: &[f64],
    bounds: &SpectralBounds,
    method: Method,
    opts: SolveOptions,
    mut observer: F,
) -> Result<Solution>
where
    O: LinearOperator + ?Sized,
    F: FnMut(usize, &[f64]),
{
    let n = op.dim();
    if x0.len() != n {
        return Err(Error::Shape(format!("initial guess has length {}, operator {n}", x0.len())));
    }
    if let Some(u) = opts.reference {
        if u.len() != n {
            return Err(Error::Shape(format!("reference has length {}, operator {n}", u.len())));
        }
    }
    if let Some(tol) = opts.tol {
        if !(tol >= 0.0) {
            return Err(Error::Parameter(format!("tolerance must be non-negative, got {tol}")));
        }
    }
    d.check_dim(n)?;
    let cycle = match method {
        Method::Chebyshev2 { cycle, order } => Some(chebyshev_roots_ordered(bounds, cycle, order)?),
        Method::Chebyshev3 if bounds.lambda1 >= bounds.lambda2 => {
            return Err(Error::Parameter("three-level Chebyshev needs lambda1 < lambda2".into()));
        }
        _ => None,
    };

    let start = Instant::now();
    let mut rec = Recorder::new(op, d, opts);
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    if rec.record(&x, &mut r)? {
        observer(0, &x);
        let omega = bounds.richardson_step();
        let dc = bounds.center();
        let c = bounds.half_width();
        let mut p = vec![0.0; n];
        let mut alpha = 0.0;
        for k in 0..opts.iters {
            match method {
                Method::Richardson => axpy(omega, &r, &mut x),
                Method::Chebyshev2 { .. } => {
                    let roots = &cycle.as_ref().expect("cycle built above").alphas;
                    axpy(1.0 / roots[k % roots.len()], &r, &mut x);
                }
                Method::Chebyshev3 => {
                    if k == 0 {
                        p.copy_from_slice(&r);
                        alpha = 1.0 / dc;
                    } else {
                        // The second step carries an extra factor 2 relative
                        // to the stationary `(c α / 2)²`.
                        let beta = if k == 1 { 0.5 * (c * alpha).powi(2) } else { (c * alpha / 2.0).powi(2) };
                        for (pi, ri) in p.iter_mut().zip(&r) {
                            *pi = ri + beta * *pi;
                        }
                        alpha = 1.0 / (dc - beta / alpha);
                    }
                    axpy(alpha, &p, &mut x);
                }
            }
            rec.history.iterations = k + 1;
            if !rec.record(&x, &mut r)? {
                break;
            }
            observer(k + 1, &x);
        }
    }
    rec.history.wall_time = start.elapsed();
    Ok(Solution { x, history: rec.history })
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

struct Recorder<'o, 'a, O: ?Sized> {
    op: &'o O,
    d: &'o DirichletData,
    opts: SolveOptions<'a>,
    history: ConvergenceHistory,
}

impl<'o, 'a, O: LinearOperator + ?Sized> Recorder<'o, 'a, O> {
    fn new(op: &'o O, d: &'o DirichletData, opts: SolveOptions<'a>) -> Self {
        let history = ConvergenceHistory {
            error_norms: opts.reference.map(|_| Vec::new()),
            ..Default::default()
        };
        Recorder { op, d, opts, history }
    }

    /// Computes the masked residual of `x` into `r` and records norms.
    /// Returns whether iteration should continue.
    fn record(&mut self, x: &[f64], r: &mut [f64]) -> Result<bool> {
        match self.op.residual(x, r) {
            Ok(()) => {}
            Err(Error::Evaluation(_)) => {
                self.history.diverged = true;
                return Ok(false);
            }
            Err(e) => return Err(e),
        }
        mask_dirichlet(r, self.d);
        let rn = norm2(r);
        if !rn.is_finite() {
            self.history.diverged = true;
            return Ok(false);
        }
        self.history.residual_norms.push(rn);
        if let (Some(u), Some(errs)) = (self.opts.reference, self.history.error_norms.as_mut()) {
            errs.push(dist2(x, u));
        }
        if let Some(tol) = self.opts.tol {
            if rn <= tol * self.history.residual_norms[0] {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
