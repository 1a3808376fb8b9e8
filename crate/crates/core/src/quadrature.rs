//! Adaptive equal-weight quadrature on the unit circle.
//!
//! Integrals are taken against the normalized measure `m`. Two node
//! families are available:
//!
//! - **uniform**: `θ_k = 2πk/M`, the periodic trapezoid rule;
//! - **phase**: nodes equispaced in the continuous argument of a Blaschke
//!   product `B`, i.e. `arg B(ζ_k) = Θ(0) + 2πNk/K`, with weights
//!   `N / (K |B'(ζ_k)|)`. This is the trapezoid rule after the change of
//!   variables `θ ↦ arg B(e^{iθ})`; it resolves kernels of zeros arbitrarily
//!   close to the circle with a node count proportional to `N`.
//!
//! Both families are nested under doubling, so each refinement only
//! evaluates the new nodes. Sums are formed over fixed-size chunks and
//! reduced pairwise in chunk order, which makes results independent of the
//! thread count.

use std::f64::consts::TAU;

use num_complex::ComplexFloat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blaschke::{CirclePoint, FiniteBlaschke};
use crate::clark::PhaseFunction;
use crate::error::{Error, Result};
use crate::C64;

/// Node family selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// Uniform when the kernel-resolving size fits in a quarter of
    /// `max_points` and in `UNIFORM_POINTS_PER_ZERO · N`, phase-adapted otherwise.
    Auto,
    Uniform,
    Phase,
}

/// Above this many uniform points per zero the phase grid is cheaper.
pub const UNIFORM_POINTS_PER_ZERO: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub initial_points: usize,
    pub max_points: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub grid: GridKind,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            initial_points: 256,
            max_points: 1 << 20,
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            grid: GridKind::Auto,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.initial_points.is_power_of_two() {
            return Err(Error::param("quadrature.initial_points", "must be a power of two"));
        }
        if !self.max_points.is_power_of_two() {
            return Err(Error::param("quadrature.max_points", "must be a power of two"));
        }
        if self.initial_points > self.max_points {
            return Err(Error::param(
                "quadrature.initial_points",
                "must not exceed quadrature.max_points",
            ));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::param("quadrature.abs_tol", "must be positive"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::param("quadrature.rel_tol", "must be positive"));
        }
        Ok(())
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.abs_tol = tol;
        self.rel_tol = tol;
        self
    }

    pub fn with_grid(mut self, grid: GridKind) -> Self {
        self.grid = grid;
        self
    }

    /// Uniform grid size that resolves every kernel peak of `b`:
    /// `8 Σ_j (1 + |λ_j|)/(1 − |λ_j|)`, rounded up to a power of two.
    pub fn kernel_resolving_points(b: &FiniteBlaschke) -> usize {
        let s: f64 = b
            .zeros()
            .iter()
            .map(|z| {
                let r = z.abs();
                (1.0 + r) / (1.0 - r)
            })
            .sum();
        let need = (8.0 * s).ceil();
        if need >= (1u64 << 62) as f64 {
            return 1 << 62;
        }
        (need as usize).max(1).next_power_of_two()
    }

    /// Node family actually used for integrands built from `b`.
    pub fn resolve_grid(&self, b: &FiniteBlaschke) -> GridKind {
        match self.grid {
            GridKind::Auto => {
                let need = Self::kernel_resolving_points(b);
                if need <= self.max_points / 4 && need <= UNIFORM_POINTS_PER_ZERO * b.degree() {
                    GridKind::Uniform
                } else {
                    GridKind::Phase
                }
            }
            g => g,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntegralResult {
    pub value: C64,
    pub estimated_error: f64,
    pub points_used: usize,
    pub converged: bool,
}

/// Result of a vector-valued adaptive integral.
#[derive(Clone, Debug)]
pub struct VectorIntegral {
    pub values: Vec<C64>,
    pub estimated_error: f64,
    pub points_used: usize,
    pub converged: bool,
    pub grid: GridKind,
}

impl VectorIntegral {
    fn into_scalar(self) -> IntegralResult {
        IntegralResult {
            value: self.values[0],
            estimated_error: self.estimated_error,
            points_used: self.points_used,
            converged: self.converged,
        }
    }
}

/// Quadrature node; the integral over a level with `K` nodes is
/// `(1/K) Σ weight · f(point)`.
#[derive(Clone, Copy, Debug)]
pub struct Node {
    pub point: CirclePoint,
    pub weight: f64,
}

enum Grid<'a> {
    Uniform {
        count: usize,
    },
    Phase {
        phase: PhaseFunction<'a>,
        degree: f64,
        angles: Vec<f64>,
    },
}

impl<'a> Grid<'a> {
    fn count(&self) -> usize {
        match self {
            Grid::Uniform { count } => *count,
            Grid::Phase { angles, .. } => angles.len(),
        }
    }

    fn start_uniform(count: usize) -> (Self, Vec<Node>) {
        let nodes = (0..count)
            .map(|k| Node {
                point: CirclePoint::from_angle(TAU * k as f64 / count as f64),
                weight: 1.0,
            })
            .collect();
        (Grid::Uniform { count }, nodes)
    }

    fn start_phase(b: &'a FiniteBlaschke, count: usize) -> Result<(Self, Vec<Node>)> {
        let phase = PhaseFunction::new(b);
        let n = b.degree() as f64;
        let start = phase.start();
        let step = TAU * n / count as f64;
        let mut angles = Vec::with_capacity(count);
        let mut nodes = Vec::with_capacity(count);
        let mut lo = 0.0;
        for k in 0..count {
            let target = start + step * k as f64;
            let theta = if k == 0 {
                0.0
            } else {
                phase.solve(target, lo, TAU)?
            };
            let d = phase.derivative(theta);
            angles.push(theta);
            nodes.push(Node {
                point: CirclePoint::from_angle(theta),
                weight: n / d,
            });
            lo = theta;
        }
        Ok((
            Grid::Phase {
                phase,
                degree: n,
                angles,
            },
            nodes,
        ))
    }

    fn refine(&mut self) -> Result<Vec<Node>> {
        match self {
            Grid::Uniform { count } => {
                let m = 2 * *count;
                let nodes = (0..*count)
                    .map(|k| Node {
                        point: CirclePoint::from_angle(TAU * (2 * k + 1) as f64 / m as f64),
                        weight: 1.0,
                    })
                    .collect();
                *count = m;
                Ok(nodes)
            }
            Grid::Phase {
                phase,
                degree,
                angles,
            } => {
                let k_old = angles.len();
                let start = phase.start();
                let step = TAU * *degree / (2 * k_old) as f64;
                let phase = &*phase;
                let new: Vec<(f64, f64)> = (0..k_old)
                    .into_par_iter()
                    .map(|k| {
                        let lo = angles[k];
                        let hi = if k + 1 < k_old { angles[k + 1] } else { TAU };
                        let target = start + step * (2 * k + 1) as f64;
                        let theta = phase.solve(target, lo, hi)?;
                        Ok((theta, phase.derivative(theta)))
                    })
                    .collect::<Result<_>>()?;
                let mut merged = Vec::with_capacity(2 * k_old);
                for (old, (theta, _)) in angles.iter().zip(&new) {
                    merged.push(*old);
                    merged.push(*theta);
                }
                *angles = merged;
                let n = *degree;
                Ok(new
                    .into_iter()
                    .map(|(theta, d)| Node {
                        point: CirclePoint::from_angle(theta),
                        weight: n / d,
                    })
                    .collect())
            }
        }
    }
}

fn pairwise_reduce(mut parts: Vec<Vec<C64>>) -> Vec<C64> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap_or_default()
}

fn accumulate<F>(nodes: &[Node], dim: usize, f: &F) -> Result<Vec<C64>>
where
    F: Fn(&[Node], &mut [C64]) -> Result<()> + Sync,
{
    if nodes.is_empty() {
        return Ok(vec![C64::new(0.0, 0.0); dim]);
    }
    // Chunk size depends only on the node count, so the reduction tree is fixed.
    let chunk = (nodes.len() / 64).max(256);
    let parts = nodes
        .par_chunks(chunk)
        .map(|c| {
            let mut acc = vec![C64::new(0.0, 0.0); dim];
            f(c, &mut acc)?;
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_reduce(parts))
}

/// Which node family to use, and how to start it.
#[derive(Clone, Copy, Debug)]
pub enum GridPlan<'a> {
    Uniform { initial: usize },
    Phase { b: &'a FiniteBlaschke, initial: usize },
}

impl<'a> GridPlan<'a> {
    /// Plan for integrands built from `b` under `cfg`.
    pub fn for_blaschke(b: &'a FiniteBlaschke, cfg: &QuadratureConfig) -> Self {
        match cfg.resolve_grid(b) {
            GridKind::Phase => {
                let n = b.degree();
                let per_turn = (cfg.initial_points.div_ceil(n)).next_power_of_two().max(4);
                GridPlan::Phase {
                    b,
                    initial: n * per_turn,
                }
            }
            _ => GridPlan::Uniform {
                initial: cfg
                    .initial_points
                    .max(QuadratureConfig::kernel_resolving_points(b))
                    .min(cfg.max_points),
            },
        }
    }

    pub fn kind(&self) -> GridKind {
        match self {
            GridPlan::Uniform { .. } => GridKind::Uniform,
            GridPlan::Phase { .. } => GridKind::Phase,
        }
    }
}

/// Adaptive integration of a `dim`-vector valued integrand.
///
/// `accumulate(nodes, acc)` must add `Σ node.weight · f(node.point)` into
/// `acc`. Refinement doubles the node count until successive levels differ
/// (max-abs over components) by at most `max(abs_tol, rel_tol · max|I|)`,
/// or until `max_points` would be exceeded.
pub fn integrate_vector<F>(
    plan: GridPlan<'_>,
    dim: usize,
    cfg: &QuadratureConfig,
    accumulate_fn: F,
) -> Result<VectorIntegral>
where
    F: Fn(&[Node], &mut [C64]) -> Result<()> + Sync,
{
    cfg.validate()?;
    let (mut grid, nodes) = match plan {
        GridPlan::Uniform { initial } => Grid::start_uniform(initial),
        GridPlan::Phase { b, initial } => Grid::start_phase(b, initial)?,
    };
    let mut sum = accumulate(&nodes, dim, &accumulate_fn)?;
    let mut count = grid.count();
    let mut values: Vec<C64> = sum.iter().map(|s| s / count as f64).collect();
    let mut estimated_error = f64::INFINITY;
    let mut converged = false;
    while 2 * count <= cfg.max_points {
        let new = grid.refine()?;
        let part = accumulate(&new, dim, &accumulate_fn)?;
        sum.iter_mut().zip(&part).for_each(|(s, p)| *s += p);
        count = grid.count();
        let next: Vec<C64> = sum.iter().map(|s| s / count as f64).collect();
        estimated_error = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = next.iter().map(|z| z.abs()).fold(0.0, f64::max);
        values = next;
        if estimated_error <= cfg.abs_tol.max(cfg.rel_tol * scale) {
            converged = true;
            break;
        }
    }
    Ok(VectorIntegral {
        values,
        estimated_error,
        points_used: count,
        converged,
        grid: plan.kind(),
    })
}

fn sample_checked<F>(f: &F, node: &Node) -> Result<C64>
where
    F: Fn(&CirclePoint) -> C64,
{
    let v = f(&node.point);
    if !(v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::NonFiniteSample {
            angle: node.point.angle(),
        });
    }
    Ok(v)
}

fn scalar<F>(plan: GridPlan<'_>, cfg: &QuadratureConfig, f: F) -> Result<IntegralResult>
where
    F: Fn(&CirclePoint) -> C64 + Sync,
{
    integrate_vector(plan, 1, cfg, |nodes, acc| {
        // pairwise within the chunk as well
        let vals = nodes
            .iter()
            .map(|n| sample_checked(&f, n).map(|v| v * n.weight))
            .collect::<Result<Vec<_>>>()?;
        acc[0] += pairwise_sum(&vals);
        Ok(())
    })
    .map(VectorIntegral::into_scalar)
}

fn pairwise_sum(v: &[C64]) -> C64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// `∫ f dm` on the uniform trapezoid grid, starting at `cfg.initial_points`.
pub fn integrate_circle<F>(f: F, cfg: &QuadratureConfig) -> Result<IntegralResult>
where
    F: Fn(&CirclePoint) -> C64 + Sync,
{
    scalar(
        GridPlan::Uniform {
            initial: cfg.initial_points,
        },
        cfg,
        f,
    )
}

/// `∫ f dm` for an integrand whose peaks come from the zeros of `b`.
pub fn integrate_circle_for<F>(b: &FiniteBlaschke, f: F, cfg: &QuadratureConfig) -> Result<IntegralResult>
where
    F: Fn(&CirclePoint) -> C64 + Sync,
{
    scalar(GridPlan::for_blaschke(b, cfg), cfg, f)
}

/// `∫ f dν_N`, with `dν_N = |B'|/N dm`.
pub fn integrate_nu<F>(b: &FiniteBlaschke, f: F, cfg: &QuadratureConfig) -> Result<IntegralResult>
where
    F: Fn(&CirclePoint) -> C64 + Sync,
{
    let n = b.degree() as f64;
    integrate_circle_for(b, |z| f(z) * (b.abs_derivative(z) / n), cfg)
}

/// `(∫ |f|² dν_N)^{1/2}`
pub fn weighted_l2_norm<F>(f: F, b: &FiniteBlaschke, cfg: &QuadratureConfig) -> Result<f64>
where
    F: Fn(&CirclePoint) -> C64 + Sync,
{
    let r = integrate_nu(b, |z| C64::new(f(z).norm_sqr(), 0.0), cfg)?;
    Ok(r.value.re.max(0.0).sqrt())
}

/// Poisson integral `∫ f(ζ) (1 − |λ|²)/|ζ − λ|² dm(ζ)`.
pub fn poisson_integral<F>(f: F, lambda: C64, cfg: &QuadratureConfig) -> Result<IntegralResult>
where
    F: Fn(&CirclePoint) -> C64 + Sync,
{
    let r = lambda.abs();
    if !(r < 1.0) {
        return Err(Error::OutsideDisk { point: lambda });
    }
    let w = (1.0 - r) * (1.0 + r);
    let need = ((8.0 * (1.0 + r) / (1.0 - r)).ceil() as usize).next_power_of_two();
    let initial = cfg.initial_points.max(need).min(cfg.max_points);
    scalar(GridPlan::Uniform { initial }, cfg, |z| {
        f(z) * (w / (z.value() - lambda).norm_sqr())
    })
}
