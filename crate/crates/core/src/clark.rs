//! Level sets `B(ζ) = α` on the circle and the Clark measures carried by them.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::blaschke::{CirclePoint, FiniteBlaschke};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_circle, QuadratureConfig};
use crate::symbol::SymbolRep;
use crate::C64;

const UNIMODULAR_TOL: f64 = 1e-12;
const MAX_ROOT_ITERATIONS: usize = 200;

/// Continuous argument `Θ(θ)` of `B(e^{iθ})` with `Θ(0) ∈ [0, 2π)`.
///
/// `Θ' = |B'| > 0`, so `Θ` is strictly increasing with `Θ(2π) − Θ(0) = 2πN`.
#[derive(Clone, Copy, Debug)]
pub struct PhaseFunction<'a> {
    b: &'a FiniteBlaschke,
    shift: f64,
}

impl<'a> PhaseFunction<'a> {
    pub fn new(b: &'a FiniteBlaschke) -> Self {
        let raw0 = b.raw_phase(0.0).0;
        let mut shift = -TAU * (raw0 / TAU).floor();
        if raw0 + shift >= TAU {
            shift -= TAU;
        }
        PhaseFunction { b, shift }
    }

    pub fn blaschke(&self) -> &'a FiniteBlaschke {
        self.b
    }

    /// `Θ(0)`
    pub fn start(&self) -> f64 {
        self.value(0.0)
    }

    pub fn value(&self, theta: f64) -> f64 {
        self.b.raw_phase(theta).0 + self.shift
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        self.b.abs_derivative_at(C64::from_polar(1.0, theta))
    }

    pub fn value_and_derivative(&self, theta: f64) -> (f64, f64) {
        let (v, d) = self.b.raw_phase(theta);
        (v + self.shift, d)
    }

    /// Solve `Θ(θ) = target` on `[lo, hi]`, where the root is bracketed.
    ///
    /// Newton steps using the exact derivative, falling back to bisection
    /// whenever a step leaves the current bracket or stops contracting.
    pub fn solve(&self, target: f64, lo: f64, hi: f64) -> Result<f64> {
        let (mut a, mut b) = (lo, hi);
        let (v0, d0) = self.value_and_derivative(a);
        if v0 == target {
            return Ok(a);
        }
        let guess = a + (target - v0) / d0;
        let mut x = if guess > a && guess < b { guess } else { 0.5 * (a + b) };
        let g_tol = 1e-13 * (self.b.degree() as f64 + target.abs());
        let mut last_step = b - a;
        for _ in 0..MAX_ROOT_ITERATIONS {
            let (v, d) = self.value_and_derivative(x);
            let g = v - target;
            if g.abs() <= g_tol {
                return Ok(x);
            }
            if g < 0.0 {
                a = x;
            } else {
                b = x;
            }
            let mut nx = x - g / d;
            // bisect when Newton leaves the bracket or fails to halve its step,
            // which happens when it bounces across a steep stretch of Θ
            if !(nx > a && nx < b) || (nx - x).abs() > 0.5 * last_step {
                nx = 0.5 * (a + b);
            }
            last_step = (nx - x).abs();
            if (nx - x).abs() <= 4.0 * f64::EPSILON * TAU || b - a <= 4.0 * f64::EPSILON * TAU {
                return Ok(nx);
            }
            x = nx;
        }
        Err(Error::RootFinding { target, lo, hi })
    }

    /// One Newton step on `arg(B(ζ) ᾱ)`, which is free of the
    /// accumulated rounding in the summed phase.
    fn polish(&self, theta: f64, alpha: C64) -> f64 {
        let z = C64::from_polar(1.0, theta);
        let r = self.b.eval(z) * alpha.conj();
        theta - r.arg() / self.b.abs_derivative_at(z)
    }
}

fn check_unimodular(alpha: C64) -> Result<()> {
    if (alpha.norm() - 1.0).abs() > UNIMODULAR_TOL || !alpha.norm().is_finite() {
        return Err(Error::NotUnimodular {
            modulus: alpha.norm(),
        });
    }
    Ok(())
}

/// The `N` points of `B^{-1}(α)`, sorted by angle in `[0, 2π)`.
pub fn clark_support(b: &FiniteBlaschke, alpha: C64) -> Result<Vec<CirclePoint>> {
    check_unimodular(alpha)?;
    let phase = PhaseFunction::new(b);
    let start = phase.start();
    let mut offset = (alpha.arg() - start).rem_euclid(TAU);
    if offset >= TAU {
        offset = 0.0;
    }
    let mut out = Vec::with_capacity(b.degree());
    let mut lo = 0.0;
    for k in 0..b.degree() {
        let target = start + offset + TAU * k as f64;
        let theta = if offset == 0.0 && k == 0 {
            0.0
        } else {
            phase.solve(target, lo, TAU)?
        };
        let mut t = phase.polish(theta, alpha);
        t = phase.polish(t, alpha);
        // keep sorted and inside [0, 2π) despite the polish
        if t < lo || t >= TAU || (t - theta).abs() > PI / b.degree() as f64 {
            t = theta;
        }
        out.push(CirclePoint::from_angle(t));
        lo = theta;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClarkAtom {
    pub point: CirclePoint,
    pub weight: f64,
}

/// Atomic measure `μ_α = Σ_k |B'(ζ_k)|^{-1} δ_{ζ_k}` on `B^{-1}(α)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClarkMeasure {
    pub alpha: C64,
    pub atoms: Vec<ClarkAtom>,
    #[serde(skip)]
    basis: u64,
}

impl ClarkMeasure {
    /// Fingerprint of the Blaschke product the atoms were computed for.
    pub fn basis(&self) -> u64 {
        self.basis
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// `∫ f dμ_α`
    pub fn integrate(&self, f: impl Fn(&CirclePoint) -> C64) -> C64 {
        self.atoms.iter().map(|a| f(&a.point) * a.weight).sum()
    }
}

pub fn clark_measure(b: &FiniteBlaschke, alpha: C64) -> Result<ClarkMeasure> {
    let atoms = clark_support(b, alpha)?
        .into_iter()
        .map(|p| ClarkAtom {
            weight: 1.0 / b.abs_derivative(&p),
            point: p,
        })
        .collect();
    Ok(ClarkMeasure {
        alpha,
        atoms,
        basis: b.fingerprint(),
    })
}

/// `max_k 1/|B'(ζ_k)|` over `B^{-1}(α)`, the norm of `β_N(U_α)`.
pub fn clark_beta_norm(b: &FiniteBlaschke, alpha: C64) -> Result<f64> {
    Ok(clark_measure(b, alpha)?
        .atoms
        .iter()
        .map(|a| a.weight)
        .fold(0.0, f64::max))
}

/// The `m`-th roots of unity `e^{2πik/m}`.
pub fn alpha_grid(m: usize) -> Vec<C64> {
    (0..m)
        .map(|k| C64::from_polar(1.0, TAU * k as f64 / m as f64))
        .collect()
}

/// Outcome of averaging Clark measures over an α-grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Disintegration {
    pub lhs: C64,
    pub rhs: C64,
    pub gap: f64,
    pub alpha_count: usize,
    pub converged: bool,
}

/// Compares `∫∫ f dμ_α dα` (α-grid average, doubled until stable) with
/// `∫ f dm`.
///
/// The α-grid is capped so that the total number of atoms stays within
/// `cfg.max_points`.
pub fn disintegration_check(
    f: &SymbolRep,
    b: &FiniteBlaschke,
    alpha_count: usize,
    cfg: &QuadratureConfig,
) -> Result<Disintegration> {
    if !alpha_count.is_power_of_two() {
        return Err(Error::param("alpha_count", "must be a power of two"));
    }
    cfg.validate()?;
    let measure_sum = |alpha: C64| -> Result<C64> {
        Ok(clark_measure(b, alpha)?.integrate(|z| f.eval(z)))
    };
    let cap = (cfg.max_points / b.degree()).max(alpha_count);
    let mut m = alpha_count;
    let mut sum: C64 = alpha_grid(m)
        .into_iter()
        .map(measure_sum)
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let mut lhs = sum / m as f64;
    let mut converged = false;
    while 2 * m <= cap {
        // odd multiples of π/m are the new α's
        let new: C64 = (0..m)
            .map(|k| measure_sum(C64::from_polar(1.0, PI * (2 * k + 1) as f64 / m as f64)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum();
        sum += new;
        m *= 2;
        let next = sum / m as f64;
        let change = (next - lhs).norm();
        lhs = next;
        if change <= cfg.abs_tol.max(cfg.rel_tol * lhs.norm()) {
            converged = true;
            break;
        }
    }
    let rhs = integrate_circle(|z| f.eval(z), cfg)?.value;
    Ok(Disintegration {
        lhs,
        rhs,
        gap: (lhs - rhs).norm(),
        alpha_count: m,
        converged,
    })
}
