//! Sweeps over `N` for the trace asymptotics and the supporting estimates.
//!
//! Every sweep evaluates each `N` independently (in parallel) and returns
//! records ordered by `N`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::blaschke::{angular_partial_sums, AngularDiagnostics, CirclePoint, FiniteBlaschke, ZeroSequence};
use crate::clark::{alpha_grid, clark_beta_norm, clark_measure};
use crate::error::{Error, Result};
use crate::operators::{
    apply_function, build_clark_spectral, build_truncated_toeplitz, trace, trace_norm, OperatorMatrix,
};
use crate::quadrature::{integrate_circle, integrate_nu, integrate_vector, GridPlan, QuadratureConfig};
use crate::symbol::{ScalarFunction, SymbolRep, TrigPoly};
use crate::C64;

/// Everything a sweep needs.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub sequence: ZeroSequence,
    pub symbol: SymbolRep,
    pub function: ScalarFunction,
    pub n_values: Vec<usize>,
    pub alpha_count: usize,
    pub max_n: usize,
    /// Circle grid size for the angular partial sums.
    pub grid_points: usize,
    /// Number of terms `J` in the angular partial sums.
    pub partial_terms: usize,
    pub thresholds: Vec<f64>,
    pub seed: u64,
    pub quadrature: QuadratureConfig,
}

impl ExperimentConfig {
    pub fn new(sequence: ZeroSequence, symbol: SymbolRep, function: ScalarFunction, n_values: Vec<usize>) -> Self {
        ExperimentConfig {
            sequence,
            symbol,
            function,
            n_values,
            alpha_count: 32,
            max_n: 256,
            grid_points: 64,
            partial_terms: 100_000,
            thresholds: vec![10.0, 100.0, 1000.0],
            seed: 0,
            quadrature: QuadratureConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sequence.validate()?;
        self.quadrature.validate()?;
        if self.n_values.is_empty() {
            return Err(Error::param("sweep.n_values", "must not be empty"));
        }
        if self.n_values[0] == 0 {
            return Err(Error::param("sweep.n_values", "entries must be positive"));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("sweep.n_values", "must be strictly increasing"));
        }
        if let Some(&n) = self.n_values.last() {
            if n > self.max_n {
                return Err(Error::param(
                    "sweep.n_values",
                    format!("{n} exceeds sweep.max_n = {}", self.max_n),
                ));
            }
        }
        if !self.alpha_count.is_power_of_two() {
            return Err(Error::param("sweep.alpha_count", "must be a power of two"));
        }
        if self.grid_points == 0 {
            return Err(Error::param("sweep.grid_points", "must be positive"));
        }
        if self.partial_terms == 0 {
            return Err(Error::param("sweep.partial_terms", "must be positive"));
        }
        self.function.check_pairing(&self.symbol)
    }
}

/// One row of a convergence table; `gap = |lhs − rhs|`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub n: usize,
    pub lhs: C64,
    pub rhs: C64,
    pub gap: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

impl ConvergenceRecord {
    pub fn new(n: usize, lhs: C64, rhs: C64) -> Self {
        ConvergenceRecord {
            n,
            lhs,
            rhs,
            gap: (lhs - rhs).norm(),
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

impl Serialize for ConvergenceRecord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(7))?;
        m.serialize_entry("N", &self.n)?;
        m.serialize_entry("lhs_re", &self.lhs.re)?;
        m.serialize_entry("lhs_im", &self.lhs.im)?;
        m.serialize_entry("rhs_re", &self.rhs.re)?;
        m.serialize_entry("rhs_im", &self.rhs.im)?;
        m.serialize_entry("gap", &self.gap)?;
        m.serialize_entry("diagnostics", &self.diagnostics)?;
        m.end()
    }
}

/// A single named quantity per `N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub value: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

impl SweepRecord {
    pub fn new(n: usize, value: f64) -> Self {
        SweepRecord {
            n,
            value,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn sweep<T, F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &FiniteBlaschke) -> Result<T> + Sync,
{
    cfg.validate()?;
    cfg.n_values
        .par_iter()
        .map(|&n| {
            let b = FiniteBlaschke::from_sequence(&cfg.sequence, n)?;
            f(n, &b)
        })
        .collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// `∫ ζ^k dν_N` for `k ≥ 0`.
pub fn nu_moment(b: &FiniteBlaschke, k: i32, cfg: &QuadratureConfig) -> Result<C64> {
    let p = TrigPoly::character(k);
    Ok(integrate_nu(b, |z| p.eval(z.value()), cfg)?.value)
}

/// `(1/N) Tr f(T_{B_N}(φ))` against `∫ f∘φ dν_N`.
pub fn szego_gap(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRecord>> {
    let q = &cfg.quadrature;
    sweep(cfg, |n, b| {
        let t = build_truncated_toeplitz(b, &cfg.symbol, q)?;
        let ft = apply_function(&t, &cfg.function)?;
        let lhs = trace(&ft) / n as f64;
        let r = integrate_nu(b, |z| cfg.function.eval(cfg.symbol.eval(z)), q)?;
        let m1 = nu_moment(b, 1, q)?;
        Ok(ConvergenceRecord::new(n, lhs, r.value)
            .with("matrix_points", t.points_used as f64)
            .with("matrix_converged", flag(t.converged))
            .with("rhs_points", r.points_used as f64)
            .with("rhs_converged", flag(r.converged))
            .with("nu_moment1_re", m1.re)
            .with("nu_moment1_im", m1.im))
    })
}

/// `Tr[T_{B_N}(β_N) f(T_{B_N}(φ))]` against `∫ f∘φ dm`.
pub fn stz_trace(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRecord>> {
    let q = &cfg.quadrature;
    let rhs = integrate_circle(|z| cfg.function.eval(cfg.symbol.eval(z)), q)?;
    sweep(cfg, |n, b| {
        let tb = build_truncated_toeplitz(b, &SymbolRep::beta(b), q)?;
        let t = build_truncated_toeplitz(b, &cfg.symbol, q)?;
        let ft = apply_function(&t, &cfg.function)?;
        let lhs = trace(&tb.matmul(&ft)?);
        Ok(ConvergenceRecord::new(n, lhs, rhs.value)
            .with("beta_points", tb.points_used as f64)
            .with("matrix_points", t.points_used as f64)
            .with("matrix_converged", flag(t.converged && tb.converged)))
    })
}

fn seeded_alphas(seed: u64, n: usize, count: usize) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    (0..count)
        .map(|_| C64::from_polar(1.0, std::f64::consts::TAU * rng.random::<f64>()))
        .collect()
}

/// `max_k 1/|B'_N(ζ_k)|` over the Clark support, summarized over α-grids.
///
/// `value` is the maximum over the equispaced grid; the diagnostics carry
/// its median and minimum and the same statistics on a seeded random grid.
pub fn angular_condition_a(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    sweep(cfg, |n, b| {
        let norms = |alphas: Vec<C64>| -> Result<Vec<f64>> {
            alphas.into_iter().map(|a| clark_beta_norm(b, a)).collect()
        };
        let mut grid = norms(alpha_grid(cfg.alpha_count))?;
        let mut random = norms(seeded_alphas(cfg.seed, n, cfg.alpha_count))?;
        let max = grid.iter().copied().fold(0.0, f64::max);
        let min = grid.iter().copied().fold(f64::INFINITY, f64::min);
        let rmax = random.iter().copied().fold(0.0, f64::max);
        Ok(SweepRecord::new(n, max)
            .with("max", max)
            .with("median", median(&mut grid))
            .with("min", min)
            .with("random_max", rmax)
            .with("random_median", median(&mut random)))
    })
}

/// Angular partial sums of the full sequence on an equispaced grid.
pub fn angular_condition_b(cfg: &ExperimentConfig) -> Result<AngularDiagnostics> {
    cfg.sequence.validate()?;
    let grid = CirclePoint::equispaced(cfg.grid_points);
    angular_partial_sums(&cfg.sequence, &grid, cfg.partial_terms, &cfg.thresholds)
}

/// `(1/N) avg_α ‖T_{B_N}(φ) − φ(U_α)‖²_{S2}` (`lhs`) against the expanded
/// square `∫|φ|² dν_N − ‖T_{B_N}(φ)‖²_{S2}/N` (`rhs`).
pub fn hs_approx_gap(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRecord>> {
    let q = &cfg.quadrature;
    sweep(cfg, |n, b| {
        let t = build_truncated_toeplitz(b, &cfg.symbol, q)?;
        let mut acc = 0.0;
        for a in alpha_grid(cfg.alpha_count) {
            let u = build_clark_spectral(b, &clark_measure(b, a)?, &cfg.symbol)?;
            acc += (&t.matrix - &u.matrix).frobenius_norm().powi(2);
        }
        let lhs = acc / (cfg.alpha_count as f64 * n as f64);
        let sq = integrate_nu(b, |z| C64::new(cfg.symbol.eval(z).norm_sqr(), 0.0), q)?;
        let rhs = sq.value.re - t.matrix.frobenius_norm().powi(2) / n as f64;
        Ok(ConvergenceRecord::new(n, C64::new(lhs, 0.0), C64::new(rhs, 0.0))
            .with("value", lhs)
            .with("alpha_count", cfg.alpha_count as f64))
    })
}

/// `‖T_{B_N}(φ)T_{B_N}(ψ) − T_{B_N}(φψ)‖_{S1}` per `N`.
pub fn product_defect_s1(cfg: &ExperimentConfig, phi: &SymbolRep, psi: &SymbolRep) -> Result<Vec<SweepRecord>> {
    let (p, s) = match (phi.as_trig(), psi.as_trig()) {
        (Some(p), Some(s)) => (p, s),
        _ => {
            return Err(Error::NotTrigPoly(
                "product defect needs trigonometric-polynomial symbols".into(),
            ))
        }
    };
    let prod = SymbolRep::trig(p.mul(s));
    let q = &cfg.quadrature;
    sweep(cfg, |n, b| {
        let tp = build_truncated_toeplitz(b, phi, q)?;
        let ts = build_truncated_toeplitz(b, psi, q)?;
        let tps = build_truncated_toeplitz(b, &prod, q)?;
        let d = &tp.matmul(&ts)?.matrix - &tps.matrix;
        Ok(SweepRecord::new(n, d.trace_norm()))
    })
}

/// `‖T_{B_N}(β_N)[f(T_{B_N}(φ)) − T_{B_N}(f∘φ)]‖_{S1}` per `N`.
pub fn stz_defect_s1(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    if !cfg.function.is_poly() {
        return Err(Error::InvalidPairing("the defect needs a polynomial function".into()));
    }
    if cfg.symbol.as_trig().is_none() {
        return Err(Error::NotTrigPoly("the defect needs a trigonometric-polynomial symbol".into()));
    }
    let composed = cfg.symbol.compose(&cfg.function)?;
    let q = &cfg.quadrature;
    sweep(cfg, |n, b| {
        let tb = build_truncated_toeplitz(b, &SymbolRep::beta(b), q)?;
        let ft = apply_function(&build_truncated_toeplitz(b, &cfg.symbol, q)?, &cfg.function)?;
        let tf = build_truncated_toeplitz(b, &composed, q)?;
        let d = OperatorMatrix::new(&ft.matrix - &tf.matrix, b)?;
        let v = tb.matmul(&d)?;
        Ok(SweepRecord::new(n, trace_norm(&v)))
    })
}

/// Random trigonometric polynomials of degree `degree`, coefficients uniform
/// in the unit square.
pub fn random_trig_polys(seed: u64, count: usize, degree: i32) -> Vec<TrigPoly> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            TrigPoly::new((-degree..=degree).map(|k| {
                let re = 2.0 * rng.random::<f64>() - 1.0;
                let im = 2.0 * rng.random::<f64>() - 1.0;
                (k, C64::new(re, im))
            }))
        })
        .collect()
}

/// Fejér-operator measurements per `N`.
#[derive(Clone, Debug, Serialize)]
pub struct FejerReport {
    /// `value`: largest `‖E_N f‖/‖f‖` in `L²(ν_N)` over the random polynomials.
    pub contraction: Vec<SweepRecord>,
    /// `value`: `‖E_N φ − φ‖²_{L²(ν_N)}` for the configured symbol.
    pub l2_gap: Vec<SweepRecord>,
    /// `value`: largest `|E_N φ(ζ) − φ(ζ)|` over the circle grid.
    pub pointwise: Vec<SweepRecord>,
}

pub const FEJER_RANDOM_COUNT: usize = 20;
const FEJER_RANDOM_DEGREE: i32 = 3;

/// `E_N f(ζ)` for several symbols from their matrices (Berezin transform).
fn berezin_all(b: &FiniteBlaschke, mats: &[&OperatorMatrix], zeta: C64, q: &mut Vec<C64>) -> Vec<C64> {
    let n = b.degree();
    q.resize(n, C64::new(0.0, 0.0));
    b.tmw_basis_all(zeta, q);
    q.iter_mut().for_each(|z| *z = z.conj());
    let d = b.abs_derivative_at(zeta);
    mats.iter()
        .map(|m| {
            let tq = m.matrix.matvec(q);
            q.iter().zip(&tq).map(|(a, b)| a.conj() * b).sum::<C64>() / d
        })
        .collect()
}

/// Contraction ratios on seeded random trigonometric polynomials, the
/// `L²(ν_N)` distance `‖E_N φ − φ‖`, and pointwise errors of `E_N φ`.
pub fn fejer_suite(cfg: &ExperimentConfig) -> Result<FejerReport> {
    let polys = random_trig_polys(cfg.seed, FEJER_RANDOM_COUNT, FEJER_RANDOM_DEGREE);
    let q = &cfg.quadrature;
    let grid = CirclePoint::equispaced(cfg.grid_points);
    let rows = sweep(cfg, |n, b| {
        // E_N is linear: build T(ζ^k) once and combine coefficients
        let chars: Vec<OperatorMatrix> = (-FEJER_RANDOM_DEGREE..=FEJER_RANDOM_DEGREE)
            .map(|k| build_truncated_toeplitz(b, &SymbolRep::trig(TrigPoly::character(k)), q))
            .collect::<Result<_>>()?;
        let t_phi = build_truncated_toeplitz(b, &cfg.symbol, q)?;
        let mut mats: Vec<&OperatorMatrix> = chars.iter().collect();
        mats.push(&t_phi);
        let p = polys.len();
        let nn = n as f64;
        // components: ‖E f_i‖², ‖f_i‖² for each polynomial, then ‖E φ − φ‖²
        let r = integrate_vector(GridPlan::for_blaschke(b, q), 2 * p + 1, q, |nodes, acc| {
            let mut buf = Vec::new();
            for node in nodes {
                let z = node.point.value();
                let w = node.weight * b.abs_derivative_at(z) / nn;
                let e = berezin_all(b, &mats, z, &mut buf);
                for (i, poly) in polys.iter().enumerate() {
                    let ef: C64 = poly
                        .terms()
                        .map(|(k, c)| c * e[(k + FEJER_RANDOM_DEGREE) as usize])
                        .sum();
                    acc[2 * i] += w * ef.norm_sqr();
                    acc[2 * i + 1] += w * poly.eval(z).norm_sqr();
                }
                let phi = cfg.symbol.eval(&node.point);
                acc[2 * p] += w * (e[e.len() - 1] - phi).norm_sqr();
            }
            Ok(())
        })?;
        let ratio = (0..p)
            .map(|i| (r.values[2 * i].re / r.values[2 * i + 1].re).sqrt())
            .fold(0.0, f64::max);
        let gap2 = r.values[2 * p].re;
        let mut buf = Vec::new();
        let mut errs = Vec::with_capacity(grid.len());
        let mut low = (f64::INFINITY, 0.0);
        for g in &grid {
            let e = berezin_all(b, &[&t_phi], g.value(), &mut buf)[0];
            let err = (e - cfg.symbol.eval(g)).norm();
            let d = b.abs_derivative(g);
            if d < low.0 {
                low = (d, err);
            }
            errs.push(err);
        }
        let max = errs.iter().copied().fold(0.0, f64::max);
        Ok((
            SweepRecord::new(n, ratio)
                .with("polys", p as f64)
                .with("points", r.points_used as f64)
                .with("converged", flag(r.converged)),
            SweepRecord::new(n, gap2).with("norm", gap2.max(0.0).sqrt()),
            SweepRecord::new(n, max)
                .with("median", median(&mut errs))
                .with("min_abs_derivative", low.0)
                .with("error_at_min_derivative", low.1),
        ))
    })?;
    let mut report = FejerReport {
        contraction: Vec::new(),
        l2_gap: Vec::new(),
        pointwise: Vec::new(),
    };
    for (a, b, c) in rows {
        report.contraction.push(a);
        report.l2_gap.push(b);
        report.pointwise.push(c);
    }
    Ok(report)
}

/// `last < first / 2` for a sweep of gaps.
pub fn halves(values: &[f64]) -> bool {
    match (values.first(), values.last()) {
        (Some(&a), Some(&b)) if values.len() > 1 => b < a / 2.0,
        _ => false,
    }
}
