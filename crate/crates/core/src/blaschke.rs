//! Zero sequences, finite Blaschke products and the scalar quantities built
//! from them: boundary derivative `|B'|`, the densities of `ν_N` and `β_N`,
//! Szegő and model-space kernels, and the TMW basis.

use std::f64::consts::{PI, TAU};
use std::hash::{Hash, Hasher};

use num_complex::ComplexFloat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Generators accept radii up to this bound and clip beyond it.
pub const MAX_GENERATED_MODULUS: f64 = 1.0 - 1e-6;

/// Tags accepted by [`ZeroSequence::from_tag`].
pub const GENERATOR_TAGS: &[&str] = &[
    "uniform_zero",
    "constant_modulus",
    "alternating_3k",
    "frostman_fast",
    "dense_nonblaschke",
    "explicit",
];

/// `γ = (√5 − 1)/2`, the default irrational rotation.
pub const GOLDEN_RATIO_CONJUGATE: f64 = 0.618_033_988_749_894_8;

/// A point `e^{iθ}` of the unit circle with `θ ∈ [0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CirclePoint {
    angle: f64,
    value: C64,
}

impl Serialize for CirclePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.angle.serialize(s)
    }
}

impl CirclePoint {
    pub fn from_angle(angle: f64) -> Self {
        let mut a = angle.rem_euclid(TAU);
        if a >= TAU {
            a = 0.0;
        }
        CirclePoint {
            angle: a,
            value: C64::from_polar(1.0, a),
        }
    }

    /// Projects a non-zero complex number onto the circle.
    pub fn from_complex(z: C64) -> Self {
        Self::from_angle(z.im.atan2(z.re))
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn value(&self) -> C64 {
        self.value
    }

    /// `M` equispaced points `e^{2πik/M}` starting at 1.
    pub fn equispaced(m: usize) -> Vec<CirclePoint> {
        (0..m)
            .map(|k| Self::from_angle(TAU * k as f64 / m as f64))
            .collect()
    }
}

/// Phase assignment for generators whose radii are fixed by rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseRule {
    /// `ψ_j = 2π j / period`
    Equispaced { period: usize },
    /// `ψ_j = 2π j γ` with the golden-ratio conjugate `γ`.
    Golden,
    /// Independent uniform phases from a ChaCha8 stream.
    Seeded { seed: u64 },
}

/// Rule-generated sequence `λ_0 = 0, λ_1, λ_2, …` in the open unit disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ZeroSequence {
    /// All `λ_j = 0`, so `B_N = z^N`.
    UniformZero,
    /// `|λ_j| = r` for `j ≥ 1`.
    ConstantModulus { r: f64, phase: PhaseRule },
    /// `λ_j = ±λ` on the ternary blocks `3^{k-1} < j ≤ 3^k` (sign `+` for odd `k`),
    /// with `λ_0 = λ_1 = 0`.
    #[serde(rename = "alternating_3k")]
    Alternating3k { lambda: f64 },
    /// Radii `1 − (j+1)^{-4}`; `Σ √(1 − |λ_j|)` converges.
    FrostmanFast { phase: PhaseRule },
    /// `λ_j = (1 − 1/(j+1)) e^{2πijγ}`; `Σ (1 − |λ_j|)` diverges.
    DenseNonblaschke { gamma: f64 },
    /// A finite list of points; requesting more points than listed is an error.
    Explicit { points: Vec<[f64; 2]> },
}

/// One term of a zero sequence kept in polar form so that radii extremely
/// close to 1 keep their distance to the circle exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroTerm {
    /// `1 − |λ_j|`
    pub defect: f64,
    /// `arg λ_j`
    pub angle: f64,
}

impl ZeroTerm {
    pub fn modulus(&self) -> f64 {
        1.0 - self.defect
    }

    pub fn point(&self) -> C64 {
        if self.defect >= 1.0 {
            C64::new(0.0, 0.0)
        } else {
            C64::from_polar(self.modulus(), self.angle)
        }
    }

    /// `(1 − |λ|²) / |ζ − λ|²` evaluated without cancellation.
    pub fn poisson_at(&self, theta: f64) -> f64 {
        let d = self.defect;
        let r = 1.0 - d;
        let s = ((theta - self.angle) * 0.5).sin();
        d * (2.0 - d) / (d * d + 4.0 * r * s * s)
    }
}

impl ZeroSequence {
    /// Builds a sequence from a generator tag with default parameters.
    pub fn from_tag(tag: &str) -> Result<Self> {
        Ok(match tag {
            "uniform_zero" => ZeroSequence::UniformZero,
            "constant_modulus" => ZeroSequence::ConstantModulus {
                r: 0.5,
                phase: PhaseRule::Seeded { seed: 0 },
            },
            "alternating_3k" => ZeroSequence::Alternating3k { lambda: 0.5 },
            "frostman_fast" => ZeroSequence::FrostmanFast {
                phase: PhaseRule::Golden,
            },
            "dense_nonblaschke" => ZeroSequence::DenseNonblaschke {
                gamma: GOLDEN_RATIO_CONJUGATE,
            },
            "explicit" => ZeroSequence::Explicit {
                points: vec![[0.0, 0.0]],
            },
            other => return Err(Error::UnknownGenerator(other.to_string())),
        })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ZeroSequence::UniformZero => "uniform_zero",
            ZeroSequence::ConstantModulus { .. } => "constant_modulus",
            ZeroSequence::Alternating3k { .. } => "alternating_3k",
            ZeroSequence::FrostmanFast { .. } => "frostman_fast",
            ZeroSequence::DenseNonblaschke { .. } => "dense_nonblaschke",
            ZeroSequence::Explicit { .. } => "explicit",
        }
    }

    pub fn explicit(points: &[C64]) -> Self {
        ZeroSequence::Explicit {
            points: points.iter().map(|z| [z.re, z.im]).collect(),
        }
    }

    /// Checks generator parameters; error keys name the offending field.
    pub fn validate(&self) -> Result<()> {
        let check_phase = |phase: &PhaseRule| match phase {
            PhaseRule::Equispaced { period: 0 } => {
                Err(Error::param("sequence.period", "period must be positive"))
            }
            _ => Ok(()),
        };
        match self {
            ZeroSequence::UniformZero => Ok(()),
            ZeroSequence::ConstantModulus { r, phase } => {
                if !(*r > 0.0 && *r < 1.0) {
                    return Err(Error::param(
                        "sequence.r",
                        format!("modulus {r} must lie in (0, 1)"),
                    ));
                }
                check_phase(phase)
            }
            ZeroSequence::Alternating3k { lambda } => {
                if !(*lambda > 0.0 && *lambda < 1.0) {
                    return Err(Error::param(
                        "sequence.lambda",
                        format!("{lambda} must lie in (0, 1)"),
                    ));
                }
                Ok(())
            }
            ZeroSequence::FrostmanFast { phase } => check_phase(phase),
            ZeroSequence::DenseNonblaschke { gamma } => {
                if !gamma.is_finite() {
                    return Err(Error::param("sequence.gamma", "must be finite"));
                }
                Ok(())
            }
            ZeroSequence::Explicit { points } => {
                let Some(first) = points.first() else {
                    return Err(Error::param("sequence.points", "at least one point required"));
                };
                if first[0] != 0.0 || first[1] != 0.0 {
                    return Err(Error::param("sequence.points", "first point must be 0"));
                }
                for p in points {
                    let z = C64::new(p[0], p[1]);
                    if !(z.abs() < 1.0) {
                        return Err(Error::param(
                            "sequence.points",
                            format!("point {z} is not inside the open unit disk"),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    /// The first `count` terms exactly as the rule defines them (no clipping).
    pub fn terms(&self, count: usize) -> Result<Vec<ZeroTerm>> {
        if count < 1 {
            return Err(Error::param("count", "count must be at least 1"));
        }
        self.validate()?;
        let origin = ZeroTerm {
            defect: 1.0,
            angle: 0.0,
        };
        let mut out = Vec::with_capacity(count);
        out.push(origin);
        match self {
            ZeroSequence::UniformZero => out.resize(count, origin),
            ZeroSequence::ConstantModulus { r, phase } => {
                let mut phases = PhaseStream::new(*phase);
                for j in 1..count {
                    out.push(ZeroTerm {
                        defect: 1.0 - r,
                        angle: phases.angle(j),
                    });
                }
            }
            ZeroSequence::Alternating3k { lambda } => {
                if count > 1 {
                    out.push(origin);
                }
                for j in 2..count {
                    // smallest k with 3^k ≥ j
                    let mut k = 0u32;
                    let mut p = 1usize;
                    while p < j {
                        p *= 3;
                        k += 1;
                    }
                    out.push(ZeroTerm {
                        defect: 1.0 - lambda,
                        angle: if k % 2 == 1 { 0.0 } else { PI },
                    });
                }
            }
            ZeroSequence::FrostmanFast { phase } => {
                let mut phases = PhaseStream::new(*phase);
                for j in 1..count {
                    out.push(ZeroTerm {
                        defect: ((j + 1) as f64).powi(-4),
                        angle: phases.angle(j),
                    });
                }
            }
            ZeroSequence::DenseNonblaschke { gamma } => {
                for j in 1..count {
                    out.push(ZeroTerm {
                        defect: 1.0 / (j + 1) as f64,
                        angle: TAU * (j as f64 * gamma).fract(),
                    });
                }
            }
            ZeroSequence::Explicit { points } => {
                if count > points.len() {
                    return Err(Error::param(
                        "count",
                        format!("explicit sequence has only {} points", points.len()),
                    ));
                }
                for p in &points[1..count] {
                    let z = C64::new(p[0], p[1]);
                    out.push(ZeroTerm {
                        defect: 1.0 - z.abs(),
                        angle: z.im.atan2(z.re),
                    });
                }
            }
        }
        Ok(out)
    }
}

struct PhaseStream {
    rule: PhaseRule,
    rng: Option<ChaCha8Rng>,
}

impl PhaseStream {
    fn new(rule: PhaseRule) -> Self {
        let rng = match rule {
            PhaseRule::Seeded { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        PhaseStream { rule, rng }
    }

    // Called with j = 1, 2, … in order.
    fn angle(&mut self, j: usize) -> f64 {
        match self.rule {
            PhaseRule::Equispaced { period } => TAU * (j % period) as f64 / period as f64,
            PhaseRule::Golden => TAU * (j as f64 * GOLDEN_RATIO_CONJUGATE).fract(),
            PhaseRule::Seeded { .. } => TAU * self.rng.as_mut().unwrap().random::<f64>(),
        }
    }
}

/// `λ_0, …, λ_{count−1}` with radii clipped to [`MAX_GENERATED_MODULUS`].
pub fn generate_zeros(seq: &ZeroSequence, count: usize) -> Result<Vec<C64>> {
    let terms = seq.terms(count)?;
    let clip = !matches!(seq, ZeroSequence::Explicit { .. });
    Ok(terms
        .into_iter()
        .map(|t| {
            if clip && t.defect < 1.0 - MAX_GENERATED_MODULUS {
                C64::from_polar(MAX_GENERATED_MODULUS, t.angle)
            } else {
                t.point()
            }
        })
        .collect())
}

/// Reproducing kernel of `H²`: `k_λ(w) = 1 / (1 − λ̄ w)`.
pub fn szego_kernel(lambda: C64, w: C64) -> C64 {
    1.0 / (1.0 - lambda.conj() * w)
}

/// `k̂_λ = √(1 − |λ|²) k_λ`, unit norm in `L²(m)`.
pub fn normalized_szego_kernel(lambda: C64, w: C64) -> C64 {
    (1.0 - lambda.norm_sqr()).sqrt() * szego_kernel(lambda, w)
}

/// Finite Blaschke product
/// `B(z) = Π_j (λ̄_j/|λ_j|) (z − λ_j)/(1 − λ̄_j z)`, unit factor 1 at `λ_j = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteBlaschke {
    zeros: Vec<C64>,
    units: Vec<C64>,
    unit_args: Vec<f64>,
    // 1 − |λ_j|²
    weights: Vec<f64>,
}

impl FiniteBlaschke {
    pub fn new(zeros: Vec<C64>) -> Result<Self> {
        if zeros.is_empty() {
            return Err(Error::param("zeros", "a Blaschke product needs at least one zero"));
        }
        let mut units = Vec::with_capacity(zeros.len());
        let mut unit_args = Vec::with_capacity(zeros.len());
        let mut weights = Vec::with_capacity(zeros.len());
        for &z in &zeros {
            let r = z.abs();
            if !(r < 1.0) || !r.is_finite() {
                return Err(Error::ZeroNotInDisk { point: z });
            }
            if r == 0.0 {
                units.push(C64::new(1.0, 0.0));
                unit_args.push(0.0);
            } else {
                units.push(z.conj() / r);
                unit_args.push(-z.im.atan2(z.re));
            }
            weights.push((1.0 - r) * (1.0 + r));
        }
        Ok(FiniteBlaschke {
            zeros,
            units,
            unit_args,
            weights,
        })
    }

    /// `B_N` for the first `n` zeros of a generated sequence.
    pub fn from_sequence(seq: &ZeroSequence, n: usize) -> Result<Self> {
        Self::new(generate_zeros(seq, n)?)
    }

    /// `z^N`
    pub fn monomial(n: usize) -> Result<Self> {
        Self::new(vec![C64::new(0.0, 0.0); n])
    }

    pub fn degree(&self) -> usize {
        self.zeros.len()
    }

    pub fn zeros(&self) -> &[C64] {
        &self.zeros
    }

    pub fn vanishes_at_origin(&self) -> bool {
        self.zeros.iter().any(|z| *z == C64::new(0.0, 0.0))
    }

    /// Stable identifier of the zero list, used to tag matrices by basis.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for z in &self.zeros {
            z.re.to_bits().hash(&mut h);
            z.im.to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// `B(w)`; meaningful for `|w| ≤ 1`.
    pub fn eval(&self, w: C64) -> C64 {
        self.zeros
            .iter()
            .zip(&self.units)
            .map(|(&l, &u)| u * (w - l) / (1.0 - l.conj() * w))
            .product()
    }

    /// `|B'(ζ)| = Σ_j (1 − |λ_j|²)/|ζ − λ_j|²` for `ζ` on the circle.
    pub fn abs_derivative(&self, zeta: &CirclePoint) -> f64 {
        self.abs_derivative_at(zeta.value())
    }

    pub(crate) fn abs_derivative_at(&self, zeta: C64) -> f64 {
        self.zeros
            .iter()
            .zip(&self.weights)
            .map(|(&l, &w)| w / (1.0 - l.conj() * zeta).norm_sqr())
            .sum()
    }

    /// Density of `ν_N` with respect to `m`: `|B'(ζ)|/N`.
    pub fn nu_density(&self, zeta: &CirclePoint) -> f64 {
        self.abs_derivative(zeta) / self.degree() as f64
    }

    /// `β_N(ζ) = 1/|B'(ζ)|`
    pub fn beta_density(&self, zeta: &CirclePoint) -> f64 {
        1.0 / self.abs_derivative(zeta)
    }

    /// Continuous argument of `B(e^{iθ})` (unnormalized) together with its
    /// derivative `|B'(e^{iθ})|`.
    ///
    /// Each factor contributes `arg u_j + θ − 2 arg(1 − λ̄_j e^{iθ})`; the last
    /// argument stays in `(−π/2, π/2)` so no unwrapping is needed.
    pub fn raw_phase(&self, theta: f64) -> (f64, f64) {
        let zeta = C64::from_polar(1.0, theta);
        let mut phase = 0.0;
        let mut deriv = 0.0;
        for ((&l, &ua), &w) in self.zeros.iter().zip(&self.unit_args).zip(&self.weights) {
            let d = 1.0 - l.conj() * zeta;
            phase += ua + theta - 2.0 * d.im.atan2(d.re);
            deriv += w / d.norm_sqr();
        }
        (phase, deriv)
    }

    /// Values of the TMW basis `e_j = B_j k̂_{λ_j}` at `w`, `j = 0..N`.
    pub fn tmw_basis_all(&self, w: C64, out: &mut [C64]) {
        debug_assert_eq!(out.len(), self.degree());
        let mut partial = C64::new(1.0, 0.0);
        for (j, ((&l, &u), &wt)) in self
            .zeros
            .iter()
            .zip(&self.units)
            .zip(&self.weights)
            .enumerate()
        {
            let denom = 1.0 - l.conj() * w;
            out[j] = partial * wt.sqrt() / denom;
            partial *= u * (w - l) / denom;
        }
    }

    /// `e_j(ζ) = B_j(ζ) k̂_{λ_j}(ζ)`
    pub fn tmw_basis(&self, j: usize, zeta: &CirclePoint) -> Result<C64> {
        if j >= self.degree() {
            return Err(Error::IndexOutOfRange {
                index: j,
                dim: self.degree(),
            });
        }
        let mut all = vec![C64::new(0.0, 0.0); self.degree()];
        self.tmw_basis_all(zeta.value(), &mut all);
        Ok(all[j])
    }

    /// TMW coefficients of the reproducing kernel `k^B_w`:
    /// `⟨k^B_w, e_j⟩ = conj(e_j(w))`.
    pub fn kernel_coefficients(&self, w: C64) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.degree()];
        self.tmw_basis_all(w, &mut v);
        v.iter_mut().for_each(|z| *z = z.conj());
        v
    }

    /// Model-space kernel `k^B_λ(w) = (1 − conj(B(λ)) B(w)) / (1 − λ̄ w)`.
    ///
    /// `λ` may lie in the open disk or on the circle; at `w = λ` on the
    /// circle the value is `|B'(λ)|`.
    pub fn model_kernel(&self, lambda: C64, w: C64) -> Result<C64> {
        let r = lambda.abs();
        if r > 1.0 + 1e-12 {
            return Err(Error::OutsideDisk { point: lambda });
        }
        if (r - 1.0).abs() <= 1e-12 && (w - lambda).abs() < 1e-9 {
            return Ok(C64::new(self.abs_derivative_at(lambda / r), 0.0));
        }
        let num = 1.0 - self.eval(lambda).conj() * self.eval(w);
        Ok(num / (1.0 - lambda.conj() * w))
    }

    /// `|k̂^B_ζ(η)|² = |k^B_ζ(η)|² / |B'(ζ)|` for circle points.
    pub fn normalized_kernel_sq(&self, zeta: &CirclePoint, eta: &CirclePoint) -> f64 {
        let k = self
            .model_kernel(zeta.value(), eta.value())
            .expect("circle points are admissible");
        k.norm_sqr() / self.abs_derivative(zeta)
    }
}

/// Running sums of `Σ_j (1 − |λ_j|²)/|ζ − λ_j|²` over a circle grid.
#[derive(Clone, Debug, Serialize)]
pub struct AngularDiagnostics {
    /// Grid angles.
    pub grid: Vec<f64>,
    /// Term counts at which partial sums are reported (last = `J`).
    pub checkpoints: Vec<usize>,
    /// `partial_sums[p][c]` is the sum of the first `checkpoints[c]` terms at grid point `p`.
    pub partial_sums: Vec<Vec<f64>>,
    pub thresholds: Vec<f64>,
    /// `crossings[p][t]`: smallest term count whose sum exceeds `thresholds[t]`.
    pub crossings: Vec<Vec<Option<usize>>>,
}

impl AngularDiagnostics {
    /// Partial sums over all `J` terms, one per grid point.
    pub fn final_sums(&self) -> Vec<f64> {
        self.partial_sums
            .iter()
            .map(|s| *s.last().unwrap())
            .collect()
    }

    /// Fraction of grid points whose `J`-term sum is below `bound`.
    pub fn fraction_below(&self, bound: f64) -> f64 {
        let sums = self.final_sums();
        sums.iter().filter(|&&s| s < bound).count() as f64 / sums.len() as f64
    }
}

fn checkpoint_schedule(terms: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut decade = 1usize;
    'outer: loop {
        for m in [1, 2, 5] {
            let c = m * decade;
            if c >= terms {
                break 'outer;
            }
            out.push(c);
        }
        decade *= 10;
    }
    out.push(terms);
    out
}

/// Angular-derivative partial sums of the (unclipped) sequence over `grid`.
pub fn angular_partial_sums(
    seq: &ZeroSequence,
    grid: &[CirclePoint],
    terms: usize,
    thresholds: &[f64],
) -> Result<AngularDiagnostics> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let zs = seq.terms(terms)?;
    let checkpoints = checkpoint_schedule(terms);
    let per_point: Vec<(Vec<f64>, Vec<Option<usize>>)> = grid
        .par_iter()
        .map(|p| {
            let theta = p.angle();
            let mut sums = Vec::with_capacity(checkpoints.len());
            let mut crossed = vec![None; thresholds.len()];
            let mut next = 0;
            let mut acc = 0.0;
            for (j, t) in zs.iter().enumerate() {
                acc += t.poisson_at(theta);
                for (c, &bound) in crossed.iter_mut().zip(thresholds) {
                    if c.is_none() && acc > bound {
                        *c = Some(j + 1);
                    }
                }
                if j + 1 == checkpoints[next] {
                    sums.push(acc);
                    next += 1;
                }
            }
            (sums, crossed)
        })
        .collect();
    let (partial_sums, crossings) = per_point.into_iter().unzip();
    Ok(AngularDiagnostics {
        grid: grid.iter().map(|p| p.angle()).collect(),
        checkpoints,
        partial_sums,
        thresholds: thresholds.to_vec(),
        crossings,
    })
}
