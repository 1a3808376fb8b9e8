//! Symbols on the circle and scalar functions applied to operators.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::blaschke::{CirclePoint, FiniteBlaschke};
use crate::error::{Error, Result};
use crate::C64;

const REAL_TOL: f64 = 1e-12;

/// Trigonometric polynomial `Σ_k c_k ζ^k` with finitely many non-zero `c_k`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrigPoly {
    coeffs: BTreeMap<i32, C64>,
}

impl TrigPoly {
    pub fn new(coeffs: impl IntoIterator<Item = (i32, C64)>) -> Self {
        let mut map = BTreeMap::new();
        for (k, c) in coeffs {
            *map.entry(k).or_insert(C64::new(0.0, 0.0)) += c;
        }
        map.retain(|_, c| *c != C64::new(0.0, 0.0));
        TrigPoly { coeffs: map }
    }

    pub fn constant(c: C64) -> Self {
        Self::new([(0, c)])
    }

    /// `ζ^k`
    pub fn character(k: i32) -> Self {
        Self::new([(k, C64::new(1.0, 0.0))])
    }

    /// `ζ + ζ̄ = 2 cos θ`
    pub fn two_cos() -> Self {
        Self::new([(1, C64::new(1.0, 0.0)), (-1, C64::new(1.0, 0.0))])
    }

    /// `Re ζ = cos θ`
    pub fn re_z() -> Self {
        Self::new([(1, C64::new(0.5, 0.0)), (-1, C64::new(0.5, 0.0))])
    }

    pub fn coeff(&self, k: i32) -> C64 {
        self.coeffs.get(&k).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, C64)> + '_ {
        self.coeffs.iter().map(|(k, c)| (*k, *c))
    }

    /// Largest `|k|` with a non-zero coefficient.
    pub fn degree(&self) -> u32 {
        self.coeffs.keys().map(|k| k.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn eval(&self, zeta: C64) -> C64 {
        self.terms().map(|(k, c)| c * zeta.powi(k)).sum()
    }

    pub fn is_real(&self) -> bool {
        self.terms()
            .all(|(k, c)| (c - self.coeff(-k).conj()).norm() <= REAL_TOL)
    }

    /// Only non-negative frequencies.
    pub fn is_analytic(&self) -> bool {
        self.coeffs.keys().all(|&k| k >= 0)
    }

    pub fn conj(&self) -> Self {
        Self::new(self.terms().map(|(k, c)| (-k, c.conj())))
    }

    pub fn mul(&self, other: &TrigPoly) -> Self {
        let mut out = Vec::new();
        for (j, a) in self.terms() {
            for (k, b) in other.terms() {
                out.push((j + k, a * b));
            }
        }
        Self::new(out)
    }

    pub fn add(&self, other: &TrigPoly) -> Self {
        Self::new(self.terms().chain(other.terms()))
    }

    /// `f ∘ φ` for a polynomial `f`, by Horner's rule.
    pub fn compose(&self, poly: &[C64]) -> Self {
        let mut acc = TrigPoly::default();
        for &c in poly.iter().rev() {
            acc = acc.mul(self).add(&TrigPoly::constant(c));
        }
        acc
    }

    /// Parses `c<k>=<re>[+<im>i]` items separated by commas, e.g. `c1=1,c-1=1`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut coeffs = Vec::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (lhs, rhs) = item
                .split_once('=')
                .ok_or_else(|| Error::param("symbol", format!("expected c<k>=<value>, got `{item}`")))?;
            let k: i32 = lhs
                .trim()
                .strip_prefix('c')
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::param("symbol", format!("bad frequency in `{item}`")))?;
            coeffs.push((k, parse_complex(rhs.trim())?));
        }
        if coeffs.is_empty() {
            return Err(Error::param("symbol", "empty coefficient list"));
        }
        Ok(Self::new(coeffs))
    }
}

impl fmt::Display for TrigPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self
            .terms()
            .map(|(k, c)| format!("c{k}={}", format_complex(c)))
            .collect();
        if items.is_empty() {
            write!(f, "c0=0")
        } else {
            write!(f, "{}", items.join(","))
        }
    }
}

pub(crate) fn format_complex(c: C64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.re == 0.0 {
        format!("{}i", c.im)
    } else {
        format!("{}{:+}i", c.re, c.im)
    }
}

/// Parses `a`, `bi`, `a+bi`, `a-bi` (exponents allowed).
pub fn parse_complex(text: &str) -> Result<C64> {
    let bad = || Error::param("complex", format!("cannot parse `{text}` as a complex number"));
    let s = text.trim();
    if s.is_empty() {
        return Err(bad());
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    // split at the last sign that is not the leading one or part of an exponent
    let bytes = body.as_bytes();
    let mut split = None;
    for idx in (1..bytes.len()).rev() {
        let ch = bytes[idx];
        if (ch == b'+' || ch == b'-') && !matches!(bytes[idx - 1], b'e' | b'E') {
            split = Some(idx);
            break;
        }
    }
    let parse_im = |t: &str| -> Result<f64> {
        match t {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => t.parse::<f64>().map_err(|_| bad()),
        }
    };
    match split {
        Some(idx) => {
            let re = body[..idx].parse::<f64>().map_err(|_| bad())?;
            Ok(C64::new(re, parse_im(&body[idx..])?))
        }
        None => Ok(C64::new(0.0, parse_im(body)?)),
    }
}

type SamplerFn = dyn Fn(&CirclePoint) -> C64 + Send + Sync;

/// Pointwise symbol with a name and a realness flag.
#[derive(Clone)]
pub struct SampledSymbol {
    name: String,
    f: Arc<SamplerFn>,
    real: bool,
}

impl fmt::Debug for SampledSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledSymbol")
            .field("name", &self.name)
            .field("real", &self.real)
            .finish()
    }
}

/// A bounded function on the circle.
#[derive(Clone, Debug)]
pub enum SymbolRep {
    TrigPoly(TrigPoly),
    Sampler(SampledSymbol),
}

/// Named presets accepted by [`SymbolRep::preset`].
pub const SYMBOL_PRESETS: &[&str] = &["cos", "re_z", "z", "abs_sin"];

impl SymbolRep {
    pub fn trig(p: TrigPoly) -> Self {
        SymbolRep::TrigPoly(p)
    }

    /// Wraps a closure; `real` must only be set for real-valued functions.
    pub fn sampler(
        name: impl Into<String>,
        real: bool,
        f: impl Fn(&CirclePoint) -> C64 + Send + Sync + 'static,
    ) -> Self {
        SymbolRep::Sampler(SampledSymbol {
            name: name.into(),
            f: Arc::new(f),
            real,
        })
    }

    /// `β_N = 1/|B'|` as a sampled symbol.
    pub fn beta(b: &FiniteBlaschke) -> Self {
        let b = b.clone();
        Self::sampler("beta", true, move |z| C64::new(b.beta_density(z), 0.0))
    }

    /// `cos` is `ζ + ζ̄`; `re_z` is `Re ζ`; `z` is `ζ`; `abs_sin` is `|sin θ|`.
    pub fn preset(name: &str) -> Result<Self> {
        Ok(match name {
            "cos" => SymbolRep::TrigPoly(TrigPoly::two_cos()),
            "re_z" => SymbolRep::TrigPoly(TrigPoly::re_z()),
            "z" => SymbolRep::TrigPoly(TrigPoly::character(1)),
            "abs_sin" => Self::sampler("abs_sin", true, |z| C64::new(z.angle().sin().abs(), 0.0)),
            other => {
                return Err(Error::param(
                    "symbol.preset",
                    format!(
                        "unknown preset `{other}`; valid presets: {}",
                        SYMBOL_PRESETS.join(", ")
                    ),
                ))
            }
        })
    }

    /// Preset name or coefficient list.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.starts_with('c') && t.contains('=') {
            TrigPoly::parse(t).map(SymbolRep::TrigPoly)
        } else {
            Self::preset(t)
        }
    }

    pub fn name(&self) -> String {
        match self {
            SymbolRep::TrigPoly(p) => p.to_string(),
            SymbolRep::Sampler(s) => s.name.clone(),
        }
    }

    pub fn eval(&self, zeta: &CirclePoint) -> C64 {
        match self {
            SymbolRep::TrigPoly(p) => p.eval(zeta.value()),
            SymbolRep::Sampler(s) => (s.f)(zeta),
        }
    }

    /// Trig case: conjugate-symmetric coefficients. Sampler case: flagged
    /// real and with imaginary part below `1e-12` on a 1024-point grid.
    pub fn is_real(&self) -> bool {
        match self {
            SymbolRep::TrigPoly(p) => p.is_real(),
            SymbolRep::Sampler(s) => {
                s.real
                    && CirclePoint::equispaced(1024)
                        .iter()
                        .all(|z| (s.f)(z).im.abs() < REAL_TOL)
            }
        }
    }

    pub fn as_trig(&self) -> Option<&TrigPoly> {
        match self {
            SymbolRep::TrigPoly(p) => Some(p),
            SymbolRep::Sampler(_) => None,
        }
    }

    /// `f ∘ φ`, exact for trig symbols and polynomial `f`.
    pub fn compose(&self, f: &ScalarFunction) -> Result<SymbolRep> {
        match (self, f) {
            (SymbolRep::TrigPoly(p), ScalarFunction::Poly(c)) => Ok(SymbolRep::TrigPoly(p.compose(c))),
            _ => {
                f.check_pairing(self)?;
                let phi = self.clone();
                let f = f.clone();
                let real = phi.is_real() && f.is_real_on_reals();
                Ok(Self::sampler(
                    format!("{}({})", f.name(), phi.name()),
                    real,
                    move |z| f.eval(phi.eval(z)),
                ))
            }
        }
    }
}

type PointwiseFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Scalar function applied to matrices and to symbol values.
#[derive(Clone)]
pub enum ScalarFunction {
    /// `Σ_k c_k x^k`, ascending coefficients.
    Poly(Vec<C64>),
    /// Continuous real function; only valid for self-adjoint arguments.
    Pointwise { name: String, f: Arc<PointwiseFn> },
}

impl fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFunction::Poly(c) => f.debug_tuple("Poly").field(c).finish(),
            ScalarFunction::Pointwise { name, .. } => {
                f.debug_struct("Pointwise").field("name", name).finish()
            }
        }
    }
}

/// Named functions accepted by [`ScalarFunction::parse`].
pub const FUNCTION_PRESETS: &[&str] = &["identity", "square", "cube", "cube_minus_x", "abs", "sqrt_abs"];

impl ScalarFunction {
    pub fn poly_real(coeffs: &[f64]) -> Self {
        ScalarFunction::Poly(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    pub fn identity() -> Self {
        Self::poly_real(&[0.0, 1.0])
    }

    pub fn pointwise(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFunction::Pointwise {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// A preset name or `poly:c0,c1,…` (ascending real or complex coefficients).
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some(list) = t.strip_prefix("poly:") {
            let coeffs = list
                .split(',')
                .map(|s| parse_complex(s.trim()))
                .collect::<Result<Vec<_>>>()
                .map_err(|_| Error::param("function.name", format!("bad polynomial `{t}`")))?;
            if coeffs.is_empty() {
                return Err(Error::param("function.name", "empty polynomial"));
            }
            return Ok(ScalarFunction::Poly(coeffs));
        }
        Ok(match t {
            "identity" => Self::identity(),
            "square" => Self::poly_real(&[0.0, 0.0, 1.0]),
            "cube" => Self::poly_real(&[0.0, 0.0, 0.0, 1.0]),
            "cube_minus_x" => Self::poly_real(&[0.0, -1.0, 0.0, 1.0]),
            "abs" => Self::pointwise("abs", f64::abs),
            "sqrt_abs" => Self::pointwise("sqrt_abs", |x| x.abs().sqrt()),
            other => {
                return Err(Error::param(
                    "function.name",
                    format!(
                        "unknown function `{other}`; valid names: {} or poly:c0,c1,…",
                        FUNCTION_PRESETS.join(", ")
                    ),
                ))
            }
        })
    }

    pub fn name(&self) -> String {
        match self {
            ScalarFunction::Poly(c) => {
                let parts: Vec<String> = c.iter().map(|z| format_complex(*z)).collect();
                format!("poly:{}", parts.join(","))
            }
            ScalarFunction::Pointwise { name, .. } => name.clone(),
        }
    }

    pub fn is_poly(&self) -> bool {
        matches!(self, ScalarFunction::Poly(_))
    }

    fn is_real_on_reals(&self) -> bool {
        match self {
            ScalarFunction::Poly(c) => c.iter().all(|z| z.im == 0.0),
            ScalarFunction::Pointwise { .. } => true,
        }
    }

    /// Pointwise functions need a real symbol.
    pub fn check_pairing(&self, symbol: &SymbolRep) -> Result<()> {
        if let ScalarFunction::Pointwise { name, .. } = self {
            if !symbol.is_real() {
                return Err(Error::InvalidPairing(format!(
                    "pointwise function `{name}` requires a real-valued symbol"
                )));
            }
        }
        Ok(())
    }

    /// Value at `x`; pointwise functions use `Re x`.
    pub fn eval(&self, x: C64) -> C64 {
        match self {
            ScalarFunction::Poly(c) => c.iter().rev().fold(C64::new(0.0, 0.0), |acc, &k| acc * x + k),
            ScalarFunction::Pointwise { f, .. } => C64::new(f(x.re), 0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_complex_forms() {
        let cases = [
            ("1", C64::new(1.0, 0.0)),
            ("-0.5", C64::new(-0.5, 0.0)),
            ("0.3i", C64::new(0.0, 0.3)),
            ("-i", C64::new(0.0, -1.0)),
            ("1+2i", C64::new(1.0, 2.0)),
            ("1.5e-1-2e+0i", C64::new(0.15, -2.0)),
            ("-1-i", C64::new(-1.0, -1.0)),
        ];
        for (s, z) in cases {
            assert_eq!(parse_complex(s).unwrap(), z, "{s}");
        }
        assert!(parse_complex("abc").is_err());
        assert!(parse_complex("").is_err());
    }

    #[test]
    fn trig_parse_and_display() {
        let p = TrigPoly::parse("c1=1,c-1=1").unwrap();
        assert_eq!(p, TrigPoly::two_cos());
        assert!(p.is_real());
        assert_eq!(TrigPoly::parse(&p.to_string()).unwrap(), p);
        let q = TrigPoly::parse("c2=0.5+1i").unwrap();
        assert!(!q.is_real());
        assert!(q.is_analytic());
        assert!(TrigPoly::parse("x1=2").is_err());
    }

    #[test]
    fn trig_eval_and_compose() {
        let p = TrigPoly::two_cos();
        let z = CirclePoint::from_angle(0.4);
        assert!((p.eval(z.value()) - C64::new(2.0 * 0.4f64.cos(), 0.0)).norm() < 1e-15);
        let cube_minus = p.compose(&[C64::new(0.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        let x = p.eval(z.value());
        assert!((cube_minus.eval(z.value()) - (x * x * x - x)).norm() < 1e-13);
        assert_eq!(cube_minus.degree(), 3);
        // (ζ + ζ̄)² = ζ² + 2 + ζ̄²
        let sq = p.mul(&p);
        assert_eq!(sq.coeff(0), C64::new(2.0, 0.0));
        assert_eq!(sq.coeff(2), C64::new(1.0, 0.0));
        assert_eq!(sq.coeff(1), C64::new(0.0, 0.0));
    }

    #[test]
    fn symbol_presets_and_realness() {
        assert!(SymbolRep::preset("cos").unwrap().is_real());
        assert!(SymbolRep::preset("abs_sin").unwrap().is_real());
        assert!(!SymbolRep::preset("z").unwrap().is_real());
        let err = SymbolRep::preset("foo").unwrap_err().to_string();
        assert!(err.contains("abs_sin"));
        let liar = SymbolRep::sampler("liar", true, |z| z.value());
        assert!(!liar.is_real());
    }

    #[test]
    fn function_presets() {
        let f = ScalarFunction::parse("cube_minus_x").unwrap();
        assert_eq!(f.eval(C64::new(2.0, 0.0)), C64::new(6.0, 0.0));
        let g = ScalarFunction::parse("poly:1,0,-2").unwrap();
        assert_eq!(g.eval(C64::new(3.0, 0.0)), C64::new(-17.0, 0.0));
        let a = ScalarFunction::parse("abs").unwrap();
        assert!(a.check_pairing(&SymbolRep::preset("z").unwrap()).is_err());
        assert!(a.check_pairing(&SymbolRep::preset("cos").unwrap()).is_ok());
        assert!(ScalarFunction::parse("tan").is_err());
    }
}
