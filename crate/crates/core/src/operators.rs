//! Truncated Toeplitz operators, Clark unitaries and functions of them, as
//! dense matrices in the TMW basis `e_j = B_j k̂_{λ_j}` of `K_B`.

use std::f64::consts::PI;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::blaschke::{CirclePoint, FiniteBlaschke};
use crate::clark::{alpha_grid, clark_measure, ClarkMeasure};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::quadrature::{integrate_circle_for, integrate_vector, GridPlan, IntegralResult, QuadratureConfig};
use crate::symbol::{ScalarFunction, SymbolRep, TrigPoly};
use crate::C64;

/// Relative Hermitian defect accepted by the eigenvalue path.
pub const SELF_ADJOINT_TOL: f64 = 1e-8;

/// Square matrix tagged with the Blaschke product whose TMW basis it uses.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    pub matrix: CMatrix,
    basis: u64,
    /// Whether every quadrature behind the entries met its tolerance.
    pub converged: bool,
    pub points_used: usize,
}

impl OperatorMatrix {
    pub fn new(matrix: CMatrix, b: &FiniteBlaschke) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != b.degree() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for a degree-{} basis",
                matrix.rows(),
                matrix.cols(),
                b.degree()
            )));
        }
        Ok(OperatorMatrix {
            matrix,
            basis: b.fingerprint(),
            converged: true,
            points_used: 0,
        })
    }

    fn derived(&self, matrix: CMatrix) -> Self {
        OperatorMatrix {
            matrix,
            basis: self.basis,
            converged: self.converged,
            points_used: self.points_used,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn basis(&self) -> u64 {
        self.basis
    }

    pub fn same_basis(&self, other: &OperatorMatrix) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch);
        }
        Ok(())
    }

    pub fn matmul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.same_basis(other)?;
        let mut out = self.derived(self.matrix.matmul(&other.matrix)?);
        out.converged &= other.converged;
        Ok(out)
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        self.derived(self.matrix.adjoint())
    }

    /// Entries as `(i, j, re, im)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        let n = self.dim();
        self.matrix
            .as_slice()
            .iter()
            .enumerate()
            .map(move |(k, z)| (k / n, k % n, z.re, z.im))
    }
}

impl Serialize for OperatorMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let entries: Vec<[f64; 2]> = self.matrix.as_slice().iter().map(|z| [z.re, z.im]).collect();
        let mut st = s.serialize_struct("OperatorMatrix", 4)?;
        st.serialize_field("dim", &self.dim())?;
        st.serialize_field("basis", &format!("{:016x}", self.basis))?;
        st.serialize_field("converged", &self.converged)?;
        st.serialize_field("entries", &entries)?;
        st.end()
    }
}

fn check_sample(v: C64, z: &CirclePoint) -> Result<C64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteSample { angle: z.angle() })
    }
}

/// Integrates `g(η) · e(η) e(η)*` for all basis pairs on one shared grid.
///
/// Entry `(i, j)` of the result is `∫ g e_j conj(e_i) dm`.
fn gram_integral<G>(b: &FiniteBlaschke, g: G, cfg: &QuadratureConfig) -> Result<(CMatrix, bool, usize)>
where
    G: Fn(&CirclePoint) -> C64 + Sync,
{
    let n = b.degree();
    let r = integrate_vector(GridPlan::for_blaschke(b, cfg), n * n, cfg, |nodes, acc| {
        let mut e = vec![C64::new(0.0, 0.0); n];
        let mut a = vec![C64::new(0.0, 0.0); n];
        for node in nodes {
            let s = check_sample(g(&node.point), &node.point)? * node.weight;
            b.tmw_basis_all(node.point.value(), &mut e);
            a.iter_mut().zip(&e).for_each(|(x, y)| *x = s * y);
            for (i, ei) in e.iter().enumerate() {
                let ci = ei.conj();
                let row = &mut acc[i * n..(i + 1) * n];
                row.iter_mut().zip(&a).for_each(|(x, y)| *x += ci * y);
            }
        }
        Ok(())
    })?;
    Ok((CMatrix::from_row_major(n, n, r.values)?, r.converged, r.points_used))
}

/// `T_B(φ)`, entries `∫ φ e_j conj(e_i) dm`. Real symbols give a matrix
/// replaced by its Hermitian part.
pub fn build_truncated_toeplitz(b: &FiniteBlaschke, phi: &SymbolRep, cfg: &QuadratureConfig) -> Result<OperatorMatrix> {
    let (mut m, converged, points_used) = gram_integral(b, |z| phi.eval(z), cfg)?;
    if phi.is_real() {
        m = m.hermitian_part();
    }
    Ok(OperatorMatrix {
        matrix: m,
        basis: b.fingerprint(),
        converged,
        points_used,
    })
}

/// `∫ φ |B'| dm`
pub fn trace_formula_rhs(b: &FiniteBlaschke, phi: &SymbolRep, cfg: &QuadratureConfig) -> Result<IntegralResult> {
    integrate_circle_for(b, |z| phi.eval(z) * b.abs_derivative(z), cfg)
}

fn require_origin_zero(b: &FiniteBlaschke) -> Result<()> {
    if b.vanishes_at_origin() {
        Ok(())
    } else {
        Err(Error::NoZeroAtOrigin)
    }
}

fn require_unimodular(alpha: C64) -> Result<()> {
    if (alpha.norm() - 1.0).abs() > 1e-12 || !alpha.norm().is_finite() {
        return Err(Error::NotUnimodular { modulus: alpha.norm() });
    }
    Ok(())
}

/// TMW coefficients of `z̄B`, i.e. `∫ ζ̄ B(ζ) conj(e_j(ζ)) dm`.
fn zbar_b_coefficients(b: &FiniteBlaschke, cfg: &QuadratureConfig) -> Result<(Vec<C64>, bool)> {
    let n = b.degree();
    let r = integrate_vector(GridPlan::for_blaschke(b, cfg), n, cfg, |nodes, acc| {
        let mut e = vec![C64::new(0.0, 0.0); n];
        for node in nodes {
            let z = node.point.value();
            let s = z.conj() * b.eval(z) * node.weight;
            b.tmw_basis_all(z, &mut e);
            acc.iter_mut().zip(&e).for_each(|(x, y)| *x += s * y.conj());
        }
        Ok(())
    })?;
    Ok((r.values, r.converged))
}

/// `U_α = T_B(z) + α · 1 ⊗ z̄B`.
pub fn build_clark_unitary(b: &FiniteBlaschke, alpha: C64, cfg: &QuadratureConfig) -> Result<OperatorMatrix> {
    require_unimodular(alpha)?;
    require_origin_zero(b)?;
    let mut t = build_truncated_toeplitz(b, &SymbolRep::trig(TrigPoly::character(1)), cfg)?;
    // the constant function 1 is the kernel at the origin
    let u = b.kernel_coefficients(C64::new(0.0, 0.0));
    let (v, conv) = zbar_b_coefficients(b, cfg)?;
    t.matrix = &t.matrix + &CMatrix::outer(&u, &v).scale(alpha);
    t.converged &= conv;
    Ok(t)
}

/// `φ(U_α) = Σ_k φ(ζ_k) w_k q_k q_k*` with `q_k` the coefficients of `k^B_{ζ_k}`.
pub fn build_clark_spectral(b: &FiniteBlaschke, clark: &ClarkMeasure, phi: &SymbolRep) -> Result<OperatorMatrix> {
    if clark.basis() != b.fingerprint() {
        return Err(Error::BasisMismatch);
    }
    let n = b.degree();
    let mut m = CMatrix::zeros(n, n);
    for atom in &clark.atoms {
        let q = b.kernel_coefficients(atom.point.value());
        let s = check_sample(phi.eval(&atom.point), &atom.point)? * atom.weight;
        for i in 0..n {
            let qi = q[i] * s;
            for j in 0..n {
                m[(i, j)] += qi * q[j].conj();
            }
        }
    }
    OperatorMatrix::new(m, b)
}

/// `f(A)`: Horner for polynomials, eigenvalues for pointwise functions
/// (self-adjoint `A` only).
pub fn apply_function(a: &OperatorMatrix, f: &ScalarFunction) -> Result<OperatorMatrix> {
    match f {
        ScalarFunction::Poly(c) => {
            let n = a.dim();
            let mut acc = CMatrix::zeros(n, n);
            for &k in c.iter().rev() {
                acc = acc.matmul(&a.matrix)?;
                for i in 0..n {
                    acc[(i, i)] += k;
                }
            }
            Ok(a.derived(acc))
        }
        ScalarFunction::Pointwise { f, .. } => {
            let defect = a.matrix.hermitian_defect();
            if defect > SELF_ADJOINT_TOL * a.matrix.frobenius_norm() {
                return Err(Error::NotSelfAdjoint { defect });
            }
            let spec = a.matrix.hermitian_part().hermitian_eigen()?;
            Ok(a.derived(spec.reconstruct(|x| C64::new(f(x), 0.0))))
        }
    }
}

pub fn trace(a: &OperatorMatrix) -> C64 {
    a.matrix.trace()
}

pub fn hs_norm(a: &OperatorMatrix) -> f64 {
    a.matrix.frobenius_norm()
}

pub fn trace_norm(a: &OperatorMatrix) -> f64 {
    a.matrix.trace_norm()
}

pub fn op_norm(a: &OperatorMatrix) -> f64 {
    a.matrix.op_norm()
}

/// `I − T_B(z) T_B(z̄)`
pub fn rank_one_defect(b: &FiniteBlaschke, cfg: &QuadratureConfig) -> Result<OperatorMatrix> {
    require_origin_zero(b)?;
    let tz = build_truncated_toeplitz(b, &SymbolRep::trig(TrigPoly::character(1)), cfg)?;
    let tzbar = build_truncated_toeplitz(b, &SymbolRep::trig(TrigPoly::character(-1)), cfg)?;
    let prod = tz.matmul(&tzbar)?;
    Ok(prod.derived(&CMatrix::identity(b.degree()) - &prod.matrix))
}

/// `E_N f(ζ_i) = ∫ f(η) |k̂^B_{ζ_i}(η)|² dm(η)` for several points on one grid.
pub fn fejer_apply_many(
    b: &FiniteBlaschke,
    f: &SymbolRep,
    points: &[CirclePoint],
    cfg: &QuadratureConfig,
) -> Result<Vec<C64>> {
    let n = b.degree();
    let q: Vec<Vec<C64>> = points.iter().map(|p| b.kernel_coefficients(p.value())).collect();
    let norms: Vec<f64> = points.iter().map(|p| b.abs_derivative(p)).collect();
    let r = integrate_vector(GridPlan::for_blaschke(b, cfg), points.len(), cfg, |nodes, acc| {
        let mut e = vec![C64::new(0.0, 0.0); n];
        for node in nodes {
            let s = check_sample(f.eval(&node.point), &node.point)? * node.weight;
            b.tmw_basis_all(node.point.value(), &mut e);
            for (k, qk) in q.iter().enumerate() {
                // k^B_ζ(η) = Σ_j conj(e_j(ζ)) e_j(η)
                let kv: C64 = qk.iter().zip(&e).map(|(a, b)| a * b).sum();
                acc[k] += s * kv.norm_sqr();
            }
        }
        Ok(())
    })?;
    Ok(r.values.into_iter().zip(&norms).map(|(v, d)| v / *d).collect())
}

pub fn fejer_apply(b: &FiniteBlaschke, f: &SymbolRep, zeta: &CirclePoint, cfg: &QuadratureConfig) -> Result<C64> {
    Ok(fejer_apply_many(b, f, std::slice::from_ref(zeta), cfg)?[0])
}

/// Berezin transform `⟨T k^B_ζ, k^B_ζ⟩ / |B'(ζ)|`; for `T = T_B(f)` this is `E_N f(ζ)`.
pub fn berezin(t: &OperatorMatrix, b: &FiniteBlaschke, zeta: &CirclePoint) -> Result<C64> {
    if t.basis() != b.fingerprint() {
        return Err(Error::BasisMismatch);
    }
    let q = b.kernel_coefficients(zeta.value());
    let tq = t.matrix.matvec(&q);
    let v: C64 = q.iter().zip(&tq).map(|(a, b)| a.conj() * b).sum();
    Ok(v / b.abs_derivative(zeta))
}

/// Average of `φ(U_α)` over `α`-grids of doubling order.
#[derive(Clone, Debug)]
pub struct OperatorAverage {
    pub average: OperatorMatrix,
    pub alpha_count: usize,
    /// Frobenius change at the last doubling.
    pub last_change: f64,
    pub converged: bool,
}

/// `∫ φ(U_α) dα` on equispaced α's, doubled until the Frobenius change is
/// below tolerance; the α count is capped at `cfg.max_points / N`.
pub fn operator_disintegration(
    b: &FiniteBlaschke,
    phi: &SymbolRep,
    alpha_count: usize,
    cfg: &QuadratureConfig,
) -> Result<OperatorAverage> {
    if !alpha_count.is_power_of_two() {
        return Err(Error::param("alpha_count", "must be a power of two"));
    }
    cfg.validate()?;
    let n = b.degree();
    let sum_over = |alphas: Vec<C64>| -> Result<CMatrix> {
        let mut s = CMatrix::zeros(n, n);
        for a in alphas {
            s = &s + &build_clark_spectral(b, &clark_measure(b, a)?, phi)?.matrix;
        }
        Ok(s)
    };
    let cap = (cfg.max_points / n).max(alpha_count);
    let mut m = alpha_count;
    let mut sum = sum_over(alpha_grid(m))?;
    let mut avg = sum.scale(C64::new(1.0 / m as f64, 0.0));
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    while 2 * m <= cap {
        let new = (0..m)
            .map(|k| C64::from_polar(1.0, PI * (2 * k + 1) as f64 / m as f64))
            .collect();
        sum = &sum + &sum_over(new)?;
        m *= 2;
        let next = sum.scale(C64::new(1.0 / m as f64, 0.0));
        last_change = (&next - &avg).frobenius_norm();
        avg = next;
        if last_change <= cfg.abs_tol.max(cfg.rel_tol * avg.frobenius_norm()) {
            converged = true;
            break;
        }
    }
    Ok(OperatorAverage {
        average: OperatorMatrix::new(avg, b)?,
        alpha_count: m,
        last_change,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GridKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn three_zero() -> FiniteBlaschke {
        FiniteBlaschke::new(vec![c(0.0, 0.0), c(0.5, 0.0), c(0.0, 0.3)]).unwrap()
    }

    #[test]
    fn classical_tridiagonal() {
        let b = FiniteBlaschke::monomial(3).unwrap();
        let t = build_truncated_toeplitz(&b, &SymbolRep::trig(TrigPoly::two_cos()), &cfg()).unwrap();
        for i in 0..3usize {
            for j in 0..3 {
                let want = if i.abs_diff(j) == 1 { 1.0 } else { 0.0 };
                assert!((t.matrix[(i, j)] - c(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn classical_reduction_random_poly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = TrigPoly::new((-3..=3).map(|k| (k, c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))));
        let b = FiniteBlaschke::monomial(6).unwrap();
        let t = build_truncated_toeplitz(&b, &SymbolRep::trig(p.clone()), &cfg()).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert!((t.matrix[(i, j)] - p.coeff(i as i32 - j as i32)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn identity_symbol_gives_identity() {
        let b = FiniteBlaschke::new(vec![c(0.0, 0.0), c(0.5, 0.0), c(-0.7, 0.2), c(0.1, 0.9)]).unwrap();
        let t = build_truncated_toeplitz(&b, &SymbolRep::trig(TrigPoly::constant(c(1.0, 0.0))), &cfg()).unwrap();
        assert!((&t.matrix - &CMatrix::identity(4)).max_abs() < 1e-8);
    }

    #[test]
    fn compressed_shift_trace() {
        let b = FiniteBlaschke::new(vec![c(0.0, 0.0), c(0.5, 0.0)]).unwrap();
        let z = SymbolRep::trig(TrigPoly::character(1));
        let t = build_truncated_toeplitz(&b, &z, &cfg()).unwrap();
        assert!((trace(&t) - c(0.5, 0.0)).norm() < 1e-9);
        assert!((trace_formula_rhs(&b, &z, &cfg()).unwrap().value - c(0.5, 0.0)).norm() < 1e-9);
        let one = SymbolRep::trig(TrigPoly::constant(c(1.0, 0.0)));
        assert!((trace_formula_rhs(&b, &one, &cfg()).unwrap().value - c(2.0, 0.0)).norm() < 1e-9);
        let m = FiniteBlaschke::monomial(5).unwrap();
        let p = SymbolRep::trig(TrigPoly::new([(0, c(0.3, 0.1)), (2, c(1.0, 0.0))]));
        assert!((trace_formula_rhs(&m, &p, &cfg()).unwrap().value - c(1.5, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn real_symbol_is_self_adjoint() {
        let b = three_zero();
        let t = build_truncated_toeplitz(&b, &SymbolRep::preset("abs_sin").unwrap(), &cfg()).unwrap();
        assert_eq!(t.matrix.hermitian_defect(), 0.0);
    }

    #[test]
    fn clark_unitary_for_monomial_is_alpha_circulant() {
        let alpha = C64::from_polar(1.0, 0.4);
        let b = FiniteBlaschke::monomial(4).unwrap();
        let u = build_clark_unitary(&b, alpha, &cfg()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j + 1 {
                    c(1.0, 0.0)
                } else if i == 0 && j == 3 {
                    alpha
                } else {
                    c(0.0, 0.0)
                };
                assert!((u.matrix[(i, j)] - want).norm() < 1e-12, "{i} {j}");
            }
        }
    }

    #[test]
    fn clark_unitary_matches_spectral() {
        let b = three_zero();
        let alpha = C64::from_polar(1.0, 0.7);
        let u = build_clark_unitary(&b, alpha, &cfg()).unwrap();
        let uu = u.adjoint().matmul(&u).unwrap();
        assert!((&uu.matrix - &CMatrix::identity(3)).frobenius_norm() < 1e-8);
        let mu = clark_measure(&b, alpha).unwrap();
        let s = build_clark_spectral(&b, &mu, &SymbolRep::trig(TrigPoly::character(1))).unwrap();
        assert!((&u.matrix - &s.matrix).frobenius_norm() < 1e-7);
        // eigenvector property
        for atom in &mu.atoms {
            let q = b.kernel_coefficients(atom.point.value());
            let uq = u.matrix.matvec(&q);
            let err: f64 = uq.iter().zip(&q).map(|(a, b)| (a - atom.point.value() * b).norm_sqr()).sum();
            assert!(err.sqrt() < 1e-7);
        }
    }

    #[test]
    fn clark_unitary_preconditions() {
        let b = FiniteBlaschke::new(vec![c(0.5, 0.0)]).unwrap();
        assert!(matches!(build_clark_unitary(&b, c(1.0, 0.0), &cfg()), Err(Error::NoZeroAtOrigin)));
        let b = three_zero();
        assert!(matches!(build_clark_unitary(&b, c(2.0, 0.0), &cfg()), Err(Error::NotUnimodular { .. })));
    }

    #[test]
    fn clark_spectral_basics() {
        let b = FiniteBlaschke::monomial(2).unwrap();
        let mu = clark_measure(&b, c(1.0, 0.0)).unwrap();
        let s = build_clark_spectral(&b, &mu, &SymbolRep::trig(TrigPoly::character(1))).unwrap();
        let h = s.matrix.hermitian_eigen().unwrap();
        assert!((h.eigenvalues[0] + 1.0).abs() < 1e-12 && (h.eigenvalues[1] - 1.0).abs() < 1e-12);
        let b = three_zero();
        let mu = clark_measure(&b, C64::from_polar(1.0, 2.0)).unwrap();
        let one = build_clark_spectral(&b, &mu, &SymbolRep::trig(TrigPoly::constant(c(1.0, 0.0)))).unwrap();
        assert!((&one.matrix - &CMatrix::identity(3)).frobenius_norm() < 1e-8);
        // Schatten-2 norm as ∫ |φ|² |B'| dμ_α
        let phi = SymbolRep::trig(TrigPoly::new([(1, c(0.3, 0.2)), (-2, c(1.0, 0.0))]));
        let m = build_clark_spectral(&b, &mu, &phi).unwrap();
        let sum: f64 = mu.atoms.iter().map(|a| phi.eval(&a.point).norm_sqr() * b.abs_derivative(&a.point) * a.weight).sum();
        assert!((hs_norm(&m).powi(2) - sum).abs() < 1e-8);
        let other = FiniteBlaschke::monomial(3).unwrap();
        assert!(matches!(build_clark_spectral(&other, &mu, &phi), Err(Error::BasisMismatch)));
    }

    #[test]
    fn beta_norm_two_routes() {
        let b = three_zero();
        let alpha = C64::from_polar(1.0, 1.1);
        let mu = clark_measure(&b, alpha).unwrap();
        let m = build_clark_spectral(&b, &mu, &SymbolRep::beta(&b)).unwrap();
        let direct = crate::clark::clark_beta_norm(&b, alpha).unwrap();
        assert!((op_norm(&m) - direct).abs() < 1e-8);
    }

    #[test]
    fn function_paths() {
        let b = FiniteBlaschke::monomial(7).unwrap();
        let t = build_truncated_toeplitz(&b, &SymbolRep::trig(TrigPoly::two_cos()), &cfg()).unwrap();
        let id = apply_function(&t, &ScalarFunction::identity()).unwrap();
        assert!((&id.matrix - &t.matrix).max_abs() < 1e-15);
        let sq = apply_function(&t, &ScalarFunction::poly_real(&[0.0, 0.0, 1.0])).unwrap();
        assert!((trace(&sq) - c(12.0, 0.0)).norm() < 1e-10);
        let b = three_zero();
        let t = build_truncated_toeplitz(&b, &SymbolRep::trig(TrigPoly::re_z()), &cfg()).unwrap();
        let poly = apply_function(&t, &ScalarFunction::poly_real(&[0.0, -2.0, 0.0, 1.0])).unwrap();
        let pw = apply_function(&t, &ScalarFunction::pointwise("x3-2x", |x| x * x * x - 2.0 * x)).unwrap();
        assert!((&poly.matrix - &pw.matrix).frobenius_norm() < 1e-8);
        let z = build_truncated_toeplitz(&b, &SymbolRep::trig(TrigPoly::character(1)), &cfg()).unwrap();
        assert!(matches!(
            apply_function(&z, &ScalarFunction::pointwise("abs", f64::abs)),
            Err(Error::NotSelfAdjoint { .. })
        ));
    }

    #[test]
    fn norm_examples() {
        let b = FiniteBlaschke::monomial(5).unwrap();
        let i = OperatorMatrix::new(CMatrix::identity(5), &b).unwrap();
        assert_eq!(trace(&i), c(5.0, 0.0));
        assert!((hs_norm(&i) - 5f64.sqrt()).abs() < 1e-14);
        assert!((trace_norm(&i) - 5.0).abs() < 1e-12);
        assert!((op_norm(&i) - 1.0).abs() < 1e-12);
        assert!(OperatorMatrix::new(CMatrix::identity(4), &b).is_err());
    }

    #[test]
    fn rank_one_defect_examples() {
        let b = FiniteBlaschke::monomial(4).unwrap();
        let d = rank_one_defect(&b, &cfg()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert!((d.matrix[(i, j)] - c(want, 0.0)).norm() < 1e-12);
            }
        }
        let b = FiniteBlaschke::new(vec![c(0.0, 0.0), c(0.5, 0.0), c(-0.4, 0.0)]).unwrap();
        let d = rank_one_defect(&b, &cfg()).unwrap();
        assert!((trace(&d) - c(1.0, 0.0)).norm() < 1e-8);
        let sv = d.matrix.singular_values();
        assert!(sv[1] < 1e-8);
        let u = b.kernel_coefficients(c(0.0, 0.0));
        assert!((&d.matrix - &CMatrix::outer(&u, &u)).max_abs() < 1e-8);
    }

    #[test]
    fn fejer_examples() {
        let b = three_zero();
        let one = SymbolRep::trig(TrigPoly::constant(c(1.0, 0.0)));
        let z = CirclePoint::from_angle(0.8);
        assert!((fejer_apply(&b, &one, &z, &cfg()).unwrap() - c(1.0, 0.0)).norm() < 1e-9);
        let n = 6;
        let m = FiniteBlaschke::monomial(n).unwrap();
        let v = fejer_apply(&m, &SymbolRep::trig(TrigPoly::two_cos()), &CirclePoint::from_angle(0.0), &cfg()).unwrap();
        assert!((v - c(2.0 * (n as f64 - 1.0) / n as f64, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn fejer_matches_berezin() {
        let b = three_zero();
        let f = SymbolRep::trig(TrigPoly::new([(1, c(0.5, 0.1)), (-1, c(0.2, 0.0)), (3, c(0.0, 1.0))]));
        let t = build_truncated_toeplitz(&b, &f, &cfg()).unwrap();
        let pts = CirclePoint::equispaced(7);
        let direct = fejer_apply_many(&b, &f, &pts, &cfg()).unwrap();
        for (p, d) in pts.iter().zip(&direct) {
            assert!((berezin(&t, &b, p).unwrap() - d).norm() < 1e-9);
        }
    }

    #[test]
    fn grids_agree_on_matrices() {
        let b = FiniteBlaschke::new(vec![c(0.0, 0.0), c(0.9, 0.1), c(-0.5, 0.5), c(0.0, -0.95)]).unwrap();
        let phi = SymbolRep::trig(TrigPoly::new([(1, c(0.5, 0.1)), (-2, c(0.2, 0.0))]));
        let u = build_truncated_toeplitz(&b, &phi, &cfg().with_grid(GridKind::Uniform)).unwrap();
        let p = build_truncated_toeplitz(&b, &phi, &cfg().with_grid(GridKind::Phase)).unwrap();
        assert!(u.converged && p.converged);
        assert!((&u.matrix - &p.matrix).max_abs() < 1e-9);
    }

    #[test]
    fn operator_disintegration_converges() {
        let b = three_zero();
        let phi = SymbolRep::trig(TrigPoly::re_z());
        let t = build_truncated_toeplitz(&b, &phi, &cfg()).unwrap();
        let avg = operator_disintegration(&b, &phi, 4, &cfg()).unwrap();
        assert!(avg.converged);
        assert!((&avg.average.matrix - &t.matrix).frobenius_norm() < 1e-5);
    }
}
