//! The Lagrangian phase `H(λ) = Σ arctan λ_i` and its algebraic companions.
//!
//! With `Π(1 + iλ_k) = X(λ) + iY(λ)` the equation `H(λ) = Θ` becomes the
//! polynomial condition `Z(λ) = cosΘ·Y(λ) − sinΘ·X(λ) = 0`. This module
//! evaluates those polynomials and certifies the real, simple roots of the
//! ray polynomial `t ↦ Z(ta)`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::symfun::{elem_sym_all, gen_sym_table, Scalar};

/// `|H(a) − Θ|` below which `a` counts as a point of the level set `L_Θ`.
pub const LEVEL_SET_TOL: f64 = 1e-10;

/// Distance (in units of π/2) under which a phase is snapped to an exact
/// multiple of π/2, so that `sin Θ`, `cos Θ` come out as exact 0 or ±1.
const QUADRANT_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

/// Dimension plus Lagrangian phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpec {
    n: usize,
    theta: f64,
    class: Criticality,
    sin: f64,
    cos: f64,
}

impl PhaseSpec {
    pub fn new(n: usize, theta: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::DimensionTooSmall { n, min: 3 });
        }
        let half_width = n as f64 * FRAC_PI_2;
        if !theta.is_finite() || theta.abs() >= half_width {
            return Err(Error::PhaseOutOfDomain { n, theta });
        }
        let quarter = theta / FRAC_PI_2;
        let nearest = quarter.round();
        let (sin, cos, snapped) = if (quarter - nearest).abs() <= QUADRANT_SNAP {
            let (s, c) = match (nearest as i64).rem_euclid(4) {
                0 => (0.0, 1.0),
                1 => (1.0, 0.0),
                2 => (0.0, -1.0),
                _ => (-1.0, 0.0),
            };
            (s, c, Some(nearest as i64))
        } else {
            (theta.sin(), theta.cos(), None)
        };
        let crit_quarter = n as i64 - 2;
        let class = match snapped {
            Some(q) if q.abs() == crit_quarter => Criticality::Critical,
            _ if theta.abs() > (n - 2) as f64 * FRAC_PI_2 => Criticality::Supercritical,
            _ => Criticality::Subcritical,
        };
        Ok(Self { n, theta, class, sin, cos })
    }

    /// The critical phase `(n − 2)π/2`.
    pub fn critical(n: usize) -> Result<Self> {
        Self::new(n, (n as f64 - 2.0) * FRAC_PI_2)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn criticality(&self) -> Criticality {
        self.class
    }

    pub fn is_critical(&self) -> bool {
        self.class == Criticality::Critical
    }

    pub fn sin_theta(&self) -> f64 {
        self.sin
    }

    pub fn cos_theta(&self) -> f64 {
        self.cos
    }

    /// True for `(n−2)π/2 ≤ Θ < nπ/2`, the range the ray analysis covers.
    pub fn in_supported_range(&self) -> bool {
        self.theta > 0.0 && self.class != Criticality::Subcritical
    }

    /// The same dimension with phase `−Θ`.
    pub fn negated(&self) -> Self {
        Self { theta: -self.theta, sin: -self.sin, ..*self }
    }

    /// `tan(Θ/n)·𝟙`, the isotropic point of the level set.
    pub fn iso_vector(&self) -> Vec<f64> {
        vec![(self.theta / self.n as f64).tan(); self.n]
    }
}

/// `H(λ) = Σ arctan λ_i`, summed with Neumaier compensation.
pub fn phase_h(lam: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in lam {
        let v = x.atan();
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn alternating<T: Scalar>(s: &[T], parity: usize, weighted: bool) -> T {
    let mut acc = T::zero();
    for (k, v) in s.iter().enumerate().skip(parity).step_by(2) {
        let mut term = v.clone();
        if weighted {
            term = term * from_usize::<T>(k);
        }
        if (k / 2) % 2 == 0 {
            acc = acc + term;
        } else {
            acc = acc - term;
        }
    }
    acc
}

fn from_usize<T: Scalar>(k: usize) -> T {
    let mut v = T::zero();
    for _ in 0..k {
        v = v + T::one();
    }
    v
}

/// `(X(λ), Y(λ)) = (1 − σ_2 + σ_4 − …, σ_1 − σ_3 + σ_5 − …)`.
pub fn poly_xy<T: Scalar>(lam: &[T]) -> (T, T) {
    let s = elem_sym_all(lam);
    (alternating(&s, 0, false), alternating(&s, 1, false))
}

/// `(X̂(λ), Ŷ(λ)) = (−2σ_2 + 4σ_4 − …, σ_1 − 3σ_3 + 5σ_5 − …)`.
pub fn poly_xy_hat<T: Scalar>(lam: &[T]) -> (T, T) {
    let s = elem_sym_all(lam);
    (alternating(&s, 0, true), alternating(&s, 1, true))
}

/// `c_0(Θ), …, c_n(Θ)` with `Σ c_k σ_k = cosΘ·Y − sinΘ·X`.
pub fn coeffs_c(spec: &PhaseSpec) -> Vec<f64> {
    (0..=spec.n)
        .map(|k| {
            let j = k / 2;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if k % 2 == 0 {
                -sign * spec.sin
            } else {
                sign * spec.cos
            }
        })
        .collect()
}

/// `Z(Θ, λ) = Σ c_k σ_k(λ)`.
pub fn z_eval(spec: &PhaseSpec, lam: &[f64]) -> f64 {
    let c = coeffs_c(spec);
    elem_sym_all(lam).iter().zip(&c).map(|(s, c)| s * c).sum()
}

/// `Ẑ(Θ, λ) = Σ k·c_k σ_k(λ)`.
pub fn zhat_eval(spec: &PhaseSpec, lam: &[f64]) -> f64 {
    let c = coeffs_c(spec);
    elem_sym_all(lam)
        .iter()
        .zip(&c)
        .enumerate()
        .map(|(k, (s, c))| k as f64 * s * c)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZstarMode {
    /// `X·Ŷ − Y·X̂` from the phase polynomials.
    Product,
    /// `Σ_{p=0}^{n-1} S_{p+1}^p`, a sum of terms that are positive on `Γ⁺`.
    ClosedForm,
}

/// `Ẑ_*(λ) = X(λ)Ŷ(λ) − Y(λ)X̂(λ)` by either route.
pub fn zstar<T: Scalar>(lam: &[T], mode: ZstarMode) -> T {
    match mode {
        ZstarMode::Product => {
            let (x, y) = poly_xy(lam);
            let (xh, yh) = poly_xy_hat(lam);
            x * yh - y * xh
        }
        ZstarMode::ClosedForm => {
            let table = gen_sym_table(lam);
            (0..lam.len()).fold(T::zero(), |acc, p| acc + table[p + 1][p].clone())
        }
    }
}

/// Degree `N(n, Θ)` of `t ↦ Z(ta)`: `n − 1` at the critical phase, `n` above it.
pub fn order_n(spec: &PhaseSpec) -> Result<usize> {
    if !spec.in_supported_range() {
        return Err(Error::PhaseOutOfRange);
    }
    Ok(if spec.is_critical() { spec.n - 1 } else { spec.n })
}

/// Coefficients `c_k σ_k(a)` of `t ↦ Z(ta)` in increasing powers of `t`,
/// trimmed to degree `N`.
pub fn ray_coeffs(spec: &PhaseSpec, a: &[f64]) -> Result<Vec<f64>> {
    let deg = order_n(spec)?;
    if a.len() != spec.n {
        return Err(Error::LengthMismatch { left: a.len(), right: spec.n });
    }
    let c = coeffs_c(spec);
    let s = elem_sym_all(a);
    Ok((0..=deg).map(|k| c[k] * s[k]).collect())
}

pub(crate) fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// `d`-th derivative of `Σ coeffs[k] t^k` at `t`.
pub(crate) fn poly_derivative(coeffs: &[f64], d: usize, t: f64) -> f64 {
    if d >= coeffs.len() {
        return 0.0;
    }
    let shifted: Vec<f64> = (d..coeffs.len())
        .map(|k| {
            let falling: f64 = ((k - d + 1)..=k).map(|f| f as f64).product();
            coeffs[k] * falling
        })
        .collect();
    horner(&shifted, t)
}

/// Certified real and simple roots of `t ↦ Z(ta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RayRootCertificate {
    pub roots: Vec<f64>,
    pub degree: usize,
    pub leading_coeff: f64,
    pub max_root_is_one: bool,
    pub simplicity_margin: f64,
    /// Sign changes of `Z(ta)` across the separating grid.
    pub sign_changes: usize,
}

/// Largest imaginary part (relative) a companion eigenvalue may carry and
/// still be treated as a real root before polishing.
const IMAG_TOL: f64 = 1e-6;
/// Tolerance for "largest root equals 1".
pub const ROOT_ONE_TOL: f64 = 1e-9;

fn check_positive(a: &[f64]) -> Result<()> {
    if a.iter().all(|x| x.is_finite() && *x > 0.0) {
        Ok(())
    } else {
        Err(Error::NotPositive)
    }
}

/// Eigenvalues of the companion matrix of `Σ coeffs[k] t^k`.
pub(crate) fn companion_roots(coeffs: &[f64]) -> Vec<(f64, f64)> {
    let deg = coeffs.len() - 1;
    let lead = coeffs[deg];
    let mut m = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        m[(i, deg - 1)] = -coeffs[i] / lead;
    }
    m.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
}

fn newton_polish(coeffs: &[f64], mut t: f64) -> f64 {
    for _ in 0..8 {
        let f = horner(coeffs, t);
        let df = poly_derivative(coeffs, 1, t);
        if df == 0.0 || !f.is_finite() {
            break;
        }
        let next = t - f / df;
        if !next.is_finite() {
            break;
        }
        if (next - t).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            t = next;
            break;
        }
        // Accept only steps that do not increase the residual.
        if horner(coeffs, next).abs() > f.abs() {
            break;
        }
        t = next;
    }
    t
}

/// Finds and certifies the `N` roots of `t ↦ Z(ta)` for `a ∈ Γ⁺`.
///
/// Roots come from the companion matrix, are polished by Newton steps and
/// are then certified by checking that `Z(ta)` changes sign `N` times on a
/// grid separating consecutive roots. When `H(a) = Θ` (within
/// [`LEVEL_SET_TOL`]) the largest root must equal 1 to [`ROOT_ONE_TOL`].
pub fn z_ray_roots(spec: &PhaseSpec, a: &[f64]) -> Result<RayRootCertificate> {
    check_positive(a)?;
    let coeffs = ray_coeffs(spec, a)?;
    let degree = coeffs.len() - 1;
    let leading_coeff = coeffs[degree];
    if !(leading_coeff > 0.0) {
        return Err(Error::RootCertification(format!(
            "leading coefficient {leading_coeff:e} is not positive"
        )));
    }
    let eig = companion_roots(&coeffs);
    let mut roots = Vec::with_capacity(degree);
    for (re, im) in eig {
        if im.abs() > IMAG_TOL * (1.0 + re.abs()) {
            return Err(Error::RootCertification(format!("complex root {re} + {im}i")));
        }
        roots.push(newton_polish(&coeffs, re));
    }
    roots.sort_by(|x, y| x.total_cmp(y));
    if roots.len() != degree {
        return Err(Error::RootCertification(format!(
            "found {} roots, expected {degree}",
            roots.len()
        )));
    }

    let scale = roots.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let simplicity_margin = roots
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if degree > 1 && !(simplicity_margin > 1e-7 * (1.0 + scale)) {
        return Err(Error::RootCertification(format!(
            "roots not separated (gap {simplicity_margin:e})"
        )));
    }

    // Separating grid: one point left of all roots, the midpoints, one right.
    let pad = 1.0 + scale;
    let mut grid = Vec::with_capacity(degree + 1);
    grid.push(roots[0] - pad);
    grid.extend(roots.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    grid.push(roots[degree - 1] + pad);
    let signs: Vec<f64> = grid.iter().map(|&t| horner(&coeffs, t).signum()).collect();
    let sign_changes = signs.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
    if sign_changes != degree || signs[degree] <= 0.0 {
        return Err(Error::RootCertification(format!(
            "{sign_changes} sign changes for degree {degree}"
        )));
    }

    let on_level_set = (phase_h(a) - spec.theta()).abs() <= LEVEL_SET_TOL;
    let max_root_is_one = (roots[degree - 1] - 1.0).abs() <= ROOT_ONE_TOL;
    if on_level_set && !max_root_is_one {
        return Err(Error::RootCertification(format!(
            "largest root {} differs from 1",
            roots[degree - 1]
        )));
    }
    Ok(RayRootCertificate {
        roots,
        degree,
        leading_coeff,
        max_root_is_one,
        simplicity_margin: if degree > 1 { simplicity_margin } else { f64::INFINITY },
        sign_changes,
    })
}

/// `d^order/dt^order Z(ta)` at `t ≥ 1` for `a ∈ L_Θ ∩ Γ⁺`.
///
/// Positive for `order ≥ 1`, and for `order = 0` when `t > 1`; zero (up to
/// rounding) at `t = 1, order = 0`.
pub fn z_ray_positivity(spec: &PhaseSpec, a: &[f64], t: f64, order: usize) -> Result<f64> {
    check_positive(a)?;
    let coeffs = ray_coeffs(spec, a)?;
    let dev = (phase_h(a) - spec.theta()).abs();
    if dev > LEVEL_SET_TOL {
        return Err(Error::NotOnLevelSet(dev));
    }
    if !(t >= 1.0) {
        return Err(Error::OutOfRange(format!("t = {t} must be at least 1")));
    }
    if order > coeffs.len() - 1 {
        return Err(Error::OutOfRange(format!(
            "derivative order {order} exceeds N = {}",
            coeffs.len() - 1
        )));
    }
    Ok(poly_derivative(&coeffs, order, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symfun::{rational_ones, Rational};
    use num_bigint::BigInt;
    use std::f64::consts::PI;

    #[test]
    fn phase_examples() {
        assert!((phase_h(&[1.0; 4]) - PI).abs() < 1e-15);
        assert_eq!(phase_h(&[0.0; 3]), 0.0);
        let theta = 1.3;
        let lam = vec![(theta / 5.0f64).tan(); 5];
        assert!((phase_h(&lam) - theta).abs() < 1e-15);
    }

    #[test]
    fn xy_examples() {
        assert_eq!(poly_xy(&[0.0; 4]), (1.0, 0.0));
        assert_eq!(poly_xy(&[1.0; 4]), (-4.0, 0.0));
        assert_eq!(poly_xy(&[1.0, 0.0, 0.0]), (1.0, 1.0));
        assert_eq!(poly_xy_hat(&[0.0; 3]), (0.0, 0.0));
        assert_eq!(poly_xy_hat(&[1.0; 3]), (-6.0, 0.0));
        assert_eq!(poly_xy_hat(&[1.0, 0.0, 0.0, 0.0]), (0.0, 1.0));
    }

    #[test]
    fn coefficient_examples() {
        let spec = PhaseSpec::new(3, PI / 2.0).unwrap();
        assert_eq!(coeffs_c(&spec), vec![-1.0, 0.0, 1.0, 0.0]);
        for n in 3..=9 {
            let spec = PhaseSpec::critical(n).unwrap();
            let c = coeffs_c(&spec);
            assert!(spec.is_critical());
            assert_eq!(c[n], 0.0);
            assert_eq!(c[n - 1], 1.0);
            for theta in [(n as f64 - 1.5) * FRAC_PI_2, (n as f64 - 0.2) * FRAC_PI_2] {
                let spec = PhaseSpec::new(n, theta).unwrap();
                assert_eq!(spec.criticality(), Criticality::Supercritical);
                assert!(coeffs_c(&spec)[n] > 0.0);
            }
        }
    }

    #[test]
    fn coefficients_reproduce_y_and_x() {
        let spec = PhaseSpec::new(5, 2.2).unwrap();
        let lam = [0.3, -1.2, 2.5, 0.7, 1.1];
        let (x, y) = poly_xy(&lam);
        let expect = spec.cos_theta() * y - spec.sin_theta() * x;
        assert!((z_eval(&spec, &lam) - expect).abs() < 1e-12);
        let (xh, yh) = poly_xy_hat(&lam);
        let expect = spec.cos_theta() * yh - spec.sin_theta() * xh;
        assert!((zhat_eval(&spec, &lam) - expect).abs() < 1e-12);
    }

    #[test]
    fn z_examples() {
        let spec = PhaseSpec::new(3, PI / 2.0).unwrap();
        let base = 1.0 / 3.0f64.sqrt();
        for t in [0.5, 1.0, 2.0, 3.0] {
            let z = z_eval(&spec, &[t * base; 3]);
            assert!((z - (t * t - 1.0)).abs() < 1e-14, "t={t}");
        }
        let spec = PhaseSpec::new(4, 2.0).unwrap();
        let z = z_eval(&spec, &spec.iso_vector());
        assert!(z.abs() < 1e-14);
        assert!(zhat_eval(&spec, &spec.iso_vector()) > 0.0);
    }

    #[test]
    fn zstar_examples() {
        assert_eq!(zstar(&[1.0; 4], ZstarMode::Product), 32.0);
        assert_eq!(zstar(&[1.0; 4], ZstarMode::ClosedForm), 32.0);
        assert_eq!(zstar(&[1.0, 0.0, 0.0], ZstarMode::Product), 1.0);
        assert_eq!(zstar(&[1.0, 0.0, 0.0], ZstarMode::ClosedForm), 1.0);
        let ones = rational_ones(6);
        assert_eq!(
            zstar(&ones, ZstarMode::Product),
            Rational::from_integer(BigInt::from(192))
        );
    }

    #[test]
    fn order_examples() {
        assert_eq!(order_n(&PhaseSpec::new(5, 3.0 * PI / 2.0).unwrap()).unwrap(), 4);
        assert_eq!(order_n(&PhaseSpec::new(5, 5.0 * PI / 3.0).unwrap()).unwrap(), 5);
        assert_eq!(order_n(&PhaseSpec::new(3, PI / 2.0).unwrap()).unwrap(), 2);
        assert_eq!(order_n(&PhaseSpec::new(5, 1.0).unwrap()), Err(Error::PhaseOutOfRange));
        assert_eq!(order_n(&PhaseSpec::new(3, -2.0).unwrap()), Err(Error::PhaseOutOfRange));
    }

    #[test]
    fn spec_validation() {
        assert!(PhaseSpec::new(2, 0.5).is_err());
        assert!(PhaseSpec::new(3, 3.0 * FRAC_PI_2).is_err());
        assert!(PhaseSpec::new(3, f64::NAN).is_err());
        let near = PhaseSpec::new(4, PI + 1e-9).unwrap();
        assert_eq!(near.criticality(), Criticality::Supercritical);
        let near = PhaseSpec::new(4, PI - 1e-9).unwrap();
        assert_eq!(near.criticality(), Criticality::Subcritical);
    }

    #[test]
    fn ray_roots_closed_case() {
        let spec = PhaseSpec::new(3, PI / 2.0).unwrap();
        let a = vec![1.0 / 3.0f64.sqrt(); 3];
        let cert = z_ray_roots(&spec, &a).unwrap();
        assert_eq!(cert.degree, 2);
        assert!((cert.roots[0] + 1.0).abs() < 1e-12);
        assert!((cert.roots[1] - 1.0).abs() < 1e-12);
        assert!(cert.max_root_is_one);
        assert_eq!(cert.sign_changes, 2);
    }

    #[test]
    fn ray_roots_reject_nonpositive() {
        let spec = PhaseSpec::new(3, 2.0).unwrap();
        assert_eq!(z_ray_roots(&spec, &[1.0, -1.0, 2.0]), Err(Error::NotPositive));
    }

    #[test]
    fn positivity_examples() {
        let spec = PhaseSpec::new(3, PI / 2.0).unwrap();
        let a = vec![1.0 / 3.0f64.sqrt(); 3];
        assert!(z_ray_positivity(&spec, &a, 1.0, 0).unwrap().abs() < 1e-15);
        let d1 = z_ray_positivity(&spec, &a, 1.0, 1).unwrap();
        assert!((d1 - zhat_eval(&spec, &a)).abs() < 1e-14 && d1 > 0.0);
        assert!((z_ray_positivity(&spec, &a, 2.0, 0).unwrap() - 3.0).abs() < 1e-14);
        assert!(z_ray_positivity(&spec, &a, 0.5, 0).is_err());
        assert!(z_ray_positivity(&spec, &a, 1.0, 3).is_err());
        assert!(matches!(
            z_ray_positivity(&spec, &[1.0; 3], 1.0, 0),
            Err(Error::NotOnLevelSet(_))
        ));
    }
}
