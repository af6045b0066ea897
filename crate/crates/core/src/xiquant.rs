//! Extremal weights `ξ̲_k, ξ̄_k`, the decay exponent `m(Θ, a)` and the
//! admissibility classes built on it.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use crate::error::{Error, Result};
use crate::phasepoly::{coeffs_c, phase_h, PhaseSpec, LEVEL_SET_TOL};
use crate::symfun::{elem_sym_all, elem_sym_excl_all, ExclusionSet};

/// Positive spectrum sorted ascending, `n ≥ 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenVector(Vec<f64>);

impl EigenVector {
    /// Accepts any order; entries are sorted ascending.
    pub fn new(mut entries: Vec<f64>) -> Result<Self> {
        if entries.len() < 3 {
            return Err(Error::DimensionTooSmall { n: entries.len(), min: 3 });
        }
        if !entries.iter().all(|x| x.is_finite() && *x > 0.0) {
            return Err(Error::NotPositive);
        }
        entries.sort_by(|x, y| x.total_cmp(y));
        Ok(Self(entries))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for EigenVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `Ξ_k(a, x)` for `a` in any order, `x` paired entrywise with `a`.
pub(crate) fn xi_ratio(a: &[f64], x: &[f64], k: usize) -> Result<f64> {
    if a.len() != x.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: x.len() });
    }
    if x.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroDirection);
    }
    if k > a.len() {
        return Err(Error::InvalidOrder(format!("k = {k} exceeds n = {}", a.len())));
    }
    if k == 0 {
        return Ok(0.0);
    }
    let sigma_k = elem_sym_all(a)[k];
    let mut num = 0.0;
    let mut quad = 0.0;
    for i in 0..a.len() {
        let loo = elem_sym_excl_all(a, &ExclusionSet::single(i + 1)?)?;
        num += loo[k - 1] * a[i] * a[i] * x[i] * x[i];
        quad += a[i] * x[i] * x[i];
    }
    Ok(num / (sigma_k * quad))
}

/// `Ξ_k(a, x) = Σ σ_{k-1;i}(a) a_i² x_i² / (σ_k(a) Σ a_i x_i²)`.
pub fn xi_eval(a: &EigenVector, x: &[f64], k: usize) -> Result<f64> {
    xi_ratio(a.as_slice(), x, k)
}

fn bounds_from(a: &[f64], sigma: &[f64], k: usize) -> (f64, f64) {
    if k == 0 {
        return (0.0, 0.0);
    }
    let n = a.len();
    let first = elem_sym_all(&a[1..]);
    let last = elem_sym_all(&a[..n - 1]);
    (a[0] * first[k - 1] / sigma[k], a[n - 1] * last[k - 1] / sigma[k])
}

/// `(ξ̲_k(a), ξ̄_k(a)) = (a_1σ_{k-1;1}/σ_k, a_nσ_{k-1;n}/σ_k)`.
///
/// # Panics
/// If `k > n`.
pub fn xi_bounds(a: &EigenVector, k: usize) -> (f64, f64) {
    assert!(k <= a.len(), "k = {k} exceeds n = {}", a.len());
    let s = elem_sym_all(a.as_slice());
    bounds_from(a.as_slice(), &s, k)
}

/// Both ξ chains, the phase-selected weights and the exponent `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct XiProfile {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub selected: Vec<f64>,
    pub m: f64,
}

/// Picks `ξ_k = ξ̄_k` where `c_k(Θ) > 0` and `ξ̲_k` otherwise, then forms
/// `m = Σ k c_k σ_k / Σ ξ_k c_k σ_k`.
pub fn xi_select(spec: &PhaseSpec, a: &EigenVector) -> XiProfile {
    let av = a.as_slice();
    let n = av.len();
    let s = elem_sym_all(av);
    let c = coeffs_c(spec);
    let (lower, upper): (Vec<f64>, Vec<f64>) = (0..=n).map(|k| bounds_from(av, &s, k)).unzip();
    let selected: Vec<f64> = (0..=n)
        .map(|k| if c[k] > 0.0 { upper[k] } else { lower[k] })
        .collect();
    let num: f64 = (0..=n).map(|k| k as f64 * c[k] * s[k]).sum();
    let den: f64 = (0..=n).map(|k| selected[k] * c[k] * s[k]).sum();
    XiProfile { lower, upper, selected, m: num / den }
}

/// `m(Θ, a)` for `a ∈ L_Θ ∩ Γ⁺`, `0 < Θ < nπ/2`.
pub fn m_value(spec: &PhaseSpec, a: &EigenVector) -> Result<f64> {
    if a.len() != spec.n() {
        return Err(Error::LengthMismatch { left: a.len(), right: spec.n() });
    }
    if spec.theta() <= 0.0 {
        return Err(Error::PhaseOutOfRange);
    }
    let dev = (phase_h(a.as_slice()) - spec.theta()).abs();
    if dev > LEVEL_SET_TOL {
        return Err(Error::NotOnLevelSet(dev));
    }
    Ok(xi_select(spec, a).m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmissibilityClass {
    NotInA0,
    InA0Only,
    InA,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    pub class: AdmissibilityClass,
    pub m: Option<f64>,
    /// `m` lies within 1e-12 of the threshold 2.
    pub near_threshold: bool,
}

impl Admissibility {
    fn outside() -> Self {
        Self { class: AdmissibilityClass::NotInA0, m: None, near_threshold: false }
    }
}

/// Classifies a spectrum `λ(A)` against `𝒜⁰_Θ` and `𝒜_Θ`.
///
/// Spectra in `−Γ⁺` are handled through `u ↦ −u`, i.e. by evaluating
/// `m(−Θ, −λ)`.
pub fn admissibility(lam: &[f64], spec: &PhaseSpec) -> Admissibility {
    if lam.len() != spec.n() || lam.iter().any(|x| !x.is_finite()) {
        return Admissibility::outside();
    }
    let (vec, phase) = if lam.iter().all(|&x| x > 0.0) {
        (lam.to_vec(), *spec)
    } else if lam.iter().all(|&x| x < 0.0) {
        (lam.iter().map(|x| -x).collect(), spec.negated())
    } else {
        return Admissibility::outside();
    };
    let Ok(ev) = EigenVector::new(vec) else {
        return Admissibility::outside();
    };
    match m_value(&phase, &ev) {
        Ok(m) => Admissibility {
            class: if m > 2.0 { AdmissibilityClass::InA } else { AdmissibilityClass::InA0Only },
            m: Some(m),
            near_threshold: (m - 2.0).abs() <= 1e-12,
        },
        Err(_) => Admissibility::outside(),
    }
}

/// Appends `tan(Θ − Σ arctan prefix_i)` to `prefix`, landing on `L_Θ ∩ Γ⁺`.
pub fn complete_to_phase(prefix: &[f64], spec: &PhaseSpec) -> Result<EigenVector> {
    if prefix.len() + 1 != spec.n() {
        return Err(Error::LengthMismatch { left: prefix.len() + 1, right: spec.n() });
    }
    if !prefix.iter().all(|x| x.is_finite() && *x > 0.0) {
        return Err(Error::NotPositive);
    }
    let rest = spec.theta() - phase_h(prefix);
    if !(rest > 0.0 && rest < FRAC_PI_2) {
        return Err(Error::NoPositiveCompletion);
    }
    let last = rest.tan();
    if !(last > 0.0 && last.is_finite()) {
        return Err(Error::NoPositiveCompletion);
    }
    let mut v = prefix.to_vec();
    v.push(last);
    EigenVector::new(v)
}

/// A point of `L_Θ ∩ Γ⁺` with angles `arctan a_i` proportional to
/// `weights`; the last entry is completed exactly.
pub fn level_set_from_weights(weights: &[f64], spec: &PhaseSpec) -> Result<EigenVector> {
    if weights.len() != spec.n() {
        return Err(Error::LengthMismatch { left: weights.len(), right: spec.n() });
    }
    if !weights.iter().all(|w| w.is_finite() && *w > 0.0) {
        return Err(Error::NotPositive);
    }
    let total: f64 = weights.iter().sum();
    let angles: Vec<f64> = weights.iter().map(|w| spec.theta() * w / total).collect();
    if angles.iter().any(|t| !(*t > 0.0 && *t < FRAC_PI_2)) {
        return Err(Error::NoPositiveCompletion);
    }
    let prefix: Vec<f64> = angles[..angles.len() - 1].iter().map(|t| t.tan()).collect();
    complete_to_phase(&prefix, spec)
}

/// The five-dimensional family `a_ε = tan(π/3 + jε)`, `j = −2..2`, on
/// `L_{5π/3}`. The endpoint `ε = π/12` is accepted: its last entry is
/// `tan` of the largest double not above π/2.
pub fn epsilon_family(eps: f64) -> Result<EigenVector> {
    if !(0.0..=PI / 12.0).contains(&eps) {
        return Err(Error::OutOfRange(format!("epsilon {eps} outside [0, pi/12]")));
    }
    let v = (-2..=2)
        .map(|j| (FRAC_PI_3 + j as f64 * eps).min(FRAC_PI_2).tan())
        .collect();
    EigenVector::new(v)
}

/// The closed form of `m(5π/3, a_ε)` for the five-dimensional family.
pub fn epsilon_family_m_closed_form(eps: f64) -> f64 {
    let r3 = 3.0f64.sqrt();
    let num = 4.0 * r3 * (4.0 * eps).cos() + 4.0 * r3 * (2.0 * eps).cos() + 2.0 * r3;
    let den = 2.0 * r3 * (4.0 * eps).cos()
        + 2.0 * (6.0 * eps).sin()
        + 2.0 * (2.0 * eps).sin()
        + 3.0 * (4.0 * eps).sin();
    num / den
}
