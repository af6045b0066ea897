//! The profile ODE
//!
//! ```text
//! r ψ'(r) Σ ξ_k c_k σ_k ψ^{k-1} + Σ c_k σ_k ψ^k = 0,   ψ(1) = β,
//! ```
//!
//! equivalently `ψ' = g(ψ)/r` with `g(ν) = −Z(νa)/D(ν)` where
//! `D(ν) = Σ ξ_k c_k σ_k ν^{k-1}`.
//!
//! Two independent solvers are provided. The numeric route integrates the
//! excess `u = ψ − 1` in the variables `v = ln u`, `s = ln r` with an
//! embedded Dormand–Prince 5(4) pair; the autonomous field `dv/ds` tends to
//! `−m` as `u → 0`, so relative accuracy of `ψ − 1` survives far into the
//! tail. The implicit route inverts the closed relation
//! `(ψ−1)·B(ψ) = (β−1)·B(β)·r^{−m}` obtained from the partial-fraction
//! decomposition of `D(ψ)/Z(ψa)`.

use crate::error::{Error, Result};
use crate::phasepoly::{
    horner, order_n, phase_h, poly_derivative, ray_coeffs, z_ray_roots, PhaseSpec, LEVEL_SET_TOL,
};
use crate::quad::Composite;
use crate::symfun::elem_sym_all;
use crate::xiquant::{xi_select, EigenVector, XiProfile};

/// Largest accepted initial value.
pub const BETA_MAX: f64 = 1e6;
/// Initial values above this are accepted but flagged as poorly conditioned.
pub const BETA_WARN: f64 = 1e3;

/// Partial fractions of `D(ψ)/Z(ψa) = Σ K_j/(ψ − ψ_j)`.
///
/// `roots[0] = 1` and `roots[1..]` are `ψ_2 > … > ψ_N`; `k[j]` pairs with
/// `roots[j]`, so `k[0] = K_1 = 1/m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFractionData {
    pub roots: Vec<f64>,
    pub k: Vec<f64>,
    pub m: f64,
}

impl PartialFractionData {
    /// `Σ K_j/(ν − ψ_j)`.
    pub fn recombine(&self, nu: f64) -> f64 {
        self.roots.iter().zip(&self.k).map(|(r, k)| k / (nu - r)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Numeric,
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiSample {
    pub r: f64,
    pub psi: f64,
    /// `ψ − 1`, carried separately to keep its relative precision.
    pub excess: f64,
}

/// A sampled trajectory `r ↦ ψ(r, β)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiSolution {
    pub beta: f64,
    pub samples: Vec<PsiSample>,
    pub route: Route,
    pub m: f64,
    pub pf: Option<PartialFractionData>,
}

/// Everything the profile ODE needs for one `(Θ, a)`.
#[derive(Debug, Clone)]
pub struct PsiModel {
    spec: PhaseSpec,
    a: EigenVector,
    profile: XiProfile,
    /// `c_k σ_k(a)`, `k = 0..N`.
    z: Vec<f64>,
    /// Coefficients of `Z((1+u)a)/u` in powers of `u`.
    z_over_u: Vec<f64>,
    /// `D(ν)` in powers of `ν`.
    d: Vec<f64>,
    pf: PartialFractionData,
}

impl PsiModel {
    /// Requires `(n−2)π/2 ≤ Θ < nπ/2` and `a ∈ L_Θ ∩ Γ⁺`.
    pub fn new(spec: &PhaseSpec, a: &EigenVector) -> Result<Self> {
        order_n(spec)?;
        if a.len() != spec.n() {
            return Err(Error::LengthMismatch { left: a.len(), right: spec.n() });
        }
        let dev = (phase_h(a.as_slice()) - spec.theta()).abs();
        if dev > LEVEL_SET_TOL {
            return Err(Error::NotOnLevelSet(dev));
        }
        let profile = xi_select(spec, a);
        let z = ray_coeffs(spec, a.as_slice())?;
        let deg = z.len() - 1;

        // Taylor shift to u = ν − 1; the constant term Z(a) vanishes on L_Θ.
        let mut shifted = vec![0.0; deg + 1];
        for (k, &p) in z.iter().enumerate() {
            let mut binom = 1.0;
            for (j, slot) in shifted.iter_mut().enumerate().take(k + 1) {
                *slot += p * binom;
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
        }
        let z_over_u = shifted[1..].to_vec();

        let s = elem_sym_all(a.as_slice());
        let c = crate::phasepoly::coeffs_c(spec);
        let d: Vec<f64> = (1..=deg).map(|k| profile.selected[k] * c[k] * s[k]).collect();

        let pf = partial_fractions(spec, a, &z, &d, profile.m)?;
        Ok(Self { spec: *spec, a: a.clone(), profile, z, z_over_u, d, pf })
    }

    pub fn spec(&self) -> &PhaseSpec {
        &self.spec
    }

    pub fn a(&self) -> &EigenVector {
        &self.a
    }

    pub fn profile(&self) -> &XiProfile {
        &self.profile
    }

    pub fn m(&self) -> f64 {
        self.profile.m
    }

    pub fn partial_fractions(&self) -> &PartialFractionData {
        &self.pf
    }

    /// `D(ν) = Σ ξ_k c_k σ_k ν^{k−1}`.
    pub fn denominator(&self, nu: f64) -> f64 {
        horner(&self.d, nu)
    }

    /// `Z(νa)`.
    pub fn z_ray(&self, nu: f64) -> f64 {
        horner(&self.z, nu)
    }

    /// `g(ν)`; for `ν ≥ 1` the factor `ν − 1` is pulled out exactly.
    pub fn g(&self, nu: f64) -> Result<f64> {
        let den = self.denominator(nu);
        if !(den > 0.0) {
            return Err(Error::DenominatorNonPositive(den));
        }
        if nu >= 1.0 {
            let u = nu - 1.0;
            Ok(-u * horner(&self.z_over_u, u) / den)
        } else {
            Ok(-self.z_ray(nu) / den)
        }
    }

    /// `g(1 + u)` for `u ≥ 0` without forming `1 + u`.
    pub(crate) fn g_excess(&self, u: f64) -> f64 {
        -u * horner(&self.z_over_u, u) / self.denominator(1.0 + u)
    }

    /// `g'(ν) = −(Z'·D − Z·D')/D²` with `Z' = d/dν Z(νa)`.
    pub fn g_prime(&self, nu: f64) -> Result<f64> {
        let den = self.denominator(nu);
        if !(den > 0.0) {
            return Err(Error::DenominatorNonPositive(den));
        }
        let zp = poly_derivative(&self.z, 1, nu);
        let dp = poly_derivative(&self.d, 1, nu);
        Ok(-(zp * den - self.z_ray(nu) * dp) / (den * den))
    }

    /// `lim_{ν→∞} g'(ν) = −1/ξ_N`.
    pub fn g_prime_limit(&self) -> f64 {
        -1.0 / self.profile.selected[self.z.len() - 1]
    }

    /// `ln B(ν) = Σ_{j≥2} m K_j ln(ν − ψ_j)` at `ν = 1 + u`.
    fn log_b_excess(&self, u: f64) -> f64 {
        let m = self.profile.m;
        self.pf.roots[1..]
            .iter()
            .zip(&self.pf.k[1..])
            .map(|(r, k)| m * k * ((1.0 - r) + u).ln())
            .sum()
    }

    /// `B(ν) = Π_{j≥2} (ν − ψ_j)^{m K_j}` for `ν ≥ 1`.
    pub fn b_factor(&self, nu: f64) -> f64 {
        self.log_b_excess(nu - 1.0).exp()
    }

    /// `(β − 1)·B(β)/B(1)`, the limit of `(ψ − 1)·r^m`.
    pub fn leading_constant(&self, beta: f64) -> f64 {
        if beta <= 1.0 {
            return 0.0;
        }
        let u = beta - 1.0;
        (u.ln() + self.log_b_excess(u) - self.log_b_excess(0.0)).exp()
    }

    fn check_beta(beta: f64) -> Result<()> {
        if !(1.0..=BETA_MAX).contains(&beta) {
            return Err(Error::OutOfRange(format!("beta = {beta} outside [1, {BETA_MAX}]")));
        }
        Ok(())
    }

    /// `ψ(r, β) − 1` from the implicit relation.
    ///
    /// Bisection runs in `v = ln(ψ − 1)`, where the relation reads
    /// `v + ln B(1 + e^v) = ln(β − 1) + ln B(β) − m ln r` and the left side is
    /// strictly increasing; a final Newton step polishes the bracket midpoint.
    pub fn implicit_excess(&self, beta: f64, r: f64) -> Result<f64> {
        Self::check_beta(beta)?;
        if !(r >= 1.0) {
            return Err(Error::OutOfRange(format!("r = {r} must be at least 1")));
        }
        if beta == 1.0 {
            return Ok(0.0);
        }
        let u0 = beta - 1.0;
        if r == 1.0 {
            return Ok(u0);
        }
        let m = self.profile.m;
        let target = u0.ln() + self.log_b_excess(u0) - m * r.ln();
        let lhs = |v: f64| v + self.log_b_excess(v.exp()) - target;

        let mut hi = u0.ln();
        let mut lo = target - self.log_b_excess(0.0) - 1.0;
        let mut step = 1.0;
        let mut tries = 0;
        while lhs(lo) >= 0.0 {
            lo -= step;
            step *= 2.0;
            tries += 1;
            if tries > 200 || !lo.is_finite() {
                return Err(Error::BracketFailure(format!("no lower bracket for r = {r}")));
            }
        }
        if lo > hi {
            hi = lo + 1.0;
        }
        if lhs(hi) < 0.0 {
            return Err(Error::BracketFailure(format!("upper bracket invalid at r = {r}")));
        }
        while hi - lo > 1e-13 * (1.0 + hi.abs().max(lo.abs())) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if lhs(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let v = 0.5 * (lo + hi);
        let u = v.exp();
        let slope: f64 = 1.0
            + u * self.pf.roots[1..]
                .iter()
                .zip(&self.pf.k[1..])
                .map(|(root, k)| m * k / ((1.0 - root) + u))
                .sum::<f64>();
        let polished = v - lhs(v) / slope;
        let v = if polished.is_finite() && polished >= lo - 1e-12 && polished <= hi + 1e-12 {
            polished
        } else {
            v
        };
        Ok(v.exp().min(u0))
    }

    /// `ψ(r, β)` from the implicit relation.
    pub fn implicit_psi(&self, beta: f64, r: f64) -> Result<f64> {
        if r == 1.0 && beta >= 1.0 {
            Self::check_beta(beta)?;
            return Ok(beta);
        }
        Ok((1.0 + self.implicit_excess(beta, r)?).min(beta))
    }

    /// `ψ'(r) = g(ψ)/r`, evaluated on the implicit route.
    pub fn implicit_psi_prime(&self, beta: f64, r: f64) -> Result<f64> {
        let u = self.implicit_excess(beta, r)?;
        Ok(self.g_excess(u) / r)
    }

    /// Numeric trajectory sampled at the given increasing radii `≥ 1`.
    pub fn integrate_at(&self, beta: f64, radii: &[f64], tol: f64) -> Result<PsiSolution> {
        Self::check_beta(beta)?;
        if radii.iter().any(|r| !(*r >= 1.0)) || radii.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::OutOfRange("sample radii must be increasing and >= 1".into()));
        }
        let samples = if beta == 1.0 {
            // ψ ≡ 1 solves the problem exactly.
            radii.iter().map(|&r| PsiSample { r, psi: 1.0, excess: 0.0 }).collect()
        } else {
            let targets: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
            let field = |v: f64| {
                let u = v.exp();
                -horner(&self.z_over_u, u) / self.denominator(1.0 + u)
            };
            let vs = dopri5(field, (beta - 1.0).ln(), &targets, tol, tol * 1e-2)?;
            radii
                .iter()
                .zip(vs)
                .map(|(&r, v)| {
                    if r == 1.0 {
                        PsiSample { r, psi: beta, excess: beta - 1.0 }
                    } else {
                        let excess = v.exp().min(beta - 1.0);
                        PsiSample { r, psi: (1.0 + excess).clamp(1.0, beta), excess }
                    }
                })
                .collect()
        };
        Ok(PsiSolution {
            beta,
            samples,
            route: Route::Numeric,
            m: self.m(),
            pf: Some(self.pf.clone()),
        })
    }

    /// Implicit-route trajectory at the given radii.
    pub fn implicit_at(&self, beta: f64, radii: &[f64]) -> Result<PsiSolution> {
        let samples = radii
            .iter()
            .map(|&r| {
                let excess = self.implicit_excess(beta, r)?;
                Ok(PsiSample { r, psi: if r == 1.0 { beta } else { 1.0 + excess }, excess })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PsiSolution {
            beta,
            samples,
            route: Route::Implicit,
            m: self.m(),
            pf: Some(self.pf.clone()),
        })
    }

    /// `μ_R(β) = ∫_R^∞ τ(ψ(τ, β) − 1) dτ`.
    ///
    /// Gauss–Legendre in `ln τ` on `[R, R_cut]`, `R_cut = max(10³, 10²R)`,
    /// plus the analytic tail `C·R_cut^{2−m}/(m − 2)` and its next-order
    /// correction from `ψ − 1 ≈ w − L'w²`, `w = C τ^{−m}`.
    pub fn mu(&self, beta: f64, big_r: f64) -> Result<f64> {
        let m = self.m();
        if !(m > 2.0) {
            return Err(Error::IntegralMayDiverge(m));
        }
        Self::check_beta(beta)?;
        if !(big_r >= 1.0) {
            return Err(Error::OutOfRange(format!("R = {big_r} must be at least 1")));
        }
        if beta == 1.0 {
            return Ok(0.0);
        }
        let cut = (1e2 * big_r).max(1e3);
        let body = self.excess_moment(beta, big_r, cut)?;
        let c = self.leading_constant(beta);
        let slope: f64 = self.pf.roots[1..]
            .iter()
            .zip(&self.pf.k[1..])
            .map(|(r, k)| m * k / (1.0 - r))
            .sum();
        let tail = c * cut.powf(2.0 - m) / (m - 2.0)
            - slope * c * c * cut.powf(2.0 - 2.0 * m) / (2.0 * m - 2.0);
        Ok(body + tail)
    }

    /// `∫_lo^hi τ(ψ(τ, β) − 1) dτ` on the implicit route.
    pub fn excess_moment(&self, beta: f64, lo: f64, hi: f64) -> Result<f64> {
        let rule = Composite::new(16, 0.25);
        rule.integrate(lo.ln(), hi.ln(), |s| {
            let tau = s.exp();
            Ok(tau * tau * self.implicit_excess(beta, tau)?)
        })
    }
}

fn partial_fractions(
    spec: &PhaseSpec,
    a: &EigenVector,
    z: &[f64],
    d: &[f64],
    m: f64,
) -> Result<PartialFractionData> {
    let cert = z_ray_roots(spec, a.as_slice()).map_err(|e| match e {
        Error::RootCertification(msg) if msg.contains("separated") => Error::RepeatedRoot,
        other => other,
    })?;
    let mut roots: Vec<f64> = cert.roots.iter().rev().copied().collect();
    roots[0] = 1.0;
    let k: Vec<f64> = roots
        .iter()
        .map(|&root| horner(d, root) / poly_derivative(z, 1, root))
        .collect();
    Ok(PartialFractionData { roots, k, m })
}

/// `g(ν)` for `(Θ, a)`.
pub fn g_eval(spec: &PhaseSpec, a: &EigenVector, nu: f64) -> Result<f64> {
    PsiModel::new(spec, a)?.g(nu)
}

/// Partial fractions of `D(ψ)/Z(ψa)`.
pub fn partial_fraction_k(spec: &PhaseSpec, a: &EigenVector) -> Result<PartialFractionData> {
    Ok(PsiModel::new(spec, a)?.pf)
}

/// Default sampling: 1, then 40 log-spaced radii per decade up to `r_max`.
pub fn default_radii(r_max: f64) -> Vec<f64> {
    let decades = r_max.log10().max(0.0);
    let count = (40.0 * decades).ceil().max(1.0) as usize;
    let mut radii: Vec<f64> = (0..=count)
        .map(|i| 10f64.powf(decades * i as f64 / count as f64))
        .collect();
    radii[0] = 1.0;
    radii[count] = r_max;
    radii
}

/// Adaptive numeric solve on `[1, r_max]` with relative tolerance `tol`.
pub fn solve_psi_numeric(
    spec: &PhaseSpec,
    a: &EigenVector,
    beta: f64,
    r_max: f64,
    tol: f64,
) -> Result<PsiSolution> {
    if !(r_max > 1.0) {
        return Err(Error::OutOfRange(format!("r_max = {r_max} must exceed 1")));
    }
    PsiModel::new(spec, a)?.integrate_at(beta, &default_radii(r_max), tol)
}

/// `ψ(r, β)` from the implicit relation.
pub fn solve_psi_implicit(spec: &PhaseSpec, a: &EigenVector, beta: f64, r: f64) -> Result<f64> {
    PsiModel::new(spec, a)?.implicit_psi(beta, r)
}

/// `μ_R(β)`.
pub fn mu_integral(spec: &PhaseSpec, a: &EigenVector, beta: f64, big_r: f64) -> Result<f64> {
    PsiModel::new(spec, a)?.mu(beta, big_r)
}

/// Fitted tail `ψ − 1 ≈ C·r^{−m}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DecayFit {
    pub m_est: f64,
    pub c_est: f64,
    pub points: usize,
}

/// Least squares of `ln(ψ − 1)` against `ln r` over the last decade.
pub fn decay_fit(sol: &PsiSolution) -> Result<DecayFit> {
    if sol.beta <= 1.0 {
        return Err(Error::NoDecay("beta = 1 gives psi identically 1".into()));
    }
    let r_last = sol.samples.last().map(|s| s.r).unwrap_or(0.0);
    if r_last < 1e3 {
        return Err(Error::OutOfRange(format!("trajectory ends at r = {r_last} < 1e3")));
    }
    let pts: Vec<(f64, f64)> = sol
        .samples
        .iter()
        .filter(|s| s.r >= r_last / 10.0 && s.excess > 0.0)
        .map(|s| (s.r.ln(), s.excess.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::NoDecay(format!("only {} usable tail samples", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(DecayFit { m_est: -slope, c_est: intercept.exp(), points: pts.len() })
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Scalar autonomous `y' = f(y)` from `s = 0`, reporting `y` at each target.
fn dopri5<F: Fn(f64) -> f64>(
    f: F,
    y0: f64,
    targets: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(targets.len());
    let mut s = 0.0;
    let mut y = y0;
    let mut k1 = f(y);
    let mut h = 1e-2;
    let mut steps = 0usize;
    for &target in targets {
        while s < target {
            steps += 1;
            if steps > 2_000_000 {
                return Err(Error::IntegrationFailed("step budget exhausted".into()));
            }
            let last = target - s <= h;
            let hh = if last { target - s } else { h };
            let k2 = f(y + hh * A21 * k1);
            let k3 = f(y + hh * (A31 * k1 + A32 * k2));
            let k4 = f(y + hh * (A41 * k1 + A42 * k2 + A43 * k3));
            let k5 = f(y + hh * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
            let k6 = f(y + hh * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
            let y_new = y + hh * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
            let k7 = f(y_new);
            let err = hh * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
            let scale = atol + rtol * y.abs().max(y_new.abs());
            let ratio = (err / scale).abs();
            if !y_new.is_finite() || !ratio.is_finite() {
                h = hh * 0.2;
            } else if ratio <= 1.0 {
                s = if last { target } else { s + hh };
                y = y_new;
                k1 = k7;
                let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
                // Keep the pre-clipping step when the clip was only to hit a target.
                h = if last { h.max(hh * grow) } else { hh * grow };
            } else {
                h = hh * (0.9 * ratio.powf(-0.2)).clamp(0.2, 1.0);
            }
            if h < 1e-14 * (1.0 + s.abs()) {
                return Err(Error::IntegrationFailed(format!("step collapse at s = {s}")));
            }
        }
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn closed_case() -> (PhaseSpec, EigenVector) {
        let spec = PhaseSpec::new(3, FRAC_PI_2).unwrap();
        let a = EigenVector::new(vec![1.0 / 3.0f64.sqrt(); 3]).unwrap();
        (spec, a)
    }

    fn exact(beta: f64, r: f64) -> f64 {
        (1.0 + (beta * beta - 1.0) * r.powi(-3)).sqrt()
    }

    #[test]
    fn dopri_exponential_decay() {
        let ys = dopri5(|y| -y, 1.0, &[1.0, 2.0], 1e-10, 1e-12).unwrap();
        assert!((ys[0] - (-1.0f64).exp()).abs() < 1e-9);
        assert!((ys[1] - (-2.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn g_examples() {
        let (spec, a) = closed_case();
        let model = PsiModel::new(&spec, &a).unwrap();
        assert_eq!(model.g(1.0).unwrap(), 0.0);
        assert!((model.g(2.0).unwrap() + 9.0 / 4.0).abs() < 1e-14);
        let h = 1e-6;
        let fd = (model.g(1.0 + h).unwrap() - model.g(1.0 - h).unwrap()) / (2.0 * h);
        assert!((fd + model.m()).abs() < 1e-8);
        assert!((model.g_prime(1.0).unwrap() + model.m()).abs() < 1e-13);
        assert!(model.g(3.0).unwrap() < 0.0);
    }

    #[test]
    fn partial_fractions_closed_case() {
        let (spec, a) = closed_case();
        let pf = partial_fraction_k(&spec, &a).unwrap();
        assert!((pf.m - 3.0).abs() < 1e-13);
        assert_eq!(pf.roots.len(), 2);
        assert!((pf.roots[1] + 1.0).abs() < 1e-13);
        assert!((pf.k[0] - 1.0 / 3.0).abs() < 1e-13);
        assert!((pf.k[1] - 1.0 / 3.0).abs() < 1e-13);
        // (2/3)ψ/(ψ² − 1) at ψ = 5
        let direct = (2.0 / 3.0) * 5.0 / 24.0;
        assert!((pf.recombine(5.0) - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn numeric_route_closed_case() {
        let (spec, a) = closed_case();
        let sol = solve_psi_numeric(&spec, &a, 2.0, 10.0, 1e-10).unwrap();
        assert_eq!(sol.samples[0].psi, 2.0);
        let model = PsiModel::new(&spec, &a).unwrap();
        let at2 = model.integrate_at(2.0, &[1.0, 2.0], 1e-10).unwrap();
        assert!((at2.samples[1].psi - (11.0f64 / 8.0).sqrt()).abs() < 1e-9);
        assert!(((11.0f64 / 8.0).sqrt() - 1.17260).abs() < 1e-5);
        let flat = model.integrate_at(1.0, &[1.0, 5.0, 100.0], 1e-10).unwrap();
        assert!(flat.samples.iter().all(|s| s.psi == 1.0));
    }

    #[test]
    fn implicit_route_closed_case() {
        let (spec, a) = closed_case();
        let model = PsiModel::new(&spec, &a).unwrap();
        assert_eq!(model.implicit_psi(2.0, 1.0).unwrap(), 2.0);
        assert_eq!(model.implicit_psi(1.0, 37.0).unwrap(), 1.0);
        let v = model.implicit_psi(2.0, 10.0).unwrap();
        assert!((v - exact(2.0, 10.0)).abs() < 1e-12);
        assert!((v - 1.0014989).abs() < 1e-7);
    }

    #[test]
    fn mu_closed_case() {
        let (spec, a) = closed_case();
        let model = PsiModel::new(&spec, &a).unwrap();
        assert_eq!(model.mu(1.0, 4.0).unwrap(), 0.0);
        assert!(model.mu(2.0, 4.0).unwrap() < model.mu(3.0, 4.0).unwrap());
        // ∫_R^∞ τ(√(1+3τ⁻³) − 1) dτ via the binomial series, term by term.
        let big_r: f64 = 10.0;
        let mut coeff = 1.0;
        let mut series = 0.0;
        for j in 1..40 {
            coeff *= (0.5 - (j - 1) as f64) / j as f64;
            let p = 3 * j as i32 - 2;
            series += coeff * 3f64.powi(j as i32) * big_r.powi(-p) / p as f64;
        }
        let mu = model.mu(2.0, big_r).unwrap();
        assert!((mu - series).abs() < 1e-6 * series, "{mu} vs {series}");
    }

    #[test]
    fn mu_rejects_slow_decay() {
        let spec = PhaseSpec::new(5, 5.0 * std::f64::consts::PI / 3.0).unwrap();
        let a = crate::xiquant::epsilon_family(0.25).unwrap();
        let model = PsiModel::new(&spec, &a).unwrap();
        assert!(model.m() < 2.0);
        assert!(matches!(model.mu(2.0, 1.0), Err(Error::IntegralMayDiverge(_))));
    }

    #[test]
    fn decay_fit_closed_case() {
        let (spec, a) = closed_case();
        let sol = solve_psi_numeric(&spec, &a, 2.0, 1e4, 1e-10).unwrap();
        let fit = decay_fit(&sol).unwrap();
        assert!((fit.m_est - 3.0).abs() < 0.02 * 3.0);
        // C = (β² − 1)/2 for the exact solution.
        assert!((fit.c_est - 1.5).abs() < 0.05 * 1.5);
        let model = PsiModel::new(&spec, &a).unwrap();
        assert!((model.leading_constant(2.0) - 1.5).abs() < 1e-12);
        let flat = solve_psi_numeric(&spec, &a, 1.0, 1e4, 1e-10).unwrap();
        assert!(matches!(decay_fit(&flat), Err(Error::NoDecay(_))));
        let short = solve_psi_numeric(&spec, &a, 2.0, 50.0, 1e-10).unwrap();
        assert!(decay_fit(&short).is_err());
    }

    #[test]
    fn beta_range() {
        let (spec, a) = closed_case();
        let model = PsiModel::new(&spec, &a).unwrap();
        assert!(model.implicit_excess(0.5, 2.0).is_err());
        assert!(model.implicit_excess(2e6, 2.0).is_err());
        assert!(model.implicit_excess(2.0, 0.5).is_err());
    }
}
