//! Generalized radially symmetric functions
//!
//! ```text
//! Φ(x) = φ(r_A(x)),   φ(r) = α + ∫_γ^r τ ψ(τ, β) dτ,   r_A(x) = √(xᵀAx),
//! ```
//!
//! with `A = diag(a)`, `a ∈ L_Θ ∩ Γ⁺` and `m(Θ, a) > 2`. The Hessian is a
//! diagonal matrix plus a rank-one term, so its `σ_k` follow from the
//! rank-one update formula; `H` of the spectrum comes from a dense symmetric
//! eigen-decomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::odepsi::{PsiModel, BETA_MAX};
use crate::phasepoly::{coeffs_c, phase_h, PhaseSpec};
use crate::symfun::{elem_sym_all, sigma_rank_one, sigma_rank_one_all};
use crate::xiquant::{xi_ratio, EigenVector};

/// Default success threshold for both grid minima.
pub const VERIFY_TOL: f64 = 1e-9;

/// `r_A(x) = √(xᵀAx)` for symmetric positive definite `A`.
pub fn r_ellipse(a: &DMatrix<f64>, x: &[f64]) -> Result<f64> {
    if !a.is_square() || a.nrows() != x.len() {
        return Err(Error::LengthMismatch { left: a.nrows(), right: x.len() });
    }
    if !is_symmetric(a) {
        return Err(Error::NotSymmetric);
    }
    if a.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let xv = DVector::from_column_slice(x);
    Ok(xv.dot(&(a * &xv)).max(0.0).sqrt())
}

fn is_symmetric(a: &DMatrix<f64>) -> bool {
    let scale = a.amax().max(f64::MIN_POSITIVE);
    (0..a.nrows()).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= 1e-14 * scale))
}

fn r_diag(diag: &[f64], x: &[f64]) -> f64 {
    diag.iter().zip(x).map(|(a, x)| a * x * x).sum::<f64>().sqrt()
}

/// Parameters of `Φ_{α,β,γ,A}` for diagonal `A`.
#[derive(Debug, Clone)]
pub struct SubsolutionSpec {
    alpha: f64,
    beta: f64,
    gamma: f64,
    /// Diagonal of `A` in coordinate order.
    diag: Vec<f64>,
    model: PsiModel,
}

impl SubsolutionSpec {
    /// Validates `β ∈ [1, 10⁶]`, `γ ≥ 1`, `H(a) = Θ` and `m(Θ, a) > 2`.
    pub fn new(alpha: f64, beta: f64, gamma: f64, diag: &[f64], phase: &PhaseSpec) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::OutOfRange(format!("alpha = {alpha}")));
        }
        if !(1.0..=BETA_MAX).contains(&beta) {
            return Err(Error::OutOfRange(format!("beta = {beta} outside [1, {BETA_MAX}]")));
        }
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return Err(Error::OutOfRange(format!("gamma = {gamma} must be at least 1")));
        }
        let sorted = EigenVector::new(diag.to_vec())?;
        let model = PsiModel::new(phase, &sorted)?;
        if !(model.m() > 2.0) {
            return Err(Error::Inadmissible(format!("m = {} does not exceed 2", model.m())));
        }
        Ok(Self { alpha, beta, gamma, diag: diag.to_vec(), model })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn phase(&self) -> &PhaseSpec {
        self.model.spec()
    }

    pub fn model(&self) -> &PsiModel {
        &self.model
    }

    pub fn m(&self) -> f64 {
        self.model.m()
    }

    /// `r_A(x)`.
    pub fn radius(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n() {
            return Err(Error::LengthMismatch { left: x.len(), right: self.n() });
        }
        Ok(r_diag(&self.diag, x))
    }

    /// `(ψ(r), ψ'(r))` on the implicit route.
    pub fn psi_pair(&self, r: f64) -> Result<(f64, f64)> {
        let u = self.model.implicit_excess(self.beta, r)?;
        let psi = if r == 1.0 { self.beta } else { 1.0 + u };
        Ok((psi, self.model.g_excess(u) / r))
    }

    /// `μ_γ(β) + α − γ²/2`, the limit of `Φ(x) − ½xᵀAx`.
    pub fn asymptotic_constant(&self) -> Result<f64> {
        Ok(self.model.mu(self.beta, self.gamma)? + self.alpha - 0.5 * self.gamma * self.gamma)
    }

    fn outside(&self, x: &[f64]) -> Result<f64> {
        let r = self.radius(x)?;
        if !(r > self.gamma) {
            return Err(Error::InsideEllipsoid { r, gamma: self.gamma });
        }
        Ok(r)
    }
}

/// `φ(r) = α + (r² − γ²)/2 + ∫_γ^r τ(ψ − 1) dτ`.
pub fn phi_eval(spec: &SubsolutionSpec, r: f64) -> Result<f64> {
    if !(r >= spec.gamma) {
        return Err(Error::OutOfRange(format!("r = {r} below gamma = {}", spec.gamma)));
    }
    let base = spec.alpha + 0.5 * (r * r - spec.gamma * spec.gamma);
    if spec.beta == 1.0 || r == spec.gamma {
        return Ok(base);
    }
    Ok(base + spec.model.excess_moment(spec.beta, spec.gamma, r)?)
}

/// `Φ(x) − ½xᵀAx − (μ_γ(β) + α − γ²/2) = −μ_r(β)`, computed without the
/// cancellation of the left side.
pub fn phi_residual(spec: &SubsolutionSpec, r: f64) -> Result<f64> {
    if !(r >= spec.gamma) {
        return Err(Error::OutOfRange(format!("r = {r} below gamma = {}", spec.gamma)));
    }
    Ok(-spec.model.mu(spec.beta, r)?)
}

/// `Φ(x)` for `r_A(x) ≥ γ`.
pub fn phi_at(spec: &SubsolutionSpec, x: &[f64]) -> Result<f64> {
    phi_eval(spec, spec.radius(x)?)
}

/// `D²Φ(x) = ψ diag(a) + (ψ'/r)(a∘x)(a∘x)ᵀ`.
pub fn hessian_phi(spec: &SubsolutionSpec, x: &[f64]) -> Result<DMatrix<f64>> {
    let r = spec.outside(x)?;
    let (psi, dpsi) = spec.psi_pair(r)?;
    let s = dpsi / r;
    let q: Vec<f64> = spec.diag.iter().zip(x).map(|(a, x)| a * x).collect();
    let n = spec.n();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { psi * spec.diag[i] } else { 0.0 };
        d + s * q[i] * q[j]
    }))
}

fn rank_one_parts(spec: &SubsolutionSpec, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64, f64, f64)> {
    let r = spec.outside(x)?;
    let (psi, dpsi) = spec.psi_pair(r)?;
    let p: Vec<f64> = spec.diag.iter().map(|a| psi * a).collect();
    let q: Vec<f64> = spec.diag.iter().zip(x).map(|(a, x)| a * x).collect();
    Ok((p, q, dpsi / r, psi, dpsi))
}

/// `σ_k(λ(D²Φ(x)))` through the rank-one update formula.
pub fn sigma_hessian(spec: &SubsolutionSpec, x: &[f64], k: usize) -> Result<f64> {
    let (p, q, s, _, _) = rank_one_parts(spec, x)?;
    sigma_rank_one(&p, &q, s, k)
}

/// `σ_k(a)ψ^k + Ξ_k(a, x)σ_k(a) r ψ^{k−1}ψ'`.
pub fn sigma_hessian_xi_form(spec: &SubsolutionSpec, x: &[f64], k: usize) -> Result<f64> {
    let r = spec.outside(x)?;
    if k == 0 || k > spec.n() {
        return Err(Error::InvalidOrder(format!("k = {k} outside 1..={}", spec.n())));
    }
    let (psi, dpsi) = spec.psi_pair(r)?;
    let sk = elem_sym_all(&spec.diag)[k];
    let xi = xi_ratio(&spec.diag, x, k)?;
    Ok(sk * psi.powi(k as i32) + xi * sk * r * psi.powi(k as i32 - 1) * dpsi)
}

/// Pointwise values used by the verifier.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCheck {
    pub r: f64,
    pub h_minus_theta: f64,
    pub z: f64,
    pub eigenvalues: Vec<f64>,
}

/// `H(λ(D²Φ)) − Θ` and `Z(λ(D²Φ))` at `x`.
pub fn check_point(spec: &SubsolutionSpec, x: &[f64]) -> Result<PointCheck> {
    let hess = hessian_phi(spec, x)?;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(hess).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let (p, q, s, _, _) = rank_one_parts(spec, x)?;
    let sig = sigma_rank_one_all(&p, &q, s);
    let z = coeffs_c(spec.phase()).iter().zip(&sig).map(|(c, s)| c * s).sum();
    Ok(PointCheck {
        r: r_diag(&spec.diag, x),
        h_minus_theta: phase_h(&eigenvalues) - spec.phase().theta(),
        z,
        eigenvalues,
    })
}

/// Verification grid: log-spaced shells `γ < r ≤ r_max` crossed with the
/// `2n` axis directions and a Halton-sequence direction set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub shells: usize,
    pub r_max: f64,
    pub quasi_random_dirs: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { shells: 50, r_max: 50.0, quasi_random_dirs: 200 }
    }
}

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// Unit directions: `±e_i`, then Box–Muller images of Halton points.
pub fn directions(n: usize, quasi_random: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * n + quasi_random);
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[i] = sign;
            out.push(d);
        }
    }
    let pairs = n.div_ceil(2);
    assert!(2 * pairs <= PRIMES.len(), "dimension {n} too large for the Halton basis");
    for idx in 1..=quasi_random as u64 {
        let mut d = Vec::with_capacity(2 * pairs);
        for p in 0..pairs {
            // Shift off zero so the logarithm stays finite.
            let u1 = radical_inverse(idx, PRIMES[2 * p]).max(1e-300);
            let u2 = radical_inverse(idx, PRIMES[2 * p + 1]);
            let rad = (-2.0 * u1.ln()).sqrt();
            let ang = std::f64::consts::TAU * u2;
            d.push(rad * ang.cos());
            d.push(rad * ang.sin());
        }
        d.truncate(n);
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.push(d.into_iter().map(|v| v / norm).collect());
        }
    }
    out
}

/// Grid points `x = r·d/r_A(d)`.
pub fn grid_points(spec: &SubsolutionSpec, grid: &GridSpec) -> Result<Vec<Vec<f64>>> {
    if grid.shells == 0 || !(grid.r_max > spec.gamma) {
        return Err(Error::OutOfRange(format!(
            "grid needs at least one shell and r_max > gamma = {}",
            spec.gamma
        )));
    }
    let dirs = directions(spec.n(), grid.quasi_random_dirs);
    let ratio = grid.r_max / spec.gamma;
    let mut points = Vec::with_capacity(grid.shells * dirs.len());
    for i in 1..=grid.shells {
        let r = if i == grid.shells {
            grid.r_max
        } else {
            spec.gamma * ratio.powf(i as f64 / grid.shells as f64)
        };
        for d in &dirs {
            let scale = r / r_diag(&spec.diag, d);
            points.push(d.iter().map(|v| v * scale).collect());
        }
    }
    Ok(points)
}

/// Grid minima of `H(λ(D²Φ)) − Θ` and `Z(λ(D²Φ))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub points: usize,
    pub min_h_minus_theta: f64,
    pub min_z: f64,
    pub worst_h_point: Vec<f64>,
    pub worst_z_point: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Evaluates the subsolution inequalities on `grid`.
///
/// Points are processed in parallel; the minima are reduced with the point
/// index as tie-breaker, so the report does not depend on scheduling.
pub fn verify_subsolution(spec: &SubsolutionSpec, grid: &GridSpec) -> Result<VerificationReport> {
    verify_points(spec, &grid_points(spec, grid)?)
}

/// As [`verify_subsolution`] on explicit points.
pub fn verify_points(spec: &SubsolutionSpec, points: &[Vec<f64>]) -> Result<VerificationReport> {
    if points.is_empty() {
        return Err(Error::OutOfRange("empty verification grid".into()));
    }
    let checks = points
        .par_iter()
        .map(|x| check_point(spec, x).map(|c| (c.h_minus_theta, c.z)))
        .collect::<Result<Vec<_>>>()?;
    let argmin = |f: fn(&(f64, f64)) -> f64| {
        checks
            .iter()
            .enumerate()
            .min_by(|a, b| f(a.1).total_cmp(&f(b.1)).then(a.0.cmp(&b.0)))
            .map(|(i, c)| (i, f(c)))
            .expect("non-empty")
    };
    let (ih, min_h) = argmin(|c| c.0);
    let (iz, min_z) = argmin(|c| c.1);
    Ok(VerificationReport {
        points: points.len(),
        min_h_minus_theta: min_h,
        min_z,
        worst_h_point: points[ih].clone(),
        worst_z_point: points[iz].clone(),
        tolerance: VERIFY_TOL,
        passed: min_h >= -VERIFY_TOL && min_z >= -VERIFY_TOL,
    })
}

/// `A = QᵀΛQ` with `Λ` ascending; `x̃ = Qx`, and linear boundary data `bᵀx`
/// becomes `b̃ᵀx̃` with `b̃ = Qb`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub lambda: Vec<f64>,
    pub q: DMatrix<f64>,
    pub b_tilde: Vec<f64>,
}

impl Normalization {
    /// `x ↦ Qx`.
    pub fn to_normalized(&self, x: &[f64]) -> Vec<f64> {
        (&self.q * DVector::from_column_slice(x)).iter().copied().collect()
    }

    /// `QᵀΛQ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.q.transpose() * DMatrix::from_diagonal(&DVector::from_column_slice(&self.lambda)) * &self.q
    }
}

/// Spectral normalization of a symmetric `A`.
///
/// Diagonal input is only permuted (stably), so an ascending diagonal gives
/// `Q = I`. Otherwise each row of `Q` is a unit eigenvector whose entry of
/// largest magnitude is positive.
pub fn normalize_problem(a: &DMatrix<f64>, b: &[f64]) -> Result<Normalization> {
    if !a.is_square() || a.nrows() != b.len() {
        return Err(Error::LengthMismatch { left: a.nrows(), right: b.len() });
    }
    if !is_symmetric(a) {
        return Err(Error::NotSymmetric);
    }
    let n = a.nrows();
    let is_diag = (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] == 0.0));
    let (lambda, q) = if is_diag {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
        let lambda = order.iter().map(|&i| a[(i, i)]).collect();
        let q = DMatrix::from_fn(n, n, |row, col| if order[row] == col { 1.0 } else { 0.0 });
        (lambda, q)
    } else {
        let eig = SymmetricEigen::new(a.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let lambda = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut q = DMatrix::zeros(n, n);
        for (row, &i) in order.iter().enumerate() {
            let v = eig.eigenvectors.column(i);
            let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for col in 0..n {
                q[(row, col)] = sign * v[col];
            }
        }
        (lambda, q)
    };
    let b_tilde = (&q * DVector::from_column_slice(b)).iter().copied().collect();
    Ok(Normalization { lambda, q, b_tilde })
}
