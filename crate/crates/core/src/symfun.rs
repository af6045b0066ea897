//! Elementary and generalized symmetric polynomials.
//!
//! Every kernel is generic over a [`Scalar`], so the same code runs on `f64`
//! for the numeric pipelines and on [`Rational`] for the exact identity
//! suites. Elementary symmetric polynomials are evaluated by expanding
//! `Π(1 + t·a_i)` one factor at a time; nothing here enumerates subsets.
//!
//! Conventions: `σ_{-1} ≡ 0`, `σ_0 ≡ 1`, `σ_k ≡ 0` for `k > n`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{Num, One, Zero};

use crate::error::{Error, Result};

/// Arbitrary precision rational used by the exact routines.
pub type Rational = BigRational;

/// Arithmetic needed by the symmetric-polynomial kernels.
pub trait Scalar: Num + Clone {}

impl<T: Num + Clone> Scalar for T {}

/// Up to two distinct 1-based indices removed before evaluating `σ_k`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionSet {
    indices: Vec<usize>,
}

impl ExclusionSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds the set, rejecting repeats, zero and more than two entries.
    /// Range against a concrete vector is checked at evaluation time.
    pub fn new(indices: &[usize]) -> Result<Self> {
        if indices.len() > 2 {
            return Err(Error::ExclusionTooLarge(indices.len()));
        }
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateIndex(w[0]));
            }
        }
        if let Some(&i) = sorted.first() {
            if i == 0 {
                return Err(Error::IndexOutOfRange { index: 0, len: 0 });
            }
        }
        Ok(Self { indices: sorted })
    }

    pub fn single(i: usize) -> Result<Self> {
        Self::new(&[i])
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    fn check(&self, len: usize) -> Result<()> {
        match self.indices.iter().find(|&&i| i == 0 || i > len) {
            Some(&index) => Err(Error::IndexOutOfRange { index, len }),
            None => Ok(()),
        }
    }

    fn contains(&self, zero_based: usize) -> bool {
        self.indices.contains(&(zero_based + 1))
    }
}

/// All elementary symmetric polynomials `σ_0(a), …, σ_n(a)`.
pub fn elem_sym_all<T: Scalar>(a: &[T]) -> Vec<T> {
    let mut e = vec![T::zero(); a.len() + 1];
    e[0] = T::one();
    for (i, ai) in a.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            let add = ai.clone() * e[k - 1].clone();
            e[k] = e[k].clone() + add;
        }
    }
    e
}

fn pick<T: Scalar>(all: &[T], k: i64) -> T {
    if k < 0 || k as usize >= all.len() {
        T::zero()
    } else {
        all[k as usize].clone()
    }
}

/// `σ_k(a)` with the usual conventions for `k < 0` and `k > n`.
pub fn elem_sym<T: Scalar>(a: &[T], k: i64) -> T {
    if k < 0 || k as usize > a.len() {
        return T::zero();
    }
    pick(&elem_sym_all(a), k)
}

/// All `σ_k` of `a` with the entries in `excl` removed.
pub fn elem_sym_excl_all<T: Scalar>(a: &[T], excl: &ExclusionSet) -> Result<Vec<T>> {
    excl.check(a.len())?;
    let kept: Vec<T> = a
        .iter()
        .enumerate()
        .filter(|(i, _)| !excl.contains(*i))
        .map(|(_, v)| v.clone())
        .collect();
    Ok(elem_sym_all(&kept))
}

/// `σ_{k;i}(a)` or `σ_{k;i,j}(a)`: `σ_k` with the excluded entries removed.
pub fn elem_sym_excl<T: Scalar>(a: &[T], k: i64, excl: &ExclusionSet) -> Result<T> {
    Ok(pick(&elem_sym_excl_all(a, excl)?, k))
}

/// `σ_{k;i}(a)` for every `i`, as `out[i][k]` with `k = 0..n-1`.
pub(crate) fn elem_sym_leave_one_out<T: Scalar>(a: &[T]) -> Vec<Vec<T>> {
    (0..a.len())
        .map(|i| {
            let kept: Vec<T> = a
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, v)| v.clone())
                .collect();
            elem_sym_all(&kept)
        })
        .collect()
}

/// Table of generalized symmetric polynomials: `table[k][j] = S_k^j(a)`.
///
/// `S_k^j` sums, over every set of `k` distinct indices and every `j`-subset
/// of it, the product with the `j`-subset squared. This reading is the one
/// consistent with the term count `S_k^j(𝟙) = C(n,k)·C(k,j)`; `S_k^0 = σ_k`.
/// The table comes from expanding `Π(1 + x·a_i + y·a_i²)`.
pub fn gen_sym_table<T: Scalar>(a: &[T]) -> Vec<Vec<T>> {
    let n = a.len();
    // g[l][j]: l linear factors, j squared factors.
    let mut g = vec![vec![T::zero(); n + 1]; n + 1];
    g[0][0] = T::one();
    for (i, ai) in a.iter().enumerate() {
        let sq = ai.clone() * ai.clone();
        for total in (1..=i + 1).rev() {
            for j in 0..=total {
                let l = total - j;
                let mut v = g[l][j].clone();
                if l > 0 {
                    v = v + ai.clone() * g[l - 1][j].clone();
                }
                if j > 0 {
                    v = v + sq.clone() * g[l][j - 1].clone();
                }
                g[l][j] = v;
            }
        }
    }
    (0..=n)
        .map(|k| (0..=k).map(|j| g[k - j][j].clone()).collect())
        .collect()
}

/// `S_k^j(a)` for `0 ≤ j ≤ k ≤ n`.
pub fn gen_sym<T: Scalar>(a: &[T], k: usize, j: usize) -> Result<T> {
    if j > k || k > a.len() {
        return Err(Error::InvalidOrder(format!(
            "S_k^j needs 0 <= j <= k <= n, got k={k}, j={j}, n={}",
            a.len()
        )));
    }
    Ok(gen_sym_table(a)[k][j].clone())
}

/// `σ_k` of the eigenvalues of `diag(p) + s·q·qᵀ`, by the closed rank-one
/// update `σ_k(p) + s·Σ σ_{k-1;i}(p)·q_i²`.
pub fn sigma_rank_one<T: Scalar>(p: &[T], q: &[T], s: T, k: usize) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch { left: p.len(), right: q.len() });
    }
    if k == 0 || k > p.len() {
        return Err(Error::InvalidOrder(format!("k must lie in 1..={}, got {k}", p.len())));
    }
    Ok(sigma_rank_one_all(p, q, s)[k].clone())
}

/// All `σ_0, …, σ_n` of `diag(p) + s·q·qᵀ` (`σ_0 = 1`).
pub fn sigma_rank_one_all<T: Scalar>(p: &[T], q: &[T], s: T) -> Vec<T> {
    let base = elem_sym_all(p);
    let loo = elem_sym_leave_one_out(p);
    let n = p.len();
    let mut out = base.clone();
    for k in 1..=n {
        let mut acc = T::zero();
        for i in 0..n {
            acc = acc + loo[i][k - 1].clone() * q[i].clone() * q[i].clone();
        }
        out[k] = base[k].clone() + s.clone() * acc;
    }
    out
}

/// `Σ_{q=0}^{Q} (-1)^q (2q+1) C(2Q+1, Q-q)`, which is 1 at `Q = 0` and 0 after.
pub fn qio_sum(big_q: i64) -> Result<BigInt> {
    if big_q < 0 {
        return Err(Error::Negative(big_q));
    }
    let top = BigUint::from((2 * big_q + 1) as u64);
    let mut acc = BigInt::zero();
    for q in 0..=big_q {
        let c = BigInt::from(num_integer::binomial(top.clone(), BigUint::from((big_q - q) as u64)));
        let term = BigInt::from(2 * q + 1) * c;
        if q % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    Ok(acc)
}

/// Index of a generalized symmetric polynomial `S_order^squares`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GenSymIndex {
    pub order: usize,
    pub squares: usize,
}

/// One `coefficient · S_order^squares` term of a product decomposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompTerm {
    pub coeff: BigUint,
    pub index: GenSymIndex,
}

/// Which of the two decomposition formulas is used for `σ_j·σ_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductRegime {
    /// `j + k ≤ n`
    Low,
    /// `j + k ≥ n`
    High,
}

fn binom(n: usize, k: usize) -> BigUint {
    if k > n {
        BigUint::zero()
    } else {
        num_integer::binomial(BigUint::from(n), BigUint::from(k))
    }
}

/// Terms of `σ_j·σ_k` in the requested regime.
pub fn sigma_product_terms(
    j: usize,
    k: usize,
    n: usize,
    regime: ProductRegime,
) -> Result<Vec<DecompTerm>> {
    if j > k || k > n {
        return Err(Error::InvalidOrder(format!("need 0 <= j <= k <= n, got j={j}, k={k}, n={n}")));
    }
    let terms = match regime {
        ProductRegime::Low => {
            if j + k > n {
                return Err(Error::InvalidOrder(format!("j + k = {} exceeds n = {n}", j + k)));
            }
            (0..=j)
                .map(|h| DecompTerm {
                    coeff: binom(j + k - 2 * h, j - h),
                    index: GenSymIndex { order: j + k - h, squares: h },
                })
                .collect()
        }
        ProductRegime::High => {
            if j + k < n {
                return Err(Error::InvalidOrder(format!("j + k = {} is below n = {n}", j + k)));
            }
            (0..=n - k)
                .map(|h| DecompTerm {
                    coeff: binom(2 * n - j - k - 2 * h, n - j - h),
                    index: GenSymIndex { order: n - h, squares: j + k - n + h },
                })
                .collect()
        }
    };
    Ok(terms)
}

/// Decomposition of `σ_j(a)·σ_k(a)` into generalized symmetric polynomials,
/// choosing the `j + k ≤ n` formula whenever it applies.
pub fn sigma_product_decompose(j: usize, k: usize, n: usize) -> Result<Vec<DecompTerm>> {
    let regime = if j + k <= n { ProductRegime::Low } else { ProductRegime::High };
    sigma_product_terms(j, k, n, regime)
}

/// Evaluates `Σ coeff · S_order^squares(a)` exactly.
pub fn recombine(terms: &[DecompTerm], a: &[Rational]) -> Rational {
    recombine_with_table(terms, &gen_sym_table(a))
}

/// As [`recombine`], reusing a precomputed [`gen_sym_table`].
pub fn recombine_with_table(terms: &[DecompTerm], table: &[Vec<Rational>]) -> Rational {
    terms.iter().fold(Rational::zero(), |acc, t| {
        let c = Rational::from_integer(BigInt::from(t.coeff.clone()));
        acc + c * table[t.index.order][t.index.squares].clone()
    })
}

/// Margins `σ_k² − σ_{k-1}σ_{k+1}` for the interior orders `1 ≤ k ≤ n-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub margins: Vec<(usize, f64)>,
    pub pass: bool,
}

impl NewtonReport {
    pub fn margin(&self, k: usize) -> Option<f64> {
        self.margins.iter().find(|(kk, _)| *kk == k).map(|(_, m)| *m)
    }
}

pub fn newton_check(a: &[f64]) -> NewtonReport {
    let s = elem_sym_all(a);
    let n = a.len();
    let margins: Vec<(usize, f64)> = (1..n)
        .map(|k| (k, s[k] * s[k] - s[k - 1] * s[k + 1]))
        .collect();
    let pass = margins.iter().all(|(_, m)| *m >= 0.0);
    NewtonReport { margins, pass }
}

/// Converts integer numerators/denominators to rationals.
pub fn rationals(pairs: &[(i64, i64)]) -> Vec<Rational> {
    pairs
        .iter()
        .map(|&(p, q)| Rational::new(BigInt::from(p), BigInt::from(q)))
        .collect()
}

/// `Rational` vector of ones.
pub fn rational_ones(n: usize) -> Vec<Rational> {
    vec![Rational::one(); n]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subsets_sigma(a: &[i64], k: usize) -> i64 {
        let n = a.len();
        (0u32..(1 << n))
            .filter(|m| m.count_ones() as usize == k)
            .map(|m| (0..n).filter(|i| m & (1 << i) != 0).map(|i| a[i]).product::<i64>())
            .sum()
    }

    #[test]
    fn elem_sym_examples() {
        assert_eq!(elem_sym(&[1.0; 5], 3), 10.0);
        assert_eq!(elem_sym(&[3.5, -2.0], 0), 1.0);
        assert_eq!(elem_sym(&[1.0, 2.0, 3.0], 2), 11.0);
        assert_eq!(subsets_sigma(&[1, 2, 3], 2), 11);
        assert_eq!(elem_sym(&[1.0, 2.0], -1), 0.0);
        assert_eq!(elem_sym(&[1.0, 2.0], 3), 0.0);
    }

    #[test]
    fn exclusion_examples() {
        let a = [1.0, 2.0, 3.0];
        let ex = ExclusionSet::single(2).unwrap();
        assert_eq!(elem_sym_excl(&a, 1, &ex).unwrap(), 4.0);
        let ex = ExclusionSet::single(1).unwrap();
        assert_eq!(elem_sym_excl(&[1.0; 5], 2, &ex).unwrap(), 6.0);
        assert_eq!(elem_sym_excl(&a, 2, &ExclusionSet::empty()).unwrap(), 11.0);
        let two = ExclusionSet::new(&[1, 3]).unwrap();
        assert_eq!(elem_sym_excl(&a, 1, &two).unwrap(), 2.0);
    }

    #[test]
    fn exclusion_errors() {
        let ex = ExclusionSet::single(4).unwrap();
        assert_eq!(
            elem_sym_excl(&[1.0, 2.0, 3.0], 1, &ex),
            Err(Error::IndexOutOfRange { index: 4, len: 3 })
        );
        assert!(ExclusionSet::new(&[2, 2]).is_err());
        assert!(ExclusionSet::new(&[1, 2, 3]).is_err());
        assert!(ExclusionSet::new(&[0]).is_err());
    }

    #[test]
    fn degenerate_single_entry() {
        let ex = ExclusionSet::single(1).unwrap();
        assert_eq!(elem_sym_excl(&[5.0], 0, &ex).unwrap(), 1.0);
        assert_eq!(elem_sym_excl(&[5.0], 1, &ex).unwrap(), 0.0);
        assert!(newton_check(&[5.0]).pass);
        assert!(newton_check(&[5.0]).margins.is_empty());
    }

    #[test]
    fn gen_sym_examples() {
        assert_eq!(gen_sym(&[1.0; 4], 2, 1).unwrap(), 12.0);
        assert_eq!(gen_sym(&[1.0, 2.0], 2, 1).unwrap(), 6.0);
        let a = [1.5, -2.0, 0.25, 4.0];
        for k in 0..=4 {
            assert_eq!(gen_sym(&a, k, 0).unwrap(), elem_sym(&a, k as i64));
        }
        assert!(gen_sym(&a, 1, 2).is_err());
        assert!(gen_sym(&a, 5, 0).is_err());
    }

    #[test]
    fn rank_one_examples() {
        let p = [1.0, 1.0];
        let q = [1.0, 0.0];
        assert_eq!(sigma_rank_one(&p, &q, 2.0, 1).unwrap(), 4.0);
        // diag(3, 1): determinant 3
        assert_eq!(sigma_rank_one(&p, &q, 2.0, 2).unwrap(), 3.0);
        let p = [0.5, 2.0, 3.0];
        for k in 1..=3 {
            assert_eq!(sigma_rank_one(&p, &[1.0, -1.0, 2.0], 0.0, k).unwrap(), elem_sym(&p, k as i64));
        }
        assert!(matches!(
            sigma_rank_one(&p, &[1.0], 1.0, 1),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn qio_examples() {
        assert_eq!(qio_sum(0).unwrap(), BigInt::from(1));
        assert_eq!(qio_sum(1).unwrap(), BigInt::from(0));
        // direct summation at Q = 5: 462 - 3·330 + 5·165 - 7·55 + 9·11 - 11·1
        let direct: i64 = 462 - 3 * 330 + 5 * 165 - 7 * 55 + 9 * 11 - 11;
        assert_eq!(direct, 0);
        assert_eq!(qio_sum(5).unwrap(), BigInt::from(direct));
        assert_eq!(qio_sum(-1), Err(Error::Negative(-1)));
    }

    #[test]
    fn product_decomposition_examples() {
        let t = sigma_product_decompose(1, 1, 4).unwrap();
        let flat: Vec<(u32, usize, usize)> = t
            .iter()
            .map(|d| (d.coeff.to_u32_digits().first().copied().unwrap_or(0), d.index.order, d.index.squares))
            .collect();
        assert_eq!(flat, vec![(2, 2, 0), (1, 1, 1)]);

        let t = sigma_product_decompose(0, 3, 5).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].coeff, BigUint::from(1u32));
        assert_eq!(t[0].index, GenSymIndex { order: 3, squares: 0 });

        let t = sigma_product_decompose(2, 2, 3).unwrap();
        let flat: Vec<(u32, usize, usize)> = t
            .iter()
            .map(|d| (d.coeff.to_u32_digits().first().copied().unwrap_or(0), d.index.order, d.index.squares))
            .collect();
        assert_eq!(flat, vec![(2, 3, 1), (1, 2, 2)]);
        assert!(sigma_product_decompose(3, 2, 5).is_err());
        assert!(sigma_product_terms(1, 1, 4, ProductRegime::High).is_err());
    }

    #[test]
    fn regimes_agree_on_the_boundary() {
        for n in 0..=9 {
            for j in 0..=n / 2 {
                let k = n - j;
                let lo = sigma_product_terms(j, k, n, ProductRegime::Low).unwrap();
                let hi = sigma_product_terms(j, k, n, ProductRegime::High).unwrap();
                assert_eq!(lo, hi, "n={n} j={j}");
            }
        }
    }

    #[test]
    fn newton_examples() {
        let r = newton_check(&[1.0, 2.0, 3.0]);
        assert!(r.pass);
        assert_eq!(r.margin(2), Some(85.0));
        assert!(newton_check(&[1.0; 6]).pass);
    }
}
