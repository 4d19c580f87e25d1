//! Pfaffians and bordered Pfaffian coefficients of a skew moment pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

const SKEW_TOLERANCE: f64 = 1e-10;
pub const COMBINATORIAL_MAX_DIM: usize = 8;

/// Skew moment matrix A and border vector a over absolute indices
/// `base .. base + size`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkewPair {
    matrix: CMatrix,
    border: Vec<C64>,
    base: i64,
    /// L the table was built for.
    pub offset_hint: i64,
    /// Ensemble tag plus parameter digest.
    pub provenance: String,
    raw_skew_defect: f64,
}

impl SkewPair {
    /// Builds a pair from raw moments, replacing A by (A − Aᵀ)/2.
    pub fn from_raw(raw: CMatrix, border: Vec<C64>, base: i64, offset_hint: i64, provenance: impl Into<String>) -> Result<Self> {
        if !raw.is_square() {
            return Err(Error::NotSquare { rows: raw.rows(), cols: raw.cols() });
        }
        if raw.rows() != border.len() {
            return Err(Error::Invalid(format!("moment matrix is {} but border has {}", raw.rows(), border.len())));
        }
        let raw_skew_defect = raw.skew_defect();
        let matrix = CMatrix::from_fn(raw.rows(), raw.cols(), |i, j| (raw[(i, j)] - raw[(j, i)]) * 0.5);
        Ok(Self { matrix, border, base, offset_hint, provenance: provenance.into(), raw_skew_defect })
    }

    pub fn size(&self) -> usize {
        self.border.len()
    }

    pub fn base(&self) -> i64 {
        self.base
    }

    /// One past the last covered index.
    pub fn end(&self) -> i64 {
        self.base + self.size() as i64
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn border(&self) -> &[C64] {
        &self.border
    }

    /// Relative |A + Aᵀ| of the moments before skew-symmetrization.
    pub fn raw_skew_defect(&self) -> f64 {
        self.raw_skew_defect
    }

    fn slot(&self, index: i64) -> Result<usize> {
        if index < self.base || index >= self.end() {
            return Err(Error::IndexOutOfRange { index, base: self.base, end: self.end() });
        }
        Ok((index - self.base) as usize)
    }

    pub fn entry(&self, n: i64, m: i64) -> Result<C64> {
        Ok(self.matrix[(self.slot(n)?, self.slot(m)?)])
    }

    pub fn border_entry(&self, n: i64) -> Result<C64> {
        Ok(self.border[self.slot(n)?])
    }

    pub fn with_border(mut self, border: Vec<C64>) -> Result<Self> {
        if border.len() != self.size() {
            return Err(Error::Invalid("border length must match the table".into()));
        }
        self.border = border;
        Ok(self)
    }

    /// Scales A by `a_scale` and the border by `b_scale`.
    pub fn scaled(&self, a_scale: f64, b_scale: f64) -> Self {
        let mut out = self.clone();
        out.matrix = self.matrix.map(|x| x * a_scale);
        out.border = self.border.iter().map(|x| x * b_scale).collect();
        out
    }

    /// Entrywise sum of two pairs over the same index range.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.base != other.base || self.size() != other.size() {
            return Err(Error::Invalid("cannot add moment pairs over different index ranges".into()));
        }
        let mut out = self.clone();
        out.matrix = CMatrix::from_fn(self.size(), self.size(), |i, j| self.matrix[(i, j)] + other.matrix[(i, j)]);
        out.border = self.border.iter().zip(&other.border).map(|(a, b)| a + b).collect();
        out.raw_skew_defect = self.raw_skew_defect.max(other.raw_skew_defect);
        out.provenance = format!("{}+{}", self.provenance, other.provenance);
        Ok(out)
    }

    /// First `size` indices of the table.
    pub fn leading(&self, size: usize) -> Result<Self> {
        if size > self.size() {
            return Err(Error::IndexOutOfRange { index: self.base + size as i64 - 1, base: self.base, end: self.end() });
        }
        let mut out = self.clone();
        out.matrix = CMatrix::from_fn(size, size, |i, j| self.matrix[(i, j)]);
        out.border.truncate(size);
        Ok(out)
    }

    /// Moments of the weight multiplied by (1 − λ/y), re-indexed one step up:
    /// A'ₙₘ = Aₙₘ − λAₙ₋₁,ₘ − λAₙ,ₘ₋₁ + λ²Aₙ₋₁,ₘ₋₁ and a'ₙ = aₙ − λaₙ₋₁.
    /// Covers `base + 1 .. end`.
    pub fn insert_point(&self, lambda: C64) -> Result<Self> {
        let m = self.size();
        if m < 2 {
            return Err(Error::Invalid("insertion needs at least two moments".into()));
        }
        let a = &self.matrix;
        let matrix = CMatrix::from_fn(m - 1, m - 1, |i, j| {
            let (n, k) = (i + 1, j + 1);
            a[(n, k)] - lambda * a[(n - 1, k)] - lambda * a[(n, k - 1)] + lambda * lambda * a[(n - 1, k - 1)]
        });
        let border = (1..m).map(|n| self.border[n] - lambda * self.border[n - 1]).collect();
        Ok(Self {
            matrix,
            border,
            base: self.base + 1,
            offset_hint: self.offset_hint + 1,
            provenance: format!("{}|insert({lambda})", self.provenance),
            raw_skew_defect: self.raw_skew_defect,
        })
    }
}

fn check_skew(m: &CMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    if m.rows() % 2 == 1 {
        return Err(Error::OddOrder(m.rows()));
    }
    let defect = m.skew_defect();
    if defect > SKEW_TOLERANCE {
        return Err(Error::NotSkew { defect });
    }
    Ok(())
}

/// Pfaffian by skew-symmetric Gaussian elimination with pivoting.
pub fn pfaffian(m: &CMatrix) -> Result<C64> {
    check_skew(m)?;
    Ok(pfaffian_unchecked(m.clone()))
}

pub(crate) fn pfaffian_unchecked(mut a: CMatrix) -> C64 {
    let n = a.rows();
    let mut pf = C64::new(1.0, 0.0);
    for k in (0..n.saturating_sub(1)).step_by(2) {
        let mut kp = k + 1;
        let mut best = a[(k + 1, k)].norm();
        for i in k + 2..n {
            let v = a[(i, k)].norm();
            if v > best {
                best = v;
                kp = i;
            }
        }
        if kp != k + 1 {
            a.swap_sym(k + 1, kp);
            pf = -pf;
        }
        let pivot = a[(k, k + 1)];
        if pivot == C64::new(0.0, 0.0) {
            return C64::new(0.0, 0.0);
        }
        pf *= pivot;
        if k + 2 < n {
            let tau: Vec<C64> = (k + 2..n).map(|j| a[(k, j)] / pivot).collect();
            let col: Vec<C64> = (k + 2..n).map(|i| a[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
    }
    pf
}

/// Signed sum over perfect matchings; dimension ≤ 8.
pub fn pfaffian_combinatorial(m: &CMatrix) -> Result<C64> {
    check_skew(m)?;
    if m.rows() > COMBINATORIAL_MAX_DIM {
        return Err(Error::DimensionTooLarge { dim: m.rows(), max: COMBINATORIAL_MAX_DIM });
    }
    let idx: Vec<usize> = (0..m.rows()).collect();
    Ok(matchings(m, &idx))
}

fn matchings(m: &CMatrix, idx: &[usize]) -> C64 {
    if idx.is_empty() {
        return C64::new(1.0, 0.0);
    }
    let first = idx[0];
    let mut total = C64::new(0.0, 0.0);
    for j in 1..idx.len() {
        let rest: Vec<usize> = idx[1..].iter().copied().filter(|&k| k != idx[j]).collect();
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * m[(first, idx[j])] * matchings(m, &rest);
    }
    total
}

/// Ā_h(L): Pfaffian of A restricted to hᵢ + L, bordered by a on the last
/// row/column when the length of `h` is odd. Empty `h` gives 1.
pub fn abar(h: &[i64], l: i64, pair: &SkewPair) -> Result<C64> {
    if h.windows(2).any(|w| w[0] <= w[1]) || h.last().is_some_and(|&x| x < 0) {
        return Err(Error::BadShiftedIndices(h.to_vec()));
    }
    let n = h.len();
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let slots = h.iter().map(|&hi| pair.slot(hi + l)).collect::<Result<Vec<_>>>()?;
    if n == 1 {
        return Ok(pair.border[slots[0]]);
    }
    if n == 2 {
        return Ok(pair.matrix[(slots[0], slots[1])]);
    }
    let dim = n + n % 2;
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = pair.matrix[(slots[i], slots[j])];
        }
    }
    if n % 2 == 1 {
        for i in 0..n {
            m[(i, n)] = pair.border[slots[i]];
            m[(n, i)] = -pair.border[slots[i]];
        }
    }
    Ok(pfaffian_unchecked(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_skew(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = -z;
            }
        }
        m
    }

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn two_by_two() {
        let m = CMatrix::from_rows(&[vec![c(0.0), c(2.5)], vec![c(-2.5), c(0.0)]]);
        assert_eq!(pfaffian(&m).unwrap(), c(2.5));
        assert_eq!(pfaffian_combinatorial(&m).unwrap(), c(2.5));
    }

    #[test]
    fn four_by_four_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_skew(&mut rng, 4);
        let want = m[(0, 1)] * m[(2, 3)] - m[(0, 2)] * m[(1, 3)] + m[(0, 3)] * m[(1, 2)];
        assert!((pfaffian(&m).unwrap() - want).norm() < 1e-14);
        assert!((pfaffian_combinatorial(&m).unwrap() - want).norm() < 1e-14);
    }

    #[test]
    fn elimination_matches_matchings() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 4, 6, 8] {
            for _ in 0..20 {
                let m = random_skew(&mut rng, n);
                let a = pfaffian(&m).unwrap();
                let b = pfaffian_combinatorial(&m).unwrap();
                assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0), "n={n}");
            }
        }
    }

    #[test]
    fn errors() {
        let odd = CMatrix::zeros(3, 3);
        assert_eq!(pfaffian(&odd), Err(Error::OddOrder(3)));
        let mut bad = CMatrix::zeros(2, 2);
        bad[(0, 1)] = c(1.0);
        bad[(1, 0)] = c(1.0);
        assert!(matches!(pfaffian(&bad), Err(Error::NotSkew { .. })));
        let big = CMatrix::zeros(10, 10);
        assert!(matches!(pfaffian_combinatorial(&big), Err(Error::DimensionTooLarge { .. })));
        assert_eq!(pfaffian(&CMatrix::zeros(0, 0)).unwrap(), c(1.0));
    }

    #[test]
    fn singular_returns_zero() {
        let z = CMatrix::zeros(4, 4);
        assert_eq!(pfaffian(&z).unwrap(), c(0.0));
    }

    #[test]
    fn permutation_flips_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_skew(&mut rng, 6);
        let base = pfaffian(&m).unwrap();
        let mut swapped = m.clone();
        swapped.swap_sym(1, 4);
        assert!((pfaffian(&swapped).unwrap() + base).norm() < 1e-12);
    }

    fn test_pair(n: usize, seed: u64) -> SkewPair {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = random_skew(&mut rng, n);
        let border = (0..n).map(|_| c(rng.random_range(-1.0..1.0))).collect();
        SkewPair::from_raw(raw, border, 0, 0, "test").unwrap()
    }

    #[test]
    fn abar_small_cases() {
        let pair = test_pair(8, 9);
        assert_eq!(abar(&[], 3, &pair).unwrap(), c(1.0));
        assert_eq!(abar(&[5, 2], 1, &pair).unwrap(), pair.entry(6, 3).unwrap());
        assert_eq!(abar(&[4], 2, &pair).unwrap(), pair.border_entry(6).unwrap());
        let h = [5, 3, 0];
        let m = CMatrix::from_fn(4, 4, |i, j| match (i, j) {
            (3, 3) => c(0.0),
            (i, 3) => pair.border_entry(h[i]).unwrap(),
            (3, j) => -pair.border_entry(h[j]).unwrap(),
            (i, j) => pair.entry(h[i], h[j]).unwrap(),
        });
        assert!((abar(&h, 0, &pair).unwrap() - pfaffian_combinatorial(&m).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn abar_odd_with_zero_border_vanishes() {
        let pair = test_pair(8, 1).with_border(vec![c(0.0); 8]).unwrap();
        assert_eq!(abar(&[6, 4, 1], 0, &pair).unwrap(), c(0.0));
    }

    #[test]
    fn abar_range_error_names_index() {
        let pair = test_pair(4, 2);
        assert_eq!(abar(&[3, 0], 2, &pair), Err(Error::IndexOutOfRange { index: 5, base: 0, end: 4 }));
        assert!(matches!(abar(&[1, 2], 0, &pair), Err(Error::BadShiftedIndices(_))));
    }

    #[test]
    fn raw_is_skew_symmetrized() {
        let raw = CMatrix::from_rows(&[vec![c(1.0), c(2.0)], vec![c(0.0), c(1.0)]]);
        let pair = SkewPair::from_raw(raw, vec![c(0.0); 2], 0, 0, "t").unwrap();
        assert_eq!(pair.entry(0, 1).unwrap(), c(1.0));
        assert_eq!(pair.entry(0, 0).unwrap(), c(0.0));
        assert!((pair.raw_skew_defect() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn insertion_matches_weight_product() {
        // single atom y with weight w: moments are w·yⁿ; insertion multiplies by (1 − λ/y)
        let (y, w, lam): (f64, f64, C64) = (1.7, 0.4, C64::new(0.3, 0.2));
        let n = 6;
        let raw = CMatrix::from_fn(n, n, |i, j| c(w * w * y.powi(i as i32) * 2.0 * y.powi(j as i32)) * ((i as f64) - (j as f64)));
        let border: Vec<C64> = (0..n).map(|i| c(w * y.powi(i as i32))).collect();
        let pair = SkewPair::from_raw(raw, border, 0, 0, "atom").unwrap();
        let ins = pair.insert_point(lam).unwrap();
        assert_eq!(ins.base(), 1);
        let factor = 1.0 - lam / y;
        for k in 1..n as i64 {
            let want = pair.border_entry(k).unwrap() * factor;
            assert!((ins.border_entry(k).unwrap() - want).norm() < 1e-13);
        }
    }
}
