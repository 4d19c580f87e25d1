//! Complete homogeneous polynomials, Schur functions, Miwa shifts and the
//! coupling factor between the two sets of times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Scalar, C64};
use crate::partitions::Partition;

/// Finitely supported sequence of times (t_1, ..., t_K); entries past K are zero.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CouplingSeq<T = f64> {
    values: Vec<T>,
}

impl<T: Scalar> CouplingSeq<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn zeros(order: usize) -> Self {
        Self { values: vec![T::real(0.0); order] }
    }

    pub fn order(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// t_n for n ≥ 1; zero beyond the order.
    pub fn get(&self, n: usize) -> T {
        if n == 0 {
            return T::real(0.0);
        }
        self.values.get(n - 1).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.modulus() == 0.0)
    }

    /// Highest index with a nonzero entry.
    pub fn degree(&self) -> usize {
        self.values.iter().rposition(|v| v.modulus() != 0.0).map_or(0, |i| i + 1)
    }

    /// Truncated or zero-padded copy of order `k`.
    pub fn with_order(&self, k: usize) -> Self {
        Self { values: (1..=k).map(|n| self.get(n)).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let k = self.order().max(other.order());
        Self { values: (1..=k).map(|n| self.get(n) + other.get(n)).collect() }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|&v| v * T::real(c)).collect() }
    }

    pub fn to_complex(&self) -> CouplingSeq<C64> {
        CouplingSeq { values: self.values.iter().map(|&v| v.into()).collect() }
    }
}

impl CouplingSeq<f64> {
    /// Real parts of a complex sequence.
    pub fn real_part(c: &CouplingSeq<C64>) -> Self {
        Self { values: c.values.iter().map(|v| v.re).collect() }
    }
}

impl<T: Scalar> From<Vec<T>> for CouplingSeq<T> {
    fn from(values: Vec<T>) -> Self {
        Self::new(values)
    }
}

/// V(x, t) = Σ t_n xⁿ.
pub fn potential<T: Scalar>(x: T, t: &CouplingSeq<T>) -> T {
    let mut acc = T::real(0.0);
    for &tn in t.values.iter().rev() {
        acc = (acc + tn) * x;
    }
    acc
}

/// Mixed-type V: complex point against real times.
pub fn potential_c(z: C64, t: &CouplingSeq<f64>) -> C64 {
    t.values.iter().rev().fold(C64::new(0.0, 0.0), |acc, &tn| (acc + tn) * z)
}

/// h_0..=h_max from n·h_n = Σ k t_k h_{n−k}.
pub fn complete_homogeneous_table<T: Scalar>(max: usize, t: &CouplingSeq<T>) -> Vec<T> {
    let mut h = Vec::with_capacity(max + 1);
    h.push(T::real(1.0));
    for n in 1..=max {
        let mut s = T::real(0.0);
        for k in 1..=n.min(t.order()) {
            s += T::real(k as f64) * t.get(k) * h[n - k];
        }
        h.push(s / T::real(n as f64));
    }
    h
}

pub fn complete_homogeneous<T: Scalar>(n: i64, t: &CouplingSeq<T>) -> Result<T> {
    if n < 0 {
        return Err(Error::NegativeOrder(n));
    }
    Ok(complete_homogeneous_table(n as usize, t)[n as usize])
}

/// Jacobi–Trudi determinant from a precomputed h-table covering λ_1 + ℓ(λ).
pub fn schur_from_table<T: Scalar>(lambda: &Partition, h: &[T]) -> T {
    let l = lambda.len();
    if l == 0 {
        return T::real(1.0);
    }
    let entry = |i: usize, j: usize| {
        let k = lambda.part(i) as i64 - i as i64 + j as i64;
        if k < 0 {
            T::real(0.0)
        } else {
            h[k as usize]
        }
    };
    match l {
        1 => entry(0, 0),
        2 => entry(0, 0) * entry(1, 1) - entry(0, 1) * entry(1, 0),
        _ => Matrix::from_fn(l, l, entry).det(),
    }
}

pub fn schur<T: Scalar>(lambda: &Partition, t: &CouplingSeq<T>) -> T {
    let h = complete_homogeneous_table(lambda.part(0) as usize + lambda.len(), t);
    schur_from_table(lambda, &h)
}

/// t'_n = t_n − scale·(1/n)·Σ aᵢ pᵢⁿ for n = 1..order.
pub fn miwa_shift<T: Scalar>(t: &CouplingSeq<T>, atoms: &[(f64, T)], scale: f64, order: usize) -> CouplingSeq<T> {
    let values = (1..=order)
        .map(|n| {
            let mut s = T::real(0.0);
            for &(a, p) in atoms {
                s += T::real(a) * p.powi(n as i32);
            }
            t.get(n) - T::real(scale / n as f64) * s
        })
        .collect();
    CouplingSeq { values }
}

/// t + [1/z]: tₙ + z⁻ⁿ/n.
pub fn bracket_shift<T: Scalar>(t: &CouplingSeq<T>, z: T, sign: f64, order: usize) -> CouplingSeq<T> {
    miwa_shift(t, &[(-sign, T::real(1.0) / z)], 1.0, order)
}

/// c(t, s) = exp Σ n tₙ sₙ.
pub fn c_factor(t: &CouplingSeq<f64>, s: &CouplingSeq<f64>) -> f64 {
    let k = t.order().min(s.order());
    (1..=k).map(|n| n as f64 * t.get(n) * s.get(n)).sum::<f64>().exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partitions::enumerate_partitions;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(v: &[f64]) -> CouplingSeq {
        CouplingSeq::new(v.to_vec())
    }

    fn part(v: &[u32]) -> Partition {
        Partition::new(v.to_vec()).unwrap()
    }

    #[test]
    fn potential_examples() {
        assert_eq!(potential(3.7, &CouplingSeq::zeros(4)), 0.0);
        assert_eq!(potential(2.0, &seq(&[1.0, 0.0, 3.0])), 26.0);
        assert!((potential(1.0, &seq(&[0.3, -1.2, 2.5])) - 1.6).abs() < 1e-15);
    }

    #[test]
    fn complete_homogeneous_examples() {
        let t = seq(&[0.7, -0.4, 0.25]);
        assert_eq!(complete_homogeneous(0, &t).unwrap(), 1.0);
        let h2 = complete_homogeneous(2, &t).unwrap();
        assert!((h2 - (-0.4 + 0.49 / 2.0)).abs() < 1e-15);
        let h3 = complete_homogeneous(3, &t).unwrap();
        assert!((h3 - (0.25 + 0.7 * -0.4 + 0.343 / 6.0)).abs() < 1e-15);
        assert_eq!(complete_homogeneous(-1, &t), Err(Error::NegativeOrder(-1)));
    }

    // Taylor coefficients of exp(Σ f_k z^k) by summing powers of the series.
    fn exp_series(f: &[f64], deg: usize) -> Vec<f64> {
        let mut out = vec![0.0; deg + 1];
        out[0] = 1.0;
        let mut power = vec![0.0; deg + 1];
        power[0] = 1.0;
        let mut fact = 1.0;
        for m in 1..=deg {
            let mut next = vec![0.0; deg + 1];
            for (i, &p) in power.iter().enumerate() {
                for (k, &fk) in f.iter().enumerate() {
                    if i + k < deg {
                        next[i + k + 1] += p * fk;
                    }
                }
            }
            power = next;
            fact *= m as f64;
            for n in 0..=deg {
                out[n] += power[n] / fact;
            }
        }
        out
    }

    #[test]
    fn generating_function_matches_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = complete_homogeneous_table(8, &seq(&v));
            let e = exp_series(&v, 8);
            for n in 0..=8 {
                assert!((h[n] - e[n]).abs() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn schur_examples() {
        let t = seq(&[0.6, -0.3, 0.1]);
        assert_eq!(schur(&Partition::empty(), &t), 1.0);
        assert!((schur(&part(&[1]), &t) - 0.6).abs() < 1e-15);
        assert!((schur(&part(&[1, 1]), &t) - (0.36 / 2.0 + 0.3)).abs() < 1e-15);
    }

    // Schur polynomials in variables via the bialternant formula.
    fn bialternant(lambda: &Partition, x: &[f64]) -> f64 {
        let n = x.len();
        let num = Matrix::from_fn(n, n, |i, j| x[i].powi((lambda.part(j) as usize + n - 1 - j) as i32));
        let den = Matrix::from_fn(n, n, |i, j| x[i].powi((n - 1 - j) as i32));
        num.det() / den.det()
    }

    #[test]
    fn schur_agrees_with_bialternant_under_miwa_map() {
        let x = [0.9, -0.4, 0.3];
        let t = miwa_shift(&CouplingSeq::zeros(0), &x.iter().map(|&xi| (-1.0, xi)).collect::<Vec<_>>(), 1.0, 10);
        for lam in enumerate_partitions(6, 3) {
            let a = schur(&lam, &t);
            let b = bialternant(&lam, &x);
            assert!((a - b).abs() < 1e-12, "{lam}: {a} vs {b}");
        }
    }

    #[test]
    fn single_variable_specialization() {
        let x = 0.8;
        let t = miwa_shift(&CouplingSeq::zeros(0), &[(-1.0, x)], 1.0, 8);
        for lam in enumerate_partitions(6, 6) {
            let v = schur(&lam, &t);
            if lam.len() > 1 {
                assert!(v.abs() < 1e-13, "{lam}");
            } else {
                assert!((v - x.powi(lam.weight() as i32)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn miwa_examples() {
        let t = seq(&[0.1, 0.2]);
        assert_eq!(miwa_shift(&t, &[], 1.0, 2), t);
        let z = miwa_shift(&CouplingSeq::zeros(0), &[(-1.0, 0.5)], 1.0, 3);
        let want = [0.5, 0.125, 0.125 / 3.0];
        for (g, w) in z.values().iter().zip(want) {
            assert!((g - w).abs() < 1e-16);
        }
        let c = miwa_shift(&CouplingSeq::zeros(0), &[(1.0, 0.7), (-1.0, 0.7)], 1.0, 5);
        assert!(c.is_zero());
    }

    #[test]
    fn miwa_additivity() {
        let t = seq(&[0.2, -0.1, 0.05]);
        let a = [(1.0, 0.3), (-2.0, -0.5)];
        let b = [(0.5, 0.9)];
        let twice = miwa_shift(&miwa_shift(&t, &a, 1.0, 6), &b, 1.0, 6);
        let once = miwa_shift(&t, &[a[0], a[1], b[0]], 1.0, 6);
        for n in 1..=6 {
            assert!((twice.get(n) - once.get(n)).abs() < 1e-15);
        }
    }

    #[test]
    fn complex_kernel() {
        let z = C64::new(0.3, 0.4);
        let t = miwa_shift(&CouplingSeq::<C64>::zeros(0), &[(-1.0, z)], 1.0, 6);
        let v = schur(&part(&[3]), &t);
        assert!((v - z.powi(3)).norm() < 1e-14);
        let real = seq(&[0.4, -0.2, 0.1]);
        assert!((potential_c(z, &real) - potential(z, &real.to_complex())).norm() < 1e-15);
    }

    #[test]
    fn c_factor_examples() {
        assert_eq!(c_factor(&CouplingSeq::zeros(3), &seq(&[1.0, 2.0])), 1.0);
        assert!((c_factor(&seq(&[1.0]), &seq(&[2.0])) - 2f64.exp()).abs() < 1e-14);
        assert!((c_factor(&seq(&[0.0, 1.0]), &seq(&[0.0, 3.0])) - 6f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn c_factor_bilinear() {
        let t = seq(&[0.2, -0.3, 0.1]);
        let s1 = seq(&[0.5, 0.1]);
        let s2 = seq(&[-0.2, 0.4, 0.3]);
        let lhs = c_factor(&t, &s1.add(&s2));
        assert!((lhs - c_factor(&t, &s1) * c_factor(&t, &s2)).abs() < 1e-14);
    }
}
