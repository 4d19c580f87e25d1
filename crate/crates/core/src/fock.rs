//! Charged free fermions on a finite window of modes.
//!
//! Modes below the window are permanently occupied, modes above it empty.
//! ψ_i creates mode i, ψ†_i annihilates it, and the extra neutral mode acts as
//! φ = (−1)^Q/√2 on states of charge Q.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::skewlin::pfaffian;

/// Amplitudes with modulus below this are dropped.
pub const PRUNE: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FockWindow {
    lo: i64,
    hi: i64,
}

impl FockWindow {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if !(lo < 0 && hi >= 0) {
            return Err(Error::Invalid(format!("window [{lo}, {hi}) must satisfy lo < 0 <= hi")));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn contains(&self, mode: i64) -> bool {
        (self.lo..self.hi).contains(&mode)
    }

    fn check(&self, mode: i64) -> Result<()> {
        if self.contains(mode) {
            Ok(())
        } else {
            Err(Error::OutsideWindow { mode, lo: self.lo, hi: self.hi })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Psi(i64),
    PsiDag(i64),
    Phi,
}

/// Linear combination of modes.
#[derive(Clone, Debug, PartialEq)]
pub struct Field(pub Vec<(Mode, C64)>);

impl Field {
    pub fn mode(m: Mode) -> Self {
        Field(vec![(m, C64::new(1.0, 0.0))])
    }

    pub fn phi() -> Self {
        Self::mode(Mode::Phi)
    }

    /// ψ(z) = Σ ψ_i zⁱ over the window.
    pub fn psi_at(z: C64, window: &FockWindow) -> Self {
        Field((window.lo..window.hi).map(|i| (Mode::Psi(i), z.powi(i as i32))).collect())
    }

    /// ψ†(z) = Σ ψ†_i z⁻ⁱ over the window.
    pub fn psi_dag_at(z: C64, window: &FockWindow) -> Self {
        Field((window.lo..window.hi).map(|i| (Mode::PsiDag(i), z.powi(-(i as i32)))).collect())
    }
}

/// Sparse vector over occupation sets of the window (sorted occupied modes).
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    window: FockWindow,
    amps: BTreeMap<Vec<i64>, C64>,
}

impl FockVector {
    pub fn zero(window: FockWindow) -> Self {
        Self { window, amps: BTreeMap::new() }
    }

    pub fn basis(window: FockWindow, occupied: Vec<i64>, amp: C64) -> Result<Self> {
        for &m in &occupied {
            window.check(m)?;
        }
        let mut occ = occupied;
        occ.sort_unstable();
        occ.dedup();
        let mut v = Self::zero(window);
        v.push(occ, amp);
        Ok(v)
    }

    pub fn window(&self) -> FockWindow {
        self.window
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, &C64)> {
        self.amps.iter()
    }

    fn push(&mut self, state: Vec<i64>, amp: C64) {
        let e = self.amps.entry(state).or_insert(C64::new(0.0, 0.0));
        *e += amp;
    }

    fn pruned(mut self) -> Self {
        self.amps.retain(|_, a| a.norm() >= PRUNE);
        self
    }

    /// Charge of a basis state relative to the sea {lo, …, −1}.
    pub fn state_charge(&self, state: &[i64]) -> i64 {
        state.len() as i64 + self.window.lo
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (s, a) in &other.amps {
            out.push(s.clone(), *a);
        }
        out.pruned()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { window: self.window, amps: self.amps.iter().map(|(s, a)| (s.clone(), a * c)).collect() }.pruned()
    }

    /// ⟨self|other⟩ with the bra conjugated.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.iter().filter_map(|(s, a)| other.amps.get(s).map(|b| a.conj() * b)).sum()
    }

    pub fn apply_mode(&self, mode: Mode) -> Result<Self> {
        let mut out = Self::zero(self.window);
        match mode {
            Mode::Phi => {
                let r = std::f64::consts::FRAC_1_SQRT_2;
                for (s, a) in &self.amps {
                    let sign = if self.state_charge(s).rem_euclid(2) == 0 { r } else { -r };
                    out.push(s.clone(), a * sign);
                }
            }
            Mode::Psi(i) | Mode::PsiDag(i) => {
                self.window.check(i)?;
                let create = matches!(mode, Mode::Psi(_));
                for (s, a) in &self.amps {
                    let pos = s.partition_point(|&m| m < i);
                    let present = s.get(pos) == Some(&i);
                    if present == create {
                        continue;
                    }
                    let above = s.len() - pos - usize::from(present);
                    let sign = if above % 2 == 0 { 1.0 } else { -1.0 };
                    let mut t = s.clone();
                    if create {
                        t.insert(pos, i);
                    } else {
                        t.remove(pos);
                    }
                    out.push(t, a * sign);
                }
            }
        }
        Ok(out.pruned())
    }

    pub fn apply(&self, field: &Field) -> Result<Self> {
        let mut out = Self::zero(self.window);
        for (m, c) in &field.0 {
            let part = self.apply_mode(*m)?;
            for (s, a) in part.amps {
                out.push(s, a * c);
            }
        }
        Ok(out.pruned())
    }
}

/// |L⟩: modes lo..L−1 occupied.
pub fn charged_vacuum(l: i64, window: FockWindow) -> Result<FockVector> {
    if l < window.lo || l > window.hi {
        return Err(Error::Invalid(format!("window [{}, {}) cannot hold charge {l}", window.lo, window.hi)));
    }
    FockVector::basis(window, (window.lo..l).collect(), C64::new(1.0, 0.0))
}

/// ⟨bra| f_1 ⋯ f_n |ket⟩, applying the rightmost field first.
pub fn vev(bra: i64, word: &[Field], ket: i64, window: FockWindow) -> Result<C64> {
    let mut v = charged_vacuum(ket, window)?;
    let b = charged_vacuum(bra, window)?;
    for f in word.iter().rev() {
        v = v.apply(f)?;
    }
    Ok(b.inner(&v))
}

/// Pf[⟨l|w_i w_j|l⟩] for an even word; 0 for an odd one.
pub fn wick_pfaffian(l: i64, word: &[Field], window: FockWindow) -> Result<C64> {
    let n = word.len();
    if n % 2 == 1 {
        return Ok(C64::new(0.0, 0.0));
    }
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = vev(l, &[word[i].clone(), word[j].clone()], l, window)?;
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
    }
    pfaffian(&m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn win() -> FockWindow {
        FockWindow::new(-6, 8).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_vector(rng: &mut ChaCha8Rng, w: FockWindow) -> FockVector {
        let mut v = FockVector::zero(w);
        for _ in 0..6 {
            let occ: Vec<i64> = (w.lo()..w.hi()).filter(|_| rng.random_bool(0.5)).collect();
            v = v.add(&FockVector::basis(w, occ, c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).unwrap());
        }
        v
    }

    #[test]
    fn vacua() {
        let w = win();
        let v0 = charged_vacuum(0, w).unwrap();
        assert_eq!(v0.iter().next().unwrap().0, &(-6..0).collect::<Vec<_>>());
        let v2 = charged_vacuum(2, w).unwrap();
        let built = v0.apply_mode(Mode::Psi(0)).unwrap().apply_mode(Mode::Psi(1)).unwrap();
        assert_eq!(built, v2);
        for a in -2..3 {
            for b in -2..3 {
                let ip = charged_vacuum(a, w).unwrap().inner(&charged_vacuum(b, w).unwrap());
                assert_eq!(ip, c(if a == b { 1.0 } else { 0.0 }, 0.0));
            }
        }
        assert!(charged_vacuum(9, w).is_err());
    }

    #[test]
    fn annihilation_and_window() {
        let w = win();
        let v = charged_vacuum(0, w).unwrap();
        assert!(v.apply_mode(Mode::Psi(-1)).unwrap().is_empty());
        assert!(v.apply_mode(Mode::PsiDag(0)).unwrap().is_empty());
        assert_eq!(v.apply_mode(Mode::Psi(8)).unwrap_err(), Error::OutsideWindow { mode: 8, lo: -6, hi: 8 });
    }

    #[test]
    fn phi_rules() {
        let w = win();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_vector(&mut rng, w);
        let twice = v.apply_mode(Mode::Phi).unwrap().apply_mode(Mode::Phi).unwrap();
        let diff = twice.add(&v.scale(c(-0.5, 0.0)));
        assert!(diff.iter().all(|(_, a)| a.norm() < 1e-15));
        for l in -3..4 {
            let got = vev(l, &[Field::phi()], l, w).unwrap();
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(got, c(sign * std::f64::consts::FRAC_1_SQRT_2, 0.0));
        }
        // anticommutes with every charged mode
        for i in [-2, 0, 3] {
            let a = v.apply_mode(Mode::Psi(i)).unwrap().apply_mode(Mode::Phi).unwrap();
            let b = v.apply_mode(Mode::Phi).unwrap().apply_mode(Mode::Psi(i)).unwrap();
            assert!(a.add(&b).is_empty());
        }
    }

    #[test]
    fn anticommutators() {
        let w = win();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = random_vector(&mut rng, w);
        for i in -3..4 {
            for j in -3..4 {
                let ab = v.apply_mode(Mode::Psi(j)).unwrap().apply_mode(Mode::Psi(i)).unwrap();
                let ba = v.apply_mode(Mode::Psi(i)).unwrap().apply_mode(Mode::Psi(j)).unwrap();
                assert!(ab.add(&ba).is_empty());
                let ab = v.apply_mode(Mode::PsiDag(j)).unwrap().apply_mode(Mode::Psi(i)).unwrap();
                let ba = v.apply_mode(Mode::Psi(i)).unwrap().apply_mode(Mode::PsiDag(j)).unwrap();
                let expect = if i == j { v.clone() } else { FockVector::zero(w) };
                assert_eq!(ab.add(&ba), expect.add(&FockVector::zero(w)));
            }
        }
    }

    #[test]
    fn single_field() {
        let w = win();
        let z = c(0.7, -0.4);
        for l in 0..3 {
            let got = vev(l + 1, &[Field::psi_at(z, &w)], l, w).unwrap();
            assert!((got - z.powi(l as i32)).norm() < 1e-15);
        }
    }

    #[test]
    fn vandermonde() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2usize, 3] {
            for l in 0..3i64 {
                let w = FockWindow::new(-3, 10).unwrap();
                let zs: Vec<C64> = (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
                let word: Vec<Field> = zs.iter().map(|z| Field::psi_at(*z, &w)).collect();
                let got = vev(n as i64 + l, &word, l, w).unwrap();
                let mut expect: C64 = zs.iter().map(|z| z.powi(l as i32)).product();
                for i in 0..n {
                    for j in i + 1..n {
                        expect *= zs[i] - zs[j];
                    }
                }
                assert!((got - expect).norm() < 1e-12, "{n} {l}: {got} {expect}");
            }
        }
    }

    #[test]
    fn charge_imbalance_is_zero() {
        let w = win();
        let got = vev(2, &[Field::psi_at(c(0.3, 0.1), &w)], 0, w).unwrap();
        assert_eq!(got, c(0.0, 0.0));
    }

    #[test]
    fn window_independence() {
        let zs = [c(0.3, 0.2), c(-0.5, 0.1), c(0.8, -0.6)];
        let run = |w: FockWindow| {
            let word: Vec<Field> = zs.iter().map(|z| Field::psi_at(*z, &w)).collect();
            vev(4, &word, 1, w).unwrap()
        };
        let small = run(FockWindow::new(-2, 6).unwrap());
        let large = run(FockWindow::new(-5, 9).unwrap());
        assert_eq!(small, large);
    }

    fn random_field(rng: &mut ChaCha8Rng, l: i64) -> Field {
        Field(
            (l - 2..l + 2)
                .flat_map(|i| [Mode::Psi(i), Mode::PsiDag(i)])
                .map(|m| (m, c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
                .collect(),
        )
    }

    #[test]
    fn wick_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = FockWindow::new(-6, 8).unwrap();
        for l in [0i64, 1, -1] {
            for n in [3usize, 4, 5, 6] {
                let word: Vec<Field> = (0..n).map(|_| random_field(&mut rng, l)).collect();
                let direct = vev(l, &word, l, w).unwrap();
                let pf = wick_pfaffian(l, &word, w).unwrap();
                assert!((direct - pf).norm() < 1e-12 * (1.0 + pf.norm()), "{l} {n}: {direct} {pf}");
            }
        }
    }
}
