//! Truncated Schur-function expansions of the partition functions, the
//! group-integral series, and the bilinear and wave-function checks built on
//! them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{polyfit, polyval, CompensatedSum, Scalar, C64};
use crate::moments::{self, EnsembleSpec, MomentStore, QuadSettings};
use crate::partitions::{enumerate_partitions, Partition};
use crate::skewlin::{abar, SkewPair};
use crate::symfun::{bracket_shift, complete_homogeneous_table, schur_from_table, CouplingSeq};

/// Σ_λ c_λ s_λ(t) over |λ| ≤ cutoff and ℓ(λ) ≤ charge, in canonical order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauApprox {
    pub spec: Option<EnsembleSpec>,
    pub charge: usize,
    pub l: i64,
    pub cutoff: usize,
    terms: Vec<(Partition, C64)>,
}

impl TauApprox {
    /// Coefficients Ā_{h(λ)}(L) read from a moment pair.
    pub fn from_pair(pair: &SkewPair, charge: usize, l: i64, cutoff: usize) -> Result<Self> {
        let parts = enumerate_partitions(cutoff as u32, charge);
        let terms = parts
            .into_par_iter()
            .map(|lambda| {
                let h = lambda.shifted_indices(charge)?;
                let c = abar(&h, l, pair)?;
                Ok((lambda, c))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec: None, charge, l, cutoff, terms })
    }

    pub fn terms(&self) -> &[(Partition, C64)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, lambda: &Partition) -> Option<C64> {
        self.terms.iter().find(|(p, _)| p == lambda).map(|(_, c)| *c)
    }

    /// Value at t = 0.
    pub fn constant_term(&self) -> C64 {
        self.terms[0].1
    }

    pub fn evaluate<T: Scalar>(&self, t: &CouplingSeq<T>) -> C64 {
        let h = complete_homogeneous_table(self.cutoff + self.charge + 1, t);
        let mut acc = CompensatedSum::default();
        for (lambda, c) in &self.terms {
            if lambda.is_empty() {
                acc.add(*c);
                continue;
            }
            let s: C64 = schur_from_table(lambda, &h).into();
            acc.add(c * s);
        }
        acc.value()
    }
}

/// Series for `spec` truncated at weight `cutoff`.
pub fn tau_series(spec: &EnsembleSpec, cutoff: usize, q: &QuadSettings, store: &dyn MomentStore) -> Result<TauApprox> {
    let charge = spec.charge();
    let pair = moments::moment_pair_cached(spec, moments::table_size(charge, spec.l, cutoff), q, store)?;
    let mut tau = TauApprox::from_pair(&pair, charge, spec.l, cutoff)?;
    tau.spec = Some(spec.clone());
    Ok(tau)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    /// O(N)
    Orthogonal(usize),
    /// Sp(2n)
    Symplectic(usize),
}

impl Group {
    /// Haar average of s_λ over the group.
    pub fn schur_average(&self, lambda: &Partition) -> f64 {
        let ok = match *self {
            Group::Orthogonal(n) => lambda.is_even() && lambda.len() <= n,
            Group::Symplectic(n) => lambda.conjugate().is_even() && lambda.len() <= 2 * n,
        };
        if ok {
            1.0
        } else {
            0.0
        }
    }

    pub fn matrix_dim(&self) -> usize {
        match *self {
            Group::Orthogonal(n) => n,
            Group::Symplectic(n) => 2 * n,
        }
    }
}

/// Σ s_λ(t) over |λ| ≤ cutoff with Haar average 1.
pub fn group_series(group: Group, t: &CouplingSeq, cutoff: usize) -> f64 {
    let h = complete_homogeneous_table(cutoff + group.matrix_dim() + 1, t);
    enumerate_partitions(cutoff as u32, group.matrix_dim())
        .iter()
        .filter(|l| group.schur_average(l) == 1.0)
        .map(|l| schur_from_table(l, &h))
        .sum()
}

/// Taus at every charge from one moment pair, for bilinear checks.
#[derive(Clone, Debug)]
pub struct TauFamily {
    pair: SkewPair,
    pub l: i64,
    pub cutoff: usize,
}

impl TauFamily {
    pub fn from_pair(pair: SkewPair, l: i64, cutoff: usize) -> Self {
        Self { pair, l, cutoff }
    }

    /// Family sharing the moments of `spec` up to charge `max_charge`. With
    /// `auxiliary_border` the symplectic border is replaced by the real
    /// power moments so that odd charges do not vanish.
    pub fn from_spec(
        spec: &EnsembleSpec,
        max_charge: usize,
        cutoff: usize,
        auxiliary_border: bool,
        q: &QuadSettings,
        store: &dyn MomentStore,
    ) -> Result<Self> {
        let size = moments::table_size(max_charge, spec.l, cutoff);
        let mut pair = moments::moment_pair_cached(spec, size, q, store)?;
        if auxiliary_border {
            pair = pair.with_border(moments::symplectic_auxiliary_border(spec, size, q)?)?;
        }
        Ok(Self { pair, l: spec.l, cutoff })
    }

    pub fn pair(&self) -> &SkewPair {
        &self.pair
    }

    pub fn series(&self, charge: usize) -> Result<TauApprox> {
        TauApprox::from_pair(&self.pair, charge, self.l, self.cutoff)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HirotaReport {
    pub cutoff: usize,
    /// T1, T2, T3 and the right-hand side.
    pub terms: [C64; 4],
    pub residual: C64,
    pub max_term: f64,
    pub relative: f64,
}

/// Residual of the four-term difference equation
///
/// ```text
/// −β/(α−β) τ_N(t+[β⁻¹]) τ_{N+1}(t+[α⁻¹]) − α/(β−α) τ_N(t+[α⁻¹]) τ_{N+1}(t+[β⁻¹])
/// + 1/(αβ) τ_{N+2}(t+[α⁻¹]+[β⁻¹]) τ_{N−1}(t) = τ_{N+1}(t+[α⁻¹]+[β⁻¹]) τ_N(t)
/// ```
///
/// with τ at negative charge equal to 0.
pub fn hirota_residual(family: &TauFamily, n: usize, t: &CouplingSeq, alpha: f64, beta: f64) -> Result<HirotaReport> {
    if alpha == 0.0 || beta == 0.0 {
        return Err(Error::ZeroShift);
    }
    if alpha == beta {
        return Err(Error::CoincidentShift);
    }
    let order = family.cutoff.max(t.order());
    let ta = bracket_shift(t, alpha, 1.0, order);
    let tb = bracket_shift(t, beta, 1.0, order);
    let tab = bracket_shift(&ta, beta, 1.0, order);
    let t0 = t.with_order(order);
    let series: Vec<TauApprox> = (n.saturating_sub(1)..=n + 2).map(|c| family.series(c)).collect::<Result<_>>()?;
    let tau = |charge: i64, tt: &CouplingSeq| -> C64 {
        if charge < 0 {
            return C64::new(0.0, 0.0);
        }
        let idx = (charge - n.saturating_sub(1) as i64) as usize;
        series[idx].evaluate(tt)
    };
    let n = n as i64;
    let t1 = tau(n, &tb) * tau(n + 1, &ta) * (-beta / (alpha - beta));
    let t2 = tau(n, &ta) * tau(n + 1, &tb) * (-alpha / (beta - alpha));
    let t3 = tau(n + 2, &tab) * tau(n - 1, &t0) / (alpha * beta);
    let rhs = tau(n + 1, &tab) * tau(n, &t0);
    let residual = t1 + t2 + t3 - rhs;
    let max_term = [t1, t2, t3, rhs].iter().map(|z| z.norm()).fold(0.0, f64::max);
    let relative = if max_term > 0.0 { residual.norm() / max_term } else { 0.0 };
    Ok(HirotaReport { cutoff: family.cutoff, terms: [t1, t2, t3, rhs], residual, max_term, relative })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveReport {
    pub points: Vec<C64>,
    /// λ^N τ(L, t − [λ⁻¹]) / τ(L, t)
    pub shifted: Vec<C64>,
    /// (−1)^N τ(L + 1, t) of the moments multiplied by (1 − λ/y), over τ(L, t)
    pub inserted: Vec<C64>,
    pub coefficients: Vec<C64>,
    pub fit_deviation: f64,
    pub side_deviation: f64,
}

/// Evaluation points: the samples, their midpoints, then a geometric tail
/// until a degree-`degree` fit is overdetermined by at least two.
pub fn wave_points(samples: &[C64], degree: usize) -> Vec<C64> {
    let mut pts = samples.to_vec();
    for w in samples.windows(2) {
        pts.push((w[0] + w[1]) * 0.5);
    }
    let mut last = samples.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(C64::new(2.0, 0.0));
    while pts.len() < degree + 3 {
        last *= 1.25;
        pts.push(last);
    }
    pts
}

/// Checks that λ^N τ(L, t − [λ⁻¹]) / τ(L, t) is a polynomial of degree N in λ
/// and that it equals the insertion construction on the other set of times.
pub fn wave_polynomial_check(
    spec: &EnsembleSpec,
    cutoff: usize,
    samples: &[C64],
    q: &QuadSettings,
    store: &dyn MomentStore,
) -> Result<WaveReport> {
    if samples.iter().any(|z| z.norm() == 0.0) {
        return Err(Error::Invalid("wave sample points must be nonzero".into()));
    }
    let charge = spec.charge();
    let size = moments::table_size(charge, spec.l, cutoff) + 1;
    let pair = moments::moment_pair_cached(spec, size, q, store)?;
    let tau = TauApprox::from_pair(&pair, charge, spec.l, cutoff)?;
    let t = spec.t.with_order(cutoff.max(spec.t.order())).to_complex();
    let base = tau.evaluate(&t);
    if base.norm() < 1e-12 {
        return Err(Error::TauVanishes);
    }
    let points = wave_points(samples, charge);
    let sign = if charge.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut shifted = Vec::with_capacity(points.len());
    let mut inserted = Vec::with_capacity(points.len());
    for &lam in &points {
        let tl = bracket_shift(&t, lam, -1.0, t.order());
        shifted.push(lam.powi(charge as i32) * tau.evaluate(&tl) / base);
        let moved = pair.insert_point(lam)?;
        let up = TauApprox::from_pair(&moved, charge, spec.l + 1, cutoff)?;
        inserted.push(up.evaluate(&t) * sign / base);
    }
    let coefficients = polyfit(&points, &shifted, charge).ok_or_else(|| Error::Invalid("singular polynomial fit".into()))?;
    let scale = shifted.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let fit_deviation = points.iter().zip(&shifted).map(|(x, y)| (polyval(&coefficients, *x) - y).norm()).fold(0.0, f64::max) / scale;
    let side_deviation = shifted.iter().zip(&inserted).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale;
    Ok(WaveReport { points, shifted, inserted, coefficients, fit_deviation, side_deviation })
}
