//! Ensemble descriptions and the skew moment pairs (A, a) fed to the Pfaffian
//! series, together with determinant-insertion kernels and complex Ginibre
//! bimoments.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::quad::{self, GaussLegendre, PanelLayout, QuadratureGrid, RealWeightShape, Resolution};
use crate::skewlin::SkewPair;
use crate::symfun::{potential, potential_c, CouplingSeq};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EnsembleKind {
    OE,
    GinOE,
    SE,
    GinSE,
    GinUE,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Orthogonal,
    Symplectic,
    Unitary,
}

impl EnsembleKind {
    pub const ALL: [EnsembleKind; 5] = [Self::OE, Self::GinOE, Self::SE, Self::GinSE, Self::GinUE];

    pub fn family(self) -> Family {
        match self {
            Self::OE | Self::GinOE => Family::Orthogonal,
            Self::SE | Self::GinSE => Family::Symplectic,
            Self::GinUE => Family::Unitary,
        }
    }

    /// Default (α, β): weight of the complex sector and of the real sector.
    pub fn default_mix(self) -> (f64, f64) {
        match self {
            Self::OE | Self::SE => (0.0, 1.0),
            Self::GinOE => (1.0, 1.0),
            Self::GinSE | Self::GinUE => (1.0, 0.0),
        }
    }

    /// Pfaffian size for n eigenvalues.
    pub fn charge(self, n: usize) -> usize {
        match self.family() {
            Family::Symplectic => 2 * n,
            _ => n,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::OE => "OE",
            Self::GinOE => "GinOE",
            Self::SE => "SE",
            Self::GinSE => "GinSE",
            Self::GinUE => "GinUE",
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Invalid(format!("unknown ensemble kind {s:?}")))
    }
}

/// Extra parameters of the complex Ginibre weight.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct PlaneParams {
    pub l1: i64,
    pub l2: i64,
    pub t_bar: CouplingSeq,
    pub s_bar: CouplingSeq,
}

/// One problem instance: ensemble, size, determinant power and deformations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub n: usize,
    pub l: i64,
    pub t: CouplingSeq,
    pub s: CouplingSeq,
    pub alpha: f64,
    pub beta: f64,
    pub plane: Option<PlaneParams>,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, n: usize) -> Self {
        let (alpha, beta) = kind.default_mix();
        let plane = (kind == EnsembleKind::GinUE).then(PlaneParams::default);
        Self { kind, n, l: 0, t: CouplingSeq::zeros(0), s: CouplingSeq::zeros(0), alpha, beta, plane }
    }

    pub fn with_l(mut self, l: i64) -> Self {
        self.l = l;
        self
    }

    pub fn with_t(mut self, t: impl Into<CouplingSeq>) -> Self {
        self.t = t.into();
        self
    }

    pub fn with_s(mut self, s: impl Into<CouplingSeq>) -> Self {
        self.s = s.into();
        self
    }

    pub fn with_mix(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    pub fn with_plane(mut self, plane: PlaneParams) -> Self {
        self.plane = Some(plane);
        self
    }

    pub fn charge(&self) -> usize {
        self.kind.charge(self.n)
    }

    /// Same instance with t = s = 0 (and t', s' = 0).
    pub fn undeformed(&self) -> Self {
        let mut out = self.clone();
        out.t = CouplingSeq::zeros(0);
        out.s = CouplingSeq::zeros(0);
        if let Some(p) = out.plane.as_mut() {
            p.t_bar = CouplingSeq::zeros(0);
            p.s_bar = CouplingSeq::zeros(0);
        }
        out
    }

    pub fn uses_complex_sector(&self) -> bool {
        self.alpha != 0.0
    }

    pub fn uses_real_sector(&self) -> bool {
        self.beta != 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Invalid(format!("alpha, beta must lie in [0, 1], got ({}, {})", self.alpha, self.beta)));
        }
        let (t, s, l) = (&self.t, &self.s, self.l);
        match self.kind.family() {
            Family::Unitary => {
                let p = self.plane.as_ref().ok_or_else(|| Error::Invalid("GinUE needs L1, L2, t', s'".into()))?;
                quad::convergence_validate_plane(t, &p.t_bar, s, &p.s_bar, p.l1, p.l2)?;
            }
            Family::Orthogonal => {
                if self.uses_real_sector() || self.kind == EnsembleKind::OE {
                    quad::convergence_validate(EnsembleKind::OE, t, s, l)?;
                }
                if self.uses_complex_sector() {
                    quad::convergence_validate(EnsembleKind::GinSE, t, s, l)?;
                }
            }
            Family::Symplectic => {
                if self.uses_real_sector() {
                    quad::convergence_validate(EnsembleKind::SE, t, s, l)?;
                }
                if self.uses_complex_sector() {
                    quad::convergence_validate(EnsembleKind::GinSE, t, s, l)?;
                }
            }
        }
        Ok(())
    }
}

/// Quadrature controls shared by moment tables and oracles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadSettings {
    pub tol: f64,
    pub max_level: u32,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self { tol: 1e-11, max_level: quad::DEFAULT_MAX_LEVEL }
    }
}

/// Real and complex weighted point masses replacing the integration measures.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Atoms {
    pub real: Vec<(f64, f64)>,
    /// Points in the upper half-plane with their weights.
    pub complex: Vec<(C64, f64)>,
}

impl Atoms {
    pub fn len(&self) -> usize {
        self.real.len() + self.complex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) fn powers(z: C64, lo: i64, count: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(count);
    let mut cur = z.powi(lo as i32);
    for _ in 0..count {
        out.push(cur);
        cur *= z;
    }
    out
}

pub(crate) fn real_powers(x: f64, lo: i64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut cur = x.powi(lo as i32);
    for _ in 0..count {
        out.push(cur);
        cur *= x;
    }
    out
}

/// Leading singular term of −factor·V(1/x, s) near 0, if any.
fn singular_term(s: &CouplingSeq, factor: f64) -> Option<(f64, usize)> {
    let d = s.degree();
    (d > 0).then(|| (factor * s.get(d).abs(), d))
}

/// e^{−factor·V(1/x, s)}, zero at x = 0 when s ≠ 0.
pub(crate) fn dressing(x: f64, s: &CouplingSeq, factor: f64) -> f64 {
    if s.is_zero() {
        return 1.0;
    }
    if x == 0.0 {
        return 0.0;
    }
    (-factor * potential(1.0 / x, s)).exp()
}

pub(crate) fn dressing_c(z: C64, s: &CouplingSeq, factor: f64) -> C64 {
    if s.is_zero() {
        return C64::new(1.0, 0.0);
    }
    (-factor * potential_c(z.inv(), s)).exp()
}

pub(crate) type RealFn<'a> = dyn Fn(f64) -> C64 + Sync + 'a;
pub(crate) type VecFn<'a> = dyn Fn(f64, &mut [C64]) + Sync + 'a;

/// Sub-panels of a layout at a refinement level.
pub(crate) fn sub_panels(layout: &PanelLayout, level: u32) -> Vec<(f64, f64)> {
    let split = 1usize << level;
    let mut out = Vec::new();
    for w in layout.breakpoints().windows(2) {
        for k in 0..split {
            let a = w[0] + (w[1] - w[0]) * k as f64 / split as f64;
            let b = w[0] + (w[1] - w[0]) * (k + 1) as f64 / split as f64;
            out.push((a, b));
        }
    }
    out
}

/// D_ij = ∫∫ sgn(x−y) φ_i(x) φ_j(y) w(x) w(y) dx dy and the single integrals
/// ∫ φ_i w, each paired with its L1 scale. The inner integral is cumulative
/// with exact sub-panel splitting at every outer node.
pub(crate) fn sgn_bimoments(layout: &PanelLayout, level: u32, w: &RealFn, phi: &VecFn, dim: usize) -> (Vec<(C64, f64)>, Vec<(C64, f64)>) {
    let rule = GaussLegendre::standard();
    let panels = sub_panels(layout, level);
    let eval = |x: f64, buf: &mut Vec<C64>| {
        buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        phi(x, buf);
        let wx = w(x);
        buf.iter_mut().for_each(|v| *v *= wx);
    };
    struct PanelData {
        outer: Vec<Vec<C64>>,
        partial: Vec<Vec<C64>>,
        total: Vec<C64>,
        abs: Vec<f64>,
    }
    let data: Vec<PanelData> = panels
        .par_iter()
        .map(|&(a, b)| {
            let mut buf = vec![C64::new(0.0, 0.0); dim];
            let mut xs = Vec::new();
            let mut ws = Vec::new();
            rule.push_interval(a, b, &mut xs, &mut ws);
            let mut total = vec![C64::new(0.0, 0.0); dim];
            let mut abs = vec![0.0; dim];
            let mut outer = Vec::with_capacity(xs.len());
            let mut partial = Vec::with_capacity(xs.len());
            for (x, wt) in xs.iter().zip(&ws) {
                eval(*x, &mut buf);
                let v: Vec<C64> = buf.iter().map(|u| u * *wt).collect();
                for i in 0..dim {
                    total[i] += v[i];
                    abs[i] += v[i].norm();
                }
                outer.push(v);
                let mut ys = Vec::new();
                let mut vs = Vec::new();
                rule.push_interval(a, *x, &mut ys, &mut vs);
                let mut p = vec![C64::new(0.0, 0.0); dim];
                for (y, vy) in ys.iter().zip(&vs) {
                    eval(*y, &mut buf);
                    for i in 0..dim {
                        p[i] += buf[i] * *vy;
                    }
                }
                partial.push(p);
            }
            PanelData { outer, partial, total, abs }
        })
        .collect();
    let mut grand = vec![C64::new(0.0, 0.0); dim];
    let mut abs = vec![0.0; dim];
    for p in &data {
        for i in 0..dim {
            grand[i] += p.total[i];
            abs[i] += p.abs[i];
        }
    }
    let mut d = vec![C64::new(0.0, 0.0); dim * dim];
    let mut before = vec![C64::new(0.0, 0.0); dim];
    for p in &data {
        for (v, part) in p.outer.iter().zip(&p.partial) {
            for j in 0..dim {
                let s = (before[j] + part[j]) * 2.0 - grand[j];
                for i in 0..dim {
                    d[i * dim + j] += v[i] * s;
                }
            }
        }
        for i in 0..dim {
            before[i] += p.total[i];
        }
    }
    let pairs = (0..dim * dim).map(|k| (d[k], abs[k / dim] * abs[k % dim])).collect();
    let single = grand.into_iter().zip(abs).collect();
    (pairs, single)
}

/// Σ_k ω_k w(z_k) z_k^n z̄_k^m over the grid for n, m in base..base+size,
/// with L1 scales Σ |ω w| |z|^{n+m}.
pub(crate) fn grid_bimoments(grid: &QuadratureGrid, w: &(dyn Fn(C64) -> C64 + Sync), base: i64, size: usize) -> Vec<(C64, f64)> {
    const CHUNK: usize = 2048;
    let idx: Vec<usize> = (0..grid.len()).step_by(CHUNK).collect();
    let partials: Vec<(Vec<C64>, Vec<f64>)> = idx
        .par_iter()
        .map(|&start| {
            let mut acc = vec![C64::new(0.0, 0.0); size * size];
            let mut absm = vec![0.0; 2 * size];
            for k in start..(start + CHUNK).min(grid.len()) {
                let z = grid.nodes[k];
                let c = w(z) * grid.weights[k];
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                let zp = powers(z, base, size);
                let cz: Vec<C64> = zp.iter().map(|v| v * c).collect();
                for n in 0..size {
                    for m in 0..size {
                        acc[n * size + m] += cz[n] * zp[m].conj();
                    }
                }
                let r = z.norm();
                let mut rp = c.norm() * r.powi(2 * base as i32);
                for a in absm.iter_mut() {
                    *a += rp;
                    rp *= r;
                }
            }
            (acc, absm)
        })
        .collect();
    let mut acc = vec![C64::new(0.0, 0.0); size * size];
    let mut absm = vec![0.0; 2 * size];
    for (a, b) in &partials {
        for (x, y) in acc.iter_mut().zip(a) {
            *x += y;
        }
        for (x, y) in absm.iter_mut().zip(b) {
            *x += y;
        }
    }
    (0..size * size).map(|k| (acc[k], absm[k / size + k % size])).collect()
}

/// Largest absolute index any moment table entry needs.
fn top_index(base: i64, size: usize) -> usize {
    (base + size as i64 - 1).max(0) as usize
}

fn real_layout(gauss: f64, max_power: usize, s: &CouplingSeq, factor: f64) -> PanelLayout {
    RealWeightShape { gauss, max_power, shift: 0.0, singular: singular_term(s, factor) }.layout()
}

/// Real-sector sgn moments and border of the orthogonal family.
fn orthogonal_real(s: &CouplingSeq, base: i64, size: usize, q: &QuadSettings) -> Result<(CMatrix, Vec<C64>)> {
    let layout = real_layout(0.5, top_index(base, size), s, 1.0);
    let w = |x: f64| C64::new((-0.5 * x * x).exp() * dressing(x, s, 1.0), 0.0);
    let phi = |x: f64, out: &mut [C64]| {
        for (o, p) in out.iter_mut().zip(real_powers(x, base, size)) {
            *o = C64::new(p, 0.0);
        }
    };
    let r = quad::refine(
        |level| {
            let (mut d, single) = sgn_bimoments(&layout, level, &w, &phi, size);
            d.extend(single);
            d
        },
        q.tol,
        q.max_level,
    )?;
    let f = CMatrix::from_fn(size, size, |i, j| r.values[i * size + j]);
    Ok((f, r.values[size * size..].to_vec()))
}

/// C'_nm = 2 Im ∫_{Im z>0} z^n z̄^m erfc(√2 Im z) e^{−Re z² − 2 Re V(1/z, s)} d²z.
fn orthogonal_complex(s: &CouplingSeq, base: i64, size: usize, q: &QuadSettings) -> Result<CMatrix> {
    let (re, im) = quad::halfplane_layout(2 * top_index(base, size), 1.0);
    let w = |z: C64| {
        let g = quad::erfc(std::f64::consts::SQRT_2 * z.im) * (z.im * z.im - z.re * z.re).exp();
        dressing_c(z, s, 1.0) * dressing_c(z.conj(), s, 1.0) * g
    };
    let r = quad::refine(
        |level| grid_bimoments(&QuadratureGrid::tensor(&re, &im, Resolution { tol: q.tol, level }), &w, base, size),
        q.tol,
        q.max_level,
    )?;
    Ok(CMatrix::from_fn(size, size, |i, j| C64::new(2.0 * r.values[i * size + j].im, 0.0)))
}

/// μ_k = ∫ x^k e^{−x² − 2V(1/x, s)} dx for k in lo..lo+count.
fn symplectic_power_moments(s: &CouplingSeq, lo: i64, count: usize, q: &QuadSettings) -> Result<Vec<C64>> {
    let layout = real_layout(1.0, (lo + count as i64).max(0) as usize, s, 2.0);
    let r = quad::refine(
        |level| {
            let (xs, ws) = layout.rule(GaussLegendre::standard(), level);
            let mut acc = vec![(C64::new(0.0, 0.0), 0.0); count];
            for (x, wt) in xs.iter().zip(&ws) {
                let c = wt * (-x * x).exp() * dressing(*x, s, 2.0);
                for (a, p) in acc.iter_mut().zip(real_powers(*x, lo, count)) {
                    a.0 += c * p;
                    a.1 += (c * p).abs();
                }
            }
            acc
        },
        q.tol,
        q.max_level,
    )?;
    Ok(r.values)
}

fn symplectic_real(s: &CouplingSeq, base: i64, size: usize, q: &QuadSettings) -> Result<CMatrix> {
    let lo = 2 * base - 1;
    let mu = symplectic_power_moments(s, lo, 2 * size, q)?;
    Ok(CMatrix::from_fn(size, size, |i, j| {
        if i == j {
            return C64::new(0.0, 0.0);
        }
        let k = (2 * base + i as i64 + j as i64 - 1 - lo) as usize;
        mu[k] * ((i as f64 - j as f64) / 2.0)
    }))
}

/// G_nm = ∫_{Im z>0} z^n z̄^m (z − z̄) e^{−|z|² − 2 Re V(1/z, s)} d²z.
fn symplectic_complex(s: &CouplingSeq, base: i64, size: usize, q: &QuadSettings) -> Result<CMatrix> {
    let (re, im) = quad::halfplane_layout(2 * top_index(base, size) + 2, 1.0);
    let w = |z: C64| dressing_c(z, s, 1.0) * dressing_c(z.conj(), s, 1.0) * C64::new(0.0, 2.0 * z.im) * (-z.norm_sqr()).exp();
    let r = quad::refine(
        |level| grid_bimoments(&QuadratureGrid::tensor(&re, &im, Resolution { tol: q.tol, level }), &w, base, size),
        q.tol,
        q.max_level,
    )?;
    Ok(CMatrix::from_fn(size, size, |i, j| r.values[i * size + j]))
}

/// Lowest absolute index of the moment table for determinant power `l`.
pub fn table_base(l: i64) -> i64 {
    l.min(0)
}

/// Number of moments a series of cutoff `w` at charge `charge` needs.
pub fn table_size(charge: usize, l: i64, w: usize) -> usize {
    (w as i64 + charge as i64 + l - table_base(l)).max(0) as usize
}

/// Skew moment pair over absolute indices table_base(L) .. + size.
pub fn moment_pair(spec: &EnsembleSpec, size: usize, q: &QuadSettings) -> Result<SkewPair> {
    spec.validate()?;
    let base = table_base(spec.l);
    let zero = || CMatrix::zeros(size, size);
    let (raw, border) = match spec.kind.family() {
        Family::Unitary => return Err(Error::Invalid("GinUE has no skew moment pair; use complex_bimoment_matrix".into())),
        Family::Orthogonal => {
            let (mut a, mut border) = (zero(), vec![C64::new(0.0, 0.0); size]);
            if spec.uses_real_sector() {
                let (f, b) = orthogonal_real(&spec.s, base, size, q)?;
                a = f.map(|x| x * spec.beta);
                border = b.iter().map(|x| x * spec.beta).collect();
            }
            if spec.uses_complex_sector() {
                let c = orthogonal_complex(&spec.s, base, size, q)?;
                a = CMatrix::from_fn(size, size, |i, j| a[(i, j)] + c[(i, j)] * spec.alpha);
            }
            (a, border)
        }
        Family::Symplectic => {
            let mut a = zero();
            if spec.uses_real_sector() {
                a = symplectic_real(&spec.s, base, size, q)?.map(|x| x * spec.beta);
            }
            if spec.uses_complex_sector() {
                let g = symplectic_complex(&spec.s, base, size, q)?;
                a = CMatrix::from_fn(size, size, |i, j| a[(i, j)] + g[(i, j)] * spec.alpha);
            }
            (a, vec![C64::new(0.0, 0.0); size])
        }
    };
    SkewPair::from_raw(raw, border, base, spec.l, MomentKey::new(spec, size, q).provenance())
}

/// Border a_n = ∫ x^n e^{−x² − 2V(1/x, s)} dx for the symplectic family; used
/// to probe odd charges, where the plain symplectic border vanishes.
pub fn symplectic_auxiliary_border(spec: &EnsembleSpec, size: usize, q: &QuadSettings) -> Result<Vec<C64>> {
    symplectic_power_moments(&spec.s, table_base(spec.l), size, q)
}

/// Moment pair of atomic measures, same conventions as [`moment_pair`].
pub fn atomic_pair(family: Family, atoms: &Atoms, base: i64, size: usize, alpha: f64, beta: f64) -> Result<SkewPair> {
    let mut a = CMatrix::zeros(size, size);
    let mut border = vec![C64::new(0.0, 0.0); size];
    match family {
        Family::Unitary => return Err(Error::Invalid("GinUE has no skew moment pair".into())),
        Family::Orthogonal => {
            let pw: Vec<Vec<f64>> = atoms.real.iter().map(|(x, _)| real_powers(*x, base, size)).collect();
            for (i, (xa, wa)) in atoms.real.iter().enumerate() {
                for (n, b) in border.iter_mut().enumerate() {
                    *b += beta * wa * pw[i][n];
                }
                for (j, (xb, wb)) in atoms.real.iter().enumerate() {
                    let sg = (xa - xb).signum() * if xa == xb { 0.0 } else { 1.0 };
                    if sg == 0.0 {
                        continue;
                    }
                    for n in 0..size {
                        for m in 0..size {
                            a[(n, m)] += beta * sg * wa * wb * pw[i][n] * pw[j][m];
                        }
                    }
                }
            }
            for (z, wz) in &atoms.complex {
                let zp = powers(*z, base, size);
                for n in 0..size {
                    for m in 0..size {
                        a[(n, m)] += alpha * wz * 2.0 * (zp[n] * zp[m].conj()).im;
                    }
                }
            }
        }
        Family::Symplectic => {
            for (x, w) in &atoms.real {
                let pw = real_powers(*x, 2 * base - 1, 2 * size);
                for n in 0..size {
                    for m in 0..size {
                        if n != m {
                            a[(n, m)] += beta * w * (n as f64 - m as f64) / 2.0 * pw[n + m];
                        }
                    }
                }
            }
            for (z, w) in &atoms.complex {
                let zp = powers(*z, base, size);
                let d = z - z.conj();
                for n in 0..size {
                    for m in 0..size {
                        a[(n, m)] += alpha * w * zp[n] * zp[m].conj() * d;
                    }
                }
            }
        }
    }
    SkewPair::from_raw(a, border, base, base.max(0), format!("atoms:{family:?}:{}", atoms.len()))
}

/// Pairing kernel of determinant insertions at points p.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix {
    pub kind: EnsembleKind,
    pub p: Vec<C64>,
    pub k: CMatrix,
    pub kstar: CMatrix,
}

fn check_points(p: &[C64]) -> Result<()> {
    for i in 0..p.len() {
        for j in 0..i {
            if p[i] == p[j] {
                return Err(Error::CoincidentPoints(j, i));
            }
        }
    }
    Ok(())
}

/// Radius inside which every insertion (1 − p x)⁻¹ stays away from its pole.
pub fn insertion_radius(p: &[C64]) -> f64 {
    let m = p.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if m == 0.0 {
        f64::INFINITY
    } else {
        0.9 / m
    }
}

pub(crate) fn clipped_real_layout(spec: &EnsembleSpec, gauss: f64, factor: f64, max_power: usize, radius: f64) -> PanelLayout {
    let c = gauss - factor * spec.t.get(2);
    let shift = factor * spec.t.get(1) / (2.0 * c.max(0.05));
    let mut shape = RealWeightShape { gauss: c, max_power, shift, singular: singular_term(&spec.s, factor) };
    if spec.t.degree() >= 3 {
        shape.gauss = gauss;
    }
    let layout = shape.layout();
    if layout.hi() <= radius {
        return layout;
    }
    PanelLayout::real_line(radius, shape.singular.map(|(coef, deg)| 0.5 * (coef / 750.0).powf(1.0 / deg as f64)))
}

pub(crate) fn clipped_halfplane(spec: &EnsembleSpec, max_power: usize, radius: f64) -> (PanelLayout, PanelLayout) {
    let c = 1.0 - 2.0 * spec.t.get(2).abs();
    let shift = spec.t.get(1).abs() / c.max(0.05);
    let (re, im) = quad::halfplane_layout(max_power, c);
    let r = (re.hi() + shift).min(radius);
    let panels = (r / 1.5).ceil() as usize;
    (PanelLayout::uniform(-r, r, 2 * panels), PanelLayout::uniform(0.0, r.min(im.hi()), panels))
}

/// K*_nm for determinant insertions at p and K_nm = (p_m − p_n) K*_nm.
/// The real sectors use |x − y|; the GinOE complex sector uses 2|z − z̄|.
pub fn kernel_matrix(spec: &EnsembleSpec, p: &[C64], q: &QuadSettings) -> Result<KernelMatrix> {
    spec.validate()?;
    check_points(p)?;
    let n = p.len();
    let radius = insertion_radius(p);
    let (t, s, l) = (&spec.t, &spec.s, spec.l);
    let mut kstar = CMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let (pa, pb) = (p[a], p[b]);
            let ins = |z: C64| ((C64::new(1.0, 0.0) - z * pa) * (C64::new(1.0, 0.0) - z * pb)).inv();
            let mut val = C64::new(0.0, 0.0);
            match spec.kind.family() {
                Family::Unitary => return Err(Error::Invalid("kernel_matrix is defined for OE, GinOE, SE and GinSE".into())),
                Family::Orthogonal => {
                    if spec.uses_real_sector() {
                        let layout = clipped_real_layout(spec, 0.5, 1.0, l.max(0) as usize + 2, radius);
                        let w = |x: f64| {
                            let base = (-0.5 * x * x + potential(x, t)).exp() * dressing(x, s, 1.0) * x.powi(l as i32);
                            ins(C64::new(x, 0.0)) * base
                        };
                        let phi = |x: f64, out: &mut [C64]| {
                            out[0] = C64::new(1.0, 0.0);
                            out[1] = C64::new(x, 0.0);
                        };
                        let r = quad::refine(|level| sgn_bimoments(&layout, level, &w, &phi, 2).0, q.tol, q.max_level)?;
                        val += (r.values[2] - r.values[1]) * spec.beta;
                    }
                    if spec.uses_complex_sector() {
                        let (re, im) = clipped_halfplane(spec, 2 * l.max(0) as usize + 4, radius);
                        let f = |z: C64| {
                            let g = quad::erfc(std::f64::consts::SQRT_2 * z.im) * (z.im * z.im - z.re * z.re).exp();
                            let v = (potential_c(z, t) + potential_c(z.conj(), t)).exp();
                            ins(z) * ins(z.conj()) * v * g * dressing_c(z, s, 1.0) * dressing_c(z.conj(), s, 1.0) * 2.0 * (2.0 * z.im) * z.norm_sqr().powi(l as i32)
                        };
                        let est = quad::integrate_halfplane(f, &re, &im, q.tol)?;
                        val += est.value * spec.alpha;
                    }
                }
                Family::Symplectic => {
                    if spec.uses_real_sector() {
                        let layout = clipped_real_layout(spec, 1.0, 2.0, 2 * l.max(0) as usize, radius);
                        let f = |x: f64| {
                            let z = C64::new(x, 0.0);
                            let i = ins(z);
                            i * i * ((-x * x + 2.0 * potential(x, t)).exp() * dressing(x, s, 2.0) * x.powi(2 * l as i32))
                        };
                        val += quad::integrate_real(f, &layout, q.tol)?.value * spec.beta;
                    }
                    if spec.uses_complex_sector() {
                        let (re, im) = clipped_halfplane(spec, 2 * l.max(0) as usize + 2, radius);
                        let f = |z: C64| {
                            let d = z - z.conj();
                            let v = (potential_c(z, t) + potential_c(z.conj(), t) - z.norm_sqr()).exp();
                            ins(z) * ins(z.conj()) * d * d * v * dressing_c(z, s, 1.0) * dressing_c(z.conj(), s, 1.0) * z.norm_sqr().powi(l as i32)
                        };
                        val += quad::integrate_halfplane(f, &re, &im, q.tol)?.value * spec.alpha;
                    }
                }
            }
            kstar[(a, b)] = val;
            kstar[(b, a)] = val;
        }
    }
    let k = CMatrix::from_fn(n, n, |i, j| (p[j] - p[i]) * kstar[(i, j)]);
    Ok(KernelMatrix { kind: spec.kind, p: p.to_vec(), k, kstar })
}

/// M_jk = ∫_ℂ z^{j−1+L1} z̄^{k−1−L2} e^{V(z,t)+V(z̄,t')−V(1/z,s)−V(1/z̄,s')−|z|²} d²z.
pub fn complex_bimoment_matrix(spec: &EnsembleSpec, n: usize, q: &QuadSettings) -> Result<CMatrix> {
    if spec.kind != EnsembleKind::GinUE {
        return Err(Error::Invalid(format!("bimoments are defined for GinUE, got {}", spec.kind)));
    }
    spec.validate()?;
    let p = spec.plane.as_ref().expect("validated");
    let (t, tb, s, sb) = (&spec.t, &p.t_bar, &spec.s, &p.s_bar);
    let c = 1.0 - (t.get(2) + tb.get(2)).abs();
    let shift = (t.get(1).abs() + tb.get(1).abs()) / c;
    let (re, _) = quad::halfplane_layout(2 * n + (p.l1 - p.l2).unsigned_abs() as usize, c);
    let r = re.hi() + shift;
    let panels = (r / 1.5).ceil() as usize;
    let axis = PanelLayout::uniform(-r, r, 2 * panels);
    let w = |z: C64| {
        let zb = z.conj();
        let e = potential_c(z, t) + potential_c(zb, tb) - z.norm_sqr();
        e.exp() * dressing_c(z, s, 1.0) * dressing_c(zb, sb, 1.0) * z.powi(p.l1 as i32) * zb.powi(-p.l2 as i32)
    };
    let res = quad::refine(
        |level| {
            let grid = QuadratureGrid::tensor(&axis, &axis, Resolution { tol: q.tol, level });
            grid_bimoments(&grid, &w, 0, n)
        },
        q.tol,
        q.max_level,
    )?;
    Ok(CMatrix::from_fn(n, n, |j, k| res.values[j * n + k]))
}

/// Canonical description of everything a moment table depends on.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MomentKey(String);

fn bits(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

impl MomentKey {
    pub fn new(spec: &EnsembleSpec, size: usize, q: &QuadSettings) -> Self {
        let s: Vec<String> = spec.s.values()[..spec.s.degree()].iter().map(|v| bits(*v)).collect();
        let (alpha, beta) = match spec.kind.family() {
            Family::Unitary => (1.0, 0.0),
            _ => (spec.alpha, spec.beta),
        };
        Self(format!(
            "family={:?};alpha={};beta={};s=[{}];base={};size={};tol={};max_level={}",
            spec.kind.family(),
            bits(alpha),
            bits(beta),
            s.join(","),
            table_base(spec.l),
            size,
            bits(q.tol),
            q.max_level
        ))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn provenance(&self) -> String {
        self.0.clone()
    }
}

impl fmt::Display for MomentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Read-through store for moment tables.
pub trait MomentStore: Send + Sync {
    fn get_or_compute(&self, key: &MomentKey, compute: &mut dyn FnMut() -> Result<SkewPair>) -> Result<SkewPair>;
}

/// Always recomputes.
#[derive(Debug, Default)]
pub struct NoStore;

impl MomentStore for NoStore {
    fn get_or_compute(&self, _key: &MomentKey, compute: &mut dyn FnMut() -> Result<SkewPair>) -> Result<SkewPair> {
        compute()
    }
}

/// Process-local store.
#[derive(Debug, Default)]
pub struct MemoryStore {
    tables: Mutex<HashMap<MomentKey, SkewPair>>,
    computed: AtomicUsize,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of tables computed (cache misses).
    pub fn computations(&self) -> usize {
        self.computed.load(Ordering::SeqCst)
    }
}

impl MomentStore for MemoryStore {
    fn get_or_compute(&self, key: &MomentKey, compute: &mut dyn FnMut() -> Result<SkewPair>) -> Result<SkewPair> {
        if let Some(p) = self.tables.lock().unwrap().get(key) {
            return Ok(p.clone());
        }
        let pair = compute()?;
        self.computed.fetch_add(1, Ordering::SeqCst);
        self.tables.lock().unwrap().insert(key.clone(), pair.clone());
        Ok(pair)
    }
}

pub fn moment_pair_cached(spec: &EnsembleSpec, size: usize, q: &QuadSettings, store: &dyn MomentStore) -> Result<SkewPair> {
    spec.validate()?;
    let key = MomentKey::new(spec, size, q);
    store.get_or_compute(&key, &mut || moment_pair(spec, size, q))
}
