//! Ground truth computed without the Pfaffian series: eigenvalue-space
//! quadrature, Haar Monte Carlo, and finite atomic measures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CompensatedSum, C64};
use crate::moments::{self, Atoms, EnsembleKind, EnsembleSpec, Family, QuadSettings};
use crate::partitions::Partition;
use crate::quad::{self, Estimate, GaussLegendre, PanelLayout, QuadratureGrid, Resolution};
use crate::symfun::{potential, potential_c, schur, CouplingSeq};
use crate::tauseries::{Group, TauApprox};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum OracleMethod {
    Quadrature { level: u32 },
    MonteCarlo { seed: u64, samples: usize },
    ExactDiscrete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: C64,
    /// Refinement delta for quadrature, standard error for Monte Carlo.
    pub error_estimate: f64,
    pub method: OracleMethod,
}

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

fn insertion(p: &[C64], z: C64) -> C64 {
    p.iter().fold(ONE, |acc, pi| acc / (ONE - pi * z))
}

/// Running combination of refined sector integrals.
#[derive(Default)]
struct Tally {
    value: C64,
    error: f64,
    level: u32,
}

impl Tally {
    fn add(&mut self, coef: C64, e: Estimate) {
        self.value += coef * e.value;
        self.error += coef.norm() * e.error;
        self.level = self.level.max(e.level);
    }

    fn finish(self) -> OracleResult {
        OracleResult { value: self.value, error_estimate: self.error, method: OracleMethod::Quadrature { level: self.level } }
    }
}

fn single(r: quad::Refined, k: usize) -> Estimate {
    Estimate { value: r.values[k], error: r.errors[k], level: r.level }
}

/// ∫_{x_1 > ⋯ > x_k} Δ(x) Π w(x_i) dx for k ≤ 3, organised around the middle
/// variable so that each level costs O(n²).
fn chamber(layout: &PanelLayout, level: u32, w: &(dyn Fn(f64) -> C64 + Sync), k: usize) -> (C64, f64) {
    let rule = GaussLegendre::standard();
    let (xs, ws) = layout.rule(rule, level);
    if k == 0 {
        return (ONE, 1.0);
    }
    // Σ_{y beyond x} (±(y − x))^d w(y), d = 0..2, with |·| scales
    let side = |x: f64, upper: bool| -> ([C64; 3], [f64; 3]) {
        let (ys, wy) = if upper { layout.rule_on(rule, x, layout.hi(), level) } else { layout.rule_on(rule, layout.lo(), x, level) };
        let mut v = [ZERO; 3];
        let mut a = [0.0; 3];
        for (y, wt) in ys.iter().zip(&wy) {
            let g = w(*y) * *wt;
            let d = (y - x).abs();
            let mut pw = 1.0;
            for j in 0..3 {
                v[j] += g * pw;
                a[j] += g.norm() * pw;
                pw *= d;
            }
        }
        (v, a)
    };
    let terms: Vec<(C64, f64)> = xs
        .par_iter()
        .zip(ws.par_iter())
        .map(|(&x, &wt)| {
            let g = w(x) * wt;
            match k {
                1 => (g, g.norm()),
                2 => {
                    let (u, ua) = side(x, true);
                    (g * u[1], g.norm() * ua[1])
                }
                _ => {
                    let (u, ua) = side(x, true);
                    let (d, da) = side(x, false);
                    (g * (u[2] * d[1] + u[1] * d[2]), g.norm() * (ua[2] * da[1] + ua[1] * da[2]))
                }
            }
        })
        .collect();
    let mut acc = CompensatedSum::default();
    let mut l1 = 0.0;
    for (v, a) in terms {
        acc.add(v);
        l1 += a;
    }
    (acc.value(), l1)
}

fn size_limit(spec: &EnsembleSpec) -> Result<()> {
    let max = match spec.kind {
        EnsembleKind::GinUE => 2,
        _ => 3,
    };
    if spec.n > max {
        return Err(Error::Unsupported { what: "eigenvalue oracle size", max, got: spec.n });
    }
    Ok(())
}

/// Eigenvalue integral of `spec` without normalising constants. Ordered
/// domains are used for the orthogonal family, the full space over N! for the
/// symplectic family.
pub fn eigen_integral(spec: &EnsembleSpec, q: &QuadSettings) -> Result<OracleResult> {
    det_average_lhs(spec, &[], q)
}

/// Eigenvalue integral with Π_i det(1 − p_i X)⁻¹ inserted. Each eigenvalue of
/// the matrix X enters once; for SE the quaternion eigenvalues are counted once.
pub fn det_average_lhs(spec: &EnsembleSpec, p: &[C64], q: &QuadSettings) -> Result<OracleResult> {
    spec.validate()?;
    size_limit(spec)?;
    if spec.kind == EnsembleKind::GinUE {
        if !p.is_empty() {
            return Err(Error::Invalid("determinant insertions are not implemented for GinUE".into()));
        }
        return ginue_direct(spec, q);
    }
    eigen_sum(spec, p, moments::insertion_radius(p), q)
}

/// Unvalidated integral over |x| < radius.
fn eigen_sum(spec: &EnsembleSpec, p: &[C64], radius: f64, q: &QuadSettings) -> Result<OracleResult> {
    let (t, s, l, n) = (&spec.t, &spec.s, spec.l, spec.n);
    let lpow = l.unsigned_abs() as usize;
    let mut tally = Tally::default();
    match spec.kind.family() {
        Family::Orthogonal => {
            let wr = |x: f64| {
                let e = (-0.5 * x * x + potential(x, t)).exp() * moments::dressing(x, s, 1.0) * x.powi(l as i32);
                insertion(p, C64::new(x, 0.0)) * e
            };
            // includes |z − z̄| = 2 Im z
            let wc = |z: C64| {
                let g = quad::erfc(std::f64::consts::SQRT_2 * z.im) * (z.im * z.im - z.re * z.re).exp();
                let v = (potential_c(z, t) + potential_c(z.conj(), t)).exp();
                let d = moments::dressing_c(z, s, 1.0) * moments::dressing_c(z.conj(), s, 1.0);
                insertion(p, z) * insertion(p, z.conj()) * v * d * (2.0 * z.im * g * z.norm_sqr().powi(l as i32))
            };
            let layout = moments::clipped_real_layout(spec, 0.5, 1.0, n * (lpow + n), radius);
            let (re, im) = moments::clipped_halfplane(spec, 2 * (lpow + n), radius);
            for k in 0..=n / 2 {
                let reals = n - 2 * k;
                let weight = spec.alpha.powi(k as i32) * spec.beta.powi(reals.div_ceil(2) as i32);
                if weight == 0.0 {
                    continue;
                }
                let coef = C64::new(weight, 0.0);
                match k {
                    0 => {
                        let r = quad::refine(|level| vec![chamber(&layout, level, &wr, reals)], q.tol, q.max_level)?;
                        tally.add(coef, single(r, 0));
                    }
                    _ if reals == 0 => {
                        tally.add(coef, quad::integrate_halfplane(wc, &re, &im, q.tol)?);
                    }
                    _ => {
                        // one complex pair and one real: |z − x|² = |z|² − 2x Re z + x²
                        let rm = quad::refine(
                            |level| {
                                let (xs, ws) = layout.rule(GaussLegendre::standard(), level);
                                let mut acc = [(ZERO, 0.0); 3];
                                for (x, wt) in xs.iter().zip(&ws) {
                                    let g = wr(*x) * *wt;
                                    let mut pw = 1.0;
                                    for a in acc.iter_mut() {
                                        a.0 += g * pw;
                                        a.1 += g.norm() * pw.abs();
                                        pw *= x;
                                    }
                                }
                                acc.to_vec()
                            },
                            q.tol,
                            q.max_level,
                        )?;
                        let cm = quad::refine(
                            |level| {
                                let g = QuadratureGrid::tensor(&re, &im, Resolution { tol: q.tol, level });
                                vec![g.sum(|z| wc(z) * z.norm_sqr()), g.sum(|z| wc(z) * z.re), g.sum(wc)]
                            },
                            q.tol,
                            q.max_level,
                        )?;
                        let pairs = [(0usize, 0usize, 1.0), (1, 1, -2.0), (2, 2, 1.0)];
                        for (ci, ri, c) in pairs {
                            let (a, b) = (single(cm.clone(), ci), single(rm.clone(), ri));
                            let v = a.value * b.value;
                            let e = Estimate { value: v, error: a.error * b.value.norm() + b.error * a.value.norm(), level: a.level.max(b.level) };
                            tally.add(coef * c, e);
                        }
                    }
                }
            }
        }
        Family::Symplectic => match spec.kind {
            EnsembleKind::SE => {
                if spec.alpha != 0.0 {
                    return Err(Error::Invalid("the SE oracle covers the pure real ensemble only".into()));
                }
                let w = |x: f64| {
                    let e = (-x * x + 2.0 * potential(x, t)).exp() * moments::dressing(x, s, 2.0) * x.powi(2 * l as i32);
                    insertion(p, C64::new(x, 0.0)) * e
                };
                let layout = moments::clipped_real_layout(spec, 1.0, 2.0, 2 * n * (lpow + 2 * n), radius);
                let r = quad::refine(|level| vec![se_tensor(&layout, level, &w, n)], q.tol, q.max_level)?;
                tally.add(C64::new(spec.beta.powi(n as i32), 0.0), single(r, 0));
            }
            _ => {
                if spec.beta != 0.0 {
                    return Err(Error::Invalid("the GinSE oracle covers the pure complex ensemble only".into()));
                }
                let w = |z: C64| {
                    let e = (potential_c(z, t) + potential_c(z.conj(), t) - z.norm_sqr()).exp();
                    let d = moments::dressing_c(z, s, 1.0) * moments::dressing_c(z.conj(), s, 1.0);
                    insertion(p, z) * insertion(p, z.conj()) * e * d * (2.0 * z.im * z.norm_sqr().powi(l as i32))
                };
                let (re, im) = moments::clipped_halfplane(spec, 2 * (lpow + 2 * n), radius);
                let m = 2 * n;
                let r = quad::refine(
                    |level| moments::grid_bimoments(&QuadratureGrid::tensor(&re, &im, Resolution { tol: q.tol, level }), &w, 0, m),
                    q.tol,
                    q.max_level,
                )?;
                // Δ_{2n}(z_1, z̄_1, …) = (−1)^{m(m−1)/2} Σ_σ sgn σ Π_k u_k^{σ(k)}
                let flip = if (m * (m.saturating_sub(1)) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                let mut total = ZERO;
                let mut err = 0.0;
                for (perm, sign) in permutations(m) {
                    let mut prod = ONE;
                    let mut bound = 0.0;
                    for pair in 0..n {
                        let idx = perm[2 * pair] * m + perm[2 * pair + 1];
                        let (v, e) = (r.values[idx], r.errors[idx]);
                        bound = bound * v.norm() + e * prod.norm();
                        prod *= v;
                    }
                    total += prod * sign;
                    err += bound;
                }
                let fact: f64 = (1..=n).map(|k| k as f64).product();
                let coef = C64::new(flip * spec.alpha.powi(n as i32) / fact, 0.0);
                tally.add(coef, Estimate { value: total, error: err, level: r.level });
            }
        },
        Family::Unitary => unreachable!(),
    }
    Ok(tally.finish())
}

/// Σ_{i<j<k} Π w Δ⁴ over a tensor rule, i.e. (1/N!)∫_{ℝ^N}.
fn se_tensor(layout: &PanelLayout, level: u32, w: &(dyn Fn(f64) -> C64 + Sync), n: usize) -> (C64, f64) {
    let (xs, ws) = layout.rule(GaussLegendre::standard(), level);
    let g: Vec<C64> = xs.iter().zip(&ws).map(|(x, wt)| w(*x) * *wt).collect();
    let m = xs.len();
    let rows: Vec<(C64, f64)> = (0..m)
        .into_par_iter()
        .map(|i| match n {
            0 => if i == 0 { (ONE, 1.0) } else { (ZERO, 0.0) },
            1 => (g[i], g[i].norm()),
            2 => {
                let mut v = ZERO;
                let mut a = 0.0;
                for j in i + 1..m {
                    let d = (xs[i] - xs[j]).powi(4);
                    v += g[j] * d;
                    a += g[j].norm() * d;
                }
                (g[i] * v, g[i].norm() * a)
            }
            _ => {
                let mut v = ZERO;
                let mut a = 0.0;
                for j in i + 1..m {
                    let dij = (xs[i] - xs[j]).powi(4);
                    for k in j + 1..m {
                        let d = dij * ((xs[i] - xs[k]) * (xs[j] - xs[k])).powi(4);
                        let h = g[j] * g[k];
                        v += h * d;
                        a += h.norm() * d;
                    }
                }
                (g[i] * v, g[i].norm() * a)
            }
        })
        .collect();
    let mut acc = CompensatedSum::default();
    let mut l1 = 0.0;
    for (v, a) in rows {
        acc.add(v);
        l1 += a;
    }
    (acc.value(), l1)
}

/// All permutations of 0..m with their signs.
fn permutations(m: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], sign: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        let m = used.len();
        if cur.len() == m {
            out.push((cur.clone(), sign));
            return;
        }
        // placing v flips the sign once per smaller unused value
        let mut smaller = 0;
        for v in 0..m {
            if used[v] {
                continue;
            }
            used[v] = true;
            cur.push(v);
            rec(cur, used, if smaller % 2 == 0 { sign } else { -sign }, out);
            cur.pop();
            used[v] = false;
            smaller += 1;
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; m], 1.0, &mut out);
    out
}

/// (1/N!) ∫_{ℂ^N} |Δ(z)|² Π w(z_i) d²z_i for N ≤ 2 on a direct product grid.
pub fn ginue_direct(spec: &EnsembleSpec, q: &QuadSettings) -> Result<OracleResult> {
    if spec.kind != EnsembleKind::GinUE {
        return Err(Error::Invalid(format!("direct GinUE quadrature needs kind GinUE, got {}", spec.kind)));
    }
    spec.validate()?;
    size_limit(spec)?;
    let plane = spec.plane.clone().unwrap_or_default();
    let (t, tb, s, sb) = (&spec.t, &plane.t_bar, &spec.s, &plane.s_bar);
    let c = 1.0 - (t.get(2) + tb.get(2)).abs();
    let shift = (t.get(1).abs() + tb.get(1).abs()) / c;
    let r = (60.0 / c).sqrt() + shift + 1.0;
    let axis = PanelLayout::uniform(-r, r, (2.0 * r / 3.0).ceil() as usize);
    let w = |z: C64| {
        let zb = z.conj();
        let e = potential_c(z, t) + potential_c(zb, tb) - z.norm_sqr();
        e.exp() * moments::dressing_c(z, s, 1.0) * moments::dressing_c(zb, sb, 1.0) * z.powi(plane.l1 as i32) * zb.powi(-plane.l2 as i32)
    };
    let n = spec.n;
    let res = quad::refine(
        |level| {
            let grid = QuadratureGrid::tensor(&axis, &axis, Resolution { tol: q.tol, level });
            let g: Vec<C64> = grid.nodes.iter().zip(&grid.weights).map(|(z, wt)| w(*z) * *wt).collect();
            match n {
                0 => vec![(ONE, 1.0)],
                1 => {
                    let mut acc = CompensatedSum::default();
                    g.iter().for_each(|v| acc.add(*v));
                    vec![(acc.value(), g.iter().map(|v| v.norm()).sum())]
                }
                _ => {
                    let nodes = &grid.nodes;
                    let rows: Vec<(C64, f64)> = (0..nodes.len())
                        .into_par_iter()
                        .map(|i| {
                            let mut v = ZERO;
                            let mut a = 0.0;
                            for j in i + 1..nodes.len() {
                                let d = (nodes[i] - nodes[j]).norm_sqr();
                                v += g[j] * d;
                                a += g[j].norm() * d;
                            }
                            (g[i] * v, g[i].norm() * a)
                        })
                        .collect();
                    let mut acc = CompensatedSum::default();
                    let mut l1 = 0.0;
                    for (v, a) in rows {
                        acc.add(v);
                        l1 += a;
                    }
                    vec![(acc.value(), l1)]
                }
            }
        },
        q.tol.max(1e-10),
        1,
    )?;
    Ok(OracleResult { value: res.values[0], error_estimate: res.errors[0], method: OracleMethod::Quadrature { level: res.level } })
}

/// Function of a Haar-random group element averaged by Monte Carlo.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum HaarPayload {
    Schur(Partition),
    /// exp Σ t_m Tr Oᵐ
    ExpTrace(CouplingSeq),
}

/// Number of independent streams the samples are split over.
pub const MC_SHARDS: usize = 16;

type CMat = Vec<Vec<C64>>;

fn matmul(a: &CMat, b: &CMat) -> CMat {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn project_out(v: &mut [C64], cols: &[Vec<C64>]) {
    for q in cols {
        let dot: C64 = q.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
        for (x, y) in v.iter_mut().zip(q) {
            *x -= dot * y;
        }
    }
}

fn normalize(v: &mut [C64]) {
    let nrm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= nrm);
}

/// Haar orthogonal matrix: Gram–Schmidt on a Gaussian matrix, which is QR
/// with positive diagonal in R.
pub fn sample_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v: Vec<C64> = (0..n).map(|_| C64::new(gaussian(rng), 0.0)).collect();
        project_out(&mut v, &cols);
        project_out(&mut v, &cols);
        normalize(&mut v);
        cols.push(v);
    }
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

/// −J q̄ with J = [[0, I], [−I, 0]].
fn sympl_partner(q: &[C64]) -> Vec<C64> {
    let n = q.len() / 2;
    (0..2 * n).map(|i| if i < n { -q[i + n].conj() } else { q[i - n].conj() }).collect()
}

/// Haar element of USp(2n): columns q_k from Gaussian vectors, paired with −J q̄_k.
pub fn sample_symplectic(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    let m = 2 * n;
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(m);
    let mut first = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v: Vec<C64> = (0..m).map(|_| C64::new(gaussian(rng), gaussian(rng))).collect();
        project_out(&mut v, &cols);
        project_out(&mut v, &cols);
        normalize(&mut v);
        let w = sympl_partner(&v);
        cols.push(v.clone());
        cols.push(w);
        first.push(v);
    }
    let ordered: Vec<Vec<C64>> = first.iter().cloned().chain(first.iter().map(|v| sympl_partner(v))).collect();
    (0..m).map(|i| (0..m).map(|j| ordered[j][i]).collect()).collect()
}

fn power_traces(u: &CMat, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k);
    let mut cur = u.clone();
    for step in 0..k {
        out.push((0..u.len()).map(|i| cur[i][i]).sum::<C64>().re);
        if step + 1 < k {
            cur = matmul(&cur, u);
        }
    }
    out
}

fn payload_value(payload: &HaarPayload, u: &CMat) -> f64 {
    match payload {
        HaarPayload::Schur(lambda) => {
            let k = lambda.weight() as usize;
            let tr = power_traces(u, k.max(1));
            let t = CouplingSeq::new(tr.iter().enumerate().map(|(i, p)| p / (i + 1) as f64).collect());
            schur(lambda, &t)
        }
        HaarPayload::ExpTrace(t) => {
            let tr = power_traces(u, t.order().max(1));
            (1..=t.order()).map(|m| t.get(m) * tr[m - 1]).sum::<f64>().exp()
        }
    }
}

/// Monte Carlo Haar average. Samples are split over [`MC_SHARDS`] ChaCha8
/// streams of one seed and reduced in shard order.
pub fn haar_expectation_mc(group: Group, payload: &HaarPayload, samples: usize, seed: u64) -> Result<OracleResult> {
    if samples == 0 {
        return Err(Error::Invalid("samples must be at least 1".into()));
    }
    let shards: Vec<(f64, f64, usize)> = (0..MC_SHARDS)
        .into_par_iter()
        .map(|shard| {
            let count = samples / MC_SHARDS + usize::from(shard < samples % MC_SHARDS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard as u64);
            let mut sum = 0.0;
            let mut sq = 0.0;
            for _ in 0..count {
                let u = match group {
                    Group::Orthogonal(n) => sample_orthogonal(n, &mut rng),
                    Group::Symplectic(n) => sample_symplectic(n, &mut rng),
                };
                let v = payload_value(payload, &u);
                sum += v;
                sq += v * v;
            }
            (sum, sq, count)
        })
        .collect();
    let (sum, sq) = shards.iter().fold((0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1));
    let nf = samples as f64;
    let mean = sum / nf;
    let var = if samples > 1 { ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    Ok(OracleResult { value: C64::new(mean, 0.0), error_estimate: (var / nf).sqrt(), method: OracleMethod::MonteCarlo { seed, samples } })
}

/// Both sides of the partition-function identity for an atomic measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCheck {
    pub lhs: C64,
    pub rhs: C64,
    pub cutoff: usize,
}

impl DiscreteCheck {
    pub fn relative_error(&self) -> f64 {
        (self.lhs - self.rhs).norm() / self.lhs.norm().max(self.rhs.norm()).max(f64::MIN_POSITIVE)
    }
}

pub const MAX_ATOMS: usize = 8;
/// Series cutoff used for atomic measures.
pub const DISCRETE_CUTOFF: usize = 22;

fn vandermonde(u: &[C64]) -> C64 {
    let mut v = ONE;
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            v *= u[i] - u[j];
        }
    }
    v
}

fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::new(), &mut out);
    out
}

/// Eigenvalue sum over subsets of atoms (lhs) against the series built from
/// the same atoms (rhs, times the family's fixed constant). Real atoms feed
/// the real sectors, upper half-plane atoms the complex ones. `spec.s` must
/// vanish; the atom weights play its role.
pub fn discrete_consistency(spec: &EnsembleSpec, atoms: &Atoms, cutoff: usize) -> Result<DiscreteCheck> {
    if !(2..=MAX_ATOMS).contains(&atoms.len()) {
        return Err(Error::Invalid(format!("atom count must lie in 2..={MAX_ATOMS}, got {}", atoms.len())));
    }
    if !spec.s.is_zero() {
        return Err(Error::Invalid("atomic checks take s = 0".into()));
    }
    if atoms.complex.iter().any(|(z, _)| z.im <= 0.0) {
        return Err(Error::Invalid("complex atoms must lie in the upper half-plane".into()));
    }
    let (t, l, n) = (&spec.t, spec.l, spec.n);
    let vt = |z: C64| potential_c(z, t);
    let (lhs, constant) = match spec.kind {
        EnsembleKind::GinUE => return Err(Error::Invalid("GinUE has no Pfaffian series".into())),
        EnsembleKind::OE | EnsembleKind::GinOE => {
            let mut lhs = ZERO;
            for k in 0..=n / 2 {
                let reals = n - 2 * k;
                let weight = spec.alpha.powi(k as i32) * spec.beta.powi(reals.div_ceil(2) as i32);
                if weight == 0.0 {
                    continue;
                }
                for sc in subsets(atoms.complex.len(), k) {
                    for sr in subsets(atoms.real.len(), reals) {
                        let mut xs: Vec<(f64, f64)> = sr.iter().map(|&i| atoms.real[i]).collect();
                        xs.sort_by(|a, b| b.0.total_cmp(&a.0));
                        let mut u = Vec::with_capacity(n);
                        let mut wt = C64::new(weight, 0.0);
                        for &i in &sc {
                            let (z, wz) = atoms.complex[i];
                            u.push(z);
                            u.push(z.conj());
                            wt *= wz * z.norm_sqr().powi(l as i32) * (vt(z) + vt(z.conj())).exp() / C64::i();
                        }
                        for &(x, w) in &xs {
                            u.push(C64::new(x, 0.0));
                            wt *= w * x.powi(l as i32) * vt(C64::new(x, 0.0)).exp();
                        }
                        lhs += vandermonde(&u) * wt;
                    }
                }
            }
            (lhs, ONE)
        }
        EnsembleKind::SE => {
            let mut lhs = ZERO;
            for sr in subsets(atoms.real.len(), n) {
                let u: Vec<C64> = sr.iter().map(|&i| C64::new(atoms.real[i].0, 0.0)).collect();
                let wt: C64 = sr.iter().map(|&i| {
                    let (x, w) = atoms.real[i];
                    (2.0 * vt(C64::new(x, 0.0))).exp() * (w * x.powi(2 * l as i32))
                }).product();
                lhs += vandermonde(&u).powi(4) * wt;
            }
            (lhs * spec.beta.powi(n as i32), C64::new(2f64.powi(n as i32), 0.0))
        }
        EnsembleKind::GinSE => {
            let mut lhs = ZERO;
            for sc in subsets(atoms.complex.len(), n) {
                let mut u = Vec::with_capacity(2 * n);
                let mut wt = ONE;
                for &i in &sc {
                    let (z, w) = atoms.complex[i];
                    u.push(z);
                    u.push(z.conj());
                    wt *= (vt(z) + vt(z.conj())).exp() * (w * 2.0 * z.im * z.norm_sqr().powi(l as i32));
                }
                lhs += vandermonde(&u) * wt;
            }
            (lhs * spec.alpha.powi(n as i32), C64::new(0.0, -2.0).powi(n as i32))
        }
    };
    let charge = spec.charge();
    let base = moments::table_base(l);
    let (sym_atoms, alpha, beta) = match spec.kind {
        EnsembleKind::SE => (Atoms { real: atoms.real.clone(), complex: vec![] }, 0.0, spec.beta),
        EnsembleKind::GinSE => (Atoms { real: vec![], complex: atoms.complex.clone() }, spec.alpha, 0.0),
        _ => (atoms.clone(), spec.alpha, spec.beta),
    };
    let pair = moments::atomic_pair(spec.kind.family(), &sym_atoms, base, moments::table_size(charge, l, cutoff), alpha, beta)?;
    let tau = TauApprox::from_pair(&pair, charge, l, cutoff)?;
    let rhs = constant * tau.evaluate(t);
    Ok(DiscreteCheck { lhs, rhs, cutoff })
}

/// Reproducible random atoms: reals in (−r, r), complex points with
/// imaginary part in (0.1, r), weights in (0.2, 1).
pub fn random_atoms(real: usize, complex: usize, radius: f64, rng: &mut ChaCha8Rng) -> Atoms {
    let mut u = |a: f64, b: f64| rng.random_range(a..b);
    let real = (0..real).map(|_| (u(-radius, radius), u(0.2, 1.0))).collect();
    let complex = (0..complex).map(|_| (C64::new(u(-radius, radius), u(0.1, radius)), u(0.2, 1.0))).collect();
    Atoms { real, complex }
}

/// Atoms suited to a kind: mixed for the orthogonal family, real only for
/// SE, complex only for GinSE.
pub fn random_atoms_for(kind: EnsembleKind, rng: &mut ChaCha8Rng) -> Atoms {
    match kind {
        EnsembleKind::SE => random_atoms(MAX_ATOMS, 0, 1.2, rng),
        EnsembleKind::GinSE => random_atoms(0, 6, 1.2, rng),
        _ => random_atoms(5, 3, 1.2, rng),
    }
}
