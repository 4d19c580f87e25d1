//! Named experiments that pit the series against the oracles and report
//! pass/fail verdicts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::moments::{self, EnsembleKind, EnsembleSpec, Family, MomentStore, PlaneParams, QuadSettings};
use crate::oracle::{self, HaarPayload};
use crate::quad;
use crate::skewlin::pfaffian;
use crate::symfun::{c_factor, CouplingSeq};
use crate::tauseries::{self, Group, TauFamily};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cutoffs {
    pub w: usize,
    pub quad: QuadSettings,
    pub samples: usize,
    pub seed: u64,
}

impl Default for Cutoffs {
    fn default() -> Self {
        Self { w: 10, quad: QuadSettings::default(), samples: 100_000, seed: 42 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Comparison {
    /// Deformation ratio of the series against the eigenvalue integral.
    SeriesVsOracleRatio,
    /// prefactor·Pf[K] against the determinant average, two insertion points.
    KernelVsOracle { p: Vec<C64> },
    /// Residual of the difference equation must fall by `min_factor` per cutoff step.
    HirotaDecay { cutoffs: Vec<usize>, alpha: f64, beta: f64, charge: usize, min_factor: f64 },
    /// Truncated group series against Haar Monte Carlo, in standard errors.
    GroupSeriesVsMc { group: Group },
    /// Atomic measures, largest relative mismatch over random trials.
    DiscreteExact { trials: usize },
    WavePoly { samples: Vec<C64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub name: String,
    pub spec: EnsembleSpec,
    pub cutoffs: Cutoffs,
    pub tolerance: f64,
    pub comparison: Comparison,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    /// measured / tolerance; below 1 passes
    pub margin: f64,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
    pub error: Option<String>,
}

impl Verdict {
    fn failed(e: &Experiment, err: Error) -> Self {
        Verdict {
            name: e.name.clone(),
            pass: false,
            margin: f64::INFINITY,
            measured: f64::NAN,
            tolerance: e.tolerance,
            detail: String::new(),
            error: Some(err.to_string()),
        }
    }
}

struct Outcome {
    measured: f64,
    detail: String,
    pass: Option<bool>,
}

/// Runs one experiment; module errors become a failed verdict.
pub fn run_experiment(e: &Experiment, store: &dyn MomentStore) -> Verdict {
    if e.tolerance.is_nan() || e.tolerance <= 0.0 {
        return Verdict::failed(e, Error::Invalid("tolerance must be positive".into()));
    }
    match evaluate(e, store) {
        Ok(o) => {
            let within = o.measured <= e.tolerance;
            Verdict {
                name: e.name.clone(),
                pass: o.pass.unwrap_or(true) && within,
                margin: o.measured / e.tolerance,
                measured: o.measured,
                tolerance: e.tolerance,
                detail: o.detail,
                error: None,
            }
        }
        Err(err) => Verdict::failed(e, err),
    }
}

/// Runs experiments in parallel; verdicts keep the input order.
pub fn run_suite(experiments: &[Experiment], store: &dyn MomentStore) -> Vec<Verdict> {
    experiments.par_iter().map(|e| run_experiment(e, store)).collect()
}

fn evaluate(e: &Experiment, store: &dyn MomentStore) -> Result<Outcome> {
    let (spec, cut) = (&e.spec, &e.cutoffs);
    match &e.comparison {
        Comparison::SeriesVsOracleRatio => series_ratio(spec, cut, store),
        Comparison::KernelVsOracle { p } => kernel_check(spec, p, &cut.quad),
        Comparison::HirotaDecay { cutoffs, alpha, beta, charge, min_factor } => {
            hirota_decay(spec, cutoffs, *alpha, *beta, *charge, *min_factor, &cut.quad, store)
        }
        Comparison::GroupSeriesVsMc { group } => {
            let series = tauseries::group_series(*group, &spec.t, cut.w);
            let mc = oracle::haar_expectation_mc(*group, &HaarPayload::ExpTrace(spec.t.clone()), cut.samples, cut.seed)?;
            let se = mc.error_estimate.max(f64::MIN_POSITIVE);
            Ok(Outcome {
                measured: (series - mc.value.re).abs() / se,
                detail: format!("series {series:.10} mc {:.10} se {:.3e}", mc.value.re, mc.error_estimate),
                pass: None,
            })
        }
        Comparison::DiscreteExact { trials } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cut.seed);
            let mut worst: f64 = 0.0;
            for _ in 0..*trials {
                let atoms = oracle::random_atoms_for(spec.kind, &mut rng);
                worst = worst.max(oracle::discrete_consistency(spec, &atoms, cut.w.max(oracle::DISCRETE_CUTOFF))?.relative_error());
            }
            Ok(Outcome { measured: worst, detail: format!("{trials} trials"), pass: None })
        }
        Comparison::WavePoly { samples } => {
            let r = tauseries::wave_polynomial_check(spec, cut.w, samples, &cut.quad, store)?;
            Ok(Outcome {
                measured: r.fit_deviation.max(r.side_deviation),
                detail: format!("fit {:.3e} sides {:.3e}", r.fit_deviation, r.side_deviation),
                pass: None,
            })
        }
    }
}

fn sign_nl(spec: &EnsembleSpec) -> f64 {
    if (spec.n as i64 * spec.l).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

const VANISHING: f64 = 1e-9;
const REFERENCE_T: f64 = 0.2;

/// (−1)^{NL} c(t,s) J and c(t,s)·series, each over its value at t = s = 0,
/// or at t = (0.2) when the undeformed value is zero.
fn series_ratio(spec: &EnsembleSpec, cut: &Cutoffs, store: &dyn MomentStore) -> Result<Outcome> {
    let zero = spec.undeformed();
    if spec.kind == EnsembleKind::GinUE {
        let n = spec.n;
        let det = |s: &EnsembleSpec| -> Result<C64> { Ok(moments::complex_bimoment_matrix(s, n, &cut.quad)?.det()) };
        let r_series = det(spec)? / det(&zero)?;
        let r_oracle = oracle::ginue_direct(spec, &cut.quad)?.value / oracle::ginue_direct(&zero, &cut.quad)?.value;
        let measured = (r_series / r_oracle - 1.0).norm();
        return Ok(Outcome { measured, detail: format!("det ratio {r_series:.12} direct {r_oracle:.12}"), pass: None });
    }
    let sign = sign_nl(spec);
    let j = oracle::eigen_integral(spec, &cut.quad)?.value;
    let mut base = zero;
    let mut j0 = oracle::eigen_integral(&base, &cut.quad)?.value;
    if j0.norm() < VANISHING * j.norm() {
        // odd integrand at t = s = 0: normalize at a nearby coupling instead
        let t_ref = if spec.t.get(1) == REFERENCE_T { -REFERENCE_T } else { REFERENCE_T };
        base = base.with_t(vec![t_ref]);
        j0 = oracle::eigen_integral(&base, &cut.quad)?.value;
    }
    let value = |s: &EnsembleSpec| -> Result<C64> {
        let tau = tauseries::tau_series(s, cut.w, &cut.quad, store)?;
        let t = s.t.with_order(cut.w.max(s.t.order()));
        Ok(tau.evaluate(&t) * c_factor(&s.t, &s.s))
    };
    let r_series = value(spec)? / value(&base)?;
    let r_oracle = (j * sign * c_factor(&spec.t, &spec.s)) / (j0 * sign * c_factor(&base.t, &base.s));
    let measured = (r_series / r_oracle - 1.0).norm();
    let note = if base.t.order() > 0 { format!(" (base t1={})", base.t.get(1)) } else { String::new() };
    Ok(Outcome { measured, detail: format!("series {r_series:.12} oracle {r_oracle:.12}{note}"), pass: None })
}

/// Relation between the determinant average and the kernel Pfaffian for two
/// insertion points: (eigenvalue spec, effective points, constant).
fn kernel_setup(spec: &EnsembleSpec, p: &[C64]) -> Result<(EnsembleSpec, Vec<C64>, C64)> {
    if p.len() != 2 || spec.charge() != 2 {
        return Err(Error::Invalid("the kernel identity is checked for two points at charge 2".into()));
    }
    Ok(match spec.kind {
        EnsembleKind::OE | EnsembleKind::GinOE => (spec.clone(), p.to_vec(), C64::new(2.0, 0.0)),
        EnsembleKind::SE => (spec.clone(), vec![p[0], p[0], p[1], p[1]], C64::new(1.0, 0.0)),
        EnsembleKind::GinSE => (spec.clone(), p.to_vec(), C64::new(0.0, 1.0)),
        EnsembleKind::GinUE => return Err(Error::Invalid("no kernel identity for GinUE".into())),
    })
}

/// K*_12 with sgn(x − y) in place of |x − y|, real orthogonal sector only.
fn sgn_variant(spec: &EnsembleSpec, p: &[C64], q: &QuadSettings) -> Result<C64> {
    let radius = moments::insertion_radius(p);
    let layout = moments::clipped_real_layout(spec, 0.5, 1.0, spec.l.max(0) as usize + 2, radius);
    let (t, s, l) = (&spec.t, &spec.s, spec.l);
    let w = |x: f64| {
        let z = C64::new(x, 0.0);
        let ins = ((C64::new(1.0, 0.0) - z * p[0]) * (C64::new(1.0, 0.0) - z * p[1])).inv();
        ins * ((-0.5 * x * x + crate::symfun::potential(x, t)).exp() * moments::dressing(x, s, 1.0) * x.powi(l as i32))
    };
    let phi = |_: f64, out: &mut [C64]| out[0] = C64::new(1.0, 0.0);
    let r = quad::refine(|level| moments::sgn_bimoments(&layout, level, &w, &phi, 1).0, q.tol, q.max_level)?;
    Ok(r.values[0] * spec.beta)
}

fn kernel_check(spec: &EnsembleSpec, p: &[C64], q: &QuadSettings) -> Result<Outcome> {
    let (lhs_spec, p_eff, constant) = kernel_setup(spec, p)?;
    let km = moments::kernel_matrix(spec, p, q)?;
    let prefactor = (p[1] - p[0]).inv();
    let rhs = pfaffian(&km.k)? * prefactor;
    let lhs = oracle::det_average_lhs(&lhs_spec, &p_eff, q)?.value * constant;
    let measured = (rhs / lhs - 1.0).norm();
    let mut detail = format!("abs variant: lhs {lhs:.12} pf {rhs:.12}");
    if spec.kind.family() == Family::Orthogonal && spec.uses_real_sector() {
        let s = sgn_variant(spec, p, q)? * (p[1] - p[0]) * prefactor;
        detail.push_str(&format!("; sgn variant pf {s:.3e}"));
    }
    Ok(Outcome { measured, detail, pass: None })
}

#[allow(clippy::too_many_arguments)]
fn hirota_decay(
    spec: &EnsembleSpec,
    cutoffs: &[usize],
    alpha: f64,
    beta: f64,
    charge: usize,
    min_factor: f64,
    q: &QuadSettings,
    store: &dyn MomentStore,
) -> Result<Outcome> {
    if cutoffs.len() < 2 {
        return Err(Error::Invalid("hirota decay needs at least two cutoffs".into()));
    }
    let aux = spec.kind.family() == Family::Symplectic;
    let t: CouplingSeq = spec.t.clone();
    let mut residuals = Vec::with_capacity(cutoffs.len());
    for &w in cutoffs {
        let fam = TauFamily::from_spec(spec, charge + 2, w, aux, q, store)?;
        residuals.push(tauseries::hirota_residual(&fam, charge, &t, alpha, beta)?.relative);
    }
    let factors: Vec<f64> = residuals.windows(2).map(|r| r[0] / r[1]).collect();
    let worst = factors.iter().copied().fold(f64::INFINITY, f64::min);
    let detail = format!(
        "residuals {} factors {}",
        residuals.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(","),
        factors.iter().map(|f| format!("{f:.2}")).collect::<Vec<_>>().join(",")
    );
    Ok(Outcome { measured: 1.0 / worst, detail, pass: Some(worst >= min_factor) })
}

fn exp(name: &str, spec: EnsembleSpec, cutoffs: Cutoffs, tolerance: f64, comparison: Comparison) -> Experiment {
    Experiment { name: name.to_string(), spec, cutoffs, tolerance, comparison }
}

/// Desk-scale suite covering every comparison kind.
pub fn standard_suite(seed: u64) -> Vec<Experiment> {
    let w12 = Cutoffs { w: 12, seed, ..Cutoffs::default() };
    let mut out = Vec::new();
    for (kind, n) in [(EnsembleKind::OE, 1), (EnsembleKind::OE, 2), (EnsembleKind::GinOE, 2), (EnsembleKind::SE, 1), (EnsembleKind::SE, 2), (EnsembleKind::GinSE, 1), (EnsembleKind::GinSE, 2)] {
        for l in [0, 1] {
            let spec = EnsembleSpec::new(kind, n).with_l(l).with_t(vec![0.1, -0.05]);
            out.push(exp(&format!("ratio-{kind}-N{n}-L{l}"), spec, w12.clone(), 1e-4, Comparison::SeriesVsOracleRatio));
        }
    }
    for kind in [EnsembleKind::OE, EnsembleKind::SE] {
        let spec = EnsembleSpec::new(kind, 1).with_t(vec![0.1, -0.05]).with_s(vec![0.0, 0.4]);
        out.push(exp(&format!("ratio-{kind}-N1-s"), spec, w12.clone(), 1e-3, Comparison::SeriesVsOracleRatio));
    }
    out.push(exp(
        "ratio-GinUE-N2",
        EnsembleSpec::new(EnsembleKind::GinUE, 2)
            .with_t(vec![0.2])
            .with_plane(PlaneParams { t_bar: CouplingSeq::new(vec![0.2]), ..PlaneParams::default() }),
        w12.clone(),
        1e-5,
        Comparison::SeriesVsOracleRatio,
    ));
    let p = vec![C64::new(0.1, 0.0), C64::new(-0.1, 0.0)];
    out.push(exp("kernel-OE", EnsembleSpec::new(EnsembleKind::OE, 2), w12.clone(), 1e-4, Comparison::KernelVsOracle { p: p.clone() }));
    out.push(exp("kernel-SE", EnsembleSpec::new(EnsembleKind::SE, 1), w12.clone(), 1e-4, Comparison::KernelVsOracle { p }));
    for kind in [EnsembleKind::SE, EnsembleKind::GinOE] {
        out.push(exp(
            &format!("hirota-{kind}"),
            EnsembleSpec::new(kind, 1).with_t(vec![0.2]),
            w12.clone(),
            1.0,
            Comparison::HirotaDecay { cutoffs: vec![8, 10, 12, 14], alpha: 8.0, beta: 10.0, charge: 1, min_factor: 2.0 },
        ));
    }
    for (name, group) in [("group-J1-O3", Group::Orthogonal(3)), ("group-J2-Sp2", Group::Symplectic(1))] {
        out.push(exp(
            name,
            EnsembleSpec::new(EnsembleKind::OE, 1).with_t(vec![0.2]),
            Cutoffs { w: 8, seed, ..Cutoffs::default() },
            3.0,
            Comparison::GroupSeriesVsMc { group },
        ));
    }
    for kind in [EnsembleKind::OE, EnsembleKind::GinOE, EnsembleKind::SE, EnsembleKind::GinSE] {
        for n in 1..=3 {
            out.push(exp(
                &format!("discrete-{kind}-N{n}"),
                EnsembleSpec::new(kind, n).with_t(vec![0.3, -0.1]),
                Cutoffs { w: oracle::DISCRETE_CUTOFF, seed, ..Cutoffs::default() },
                1e-10,
                Comparison::DiscreteExact { trials: 10 },
            ));
        }
    }
    out.push(exp(
        "wave-SE-N1",
        EnsembleSpec::new(EnsembleKind::SE, 1).with_t(vec![0.2]),
        w12,
        1e-6,
        Comparison::WavePoly { samples: vec![C64::new(2.0, 0.0), C64::new(3.0, 0.0), C64::new(5.0, 0.0)] },
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::MemoryStore;

    fn find(name: &str) -> Experiment {
        standard_suite(42).into_iter().find(|e| e.name == name).unwrap()
    }

    #[test]
    fn se_closed_form_ratio() {
        let e = exp(
            "se",
            EnsembleSpec::new(EnsembleKind::SE, 1).with_t(vec![0.3]),
            Cutoffs { w: 12, ..Cutoffs::default() },
            1e-5,
            Comparison::SeriesVsOracleRatio,
        );
        let v = run_experiment(&e, &MemoryStore::new());
        assert!(v.pass, "{v:?}");
    }

    #[test]
    fn discrete_oe_three() {
        let mut e = find("discrete-OE-N3");
        e.tolerance = 1e-10;
        let v = run_experiment(&e, &MemoryStore::new());
        assert!(v.pass, "{v:?}");
    }

    #[test]
    fn errors_become_failed_verdicts() {
        let e = exp("bad", EnsembleSpec::new(EnsembleKind::OE, 7), Cutoffs::default(), 1e-4, Comparison::SeriesVsOracleRatio);
        let v = run_experiment(&e, &MemoryStore::new());
        assert!(!v.pass && v.error.is_some());
        let mut z = e.clone();
        z.tolerance = 0.0;
        assert!(run_experiment(&z, &MemoryStore::new()).error.unwrap().contains("tolerance"));
    }

    #[test]
    fn kernel_identity_oe() {
        let v = run_experiment(&find("kernel-OE"), &MemoryStore::new());
        assert!(v.pass, "{v:?}");
    }

    #[test]
    fn verdicts_are_deterministic() {
        let e = find("group-J2-Sp2");
        let mut e = e.clone();
        e.cutoffs.samples = 2000;
        let a = run_experiment(&e, &MemoryStore::new());
        let b = run_experiment(&e, &MemoryStore::new());
        assert_eq!(a, b);
    }
}
