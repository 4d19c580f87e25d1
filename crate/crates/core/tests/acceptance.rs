//! Acceptance run: one PASS/FAIL line per criterion.

use std::time::{Duration, Instant};

use ginibre_tau::fock::{self, Field, FockWindow, Mode};
use ginibre_tau::hub::{self, Comparison, Cutoffs, Experiment, Verdict};
use ginibre_tau::moments::{self, MemoryStore, MomentStore, PlaneParams};
use ginibre_tau::oracle::{self, HaarPayload};
use ginibre_tau::skewlin::pfaffian_combinatorial;
use ginibre_tau::tauseries::{self, Group};
use ginibre_tau::{enumerate_partitions, pfaffian, CMatrix, CouplingSeq, EnsembleKind, EnsembleSpec, QuadSettings, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    pass: bool,
    detail: String,
}

fn report(pass: bool, detail: impl Into<String>) -> Report {
    Report { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit: Duration, r: Report) -> Report {
    let ok = elapsed <= limit;
    Report { pass: r.pass && ok, detail: format!("{}; {:.2}s (limit {}s)", r.detail, elapsed.as_secs_f64(), limit.as_secs()) }
}

fn random_skew(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
    }
    m
}

fn pfaffian_suite() -> Report {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_det, mut worst_comb) = (0.0f64, 0.0f64);
    for n in (2..=12).step_by(2) {
        for _ in 0..20 {
            let m = random_skew(n, &mut rng);
            let pf = pfaffian(&m).unwrap();
            let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| m[(i, j)]);
            let det = dm.determinant();
            worst_det = worst_det.max((pf * pf - det).norm() / det.norm());
            if n <= 8 {
                let c = pfaffian_combinatorial(&m).unwrap();
                worst_comb = worst_comb.max((pf - c).norm() / c.norm());
            }
        }
    }
    let r = report(worst_det < 1e-9 && worst_comb < 1e-12, format!("Pf²/det rel {worst_det:.2e}, elimination vs matchings {worst_comb:.2e}"));
    within(start.elapsed(), Duration::from_secs(1), r)
}

fn ginse_structure() -> Report {
    let start = Instant::now();
    let spec = EnsembleSpec::new(EnsembleKind::GinSE, 3);
    let pair = match moments::moment_pair(&spec, 7, &QuadSettings::default()) {
        Ok(p) => p,
        Err(e) => return report(false, e.to_string()),
    };
    let a = pair.matrix();
    let max = a.max_abs();
    let mut off: f64 = 0.0;
    for i in 0..7 {
        for j in 0..7 {
            if j != i + 1 && i != j + 1 {
                off = off.max(a[(i, j)].norm() / max);
            }
        }
    }
    let mut ratio_err: f64 = 0.0;
    for m in 1..=5 {
        let r = a[(m, m + 1)] / a[(m - 1, m)];
        ratio_err = ratio_err.max((r - (m + 1) as f64).norm());
    }
    let r = report(off < 1e-9 && ratio_err < 1e-6, format!("off-superdiagonal {off:.2e} of max, ratio error {ratio_err:.2e}"));
    within(start.elapsed(), Duration::from_secs(10), r)
}

fn summarize(verdicts: &[Verdict]) -> (bool, String) {
    let pass = verdicts.iter().all(|v| v.pass);
    let worst = verdicts.iter().max_by(|a, b| a.margin.total_cmp(&b.margin)).unwrap();
    let failed: Vec<&str> = verdicts.iter().filter(|v| !v.pass).map(|v| v.name.as_str()).collect();
    let mut s = format!("{} experiments, worst {} at {:.3e} of tolerance", verdicts.len(), worst.name, worst.margin);
    if !failed.is_empty() {
        s.push_str(&format!("; failed: {}", failed.join(", ")));
    }
    if let Some(err) = verdicts.iter().find_map(|v| v.error.clone()) {
        s.push_str(&format!("; first error: {err}"));
    }
    (pass, s)
}

fn exp(name: String, spec: EnsembleSpec, w: usize, tol: f64, comparison: Comparison) -> Experiment {
    Experiment { name, spec, cutoffs: Cutoffs { w, ..Cutoffs::default() }, tolerance: tol, comparison }
}

fn series_ratios(store: &dyn MomentStore) -> Report {
    let start = Instant::now();
    let ts = [vec![0.3], vec![0.1, -0.05]];
    let mut list = Vec::new();
    for kind in [EnsembleKind::OE, EnsembleKind::GinOE, EnsembleKind::SE, EnsembleKind::GinSE] {
        for n in 1..=2 {
            for l in 0..=1 {
                for t in &ts {
                    let spec = EnsembleSpec::new(kind, n).with_l(l).with_t(t.clone());
                    list.push(exp(format!("{kind} N={n} L={l} t={t:?}"), spec, 12, 1e-4, Comparison::SeriesVsOracleRatio));
                }
            }
        }
    }
    for kind in [EnsembleKind::OE, EnsembleKind::SE] {
        for t in &ts {
            let spec = EnsembleSpec::new(kind, 1).with_t(t.clone()).with_s(vec![0.0, 0.4]);
            list.push(exp(format!("{kind} N=1 t={t:?} s=(0,0.4)"), spec, 12, 1e-3, Comparison::SeriesVsOracleRatio));
        }
    }
    let verdicts = hub::run_suite(&list, store);
    let (pass, s) = summarize(&verdicts);
    within(start.elapsed(), Duration::from_secs(300), report(pass, s))
}

fn closed_form(store: &dyn MomentStore) -> Report {
    let spec = EnsembleSpec::new(EnsembleKind::SE, 1);
    let tau = match tauseries::tau_series(&spec, 12, &QuadSettings::default(), store) {
        Ok(t) => t,
        Err(e) => return report(false, e.to_string()),
    };
    let r = tau.evaluate(&CouplingSeq::new(vec![0.3])) / tau.constant_term();
    let err = (r / 0.09f64.exp() - 1.0).norm();
    report(err < 1e-6, format!("ratio {:.12}, relative error {err:.2e}", r.re))
}

fn discrete_exactness() -> Report {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut failure = None;
    for trial in 0..50 {
        let t = CouplingSeq::new(vec![rng.random_range(-0.3..0.3), rng.random_range(-0.1..0.1)]);
        for kind in [EnsembleKind::OE, EnsembleKind::GinOE, EnsembleKind::SE, EnsembleKind::GinSE] {
            let atoms = oracle::random_atoms_for(kind, &mut rng);
            for n in 1..=3 {
                let spec = EnsembleSpec::new(kind, n).with_l(trial % 3).with_t(t.clone());
                match oracle::discrete_consistency(&spec, &atoms, oracle::DISCRETE_CUTOFF) {
                    Ok(r) => worst = worst.max(r.relative_error()),
                    Err(e) => failure = Some(e.to_string()),
                }
            }
        }
    }
    let r = match failure {
        Some(e) => report(false, e),
        None => report(worst < 1e-10, format!("600 comparisons, worst relative error {worst:.2e}")),
    };
    within(start.elapsed(), Duration::from_secs(30), r)
}

fn kernel_identity(store: &dyn MomentStore) -> Report {
    let p = vec![C64::new(0.1, 0.0), C64::new(-0.1, 0.0)];
    let list = vec![
        exp("OE".into(), EnsembleSpec::new(EnsembleKind::OE, 2), 12, 1e-4, Comparison::KernelVsOracle { p: p.clone() }),
        exp("SE".into(), EnsembleSpec::new(EnsembleKind::SE, 1), 12, 1e-4, Comparison::KernelVsOracle { p }),
    ];
    let verdicts = hub::run_suite(&list, store);
    let (pass, s) = summarize(&verdicts);
    let details: Vec<String> = verdicts.iter().map(|v| format!("{}: {}", v.name, v.detail)).collect();
    report(pass, format!("{s}; |x−y| variant used; {}", details.join(" | ")))
}

fn group_integrals(store: &dyn MomentStore) -> Report {
    let samples = 100_000;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for group in [Group::Orthogonal(3), Group::Symplectic(1)] {
        for lambda in enumerate_partitions(4, 4).into_iter().skip(1) {
            let r = match oracle::haar_expectation_mc(group, &HaarPayload::Schur(lambda.clone()), samples, 42) {
                Ok(r) => r,
                Err(e) => return report(false, e.to_string()),
            };
            let diff = (r.value.re - group.schur_average(&lambda)).abs();
            let z = if r.error_estimate > 0.0 { diff / r.error_estimate } else if diff < 1e-12 { 0.0 } else { f64::INFINITY };
            worst = worst.max(z);
            count += 1;
        }
    }
    let list: Vec<Experiment> = [("J1 O(3)", Group::Orthogonal(3)), ("J2 Sp(2)", Group::Symplectic(1))]
        .into_iter()
        .map(|(name, group)| {
            let spec = EnsembleSpec::new(EnsembleKind::OE, 1).with_t(vec![0.2]);
            Experiment {
                name: name.into(),
                spec,
                cutoffs: Cutoffs { w: 8, samples, ..Cutoffs::default() },
                tolerance: 3.0,
                comparison: Comparison::GroupSeriesVsMc { group },
            }
        })
        .collect();
    let verdicts = hub::run_suite(&list, store);
    let (series_ok, s) = summarize(&verdicts);
    report(worst <= 4.0 && series_ok, format!("{count} Schur averages, worst {worst:.2} SE; series: {s}"))
}

fn hirota(store: &dyn MomentStore) -> Report {
    let list: Vec<Experiment> = [EnsembleKind::SE, EnsembleKind::GinOE]
        .into_iter()
        .map(|kind| {
            exp(
                kind.to_string(),
                EnsembleSpec::new(kind, 1).with_t(vec![0.2]),
                12,
                1.0,
                Comparison::HirotaDecay { cutoffs: vec![8, 10, 12, 14], alpha: 8.0, beta: 10.0, charge: 1, min_factor: 2.0 },
            )
        })
        .collect();
    let verdicts = hub::run_suite(&list, store);
    let (pass, _) = summarize(&verdicts);
    let details: Vec<String> = verdicts.iter().map(|v| format!("{}: {}{}", v.name, v.detail, v.error.clone().unwrap_or_default())).collect();
    report(pass, details.join(" | "))
}

fn fock_identities() -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let w = FockWindow::new(-8, 12).unwrap();
    let mut worst_v: f64 = 0.0;
    for n in [2usize, 3] {
        for l in 0..=2i64 {
            for _ in 0..5 {
                let zs: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
                let word: Vec<Field> = zs.iter().map(|z| Field::psi_at(*z, &w)).collect();
                let got = fock::vev(n as i64 + l, &word, l, w).unwrap();
                let mut expect: C64 = zs.iter().map(|z| z.powi(l as i32)).product();
                for i in 0..n {
                    for j in i + 1..n {
                        expect *= zs[i] - zs[j];
                    }
                }
                worst_v = worst_v.max((got - expect).norm());
            }
        }
    }
    let mut worst_w: f64 = 0.0;
    for n in [4usize, 6] {
        for l in [-1i64, 0, 2] {
            let word: Vec<Field> = (0..n)
                .map(|_| {
                    Field(
                        (l - 3..l + 3)
                            .flat_map(|i| [Mode::Psi(i), Mode::PsiDag(i)])
                            .map(|m| (m, C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
                            .collect(),
                    )
                })
                .collect();
            let direct = fock::vev(l, &word, l, w).unwrap();
            let pf = fock::wick_pfaffian(l, &word, w).unwrap();
            worst_w = worst_w.max((direct - pf).norm() / (1.0 + pf.norm()));
        }
    }
    let mut phi_ok = true;
    for l in -3..=3i64 {
        let v = fock::vev(l, &[Field::phi()], l, w).unwrap();
        let sign = if l.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        phi_ok &= v == C64::new(sign * std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let vv = fock::vev(l, &[Field::phi(), Field::phi()], l, w).unwrap();
        phi_ok &= (vv - 0.5).norm() < 1e-15;
    }
    report(
        worst_v < 1e-12 && worst_w < 1e-12 && phi_ok,
        format!("Vandermonde {worst_v:.2e}, Wick {worst_w:.2e}, φ rules {}", if phi_ok { "exact" } else { "violated" }),
    )
}

fn ginue(store: &dyn MomentStore) -> Report {
    let holomorphic = EnsembleSpec::new(EnsembleKind::GinUE, 2).with_t(vec![0.2]);
    let plane = PlaneParams { t_bar: CouplingSeq::new(vec![0.2]), ..PlaneParams::default() };
    let mixed = holomorphic.clone().with_plane(plane);
    let mut pass = true;
    let mut details = Vec::new();
    for (name, spec) in [("t=(0.2)", holomorphic), ("t=t'=(0.2)", mixed)] {
        let v = hub::run_experiment(&exp(name.into(), spec, 12, 1e-5, Comparison::SeriesVsOracleRatio), store);
        pass &= v.pass;
        details.push(format!("{name}: {} relative {:.2e}{}", v.detail, v.measured, v.error.map(|e| format!(" error {e}")).unwrap_or_default()));
    }
    report(pass, details.join(" | "))
}

fn reality(store: &dyn MomentStore) -> Report {
    let q = QuadSettings::default();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let cases = [
        (EnsembleKind::OE, 2, 1, vec![0.0, 0.4]),
        (EnsembleKind::GinOE, 2, 0, vec![]),
        (EnsembleKind::GinOE, 3, 1, vec![]),
        (EnsembleKind::SE, 2, 1, vec![0.0, 0.4]),
        (EnsembleKind::GinSE, 2, 0, vec![]),
        (EnsembleKind::GinSE, 1, 2, vec![]),
    ];
    for (kind, n, l, s) in cases {
        let spec = EnsembleSpec::new(kind, n).with_l(l).with_s(s);
        let tau = match tauseries::tau_series(&spec, 10, &q, store) {
            Ok(t) => t,
            Err(e) => return report(false, format!("{kind}: {e}")),
        };
        for t in [vec![0.0], vec![0.3], vec![0.1, -0.05], vec![-0.2, 0.05, 0.01]] {
            let v = tau.evaluate(&CouplingSeq::new(t));
            worst = worst.max(v.im.abs() / v.re.abs());
            count += 1;
        }
    }
    report(worst <= 1e-8, format!("{count} evaluations, worst |Im|/|Re| {worst:.2e}"))
}

fn main() {
    let store = MemoryStore::new();
    let criteria: Vec<(&str, Box<dyn Fn() -> Report>)> = vec![
        ("Pfaffian suite", Box::new(pfaffian_suite)),
        ("GinSE moment structure", Box::new(ginse_structure)),
        ("series vs oracle ratios", Box::new(|| series_ratios(&store))),
        ("closed-form anchor", Box::new(|| closed_form(&store))),
        ("discrete-measure exactness", Box::new(discrete_exactness)),
        ("kernel identity", Box::new(|| kernel_identity(&store))),
        ("group integrals", Box::new(|| group_integrals(&store))),
        ("Hirota residual decay", Box::new(|| hirota(&store))),
        ("Fock identities", Box::new(fock_identities)),
        ("GinUE bimoments", Box::new(|| ginue(&store))),
        ("reality", Box::new(|| reality(&store))),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let r = run();
        if !r.pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({}) [{:.1}s]",
            i + 1,
            if r.pass { "PASS" } else { "FAIL" },
            name,
            r.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
