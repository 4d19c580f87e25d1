use std::fs;

use ginibre_tau::moments::{moment_pair_cached, MomentKey};
use ginibre_tau::{EnsembleKind, EnsembleSpec, QuadSettings};
use ginibre_tau_cli::DiskStore;

fn spec() -> EnsembleSpec {
    EnsembleSpec::new(EnsembleKind::OE, 1).with_s(vec![0.0, 0.4])
}

#[test]
fn second_run_hits_without_quadrature() {
    let dir = tempfile::tempdir().unwrap();
    let q = QuadSettings::default();
    let first = DiskStore::open(dir.path()).unwrap();
    let a = moment_pair_cached(&spec(), 6, &q, &first).unwrap();
    assert_eq!(first.computations(), 1);

    let second = DiskStore::open(dir.path()).unwrap();
    let b = moment_pair_cached(&spec(), 6, &q, &second).unwrap();
    assert_eq!(second.computations(), 0);
    assert_eq!(second.hits(), 1);
    assert_eq!(a, b, "tables must survive the disk round trip bit for bit");
}

#[test]
fn changed_s_misses() {
    let dir = tempfile::tempdir().unwrap();
    let q = QuadSettings::default();
    let store = DiskStore::open(dir.path()).unwrap();
    moment_pair_cached(&spec(), 6, &q, &store).unwrap();
    moment_pair_cached(&spec().with_s(vec![0.0, 0.3]), 6, &q, &store).unwrap();
    assert_eq!(store.computations(), 2);
    assert_eq!(store.hits(), 0);
}

#[test]
fn damaged_entries_are_recomputed_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let q = QuadSettings::default();
    let store = DiskStore::open(dir.path()).unwrap();
    let good = moment_pair_cached(&spec(), 6, &q, &store).unwrap();
    let path = store.path_for(&MomentKey::new(&spec(), 6, &q));

    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, &text[..text.len() / 2]).unwrap();
    let again = DiskStore::open(dir.path()).unwrap();
    assert_eq!(moment_pair_cached(&spec(), 6, &q, &again).unwrap(), good);
    assert_eq!((again.computations(), again.warnings()), (1, 1));

    // flipped digit with intact length
    let text = fs::read_to_string(&path).unwrap();
    let pos = text.rfind(|c: char| c.is_ascii_digit() && c != '9').unwrap();
    let mut bytes = text.into_bytes();
    bytes[pos] += 1;
    fs::write(&path, bytes).unwrap();
    let third = DiskStore::open(dir.path()).unwrap();
    assert_eq!(moment_pair_cached(&spec(), 6, &q, &third).unwrap(), good);
    assert_eq!((third.computations(), third.warnings()), (1, 1));

    let fourth = DiskStore::open(dir.path()).unwrap();
    moment_pair_cached(&spec(), 6, &q, &fourth).unwrap();
    assert_eq!((fourth.computations(), fourth.warnings()), (0, 0));
}

#[test]
fn keys_separate_every_parameter() {
    let q = QuadSettings::default();
    let base = MomentKey::new(&spec(), 6, &q);
    let variants = [
        MomentKey::new(&spec().with_l(-1), 6, &q),
        MomentKey::new(&spec(), 7, &q),
        MomentKey::new(&spec().with_mix(0.5, 1.0), 6, &q),
        MomentKey::new(&spec(), 6, &QuadSettings { tol: 1e-9, ..q }),
        MomentKey::new(&EnsembleSpec::new(EnsembleKind::SE, 1).with_s(vec![0.0, 0.4]), 6, &q),
    ];
    for v in &variants {
        assert_ne!(v, &base);
    }
}
