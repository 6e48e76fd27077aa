//! Full pipeline over the bundled toy corpus.

mod common;

use common::{snapshot, toy_chain};

#[test]
fn toy_chain_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let eval = toy_chain(a.path(), 3, 0);
    toy_chain(b.path(), 3, 1);
    let md = std::fs::read_to_string(eval.join("report.md")).unwrap();
    assert!(md.contains("blobs") && md.contains("stripes"), "{md}");
    assert_eq!(
        std::fs::read_to_string(eval.join("quartiles.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 4 * 4
    );
    assert!(a.path().join("spectra/spectrum_stripes_generator.png").exists());
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (k, v) in &sa {
        assert!(v == &sb[k], "{} differs between runs", k.display());
    }
}

#[test]
fn seed_changes_curation() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    toy_chain(a.path(), 3, 0);
    toy_chain(b.path(), 4, 0);
    let f = "blobs/split_random/train_fake.qcfs";
    assert_ne!(
        std::fs::read(a.path().join(f)).unwrap(),
        std::fs::read(b.path().join(f)).unwrap()
    );
}
