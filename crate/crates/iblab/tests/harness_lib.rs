use iblab::config::{overlay, List, Seeds};
use iblab::io::{read_dataset, write_dataset};
use iblab_core::data::{gen_subgaussian, EntryDist, Labels};
use proptest::prelude::*;
use serde::{Deserialize, Serialize};
use tempfile::TempDir;

#[derive(Debug, PartialEq, Serialize, Deserialize)]
struct Knobs {
    n: usize,
    tol: f64,
    name: String,
}

#[test]
fn dataset_round_trip() {
    let dir = TempDir::new().unwrap();
    let ds = gen_subgaussian(5, 17, &vec![1.0; 17], EntryDist::Gaussian, 3).unwrap();
    let prefix = dir.path().join("ds");
    write_dataset(&prefix, &ds, None).unwrap();
    let back = read_dataset(&prefix).unwrap();
    assert_eq!(back.x.nrows(), 5);
    assert_eq!(back.x.ncols(), 17);
    assert!((&back.x - &ds.x).amax() == 0.0);
    assert_eq!(back.labels, ds.labels);
}

#[test]
fn multiclass_dataset_round_trip() {
    let dir = TempDir::new().unwrap();
    let ds = gen_subgaussian(6, 20, &vec![1.0; 20], EntryDist::Rademacher, 4).unwrap();
    let ds = ds.with_labels(Labels::Multiclass { classes: vec![0, 1, 2, 0, 1, 2], k: 3 }).unwrap();
    let prefix = dir.path().join("mc");
    write_dataset(&prefix, &ds, None).unwrap();
    assert_eq!(read_dataset(&prefix).unwrap().labels, ds.labels);
}

#[test]
fn overlay_without_file_is_identity() {
    let knobs = Knobs { n: 3, tol: 1e-8, name: "a".into() };
    assert_eq!(overlay(knobs, None).unwrap(), Knobs { n: 3, tol: 1e-8, name: "a".into() });
}

#[test]
fn overlay_replaces_listed_keys_only() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, r#"{"tol": 0.5, "schema_version": "1"}"#).unwrap();
    let knobs = overlay(Knobs { n: 3, tol: 1e-8, name: "a".into() }, Some(&path)).unwrap();
    assert_eq!(knobs, Knobs { n: 3, tol: 0.5, name: "a".into() });
}

#[test]
fn overlay_rejects_bad_files() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("c.json");
    let base = || Knobs { n: 3, tol: 1e-8, name: "a".into() };
    for text in [r#"{"extra": 1}"#, r#"[1, 2]"#, r#"{"n": "three"}"#, "not json"] {
        std::fs::write(&path, text).unwrap();
        let err = overlay(base(), Some(&path)).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{text}: {err}");
    }
}

#[test]
fn seed_ranges_are_half_open() {
    assert_eq!("0..4".parse::<Seeds>().unwrap().0, vec![0, 1, 2, 3]);
    assert_eq!("5,1,9".parse::<Seeds>().unwrap().0, vec![5, 1, 9]);
    assert!("3..x".parse::<Seeds>().is_err());
    assert!("1,,2".parse::<List<u64>>().is_err());
}

proptest! {
    #[test]
    fn list_parse_inverts_join(values in prop::collection::vec(0u32..100_000, 1..12)) {
        let text = values.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        prop_assert_eq!(text.parse::<List<u32>>().unwrap().0, values);
    }

    #[test]
    fn seed_range_length(lo in 0u64..1000, len in 0u64..50) {
        let seeds = format!("{lo}..{}", lo + len).parse::<Seeds>().unwrap().0;
        prop_assert_eq!(seeds.len() as u64, len);
        prop_assert!(seeds.windows(2).all(|w| w[1] == w[0] + 1));
    }
}
