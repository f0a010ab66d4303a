use glassflow::io::{
    read_results_csv, read_samples_bin, read_samples_csv, write_results_csv, write_samples_bin, write_samples_csv,
    Manifest, ResultRow, FORMAT_VERSION,
};

#[test]
fn results_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    let rows = vec![
        ResultRow::new("posterior_sweep", "glass", "w2", 0.25)
            .t(0.05)
            .m(4)
            .se(0.01)
            .nfe(4),
        ResultRow::new("fks", "baseline", "mean_reward", -1.5).param("particles=1"),
    ];
    write_results_csv(&path, &rows).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("format_version,experiment,method,t,M,"));
    assert_eq!(read_results_csv(&path).unwrap(), rows);
}

#[test]
fn unknown_format_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    let mut row = ResultRow::new("fks", "baseline", "mean_reward", 1.0);
    row.format_version = FORMAT_VERSION + 1;
    write_results_csv(&path, &[row]).unwrap();
    let err = read_results_csv(&path).unwrap_err().to_string();
    assert!(err.contains("format_version"), "{err}");
}

#[test]
fn samples_binary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.bin");
    let data = vec![1.0, -2.5, f64::MIN_POSITIVE, 3.0e300, 0.1, -0.0];
    write_samples_bin(&path, &data, 2).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 8 + 8 + 8 + 6 * 8);
    let (back, dim) = read_samples_bin(&path).unwrap();
    assert_eq!(dim, 2);
    assert_eq!(
        back.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        data.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert!(write_samples_bin(&path, &data, 4).is_err());
}

#[test]
fn samples_binary_rejects_foreign_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.bin");
    std::fs::write(&path, b"not a samples file at all").unwrap();
    assert!(read_samples_bin(&path).is_err());
}

#[test]
fn samples_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let data = vec![0.1, 0.2, 0.3, -1e-9, 2.0, 1.0 / 3.0];
    write_samples_csv(&path, &data, 3).unwrap();
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("x0,x1,x2\n"));
    assert_eq!(read_samples_csv(&path).unwrap(), (data, 3));
}

#[test]
fn manifest_hash_tracks_config_and_inputs() {
    let cfg = serde_json::json!({"seed": 1, "samples": 10});
    let a = Manifest::new("fks", 1, cfg.clone(), vec![]).unwrap();
    let b = Manifest::new("fks", 1, cfg, vec![]).unwrap();
    assert_eq!(a.content_hash, b.content_hash);
    assert_eq!(a.content_hash.len(), 64);
    let c = Manifest::new("fks", 1, serde_json::json!({"seed": 2, "samples": 10}), vec![]).unwrap();
    assert_ne!(a.content_hash, c.content_hash);
}
