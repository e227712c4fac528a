use std::fs;

use posthoc_core::harness::pipeline::{run_benchmark, BenchConfig, DatasetSource, MethodSpec};
use posthoc_core::harness::report::{cluster_table_csv, emit_report, read_bundle, ReportFormat};
use posthoc_core::harness::sim::{SignalRegion, SimConfig};

fn small_config(seed: u64, with_signal: bool) -> BenchConfig {
    let regions = if with_signal {
        vec![SignalRegion { center: [4.0, 4.0, 4.0], radius: 2.5, effect: 1.5 }]
    } else {
        Vec::new()
    };
    BenchConfig {
        methods: vec![MethodSpec::Simes, MethodSpec::Ari, MethodSpec::Notip { k: None }, MethodSpec::Pari { delta: 5 }],
        alpha: 0.1,
        b: 100,
        b_train: 100,
        b_calib: 50,
        z_thresholds: vec![2.5, 3.0, 3.5],
        seed,
        curve_points: Some(20),
        dataset: DatasetSource::Simulated(SimConfig {
            dims: [10, 10, 8],
            n_subjects: 12,
            sigma: 1.0,
            regions,
            seed,
            ..SimConfig::default()
        }),
        ..BenchConfig::default()
    }
}

#[test]
fn svgs_are_well_formed_xml() {
    for seed in 0..10 {
        let bundle = run_benchmark(&small_config(seed, seed % 2 == 0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&bundle, &[ReportFormat::Svg], dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        for f in files {
            let text = fs::read_to_string(&f).unwrap();
            let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
            let meta = doc.descendants().find(|n| n.has_tag_name("metadata")).expect("metadata element");
            let cfg: serde_json::Value = serde_json::from_str(meta.text().unwrap()).unwrap();
            assert_eq!(cfg["seed"], seed);
        }
    }
}

#[test]
fn curve_csv_schema() {
    let bundle = run_benchmark(&small_config(1, true)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&bundle, &[ReportFormat::Csv], dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config: {"));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 2 + bundle.methods().len());
    assert_eq!(&header[..2], &["k", "z_at_k"]);
    for line in lines {
        assert_eq!(line.split(',').count(), header.len());
    }
}

#[test]
fn empty_cluster_list_gives_header_only() {
    let mut cfg = small_config(2, false);
    cfg.z_thresholds = vec![30.0];
    let bundle = run_benchmark(&cfg).unwrap();
    assert!(bundle.tables[0].rows.is_empty());
    let csv = cluster_table_csv(&bundle.tables[0], &bundle.methods(), "{}").unwrap();
    assert_eq!(csv, "# config: {}\nID,X,Y,Z,PeakStat,Size_mm3,Simes,ARI,Notip,pARI\n");
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = small_config(3, true);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = emit_report(&run_benchmark(&cfg).unwrap(), &ReportFormat::ALL, a.path()).unwrap();
    let fb = emit_report(&run_benchmark(&cfg).unwrap(), &ReportFormat::ALL, b.path()).unwrap();
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
}

#[test]
fn bundle_json_round_trips() {
    let bundle = run_benchmark(&small_config(4, true)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&bundle, &[ReportFormat::Json], dir.path()).unwrap();
    assert_eq!(read_bundle(&dir.path().join("bundle.json")).unwrap(), bundle);
}

#[test]
fn cluster_csv_shows_truncated_reportable_rows() {
    let bundle = run_benchmark(&small_config(5, true)).unwrap();
    let methods = bundle.methods();
    for table in &bundle.tables {
        let csv = cluster_table_csv(table, &methods, "{}").unwrap();
        let rows: Vec<&str> = csv.lines().skip(2).collect();
        assert_eq!(rows.len(), table.reportable().count());
        for (line, row) in rows.iter().zip(table.reportable()) {
            let cells: Vec<&str> = line.split(',').collect();
            for (cell, m) in cells[6..].iter().zip(&methods) {
                let b = row.bounds[m];
                assert_eq!(*cell, format!("{}.{:02}", b.hundredths() / 100, b.hundredths() % 100));
                assert!(cell.parse::<f64>().unwrap() <= b.value());
            }
        }
    }
}

#[test]
fn unwritable_directory_is_io_error() {
    let bundle = run_benchmark(&small_config(6, false)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    let err = emit_report(&bundle, &[ReportFormat::Csv], &file.join("sub")).unwrap_err();
    assert!(matches!(err, posthoc_core::Error::Io(_)));
}

#[test]
fn all_null_ari_clusters_mostly_zero() {
    let mut zero = 0;
    let mut total = 0;
    for seed in 10..20 {
        let mut cfg = small_config(seed, false);
        cfg.methods = vec![MethodSpec::Ari];
        cfg.z_thresholds = vec![3.0];
        let bundle = run_benchmark(&cfg).unwrap();
        for row in &bundle.tables[0].rows {
            total += 1;
            zero += usize::from(row.bounds["ARI"].discoveries == 0);
        }
    }
    assert!(total == 0 || zero * 10 >= total * 8, "{zero}/{total}");
}
