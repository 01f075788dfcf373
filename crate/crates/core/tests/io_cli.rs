use std::path::Path;
use std::process::Command;

use ndarray::array;

use srcek::bfgs::BfgsOptions;
use srcek::cli;
use srcek::cv::CvPlan;
use srcek::data_io::report::report_to_string;
use srcek::data_io::{load_dataset_csv, read_report, write_dataset_csv, write_report, CsvOptions};
use srcek::objective::{ObjectiveConfig, ObjectiveKind};
use srcek::selection::{srcek_select, Criterion, SelectionConfig, SelectionReport};
use srcek::{Dataset, SrcekError};

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn small_report(x: ndarray::Array2<f64>, y: ndarray::Array1<f64>) -> SelectionReport {
    let m = y.len();
    let d = Dataset::new(x, y).unwrap();
    let cfg = SelectionConfig {
        objective: ObjectiveConfig {
            kind: ObjectiveKind::EmbeddedAbic,
            p: 1.0,
            q: 2.0,
            factors: 1,
            plan: CvPlan::interleaved(m, 3).unwrap(),
        },
        optimizer: BfgsOptions::default(),
        k_max: None,
        criterion: Criterion::MinAbic,
        post_optimize: false,
        seed: 0,
    };
    srcek_select(&d, &cfg).unwrap()
}

#[test]
fn csv_with_header_keeps_labels() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "t.csv", "a,b,y\n1,2,3\n4,5,6\n7,8,9.5\n");
    let d = load_dataset_csv(&p, &CsvOptions::default()).unwrap();
    assert_eq!(d.x, array![[1.0, 2.0], [4.0, 5.0], [7.0, 8.0]]);
    assert_eq!(d.y, array![3.0, 6.0, 9.5]);
    assert_eq!(d.channel_labels.as_deref(), Some(&["a".to_string(), "b".to_string()][..]));
}

#[test]
fn csv_blank_trailing_line_is_ignored() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "t.csv", "a,b,y\n1,2,3\n4,5,6\n7,8,9\n\n");
    let d = load_dataset_csv(&p, &CsvOptions::default()).unwrap();
    assert_eq!(d.n_objects(), 3);
}

#[test]
fn csv_non_numeric_cell_names_its_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "t.csv", "a,b,y\n1,2,3\n4,5,oops\n7,8,9\n");
    match load_dataset_csv(&p, &CsvOptions::default()) {
        Err(e @ SrcekError::Parse { row: 2, column: 3, .. }) => {
            assert!(e.to_string().contains("row 2, column 3"), "{e}");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn csv_ragged_row_and_missing_response_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "t.csv", "a,b,y\n1,2,3\n4,5\n");
    assert!(matches!(
        load_dataset_csv(&p, &CsvOptions::default()),
        Err(SrcekError::Parse { row: 2, .. })
    ));
    let p = write(dir.path(), "u.csv", "a,b,y\n1,2,3\n4,5,6\n");
    let opts = CsvOptions {
        response_column: Some("z".into()),
        ..CsvOptions::default()
    };
    assert!(load_dataset_csv(&p, &opts).is_err());
}

#[test]
fn csv_selects_response_and_weight_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "t.csv", "y;w;a\n1;2;3\n4;0.5;6\n");
    let opts = CsvOptions {
        delimiter: b';',
        header: true,
        response_column: Some("1".into()),
        weight_column: Some("w".into()),
    };
    let d = load_dataset_csv(&p, &opts).unwrap();
    assert_eq!(d.y, array![1.0, 4.0]);
    assert_eq!(d.gamma, array![2.0, 0.5]);
    assert_eq!(d.x, array![[3.0], [6.0]]);
}

#[test]
fn csv_write_then_read_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = Dataset::with_gamma(
        array![[1.5, -2.0], [0.25, 3.0], [7.0, 1e-3]],
        array![1.0, 2.0, 3.0],
        array![1.0, 2.0, 0.5],
    )
    .unwrap();
    let p = dir.path().join("d.csv");
    write_dataset_csv(&d, &p).unwrap();
    let opts = CsvOptions {
        response_column: Some("y".into()),
        weight_column: Some("gamma".into()),
        ..CsvOptions::default()
    };
    let back = load_dataset_csv(&p, &opts).unwrap();
    assert_eq!(back.x, d.x);
    assert_eq!(back.y, d.y);
    assert_eq!(back.gamma, d.gamma);
}

#[test]
fn report_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let r = small_report(
        array![[1.0, 0.3], [2.0, -0.1], [3.0, 0.7], [4.0, 0.2], [5.0, -0.4], [6.0, 0.9]],
        array![2.1, 3.9, 6.2, 8.0, 9.8, 12.1],
    );
    let p = dir.path().join("r.json");
    write_report(&r, &p).unwrap();
    assert_eq!(read_report(&p).unwrap(), r);
}

#[test]
fn report_with_no_candidates_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let r = small_report(ndarray::Array2::from_elem((6, 2), 1.0), array![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert!(r.candidates.is_empty());
    let text = report_to_string(&r).unwrap();
    assert!(text.contains("\"candidates\": []"));
    let p = dir.path().join("r.json");
    write_report(&r, &p).unwrap();
    assert_eq!(read_report(&p).unwrap(), r);
}

#[test]
fn unwritable_report_path_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let r = small_report(ndarray::Array2::from_elem((6, 2), 1.0), array![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let p = dir.path().join("missing").join("r.json");
    let err = write_report(&r, &p).unwrap_err();
    assert!(err.to_string().contains(&p.display().to_string()), "{err}");
}

#[test]
fn gradcheck_command_succeeds() {
    assert_eq!(cli::run(["srcek", "gradcheck"]), 0);
    for row in cli::gradcheck(3, 20, 8, 2).unwrap() {
        assert!(row.max_rel_error < 1e-5, "{}: {}", row.name, row.max_rel_error);
    }
}

#[test]
fn help_and_unknown_flags() {
    assert_eq!(cli::run(["srcek", "--help"]), 0);
    assert_eq!(cli::run(["srcek", "select", "--no-such-flag"]), 2);
    let out = Command::new(env!("CARGO_BIN_EXE_srcek"))
        .args(["select", "--help"])
        .output()
        .unwrap();
    let help = String::from_utf8(out.stdout).unwrap();
    for flag in ["--data", "--l", "--objective", "--cv", "--max-iter", "--post-optimize", "--output"] {
        assert!(help.contains(flag), "missing {flag}");
    }
}

#[test]
fn select_smoke_run_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let code = cli::run([
        "srcek",
        "select",
        "--artif",
        "--artif-objects",
        "120",
        "--artif-channels",
        "60",
        "--l",
        "2",
        "--cv-folds",
        "10",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let r = read_report(&out).unwrap();
    assert_eq!(r.config.factors, 2);
    assert_eq!(r.config.n_channels, 60);
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let cfg = write(
        dir.path(),
        "srcek.conf",
        &format!(
            "# smoke settings\nartif = true\nartif-objects = 120\nartif-channels = 50\nl = 2\ncv-folds = 8\nseed = 3\noutput = {}\n",
            out.display()
        ),
    );
    let code = cli::run(["srcek", "select", "--config", cfg.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(code, 0);
    let r = read_report(&out).unwrap();
    assert_eq!(r.config.seed, 5);
    assert_eq!(r.config.factors, 2);
    assert_eq!(r.config.n_channels, 50);
}

#[test]
fn select_reads_csv_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("c1,c2,c3,y\n");
    for i in 0..12 {
        let a = i as f64;
        let b = ((i * 7) % 5) as f64;
        let c = ((i * 3) % 4) as f64 - 1.5;
        text.push_str(&format!("{a},{b},{c},{}\n", 2.0 * a - b + 0.1 * c));
    }
    let data = write(dir.path(), "d.csv", &text);
    let out = dir.path().join("r.json");
    let code = cli::run([
        "srcek",
        "select",
        "--data",
        data.to_str().unwrap(),
        "--l",
        "1",
        "--cv",
        "interleaved",
        "--cv-groups",
        "4",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let r = read_report(&out).unwrap();
    assert_eq!(r.config.n_objects, 12);
    if let Some(labels) = &r.winner.channel_labels {
        assert_eq!(labels.len(), r.winner.channels.len());
    }
}

#[test]
fn missing_data_file_is_a_runtime_error() {
    assert_eq!(cli::run(["srcek", "fit", "--data", "/nonexistent/d.csv", "--l", "1"]), 1);
}
