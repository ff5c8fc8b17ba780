use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn nvsvi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvsvi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Data rows as maps from header name to field.
fn rows(csv: &str) -> Vec<Vec<(String, String)>> {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines
        .map(|l| {
            header
                .iter()
                .cloned()
                .zip(l.split(',').map(String::from))
                .collect()
        })
        .collect()
}

fn get<'a>(row: &'a [(String, String)], key: &str) -> &'a str {
    &row.iter()
        .find(|(k, _)| k == key)
        .unwrap_or_else(|| panic!("no column {key}"))
        .1
}

fn getf(row: &[(String, String)], key: &str) -> f64 {
    get(row, key).parse().unwrap()
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn dataset() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic_scan.csv")
}

#[test]
fn preamble_carries_config_hash() {
    let out = stdout(&nvsvi(&["phase"]));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("# nvsvi phase"));
    let hash = lines
        .next()
        .unwrap()
        .strip_prefix("# config_sha256: ")
        .unwrap();
    assert_eq!(hash.len(), 64);

    let config = stdout(&nvsvi(&["config"]));
    assert!(config.starts_with(&format!("# config_sha256: {hash}\n")));
}

#[test]
fn effective_config_reloads_to_same_hash() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, "[geometry]\nthickness_um = 200.0\n");
    let first = stdout(&nvsvi(&["--config", path.to_str().unwrap(), "config"]));
    let dumped = dir.path().join("dumped.toml");
    std::fs::write(&dumped, &first).unwrap();
    let second = stdout(&nvsvi(&["--config", dumped.to_str().unwrap(), "config"]));
    assert_eq!(first, second);
    assert_ne!(first, stdout(&nvsvi(&["config"])));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, "[vibration]\namplitude_pm = 165.2\n");
    let out = nvsvi(&["--config", path.to_str().unwrap(), "phase"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("amplitude_pm"), "{}", stderr(&out));
}

#[test]
fn invalid_value_names_its_key() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, "[geometry]\nradius_um = -250.0\n");
    let out = nvsvi(&["--config", path.to_str().unwrap(), "budget"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("geometry.radius_um"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn malformed_toml_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, "[geometry\nradius_um = 1\n");
    assert_eq!(
        nvsvi(&["--config", path.to_str().unwrap(), "phase"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn missing_files_are_io_errors() {
    let out = nvsvi(&["--config", "/nonexistent/exp.toml", "phase"]);
    assert_eq!(out.status.code(), Some(4));
    let out = nvsvi(&["fit", "/nonexistent/scan.csv"]);
    assert_eq!(out.status.code(), Some(4));
    let out = nvsvi(&["--out", "/nonexistent/dir/out.csv", "phase"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn unknown_method_is_a_config_error() {
    for cmd in ["phase", "budget", "field"] {
        let out = nvsvi(&["--method", "magic", cmd]);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
        assert!(stderr(&out).contains("--method"));
    }
}

#[test]
fn non_convergence_exits_3() {
    // A phase of order 10¹⁵ rad wraps many times, so the time-domain refinement cannot agree.
    let out = nvsvi(&["--method", "timedomain", "phase", "--g", "1"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn output_is_byte_identical_on_rerun() {
    let dir = TempDir::new().unwrap();
    for args in [
        vec!["budget"],
        vec!["simulate", "--seed", "11"],
        vec![
            "curve",
            "--lambda-min-um",
            "10",
            "--lambda-max-um",
            "1000",
            "--n-points",
            "3",
        ],
    ] {
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        for p in [&a, &b] {
            let mut full = vec!["--out", p.to_str().unwrap()];
            full.extend(&args);
            stdout(&nvsvi(&full));
        }
        assert_eq!(
            std::fs::read(&a).unwrap(),
            std::fs::read(&b).unwrap(),
            "{args:?}"
        );
    }
}

#[test]
fn seed_changes_simulation_and_hash() {
    let a = stdout(&nvsvi(&["simulate", "--seed", "1"]));
    let b = stdout(&nvsvi(&["simulate", "--seed", "2"]));
    assert_ne!(a.lines().nth(1), b.lines().nth(1));
    assert_ne!(rows(&a)[0], rows(&b)[0]);
}

#[test]
fn budget_has_six_rows_and_a_quadrature_total() {
    let out = stdout(&nvsvi(&["budget"]));
    let rows = rows(&out);
    assert_eq!(rows.len(), 7);
    let sources: Vec<&str> = rows.iter().map(|r| get(r, "source")).collect();
    assert_eq!(
        sources,
        [
            "angle_theta",
            "distance_d0",
            "diameter",
            "thickness",
            "amplitude",
            "xy_deviation",
            "total"
        ]
    );
    let (rows, total) = rows.split_at(6);
    let quad: f64 = rows
        .iter()
        .map(|r| getf(r, "sigma_g").powi(2))
        .sum::<f64>()
        .sqrt();
    let linear: f64 = rows.iter().map(|r| getf(r, "delta_g")).sum();
    assert!((getf(&total[0], "sigma_g") - quad).abs() <= 1e-12 * quad);
    assert!((getf(&total[0], "delta_g") - linear).abs() <= 1e-12 * linear.abs());
    assert!(getf(&total[0], "lambda_m") == 2e-4);
}

#[test]
fn zero_uncertainties_give_a_zero_budget() {
    let dir = TempDir::new().unwrap();
    let path = write_config(
        &dir,
        "[systematics]\ntheta_sigma_deg = 0.0\nd0_sigma_um = 0.0\ndiameter_sigma_um = 0.0\n\
         thickness_sigma_um = 0.0\namplitude_sigma_nm = 0.0\nxy_offset_um = 0.0\nxy_offset_sigma_um = 0.0\n",
    );
    let out = stdout(&nvsvi(&["--config", path.to_str().unwrap(), "budget"]));
    for row in rows(&out) {
        assert_eq!(getf(&row, "delta_g"), 0.0, "{row:?}");
        assert_eq!(getf(&row, "sigma_g"), 0.0, "{row:?}");
    }
}

#[test]
fn central_reference_shrinks_the_budget() {
    let bound = rows(&stdout(&nvsvi(&["budget"])));
    let central = rows(&stdout(&nvsvi(&["--method", "central", "budget"])));
    let ratio = getf(&bound[6], "sigma_g") / getf(&central[6], "sigma_g");
    // Reference phases 0.0038439 and 0.0011 rad.
    assert!((ratio - 0.003_843_949_578 / 0.0011).abs() < 1e-6, "{ratio}");
}

#[test]
fn curve_with_two_points() {
    let out = stdout(&nvsvi(&[
        "curve",
        "--lambda-min-um",
        "100",
        "--lambda-max-um",
        "330",
        "--n-points",
        "2",
    ]));
    let rows = rows(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(getf(&rows[0], "lambda_m"), 1e-4);
    assert_eq!(getf(&rows[1], "lambda_m"), 3.3e-4);
    assert!(getf(&rows[0], "g_limit") > getf(&rows[1], "g_limit"));
    assert!(getf(&rows[0], "m_b_eV") > getf(&rows[1], "m_b_eV"));
}

#[test]
fn curve_rejects_bad_ranges() {
    for args in [
        [
            "--lambda-min-um",
            "0.01",
            "--lambda-max-um",
            "10",
            "--n-points",
            "3",
        ],
        [
            "--lambda-min-um",
            "10",
            "--lambda-max-um",
            "1",
            "--n-points",
            "3",
        ],
        [
            "--lambda-min-um",
            "1",
            "--lambda-max-um",
            "10",
            "--n-points",
            "1",
        ],
    ] {
        let mut full = vec!["curve"];
        full.extend(args);
        assert_eq!(nvsvi(&full).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn field_agrees_with_closed_form() {
    let out = stdout(&nvsvi(&["field", "--n-points", "4"]));
    let rows = rows(&out);
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert!(getf(row, "rel_diff") < 1e-6, "{row:?}");
    }
}

#[test]
fn clipped_lens_has_no_closed_form() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, "[geometry]\nthickness_um = 100.0\n");
    let out = stdout(&nvsvi(&[
        "--config",
        path.to_str().unwrap(),
        "field",
        "--n-points",
        "2",
    ]));
    for row in rows(&out) {
        assert_eq!(get(&row, "f_closed_per_m"), "NA");
        assert_eq!(get(&row, "rel_diff"), "NA");
        assert!(getf(&row, "f_quad_per_m") > 0.0);
    }
}

#[test]
fn zero_coupling_gives_zero_phase() {
    for method in ["analytic", "timedomain"] {
        let out = stdout(&nvsvi(&["--method", method, "phase", "--g", "0"]));
        assert_eq!(getf(&rows(&out)[0], "phi_rad"), 0.0, "{method}");
    }
}

#[test]
fn phase_methods_agree() {
    let phi = |method: &str| {
        let out = stdout(&nvsvi(&[
            "--method",
            method,
            "phase",
            "--g",
            "1e-19",
            "--lambda-um",
            "50",
        ]));
        getf(&rows(&out)[0], "phi_rad")
    };
    let (a, t) = (phi("analytic"), phi("timedomain"));
    assert!(a.abs() > 1e-5);
    assert!((a - t).abs() < 1e-9, "{a} vs {t}");
}

#[test]
fn variant_flips_the_sign() {
    let phi = |variant: &str| {
        let out = stdout(&nvsvi(&["phase", "--g", "1e-19", "--variant", variant]));
        getf(&rows(&out)[0], "phi_rad")
    };
    let (plus, minus) = (phi("plus"), phi("minus"));
    assert!(plus * minus < 0.0);
    assert!((plus + minus).abs() < 1e-5 * plus.abs());
}

#[test]
fn mass_list_matches_lambda() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, "[hypothesis]\nlambda_um = []\nmass_ev = [9.866e-4]\n");
    let out = stdout(&nvsvi(&["--config", path.to_str().unwrap(), "phase"]));
    let lambda = getf(&rows(&out)[0], "lambda_m");
    assert!((lambda - 2e-4).abs() < 1e-3 * 2e-4, "{lambda}");
}

#[test]
fn bundled_dataset_recovers_the_phase() {
    let out = stdout(&nvsvi(&["fit", dataset().to_str().unwrap()]));
    let row = &rows(&out)[0];
    let (phi, sigma) = (getf(row, "phi_central_rad"), getf(row, "sigma_stat_rad"));
    assert!((sigma - 0.0014).abs() < 1e-5, "{sigma}");
    assert!((phi - 0.0011).abs() < 2.0 * sigma, "{phi}");
    assert_eq!(get(row, "n_points"), "24");
}

#[test]
fn bundled_dataset_regenerates_exactly() {
    let generated = stdout(&nvsvi(&["simulate", "--seed", "0"]));
    assert_eq!(generated, std::fs::read_to_string(dataset()).unwrap());
}

#[test]
fn fit_rejects_bad_data() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("missing.csv", "phi_mw_rad,I\n0.1,0.2\n", "sigma_I"),
        ("nan.csv", "phi_mw_rad,I,sigma_I\n0.1,NaN,0.01\n", "row 1"),
        ("empty.csv", "phi_mw_rad,I,sigma_I\n", "no data"),
    ];
    for (name, text, needle) in cases {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        let out = nvsvi(&["fit", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(stderr(&out).contains(needle), "{name}: {}", stderr(&out));
    }
}

#[test]
fn fit_reads_columns_by_name() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("reordered.csv");
    let mut text = String::from("# hand written\nsigma_I,I,phi_mw_rad\n");
    for i in 0..8 {
        let p = i as f64 * std::f64::consts::PI / 4.0;
        text.push_str(&format!("0.001,{},{p}\n", -(p.sin() * 0.02f64.sin())));
    }
    std::fs::write(&path, text).unwrap();
    let out = stdout(&nvsvi(&["fit", path.to_str().unwrap()]));
    let phi = getf(&rows(&out)[0], "phi_central_rad");
    assert!((phi - 0.02).abs() < 1e-9, "{phi}");
}
