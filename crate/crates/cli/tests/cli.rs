use std::path::Path;
use std::process::{Command, Output};

use mdiqkd::decoy::{IntensityGrid, ObservedStats};
use mdiqkd::keyrate::{optimize_intensity, IntensitySearch, SystemConfig};
use mdiqkd::optics::{build_network, DetectorBank, NetworkConfig};
use mdiqkd::protocol::Link;
use mdiqkd::Exec;
use serde_json::Value;

fn mdiqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdiqkd"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = mdiqkd(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn error_object(out: &Output, code: i32) -> Value {
    assert_eq!(
        out.status.code(),
        Some(code),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is one JSON object");
    assert_eq!(v["error"]["exit_code"], code);
    v
}

/// Data rows of a CSV output, split into cells.
fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn header(csv: &str) -> &str {
    csv.lines().find(|l| !l.starts_with('#')).unwrap()
}

/// `key = value` lines printed after a run with `--out`.
fn summary(out: &Output, key: &str) -> String {
    let text = String::from_utf8_lossy(&out.stdout);
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn keyrate_scan_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.csv");
    let run = ok(&[
        "keyrate",
        "--distances-km",
        "0,100,200",
        "--out",
        out.to_str().unwrap(),
    ]);
    let csv = read(&out);
    assert_eq!(
        header(&csv),
        "distance_km,mu_a,mu_b,q11_rect,e11_diag,q_rect,e_rect,key_rate_raw,key_rate"
    );
    let rows = rows(&csv);
    assert_eq!(rows.len(), 3);
    let at_200 = rows.iter().find(|r| r[0] == "200").expect("row at 200 km");
    let lib = optimize_intensity(
        200.0,
        &SystemConfig::standard(),
        &IntensitySearch::default(),
    )
    .unwrap();
    assert_eq!(at_200[8].parse::<f64>().unwrap(), lib.key_rate);
    assert_eq!(at_200[7].parse::<f64>().unwrap(), lib.key_rate_raw);
    assert_eq!(
        rows[0][1].parse::<f64>().unwrap(),
        optimize_intensity(0.0, &SystemConfig::standard(), &IntensitySearch::default())
            .unwrap()
            .mu_a
    );
    summary(&run, "cutoff_km").parse::<f64>().unwrap();
    assert_eq!(summary(&run, "distance_at_40db_km"), "200");
    assert!(!csv.contains('\r'));
}

#[test]
fn rerun_from_output_reproduces_it() {
    let dir = tempfile::tempdir().unwrap();
    for format in ["csv", "json"] {
        let first = dir.path().join(format!("a.{format}"));
        let second = dir.path().join(format!("b.{format}"));
        ok(&[
            "hom",
            "--format",
            format,
            "--fwhm-ps",
            "150",
            "--delays-ps=-300,0,300",
            "--out",
            first.to_str().unwrap(),
        ]);
        ok(&[
            "hom",
            "--format",
            format,
            "--config",
            first.to_str().unwrap(),
            "--out",
            second.to_str().unwrap(),
        ]);
        assert_eq!(read(&first), read(&second), "{format}");
    }
}

#[test]
fn output_is_deterministic_across_execution_modes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = ["keyrate", "--distances-km", "0,50,150"];
    ok(&[&args[..], &["--out", a.to_str().unwrap()]].concat());
    ok(&[&args[..], &["--sequential", "--out", b.to_str().unwrap()]].concat());
    assert_eq!(read(&a), read(&b));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "# bench settings\nmean_photon_number = 0.05\nfwhm_ps = 300.0\n",
    )
    .unwrap();
    let out = ok(&[
        "hom",
        "--config",
        cfg.to_str().unwrap(),
        "--fwhm-ps",
        "100",
        "--delays-ps",
        "0",
    ]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.contains("# mean_photon_number = 0.05\n"));
    assert!(csv.contains("# fwhm_ps = 100.0\n"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.toml");
    std::fs::write(&empty, "distances_km = []\n").unwrap();
    let v = error_object(
        &mdiqkd(&["keyrate", "--config", empty.to_str().unwrap()]),
        2,
    );
    assert_eq!(v["error"]["kind"], "config");

    let typo = dir.path().join("typo.toml");
    std::fs::write(&typo, "efficency = 0.2\n").unwrap();
    error_object(&mdiqkd(&["keyrate", "--config", typo.to_str().unwrap()]), 2);

    error_object(&mdiqkd(&["keyrate", "--efficiency", "1.5"]), 2);
    error_object(&mdiqkd(&["keyrate", "--mu-a", "0.1"]), 2);
    error_object(&mdiqkd(&["nonsense"]), 2);
    error_object(&mdiqkd(&["hom", "--config", "/nonexistent/run.toml"]), 2);
}

#[test]
fn relay_at_alice_shortens_cutoff() {
    let mid = ok(&["keyrate", "--distances-km", "0", "--out", "/dev/null"]);
    let alice = ok(&[
        "keyrate",
        "--distances-km",
        "0",
        "--relay",
        "at_alice",
        "--out",
        "/dev/null",
    ]);
    let mid: f64 = summary(&mid, "cutoff_km").parse().unwrap();
    let alice: f64 = summary(&alice, "cutoff_km").parse().unwrap();
    assert!(alice < mid, "{alice} vs {mid}");
}

#[test]
fn decoy_round_trip_with_ideal_devices() {
    let out = ok(&[
        "decoy",
        "--efficiency",
        "1",
        "--dark-count",
        "0",
        "--misalignment",
        "0",
        "--out",
        "/dev/null",
    ]);
    let e11: f64 = summary(&out, "e11_diag_est").parse().unwrap();
    assert!(e11.abs() < 1e-9);
    let y11: f64 = summary(&out, "y11_rect_est").parse().unwrap();
    assert!((y11 / 0.5 - 1.0).abs() < 1e-6);
    assert_eq!(summary(&out, "clamp_events"), "0");
}

#[test]
fn decoy_rejects_short_grid_and_flags_ill_conditioning() {
    let v = error_object(
        &mdiqkd(&[
            "decoy",
            "--n-max",
            "4",
            "--alice-intensities",
            "0.1,0.2,0.3,0.4",
        ]),
        2,
    );
    assert!(v["error"]["message"]
        .as_str()
        .unwrap()
        .contains("at least 5"));
    let v = error_object(
        &mdiqkd(&[
            "decoy",
            "--alice-intensities",
            "0.1,0.1000000001,0.1000000002,0.1000000003,0.1000000004",
        ]),
        3,
    );
    assert_eq!(v["error"]["kind"], "numerical");
    assert!(v["error"]["message"].as_str().unwrap().contains("stage"));
}

#[test]
fn decoy_estimates_from_observation_file() {
    let link = Link::new(
        build_network(&NetworkConfig::ideal()),
        DetectorBank::ideal(),
    )
    .unwrap();
    let obs = ObservedStats::synthesize(&IntensityGrid::default(), &link, Exec::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.json");
    std::fs::write(&path, serde_json::to_string(&obs).unwrap()).unwrap();
    let out = ok(&[
        "decoy",
        "--observed",
        path.to_str().unwrap(),
        "--format",
        "json",
    ]);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 50);
    assert!(rows.iter().all(|r| r["yield_true"].is_null()));
    // coherent data carry truncation bias at n_max = 4
    let y11 = doc["summary"]["y11_rect_est"].as_f64().unwrap();
    assert!((y11 / 0.5 - 1.0).abs() < 1e-3);
}

#[test]
fn bsm_tables() {
    let ideal = [
        "--efficiency",
        "1",
        "--dark-count",
        "0",
        "--misalignment",
        "0",
    ];
    let out = ok(&[&["bsm"][..], &ideal].concat());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(header(&csv), "alice,bob,psi_minus,psi_plus,fail");
    let table = rows(&csv);
    assert_eq!(table.len(), 16);
    let cell = |a: &str, b: &str, k: usize| -> f64 {
        table.iter().find(|r| r[0] == a && r[1] == b).unwrap()[k]
            .parse()
            .unwrap()
    };
    assert!((cell("H", "V", 2) - 0.5).abs() < 1e-12);
    assert!((cell("H", "V", 3) - 0.5).abs() < 1e-12);
    assert!(cell("D", "D", 2).abs() < 1e-12);

    let out = ok(&[
        &["bsm", "--alice-photons", "0", "--bob-photons", "0"][..],
        &ideal,
    ]
    .concat());
    let rows_vac = rows(&String::from_utf8(out.stdout).unwrap());
    assert!(rows_vac
        .iter()
        .all(|r| r[2] == "0" && r[3] == "0" && r[4] == "1"));

    let out = ok(&[
        &["bsm", "--mode", "coherent", "--mu-a", "0", "--mu-b", "0"][..],
        &ideal,
    ]
    .concat());
    let rows_vac = rows(&String::from_utf8(out.stdout).unwrap());
    assert!(rows_vac.iter().all(|r| r[2] == "0" && r[3] == "0"));
}

#[test]
fn hom_dip_and_edge_cases() {
    let out = ok(&["hom", "--out", "/dev/null"]);
    let dip: f64 = summary(&out, "dip").parse().unwrap();
    assert!((0.50..=0.54).contains(&dip), "{dip}");
    let asymptote: f64 = summary(&out, "asymptote").parse().unwrap();
    assert!((asymptote - 1.0).abs() < 1e-3);

    let single = ok(&["hom", "--delays-ps", "0"]);
    let csv = String::from_utf8(single.stdout).unwrap();
    assert_eq!(header(&csv), "delay_ps,p1,p2,pc,c_norm");
    assert_eq!(rows(&csv).len(), 1);

    let v = error_object(&mdiqkd(&["hom", "--mean-photon-number", "0"]), 2);
    assert!(v["error"]["message"]
        .as_str()
        .unwrap()
        .contains("undefined"));
}
