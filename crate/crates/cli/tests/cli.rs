use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

fn freqmux(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqmux"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> HashMap<String, String> {
    let out = freqmux(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    outputs(&String::from_utf8(out.stdout).unwrap())
}

fn outputs(text: &str) -> HashMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.trim_start_matches("out.").to_string(), v.to_string()))
        .collect()
}

fn num(m: &HashMap<String, String>, k: &str) -> f64 {
    m.get(k).unwrap_or_else(|| panic!("missing {k}")).parse().unwrap()
}

fn dir(d: &tempfile::TempDir, name: &str) -> String {
    d.path().join(name).to_string_lossy().into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn vipa_response_reports_width_flatness_and_channels() {
    let d = tempfile::tempdir().unwrap();
    let m = ok(&["vipa-response", "--out-dir", &dir(&d, "a")]);
    let fwhm = num(&m, "fwhm_hz");
    assert!((fwhm / 1.53e9 - 1.0).abs() < 0.15, "{fwhm}");
    assert_eq!(m["flat_response"], "false");

    let m = ok(&["vipa-response", "--rr", "0", "--out-dir", &dir(&d, "b")]);
    assert_eq!(m["flat_response"], "true");

    let m = ok(&["vipa-response", "--channels", "9", "--step-ghz", "0.5", "--out-dir", &dir(&d, "c")]);
    assert_eq!(m["channel_curves"], "9");
    let csv = std::fs::read_to_string(d.path().join("c/channels.csv")).unwrap();
    let channels: std::collections::BTreeSet<&str> =
        csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(channels.len(), 9);
}

#[test]
fn spectrum_round_trip_through_files() {
    let d = tempfile::tempdir().unwrap();
    let m = ok(&["demux-spectrum", "--out-dir", &dir(&d, "s")]);
    assert_eq!(m["detected_peaks"], "20");
    let spectrum = dir(&d, "s/spectrum.csv");
    let m = ok(&["fit-spectrum", &spectrum, "--out-dir", &dir(&d, "f")]);
    let b = num(&m, "half_width_hz");
    assert!((b / 38.3e6 - 1.0).abs() < 0.05, "{b}");
    assert_eq!(m["detected_peaks"], "20");
    let overlay = std::fs::read_to_string(d.path().join("f/overlay.csv")).unwrap();
    assert!(overlay.starts_with("detuning_hz,measured,model\n"));

    let empty = d.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let out = freqmux(&["fit-spectrum", empty.to_str().unwrap(), "--out-dir", &dir(&d, "e")]);
    assert_eq!(code(&out), 4);
}

#[test]
fn simulate_manifest_values() {
    let d = tempfile::tempdir().unwrap();
    let m = ok(&["simulate", "--duration", "0.001", "--mu", "0.125", "--out-dir", &dir(&d, "a")]);
    assert_eq!(num(&m, "expected_g2_ideal"), 10.0);

    let m = ok(&["simulate", "--duration", "0.01", "--mu", "0", "--out-dir", &dir(&d, "b")]);
    // Only darks: 60 Hz and 70 Hz over 10 ms.
    assert!(num(&m, "signal_tags") < 10.0 && num(&m, "idler_tags") < 10.0, "{m:?}");

    let m = ok(&[
        "simulate",
        "--duration",
        "0.002",
        "--idler-excess-loss",
        "0.05",
        "--set",
        "idler_detector=apd",
        "--out-dir",
        &dir(&d, "c"),
    ]);
    let ratio = num(&m, "expected_idler_to_signal_ratio");
    assert!((ratio * 20.0 - 1.0).abs() < 0.01, "{ratio}");
    assert!((num(&m, "measured_idler_to_signal_ratio") * 20.0 - 1.0).abs() < 0.05);
}

#[test]
fn simulate_analyze_pipeline() {
    let d = tempfile::tempdir().unwrap();
    let sim = dir(&d, "sim");
    let m = ok(&["simulate", "--duration", "0.02", "--seed", "3", "--out-dir", &sim]);
    let expected = num(&m, "expected_g2");
    let (sig, idl) = (format!("{sim}/signal.ttag"), format!("{sim}/idler.ttag"));
    let a = ok(&["analyze", &sig, &idl, "--duration", "0.02", "--out-dir", &dir(&d, "a")]);
    let (g, s) = (num(&a, "g2"), num(&a, "sigma"));
    assert!((g - expected).abs() < 3.0 * s, "{g} ± {s} vs {expected}");
    let hist = std::fs::read_to_string(d.path().join("a/histogram.csv")).unwrap();
    assert!(hist.starts_with("bin_start_ps,bin_end_ps,counts\n"));

    let narrow = ok(&["analyze", &sig, &idl, "--window-ns", "0.8333", "--out-dir", &dir(&d, "b")]);
    let ratio = num(&narrow, "g2") / g;
    assert!(ratio > 1.8 && ratio < 2.6, "{ratio}");

    let cs = ok(&["analyze", &sig, &idl, "--cauchy-schwarz", "--out-dir", &dir(&d, "c")]);
    assert!(num(&cs, "cauchy_schwarz_r") > 1.0);

    // Unrelated streams: idler of another seed.
    let other = dir(&d, "other");
    ok(&["simulate", "--duration", "0.02", "--seed", "4", "--out-dir", &other]);
    let u = ok(&["analyze", &sig, &format!("{other}/idler.ttag"), "--out-dir", &dir(&d, "u")]);
    assert!((num(&u, "g2") - 1.0).abs() < 4.0 * num(&u, "sigma"), "{u:?}");
}

#[test]
fn csv_tags_are_accepted_and_bad_headers_rejected() {
    let d = tempfile::tempdir().unwrap();
    let sim = dir(&d, "sim");
    ok(&["simulate", "--duration", "0.005", "--format", "csv", "--out-dir", &sim]);
    let m = ok(&["analyze", &format!("{sim}/signal.csv"), &format!("{sim}/idler.csv"), "--out-dir", &dir(&d, "a")]);
    assert!(num(&m, "g2") > 5.0);

    let bad = d.path().join("bad.ttag");
    std::fs::write(&bad, b"TTAG\x07\0\0\0\0").unwrap();
    let out = freqmux(&["analyze", bad.to_str().unwrap(), bad.to_str().unwrap(), "--out-dir", &dir(&d, "b")]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
}

#[test]
fn grid_summary_and_leakage_switch() {
    let d = tempfile::tempdir().unwrap();
    let m = ok(&["grid", "--duration", "0.01", "--out-dir", &dir(&d, "a")]);
    assert_eq!(m["measured"], "49");
    assert!(num(&m, "diagonal_min") > 2.0);
    assert!(num(&m, "far_max") < 2.0);
    let csv = std::fs::read_to_string(d.path().join("a/grid.csv")).unwrap();
    assert!(csv.starts_with("m_s,m_i,g2,sigma,coincidences,window_ps,diagonal\n"));

    let m = ok(&["grid", "--duration", "0.01", "--signal-leak-modes", "0", "--out-dir", &dir(&d, "b")]);
    assert!((num(&m, "neighbour_max") - 1.0).abs() < 0.15 && (num(&m, "far_max") - 1.0).abs() < 0.15, "{m:?}");

    let hi = ok(&["grid", "--duration", "0.01", "--pump-mw", "1.8", "--out-dir", &dir(&d, "c")]);
    assert!(num(&hi, "diagonal_mean") < num(&ok(&["grid", "--duration", "0.01", "--out-dir", &dir(&d, "a2")]), "diagonal_mean"));
}

#[test]
fn runs_are_deterministic_and_manifests_reingest() {
    let d = tempfile::tempdir().unwrap();
    let a = dir(&d, "a");
    ok(&["simulate", "--duration", "0.002", "--seed", "9", "--mu", "0.3", "--out-dir", &a]);
    let manifest = format!("{a}/manifest.txt");
    let b = dir(&d, "b");
    ok(&["simulate", "--config", &manifest, "--out-dir", &b]);
    for f in ["signal.ttag", "idler.ttag", "manifest.txt"] {
        let x = std::fs::read(Path::new(&a).join(f)).unwrap();
        let y = std::fs::read(Path::new(&b).join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
    let g1 = dir(&d, "g1");
    let g2 = dir(&d, "g2");
    ok(&["grid", "--duration", "0.003", "--pairs", "band", "--out-dir", &g1]);
    ok(&["grid", "--config", &format!("{g1}/manifest.txt"), "--out-dir", &g2]);
    assert_eq!(
        std::fs::read(Path::new(&g1).join("grid.csv")).unwrap(),
        std::fs::read(Path::new(&g2).join("grid.csv")).unwrap()
    );
}

#[test]
fn config_errors_exit_with_code_two() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.cfg");
    std::fs::write(&cfg, "experiment = simulate\nspacing = 6.5\n").unwrap();
    let out = freqmux(&["simulate", "--config", cfg.to_str().unwrap(), "--out-dir", &dir(&d, "x")]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("spacing") && err.contains(":2"), "{err}");

    let out = freqmux(&["simulate", "--mu", "-1", "--out-dir", &dir(&d, "y")]);
    assert_eq!(code(&out), 2);
    let out = freqmux(&["grid", "--set", "pairs=everything", "--out-dir", &dir(&d, "z")]);
    assert_eq!(code(&out), 2);
    let missing = freqmux(&["simulate", "--config", "/nonexistent/cfg", "--out-dir", &dir(&d, "w")]);
    assert_eq!(code(&missing), 4);
}

#[test]
fn plot_scripts_are_printed() {
    let out = freqmux(&["plot-script", "histogram"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("import matplotlib") && text.contains("histogram.csv"));
}
