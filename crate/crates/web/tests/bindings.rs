use freqmux_web::{g2_mu_curve, g2_window_curve, response_curve, response_text, spectrum_curve};

#[test]
fn response_summary_matches_curve() {
    let text = response_text(0.9615).unwrap();
    assert!(text.contains("fwhm_ghz = 1.4"), "{text}");
    let c = response_curve(0.9615, 30.0, 61).unwrap();
    let mid = &c[60..62];
    assert_eq!(mid, &[0.0, 0.0]);
}

#[test]
fn g2_curves_fall_with_window_and_mu() {
    let w = g2_window_curve(0.125, 0.25, true).unwrap();
    let ys: Vec<f64> = w.chunks(2).map(|p| p[1]).collect();
    let peak = ys.iter().cloned().fold(f64::MIN, f64::max);
    assert!(ys.last().unwrap() < &peak);
    let m = g2_mu_curve(2.5, 0.25, true).unwrap();
    assert!(m.chunks(2).zip(m.chunks(2).skip(1)).all(|(a, b)| b[1] < a[1]));
}

#[test]
fn spectrum_is_normalized() {
    let s = spectrum_curve(100.0, 5, 16.0, 20.0).unwrap();
    let max = s.chunks(2).map(|p| p[1]).fold(f64::MIN, f64::max);
    assert!((max - 1.0).abs() < 1e-12);
}
