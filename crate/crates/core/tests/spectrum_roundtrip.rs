use proptest::prelude::*;

use freqmux::optics::{EtalonFilter, VipaParams};
use freqmux::spectrum::{
    build_comb, find_peaks, scan_filter_spectrum, Abscissa, DemuxSimulator, FilterMode, FitOptions, LinewidthFitter,
    MeasuredSpectrum,
};
use freqmux::SPEED_OF_LIGHT;

proptest! {
    #[test]
    fn comb_is_symmetric_about_its_centre(count in 1usize..25, hw in 1e6f64..1e9, d in 0.0f64..40e9) {
        let comb = build_comb(195e12, 6.5e9, count, hw).unwrap();
        let c = comb.center();
        let a = comb.intensity(c + d);
        let b = comb.intensity(c - d);
        prop_assert!((a - b).abs() <= 1e-9 * a.max(b).max(1e-300));
    }

    #[test]
    fn lorentzian_peaks_at_one(hw in 1e6f64..1e9, d in -5e9f64..5e9) {
        let comb = build_comb(195e12, 6.5e9, 1, hw).unwrap();
        let line = &comb.lines[0];
        prop_assert!(line.profile(line.center + d) <= 1.0);
        prop_assert!((line.profile(line.center + hw) - 0.5).abs() < 1e-8);
    }
}

#[test]
fn filter_scan_resolves_comb_lines() {
    let comb = build_comb(195e12, 6.5e9, 5, 38.3e6).unwrap();
    let filter = EtalonFilter::new(comb.center(), 0.5e9, 1.0).unwrap();
    let det: Vec<f64> = (0..=800).map(|i| -20e9 + i as f64 * 0.05e9).collect();
    let s = scan_filter_spectrum(&comb, &filter, &det).unwrap();
    assert!((s.max() - 1.0).abs() < 1e-12);
    let peaks = find_peaks(&s.x, &s.intensity, 0.3);
    assert_eq!(peaks.len(), 5);
    for (p, expect) in peaks.iter().zip([-13e9, -6.5e9, 0.0, 6.5e9, 13e9]) {
        assert!((p.x - expect).abs() <= 0.05e9);
    }
}

#[test]
fn csv_round_trip_feeds_the_fitter() {
    let nu0 = SPEED_OF_LIGHT / 1532.7e-9;
    let det: Vec<f64> = (0..=150).map(|i| -13.5e9 + i as f64 * 0.18e9).collect();
    let sim = DemuxSimulator::tracked(&VipaParams::reference(), 5.2e-6, &det, nu0).unwrap();
    let comb = build_comb(nu0, 6.5e9, 5, 60e6).unwrap();
    let filter = FilterMode::Tracked(EtalonFilter::new(nu0, 16e9, 1.0).unwrap());
    let spectrum = sim.spectrum(&comb, &filter).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spectrum.csv");
    spectrum.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    let back = MeasuredSpectrum::read_csv(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(back.abscissa, Abscissa::Detuning);
    assert_eq!(back.len(), spectrum.len());
    let fit = LinewidthFitter::new(&sim, comb, filter, FitOptions::default())
        .unwrap()
        .fit(&back)
        .unwrap();
    assert!((fit.half_width / 60e6 - 1.0).abs() < 0.01, "{}", fit.half_width);
}

#[test]
fn wider_lines_broaden_the_demuxed_peaks() {
    let nu0 = SPEED_OF_LIGHT / 1532.7e-9;
    let det: Vec<f64> = (0..=100).map(|i| -9e9 + i as f64 * 0.18e9).collect();
    let sim = DemuxSimulator::tracked(&VipaParams::reference(), 5.2e-6, &det, nu0).unwrap();
    let filter = FilterMode::Flat;
    let narrow = sim.spectrum(&build_comb(nu0, 6.5e9, 3, 20e6).unwrap(), &filter).unwrap();
    let wide = sim.spectrum(&build_comb(nu0, 6.5e9, 3, 600e6).unwrap(), &filter).unwrap();
    // Normalized spectra: broader lines raise the valleys between channels.
    let valley = |s: &MeasuredSpectrum| {
        let i = s.x.iter().position(|&x| (x - 3.24e9).abs() < 0.1e9).unwrap();
        s.intensity[i]
    };
    assert!(valley(&wide) > valley(&narrow));
}
