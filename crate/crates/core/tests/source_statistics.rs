use proptest::prelude::*;

use freqmux::correlator::{g2_cross, G2Options};
use freqmux::source::{
    generate_tags, CollectionPath, DetectorModel, OracleContext, RunConfig, SourceConfig, TagGenerator, TagStreams,
};
use freqmux::tags::{read_ttag, write_ttag, TtagWriter};

fn reference_setup(mu: f64, duration: f64, seed: u64) -> (SourceConfig, CollectionPath, DetectorModel, DetectorModel, RunConfig) {
    let mut src = SourceConfig::reference();
    src.mean_pairs_per_slot = mu;
    let path = CollectionPath::reference(10, 10);
    let run = RunConfig::for_source(&src, duration, seed);
    (src, path, DetectorModel::apd(1), DetectorModel::snspd(2), run)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn identical_seeds_give_identical_streams(seed in any::<u64>(), shard in 1_000u64..50_000) {
        let (src, path, ds, di, mut run) = reference_setup(0.3, 2e-4, seed);
        run.shard_slots = shard;
        let a = generate_tags(&src, &path, &ds, &di, &run).unwrap();
        let b = generate_tags(&src, &path, &ds, &di, &run).unwrap();
        prop_assert_eq!(&a, &b);
        let mut streamed = TagStreams::default();
        TagGenerator::new(&src, &path, &ds, &di, &run).unwrap().stream(|batch| {
            streamed.signal.extend(batch.signal);
            streamed.idler.extend(batch.idler);
            Ok(())
        }).unwrap();
        prop_assert_eq!(streamed, a);
    }
}

#[test]
fn photon_singles_scale_linearly_with_mu() {
    let mut rates = Vec::new();
    for mu in [0.1, 0.2] {
        let (src, path, ds, di, run) = reference_setup(mu, 5e-3, 3);
        let t = generate_tags(&src, &path, &ds, &di, &run).unwrap();
        rates.push(t.signal.len() as f64);
    }
    let ratio = rates[1] / rates[0];
    // Singles variance is inflated by bunching; 1% is several σ here.
    assert!((ratio - 2.0).abs() < 0.02, "{ratio}");
}

#[test]
fn idler_excess_loss_divides_the_idler_rate() {
    let (src, mut path, ds, _, run) = reference_setup(0.125, 5e-3, 4);
    path.signal_leakage = vec![1.0];
    let same = DetectorModel { channel: 2, ..ds };
    let full = generate_tags(&src, &path, &ds, &same, &run).unwrap();
    path.excess_idler_loss = 0.05;
    let lossy = generate_tags(&src, &path, &ds, &same, &run).unwrap();
    let ratio = full.signal.len() as f64 / lossy.idler.len() as f64;
    assert!((ratio / 20.0 - 1.0).abs() < 0.05, "{ratio}");
}

#[test]
fn without_leakage_only_matched_modes_correlate() {
    let (src, _, ds, di, run) = reference_setup(0.125, 0.02, 5);
    let opts = G2Options {
        acquisition_time: Some(run.duration),
        ..G2Options::default()
    };
    let off = generate_tags(&src, &CollectionPath::single(10, 11), &ds, &di, &run).unwrap();
    let e = g2_cross(&off.signal, &off.idler, &opts).unwrap();
    assert!((e.g2 - 1.0).abs() < 3.0 * e.sigma, "{} ± {}", e.g2, e.sigma);
    let on = generate_tags(&src, &CollectionPath::single(10, 10), &ds, &di, &run).unwrap();
    assert!(g2_cross(&on.signal, &on.idler, &opts).unwrap().g2 > 5.0);
}

#[test]
fn monte_carlo_matches_the_oracle_with_jitter_and_darks() {
    for (k, mu) in [0.05, 0.125, 0.5, 2.0].into_iter().enumerate() {
        let (src, path, ds, di, run) = reference_setup(mu, 0.01, 20 + k as u64);
        let tags = generate_tags(&src, &path, &ds, &di, &run).unwrap();
        let oracle = OracleContext::new(&src, &path, &ds, &di, &run).unwrap();
        for window in [2.5e-9, 0.8e-9] {
            let e = g2_cross(
                &tags.signal,
                &tags.idler,
                &G2Options {
                    window,
                    acquisition_time: Some(run.duration),
                    ..G2Options::default()
                },
            )
            .unwrap();
            let expect = oracle.cross(window, 0.0).unwrap().g2;
            assert!(
                (e.g2 - expect).abs() < 4.0 * e.sigma,
                "μ={mu} w={window}: {} ± {} vs {expect}",
                e.g2,
                e.sigma
            );
        }
    }
}

#[test]
fn sideband_window_sees_only_accidentals() {
    let (src, path, ds, di, run) = reference_setup(0.125, 0.01, 8);
    let tags = generate_tags(&src, &path, &ds, &di, &run).unwrap();
    let e = g2_cross(
        &tags.signal,
        &tags.idler,
        &G2Options {
            offset: 12.5e-9,
            acquisition_time: Some(run.duration),
            ..G2Options::default()
        },
    )
    .unwrap();
    assert!((e.g2 - 1.0).abs() < 3.0 * e.sigma, "{} ± {}", e.g2, e.sigma);
}

#[test]
fn ttag_files_round_trip_generator_output() {
    let (src, path, ds, di, run) = reference_setup(0.125, 2e-4, 9);
    let tags = generate_tags(&src, &path, &ds, &di, &run).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("signal.ttag");
    write_ttag(std::fs::File::create(&file).unwrap(), &tags.signal).unwrap();
    let back = read_ttag(std::fs::File::open(&file).unwrap()).unwrap();
    assert_eq!(back, tags.signal);

    let streamed = dir.path().join("idler.ttag");
    let mut w = TtagWriter::new(std::fs::File::create(&streamed).unwrap()).unwrap();
    TagGenerator::new(&src, &path, &ds, &di, &run)
        .unwrap()
        .stream(|batch| w.write(&batch.idler))
        .unwrap();
    w.finish_seekable().unwrap();
    assert_eq!(read_ttag(std::fs::File::open(&streamed).unwrap()).unwrap(), tags.idler);
}
