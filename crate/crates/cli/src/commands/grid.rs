use std::io::Write;

use freqmux::correlator::{
    band_pairs, block_pairs, build_correlation_grid, GridScenario, Uncertainty, TABLE_MEASURED_PAIRS,
};

use super::tags::scenario;
use super::Context;
use crate::config::Manifest;
use crate::error::CliError;

/// Correlation grid over a 7×7 block, the measured-pair table, or a band
/// around the diagonal.
pub fn grid(ctx: Context) -> Result<(), CliError> {
    let p = &ctx.params;
    let duration: f64 = p.get("duration_s", 0.2)?;
    let pump_mw: f64 = p.get("pump_mw", 1.0)?;
    let sc = scenario(p, 2, 0.05)?;
    let mu_per_mw: f64 = p.get("mu_per_mw", sc.source.pump_power_scale)?;
    let pairs = match p.choice("pairs", "block", &["block", "table", "band"])?.as_str() {
        "block" => {
            let first: usize = p.get("block_first", 9)?;
            let last: usize = p.get("block_last", 15)?;
            if last < first {
                return Err(CliError::Config("key `block_last` must be >= `block_first`".into()));
            }
            block_pairs(first..=last)
        }
        "table" => TABLE_MEASURED_PAIRS.to_vec(),
        _ => band_pairs(sc.source.mode_count, p.get("band_width", 1)?),
    };
    let dark_subtract: bool = p.get("dark_subtract", false)?;
    let memory_budget: u64 = p.get("memory_budget_tags", 40_000_000)?;
    p.finish()?;

    let mut scenario = GridScenario::reference(duration, ctx.seed);
    scenario.source = sc.source;
    scenario.source.pump_power_scale = mu_per_mw;
    scenario.signal_leakage = sc.signal_leakage;
    scenario.excess_idler_loss = sc.excess_idler_loss;
    scenario.signal_detector = sc.signal_detector;
    scenario.idler_detector = sc.idler_detector;
    scenario.correlation_decay = sc.correlation_decay;
    scenario.window = sc.window;
    scenario.uncertainty = Uncertainty::Poisson;
    scenario.dark_subtract = dark_subtract;
    scenario.memory_budget = memory_budget;
    let grid = build_correlation_grid(&scenario, pump_mw, &pairs)?;

    let mut w = ctx.create("grid.csv")?;
    grid.write_csv(&mut w)?;
    w.flush()?;
    let mut w = ctx.create("grid_table.txt")?;
    w.write_all(grid.table().as_bytes())?;
    w.flush()?;

    let s = grid.summary();
    let mut m = Manifest::default();
    m.put("mean_pairs_per_slot", grid.mean_pairs_per_slot);
    m.put("measured", s.measured);
    m.put("diagonal_min", s.diagonal_min);
    m.put("diagonal_max", s.diagonal_max);
    m.put("diagonal_mean", s.diagonal_mean);
    m.put("neighbour_min", s.neighbour_min);
    m.put("neighbour_max", s.neighbour_max);
    m.put("far_max", s.far_max);
    ctx.finish(&m)
}
