use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// `response.csv` from vipa-response.
    Response,
    /// `channels.csv` from vipa-response.
    Channels,
    /// `spectrum.csv` from demux-spectrum.
    Spectrum,
    /// `overlay.csv` from fit-spectrum.
    Fit,
    /// `histogram.csv` from analyze.
    Histogram,
    /// `grid.csv` from grid.
    Grid,
}

const HEADER: &str = "import sys\nimport pandas as pd\nimport matplotlib.pyplot as plt\n\n";

/// Standalone matplotlib script; the CSV path is the first argument.
pub fn script(kind: PlotKind) -> String {
    let (default, body) = match kind {
        PlotKind::Response => (
            "response.csv",
            "fig, ax = plt.subplots(1, 2, figsize=(10, 4))\n\
             ax[0].plot(d.detuning_hz / 1e9, d.relative)\n\
             ax[0].set_xlabel('detuning (GHz)'); ax[0].set_ylabel('relative transmission')\n\
             ax[1].plot(d.detuning_hz / 1e9, d.crosstalk_db)\n\
             ax[1].set_xlabel('detuning (GHz)'); ax[1].set_ylabel('cross-talk (dB)')\n",
        ),
        PlotKind::Channels => (
            "channels.csv",
            "fig, ax = plt.subplots(figsize=(8, 4))\n\
             for ch, g in d.groupby('channel'):\n    ax.plot(g.detuning_hz / 1e9, g.weighted, label=f'channel {ch}')\n\
             ax.set_xlabel('detuning (GHz)'); ax.set_ylabel('efficiency-weighted transmission')\n\
             ax.legend(fontsize='small')\n",
        ),
        PlotKind::Spectrum => (
            "spectrum.csv",
            "fig, ax = plt.subplots(figsize=(8, 4))\n\
             x = d.columns[0]\n\
             ax.plot(d[x], d.intensity)\n\
             ax.set_xlabel(x); ax.set_ylabel('intensity')\n",
        ),
        PlotKind::Fit => (
            "overlay.csv",
            "fig, ax = plt.subplots(figsize=(8, 4))\n\
             x = d.columns[0]\n\
             ax.plot(d[x], d.measured, '.', ms=3, label='measured')\n\
             ax.plot(d[x], d.model, label='model')\n\
             ax.set_xlabel(x); ax.set_ylabel('intensity'); ax.legend()\n",
        ),
        PlotKind::Histogram => (
            "histogram.csv",
            "fig, ax = plt.subplots(figsize=(8, 4))\n\
             c = 0.5 * (d.bin_start_ps + d.bin_end_ps) / 1e3\n\
             ax.step(c, d.counts, where='mid')\n\
             ax.set_xlabel('delay (ns)'); ax.set_ylabel('coincidences')\n",
        ),
        PlotKind::Grid => (
            "grid.csv",
            "t = d.pivot(index='m_s', columns='m_i', values='g2')\n\
             fig, ax = plt.subplots(figsize=(6, 5))\n\
             im = ax.imshow(t.values, origin='lower', cmap='viridis')\n\
             ax.set_xticks(range(len(t.columns)), t.columns); ax.set_yticks(range(len(t.index)), t.index)\n\
             ax.set_xlabel('idler mode'); ax.set_ylabel('signal mode')\n\
             fig.colorbar(im, label='g2')\n",
        ),
    };
    format!(
        "{HEADER}path = sys.argv[1] if len(sys.argv) > 1 else '{default}'\nd = pd.read_csv(path)\n{body}plt.tight_layout()\nplt.show()\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripts_name_their_csv() {
        assert!(script(PlotKind::Grid).contains("'grid.csv'"));
        assert!(script(PlotKind::Histogram).contains("bin_start_ps"));
    }
}
