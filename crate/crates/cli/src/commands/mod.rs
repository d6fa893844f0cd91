pub mod grid;
pub mod optics;
pub mod plot;
pub mod spectrum;
pub mod tags;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::config::{Manifest, Params};
use crate::error::CliError;

pub struct Context {
    pub params: Params,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Context {
    pub fn create(&self, name: &str) -> Result<BufWriter<fs::File>, CliError> {
        fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", self.out_dir.display())))?;
        let path = self.out_dir.join(name);
        let f = fs::File::create(&path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
        Ok(BufWriter::new(f))
    }

    /// Writes `manifest.txt` and echoes the outputs on stdout.
    pub fn finish(&self, manifest: &Manifest) -> Result<(), CliError> {
        use std::io::Write;
        let mut w = self.create("manifest.txt")?;
        w.write_all(manifest.render(&self.params).as_bytes())?;
        w.flush()?;
        print!("{}", manifest.outputs_text());
        Ok(())
    }
}

pub fn open(path: &Path) -> Result<fs::File, CliError> {
    fs::File::open(path).map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))
}

/// GHz/MHz/ns/ps keys to SI.
pub const GHZ: f64 = 1e9;
pub const MHZ: f64 = 1e6;
pub const NS: f64 = 1e-9;
pub const PS: f64 = 1e-12;
pub const UM: f64 = 1e-6;
