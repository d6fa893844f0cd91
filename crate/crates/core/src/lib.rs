//! Simulation and analysis toolkit for a frequency-multiplexed photon-pair
//! source read out through a VIPA spectral demultiplexer.
//!
//! * [`optics`]: VIPA field, fiber coupling, etalon and efficiency models.
//! * [`spectrum`]: Lorentzian combs, demultiplexed spectra and linewidth fits.
//! * [`calibration`]: wavelength/position/channel maps.
//! * [`source`]: time-tag generation for a multimode pair source.
//! * [`correlator`]: coincidence histograms and g² estimators.
//! * [`tags`]: time-tag records and their file formats.

pub mod calibration;
pub mod correlator;
pub mod error;
pub mod optics;
pub mod source;
pub mod spectrum;
pub mod tags;

pub use error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
