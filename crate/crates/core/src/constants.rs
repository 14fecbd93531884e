//! Physical constants in the unit system used throughout the crate
//! (picoseconds, volts, electron-volts).

/// Reduced Planck constant in meV·ps.
pub const HBAR_MEV_PS: f64 = 0.658_211_956_9;

/// Converts an energy detuning in meV to an angular frequency in rad/ps.
#[inline]
pub fn mev_to_rad_per_ps(detuning_mev: f64) -> f64 {
    detuning_mev / HBAR_MEV_PS
}

/// Conversion factor between the gaussian FWHM and its standard deviation.
pub(crate) const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;
