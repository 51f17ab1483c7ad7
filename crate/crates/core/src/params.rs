//! FMCW/MIMO waveform and array description.
//!
//! Defaults reproduce the 24 GHz RadarBook2 configuration: 250 MHz sweep,
//! 467 μs ramp repeated every 483 μs, 90 chirps per frame, 56 samples at
//! 120 ksps, 15 virtual channels at half-wavelength spacing, 10 Hz frames.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarParams {
    /// Carrier frequency f_c (Hz).
    pub carrier_freq_hz: f64,
    /// Sweep bandwidth (Hz).
    pub bandwidth_hz: f64,
    /// Up-chirp duration T_c (s).
    pub sweep_time_s: f64,
    /// Chirp repetition interval T_r (s). Doppler is sampled at this rate.
    pub chirp_repetition_interval_s: f64,
    /// Chirps per frame N_c.
    pub chirps_per_frame: usize,
    /// ADC samples per chirp N_s.
    pub adc_samples: usize,
    /// ADC sample rate f_s (samples/s).
    pub adc_rate_sps: f64,
    /// Virtual array elements N_an.
    pub n_virtual_channels: usize,
    /// Element spacing d/λ.
    pub element_spacing_wavelengths: f64,
    /// Frame (slow-time) rate (Hz).
    pub frame_rate_hz: f64,
    /// Complex noise power per sample (linear).
    pub noise_power: f64,
    /// Full horizontal field of view (degrees). Scatterers outside are dropped.
    pub field_of_view_deg: f64,
}

impl Default for RadarParams {
    fn default() -> Self {
        Self {
            carrier_freq_hz: 24.0e9,
            bandwidth_hz: 250.0e6,
            sweep_time_s: 467.0e-6,
            chirp_repetition_interval_s: 483.0e-6,
            chirps_per_frame: 90,
            adc_samples: 56,
            adc_rate_sps: 120.0e3,
            n_virtual_channels: 15,
            element_spacing_wavelengths: 0.5,
            frame_rate_hz: 10.0,
            noise_power: 1.0,
            field_of_view_deg: 76.5,
        }
    }
}

/// Range, velocity and boresight angle resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolutions {
    pub range_res_m: f64,
    pub velocity_res_mps: f64,
    pub angle_res_rad_boresight: f64,
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

impl RadarParams {
    pub fn validate(&self) -> Result<()> {
        positive("carrier_freq_hz", self.carrier_freq_hz)?;
        positive("bandwidth_hz", self.bandwidth_hz)?;
        positive("sweep_time_s", self.sweep_time_s)?;
        positive("chirp_repetition_interval_s", self.chirp_repetition_interval_s)?;
        positive("adc_rate_sps", self.adc_rate_sps)?;
        positive("frame_rate_hz", self.frame_rate_hz)?;
        positive("field_of_view_deg", self.field_of_view_deg)?;
        if self.chirp_repetition_interval_s < self.sweep_time_s {
            return Err(Error::invalid(
                "chirp_repetition_interval_s",
                "must be >= sweep_time_s",
            ));
        }
        if self.chirps_per_frame == 0 {
            return Err(Error::invalid("chirps_per_frame", "must be >= 1"));
        }
        if self.adc_samples == 0 {
            return Err(Error::invalid("adc_samples", "must be >= 1"));
        }
        // Small slack for the rounding in published sample counts.
        let max_samples = self.adc_rate_sps * self.sweep_time_s * (1.0 + 1e-9);
        if self.adc_samples as f64 > max_samples {
            return Err(Error::invalid(
                "adc_samples",
                format!("{} exceeds adc_rate_sps * sweep_time_s = {max_samples:.3}", self.adc_samples),
            ));
        }
        if self.n_virtual_channels == 0 {
            return Err(Error::invalid("n_virtual_channels", "must be >= 1"));
        }
        let d = self.element_spacing_wavelengths;
        if !(d > 0.0 && d <= 0.5) {
            return Err(Error::invalid(
                "element_spacing_wavelengths",
                format!("must lie in (0, 0.5], got {d}"),
            ));
        }
        if !(self.noise_power.is_finite() && self.noise_power >= 0.0) {
            return Err(Error::invalid("noise_power", "must be finite and >= 0"));
        }
        if self.field_of_view_deg > 180.0 {
            return Err(Error::invalid("field_of_view_deg", "must be <= 180"));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    /// Chirp slope μ = f_BW / T_c (Hz/s).
    pub fn chirp_slope(&self) -> f64 {
        self.bandwidth_hz / self.sweep_time_s
    }

    /// Beat frequency of a scatterer at range `r`.
    pub fn beat_frequency(&self, range_m: f64) -> f64 {
        2.0 * self.chirp_slope() * range_m / SPEED_OF_LIGHT
    }

    pub fn doppler_frequency(&self, radial_velocity_mps: f64) -> f64 {
        2.0 * radial_velocity_mps / self.wavelength()
    }

    /// Range covered by one range-FFT bin.
    pub fn range_bin_spacing(&self) -> f64 {
        (self.adc_rate_sps / self.adc_samples as f64) * SPEED_OF_LIGHT * self.sweep_time_s
            / (2.0 * self.bandwidth_hz)
    }

    /// Radial velocity covered by one Doppler-FFT bin, λ / (2 N_c T_r).
    pub fn velocity_bin_spacing(&self) -> f64 {
        self.wavelength()
            / (2.0 * self.chirps_per_frame as f64 * self.chirp_repetition_interval_s)
    }

    /// Unambiguous radial velocity λ / (4 T_r).
    pub fn max_unambiguous_velocity(&self) -> f64 {
        self.wavelength() / (4.0 * self.chirp_repetition_interval_s)
    }

    /// Angular resolution λ / (N d cos θ) for an `n_channels` aperture.
    pub fn angle_resolution(&self, n_channels: usize, azimuth_rad: f64) -> f64 {
        1.0 / (n_channels as f64 * self.element_spacing_wavelengths * azimuth_rad.cos())
    }

    pub fn frame_period(&self) -> f64 {
        1.0 / self.frame_rate_hz
    }

    pub fn half_fov_rad(&self) -> f64 {
        0.5 * self.field_of_view_deg.to_radians()
    }

    pub fn resolutions(&self) -> Result<Resolutions> {
        self.validate()?;
        Ok(Resolutions {
            range_res_m: SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz),
            velocity_res_mps: self.velocity_bin_spacing(),
            angle_res_rad_boresight: self.angle_resolution(self.n_virtual_channels, 0.0),
        })
    }
}
