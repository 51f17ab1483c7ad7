//! Radar cube pre-processing: range FFT, slow-time MTI, Doppler FFT, FFT
//! beamforming and the two 2D power maps the detectors run on.
//!
//! Intermediate cubes are `[outer][channel][range]` complex arrays. After
//! the Doppler FFT the outer axis is FFT-shifted so that zero velocity sits
//! at index `n_chirps / 2`.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::params::RadarParams;
use crate::synth::FrameCube;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann if n <= 1 => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (TAU * i as f64 / (n - 1) as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DspConfig {
    pub range_window: Window,
    pub doppler_window: Window,
    pub angle_window: Window,
    /// Zero-padded beamforming FFT length.
    pub angle_fft_size: usize,
    /// Slow-time mean subtraction.
    pub mti: bool,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            range_window: Window::Hann,
            doppler_window: Window::Hann,
            angle_window: Window::Rectangular,
            angle_fft_size: 64,
            mti: true,
        }
    }
}

/// Complex `[outer][channel][range]` array.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube3 {
    pub n_outer: usize,
    pub n_channels: usize,
    pub n_range: usize,
    pub data: Vec<Complex64>,
}

impl Cube3 {
    pub fn zeros(n_outer: usize, n_channels: usize, n_range: usize) -> Self {
        Self {
            n_outer,
            n_channels,
            n_range,
            data: vec![Complex64::new(0.0, 0.0); n_outer * n_channels * n_range],
        }
    }

    #[inline]
    pub fn index(&self, outer: usize, channel: usize, range: usize) -> usize {
        (outer * self.n_channels + channel) * self.n_range + range
    }

    #[inline]
    pub fn get(&self, outer: usize, channel: usize, range: usize) -> Complex64 {
        self.data[self.index(outer, channel, range)]
    }

    /// Channel snapshot at (outer, range) over the first `n` channels.
    pub fn snapshot(&self, outer: usize, range: usize, n: usize) -> Vec<Complex64> {
        (0..n).map(|c| self.get(outer, c, range)).collect()
    }

    pub fn total_power(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Range profiles `[chirp][channel][range bin]`.
pub type RangeProfiles = Cube3;
/// Range-Doppler data `[Doppler bin][channel][range bin]`, Doppler FFT-shifted.
pub type RangeDopplerCube = Cube3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MapKind {
    #[serde(rename = "RA")]
    RangeAzimuth,
    #[serde(rename = "RD")]
    RangeDoppler,
}

/// 2D linear power map. Rows are range bins; columns are azimuth bins (RA)
/// or radial-velocity bins (RD).
#[derive(Debug, Clone, PartialEq)]
pub struct MapGrid {
    pub kind: MapKind,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    /// Range bin centers (m).
    pub range_axis: Vec<f64>,
    /// Azimuth (rad) or radial velocity (m/s) bin centers.
    pub cross_axis: Vec<f64>,
    pub frame_index: usize,
}

impl MapGrid {
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn argmax(&self) -> (usize, usize) {
        let (i, _) = self
            .data
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        (i / self.cols, i % self.cols)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(0.0, f64::max)
    }

    pub fn median(&self) -> f64 {
        let mut v = self.data.clone();
        let mid = v.len() / 2;
        let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
        *m
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    /// Nearest cross-axis bin to `value`.
    pub fn nearest_col(&self, value: f64) -> usize {
        nearest(&self.cross_axis, value)
    }

    pub fn nearest_row(&self, range: f64) -> usize {
        nearest(&self.range_axis, range)
    }
}

fn nearest(axis: &[f64], value: f64) -> usize {
    axis.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - value).abs().total_cmp(&(b.1 - value).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Azimuth grid of the zero-padded beamformer. Bins whose spatial frequency
/// maps outside |sin θ| ≤ 1 are discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleAxis {
    pub fft_size: usize,
    /// FFT-shifted bin index of each kept azimuth.
    pub bins: Vec<usize>,
    pub azimuths: Vec<f64>,
}

impl AngleAxis {
    pub fn new(fft_size: usize, spacing_wavelengths: f64) -> Self {
        let mut bins = Vec::new();
        let mut azimuths = Vec::new();
        for j in 0..fft_size {
            let k = j as f64 - (fft_size / 2) as f64;
            let s = k / (fft_size as f64 * spacing_wavelengths);
            if s.abs() <= 1.0 {
                bins.push(j);
                azimuths.push(s.asin());
            }
        }
        Self {
            fft_size,
            bins,
            azimuths,
        }
    }
}

/// FFT plans and axes for one radar configuration.
#[derive(Clone)]
pub struct Preprocessor {
    params: RadarParams,
    cfg: DspConfig,
    range_fft: Arc<dyn Fft<f64>>,
    doppler_fft: Arc<dyn Fft<f64>>,
    angle_fft: Arc<dyn Fft<f64>>,
    range_window: Vec<f64>,
    doppler_window: Vec<f64>,
    angle_axis: AngleAxis,
}

impl std::fmt::Debug for Preprocessor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Preprocessor")
            .field("params", &self.params)
            .field("cfg", &self.cfg)
            .finish()
    }
}

impl Preprocessor {
    pub fn new(params: &RadarParams, cfg: &DspConfig) -> Result<Self> {
        params.validate()?;
        if params.adc_samples < 8 {
            return Err(Error::invalid("adc_samples", "range FFT needs at least 8 samples"));
        }
        if cfg.angle_fft_size < 2 {
            return Err(Error::invalid("angle_fft_size", "must be >= 2"));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            params: params.clone(),
            cfg: cfg.clone(),
            range_fft: planner.plan_fft_forward(params.adc_samples),
            doppler_fft: planner.plan_fft_forward(params.chirps_per_frame),
            angle_fft: planner.plan_fft_forward(cfg.angle_fft_size),
            range_window: cfg.range_window.coefficients(params.adc_samples),
            doppler_window: cfg.doppler_window.coefficients(params.chirps_per_frame),
            angle_axis: AngleAxis::new(cfg.angle_fft_size, params.element_spacing_wavelengths),
        })
    }

    pub fn params(&self) -> &RadarParams {
        &self.params
    }

    pub fn config(&self) -> &DspConfig {
        &self.cfg
    }

    pub fn angle_axis(&self) -> &AngleAxis {
        &self.angle_axis
    }

    pub fn range_axis(&self) -> Vec<f64> {
        let dr = self.params.range_bin_spacing();
        (0..self.params.adc_samples).map(|k| k as f64 * dr).collect()
    }

    pub fn velocity_axis(&self) -> Vec<f64> {
        let dv = self.params.velocity_bin_spacing();
        let nc = self.params.chirps_per_frame;
        (0..nc).map(|j| (j as f64 - (nc / 2) as f64) * dv).collect()
    }

    /// Index of the zero-velocity Doppler bin.
    pub fn zero_doppler_bin(&self) -> usize {
        self.params.chirps_per_frame / 2
    }

    /// Fast-time FFT of every (chirp, channel) row.
    pub fn range_fft(&self, frame: &FrameCube) -> RangeProfiles {
        let ns = frame.n_samples;
        let mut out = Cube3 {
            n_outer: frame.n_chirps,
            n_channels: frame.n_channels,
            n_range: ns,
            data: frame.data.clone(),
        };
        for row in out.data.chunks_exact_mut(ns) {
            for (v, w) in row.iter_mut().zip(&self.range_window) {
                *v *= w;
            }
            self.range_fft.process(row);
        }
        out
    }

    /// Slow-time FFT per (channel, range bin), FFT-shifted.
    pub fn doppler_fft(&self, profiles: &RangeProfiles) -> RangeDopplerCube {
        let (nc, nan, nr) = (profiles.n_outer, profiles.n_channels, profiles.n_range);
        let mut out = Cube3::zeros(nc, nan, nr);
        let mut buf = vec![Complex64::new(0.0, 0.0); nc];
        let half = nc / 2;
        for ch in 0..nan {
            for r in 0..nr {
                for (m, b) in buf.iter_mut().enumerate() {
                    *b = profiles.get(m, ch, r) * self.doppler_window[m];
                }
                self.doppler_fft.process(&mut buf);
                for (j, v) in buf.iter().enumerate() {
                    let shifted = (j + half) % nc;
                    let idx = out.index(shifted, ch, r);
                    out.data[idx] = *v;
                }
            }
        }
        out
    }

    /// Beamformed power over the kept azimuth bins for the first `n_channels`
    /// entries of `snapshot`.
    pub fn angle_spectrum(&self, snapshot: &[Complex64], n_channels: usize) -> Result<Vec<f64>> {
        if n_channels < 2 || snapshot.len() < n_channels {
            return Err(Error::TooFewChannels(n_channels.min(snapshot.len())));
        }
        let n = self.cfg.angle_fft_size;
        if n_channels > n {
            return Err(Error::invalid("angle_fft_size", "smaller than the channel count"));
        }
        let win = self.cfg.angle_window.coefficients(n_channels);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (i, (b, w)) in buf.iter_mut().zip(&win).enumerate() {
            *b = snapshot[i] * w;
        }
        self.angle_fft.process(&mut buf);
        let half = n / 2;
        Ok(self
            .angle_axis
            .bins
            .iter()
            .map(|&j| buf[(j + n - half) % n].norm_sqr())
            .collect())
    }

    /// Runs range FFT, optional MTI and Doppler FFT on one frame.
    pub fn range_doppler(&self, frame: &FrameCube) -> RangeDopplerCube {
        let mut profiles = self.range_fft(frame);
        if self.cfg.mti {
            mti_filter(&mut profiles);
        }
        self.doppler_fft(&profiles)
    }

    /// Noncoherent sum over non-zero Doppler bins of the per-bin angle spectra.
    pub fn make_ra_map(&self, rd: &RangeDopplerCube, n_channels: usize, frame_index: usize) -> Result<MapGrid> {
        check_channels(n_channels, rd.n_channels)?;
        let cols = self.angle_axis.bins.len();
        let zero = self.zero_doppler_bin();
        let mut data = vec![0.0; rd.n_range * cols];
        for r in 0..rd.n_range {
            let row = &mut data[r * cols..(r + 1) * cols];
            for j in (0..rd.n_outer).filter(|&j| j != zero) {
                let spec = self.angle_spectrum(&rd.snapshot(j, r, n_channels), n_channels)?;
                for (acc, p) in row.iter_mut().zip(spec) {
                    *acc += p;
                }
            }
        }
        Ok(MapGrid {
            kind: MapKind::RangeAzimuth,
            rows: rd.n_range,
            cols,
            data,
            range_axis: self.range_axis(),
            cross_axis: self.angle_axis.azimuths.clone(),
            frame_index,
        })
    }

    /// Noncoherent mean of |X|² over the first `n_channels` channels.
    pub fn make_rd_map(&self, rd: &RangeDopplerCube, n_channels: usize, frame_index: usize) -> Result<MapGrid> {
        check_channels(n_channels, rd.n_channels)?;
        let cols = rd.n_outer;
        let mut data = vec![0.0; rd.n_range * cols];
        for j in 0..rd.n_outer {
            for c in 0..n_channels {
                for r in 0..rd.n_range {
                    data[r * cols + j] += rd.get(j, c, r).norm_sqr();
                }
            }
        }
        let inv = 1.0 / n_channels as f64;
        data.iter_mut().for_each(|v| *v *= inv);
        Ok(MapGrid {
            kind: MapKind::RangeDoppler,
            rows: rd.n_range,
            cols,
            data,
            range_axis: self.range_axis(),
            cross_axis: self.velocity_axis(),
            frame_index,
        })
    }

    /// Full pre-processing of one frame with the first `n_channels` channels.
    pub fn process(&self, frame: &FrameCube, n_channels: usize, frame_index: usize) -> Result<ProcessedFrame> {
        let rd_cube = self.range_doppler(frame);
        let ra = self.make_ra_map(&rd_cube, n_channels, frame_index)?;
        let rd = self.make_rd_map(&rd_cube, n_channels, frame_index)?;
        Ok(ProcessedFrame {
            frame_index,
            n_channels,
            cube: rd_cube,
            ra,
            rd,
        })
    }

    /// Radial velocity of the strongest non-zero Doppler bin after
    /// beamforming toward `azimuth` at `range_bin`.
    pub fn doppler_at(&self, pf: &ProcessedFrame, range_bin: usize, azimuth: f64) -> f64 {
        let u = self.params.element_spacing_wavelengths * azimuth.sin();
        let steer: Vec<Complex64> = (0..pf.n_channels)
            .map(|n| Complex64::from_polar(1.0, -TAU * u * n as f64))
            .collect();
        let zero = self.zero_doppler_bin();
        let mut best = (zero, f64::NEG_INFINITY);
        for j in (0..pf.cube.n_outer).filter(|&j| j != zero) {
            let y: Complex64 = (0..pf.n_channels)
                .map(|n| pf.cube.get(j, n, range_bin) * steer[n])
                .sum();
            let p = y.norm_sqr();
            if p > best.1 {
                best = (j, p);
            }
        }
        pf.rd.cross_axis[best.0]
    }

    /// Azimuth of the beamformer peak for one (range, Doppler) cell.
    pub fn angle_at(&self, pf: &ProcessedFrame, range_bin: usize, doppler_bin: usize) -> Result<f64> {
        let spec = self.angle_spectrum(&pf.cube.snapshot(doppler_bin, range_bin, pf.n_channels), pf.n_channels)?;
        let i = spec
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a })
            .0;
        Ok(self.angle_axis.azimuths[i])
    }
}

fn check_channels(n: usize, available: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::TooFewChannels(n));
    }
    if n > available {
        return Err(Error::invalid(
            "channels",
            format!("subset of {n} exceeds {available} virtual channels"),
        ));
    }
    Ok(())
}

/// Subtracts the slow-time mean of every (channel, range bin).
pub fn mti_filter(profiles: &mut RangeProfiles) {
    let (nc, nan, nr) = (profiles.n_outer, profiles.n_channels, profiles.n_range);
    if nc < 2 {
        return;
    }
    let inv = 1.0 / nc as f64;
    for ch in 0..nan {
        for r in 0..nr {
            let mean: Complex64 = (0..nc).map(|m| profiles.get(m, ch, r)).sum::<Complex64>() * inv;
            for m in 0..nc {
                let idx = profiles.index(m, ch, r);
                profiles.data[idx] -= mean;
            }
        }
    }
}

/// Pre-processed frame: range-Doppler-channel cube plus both power maps.
#[derive(Debug, Clone)]
pub struct ProcessedFrame {
    pub frame_index: usize,
    /// Channel subset size (first `n_channels` virtual elements).
    pub n_channels: usize,
    pub cube: RangeDopplerCube,
    pub ra: MapGrid,
    pub rd: MapGrid,
}

/// Beamformed power of `snapshot` over the first `n_channels` elements with
/// a zero-padded FFT of `fft_size`; returns `(azimuths, power)`.
pub fn angle_spectrum(
    snapshot: &[Complex64],
    n_channels: usize,
    fft_size: usize,
    spacing_wavelengths: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_channels < 2 || snapshot.len() < n_channels {
        return Err(Error::TooFewChannels(n_channels.min(snapshot.len())));
    }
    let axis = AngleAxis::new(fft_size, spacing_wavelengths);
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_size];
    buf[..n_channels].copy_from_slice(&snapshot[..n_channels]);
    FftPlanner::new().plan_fft_forward(fft_size).process(&mut buf);
    let half = fft_size / 2;
    let power = axis
        .bins
        .iter()
        .map(|&j| buf[(j + fft_size - half) % fft_size].norm_sqr())
        .collect();
    Ok((axis.azimuths, power))
}

/// -3 dB mainlobe width (rad) of a beamformer response around its peak.
pub fn mainlobe_width_3db(azimuths: &[f64], power: &[f64]) -> f64 {
    let (peak, pmax) = power
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
    let half = pmax / 2.0;
    let crossing = |i0: usize, i1: usize| {
        let (p0, p1) = (power[i0], power[i1]);
        let t = if p0 != p1 { (p0 - half) / (p0 - p1) } else { 0.0 };
        azimuths[i0] + t * (azimuths[i1] - azimuths[i0])
    };
    let mut lo = azimuths[0];
    let mut i = peak;
    while i > 0 {
        if power[i - 1] < half {
            lo = crossing(i, i - 1);
            break;
        }
        i -= 1;
    }
    let mut hi = azimuths[azimuths.len() - 1];
    let mut i = peak;
    while i + 1 < power.len() {
        if power[i + 1] < half {
            hi = crossing(i, i + 1);
            break;
        }
        i += 1;
    }
    hi - lo
}

/// Element phase progression for a plane wave from `azimuth`.
pub fn steering_vector(n_channels: usize, spacing_wavelengths: f64, azimuth: f64) -> Vec<Complex64> {
    let u = spacing_wavelengths * azimuth.sin();
    (0..n_channels)
        .map(|n| Complex64::from_polar(1.0, 2.0 * PI * u * n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Scatterer;
    use crate::synth::add_scatterers;

    fn quiet() -> RadarParams {
        RadarParams {
            noise_power: 0.0,
            ..RadarParams::default()
        }
    }

    fn frame_with(params: &RadarParams, s: &[Scatterer]) -> FrameCube {
        let mut f = FrameCube::zeros(params.chirps_per_frame, params.n_virtual_channels, params.adc_samples);
        add_scatterers(&mut f, params, s);
        f
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (i, &x)| if x > a.1 { (i, x) } else { a })
            .0
    }

    #[test]
    fn zero_in_zero_out() {
        let p = quiet();
        let pre = Preprocessor::new(&p, &DspConfig::default()).unwrap();
        let f = FrameCube::zeros(90, 15, 56);
        let prof = pre.range_fft(&f);
        assert!(prof.data.iter().all(|c| c.norm() == 0.0));
        let mut m = prof.clone();
        mti_filter(&mut m);
        assert!(m.data.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn range_peak_at_bin_8_for_5m() {
        let p = quiet();
        let pre = Preprocessor::new(&p, &DspConfig::default()).unwrap();
        let f = frame_with(&p, &[Scatterer::fixed(0.0, 5.0, 1.0)]);
        let prof = pre.range_fft(&f);
        let mags: Vec<f64> = (0..56).map(|k| prof.get(0, 0, k).norm()).collect();
        assert_eq!(argmax(&mags), 8);
    }

    #[test]
    fn two_range_peaks_above_floor() {
        let p = RadarParams::default();
        let pre = Preprocessor::new(&p, &DspConfig::default()).unwrap();
        let mut f = frame_with(
            &quiet(),
            &[Scatterer::fixed(0.0, 5.0, 1.0), Scatterer::fixed(0.0, 15.0, 1.0)],
        );
        crate::synth::add_noise(&mut f, 0.1, 3);
        let prof = pre.range_fft(&f);
        // noncoherent profile over all chirps and channels
        let mut prof_pow = vec![0.0; 56];
        for m in 0..90 {
            for c in 0..15 {
                for (k, v) in prof_pow.iter_mut().enumerate() {
                    *v += prof.get(m, c, k).norm_sqr();
                }
            }
        }
        let mut sorted = prof_pow.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[28];
        let b5 = 8;
        let b15 = (15.0 / p.range_bin_spacing()).round() as usize;
        for b in [b5, b15] {
            let local = prof_pow[b - 1].max(prof_pow[b]).max(prof_pow[b + 1]);
            assert!(10.0 * (local / median).log10() >= 20.0);
        }
    }

    #[test]
    fn mti_suppresses_static_keeps_moving() {
        let p = quiet();
        let pre = Preprocessor::new(&p, &DspConfig::default()).unwrap();
        let f = frame_with(&p, &[Scatterer::fixed(0.5, 4.0, 1.0)]);
        let raw = pre.range_fft(&f);
        let mut filt = raw.clone();
        mti_filter(&mut filt);
        let ratio = raw.total_power() / filt.total_power().max(1e-300);
        assert!(10.0 * ratio.log10() >= 20.0);

        let mov = Scatterer { range_m: 4.0, azimuth_rad: 0.1, radial_velocity_mps: 1.0, amplitude: 1.0 };
        let f = frame_with(&p, &[mov]);
        let raw = pre.range_fft(&f);
        let mut filt = raw.clone();
        mti_filter(&mut filt);
        let a = pre.doppler_fft(&raw);
        let b = pre.doppler_fft(&filt);
        let peak = |c: &Cube3| (0..90).map(|j| c.get(j, 0, 7).norm_sqr()).fold(0.0, f64::max);
        let loss_db = 10.0 * (peak(&a) / peak(&b)).log10();
        assert!(loss_db < 3.0, "loss {loss_db}");
    }

    #[test]
    fn doppler_bins() {
        let p = quiet();
        let cfg = DspConfig { mti: false, ..DspConfig::default() };
        let pre = Preprocessor::new(&p, &cfg).unwrap();
        let center = pre.zero_doppler_bin();
        let dop_peak = |v: f64| {
            let s = Scatterer { range_m: 5.0, azimuth_rad: 0.0, radial_velocity_mps: v, amplitude: 1.0 };
            let rd = pre.range_doppler(&frame_with(&p, &[s]));
            argmax(&(0..90).map(|j| rd.get(j, 0, 8).norm_sqr()).collect::<Vec<_>>()) as i64 - center as i64
        };
        assert_eq!(dop_peak(0.0), 0);
        assert_eq!(dop_peak(1.0), 7);
        // just above λ/(4 T_r) aliases to the negative end
        let vmax = p.max_unambiguous_velocity();
        assert!(dop_peak(vmax + 0.1) < 0);
    }

    #[test]
    fn angle_peak_placement() {
        let p = quiet();
        let pre = Preprocessor::new(&p, &DspConfig::default()).unwrap();
        let axis = pre.angle_axis();
        let bore = steering_vector(15, 0.5, 0.0);
        let spec = pre.angle_spectrum(&bore, 15).unwrap();
        assert_eq!(axis.azimuths[argmax(&spec)], 0.0);

        let th = 20f64.to_radians();
        let spec = pre.angle_spectrum(&steering_vector(15, 0.5, th), 15).unwrap();
        let half = p.angle_resolution(15, 0.0) / 2.0;
        assert!((axis.azimuths[argmax(&spec)] - th).abs() <= half);
    }

    #[test]
    fn angle_spectrum_rejects_single_channel() {
        let v = steering_vector(15, 0.5, 0.0);
        assert!(matches!(angle_spectrum(&v, 1, 64, 0.5), Err(Error::TooFewChannels(1))));
    }

    #[test]
    fn parseval_with_rectangular_windows() {
        let p = RadarParams::default();
        let cfg = DspConfig {
            range_window: Window::Rectangular,
            doppler_window: Window::Rectangular,
            mti: false,
            ..DspConfig::default()
        };
        let pre = Preprocessor::new(&p, &cfg).unwrap();
        let mut f = frame_with(&quiet(), &[Scatterer::fixed(0.3, 3.0, 0.5)]);
        crate::synth::add_noise(&mut f, 1.0, 9);
        let e0 = f.total_power();
        let prof = pre.range_fft(&f);
        let e1 = prof.total_power() / 56.0;
        assert!((e1 / e0 - 1.0).abs() < 1e-9);
        let rd = pre.doppler_fft(&prof);
        let e2 = rd.total_power() / (56.0 * 90.0);
        assert!((e2 / e0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn map_axes_monotonic_and_nonnegative() {
        let p = RadarParams::default();
        let pre = Preprocessor::new(&p, &DspConfig::default()).unwrap();
        let s = Scatterer { range_m: 4.0, azimuth_rad: 0.2, radial_velocity_mps: 0.8, amplitude: 0.2 };
        let mut f = frame_with(&quiet(), &[s]);
        crate::synth::add_noise(&mut f, 1.0, 1);
        let pf = pre.process(&f, 15, 0).unwrap();
        for m in [&pf.ra, &pf.rd] {
            assert_eq!(m.data.len(), m.rows * m.cols);
            assert!(m.data.iter().all(|v| v.is_finite() && *v >= 0.0));
            assert!(m.range_axis.windows(2).all(|w| w[1] > w[0]));
            assert!(m.cross_axis.windows(2).all(|w| w[1] > w[0]));
        }
        // both maps put the peak on the same range bin
        assert_eq!(pf.ra.argmax().0, pf.rd.argmax().0);
    }
}
