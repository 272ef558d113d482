//! DSCM multiplexing, the optical channel and subcarrier selection at the
//! leaf.
//!
//! The laser stage models the beat between the hub laser and the leaf LO:
//! it applies the residual frequency offset and the combined Wiener phase
//! noise once, to both polarizations. `select_subcarrier` then shifts the
//! chosen subcarrier to baseband at its nominal center, so the recovered
//! baseband still rotates at the configured offset.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dsp::{filter_spectral, gaussian_noise, resample, RngStream, SampleTrace, C64};
use crate::error::{Result, TfitError};
use crate::tfit::DualPolFrame;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Carrier wavelength of the hub laser.
pub const CARRIER_WAVELENGTH_M: f64 = 1550.12e-9;
/// OSNR reference bandwidth (0.1 nm at 1550 nm).
pub const OSNR_REF_BANDWIDTH_HZ: f64 = 12.5e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierPlan {
    pub n_sc: usize,
    pub per_sc_baud_hz: f64,
    /// Index 0 is SC-1 (highest positive frequency), descending.
    pub centers_hz: Vec<f64>,
    pub rrc_rolloff: f64,
}

impl Default for SubcarrierPlan {
    fn default() -> Self {
        SubcarrierPlan {
            n_sc: 4,
            per_sc_baud_hz: 8e9,
            centers_hz: vec![13.2e9, 4.4e9, -4.4e9, -13.2e9],
            rrc_rolloff: 0.1,
        }
    }
}

impl SubcarrierPlan {
    pub fn validate(&self) -> Result<()> {
        if self.centers_hz.len() != self.n_sc || self.n_sc == 0 {
            return Err(TfitError::config(format!(
                "plan lists {} centers for {} subcarriers",
                self.centers_hz.len(),
                self.n_sc
            )));
        }
        if !(self.per_sc_baud_hz > 0.0) {
            return Err(TfitError::config("subcarrier baud rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.rrc_rolloff) {
            return Err(TfitError::config("roll-off must lie in [0, 1)"));
        }
        let tol = 1e-6 * self.per_sc_baud_hz;
        for &c in &self.centers_hz {
            if !self.centers_hz.iter().any(|&o| (o + c).abs() < tol) {
                return Err(TfitError::config(format!(
                    "subcarrier at {c} Hz has no symmetric partner"
                )));
            }
        }
        let mut sorted = self.centers_hz.clone();
        sorted.sort_by(f64::total_cmp);
        for w in sorted.windows(2) {
            if w[1] - w[0] < self.band_hz() - tol {
                return Err(TfitError::config(format!(
                    "subcarriers at {} and {} Hz overlap (occupied band {} Hz)",
                    w[0],
                    w[1],
                    self.band_hz()
                )));
            }
        }
        Ok(())
    }

    /// Occupied bandwidth of one subcarrier, `baud * (1 + rolloff)`.
    pub fn band_hz(&self) -> f64 {
        self.per_sc_baud_hz * (1.0 + self.rrc_rolloff)
    }

    pub fn center(&self, sc_index: usize) -> Result<f64> {
        self.centers_hz.get(sc_index).copied().ok_or_else(|| {
            TfitError::config(format!(
                "subcarrier index {sc_index} out of range (plan has {})",
                self.n_sc
            ))
        })
    }

    /// Highest frequency the composite occupies.
    pub fn composite_edge_hz(&self) -> f64 {
        self.centers_hz.iter().fold(0.0f64, |m, c| m.max(c.abs())) + self.band_hz() / 2.0
    }

    /// Total occupied spectrum of all subcarriers.
    pub fn occupancy_hz(&self) -> f64 {
        self.n_sc as f64 * self.band_hz()
    }

    /// Sample rate of the estimator and demodulator: 2 samples per symbol.
    pub fn working_rate_hz(&self) -> f64 {
        2.0 * self.per_sc_baud_hz
    }
}

/// Root-raised-cosine amplitude response with unit passband gain.
pub fn rrc_response(f: f64, baud_hz: f64, rolloff: f64) -> f64 {
    let af = f.abs();
    let lo = (1.0 - rolloff) * baud_hz / 2.0;
    let hi = (1.0 + rolloff) * baud_hz / 2.0;
    if af <= lo {
        1.0
    } else if af <= hi {
        (0.5 * (1.0 + (PI / (rolloff * baud_hz) * (af - lo)).cos())).sqrt()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub freq_offset_hz: f64,
    pub linewidth_hz: f64,
    /// `None` disables noise (infinite OSNR).
    pub osnr_db: Option<f64>,
    pub fiber_km: f64,
    pub dispersion_ps_nm_km: f64,
    pub enable_cd: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            freq_offset_hz: 100e6,
            linewidth_hz: 1e5,
            osnr_db: Some(17.0),
            fiber_km: 100.0,
            dispersion_ps_nm_km: 16.8,
            enable_cd: false,
        }
    }
}

impl ChannelConfig {
    /// Noiseless channel with no offset, no phase noise and no dispersion.
    pub fn ideal() -> Self {
        ChannelConfig {
            freq_offset_hz: 0.0,
            linewidth_hz: 0.0,
            osnr_db: None,
            fiber_km: 0.0,
            dispersion_ps_nm_km: 16.8,
            enable_cd: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(osnr) = self.osnr_db {
            if !osnr.is_finite() {
                return Err(TfitError::config("OSNR must be finite (use no OSNR for noiseless)"));
            }
        }
        if !(self.fiber_km >= 0.0) || !(self.linewidth_hz >= 0.0) {
            return Err(TfitError::config("fiber length and linewidth must be >= 0"));
        }
        if !self.freq_offset_hz.is_finite() || !self.dispersion_ps_nm_km.is_finite() {
            return Err(TfitError::config("frequency offset and dispersion must be finite"));
        }
        Ok(())
    }

    /// Accumulated `lambda^2 D L / c` in s^2; the group delay slope of the
    /// fiber is this value per hertz.
    pub fn dispersion_s2(&self) -> f64 {
        let d_s_per_m2 = self.dispersion_ps_nm_km * 1e-6;
        CARRIER_WAVELENGTH_M * CARRIER_WAVELENGTH_M * d_s_per_m2 * self.fiber_km * 1e3 / SPEED_OF_LIGHT
    }

    /// Analytic group-delay difference between two baseband frequencies.
    pub fn cd_group_delay_diff_s(&self, f_a_hz: f64, f_b_hz: f64) -> f64 {
        self.dispersion_s2() * (f_a_hz - f_b_hz)
    }
}

/// `sum_i s_i(t) exp(j 2 pi center_i t)`.
pub fn mux_subcarriers(baseband: &[SampleTrace], plan: &SubcarrierPlan) -> Result<SampleTrace> {
    plan.validate()?;
    if baseband.len() != plan.n_sc {
        return Err(TfitError::config(format!(
            "{} baseband traces for {} subcarriers",
            baseband.len(),
            plan.n_sc
        )));
    }
    let first = &baseband[0];
    for b in &baseband[1..] {
        first.check_compatible(b)?;
    }
    let rate = first.sample_rate_hz();
    if plan.composite_edge_hz() > rate / 2.0 {
        return Err(TfitError::config(format!(
            "composite band edge {} Hz exceeds Nyquist {} Hz",
            plan.composite_edge_hz(),
            rate / 2.0
        )));
    }
    let mut out = vec![C64::new(0.0, 0.0); first.len()];
    for (sig, &fc) in baseband.iter().zip(&plan.centers_hz) {
        let w = 2.0 * PI * fc / rate;
        for (k, (o, s)) in out.iter_mut().zip(sig.samples()).enumerate() {
            *o += s * C64::from_polar(1.0, w * k as f64);
        }
    }
    SampleTrace::new(out, rate)
}

/// Laser phase trajectory `2 pi df t + phi(t)`, with `phi` a Wiener process
/// of increment variance `2 pi linewidth T`.
pub fn laser_phase(len: usize, sample_rate_hz: f64, cfg: &ChannelConfig, rng: &mut RngStream) -> Vec<f64> {
    let ts = 1.0 / sample_rate_hz;
    let step_sigma = (2.0 * PI * cfg.linewidth_hz * ts).sqrt();
    let mut phi = 0.0;
    (0..len)
        .map(|k| {
            if k > 0 && step_sigma > 0.0 {
                phi += step_sigma * rng.standard_normal();
            }
            2.0 * PI * cfg.freq_offset_hz * k as f64 * ts + phi
        })
        .collect()
}

fn rotate(trace: &SampleTrace, phase: &[f64]) -> SampleTrace {
    trace.map(|k, s| s * C64::from_polar(1.0, phase[k]))
}

pub fn apply_laser(trace: &SampleTrace, cfg: &ChannelConfig, rng: &mut RngStream) -> Result<SampleTrace> {
    cfg.validate()?;
    if cfg.freq_offset_hz == 0.0 && cfg.linewidth_hz == 0.0 {
        return Ok(trace.clone());
    }
    let phase = laser_phase(trace.len(), trace.sample_rate_hz(), cfg, rng);
    Ok(rotate(trace, &phase))
}

/// One laser trajectory shared by both polarizations.
pub fn apply_laser_dual(frame: &DualPolFrame, cfg: &ChannelConfig, rng: &mut RngStream) -> Result<DualPolFrame> {
    cfg.validate()?;
    if cfg.freq_offset_hz == 0.0 && cfg.linewidth_hz == 0.0 {
        return Ok(frame.clone());
    }
    let phase = laser_phase(frame.len(), frame.sample_rate_hz(), cfg, rng);
    DualPolFrame::new(rotate(&frame.x, &phase), rotate(&frame.y, &phase))
}

/// In-band SNR implied by an OSNR for a signal occupying `signal_band_hz`.
pub fn in_band_snr_db(osnr_db: f64, signal_band_hz: f64) -> f64 {
    osnr_db + 10.0 * (OSNR_REF_BANDWIDTH_HZ / signal_band_hz).log10()
}

/// Per-sample complex noise variance that sets `signal_power` against
/// white noise in the 12.5 GHz reference bandwidth to `osnr_db`.
pub fn osnr_noise_variance(signal_power: f64, sample_rate_hz: f64, osnr_db: f64) -> f64 {
    let osnr = 10f64.powf(osnr_db / 10.0);
    signal_power * sample_rate_hz / (OSNR_REF_BANDWIDTH_HZ * osnr)
}

/// Adds white noise at the configured OSNR, measuring the signal power from
/// the trace. Returns the noisy trace and the in-band SNR (dB) the noise
/// level corresponds to over `signal_band_hz`.
pub fn add_osnr_noise(
    trace: &SampleTrace,
    cfg: &ChannelConfig,
    signal_band_hz: f64,
    rng: &mut RngStream,
) -> Result<(SampleTrace, f64)> {
    if !(signal_band_hz > 0.0) {
        return Err(TfitError::config("signal band must be positive"));
    }
    let Some(osnr_db) = cfg.osnr_db else {
        return Ok((trace.clone(), f64::INFINITY));
    };
    let var = osnr_noise_variance(trace.power(), trace.sample_rate_hz(), osnr_db);
    let noise = gaussian_noise(trace.len(), var, trace.sample_rate_hz(), rng)?;
    Ok((trace.add(&noise)?, in_band_snr_db(osnr_db, signal_band_hz)))
}

/// Adds independent noise to both polarizations with the level referenced
/// to `signal_power` (per polarization).
pub fn add_osnr_noise_dual(
    frame: &DualPolFrame,
    cfg: &ChannelConfig,
    signal_power: f64,
    rng: &mut RngStream,
) -> Result<DualPolFrame> {
    let Some(osnr_db) = cfg.osnr_db else {
        return Ok(frame.clone());
    };
    let var = osnr_noise_variance(signal_power, frame.sample_rate_hz(), osnr_db);
    frame.try_map(|_, t| {
        let n = gaussian_noise(t.len(), var, t.sample_rate_hz(), rng)?;
        t.add(&n)
    })
}

/// All-pass fiber dispersion `H(f) = exp(-j pi lambda^2 D L f^2 / c)`.
pub fn apply_cd(trace: &SampleTrace, cfg: &ChannelConfig) -> Result<SampleTrace> {
    cfg.validate()?;
    if !cfg.enable_cd || cfg.fiber_km == 0.0 {
        return Ok(trace.clone());
    }
    let k = cfg.dispersion_s2();
    Ok(filter_spectral(trace, |f| C64::from_polar(1.0, -PI * k * f * f)))
}

pub fn apply_cd_dual(frame: &DualPolFrame, cfg: &ChannelConfig) -> Result<DualPolFrame> {
    frame.try_map(|_, t| apply_cd(t, cfg))
}

/// Band filter applied after the LO shifts a subcarrier to baseband.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SelectionFilter {
    /// RRC matched to the subcarrier's pulse shape.
    Rrc,
    /// Brick-wall low-pass of the given half-width.
    Flat { half_width_hz: f64 },
}

impl Default for SelectionFilter {
    fn default() -> Self {
        SelectionFilter::Rrc
    }
}

impl SelectionFilter {
    pub fn response(&self, f: f64, plan: &SubcarrierPlan) -> f64 {
        match *self {
            SelectionFilter::Rrc => rrc_response(f, plan.per_sc_baud_hz, plan.rrc_rolloff),
            SelectionFilter::Flat { half_width_hz } => {
                if f.abs() <= half_width_hz {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Tunes the LO to subcarrier `sc_index`, applies the subcarrier's RRC band
/// filter and resamples to 2 samples per symbol.
pub fn select_subcarrier(trace: &SampleTrace, plan: &SubcarrierPlan, sc_index: usize) -> Result<SampleTrace> {
    select_subcarrier_with(trace, plan, sc_index, SelectionFilter::Rrc)
}

pub fn select_subcarrier_with(
    trace: &SampleTrace,
    plan: &SubcarrierPlan,
    sc_index: usize,
    filter: SelectionFilter,
) -> Result<SampleTrace> {
    plan.validate()?;
    if let SelectionFilter::Flat { half_width_hz } = filter {
        if !(half_width_hz > 0.0 && half_width_hz < plan.working_rate_hz() / 2.0) {
            return Err(TfitError::config(format!(
                "flat selection half-width {half_width_hz} Hz must lie inside the working Nyquist band"
            )));
        }
    }
    let fc = plan.center(sc_index)?;
    let rate = trace.sample_rate_hz();
    let w = -2.0 * PI * fc / rate;
    let shifted = trace.map(|k, s| s * C64::from_polar(1.0, w * k as f64));
    let filtered = filter_spectral(&shifted, |f| C64::new(filter.response(f, plan), 0.0));
    resample(&filtered, plan.working_rate_hz())
}

pub fn select_subcarrier_dual(
    frame: &DualPolFrame,
    plan: &SubcarrierPlan,
    sc_index: usize,
    filter: SelectionFilter,
) -> Result<DualPolFrame> {
    frame.try_map(|_, t| select_subcarrier_with(t, plan, sc_index, filter))
}
