//! Far-end estimation of Rx and Tx IQ skew and power imbalance from the
//! received TFIT slots.
//!
//! Timing is measured with a Godard-style detector that pairs each tone's
//! `+f` and `-f` lines: for a trace advanced by `tau` the pair product
//! `S(k) S*(k - 2f)` rotates by `4 pi f tau`. Rx quantities compare the I and
//! Q tributaries of one slot; Tx quantities compare the two tones of one
//! complex slot (skew) or the same tone across the slot pair (imbalance),
//! after the Rx impairments have been compensated.

use std::collections::BTreeSet;
use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::compensate::{compensate_rx, CompensationSpec};
use crate::dsp::{fft, hann_window, SampleTrace, Spectrum, C64};
use crate::error::{Result, TfitError};
use crate::tfit::{slot_offset, DualPolFrame, Polarization, SlotId, TfitPlan, Tone};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GodardConfig {
    /// Samples per slot at 2 samples/symbol.
    pub fft_len: usize,
    /// Half-width of the averaging window, in bins.
    pub n_avg_bins: usize,
    pub tone_f1_hz: f64,
    pub tone_f2_hz: f64,
    /// Nominal tone phases at each slot start; removed from every timing.
    pub tone_phase_f1_rad: f64,
    pub tone_phase_f2_rad: f64,
    /// Tones weaker than this against the local noise floor are rejected.
    pub min_tone_snr_db: f64,
}

impl GodardConfig {
    pub fn from_plan(plan: &TfitPlan) -> Self {
        GodardConfig {
            fft_len: 2 * plan.slot_len_symbols,
            n_avg_bins: 32,
            tone_f1_hz: plan.tone_f1_hz,
            tone_f2_hz: plan.tone_f2_hz,
            tone_phase_f1_rad: plan.tone_phase_f1_rad,
            tone_phase_f2_rad: plan.tone_phase_f2_rad,
            min_tone_snr_db: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.fft_len.is_power_of_two() {
            return Err(TfitError::config(format!(
                "Godard FFT length {} is not a power of two",
                self.fft_len
            )));
        }
        if self.n_avg_bins < 1 || self.n_avg_bins > self.fft_len / 16 {
            return Err(TfitError::config(format!(
                "averaging half-width {} outside [1, N/16]",
                self.n_avg_bins
            )));
        }
        if !(self.tone_f1_hz > 0.0 && self.tone_f2_hz > self.tone_f1_hz) {
            return Err(TfitError::config("tones must satisfy 0 < f1 < f2"));
        }
        Ok(())
    }

    pub fn tone_hz(&self, tone: Tone) -> f64 {
        match tone {
            Tone::F1 => self.tone_f1_hz,
            Tone::F2 => self.tone_f2_hz,
        }
    }

    fn tone_phase(&self, tone_hz: f64) -> f64 {
        if tone_hz == self.tone_f1_hz {
            self.tone_phase_f1_rad
        } else if tone_hz == self.tone_f2_hz {
            self.tone_phase_f2_rad
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tributary {
    I,
    Q,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingEstimate {
    /// Timing advance of the tone, wrapped to `|tau| < 1/(4 f)`.
    pub tau_s: f64,
    pub tone_hz: f64,
    pub slot: Option<SlotId>,
    pub block: Option<usize>,
    pub tributary: Tributary,
    /// Noise-corrected tone power in the averaging window.
    pub tone_power: f64,
    pub tone_snr_db: f64,
}

/// Wraps `x` into `[-period/2, period/2)`.
pub fn wrap(x: f64, period: f64) -> f64 {
    x - period * (x / period + 0.5).floor()
}

/// Hann-windowed spectrum of a slot.
pub fn slot_spectrum(samples: &[C64], sample_rate_hz: f64) -> Result<Spectrum> {
    let n = samples.len();
    if !n.is_power_of_two() {
        return Err(TfitError::config(format!("slot length {n} is not a power of two")));
    }
    let w = hann_window(n);
    let mut buf: Vec<C64> = samples.iter().zip(&w).map(|(s, w)| s * w).collect();
    fft(&mut buf);
    Spectrum::new(buf, sample_rate_hz / n as f64)
}

fn real_spectrum(v: &[f64], sample_rate_hz: f64) -> Result<Spectrum> {
    let c: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
    slot_spectrum(&c, sample_rate_hz)
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Godard timing of the tone at `tone_hz`.
///
/// The pair product is searched for its peak within `N/32` bins of the
/// nominal tone bin to absorb the residual frequency offset; `2n` bins
/// around the peak are summed, together with the mirrored window when it
/// holds a comparable peak (a real tributary carries both `f + df` and
/// `f - df`).
pub fn godard_tau(spectrum: &Spectrum, tone_hz: f64, cfg: &GodardConfig) -> Result<TimingEstimate> {
    cfg.validate()?;
    let n = spectrum.len();
    if n != cfg.fft_len {
        return Err(TfitError::config(format!(
            "spectrum has {n} bins, Godard detector expects {}",
            cfg.fft_len
        )));
    }
    let bins = spectrum.bins();
    let df = spectrum.bin_spacing_hz();
    if !(tone_hz > 0.0 && 2.0 * tone_hz <= spectrum.sample_rate_hz() / 2.0 + df) {
        return Err(TfitError::config(format!(
            "tone {tone_hz} Hz does not fit a {} Hz spectrum",
            spectrum.sample_rate_hz()
        )));
    }
    let ni = n as i64;
    let at = |k: i64| bins[k.rem_euclid(ni) as usize];
    let k_nom = (tone_hz / df).round() as i64;
    let m = (2.0 * tone_hz / df).round() as i64;
    let pair = |k: i64| at(k) * at(k - m).conj();
    let half = cfg.n_avg_bins as i64;

    let search = ni / 32;
    let d_hat = (-search..=search)
        .max_by(|&a, &b| pair(k_nom + a).norm().total_cmp(&pair(k_nom + b).norm()))
        .unwrap_or(0);
    let window = |c: i64| (c - half)..(c + half);
    let peak_in = |c: i64| window(c).map(|k| pair(k).norm()).fold(0.0, f64::max);

    let mut used: BTreeSet<i64> = window(k_nom + d_hat).collect();
    if d_hat != 0 && peak_in(k_nom - d_hat) >= 0.1 * peak_in(k_nom + d_hat) {
        used.extend(window(k_nom - d_hat));
    }
    let sum: C64 = used.iter().map(|&k| pair(k)).sum();
    let raw_power: f64 = used.iter().map(|&k| at(k).norm_sqr() + at(k - m).norm_sqr()).sum();

    // noise floor from a guard ring around every window, excluding windows
    let centers: Vec<i64> = used.iter().flat_map(|&k| [k, k - m]).collect();
    let occupied: BTreeSet<i64> = centers.iter().map(|k| k.rem_euclid(ni)).collect();
    let ring: BTreeSet<i64> = used
        .iter()
        .flat_map(|&k| [k, k - m])
        .flat_map(|c| (c - 2 * half..c + 2 * half).map(move |k| k.rem_euclid(ni)))
        .filter(|k| !occupied.contains(k))
        .collect();
    let noise_per_bin = median(ring.iter().map(|&k| bins[k as usize].norm_sqr()).collect()) / LN_2;
    let noise = noise_per_bin * occupied.len() as f64;
    let tone_power = (raw_power - noise).max(0.0);
    let tone_snr_db = if noise > 0.0 {
        10.0 * (tone_power / noise).log10()
    } else {
        f64::INFINITY
    };
    if !(tone_snr_db >= cfg.min_tone_snr_db) {
        return Err(TfitError::LowConfidence { tone_hz, tone_snr_db });
    }
    let phase = wrap(sum.arg() - 2.0 * cfg.tone_phase(tone_hz), 2.0 * PI);
    Ok(TimingEstimate {
        tau_s: phase / (4.0 * PI * tone_hz),
        tone_hz,
        slot: None,
        block: None,
        tributary: Tributary::Complex,
        tone_power,
        tone_snr_db,
    })
}

/// One slot of one polarization, at 2 samples/symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotTrace {
    pub block: usize,
    pub slot: SlotId,
    pub trace: SampleTrace,
}

/// Cuts the slots of `pol` out of a capture whose TFIT frame starts at
/// `frame_start`.
pub fn slot_traces(
    capture: &SampleTrace,
    plan: &TfitPlan,
    frame_start: usize,
    pol: Polarization,
) -> Result<Vec<SlotTrace>> {
    let slot_len = 2 * plan.slot_len_symbols;
    let frame_len = 4 * plan.n_blocks * slot_len;
    if frame_start + frame_len > capture.len() {
        return Err(TfitError::Detection(format!(
            "frame at {frame_start} overruns a {}-sample capture",
            capture.len()
        )));
    }
    let mut out = Vec::with_capacity(2 * plan.n_blocks);
    for block in 0..plan.n_blocks {
        for slot in SlotId::pair(pol) {
            let start = frame_start + slot_offset(plan, block, slot, 2);
            out.push(SlotTrace {
                block,
                slot,
                trace: capture.window(start, slot_len),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RxToneResult {
    pub i: TimingEstimate,
    pub q: TimingEstimate,
    /// `tau_Q - tau_I`.
    pub skew_s: f64,
    /// `P_Q / P_I`.
    pub power_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RxEstimate {
    /// Mean of all per-tone skews.
    pub skew_s: f64,
    /// Mean of all per-tone power ratios in dB.
    pub imbalance_db: f64,
    pub per_tone: Vec<RxToneResult>,
}

fn tag(est: TimingEstimate, s: &SlotTrace, tributary: Tributary) -> TimingEstimate {
    TimingEstimate {
        slot: Some(s.slot),
        block: Some(s.block),
        tributary,
        ..est
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

fn rx_tone(s: &SlotTrace, i_spec: &Spectrum, q_spec: &Spectrum, tone_hz: f64, cfg: &GodardConfig) -> Result<RxToneResult> {
    let i = tag(godard_tau(i_spec, tone_hz, cfg)?, s, Tributary::I);
    let q = tag(godard_tau(q_spec, tone_hz, cfg)?, s, Tributary::Q);
    if i.tone_power <= 0.0 {
        return Err(TfitError::Degenerate(format!("no {tone_hz} Hz tone power on I")));
    }
    Ok(RxToneResult {
        i,
        q,
        skew_s: wrap(q.tau_s - i.tau_s, 1.0 / (2.0 * tone_hz)),
        power_ratio: q.tone_power / i.tone_power,
    })
}

/// Rx skew and imbalance from every tone of every slot.
pub fn estimate_rx(slots: &[SlotTrace], cfg: &GodardConfig) -> Result<RxEstimate> {
    if slots.is_empty() {
        return Err(TfitError::config("no slots to estimate from"));
    }
    let mut per_tone = Vec::with_capacity(2 * slots.len());
    for s in slots {
        let rate = s.trace.sample_rate_hz();
        let i_spec = real_spectrum(&s.trace.i_tributary(), rate)?;
        let q_spec = real_spectrum(&s.trace.q_tributary(), rate)?;
        for tone in [Tone::F1, Tone::F2] {
            per_tone.push(rx_tone(s, &i_spec, &q_spec, cfg.tone_hz(tone), cfg)?);
        }
    }
    Ok(RxEstimate {
        skew_s: mean(per_tone.iter().map(|r| r.skew_s)),
        imbalance_db: mean(per_tone.iter().map(|r| 10.0 * r.power_ratio.log10())),
        per_tone,
    })
}

pub fn estimate_rx_skew(slots: &[SlotTrace], cfg: &GodardConfig) -> Result<f64> {
    Ok(estimate_rx(slots, cfg)?.skew_s)
}

pub fn estimate_rx_imbalance(slots: &[SlotTrace], cfg: &GodardConfig) -> Result<f64> {
    Ok(estimate_rx(slots, cfg)?.imbalance_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxSlotResult {
    pub block: usize,
    pub slot: SlotId,
    pub f1: TimingEstimate,
    pub f2: TimingEstimate,
    /// Timing of the Q-side tone minus timing of the I-side tone.
    pub skew_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxRatioResult {
    pub block: usize,
    pub tone_hz: f64,
    /// Tone power when carried on Q over its power when carried on I.
    pub power_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxEstimate {
    /// Mean of all per-slot skews.
    pub skew_s: f64,
    /// Mean of all per-tone power ratios in dB.
    pub imbalance_db: f64,
    pub per_slot: Vec<TxSlotResult>,
    pub ratios: Vec<TxRatioResult>,
}

impl TxEstimate {
    /// Mean per-slot skew of one slot kind (e.g. all t1 slots).
    pub fn slot_mean(&self, slot: SlotId) -> Option<f64> {
        let v: Vec<f64> = self.per_slot.iter().filter(|r| r.slot == slot).map(|r| r.skew_s).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn tx_slot(s: &SlotTrace, cfg: &GodardConfig) -> Result<TxSlotResult> {
    let spec = slot_spectrum(s.trace.samples(), s.trace.sample_rate_hz())?;
    let f1 = tag(godard_tau(&spec, cfg.tone_f1_hz, cfg)?, s, Tributary::Complex);
    let f2 = tag(godard_tau(&spec, cfg.tone_f2_hz, cfg)?, s, Tributary::Complex);
    let (q_side, i_side) = match s.slot.q_tone() {
        Tone::F1 => (f1, f2),
        Tone::F2 => (f2, f1),
    };
    Ok(TxSlotResult {
        block: s.block,
        slot: s.slot,
        f1,
        f2,
        skew_s: wrap(q_side.tau_s - i_side.tau_s, 1.0 / (2.0 * cfg.tone_f2_hz)),
    })
}

/// Tx skew and imbalance from complex slots whose Rx impairments have been
/// compensated. Every block must supply both slots of one polarization.
pub fn estimate_tx(slots: &[SlotTrace], cfg: &GodardConfig) -> Result<TxEstimate> {
    if slots.is_empty() {
        return Err(TfitError::config("no slots to estimate from"));
    }
    let per_slot = slots.iter().map(|s| tx_slot(s, cfg)).collect::<Result<Vec<_>>>()?;
    let mut ratios = Vec::new();
    let blocks: BTreeSet<usize> = per_slot.iter().map(|r| r.block).collect();
    for b in blocks {
        let in_block: Vec<&TxSlotResult> = per_slot.iter().filter(|r| r.block == b).collect();
        for tone in [Tone::F1, Tone::F2] {
            let pick = |on_q: bool| {
                in_block
                    .iter()
                    .find(|r| (r.slot.q_tone() == tone) == on_q)
                    .map(|r| match tone {
                        Tone::F1 => r.f1.tone_power,
                        Tone::F2 => r.f2.tone_power,
                    })
            };
            let (Some(p_q), Some(p_i)) = (pick(true), pick(false)) else {
                return Err(TfitError::config(format!("block {b} lacks a complete slot pair")));
            };
            if p_i <= 0.0 {
                return Err(TfitError::Degenerate(format!("no tone power in block {b}")));
            }
            ratios.push(TxRatioResult {
                block: b,
                tone_hz: cfg.tone_hz(tone),
                power_ratio: p_q / p_i,
            });
        }
    }
    Ok(TxEstimate {
        skew_s: mean(per_slot.iter().map(|r| r.skew_s)),
        imbalance_db: mean(ratios.iter().map(|r| 10.0 * r.power_ratio.log10())),
        per_slot,
        ratios,
    })
}

pub fn estimate_tx_skew(slots: &[SlotTrace], cfg: &GodardConfig) -> Result<f64> {
    Ok(estimate_tx(slots, cfg)?.skew_s)
}

pub fn estimate_tx_imbalance(slots: &[SlotTrace], cfg: &GodardConfig) -> Result<f64> {
    Ok(estimate_tx(slots, cfg)?.imbalance_db)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationReport {
    pub tau_rx_s: f64,
    pub imbalance_rx_db: f64,
    pub tau_tx_s: f64,
    pub imbalance_tx_db: f64,
    pub rx: RxEstimate,
    pub tx: TxEstimate,
}

impl PolarizationReport {
    /// Smallest tone SNR seen by any detector.
    pub fn min_tone_snr_db(&self) -> f64 {
        let rx = self.rx.per_tone.iter().flat_map(|r| [r.i.tone_snr_db, r.q.tone_snr_db]);
        let tx = self.tx.per_slot.iter().flat_map(|r| [r.f1.tone_snr_db, r.f2.tone_snr_db]);
        rx.chain(tx).fold(f64::INFINITY, f64::min)
    }

    pub fn rx_compensation(&self, apply_gsop_first: bool) -> Result<CompensationSpec> {
        CompensationSpec::from_estimate(self.tau_rx_s, self.imbalance_rx_db, apply_gsop_first)
    }

    pub fn tx_compensation(&self) -> Result<CompensationSpec> {
        CompensationSpec::from_estimate(self.tau_tx_s, self.imbalance_tx_db, false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub x: PolarizationReport,
    pub y: PolarizationReport,
    pub n_blocks_used: usize,
}

impl EstimateReport {
    pub fn pol(&self, pol: Polarization) -> &PolarizationReport {
        match pol {
            Polarization::X => &self.x,
            Polarization::Y => &self.y,
        }
    }
}

/// Full far-end estimation on one polarization of a capture: Rx estimates,
/// Rx compensation of the whole capture, then Tx estimates.
pub fn estimate_polarization(
    capture: &SampleTrace,
    plan: &TfitPlan,
    frame_start: usize,
    pol: Polarization,
    cfg: &GodardConfig,
    apply_gsop: bool,
) -> Result<PolarizationReport> {
    let rx = estimate_rx(&slot_traces(capture, plan, frame_start, pol)?, cfg)?;
    let spec = CompensationSpec::from_estimate(rx.skew_s, rx.imbalance_db, apply_gsop)?;
    let compensated = compensate_rx(capture, &spec)?;
    let tx = estimate_tx(&slot_traces(&compensated, plan, frame_start, pol)?, cfg)?;
    Ok(PolarizationReport {
        tau_rx_s: rx.skew_s,
        imbalance_rx_db: rx.imbalance_db,
        tau_tx_s: tx.skew_s,
        imbalance_tx_db: tx.imbalance_db,
        rx,
        tx,
    })
}

pub fn estimate_frame(
    capture: &DualPolFrame,
    plan: &TfitPlan,
    frame_start: usize,
    cfg: &GodardConfig,
    apply_gsop: bool,
) -> Result<EstimateReport> {
    Ok(EstimateReport {
        x: estimate_polarization(&capture.x, plan, frame_start, Polarization::X, cfg, apply_gsop)?,
        y: estimate_polarization(&capture.y, plan, frame_start, Polarization::Y, cfg, apply_gsop)?,
        n_blocks_used: plan.n_blocks,
    })
}
