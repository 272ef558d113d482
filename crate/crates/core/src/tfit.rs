//! Time-and-frequency interleaving tones (TFITs): the dual-polarization
//! training frame carried on a symmetric subcarrier pair.
//!
//! Each slot carries two tones, `f1` and `f2`. On subcarrier +fc a tone is
//! the waveform `A cos(2 pi f t + psi) exp(j pi/4)`; the mirrored subcarrier
//! -fc carries its conjugate (tone lands on the composite I tributary) or its
//! negated conjugate (tone lands on the Q tributary). Slot t1 puts `f2` on I
//! and `f1` on Q, slot t2 swaps them; t3/t4 repeat this on the Y
//! polarization while X is silent.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::dsp::{SampleTrace, C64};
use crate::error::{Result, TfitError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfitPlan {
    /// Per-subcarrier symbol rate.
    pub baud_rate_hz: f64,
    pub tone_f1_hz: f64,
    pub tone_f2_hz: f64,
    /// Intermediate frequency of the upper subcarrier; its mirror sits at -fc.
    pub sc_center_hz: f64,
    pub slot_len_symbols: usize,
    pub n_blocks: usize,
    pub tone_amplitude: f64,
    pub samples_per_symbol_gen: usize,
    /// Initial phase of each tone at the start of every slot.
    pub tone_phase_f1_rad: f64,
    pub tone_phase_f2_rad: f64,
}

impl Default for TfitPlan {
    fn default() -> Self {
        TfitPlan {
            baud_rate_hz: 8e9,
            tone_f1_hz: 2e9,
            tone_f2_hz: 4e9,
            sc_center_hz: 13.2e9,
            slot_len_symbols: 2048,
            n_blocks: 3,
            tone_amplitude: FRAC_1_SQRT_2,
            samples_per_symbol_gen: 8,
            tone_phase_f1_rad: 0.0,
            tone_phase_f2_rad: 0.0,
        }
    }
}

fn is_integral(x: f64) -> bool {
    (x - x.round()).abs() < 1e-9 * x.abs().max(1.0)
}

impl TfitPlan {
    pub fn validate(&self) -> Result<()> {
        let fs = self.baud_rate_hz;
        if !(fs.is_finite() && fs > 0.0) {
            return Err(TfitError::config("baud rate must be positive"));
        }
        if !(0.0 < self.tone_f1_hz && self.tone_f1_hz < self.tone_f2_hz && self.tone_f2_hz <= fs) {
            return Err(TfitError::config(format!(
                "tones must satisfy 0 < f1 < f2 <= baud rate (f1 = {}, f2 = {})",
                self.tone_f1_hz, self.tone_f2_hz
            )));
        }
        if self.slot_len_symbols == 0 || self.n_blocks == 0 || self.samples_per_symbol_gen == 0 {
            return Err(TfitError::config(
                "slot length, block count and samples per symbol must be >= 1",
            ));
        }
        for f in [self.tone_f1_hz, self.tone_f2_hz] {
            let periods = self.slot_len_symbols as f64 * f / fs;
            if !is_integral(periods) {
                return Err(TfitError::config(format!(
                    "slot of {} symbols holds {periods} periods of the {f} Hz tone; must be whole",
                    self.slot_len_symbols
                )));
            }
        }
        if !(self.tone_amplitude.is_finite() && self.tone_amplitude > 0.0) {
            return Err(TfitError::config("tone amplitude must be positive"));
        }
        let top = self.sc_center_hz.abs() + self.tone_f2_hz;
        if top >= self.gen_rate_hz() / 2.0 {
            return Err(TfitError::config(format!(
                "tone at {top} Hz exceeds generation Nyquist {}",
                self.gen_rate_hz() / 2.0
            )));
        }
        Ok(())
    }

    pub fn gen_rate_hz(&self) -> f64 {
        self.baud_rate_hz * self.samples_per_symbol_gen as f64
    }

    pub fn slot_len_samples(&self) -> usize {
        self.slot_len_symbols * self.samples_per_symbol_gen
    }

    pub fn slot_duration_s(&self) -> f64 {
        self.slot_len_symbols as f64 / self.baud_rate_hz
    }

    pub fn block_len_samples(&self) -> usize {
        4 * self.slot_len_samples()
    }

    pub fn frame_len_samples(&self) -> usize {
        self.n_blocks * self.block_len_samples()
    }

    /// Same plan with the subcarrier pair moved to `±center_hz`.
    pub fn with_center(&self, center_hz: f64) -> TfitPlan {
        TfitPlan {
            sc_center_hz: center_hz,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SlotId {
    T1,
    T2,
    T3,
    T4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    X,
    Y,
}

/// Which tone a composite tributary carries in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tone {
    F1,
    F2,
}

impl SlotId {
    pub const ALL: [SlotId; 4] = [SlotId::T1, SlotId::T2, SlotId::T3, SlotId::T4];

    pub fn index(self) -> usize {
        match self {
            SlotId::T1 => 0,
            SlotId::T2 => 1,
            SlotId::T3 => 2,
            SlotId::T4 => 3,
        }
    }

    pub fn polarization(self) -> Polarization {
        match self {
            SlotId::T1 | SlotId::T2 => Polarization::X,
            SlotId::T3 | SlotId::T4 => Polarization::Y,
        }
    }

    /// Tone on the composite I tributary; the other tone is on Q.
    pub fn i_tone(self) -> Tone {
        match self {
            SlotId::T1 | SlotId::T3 => Tone::F2,
            SlotId::T2 | SlotId::T4 => Tone::F1,
        }
    }

    pub fn q_tone(self) -> Tone {
        match self.i_tone() {
            Tone::F1 => Tone::F2,
            Tone::F2 => Tone::F1,
        }
    }

    /// The slot pair used to estimate one polarization.
    pub fn pair(pol: Polarization) -> [SlotId; 2] {
        match pol {
            Polarization::X => [SlotId::T1, SlotId::T2],
            Polarization::Y => [SlotId::T3, SlotId::T4],
        }
    }
}

impl Tone {
    pub fn freq_hz(self, plan: &TfitPlan) -> f64 {
        match self {
            Tone::F1 => plan.tone_f1_hz,
            Tone::F2 => plan.tone_f2_hz,
        }
    }

    pub fn phase_rad(self, plan: &TfitPlan) -> f64 {
        match self {
            Tone::F1 => plan.tone_phase_f1_rad,
            Tone::F2 => plan.tone_phase_f2_rad,
        }
    }
}

/// X and Y polarization traces of equal length and rate.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPolFrame {
    pub x: SampleTrace,
    pub y: SampleTrace,
}

impl DualPolFrame {
    pub fn new(x: SampleTrace, y: SampleTrace) -> Result<Self> {
        x.check_compatible(&y)?;
        Ok(DualPolFrame { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.x.sample_rate_hz()
    }

    pub fn pol(&self, pol: Polarization) -> &SampleTrace {
        match pol {
            Polarization::X => &self.x,
            Polarization::Y => &self.y,
        }
    }

    pub fn concat(&self, other: &DualPolFrame) -> Result<DualPolFrame> {
        DualPolFrame::new(self.x.concat(&other.x)?, self.y.concat(&other.y)?)
    }

    /// Applies `f` to each polarization.
    pub fn try_map(
        &self,
        mut f: impl FnMut(Polarization, &SampleTrace) -> Result<SampleTrace>,
    ) -> Result<DualPolFrame> {
        DualPolFrame::new(f(Polarization::X, &self.x)?, f(Polarization::Y, &self.y)?)
    }

    pub fn power(&self) -> f64 {
        (self.x.energy() + self.y.energy()) / (2 * self.len()) as f64
    }
}

/// Baseband waveform of one tone on the upper subcarrier at time `t`.
pub fn tone_baseband(plan: &TfitPlan, tone: Tone, t: f64) -> C64 {
    let amp = plan.tone_amplitude * (2.0 * PI * tone.freq_hz(plan) * t + tone.phase_rad(plan)).cos();
    C64::from_polar(amp, FRAC_PI_4)
}

fn active_slot(plan: &TfitPlan, slot: SlotId) -> SampleTrace {
    let rate = plan.gen_rate_hz();
    let fc = plan.sc_center_hz;
    let samples = (0..plan.slot_len_samples())
        .map(|k| {
            let t = k as f64 / rate;
            let carrier = C64::from_polar(1.0, 2.0 * PI * fc * t);
            // tone on I: mirror = conj; tone on Q: mirror = -conj
            let on_i = tone_baseband(plan, slot.i_tone(), t);
            let on_q = tone_baseband(plan, slot.q_tone(), t);
            let upper = on_i + on_q;
            let lower = on_i.conj() - on_q.conj();
            upper * carrier + lower * carrier.conj()
        })
        .collect();
    SampleTrace::from_parts(samples, rate)
}

pub fn build_slot(plan: &TfitPlan, slot: SlotId) -> Result<DualPolFrame> {
    plan.validate()?;
    let active = active_slot(plan, slot);
    let silent = SampleTrace::zeros(active.len(), active.sample_rate_hz())?;
    match slot.polarization() {
        Polarization::X => DualPolFrame::new(active, silent),
        Polarization::Y => DualPolFrame::new(silent, active),
    }
}

/// `t1 | t2 | t3 | t4`, repeated `n_blocks` times.
pub fn build_frame(plan: &TfitPlan) -> Result<DualPolFrame> {
    plan.validate()?;
    let slots = SlotId::ALL
        .iter()
        .map(|&s| build_slot(plan, s))
        .collect::<Result<Vec<_>>>()?;
    let mut x = Vec::with_capacity(plan.frame_len_samples());
    let mut y = Vec::with_capacity(plan.frame_len_samples());
    for _ in 0..plan.n_blocks {
        for s in &slots {
            x.extend_from_slice(s.x.samples());
            y.extend_from_slice(s.y.samples());
        }
    }
    let rate = plan.gen_rate_hz();
    DualPolFrame::new(SampleTrace::new(x, rate)?, SampleTrace::new(y, rate)?)
}

/// Sample offset of `slot` in `block` relative to the frame start, at the
/// given samples-per-symbol.
pub fn slot_offset(plan: &TfitPlan, block: usize, slot: SlotId, samples_per_symbol: usize) -> usize {
    (block * 4 + slot.index()) * plan.slot_len_symbols * samples_per_symbol
}
