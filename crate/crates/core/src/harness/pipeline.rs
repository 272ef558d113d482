use serde::{Deserialize, Serialize};

use crate::dsp::{RngStream, SampleTrace};
use crate::error::{Result, TfitError};
use crate::impair::{apply_rx_dual, apply_tx_dual, ImpairmentSet};
use crate::link::{
    add_osnr_noise_dual, apply_cd_dual, apply_laser_dual, select_subcarrier_dual, ChannelConfig, SelectionFilter,
    SubcarrierPlan,
};
use crate::tfit::{build_frame, DualPolFrame, TfitPlan};

/// Everything needed to simulate one TFIT capture at a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSetup {
    pub tfit: TfitPlan,
    pub subcarriers: SubcarrierPlan,
    /// Subcarrier the TFIT pair sits on and the leaf tunes to.
    pub sc_index: usize,
    pub channel: ChannelConfig,
    pub selection: SelectionFilter,
    pub impairments: ImpairmentSet,
    /// Idle samples before the frame, counted at 2 samples/symbol.
    pub lead_samples: usize,
    /// Idle samples after the frame, counted at 2 samples/symbol.
    pub tail_samples: usize,
}

impl Default for TrialSetup {
    fn default() -> Self {
        TrialSetup {
            tfit: TfitPlan::default(),
            subcarriers: SubcarrierPlan::default(),
            sc_index: 0,
            channel: ChannelConfig::default(),
            selection: SelectionFilter::Rrc,
            impairments: ImpairmentSet::default(),
            lead_samples: 0,
            tail_samples: 0,
        }
    }
}

impl TrialSetup {
    /// The TFIT plan moved onto the selected subcarrier.
    pub fn placed_plan(&self) -> Result<TfitPlan> {
        let plan = self.tfit.with_center(self.subcarriers.center(self.sc_index)?);
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        self.subcarriers.validate()?;
        self.channel.validate()?;
        self.impairments.validate()?;
        self.placed_plan()?;
        if (self.tfit.baud_rate_hz - self.subcarriers.per_sc_baud_hz).abs() > 1e-6 * self.tfit.baud_rate_hz {
            return Err(TfitError::config("TFIT and subcarrier baud rates differ"));
        }
        if self.tfit.samples_per_symbol_gen % 2 != 0 {
            return Err(TfitError::config("generation samples per symbol must be even"));
        }
        Ok(())
    }
}

/// Transmitted TFIT frame padded with idle symbols, at the generation rate.
pub fn transmitted_frame(setup: &TrialSetup) -> Result<DualPolFrame> {
    let plan = setup.placed_plan()?;
    let frame = build_frame(&plan)?;
    let ratio = plan.samples_per_symbol_gen / 2;
    let rate = plan.gen_rate_hz();
    let pad = |n: usize| -> Result<DualPolFrame> {
        DualPolFrame::new(SampleTrace::zeros(n * ratio, rate)?, SampleTrace::zeros(n * ratio, rate)?)
    };
    let mut out = frame;
    if setup.lead_samples > 0 {
        out = pad(setup.lead_samples)?.concat(&out)?;
    }
    if setup.tail_samples > 0 {
        out = out.concat(&pad(setup.tail_samples)?)?;
    }
    Ok(out)
}

/// Tx impairments and the shared fiber channel (CD, laser beat, ASE) applied
/// to `tx`, a dual-polarization composite at the generation rate. Noise is
/// referenced to `signal_power` per polarization.
pub fn channel(tx: &DualPolFrame, setup: &TrialSetup, signal_power: f64, rng: &mut RngStream) -> Result<DualPolFrame> {
    let impaired = apply_tx_dual(tx, &setup.impairments)?;
    let dispersed = apply_cd_dual(&impaired, &setup.channel)?;
    let lasered = apply_laser_dual(&dispersed, &setup.channel, rng)?;
    add_osnr_noise_dual(&lasered, &setup.channel, signal_power, rng)
}

/// Leaf receiver: LO selection of subcarrier `sc_index`, then Rx impairments.
pub fn receive(line: &DualPolFrame, setup: &TrialSetup, sc_index: usize) -> Result<DualPolFrame> {
    let selected = select_subcarrier_dual(line, &setup.subcarriers, sc_index, setup.selection)?;
    apply_rx_dual(&selected, &setup.impairments)
}

/// `channel` followed by `receive` on the setup's subcarrier.
pub fn propagate(
    tx: &DualPolFrame,
    setup: &TrialSetup,
    signal_power: f64,
    rng: &mut RngStream,
) -> Result<DualPolFrame> {
    receive(&channel(tx, setup, signal_power, rng)?, setup, setup.sc_index)
}

/// Leaf capture of one TFIT frame at 2 samples/symbol. The frame starts
/// `lead_samples` into the capture.
pub fn simulate_capture(setup: &TrialSetup, rng: &mut RngStream) -> Result<DualPolFrame> {
    setup.validate()?;
    let plan = setup.placed_plan()?;
    let power = build_frame(&plan)?.power();
    propagate(&transmitted_frame(setup)?, setup, power, rng)
}
