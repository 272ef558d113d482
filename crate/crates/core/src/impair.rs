//! Transmitter- and receiver-side IQ impairments: skew, amplitude/power
//! imbalance and phase quadrature error, all frequency-flat.
//!
//! Sign conventions: a positive skew advances the Q tributary, i.e. the
//! impaired Q is `Q(t + skew)`. The gain multiplies Q, so the IQ power
//! imbalance is `20 log10(gain)` dB. The quadrature error rotates Q toward I.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::dsp::{fractional_delay, SampleTrace, C64};
use crate::error::{Result, TfitError};
use crate::tfit::{DualPolFrame, Polarization};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IqImpairment {
    pub skew_s: f64,
    pub gain: f64,
    pub quad_error_rad: f64,
}

impl Default for IqImpairment {
    fn default() -> Self {
        IqImpairment::NONE
    }
}

pub fn db_to_gain(imbalance_db: f64) -> f64 {
    10f64.powf(imbalance_db / 20.0)
}

pub fn gain_to_db(gain: f64) -> f64 {
    20.0 * gain.log10()
}

impl IqImpairment {
    pub const NONE: IqImpairment = IqImpairment {
        skew_s: 0.0,
        gain: 1.0,
        quad_error_rad: 0.0,
    };

    pub fn new(skew_s: f64, gain: f64, quad_error_rad: f64) -> Result<Self> {
        let imp = IqImpairment {
            skew_s,
            gain,
            quad_error_rad,
        };
        imp.validate()?;
        Ok(imp)
    }

    /// Skew in seconds, power imbalance in dB, quadrature error in radians.
    pub fn from_db(skew_s: f64, imbalance_db: f64, quad_error_rad: f64) -> Result<Self> {
        IqImpairment::new(skew_s, db_to_gain(imbalance_db), quad_error_rad)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.skew_s.is_finite() {
            return Err(TfitError::config("skew must be finite"));
        }
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return Err(TfitError::config(format!("IQ gain must be > 0, got {}", self.gain)));
        }
        if !(self.quad_error_rad.abs() < FRAC_PI_2) {
            return Err(TfitError::config(format!(
                "quadrature error must satisfy |theta| < pi/2, got {}",
                self.quad_error_rad
            )));
        }
        Ok(())
    }

    pub fn imbalance_db(&self) -> f64 {
        gain_to_db(self.gain)
    }

    pub fn is_identity(&self) -> bool {
        *self == IqImpairment::NONE
    }
}

/// Impairments of both transceivers on both polarizations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImpairmentSet {
    pub tx_x: IqImpairment,
    pub tx_y: IqImpairment,
    pub rx_x: IqImpairment,
    pub rx_y: IqImpairment,
}

impl ImpairmentSet {
    pub fn tx(&self, pol: Polarization) -> IqImpairment {
        match pol {
            Polarization::X => self.tx_x,
            Polarization::Y => self.tx_y,
        }
    }

    pub fn rx(&self, pol: Polarization) -> IqImpairment {
        match pol {
            Polarization::X => self.rx_x,
            Polarization::Y => self.rx_y,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for imp in [self.tx_x, self.tx_y, self.rx_x, self.rx_y] {
            imp.validate()?;
        }
        Ok(())
    }
}

/// Advances both tributaries by `skew_s`: returns `(I(t+skew), Q(t+skew))`.
fn advanced_tributaries(trace: &SampleTrace, skew_s: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let shifted = fractional_delay(trace, -skew_s)?;
    Ok((shifted.i_tributary(), shifted.q_tributary()))
}

pub fn apply_tx_iq(trace: &SampleTrace, imp: &IqImpairment) -> Result<SampleTrace> {
    imp.validate()?;
    if imp.is_identity() {
        return Ok(trace.clone());
    }
    let (_, q_adv) = advanced_tributaries(trace, imp.skew_s)?;
    let (sin_t, cos_t) = imp.quad_error_rad.sin_cos();
    let g = imp.gain;
    let samples = trace
        .samples()
        .iter()
        .zip(&q_adv)
        .map(|(s, &q)| C64::new(s.re - g * sin_t * q, g * cos_t * q))
        .collect();
    SampleTrace::new(samples, trace.sample_rate_hz())
}

pub fn apply_rx_iq(trace: &SampleTrace, imp: &IqImpairment) -> Result<SampleTrace> {
    imp.validate()?;
    if imp.is_identity() {
        return Ok(trace.clone());
    }
    let (i_adv, q_adv) = advanced_tributaries(trace, imp.skew_s)?;
    let (sin_t, cos_t) = imp.quad_error_rad.sin_cos();
    let g = imp.gain;
    let samples = trace
        .samples()
        .iter()
        .zip(i_adv.iter().zip(&q_adv))
        .map(|(s, (&i, &q))| C64::new(s.re, g * (cos_t * q - sin_t * i)))
        .collect();
    SampleTrace::new(samples, trace.sample_rate_hz())
}

pub fn apply_tx_dual(frame: &DualPolFrame, set: &ImpairmentSet) -> Result<DualPolFrame> {
    frame.try_map(|pol, t| apply_tx_iq(t, &set.tx(pol)))
}

pub fn apply_rx_dual(frame: &DualPolFrame, set: &ImpairmentSet) -> Result<DualPolFrame> {
    frame.try_map(|pol, t| apply_rx_iq(t, &set.rx(pol)))
}
