//! Inversion of estimated IQ skew and power imbalance: at the leaf on the
//! received trace, and at the hub as a digital pre-distortion applied before
//! the transmitter impairment.

use serde::{Deserialize, Serialize};

use crate::dsp::{fractional_delay, SampleTrace, C64};
use crate::error::{Result, TfitError};
use crate::impair::db_to_gain;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompensationSpec {
    /// Estimated skew; Q is moved back by this amount.
    pub tau_s: f64,
    /// Estimated Q/I amplitude ratio; Q is divided by it.
    pub gain_correction: f64,
    pub apply_gsop_first: bool,
}

impl Default for CompensationSpec {
    fn default() -> Self {
        CompensationSpec::IDENTITY
    }
}

impl CompensationSpec {
    pub const IDENTITY: CompensationSpec = CompensationSpec {
        tau_s: 0.0,
        gain_correction: 1.0,
        apply_gsop_first: false,
    };

    pub fn new(tau_s: f64, gain_correction: f64, apply_gsop_first: bool) -> Result<Self> {
        let spec = CompensationSpec {
            tau_s,
            gain_correction,
            apply_gsop_first,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// From an estimated skew and power imbalance in dB.
    pub fn from_estimate(tau_s: f64, imbalance_db: f64, apply_gsop_first: bool) -> Result<Self> {
        CompensationSpec::new(tau_s, db_to_gain(imbalance_db), apply_gsop_first)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain_correction.is_finite() && self.gain_correction > 0.0) {
            return Err(TfitError::config(format!(
                "gain correction must be > 0, got {}",
                self.gain_correction
            )));
        }
        if !self.tau_s.is_finite() {
            return Err(TfitError::config("compensation skew must be finite"));
        }
        Ok(())
    }

    fn is_identity(&self) -> bool {
        self.tau_s == 0.0 && self.gain_correction == 1.0 && !self.apply_gsop_first
    }
}

/// Gram-Schmidt orthogonalization of the Q tributary against I. Each
/// tributary keeps its power, so total power is preserved.
pub fn gsop(trace: &SampleTrace) -> Result<SampleTrace> {
    let i = trace.i_tributary();
    let q = trace.q_tributary();
    let p_i: f64 = i.iter().map(|x| x * x).sum();
    let p_q: f64 = q.iter().map(|x| x * x).sum();
    if p_i <= f64::MIN_POSITIVE || p_q <= f64::MIN_POSITIVE {
        return Err(TfitError::Degenerate(
            "GSOP needs power on both tributaries".into(),
        ));
    }
    let rho: f64 = i.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>() / p_i;
    let q_orth: Vec<f64> = q.iter().zip(&i).map(|(b, a)| b - rho * a).collect();
    let p_orth: f64 = q_orth.iter().map(|x| x * x).sum();
    if p_orth <= f64::MIN_POSITIVE * p_q.max(1.0) {
        return Err(TfitError::Degenerate("Q tributary is collinear with I".into()));
    }
    let scale = (p_q / p_orth).sqrt();
    let samples = i
        .iter()
        .zip(&q_orth)
        .map(|(&a, &b)| C64::new(a, b * scale))
        .collect();
    SampleTrace::new(samples, trace.sample_rate_hz())
}

/// Replaces Q by `Q(t - tau) / g`, leaving I untouched.
fn correct_q(trace: &SampleTrace, tau_s: f64, gain: f64) -> Result<SampleTrace> {
    let q_only = trace.map(|_, s| C64::new(s.im, 0.0));
    let q = if tau_s == 0.0 {
        q_only
    } else {
        fractional_delay(&q_only, tau_s)?
    };
    let samples = trace
        .samples()
        .iter()
        .zip(q.samples())
        .map(|(s, qd)| C64::new(s.re, qd.re / gain))
        .collect();
    SampleTrace::new(samples, trace.sample_rate_hz())
}

/// Leaf-side Rx compensation: optional GSOP, then `Q <- Q(t - tau) / g`.
pub fn compensate_rx(trace: &SampleTrace, spec: &CompensationSpec) -> Result<SampleTrace> {
    spec.validate()?;
    if spec.is_identity() {
        return Ok(trace.clone());
    }
    let base = if spec.apply_gsop_first {
        gsop(trace)?
    } else {
        trace.clone()
    };
    correct_q(&base, spec.tau_s, spec.gain_correction)
}

/// Hub-side pre-compensation: the Q tributary is pre-delayed and pre-scaled
/// so that the transmitter's own skew and gain restore it. Quadrature error
/// is not pre-compensated.
pub fn precompensate_tx(trace: &SampleTrace, spec: &CompensationSpec) -> Result<SampleTrace> {
    spec.validate()?;
    if spec.tau_s == 0.0 && spec.gain_correction == 1.0 {
        return Ok(trace.clone());
    }
    correct_q(trace, spec.tau_s, spec.gain_correction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{filter_spectral, gaussian_noise, RngStream};
    use crate::impair::{apply_rx_iq, apply_tx_iq, IqImpairment};
    use proptest::prelude::*;

    const FS: f64 = 16e9;

    fn signal(n: usize, seed: u64) -> SampleTrace {
        let t = gaussian_noise(n, 1.0, FS, &mut RngStream::new(seed, 0)).unwrap();
        filter_spectral(&t, |f| C64::new(if f.abs() < 4.4e9 { 1.0 } else { 0.0 }, 0.0))
    }

    fn err_db(a: &SampleTrace, b: &SampleTrace) -> f64 {
        let e: f64 = a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).norm_sqr()).sum();
        10.0 * (e / b.energy()).log10()
    }

    fn corr(t: &SampleTrace) -> f64 {
        let i = t.i_tributary();
        let q = t.q_tributary();
        let c: f64 = i.iter().zip(&q).map(|(a, b)| a * b).sum();
        let n = (i.iter().map(|x| x * x).sum::<f64>() * q.iter().map(|x| x * x).sum::<f64>()).sqrt();
        c / n
    }

    #[test]
    fn identity_specs() {
        let t = signal(512, 1);
        assert_eq!(compensate_rx(&t, &CompensationSpec::IDENTITY).unwrap(), t);
        assert_eq!(precompensate_tx(&t, &CompensationSpec::IDENTITY).unwrap(), t);
        assert!(CompensationSpec::new(0.0, 0.0, false).is_err());
    }

    #[test]
    fn rx_round_trip() {
        let t = signal(4096, 2);
        for (tau, db) in [(15e-12, 3.0), (-15e-12, -3.0), (7.5e-12, 0.5), (0.0, -1.0)] {
            let imp = IqImpairment::from_db(tau, db, 0.0).unwrap();
            let rx = apply_rx_iq(&t, &imp).unwrap();
            let spec = CompensationSpec::from_estimate(tau, db, false).unwrap();
            let e = err_db(&compensate_rx(&rx, &spec).unwrap(), &t);
            assert!(e < -60.0, "({tau}, {db}) residual {e} dB");
        }
    }

    #[test]
    fn tx_precompensation_round_trip() {
        let t = signal(4096, 3);
        for (tau, db) in [(15e-12, 3.0), (-10e-12, -2.0)] {
            let imp = IqImpairment::from_db(tau, db, 0.0).unwrap();
            let spec = CompensationSpec::from_estimate(tau, db, false).unwrap();
            let out = apply_tx_iq(&precompensate_tx(&t, &spec).unwrap(), &imp).unwrap();
            let e = err_db(&out, &t);
            assert!(e < -60.0, "residual {e} dB");
        }
    }

    #[test]
    fn gain_only_precompensation_leaves_skew() {
        let t = signal(4096, 4);
        let imp = IqImpairment::from_db(15e-12, 2.0, 0.0).unwrap();
        let spec = CompensationSpec::from_estimate(0.0, 2.0, false).unwrap();
        let out = apply_tx_iq(&precompensate_tx(&t, &spec).unwrap(), &imp).unwrap();
        let skew_only = apply_tx_iq(&t, &IqImpairment::new(15e-12, 1.0, 0.0).unwrap()).unwrap();
        assert!(err_db(&out, &skew_only) < -60.0);
    }

    #[test]
    fn half_ps_mismatch_leaves_half_ps_skew() {
        let t = signal(4096, 5);
        let imp = IqImpairment::new(10e-12, 1.0, 0.0).unwrap();
        let rx = apply_rx_iq(&t, &imp).unwrap();
        let spec = CompensationSpec::new(9.5e-12, 1.0, false).unwrap();
        let out = compensate_rx(&rx, &spec).unwrap();
        let residual = apply_rx_iq(&t, &IqImpairment::new(0.5e-12, 1.0, 0.0).unwrap()).unwrap();
        assert!(err_db(&out, &residual) < -60.0);
        assert!(err_db(&out, &t) > -60.0);
    }

    #[test]
    fn gsop_cases() {
        let t = signal(4096, 6);
        let orth = gsop(&t).unwrap();
        assert!((orth.power() - t.power()).abs() < 1e-12 * t.power());
        // sample correlation of the input is already small: only a tiny
        // projection is removed
        assert!(err_db(&orth, &t) < 10.0 * corr(&t).abs().powi(2).log10() + 1.0);

        let skewed = apply_rx_iq(&t, &IqImpairment::new(0.0, 1.0, 10f64.to_radians()).unwrap()).unwrap();
        assert!(corr(&skewed).abs() > 0.1);
        let fixed = gsop(&skewed).unwrap();
        assert!(corr(&fixed).abs() < 1e-6);
        assert!((fixed.power() - skewed.power()).abs() < 1e-9 * skewed.power());

        let i_only = t.map(|_, s| C64::new(s.re, 0.0));
        assert!(matches!(gsop(&i_only), Err(TfitError::Degenerate(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn compensation_inverts_rx_impairment(tau_ps in -15.0f64..15.0, db in -3.0f64..3.0) {
            let t = signal(2048, 6);
            let rx = apply_rx_iq(&t, &IqImpairment::from_db(tau_ps * 1e-12, db, 0.0).unwrap()).unwrap();
            let spec = CompensationSpec::from_estimate(tau_ps * 1e-12, db, false).unwrap();
            prop_assert!(err_db(&compensate_rx(&rx, &spec).unwrap(), &t) < -60.0);
        }
    }
}
