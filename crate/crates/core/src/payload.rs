//! 16QAM DSCM payload and a genie-aided demodulator for BER counting.
//!
//! The receiver knows the frequency offset and symbol timing. It removes the
//! offset from a flat-selected subcarrier, applies the RRC matched filter,
//! samples at the symbol instants, tracks the residual carrier phase and
//! gain from pilots (every `PILOT_SPACING`-th symbol, known to the
//! receiver) and makes hard Gray decisions. Pilots are excluded from the
//! bit count.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dsp::{filter_spectral, RngStream, SampleTrace, C64};
use crate::error::{Result, TfitError};
use crate::link::{mux_subcarriers, rrc_response, ChannelConfig, SelectionFilter, SubcarrierPlan};

pub const PILOT_SPACING: usize = 8;
/// Half-width, in symbols, of the pilot window for the gain magnitude.
pub const PILOT_HALF_WINDOW: usize = 512;
/// Half-width, in symbols, of the pilot window for the carrier phase under
/// laser phase noise.
pub const PHASE_HALF_WINDOW: usize = 64;

/// `1 / sqrt(10)`: half the spacing of unit-power 16QAM.
const A: f64 = 0.316_227_766_016_837_94;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QamFrame {
    pub sc_index: usize,
    pub symbols: Vec<C64>,
    /// Four bits per symbol: I sign, I inner, Q sign, Q inner.
    pub bits: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerResult {
    pub sc_index: usize,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub ber: f64,
}

impl BerResult {
    pub fn new(sc_index: usize, bit_errors: u64, bits_total: u64) -> Self {
        BerResult {
            sc_index,
            bit_errors,
            bits_total,
            ber: if bits_total == 0 {
                0.0
            } else {
                bit_errors as f64 / bits_total as f64
            },
        }
    }

    /// Pools the counts of several results for one subcarrier.
    pub fn merge(&self, other: &BerResult) -> BerResult {
        BerResult::new(
            self.sc_index,
            self.bit_errors + other.bit_errors,
            self.bits_total + other.bits_total,
        )
    }
}

fn pam_level(sign: bool, inner: bool) -> f64 {
    let mag = if inner { A } else { 3.0 * A };
    if sign {
        mag
    } else {
        -mag
    }
}

fn pam_bits(x: f64) -> (bool, bool) {
    (x > 0.0, x.abs() < 2.0 * A)
}

/// Gray-mapped unit-power 16QAM point for four bits.
pub fn map_16qam(bits: [bool; 4]) -> C64 {
    C64::new(pam_level(bits[0], bits[1]), pam_level(bits[2], bits[3]))
}

/// Hard decision back to the four bits.
pub fn demap_16qam(s: C64) -> [bool; 4] {
    let (a, b) = pam_bits(s.re);
    let (c, d) = pam_bits(s.im);
    [a, b, c, d]
}

impl QamFrame {
    pub fn random(sc_index: usize, n_symbols: usize, rng: &mut RngStream) -> Result<Self> {
        if n_symbols == 0 {
            return Err(TfitError::config("payload needs at least one symbol"));
        }
        let bits: Vec<bool> = (0..4 * n_symbols).map(|_| rng.bit()).collect();
        let symbols = bits
            .chunks_exact(4)
            .map(|b| map_16qam([b[0], b[1], b[2], b[3]]))
            .collect();
        Ok(QamFrame {
            sc_index,
            symbols,
            bits,
        })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// RRC-shaped baseband of one subcarrier at `sps` samples per symbol. The
/// pulse is scaled so the Tx/Rx RRC cascade has unit gain at the symbol
/// instants.
pub fn shape_rrc(symbols: &[C64], plan: &SubcarrierPlan, sps: usize) -> Result<SampleTrace> {
    if sps < 2 {
        return Err(TfitError::config("RRC shaping needs at least 2 samples per symbol"));
    }
    let mut up = vec![C64::new(0.0, 0.0); symbols.len() * sps];
    for (k, s) in symbols.iter().enumerate() {
        up[k * sps] = s * sps as f64;
    }
    let rate = plan.per_sc_baud_hz * sps as f64;
    let (baud, beta) = (plan.per_sc_baud_hz, plan.rrc_rolloff);
    let t = SampleTrace::new(up, rate)?;
    Ok(filter_spectral(&t, |f| C64::new(rrc_response(f, baud, beta), 0.0)))
}

/// One random 16QAM frame per subcarrier, shaped at `sps` samples per
/// symbol and multiplexed.
pub fn generate_payload(
    n_symbols: usize,
    plan: &SubcarrierPlan,
    sps: usize,
    rng: &mut RngStream,
) -> Result<(Vec<QamFrame>, SampleTrace)> {
    plan.validate()?;
    let frames = (0..plan.n_sc)
        .map(|i| QamFrame::random(i, n_symbols, rng))
        .collect::<Result<Vec<_>>>()?;
    let shaped = frames
        .iter()
        .map(|f| shape_rrc(&f.symbols, plan, sps))
        .collect::<Result<Vec<_>>>()?;
    Ok((frames, mux_subcarriers(&shaped, plan)?))
}

fn is_pilot(k: usize) -> bool {
    k % PILOT_SPACING == 0
}

/// Selection window for payload reception: the subcarrier band widened by
/// the frequency offset, with matched filtering left to `demodulate`.
pub fn payload_selection(plan: &SubcarrierPlan, known: &ChannelConfig) -> SelectionFilter {
    SelectionFilter::Flat {
        half_width_hz: plan.band_hz() / 2.0 + known.freq_offset_hz.abs(),
    }
}

/// Genie-aided demodulation of a subcarrier selected with
/// `payload_selection`, at 2 samples/symbol, whose first sample is the first
/// symbol instant.
pub fn demodulate(
    trace: &SampleTrace,
    frame: &QamFrame,
    plan: &SubcarrierPlan,
    known: &ChannelConfig,
) -> Result<BerResult> {
    let n = frame.len();
    if trace.len() < 2 * n {
        return Err(TfitError::config(format!(
            "trace of {} samples is shorter than a {n}-symbol frame",
            trace.len()
        )));
    }
    let w = -2.0 * PI * known.freq_offset_hz * trace.sample_period_s();
    let derotated = trace.map(|k, x| x * C64::from_polar(1.0, w * k as f64));
    let (baud, beta) = (plan.per_sc_baud_hz, plan.rrc_rolloff);
    let matched = filter_spectral(&derotated, |f| C64::new(rrc_response(f, baud, beta), 0.0));
    let rx: Vec<C64> = (0..n).map(|k| matched.samples()[2 * k]).collect();

    // prefix sums of pilot correlations and energies over the symbol index
    let mut corr = vec![C64::new(0.0, 0.0); n + 1];
    let mut energy = vec![0.0; n + 1];
    for k in 0..n {
        let (c, e) = if is_pilot(k) {
            (rx[k] * frame.symbols[k].conj(), frame.symbols[k].norm_sqr())
        } else {
            (C64::new(0.0, 0.0), 0.0)
        };
        corr[k + 1] = corr[k] + c;
        energy[k + 1] = energy[k] + e;
    }
    let window = |k: usize, half: usize| {
        let (lo, hi) = (k.saturating_sub(half), (k + half + 1).min(n));
        (corr[hi] - corr[lo], energy[hi] - energy[lo])
    };

    // a static carrier gets the wide window for phase as well
    let phase_half = if known.linewidth_hz > 0.0 {
        PHASE_HALF_WINDOW
    } else {
        PILOT_HALF_WINDOW
    };
    let mut errors = 0u64;
    let mut total = 0u64;
    for k in 0..n {
        if is_pilot(k) {
            continue;
        }
        // magnitude from the wide window, phase from the narrow one
        let (wide, e) = window(k, PILOT_HALF_WINDOW);
        let (narrow, _) = window(k, phase_half);
        let h = if e > 0.0 && narrow.norm() > 0.0 {
            C64::from_polar(wide.norm() / e, narrow.arg())
        } else {
            C64::new(1.0, 0.0)
        };
        let decided = demap_16qam(rx[k] / h);
        for (b, d) in frame.bits[4 * k..4 * k + 4].iter().zip(decided) {
            errors += (*b != d) as u64;
        }
        total += 4;
    }
    Ok(BerResult::new(frame.sc_index, errors, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::gaussian_noise;
    use crate::link::select_subcarrier_with;
    use statrs::function::erf::erfc;

    fn q(x: f64) -> f64 {
        0.5 * erfc(x / std::f64::consts::SQRT_2)
    }

    /// Gray 16QAM bit error rate at a given Es/N0 (linear).
    fn ber_16qam(es_n0: f64) -> f64 {
        let r = (es_n0 / 5.0).sqrt();
        (3.0 * q(r) + 2.0 * q(3.0 * r) - q(5.0 * r)) / 4.0
    }

    #[test]
    fn gray_map_round_trip_and_power() {
        let mut seen = std::collections::HashSet::new();
        for v in 0..16u8 {
            let bits = [v & 8 != 0, v & 4 != 0, v & 2 != 0, v & 1 != 0];
            let s = map_16qam(bits);
            assert_eq!(demap_16qam(s), bits);
            seen.insert(((s.re * 1e6) as i64, (s.im * 1e6) as i64));
        }
        assert_eq!(seen.len(), 16);
        let p: f64 = (0..16u8)
            .map(|v| map_16qam([v & 8 != 0, v & 4 != 0, v & 2 != 0, v & 1 != 0]).norm_sqr())
            .sum::<f64>()
            / 16.0;
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nearest_neighbours_differ_by_one_bit() {
        let pts: Vec<([bool; 4], C64)> = (0..16u8)
            .map(|v| {
                let b = [v & 8 != 0, v & 4 != 0, v & 2 != 0, v & 1 != 0];
                (b, map_16qam(b))
            })
            .collect();
        for (ba, a) in &pts {
            for (bb, b) in &pts {
                if ((a - b).norm() - 2.0 * A).abs() < 1e-9 {
                    let d = ba.iter().zip(bb).filter(|(x, y)| x != y).count();
                    assert_eq!(d, 1);
                }
            }
        }
    }

    #[test]
    fn random_frame_power() {
        let f = QamFrame::random(0, 1 << 16, &mut RngStream::new(1, 0)).unwrap();
        let p = f.symbols.iter().map(|s| s.norm_sqr()).sum::<f64>() / f.len() as f64;
        assert!((p - 1.0).abs() < 0.01);
        assert_eq!(f.bits.len(), 4 * f.len());
        assert!(QamFrame::random(0, 0, &mut RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn payload_spectral_occupancy() {
        let plan = SubcarrierPlan::default();
        let (frames, comp) = generate_payload(1 << 12, &plan, 8, &mut RngStream::new(2, 0)).unwrap();
        assert_eq!(frames.len(), 4);
        let shaped = shape_rrc(&frames[0].symbols, &plan, 8).unwrap();
        let mut bins = shaped.samples().to_vec();
        crate::dsp::fft(&mut bins);
        let df = shaped.sample_rate_hz() / bins.len() as f64;
        let total: f64 = bins.iter().map(|b| b.norm_sqr()).sum();
        let outside: f64 = bins
            .iter()
            .enumerate()
            .filter(|(k, _)| (crate::dsp::signed_bin(*k, bins.len()) as f64 * df).abs() > 4.4e9)
            .map(|(_, b)| b.norm_sqr())
            .sum();
        assert!(outside / total < 1e-20);
        assert!((plan.band_hz() - 8.8e9).abs() < 1.0);
        assert_eq!(comp.sample_rate_hz(), 64e9);
    }

    fn loopback(osnr_db: Option<f64>, n: usize, seed: u64) -> (BerResult, f64) {
        let plan = SubcarrierPlan::default();
        let mut rng = RngStream::new(seed, 0);
        let (frames, comp) = generate_payload(n, &plan, 8, &mut rng).unwrap();
        let chan = ChannelConfig {
            osnr_db,
            ..ChannelConfig::ideal()
        };
        let (noisy, var) = match osnr_db {
            Some(o) => {
                let var = crate::link::osnr_noise_variance(comp.power(), comp.sample_rate_hz(), o);
                let noise = gaussian_noise(comp.len(), var, comp.sample_rate_hz(), &mut rng).unwrap();
                (comp.add(&noise).unwrap(), var)
            }
            None => (comp.clone(), 0.0),
        };
        let rx = select_subcarrier_with(&noisy, &plan, 0, payload_selection(&plan, &chan)).unwrap();
        let p_sc = comp.power() / 4.0;
        let es_n0 = p_sc * comp.sample_rate_hz() / (var * plan.per_sc_baud_hz);
        (demodulate(&rx, &frames[0], &plan, &chan).unwrap(), es_n0)
    }

    #[test]
    fn clean_loopback_is_error_free() {
        let (r, _) = loopback(None, 1 << 12, 3);
        assert_eq!(r.bit_errors, 0);
        assert_eq!(r.bits_total, 4 * ((1 << 12) - (1 << 12) / PILOT_SPACING) as u64);
    }

    #[test]
    fn awgn_ber_matches_closed_form() {
        // OSNR 19 dB puts Es/N0 near 14.9 dB and BER near 2e-3
        let (r, es_n0) = loopback(Some(19.0), 1 << 17, 4);
        let expect = ber_16qam(es_n0);
        let sigma = (expect / r.bits_total as f64).sqrt();
        assert!(
            (r.ber - expect).abs() < 4.0 * sigma,
            "BER {} vs {expect} at Es/N0 {:.2} dB",
            r.ber,
            10.0 * es_n0.log10()
        );
        assert!(r.bits_total >= 100_000);
    }

    #[test]
    fn short_trace_rejected() {
        let f = QamFrame::random(0, 64, &mut RngStream::new(5, 0)).unwrap();
        let t = SampleTrace::zeros(100, 16e9).unwrap();
        assert!(demodulate(&t, &f, &SubcarrierPlan::default(), &ChannelConfig::ideal()).is_err());
    }

    #[test]
    fn merge_pools_counts() {
        let a = BerResult::new(1, 3, 1000);
        let b = BerResult::new(1, 1, 3000);
        let m = a.merge(&b);
        assert_eq!((m.bit_errors, m.bits_total), (4, 4000));
        assert!((m.ber - 1e-3).abs() < 1e-15);
    }
}
