//! Signal primitives shared by every stage of the link: complex sample
//! traces, spectra, exact band-limited delay, Fourier resampling and seeded
//! noise.
//!
//! All block operations use circular (periodic) semantics: a trace of `N`
//! samples stands for one period of its band-limited periodic interpolant.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, TfitError};

pub type C64 = Complex64;

/// Complex-valued sample sequence with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTrace {
    samples: Vec<C64>,
    sample_rate_hz: f64,
}

impl SampleTrace {
    pub fn new(samples: Vec<C64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(TfitError::config("sample trace must hold at least one sample"));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(TfitError::config(format!(
                "sample rate must be positive and finite, got {sample_rate_hz}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(TfitError::config(format!("non-finite sample at index {i}")));
        }
        Ok(SampleTrace {
            samples,
            sample_rate_hz,
        })
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Result<Self> {
        SampleTrace::new(vec![C64::new(0.0, 0.0); len], sample_rate_hz)
    }

    /// Builds a trace from separate real I and Q tributaries.
    pub fn from_iq(i: &[f64], q: &[f64], sample_rate_hz: f64) -> Result<Self> {
        if i.len() != q.len() {
            return Err(TfitError::config(format!(
                "I/Q tributary lengths differ ({} vs {})",
                i.len(),
                q.len()
            )));
        }
        let samples = i.iter().zip(q).map(|(&re, &im)| C64::new(re, im)).collect();
        SampleTrace::new(samples, sample_rate_hz)
    }

    // Internal constructor for outputs of operations whose inputs were
    // already validated.
    pub(crate) fn from_parts(samples: Vec<C64>, sample_rate_hz: f64) -> Self {
        debug_assert!(!samples.is_empty() && sample_rate_hz > 0.0);
        SampleTrace {
            samples,
            sample_rate_hz,
        }
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn sample_period_s(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn i_tributary(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.re).collect()
    }

    pub fn q_tributary(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.im).collect()
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Mean power per sample.
    pub fn power(&self) -> f64 {
        self.energy() / self.samples.len() as f64
    }

    /// Copy of samples `[start, start + len)`, wrapping circularly.
    pub fn window(&self, start: usize, len: usize) -> SampleTrace {
        let n = self.samples.len();
        let samples = (0..len).map(|k| self.samples[(start + k) % n]).collect();
        SampleTrace::from_parts(samples, self.sample_rate_hz)
    }

    pub(crate) fn with_samples(&self, samples: Vec<C64>) -> SampleTrace {
        SampleTrace::from_parts(samples, self.sample_rate_hz)
    }

    pub fn map(&self, f: impl Fn(usize, C64) -> C64) -> SampleTrace {
        let samples = self.samples.iter().enumerate().map(|(k, &s)| f(k, s)).collect();
        self.with_samples(samples)
    }

    /// Sample-wise sum of two traces of equal length and rate.
    pub fn add(&self, other: &SampleTrace) -> Result<SampleTrace> {
        self.check_compatible(other)?;
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect();
        Ok(self.with_samples(samples))
    }

    pub fn check_compatible(&self, other: &SampleTrace) -> Result<()> {
        if self.len() != other.len() || self.sample_rate_hz != other.sample_rate_hz {
            return Err(TfitError::config(format!(
                "incompatible traces: {} samples @ {} Hz vs {} samples @ {} Hz",
                self.len(),
                self.sample_rate_hz,
                other.len(),
                other.sample_rate_hz
            )));
        }
        Ok(())
    }

    /// Appends another trace of the same sample rate.
    pub fn concat(&self, other: &SampleTrace) -> Result<SampleTrace> {
        if self.sample_rate_hz != other.sample_rate_hz {
            return Err(TfitError::config("cannot concatenate traces with different rates"));
        }
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&other.samples);
        Ok(self.with_samples(samples))
    }
}

/// DFT of a trace. Bin `k` sits at `k * bin_spacing_hz`, read modulo the
/// sample rate; bins above `N/2` are negative frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    bins: Vec<C64>,
    bin_spacing_hz: f64,
}

impl Spectrum {
    pub fn new(bins: Vec<C64>, bin_spacing_hz: f64) -> Result<Self> {
        if bins.is_empty() || !(bin_spacing_hz > 0.0) {
            return Err(TfitError::config("spectrum needs bins and a positive bin spacing"));
        }
        Ok(Spectrum {
            bins,
            bin_spacing_hz,
        })
    }

    pub fn bins(&self) -> &[C64] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bin_spacing_hz(&self) -> f64 {
        self.bin_spacing_hz
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.bin_spacing_hz * self.bins.len() as f64
    }

    /// Signed frequency of bin `k`.
    pub fn frequency_of(&self, k: usize) -> f64 {
        signed_bin(k, self.bins.len()) as f64 * self.bin_spacing_hz
    }

    /// Nearest bin to `freq_hz`, wrapped into `0..N`.
    pub fn bin_of(&self, freq_hz: f64) -> usize {
        let n = self.bins.len() as i64;
        let k = (freq_hz / self.bin_spacing_hz).round() as i64;
        k.rem_euclid(n) as usize
    }

    /// Spectral energy, equal to `N` times the time-domain energy.
    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|b| b.norm_sqr()).sum()
    }
}

pub(crate) fn signed_bin(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Unnormalized forward DFT of any length.
pub(crate) fn fft(buf: &mut [C64]) {
    plan(buf.len(), false).process(buf);
}

/// Inverse DFT of any length, scaled by `1/N`.
pub(crate) fn ifft(buf: &mut [C64]) {
    plan(buf.len(), true).process(buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|s| *s *= scale);
}

/// Applies a frequency response `h(f)` to a trace through one circular
/// DFT round trip. `h` receives the signed bin frequency in hertz.
pub(crate) fn filter_spectral(trace: &SampleTrace, h: impl Fn(f64) -> C64) -> SampleTrace {
    let n = trace.len();
    let df = trace.sample_rate_hz() / n as f64;
    let mut buf = trace.samples().to_vec();
    fft(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        *b *= h(signed_bin(k, n) as f64 * df);
    }
    ifft(&mut buf);
    trace.with_samples(buf)
}

pub fn forward_transform(trace: &SampleTrace) -> Result<Spectrum> {
    let n = trace.len();
    if !n.is_power_of_two() {
        return Err(TfitError::config(format!(
            "transform length {n} is not a power of two"
        )));
    }
    let mut bins = trace.samples().to_vec();
    fft(&mut bins);
    Spectrum::new(bins, trace.sample_rate_hz() / n as f64)
}

pub fn inverse_transform(spectrum: &Spectrum) -> Result<SampleTrace> {
    let n = spectrum.len();
    if !n.is_power_of_two() {
        return Err(TfitError::config(format!(
            "transform length {n} is not a power of two"
        )));
    }
    let mut samples = spectrum.bins().to_vec();
    ifft(&mut samples);
    SampleTrace::new(samples, spectrum.sample_rate_hz())
}

/// Delays a trace by `delay_s` using the linear spectral phase ramp
/// `exp(-j 2 pi f delay)`, i.e. `y(t) = x(t - delay)` for the band-limited
/// periodic interpolant of `x`. Negative delays advance the trace.
///
/// The Nyquist bin of an even-length trace gets the real factor
/// `cos(pi fs delay)` so real inputs stay real; the response is therefore
/// Hermitian and the I and Q tributaries are delayed independently.
pub fn fractional_delay(trace: &SampleTrace, delay_s: f64) -> Result<SampleTrace> {
    if !delay_s.is_finite() || delay_s.abs() >= trace.duration_s() / 4.0 {
        return Err(TfitError::config(format!(
            "delay {delay_s:e} s out of range for a {:e} s trace",
            trace.duration_s()
        )));
    }
    if delay_s == 0.0 {
        return Ok(trace.clone());
    }
    let n = trace.len();
    let fs = trace.sample_rate_hz();
    let nyquist = fs / 2.0;
    Ok(filter_spectral(trace, |f| {
        if n % 2 == 0 && f == nyquist {
            C64::new((PI * fs * delay_s).cos(), 0.0)
        } else {
            C64::from_polar(1.0, -2.0 * PI * f * delay_s)
        }
    }))
}

/// Fraction of energy a band-limited rate change must discard before the
/// conversion is refused (-60 dB).
const RESAMPLE_OUT_OF_BAND_LIMIT: f64 = 1e-6;

/// Band-limited Fourier resampling. The output length is
/// `len * target / source` and must come out integral.
pub fn resample(trace: &SampleTrace, target_rate_hz: f64) -> Result<SampleTrace> {
    let source = trace.sample_rate_hz();
    if !(target_rate_hz.is_finite() && target_rate_hz > 0.0) {
        return Err(TfitError::config(format!(
            "target rate must be positive, got {target_rate_hz}"
        )));
    }
    if target_rate_hz == source {
        return Ok(trace.clone());
    }
    let n = trace.len();
    let exact = n as f64 * target_rate_hz / source;
    let m = exact.round() as usize;
    if m == 0 || (exact - m as f64).abs() > 1e-6 {
        return Err(TfitError::config(format!(
            "rate ratio {target_rate_hz}/{source} does not map {n} samples to an integer length"
        )));
    }

    let mut spec = trace.samples().to_vec();
    fft(&mut spec);

    // Bins kept: |k| < half of the smaller length; the shared Nyquist bin
    // (if any) is split between the two signed images.
    let keep = n.min(m);
    let half = keep / 2;
    let total: f64 = spec.iter().map(|b| b.norm_sqr()).sum();
    if m < n {
        let dropped: f64 = spec
            .iter()
            .enumerate()
            .filter(|&(k, _)| signed_bin(k, n).unsigned_abs() as usize >= half)
            .map(|(_, b)| b.norm_sqr())
            .sum();
        if total > 0.0 && dropped / total > RESAMPLE_OUT_OF_BAND_LIMIT {
            return Err(TfitError::SpectralFit {
                out_of_band_db: 10.0 * (dropped / total).log10(),
            });
        }
    }

    let mut out = vec![C64::new(0.0, 0.0); m];
    for k in 0..half {
        out[k] = spec[k];
        if k > 0 {
            out[m - k] = spec[n - k];
        }
    }
    if keep % 2 == 1 && half > 0 {
        // odd common length: one more positive/negative pair fits
        out[half] = spec[half];
        out[m - half] = spec[n - half];
    } else if half > 0 && m > n {
        // source Nyquist bin is split across +/- in the longer target
        let nyq = spec[half] * 0.5;
        out[half] = nyq;
        out[m - half] = nyq;
    }
    ifft(&mut out);
    let scale = m as f64 / n as f64;
    out.iter_mut().for_each(|s| *s *= scale);
    Ok(SampleTrace::from_parts(out, target_rate_hz))
}

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
        .collect()
}

/// Reproducible random stream keyed by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id selecting the ChaCha stream, so draws
/// are identical across runs and platforms.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Independent stream derived from the same seed.
    pub fn substream(&self, stream_id: u64) -> RngStream {
        RngStream::new(self.seed, stream_id)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.rng.random_range(0..n)
    }

    pub fn bit(&mut self) -> bool {
        self.rng.random::<bool>()
    }
}

/// I.i.d. circular complex Gaussian samples with total variance `variance`
/// (half on each tributary).
pub fn gaussian_noise(
    len: usize,
    variance: f64,
    sample_rate_hz: f64,
    rng: &mut RngStream,
) -> Result<SampleTrace> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(TfitError::config(format!("noise variance must be >= 0, got {variance}")));
    }
    if variance == 0.0 {
        return SampleTrace::zeros(len, sample_rate_hz);
    }
    let sigma = (variance / 2.0).sqrt();
    let samples = (0..len)
        .map(|_| {
            let re = rng.standard_normal();
            let im = rng.standard_normal();
            C64::new(re * sigma, im * sigma)
        })
        .collect();
    SampleTrace::new(samples, sample_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(n: usize, fs: f64, f: f64, phase: f64) -> SampleTrace {
        let samples = (0..n)
            .map(|k| C64::from_polar(1.0, 2.0 * PI * f * k as f64 / fs + phase))
            .collect();
        SampleTrace::new(samples, fs).unwrap()
    }

    fn random_trace(n: usize, seed: u64) -> SampleTrace {
        let mut rng = RngStream::new(seed, 0);
        gaussian_noise(n, 1.0, 1.0, &mut rng).unwrap()
    }

    // Band-limited random trace: white noise with the outer half of the
    // spectrum zeroed.
    fn bandlimited(n: usize, seed: u64) -> SampleTrace {
        let t = random_trace(n, seed);
        filter_spectral(&t, |f| {
            if f.abs() < 0.25 {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    fn max_abs_diff(a: &SampleTrace, b: &SampleTrace) -> f64 {
        a.samples()
            .iter()
            .zip(b.samples())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn trace_validation() {
        assert!(SampleTrace::new(vec![], 1.0).is_err());
        assert!(SampleTrace::new(vec![C64::new(1.0, 0.0)], 0.0).is_err());
        assert!(SampleTrace::new(vec![C64::new(f64::NAN, 0.0)], 1.0).is_err());
        assert!(SampleTrace::from_iq(&[1.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn dc_lands_in_bin_zero() {
        let t = SampleTrace::new(vec![C64::new(1.0, 0.0); 8], 8.0).unwrap();
        let s = forward_transform(&t).unwrap();
        assert!((s.bins()[0] - C64::new(8.0, 0.0)).norm() < 1e-12);
        assert!(s.bins()[1..].iter().all(|b| b.norm() < 1e-12));
    }

    #[test]
    fn pure_tone_single_bin() {
        let n = 64;
        let t = tone(n, 64.0, 5.0, 0.3);
        let s = forward_transform(&t).unwrap();
        assert_eq!(s.bin_of(5.0), 5);
        for (k, b) in s.bins().iter().enumerate() {
            if k == 5 {
                assert!((b.norm() - n as f64).abs() < 1e-9);
            } else {
                assert!(b.norm() < 1e-9, "leak at bin {k}");
            }
        }
        assert_eq!(s.frequency_of(60), -4.0);
    }

    #[test]
    fn non_power_of_two_rejected() {
        let t = SampleTrace::zeros(12, 1.0).unwrap();
        assert!(matches!(forward_transform(&t), Err(TfitError::Config(_))));
    }

    #[test]
    fn parseval_against_direct_sum() {
        let t = random_trace(1024, 7);
        let time_energy: f64 = t.samples().iter().map(|s| s.re * s.re + s.im * s.im).sum();
        // direct O(N^2) DFT as an independent route
        let n = t.len();
        let mut spec_energy = 0.0;
        for k in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for (i, x) in t.samples().iter().enumerate() {
                acc += x * C64::from_polar(1.0, -2.0 * PI * (k * i % n) as f64 / n as f64);
            }
            spec_energy += acc.norm_sqr();
        }
        assert!((time_energy - spec_energy / n as f64).abs() / time_energy < 1e-9);
        let fast = forward_transform(&t).unwrap();
        assert!((fast.energy() - spec_energy).abs() / spec_energy < 1e-9);
    }

    #[test]
    fn transform_round_trip_large() {
        let t = random_trace(1 << 20, 3);
        let back = inverse_transform(&forward_transform(&t).unwrap()).unwrap();
        let err: f64 = t
            .samples()
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        assert!((err / t.energy()).sqrt() < 1e-9);
    }

    #[test]
    fn zero_delay_is_identity() {
        let t = random_trace(256, 1);
        assert_eq!(fractional_delay(&t, 0.0).unwrap(), t);
    }

    #[test]
    fn tone_delay_phase() {
        let fs = 64e9;
        let f0 = 4e9;
        let t = tone(1024, fs, f0, 0.0);
        let tau = 3.7e-12;
        let d = fractional_delay(&t, tau).unwrap();
        for (a, b) in t.samples().iter().zip(d.samples()).take(50) {
            let dphi = (b * a.conj()).arg();
            assert!((dphi + 2.0 * PI * f0 * tau).abs() < 1e-9);
        }
    }

    #[test]
    fn one_sample_delay_shifts() {
        let t = random_trace(128, 9);
        let d = fractional_delay(&t, 1.0).unwrap();
        for k in 0..128 {
            assert!((d.samples()[(k + 1) % 128] - t.samples()[k]).norm() < 1e-9);
        }
    }

    #[test]
    fn delay_out_of_range() {
        let t = random_trace(16, 1);
        assert!(fractional_delay(&t, 4.0).is_err());
    }

    #[test]
    fn delay_keeps_real_signals_real() {
        let t = random_trace(512, 4).map(|_, s| C64::new(s.re, 0.0));
        let d = fractional_delay(&t, 0.37).unwrap();
        assert!(d.samples().iter().all(|s| s.im.abs() < 1e-12));
    }

    #[test]
    fn resample_identity_and_fit_error() {
        let t = bandlimited(256, 2);
        assert_eq!(resample(&t, 1.0).unwrap(), t);
        let white = random_trace(256, 2);
        assert!(matches!(resample(&white, 0.25), Err(TfitError::SpectralFit { .. })));
        assert!(matches!(resample(&t, 0.3), Err(TfitError::Config(_))));
    }

    #[test]
    fn upsampled_tone_keeps_frequency() {
        let fs = 1.0;
        let t = tone(256, fs, 0.25, 0.0);
        let up = resample(&t, 2.0).unwrap();
        assert_eq!(up.len(), 512);
        let s = forward_transform(&up).unwrap();
        let peak = s
            .bins()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        assert!((s.frequency_of(peak) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn resample_round_trip() {
        let t = bandlimited(1024, 5);
        let back = resample(&resample(&t, 3.0).unwrap(), 1.0).unwrap();
        assert!(max_abs_diff(&t, &back) < 1e-6);
        let back = resample(&resample(&t, 0.5).unwrap(), 1.0).unwrap();
        assert!(max_abs_diff(&t, &back) < 1e-6);
    }

    #[test]
    fn noise_moments_and_determinism() {
        let mut rng = RngStream::new(11, 0);
        assert!(gaussian_noise(100, 0.0, 1.0, &mut rng)
            .unwrap()
            .samples()
            .iter()
            .all(|s| s.norm() == 0.0));
        let n = gaussian_noise(1_000_000, 1.0, 1.0, &mut rng).unwrap();
        let var = n.power();
        assert!((0.99..=1.01).contains(&var), "variance {var}");
        let a = gaussian_noise(64, 2.0, 1.0, &mut RngStream::new(5, 3)).unwrap();
        let b = gaussian_noise(64, 2.0, 1.0, &mut RngStream::new(5, 3)).unwrap();
        let c = gaussian_noise(64, 2.0, 1.0, &mut RngStream::new(5, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn delay_then_advance_is_identity(seed in 0u64..1000, tau in -20.0f64..20.0) {
                let t = bandlimited(256, seed);
                let back = fractional_delay(&fractional_delay(&t, tau).unwrap(), -tau).unwrap();
                let err: f64 = t.samples().iter().zip(back.samples()).map(|(a, b)| (a - b).norm_sqr()).sum();
                prop_assert!((err / t.energy()).sqrt() < 1e-9);
            }

            #[test]
            fn transform_round_trip(seed in 0u64..1000, log_n in 0u32..13) {
                let t = random_trace(1 << log_n, seed);
                let s = forward_transform(&t).unwrap();
                prop_assert!((s.energy() / t.len() as f64 - t.energy()).abs() <= 1e-9 * t.energy().max(1e-300));
                let back = inverse_transform(&s).unwrap();
                let err: f64 = t.samples().iter().zip(back.samples()).map(|(a, b)| (a - b).norm_sqr()).sum();
                prop_assert!((err / t.energy()).sqrt() < 1e-9);
            }
        }
    }
}
