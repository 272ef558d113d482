use std::path::Path;

use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::compensate::{compensate_rx, precompensate_tx};
use crate::dsp::RngStream;
use crate::error::{Result, TfitError};
use crate::estimate::{estimate_frame, EstimateReport, GodardConfig, PolarizationReport};
use crate::impair::ImpairmentSet;
use crate::payload::{demodulate, generate_payload, payload_selection, BerResult, QamFrame};
use crate::tfit::{DualPolFrame, Polarization, SlotId};

use super::config::{ExperimentConfig, SweepAxis};
use super::detect::frame_detect;
use super::pipeline::{channel, receive, simulate_capture, TrialSetup};

/// One polarization of one estimation trial. Skews in ps, imbalances in dB;
/// errors are estimate minus preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub preset: f64,
    pub trial: usize,
    pub seed: u64,
    pub stream_id: u64,
    pub pol: Polarization,
    pub lead_samples: usize,
    pub detected_offset: Option<usize>,
    pub preset_rx_skew_ps: f64,
    pub preset_rx_imbalance_db: f64,
    pub preset_tx_skew_ps: f64,
    pub preset_tx_imbalance_db: f64,
    pub est_rx_skew_ps: f64,
    pub est_rx_imbalance_db: f64,
    pub est_tx_skew_ps: f64,
    pub est_tx_imbalance_db: f64,
    pub err_rx_skew_ps: f64,
    pub err_rx_imbalance_db: f64,
    pub err_tx_skew_ps: f64,
    pub err_tx_imbalance_db: f64,
    pub min_tone_snr_db: f64,
    /// Per-slot-pair Tx skew means (t1/t3 and t2/t4 slots).
    pub tx_skew_first_slot_ps: f64,
    pub tx_skew_second_slot_ps: f64,
    pub status: String,
}

impl SweepRow {
    pub const HEADER: [&'static str; 24] = [
        "axis",
        "preset",
        "trial",
        "seed",
        "stream_id",
        "pol",
        "lead_samples",
        "detected_offset",
        "preset_rx_skew_ps",
        "preset_rx_imbalance_db",
        "preset_tx_skew_ps",
        "preset_tx_imbalance_db",
        "est_rx_skew_ps",
        "est_rx_imbalance_db",
        "est_tx_skew_ps",
        "est_tx_imbalance_db",
        "err_rx_skew_ps",
        "err_rx_imbalance_db",
        "err_tx_skew_ps",
        "err_tx_imbalance_db",
        "min_tone_snr_db",
        "tx_skew_first_slot_ps",
        "tx_skew_second_slot_ps",
        "status",
    ];

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    /// Estimate and error of the swept quantity.
    pub fn swept(&self) -> (f64, f64) {
        match self.axis {
            SweepAxis::RxSkew => (self.est_rx_skew_ps, self.err_rx_skew_ps),
            SweepAxis::RxImbalance => (self.est_rx_imbalance_db, self.err_rx_imbalance_db),
            SweepAxis::TxSkew => (self.est_tx_skew_ps, self.err_tx_skew_ps),
            SweepAxis::TxImbalance => (self.est_tx_imbalance_db, self.err_tx_imbalance_db),
        }
    }

    /// All four absolute errors: rx skew, rx imbalance, tx skew, tx imbalance.
    pub fn abs_errors(&self) -> [f64; 4] {
        [
            self.err_rx_skew_ps.abs(),
            self.err_rx_imbalance_db.abs(),
            self.err_tx_skew_ps.abs(),
            self.err_tx_imbalance_db.abs(),
        ]
    }
}

#[derive(Debug, Clone, Copy)]
struct Presets {
    rx_skew_ps: f64,
    rx_imbalance_db: f64,
    tx_skew_ps: f64,
    tx_imbalance_db: f64,
}

fn presets(set: &ImpairmentSet, pol: Polarization) -> Presets {
    Presets {
        rx_skew_ps: set.rx(pol).skew_s * 1e12,
        rx_imbalance_db: set.rx(pol).imbalance_db(),
        tx_skew_ps: set.tx(pol).skew_s * 1e12,
        tx_imbalance_db: set.tx(pol).imbalance_db(),
    }
}

struct TrialId {
    axis: SweepAxis,
    preset: f64,
    trial: usize,
    seed: u64,
    stream_id: u64,
}

fn row(id: &TrialId, pol: Polarization, lead: usize, p: Presets, outcome: std::result::Result<(usize, &PolarizationReport), String>) -> SweepRow {
    let nan = f64::NAN;
    let (offset, est, snr, slots, status) = match outcome {
        Ok((offset, r)) => {
            let slot = |s| r.tx.slot_mean(s).map_or(nan, |v| v * 1e12);
            let [a, b] = SlotId::pair(pol);
            (
                Some(offset),
                [r.tau_rx_s * 1e12, r.imbalance_rx_db, r.tau_tx_s * 1e12, r.imbalance_tx_db],
                r.min_tone_snr_db(),
                [slot(a), slot(b)],
                "ok".to_string(),
            )
        }
        Err(e) => (None, [nan; 4], nan, [nan; 2], e),
    };
    SweepRow {
        axis: id.axis,
        preset: id.preset,
        trial: id.trial,
        seed: id.seed,
        stream_id: id.stream_id,
        pol,
        lead_samples: lead,
        detected_offset: offset,
        preset_rx_skew_ps: p.rx_skew_ps,
        preset_rx_imbalance_db: p.rx_imbalance_db,
        preset_tx_skew_ps: p.tx_skew_ps,
        preset_tx_imbalance_db: p.tx_imbalance_db,
        est_rx_skew_ps: est[0],
        est_rx_imbalance_db: est[1],
        est_tx_skew_ps: est[2],
        est_tx_imbalance_db: est[3],
        err_rx_skew_ps: est[0] - p.rx_skew_ps,
        err_rx_imbalance_db: est[1] - p.rx_imbalance_db,
        err_tx_skew_ps: est[2] - p.tx_skew_ps,
        err_tx_imbalance_db: est[3] - p.tx_imbalance_db,
        min_tone_snr_db: snr,
        tx_skew_first_slot_ps: slots[0],
        tx_skew_second_slot_ps: slots[1],
        status,
    }
}

/// Simulates a capture with the frame at a random offset, detects the frame
/// and estimates both polarizations.
pub fn run_trial(setup: &TrialSetup, max_lead: usize, apply_gsop: bool, rng: &mut RngStream) -> Result<(usize, usize, EstimateReport)> {
    let lead = rng.below(max_lead as u64 + 1) as usize;
    let setup = TrialSetup {
        lead_samples: lead,
        ..setup.clone()
    };
    let plan = setup.placed_plan()?;
    let capture = simulate_capture(&setup, rng)?;
    let offset = frame_detect(&capture, &plan)?;
    let report = estimate_frame(&capture, &plan, offset, &GodardConfig::from_plan(&plan), apply_gsop)?;
    Ok((lead, offset, report))
}

/// Estimation sweep over the configured grid. Trial `t` at point `i` uses
/// stream `i * trials + t` of the configured seed. Trials run in parallel;
/// rows come back in (point, trial, polarization) order. A failing trial
/// yields rows with NaN estimates and the error in `status`.
pub fn run_estimation_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let values = cfg.grid.values()?;
    let axis = cfg.grid.axis;
    let mut jobs = Vec::with_capacity(values.len() * cfg.trials);
    for (i, &v) in values.iter().enumerate() {
        let impairments = axis.apply(&cfg.setup.impairments, v)?;
        for t in 0..cfg.trials {
            jobs.push((v, t, (i * cfg.trials + t) as u64, impairments));
        }
    }
    log::info!("estimation sweep over {axis}: {} points x {} trials", values.len(), cfg.trials);
    let rows = jobs
        .par_iter()
        .map(|&(v, t, stream, impairments)| {
            let setup = TrialSetup {
                impairments,
                ..cfg.setup.clone()
            };
            let mut rng = RngStream::new(cfg.seed, stream);
            let id = TrialId {
                axis,
                preset: v,
                trial: t,
                seed: cfg.seed,
                stream_id: stream,
            };
            let outcome = run_trial(&setup, cfg.max_lead_samples, cfg.apply_gsop, &mut rng);
            if let Err(e) = &outcome {
                log::warn!("{axis}={v} trial {t}: {e}");
            }
            [Polarization::X, Polarization::Y].map(|pol| {
                let p = presets(&impairments, pol);
                match &outcome {
                    Ok((lead, offset, report)) => row(&id, pol, *lead, p, Ok((*offset, report.pol(pol)))),
                    Err(e) => row(&id, pol, 0, p, Err(e.to_string())),
                }
            })
        })
        .collect::<Vec<_>>();
    Ok(rows.into_iter().flatten().collect())
}

/// BER of one subcarrier in one trial, pooled over both polarizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRow {
    pub axis: SweepAxis,
    pub preset: f64,
    pub trial: usize,
    pub seed: u64,
    pub stream_id: u64,
    pub sc_index: usize,
    pub bit_errors_uncompensated: u64,
    pub bits_uncompensated: u64,
    pub ber_uncompensated: f64,
    pub bit_errors_compensated: u64,
    pub bits_compensated: u64,
    pub ber_compensated: f64,
    /// Estimate of the swept quantity on X used for compensation.
    pub est_x: f64,
    pub status: String,
}

impl BerRow {
    pub const HEADER: [&'static str; 14] = [
        "axis",
        "preset",
        "trial",
        "seed",
        "stream_id",
        "sc_index",
        "bit_errors_uncompensated",
        "bits_uncompensated",
        "ber_uncompensated",
        "bit_errors_compensated",
        "bits_compensated",
        "ber_compensated",
        "est_x",
        "status",
    ];
}

fn swept_estimate(axis: SweepAxis, r: &PolarizationReport) -> f64 {
    match axis {
        SweepAxis::RxSkew => r.tau_rx_s * 1e12,
        SweepAxis::RxImbalance => r.imbalance_rx_db,
        SweepAxis::TxSkew => r.tau_tx_s * 1e12,
        SweepAxis::TxImbalance => r.imbalance_tx_db,
    }
}

fn demod_dual(rx: &DualPolFrame, frames: &[Vec<QamFrame>; 2], sc: usize, setup: &TrialSetup) -> Result<BerResult> {
    let x = demodulate(&rx.x, &frames[0][sc], &setup.subcarriers, &setup.channel)?;
    let y = demodulate(&rx.y, &frames[1][sc], &setup.subcarriers, &setup.channel)?;
    Ok(x.merge(&y))
}

/// Per-subcarrier (uncompensated, compensated) BER for one trial.
///
/// The TFIT frame runs on the setup's subcarrier and its estimates are reused
/// for every demodulated subcarrier. The payload is a separate transmission
/// through the same impairments; the uncompensated and compensated payloads
/// see identical laser phase and noise draws.
pub fn ber_trial(
    setup: &TrialSetup,
    cfg: &ExperimentConfig,
    rng: &mut RngStream,
) -> Result<(EstimateReport, Vec<(BerResult, BerResult)>)> {
    let (_, _, report) = run_trial(setup, cfg.max_lead_samples, cfg.apply_gsop, rng)?;
    let sps = setup.tfit.samples_per_symbol_gen;
    let (fx, tx_x) = generate_payload(cfg.ber_symbols, &setup.subcarriers, sps, rng)?;
    let (fy, tx_y) = generate_payload(cfg.ber_symbols, &setup.subcarriers, sps, rng)?;
    let frames = [fx, fy];
    let tx = DualPolFrame::new(tx_x, tx_y)?;
    let power = tx.power();

    let channel_rng = rng.clone();
    let plain = channel(&tx, setup, power, &mut channel_rng.clone())?;
    let pre = tx.try_map(|pol, t| precompensate_tx(t, &report.pol(pol).tx_compensation()?))?;
    let comp = channel(&pre, setup, power, &mut channel_rng.clone())?;
    let leaf = TrialSetup {
        selection: payload_selection(&setup.subcarriers, &setup.channel),
        ..setup.clone()
    };

    cfg.ber_subcarriers
        .iter()
        .map(|&sc| {
            let raw = demod_dual(&receive(&plain, &leaf, sc)?, &frames, sc, setup)?;
            let rx = receive(&comp, &leaf, sc)?
                .try_map(|pol, t| compensate_rx(t, &report.pol(pol).rx_compensation(cfg.apply_gsop)?))?;
            let fixed = demod_dual(&rx, &frames, sc, setup)?;
            Ok((raw, fixed))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| (report, v))
}

/// BER sweep over the configured grid at `ber_osnr_db`. Trial `t` uses
/// stream `t` at every point, so points share payload and noise draws.
pub fn run_ber_sweep(cfg: &ExperimentConfig) -> Result<Vec<BerRow>> {
    cfg.validate()?;
    let values = cfg.grid.values()?;
    let axis = cfg.grid.axis;
    let mut base = cfg.setup.clone();
    base.channel.osnr_db = Some(cfg.ber_osnr_db);
    let mut jobs = Vec::new();
    for &v in &values {
        let impairments = axis.apply(&base.impairments, v)?;
        for t in 0..cfg.trials {
            jobs.push((v, t, impairments));
        }
    }
    log::info!("BER sweep over {axis}: {} points x {} trials", values.len(), cfg.trials);
    let rows = jobs
        .par_iter()
        .map(|&(v, t, impairments)| {
            let setup = TrialSetup {
                impairments,
                ..base.clone()
            };
            let mut rng = RngStream::new(cfg.seed, t as u64);
            let blank = |sc: usize, status: String| BerRow {
                axis,
                preset: v,
                trial: t,
                seed: cfg.seed,
                stream_id: t as u64,
                sc_index: sc,
                bit_errors_uncompensated: 0,
                bits_uncompensated: 0,
                ber_uncompensated: f64::NAN,
                bit_errors_compensated: 0,
                bits_compensated: 0,
                ber_compensated: f64::NAN,
                est_x: f64::NAN,
                status,
            };
            match ber_trial(&setup, cfg, &mut rng) {
                Ok((report, results)) => results
                    .into_iter()
                    .map(|(raw, fixed)| BerRow {
                        bit_errors_uncompensated: raw.bit_errors,
                        bits_uncompensated: raw.bits_total,
                        ber_uncompensated: raw.ber,
                        bit_errors_compensated: fixed.bit_errors,
                        bits_compensated: fixed.bits_total,
                        ber_compensated: fixed.ber,
                        est_x: swept_estimate(axis, &report.x),
                        ..blank(raw.sc_index, "ok".into())
                    })
                    .collect::<Vec<_>>(),
                Err(e) => {
                    log::warn!("{axis}={v} trial {t}: {e}");
                    cfg.ber_subcarriers.iter().map(|&sc| blank(sc, e.to_string())).collect()
                }
            }
        })
        .collect::<Vec<_>>();
    Ok(rows.into_iter().flatten().collect())
}

/// Writes rows with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_with_header<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(TfitError::Schema(format!(
            "{}: header {:?} does not match expected {:?}",
            path.display(),
            got,
            header
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| TfitError::Schema(format!("{}: {e}", path.display()))))
        .collect()
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    read_with_header(path, &SweepRow::HEADER)
}

pub fn read_ber_csv(path: &Path) -> Result<Vec<BerRow>> {
    read_with_header(path, &BerRow::HEADER)
}

/// Writes a report as pretty-printed JSON.
pub fn write_report(path: &Path, report: &EstimateReport) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(report)?)?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<EstimateReport> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Largest finite absolute error of the swept quantity, per grid point.
pub fn max_abs_error_by_point(rows: &[SweepRow]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for r in rows {
        let e = r.swept().1.abs();
        let e = if e.is_finite() { e } else { f64::INFINITY };
        match out.iter_mut().find(|(p, _)| *p == r.preset) {
            Some((_, m)) => *m = m.max(e),
            None => out.push((r.preset, e)),
        }
    }
    out
}
