use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TfitError};
use crate::impair::{ImpairmentSet, IqImpairment};
use crate::link::SelectionFilter;

use super::pipeline::TrialSetup;

/// Version of the key-value configuration schema.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SweepAxis {
    RxSkew,
    RxImbalance,
    TxSkew,
    TxImbalance,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 4] = [
        SweepAxis::RxSkew,
        SweepAxis::RxImbalance,
        SweepAxis::TxSkew,
        SweepAxis::TxImbalance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::RxSkew => "rx_skew",
            SweepAxis::RxImbalance => "rx_imbalance",
            SweepAxis::TxSkew => "tx_skew",
            SweepAxis::TxImbalance => "tx_imbalance",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            SweepAxis::RxSkew | SweepAxis::TxSkew => "ps",
            SweepAxis::RxImbalance | SweepAxis::TxImbalance => "dB",
        }
    }

    pub fn is_skew(self) -> bool {
        matches!(self, SweepAxis::RxSkew | SweepAxis::TxSkew)
    }

    /// Default grid: skews -15..15 ps step 2.5, imbalances -3..3 dB step 0.5.
    pub fn default_grid(self) -> SweepGrid {
        if self.is_skew() {
            SweepGrid::new(self, -15.0, 15.0, 2.5)
        } else {
            SweepGrid::new(self, -3.0, 3.0, 0.5)
        }
    }

    /// Sets the swept quantity, in axis units, on both polarizations.
    pub fn apply(self, set: &ImpairmentSet, value: f64) -> Result<ImpairmentSet> {
        let mut out = *set;
        for imp in match self {
            SweepAxis::RxSkew | SweepAxis::RxImbalance => [&mut out.rx_x, &mut out.rx_y],
            SweepAxis::TxSkew | SweepAxis::TxImbalance => [&mut out.tx_x, &mut out.tx_y],
        } {
            *imp = if self.is_skew() {
                IqImpairment::new(value * 1e-12, imp.gain, imp.quad_error_rad)?
            } else {
                IqImpairment::from_db(imp.skew_s, value, imp.quad_error_rad)?
            };
        }
        Ok(out)
    }

    /// Companion impairments of the coexistence panel that sweeps this axis.
    pub fn coexist_companions(self) -> ImpairmentSet {
        let (tx_ps, tx_db, rx_ps, rx_db) = match self {
            SweepAxis::RxSkew => (5.0, 1.0, 0.0, -1.0),
            SweepAxis::RxImbalance => (5.0, 1.0, -5.0, 0.0),
            SweepAxis::TxSkew => (0.0, 1.0, -5.0, -1.0),
            SweepAxis::TxImbalance => (5.0, 0.0, -5.0, -1.0),
        };
        let tx = IqImpairment::from_db(tx_ps * 1e-12, tx_db, 0.0).expect("finite companions");
        let rx = IqImpairment::from_db(rx_ps * 1e-12, rx_db, 0.0).expect("finite companions");
        ImpairmentSet {
            tx_x: tx,
            tx_y: tx,
            rx_x: rx,
            rx_y: rx,
        }
    }

    /// Preset value of this axis, in axis units, for polarization X of `set`.
    pub fn preset(self, set: &ImpairmentSet) -> f64 {
        match self {
            SweepAxis::RxSkew => set.rx_x.skew_s * 1e12,
            SweepAxis::RxImbalance => set.rx_x.imbalance_db(),
            SweepAxis::TxSkew => set.tx_x.skew_s * 1e12,
            SweepAxis::TxImbalance => set.tx_x.imbalance_db(),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = TfitError;

    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| TfitError::config(format!("unknown sweep axis '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepGrid {
    pub fn new(axis: SweepAxis, start: f64, stop: f64, step: f64) -> Self {
        SweepGrid {
            axis,
            start,
            stop,
            step,
        }
    }

    pub fn single(axis: SweepAxis, value: f64) -> Self {
        SweepGrid::new(axis, value, value, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step.is_finite()) {
            return Err(TfitError::config("sweep grid values must be finite"));
        }
        if self.start != self.stop {
            if self.step == 0.0 {
                return Err(TfitError::config("sweep step is zero"));
            }
            if (self.stop - self.start).signum() != self.step.signum() {
                return Err(TfitError::config(format!(
                    "sweep step {} points away from stop {} (start {})",
                    self.step, self.stop, self.start
                )));
            }
        }
        Ok(())
    }

    /// Grid points from start to stop inclusive.
    pub fn values(&self) -> Result<Vec<f64>> {
        self.validate()?;
        if self.start == self.stop {
            return Ok(vec![self.start]);
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..n)
            .map(|i| {
                let v = self.start + i as f64 * self.step;
                (v * 1e9).round() / 1e9
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub setup: TrialSetup,
    pub grid: SweepGrid,
    pub trials: usize,
    pub seed: u64,
    /// Each trial places the frame at a random offset up to this many
    /// samples (2 samples/symbol) into the capture.
    pub max_lead_samples: usize,
    pub apply_gsop: bool,
    pub ber_symbols: usize,
    pub ber_osnr_db: f64,
    /// Subcarriers demodulated by BER sweeps.
    pub ber_subcarriers: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            setup: TrialSetup {
                tail_samples: 256,
                ..TrialSetup::default()
            },
            grid: SweepAxis::RxSkew.default_grid(),
            trials: 10,
            seed: 1,
            max_lead_samples: 2048,
            apply_gsop: false,
            ber_symbols: 1 << 16,
            ber_osnr_db: 22.0,
            ber_subcarriers: vec![0, 1],
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| TfitError::config(format!("cannot parse '{value}' for key '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(TfitError::config(format!("key '{key}' expects true/false, got '{value}'"))),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.setup.validate()?;
        self.grid.validate()?;
        if self.trials == 0 {
            return Err(TfitError::config("trials must be at least 1"));
        }
        if self.ber_symbols < PILOT_MIN_SYMBOLS {
            return Err(TfitError::config(format!("ber_symbols must be at least {PILOT_MIN_SYMBOLS}")));
        }
        if !self.ber_osnr_db.is_finite() {
            return Err(TfitError::config("ber_osnr_db must be finite"));
        }
        for &sc in &self.ber_subcarriers {
            self.setup.subcarriers.center(sc)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = ExperimentConfig::default();
        cfg.apply_kv_text(&text)?;
        Ok(cfg)
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                TfitError::config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            self.set(k.trim(), v.trim())
                .map_err(|e| TfitError::config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    /// Sets one key; the same keys serve the file and CLI overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.setup;
        match key {
            "schema_version" => {
                let v: u32 = parse(key, value)?;
                if v != CONFIG_SCHEMA_VERSION {
                    return Err(TfitError::config(format!(
                        "config schema version {v} is not supported (expected {CONFIG_SCHEMA_VERSION})"
                    )));
                }
            }
            "seed" => self.seed = parse(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "max_lead_samples" => self.max_lead_samples = parse(key, value)?,
            "tail_samples" => s.tail_samples = parse(key, value)?,
            "apply_gsop" => self.apply_gsop = parse_bool(key, value)?,
            "axis" => self.grid.axis = value.parse()?,
            "start" => self.grid.start = parse(key, value)?,
            "stop" => self.grid.stop = parse(key, value)?,
            "step" => self.grid.step = parse(key, value)?,
            "baud_rate_hz" => {
                let b: f64 = parse(key, value)?;
                s.tfit.baud_rate_hz = b;
                s.subcarriers.per_sc_baud_hz = b;
            }
            "tone_f1_hz" => s.tfit.tone_f1_hz = parse(key, value)?,
            "tone_f2_hz" => s.tfit.tone_f2_hz = parse(key, value)?,
            "tone_amplitude" => s.tfit.tone_amplitude = parse(key, value)?,
            "slot_len_symbols" => s.tfit.slot_len_symbols = parse(key, value)?,
            "n_blocks" => s.tfit.n_blocks = parse(key, value)?,
            "samples_per_symbol_gen" => s.tfit.samples_per_symbol_gen = parse(key, value)?,
            "sc_centers_hz" => {
                let centers = value
                    .split(',')
                    .map(|c| parse::<f64>(key, c.trim()))
                    .collect::<Result<Vec<_>>>()?;
                s.subcarriers.n_sc = centers.len();
                s.subcarriers.centers_hz = centers;
            }
            "rrc_rolloff" => s.subcarriers.rrc_rolloff = parse(key, value)?,
            "sc_index" => s.sc_index = parse(key, value)?,
            "selection" => {
                s.selection = match value {
                    "rrc" => SelectionFilter::Rrc,
                    _ => match value.strip_prefix("flat:") {
                        Some(w) => SelectionFilter::Flat {
                            half_width_hz: parse(key, w)?,
                        },
                        None => {
                            return Err(TfitError::config(format!(
                                "selection must be 'rrc' or 'flat:<half width Hz>', got '{value}'"
                            )))
                        }
                    },
                }
            }
            "freq_offset_hz" => s.channel.freq_offset_hz = parse(key, value)?,
            "linewidth_hz" => s.channel.linewidth_hz = parse(key, value)?,
            "osnr_db" => {
                s.channel.osnr_db = match value {
                    "inf" | "none" => None,
                    _ => Some(parse(key, value)?),
                }
            }
            "fiber_km" => s.channel.fiber_km = parse(key, value)?,
            "dispersion_ps_nm_km" => s.channel.dispersion_ps_nm_km = parse(key, value)?,
            "enable_cd" => s.channel.enable_cd = parse_bool(key, value)?,
            "tx_skew_ps" | "tx_imbalance_db" | "tx_theta_deg" | "rx_skew_ps" | "rx_imbalance_db"
            | "rx_theta_deg" => {
                let v: f64 = parse(key, value)?;
                let set = &mut s.impairments;
                let targets = if key.starts_with("tx") {
                    [&mut set.tx_x, &mut set.tx_y]
                } else {
                    [&mut set.rx_x, &mut set.rx_y]
                };
                for imp in targets {
                    match &key[3..] {
                        "skew_ps" => imp.skew_s = v * 1e-12,
                        "imbalance_db" => imp.gain = crate::impair::db_to_gain(v),
                        _ => imp.quad_error_rad = v.to_radians(),
                    }
                    imp.validate()?;
                }
            }
            "ber_symbols" => self.ber_symbols = parse(key, value)?,
            "ber_osnr_db" => self.ber_osnr_db = parse(key, value)?,
            "ber_subcarriers" => {
                self.ber_subcarriers = value
                    .split(',')
                    .map(|c| parse::<usize>(key, c.trim()))
                    .collect::<Result<Vec<_>>>()?
            }
            _ => return Err(TfitError::config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }
}

const PILOT_MIN_SYMBOLS: usize = 64;
