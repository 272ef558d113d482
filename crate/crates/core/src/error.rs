use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, TfitError>;

#[derive(Debug, Error)]
pub enum TfitError {
    /// Invalid parameters, plans or traces.
    #[error("configuration error: {0}")]
    Config(String),

    /// A signal does not fit inside the Nyquist band it is being moved to.
    #[error("signal band exceeds target Nyquist: {out_of_band_db:.1} dB of energy out of band")]
    SpectralFit { out_of_band_db: f64 },

    /// A training tone could not be separated from the noise floor.
    #[error("tone at {tone_hz:.4e} Hz below detection floor (tone SNR {tone_snr_db:.1} dB)")]
    LowConfidence { tone_hz: f64, tone_snr_db: f64 },

    #[error("frame detection failed: {0}")]
    Detection(String),

    /// Zero-power tributary or similarly degenerate input.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// CSV or capture file that does not match its documented layout.
    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl TfitError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        TfitError::Config(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            TfitError::Config(_) | TfitError::Schema(_) => 2,
            TfitError::SpectralFit { .. }
            | TfitError::LowConfidence { .. }
            | TfitError::Detection(_)
            | TfitError::Degenerate(_) => 3,
            TfitError::Io(_) | TfitError::Csv(_) | TfitError::Json(_) => 4,
        }
    }
}
