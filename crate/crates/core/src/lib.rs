//! Simulation laboratory for far-end IQ skew and power imbalance estimation
//! in digital-subcarrier-multiplexed coherent point-to-multipoint links.
//!
//! Signal flow for one leaf capture:
//!
//! ```text
//! tfit::build_frame -> impair::apply_tx_iq -> link (mux, CD, laser, noise)
//!   -> link::select_subcarrier -> impair::apply_rx_iq -> harness::frame_detect
//!   -> estimate (Rx first) -> compensate::compensate_rx -> estimate (Tx)
//! ```

pub mod compensate;
pub mod dsp;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod impair;
pub mod link;
pub mod payload;
pub mod tfit;

pub use dsp::{SampleTrace, Spectrum, RngStream, C64};
pub use error::{Result, TfitError};
