//! Binary capture files.
//!
//! Layout, little-endian: 8-byte magic `TFITCAP\0`, `u32` version, `f64`
//! sample rate in Hz, `u32` channel count (2: X then Y), `u64` samples per
//! channel, then each channel in turn as interleaved `f32` I/Q pairs.

use std::io::{Read, Write};
use std::path::Path;

use crate::dsp::{SampleTrace, C64};
use crate::error::{Result, TfitError};
use crate::tfit::DualPolFrame;

pub const CAPTURE_MAGIC: [u8; 8] = *b"TFITCAP\0";
pub const CAPTURE_VERSION: u32 = 1;

pub fn write_capture(path: &Path, frame: &DualPolFrame) -> Result<()> {
    let mut out = Vec::with_capacity(32 + 16 * frame.len());
    out.extend_from_slice(&CAPTURE_MAGIC);
    out.extend_from_slice(&CAPTURE_VERSION.to_le_bytes());
    out.extend_from_slice(&frame.sample_rate_hz().to_le_bytes());
    out.extend_from_slice(&2u32.to_le_bytes());
    out.extend_from_slice(&(frame.len() as u64).to_le_bytes());
    for t in [&frame.x, &frame.y] {
        for s in t.samples() {
            out.extend_from_slice(&(s.re as f32).to_le_bytes());
            out.extend_from_slice(&(s.im as f32).to_le_bytes());
        }
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

fn take<const N: usize>(buf: &[u8], at: &mut usize) -> Result<[u8; N]> {
    let bytes = buf
        .get(*at..*at + N)
        .ok_or_else(|| TfitError::Schema(format!("capture truncated at byte {}", *at)))?;
    *at += N;
    Ok(bytes.try_into().expect("slice of length N"))
}

pub fn read_capture(path: &Path) -> Result<DualPolFrame> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut at = 0;
    if take::<8>(&buf, &mut at)? != CAPTURE_MAGIC {
        return Err(TfitError::Schema(format!("{} is not a capture file", path.display())));
    }
    let version = u32::from_le_bytes(take(&buf, &mut at)?);
    if version != CAPTURE_VERSION {
        return Err(TfitError::Schema(format!("capture version {version} is not supported")));
    }
    let rate = f64::from_le_bytes(take(&buf, &mut at)?);
    let channels = u32::from_le_bytes(take(&buf, &mut at)?);
    if channels != 2 {
        return Err(TfitError::Schema(format!("expected 2 channels, found {channels}")));
    }
    let n = u64::from_le_bytes(take(&buf, &mut at)?) as usize;
    if buf.len() - at != 2 * n * 8 {
        return Err(TfitError::Schema(format!(
            "capture body holds {} bytes, header implies {}",
            buf.len() - at,
            2 * n * 8
        )));
    }
    let mut channel = || -> Result<SampleTrace> {
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            let re = f32::from_le_bytes(take(&buf, &mut at)?);
            let im = f32::from_le_bytes(take(&buf, &mut at)?);
            v.push(C64::new(re as f64, im as f64));
        }
        SampleTrace::new(v, rate)
    };
    let x = channel()?;
    let y = channel()?;
    DualPolFrame::new(x, y)
}
