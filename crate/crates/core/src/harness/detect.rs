use crate::error::{Result, TfitError};
use crate::tfit::{DualPolFrame, TfitPlan};

/// Normalized correlation a detected frame must reach.
pub const DETECTION_THRESHOLD: f64 = 0.5;

/// Locates the TFIT frame in a capture at 2 samples/symbol and returns the
/// sample index of its first slot.
///
/// The power difference `|x|^2 - |y|^2` is correlated with the frame's
/// polarization signature (+1 over t1/t2, -1 over t3/t4) and normalized by
/// the total power under the template, so a clean frame scores 1.
pub fn frame_detect(capture: &DualPolFrame, plan: &TfitPlan) -> Result<usize> {
    plan.validate()?;
    let slot = 2 * plan.slot_len_symbols;
    let frame = 4 * slot * plan.n_blocks;
    let n = capture.len();
    if n < frame {
        return Err(TfitError::Detection(format!(
            "capture of {n} samples is shorter than one {frame}-sample frame"
        )));
    }
    // prefix sums of the difference and of the total power
    let mut diff = vec![0.0; n + 1];
    let mut total = vec![0.0; n + 1];
    for (k, (x, y)) in capture.x.samples().iter().zip(capture.y.samples()).enumerate() {
        let (px, py) = (x.norm_sqr(), y.norm_sqr());
        diff[k + 1] = diff[k] + px - py;
        total[k + 1] = total[k] + px + py;
    }
    let score = |o: usize| {
        let mut c = 0.0;
        for b in 0..plan.n_blocks {
            let start = o + 4 * slot * b;
            c += diff[start + 2 * slot] - diff[start];
            c -= diff[start + 4 * slot] - diff[start + 2 * slot];
        }
        let e = total[o + frame] - total[o];
        if e > 0.0 {
            c / e
        } else {
            0.0
        }
    };
    let (best, peak) = (0..=n - frame)
        .map(|o| (o, score(o)))
        .fold((0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
    if !(peak >= DETECTION_THRESHOLD) {
        return Err(TfitError::Detection(format!(
            "no TFIT frame found: best normalized correlation {peak:.3} below {DETECTION_THRESHOLD}"
        )));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{gaussian_noise, RngStream};
    use crate::harness::{simulate_capture, TrialSetup};

    fn detect_at(lead: usize, seed: u64) -> usize {
        let setup = TrialSetup {
            lead_samples: lead,
            tail_samples: 3000,
            ..TrialSetup::default()
        };
        let cap = simulate_capture(&setup, &mut RngStream::new(seed, 0)).unwrap();
        frame_detect(&cap, &setup.placed_plan().unwrap()).unwrap()
    }

    #[test]
    fn known_offsets() {
        for (lead, seed) in [(12345, 1), (0, 2), (777, 3)] {
            let got = detect_at(lead, seed);
            assert!((got as i64 - lead as i64).abs() <= 1, "{lead} -> {got}");
        }
    }

    #[test]
    fn noise_only_fails() {
        let plan = TfitPlan::default();
        let n = 4 * 4096 * plan.n_blocks + 5000;
        let mut rng = RngStream::new(4, 0);
        let cap = DualPolFrame::new(
            gaussian_noise(n, 1.0, 16e9, &mut rng).unwrap(),
            gaussian_noise(n, 1.0, 16e9, &mut rng).unwrap(),
        )
        .unwrap();
        assert!(matches!(frame_detect(&cap, &plan), Err(TfitError::Detection(_))));
        let short = DualPolFrame::new(cap.x.window(0, 100), cap.y.window(0, 100)).unwrap();
        assert!(matches!(frame_detect(&short, &plan), Err(TfitError::Detection(_))));
    }
}
