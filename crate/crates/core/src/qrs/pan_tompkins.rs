//! Pan-Tompkins: integer-coefficient band-pass, five-point derivative,
//! squaring and moving-window integration, with the filter lengths scaled
//! from their 200 Hz originals.

use super::{samples_for, PeakThresholds};
use crate::dsp::moving_average;

pub(super) fn candidates(x: &[f64], fs: f64) -> Vec<usize> {
    let band = bandpass(x, fs);
    let deriv = derivative(&band, fs);
    let squared: Vec<f64> = deriv.iter().map(|d| d * d).collect();
    let integrated = moving_average(&squared, samples_for(0.15, fs));
    PeakThresholds { fs, slope: Some(&squared), searchback_factor: 1.66 }.run(&integrated)
}

/// Low-pass as two cascaded moving sums, high-pass as a delayed sample
/// minus a moving average ("all-pass minus low-pass").
pub(super) fn bandpass(x: &[f64], fs: f64) -> Vec<f64> {
    let lp_len = ((6.0 * fs / 200.0).round() as usize).max(1);
    let hp_len = ((32.0 * fs / 200.0).round() as usize).max(2);
    let lp = moving_average(&moving_average(x, lp_len), lp_len);
    let avg = moving_average(&lp, hp_len);
    let delay = hp_len / 2;
    (0..lp.len())
        .map(|i| if i >= delay { lp[i - delay] } else { 0.0 } - avg[i])
        .collect()
}

pub(super) fn derivative(x: &[f64], fs: f64) -> Vec<f64> {
    let at = |i: isize| if i >= 0 { x[i as usize] } else { 0.0 };
    (0..x.len() as isize)
        .map(|i| (2.0 * at(i) + at(i - 1) - at(i - 3) - 2.0 * at(i - 4)) * fs / 8.0)
        .collect()
}
