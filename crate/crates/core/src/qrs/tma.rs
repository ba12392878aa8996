//! Two moving averages (Elgendi): blocks of interest where the QRS-length
//! average of the squared band-passed signal exceeds the beat-length
//! average plus an offset.

use super::samples_for;
use crate::dsp::{centered_mean, Band, Iir};

const W1_S: f64 = 0.097;
const W2_S: f64 = 0.611;
const BETA: f64 = 0.08;

pub(super) fn candidates(x: &[f64], fs: f64) -> Vec<usize> {
    let hi = 20.0f64.min(0.45 * fs);
    let band = Iir::butterworth(2, Band::Bandpass(8.0, hi), fs).apply(x);
    let energy: Vec<f64> = band.iter().map(|v| v * v).collect();
    let w1 = samples_for(W1_S, fs);
    let ma_qrs = centered_mean(&energy, w1);
    let ma_beat = centered_mean(&energy, samples_for(W2_S, fs));
    let offset = BETA * energy.iter().sum::<f64>() / energy.len() as f64;

    let mut out = Vec::new();
    let mut start = None;
    for i in 0..=energy.len() {
        let inside = i < energy.len() && ma_qrs[i] > ma_beat[i] + offset;
        match (inside, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if i - s >= w1 {
                    let peak = (s..i).fold(s, |b, j| if energy[j] > energy[b] { j } else { b });
                    out.push(peak);
                }
                start = None;
            }
            _ => {}
        }
    }
    out
}
