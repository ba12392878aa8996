//! Stationary-wavelet detector (Kalidas and Tamil): squared level-3 db3
//! detail coefficients, a 100 ms average and adaptive thresholds.

use super::{samples_for, PeakThresholds};
use crate::dsp::moving_average;

const LEVEL: u32 = 3;

const DB3_LO: [f64; 6] = [
    0.03522629188570953,
    -0.08544127388202666,
    -0.13501102001025458,
    0.45987750211849154,
    0.8068915093110925,
    0.33267055295008263,
];

fn db3_hi() -> [f64; 6] {
    let mut hi = [0.0; 6];
    for (k, h) in hi.iter_mut().enumerate() {
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        *h = sign * DB3_LO[5 - k];
    }
    hi
}

// undecimated periodic filtering with the filter dilated by 2^level
fn dilated(x: &[f64], filter: &[f64; 6], level: u32) -> Vec<f64> {
    let n = x.len();
    let step = 1usize << level;
    let shift = 3 * step;
    (0..n)
        .map(|o| {
            filter
                .iter()
                .enumerate()
                .map(|(k, h)| h * x[(o + shift + n * step * 6 - k * step) % n])
                .sum()
        })
        .collect()
}

/// Level-3 detail and approximation of the edge-padded signal, aligned
/// like the common Python wavelet package. Returns (detail1, detail3,
/// approx3), each of the padded length.
pub fn swt_detail(x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let block = 1usize << LEVEL;
    let mut padded = x.to_vec();
    let last = *x.last().unwrap_or(&0.0);
    while padded.len() % block != 0 {
        padded.push(last);
    }
    let hi = db3_hi();
    let mut approx = padded;
    let mut detail1 = Vec::new();
    let mut detail = Vec::new();
    for level in 0..LEVEL {
        detail = dilated(&approx, &hi, level);
        if level == 0 {
            detail1 = detail.clone();
        }
        approx = dilated(&approx, &DB3_LO, level);
    }
    (detail1, detail, approx)
}

pub(super) fn candidates(x: &[f64], fs: f64) -> Vec<usize> {
    let (_, detail, _) = swt_detail(x);
    let squared: Vec<f64> = detail[..x.len()].iter().map(|d| d * d).collect();
    let feature = moving_average(&squared, samples_for(0.1, fs));
    PeakThresholds { fs, slope: None, searchback_factor: 1.66 }.run(&feature)
}
