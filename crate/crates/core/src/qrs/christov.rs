//! Christov: smoothed complex-lead slope signal against a combined
//! threshold M + F + R (steep-slope, high-frequency and beat-expectation
//! terms).

use super::{refractory_samples, samples_for, LEARNING_S};
use crate::dsp::moving_average;
use std::collections::VecDeque;

pub(super) fn candidates(x: &[f64], fs: f64) -> Vec<usize> {
    let smooth = moving_average(x, samples_for(0.0286, fs));
    let mut slope = vec![0.0; smooth.len()];
    for i in 1..smooth.len().saturating_sub(1) {
        slope[i] = (smooth[i + 1] - smooth[i - 1]).abs();
    }
    let y = moving_average(&slope, samples_for(0.05, fs));
    threshold(&y, fs)
}

fn threshold(y: &[f64], fs: f64) -> Vec<usize> {
    let ms50 = samples_for(0.05, fs);
    let ms200 = refractory_samples(fs);
    let ms300 = samples_for(0.3, fs);
    let ms1200 = samples_for(1.2, fs);
    let learn = ((LEARNING_S * fs) as usize).min(y.len());
    // the 1/150 step is defined at 250 Hz
    let f_divisor = 150.0 * fs / 250.0;

    let init = 0.6 * y[..learn].iter().cloned().fold(0.0, f64::max);
    let mut mm: VecDeque<f64> = VecDeque::from(vec![init; 5]);
    let mm_mean = |mm: &VecDeque<f64>| mm.iter().sum::<f64>() / mm.len() as f64;

    let mut m = init;
    let mut new_m5 = 0.0;
    let mut f = 0.0;
    let mut f_sum = 0.0;
    let mut recent_l: VecDeque<f64> = VecDeque::new();
    let mut qrs: Vec<usize> = Vec::new();
    let mut rr: VecDeque<usize> = VecDeque::new();
    let mut rm = 0usize;

    for i in 0..y.len() {
        if let Some(&q) = qrs.last() {
            let since = i - q;
            if since < ms200 {
                let recent = y[q..=i].iter().cloned().fold(0.0, f64::max) * 0.6;
                let level = mm_mean(&mm);
                new_m5 = if recent > 1.5 * level { 1.1 * level } else { recent };
            } else if since == ms200 {
                mm.pop_front();
                mm.push_back(if new_m5 > 0.0 { new_m5 } else { *mm.back().unwrap() });
                m = mm_mean(&mm);
            } else if since < ms1200 {
                let frac = (since - ms200) as f64 / (ms1200 - ms200) as f64;
                m = mm_mean(&mm) * (1.0 - 0.4 * frac);
            } else {
                m = 0.6 * mm_mean(&mm);
            }
        }

        // F accumulates (newest 50 ms max - 50 ms max from 300 ms earlier);
        // the telescoped form avoids carrying the start-up window as an offset
        if i >= ms50 {
            let l = y[i - ms50..i].iter().cloned().fold(0.0, f64::max);
            recent_l.push_back(l);
            f_sum += l;
            if recent_l.len() > ms300 {
                f_sum -= recent_l.pop_front().unwrap();
            }
            f = f_sum / f_divisor;
        }

        let mut r = 0.0;
        if let Some(&q) = qrs.last() {
            let since = i - q;
            if rm > 0 && since > 2 * rm / 3 && since < rm {
                r = (m - mm_mean(&mm)) / 1.4;
            }
        }

        let mfr = m + f + r;
        let ready = qrs.last().map_or(true, |&q| i > q + ms200);
        if ready && y[i] > mfr {
            if let Some(&q) = qrs.last() {
                rr.push_back(i - q);
                if rr.len() > 5 {
                    rr.pop_front();
                }
                rm = rr.iter().sum::<usize>() / rr.len();
            }
            qrs.push(i);
            new_m5 = 0.0;
        }
    }
    qrs
}
