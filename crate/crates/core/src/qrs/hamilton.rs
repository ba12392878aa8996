//! Hamilton: 8-16 Hz band-pass, rectified first difference, 80 ms average,
//! and a threshold placed 45% of the way from the mean noise peak to the
//! mean QRS peak (eight of each kept).

use super::{refractory_samples, samples_for, LEARNING_S};
use crate::dsp::{local_maxima, moving_average, Band, Iir};
use std::collections::VecDeque;

const BUFFER: usize = 8;

pub(super) fn candidates(x: &[f64], fs: f64) -> Vec<usize> {
    let hi = 16.0f64.min(0.45 * fs);
    let band = Iir::butterworth(1, Band::Bandpass(8.0, hi), fs).apply(x);
    let mut diff = vec![0.0; band.len()];
    for i in 1..band.len() {
        diff[i] = (band[i] - band[i - 1]).abs();
    }
    let feature = moving_average(&diff, samples_for(0.08, fs));
    threshold(&feature, fs)
}

fn mean(buf: &VecDeque<f64>) -> f64 {
    if buf.is_empty() {
        0.0
    } else {
        buf.iter().sum::<f64>() / buf.len() as f64
    }
}

fn push(buf: &mut VecDeque<f64>, v: f64) {
    if buf.len() == BUFFER {
        buf.pop_front();
    }
    buf.push_back(v);
}

fn threshold(feature: &[f64], fs: f64) -> Vec<usize> {
    let refractory = refractory_samples(fs);
    let second = fs.round() as usize;
    let learn = ((LEARNING_S * fs) as usize).min(feature.len());

    let mut qrs_buf: VecDeque<f64> = feature[..learn]
        .chunks(second.max(1))
        .map(|c| c.iter().cloned().fold(0.0, f64::max))
        .collect();
    let mut noise_buf: VecDeque<f64> = VecDeque::from(vec![0.0]);
    let mut rr: VecDeque<usize> = VecDeque::new();

    let peaks = local_maxima(feature);
    let mut qrs: Vec<usize> = Vec::new();
    let mut since_last = 0;

    for (k, &p) in peaks.iter().enumerate() {
        let th = mean(&noise_buf) + 0.45 * (mean(&qrs_buf) - mean(&noise_buf));

        if let Some(&last) = qrs.last() {
            if !rr.is_empty() {
                let avg = rr.iter().sum::<usize>() as f64 / rr.len() as f64;
                if (p - last) as f64 > 1.5 * avg {
                    let best = peaks[since_last..k]
                        .iter()
                        .copied()
                        .filter(|&c| c >= last + refractory && p >= c + refractory && feature[c] > 0.5 * th)
                        .max_by(|&a, &b| feature[a].total_cmp(&feature[b]).then(b.cmp(&a)));
                    if let Some(c) = best {
                        push(&mut qrs_buf, feature[c]);
                        rr.push_back(c - last);
                        if rr.len() > BUFFER {
                            rr.pop_front();
                        }
                        qrs.push(c);
                        since_last = k;
                    }
                }
            }
        }

        let th = mean(&noise_buf) + 0.45 * (mean(&qrs_buf) - mean(&noise_buf));
        let value = feature[p];
        if let Some(&last) = qrs.last() {
            if p - last < refractory {
                if value > feature[last] {
                    *qrs.last_mut().unwrap() = p;
                    since_last = k + 1;
                }
                continue;
            }
        }
        if value > th {
            push(&mut qrs_buf, value);
            if let Some(&last) = qrs.last() {
                rr.push_back(p - last);
                if rr.len() > BUFFER {
                    rr.pop_front();
                }
            }
            qrs.push(p);
            since_last = k + 1;
        } else {
            push(&mut noise_buf, value);
        }
    }
    qrs
}
