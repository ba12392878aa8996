//! Seeded synthetic ECG-like signals for tests and demos: each beat is a
//! sum of Gaussian P, Q, R, S and T waves, with RR jitter, baseline wander
//! and white noise, rounded to integer ADC units.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthEcg {
    pub samples: Vec<f64>,
    pub fs: f64,
    /// Sample index of every R wave.
    pub r_peaks: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub fs: f64,
    pub seconds: f64,
    pub heart_rate: f64,
    /// Relative RR standard deviation.
    pub rr_jitter: f64,
    /// R amplitude in ADC units.
    pub gain: f64,
    pub noise: f64,
    pub wander: f64,
    pub offset: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            fs: 360.0,
            seconds: 30.0,
            heart_rate: 72.0,
            rr_jitter: 0.03,
            gain: 200.0,
            noise: 0.02,
            wander: 0.1,
            offset: 1024.0,
        }
    }
}

// (offset from R in s, width in s, amplitude relative to R)
const WAVES: [(f64, f64, f64); 5] = [
    (-0.18, 0.025, 0.12),
    (-0.025, 0.008, -0.12),
    (0.0, 0.010, 1.0),
    (0.025, 0.009, -0.22),
    (0.26, 0.045, 0.28),
];

pub fn generate(params: &SynthParams, seed: u64) -> SynthEcg {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = params.fs;
    let n = (params.seconds * fs).round() as usize;
    let rr_mean = 60.0 / params.heart_rate;
    let jitter = Normal::new(0.0, params.rr_jitter.max(0.0)).unwrap();

    let mut beats = Vec::new();
    let mut t = rng.gen_range(0.2..0.2 + rr_mean);
    while t < params.seconds {
        beats.push(t);
        t += rr_mean * (1.0 + jitter.sample(&mut rng)).clamp(0.6, 1.4);
    }

    let mut x = vec![0.0; n];
    for &b in &beats {
        let scale = 1.0 + 0.05 * rng.gen_range(-1.0..1.0);
        for &(dt, width, amp) in &WAVES {
            let centre = (b + dt) * fs;
            let sigma = width * fs;
            let lo = (centre - 5.0 * sigma).floor().max(0.0) as usize;
            let hi = ((centre + 5.0 * sigma).ceil().max(0.0) as usize).min(n);
            for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
                let d = (i as f64 - centre) / sigma;
                *v += scale * amp * (-0.5 * d * d).exp();
            }
        }
    }

    let noise = Normal::new(0.0, params.noise.max(0.0)).unwrap();
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let wander_hz = rng.gen_range(0.1..0.35);
    let samples = x
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let t = i as f64 / fs;
            let w = params.wander * (std::f64::consts::TAU * wander_hz * t + phase).sin();
            (params.offset + params.gain * (v + w + noise.sample(&mut rng))).round()
        })
        .collect();

    let r_peaks = beats
        .iter()
        .map(|b| (b * fs).round() as usize)
        .filter(|&p| p < n)
        .collect();
    SynthEcg { samples, fs, r_peaks }
}

/// Random parameters within a plausible range, then [`generate`].
pub fn random(seed: u64, fs: f64, seconds: f64) -> SynthEcg {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let params = SynthParams {
        fs,
        seconds,
        heart_rate: rng.gen_range(50.0..120.0),
        rr_jitter: rng.gen_range(0.0..0.06),
        gain: rng.gen_range(80.0..400.0),
        noise: rng.gen_range(0.0..0.04),
        wander: rng.gen_range(0.0..0.2),
        offset: rng.gen_range(-500.0..1500.0f64).round(),
    };
    generate(&params, seed)
}
