//! Small signal-processing kit shared by the step counter and the QRS
//! detectors: Butterworth design, direct-form IIR filtering, causal moving
//! averages and prominence-based peak picking.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Transfer function coefficients, `a[0] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Iir {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Band {
    Lowpass(f64),
    Bandpass(f64, f64),
}

impl Iir {
    /// Digital Butterworth filter of the given prototype order, designed with
    /// the bilinear transform and frequency pre-warping. Cutoffs are in Hz.
    pub fn butterworth(order: usize, band: Band, fs: f64) -> Self {
        assert!(order >= 1, "filter order must be positive");
        let nyquist = fs / 2.0;
        let warp = |f: f64| 4.0 * (PI * (f / nyquist) / 2.0).tan();

        let proto: Vec<Complex64> = (0..order)
            .map(|k| {
                let m = -(order as f64) + 1.0 + 2.0 * k as f64;
                -Complex64::from_polar(1.0, PI * m / (2.0 * order as f64))
            })
            .collect();

        let (zeros, poles, gain) = match band {
            Band::Lowpass(fc) => {
                let wo = warp(fc);
                let poles: Vec<_> = proto.iter().map(|p| p * wo).collect();
                (Vec::new(), poles, wo.powi(order as i32))
            }
            Band::Bandpass(lo, hi) => {
                let (w1, w2) = (warp(lo), warp(hi));
                let bw = w2 - w1;
                let wo = (w1 * w2).sqrt();
                let mut poles = Vec::with_capacity(2 * order);
                for p in &proto {
                    let scaled = p * (bw / 2.0);
                    let root = (scaled * scaled - wo * wo).sqrt();
                    poles.push(scaled + root);
                    poles.push(scaled - root);
                }
                // order zeros at the origin; the rest sit at infinity
                (vec![Complex64::new(0.0, 0.0); order], poles, bw.powi(order as i32))
            }
        };

        let fs2 = Complex64::new(4.0, 0.0);
        let zd: Vec<Complex64> = zeros.iter().map(|z| (fs2 + z) / (fs2 - z)).collect();
        let pd: Vec<Complex64> = poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();
        let num: Complex64 = zeros.iter().map(|z| fs2 - z).product();
        let den: Complex64 = poles.iter().map(|p| fs2 - p).product();
        let k = gain * (num / den).re;

        let mut zd = zd;
        zd.extend(std::iter::repeat(Complex64::new(-1.0, 0.0)).take(poles.len() - zeros.len()));

        let b = poly(&zd).into_iter().map(|c| c * k).collect();
        let a = poly(&pd);
        Iir { b, a }
    }

    /// Causal filtering from zero initial state (transposed direct form II).
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        lfilter(&self.b, &self.a, x)
    }
}

fn poly(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    c.into_iter().map(|v| v.re).collect()
}

pub fn lfilter(b: &[f64], a: &[f64], x: &[f64]) -> Vec<f64> {
    let a0 = a[0];
    let n = b.len().max(a.len());
    let bn: Vec<f64> = (0..n).map(|i| b.get(i).copied().unwrap_or(0.0) / a0).collect();
    let an: Vec<f64> = (0..n).map(|i| a.get(i).copied().unwrap_or(0.0) / a0).collect();
    let mut state = vec![0.0; n];
    let mut y = Vec::with_capacity(x.len());
    for &xi in x {
        let yi = bn[0] * xi + state[0];
        for k in 1..n {
            let carry = if k + 1 < n { state[k] } else { 0.0 };
            state[k - 1] = bn[k] * xi - an[k] * yi + carry;
        }
        y.push(yi);
    }
    y
}

/// Causal moving average over `width` samples; the first `width - 1`
/// outputs average over the samples seen so far.
pub fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let width = width.max(1);
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    for i in 0..x.len() {
        acc += x[i];
        if i >= width {
            acc -= x[i - width];
        }
        out.push(acc / (i + 1).min(width) as f64);
    }
    out
}

/// Centred moving average over `width` samples; windows are clipped at the
/// signal edges and average over the samples they cover.
pub fn centered_mean(x: &[f64], width: usize) -> Vec<f64> {
    let width = width.max(1);
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    let half = width / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + width - half).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Samples strictly greater than the left neighbour and not smaller than the
/// right one. Flat tops report their first sample.
pub fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    if x.len() < 3 {
        return out;
    }
    let mut i = 1;
    while i < x.len() - 1 {
        if x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < x.len() && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < x.len() && x[j + 1] < x[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Topographic prominence of the peak at `p`.
pub fn prominence(x: &[f64], p: usize) -> f64 {
    let h = x[p];
    let mut left_min = h;
    for i in (0..p).rev() {
        if x[i] > h {
            break;
        }
        left_min = left_min.min(x[i]);
    }
    let mut right_min = h;
    for &v in &x[p + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Peak picking with a minimum index distance and a minimum prominence,
/// applied in that order. When two peaks are closer than `distance` the
/// taller one survives; plateaus report their middle sample.
pub fn find_peaks(x: &[f64], min_prominence: f64, distance: usize) -> Vec<usize> {
    let mut peaks = local_maxima_midpoint(x);
    if distance > 1 && peaks.len() > 1 {
        let mut order: Vec<usize> = (0..peaks.len()).collect();
        order.sort_by(|&i, &j| x[peaks[j]].total_cmp(&x[peaks[i]]).then(j.cmp(&i)));
        let mut keep = vec![true; peaks.len()];
        for &i in &order {
            if !keep[i] {
                continue;
            }
            let mut k = i;
            while k > 0 && peaks[i] - peaks[k - 1] < distance {
                k -= 1;
                keep[k] = false;
            }
            let mut k = i + 1;
            while k < peaks.len() && peaks[k] - peaks[i] < distance {
                keep[k] = false;
                k += 1;
            }
        }
        let mut idx = 0;
        peaks.retain(|_| {
            idx += 1;
            keep[idx - 1]
        });
    }
    peaks.retain(|&p| prominence(x, p) >= min_prominence);
    peaks
}

// plateau peaks report their middle sample (rounded down)
fn local_maxima_midpoint(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    if x.len() < 3 {
        return out;
    }
    let mut i = 1;
    let last = x.len() - 1;
    while i < last {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead < last && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                out.push((i + ahead - 1) / 2);
                i = ahead;
            }
        }
        i += 1;
    }
    out
}
