//! 2000x500 PNG line plots of ECG queries, with labelled sample-index ticks
//! so positions can be read off the image.

use crate::ecg::EcgQuery;
use image::{ImageFormat, Rgb, RgbImage};
use std::io::Cursor;
use thiserror::Error;

pub const WIDTH: u32 = 2000;
pub const HEIGHT: u32 = 500;

const LEFT: i64 = 90;
const RIGHT: i64 = 30;
const TOP: i64 = 20;
const BOTTOM: i64 = 60;

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const GRID: Rgb<u8> = Rgb([225, 225, 225]);
const AXIS: Rgb<u8> = Rgb([60, 60, 60]);
pub const TRACE: Rgb<u8> = Rgb([16, 32, 128]);

#[derive(Debug, Error)]
pub enum FigureError {
    #[error("query has no samples")]
    EmptyQuery,
    #[error("PNG encoding failed: {0}")]
    Encode(#[from] image::ImageError),
}

pub fn render_figure(query: &EcgQuery) -> Result<Vec<u8>, FigureError> {
    let img = plot(&query.values)?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Draws the plot without encoding it.
pub fn plot(values: &[i64]) -> Result<RgbImage, FigureError> {
    if values.is_empty() {
        return Err(FigureError::EmptyQuery);
    }
    let mut img = RgbImage::from_pixel(WIDTH, HEIGHT, WHITE);
    let (x0, x1) = (LEFT, WIDTH as i64 - RIGHT);
    let (y0, y1) = (TOP, HEIGHT as i64 - BOTTOM);

    let lo = *values.iter().min().unwrap() as f64;
    let hi = *values.iter().max().unwrap() as f64;
    let (lo, hi) = if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 1.0, hi + 1.0)
    };
    let last = (values.len().max(2) - 1) as f64;
    let px = |i: f64| x0 + ((i / last) * (x1 - x0) as f64).round() as i64;
    let py = |v: f64| y1 - (((v - lo) / (hi - lo)) * (y1 - y0) as f64).round() as i64;

    let xstep = nice_step(values.len() as f64, 24.0).max(1.0) as usize;
    let mut i = 0;
    while i < values.len() {
        let x = px(i as f64);
        vline(&mut img, x, y0, y1, GRID);
        vline(&mut img, x, y1, y1 + 6, AXIS);
        let label = i.to_string();
        text(&mut img, x - text_width(&label) / 2, y1 + 12, &label, AXIS);
        i += xstep;
    }

    let ystep = nice_step(hi - lo, 6.0);
    let mut v = (lo / ystep).ceil() * ystep;
    while v <= hi {
        let y = py(v);
        hline(&mut img, x0, x1, y, GRID);
        hline(&mut img, x0 - 6, x0, y, AXIS);
        let label = format!("{}", v.round() as i64);
        text(&mut img, x0 - 12 - text_width(&label), y - GLYPH_H * SCALE / 2, &label, AXIS);
        v += ystep;
    }

    vline(&mut img, x0, y0, y1, AXIS);
    hline(&mut img, x0, x1, y1, AXIS);

    let points: Vec<(i64, i64)> = values.iter().enumerate().map(|(i, &v)| (px(i as f64), py(v as f64))).collect();
    if points.len() == 1 {
        line(&mut img, (x0, points[0].1), (x1, points[0].1), TRACE);
    }
    for w in points.windows(2) {
        line(&mut img, w[0], w[1], TRACE);
    }
    Ok(img)
}

// 1, 2 or 5 times a power of ten, giving at most `max_ticks` intervals
fn nice_step(span: f64, max_ticks: f64) -> f64 {
    let raw = (span / max_ticks).max(f64::MIN_POSITIVE);
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag)
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn vline(img: &mut RgbImage, x: i64, ya: i64, yb: i64, c: Rgb<u8>) {
    for y in ya.min(yb)..=ya.max(yb) {
        put(img, x, y, c);
    }
}

fn hline(img: &mut RgbImage, xa: i64, xb: i64, y: i64, c: Rgb<u8>) {
    for x in xa.min(xb)..=xa.max(xb) {
        put(img, x, y, c);
    }
}

// Bresenham, two pixels thick
fn line(img: &mut RgbImage, a: (i64, i64), b: (i64, i64), c: Rgb<u8>) {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        put(img, x, y, c);
        put(img, x, y + 1, c);
        if (x, y) == b {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

const GLYPH_W: i64 = 5;
const GLYPH_H: i64 = 7;
const SCALE: i64 = 2;

fn glyph(ch: char) -> [u8; 7] {
    match ch {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        _ => [0; 7],
    }
}

fn text_width(s: &str) -> i64 {
    let n = s.chars().count() as i64;
    (n * (GLYPH_W + 1) - 1).max(0) * SCALE
}

fn text(img: &mut RgbImage, x: i64, y: i64, s: &str, c: Rgb<u8>) {
    for (k, ch) in s.chars().enumerate() {
        let gx = x + k as i64 * (GLYPH_W + 1) * SCALE;
        for (row, bits) in glyph(ch).iter().enumerate() {
            for col in 0..GLYPH_W {
                if bits & (1 << (GLYPH_W - 1 - col)) != 0 {
                    for dy in 0..SCALE {
                        for dx in 0..SCALE {
                            put(img, gx + col * SCALE + dx, y + row as i64 * SCALE + dy, c);
                        }
                    }
                }
            }
        }
    }
}
