//! Centerlines in blue, `±w/2` borders in red, over the stretched input.

use image::{ImageBuffer, Rgb};
use thickline::{width_from_sigma, GrayImage, ImageDomain, Line, Mixture};

pub const CENTER: Rgb<u8> = Rgb([0, 0, 255]);
pub const BORDER: Rgb<u8> = Rgb([255, 0, 0]);

/// Pixels whose center lies within half a pixel step of the line, measured
/// along the axis the line is closest to crossing. One pixel per row or
/// column, so the trace is 8-connected and every pixel has `|d| < 0.5`.
pub fn line_pixels(domain: ImageDomain, line: Line, offset: f64) -> Vec<(usize, usize)> {
    let (s, c) = line.theta.sin_cos();
    let tol = 0.5 * c.abs().max(s.abs());
    domain
        .pixels()
        .filter(|&(_, x, y)| {
            let d = x as f64 * c + y as f64 * s - line.rho - offset;
            d.abs() < tol
        })
        .map(|(_, x, y)| (x, y))
        .collect()
}

pub fn render(img: &GrayImage<f64>, mixture: &Mixture) -> ImageBuffer<Rgb<u8>, Vec<u8>> {
    let (lo, hi) = img.min_max();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = ImageBuffer::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        let v = ((img.get(x as usize + 1, y as usize + 1) - lo) / span * 255.0).round() as u8;
        Rgb([v, v, v])
    });
    let domain = img.domain();
    let mut put = |pixels: Vec<(usize, usize)>, color| {
        for (x, y) in pixels {
            out.put_pixel(x as u32 - 1, y as u32 - 1, color);
        }
    };
    for c in &mixture.components {
        if let Ok(w) = width_from_sigma(c.sigma) {
            put(line_pixels(domain, c.line, 0.5 * w), BORDER);
            put(line_pixels(domain, c.line, -0.5 * w), BORDER);
        }
    }
    for c in &mixture.components {
        put(line_pixels(domain, c.line, 0.0), CENTER);
    }
    out
}
