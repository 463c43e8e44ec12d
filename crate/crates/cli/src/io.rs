//! PGM and PNG reading and writing.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageReader, Luma, Rgb};
use thickline::{GrayImage, ImageDomain};

use crate::error::{CliError, Result};

/// Reads a PGM or PNG file as gray levels at its native depth. Color and
/// alpha inputs are reduced to luminance.
pub fn read_image(path: &Path) -> Result<GrayImage<f64>> {
    let decoded = ImageReader::open(path)
        .map_err(|e| CliError::input(path, e))?
        .with_guessed_format()
        .map_err(|e| CliError::input(path, e))?
        .decode()
        .map_err(|e| CliError::input(path, e))?;
    to_gray(&decoded).map_err(|e| CliError::input(path, e))
}

pub fn to_gray(img: &DynamicImage) -> std::result::Result<GrayImage<f64>, thickline::Error> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(g) => g.as_raw().iter().map(|&v| f64::from(v)).collect(),
        DynamicImage::ImageLuma16(g) => g.as_raw().iter().map(|&v| f64::from(v)).collect(),
        other => {
            let deep = other.color().bits_per_pixel() / u16::from(other.color().channel_count()) > 8;
            if deep {
                other.to_luma16().as_raw().iter().map(|&v| f64::from(v)).collect()
            } else {
                other.to_luma8().as_raw().iter().map(|&v| f64::from(v)).collect()
            }
        }
    };
    GrayImage::from_vec(ImageDomain::new(w, h)?, data)
}

/// Rounded samples, their bit depth, and how many values had to be clipped.
pub struct Quantized {
    pub samples: Vec<u16>,
    pub bits: u8,
    pub clipped: usize,
}

/// 8-bit when every value rounds into `[0, 255]`, 16-bit otherwise.
pub fn quantize(img: &GrayImage<f64>) -> Quantized {
    let rounded: Vec<f64> = img.as_slice().iter().map(|v| v.round()).collect();
    let fits8 = rounded.iter().all(|&v| (0.0..=255.0).contains(&v));
    let top = if fits8 { 255.0 } else { 65535.0 };
    let clipped = rounded.iter().filter(|&&v| !(0.0..=top).contains(&v)).count();
    Quantized {
        samples: rounded.iter().map(|&v| v.clamp(0.0, top) as u16).collect(),
        bits: if fits8 { 8 } else { 16 },
        clipped,
    }
}

/// Writes `img` as PGM or PNG depending on the extension (PGM if none).
pub fn write_gray(img: &GrayImage<f64>, path: &Path) -> Result<Quantized> {
    let q = quantize(img);
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynimg = if q.bits == 8 {
        let raw: Vec<u8> = q.samples.iter().map(|&v| v as u8).collect();
        DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw).expect("buffer size"))
    } else {
        DynamicImage::ImageLuma16(ImageBuffer::<Luma<u16>, _>::from_raw(w, h, q.samples.clone()).expect("buffer size"))
    };
    save(&dynimg, path)?;
    Ok(q)
}

pub fn write_rgb(img: &ImageBuffer<Rgb<u8>, Vec<u8>>, path: &Path) -> Result<()> {
    save(&DynamicImage::ImageRgb8(img.clone()), path)
}

fn save(img: &DynamicImage, path: &Path) -> Result<()> {
    let format = match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => image::ImageFormat::Png,
        Some("pgm") | Some("pnm") | None => image::ImageFormat::Pnm,
        Some(other) => return Err(CliError::output(path, format!("unsupported extension '.{other}' (pgm|png)"))),
    };
    if format == image::ImageFormat::Pnm && img.color().has_color() {
        return Err(CliError::output(path, "color output must be PNG"));
    }
    img.save_with_format(path, format).map_err(|e| CliError::output(path, e))
}
