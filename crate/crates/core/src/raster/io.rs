//! PNG and PFM file I/O.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{GrayImage, RgbImage};

use super::grid::{BinaryMask, Grid, ScalarField};
use super::image::{ColorSpace, RasterImage};
use crate::error::{Error, Result};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn img_err(path: &Path, source: image::ImageError) -> Error {
    Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads an 8-bit PNG as an sRGB raster with components `v / 255`.
pub fn load_rgb(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| img_err(path, e))?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok(RasterImage::from_fn(
        w as usize,
        h as usize,
        ColorSpace::Srgb,
        |x, y| {
            let p = img.get_pixel(x as u32, y as u32).0;
            [
                p[0] as f64 / 255.0,
                p[1] as f64 / 255.0,
                p[2] as f64 / 255.0,
            ]
        },
    ))
}

/// Loads a PNG as a mask: gray value `>= 128` is foreground.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| img_err(path, e))?.to_luma8();
    let (w, h) = img.dimensions();
    Ok(Grid::from_fn(w as usize, h as usize, |x, y| {
        img.get_pixel(x as u32, y as u32).0[0] >= 128
    }))
}

#[inline]
fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn to_rgb8(image: &RasterImage) -> RgbImage {
    let srgb = image.to_srgb();
    let (w, h) = srgb.dims();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let p = srgb.get(x as usize, y as usize);
        image::Rgb([quantize(p[0]), quantize(p[1]), quantize(p[2])])
    })
}

pub fn save_rgb(image: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    to_rgb8(image).save(path).map_err(|e| img_err(path, e))
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = mask.dims();
    GrayImage::from_fn(w as u32, h as u32, |x, y| {
        image::Luma([if *mask.get(x as usize, y as usize) { 255 } else { 0 }])
    })
    .save(path)
    .map_err(|e| img_err(path, e))
}

/// Saves a scalar field as an 8-bit gray PNG after min-max normalization.
pub fn save_field_png(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let n = field.normalized();
    let (w, h) = n.dims();
    GrayImage::from_fn(w as u32, h as u32, |x, y| {
        image::Luma([quantize(*n.get(x as usize, y as usize))])
    })
    .save(path)
    .map_err(|e| img_err(path, e))
}

/// Writes a single-channel little-endian PFM (`Pf`, scale `-1.0`, bottom row first).
pub fn write_pfm(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let (w, h) = field.dims();
    write!(out, "Pf\n{w} {h}\n-1.0\n").map_err(|e| io_err(path, e))?;
    for y in (0..h).rev() {
        for &v in field.row(y) {
            out.write_all(&(v as f32).to_le_bytes())
                .map_err(|e| io_err(path, e))?;
        }
    }
    out.flush().map_err(|e| io_err(path, e))
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let bad = |message: &str| Error::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = BufReader::new(file);
    let mut header = Vec::new();
    while header.len() < 3 {
        let mut line = String::new();
        if reader.read_line(&mut line).map_err(|e| io_err(path, e))? == 0 {
            return Err(bad("truncated header"));
        }
        let line = line.trim();
        if !line.is_empty() {
            header.push(line.to_string());
        }
    }
    if header[0] != "Pf" {
        return Err(bad("only single-channel Pf files are supported"));
    }
    let dims: Vec<usize> = header[1]
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("bad dimensions")))
        .collect::<Result<_>>()?;
    if dims.len() != 2 || dims[0] == 0 || dims[1] == 0 {
        return Err(bad("bad dimensions"));
    }
    let scale: f64 = header[2].parse().map_err(|_| bad("bad scale"))?;
    let little = scale < 0.0;
    let (w, h) = (dims[0], dims[1]);
    let mut bytes = vec![0u8; w * h * 4];
    reader
        .read_exact(&mut bytes)
        .map_err(|e| io_err(path, e))?;
    let mut data = vec![0.0; w * h];
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (x, row_from_bottom) = (i % w, i / w);
        data[(h - 1 - row_from_bottom) * w + x] = v as f64;
    }
    Ok(Grid::from_vec(w, h, data))
}
