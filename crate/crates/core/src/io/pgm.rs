//! Binary (P5) portable graymap files.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major samples, each `<= maxval`.
    pub pixels: Vec<u16>,
}

impl PgmImage {
    pub fn new(width: usize, height: usize, maxval: u16, pixels: Vec<u16>) -> Result<Self> {
        if maxval == 0 {
            return Err(Error::Pgm("maxval must lie in 1..=65535".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::Pgm(format!(
                "{width}x{height} image needs {} samples, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(&bad) = pixels.iter().find(|&&p| p > maxval) {
            return Err(Error::Pgm(format!("sample {bad} exceeds maxval {maxval}")));
        }
        Ok(Self {
            width,
            height,
            maxval,
            pixels,
        })
    }

    /// `[1,H,W]` tensor with samples rescaled to `[0,255]`.
    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        let k = 255.0 / self.maxval as f64;
        Tensor::new(
            vec![1, self.height, self.width],
            self.pixels
                .iter()
                .map(|&p| T::from_f64_lossy(p as f64 * k))
                .collect(),
        )
        .expect("pixel count checked at construction")
    }

    /// 8-bit image from a `[1,H,W]` or `[H,W]` tensor on the `[0,255]`
    /// scale, clamped and rounded.
    pub fn from_tensor<T: Real>(t: &Tensor<T>) -> Result<Self> {
        let (h, w) = match *t.shape() {
            [1, h, w] | [h, w] => (h, w),
            _ => {
                return Err(Error::shape(format!(
                    "expected a single-channel image, got shape {:?}",
                    t.shape()
                )))
            }
        };
        let pixels = t
            .data()
            .iter()
            .map(|v| v.to_f64_lossy().clamp(0.0, 255.0).round() as u16)
            .collect();
        Self::new(w, h, 255, pixels)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        if self.maxval < 256 {
            out.extend(self.pixels.iter().map(|&p| p as u8));
        } else {
            for p in &self.pixels {
                out.extend_from_slice(&p.to_be_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        match bytes.get(..2) {
            Some(b"P5") => {}
            Some(b"P2") => {
                return Err(Error::Pgm(
                    "plain (ASCII, P2) graymaps are not supported; convert to binary P5".into(),
                ))
            }
            _ => return Err(Error::Pgm("bad magic: expected P5".into())),
        }
        let mut pos = 2usize;
        let mut fields = [0u64; 3];
        for (k, name) in ["width", "height", "maxval"].iter().enumerate() {
            skip_space_and_comments(bytes, &mut pos);
            let start = pos;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Pgm(format!("missing {name} in header")));
            }
            fields[k] = std::str::from_utf8(&bytes[start..pos])
                .expect("ascii digits")
                .parse()
                .map_err(|_| Error::Pgm(format!("{name} out of range")))?;
        }
        // Exactly one whitespace byte separates the header from the raster.
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(Error::Pgm("header must end with a whitespace byte".into()));
        }
        pos += 1;
        let [w, h, maxval] = fields;
        if !(1..=65535).contains(&maxval) {
            return Err(Error::Pgm(format!("maxval {maxval} outside 1..=65535")));
        }
        let (w, h) = (w as usize, h as usize);
        let per = if maxval < 256 { 1 } else { 2 };
        let need = w
            .checked_mul(h)
            .and_then(|n| n.checked_mul(per))
            .ok_or_else(|| Error::Pgm("image dimensions overflow".into()))?;
        let raster = &bytes[pos..];
        if raster.len() < need {
            return Err(Error::Pgm(format!(
                "truncated raster: expected {need} bytes, found {}",
                raster.len()
            )));
        }
        let pixels = if per == 1 {
            raster[..need].iter().map(|&b| b as u16).collect()
        } else {
            raster[..need]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        };
        Self::new(w, h, maxval as u16, pixels)
    }
}

fn skip_space_and_comments(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        if bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        } else if bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' && bytes[*pos] != b'\r' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<PgmImage> {
    PgmImage::from_bytes(&std::fs::read(path)?)
}

pub fn save_pgm(img: &PgmImage, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, img.to_bytes())?;
    Ok(())
}

/// Map `data` linearly from its `[min,max]` onto `[0,255]` for display.
/// Returns the image and the `(min, max)` used; a constant input maps to
/// mid-gray.
pub fn scaled_image(data: &[f64], h: usize, w: usize) -> Result<(PgmImage, f64, f64)> {
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pixels = data
        .iter()
        .map(|&v| {
            if hi > lo {
                ((v - lo) / (hi - lo) * 255.0).round() as u16
            } else {
                128
            }
        })
        .collect();
    Ok((PgmImage::new(w, h, 255, pixels)?, lo, hi))
}
