//! Grayscale images and binary PGM I/O.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::steerbasis::interp::cubic;

/// Row-major grayscale image with samples in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::invalid(format!(
                "{width}x{height} image needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("image values must be finite"));
        }
        Ok(Image {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Image {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.values[row * self.width + col] = v;
    }

    /// Sub-image with top-left corner `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> Result<Image> {
        if row + height > self.height || col + width > self.width {
            return Err(Error::invalid("crop window exceeds image"));
        }
        let mut values = Vec::with_capacity(width * height);
        for r in row..row + height {
            values.extend_from_slice(
                &self.values[r * self.width + col..r * self.width + col + width],
            );
        }
        Ok(Image {
            width,
            height,
            values,
        })
    }

    /// Bicubic rotation about the image center by `angle` radians, with the
    /// same orientation convention as patch rotation. Samples falling outside
    /// the source are clamped to the nearest edge pixel.
    pub fn rotate_bicubic(&self, angle: f64) -> Image {
        let (sin, cos) = angle.sin_cos();
        let cy = (self.height as f64 - 1.0) / 2.0;
        let cx = (self.width as f64 - 1.0) / 2.0;
        let clamp = |v: i64, hi: usize| v.clamp(0, hi as i64 - 1) as usize;
        let mut out = Image::filled(self.width, self.height, 0.0);
        for r in 0..self.height {
            for c in 0..self.width {
                let (x, y) = (c as f64 - cx, r as f64 - cy);
                let sx = cos * x + sin * y + cx;
                let sy = -sin * x + cos * y + cy;
                let (x0, y0) = (sx.floor(), sy.floor());
                let mut acc = 0.0;
                for oy in -1..=2 {
                    let wy = cubic(sy - (y0 + f64::from(oy)));
                    let rr = clamp(y0 as i64 + i64::from(oy), self.height);
                    for ox in -1..=2 {
                        let wx = cubic(sx - (x0 + f64::from(ox)));
                        acc += wx * wy * self.get(rr, clamp(x0 as i64 + i64::from(ox), self.width));
                    }
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    /// Clamp every sample into `[0, 1]`.
    pub fn clamp_unit(&mut self) {
        self.values.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }
}

fn skip_space_and_comments(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn header_int(bytes: &[u8], pos: usize, what: &str, path: &Path) -> Result<(usize, usize)> {
    let start = skip_space_and_comments(bytes, pos);
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(Error::format(path, start, format!("expected {what}")));
    }
    let v = std::str::from_utf8(&bytes[start..end])
        .expect("ascii digits")
        .parse()
        .map_err(|_| Error::format(path, start, format!("{what} out of range")))?;
    Ok((v, end))
}

/// Decode a binary PGM (`P5`). `path` is only used in error messages.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<Image> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::format(path, 0, "missing P5 magic"));
    }
    let (width, pos) = header_int(bytes, 2, "width", path)?;
    let (height, pos) = header_int(bytes, pos, "height", path)?;
    let (maxval, pos) = header_int(bytes, pos, "maxval", path)?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(
            path,
            pos,
            format!("maxval {maxval} not in 1..=65535"),
        ));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::format(
            path,
            pos,
            "expected single whitespace after maxval",
        ));
    }
    let data = pos + 1;
    let bps = if maxval < 256 { 1 } else { 2 };
    let need = width * height * bps;
    if bytes.len() - data < need {
        return Err(Error::format(
            path,
            bytes.len(),
            format!(
                "truncated pixel data: need {need} bytes, have {}",
                bytes.len() - data
            ),
        ));
    }
    let scale = 1.0 / maxval as f64;
    let mut values = Vec::with_capacity(width * height);
    for i in 0..width * height {
        let raw = if bps == 1 {
            usize::from(bytes[data + i])
        } else {
            usize::from(u16::from_be_bytes([
                bytes[data + 2 * i],
                bytes[data + 2 * i + 1],
            ]))
        };
        if raw > maxval {
            return Err(Error::format(
                path,
                data + i * bps,
                format!("sample {raw} exceeds maxval"),
            ));
        }
        values.push(raw as f64 * scale);
    }
    Ok(Image {
        width,
        height,
        values,
    })
}

/// Encode at maxval 255, rounding half up; values are clamped to `[0, 1]`.
pub fn encode_pgm(image: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(
        image
            .values
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8),
    );
    out
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, path)
}

pub fn save_pgm(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(image)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_within_quantization() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = Image::new(13, 7, (0..91).map(|_| rng.random::<f64>()).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        save_pgm(&img, &p).unwrap();
        let back = load_pgm(&p).unwrap();
        assert_eq!((back.width, back.height), (13, 7));
        for (a, b) in img.values.iter().zip(&back.values) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-15);
        }
        let zero = Image::filled(4, 3, 0.0);
        save_pgm(&zero, &p).unwrap();
        assert_eq!(load_pgm(&p).unwrap(), zero);
    }

    #[test]
    fn decodes_hand_written_bytes() {
        let mut bytes = b"P5\n# comment\n3 2\n255\n".to_vec();
        bytes.extend([0u8, 51, 102, 153, 204, 255]);
        let img = decode_pgm(&bytes, Path::new("t")).unwrap();
        assert_eq!((img.width, img.height), (3, 2));
        assert_eq!(img.values, vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);

        let wide = b"P5 1 1 1000\n\x01\xf4".to_vec();
        assert_eq!(decode_pgm(&wide, Path::new("t")).unwrap().values, vec![0.5]);
    }

    #[test]
    fn round_half_up() {
        let img = Image::new(2, 1, vec![0.5 / 255.0, 1.5 / 255.0]).unwrap();
        let enc = encode_pgm(&img);
        assert_eq!(&enc[enc.len() - 2..], &[1, 2]);
    }

    #[test]
    fn errors_report_offsets() {
        let p = Path::new("t");
        assert!(matches!(
            decode_pgm(b"P2 1 1 255\n\x00", p),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(matches!(
            decode_pgm(b"P5 x", p),
            Err(Error::Format { offset: 3, .. })
        ));
        assert!(matches!(
            decode_pgm(b"P5 2 2 255\n\x00\x00", p),
            Err(Error::Format { offset: 13, .. })
        ));
        assert!(matches!(
            decode_pgm(b"P5 1 1 70000\n\x00\x00", p),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn zero_rotation_is_identity() {
        let img = Image::new(5, 4, (0..20).map(|v| v as f64 / 20.0).collect()).unwrap();
        let rot = img.rotate_bicubic(0.0);
        for (a, b) in img.values.iter().zip(&rot.values) {
            assert!((a - b).abs() < 1e-12);
        }
        // a quarter-turn on a square image is a pixel permutation
        let sq = Image::new(5, 5, (0..25).map(|v| v as f64).collect()).unwrap();
        let q = sq.rotate_bicubic(std::f64::consts::FRAC_PI_2);
        let mut a: Vec<i64> = sq.values.iter().map(|v| v.round() as i64).collect();
        let mut b: Vec<i64> = q.values.iter().map(|v| v.round() as i64).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }
}
