//! Rotating the central disk of an image.

use super::Image;
use crate::error::{Error, Result};
use crate::steerbasis::{disk_mask, BasisSpec, RotationMethod, SteerableBasis};

/// Largest odd diameter that fits in the image.
pub fn disk_diameter(image: &Image) -> usize {
    let d = image.width.min(image.height);
    if d % 2 == 0 {
        d.saturating_sub(1)
    } else {
        d
    }
}

/// Rotate the centered disk of `image` by `angle` radians; pixels outside the
/// disk are copied. With [`RotationMethod::Steer`] the basis projection is
/// steered and, when `keep_residual` is set, the part of the disk outside the
/// basis span is rotated by bicubic interpolation and added back, so angle 0
/// reproduces the input exactly.
pub fn rotate_image(
    image: &Image,
    angle: f64,
    method: RotationMethod,
    keep_residual: bool,
) -> Result<Image> {
    let d = disk_diameter(image);
    if d < 3 {
        return Err(Error::invalid(format!(
            "{}x{} image is too small to rotate",
            image.width, image.height
        )));
    }
    let mask = disk_mask(d)?;
    let (top, left) = ((image.height - d) / 2, (image.width - d) / 2);
    let h = (d / 2) as i32;
    let at = |(dy, dx): (i32, i32)| {
        (
            (top as i32 + h + dy) as usize,
            (left as i32 + h + dx) as usize,
        )
    };
    let x: Vec<f64> = mask
        .iter()
        .map(|&o| {
            let (r, c) = at(o);
            image.get(r, c)
        })
        .collect();

    let basis = SteerableBasis::new(&BasisSpec::new(d))?;
    let mut y = basis.rotate_patch(&x, angle, method)?;
    if method == RotationMethod::Steer && keep_residual {
        let proj = basis.synthesize(&basis.analyze(&x)?)?;
        let residual: Vec<f64> = x.iter().zip(&proj).map(|(a, b)| a - b).collect();
        let moved = basis.rotate_patch(&residual, angle, RotationMethod::Bicubic)?;
        y.iter_mut().zip(&moved).for_each(|(a, b)| *a += b);
    }
    let mut out = image.clone();
    for (&o, v) in mask.iter().zip(y) {
        let (r, c) = at(o);
        out.set(r, c, v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> Image {
        Image::new(
            w,
            h,
            (0..w * h).map(|i| ((i * 7) % 23) as f64 / 22.0).collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_angle_round_trips() {
        let img = ramp(14, 12);
        for method in [
            RotationMethod::Nearest,
            RotationMethod::Bicubic,
            RotationMethod::Steer,
        ] {
            let out = rotate_image(&img, 0.0, method, true).unwrap();
            for (a, b) in out.values.iter().zip(&img.values) {
                assert!((a - b).abs() < 1e-9, "{method:?}");
            }
        }
        // projection only loses what the basis cannot represent
        let proj = rotate_image(&img, 0.0, RotationMethod::Steer, false).unwrap();
        assert_ne!(proj, img);
    }

    #[test]
    fn outside_disk_is_untouched() {
        let img = ramp(10, 10);
        let out = rotate_image(&img, 1.0, RotationMethod::Bicubic, true).unwrap();
        assert_eq!(disk_diameter(&img), 9);
        assert_eq!(out.get(0, 0), img.get(0, 0));
        assert_eq!(out.get(9, 9), img.get(9, 9));
        assert_eq!(out.get(0, 9), img.get(0, 9));
    }

    #[test]
    fn quarter_turn_nearest_moves_pixels() {
        let mut img = Image::filled(7, 7, 0.0);
        img.set(3, 5, 1.0);
        let out = rotate_image(
            &img,
            std::f64::consts::FRAC_PI_2,
            RotationMethod::Nearest,
            true,
        )
        .unwrap();
        let hot: Vec<(usize, usize)> = (0..7)
            .flat_map(|r| (0..7).map(move |c| (r, c)))
            .filter(|&(r, c)| out.get(r, c) > 0.5)
            .collect();
        assert_eq!(hot.len(), 1);
        assert_ne!(hot[0], (3, 5));
        assert!(rotate_image(
            &Image::filled(2, 5, 0.0),
            0.1,
            RotationMethod::Nearest,
            true
        )
        .is_err());
    }
}
