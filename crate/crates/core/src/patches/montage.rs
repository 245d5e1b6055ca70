//! Tile disk patches into one image.

use super::Image;
use crate::error::{Error, Result};
use crate::steerbasis::disk_mask;

/// Background for separators and pixels outside the disk.
const BACKGROUND: f64 = 1.0;

/// Grid of min-max scaled tiles with 1-pixel separators. A constant tile
/// renders at 0.5.
pub fn montage(patches: &[Vec<f64>], n: usize, columns: usize) -> Result<Image> {
    if patches.is_empty() {
        return Err(Error::invalid("montage of an empty patch list"));
    }
    if columns == 0 {
        return Err(Error::invalid("montage needs at least one column"));
    }
    let mask = disk_mask(n)?;
    if let Some(p) = patches.iter().find(|p| p.len() != mask.len()) {
        return Err(Error::invalid(format!(
            "patch has {} samples, mask has {}",
            p.len(),
            mask.len()
        )));
    }
    let cols = columns.min(patches.len());
    let rows = patches.len().div_ceil(cols);
    let width = cols * (n + 1) + 1;
    let height = rows * (n + 1) + 1;
    let mut img = Image::filled(width, height, BACKGROUND);
    let h = (n / 2) as i32;
    for (i, p) in patches.iter().enumerate() {
        let (lo, hi) = p
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        let top = (i / cols) * (n + 1) + 1;
        let left = (i % cols) * (n + 1) + 1;
        for (&v, &(dy, dx)) in p.iter().zip(&mask) {
            let s = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            img.set(
                (top as i32 + h + dy) as usize,
                (left as i32 + h + dx) as usize,
                s,
            );
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let m = disk_mask(5).unwrap().len();
        let one = montage(&[vec![0.2; m]], 5, 4).unwrap();
        assert_eq!((one.width, one.height), (7, 7));
        assert_eq!(one.get(3, 3), 0.5);
        assert_eq!(one.get(0, 0), BACKGROUND);

        let seven = montage(&vec![vec![0.0; m]; 7], 5, 3).unwrap();
        assert_eq!((seven.width, seven.height), (3 * 6 + 1, 3 * 6 + 1));
        assert!(montage(&[], 5, 3).is_err());
    }

    #[test]
    fn tiles_are_min_max_scaled() {
        let m = disk_mask(3).unwrap().len();
        let p: Vec<f64> = (0..m).map(|i| i as f64 * 3.0 - 4.0).collect();
        let img = montage(&[p], 3, 1).unwrap();
        assert_eq!(img.get(1, 1), 0.0);
        assert_eq!(img.get(3, 3), 1.0);
    }
}
