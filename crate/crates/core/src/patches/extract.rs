//! Circular patch extraction.

use rayon::prelude::*;

use super::Image;
use crate::error::{Error, Result};
use crate::steerbasis::{disk_mask, Offset};

/// Where a patch came from: image id and the top-left corner of its window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Origin {
    pub image: usize,
    pub row: usize,
    pub col: usize,
}

/// Disk patches vectorized through the canonical mask.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchSet {
    pub n: usize,
    pub mask: Vec<Offset>,
    pub patches: Vec<Vec<f64>>,
    /// Empty for synthetic sets.
    pub origins: Vec<Origin>,
    pub normalized: bool,
    /// Flat patches removed by normalization.
    pub dropped: usize,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Append another set with the same `N` and normalization.
    pub fn extend(&mut self, other: PatchSet) -> Result<()> {
        if other.n != self.n || other.normalized != self.normalized {
            return Err(Error::invalid(
                "cannot merge patch sets with different N or normalization",
            ));
        }
        self.patches.extend(other.patches);
        self.origins.extend(other.origins);
        self.dropped += other.dropped;
        Ok(())
    }
}

/// Threshold below which a patch counts as flat and is dropped on normalization.
pub const FLAT_NORM: f64 = 1e-12;

fn read_patch(image: &Image, mask: &[Offset], n: usize, row: usize, col: usize) -> Vec<f64> {
    let h = (n / 2) as i32;
    mask.iter()
        .map(|&(dy, dx)| {
            image.get(
                (row as i32 + h + dy) as usize,
                (col as i32 + h + dx) as usize,
            )
        })
        .collect()
}

/// One patch per top-left position on the stride grid that fits in the image.
pub fn extract_patches(
    image: &Image,
    n: usize,
    stride: usize,
    normalize: bool,
) -> Result<PatchSet> {
    extract_patches_tagged(image, 0, n, stride, normalize)
}

/// As [`extract_patches`], recording `image_id` in every origin.
pub fn extract_patches_tagged(
    image: &Image,
    image_id: usize,
    n: usize,
    stride: usize,
    normalize: bool,
) -> Result<PatchSet> {
    let mask = disk_mask(n)?;
    if stride == 0 {
        return Err(Error::invalid("stride must be >= 1"));
    }
    if image.width < n || image.height < n {
        return Err(Error::invalid(format!(
            "{}x{} image is smaller than the {n}x{n} patch window",
            image.width, image.height
        )));
    }
    let rows: Vec<usize> = (0..=image.height - n).step_by(stride).collect();
    let cols: Vec<usize> = (0..=image.width - n).step_by(stride).collect();
    let per_row: Vec<Vec<(Origin, Option<Vec<f64>>)>> = rows
        .par_iter()
        .map(|&row| {
            cols.iter()
                .map(|&col| {
                    let mut p = read_patch(image, &mask, n, row, col);
                    let origin = Origin {
                        image: image_id,
                        row,
                        col,
                    };
                    if normalize {
                        let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if norm < FLAT_NORM {
                            return (origin, None);
                        }
                        p.iter_mut().for_each(|v| *v /= norm);
                    }
                    (origin, Some(p))
                })
                .collect()
        })
        .collect();
    let mut set = PatchSet {
        n,
        mask,
        patches: Vec::new(),
        origins: Vec::new(),
        normalized: normalize,
        dropped: 0,
    };
    for (origin, p) in per_row.into_iter().flatten() {
        match p {
            Some(p) => {
                set.patches.push(p);
                set.origins.push(origin);
            }
            None => set.dropped += 1,
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> Image {
        Image::new(
            w,
            h,
            (0..w * h)
                .map(|i| ((i * 37) % 101) as f64 / 100.0)
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn grid_count() {
        let img = ramp(20, 15);
        assert_eq!(extract_patches(&img, 5, 1, false).unwrap().len(), 16 * 11);
        assert_eq!(extract_patches(&img, 5, 3, false).unwrap().len(), 6 * 4);
        assert!(extract_patches(&img, 17, 1, false).is_err());
        assert!(extract_patches(&img, 5, 0, false).is_err());
    }

    #[test]
    fn constant_image_normalizes_identically() {
        let set = extract_patches(&Image::filled(9, 9, 0.3), 5, 1, true).unwrap();
        assert_eq!(set.len(), 25);
        for p in &set.patches {
            assert_eq!(p, &set.patches[0]);
            assert!((p.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn flat_patches_dropped_and_counted() {
        let mut img = Image::filled(8, 8, 0.0);
        img.set(7, 7, 1.0);
        let set = extract_patches(&img, 3, 1, true).unwrap();
        assert_eq!(set.len() + set.dropped, 36);
        assert_eq!(set.len(), 1);
        let raw = extract_patches(&img, 3, 1, false).unwrap();
        assert_eq!(raw.len(), 36);
    }

    #[test]
    fn origins_match_direct_indexing() {
        let img = ramp(17, 12);
        let n = 7;
        let set = extract_patches(&img, n, 2, false).unwrap();
        for (p, o) in set.patches.iter().zip(&set.origins) {
            // independent oracle: scan the window and keep pixels inside the disk
            let mut want = Vec::new();
            for r in 0..n {
                for c in 0..n {
                    let (dy, dx) = (r as f64 - 3.0, c as f64 - 3.0);
                    if dy * dy + dx * dx <= 12.25 {
                        want.push(img.values[(o.row + r) * img.width + o.col + c]);
                    }
                }
            }
            assert_eq!(p, &want);
        }
    }
}
