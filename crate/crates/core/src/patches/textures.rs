//! Procedural multi-class texture set with a rotated test split.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{load_pgm, save_pgm, Image};
use crate::error::{Error, Result};

/// Rotation angles (degrees) applied to test images.
pub const TEST_ANGLES_DEG: [f64; 8] = [5.0, 10.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImage {
    pub image: Image,
    pub label: usize,
    pub split: Split,
    pub angle_deg: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImageSet {
    pub classes: usize,
    pub items: Vec<LabeledImage>,
}

impl LabeledImageSet {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &LabeledImage> {
        self.items.iter().filter(move |i| i.split == split)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(bad) = self.items.iter().find(|i| i.label >= self.classes) {
            return Err(Error::invalid(format!(
                "label {} outside [0, {})",
                bad.label, self.classes
            )));
        }
        for c in 0..self.classes {
            if !self.split(Split::Train).any(|i| i.label == c) {
                return Err(Error::Training {
                    class: c,
                    msg: "no training images".into(),
                });
            }
        }
        Ok(())
    }

    /// Write `<root>/<split>/<class>/<index>.pgm` plus `manifest.csv`.
    pub fn save(&self, root: impl AsRef<Path>) -> Result<()> {
        let root = root.as_ref();
        let mut manifest = String::from("path,label,split,angle_deg\n");
        let mut counters = vec![[0usize; 2]; self.classes];
        for item in &self.items {
            let k = &mut counters[item.label][item.split as usize];
            let rel = format!("{}/{}/{}.pgm", item.split.as_str(), item.label, k);
            *k += 1;
            let path = root.join(&rel);
            let dir = path.parent().expect("has parent");
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            save_pgm(&item.image, &path)?;
            let _ = writeln!(
                manifest,
                "{rel},{},{},{}",
                item.label,
                item.split.as_str(),
                item.angle_deg
            );
        }
        let mpath = root.join("manifest.csv");
        fs::write(&mpath, manifest).map_err(|e| Error::io(&mpath, e))
    }

    /// Read a directory written by [`LabeledImageSet::save`] (or laid out the
    /// same way by hand). The class count is one more than the largest label.
    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        let mpath = root.join("manifest.csv");
        let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
        let mut offset = 0;
        let mut items = Vec::new();
        for (i, line) in text.split_inclusive('\n').enumerate() {
            let start = offset;
            offset += line.len();
            let line = line.trim();
            if i == 0 {
                if line != "path,label,split,angle_deg" {
                    return Err(Error::format(
                        &mpath,
                        0,
                        "expected header `path,label,split,angle_deg`",
                    ));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = |m: &str| Error::format(&mpath, start, m.to_string());
            if f.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            let label = f[1].parse().map_err(|_| bad("bad label"))?;
            let split = Split::parse(f[2]).ok_or_else(|| bad("split must be train or test"))?;
            let angle_deg = f[3].parse().map_err(|_| bad("bad angle"))?;
            let image = load_pgm(root.join(PathBuf::from(f[0])))?;
            items.push(LabeledImage {
                image,
                label,
                split,
                angle_deg,
            });
        }
        let classes = items.iter().map(|i| i.label + 1).max().unwrap_or(0);
        let set = LabeledImageSet { classes, items };
        set.validate()?;
        Ok(set)
    }
}

/// Separable box-blurred white noise, anisotropic lengths along the two axes.
fn blurred_noise(w: usize, h: usize, lx: usize, ly: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let noise: Vec<f64> = (0..w * h).map(|_| StandardNormal.sample(rng)).collect();
    let mut tmp = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let mut s = 0.0;
            for k in 0..lx {
                s += noise[r * w + (c + k) % w];
            }
            tmp[r * w + c] = s;
        }
    }
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let mut s = 0.0;
            for k in 0..ly {
                s += tmp[((r + k) % h) * w + c];
            }
            out[r * w + c] = s;
        }
    }
    out
}

fn rescale(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    v.iter_mut()
        .for_each(|x| *x = (0.5 + 0.18 * (*x - mean) / sd).clamp(0.0, 1.0));
}

/// One upright canvas of class `class`. Families cycle through gratings,
/// elongated noise, lattices and blob noise; parameters shift with the class
/// index so every class is distinct.
fn texture_canvas(class: usize, size: usize, rng: &mut ChaCha8Rng) -> Image {
    let family = class % 4;
    let variant = (class / 4) as f64;
    let phase = rng.random_range(0.0..TAU);
    let phase2 = rng.random_range(0.0..TAU);
    let mut v = vec![0.0; size * size];
    match family {
        0 => {
            let period = 6.0 + 2.0 * variant;
            let bumps = blurred_noise(size, size, 9, 9, rng);
            for r in 0..size {
                for c in 0..size {
                    v[r * size + c] =
                        (TAU * c as f64 / period + phase).sin() + 0.15 * bumps[r * size + c] / 9.0;
                }
            }
        }
        1 => {
            let n = blurred_noise(size, size, 9 + 2 * variant as usize, 2, rng);
            v.copy_from_slice(&n);
        }
        2 => {
            let period = 10.0 + 3.0 * variant;
            for r in 0..size {
                for c in 0..size {
                    let a = (TAU * c as f64 / period + phase).sin();
                    let b = (TAU * r as f64 / period + phase2).sin();
                    v[r * size + c] = a * b;
                }
            }
        }
        _ => {
            let n = blurred_noise(size, size, 4 + variant as usize, 4 + variant as usize, rng);
            v.copy_from_slice(&n);
        }
    }
    // mild pixel noise keeps patches from being perfectly periodic
    for x in v.iter_mut() {
        let e: f64 = StandardNormal.sample(rng);
        *x += 0.05 * e;
    }
    rescale(&mut v);
    Image {
        width: size,
        height: size,
        values: v,
    }
}

/// Render one sample: a canvas large enough to survive rotation, rotated by
/// `angle_deg`, center-cropped to `size`.
fn render(class: usize, size: usize, angle_deg: f64, rng: &mut ChaCha8Rng) -> Image {
    let big = (size as f64 * std::f64::consts::SQRT_2).ceil() as usize + 4;
    let canvas = texture_canvas(class, big, rng);
    let rotated = if angle_deg == 0.0 {
        canvas
    } else {
        let mut r = canvas.rotate_bicubic(angle_deg * PI / 180.0);
        r.clamp_unit();
        r
    };
    let off = (big - size) / 2;
    rotated
        .crop(off, off, size, size)
        .expect("canvas larger than crop")
}

/// `count_per_class` upright training and `count_per_class` rotated test
/// images for each of `classes` classes.
pub fn synth_textures(
    classes: usize,
    count_per_class: usize,
    size: usize,
    seed: u64,
) -> Result<LabeledImageSet> {
    if classes < 2 {
        return Err(Error::invalid("texture set needs at least 2 classes"));
    }
    if count_per_class == 0 || size == 0 {
        return Err(Error::invalid("count_per_class and size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::with_capacity(2 * classes * count_per_class);
    for split in [Split::Train, Split::Test] {
        for label in 0..classes {
            for _ in 0..count_per_class {
                let angle_deg = match split {
                    Split::Train => 0.0,
                    Split::Test => TEST_ANGLES_DEG[rng.random_range(0..TEST_ANGLES_DEG.len())],
                };
                items.push(LabeledImage {
                    image: render(label, size, angle_deg, &mut rng),
                    label,
                    split,
                    angle_deg,
                });
            }
        }
    }
    Ok(LabeledImageSet { classes, items })
}

/// Spiral grating whose local orientation sweeps through every angle across
/// the image, with mild pixel noise. Used as the bundled oriented texture.
pub fn oriented_image(size: usize, seed: u64) -> Result<Image> {
    if size == 0 {
        return Err(Error::invalid("image size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = (size as f64 - 1.0) / 2.0 + rng.random_range(-0.5..0.5);
    let mut v = vec![0.0; size * size];
    for r in 0..size {
        for c in 0..size {
            let (y, x) = (r as f64 - center, c as f64 - center);
            let radius = (x * x + y * y).sqrt();
            let e: f64 = StandardNormal.sample(&mut rng);
            v[r * size + c] = (TAU * radius / 7.0 + 3.0 * y.atan2(x)).sin() + 0.05 * e;
        }
    }
    rescale(&mut v);
    Image::new(size, size, v)
}
