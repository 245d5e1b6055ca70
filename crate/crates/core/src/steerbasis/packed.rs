//! Real packing of conjugate-symmetric coefficient vectors.
//!
//! A conjugate-symmetric vector of length `B` is determined by its `t = 0`
//! entries (real) and its `t > 0` entries (complex). Packing stores the former
//! as-is and each of the latter as `(√2·re, √2·im)`, so the packed Euclidean
//! inner product equals `Re⟨a, b⟩` of the full vectors and packed length is
//! exactly `B`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use super::SteerableCoeffs;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Unit {
    /// Column index of a `t = 0` entry.
    Zero(usize),
    /// Column indices of `+t` and `-t`, and `t`.
    Pair { pos: usize, neg: usize, t: i32 },
}

/// Maps conjugate-symmetric [`SteerableCoeffs`] to and from real vectors.
#[derive(Clone, Debug)]
pub struct PackedLayout {
    units: Vec<Unit>,
    len: usize,
    /// Frequency of every packed slot (both slots of a pair carry `t`).
    slot_freq: Vec<i32>,
}

impl PackedLayout {
    pub fn new(labels: &[(usize, i32)]) -> Self {
        let mut units = Vec::new();
        for (j, &(_, t)) in labels.iter().enumerate() {
            match t.cmp(&0) {
                std::cmp::Ordering::Equal => units.push(Unit::Zero(j)),
                std::cmp::Ordering::Greater => units.push(Unit::Pair {
                    pos: j,
                    neg: j - 2 * t as usize,
                    t,
                }),
                std::cmp::Ordering::Less => {}
            }
        }
        let mut slot_freq = Vec::with_capacity(labels.len());
        for u in &units {
            match *u {
                Unit::Zero(_) => slot_freq.push(0),
                Unit::Pair { t, .. } => {
                    slot_freq.push(t);
                    slot_freq.push(t);
                }
            }
        }
        PackedLayout {
            units,
            len: labels.len(),
            slot_freq,
        }
    }

    /// Packed length (equals the number of basis columns).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn max_frequency(&self) -> i32 {
        self.slot_freq.iter().copied().max().unwrap_or(0)
    }

    /// Frequency of every packed slot.
    pub fn slot_frequencies(&self) -> &[i32] {
        &self.slot_freq
    }

    /// Pack using only the `t >= 0` half; the `t < 0` half is assumed to be
    /// its conjugate.
    pub fn pack(&self, coeffs: &SteerableCoeffs) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len);
        for u in &self.units {
            match *u {
                Unit::Zero(j) => out.push(coeffs.0[j].re),
                Unit::Pair { pos, .. } => {
                    out.push(SQRT_2 * coeffs.0[pos].re);
                    out.push(SQRT_2 * coeffs.0[pos].im);
                }
            }
        }
        out
    }

    pub fn unpack(&self, packed: &[f64]) -> SteerableCoeffs {
        let mut out = vec![Complex64::new(0.0, 0.0); self.len];
        let mut k = 0;
        for u in &self.units {
            match *u {
                Unit::Zero(j) => {
                    out[j] = Complex64::new(packed[k], 0.0);
                    k += 1;
                }
                Unit::Pair { pos, neg, .. } => {
                    let z = Complex64::new(packed[k], packed[k + 1]) / SQRT_2;
                    out[pos] = z;
                    out[neg] = z.conj();
                    k += 2;
                }
            }
        }
        SteerableCoeffs(out)
    }

    /// Project onto the conjugate-symmetric subspace: `(c + conj_flip(c)) / 2`.
    pub fn symmetrize(&self, coeffs: &SteerableCoeffs) -> SteerableCoeffs {
        let mut out = coeffs.clone();
        for u in &self.units {
            match *u {
                Unit::Zero(j) => out.0[j] = Complex64::new(coeffs.0[j].re, 0.0),
                Unit::Pair { pos, neg, .. } => {
                    let z = (coeffs.0[pos] + coeffs.0[neg].conj()) * 0.5;
                    out.0[pos] = z;
                    out.0[neg] = z.conj();
                }
            }
        }
        out
    }

    /// Precomputed steering for every discrete rotation `0..R`.
    pub fn steering(&self, rotations: usize) -> PackedSteering {
        PackedSteering::new(self, rotations)
    }
}

/// Steering in packed coordinates: each `t > 0` pair is rotated as a 2-vector.
#[derive(Clone, Debug)]
pub struct PackedSteering {
    rotations: usize,
    /// For rotation `r`: `(cos, sin)` per pair, in unit order.
    trig: Vec<Vec<(f64, f64)>>,
    /// For every unit: `None` for `t = 0`, `Some(pair index)` otherwise.
    pairs: Vec<Option<usize>>,
    freqs: Vec<i32>,
}

impl PackedSteering {
    fn new(layout: &PackedLayout, rotations: usize) -> Self {
        let mut pairs = Vec::with_capacity(layout.units.len());
        let mut freqs = Vec::new();
        for u in &layout.units {
            match *u {
                Unit::Zero(_) => pairs.push(None),
                Unit::Pair { t, .. } => {
                    pairs.push(Some(freqs.len()));
                    freqs.push(t);
                }
            }
        }
        let trig = (0..rotations)
            .map(|r| {
                let base = 2.0 * PI * r as f64 / rotations as f64;
                freqs
                    .iter()
                    .map(|&t| {
                        let a = f64::from(t) * base;
                        (a.cos(), a.sin())
                    })
                    .collect()
            })
            .collect();
        PackedSteering {
            rotations,
            trig,
            pairs,
            freqs,
        }
    }

    pub fn rotations(&self) -> usize {
        self.rotations
    }

    /// Frequencies of the `t > 0` pairs, in order.
    pub fn pair_frequencies(&self) -> &[i32] {
        &self.freqs
    }

    /// `out = steer(x, r)`; `inverse` applies the conjugate phases.
    pub fn apply_into(&self, x: &[f64], r: usize, inverse: bool, out: &mut [f64]) {
        let trig = &self.trig[r];
        let mut k = 0;
        for p in &self.pairs {
            match p {
                None => {
                    out[k] = x[k];
                    k += 1;
                }
                Some(i) => {
                    let (c, s) = trig[*i];
                    let s = if inverse { -s } else { s };
                    let (a, b) = (x[k], x[k + 1]);
                    // (a + ib)·e^{-iθ}
                    out[k] = a * c + b * s;
                    out[k + 1] = b * c - a * s;
                    k += 2;
                }
            }
        }
    }

    pub fn apply(&self, x: &[f64], r: usize) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, r, false, &mut out);
        out
    }

    pub fn apply_inverse(&self, x: &[f64], r: usize) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, r, true, &mut out);
        out
    }
}

/// Diagonal steering by one continuous angle in packed coordinates: a copy
/// for each `t = 0` slot and a 2×2 rotation for each `t > 0` pair.
#[derive(Clone, Debug)]
pub struct PackedRotation {
    len: usize,
    zeros: Vec<usize>,
    /// `(slot, cos tθ, sin tθ)` for the first slot of each pair.
    pairs: Vec<(usize, f64, f64)>,
}

impl PackedRotation {
    pub fn new(layout: &PackedLayout, angle: f64) -> Self {
        let mut zeros = Vec::new();
        let mut pairs = Vec::new();
        let mut k = 0;
        for u in &layout.units {
            match *u {
                Unit::Zero(_) => {
                    zeros.push(k);
                    k += 1;
                }
                Unit::Pair { t, .. } => {
                    let (s, c) = (f64::from(t) * angle).sin_cos();
                    pairs.push((k, c, s));
                    k += 2;
                }
            }
        }
        PackedRotation {
            len: layout.len,
            zeros,
            pairs,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for &k in &self.zeros {
            out[k] = x[k];
        }
        for &(k, c, s) in &self.pairs {
            let (a, b) = (x[k], x[k + 1]);
            out[k] = a * c + b * s;
            out[k + 1] = b * c - a * s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        self.apply_into(x, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steerbasis::{steer, BasisSpec, SteerableBasis};

    fn setup() -> (SteerableBasis, SteerableCoeffs) {
        let b = SteerableBasis::new(&BasisSpec::new(9)).unwrap();
        let x: Vec<f64> = (0..b.rows())
            .map(|i| ((i * i) as f64 * 0.13).cos())
            .collect();
        let c = b.analyze(&x).unwrap();
        (b, c)
    }

    #[test]
    fn pack_round_trip_and_dot() {
        let (b, c) = setup();
        let layout = b.packed_layout();
        let p = layout.pack(&c);
        assert_eq!(p.len(), b.cols());
        let back = layout.unpack(&p);
        for (x, y) in back.0.iter().zip(&c.0) {
            assert!((x - y).norm() < 1e-12);
        }
        let dot: f64 = p.iter().map(|v| v * v).sum();
        assert!((dot - c.norm().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn packed_steering_matches_complex() {
        let (b, c) = setup();
        let layout = b.packed_layout();
        let st = layout.steering(11);
        let p = layout.pack(&c);
        for r in 0..11 {
            let want = steer(&c, &b.steering_phases(r, 11).unwrap()).unwrap();
            let got = layout.unpack(&st.apply(&p, r));
            for (x, y) in got.0.iter().zip(&want.0) {
                assert!((x - y).norm() < 1e-12);
            }
            let back = st.apply_inverse(&st.apply(&p, r), r);
            for (x, y) in back.iter().zip(&p) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        let angle = 0.731;
        let want = layout.pack(&steer(&c, &b.phases_for_angle(angle)).unwrap());
        let got = PackedRotation::new(&layout, angle).apply(&p);
        for (x, y) in got.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetrize_is_idempotent_projection() {
        let (b, c) = setup();
        let layout = b.packed_layout();
        let mut noisy = c.clone();
        noisy.0[0] += Complex64::new(0.0, 0.3);
        let last = noisy.len() - 1;
        noisy.0[last] += Complex64::new(0.2, 0.1);
        let s1 = layout.symmetrize(&noisy);
        assert!(b.is_conjugate_symmetric(&s1, 1e-15));
        assert_eq!(layout.symmetrize(&s1), s1);
        assert_eq!(layout.symmetrize(&c).0.len(), c.len());
    }
}
