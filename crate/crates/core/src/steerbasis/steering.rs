use std::f64::consts::PI;

use num_complex::Complex64;

use super::SteerableCoeffs;
use crate::error::{Error, Result};

/// Diagonal of a steering matrix: one unit-modulus phase per basis column.
#[derive(Clone, Debug, PartialEq)]
pub struct SteeringPhases {
    /// Discrete rotation index, when built from `(r, R)`.
    pub r: Option<usize>,
    pub phases: Vec<Complex64>,
}

impl SteeringPhases {
    pub fn discrete(labels: &[(usize, i32)], r: usize, rotations: usize) -> Result<Self> {
        if rotations == 0 || r >= rotations {
            return Err(Error::invalid(format!(
                "rotation index {r} out of range for R = {rotations}"
            )));
        }
        let mut out = Self::continuous(labels, 2.0 * PI * r as f64 / rotations as f64);
        out.r = Some(r);
        Ok(out)
    }

    pub fn continuous(labels: &[(usize, i32)], angle: f64) -> Self {
        let phases = labels
            .iter()
            .map(|&(_, t)| Complex64::from_polar(1.0, -f64::from(t) * angle))
            .collect();
        SteeringPhases { r: None, phases }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Inverse steering (complex conjugate phases).
    pub fn inverse(&self) -> Self {
        SteeringPhases {
            r: None,
            phases: self.phases.iter().map(|p| p.conj()).collect(),
        }
    }
}

/// Rotate coefficients by entrywise multiplication with steering phases.
pub fn steer(coeffs: &SteerableCoeffs, phases: &SteeringPhases) -> Result<SteerableCoeffs> {
    if coeffs.len() != phases.len() {
        return Err(Error::invalid(format!(
            "coefficients have {} entries, phases have {}",
            coeffs.len(),
            phases.len()
        )));
    }
    Ok(SteerableCoeffs(
        coeffs
            .0
            .iter()
            .zip(&phases.phases)
            .map(|(c, p)| c * p)
            .collect(),
    ))
}
