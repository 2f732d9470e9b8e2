use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{disk_radius, PhaseMask};
use crate::{Error, Result};

pub const DEFAULT_NOLL_TERMS: usize = 15;

/// Zernike coefficients in radians RMS, Noll-indexed from j = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZernikeCoeffs {
    coeffs: Vec<f64>,
}

impl ZernikeCoeffs {
    pub fn zeros(terms: usize) -> Self {
        Self { coeffs: vec![0.0; terms] }
    }

    pub fn from_vec(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("Zernike coefficients must be finite".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn terms(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient of Noll index `j` (1-based); zero past the stored terms.
    pub fn get(&self, j: usize) -> f64 {
        j.checked_sub(1).and_then(|i| self.coeffs.get(i)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, j: usize, value: f64) {
        assert!(j >= 1, "Noll indices start at 1");
        if j > self.coeffs.len() {
            self.coeffs.resize(j, 0.0);
        }
        self.coeffs[j - 1] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }
}

/// Noll index to (n, m); negative m denotes the sine term.
pub fn noll_to_nm(j: usize) -> (usize, i64) {
    assert!(j >= 1, "Noll indices start at 1");
    let mut n = 0usize;
    let mut rem = j - 1;
    while rem > n {
        n += 1;
        rem -= n;
    }
    let parity = (n % 2) as i64;
    let m = parity + 2 * ((rem as i64 + ((n as i64 + 1) % 2)) / 2);
    if j % 2 == 0 {
        (n, m)
    } else {
        (n, -m)
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

fn radial(n: usize, m: usize, rho: f64) -> f64 {
    (0..=(n - m) / 2)
        .map(|s| {
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            sign * factorial(n - s) / (factorial(s) * factorial((n + m) / 2 - s) * factorial((n - m) / 2 - s))
                * rho.powi((n - 2 * s) as i32)
        })
        .sum()
}

/// Noll-normalized Zernike polynomial at polar coordinates on the unit disk.
pub fn zernike_value(j: usize, rho: f64, theta: f64) -> f64 {
    let (n, m) = noll_to_nm(j);
    let ma = m.unsigned_abs() as usize;
    let r = radial(n, ma, rho);
    if m == 0 {
        ((n + 1) as f64).sqrt() * r
    } else if m > 0 {
        (2.0 * (n + 1) as f64).sqrt() * r * (ma as f64 * theta).cos()
    } else {
        (2.0 * (n + 1) as f64).sqrt() * r * (ma as f64 * theta).sin()
    }
}

/// Z_j sampled on the N×N grid; zero outside the inscribed disk.
pub fn zernike_basis(j: usize, n: usize) -> Array2<f64> {
    let center = (n as f64 - 1.0) / 2.0;
    Array2::from_shape_fn((n, n), |(r, c)| {
        let rho = disk_radius(n, r, c);
        if rho > 1.0 {
            return 0.0;
        }
        let theta = (r as f64 - center).atan2(c as f64 - center);
        zernike_value(j, rho, theta)
    })
}

/// Unwrapped Σ c_j Z_j over the disk.
pub(crate) fn zernike_sum(coeffs: &ZernikeCoeffs, n: usize) -> Array2<f64> {
    let mut out = Array2::zeros((n, n));
    for (i, &c) in coeffs.as_slice().iter().enumerate() {
        if c != 0.0 {
            out.scaled_add(c, &zernike_basis(i + 1, n));
        }
    }
    out
}

/// Aberration phase Σ c_j Z_j wrapped into [0, 2π); zero outside the disk.
pub fn zernike_phase(coeffs: &ZernikeCoeffs, n: usize) -> Result<PhaseMask> {
    if n < 16 {
        return Err(Error::Validation(format!("Zernike grid must be at least 16, got {n}")));
    }
    PhaseMask::from_radians(zernike_sum(coeffs, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holography::{circular_aperture, far_field};
    use std::f64::consts::TAU;

    #[test]
    fn noll_table() {
        let expected = [
            (0, 0), (1, 1), (1, -1), (2, 0), (2, -2), (2, 2), (3, -1), (3, 1),
            (3, -3), (3, 3), (4, 0), (4, 2), (4, -2), (4, 4), (4, -4),
        ];
        for (j, &nm) in expected.iter().enumerate() {
            assert_eq!(noll_to_nm(j + 1), nm, "j = {}", j + 1);
        }
    }

    #[test]
    fn zero_coefficients_give_zero_phase() {
        let mask = zernike_phase(&ZernikeCoeffs::zeros(DEFAULT_NOLL_TERMS), 32).unwrap();
        assert!(mask.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn phase_is_wrapped() {
        let coeffs = ZernikeCoeffs::from_vec(vec![0.0, 3.0, -2.0, 7.5, 1.0, -4.0]).unwrap();
        let mask = zernike_phase(&coeffs, 64).unwrap();
        assert!(mask.values().iter().all(|&v| (0.0..TAU).contains(&v)));
    }

    #[test]
    fn orthonormal_on_disk() {
        let n = 512;
        let basis: Vec<Array2<f64>> = (1..=DEFAULT_NOLL_TERMS).map(|j| zernike_basis(j, n)).collect();
        let disk = circular_aperture(n);
        let npix = disk.sum();
        for j in 0..basis.len() {
            for k in j..basis.len() {
                let ip = (&basis[j] * &basis[k]).sum() / npix;
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-2, "<Z{}, Z{}> = {ip}", j + 1, k + 1);
            }
        }
    }

    #[test]
    fn piston_leaves_far_field_unchanged() {
        let n = 64;
        let aperture = circular_aperture(n);
        let mut coeffs = ZernikeCoeffs::zeros(1);
        coeffs.set(1, 0.8);
        let piston = zernike_phase(&coeffs, n).unwrap();
        let flat = far_field(&PhaseMask::zeros(n), &aperture, &[]).unwrap();
        let shifted = far_field(&piston, &aperture, &[]).unwrap();
        for (a, b) in flat.values.iter().zip(shifted.values.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn too_small_grid() {
        assert!(zernike_phase(&ZernikeCoeffs::zeros(4), 8).is_err());
    }
}
