use statrs::function::erf::erfc;

use crate::{Error, Result};

/// Two-sided pooled two-proportion z-test; returns the p-value.
pub fn two_proportion_test(k1: u64, n1: u64, k2: u64, n2: u64) -> Result<f64> {
    if n1 == 0 || n2 == 0 || k1 > n1 || k2 > n2 {
        return Err(Error::Validation(format!("invalid counts {k1}/{n1} vs {k2}/{n2}")));
    }
    let pooled = (k1 + k2) as f64 / (n1 + n2) as f64;
    let var = pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64);
    if var == 0.0 {
        return Ok(1.0);
    }
    let z = (k1 as f64 / n1 as f64 - k2 as f64 / n2 as f64) / var.sqrt();
    Ok(erfc(z.abs() / std::f64::consts::SQRT_2))
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Validation("KS test needs two non-empty samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok((d, kolmogorov_q(lambda)))
}

/// Q_KS(λ) = 2 Σ (-1)^(j-1) exp(-2 j² λ²).
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_proportions() {
        assert!((two_proportion_test(50, 100, 50, 100).unwrap() - 1.0).abs() < 1e-12);
        assert!(two_proportion_test(10, 1000, 100, 1000).unwrap() < 1e-10);
        assert!(two_proportion_test(3, 2, 1, 1).is_err());
    }

    #[test]
    fn z_test_reference_value() {
        // p1 = 0.5, p2 = 0.4, n = 200 each: z = 0.1 / sqrt(0.45·0.55·0.01) = 2.0100756
        let p = two_proportion_test(100, 200, 80, 200).unwrap();
        assert!((p - 0.044_422).abs() < 1e-4, "p = {p}");
    }

    #[test]
    fn ks_same_and_shifted() {
        let a: Vec<f64> = (0..500).map(|k| (k % 17) as f64).collect();
        let (d, p) = ks_two_sample(&a, &a).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(p, 1.0);
        let b: Vec<f64> = a.iter().map(|v| v + 3.0).collect();
        let (d, p) = ks_two_sample(&a, &b).unwrap();
        assert!(d > 0.1 && p < 1e-6);
    }

    #[test]
    fn kolmogorov_reference() {
        // Q_KS(1.36) ≈ 0.0495 (5% critical value).
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
    }
}
