use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Bisection stops once the bracket is narrower than this.
const BISECTION_TOL: f64 = 1e-12;

/// log P(X = i) for i = 0..=n, X ~ Binomial(n, p), by the pmf ratio
/// recurrence starting from P(X = 0) = (1-p)^n.
fn log_pmf_all(n: u64, p: f64) -> Vec<f64> {
    let len = n as usize + 1;
    if p <= 0.0 {
        let mut v = vec![f64::NEG_INFINITY; len];
        v[0] = 0.0;
        return v;
    }
    if p >= 1.0 {
        let mut v = vec![f64::NEG_INFINITY; len];
        v[len - 1] = 0.0;
        return v;
    }
    let log_odds = p.ln() - (-p).ln_1p();
    let mut out = Vec::with_capacity(len);
    let mut cur = n as f64 * (-p).ln_1p();
    out.push(cur);
    for i in 0..n {
        cur += ((n - i) as f64 / (i + 1) as f64).ln() + log_odds;
        out.push(cur);
    }
    out
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// P(X >= k) for X ~ Binomial(n, p).
pub fn binomial_tail_ge(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let lp = log_pmf_all(n, p);
    log_sum_exp(&lp[k as usize..]).exp().min(1.0)
}

/// P(X <= k) for X ~ Binomial(n, p).
pub fn binomial_tail_le(k: u64, n: u64, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    let lp = log_pmf_all(n, p);
    log_sum_exp(&lp[..=k as usize]).exp().min(1.0)
}

/// Finds p in [0, 1] where the monotone `f` crosses `target`.
fn bisect(mut f: impl FnMut(f64) -> f64, target: f64, increasing: bool) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let above = f(mid) > target;
        if above == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Exact (Clopper-Pearson) binomial confidence interval for k successes in
/// n trials, obtained by inverting the binomial tails.
pub fn clopper_pearson(k: u64, n: u64, confidence: f64) -> Result<Interval> {
    if n == 0 {
        return Err(Error::Validation("Clopper-Pearson needs n >= 1".into()));
    }
    if k > n {
        return Err(Error::Validation(format!("k = {k} exceeds n = {n}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Validation(format!("confidence must be in (0, 1), got {confidence}")));
    }
    let tail = (1.0 - confidence) / 2.0;
    let lower = if k == 0 { 0.0 } else { bisect(|p| binomial_tail_ge(k, n, p), tail, true) };
    let upper = if k == n { 1.0 } else { bisect(|p| binomial_tail_le(k, n, p), tail, false) };
    Ok(Interval { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tails_small_case() {
        // n = 3, p = 0.5: pmf = 1/8, 3/8, 3/8, 1/8
        assert!((binomial_tail_ge(2, 3, 0.5) - 0.5).abs() < 1e-15);
        assert!((binomial_tail_le(0, 3, 0.5) - 0.125).abs() < 1e-15);
        assert_eq!(binomial_tail_ge(0, 3, 0.2), 1.0);
        assert_eq!(binomial_tail_le(3, 3, 0.2), 1.0);
        assert_eq!(binomial_tail_ge(1, 5, 0.0), 0.0);
        assert_eq!(binomial_tail_le(4, 5, 1.0), 0.0);
    }

    #[test]
    fn edge_endpoints_are_exact() {
        let iv = clopper_pearson(0, 20, 0.95).unwrap();
        assert_eq!(iv.lower, 0.0);
        let iv = clopper_pearson(20, 20, 0.95).unwrap();
        assert_eq!(iv.upper, 1.0);
        // Closed form for k = 0: upper = 1 - (α/2)^(1/n).
        let iv = clopper_pearson(0, 20, 0.95).unwrap();
        assert!((iv.upper - (1.0 - 0.025f64.powf(1.0 / 20.0))).abs() < 1e-9);
    }

    #[test]
    fn domain_errors() {
        assert!(clopper_pearson(1, 0, 0.95).is_err());
        assert!(clopper_pearson(5, 4, 0.95).is_err());
        assert!(clopper_pearson(1, 4, 1.0).is_err());
        assert!(clopper_pearson(1, 4, 0.0).is_err());
    }

    #[test]
    fn width_shrinks_with_n() {
        let w: Vec<f64> = [10, 100, 1000]
            .iter()
            .map(|&n| clopper_pearson(n * 3 / 10, n, 0.95).unwrap().width())
            .collect();
        assert!(w[0] > w[1] && w[1] > w[2]);
    }

    #[test]
    fn matches_beta_quantiles() {
        use statrs::distribution::{Beta, ContinuousCDF};
        for n in 1..=50u64 {
            for k in 0..=n {
                let iv = clopper_pearson(k, n, 0.95).unwrap();
                let lo = if k == 0 { 0.0 } else { Beta::new(k as f64, (n - k + 1) as f64).unwrap().inverse_cdf(0.025) };
                let hi = if k == n { 1.0 } else { Beta::new((k + 1) as f64, (n - k) as f64).unwrap().inverse_cdf(0.975) };
                assert!((iv.lower - lo).abs() < 1e-6, "k={k} n={n}: {} vs {lo}", iv.lower);
                assert!((iv.upper - hi).abs() < 1e-6, "k={k} n={n}: {} vs {hi}", iv.upper);
            }
        }
    }

    #[test]
    fn exact_coverage_is_at_least_nominal() {
        let n = 50u64;
        let intervals: Vec<Interval> = (0..=n).map(|k| clopper_pearson(k, n, 0.95).unwrap()).collect();
        for p in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
            let pmf = log_pmf_all(n, p);
            let coverage: f64 = intervals
                .iter()
                .zip(&pmf)
                .filter(|(iv, _)| iv.contains(p))
                .map(|(_, lp)| lp.exp())
                .sum();
            assert!(coverage >= 0.95, "p={p}: {coverage}");
        }
    }

    proptest! {
        #[test]
        fn interval_brackets_estimate_and_is_monotone(n in 1u64..200, k_frac in 0.0f64..1.0, conf in 0.5f64..0.99) {
            let k = ((n as f64) * k_frac).floor() as u64;
            let iv = clopper_pearson(k, n, conf).unwrap();
            let phat = k as f64 / n as f64;
            prop_assert!(iv.lower <= phat && phat <= iv.upper);
            if k < n {
                let next = clopper_pearson(k + 1, n, conf).unwrap();
                prop_assert!(next.lower >= iv.lower && next.upper >= iv.upper);
            }
        }
    }
}
