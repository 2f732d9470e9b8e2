//! Estimators for loading efficiency and loss, with exact binomial
//! confidence intervals and two-sample tests.

mod binomial;
mod hypothesis;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use binomial::{binomial_tail_ge, binomial_tail_le, clopper_pearson, Interval};
pub use hypothesis::{ks_two_sample, two_proportion_test};

use crate::{Element, Error, Result};

/// Confidence level for per-site error bars.
pub const CONFIDENCE_PER_SITE: f64 = 0.68;
/// Confidence level for pooled rates used in comparisons.
pub const CONFIDENCE: f64 = 0.95;

/// One image pair on one element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub cycle: u64,
    pub element: Element,
    /// Element reloaded between the two images, if any.
    pub reloaded: Option<Element>,
    /// The first image was taken right after this element was loaded.
    pub fresh: bool,
    pub site_ids: Vec<u32>,
    pub before: Vec<bool>,
    pub after: Vec<bool>,
}

impl Trial {
    pub fn count_before(&self) -> usize {
        self.before.iter().filter(|&&o| o).count()
    }

    pub fn count_after(&self) -> usize {
        self.after.iter().filter(|&&o| o).count()
    }

    pub fn lost(&self) -> usize {
        self.before.iter().zip(&self.after).filter(|(b, a)| **b && !**a).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub k: u64,
    pub n: u64,
    pub rate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Estimate {
    pub fn from_counts(k: u64, n: u64, confidence: f64) -> Result<Self> {
        let ci = clopper_pearson(k, n, confidence)?;
        Ok(Self { k, n, rate: k as f64 / n as f64, lower: ci.lower, upper: ci.upper })
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteEstimate {
    pub site_id: u32,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub element: Element,
    pub per_site: Vec<SiteEstimate>,
    /// Average of the per-site rates.
    pub mean_rate: f64,
    /// All sites and trials pooled into one binomial count.
    pub pooled: Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossCondition {
    /// The other element was reloaded between the images.
    ReloadPresent,
    /// Nothing else happened between the images.
    Baseline,
    Any,
}

impl LossCondition {
    fn accepts(self, t: &Trial) -> bool {
        match self {
            Self::ReloadPresent => t.reloaded == Some(t.element.other()),
            Self::Baseline => t.reloaded.is_none(),
            Self::Any => true,
        }
    }
}

/// Accumulates (k, n) per site over trials sharing one site list.
fn per_site_counts<'a>(
    trials: impl Iterator<Item = &'a Trial>,
    mut tally: impl FnMut(&Trial, usize) -> Option<bool>,
) -> Result<Vec<(u32, u64, u64)>> {
    let mut counts: Vec<(u32, u64, u64)> = Vec::new();
    let mut ids: Option<&[u32]> = None;
    for t in trials {
        match ids {
            None => {
                counts = t.site_ids.iter().map(|&id| (id, 0, 0)).collect();
                ids = Some(&t.site_ids);
            }
            Some(prev) if prev != t.site_ids.as_slice() => {
                return Err(Error::Measurement("trials disagree on the site list".into()));
            }
            _ => {}
        }
        if t.before.len() != t.site_ids.len() || t.after.len() != t.site_ids.len() {
            return Err(Error::Measurement(format!("trial {} has mismatched occupancy lengths", t.cycle)));
        }
        for (i, c) in counts.iter_mut().enumerate() {
            if let Some(hit) = tally(t, i) {
                c.2 += 1;
                c.1 += hit as u64;
            }
        }
    }
    Ok(counts)
}

fn summarize(element: Element, counts: Vec<(u32, u64, u64)>, what: &str) -> Result<RateSummary> {
    let (k, n) = counts.iter().fold((0, 0), |acc, c| (acc.0 + c.1, acc.1 + c.2));
    if n == 0 {
        return Err(Error::Measurement(format!("no {element} trials available for {what}")));
    }
    let per_site: Vec<SiteEstimate> = counts
        .into_iter()
        .filter(|c| c.2 > 0)
        .map(|(site_id, k, n)| Ok(SiteEstimate { site_id, estimate: Estimate::from_counts(k, n, CONFIDENCE_PER_SITE)? }))
        .collect::<Result<_>>()?;
    let mean_rate = per_site.iter().map(|s| s.estimate.rate).sum::<f64>() / per_site.len() as f64;
    Ok(RateSummary { element, per_site, mean_rate, pooled: Estimate::from_counts(k, n, CONFIDENCE)? })
}

/// Probability that a tweezer holds an atom in the first image after loading.
pub fn loading_efficiency(trials: &[Trial], element: Element) -> Result<RateSummary> {
    let sel = trials.iter().filter(|t| t.element == element && t.fresh);
    summarize(element, per_site_counts(sel, |t, i| Some(t.before[i]))?, "loading efficiency")
}

/// Probability that an atom seen in the first image is missing in the second.
pub fn loss_rate(trials: &[Trial], element: Element, condition: LossCondition) -> Result<RateSummary> {
    let sel = trials.iter().filter(|t| t.element == element && condition.accepts(t));
    let counts = per_site_counts(sel, |t, i| t.before[i].then(|| !t.after[i]))?;
    summarize(element, counts, "loss rate")
}

/// Counts of each integer value, index = value.
pub fn histogram(values: &[u64]) -> Vec<u64> {
    let len = values.iter().max().map_or(0, |&m| m as usize + 1);
    let mut h = vec![0u64; len];
    for &v in values {
        h[v as usize] += 1;
    }
    h
}

/// Writes `site_id,k,n,rate,lo,hi`.
pub fn write_summary_csv(summary: &RateSummary, mut out: impl Write) -> Result<()> {
    writeln!(out, "site_id,k,n,rate,lo,hi")?;
    for s in &summary.per_site {
        let e = s.estimate;
        writeln!(out, "{},{},{},{:.6},{:.6},{:.6}", s.site_id, e.k, e.n, e.rate, e.lower, e.upper)?;
    }
    Ok(())
}
