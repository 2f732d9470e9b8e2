use serde::{Deserialize, Serialize};

use super::{Timeline, TimelineEvent, World};
use crate::dynamics::loss::drop_atoms;
use crate::dynamics::{load_element, OccupancyState};
use crate::stats::Trial;
use crate::{rng_from_seed, Element, Error, PerElement, Result};

/// Durations of one reload window, ms. The idle part is the time left for
/// experiments on the held element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleTiming {
    pub mot_ms: f64,
    pub pgc_ms: f64,
    pub wait_ms: f64,
    pub blowout_ms: f64,
    pub idle_ms: f64,
    /// Duration of one of the two images closing the window.
    pub image_ms: f64,
}

impl Default for CycleTiming {
    fn default() -> Self {
        Self { mot_ms: 300.0, pgc_ms: 20.0, wait_ms: 10.0, blowout_ms: 5.0, idle_ms: 585.0, image_ms: 40.0 }
    }
}

impl CycleTiming {
    pub fn window_s(&self) -> f64 {
        (self.mot_ms + self.pgc_ms + self.wait_ms + self.blowout_ms + self.idle_ms + 2.0 * self.image_ms) / 1000.0
    }

    fn validate(&self) -> Result<()> {
        let parts = [self.mot_ms, self.pgc_ms, self.wait_ms, self.blowout_ms, self.idle_ms, self.image_ms];
        if parts.iter().any(|d| !(*d >= 0.0 && d.is_finite())) || !(self.window_s() > 0.0) || !(self.image_ms > 0.0) {
            return Err(Error::Validation(format!("invalid cycle timing {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ContinuousMode {
    /// Rb and Cs are reloaded in turn; the other element is held.
    Alternating,
    /// Only `element` is used: it is reloaded every other window and held
    /// in between with nothing else loaded.
    SingleElement { element: Element },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousConfig {
    #[serde(default)]
    pub timing: CycleTiming,
    pub total_minutes: f64,
    #[serde(default = "alternating")]
    pub mode: ContinuousMode,
    /// Keep per-window trial records (needed for loss estimation).
    #[serde(default = "yes")]
    pub record_trials: bool,
}

fn alternating() -> ContinuousMode {
    ContinuousMode::Alternating
}

fn yes() -> bool {
    true
}

impl Default for ContinuousConfig {
    fn default() -> Self {
        Self { timing: CycleTiming::default(), total_minutes: 50.0, mode: ContinuousMode::Alternating, record_trials: true }
    }
}

impl ContinuousConfig {
    pub fn windows(&self) -> u64 {
        (self.total_minutes * 60.0 / self.timing.window_s()).round() as u64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContinuousRun {
    pub timeline: Timeline,
    /// One record per held window, using the true occupancy.
    pub trials: Vec<Trial>,
}

/// Runs the reload schedule for the configured duration.
///
/// Each window emits two events: the reload at its start and the closing
/// image. Both report the held element as available; the first with its
/// count before the window's loss, the second after.
pub fn continuous_mode(config: &ContinuousConfig, world: &World, seed: u64) -> Result<ContinuousRun> {
    world.validate()?;
    config.timing.validate()?;
    if !(config.total_minutes >= 0.0 && config.total_minutes.is_finite()) {
        return Err(Error::Validation(format!("total duration must be non-negative, got {}", config.total_minutes)));
    }
    let used: Vec<Element> = match config.mode {
        ContinuousMode::Alternating => Element::ALL.to_vec(),
        ContinuousMode::SingleElement { element } => vec![element],
    };
    for &e in &used {
        if world.map.count(e) == 0 {
            return Err(Error::Validation(format!("continuous mode needs a non-empty {e} array")));
        }
    }

    let mut rng = rng_from_seed(seed);
    let mut state = OccupancyState::empty(&world.map);
    for &e in &used {
        load_element(&mut state, e, world.p_load[e], &mut rng)?;
    }
    let window = config.timing.window_s();
    let image_s = config.timing.image_ms / 1000.0;
    let mut run = ContinuousRun::default();
    let counts = |s: &OccupancyState| PerElement::new(s.count(Element::Rb), s.count(Element::Cs));

    for k in 0..config.windows() {
        let t0 = k as f64 * window;
        let (reloaded, held) = match config.mode {
            ContinuousMode::Alternating => {
                let x = Element::ALL[(k % 2) as usize];
                (Some(x), Some(x.other()))
            }
            ContinuousMode::SingleElement { element } if k % 2 == 1 => (Some(element), None),
            ContinuousMode::SingleElement { element } => (None, Some(element)),
        };
        if let Some(x) = reloaded {
            load_element(&mut state, x, world.p_load[x], &mut rng)?;
        }
        state.time_s = t0;
        let label = match (reloaded, held) {
            (Some(x), _) => format!("reload_{}", x.as_str().to_lowercase()),
            (None, Some(y)) => format!("hold_{}", y.as_str().to_lowercase()),
            (None, None) => unreachable!("every window reloads or holds"),
        };
        run.timeline.push(TimelineEvent {
            t_s: t0,
            event: label,
            counts: counts(&state),
            available: held,
            data_atoms: held.map_or(0, |y| state.count(y)),
        });

        if let Some(y) = held {
            let before = state.get(y).occupied.clone();
            let other_reloaded = reloaded == Some(y.other());
            drop_atoms(&mut state, y, world.loss.per_cycle(y, other_reloaded), &mut rng);
            if config.record_trials {
                run.trials.push(Trial {
                    cycle: k,
                    element: y,
                    reloaded: reloaded.filter(|x| *x != y),
                    fresh: true,
                    site_ids: state.get(y).site_ids.clone(),
                    before,
                    after: state.get(y).occupied.clone(),
                });
            }
        }
        state.time_s = t0 + window - image_s;
        run.timeline.push(TimelineEvent {
            t_s: state.time_s,
            event: "image".into(),
            counts: counts(&state),
            available: held,
            data_atoms: held.map_or(0, |y| state.count(y)),
        });
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::LossModel;
    use crate::geometry::make_interleaved_dual_lattice;
    use crate::sequencer::availability_metrics;
    use crate::stats::{loss_rate, LossCondition};

    fn world() -> World {
        World::new(make_interleaved_dual_lattice(17, 16, 5.0).unwrap())
    }

    #[test]
    fn deterministic_limit_alternates_exact_counts() {
        let mut w = world();
        w.p_load = PerElement::splat(1.0);
        w.loss = LossModel { cycle_loss: PerElement::splat(0.0), ..LossModel::default() };
        let cfg = ContinuousConfig { total_minutes: 1.0, ..ContinuousConfig::default() };
        let run = continuous_mode(&cfg, &w, 0).unwrap();
        for (k, ev) in run.timeline.events.iter().enumerate() {
            let expect = if (k / 2) % 2 == 0 { (Element::Cs, 272) } else { (Element::Rb, 240) };
            assert_eq!((ev.available.unwrap(), ev.data_atoms), expect);
        }
    }

    #[test]
    fn availability_invariants() {
        let run = continuous_mode(&ContinuousConfig { total_minutes: 5.0, ..ContinuousConfig::default() }, &world(), 4).unwrap();
        let events = &run.timeline.events;
        assert!(events.windows(2).all(|w| w[0].t_s < w[1].t_s));
        for ev in events {
            let a = ev.available.expect("one element always available");
            assert_eq!(ev.data_atoms, ev.counts[a]);
        }
        for pair in events.chunks(2) {
            assert!(pair[1].data_atoms <= pair[0].data_atoms);
        }
        let total = run.timeline.duration_s();
        assert!((total - 300.0).abs() <= CycleTiming::default().window_s());
    }

    #[test]
    fn mean_availability_matches_expectation() {
        let w = world();
        let run = continuous_mode(&ContinuousConfig { total_minutes: 50.0, ..ContinuousConfig::default() }, &w, 9).unwrap();
        let m = availability_metrics(&run.timeline).unwrap();
        for e in Element::ALL {
            let expect = w.p_load[e] * w.map.count(e) as f64 * (1.0 - w.loss.per_cycle(e, true) / 2.0);
            let got = m.mean_per_element[e].unwrap();
            assert!((got / expect - 1.0).abs() < 0.05, "{e}: {got} vs {expect}");
        }
    }

    #[test]
    fn records_recover_configured_loss() {
        let w = world();
        let run = continuous_mode(&ContinuousConfig { total_minutes: 50.0, ..ContinuousConfig::default() }, &w, 1).unwrap();
        for e in Element::ALL {
            let r = loss_rate(&run.trials, e, LossCondition::ReloadPresent).unwrap();
            assert!(r.pooled.contains(w.loss.per_cycle(e, true)), "{e}: {:?}", r.pooled);
        }
    }

    #[test]
    fn single_element_mode_records_baseline() {
        let cfg = ContinuousConfig {
            total_minutes: 2.0,
            mode: ContinuousMode::SingleElement { element: Element::Cs },
            ..ContinuousConfig::default()
        };
        let run = continuous_mode(&cfg, &world(), 5).unwrap();
        assert!(run.trials.iter().all(|t| t.element == Element::Cs && t.reloaded.is_none()));
        assert!(run.timeline.events.iter().all(|e| e.counts.rb == 0));
        assert!(loss_rate(&run.trials, Element::Cs, LossCondition::Baseline).is_ok());
    }

    #[test]
    fn reproducible_and_seed_dependent() {
        let cfg = ContinuousConfig { total_minutes: 1.0, ..ContinuousConfig::default() };
        let a = continuous_mode(&cfg, &world(), 1).unwrap();
        assert_eq!(a, continuous_mode(&cfg, &world(), 1).unwrap());
        assert_ne!(a, continuous_mode(&cfg, &world(), 2).unwrap());
    }

    #[test]
    fn needs_both_arrays() {
        let map = crate::geometry::make_rect_lattice(Element::Rb, 4, 4, 5.0, (0.0, 0.0)).unwrap();
        assert!(continuous_mode(&ContinuousConfig::default(), &World::new(map), 0).is_err());
    }
}
