use serde::{Deserialize, Serialize};

use super::{SequenceStep, StepKind, Timeline, TimelineEvent, World};
use crate::dynamics::loss::drop_atoms;
use crate::dynamics::{hold_loss, load_element, OccupancyState};
use crate::imaging::{detect, nominal_threshold, site_counts, synth_frame, SiteCount};
use crate::stats::Trial;
use crate::{rng_from_seed, Element, Error, PerElement, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub t_s: f64,
    pub element: Element,
    pub counts: Vec<SiteCount>,
    pub detected: Vec<bool>,
    pub truth: Vec<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SequenceRun {
    pub timeline: Timeline,
    /// Consecutive image pairs per element, from detected occupancy.
    pub trials: Vec<Trial>,
    pub images: Vec<ImageRecord>,
}

struct Pending {
    detected: Vec<bool>,
    fresh: bool,
    reloaded: Option<Element>,
}

fn scope(step: &SequenceStep) -> Vec<Element> {
    step.element.map_or(Element::ALL.to_vec(), |e| vec![e])
}

fn validate_steps(steps: &[SequenceStep], world: &World) -> Result<()> {
    let mut loaded = PerElement::splat(false);
    let mut phantoms = false;
    for (k, s) in steps.iter().enumerate() {
        let at = |msg: String| Error::Validation(format!("step {} ({}): {msg}", k + 1, s.kind.as_str()));
        if !(s.duration_ms > 0.0 && s.duration_ms.is_finite()) {
            return Err(at(format!("duration must be positive, got {}", s.duration_ms)));
        }
        match s.kind {
            StepKind::MotLoad => {
                for e in scope(s) {
                    loaded[e] = true;
                    phantoms |= e == Element::Cs && world.phantom_cs_sites > 0;
                }
            }
            StepKind::ReloadElement => {
                let e = s.element.ok_or_else(|| at("needs an element".into()))?;
                loaded[e] = true;
                phantoms |= e == Element::Cs && world.phantom_cs_sites > 0;
            }
            StepKind::Blowout => {
                if s.element == Some(Element::Rb) {
                    return Err(at("blowout only acts on the shallow Cs traps".into()));
                }
                phantoms = false;
            }
            StepKind::Image => {
                let e = s.element.ok_or_else(|| at("needs an element".into()))?;
                if !loaded[e] {
                    return Err(at(format!("{e} imaged before it was loaded")));
                }
                if e == Element::Cs && phantoms {
                    return Err(at("Cs imaged before the shallow traps were blown out".into()));
                }
            }
            StepKind::Pgc | StepKind::Wait => {}
        }
    }
    Ok(())
}

/// Executes `steps` in order on a fresh, empty array.
///
/// Imaging applies the intrinsic per-cycle loss of the imaged element after
/// the exposure; a reload applies the crosstalk increment to the held element.
pub fn run_sequence(steps: &[SequenceStep], world: &World, seed: u64) -> Result<SequenceRun> {
    world.validate()?;
    validate_steps(steps, world)?;
    let mut rng = rng_from_seed(seed);
    let mut state = OccupancyState::empty(&world.map);
    let mut t = 0.0;
    let mut run = SequenceRun::default();
    let mut pending: PerElement<Option<Pending>> = PerElement::new(None, None);
    let mut fresh = PerElement::splat(false);
    let mut loaded = PerElement::splat(false);
    let mut pairs = PerElement::splat(0u64);
    let thresholds = PerElement::new(
        nominal_threshold(&world.detection, Element::Rb)?,
        nominal_threshold(&world.detection, Element::Cs)?,
    );

    for step in steps {
        t += step.duration_ms / 1000.0;
        let mut available = None;
        match step.kind {
            StepKind::MotLoad => {
                for e in scope(step) {
                    load_element(&mut state, e, world.p_load[e], &mut rng)?;
                    pending[e] = None;
                    fresh[e] = true;
                    loaded[e] = true;
                }
            }
            StepKind::Pgc | StepKind::Wait => {
                state = hold_loss(&state, step.duration_ms / 1000.0, &world.loss, &mut rng)?;
            }
            // Only the shallow phantom traps are affected; validation already
            // guarantees they are empty before any Cs image.
            StepKind::Blowout => {}
            StepKind::ReloadElement => {
                let e = step.element.expect("validated");
                let held = e.other();
                load_element(&mut state, e, world.p_load[e], &mut rng)?;
                pending[e] = None;
                fresh[e] = true;
                loaded[e] = true;
                drop_atoms(&mut state, held, world.loss.crosstalk[held], &mut rng);
                if let Some(p) = pending[held].as_mut() {
                    p.reloaded = Some(e);
                }
                if loaded[held] {
                    available = Some(held);
                }
            }
            StepKind::Image => {
                let e = step.element.expect("validated");
                let frame = synth_frame(&state, &world.map, e, &world.detection, &mut rng)?;
                let counts = site_counts(&frame, &world.map, &world.detection);
                let raw: Vec<u64> = counts.iter().map(|c| c.counts).collect();
                let detected = detect(&raw, &vec![thresholds[e]; raw.len()])?;
                let occ = state.get(e);
                if let Some(prev) = pending[e].take() {
                    run.trials.push(Trial {
                        cycle: pairs[e],
                        element: e,
                        reloaded: prev.reloaded,
                        fresh: prev.fresh,
                        site_ids: occ.site_ids.clone(),
                        before: prev.detected,
                        after: detected.clone(),
                    });
                    pairs[e] += 1;
                }
                run.images.push(ImageRecord { t_s: t, element: e, counts, detected: detected.clone(), truth: occ.occupied.clone() });
                pending[e] = Some(Pending { detected, fresh: fresh[e], reloaded: None });
                fresh[e] = false;
                drop_atoms(&mut state, e, world.loss.cycle_loss[e], &mut rng);
            }
        }
        state.time_s = t;
        run.timeline.push(TimelineEvent {
            t_s: t,
            event: step.label(),
            counts: PerElement::new(state.count(Element::Rb), state.count(Element::Cs)),
            available,
            data_atoms: available.map_or(0, |a| state.count(a)),
        });
    }
    Ok(run)
}
