//! Discrete-event execution of experiment sequences and of the alternating
//! continuous-reload schedule.

mod continuous;
mod run;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use continuous::{continuous_mode, ContinuousConfig, ContinuousMode, ContinuousRun, CycleTiming};
pub use run::{run_sequence, ImageRecord, SequenceRun};

use crate::dynamics::{LossModel, TrapPhysics, DEFAULT_LOAD_PROBABILITY};
use crate::geometry::SiteMap;
use crate::imaging::DetectionModel;
use crate::{Element, Error, PerElement, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    MotLoad,
    Pgc,
    Wait,
    Blowout,
    Image,
    ReloadElement,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::MotLoad => "mot_load",
            StepKind::Pgc => "pgc",
            StepKind::Wait => "wait",
            StepKind::Blowout => "blowout",
            StepKind::Image => "image",
            StepKind::ReloadElement => "reload_element",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceStep {
    pub kind: StepKind,
    /// Element the step acts on; `None` means both.
    #[serde(default)]
    pub element: Option<Element>,
    pub duration_ms: f64,
}

impl SequenceStep {
    pub fn new(kind: StepKind, element: Option<Element>, duration_ms: f64) -> Self {
        Self { kind, element, duration_ms }
    }

    fn label(&self) -> String {
        match self.element {
            Some(e) => format!("{}_{}", self.kind.as_str(), e.as_str().to_lowercase()),
            None => self.kind.as_str().to_string(),
        }
    }
}

/// Default single-shot sequence: joint MOT load, cooling, blowout of the
/// shallow out-of-plane traps, then two image pairs.
pub fn default_sequence() -> Vec<SequenceStep> {
    use StepKind::*;
    vec![
        SequenceStep::new(MotLoad, None, 300.0),
        SequenceStep::new(Pgc, None, 20.0),
        SequenceStep::new(Wait, None, 10.0),
        SequenceStep::new(Blowout, Some(Element::Cs), 5.0),
        SequenceStep::new(Image, Some(Element::Rb), 40.0),
        SequenceStep::new(Image, Some(Element::Cs), 40.0),
        SequenceStep::new(Wait, None, 100.0),
        SequenceStep::new(Image, Some(Element::Rb), 40.0),
        SequenceStep::new(Image, Some(Element::Cs), 40.0),
    ]
}

/// Everything a sequence acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub map: SiteMap,
    pub physics: TrapPhysics,
    pub loss: LossModel,
    pub detection: DetectionModel,
    pub p_load: PerElement<f64>,
    /// Spurious shallow Cs traps that load alongside the array and are only
    /// removed by a blowout step.
    pub phantom_cs_sites: usize,
}

impl World {
    pub fn new(map: SiteMap) -> Self {
        Self {
            map,
            physics: TrapPhysics::default(),
            loss: LossModel::default(),
            detection: DetectionModel::default(),
            p_load: PerElement::splat(DEFAULT_LOAD_PROBABILITY),
            phantom_cs_sites: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.detection.validate()?;
        for e in Element::ALL {
            if !(0.0..=1.0).contains(&self.p_load[e]) {
                return Err(Error::Validation(format!("{e} load probability outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEvent {
    pub t_s: f64,
    pub event: String,
    pub counts: PerElement<usize>,
    /// Element available for manipulation at this instant.
    pub available: Option<Element>,
    pub data_atoms: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub events: Vec<TimelineEvent>,
}

impl Timeline {
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub(crate) fn push(&mut self, event: TimelineEvent) {
        debug_assert!(self.events.last().is_none_or(|l| l.t_s < event.t_s));
        self.events.push(event);
    }

    pub fn duration_s(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.t_s)
    }

    /// Writes `t_s,event,rb_count,cs_count,available_element,data_atoms`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "t_s,event,rb_count,cs_count,available_element,data_atoms")?;
        for e in &self.events {
            let avail = e.available.map_or("none", |a| a.as_str());
            writeln!(out, "{:.6},{},{},{},{},{}", e.t_s, e.event, e.counts.rb, e.counts.cs, avail, e.data_atoms)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityMetrics {
    pub min: usize,
    pub mean: f64,
    /// Mean data-atom count while each element is the available one.
    pub mean_per_element: PerElement<Option<f64>>,
    pub samples: usize,
}

/// Summary of the data-atom track over events where some element is available.
pub fn availability_metrics(timeline: &Timeline) -> Result<AvailabilityMetrics> {
    let mut sums = PerElement::splat((0usize, 0usize));
    let mut min = usize::MAX;
    for e in &timeline.events {
        if let Some(a) = e.available {
            sums[a].0 += e.data_atoms;
            sums[a].1 += 1;
            min = min.min(e.data_atoms);
        }
    }
    let samples = sums.rb.1 + sums.cs.1;
    if samples == 0 {
        return Err(Error::Measurement("timeline has no availability samples".into()));
    }
    Ok(AvailabilityMetrics {
        min,
        mean: (sums.rb.0 + sums.cs.0) as f64 / samples as f64,
        mean_per_element: sums.map(|_, &(s, n)| (n > 0).then(|| s as f64 / n as f64)),
        samples,
    })
}
