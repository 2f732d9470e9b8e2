use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};


use dualarray::aod::{
    amplitude_feedback_loop, grid_sites, spatial_filter_plan, tones_for_positions, write_tones_csv, AodGrid, Axis,
    Calibration,
};
use dualarray::config::{ExperimentConfig, GeometryConfig};
use dualarray::dynamics::{fit_temperature, release_recapture_curve};
use dualarray::geometry::{write_sites_csv, SiteMap};
use dualarray::holography::{
    aberration_correct, atom_feedback_homogenize, circular_aperture, far_field, rms_nonuniformity, zernike_phase,
    HiddenAberrationSystem, ScanConfig, ShiftProbe, SimulatedStarkProbe, Wgs, ZernikeCoeffs,
};
use dualarray::imaging::{fit_thresholds, write_histogram_csv, write_thresholds_csv};
use dualarray::sequencer::{availability_metrics, continuous_mode, run_sequence, AvailabilityMetrics};
use dualarray::stats::{loading_efficiency, loss_rate, write_summary_csv, LossCondition, RateSummary, Trial};
use dualarray::{rng_from_seed, Element, Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{parse_seeds, Output};
use crate::{AodAction, Cli, Command};

/// Echo of everything needed to rerun a command.
#[derive(Serialize)]
struct Manifest<'a> {
    tool_version: &'static str,
    command: &'a str,
    config_path: Option<&'a Path>,
    seed: &'a str,
    output_dir: &'a Path,
    format: crate::Format,
    options: Value,
    config: &'a ExperimentConfig,
}

pub fn run(cli: &Cli) -> Result<()> {
    if cli.threads > 0 {
        // Only fails if a global pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let base_dir = cli.config.as_deref().and_then(Path::parent).map(Path::to_path_buf).unwrap_or_default();
    let out = Output::new(&cli.out, cli.format)?;

    let (name, options) = match &cli.command {
        Command::Holo { geometry, iters, tol } => {
            override_geometry(&mut config, geometry.as_deref())?;
            if let Some(i) = iters {
                config.holography.wgs.max_iters = *i;
            }
            if let Some(t) = tol {
                config.holography.wgs.tol = *t;
            }
            ("holo", json!({ "geometry": geometry, "iters": iters, "tol": tol }))
        }
        Command::Aod { action: AodAction::Plan { geometry, calibration } } => {
            override_geometry(&mut config, geometry.as_deref())?;
            if let Some(p) = calibration {
                let text = std::fs::read_to_string(p)?;
                config.aod.calibration = serde_json::from_str::<Calibration>(&text)
                    .map_err(|e| Error::Config(format!("{}:{}:{}: {e}", p.display(), e.line(), e.column())))?;
            }
            ("aod plan", json!({ "geometry": geometry, "calibration": calibration }))
        }
        Command::Simulate => ("simulate", json!({})),
        Command::Continuous { minutes, min_atoms } => {
            if let Some(m) = minutes {
                config.continuous.total_minutes = *m;
            }
            ("continuous", json!({ "minutes": minutes, "min_atoms": min_atoms }))
        }
        Command::Analyze { records } => ("analyze", json!({ "records": records })),
    };

    let seeds = parse_seeds(&cli.seed)?;
    if seeds.len() != 1 && !matches!(cli.command, Command::Continuous { .. }) {
        return Err(Error::Validation(format!("'{name}' takes a single seed")));
    }

    match &cli.command {
        Command::Holo { .. } => holo(&config, &base_dir, seeds[0], &out)?,
        Command::Aod { .. } => aod_plan(&config, &base_dir, seeds[0], &out)?,
        Command::Simulate => simulate(&config, &base_dir, seeds[0], &out)?,
        Command::Continuous { min_atoms, .. } => continuous(&config, &base_dir, &seeds, *min_atoms, &out)?,
        Command::Analyze { records } => analyze(records, &out)?,
    }

    out.json(
        "manifest.json",
        &Manifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            command: name,
            config_path: cli.config.as_deref(),
            seed: &cli.seed,
            output_dir: &cli.out,
            format: cli.format,
            options,
            config: &config,
        },
    )
}

fn override_geometry(config: &mut ExperimentConfig, path: Option<&Path>) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    let path = std::fs::canonicalize(path)?;
    config.geometry = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => {
            let text = std::fs::read_to_string(&path)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))?
        }
        Some("csv") => GeometryConfig::SitesCsv { path },
        _ => GeometryConfig::BitmapFile { path, spacing_um: 5.0 },
    };
    Ok(())
}

fn write_rate_table(out: &Output, stem: &str, summary: &RateSummary) -> Result<()> {
    out.table(stem, &summary.per_site, |w| write_summary_csv(summary, w))
}

fn holo(config: &ExperimentConfig, base_dir: &Path, seed: u64, out: &Output) -> Result<()> {
    let hc = &config.holography;
    let map = config.geometry.build(base_dir)?;
    let targets = hc.grid.project(&map, hc.element)?;
    let n = hc.grid.n;
    let aperture = circular_aperture(n);
    let mut wgs = Wgs::new(aperture.clone(), targets.clone())?;
    let wgs_cfg = dualarray::holography::WgsConfig { seed, ..hc.wgs };
    let report = wgs.run(&wgs_cfg, None)?;
    let mut mask = report.best_mask.clone();
    out.file("wgs_trace.csv", |w| {
        writeln!(w, "iteration,rms_nonuniformity")?;
        for (k, v) in report.rms_nonuniformity.iter().enumerate() {
            writeln!(w, "{k},{v:.9}")?;
        }
        Ok(())
    })?;
    let mut summary = json!({
        "element": hc.element,
        "sites": targets.len(),
        "grid": n,
        "iterations": report.iterations,
        "best_nonuniformity": report.best_nonuniformity,
        "converged": report.converged,
    });

    if !hc.aberration.is_empty() {
        let hidden = ZernikeCoeffs::from_vec(hc.aberration.clone())?;
        let mut system = HiddenAberrationSystem::new(aperture.clone(), &hidden);
        let fit = aberration_correct(&mut system, hidden.terms().max(4), &ScanConfig::default())?;
        mask = mask.add(&zernike_phase(&fit.coeffs, n)?.values().clone())?;
        summary["aberration_fit"] = serde_json::to_value(&fit)?;
    }

    if let Some(fb) = &hc.feedback {
        let mut rng = rng_from_seed(seed.wrapping_add(1));
        let transfer: Vec<f64> = (0..targets.len()).map(|_| (1.0 + fb.transfer_spread * rng.sample::<f64, _>(StandardNormal)).max(0.05)).collect();
        let mut probe =
            SimulatedStarkProbe::new(aperture.clone(), targets.clone(), transfer, fb.kappa_mhz, fb.noise_rel, rng)?;
        let before = probe.measure(&mask)?;
        let result = atom_feedback_homogenize(&mut wgs, &mask, &before, &mut probe, fb.rounds, &wgs_cfg)?;
        let after = probe.measure(&result.mask)?;
        mask = result.mask.clone();
        let rows: Vec<Value> = targets
            .iter()
            .zip(before.iter().zip(&after))
            .map(|(t, (b, a))| json!({ "site_id": t.id, "before_mhz": b, "after_mhz": a }))
            .collect();
        out.table("stark_shifts", &rows, |w| {
            writeln!(w, "site_id,before_mhz,after_mhz")?;
            for (t, (b, a)) in targets.iter().zip(before.iter().zip(&after)) {
                writeln!(w, "{},{b:.9},{a:.9}", t.id)?;
            }
            Ok(())
        })?;
        out.file("feedback_trace.csv", |w| {
            writeln!(w, "round,rms_spread")?;
            for (k, v) in result.trace.iter().enumerate() {
                writeln!(w, "{k},{v:.9}")?;
            }
            Ok(())
        })?;
        summary["feedback"] = json!({
            "spread_before": rms_nonuniformity(&before),
            "spread_after": rms_nonuniformity(&after),
            "trace": result.trace,
        });
    }

    let intensity = far_field(&mask, &aperture, &targets)?;
    mask.write_pgm(&out.path("phase_mask.pgm"))?;
    intensity.write_pgm(&out.path("intensity.pgm"))?;
    out.table("intensity_samples", &intensity.samples, |w| intensity.write_samples_csv(w))?;
    summary["final_nonuniformity"] = json!(rms_nonuniformity(&intensity.sample_values()));
    out.json("summary.json", &summary)
}

fn unique_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    v
}

fn aod_plan(config: &ExperimentConfig, base_dir: &Path, seed: u64, out: &Output) -> Result<()> {
    let map = config.geometry.build(base_dir)?;
    let rb: Vec<_> = map.sites_of(Element::Rb).cloned().collect();
    if rb.is_empty() {
        return Err(Error::Planning("geometry has no Rb sites for the AOD array".into()));
    }
    let target = SiteMap::new(rb, map.spacing_um)?;
    let cal = config.aod.calibration;
    let x = tones_for_positions(&unique_sorted(target.sites().iter().map(|s| s.x)), Axis::X, &cal)?;
    let y = tones_for_positions(&unique_sorted(target.sites().iter().map(|s| s.y)), Axis::Y, &cal)?;
    let full = AodGrid::full(x.clone(), y.clone());
    let mask = spatial_filter_plan(&target, &full)?;
    let grid = AodGrid::with_mask(x, y, mask)?;
    out.file("tones.csv", |w| write_tones_csv(&grid, w))?;
    let sites = grid_sites(&grid)?;
    out.file("sites.csv", |w| write_sites_csv(&sites, w))?;

    let mut rng = rng_from_seed(seed);
    let disturbance: BTreeMap<u32, f64> =
        grid.mask.keep.iter().map(|&id| (id, (1.0 + config.aod.disturbance_rel * rng.sample::<f64, _>(StandardNormal)).max(0.05))).collect();
    let result = amplitude_feedback_loop(
        &grid,
        |g| Ok(g.mask.keep.iter().map(|&id| (id, g.depth(id) * disturbance[&id])).collect()),
        config.aod.feedback_rounds,
    )?;
    out.file("tones_feedback.csv", |w| write_tones_csv(&result.grid, w))?;
    out.file("aod_trace.csv", |w| {
        writeln!(w, "round,rms_spread")?;
        for (k, v) in result.trace.iter().enumerate() {
            writeln!(w, "{k},{v:.9}")?;
        }
        Ok(())
    })?;
    out.json(
        "summary.json",
        &json!({
            "x_tones": grid.x.len(),
            "y_tones": grid.y.len(),
            "sites": sites.len(),
            "spread_trace": result.trace,
        }),
    )
}

fn write_loading_loss(trials: &[Trial], out: &Output) -> Result<Value> {
    let mut summary = serde_json::Map::new();
    for e in Element::ALL {
        let tag = e.as_str().to_lowercase();
        let mut entry = serde_json::Map::new();
        if let Ok(load) = loading_efficiency(trials, e) {
            write_rate_table(out, &format!("loading_{tag}"), &load)?;
            let rates: Vec<f64> = load.per_site.iter().map(|s| s.estimate.rate).collect();
            out.file(&format!("loading_hist_{tag}.csv"), |w| write_rate_histogram(&rates, w))?;
            entry.insert("loading_mean".into(), json!(load.mean_rate));
            entry.insert("loading_pooled".into(), serde_json::to_value(load.pooled)?);
        }
        for (cond, label) in [(LossCondition::ReloadPresent, "reload"), (LossCondition::Baseline, "baseline")] {
            if let Ok(loss) = loss_rate(trials, e, cond) {
                write_rate_table(out, &format!("loss_{label}_{tag}"), &loss)?;
                entry.insert(format!("loss_{label}"), serde_json::to_value(loss.pooled)?);
            }
        }
        summary.insert(tag, Value::Object(entry));
    }
    Ok(Value::Object(summary))
}

/// Per-site rate histogram in 0.05-wide bins.
fn write_rate_histogram(rates: &[f64], w: &mut dyn Write) -> Result<()> {
    let mut bins = [0usize; 20];
    for &r in rates {
        bins[((r * 20.0).floor() as usize).min(19)] += 1;
    }
    writeln!(w, "bin_lo,bin_hi,sites")?;
    for (k, n) in bins.iter().enumerate() {
        writeln!(w, "{:.2},{:.2},{n}", k as f64 * 0.05, (k + 1) as f64 * 0.05)?;
    }
    Ok(())
}

fn simulate(config: &ExperimentConfig, base_dir: &Path, seed: u64, out: &Output) -> Result<()> {
    let map = config.geometry.build(base_dir)?;
    let world = config.world(map)?;
    let sim = &config.simulate;
    let mut seeder = rng_from_seed(seed);
    let shot_seeds: Vec<u64> = (0..sim.shots).map(|_| seeder.random::<u64>()).collect();
    let runs: Vec<_> = shot_seeds.par_iter().map(|&s| run_sequence(&sim.sequence, &world, s)).collect::<Result<_>>()?;

    let mut trials = Vec::new();
    let mut counts: BTreeMap<(Element, u32), Vec<u64>> = BTreeMap::new();
    for (shot, run) in runs.iter().enumerate() {
        for t in &run.trials {
            trials.push(Trial { cycle: shot as u64, ..t.clone() });
        }
        for img in &run.images {
            for c in &img.counts {
                counts.entry((img.element, c.site_id)).or_default().push(c.counts);
            }
        }
    }
    if let Some(first) = runs.first() {
        out.table("timeline", &first.timeline.events, |w| first.timeline.write_csv(w))?;
    }
    out.json("records.json", &trials)?;
    let mut summary = json!({ "shots": sim.shots, "trials": trials.len() });
    summary["rates"] = write_loading_loss(&trials, out)?;

    for e in Element::ALL {
        let tag = e.as_str().to_lowercase();
        let per_site: Vec<(u32, Vec<u64>)> =
            counts.iter().filter(|((el, _), _)| *el == e).map(|((_, id), v)| (*id, v.clone())).collect();
        if per_site.is_empty() {
            continue;
        }
        let all: Vec<u64> = per_site.iter().flat_map(|(_, v)| v.iter().copied()).collect();
        out.file(&format!("counts_hist_{tag}.csv"), |w| write_histogram_csv(&all, w))?;
        match fit_thresholds(&per_site) {
            Ok(fits) => {
                let th: Vec<(u32, u64)> = fits.iter().map(|(id, f)| (*id, f.threshold)).collect();
                out.table(&format!("thresholds_{tag}"), &th, |w| write_thresholds_csv(&th, w))?;
            }
            Err(err) => summary[format!("threshold_fit_{tag}")] = json!(err.to_string()),
        }
    }

    if let Some(th) = &sim.thermometry {
        let mut rng = rng_from_seed(seed.wrapping_add(7));
        let mut fits = serde_json::Map::new();
        for e in Element::ALL {
            let trap = &world.physics.traps[e];
            let t_uk = config.physics.thermal.temperature_uk[e];
            let curve = release_recapture_curve(t_uk, trap, &th.release_times_us, th.n_mc, &mut rng)?;
            let tag = e.as_str().to_lowercase();
            out.file(&format!("recapture_{tag}.csv"), |w| {
                writeln!(w, "t_us,survival,stderr")?;
                for (t, s) in th.release_times_us.iter().zip(&curve) {
                    writeln!(w, "{t},{s:.6},{:.6}", (s * (1.0 - s) / th.n_mc as f64).sqrt())?;
                }
                Ok(())
            })?;
            let points: Vec<(f64, f64)> = th.release_times_us.iter().copied().zip(curve).collect();
            let fit = fit_temperature(&points, trap, &th.fit)?;
            fits.insert(tag, json!({ "injected_uk": t_uk, "fit": fit }));
        }
        summary["thermometry"] = Value::Object(fits);
    }
    out.json("summary.json", &summary)
}

#[derive(Serialize)]
struct SeedAvailability {
    seed: u64,
    #[serde(flatten)]
    metrics: AvailabilityMetrics,
}

fn continuous(config: &ExperimentConfig, base_dir: &Path, seeds: &[u64], min_atoms: usize, out: &Output) -> Result<()> {
    let map = config.geometry.build(base_dir)?;
    let world = config.world(map)?;
    let first = seeds[0];
    let runs: Vec<_> = seeds
        .par_iter()
        .map(|&s| {
            let cfg = dualarray::sequencer::ContinuousConfig {
                record_trials: config.continuous.record_trials && s == first,
                ..config.continuous
            };
            continuous_mode(&cfg, &world, s)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SeedAvailability> = seeds
        .iter()
        .zip(&runs)
        .map(|(&seed, r)| Ok(SeedAvailability { seed, metrics: availability_metrics(&r.timeline)? }))
        .collect::<Result<_>>()?;
    out.table("availability", &rows, |w| {
        writeln!(w, "seed,min,mean,mean_rb,mean_cs")?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.4}"));
        for r in &rows {
            let m = &r.metrics;
            writeln!(w, "{},{},{:.4},{},{}", r.seed, m.min, m.mean, opt(m.mean_per_element.rb), opt(m.mean_per_element.cs))?;
        }
        Ok(())
    })?;
    let head = &runs[0];
    out.table("timeline", &head.timeline.events, |w| head.timeline.write_csv(w))?;
    out.json("records.json", &head.trials)?;
    let above = rows.iter().filter(|r| r.metrics.min > min_atoms).count();
    let mut summary = json!({
        "seeds": seeds.len(),
        "minutes": config.continuous.total_minutes,
        "min_atoms": min_atoms,
        "seeds_above": above,
        "fraction_above": above as f64 / seeds.len() as f64,
        "worst_min": rows.iter().map(|r| r.metrics.min).min(),
    });
    if !head.trials.is_empty() {
        summary["rates"] = write_loading_loss(&head.trials, out)?;
    }
    out.json("summary.json", &summary)
}

fn analyze(records: &PathBuf, out: &Output) -> Result<()> {
    let text = std::fs::read_to_string(records)?;
    let trials: Vec<Trial> = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}:{}:{}: {e}", records.display(), e.line(), e.column())))?;
    if trials.is_empty() {
        return Err(Error::Measurement("records file holds no trials".into()));
    }
    let rates = write_loading_loss(&trials, out)?;
    out.json("summary.json", &json!({ "trials": trials.len(), "rates": rates }))
}
