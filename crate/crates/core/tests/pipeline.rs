use dualarray::config::ExperimentConfig;
use dualarray::sequencer::run_sequence;
use dualarray::stats::{loading_efficiency, loss_rate, LossCondition, Trial};
use dualarray::Element;

fn small_config() -> ExperimentConfig {
    ExperimentConfig::from_json(r#"{"geometry": {"kind": "interleaved", "cs_rows": 6, "cs_cols": 6, "spacing_um": 5}}"#)
        .unwrap()
}

#[test]
fn sequence_records_recover_injected_rates() {
    let config = small_config();
    let map = config.geometry.build(std::path::Path::new(".")).unwrap();
    let world = config.world(map).unwrap();
    let trials: Vec<Trial> = (0..400)
        .flat_map(|shot| run_sequence(&config.simulate.sequence, &world, shot).unwrap().trials)
        .collect();
    for e in Element::ALL {
        let load = loading_efficiency(&trials, e).unwrap();
        assert!(load.pooled.contains(world.p_load[e]), "{e} loading {:?}", load.pooled);
        let loss = loss_rate(&trials, e, LossCondition::Baseline).unwrap();
        // Imaging-induced loss plus the vacuum-limited 100 ms wait between the images.
        let hold_s: f64 = 0.1;
        let survive = (1.0 - world.loss.per_cycle(e, false)) * (-hold_s / world.loss.lifetime_s[e]).exp();
        assert!(loss.pooled.contains(1.0 - survive), "{e} loss {:?} vs {}", loss.pooled, 1.0 - survive);
    }
}

#[test]
fn config_round_trips_through_json() {
    let config = small_config();
    let text = serde_json::to_string_pretty(&config).unwrap();
    assert_eq!(ExperimentConfig::from_json(&text).unwrap(), config);
}

#[test]
fn records_round_trip_through_json() {
    let config = small_config();
    let map = config.geometry.build(std::path::Path::new(".")).unwrap();
    let run = run_sequence(&config.simulate.sequence, &config.world(map).unwrap(), 3).unwrap();
    let text = serde_json::to_string(&run.trials).unwrap();
    let back: Vec<Trial> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, run.trials);
}
