//! Pipeline, generator and training behaviour on small synthetic data.

use evtae::detect::Detector;
use evtae::eval::{train_and_calibrate, ExperimentConfig, SplitConfig};
use evtae::model::{self, train, TaeConfig, TaeModel};
use evtae::pipeline::{read_series, write_series, Label, Preprocessor, SLOTS_PER_DAY};
use evtae::synth::{generate, SynthConfig};
use evtae::{Error, SequenceBatch};

fn tiny_experiment() -> ExperimentConfig {
    ExperimentConfig {
        tae: TaeConfig {
            epochs: 1,
            ..TaeConfig::tiny()
        },
        preprocess: Preprocessor {
            window_length: 16,
            smoothing: true,
        },
        split: SplitConfig {
            test_non_ev: Some(20),
            validation: Some(10),
            ..SplitConfig::default()
        },
        scorer: "squared-error".into(),
    }
}

fn tiny_data() -> Vec<evtae::pipeline::ConsumerSeries> {
    let synth = SynthConfig {
        n_non_ev: 40,
        n_ev: 6,
        days: 7,
        ..SynthConfig::tiny()
    };
    generate(&synth).unwrap().0
}

#[test]
fn test_consumers_never_reach_training_or_scaling() {
    let series = tiny_data();
    let config = tiny_experiment();
    let baseline = train_and_calibrate(&series, &config).unwrap();

    // Blow up every test consumer; nothing learned from train/validation may move.
    let mut tampered = series.clone();
    for s in &mut tampered {
        if baseline.split.test.contains(&s.consumer_id) {
            for v in &mut s.readings {
                *v = *v * 100.0 + 50.0;
            }
        }
    }
    let again = train_and_calibrate(&tampered, &config).unwrap();
    assert_eq!(again.split, baseline.split);
    assert_eq!(again.model.params, baseline.model.params);
    assert_eq!(again.model.calibration, baseline.model.calibration);
    assert_eq!(again.threshold, baseline.threshold);

    for id in &baseline.split.test {
        assert!(!baseline.split.train.contains(id) && !baseline.split.validation.contains(id));
    }
    let ev_in_training = baseline
        .split
        .train
        .iter()
        .chain(&baseline.split.validation)
        .filter(|id| {
            series
                .iter()
                .any(|s| &&s.consumer_id == id && s.label == Label::Ev)
        })
        .count();
    assert_eq!(ev_in_training, 0);
}

#[test]
fn calibrated_model_reproduces_validation_threshold_after_reload() {
    let series = tiny_data();
    let run = train_and_calibrate(&series, &tiny_experiment()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.tae");
    model::save(&run.model, &path).unwrap();
    let loaded = model::load(&path).unwrap();
    let detector = Detector::from_calibrated(&loaded).unwrap();
    let validation: Vec<_> = series
        .iter()
        .filter(|s| run.split.validation.contains(&s.consumer_id))
        .collect();
    assert_eq!(detector.calibrate(&validation).unwrap(), run.threshold);
}

#[test]
fn generator_is_deterministic_and_respects_counts() {
    let config = SynthConfig::tiny();
    let (a, log_a) = generate(&config).unwrap();
    let (b, log_b) = generate(&config).unwrap();
    assert_eq!(a, b);
    assert_eq!(log_a, log_b);
    assert_eq!(a.len(), 90);
    assert_eq!(a.iter().filter(|s| s.label == Label::Ev).count(), 10);
    for s in &a {
        assert_eq!(s.readings.len(), config.days * SLOTS_PER_DAY);
        assert!(s.readings.iter().all(|v| v.is_finite() && *v >= 0.0));
    }
    for (id, events) in &log_a.events {
        let s = a.iter().find(|s| &s.consumer_id == id).unwrap();
        assert_eq!(s.label, Label::Ev);
        assert!(!events.is_empty());
        for e in events {
            assert!(e.absolute_start() + e.duration_slots <= s.readings.len());
        }
    }
    let other = generate(&SynthConfig { seed: 7, ..config }).unwrap().0;
    assert_ne!(a, other);
}

#[test]
fn no_ev_population_and_no_signal_control() {
    let (series, log) = generate(&SynthConfig {
        n_ev: 0,
        ..SynthConfig::tiny()
    })
    .unwrap();
    assert!(series.iter().all(|s| s.label == Label::NonEv));
    assert!(log.events.is_empty());

    let mut config = SynthConfig::tiny();
    config.ev_profile.charge_probability = 0.0;
    let (series, log) = generate(&config).unwrap();
    assert_eq!(series.iter().filter(|s| s.label == Label::Ev).count(), 10);
    assert!(log.events.values().all(Vec::is_empty));
}

#[test]
fn full_preset_population() {
    let c = SynthConfig::full();
    assert_eq!((c.n_non_ev, c.n_ev, c.consumer_count()), (1106, 139, 1245));
}

#[test]
fn readings_csv_round_trips() {
    let (series, _) = generate(&SynthConfig {
        n_non_ev: 3,
        n_ev: 2,
        days: 2,
        ..SynthConfig::tiny()
    })
    .unwrap();
    let mut buf = Vec::new();
    write_series(&series, &mut buf).unwrap();
    let back = read_series(buf.as_slice()).unwrap();
    assert_eq!(back.len(), series.len());
    for (a, b) in back.iter().zip(&series) {
        assert_eq!(a.consumer_id, b.consumer_id);
        assert_eq!(a.start, b.start);
        assert_eq!(a.readings, b.readings);
        // Labels travel in their own file.
        assert_eq!(a.label, Label::Unknown);
    }
}

fn periodic_windows(n: usize, w: usize) -> SequenceBatch {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..w)
                .map(|t| 0.5 + 0.4 * ((t + i) as f64 * std::f64::consts::TAU / 8.0).sin())
                .collect()
        })
        .collect();
    SequenceBatch::from_rows(&rows).unwrap()
}

#[test]
fn training_reduces_the_loss() {
    let data = periodic_windows(64, 16);
    let config = TaeConfig {
        epochs: 30,
        batch_size: 8,
        learning_rate: 5e-3,
        ..TaeConfig::tiny()
    };
    let (_, report) = train(&data, Some(&data), &config).unwrap();
    let first = report.train_loss[0];
    let last = *report.train_loss.last().unwrap();
    assert!(last < 0.5 * first, "loss went from {first} to {last}");
    assert_eq!(report.val_loss.len(), 30);
}

#[test]
fn zero_epochs_saves_the_initialization() {
    let config = TaeConfig {
        epochs: 0,
        ..TaeConfig::tiny()
    };
    let (model, report) = train(&periodic_windows(4, 16), None, &config).unwrap();
    assert!(report.train_loss.is_empty());
    assert_eq!(model.params, TaeModel::init(&config).unwrap().params);
}

#[test]
fn divergence_reports_a_one_based_epoch() {
    let config = TaeConfig {
        epochs: 5,
        learning_rate: 1e300,
        ..TaeConfig::tiny()
    };
    match train(&periodic_windows(8, 16), None, &config) {
        Err(Error::Divergence { epoch, .. }) => assert!((1..=5).contains(&epoch)),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn window_length_mismatch_is_a_config_error() {
    let model = TaeModel::init(&TaeConfig::tiny()).unwrap();
    let batch = periodic_windows(2, 32);
    assert_eq!(
        model.forward(&batch, false, 0).unwrap_err().class(),
        evtae::ErrorClass::Config
    );
}
