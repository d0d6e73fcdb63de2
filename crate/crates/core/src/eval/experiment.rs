//! Train on non-EV consumers, calibrate on held-out non-EV consumers,
//! classify the test consumers and score the result.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalReport;
use crate::detect::{write_report, write_window_scores, AnomalyReport, Detector, ScorerRegistry};
use crate::error::{ensure, Error, Result};
use crate::losses::LossWeights;
use crate::model::{self, train, Calibration, TaeConfig, TaeModel, TrainReport};
use crate::nn::derive_seed;
use crate::pipeline::{ConsumerSeries, Label, Preprocessor};

/// Consumer-level split of the non-EV population. Explicit counts win over
/// fractions; every EV consumer goes to the test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub test_non_ev: Option<usize>,
    pub validation: Option<usize>,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.3,
            validation_fraction: 0.15,
            test_non_ev: None,
            validation: None,
            seed: 42,
        }
    }
}

impl SplitConfig {
    /// 60 non-EV test and 40 validation consumers, for the `small` synthetic preset.
    pub fn small() -> Self {
        Self {
            test_non_ev: Some(60),
            validation: Some(40),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl DataSplit {
    pub fn role(&self, id: &str) -> Option<&'static str> {
        if self.train.iter().any(|i| i == id) {
            Some("train")
        } else if self.validation.iter().any(|i| i == id) {
            Some("validation")
        } else if self.test.iter().any(|i| i == id) {
            Some("test")
        } else {
            None
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("consumer_id,role\n");
        for (role, ids) in [
            ("train", &self.train),
            ("validation", &self.validation),
            ("test", &self.test),
        ] {
            for id in ids {
                text.push_str(&format!("{id},{role}\n"));
            }
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Deterministic split; consumers with unknown labels are left out.
pub fn split_consumers(series: &[ConsumerSeries], config: &SplitConfig) -> Result<DataSplit> {
    let mut non_ev: Vec<String> = series
        .iter()
        .filter(|s| s.label == Label::NonEv)
        .map(|s| s.consumer_id.clone())
        .collect();
    let ev: Vec<String> = series
        .iter()
        .filter(|s| s.label == Label::Ev)
        .map(|s| s.consumer_id.clone())
        .collect();
    non_ev.sort();
    non_ev.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
        config.seed,
        0x5b17,
    )));

    let n = non_ev.len();
    let n_test = config
        .test_non_ev
        .unwrap_or_else(|| (n as f64 * config.test_fraction).round() as usize);
    ensure!(
        n_test <= n,
        Data,
        "asked for {n_test} non-EV test consumers, only {n} exist"
    );
    let n_val = config
        .validation
        .unwrap_or_else(|| ((n - n_test) as f64 * config.validation_fraction).round() as usize);
    ensure!(
        n_test + n_val < n,
        Data,
        "split leaves no training consumers ({n} non-EV, {n_test} test, {n_val} validation)"
    );
    ensure!(n_val > 0, Data, "split leaves no validation consumers");

    let mut test = non_ev[..n_test].to_vec();
    let validation = non_ev[n_test..n_test + n_val].to_vec();
    let train = non_ev[n_test + n_val..].to_vec();
    test.extend(ev);
    test.sort();
    let mut train = train;
    train.sort();
    let mut validation = validation;
    validation.sort();
    Ok(DataSplit {
        train,
        validation,
        test,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub tae: TaeConfig,
    pub preprocess: Preprocessor,
    pub split: SplitConfig,
    /// Registered window scorer name.
    pub scorer: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            tae: TaeConfig::default(),
            preprocess: Preprocessor::default(),
            split: SplitConfig::default(),
            scorer: "squared-error".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub split: DataSplit,
    pub model: TaeModel,
    pub train_report: TrainReport,
    pub threshold: f64,
    pub validation_scores: Vec<(String, f64)>,
    pub reports: Vec<AnomalyReport>,
    pub test_labels: Vec<Label>,
    pub eval: EvalReport,
    pub train_seconds: f64,
}

fn select<'a>(series: &'a [ConsumerSeries], ids: &[String]) -> Vec<&'a ConsumerSeries> {
    ids.iter()
        .filter_map(|id| series.iter().find(|s| &s.consumer_id == id))
        .collect()
}

/// A trained and calibrated model, before any test consumer is scored.
#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub split: DataSplit,
    /// Carries the calibration record (scaler, smoothing flag, threshold).
    pub model: TaeModel,
    pub train_report: TrainReport,
    pub threshold: f64,
    pub validation_scores: Vec<(String, f64)>,
    pub train_seconds: f64,
}

fn check_windows(config: &ExperimentConfig) -> Result<()> {
    ensure!(
        config.preprocess.window_length == config.tae.window_length,
        Config,
        "preprocessing window {} differs from model window {}",
        config.preprocess.window_length,
        config.tae.window_length
    );
    Ok(())
}

/// Splits, fits the scaler on training non-EV consumers, trains, and sets
/// the threshold to the mean validation score.
pub fn train_and_calibrate(
    series: &[ConsumerSeries],
    config: &ExperimentConfig,
) -> Result<TrainedRun> {
    check_windows(config)?;
    let split = split_consumers(series, &config.split)?;
    let train_series = select(series, &split.train);
    let val_series = select(series, &split.validation);

    let pre = config.preprocess;
    let scaler = pre.fit(&train_series)?;
    let train_batch = pre.transform_all(train_series.iter().copied(), &scaler)?;
    let val_batch = pre.transform_all(val_series.iter().copied(), &scaler)?;

    let start = Instant::now();
    let (mut model, train_report) = train(&train_batch, Some(&val_batch), &config.tae)?;
    let train_seconds = start.elapsed().as_secs_f64();

    let scorer = ScorerRegistry::default().build(&config.scorer, &config.tae)?;
    let detector = Detector::new(&model, pre, scaler, scorer)?;
    let validation_scores: Vec<(String, f64)> = val_series
        .iter()
        .map(|s| Ok((s.consumer_id.clone(), detector.consumer_score(s)?)))
        .collect::<Result<_>>()?;
    let threshold = crate::detect::calibrate_threshold(
        &validation_scores.iter().map(|v| v.1).collect::<Vec<_>>(),
    )?;
    model.calibration = Some(Calibration {
        scaler,
        smoothing: pre.smoothing,
        threshold,
    });
    Ok(TrainedRun {
        split,
        model,
        train_report,
        threshold,
        validation_scores,
        train_seconds,
    })
}

impl TrainedRun {
    /// `model.tae`, `train_report.csv`, `split.csv`, `validation_scores.csv`
    /// and `timing.csv`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        model::save(&self.model, &dir.join("model.tae"))?;
        let p = dir.join("train_report.csv");
        write_train_report(
            &self.train_report,
            fs::File::create(&p).map_err(|e| Error::io(&p, e))?,
        )?;
        self.split.write_csv(&dir.join("split.csv"))?;
        let mut val = String::from("consumer_id,at_score\n");
        for (id, s) in &self.validation_scores {
            val.push_str(&format!("{id},{s}\n"));
        }
        let p = dir.join("validation_scores.csv");
        fs::write(&p, val).map_err(|e| Error::io(&p, e))?;
        let p = dir.join("timing.csv");
        fs::write(&p, format!("train_seconds\n{}\n", self.train_seconds))
            .map_err(|e| Error::io(&p, e))
    }
}

pub fn run_experiment(
    series: &[ConsumerSeries],
    config: &ExperimentConfig,
) -> Result<ExperimentResult> {
    let run = train_and_calibrate(series, config)?;
    let test_series = select(series, &run.split.test);
    let scorer = ScorerRegistry::default().build(&config.scorer, &config.tae)?;
    let calibration = run.model.calibration.as_ref().expect("calibrated above");
    let detector = Detector::new(&run.model, config.preprocess, calibration.scaler, scorer)?;
    let reports = detector.classify_all(&test_series, run.threshold)?;

    let test_labels: Vec<Label> = test_series.iter().map(|s| s.label).collect();
    let decisions: Vec<bool> = reports.iter().map(|r| r.decision).collect();
    let scores: Vec<f64> = reports.iter().map(|r| r.total_score).collect();
    let eval = EvalReport::from_scores(&decisions, &scores, &test_labels)?;
    Ok(ExperimentResult {
        split: run.split,
        model: run.model,
        train_report: run.train_report,
        threshold: run.threshold,
        validation_scores: run.validation_scores,
        reports,
        test_labels,
        eval,
        train_seconds: run.train_seconds,
    })
}

impl ExperimentResult {
    /// Writes every artifact of the run into `dir`. All files are a pure
    /// function of the inputs except `timing.csv`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| {
            let p = dir.join(name);
            fs::File::create(&p).map_err(|e| Error::io(p, e))
        };
        model::save(&self.model, &dir.join("model.tae"))?;
        write_train_report(&self.train_report, create("train_report.csv")?)?;
        write_report(&self.reports, create("report.csv")?)?;
        write_window_scores(&self.reports, create("window_scores.csv")?)?;
        self.eval.write_csv(create("eval.csv")?)?;
        self.eval.write_roc_csv(create("roc.csv")?)?;
        self.split.write_csv(&dir.join("split.csv"))?;
        let mut val = String::from("consumer_id,at_score\n");
        for (id, s) in &self.validation_scores {
            val.push_str(&format!("{id},{s}\n"));
        }
        let p = dir.join("validation_scores.csv");
        fs::write(&p, val).map_err(|e| Error::io(&p, e))?;
        let p = dir.join("eval.txt");
        fs::write(
            &p,
            format!("threshold {}\n\n{}", self.threshold, self.eval.table()),
        )
        .map_err(|e| Error::io(&p, e))?;
        let p = dir.join("timing.csv");
        fs::write(&p, format!("train_seconds\n{}\n", self.train_seconds))
            .map_err(|e| Error::io(&p, e))
    }
}

/// `epoch,train_loss,val_loss` (Fig.-8-style loss curves).
pub fn write_train_report<W: std::io::Write>(report: &TrainReport, out: W) -> Result<()> {
    use std::io::Write as _;
    let mut w = std::io::BufWriter::new(out);
    let io = |e: std::io::Error| Error::io("<train report csv>", e);
    writeln!(w, "epoch,train_loss,val_loss").map_err(io)?;
    for (i, t) in report.train_loss.iter().enumerate() {
        let v = report
            .val_loss
            .get(i)
            .map_or_else(String::new, |v| v.to_string());
        writeln!(w, "{},{t},{v}", i + 1).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub weights: LossWeights,
    pub gamma: f64,
    pub eval: EvalReport,
    pub train_seconds: f64,
}

/// One experiment per loss-weight combination, same data and seed.
pub fn run_ablation(
    series: &[ConsumerSeries],
    base: &ExperimentConfig,
    grid: &[(LossWeights, f64)],
) -> Result<Vec<AblationRow>> {
    grid.iter()
        .map(|(weights, gamma)| {
            let mut cfg = base.clone();
            cfg.tae.loss_weights = *weights;
            cfg.tae.gamma = *gamma;
            let r = run_experiment(series, &cfg)?;
            Ok(AblationRow {
                weights: *weights,
                gamma: *gamma,
                eval: r.eval,
                train_seconds: r.train_seconds,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    #[test]
    fn split_is_disjoint_and_complete() {
        let (series, _) = generate(&SynthConfig::tiny()).unwrap();
        let split = split_consumers(&series, &SplitConfig::default()).unwrap();
        let all: usize = split.train.len() + split.validation.len() + split.test.len();
        assert_eq!(all, series.len());
        assert_eq!(split.test.len(), 24 + 10);
        assert_eq!(split.validation.len(), 8);
        for id in &split.train {
            assert!(!split.validation.contains(id) && !split.test.contains(id));
        }
        let again = split_consumers(&series, &SplitConfig::default()).unwrap();
        assert_eq!(split, again);
    }

    #[test]
    fn small_split_counts() {
        let (series, _) = generate(&SynthConfig {
            days: 7,
            ..SynthConfig::small()
        })
        .unwrap();
        let split = split_consumers(&series, &SplitConfig::small()).unwrap();
        assert_eq!(
            (split.train.len(), split.validation.len(), split.test.len()),
            (160, 40, 100)
        );
    }
}
