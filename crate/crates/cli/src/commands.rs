use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use evtae::detect::{read_report, write_report, write_window_scores, Detector, ScorerRegistry};
use evtae::diagnostics::gradient_suite;
use evtae::eval::{fmt_opt, run_ablation, split_consumers, train_and_calibrate, EvalReport};
use evtae::losses::LossWeights;
use evtae::model;
use evtae::pipeline::{
    apply_labels, ingest_csv, read_labels, write_labels, write_series, ConsumerSeries, Label,
};
use evtae::synth::{generate, SynthConfig};
use evtae::{Error, Result};

use crate::config::{GridEntry, RunConfig};
use crate::{
    AblateArgs, Cli, Command, DataArgs, DetectArgs, EvalArgs, GenArgs, GradcheckArgs, LossArgs,
    TrainArgs,
};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn create(dir: &Path, name: &str) -> Result<File> {
    let path = dir.join(name);
    File::create(&path).map_err(io_err(&path))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(io_err(path))
}

fn required(flag: &str, value: Option<PathBuf>) -> Result<PathBuf> {
    value.ok_or_else(|| Error::Config(format!("--{flag} is required (or set it under [paths])")))
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.set_seed(seed);
    }
    let out = cli.out_dir;
    match cli.command {
        Command::Gen(args) => gen(config, &out, args),
        Command::Preprocess(args) => preprocess(config, &out, args),
        Command::Train(args) => train(config, &out, args),
        Command::Detect(args) => detect(config, &out, args),
        Command::Eval(args) => eval(config, &out, args),
        Command::Ablate(args) => ablate(config, &out, args),
        Command::Gradcheck(args) => gradcheck(config, &out, args),
    }
}

fn gen(mut config: RunConfig, out: &Path, args: GenArgs) -> Result<()> {
    if let Some(name) = &args.preset {
        let seed = config.synth.seed;
        config.synth = SynthConfig::preset(name)?;
        config.synth.seed = seed;
    }
    let s = &mut config.synth;
    if let Some(n) = args.n_ev {
        s.n_ev = n;
    }
    if let Some(n) = args.n_non_ev {
        s.n_non_ev = n;
    }
    if let Some(d) = args.days {
        s.days = d;
    }
    if let Some(d) = &args.demand {
        s.ev_profile.demand_class = d.parse()?;
    }
    if let Some(p) = args.charge_prob {
        s.ev_profile.charge_probability = p;
    }
    let (series, log) = generate(&config.synth)?;
    config.write_snapshot(out)?;
    write_series(&series, create(out, "dataset.csv")?)?;
    write_labels(&series, create(out, "labels.csv")?)?;
    log.write_csv(create(out, "injections.csv")?)?;

    let n_ev = series.iter().filter(|s| s.label == Label::Ev).count();
    let events: usize = log.events.values().map(Vec::len).sum();
    println!(
        "generated {} consumers ({} non-EV, {n_ev} EV), {} days, {events} charging events -> {}",
        series.len(),
        series.len() - n_ev,
        config.synth.days,
        out.display()
    );
    Ok(())
}

/// Reads the readings and attaches labels from `--labels`, or from
/// `labels.csv` beside the readings.
fn load_labelled(config: &mut RunConfig, args: DataArgs) -> Result<Vec<ConsumerSeries>> {
    if args.data.is_some() {
        config.paths.data = args.data;
    }
    if args.labels.is_some() {
        config.paths.labels = args.labels;
    }
    let data = required("data", config.paths.data.clone())?;
    let labels = config.paths.labels.clone().unwrap_or_else(|| {
        data.parent()
            .unwrap_or_else(|| Path::new("."))
            .join("labels.csv")
    });
    config.paths.labels = Some(labels.clone());
    let mut series = ingest_csv(&data)?;
    apply_labels(&mut series, &read_labels(open(&labels)?)?);
    Ok(series)
}

fn preprocess(mut config: RunConfig, out: &Path, args: DataArgs) -> Result<()> {
    let series = load_labelled(&mut config, args)?;
    let split = split_consumers(&series, &config.split)?;
    let pre = config.preprocess;
    let by_id: BTreeMap<&str, &ConsumerSeries> =
        series.iter().map(|s| (s.consumer_id.as_str(), s)).collect();
    let train: Vec<&ConsumerSeries> = split.train.iter().map(|id| by_id[id.as_str()]).collect();
    let scaler = pre.fit(&train)?;

    config.write_snapshot(out)?;
    split.write_csv(&out.join("split.csv"))?;
    let mut w = std::io::BufWriter::new(create(out, "scaler.csv")?);
    let path = out.join("scaler.csv");
    writeln!(
        w,
        "data_min,data_max\n{},{}",
        scaler.data_min, scaler.data_max
    )
    .map_err(io_err(&path))?;

    let path = out.join("windows.csv");
    let mut w = std::io::BufWriter::new(create(out, "windows.csv")?);
    let cols: Vec<String> = (0..pre.window_length).map(|i| format!("v{i}")).collect();
    writeln!(w, "consumer_id,role,window_index,{}", cols.join(",")).map_err(io_err(&path))?;
    let mut n_windows = 0;
    for s in &series {
        let Some(role) = split.role(&s.consumer_id) else {
            continue;
        };
        let batch = pre.transform(s, &scaler)?;
        for (i, row) in batch.rows().enumerate() {
            let vals: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(w, "{},{role},{i},{}", s.consumer_id, vals.join(","))
                .map_err(io_err(&path))?;
            n_windows += 1;
        }
    }
    w.flush().map_err(io_err(&path))?;
    println!(
        "{n_windows} windows of length {}; scaler fitted on {} training consumers -> {}",
        pre.window_length,
        train.len(),
        out.display()
    );
    Ok(())
}

fn loss_weights(name: &str) -> Result<LossWeights> {
    match name {
        "l2" => Ok(LossWeights::L2),
        "dtw" => Ok(LossWeights::DTW),
        "cosine" => Ok(LossWeights::COSINE),
        _ => Err(Error::Config(format!(
            "unknown loss '{name}' (l2, dtw, cosine)"
        ))),
    }
}

fn apply_loss_args(config: &mut RunConfig, args: &LossArgs) -> Result<()> {
    if let Some(name) = &args.loss {
        config.tae.loss_weights = loss_weights(name)?;
    }
    if let Some(l) = &args.lambda {
        config.tae.loss_weights = l.parse()?;
    }
    if let Some(g) = args.gamma {
        config.tae.gamma = g;
    }
    if let Some(e) = args.epochs {
        config.tae.epochs = e;
    }
    Ok(())
}

fn train(mut config: RunConfig, out: &Path, args: TrainArgs) -> Result<()> {
    apply_loss_args(&mut config, &args.loss)?;
    let series = load_labelled(&mut config, args.data)?;
    let run = train_and_calibrate(&series, &config.experiment())?;
    config.write_snapshot(out)?;
    run.write_outputs(out)?;

    let last = |v: &[f64]| {
        v.last()
            .map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
    };
    println!(
        "trained {} epochs ({}) on {} consumers in {:.2} s; final train loss {}, validation loss {}",
        run.train_report.epochs(),
        config.tae.loss_weights,
        run.split.train.len(),
        run.train_seconds,
        last(&run.train_report.train_loss),
        last(&run.train_report.val_loss),
    );
    println!(
        "threshold {} -> {}",
        run.threshold,
        out.join("model.tae").display()
    );
    Ok(())
}

fn detect(mut config: RunConfig, out: &Path, args: DetectArgs) -> Result<()> {
    if args.model.is_some() {
        config.paths.model = args.model;
    }
    if args.data.is_some() {
        config.paths.data = args.data;
    }
    if args.validation.is_some() {
        config.paths.validation = args.validation;
    }
    let model_path = required("model", config.paths.model.clone())?;
    let data = required("data", config.paths.data.clone())?;
    let model = model::load(&model_path)?;
    let scorer = ScorerRegistry::default().build(&config.scorer, &model.config)?;
    let detector = Detector::from_calibrated(&model)?.with_scorer(scorer);

    let threshold = match &config.paths.validation {
        Some(path) => {
            let validation = ingest_csv(path)?;
            detector.calibrate(&validation.iter().collect::<Vec<_>>())?
        }
        None => model
            .calibration
            .map(|c| c.threshold)
            .expect("checked by the detector"),
    };
    let series = ingest_csv(&data)?;
    let reports = detector.classify_all(&series.iter().collect::<Vec<_>>(), threshold)?;
    config.write_snapshot(out)?;
    write_report(&reports, create(out, "report.csv")?)?;
    write_window_scores(&reports, create(out, "window_scores.csv")?)?;
    let flagged = reports.iter().filter(|r| r.decision).count();
    println!(
        "{flagged} of {} consumers flagged (threshold {threshold}) -> {}",
        reports.len(),
        out.display()
    );
    Ok(())
}

fn eval(mut config: RunConfig, out: &Path, args: EvalArgs) -> Result<()> {
    if args.report.is_some() {
        config.paths.report = args.report;
    }
    if args.labels.is_some() {
        config.paths.labels = args.labels;
    }
    let report = read_report(open(&required("report", config.paths.report.clone())?)?)?;
    let labels = read_labels(open(&required("labels", config.paths.labels.clone())?)?)?;
    let mut decisions = Vec::with_capacity(report.len());
    let mut scores = Vec::with_capacity(report.len());
    let mut truth = Vec::with_capacity(report.len());
    for row in &report {
        let label = labels
            .get(&row.consumer_id)
            .copied()
            .filter(|l| *l != Label::Unknown)
            .ok_or_else(|| Error::Data(format!("no label for consumer {}", row.consumer_id)))?;
        decisions.push(row.decision == 1);
        scores.push(row.at_score);
        truth.push(label);
    }
    let eval = EvalReport::from_scores(&decisions, &scores, &truth)?;
    config.write_snapshot(out)?;
    eval.write_csv(create(out, "eval.csv")?)?;
    eval.write_roc_csv(create(out, "roc.csv")?)?;
    let table = eval.table();
    let path = out.join("eval.txt");
    fs::write(&path, &table).map_err(io_err(&path))?;
    print!("{table}");
    Ok(())
}

fn ablate(mut config: RunConfig, out: &Path, args: AblateArgs) -> Result<()> {
    if let Some(e) = args.epochs {
        config.tae.epochs = e;
    }
    let gamma = args.gamma.unwrap_or(config.tae.gamma);
    if args.paper_grid {
        config.ablation.grid = LossWeights::ablation_grid()
            .into_iter()
            .map(|w| GridEntry::new(w, gamma))
            .collect();
    } else if !args.lambdas.is_empty() {
        config.ablation.grid = args
            .lambdas
            .iter()
            .map(|l| Ok(GridEntry::new(l.parse()?, gamma)))
            .collect::<Result<_>>()?;
    } else if config.ablation.grid.is_empty() {
        config.ablation.grid = vec![GridEntry::new(config.tae.loss_weights, gamma)];
    }
    let grid: Vec<(LossWeights, f64)> = config
        .ablation
        .grid
        .iter()
        .map(|e| Ok((e.weights()?, e.gamma)))
        .collect::<Result<_>>()?;

    let series = load_labelled(&mut config, args.data)?;
    let rows = run_ablation(&series, &config.experiment(), &grid)?;
    config.write_snapshot(out)?;

    let path = out.join("ablation.csv");
    let mut w = std::io::BufWriter::new(create(out, "ablation.csv")?);
    writeln!(
        w,
        "lambda1,lambda2,lambda3,gamma,precision,recall,f1,auc,train_seconds"
    )
    .map_err(io_err(&path))?;
    for r in &rows {
        let p = &r.eval.prf;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{:.3}",
            r.weights.lambda1,
            r.weights.lambda2,
            r.weights.lambda3,
            r.gamma,
            fmt_opt(p.precision),
            fmt_opt(p.recall),
            fmt_opt(p.f1),
            r.eval.auc,
            r.train_seconds
        )
        .map_err(io_err(&path))?;
        println!(
            "{:<36} F1 {:>7}  AUC {:.4}  {:.1} s",
            r.weights.to_string(),
            evtae::eval::pct(p.f1),
            r.eval.auc,
            r.train_seconds
        );
    }
    w.flush().map_err(io_err(&path))
}

fn gradcheck(config: RunConfig, out: &Path, args: GradcheckArgs) -> Result<()> {
    let suite = gradient_suite(args.instances, config.tae.seed)?;
    config.write_snapshot(out)?;
    let path = out.join("gradcheck.csv");
    let mut w = std::io::BufWriter::new(create(out, "gradcheck.csv")?);
    writeln!(w, "component,instances,max_relative_error,tolerance,passed")
        .map_err(io_err(&path))?;
    for e in &suite {
        writeln!(
            w,
            "{},{},{:e},{:e},{}",
            e.component,
            e.instances,
            e.max_relative_error,
            e.tolerance,
            e.passed()
        )
        .map_err(io_err(&path))?;
        println!(
            "{:<4} {:<22} max rel err {:.3e} (tolerance {:.0e}, {} instances)",
            if e.passed() { "ok" } else { "FAIL" },
            e.component,
            e.max_relative_error,
            e.tolerance,
            e.instances
        );
    }
    w.flush().map_err(io_err(&path))?;
    let failed: Vec<&str> = suite
        .iter()
        .filter(|e| !e.passed())
        .map(|e| e.component.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "gradient check failed for {}",
            failed.join(", ")
        )))
    }
}
