//! Line-oriented text format for trained models.
//!
//! ```text
//! evtae-model
//! format_version 1
//! config.window_length 168
//! ...
//! calibration.threshold 1.2345678901234567e0      (optional block)
//! tensor encoder.0.conv1.v 32x1x7 <values...>
//! ...
//! end
//! ```
//!
//! Reals are written with 17 significant digits, which round-trips every
//! finite `f64` exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Calibration, TaeConfig, TaeModel, FORMAT_VERSION};
use crate::error::{ensure, Error, Result};
use crate::losses::LossWeights;
use crate::pipeline::ScalerParams;

const MAGIC: &str = "evtae-model";

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_list<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

pub fn to_text(model: &TaeModel) -> String {
    let c = &model.config;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} {v}");
    };
    kv("format_version", model.format_version.to_string());
    kv("config.window_length", c.window_length.to_string());
    kv("config.kernel_size", c.kernel_size.to_string());
    kv("config.filters", fmt_list(&c.filters));
    kv("config.dilations", fmt_list(&c.dilations));
    kv("config.dropout_rate", fmt_real(c.dropout_rate));
    kv("config.learning_rate", fmt_real(c.learning_rate));
    kv("config.epochs", c.epochs.to_string());
    kv("config.batch_size", c.batch_size.to_string());
    let w = &c.loss_weights;
    kv(
        "config.loss_weights",
        [w.lambda1, w.lambda2, w.lambda3].map(fmt_real).join(","),
    );
    kv("config.gamma", fmt_real(c.gamma));
    kv("config.seed", c.seed.to_string());
    if let Some(cal) = &model.calibration {
        kv("calibration.scaler_min", fmt_real(cal.scaler.data_min));
        kv("calibration.scaler_max", fmt_real(cal.scaler.data_max));
        kv("calibration.smoothing", u8::from(cal.smoothing).to_string());
        kv("calibration.threshold", fmt_real(cal.threshold));
    }
    let mut text = format!("{MAGIC}\n{out}");
    for (name, conv) in model.params.convs() {
        for ((tname, values), shape) in conv.tensors().into_iter().zip(conv.shapes()) {
            let dims = shape
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("x");
            let _ = write!(text, "tensor {name}.{tname} {dims}");
            for v in values {
                text.push(' ');
                text.push_str(&fmt_real(*v));
            }
            text.push('\n');
        }
    }
    text.push_str("end\n");
    text
}

fn parse<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Format(format!("bad value for {key}: '{raw}'")))
}

fn parse_list<T: std::str::FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',').map(|p| parse(key, p)).collect()
}

pub fn from_text(text: &str) -> Result<TaeModel> {
    let mut lines = text.lines();
    ensure!(
        lines.next() == Some(MAGIC),
        Format,
        "missing '{MAGIC}' header"
    );

    let mut header: BTreeMap<&str, &str> = BTreeMap::new();
    let mut tensors: BTreeMap<&str, (&str, Vec<&str>)> = BTreeMap::new();
    let mut ended = false;
    for line in lines {
        if line == "end" {
            ended = true;
            break;
        }
        let mut parts = line.split(' ');
        let key = parts.next().unwrap_or_default();
        if key == "tensor" {
            let name = parts
                .next()
                .ok_or_else(|| Error::Format("tensor line without a name".into()))?;
            let shape = parts
                .next()
                .ok_or_else(|| Error::Format(format!("tensor {name} has no shape")))?;
            tensors.insert(name, (shape, parts.collect()));
        } else {
            let value = parts
                .next()
                .ok_or_else(|| Error::Format(format!("header key {key} has no value")))?;
            header.insert(key, value);
        }
    }
    ensure!(ended, Format, "model file is truncated (no 'end' marker)");

    let get = |k: &str| {
        header
            .get(k)
            .copied()
            .ok_or_else(|| Error::Format(format!("missing header key {k}")))
    };
    let version: u32 = parse("format_version", get("format_version")?)?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let lw: Vec<f64> = parse_list("config.loss_weights", get("config.loss_weights")?)?;
    ensure!(
        lw.len() == 3,
        Format,
        "config.loss_weights needs three values"
    );
    let config = TaeConfig {
        window_length: parse("config.window_length", get("config.window_length")?)?,
        kernel_size: parse("config.kernel_size", get("config.kernel_size")?)?,
        filters: parse_list("config.filters", get("config.filters")?)?,
        dilations: parse_list("config.dilations", get("config.dilations")?)?,
        dropout_rate: parse("config.dropout_rate", get("config.dropout_rate")?)?,
        learning_rate: parse("config.learning_rate", get("config.learning_rate")?)?,
        epochs: parse("config.epochs", get("config.epochs")?)?,
        batch_size: parse("config.batch_size", get("config.batch_size")?)?,
        loss_weights: LossWeights {
            lambda1: lw[0],
            lambda2: lw[1],
            lambda3: lw[2],
        },
        gamma: parse("config.gamma", get("config.gamma")?)?,
        seed: parse("config.seed", get("config.seed")?)?,
    };
    config
        .validate()
        .map_err(|e| Error::Format(format!("invalid stored config: {e}")))?;

    let calibration = match header.get("calibration.threshold") {
        None => None,
        Some(raw) => Some(Calibration {
            scaler: ScalerParams::new(
                parse("calibration.scaler_min", get("calibration.scaler_min")?)?,
                parse("calibration.scaler_max", get("calibration.scaler_max")?)?,
            )
            .map_err(|e| Error::Format(format!("invalid stored scaler: {e}")))?,
            smoothing: parse::<u8>("calibration.smoothing", get("calibration.smoothing")?)? != 0,
            threshold: parse("calibration.threshold", raw)?,
        }),
    };

    let mut model = TaeModel::init(&config)?;
    model.calibration = calibration;
    let mut used = 0;
    for (name, conv) in model.params.convs_mut() {
        let shapes = conv.shapes();
        for ((tname, dest), shape) in conv.tensors_mut().into_iter().zip(shapes) {
            let full = format!("{name}.{tname}");
            let (dims, values) = tensors
                .get(full.as_str())
                .ok_or_else(|| Error::Format(format!("missing tensor {full}")))?;
            let expected = shape
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("x");
            ensure!(
                *dims == expected,
                Format,
                "tensor {full} has shape {dims}, architecture needs {expected}"
            );
            ensure!(
                values.len() == dest.len(),
                Format,
                "tensor {full} has {} values, expected {}",
                values.len(),
                dest.len()
            );
            for (d, raw) in dest.iter_mut().zip(values) {
                *d = parse(&full, raw)?;
            }
            used += 1;
        }
        conv.validate()
            .map_err(|e| Error::Format(format!("{name}: {e}")))?;
    }
    ensure!(
        used == tensors.len(),
        Format,
        "file has {} tensors, architecture uses {used}",
        tensors.len()
    );
    Ok(model)
}

pub fn save(model: &TaeModel, path: &Path) -> Result<()> {
    fs::write(path, to_text(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<TaeModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text)
}
