//! Preprocessing chain: pairwise-sum smoothing, min-max scaling fitted on
//! training consumers, then non-overlapping windows.

use serde::{Deserialize, Serialize};

use super::ConsumerSeries;
use crate::batch::{SequenceBatch, WindowOrigin};
use crate::error::{ensure, Result};

/// Sums non-overlapping pairs: `out[j] = in[2j] + in[2j+1]`. A trailing odd
/// reading is dropped.
pub fn smooth(readings: &[f64]) -> Result<Vec<f64>> {
    ensure!(
        readings.len() >= 2,
        Data,
        "smoothing needs at least 2 readings, got {}",
        readings.len()
    );
    Ok(readings.chunks_exact(2).map(|p| p[0] + p[1]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub data_min: f64,
    pub data_max: f64,
}

impl ScalerParams {
    pub fn new(data_min: f64, data_max: f64) -> Result<Self> {
        ensure!(
            data_min.is_finite() && data_max.is_finite() && data_max > data_min,
            Data,
            "scaler range [{data_min}, {data_max}] is empty or non-finite"
        );
        Ok(Self { data_min, data_max })
    }

    pub fn apply(&self, readings: &[f64]) -> Vec<f64> {
        let span = self.data_max - self.data_min;
        readings
            .iter()
            .map(|v| ((v - self.data_min) / span).clamp(0.0, 1.0))
            .collect()
    }

    pub fn invert(&self, scaled: &[f64]) -> Vec<f64> {
        let span = self.data_max - self.data_min;
        scaled.iter().map(|v| v * span + self.data_min).collect()
    }
}

/// Min-max range over every value of the given (training) series.
pub fn fit_scaler<'a, I>(series: I) -> Result<ScalerParams>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for v in s {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    ensure!(lo.is_finite(), Data, "cannot fit a scaler on no data");
    ensure!(
        hi > lo,
        Data,
        "training data is constant ({lo}); cannot scale"
    );
    ScalerParams::new(lo, hi)
}

pub fn apply_scaler(readings: &[f64], params: &ScalerParams) -> Vec<f64> {
    params.apply(readings)
}

/// Splits into `floor(T / W)` consecutive windows; the remainder is dropped.
pub fn windowize(readings: &[f64], width: usize) -> Result<Vec<Vec<f64>>> {
    ensure!(width > 0, Config, "window length must be positive");
    ensure!(
        readings.len() >= width,
        Data,
        "series of length {} is shorter than one window ({width})",
        readings.len()
    );
    Ok(readings.chunks_exact(width).map(<[f64]>::to_vec).collect())
}

/// The full chain with fixed settings. Order is always smooth -> scale -> windowize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Preprocessor {
    pub window_length: usize,
    pub smoothing: bool,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self {
            window_length: 168,
            smoothing: true,
        }
    }
}

impl Preprocessor {
    fn smoothed(&self, series: &ConsumerSeries) -> Result<Vec<f64>> {
        if self.smoothing {
            smooth(&series.readings).map_err(|e| match e {
                crate::Error::Data(m) => {
                    crate::Error::Data(format!("consumer {}: {m}", series.consumer_id))
                }
                other => other,
            })
        } else {
            Ok(series.readings.clone())
        }
    }

    /// Fits the scaler on the smoothed readings of `training` only.
    pub fn fit(&self, training: &[&ConsumerSeries]) -> Result<ScalerParams> {
        let smoothed: Vec<Vec<f64>> = training
            .iter()
            .map(|s| self.smoothed(s))
            .collect::<Result<_>>()?;
        fit_scaler(smoothed.iter().map(Vec::as_slice))
    }

    /// Windows of one consumer, labelled with their provenance.
    pub fn transform(
        &self,
        series: &ConsumerSeries,
        scaler: &ScalerParams,
    ) -> Result<SequenceBatch> {
        let scaled = scaler.apply(&self.smoothed(series)?);
        let windows = windowize(&scaled, self.window_length).map_err(|e| match e {
            crate::Error::Data(m) => {
                crate::Error::Data(format!("consumer {}: {m}", series.consumer_id))
            }
            other => other,
        })?;
        let origin = (0..windows.len())
            .map(|i| WindowOrigin {
                consumer_id: series.consumer_id.clone(),
                window_index: i,
            })
            .collect();
        SequenceBatch::new(self.window_length, windows.concat(), origin)
    }

    /// Windows of many consumers stacked in input order.
    pub fn transform_all<'a, I>(&self, series: I, scaler: &ScalerParams) -> Result<SequenceBatch>
    where
        I: IntoIterator<Item = &'a ConsumerSeries>,
    {
        let mut batch = SequenceBatch::empty(self.window_length);
        for s in series {
            batch.extend(&self.transform(s, scaler)?)?;
        }
        Ok(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothing_examples() {
        assert_eq!(smooth(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![3.0, 7.0]);
        assert_eq!(smooth(&[5.0, 1.5]).unwrap(), vec![6.5]);
        assert_eq!(smooth(&[1.0, 2.0, 3.0]).unwrap(), vec![3.0]);
        assert!(matches!(smooth(&[5.0]), Err(crate::Error::Data(_))));
        let x = [0.2, 0.4, 1.5, 0.0, 3.25, 0.5];
        assert_eq!(
            smooth(&x).unwrap().iter().sum::<f64>(),
            x.iter().sum::<f64>()
        );
    }

    #[test]
    fn scaler_examples() {
        let p = fit_scaler([&[0.0, 5.0, 10.0][..]]).unwrap();
        assert_eq!(p.apply(&[0.0, 5.0, 10.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(p.apply(&[20.0, -3.0]), vec![1.0, 0.0]);
        let x = [0.3, 7.77, 9.999];
        for (a, b) in p.invert(&p.apply(&x)).iter().zip(x) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(
            fit_scaler([&[2.0, 2.0][..]]),
            Err(crate::Error::Data(_))
        ));
    }

    #[test]
    fn windowing_examples() {
        let x: Vec<f64> = (0..504).map(f64::from).collect();
        assert_eq!(windowize(&x, 168).unwrap().len(), 3);
        let w = windowize(&x[..500], 168).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w.concat(), x[..336].to_vec());
        assert!(matches!(
            windowize(&x[..100], 168),
            Err(crate::Error::Data(_))
        ));
    }
}
