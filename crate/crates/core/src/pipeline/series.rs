use chrono::NaiveDateTime;

use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    NonEv,
    Ev,
    Unknown,
}

impl Label {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Label::NonEv),
            1 => Some(Label::Ev),
            _ => None,
        }
    }

    /// 0 for non-EV, 1 for EV, `None` when unknown.
    pub fn code(self) -> Option<u8> {
        match self {
            Label::NonEv => Some(0),
            Label::Ev => Some(1),
            Label::Unknown => None,
        }
    }
}

/// Minutes between consecutive readings.
pub const CADENCE_MINUTES: i64 = 30;
/// Energy in kWh delivered by 1 kW over one reading interval.
pub const KWH_PER_KW_SLOT: f64 = CADENCE_MINUTES as f64 / 60.0;
pub const SLOTS_PER_DAY: usize = 48;

/// One consumer's meter readings (kWh per 30-minute interval).
#[derive(Debug, Clone, PartialEq)]
pub struct ConsumerSeries {
    pub consumer_id: String,
    /// Timestamp of the first reading.
    pub start: NaiveDateTime,
    pub readings: Vec<f64>,
    pub label: Label,
}

impl ConsumerSeries {
    pub fn new(
        consumer_id: impl Into<String>,
        start: NaiveDateTime,
        readings: Vec<f64>,
        label: Label,
    ) -> Result<Self> {
        let consumer_id = consumer_id.into();
        ensure!(
            !readings.is_empty(),
            Data,
            "consumer {consumer_id} has no readings"
        );
        ensure!(
            readings.iter().all(|v| v.is_finite() && *v >= 0.0),
            Data,
            "consumer {consumer_id} has negative or non-finite readings"
        );
        Ok(Self {
            consumer_id,
            start,
            readings,
            label,
        })
    }

    pub fn total_kwh(&self) -> f64 {
        self.readings.iter().sum()
    }
}
