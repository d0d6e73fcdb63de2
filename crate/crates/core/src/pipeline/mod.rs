//! Meter-data ingestion and preprocessing.

mod csv_io;
mod preprocess;
mod series;

pub use crate::batch::{SequenceBatch, WindowOrigin};
pub use csv_io::{
    apply_labels, format_timestamp, ingest_csv, parse_timestamp, read_labels, read_series,
    write_labels, write_series,
};
pub use preprocess::{apply_scaler, fit_scaler, smooth, windowize, Preprocessor, ScalerParams};
pub use series::{ConsumerSeries, Label, CADENCE_MINUTES, KWH_PER_KW_SLOT, SLOTS_PER_DAY};
