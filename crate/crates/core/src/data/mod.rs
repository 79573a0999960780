//! Tabular operational data: batches, CSV ingestion, first-period scaling and
//! a seeded synthetic stream generator with drift injection.

mod batch;
mod ingest;
mod scaler;
mod synth;

pub use batch::{Batch, Matrix};
pub use ingest::{
    load_csv, load_csv_reader, DatasetSchema, IngestionReport, LoadedDataset, PeriodGranularity,
};
pub use scaler::{apply_scaler, fit_scaler, scale_stream, Scaler};
pub use synth::{
    generate_synthetic_stream, Churn, DriftInjection, InjectionLedger, LabelRule, SynthConfig,
    SyntheticStream,
};
