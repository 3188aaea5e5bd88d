//! Dataset ingestion, configuration, and the Adam training loop.

mod adam;
mod config;
mod data;
mod trainer;

pub use adam::Adam;
pub use config::TrainConfig;
pub use data::{load_vocab, split, BasketDataset, DEFAULT_MAX_BASKET};
pub use trainer::{
    fit, fit_from, guarded_step, init_params, train, validation_ll, TraceRecord, TrainTrace, MAX_INFEASIBLE_EPOCHS, TRACE_HEADER,
};
