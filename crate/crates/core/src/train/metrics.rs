//! Per-episode metrics CSV. Missing values are written as empty fields.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const METRICS_COLUMNS: [&str; 9] = [
    "episode",
    "mean_loss",
    "mean_goal_size",
    "mean_traj_len",
    "buffer_size",
    "temperature",
    "lr",
    "val_coverage",
    "val_total_len",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub mean_loss: Option<f64>,
    pub mean_goal_size: Option<f64>,
    pub mean_traj_len: Option<f64>,
    pub buffer_size: usize,
    pub temperature: f64,
    pub lr: f64,
    pub val_coverage: Option<f64>,
    pub val_total_len: Option<usize>,
}

pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl MetricsWriter<File> {
    pub fn create(path: &Path) -> Result<Self, csv::Error> {
        Ok(MetricsWriter::new(File::create(path)?))
    }
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(out: W) -> Self {
        MetricsWriter {
            inner: csv::Writer::from_writer(out),
        }
    }

    /// Writes one row and flushes it.
    pub fn write(&mut self, row: &MetricsRow) -> Result<(), csv::Error> {
        self.inner.serialize(row)?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_metrics<R: io::Read>(input: R) -> Result<Vec<MetricsRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}
