//! Metric rows and their CSV sinks.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::HarnessError;

pub const TRAIN_HEADER: &str = "step,test_success,entropy,alpha,intrinsic_success,cutoff";
pub const TOY_HEADER: &str = "iteration,policy,mean_entropy,std_entropy,mean_support,std_support";

/// One evaluation point of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub step: usize,
    pub test_success: f64,
    /// Estimated entropy of the achieved-goal buffer (nats).
    pub entropy: f64,
    /// OMEGA's α; absent for other strategies.
    pub alpha: Option<f64>,
    /// Fraction of training episodes since the last evaluation that reached
    /// their behavioural goal.
    pub intrinsic_success: f64,
    pub cutoff: f64,
}

/// One iteration of one toy policy, averaged over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyRow {
    pub iteration: usize,
    pub policy: String,
    pub mean_entropy: f64,
    pub std_entropy: f64,
    pub mean_support: f64,
    pub std_support: f64,
}

/// Something that renders as one CSV line under a fixed header.
pub trait CsvRow {
    const HEADER: &'static str;
    fn to_row(&self) -> String;
}

impl CsvRow for MetricRecord {
    const HEADER: &'static str = TRAIN_HEADER;

    fn to_row(&self) -> String {
        let alpha = self.alpha.map(|a| a.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.step, self.test_success, self.entropy, alpha, self.intrinsic_success, self.cutoff
        )
    }
}

impl CsvRow for ToyRow {
    const HEADER: &'static str = TOY_HEADER;

    fn to_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iteration,
            self.policy,
            self.mean_entropy,
            self.std_entropy,
            self.mean_support,
            self.std_support
        )
    }
}

/// Writes a header before the first row and flushes after every row.
pub struct CsvSink<W: Write> {
    out: W,
    header_written: bool,
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W) -> Self {
        Self {
            out,
            header_written: false,
        }
    }

    pub fn emit<T: CsvRow>(&mut self, row: &T) -> std::io::Result<()> {
        if !self.header_written {
            writeln!(self.out, "{}", T::HEADER)?;
            self.header_written = true;
        }
        writeln!(self.out, "{}", row.to_row())?;
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl CsvSink<BufWriter<File>> {
    /// Creates (truncating) the file, failing early when it is not writable.
    pub fn create(path: &Path) -> Result<Self, HarnessError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Self::new(BufWriter::new(File::create(path)?)))
    }
}

/// Emits every record to `sink`.
pub fn emit_metrics<T: CsvRow, W: Write>(records: &[T], sink: &mut CsvSink<W>) -> std::io::Result<()> {
    for r in records {
        sink.emit(r)?;
    }
    Ok(())
}
