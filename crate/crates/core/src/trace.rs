//! Per-iteration telemetry and its CSV encoding.

use std::io::Write;

use crate::error::Result;

/// Fixed CSV header. Changing it breaks downstream plotting scripts.
pub const TRACE_HEADER: [&str; 10] =
    ["run_id", "t", "oracle_calls", "loss", "grad_norm", "align_cos", "mc_alignment", "mu_norm", "skipped", "seed"];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub run_id: String,
    /// Iteration index, starting at zero.
    pub t: u64,
    /// Cumulative oracle calls after this iteration.
    pub oracle_calls: u64,
    /// `f(x^t)` before the update.
    pub loss: f64,
    pub grad_norm: Option<f64>,
    /// Cosine between the update direction `g_x` and `∇f(x^t)`.
    pub align_cos: Option<f64>,
    /// Monte Carlo estimate of the expected alignment under the current policy.
    pub mc_alignment: Option<f64>,
    pub mu_norm: f64,
    pub skipped: bool,
    pub seed: u64,
}

pub trait TraceSink {
    fn record(&mut self, rec: &TraceRecord) -> Result<()>;
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, rec: &TraceRecord) -> Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}

/// Discards records.
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _rec: &TraceRecord) -> Result<()> {
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Streams records as CSV with [`TRACE_HEADER`].
pub struct CsvTraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CsvTraceWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        inner.write_record(TRACE_HEADER)?;
        Ok(Self { inner })
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

impl<W: Write> TraceSink for CsvTraceWriter<W> {
    fn record(&mut self, r: &TraceRecord) -> Result<()> {
        self.inner.write_record([
            r.run_id.clone(),
            r.t.to_string(),
            r.oracle_calls.to_string(),
            r.loss.to_string(),
            opt(r.grad_norm),
            opt(r.align_cos),
            opt(r.mc_alignment),
            r.mu_norm.to_string(),
            u8::from(r.skipped).to_string(),
            r.seed.to_string(),
        ])?;
        Ok(())
    }
}
