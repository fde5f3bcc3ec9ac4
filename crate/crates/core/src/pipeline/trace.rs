//! Run traces and their CSV serialization.
//!
//! A run emits one CSV per observable: per-microbatch timings, per-window
//! controller decisions, the output-rate and bandwidth/bitwidth panels, the
//! per-microbatch accuracy agreement, and the raw network event trace. All
//! files carry a header row and RFC-4180 quoting.

use crate::error::Result;
use std::borrow::Cow;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Timings and sizes for one microbatch at one stage. Transmission fields
/// are absent on the final stage.
#[derive(Debug, Clone, PartialEq)]
pub struct MicrobatchRecord {
    pub stage: u32,
    pub microbatch_id: u64,
    pub compute_start: f64,
    pub compute_done: f64,
    pub tx_start: Option<f64>,
    pub tx_done: Option<f64>,
    pub bitwidth: u8,
    pub payload_bytes: u64,
    pub wire_bytes: u64,
    pub ds_sec: f64,
}

/// One controller window at one sender stage.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub stage: u32,
    pub window_index: u64,
    pub t_start: f64,
    pub t_end: f64,
    pub avg_bandwidth_bps: f64,
    pub avg_rate_img_s: f64,
    pub avg_payload_bytes: f64,
    pub q_old: u8,
    pub q_new: u8,
    pub trigger: String,
}

/// Agreement between the pipeline's and the unsharded model's predictions
/// for one microbatch.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementRecord {
    pub microbatch_id: u64,
    pub completed_at: f64,
    pub agreement: f64,
}

/// One network trace row.
#[derive(Debug, Clone, PartialEq)]
pub struct NetEvent {
    pub time: f64,
    pub channel: u32,
    pub bytes: u64,
    pub event_type: &'static str,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub microbatches: Vec<MicrobatchRecord>,
    pub windows: Vec<WindowRecord>,
    pub agreements: Vec<AgreementRecord>,
    pub events: Vec<NetEvent>,
    /// Final-stage argmax predictions per microbatch.
    pub predictions: Vec<Vec<u32>>,
    /// Unsharded full-precision predictions per microbatch.
    pub reference_predictions: Vec<Vec<u32>>,
    pub total_compute_sec: f64,
    pub total_ds_sec: f64,
    /// Virtual time when the final stage finished the last microbatch.
    pub finished_at: f64,
}

impl RunTrace {
    /// Mean per-microbatch agreement over the whole run.
    pub fn mean_agreement(&self) -> f64 {
        if self.agreements.is_empty() {
            return 0.0;
        }
        self.agreements.iter().map(|a| a.agreement).sum::<f64>() / self.agreements.len() as f64
    }

    /// Directed-search share of total virtual compute.
    pub fn ds_overhead_share(&self) -> f64 {
        let total = self.total_compute_sec + self.total_ds_sec;
        if total <= 0.0 {
            0.0
        } else {
            self.total_ds_sec / total
        }
    }

    /// End-to-end throughput in images/sec over microbatches `[skip..]`,
    /// measured at final-stage completion times.
    pub fn steady_throughput_img_s(&self, skip: usize, images_per_mb: usize) -> Option<f64> {
        let last_stage = self.microbatches.iter().map(|r| r.stage).max()?;
        let mut times: Vec<f64> = self
            .microbatches
            .iter()
            .filter(|r| r.stage == last_stage)
            .map(|r| r.compute_done)
            .collect();
        times.sort_by(f64::total_cmp);
        if times.len() <= skip + 1 {
            return None;
        }
        let span = times[times.len() - 1] - times[skip];
        let mbs = (times.len() - 1 - skip) as f64;
        Some(mbs * images_per_mb as f64 / span)
    }

    /// Write every trace CSV into `dir` (created if missing).
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_microbatches(&dir.join("microbatches.csv"))?;
        self.write_controller(&dir.join("controller.csv"))?;
        self.write_rate(&dir.join("rate.csv"))?;
        self.write_bandwidth_bitwidth(&dir.join("bandwidth_bitwidth.csv"))?;
        self.write_agreement(&dir.join("agreement.csv"))?;
        self.write_events(&dir.join("events.csv"))?;
        Ok(())
    }

    fn write_microbatches(&self, path: &Path) -> Result<()> {
        let mut w = CsvWriter::create(path)?;
        w.row(&[
            "stage",
            "microbatch_id",
            "compute_start",
            "compute_done",
            "tx_start",
            "tx_done",
            "bitwidth",
            "payload_bytes",
            "wire_bytes",
            "ds_sec",
        ])?;
        for r in &self.microbatches {
            w.row(&[
                &r.stage.to_string(),
                &r.microbatch_id.to_string(),
                &fmt(r.compute_start),
                &fmt(r.compute_done),
                &r.tx_start.map(fmt).unwrap_or_default(),
                &r.tx_done.map(fmt).unwrap_or_default(),
                &r.bitwidth.to_string(),
                &r.payload_bytes.to_string(),
                &r.wire_bytes.to_string(),
                &fmt(r.ds_sec),
            ])?;
        }
        w.finish()
    }

    fn write_controller(&self, path: &Path) -> Result<()> {
        let mut w = CsvWriter::create(path)?;
        w.row(&[
            "window_index",
            "stage",
            "avg_B_mbps",
            "avg_rate",
            "q_old",
            "q_new",
            "trigger_reason",
        ])?;
        for r in &self.windows {
            w.row(&[
                &r.window_index.to_string(),
                &r.stage.to_string(),
                &fmt(r.avg_bandwidth_bps / crate::netsim::BYTES_PER_SEC_PER_MBPS),
                &fmt(r.avg_rate_img_s),
                &r.q_old.to_string(),
                &r.q_new.to_string(),
                &r.trigger,
            ])?;
        }
        w.finish()
    }

    fn write_rate(&self, path: &Path) -> Result<()> {
        let mut w = CsvWriter::create(path)?;
        w.row(&["window_index", "stage", "t_start", "t_end", "rate_img_s"])?;
        for r in &self.windows {
            w.row(&[
                &r.window_index.to_string(),
                &r.stage.to_string(),
                &fmt(r.t_start),
                &fmt(r.t_end),
                &fmt(r.avg_rate_img_s),
            ])?;
        }
        w.finish()
    }

    fn write_bandwidth_bitwidth(&self, path: &Path) -> Result<()> {
        let mut w = CsvWriter::create(path)?;
        w.row(&["window_index", "stage", "t_end", "avg_B_mbps", "bitwidth"])?;
        for r in &self.windows {
            w.row(&[
                &r.window_index.to_string(),
                &r.stage.to_string(),
                &fmt(r.t_end),
                &fmt(r.avg_bandwidth_bps / crate::netsim::BYTES_PER_SEC_PER_MBPS),
                &r.q_new.to_string(),
            ])?;
        }
        w.finish()
    }

    fn write_agreement(&self, path: &Path) -> Result<()> {
        let mut w = CsvWriter::create(path)?;
        w.row(&["microbatch_id", "completed_at", "agreement"])?;
        for r in &self.agreements {
            w.row(&[
                &r.microbatch_id.to_string(),
                &fmt(r.completed_at),
                &fmt(r.agreement),
            ])?;
        }
        w.finish()
    }

    fn write_events(&self, path: &Path) -> Result<()> {
        let mut w = CsvWriter::create(path)?;
        w.row(&["time", "channel", "bytes", "event_type"])?;
        for e in &self.events {
            w.row(&[
                &fmt(e.time),
                &e.channel.to_string(),
                &e.bytes.to_string(),
                e.event_type,
            ])?;
        }
        w.finish()
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Minimal RFC-4180 writer: fields containing separators, quotes, or line
/// breaks are quoted with doubled inner quotes.
pub struct CsvWriter {
    out: std::io::BufWriter<fs::File>,
}

impl CsvWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self {
            out: std::io::BufWriter::new(fs::File::create(path)?),
        })
    }

    pub fn row(&mut self, fields: &[&str]) -> Result<()> {
        let mut first = true;
        for f in fields {
            if !first {
                self.out.write_all(b",")?;
            }
            first = false;
            self.out.write_all(quote(f).as_bytes())?;
        }
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

fn quote(field: &str) -> Cow<'_, str> {
    if field.contains([',', '"', '\n', '\r']) {
        Cow::Owned(format!("\"{}\"", field.replace('"', "\"\"")))
    } else {
        Cow::Borrowed(field)
    }
}
