//! Post-run summarization: per-phase means over an emitted trace directory.

use crate::scenario::{phase_bounds, Scenario};
use qpipe_core::pipeline::trace::CsvWriter;
use qpipe_core::{Error, Result};
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSummary {
    pub phase: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub windows: usize,
    pub mean_rate_img_s: f64,
    pub mean_bandwidth_mbps: f64,
    /// Bitwidth after the last complete window of the phase.
    pub steady_bitwidth: Option<u8>,
    pub mean_agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub phases: Vec<PhaseSummary>,
    pub ds_overhead_share: f64,
    pub mean_agreement: f64,
}

impl Summary {
    pub fn render_text(&self) -> Vec<String> {
        let mut out = Vec::new();
        out.push(format!(
            "{:<6} {:>10} {:>10} {:>8} {:>12} {:>12} {:>8} {:>10}",
            "phase",
            "t_start",
            "t_end",
            "windows",
            "rate_img_s",
            "bw_mbps",
            "steady_q",
            "agreement"
        ));
        for p in &self.phases {
            out.push(format!(
                "{:<6} {:>10.2} {:>10.2} {:>8} {:>12.2} {:>12.2} {:>8} {:>10}",
                p.phase,
                p.t_start,
                p.t_end,
                p.windows,
                p.mean_rate_img_s,
                p.mean_bandwidth_mbps,
                p.steady_bitwidth.map_or("-".into(), |q| q.to_string()),
                p.mean_agreement.map_or("-".into(), |a| format!("{a:.4}")),
            ));
        }
        out.push(format!(
            "directed-search overhead: {:.3}% of virtual compute; mean agreement {:.4}",
            100.0 * self.ds_overhead_share,
            self.mean_agreement
        ));
        out
    }
}

struct WindowRow {
    stage: u32,
    window_index: u64,
    t_start: f64,
    t_end: f64,
    rate: f64,
    mbps: f64,
    q_new: u8,
}

/// Build the per-phase summary from the CSVs in `dir`.
pub fn summarize_run(dir: &Path) -> Result<Summary> {
    let meta_text = fs::read_to_string(dir.join("meta.json"))?;
    let sc: Scenario = serde_json::from_str(&meta_text)
        .map_err(|e| Error::InvalidConfig(format!("meta.json: {e}")))?;

    let rate_rows = read_csv(&dir.join("rate.csv"))?;
    let ctrl_rows = read_csv(&dir.join("controller.csv"))?;
    let agree_rows = read_csv(&dir.join("agreement.csv"))?;
    let mb_rows = read_csv(&dir.join("microbatches.csv"))?;

    // Join rate.csv (times) with controller.csv (bandwidth, widths).
    let mut windows = Vec::new();
    for (r, c) in rate_rows.iter().zip(ctrl_rows.iter()) {
        let stage: u32 = parse(&r[1])?;
        let window_index: u64 = parse(&r[0])?;
        let cstage: u32 = parse(&c[1])?;
        let cwin: u64 = parse(&c[0])?;
        if stage != cstage || window_index != cwin {
            return Err(Error::InvalidConfig(
                "rate.csv and controller.csv disagree".into(),
            ));
        }
        windows.push(WindowRow {
            stage,
            window_index,
            t_start: parse(&r[2])?,
            t_end: parse(&r[3])?,
            rate: parse(&r[4])?,
            mbps: parse(&c[2])?,
            q_new: parse(&c[5])?,
        });
    }
    if windows.is_empty() {
        return Err(Error::InvalidConfig(
            "no complete windows in trace (run shorter than one window?)".into(),
        ));
    }

    let finished_at = mb_rows
        .iter()
        .map(|row| row[3].parse::<f64>().unwrap_or(0.0))
        .fold(0.0f64, f64::max);
    let phases = phase_bounds(&sc.config, finished_at);

    let agreements: Vec<(f64, f64)> = agree_rows
        .iter()
        .map(|row| Ok((parse::<f64>(&row[1])?, parse::<f64>(&row[2])?)))
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for (i, &(lo, hi)) in phases.iter().enumerate() {
        let in_phase: Vec<&WindowRow> = windows
            .iter()
            .filter(|w| w.stage == 0 && w.t_start >= lo && w.t_end <= hi)
            .collect();
        let n = in_phase.len();
        let mean = |f: &dyn Fn(&WindowRow) -> f64| {
            if n == 0 {
                0.0
            } else {
                in_phase.iter().map(|w| f(w)).sum::<f64>() / n as f64
            }
        };
        let steady = in_phase
            .iter()
            .max_by(|a, b| {
                a.t_end
                    .total_cmp(&b.t_end)
                    .then(a.window_index.cmp(&b.window_index))
            })
            .map(|w| w.q_new);
        let phase_agree: Vec<f64> = agreements
            .iter()
            .filter(|(t, _)| *t >= lo && *t < hi)
            .map(|(_, a)| *a)
            .collect();
        out.push(PhaseSummary {
            phase: i,
            t_start: lo,
            t_end: hi,
            windows: n,
            mean_rate_img_s: mean(&|w| w.rate),
            mean_bandwidth_mbps: mean(&|w| w.mbps),
            steady_bitwidth: steady,
            mean_agreement: if phase_agree.is_empty() {
                None
            } else {
                Some(phase_agree.iter().sum::<f64>() / phase_agree.len() as f64)
            },
        });
    }

    // Directed-search share of virtual compute, from per-microbatch rows.
    let mut ds_total = 0.0f64;
    let mut compute_total = 0.0f64;
    for row in &mb_rows {
        let start: f64 = parse(&row[2])?;
        let done: f64 = parse(&row[3])?;
        compute_total += done - start;
        ds_total += parse::<f64>(&row[9])?;
    }
    let ds_share = if compute_total + ds_total > 0.0 {
        ds_total / (compute_total + ds_total)
    } else {
        0.0
    };
    let mean_agreement = if agreements.is_empty() {
        0.0
    } else {
        agreements.iter().map(|(_, a)| a).sum::<f64>() / agreements.len() as f64
    };

    Ok(Summary {
        phases: out,
        ds_overhead_share: ds_share,
        mean_agreement,
    })
}

pub fn write_summary_csv(summary: &Summary, dir: &Path) -> Result<()> {
    let mut w = CsvWriter::create(&dir.join("summary.csv"))?;
    w.row(&[
        "phase",
        "t_start",
        "t_end",
        "windows",
        "mean_rate_img_s",
        "mean_bandwidth_mbps",
        "steady_bitwidth",
        "mean_agreement",
        "ds_overhead_share",
    ])?;
    for p in &summary.phases {
        w.row(&[
            &p.phase.to_string(),
            &format!("{}", p.t_start),
            &format!("{}", p.t_end),
            &p.windows.to_string(),
            &format!("{}", p.mean_rate_img_s),
            &format!("{}", p.mean_bandwidth_mbps),
            &p.steady_bitwidth.map_or(String::new(), |q| q.to_string()),
            &p.mean_agreement.map_or(String::new(), |a| format!("{a}")),
            &format!("{}", summary.ds_overhead_share),
        ])?;
    }
    w.finish()
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::InvalidConfig(format!("bad csv field {s:?}")))
}

/// Read a CSV with a header row; returns data rows. Handles RFC-4180
/// quoting (our own writers quote only when needed).
fn read_csv(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        rows.push(split_csv_line(line));
    }
    Ok(rows)
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted => {
                if chars.peek() == Some(&'"') {
                    cur.push('"');
                    chars.next();
                } else {
                    quoted = false;
                }
            }
            '"' => quoted = true,
            ',' if !quoted => {
                fields.push(std::mem::take(&mut cur));
            }
            c => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}
