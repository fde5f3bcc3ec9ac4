//! Scenario files: a named run configuration plus optional sweeps and
//! embedded pass/fail assertions.

use qpipe_core::netsim::SchedulePoint;
use qpipe_core::pipeline::{
    run_pipeline, top1_agreement, ClipMethod, QuantMode, RunConfig, RunTrace,
};
use qpipe_core::quant::Bitwidth;
use qpipe_core::wire::FIXED_HEADER_LEN;
use qpipe_core::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub config: RunConfig,
    /// Re-run the config once per constant bandwidth, reporting throughput
    /// against the analytic bottleneck.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_sweep_mbps: Option<Vec<f64>>,
    /// Re-run the config once per (clip method, bitwidth), reporting
    /// agreement with the full-precision predictions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bitwidth_sweep: Option<BitwidthSweep>,
    #[serde(default)]
    pub assertions: Assertions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitwidthSweep {
    pub methods: Vec<ClipMethod>,
    pub bitwidths: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assertions {
    /// Expected bitwidth of the last full window in each bandwidth phase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_bitwidths: Option<Vec<u8>>,
    /// Minimum output rate of the last full window in every phase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_steady_rate_img_s: Option<f64>,
    /// Minimum mean agreement with full-precision predictions over the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_mean_agreement: Option<f64>,
    /// Bandwidth sweep: maximum relative error vs the bottleneck law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bottleneck_rel_err: Option<f64>,
    /// Bitwidth sweep: require pda > aciq > naive agreement at 2 bits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering_at_2bit: Option<bool>,
    /// Bitwidth sweep: minimum pda agreement at 8 bits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_pda_agreement_at_8bit: Option<f64>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    let sc: Scenario =
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{path:?}: {e}")))?;
    sc.config.validate()?;
    Ok(sc)
}

/// Result of one scenario execution.
#[derive(Debug)]
pub struct RunOutcome {
    /// Human-readable assertion failures; empty means pass.
    pub failures: Vec<String>,
    pub summary_lines: Vec<String>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Execute a scenario into `out_dir`: traces, meta, summary, assertions.
pub fn run_scenario(
    sc: &Scenario,
    out_dir: &Path,
    seed_override: Option<u64>,
    ladder: bool,
) -> Result<RunOutcome> {
    let mut sc = sc.clone();
    if let Some(seed) = seed_override {
        sc.config.override_seed(seed);
    }
    if ladder {
        sc.config.adapt.ladder = true;
    }
    fs::create_dir_all(out_dir)?;
    fs::write(
        out_dir.join("meta.json"),
        serde_json::to_string_pretty(&sc).map_err(|e| Error::InvalidConfig(e.to_string()))? + "\n",
    )?;

    if let Some(mbps_list) = &sc.bandwidth_sweep_mbps {
        run_bandwidth_sweep(&sc, mbps_list, out_dir)
    } else if let Some(sweep) = &sc.bitwidth_sweep {
        run_bitwidth_sweep(&sc, sweep, out_dir)
    } else {
        run_single(&sc, out_dir)
    }
}

fn run_single(sc: &Scenario, out_dir: &Path) -> Result<RunOutcome> {
    let trace = run_pipeline(&sc.config)?;
    trace.write_csvs(out_dir)?;
    let summary_lines = match crate::summary::summarize_run(out_dir) {
        Ok(summary) => {
            crate::summary::write_summary_csv(&summary, out_dir)?;
            summary.render_text()
        }
        // Runs shorter than one window have nothing to summarize.
        Err(Error::InvalidConfig(msg)) if msg.contains("no complete windows") => {
            vec![format!("(no summary: {msg})")]
        }
        Err(e) => return Err(e),
    };

    let mut failures = Vec::new();
    let phases = phase_bounds(&sc.config, trace.finished_at);
    let steady = steady_windows(&trace, &phases);

    if let Some(expect) = &sc.assertions.steady_bitwidths {
        let got: Vec<Option<u8>> = steady.iter().map(|w| w.map(|w| w.q_new)).collect();
        let ok = got.len() == expect.len() && got.iter().zip(expect).all(|(g, e)| *g == Some(*e));
        if !ok {
            failures.push(format!("steady bitwidths {got:?} != expected {expect:?}"));
        }
    }
    if let Some(min_rate) = sc.assertions.min_steady_rate_img_s {
        for (i, w) in steady.iter().enumerate() {
            match w {
                Some(w) if w.avg_rate_img_s >= min_rate => {}
                Some(w) => failures.push(format!(
                    "phase {i}: steady rate {:.2} < {min_rate}",
                    w.avg_rate_img_s
                )),
                None => failures.push(format!("phase {i}: no complete window")),
            }
        }
    }
    if let Some(min_agree) = sc.assertions.min_mean_agreement {
        let got = trace.mean_agreement();
        if got < min_agree {
            failures.push(format!("mean agreement {got:.4} < {min_agree}"));
        }
    }

    Ok(RunOutcome {
        failures,
        summary_lines,
    })
}

fn run_bandwidth_sweep(sc: &Scenario, mbps_list: &[f64], out_dir: &Path) -> Result<RunOutcome> {
    let mut rows = Vec::new();
    let mut worst_rel = 0.0f64;
    for &mbps in mbps_list {
        let mut cfg = sc.config.clone();
        for ch in &mut cfg.channels {
            ch.schedule = vec![SchedulePoint { t_sec: 0.0, mbps }];
        }
        let trace = run_pipeline(&cfg)?;
        let s = cfg.dataset.microbatch_size;
        let skip = (cfg.dataset.n_microbatches / 5).max(2);
        let measured = trace
            .steady_throughput_img_s(skip, s)
            .ok_or_else(|| Error::InvalidConfig("sweep run too short to measure".into()))?;
        let predicted = predicted_throughput(&cfg, mbps);
        let rel = (measured - predicted).abs() / predicted;
        worst_rel = worst_rel.max(rel);
        rows.push((mbps, measured, predicted, rel));
    }

    let mut w = qpipe_core::pipeline::trace::CsvWriter::create(&out_dir.join("sweep.csv"))?;
    w.row(&["mbps", "throughput_img_s", "predicted_img_s", "rel_err"])?;
    for (mbps, m, p, r) in &rows {
        w.row(&[
            &format!("{mbps}"),
            &format!("{m}"),
            &format!("{p}"),
            &format!("{r}"),
        ])?;
    }
    w.finish()?;

    let mut failures = Vec::new();
    if let Some(max_rel) = sc.assertions.max_bottleneck_rel_err {
        for (mbps, m, p, r) in &rows {
            if r > &max_rel {
                failures.push(format!(
                    "{mbps} Mbps: throughput {m:.2} vs predicted {p:.2} (rel {r:.3} > {max_rel})"
                ));
            }
        }
    }
    let summary_lines = std::iter::once(format!(
        "bandwidth sweep: {} points, worst bottleneck deviation {:.2}%",
        rows.len(),
        100.0 * worst_rel
    ))
    .chain(rows.iter().map(|(mbps, m, p, r)| {
        format!(
            "  {mbps:>8} Mbps: {m:>8.2} img/s (predicted {p:>8.2}, rel err {:.2}%)",
            r * 100.0
        )
    }))
    .collect();
    Ok(RunOutcome {
        failures,
        summary_lines,
    })
}

/// Steady throughput implied by the slowest of compute and transmission.
fn predicted_throughput(cfg: &RunConfig, mbps: f64) -> f64 {
    let s = cfg.dataset.microbatch_size as f64;
    let elems_per_mb = match &cfg.traffic {
        Some(t) => t.elems_per_image as f64 * s,
        None => {
            // Activation width at the stage boundary is the hidden dim for
            // every cut except after the head.
            cfg.model.hidden_dim as f64 * s
        }
    };
    let q = cfg.quant_mode.initial_bitwidth();
    let payload = (elems_per_mb * q.bits() as f64 / 8.0).ceil();
    let frame_bytes = (FIXED_HEADER_LEN + 8) as f64 + payload;
    let mut period: f64 = 0.0;
    for stage in 0..cfg.n_stages {
        period = period.max(cfg.latency_for_stage(stage));
    }
    let rate_bps = mbps * qpipe_core::netsim::BYTES_PER_SEC_PER_MBPS;
    period = period.max(frame_bytes / rate_bps);
    s / period
}

fn run_bitwidth_sweep(sc: &Scenario, sweep: &BitwidthSweep, out_dir: &Path) -> Result<RunOutcome> {
    let mut table: Vec<(ClipMethod, u8, f64)> = Vec::new();
    for &method in &sweep.methods {
        for &bits in &sweep.bitwidths {
            let q = Bitwidth::from_bits(bits)?;
            let mut cfg = sc.config.clone();
            cfg.quant_mode = if q.is_passthrough() {
                QuantMode::Off
            } else {
                QuantMode::Fixed {
                    bitwidth: q,
                    method,
                }
            };
            let trace = run_pipeline(&cfg)?;
            let agree = top1_agreement(&trace.predictions, &trace.reference_predictions)?;
            table.push((method, bits, agree));
        }
    }

    let mut w =
        qpipe_core::pipeline::trace::CsvWriter::create(&out_dir.join("bitwidth_sweep.csv"))?;
    w.row(&["method", "bitwidth", "agreement"])?;
    for (m, bits, a) in &table {
        w.row(&[&m.to_string(), &bits.to_string(), &format!("{a}")])?;
    }
    w.finish()?;

    let lookup = |m: ClipMethod, bits: u8| {
        table
            .iter()
            .find(|(tm, tb, _)| *tm == m && *tb == bits)
            .map(|(_, _, a)| *a)
    };
    let mut failures = Vec::new();
    if sc.assertions.ordering_at_2bit == Some(true) {
        match (
            lookup(ClipMethod::Pda, 2),
            lookup(ClipMethod::Aciq, 2),
            lookup(ClipMethod::Naive, 2),
        ) {
            (Some(pda), Some(aciq), Some(naive)) => {
                if !(pda > aciq && aciq > naive) {
                    failures.push(format!(
                        "2-bit ordering violated: pda {pda:.4}, aciq {aciq:.4}, naive {naive:.4}"
                    ));
                }
            }
            _ => failures.push("2-bit ordering requires pda/aciq/naive at 2 bits".into()),
        }
    }
    if let Some(min) = sc.assertions.min_pda_agreement_at_8bit {
        match lookup(ClipMethod::Pda, 8) {
            Some(a) if a >= min => {}
            Some(a) => failures.push(format!("pda@8bit agreement {a:.4} < {min}")),
            None => failures.push("pda@8bit agreement missing from sweep".into()),
        }
    }

    let summary_lines = std::iter::once("bitwidth sweep (agreement with fp32):".to_string())
        .chain(
            table
                .iter()
                .map(|(m, bits, a)| format!("  {m:>5} @ {bits:>2} bit: {a:.4}")),
        )
        .collect();
    Ok(RunOutcome {
        failures,
        summary_lines,
    })
}

/// Phase boundaries from channel 0's schedule: `[start, next_start)` per
/// entry, the last one closed by the end of the run.
pub fn phase_bounds(cfg: &RunConfig, finished_at: f64) -> Vec<(f64, f64)> {
    let mut starts: Vec<f64> = vec![0.0];
    if let Some(ch) = cfg.channels.first() {
        starts.extend(ch.schedule.iter().skip(1).map(|p| p.t_sec));
    }
    let mut bounds = Vec::with_capacity(starts.len());
    for (i, &s) in starts.iter().enumerate() {
        let end = starts.get(i + 1).copied().unwrap_or(finished_at.max(s));
        bounds.push((s, end));
    }
    bounds
}

/// Last complete stage-0 window inside each phase, if any.
pub fn steady_windows<'t>(
    trace: &'t RunTrace,
    phases: &[(f64, f64)],
) -> Vec<Option<&'t qpipe_core::pipeline::WindowRecord>> {
    phases
        .iter()
        .map(|&(lo, hi)| {
            trace
                .windows
                .iter()
                .filter(|w| w.stage == 0 && w.t_start >= lo && w.t_end <= hi)
                .max_by(|a, b| a.t_end.total_cmp(&b.t_end))
        })
        .collect()
}
