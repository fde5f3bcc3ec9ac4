//! Event-driven execution of the staged pipeline over the virtual network.
//!
//! Stage workers are state machines driven by a single time-ordered event
//! queue: a worker computes one microbatch at a time, quantizes and encodes
//! its output, and hands the frame to its outbound channel; the handoff
//! blocks while the previous frame is still on the wire (one microbatch in
//! flight per link). Event order is total (time, then insertion sequence),
//! so traces are bit-reproducible.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use crate::controller::{Controller, WindowMetrics};
use crate::error::{Error, Result};
use crate::netsim::{BandwidthSchedule, Channel, VirtualClock};
use crate::pipeline::config::{ClipMethod, QuantConfig, RunConfig};
use crate::pipeline::data::{generate_dataset, Microbatch};
use crate::pipeline::model::{build_model, ToyModel};
use crate::pipeline::partition::{partition_even, Shard};
use crate::pipeline::trace::{AgreementRecord, MicrobatchRecord, NetEvent, RunTrace, WindowRecord};
use crate::quant::{
    aciq_alpha, build_histogram, directed_search, estimate_laplace, quantize, Bitwidth, ClipSpec,
    QuantizedTensor, Tensor,
};
use crate::wire::{decode_frame, encode_frame, FIXED_HEADER_LEN};

/// Run a full simulation from a validated configuration.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunTrace> {
    cfg.validate()?;
    let model = build_model(cfg.model.seed, cfg.model.dims())?;
    let shards = partition_even(&model.block_costs(), cfg.n_stages)?;
    let dataset = generate_dataset(&cfg.dataset, cfg.model.input_dim, cfg.model.n_classes)?;

    // Full-precision unsharded predictions, the agreement baseline.
    let reference: Vec<Vec<u32>> = dataset
        .iter()
        .map(|mb| {
            let logits =
                forward_microbatch(&model, 0, model.n_blocks(), &mb.inputs, cfg.model.input_dim)?;
            Ok(argmax_rows(&logits, cfg.model.n_classes))
        })
        .collect::<Result<_>>()?;

    let env = Env {
        cfg: cfg.clone(),
        model,
        shards,
        dataset,
        reference,
    };
    let mut st = State::new(&env)?;

    for s in 0..env.cfg.n_stages {
        try_start(&env, &mut st, s, 0.0)?;
    }
    while let Some(std::cmp::Reverse(ev)) = st.heap.pop() {
        st.clock.advance_to(ev.time);
        dispatch(&env, &mut st, ev)?;
    }

    finalize(&env, st)
}

/// Quantize one activation tensor according to the clip method. Returns the
/// quantized tensor and whether the directed search ran (for overhead
/// accounting).
pub fn quantize_activation(
    x: &Tensor,
    q: Bitwidth,
    method: Option<ClipMethod>,
    quant: &QuantConfig,
) -> Result<(QuantizedTensor, bool)> {
    let method = match method {
        None => return Ok((quantize(x, Bitwidth::B32, None)?, false)),
        Some(_) if q.is_passthrough() => return Ok((quantize(x, Bitwidth::B32, None)?, false)),
        Some(m) => m,
    };
    match method {
        ClipMethod::Naive => Ok((quantize(x, q, None)?, false)),
        ClipMethod::Aciq => {
            let p = estimate_laplace(x)?;
            let clip = clip_from(q, p.b, p.mu)?;
            Ok((quantize(x, q, Some(clip))?, false))
        }
        ClipMethod::Pda => {
            let p0 = estimate_laplace(x)?;
            let (p, searched) = if p0.b > 0.0 {
                let d_r = build_histogram(x, quant.hist_bins)?;
                (directed_search(&d_r, &p0, quant.search_steps)?, true)
            } else {
                (p0, false)
            };
            let clip = clip_from(q, p.b, p.mu)?;
            Ok((quantize(x, q, Some(clip))?, searched))
        }
    }
}

fn clip_from(q: Bitwidth, b: f64, mu: f64) -> Result<ClipSpec> {
    let alpha = aciq_alpha(q, b)?;
    ClipSpec::new(alpha as f32, mu as f32)
}

/// Sequential per-image forward through blocks `[lo, hi)` of the model.
pub fn forward_microbatch(
    model: &ToyModel,
    lo: usize,
    hi: usize,
    flat: &[f32],
    in_dim: usize,
) -> Result<Vec<f32>> {
    if in_dim == 0 || !flat.len().is_multiple_of(in_dim) {
        return Err(Error::DimMismatch {
            expected: in_dim,
            got: flat.len(),
        });
    }
    let mut out = Vec::new();
    for row in flat.chunks_exact(in_dim) {
        out.extend_from_slice(&model.forward_range(lo, hi, row)?);
    }
    Ok(out)
}

/// Row-wise argmax (ties go to the lowest index).
pub fn argmax_rows(flat: &[f32], dim: usize) -> Vec<u32> {
    flat.chunks_exact(dim)
        .map(|row| {
            let mut best = 0usize;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = i;
                }
            }
            best as u32
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Driver internals
// ---------------------------------------------------------------------------

struct Env {
    cfg: RunConfig,
    model: ToyModel,
    shards: Vec<Shard>,
    dataset: Vec<Microbatch>,
    reference: Vec<Vec<u32>>,
}

impl Env {
    fn images_per_mb(&self) -> usize {
        self.cfg.dataset.microbatch_size
    }

    fn shard_in_dim(&self, stage: usize) -> usize {
        self.model.in_dim_at(self.shards[stage].lo)
    }

    /// Elements the wire "sees" per microbatch (traffic override or real).
    fn wire_elems(&self, real: usize) -> usize {
        match &self.cfg.traffic {
            Some(t) => t.elems_per_image as usize * self.images_per_mb(),
            None => real,
        }
    }
}

#[derive(Debug)]
struct Ev {
    time: f64,
    seq: u64,
    kind: Kind,
}

#[derive(Debug)]
enum Kind {
    ComputeDone {
        stage: usize,
        mb: u64,
    },
    SendSubmit {
        stage: usize,
        mb: u64,
    },
    TxDone {
        stage: usize,
        mb: u64,
        wire_bytes: u64,
        payload_bytes: u64,
    },
    Deliver {
        stage: usize,
        mb: u64,
    },
    WorkerFree {
        stage: usize,
    },
}

impl PartialEq for Ev {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl Eq for Ev {}
impl PartialOrd for Ev {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ev {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

struct OutFrame {
    frame: Vec<u8>,
    wire_bytes: u64,
    payload_bytes: u64,
}

struct WinEntry {
    wire_bytes: u64,
    payload_bytes: u64,
}

struct StageRt {
    shard: Shard,
    latency: f64,
    ready: bool,
    input: VecDeque<(u64, Vec<f32>)>,
    computing: Option<(u64, Vec<f32>)>,
    outbox: HashMap<u64, OutFrame>,
    controller: Option<Controller>,
    q: Bitwidth,
    win: Vec<WinEntry>,
    win_start: f64,
    window_index: u64,
}

struct State {
    clock: VirtualClock,
    heap: BinaryHeap<std::cmp::Reverse<Ev>>,
    seq: u64,
    channels: Vec<Channel>,
    stages: Vec<StageRt>,
    in_flight: HashMap<(usize, u64), Vec<u8>>,
    feed_next: usize,
    records: HashMap<(u32, u64), MicrobatchRecord>,
    windows: Vec<WindowRecord>,
    agreements: Vec<AgreementRecord>,
    predictions: Vec<Option<Vec<u32>>>,
    total_compute: f64,
    total_ds: f64,
    finished_at: f64,
}

impl State {
    fn new(env: &Env) -> Result<Self> {
        let cfg = &env.cfg;
        let channels = cfg
            .channels
            .iter()
            .enumerate()
            .map(|(i, ch)| {
                Ok(Channel::new(
                    i as u32,
                    BandwidthSchedule::from_points(&ch.schedule)?,
                    ch.burst_bytes,
                    ch.delay_sec,
                ))
            })
            .collect::<Result<Vec<_>>>()?;

        let initial_q = cfg.quant_mode.initial_bitwidth();
        let stages = env
            .shards
            .iter()
            .enumerate()
            .map(|(s, shard)| {
                let is_sender = s + 1 < cfg.n_stages;
                let controller = if is_sender && cfg.quant_mode.is_adaptive() {
                    Some(Controller::new(cfg.controller_config(), initial_q)?)
                } else {
                    None
                };
                Ok(StageRt {
                    shard: *shard,
                    latency: cfg.latency_for_stage(s),
                    ready: true,
                    input: VecDeque::new(),
                    computing: None,
                    outbox: HashMap::new(),
                    controller,
                    q: initial_q,
                    win: Vec::new(),
                    win_start: 0.0,
                    window_index: 0,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            clock: VirtualClock::new(),
            heap: BinaryHeap::new(),
            seq: 0,
            channels,
            stages,
            in_flight: HashMap::new(),
            feed_next: 0,
            records: HashMap::new(),
            windows: Vec::new(),
            agreements: Vec::new(),
            predictions: vec![None; env.dataset.len()],
            total_compute: 0.0,
            total_ds: 0.0,
            finished_at: 0.0,
        })
    }

    fn schedule(&mut self, time: f64, kind: Kind) {
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(std::cmp::Reverse(Ev { time, seq, kind }));
    }
}

fn dispatch(env: &Env, st: &mut State, ev: Ev) -> Result<()> {
    match ev.kind {
        Kind::ComputeDone { stage, mb } => on_compute_done(env, st, stage, mb, ev.time),
        Kind::SendSubmit { stage, mb } => on_send_submit(st, stage, mb, ev.time),
        Kind::TxDone {
            stage,
            mb,
            wire_bytes,
            payload_bytes,
        } => on_tx_done(env, st, stage, mb, wire_bytes, payload_bytes, ev.time),
        Kind::Deliver { stage, mb } => on_deliver(env, st, stage, mb, ev.time),
        Kind::WorkerFree { stage } => {
            st.stages[stage].ready = true;
            try_start(env, st, stage, ev.time)
        }
    }
}

/// Start the next microbatch on `stage` if the worker is idle and input is
/// available (stage 0 feeds from the dataset backlog).
fn try_start(env: &Env, st: &mut State, stage: usize, t: f64) -> Result<()> {
    if !st.stages[stage].ready {
        return Ok(());
    }
    let next = if stage == 0 {
        if st.feed_next < env.dataset.len() {
            let mb: &Microbatch = &env.dataset[st.feed_next];
            st.feed_next += 1;
            Some((mb.id, mb.inputs.clone()))
        } else {
            None
        }
    } else {
        st.stages[stage].input.pop_front()
    };
    let Some((mb, data)) = next else {
        return Ok(());
    };

    let shard = st.stages[stage].shard;
    let out = forward_microbatch(
        &env.model,
        shard.lo,
        shard.hi,
        &data,
        env.shard_in_dim(stage),
    )?;
    let rt = &mut st.stages[stage];
    rt.ready = false;
    rt.computing = Some((mb, out));
    let latency = rt.latency;
    st.records.insert(
        (stage as u32, mb),
        MicrobatchRecord {
            stage: stage as u32,
            microbatch_id: mb,
            compute_start: t,
            compute_done: 0.0,
            tx_start: None,
            tx_done: None,
            bitwidth: 32,
            payload_bytes: 0,
            wire_bytes: 0,
            ds_sec: 0.0,
        },
    );
    st.schedule(t + latency, Kind::ComputeDone { stage, mb });
    Ok(())
}

fn on_compute_done(env: &Env, st: &mut State, stage: usize, mb: u64, t: f64) -> Result<()> {
    let (got, out) = st.stages[stage]
        .computing
        .take()
        .ok_or_else(|| Error::InvalidConfig("compute completion without work".into()))?;
    debug_assert_eq!(got, mb);
    st.total_compute += st.stages[stage].latency;
    if let Some(rec) = st.records.get_mut(&(stage as u32, mb)) {
        rec.compute_done = t;
    }

    let last = stage + 1 == env.cfg.n_stages;
    if last {
        let preds = argmax_rows(&out, env.cfg.model.n_classes);
        let matches = preds
            .iter()
            .zip(&env.reference[mb as usize])
            .filter(|(a, b)| a == b)
            .count();
        st.agreements.push(AgreementRecord {
            microbatch_id: mb,
            completed_at: t,
            agreement: matches as f64 / preds.len() as f64,
        });
        st.predictions[mb as usize] = Some(preds);
        st.finished_at = st.finished_at.max(t);
        st.stages[stage].ready = true;
        return try_start(env, st, stage, t);
    }

    // Sender: quantize at the stage's current width, encode, and charge the
    // directed-search overhead before the frame can be submitted.
    let q = st.stages[stage].q;
    let s_images = env.images_per_mb();
    let out_dim = out.len() / s_images;
    let tensor = Tensor::new(out, vec![s_images, out_dim])?;
    let (qt, searched) =
        quantize_activation(&tensor, q, env.cfg.quant_mode.method(), &env.cfg.quant)?;
    let ds_sec = if searched {
        env.cfg.quant.ds_overhead_sec
    } else {
        0.0
    };
    st.total_ds += ds_sec;

    let frame = encode_frame(stage as u16, mb, &qt)?;
    let wire_elems = env.wire_elems(tensor.len());
    let payload_bytes = qt.bitwidth.payload_len(wire_elems) as u64;
    let wire_bytes = (FIXED_HEADER_LEN + 4 * 2) as u64 + payload_bytes;
    if let Some(rec) = st.records.get_mut(&(stage as u32, mb)) {
        rec.bitwidth = qt.bitwidth.bits();
        rec.payload_bytes = payload_bytes;
        rec.wire_bytes = wire_bytes;
        rec.ds_sec = ds_sec;
    }
    st.stages[stage].outbox.insert(
        mb,
        OutFrame {
            frame,
            wire_bytes,
            payload_bytes,
        },
    );
    st.schedule(t + ds_sec, Kind::SendSubmit { stage, mb });
    Ok(())
}

fn on_send_submit(st: &mut State, stage: usize, mb: u64, t: f64) -> Result<()> {
    let of = st.stages[stage]
        .outbox
        .remove(&mb)
        .ok_or_else(|| Error::InvalidConfig("send without encoded frame".into()))?;
    let (start, complete) = st.channels[stage].send_at(t, of.wire_bytes)?;
    if let Some(rec) = st.records.get_mut(&(stage as u32, mb)) {
        rec.tx_start = Some(start);
        rec.tx_done = Some(complete);
    }
    st.in_flight.insert((stage + 1, mb), of.frame);

    // Worker frees at handoff (transmission start), not completion.
    st.schedule(start, Kind::WorkerFree { stage });
    st.schedule(
        complete,
        Kind::TxDone {
            stage,
            mb,
            wire_bytes: of.wire_bytes,
            payload_bytes: of.payload_bytes,
        },
    );
    let delay = st.channels[stage].delay();
    st.schedule(
        complete + delay,
        Kind::Deliver {
            stage: stage + 1,
            mb,
        },
    );
    Ok(())
}

fn on_tx_done(
    env: &Env,
    st: &mut State,
    stage: usize,
    _mb: u64,
    wire_bytes: u64,
    payload_bytes: u64,
    t: f64,
) -> Result<()> {
    let window_len = env.cfg.adapt.window_len as usize;
    let record = {
        let rt = &mut st.stages[stage];
        rt.win.push(WinEntry {
            wire_bytes,
            payload_bytes,
        });
        if rt.win.len() < window_len {
            return Ok(());
        }

        let t_start = rt.win_start;
        let t_end = t;
        let span = (t_end - t_start).max(1e-12);
        let wire_total: u64 = rt.win.iter().map(|e| e.wire_bytes).sum();
        let payload_total: u64 = rt.win.iter().map(|e| e.payload_bytes).sum();
        let avg_bandwidth = wire_total as f64 / span;
        let avg_rate = (window_len * env.images_per_mb()) as f64 / span;
        let avg_payload = payload_total as f64 / window_len as f64;

        let metrics = WindowMetrics {
            window_len: env.cfg.adapt.window_len,
            avg_bandwidth,
            avg_output_rate: avg_rate,
            avg_quantized_size: avg_payload,
            bitwidth: rt.q,
        };
        let (q_old, q_new, trigger) = match &mut rt.controller {
            Some(ctrl) => {
                let d = ctrl.window_step(metrics)?;
                rt.q = d.q_new;
                (
                    d.q_old.bits(),
                    d.q_new.bits(),
                    d.trigger
                        .map_or_else(|| "none".to_string(), |tr| tr.to_string()),
                )
            }
            None => (rt.q.bits(), rt.q.bits(), "none".to_string()),
        };

        let record = WindowRecord {
            stage: stage as u32,
            window_index: rt.window_index,
            t_start,
            t_end,
            avg_bandwidth_bps: avg_bandwidth,
            avg_rate_img_s: avg_rate,
            avg_payload_bytes: avg_payload,
            q_old,
            q_new,
            trigger,
        };
        rt.window_index += 1;
        rt.win.clear();
        rt.win_start = t_end;
        record
    };
    st.windows.push(record);
    Ok(())
}

fn on_deliver(env: &Env, st: &mut State, stage: usize, mb: u64, t: f64) -> Result<()> {
    let bytes = st
        .in_flight
        .remove(&(stage, mb))
        .ok_or_else(|| Error::InvalidConfig("delivery without frame".into()))?;
    let (_header, qt) = decode_frame(&bytes)?;
    let tensor = crate::quant::dequantize(&qt)?;
    st.stages[stage]
        .input
        .push_back((mb, tensor.data().to_vec()));
    try_start(env, st, stage, t)
}

fn finalize(env: &Env, st: State) -> Result<RunTrace> {
    let mut microbatches: Vec<MicrobatchRecord> = st.records.into_values().collect();
    microbatches.sort_by_key(|r| (r.stage, r.microbatch_id));

    let mut events = Vec::new();
    for ch in &st.channels {
        for r in ch.log() {
            events.push(NetEvent {
                time: r.submit,
                channel: r.channel,
                bytes: r.bytes,
                event_type: "submit",
            });
            events.push(NetEvent {
                time: r.complete,
                channel: r.channel,
                bytes: r.bytes,
                event_type: "deliver",
            });
        }
    }
    events.sort_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then(a.channel.cmp(&b.channel))
            .then(a.event_type.cmp(b.event_type).reverse()) // submit before deliver
            .then(a.bytes.cmp(&b.bytes))
    });

    let predictions: Vec<Vec<u32>> = st
        .predictions
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            p.ok_or_else(|| Error::InvalidConfig(format!("microbatch {i} never finished")))
        })
        .collect::<Result<_>>()?;

    Ok(RunTrace {
        microbatches,
        windows: st.windows,
        agreements: st.agreements,
        events,
        predictions,
        reference_predictions: env.reference.clone(),
        total_compute_sec: st.total_compute,
        total_ds_sec: st.total_ds,
        finished_at: st.finished_at,
    })
}
