//! Deterministic virtual-time network: point-to-point channels shaped by a
//! token bucket whose rate follows a scripted bandwidth schedule.
//!
//! Transmission is modeled as fluid: bytes covered by banked tokens leave
//! instantly, the remainder drains at the scheduled rate, and rate changes
//! apply to bytes not yet transmitted. Channels serialize sends FIFO.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One megabit per second in bytes per second.
pub const BYTES_PER_SEC_PER_MBPS: f64 = 125_000.0;

/// Default bucket capacity: 64 KiB.
pub const DEFAULT_BURST_BYTES: f64 = 65_536.0;

/// Monotone simulation time in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VirtualClock {
    now: f64,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self { now: 0.0 }
    }

    pub fn at(t: f64) -> Self {
        Self { now: t }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Advance to `t`; time never moves backwards.
    pub fn advance_to(&mut self, t: f64) {
        debug_assert!(t >= self.now, "clock regression: {t} < {}", self.now);
        if t > self.now {
            self.now = t;
        }
    }
}

/// Schedule entry as it appears in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulePoint {
    pub t_sec: f64,
    pub mbps: f64,
}

/// Piecewise-constant bandwidth over time. The first entry starts at t = 0
/// and the last rate persists forever.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthSchedule {
    /// (start time sec, rate bytes/sec), strictly increasing start times.
    entries: Vec<(f64, f64)>,
}

impl BandwidthSchedule {
    /// Constant-rate schedule.
    pub fn constant(bytes_per_sec: f64) -> Self {
        Self {
            entries: vec![(0.0, bytes_per_sec)],
        }
    }

    pub fn from_points(points: &[SchedulePoint]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("empty bandwidth schedule".into()));
        }
        if points[0].t_sec != 0.0 {
            return Err(Error::InvalidConfig(
                "bandwidth schedule must start at t = 0".into(),
            ));
        }
        let mut entries = Vec::with_capacity(points.len());
        let mut prev = f64::NEG_INFINITY;
        for p in points {
            if p.t_sec <= prev {
                return Err(Error::InvalidConfig(
                    "bandwidth schedule times must be strictly increasing".into(),
                ));
            }
            if !p.mbps.is_finite() || p.mbps < 0.0 {
                return Err(Error::InvalidConfig(format!("bad rate {} mbps", p.mbps)));
            }
            prev = p.t_sec;
            entries.push((p.t_sec, p.mbps * BYTES_PER_SEC_PER_MBPS));
        }
        Ok(Self { entries })
    }

    /// Rate in bytes/sec active at time `t`.
    pub fn rate_at(&self, t: f64) -> f64 {
        let mut rate = self.entries[0].1;
        for &(start, r) in &self.entries {
            if start <= t {
                rate = r;
            } else {
                break;
            }
        }
        rate
    }

    /// Times at which the rate changes (excluding t = 0).
    pub fn change_times(&self) -> Vec<f64> {
        self.entries.iter().skip(1).map(|&(t, _)| t).collect()
    }

    /// Bytes deliverable by the schedule over `[from, to]`.
    fn capacity(&self, from: f64, to: f64) -> f64 {
        if to <= from {
            return 0.0;
        }
        let mut total = 0.0;
        let mut t = from;
        while t < to {
            let rate = self.rate_at(t);
            let seg_end = self.next_change_after(t).unwrap_or(f64::INFINITY).min(to);
            total += rate * (seg_end - t);
            t = seg_end;
        }
        total
    }

    fn next_change_after(&self, t: f64) -> Option<f64> {
        self.entries
            .iter()
            .map(|&(start, _)| start)
            .find(|&start| start > t)
    }
}

/// A completed (or scheduled) transmission on a channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SendRecord {
    pub channel: u32,
    pub submit: f64,
    pub start: f64,
    pub complete: f64,
    pub bytes: u64,
}

/// Token-bucket shaped FIFO channel.
#[derive(Debug, Clone)]
pub struct Channel {
    id: u32,
    schedule: BandwidthSchedule,
    burst: f64,
    tokens: f64,
    last_update: f64,
    busy_until: f64,
    /// Propagation delay added after transmission completes.
    delay: f64,
    log: Vec<SendRecord>,
}

impl Channel {
    pub fn new(id: u32, schedule: BandwidthSchedule, burst: f64, delay: f64) -> Self {
        Self {
            id,
            schedule,
            burst,
            tokens: burst, // bucket starts full
            last_update: 0.0,
            busy_until: 0.0,
            delay,
            log: Vec::new(),
        }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn log(&self) -> &[SendRecord] {
        &self.log
    }

    pub fn schedule(&self) -> &BandwidthSchedule {
        &self.schedule
    }

    /// Replace the bandwidth schedule, effective for bytes not yet
    /// transmitted; banked tokens are settled under the old schedule first.
    pub fn apply_schedule(&mut self, schedule: BandwidthSchedule, clock: &VirtualClock) {
        self.refill(clock.now());
        self.schedule = schedule;
    }

    /// Rate in effect at the clock's current time.
    pub fn current_rate(&self, clock: &VirtualClock) -> f64 {
        self.schedule.rate_at(clock.now())
    }

    fn refill(&mut self, to: f64) {
        if to > self.last_update {
            let earned = self.schedule.capacity(self.last_update, to);
            self.tokens = (self.tokens + earned).min(self.burst);
            self.last_update = to;
        }
    }

    /// Transmit `nbytes` submitted at the clock's current time; returns the
    /// completion time. FIFO: transmission begins once prior sends finish.
    pub fn shaped_send(&mut self, clock: &VirtualClock, nbytes: u64) -> Result<f64> {
        self.send_at(clock.now(), nbytes)
            .map(|(_, complete)| complete)
    }

    /// Like [`Self::shaped_send`] but returns `(start, complete)`.
    pub fn send_at(&mut self, submit: f64, nbytes: u64) -> Result<(f64, f64)> {
        let start = submit.max(self.busy_until);
        if self.schedule.rate_at(start) <= 0.0 {
            return Err(Error::LinkDown);
        }
        self.refill(start);

        let complete = if (nbytes as f64) <= self.tokens {
            self.tokens -= nbytes as f64;
            start
        } else {
            let mut deficit = nbytes as f64 - self.tokens;
            self.tokens = 0.0;
            let mut t = start;
            loop {
                let rate = self.schedule.rate_at(t);
                let seg_end = self.schedule.next_change_after(t);
                match seg_end {
                    Some(end) if rate <= 0.0 => t = end,
                    Some(end) => {
                        let seg_bytes = rate * (end - t);
                        if seg_bytes >= deficit {
                            break t + deficit / rate;
                        }
                        deficit -= seg_bytes;
                        t = end;
                    }
                    None if rate <= 0.0 => return Err(Error::LinkDown),
                    None => break t + deficit / rate,
                }
            }
        };

        self.last_update = complete;
        self.busy_until = complete;
        let rec = SendRecord {
            channel: self.id,
            submit,
            start,
            complete,
            bytes: nbytes,
        };
        self.log.push(rec);
        Ok((start, complete))
    }
}

/// Average delivery rate over the trailing `window` seconds of the log
/// (ending at the last completion). Zero when nothing has been sent.
pub fn measure_bandwidth(records: &[SendRecord], window: f64) -> Result<f64> {
    if !window.is_finite() || window <= 0.0 {
        return Err(Error::InvalidConfig(format!("bad window {window}")));
    }
    let Some(t_end) = records
        .iter()
        .map(|r| r.complete)
        .fold(None, |acc: Option<f64>, t| {
            Some(acc.map_or(t, |a: f64| a.max(t)))
        })
    else {
        return Ok(0.0);
    };
    let t_start = t_end - window;
    let bytes: u64 = records
        .iter()
        .filter(|r| r.complete > t_start && r.complete <= t_end)
        .map(|r| r.bytes)
        .sum();
    Ok(bytes as f64 / window)
}
