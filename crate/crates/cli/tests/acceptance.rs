//! Acceptance suite: one test per release criterion, each printing a
//! `[PASS]` line with the measured values.
//!
//! Run with `cargo test -p qpipe-cli --test acceptance -- --nocapture` to
//! see the lines.

use qpipe_cli::scenario::{load_scenario, phase_bounds, run_scenario, steady_windows};
use qpipe_core::controller::{next_bitwidth, ControllerConfig};
use qpipe_core::pipeline::{run_pipeline, RunConfig, RunTrace};
use qpipe_core::quant::{
    aciq_alpha, aciq_alpha_oracle, build_histogram, dequantize, directed_search, estimate_laplace,
    histogram_peak_bound, laplace_histogram, mse, pack_codes, quantize, unpack_codes, Bitwidth,
    LaplaceParams, Tensor,
};
use std::path::{Path, PathBuf};
use std::sync::LazyLock;
use std::time::{Duration, Instant};

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn out_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

// Deterministic test-local sampler.
struct Rng(u64);

impl Rng {
    fn new(seed: u64) -> Self {
        Self(if seed == 0 { 0x9E37_79B9 } else { seed })
    }

    fn uniform(&mut self) -> f64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        (self.0.wrapping_mul(0x2545_F491_4F6C_DD1D) >> 11) as f64 / (1u64 << 53) as f64
    }

    fn laplace(&mut self, mu: f64, b: f64) -> f64 {
        let u = self.uniform() - 0.5;
        mu - b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }
}

struct AdaptiveRun {
    cfg: RunConfig,
    trace: RunTrace,
    wall: Duration,
}

/// The five-phase adaptive run, executed once and shared by the criteria
/// that inspect it.
static FIVE_PHASE: LazyLock<AdaptiveRun> = LazyLock::new(|| {
    let sc = load_scenario(&scenario_path("fig5-phases.json")).expect("scenario loads");
    let started = Instant::now();
    let trace = run_pipeline(&sc.config).expect("five-phase run succeeds");
    let wall = started.elapsed();
    AdaptiveRun {
        cfg: sc.config,
        trace,
        wall,
    }
});

// Criterion 1: the five-phase bandwidth schedule drives the bitwidth
// through exactly 32 -> 16 -> 2 -> 8 -> 32 (steady state per phase), a
// 6-bit transient is tolerated in phase 3 under --ladder, and the whole
// simulation completes in well under 10 seconds of wall time.
#[test]
fn c1_phase_reproduction() {
    let run = &*FIVE_PHASE;
    let phases = phase_bounds(&run.cfg, run.trace.finished_at);
    assert_eq!(phases.len(), 5, "schedule defines five phases");
    let steady: Vec<Option<u8>> = steady_windows(&run.trace, &phases)
        .iter()
        .map(|w| w.map(|w| w.q_new))
        .collect();
    let expected = [32u8, 16, 2, 8, 32];
    assert_eq!(
        steady,
        expected.iter().map(|&q| Some(q)).collect::<Vec<_>>(),
        "steady bitwidth per phase"
    );
    assert!(
        run.wall < Duration::from_secs(10),
        "simulation took {:?}",
        run.wall
    );

    // Ladder variant: same steady states; any 6-bit excursion must be a
    // phase-3 transient.
    let mut ladder_cfg = run.cfg.clone();
    ladder_cfg.adapt.ladder = true;
    let ladder = run_pipeline(&ladder_cfg).expect("ladder run succeeds");
    let lphases = phase_bounds(&ladder_cfg, ladder.finished_at);
    let lsteady: Vec<Option<u8>> = steady_windows(&ladder, &lphases)
        .iter()
        .map(|w| w.map(|w| w.q_new))
        .collect();
    assert_eq!(lsteady, steady, "ladder steady states match");
    let (p3_lo, p3_hi) = lphases[3];
    for w in ladder.windows.iter().filter(|w| w.q_new == 6) {
        assert!(
            w.t_end >= p3_lo && w.t_start <= p3_hi,
            "6-bit outside phase 3: window {} [{}, {}]",
            w.window_index,
            w.t_start,
            w.t_end
        );
    }
    let saw_six = ladder.windows.iter().any(|w| w.q_new == 6);

    println!(
        "[PASS] criterion 1: steady bitwidths 32/16/2/8/32 in {:.2?} (ladder transient 6-bit: {})",
        run.wall,
        if saw_six { "observed" } else { "not observed" }
    );
}

// Criterion 2: the bitwidth update arithmetic reproduces the three phase
// transitions exactly, and clamps to 32 and 2 at the extremes.
#[test]
fn c2_bitwidth_update_arithmetic() {
    let cfg = ControllerConfig::default();
    let cases = [
        (Bitwidth::B32, 38.7e6, 50e6, Bitwidth::B16),
        (Bitwidth::B16, 19.35e6, 6.25e6, Bitwidth::B2),
        (Bitwidth::B2, 2.42e6, 25e6, Bitwidth::B8),
    ];
    for (q, v, b, expect) in cases {
        let got = next_bitwidth(q, v, 64, 100.0, b, &cfg).unwrap();
        assert_eq!(got, expect, "q={q} v={v} b={b}");
    }
    let high = next_bitwidth(Bitwidth::B8, 1e6, 64, 100.0, 1e13, &cfg).unwrap();
    assert_eq!(high, Bitwidth::B32);
    let low = next_bitwidth(Bitwidth::B32, 38.7e6, 64, 100.0, 1e3, &cfg).unwrap();
    assert_eq!(low, Bitwidth::B2);
    println!("[PASS] criterion 2: bitwidth update cases 16/2/8 exact, clamps 32 and 2");
}

// Criterion 3: the embedded clipping table agrees with the numerical
// minimizer within 0.5%, and the 2- and 8-bit optima sit at the known
// Laplace values 2.83 b and 9.89 b within 2%.
#[test]
fn c3_clipping_table_vs_oracle() {
    let widths = [
        Bitwidth::B2,
        Bitwidth::B4,
        Bitwidth::B6,
        Bitwidth::B8,
        Bitwidth::B16,
    ];
    let mut worst = 0.0f64;
    for q in widths {
        for b in [0.1, 1.0, 10.0] {
            let table = aciq_alpha(q, b).unwrap();
            let oracle = aciq_alpha_oracle(q, b).unwrap();
            let rel = (table - oracle).abs() / oracle;
            worst = worst.max(rel);
            assert!(rel < 5e-3, "q={q} b={b}: {rel}");
        }
    }
    for b in [0.1, 1.0, 10.0] {
        let a2 = aciq_alpha(Bitwidth::B2, b).unwrap();
        assert!(
            (a2 - 2.83 * b).abs() / (2.83 * b) < 0.02,
            "2-bit alpha {a2} at b={b}"
        );
        let a8 = aciq_alpha(Bitwidth::B8, b).unwrap();
        assert!(
            (a8 - 9.89 * b).abs() / (9.89 * b) < 0.02,
            "8-bit alpha {a8} at b={b}"
        );
    }
    println!(
        "[PASS] criterion 3: clipping table within {:.4}% of oracle; 2/8-bit optima at 2.83b, 9.89b",
        100.0 * worst
    );
}

// Criterion 4: on the heavy-tail mixture the directed search cuts the
// histogram fit error by at least 30% and lands within 2% of a
// 10,000-point grid; across 1,000 random tensors it never fits worse than
// the initial estimate.
#[test]
fn c4_directed_search_improvement() {
    let mut rng = Rng::new(99);
    let data: Vec<f32> = (0..200_000)
        .map(|_| {
            let b = if rng.uniform() < 0.5 { 0.5 } else { 3.0 };
            rng.laplace(0.0, b) as f32
        })
        .collect();
    let t = Tensor::from_vec(data).unwrap();
    let d_r = build_histogram(&t, 2048).unwrap();
    let p0 = estimate_laplace(&t).unwrap();
    let fit = |b: f64| {
        let de = laplace_histogram(&LaplaceParams { mu: p0.mu, b }, &d_r).unwrap();
        mse(d_r.densities(), de.densities()).unwrap()
    };

    let refined = directed_search(&d_r, &p0, 100).unwrap();
    assert_ne!(refined.b, p0.b, "search must move off the initial estimate");
    let drop = 1.0 - fit(refined.b) / fit(p0.b);
    assert!(drop >= 0.30, "fit error dropped only {:.1}%", 100.0 * drop);

    let b_r = histogram_peak_bound(&d_r).unwrap();
    let (lo, hi) = (p0.b.min(b_r), p0.b.max(b_r));
    let mut best = (f64::INFINITY, lo);
    for k in 0..10_000 {
        let cand = lo + (hi - lo) * k as f64 / 9_999.0;
        let m = fit(cand);
        if m < best.0 {
            best = (m, cand);
        }
    }
    let rel = (refined.b - best.1).abs() / best.1;
    assert!(rel <= 0.02, "b* {} vs grid {}", refined.b, best.1);

    // Never-regress over random tensors.
    for seed in 1..=1000u64 {
        let mut rng = Rng::new(seed.wrapping_mul(2_654_435_761));
        let scale = 0.05 + 4.0 * rng.uniform();
        let mu = rng.uniform() * 2.0 - 1.0;
        let data: Vec<f32> = (0..2048).map(|_| rng.laplace(mu, scale) as f32).collect();
        let t = Tensor::from_vec(data).unwrap();
        let d_r = build_histogram(&t, 128).unwrap();
        let p0 = estimate_laplace(&t).unwrap();
        let out = directed_search(&d_r, &p0, 100).unwrap();
        let fit = |b: f64| {
            let de = laplace_histogram(&LaplaceParams { mu: p0.mu, b }, &d_r).unwrap();
            mse(d_r.densities(), de.densities()).unwrap()
        };
        assert!(
            fit(out.b) <= fit(p0.b) + 1e-15,
            "seed {seed}: regressed ({} vs {})",
            fit(out.b),
            fit(p0.b)
        );
    }
    println!(
        "[PASS] criterion 4: mixture fit error -{:.1}% (>=30%), b* within {:.2}% of 10k grid, 1000-tensor never-regress",
        100.0 * drop,
        100.0 * rel
    );
}

// Criterion 5: quantization behaves: in-clip round-trip error bounded by
// step/2 (up to f32 storage slack) across 1,000 random tensors and every
// width, packing is bijective, 32-bit is bit-exact, and payload bytes scale
// exactly as q/32.
#[test]
fn c5_quantization_properties() {
    let widths = [
        Bitwidth::B2,
        Bitwidth::B4,
        Bitwidth::B6,
        Bitwidth::B8,
        Bitwidth::B16,
    ];
    for seed in 1..=1000u64 {
        let mut rng = Rng::new(seed.wrapping_mul(0x9E37_79B9));
        let n = 16 + (rng.uniform() * 240.0) as usize;
        let spread = 0.01 + rng.uniform() * 100.0;
        let center = (rng.uniform() - 0.5) * 50.0;
        let data: Vec<f32> = (0..n)
            .map(|_| (center + (rng.uniform() - 0.5) * spread) as f32)
            .collect();
        let t = Tensor::from_vec(data.clone()).unwrap();

        for q in widths {
            let qt = quantize(&t, q, None).unwrap();
            let back = dequantize(&qt).unwrap();
            for (a, b) in data.iter().zip(back.data()) {
                let bound = qt.step as f64 * 0.505 + (*b as f64).abs() * f32::EPSILON as f64;
                assert!(
                    ((*a as f64) - (*b as f64)).abs() <= bound,
                    "seed {seed} q={q}: {a} vs {b} (step {})",
                    qt.step
                );
            }
            let packed = pack_codes(&qt.codes, q).unwrap();
            let unpacked = unpack_codes(&packed, q, qt.codes.len()).unwrap();
            assert_eq!(
                unpacked, qt.codes,
                "seed {seed} q={q}: packing not bijective"
            );
        }

        let qt = quantize(&t, Bitwidth::B32, None).unwrap();
        let back = dequantize(&qt).unwrap();
        for (a, b) in data.iter().zip(back.data()) {
            assert_eq!(
                a.to_bits(),
                b.to_bits(),
                "seed {seed}: 32-bit not bit-exact"
            );
        }
    }

    // Payload ratio is exact for byte-aligned element counts.
    let n = 1024usize;
    let t = Tensor::from_vec((0..n).map(|i| i as f32).collect()).unwrap();
    let full = quantize(&t, Bitwidth::B32, None).unwrap().payload_len();
    for q in Bitwidth::ALL {
        let qt = quantize(&t, q, None).unwrap();
        assert_eq!(qt.payload_len() * 32, full * q.bits() as usize, "{q}");
    }
    println!("[PASS] criterion 5: round-trip bound, packing bijectivity, 32-bit identity, q/32 payload ratio");
}

// Criterion 6: on the seeded toy model the comparative accuracy ordering
// holds at 2 bits (pda > aciq > naive agreement with fp32) and pda keeps
// at least 0.95 agreement at 8 bits.
#[test]
fn c6_comparative_accuracy_ordering() {
    let sc = load_scenario(&scenario_path("bitwidth-sweep.json")).unwrap();
    let dir = out_dir("acceptance-bitwidth-sweep");
    let outcome = run_scenario(&sc, &dir, None, false).unwrap();
    assert!(
        outcome.passed(),
        "sweep assertions failed: {:?}",
        outcome.failures
    );

    let table = std::fs::read_to_string(dir.join("bitwidth_sweep.csv")).unwrap();
    let mut lookup = std::collections::HashMap::new();
    for line in table.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        lookup.insert(
            (fields[0].to_string(), fields[1].parse::<u8>().unwrap()),
            fields[2].parse::<f64>().unwrap(),
        );
    }
    let pda2 = lookup[&("pda".to_string(), 2)];
    let aciq2 = lookup[&("aciq".to_string(), 2)];
    let naive2 = lookup[&("naive".to_string(), 2)];
    let pda8 = lookup[&("pda".to_string(), 8)];
    assert!(
        pda2 > aciq2 && aciq2 > naive2,
        "{pda2} / {aciq2} / {naive2}"
    );
    assert!(pda8 >= 0.95, "pda@8 {pda8}");
    println!(
        "[PASS] criterion 6: 2-bit agreement pda {pda2:.3} > aciq {aciq2:.3} > naive {naive2:.3}; pda@8bit {pda8:.3} >= 0.95"
    );
}

// Criterion 7: after each bandwidth drop in the five-phase run, the
// windowed output rate recovers to at least 0.95 R within two windows.
#[test]
fn c7_recovery_within_two_windows() {
    let run = &*FIVE_PHASE;
    let target = run.cfg.adapt.target_rate_img_s;
    let schedule = &run.cfg.channels[0].schedule;
    let mut drops = Vec::new();
    for pair in schedule.windows(2) {
        if pair[1].mbps < pair[0].mbps {
            drops.push(pair[1].t_sec);
        }
    }
    assert_eq!(drops.len(), 2, "five-phase schedule has two drops");

    for &t_drop in &drops {
        let mut after: Vec<_> = run
            .trace
            .windows
            .iter()
            .filter(|w| w.stage == 0 && w.t_start >= t_drop)
            .collect();
        after.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
        let first_two: Vec<f64> = after.iter().take(2).map(|w| w.avg_rate_img_s).collect();
        assert!(
            first_two.iter().any(|&r| r >= 0.95 * target),
            "no recovery within two windows of drop at {t_drop}: rates {first_two:?}"
        );
    }
    println!(
        "[PASS] criterion 7: output rate back above {:.0} img/s within two windows of both drops",
        0.95 * target
    );
}

// Criterion 8: swept constant bandwidths match the bottleneck law
// min(compute rate, link rate / frame size) within 5% everywhere.
#[test]
fn c8_bottleneck_law() {
    let sc = load_scenario(&scenario_path("fig1-sweep.json")).unwrap();
    let dir = out_dir("acceptance-fig1");
    let outcome = run_scenario(&sc, &dir, None, false).unwrap();
    assert!(
        outcome.passed(),
        "sweep assertions failed: {:?}",
        outcome.failures
    );

    let mut worst = 0.0f64;
    let table = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    for line in table.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let rel: f64 = fields[3].parse().unwrap();
        worst = worst.max(rel);
        assert!(rel <= 0.05, "point {line} exceeds 5%");
    }
    println!(
        "[PASS] criterion 8: throughput within {:.2}% of the bottleneck law at every swept bandwidth",
        100.0 * worst
    );
}

// Criterion 9: identical scenario and seed produce byte-identical outputs.
#[test]
fn c9_determinism() {
    let sc = load_scenario(&scenario_path("fig5-phases.json")).unwrap();
    let dir_a = out_dir("acceptance-det-a");
    let dir_b = out_dir("acceptance-det-b");
    run_scenario(&sc, &dir_a, None, false).unwrap();
    run_scenario(&sc, &dir_b, None, false).unwrap();

    let mut names: Vec<String> = std::fs::read_dir(&dir_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.len() >= 7, "expected full trace set, got {names:?}");
    for name in &names {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    println!(
        "[PASS] criterion 9: {} output files byte-identical across repeated runs",
        names.len()
    );
}
