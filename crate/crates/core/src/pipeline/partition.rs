//! Balanced contiguous partitioning of model blocks onto stages.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Contiguous block range `[lo, hi)` assigned to one stage/device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shard {
    pub stage_id: u32,
    pub lo: usize,
    pub hi: usize,
}

impl Shard {
    pub fn len(&self) -> usize {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi == self.lo
    }
}

/// Split `block_costs` into `n_stages` contiguous shards minimizing the
/// maximum per-stage cost sum (exact dynamic program over cut points, ties
/// broken toward earlier cuts).
pub fn partition_even(block_costs: &[f64], n_stages: usize) -> Result<Vec<Shard>> {
    let n = block_costs.len();
    if n_stages == 0 || n_stages > n {
        return Err(Error::InvalidConfig(format!(
            "cannot split {n} blocks into {n_stages} stages"
        )));
    }

    let mut prefix = vec![0.0f64; n + 1];
    for (i, c) in block_costs.iter().enumerate() {
        prefix[i + 1] = prefix[i] + c;
    }
    let seg = |a: usize, b: usize| prefix[b] - prefix[a];

    // best[k][i]: minimal max-cost splitting the first i blocks into k+1
    // stages; cut[k][i]: the chosen previous boundary.
    let mut best = vec![vec![f64::INFINITY; n + 1]; n_stages];
    let mut cut = vec![vec![0usize; n + 1]; n_stages];
    for (i, slot) in best[0].iter_mut().enumerate().skip(1) {
        *slot = seg(0, i);
    }
    for k in 1..n_stages {
        for i in (k + 1)..=n {
            for j in k..i {
                let cand = best[k - 1][j].max(seg(j, i));
                // Strict improvement keeps the earliest optimal cut.
                if cand < best[k][i] {
                    best[k][i] = cand;
                    cut[k][i] = j;
                }
            }
        }
    }

    let mut bounds = vec![n];
    let mut i = n;
    for k in (1..n_stages).rev() {
        i = cut[k][i];
        bounds.push(i);
    }
    bounds.push(0);
    bounds.reverse();

    Ok(bounds
        .windows(2)
        .enumerate()
        .map(|(s, w)| Shard {
            stage_id: s as u32,
            lo: w[0],
            hi: w[1],
        })
        .collect())
}
