//! Density-one subsequences of a divergent-in-density sequence.
//!
//! Given `a_1, ..., a_W`, level `k` asks for the first index `n_k` after
//! which the running proportion of `{a_j > k}` stays above `1 - 2^-k`.
//! Block `A_k` keeps the `j` in `[n_k, n_{k+1})` with `a_j > k`. On a finite
//! window the construction stops at the first level with no `n_k`, and the
//! last block runs to the end of the window.

use serde::{Deserialize, Serialize};

/// Highest level attempted; `1 - 2^-53` already rounds to 1.
const MAX_LEVEL: usize = 53;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub level: usize,
    /// 1-based index where the block starts.
    pub start: usize,
    /// 1-based, exclusive.
    pub end: usize,
    pub selected: usize,
    /// Smallest `a_j` kept in the block, if any.
    pub minimum: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySelection {
    /// Selected 1-based indices, ascending.
    pub indices: Vec<usize>,
    pub window: usize,
    /// `|A| / W`.
    pub density: f64,
    /// Smallest running proportion `|A ∩ [1, m]| / m` over `m` in `[W/2, W]`.
    pub lower_density: f64,
    pub blocks: Vec<Block>,
    /// The window still holds terms above the first level the construction
    /// could not reach. False for sequences bounded inside the window.
    pub diverges: bool,
}

impl DensitySelection {
    /// Minima of the nonempty blocks, in level order.
    pub fn block_minima(&self) -> Vec<f64> {
        self.blocks.iter().filter_map(|b| b.minimum).collect()
    }

    pub fn minima_nondecreasing(&self) -> bool {
        self.block_minima().windows(2).all(|w| w[0] <= w[1])
    }
}

/// `n_k` for level `k`, or `None` when the running proportion is still at
/// or below the threshold at the end of the window.
fn threshold_index(values: &[f64], k: usize) -> Option<usize> {
    let level = k as f64;
    let threshold = 1.0 - 0.5f64.powi(k as i32);
    let mut above = 0usize;
    let mut last_low = 0usize;
    for (i, &a) in values.iter().enumerate() {
        above += usize::from(a > level);
        let m = i + 1;
        if (above as f64) <= threshold * m as f64 {
            last_low = m;
        }
    }
    (last_low < values.len()).then_some(last_low + 1)
}

pub fn density_one_extract(values: &[f64]) -> DensitySelection {
    let w = values.len();
    let mut starts = Vec::new();
    for k in 0..=MAX_LEVEL {
        match threshold_index(values, k) {
            Some(n) => starts.push(n),
            None => break,
        }
    }
    let mut indices = Vec::new();
    let mut blocks = Vec::new();
    for (k, &start) in starts.iter().enumerate() {
        let end = starts.get(k + 1).copied().unwrap_or(w + 1);
        let mut selected = 0;
        let mut minimum: Option<f64> = None;
        for j in start..end {
            let a = values[j - 1];
            if a > k as f64 {
                indices.push(j);
                selected += 1;
                minimum = Some(minimum.map_or(a, |m| m.min(a)));
            }
        }
        blocks.push(Block {
            level: k,
            start,
            end,
            selected,
            minimum,
        });
    }
    let first_missing = starts.len() as f64;
    let diverges = !starts.is_empty() && values.iter().any(|&a| a > first_missing);

    let mut lower_density = if w == 0 { 0.0 } else { f64::INFINITY };
    let mut count = 0usize;
    let mut next = indices.iter().peekable();
    for m in 1..=w {
        if next.peek() == Some(&&m) {
            count += 1;
            next.next();
        }
        if 2 * m >= w {
            lower_density = lower_density.min(count as f64 / m as f64);
        }
    }
    DensitySelection {
        density: if w == 0 { 0.0 } else { indices.len() as f64 / w as f64 },
        indices,
        window: w,
        lower_density,
        blocks,
        diverges,
    }
}

/// `log n` for `n = 1..=w`, set to zero on perfect squares.
pub fn log_with_square_spikes(w: usize) -> Vec<f64> {
    (1..=w)
        .map(|n| {
            let r = (n as f64).sqrt().round() as usize;
            if r * r == n {
                0.0
            } else {
                (n as f64).ln()
            }
        })
        .collect()
}
