//! Lloyd codebook optimization: alternating nearest-codeword assignment
//! and centroid updates, initialized from a uniform grid over the
//! scaled-weight range.

use crate::error::{Error, Result};

/// Lloyd iteration defaults.
pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-12;

/// An optimized codebook with convergence metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydCodebook {
    /// Strictly sorted codewords.
    pub codewords: Vec<f64>,
    pub iterations: usize,
    pub final_mse: f64,
}

/// Uniform initialization grid: `k` codewords evenly spaced over
/// `[-2 + 1/64, 2 - 1/64]`.
pub fn init_grid(k: usize) -> Vec<f64> {
    let lo = -2.0 + 1.0 / 64.0;
    let hi = 2.0 - 1.0 / 64.0;
    if k == 1 {
        return vec![0.0];
    }
    (0..k)
        .map(|j| lo + (hi - lo) * j as f64 / (k - 1) as f64)
        .collect()
}

/// Index of the nearest codeword. Codewords must be sorted; ties pick
/// the lower index.
pub fn nearest(codewords: &[f64], x: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, &c) in codewords.iter().enumerate() {
        let d = (x - c) * (x - c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Mean squared error of assigning every sample to its nearest codeword.
pub fn assignment_mse(codewords: &[f64], data: &[f64]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    data.iter()
        .map(|&x| {
            let c = codewords[nearest(codewords, x)];
            (x - c) * (x - c)
        })
        .sum::<f64>()
        / data.len() as f64
}

/// Run Lloyd's method on scaled weights.
///
/// Per-iteration MSE is non-increasing, so the result never exceeds the
/// MSE of the initial grid. Empty cells are re-seeded to the midpoint
/// of the widest occupied cluster's sample range.
pub fn lloyd_codebook(data: &[f64], k: usize, max_iter: usize, tol: f64) -> Result<LloydCodebook> {
    lloyd_codebook_with_init(data, init_grid(k), max_iter, tol)
}

/// Sample quantile midpoints: one codeword per equal-mass slice of the
/// sorted data. A data-aware alternative to [`init_grid`] that starts
/// Lloyd much closer to the optimum when the codebook is small.
pub fn quantile_init(data: &[f64], k: usize) -> Vec<f64> {
    let mut xs = data.to_vec();
    xs.sort_by(f64::total_cmp);
    (0..k)
        .map(|i| xs[(i * xs.len() + xs.len() / 2) / k])
        .collect()
}

/// Groups at or below this size go through [`optimal_codebook`]; the
/// iterative path takes over where O(K n^2) stops being cheap.
pub const OPTIMAL_CODEBOOK_MAX_N: usize = 512;

/// Exact 1-D k-means by dynamic programming over the sorted samples.
///
/// Lloyd's iteration only finds a local optimum, and on small groups
/// the gap to the true optimum can be large. Sorting makes the optimal
/// clusters contiguous, so the global optimum is a segmentation problem
/// solvable in O(K n^2) — affordable for groups up to a few hundred
/// samples.
pub fn optimal_codebook(data: &[f64], k: usize) -> Result<LloydCodebook> {
    if k == 0 {
        return Err(Error::Domain("codebook size must be positive".into()));
    }
    if data.len() < k {
        return Err(Error::Domain(format!(
            "{} samples cannot support {} codewords",
            data.len(),
            k
        )));
    }
    if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite sample {}", bad)));
    }

    let mut xs = data.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let mut pre = vec![0.0f64; n + 1];
    let mut pre2 = vec![0.0f64; n + 1];
    for (i, &x) in xs.iter().enumerate() {
        pre[i + 1] = pre[i] + x;
        pre2[i + 1] = pre2[i] + x * x;
    }
    // Squared deviation from the mean for the sorted slice [i, j).
    let cost = |i: usize, j: usize| -> f64 {
        let m = (j - i) as f64;
        let s = pre[j] - pre[i];
        ((pre2[j] - pre2[i]) - s * s / m).max(0.0)
    };

    // best[c][j]: minimal cost covering the first j samples with c+1
    // clusters; cut[c][j]: where the last cluster starts.
    let mut best = vec![f64::INFINITY; n + 1];
    let mut cuts: Vec<Vec<usize>> = Vec::with_capacity(k);
    best[0] = 0.0;
    for c in 0..k {
        let mut next = vec![f64::INFINITY; n + 1];
        let mut cut = vec![0usize; n + 1];
        for j in 1..=n {
            for i in c..j {
                if best[i].is_finite() {
                    let total = best[i] + cost(i, j);
                    if total < next[j] {
                        next[j] = total;
                        cut[j] = i;
                    }
                }
            }
        }
        best = next;
        cuts.push(cut);
    }

    let mut codewords = Vec::with_capacity(k);
    let mut j = n;
    for c in (0..k).rev() {
        let i = cuts[c][j];
        codewords.push((pre[j] - pre[i]) / (j - i) as f64);
        j = i;
    }
    codewords.reverse();
    codewords.dedup();
    let final_mse = assignment_mse(&codewords, data);
    Ok(LloydCodebook {
        codewords,
        iterations: 0,
        final_mse,
    })
}

/// [`lloyd_codebook`] starting from caller-chosen codewords.
pub fn lloyd_codebook_with_init(
    data: &[f64],
    init: Vec<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<LloydCodebook> {
    let k = init.len();
    if k == 0 {
        return Err(Error::Domain("codebook size must be positive".into()));
    }
    if data.len() < k {
        return Err(Error::Domain(format!(
            "{} samples cannot support {} codewords",
            data.len(),
            k
        )));
    }
    if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite sample {}", bad)));
    }

    let mut codewords = init;
    codewords.sort_by(f64::total_cmp);
    let mut prev_mse = f64::INFINITY;
    let mut iterations = 0;
    let mut mse = assignment_mse(&codewords, data);

    for _ in 0..max_iter {
        iterations += 1;
        let kc = codewords.len();

        // Assignment pass: accumulate per-cell sums and sample ranges.
        let mut sums = vec![0.0f64; kc];
        let mut counts = vec![0usize; kc];
        let mut lo = vec![f64::INFINITY; kc];
        let mut hi = vec![f64::NEG_INFINITY; kc];
        for &x in data {
            let j = nearest(&codewords, x);
            sums[j] += x;
            counts[j] += 1;
            lo[j] = lo[j].min(x);
            hi[j] = hi[j].max(x);
        }

        // Centroid update; empty cells are re-seeded across the widest
        // occupied clusters' midpoints, widest first.
        for j in 0..kc {
            if counts[j] > 0 {
                codewords[j] = sums[j] / counts[j] as f64;
            }
        }
        let mut by_width: Vec<usize> = (0..kc).filter(|&i| counts[i] > 0).collect();
        by_width.sort_by(|&a, &b| (hi[b] - lo[b]).total_cmp(&(hi[a] - lo[a])));
        let mut take = by_width.iter().cycle();
        for j in 0..kc {
            if counts[j] == 0 {
                let source = *take.next().expect("at least one occupied cell");
                codewords[j] = 0.5 * (lo[source] + hi[source]);
            }
        }
        codewords.sort_by(f64::total_cmp);
        codewords.dedup();
        // A merge from dedup leaves fewer codewords; that is still a
        // valid (strictly sorted) codebook over this data.

        mse = assignment_mse(&codewords, data);
        if prev_mse - mse < tol {
            break;
        }
        prev_mse = mse;
    }

    Ok(LloydCodebook {
        codewords,
        iterations,
        final_mse: mse,
    })
}
