use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timetag::TimeTagStream;

/// Coincidence counts versus delay `t_b − t_a`.
///
/// Bin `k` covers `[start + k·w, start + (k+1)·w)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    start_fs: i128,
    width_fs: i128,
    pub counts: Vec<u64>,
    pub total_pairs_considered: u64,
}

impl CorrelationHistogram {
    pub fn start_delay_ps(&self) -> f64 {
        self.start_fs as f64 / 1000.0
    }

    pub fn bin_width_ps(&self) -> f64 {
        self.width_fs as f64 / 1000.0
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn bin_center_ps(&self, k: usize) -> f64 {
        (self.start_fs as f64 + (k as f64 + 0.5) * self.width_fs as f64) / 1000.0
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = k;
            }
        }
        best
    }

    pub fn median(&self) -> u64 {
        let mut v = self.counts.clone();
        let mid = v.len() / 2;
        *v.select_nth_unstable(mid).1
    }

    /// Sum of the bins whose centres lie within `window/2` of `center_ps`.
    pub fn integrate(&self, center_ps: f64, window_ps: f64) -> u64 {
        (0..self.len())
            .filter(|&k| (self.bin_center_ps(k) - center_ps).abs() <= window_ps / 2.0)
            .map(|k| self.counts[k])
            .sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "delay_ps,counts")?;
        for (k, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{}", self.bin_center_ps(k), c)?;
        }
        w.flush()
    }

    fn add(&mut self, other: &CorrelationHistogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_pairs_considered += other.total_pairs_considered;
    }
}

fn to_fs(ps: f64) -> i128 {
    (ps * 1000.0).round() as i128
}

struct Grid {
    start: i128,
    width: i128,
    n: usize,
}

impl Grid {
    fn new(delay_min_ps: f64, delay_max_ps: f64, bin_width_ps: f64) -> Result<Self> {
        if !(delay_min_ps < delay_max_ps) {
            return Err(Error::param("delay range", "delay_min must be < delay_max"));
        }
        let width = to_fs(bin_width_ps);
        if width <= 0 {
            return Err(Error::param("bin_width", "must be > 0"));
        }
        let start = to_fs(delay_min_ps);
        let span = to_fs(delay_max_ps) - start;
        let n = ((span + width - 1) / width).max(1) as usize;
        Ok(Self { start, width, n })
    }

    fn end(&self) -> i128 {
        self.start + self.width * self.n as i128
    }

    fn empty(&self) -> CorrelationHistogram {
        CorrelationHistogram {
            start_fs: self.start,
            width_fs: self.width,
            counts: vec![0; self.n],
            total_pairs_considered: 0,
        }
    }
}

/// Accumulates pairs for the A tags `range` against all of B.
fn accumulate(a: &TimeTagStream, b: &TimeTagStream, grid: &Grid, range: std::ops::Range<usize>) -> CorrelationHistogram {
    let mut h = grid.empty();
    if range.is_empty() || b.is_empty() {
        return h;
    }
    let end = grid.end();
    let wa = a.bin_width_fs() as i128;
    let wb = b.bin_width_fs() as i128;
    let bb = b.bins();
    let tb = |j: usize| bb[j] as i128 * wb;
    // first B tag with t_b >= t_a + start, for the first A tag of the range
    let t0 = a.bins()[range.start] as i128 * wa + grid.start;
    let mut lo = bb.partition_point(|&x| (x as i128) * wb < t0);
    let mut hi = lo;
    for &ab in &a.bins()[range] {
        let ta = ab as i128 * wa;
        let from = ta + grid.start;
        let to = ta + end;
        while lo < bb.len() && tb(lo) < from {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < bb.len() && tb(hi) < to {
            hi += 1;
        }
        for j in lo..hi {
            let k = (tb(j) - from) / grid.width;
            h.counts[k as usize] += 1;
        }
        h.total_pairs_considered += (hi - lo) as u64;
    }
    h
}

/// Histogram of `t_b − t_a` over `[delay_min, delay_max)` by a sliding two-pointer
/// merge; cost is linear in the stream lengths plus the number of matches.
pub fn cross_correlate(
    a: &TimeTagStream,
    b: &TimeTagStream,
    delay_min_ps: f64,
    delay_max_ps: f64,
    bin_width_ps: f64,
) -> Result<CorrelationHistogram> {
    let grid = Grid::new(delay_min_ps, delay_max_ps, bin_width_ps)?;
    Ok(accumulate(a, b, &grid, 0..a.len()))
}

/// As [`cross_correlate`], with stream A split into `chunks` contiguous parts
/// processed in parallel. Integer accumulation makes the result identical
/// for any chunk count.
pub fn cross_correlate_chunked(
    a: &TimeTagStream,
    b: &TimeTagStream,
    delay_min_ps: f64,
    delay_max_ps: f64,
    bin_width_ps: f64,
    chunks: usize,
) -> Result<CorrelationHistogram> {
    let grid = Grid::new(delay_min_ps, delay_max_ps, bin_width_ps)?;
    let chunks = chunks.max(1);
    let step = a.len().div_ceil(chunks).max(1);
    let ranges: Vec<_> = (0..a.len()).step_by(step).map(|s| s..(s + step).min(a.len())).collect();
    let partials: Vec<CorrelationHistogram> = ranges
        .into_par_iter()
        .map(|r| accumulate(a, b, &grid, r))
        .collect();
    let mut h = grid.empty();
    for p in &partials {
        h.add(p);
    }
    Ok(h)
}

/// How coincidences inside a window are tallied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoincidenceMode {
    /// Each tag joins at most one pair, matched greedily to the earliest partner.
    #[default]
    Greedy,
    /// Every tag pair inside the window counts, as when integrating the histogram.
    Histogram,
}

/// Pairs with `|t_b − t_a − delay| ≤ window/2`.
pub fn count_coincidences(
    a: &TimeTagStream,
    b: &TimeTagStream,
    delay_ps: f64,
    window_ps: f64,
    mode: CoincidenceMode,
) -> Result<u64> {
    if !(window_ps > 0.0) {
        return Err(Error::param("window", "must be > 0"));
    }
    let half = to_fs(window_ps / 2.0);
    let d = to_fs(delay_ps);
    let wa = a.bin_width_fs() as i128;
    let wb = b.bin_width_fs() as i128;
    let bb = b.bins();
    let tb = |j: usize| bb[j] as i128 * wb;
    let mut count = 0u64;
    let mut lo = 0usize;
    match mode {
        CoincidenceMode::Histogram => {
            let mut hi = 0usize;
            for &ab in a.bins() {
                let c = ab as i128 * wa + d;
                while lo < bb.len() && tb(lo) < c - half {
                    lo += 1;
                }
                hi = hi.max(lo);
                while hi < bb.len() && tb(hi) <= c + half {
                    hi += 1;
                }
                count += (hi - lo) as u64;
            }
        }
        CoincidenceMode::Greedy => {
            for &ab in a.bins() {
                let c = ab as i128 * wa + d;
                while lo < bb.len() && tb(lo) < c - half {
                    lo += 1;
                }
                if lo < bb.len() && tb(lo) <= c + half {
                    count += 1;
                    lo += 1;
                }
            }
        }
    }
    Ok(count)
}

/// Two-stage delay search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakSearch {
    pub min_ps: f64,
    pub max_ps: f64,
    pub coarse_bin_ps: f64,
    /// Half-width of the fine histogram around the coarse peak.
    pub fine_half_range_ps: f64,
}

impl Default for PeakSearch {
    fn default() -> Self {
        Self {
            min_ps: -1.2e9,
            max_ps: 1.2e9,
            coarse_bin_ps: 10_000.0,
            fine_half_range_ps: 10_000.0,
        }
    }
}

/// Coarse search over the full range, then a fine histogram at tagger
/// resolution around the coarse maximum. Fine bins are centred on the
/// tagger grid so each holds exactly one tag-difference value.
pub fn find_peak(a: &TimeTagStream, b: &TimeTagStream, search: &PeakSearch) -> Result<CorrelationHistogram> {
    let coarse = cross_correlate(a, b, search.min_ps, search.max_ps, search.coarse_bin_ps)?;
    // a peak may straddle two coarse bins, so rank adjacent pairs
    let c = &coarse.counts;
    let k = if c.len() < 2 {
        0
    } else {
        let mut best = 0;
        for i in 0..c.len() - 1 {
            if c[i] + c[i + 1] > c[best] + c[best + 1] {
                best = i;
            }
        }
        best
    };
    let center = coarse.start_delay_ps() + (k as f64 + 1.0) * coarse.bin_width_ps();
    let w = a.bin_width_ps();
    let m = (center / w).round();
    let half_bins = (search.fine_half_range_ps / w).ceil();
    cross_correlate(a, b, (m - half_bins - 0.5) * w, (m + half_bins + 0.5) * w, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(bins: &[u64]) -> TimeTagStream {
        TimeTagStream::from_bins(1000, bins.to_vec(), 0).unwrap()
    }

    #[test]
    fn identical_streams_peak_at_zero() {
        let a = stream(&[10, 50, 90, 400, 1000]);
        let h = cross_correlate(&a, &a, -5.5, 5.5, 1.0).unwrap();
        assert_eq!(h.len(), 11);
        assert_eq!(h.counts[5], 5);
        assert_eq!(h.total(), 5);
        assert_eq!(h.bin_center_ps(5), 0.0);
    }

    #[test]
    fn empty_streams_give_zero_histogram() {
        let a = stream(&[]);
        let b = stream(&[1, 2, 3]);
        let h = cross_correlate(&a, &b, -10.0, 10.0, 1.0).unwrap();
        assert_eq!(h.total(), 0);
        assert_eq!(cross_correlate(&b, &a, -10.0, 10.0, 1.0).unwrap().total(), 0);
        assert!(cross_correlate(&a, &b, 1.0, 1.0, 1.0).is_err());
        assert!(cross_correlate(&a, &b, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn greedy_uses_each_tag_once() {
        let a = stream(&[100, 101]);
        let b = stream(&[100]);
        assert_eq!(count_coincidences(&a, &b, 0.0, 4.0, CoincidenceMode::Histogram).unwrap(), 2);
        assert_eq!(count_coincidences(&a, &b, 0.0, 4.0, CoincidenceMode::Greedy).unwrap(), 1);
        assert!(count_coincidences(&a, &b, 0.0, 0.0, CoincidenceMode::Greedy).is_err());
    }
}
