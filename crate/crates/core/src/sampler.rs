//! Edge-aware adaptive sampling of semantic occupancy grids.
//!
//! Sampling weight for a cell decays exponentially with its Chebyshev
//! distance to the nearest differently-labeled cell, so draws concentrate in
//! boundary bands while keeping full support. A coverage diagnostic reports
//! the fraction of occupied coarse bins that received no sample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default number of query points per present class.
pub const DEFAULT_K: usize = 128;
/// Default number of semantic classes.
pub const DEFAULT_M: usize = 5;
/// Default edge-decay length, cells.
pub const DEFAULT_TAU: f64 = 2.0;

/// Default class names for `M = 5`.
pub fn default_class_names() -> Vec<String> {
    ["none", "road", "obstacle", "red-light", "green-light"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// A labeled 2-D grid over the `(s_u, s_v)` chart.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticOccupancyGrid {
    width: usize,
    height: usize,
    /// meters per cell in `(s_u, s_v)`
    resolution: f64,
    /// row-major class ids, `labels[row * width + col]`
    labels: Vec<u8>,
    /// class count
    m: usize,
    pub class_names: Vec<String>,
    /// time index in `1…T+H_z`
    pub t: usize,
}

impl SemanticOccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        labels: Vec<u8>,
        m: usize,
        t: usize,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("grid must be at least 1×1".into()));
        }
        if !(resolution > 0.0) {
            return Err(Error::InvalidArgument("resolution must be positive".into()));
        }
        if m == 0 || m > 256 {
            return Err(Error::InvalidArgument(format!("class count {m} unsupported")));
        }
        if labels.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "expected {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| (l as usize) >= m) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for M={m}"
            )));
        }
        let class_names = if m == DEFAULT_M {
            default_class_names()
        } else {
            (0..m).map(|i| format!("class-{i}")).collect()
        };
        Ok(Self {
            width,
            height,
            resolution,
            labels,
            m,
            class_names,
            t,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn class_count(&self) -> usize {
        self.m
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, col: usize, row: usize) -> u8 {
        self.labels[row * self.width + col]
    }

    /// Cell center in `(s_u, s_v)` meters.
    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            (col as f64 + 0.5) * self.resolution,
            (row as f64 + 0.5) * self.resolution,
        )
    }

    /// Sentinel distance for grids without any label boundary.
    pub fn sentinel_distance(&self) -> u32 {
        (self.width + self.height) as u32
    }
}

/// One sampled query cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub col: usize,
    pub row: usize,
    /// cell center in `(s_u, s_v)` meters
    pub s_u: f64,
    pub s_v: f64,
    /// normalized sampling probability within the class
    pub weight: f64,
    pub class: u8,
}

/// Per-class sample lists; exactly `K` entries for every class present in
/// the grid, empty for absent classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub k: usize,
    pub seed: u64,
    pub per_class: Vec<Vec<Sample>>,
}

impl SampleSet {
    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.per_class.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.per_class.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Chebyshev distance (in cells) from every cell to the nearest cell with a
/// different label; the sentinel `width + height` when no boundary exists.
///
/// Two-pass chamfer sweep per present label, O(M·N).
pub fn edge_distance_transform(sog: &SemanticOccupancyGrid) -> Vec<u32> {
    let (w, h) = (sog.width, sog.height);
    let n = w * h;
    let sentinel = sog.sentinel_distance();

    let mut present = vec![false; sog.m];
    for &l in &sog.labels {
        present[l as usize] = true;
    }
    if present.iter().filter(|&&p| p).count() <= 1 {
        return vec![sentinel; n];
    }

    let mut out = vec![u32::MAX; n];
    let mut dist = vec![0u32; n];
    for (label, _) in present.iter().enumerate().filter(|(_, &p)| p) {
        let label = label as u8;
        let inf = u32::MAX - 1;
        for i in 0..n {
            dist[i] = if sog.labels[i] == label { 0 } else { inf };
        }
        // forward: N, NW, NE, W
        for row in 0..h {
            for col in 0..w {
                let i = row * w + col;
                let mut d = dist[i];
                if row > 0 {
                    d = d.min(dist[i - w] + 1);
                    if col > 0 {
                        d = d.min(dist[i - w - 1] + 1);
                    }
                    if col + 1 < w {
                        d = d.min(dist[i - w + 1] + 1);
                    }
                }
                if col > 0 {
                    d = d.min(dist[i - 1] + 1);
                }
                dist[i] = d;
            }
        }
        // backward: S, SE, SW, E
        for row in (0..h).rev() {
            for col in (0..w).rev() {
                let i = row * w + col;
                let mut d = dist[i];
                if row + 1 < h {
                    d = d.min(dist[i + w] + 1);
                    if col > 0 {
                        d = d.min(dist[i + w - 1] + 1);
                    }
                    if col + 1 < w {
                        d = d.min(dist[i + w + 1] + 1);
                    }
                }
                if col + 1 < w {
                    d = d.min(dist[i + 1] + 1);
                }
                dist[i] = d;
            }
        }
        // dist now holds distance-to-label; fold into cells of other labels
        for i in 0..n {
            if sog.labels[i] != label {
                out[i] = out[i].min(dist[i]);
            }
        }
    }
    out
}

/// Substream seed for one class; keeps per-class draws independent while
/// remaining a pure function of `(seed, class)`.
fn class_rng(seed: u64, class: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (class as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Draws `K` cells per present class with probability `∝ exp(−dist/tau)`
/// within the class: without replacement when the class has at least `K`
/// cells, with replacement otherwise. Deterministic given `seed`.
pub fn sample_queries(
    sog: &SemanticOccupancyGrid,
    k: usize,
    tau: f64,
    seed: u64,
) -> Result<SampleSet> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be ≥ 1".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument("tau must be positive".into()));
    }
    let dist = edge_distance_transform(sog);

    let mut per_class: Vec<Vec<Sample>> = vec![Vec::new(); sog.m];
    for class in 0..sog.m {
        let cells: Vec<usize> = (0..sog.labels.len())
            .filter(|&i| sog.labels[i] as usize == class)
            .collect();
        if cells.is_empty() {
            continue;
        }
        let raw: Vec<f64> = cells.iter().map(|&i| (-(dist[i] as f64) / tau).exp()).collect();
        let total: f64 = raw.iter().sum();
        let mut rng = class_rng(seed, class);

        let chosen: Vec<usize> = if cells.len() >= k {
            // weighted without replacement: exponential keys, smallest-k
            // (Efraimidis-Spirakis)
            let mut keyed: Vec<(f64, usize)> = raw
                .iter()
                .enumerate()
                .map(|(idx, &w)| {
                    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                    (-u.ln() / w, idx)
                })
                .collect();
            keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            keyed.truncate(k);
            keyed.into_iter().map(|(_, idx)| idx).collect()
        } else {
            // with replacement via inverse CDF
            let mut cdf = Vec::with_capacity(raw.len());
            let mut acc = 0.0;
            for &w in &raw {
                acc += w;
                cdf.push(acc);
            }
            (0..k)
                .map(|_| {
                    let x: f64 = rng.gen_range(0.0..acc);
                    cdf.partition_point(|&c| c <= x).min(raw.len() - 1)
                })
                .collect()
        };

        per_class[class] = chosen
            .into_iter()
            .map(|idx| {
                let cell = cells[idx];
                let (col, row) = (cell % sog.width, cell / sog.width);
                let (s_u, s_v) = sog.cell_center(col, row);
                Sample {
                    col,
                    row,
                    s_u,
                    s_v,
                    weight: raw[idx] / total,
                    class: class as u8,
                }
            })
            .collect();
    }
    Ok(SampleSet { k, seed, per_class })
}

/// Fraction of occupied coarse bins containing no sample.
///
/// The grid is partitioned into `bins_per_axis²` bins; a bin counts as
/// occupied when it contains at least one cell with a nonzero class id.
/// Returns 0 for a grid with no occupied bins.
pub fn coverage_loss(
    samples: &SampleSet,
    sog: &SemanticOccupancyGrid,
    bins_per_axis: usize,
) -> Result<f64> {
    if bins_per_axis == 0 {
        return Err(Error::InvalidArgument("bins_per_axis must be ≥ 1".into()));
    }
    let b = bins_per_axis;
    let bin_of = |col: usize, row: usize| {
        let bc = (col * b / sog.width).min(b - 1);
        let br = (row * b / sog.height).min(b - 1);
        br * b + bc
    };

    let mut occupied = vec![false; b * b];
    for row in 0..sog.height {
        for col in 0..sog.width {
            if sog.label(col, row) != 0 {
                occupied[bin_of(col, row)] = true;
            }
        }
    }
    let occupied_count = occupied.iter().filter(|&&o| o).count();
    if occupied_count == 0 {
        return Ok(0.0);
    }

    let mut hit = vec![false; b * b];
    for s in samples.iter() {
        hit[bin_of(s.col, s.row)] = true;
    }
    let missed = occupied
        .iter()
        .zip(&hit)
        .filter(|(&occ, &h)| occ && !h)
        .count();
    Ok(missed as f64 / occupied_count as f64)
}

/// Redraws with `seed+1, seed+2, …` until the coverage loss drops to
/// `threshold` or 10 attempts are spent; returns the best set seen.
pub fn sample_with_coverage(
    sog: &SemanticOccupancyGrid,
    k: usize,
    tau: f64,
    seed: u64,
    bins_per_axis: usize,
    threshold: f64,
) -> Result<(SampleSet, f64)> {
    let mut best: Option<(SampleSet, f64)> = None;
    for attempt in 0..10u64 {
        let set = sample_queries(sog, k, tau, seed.wrapping_add(attempt))?;
        let loss = coverage_loss(&set, sog, bins_per_axis)?;
        let better = best.as_ref().map_or(true, |(_, b)| loss < *b);
        if better {
            best = Some((set, loss));
        }
        if loss <= threshold {
            break;
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(width: usize, height: usize, labels: Vec<u8>, m: usize) -> SemanticOccupancyGrid {
        SemanticOccupancyGrid::new(width, height, 0.5, labels, m, 1).unwrap()
    }

    /// Exhaustive nearest-different-label search.
    fn brute_force_dt(sog: &SemanticOccupancyGrid) -> Vec<u32> {
        let (w, h) = (sog.width(), sog.height());
        let mut out = vec![sog.sentinel_distance(); w * h];
        for r0 in 0..h {
            for c0 in 0..w {
                let own = sog.label(c0, r0);
                let mut best = sog.sentinel_distance();
                for r1 in 0..h {
                    for c1 in 0..w {
                        if sog.label(c1, r1) != own {
                            let d = (r0 as i64 - r1 as i64)
                                .abs()
                                .max((c0 as i64 - c1 as i64).abs())
                                as u32;
                            best = best.min(d);
                        }
                    }
                }
                out[r0 * w + c0] = best;
            }
        }
        out
    }

    fn half_plane_grid() -> SemanticOccupancyGrid {
        // left 5 columns road (1), right 5 none (0)
        let mut labels = Vec::new();
        for _ in 0..10 {
            for c in 0..10 {
                labels.push(if c < 5 { 1 } else { 0 });
            }
        }
        grid(10, 10, labels, 5)
    }

    #[test]
    fn uniform_grid_gets_sentinel() {
        let sog = grid(6, 4, vec![1; 24], 5);
        let d = edge_distance_transform(&sog);
        assert!(d.iter().all(|&x| x == 10));
    }

    #[test]
    fn half_plane_matches_brute_force() {
        let sog = half_plane_grid();
        let d = edge_distance_transform(&sog);
        assert_eq!(d, brute_force_dt(&sog));
        // spot-check the column bands
        assert_eq!(d[4], 1); // col 4
        assert_eq!(d[5], 1); // col 5
        assert_eq!(d[3], 2);
        assert_eq!(d[6], 2);
    }

    #[test]
    fn single_obstacle_in_road_sea() {
        let mut labels = vec![1u8; 49];
        labels[3 * 7 + 3] = 2;
        let sog = grid(7, 7, labels, 5);
        let d = edge_distance_transform(&sog);
        assert_eq!(d, brute_force_dt(&sog));
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                let i = ((3 + dr) * 7 + (3 + dc)) as usize;
                assert_eq!(d[i], 1);
            }
        }
    }

    #[test]
    fn random_grids_match_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let w = rng.gen_range(1..15);
            let h = rng.gen_range(1..15);
            let labels = (0..w * h).map(|_| rng.gen_range(0..3) as u8).collect();
            let sog = grid(w, h, labels, 5);
            assert_eq!(edge_distance_transform(&sog), brute_force_dt(&sog));
        }
    }

    #[test]
    fn sampling_is_deterministic_and_exact_k() {
        let sog = half_plane_grid();
        let a = sample_queries(&sog, 12, 2.0, 42).unwrap();
        let b = sample_queries(&sog, 12, 2.0, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.per_class[0].len(), 12);
        assert_eq!(a.per_class[1].len(), 12);
        for c in 2..5 {
            assert!(a.per_class[c].is_empty());
        }
        for s in a.iter() {
            assert_eq!(sog.label(s.col, s.row), s.class);
        }
        let c = sample_queries(&sog, 12, 2.0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn with_replacement_when_class_small() {
        let mut labels = vec![0u8; 16];
        labels[5] = 1;
        labels[6] = 1;
        let sog = grid(4, 4, labels, 5);
        let set = sample_queries(&sog, 10, 2.0, 7).unwrap();
        assert_eq!(set.per_class[1].len(), 10);
        assert!(set.per_class[1].iter().all(|s| s.class == 1));
    }

    #[test]
    fn without_replacement_has_no_duplicates() {
        let sog = half_plane_grid();
        let set = sample_queries(&sog, 30, 1.5, 3).unwrap();
        for class in [0usize, 1] {
            let mut cells: Vec<_> = set.per_class[class]
                .iter()
                .map(|s| (s.col, s.row))
                .collect();
            cells.sort();
            cells.dedup();
            assert_eq!(cells.len(), 30);
        }
    }

    #[test]
    fn edge_weight_ratio_matches_closed_form() {
        // tau = 1: cells at distance 1 are e^2 times likelier than distance 3
        let sog = half_plane_grid();
        let dist = edge_distance_transform(&sog);
        // force the with-replacement path for i.i.d. draws
        let set = sample_queries(&sog, 100_000, 1.0, 11).unwrap();
        let mut at = [0usize; 6];
        for s in &set.per_class[1] {
            at[dist[s.row * 10 + s.col] as usize] += 1;
        }
        let ratio = at[1] as f64 / at[3] as f64;
        let expect = std::f64::consts::E.powi(2);
        assert!(
            (ratio - expect).abs() / expect < 0.10,
            "ratio {ratio} vs {expect}"
        );
    }

    #[test]
    fn coverage_extremes() {
        let sog = grid(8, 8, vec![1; 64], 5);
        let empty = SampleSet {
            k: 0,
            seed: 0,
            per_class: vec![Vec::new(); 5],
        };
        assert_eq!(coverage_loss(&empty, &sog, 4).unwrap(), 1.0);

        let full = sample_queries(&sog, 64, 2.0, 1).unwrap();
        assert_eq!(coverage_loss(&full, &sog, 4).unwrap(), 0.0);
    }

    #[test]
    fn concentrated_samples_miss_15_of_16_bins() {
        let sog = grid(8, 8, vec![1; 64], 5);
        // all samples in the top-left 2×2 block (bin 0 of a 4×4 partition)
        let samples: Vec<Sample> = (0..4)
            .map(|i| {
                let (col, row) = (i % 2, i / 2);
                let (s_u, s_v) = sog.cell_center(col, row);
                Sample {
                    col,
                    row,
                    s_u,
                    s_v,
                    weight: 0.25,
                    class: 1,
                }
            })
            .collect();
        let mut per_class = vec![Vec::new(); 5];
        per_class[1] = samples;
        let set = SampleSet {
            k: 4,
            seed: 0,
            per_class,
        };
        assert_eq!(coverage_loss(&set, &sog, 4).unwrap(), 15.0 / 16.0);
    }

    #[test]
    fn coverage_of_all_none_grid_is_zero() {
        let sog = grid(4, 4, vec![0; 16], 5);
        let set = sample_queries(&sog, 4, 2.0, 1).unwrap();
        assert_eq!(coverage_loss(&set, &sog, 4).unwrap(), 0.0);
    }

    #[test]
    fn resample_until_threshold() {
        let sog = grid(16, 16, vec![1; 256], 5);
        let (set, loss) = sample_with_coverage(&sog, 64, 2.0, 5, 4, 0.1).unwrap();
        assert!(loss <= 0.25);
        assert_eq!(set.per_class[1].len(), 64);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let sog = half_plane_grid();
        assert!(sample_queries(&sog, 0, 2.0, 1).is_err());
        assert!(sample_queries(&sog, 4, 0.0, 1).is_err());
        assert!(SemanticOccupancyGrid::new(0, 3, 0.5, vec![], 5, 1).is_err());
        assert!(SemanticOccupancyGrid::new(2, 2, 0.5, vec![9, 0, 0, 0], 5, 1).is_err());
        assert!(SemanticOccupancyGrid::new(2, 2, -1.0, vec![0; 4], 5, 1).is_err());
    }
}
