//! Forward pipeline of the iterative attention field over stub latent
//! features, the decoder heads' shape contracts, and the composite loss.
//!
//! The learned networks are replaced by fixed seeded affine stubs: every
//! architectural contract (shapes, weight sharing across iterations, uniform
//! initialization, per-iteration supervision) stays testable without a
//! training signal.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The `(S·T·P)×C` latent feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFeatures {
    pub s: usize,
    pub t: usize,
    pub p: usize,
    pub c: usize,
    pub data: Array2<f64>,
}

impl LatentFeatures {
    pub fn rows(&self) -> usize {
        self.s * self.t * self.p
    }
}

/// The 7-vector query `(x, y, z, t, x′, y′, z′)`: location, time, and
/// target location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub t: f64,
    pub x_target: f64,
    pub y_target: f64,
    pub z_target: f64,
}

impl QueryPoint {
    pub fn as_array(&self) -> [f64; 7] {
        [
            self.x,
            self.y,
            self.z,
            self.t,
            self.x_target,
            self.y_target,
            self.z_target,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// One attention iteration's state.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionState {
    /// nonnegative, sums to 1
    pub weights: Array1<f64>,
    /// `weightsᵀ · Z`
    pub pooled: Array1<f64>,
    /// 0 is the uniform initialization, `1…N` the attention iterations
    pub iteration: usize,
}

/// Maps `(query, pooled features)` to raw per-row attention scores.
///
/// A single scorer instance is applied at every iteration, which is how the
/// shared-weights contract is enforced by construction.
pub trait Scorer {
    fn score(&self, q: &QueryPoint, pooled: &[f64]) -> Vec<f64>;
}

impl<F: Fn(&QueryPoint, &[f64]) -> Vec<f64>> Scorer for F {
    fn score(&self, q: &QueryPoint, pooled: &[f64]) -> Vec<f64> {
        self(q, pooled)
    }
}

/// Deterministic seeded affine scorer: `W_q·q + W_p·pooled + b`.
#[derive(Debug, Clone)]
pub struct StubScorer {
    wq: Array2<f64>,
    wp: Array2<f64>,
    b: Array1<f64>,
}

impl StubScorer {
    pub fn new(seed: u64, rows: usize, c: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |r: usize, cols: usize| {
            Array2::from_shape_fn((r, cols), |_| rng.gen_range(-1.0..1.0))
        };
        let wq = fill(rows, 7);
        let wp = fill(rows, c);
        let b = Array1::from_shape_fn(rows, |_| rng.gen_range(-1.0..1.0));
        Self { wq, wp, b }
    }
}

impl Scorer for StubScorer {
    fn score(&self, q: &QueryPoint, pooled: &[f64]) -> Vec<f64> {
        let qv = Array1::from_vec(q.as_array().to_vec());
        let pv = Array1::from_vec(pooled.to_vec());
        (self.wq.dot(&qv) + self.wp.dot(&pv) + &self.b).to_vec()
    }
}

/// Deterministic seeded stand-in for the image encoder: pseudo-random
/// features with the vehicle speed added to every entry.
pub fn stub_encoder(
    seed: u64,
    s: usize,
    t: usize,
    p: usize,
    c: usize,
    speed: f64,
) -> Result<LatentFeatures> {
    if s == 0 || t == 0 || p == 0 || c == 0 {
        return Err(Error::InvalidArgument(
            "encoder dimensions must all be ≥ 1".into(),
        ));
    }
    let rows = s * t * p;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = Array2::from_shape_fn((rows, c), |_| rng.gen_range(-1.0..1.0) + speed);
    Ok(LatentFeatures { s, t, p, c, data })
}

fn softmax(raw: &[f64]) -> Vec<f64> {
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = raw.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Runs `N` attention iterations, returning states `0…N`.
///
/// State 0 carries exact uniform weights `1/(S·T·P)`; state `i > 0` weights
/// are `softmax(scorer(q, pooled_{i−1}))`. The same scorer drives every
/// iteration.
pub fn iterate_attention(
    z: &LatentFeatures,
    q: &QueryPoint,
    scorer: &dyn Scorer,
    n: usize,
) -> Result<Vec<AttentionState>> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be ≥ 1".into()));
    }
    let rows = z.rows();
    if z.data.nrows() != rows || z.data.ncols() != z.c {
        return Err(Error::ContractViolation(format!(
            "latent matrix shape {:?} does not match S·T·P={}, C={}",
            z.data.dim(),
            rows,
            z.c
        )));
    }

    let uniform = Array1::from_elem(rows, 1.0 / rows as f64);
    let pooled0 = uniform.dot(&z.data);
    let mut states = vec![AttentionState {
        weights: uniform,
        pooled: pooled0,
        iteration: 0,
    }];

    for i in 1..=n {
        let prev = states.last().unwrap();
        let raw = scorer.score(q, prev.pooled.as_slice().unwrap());
        if raw.len() != rows {
            return Err(Error::ContractViolation(format!(
                "scorer returned {} scores for {} feature rows",
                raw.len(),
                rows
            )));
        }
        let weights = Array1::from_vec(softmax(&raw));
        let pooled = weights.dot(&z.data);
        states.push(AttentionState {
            weights,
            pooled,
            iteration: i,
        });
    }
    Ok(states)
}

/// Decoder head outputs for one attention state.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderOutput {
    /// length-M semantic scores
    pub semantics: Vec<f64>,
    /// waypoint offset in `(s_u, s_v)` meters
    pub offset: [f64; 2],
    /// `(E·F)×3` control point matrix
    pub control_points: Array2<f64>,
}

/// Fixed seeded affine decoder heads over `[pooled ‖ q]`.
///
/// With a zero pooled vector and zero query the outputs are exactly the
/// heads' bias terms.
pub fn decode(
    state: &AttentionState,
    q: &QueryPoint,
    seed: u64,
    m: usize,
    e: usize,
    f: usize,
) -> Result<DecoderOutput> {
    if m == 0 || e == 0 || f == 0 {
        return Err(Error::InvalidArgument("M, E, F must all be ≥ 1".into()));
    }
    let c = state.pooled.len();
    let input: Vec<f64> = state
        .pooled
        .iter()
        .cloned()
        .chain(q.as_array())
        .collect();
    let input = Array1::from_vec(input);
    let width = c + 7;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // affine head scale keeps outputs O(1) at large C
    let scale = 1.0 / (width as f64).sqrt();
    let mut head = |out: usize| -> Array1<f64> {
        let w = Array2::from_shape_fn((out, width), |_| rng.gen_range(-1.0..1.0) * scale);
        let b = Array1::from_shape_fn(out, |_| rng.gen_range(-1.0..1.0));
        w.dot(&input) + &b
    };

    let semantics = head(m).to_vec();
    let offset_v = head(2);
    let control_flat = head(e * f * 3);
    let control_points =
        Array2::from_shape_vec((e * f, 3), control_flat.to_vec()).expect("shape e*f x 3");
    Ok(DecoderOutput {
        semantics,
        offset: [offset_v[0], offset_v[1]],
        control_points,
    })
}

/// Supervision targets for [`total_loss`].
#[derive(Debug, Clone, PartialEq)]
pub struct LossTarget {
    /// `(E·F)×3` control point matrix shared by all queries
    pub control_points: Array2<f64>,
    /// true class id per query
    pub classes: Vec<usize>,
    /// true `(s_u, s_v)` offset per query
    pub offsets: Vec<[f64; 2]>,
}

/// Weighting factors of the three loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub eta_pc: f64,
    pub eta_off: f64,
    pub eta_ce: f64,
}

/// Composite loss `η_PC·L_PC + η_Off·L_Off + η_CE·L_CE`.
///
/// `preds[query][iteration]` holds the decoder output per query and
/// attention iteration; every iteration is supervised with equal weight.
/// `L_PC` and `L_Off` are mean absolute errors, `L_CE` the mean
/// cross-entropy of the softmaxed semantic scores against the target ids.
pub fn total_loss(
    preds: &[Vec<DecoderOutput>],
    target: &LossTarget,
    weights: LossWeights,
) -> Result<f64> {
    if weights.eta_pc < 0.0 || weights.eta_off < 0.0 || weights.eta_ce < 0.0 {
        return Err(Error::InvalidArgument("loss weights must be nonnegative".into()));
    }
    if preds.is_empty() || preds.iter().any(Vec::is_empty) {
        return Err(Error::ContractViolation(
            "need at least one prediction per query".into(),
        ));
    }
    if preds.len() != target.classes.len() || preds.len() != target.offsets.len() {
        return Err(Error::ContractViolation(format!(
            "{} queries but {} classes / {} offsets",
            preds.len(),
            target.classes.len(),
            target.offsets.len()
        )));
    }

    let mut l_pc = 0.0;
    let mut l_off = 0.0;
    let mut l_ce = 0.0;
    let mut count = 0usize;
    for (qi, iters) in preds.iter().enumerate() {
        let class = target.classes[qi];
        for out in iters {
            if out.control_points.dim() != target.control_points.dim() {
                return Err(Error::ContractViolation(format!(
                    "control point shape {:?} vs target {:?}",
                    out.control_points.dim(),
                    target.control_points.dim()
                )));
            }
            if class >= out.semantics.len() {
                return Err(Error::ContractViolation(format!(
                    "class id {class} out of range for M={}",
                    out.semantics.len()
                )));
            }
            let diff = &out.control_points - &target.control_points;
            l_pc += diff.iter().map(|d| d.abs()).sum::<f64>() / diff.len() as f64;
            l_off += ((out.offset[0] - target.offsets[qi][0]).abs()
                + (out.offset[1] - target.offsets[qi][1]).abs())
                / 2.0;
            let probs = softmax(&out.semantics);
            l_ce += -probs[class].max(f64::MIN_POSITIVE).ln();
            count += 1;
        }
    }
    let count = count as f64;
    Ok(weights.eta_pc * l_pc / count + weights.eta_off * l_off / count
        + weights.eta_ce * l_ce / count)
}
