//! Segmented analog broadcast: splitting the model into segments, packing each
//! segment into a half-length complex vector, transmitting all segments at
//! once through per-segment beamformers, and device-side recovery.

use crate::channel::ChannelRound;
use crate::error::{Error, Result};
use crate::linalg::{CVec, C64};
use crate::rng::SeededRng;

/// Relative threshold below which `|ĥ^H w_i|` is treated as a null beam.
pub const DEGENERATE_BEAM_REL: f64 = 1e-12;

/// How a `D`-dimensional model is cut into `S` equal segments of even length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentPlan {
    model_dim: usize,
    n_segments: usize,
    seg_len: usize,
    pad_len: usize,
}

impl SegmentPlan {
    /// Segment length is `⌈D/S⌉`, bumped by one when odd so every segment
    /// packs into an integer number of complex symbols.
    pub fn new(model_dim: usize, n_segments: usize) -> Result<Self> {
        if model_dim == 0 {
            return Err(Error::invalid("model dimension must be positive"));
        }
        if n_segments == 0 || n_segments > model_dim {
            return Err(Error::invalid(format!(
                "segment count {n_segments} must lie in [1, {model_dim}]"
            )));
        }
        let mut seg_len = model_dim.div_ceil(n_segments);
        if seg_len % 2 == 1 {
            seg_len += 1;
        }
        Ok(Self {
            model_dim,
            n_segments,
            seg_len,
            pad_len: n_segments * seg_len - model_dim,
        })
    }

    pub fn model_dim(&self) -> usize {
        self.model_dim
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    /// Real segment length `I_t`.
    pub fn seg_len(&self) -> usize {
        self.seg_len
    }

    pub fn pad_len(&self) -> usize {
        self.pad_len
    }

    /// Complex symbols per segment, `I_t / 2`.
    pub fn complex_len(&self) -> usize {
        self.seg_len / 2
    }

    /// Downlink channel uses per round.
    pub fn channel_uses(&self) -> usize {
        self.complex_len()
    }

    /// Index range of segment `i` within the (unpadded) model vector.
    pub fn segment_range(&self, i: usize) -> std::ops::Range<usize> {
        let lo = (i * self.seg_len).min(self.model_dim);
        let hi = ((i + 1) * self.seg_len).min(self.model_dim);
        lo..hi
    }
}

/// The complex-packed segments of one model vector and their normalizers `u_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedSegments {
    pub segments: Vec<CVec>,
    pub norms: Vec<f64>,
}

impl PackedSegments {
    /// `ν` for this model: the largest squared segment norm.
    pub fn nu(&self) -> f64 {
        self.segments
            .iter()
            .map(CVec::norm_sqr)
            .fold(0.0, f64::max)
    }

    /// `s̃_i / u_i`, or zero for an all-zero segment.
    fn normalized(&self, i: usize) -> CVec {
        if self.norms[i] > 0.0 {
            self.segments[i].scaled(1.0 / self.norms[i])
        } else {
            CVec::zeros(self.segments[i].len())
        }
    }
}

pub fn segment_and_pack(theta: &[f64], n_segments: usize) -> Result<(SegmentPlan, PackedSegments)> {
    let plan = SegmentPlan::new(theta.len(), n_segments)?;
    let packed = pack(&plan, theta)?;
    Ok((plan, packed))
}

pub fn pack(plan: &SegmentPlan, theta: &[f64]) -> Result<PackedSegments> {
    if theta.len() != plan.model_dim {
        return Err(Error::invalid(format!(
            "model has {} entries, plan expects {}",
            theta.len(),
            plan.model_dim
        )));
    }
    let half = plan.complex_len();
    let mut segments = Vec::with_capacity(plan.n_segments);
    let mut norms = Vec::with_capacity(plan.n_segments);
    for i in 0..plan.n_segments {
        let base = i * plan.seg_len;
        let at = |idx: usize| theta.get(base + idx).copied().unwrap_or(0.0);
        let seg: CVec = (0..half).map(|m| C64::new(at(m), at(half + m))).collect();
        norms.push(seg.norm() / (half as f64).sqrt());
        segments.push(seg);
    }
    Ok(PackedSegments { segments, norms })
}

/// Inverse of packing: real parts then imaginary parts per segment, padding stripped.
pub fn unpack(plan: &SegmentPlan, est_segments: &[CVec]) -> Result<Vec<f64>> {
    if est_segments.len() != plan.n_segments {
        return Err(Error::invalid(format!(
            "got {} segments, plan has {}",
            est_segments.len(),
            plan.n_segments
        )));
    }
    let half = plan.complex_len();
    let mut out = Vec::with_capacity(plan.n_segments * plan.seg_len);
    for (i, seg) in est_segments.iter().enumerate() {
        if seg.len() != half {
            return Err(Error::invalid(format!(
                "segment {i} has length {}, expected {half}",
                seg.len()
            )));
        }
        out.extend(seg.iter().map(|z| z.re));
        out.extend(seg.iter().map(|z| z.im));
    }
    out.truncate(plan.model_dim);
    Ok(out)
}

fn check_beams(packed: &PackedSegments, w: &[CVec], round: &ChannelRound) -> Result<()> {
    if w.len() != packed.segments.len() {
        return Err(Error::invalid(format!(
            "{} beamformers for {} segments",
            w.len(),
            packed.segments.len()
        )));
    }
    let n = round.n_antennas();
    if w.iter().any(|wi| wi.len() != n) {
        return Err(Error::invalid("beamformer length differs from antenna count"));
    }
    check_nondegenerate(w, &round.h_hat)
}

/// Errors if any `|ĥ_k^H w_i|` is numerically zero relative to `‖ĥ_k‖‖w_i‖`.
pub fn check_nondegenerate(w: &[CVec], h_hat: &[CVec]) -> Result<()> {
    for (k, h) in h_hat.iter().enumerate() {
        for (i, wi) in w.iter().enumerate() {
            let gain = h.dot(wi).norm();
            if !(gain > DEGENERATE_BEAM_REL * h.norm() * wi.norm()) {
                return Err(Error::DegenerateBeam {
                    device: k,
                    segment: i,
                    gain,
                });
            }
        }
    }
    Ok(())
}

/// Complex AWGN with total per-symbol variance `noise_std²`.
pub fn draw_noise(
    n_devices: usize,
    len: usize,
    noise_std: f64,
    rng: &mut SeededRng,
) -> Vec<CVec> {
    (0..n_devices)
        .map(|_| rng.complex_normal_vec(len).scaled(noise_std))
        .collect()
}

/// Transmits all segments at once and returns each device's segment estimates
/// (`[device][segment]`).
pub fn broadcast_receive(
    packed: &PackedSegments,
    w: &[CVec],
    round: &ChannelRound,
    noise_std: f64,
    rng: &mut SeededRng,
) -> Result<Vec<Vec<CVec>>> {
    if !(noise_std >= 0.0) {
        return Err(Error::invalid("noise std must be nonnegative"));
    }
    let len = packed.segments.first().map_or(0, CVec::len);
    let noise = draw_noise(round.n_devices(), len, noise_std, rng);
    receive_with_noise(packed, w, round, &noise)
}

/// Receiver processing with explicit noise realizations, one per device.
pub fn receive_with_noise(
    packed: &PackedSegments,
    w: &[CVec],
    round: &ChannelRound,
    noise: &[CVec],
) -> Result<Vec<Vec<CVec>>> {
    check_beams(packed, w, round)?;
    if noise.len() != round.n_devices() {
        return Err(Error::invalid("one noise vector per device is required"));
    }
    let normalized: Vec<CVec> = (0..packed.segments.len()).map(|i| packed.normalized(i)).collect();
    let mut out = Vec::with_capacity(round.n_devices());
    for (k, (h, h_hat)) in round.h_true.iter().zip(&round.h_hat).enumerate() {
        // z_k = Σ_i (w_i^H h_k) s̃_i / u_i + n_k over the I_t/2 channel uses
        let mut z = noise[k].clone();
        for (wi, si) in w.iter().zip(&normalized) {
            z.axpy(wi.dot(h), si);
        }
        let per_segment = w
            .iter()
            .zip(&packed.norms)
            .map(|(wi, &u)| {
                let g = h_hat.dot(wi);
                z.scaled_c(g * (u / g.norm_sqr()))
            })
            .collect();
        out.push(per_segment);
    }
    Ok(out)
}

/// The accumulated transmission error `e_k` (real, length `S·I_t`) for every device,
/// built term by term: CSI error leakage, inter-segment interference, and
/// post-processed noise.
pub fn compute_error_vector(
    packed: &PackedSegments,
    w: &[CVec],
    round: &ChannelRound,
    noise: &[CVec],
) -> Result<Vec<Vec<f64>>> {
    check_beams(packed, w, round)?;
    if noise.len() != round.n_devices() {
        return Err(Error::invalid("one noise vector per device is required"));
    }
    let s = packed.segments.len();
    let seg_norm: Vec<f64> = packed.segments.iter().map(CVec::norm).collect();
    let mut out = Vec::with_capacity(round.n_devices());
    for k in 0..round.n_devices() {
        let h_hat = &round.h_hat[k];
        let dh = round.delta_h(k);
        let mut e_k = Vec::with_capacity(s * packed.segments[0].len() * 2);
        for i in 0..s {
            let g = h_hat.dot(&w[i]);
            let d = g.norm_sqr();
            let mut e = packed.segments[i].scaled_c(g * w[i].dot(&dh) / d);
            for j in (0..s).filter(|&j| j != i) {
                if seg_norm[j] == 0.0 {
                    continue;
                }
                let coupling = g * w[j].dot(&h_hat.add(&dh)) / d;
                e.axpy(coupling * (seg_norm[i] / seg_norm[j]), &packed.segments[j]);
            }
            e.axpy(g * (packed.norms[i] / d), &noise[k]);
            e_k.extend(e.interleave_real());
        }
        out.push(e_k);
    }
    Ok(out)
}

/// The per-round objective `H_t(w, Δh)`.
///
/// `16 S ν Σ_i Σ_k r_k (Σ_j |Δh_k^H w_j|² + Σ_{j≠i} |ĥ_k^H w_j|² + σ²) / |ĥ_k^H w_i|²`
pub fn eval_h(
    w: &[CVec],
    h_hat: &[CVec],
    delta_h: &[CVec],
    weights: &[f64],
    nu: f64,
    sigma2: f64,
) -> Result<f64> {
    if h_hat.len() != delta_h.len() || h_hat.len() != weights.len() {
        return Err(Error::invalid("per-device inputs have different lengths"));
    }
    check_nondegenerate(w, h_hat)?;
    let s = w.len();
    let mut total = 0.0;
    for ((h, dh), &r) in h_hat.iter().zip(delta_h).zip(weights) {
        let gains: Vec<f64> = w.iter().map(|wj| h.dot(wj).norm_sqr()).collect();
        let leak: f64 = w.iter().map(|wj| dh.dot(wj).norm_sqr()).sum();
        let all: f64 = gains.iter().sum();
        for &gi in &gains {
            total += r * (leak + (all - gi) + sigma2) / gi;
        }
    }
    Ok(16.0 * s as f64 * nu * total)
}
