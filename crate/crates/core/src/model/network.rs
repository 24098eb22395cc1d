//! Full forward pass, losses and backpropagation through time.

use super::config::ModelConfig;
use super::lstm::{
    encode_backward, encode_forward, lstm_cell_backward, lstm_cell_forward, CellCache, CellGrads, Dense, DenseGrads,
    HiddenState, LstmCellParams,
};
use super::params::{ModelGrads, ModelParameters};
use crate::data::{integrate_boxes, BoundingBox, BoxVelocity, IntentionLabel, Provenance, SequenceWindow};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernel::{activate, bce_loss_f64, mse_loss_f64, Activation, Matrix};

/// Samples per unit of parallel work. Fixed so that results never depend on
/// the number of threads.
pub const CHUNK_SIZE: usize = 16;

/// Concatenates position and velocity encoder states (`p ⊕ v`) for both `h`
/// and `c`.
pub fn fuse_hidden(p: &HiddenState, v: &HiddenState) -> Result<HiddenState> {
    if p.h.shape() != v.h.shape() || p.c.shape() != v.c.shape() {
        return Err(Error::Dimension {
            op: "fuse_hidden",
            left: p.h.shape(),
            right: v.h.shape(),
        });
    }
    Ok(HiddenState {
        h: p.h.vstack(&v.h)?,
        c: p.c.vstack(&v.c)?,
    })
}

/// Inverse of [`fuse_hidden`].
pub fn split_hidden(fused: &HiddenState, at: usize) -> Result<(HiddenState, HiddenState)> {
    let (ph, vh) = fused.h.split_rows(at)?;
    let (pc, vc) = fused.c.split_rows(at)?;
    Ok((HiddenState { h: ph, c: pc }, HiddenState { h: vh, c: vc }))
}

struct DecoderTape {
    caches: Vec<CellCache>,
    hidden: Vec<Matrix>,
    outputs: Vec<Matrix>,
}

fn check_steps(t_pred: usize) -> Result<()> {
    if t_pred == 0 {
        return Err(Error::Validation("t_pred must be at least 1".into()));
    }
    Ok(())
}

fn decode_velocity_forward(
    initial: &HiddenState,
    first_input: &Matrix,
    t_pred: usize,
    cell: &LstmCellParams,
    head: &Dense,
) -> Result<DecoderTape> {
    check_steps(t_pred)?;
    let mut tape = DecoderTape {
        caches: Vec::with_capacity(t_pred),
        hidden: Vec::with_capacity(t_pred),
        outputs: Vec::with_capacity(t_pred),
    };
    let mut state = initial.clone();
    let mut x = first_input.clone();
    for _ in 0..t_pred {
        let (next, cache) = lstm_cell_forward(&x, &state, cell)?;
        let out = head.apply(&next.h)?;
        tape.caches.push(cache);
        tape.hidden.push(next.h.clone());
        x = out.clone();
        tape.outputs.push(out);
        state = next;
    }
    Ok(tape)
}

/// Velocity decoder rollout. The first step consumes `last_velocity`; each
/// later step consumes the previous prediction. Returns `t_pred` outputs of
/// shape `features x batch` in the network's input space.
pub fn decode_velocity(
    initial: &HiddenState,
    last_velocity: &Matrix,
    t_pred: usize,
    cell: &LstmCellParams,
    head: &Dense,
) -> Result<Vec<Matrix>> {
    decode_velocity_forward(initial, last_velocity, t_pred, cell, head).map(|t| t.outputs)
}

/// Returns the gradient with respect to the initial decoder state.
fn decode_velocity_backward(
    tape: &DecoderTape,
    d_outputs: &[Matrix],
    cell: &LstmCellParams,
    head: &Dense,
    cell_grads: &mut CellGrads,
    head_grads: &mut DenseGrads,
) -> Result<(Matrix, Matrix)> {
    let (hidden, batch) = tape.hidden[0].shape();
    let mut dh = Matrix::zeros(hidden, batch);
    let mut dc = Matrix::zeros(hidden, batch);
    let mut d_feedback: Option<Matrix> = None;
    for k in (0..tape.caches.len()).rev() {
        let mut d_out = d_outputs[k].clone();
        if let Some(fb) = &d_feedback {
            d_out.add_assign(fb)?;
        }
        dh.add_assign(&head.backward(&tape.hidden[k], &d_out, head_grads)?)?;
        let (dx, dh_prev, dc_prev) = lstm_cell_backward(&tape.caches[k], &dh, &dc, cell, cell_grads)?;
        d_feedback = Some(dx);
        dh = dh_prev;
        dc = dc_prev;
    }
    Ok((dh, dc))
}

struct IntentionTape {
    caches: Vec<CellCache>,
    hidden: Vec<Matrix>,
    probs: Vec<Matrix>,
}

fn softmax_columns(logits: &Matrix) -> Matrix {
    activate(&logits.transpose(), Activation::SoftmaxRows).transpose()
}

fn decode_intention_forward(
    initial: &HiddenState,
    first_input: &Matrix,
    t_pred: usize,
    cell: &LstmCellParams,
    head: &Dense,
    embedding: &Dense,
) -> Result<IntentionTape> {
    check_steps(t_pred)?;
    let mut tape = IntentionTape {
        caches: Vec::with_capacity(t_pred),
        hidden: Vec::with_capacity(t_pred),
        probs: Vec::with_capacity(t_pred),
    };
    let mut state = initial.clone();
    let mut x = first_input.clone();
    for k in 0..t_pred {
        let (next, cache) = lstm_cell_forward(&x, &state, cell)?;
        let probs = softmax_columns(&head.apply(&next.h)?);
        if k + 1 < t_pred {
            x = embedding.apply(&probs)?;
        }
        tape.caches.push(cache);
        tape.hidden.push(next.h.clone());
        tape.probs.push(probs);
        state = next;
    }
    Ok(tape)
}

/// Intention decoder rollout. The first step consumes `last_box`; each later
/// step consumes the embedding of the previous probability vector. Returns
/// `t_pred` matrices of shape `2 x batch` whose columns are
/// `[p(not crossing), p(crossing)]`.
pub fn decode_intention(
    initial: &HiddenState,
    last_box: &Matrix,
    t_pred: usize,
    cell: &LstmCellParams,
    head: &Dense,
    embedding: &Dense,
) -> Result<Vec<Matrix>> {
    decode_intention_forward(initial, last_box, t_pred, cell, head, embedding).map(|t| t.probs)
}

#[allow(clippy::too_many_arguments)]
fn decode_intention_backward(
    tape: &IntentionTape,
    d_probs: &[Matrix],
    cell: &LstmCellParams,
    head: &Dense,
    embedding: &Dense,
    cell_grads: &mut CellGrads,
    head_grads: &mut DenseGrads,
    embedding_grads: &mut DenseGrads,
) -> Result<(Matrix, Matrix)> {
    let (hidden, batch) = tape.hidden[0].shape();
    let mut dh = Matrix::zeros(hidden, batch);
    let mut dc = Matrix::zeros(hidden, batch);
    let mut d_from_next: Option<Matrix> = None;
    for k in (0..tape.caches.len()).rev() {
        let p = &tape.probs[k];
        let mut dp = d_probs[k].clone();
        if let Some(d) = &d_from_next {
            dp.add_assign(d)?;
        }
        // Softmax Jacobian per column: dl = p ⊙ (dp - <p, dp>).
        let mut dl = Matrix::zeros(2, batch);
        for b in 0..batch {
            let dot = p.get(0, b) * dp.get(0, b) + p.get(1, b) * dp.get(1, b);
            for r in 0..2 {
                dl.set(r, b, p.get(r, b) * (dp.get(r, b) - dot));
            }
        }
        dh.add_assign(&head.backward(&tape.hidden[k], &dl, head_grads)?)?;
        let (dx, dh_prev, dc_prev) = lstm_cell_backward(&tape.caches[k], &dh, &dc, cell, cell_grads)?;
        d_from_next = if k > 0 {
            Some(embedding.backward(&tape.probs[k - 1], &dx, embedding_grads)?)
        } else {
            None
        };
        dh = dh_prev;
        dc = dc_prev;
    }
    Ok((dh, dc))
}

/// Network inputs for a group of windows, already in normalized space.
struct Inputs {
    positions: Vec<Matrix>,
    velocities: Vec<Matrix>,
}

fn check_windows(config: &ModelConfig, windows: &[SequenceWindow]) -> Result<()> {
    if let Some(w) = windows
        .iter()
        .find(|w| w.t_obs() != config.t_obs || w.t_pred() != config.t_pred || w.obs_velocities.len() + 1 != w.t_obs())
    {
        return Err(Error::Config(format!(
            "window {} has t_obs={} t_pred={}, model expects t_obs={} t_pred={}",
            w.provenance,
            w.t_obs(),
            w.t_pred(),
            config.t_obs,
            config.t_pred
        )));
    }
    Ok(())
}

fn prepare_inputs(params: &ModelParameters, windows: &[SequenceWindow]) -> Inputs {
    let n = &params.normalizer;
    let t_obs = params.config.t_obs;
    let positions = (0..t_obs)
        .map(|k| Matrix::from_columns(&windows.iter().map(|w| n.box_features(&w.obs_boxes[k])).collect::<Vec<_>>()))
        .collect();
    let velocities = (0..t_obs - 1)
        .map(|k| {
            Matrix::from_columns(&windows.iter().map(|w| n.velocity_features(&w.obs_velocities[k])).collect::<Vec<_>>())
        })
        .collect();
    Inputs { positions, velocities }
}

struct Tape {
    enc_velocity: Option<Vec<CellCache>>,
    enc_position: Option<Vec<CellCache>>,
    boxes: Option<DecoderTape>,
    intention: Option<IntentionTape>,
}

fn run_forward(params: &ModelParameters, inputs: &Inputs) -> Result<Tape> {
    let c = &params.config;
    let batch = inputs.positions[0].cols();
    let h = c.hidden_size;

    let (v_state, enc_velocity) = if c.uses_velocity_encoder() {
        let (s, caches) = encode_forward(&inputs.velocities, &params.enc_velocity)?;
        (s, Some(caches))
    } else {
        (HiddenState::zeros(h, batch), None)
    };
    let (p_state, enc_position) = if c.uses_position_encoder() {
        let (s, caches) = encode_forward(&inputs.positions, &params.enc_position)?;
        (s, Some(caches))
    } else {
        (HiddenState::zeros(h, batch), None)
    };
    let fused = fuse_hidden(&p_state, &v_state)?;

    let last_box = inputs.positions.last().expect("t_obs >= 2");
    let boxes = if c.predicts_boxes() {
        let first = if c.direct_positions() {
            last_box
        } else {
            inputs.velocities.last().expect("t_obs >= 2")
        };
        Some(decode_velocity_forward(&fused, first, c.t_pred, &params.dec_velocity, &params.out_velocity)?)
    } else {
        None
    };
    let intention = if c.predicts_intention() {
        Some(decode_intention_forward(
            &fused,
            last_box,
            c.t_pred,
            &params.dec_intention,
            &params.out_intention,
            &params.intention_embedding,
        )?)
    } else {
        None
    };
    Ok(Tape {
        enc_velocity,
        enc_position,
        boxes,
        intention,
    })
}

/// Decoder outputs mapped back to pixels: `t_pred` matrices of
/// `features x batch`, velocities or absolute boxes depending on the config.
fn pixel_outputs(params: &ModelParameters, tape: &DecoderTape) -> Vec<Matrix> {
    let n = &params.normalizer;
    let direct = params.config.direct_positions();
    tape.outputs
        .iter()
        .map(|out| {
            let mut m = out.clone();
            for r in 0..m.rows() {
                for b in 0..m.cols() {
                    let v = out.get(r, b);
                    m.set(r, b, if direct { v * n.box_scale[r] + n.box_offset[r] } else { v * n.velocity_scale[r] });
                }
            }
            m
        })
        .collect()
}

fn expand(features: &[f32], fill: [f32; 4]) -> [f32; 4] {
    let mut out = fill;
    out[..features.len()].copy_from_slice(features);
    out
}

/// Model outputs in pixel space, indexed `[sample][step]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub boxes: Option<Vec<Vec<BoundingBox>>>,
    /// Pixel velocities, absent when the decoder emits absolute boxes.
    pub velocities: Option<Vec<Vec<BoxVelocity>>>,
    /// `[p(not crossing), p(crossing)]` per step.
    pub intentions: Option<Vec<Vec<[f32; 2]>>>,
}

impl Prediction {
    fn empty(config: &ModelConfig) -> Self {
        Prediction {
            boxes: config.predicts_boxes().then(Vec::new),
            velocities: (config.predicts_boxes() && !config.direct_positions()).then(Vec::new),
            intentions: config.predicts_intention().then(Vec::new),
        }
    }

    fn append(&mut self, other: Prediction) {
        fn cat<T>(a: &mut Option<Vec<T>>, b: Option<Vec<T>>) {
            if let (Some(a), Some(b)) = (a.as_mut(), b) {
                a.extend(b);
            }
        }
        cat(&mut self.boxes, other.boxes);
        cat(&mut self.velocities, other.velocities);
        cat(&mut self.intentions, other.intentions);
    }

    pub fn len(&self) -> usize {
        self.boxes
            .as_ref()
            .map(Vec::len)
            .or(self.intentions.as_ref().map(Vec::len))
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn chunk_prediction(params: &ModelParameters, windows: &[SequenceWindow]) -> Result<Prediction> {
    let tape = run_forward(params, &prepare_inputs(params, windows))?;
    let c = &params.config;
    let mut pred = Prediction::empty(c);
    if let Some(dec) = &tape.boxes {
        let outputs = pixel_outputs(params, dec);
        let mut all_boxes = Vec::with_capacity(windows.len());
        let mut all_vel = Vec::with_capacity(windows.len());
        for (b, w) in windows.iter().enumerate() {
            let last = w.last_box();
            if c.direct_positions() {
                all_boxes.push(
                    outputs
                        .iter()
                        .map(|m| BoundingBox::from_array(expand(&m.col(b), last.to_array())))
                        .collect(),
                );
            } else {
                let v: Vec<BoxVelocity> =
                    outputs.iter().map(|m| BoxVelocity::from_array(expand(&m.col(b), [0.0; 4]))).collect();
                all_boxes.push(integrate_boxes(last, &v));
                all_vel.push(v);
            }
        }
        pred.boxes = Some(all_boxes);
        if !c.direct_positions() {
            pred.velocities = Some(all_vel);
        }
    }
    if let Some(dec) = &tape.intention {
        pred.intentions = Some(
            (0..windows.len())
                .map(|b| dec.probs.iter().map(|p| [p.get(0, b), p.get(1, b)]).collect())
                .collect(),
        );
    }
    Ok(pred)
}

impl ModelParameters {
    /// Runs the configured encoders and decoders over a batch.
    pub fn forward(&self, windows: &[SequenceWindow]) -> Result<Prediction> {
        self.forward_with(windows, Execution::default())
    }

    pub fn forward_with(&self, windows: &[SequenceWindow], exec: Execution) -> Result<Prediction> {
        check_windows(&self.config, windows)?;
        let mut out = Prediction::empty(&self.config);
        for chunk in exec.map_chunks(windows, CHUNK_SIZE, |c| chunk_prediction(self, c)) {
            out.append(chunk?);
        }
        Ok(out)
    }

    /// Forecasts from observed boxes alone, each slice exactly `t_obs` long.
    pub fn forecast(&self, observations: &[Vec<BoundingBox>], exec: Execution) -> Result<Prediction> {
        let t_pred = self.config.t_pred;
        let windows = observations
            .iter()
            .map(|obs| {
                let last = *obs.last().ok_or_else(|| Error::Validation("empty observation".into()))?;
                SequenceWindow::new(
                    obs.clone(),
                    vec![last; t_pred],
                    vec![IntentionLabel::NotCrossing; t_pred],
                    Provenance::default(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        self.forward_with(&windows, exec)
    }
}

/// Space in which the box loss compares predictions with ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxLossSpace {
    /// Per-step velocities, the decoder's direct output.
    Velocity,
    /// Integrated absolute boxes.
    Box,
}

impl std::fmt::Display for BoxLossSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoxLossSpace::Velocity => "velocity",
            BoxLossSpace::Box => "box",
        })
    }
}

impl std::str::FromStr for BoxLossSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "velocity" => Ok(BoxLossSpace::Velocity),
            "box" => Ok(BoxLossSpace::Box),
            other => Err(Error::Config(format!("unknown box loss space `{other}` (expected velocity or box)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub box_weight: f32,
    pub intention_weight: f32,
    pub box_space: BoxLossSpace,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            box_weight: 1.0,
            intention_weight: 1.0,
            box_space: BoxLossSpace::Velocity,
        }
    }
}

/// Batch-mean losses. A head that is not configured contributes zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    /// Mean squared error in pixels².
    pub box_loss: f64,
    pub intention_loss: f64,
    pub total: f64,
}

/// Target matrices for the box head, in pixels, `features x batch` per step.
fn box_targets(config: &ModelConfig, windows: &[SequenceWindow], space: BoxLossSpace) -> Vec<Matrix> {
    let f = config.feature_dim();
    let absolute = config.direct_positions() || space == BoxLossSpace::Box;
    (0..config.t_pred)
        .map(|k| {
            Matrix::from_columns(
                &windows
                    .iter()
                    .map(|w| {
                        let a = if absolute {
                            w.future_boxes[k].to_array()
                        } else {
                            (if k == 0 { w.future_boxes[0] - w.last_box() } else { w.future_boxes[k] - w.future_boxes[k - 1] })
                                .to_array()
                        };
                        a[..f].to_vec()
                    })
                    .collect::<Vec<_>>(),
            )
        })
        .collect()
}

fn stack(ms: &[Matrix]) -> Result<Matrix> {
    let mut it = ms.iter();
    let mut out = it.next().expect("at least one step").clone();
    for m in it {
        out = out.vstack(m)?;
    }
    Ok(out)
}

fn unstack(m: &Matrix, parts: usize) -> Vec<Matrix> {
    let rows = m.rows() / parts;
    (0..parts).map(|k| m.row_block(k * rows, (k + 1) * rows)).collect()
}

/// Loss of one chunk as its contribution to the batch mean over
/// `batch_total` samples, with gradients when `want_grads` is set.
fn chunk_objective(
    params: &ModelParameters,
    windows: &[SequenceWindow],
    batch_total: usize,
    weights: &LossWeights,
    want_grads: bool,
) -> Result<(LossBreakdown, Option<ModelGrads>)> {
    let c = &params.config;
    let n = &params.normalizer;
    let tape = run_forward(params, &prepare_inputs(params, windows))?;
    let share = windows.len() as f64 / batch_total as f64;
    let mut loss = LossBreakdown::default();
    let mut grads = want_grads.then(|| ModelGrads::zeros_like(params));
    let mut d_fused: Option<(Matrix, Matrix)> = None;

    if let Some(dec) = &tape.boxes {
        let outputs = pixel_outputs(params, dec);
        let integrate = !c.direct_positions() && weights.box_space == BoxLossSpace::Box;
        let preds: Vec<Matrix> = if integrate {
            let mut cur = Matrix::from_columns(
                &windows.iter().map(|w| w.last_box().to_array()[..c.feature_dim()].to_vec()).collect::<Vec<_>>(),
            );
            outputs
                .iter()
                .map(|v| {
                    cur = cur.add(v).expect("shapes agree");
                    cur.clone()
                })
                .collect()
        } else {
            outputs
        };
        let (mse, grad) = mse_loss_f64(&stack(&preds)?, &stack(&box_targets(c, windows, weights.box_space))?)?;
        loss.box_loss = mse * share;

        if let Some(g) = grads.as_mut().filter(|_| weights.box_weight != 0.0) {
            let scale = (share as f32) * weights.box_weight;
            let mut d_pixel = unstack(&grad.scale(scale), c.t_pred);
            if integrate {
                for k in (0..c.t_pred - 1).rev() {
                    let next = d_pixel[k + 1].clone();
                    d_pixel[k].add_assign(&next)?;
                }
            }
            let out_scale = if c.direct_positions() { &n.box_scale } else { &n.velocity_scale };
            for d in &mut d_pixel {
                for r in 0..d.rows() {
                    for b in 0..d.cols() {
                        d.set(r, b, d.get(r, b) * out_scale[r]);
                    }
                }
            }
            let (dh, dc) = decode_velocity_backward(
                dec,
                &d_pixel,
                &params.dec_velocity,
                &params.out_velocity,
                &mut g.dec_velocity,
                &mut g.out_velocity,
            )?;
            d_fused = Some((dh, dc));
        }
    }

    if let Some(dec) = &tape.intention {
        let p_cross: Vec<Matrix> = dec.probs.iter().map(|p| p.row_block(1, 2)).collect();
        let labels: Vec<Matrix> = (0..c.t_pred)
            .map(|k| {
                let row: Vec<f32> = windows.iter().map(|w| w.future_labels[k].as_f32()).collect();
                Matrix::from_rows(&[&row])
            })
            .collect();
        let (bce, grad) = bce_loss_f64(&stack(&p_cross)?, &stack(&labels)?)?;
        loss.intention_loss = bce * share;

        if let Some(g) = grads.as_mut().filter(|_| weights.intention_weight != 0.0) {
            let scale = (share as f32) * weights.intention_weight;
            let d_probs: Vec<Matrix> = unstack(&grad.scale(scale), c.t_pred)
                .into_iter()
                .map(|row| Matrix::zeros(1, row.cols()).vstack(&row).expect("same width"))
                .collect();
            let (dh, dc) = decode_intention_backward(
                dec,
                &d_probs,
                &params.dec_intention,
                &params.out_intention,
                &params.intention_embedding,
                &mut g.dec_intention,
                &mut g.out_intention,
                &mut g.intention_embedding,
            )?;
            d_fused = Some(match d_fused.take() {
                Some((mut h, mut cc)) => {
                    h.add_assign(&dh)?;
                    cc.add_assign(&dc)?;
                    (h, cc)
                }
                None => (dh, dc),
            });
        }
    }

    if let (Some(g), Some((dh, dc))) = (grads.as_mut(), d_fused) {
        let fused = HiddenState { h: dh, c: dc };
        let (dp, dv) = split_hidden(&fused, c.hidden_size)?;
        if let Some(caches) = &tape.enc_position {
            encode_backward(caches, dp.h, dp.c, &params.enc_position, &mut g.enc_position)?;
        }
        if let Some(caches) = &tape.enc_velocity {
            encode_backward(caches, dv.h, dv.c, &params.enc_velocity, &mut g.enc_velocity)?;
        }
    }

    loss.total = weights.box_weight as f64 * loss.box_loss + weights.intention_weight as f64 * loss.intention_loss;
    Ok((loss, grads))
}

fn combine(
    parts: Vec<Result<(LossBreakdown, Option<ModelGrads>)>>,
) -> Result<(LossBreakdown, Option<ModelGrads>)> {
    let mut total = LossBreakdown::default();
    let mut grads: Option<ModelGrads> = None;
    for part in parts {
        let (l, g) = part?;
        total.box_loss += l.box_loss;
        total.intention_loss += l.intention_loss;
        total.total += l.total;
        match (&mut grads, g) {
            (Some(acc), Some(g)) => acc.add(&g)?,
            (None, Some(g)) => grads = Some(g),
            _ => {}
        }
    }
    Ok((total, grads))
}

/// Weighted batch loss without gradient bookkeeping.
pub fn batch_loss(
    params: &ModelParameters,
    windows: &[SequenceWindow],
    weights: &LossWeights,
    exec: Execution,
) -> Result<LossBreakdown> {
    check_windows(&params.config, windows)?;
    if windows.is_empty() {
        return Ok(LossBreakdown::default());
    }
    let total = windows.len();
    combine(exec.map_chunks(windows, CHUNK_SIZE, |c| chunk_objective(params, c, total, weights, false))).map(|r| r.0)
}

/// Weighted batch loss with gradients written into every block's `grad`
/// (overwriting previous contents). Chunk gradients are summed in chunk
/// order.
pub fn batch_loss_and_gradients(
    params: &mut ModelParameters,
    windows: &[SequenceWindow],
    weights: &LossWeights,
    exec: Execution,
) -> Result<LossBreakdown> {
    check_windows(&params.config, windows)?;
    if windows.is_empty() {
        return Err(Error::Validation("cannot compute gradients of an empty batch".into()));
    }
    let total = windows.len();
    let shared: &ModelParameters = params;
    let (loss, grads) =
        combine(exec.map_chunks(windows, CHUNK_SIZE, |c| chunk_objective(shared, c, total, weights, true)))?;
    grads.expect("non-empty batch").store_into(params);
    Ok(loss)
}
