//! LSTM cell and fully connected layer with hand-derived backward passes.
//!
//! Activations are laid out as `features x batch`; gate pre-activations are
//! stacked in the order input `i`, forget `f`, cell `g`, output `o`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::{add_matmul_nt, matmul, matmul_tn, sigmoid, Matrix, ParamBlock};

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub h: Matrix,
    pub c: Matrix,
}

impl HiddenState {
    pub fn zeros(hidden: usize, batch: usize) -> Self {
        HiddenState {
            h: Matrix::zeros(hidden, batch),
            c: Matrix::zeros(hidden, batch),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.h.rows()
    }

    pub fn batch(&self) -> usize {
        self.h.cols()
    }
}

/// Weights of one LSTM: `input_weights` is `4H x input`, `recurrent_weights`
/// is `4H x H`, `bias` is `4H x 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub input_weights: ParamBlock,
    pub recurrent_weights: ParamBlock,
    pub bias: ParamBlock,
}

impl LstmCellParams {
    pub fn zeros(name: &str, input: usize, hidden: usize) -> Self {
        LstmCellParams {
            input_weights: ParamBlock::zeros(format!("{name}.input_weights"), 4 * hidden, input),
            recurrent_weights: ParamBlock::zeros(format!("{name}.recurrent_weights"), 4 * hidden, hidden),
            bias: ParamBlock::zeros(format!("{name}.bias"), 4 * hidden, 1),
        }
    }

    /// Uniform in `±1/sqrt(fan_in)` with fan-in `input + hidden` for every
    /// entry.
    pub fn init<R: Rng>(name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(name, input, hidden);
        let bound = 1.0 / ((input + hidden) as f32).sqrt();
        for b in p.blocks_mut() {
            fill_uniform(&mut b.value, bound, rng);
        }
        p
    }

    pub fn input_size(&self) -> usize {
        self.input_weights.value.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.recurrent_weights.value.cols()
    }

    pub fn blocks(&self) -> [&ParamBlock; 3] {
        [&self.input_weights, &self.recurrent_weights, &self.bias]
    }

    pub fn blocks_mut(&mut self) -> [&mut ParamBlock; 3] {
        [&mut self.input_weights, &mut self.recurrent_weights, &mut self.bias]
    }
}

/// `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: ParamBlock,
    pub bias: ParamBlock,
}

impl Dense {
    pub fn zeros(name: &str, input: usize, output: usize) -> Self {
        Dense {
            weight: ParamBlock::zeros(format!("{name}.weight"), output, input),
            bias: ParamBlock::zeros(format!("{name}.bias"), output, 1),
        }
    }

    pub fn init<R: Rng>(name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        let mut d = Self::zeros(name, input, output);
        let bound = 1.0 / (input as f32).sqrt();
        fill_uniform(&mut d.weight.value, bound, rng);
        fill_uniform(&mut d.bias.value, bound, rng);
        d
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = matmul(&self.weight.value, x)?;
        y.add_column_broadcast(&self.bias.value)?;
        Ok(y)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub(crate) fn backward(&self, x: &Matrix, dy: &Matrix, grads: &mut DenseGrads) -> Result<Matrix> {
        add_matmul_nt(&mut grads.weight, dy, x)?;
        grads.bias.add_assign(&dy.sum_columns())?;
        matmul_tn(&self.weight.value, dy)
    }

    pub fn blocks(&self) -> [&ParamBlock; 2] {
        [&self.weight, &self.bias]
    }

    pub fn blocks_mut(&mut self) -> [&mut ParamBlock; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

fn fill_uniform<R: Rng>(m: &mut Matrix, bound: f32, rng: &mut R) {
    for v in m.as_mut_slice() {
        *v = rng.random_range(-bound..=bound);
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CellGrads {
    pub input_weights: Matrix,
    pub recurrent_weights: Matrix,
    pub bias: Matrix,
}

impl CellGrads {
    pub fn zeros_like(p: &LstmCellParams) -> Self {
        let z = |b: &ParamBlock| Matrix::zeros(b.value.rows(), b.value.cols());
        CellGrads {
            input_weights: z(&p.input_weights),
            recurrent_weights: z(&p.recurrent_weights),
            bias: z(&p.bias),
        }
    }

    pub fn matrices(&self) -> [&Matrix; 3] {
        [&self.input_weights, &self.recurrent_weights, &self.bias]
    }

    pub fn matrices_mut(&mut self) -> [&mut Matrix; 3] {
        [&mut self.input_weights, &mut self.recurrent_weights, &mut self.bias]
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DenseGrads {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl DenseGrads {
    pub fn zeros_like(d: &Dense) -> Self {
        DenseGrads {
            weight: Matrix::zeros(d.weight.value.rows(), d.weight.value.cols()),
            bias: Matrix::zeros(d.bias.value.rows(), 1),
        }
    }

    pub fn matrices(&self) -> [&Matrix; 2] {
        [&self.weight, &self.bias]
    }

    pub fn matrices_mut(&mut self) -> [&mut Matrix; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

/// Everything one cell step needs for its backward pass.
#[derive(Debug, Clone)]
pub(crate) struct CellCache {
    x: Matrix,
    h_prev: Matrix,
    c_prev: Matrix,
    /// Post-activation gates, `4H x batch`.
    gates: Matrix,
    tanh_c: Matrix,
}

/// One LSTM step: `i,f,o = σ(·)`, `g = tanh(·)`, `c' = f⊙c + i⊙g`,
/// `h' = o⊙tanh(c')`.
pub fn lstm_cell(x: &Matrix, state: &HiddenState, params: &LstmCellParams) -> Result<HiddenState> {
    lstm_cell_forward(x, state, params).map(|(s, _)| s)
}

pub(crate) fn lstm_cell_forward(
    x: &Matrix,
    state: &HiddenState,
    params: &LstmCellParams,
) -> Result<(HiddenState, CellCache)> {
    let hidden = params.hidden_size();
    if x.rows() != params.input_size() || x.cols() != state.batch() {
        return Err(Error::Dimension {
            op: "lstm_cell input",
            left: x.shape(),
            right: (params.input_size(), state.batch()),
        });
    }
    if state.h.rows() != hidden || state.c.shape() != state.h.shape() {
        return Err(Error::Dimension {
            op: "lstm_cell state",
            left: state.h.shape(),
            right: (hidden, state.batch()),
        });
    }
    let batch = x.cols();
    let mut gates = matmul(&params.input_weights.value, x)?;
    gates.add_assign(&matmul(&params.recurrent_weights.value, &state.h)?)?;
    gates.add_column_broadcast(&params.bias.value)?;

    let mut c = Matrix::zeros(hidden, batch);
    let mut h = Matrix::zeros(hidden, batch);
    let mut tanh_c = Matrix::zeros(hidden, batch);
    {
        let g = gates.as_mut_slice();
        let n = hidden * batch;
        for (k, v) in g.iter_mut().enumerate() {
            *v = if (2 * n..3 * n).contains(&k) { v.tanh() } else { sigmoid(*v) };
        }
        let (cs, hs, ts) = (c.as_mut_slice(), h.as_mut_slice(), tanh_c.as_mut_slice());
        let c_prev = state.c.as_slice();
        for k in 0..n {
            let (i, f, gg, o) = (g[k], g[n + k], g[2 * n + k], g[3 * n + k]);
            cs[k] = f * c_prev[k] + i * gg;
            ts[k] = cs[k].tanh();
            hs[k] = o * ts[k];
        }
    }
    let cache = CellCache {
        x: x.clone(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        gates,
        tanh_c,
    };
    Ok((HiddenState { h, c }, cache))
}

/// Backward through one step given the gradients flowing into `h'` and `c'`.
/// Returns `(dx, dh_prev, dc_prev)`.
pub(crate) fn lstm_cell_backward(
    cache: &CellCache,
    dh: &Matrix,
    dc: &Matrix,
    params: &LstmCellParams,
    grads: &mut CellGrads,
) -> Result<(Matrix, Matrix, Matrix)> {
    let (hidden, batch) = cache.c_prev.shape();
    let n = hidden * batch;
    let g = cache.gates.as_slice();
    let mut dz = Matrix::zeros(4 * hidden, batch);
    let mut dc_prev = Matrix::zeros(hidden, batch);
    {
        let dzs = dz.as_mut_slice();
        let (dh, dc, t, cp) = (dh.as_slice(), dc.as_slice(), cache.tanh_c.as_slice(), cache.c_prev.as_slice());
        let dcp = dc_prev.as_mut_slice();
        for k in 0..n {
            let (i, f, gg, o) = (g[k], g[n + k], g[2 * n + k], g[3 * n + k]);
            let d_o = dh[k] * t[k];
            let dct = dc[k] + dh[k] * o * (1.0 - t[k] * t[k]);
            let d_i = dct * gg;
            let d_g = dct * i;
            let d_f = dct * cp[k];
            dcp[k] = dct * f;
            dzs[k] = d_i * i * (1.0 - i);
            dzs[n + k] = d_f * f * (1.0 - f);
            dzs[2 * n + k] = d_g * (1.0 - gg * gg);
            dzs[3 * n + k] = d_o * o * (1.0 - o);
        }
    }
    add_matmul_nt(&mut grads.input_weights, &dz, &cache.x)?;
    add_matmul_nt(&mut grads.recurrent_weights, &dz, &cache.h_prev)?;
    grads.bias.add_assign(&dz.sum_columns())?;
    let dx = matmul_tn(&params.input_weights.value, &dz)?;
    let dh_prev = matmul_tn(&params.recurrent_weights.value, &dz)?;
    Ok((dx, dh_prev, dc_prev))
}

/// Folds the cell over `inputs` from a zero state and returns the last state.
pub fn encode(inputs: &[Matrix], params: &LstmCellParams) -> Result<HiddenState> {
    encode_forward(inputs, params).map(|(s, _)| s)
}

pub(crate) fn encode_forward(inputs: &[Matrix], params: &LstmCellParams) -> Result<(HiddenState, Vec<CellCache>)> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::Validation("cannot encode an empty sequence".into()))?;
    let mut state = HiddenState::zeros(params.hidden_size(), first.cols());
    let mut caches = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (next, cache) = lstm_cell_forward(x, &state, params)?;
        caches.push(cache);
        state = next;
    }
    Ok((state, caches))
}

/// Backpropagates through an encoder unroll from the gradient of its final
/// state. Input gradients are discarded.
pub(crate) fn encode_backward(
    caches: &[CellCache],
    mut dh: Matrix,
    mut dc: Matrix,
    params: &LstmCellParams,
    grads: &mut CellGrads,
) -> Result<()> {
    for cache in caches.iter().rev() {
        let (_, dh_prev, dc_prev) = lstm_cell_backward(cache, &dh, &dc, params, grads)?;
        dh = dh_prev;
        dc = dc_prev;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn zero_params_zero_state() {
        let p = LstmCellParams::zeros("c", 3, 2);
        let s = lstm_cell(&Matrix::column(&[5.0, -1.0, 2.0]), &HiddenState::zeros(2, 1), &p).unwrap();
        assert_eq!(s.h, Matrix::zeros(2, 1));
        assert_eq!(s.c, Matrix::zeros(2, 1));
    }

    #[test]
    fn zero_params_unit_cell() {
        let p = LstmCellParams::zeros("c", 3, 1);
        let state = HiddenState { h: Matrix::zeros(1, 1), c: Matrix::column(&[1.0]) };
        let s = lstm_cell(&Matrix::column(&[0.3, 0.1, -0.2]), &state, &p).unwrap();
        assert!((s.c.get(0, 0) - 0.5).abs() < 1e-7);
        assert!((s.h.get(0, 0) - 0.231059).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = LstmCellParams::zeros("c", 3, 2);
        assert!(lstm_cell(&Matrix::column(&[1.0]), &HiddenState::zeros(2, 1), &p).is_err());
        assert!(lstm_cell(&Matrix::column(&[1.0, 2.0, 3.0]), &HiddenState::zeros(3, 1), &p).is_err());
    }

    #[test]
    fn encode_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = LstmCellParams::init("c", 4, 3, &mut rng);
        let xs: Vec<Matrix> = (0..3).map(|_| random_matrix(4, 2, &mut rng)).collect();

        let one = encode(&xs[..1], &p).unwrap();
        assert_eq!(one, lstm_cell(&xs[0], &HiddenState::zeros(3, 2), &p).unwrap());

        let mut manual = HiddenState::zeros(3, 2);
        for x in &xs {
            manual = lstm_cell(x, &manual, &p).unwrap();
        }
        assert_eq!(encode(&xs, &p).unwrap(), manual);

        let zero = LstmCellParams::zeros("z", 4, 3);
        assert_eq!(encode(&xs, &zero).unwrap(), HiddenState::zeros(3, 2));
        assert!(matches!(encode(&[], &p), Err(Error::Validation(_))));
    }

    // Scalar loss sum(h' * wh) + sum(c' * wc) through one cell, compared against
    // central differences in f64 accumulation.
    #[test]
    fn single_cell_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut p = LstmCellParams::init("c", 3, 4, &mut rng);
        let x = random_matrix(3, 2, &mut rng);
        let state = HiddenState { h: random_matrix(4, 2, &mut rng), c: random_matrix(4, 2, &mut rng) };
        let wh = random_matrix(4, 2, &mut rng);
        let wc = random_matrix(4, 2, &mut rng);

        let loss = |p: &LstmCellParams, x: &Matrix, s: &HiddenState| -> f64 {
            let out = lstm_cell(x, s, p).unwrap();
            let dot = |a: &Matrix, b: &Matrix| -> f64 {
                a.as_slice().iter().zip(b.as_slice()).map(|(&u, &v)| u as f64 * v as f64).sum()
            };
            dot(&out.h, &wh) + dot(&out.c, &wc)
        };

        let (_, cache) = lstm_cell_forward(&x, &state, &p).unwrap();
        let mut grads = CellGrads::zeros_like(&p);
        let (dx, dh_prev, dc_prev) = lstm_cell_backward(&cache, &wh, &wc, &p, &mut grads).unwrap();

        let h = 1e-3f32;
        let check = |analytic: f32, plus: f64, minus: f64, step: f64| {
            let numeric = (plus - minus) / step;
            let err = (analytic as f64 - numeric).abs() / (analytic.abs() as f64).max(numeric.abs()).max(1e-2);
            assert!(err < 5e-3, "analytic {analytic} numeric {numeric}");
        };

        let blocks = [grads.input_weights.clone(), grads.recurrent_weights.clone(), grads.bias.clone()];
        for (bi, g) in blocks.iter().enumerate() {
            for i in 0..g.len() {
                let orig = p.blocks()[bi].value.as_slice()[i];
                p.blocks_mut()[bi].value.as_mut_slice()[i] = orig + h;
                let fp = loss(&p, &x, &state);
                p.blocks_mut()[bi].value.as_mut_slice()[i] = orig - h;
                let fm = loss(&p, &x, &state);
                p.blocks_mut()[bi].value.as_mut_slice()[i] = orig;
                check(g.as_slice()[i], fp, fm, (orig + h) as f64 - (orig - h) as f64);
            }
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.as_mut_slice()[i] += h;
            let mut xm = x.clone();
            xm.as_mut_slice()[i] -= h;
            let step = xp.as_slice()[i] as f64 - xm.as_slice()[i] as f64;
            check(dx.as_slice()[i], loss(&p, &xp, &state), loss(&p, &xm, &state), step);
        }
        for i in 0..state.h.len() {
            let mut sp = state.clone();
            sp.h.as_mut_slice()[i] += h;
            let mut sm = state.clone();
            sm.h.as_mut_slice()[i] -= h;
            let step = sp.h.as_slice()[i] as f64 - sm.h.as_slice()[i] as f64;
            check(dh_prev.as_slice()[i], loss(&p, &x, &sp), loss(&p, &x, &sm), step);
            let mut sp = state.clone();
            sp.c.as_mut_slice()[i] += h;
            let mut sm = state.clone();
            sm.c.as_mut_slice()[i] -= h;
            let step = sp.c.as_slice()[i] as f64 - sm.c.as_slice()[i] as f64;
            check(dc_prev.as_slice()[i], loss(&p, &x, &sp), loss(&p, &x, &sm), step);
        }
    }
}
