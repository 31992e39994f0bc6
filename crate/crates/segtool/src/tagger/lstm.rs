//! Single-direction LSTM: forward pass with caching and backpropagation
//! through time. Gate order in the stacked weight matrices is
//! input, forget, cell, output.

use ndarray::{s, Array1, Array2};

#[derive(Debug, Clone)]
pub(crate) struct LstmParams {
    /// (4H, D) input weights.
    pub w_input: Array2<f64>,
    /// (4H, H) recurrent weights.
    pub w_recur: Array2<f64>,
    /// (4H,) bias.
    pub bias: Array1<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            w_input: Array2::zeros((4 * hidden, input_dim)),
            w_recur: Array2::zeros((4 * hidden, hidden)),
            bias: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_recur.ncols()
    }
}

/// Per-step activations kept for the backward pass, in traversal order.
pub(crate) struct StepCache {
    gate_i: Array1<f64>,
    gate_f: Array1<f64>,
    gate_g: Array1<f64>,
    gate_o: Array1<f64>,
    tanh_c: Array1<f64>,
    h_prev: Array1<f64>,
    c_prev: Array1<f64>,
}

pub(crate) struct DirCache {
    steps: Vec<StepCache>,
    reverse: bool,
}

impl DirCache {
    fn seq_pos(&self, step: usize, n: usize) -> usize {
        if self.reverse {
            n - 1 - step
        } else {
            step
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// target += u ⊗ v
fn add_outer(target: &mut Array2<f64>, u: &Array1<f64>, v: &Array1<f64>) {
    for (mut row, &ui) in target.rows_mut().into_iter().zip(u.iter()) {
        row.scaled_add(ui, v);
    }
}

/// Runs one direction over the sequence. Returns hidden states in sequence
/// order and, when requested, the cache needed for backpropagation.
pub(crate) fn run_direction(
    params: &LstmParams,
    inputs: &[Array1<f64>],
    reverse: bool,
    want_cache: bool,
) -> (Vec<Array1<f64>>, Option<DirCache>) {
    let n = inputs.len();
    let hidden = params.hidden();
    let mut outputs = vec![Array1::zeros(hidden); n];
    let mut cache = want_cache.then(|| DirCache {
        steps: Vec::with_capacity(n),
        reverse,
    });

    let mut h = Array1::zeros(hidden);
    let mut c: Array1<f64> = Array1::zeros(hidden);
    for step in 0..n {
        let pos = if reverse { n - 1 - step } else { step };
        let mut z = params.w_input.dot(&inputs[pos]);
        z += &params.w_recur.dot(&h);
        z += &params.bias;

        let gate_i = z.slice(s![0..hidden]).mapv(sigmoid);
        let gate_f = z.slice(s![hidden..2 * hidden]).mapv(sigmoid);
        let gate_g = z.slice(s![2 * hidden..3 * hidden]).mapv(f64::tanh);
        let gate_o = z.slice(s![3 * hidden..4 * hidden]).mapv(sigmoid);

        let c_prev = c;
        c = &gate_f * &c_prev + &gate_i * &gate_g;
        let tanh_c = c.mapv(f64::tanh);
        let h_prev = h;
        h = &gate_o * &tanh_c;
        outputs[pos] = h.clone();

        if let Some(cache) = cache.as_mut() {
            cache.steps.push(StepCache {
                gate_i,
                gate_f,
                gate_g,
                gate_o,
                tanh_c,
                h_prev,
                c_prev,
            });
        }
    }
    (outputs, cache)
}

/// Backpropagates through one direction. `d_outputs` holds dL/dh per
/// sequence position; gradients accumulate into `grads` and dL/dx into
/// `d_inputs`.
pub(crate) fn run_direction_backward(
    params: &LstmParams,
    grads: &mut LstmParams,
    inputs: &[Array1<f64>],
    d_outputs: &[Array1<f64>],
    cache: &DirCache,
    d_inputs: &mut [Array1<f64>],
) {
    let n = inputs.len();
    let hidden = params.hidden();
    let mut dh_carry: Array1<f64> = Array1::zeros(hidden);
    let mut dc_carry: Array1<f64> = Array1::zeros(hidden);

    for step in (0..n).rev() {
        let pos = cache.seq_pos(step, n);
        let s = &cache.steps[step];

        let dh = &d_outputs[pos] + &dh_carry;
        let d_gate_o = &dh * &s.tanh_c;
        let dc = &dc_carry + &(&dh * &s.gate_o * s.tanh_c.mapv(|t| 1.0 - t * t));
        let d_gate_i = &dc * &s.gate_g;
        let d_gate_g = &dc * &s.gate_i;
        let d_gate_f = &dc * &s.c_prev;
        dc_carry = &dc * &s.gate_f;

        // Pre-activation gradients.
        let mut dz = Array1::zeros(4 * hidden);
        {
            let mut di = dz.slice_mut(s![0..hidden]);
            di.assign(&(&d_gate_i * &s.gate_i * &s.gate_i.mapv(|v| 1.0 - v)));
            let mut df = dz.slice_mut(s![hidden..2 * hidden]);
            df.assign(&(&d_gate_f * &s.gate_f * &s.gate_f.mapv(|v| 1.0 - v)));
            let mut dg = dz.slice_mut(s![2 * hidden..3 * hidden]);
            dg.assign(&(&d_gate_g * &s.gate_g.mapv(|v| 1.0 - v * v)));
            let mut do_ = dz.slice_mut(s![3 * hidden..4 * hidden]);
            do_.assign(&(&d_gate_o * &s.gate_o * &s.gate_o.mapv(|v| 1.0 - v)));
        }

        add_outer(&mut grads.w_input, &dz, &inputs[pos]);
        add_outer(&mut grads.w_recur, &dz, &s.h_prev);
        grads.bias += &dz;

        d_inputs[pos] += &params.w_input.t().dot(&dz);
        dh_carry = params.w_recur.t().dot(&dz);
    }
}
