use ndarray::{Array1, Array2};
use rand::distributions::Uniform;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use super::lstm::{run_direction, run_direction_backward, sigmoid, DirCache, LstmParams};
use super::{ModelConfig, Vocabulary};
use crate::corpus::Instance;
use crate::error::{Result, SegError};
use crate::seed::derive_seed;

/// Probabilities are clamped this far away from 0 and 1 inside the loss.
const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone)]
pub(crate) struct BiLstmLayer {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
}

/// Every trainable tensor, in checkpoint order. The same struct doubles as
/// the gradient accumulator so parameters, gradients and optimizer state can
/// never drift out of alignment.
#[derive(Debug, Clone)]
pub(crate) struct ParamTensors {
    pub token_embed: Array2<f64>,
    pub flag_embed: Option<Array2<f64>>,
    pub layers: Vec<BiLstmLayer>,
    pub proj_weight: Array1<f64>,
    pub proj_bias: f64,
}

impl ParamTensors {
    pub fn zeros(cfg: &ModelConfig, vocab_size: usize) -> Self {
        let mut layers = Vec::with_capacity(cfg.layers);
        let mut input_dim = cfg.input_dim();
        for _ in 0..cfg.layers {
            layers.push(BiLstmLayer {
                fwd: LstmParams::zeros(input_dim, cfg.hidden_units),
                bwd: LstmParams::zeros(input_dim, cfg.hidden_units),
            });
            input_dim = cfg.context_dim();
        }
        Self {
            token_embed: Array2::zeros((vocab_size, cfg.token_embed_dim)),
            flag_embed: cfg
                .use_gamma_input
                .then(|| Array2::zeros((2, cfg.flag_embed_dim))),
            layers,
            proj_weight: Array1::zeros(cfg.context_dim()),
            proj_bias: 0.0,
        }
    }

    /// Tensor names and flat slices in declared order.
    pub fn slices(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        out.push(("token_embed".into(), flat(&self.token_embed)));
        if let Some(flag) = &self.flag_embed {
            out.push(("flag_embed".into(), flat(flag)));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            for (dir, params) in [("fwd", &layer.fwd), ("bwd", &layer.bwd)] {
                out.push((format!("layer{l}.{dir}.w_input"), flat(&params.w_input)));
                out.push((format!("layer{l}.{dir}.w_recur"), flat(&params.w_recur)));
                out.push((
                    format!("layer{l}.{dir}.bias"),
                    params.bias.as_slice().expect("contiguous"),
                ));
            }
        }
        out.push((
            "proj_weight".into(),
            self.proj_weight.as_slice().expect("contiguous"),
        ));
        out.push(("proj_bias".into(), std::slice::from_ref(&self.proj_bias)));
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        out.push(flat_mut(&mut self.token_embed));
        if let Some(flag) = &mut self.flag_embed {
            out.push(flat_mut(flag));
        }
        for layer in &mut self.layers {
            for params in [&mut layer.fwd, &mut layer.bwd] {
                out.push(flat_mut(&mut params.w_input));
                out.push(flat_mut(&mut params.w_recur));
                out.push(params.bias.as_slice_mut().expect("contiguous"));
            }
        }
        out.push(self.proj_weight.as_slice_mut().expect("contiguous"));
        out.push(std::slice::from_mut(&mut self.proj_bias));
        out
    }

    pub fn zero_out(&mut self) {
        for slice in self.slices_mut() {
            slice.fill(0.0);
        }
    }

    pub fn to_flat_vec(&self) -> Vec<f64> {
        self.slices()
            .into_iter()
            .flat_map(|(_, s)| s.iter().copied().collect::<Vec<_>>())
            .collect()
    }

    pub fn assign_flat(&mut self, values: &[f64]) -> Result<()> {
        let mut offset = 0;
        for slice in self.slices_mut() {
            let end = offset + slice.len();
            if end > values.len() {
                return Err(SegError::data("parameter vector too short"));
            }
            slice.copy_from_slice(&values[offset..end]);
            offset = end;
        }
        if offset != values.len() {
            return Err(SegError::data(format!(
                "parameter vector has {} values, model needs {offset}",
                values.len()
            )));
        }
        Ok(())
    }
}

fn flat(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn flat_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

/// The trained boundary tagger.
#[derive(Debug, Clone)]
pub struct TaggerModel {
    pub(crate) cfg: ModelConfig,
    pub(crate) vocab: Vocabulary,
    pub(crate) params: ParamTensors,
}

pub(crate) struct ForwardPass {
    /// Layer inputs: embeddings, then each layer's output sequence.
    layer_inputs: Vec<Vec<Array1<f64>>>,
    dir_caches: Vec<(DirCache, DirCache)>,
    pub probs: Vec<f64>,
}

impl TaggerModel {
    /// Fresh model with seeded uniform initialization. Embedding tables are
    /// drawn from U(-0.1, 0.1); recurrent and projection weights from
    /// U(-1/sqrt(fan), 1/sqrt(fan)).
    pub fn new(cfg: ModelConfig, vocab: Vocabulary) -> Result<Self> {
        cfg.validate()?;
        if vocab.is_empty() {
            return Err(SegError::data("vocabulary is empty"));
        }
        use rand::SeedableRng;
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(cfg.seed, "tagger-init"));
        let mut params = ParamTensors::zeros(&cfg, vocab.len());

        let embed_dist = Uniform::new_inclusive(-0.1, 0.1);
        fill(&mut params.token_embed, &mut rng, embed_dist);
        if let Some(flag) = &mut params.flag_embed {
            fill(flag, &mut rng, embed_dist);
        }
        let k = 1.0 / (cfg.hidden_units as f64).sqrt();
        let lstm_dist = Uniform::new_inclusive(-k, k);
        for layer in &mut params.layers {
            for dir in [&mut layer.fwd, &mut layer.bwd] {
                fill(&mut dir.w_input, &mut rng, lstm_dist);
                fill(&mut dir.w_recur, &mut rng, lstm_dist);
                for b in dir.bias.iter_mut() {
                    *b = rng.sample(lstm_dist);
                }
            }
        }
        let kp = 1.0 / (cfg.context_dim() as f64).sqrt();
        let proj_dist = Uniform::new_inclusive(-kp, kp);
        for w in params.proj_weight.iter_mut() {
            *w = rng.sample(proj_dist);
        }
        params.proj_bias = 0.0;

        Ok(Self { cfg, vocab, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Overwrites token embedding rows for vocabulary words present in the
    /// pretrained table. Returns how many rows were initialized.
    pub fn load_pretrained_embeddings<'a>(
        &mut self,
        rows: impl IntoIterator<Item = (&'a str, &'a [f64])>,
    ) -> Result<usize> {
        let mut hits = 0;
        for (word, values) in rows {
            if values.len() != self.cfg.token_embed_dim {
                return Err(SegError::data(format!(
                    "pretrained vector for {word:?} has {} dims, expected {}",
                    values.len(),
                    self.cfg.token_embed_dim
                )));
            }
            let id = self.vocab.id(word);
            if id != self.vocab.unknown_id() {
                self.params
                    .token_embed
                    .row_mut(id)
                    .assign(&Array1::from(values.to_vec()));
                hits += 1;
            }
        }
        Ok(hits)
    }

    /// Embedding lookup: token row concatenated with the flag row (when the
    /// model uses acoustic flags).
    pub fn embed(&self, token_id: usize, flag: u8) -> Result<Vec<f64>> {
        if token_id >= self.vocab.len() {
            return Err(SegError::data(format!(
                "token id {token_id} out of range (vocab size {})",
                self.vocab.len()
            )));
        }
        if flag > 1 {
            return Err(SegError::data(format!("flag must be 0 or 1, got {flag}")));
        }
        let mut out: Vec<f64> = self.params.token_embed.row(token_id).to_vec();
        if let Some(flag_embed) = &self.params.flag_embed {
            out.extend(flag_embed.row(flag as usize).iter());
        }
        Ok(out)
    }

    fn embed_sequence(&self, token_ids: &[usize], flags: &[u8]) -> Vec<Array1<f64>> {
        token_ids
            .iter()
            .zip(flags)
            .map(|(&id, &flag)| {
                let mut e = Array1::zeros(self.cfg.input_dim());
                let tok = self.params.token_embed.row(id);
                e.slice_mut(ndarray::s![0..self.cfg.token_embed_dim])
                    .assign(&tok);
                if let Some(flag_embed) = &self.params.flag_embed {
                    e.slice_mut(ndarray::s![self.cfg.token_embed_dim..])
                        .assign(&flag_embed.row(flag as usize));
                }
                e
            })
            .collect()
    }

    fn check_sequence(&self, tokens_len: usize, gamma: &[u8]) -> Result<()> {
        if tokens_len == 0 {
            return Err(SegError::data("cannot run the tagger on an empty sequence"));
        }
        if gamma.len() != tokens_len {
            return Err(SegError::data(format!(
                "gamma length {} does not match token length {tokens_len}",
                gamma.len()
            )));
        }
        if gamma.iter().any(|&g| g > 1) {
            return Err(SegError::data("gamma tags must be 0 or 1"));
        }
        Ok(())
    }

    pub(crate) fn token_ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.vocab.id(t)).collect()
    }

    pub(crate) fn run_forward(
        &self,
        token_ids: &[usize],
        flags: &[u8],
        want_cache: bool,
    ) -> ForwardPass {
        let n = token_ids.len();
        let mut layer_inputs = Vec::with_capacity(self.cfg.layers + 1);
        layer_inputs.push(self.embed_sequence(token_ids, flags));
        let mut dir_caches = Vec::with_capacity(self.cfg.layers);

        for layer in &self.params.layers {
            let inputs = layer_inputs.last().expect("at least embeddings");
            let (h_fwd, cache_fwd) = run_direction(&layer.fwd, inputs, false, want_cache);
            let (h_bwd, cache_bwd) = run_direction(&layer.bwd, inputs, true, want_cache);
            let outputs: Vec<Array1<f64>> = h_fwd
                .into_iter()
                .zip(h_bwd)
                .map(|(f, b)| {
                    let mut out = Array1::zeros(self.cfg.context_dim());
                    out.slice_mut(ndarray::s![0..self.cfg.hidden_units]).assign(&f);
                    out.slice_mut(ndarray::s![self.cfg.hidden_units..]).assign(&b);
                    out
                })
                .collect();
            layer_inputs.push(outputs);
            if want_cache {
                dir_caches.push((
                    cache_fwd.expect("cache requested"),
                    cache_bwd.expect("cache requested"),
                ));
            }
        }

        let top = layer_inputs.last().expect("layers present");
        let probs = (0..n)
            .map(|t| sigmoid(self.params.proj_weight.dot(&top[t]) + self.params.proj_bias))
            .collect();
        ForwardPass {
            layer_inputs,
            dir_caches,
            probs,
        }
    }

    /// Per-position boundary probabilities for one aligned (tokens, gamma)
    /// pair. Unknown tokens map to the unknown id; with `use_gamma_input`
    /// disabled the gamma values are ignored.
    pub fn forward(&self, tokens: &[String], gamma: &[u8]) -> Result<Vec<f64>> {
        self.check_sequence(tokens.len(), gamma)?;
        let ids = self.token_ids(tokens);
        Ok(self.run_forward(&ids, gamma, false).probs)
    }

    /// Thresholded boundary decisions: 1 where probability >= threshold.
    pub fn predict(&self, tokens: &[String], gamma: &[u8], threshold: f64) -> Result<Vec<u8>> {
        let probs = self.forward(tokens, gamma)?;
        Ok(probs.iter().map(|&p| u8::from(p >= threshold)).collect())
    }

    /// Mean over instances of the per-instance summed negative
    /// log-likelihood.
    pub fn loss(&self, batch: &[Instance]) -> Result<f64> {
        if batch.is_empty() {
            return Err(SegError::data("loss needs a non-empty batch"));
        }
        let mut total = 0.0;
        for inst in batch {
            let (ids, flags, labels) = self.encode_for_training(inst)?;
            let pass = self.run_forward(&ids, &flags, false);
            total += instance_nll(&pass.probs, &labels);
        }
        Ok(total / batch.len() as f64)
    }

    pub(crate) fn encode_for_training(
        &self,
        inst: &Instance,
    ) -> Result<(Vec<usize>, Vec<u8>, Vec<u8>)> {
        inst.validate()?;
        if inst.tokens.is_empty() {
            return Err(SegError::data(format!(
                "instance {}:{} is empty",
                inst.doc_id, inst.index
            )));
        }
        let flags = match (&inst.gamma, self.cfg.use_gamma_input) {
            (Some(gamma), _) => gamma.clone(),
            (None, false) => vec![0; inst.tokens.len()],
            (None, true) => {
                return Err(SegError::data(format!(
                    "instance {}:{} has no gamma tags; synthesize noise first",
                    inst.doc_id, inst.index
                )))
            }
        };
        Ok((self.token_ids(&inst.tokens), flags, inst.labels.clone()))
    }

    /// Accumulates dL/dθ for one instance into `grads`, scaled by `scale`.
    /// Returns this instance's NLL.
    pub(crate) fn accumulate_gradients(
        &self,
        ids: &[usize],
        flags: &[u8],
        labels: &[u8],
        scale: f64,
        grads: &mut ParamTensors,
    ) -> f64 {
        let n = ids.len();
        let pass = self.run_forward(ids, flags, true);
        let nll = instance_nll(&pass.probs, labels);

        // dL/dh for the top layer via the projection.
        let top = &pass.layer_inputs[self.cfg.layers];
        let mut d_layer: Vec<Array1<f64>> = vec![Array1::zeros(self.cfg.context_dim()); n];
        for t in 0..n {
            let d_logit = (pass.probs[t] - labels[t] as f64) * scale;
            grads.proj_weight.scaled_add(d_logit, &top[t]);
            grads.proj_bias += d_logit;
            d_layer[t].scaled_add(d_logit, &self.params.proj_weight);
        }

        // Walk layers top-down.
        for l in (0..self.cfg.layers).rev() {
            let inputs = &pass.layer_inputs[l];
            let input_dim = inputs[0].len();
            let mut d_inputs: Vec<Array1<f64>> = vec![Array1::zeros(input_dim); n];
            let (d_fwd, d_bwd): (Vec<Array1<f64>>, Vec<Array1<f64>>) = d_layer
                .iter()
                .map(|d| {
                    (
                        d.slice(ndarray::s![0..self.cfg.hidden_units]).to_owned(),
                        d.slice(ndarray::s![self.cfg.hidden_units..]).to_owned(),
                    )
                })
                .unzip();
            let (cache_fwd, cache_bwd) = &pass.dir_caches[l];
            run_direction_backward(
                &self.params.layers[l].fwd,
                &mut grads.layers[l].fwd,
                inputs,
                &d_fwd,
                cache_fwd,
                &mut d_inputs,
            );
            run_direction_backward(
                &self.params.layers[l].bwd,
                &mut grads.layers[l].bwd,
                inputs,
                &d_bwd,
                cache_bwd,
                &mut d_inputs,
            );
            d_layer = d_inputs;
        }

        // Embedding gradients.
        for (t, d) in d_layer.iter().enumerate() {
            let d_tok = d.slice(ndarray::s![0..self.cfg.token_embed_dim]);
            let mut row = grads.token_embed.row_mut(ids[t]);
            row += &d_tok;
            if let Some(flag_grads) = grads.flag_embed.as_mut() {
                let d_flag = d.slice(ndarray::s![self.cfg.token_embed_dim..]);
                let mut row = flag_grads.row_mut(flags[t] as usize);
                row += &d_flag;
            }
        }
        nll
    }

    /// Loss and the flattened analytic gradient over a batch, in parameter
    /// order. The seam used by the finite-difference checks.
    pub fn loss_and_gradient_vector(&self, batch: &[Instance]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(SegError::data("gradient needs a non-empty batch"));
        }
        let mut grads = ParamTensors::zeros(&self.cfg, self.vocab.len());
        grads.zero_out();
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for inst in batch {
            let (ids, flags, labels) = self.encode_for_training(inst)?;
            total += self.accumulate_gradients(&ids, &flags, &labels, scale, &mut grads);
        }
        Ok((total * scale, grads.to_flat_vec()))
    }

    /// All parameters flattened in declared order.
    pub fn parameter_vector(&self) -> Vec<f64> {
        self.params.to_flat_vec()
    }

    /// Overwrites all parameters from a flat vector in declared order.
    pub fn set_parameter_vector(&mut self, values: &[f64]) -> Result<()> {
        self.params.assign_flat(values)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.slices().iter().map(|(_, s)| s.len()).sum()
    }
}

fn fill<R: Rng>(a: &mut Array2<f64>, rng: &mut R, dist: Uniform<f64>) {
    for v in a.iter_mut() {
        *v = rng.sample(dist);
    }
}

/// Summed binary cross-entropy for one instance, with probabilities clamped
/// away from {0, 1}.
pub fn instance_nll(probs: &[f64], labels: &[u8]) -> f64 {
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum()
}
