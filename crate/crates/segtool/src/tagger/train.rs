//! Mini-batch training with Adam and early stopping on validation loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::adam::Adam;
use super::model::{ParamTensors, TaggerModel};
use super::{ModelConfig, Vocabulary};
use crate::corpus::Instance;
use crate::error::{Result, SegError};
use crate::noise::{synthesize_gamma, NoiseParams};
use crate::seed::{derive_seed, derive_seed_for};

/// Optional training behaviors beyond the plain config.
#[derive(Default)]
pub struct TrainOptions {
    /// Pretrained token vectors, `word -> values`; rows for in-vocabulary
    /// words replace the random initialization.
    pub pretrained_embeddings: Option<Vec<(String, Vec<f64>)>>,
    /// Keep the token embedding table fixed during optimization.
    pub freeze_embeddings: bool,
    /// Re-synthesize gamma from the gold labels at the start of every epoch
    /// instead of training on the fixed tags stored in the data.
    pub resample_noise: Option<NoiseParams>,
}

#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were returned; 0 means the initial snapshot.
    pub best_epoch: usize,
    pub best_valid_loss: f64,
}

/// Trains a fresh tagger. The vocabulary comes from the training set; the
/// returned model is the snapshot with minimum validation loss.
pub fn train(train_set: &[Instance], valid_set: &[Instance], cfg: &ModelConfig) -> Result<TaggerModel> {
    train_with_report(train_set, valid_set, cfg, &TrainOptions::default()).map(|(m, _)| m)
}

/// Continues training an existing model on new data; identical loop to
/// [`train`] but initialized from `model`, with early stopping against
/// `valid_set`. The initial parameters count as the epoch-0 snapshot, so the
/// result is never worse on `valid_set` than the input model.
pub fn fine_tune(
    model: &TaggerModel,
    train_set: &[Instance],
    valid_set: &[Instance],
    cfg: &ModelConfig,
) -> Result<TaggerModel> {
    if !cfg.same_shape(&model.cfg) {
        return Err(SegError::data(
            "fine-tuning config does not match the model's architecture",
        ));
    }
    let mut seeded = model.clone();
    seeded.cfg = cfg.clone();
    let (tuned, _) = run_training(seeded, train_set, valid_set, &TrainOptions::default())?;
    Ok(tuned)
}

/// [`train`] with access to the epoch history.
pub fn train_with_report(
    train_set: &[Instance],
    valid_set: &[Instance],
    cfg: &ModelConfig,
    options: &TrainOptions,
) -> Result<(TaggerModel, TrainReport)> {
    cfg.validate()?;
    if train_set.is_empty() || valid_set.is_empty() {
        return Err(SegError::data("training and validation sets must be non-empty"));
    }
    let vocab = Vocabulary::from_instances(train_set);
    let mut model = TaggerModel::new(cfg.clone(), vocab)?;
    if let Some(rows) = &options.pretrained_embeddings {
        model.load_pretrained_embeddings(
            rows.iter().map(|(w, v)| (w.as_str(), v.as_slice())),
        )?;
    }
    run_training(model, train_set, valid_set, options)
}

fn run_training(
    mut model: TaggerModel,
    train_set: &[Instance],
    valid_set: &[Instance],
    options: &TrainOptions,
) -> Result<(TaggerModel, TrainReport)> {
    let cfg = model.cfg.clone();

    // Pre-encode once; gamma may be refreshed per epoch when resampling.
    let mut encoded: Vec<(Vec<usize>, Vec<u8>, Vec<u8>)> = train_set
        .iter()
        .map(|inst| model.encode_for_training(inst))
        .collect::<Result<_>>()?;
    let valid_encoded: Vec<(Vec<usize>, Vec<u8>, Vec<u8>)> = valid_set
        .iter()
        .map(|inst| model.encode_for_training(inst))
        .collect::<Result<_>>()?;

    let tensor_lens: Vec<usize> = model.params.slices().iter().map(|(_, s)| s.len()).collect();
    let frozen: Vec<bool> = model
        .params
        .slices()
        .iter()
        .enumerate()
        .map(|(i, _)| i == 0 && options.freeze_embeddings)
        .collect();
    let mut adam = Adam::new(cfg.learning_rate, &tensor_lens);
    let mut grads = ParamTensors::zeros(&cfg, model.vocab.len());

    let mut report = TrainReport::default();
    let mut best_loss = evaluate(&model, &valid_encoded)?;
    let mut best_params = model.params.clone();
    let mut best_epoch = 0usize;
    let mut epochs_since_improvement = 0usize;

    let mut shuffle_rng = ChaCha12Rng::seed_from_u64(derive_seed(cfg.seed, "tagger-shuffle"));

    for epoch in 1..=cfg.max_epochs {
        if let Some(noise) = &options.resample_noise {
            for (inst, enc) in train_set.iter().zip(encoded.iter_mut()) {
                let seed = derive_seed_for(
                    noise.seed,
                    &format!("resample-epoch-{epoch}"),
                    &format!("{}:{}", inst.doc_id, inst.index),
                );
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                enc.1 = synthesize_gamma(&inst.labels, noise, &mut rng);
            }
        }

        let mut order: Vec<usize> = (0..encoded.len()).collect();
        order.shuffle(&mut shuffle_rng);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.zero_out();
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &idx in batch {
                let (ids, flags, labels) = &encoded[idx];
                batch_loss +=
                    model.accumulate_gradients(ids, flags, labels, scale, &mut grads) * scale;
            }
            if !batch_loss.is_finite() {
                return Err(SegError::numeric(format!(
                    "training loss became non-finite in epoch {epoch}"
                )));
            }
            epoch_loss += batch_loss * batch.len() as f64;
            let grad_slices: Vec<&[f64]> =
                grads.slices().into_iter().map(|(_, s)| s).collect();
            let mut param_slices = model.params.slices_mut();
            adam.step(&mut param_slices, &grad_slices, &frozen);
        }
        let train_loss = epoch_loss / encoded.len() as f64;
        let valid_loss = evaluate(&model, &valid_encoded)?;
        report.epochs.push(EpochStats {
            epoch,
            train_loss,
            valid_loss,
        });

        if valid_loss < best_loss {
            best_loss = valid_loss;
            best_params = model.params.clone();
            best_epoch = epoch;
            epochs_since_improvement = 0;
        } else {
            epochs_since_improvement += 1;
            if epochs_since_improvement >= cfg.patience {
                break;
            }
        }
    }

    model.params = best_params;
    report.best_epoch = best_epoch;
    report.best_valid_loss = best_loss;
    Ok((model, report))
}

fn evaluate(model: &TaggerModel, encoded: &[(Vec<usize>, Vec<u8>, Vec<u8>)]) -> Result<f64> {
    let mut total = 0.0;
    for (ids, flags, labels) in encoded {
        let pass = model.run_forward(ids, flags, false);
        total += super::model::instance_nll(&pass.probs, labels);
    }
    let loss = total / encoded.len() as f64;
    if !loss.is_finite() {
        return Err(SegError::numeric("validation loss is non-finite"));
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::boundary_prf;
    use crate::noise::NoiseMode;
    use rand::Rng;

    /// Synthetic language: a boundary follows every "stop" token.
    fn stop_grammar(
        n_instances: usize,
        seed: u64,
        noise: &NoiseParams,
    ) -> Vec<Instance> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let vocab = ["alpha", "beta", "gamma", "delta", "stop"];
        (0..n_instances)
            .map(|index| {
                let len = rng.gen_range(5..=14);
                let tokens: Vec<String> = (0..len)
                    .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
                    .collect();
                let labels: Vec<u8> =
                    tokens.iter().map(|t| u8::from(t == "stop")).collect();
                let gamma = synthesize_gamma(&labels, noise, &mut rng);
                Instance {
                    doc_id: "grammar".into(),
                    index,
                    tokens,
                    gamma: Some(gamma),
                    labels,
                }
            })
            .collect()
    }

    fn tiny_cfg(seed: u64) -> ModelConfig {
        ModelConfig {
            token_embed_dim: 12,
            flag_embed_dim: 4,
            hidden_units: 12,
            layers: 2,
            learning_rate: 0.01,
            batch_size: 16,
            max_epochs: 30,
            patience: 5,
            seed,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn learns_the_stop_grammar() {
        let noise = NoiseParams {
            seed: 5,
            ..NoiseParams::default()
        };
        let train_set = stop_grammar(220, 11, &noise);
        let valid_set = stop_grammar(40, 12, &noise);
        let heldout = stop_grammar(40, 13, &noise);

        let model = train(&train_set, &valid_set, &tiny_cfg(3)).unwrap();

        let mut pred_all = Vec::new();
        let mut gold_all = Vec::new();
        for inst in &heldout {
            let preds = model
                .predict(&inst.tokens, inst.gamma.as_ref().unwrap(), 0.5)
                .unwrap();
            pred_all.extend(preds);
            gold_all.extend(inst.labels.iter().copied());
        }
        let (_, _, f1) = boundary_prf(&pred_all, &gold_all).unwrap();
        assert!(f1 >= 0.99, "held-out F1 {f1}");
    }

    #[test]
    fn first_epoch_reduces_training_loss() {
        let noise = NoiseParams {
            seed: 6,
            ..NoiseParams::default()
        };
        let train_set = stop_grammar(80, 21, &noise);
        let valid_set = stop_grammar(20, 22, &noise);
        let cfg = ModelConfig {
            max_epochs: 1,
            ..tiny_cfg(4)
        };
        let (model, report) =
            train_with_report(&train_set, &valid_set, &cfg, &TrainOptions::default()).unwrap();
        let fresh = TaggerModel::new(cfg.clone(), Vocabulary::from_instances(&train_set)).unwrap();
        let initial = fresh.loss(&train_set).unwrap();
        assert!(report.epochs[0].train_loss < initial);
        assert_eq!(report.epochs.len(), 1);
        // Best snapshot may be epoch 0 or 1, but the model must evaluate
        // to the recorded best loss.
        let check = model.loss(&valid_set).unwrap();
        assert!((check - report.best_valid_loss).abs() < 1e-9);
    }

    #[test]
    fn identical_seeds_give_identical_models() {
        let noise = NoiseParams {
            seed: 9,
            ..NoiseParams::default()
        };
        let train_set = stop_grammar(60, 31, &noise);
        let valid_set = stop_grammar(15, 32, &noise);
        let cfg = ModelConfig {
            max_epochs: 3,
            ..tiny_cfg(8)
        };
        let a = train(&train_set, &valid_set, &cfg).unwrap();
        let b = train(&train_set, &valid_set, &cfg).unwrap();
        assert_eq!(a.parameter_vector(), b.parameter_vector());
        assert_eq!(a.loss(&valid_set).unwrap(), b.loss(&valid_set).unwrap());
    }

    #[test]
    fn zero_epochs_fine_tune_returns_the_input_model() {
        let noise = NoiseParams {
            seed: 10,
            ..NoiseParams::default()
        };
        let train_set = stop_grammar(40, 41, &noise);
        let valid_set = stop_grammar(10, 42, &noise);
        let cfg = ModelConfig {
            max_epochs: 2,
            ..tiny_cfg(5)
        };
        let model = train(&train_set, &valid_set, &cfg).unwrap();
        let frozen_cfg = ModelConfig {
            max_epochs: 0,
            ..cfg
        };
        let tuned = fine_tune(&model, &train_set, &valid_set, &frozen_cfg).unwrap();
        assert_eq!(tuned.parameter_vector(), model.parameter_vector());
    }

    #[test]
    fn fine_tune_never_hurts_the_new_validation_loss() {
        let noise = NoiseParams {
            seed: 14,
            ..NoiseParams::default()
        };
        let train_set = stop_grammar(60, 51, &noise);
        let valid_set = stop_grammar(15, 52, &noise);
        // A different "domain": same grammar, different sampling.
        let build_train = stop_grammar(40, 53, &noise);
        let build_valid = stop_grammar(12, 54, &noise);

        let cfg = ModelConfig {
            max_epochs: 3,
            ..tiny_cfg(6)
        };
        let model = train(&train_set, &valid_set, &cfg).unwrap();
        let before = model.loss(&build_valid).unwrap();
        let tuned = fine_tune(&model, &build_train, &build_valid, &cfg).unwrap();
        let after = tuned.loss(&build_valid).unwrap();
        assert!(after <= before + 1e-12, "before {before}, after {after}");
    }

    #[test]
    fn fine_tune_with_tiny_lr_stays_close() {
        let noise = NoiseParams {
            seed: 15,
            ..NoiseParams::default()
        };
        let train_set = stop_grammar(60, 61, &noise);
        let valid_set = stop_grammar(15, 62, &noise);
        let cfg = ModelConfig {
            max_epochs: 4,
            ..tiny_cfg(7)
        };
        let model = train(&train_set, &valid_set, &cfg).unwrap();
        let before = model.loss(&valid_set).unwrap();
        let gentle = ModelConfig {
            learning_rate: 1e-6,
            max_epochs: 2,
            ..cfg
        };
        let tuned = fine_tune(&model, &train_set, &valid_set, &gentle).unwrap();
        let after = tuned.loss(&valid_set).unwrap();
        assert!(
            (after - before).abs() <= 0.05 * before.abs().max(1e-9),
            "before {before}, after {after}"
        );
    }

    #[test]
    fn resampling_noise_changes_gamma_but_stays_deterministic() {
        let noise = NoiseParams {
            seed: 16,
            mode: NoiseMode::Both,
            ..NoiseParams::default()
        };
        let train_set = stop_grammar(40, 71, &noise);
        let valid_set = stop_grammar(10, 72, &noise);
        let cfg = ModelConfig {
            max_epochs: 2,
            ..tiny_cfg(9)
        };
        let opts = TrainOptions {
            resample_noise: Some(noise.clone()),
            ..TrainOptions::default()
        };
        let (a, _) = train_with_report(&train_set, &valid_set, &cfg, &opts).unwrap();
        let (b, _) = train_with_report(&train_set, &valid_set, &cfg, &opts).unwrap();
        assert_eq!(a.parameter_vector(), b.parameter_vector());
    }

    #[test]
    fn frozen_embeddings_do_not_move() {
        let noise = NoiseParams {
            seed: 17,
            ..NoiseParams::default()
        };
        let train_set = stop_grammar(30, 81, &noise);
        let valid_set = stop_grammar(10, 82, &noise);
        let cfg = ModelConfig {
            max_epochs: 1,
            ..tiny_cfg(10)
        };
        let opts = TrainOptions {
            freeze_embeddings: true,
            ..TrainOptions::default()
        };
        let (model, _) = train_with_report(&train_set, &valid_set, &cfg, &opts).unwrap();
        let fresh = TaggerModel::new(cfg.clone(), Vocabulary::from_instances(&train_set)).unwrap();
        // The embedding table (first tensor) is untouched; later tensors moved.
        let trained = model.params.slices();
        let init = fresh.params.slices();
        assert_eq!(trained[0].1, init[0].1);
        assert_ne!(trained.last().unwrap().1, init.last().unwrap().1);
    }
}
