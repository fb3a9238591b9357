use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::TrainConfig;
use crate::harness::dataset::{text_vocabulary, Dataset, Split, FEATURE_DIM};
use crate::harness::evaluate::{evaluate, EvalTable};
use crate::harness::question::answer_vocabulary;
use crate::model::{intervene, save_model, strengthen, InterventionSpec, LossParts, LossWeights, Model};
use crate::numeric::{Adam, Tape, Tensor};
use crate::text::mask_triggers_pretext;

/// Mean loss components over one pass of the training set. Epoch 0 is
/// the untrained model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub task: f64,
    /// `None` when the term is switched off.
    pub closure: Option<f64>,
    pub causal: Option<f64>,
    pub eval_accuracy: f64,
}

pub fn metrics_csv(rows: &[EpochMetrics]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "loss", "task", "closure", "causal", "eval_accuracy"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
    for r in rows {
        w.write_record([
            r.epoch.to_string(),
            format!("{:.6}", r.loss),
            format!("{:.6}", r.task),
            opt(r.closure),
            opt(r.causal),
            format!("{:.6}", r.eval_accuracy),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub struct TrainOutcome {
    pub model: Model<f64>,
    pub metrics: Vec<EpochMetrics>,
    pub eval: EvalTable,
}

#[derive(Serialize)]
struct NanDump<'a> {
    epoch: usize,
    step: usize,
    scene_seed: u64,
    question: &'a str,
    task: f64,
    closure: f64,
    causal: f64,
    parameters_finite: bool,
    non_finite_parameters: Vec<&'a str>,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    x ^= x >> 31;
    x.wrapping_mul(0xbf58_476d_1ce4_e5b9)
}

fn weights(cfg: &TrainConfig) -> LossWeights {
    LossWeights { closure: cfg.lambda_closure, causal: cfg.lambda_causal }
}

/// Loss and parameter gradients of one item.
fn item_grads(
    model: &Model<f64>,
    cfg: &TrainConfig,
    item: &crate::harness::dataset::DataItem,
    seed: Option<u64>,
) -> Result<(LossParts, Option<Vec<Tensor<f64>>>)> {
    let pretext = if cfg.lambda_causal > 0.0 {
        let s = seed.unwrap_or(item.scene_seed);
        let (text, labels) = mask_triggers_pretext(&item.sample.text, &model.text_vocab, cfg.pretext_mask_p, s)?;
        (!labels.is_empty()).then_some((text, labels))
    } else {
        None
    };
    let mut tape = Tape::new();
    let b = model.params.bind(&mut tape);
    let (loss, parts) =
        model.loss(&mut tape, &b, &item.sample, weights(cfg), seed, pretext.as_ref().map(|(t, l)| (t, l.as_slice())))?;
    if seed.is_none() || !parts.total.is_finite() {
        return Ok((parts, None));
    }
    let g = tape.backward(loss)?;
    Ok((parts, Some(model.params.collect_grads(&b, &g))))
}

struct Totals {
    sum: LossParts,
    n: usize,
}

impl Totals {
    fn new() -> Self {
        Self { sum: LossParts::default(), n: 0 }
    }

    fn add(&mut self, p: &LossParts) {
        self.sum.task += p.task;
        self.sum.closure += p.closure;
        self.sum.causal += p.causal;
        self.sum.total += p.total;
        self.n += 1;
    }

    fn metrics(&self, cfg: &TrainConfig, epoch: usize, eval_accuracy: f64) -> EpochMetrics {
        let n = self.n.max(1) as f64;
        EpochMetrics {
            epoch,
            loss: self.sum.total / n,
            task: self.sum.task / n,
            closure: (cfg.lambda_closure > 0.0).then(|| self.sum.closure / n),
            causal: (cfg.lambda_causal > 0.0).then(|| self.sum.causal / n),
            eval_accuracy,
        }
    }
}

fn nan_abort(model: &Model<f64>, epoch: usize, step: usize, item: &crate::harness::dataset::DataItem, parts: &LossParts, out_dir: Option<&Path>) -> Error {
    let bad: Vec<&str> = (0..model.params.len()).filter(|&i| !model.params.get(i).all_finite()).map(|i| model.params.name(i)).collect();
    let dump = NanDump {
        epoch,
        step,
        scene_seed: item.scene_seed,
        question: &item.qa.question,
        task: parts.task,
        closure: parts.closure,
        causal: parts.causal,
        parameters_finite: bad.is_empty(),
        non_finite_parameters: bad,
    };
    let mut msg = format!("non-finite loss at epoch {epoch}, step {step} (scene {})", item.scene_seed);
    if let Some(dir) = out_dir {
        let path = dir.join("nan_dump.json");
        if let Ok(json) = serde_json::to_string_pretty(&dump) {
            if std::fs::write(&path, json).is_ok() {
                msg.push_str(&format!("; diagnostics in {}", path.display()));
            }
        }
    }
    Error::Numerical(msg)
}

/// Trains on prebuilt datasets.
pub fn train_on(cfg: &TrainConfig, train: &Dataset, eval: &Dataset, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut model = Model::new(cfg.model.clone(), text_vocabulary(), answer_vocabulary(), FEATURE_DIM, cfg.seed)?;
    let threads = cfg.worker_threads();
    let mut metrics = Vec::with_capacity(cfg.epochs + 1);

    let mut init = Totals::new();
    for item in &train.items {
        init.add(&item_grads(&model, cfg, item, None)?.0);
    }
    metrics.push(init.metrics(cfg, 0, evaluate(&model, eval, threads)?.overall()));

    let mut opt = Adam::new(cfg.learning_rate, &model.params.shapes());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = 0usize;
    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, epoch as u64, 1));
        order.shuffle(&mut rng);
        let mut totals = Totals::new();
        for batch in order.chunks(cfg.batch_size) {
            let mut acc: Option<Vec<Tensor<f64>>> = None;
            for &i in batch {
                let item = &train.items[i];
                let (parts, grads) = item_grads(&model, cfg, item, Some(mix(cfg.seed, epoch as u64, i as u64 + 2)))?;
                let Some(grads) = grads else {
                    return Err(nan_abort(&model, epoch, step, item, &parts, out_dir));
                };
                totals.add(&parts);
                match acc.as_mut() {
                    None => acc = Some(grads),
                    Some(a) => {
                        for (x, g) in a.iter_mut().zip(&grads) {
                            x.add_assign(g)?;
                        }
                    }
                }
            }
            let inv = 1.0 / batch.len() as f64;
            let grads: Vec<Tensor<f64>> = acc.expect("non-empty batch").into_iter().map(|g| g.scale(inv)).collect();
            opt.step(&mut model.params.tensors_mut(), &grads);
            step += 1;
            if cfg.strengthen_every > 0 && model.config.intervention_layers && step % cfg.strengthen_every == 0 {
                let item = &train.items[batch[batch.len() - 1]];
                let report = intervene(&model, &item.sample, InterventionSpec::DeleteRegion(item.answer_region))?;
                strengthen(&mut model, &report);
            }
        }
        if !model.params.all_finite() {
            let item = &train.items[order[0]];
            return Err(nan_abort(&model, epoch, step, item, &LossParts::default(), out_dir));
        }
        metrics.push(totals.metrics(cfg, epoch, evaluate(&model, eval, threads)?.overall()));
    }
    let table = evaluate(&model, eval, threads)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        save_model(&model, &dir.join("checkpoint.json"))?;
        std::fs::write(dir.join("metrics.csv"), metrics_csv(&metrics)?)?;
        std::fs::write(dir.join("eval.csv"), table.to_csv()?)?;
        std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    }
    Ok(TrainOutcome { model, metrics, eval: table })
}

/// Generates both splits, trains and, given `out_dir`, writes the
/// checkpoint, metrics, eval table and resolved config there.
pub fn train(cfg: &TrainConfig, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train = Dataset::generate(cfg, Split::Train, cfg.train_scenes)?;
    let eval = Dataset::generate(cfg, Split::Eval, cfg.eval_scenes)?;
    train_on(cfg, &train, &eval, out_dir)
}
