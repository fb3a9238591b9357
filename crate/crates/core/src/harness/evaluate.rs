use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::TrainConfig;
use crate::harness::dataset::{DataItem, Dataset, Split, FEATURE_DIM};
use crate::model::{config_hash, Checkpoint, ForwardOpts, Model};

/// Anything that answers harness questions.
pub trait Answerer: Sync {
    fn answer(&self, item: &DataItem) -> Result<String>;
}

impl Answerer for Model<f64> {
    fn answer(&self, item: &DataItem) -> Result<String> {
        let ids = self.decode(&item.sample, &ForwardOpts::default())?;
        Ok(self.answer_text(&ids))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyScore {
    pub family: String,
    pub count: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Exact-match accuracy per family, then `overall`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub rows: Vec<FamilyScore>,
}

impl EvalTable {
    pub fn get(&self, family: &str) -> Option<&FamilyScore> {
        self.rows.iter().find(|r| r.family == family)
    }

    pub fn overall(&self) -> f64 {
        self.get("overall").map_or(0.0, |r| r.accuracy)
    }

    /// Pooled accuracy over the listed families.
    pub fn pooled(&self, families: &[&str]) -> f64 {
        let (c, n) = self
            .rows
            .iter()
            .filter(|r| families.contains(&r.family.as_str()))
            .fold((0, 0), |(c, n), r| (c + r.correct, n + r.count));
        if n == 0 {
            0.0
        } else {
            c as f64 / n as f64
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["family", "count", "correct", "accuracy"])?;
        for r in &self.rows {
            w.write_record([r.family.clone(), r.count.to_string(), r.correct.to_string(), format!("{:.6}", r.accuracy)])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn score(family: String, correct: usize, count: usize) -> FamilyScore {
    let accuracy = if count == 0 { 0.0 } else { correct as f64 / count as f64 };
    FamilyScore { family, count, correct, accuracy }
}

/// Scores `answerer` on every item, in parallel chunks.
pub fn evaluate(answerer: &dyn Answerer, data: &Dataset, threads: usize) -> Result<EvalTable> {
    let n = data.len();
    let threads = threads.clamp(1, n.max(1));
    let chunk = n.div_ceil(threads).max(1);
    let hits: Vec<Result<Vec<bool>>> = std::thread::scope(|s| {
        let handles: Vec<_> = data
            .items
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|it| Ok(answerer.answer(it)? == it.qa.answer)).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut correct = Vec::with_capacity(n);
    for h in hits {
        correct.extend(h?);
    }
    let mut rows = Vec::new();
    for f in data.families() {
        let (c, k) = data
            .items
            .iter()
            .zip(&correct)
            .filter(|(it, _)| it.family == f)
            .fold((0, 0), |(c, k), (_, &ok)| (c + usize::from(ok), k + 1));
        rows.push(score(f.name().to_string(), c, k));
    }
    rows.push(score("overall".into(), correct.iter().filter(|&&c| c).count(), n));
    Ok(EvalTable { rows })
}

/// Loads a checkpoint, checks it against `cfg` and scores it on the eval split.
pub fn evaluate_checkpoint(path: &Path, cfg: &TrainConfig) -> Result<EvalTable> {
    let ck = Checkpoint::load(path).map_err(|e| match e {
        Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => Error::not_found(format!("checkpoint {}", path.display())),
        e => e,
    })?;
    if ck.manifest.config_hash != config_hash(&cfg.model)? || ck.manifest.feature_dim != FEATURE_DIM {
        return Err(Error::Config(format!("checkpoint {} was trained with a different model config", path.display())));
    }
    let model: Model<f64> = ck.into_model()?;
    let data = Dataset::generate(cfg, Split::Eval, cfg.eval_scenes)?;
    evaluate(&model, &data, cfg.worker_threads())
}
