use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::TrainConfig;
use crate::harness::dataset::{Dataset, Split};
use crate::harness::evaluate::{evaluate, evaluate_checkpoint, EvalTable};
use crate::harness::train::train_on;
use crate::model::Variant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub variant: Variant,
    pub seed: u64,
    pub table: EvalTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub runs: Vec<AblationRun>,
}

/// Paired per-seed accuracy differences `a - b` over a family subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: Variant,
    pub b: Variant,
    pub families: Vec<String>,
    pub seeds: Vec<u64>,
    pub deltas: Vec<f64>,
    pub mean_delta: f64,
    pub positives: usize,
    pub negatives: usize,
    /// One-sided sign-test p-value for `a > b`.
    pub p_value: f64,
}

/// `P(X >= positives)` for `X ~ Binomial(n, 1/2)`, `n` the number of nonzero deltas.
pub fn sign_test_p(deltas: &[f64]) -> f64 {
    let pos = deltas.iter().filter(|&&d| d > 0.0).count();
    let n = deltas.iter().filter(|&&d| d != 0.0).count();
    if n == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    let mut c = 1.0; // C(n, 0)
    for k in 0..=n {
        if k >= pos {
            total += c;
        }
        c = c * (n - k) as f64 / (k + 1) as f64;
    }
    total / 2f64.powi(n as i32)
}

pub fn checkpoint_name(variant: Variant, seed: u64) -> String {
    format!("{}_seed{seed}", variant.name())
}

impl AblationResult {
    pub fn run(&self, variant: Variant, seed: u64) -> Option<&AblationRun> {
        self.runs.iter().find(|r| r.variant == variant && r.seed == seed)
    }

    pub fn compare(&self, a: Variant, b: Variant, families: &[&str]) -> Result<Comparison> {
        let mut seeds: Vec<u64> = self.runs.iter().filter(|r| r.variant == a).map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        let mut deltas = Vec::with_capacity(seeds.len());
        for &s in &seeds {
            let ra = self.run(a, s).expect("listed seed");
            let rb = self.run(b, s).ok_or_else(|| Error::not_found(format!("run {}", checkpoint_name(b, s))))?;
            deltas.push(ra.table.pooled(families) - rb.table.pooled(families));
        }
        let mean_delta = if deltas.is_empty() { 0.0 } else { deltas.iter().sum::<f64>() / deltas.len() as f64 };
        Ok(Comparison {
            a,
            b,
            families: families.iter().map(|f| f.to_string()).collect(),
            seeds,
            positives: deltas.iter().filter(|&&d| d > 0.0).count(),
            negatives: deltas.iter().filter(|&&d| d < 0.0).count(),
            p_value: sign_test_p(&deltas),
            mean_delta,
            deltas,
        })
    }

    /// `variant,seed,family,count,correct,accuracy` rows.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["variant", "seed", "family", "count", "correct", "accuracy"])?;
        for r in &self.runs {
            for f in &r.table.rows {
                w.write_record([
                    r.variant.name().to_string(),
                    r.seed.to_string(),
                    f.family.clone(),
                    f.count.to_string(),
                    f.correct.to_string(),
                    format!("{:.6}", f.accuracy),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Per-family accuracy deltas of every variant against `reference`, per seed.
    pub fn deltas_csv(&self, reference: Variant) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["variant", "seed", "family", "delta_vs_reference"])?;
        for r in self.runs.iter().filter(|r| r.variant != reference) {
            let Some(base) = self.run(reference, r.seed) else { continue };
            for f in &r.table.rows {
                let b = base.table.get(&f.family).map_or(0.0, |x| x.accuracy);
                w.write_record([r.variant.name().to_string(), r.seed.to_string(), f.family.clone(), format!("{:.6}", f.accuracy - b)])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn variant_config(cfg: &TrainConfig, variant: Variant, seed: u64) -> TrainConfig {
    let mut c = cfg.clone();
    c.seed = seed;
    c.model.variant = variant;
    c
}

/// Trains every variant on every seed with identical data and budgets.
/// Runs are independent and execute in parallel; results keep the
/// `seeds x variants` order. Checkpoints go to `out_dir/<variant>_seed<s>/`.
pub fn run_ablation(cfg: &TrainConfig, variants: &[Variant], seeds: &[u64], out_dir: Option<&Path>) -> Result<AblationResult> {
    if variants.is_empty() || seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one variant and one seed".into()));
    }
    let mut runs = Vec::new();
    for &seed in seeds {
        let base = variant_config(cfg, variants[0], seed);
        let train = Dataset::generate(&base, Split::Train, base.train_scenes)?;
        let eval = Dataset::generate(&base, Split::Eval, base.eval_scenes)?;
        let results: Vec<Result<AblationRun>> = std::thread::scope(|s| {
            let handles: Vec<_> = variants
                .iter()
                .map(|&v| {
                    let (train, eval) = (&train, &eval);
                    let mut c = variant_config(cfg, v, seed);
                    // runs already execute side by side
                    c.threads = 1;
                    let dir: Option<PathBuf> = out_dir.map(|d| d.join(checkpoint_name(v, seed)));
                    s.spawn(move || {
                        let out = train_on(&c, train, eval, dir.as_deref())?;
                        Ok(AblationRun { variant: v, seed, table: out.eval })
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
        });
        for r in results {
            runs.push(r?);
        }
    }
    Ok(AblationResult { runs })
}

/// Scores saved checkpoints; a missing one is a not-found error.
pub fn ablation_from_checkpoints(cfg: &TrainConfig, dir: &Path, variants: &[Variant], seeds: &[u64]) -> Result<AblationResult> {
    let mut runs = Vec::new();
    for &seed in seeds {
        for &v in variants {
            let path = dir.join(checkpoint_name(v, seed)).join("checkpoint.json");
            if !path.exists() {
                return Err(Error::not_found(format!("checkpoint {}", path.display())));
            }
            let table = evaluate_checkpoint(&path, &variant_config(cfg, v, seed))?;
            runs.push(AblationRun { variant: v, seed, table });
        }
    }
    Ok(AblationResult { runs })
}

/// Scores one trained model per variant on a shared dataset (used when the
/// models are already in memory).
pub fn score_models(models: &[(Variant, u64, &crate::model::Model<f64>)], data: &Dataset, threads: usize) -> Result<AblationResult> {
    let mut runs = Vec::new();
    for &(variant, seed, m) in models {
        runs.push(AblationRun { variant, seed, table: evaluate(m, data, threads)? });
    }
    Ok(AblationResult { runs })
}
