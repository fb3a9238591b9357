use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::config::InterventionSpec;
use crate::model::net::{Edit, ForwardOpts, Model, Sample};
use crate::region::RegionGraph;
use crate::scalar::Scalar;
use crate::text::detokenize;

/// Effect of one counterfactual edit on a decoded answer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionReport {
    pub spec: InterventionSpec,
    pub baseline_answer: String,
    pub intervened_answer: String,
    /// Baseline decode followed by the end token.
    pub tokens: Vec<String>,
    /// Teacher-forced probabilities of `tokens` before and after the edit.
    pub baseline_probs: Vec<f64>,
    pub intervened_probs: Vec<f64>,
    pub deltas: Vec<f64>,
    /// `|delta| > threshold` per token.
    pub flagged: Vec<bool>,
    /// Edited question, for text edits.
    pub text_edit: Option<String>,
    /// Share of the total absolute probability change attributed to each region.
    pub region_deltas: Vec<f64>,
    /// Mean absolute change of each intervention block's output.
    pub layer_deltas: Vec<f64>,
    /// Absolute per-unit change of each intervention block's output.
    #[serde(skip)]
    pub unit_deltas: Vec<Vec<f64>>,
}

impl InterventionReport {
    pub fn any_flagged(&self) -> bool {
        self.flagged.iter().any(|&f| f)
    }

    pub fn total_abs_delta(&self) -> f64 {
        self.deltas.iter().map(|d| d.abs()).sum()
    }
}

/// Applies `spec` to `sample`, re-runs the model and compares.
pub fn intervene<T: Scalar>(model: &Model<T>, sample: &Sample<T>, spec: InterventionSpec) -> Result<InterventionReport> {
    let base_opts = ForwardOpts::default();
    let answer = model.decode(sample, &base_opts)?;
    let mut tokens = answer.clone();
    tokens.push(model.end_id());

    let mut edited = sample.clone();
    let mut opts = ForwardOpts::default();
    let mut text_edit = None;
    match spec {
        InterventionSpec::None => {}
        InterventionSpec::MaskTextToken(i) => {
            edited.text.mask_position(i, &model.text_vocab)?;
            text_edit = Some(detokenize(&edited.text.tokens));
        }
        InterventionSpec::DeleteRegion(r) => {
            if r >= sample.regions() {
                return Err(Error::not_found(format!("region {r} of {}", sample.regions())));
            }
            opts.edit = Edit { deleted_region: Some(r) };
        }
    }

    let (p0, s0) = model.token_probs(sample, &tokens, &base_opts)?;
    let (p1, s1) = model.token_probs(&edited, &tokens, &opts)?;
    let intervened = model.decode(&edited, &opts)?;

    let baseline_probs: Vec<f64> = p0.iter().map(|p| p.to_f64_lossy()).collect();
    let intervened_probs: Vec<f64> = p1.iter().map(|p| p.to_f64_lossy()).collect();
    let deltas: Vec<f64> = intervened_probs.iter().zip(&baseline_probs).map(|(a, b)| a - b).collect();
    let flagged = deltas.iter().map(|d| d.abs() > model.config.delta).collect();
    let total: f64 = deltas.iter().map(|d| d.abs()).sum();

    let r = sample.regions();
    let mut region_deltas = vec![0.0; r];
    match spec {
        InterventionSpec::DeleteRegion(d) => region_deltas[d] = total,
        _ => {
            let shift: Vec<f64> = s1
                .causal_weights
                .iter()
                .zip(&s0.causal_weights)
                .map(|(a, b)| (a.to_f64_lossy() - b.to_f64_lossy()).abs())
                .collect();
            let norm: f64 = shift.iter().sum();
            if norm > 0.0 {
                for (o, s) in region_deltas.iter_mut().zip(&shift) {
                    *o = total * s / norm;
                }
            }
        }
    }

    let unit_deltas: Vec<Vec<f64>> = s1
        .branches
        .iter()
        .zip(&s0.branches)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x.to_f64_lossy() - y.to_f64_lossy()).abs()).collect())
        .collect();
    let layer_deltas = unit_deltas.iter().map(|u: &Vec<f64>| u.iter().sum::<f64>() / u.len().max(1) as f64).collect();

    Ok(InterventionReport {
        spec,
        baseline_answer: model.answer_text(&answer),
        intervened_answer: model.answer_text(&intervened),
        tokens: tokens.iter().map(|&t| model.answer_vocab[t].clone()).collect(),
        baseline_probs,
        intervened_probs,
        deltas,
        flagged,
        text_edit,
        region_deltas,
        layer_deltas,
        unit_deltas,
    })
}

/// Multiplies the dependency scale of every unit whose change exceeded its
/// block mean by the strengthening factor, capped. Does nothing when no
/// answer token was flagged. Returns the number of scales changed.
pub fn strengthen<T: Scalar>(model: &mut Model<T>, report: &InterventionReport) -> usize {
    if !report.any_flagged() {
        return 0;
    }
    let factor = T::lit(model.config.strengthen_factor);
    let cap = T::lit(model.config.strengthen_cap);
    let mut changed = 0;
    for (scales, units) in model.dependency_scales.iter_mut().zip(&report.unit_deltas) {
        let mean = units.iter().sum::<f64>() / units.len().max(1) as f64;
        for (s, &u) in scales.data_mut().iter_mut().zip(units) {
            if u > mean {
                let next = (*s * factor).min(cap);
                if next != *s {
                    *s = next;
                    changed += 1;
                }
            }
        }
    }
    changed
}

/// Per-pixel map of region attributions.
pub fn intervention_heatmap<T: Scalar>(graph: &RegionGraph<T>, report: &InterventionReport) -> Result<Vec<f64>> {
    if report.region_deltas.len() != graph.len() {
        return Err(Error::invalid(format!(
            "{} region deltas for {} regions",
            report.region_deltas.len(),
            graph.len()
        )));
    }
    Ok(graph.labels().iter().map(|&l| report.region_deltas[l]).collect())
}
