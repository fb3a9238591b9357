//! Scenes to model samples: ground-truth regions, tower layer maps and
//! encoded questions.

use crate::error::{Error, Result};
use crate::gestalt::{closure_fill, entity_flags, layer_maps, TowerConfig, TowerInputs};
use crate::harness::config::{SegmentationConfig, TrainConfig};
use crate::harness::question::{answer_vocabulary, generate_question, oracle_answer, question_words, QAPair};
use crate::harness::scene::{generate_scene, path_position, Family, SceneSpec, SyntheticScene};
use crate::model::Sample;
use crate::numeric::Tensor;
use crate::region::RegionGraph;
use crate::text::{CausalText, TriggerLexicon, Vocab};

/// Region descriptor width fed to the model:
/// `[r, g, b | variance | cx, cy | fill, size | dx, dy | is_query]`.
pub const FEATURE_DIM: usize = 11;

/// Offset between the scene-seed ranges of the splits.
const SPLIT_OFFSET: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Eval,
}

/// Scene seed of item `index`; the two splits use disjoint ranges.
pub fn scene_seed(seed: u64, split: Split, index: usize) -> u64 {
    let base = seed.wrapping_mul(1 << 34);
    match split {
        Split::Train => base.wrapping_add(index as u64),
        Split::Eval => base.wrapping_add(SPLIT_OFFSET + index as u64),
    }
}

pub fn text_vocabulary() -> Vocab {
    let words = question_words();
    Vocab::new(words.iter().map(String::as_str))
}

/// Segmentation of a scene into ground-truth regions, plus the region
/// holding most of each object.
#[derive(Clone, Debug)]
pub struct SceneGraph {
    pub graph: RegionGraph<f64>,
    pub object_regions: Vec<usize>,
    /// Entity flags, taken before the shape cues are appended.
    pub entity: Vec<bool>,
}

/// Objects are single regions, the visible path is cut into chunks along
/// its length and the background into square cells.
pub fn segment_scene(scene: &SyntheticScene, cfg: &SegmentationConfig, tower: &TowerConfig) -> Result<SceneGraph> {
    let (w, h) = (scene.width(), scene.height());
    let cells_x = w.div_ceil(cfg.background_cell);
    let cells = cells_x * h.div_ceil(cfg.background_cell);
    let n_obj = scene.objects.len();
    let mut labels = vec![0usize; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            labels[i] = if let Some(k) = scene.objects.iter().position(|o| o.visible_mask.get(x, y)) {
                cells + k
            } else if scene.path_mask.get(x, y) {
                let path = scene.path.as_ref().expect("path pixels imply a path");
                let s = path_position(path, (x as f64 + 0.5, y as f64 + 0.5));
                cells + n_obj + (s / cfg.path_chunk) as usize
            } else {
                (y / cfg.background_cell) * cells_x + x / cfg.background_cell
            };
        }
    }
    let mut graph = RegionGraph::from_labels(&scene.canvas, &labels)?;
    let object_regions = scene
        .objects
        .iter()
        .map(|o| {
            let (x, y) = o.visible_mask.pixels()[0];
            graph.labels()[y * w + x]
        })
        .collect();
    let entity = entity_flags(&graph, tower.entity_intensity, tower.entity_variance);
    // shape cues: fill of the bounding box and linear size
    let extra: Vec<Vec<f64>> = graph
        .regions()
        .iter()
        .map(|r| {
            let (x0, y0, x1, y1) = r.pixels.iter().fold((usize::MAX, usize::MAX, 0, 0), |b, &(x, y)| {
                (b.0.min(x), b.1.min(y), b.2.max(x), b.3.max(y))
            });
            let box_area = ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64;
            vec![r.area() as f64 / box_area, (r.area() as f64).sqrt() / w as f64]
        })
        .collect();
    graph.append_features(&extra)?;
    Ok(SceneGraph { graph, object_regions, entity })
}

/// Per-question model inputs built on a segmented scene.
pub fn build_sample(
    scene: &SyntheticScene,
    sg: &SceneGraph,
    qa: &QAPair,
    tower: &TowerConfig,
    lexicon: &TriggerLexicon,
    vocab: &Vocab,
    answer_vocab: &[String],
) -> Result<Sample<f64>> {
    let g = &sg.graph;
    let query = sg.object_regions[qa.query];
    let fill = closure_fill(&scene.canvas, tower);
    let qc = g.region(query)?.centroid;
    let dist: Vec<f64> =
        g.regions().iter().map(|r| ((r.centroid.0 - qc.0).powi(2) + (r.centroid.1 - qc.1).powi(2)).sqrt()).collect();
    let inputs = TowerInputs { graph: g, closure_fill: &fill, entity: &sg.entity };
    let qf = g.region(query)?.feature.clone();
    let maps = layer_maps(&inputs, query, &qf, Some(&dist), tower)?;
    let r = g.len();
    let mut layers = Vec::with_capacity(4 * r);
    for m in &maps {
        layers.extend_from_slice(m);
    }

    let (w, h) = (g.width() as f64, g.height() as f64);
    let mut features = Vec::with_capacity(r * FEATURE_DIM);
    for (i, reg) in g.regions().iter().enumerate() {
        features.extend_from_slice(&reg.feature);
        features.push((reg.centroid.0 - qc.0) / w);
        features.push((reg.centroid.1 - qc.1) / h);
        features.push(if i == query { 1.0 } else { 0.0 });
    }
    if features.len() != r * FEATURE_DIM {
        return Err(Error::shape(format!("{} region features, expected {}", features.len() / r, FEATURE_DIM)));
    }

    let mask = &scene.objects[qa.answer_object].visible_mask;
    let mut inside = vec![0usize; r];
    let mut outside = vec![0usize; r];
    for (i, &l) in g.labels().iter().enumerate() {
        if mask.data[i] {
            inside[l] += 1;
        } else {
            outside[l] += 1;
        }
    }
    let mut answer = Vec::new();
    for t in qa.answer.split_whitespace() {
        answer.push(
            answer_vocab.iter().position(|a| a == t).ok_or_else(|| Error::Data(format!("answer word {t:?} not in vocabulary")))?,
        );
    }
    answer.push(0);
    Ok(Sample {
        features: Tensor::new(vec![r, FEATURE_DIM], features)?,
        layers: Tensor::new(vec![4, r], layers)?,
        query,
        text: CausalText::encode(&qa.question, lexicon, vocab, true),
        answer,
        mask_inside: inside,
        mask_outside: outside,
    })
}

#[derive(Clone, Debug)]
pub struct DataItem {
    pub scene_seed: u64,
    pub family: Family,
    pub qa: QAPair,
    pub answer_region: usize,
    pub sample: Sample<f64>,
}

/// Scene, question and sample for one seed; checks the answer oracle.
pub fn make_item(
    seed: u64,
    family: Family,
    spec: &SceneSpec,
    cfg: &TrainConfig,
    lexicon: &TriggerLexicon,
    vocab: &Vocab,
    answer_vocab: &[String],
) -> Result<(SyntheticScene, SceneGraph, DataItem)> {
    let scene = generate_scene(seed, family, spec)?;
    scene.validate()?;
    let qa = generate_question(&scene, family, seed ^ 0x5eed)?;
    let oracle = oracle_answer(&scene, &qa)?;
    if oracle != qa.answer {
        return Err(Error::Data(format!("oracle answers {oracle:?} to {:?}, template gave {:?}", qa.question, qa.answer)));
    }
    let sg = segment_scene(&scene, &cfg.segmentation, &cfg.tower)?;
    let sample = build_sample(&scene, &sg, &qa, &cfg.tower, lexicon, vocab, answer_vocab)?;
    let answer_region = sg.object_regions[qa.answer_object];
    Ok((scene, sg, DataItem { scene_seed: seed, family, qa, answer_region, sample }))
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub items: Vec<DataItem>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Builds `n` items round-robin over the configured families. Work is
    /// split across threads and merged in index order.
    pub fn generate(cfg: &TrainConfig, split: Split, n: usize) -> Result<Self> {
        let lexicon = TriggerLexicon::default();
        let vocab = text_vocabulary();
        let answers = answer_vocabulary();
        let threads = cfg.worker_threads().clamp(1, n.max(1));
        let chunk = n.div_ceil(threads);
        let results: Vec<Result<Vec<DataItem>>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let (lexicon, vocab, answers) = (&lexicon, &vocab, &answers);
                    s.spawn(move || {
                        (t * chunk..((t + 1) * chunk).min(n))
                            .map(|i| {
                                let family = cfg.families[i % cfg.families.len()];
                                let seed = scene_seed(cfg.seed, split, i);
                                make_item(seed, family, &cfg.scene, cfg, lexicon, vocab, answers).map(|r| r.2)
                            })
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        let mut items = Vec::with_capacity(n);
        for r in results {
            items.extend(r?);
        }
        Ok(Self { items })
    }

    pub fn families(&self) -> Vec<Family> {
        let mut f: Vec<Family> = self.items.iter().map(|i| i.family).collect();
        f.sort();
        f.dedup();
        f
    }
}
