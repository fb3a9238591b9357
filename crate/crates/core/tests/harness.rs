use std::sync::OnceLock;

use gestalt_core::error::Error;
use gestalt_core::harness::*;
use gestalt_core::model::{intervene, InterventionSpec, LossWeights, Model, Variant};
use gestalt_core::numeric::Tape;
use gestalt_core::text::{detect_triggers, tokenize, TriggerLexicon};

fn small_cfg(families: &[Family], train: usize, eval: usize, epochs: usize) -> TrainConfig {
    TrainConfig {
        families: families.to_vec(),
        train_scenes: train,
        eval_scenes: eval,
        epochs,
        ..TrainConfig::default()
    }
}

/// One containment model shared by the tests that need a trained network.
fn trained() -> &'static (TrainConfig, TrainOutcome, Dataset) {
    static CELL: OnceLock<(TrainConfig, TrainOutcome, Dataset)> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = small_cfg(&[Family::Containment], 300, 100, 12);
        let train = Dataset::generate(&cfg, Split::Train, cfg.train_scenes).unwrap();
        let eval = Dataset::generate(&cfg, Split::Eval, cfg.eval_scenes).unwrap();
        let out = train_on(&cfg, &train, &eval, None).unwrap();
        (cfg, out, eval)
    })
}

// ---------- independent answer oracle, straight from the pixels ----------

fn pixel_box(o: &SceneObject) -> (usize, usize, usize, usize) {
    let px = o.full_mask.pixels();
    let xs = px.iter().map(|p| p.0);
    let ys = px.iter().map(|p| p.1);
    (xs.clone().min().unwrap(), ys.clone().min().unwrap(), xs.max().unwrap(), ys.max().unwrap())
}

fn overlaps(a: &SceneObject, b: &SceneObject) -> bool {
    a.full_mask.pixels().iter().any(|&(x, y)| b.full_mask.get(x, y))
}

/// `a` lies strictly inside the box of `b` and is drawn after it.
fn inside(s: &SyntheticScene, a: usize, b: usize) -> bool {
    let (pa, pb) = (pixel_box(&s.objects[a]), pixel_box(&s.objects[b]));
    a > b && pa.0 > pb.0 && pa.1 > pb.1 && pa.2 < pb.2 && pa.3 < pb.3
}

fn holds(s: &SyntheticScene, rel: &str, a: usize, b: usize) -> bool {
    if a == b {
        return false;
    }
    let (pa, pb) = (pixel_box(&s.objects[a]), pixel_box(&s.objects[b]));
    match rel {
        "left" => pa.2 < pb.0,
        "right" => pa.0 > pb.2,
        "above" => pa.3 < pb.1,
        "below" => pa.1 > pb.3,
        "inside" => inside(s, a, b),
        // a is hidden behind b
        "behind" => b > a && overlaps(&s.objects[a], &s.objects[b]) && !inside(s, b, a),
        // a hides part of b
        "hides" => a > b && overlaps(&s.objects[a], &s.objects[b]) && !inside(s, a, b),
        _ => unreachable!(),
    }
}

fn path_partner(s: &SyntheticScene, q: usize) -> Option<usize> {
    let path = s.path.as_ref()?;
    let at = |p: (f64, f64)| s.objects.iter().position(|o| o.full_mask.get(p.0 as usize, p.1 as usize));
    match (at(path[0]), at(*path.last().unwrap())) {
        (Some(a), Some(b)) if a == q && b != q => Some(b),
        (Some(a), Some(b)) if b == q && a != q => Some(a),
        _ => None,
    }
}

fn thirds(s: &SyntheticScene, q: usize) -> String {
    let px = s.objects[q].full_mask.pixels();
    let n = px.len() as f64;
    let cx = px.iter().map(|p| p.0 as f64 + 0.5).sum::<f64>() / n;
    let cy = px.iter().map(|p| p.1 as f64 + 0.5).sum::<f64>() / n;
    let v = ["top", "middle", "bottom"][((3.0 * cy / s.height() as f64) as usize).min(2)];
    let h = ["left", "center", "right"][((3.0 * cx / s.width() as f64) as usize).min(2)];
    format!("{v} {h}")
}

fn test_oracle(s: &SyntheticScene, question: &str) -> Option<String> {
    let patterns = [
        ("where is the ", "?", "locate"),
        ("what is left of the ", "?", "left"),
        ("what is right of the ", "?", "right"),
        ("what is above the ", "?", "above"),
        ("what is below the ", "?", "below"),
        ("what is inside the ", "?", "inside"),
        ("what is behind the ", "?", "behind"),
        ("where does the path from the ", " lead?", "path"),
        ("why is the ", " partly hidden?", "hidden_by"),
    ];
    let (desc, kind) =
        patterns.iter().find_map(|(pre, post, k)| Some((question.strip_prefix(pre)?.strip_suffix(post)?, *k)))?;
    let q = s.objects.iter().position(|o| format!("{} {}", o.color.name(), o.shape.name()) == desc)?;
    let unique = |hits: Vec<usize>| if hits.len() == 1 { Some(hits[0]) } else { None };
    let n = s.objects.len();
    let a = match kind {
        "locate" => return Some(thirds(s, q)),
        "path" => path_partner(s, q)?,
        "hidden_by" => unique((0..n).filter(|&a| holds(s, "hides", a, q)).collect())?,
        rel => unique((0..n).filter(|&a| holds(s, rel, a, q)).collect())?,
    };
    Some(format!("{} {}", s.objects[a].color.name(), s.objects[a].shape.name()))
}

// ---------- scenes and questions ----------

#[test]
fn scenes_are_deterministic_per_seed() {
    let spec = SceneSpec::default();
    for f in Family::ALL {
        let a = generate_scene(7, f, &spec).unwrap();
        let b = generate_scene(7, f, &spec).unwrap();
        assert_eq!(a, b);
    }
    let cfg = small_cfg(&Family::ALL, 24, 12, 1);
    let (d1, d2) = (Dataset::generate(&cfg, Split::Train, 24).unwrap(), Dataset::generate(&cfg, Split::Train, 24).unwrap());
    for (x, y) in d1.items.iter().zip(&d2.items) {
        assert_eq!((x.scene_seed, &x.qa), (y.scene_seed, &y.qa));
        assert_eq!(x.sample.features, y.sample.features);
        assert_eq!(x.sample.layers, y.sample.layers);
    }
}

#[test]
fn splits_use_disjoint_scene_seeds() {
    let train: Vec<u64> = (0..1000).map(|i| scene_seed(3, Split::Train, i)).collect();
    assert!((0..1000).all(|i| !train.contains(&scene_seed(3, Split::Eval, i))));
}

#[test]
fn containment_inner_object_sits_inside_the_outer_box() {
    let spec = SceneSpec::default();
    for seed in 0..20 {
        let s = generate_scene(seed, Family::Containment, &spec).unwrap();
        let (a, b) = s
            .relations
            .iter()
            .find_map(|r| if let Relation::Inside(a, b) = *r { Some((a, b)) } else { None })
            .expect("containment scene has an inside relation");
        let (x0, y0, x1, y1) = pixel_box(&s.objects[b]);
        for (x, y) in s.objects[a].full_mask.pixels() {
            assert!(x > x0 && x < x1 && y > y0 && y < y1, "seed {seed}: pixel ({x},{y}) escapes");
        }
    }
}

#[test]
fn requested_occlusion_fraction_is_met() {
    let spec = SceneSpec { occlusion_fraction: Some(0.3), ..SceneSpec::default() };
    for seed in 0..20 {
        let s = generate_scene(seed, Family::Occlusion, &spec).unwrap();
        let best = s
            .objects
            .iter()
            .map(|o| 1.0 - o.visible_mask.pixels().len() as f64 / o.full_mask.pixels().len() as f64)
            .fold(f64::INFINITY, |m, h| if (h - 0.3).abs() < (m - 0.3f64).abs() { h } else { m });
        assert!((best - 0.3).abs() <= 0.02, "seed {seed}: hidden fraction {best}");
    }
}

#[test]
fn impossible_containment_fails_after_retries() {
    let spec = SceneSpec { inner_size: Some(12.0), outer_size: Some(8.0), max_retries: 5, ..SceneSpec::default() };
    assert!(matches!(generate_scene(1, Family::Containment, &spec), Err(Error::GenerationFailure { attempts: 5, .. })));
    let tiny = SceneSpec { width: 16, ..SceneSpec::default() };
    assert!(matches!(generate_scene(1, Family::Locate, &tiny), Err(Error::Config(_))));
}

#[test]
fn every_answer_matches_an_independent_oracle() {
    let cfg = small_cfg(&Family::ALL, 240, 1, 1);
    let lex = TriggerLexicon::default();
    let (vocab, answers) = (text_vocabulary(), answer_vocabulary());
    for i in 0..240 {
        let family = Family::ALL[i % 6];
        let seed = scene_seed(11, Split::Train, i);
        let (scene, _, item) = make_item(seed, family, &cfg.scene, &cfg, &lex, &vocab, &answers).unwrap();
        assert_eq!(test_oracle(&scene, &item.qa.question).as_deref(), Some(item.qa.answer.as_str()), "{:?}", item.qa);
        assert_eq!(oracle_answer(&scene, &item.qa).unwrap(), item.qa.answer);
    }
}

fn two_objects() -> SyntheticScene {
    let p = |shape, color, x| Placement { shape, color, center: (x, 32.0), size: 6.0 };
    SyntheticScene::build(64, 64, &[p(Shape::Square, Color::Red, 14.0), p(Shape::Circle, Color::Blue, 46.0)], None).unwrap()
}

fn question_about(scene: &SyntheticScene, family: Family, question: &str) -> QAPair {
    (0..64)
        .map(|s| generate_question(scene, family, s).unwrap())
        .find(|qa| qa.question == question)
        .unwrap_or_else(|| panic!("no seed produced {question:?}"))
}

#[test]
fn left_of_question_names_the_left_object() {
    let s = two_objects();
    let qa = question_about(&s, Family::Relation, "what is left of the blue circle?");
    assert_eq!(qa.answer, "red square");
    assert_eq!(test_oracle(&s, &qa.question).unwrap(), "red square");
}

#[test]
fn mirroring_swaps_left_and_right() {
    let spec = SceneSpec::default();
    for seed in 0..15 {
        let s = generate_scene(seed, Family::Relation, &spec).unwrap();
        let m = s.mirrored().unwrap();
        for r in &s.relations {
            match *r {
                Relation::LeftOf(a, b) => assert!(m.relations.contains(&Relation::RightOf(a, b))),
                Relation::RightOf(a, b) => assert!(m.relations.contains(&Relation::LeftOf(a, b))),
                _ => {}
            }
        }
    }
    let m = two_objects().mirrored().unwrap();
    assert_eq!(question_about(&m, Family::Relation, "what is right of the blue circle?").answer, "red square");
}

#[test]
fn causal_why_questions_carry_a_trigger() {
    let lex = TriggerLexicon::default();
    for seed in 0..20 {
        let s = generate_scene(seed, Family::CausalWhy, &SceneSpec::default()).unwrap();
        let qa = generate_question(&s, Family::CausalWhy, seed).unwrap();
        let c = detect_triggers(&tokenize(&qa.question, &lex), &lex);
        assert!(c.iter().any(|&t| t == 1), "{:?}", qa.question);
    }
}

#[test]
fn missing_family_is_not_found() {
    let s = two_objects();
    assert!(matches!(generate_question(&s, Family::Containment, 0), Err(Error::NotFound(_))));
    assert!(matches!(generate_question(&s, Family::Path, 0), Err(Error::NotFound(_))));
}

// ---------- training ----------

#[test]
fn training_reduces_loss() {
    let cfg = small_cfg(&Family::ALL, 500, 30, 5);
    let out = train(&cfg, None).unwrap();
    let (first, last) = (&out.metrics[0], out.metrics.last().unwrap());
    assert_eq!(out.metrics.len(), 6);
    assert!(last.loss < first.loss, "{} -> {}", first.loss, last.loss);
}

#[test]
fn switched_off_terms_are_absent() {
    let cfg = TrainConfig { lambda_closure: 0.0, ..small_cfg(&[Family::Containment], 8, 4, 1) };
    let out = train(&cfg, None).unwrap();
    assert!(out.metrics.iter().all(|m| m.closure.is_none() && m.causal.is_some()));
    let csv = metrics_csv(&out.metrics).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert_eq!(row.split(',').nth(3), Some(""));
}

#[test]
fn total_loss_is_the_weighted_sum() {
    let cfg = small_cfg(&[Family::CausalWhy, Family::Containment], 6, 1, 1);
    let data = Dataset::generate(&cfg, Split::Train, 6).unwrap();
    let m = Model::<f64>::new(cfg.model.clone(), text_vocabulary(), answer_vocabulary(), FEATURE_DIM, 0).unwrap();
    let w = LossWeights { closure: 0.3, causal: 0.7 };
    for it in &data.items {
        let mut tape = Tape::new();
        let b = m.params.bind(&mut tape);
        let (_, p) = m.loss(&mut tape, &b, &it.sample, w, None, None).unwrap();
        assert!((p.total - (p.task + 0.3 * p.closure + 0.7 * p.causal)).abs() < 1e-9);
    }
    let out = train(&cfg, None).unwrap();
    for r in &out.metrics {
        let total = r.task + cfg.lambda_closure * r.closure.unwrap() + cfg.lambda_causal * r.causal.unwrap();
        assert!((r.loss - total).abs() < 1e-9);
    }
}

#[test]
fn bad_config_is_a_config_error() {
    let cfg = TrainConfig { batch_size: 0, ..TrainConfig::default() };
    assert!(matches!(train(&cfg, None), Err(Error::Config(_))));
    assert!(matches!(TrainConfig::from_toml("epochs = -1"), Err(Error::Config(_))));
    assert!(matches!(TrainConfig::from_toml("no_such_field = 1"), Err(Error::Config(_))));
    let round = TrainConfig::from_toml(&TrainConfig::default().to_toml().unwrap()).unwrap();
    assert_eq!(round, TrainConfig::default());
}

// ---------- evaluation ----------

struct OracleStub;

impl Answerer for OracleStub {
    fn answer(&self, item: &DataItem) -> gestalt_core::error::Result<String> {
        Ok(item.qa.answer.clone())
    }
}

struct ConstantStub(&'static str);

impl Answerer for ConstantStub {
    fn answer(&self, _: &DataItem) -> gestalt_core::error::Result<String> {
        Ok(self.0.to_string())
    }
}

fn majority(data: &Dataset) -> (String, f64) {
    let mut counts = std::collections::BTreeMap::new();
    for it in &data.items {
        *counts.entry(it.qa.answer.clone()).or_insert(0usize) += 1;
    }
    let (a, c) = counts.into_iter().max_by_key(|x| x.1).unwrap();
    (a, c as f64 / data.len() as f64)
}

#[test]
fn stub_answerers_score_as_expected() {
    let cfg = small_cfg(&Family::ALL, 1, 60, 1);
    let data = Dataset::generate(&cfg, Split::Eval, 60).unwrap();
    let t = evaluate(&OracleStub, &data, 2).unwrap();
    assert!(t.rows.iter().all(|r| r.accuracy == 1.0));
    assert_eq!(t.rows.len(), 7);
    let freq = data.items.iter().filter(|i| i.qa.answer == "red square").count() as f64 / 60.0;
    assert!((evaluate(&ConstantStub("red square"), &data, 3).unwrap().overall() - freq).abs() < 1e-12);
    let csv = t.to_csv().unwrap();
    assert!(csv.starts_with("family,count,correct,accuracy\n") && csv.contains("overall,60,60,1.000000"));
}

#[test]
fn untrained_model_is_at_chance() {
    let cfg = small_cfg(&Family::ALL, 1, 120, 1);
    let data = Dataset::generate(&cfg, Split::Eval, 120).unwrap();
    let (_, best_constant) = majority(&data);
    for seed in 0..3 {
        let m = Model::<f64>::new(cfg.model.clone(), text_vocabulary(), answer_vocabulary(), FEATURE_DIM, seed).unwrap();
        let acc = evaluate(&m, &data, 2).unwrap().overall();
        // no better than the best constant guess, up to sampling noise
        let noise = 3.0 * (best_constant * (1.0 - best_constant) / 120.0).sqrt();
        assert!(acc <= best_constant + noise, "seed {seed}: {acc} vs {best_constant}");
    }
}

#[test]
fn trained_model_beats_the_majority_answer() {
    let (_, out, eval) = trained();
    let (_, freq) = majority(eval);
    assert!(out.eval.overall() >= freq, "{} < {freq}", out.eval.overall());
}

#[test]
fn deleting_the_answer_region_lowers_the_answer() {
    let (_, out, eval) = trained();
    let m = &out.model;
    let mut hits = 0;
    let mut checked = 0;
    for it in eval.items.iter().filter(|it| m.answer(it).unwrap() == it.qa.answer).take(10) {
        let r = intervene(m, &it.sample, InterventionSpec::DeleteRegion(it.answer_region)).unwrap();
        checked += 1;
        if r.deltas[0] < 0.0 && r.flagged[0] {
            hits += 1;
        }
        assert_eq!(r.region_deltas.iter().filter(|&&d| d != 0.0).count(), usize::from(r.total_abs_delta() > 0.0));
    }
    assert!(checked >= 5, "too few correct answers to test");
    assert!(hits * 10 >= checked * 8, "{hits} of {checked} flagged with a drop");
    let it = &eval.items[0];
    assert!(matches!(intervene(m, &it.sample, InterventionSpec::DeleteRegion(10_000)), Err(Error::NotFound(_))));
}

// ---------- checkpoints and ablations ----------

#[test]
fn checkpoint_evaluation_checks_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_cfg(&[Family::Locate], 8, 6, 1);
    let out = train(&cfg, Some(dir.path())).unwrap();
    for f in ["checkpoint.json", "metrics.csv", "eval.csv", "config.toml"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let path = dir.path().join("checkpoint.json");
    assert_eq!(evaluate_checkpoint(&path, &cfg).unwrap(), out.eval);
    let other = TrainConfig { model: gestalt_core::model::ModelConfig { sparsify_k: 3, ..cfg.model.clone() }, ..cfg.clone() };
    assert!(matches!(evaluate_checkpoint(&path, &other), Err(Error::Config(_))));
    assert!(matches!(evaluate_checkpoint(&dir.path().join("nope.json"), &cfg), Err(Error::NotFound(_))));
}

#[test]
fn ablation_tables_are_complete_and_self_delta_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_cfg(&[Family::Containment, Family::Path], 8, 6, 1);
    let variants = [Variant::GestaltTower, Variant::DotProductAttention];
    let res = run_ablation(&cfg, &variants, &[1, 2], Some(dir.path())).unwrap();
    assert_eq!(res.runs.len(), 4);
    for r in &res.runs {
        for f in ["containment", "path", "overall"] {
            assert!(r.table.get(f).is_some());
        }
    }
    let same = res.compare(Variant::GestaltTower, Variant::GestaltTower, &["containment", "path"]).unwrap();
    assert_eq!(same.deltas, vec![0.0, 0.0]);
    assert_eq!(same.p_value, 1.0);
    let from_disk = ablation_from_checkpoints(&cfg, dir.path(), &variants, &[1, 2]).unwrap();
    assert_eq!(from_disk, res);
    assert!(matches!(
        ablation_from_checkpoints(&cfg, dir.path(), &[Variant::NoClosure], &[1]),
        Err(Error::NotFound(_))
    ));
    let csv = res.deltas_csv(Variant::GestaltTower).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
}

#[test]
fn sign_test_matches_the_binomial_tail() {
    assert_eq!(sign_test_p(&[0.1; 5]), 1.0 / 32.0);
    assert_eq!(sign_test_p(&[0.1, 0.2, -0.1, 0.3, 0.0]), 5.0 / 16.0);
    assert_eq!(sign_test_p(&[]), 1.0);
}

#[test]
fn trained_model_answers_the_two_object_example() {
    let cfg = small_cfg(&[Family::Relation], 300, 20, 15);
    let out = train(&cfg, None).unwrap();
    let scene = two_objects();
    let qa = question_about(&scene, Family::Relation, "what is left of the blue circle?");
    let sg = segment_scene(&scene, &cfg.segmentation, &cfg.tower).unwrap();
    let lex = TriggerLexicon::default();
    let sample = build_sample(&scene, &sg, &qa, &cfg.tower, &lex, &text_vocabulary(), &answer_vocabulary()).unwrap();
    let ids = out.model.decode(&sample, &Default::default()).unwrap();
    assert_eq!(out.model.answer_text(&ids), "red square");
}
