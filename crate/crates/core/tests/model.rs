use gestalt_core::model::*;
use gestalt_core::numeric::{Adam, Tape, Tensor};
use gestalt_core::text::{mask_triggers_pretext, CausalText, TriggerLexicon, Vocab};
use gestalt_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const F: usize = 5;
const ANSWERS: [&str; 6] = ["<end>", "red", "blue", "square", "left", "top"];

fn small_config(variant: Variant) -> ModelConfig {
    ModelConfig {
        variant,
        text_dim: 6,
        joint_dim: 5,
        attention_dim: 3,
        decoder_width: 8,
        decoder_blocks: 3,
        sparsify_k: 3,
        sparsify_in_training: true,
        text_dropout: 0.0,
        ..ModelConfig::default()
    }
}

fn vocab() -> Vocab {
    Vocab::new("why is the red square hidden because of blue circle what color left".split(' '))
}

fn sample(seed: u64, regions: usize, vocab: &Vocab) -> Sample<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = Tensor::new(vec![regions, F], (0..regions * F).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let mut layers = Vec::new();
    for _ in 0..4 {
        let row: Vec<f64> = (0..regions).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = row.iter().sum();
        layers.extend(row.into_iter().map(|v| v / s));
    }
    let lex = TriggerLexicon::default();
    let text = CausalText::encode("why is the red square hidden?", &lex, vocab, true);
    let mask_inside: Vec<usize> = (0..regions).map(|_| rng.random_range(0..10)).collect();
    let mask_outside: Vec<usize> = (0..regions).map(|_| rng.random_range(0..10)).collect();
    Sample {
        features,
        layers: Tensor::new(vec![4, regions], layers).unwrap(),
        query: rng.random_range(0..regions),
        text,
        answer: vec![2, 3, 0],
        mask_inside,
        mask_outside,
    }
}

fn model(variant: Variant, seed: u64) -> Model<f64> {
    Model::new(small_config(variant), vocab(), ANSWERS.iter().map(|s| s.to_string()).collect(), F, seed).unwrap()
}

fn total_loss(m: &Model<f64>, s: &Sample<f64>, pre: &(CausalText, Vec<gestalt_core::text::MaskedLabel>)) -> (f64, Vec<Tensor<f64>>) {
    let mut tape = Tape::new();
    let b = m.params.bind(&mut tape);
    let w = LossWeights { closure: 0.7, causal: 0.3 };
    let (l, parts) = m.loss(&mut tape, &b, s, w, None, Some((&pre.0, &pre.1))).unwrap();
    let g = tape.backward(l).unwrap();
    (parts.total, m.params.collect_grads(&b, &g))
}

/// Central differences on a few entries of every parameter tensor.
#[test]
fn every_parameter_gradient_matches_finite_differences() {
    let v = vocab();
    for variant in Variant::ALL {
        let m = model(variant, 11);
        let s = sample(3, 6, &v);
        let pre = mask_triggers_pretext(&s.text, &v, 1.0, 0).unwrap();
        assert!(!pre.1.is_empty());
        let (_, grads) = total_loss(&m, &s, &pre);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut touched = 0;
        for id in 0..m.params.len() {
            let n = m.params.get(id).numel();
            for _ in 0..3.min(n) {
                let i = rng.random_range(0..n);
                let eps = 1e-6;
                let mut plus = m.clone();
                plus.params.get_mut(id).data_mut()[i] += eps;
                let mut minus = m.clone();
                minus.params.get_mut(id).data_mut()[i] -= eps;
                let fd = (total_loss(&plus, &s, &pre).0 - total_loss(&minus, &s, &pre).0) / (2.0 * eps);
                let ad = grads[id].data()[i];
                assert!(
                    (ad - fd).abs() <= 1e-5 * fd.abs().max(1.0),
                    "{variant} {} [{i}]: ad {ad} fd {fd}",
                    m.params.name(id)
                );
                if ad != 0.0 {
                    touched += 1;
                }
            }
        }
        assert!(touched > m.params.len(), "{variant}: too few nonzero gradients");
    }
}

#[test]
fn null_intervention_changes_nothing() {
    let v = vocab();
    let m = model(Variant::GestaltTower, 2);
    let s = sample(4, 7, &v);
    let r = intervene(&m, &s, InterventionSpec::None).unwrap();
    assert!(r.deltas.iter().all(|&d| d == 0.0));
    assert!(!r.any_flagged());
    assert!(r.region_deltas.iter().all(|&d| d == 0.0));
    assert!(r.layer_deltas.iter().all(|&d| d == 0.0));
    assert_eq!(r.baseline_answer, r.intervened_answer);
    assert_eq!(r.tokens.last().map(String::as_str), Some(END_TOKEN));
}

#[test]
fn deleted_region_no_longer_matters() {
    let v = vocab();
    let m = model(Variant::GestaltTower, 5);
    let s = sample(6, 6, &v);
    let target = (s.query + 1) % 6;
    let opts = ForwardOpts { edit: Edit { deleted_region: Some(target) }, ..Default::default() };
    let mut changed = s.clone();
    for j in 0..F {
        changed.features.data_mut()[target * F + j] = 9.0;
    }
    let tokens = [1, 2, 0];
    let (a, sa) = m.token_probs(&s, &tokens, &opts).unwrap();
    let (b, _) = m.token_probs(&changed, &tokens, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(sa.causal_weights[target], 0.0);
    assert_eq!(sa.prior[target], 0.0);
    assert!((sa.prior.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let report = intervene(&m, &s, InterventionSpec::DeleteRegion(target)).unwrap();
    let total = report.total_abs_delta();
    assert_eq!(report.region_deltas[target], total);
    assert!(matches!(intervene(&m, &s, InterventionSpec::DeleteRegion(6)), Err(Error::NotFound(_))));
}

#[test]
fn masking_a_token_attributes_to_weight_shifts() {
    let v = vocab();
    let m = model(Variant::GestaltTower, 8);
    let s = sample(9, 6, &v);
    let trigger = s.text.c_mask.iter().position(|&c| c == 1).unwrap();
    let r = intervene(&m, &s, InterventionSpec::MaskTextToken(trigger)).unwrap();
    assert!(r.text_edit.as_deref().unwrap().contains("[MASK]"));
    let total: f64 = r.region_deltas.iter().sum();
    assert!((total - r.total_abs_delta()).abs() < 1e-9 || total == 0.0);
}

#[test]
fn sparsified_weights_keep_k_regions() {
    let v = vocab();
    for variant in Variant::ALL {
        let m = model(variant, 1);
        let s = sample(2, 8, &v);
        let (_, snap) = m.token_probs(&s, &[1, 0], &ForwardOpts::default()).unwrap();
        let nonzero = snap.causal_weights.iter().filter(|&&w| w > 0.0).count();
        assert!(nonzero <= 3, "{variant}: {nonzero}");
        assert!((snap.causal_weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn ablated_layers_get_zero_gate() {
    let v = vocab();
    let s = sample(2, 5, &v);
    for (variant, off) in [(Variant::NoClosure, 2), (Variant::NoContinuity, 3)] {
        let m = model(variant, 3);
        let mut tape = Tape::new();
        let b = m.params.bind(&mut tape);
        let enc = m.encode(&mut tape, &b, &s, &ForwardOpts::default()).unwrap();
        let gate = tape.value(enc.gate.unwrap()).data().to_vec();
        assert_eq!(gate[off], 0.0);
        assert!((gate.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let m = model(Variant::DotProductAttention, 3);
    let mut tape = Tape::new();
    let b = m.params.bind(&mut tape);
    assert!(m.encode(&mut tape, &b, &s, &ForwardOpts::default()).unwrap().gate.is_none());
}

#[test]
fn region_order_does_not_matter() {
    let v = vocab();
    let m = model(Variant::GestaltTower, 4);
    let s = sample(12, 5, &v);
    let perm = [3, 0, 4, 1, 2];
    let mut p = s.clone();
    for (new, &old) in perm.iter().enumerate() {
        for j in 0..F {
            p.features.data_mut()[new * F + j] = s.features.get2(old, j);
        }
        for l in 0..4 {
            p.layers.data_mut()[l * 5 + new] = s.layers.get2(l, old);
        }
        p.mask_inside[new] = s.mask_inside[old];
        p.mask_outside[new] = s.mask_outside[old];
    }
    p.query = perm.iter().position(|&o| o == s.query).unwrap();
    let tokens = [3, 1, 0];
    let (a, _) = m.token_probs(&s, &tokens, &ForwardOpts::default()).unwrap();
    let (b, _) = m.token_probs(&p, &tokens, &ForwardOpts::default()).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn pinned_gate_uses_causal_head_only() {
    let v = vocab();
    let mut c = small_config(Variant::GestaltTower);
    c.gate_override = Some(1.0);
    let m = Model::<f64>::new(c, v.clone(), ANSWERS.iter().map(|s| s.to_string()).collect(), F, 1).unwrap();
    let s = sample(1, 4, &v);
    let mut tape = Tape::new();
    let b = m.params.bind(&mut tape);
    let enc = m.encode(&mut tape, &b, &s, &ForwardOpts::default()).unwrap();
    let out = m.step(&mut tape, &b, enc.hidden, None).unwrap();
    for (a, b) in tape.value(out.mixed).data().iter().zip(tape.value(out.causal).data()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn strengthening_is_capped_and_needs_flags() {
    let v = vocab();
    let mut m = model(Variant::GestaltTower, 7);
    let s = sample(7, 6, &v);
    let mut r = intervene(&m, &s, InterventionSpec::DeleteRegion(0)).unwrap();
    r.flagged = vec![false; r.flagged.len()];
    assert_eq!(strengthen(&mut m, &r), 0);
    r.flagged[0] = true;
    r.unit_deltas = vec![(0..8).map(|i| i as f64).collect(); 2];
    for _ in 0..100 {
        strengthen(&mut m, &r);
    }
    for sc in &m.dependency_scales {
        for (i, &x) in sc.data().iter().enumerate() {
            if i > 3 {
                assert_eq!(x, m.config.strengthen_cap);
            } else {
                assert_eq!(x, 1.0);
            }
        }
    }
}

#[test]
fn checkpoint_round_trip() {
    let v = vocab();
    let m = model(Variant::NoClosure, 21);
    let s = sample(5, 6, &v);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_model(&m, &path).unwrap();
    let back: Model<f64> = load_model(&path).unwrap();
    assert_eq!(back.params.flatten(), m.params.flatten());
    let o = ForwardOpts::default();
    assert_eq!(back.token_probs(&s, &[1, 0], &o).unwrap(), m.token_probs(&s, &[1, 0], &o).unwrap());

    let mut ck = Checkpoint::from_model(&m).unwrap();
    ck.manifest.config.sparsify_k = 2;
    assert!(matches!(ck.into_model::<f64>(), Err(Error::Data(_))));

    let empty = Model::<f64>::empty(ModelConfig::default());
    assert!(matches!(save_model(&empty, &path), Err(Error::Uninitialized(_))));
    assert!(matches!(empty.decode(&s, &o), Err(Error::Uninitialized(_))));
}

#[test]
fn fitting_one_sample_reduces_loss() {
    let v = vocab();
    let mut m = model(Variant::GestaltTower, 13);
    let s = sample(13, 6, &v);
    let w = LossWeights::default();
    let loss = |m: &Model<f64>| {
        let mut tape = Tape::new();
        let b = m.params.bind(&mut tape);
        let (l, p) = m.loss(&mut tape, &b, &s, w, None, None).unwrap();
        let g = tape.backward(l).unwrap();
        (p.task, m.params.collect_grads(&b, &g))
    };
    let (start, _) = loss(&m);
    let mut opt = Adam::new(0.02, &m.params.shapes());
    for _ in 0..150 {
        let (_, g) = loss(&m);
        opt.step(&mut m.params.tensors_mut(), &g);
    }
    let (end, _) = loss(&m);
    assert!(end < 0.2 * start, "{start} -> {end}");
    assert_eq!(m.decode(&s, &ForwardOpts::default()).unwrap(), vec![2, 3]);
}

#[test]
fn bad_samples_are_rejected() {
    let v = vocab();
    let m = model(Variant::GestaltTower, 1);
    let mut s = sample(1, 4, &v);
    s.query = 4;
    assert!(m.decode(&s, &ForwardOpts::default()).is_err());
    let mut s = sample(1, 4, &v);
    s.features = Tensor::zeros(&[4, F + 1]);
    assert!(m.decode(&s, &ForwardOpts::default()).is_err());
    let mut c = small_config(Variant::GestaltTower);
    c.intervention_blocks = 1;
    assert!(matches!(Model::<f64>::new(c, v, vec!["<end>".into()], F, 0), Err(Error::Config(_))));
}
