mod common;

use gestalt_core::numeric::{grad_check, Tape, Tensor, Var};
use gestalt_core::text::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn constructed_corpus_matches_detector_and_tagger() {
    let lex = TriggerLexicon::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let s = common::causal_sentence(&mut rng);
        let tokens = tokenize(&s.text, &lex);
        assert_eq!(tokens, s.tokens, "{}", s.text);
        assert_eq!(detect_triggers(&tokens, &lex), s.c_mask, "{}", s.text);
        assert_eq!(assign_roles(&tokens, &lex), s.roles, "{}", s.text);
        assert_eq!(detokenize(&tokens), s.text);
    }
}

#[test]
fn trigger_rows_survive_dropout_bitwise() {
    let n = 6;
    let d = 5;
    let data: Vec<f64> = (0..n * d).map(|i| (i as f64 * 0.37).sin()).collect();
    let x = Tensor::new(vec![n, d], data).unwrap();
    let c_mask = [0, 1, 0, 0, 1, 0];
    for seed in 0..10_000 {
        let y = dropout_preserving_triggers(&x, &c_mask, 0.5, seed).unwrap();
        for r in [1, 4] {
            for (a, b) in y.row_slice(r).iter().zip(x.row_slice(r)) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

#[test]
fn dropout_preserves_mean_in_expectation() {
    let x = Tensor::full(&[1, 100_000], 1.0f64);
    let y = dropout_preserving_triggers(&x, &[0], 0.5, 42).unwrap();
    let mean = y.sum() / 100_000.0;
    assert!((mean - 1.0).abs() < 0.01, "{mean}");
}

#[test]
fn cls_loss_gradient() {
    let labels = [Role::Cause, Role::Irrelevant, Role::Effect];
    for seed in 0..10u64 {
        let data: Vec<f64> = (0..9).map(|i| ((i as u64 * 7 + seed * 13) as f64 * 0.61).sin()).collect();
        let point = Tensor::new(vec![3, 3], data.clone()).unwrap();
        let err = grad_check(
            |tape: &mut Tape<f64>, v: Var| Ok(causal_cls_loss_tape(tape, v, &labels)?.unwrap()),
            &point,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-4);
        let mut tape = Tape::new();
        let v = tape.var(point.clone());
        let l = causal_cls_loss_tape(&mut tape, v, &labels).unwrap().unwrap();
        assert!((tape.value(l).item().unwrap() - causal_cls_loss(&point, &labels).unwrap()).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tagging_is_idempotent(seed in 0u64..10_000) {
        let lex = TriggerLexicon::default();
        let s = common::causal_sentence(&mut ChaCha8Rng::seed_from_u64(seed));
        let once = tokenize(&s.text, &lex);
        let twice = tokenize(&detokenize(&once), &lex);
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(assign_roles(&once, &lex), assign_roles(&twice, &lex));
        // trigger positions always follow the segment rule
        let seg = segment_roles(&once, &lex);
        let roles = assign_roles(&once, &lex);
        for (i, &m) in detect_triggers(&once, &lex).iter().enumerate() {
            if m == 1 {
                prop_assert_eq!(roles[i], seg[i]);
            }
        }
    }

    #[test]
    fn pretext_is_deterministic(seed in 0u64..10_000, p in 0.0f64..=1.0) {
        let lex = TriggerLexicon::default();
        let vocab = Vocab::new(["because", "so", "the"]);
        let s = common::causal_sentence(&mut ChaCha8Rng::seed_from_u64(seed));
        let t = CausalText::encode(&s.text, &lex, &vocab, true);
        let a = mask_triggers_pretext(&t, &vocab, p, seed).unwrap();
        let b = mask_triggers_pretext(&t, &vocab, p, seed).unwrap();
        prop_assert_eq!(&a.0, &b.0);
        prop_assert_eq!(&a.1, &b.1);
        for l in &a.1 {
            prop_assert_eq!(t.c_mask[l.position], 1);
            prop_assert_eq!(a.0.tokens[l.position].as_str(), MASK_TAG);
        }
    }

    #[test]
    fn cls_loss_nonnegative(logits in prop::collection::vec(-5.0f64..5.0, 6), a in 0usize..3, b in 0usize..3) {
        let t = Tensor::new(vec![2, 3], logits).unwrap();
        let labels = [Role::from_code(a).unwrap(), Role::from_code(b).unwrap()];
        prop_assert!(causal_cls_loss(&t, &labels).unwrap() >= 0.0);
    }
}
