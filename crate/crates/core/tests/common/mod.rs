#![allow(dead_code)]

use gestalt_core::text::Role;
use rand::seq::IndexedRandom;
use rand::Rng;

const NEUTRAL: [&str; 12] = ["the", "red", "square", "kettle", "water", "is", "near", "blue", "circle", "on", "table", "it"];
const TRIGGERS: [&str; 8] = ["because", "Because", "so", "SO", "therefore", "since", "leads", "why"];
const DICT: [(&str, Role); 5] = [
    ("fire source", Role::Cause),
    ("heating", Role::Cause),
    ("boiling", Role::Effect),
    ("steam", Role::Effect),
    ("hidden", Role::Effect),
];

/// A sentence with the token, trigger and role sequences it was built from.
pub struct Sentence {
    pub text: String,
    pub tokens: Vec<String>,
    pub c_mask: Vec<u8>,
    pub roles: Vec<Role>,
}

fn push(s: &mut Sentence, word: &str, trigger: bool, role: Role) {
    for w in word.split_whitespace() {
        s.tokens.push(w.to_string());
        s.c_mask.push(u8::from(trigger));
        s.roles.push(role);
    }
}

fn content(s: &mut Sentence, rng: &mut impl Rng, n: usize, default: Role) {
    for _ in 0..n {
        if rng.random_bool(0.25) {
            let (w, r) = *DICT.choose(rng).unwrap();
            push(s, w, false, r);
        } else {
            push(s, NEUTRAL.choose(rng).unwrap(), false, default);
        }
    }
}

/// Builds a sentence from segments so the expected labels are known by
/// construction: words before the first trigger are irrelevant, segments
/// opened by a non-final trigger are cause side, the final one effect side,
/// dictionary phrases carry their own role and punctuation is irrelevant.
pub fn causal_sentence(rng: &mut impl Rng) -> Sentence {
    let mut s = Sentence { text: String::new(), tokens: Vec::new(), c_mask: Vec::new(), roles: Vec::new() };
    let wrap = rng.random_bool(0.5);
    if wrap {
        push(&mut s, "[CAUSE]", false, Role::Irrelevant);
    }
    let prefix = rng.random_range(0..3);
    content(&mut s, rng, prefix, Role::Irrelevant);
    let triggers = rng.random_range(0..4);
    for k in 1..=triggers {
        let side = if k == triggers { Role::Effect } else { Role::Cause };
        if k > 1 && rng.random_bool(0.5) {
            push(&mut s, ",", false, Role::Irrelevant);
        }
        push(&mut s, TRIGGERS.choose(rng).unwrap(), true, side);
        let n = rng.random_range(1..4);
        content(&mut s, rng, n, side);
    }
    if triggers == 0 && s.tokens.len() <= usize::from(wrap) {
        content(&mut s, rng, 2, Role::Irrelevant);
    }
    push(&mut s, if rng.random_bool(0.5) { "?" } else { "." }, false, Role::Irrelevant);
    if wrap {
        push(&mut s, "[EFFECT]", false, Role::Irrelevant);
    }
    let mut text = String::new();
    for (i, t) in s.tokens.iter().enumerate() {
        if i > 0 && !matches!(t.as_str(), "," | "?" | ".") {
            text.push(' ');
        }
        text.push_str(t);
    }
    s.text = text;
    s
}
