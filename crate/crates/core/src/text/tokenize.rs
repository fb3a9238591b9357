use crate::text::lexicon::{is_special, Role, TriggerLexicon, SPECIAL_TAGS};

pub fn wrap_causal_intent(question: &str) -> String {
    format!("[CAUSE] {question} [EFFECT]")
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

/// Whitespace and punctuation splitting. Special tags and lexicon words
/// (even ones containing punctuation) are kept whole.
pub fn tokenize(text: &str, lexicon: &TriggerLexicon) -> Vec<String> {
    let mut protected: Vec<String> = SPECIAL_TAGS.iter().map(|s| s.to_string()).collect();
    protected.extend(lexicon.protected_words().filter(|w| w.chars().any(|c| !is_word_char(c))).map(String::from));
    protected.sort_by_key(|w| std::cmp::Reverse(w.len()));

    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let lower: Vec<char> = chunk.to_lowercase().chars().collect();
        let mut i = 0;
        'scan: while i < chars.len() {
            for p in &protected {
                let pc: Vec<char> = p.to_lowercase().chars().collect();
                let end = i + pc.len();
                if end <= chars.len()
                    && lower.len() == chars.len()
                    && lower[i..end] == pc[..]
                    && (end == chars.len() || !is_word_char(chars[end]) || !is_word_char(chars[end - 1]))
                {
                    out.push(chars[i..end].iter().collect());
                    i = end;
                    continue 'scan;
                }
            }
            if is_word_char(chars[i]) {
                let start = i;
                while i < chars.len() && is_word_char(chars[i]) {
                    i += 1;
                }
                out.push(chars[start..i].iter().collect());
            } else {
                out.push(chars[i].to_string());
                i += 1;
            }
        }
    }
    out
}

fn attaches_left(token: &str) -> bool {
    matches!(token, "," | "." | "?" | "!" | ";" | ":")
}

/// Inverse of [`tokenize`] up to whitespace normalization.
pub fn detokenize(tokens: &[String]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 && !attaches_left(t) {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

/// `c_mask`: 1 at lexicon trigger positions, 0 elsewhere.
pub fn detect_triggers(tokens: &[String], lexicon: &TriggerLexicon) -> Vec<u8> {
    tokens.iter().map(|t| u8::from(lexicon.is_trigger(t))).collect()
}

fn is_punct(token: &str) -> bool {
    !token.chars().any(is_word_char)
}

/// Role from the segment rule alone: tokens from the first trigger up to
/// the last one are cause side, tokens from the last trigger on are effect
/// side, everything before the first trigger is irrelevant.
pub fn segment_roles(tokens: &[String], lexicon: &TriggerLexicon) -> Vec<Role> {
    let mask = detect_triggers(tokens, lexicon);
    let total: usize = mask.iter().map(|&m| m as usize).sum();
    let mut seen = 0;
    tokens
        .iter()
        .zip(&mask)
        .map(|(t, &m)| {
            seen += m as usize;
            if is_special(t) || is_punct(t) || seen == 0 {
                Role::Irrelevant
            } else if seen == total {
                Role::Effect
            } else {
                Role::Cause
            }
        })
        .collect()
}

/// Dictionary roles (longest phrase first) over the segment-rule default.
/// Trigger tokens always keep their segment role.
pub fn assign_roles(tokens: &[String], lexicon: &TriggerLexicon) -> Vec<Role> {
    let mut roles = segment_roles(tokens, lexicon);
    let max_len = lexicon.max_phrase_len();
    let mut i = 0;
    while i < tokens.len() {
        let mut matched = 0;
        for len in (1..=max_len.min(tokens.len() - i)).rev() {
            let window = &tokens[i..i + len];
            if window.iter().any(|t| lexicon.is_trigger(t) || is_special(t)) {
                continue;
            }
            let words: Vec<&str> = window.iter().map(String::as_str).collect();
            if let Some(role) = lexicon.role_of(&words) {
                roles[i..i + len].fill(role);
                matched = len;
                break;
            }
        }
        i += matched.max(1);
    }
    roles
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s, &TriggerLexicon::default())
    }

    #[test]
    fn wraps_unconditionally() {
        assert_eq!(wrap_causal_intent("Why is the kettle steaming?"), "[CAUSE] Why is the kettle steaming? [EFFECT]");
        assert_eq!(wrap_causal_intent(""), "[CAUSE]  [EFFECT]");
    }

    #[test]
    fn splits_punctuation_and_keeps_tags() {
        assert_eq!(toks("Because A, so B"), vec!["Because", "A", ",", "so", "B"]);
        assert_eq!(toks("[CAUSE] Why? [EFFECT]"), vec!["[CAUSE]", "Why", "?", "[EFFECT]"]);
        assert_eq!(detokenize(&toks("Because A, so B")), "Because A, so B");
    }

    #[test]
    fn protected_words_with_punctuation_survive() {
        let mut lex = TriggerLexicon::default();
        lex.add_trigger("leads-to");
        assert_eq!(tokenize("heat leads-to steam.", &lex), vec!["heat", "leads-to", "steam", "."]);
    }

    #[test]
    fn trigger_mask_example() {
        let lex = TriggerLexicon::default();
        assert_eq!(detect_triggers(&toks("Because A, so B"), &lex), vec![1, 0, 0, 1, 0]);
        assert_eq!(detect_triggers(&toks("[CAUSE] red [EFFECT]"), &lex), vec![0, 0, 0]);
    }

    #[test]
    fn roles_from_segments_and_dictionary() {
        let lex = TriggerLexicon::default();
        use Role::*;
        assert_eq!(assign_roles(&toks("Because A, so B"), &lex), vec![Cause, Cause, Irrelevant, Effect, Effect]);
        let t = toks("the fire source is near so the water is boiling");
        let r = assign_roles(&t, &lex);
        assert_eq!(&r[1..3], &[Cause, Cause]);
        assert_eq!(r[t.len() - 1], Effect);
        assert!(assign_roles(&toks("a red square"), &lex).iter().all(|&r| r == Irrelevant));
    }
}
