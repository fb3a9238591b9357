use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CAUSE_TAG: &str = "[CAUSE]";
pub const EFFECT_TAG: &str = "[EFFECT]";
pub const MASK_TAG: &str = "[MASK]";
pub const SPECIAL_TAGS: [&str; 3] = [CAUSE_TAG, EFFECT_TAG, MASK_TAG];

pub fn is_special(token: &str) -> bool {
    SPECIAL_TAGS.contains(&token)
}

/// Causal role of a token; the discriminant is the class label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Irrelevant = 0,
    Cause = 1,
    Effect = 2,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Irrelevant, Role::Cause, Role::Effect];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Result<Self> {
        Self::ALL.get(code).copied().ok_or_else(|| Error::invalid(format!("role code {code}")))
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Irrelevant => "irrelevant",
            Role::Cause => "cause",
            Role::Effect => "effect",
        })
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "irrelevant" | "none" => Ok(Role::Irrelevant),
            "cause" => Ok(Role::Cause),
            "effect" | "result" => Ok(Role::Effect),
            other => Err(Error::Config(format!("unknown role {other:?}"))),
        }
    }
}

/// Trigger words plus a phrase-to-role dictionary. Lookups ignore case.
#[derive(Clone, Debug, PartialEq)]
pub struct TriggerLexicon {
    triggers: BTreeSet<String>,
    role_dict: BTreeMap<Vec<String>, Role>,
}

impl Default for TriggerLexicon {
    fn default() -> Self {
        let triggers = ["because", "cause", "causes", "so", "therefore", "since", "leads", "why"];
        let roles = [
            ("fire source", Role::Cause),
            ("fire", Role::Cause),
            ("flame", Role::Cause),
            ("heating", Role::Cause),
            ("heat", Role::Cause),
            ("stove", Role::Cause),
            ("boiling", Role::Effect),
            ("boiled", Role::Effect),
            ("steam", Role::Effect),
            ("steaming", Role::Effect),
            ("evaporation", Role::Effect),
            ("hidden", Role::Effect),
            ("melting", Role::Effect),
        ];
        let mut lex = Self { triggers: BTreeSet::new(), role_dict: BTreeMap::new() };
        for t in triggers {
            lex.add_trigger(t);
        }
        for (p, r) in roles {
            lex.add_role(p, r);
        }
        lex
    }
}

impl TriggerLexicon {
    pub fn new(triggers: &[&str], roles: &[(&str, Role)]) -> Result<Self> {
        let mut lex = Self { triggers: BTreeSet::new(), role_dict: BTreeMap::new() };
        for t in triggers {
            lex.add_trigger(t);
        }
        for (p, r) in roles {
            lex.add_role(p, *r);
        }
        lex.check()?;
        Ok(lex)
    }

    /// One entry per line: `word` adds a trigger, `phrase<TAB>role` a
    /// dictionary entry. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Self { triggers: BTreeSet::new(), role_dict: BTreeMap::new() };
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            match line.split_once('\t') {
                Some((phrase, role)) => {
                    let role = role.parse().map_err(|_| Error::Config(format!("lexicon line {}: unknown role {role:?}", n + 1)))?;
                    lex.add_role(phrase, role);
                }
                None => lex.add_trigger(line.trim()),
            }
        }
        lex.check()?;
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<()> {
        if self.triggers.is_empty() {
            return Err(Error::Config("lexicon has no trigger words".into()));
        }
        Ok(())
    }

    pub fn add_trigger(&mut self, word: &str) {
        self.triggers.insert(word.trim().to_lowercase());
    }

    pub fn add_role(&mut self, phrase: &str, role: Role) {
        let words: Vec<String> = phrase.split_whitespace().map(str::to_lowercase).collect();
        if !words.is_empty() {
            self.role_dict.insert(words, role);
        }
    }

    pub fn is_trigger(&self, token: &str) -> bool {
        !is_special(token) && self.triggers.contains(&token.to_lowercase())
    }

    pub fn triggers(&self) -> impl Iterator<Item = &str> {
        self.triggers.iter().map(String::as_str)
    }

    pub fn role_of(&self, phrase: &[&str]) -> Option<Role> {
        let key: Vec<String> = phrase.iter().map(|w| w.to_lowercase()).collect();
        self.role_dict.get(&key).copied()
    }

    pub fn role_entries(&self) -> impl Iterator<Item = (String, Role)> + '_ {
        self.role_dict.iter().map(|(k, &r)| (k.join(" "), r))
    }

    /// Longest dictionary phrase, in words.
    pub fn max_phrase_len(&self) -> usize {
        self.role_dict.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// Words the tokenizer must keep whole.
    pub fn protected_words(&self) -> impl Iterator<Item = &str> {
        self.triggers.iter().map(String::as_str).chain(self.role_dict.keys().flatten().map(String::as_str))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lexicon_file() {
        let lex = TriggerLexicon::parse("# triggers\nBecause\nthus\n\nfire source\tcause\nwet\teffect\n").unwrap();
        assert!(lex.is_trigger("because") && lex.is_trigger("THUS"));
        assert_eq!(lex.role_of(&["Fire", "source"]), Some(Role::Cause));
        assert_eq!(lex.role_of(&["wet"]), Some(Role::Effect));
        assert!(TriggerLexicon::parse("x\tnonsense\n").is_err());
        assert!(TriggerLexicon::parse("only\tcause\n").is_err());
    }

    #[test]
    fn special_tags_are_not_triggers() {
        let mut lex = TriggerLexicon::default();
        lex.add_trigger("[cause]");
        assert!(!lex.is_trigger(CAUSE_TAG));
    }
}
