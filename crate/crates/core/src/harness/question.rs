//! Question templates and the answer oracle.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::scene::{compute_relations, Color, Family, Relation, Shape, SyntheticScene};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub question: String,
    pub answer: String,
    pub family: Family,
    /// Template id plus the relation it was instantiated from.
    pub provenance: String,
    /// Object the question mentions.
    pub query: usize,
    /// Object the answer names (the query itself for `locate`).
    pub answer_object: usize,
}

/// Template ids with their question pattern; `{}` is an object description.
pub const TEMPLATES: [(&str, &str); 9] = [
    ("locate", "where is the {}?"),
    ("left_of", "what is left of the {}?"),
    ("right_of", "what is right of the {}?"),
    ("above", "what is above the {}?"),
    ("below", "what is below the {}?"),
    ("inside", "what is inside the {}?"),
    ("behind", "what is behind the {}?"),
    ("path", "where does the path from the {} lead?"),
    ("why_hidden", "why is the {} partly hidden?"),
];

fn template(id: &str) -> &'static str {
    TEMPLATES.iter().find(|t| t.0 == id).map(|t| t.1).expect("known template")
}

pub fn fill(id: &str, description: &str) -> String {
    template(id).replace("{}", description)
}

/// Answer words: end token, colors, shapes, vertical and horizontal thirds.
pub fn answer_vocabulary() -> Vec<String> {
    let mut v = vec![crate::model::END_TOKEN.to_string()];
    v.extend(Color::ALL.iter().map(|c| c.name().to_string()));
    v.extend(Shape::ALL.iter().map(|s| s.name().to_string()));
    v.extend(["top", "middle", "bottom", "left", "center", "right"].map(String::from));
    v
}

/// Every word that can appear in a question.
pub fn question_words() -> Vec<String> {
    let mut words: Vec<String> = Vec::new();
    let mut push = |w: &str| {
        if !words.iter().any(|x| x == w) {
            words.push(w.to_string());
        }
    };
    for (_, t) in TEMPLATES {
        for w in t.replace("{}", " ").replace('?', " ").split_whitespace() {
            push(w);
        }
    }
    for c in Color::ALL {
        push(c.name());
    }
    for s in Shape::ALL {
        push(s.name());
    }
    push("?");
    words
}

fn third(v: f64, extent: f64, names: [&'static str; 3]) -> &'static str {
    names[((3.0 * v / extent).floor() as usize).min(2)]
}

/// `"<vertical> <horizontal>"` third of the object's full-mask centroid.
pub fn location_of(scene: &SyntheticScene, object: usize) -> String {
    let px = scene.objects[object].full_mask.pixels();
    let n = px.len().max(1) as f64;
    let cx = px.iter().map(|p| p.0 as f64 + 0.5).sum::<f64>() / n;
    let cy = px.iter().map(|p| p.1 as f64 + 0.5).sum::<f64>() / n;
    format!(
        "{} {}",
        third(cy, scene.height() as f64, ["top", "middle", "bottom"]),
        third(cx, scene.width() as f64, ["left", "center", "right"])
    )
}

/// `(template, query, answer)` candidates whose answer is unique.
fn candidates(scene: &SyntheticScene, relations: &[Relation], family: Family) -> Vec<(&'static str, usize, usize)> {
    let n = scene.objects.len();
    // objects x with rel(x, q) for the given query q
    let unique = |pick: &dyn Fn(&Relation) -> Option<(usize, usize)>, id: &'static str| {
        let mut out = Vec::new();
        for q in 0..n {
            let hits: Vec<usize> = relations.iter().filter_map(pick).filter(|&(_, b)| b == q).map(|(a, _)| a).collect();
            if hits.len() == 1 {
                out.push((id, q, hits[0]));
            }
        }
        out
    };
    match family {
        Family::Locate => (0..n).map(|q| ("locate", q, q)).collect(),
        Family::Relation => {
            let mut out = unique(&|r| if let Relation::LeftOf(a, b) = *r { Some((a, b)) } else { None }, "left_of");
            out.extend(unique(&|r| if let Relation::RightOf(a, b) = *r { Some((a, b)) } else { None }, "right_of"));
            out.extend(unique(&|r| if let Relation::Above(a, b) = *r { Some((a, b)) } else { None }, "above"));
            out.extend(unique(&|r| if let Relation::Below(a, b) = *r { Some((a, b)) } else { None }, "below"));
            out
        }
        Family::Containment => unique(&|r| if let Relation::Inside(a, b) = *r { Some((a, b)) } else { None }, "inside"),
        // "what is behind B": the object B occludes
        Family::Occlusion => unique(&|r| if let Relation::Occludes(a, b) = *r { Some((b, a)) } else { None }, "behind"),
        Family::Path => {
            let mut out = unique(&|r| if let Relation::AlongPath(a, b) = *r { Some((b, a)) } else { None }, "path");
            out.extend(unique(&|r| if let Relation::AlongPath(a, b) = *r { Some((a, b)) } else { None }, "path"));
            out
        }
        Family::CausalWhy => unique(&|r| if let Relation::Occludes(a, b) = *r { Some((a, b)) } else { None }, "why_hidden"),
    }
}

/// Whether `family` has a question with a unique answer in this scene.
pub(crate) fn has_question(scene: &SyntheticScene, family: Family) -> bool {
    !candidates(scene, &scene.relations, family).is_empty()
}

fn answer_text(scene: &SyntheticScene, family: Family, query: usize, answer: usize) -> String {
    match family {
        Family::Locate => location_of(scene, query),
        _ => scene.objects[answer].describe(),
    }
}

pub fn generate_question(scene: &SyntheticScene, family: Family, seed: u64) -> Result<QAPair> {
    let cands = candidates(scene, &scene.relations, family);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let &(id, q, a) = cands
        .choose(&mut rng)
        .ok_or_else(|| Error::not_found(format!("scene has no {family} relation with a unique answer")))?;
    Ok(QAPair {
        question: fill(id, &scene.objects[q].describe()),
        answer: answer_text(scene, family, q, a),
        family,
        provenance: format!("{id}:{q}->{a}"),
        query: q,
        answer_object: a,
    })
}

/// Re-derives the answer of `qa` from relations recomputed on the masks.
pub fn oracle_answer(scene: &SyntheticScene, qa: &QAPair) -> Result<String> {
    let relations = compute_relations(scene);
    let (id, desc) = TEMPLATES
        .iter()
        .find_map(|(id, t)| {
            let (pre, post) = t.split_once("{}")?;
            let mid = qa.question.strip_prefix(pre)?.strip_suffix(post)?;
            Some((*id, mid))
        })
        .ok_or_else(|| Error::Data(format!("question {:?} matches no template", qa.question)))?;
    let q = scene.find(desc).ok_or_else(|| Error::Data(format!("no object {desc:?} in the scene")))?;
    let hit = candidates(scene, &relations, qa.family).into_iter().find(|&(t, cq, _)| t == id && cq == q);
    let (_, _, a) = hit.ok_or_else(|| Error::Data(format!("question {:?} has no unique answer", qa.question)))?;
    Ok(answer_text(scene, qa.family, q, a))
}

/// Cause-effect sentence for a flagged region, filled from a template.
pub fn explain_hidden(effect: &str, cause: &str) -> String {
    format!("the {effect} is partly hidden because the {cause} is in front of it")
}
