//! Synthetic scenes: flat-colored shapes on a black canvas, an optional gray
//! path, exact masks and ground-truth spatial relations.

use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gestalt::BinaryMap;
use crate::region::Image;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Square,
    Circle,
    Triangle,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Square, Shape::Circle, Shape::Triangle];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Square => "square",
            Shape::Circle => "circle",
            Shape::Triangle => "triangle",
        }
    }

    /// Whether the pixel center `(px, py)` lies in the shape of half-extent `s` at `c`.
    pub fn contains(self, c: (f64, f64), s: f64, px: f64, py: f64) -> bool {
        let (dx, dy) = (px - c.0, py - c.1);
        match self {
            Shape::Square => dx.abs() <= s && dy.abs() <= s,
            Shape::Circle => dx * dx + dy * dy <= s * s,
            // apex up, base at the bottom of the bounding box
            Shape::Triangle => dy.abs() <= s && dx.abs() <= (dy + s) / 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Red,
    Green,
    Blue,
    Yellow,
    Purple,
    Orange,
}

impl Color {
    pub const ALL: [Color; 6] = [Color::Red, Color::Green, Color::Blue, Color::Yellow, Color::Purple, Color::Orange];

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Yellow => "yellow",
            Color::Purple => "purple",
            Color::Orange => "orange",
        }
    }

    pub fn rgb(self) -> [f64; 3] {
        match self {
            Color::Red => [0.9, 0.1, 0.1],
            Color::Green => [0.1, 0.8, 0.2],
            Color::Blue => [0.15, 0.25, 0.95],
            Color::Yellow => [0.95, 0.9, 0.1],
            Color::Purple => [0.6, 0.2, 0.8],
            Color::Orange => [1.0, 0.55, 0.05],
        }
    }
}

pub const PATH_GRAY: f64 = 0.5;
const PATH_HALF_WIDTH: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SceneObject {
    pub shape: Shape,
    pub color: Color,
    pub center: (f64, f64),
    /// Half-extent of the bounding box.
    pub size: f64,
    pub full_mask: BinaryMap,
    pub visible_mask: BinaryMap,
}

/// Inclusive pixel bounding box `(x0, y0, x1, y1)`.
pub type BBox = (usize, usize, usize, usize);

impl SceneObject {
    pub fn describe(&self) -> String {
        format!("{} {}", self.color.name(), self.shape.name())
    }

    pub fn bbox(&self) -> Option<BBox> {
        mask_bbox(&self.full_mask)
    }
}

pub fn mask_bbox(m: &BinaryMap) -> Option<BBox> {
    let mut b: Option<BBox> = None;
    for (x, y) in m.pixels() {
        b = Some(match b {
            None => (x, y, x, y),
            Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        });
    }
    b
}

/// Ground-truth relation between object indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "objects", rename_all = "snake_case")]
pub enum Relation {
    LeftOf(usize, usize),
    RightOf(usize, usize),
    Above(usize, usize),
    Below(usize, usize),
    /// First object lies inside the second.
    Inside(usize, usize),
    /// First object is drawn over part of the second.
    Occludes(usize, usize),
    /// The path runs from the first object to the second.
    AlongPath(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Locate,
    Relation,
    Containment,
    Occlusion,
    Path,
    CausalWhy,
}

impl Family {
    pub const ALL: [Family; 6] =
        [Family::Locate, Family::Relation, Family::Containment, Family::Occlusion, Family::Path, Family::CausalWhy];

    pub fn name(self) -> &'static str {
        match self {
            Family::Locate => "locate",
            Family::Relation => "relation",
            Family::Containment => "containment",
            Family::Occlusion => "occlusion",
            Family::Path => "path",
            Family::CausalWhy => "causal_why",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| Error::Config(format!("unknown question family {s:?}")))
    }
}

/// What a generated scene must contain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// Total object count range, inclusive.
    pub min_objects: usize,
    pub max_objects: usize,
    /// Fraction of the target hidden by its occluder (occlusion and causal_why).
    pub occlusion_fraction: Option<f64>,
    /// Half-extents for containment scenes.
    pub inner_size: Option<f64>,
    pub outer_size: Option<f64>,
    pub max_retries: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            min_objects: 2,
            max_objects: 4,
            occlusion_fraction: None,
            inner_size: None,
            outer_size: None,
            max_retries: 50,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 32 || self.height < 32 {
            return Err(Error::Config("canvas must be at least 32x32".into()));
        }
        if self.min_objects == 0 || self.min_objects > self.max_objects || self.max_objects > 5 {
            return Err(Error::Config("object counts must satisfy 1 <= min <= max <= 5".into()));
        }
        if let Some(f) = self.occlusion_fraction {
            if !(f > 0.0 && f < 0.9) {
                return Err(Error::Config("occlusion_fraction must lie in (0, 0.9)".into()));
            }
        }
        if self.max_retries == 0 {
            return Err(Error::Config("max_retries must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub canvas: Image<f64>,
    /// In drawing order: later objects cover earlier ones.
    pub objects: Vec<SceneObject>,
    pub relations: Vec<Relation>,
    /// Waypoints of the path, first to last.
    pub path: Option<Vec<(f64, f64)>>,
    /// Visible path pixels.
    pub path_mask: BinaryMap,
}

/// Placement request used to build a scene.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Placement {
    pub shape: Shape,
    pub color: Color,
    pub center: (f64, f64),
    pub size: f64,
}

fn rasterize(w: usize, h: usize, p: &Placement) -> BinaryMap {
    let mut m = BinaryMap::new(w, h);
    let (cx, cy) = p.center;
    let x0 = (cx - p.size - 1.0).floor().max(0.0) as usize;
    let y0 = (cy - p.size - 1.0).floor().max(0.0) as usize;
    let x1 = ((cx + p.size + 1.0).ceil().max(0.0) as usize).min(w);
    let y1 = ((cy + p.size + 1.0).ceil().max(0.0) as usize).min(h);
    for y in y0..y1 {
        for x in x0..x1 {
            if p.shape.contains(p.center, p.size, x as f64 + 0.5, y as f64 + 0.5) {
                m.set(x, y, true);
            }
        }
    }
    m
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.0 + t * vx, a.1 + t * vy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

fn rasterize_path(w: usize, h: usize, path: &[(f64, f64)]) -> BinaryMap {
    let mut m = BinaryMap::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let p = (x as f64 + 0.5, y as f64 + 0.5);
            if path.windows(2).any(|s| segment_distance(p, s[0], s[1]) <= PATH_HALF_WIDTH) {
                m.set(x, y, true);
            }
        }
    }
    m
}

/// Arc-length position of pixel `p` projected onto the path.
pub fn path_position(path: &[(f64, f64)], p: (f64, f64)) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    let mut start = 0.0;
    for s in path.windows(2) {
        let (a, b) = (s[0], s[1]);
        let (vx, vy) = (b.0 - a.0, b.1 - a.1);
        let len = (vx * vx + vy * vy).sqrt();
        let t = if len == 0.0 { 0.0 } else { (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / (len * len)).clamp(0.0, 1.0) };
        let d = segment_distance(p, a, b);
        if d < best.0 {
            best = (d, start + t * len);
        }
        start += len;
    }
    best.1
}

impl SyntheticScene {
    /// Rasterizes `placements` in order over an optional path.
    pub fn build(width: usize, height: usize, placements: &[Placement], path: Option<Vec<(f64, f64)>>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("empty canvas"));
        }
        let full: Vec<BinaryMap> = placements.iter().map(|p| rasterize(width, height, p)).collect();
        let mut objects = Vec::with_capacity(placements.len());
        for (i, p) in placements.iter().enumerate() {
            let mut visible = full[i].clone();
            for later in &full[i + 1..] {
                for (v, &l) in visible.data.iter_mut().zip(&later.data) {
                    *v &= !l;
                }
            }
            objects.push(SceneObject {
                shape: p.shape,
                color: p.color,
                center: p.center,
                size: p.size,
                full_mask: full[i].clone(),
                visible_mask: visible,
            });
        }
        let mut path_mask = match &path {
            Some(pts) if pts.len() >= 2 => rasterize_path(width, height, pts),
            Some(_) => return Err(Error::invalid("a path needs at least two waypoints")),
            None => BinaryMap::new(width, height),
        };
        for f in &full {
            for (v, &l) in path_mask.data.iter_mut().zip(&f.data) {
                *v &= !l;
            }
        }
        let mut canvas = Image::filled(width, height, 3, 0.0)?;
        for (x, y) in path_mask.pixels() {
            canvas.set_pixel(x, y, &[PATH_GRAY; 3]);
        }
        for o in &objects {
            for (x, y) in o.visible_mask.pixels() {
                canvas.set_pixel(x, y, &o.color.rgb());
            }
        }
        let mut scene = Self { canvas, objects, relations: Vec::new(), path, path_mask };
        scene.relations = compute_relations(&scene);
        Ok(scene)
    }

    pub fn width(&self) -> usize {
        self.canvas.width()
    }

    pub fn height(&self) -> usize {
        self.canvas.height()
    }

    pub fn placements(&self) -> Vec<Placement> {
        self.objects.iter().map(|o| Placement { shape: o.shape, color: o.color, center: o.center, size: o.size }).collect()
    }

    /// Index of the object with this description.
    pub fn find(&self, description: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.describe() == description)
    }

    /// Horizontal mirror image, relations recomputed.
    pub fn mirrored(&self) -> Result<Self> {
        let w = self.width() as f64;
        let placements: Vec<Placement> = self
            .placements()
            .into_iter()
            .map(|p| Placement { center: (w - p.center.0, p.center.1), ..p })
            .collect();
        let path = self.path.as_ref().map(|pts| pts.iter().map(|&(x, y)| (w - x, y)).collect());
        Self::build(self.width(), self.height(), &placements, path)
    }

    /// Checks mask containment, bounds and the containment relation.
    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.width(), self.height());
        for (i, o) in self.objects.iter().enumerate() {
            if o.full_mask.width != w || o.full_mask.height != h || o.visible_mask.width != w || o.visible_mask.height != h {
                return Err(Error::Data(format!("object {i} masks do not match the canvas")));
            }
            if o.visible_mask.data.iter().zip(&o.full_mask.data).any(|(&v, &f)| v && !f) {
                return Err(Error::Data(format!("object {i} is visible outside its full mask")));
            }
        }
        for r in &self.relations {
            if let Relation::Inside(a, b) = *r {
                let (x0, y0, x1, y1) = self.objects[b].bbox().ok_or_else(|| Error::Data("empty container".into()))?;
                if self.objects[a].full_mask.pixels().iter().any(|&(x, y)| x <= x0 || x >= x1 || y <= y0 || y >= y1) {
                    return Err(Error::Data(format!("object {a} leaves the bounding box of {b}")));
                }
            }
        }
        Ok(())
    }
}

/// The geometry oracle: relations recomputed from masks and drawing order.
pub fn compute_relations(scene: &SyntheticScene) -> Vec<Relation> {
    let n = scene.objects.len();
    let boxes: Vec<Option<BBox>> = scene.objects.iter().map(|o| o.bbox()).collect();
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let (Some(ba), Some(bb)) = (boxes[a], boxes[b]) else { continue };
            if ba.2 < bb.0 {
                out.push(Relation::LeftOf(a, b));
            }
            if ba.0 > bb.2 {
                out.push(Relation::RightOf(a, b));
            }
            if ba.3 < bb.1 {
                out.push(Relation::Above(a, b));
            }
            if ba.1 > bb.3 {
                out.push(Relation::Below(a, b));
            }
            let inside = a > b && ba.0 > bb.0 && ba.1 > bb.1 && ba.2 < bb.2 && ba.3 < bb.3;
            if inside {
                out.push(Relation::Inside(a, b));
            }
            let overlap = scene.objects[a].full_mask.data.iter().zip(&scene.objects[b].full_mask.data).any(|(&x, &y)| x && y);
            // a is drawn over b unless it sits inside b
            if a > b && overlap && !inside {
                out.push(Relation::Occludes(a, b));
            }
        }
    }
    if let Some(path) = &scene.path {
        let end_object = |p: (f64, f64)| {
            let (x, y) = (p.0.floor() as usize, p.1.floor() as usize);
            scene
                .objects
                .iter()
                .position(|o| x < scene.width() && y < scene.height() && o.full_mask.get(x, y))
        };
        if let (Some(a), Some(b)) = (end_object(path[0]), end_object(path[path.len() - 1])) {
            if a != b {
                out.push(Relation::AlongPath(a, b));
            }
        }
    }
    out.sort();
    out
}

fn pick_descriptors(rng: &mut ChaCha8Rng, n: usize, shapes: &[Shape]) -> Vec<(Shape, Color)> {
    let mut all: Vec<(Shape, Color)> = Vec::new();
    for &s in shapes {
        for c in Color::ALL {
            all.push((s, c));
        }
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let &d = all.choose(rng).expect("non-empty");
        if !out.contains(&d) {
            out.push(d);
        }
    }
    out
}

fn box_of(center: (f64, f64), size: f64) -> (f64, f64, f64, f64) {
    (center.0 - size, center.1 - size, center.0 + size, center.1 + size)
}

fn boxes_clear(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64), margin: f64) -> bool {
    a.2 + margin < b.0 || b.2 + margin < a.0 || a.3 + margin < b.1 || b.3 + margin < a.1
}

struct Builder<'a> {
    spec: &'a SceneSpec,
    rng: ChaCha8Rng,
    placed: Vec<Placement>,
    /// Areas no free object may touch.
    blocked: Vec<(f64, f64, f64, f64)>,
    path: Option<Vec<(f64, f64)>>,
}

impl Builder<'_> {
    fn random_center(&mut self, size: f64) -> (f64, f64) {
        let (w, h) = (self.spec.width as f64, self.spec.height as f64);
        (self.rng.random_range(size + 1.0..w - size - 1.0), self.rng.random_range(size + 1.0..h - size - 1.0))
    }

    /// Places an object away from everything placed so far.
    fn place_free(&mut self, shape: Shape, color: Color, size: f64) -> Option<Placement> {
        for _ in 0..200 {
            let c = self.random_center(size);
            let b = box_of(c, size);
            if self.blocked.iter().all(|&o| boxes_clear(b, o, 2.0)) && self.path_clear(c, size) {
                let p = Placement { shape, color, center: c, size };
                self.placed.push(p);
                self.blocked.push(b);
                return Some(p);
            }
        }
        None
    }

    fn path_clear(&self, c: (f64, f64), size: f64) -> bool {
        match &self.path {
            None => true,
            Some(pts) => pts.windows(2).all(|s| segment_distance(c, s[0], s[1]) > size * std::f64::consts::SQRT_2 + 3.0),
        }
    }
}

/// Generates a scene for `family`, deterministic in `seed`.
pub fn generate_scene(seed: u64, family: Family, spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = String::new();
    for _ in 0..spec.max_retries {
        let attempt_seed = rng.random::<u64>();
        match try_scene(attempt_seed, family, spec) {
            Ok(scene) => return Ok(scene),
            Err(reason) => last = reason,
        }
    }
    Err(Error::GenerationFailure { attempts: spec.max_retries, reason: last })
}

fn min_objects_for(family: Family) -> usize {
    match family {
        Family::Locate => 1,
        _ => 2,
    }
}

fn try_scene(seed: u64, family: Family, spec: &SceneSpec) -> std::result::Result<SyntheticScene, String> {
    let rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder { spec, rng, placed: Vec::new(), blocked: Vec::new(), path: None };
    let lo = spec.min_objects.max(min_objects_for(family));
    let hi = spec.max_objects.max(lo);
    let n = b.rng.random_range(lo..=hi);
    let mut desc = pick_descriptors(&mut b.rng, n, &Shape::ALL);
    let (w, h) = (spec.width as f64, spec.height as f64);

    match family {
        Family::Locate | Family::Relation => {}
        Family::Containment => {
            // the container must be a square or circle
            let outer_shape = if desc[0].0 == Shape::Triangle { Shape::Square } else { desc[0].0 };
            desc[0].0 = outer_shape;
            if desc[1..].contains(&desc[0]) {
                return Err("descriptor clash".into());
            }
            let so = spec.outer_size.unwrap_or_else(|| b.rng.random_range(10.0..14.0));
            let si = spec.inner_size.unwrap_or_else(|| b.rng.random_range(2.5..4.0));
            let room = match outer_shape {
                Shape::Circle => so - si * std::f64::consts::SQRT_2 - 1.5,
                _ => so - si - 1.5,
            };
            if room < 0.0 || so + 1.0 >= w.min(h) / 2.0 {
                return Err(format!("inner size {si} does not fit in outer size {so}"));
            }
            let outer = b.place_free(desc[0].0, desc[0].1, so).ok_or("no room for the container")?;
            let (ox, oy) = outer.center;
            let (dx, dy) = match outer_shape {
                Shape::Circle => {
                    let r = b.rng.random_range(0.0..=room) / std::f64::consts::SQRT_2;
                    let t = b.rng.random_range(0.0..std::f64::consts::TAU);
                    (r * t.cos(), r * t.sin())
                }
                _ => (b.rng.random_range(-room..=room), b.rng.random_range(-room..=room)),
            };
            b.placed.push(Placement { shape: desc[1].0, color: desc[1].1, center: (ox + dx, oy + dy), size: si });
        }
        Family::Occlusion | Family::CausalWhy => {
            let sa = b.rng.random_range(6.0..9.0);
            let sb = b.rng.random_range(5.0..8.0);
            let frac = spec.occlusion_fraction.unwrap_or_else(|| b.rng.random_range(0.25..0.45));
            let reach = sa + sb + 2.0;
            let target = Placement { shape: desc[0].0, color: desc[0].1, center: (0.0, 0.0), size: sa };
            let mut t = None;
            for _ in 0..200 {
                let c = b.random_center(sa);
                let fits = c.0 - reach > 1.0 && c.0 + reach < w - 1.0 && c.1 - reach > 1.0 && c.1 + reach < h - 1.0;
                if fits {
                    t = Some(Placement { center: c, ..target });
                    break;
                }
            }
            let target = t.ok_or("no room for the occlusion pair")?;
            let full = rasterize(spec.width, spec.height, &target);
            let area = full.count() as f64;
            let mut best: Vec<(f64, (f64, f64))> = Vec::new();
            let steps = (2.0 * reach / 0.5) as i64;
            for iy in 0..=steps {
                for ix in 0..=steps {
                    let c = (target.center.0 - reach + ix as f64 * 0.5, target.center.1 - reach + iy as f64 * 0.5);
                    let d = ((c.0 - target.center.0).powi(2) + (c.1 - target.center.1).powi(2)).sqrt();
                    // keep the occluder's center off the target
                    if d < sa {
                        continue;
                    }
                    let occ = rasterize(spec.width, spec.height, &Placement { shape: desc[1].0, color: desc[1].1, center: c, size: sb });
                    let covered = full.data.iter().zip(&occ.data).filter(|(&a, &o)| a && o).count() as f64;
                    let err = (covered / area - frac).abs();
                    if err <= 0.01 {
                        best.push((err, c));
                    }
                }
            }
            let &(_, c) = best.choose(&mut b.rng).ok_or("occlusion fraction not reachable")?;
            b.placed.push(target);
            b.placed.push(Placement { shape: desc[1].0, color: desc[1].1, center: c, size: sb });
            let union = (
                (target.center.0 - sa).min(c.0 - sb),
                (target.center.1 - sa).min(c.1 - sb),
                (target.center.0 + sa).max(c.0 + sb),
                (target.center.1 + sa).max(c.1 + sb),
            );
            b.blocked.push(union);
        }
        Family::Path => {
            let sa = b.rng.random_range(4.0..7.0);
            let sb = b.rng.random_range(4.0..7.0);
            let a = b.place_free(desc[0].0, desc[0].1, sa).ok_or("no room for the path start")?;
            let mut end = None;
            for _ in 0..200 {
                let c = b.random_center(sb);
                let d = ((c.0 - a.center.0).powi(2) + (c.1 - a.center.1).powi(2)).sqrt();
                if d >= 30.0 && boxes_clear(box_of(c, sb), box_of(a.center, sa), 2.0) {
                    end = Some(c);
                    break;
                }
            }
            let c = end.ok_or("no room for the path end")?;
            b.placed.push(Placement { shape: desc[1].0, color: desc[1].1, center: c, size: sb });
            b.blocked.push(box_of(c, sb));
            let mid = ((a.center.0 + c.0) / 2.0, (a.center.1 + c.1) / 2.0);
            let (vx, vy) = (c.0 - a.center.0, c.1 - a.center.1);
            let len = (vx * vx + vy * vy).sqrt();
            let bend = b.rng.random_range(-0.3..0.3) * len;
            let wp = ((mid.0 - vy / len * bend).clamp(3.0, w - 3.0), (mid.1 + vx / len * bend).clamp(3.0, h - 3.0));
            b.path = Some(vec![a.center, wp, c]);
        }
    }

    let first_free = b.placed.len();
    for &(s, c) in &desc[first_free..] {
        let size = b.rng.random_range(4.0..8.0);
        b.place_free(s, c, size).ok_or("no room for a distractor")?;
    }
    let scene = SyntheticScene::build(spec.width, spec.height, &b.placed, b.path.clone()).map_err(|e| e.to_string())?;
    if scene.objects.iter().any(|o| o.visible_mask.count() == 0) {
        return Err("an object is fully hidden".into());
    }
    if !crate::harness::question::has_question(&scene, family) {
        return Err(format!("no {family} question with a unique answer"));
    }
    Ok(scene)
}
