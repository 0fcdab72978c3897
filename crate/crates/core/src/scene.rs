//! Physical environment model and pointing geometry.
//!
//! Scene documents are TOML:
//!
//! ```toml
//! name = "A"
//! [[objects]]
//! class = "book"        # any lexicon surface form
//! size = "large"        # large | small
//! distance_m = 1.0
//! x = 0.3               # normalized image coordinates
//! y = 0.7
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engines::DetectorProfile;
use crate::lexicon::{lexicon, ClassId};
use crate::types::Point;

/// Distance at which the distance factor is neutral.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;
/// Distance assigned to the user's own hand when it is added to a scene.
pub const HAND_DISTANCE_M: f64 = 0.5;

const CONTEXT_A: &str = include_str!("../../../scenes/context_a.toml");
const CONTEXT_B: &str = include_str!("../../../scenes/context_b.toml");

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("unknown context `{0}` (expected A, B or a scene file path)")]
    UnknownContext(String),
    #[error("cannot read scene file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed scene document: {0}")]
    Malformed(String),
    #[error("scene `{0}` has no objects")]
    Empty(String),
    #[error("object {index}: {reason}")]
    InvalidObject { index: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Large,
    Small,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneObject {
    pub class: ClassId,
    pub size_class: SizeClass,
    pub distance_m: f64,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneContext {
    pub name: String,
    pub objects: Vec<SceneObject>,
}

/// One detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class: ClassId,
    pub position: Point,
    pub confidence: f64,
    /// Index of the scene object that produced this detection. Only known in
    /// simulation; used to score outcomes against ground truth.
    pub source_object: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    name: String,
    #[serde(default)]
    objects: Vec<ObjectDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    class: String,
    size: SizeClass,
    distance_m: f64,
    x: f64,
    y: f64,
}

impl SceneContext {
    /// Parses and validates a scene document.
    pub fn parse(text: &str) -> Result<Self, SceneError> {
        let doc: SceneDoc = toml::from_str(text).map_err(|e| SceneError::Malformed(e.to_string()))?;
        let objects = doc
            .objects
            .into_iter()
            .enumerate()
            .map(|(index, o)| {
                let class = lexicon()
                    .id_of(&o.class.to_lowercase())
                    .ok_or_else(|| SceneError::InvalidObject { index, reason: format!("unknown class `{}`", o.class) })?;
                Ok(SceneObject { class, size_class: o.size, distance_m: o.distance_m, position: Point::new(o.x, o.y) })
            })
            .collect::<Result<Vec<_>, SceneError>>()?;
        let scene = SceneContext { name: doc.name, objects };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.objects.is_empty() {
            return Err(SceneError::Empty(self.name.clone()));
        }
        for (index, o) in self.objects.iter().enumerate() {
            if !(o.distance_m.is_finite() && o.distance_m > 0.0) {
                return Err(SceneError::InvalidObject { index, reason: format!("distance_m must be > 0, got {}", o.distance_m) });
            }
            if !o.position.in_unit_square() {
                return Err(SceneError::InvalidObject { index, reason: "position outside the unit square".into() });
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        let mut out = format!("name = {:?}\n", self.name);
        for o in &self.objects {
            let size = match o.size_class {
                SizeClass::Large => "large",
                SizeClass::Small => "small",
            };
            out.push_str(&format!(
                "\n[[objects]]\nclass = {:?}\nsize = \"{size}\"\ndistance_m = {:?}\nx = {:?}\ny = {:?}\n",
                o.class.to_string(),
                o.distance_m,
                o.position.x,
                o.position.y
            ));
        }
        out
    }

    pub fn context_a() -> Self {
        Self::parse(CONTEXT_A).expect("built-in context A is valid")
    }

    pub fn context_b() -> Self {
        Self::parse(CONTEXT_B).expect("built-in context B is valid")
    }

    /// Indices of objects of `class`.
    pub fn instances_of(&self, class: ClassId) -> Vec<usize> {
        self.objects.iter().enumerate().filter(|(_, o)| o.class == class).map(|(i, _)| i).collect()
    }

    /// Classes present at least twice.
    pub fn duplicated_classes(&self) -> Vec<ClassId> {
        let mut classes: Vec<ClassId> = self.objects.iter().map(|o| o.class).collect();
        classes.sort();
        classes.dedup();
        classes.into_iter().filter(|c| self.instances_of(*c).len() >= 2).collect()
    }

    /// Copy of the scene with the user's hand visible at `position`.
    pub fn with_hand(&self, position: Point) -> SceneContext {
        let mut scene = self.clone();
        scene.objects.push(SceneObject {
            class: ClassId::HAND,
            size_class: SizeClass::Large,
            distance_m: HAND_DISTANCE_M,
            position: position.clamped(),
        });
        scene
    }
}

/// Resolves `"A"`, `"B"` or a path to a scene document.
pub fn load_context(name_or_path: &str) -> Result<SceneContext, SceneError> {
    match name_or_path {
        "A" | "a" => Ok(SceneContext::context_a()),
        "B" | "b" => Ok(SceneContext::context_b()),
        other => {
            let path = Path::new(other);
            if !path.exists() {
                return Err(SceneError::UnknownContext(other.to_string()));
            }
            let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io { path: other.to_string(), source })?;
            SceneContext::parse(&text)
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no candidate detections")]
pub struct EmptyCandidates;

/// Index of the candidate closest to `hand`; ties go to the lowest index.
pub fn nearest_object(candidates: &[Detection], hand: Point) -> Result<usize, EmptyCandidates> {
    let mut best: Option<(usize, f64)> = None;
    for (i, d) in candidates.iter().enumerate() {
        let dist = d.position.distance(&hand);
        match best {
            Some((_, b)) if dist >= b => {}
            _ => best = Some((i, dist)),
        }
    }
    best.map(|(i, _)| i).ok_or(EmptyCandidates)
}

/// Size multiplier; large objects are neutral.
pub fn size_factor(size: SizeClass, detector: &DetectorProfile) -> f64 {
    match size {
        SizeClass::Large => 1.0,
        SizeClass::Small => detector.small_object_factor,
    }
}

/// Exponential falloff beyond the reference distance; neutral up to it.
pub fn distance_factor(distance_m: f64, detector: &DetectorProfile) -> f64 {
    (-detector.distance_decay_per_m * (distance_m - REFERENCE_DISTANCE_M).max(0.0)).exp()
}

/// Probability that `detector` correctly reports `obj` in one pass.
pub fn detection_probability(obj: &SceneObject, detector: &DetectorProfile) -> f64 {
    (detector.map * size_factor(obj.size_class, detector) * distance_factor(obj.distance_m, detector)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::EngineProfiles;
    use crate::types::Tier;
    use proptest::prelude::*;

    fn det(x: f64, y: f64) -> Detection {
        Detection { class: ClassId::BOOK, position: Point::new(x, y), confidence: 0.9, source_object: None }
    }

    #[test]
    fn builtin_contexts() {
        let a = load_context("A").unwrap();
        assert_eq!(a.objects.len(), 5);
        assert!(a.objects.iter().all(|o| o.distance_m == 1.0));
        assert_eq!(a.objects.iter().filter(|o| o.size_class == SizeClass::Large).count(), 4);
        let b = load_context("B").unwrap();
        assert_eq!(b.objects.len(), 5);
        assert!(b.objects.iter().all(|o| o.distance_m == 2.0));
        assert_eq!(b.objects.iter().filter(|o| o.size_class == SizeClass::Large).count(), 3);
        assert!(!a.duplicated_classes().is_empty());
        assert!(!b.duplicated_classes().is_empty());
    }

    #[test]
    fn empty_and_bad_scenes_rejected() {
        assert!(matches!(SceneContext::parse("name = \"empty\"\nobjects = []"), Err(SceneError::Empty(_))));
        assert!(matches!(load_context("C"), Err(SceneError::UnknownContext(_))));
        let bad = "name = \"x\"\n[[objects]]\nclass = \"book\"\nsize = \"large\"\ndistance_m = 0.0\nx = 0.5\ny = 0.5\n";
        assert!(matches!(SceneContext::parse(bad), Err(SceneError::InvalidObject { index: 0, .. })));
        let bad = "name = \"x\"\n[[objects]]\nclass = \"sofa\"\nsize = \"large\"\ndistance_m = 1.0\nx = 0.5\ny = 0.5\n";
        assert!(matches!(SceneContext::parse(bad), Err(SceneError::InvalidObject { .. })));
        assert!(matches!(SceneContext::parse("name = "), Err(SceneError::Malformed(_))));
    }

    #[test]
    fn scene_document_roundtrip() {
        let a = SceneContext::context_a();
        assert_eq!(SceneContext::parse(&a.to_toml()).unwrap(), a);
    }

    #[test]
    fn nearest_examples() {
        assert_eq!(nearest_object(&[det(0.7, 0.7)], Point::new(0.1, 0.1)), Ok(0));
        assert_eq!(nearest_object(&[det(0.2, 0.2), det(0.8, 0.8)], Point::new(0.25, 0.25)), Ok(0));
        assert_eq!(nearest_object(&[det(0.2, 0.2), det(0.2, 0.2)], Point::new(0.9, 0.9)), Ok(0));
        assert_eq!(nearest_object(&[], Point::new(0.5, 0.5)), Err(EmptyCandidates));
    }

    #[test]
    fn neutral_factors_give_table_map() {
        let p = EngineProfiles::paper();
        let obj = SceneObject { class: ClassId::BOOK, size_class: SizeClass::Large, distance_m: 1.0, position: Point::new(0.5, 0.5) };
        assert!((detection_probability(&obj, p.od.get(Tier::H)) - 0.963).abs() < 1e-12);
        assert!((detection_probability(&obj, p.od.get(Tier::L)) - 0.797).abs() < 1e-12);
    }

    fn brute_force_nearest(c: &[Detection], hand: Point) -> usize {
        let dists: Vec<f64> = c.iter().map(|d| d.position.distance(&hand)).collect();
        let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
        dists.iter().position(|d| *d == min).unwrap()
    }

    proptest! {
        #[test]
        fn nearest_matches_exhaustive_scan(
            pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 20),
            hx in 0.0f64..1.0, hy in 0.0f64..1.0,
        ) {
            let c: Vec<Detection> = pts.iter().map(|(x, y)| det(*x, *y)).collect();
            let hand = Point::new(hx, hy);
            prop_assert_eq!(nearest_object(&c, hand).unwrap(), brute_force_nearest(&c, hand));
        }

        #[test]
        fn nearest_is_permutation_stable(
            pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..12),
            hx in 0.0f64..1.0, hy in 0.0f64..1.0, rot in 0usize..12,
        ) {
            let c: Vec<Detection> = pts.iter().map(|(x, y)| det(*x, *y)).collect();
            let hand = Point::new(hx, hy);
            let mut shuffled = c.clone();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            let a = &c[nearest_object(&c, hand).unwrap()];
            let b = &shuffled[nearest_object(&shuffled, hand).unwrap()];
            prop_assert_eq!(a.position.distance(&hand), b.position.distance(&hand));
        }

        #[test]
        fn detection_probability_monotone(d1 in 0.1f64..5.0, d2 in 0.1f64..5.0) {
            let p = EngineProfiles::paper();
            let (near, far) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            for tier in Tier::ALL {
                let det = p.od.get(tier);
                let mk = |d, s| SceneObject { class: ClassId::CUP, size_class: s, distance_m: d, position: Point::new(0.5, 0.5) };
                prop_assert!(detection_probability(&mk(near, SizeClass::Large), det) >= detection_probability(&mk(far, SizeClass::Large), det));
                prop_assert!(detection_probability(&mk(near, SizeClass::Large), det) >= detection_probability(&mk(near, SizeClass::Small), det));
            }
            let mk = |d, s| SceneObject { class: ClassId::CUP, size_class: s, distance_m: d, position: Point::new(0.5, 0.5) };
            for s in [SizeClass::Large, SizeClass::Small] {
                prop_assert!(detection_probability(&mk(far, s), p.od.get(Tier::H)) >= detection_probability(&mk(far, s), p.od.get(Tier::L)));
            }
        }
    }
}
