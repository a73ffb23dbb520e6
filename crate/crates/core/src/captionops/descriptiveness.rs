use serde::{Deserialize, Serialize};

use crate::synthworld::{LatentScene, ObjectUniverse};

/// Fraction of a scene's objects that a caption names, in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct DescriptivenessScore(f64);

impl DescriptivenessScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Ground-truth descriptiveness: the share of scene objects whose synonym
/// (any of them) appears in the caption.
pub fn oracle_descriptiveness<S: AsRef<str>>(
    caption: &[S],
    scene: &LatentScene,
    universe: &ObjectUniverse,
) -> DescriptivenessScore {
    if scene.object_ids.is_empty() {
        return DescriptivenessScore(0.0);
    }
    let named =
        scene.object_ids.iter().filter(|&&o| caption.iter().any(|t| universe.object_of(t.as_ref()) == Some(o))).count();
    DescriptivenessScore(named as f64 / scene.object_ids.len() as f64)
}
