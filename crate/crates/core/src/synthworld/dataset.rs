use serde::{Deserialize, Serialize};

use super::{generate_caption, render_image, Caption, CaptionKnobs, LatentScene, ObjectUniverse, SceneSampler};
use crate::error::{Error, Result};
use crate::rng::stream;

/// One pre-training example: an image, its caption pool and the scene that
/// generated both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub image: Vec<f64>,
    pub captions: Vec<Caption>,
    pub scene: LatentScene,
}

impl Example {
    /// Sorted object indices present in the scene.
    pub fn label_indices(&self) -> Vec<usize> {
        let mut ids = self.scene.object_ids.clone();
        ids.sort_unstable();
        ids
    }

    pub fn multi_hot(&self, num_objects: usize) -> Vec<f64> {
        let mut v = vec![0.0; num_objects];
        for &o in &self.scene.object_ids {
            v[o] = 1.0;
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub n: usize,
    pub captions_per_image: usize,
    pub knobs: CaptionKnobs,
    pub image_noise_sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub scenes: SceneSampler,
}

impl DatasetSpec {
    pub fn new(n: usize, captions_per_image: usize, knobs: CaptionKnobs, seed: u64) -> Self {
        Self { n, captions_per_image, knobs, image_noise_sigma: 0.3, seed, scenes: SceneSampler::default() }
    }

    pub fn validate(&self, universe: &ObjectUniverse) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Parameter("dataset size must be >= 1".into()));
        }
        if self.captions_per_image == 0 {
            return Err(Error::Parameter("captions_per_image must be >= 1".into()));
        }
        if !(self.image_noise_sigma >= 0.0) {
            return Err(Error::Parameter("image_noise_sigma must be >= 0".into()));
        }
        self.knobs.validate()?;
        self.scenes.validate(universe)
    }
}

/// Example `index` of a dataset; depends only on `(spec, universe, index)`.
pub fn build_example(spec: &DatasetSpec, universe: &ObjectUniverse, index: usize) -> Result<Example> {
    let mut rng = stream(spec.seed, "dataset/example", index as u64);
    let scene = spec.scenes.sample(universe, &mut rng);
    let image = render_image(&scene, universe, spec.image_noise_sigma, &mut rng)?;
    let captions =
        (0..spec.captions_per_image).map(|_| generate_caption(&scene, universe, &spec.knobs, &mut rng)).collect();
    Ok(Example { image, captions, scene })
}

pub fn build_dataset(spec: &DatasetSpec, universe: &ObjectUniverse) -> Result<Vec<Example>> {
    spec.validate(universe)?;
    (0..spec.n).map(|i| build_example(spec, universe, i)).collect()
}

/// Replace every caption pool with freshly generated captions under `knobs`
/// (the ground-truth stand-in for recaptioning a dataset).
pub fn recaption(
    examples: &[Example],
    universe: &ObjectUniverse,
    knobs: &CaptionKnobs,
    captions_per_image: usize,
    seed: u64,
) -> Vec<Example> {
    examples
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let mut rng = stream(seed, "dataset/recaption", i as u64);
            Example {
                captions: (0..captions_per_image)
                    .map(|_| generate_caption(&ex.scene, universe, knobs, &mut rng))
                    .collect(),
                ..ex.clone()
            }
        })
        .collect()
}
