use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ObjectUniverse;
use crate::error::{Error, Result};

/// Ground-truth objects behind an example; the shared cause of its image and
/// captions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentScene {
    pub object_ids: Vec<usize>,
    pub saliences: Vec<f64>,
}

impl LatentScene {
    pub fn new(object_ids: Vec<usize>, saliences: Vec<f64>) -> Result<Self> {
        let s = Self { object_ids, saliences };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.object_ids.is_empty() {
            return Err(Error::Data("scene has no objects".into()));
        }
        if self.object_ids.len() != self.saliences.len() {
            return Err(Error::Data("scene objects and saliences differ in length".into()));
        }
        let mut ids = self.object_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.object_ids.len() {
            return Err(Error::Data("scene repeats an object".into()));
        }
        if self.saliences.iter().any(|&s| !(s > 0.0 && s <= 1.0)) {
            return Err(Error::Data("salience outside (0, 1]".into()));
        }
        let total: f64 = self.saliences.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Data(format!("saliences sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.object_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.object_ids.is_empty()
    }

    pub fn contains(&self, object: usize) -> bool {
        self.object_ids.contains(&object)
    }

    /// Object with the largest salience (first on ties).
    pub fn dominant(&self) -> usize {
        let mut best = 0;
        for i in 1..self.saliences.len() {
            if self.saliences[i] > self.saliences[best] {
                best = i;
            }
        }
        self.object_ids[best]
    }
}

/// How scenes are drawn: size uniform in `min_objects..=max_objects`, objects
/// uniform without replacement from `pool` (all objects when empty),
/// saliences proportional to U[`min_weight`, 1] draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSampler {
    pub min_objects: usize,
    pub max_objects: usize,
    pub min_weight: f64,
    #[serde(default)]
    pub pool: Vec<usize>,
}

impl Default for SceneSampler {
    fn default() -> Self {
        Self { min_objects: 1, max_objects: 6, min_weight: 0.25, pool: Vec::new() }
    }
}

impl SceneSampler {
    pub fn validate(&self, universe: &ObjectUniverse) -> Result<()> {
        let avail = if self.pool.is_empty() { universe.num_objects() } else { self.pool.len() };
        if self.min_objects == 0 || self.min_objects > self.max_objects || self.max_objects > avail {
            return Err(Error::Parameter(format!(
                "scene size range {}..={} invalid for {avail} objects",
                self.min_objects, self.max_objects
            )));
        }
        if !(self.min_weight > 0.0 && self.min_weight <= 1.0) {
            return Err(Error::Parameter("min_weight must be in (0, 1]".into()));
        }
        if self.pool.iter().any(|&o| o >= universe.num_objects()) {
            return Err(Error::Parameter("scene pool names an unknown object".into()));
        }
        Ok(())
    }

    pub fn sample(&self, universe: &ObjectUniverse, rng: &mut impl Rng) -> LatentScene {
        let size = rng.random_range(self.min_objects..=self.max_objects);
        let object_ids: Vec<usize> = if self.pool.is_empty() {
            sample(rng, universe.num_objects(), size).into_vec()
        } else {
            sample(rng, self.pool.len(), size).into_iter().map(|i| self.pool[i]).collect()
        };
        let raw: Vec<f64> = (0..size)
            .map(|_| if self.min_weight >= 1.0 { 1.0 } else { rng.random_range(self.min_weight..=1.0) })
            .collect();
        let total: f64 = raw.iter().sum();
        let mut saliences: Vec<f64> = raw.iter().map(|w| w / total).collect();
        // exact unit sum keeps the invariant tight after rounding
        let head: f64 = saliences[1..].iter().sum();
        saliences[0] = 1.0 - head;
        LatentScene { object_ids, saliences }
    }
}

/// Feature-space "photograph" of a scene: salience-weighted sum of object
/// embeddings plus isotropic Gaussian noise.
pub fn render_image(
    scene: &LatentScene,
    universe: &ObjectUniverse,
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) {
        return Err(Error::Parameter(format!("image noise sigma must be >= 0, got {sigma}")));
    }
    let mut img = vec![0.0; universe.embed_dim()];
    for (&o, &s) in scene.object_ids.iter().zip(&scene.saliences) {
        for (x, e) in img.iter_mut().zip(universe.embedding(o)) {
            *x += s * e;
        }
    }
    if sigma > 0.0 {
        for x in &mut img {
            let z: f64 = StandardNormal.sample(rng);
            *x += sigma * z;
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::synthworld::UniverseConfig;

    fn universe() -> ObjectUniverse {
        ObjectUniverse::generate(UniverseConfig::default()).unwrap()
    }

    #[test]
    fn noiseless_renders() {
        let u = universe();
        let mut rng = stream(0, "t", 0);
        let one = LatentScene::new(vec![3], vec![1.0]).unwrap();
        assert_eq!(render_image(&one, &u, 0.0, &mut rng).unwrap(), u.embedding(3));
        let two = LatentScene::new(vec![3, 9], vec![0.5, 0.5]).unwrap();
        let img = render_image(&two, &u, 0.0, &mut rng).unwrap();
        for d in 0..u.embed_dim() {
            let mid = 0.5 * (u.embedding(3)[d] + u.embedding(9)[d]);
            assert!((img[d] - mid).abs() < 1e-15);
        }
    }

    #[test]
    fn noisy_render_is_unbiased() {
        let u = universe();
        let scene = LatentScene::new(vec![1, 2, 7], vec![0.2, 0.3, 0.5]).unwrap();
        let clean = render_image(&scene, &u, 0.0, &mut stream(0, "t", 0)).unwrap();
        let mut rng = stream(1, "mc", 0);
        let draws = 10_000;
        let mut mean = vec![0.0; u.embed_dim()];
        for _ in 0..draws {
            let img = render_image(&scene, &u, 0.1, &mut rng).unwrap();
            for (m, x) in mean.iter_mut().zip(img) {
                *m += x / draws as f64;
            }
        }
        // standard error per coordinate is 0.001; 0.01 is ten of them
        for (m, c) in mean.iter().zip(&clean) {
            assert!((m - c).abs() < 0.01);
        }
    }

    #[test]
    fn sampled_scenes_are_valid() {
        let u = universe();
        let s = SceneSampler::default();
        let mut rng = stream(5, "scenes", 0);
        for _ in 0..2000 {
            let sc = s.sample(&u, &mut rng);
            sc.validate().unwrap();
            assert!((1..=6).contains(&sc.len()));
        }
    }

    #[test]
    fn invalid_scenes_rejected() {
        assert!(LatentScene::new(vec![], vec![]).is_err());
        assert!(LatentScene::new(vec![1, 1], vec![0.5, 0.5]).is_err());
        assert!(LatentScene::new(vec![1, 2], vec![0.5, 0.6]).is_err());
        assert!(LatentScene::new(vec![1], vec![1.0]).is_ok());
    }
}
