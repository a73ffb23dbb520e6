//! Held-out transfer tasks built on the pretraining universe's objects.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{Labels, TaskKind};
use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;
use crate::rng::{stream, StreamRng};
use crate::synthworld::{render_image, LatentScene, ObjectUniverse, SceneSampler};

pub const SUITE_VERSION: u32 = 1;
const SUITE_SEED: u64 = 0x7a5c_0001;

/// How a task draws its scenes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneSource {
    Sampler(SceneSampler),
    /// One fixed object set per class, saliences redrawn per scene.
    Compositions {
        sets: Vec<Vec<usize>>,
        min_weight: f64,
    },
    /// One target object (the class) with salience `target_weight` and
    /// `extra.0..=extra.1` distractors sharing the rest equally at random.
    Clutter {
        targets: Vec<usize>,
        distractors: Vec<usize>,
        extra: (usize, usize),
        target_weight: f64,
    },
}

/// How a scene maps to a target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Class of the most salient object, via `class_of[object]`.
    Dominant { class_of: Vec<Option<usize>>, classes: usize },
    /// Presence of each listed object.
    Presence { objects: Vec<usize> },
    /// Index of the composition or target the scene was drawn from.
    Target,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub scenes: SceneSource,
    pub rule: LabelRule,
    pub sigma: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

impl TaskSpec {
    pub fn kind(&self) -> TaskKind {
        match self.rule {
            LabelRule::Presence { .. } => TaskKind::Multilabel,
            _ => TaskKind::Multiclass,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub images: DenseMatrix,
    pub labels: Labels,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferTask {
    pub spec: TaskSpec,
    pub train: Split,
    pub val: Split,
    pub test: Split,
}

fn range(a: usize, b: usize) -> Vec<usize> {
    (a..b).collect()
}

fn single(pool: Vec<usize>) -> SceneSampler {
    SceneSampler { min_objects: 1, max_objects: 1, min_weight: 1.0, pool }
}

/// The six task generators of suite v1. Requires a universe with at least
/// 64 objects.
pub fn suite_v1(universe: &ObjectUniverse) -> Result<Vec<TaskSpec>> {
    let n = universe.num_objects();
    if n < 64 {
        return Err(Error::Parameter(format!("transfer suite needs >= 64 objects, universe has {n}")));
    }
    let mut rng = stream(SUITE_SEED, "suite/v1", 0);
    let identity = |objs: &[usize]| {
        let mut class_of = vec![None; n];
        for (c, &o) in objs.iter().enumerate() {
            class_of[o] = Some(c);
        }
        class_of
    };
    let mut shuffled = range(0, 64);
    shuffled.shuffle(&mut rng);
    let sets: Vec<Vec<usize>> = shuffled[..36].chunks(3).map(|c| c.to_vec()).collect();
    let task = |name: &str, scenes, rule, sigma, n_train| TaskSpec {
        name: name.into(),
        scenes,
        rule,
        sigma,
        n_train,
        n_val: 300,
        n_test: 1000,
    };
    Ok(vec![
        task(
            "objects",
            SceneSource::Sampler(single(range(0, 32))),
            LabelRule::Dominant { class_of: identity(&range(0, 32)), classes: 32 },
            0.2,
            320,
        ),
        task(
            "clutter-a",
            SceneSource::Clutter {
                targets: range(32, 64),
                distractors: range(0, 32),
                extra: (1, 2),
                target_weight: 0.5,
            },
            LabelRule::Target,
            0.1,
            480,
        ),
        task(
            "clutter-b",
            SceneSource::Clutter {
                targets: range(0, 16),
                distractors: range(16, 64),
                extra: (2, 4),
                target_weight: 0.3,
            },
            LabelRule::Target,
            0.15,
            320,
        ),
        task(
            "presence-a",
            SceneSource::Sampler(SceneSampler { min_objects: 1, max_objects: 3, min_weight: 0.5, pool: range(0, 64) }),
            LabelRule::Presence { objects: range(48, 64) },
            0.1,
            480,
        ),
        task(
            "presence-b",
            SceneSource::Sampler(SceneSampler { min_objects: 3, max_objects: 6, min_weight: 0.25, pool: range(0, 64) }),
            LabelRule::Presence { objects: range(0, 16) },
            0.15,
            480,
        ),
        task("compositions", SceneSource::Compositions { sets, min_weight: 0.25 }, LabelRule::Target, 0.25, 240),
    ])
}

fn draw_scene(spec: &TaskSpec, universe: &ObjectUniverse, rng: &mut StreamRng) -> Result<(LatentScene, usize)> {
    match &spec.scenes {
        SceneSource::Sampler(s) => Ok((s.sample(universe, rng), 0)),
        SceneSource::Compositions { sets, min_weight } => {
            let c = rng.random_range(0..sets.len());
            let raw: Vec<f64> = sets[c].iter().map(|_| rng.random_range(*min_weight..=1.0)).collect();
            let total: f64 = raw.iter().sum();
            let scene = LatentScene::new(sets[c].clone(), raw.iter().map(|w| w / total).collect())?;
            Ok((scene, c))
        }
        SceneSource::Clutter { targets, distractors, extra, target_weight } => {
            let c = rng.random_range(0..targets.len());
            let k = rng.random_range(extra.0..=extra.1);
            let mut ids = vec![targets[c]];
            ids.extend(rand::seq::index::sample(rng, distractors.len(), k).into_iter().map(|i| distractors[i]));
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..=1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut sal = vec![*target_weight];
            sal.extend(raw.iter().map(|w| (1.0 - target_weight) * w / total));
            Ok((LatentScene::new(ids, sal)?, c))
        }
    }
}

fn build_split(spec: &TaskSpec, universe: &ObjectUniverse, n: usize, split: &str) -> Result<Split> {
    let mut rng = stream(SUITE_SEED, &format!("suite/v1/{}/{split}", spec.name), 0);
    let dim = universe.embed_dim();
    let mut data = Vec::with_capacity(n * dim);
    let mut classes = Vec::new();
    let mut flags = Vec::new();
    for _ in 0..n {
        // resample until the scene has a label under the rule
        let (scene, comp, class) = loop {
            let (scene, comp) = draw_scene(spec, universe, &mut rng)?;
            match &spec.rule {
                LabelRule::Dominant { class_of, .. } => {
                    if let Some(c) = class_of[scene.dominant()] {
                        break (scene, comp, c);
                    }
                }
                _ => break (scene, comp, comp),
            }
        };
        data.extend(render_image(&scene, universe, spec.sigma, &mut rng)?);
        match &spec.rule {
            LabelRule::Presence { objects } => flags.extend(objects.iter().map(|&o| scene.contains(o))),
            LabelRule::Target => classes.push(comp),
            LabelRule::Dominant { .. } => classes.push(class),
        }
    }
    let labels = match &spec.rule {
        LabelRule::Presence { objects } => Labels::Multilabel { labels: objects.len(), y: flags },
        LabelRule::Target => match &spec.scenes {
            SceneSource::Compositions { sets, .. } => Labels::Multiclass { classes: sets.len(), y: classes },
            SceneSource::Clutter { targets, .. } => Labels::Multiclass { classes: targets.len(), y: classes },
            SceneSource::Sampler(_) => {
                return Err(Error::Parameter("target labels need a composition or clutter scene source".into()))
            }
        },
        LabelRule::Dominant { classes: k, .. } => Labels::Multiclass { classes: *k, y: classes },
    };
    Ok(Split { images: DenseMatrix::from_vec(n, dim, data)?, labels })
}

pub fn build_task(spec: &TaskSpec, universe: &ObjectUniverse) -> Result<TransferTask> {
    if let SceneSource::Sampler(s) = &spec.scenes {
        s.validate(universe)?;
    }
    Ok(TransferTask {
        spec: spec.clone(),
        train: build_split(spec, universe, spec.n_train, "train")?,
        val: build_split(spec, universe, spec.n_val, "val")?,
        test: build_split(spec, universe, spec.n_test, "test")?,
    })
}

pub fn build_suite(universe: &ObjectUniverse) -> Result<Vec<TransferTask>> {
    suite_v1(universe)?.iter().map(|s| build_task(s, universe)).collect()
}
