use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LatentScene, ObjectUniverse, Template};
use crate::error::{Error, Result};

pub type Caption = Vec<String>;

/// Independent controls over caption quality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptionKnobs {
    /// Probability that a content token survives (is not replaced by noise).
    pub descriptiveness: f64,
    /// Always name an object by its first synonym.
    pub consistent: bool,
    /// Mention every scene object.
    pub complete: bool,
    /// Per-object mention probability when not complete.
    pub mention_prob: f64,
    /// Always use the first template.
    pub fixed_template: bool,
}

impl Default for CaptionKnobs {
    fn default() -> Self {
        Self { descriptiveness: 1.0, consistent: true, complete: true, mention_prob: 0.5, fixed_template: true }
    }
}

impl CaptionKnobs {
    /// Inconsistent captions also vary their template.
    pub fn variability(consistent: bool, complete: bool) -> Self {
        Self { consistent, complete, fixed_template: consistent, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.descriptiveness) {
            return Err(Error::Parameter(format!("descriptiveness must be in [0, 1], got {}", self.descriptiveness)));
        }
        if !(self.mention_prob > 0.0 && self.mention_prob <= 1.0) {
            return Err(Error::Parameter(format!("mention_prob must be in (0, 1], got {}", self.mention_prob)));
        }
        Ok(())
    }
}

/// Template prefix, then the content tokens, then the suffix.
pub fn render_caption(template: &Template, content: &[String]) -> Caption {
    template.prefix.iter().chain(content).chain(&template.suffix).cloned().collect()
}

pub fn generate_caption(
    scene: &LatentScene,
    universe: &ObjectUniverse,
    knobs: &CaptionKnobs,
    rng: &mut impl Rng,
) -> Caption {
    let mut mentioned: Vec<usize> = if knobs.complete {
        scene.object_ids.clone()
    } else {
        loop {
            let m: Vec<usize> =
                scene.object_ids.iter().copied().filter(|_| rng.random::<f64>() < knobs.mention_prob).collect();
            if !m.is_empty() {
                break m;
            }
        }
    };
    mentioned.shuffle(rng);

    let template = if knobs.fixed_template {
        &universe.templates[0]
    } else {
        universe.templates.choose(rng).expect("templates non-empty")
    };

    let content: Vec<String> = mentioned
        .iter()
        .map(|&o| {
            let syns = &universe.synonyms[o];
            let word = if knobs.consistent { &syns[0] } else { syns.choose(rng).expect("synonyms non-empty") };
            if knobs.descriptiveness < 1.0 && rng.random::<f64>() >= knobs.descriptiveness {
                universe.noise_vocab.choose(rng).expect("noise non-empty").clone()
            } else {
                word.clone()
            }
        })
        .collect();
    render_caption(template, &content)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::synthworld::{SceneSampler, TokenKind, UniverseConfig};
    use std::collections::HashSet;

    fn universe() -> ObjectUniverse {
        ObjectUniverse::generate(UniverseConfig::default()).unwrap()
    }

    #[test]
    fn deterministic_knobs_fill_first_template() {
        let u = universe();
        let scene = LatentScene::new(vec![4, 11], vec![0.5, 0.5]).unwrap();
        let knobs = CaptionKnobs::default();
        let mut rng = stream(0, "cap", 0);
        for _ in 0..20 {
            let cap = generate_caption(&scene, &u, &knobs, &mut rng);
            let a = render_caption(&u.templates[0], &[u.synonyms[4][0].clone(), u.synonyms[11][0].clone()]);
            let b = render_caption(&u.templates[0], &[u.synonyms[11][0].clone(), u.synonyms[4][0].clone()]);
            assert!(cap == a || cap == b, "{cap:?}");
        }
    }

    #[test]
    fn zero_descriptiveness_mentions_nothing() {
        let u = universe();
        let knobs = CaptionKnobs { descriptiveness: 0.0, consistent: false, ..CaptionKnobs::default() };
        let mut rng = stream(1, "cap", 0);
        let sampler = SceneSampler::default();
        for _ in 0..500 {
            let scene = sampler.sample(&u, &mut rng);
            let cap = generate_caption(&scene, &u, &knobs, &mut rng);
            assert!(cap.iter().all(|t| u.object_of(t).is_none()));
        }
    }

    #[test]
    fn surviving_fraction_tracks_descriptiveness() {
        let u = universe();
        let knobs = CaptionKnobs { descriptiveness: 0.7, ..CaptionKnobs::default() };
        let mut rng = stream(2, "cap", 0);
        let sampler = SceneSampler::default();
        let (mut content, mut surviving) = (0usize, 0usize);
        for _ in 0..10_000 {
            let scene = sampler.sample(&u, &mut rng);
            let cap = generate_caption(&scene, &u, &knobs, &mut rng);
            for t in &cap {
                match u.token_kind(t) {
                    Some(TokenKind::Synonym { .. }) => {
                        content += 1;
                        surviving += 1;
                    }
                    Some(TokenKind::Noise) => content += 1,
                    _ => {}
                }
            }
        }
        let frac = surviving as f64 / content as f64;
        assert!((frac - 0.7).abs() < 0.02, "{frac}");
    }

    #[test]
    fn incomplete_captions_mention_a_nonempty_subset() {
        let u = universe();
        let knobs = CaptionKnobs { complete: false, mention_prob: 0.2, ..CaptionKnobs::default() };
        let scene = LatentScene::new(vec![1, 2, 3], vec![0.2, 0.3, 0.5]).unwrap();
        let mut rng = stream(3, "cap", 0);
        let mut seen_sizes = HashSet::new();
        for _ in 0..500 {
            let cap = generate_caption(&scene, &u, &knobs, &mut rng);
            let objs: Vec<usize> = cap.iter().filter_map(|t| u.object_of(t)).collect();
            assert!(!objs.is_empty());
            assert!(objs.iter().all(|o| scene.contains(*o)));
            seen_sizes.insert(objs.len());
        }
        assert!(seen_sizes.len() > 1);
    }

    #[test]
    fn knob_validation() {
        assert!(CaptionKnobs { descriptiveness: 1.1, ..CaptionKnobs::default() }.validate().is_err());
        assert!(CaptionKnobs { mention_prob: 0.0, ..CaptionKnobs::default() }.validate().is_err());
    }
}
