use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream;
use crate::synthworld::{render_caption, Caption, Example, ObjectUniverse, TokenKind};

/// Re-renders a caption with a freshly drawn template and freshly drawn
/// synonyms. Mentioned objects, noise tokens and their order are kept.
pub fn paraphrase<S: AsRef<str>>(caption: &[S], universe: &ObjectUniverse, rng: &mut impl Rng) -> Result<Caption> {
    if caption.is_empty() {
        return Err(Error::Parameter("cannot paraphrase an empty caption".into()));
    }
    let content: Vec<String> = caption
        .iter()
        .filter_map(|t| {
            let t = t.as_ref();
            match universe.token_kind(t) {
                Some(TokenKind::Template) => None,
                Some(TokenKind::Synonym { object, .. }) => {
                    Some(universe.synonyms[object].choose(rng).expect("synonyms non-empty").clone())
                }
                Some(TokenKind::Noise) | None => Some(t.to_string()),
            }
        })
        .collect();
    let template = universe.templates.choose(rng).expect("templates non-empty");
    Ok(render_caption(template, &content))
}

/// Replaces each example's captions with its first caption followed by
/// `k − 1` paraphrases of it.
pub fn paraphrase_dataset(
    examples: &[Example],
    universe: &ObjectUniverse,
    k: usize,
    seed: u64,
) -> Result<Vec<Example>> {
    if k == 0 {
        return Err(Error::Parameter("need at least one caption per example".into()));
    }
    examples
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let first = e.captions.first().ok_or_else(|| Error::Data(format!("example {i} has no caption")))?.clone();
            let mut rng = stream(seed, "paraphrase/example", i as u64);
            let mut captions = vec![first.clone()];
            for _ in 1..k {
                captions.push(paraphrase(&first, universe, &mut rng)?);
            }
            Ok(Example { captions, ..e.clone() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::captionops::oracle_descriptiveness;
    use crate::synthworld::{generate_caption, CaptionKnobs, SceneSampler, UniverseConfig};

    fn universe() -> ObjectUniverse {
        ObjectUniverse::generate(UniverseConfig::default()).unwrap()
    }

    #[test]
    fn preserves_mentions_and_noise() {
        let u = universe();
        let mut rng = stream(0, "t", 0);
        let knobs = CaptionKnobs { descriptiveness: 0.6, ..CaptionKnobs::variability(false, false) };
        for _ in 0..2000 {
            let scene = SceneSampler::default().sample(&u, &mut rng);
            let c = generate_caption(&scene, &u, &knobs, &mut rng);
            let p = paraphrase(&c, &u, &mut rng).unwrap();
            assert_eq!(oracle_descriptiveness(&c, &scene, &u), oracle_descriptiveness(&p, &scene, &u));
            let objs = |c: &Caption| c.iter().filter_map(|t| u.object_of(t)).collect::<Vec<_>>();
            assert_eq!(objs(&c), objs(&p));
            let noise = |c: &Caption| {
                c.iter().filter(|t| u.token_kind(t) == Some(TokenKind::Noise)).cloned().collect::<Vec<_>>()
            };
            assert_eq!(noise(&c), noise(&p));
        }
    }

    #[test]
    fn seeds_usually_differ() {
        let u = universe();
        let c = render_caption(&u.templates[0], &[u.synonyms[1][0].clone(), u.synonyms[2][0].clone()]);
        let same = (0..200)
            .filter(|&s| {
                paraphrase(&c, &u, &mut stream(s, "a", 0)).unwrap()
                    == paraphrase(&c, &u, &mut stream(s, "b", 0)).unwrap()
            })
            .count();
        // collision needs matching template and both synonyms: 1/6 * 1/16
        assert!(same < 10, "{same}");
    }

    #[test]
    fn no_content_swaps_template_only() {
        let u = universe();
        let c: Caption = u.templates[0].prefix.clone();
        let p = paraphrase(&c, &u, &mut stream(1, "t", 0)).unwrap();
        assert!(p.iter().all(|t| u.token_kind(t) == Some(TokenKind::Template)));
        assert!(paraphrase::<String>(&[], &u, &mut stream(1, "t", 0)).is_err());
    }
}
