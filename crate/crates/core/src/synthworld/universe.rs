use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numkit::{l2_normalize, DenseMatrix};
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniverseConfig {
    pub num_objects: usize,
    pub embed_dim: usize,
    pub synonyms_per_object: usize,
    pub num_templates: usize,
    pub noise_vocab_size: usize,
    pub seed: u64,
}

impl Default for UniverseConfig {
    fn default() -> Self {
        Self {
            num_objects: 64,
            embed_dim: 32,
            synonyms_per_object: 4,
            num_templates: 6,
            noise_vocab_size: 192,
            seed: 0x5eed,
        }
    }
}

/// Caption frame: object phrases go between `prefix` and `suffix`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub prefix: Vec<String>,
    pub suffix: Vec<String>,
}

const TEMPLATE_WORDS: &[(&[&str], &[&str])] = &[
    (&["a", "photo", "of"], &[]),
    (&["i", "see"], &[]),
    (&["there", "is"], &["here"]),
    (&["an", "image", "showing"], &[]),
    (&[], &["together"]),
    (&["a", "picture", "with"], &["in", "it"]),
    (&["look", "at"], &["over", "there"]),
    (&["this", "shows"], &["nearby"]),
];

pub const MAX_TEMPLATES: usize = TEMPLATE_WORDS.len();

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Synonym { object: usize, index: usize },
    Noise,
    Template,
}

/// The fixed world that scenes, images and captions are drawn from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObjectUniverse {
    pub config: UniverseConfig,
    pub object_embeddings: DenseMatrix,
    pub synonyms: Vec<Vec<String>>,
    pub templates: Vec<Template>,
    pub noise_vocab: Vec<String>,
    #[serde(skip)]
    kinds: HashMap<String, TokenKind>,
    #[serde(skip)]
    vocab: Vec<String>,
}

impl PartialEq for ObjectUniverse {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.object_embeddings == other.object_embeddings
            && self.synonyms == other.synonyms
            && self.templates == other.templates
            && self.noise_vocab == other.noise_vocab
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

fn pseudo_word(rng: &mut impl Rng, syllables: usize) -> String {
    let mut w = String::with_capacity(syllables * 2 + 1);
    for _ in 0..syllables {
        w.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
        w.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
    }
    w
}

impl ObjectUniverse {
    pub fn generate(config: UniverseConfig) -> Result<Self> {
        if config.num_objects == 0 || config.embed_dim == 0 {
            return Err(Error::Parameter("universe needs objects and dimensions".into()));
        }
        if config.synonyms_per_object == 0 {
            return Err(Error::Parameter("each object needs at least one synonym".into()));
        }
        if config.num_templates == 0 || config.num_templates > MAX_TEMPLATES {
            return Err(Error::Parameter(format!("num_templates must be in 1..={MAX_TEMPLATES}")));
        }
        if config.noise_vocab_size == 0 {
            return Err(Error::Parameter("noise vocabulary must be non-empty".into()));
        }

        let mut rng = stream(config.seed, "universe/embeddings", 0);
        let mut emb = DenseMatrix::zeros(config.num_objects, config.embed_dim);
        for r in 0..config.num_objects {
            let raw: Vec<f64> = (0..config.embed_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let (unit, _) = l2_normalize(&raw)?;
            emb.row_mut(r).copy_from_slice(&unit);
        }

        let templates: Vec<Template> = TEMPLATE_WORDS[..config.num_templates]
            .iter()
            .map(|(p, s)| Template {
                prefix: p.iter().map(|w| w.to_string()).collect(),
                suffix: s.iter().map(|w| w.to_string()).collect(),
            })
            .collect();

        let mut taken: HashSet<String> =
            TEMPLATE_WORDS.iter().flat_map(|(p, s)| p.iter().chain(s.iter())).map(|w| w.to_string()).collect();
        let mut rng = stream(config.seed, "universe/words", 0);
        let mut fresh = |syllables: usize, rng: &mut crate::rng::StreamRng| loop {
            let w = pseudo_word(rng, syllables);
            if taken.insert(w.clone()) {
                break w;
            }
        };
        let synonyms: Vec<Vec<String>> = (0..config.num_objects)
            .map(|_| (0..config.synonyms_per_object).map(|_| fresh(2, &mut rng)).collect())
            .collect();
        let noise_vocab: Vec<String> = (0..config.noise_vocab_size).map(|_| fresh(3, &mut rng)).collect();

        let mut u = Self {
            config,
            object_embeddings: emb,
            synonyms,
            templates,
            noise_vocab,
            kinds: HashMap::new(),
            vocab: Vec::new(),
        };
        u.index();
        Ok(u)
    }

    /// Rebuild lookup tables; call after deserializing.
    pub fn index(&mut self) {
        let mut kinds = HashMap::new();
        let mut vocab = Vec::new();
        let mut push = |w: &String, k: TokenKind, vocab: &mut Vec<String>| {
            if kinds.insert(w.clone(), k).is_none() {
                vocab.push(w.clone());
            }
        };
        for t in &self.templates {
            for w in t.prefix.iter().chain(&t.suffix) {
                push(w, TokenKind::Template, &mut vocab);
            }
        }
        for (object, syns) in self.synonyms.iter().enumerate() {
            for (index, w) in syns.iter().enumerate() {
                push(w, TokenKind::Synonym { object, index }, &mut vocab);
            }
        }
        for w in &self.noise_vocab {
            push(w, TokenKind::Noise, &mut vocab);
        }
        self.kinds = kinds;
        self.vocab = vocab;
    }

    pub fn num_objects(&self) -> usize {
        self.config.num_objects
    }

    pub fn embed_dim(&self) -> usize {
        self.config.embed_dim
    }

    pub fn embedding(&self, object: usize) -> &[f64] {
        self.object_embeddings.row(object)
    }

    pub fn token_kind(&self, token: &str) -> Option<TokenKind> {
        self.kinds.get(token).copied()
    }

    /// Object a token names, if it is a synonym of one.
    pub fn object_of(&self, token: &str) -> Option<usize> {
        match self.token_kind(token) {
            Some(TokenKind::Synonym { object, .. }) => Some(object),
            _ => None,
        }
    }

    /// All known tokens in a fixed order: template words, synonyms, noise.
    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    pub fn token_index(&self, token: &str) -> Option<usize> {
        // vocab is small; a second map is not worth keeping in sync
        self.kinds.get(token)?;
        self.vocab.iter().position(|w| w == token)
    }

    /// Stable content hash (hex SHA-256).
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.config).expect("config serializes"));
        for v in self.object_embeddings.data() {
            h.update(v.to_le_bytes());
        }
        for w in self.synonyms.iter().flatten().chain(&self.noise_vocab) {
            h.update(w.as_bytes());
            h.update([0]);
        }
        for t in &self.templates {
            for w in t.prefix.iter().chain(&t.suffix) {
                h.update(w.as_bytes());
                h.update([0]);
            }
            h.update([1]);
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Maps tokens to bag-of-words positions. Built once per universe; unknown
/// tokens are ignored at featurization time.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(universe: &ObjectUniverse) -> Self {
        Self { index: universe.vocabulary().iter().enumerate().map(|(i, w)| (w.clone(), i)).collect() }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Mean one-hot encoding of a caption, written into `out`.
    pub fn bag_into<S: AsRef<str>>(&self, caption: &[S], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let known: Vec<usize> = caption.iter().filter_map(|t| self.get(t.as_ref())).collect();
        if known.is_empty() {
            return;
        }
        let w = 1.0 / known.len() as f64;
        for i in known {
            out[i] += w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabularies_are_disjoint() {
        let u = ObjectUniverse::generate(UniverseConfig::default()).unwrap();
        let mut seen = HashSet::new();
        for w in u.synonyms.iter().flatten() {
            assert!(seen.insert(w.clone()), "duplicate synonym {w}");
        }
        for w in &u.noise_vocab {
            assert!(seen.insert(w.clone()), "noise token collides: {w}");
        }
        for t in &u.templates {
            for w in t.prefix.iter().chain(&t.suffix) {
                assert!(!seen.contains(w));
            }
        }
        assert_eq!(
            u.vocabulary().len(),
            seen.len()
                + u.templates.iter().flat_map(|t| t.prefix.iter().chain(&t.suffix)).collect::<HashSet<_>>().len()
        );
    }

    #[test]
    fn embeddings_are_unit_rows_and_deterministic() {
        let a = ObjectUniverse::generate(UniverseConfig::default()).unwrap();
        let b = ObjectUniverse::generate(UniverseConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.content_hash(), b.content_hash());
        for r in a.object_embeddings.iter_rows() {
            assert!((crate::numkit::norm(r) - 1.0).abs() < 1e-12);
        }
        let c = ObjectUniverse::generate(UniverseConfig { seed: 1, ..UniverseConfig::default() }).unwrap();
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn token_kinds() {
        let u = ObjectUniverse::generate(UniverseConfig::default()).unwrap();
        assert_eq!(u.object_of(&u.synonyms[5][2]), Some(5));
        assert_eq!(u.token_kind(&u.noise_vocab[0]), Some(TokenKind::Noise));
        assert_eq!(u.token_kind("photo"), Some(TokenKind::Template));
        assert_eq!(u.token_kind("zzzz"), None);
    }

    #[test]
    fn bag_of_words_is_a_mean() {
        let u = ObjectUniverse::generate(UniverseConfig::default()).unwrap();
        let v = Vocabulary::new(&u);
        let mut out = vec![0.0; v.len()];
        v.bag_into(&["a", "photo", "a", "unknown"], &mut out);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((out[v.get("a").unwrap()] - 2.0 / 3.0).abs() < 1e-15);
    }
}
