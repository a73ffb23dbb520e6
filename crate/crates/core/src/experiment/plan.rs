use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::captionops::FilterConfig;
use crate::error::{Error, Result};
use crate::evalkit::ProbeConfig;
use crate::objective::{ContrastiveMode, EncoderConfig};
use crate::rng::derive_seed;
use crate::synthworld::{AugmentPolicy, CaptionKnobs, DatasetSpec, UniverseConfig};
use crate::trainer::{default_config, desk_config, scaled_epochs, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    DatasetSize,
    Descriptiveness,
    VariabilityGrid,
    CaptionsPerImage,
    PairsVsCaptions,
    FilterIntervention,
    ParaphraseIntervention,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SweepAxis::DatasetSize => "dataset_size",
            SweepAxis::Descriptiveness => "descriptiveness",
            SweepAxis::VariabilityGrid => "variability_grid",
            SweepAxis::CaptionsPerImage => "captions_per_image",
            SweepAxis::PairsVsCaptions => "pairs_vs_captions",
            SweepAxis::FilterIntervention => "filter_intervention",
            SweepAxis::ParaphraseIntervention => "paraphrase_intervention",
        };
        f.write_str(s)
    }
}

/// A raw sweep value as written in a plan file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointValue {
    Int(u64),
    Float(f64),
    Text(String),
    Pair([u64; 2]),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterArm {
    /// The whole mixed-quality corpus.
    Unfiltered,
    /// Examples the caption filter keeps.
    Filtered,
    /// A random subset of the same size as the filtered one.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParaphraseArm {
    Original,
    Paraphrased,
}

/// A sweep value interpreted for its axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Point {
    Size(usize),
    Descriptiveness(f64),
    Variability { consistent: bool, complete: bool },
    Captions(usize),
    PairsCaptions { n: usize, k: usize },
    Filter(FilterArm),
    Paraphrase(ParaphraseArm),
}

impl Point {
    pub fn parse(axis: SweepAxis, value: &PointValue) -> Result<Point> {
        let bad = || Error::Config(format!("{value:?} is not a valid {axis} point"));
        let count = |v: &PointValue| match v {
            PointValue::Int(i) if *i > 0 => Ok(*i as usize),
            _ => Err(bad()),
        };
        let text = |v: &PointValue| match v {
            PointValue::Text(s) => Ok(s.trim().to_ascii_lowercase()),
            _ => Err(bad()),
        };
        Ok(match axis {
            SweepAxis::DatasetSize => Point::Size(count(value)?),
            SweepAxis::CaptionsPerImage => Point::Captions(count(value)?),
            SweepAxis::Descriptiveness => {
                let d = match value {
                    PointValue::Float(f) => *f,
                    PointValue::Int(i) => *i as f64,
                    _ => return Err(bad()),
                };
                if !(0.0..=1.0).contains(&d) {
                    return Err(bad());
                }
                Point::Descriptiveness(d)
            }
            SweepAxis::VariabilityGrid => {
                let s = text(value)?;
                let mut parts = s.split('+');
                let (a, b) = (parts.next().ok_or_else(bad)?, parts.next().ok_or_else(bad)?);
                if parts.next().is_some() {
                    return Err(bad());
                }
                let complete = match a {
                    "complete" => true,
                    "incomplete" => false,
                    _ => return Err(bad()),
                };
                let consistent = match b {
                    "consistent" => true,
                    "inconsistent" => false,
                    _ => return Err(bad()),
                };
                Point::Variability { consistent, complete }
            }
            SweepAxis::PairsVsCaptions => match value {
                PointValue::Pair([n, k]) if *n > 0 && *k > 0 => Point::PairsCaptions { n: *n as usize, k: *k as usize },
                _ => return Err(bad()),
            },
            SweepAxis::FilterIntervention => Point::Filter(match text(value)?.as_str() {
                "unfiltered" => FilterArm::Unfiltered,
                "filtered" => FilterArm::Filtered,
                "random" => FilterArm::Random,
                _ => return Err(bad()),
            }),
            SweepAxis::ParaphraseIntervention => Point::Paraphrase(match text(value)?.as_str() {
                "original" => ParaphraseArm::Original,
                "paraphrased" => ParaphraseArm::Paraphrased,
                _ => return Err(bad()),
            }),
        })
    }

    /// Label used in result rows and reports.
    pub fn label(&self) -> String {
        match self {
            Point::Size(n) => n.to_string(),
            Point::Descriptiveness(d) => d.to_string(),
            Point::Variability { consistent, complete } => format!(
                "{}+{}",
                if *complete { "complete" } else { "incomplete" },
                if *consistent { "consistent" } else { "inconsistent" }
            ),
            Point::Captions(k) => k.to_string(),
            Point::PairsCaptions { n, k } => format!("{n}x{k}"),
            Point::Filter(FilterArm::Unfiltered) => "unfiltered".into(),
            Point::Filter(FilterArm::Filtered) => "filtered".into(),
            Point::Filter(FilterArm::Random) => "random".into(),
            Point::Paraphrase(ParaphraseArm::Original) => "original".into(),
            Point::Paraphrase(ParaphraseArm::Paraphrased) => "paraphrased".into(),
        }
    }
}

/// Training regime named in a plan. A bare `clip_s` samples from every
/// caption the cell's dataset has.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanMode {
    Fixed(ContrastiveMode),
    ClipSAll,
}

impl PlanMode {
    pub fn resolve(self, captions_per_image: usize) -> ContrastiveMode {
        match self {
            PlanMode::Fixed(m) => m,
            PlanMode::ClipSAll => ContrastiveMode::ClipS(captions_per_image),
        }
    }
}

impl FromStr for PlanMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("clip_s") {
            return Ok(PlanMode::ClipSAll);
        }
        s.parse().map(PlanMode::Fixed)
    }
}

impl fmt::Display for PlanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanMode::Fixed(m) => write!(f, "{m}"),
            PlanMode::ClipSAll => f.write_str("clip_s"),
        }
    }
}

impl Serialize for PlanMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PlanMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainPreset {
    #[default]
    Desk,
    Paper,
}

/// Training settings shared by every cell; unset fields come from the
/// preset row for the cell's mode.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainBase {
    #[serde(default)]
    pub preset: TrainPreset,
    pub batch_size: Option<usize>,
    pub epochs: Option<u64>,
    pub warmup_epochs: Option<u64>,
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub temperature: Option<f64>,
    pub augment: Option<AugmentPolicy>,
    pub symmetric: Option<bool>,
    /// Scale epochs by `reference_n / n` for smaller datasets so every size
    /// takes the same number of steps.
    pub epoch_reference_n: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl TrainBase {
    pub fn resolve(&self, mode: ContrastiveMode, n: usize, seed: u64) -> TrainConfig {
        let mut c = match self.preset {
            TrainPreset::Desk => desk_config(mode),
            TrainPreset::Paper => default_config(mode),
        };
        if let Some(e) = self.epochs {
            c = c.with_epochs(e);
        }
        c.batch_size = self.batch_size.unwrap_or(c.batch_size);
        c.warmup_epochs = self.warmup_epochs.unwrap_or(c.warmup_epochs);
        c.lr = self.lr.unwrap_or(c.lr);
        c.weight_decay = self.weight_decay.unwrap_or(c.weight_decay);
        c.temperature = self.temperature.unwrap_or(c.temperature);
        c.augment = self.augment.unwrap_or(c.augment);
        c.symmetric = self.symmetric.unwrap_or(c.symmetric);
        if let Some(r) = self.epoch_reference_n {
            c.epochs = scaled_epochs(c.epochs, r, n);
        }
        c.seed = seed;
        c
    }
}

/// Encoder widths; input sizes come from the universe.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchBase {
    pub hidden: Option<Vec<usize>>,
    pub feature_dim: Option<usize>,
    pub text_hidden: Option<Vec<usize>>,
    pub text_feature_dim: Option<usize>,
    pub embed_dim: Option<usize>,
    #[serde(default)]
    pub learnable_temperature: bool,
}

impl ArchBase {
    pub fn resolve(&self, image_input_dim: usize, text_input_dim: usize) -> EncoderConfig {
        let d = EncoderConfig::desk(image_input_dim, text_input_dim);
        EncoderConfig {
            hidden: self.hidden.clone().unwrap_or(d.hidden),
            feature_dim: self.feature_dim.unwrap_or(d.feature_dim),
            text_hidden: self.text_hidden.clone().unwrap_or(d.text_hidden),
            text_feature_dim: self.text_feature_dim.unwrap_or(d.text_feature_dim),
            embed_dim: self.embed_dim.unwrap_or(d.embed_dim),
            learnable_temperature: self.learnable_temperature,
            ..d
        }
    }
}

/// Settings for the filtering and paraphrasing arms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionConfig {
    /// Descriptiveness of the low-quality half of the mixed corpus and of
    /// the filter's negative reference corpus.
    pub low_descriptiveness: f64,
    /// Size of each filter reference corpus.
    pub reference_size: usize,
    /// Captions per image after paraphrasing (the original plus the rest).
    pub paraphrase_captions: usize,
    #[serde(default)]
    pub filter: FilterConfig,
}

impl Default for InterventionConfig {
    fn default() -> Self {
        Self { low_descriptiveness: 0.1, reference_size: 5000, paraphrase_captions: 5, filter: FilterConfig::default() }
    }
}

fn default_dataset() -> DatasetSpec {
    DatasetSpec::new(4000, 1, CaptionKnobs::default(), 0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanBase {
    #[serde(default)]
    pub universe: UniverseConfig,
    #[serde(default = "default_dataset")]
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub train: TrainBase,
    #[serde(default)]
    pub arch: ArchBase,
    #[serde(default = "ProbeConfig::desk")]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub intervention: InterventionConfig,
}

impl Default for PlanBase {
    fn default() -> Self {
        Self {
            universe: UniverseConfig::default(),
            dataset: default_dataset(),
            train: TrainBase::default(),
            arch: ArchBase::default(),
            probe: ProbeConfig::desk(),
            intervention: InterventionConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub name: String,
    pub sweep_axis: SweepAxis,
    pub points: Vec<PointValue>,
    pub modes: Vec<PlanMode>,
    pub repeats: usize,
    #[serde(default)]
    pub base: PlanBase,
}

/// One (point, mode, repeat) run of a plan.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub id: String,
    pub point: Point,
    pub mode: ContrastiveMode,
    pub repeat: usize,
}

/// Seeds of one repeat, shared by every cell of that repeat so arms are
/// compared on the same draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RepeatSeeds {
    pub dataset: u64,
    pub train: u64,
    pub probe: u64,
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Overrides every root seed of the plan.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base.dataset.seed = seed;
        self.base.train.seed = seed;
        self.base.intervention.filter.seed = seed;
        self
    }

    pub fn repeat_seeds(&self, repeat: usize) -> RepeatSeeds {
        let r = repeat as u64;
        RepeatSeeds {
            dataset: derive_seed(self.base.dataset.seed, "plan/dataset", r),
            train: derive_seed(self.base.train.seed, "plan/train", r),
            probe: derive_seed(self.base.train.seed, "plan/probe", r),
        }
    }

    pub fn parsed_points(&self) -> Result<Vec<Point>> {
        self.points.iter().map(|v| Point::parse(self.sweep_axis, v)).collect()
    }

    /// Captions per image of a point's training set.
    pub fn captions_for(&self, point: &Point) -> usize {
        match point {
            Point::Captions(k) | Point::PairsCaptions { k, .. } => *k,
            Point::Paraphrase(ParaphraseArm::Paraphrased) => self.base.intervention.paraphrase_captions,
            Point::Paraphrase(ParaphraseArm::Original) | Point::Filter(_) => 1,
            _ => self.base.dataset.captions_per_image,
        }
    }

    pub fn examples_for(&self, point: &Point) -> usize {
        match point {
            Point::Size(n) | Point::PairsCaptions { n, .. } => *n,
            _ => self.base.dataset.n,
        }
    }

    /// Cells in execution order: points, then modes, then repeats. Cells
    /// that would repeat another cell's run bit for bit are left out:
    /// sampling among one caption is plain CLIP, complete and consistent
    /// captions make every caption of an image the same bag of words, and
    /// CLIP on paraphrased data only ever sees the original caption.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let points = self.parsed_points()?;
        let has_clip = self.modes.contains(&PlanMode::Fixed(ContrastiveMode::Clip));
        let mut cells = Vec::new();
        for (pi, point) in points.iter().enumerate() {
            let k = self.captions_for(point);
            for plan_mode in &self.modes {
                let mode = plan_mode.resolve(k);
                let redundant = match (point, mode) {
                    (_, ContrastiveMode::ClipS(1)) => has_clip,
                    (Point::Variability { consistent: true, complete: true }, ContrastiveMode::ClipS(_)) => has_clip,
                    (Point::Paraphrase(ParaphraseArm::Paraphrased), ContrastiveMode::Clip) => true,
                    _ => false,
                };
                if redundant {
                    continue;
                }
                for repeat in 0..self.repeats {
                    cells.push(Cell {
                        id: format!("p{pi}-{}-r{repeat}", mode.to_string().replace(['(', ')'], "")),
                        point: *point,
                        mode,
                        repeat,
                    });
                }
            }
        }
        Ok(cells)
    }

    pub fn dataset_spec(&self, point: &Point, seeds: RepeatSeeds) -> DatasetSpec {
        let mut spec = self.base.dataset.clone();
        spec.seed = seeds.dataset;
        spec.n = self.examples_for(point);
        spec.captions_per_image = self.captions_for(point);
        match point {
            Point::Descriptiveness(d) => spec.knobs.descriptiveness = *d,
            Point::Variability { consistent, complete } => {
                spec.knobs.consistent = *consistent;
                spec.knobs.complete = *complete;
                spec.knobs.fixed_template = *consistent;
            }
            _ => {}
        }
        spec
    }

    /// Checks everything that can be checked without training: point types,
    /// every cell's dataset, training and probe settings.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return Err(Error::Config(format!("plan name {:?} is not a valid directory name", self.name)));
        }
        if self.points.is_empty() {
            return Err(Error::Config("plan has no points".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("plan has no modes".into()));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        let universe = crate::synthworld::ObjectUniverse::generate(self.base.universe)
            .map_err(|e| Error::Config(e.to_string()))?;
        self.base.probe.validate()?;
        let iv = &self.base.intervention;
        if !(0.0..=1.0).contains(&iv.low_descriptiveness) || iv.reference_size == 0 || iv.paraphrase_captions == 0 {
            return Err(Error::Config("intervention settings out of range".into()));
        }
        let seeds = self.repeat_seeds(0);
        let arch = self.base.arch.resolve(universe.embed_dim(), universe.vocabulary().len());
        for cell in self.cells()? {
            let spec = self.dataset_spec(&cell.point, seeds);
            spec.validate(&universe).map_err(|e| Error::Config(format!("cell {}: {e}", cell.id)))?;
            let tc = self.base.train.resolve(cell.mode, spec.n, seeds.train);
            tc.validate().map_err(|e| Error::Config(format!("cell {}: {e}", cell.id)))?;
            if let ContrastiveMode::ClipS(k) = cell.mode {
                if k > spec.captions_per_image {
                    return Err(Error::Config(format!(
                        "cell {}: {} needs {k} captions per image, dataset has {}",
                        cell.id, cell.mode, spec.captions_per_image
                    )));
                }
            }
            if tc.batch_size > spec.n {
                return Err(Error::Config(format!("cell {}: batch larger than dataset", cell.id)));
            }
        }
        if arch.feature_dim == 0 || arch.embed_dim == 0 {
            return Err(Error::Config("encoder widths must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(axis: &str, points: &str, modes: &str) -> Result<ExperimentPlan> {
        ExperimentPlan::from_toml(&format!(
            "name = \"t\"\nsweep_axis = \"{axis}\"\npoints = {points}\nmodes = {modes}\nrepeats = 2\n\
             [base.dataset]\nn = 256\ncaptions_per_image = 5\nimage_noise_sigma = 0.3\nseed = 1\n\
             [base.dataset.knobs]\ndescriptiveness = 1.0\nconsistent = true\ncomplete = true\n\
             mention_prob = 0.5\nfixed_template = true\n"
        ))
    }

    #[test]
    fn variability_grid_has_five_rows() {
        let p = plan(
            "variability_grid",
            r#"["complete+consistent", "incomplete+inconsistent", "incomplete+consistent"]"#,
            r#"["clip", "clip_s"]"#,
        )
        .unwrap();
        let rows: Vec<(String, String)> = p
            .cells()
            .unwrap()
            .iter()
            .filter(|c| c.repeat == 0)
            .map(|c| (c.point.label(), c.mode.to_string()))
            .collect();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[0], ("complete+consistent".into(), "clip".into()));
        assert_eq!(rows[2], ("incomplete+inconsistent".into(), "clip_s(5)".into()));
    }

    #[test]
    fn cardinality() {
        let mut p = plan("dataset_size", "[256]", r#"["simclr"]"#).unwrap();
        p.repeats = 1;
        assert_eq!(p.cells().unwrap().len(), 1);
    }

    #[test]
    fn unknown_keys_and_bad_points_are_config_errors() {
        let bad = ExperimentPlan::from_toml(
            "name = \"t\"\nsweep_axis = \"dataset_size\"\npoints = [100]\nmodes = [\"clip\"]\nrepeats = 1\ncolour = 1\n",
        );
        assert!(matches!(bad, Err(Error::Config(_))));
        assert!(matches!(plan("descriptiveness", "[1.5]", r#"["clip"]"#), Err(Error::Config(_))));
        assert!(matches!(plan("dataset_size", "[\"big\"]", r#"["clip"]"#), Err(Error::Config(_))));
        assert!(matches!(plan("dataset_size", "[]", r#"["clip"]"#), Err(Error::Config(_))));
        assert!(matches!(plan("captions_per_image", "[2]", r#"["clip_s(5)"]"#), Err(Error::Config(_))));
    }

    #[test]
    fn toml_roundtrip() {
        let p = plan("pairs_vs_captions", "[[256, 1], [128, 2]]", r#"["clip_s"]"#).unwrap();
        assert_eq!(ExperimentPlan::from_toml(&p.to_toml().unwrap()).unwrap(), p);
        let cells = p.cells().unwrap();
        assert_eq!(cells[0].mode, ContrastiveMode::ClipS(1));
        assert_eq!(cells[2].mode, ContrastiveMode::ClipS(2));
    }

    #[test]
    fn epoch_scaling() {
        let t = TrainBase { epoch_reference_n: Some(4000), epochs: Some(20), ..TrainBase::default() };
        assert_eq!(t.resolve(ContrastiveMode::Clip, 1000, 0).epochs, 80);
        assert_eq!(t.resolve(ContrastiveMode::Clip, 8000, 0).epochs, 20);
    }
}
