use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::plan::{Cell, ExperimentPlan, FilterArm, ParaphraseArm, Point, RepeatSeeds};
use crate::captionops::{filter_dataset, paraphrase_dataset, train_filter, FilterConfig};
use crate::error::{Error, Result};
use crate::evalkit::{build_suite, evaluate, ProbeReport, TransferTask, SUITE_VERSION};
use crate::rng::{derive_seed, stream};
use crate::synthworld::{
    build_dataset, hex, recaption, CaptionKnobs, DatasetSpec, Example, ObjectUniverse, Vocabulary,
};
use crate::trainer::train;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// One finished cell. Accuracies are fractions in [0, 1]; a failed cell has
/// no scores and carries its error message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub plan: String,
    pub axis: String,
    pub axis_value: String,
    pub mode: String,
    pub repeat: usize,
    pub seed: u64,
    pub status: CellStatus,
    pub mu_tx: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub train_size: usize,
    pub wall_clock_s: f64,
    pub error: Option<String>,
}

/// Contents of a cell file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: String,
    pub row: ResultRow,
    pub report: Option<ProbeReport>,
    pub loss_curve: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub plan: String,
    pub plan_sha256: String,
    pub crate_version: String,
    pub suite_version: u32,
    pub cells: usize,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub workers: usize,
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug)]
pub struct PlanRun {
    pub dir: PathBuf,
    /// Every cell of the plan, in plan order.
    pub rows: Vec<ResultRow>,
    /// Cells trained by this call (the rest came from the ledger).
    pub executed: usize,
}

const LEDGER: &str = "ledger.jsonl";

#[derive(Serialize, Deserialize)]
struct LedgerEntry {
    cell: String,
    file: String,
}

pub fn plan_dir(plan: &ExperimentPlan, out_dir: &Path) -> PathBuf {
    out_dir.join(&plan.name)
}

/// Ids of cells the ledger records as done. A torn last line (a crash
/// mid-append) is ignored; a torn line anywhere else is a format error.
pub fn read_ledger(dir: &Path) -> Result<Vec<String>> {
    let path = dir.join(LEDGER);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut ids = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        match serde_json::from_str::<LedgerEntry>(line) {
            Ok(e) => ids.push(e.cell),
            Err(_) if i + 1 == lines.len() && !complete => {
                log::warn!("ignoring torn ledger line in {}", path.display());
            }
            Err(e) => return Err(Error::Format { path: Some(path), message: format!("line {}: {e}", i + 1) }),
        }
    }
    Ok(ids)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(parent) = path.parent() {
        if let Ok(d) = File::open(parent) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

fn load_cell(dir: &Path, id: &str) -> Result<CellRecord> {
    let path = dir.join("cells").join(format!("{id}.json"));
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format { path: Some(path), message: e.to_string() })
}

fn prepare_dir(plan: &ExperimentPlan, dir: &Path, cells: usize) -> Result<()> {
    fs::create_dir_all(dir.join("cells"))?;
    let toml = plan.to_toml()?;
    let manifest = Manifest {
        plan: plan.name.clone(),
        plan_sha256: hex(&Sha256::digest(toml.as_bytes())),
        crate_version: env!("CARGO_PKG_VERSION").into(),
        suite_version: SUITE_VERSION,
        cells,
    };
    let mpath = dir.join("manifest.json");
    if mpath.exists() {
        let old: Manifest = serde_json::from_str(&fs::read_to_string(&mpath)?)?;
        if old.plan_sha256 != manifest.plan_sha256 || old.suite_version != manifest.suite_version {
            return Err(Error::Config(format!(
                "{} holds results of a different plan; use a fresh output directory",
                dir.display()
            )));
        }
        return Ok(());
    }
    write_atomic(&dir.join("plan.toml"), toml.as_bytes())?;
    write_atomic(&mpath, &serde_json::to_vec_pretty(&manifest)?)
}

struct Shared<'a> {
    plan: &'a ExperimentPlan,
    universe: ObjectUniverse,
    vocab: Vocabulary,
    suite: Vec<TransferTask>,
}

/// Training set of a cell.
pub fn cell_dataset(
    plan: &ExperimentPlan,
    universe: &ObjectUniverse,
    point: &Point,
    seeds: RepeatSeeds,
) -> Result<Vec<Example>> {
    let spec = plan.dataset_spec(point, seeds);
    match point {
        Point::Filter(arm) => filter_arm(plan, universe, &spec, *arm),
        Point::Paraphrase(arm) => {
            let single = DatasetSpec { captions_per_image: 1, ..spec.clone() };
            let ds = build_dataset(&single, universe)?;
            match arm {
                ParaphraseArm::Original => Ok(ds),
                ParaphraseArm::Paraphrased => paraphrase_dataset(
                    &ds,
                    universe,
                    spec.captions_per_image,
                    derive_seed(spec.seed, "plan/paraphrase", 0),
                ),
            }
        }
        _ => build_dataset(&spec, universe),
    }
}

fn filter_arm(
    plan: &ExperimentPlan,
    universe: &ObjectUniverse,
    spec: &DatasetSpec,
    arm: FilterArm,
) -> Result<Vec<Example>> {
    let iv = &plan.base.intervention;
    let low = CaptionKnobs { descriptiveness: iv.low_descriptiveness, ..spec.knobs };
    let ds = build_dataset(spec, universe)?;
    let half = spec.n / 2;
    let noisy = recaption(&ds[half..], universe, &low, 1, derive_seed(spec.seed, "plan/recaption", 0));
    let mixed: Vec<Example> = ds[..half].iter().cloned().chain(noisy).collect();
    if arm == FilterArm::Unfiltered {
        return Ok(mixed);
    }

    let reference = |knobs: CaptionKnobs, tag: &str| -> Result<Vec<Vec<String>>> {
        let rs = DatasetSpec {
            n: iv.reference_size,
            captions_per_image: 1,
            knobs,
            seed: derive_seed(spec.seed, tag, 0),
            ..spec.clone()
        };
        Ok(build_dataset(&rs, universe)?.into_iter().map(|mut e| e.captions.swap_remove(0)).collect())
    };
    let pos = reference(spec.knobs, "plan/filter-positive")?;
    let neg = reference(low, "plan/filter-negative")?;
    let cfg = FilterConfig { seed: derive_seed(iv.filter.seed, "plan/filter", spec.seed), ..iv.filter.clone() };
    let fit = train_filter(&pos, &neg, &cfg)?;
    let kept = filter_dataset(&fit.model, &mixed);
    log::info!("filter held-out accuracy {:.3}, kept {} of {}", fit.heldout_accuracy, kept.len(), mixed.len());
    if arm == FilterArm::Filtered {
        return Ok(kept);
    }
    let mut idx: Vec<usize> = (0..mixed.len()).collect();
    idx.shuffle(&mut stream(spec.seed, "plan/random-subset", 0));
    let mut subset = idx[..kept.len()].to_vec();
    subset.sort_unstable();
    Ok(subset.into_iter().map(|i| mixed[i].clone()).collect())
}

fn run_cell(shared: &Shared, cell: &Cell) -> CellRecord {
    let plan = shared.plan;
    let seeds = plan.repeat_seeds(cell.repeat);
    let start = Instant::now();
    let mut row = ResultRow {
        plan: plan.name.clone(),
        axis: plan.sweep_axis.to_string(),
        axis_value: cell.point.label(),
        mode: cell.mode.to_string(),
        repeat: cell.repeat,
        seed: seeds.train,
        status: CellStatus::Failed,
        mu_tx: None,
        ci_low: None,
        ci_high: None,
        train_size: 0,
        wall_clock_s: 0.0,
        error: None,
    };
    let mut loss_curve = Vec::new();
    let outcome = (|| -> Result<ProbeReport> {
        let ds = cell_dataset(plan, &shared.universe, &cell.point, seeds)?;
        row.train_size = ds.len();
        let tc = plan.base.train.resolve(cell.mode, ds.len(), seeds.train);
        let arch = plan.base.arch.resolve(shared.universe.embed_dim(), shared.vocab.len());
        let model = train(&ds, &tc, &arch, &shared.vocab)?;
        loss_curve = model.loss_curve.clone();
        evaluate(&model, &shared.suite, &plan.base.probe, seeds.probe)
    })();
    row.wall_clock_s = start.elapsed().as_secs_f64();
    let report = match outcome {
        Ok(r) => {
            row.status = CellStatus::Ok;
            row.mu_tx = Some(r.mu_tx.mean);
            row.ci_low = Some(r.mu_tx.ci_low);
            row.ci_high = Some(r.mu_tx.ci_high);
            Some(r)
        }
        Err(e) => {
            log::warn!("cell {} failed: {e}", cell.id);
            row.error = Some(e.to_string());
            None
        }
    };
    CellRecord { cell: cell.id.clone(), row, report, loss_curve }
}

/// Runs every cell not yet in the plan's ledger and returns all rows in
/// plan order. Results go to `<out_dir>/<plan name>/`: the plan, a
/// manifest, one file per cell and the ledger of finished cells.
pub fn run_plan(plan: &ExperimentPlan, opts: &RunOptions) -> Result<PlanRun> {
    plan.validate()?;
    if opts.workers == 0 {
        return Err(Error::Config("workers must be >= 1".into()));
    }
    let cells = plan.cells()?;
    let dir = plan_dir(plan, &opts.out_dir);
    prepare_dir(plan, &dir, cells.len())?;
    let done = read_ledger(&dir)?;
    let todo: Vec<&Cell> = cells.iter().filter(|c| !done.contains(&c.id)).collect();

    if !todo.is_empty() {
        let universe = ObjectUniverse::generate(plan.base.universe)?;
        let shared = Shared { plan, vocab: Vocabulary::new(&universe), suite: build_suite(&universe)?, universe };
        let ledger = Mutex::new(OpenOptions::new().create(true).append(true).open(dir.join(LEDGER))?);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        let written: Vec<Result<()>> = pool.install(|| {
            use rayon::prelude::*;
            todo.par_iter()
                .map(|cell| {
                    let record = run_cell(&shared, cell);
                    let file = format!("cells/{}.json", cell.id);
                    write_atomic(&dir.join(&file), &serde_json::to_vec_pretty(&record)?)?;
                    let line = serde_json::to_string(&LedgerEntry { cell: cell.id.clone(), file })?;
                    let mut f = ledger.lock().unwrap_or_else(|p| p.into_inner());
                    writeln!(f, "{line}")?;
                    f.sync_data()?;
                    Ok(())
                })
                .collect()
        });
        written.into_iter().collect::<Result<Vec<()>>>()?;
    }

    let rows = cells.iter().map(|c| load_cell(&dir, &c.id).map(|r| r.row)).collect::<Result<Vec<_>>>()?;
    Ok(PlanRun { dir, rows, executed: todo.len() })
}

/// Rows of every finished cell of a plan directory, in plan order.
pub fn load_rows(dir: &Path) -> Result<Vec<ResultRow>> {
    let plan = ExperimentPlan::load(&dir.join("plan.toml"))?;
    let done = read_ledger(dir)?;
    plan.cells()?.iter().filter(|c| done.contains(&c.id)).map(|c| load_cell(dir, &c.id).map(|r| r.row)).collect()
}
