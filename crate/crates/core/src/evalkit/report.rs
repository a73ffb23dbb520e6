use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_distribution, percentile_interval};
use super::features::encode_images;
use super::metrics::{Labels, Predictions};
use super::probe::{train_probe, ProbeConfig};
use super::tasks::TransferTask;
use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;
use crate::rng::{derive_seed, stream};
use crate::trainer::TrainedModel;

/// Point estimate with a confidence interval, all as fractions in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

/// `0.613, 0.002` renders as `61.3 ± 0.2`.
pub fn format_estimate(mean: f64, half_width: f64) -> String {
    format!("{:.1} ± {:.1}", 100.0 * mean, 100.0 * half_width)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task: String,
    #[serde(flatten)]
    pub estimate: Estimate,
    pub val_accuracy: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub per_task_accuracy: Vec<TaskScore>,
    pub mu_tx: Estimate,
}

impl ProbeReport {
    pub fn task(&self, name: &str) -> Option<&Estimate> {
        self.per_task_accuracy.iter().find(|t| t.task == name).map(|t| &t.estimate)
    }

    pub fn to_table(&self) -> String {
        let width = self.per_task_accuracy.iter().map(|t| t.task.len()).max().unwrap_or(0).max(4);
        let mut s = String::new();
        let _ = writeln!(s, "{:<width$}  accuracy", "task");
        for t in &self.per_task_accuracy {
            let _ = writeln!(s, "{:<width$}  {}", t.task, format_estimate(t.estimate.mean, t.estimate.half_width()));
        }
        let _ = writeln!(s, "{:<width$}  {}", "mu_tx", format_estimate(self.mu_tx.mean, self.mu_tx.half_width()));
        s
    }

    /// One JSON object per line: every task, then the aggregate.
    pub fn to_records(&self) -> Result<String> {
        let mut s = String::new();
        for t in &self.per_task_accuracy {
            s.push_str(&serde_json::to_string(t)?);
            s.push('\n');
        }
        s.push_str(&serde_json::to_string(&serde_json::json!({
            "task": "mu_tx",
            "mean": self.mu_tx.mean,
            "ci_low": self.mu_tx.ci_low,
            "ci_high": self.mu_tx.ci_high,
        }))?);
        s.push('\n');
        Ok(s)
    }
}

/// Test-set outcomes of every probe seed on one task, arranged for
/// resampling over (seed, example) pairs. Each pair contributes one outcome
/// per scored group; a group's parent is the class (multiclass) or label
/// (multilabel) whose balanced score it feeds.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledOutcomes {
    group_parent: Vec<usize>,
    parents: usize,
    rows: Vec<Vec<(usize, bool)>>,
}

impl PooledOutcomes {
    pub fn new(per_seed: &[Predictions], labels: &Labels) -> Result<Self> {
        let mut rows = Vec::new();
        let (group_parent, parents) = match labels {
            Labels::Multiclass { classes, .. } => ((0..*classes).collect(), *classes),
            Labels::Multilabel { labels: l, .. } => ((0..2 * l).map(|g| g / 2).collect(), *l),
        };
        for pred in per_seed {
            match (pred, labels) {
                (Predictions::Multiclass(p), Labels::Multiclass { y, .. }) if p.len() == y.len() => {
                    rows.extend(p.iter().zip(y).map(|(&a, &b)| vec![(b, a == b)]));
                }
                (Predictions::Multilabel { y: p, .. }, Labels::Multilabel { labels: l, y }) if p.len() == y.len() => {
                    for (pr, yr) in p.chunks_exact(*l).zip(y.chunks_exact(*l)) {
                        rows.push((0..*l).map(|j| (2 * j + yr[j] as usize, pr[j] == yr[j])).collect());
                    }
                }
                _ => return Err(Error::Data("predictions do not match labels".into())),
            }
        }
        if rows.is_empty() {
            return Err(Error::Data("no test outcomes".into()));
        }
        Ok(Self { group_parent, parents, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Balanced accuracy of the rows at `idx` (with repetition).
    pub fn score(&self, idx: impl IntoIterator<Item = usize>) -> f64 {
        let g = self.group_parent.len();
        let mut hit = vec![0usize; g];
        let mut tot = vec![0usize; g];
        for i in idx {
            for &(grp, ok) in &self.rows[i] {
                tot[grp] += 1;
                hit[grp] += ok as usize;
            }
        }
        let mut sum = vec![0.0; self.parents];
        let mut cnt = vec![0usize; self.parents];
        for grp in 0..g {
            if tot[grp] > 0 {
                let p = self.group_parent[grp];
                sum[p] += hit[grp] as f64 / tot[grp] as f64;
                cnt[p] += 1;
            }
        }
        let (mut total, mut present) = (0.0, 0usize);
        for p in 0..self.parents {
            if cnt[p] > 0 {
                total += sum[p] / cnt[p] as f64;
                present += 1;
            }
        }
        total / present as f64
    }

    pub fn point(&self) -> f64 {
        self.score(0..self.rows.len())
    }
}

/// Per-task and aggregate estimates by joint percentile bootstrap: each
/// replicate resamples every task's (seed, example) pairs independently and
/// averages the task scores for the aggregate.
pub fn summarize(
    names: &[String],
    outcomes: &[PooledOutcomes],
    level: f64,
    resamples: usize,
    seed: u64,
) -> Result<(Vec<Estimate>, Estimate)> {
    if outcomes.is_empty() || names.len() != outcomes.len() {
        return Err(Error::Data("need one outcome set per task".into()));
    }
    let mut rng = stream(seed, "report/bootstrap", 0);
    let mut per_task: Vec<Vec<f64>> = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        per_task.push(bootstrap_distribution(o.len(), resamples, &mut rng, |idx| o.score(idx.iter().copied())));
    }
    let points: Vec<f64> = outcomes.iter().map(|o| o.point()).collect();
    let estimate = |mean: f64, stats: &mut Vec<f64>| {
        let (lo, hi) = percentile_interval(stats, level);
        Estimate { mean, ci_low: lo.min(mean), ci_high: hi.max(mean) }
    };
    let mut agg: Vec<f64> =
        (0..resamples).map(|r| per_task.iter().map(|s| s[r]).sum::<f64>() / per_task.len() as f64).collect();
    let mu = points.iter().sum::<f64>() / points.len() as f64;
    let mu_tx = estimate(mu, &mut agg);
    let tasks = points.iter().zip(per_task.iter_mut()).map(|(&m, s)| estimate(m, s)).collect();
    Ok((tasks, mu_tx))
}

/// Linear-probe evaluation of a frozen model on every task of a suite.
pub fn evaluate(model: &TrainedModel, suite: &[TransferTask], cfg: &ProbeConfig, seed: u64) -> Result<ProbeReport> {
    evaluate_encoder(|x| encode_images(model, x), suite, cfg, seed)
}

/// [`evaluate`] for any frozen feature map.
pub fn evaluate_encoder<F>(encode: F, suite: &[TransferTask], cfg: &ProbeConfig, seed: u64) -> Result<ProbeReport>
where
    F: Fn(&DenseMatrix) -> Result<DenseMatrix>,
{
    cfg.validate()?;
    let mut outcomes = Vec::with_capacity(suite.len());
    let mut fits = Vec::with_capacity(suite.len());
    for (t, task) in suite.iter().enumerate() {
        let tx = encode(&task.train.images)?;
        let vx = encode(&task.val.images)?;
        let ex = encode(&task.test.images)?;
        let fit = train_probe(
            &tx,
            &task.train.labels,
            &vx,
            &task.val.labels,
            cfg,
            derive_seed(seed, "report/task", t as u64),
        )?;
        let preds: Vec<Predictions> = fit.probes.iter().map(|p| p.predict(&ex)).collect();
        outcomes.push(PooledOutcomes::new(&preds, &task.test.labels)?);
        fits.push((fit.val_accuracy, fit.probes[0].lr));
    }
    let names: Vec<String> = suite.iter().map(|t| t.spec.name.clone()).collect();
    let (tasks, mu_tx) = summarize(&names, &outcomes, cfg.ci_level, cfg.resamples, seed)?;
    Ok(ProbeReport {
        per_task_accuracy: names
            .into_iter()
            .zip(tasks)
            .zip(fits)
            .map(|((task, estimate), (val_accuracy, lr))| TaskScore { task, estimate, val_accuracy, lr })
            .collect(),
        mu_tx,
    })
}
