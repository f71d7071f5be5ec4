//! Running a grid of pairs x depths x schemes x seeds.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Mutex;

use rayon::prelude::*;

use super::{run_scheme, Domain, Scheme, SchemeRun, TransferContext, TransferTask};
use crate::error::{Error, Result};
use crate::eval::report::{pair_name, FailedRun, ResultTable, RunRecord};
use crate::network::io::{save_model, ModelInfo};
use crate::network::{PretrainTarget, TrainConfig, MAX_DEPTH};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSpec {
    /// (source, target) domain names.
    pub pairs: Vec<(String, String)>,
    pub schemes: Vec<Scheme>,
    pub depths: Vec<usize>,
    pub seeds: Vec<u64>,
    pub cfg: TrainConfig,
    pub mode: PretrainTarget,
}

impl MatrixSpec {
    pub fn validate(&self, domains: &BTreeMap<String, Domain>) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seed list is empty".into()));
        }
        if self.schemes.is_empty() || self.depths.is_empty() || self.pairs.is_empty() {
            return Err(Error::InvalidConfig("pairs, schemes and depths must be non-empty".into()));
        }
        if let Some(d) = self.depths.iter().find(|&&d| d == 0 || d > MAX_DEPTH) {
            return Err(Error::InvalidConfig(format!("depth {d} outside 1..={MAX_DEPTH}")));
        }
        for (s, t) in &self.pairs {
            for name in [s, t] {
                if !domains.contains_key(name) {
                    return Err(Error::InvalidConfig(format!("pair {s}->{t} names unknown corpus '{name}'")));
                }
            }
        }
        self.cfg.validate()
    }

    /// Every runnable cell in canonical order. Hybrid schemes are left out
    /// at depths they cannot use.
    pub fn cells(&self) -> Vec<CellId> {
        let mut out = Vec::new();
        for (source, target) in &self.pairs {
            for &depth in &self.depths {
                for &scheme in &self.schemes {
                    if depth < scheme.min_depth() {
                        continue;
                    }
                    for &seed in &self.seeds {
                        out.push(CellId {
                            source: source.clone(),
                            target: target.clone(),
                            depth,
                            scheme,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId {
    pub source: String,
    pub target: String,
    pub depth: usize,
    pub scheme: Scheme,
    pub seed: u64,
}

impl CellId {
    pub fn pair(&self) -> String {
        pair_name(&self.source, &self.target)
    }
}

pub struct MatrixOptions<'a> {
    /// Concurrent runs; 1 runs everything in order on the calling thread.
    pub jobs: usize,
    /// Cells to leave out, e.g. ones already in a results file.
    pub skip: Option<&'a (dyn Fn(&CellId) -> bool + Sync)>,
    /// Where to write each run's model, normalizer and sidecar.
    pub model_dir: Option<PathBuf>,
    /// Called after every finished run.
    pub on_record: Option<&'a (dyn Fn(&RunRecord) + Sync)>,
}

impl Default for MatrixOptions<'_> {
    fn default() -> Self {
        MatrixOptions {
            jobs: 1,
            skip: None,
            model_dir: None,
            on_record: None,
        }
    }
}

#[derive(Debug, Default)]
pub struct MatrixOutcome {
    pub table: ResultTable,
    pub executed: usize,
    pub skipped: usize,
}

fn save_run(dir: &std::path::Path, cell: &CellId, run: &SchemeRun, cfg: &TrainConfig) -> Result<()> {
    let sub = dir.join(format!("{}-{}", cell.source, cell.target));
    std::fs::create_dir_all(&sub).map_err(|e| Error::from(e).at(&sub))?;
    let stem = format!("d{}_{}_s{}", cell.depth, cell.scheme.code(), cell.seed);
    let norm_path = sub.join(format!("{stem}.norm.csv"));
    run.normalizer.save_csv(&norm_path)?;
    let info = ModelInfo {
        config: cfg.with_seed(cell.seed),
        seed: cell.seed,
        normalizer: Some(format!("{stem}.norm.csv")),
        scheme: Some(cell.scheme.code().to_string()),
        source: Some(cell.source.clone()),
        target: Some(cell.target.clone()),
    };
    save_model(sub.join(format!("{stem}.ddnn")), &run.stack, &info)
}

/// Runs every cell of `spec`. A failing run is recorded in the table's
/// failure list and the rest of the matrix continues.
pub fn run_task_matrix(
    domains: &BTreeMap<String, Domain>,
    spec: &MatrixSpec,
    opts: &MatrixOptions<'_>,
    ctx: &TransferContext,
) -> Result<MatrixOutcome> {
    spec.validate(domains)?;
    let all = spec.cells();
    let cells: Vec<CellId> = all
        .iter()
        .filter(|c| opts.skip.is_none_or(|skip| !skip(c)))
        .cloned()
        .collect();
    let skipped = all.len() - cells.len();
    let table = Mutex::new(ResultTable::new());

    let run_cell = |cell: &CellId| {
        let task = TransferTask {
            source: &domains[&cell.source],
            target: &domains[&cell.target],
            depth: cell.depth,
            cfg: spec.cfg.clone(),
            mode: spec.mode,
            seeds: vec![cell.seed],
        };
        let result = run_scheme(&task, cell.scheme, cell.seed, ctx).and_then(|run| {
            if let Some(dir) = &opts.model_dir {
                save_run(dir, cell, &run, &spec.cfg)?;
            }
            Ok(run)
        });
        match result {
            Ok(run) => {
                let record = RunRecord {
                    pair: cell.pair(),
                    depth: cell.depth,
                    scheme: cell.scheme,
                    seed: cell.seed,
                    accuracy_pct: run.accuracy,
                    pretrain_s: run.pretrain_s,
                    finetune_s: run.finetune_s,
                };
                log::info!(
                    "{} depth {} {} seed {}: {:.2}% (pre-train {:.1}s, fine-tune {:.1}s)",
                    record.pair,
                    record.depth,
                    record.scheme.heading(),
                    record.seed,
                    record.accuracy_pct,
                    record.pretrain_s,
                    record.finetune_s
                );
                if let Some(cb) = opts.on_record {
                    cb(&record);
                }
                table.lock().unwrap().push(record);
            }
            Err(e) => {
                log::error!("{} depth {} {} seed {} failed: {e}", cell.pair(), cell.depth, cell.scheme.heading(), cell.seed);
                table.lock().unwrap().push_failure(FailedRun {
                    pair: cell.pair(),
                    depth: cell.depth,
                    scheme: cell.scheme,
                    seed: cell.seed,
                    error: e.to_string(),
                });
            }
        }
    };

    if opts.jobs <= 1 {
        cells.iter().for_each(run_cell);
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start {} workers: {e}", opts.jobs)))?;
        pool.install(|| cells.par_iter().for_each(run_cell));
    }

    let mut table = table.into_inner().unwrap();
    table.sort();
    Ok(MatrixOutcome {
        table,
        executed: cells.len(),
        skipped,
    })
}
