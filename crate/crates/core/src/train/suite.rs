//! Several configurations on one cohort and one split.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::cohort::Cohort;
use crate::fusion::ModalitySet;
use crate::train::config::RunConfig;
use crate::train::report::{format_table, RunReport};
use crate::train::run::train;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub name: String,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    pub fn table(&self) -> String {
        let rows: Vec<(String, Result<RunReport, String>)> = self
            .rows
            .iter()
            .map(|r| {
                let res = match (&r.report, &r.error) {
                    (Some(rep), _) => Ok(rep.clone()),
                    (None, e) => Err(e.clone().unwrap_or_default()),
                };
                (r.name.clone(), res)
            })
            .collect();
        format_table(&rows)
    }

    pub fn get(&self, name: &str) -> Option<&RunReport> {
        self.rows
            .iter()
            .find(|r| r.name == name)
            .and_then(|r| r.report.as_ref())
    }
}

/// Runs every config; a failing run is recorded and the rest continue.
///
/// All runs see the same samples (those complete for the union of the
/// configured modalities) and must agree on the split seed and ratios.
/// Up to `threads` runs execute concurrently; results do not depend on it.
pub fn run_experiment_suite(configs: &[RunConfig], cohort: &Cohort, threads: usize) -> SuiteReport {
    if configs.is_empty() {
        return SuiteReport::default();
    }
    let mut union = ModalitySet::default();
    for c in configs {
        for m in c.modalities.iter() {
            union.insert(m);
        }
    }
    let mut shared = cohort.clone();
    shared.retain_complete(union);
    let reference = (configs[0].split_seed, configs[0].split_ratios);

    let run_one = |cfg: &RunConfig| -> Result<RunReport, String> {
        if (cfg.split_seed, cfg.split_ratios) != reference {
            return Err("split_seed and split_ratios must match across a suite".into());
        }
        train(cfg, &shared)
            .map(|o| o.report)
            .map_err(|e| e.to_string())
    };

    let results: Vec<Mutex<Option<Result<RunReport, String>>>> =
        configs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = threads.clamp(1, configs.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= configs.len() {
                    break;
                }
                let r = run_one(&configs[i]);
                if let Err(e) = &r {
                    log::warn!("run `{}` failed: {e}", configs[i].name);
                }
                *results[i].lock().unwrap() = Some(r);
            });
        }
    });
    let rows = configs
        .iter()
        .zip(results)
        .map(|(c, r)| {
            let r = r.into_inner().unwrap().expect("every run finishes");
            match r {
                Ok(rep) => SuiteRow {
                    name: c.name.clone(),
                    report: Some(rep),
                    error: None,
                },
                Err(e) => SuiteRow {
                    name: c.name.clone(),
                    report: None,
                    error: Some(e),
                },
            }
        })
        .collect();
    SuiteReport { rows }
}
