use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::blending::LambdaSelection;
use crate::fusion::{Modality, ModalitySet};
use crate::metrics::ChannelMetrics;
use crate::survival::HeadKind;
use crate::train::config::FusionMode;
use crate::train::loss::LossBreakdown;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    /// Batch-size-weighted means over the epoch's optimised batches.
    pub train: LossBreakdown,
    pub val_surv: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub best_val_loss: Option<f64>,
    /// CoxPH batches without events.
    pub skipped_batches: usize,
    pub trace: Vec<EpochTrace>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainSummary {
    pub modality: Modality,
    pub fit: FitSummary,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GateValues {
    pub cov: Option<Vec<f64>>,
    pub ge: Option<Vec<f64>>,
}

/// Metrics on one evaluation split. Verbalized and combined channels are
/// absent without text or without any extractable teacher probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub n: usize,
    pub hidden: ChannelMetrics,
    pub verbalized: Option<ChannelMetrics>,
    pub combined: Option<ChannelMetrics>,
    pub missing_verbalized: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub head: HeadKind,
    pub fusion: FusionMode,
    pub modalities: ModalitySet,
    pub seed: u64,
    pub split_seed: u64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub fit: FitSummary,
    pub pretrain: Vec<PretrainSummary>,
    pub gates: GateValues,
    pub lambda: Option<LambdaSelection>,
    pub text_loss_samples: usize,
    /// Training samples removed from the text loss by calibration correction.
    pub masked_samples: usize,
    pub validation: ChannelReport,
    pub test: ChannelReport,
}

fn cell(m: Option<&ChannelMetrics>) -> (String, String) {
    match m {
        Some(m) => (format!("{:.4}", m.c_td), format!("{:.4}", m.ibs)),
        None => ("-".into(), "-".into()),
    }
}

/// One table row per run; failed runs show their error.
pub fn format_table(rows: &[(String, Result<RunReport, String>)]) -> String {
    let header = [
        "name",
        "head",
        "fusion",
        "modalities",
        "C_hidden",
        "IBS_hidden",
        "C_verbal",
        "IBS_verbal",
        "C_comb",
        "IBS_comb",
        "lambda",
    ];
    let mut table: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    let mut errors = Vec::new();
    for (name, r) in rows {
        match r {
            Ok(r) => {
                let (ch, ih) = cell(Some(&r.test.hidden));
                let (cv, iv) = cell(r.test.verbalized.as_ref());
                let (cc, ic) = cell(r.test.combined.as_ref());
                let lambda = r
                    .lambda
                    .as_ref()
                    .map_or("-".to_string(), |l| format!("{:.2}", l.lambda));
                table.push(vec![
                    name.clone(),
                    r.head.to_string(),
                    r.fusion.to_string(),
                    r.modalities.to_string(),
                    ch,
                    ih,
                    cv,
                    iv,
                    cc,
                    ic,
                    lambda,
                ]);
            }
            Err(e) => {
                let mut row = vec![name.clone(), "FAILED".into()];
                row.resize(header.len(), String::new());
                table.push(row);
                errors.push(format!("{name}: {e}"));
            }
        }
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &table {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(s, &w)| format!("{s:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    for e in errors {
        let _ = writeln!(out, "error {e}");
    }
    out
}

impl RunReport {
    pub fn summary(&self) -> String {
        format_table(&[(self.name.clone(), Ok(self.clone()))])
    }
}
