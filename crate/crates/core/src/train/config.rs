//! Run configuration. Flat TOML: every key is a field name below; unknown
//! keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autoencoder::{PRODUCTION_ENCODER_LAYERS, PRODUCTION_LATENT_DIM};
use crate::blending::{default_lambda_grid, BlendConfig};
use crate::cohort::{
    CohortPaths, CovariateFormat, LoadOptions, DEFAULT_HORIZON_YEARS, DEFAULT_SPLIT_RATIOS,
};
use crate::distill::{DEFAULT_NUMBER_WEIGHT, DEFAULT_SPAN_WEIGHT};
use crate::error::{Result, SurvError};
use crate::fusion::ModalitySet;
use crate::metrics::DEFAULT_IBS_SUBINTERVALS;
use crate::survival::HeadKind;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    /// One head on the concatenated representations.
    Early,
    /// Per-modality heads mixed by learned gates.
    #[default]
    Late,
    /// Single modality, single head.
    None,
}

impl std::fmt::Display for FusionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FusionMode::Early => "early",
            FusionMode::Late => "late",
            FusionMode::None => "none",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub head: HeadKind,
    pub fusion: FusionMode,
    pub modalities: ModalitySet,
    /// Pre-train the cov and ge heads alone before joint training (late fusion).
    pub pretrain: bool,
    /// Keep pre-trained heads fixed during joint training.
    pub freeze_pretrained: bool,
    pub calibration_correction: bool,
    /// Autoencoder loss weight; `None` picks the head-specific default.
    pub alpha: Option<f64>,
    /// Text loss weight; `None` picks the head-specific default.
    pub beta: Option<f64>,
    /// Discrete-time bins over `[0, horizon]`.
    pub bins: usize,
    /// Administrative censoring horizon (years).
    pub horizon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub pretrain_batch_size: usize,
    pub pretrain_epochs: usize,
    pub pretrain_patience: usize,
    /// Hidden widths of every survival head.
    pub head_layers: Vec<usize>,
    pub dropout: f64,
    pub lr: f64,
    pub gate_lr: f64,
    pub ae_lr: f64,
    pub weight_decay: f64,
    pub ae_hidden: Vec<usize>,
    pub ae_latent: usize,
    pub ae_dropout: f64,
    pub span_weight: f64,
    pub number_weight: f64,
    pub seed: u64,
    pub split_seed: u64,
    pub split_ratios: [f64; 3],
    /// Fixed blend weight; `None` selects it on validation data.
    pub lambda: Option<f64>,
    pub lambda_grid: Vec<f64>,
    pub ibs_subintervals: usize,
    pub outcomes: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    pub covariate_format: CovariateFormat,
    pub strict_cancer_types: bool,
    pub ge: Option<PathBuf>,
    pub hidden_states: Option<PathBuf>,
    pub pooled: Option<PathBuf>,
    pub teacher: Option<PathBuf>,
    pub token_nll: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: "run".into(),
            head: HeadKind::Discrete,
            fusion: FusionMode::Late,
            modalities: ModalitySet::all(),
            pretrain: false,
            freeze_pretrained: false,
            calibration_correction: false,
            alpha: None,
            beta: None,
            bins: 30,
            horizon: DEFAULT_HORIZON_YEARS,
            batch_size: 16,
            epochs: 30,
            patience: 5,
            pretrain_batch_size: 512,
            pretrain_epochs: 1000,
            pretrain_patience: 5,
            head_layers: vec![100, 100, 100],
            dropout: 0.3,
            lr: 1e-3,
            gate_lr: 1e-4,
            ae_lr: 1e-3,
            weight_decay: 0.01,
            ae_hidden: PRODUCTION_ENCODER_LAYERS.to_vec(),
            ae_latent: PRODUCTION_LATENT_DIM,
            ae_dropout: 0.3,
            span_weight: DEFAULT_SPAN_WEIGHT,
            number_weight: DEFAULT_NUMBER_WEIGHT,
            seed: 0,
            split_seed: 0,
            split_ratios: DEFAULT_SPLIT_RATIOS,
            lambda: None,
            lambda_grid: default_lambda_grid(),
            ibs_subintervals: DEFAULT_IBS_SUBINTERVALS,
            outcomes: None,
            covariates: None,
            covariate_format: CovariateFormat::Numeric,
            strict_cancer_types: false,
            ge: None,
            hidden_states: None,
            pooled: None,
            teacher: None,
            token_nll: None,
        }
    }
}

impl RunConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(match self.head {
            HeadKind::Coxph => 1e-8,
            HeadKind::Discrete => 1e-9,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(match self.head {
            HeadKind::Coxph => 5.0,
            HeadKind::Discrete => 1.0,
        })
    }

    /// Output width of each head: one logit per bin, or one risk score.
    pub fn output_dim(&self) -> usize {
        match self.head {
            HeadKind::Discrete => self.bins,
            HeadKind::Coxph => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SurvError::invalid(m));
        for (name, v) in [("alpha", self.alpha()), ("beta", self.beta())] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.batch_size == 0 || self.pretrain_batch_size == 0 {
            return bad("batch sizes must be >= 1".into());
        }
        if self.patience > self.epochs {
            return bad(format!(
                "patience {} exceeds epochs {}",
                self.patience, self.epochs
            ));
        }
        if self.pretrain_patience > self.pretrain_epochs {
            return bad(format!(
                "pretrain_patience {} exceeds pretrain_epochs {}",
                self.pretrain_patience, self.pretrain_epochs
            ));
        }
        if self.modalities.is_empty() {
            return bad("at least one modality is required".into());
        }
        if self.fusion == FusionMode::None && self.modalities.len() != 1 {
            return bad(format!(
                "fusion = none needs exactly one modality, got {}",
                self.modalities
            ));
        }
        if self.pretrain && self.fusion != FusionMode::Late {
            return bad("pretrain requires late fusion".into());
        }
        if self.head == HeadKind::Discrete && self.bins == 0 {
            return bad("bins must be >= 1".into());
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.head_layers.contains(&0) || self.ae_hidden.contains(&0) || self.ae_latent == 0 {
            return bad("layer widths must be >= 1".into());
        }
        for (name, p) in [("dropout", self.dropout), ("ae_dropout", self.ae_dropout)] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1), got {p}"));
            }
        }
        for (name, v) in [
            ("lr", self.lr),
            ("gate_lr", self.gate_lr),
            ("ae_lr", self.ae_lr),
            ("weight_decay", self.weight_decay),
            ("span_weight", self.span_weight),
            ("number_weight", self.number_weight),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.split_ratios.iter().any(|r| !(0.0..=1.0).contains(r))
            || (self.split_ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad(format!(
                "split_ratios {:?} must lie in [0, 1] and sum to 1",
                self.split_ratios
            ));
        }
        if self.ibs_subintervals == 0 {
            return bad("ibs_subintervals must be >= 1".into());
        }
        BlendConfig {
            lambda: self.lambda,
            grid: self.lambda_grid.clone(),
            mean_impute: true,
        }
        .validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| SurvError::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SurvError::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| SurvError::Parse {
            path: path.to_path_buf(),
            line: e
                .span()
                .map(|s| text[..s.start].lines().count().max(1))
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn resolve_paths(&mut self, dir: &Path) {
        for p in [
            &mut self.outcomes,
            &mut self.covariates,
            &mut self.ge,
            &mut self.hidden_states,
            &mut self.pooled,
            &mut self.teacher,
            &mut self.token_nll,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }

    /// Sets every data path from a loaded bundle.
    pub fn set_paths(&mut self, paths: &CohortPaths) {
        self.outcomes = Some(paths.outcomes.clone());
        self.covariates = paths.covariates.clone();
        self.ge = paths.ge.clone();
        self.hidden_states = paths.hidden_states.clone();
        self.pooled = paths.pooled.clone();
        self.teacher = paths.teacher.clone();
        self.token_nll = paths.token_nll.clone();
    }

    pub fn cohort_paths(&self) -> Result<CohortPaths> {
        let outcomes = self
            .outcomes
            .clone()
            .ok_or_else(|| SurvError::invalid("config has no `outcomes` path"))?;
        Ok(CohortPaths {
            outcomes,
            covariates: self.covariates.clone(),
            ge: self.ge.clone(),
            hidden_states: self.hidden_states.clone(),
            pooled: self.pooled.clone(),
            teacher: self.teacher.clone(),
            token_nll: self.token_nll.clone(),
        })
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            horizon: Some(self.horizon),
            covariate_format: self.covariate_format,
            strict_cancer_types: self.strict_cancer_types,
        }
    }
}
