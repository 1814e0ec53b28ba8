//! Multimodal cohorts: file loading, validation, covariate preprocessing and
//! train/validation/test splitting.

pub mod binary;
pub mod clinical;

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use binary::{read_hidden_states, read_pooled, write_hidden_states, write_pooled};
pub use clinical::{
    cancer_family, parse_sex, parse_stage, CancerFamily, ClinicalRecord, ClinicalScaler,
    CLINICAL_COLUMNS,
};

use crate::distill::{read_jsonl, write_jsonl, TeacherLine, TokenNllLine};
use crate::error::{Result, SurvError};
use crate::fusion::{Modality, ModalitySet};
use crate::outcome::{administrative_censor, Outcome};
use crate::pooling::{attention_pool, HiddenStateMatrix};

pub const DEFAULT_HORIZON_YEARS: f64 = 5.0;
pub const DEFAULT_SPLIT_RATIOS: [f64; 3] = [0.70, 0.10, 0.20];

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub outcome: Outcome<f64>,
    pub cov: Option<Vec<f64>>,
    /// Raw clinical row; encoded into `cov` once training extrema are known.
    pub clinical: Option<ClinicalRecord>,
    pub ge: Option<Vec<f64>>,
    pub text_hidden: Option<HiddenStateMatrix<f32>>,
    pub text_pooled: Option<Vec<f64>>,
    pub teacher: Option<TeacherLine>,
    pub token_nll: Option<TokenNllLine>,
}

impl Sample {
    pub fn new(id: impl Into<String>, outcome: Outcome<f64>) -> Self {
        Sample {
            id: id.into(),
            outcome,
            cov: None,
            clinical: None,
            ge: None,
            text_hidden: None,
            text_pooled: None,
            teacher: None,
            token_nll: None,
        }
    }

    pub fn has(&self, m: Modality) -> bool {
        match m {
            Modality::Text => self.text_pooled.is_some() || self.text_hidden.is_some(),
            Modality::Cov => self.cov.is_some() || self.clinical.is_some(),
            Modality::Ge => self.ge.is_some(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateFormat {
    /// `id,c1..c{d_c}` already numeric; used as is.
    #[default]
    Numeric,
    /// `id,age,sex,race,stage,cancer_type`, encoded after splitting.
    Clinical,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CohortPaths {
    pub outcomes: PathBuf,
    pub covariates: Option<PathBuf>,
    pub ge: Option<PathBuf>,
    pub hidden_states: Option<PathBuf>,
    pub pooled: Option<PathBuf>,
    pub teacher: Option<PathBuf>,
    pub token_nll: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Administrative censoring horizon in years; `None` keeps raw times.
    pub horizon: Option<f64>,
    pub covariate_format: CovariateFormat,
    /// Reject unknown cancer types instead of mapping them to "other".
    pub strict_cancer_types: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            horizon: Some(DEFAULT_HORIZON_YEARS),
            covariate_format: CovariateFormat::Numeric,
            strict_cancer_types: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cohort {
    pub samples: Vec<Sample>,
    pub cov_names: Vec<String>,
    pub ge_names: Vec<String>,
    pub covariate_format: CovariateFormat,
    /// `(id, reason)` for samples dropped during loading or filtering.
    pub excluded: Vec<(String, String)>,
}

struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(String::from)
        .collect();
    if header.first().map(String::as_str) != Some("id") {
        return Err(SurvError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("first column must be `id`, found {:?}", header.first()),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, rec.iter().map(String::from).collect()));
    }
    Ok(Table {
        path: path.to_path_buf(),
        header,
        rows,
    })
}

fn csv_error(path: &Path, e: csv::Error) -> SurvError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => SurvError::io(path, io),
        other => SurvError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

impl Table {
    fn parse_err(&self, line: usize, id: &str, msg: impl std::fmt::Display) -> SurvError {
        SurvError::Parse {
            path: self.path.clone(),
            line,
            message: format!("sample `{id}`: {msg}"),
        }
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SurvError::Parse {
                path: self.path.clone(),
                line: 1,
                message: format!("missing column `{name}`"),
            })
    }

    /// Full rows with their ids, rejecting duplicates and ragged rows.
    fn keyed(&self) -> Result<Vec<(usize, &str, &[String])>> {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(self.rows.len());
        for (line, row) in &self.rows {
            let id = row[0].as_str();
            if id.is_empty() {
                return Err(SurvError::Parse {
                    path: self.path.clone(),
                    line: *line,
                    message: "empty sample id".into(),
                });
            }
            if !seen.insert(id) {
                return Err(SurvError::DuplicateId(id.to_string()));
            }
            if row.len() != self.header.len() {
                return Err(SurvError::DimensionMismatch {
                    context: format!("{}:{line} sample `{id}` column count", self.path.display()),
                    expected: self.header.len(),
                    actual: row.len(),
                });
            }
            out.push((*line, id, row.as_slice()));
        }
        Ok(out)
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s
        .parse()
        .map_err(|_| format!("cannot parse `{s}` as a number"))?;
    if !v.is_finite() {
        return Err(format!("non-finite value `{s}`"));
    }
    Ok(v)
}

pub fn load_outcomes(path: &Path, horizon: Option<f64>) -> Result<Vec<(String, Outcome<f64>)>> {
    let table = read_table(path)?;
    let (ti, ei) = (table.column("time_years")?, table.column("event")?);
    let mut out = Vec::new();
    for (line, id, row) in table.keyed()? {
        let time = parse_f64(&row[ti]).map_err(|m| table.parse_err(line, id, m))?;
        let event = match row[ei].as_str() {
            "1" => true,
            "0" => false,
            other => {
                return Err(table.parse_err(
                    line,
                    id,
                    format!("event must be 0 or 1, got `{other}`"),
                ))
            }
        };
        let o = Outcome::new(time, event).map_err(|e| table.parse_err(line, id, e))?;
        out.push((
            id.to_string(),
            horizon.map_or(o, |h| administrative_censor(o, h)),
        ));
    }
    Ok(out)
}

/// Column names and `(id, row)`; a `None` row is incomplete.
type Matrix = (Vec<String>, Vec<(String, Option<Vec<f64>>)>);

/// Numeric matrix file (`id,x1..xd`). Empty cells become `missing`; `None`
/// marks the row as incomplete.
fn load_matrix(path: &Path, missing: Option<f64>) -> Result<Matrix> {
    let table = read_table(path)?;
    let mut out = Vec::new();
    for (line, id, row) in table.keyed()? {
        let mut v = Vec::with_capacity(row.len() - 1);
        let mut complete = true;
        for c in &row[1..] {
            if c.is_empty() {
                match missing {
                    Some(fill) => v.push(fill),
                    None => complete = false,
                }
            } else {
                v.push(parse_f64(c).map_err(|m| table.parse_err(line, id, m))?);
            }
        }
        out.push((id.to_string(), complete.then_some(v)));
    }
    Ok((table.header[1..].to_vec(), out))
}

/// Clinical rows; rows missing a critical field come back as `Err(reason)`.
fn load_clinical(
    path: &Path,
    strict: bool,
) -> Result<Vec<(String, std::result::Result<ClinicalRecord, String>)>> {
    let table = read_table(path)?;
    let cols: Vec<usize> = CLINICAL_COLUMNS
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (line, id, row) in table.keyed()? {
        let get = |k: usize| row[cols[k]].as_str();
        let rec = (|| {
            if get(0).is_empty() {
                return Ok(Err("missing age".to_string()));
            }
            let age = parse_f64(get(0)).map_err(|m| table.parse_err(line, id, m))?;
            let Some(female) = parse_sex(get(1)) else {
                return Ok(Err(format!("missing or unrecognised sex `{}`", get(1))));
            };
            let Some(stage) = parse_stage(get(3)) else {
                return Ok(Err(format!("missing or unrecognised stage `{}`", get(3))));
            };
            if get(4).is_empty() {
                return Ok(Err("missing cancer type".to_string()));
            }
            let family = cancer_family(get(4), strict).map_err(|e| table.parse_err(line, id, e))?;
            let race = (!get(2).is_empty()).then(|| get(2).to_ascii_lowercase());
            Ok(Ok(ClinicalRecord {
                age,
                female,
                race,
                stage,
                family,
            }))
        })()?;
        out.push((id.to_string(), rec));
    }
    Ok(out)
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(SurvError::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

fn unknown_ids(kind: &str, index: &HashMap<String, usize>, ids: impl Iterator<Item = String>) {
    let extra = ids.filter(|id| !index.contains_key(id)).count();
    if extra > 0 {
        log::warn!("{extra} {kind} rows have ids without an outcome and were ignored");
    }
}

impl Cohort {
    pub fn load(paths: &CohortPaths, opts: &LoadOptions) -> Result<Self> {
        let outcomes = load_outcomes(&paths.outcomes, opts.horizon)?;
        let mut samples: Vec<Sample> = outcomes
            .into_iter()
            .map(|(id, o)| Sample::new(id, o))
            .collect();
        let index: HashMap<String, usize> = samples
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.clone(), i))
            .collect();
        let mut cohort = Cohort {
            covariate_format: opts.covariate_format,
            ..Default::default()
        };
        let mut excluded: HashMap<usize, String> = HashMap::new();

        if let Some(p) = &paths.covariates {
            match opts.covariate_format {
                CovariateFormat::Numeric => {
                    let (names, rows) = load_matrix(p, None)?;
                    cohort.cov_names = names;
                    unknown_ids("covariate", &index, rows.iter().map(|r| r.0.clone()));
                    for (id, v) in rows {
                        if let Some(&i) = index.get(&id) {
                            match v {
                                Some(v) => samples[i].cov = Some(v),
                                None => {
                                    excluded.insert(i, "missing covariate value".into());
                                }
                            }
                        }
                    }
                }
                CovariateFormat::Clinical => {
                    cohort.cov_names = ClinicalScaler::feature_names();
                    let rows = load_clinical(p, opts.strict_cancer_types)?;
                    unknown_ids("covariate", &index, rows.iter().map(|r| r.0.clone()));
                    for (id, rec) in rows {
                        if let Some(&i) = index.get(&id) {
                            match rec {
                                Ok(r) => samples[i].clinical = Some(r),
                                Err(reason) => {
                                    excluded.insert(i, reason);
                                }
                            }
                        }
                    }
                }
            }
        }
        if let Some(p) = &paths.ge {
            let (names, rows) = load_matrix(p, Some(0.0))?;
            cohort.ge_names = names;
            unknown_ids("gene-expression", &index, rows.iter().map(|r| r.0.clone()));
            for (id, v) in rows {
                if let Some(&i) = index.get(&id) {
                    samples[i].ge = v;
                }
            }
        }
        if let Some(p) = &paths.hidden_states {
            let hs = read_hidden_states(p)?;
            check_unique(hs.iter().map(|h| h.id.as_str()))?;
            if let Some(first) = hs.first() {
                if let Some(bad) = hs.iter().find(|h| h.cols != first.cols) {
                    return Err(SurvError::DimensionMismatch {
                        context: format!("{} hidden width of sample `{}`", p.display(), bad.id),
                        expected: first.cols,
                        actual: bad.cols,
                    });
                }
            }
            unknown_ids("hidden-state", &index, hs.iter().map(|h| h.id.clone()));
            for h in hs {
                if let Some(&i) = index.get(&h.id) {
                    samples[i].text_hidden = Some(h);
                }
            }
        }
        if let Some(p) = &paths.pooled {
            let pv = read_pooled(p)?;
            check_unique(pv.iter().map(|v| v.0.as_str()))?;
            if let Some(first) = pv.first() {
                if let Some(bad) = pv.iter().find(|v| v.1.len() != first.1.len()) {
                    return Err(SurvError::DimensionMismatch {
                        context: format!("{} pooled width of sample `{}`", p.display(), bad.0),
                        expected: first.1.len(),
                        actual: bad.1.len(),
                    });
                }
            }
            unknown_ids("pooled-vector", &index, pv.iter().map(|v| v.0.clone()));
            for (id, v) in pv {
                if let Some(&i) = index.get(&id) {
                    samples[i].text_pooled = Some(v.into_iter().map(f64::from).collect());
                }
            }
        }
        if let Some(p) = &paths.teacher {
            let lines: Vec<TeacherLine> = read_jsonl(p)?;
            check_unique(lines.iter().map(|l| l.id.as_str()))?;
            unknown_ids("teacher", &index, lines.iter().map(|l| l.id.clone()));
            for l in lines {
                if let Some(&i) = index.get(&l.id) {
                    samples[i].teacher = Some(l);
                }
            }
        }
        if let Some(p) = &paths.token_nll {
            let lines: Vec<TokenNllLine> = read_jsonl(p)?;
            check_unique(lines.iter().map(|l| l.id.as_str()))?;
            for l in lines {
                if l.offsets.len() != l.nll.len() {
                    return Err(SurvError::dim(
                        format!("{} token NLLs of `{}`", p.display(), l.id),
                        l.offsets.len(),
                        l.nll.len(),
                    ));
                }
                if let Some(&i) = index.get(&l.id) {
                    samples[i].token_nll = Some(l);
                }
            }
        }

        let mut order: Vec<usize> = excluded.keys().copied().collect();
        order.sort_unstable();
        for i in &order {
            log::warn!("sample `{}` excluded: {}", samples[*i].id, excluded[i]);
        }
        cohort.excluded = order
            .iter()
            .map(|i| (samples[*i].id.clone(), excluded[i].clone()))
            .collect();
        cohort.samples = samples
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !excluded.contains_key(i))
            .map(|(_, s)| s)
            .collect();
        cohort.validate()?;
        Ok(cohort)
    }

    /// Builds a cohort from in-memory samples, checking consistency.
    pub fn from_samples(
        samples: Vec<Sample>,
        cov_names: Vec<String>,
        ge_names: Vec<String>,
    ) -> Result<Self> {
        let c = Cohort {
            samples,
            cov_names,
            ge_names,
            covariate_format: CovariateFormat::Numeric,
            excluded: Vec::new(),
        };
        c.validate()?;
        Ok(c)
    }

    /// Unique ids and per-modality widths consistent across samples.
    pub fn validate(&self) -> Result<()> {
        check_unique(self.samples.iter().map(|s| s.id.as_str()))?;
        let mut widths: [Option<(usize, &str)>; 4] = [None; 4];
        for s in &self.samples {
            let dims = [
                s.cov.as_ref().map(Vec::len),
                s.ge.as_ref().map(Vec::len),
                s.text_hidden.as_ref().map(|h| h.cols),
                s.text_pooled.as_ref().map(Vec::len),
            ];
            for (k, d) in dims.iter().enumerate() {
                if let Some(d) = *d {
                    match widths[k] {
                        None => widths[k] = Some((d, &s.id)),
                        Some((w, _)) if w != d => {
                            return Err(SurvError::DimensionMismatch {
                                context: format!(
                                    "{} width of sample `{}`",
                                    [
                                        "covariate",
                                        "gene-expression",
                                        "hidden-state",
                                        "pooled-text"
                                    ][k],
                                    s.id
                                ),
                                expected: w,
                                actual: d,
                            })
                        }
                        _ => {}
                    }
                }
            }
        }
        if let (Some((h, _)), Some((p, id))) = (widths[2], widths[3]) {
            if h != p {
                return Err(SurvError::DimensionMismatch {
                    context: format!("pooled width of sample `{id}` vs hidden-state width"),
                    expected: h,
                    actual: p,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn outcomes(&self) -> Vec<Outcome<f64>> {
        self.samples.iter().map(|s| s.outcome).collect()
    }

    /// Modalities present in at least one sample.
    pub fn available(&self) -> ModalitySet {
        let mut set = ModalitySet::default();
        for m in [Modality::Text, Modality::Cov, Modality::Ge] {
            if self.samples.iter().any(|s| s.has(m)) {
                set.insert(m);
            }
        }
        set
    }

    /// Drops samples lacking any modality in `required`; returns how many.
    pub fn retain_complete(&mut self, required: ModalitySet) -> usize {
        let before = self.samples.len();
        let mut dropped = Vec::new();
        self.samples.retain(|s| {
            let missing: Vec<&str> = required
                .iter()
                .filter(|&m| !s.has(m))
                .map(|m| m.name())
                .collect();
            if missing.is_empty() {
                true
            } else {
                dropped.push((
                    s.id.clone(),
                    format!("missing required modality {}", missing.join(", ")),
                ));
                false
            }
        });
        if !dropped.is_empty() {
            log::warn!(
                "{} samples dropped for missing required modalities",
                dropped.len()
            );
        }
        self.excluded.extend(dropped);
        before - self.samples.len()
    }

    /// Attention-pools token hidden states into `text_pooled` where absent.
    pub fn pool_text(&mut self) -> Result<usize> {
        let mut n = 0;
        for s in &mut self.samples {
            if s.text_pooled.is_none() {
                if let Some(h) = &s.text_hidden {
                    let h64 = HiddenStateMatrix::new(
                        h.id.clone(),
                        h.rows,
                        h.cols,
                        h.values.iter().map(|&v| f64::from(v)).collect(),
                    )?;
                    s.text_pooled = Some(attention_pool(&h64)?);
                    n += 1;
                }
            }
        }
        Ok(n)
    }

    /// Encodes clinical rows into `cov` using training-split statistics.
    pub fn preprocess_covariates(&mut self, split: &CohortSplit) -> Result<Option<ClinicalScaler>> {
        if self.covariate_format != CovariateFormat::Clinical {
            return Ok(None);
        }
        let scaler = ClinicalScaler::fit(
            split
                .train
                .iter()
                .filter_map(|&i| self.samples[i].clinical.as_ref()),
        )?;
        for s in &mut self.samples {
            if let Some(r) = &s.clinical {
                s.cov = Some(scaler.encode(r));
            }
        }
        Ok(Some(scaler))
    }

    pub fn cov_dim(&self) -> Option<usize> {
        self.samples
            .iter()
            .find_map(|s| s.cov.as_ref().map(Vec::len))
    }

    pub fn ge_dim(&self) -> Option<usize> {
        self.samples
            .iter()
            .find_map(|s| s.ge.as_ref().map(Vec::len))
    }

    pub fn text_dim(&self) -> Option<usize> {
        self.samples.iter().find_map(|s| {
            s.text_pooled
                .as_ref()
                .map(Vec::len)
                .or(s.text_hidden.as_ref().map(|h| h.cols))
        })
    }

    /// Writes every attached modality in the external file formats.
    pub fn write_bundle(&self, dir: &Path) -> Result<CohortPaths> {
        std::fs::create_dir_all(dir).map_err(|e| SurvError::io(dir, e))?;
        let mut paths = CohortPaths {
            outcomes: dir.join("outcomes.csv"),
            ..Default::default()
        };
        let mut w = csv_writer(&paths.outcomes)?;
        write_row(
            &mut w,
            &paths.outcomes,
            ["id", "time_years", "event"].map(String::from),
        )?;
        for s in &self.samples {
            write_row(
                &mut w,
                &paths.outcomes,
                [
                    s.id.clone(),
                    s.outcome.time.to_string(),
                    u8::from(s.outcome.event).to_string(),
                ],
            )?;
        }
        flush(w, &paths.outcomes)?;

        if self.samples.iter().any(|s| s.clinical.is_some())
            && self.covariate_format == CovariateFormat::Clinical
        {
            let p = dir.join("covariates.csv");
            let mut w = csv_writer(&p)?;
            let mut header = vec!["id".to_string()];
            header.extend(CLINICAL_COLUMNS.iter().map(|s| s.to_string()));
            write_row(&mut w, &p, header)?;
            for s in &self.samples {
                if let Some(r) = &s.clinical {
                    let stage = ["I", "II", "III"][r.stage as usize - 1];
                    write_row(
                        &mut w,
                        &p,
                        [
                            s.id.clone(),
                            r.age.to_string(),
                            (if r.female { "female" } else { "male" }).to_string(),
                            r.race.clone().unwrap_or_default(),
                            stage.to_string(),
                            r.family.name().to_string(),
                        ],
                    )?;
                }
            }
            flush(w, &p)?;
            paths.covariates = Some(p);
        } else if self.samples.iter().any(|s| s.cov.is_some()) {
            let p = dir.join("covariates.csv");
            write_matrix(
                &p,
                &self.cov_names,
                "c",
                self.samples
                    .iter()
                    .filter_map(|s| s.cov.as_ref().map(|v| (&s.id, v))),
            )?;
            paths.covariates = Some(p);
        }
        if self.samples.iter().any(|s| s.ge.is_some()) {
            let p = dir.join("ge.csv");
            write_matrix(
                &p,
                &self.ge_names,
                "g",
                self.samples
                    .iter()
                    .filter_map(|s| s.ge.as_ref().map(|v| (&s.id, v))),
            )?;
            paths.ge = Some(p);
        }
        let hidden: Vec<&HiddenStateMatrix<f32>> = self
            .samples
            .iter()
            .filter_map(|s| s.text_hidden.as_ref())
            .collect();
        if !hidden.is_empty() {
            let p = dir.join("hidden_states.svhs");
            write_hidden_states(&p, &hidden)?;
            paths.hidden_states = Some(p);
        }
        let teacher: Vec<&TeacherLine> = self
            .samples
            .iter()
            .filter_map(|s| s.teacher.as_ref())
            .collect();
        if !teacher.is_empty() {
            let p = dir.join("teacher.jsonl");
            write_jsonl(&p, &teacher)?;
            paths.teacher = Some(p);
        }
        let nll: Vec<&TokenNllLine> = self
            .samples
            .iter()
            .filter_map(|s| s.token_nll.as_ref())
            .collect();
        if !nll.is_empty() {
            let p = dir.join("token_nll.jsonl");
            write_jsonl(&p, &nll)?;
            paths.token_nll = Some(p);
        }
        Ok(paths)
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn write_row<I: IntoIterator<Item = String>>(
    w: &mut csv::Writer<std::fs::File>,
    path: &Path,
    row: I,
) -> Result<()> {
    w.write_record(row).map_err(|e| csv_error(path, e))
}

fn flush(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| SurvError::io(path, e))
}

fn write_matrix<'a>(
    path: &Path,
    names: &[String],
    prefix: &str,
    rows: impl Iterator<Item = (&'a String, &'a Vec<f64>)>,
) -> Result<()> {
    let mut rows = rows.peekable();
    let width = rows.peek().map_or(0, |r| r.1.len());
    let mut w = csv_writer(path)?;
    let mut header = vec!["id".to_string()];
    if names.len() == width {
        header.extend(names.iter().cloned());
    } else {
        header.extend((1..=width).map(|k| format!("{prefix}{k}")));
    }
    write_row(&mut w, path, header)?;
    for (id, v) in rows {
        write_row(
            &mut w,
            path,
            std::iter::once(id.clone()).chain(v.iter().map(|x| x.to_string())),
        )?;
    }
    flush(w, path)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Split sizes: train and validation take `floor(n r)`; test takes the rest.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r))
        || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(SurvError::invalid(format!(
            "split ratios {ratios:?} must be in [0, 1] and sum to 1"
        )));
    }
    if n < 3 {
        return Err(SurvError::invalid(format!(
            "cannot split a cohort of {n} samples (need at least 3)"
        )));
    }
    // the epsilon absorbs representation error such as 10 * 0.7 = 6.999..
    let floor = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
    let train = floor(ratios[0]);
    let val = floor(ratios[1]).min(n - train);
    Ok([train, val, n - train - val])
}

/// Seeded shuffle of `0..n` cut into train/validation/test.
pub fn split_cohort(n: usize, ratios: [f64; 3], seed: u64) -> Result<CohortSplit> {
    let [a, b, _] = split_sizes(n, ratios)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(CohortSplit {
        train: idx[..a].to_vec(),
        val: idx[a..a + b].to_vec(),
        test: idx[a + b..].to_vec(),
        seed,
    })
}
