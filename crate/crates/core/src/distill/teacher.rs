//! Teacher records: JSONL ingestion, horizon completion, exponential fit,
//! target construction and calibration-correction masking.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distill::{
    build_target_sequence, extract_probability, fit_parametric, three_year_percent, Family,
    ParametricFit, TargetSequence,
};
use crate::error::{Result, SurvError};
use crate::outcome::Outcome;

/// Horizons (years) at which the teacher is queried.
pub const HORIZONS: [f64; 3] = [1.0, 3.0, 5.0];
pub const CALIBRATION_HORIZON: f64 = 3.0;
pub const CALIBRATION_THRESHOLD: f64 = 50.0;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeacherResponses {
    pub y1: Option<String>,
    pub y3: Option<String>,
    pub y5: Option<String>,
}

impl TeacherResponses {
    pub fn as_array(&self) -> [Option<&str>; 3] {
        [self.y1.as_deref(), self.y3.as_deref(), self.y5.as_deref()]
    }
}

/// One line of the teacher JSONL file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeacherLine {
    pub id: String,
    pub responses: TeacherResponses,
    pub explanation: String,
}

impl TeacherLine {
    pub fn extracted(&self) -> [Option<f64>; 3] {
        self.responses
            .as_array()
            .map(|r| r.and_then(extract_probability))
    }
}

/// Parsed teacher output for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct TeacherRecord {
    pub id: String,
    pub responses: TeacherResponses,
    pub explanation: String,
    pub extracted: [Option<f64>; 3],
    pub completed: [f64; 3],
    pub rate: f64,
    /// Rounded 3-year survival percent, a multiple of 5.
    pub percent: u8,
}

/// Per-horizon means of extractable probabilities (training records).
pub fn horizon_means<'a>(lines: impl IntoIterator<Item = &'a TeacherLine>) -> [Option<f64>; 3] {
    let mut sum = [0.0; 3];
    let mut n = [0usize; 3];
    for l in lines {
        for (k, p) in l.extracted().iter().enumerate() {
            if let Some(p) = p {
                sum[k] += p;
                n[k] += 1;
            }
        }
    }
    [0, 1, 2].map(|k| (n[k] > 0).then(|| sum[k] / n[k] as f64))
}

/// Fills missing horizon probabilities.
///
/// With at least one extracted value an exponential is fitted to the present
/// points and evaluated at the missing horizons; with none, the per-horizon
/// means are used. The result is clipped to `[0, 1]` and forced
/// non-increasing in time.
pub fn complete_horizons(p: [Option<f64>; 3], means: [Option<f64>; 3]) -> Result<[f64; 3]> {
    let present: Vec<(f64, f64)> = HORIZONS
        .iter()
        .zip(&p)
        .filter_map(|(&t, s)| s.map(|s| (t, s.clamp(0.0, 1.0))))
        .collect();
    let mut out = [0.0; 3];
    if present.is_empty() {
        for k in 0..3 {
            out[k] = means[k].ok_or_else(|| {
                SurvError::invalid(format!(
                    "no training mean available for the {}-year horizon",
                    HORIZONS[k]
                ))
            })?;
        }
    } else {
        let fit = fit_parametric(&present, Family::Exponential)?;
        for k in 0..3 {
            out[k] = p[k].unwrap_or_else(|| fit.survival(HORIZONS[k]));
        }
    }
    let mut running = 1.0f64;
    for v in &mut out {
        *v = v.clamp(0.0, 1.0).min(running);
        running = *v;
    }
    Ok(out)
}

pub fn process_teacher(line: &TeacherLine, means: [Option<f64>; 3]) -> Result<TeacherRecord> {
    let extracted = line.extracted();
    let completed = complete_horizons(extracted, means)?;
    let points: Vec<(f64, f64)> = HORIZONS.iter().copied().zip(completed).collect();
    let fit = fit_parametric(&points, Family::Exponential)?;
    let ParametricFit::Exponential { rate } = fit else {
        unreachable!()
    };
    Ok(TeacherRecord {
        id: line.id.clone(),
        responses: line.responses.clone(),
        explanation: line.explanation.clone(),
        extracted,
        completed,
        rate,
        percent: three_year_percent(&fit),
    })
}

/// Whether a sample's text-loss terms are kept under calibration correction.
///
/// Excluded when the event happened before `horizon` yet `percent >
/// threshold`, or when the subject is known to be alive/at risk at `horizon`
/// (`time >= horizon`) yet `percent < threshold`. Subjects censored before the
/// horizon are always kept.
pub fn calibration_mask(
    percent: f64,
    outcome: &Outcome<f64>,
    horizon: f64,
    threshold: f64,
) -> bool {
    let died_before = outcome.event && outcome.time < horizon;
    let known_at_risk = outcome.time >= horizon;
    !((died_before && percent > threshold) || (known_at_risk && percent < threshold))
}

/// One line of the target JSONL file. Spans are `[start, end)` byte offsets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub id: String,
    pub target: String,
    pub vprob_span: [usize; 2],
    pub num_span: [usize; 2],
    pub text_loss_included: bool,
}

impl TargetRecord {
    pub fn new(id: &str, seq: &TargetSequence, included: bool) -> Self {
        TargetRecord {
            id: id.to_string(),
            target: seq.text.clone(),
            vprob_span: [seq.vprob_span.start, seq.vprob_span.end],
            num_span: [seq.num_span.start, seq.num_span.end],
            text_loss_included: included,
        }
    }
}

/// Target record for a processed teacher output, optionally applying
/// calibration correction against the observed outcome.
pub fn build_target_record(
    rec: &TeacherRecord,
    outcome: Option<&Outcome<f64>>,
    calibration_correction: bool,
) -> Result<TargetRecord> {
    let seq = build_target_sequence(&rec.explanation, rec.percent)?;
    let included = match (calibration_correction, outcome) {
        (true, Some(o)) => calibration_mask(
            rec.percent as f64,
            o,
            CALIBRATION_HORIZON,
            CALIBRATION_THRESHOLD,
        ),
        _ => true,
    };
    Ok(TargetRecord::new(&rec.id, &seq, included))
}

/// Per-token NLLs of a sample's target sequence under a text model, with
/// byte offsets of each token into the target string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenNllLine {
    pub id: String,
    pub offsets: Vec<[usize; 2]>,
    pub nll: Vec<f64>,
}

impl TokenNllLine {
    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        self.offsets.iter().map(|&[s, e]| s..e).collect()
    }
}

/// Weighted text loss for one sample from its supplied token NLLs.
pub fn sample_text_loss(
    target: &crate::distill::TargetSequence,
    nll: &TokenNllLine,
    w: f64,
    w_num: f64,
) -> Result<f64> {
    if nll.offsets.len() != nll.nll.len() {
        return Err(SurvError::dim(
            format!("token NLLs of `{}`", nll.id),
            nll.offsets.len(),
            nll.nll.len(),
        ));
    }
    let (v, n) = crate::distill::token_masks(target, &nll.ranges())?;
    Ok(crate::distill::weighted_text_loss(&nll.nll, &v, &n, w, w_num)?.0)
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = std::fs::File::open(path).map_err(|e| SurvError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| SurvError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| SurvError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| SurvError::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    for it in items {
        serde_json::to_writer(&mut w, it).map_err(|e| SurvError::invalid(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| SurvError::io(path, e))?;
    }
    w.flush().map_err(|e| SurvError::io(path, e))
}
