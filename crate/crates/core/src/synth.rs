//! Synthetic multimodal right-censored cohorts with known hazards.
//!
//! The log-hazard is a weighted sum of three independent unit-variance risk
//! components, one carried by each modality:
//! covariates (a fixed direction in standard-normal covariates), gene
//! expression (a fixed direction in a low-dimensional latent that is linearly
//! embedded with noise), and text (a per-sample scalar along a shared token
//! direction). A simulated teacher reports noisy, optionally miscalibrated
//! survival probabilities at 1, 3 and 5 years.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cohort::{Cohort, Sample};
use crate::distill::{
    build_target_sequence, process_teacher, whitespace_offsets, TeacherLine, TeacherResponses,
    TokenNllLine, HORIZONS,
};
use crate::error::{Result, SurvError};
use crate::fusion::{Modality, ModalitySet};
use crate::outcome::{administrative_censor, Outcome};
use crate::pooling::HiddenStateMatrix;
use crate::survival::SurvivalCurve;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventModel {
    /// `S(t) = exp(-rate t)`.
    #[default]
    Exponential,
    /// `S(t) = exp(-rate t^shape)`.
    Weibull,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n: usize,
    pub seed: u64,
    pub cov_dim: usize,
    pub ge_dim: usize,
    pub ge_latent_dim: usize,
    pub tokens: usize,
    pub hidden_dim: usize,
    pub weight_text: f64,
    pub weight_cov: f64,
    pub weight_ge: f64,
    pub base_hazard: f64,
    /// Rate of independent exponential censoring; 0 disables it.
    pub censoring_rate: f64,
    pub horizon: f64,
    pub event_model: EventModel,
    pub weibull_shape: f64,
    pub ge_noise: f64,
    pub text_noise: f64,
    /// Strength of the risk direction in token rows.
    pub text_signal: f64,
    /// Logit shift added to teacher probabilities (positive = optimistic).
    pub teacher_shift: f64,
    /// Standard deviation of per-response logit noise.
    pub teacher_noise: f64,
    pub teacher_missing_rate: f64,
    /// Also emit simulated per-token NLLs of the student targets.
    pub token_nll: bool,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            n: 2000,
            seed: 7,
            cov_dim: 8,
            ge_dim: 64,
            ge_latent_dim: 4,
            tokens: 12,
            hidden_dim: 16,
            weight_text: 1.0,
            weight_cov: 1.0,
            weight_ge: 1.0,
            base_hazard: 0.15,
            censoring_rate: 0.05,
            horizon: 5.0,
            event_model: EventModel::Exponential,
            weibull_shape: 1.5,
            ge_noise: 0.5,
            text_noise: 0.5,
            text_signal: 1.0,
            teacher_shift: 0.0,
            teacher_noise: 0.3,
            teacher_missing_rate: 0.1,
            token_nll: true,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SurvError::invalid(m));
        if self.n < 3 {
            return bad(format!("generator n = {} (need at least 3)", self.n));
        }
        if self.cov_dim == 0
            || self.ge_dim == 0
            || self.ge_latent_dim == 0
            || self.tokens == 0
            || self.hidden_dim == 0
        {
            return bad("generator dimensions must be positive".into());
        }
        if !(self.base_hazard > 0.0) || !(self.horizon > 0.0) || !(self.weibull_shape > 0.0) {
            return bad("base hazard, horizon and Weibull shape must be positive".into());
        }
        if !(self.censoring_rate >= 0.0) {
            return bad(format!(
                "censoring rate {} must be non-negative",
                self.censoring_rate
            ));
        }
        if !(0.0..=1.0).contains(&self.teacher_missing_rate) {
            return bad(format!(
                "teacher missing rate {} outside [0, 1]",
                self.teacher_missing_rate
            ));
        }
        let finite = [
            self.weight_text,
            self.weight_cov,
            self.weight_ge,
            self.ge_noise,
            self.text_noise,
            self.text_signal,
            self.teacher_shift,
            self.teacher_noise,
        ];
        if finite.iter().any(|v| !v.is_finite())
            || self.ge_noise < 0.0
            || self.text_noise < 0.0
            || self.teacher_noise < 0.0
        {
            return bad(
                "generator weights and noise scales must be finite (noise non-negative)".into(),
            );
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: GeneratorSpec =
            toml::from_str(text).map_err(|e| SurvError::invalid(format!("generator spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Per-sample ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub id: String,
    pub risk_text: f64,
    pub risk_cov: f64,
    pub risk_ge: f64,
    pub event_time: f64,
}

#[derive(Clone, Debug)]
pub struct SyntheticCohort {
    pub cohort: Cohort,
    pub truth: Vec<Truth>,
    pub spec: GeneratorSpec,
}

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|x| x / norm).collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

struct Directions {
    cov: Vec<f64>,
    latent: Vec<f64>,
    ge_map: Vec<f64>,
    token: Vec<f64>,
}

impl Directions {
    fn new(spec: &GeneratorSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(0);
        let scale = 1.0 / (spec.ge_latent_dim as f64).sqrt();
        Directions {
            cov: unit_vector(&mut rng, spec.cov_dim),
            latent: unit_vector(&mut rng, spec.ge_latent_dim),
            ge_map: (0..spec.ge_dim * spec.ge_latent_dim)
                .map(|_| normal(&mut rng) * scale)
                .collect(),
            token: unit_vector(&mut rng, spec.hidden_dim),
        }
    }
}

fn survival(spec: &GeneratorSpec, rate: f64, t: f64) -> f64 {
    match spec.event_model {
        EventModel::Exponential => (-rate * t).exp(),
        EventModel::Weibull => (-rate * t.powf(spec.weibull_shape)).exp(),
    }
}

impl Truth {
    pub fn log_risk(&self, spec: &GeneratorSpec, mods: ModalitySet) -> f64 {
        let mut eta = 0.0;
        if mods.contains(Modality::Text) {
            eta += spec.weight_text * self.risk_text;
        }
        if mods.contains(Modality::Cov) {
            eta += spec.weight_cov * self.risk_cov;
        }
        if mods.contains(Modality::Ge) {
            eta += spec.weight_ge * self.risk_ge;
        }
        eta
    }

    pub fn rate(&self, spec: &GeneratorSpec) -> f64 {
        spec.base_hazard * self.log_risk(spec, ModalitySet::all()).exp()
    }
}

/// Draws the cohort. Sample `i` uses its own ChaCha stream, so samples are
/// independent of generation order.
pub fn generate(spec: &GeneratorSpec) -> Result<SyntheticCohort> {
    spec.validate()?;
    let dirs = Directions::new(spec);
    let width = spec.n.saturating_sub(1).to_string().len().max(4);
    let mut samples = Vec::with_capacity(spec.n);
    let mut truth = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64 + 1);
        let id = format!("S{i:0width$}");

        let cov: Vec<f64> = (0..spec.cov_dim).map(|_| normal(&mut rng)).collect();
        let risk_cov: f64 = cov.iter().zip(&dirs.cov).map(|(a, b)| a * b).sum();

        let z: Vec<f64> = (0..spec.ge_latent_dim).map(|_| normal(&mut rng)).collect();
        let risk_ge: f64 = z.iter().zip(&dirs.latent).map(|(a, b)| a * b).sum();
        let ge: Vec<f64> = (0..spec.ge_dim)
            .map(|g| {
                let row = &dirs.ge_map[g * spec.ge_latent_dim..(g + 1) * spec.ge_latent_dim];
                row.iter().zip(&z).map(|(w, z)| w * z).sum::<f64>()
                    + spec.ge_noise * normal(&mut rng)
            })
            .collect();

        let risk_text = normal(&mut rng);
        let tokens: Vec<f32> = (0..spec.tokens)
            .flat_map(|_| {
                let noise: Vec<f64> = (0..spec.hidden_dim).map(|_| normal(&mut rng)).collect();
                dirs.token
                    .iter()
                    .zip(noise)
                    .map(|(u, e)| (spec.text_signal * risk_text * u + spec.text_noise * e) as f32)
                    .collect::<Vec<_>>()
            })
            .collect();

        let mut t = Truth {
            id: id.clone(),
            risk_text,
            risk_cov,
            risk_ge,
            event_time: 0.0,
        };
        let rate = t.rate(spec);
        let e: f64 = Exp::new(1.0).unwrap().sample(&mut rng);
        // invert S(T) = exp(-E)
        t.event_time = match spec.event_model {
            EventModel::Exponential => e / rate,
            EventModel::Weibull => (e / rate).powf(1.0 / spec.weibull_shape),
        }
        .max(1e-6);
        let censor = if spec.censoring_rate > 0.0 {
            Exp::new(spec.censoring_rate).unwrap().sample(&mut rng)
        } else {
            f64::INFINITY
        };
        let raw = if t.event_time <= censor {
            Outcome::event(t.event_time)
        } else {
            Outcome::censored(censor.max(1e-6))
        };
        let outcome = administrative_censor(raw, spec.horizon);

        let responses: Vec<Option<String>> = HORIZONS
            .iter()
            .map(|&h| {
                if rng.random_bool(spec.teacher_missing_rate) {
                    return if rng.random_bool(0.5) {
                        None
                    } else {
                        Some("I cannot determine this from the report.".to_string())
                    };
                }
                let s = survival(spec, rate, h).clamp(1e-4, 1.0 - 1e-4);
                let p = 1.0
                    / (1.0
                        + (-(logit(s)
                            + spec.teacher_shift
                            + spec.teacher_noise * normal(&mut rng)))
                        .exp());
                Some(format!(
                    "The estimated probability of survival is {:.2}%.",
                    100.0 * p
                ))
            })
            .collect();
        let band = match risk_text {
            r if r < -0.5 => "indolent features with a favourable outlook",
            r if r > 0.5 => "aggressive features with an adverse outlook",
            _ => "intermediate features",
        };
        let teacher = TeacherLine {
            id: id.clone(),
            responses: TeacherResponses {
                y1: responses[0].clone(),
                y3: responses[1].clone(),
                y5: responses[2].clone(),
            },
            explanation: format!("The report describes {band}."),
        };

        let mut s = Sample::new(id.clone(), outcome);
        s.cov = Some(cov);
        s.ge = Some(ge);
        s.text_hidden = Some(HiddenStateMatrix::new(
            id.clone(),
            spec.tokens,
            spec.hidden_dim,
            tokens,
        )?);
        if spec.token_nll && teacher.extracted().iter().any(Option::is_some) {
            // the target does not depend on cohort means when a response is present
            let rec = process_teacher(&teacher, [None; 3])?;
            let target = build_target_sequence(&rec.explanation, rec.percent)?;
            let offsets = whitespace_offsets(&target.text);
            let nll: Vec<f64> = offsets
                .iter()
                .map(|_| Exp::new(1.0).unwrap().sample(&mut rng))
                .collect();
            s.token_nll = Some(TokenNllLine {
                id: id.clone(),
                offsets: offsets.iter().map(|r| [r.start, r.end]).collect(),
                nll,
            });
        }
        s.teacher = Some(teacher);
        samples.push(s);
        truth.push(t);
    }
    let cov_names = (1..=spec.cov_dim).map(|k| format!("c{k}")).collect();
    let ge_names = (1..=spec.ge_dim).map(|k| format!("g{k}")).collect();
    Ok(SyntheticCohort {
        cohort: Cohort::from_samples(samples, cov_names, ge_names)?,
        truth,
        spec: spec.clone(),
    })
}

/// True survival curves on `times` (starting at 0), using only the risk
/// components of `mods`.
pub fn oracle_curves(
    spec: &GeneratorSpec,
    truth: &[Truth],
    times: &[f64],
    mods: ModalitySet,
) -> Result<Vec<SurvivalCurve<f64>>> {
    truth
        .iter()
        .map(|t| {
            let rate = spec.base_hazard * t.log_risk(spec, mods).exp();
            SurvivalCurve::new(
                times.to_vec(),
                times.iter().map(|&x| survival(spec, rate, x)).collect(),
            )
        })
        .collect()
}

pub fn write_truth(path: &std::path::Path, truth: &[Truth]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| SurvError::invalid(format!("{}: {e}", path.display())))?;
    for t in truth {
        w.serialize(t)
            .map_err(|e| SurvError::invalid(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| SurvError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{CohortPaths, LoadOptions};
    use crate::distill::extract_probability;
    use crate::metrics::{c_td, ibs};

    fn small(n: usize) -> GeneratorSpec {
        GeneratorSpec {
            n,
            ge_dim: 12,
            ..Default::default()
        }
    }

    fn grid() -> Vec<f64> {
        (0..=100).map(|k| k as f64 * 0.05).collect()
    }

    #[test]
    fn deterministic_and_order_independent() {
        let a = generate(&small(40)).unwrap();
        let b = generate(&small(40)).unwrap();
        assert_eq!(a.cohort.samples, b.cohort.samples);
        // the first 20 samples do not depend on how many follow
        let c = generate(&small(20)).unwrap();
        for (x, y) in c.truth.iter().zip(&a.truth) {
            assert_eq!(x.risk_text, y.risk_text);
            assert_eq!(x.event_time, y.event_time);
        }
    }

    #[test]
    fn no_censoring_means_all_events_before_horizon() {
        let spec = GeneratorSpec {
            censoring_rate: 0.0,
            horizon: 1e9,
            ..small(200)
        };
        let g = generate(&spec).unwrap();
        assert!(g.cohort.samples.iter().all(|s| s.outcome.event));
    }

    #[test]
    fn calibrated_teacher_matches_truth() {
        let spec = GeneratorSpec {
            teacher_noise: 0.0,
            teacher_missing_rate: 0.0,
            teacher_shift: 0.0,
            ..small(100)
        };
        let g = generate(&spec).unwrap();
        for (s, t) in g.cohort.samples.iter().zip(&g.truth) {
            let rec = process_teacher(s.teacher.as_ref().unwrap(), [None; 3]).unwrap();
            let s3 = (-t.rate(&spec) * 3.0).exp();
            assert!(
                (rec.percent as f64 / 100.0 - s3).abs() <= 0.025 + 1e-3,
                "{} vs {s3}",
                rec.percent
            );
        }
        let y3 = g.cohort.samples[0]
            .teacher
            .as_ref()
            .unwrap()
            .responses
            .y3
            .clone()
            .unwrap();
        assert!(extract_probability(&y3).is_some());
    }

    #[test]
    fn oracle_examples() {
        let spec = GeneratorSpec {
            base_hazard: std::f64::consts::LN_2,
            ..small(3)
        };
        let t = Truth {
            id: "x".into(),
            risk_text: 0.0,
            risk_cov: 0.0,
            risk_ge: 0.0,
            event_time: 1.0,
        };
        let c = oracle_curves(&spec, &[t], &[0.0, 1.0, 2.0], ModalitySet::all()).unwrap();
        assert!((c[0].eval(1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn oracle_beats_baselines() {
        let spec = small(2000);
        let g = generate(&spec).unwrap();
        let outcomes = g.cohort.outcomes();
        let times = grid();
        let all = oracle_curves(&spec, &g.truth, &times, ModalitySet::all()).unwrap();
        let c_all = c_td(&all, &outcomes).unwrap();
        for m in [Modality::Text, Modality::Cov, Modality::Ge] {
            let one = oracle_curves(&spec, &g.truth, &times, ModalitySet::only(m)).unwrap();
            assert!(c_all > c_td(&one, &outcomes).unwrap() + 0.03);
        }
        let half =
            vec![SurvivalCurve::new(vec![0.0, 1e-9], vec![1.0, 0.5]).unwrap(); outcomes.len()];
        assert!(ibs(&all, &outcomes, 512).unwrap().ibs < ibs(&half, &outcomes, 512).unwrap().ibs);
    }

    #[test]
    fn null_signal_gives_chance_concordance() {
        let spec = GeneratorSpec {
            weight_text: 0.0,
            weight_cov: 0.0,
            weight_ge: 0.0,
            ..small(2000)
        };
        let g = generate(&spec).unwrap();
        // any fixed predictor: rank by the (irrelevant) first covariate
        let curves: Vec<_> = g
            .cohort
            .samples
            .iter()
            .map(|s| {
                let r = 0.2 * s.cov.as_ref().unwrap()[0].exp();
                SurvivalCurve::new(grid(), grid().iter().map(|t| (-r * t).exp()).collect()).unwrap()
            })
            .collect();
        let c = c_td(&curves, &g.cohort.outcomes()).unwrap();
        assert!((c - 0.5).abs() < 0.05, "{c}");
    }

    #[test]
    fn files_round_trip_through_loader() {
        let g = generate(&small(30)).unwrap();
        let d = tempfile::tempdir().unwrap();
        let paths: CohortPaths = g.cohort.write_bundle(d.path()).unwrap();
        let back = Cohort::load(&paths, &LoadOptions::default()).unwrap();
        assert_eq!(back.samples, g.cohort.samples);
        assert!(back.excluded.is_empty());
    }

    #[test]
    fn weibull_mode_and_spec_parsing() {
        let spec = GeneratorSpec::from_toml(
            "n = 50\nevent_model = \"weibull\"\nweibull_shape = 2.0\nge_dim = 10\n",
        )
        .unwrap();
        assert_eq!(spec.event_model, EventModel::Weibull);
        let g = generate(&spec).unwrap();
        assert_eq!(g.cohort.len(), 50);
        assert!(GeneratorSpec::from_toml("n = 2").is_err());
        assert!(GeneratorSpec::from_toml("bogus = 1").is_err());
        assert!(GeneratorSpec::from_toml("teacher_missing_rate = 1.5").is_err());
    }
}
