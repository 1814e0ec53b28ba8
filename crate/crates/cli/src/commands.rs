use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use survfuse::blending::{
    blend_channels, count_floored, select_lambda, verbalized_curve, Channels, LambdaSelection,
};
use survfuse::cohort::{load_outcomes, read_hidden_states, write_pooled, Cohort};
use survfuse::distill::{
    build_target_record, extract_probability, horizon_means, process_teacher, read_jsonl,
    write_jsonl, TargetRecord, TeacherLine,
};
use survfuse::pooling::{attention_pool, HiddenStateMatrix};
use survfuse::survival::SurvivalCurve;
use survfuse::synth::{generate, write_truth, GeneratorSpec};
use survfuse::train::{
    evaluate_model, load_checkpoint, prepare, run_experiment_suite, save_checkpoint, ChannelReport,
    RunConfig,
};
use survfuse::{Outcome, SurvError};

use crate::manifest::Manifest;

pub enum Failure {
    Surv(SurvError),
    /// Some runs of a suite failed; their errors are in the suite report.
    Partial(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Surv(e) if e.is_validation() => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Surv(e) => write!(f, "{e}"),
            Failure::Partial(m) => f.write_str(m),
        }
    }
}

impl From<SurvError> for Failure {
    fn from(e: SurvError) -> Self {
        Failure::Surv(e)
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn create_dir(dir: &Path) -> survfuse::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| SurvError::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> survfuse::Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serialisable");
    std::fs::write(path, text + "\n").map_err(|e| SurvError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> survfuse::Result<()> {
    std::fs::write(path, text).map_err(|e| SurvError::io(path, e))
}

fn input_paths(cfg: &RunConfig) -> Vec<PathBuf> {
    [
        &cfg.outcomes,
        &cfg.covariates,
        &cfg.ge,
        &cfg.hidden_states,
        &cfg.pooled,
        &cfg.teacher,
        &cfg.token_nll,
    ]
    .into_iter()
    .flatten()
    .cloned()
    .collect()
}

/// Makes data paths absolute so a checkpoint can be evaluated from anywhere.
fn absolutize(cfg: &mut RunConfig) -> survfuse::Result<()> {
    for p in [
        &mut cfg.outcomes,
        &mut cfg.covariates,
        &mut cfg.ge,
        &mut cfg.hidden_states,
        &mut cfg.pooled,
        &mut cfg.teacher,
        &mut cfg.token_nll,
    ]
    .into_iter()
    .flatten()
    {
        *p = std::path::absolute(&*p).map_err(|e| SurvError::io(&*p, e))?;
    }
    Ok(())
}

fn load_cohort(cfg: &RunConfig) -> survfuse::Result<Cohort> {
    Cohort::load(&cfg.cohort_paths()?, &cfg.load_options())
}

fn write_curves(
    path: &Path,
    ids: &[String],
    curves: &[SurvivalCurve<f64>],
) -> survfuse::Result<()> {
    let f = File::create(path).map_err(|e| SurvError::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| SurvError::io(path, e);
    writeln!(w, "id,t,S").map_err(io)?;
    for (id, c) in ids.iter().zip(curves) {
        c.write_csv(id, &mut w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads `id,t,S` rows; rows of one id must be contiguous.
fn read_curves(path: &Path) -> survfuse::Result<Vec<(String, SurvivalCurve<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| SurvError::invalid(format!("{}: {e}", path.display())))?;
    let mut out: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let parse_err = |m: String| SurvError::Parse {
            path: path.to_path_buf(),
            line,
            message: m,
        };
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        if rec.len() != 3 {
            return Err(parse_err(format!(
                "expected 3 columns, found {}",
                rec.len()
            )));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| parse_err(format!("cannot parse `{s}` as a number")))
        };
        let (t, s) = (num(&rec[1])?, num(&rec[2])?);
        match out.last_mut() {
            Some((id, ts, ss)) if id == &rec[0] => {
                ts.push(t);
                ss.push(s);
            }
            _ => {
                if out.iter().any(|(id, ..)| id == &rec[0]) {
                    return Err(parse_err(format!(
                        "rows of `{}` are not contiguous",
                        &rec[0]
                    )));
                }
                out.push((rec[0].to_string(), vec![t], vec![s]));
            }
        }
    }
    out.into_iter()
        .map(|(id, t, s)| {
            let c = SurvivalCurve::new(t, s).map_err(|e| {
                SurvError::invalid(format!("{}: curve `{id}`: {e}", path.display()))
            })?;
            Ok((id, c))
        })
        .collect()
}

pub fn simulate(spec_path: Option<&Path>, out: &Path) -> CmdResult {
    let mut m = Manifest::new("simulate");
    let spec = match spec_path {
        Some(p) => {
            m.input(p);
            let text = std::fs::read_to_string(p).map_err(|e| SurvError::io(p, e))?;
            GeneratorSpec::from_toml(&text)
                .map_err(|e| SurvError::invalid(format!("{}: {e}", p.display())))?
        }
        None => GeneratorSpec::default(),
    };
    let syn = generate(&spec)?;
    create_dir(out)?;
    let paths = syn.cohort.write_bundle(out)?;
    let truth = out.join("truth.csv");
    write_truth(&truth, &syn.truth)?;

    // a config pointing at the bundle, ready for `train`; the network sizes
    // are scaled down to the synthetic dimensions
    let mut cfg = RunConfig {
        name: "synthetic".into(),
        horizon: spec.horizon,
        head_layers: vec![32, 32],
        dropout: 0.1,
        batch_size: 32,
        ae_hidden: vec![32],
        ae_latent: 8,
        ae_dropout: 0.0,
        ..RunConfig::default()
    };
    cfg.set_paths(&paths);
    let rel = |p: &Path| p.file_name().map(PathBuf::from).unwrap_or_default();
    for p in [
        &mut cfg.covariates,
        &mut cfg.ge,
        &mut cfg.hidden_states,
        &mut cfg.teacher,
        &mut cfg.token_nll,
    ]
    .into_iter()
    .flatten()
    {
        *p = rel(p);
    }
    cfg.outcomes = cfg.outcomes.as_deref().map(rel);
    let cfg_path = out.join("cohort.toml");
    write_text(
        &cfg_path,
        &format!(
            "# written by `survfuse simulate`; paths are relative to this file\n{}",
            cfg.to_toml()
        ),
    )?;

    m.config(&spec);
    m.seed("generator", spec.seed);
    let mut written = vec![paths.outcomes.clone()];
    written.extend(
        [
            paths.covariates,
            paths.ge,
            paths.hidden_states,
            paths.teacher,
            paths.token_nll,
        ]
        .into_iter()
        .flatten(),
    );
    written.extend([truth, cfg_path]);
    for p in written {
        m.output(p);
    }
    m.write(out)?;
    log::info!("wrote {} synthetic samples to {}", spec.n, out.display());
    Ok(())
}

#[derive(Serialize)]
struct BundleInfo {
    format_version: u32,
    samples: usize,
    modalities: String,
    cov_dim: Option<usize>,
    ge_dim: Option<usize>,
    text_dim: Option<usize>,
    excluded: Vec<(String, String)>,
}

pub fn ingest(config: &Path, out: &Path) -> CmdResult {
    let mut m = Manifest::new("ingest");
    let cfg = RunConfig::load(config)?;
    m.input(config);
    m.inputs(input_paths(&cfg));
    let cohort = load_cohort(&cfg)?;
    cohort.validate()?;
    create_dir(out)?;
    let paths = cohort.write_bundle(out)?;
    let info = BundleInfo {
        format_version: 1,
        samples: cohort.len(),
        modalities: cohort.available().to_string(),
        cov_dim: cohort.cov_dim(),
        ge_dim: cohort.ge_dim(),
        text_dim: cohort.text_dim(),
        excluded: cohort.excluded.clone(),
    };
    let info_path = out.join("bundle.json");
    write_json(&info_path, &info)?;
    m.config(&cfg);
    m.output(paths.outcomes.clone());
    for p in [
        paths.covariates,
        paths.ge,
        paths.hidden_states,
        paths.teacher,
        paths.token_nll,
    ]
    .into_iter()
    .flatten()
    {
        m.output(p);
    }
    m.output(info_path);
    m.write(out)?;
    log::info!(
        "ingested {} samples ({} excluded)",
        cohort.len(),
        cohort.excluded.len()
    );
    Ok(())
}

pub fn pool(hidden_states: &Path, out: &Path) -> CmdResult {
    let mut m = Manifest::new("pool");
    m.input(hidden_states);
    let states = read_hidden_states(hidden_states)?;
    let pooled: Vec<(String, Vec<f32>)> = states
        .iter()
        .map(|h| {
            let h64 = HiddenStateMatrix::new(
                h.id.clone(),
                h.rows,
                h.cols,
                h.values.iter().map(|&v| f64::from(v)).collect(),
            )?;
            Ok((
                h.id.clone(),
                attention_pool(&h64)?
                    .into_iter()
                    .map(|v| v as f32)
                    .collect(),
            ))
        })
        .collect::<survfuse::Result<_>>()?;
    create_dir(out)?;
    let path = out.join("pooled.svpv");
    let refs: Vec<(&str, &[f32])> = pooled
        .iter()
        .map(|(id, v)| (id.as_str(), v.as_slice()))
        .collect();
    write_pooled(&path, &refs)?;
    m.output(path);
    m.write(out)?;
    log::info!("pooled {} samples", pooled.len());
    Ok(())
}

pub fn train(config: &Path, out: &Path) -> CmdResult {
    let mut m = Manifest::new("train");
    let mut cfg = RunConfig::load(config)?;
    absolutize(&mut cfg)?;
    m.input(config);
    m.inputs(input_paths(&cfg));
    let cohort = load_cohort(&cfg)?;
    let run = survfuse::train::train(&cfg, &cohort)?;
    create_dir(out)?;

    let report = out.join("report.json");
    write_json(&report, &run.report)?;
    let table = out.join("report.txt");
    write_text(&table, &run.report.summary())?;
    let ck = out.join("model.svck");
    save_checkpoint(
        &run.model,
        &cfg,
        run.data.dims,
        run.report.fit.epochs_run as u64,
        &ck,
    )?;
    let config_copy = out.join("config.toml");
    write_text(&config_copy, &cfg.to_toml())?;
    let curves =
        write_channel_curves(out, &run.evaluation.test_ids, &run.evaluation.test_channels)?;

    print!("{}", run.report.summary());
    m.config(&cfg);
    m.seed("seed", cfg.seed);
    m.seed("split_seed", cfg.split_seed);
    for p in [report, table, ck, config_copy].into_iter().chain(curves) {
        m.output(p);
    }
    m.write(out)?;
    Ok(())
}

fn write_channel_curves(
    out: &Path,
    ids: &[String],
    ch: &Channels<f64>,
) -> survfuse::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |name: &str, curves: &[SurvivalCurve<f64>]| -> survfuse::Result<()> {
        let p = out.join(name);
        write_curves(&p, ids, curves)?;
        written.push(p);
        Ok(())
    };
    put("test_curves_hidden.csv", &ch.hidden)?;
    if let Some(v) = &ch.verbalized {
        put("test_curves_verbalized.csv", v)?;
        put("test_curves_combined.csv", &ch.combined)?;
    }
    Ok(written)
}

pub fn suite(configs_dir: &Path, out: &Path) -> CmdResult {
    let mut m = Manifest::new("suite");
    let mut files: Vec<PathBuf> = std::fs::read_dir(configs_dir)
        .map_err(|e| SurvError::io(configs_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(
            SurvError::invalid(format!("no *.toml configs in {}", configs_dir.display())).into(),
        );
    }
    let mut configs = Vec::with_capacity(files.len());
    for f in &files {
        let mut cfg = RunConfig::load(f)?;
        absolutize(&mut cfg)?;
        m.input(f);
        configs.push(cfg);
    }
    let data_paths = |c: &RunConfig| input_paths(c);
    if let Some(c) = configs
        .iter()
        .find(|c| data_paths(c) != data_paths(&configs[0]))
    {
        return Err(SurvError::invalid(format!(
            "config `{}` points at different data files than `{}`",
            c.name, configs[0].name
        ))
        .into());
    }
    m.inputs(input_paths(&configs[0]));
    let cohort = load_cohort(&configs[0])?;
    let threads = threads()?;
    let report = run_experiment_suite(&configs, &cohort, threads);
    create_dir(out)?;
    let json = out.join("suite.json");
    write_json(&json, &report)?;
    let table = out.join("suite.txt");
    write_text(&table, &report.table())?;
    print!("{}", report.table());

    m.config(&configs);
    m.seed("split_seed", configs[0].split_seed);
    m.output(json);
    m.output(table);
    m.write(out)?;
    let failed: Vec<&str> = report
        .rows
        .iter()
        .filter(|r| r.error.is_some())
        .map(|r| r.name.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(Failure::Partial(format!(
            "{} of {} runs failed: {}",
            failed.len(),
            report.rows.len(),
            failed.join(", ")
        )));
    }
    Ok(())
}

fn threads() -> survfuse::Result<usize> {
    match std::env::var("SURVFUSE_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(SurvError::invalid(format!(
                "SURVFUSE_THREADS must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[derive(Serialize)]
struct EvalReport {
    name: String,
    lambda: Option<LambdaSelection>,
    validation: ChannelReport,
    test: ChannelReport,
}

/// One row per split and channel: `split channel n c_td ibs`.
fn channel_table(r: &EvalReport) -> String {
    let mut s = String::from("split\tchannel\tn\tc_td\tibs\n");
    for (split, c) in [("validation", &r.validation), ("test", &r.test)] {
        for (name, m) in [
            ("hidden", Some(&c.hidden)),
            ("verbalized", c.verbalized.as_ref()),
            ("combined", c.combined.as_ref()),
        ] {
            if let Some(m) = m {
                s += &format!("{split}\t{name}\t{}\t{:.6}\t{:.6}\n", c.n, m.c_td, m.ibs);
            }
        }
    }
    s
}

pub fn eval(checkpoint: &Path, config: Option<&Path>, out: &Path) -> CmdResult {
    let mut m = Manifest::new("eval");
    m.input(checkpoint);
    let (model, mut cfg, dims) = load_checkpoint(checkpoint)?;
    if let Some(p) = config {
        let other = RunConfig::load(p)?;
        m.input(p);
        cfg.outcomes = other.outcomes;
        cfg.covariates = other.covariates;
        cfg.ge = other.ge;
        cfg.hidden_states = other.hidden_states;
        cfg.pooled = other.pooled;
        cfg.teacher = other.teacher;
        cfg.token_nll = other.token_nll;
    }
    m.inputs(input_paths(&cfg));
    let data = prepare(&load_cohort(&cfg)?, &cfg)?;
    if data.dims != dims {
        return Err(SurvError::invalid(format!(
            "data dimensions {:?} do not match the checkpoint's {:?}",
            data.dims, dims
        ))
        .into());
    }
    let ev = evaluate_model(&model, &cfg, &data)?;
    let report = EvalReport {
        name: cfg.name.clone(),
        lambda: ev.lambda.clone(),
        validation: ev.validation.clone(),
        test: ev.test.clone(),
    };
    create_dir(out)?;
    let json = out.join("eval.json");
    write_json(&json, &report)?;
    let table = out.join("eval.tsv");
    let text = channel_table(&report);
    write_text(&table, &text)?;
    let curves = write_channel_curves(out, &ev.test_ids, &ev.test_channels)?;
    print!("{text}");
    m.config(&cfg);
    m.seed("seed", cfg.seed);
    m.seed("split_seed", cfg.split_seed);
    for p in [json, table].into_iter().chain(curves) {
        m.output(p);
    }
    m.write(out)?;
    Ok(())
}

pub fn parse_teacher(
    teacher: &Path,
    outcomes: Option<&Path>,
    calibration_correction: bool,
    horizon: f64,
    out: &Path,
) -> CmdResult {
    let mut m = Manifest::new("parse-teacher");
    m.input(teacher);
    if calibration_correction && outcomes.is_none() {
        return Err(SurvError::invalid("--calibration-correction needs --outcomes").into());
    }
    let lines: Vec<TeacherLine> = read_jsonl(teacher)?;
    let outcome_map: HashMap<String, Outcome<f64>> = match outcomes {
        Some(p) => {
            m.input(p);
            load_outcomes(p, Some(horizon))?.into_iter().collect()
        }
        None => HashMap::new(),
    };
    // every supplied record counts towards the fallback means
    let means = horizon_means(&lines);
    let mut targets = Vec::with_capacity(lines.len());
    let mut skipped = 0;
    for line in &lines {
        let rec = match process_teacher(line, means) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("teacher record `{}` skipped: {e}", line.id);
                skipped += 1;
                continue;
            }
        };
        targets.push(build_target_record(
            &rec,
            outcome_map.get(&line.id),
            calibration_correction,
        )?);
    }
    create_dir(out)?;
    let path = out.join("targets.jsonl");
    write_jsonl(&path, &targets)?;
    let masked = targets.iter().filter(|t| !t.text_loss_included).count();
    log::info!(
        "{} targets written ({skipped} skipped, {masked} excluded from the text loss)",
        targets.len()
    );
    m.config(&serde_json::json!({ "calibration_correction": calibration_correction, "horizon": horizon }));
    m.output(path);
    m.write(out)?;
    Ok(())
}

pub fn blend(
    hidden: &Path,
    targets: &Path,
    lambda: Option<f64>,
    outcomes: Option<&Path>,
    horizon: f64,
    out: &Path,
) -> CmdResult {
    let mut m = Manifest::new("blend");
    m.input(hidden);
    m.input(targets);
    let curves = read_curves(hidden)?;
    let recs: Vec<TargetRecord> = read_jsonl(targets)?;
    let percent: HashMap<&str, f64> = recs
        .iter()
        .filter_map(|r| extract_probability(&r.target).map(|p| (r.id.as_str(), 100.0 * p)))
        .collect();
    count_floored(curves.iter().filter_map(|(id, _)| percent.get(id.as_str())));
    let verbal = curves
        .iter()
        .map(|(id, c)| {
            percent
                .get(id.as_str())
                .map(|&p| verbalized_curve(p, c.times()))
                .transpose()
        })
        .collect::<survfuse::Result<Vec<_>>>()?;
    let ids: Vec<String> = curves.iter().map(|(id, _)| id.clone()).collect();
    let hidden_curves: Vec<SurvivalCurve<f64>> = curves.into_iter().map(|(_, c)| c).collect();

    let selection = match (lambda, outcomes) {
        (Some(l), _) => {
            if !(0.0..=1.0).contains(&l) {
                return Err(SurvError::invalid(format!("lambda {l} outside [0, 1]")).into());
            }
            LambdaSelection {
                lambda: l,
                c_td: f64::NAN,
                scores: Vec::new(),
            }
        }
        (None, Some(p)) => {
            m.input(p);
            let map: HashMap<String, Outcome<f64>> =
                load_outcomes(p, Some(horizon))?.into_iter().collect();
            let outs = ids
                .iter()
                .map(|id| {
                    map.get(id).copied().ok_or_else(|| {
                        SurvError::invalid(format!(
                            "no outcome for curve `{id}` in {}",
                            p.display()
                        ))
                    })
                })
                .collect::<survfuse::Result<Vec<_>>>()?;
            select_lambda(
                &hidden_curves,
                &verbal,
                &outs,
                &survfuse::blending::default_lambda_grid(),
            )?
        }
        (None, None) => return Err(SurvError::invalid("blend needs --lambda or --outcomes").into()),
    };
    let ch = blend_channels(hidden_curves, &verbal, selection.lambda)?;
    create_dir(out)?;
    let mut written = Vec::new();
    let p = out.join("combined.csv");
    write_curves(&p, &ids, &ch.combined)?;
    written.push(p);
    if let Some(v) = &ch.verbalized {
        let p = out.join("verbalized.csv");
        write_curves(&p, &ids, v)?;
        written.push(p);
    }
    let summary = out.join("blend.json");
    write_json(
        &summary,
        &serde_json::json!({
            "lambda": selection.lambda,
            "selection_c_td": selection.c_td.is_finite().then_some(selection.c_td),
            "scores": selection.scores,
            "missing_verbalized": ch.missing,
        }),
    )?;
    written.push(summary);
    log::info!(
        "blended {} curves with lambda {}",
        ids.len(),
        selection.lambda
    );
    m.config(&serde_json::json!({ "lambda": lambda, "horizon": horizon }));
    for p in written {
        m.output(p);
    }
    m.write(out)?;
    Ok(())
}
