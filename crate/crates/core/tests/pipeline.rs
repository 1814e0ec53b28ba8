// File-level round trips between the stages that the CLI wires together.

use survfuse::cohort::{read_hidden_states, write_pooled, Cohort, CohortPaths, LoadOptions};
use survfuse::distill::{
    build_target_record, calibration_mask, extract_probability, horizon_means, process_teacher,
    read_jsonl, write_jsonl, TargetRecord, TeacherLine,
};
use survfuse::fusion::{Modality, ModalitySet};
use survfuse::metrics::c_td;
use survfuse::pooling::{attention_pool, HiddenStateMatrix};
use survfuse::synth::{generate, oracle_curves, GeneratorSpec};
use survfuse::train::{prepare, FusionMode, RunConfig};

fn small() -> GeneratorSpec {
    GeneratorSpec {
        n: 120,
        ge_dim: 10,
        seed: 21,
        ..GeneratorSpec::default()
    }
}

fn config(paths: &CohortPaths) -> RunConfig {
    let mut cfg = RunConfig {
        modalities: ModalitySet::only(Modality::Text),
        fusion: FusionMode::None,
        calibration_correction: true,
        ..RunConfig::default()
    };
    cfg.set_paths(paths);
    cfg
}

#[test]
fn pooled_cache_matches_on_the_fly_pooling() {
    let dir = tempfile::tempdir().unwrap();
    let syn = generate(&small()).unwrap();
    let paths = syn.cohort.write_bundle(dir.path()).unwrap();

    let hidden = read_hidden_states(paths.hidden_states.as_ref().unwrap()).unwrap();
    let pooled: Vec<(String, Vec<f32>)> = hidden
        .iter()
        .map(|h| {
            let h64 = HiddenStateMatrix::new(
                h.id.clone(),
                h.rows,
                h.cols,
                h.values.iter().map(|&v| f64::from(v)).collect(),
            )
            .unwrap();
            let v = attention_pool(&h64).unwrap();
            (h.id.clone(), v.into_iter().map(|x| x as f32).collect())
        })
        .collect();
    let svpv = dir.path().join("pooled.svpv");
    let refs: Vec<(&str, &[f32])> = pooled
        .iter()
        .map(|(id, v)| (id.as_str(), v.as_slice()))
        .collect();
    write_pooled(&svpv, &refs).unwrap();

    let cached_paths = CohortPaths {
        hidden_states: None,
        pooled: Some(svpv),
        ..paths.clone()
    };
    let fresh = Cohort::load(&paths, &LoadOptions::default()).unwrap();
    let cached = Cohort::load(&cached_paths, &LoadOptions::default()).unwrap();
    let a = prepare(&fresh, &config(&paths)).unwrap();
    let b = prepare(&cached, &config(&cached_paths)).unwrap();
    assert_eq!(a.split, b.split);
    for (x, y) in a.examples.iter().zip(&b.examples) {
        assert_eq!(x.id, y.id);
        assert_eq!(x.verbalized_percent, y.verbalized_percent);
        // the cache stores f32
        for (u, v) in x
            .text
            .as_ref()
            .unwrap()
            .iter()
            .zip(y.text.as_ref().unwrap())
        {
            assert!((u - v).abs() <= 1e-6 * u.abs().max(1.0), "{u} vs {v}");
        }
    }
}

#[test]
fn target_file_carries_the_rounded_percent_and_mask() {
    let dir = tempfile::tempdir().unwrap();
    let syn = generate(&small()).unwrap();
    let paths = syn.cohort.write_bundle(dir.path()).unwrap();
    let lines: Vec<TeacherLine> = read_jsonl(paths.teacher.as_ref().unwrap()).unwrap();
    assert_eq!(lines.len(), syn.cohort.len());

    let means = horizon_means(&lines);
    let mut records = Vec::new();
    for (line, s) in lines.iter().zip(&syn.cohort.samples) {
        let rec = process_teacher(line, means).unwrap();
        let t = build_target_record(&rec, Some(&s.outcome), true).unwrap();
        assert_eq!(
            extract_probability(&t.target),
            Some(f64::from(rec.percent) / 100.0)
        );
        assert_eq!(
            t.text_loss_included,
            calibration_mask(f64::from(rec.percent), &s.outcome, 3.0, 50.0)
        );
        let [a, b] = t.num_span;
        assert_eq!(t.target[a..b], rec.percent.to_string());
        records.push(t);
    }
    let p = dir.path().join("targets.jsonl");
    write_jsonl(&p, &records).unwrap();
    let back: Vec<TargetRecord> = read_jsonl(&p).unwrap();
    assert_eq!(back, records);
}

#[test]
fn calibration_counts_agree_with_the_mask() {
    let syn = generate(&GeneratorSpec {
        teacher_shift: 1.5,
        ..small()
    })
    .unwrap();
    let mut cfg = config(&CohortPaths::default());
    cfg.outcomes = None;
    let data = prepare(&syn.cohort, &cfg).unwrap();
    let expect = data
        .split
        .train
        .iter()
        .map(|&i| &data.examples[i])
        .filter(|e| e.text_loss.is_some())
        // the generator only emits token NLLs when some response parses
        .filter(|e| !calibration_mask(e.verbalized_percent.unwrap(), &e.outcome, 3.0, 50.0))
        .count();
    assert!(expect > 0);
    assert_eq!(data.masked_samples, expect);
}

#[test]
fn all_modality_oracle_beats_each_single_modality() {
    let spec = GeneratorSpec::default();
    let syn = generate(&spec).unwrap();
    let times: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
    let outcomes = syn.cohort.outcomes();
    let score = |mods| {
        c_td(
            &oracle_curves(&spec, &syn.truth, &times, mods).unwrap(),
            &outcomes,
        )
        .unwrap()
    };
    let all = score(ModalitySet::all());
    for m in [Modality::Text, Modality::Cov, Modality::Ge] {
        let one = score(ModalitySet::only(m));
        assert!(all > one + 0.03, "{m}: {one} vs all {all}");
    }
}
