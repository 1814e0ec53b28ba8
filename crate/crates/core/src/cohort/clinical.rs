//! Clinical covariate encoding: age and ordinal stage min-max scaled on the
//! training split, sex and race as binary indicators, cancer type one-hot
//! over seven families.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CancerFamily {
    Gastrointestinal,
    Gynecological,
    Genitourinary,
    Respiratory,
    Skin,
    Brain,
    Other,
}

impl CancerFamily {
    pub const ALL: [CancerFamily; 7] = [
        CancerFamily::Gastrointestinal,
        CancerFamily::Gynecological,
        CancerFamily::Genitourinary,
        CancerFamily::Respiratory,
        CancerFamily::Skin,
        CancerFamily::Brain,
        CancerFamily::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CancerFamily::Gastrointestinal => "gastrointestinal",
            CancerFamily::Gynecological => "gynecological",
            CancerFamily::Genitourinary => "genitourinary",
            CancerFamily::Respiratory => "respiratory",
            CancerFamily::Skin => "skin",
            CancerFamily::Brain => "brain",
            CancerFamily::Other => "other",
        }
    }

    fn index(self) -> usize {
        Self::ALL.iter().position(|&f| f == self).unwrap()
    }
}

const FAMILY_TABLE: &[(CancerFamily, &[&str], &[&str])] = &[
    (
        CancerFamily::Gastrointestinal,
        &["COAD", "READ", "STAD", "ESCA", "LIHC", "PAAD", "CHOL"],
        &[
            "colon",
            "rectal",
            "rectum",
            "colorectal",
            "stomach",
            "gastric",
            "esophag",
            "liver",
            "hepat",
            "pancrea",
            "bile",
            "cholangio",
        ],
    ),
    (
        CancerFamily::Gynecological,
        &["OV", "UCEC", "UCS", "CESC"],
        &["ovar", "uter", "cervi", "endometri", "gyn"],
    ),
    (
        CancerFamily::Genitourinary,
        &["KIRC", "KIRP", "KICH", "BLCA", "PRAD", "TGCT"],
        &[
            "kidney",
            "renal",
            "bladder",
            "urothel",
            "prostat",
            "testic",
            "genitourinary",
        ],
    ),
    (
        CancerFamily::Respiratory,
        &["LUAD", "LUSC", "MESO"],
        &["lung", "mesothel", "respirat"],
    ),
    (
        CancerFamily::Skin,
        &["SKCM"],
        &["skin", "cutaneous", "melanoma"],
    ),
    (
        CancerFamily::Brain,
        &["GBM", "LGG"],
        &["brain", "glio", "astrocyt", "oligodendro"],
    ),
];

/// Maps a cancer-type label (family name, TCGA project code, or free text)
/// to its family. Unknown labels fall back to `Other` unless `strict`.
pub fn cancer_family(label: &str, strict: bool) -> Result<CancerFamily> {
    let trimmed = label.trim();
    let lower = trimmed.to_ascii_lowercase();
    let code = trimmed.trim_start_matches("TCGA-").to_ascii_uppercase();
    if let Some(f) = CancerFamily::ALL.iter().find(|f| f.name() == lower) {
        return Ok(*f);
    }
    for (family, codes, keywords) in FAMILY_TABLE {
        if codes.contains(&code.as_str()) || keywords.iter().any(|k| lower.contains(k)) {
            return Ok(*family);
        }
    }
    if strict {
        return Err(SurvError::invalid(format!(
            "unknown cancer type `{trimmed}`"
        )));
    }
    Ok(CancerFamily::Other)
}

/// Stage as an ordinal code: I → 1, II → 2, III → 3. Accepts an optional
/// "Stage " prefix, A/B/C sub-stages and digits.
pub fn parse_stage(s: &str) -> Option<u8> {
    let t = s.trim().to_ascii_uppercase();
    let t = t.strip_prefix("STAGE").unwrap_or(&t).trim();
    let t = t.trim_end_matches(['A', 'B', 'C']);
    match t {
        "I" | "1" => Some(1),
        "II" | "2" => Some(2),
        "III" | "3" => Some(3),
        _ => None,
    }
}

pub fn parse_sex(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "female" | "f" | "1" => Some(true),
        "male" | "m" | "0" => Some(false),
        _ => None,
    }
}

/// One parsed clinical row before scaling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClinicalRecord {
    pub age: f64,
    pub female: bool,
    pub race: Option<String>,
    pub stage: u8,
    pub family: CancerFamily,
}

pub const CLINICAL_COLUMNS: [&str; 5] = ["age", "sex", "race", "stage", "cancer_type"];

/// Training-split statistics applied to every split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClinicalScaler {
    pub age_min: f64,
    pub age_max: f64,
    pub stage_min: f64,
    pub stage_max: f64,
    /// Race label encoded as 1; everything else (and missing) is 0.
    pub race_majority: Option<String>,
}

fn scale(x: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (x - lo) / (hi - lo)
    } else {
        0.0
    }
}

impl ClinicalScaler {
    pub fn fit<'a>(train: impl IntoIterator<Item = &'a ClinicalRecord>) -> Result<Self> {
        let mut age = (f64::INFINITY, f64::NEG_INFINITY);
        let mut stage = (f64::INFINITY, f64::NEG_INFINITY);
        let mut races: std::collections::BTreeMap<&str, usize> = Default::default();
        let mut n = 0;
        for r in train {
            n += 1;
            age = (age.0.min(r.age), age.1.max(r.age));
            stage = (stage.0.min(r.stage as f64), stage.1.max(r.stage as f64));
            if let Some(race) = &r.race {
                *races.entry(race.as_str()).or_default() += 1;
            }
        }
        if n == 0 {
            return Err(SurvError::invalid(
                "clinical scaler needs at least one training record",
            ));
        }
        // ties go to the lexicographically first label
        let race_majority = races
            .iter()
            .fold(None::<(&str, usize)>, |best, (&k, &c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((k, c)),
            });
        Ok(ClinicalScaler {
            age_min: age.0,
            age_max: age.1,
            stage_min: stage.0,
            stage_max: stage.1,
            race_majority: race_majority.map(|(k, _)| k.to_string()),
        })
    }

    /// `[age, female, race_majority, stage, one-hot family x 7]`; not clipped.
    pub fn encode(&self, r: &ClinicalRecord) -> Vec<f64> {
        let mut v = vec![
            scale(r.age, self.age_min, self.age_max),
            f64::from(u8::from(r.female)),
            f64::from(u8::from(r.race.is_some() && r.race == self.race_majority)),
            scale(r.stage as f64, self.stage_min, self.stage_max),
        ];
        let mut onehot = [0.0; 7];
        onehot[r.family.index()] = 1.0;
        v.extend_from_slice(&onehot);
        v
    }

    pub fn feature_names() -> Vec<String> {
        let mut names: Vec<String> = ["age", "female", "race_majority", "stage"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        names.extend(
            CancerFamily::ALL
                .iter()
                .map(|f| format!("type_{}", f.name())),
        );
        names
    }
}
