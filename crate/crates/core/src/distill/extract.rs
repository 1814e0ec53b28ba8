use std::sync::OnceLock;

use regex::Regex;

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(\d+(?:\.\d+)?|\.\d+)(\s*%)?").expect("static regex"))
}

/// Pulls a survival probability out of free-form teacher text.
///
/// Preference order, last match winning within each tier:
/// 1. a number in `[0, 100]` followed by optional whitespace and `%`;
/// 2. a bare number in `[0, 1]`, read as a probability;
/// 3. a bare number in `(1, 100]`, read as a percent.
pub fn extract_probability(text: &str) -> Option<f64> {
    let mut percent = None;
    let mut bare_prob = None;
    let mut bare_percent = None;
    for cap in number_re().captures_iter(text) {
        let Ok(v) = cap[1].parse::<f64>() else {
            continue;
        };
        if cap.get(2).is_some() {
            if (0.0..=100.0).contains(&v) {
                percent = Some(v);
            }
        } else if (0.0..=1.0).contains(&v) {
            bare_prob = Some(v);
        } else if v > 1.0 && v <= 100.0 {
            bare_percent = Some(v);
        }
    }
    percent
        .map(|p| p / 100.0)
        .or(bare_prob)
        .or(bare_percent.map(|p| p / 100.0))
}
