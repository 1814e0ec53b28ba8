use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};

pub const VPROB_OPEN: &str = "«VPROB»";
pub const VPROB_CLOSE: &str = "«END_VPROB»";

/// Student target string with byte spans of the delimited probability
/// sentence (delimiters included) and of the numeric substring.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSequence {
    pub text: String,
    pub vprob_span: Range<usize>,
    pub num_span: Range<usize>,
}

/// `"{explanation} «VPROB»\n\n The estimated 3-year survival probability is: {percent}%. «END_VPROB»"`
pub fn build_target_sequence(explanation: &str, percent: u8) -> Result<TargetSequence> {
    if percent > 100 {
        return Err(SurvError::invalid(format!(
            "percent {percent} outside 0..=100"
        )));
    }
    for d in [VPROB_OPEN, VPROB_CLOSE] {
        if explanation.contains(d) {
            return Err(SurvError::invalid(format!(
                "explanation contains reserved delimiter {d}"
            )));
        }
    }
    let mut text = String::with_capacity(explanation.len() + 96);
    text.push_str(explanation);
    text.push(' ');
    let vstart = text.len();
    text.push_str(VPROB_OPEN);
    text.push_str("\n\n The estimated 3-year survival probability is: ");
    let nstart = text.len();
    text.push_str(&percent.to_string());
    let nend = text.len();
    text.push_str("%. ");
    text.push_str(VPROB_CLOSE);
    let vend = text.len();
    Ok(TargetSequence {
        text,
        vprob_span: vstart..vend,
        num_span: nstart..nend,
    })
}

impl TargetSequence {
    pub fn numeric(&self) -> &str {
        &self.text[self.num_span.clone()]
    }

    pub fn vprob(&self) -> &str {
        &self.text[self.vprob_span.clone()]
    }
}

/// Byte offsets of whitespace-separated tokens.
pub fn whitespace_offsets(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..text.len());
    }
    out
}

fn overlaps(a: &Range<usize>, b: &Range<usize>) -> bool {
    a.start < b.end && b.start < a.end
}

/// Per-token membership in the probability sentence and the numeric span. A
/// token belongs to a span when its byte range overlaps it.
pub fn token_masks(
    target: &TargetSequence,
    offsets: &[Range<usize>],
) -> Result<(Vec<bool>, Vec<bool>)> {
    let mut prev_end = 0;
    for (k, r) in offsets.iter().enumerate() {
        if r.start > r.end || r.start < prev_end || r.end > target.text.len() {
            return Err(SurvError::invalid(format!(
                "token offsets not monotone at token {k} ({r:?})"
            )));
        }
        prev_end = r.end;
    }
    let vprob = offsets
        .iter()
        .map(|r| overlaps(r, &target.vprob_span))
        .collect();
    let num = offsets
        .iter()
        .map(|r| overlaps(r, &target.num_span))
        .collect();
    Ok((vprob, num))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distill::extract_probability;

    #[test]
    fn template_is_byte_exact() {
        let t = build_target_sequence("Favorable features.", 90).unwrap();
        assert_eq!(
            t.text,
            "Favorable features. «VPROB»\n\n The estimated 3-year survival probability is: 90%. «END_VPROB»"
        );
        assert_eq!(t.numeric(), "90");
        assert!(t.vprob().starts_with(VPROB_OPEN) && t.vprob().ends_with(VPROB_CLOSE));
        assert_eq!(extract_probability(&t.text), Some(0.90));
    }

    #[test]
    fn delimiter_in_explanation_rejected() {
        assert!(build_target_sequence("sneaky «VPROB» text", 50).is_err());
        assert!(build_target_sequence("sneaky «END_VPROB»", 50).is_err());
        assert!(build_target_sequence("fine", 101).is_err());
    }

    #[test]
    fn whitespace_masks() {
        let t = build_target_sequence("Favorable features.", 90).unwrap();
        let offs = whitespace_offsets(&t.text);
        let (v, n) = token_masks(&t, &offs).unwrap();
        let toks: Vec<&str> = offs.iter().map(|r| &t.text[r.clone()]).collect();
        assert_eq!(toks[0], "Favorable");
        assert!(!v[0] && !v[1]);
        assert!(v[2..].iter().all(|&x| x));
        let k = toks.iter().position(|&s| s == "90%.").unwrap();
        assert!(v[k] && n[k]);
        assert_eq!(n.iter().filter(|&&x| x).count(), 1);
    }

    #[test]
    fn straddling_token_is_included() {
        let t = build_target_sequence("ok", 5).unwrap();
        // token covering the last byte of the explanation space and first of «VPROB»
        let straddle = (t.vprob_span.start - 1)..(t.vprob_span.start + 1);
        let (v, _) = token_masks(&t, &[0..2, straddle]).unwrap();
        assert_eq!(v, vec![false, true]);
    }

    #[test]
    fn non_monotone_offsets_rejected() {
        let t = build_target_sequence("ok", 5).unwrap();
        assert!(token_masks(&t, &[3..5, 0..2]).is_err());
        assert!(token_masks(&t, &[Range { start: 4, end: 2 }]).is_err());
    }
}
