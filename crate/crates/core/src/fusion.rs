//! Early (concatenation) and gated late fusion of modality representations.
//!
//! Late fusion nests two sigmoid gates:
//! `o = (1 - γ_ge) [(1 - γ_cov) o_text + γ_cov o_cov] + γ_ge o_ge`,
//! elementwise over bins for the discrete head and on scalars for CoxPH.
//! Disabled modalities drop their branch and gate.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};
use crate::nn::Params;
use crate::scalar::{sigmoid, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Cov,
    Ge,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Text, Modality::Cov, Modality::Ge];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Cov => "cov",
            Modality::Ge => "ge",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = SurvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" => Ok(Modality::Text),
            "cov" => Ok(Modality::Cov),
            "ge" => Ok(Modality::Ge),
            other => Err(SurvError::invalid(format!("unknown modality `{other}`"))),
        }
    }
}

/// Subset of {text, cov, ge}, iterated in the fixed order text, cov, ge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<Modality>", from = "Vec<Modality>")]
pub struct ModalitySet {
    pub text: bool,
    pub cov: bool,
    pub ge: bool,
}

impl ModalitySet {
    pub fn all() -> Self {
        ModalitySet {
            text: true,
            cov: true,
            ge: true,
        }
    }

    pub fn only(m: Modality) -> Self {
        let mut s = ModalitySet::default();
        s.insert(m);
        s
    }

    pub fn insert(&mut self, m: Modality) {
        match m {
            Modality::Text => self.text = true,
            Modality::Cov => self.cov = true,
            Modality::Ge => self.ge = true,
        }
    }

    pub fn contains(&self, m: Modality) -> bool {
        match m {
            Modality::Text => self.text,
            Modality::Cov => self.cov,
            Modality::Ge => self.ge,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Modality> + '_ {
        Modality::ALL.into_iter().filter(|&m| self.contains(m))
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl From<Vec<Modality>> for ModalitySet {
    fn from(v: Vec<Modality>) -> Self {
        let mut s = ModalitySet::default();
        for m in v {
            s.insert(m);
        }
        s
    }
}

impl From<ModalitySet> for Vec<Modality> {
    fn from(s: ModalitySet) -> Self {
        s.iter().collect()
    }
}

impl fmt::Display for ModalitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.iter().map(Modality::name).collect();
        f.write_str(&names.join("+"))
    }
}

/// Where each modality sits inside an early-fused feature vector.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureLayout {
    pub text: Option<Range<usize>>,
    pub cov: Option<Range<usize>>,
    pub ge: Option<Range<usize>>,
}

impl FeatureLayout {
    pub fn len(&self) -> usize {
        [&self.text, &self.cov, &self.ge]
            .iter()
            .filter_map(|r| r.as_ref())
            .map(|r| r.end)
            .max()
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn segment<'a, T>(&self, fused: &'a [T], m: Modality) -> Option<&'a [T]> {
        let r = match m {
            Modality::Text => &self.text,
            Modality::Cov => &self.cov,
            Modality::Ge => &self.ge,
        };
        r.clone().map(|r| &fused[r])
    }
}

/// `[z_text ; x_cov ; z_ge]` over the modalities that are present. Every
/// modality in `required` must be supplied.
pub fn early_fuse<T: Scalar>(
    text: Option<&[T]>,
    cov: Option<&[T]>,
    ge: Option<&[T]>,
    required: ModalitySet,
) -> Result<(Vec<T>, FeatureLayout)> {
    let parts = [
        (Modality::Text, text),
        (Modality::Cov, cov),
        (Modality::Ge, ge),
    ];
    let mut out = Vec::new();
    let mut layout = FeatureLayout::default();
    for (m, part) in parts {
        match part {
            Some(v) => {
                let r = out.len()..out.len() + v.len();
                out.extend_from_slice(v);
                match m {
                    Modality::Text => layout.text = Some(r),
                    Modality::Cov => layout.cov = Some(r),
                    Modality::Ge => layout.ge = Some(r),
                }
            }
            None if required.contains(m) => {
                return Err(SurvError::invalid(format!(
                    "early fusion: required modality `{m}` is missing"
                )));
            }
            None => {}
        }
    }
    if out.is_empty() && layout == FeatureLayout::default() {
        return Err(SurvError::invalid("early fusion: no modality supplied"));
    }
    Ok((out, layout))
}

/// Per-modality head outputs: `B` logits each (discrete) or one score (CoxPH).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModalityOutputs<T> {
    pub text: Option<Vec<T>>,
    pub cov: Option<Vec<T>>,
    pub ge: Option<Vec<T>>,
}

impl<T: Scalar> ModalityOutputs<T> {
    fn width(&self) -> Result<usize> {
        let lens: Vec<usize> = [&self.text, &self.cov, &self.ge]
            .iter()
            .filter_map(|o| o.as_ref().map(Vec::len))
            .collect();
        match lens.first() {
            None => Err(SurvError::invalid("late fusion: no modality outputs")),
            Some(&w) if lens.iter().all(|&l| l == w) => Ok(w),
            Some(&w) => Err(SurvError::dim(
                "modality output width",
                w,
                *lens.iter().find(|&&l| l != w).unwrap(),
            )),
        }
    }

    pub fn modalities(&self) -> ModalitySet {
        ModalitySet {
            text: self.text.is_some(),
            cov: self.cov.is_some(),
            ge: self.ge.is_some(),
        }
    }
}

/// Gate logits; realised gates are `sigmoid(logit)`. The cov gate exists when
/// both text and cov are fused, the ge gate when ge and at least one other
/// modality are fused.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionGates<T> {
    pub cov: Option<Vec<T>>,
    pub ge: Option<Vec<T>>,
}

impl<T: Scalar> FusionGates<T> {
    /// Zero logits (gates = 0.5) of length `width` (B for discrete, 1 for CoxPH).
    pub fn new(modalities: ModalitySet, width: usize) -> Self {
        let cov = (modalities.text && modalities.cov).then(|| vec![T::zero(); width]);
        let ge =
            (modalities.ge && (modalities.text || modalities.cov)).then(|| vec![T::zero(); width]);
        FusionGates { cov, ge }
    }

    pub fn cov_values(&self) -> Option<Vec<T>> {
        self.cov
            .as_ref()
            .map(|v| v.iter().map(|&l| sigmoid(l)).collect())
    }

    pub fn ge_values(&self) -> Option<Vec<T>> {
        self.ge
            .as_ref()
            .map(|v| v.iter().map(|&l| sigmoid(l)).collect())
    }

    fn check(&self, out: &ModalityOutputs<T>, width: usize) -> Result<()> {
        let mods = out.modalities();
        let want = FusionGates::<T>::new(mods, width);
        for (name, have, need) in [("cov", &self.cov, &want.cov), ("ge", &self.ge, &want.ge)] {
            match (have, need) {
                (Some(h), Some(_)) if h.len() != width => {
                    return Err(SurvError::dim(format!("{name} gate"), width, h.len()))
                }
                (Some(_), None) | (None, Some(_)) => {
                    return Err(SurvError::invalid(format!(
                        "{name} gate does not match fused modalities {mods}"
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Gradients w.r.t. modality outputs and gate logits.
#[derive(Clone, Debug, PartialEq)]
pub struct LateFusionGrads<T> {
    pub outputs: ModalityOutputs<T>,
    pub gates: FusionGates<T>,
}

fn inner_mix<T: Scalar>(out: &ModalityOutputs<T>, g_cov: Option<&[T]>, k: usize) -> Option<T> {
    match (&out.text, &out.cov) {
        (Some(t), Some(c)) => {
            let g = g_cov.expect("cov gate checked")[k];
            Some((T::one() - g) * t[k] + g * c[k])
        }
        (Some(t), None) => Some(t[k]),
        (None, Some(c)) => Some(c[k]),
        (None, None) => None,
    }
}

/// Fused logits (or the fused score as a length-1 vector).
pub fn late_fuse<T: Scalar>(
    outputs: &ModalityOutputs<T>,
    gates: &FusionGates<T>,
) -> Result<Vec<T>> {
    let width = outputs.width()?;
    gates.check(outputs, width)?;
    let g_cov = gates.cov_values();
    let g_ge = gates.ge_values();
    Ok((0..width)
        .map(|k| {
            let inner = inner_mix(outputs, g_cov.as_deref(), k);
            match (inner, &outputs.ge) {
                (Some(i), Some(ge)) => {
                    let g = g_ge.as_ref().expect("ge gate checked")[k];
                    (T::one() - g) * i + g * ge[k]
                }
                (Some(i), None) => i,
                (None, Some(ge)) => ge[k],
                (None, None) => unreachable!("width() rejects empty outputs"),
            }
        })
        .collect())
}

/// Chain rule through the nested gates and the sigmoid parameterisation.
pub fn late_fuse_backward<T: Scalar>(
    upstream: &[T],
    outputs: &ModalityOutputs<T>,
    gates: &FusionGates<T>,
) -> Result<LateFusionGrads<T>> {
    let width = outputs.width()?;
    gates.check(outputs, width)?;
    if upstream.len() != width {
        return Err(SurvError::dim(
            "late fusion upstream gradient",
            width,
            upstream.len(),
        ));
    }
    let g_cov = gates.cov_values();
    let g_ge = gates.ge_values();
    let zeros = || Some(vec![T::zero(); width]);
    let mut grads = LateFusionGrads {
        outputs: ModalityOutputs {
            text: outputs.text.as_ref().and_then(|_| zeros()),
            cov: outputs.cov.as_ref().and_then(|_| zeros()),
            ge: outputs.ge.as_ref().and_then(|_| zeros()),
        },
        gates: FusionGates {
            cov: gates.cov.as_ref().and_then(|_| zeros()),
            ge: gates.ge.as_ref().and_then(|_| zeros()),
        },
    };
    for k in 0..width {
        let up = upstream[k];
        // gradient reaching the inner (text/cov) mixture
        let mut up_inner = up;
        if let (Some(ge), Some(gg)) = (&outputs.ge, &g_ge) {
            let g = gg[k];
            grads.outputs.ge.as_mut().unwrap()[k] = up * g;
            if let Some(inner) = inner_mix(outputs, g_cov.as_deref(), k) {
                up_inner = up * (T::one() - g);
                grads.gates.ge.as_mut().unwrap()[k] = up * (ge[k] - inner) * g * (T::one() - g);
            }
        } else if outputs.ge.is_some() {
            grads.outputs.ge.as_mut().unwrap()[k] = up;
        }
        match (&outputs.text, &outputs.cov) {
            (Some(t), Some(c)) => {
                let g = g_cov.as_ref().unwrap()[k];
                grads.outputs.text.as_mut().unwrap()[k] = up_inner * (T::one() - g);
                grads.outputs.cov.as_mut().unwrap()[k] = up_inner * g;
                grads.gates.cov.as_mut().unwrap()[k] =
                    up_inner * (c[k] - t[k]) * g * (T::one() - g);
            }
            (Some(_), None) => grads.outputs.text.as_mut().unwrap()[k] = up_inner,
            (None, Some(_)) => grads.outputs.cov.as_mut().unwrap()[k] = up_inner,
            (None, None) => {}
        }
    }
    Ok(grads)
}

impl<T: Scalar> Params<T> for FusionGates<T> {
    fn tensors(&self) -> Vec<(String, &[T])> {
        let mut v = Vec::new();
        if let Some(c) = &self.cov {
            v.push(("cov_gate".to_string(), c.as_slice()));
        }
        if let Some(g) = &self.ge {
            v.push(("ge_gate".to_string(), g.as_slice()));
        }
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = Vec::new();
        if let Some(c) = &mut self.cov {
            v.push(c.as_mut_slice());
        }
        if let Some(g) = &mut self.ge {
            v.push(g.as_mut_slice());
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_difference_check;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn outs(t: &[f64], c: &[f64], g: &[f64]) -> ModalityOutputs<f64> {
        ModalityOutputs {
            text: Some(t.to_vec()),
            cov: Some(c.to_vec()),
            ge: Some(g.to_vec()),
        }
    }

    fn gates(cov: f64, ge: f64, w: usize) -> FusionGates<f64> {
        FusionGates {
            cov: Some(vec![cov; w]),
            ge: Some(vec![ge; w]),
        }
    }

    #[test]
    fn early_fusion_concatenates_in_order() {
        let (z, layout) = early_fuse(
            Some(&[1.0, 2.0, 3.0, 4.0][..]),
            Some(&[5.0, 6.0, 7.0][..]),
            Some(&[8.0, 9.0, 10.0, 11.0, 12.0][..]),
            ModalitySet::all(),
        )
        .unwrap();
        assert_eq!(z, (1..=12).map(|x| x as f64).collect::<Vec<_>>());
        assert_eq!(layout.len(), 12);
        assert_eq!(layout.segment(&z, Modality::Cov).unwrap(), &[5.0, 6.0, 7.0]);
        assert_eq!(
            layout.segment(&z, Modality::Ge).unwrap(),
            &[8.0, 9.0, 10.0, 11.0, 12.0]
        );
    }

    #[test]
    fn early_fusion_text_only() {
        let (z, layout) = early_fuse(
            Some(&[0.5, -0.5][..]),
            None,
            None,
            ModalitySet::only(Modality::Text),
        )
        .unwrap();
        assert_eq!(z, vec![0.5, -0.5]);
        assert!(layout.cov.is_none());
    }

    #[test]
    fn early_fusion_missing_required() {
        assert!(early_fuse::<f64>(Some(&[1.0][..]), None, None, ModalitySet::all()).is_err());
        assert!(early_fuse::<f64>(None, None, None, ModalitySet::default()).is_err());
    }

    #[test]
    fn saturated_gates_collapse() {
        let o = outs(&[1.0, -2.0], &[3.0, 0.5], &[7.0, -9.0]);
        let f = late_fuse(&o, &gates(0.3, f64::INFINITY, 2)).unwrap();
        assert_eq!(f, vec![7.0, -9.0]);
        let f = late_fuse(&o, &gates(f64::NEG_INFINITY, f64::NEG_INFINITY, 2)).unwrap();
        assert_eq!(f, vec![1.0, -2.0]);
        let f = late_fuse(&o, &gates(f64::INFINITY, f64::NEG_INFINITY, 2)).unwrap();
        assert_eq!(f, vec![3.0, 0.5]);
    }

    #[test]
    fn half_cov_gate_worked_example() {
        let o = outs(&[2.0], &[4.0], &[100.0]);
        let f = late_fuse(&o, &gates(0.0, f64::NEG_INFINITY, 1)).unwrap();
        assert_eq!(f, vec![3.0]);
    }

    #[test]
    fn disabled_modalities_drop_gates() {
        let o = ModalityOutputs {
            text: Some(vec![1.5]),
            cov: None,
            ge: None,
        };
        let g = FusionGates::new(o.modalities(), 1);
        assert!(g.cov.is_none() && g.ge.is_none());
        assert_eq!(late_fuse(&o, &g).unwrap(), vec![1.5]);
        let o = ModalityOutputs {
            text: None,
            cov: Some(vec![1.0]),
            ge: Some(vec![3.0]),
        };
        let g = FusionGates::new(o.modalities(), 1);
        assert!(g.cov.is_none() && g.ge.is_some());
        assert_eq!(late_fuse(&o, &g).unwrap(), vec![2.0]);
        assert!(late_fuse(&o, &gates(0.0, 0.0, 1)).is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let o = outs(&[1.0, 2.0], &[1.0], &[1.0, 2.0]);
        assert!(late_fuse(&o, &gates(0.0, 0.0, 2)).is_err());
        let o = outs(&[1.0], &[1.0], &[1.0]);
        assert!(late_fuse(&o, &gates(0.0, 0.0, 2)).is_err());
    }

    #[test]
    fn backward_degenerate_cases() {
        let o = outs(&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]);
        let gr = late_fuse_backward(&[1.0, 1.0], &o, &gates(0.2, f64::INFINITY, 2)).unwrap();
        assert_eq!(gr.outputs.text.unwrap(), vec![0.0, 0.0]);
        assert_eq!(gr.outputs.cov.unwrap(), vec![0.0, 0.0]);
        assert_eq!(gr.outputs.ge.unwrap(), vec![1.0, 1.0]);
        let o = outs(&[2.0], &[2.0], &[2.0]);
        let gr = late_fuse_backward(&[1.3], &o, &gates(0.4, -0.7, 1)).unwrap();
        assert_eq!(gr.gates.cov.unwrap(), vec![0.0]);
        assert_eq!(gr.gates.ge.unwrap(), vec![0.0]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let w = 4;
            let mut r = || {
                (0..w)
                    .map(|_| rng.random_range(-2.0..2.0))
                    .collect::<Vec<f64>>()
            };
            let o = ModalityOutputs {
                text: Some(r()),
                cov: Some(r()),
                ge: Some(r()),
            };
            let g = FusionGates {
                cov: Some(r()),
                ge: Some(r()),
            };
            let up = r();
            let loss = |gg: &FusionGates<f64>| {
                late_fuse(&o, gg)
                    .unwrap()
                    .iter()
                    .zip(&up)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            };
            let gr = late_fuse_backward(&up, &o, &g).unwrap();
            let err = finite_difference_check(&g, &gr.gates, loss, None, 1e-6);
            assert!(err < 1e-6, "{err}");
            let out_loss = |t: &Vec<f64>| {
                let o2 = ModalityOutputs {
                    text: Some(t.clone()),
                    ..o.clone()
                };
                late_fuse(&o2, &g)
                    .unwrap()
                    .iter()
                    .zip(&up)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            };
            let err = finite_difference_check(
                o.text.as_ref().unwrap(),
                gr.outputs.text.as_ref().unwrap(),
                out_loss,
                None,
                1e-6,
            );
            assert!(err < 1e-6, "{err}");
        }
    }

    proptest! {
        #[test]
        fn fused_output_is_convex_combination(t in -5.0f64..5.0, c in -5.0f64..5.0, g in -5.0f64..5.0, lc in -6.0f64..6.0, lg in -6.0f64..6.0) {
            let o = outs(&[t], &[c], &[g]);
            let f = late_fuse(&o, &gates(lc, lg, 1)).unwrap()[0];
            let lo = t.min(c).min(g);
            let hi = t.max(c).max(g);
            prop_assert!(f >= lo - 1e-12 && f <= hi + 1e-12);
            let (gc, gg) = (sigmoid(lc), sigmoid(lg));
            let wsum = (1.0 - gg) * (1.0 - gc) + (1.0 - gg) * gc + gg;
            prop_assert!((wsum - 1.0).abs() < 1e-15);
        }
    }
}
