//! The fused survival model: optional gene-expression autoencoder, then
//! either one head on concatenated features (early / none) or one head per
//! modality mixed by gates (late).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{AeForward, AeGrads, AeMasks, Autoencoder};
use crate::error::{Result, SurvError};
use crate::fusion::{
    early_fuse, late_fuse, late_fuse_backward, FeatureLayout, FusionGates, Modality,
    ModalityOutputs, ModalitySet,
};
use crate::nn::{DropoutMask, Mlp, MlpCache, MlpGrads, Params};
use crate::survival::{HeadKind, TimeGrid};
use crate::train::config::{FusionMode, RunConfig};

/// Raw input widths per modality.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDims {
    pub text: Option<usize>,
    pub cov: Option<usize>,
    pub ge: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurvModel {
    pub head_kind: HeadKind,
    pub fusion: FusionMode,
    pub modalities: ModalitySet,
    /// Bin edges for the discrete head.
    pub grid: Option<TimeGrid<f64>>,
    pub ae: Option<Autoencoder<f64>>,
    /// Head on concatenated features (early fusion or a single modality).
    pub joint: Option<Mlp<f64>>,
    pub text_head: Option<Mlp<f64>>,
    pub cov_head: Option<Mlp<f64>>,
    pub ge_head: Option<Mlp<f64>>,
    pub gates: FusionGates<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrads {
    pub ae: Option<AeGrads<f64>>,
    pub joint: Option<MlpGrads<f64>>,
    pub text_head: Option<MlpGrads<f64>>,
    pub cov_head: Option<MlpGrads<f64>>,
    pub ge_head: Option<MlpGrads<f64>>,
    pub gates: FusionGates<f64>,
}

#[derive(Clone, Debug)]
pub struct SampleMasks {
    pub ae: Option<AeMasks<f64>>,
    pub joint: Option<DropoutMask<f64>>,
    pub text_head: Option<DropoutMask<f64>>,
    pub cov_head: Option<DropoutMask<f64>>,
    pub ge_head: Option<DropoutMask<f64>>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ModelInput<'a> {
    pub text: Option<&'a [f64]>,
    pub cov: Option<&'a [f64]>,
    pub ge: Option<&'a [f64]>,
}

/// Everything one sample's backward pass needs.
#[derive(Clone, Debug)]
pub struct SampleForward {
    /// Logits (discrete) or the risk score as a length-1 vector.
    pub output: Vec<f64>,
    pub ae: Option<AeForward<f64>>,
    joint: Option<(MlpCache<f64>, FeatureLayout)>,
    heads: [Option<MlpCache<f64>>; 3],
    late: Option<ModalityOutputs<f64>>,
}

fn head_sizes(input: usize, hidden: &[usize], out: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(out);
    s
}

fn need(dim: Option<usize>, m: Modality) -> Result<usize> {
    dim.ok_or_else(|| {
        SurvError::invalid(format!(
            "modality `{m}` is configured but the cohort has no `{m}` data"
        ))
    })
}

impl SurvModel {
    pub fn new<R: Rng + ?Sized>(cfg: &RunConfig, dims: InputDims, rng: &mut R) -> Result<Self> {
        let mods = cfg.modalities;
        let out = cfg.output_dim();
        let grid = match cfg.head {
            HeadKind::Discrete => Some(TimeGrid::equal_width(cfg.bins, cfg.horizon)?),
            HeadKind::Coxph => None,
        };
        let ae = if mods.ge {
            Some(Autoencoder::new(
                need(dims.ge, Modality::Ge)?,
                &cfg.ae_hidden,
                cfg.ae_latent,
                cfg.ae_dropout,
                rng,
            )?)
        } else {
            None
        };
        let width = |m: Modality| -> Result<usize> {
            match m {
                Modality::Text => need(dims.text, m),
                Modality::Cov => need(dims.cov, m),
                Modality::Ge => {
                    need(dims.ge, m)?;
                    Ok(cfg.ae_latent)
                }
            }
        };
        let mut model = SurvModel {
            head_kind: cfg.head,
            fusion: cfg.fusion,
            modalities: mods,
            grid,
            ae,
            joint: None,
            text_head: None,
            cov_head: None,
            ge_head: None,
            gates: FusionGates {
                cov: None,
                ge: None,
            },
        };
        match cfg.fusion {
            FusionMode::Late => {
                for m in mods.iter() {
                    let head = Mlp::new(
                        &head_sizes(width(m)?, &cfg.head_layers, out),
                        cfg.dropout,
                        rng,
                    )?;
                    *model.head_slot_mut(m) = Some(head);
                }
                model.gates = FusionGates::new(mods, out);
            }
            FusionMode::Early | FusionMode::None => {
                let input = mods.iter().map(width).sum::<Result<usize>>()?;
                model.joint = Some(Mlp::new(
                    &head_sizes(input, &cfg.head_layers, out),
                    cfg.dropout,
                    rng,
                )?);
            }
        }
        Ok(model)
    }

    pub fn head(&self, m: Modality) -> Option<&Mlp<f64>> {
        match m {
            Modality::Text => self.text_head.as_ref(),
            Modality::Cov => self.cov_head.as_ref(),
            Modality::Ge => self.ge_head.as_ref(),
        }
    }

    pub fn head_slot_mut(&mut self, m: Modality) -> &mut Option<Mlp<f64>> {
        match m {
            Modality::Text => &mut self.text_head,
            Modality::Cov => &mut self.cov_head,
            Modality::Ge => &mut self.ge_head,
        }
    }

    pub fn output_dim(&self) -> usize {
        match (
            &self.joint,
            self.modalities.iter().find_map(|m| self.head(m)),
        ) {
            (Some(j), _) => j.output_dim(),
            (None, Some(h)) => h.output_dim(),
            (None, None) => 0,
        }
    }

    pub fn sample_masks<R: Rng + ?Sized>(&self, rng: &mut R) -> SampleMasks {
        SampleMasks {
            ae: self.ae.as_ref().map(|a| a.sample_dropout(rng)),
            joint: self.joint.as_ref().map(|h| h.sample_dropout(rng)),
            text_head: self.text_head.as_ref().map(|h| h.sample_dropout(rng)),
            cov_head: self.cov_head.as_ref().map(|h| h.sample_dropout(rng)),
            ge_head: self.ge_head.as_ref().map(|h| h.sample_dropout(rng)),
        }
    }

    fn input_for<'a>(
        &self,
        x: &ModelInput<'a>,
        m: Modality,
        latent: Option<&'a [f64]>,
    ) -> Result<&'a [f64]> {
        let v = match m {
            Modality::Text => x.text,
            Modality::Cov => x.cov,
            Modality::Ge => latent,
        };
        v.ok_or_else(|| SurvError::invalid(format!("sample is missing modality `{m}`")))
    }

    /// Training-mode forward pass when `masks` is given, evaluation otherwise.
    pub fn forward(&self, x: &ModelInput, masks: Option<&SampleMasks>) -> Result<SampleForward> {
        let ae = match &self.ae {
            Some(ae) => {
                let g =
                    x.ge.ok_or_else(|| SurvError::invalid("sample is missing modality `ge`"))?;
                Some(ae.forward(g, masks.and_then(|m| m.ae.as_ref()))?)
            }
            None => None,
        };
        let latent = ae.as_ref().map(|a| a.latent.as_slice());
        if let Some(joint) = &self.joint {
            let pick = |m: Modality| -> Result<Option<&[f64]>> {
                if self.modalities.contains(m) {
                    self.input_for(x, m, latent).map(Some)
                } else {
                    Ok(None)
                }
            };
            let (features, layout) = early_fuse(
                pick(Modality::Text)?,
                pick(Modality::Cov)?,
                pick(Modality::Ge)?,
                self.modalities,
            )?;
            let (output, cache) = joint.forward(&features, masks.and_then(|m| m.joint.as_ref()))?;
            return Ok(SampleForward {
                output,
                ae,
                joint: Some((cache, layout)),
                heads: [None, None, None],
                late: None,
            });
        }
        let mut heads: [Option<MlpCache<f64>>; 3] = [None, None, None];
        let mut outputs = ModalityOutputs::default();
        for (k, m) in Modality::ALL.into_iter().enumerate() {
            let Some(head) = self.head(m) else { continue };
            let mask = masks.and_then(|s| match m {
                Modality::Text => s.text_head.as_ref(),
                Modality::Cov => s.cov_head.as_ref(),
                Modality::Ge => s.ge_head.as_ref(),
            });
            let (o, cache) = head.forward(self.input_for(x, m, latent)?, mask)?;
            heads[k] = Some(cache);
            match m {
                Modality::Text => outputs.text = Some(o),
                Modality::Cov => outputs.cov = Some(o),
                Modality::Ge => outputs.ge = Some(o),
            }
        }
        let output = late_fuse(&outputs, &self.gates)?;
        Ok(SampleForward {
            output,
            ae,
            joint: None,
            heads,
            late: Some(outputs),
        })
    }

    pub fn predict(&self, x: &ModelInput) -> Result<Vec<f64>> {
        Ok(self.forward(x, None)?.output)
    }

    /// Accumulates gradients for one sample. `upstream` is the gradient of
    /// the loss w.r.t. the fused output, `recon_grad` w.r.t. the
    /// autoencoder reconstruction.
    pub fn backward(
        &self,
        fwd: &SampleForward,
        upstream: &[f64],
        recon_grad: Option<&[f64]>,
        grads: &mut ModelGrads,
    ) -> Result<()> {
        let mut latent_grad: Option<Vec<f64>> = None;
        if let (Some(joint), Some((cache, layout))) = (&self.joint, &fwd.joint) {
            let g = joint.backward(
                cache,
                upstream,
                grads.joint.as_mut().expect("grads match model"),
            )?;
            latent_grad = layout.ge.clone().map(|r| g[r].to_vec());
        } else if let Some(outputs) = &fwd.late {
            let lg = late_fuse_backward(upstream, outputs, &self.gates)?;
            for (dst, src) in grads
                .gates
                .tensors_mut()
                .into_iter()
                .zip(lg.gates.tensors())
            {
                for (d, s) in dst.iter_mut().zip(src.1) {
                    *d += s;
                }
            }
            for (k, m) in Modality::ALL.into_iter().enumerate() {
                let (Some(head), Some(cache)) = (self.head(m), &fwd.heads[k]) else {
                    continue;
                };
                let (up, slot) = match m {
                    Modality::Text => (&lg.outputs.text, &mut grads.text_head),
                    Modality::Cov => (&lg.outputs.cov, &mut grads.cov_head),
                    Modality::Ge => (&lg.outputs.ge, &mut grads.ge_head),
                };
                let up = up.as_ref().expect("output present for every head");
                let g = head.backward(cache, up, slot.as_mut().expect("grads match model"))?;
                if m == Modality::Ge {
                    latent_grad = Some(g);
                }
            }
        } else {
            return Err(SurvError::invalid(
                "forward record does not match the model",
            ));
        }
        if let (Some(ae), Some(f)) = (&self.ae, &fwd.ae) {
            if recon_grad.is_some() || latent_grad.is_some() {
                ae.backward(
                    f,
                    recon_grad,
                    latent_grad.as_deref(),
                    grads.ae.as_mut().expect("grads match model"),
                )?;
            }
        }
        Ok(())
    }
}

impl ModelGrads {
    pub fn zeros_like(model: &SurvModel) -> Self {
        ModelGrads {
            ae: model.ae.as_ref().map(AeGrads::zeros_like),
            joint: model.joint.as_ref().map(MlpGrads::zeros_like),
            text_head: model.text_head.as_ref().map(MlpGrads::zeros_like),
            cov_head: model.cov_head.as_ref().map(MlpGrads::zeros_like),
            ge_head: model.ge_head.as_ref().map(MlpGrads::zeros_like),
            gates: FusionGates {
                cov: model.gates.cov.as_ref().map(|v| vec![0.0; v.len()]),
                ge: model.gates.ge.as_ref().map(|v| vec![0.0; v.len()]),
            },
        }
    }
}

fn push<'a, P: Params<f64>>(out: &mut Vec<(String, &'a [f64])>, prefix: &str, p: Option<&'a P>) {
    if let Some(p) = p {
        out.extend(
            p.tensors()
                .into_iter()
                .map(|(n, t)| (format!("{prefix}.{n}"), t)),
        );
    }
}

fn push_mut<'a, P: Params<f64>>(out: &mut Vec<&'a mut [f64]>, p: Option<&'a mut P>) {
    if let Some(p) = p {
        out.extend(p.tensors_mut());
    }
}

// Both impls list groups in the same order so model and gradients line up.
impl Params<f64> for SurvModel {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut v = Vec::new();
        push(&mut v, "joint", self.joint.as_ref());
        push(&mut v, "text_head", self.text_head.as_ref());
        push(&mut v, "cov_head", self.cov_head.as_ref());
        push(&mut v, "ge_head", self.ge_head.as_ref());
        push(&mut v, "ae", self.ae.as_ref());
        push(&mut v, "gates", Some(&self.gates));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::new();
        push_mut(&mut v, self.joint.as_mut());
        push_mut(&mut v, self.text_head.as_mut());
        push_mut(&mut v, self.cov_head.as_mut());
        push_mut(&mut v, self.ge_head.as_mut());
        push_mut(&mut v, self.ae.as_mut());
        push_mut(&mut v, Some(&mut self.gates));
        v
    }
}

impl Params<f64> for ModelGrads {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut v = Vec::new();
        push(&mut v, "joint", self.joint.as_ref());
        push(&mut v, "text_head", self.text_head.as_ref());
        push(&mut v, "cov_head", self.cov_head.as_ref());
        push(&mut v, "ge_head", self.ge_head.as_ref());
        push(&mut v, "ae", self.ae.as_ref());
        push(&mut v, "gates", Some(&self.gates));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::new();
        push_mut(&mut v, self.joint.as_mut());
        push_mut(&mut v, self.text_head.as_mut());
        push_mut(&mut v, self.cov_head.as_mut());
        push_mut(&mut v, self.ge_head.as_mut());
        push_mut(&mut v, self.ae.as_mut());
        push_mut(&mut v, Some(&mut self.gates));
        v
    }
}
