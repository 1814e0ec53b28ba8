//! Gene-expression autoencoder. The decoder mirrors the encoder's hidden
//! widths in reverse order.

use rand::Rng;

use crate::error::{Result, SurvError};
use crate::nn::{DropoutMask, Mlp, MlpCache, MlpGrads, Params};
use crate::scalar::Scalar;

/// Production preset for hidden encoder widths.
pub const PRODUCTION_ENCODER_LAYERS: [usize; 5] = [4096, 2048, 1024, 512, 256];
pub const PRODUCTION_LATENT_DIM: usize = 128;

#[derive(Clone, Debug, PartialEq)]
pub struct Autoencoder<T> {
    pub encoder: Mlp<T>,
    pub decoder: Mlp<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AeGrads<T> {
    pub encoder: MlpGrads<T>,
    pub decoder: MlpGrads<T>,
}

impl<T: Scalar> AeGrads<T> {
    pub fn zeros_like(ae: &Autoencoder<T>) -> Self {
        AeGrads {
            encoder: MlpGrads::zeros_like(&ae.encoder),
            decoder: MlpGrads::zeros_like(&ae.decoder),
        }
    }
}

/// Per-sample forward record for the reconstruction path.
#[derive(Clone, Debug)]
pub struct AeForward<T> {
    pub latent: Vec<T>,
    pub reconstruction: Vec<T>,
    enc_cache: MlpCache<T>,
    dec_cache: MlpCache<T>,
}

#[derive(Clone, Debug)]
pub struct AeMasks<T> {
    pub encoder: DropoutMask<T>,
    pub decoder: DropoutMask<T>,
}

impl<T: Scalar> Autoencoder<T> {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        latent_dim: usize,
        dropout: T,
        rng: &mut R,
    ) -> Result<Self> {
        let mut enc_sizes = vec![input_dim];
        enc_sizes.extend_from_slice(hidden);
        enc_sizes.push(latent_dim);
        let dec_sizes: Vec<usize> = enc_sizes.iter().rev().copied().collect();
        let encoder = Mlp::new(&enc_sizes, dropout, rng)?;
        let decoder = Mlp::new(&dec_sizes, dropout, rng)?;
        Self::from_parts(encoder, decoder)
    }

    pub fn from_parts(encoder: Mlp<T>, decoder: Mlp<T>) -> Result<Self> {
        if encoder.output_dim() != decoder.input_dim() {
            return Err(SurvError::dim(
                "decoder input (latent)",
                encoder.output_dim(),
                decoder.input_dim(),
            ));
        }
        if decoder.output_dim() != encoder.input_dim() {
            return Err(SurvError::dim(
                "decoder output",
                encoder.input_dim(),
                decoder.output_dim(),
            ));
        }
        Ok(Autoencoder { encoder, decoder })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn encode(&self, x: &[T]) -> Result<Vec<T>> {
        self.encoder.predict(x)
    }

    pub fn reconstruct(&self, x: &[T]) -> Result<Vec<T>> {
        self.decoder.predict(&self.encoder.predict(x)?)
    }

    pub fn sample_dropout<R: Rng + ?Sized>(&self, rng: &mut R) -> AeMasks<T> {
        AeMasks {
            encoder: self.encoder.sample_dropout(rng),
            decoder: self.decoder.sample_dropout(rng),
        }
    }

    pub fn forward(&self, x: &[T], masks: Option<&AeMasks<T>>) -> Result<AeForward<T>> {
        let (latent, enc_cache) = self.encoder.forward(x, masks.map(|m| &m.encoder))?;
        let (reconstruction, dec_cache) =
            self.decoder.forward(&latent, masks.map(|m| &m.decoder))?;
        Ok(AeForward {
            latent,
            reconstruction,
            enc_cache,
            dec_cache,
        })
    }

    /// Backpropagates `recon_grad` (w.r.t. the reconstruction) plus
    /// `latent_grad` (w.r.t. the latent, e.g. from a survival head) into both
    /// networks.
    pub fn backward(
        &self,
        fwd: &AeForward<T>,
        recon_grad: Option<&[T]>,
        latent_grad: Option<&[T]>,
        grads: &mut AeGrads<T>,
    ) -> Result<()> {
        let mut g_latent = vec![T::zero(); self.latent_dim()];
        if let Some(rg) = recon_grad {
            let from_dec = self
                .decoder
                .backward(&fwd.dec_cache, rg, &mut grads.decoder)?;
            for (a, b) in g_latent.iter_mut().zip(from_dec) {
                *a += b;
            }
        }
        if let Some(lg) = latent_grad {
            if lg.len() != g_latent.len() {
                return Err(SurvError::dim("latent gradient", g_latent.len(), lg.len()));
            }
            for (a, &b) in g_latent.iter_mut().zip(lg) {
                *a += b;
            }
        }
        self.encoder
            .backward(&fwd.enc_cache, &g_latent, &mut grads.encoder)?;
        Ok(())
    }
}

impl<T: Scalar> Params<T> for Autoencoder<T> {
    fn tensors(&self) -> Vec<(String, &[T])> {
        let mut v: Vec<_> = self
            .encoder
            .tensors()
            .into_iter()
            .map(|(n, t)| (format!("encoder.{n}"), t))
            .collect();
        v.extend(
            self.decoder
                .tensors()
                .into_iter()
                .map(|(n, t)| (format!("decoder.{n}"), t)),
        );
        v
    }
    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.decoder.tensors_mut());
        v
    }
}

impl<T: Scalar> Params<T> for AeGrads<T> {
    fn tensors(&self) -> Vec<(String, &[T])> {
        let mut v: Vec<_> = self
            .encoder
            .tensors()
            .into_iter()
            .map(|(n, t)| (format!("encoder.{n}"), t))
            .collect();
        v.extend(
            self.decoder
                .tensors()
                .into_iter()
                .map(|(n, t)| (format!("decoder.{n}"), t)),
        );
        v
    }
    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.decoder.tensors_mut());
        v
    }
}

/// `mean_i ||recon_i - x_i||² / d_g`, with its gradient w.r.t. each reconstruction.
pub fn reconstruction_loss<T: Scalar>(
    inputs: &[&[T]],
    reconstructions: &[&[T]],
) -> Result<(T, Vec<Vec<T>>)> {
    if inputs.is_empty() {
        return Err(SurvError::invalid(
            "reconstruction loss needs a non-empty batch",
        ));
    }
    if inputs.len() != reconstructions.len() {
        return Err(SurvError::dim(
            "reconstruction batch",
            inputs.len(),
            reconstructions.len(),
        ));
    }
    let d = inputs[0].len();
    let n = T::from_usize_lossy(inputs.len());
    let scale = T::one() / (n * T::from_usize_lossy(d));
    let mut total = T::zero();
    let mut grads = Vec::with_capacity(inputs.len());
    for (x, r) in inputs.iter().zip(reconstructions) {
        if x.len() != d || r.len() != d {
            return Err(SurvError::dim(
                "gene-expression vector",
                d,
                if x.len() != d { x.len() } else { r.len() },
            ));
        }
        let mut g = Vec::with_capacity(d);
        let mut sq = T::zero();
        for (&xi, &ri) in x.iter().zip(r.iter()) {
            let diff = ri - xi;
            sq += diff * diff;
            g.push((diff + diff) * scale);
        }
        total += sq;
        grads.push(g);
    }
    Ok((total * scale, grads))
}

/// Loss of the autoencoder on a batch, evaluated without dropout.
pub fn batch_reconstruction_loss<T: Scalar>(ae: &Autoencoder<T>, batch: &[&[T]]) -> Result<T> {
    let recon = batch
        .iter()
        .map(|x| ae.reconstruct(x))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[T]> = recon.iter().map(|r| r.as_slice()).collect();
    Ok(reconstruction_loss(batch, &refs)?.0)
}
