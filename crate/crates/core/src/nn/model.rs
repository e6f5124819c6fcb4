//! Encoder-decoder model over spectrogram frames.
//!
//! Pre-norm residual blocks with a final LayerNorm on each stack. The
//! encoder input path is linear projection, added sinusoidal positional
//! encoding, LayerNorm, then dropout (training only). The decoder embeds
//! tokens (scaled by sqrt(D)), adds positional encoding, and uses causal
//! self-attention plus cross-attention over the encoder states.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    positional_encoding, softmax_rows, AttentionCache, AttnMask, FeedForward,
    FeedForwardCache, LayerNorm, LayerNormCache, Linear, MultiHeadAttention, ParamVisit,
};
use super::tensor::Mat;
use super::NnError;
use crate::lexicon::PAD_ID;

/// Architecture hyperparameters. `paper_scale` mirrors the published
/// system; `toy` is the preset exercised by tests and the shipped configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub enc_layers: usize,
    pub enc_heads: usize,
    pub dec_layers: usize,
    pub dec_heads: usize,
    pub ff_dim: usize,
    pub dropout: f64,
    pub vocab_size: usize,
    /// Frequency bins per frame.
    pub input_dim: usize,
    pub max_frames: usize,
    pub max_tokens: usize,
}

impl ModelConfig {
    pub fn toy(vocab_size: usize, input_dim: usize) -> Self {
        Self {
            embed_dim: 64,
            enc_layers: 2,
            enc_heads: 4,
            dec_layers: 2,
            dec_heads: 2,
            ff_dim: 128,
            dropout: 0.0,
            vocab_size,
            input_dim,
            max_frames: 1024,
            max_tokens: 64,
        }
    }

    pub fn paper_scale(vocab_size: usize, input_dim: usize) -> Self {
        Self {
            embed_dim: 768,
            enc_layers: 12,
            enc_heads: 12,
            dec_layers: 6,
            dec_heads: 4,
            ff_dim: 3072,
            dropout: 0.1,
            vocab_size,
            input_dim,
            max_frames: 4096,
            max_tokens: 256,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.embed_dim == 0 || self.vocab_size == 0 || self.input_dim == 0 {
            return Err(NnError::InvalidConfig("zero-sized dimension".into()));
        }
        if self.embed_dim % self.enc_heads != 0 || self.embed_dim % self.dec_heads != 0 {
            return Err(NnError::InvalidConfig(format!(
                "embed_dim {} not divisible by heads {}/{}",
                self.embed_dim, self.enc_heads, self.dec_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(NnError::InvalidConfig("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Inverted-dropout mask applied during training.
fn dropout_forward(x: &mut Mat, p: f64, rng: &mut ChaCha8Rng) -> Mat {
    use rand::Rng;
    let keep = 1.0 - p;
    let mut mask = Mat::zeros(x.rows, x.cols);
    for (m, v) in mask.data.iter_mut().zip(&mut x.data) {
        if rng.random::<f64>() < keep {
            *m = 1.0 / keep;
            *v *= *m;
        } else {
            *v = 0.0;
        }
    }
    mask
}

// ---------------------------------------------------------------------------
// Encoder

#[derive(Debug, Clone)]
pub struct EncoderLayer {
    ln1: LayerNorm,
    attn: MultiHeadAttention,
    ln2: LayerNorm,
    ffn: FeedForward,
}

pub struct EncoderLayerCache {
    ln1: LayerNormCache,
    attn: AttentionCache,
    ln2: LayerNormCache,
    ffn: FeedForwardCache,
}

impl EncoderLayer {
    fn new(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        Self {
            ln1: LayerNorm::new(cfg.embed_dim),
            attn: MultiHeadAttention::new(cfg.embed_dim, cfg.enc_heads, rng),
            ln2: LayerNorm::new(cfg.embed_dim),
            ffn: FeedForward::new(cfg.embed_dim, cfg.ff_dim, rng),
        }
    }

    fn forward(&self, x: &Mat, key_pad: Option<&[bool]>) -> (Mat, EncoderLayerCache) {
        let (n1, ln1c) = self.ln1.forward(x);
        let mask = AttnMask { causal: false, key_pad };
        let (att, attc) = self.attn.forward(&n1, &n1, mask);
        let a = x.add(&att);
        let (n2, ln2c) = self.ln2.forward(&a);
        let (f, ffnc) = self.ffn.forward(&n2);
        let y = a.add(&f);
        (y, EncoderLayerCache { ln1: ln1c, attn: attc, ln2: ln2c, ffn: ffnc })
    }

    fn backward(&self, cache: &EncoderLayerCache, gy: &Mat, grads: &mut EncoderLayer) -> Mat {
        let g_n2 = self.ffn.backward(&cache.ffn, gy, &mut grads.ffn);
        let mut g_a = gy.clone();
        g_a.add_assign(&self.ln2.backward(&cache.ln2, &g_n2, &mut grads.ln2));
        let (g_q, g_kv) = self.attn.backward(&cache.attn, &g_a, &mut grads.attn);
        let mut g_n1 = g_q;
        g_n1.add_assign(&g_kv);
        let mut gx = g_a;
        gx.add_assign(&self.ln1.backward(&cache.ln1, &g_n1, &mut grads.ln1));
        gx
    }
}

impl ParamVisit for EncoderLayer {
    fn collect<'a>(&'a self, out: &mut Vec<&'a Mat>) {
        self.ln1.collect(out);
        self.attn.collect(out);
        self.ln2.collect(out);
        self.ffn.collect(out);
    }
    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat>) {
        self.ln1.collect_mut(out);
        self.attn.collect_mut(out);
        self.ln2.collect_mut(out);
        self.ffn.collect_mut(out);
    }
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub input_proj: Linear,
    pub input_ln: LayerNorm,
    pub layers: Vec<EncoderLayer>,
    pub final_ln: LayerNorm,
    pe: Mat,
    dropout: f64,
}

pub struct EncoderCache {
    frames: Mat,
    ln_in: LayerNormCache,
    dropout_mask: Option<Mat>,
    /// Input to the first layer.
    x0: Mat,
    layers: Vec<EncoderLayerCache>,
    final_ln: LayerNormCache,
}

impl Encoder {
    pub fn new(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let pe_len = cfg.max_frames.max(cfg.max_tokens);
        Self {
            input_proj: Linear::new(cfg.input_dim, cfg.embed_dim, rng),
            input_ln: LayerNorm::new(cfg.embed_dim),
            layers: (0..cfg.enc_layers).map(|_| EncoderLayer::new(cfg, rng)).collect(),
            final_ln: LayerNorm::new(cfg.embed_dim),
            pe: positional_encoding(pe_len, cfg.embed_dim),
            dropout: cfg.dropout,
        }
    }

    /// Contextual states H over the frame sequence. `pad_mask[i]` is true
    /// for real frames. Padded keys are hidden from attention.
    pub fn forward(
        &self,
        frames: &Mat,
        pad_mask: &[bool],
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Mat, EncoderCache), NnError> {
        if frames.rows > self.pe.rows {
            return Err(NnError::SequenceTooLong { len: frames.rows, max: self.pe.rows });
        }
        let mut x = self.input_proj.forward(frames);
        for r in 0..x.rows {
            for (v, p) in x.row_mut(r).iter_mut().zip(self.pe.row(r)) {
                *v += p;
            }
        }
        let (mut x, ln_in) = self.input_ln.forward(&x);
        let dropout_mask = match dropout_rng.as_deref_mut() {
            Some(rng) if self.dropout > 0.0 => Some(dropout_forward(&mut x, self.dropout, rng)),
            _ => None,
        };
        let x0 = x.clone();
        let key_pad: Vec<bool> = pad_mask.iter().map(|&real| !real).collect();
        let key_pad_opt = if key_pad.iter().any(|&m| m) { Some(key_pad.as_slice()) } else { None };
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, c) = layer.forward(&x, key_pad_opt);
            caches.push(c);
            x = y;
        }
        let (h, final_ln) = self.final_ln.forward(&x);
        Ok((h, EncoderCache { frames: frames.clone(), ln_in, dropout_mask, x0, layers: caches, final_ln }))
    }

    /// Backward through the whole encoder; accumulates into `grads`.
    pub fn backward(&self, cache: &EncoderCache, g_h: &Mat, grads: &mut Encoder) {
        let mut g = self.final_ln.backward(&cache.final_ln, g_h, &mut grads.final_ln);
        for i in (0..self.layers.len()).rev() {
            g = self.layers[i].backward(&cache.layers[i], &g, &mut grads.layers[i]);
        }
        if let Some(mask) = &cache.dropout_mask {
            for (gv, m) in g.data.iter_mut().zip(&mask.data) {
                *gv *= m;
            }
        }
        let g_proj_in = self.input_ln.backward(&cache.ln_in, &g, &mut grads.input_ln);
        // Positional encoding is constant; gradient flows straight through.
        self.input_proj.backward(&cache.frames, &g_proj_in, &mut grads.input_proj);
    }
}

impl ParamVisit for Encoder {
    fn collect<'a>(&'a self, out: &mut Vec<&'a Mat>) {
        self.input_proj.collect(out);
        self.input_ln.collect(out);
        for l in &self.layers {
            l.collect(out);
        }
        self.final_ln.collect(out);
    }
    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat>) {
        self.input_proj.collect_mut(out);
        self.input_ln.collect_mut(out);
        for l in &mut self.layers {
            l.collect_mut(out);
        }
        self.final_ln.collect_mut(out);
    }
}

// ---------------------------------------------------------------------------
// Decoder

#[derive(Debug, Clone)]
pub struct DecoderLayer {
    ln1: LayerNorm,
    self_attn: MultiHeadAttention,
    ln2: LayerNorm,
    cross_attn: MultiHeadAttention,
    ln3: LayerNorm,
    ffn: FeedForward,
}

pub struct DecoderLayerCache {
    ln1: LayerNormCache,
    self_attn: AttentionCache,
    ln2: LayerNormCache,
    cross_attn: AttentionCache,
    ln3: LayerNormCache,
    ffn: FeedForwardCache,
}

impl DecoderLayer {
    fn new(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        Self {
            ln1: LayerNorm::new(cfg.embed_dim),
            self_attn: MultiHeadAttention::new(cfg.embed_dim, cfg.dec_heads, rng),
            ln2: LayerNorm::new(cfg.embed_dim),
            cross_attn: MultiHeadAttention::new(cfg.embed_dim, cfg.dec_heads, rng),
            ln3: LayerNorm::new(cfg.embed_dim),
            ffn: FeedForward::new(cfg.embed_dim, cfg.ff_dim, rng),
        }
    }

    fn forward(
        &self,
        x: &Mat,
        enc_h: &Mat,
        enc_key_pad: Option<&[bool]>,
    ) -> (Mat, DecoderLayerCache) {
        let (n1, ln1c) = self.ln1.forward(x);
        let (sa, sac) = self.self_attn.forward(&n1, &n1, AttnMask::causal());
        let a = x.add(&sa);
        let (n2, ln2c) = self.ln2.forward(&a);
        let mask = AttnMask { causal: false, key_pad: enc_key_pad };
        let (ca, cac) = self.cross_attn.forward(&n2, enc_h, mask);
        let b = a.add(&ca);
        let (n3, ln3c) = self.ln3.forward(&b);
        let (f, ffnc) = self.ffn.forward(&n3);
        let y = b.add(&f);
        (
            y,
            DecoderLayerCache { ln1: ln1c, self_attn: sac, ln2: ln2c, cross_attn: cac, ln3: ln3c, ffn: ffnc },
        )
    }

    /// Returns (grad wrt x, grad wrt encoder states).
    fn backward(
        &self,
        cache: &DecoderLayerCache,
        gy: &Mat,
        grads: &mut DecoderLayer,
    ) -> (Mat, Mat) {
        let g_n3 = self.ffn.backward(&cache.ffn, gy, &mut grads.ffn);
        let mut g_b = gy.clone();
        g_b.add_assign(&self.ln3.backward(&cache.ln3, &g_n3, &mut grads.ln3));
        let (g_n2, g_enc) = self.cross_attn.backward(&cache.cross_attn, &g_b, &mut grads.cross_attn);
        let mut g_a = g_b;
        g_a.add_assign(&self.ln2.backward(&cache.ln2, &g_n2, &mut grads.ln2));
        let (g_q, g_kv) = self.self_attn.backward(&cache.self_attn, &g_a, &mut grads.self_attn);
        let mut g_n1 = g_q;
        g_n1.add_assign(&g_kv);
        let mut gx = g_a;
        gx.add_assign(&self.ln1.backward(&cache.ln1, &g_n1, &mut grads.ln1));
        (gx, g_enc)
    }
}

impl ParamVisit for DecoderLayer {
    fn collect<'a>(&'a self, out: &mut Vec<&'a Mat>) {
        self.ln1.collect(out);
        self.self_attn.collect(out);
        self.ln2.collect(out);
        self.cross_attn.collect(out);
        self.ln3.collect(out);
        self.ffn.collect(out);
    }
    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat>) {
        self.ln1.collect_mut(out);
        self.self_attn.collect_mut(out);
        self.ln2.collect_mut(out);
        self.cross_attn.collect_mut(out);
        self.ln3.collect_mut(out);
        self.ffn.collect_mut(out);
    }
}

// ---------------------------------------------------------------------------
// Full sequence-to-sequence model

#[derive(Debug, Clone)]
pub struct Seq2Seq {
    pub cfg: ModelConfig,
    pub encoder: Encoder,
    /// (vocab, D) token embedding, scaled by sqrt(D) at lookup.
    pub tok_embed: Mat,
    pub dec_layers: Vec<DecoderLayer>,
    pub dec_final_ln: LayerNorm,
    pub out_proj: Linear,
}

pub struct Seq2SeqCache {
    pub enc: EncoderCache,
    pub enc_h: Mat,
    dec_ids: Vec<u32>,
    dec_dropout_mask: Option<Mat>,
    dec_layers: Vec<DecoderLayerCache>,
    dec_final_ln: LayerNormCache,
    dec_final: Mat,
}

impl Seq2Seq {
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self, NnError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = Encoder::new(cfg, &mut rng);
        let tok_embed = super::layers::randn_mat(cfg.vocab_size, cfg.embed_dim, 0.02, &mut rng);
        let dec_layers = (0..cfg.dec_layers).map(|_| DecoderLayer::new(cfg, &mut rng)).collect();
        Ok(Self {
            cfg: cfg.clone(),
            encoder,
            tok_embed,
            dec_layers,
            dec_final_ln: LayerNorm::new(cfg.embed_dim),
            out_proj: Linear::new(cfg.embed_dim, cfg.vocab_size, &mut rng),
        })
    }

    /// Swap in a pretrained encoder (same config family).
    pub fn with_encoder(mut self, encoder: Encoder) -> Self {
        self.encoder = encoder;
        self
    }

    fn embed(&self, ids: &[u32]) -> Result<Mat, NnError> {
        let d = self.cfg.embed_dim;
        if ids.len() > self.cfg.max_tokens {
            return Err(NnError::SequenceTooLong { len: ids.len(), max: self.cfg.max_tokens });
        }
        let scale = (d as f64).sqrt();
        let mut x = Mat::zeros(ids.len(), d);
        for (r, &id) in ids.iter().enumerate() {
            if id as usize >= self.cfg.vocab_size {
                return Err(NnError::TokenOverflow { id, vocab: self.cfg.vocab_size });
            }
            for ((slot, e), p) in x
                .row_mut(r)
                .iter_mut()
                .zip(self.tok_embed.row(id as usize))
                .zip(self.encoder_pe().row(r))
            {
                *slot = e * scale + p;
            }
        }
        Ok(x)
    }

    fn encoder_pe(&self) -> &Mat {
        &self.encoder.pe
    }

    /// Teacher-forced forward: `dec_ids` is the decoder input (BOS-shifted).
    /// Returns per-position vocabulary logits.
    pub fn forward(
        &self,
        frames: &Mat,
        pad_mask: &[bool],
        dec_ids: &[u32],
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Mat, Seq2SeqCache), NnError> {
        let (enc_h, enc_cache) =
            self.encoder.forward(frames, pad_mask, dropout_rng.as_deref_mut())?;
        let mut x = self.embed(dec_ids)?;
        let dec_dropout_mask = match dropout_rng {
            Some(rng) if self.cfg.dropout > 0.0 => {
                Some(dropout_forward(&mut x, self.cfg.dropout, rng))
            }
            _ => None,
        };
        let enc_key_pad: Vec<bool> = pad_mask.iter().map(|&r| !r).collect();
        let pad_opt = if enc_key_pad.iter().any(|&m| m) {
            Some(enc_key_pad.as_slice())
        } else {
            None
        };
        let mut caches = Vec::with_capacity(self.dec_layers.len());
        for layer in &self.dec_layers {
            let (y, c) = layer.forward(&x, &enc_h, pad_opt);
            caches.push(c);
            x = y;
        }
        let (dec_final, lnc) = self.dec_final_ln.forward(&x);
        let logits = self.out_proj.forward(&dec_final);
        Ok((
            logits,
            Seq2SeqCache {
                enc: enc_cache,
                enc_h,
                dec_ids: dec_ids.to_vec(),
                dec_dropout_mask,
                dec_layers: caches,
                dec_final_ln: lnc,
                dec_final,
            },
        ))
    }

    pub fn backward(&self, cache: &Seq2SeqCache, g_logits: &Mat, grads: &mut Seq2Seq) {
        let g_final = self.out_proj.backward(&cache.dec_final, g_logits, &mut grads.out_proj);
        let mut g = self.dec_final_ln.backward(&cache.dec_final_ln, &g_final, &mut grads.dec_final_ln);
        let mut g_enc_total = Mat::zeros(cache.enc_h.rows, cache.enc_h.cols);
        for i in (0..self.dec_layers.len()).rev() {
            let (gx, g_enc) =
                self.dec_layers[i].backward(&cache.dec_layers[i], &g, &mut grads.dec_layers[i]);
            g = gx;
            g_enc_total.add_assign(&g_enc);
        }
        if let Some(mask) = &cache.dec_dropout_mask {
            for (gv, m) in g.data.iter_mut().zip(&mask.data) {
                *gv *= m;
            }
        }
        // Embedding scatter-add (PE is constant).
        let scale = (self.cfg.embed_dim as f64).sqrt();
        for (r, &id) in cache.dec_ids.iter().enumerate() {
            let dst = grads.tok_embed.row_mut(id as usize);
            for (d, gval) in dst.iter_mut().zip(g.row(r)) {
                *d += gval * scale;
            }
        }
        self.encoder.backward(&cache.enc, &g_enc_total, &mut grads.encoder);
    }

    /// Inference encode (no dropout).
    pub fn encode(&self, frames: &Mat, pad_mask: &[bool]) -> Result<Mat, NnError> {
        Ok(self.encoder.forward(frames, pad_mask, None)?.0)
    }

    /// Logits for the next token after `prefix` (which starts with BOS).
    pub fn next_token_logits(
        &self,
        enc_h: &Mat,
        pad_mask: &[bool],
        prefix: &[u32],
    ) -> Result<Vec<f64>, NnError> {
        let mut x = self.embed(prefix)?;
        let enc_key_pad: Vec<bool> = pad_mask.iter().map(|&r| !r).collect();
        let pad_opt = if enc_key_pad.iter().any(|&m| m) {
            Some(enc_key_pad.as_slice())
        } else {
            None
        };
        for layer in &self.dec_layers {
            let (y, _) = layer.forward(&x, enc_h, pad_opt);
            x = y;
        }
        let (dec_final, _) = self.dec_final_ln.forward(&x);
        let logits = self.out_proj.forward(&dec_final);
        Ok(logits.row(logits.rows - 1).to_vec())
    }
}

impl ParamVisit for Seq2Seq {
    fn collect<'a>(&'a self, out: &mut Vec<&'a Mat>) {
        self.encoder.collect(out);
        out.push(&self.tok_embed);
        for l in &self.dec_layers {
            l.collect(out);
        }
        self.dec_final_ln.collect(out);
        self.out_proj.collect(out);
    }
    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat>) {
        self.encoder.collect_mut(out);
        out.push(&mut self.tok_embed);
        for l in &mut self.dec_layers {
            l.collect_mut(out);
        }
        self.dec_final_ln.collect_mut(out);
        self.out_proj.collect_mut(out);
    }
}

// ---------------------------------------------------------------------------
// Cluster-label pretraining head

#[derive(Debug, Clone)]
pub struct UnitClassifier {
    pub cfg: ModelConfig,
    pub n_classes: usize,
    pub encoder: Encoder,
    pub head: Linear,
}

pub struct UnitClassifierCache {
    enc: EncoderCache,
    pooled: Mat,
    real_rows: Vec<usize>,
}

impl UnitClassifier {
    pub fn new(cfg: &ModelConfig, n_classes: usize, seed: u64) -> Result<Self, NnError> {
        cfg.validate()?;
        if n_classes < 2 {
            return Err(NnError::TooFewClasses(n_classes));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = Encoder::new(cfg, &mut rng);
        let head = Linear::new(cfg.embed_dim, n_classes, &mut rng);
        Ok(Self { cfg: cfg.clone(), n_classes, encoder, head })
    }

    /// Class logits from the masked mean-pool of encoder states.
    pub fn forward(
        &self,
        frames: &Mat,
        pad_mask: &[bool],
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Vec<f64>, UnitClassifierCache), NnError> {
        let (h, enc) = self.encoder.forward(frames, pad_mask, dropout_rng)?;
        let real_rows: Vec<usize> =
            pad_mask.iter().enumerate().filter(|(_, &r)| r).map(|(i, _)| i).collect();
        let mut pooled = Mat::zeros(1, h.cols);
        for &r in &real_rows {
            for (p, v) in pooled.row_mut(0).iter_mut().zip(h.row(r)) {
                *p += v;
            }
        }
        let n = real_rows.len().max(1) as f64;
        pooled.scale(1.0 / n);
        let logits = self.head.forward(&pooled);
        Ok((logits.row(0).to_vec(), UnitClassifierCache { enc, pooled, real_rows }))
    }

    pub fn backward(
        &self,
        cache: &UnitClassifierCache,
        g_logits: &[f64],
        grads: &mut UnitClassifier,
    ) {
        let g = Mat::from_vec(1, g_logits.len(), g_logits.to_vec());
        let g_pooled = self.head.backward(&cache.pooled, &g, &mut grads.head);
        let t = cache.enc.x0.rows;
        let mut g_h = Mat::zeros(t, g_pooled.cols);
        let n = cache.real_rows.len().max(1) as f64;
        for &r in &cache.real_rows {
            for (slot, v) in g_h.row_mut(r).iter_mut().zip(g_pooled.row(0)) {
                *slot = v / n;
            }
        }
        self.encoder.backward(&cache.enc, &g_h, &mut grads.encoder);
    }
}

impl ParamVisit for UnitClassifier {
    fn collect<'a>(&'a self, out: &mut Vec<&'a Mat>) {
        self.encoder.collect(out);
        self.head.collect(out);
    }
    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat>) {
        self.encoder.collect_mut(out);
        self.head.collect_mut(out);
    }
}

// ---------------------------------------------------------------------------
// Losses

/// Cross-entropy summed over positions whose target is not `<pad>`.
/// Returns (loss sum, valid count, gradient wrt logits).
pub fn cross_entropy(logits: &Mat, targets: &[u32]) -> (f64, usize, Mat) {
    debug_assert_eq!(logits.rows, targets.len());
    let probs = softmax_rows(logits);
    let mut grad = Mat::zeros(logits.rows, logits.cols);
    let mut loss = 0.0;
    let mut count = 0;
    for (r, &t) in targets.iter().enumerate() {
        if t == PAD_ID {
            continue;
        }
        count += 1;
        let p = probs.at(r, t as usize).max(1e-300);
        loss -= p.ln();
        let grow = grad.row_mut(r);
        for (g, &pv) in grow.iter_mut().zip(probs.row(r)) {
            *g = pv;
        }
        grow[t as usize] -= 1.0;
    }
    (loss, count, grad)
}

/// Single-row cross-entropy for classification.
pub fn cross_entropy_class(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    let loss = -(grad[target].max(1e-300)).ln();
    grad[target] -= 1.0;
    (loss, grad)
}
