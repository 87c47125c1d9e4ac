//! Per-domain encoders, decoders and discriminators with a shared latent.
//!
//! Each domain owns one U-Net half on each side: the encoder compresses a
//! slice through `depth` stride-2 4x4 convolutions down to the latent (for
//! the 512-pixel reference configuration: nine halvings, latent shape
//! (512, 1, 1)), keeping every intermediate activation as a skip feature.
//! All encoders are structurally identical, so any encoder's latent and
//! skips can be decoded by any other domain's decoder; stitching source
//! encoder to target decoder yields the generator for that path.
//!
//! The discriminator is the 70x70-receptive-field patch classifier: three
//! stride-2 and two stride-1 4x4 convolutions emitting an unbounded score
//! map (62x62 on 512-pixel input) regressed against real/fake labels.

use ndarray::{concatenate, Array4, Axis};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::domains::{DomainRegistry, TranslationPath};
use crate::error::{Error, Result};
use crate::nn::{
    leaky_relu_backward, leaky_relu_forward, relu_backward, relu_forward, tanh_backward,
    tanh_forward, Conv2d, ConvTranspose2d, InstanceNorm2d, NormCache, Param,
};

const LEAKY_SLOPE: f64 = 0.2;

/// Network hyperparameters shared by every domain's components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    /// Side length of the square input slices.
    pub input_size: usize,
    /// Input/output image channels (grayscale CT: 1).
    pub input_channels: usize,
    /// Number of stride-2 encoder halvings.
    pub depth: usize,
    /// Channels of the first encoder level; doubles per level.
    pub base_channels: usize,
    /// Channel cap for deep levels.
    pub max_channels: usize,
    /// Channels of the first discriminator level.
    pub disc_base_channels: usize,
    /// Std of the Gaussian parameter initialization.
    pub init_std: f64,
}

impl Default for ArchConfig {
    /// Reference configuration: 512x512 slices, depth 9 (the only depth
    /// whose latent is (512, 1, 1)), channel schedule
    /// 64,128,256,512,... capped at 512.
    fn default() -> Self {
        ArchConfig {
            input_size: 512,
            input_channels: 1,
            depth: 9,
            base_channels: 64,
            max_channels: 512,
            disc_base_channels: 64,
            init_std: 0.02,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::Config("arch depth must be at least 2".into()));
        }
        if self.base_channels == 0 || self.max_channels < self.base_channels {
            return Err(Error::Config(
                "arch channels must satisfy 0 < base_channels <= max_channels".into(),
            ));
        }
        if self.disc_base_channels == 0 {
            return Err(Error::Config("disc_base_channels must be positive".into()));
        }
        if self.input_channels == 0 {
            return Err(Error::Config("input_channels must be positive".into()));
        }
        if !(self.init_std.is_finite() && self.init_std >= 0.0) {
            return Err(Error::Config("init_std must be finite and nonnegative".into()));
        }
        let divisor = 1usize
            .checked_shl(self.depth as u32)
            .ok_or_else(|| Error::Config("arch depth too large".into()))?;
        if self.input_size == 0 || self.input_size % divisor != 0 {
            return Err(Error::Config(format!(
                "input_size {} must be a positive multiple of 2^depth = {divisor}",
                self.input_size
            )));
        }
        Ok(())
    }

    /// Channel count per encoder level.
    pub fn encoder_channels(&self) -> Vec<usize> {
        (0..self.depth)
            .map(|i| {
                let doubled = self
                    .base_channels
                    .checked_shl(i as u32)
                    .unwrap_or(self.max_channels);
                doubled.min(self.max_channels)
            })
            .collect()
    }

    pub fn latent_channels(&self) -> usize {
        *self.encoder_channels().last().expect("depth >= 2")
    }

    pub fn latent_spatial(&self) -> usize {
        self.input_size >> self.depth
    }

    /// Spatial size of skip feature `i` (0-based; level i halves i+1 times).
    pub fn skip_spatial(&self, i: usize) -> usize {
        self.input_size >> (i + 1)
    }
}

/// Output of an encoder: the bottleneck features plus one skip feature per
/// non-bottleneck level, consumable by any domain's decoder.
#[derive(Debug, Clone)]
pub struct LatentCode {
    /// Shape `(N, latent_channels, s, s)` with `s = input_size / 2^depth`.
    pub features: Array4<f64>,
    /// `depth - 1` feature maps; `skips[i]` has spatial size
    /// `input_size / 2^(i+1)`.
    pub skips: Vec<Array4<f64>>,
}

#[derive(Debug, Clone)]
struct EncBlock {
    conv: Conv2d,
    norm: Option<InstanceNorm2d>,
}

/// Per-block tensors needed by the backward pass.
#[derive(Debug)]
pub struct EncoderCache {
    conv_in: Vec<Array4<f64>>,
    norm: Vec<Option<NormCache>>,
    act_in: Vec<Array4<f64>>,
}

/// Domain encoder: `depth` blocks of stride-2 conv (+ instance norm on all
/// but the outermost and bottleneck blocks) + leaky ReLU.
#[derive(Debug, Clone)]
pub struct Encoder {
    blocks: Vec<EncBlock>,
}

impl Encoder {
    fn new(arch: &ArchConfig, rng: &mut rand_chacha::ChaCha20Rng) -> Encoder {
        let channels = arch.encoder_channels();
        let mut blocks = Vec::with_capacity(arch.depth);
        for i in 0..arch.depth {
            let in_ch = if i == 0 { arch.input_channels } else { channels[i - 1] };
            let conv = Conv2d::new(in_ch, channels[i], 4, 2, 1, arch.init_std, rng);
            // No norm on the first block (raw intensities) nor the
            // bottleneck (spatial size can be 1x1, where instance
            // statistics are degenerate).
            let norm = if i > 0 && i < arch.depth - 1 {
                Some(InstanceNorm2d::new(channels[i], arch.init_std, rng))
            } else {
                None
            };
            blocks.push(EncBlock { conv, norm });
        }
        Encoder { blocks }
    }

    fn run(&self, x: &Array4<f64>, mut cache: Option<&mut EncoderCache>) -> LatentCode {
        let depth = self.blocks.len();
        let mut skips = Vec::with_capacity(depth - 1);
        let mut h = x.clone();
        for (i, block) in self.blocks.iter().enumerate() {
            let conv_in = h;
            let t = block.conv.forward(&conv_in);
            let (act_in, norm_cache) = match &block.norm {
                Some(norm) => {
                    let (y, c) = norm.forward(&t);
                    (y, Some(c))
                }
                None => (t, None),
            };
            h = leaky_relu_forward(&act_in, LEAKY_SLOPE);
            if let Some(c) = cache.as_deref_mut() {
                c.conv_in.push(conv_in);
                c.norm.push(norm_cache);
                c.act_in.push(act_in);
            }
            if i < depth - 1 {
                skips.push(h.clone());
            }
        }
        LatentCode { features: h, skips }
    }

    /// Forward pass keeping the tensors backward needs.
    pub fn forward(&self, x: &Array4<f64>) -> (LatentCode, EncoderCache) {
        let mut cache = EncoderCache {
            conv_in: Vec::with_capacity(self.blocks.len()),
            norm: Vec::with_capacity(self.blocks.len()),
            act_in: Vec::with_capacity(self.blocks.len()),
        };
        let code = self.run(x, Some(&mut cache));
        (code, cache)
    }

    /// Cache-free forward pass for inference.
    pub fn infer(&self, x: &Array4<f64>) -> LatentCode {
        self.run(x, None)
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. the
    /// encoder input. `g_skips[i]` must align with `LatentCode::skips[i]`.
    pub fn backward(
        &mut self,
        cache: &EncoderCache,
        g_latent: &Array4<f64>,
        g_skips: &[Array4<f64>],
    ) -> Array4<f64> {
        let depth = self.blocks.len();
        assert_eq!(g_skips.len(), depth - 1, "one skip gradient per level");
        let mut g_out: Array4<f64> = g_latent.clone();
        for i in (0..depth).rev() {
            if i < depth - 1 {
                g_out += &g_skips[i];
            }
            let g_act_in = leaky_relu_backward(&cache.act_in[i], &g_out, LEAKY_SLOPE);
            let block = &mut self.blocks[i];
            let g_conv_out = match (&mut block.norm, &cache.norm[i]) {
                (Some(norm), Some(nc)) => norm.backward(nc, &g_act_in, true),
                _ => g_act_in,
            };
            g_out = block.conv.backward(&cache.conv_in[i], &g_conv_out);
        }
        g_out
    }

    pub fn params(&self) -> Vec<&Param> {
        self.blocks
            .iter()
            .flat_map(|b| {
                let mut p = b.conv.params();
                if let Some(n) = &b.norm {
                    p.extend(n.params());
                }
                p
            })
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.blocks
            .iter_mut()
            .flat_map(|b| {
                let mut p = b.conv.params_mut();
                if let Some(n) = &mut b.norm {
                    p.extend(n.params_mut());
                }
                p
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct DecBlock {
    convt: ConvTranspose2d,
    norm: Option<InstanceNorm2d>,
}

#[derive(Debug)]
pub struct DecoderCache {
    convt_in: Vec<Array4<f64>>,
    norm: Vec<Option<NormCache>>,
    /// Pre-activation for ReLU blocks; the tanh output for the final block.
    act: Vec<Array4<f64>>,
}

/// Domain decoder: mirrors the encoder with stride-2 transposed convs,
/// concatenating the matching skip feature before every non-initial block;
/// tanh-bounded output.
#[derive(Debug, Clone)]
pub struct Decoder {
    blocks: Vec<DecBlock>,
}

impl Decoder {
    fn new(arch: &ArchConfig, rng: &mut rand_chacha::ChaCha20Rng) -> Decoder {
        let channels = arch.encoder_channels();
        let depth = arch.depth;
        let mut blocks = Vec::with_capacity(depth);
        for k in 0..depth {
            let in_ch = if k == 0 {
                channels[depth - 1]
            } else {
                2 * channels[depth - 1 - k]
            };
            let out_ch = if k < depth - 1 { channels[depth - 2 - k] } else { arch.input_channels };
            let convt = ConvTranspose2d::new(in_ch, out_ch, 4, 2, 1, arch.init_std, rng);
            let norm = if k < depth - 1 {
                Some(InstanceNorm2d::new(out_ch, arch.init_std, rng))
            } else {
                None
            };
            blocks.push(DecBlock { convt, norm });
        }
        Decoder { blocks }
    }

    fn run(&self, code: &LatentCode, mut cache: Option<&mut DecoderCache>) -> Array4<f64> {
        let depth = self.blocks.len();
        let mut h = code.features.clone();
        for (k, block) in self.blocks.iter().enumerate() {
            let convt_in = if k == 0 {
                h
            } else {
                concatenate(Axis(1), &[h.view(), code.skips[depth - 1 - k].view()])
                    .expect("skip concat shapes checked by decode()")
            };
            let t = block.convt.forward(&convt_in);
            let (out, act_saved, norm_cache) = match &block.norm {
                Some(norm) => {
                    let (t2, nc) = norm.forward(&t);
                    let y = relu_forward(&t2);
                    (y, t2, Some(nc))
                }
                None => {
                    let y = tanh_forward(&t);
                    // Final block: save the tanh output for backward.
                    (y.clone(), y, None)
                }
            };
            if let Some(c) = cache.as_deref_mut() {
                c.convt_in.push(convt_in);
                c.norm.push(norm_cache);
                c.act.push(act_saved);
            }
            h = out;
        }
        h
    }

    pub fn forward(&self, code: &LatentCode) -> (Array4<f64>, DecoderCache) {
        let mut cache = DecoderCache {
            convt_in: Vec::with_capacity(self.blocks.len()),
            norm: Vec::with_capacity(self.blocks.len()),
            act: Vec::with_capacity(self.blocks.len()),
        };
        let y = self.run(code, Some(&mut cache));
        (y, cache)
    }

    pub fn infer(&self, code: &LatentCode) -> Array4<f64> {
        self.run(code, None)
    }

    /// Accumulates parameter gradients; returns the gradient w.r.t. the
    /// latent features and each skip feature (aligned with
    /// `LatentCode::skips`).
    pub fn backward(&mut self, cache: &DecoderCache, gy: &Array4<f64>) -> (Array4<f64>, Vec<Array4<f64>>) {
        let depth = self.blocks.len();
        let mut g_skips: Vec<Option<Array4<f64>>> = vec![None; depth - 1];
        let mut g = gy.clone();
        for k in (0..depth).rev() {
            let block = &mut self.blocks[k];
            let g_t = match (&mut block.norm, &cache.norm[k]) {
                (Some(norm), Some(nc)) => {
                    let g_t2 = relu_backward(&cache.act[k], &g);
                    norm.backward(nc, &g_t2, true)
                }
                _ => tanh_backward(&cache.act[k], &g),
            };
            let g_in = block.convt.backward(&cache.convt_in[k], &g_t);
            if k == 0 {
                return (g_in, g_skips.into_iter().map(|o| o.expect("all skips visited")).collect());
            }
            // Split the concat gradient back into carry and skip parts.
            let carry_ch = g_in.dim().1 / 2;
            let (g_carry, g_skip) = g_in.view().split_at(Axis(1), carry_ch);
            g_skips[depth - 1 - k] = Some(g_skip.to_owned());
            g = g_carry.to_owned();
        }
        unreachable!("loop returns at k == 0");
    }

    pub fn params(&self) -> Vec<&Param> {
        self.blocks
            .iter()
            .flat_map(|b| {
                let mut p = b.convt.params();
                if let Some(n) = &b.norm {
                    p.extend(n.params());
                }
                p
            })
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.blocks
            .iter_mut()
            .flat_map(|b| {
                let mut p = b.convt.params_mut();
                if let Some(n) = &mut b.norm {
                    p.extend(n.params_mut());
                }
                p
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct DiscBlock {
    conv: Conv2d,
    norm: Option<InstanceNorm2d>,
    /// Leaky ReLU on all but the output block.
    activated: bool,
}

#[derive(Debug)]
pub struct DiscriminatorCache {
    conv_in: Vec<Array4<f64>>,
    norm: Vec<Option<NormCache>>,
    act_in: Vec<Option<Array4<f64>>>,
}

/// 70x70-receptive-field patch discriminator: 4x4 convolutions with strides
/// 2,2,2,1,1, channels base,2x,4x,8x,1.
#[derive(Debug, Clone)]
pub struct Discriminator {
    blocks: Vec<DiscBlock>,
}

impl Discriminator {
    /// Strides of the intermediate layers that fit a given input size. The
    /// canonical layout is 2,2,2,1 plus the stride-1 output conv; layers
    /// that would shrink the map below 1x1 (only possible on toy test
    /// sizes) are dropped from the tail.
    fn mid_strides(input: usize) -> Vec<usize> {
        let out = |s, stride| crate::nn::conv::conv_out_size(s, 4, stride, 1);
        let mut size = input;
        let mut strides = Vec::new();
        for stride in [2usize, 2, 2, 1] {
            let next = out(size, stride);
            if next == 0 || out(next, 1) == 0 {
                break;
            }
            strides.push(stride);
            size = next;
        }
        strides
    }

    fn new(arch: &ArchConfig, rng: &mut rand_chacha::ChaCha20Rng) -> Discriminator {
        let base = arch.disc_base_channels;
        let mut blocks = Vec::new();
        let mut in_ch = arch.input_channels;
        for (i, stride) in Self::mid_strides(arch.input_size).into_iter().enumerate() {
            let out_ch = base << i;
            blocks.push(DiscBlock {
                conv: Conv2d::new(in_ch, out_ch, 4, stride, 1, arch.init_std, rng),
                norm: if i > 0 {
                    Some(InstanceNorm2d::new(out_ch, arch.init_std, rng))
                } else {
                    None
                },
                activated: true,
            });
            in_ch = out_ch;
        }
        // Stride-1 output conv to a single unbounded score channel.
        blocks.push(DiscBlock {
            conv: Conv2d::new(in_ch, 1, 4, 1, 1, arch.init_std, rng),
            norm: None,
            activated: false,
        });
        Discriminator { blocks }
    }

    /// Score-map spatial size for a square input.
    pub fn out_size(input: usize) -> usize {
        let mut s = input;
        for stride in Self::mid_strides(input) {
            s = crate::nn::conv::conv_out_size(s, 4, stride, 1);
        }
        crate::nn::conv::conv_out_size(s, 4, 1, 1)
    }

    fn run(&self, x: &Array4<f64>, mut cache: Option<&mut DiscriminatorCache>) -> Array4<f64> {
        let mut h = x.clone();
        for block in &self.blocks {
            let conv_in = h;
            let t = block.conv.forward(&conv_in);
            let (act_in, norm_cache) = match &block.norm {
                Some(norm) => {
                    let (y, c) = norm.forward(&t);
                    (y, Some(c))
                }
                None => (t, None),
            };
            let (out, saved_act) = if block.activated {
                (leaky_relu_forward(&act_in, LEAKY_SLOPE), Some(act_in))
            } else {
                (act_in, None)
            };
            if let Some(c) = cache.as_deref_mut() {
                c.conv_in.push(conv_in);
                c.norm.push(norm_cache);
                c.act_in.push(saved_act);
            }
            h = out;
        }
        h
    }

    pub fn forward(&self, x: &Array4<f64>) -> (Array4<f64>, DiscriminatorCache) {
        let mut cache = DiscriminatorCache {
            conv_in: Vec::with_capacity(self.blocks.len()),
            norm: Vec::with_capacity(self.blocks.len()),
            act_in: Vec::with_capacity(self.blocks.len()),
        };
        let y = self.run(x, Some(&mut cache));
        (y, cache)
    }

    pub fn infer(&self, x: &Array4<f64>) -> Array4<f64> {
        self.run(x, None)
    }

    /// Gradient w.r.t. the input with parameters frozen (generator update).
    pub fn backward_input(&self, cache: &DiscriminatorCache, gy: &Array4<f64>) -> Array4<f64> {
        let mut g = gy.clone();
        for (i, block) in self.blocks.iter().enumerate().rev() {
            if block.activated {
                let act_in = cache.act_in[i].as_ref().expect("activated block saved input");
                g = leaky_relu_backward(act_in, &g, LEAKY_SLOPE);
            }
            if let (Some(norm), Some(nc)) = (&block.norm, &cache.norm[i]) {
                // Frozen: clone dodges &mut; param grads are discarded.
                let mut frozen = norm.clone();
                g = frozen.backward(nc, &g, false);
            }
            g = block.conv.backward_data(cache.conv_in[i].dim(), &g);
        }
        g
    }

    /// Accumulates parameter gradients (discriminator update); the input
    /// gradient is not materialized for the outermost block.
    pub fn backward_params(&mut self, cache: &DiscriminatorCache, gy: &Array4<f64>) {
        let mut g = gy.clone();
        for i in (0..self.blocks.len()).rev() {
            let block = &mut self.blocks[i];
            if block.activated {
                let act_in = cache.act_in[i].as_ref().expect("activated block saved input");
                g = leaky_relu_backward(act_in, &g, LEAKY_SLOPE);
            }
            if let (Some(norm), Some(nc)) = (&mut block.norm, &cache.norm[i]) {
                g = norm.backward(nc, &g, true);
            }
            if i > 0 {
                g = block.conv.backward(&cache.conv_in[i], &g);
            } else {
                block.conv.backward_params(&cache.conv_in[i], &g);
            }
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        self.blocks
            .iter()
            .flat_map(|b| {
                let mut p = b.conv.params();
                if let Some(n) = &b.norm {
                    p.extend(n.params());
                }
                p
            })
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.blocks
            .iter_mut()
            .flat_map(|b| {
                let mut p = b.conv.params_mut();
                if let Some(n) = &mut b.norm {
                    p.extend(n.params_mut());
                }
                p
            })
            .collect()
    }
}

/// The full parameter set: one encoder, decoder and discriminator per
/// registered domain, all structurally identical within their role.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub arch: ArchConfig,
    pub registry: DomainRegistry,
    pub encoders: BTreeMap<String, Encoder>,
    pub decoders: BTreeMap<String, Decoder>,
    pub discriminators: BTreeMap<String, Discriminator>,
}

impl ModelBundle {
    /// Deterministically initializes all components. Every component draws
    /// from its own RNG derived from (seed, role, domain id), so parameters
    /// do not depend on construction order.
    pub fn new(arch: ArchConfig, registry: DomainRegistry, seed: u64) -> Result<ModelBundle> {
        arch.validate()?;
        if registry.len() < 2 {
            return Err(Error::Config(
                "a model bundle needs at least 2 domains".into(),
            ));
        }
        let mut encoders = BTreeMap::new();
        let mut decoders = BTreeMap::new();
        let mut discriminators = BTreeMap::new();
        for id in registry.ids() {
            let mut rng = crate::nn::derive_rng(seed, &format!("encoder/{id}"));
            encoders.insert(id.to_string(), Encoder::new(&arch, &mut rng));
            let mut rng = crate::nn::derive_rng(seed, &format!("decoder/{id}"));
            decoders.insert(id.to_string(), Decoder::new(&arch, &mut rng));
            let mut rng = crate::nn::derive_rng(seed, &format!("discriminator/{id}"));
            discriminators.insert(id.to_string(), Discriminator::new(&arch, &mut rng));
        }
        Ok(ModelBundle {
            arch,
            registry,
            encoders,
            decoders,
            discriminators,
        })
    }

    fn check_input(&self, x: &Array4<f64>) -> Result<()> {
        let (_, c, h, w) = x.dim();
        if c != self.arch.input_channels || h != self.arch.input_size || w != self.arch.input_size {
            return Err(Error::Shape(format!(
                "expected input of shape (N, {}, {}, {}), got {:?}",
                self.arch.input_channels,
                self.arch.input_size,
                self.arch.input_size,
                x.dim()
            )));
        }
        Ok(())
    }

    fn check_code(&self, code: &LatentCode) -> Result<()> {
        let (n, c, h, w) = code.features.dim();
        let (lc, ls) = (self.arch.latent_channels(), self.arch.latent_spatial());
        if c != lc || h != ls || w != ls {
            return Err(Error::Shape(format!(
                "latent wiring error: features {:?}, expected (N, {lc}, {ls}, {ls})",
                code.features.dim()
            )));
        }
        if code.skips.len() != self.arch.depth - 1 {
            return Err(Error::Shape(format!(
                "latent wiring error: {} skips, expected {}",
                code.skips.len(),
                self.arch.depth - 1
            )));
        }
        let channels = self.arch.encoder_channels();
        for (i, skip) in code.skips.iter().enumerate() {
            let want = (n, channels[i], self.arch.skip_spatial(i), self.arch.skip_spatial(i));
            if skip.dim() != want {
                return Err(Error::Shape(format!(
                    "latent wiring error: skip {i} is {:?}, expected {want:?}",
                    skip.dim()
                )));
            }
        }
        Ok(())
    }

    pub fn encoder(&self, id: &str) -> Result<&Encoder> {
        self.registry.get(id)?;
        Ok(&self.encoders[id])
    }

    pub fn decoder(&self, id: &str) -> Result<&Decoder> {
        self.registry.get(id)?;
        Ok(&self.decoders[id])
    }

    pub fn discriminator(&self, id: &str) -> Result<&Discriminator> {
        self.registry.get(id)?;
        Ok(&self.discriminators[id])
    }

    /// Compresses slices into the shared latent space.
    pub fn encode(&self, domain: &str, x: &Array4<f64>) -> Result<LatentCode> {
        self.check_input(x)?;
        Ok(self.encoder(domain)?.infer(x))
    }

    /// Decodes a latent (from any domain's encoder) into this domain's
    /// style; output is tanh-bounded to [-1, 1].
    pub fn decode(&self, domain: &str, code: &LatentCode) -> Result<Array4<f64>> {
        self.check_code(code)?;
        Ok(self.decoder(domain)?.infer(code))
    }

    /// Source encoder + target decoder: the generator for one path.
    pub fn translate(&self, path: &TranslationPath, x: &Array4<f64>) -> Result<Array4<f64>> {
        let parts = self.registry.resolve_generator(path)?;
        let code = self.encode(&parts.encoder, x)?;
        self.decode(&parts.decoder, &code)
    }

    /// Patch realness scores for target-domain judgment; unbounded reals.
    pub fn discriminate(&self, domain: &str, x: &Array4<f64>) -> Result<Array4<f64>> {
        self.check_input(x)?;
        Ok(self.discriminator(domain)?.infer(x))
    }

    /// All generator parameters (encoders then decoders, domain-sorted).
    pub fn generator_params(&self) -> Vec<&Param> {
        let mut out = Vec::new();
        for enc in self.encoders.values() {
            out.extend(enc.params());
        }
        for dec in self.decoders.values() {
            out.extend(dec.params());
        }
        out
    }

    pub fn generator_params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for enc in self.encoders.values_mut() {
            out.extend(enc.params_mut());
        }
        for dec in self.decoders.values_mut() {
            out.extend(dec.params_mut());
        }
        out
    }

    pub fn discriminator_params(&self) -> Vec<&Param> {
        self.discriminators
            .values()
            .flat_map(|d| d.params())
            .collect()
    }

    pub fn discriminator_params_mut(&mut self) -> Vec<&mut Param> {
        self.discriminators
            .values_mut()
            .flat_map(|d| d.params_mut())
            .collect()
    }

    pub fn zero_generator_grads(&mut self) {
        for p in self.generator_params_mut() {
            p.zero_grad();
        }
    }

    pub fn zero_discriminator_grads(&mut self) {
        for p in self.discriminator_params_mut() {
            p.zero_grad();
        }
    }

    /// Errors if any parameter is NaN or infinite.
    pub fn check_finite(&self) -> Result<()> {
        for (role, params) in [
            ("generator", self.generator_params()),
            ("discriminator", self.discriminator_params()),
        ] {
            for p in params {
                if p.value.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        quantity: format!("{role} parameter"),
                        path: "-".into(),
                    });
                }
            }
        }
        Ok(())
    }
}
