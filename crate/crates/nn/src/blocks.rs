use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use cht_tensor::ops::{
    batch_norm, concat_channels, conv2d, conv_transpose2d, dropout, relu,
};
use cht_tensor::{init, Element, ParamId, ParamRole, ParamStore, Tape, Tensor};

use crate::{ceil_half, NnError, Result};

/// Per-forward context: one tensor per registered parameter (tracked leaves
/// in training mode, constants in eval mode), dropout rng, and the batch-norm
/// running-statistic updates collected along the way.
pub struct FwdCtx<'a, T: Element> {
    params: Vec<Tensor<T>>,
    pub training: bool,
    rng: Option<&'a mut ChaCha8Rng>,
    stat_updates: Vec<(ParamId, Vec<T>)>,
}

impl<'a, T: Element> FwdCtx<'a, T> {
    /// Training-mode context: trainable parameters become tape leaves so
    /// `backward` later yields their gradients.
    pub fn train(store: &ParamStore<T>, tape: &Tape<T>, rng: &'a mut ChaCha8Rng) -> Self {
        let params = store
            .iter()
            .map(|(_, p)| {
                let t = Tensor::new(p.shape.clone(), p.data.clone());
                if p.is_trainable() {
                    t.requires_grad(tape)
                } else {
                    t
                }
            })
            .collect();
        FwdCtx {
            params,
            training: true,
            rng: Some(rng),
            stat_updates: Vec::new(),
        }
    }

    /// Eval-mode context: constants only, no tape, dropout inactive.
    pub fn eval(store: &ParamStore<T>) -> Self {
        let params = store
            .iter()
            .map(|(_, p)| Tensor::new(p.shape.clone(), p.data.clone()))
            .collect();
        FwdCtx {
            params,
            training: false,
            rng: None,
            stat_updates: Vec::new(),
        }
    }

    pub fn param(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0]
    }

    /// Tracked leaf tensors (for loss regularization terms and gradient
    /// readout after backward), in registration order.
    pub fn leaves(&self) -> &[Tensor<T>] {
        &self.params
    }

    fn rng(&mut self) -> &mut ChaCha8Rng {
        self.rng
            .as_deref_mut()
            .expect("training forward requires an rng")
    }

    fn push_update(&mut self, id: ParamId, values: Vec<T>) {
        self.stat_updates.push((id, values));
    }

    /// Writes collected running-statistic updates back into the store.
    pub fn apply_stat_updates(self, store: &mut ParamStore<T>) -> Vec<Tensor<T>> {
        for (id, values) in self.stat_updates {
            store.get_mut(id).data = values;
        }
        self.params
    }
}

/// Convolution layer: owns kernel (He-initialized) and optional zero bias.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn init<T: Element>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        k: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    ) -> Self {
        let fan_in = in_ch * k * k;
        let weight = store.register(
            format!("{name}.weight"),
            ParamRole::ConvKernel,
            vec![out_ch, in_ch, k, k],
            init::he_normal(rng, out_ch * in_ch * k * k, fan_in),
        );
        let bias = bias.then(|| {
            store.register(
                format!("{name}.bias"),
                ParamRole::Bias,
                vec![out_ch],
                init::zeros(out_ch),
            )
        });
        Conv2d {
            weight,
            bias,
            stride,
            padding,
        }
    }

    pub fn forward<T: Element>(&self, ctx: &FwdCtx<'_, T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(conv2d(
            x,
            ctx.param(self.weight),
            self.bias.map(|b| ctx.param(b)),
            self.stride,
            self.padding,
        )?)
    }
}

/// Transpose-convolution layer with the output padding recorded at build
/// time from the encoder's size chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvTranspose2d {
    pub weight: ParamId,
    pub stride: usize,
    pub padding: usize,
    pub output_padding: (usize, usize),
}

impl ConvTranspose2d {
    #[allow(clippy::too_many_arguments)]
    pub fn init<T: Element>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        k: usize,
        stride: usize,
        padding: usize,
        output_padding: (usize, usize),
    ) -> Self {
        let fan_in = in_ch * k * k;
        let weight = store.register(
            format!("{name}.weight"),
            ParamRole::ConvKernel,
            vec![in_ch, out_ch, k, k],
            init::he_normal(rng, in_ch * out_ch * k * k, fan_in),
        );
        ConvTranspose2d {
            weight,
            stride,
            padding,
            output_padding,
        }
    }

    pub fn forward<T: Element>(&self, ctx: &FwdCtx<'_, T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(conv_transpose2d(
            x,
            ctx.param(self.weight),
            None,
            self.stride,
            self.padding,
            self.output_padding,
        )?)
    }
}

/// Batch-norm layer; scale initialized to 1, shift to 0, running stats to
/// (0, 1). eps = 1e-5 and momentum = 0.1 unless overridden.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchNorm {
    pub scale: ParamId,
    pub shift: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub eps: f64,
    pub momentum: f64,
}

impl BatchNorm {
    pub fn init<T: Element>(store: &mut ParamStore<T>, name: &str, channels: usize) -> Self {
        BatchNorm {
            scale: store.register(
                format!("{name}.scale"),
                ParamRole::BnScale,
                vec![channels],
                init::ones(channels),
            ),
            shift: store.register(
                format!("{name}.shift"),
                ParamRole::BnShift,
                vec![channels],
                init::zeros(channels),
            ),
            running_mean: store.register(
                format!("{name}.running_mean"),
                ParamRole::BnRunningStat,
                vec![channels],
                init::zeros(channels),
            ),
            running_var: store.register(
                format!("{name}.running_var"),
                ParamRole::BnRunningStat,
                vec![channels],
                init::ones(channels),
            ),
            eps: 1e-5,
            momentum: 0.1,
        }
    }

    pub fn forward<T: Element>(
        &self,
        ctx: &mut FwdCtx<'_, T>,
        x: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let (out, update) = batch_norm(
            x,
            ctx.param(self.scale),
            ctx.param(self.shift),
            ctx.param(self.running_mean).data(),
            ctx.param(self.running_var).data(),
            ctx.training,
            T::from_f64(self.eps),
            T::from_f64(self.momentum),
        )?;
        if let Some(up) = update {
            ctx.push_update(self.running_mean, up.mean);
            ctx.push_update(self.running_var, up.var);
        }
        Ok(out)
    }
}

/// Dense-block shape: `layers` (L) conv layers each growing the feature
/// stack by `growth` (K) maps; output channels = input + K * L.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DenseBlockSpec {
    pub layers: usize,
    pub growth: usize,
    pub dropout: f64,
}

/// DenseNet-style block: each layer runs bn -> relu -> conv(k3,s1,p1)
/// producing K maps (dropout after the conv in training), concatenated onto
/// the running feature stack. L = 0 is the identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseBlock {
    pub spec: DenseBlockSpec,
    layers: Vec<(BatchNorm, Conv2d)>,
}

impl DenseBlock {
    pub fn init<T: Element>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_channels: usize,
        spec: DenseBlockSpec,
    ) -> Self {
        let mut layers = Vec::with_capacity(spec.layers);
        let mut c = in_channels;
        for i in 0..spec.layers {
            let bn = BatchNorm::init(store, &format!("{name}.layer{i}.bn"), c);
            let conv = Conv2d::init(
                store,
                rng,
                &format!("{name}.layer{i}.conv"),
                c,
                spec.growth,
                3,
                1,
                1,
                false,
            );
            layers.push((bn, conv));
            c += spec.growth;
        }
        DenseBlock { spec, layers }
    }

    pub fn out_channels(&self, in_channels: usize) -> usize {
        in_channels + self.spec.growth * self.spec.layers
    }

    pub fn forward<T: Element>(
        &self,
        ctx: &mut FwdCtx<'_, T>,
        x: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let mut stack = x.clone();
        for (bn, conv) in &self.layers {
            let h = bn.forward(ctx, &stack)?;
            let h = relu(&h);
            let h = conv.forward(ctx, &h)?;
            let h = if ctx.training && self.spec.dropout > 0.0 {
                let p = self.spec.dropout;
                dropout(&h, p, true, ctx.rng())?
            } else {
                h
            };
            stack = concat_channels(&stack, &h)?;
        }
        Ok(stack)
    }
}

/// Encoding transition: bn -> relu -> conv(k1,s1,p0) halving channels
/// (floor), then bn -> relu -> conv(k3,s2,p1) halving both spatial extents
/// (ceil).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncodeTransition {
    bn1: BatchNorm,
    conv1: Conv2d,
    bn2: BatchNorm,
    conv2: Conv2d,
}

impl EncodeTransition {
    pub fn init<T: Element>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_channels: usize,
    ) -> Result<Self> {
        if in_channels < 2 {
            return Err(NnError::TooFewChannels(in_channels));
        }
        let half = in_channels / 2;
        Ok(EncodeTransition {
            bn1: BatchNorm::init(store, &format!("{name}.bn1"), in_channels),
            conv1: Conv2d::init(store, rng, &format!("{name}.conv1"), in_channels, half, 1, 1, 0, false),
            bn2: BatchNorm::init(store, &format!("{name}.bn2"), half),
            conv2: Conv2d::init(store, rng, &format!("{name}.conv2"), half, half, 3, 2, 1, false),
        })
    }

    pub fn out_channels(in_channels: usize) -> usize {
        in_channels / 2
    }

    pub fn out_extent(h: usize) -> usize {
        ceil_half(h)
    }

    pub fn forward<T: Element>(
        &self,
        ctx: &mut FwdCtx<'_, T>,
        x: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let h = self.bn1.forward(ctx, x)?;
        let h = self.conv1.forward(ctx, &relu(&h))?;
        let h = self.bn2.forward(ctx, &h)?;
        self.conv2.forward(ctx, &relu(&h))
    }
}

/// Output padding that makes a stride-2 k3p1 transpose convolution hit
/// `target` exactly from extent `from` (reachable targets: 2h-1 and 2h).
pub(crate) fn decode_output_padding(from: usize, target: usize) -> Result<usize> {
    let lo = 2 * from - 1;
    if target == lo {
        Ok(0)
    } else if target == lo + 1 {
        Ok(1)
    } else {
        Err(NnError::UnreachableTarget {
            target,
            from,
            lo,
            hi: lo + 1,
        })
    }
}

/// Decoding transition: bn -> relu -> conv(k1,s1,p0) halving channels
/// (floor), then bn -> relu -> transpose conv(k3,s2,p1) restoring the paired
/// encode's input extents exactly via recorded output padding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeTransition {
    bn1: BatchNorm,
    conv1: Conv2d,
    bn2: BatchNorm,
    tconv: ConvTranspose2d,
    pub target_hw: (usize, usize),
}

impl DecodeTransition {
    pub fn init<T: Element>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_channels: usize,
        from_hw: (usize, usize),
        target_hw: (usize, usize),
    ) -> Result<Self> {
        if in_channels < 2 {
            return Err(NnError::TooFewChannels(in_channels));
        }
        let half = in_channels / 2;
        let opad = (
            decode_output_padding(from_hw.0, target_hw.0)?,
            decode_output_padding(from_hw.1, target_hw.1)?,
        );
        Ok(DecodeTransition {
            bn1: BatchNorm::init(store, &format!("{name}.bn1"), in_channels),
            conv1: Conv2d::init(store, rng, &format!("{name}.conv1"), in_channels, half, 1, 1, 0, false),
            bn2: BatchNorm::init(store, &format!("{name}.bn2"), half),
            tconv: ConvTranspose2d::init(
                store,
                rng,
                &format!("{name}.tconv"),
                half,
                half,
                3,
                2,
                1,
                opad,
            ),
            target_hw,
        })
    }

    pub fn out_channels(in_channels: usize) -> usize {
        in_channels / 2
    }

    pub fn forward<T: Element>(
        &self,
        ctx: &mut FwdCtx<'_, T>,
        x: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let h = self.bn1.forward(ctx, x)?;
        let h = self.conv1.forward(ctx, &relu(&h))?;
        let h = self.bn2.forward(ctx, &h)?;
        self.tconv.forward(ctx, &relu(&h))
    }
}

/// Final decoding layer: a decode transition whose transpose convolution
/// emits exactly one channel; the channel-halving 1x1 stage is skipped when
/// the input already has a single channel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinalDecode {
    pre: Option<(BatchNorm, Conv2d)>,
    bn: BatchNorm,
    tconv: ConvTranspose2d,
    pub target_hw: (usize, usize),
}

impl FinalDecode {
    pub fn init<T: Element>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_channels: usize,
        from_hw: (usize, usize),
        target_hw: (usize, usize),
    ) -> Result<Self> {
        let opad = (
            decode_output_padding(from_hw.0, target_hw.0)?,
            decode_output_padding(from_hw.1, target_hw.1)?,
        );
        let (pre, mid) = if in_channels >= 2 {
            let half = in_channels / 2;
            let bn = BatchNorm::init(store, &format!("{name}.bn1"), in_channels);
            let conv = Conv2d::init(
                store,
                rng,
                &format!("{name}.conv1"),
                in_channels,
                half,
                1,
                1,
                0,
                false,
            );
            (Some((bn, conv)), half)
        } else {
            (None, in_channels)
        };
        Ok(FinalDecode {
            pre,
            bn: BatchNorm::init(store, &format!("{name}.bn2"), mid),
            tconv: ConvTranspose2d::init(
                store,
                rng,
                &format!("{name}.tconv"),
                mid,
                1,
                3,
                2,
                1,
                opad,
            ),
            target_hw,
        })
    }

    pub fn forward<T: Element>(
        &self,
        ctx: &mut FwdCtx<'_, T>,
        x: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let mut h = x.clone();
        if let Some((bn, conv)) = &self.pre {
            let t = bn.forward(ctx, &h)?;
            h = conv.forward(ctx, &relu(&t))?;
        }
        let t = self.bn.forward(ctx, &h)?;
        self.tconv.forward(ctx, &relu(&t))
    }
}
