use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use cht_tensor::ops::{concat_channels, elementwise_mul};
use cht_tensor::{Element, ParamStore, Tape, Tensor};

use crate::blocks::{
    DecodeTransition, DenseBlock, DenseBlockSpec, EncodeTransition, FinalDecode, FwdCtx,
};
use crate::{ceil_half, blocks::Conv2d, NnError, Result};

/// Which physical field a network predicts. The output geometry mask applies
/// to pressure and velocity only; temperature is defined over solid and
/// fluid regions alike.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldRole {
    Pressure,
    Velocity,
    Temperature,
}

impl FieldRole {
    pub fn masked(self) -> bool {
        !matches!(self, FieldRole::Temperature)
    }
}

impl std::fmt::Display for FieldRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FieldRole::Pressure => "pressure",
            FieldRole::Velocity => "velocity",
            FieldRole::Temperature => "temperature",
        };
        f.write_str(s)
    }
}

/// Full architecture description. `l_dense` is an odd-length list of
/// dense-block layer counts; the middle entry is the bottleneck.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub l_dense: Vec<usize>,
    pub k_enc: usize,
    pub k_bot: usize,
    pub k_dec: usize,
    /// Feature maps after the initial convolution.
    pub ic: usize,
    pub dropout: f64,
    pub input_channels: usize,
    pub skip_connections: bool,
    pub output_mask: bool,
}

impl ModelSpec {
    pub fn n_enc(&self) -> usize {
        (self.l_dense.len() - 1) / 2
    }

    fn validate(&self) -> Result<()> {
        if self.l_dense.is_empty() || self.l_dense.len() % 2 == 0 {
            return Err(NnError::EvenDepth(self.l_dense.len()));
        }
        if self.ic < 1 {
            return Err(NnError::InvalidSpec("ic must be >= 1".into()));
        }
        if self.k_enc < 1 || self.k_bot < 1 || self.k_dec < 1 {
            return Err(NnError::InvalidSpec("growth rates must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(NnError::InvalidSpec(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.input_channels < 1 {
            return Err(NnError::InvalidSpec("input_channels must be >= 1".into()));
        }
        Ok(())
    }
}

/// Serializable model description; round-trips with [`build_model`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub spec: ModelSpec,
    /// (n_y, n_x)
    pub resolution: (usize, usize),
    pub role: FieldRole,
    pub seed: u64,
}

impl ModelConfig {
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    }
}

struct Stage {
    block: DenseBlock,
    transition: EncodeTransition,
}

struct DecStage {
    transition: DecodeTransition,
    block: DenseBlock,
}

/// A built field-prediction network: parameters plus the layer plan with the
/// recorded size chain and output paddings.
pub struct FieldModel<T: Element> {
    pub spec: ModelSpec,
    pub role: FieldRole,
    /// (n_y, n_x)
    pub resolution: (usize, usize),
    pub params: ParamStore<T>,
    pub seed: u64,
    initial: Conv2d,
    encoder: Vec<Stage>,
    bottleneck: DenseBlock,
    decoder: Vec<DecStage>,
    final_decode: FinalDecode,
    /// Spatial extents after the initial conv and each encode stage.
    pub size_chain: Vec<(usize, usize)>,
    /// Channel counts entering every dense block, recorded at build time.
    pub channel_chain: Vec<usize>,
}

/// Builds and He-initializes a network for `spec` at `resolution` (n_y, n_x).
/// The encoder size chain and the decode output paddings that invert it are
/// fixed here, so forward is shape-stable and checkpoints are portable.
pub fn build_model<T: Element>(
    spec: ModelSpec,
    resolution: (usize, usize),
    role: FieldRole,
    seed: u64,
) -> Result<FieldModel<T>> {
    spec.validate()?;
    let n_enc = spec.n_enc();
    let min = 1usize << (n_enc + 1);
    if resolution.0 < min || resolution.1 < min {
        return Err(NnError::ResolutionTooSmall {
            resolution,
            n_enc,
            min,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let mut channel_chain = Vec::new();

    let initial = Conv2d::init(
        &mut store,
        &mut rng,
        "initial",
        spec.input_channels,
        spec.ic,
        7,
        2,
        3,
        true,
    );
    let mut hw = (ceil_half(resolution.0), ceil_half(resolution.1));
    let mut size_chain = vec![hw];
    let mut c = spec.ic;

    let mut encoder = Vec::with_capacity(n_enc);
    let mut skip_channels = Vec::with_capacity(n_enc);
    for i in 0..n_enc {
        let block = DenseBlock::init(
            &mut store,
            &mut rng,
            &format!("enc{i}.dense"),
            c,
            DenseBlockSpec {
                layers: spec.l_dense[i],
                growth: spec.k_enc,
                dropout: spec.dropout,
            },
        );
        channel_chain.push(c);
        c = block.out_channels(c);
        skip_channels.push(c);
        let transition = EncodeTransition::init(&mut store, &mut rng, &format!("enc{i}.down"), c)?;
        c = EncodeTransition::out_channels(c);
        hw = (ceil_half(hw.0), ceil_half(hw.1));
        size_chain.push(hw);
        encoder.push(Stage { block, transition });
    }

    channel_chain.push(c);
    let bottleneck = DenseBlock::init(
        &mut store,
        &mut rng,
        "bottleneck.dense",
        c,
        DenseBlockSpec {
            layers: spec.l_dense[n_enc],
            growth: spec.k_bot,
            dropout: spec.dropout,
        },
    );
    c = bottleneck.out_channels(c);

    let mut decoder = Vec::with_capacity(n_enc);
    for i in 0..n_enc {
        let from = size_chain[n_enc - i];
        let target = size_chain[n_enc - i - 1];
        let transition = DecodeTransition::init(
            &mut store,
            &mut rng,
            &format!("dec{i}.up"),
            c,
            from,
            target,
        )?;
        c = DecodeTransition::out_channels(c);
        if spec.skip_connections {
            c += skip_channels[n_enc - i - 1];
        }
        let block = DenseBlock::init(
            &mut store,
            &mut rng,
            &format!("dec{i}.dense"),
            c,
            DenseBlockSpec {
                layers: spec.l_dense[n_enc + 1 + i],
                growth: spec.k_dec,
                dropout: spec.dropout,
            },
        );
        channel_chain.push(c);
        c = block.out_channels(c);
        decoder.push(DecStage { transition, block });
    }

    let final_decode = FinalDecode::init(
        &mut store,
        &mut rng,
        "final",
        c,
        size_chain[0],
        resolution,
    )?;

    Ok(FieldModel {
        spec,
        role,
        resolution,
        params: store,
        seed,
        initial,
        encoder,
        bottleneck,
        decoder,
        final_decode,
        size_chain,
        channel_chain,
    })
}

/// One recorded training forward: the masked output plus the tape leaves (in
/// parameter-registration order) whose gradients `backward` populates.
pub struct TrainStep<T: Element> {
    pub output: Tensor<T>,
    pub leaves: Vec<Tensor<T>>,
}

impl<T: Element> FieldModel<T> {
    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            spec: self.spec.clone(),
            resolution: self.resolution,
            role: self.role,
            seed: self.seed,
        }
    }

    /// Exact count of trainable scalars (conv kernels, biases, bn
    /// scale/shift; running statistics excluded).
    pub fn param_count(&self) -> usize {
        self.params.trainable_scalars()
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        let s = input.shape();
        if s.len() != 4
            || s[1] != self.spec.input_channels
            || s[2] != self.resolution.0
            || s[3] != self.resolution.1
        {
            return Err(NnError::InputShape {
                got: s.to_vec(),
                expected: vec![
                    0,
                    self.spec.input_channels,
                    self.resolution.0,
                    self.resolution.1,
                ],
            });
        }
        Ok(())
    }

    fn forward_with(
        &self,
        ctx: &mut FwdCtx<'_, T>,
        input: &Tensor<T>,
        mut observer: Option<&mut dyn FnMut(String, &[usize])>,
    ) -> Result<Tensor<T>> {
        self.check_input(input)?;
        let mut note = |tag: String, t: &Tensor<T>| {
            if let Some(obs) = observer.as_deref_mut() {
                obs(tag, t.shape());
            }
        };
        let mut x = self.initial.forward(ctx, input)?;
        note("initial".into(), &x);
        let mut skips = Vec::with_capacity(self.encoder.len());
        for (i, stage) in self.encoder.iter().enumerate() {
            x = stage.block.forward(ctx, &x)?;
            note(format!("enc{i}.dense"), &x);
            skips.push(x.clone());
            x = stage.transition.forward(ctx, &x)?;
            note(format!("enc{i}.down"), &x);
        }
        x = self.bottleneck.forward(ctx, &x)?;
        note("bottleneck".into(), &x);
        for (i, stage) in self.decoder.iter().enumerate() {
            x = stage.transition.forward(ctx, &x)?;
            note(format!("dec{i}.up"), &x);
            if self.spec.skip_connections {
                let skip = &skips[self.encoder.len() - 1 - i];
                x = concat_channels(&x, skip)?;
                note(format!("dec{i}.skip"), &x);
            }
            x = stage.block.forward(ctx, &x)?;
            note(format!("dec{i}.dense"), &x);
        }
        x = self.final_decode.forward(ctx, &x)?;
        note("final".into(), &x);
        if self.spec.output_mask && self.role.masked() {
            let mask = geometry_mask(input);
            x = elementwise_mul(&mask, &x)?;
        }
        Ok(x)
    }

    /// Runs an eval forward on a zero input of batch size `n` and returns the
    /// shape of every intermediate activation, tagged by stage.
    pub fn trace_shapes(&self, n: usize) -> Result<Vec<(String, Vec<usize>)>> {
        let input = Tensor::zeros(vec![
            n,
            self.spec.input_channels,
            self.resolution.0,
            self.resolution.1,
        ]);
        let mut out = Vec::new();
        let mut ctx = FwdCtx::eval(&self.params);
        let mut obs = |tag: String, shape: &[usize]| out.push((tag, shape.to_vec()));
        self.forward_with(&mut ctx, &input, Some(&mut obs))?;
        Ok(out)
    }

    /// Inference forward: eval-mode batch norm (running statistics), dropout
    /// inactive, nothing recorded. Read-only, so a frozen model may serve
    /// concurrent callers.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut ctx = FwdCtx::eval(&self.params);
        self.forward_with(&mut ctx, input, None)
    }

    /// Training forward recorded on `tape`: batch statistics, active
    /// dropout, running stats updated in place on this model.
    pub fn forward_train(
        &mut self,
        tape: &Tape<T>,
        input: &Tensor<T>,
        rng: &mut ChaCha8Rng,
    ) -> Result<TrainStep<T>> {
        let mut ctx = FwdCtx::train(&self.params, tape, rng);
        let output = self.forward_with(&mut ctx, input, None)?;
        let leaves = ctx.apply_stat_updates(&mut self.params);
        Ok(TrainStep { output, leaves })
    }
}

/// delta = 1 - geometry: the inverse of input channel 0, as an untracked
/// [N,1,H,W] multiplier.
fn geometry_mask<T: Element>(input: &Tensor<T>) -> Tensor<T> {
    let s = input.shape();
    let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
    let hw = h * w;
    let mut data = Vec::with_capacity(n * hw);
    for i in 0..n {
        let geom = &input.data()[i * c * hw..i * c * hw + hw];
        data.extend(geom.iter().map(|&g| T::one() - g));
    }
    Tensor::new(vec![n, 1, h, w], data)
}

/// Two-stage temperature composition: the frozen velocity model's prediction
/// becomes the second input channel of the temperature model.
pub fn two_stage_predict<T: Element>(
    geometry: &Tensor<T>,
    velocity_model: &FieldModel<T>,
    temperature_model: &FieldModel<T>,
) -> Result<Tensor<T>> {
    if temperature_model.spec.input_channels != 2 {
        return Err(NnError::InvalidSpec(format!(
            "two-stage temperature model must take 2 input channels, has {}",
            temperature_model.spec.input_channels
        )));
    }
    let vel = velocity_model.forward(geometry)?;
    let stacked = concat_channels(geometry, &vel)?;
    temperature_model.forward(&stacked)
}

/// Bottleneck spatial extents: 1 + (n_dense_blocks - 1)/2 ceil-halvings of
/// each resolution extent (the initial convolution plus one per encode
/// stage).
pub fn code_dimension(
    resolution: (usize, usize),
    n_dense_blocks: usize,
) -> Result<(usize, usize)> {
    if n_dense_blocks == 0 || n_dense_blocks % 2 == 0 {
        return Err(NnError::EvenDepth(n_dense_blocks));
    }
    if resolution.0 == 0 || resolution.1 == 0 {
        return Err(NnError::ZeroExtent);
    }
    let halvings = 1 + (n_dense_blocks - 1) / 2;
    let (mut h, mut w) = resolution;
    for _ in 0..halvings {
        h = ceil_half(h);
        w = ceil_half(w);
    }
    Ok((h, w))
}
