//! Channel and spatial bookkeeping contracts of the building blocks.

use cht_nn::{
    ceil_half, DecodeTransition, DenseBlock, DenseBlockSpec, EncodeTransition, FinalDecode,
    FwdCtx, NnError,
};
use cht_tensor::{ParamStore, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn spec(layers: usize, growth: usize) -> DenseBlockSpec {
    DenseBlockSpec {
        layers,
        growth,
        dropout: 0.0,
    }
}

#[test]
fn dense_block_channel_growth() {
    let mut store = ParamStore::<f32>::new();
    let mut r = rng(0);
    let block = DenseBlock::init(&mut store, &mut r, "b", 16, spec(3, 8));
    assert_eq!(block.out_channels(16), 40);

    let x = Tensor::randn(vec![1, 16, 6, 5], &mut r);
    let mut ctx = FwdCtx::eval(&store);
    let y = block.forward(&mut ctx, &x).unwrap();
    assert_eq!(y.shape(), &[1, 40, 6, 5]);

    // arbitrary input channels: out = C + K*L
    let mut store = ParamStore::<f32>::new();
    let block = DenseBlock::init(&mut store, &mut r, "b", 7, spec(3, 8));
    assert_eq!(block.out_channels(7), 31);
}

#[test]
fn dense_block_zero_layers_is_identity() {
    let mut store = ParamStore::<f32>::new();
    let mut r = rng(1);
    let block = DenseBlock::init(&mut store, &mut r, "b", 3, spec(0, 8));
    let x = Tensor::randn(vec![2, 3, 4, 4], &mut r);
    let mut ctx = FwdCtx::eval(&store);
    let y = block.forward(&mut ctx, &x).unwrap();
    assert_eq!(y.data(), x.data());
    assert_eq!(store.len(), 0);
}

#[test]
fn dense_block_pressure_encoder_channels() {
    // IC = 16, K = 32, L = 12 -> 16 + 384 = 400 feature maps
    let mut store = ParamStore::<f32>::new();
    let mut r = rng(2);
    let block = DenseBlock::init(&mut store, &mut r, "b", 16, spec(12, 32));
    assert_eq!(block.out_channels(16), 400);
}

#[test]
fn dense_block_forward_is_deterministic_without_dropout() {
    let run = || {
        let mut store = ParamStore::<f32>::new();
        let mut r = rng(3);
        let block = DenseBlock::init(&mut store, &mut r, "b", 4, spec(2, 3));
        let x = Tensor::randn(vec![1, 4, 5, 5], &mut r);
        let mut ctx = FwdCtx::eval(&store);
        block.forward(&mut ctx, &x).unwrap().to_vec()
    };
    assert_eq!(run(), run());
}

#[test]
fn encode_transition_shape_rules() {
    // C=400, 95x50 -> (200, 48, 25)
    let mut store = ParamStore::<f32>::new();
    let mut r = rng(4);
    let t = EncodeTransition::init(&mut store, &mut r, "e", 400).unwrap();
    let x = Tensor::zeros(vec![1, 400, 95, 50]);
    let mut ctx = FwdCtx::eval(&store);
    let y = t.forward(&mut ctx, &x).unwrap();
    assert_eq!(y.shape(), &[1, 200, 48, 25]);

    // minimal extent: H = 2 -> 1
    assert_eq!(EncodeTransition::out_extent(2), 1);

    // odd channel count halves by floor
    assert_eq!(EncodeTransition::out_channels(401), 200);

    // fewer than 2 channels is an error
    let mut store = ParamStore::<f32>::new();
    assert!(matches!(
        EncodeTransition::init(&mut store, &mut r, "e", 1),
        Err(NnError::TooFewChannels(1))
    ));
}

#[test]
fn decode_transition_inverts_encode_extents() {
    let mut r = rng(5);

    // 13 -> 25 with output padding 0
    let mut store = ParamStore::<f32>::new();
    let t = DecodeTransition::init(&mut store, &mut r, "d", 8, (13, 13), (25, 25)).unwrap();
    let x = Tensor::zeros(vec![1, 8, 13, 13]);
    let mut ctx = FwdCtx::eval(&store);
    let y = t.forward(&mut ctx, &x).unwrap();
    assert_eq!(y.shape(), &[1, 4, 25, 25]);

    // 24 -> 48 with output padding 1 (inverts ceil(95/2)=48, ceil(48/2)=24)
    let mut store = ParamStore::<f32>::new();
    let t = DecodeTransition::init(&mut store, &mut r, "d", 8, (24, 24), (48, 48)).unwrap();
    let x = Tensor::zeros(vec![1, 8, 24, 24]);
    let mut ctx = FwdCtx::eval(&store);
    let y = t.forward(&mut ctx, &x).unwrap();
    assert_eq!(y.shape(), &[1, 4, 48, 48]);

    // 1 -> 2
    let mut store = ParamStore::<f32>::new();
    let t = DecodeTransition::init(&mut store, &mut r, "d", 4, (1, 1), (2, 2)).unwrap();
    let x = Tensor::zeros(vec![1, 4, 1, 1]);
    let mut ctx = FwdCtx::eval(&store);
    let y = t.forward(&mut ctx, &x).unwrap();
    assert_eq!(y.shape(), &[1, 2, 2, 2]);

    // unreachable target
    let mut store = ParamStore::<f32>::new();
    assert!(matches!(
        DecodeTransition::init(&mut store, &mut r, "d", 4, (13, 13), (28, 28)),
        Err(NnError::UnreachableTarget { .. })
    ));
}

/// Encode followed by decode with the recorded output padding returns the
/// original extents for every H in [2, 1024].
#[test]
fn encode_decode_roundtrip_extents() {
    for h in 2..=1024usize {
        let enc = ceil_half(h);
        // reachable: target must be 2*enc-1 or 2*enc; h is one of them
        assert!(
            h == 2 * enc - 1 || h == 2 * enc,
            "h={h} not reachable from its own ceil-half {enc}"
        );
    }
    // spot-check with real layers on both parities
    let mut r = rng(6);
    for h in [7usize, 8, 95, 96] {
        let mut store = ParamStore::<f32>::new();
        let e = EncodeTransition::init(&mut store, &mut r, "e", 4).unwrap();
        let enc_h = EncodeTransition::out_extent(h);
        let d = DecodeTransition::init(&mut store, &mut r, "d", 2, (enc_h, enc_h), (h, h))
            .unwrap();
        let x = Tensor::zeros(vec![1, 4, h, h]);
        let mut ctx = FwdCtx::eval(&store);
        let y = e.forward(&mut ctx, &x).unwrap();
        assert_eq!(y.shape()[2], enc_h);
        let z = d.forward(&mut ctx, &y).unwrap();
        assert_eq!(z.shape()[2], h);
        assert_eq!(z.shape()[3], h);
    }
}

#[test]
fn final_decode_single_channel_output() {
    let mut r = rng(7);

    // (1, C, 95, 50) -> (1, 1, 190, 100)
    let mut store = ParamStore::<f32>::new();
    let f = FinalDecode::init(&mut store, &mut r, "f", 6, (95, 50), (190, 100)).unwrap();
    let x = Tensor::zeros(vec![1, 6, 95, 50]);
    let mut ctx = FwdCtx::eval(&store);
    let y = f.forward(&mut ctx, &x).unwrap();
    assert_eq!(y.shape(), &[1, 1, 190, 100]);

    // (1, C, 48, 25) -> (1, 1, 95, 50)
    let mut store = ParamStore::<f32>::new();
    let f = FinalDecode::init(&mut store, &mut r, "f", 6, (48, 25), (95, 50)).unwrap();
    let x = Tensor::zeros(vec![1, 6, 48, 25]);
    let mut ctx = FwdCtx::eval(&store);
    let y = f.forward(&mut ctx, &x).unwrap();
    assert_eq!(y.shape(), &[1, 1, 95, 50]);

    // single-channel input skips the halving stage but still emits 1 channel
    let mut store = ParamStore::<f32>::new();
    let f = FinalDecode::init(&mut store, &mut r, "f", 1, (4, 4), (8, 8)).unwrap();
    let x = Tensor::zeros(vec![2, 1, 4, 4]);
    let mut ctx = FwdCtx::eval(&store);
    let y = f.forward(&mut ctx, &x).unwrap();
    assert_eq!(y.shape(), &[2, 1, 8, 8]);
}

#[test]
fn initial_conv_shapes() {
    use cht_nn::Conv2d;
    let mut r = rng(8);

    for (in_ch, ic, h, w, oh, ow) in [
        (1usize, 16usize, 190usize, 100usize, 95usize, 50usize),
        (2, 16, 190, 100, 95, 50),
        (1, 48, 95, 50, 48, 25),
    ] {
        let mut store = ParamStore::<f32>::new();
        let conv = Conv2d::init(&mut store, &mut r, "init", in_ch, ic, 7, 2, 3, true);
        let x = Tensor::zeros(vec![1, in_ch, h, w]);
        let ctx = FwdCtx::eval(&store);
        let y = conv.forward(&ctx, &x).unwrap();
        assert_eq!(y.shape(), &[1, ic, oh, ow]);
    }
}
