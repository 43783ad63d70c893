use proptest::prelude::*;
use pure_codec::bitstream::{self, StreamGeometry};
use pure_codec::entropy::code_entropy;
use pure_codec::frontend::{
    analyze, interior_range, synthesize, EmbeddingSequence, FrontendConfig, Waveform, Window,
};
use pure_codec::model::CodecModel;
use pure_codec::rvq::{
    partial_reconstruct, quantize, quantize_pure, squared_distance, Codebook, QuantizationResult,
    QuantizerStack,
};
use pure_codec::training::{kmeans_init, train_stack, TrainConfig};

fn stack_strategy() -> impl Strategy<Value = QuantizerStack> {
    (1usize..=4, 1usize..=6, 1usize..=8).prop_flat_map(|(dim, stages, size)| {
        prop::collection::vec(prop::collection::vec(-2.0f64..2.0, size * dim), stages).prop_map(
            move |books| {
                QuantizerStack::new(
                    books
                        .into_iter()
                        .map(|b| Codebook::new(b, dim).unwrap())
                        .collect(),
                )
                .unwrap()
            },
        )
    })
}

fn sequence_for(dim: usize) -> impl Strategy<Value = EmbeddingSequence> {
    (1usize..=12).prop_flat_map(move |frames| {
        prop::collection::vec(-2.0f64..2.0, dim * frames)
            .prop_map(move |data| EmbeddingSequence::new(data, dim, frames, 160).unwrap())
    })
}

fn stack_and_sequence(
) -> impl Strategy<Value = (QuantizerStack, EmbeddingSequence, EmbeddingSequence)> {
    stack_strategy().prop_flat_map(|stack| {
        let dim = stack.dim();
        (Just(stack), sequence_for(dim)).prop_flat_map(move |(stack, q)| {
            let frames = q.frames();
            let enhanced = prop::collection::vec(-2.0f64..2.0, dim * frames)
                .prop_map(move |d| EmbeddingSequence::new(d, dim, frames, 160).unwrap());
            (Just(stack), Just(q), enhanced)
        })
    })
}

proptest! {
    #[test]
    fn residual_energies_telescope((stack, q, e) in stack_and_sequence()) {
        let l_max = stack.num_stages();
        for result in [quantize(&q, &stack, l_max).unwrap(), quantize_pure(&q, &e, &stack, l_max).unwrap()] {
            for l in 1..=l_max {
                let recon = partial_reconstruct(&result, &stack, l, q.hop()).unwrap();
                for t in 0..q.frames() {
                    let direct = squared_distance(q.frame(t), recon.frame(t));
                    prop_assert!((direct - result.frame_residual_energy[l - 1][t]).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn chains_are_prefix_stable((stack, q, e) in stack_and_sequence()) {
        let l_max = stack.num_stages();
        let full = quantize(&q, &stack, l_max).unwrap();
        let full_pure = quantize_pure(&q, &e, &stack, l_max).unwrap();
        for l in 1..=l_max {
            prop_assert_eq!(&quantize(&q, &stack, l).unwrap().indices[..], &full.indices[..l]);
            prop_assert_eq!(&quantize_pure(&q, &e, &stack, l).unwrap().indices[..], &full_pure.indices[..l]);
        }
    }

    #[test]
    fn pure_with_identical_anchor_is_plain((stack, q, _e) in stack_and_sequence()) {
        let l = stack.num_stages();
        let a = quantize(&q, &stack, l).unwrap();
        let b = quantize_pure(&q, &q, &stack, l).unwrap();
        prop_assert_eq!(a.indices, b.indices);
        prop_assert_eq!(a.frame_residual_energy, b.frame_residual_energy);
    }

    #[test]
    fn analysis_is_linear(
        x in prop::collection::vec(-1.0f64..1.0, 700..1200),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        seed in 0u64..1000,
    ) {
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| (v * 7.0 + (i as u64 ^ seed) as f64).sin()).collect();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let cfg = FrontendConfig { frame_len: 256, hop: 128, dim: 40, window: Window::Hann };
        let ex = analyze(&Waveform::new(x, 16_000).unwrap(), &cfg).unwrap();
        let ey = analyze(&Waveform::new(y, 16_000).unwrap(), &cfg).unwrap();
        let em = analyze(&Waveform::new(mix, 16_000).unwrap(), &cfg).unwrap();
        for ((m, u), v) in em.as_slice().iter().zip(ex.as_slice()).zip(ey.as_slice()) {
            prop_assert!((m - (a * u + b * v)).abs() <= 1e-9);
        }
    }

    #[test]
    fn full_dimension_round_trip(
        x in prop::collection::vec(-1.0f64..1.0, 256..2000),
        rect in any::<bool>(),
    ) {
        let cfg = if rect {
            FrontendConfig { frame_len: 128, hop: 128, dim: 128, window: Window::Rectangular }
        } else {
            FrontendConfig { frame_len: 128, hop: 64, dim: 128, window: Window::Hann }
        };
        let wave = Waveform::new(x, 16_000).unwrap();
        let emb = analyze(&wave, &cfg).unwrap();
        let back = synthesize(&emb, &cfg, 16_000).unwrap();
        for i in interior_range(emb.frames(), &cfg) {
            prop_assert!((back.samples()[i] - wave.samples()[i]).abs() <= 1e-9);
        }
    }

    #[test]
    fn packets_round_trip(
        size in 1usize..=2000,
        stages in 1usize..=8,
        frames in 0usize..60,
        anchored in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let streams = 1 + (seed as usize % stages);
        let indices: Vec<Vec<u32>> = (0..streams)
            .map(|l| (0..frames).map(|t| ((seed >> (t % 32)).wrapping_mul(31).wrapping_add((l * 7 + t) as u64) % size as u64) as u32).collect())
            .collect();
        let result = QuantizationResult {
            indices: indices.clone(),
            streams_used: streams,
            residual_energy: vec![0.0; streams],
            frame_residual_energy: vec![vec![0.0; frames]; streams],
            anchored,
        };
        let geometry = StreamGeometry { sample_rate: 16_000, hop: 320, dim: 64, stages, codebook_size: size };
        let bytes = bitstream::pack(&result, &geometry).unwrap();
        prop_assert_eq!(
            bytes.len(),
            bitstream::HEADER_LEN + (streams * frames * bitstream::index_bits(size)).div_ceil(8)
        );
        let (header, back) = bitstream::unpack(&bytes).unwrap();
        prop_assert_eq!(back, indices);
        prop_assert_eq!(header.anchored, anchored);
        prop_assert_eq!(header.geometry, geometry);
    }

    #[test]
    fn unpack_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..80)) {
        let _ = bitstream::unpack(&bytes);
        let mut framed = b"PURE\x01".to_vec();
        framed.extend_from_slice(&bytes);
        let _ = bitstream::unpack(&framed);
    }

    #[test]
    fn code_entropy_is_bounded(indices in prop::collection::vec(0u32..16, 1..200)) {
        let h = code_entropy(&indices, 16).unwrap();
        prop_assert!((0.0..=4.0 + 1e-12).contains(&h));
    }

    #[test]
    fn kmeans_wcss_never_increases(
        data in prop::collection::vec(-5.0f64..5.0, 40..200),
        b in 1usize..6,
        seed in any::<u64>(),
    ) {
        let n = data.len() / 2 * 2;
        let km = kmeans_init(&data[..n], 2, b, 15, seed).unwrap();
        for w in km.wcss.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }
}

#[test]
fn reloaded_model_quantizes_identically() {
    let cfg = FrontendConfig {
        dim: 8,
        ..FrontendConfig::default()
    };
    let dataset: Vec<_> = (0..3)
        .map(|u| {
            let wave = Waveform::new(
                (0..8000)
                    .map(|i| ((i * (u + 3)) as f64 * 0.013).sin() * 0.1)
                    .collect(),
                16_000,
            )
            .unwrap();
            let q = analyze(&wave, &cfg).unwrap();
            (q.clone(), q)
        })
        .collect();
    let train = TrainConfig {
        steps: 20,
        batch_frames: 32,
        ..TrainConfig::with_geometry(3, 8)
    };
    let (stack, _) = train_stack(&dataset, &train).unwrap();
    let model = CodecModel::new(16_000, cfg, stack).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    model.save(&path).unwrap();
    let loaded = CodecModel::load(&path).unwrap();
    for (q, _) in &dataset {
        assert_eq!(
            quantize(q, &model.stack, 3).unwrap(),
            quantize(q, &loaded.stack, 3).unwrap()
        );
    }
}

#[test]
fn runs_differ_only_after_first_firing() {
    let cfg = FrontendConfig {
        dim: 8,
        ..FrontendConfig::default()
    };
    let dataset: Vec<_> = (0..4)
        .map(|u| {
            let wave = Waveform::new(
                (0..8000)
                    .map(|i| {
                        ((i * (u + 2)) as f64 * 0.011).sin() * 0.1 + ((i * 7919) % 13) as f64 * 1e-3
                    })
                    .collect(),
                16_000,
            )
            .unwrap();
            let q = analyze(&wave, &cfg).unwrap();
            let e = EmbeddingSequence::new(
                q.as_slice().iter().map(|v| 0.5 * v).collect(),
                q.dim(),
                q.frames(),
                q.hop(),
            )
            .unwrap();
            (q, e)
        })
        .collect();
    let base = TrainConfig {
        steps: 120,
        batch_frames: 32,
        delay_steps: 40,
        p_enh: 0.0,
        ..TrainConfig::with_geometry(2, 8)
    };
    let pure = TrainConfig {
        p_enh: 0.5,
        ..base.clone()
    };
    let (_, log_base) = train_stack(&dataset, &base).unwrap();
    let (_, log_pure) = train_stack(&dataset, &pure).unwrap();
    let first = log_pure
        .steps
        .iter()
        .position(|s| s.anchored)
        .expect("scheduler fires");
    assert!(first >= 40);
    assert_eq!(log_base.init_wcss, log_pure.init_wcss);
    assert_eq!(log_base.steps[..first], log_pure.steps[..first]);
    assert_ne!(log_base.steps[first], log_pure.steps[first]);
}
