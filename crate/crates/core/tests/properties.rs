//! Property tests for the algebraic contracts: transform inversion, metric
//! symmetry and shift invariance, trait arithmetic, and blind round trips.

use proptest::prelude::*;

use stegophylo::channel::{apply, ChannelOp, ALL_OPS};
use stegophylo::imaging::{block_dct, block_idct, psnr, ssim, to_luma, LumaPlane};
use stegophylo::projector::{agreement, Trait};
use stegophylo::stego::{derive_material, qim_embed, qim_extract, Midband, QimParams};
use stegophylo::ImageBuffer;

fn image_strategy(side: u32) -> impl Strategy<Value = ImageBuffer> {
    prop::collection::vec(any::<u8>(), (side * side * 3) as usize)
        .prop_map(move |data| ImageBuffer::new(side, side, data).unwrap())
}

/// Images whose samples stay in [16, 239], so small shifts cannot clip.
fn headroom_image_strategy(side: u32) -> impl Strategy<Value = ImageBuffer> {
    prop::collection::vec(16u8..=239, (side * side * 3) as usize)
        .prop_map(move |data| ImageBuffer::new(side, side, data).unwrap())
}

fn shift(img: &ImageBuffer, delta: i16) -> ImageBuffer {
    let data = img
        .data()
        .iter()
        .map(|&v| (v as i16 + delta).clamp(0, 255) as u8)
        .collect();
    ImageBuffer::new(img.width(), img.height(), data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dct_round_trip_on_random_planes(
        data in prop::collection::vec(0.0f64..255.0, 256)
    ) {
        let plane = LumaPlane::new(16, 16, data).unwrap();
        let back = block_idct(&block_dct(&plane).unwrap());
        for (a, b) in plane.data().iter().zip(back.data()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn metrics_symmetric_and_shift_invariant(
        a in headroom_image_strategy(16),
        b in headroom_image_strategy(16),
        delta in -16i16..=16,
    ) {
        prop_assert_eq!(psnr(&a, &b), psnr(&b, &a));
        let s_ab = ssim(&a, &b).unwrap();
        prop_assert_eq!(s_ab, ssim(&b, &a).unwrap());

        // PSNR ignores a common constant shift exactly (the headroom rules
        // out clipping).
        prop_assert_eq!(psnr(&a, &b), psnr(&shift(&a, delta), &shift(&b, delta)));
    }

    // SSIM's variance and covariance terms ignore a common offset; its
    // luminance term does not in general, but for a cover against its own
    // embedding the window means coincide (the mid-band carries no DC), so
    // the score is offset-invariant to well below 1e-6.
    #[test]
    fn ssim_shift_invariant_for_embeddings(
        seed in any::<u64>(),
        delta in -16i16..=16,
    ) {
        let mut rng = stegophylo::prng::SplitMix64::new(seed);
        let data: Vec<u8> = (0..64 * 64 * 3)
            .map(|_| 48 + (rng.next_u64() % 160) as u8)
            .collect();
        let cover = ImageBuffer::new(64, 64, data).unwrap();
        let key = derive_material(seed, 64, 64, 64, Midband::default()).unwrap();
        let t = Trait::from_hex("00ff00ff00ff00ff").unwrap();
        let marked = qim_embed(&cover, &t, &key, &QimParams::default()).unwrap();
        let base = ssim(&cover, &marked).unwrap();
        let shifted = ssim(&shift(&cover, delta), &shift(&marked, delta)).unwrap();
        prop_assert!((base - shifted).abs() <= 1e-6, "delta {}: {} vs {}", delta, base, shifted);
    }

    #[test]
    fn luma_stays_in_range(img in image_strategy(16)) {
        for &y in to_luma(&img).data() {
            prop_assert!((0.0..=255.0).contains(&y));
        }
    }

    #[test]
    fn trait_hex_round_trip(bytes in prop::collection::vec(any::<u8>(), 1..32)) {
        let t = Trait::from_bytes(&bytes, bytes.len() * 8).unwrap();
        let hex = t.to_hex().unwrap();
        prop_assert_eq!(Trait::from_hex(&hex).unwrap(), t);
    }

    #[test]
    fn agreement_axioms(
        a_bits in prop::collection::vec(any::<bool>(), 1..128),
        b_bits in prop::collection::vec(any::<bool>(), 1..128),
    ) {
        let a = Trait::from_bools(&a_bits).unwrap();
        prop_assert_eq!(agreement(&a, &a).unwrap(), 1.0);
        prop_assert_eq!(agreement(&a, &a.complement()).unwrap(), 0.0);
        if a_bits.len() == b_bits.len() {
            let b = Trait::from_bools(&b_bits).unwrap();
            prop_assert_eq!(agreement(&a, &b).unwrap(), agreement(&b, &a).unwrap());
        }
    }

    #[test]
    fn zero_severity_is_identity(op_index in 0usize..14, seed in any::<u64>()) {
        let img = stegophylo::synthetic::generate(seed, 32, 32);
        let out = apply(&img, &ChannelOp::with_seed(ALL_OPS[op_index], 0.0, seed)).unwrap();
        prop_assert_eq!(out, img);
    }

    #[test]
    fn qim_blind_round_trip(
        seed in any::<u64>(),
        trait_bits in prop::collection::vec(any::<bool>(), 64..=64),
    ) {
        let img = stegophylo::synthetic::generate(seed, 64, 64);
        let t = Trait::from_bools(&trait_bits).unwrap();
        let key = derive_material(seed ^ 0xABCD, 64, 64, 64, Midband::default()).unwrap();
        let params = QimParams::default();
        let marked = qim_embed(&img, &t, &key, &params).unwrap();
        prop_assert_eq!(qim_extract(&marked, &key, &params).unwrap(), t);
    }
}
