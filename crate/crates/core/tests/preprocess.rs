mod common;

use amdnet::preprocess::*;
use amdnet::synthetic::{fundus, FundusStyle};
use proptest::prelude::*;

#[test]
fn unclipped_single_tile_is_global_equalization() {
    for (i, img) in common::gray_corpus(30, 4).iter().enumerate() {
        let got = clahe(img, &ClaheParams::unclipped([1, 1])).unwrap();
        assert_eq!(got, common::brute_force_equalize(img), "fixture {i}");
    }
}

#[test]
fn clahe_spreads_the_histogram_of_fundus_luminance() {
    for (i, rgb) in common::fundus_corpus(128, 8).iter().enumerate() {
        let l = channel_extract(&rgb_to_lab(rgb).unwrap(), 0).unwrap();
        let out = clahe(&l, &ClaheParams::default()).unwrap();
        let d = histogram_distance(&histogram(&l).unwrap(), &histogram(&out).unwrap());
        assert!(d > 0.0, "fixture {i}");
    }
}

#[test]
fn lab_round_trip_is_exact_for_every_colour() {
    let mut worst = 0;
    for r in 0..=255u8 {
        for g in 0..=255u8 {
            for b in 0..=255u8 {
                let back = lab_to_srgb(srgb_to_lab([r, g, b]));
                for (x, y) in back.iter().zip([r, g, b]) {
                    worst = worst.max((*x as i32 - y as i32).abs());
                }
            }
        }
    }
    assert!(worst <= 2, "{worst}");
}

#[test]
fn eight_bit_lab_keeps_neutrals() {
    for v in 0..=255u8 {
        let back = lab_to_srgb(dequantize_lab(quantize_lab(srgb_to_lab([v; 3]))));
        for c in back {
            assert!((c as i32 - v as i32).abs() <= 1, "{v} -> {back:?}");
        }
    }
}

/// Independent bilinear resampler: half-pixel centres, clamped borders.
fn brute_resize(img: &ImageU8, w: usize, h: usize) -> Vec<u8> {
    let (sw, sh) = (img.width() as f64, img.height() as f64);
    let at = |x: f64, y: f64| {
        let xi = (x.max(0.0) as usize).min(img.width() - 1);
        let yi = (y.max(0.0) as usize).min(img.height() - 1);
        img.pixel(xi, yi)[0] as f64
    };
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let fx = ((x as f64 + 0.5) * sw / w as f64 - 0.5).clamp(0.0, sw - 1.0);
            let fy = ((y as f64 + 0.5) * sh / h as f64 - 0.5).clamp(0.0, sh - 1.0);
            let (x0, y0) = (fx.floor(), fy.floor());
            let (tx, ty) = (fx - x0, fy - y0);
            let v = at(x0, y0) * (1.0 - tx) * (1.0 - ty)
                + at(x0 + 1.0, y0) * tx * (1.0 - ty)
                + at(x0, y0 + 1.0) * (1.0 - tx) * ty
                + at(x0 + 1.0, y0 + 1.0) * tx * ty;
            out.push(v.round() as u8);
        }
    }
    out
}

#[test]
fn checkerboard_upsample_matches_brute_force() {
    let board = common::gray(2, 2, |x, y| if (x + y) % 2 == 0 { 0 } else { 255 });
    let out = resize(&board, 4, 4).unwrap();
    assert_eq!(out.data(), brute_resize(&board, 4, 4).as_slice());
    assert_eq!(
        [
            out.pixel(0, 0)[0],
            out.pixel(3, 0)[0],
            out.pixel(0, 3)[0],
            out.pixel(3, 3)[0]
        ],
        [0, 255, 255, 0]
    );
}

#[test]
fn resize_matches_brute_force_on_random_fixtures() {
    for (i, img) in common::gray_corpus(9, 12).iter().enumerate() {
        for (w, h) in [(7, 9), (64, 64), (img.width() * 2, img.height())] {
            // summation order differs, so exact .5 blends may round apart
            let got = resize(img, w, h).unwrap();
            let want = brute_resize(img, w, h);
            for (a, b) in got.data().iter().zip(&want) {
                assert!((*a as i32 - *b as i32).abs() <= 1, "fixture {i} to {w}x{h}");
            }
        }
    }
}

#[test]
fn enhancement_pipeline_outputs_network_sized_gray() {
    let img = fundus(200, FundusStyle::healthy(), 1);
    let out = enhance_pipeline(
        &img,
        &EnhanceConfig {
            output_size: 64,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(out.image.dims(), (64, 64, 1));
    assert_eq!(out.stages.len(), 4);
    let t = to_network_input(&[out.image]).unwrap();
    assert_eq!(t.shape(), [1, 64, 64, 3]);
    assert!(t.data().iter().all(|v| (0.0..=1.0).contains(v)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn clahe_luts_are_monotone(seed in 0u64..10_000, w in 16usize..80, h in 16usize..80, clip in 0.5f64..6.0) {
        let img = amdnet::synthetic::random_gray(w, h, seed);
        let params = ClaheParams { clip_limit: clip, grid: [4, 3] };
        let maps = tile_mappings(&img, &params).unwrap();
        for row in 0..3 {
            for col in 0..4 {
                prop_assert!(maps.lut(col, row).windows(2).all(|p| p[0] <= p[1]));
            }
        }
    }

    #[test]
    fn gamma_is_monotone(gamma in 0.1f64..5.0) {
        let lut = gamma_lut(gamma).unwrap();
        prop_assert!(lut.windows(2).all(|p| p[0] <= p[1]));
        prop_assert_eq!(lut[0], 0);
        prop_assert_eq!(lut[255], 255);
    }

    #[test]
    fn gamma_direction(seed in 0u64..10_000) {
        let img = amdnet::synthetic::textured_gray(24, 24, seed);
        let m = img.mean();
        prop_assert!(gamma_correct(&img, 0.5).unwrap().mean() < m);
        prop_assert!(gamma_correct(&img, 2.0).unwrap().mean() > m);
    }

    #[test]
    fn lab_round_trip_sampled(r: u8, g: u8, b: u8) {
        let back = lab_to_srgb(srgb_to_lab([r, g, b]));
        for (x, y) in back.iter().zip([r, g, b]) {
            prop_assert!((*x as i32 - y as i32).abs() <= 2);
        }
    }

    #[test]
    fn hsv_round_trip(r: u8, g: u8, b: u8) {
        let unit = [r, g, b].map(|v| v as f64 / 255.0);
        let back = hsv_unit_to_rgb(rgb_to_hsv_unit(unit));
        for (x, y) in back.iter().zip(unit) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
