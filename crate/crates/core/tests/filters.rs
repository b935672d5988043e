use geoseg::filters::{
    anisotropic_diffusion, anisotropic_diffusion_field, contrast_stretch, estimate_noise_sigma,
    nlm_denoise_field, nlm_filter, smooth, AdParams, NlmParams, SmoothMethod,
};
use geoseg::{BitDepth, Dims, Error, VoxelVolume};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

mod common;
use common::{ad_reference, mean_std, nlm_reference, noisy_square};

#[test]
fn nlm_matches_direct_reference_in_2d() {
    let vol = noisy_square(1);
    let p = NlmParams {
        three_d: false,
        ..NlmParams::default()
    };
    let h = p.similarity * estimate_noise_sigma(&vol);
    let fast = nlm_denoise_field(&vol, &p, h).unwrap();
    let slow = nlm_reference(&vol, 21, 7, h, false);
    for (a, b) in fast.iter().zip(&slow) {
        assert!((a - b).abs() <= 1e-6 * b.abs(), "{a} vs {b}");
    }
}

#[test]
fn nlm_matches_direct_reference_in_3d() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::<f64>::new(3000.0, 300.0).unwrap();
    let d = Dims::new(9, 8, 7);
    let data = (0..d.len()).map(|_| noise.sample(&mut rng).round() as u16).collect();
    let vol = VoxelVolume::new(d, 1.0, BitDepth::U16, data).unwrap();
    let p = NlmParams {
        search_window: 5,
        neighborhood: 2,
        similarity: 1.0,
        three_d: true,
    };
    let fast = nlm_denoise_field(&vol, &p, 250.0).unwrap();
    let slow = nlm_reference(&vol, 5, 3, 250.0, true);
    for (a, b) in fast.iter().zip(&slow) {
        assert!((a - b).abs() <= 1e-6 * b.abs(), "{a} vs {b}");
    }
}

#[test]
fn nlm_halves_white_noise() {
    let vol = noisy_square(2);
    let out = nlm_filter(
        &vol,
        &NlmParams {
            three_d: false,
            ..NlmParams::default()
        },
    )
    .unwrap();
    let (m0, s0) = mean_std(&vol.as_f64());
    let (m1, s1) = mean_std(&out.as_f64());
    assert!(s1 <= 0.5 * s0, "noise {s0} -> {s1}");
    assert!((m1 - m0).abs() <= 5.0, "mean {m0} -> {m1}");
    assert!((m1 - m0).abs() <= 0.01 * m0);
    assert_eq!(out.bit_depth(), BitDepth::U16);
}

#[test]
fn noise_estimate_is_close_for_white_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noise = Normal::<f64>::new(20000.0, 400.0).unwrap();
    let d = Dims::new(64, 64, 4);
    let data = (0..d.len()).map(|_| noise.sample(&mut rng).round() as u16).collect();
    let sigma = estimate_noise_sigma(&VoxelVolume::new(d, 1.0, BitDepth::U16, data).unwrap());
    assert!((sigma - 400.0).abs() < 20.0, "{sigma}");
}

#[test]
fn nlm_rejects_bad_parameters() {
    let vol = noisy_square(3);
    for p in [
        NlmParams { search_window: 20, ..NlmParams::default() },
        NlmParams { neighborhood: 0, ..NlmParams::default() },
        NlmParams { search_window: 5, neighborhood: 7, ..NlmParams::default() },
        NlmParams { similarity: 0.0, ..NlmParams::default() },
    ] {
        assert!(matches!(nlm_filter(&vol, &p), Err(Error::InvalidParameter(_))), "{p:?}");
    }
}

fn ramp() -> VoxelVolume {
    VoxelVolume::from_fn(Dims::new(12, 3, 2), 1.0, BitDepth::U16, |x, _, _| 10000 + 100 * x as u16).unwrap()
}

fn total_variation(u: &[f64], d: Dims) -> f64 {
    let mut tv = 0.0;
    for z in 0..d.nz {
        for y in 0..d.ny {
            for x in 1..d.nx {
                tv += (u[d.index(x, y, z)] - u[d.index(x - 1, y, z)]).abs();
            }
        }
    }
    tv
}

#[test]
fn diffusion_matches_scalar_reference_on_a_ramp() {
    let vol = ramp();
    let p = AdParams::default();
    let fast = anisotropic_diffusion_field(&vol, &p).unwrap();
    let slow = ad_reference(&vol, p.threshold, p.iterations);
    for (a, b) in fast.iter().zip(&slow) {
        assert!((a - b).abs() <= 1e-9 * b.abs(), "{a} vs {b}");
    }
    let mut prev = total_variation(&vol.as_f64(), vol.dims());
    for it in 1..=5 {
        let u = anisotropic_diffusion_field(&vol, &AdParams { iterations: it, ..p }).unwrap();
        let tv = total_variation(&u, vol.dims());
        assert!(tv < prev, "iteration {it}: {tv} !< {prev}");
        prev = tv;
    }
}

#[test]
fn diffusion_keeps_a_high_contrast_step() {
    let vol = VoxelVolume::from_fn(Dims::new(16, 4, 4), 1.0, BitDepth::U16, |x, _, _| if x < 8 { 10000 } else { 40000 }).unwrap();
    let out = anisotropic_diffusion(&vol, &AdParams { threshold: 22_968.0, iterations: 5, smoothing_sigma: 0.0 }).unwrap();
    assert_eq!(out.data(), vol.data());
}

#[test]
fn diffusion_conserves_intensity() {
    let vol = noisy_square(5);
    let p = AdParams { threshold: 400.0, iterations: 5, smoothing_sigma: 0.0 };
    let u = anisotropic_diffusion_field(&vol, &p).unwrap();
    let before: f64 = vol.as_f64().iter().sum();
    let after: f64 = u.iter().sum();
    assert!((before - after).abs() <= 1e-6 * before);
    let rounded = anisotropic_diffusion(&vol, &p).unwrap();
    // at most one intensity unit of rounding drift per iteration
    assert!((rounded.mean() - vol.mean()).abs() <= p.iterations as f64);
}

#[test]
fn diffusion_rejects_bad_parameters() {
    let vol = ramp();
    assert!(anisotropic_diffusion(&vol, &AdParams { threshold: 0.0, ..AdParams::default() }).is_err());
    assert!(anisotropic_diffusion(&vol, &AdParams { iterations: 0, ..AdParams::default() }).is_err());
    assert!(anisotropic_diffusion(&vol, &AdParams { smoothing_sigma: -1.0, ..AdParams::default() }).is_err());
}

#[test]
fn every_filter_leaves_a_constant_volume_alone() {
    let vol = VoxelVolume::from_fn(Dims::new(10, 9, 5), 1.0, BitDepth::U16, |_, _, _| 4321).unwrap();
    for three_d in [false, true] {
        let p = NlmParams { search_window: 5, neighborhood: 3, similarity: 0.71, three_d };
        assert_eq!(nlm_filter(&vol, &p).unwrap(), vol);
        assert!(nlm_denoise_field(&vol, &p, 10.0).unwrap().iter().all(|&v| v == 4321.0));
    }
    for smoothing_sigma in [0.0, 1.0] {
        let p = AdParams { smoothing_sigma, ..AdParams::default() };
        assert_eq!(anisotropic_diffusion(&vol, &p).unwrap(), vol);
    }
    for m in [SmoothMethod::Median, SmoothMethod::Mean, SmoothMethod::Gaussian] {
        assert_eq!(smooth(&vol, m, 2, None).unwrap(), vol);
    }
    assert!(matches!(contrast_stretch(&vol, 0.0, 100.0), Err(Error::DegenerateHistogram(_))));
}

#[test]
fn median_removes_salt() {
    let vol = VoxelVolume::from_fn(Dims::new(7, 7, 1), 1.0, BitDepth::U16, |x, y, _| if (x, y) == (3, 3) { 65535 } else { 0 }).unwrap();
    let out = smooth(&vol, SmoothMethod::Median, 1, None).unwrap();
    assert!(out.data().iter().all(|&v| v == 0));
}

#[test]
fn mean_filter_spreads_an_impulse_as_a_box() {
    let vol = VoxelVolume::from_fn(Dims::new(9, 9, 1), 1.0, BitDepth::U16, |x, y, _| if (x, y) == (4, 4) { 9000 } else { 0 }).unwrap();
    let out = smooth(&vol, SmoothMethod::Mean, 1, None).unwrap();
    for y in 0..9 {
        for x in 0..9 {
            let inside = (3..=5).contains(&x) && (3..=5).contains(&y);
            assert_eq!(out.get(x, y, 0), if inside { 1000 } else { 0 }, "({x}, {y})");
        }
    }
    assert!(smooth(&vol, SmoothMethod::Mean, 0, None).is_err());
}

#[test]
fn contrast_maps_percentiles_linearly() {
    let vals: Vec<u16> = (50..=100).collect();
    let vol = VoxelVolume::new(Dims::new(vals.len(), 1, 1), 1.0, BitDepth::U8, vals.clone()).unwrap();
    let out = contrast_stretch(&vol, 0.0, 100.0).unwrap();
    for (&v, &o) in vals.iter().zip(out.data()) {
        let expected = ((v as f64 - 50.0) / 50.0 * 255.0).round() as u16;
        assert_eq!(o, expected);
    }

    let full = VoxelVolume::new(Dims::new(256, 1, 1), 1.0, BitDepth::U8, (0..=255).collect()).unwrap();
    assert_eq!(contrast_stretch(&full, 0.0, 100.0).unwrap(), full);
    assert!(contrast_stretch(&full, 60.0, 40.0).is_err());
}

fn small_volume() -> impl Strategy<Value = VoxelVolume> {
    (2usize..7, 2usize..7, 1usize..4).prop_flat_map(|(nx, ny, nz)| {
        prop::collection::vec(0u16..50000, nx * ny * nz)
            .prop_map(move |data| VoxelVolume::new(Dims::new(nx, ny, nz), 1.0, BitDepth::U16, data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn diffusion_creates_no_new_extrema(vol in small_volume(), threshold in 1.0f64..60000.0, iterations in 1usize..6) {
        let out = anisotropic_diffusion(&vol, &AdParams { threshold, iterations, smoothing_sigma: 0.0 }).unwrap();
        let (lo, hi) = (vol.data().iter().min().unwrap(), vol.data().iter().max().unwrap());
        prop_assert!(out.data().iter().all(|v| v >= lo && v <= hi));
    }

    #[test]
    fn nlm_output_stays_in_input_range(vol in small_volume(), h in 1.0f64..5000.0) {
        let p = NlmParams { search_window: 3, neighborhood: 1, similarity: 1.0, three_d: true };
        let out = nlm_denoise_field(&vol, &p, h).unwrap();
        let lo = *vol.data().iter().min().unwrap() as f64;
        let hi = *vol.data().iter().max().unwrap() as f64;
        prop_assert!(out.iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
    }

    #[test]
    fn median_of_binary_is_binary(bits in prop::collection::vec(prop::bool::ANY, 36), r in 1usize..3) {
        let data = bits.iter().map(|&b| if b { 1000 } else { 0 }).collect();
        let vol = VoxelVolume::new(Dims::new(6, 6, 1), 1.0, BitDepth::U16, data).unwrap();
        let out = smooth(&vol, SmoothMethod::Median, r, None).unwrap();
        prop_assert!(out.data().iter().all(|&v| v == 0 || v == 1000));
    }

    #[test]
    fn contrast_is_monotone(vol in small_volume(), lo in 0.0f64..40.0, span in 10.0f64..60.0) {
        if let Ok(out) = contrast_stretch(&vol, lo, lo + span) {
            let mut pairs: Vec<(u16, u16)> = vol.data().iter().copied().zip(out.data().iter().copied()).collect();
            pairs.sort();
            prop_assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
        }
    }
}
