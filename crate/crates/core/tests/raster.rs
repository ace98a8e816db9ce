use pathcnn_core::raster::{
    decode_image, load_image, sample_bilinear, save_image, save_pnm16, to_grayscale, RasterImage, SubPixelPoint,
};
use proptest::prelude::*;

fn image(values: &[f64], w: usize) -> RasterImage {
    RasterImage::from_vec(w, values.len() / w, 1, values.to_vec()).unwrap()
}

#[test]
fn bilinear_hits_pixel_centers_and_midpoints() {
    let img = image(&[0.0, 1.0, 0.5, 0.25], 2);
    assert_eq!(sample_bilinear(&img, SubPixelPoint::new(1.0, 0.0)), 1.0);
    assert_eq!(sample_bilinear(&img, SubPixelPoint::new(0.0, 1.0)), 0.5);
    assert!((sample_bilinear(&img, SubPixelPoint::new(0.5, 0.5)) - 0.4375).abs() < 1e-15);
    // outside points are clamped to the border
    assert_eq!(sample_bilinear(&img, SubPixelPoint::new(-3.0, 0.0)), 0.0);
    assert_eq!(sample_bilinear(&img, SubPixelPoint::new(7.0, 9.0)), 0.25);
}

#[test]
fn grayscale_uses_luminance() {
    let rgb = RasterImage::from_vec(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
    assert!((to_grayscale(&rgb).get(0, 0) - 0.299).abs() < 1e-12);
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let img = RasterImage::from_fn(13, 7, |x, y| ((x * 7 + y * 3) % 11) as f64 / 10.0);
    for name in ["a.png", "a.pgm"] {
        let p = dir.path().join(name);
        save_image(&img, &p).unwrap();
        let back = load_image(&p).unwrap();
        assert_eq!((back.width(), back.height()), (13, 7));
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12, "{name}");
        }
    }
    let p = dir.path().join("b.pgm");
    save_pnm16(&img, &p).unwrap();
    let back = load_image(&p).unwrap();
    for (a, b) in img.data().iter().zip(back.data()) {
        assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
    }
}

#[test]
fn garbage_is_rejected() {
    assert!(decode_image(b"hello world").is_err());
    assert!(load_image("/nonexistent/image.png").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bilinear_is_continuous(
        values in prop::collection::vec(0.0f64..1.0, 16),
        x in -1.0f64..4.0,
        y in -1.0f64..4.0,
        dx in -0.01f64..0.01,
        dy in -0.01f64..0.01,
    ) {
        let img = image(&values, 4);
        let a = sample_bilinear(&img, SubPixelPoint::new(x, y));
        let b = sample_bilinear(&img, SubPixelPoint::new(x + dx, y + dy));
        // neighbouring pixels differ by at most 1, so the slope is at most 1 per axis
        prop_assert!((a - b).abs() <= dx.abs() + dy.abs() + 1e-12);
    }

    #[test]
    fn bilinear_stays_in_range(values in prop::collection::vec(0.0f64..1.0, 16), x in -2.0f64..5.0, y in -2.0f64..5.0) {
        let img = image(&values, 4);
        let v = sample_bilinear(&img, SubPixelPoint::new(x, y));
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
    }

    #[test]
    fn four_quarter_turns_are_identity(values in prop::collection::vec(0.0f64..1.0, 12)) {
        let img = image(&values, 4);
        let back = img.rotate90().rotate90().rotate90().rotate90();
        prop_assert_eq!(back, img);
    }
}
