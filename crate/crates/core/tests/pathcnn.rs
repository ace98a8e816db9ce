mod common;

use std::collections::HashMap;

use common::Recording;
use pathcnn_core::classifier::{dilate_polylines, ConstantClassifier, OracleClassifier, PatchClass};
use pathcnn_core::dataset::{synth_scene, SceneSpec, SyntheticScene, TrapType};
use pathcnn_core::eval::mean_distance;
use pathcnn_core::minpath::{dijkstra_until, EdgeWeights, GridGraph, InitialWeights, Stop};
use pathcnn_core::pathcnn::{
    run_fmap_only, run_pathcnn, run_plain, MeanAlongPath, ProgressiveAdapter, Rectified, SearchParams,
};
use pathcnn_core::pathgeom::Polyline;
use pathcnn_core::raster::{BinaryMap, PixelCoord, RasterImage, SubPixelPoint};

fn scene(trap: TrapType, seed: u64) -> SyntheticScene {
    synth_scene(&SceneSpec {
        trap_type: trap,
        seed,
        ..SceneSpec::default()
    })
    .unwrap()
}

fn oracle(scene: &SyntheticScene, params: &SearchParams) -> Rectified<OracleClassifier> {
    let (w, h) = (scene.image.width(), scene.image.height());
    Rectified {
        classifier: OracleClassifier::new(w, h, &[scene.gt_centerline.clone()], params.geom.patch_width / 2.0).unwrap(),
        geom: params.geom,
    }
}

#[test]
fn constant_foreground_equals_plain_on_scenes() {
    let params = SearchParams::default();
    for (trap, seed) in [(TrapType::None, 1), (TrapType::Type1, 2), (TrapType::Type2, 3)] {
        let s = scene(trap, seed);
        let tub = s.tubularity().unwrap();
        let fg = Rectified {
            classifier: ConstantClassifier(PatchClass::Foreground),
            geom: params.geom,
        };
        let a = run_pathcnn(s.start, s.end, &s.image, &tub, fg, &params).unwrap();
        let b = run_plain(s.start, s.end, &tub, &params).unwrap();
        assert_eq!(a.vertices, b.vertices);
        assert_eq!(a.distance, b.distance);
    }
}

#[test]
fn oracle_avoids_the_decoy() {
    let params = SearchParams::default();
    let s = scene(TrapType::Type2, 11);
    let tub = s.tubularity().unwrap();
    let plain = run_plain(s.start, s.end, &tub, &params).unwrap();
    let guided = run_pathcnn(s.start, s.end, &s.image, &tub, oracle(&s, &params), &params).unwrap();
    let gt = [s.gt_centerline.clone()];
    assert!(mean_distance(&[plain.path], &gt).unwrap().mean_distance > 10.0);
    assert!(mean_distance(&[guided.path], &gt).unwrap().mean_distance < 2.0);
    assert!(guided.stats.classifier_calls <= guided.stats.settled);
}

#[test]
fn end_distance_grows_with_penalty() {
    let s = scene(TrapType::Type2, 4);
    let tub = s.tubularity().unwrap();
    for classifier in ["oracle", "mean"] {
        let mut last = 0.0;
        for eta in [10.0, 100.0, 1000.0] {
            let params = SearchParams {
                penalty: Some(eta),
                ..SearchParams::default()
            };
            let d = match classifier {
                "oracle" => run_pathcnn(s.start, s.end, &s.image, &tub, oracle(&s, &params), &params),
                _ => run_pathcnn(
                    s.start,
                    s.end,
                    &s.image,
                    &tub,
                    MeanAlongPath { map: &tub, threshold: 0.3 },
                    &params,
                ),
            }
            .unwrap()
            .distance;
            assert!(d >= last, "{classifier}: eta {eta} gave {d} < {last}");
            last = d;
        }
    }
}

#[test]
fn each_vertex_gets_one_class() {
    let s = scene(TrapType::Type1, 5);
    let tub = s.tubularity().unwrap();
    let params = SearchParams::default();
    let graph = GridGraph::for_image(&tub, params.connectivity);
    let weights = InitialWeights::new(&tub, params.epsilon, params.lambda).unwrap();
    let inner = ProgressiveAdapter::new(MeanAlongPath { map: &tub, threshold: 0.3 }, 30.0, 500.0, 256, 256).unwrap();
    let mut adapter = Recording::new(inner);
    let state = dijkstra_until(&graph, s.start, Stop::AtEnd(s.end), &weights, &mut adapter, &s.image).unwrap();
    let mut seen: HashMap<PixelCoord, bool> = HashMap::new();
    for &(u, v, w) in &adapter.calls {
        let penalized = w > weights.weight(u, v);
        if penalized {
            assert_eq!(w, weights.weight(u, v) + 500.0);
        }
        assert_eq!(*seen.entry(u).or_insert(penalized), penalized, "vertex {u} changed class");
    }
    let stats = adapter.inner.stats();
    assert!(stats.classifier_calls <= state.settled_count());
    assert_eq!(stats.classifier_calls, stats.fg_count + stats.bg_count + stats.start_zone_calls);
}

#[test]
fn extracted_paths_are_simple() {
    let params = SearchParams::default();
    for seed in 0..3 {
        let s = scene(TrapType::Type2, 20 + seed);
        let tub = s.tubularity().unwrap();
        let run = run_pathcnn(
            s.start,
            s.end,
            &s.image,
            &tub,
            MeanAlongPath { map: &tub, threshold: 0.3 },
            &params,
        )
        .unwrap();
        let mut v = run.vertices.clone();
        v.sort();
        v.dedup();
        assert_eq!(v.len(), run.vertices.len());
    }
}

#[test]
fn fmap_stays_near_a_clean_ridge() {
    let params = SearchParams::default();
    let s = scene(TrapType::None, 6);
    let tub = s.tubularity().unwrap();
    let run = run_pathcnn(
        s.start,
        s.end,
        &s.image,
        &tub,
        MeanAlongPath { map: &tub, threshold: 0.3 },
        &params,
    )
    .unwrap();
    let near = dilate_polylines(256, 256, &[s.gt_centerline.clone()], params.geom.patch_width);
    let fg = run.fmap.count();
    let inside = run.fmap.data().iter().zip(near.data()).filter(|(f, n)| **f && **n).count();
    assert!(fg > 0);
    assert!(inside as f64 >= 0.95 * fg as f64, "{inside} of {fg} near the ridge");
}

#[test]
fn disconnected_ridges_both_reached() {
    let (w, h) = (160, 120);
    let a = Polyline::from_xy(&[(20.0, 30.0), (140.0, 30.0)]).unwrap();
    let b = Polyline::from_xy(&[(20.0, 90.0), (140.0, 90.0)]).unwrap();
    let img = RasterImage::from_fn(w, h, |x, y| {
        let p = SubPixelPoint::new(x as f64, y as f64);
        let d = common::polyline_distance(p, a.points()).min(common::polyline_distance(p, b.points()));
        0.1 + 0.5 * common::bar_profile(d, 7.0)
    });
    let tub = pathcnn_core::tubularity::vesselness(&img, &Default::default()).unwrap();
    let params = SearchParams::default();
    let lines = [a, b];
    let classifier = Rectified {
        classifier: OracleClassifier::new(w, h, &lines, 4.0).unwrap(),
        geom: params.geom,
    };
    let run = run_fmap_only(PixelCoord::new(20, 30), &img, &tub, classifier, &params, None).unwrap();
    let on = |line: &Polyline| {
        let band = dilate_polylines(w, h, std::slice::from_ref(line), 2.0);
        run.fmap.data().iter().zip(band.data()).filter(|(f, b)| **f && **b).count() as f64 / band.count() as f64
    };
    assert!(on(&lines[0]) > 0.9, "first ridge coverage {}", on(&lines[0]));
    assert!(on(&lines[1]) > 0.9, "second ridge coverage {}", on(&lines[1]));
}

fn differing_fraction(a: &BinaryMap, b: &BinaryMap) -> f64 {
    let differ = a.data().iter().zip(b.data()).filter(|(p, q)| p != q).count();
    let union = a.data().iter().zip(b.data()).filter(|(p, q)| **p || **q).count();
    differ as f64 / union as f64
}

#[test]
fn fmap_insensitive_to_start_point() {
    let params = SearchParams::default();
    for seed in [7, 8] {
        let s = scene(TrapType::None, seed);
        let tub = s.tubularity().unwrap();
        let gt = &s.gt_centerline;
        let mid = gt.point_at(0.5 * gt.length()).round_to_pixel(256, 256).unwrap();
        let a = run_fmap_only(s.start, &s.image, &tub, oracle(&s, &params), &params, None).unwrap();
        let b = run_fmap_only(mid, &s.image, &tub, oracle(&s, &params), &params, None).unwrap();
        let f = differing_fraction(&a.fmap, &b.fmap);
        assert!(f < 0.05, "seed {seed}: {f}");
    }
}
