use courtcal::calibrate::{
    dlt_homography, extend_to_full_court, CandidateDetection, Correspondence, DetectionJson, Pipeline,
};
use courtcal::config::PipelineConfig;
use courtcal::court_model::{near_half, standard_template, SegmentId};
use courtcal::eval::{generate_scene, GenConfig, GroundTruth, SyntheticScene};
use courtcal::preprocess::{Adapters, FrameInput};
use courtcal::{Homography, Point2, Template};
use proptest::prelude::*;

fn template() -> Template {
    standard_template(Default::default()).unwrap()
}

fn mean_near_error(a: &Homography, b: &Homography) -> f64 {
    let near = near_half(&template());
    let errs: Vec<f64> = near
        .keypoints
        .iter()
        .map(|k| {
            let (p, q) = (a.project(&k.point).unwrap(), b.project(&k.point).unwrap());
            (p.x - q.x).hypot(p.y - q.y)
        })
        .collect();
    errs.iter().sum::<f64>() / errs.len() as f64
}

fn input_of(scene: &SyntheticScene) -> FrameInput {
    let mut input = FrameInput::new(scene.frame.clone());
    input.net_bbox = scene.net_bbox;
    input
}

fn detect(cfg: PipelineConfig, input: &FrameInput) -> Option<CandidateDetection> {
    Pipeline::new(cfg, Adapters::default())
        .unwrap()
        .detect_frame(input, 0)
        .unwrap()
}

fn gen() -> GenConfig {
    GenConfig {
        width: 640,
        height: 360,
        ..GenConfig::default()
    }
}

#[test]
fn synthetic_scenes_calibrate_within_three_pixels() {
    for seed in 0..4 {
        let scene = generate_scene(seed, &gen()).unwrap();
        let d = detect(PipelineConfig::default(), &input_of(&scene)).expect("detection");
        let err = mean_near_error(&d.homography, &scene.h_gt);
        assert!(err <= 3.0, "seed {seed}: {err:.2} px");
    }
}

#[test]
fn one_horizontal_line_is_not_enough() {
    let scene = generate_scene(1, &gen()).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.lines.max_horizontal = 1;
    let p = Pipeline::new(cfg, Adapters::default()).unwrap();
    let trace = p.trace_frame(&input_of(&scene), 0).unwrap();
    assert!(trace.detection.is_none());
    assert!(trace.diagnostic.unwrap().contains("insufficient lines"));
}

#[test]
fn far_service_line_follows_ground_truth() {
    let scene = generate_scene(2, &gen()).unwrap();
    let t = template();
    let d = detect(PipelineConfig::default(), &input_of(&scene)).unwrap();
    let seg = extend_to_full_court(&d, &t)
        .into_iter()
        .find(|s| s.id == SegmentId::FarService)
        .unwrap();
    let (a, b) = seg.endpoints.unwrap();
    let far = t.segment(SegmentId::FarService);
    let (ga, gb) = (
        scene.h_gt.project(&far.p0).unwrap(),
        scene.h_gt.project(&far.p1).unwrap(),
    );
    assert!((a.x - ga.x).hypot(a.y - ga.y) <= 3.0);
    assert!((b.x - gb.x).hypot(b.y - gb.y) <= 3.0);
}

#[test]
fn segments_past_the_horizon_are_clipped() {
    let t = template();
    // w = 1 + y/10 turns negative before the far baseline at y = -11.885
    let h = Homography::new([[40.0, 0.0, 640.0], [0.0, 40.0, 360.0], [0.0, 0.1, 1.0]]).unwrap();
    let det = CandidateDetection {
        homography: h,
        score: 0,
        frame_id: "f".into(),
        crop_origin_applied: false,
        candidate_index: 0,
        provenance: None,
    };
    let segs = extend_to_full_court(&det, &t);
    let get = |id| segs.iter().find(|s| s.id == id).unwrap().endpoints;
    assert!(get(SegmentId::FarBaseline).is_none());
    let near = get(SegmentId::NearBaseline).unwrap();
    let nb = t.segment(SegmentId::NearBaseline);
    assert_eq!(near, (h.project(&nb.p0).unwrap(), h.project(&nb.p1).unwrap()));
    // sidelines cross the horizon and get cut at the clip plane
    let (a, b) = get(SegmentId::DoublesLeft).unwrap();
    assert!(a.is_finite() && b.is_finite());
}

#[test]
fn mirror_template_under_affine_map() {
    let t = template();
    let h = Homography::new([[20.0, 0.0, 300.0], [0.0, 20.0, 400.0], [0.0, 0.0, 1.0]]).unwrap();
    let det = CandidateDetection {
        homography: h,
        score: 0,
        frame_id: "f".into(),
        crop_origin_applied: false,
        candidate_index: 0,
        provenance: None,
    };
    let segs = extend_to_full_court(&det, &t);
    let get = |id| segs.iter().find(|s| s.id == id).unwrap().endpoints.unwrap();
    let net_y = get(SegmentId::Net).0.y;
    let (near, far) = (get(SegmentId::NearBaseline), get(SegmentId::FarBaseline));
    assert!((near.0.y - net_y + (far.0.y - net_y)).abs() < 1e-9);
    assert!((near.0.x - far.0.x).abs() < 1e-9);
}

/// Near-side crop: the reported homography must be in source-frame pixels
/// and agree with an uncropped run on a scene that has no far side.
#[test]
fn crop_origin_is_composed_into_source_homography() {
    let g = GenConfig {
        net_band: true,
        ..gen()
    };
    for seed in [3, 8] {
        let scene = generate_scene(seed, &g).unwrap();
        assert!(scene.net_bbox.is_some());
        let p = Pipeline::new(PipelineConfig::default(), Adapters::default()).unwrap();
        let trace = p.trace_frame(&input_of(&scene), 0).unwrap();
        let d = trace.detection.clone().unwrap();
        assert!(d.crop_origin_applied);
        let oy = trace.working.crop_origin.1 as f64;
        assert!(oy > 0.0);
        let composed = trace.working_homography.unwrap().translated(0.0, oy);
        assert!(composed.frobenius_distance(&d.homography) < 1e-12);
        assert!(mean_near_error(&d.homography, &scene.h_gt) <= 3.0);

        let near_only = generate_scene(
            seed,
            &GenConfig {
                far_side: false,
                ..g.clone()
            },
        )
        .unwrap();
        let cropped = detect(PipelineConfig::default(), &input_of(&near_only)).unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.preprocess.net_crop = false;
        let full = detect(cfg, &input_of(&near_only)).unwrap();
        assert!(cropped.crop_origin_applied && !full.crop_origin_applied);
        assert!(mean_near_error(&cropped.homography, &full.homography) <= 1.0);
        assert!(mean_near_error(&cropped.homography, &near_only.h_gt) <= 3.0);
    }
}

#[test]
fn detection_is_identical_across_thread_counts() {
    let scene = generate_scene(5, &gen()).unwrap();
    let input = input_of(&scene);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| detect(PipelineConfig::default(), &input))
    };
    let one = run(1);
    assert!(one.is_some());
    assert_eq!(one, run(4));
    assert_eq!(one, run(1));
}

#[test]
fn ground_truth_keypoints_reproduce_homography() {
    let t = template();
    for seed in 0..5 {
        let scene = generate_scene(seed, &gen()).unwrap();
        let gt = GroundTruth::from_json(scene.frame.frame_id.clone(), &scene.ground_truth(&t).to_json()).unwrap();
        let (model, image): (Vec<_>, Vec<_>) = gt
            .keypoints
            .iter()
            .map(|(name, p)| (t.keypoint(name).unwrap().point, *p))
            .unzip();
        let h = dlt_homography(&Correspondence::new(model, image)).unwrap();
        assert!(h.frobenius_distance(&scene.h_gt) < 1e-6);
    }
}

#[test]
fn detection_json_lists_every_keypoint() {
    let t = template();
    let scene = generate_scene(6, &gen()).unwrap();
    let d = detect(PipelineConfig::default(), &input_of(&scene)).unwrap();
    let json = DetectionJson::new(&d, &t);
    assert_eq!(json.keypoints.len(), 19);
    assert_eq!(json.homography, d.homography.to_row_major());
    let back: DetectionJson = serde_json::from_str(&serde_json::to_string(&json).unwrap()).unwrap();
    assert_eq!(back, json);
    let p = json
        .keypoints
        .iter()
        .find(|k| k.name == near_half(&t).keypoints[0].name)
        .unwrap();
    let q = d.homography.project(&near_half(&t).keypoints[0].point).unwrap();
    assert_eq!((p.x, p.y), (Some(q.x), Some(q.y)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn config_json_round_trip(
        seed in any::<u64>(), n in 1usize..5000, tol in any::<u8>(), thr in any::<u8>(),
        frames in 1usize..50, two_sided in any::<bool>(), net in any::<bool>(),
        stroke in 1u32..7, vote in prop::option::of(1u32..500),
    ) {
        let mut cfg = PipelineConfig { seed, ..Default::default() };
        cfg.filter.n_samples = n;
        cfg.filter.color_tolerance = tol;
        cfg.filter.baseline_threshold = thr;
        cfg.video.n_frames = frames;
        cfg.eval.two_sided = two_sided;
        cfg.calibrate.include_net_line = net;
        cfg.scoring.stroke_width = stroke;
        cfg.lines.vote_threshold = vote;
        let back = PipelineConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn projected_points_are_finite_or_absent(x in -20.0f64..20.0, y in -20.0f64..20.0, seed in 0u64..20) {
        let scene = generate_scene(seed, &GenConfig { width: 320, height: 180, ..GenConfig::default() }).unwrap();
        if let Some(p) = scene.h_gt.project(&Point2::new(x, y)) {
            prop_assert!(p.is_finite());
        }
    }
}
