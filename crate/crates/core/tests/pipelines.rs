use proptest::prelude::*;
use touch_smooth::bench::measure1;
use touch_smooth::pipeline::{self, PipelineSpec, StageSpec};
use touch_smooth::synth::{self, DragSpec, NoiseSpec, Shape};
use touch_smooth::{FilterStage, Trace, TraceLabel, TracePoint};

fn bench_noise(trials: usize) -> NoiseSpec {
    NoiseSpec::new(synth::BENCH_SIGMA_PERP, synth::BENCH_SIGMA_ALONG, 11)
        .unwrap()
        .with_trials(trials)
}

/// Mean aligned Measure1 of `spec` and of the raw input over `trials` traces.
fn score(spec: &PipelineSpec, drag: &DragSpec, trials: usize) -> (f64, f64) {
    let truth = synth::generate_truth(drag).unwrap();
    let noise = bench_noise(trials);
    let mut pipe = spec.compose().unwrap();
    let (mut filtered, mut raw) = (0.0, 0.0);
    for trial in 0..trials as u64 {
        let noisy = synth::add_noise(&truth, &noise, trial).unwrap();
        let out = pipeline::run(&mut pipe, &noisy).unwrap();
        let (r, f) = out.aligned_with(&truth).unwrap();
        filtered += measure1(&r, &f).unwrap();
        raw += measure1(&truth, &noisy).unwrap();
    }
    (filtered / trials as f64, raw / trials as f64)
}

#[test]
fn every_preset_beats_the_raw_input_on_slow_lines() {
    let drag = DragSpec::linear(25.0, 0.0);
    for name in pipeline::preset_names() {
        let (f, raw) = score(&pipeline::preset(name).unwrap(), &drag, 20);
        assert!(f < raw, "{name}: {f} vs noisy {raw}");
    }
}

#[test]
fn combination_presets_beat_the_raw_input_across_velocities() {
    for v in [10.0, 100.0] {
        let drag = DragSpec::linear(v, 0.0);
        for name in ["b", "c", "d", "mma-sg"] {
            let (f, raw) = score(&pipeline::preset(name).unwrap(), &drag, 20);
            assert!(f < raw, "{name} at v={v}: {f} vs noisy {raw}");
        }
    }
}

#[test]
fn standalone_diffusion_beats_the_raw_input() {
    let spec = PipelineSpec::new("pde").stage(StageSpec::parse("pde", &[]).unwrap());
    let (f, raw) = score(&spec, &DragSpec::linear(25.0, 0.0), 20);
    assert!(f < raw, "{f} vs {raw}");
}

#[test]
fn modified_average_matches_the_reference_level_at_ten_mm_per_second() {
    let (f, _) = score(
        &pipeline::preset("mma5").unwrap(),
        &DragSpec::linear(10.0, 0.0),
        100,
    );
    assert!((0.35..=0.47).contains(&f), "{f}");
}

#[test]
fn spec_files_round_trip_through_presets() {
    for name in pipeline::preset_names() {
        let text = pipeline::preset_text(name).unwrap();
        let mut spec = PipelineSpec::parse(text).unwrap();
        spec.name = name.to_string();
        assert_eq!(spec, pipeline::preset(name).unwrap());
        assert_eq!(spec.compose().unwrap().group_delay(), 5, "{name}");
    }
}

#[test]
fn nonlinear_shapes_run_through_every_preset() {
    for shape in [Shape::Nonlinear, Shape::Zigzag] {
        let truth = synth::generate_truth(&DragSpec::new(shape, 50.0, 0.0)).unwrap();
        let noisy = synth::add_noise(&truth, &bench_noise(1), 0).unwrap();
        for name in pipeline::preset_names() {
            let mut p = pipeline::preset(name).unwrap().compose().unwrap();
            let out = pipeline::run(&mut p, &noisy).unwrap();
            assert_eq!(out.estimates.len(), noisy.len());
        }
    }
}

fn stream(filter: &mut dyn FilterStage, points: &[TracePoint]) -> Vec<Option<TracePoint>> {
    filter.reset();
    points
        .iter()
        .map(|p| filter.push(*p).unwrap().map(|o| o.point))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Outputs emitted before a frame arrives cannot depend on it, with or
    // without feedback wiring.
    #[test]
    fn pipelines_are_causal(
        coords in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 24..48),
        cut in 8usize..20,
        bump in (-20.0f64..20.0, -20.0f64..20.0),
        which in 0usize..8,
    ) {
        let name = pipeline::preset_names()[which % pipeline::preset_names().len()];
        let mut p = pipeline::preset(name).unwrap().compose().unwrap();
        let a: Vec<TracePoint> = coords
            .iter()
            .enumerate()
            .map(|(i, (x, y))| TracePoint::new(i as u64, *x, *y))
            .collect();
        let mut b = a.clone();
        for q in &mut b[cut..] {
            q.x += bump.0;
            q.y += bump.1;
        }
        let ea = stream(&mut p, &a);
        let eb = stream(&mut p, &b);
        prop_assert_eq!(&ea[..cut], &eb[..cut]);
    }

    // A pipeline of one stage is that stage.
    #[test]
    fn singleton_pipeline_equals_its_stage(
        coords in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 12..40),
        n in 1usize..4,
    ) {
        let trace = Trace::from_xy(coords, 0, 60.0, TraceLabel::Noisy).unwrap();
        let stage = StageSpec::parse("mmed", &[("n", &n.to_string())]).unwrap();
        let mut bare = stage.kind.build().unwrap();
        let mut piped = PipelineSpec::new("one").stage(stage).compose().unwrap();
        let x = pipeline::run(bare.as_mut(), &trace).unwrap();
        let y = pipeline::run(&mut piped, &trace).unwrap();
        prop_assert_eq!(x.estimates.points(), y.estimates.points());
    }
}
