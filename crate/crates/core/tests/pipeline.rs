use shellmmc::config::RunConfig;
use shellmmc::io::{parse_design, design_to_string};
use shellmmc::model::{EvalOptions, Model};
use shellmmc::optimizer::{optimize, LoopSettings, Status};

fn small_config() -> RunConfig {
    RunConfig::from_json(
        r#"{
        "mesh": {"kind": "plate", "width": 2.0, "height": 1.0, "nx": 16, "ny": 8},
        "patches": [{"faces": "all", "corners": [0, 16, 152, 136], "width": 2.0, "height": 1.0, "grid": [2, 1]}],
        "thickness": 0.05,
        "layers": 1,
        "volume_bound": 0.4,
        "bc": {
            "fixed": [{"vertices": {"box": {"min": [-1e-9, -1.0, -1.0], "max": [1e-9, 2.0, 1.0]}}}],
            "column_loads": [{"vertices": {"list": [84]}, "force": [0.0, -1.0, 0.0]}]
        },
        "optimizer": {"max_iterations": 6, "mma": {"move_limit": 0.05}}
    }"#,
    )
    .unwrap()
}

fn settings(cfg: &RunConfig, max_iterations: usize) -> LoopSettings {
    LoopSettings {
        tol: cfg.optimizer.tol,
        max_iterations,
        volume_bound: cfg.volume_bound,
        mma: cfg.optimizer.mma,
    }
}

#[test]
fn short_run_is_deterministic_and_respects_the_move_limit() {
    shellmmc::set_threads(1);
    let cfg = small_config();
    let model = Model::from_config(&cfg).unwrap();
    let d0 = model
        .initial_layout(&[cfg.patches[0].grid], cfg.initial_thickness_factor)
        .unwrap()
        .flatten();
    let run = || {
        let mut problem = model.problem(true);
        optimize(&mut problem, model.space(), &d0, &settings(&cfg, 6), &mut |_, _| Ok(())).unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.design, b.design);
    assert_eq!(a.history.len(), 7);
    for (x, y) in a.history.iter().zip(&b.history) {
        assert_eq!(x.compliance.to_bits(), y.compliance.to_bits());
        assert_eq!(x.volume_fraction.to_bits(), y.volume_fraction.to_bits());
    }
    assert_eq!(a.status, Status::MaxIterations);
    assert!(a.history[0].max_scaled_delta.is_nan());
    for row in &a.history[1..] {
        assert!(row.max_scaled_delta <= 0.05 + 1e-12);
    }
    // the final design is within bounds and reproduces its recorded response
    let (lo, hi) = model.space().bounds();
    assert!(a.design.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| v >= l && v <= h));
    let last = a.history.last().unwrap();
    let ev = model
        .evaluate_flat(&a.design, EvalOptions { gradient: false, dof_removal: true })
        .unwrap();
    assert_eq!(ev.compliance.to_bits(), last.compliance.to_bits());
}

#[test]
fn resuming_from_a_checkpoint_reproduces_the_design() {
    shellmmc::set_threads(1);
    let cfg = small_config();
    let model = Model::from_config(&cfg).unwrap();
    let d0 = model
        .initial_layout(&[cfg.patches[0].grid], cfg.initial_thickness_factor)
        .unwrap()
        .flatten();
    let mut saved = Vec::new();
    let mut problem = model.problem(true);
    optimize(&mut problem, model.space(), &d0, &settings(&cfg, 3), &mut |row, d| {
        if row.iteration == 3 {
            saved = parse_design(&design_to_string(d))?;
        }
        Ok(())
    })
    .unwrap();
    let expected = problem.last().unwrap().compliance;

    // a resumed run starts exactly where the checkpoint left off
    let mut resumed = model.problem(true);
    let r = optimize(&mut resumed, model.space(), &saved, &settings(&cfg, 0), &mut |_, _| Ok(())).unwrap();
    assert_eq!(r.design, saved);
    assert_eq!(r.history[0].compliance.to_bits(), expected.to_bits());
}

#[test]
fn full_and_band_gradients_agree_on_the_initial_layout() {
    let cfg = small_config();
    let model = Model::from_config(&cfg).unwrap();
    let d0 = model
        .initial_layout(&[cfg.patches[0].grid], cfg.initial_thickness_factor)
        .unwrap()
        .flatten();
    let full = model
        .evaluate_flat(&d0, EvalOptions { gradient: true, dof_removal: false })
        .unwrap();
    let band = model
        .evaluate_flat(&d0, EvalOptions { gradient: true, dof_removal: true })
        .unwrap();
    assert!((full.compliance - band.compliance).abs() <= 0.01 * full.compliance);
    assert_eq!(full.volume_fraction, band.volume_fraction);
    let (gf, gb) = (full.sensitivities.unwrap(), band.sensitivities.unwrap());
    assert_eq!(gf.volume, gb.volume);
    let norm = gf.compliance.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff = gf
        .compliance
        .iter()
        .zip(&gb.compliance)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    assert!(diff <= 0.05 * norm, "gradient difference {diff} vs norm {norm}");
}
