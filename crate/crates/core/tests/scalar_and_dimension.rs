use burgers_fbsde::oracle::{solve_backward_burgers, OracleConfig};
use burgers_fbsde::picard::{picard_solve, McConfig, PicardConfig};
use burgers_fbsde::presets::Preset;
use burgers_fbsde::problem::BurgersProblem;
use burgers_fbsde::{GridSpec, Problem};

#[test]
fn single_precision_tracks_double_precision() {
    let g = GridSpec::new(1, 16).unwrap();
    let mc = McConfig {
        restart_stride: 4,
        ..McConfig::new(300, 9)
    };
    let p64 = Problem::from_presets(g, &Preset::sine(0.5, 1), &Preset::Zero, 0.1, 0.5, 16).unwrap();
    let p32 = BurgersProblem::<f32>::from_presets(g, &Preset::sine(0.5, 1), &Preset::Zero, 0.1, 0.5, 16).unwrap();
    let s64 = picard_solve(&p64, &mc, &PicardConfig::default()).unwrap();
    let s32 = picard_solve(&p32, &mc, &PicardConfig::default()).unwrap();
    assert_eq!(s32.state.iterations, s64.state.iterations);
    for (a, b) in s32.field.slices().iter().zip(s64.field.slices()) {
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((*x as f64 - y).abs() < 1e-4, "{x} {y}");
        }
    }
    let c32 = BurgersProblem::<f32>::from_presets(g, &Preset::Constant { value: 0.25 }, &Preset::Zero, 0.1, 0.5, 16).unwrap();
    let s = picard_solve(&c32, &mc, &PicardConfig::default()).unwrap();
    assert!(s.field.slices().iter().all(|f| f.values().iter().all(|&v| v == 0.25)));
}

/// With `h_a(θ) = 0.4 sin θ_a` the components decouple into 1-D problems.
#[test]
fn two_dimensional_problem_decouples() {
    let g1 = GridSpec::new(1, 16).unwrap();
    let g2 = GridSpec::new(2, 16).unwrap();
    let h = Preset::sine(0.4, 1);
    let p1 = Problem::from_presets(g1, &h, &Preset::Zero, 0.1, 0.4, 16).unwrap();
    let p2 = Problem::from_presets(g2, &h, &Preset::Zero, 0.1, 0.4, 16).unwrap();
    let y1 = solve_backward_burgers(&p1, &OracleConfig::default()).unwrap();
    let y2 = solve_backward_burgers(&p2, &OracleConfig::default()).unwrap();
    let last = y1.times().len() - 1;
    for (s1, s2) in [(y1.initial(), y2.initial()), (y1.slice(last / 2), y2.slice(last / 2))] {
        for node in 0..g2.node_count() {
            let mut idx = [0usize; 2];
            g2.multi_index(node, &mut idx);
            let v = s2.node(node);
            assert!((v[0] - s1.values()[idx[0]]).abs() < 1e-12);
            assert!((v[1] - s1.values()[idx[1]]).abs() < 1e-12);
        }
    }

    let mc = McConfig {
        restart_stride: 4,
        ..McConfig::new(400, 2)
    };
    let s = picard_solve(&p2, &mc, &PicardConfig::default()).unwrap();
    assert!(s.state.converged);
    let oracle = burgers_fbsde::oracle::solve_backward_burgers_on(&p2, &OracleConfig::default(), p2.times()).unwrap();
    let err = s.field.initial().zip_with(oracle.initial(), |a, b| a - b).unwrap();
    let se = s.state.standard_error.initial().sup_norm();
    assert!(err.sup_norm() < 6.0 * se + 1e-3, "{} vs se {se}", err.sup_norm());
}
