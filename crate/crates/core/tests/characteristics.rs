use burgers_fbsde::diagnostics::tangent_consistency;
use burgers_fbsde::picard::McConfig;
use burgers_fbsde::presets::Preset;
use burgers_fbsde::sde::{integrate_forward, integrate_tangent, sample_brownian, NoiseMode, NoiseSpec};
use burgers_fbsde::{GridSpec, SpaceTime};

fn frozen(dim: usize, points: usize, preset: &Preset, steps: usize) -> SpaceTime {
    let g = GridSpec::new(dim, points).unwrap();
    preset
        .sample_in_time(g, SpaceTime::uniform_times(0.0, 1.0, steps).unwrap())
        .unwrap()
}

#[test]
fn mean_square_displacement_without_drift() {
    let nu = 0.15;
    for dim in [1, 2] {
        let y = frozen(dim, 8, &Preset::Zero, 4);
        let times = SpaceTime::uniform_times(0.25, 1.0, 24).unwrap();
        let paths = 4000;
        let noise = sample_brownian(&times, 0..paths, dim, 1, NoiseSpec::new(11, NoiseMode::Common)).unwrap();
        let start = vec![1.0; dim];
        let chars = integrate_forward(&y, 0.25, &start, &noise, nu).unwrap();
        for step in [6, 12, 24] {
            let sq: Vec<f64> = (0..paths)
                .map(|m| chars.displacement(m, 0, step).iter().map(|d| d * d).sum())
                .collect();
            let mean = sq.iter().sum::<f64>() / paths as f64;
            let var = sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (paths - 1) as f64;
            let se = (var / paths as f64).sqrt();
            let expected = 2.0 * nu * dim as f64 * (times[step] - 0.25);
            assert!((mean - expected).abs() < 5.0 * se, "dim {dim} step {step}: {mean} vs {expected} (se {se})");
        }
    }
}

#[test]
fn tangent_flow_matches_finite_differences() {
    let y = frozen(1, 32, &Preset::sine(0.5, 1), 16);
    let times = SpaceTime::uniform_times(0.0, 1.0, 128).unwrap();
    let r = tangent_consistency(&y, 0.1, 0, &[0.3, 1.7, 4.1], 1e-5, &times, &McConfig::new(8, 5), 1e-2).unwrap();
    assert!(r.pass, "{}", r.statistic);
}

#[test]
fn tangent_flow_in_two_dimensions() {
    let y = frozen(2, 16, &Preset::sine(0.4, 1), 8);
    let times = SpaceTime::uniform_times(0.0, 1.0, 64).unwrap();
    let r = tangent_consistency(&y, 0.1, 0, &[0.3, 2.0, 4.0, 5.5], 1e-5, &times, &McConfig::new(4, 5), 1e-2).unwrap();
    assert!(r.pass, "{}", r.statistic);
}

#[test]
fn tangent_of_a_translation_is_the_identity() {
    let y = frozen(1, 16, &Preset::Constant { value: 0.4 }, 8);
    let times = SpaceTime::uniform_times(0.0, 1.0, 16).unwrap();
    let noise = sample_brownian(&times, 0..3, 1, 1, NoiseSpec::new(2, NoiseMode::Common)).unwrap();
    let chars = integrate_forward(&y, 0.0, &[0.5, 2.5], &noise, 0.1).unwrap();
    let tangent = integrate_tangent(&y, &chars).unwrap();
    assert!(tangent.all().iter().all(|&j| j == 1.0));
}
