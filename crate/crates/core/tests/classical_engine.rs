use num_complex::Complex64;
use optopiston::classical::{
    classical_figures, classical_g2, histogram_free_energy, free_energy_std_error, run_ensemble, step,
    ClassicalConfig, ClassicalEnsemble, DEFAULT_BIN_STEP,
};
use optopiston::EngineConfig;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::SQRT_2;

fn base() -> ClassicalConfig {
    ClassicalConfig {
        seed: 11,
        ..ClassicalConfig::from_engine(&EngineConfig::single_cavity())
    }
}

/// One Euler step of the complex Langevin equations, `α = (X + iY)/√2`.
fn complex_step(s: &[f64; 6], c: &ClassicalConfig, noise: &[f64; 6]) -> [f64; 6] {
    let amp = |x: f64, y: f64| Complex64::new(x, y) / SQRT_2;
    let (alpha, beta, gamma) = (amp(s[0], s[1]), amp(s[2], s[3]), amp(s[4], s[5]));
    let i = Complex64::i();
    let field = alpha + beta;
    let position = gamma.conj() + gamma;
    let kc = c.kappa_c + c.kappa_l;
    let d_alpha = -i * c.delta * alpha + i * c.g * field * position - 0.5 * c.kappa_a * alpha;
    let d_beta = i * c.g * field * position - 0.5 * c.kappa_b * beta;
    let d_gamma = -i * c.omega_c * gamma + i * c.g * field.norm_sqr() - 0.5 * kc * gamma;
    let kick = |k: usize| amp(noise[k], noise[k + 1]);
    let next = [
        alpha + d_alpha * c.dt + kick(0),
        beta + d_beta * c.dt + kick(2),
        gamma + d_gamma * c.dt + kick(4),
    ];
    let mut out = [0.0; 6];
    for (k, z) in next.iter().enumerate() {
        out[2 * k] = SQRT_2 * z.re;
        out[2 * k + 1] = SQRT_2 * z.im;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn step_matches_complex_amplitude_form(
        state in prop::array::uniform6(-2.0f64..2.0),
        noise in prop::array::uniform6(-0.05f64..0.05),
        g in 0.0f64..0.3,
        delta in -2.0f64..2.0,
        kappas in prop::array::uniform3(0.0f64..0.5),
        kappa_l in 0.0f64..0.1,
        dt in 1e-4f64..1e-2,
    ) {
        let c = ClassicalConfig {
            g,
            delta,
            kappa_a: kappas[0],
            kappa_b: kappas[1],
            kappa_c: kappas[2],
            kappa_l,
            dt,
            ..base()
        };
        let got = step(&state, &c, &noise).unwrap();
        let oracle = complex_step(&state, &c, &noise);
        for k in 0..6 {
            prop_assert!((got[k] - oracle[k]).abs() <= 1e-14, "{k}: {} vs {}", got[k], oracle[k]);
        }
    }
}

fn variance_within(ensemble: &ClassicalEnsemble, k: usize, expected: f64) -> (f64, bool) {
    let (_, var) = ensemble.coordinate_moments(k);
    // standard error of a Gaussian sample variance
    let se = expected * (2.0 / (ensemble.len() as f64 - 1.0)).sqrt();
    (var, (var - expected).abs() <= 3.0 * se)
}

#[test]
fn uncoupled_quadratures_relax_to_bath_occupation() {
    // fast mechanical damping keeps the run short; the Euler rotation bias
    // of modes a and c is 0.5 % here, well inside the statistical tolerance
    let c = ClassicalConfig {
        g: 0.0,
        kappa_c: 0.2,
        n_a: 0.3,
        n_b: 0.5,
        n_c: 0.4,
        n_steps: 60_000,
        n_traj: 2000,
        ..base()
    };
    let ensemble = run_ensemble(&c).unwrap();
    for (k, n) in [(0, 0.3), (1, 0.3), (2, 0.5), (3, 0.5), (4, 0.4), (5, 0.4)] {
        let (var, ok) = variance_within(&ensemble, k, n);
        assert!(ok, "quadrature {k}: variance {var} vs {n}");
    }
    // thermal statistics and vanishing net power
    let figures = classical_figures(&ensemble, &ensemble, &c, DEFAULT_BIN_STEP).unwrap().figures;
    let g2 = figures.g2.unwrap();
    assert!((g2 - 2.0).abs() < 0.15, "g2 = {g2}");
    let n = figures.mean_phonons;
    let se = 0.4 / (ensemble.len() as f64).sqrt();
    assert!((n - 0.4).abs() <= 3.0 * se, "⟨|γ|²⟩ = {n}");
    assert!(figures.power.abs() <= 3.0 * c.kappa_c * se);
}

#[test]
fn euler_rotation_bias_matches_the_discrete_scheme() {
    // Euler on a damped rotation inflates the stationary variance to
    // κN / (κ − κ²dt/4 − ω²dt); at dt = 10⁻² and κ = 0.05 that is +25 %
    let c = ClassicalConfig {
        g: 0.0,
        kappa_a: 0.0,
        kappa_b: 0.0,
        kappa_c: 0.05,
        n_c: 1.0,
        dt: 1e-2,
        n_steps: 50_000,
        n_traj: 2000,
        ..base()
    };
    let kappa = c.kappa_c;
    let expected = kappa / (kappa - kappa * kappa * c.dt / 4.0 - c.omega_c * c.omega_c * c.dt);
    let ensemble = run_ensemble(&c).unwrap();
    for k in [4, 5] {
        let (var, ok) = variance_within(&ensemble, k, expected);
        assert!(ok, "quadrature {k}: {var} vs discrete {expected}");
        let (_, unbiased) = variance_within(&ensemble, k, 1.0);
        assert!(!unbiased, "bias should be resolvable");
    }
}

#[test]
fn cold_uncoupled_engine_stays_at_the_origin() {
    let c = ClassicalConfig {
        g: 0.0,
        n_steps: 1000,
        n_traj: 8,
        ..base()
    };
    let ensemble = run_ensemble(&c).unwrap();
    assert!(ensemble.final_points().all(|p| p.iter().all(|&v| v == 0.0)));
    assert_eq!(classical_g2(&ensemble.mechanical_points()), None);
}

#[test]
fn complex_gaussian_cloud_has_thermal_g2() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<[f64; 2]> = (0..200_000)
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            let y: f64 = StandardNormal.sample(&mut rng);
            [x, y]
        })
        .collect();
    let g2 = classical_g2(&points).unwrap();
    assert!((g2 - 2.0).abs() < 0.03, "{g2}");
}

#[test]
fn independent_reference_clouds_have_no_free_energy_gap() {
    let c = ClassicalConfig {
        g: 0.0,
        kappa_c: 0.2,
        n_c: 0.5,
        n_steps: 30_000,
        n_traj: 1500,
        ..base()
    };
    let first = run_ensemble(&c).unwrap().mechanical_points();
    let second = run_ensemble(&ClassicalConfig { seed: 99, ..c.clone() }).unwrap().mechanical_points();
    let df = histogram_free_energy(&first, &second, &c, DEFAULT_BIN_STEP).unwrap();
    let se = free_energy_std_error(&first, &second, &c, DEFAULT_BIN_STEP, 5).unwrap();
    assert!(df.abs() <= 3.0 * se, "ΔF = {df} ± {se}");
}

#[test]
fn ensemble_is_independent_of_thread_count() {
    let c = ClassicalConfig {
        n_b: 0.5,
        n_steps: 20_000,
        n_traj: 16,
        ..base()
    };
    let parallel = run_ensemble(&c).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let serial = pool.install(|| run_ensemble(&c).unwrap());
    assert_eq!(parallel, serial);
}
