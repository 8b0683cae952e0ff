use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tomography::estimator::{
    continuous_kernel, estimate_continuous, exact_continuous, exact_discrete, exact_weigert, simulate_continuous,
    simulate_discrete, DensityMatrix, SettingSelection, WeigertConvention,
};
use tomography::liouville::{random_density, random_hermitian};
use tomography::spin::{coherent_state, pauli_quorum, random_directions, weigert_quorum, Direction, SpinSystem};
use tomography::liouville::C64;

fn coherent(two_s: u32, alpha: f64) -> DensityMatrix {
    DensityMatrix::from(&coherent_state(&SpinSystem::new(two_s), C64::new(alpha, 0.0)).unwrap())
}

#[test]
fn exact_probabilities_reproduce_expectations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (q, dual) = pauli_quorum();
    let rho = DensityMatrix::new(random_density(2, &mut rng)).unwrap();
    for _ in 0..50 {
        let a = random_hermitian(2, &mut rng);
        let truth = rho.expectation(&a).re;
        assert!((exact_discrete(&a, &q, &dual, &rho).unwrap() - truth).abs() <= 1e-10);
    }
    for two_s in [1u32, 2] {
        let sp = SpinSystem::new(two_s);
        let d = sp.dim();
        let rho = DensityMatrix::new(random_density(d, &mut rng)).unwrap();
        let wq = weigert_quorum(&sp, &random_directions(d * d, 7)).unwrap();
        for _ in 0..50 {
            let a = random_hermitian(d, &mut rng);
            let truth = rho.expectation(&a).re;
            assert!((exact_continuous(&a, &sp, &rho).unwrap() - truth).abs() <= 1e-10);
            assert!((exact_weigert(&a, &wq, &rho, WeigertConvention::Expansion).unwrap() - truth).abs() <= 1e-10);
        }
    }
}

#[test]
fn continuous_estimator_is_unbiased() {
    let sp = SpinSystem::new(1);
    let rho = coherent(1, 2.0);
    let a = sp.sz().clone();
    let exact = rho.expectation(&a).re;
    let means: Vec<f64> = (0..200u64)
        .map(|seed| {
            let c = simulate_continuous(&a, &sp, &rho, 10_000, seed).unwrap();
            c.values.iter().sum::<f64>() / c.values.len() as f64
        })
        .collect();
    let m = means.iter().sum::<f64>() / 200.0;
    let sd = (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 199.0).sqrt();
    let err = sd / 200f64.sqrt();
    assert!((m - exact).abs() <= 4.0 * err, "{m} vs {exact} ± {err}");
}

#[test]
fn continuous_error_bar_scales_inverse_sqrt() {
    let sp = SpinSystem::new(1);
    let rho = coherent(1, 2.0);
    let c = simulate_continuous(sp.sz(), &sp, &rho, 100_000, 42).unwrap();
    let errs: Vec<f64> = [1_000, 10_000, 100_000].iter().map(|&n| c.prefix_stats(n, 20).unwrap().error_bar).collect();
    for w in errs.windows(2) {
        let ratio = (w[0] / w[1]) / 10f64.sqrt();
        assert!((1.0 / 1.5..=1.5).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn estimators_agree_on_state_with_equal_budgets() {
    let sp = SpinSystem::new(1);
    let rho = coherent(1, 2.0);
    let (q, dual) = pauli_quorum();
    let cont = estimate_continuous(sp.sz(), &sp, &rho, 100_000, 42, 20).unwrap();
    let disc = simulate_discrete(sp.sz(), &q, &dual, &rho, 100_000, 42, SettingSelection::FixedQuota)
        .unwrap()
        .stats(20)
        .unwrap();
    let ratio = cont.error_bar / disc.error_bar;
    assert!((0.5..=2.0).contains(&ratio), "{ratio}");
}

#[test]
fn kernel_sphere_average_with_born_weights() {
    // a coarse Monte Carlo over directions is enough to separate 1/2 from the alternatives
    let sp = SpinSystem::new(2);
    let rho = coherent(2, 0.7);
    let a = sp.sx().clone();
    let truth = rho.expectation(&a).re;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut total = 0.0;
    let n = 4000;
    for _ in 0..n {
        let dir = Direction::random(&mut rng);
        let eig = tomography::liouville::eig_hermitian(&sp.s_dot(&dir)).unwrap();
        for i in 0..sp.dim() {
            let v = eig.vector(i);
            let p = v.dotc(&(rho.op().matrix() * &v)).re;
            total += p * continuous_kernel(&a, &sp, eig.values[i], &dir).unwrap();
        }
    }
    assert!((total / n as f64 - truth).abs() < 0.05);
}

#[test]
fn runs_are_deterministic() {
    let sp = SpinSystem::new(1);
    let rho = coherent(1, 2.0);
    let a = estimate_continuous(sp.sz(), &sp, &rho, 20_000, 9, 20).unwrap();
    let b = estimate_continuous(sp.sz(), &sp, &rho, 20_000, 9, 20).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
