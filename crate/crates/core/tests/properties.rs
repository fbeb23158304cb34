use confsel::data::{split, stream_rng, Dataset};
use confsel::linear::{select_theta_with, t_alpha_theta, SearchOptions, ThetaDomain};
use confsel::ridge::{fit_ridge_path, linspace};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian_data(seed: u64, n: usize, d: usize) -> Dataset {
    let mut rng = stream_rng(seed, 0);
    let x: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    let y = x
        .chunks(d)
        .map(|r| r.iter().sum::<f64>() + rng.sample::<f64, _>(StandardNormal))
        .collect();
    Dataset::new(x, d, y).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_a_reproducible_partition(sizes in proptest::collection::vec(0usize..40, 1..5), seed in any::<u64>()) {
        let n: usize = sizes.iter().sum();
        let plan = split(n, &sizes, seed).unwrap();
        prop_assert_eq!(&plan, &split(n, &sizes, seed).unwrap());
        let mut all: Vec<usize> = plan.parts.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        for (p, s) in plan.parts.iter().zip(&sizes) {
            prop_assert_eq!(p.len(), *s);
        }
    }

    #[test]
    fn search_result_dominates_its_trace(seed in 0u64..1000, d in 1usize..4) {
        let data = gaussian_data(seed, 40, d);
        let domain = ThetaDomain::boxed(vec![-2.0; d], vec![2.0; d]).unwrap();
        let opts = SearchOptions { budget: 150, seed, ..SearchOptions::default() };
        let sel = select_theta_with(&domain, &data, 0.1, &opts).unwrap();
        prop_assert!(sel.search_trace.len() <= 150);
        for e in &sel.search_trace {
            prop_assert!(sel.t_alpha <= e.value);
            prop_assert_eq!(t_alpha_theta(&e.theta, &data, 0.1).unwrap(), e.value);
        }
        prop_assert_eq!(t_alpha_theta(&sel.theta_hat, &data, 0.1).unwrap(), sel.t_alpha);
    }

    #[test]
    fn ridge_norm_shrinks_and_stays_stationary(seed in 0u64..1000, d in 1usize..6) {
        let data = gaussian_data(seed, 30, d);
        let path = fit_ridge_path(&data, &linspace(0.0, 50.0, 26), 0.5).unwrap();
        for i in 0..path.len() {
            prop_assert!(path.stationarity_residual(i) <= 1e-8);
        }
        for w in path.betas.windows(2) {
            prop_assert!(w[1].norm() <= w[0].norm() * (1.0 + 1e-12));
        }
    }
}
