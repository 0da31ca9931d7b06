mod common;

use common::d_separated_by_paths;
use pcdag::dagcov::{dag_covariance, dag_linear_system, sample_covariance};
use pcdag::eval::kl_loss;
use pcdag::glasso::{glasso_fit, lambda_max, GlassoConfig};
use pcdag::graph::{
    cpdag_of, d_separated, extend_to_dag, is_acyclic, meek_orient, Mark, PartiallyDirectedGraph,
};
use pcdag::linalg::sym_eigenvalues;
use pcdag::nalgebra::DMatrix;
use pcdag::pcalg::{pc_cpdag, CiTestContext};
use pcdag::rng::rng_from_seed;
use pcdag::robust::{gk_pairwise_cov, ogk_covariance, OgkConfig};
use pcdag::simgen::{sample_dag_model, sample_data, ErrorDistribution, Model};
use pcdag::Dataset;
use proptest::prelude::*;

fn data_for(p: usize, n: usize, s: f64, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let m = sample_dag_model(p, s, &mut rng).unwrap();
    sample_data(&Model::Dag(m), n, ErrorDistribution::Gaussian, &mut rng).unwrap()
}

fn mixed_graph() -> impl Strategy<Value = PartiallyDirectedGraph> {
    (2usize..7).prop_flat_map(|p| {
        prop::collection::vec(0u8..4, p * (p - 1) / 2).prop_map(move |codes| {
            let mut g = PartiallyDirectedGraph::new(p);
            let mut k = 0;
            for i in 0..p {
                for j in (i + 1)..p {
                    match codes[k] {
                        1 => g.set_undirected(i, j),
                        2 => g.set_directed(i, j),
                        3 => g.set_directed(j, i),
                        _ => {}
                    }
                    k += 1;
                }
            }
            g
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn meek_is_idempotent_and_only_adds_arrowheads(g in mixed_graph()) {
        let once = meek_orient(&g);
        prop_assert_eq!(meek_orient(&once), once.clone());
        prop_assert!(once.same_skeleton(&g));
        for (a, b, m) in g.edges() {
            match m {
                Mark::Forward => prop_assert!(once.is_directed(a, b)),
                Mark::Backward => prop_assert!(once.is_directed(b, a)),
                _ => {}
            }
        }
    }

    #[test]
    fn extensions_are_acyclic_members_of_the_class(p in 2usize..8, s in 0.0f64..0.8, seed in any::<u64>()) {
        let d = sample_dag_model(p, s, &mut rng_from_seed(seed)).unwrap().dag;
        let c = cpdag_of(&d);
        let e = extend_to_dag(&c, &mut rng_from_seed(seed ^ 1)).unwrap();
        prop_assert!(is_acyclic(e.graph()).unwrap());
        prop_assert!(e.graph().same_skeleton(c.graph()));
        prop_assert_eq!(cpdag_of(&e).into_graph(), c.graph().clone());
    }

    #[test]
    fn bayes_ball_matches_paths(p in 2usize..7, s in 0.0f64..0.9, seed in any::<u64>(), mask in any::<u8>()) {
        let d = sample_dag_model(p, s, &mut rng_from_seed(seed)).unwrap().dag;
        let cond: Vec<usize> = (1..p - 1).filter(|&v| mask & (1 << v) != 0).collect();
        prop_assert_eq!(d_separated(&d, &[0], &[p - 1], &cond).unwrap(), d_separated_by_paths(&d, 0, p - 1, &cond));
    }

    #[test]
    fn pc_sepsets_are_symmetric_and_exclude_endpoints(seed in any::<u64>(), alpha in 0.001f64..0.5) {
        let data = data_for(8, 25, 0.3, seed);
        let r = pc_cpdag(&CiTestContext::from_data(&data, alpha).unwrap(), None).unwrap();
        for (i, j, k) in r.sepsets.iter() {
            prop_assert!(!r.cpdag.graph().is_adjacent(i, j));
            prop_assert_eq!(r.sepsets.get(j, i), Some(k));
            prop_assert!(!k.contains(&i) && !k.contains(&j));
        }
        for i in 0..8 {
            for j in (i + 1)..8 {
                prop_assert!(r.cpdag.graph().is_adjacent(i, j) || r.sepsets.get(i, j).is_some());
            }
        }
    }

    #[test]
    fn dag_precision_is_positive_definite(seed in any::<u64>(), n in 5usize..40) {
        let mut rng = rng_from_seed(seed);
        let m = sample_dag_model(10, 0.3, &mut rng).unwrap();
        let data = sample_data(&Model::Dag(m.clone()), n, ErrorDistribution::Gaussian, &mut rng).unwrap();
        let sys = dag_linear_system(&sample_covariance(&data), &m.dag).unwrap();
        let (sigma, omega) = dag_covariance(&sys).unwrap();
        prop_assert!(sym_eigenvalues(&omega)[0] > 0.0);
        prop_assert_eq!(&omega, &omega.transpose());
        prop_assert!(sym_eigenvalues(&sigma)[0] > 0.0);
    }

    #[test]
    fn kl_is_nonnegative(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let a = sample_dag_model(6, 0.5, &mut rng).unwrap();
        let b = sample_dag_model(6, 0.5, &mut rng).unwrap();
        prop_assert!(kl_loss(&a.sigma_true, &b.omega_true).unwrap() >= 0.0);
    }

    #[test]
    fn glasso_fit_is_symmetric_positive_definite(seed in any::<u64>(), frac in 0.05f64..1.2) {
        let s = sample_covariance(&data_for(10, 15, 0.3, seed));
        let f = glasso_fit(&s, &GlassoConfig::new(frac * lambda_max(&s))).unwrap();
        prop_assert_eq!(&f.omega, &f.omega.transpose());
        prop_assert!(sym_eigenvalues(&f.omega)[0] > 0.0);
    }

    #[test]
    fn ogk_is_symmetric_psd(seed in any::<u64>(), n in 6usize..40) {
        let data = data_for(7, n, 0.4, seed);
        let c = ogk_covariance(&data, &OgkConfig::default()).unwrap().cov;
        prop_assert_eq!(&c, &c.transpose());
        prop_assert!(sym_eigenvalues(&c)[0] >= 0.0);
    }

    #[test]
    fn gk_is_scale_equivariant(seed in any::<u64>(), a in 0.01f64..100.0, b in 0.01f64..100.0) {
        let x = data_for(2, 31, 0.8, seed);
        let m = x.matrix();
        let u: Vec<f64> = m.column(0).iter().copied().collect();
        let v: Vec<f64> = m.column(1).iter().copied().collect();
        let au: Vec<f64> = u.iter().map(|t| a * t).collect();
        let bv: Vec<f64> = v.iter().map(|t| b * t).collect();
        let base = gk_pairwise_cov(&u, &v).unwrap();
        let scaled = gk_pairwise_cov(&au, &bv).unwrap();
        prop_assert!((scaled - a * b * base).abs() <= 1e-9 * (a * b * base.abs()).max(1e-12));
    }

    #[test]
    fn dataset_csv_round_trips(rows in 1usize..6, cols in 1usize..5, seed in any::<u64>()) {
        let x = data_for(2, rows * cols, 0.5, seed).matrix().clone();
        let d = Dataset::new(DMatrix::from_fn(rows, cols, |r, c| x[(r * cols + c, 0)]));
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(&buf[..]).unwrap();
        prop_assert!(d.matrix().iter().zip(back.matrix().iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
