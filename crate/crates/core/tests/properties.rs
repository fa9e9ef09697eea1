use proptest::collection::vec;
use proptest::prelude::*;

use peelmeans::constraints::{assign, ConstraintSpec};
use peelmeans::geometry::{centroid, centroid_indexed, f2, kth_largest_distance, squared_distance, PointSet};
use peelmeans::oracle::{brute_opt2, partition_cost};
use peelmeans::params::{Overrides, ParameterSet};
use peelmeans::reduction::{reduce_to_points, verify_identity, GraphInstance};
use peelmeans::rng::substream;
use peelmeans::sampler::{peel, peel_target, run_2means, SamplerConfig};

fn point_set(d: usize, n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    vec(vec(-50.0..50.0f64, d), n)
}

fn instance() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..5).prop_flat_map(|d| point_set(d, 1..30))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn centroid_decomposition(rows in instance(), shift in vec(-20.0..20.0f64, 5)) {
        let set = PointSet::new(rows.clone()).unwrap();
        let c = centroid(&set).unwrap();
        let x: Vec<f64> = c.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let lhs = f2(&x, &set).unwrap();
        let rhs = f2(&c, &set).unwrap() + rows.len() as f64 * squared_distance(&c, &x);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1.0));
        prop_assert!(f2(&c, &set).unwrap() <= lhs * (1.0 + 1e-12));
    }

    #[test]
    fn subset_centroid_bound(rows in point_set(3, 4..40), frac in 0.1..1.0f64, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let set = PointSet::new(rows.clone()).unwrap();
        let n = rows.len();
        let size = ((frac * n as f64).round() as usize).clamp(1, n);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut substream(seed, 0));
        idx.truncate(size);
        let c = centroid(&set).unwrap();
        let sigma = (f2(&c, &set).unwrap() / n as f64).sqrt();
        let alpha = size as f64 / n as f64;
        let gap = squared_distance(&c, &centroid_indexed(&set, &idx).unwrap()).sqrt();
        prop_assert!(gap <= ((1.0 - alpha) / alpha).sqrt() * sigma + 1e-9);
    }

    #[test]
    fn kth_largest_matches_sort(rows in point_set(2, 1..60), q in vec(-50.0..50.0f64, 2), k in 1usize..60) {
        let set = PointSet::new(rows.clone()).unwrap();
        let k = k.min(rows.len());
        let mut d: Vec<f64> = rows.iter().map(|p| squared_distance(p, &q).sqrt()).collect();
        d.sort_by(|a, b| b.total_cmp(a));
        prop_assert_eq!(kth_largest_distance(&q, &set, k).unwrap(), d[k - 1]);
    }

    #[test]
    fn peel_keeps_the_target_count_of_farthest_points(
        rows in point_set(2, 2..60), varsigma in 0.01..0.5f64, seed in any::<u64>()
    ) {
        let set = PointSet::new(rows).unwrap();
        let active: Vec<usize> = (0..set.len()).collect();
        let c1 = centroid(&set).unwrap();
        let step = peel(&set, &active, &c1, varsigma, Some(0.05), &mut substream(seed, 1)).unwrap();
        let target = peel_target(set.len(), varsigma);
        prop_assert_eq!(step.kept.len(), target);
        prop_assert!(target >= 1 && target < set.len());
        for i in 0..set.len() {
            let dist = squared_distance(set.point(i), &step.center).sqrt();
            let slack = 1e-12 * step.threshold.max(1.0);
            if step.kept.contains(&i) {
                prop_assert!(dist >= step.threshold - slack);
            } else {
                prop_assert!(dist <= step.threshold + slack);
            }
        }
    }

    #[test]
    fn unconstrained_assignment_is_nearest_center(
        rows in point_set(2, 1..40), centers in vec(vec(-50.0..50.0f64, 2), 1..5)
    ) {
        let set = PointSet::new(rows.clone()).unwrap();
        let r = assign(&set, &centers, &ConstraintSpec::Unconstrained).unwrap();
        prop_assert!(r.feasible);
        let direct: f64 = rows
            .iter()
            .map(|p| centers.iter().map(|c| squared_distance(p, c)).fold(f64::INFINITY, f64::min))
            .sum();
        prop_assert!((r.cost - direct).abs() <= 1e-9 * direct.max(1.0));
    }

    #[test]
    fn balanced_assignment_respects_sizes(
        rows in point_set(2, 12..13), centers in vec(vec(-50.0..50.0f64, 2), 2..5), c in 1.0..3.0f64
    ) {
        let set = PointSet::new(rows).unwrap();
        let k = centers.len();
        let exact = assign(&set, &centers, &ConstraintSpec::balanced(1.0).unwrap()).unwrap();
        if 12 % k == 0 {
            prop_assert!(exact.feasible);
            prop_assert!(exact.sizes(k).iter().all(|&s| s == 12 / k), "sizes {:?}", exact.sizes(k));
        }
        let loose = assign(&set, &centers, &ConstraintSpec::balanced(c).unwrap()).unwrap();
        prop_assert!(loose.feasible);
        let sizes = loose.sizes(k);
        let (lo, hi) = (*sizes.iter().min().unwrap(), *sizes.iter().max().unwrap());
        prop_assert!(hi as f64 <= c * lo as f64 + 1e-9, "sizes {:?} at c = {}", sizes, c);
        if exact.feasible {
            prop_assert!(loose.cost <= exact.cost + 1e-9 * exact.cost.max(1.0));
        }
    }

    #[test]
    fn brute_opt2_is_a_lower_bound_for_lloyd(rows in point_set(2, 2..11), seed in any::<u64>()) {
        use rand::Rng;
        let set = PointSet::new(rows).unwrap();
        let opt = brute_opt2(&set, &ConstraintSpec::Unconstrained).unwrap();
        prop_assert!((partition_cost(&set, &opt.labels, 2).unwrap() - opt.cost).abs() <= 1e-9 * opt.cost.max(1.0));
        // A few Lloyd steps from a random split never beat the optimum.
        let mut rng = substream(seed, 2);
        let mut labels: Vec<usize> = (0..set.len()).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        for _ in 0..5 {
            let centers: Vec<Vec<f64>> = (0..2)
                .map(|j| {
                    let idx: Vec<usize> = (0..set.len()).filter(|&i| labels[i] == j).collect();
                    if idx.is_empty() { set.point(0).to_vec() } else { centroid_indexed(&set, &idx).unwrap() }
                })
                .collect();
            let r = assign(&set, &centers, &ConstraintSpec::Unconstrained).unwrap();
            prop_assert!(r.cost >= opt.cost * (1.0 - 1e-9));
            labels = r.assignment;
        }
    }

    #[test]
    fn reduction_identity_on_random_graphs(n in (1usize..5).prop_map(|h| 2 * h), mask in any::<u64>()) {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let edges = pairs.iter().enumerate().filter(|(b, _)| mask >> (b % 64) & 1 == 1).map(|(_, &e)| e).collect();
        let g = GraphInstance::new(n, edges).unwrap();
        let pts = reduce_to_points(&g).unwrap();
        prop_assert_eq!(pts.len(), n);
        let id = verify_identity(&g).unwrap();
        prop_assert!(id.holds);
    }

    #[test]
    fn parameter_schedule_invariants(eps in 0.001..0.5f64) {
        let ps = ParameterSet::resolve(eps, &Overrides::default()).unwrap();
        prop_assert!((1.0 + 2.0 * ps.delta2) * ps.d2 <= ps.d2 + ps.delta + 1e-12);
        prop_assert!((1.0 + ps.varsigma) * (1.0 + 2.0 * ps.delta1) * ps.alpha2 <= ps.alpha2 + ps.delta / 2.0 + 1e-9);
        prop_assert!(ps.alpha6 >= 4.0);
        prop_assert!(ps.m >= ps.d4 / eps * (1.0 - 1e-9));
        prop_assert!(ps.n_a >= ps.m && ps.n_b >= ps.m && ps.n_2 >= ps.m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sampler_is_deterministic_and_bounded(rows in point_set(2, 3..40), seed in any::<u64>(), m in 1u64..4) {
        let set = PointSet::new(rows).unwrap();
        let o = Overrides { n_a: Some(m + 2), n_b: Some(m + 2), n_2: Some(m + 3), ..Overrides::with_m(m) };
        let ps = ParameterSet::resolve(0.3, &o).unwrap();
        let config = SamplerConfig::capped(5000);
        let a = run_2means(&set, &ps, seed, &config).unwrap();
        let b = run_2means(&set, &ps, seed, &config).unwrap();
        prop_assert_eq!(&a.pairs, &b.pairs);
        prop_assert!(a.phase_iterations <= ps.iteration_bound(set.len()));
        prop_assert_eq!(a.len() as u64, a.phase1_count + 1 + a.phase2_count);
    }
}
