mod common;

use mjp_core::ffbs::{attach_emissions, build_kernel, forward_filter, skeleton_probability};
use mjp_core::oracle::enumerate_skeleton_posterior;
use mjp_core::{Evidence, MjpError, Observation, RateMatrix};
use proptest::prelude::*;

fn arb_rates(n: usize) -> impl Strategy<Value = RateMatrix> {
    proptest::collection::vec(0.05f64..3.0, n * n).prop_map(move |v| {
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    rows[i][j] = v[i * n + j];
                }
            }
            rows[i][i] = -rows[i].iter().sum::<f64>();
        }
        RateMatrix::new(&rows).unwrap()
    })
}

fn arb_distribution(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.01f64..1.0, n).prop_map(|v| {
        let z: f64 = v.iter().sum();
        v.iter().map(|x| x / z).collect()
    })
}

/// Sorted grid times in (0, 6) and observations with likelihood entries
/// that may be zero.
fn arb_instance() -> impl Strategy<Value = (RateMatrix, Vec<f64>, f64, Vec<f64>, Vec<(f64, Vec<f64>)>)> {
    (2usize..=3, 0usize..=5, 0usize..=3).prop_flat_map(|(n, steps, k)| {
        (
            arb_rates(n),
            arb_distribution(n),
            1.05f64..4.0,
            proptest::collection::btree_set(1u32..599, steps),
            proptest::collection::vec(
                (0u32..=600, proptest::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], n)),
                k,
            ),
        )
            .prop_map(|(q, nu, factor, times, mut obs)| {
                let times: Vec<f64> = times.into_iter().map(|t| t as f64 / 100.0).collect();
                obs.sort_by_key(|(t, _)| *t);
                let obs = obs
                    .into_iter()
                    .map(|(t, mut lik)| {
                        if lik.iter().all(|&l| l == 0.0) {
                            lik[0] = 0.5;
                        }
                        (t as f64 / 100.0, lik)
                    })
                    .collect();
                (q, nu, factor, times, obs)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ffbs_skeleton_law_equals_enumeration((q, nu, factor, times, obs) in arb_instance()) {
        let n = q.size();
        let kernel = build_kernel(&q, factor * q.q_max()).unwrap();
        let ev = Evidence::new(
            obs.into_iter().map(|(t, lik)| Observation::new(t, lik)).collect(),
            n,
        ).unwrap();
        let attach = attach_emissions(&times, &ev);
        let filtered = forward_filter(&kernel, &nu, &attach, times.len());
        let exact = enumerate_skeleton_posterior(&times, &nu, &kernel, &ev);
        match (filtered, exact) {
            (Ok(f), Ok(post)) => {
                prop_assert!(f.log_norm().is_finite());
                let total = n.pow(times.len() as u32 + 1);
                for code in 0..total {
                    let mut c = code;
                    let s: Vec<usize> = (0..=times.len()).map(|_| { let d = c % n; c /= n; d }).collect();
                    let p = skeleton_probability(&f, &kernel, &s);
                    prop_assert!(!p.is_nan());
                    let e = post.get(&s).copied().unwrap_or(0.0);
                    prop_assert!((p - e).abs() < 1e-10, "{:?}: {} vs {}", s, p, e);
                }
            }
            (Err(MjpError::ImpossibleEvidence { .. }), Err(MjpError::ImpossibleEvidence { .. })) => {}
            (a, b) => prop_assert!(false, "filter {:?} vs enumeration {:?}", a.map(|_| ()), b.map(|_| ())),
        }
    }
}
