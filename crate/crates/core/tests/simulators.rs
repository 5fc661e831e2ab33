mod common;

use common::{chi_square_two_sample, ks_p_value, q3, NU3};
use mjp_core::rng_stream;
use mjp_core::simulate::{gillespie_simulate, uniformized_simulate};

const SAMPLES: u64 = 100_000;

fn final_state_counts(mut draw: impl FnMut(u64) -> usize) -> Vec<usize> {
    let mut counts = vec![0; 3];
    for r in 0..SAMPLES {
        counts[draw(r)] += 1;
    }
    counts
}

#[test]
fn gillespie_and_uniformized_agree_at_t_max() {
    let q = q3();
    let g = final_state_counts(|r| {
        gillespie_simulate(&NU3, &q, 0.0, 2.5, &mut rng_stream(100, r)).unwrap().final_state()
    });
    let u = final_state_counts(|r| {
        uniformized_simulate(&NU3, &q, 2.0 * q.q_max(), 0.0, 2.5, &mut rng_stream(101, r))
            .unwrap()
            .final_state()
    });
    let p = chi_square_two_sample(&g, &u);
    assert!(p > 0.001, "chi-square p = {p}, {g:?} vs {u:?}");
}

#[test]
fn uniformized_law_does_not_depend_on_lambda() {
    let q = q3();
    let a = final_state_counts(|r| {
        uniformized_simulate(&NU3, &q, 1.5 * q.q_max(), 0.0, 2.5, &mut rng_stream(102, r))
            .unwrap()
            .final_state()
    });
    let b = final_state_counts(|r| {
        uniformized_simulate(&NU3, &q, 3.0 * q.q_max(), 0.0, 2.5, &mut rng_stream(103, r))
            .unwrap()
            .final_state()
    });
    let p = chi_square_two_sample(&a, &b);
    assert!(p > 0.001, "chi-square p = {p}, {a:?} vs {b:?}");
}

#[test]
fn gillespie_holding_times_are_exponential() {
    let q = q3();
    let mut rng = rng_stream(104, 0);
    let x = gillespie_simulate(&NU3, &q, 0.0, 20_000.0, &mut rng).unwrap();
    let mut holding: Vec<Vec<f64>> = vec![Vec::new(); 3];
    // the first and last pieces are truncated by the window
    let segs: Vec<_> = x.segments().collect();
    for &(a, b, s) in &segs[1..segs.len() - 1] {
        holding[s].push(b - a);
    }
    for (s, sample) in holding.iter_mut().enumerate() {
        assert!(sample.len() > 1000);
        let rate = q.leave(s);
        let p = ks_p_value(sample, |t| 1.0 - (-rate * t).exp());
        assert!(p > 0.001, "state {s}: KS p = {p}");
    }
}
