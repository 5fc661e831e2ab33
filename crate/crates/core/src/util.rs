use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

/// Generator used throughout the crate; reproducible for a fixed seed.
pub type ChainRng = ChaCha8Rng;

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Index drawn with probability proportional to `weights`; `total` is their sum.
#[inline]
pub(crate) fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64], total: f64) -> usize {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    // Rounding in the running sum can leave u just above acc.
    last
}

pub(crate) fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
}

/// Uniform draw from the open interval `(a, b)`.
#[inline]
pub(crate) fn uniform_open<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    loop {
        let t = a + (b - a) * rng.random::<f64>();
        if t > a && t < b {
            return t;
        }
    }
}

/// Points of a homogeneous Poisson process of rate `rate` on `(a, b)`,
/// drawn as a Poisson count followed by sorted uniform positions.
pub(crate) fn poisson_points<R: Rng + ?Sized>(rng: &mut R, rate: f64, a: f64, b: f64, out: &mut Vec<f64>) {
    let n = sample_poisson(rng, rate * (b - a));
    let start = out.len();
    out.extend((0..n).map(|_| uniform_open(rng, a, b)));
    out[start..].sort_unstable_by(f64::total_cmp);
}
