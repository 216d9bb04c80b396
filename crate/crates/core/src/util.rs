//! Small numeric helpers used throughout: sorting into magnitude order,
//! pool-adjacent-violators, seeded RNG streams, scalar searches.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for a (seed, stream) pair. Streams are independent, so per-item
/// draws stay reproducible when the item count changes.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a fresh seed from a base seed and a label (splitmix64 step).
pub fn split_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Absolute values sorted descending, together with the permutation that
/// produced them: `abs_sorted[j] = |v[perm[j]]|`.
pub fn abs_sorted_desc(v: &DVector<f64>) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().partial_cmp(&v[a].abs()).expect("NaN in vector"));
    let sorted = idx.iter().map(|&i| v[i].abs()).collect();
    (sorted, idx)
}

/// Is `v` sorted descending with nonnegative entries?
pub fn is_nonneg_descending(v: &DVector<f64>) -> bool {
    if v.iter().any(|x| *x < 0.0 || x.is_nan()) {
        return false;
    }
    v.iter().zip(v.iter().skip(1)).all(|(a, b)| a >= b)
}

/// Pool-adjacent-violators for a nonincreasing fit: returns the Euclidean
/// projection of `values` onto { y : y_1 >= y_2 >= ... >= y_n }.
pub fn pava_nonincreasing(values: &[f64]) -> Vec<f64> {
    // Blocks of (sum, count); merge while the running means increase.
    let mut sums: Vec<f64> = Vec::with_capacity(values.len());
    let mut counts: Vec<usize> = Vec::with_capacity(values.len());
    for &x in values {
        sums.push(x);
        counts.push(1);
        while sums.len() > 1 {
            let m = sums.len();
            let mean_last = sums[m - 1] / counts[m - 1] as f64;
            let mean_prev = sums[m - 2] / counts[m - 2] as f64;
            if mean_prev >= mean_last {
                break;
            }
            let s = sums.pop().unwrap();
            let c = counts.pop().unwrap();
            *sums.last_mut().unwrap() += s;
            *counts.last_mut().unwrap() += c;
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (s, c) in sums.iter().zip(counts.iter()) {
        let mean = s / *c as f64;
        out.extend(std::iter::repeat_n(mean, *c));
    }
    out
}

/// Minimize a unimodal function on [lo, hi] by golden-section search.
/// Returns (argmin, min value).
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Nearest-rank empirical quantile, q in [0, 1]. Sorts a copy.
pub fn quantile(samples: &[f64], q: f64) -> f64 {
    assert!(!samples.is_empty(), "quantile of empty sample");
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("NaN in samples"));
    let rank = ((q * s.len() as f64).ceil() as usize).clamp(1, s.len());
    s[rank - 1]
}

/// Mean and standard error of the mean.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}
