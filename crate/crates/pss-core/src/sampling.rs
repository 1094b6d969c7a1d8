//! Deterministic parameter samples in `[-1,1]^J`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform random points from a seeded ChaCha stream.
pub fn uniform(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect()
}

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut k = 2u64;
    while out.len() < count {
        if out.iter().take_while(|&&p| p * p <= k).all(|&p| k % p != 0) {
            out.push(k);
        }
        k += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton points (indices `1..=count`) mapped affinely to `[-1,1]^dim`.
pub fn halton(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let bases = primes(dim);
    (1..=count as u64)
        .map(|i| bases.iter().map(|&b| 2.0 * radical_inverse(i, b) - 1.0).collect())
        .collect()
}

/// Full tensor lattice with `k` equispaced points per axis (endpoints included).
pub fn tensor_lattice(dim: usize, k: usize) -> Vec<Vec<f64>> {
    assert!(k >= 2);
    let axis: Vec<f64> = (0..k).map(|i| -1.0 + 2.0 * i as f64 / (k - 1) as f64).collect();
    let total = k.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            (0..dim)
                .map(|_| {
                    let v = axis[idx % k];
                    idx /= k;
                    v
                })
                .collect()
        })
        .collect()
}

/// Covering radius of a point set in the max norm, estimated on a probe set.
pub fn covering_radius(points: &[Vec<f64>], probes: &[Vec<f64>]) -> f64 {
    probes
        .iter()
        .map(|p| {
            points
                .iter()
                .map(|q| p.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_first_points() {
        let h = halton(2, 3);
        assert_eq!(h[0], vec![0.0, 2.0 / 3.0 - 1.0]);
        assert!((h[1][0] + 0.5).abs() < 1e-15);
        assert!((h[2][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_is_reproducible() {
        assert_eq!(uniform(3, 5, 7), uniform(3, 5, 7));
        assert_ne!(uniform(3, 5, 7), uniform(3, 5, 8));
    }

    #[test]
    fn lattice_size_and_radius() {
        let l = tensor_lattice(2, 5);
        assert_eq!(l.len(), 25);
        let r = covering_radius(&l, &halton(2, 500));
        assert!(r <= 0.25 + 1e-12);
    }
}
