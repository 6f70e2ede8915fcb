//! Synthetic labelled datasets: spherical Gaussian clusters, and elliptical
//! clusters stretched along a random direction so they stay non-spherical at
//! high dimensionality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};

const CENTER_ATTEMPTS: usize = 10_000;

/// Samples `k` centers uniformly in the unit cube, rejecting candidates whose
/// distance to an accepted center is below `min_dist`. After the attempt cap
/// the best candidate seen is accepted with a warning on stderr.
fn sample_centers(rng: &mut impl Rng, m: usize, k: usize, min_dist: f64) -> Vec<Vec<f64>> {
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut attempts = 0;
    while centers.len() < k {
        let mut best: Option<(f64, Vec<f64>)> = None;
        loop {
            let cand: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let nearest = centers
                .iter()
                .map(|c| {
                    c.iter()
                        .zip(&cand)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            attempts += 1;
            if nearest >= min_dist {
                best = Some((nearest, cand));
                break;
            }
            if best.as_ref().map_or(true, |(d, _)| nearest > *d) {
                best = Some((nearest, cand));
            }
            if attempts >= CENTER_ATTEMPTS {
                eprintln!(
                    "warning: could not place {k} centers at pairwise distance {min_dist:.3}; \
                     using best found"
                );
                break;
            }
        }
        centers.push(best.unwrap().1);
        if attempts >= CENTER_ATTEMPTS {
            // Place the remaining centers unconstrained-best as well.
            while centers.len() < k {
                centers.push((0..m).map(|_| rng.random::<f64>()).collect());
            }
        }
    }
    centers
}

fn check_params(m: usize, k: usize, size_range: (usize, usize)) -> Result<()> {
    if m < 1 {
        return Err(Error::Config("need at least 1 dimension".into()));
    }
    if k < 1 {
        return Err(Error::Config("need at least 1 cluster".into()));
    }
    let (lo, hi) = size_range;
    if lo < 1 || hi < lo {
        return Err(Error::Config(format!("bad size range {lo}..={hi}")));
    }
    if k * lo < 2 {
        return Err(Error::Config("dataset would have fewer than 2 instances".into()));
    }
    Ok(())
}

/// Spherical clusters: axis-aligned Gaussians with per-axis sigma uniform in
/// `[0.01, 0.05]`, centers at pairwise distance >= 4 * sigma_max. Output is
/// scaled to `[0,1]` and carries gold labels.
pub fn gen_gaussian(m: usize, k: usize, size_range: (usize, usize), seed: u64) -> Result<Dataset> {
    check_params(m, k, size_range)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigmas: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..m).map(|_| rng.random_range(0.01..=0.05)).collect())
        .collect();
    let sigma_max = sigmas
        .iter()
        .flatten()
        .copied()
        .fold(0.0f64, f64::max);
    let centers = sample_centers(&mut rng, m, k, 4.0 * sigma_max);

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..k {
        let size = rng.random_range(size_range.0..=size_range.1);
        let dists: Vec<Normal<f64>> = (0..m)
            .map(|f| Normal::new(centers[c][f], sigmas[c][f]).unwrap())
            .collect();
        for _ in 0..size {
            rows.push(dists.iter().map(|d| d.sample(&mut rng)).collect());
            labels.push(c);
        }
    }
    Ok(Dataset::from_rows(rows, Some(labels))?.scale_unit())
}

/// Random orthonormal basis whose first column is a random unit direction;
/// Gram-Schmidt over Gaussian draws.
fn random_orthonormal_basis(rng: &mut impl Rng, m: usize) -> Vec<Vec<f64>> {
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    while basis.len() < m {
        let mut v: Vec<f64> = (0..m).map(|_| std_normal.sample(rng)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            for vi in &mut v {
                *vi /= norm;
            }
            basis.push(v);
        }
    }
    basis
}

/// Elliptical clusters: one random major direction with sigma in `[0.1, 0.2]`
/// and minor sigmas in `[0.005, 0.02]`, realised by rotating an axis-aligned
/// sample by a random orthonormal basis.
pub fn gen_elliptical(m: usize, k: usize, size_range: (usize, usize), seed: u64) -> Result<Dataset> {
    if m < 2 {
        return Err(Error::Config("elliptical generator needs m >= 2".into()));
    }
    check_params(m, k, size_range)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    struct ClusterShape {
        basis: Vec<Vec<f64>>,
        sigmas: Vec<f64>,
    }
    let shapes: Vec<ClusterShape> = (0..k)
        .map(|_| {
            let basis = random_orthonormal_basis(&mut rng, m);
            let mut sigmas = vec![0.0; m];
            sigmas[0] = rng.random_range(0.1..=0.2);
            for s in sigmas.iter_mut().skip(1) {
                *s = rng.random_range(0.005..=0.02);
            }
            ClusterShape { basis, sigmas }
        })
        .collect();
    let sigma_max = shapes.iter().map(|s| s.sigmas[0]).fold(0.0f64, f64::max);
    let centers = sample_centers(&mut rng, m, k, 4.0 * sigma_max);

    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, shape) in shapes.iter().enumerate() {
        let size = rng.random_range(size_range.0..=size_range.1);
        for _ in 0..size {
            let coeffs: Vec<f64> = shape
                .sigmas
                .iter()
                .map(|&s| s * std_normal.sample(&mut rng))
                .collect();
            let mut point = centers[c].clone();
            for (axis, &coeff) in shape.basis.iter().zip(&coeffs) {
                for (p, a) in point.iter_mut().zip(axis) {
                    *p += coeff * a;
                }
            }
            rows.push(point);
            labels.push(c);
        }
    }
    Ok(Dataset::from_rows(rows, Some(labels))?.scale_unit())
}
