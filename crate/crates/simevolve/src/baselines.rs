//! Reference clusterers: k-means++ with Lloyd iterations, and the naive
//! nearest-neighbour graph method (NG-nNN).

use rand::Rng;
use rayon::prelude::*;

use crate::cluster::{components, Partition};
use crate::data::Dataset;
use crate::error::{Error, Result};

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest_centroid(row: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = sq_dist(row, &centroids[0]);
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(row, centroid);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations until the assignment
/// reaches a fixpoint or `max_iters` passes. Empty clusters are repaired by
/// reseeding their centroid at the point farthest from it.
pub fn kmeanspp(
    ds: &Dataset,
    k: usize,
    max_iters: usize,
    rng: &mut impl Rng,
) -> Result<Partition> {
    let n = ds.n();
    if k < 1 || k > n {
        return Err(Error::Config(format!("K = {k} out of range 1..={n}")));
    }

    // D^2-weighted seeding.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(ds.row(rng.random_range(0..n)).to_vec());
    let mut weights: Vec<f64> = (0..n).map(|i| sq_dist(ds.row(i), &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in weights.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All remaining points coincide with a centroid.
            rng.random_range(0..n)
        };
        centroids.push(ds.row(pick).to_vec());
        for i in 0..n {
            weights[i] = weights[i].min(sq_dist(ds.row(i), centroids.last().unwrap()));
        }
    }

    let mut assignment: Vec<usize> = vec![usize::MAX; n];
    let mut prev_objective = f64::INFINITY;
    let mut repaired = false;
    for _ in 0..max_iters {
        let new_assignment: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|i| nearest_centroid(ds.row(i), &centroids))
            .collect();
        let converged = new_assignment == assignment;
        assignment = new_assignment;
        if converged {
            break;
        }
        // Lloyd monotonicity holds except across an empty-cluster repair.
        if cfg!(debug_assertions) {
            let obj: f64 = assignment
                .iter()
                .enumerate()
                .map(|(i, &c)| sq_dist(ds.row(i), &centroids[c]))
                .sum();
            debug_assert!(repaired || obj <= prev_objective + 1e-9);
            prev_objective = obj;
            repaired = false;
        }

        let mut sums = vec![vec![0.0; ds.m()]; k];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(ds.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Reseed at the point farthest from this centroid.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(ds.row(a), &centroids[c])
                            .partial_cmp(&sq_dist(ds.row(b), &centroids[c]))
                            .unwrap()
                    })
                    .unwrap();
                centroids[c] = ds.row(far).to_vec();
                repaired = true;
            } else {
                for (s, cv) in sums[c].iter_mut().zip(centroids[c].iter_mut()) {
                    *cv = *s / counts[c] as f64;
                }
            }
        }
    }
    Ok(Partition::from_labels(&assignment))
}

/// Sum of squared distances from each point to its assigned centroid under
/// the given labelling; used to check Lloyd monotonicity in tests.
pub fn kmeans_objective(ds: &Dataset, assignment: &[usize], k: usize) -> f64 {
    let mut sums = vec![vec![0.0; ds.m()]; k];
    let mut counts = vec![0usize; k];
    for (i, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(ds.row(i)) {
            *s += v;
        }
    }
    let centroids: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| {
            if c == 0 {
                s
            } else {
                s.into_iter().map(|v| v / c as f64).collect()
            }
        })
        .collect();
    assignment
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(ds.row(i), &centroids[c]))
        .sum()
}

/// Naive graph baseline: an undirected edge from every instance to each of
/// its `nn` Euclidean-nearest neighbours, then connected components.
pub fn ng_graph(ds: &Dataset, nn: usize) -> Result<Partition> {
    let n = ds.n();
    if nn < 1 || nn > n - 1 {
        return Err(Error::Config(format!("nn = {nn} out of range 1..={}", n - 1)));
    }
    let mut edges = Vec::with_capacity(n * nn);
    for i in 0..n {
        let mut others: Vec<(usize, f64)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (j, ds.euclidean(i, j)))
            .collect();
        others.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        for &(j, _) in &others[..nn] {
            edges.push((i, j));
        }
    }
    Ok(components(&edges, n))
}
