//! The clustering fitness function: per-cluster sparsity and separation,
//! dataset connectedness with capped inverse distances, and their combination
//! into a single maximised score.

use serde::Serialize;

use crate::cluster::Partition;
use crate::data::{Dataset, NeighborIndex};

pub const D_INV_CAP: f64 = 10.0;

/// Inverse distance capped at 10; a zero distance contributes the cap.
pub fn d_inv(d: f64) -> f64 {
    if d == 0.0 {
        D_INV_CAP
    } else {
        (1.0 / d).min(D_INV_CAP)
    }
}

/// All intermediate fitness quantities for one partition.
#[derive(Debug, Clone, Serialize)]
pub struct FitnessBreakdown {
    pub fitness: f64,
    pub connectedness: f64,
    pub mean_spasep: f64,
    pub sparsity: Vec<f64>,
    pub separation: Vec<f64>,
}

/// Max over cluster members of the distance to their nearest co-member.
/// A singleton cluster is perfectly compact: 0.
pub fn sparsity(part: &Partition, cluster: usize, ds: &Dataset) -> f64 {
    let members: Vec<usize> = part
        .assignment()
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c == cluster)
        .map(|(i, _)| i)
        .collect();
    if members.len() < 2 {
        return 0.0;
    }
    members
        .iter()
        .map(|&a| {
            members
                .iter()
                .filter(|&&b| b != a)
                .map(|&b| ds.euclidean(a, b))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Min distance from any cluster member to any non-member; 0 when there are
/// no non-members (K = 1).
pub fn separation(part: &Partition, cluster: usize, ds: &Dataset) -> f64 {
    let mut min = f64::INFINITY;
    let assignment = part.assignment();
    for a in 0..ds.n() {
        if assignment[a] != cluster {
            continue;
        }
        for b in 0..ds.n() {
            if assignment[b] == cluster {
                continue;
            }
            min = min.min(ds.euclidean(a, b));
        }
    }
    if min.is_finite() {
        min
    } else {
        0.0
    }
}

/// Mean, over clusters and their members, of capped inverse distance to the
/// member's `c_eff` nearest neighbours that share its cluster.
pub fn connectedness(part: &Partition, idx: &NeighborIndex) -> f64 {
    let assignment = part.assignment();
    let clusters = part.clusters();
    let mut total = 0.0;
    for members in &clusters {
        let mut cluster_sum = 0.0;
        for &a in members {
            for &(b, dist) in idx.connectedness_neighbors(a) {
                if assignment[b] == assignment[a] {
                    cluster_sum += d_inv(dist);
                }
            }
        }
        total += cluster_sum / members.len() as f64;
    }
    total / part.k() as f64
}

/// Computes all components and the scalar fitness. Degenerate partitions
/// (K = 1, a zero separation, or a zero sparsity/separation mean) receive
/// fitness 0, the minimum, rather than an error.
pub fn evaluate_fitness(part: &Partition, ds: &Dataset, idx: &NeighborIndex) -> FitnessBreakdown {
    let k = part.k();
    let n = ds.n();
    let assignment = part.assignment();
    let clusters = part.clusters();

    // One pass over all pairs yields both per-instance nearest-co-member
    // distances (for sparsity) and per-cluster separations.
    let mut nearest_co = vec![f64::INFINITY; n];
    let mut sep = vec![f64::INFINITY; k];
    for a in 0..n {
        for b in (a + 1)..n {
            let d = ds.euclidean(a, b);
            if assignment[a] == assignment[b] {
                if d < nearest_co[a] {
                    nearest_co[a] = d;
                }
                if d < nearest_co[b] {
                    nearest_co[b] = d;
                }
            } else {
                if d < sep[assignment[a]] {
                    sep[assignment[a]] = d;
                }
                if d < sep[assignment[b]] {
                    sep[assignment[b]] = d;
                }
            }
        }
    }
    let spar: Vec<f64> = clusters
        .iter()
        .map(|members| {
            if members.len() < 2 {
                0.0
            } else {
                members.iter().map(|&a| nearest_co[a]).fold(0.0, f64::max)
            }
        })
        .collect();
    let sep: Vec<f64> = sep
        .into_iter()
        .map(|s| if s.is_finite() { s } else { 0.0 })
        .collect();

    let conn = connectedness(part, idx);
    let degenerate = k == 1 || sep.iter().any(|&s| s == 0.0);
    let mean_spasep = if degenerate {
        0.0
    } else {
        spar.iter().zip(&sep).map(|(sp, se)| sp / se).sum::<f64>() / k as f64
    };
    let fitness = if mean_spasep > 0.0 { conn / mean_spasep } else { 0.0 };
    FitnessBreakdown {
        fitness,
        connectedness: conn,
        mean_spasep,
        sparsity: spar,
        separation: sep,
    }
}
