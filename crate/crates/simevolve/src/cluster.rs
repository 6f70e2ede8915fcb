//! Graph-based clustering driven by an evolved similarity function: each
//! instance gains one edge to its most-similar candidate among its `l`
//! Euclidean-nearest neighbours; connected components become clusters.

use std::io::Write;

use rayon::prelude::*;

use crate::data::{Dataset, NeighborIndex};
use crate::expr::Individual;

/// A dense cluster assignment: ids are exactly `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Builds a partition from arbitrary labels, remapping them to dense ids
    /// numbered by first occurrence (i.e. by smallest member instance id).
    pub fn from_labels(labels: &[usize]) -> Partition {
        let mut map = std::collections::HashMap::new();
        let mut assignment = Vec::with_capacity(labels.len());
        for &label in labels {
            let next = map.len();
            let id = *map.entry(label).or_insert(next);
            assignment.push(id);
        }
        Partition {
            assignment,
            k: map.len(),
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    /// Member instance ids per cluster.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "instance_id,cluster_id")?;
        for (i, &c) in self.assignment.iter().enumerate() {
            writeln!(w, "{i},{c}")?;
        }
        Ok(())
    }

    /// Parses the `instance_id,cluster_id` CSV written by `write_csv`. Rows
    /// may appear in any order; instance ids must cover exactly `0..n`.
    pub fn parse_csv(text: &str) -> crate::error::Result<Partition> {
        use crate::error::Error;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "instance_id,cluster_id" => {}
            _ => {
                return Err(Error::parse(
                    "line 1",
                    "expected header 'instance_id,cluster_id'",
                ))
            }
        }
        let mut rows: Vec<(usize, usize)> = Vec::new();
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let loc = format!("line {}", lineno + 1);
            let mut parts = line.split(',');
            let (a, b) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => return Err(Error::parse(loc, "expected two comma-separated fields")),
            };
            let inst: usize = a
                .trim()
                .parse()
                .map_err(|_| Error::parse(loc.clone(), format!("bad instance id {a:?}")))?;
            let clu: usize = b
                .trim()
                .parse()
                .map_err(|_| Error::parse(&loc, format!("bad cluster id {b:?}")))?;
            rows.push((inst, clu));
        }
        let n = rows.len();
        let mut labels = vec![usize::MAX; n];
        for (inst, clu) in rows {
            if inst >= n || labels[inst] != usize::MAX {
                return Err(Error::parse(
                    "body",
                    format!("instance ids must cover 0..{n} exactly once"),
                ));
            }
            labels[inst] = clu;
        }
        if n == 0 {
            return Err(Error::parse("body", "no assignment rows"));
        }
        Ok(Partition::from_labels(&labels))
    }
}

/// One chosen edge per instance, undirected, plus the number of similarity
/// evaluations spent choosing them.
#[derive(Debug, Clone)]
pub struct EdgeSet {
    pub edges: Vec<(usize, usize)>,
    pub eval_count: usize,
}

/// Orders similarity values for the argmax: any non-finite value ranks below
/// every finite one, and earlier candidates win ties.
fn better(candidate: f64, best: f64) -> bool {
    match (candidate.is_finite(), best.is_finite()) {
        (true, true) => candidate > best,
        (true, false) => true,
        _ => false,
    }
}

/// Adds, for each instance, an undirected edge to its `edges_per_instance`
/// most similar candidates among its `l` nearest neighbours. The default
/// behaviour is one edge per instance; see [`build_edges`].
pub fn build_edges_multi(
    ind: &Individual,
    ds: &Dataset,
    idx: &NeighborIndex,
    edges_per_instance: usize,
) -> EdgeSet {
    let n = ds.n();
    let per_instance: Vec<(Vec<usize>, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let candidates = idx.edge_candidates(i);
            let mut scored: Vec<(usize, f64)> = candidates
                .iter()
                .map(|&(j, _)| (j, ind.eval(ds, i, j)))
                .collect();
            // Stable selection sort by the argmax rule keeps the tie
            // behaviour (earlier neighbour wins) for every rank.
            let take = edges_per_instance.min(scored.len());
            let mut chosen = Vec::with_capacity(take);
            for _ in 0..take {
                let mut best = 0;
                for c in 1..scored.len() {
                    if better(scored[c].1, scored[best].1) {
                        best = c;
                    }
                }
                chosen.push(scored.remove(best).0);
            }
            (chosen, candidates.len())
        })
        .collect();
    let mut edges = Vec::with_capacity(n * edges_per_instance);
    let mut eval_count = 0;
    for (i, (chosen, evals)) in per_instance.into_iter().enumerate() {
        eval_count += evals;
        for j in chosen {
            edges.push((i, j));
        }
    }
    EdgeSet { edges, eval_count }
}

/// One edge per instance, to the argmax-similarity neighbour among its `l`
/// Euclidean-nearest candidates. Performs exactly `n * l` evaluations.
pub fn build_edges(ind: &Individual, ds: &Dataset, idx: &NeighborIndex) -> EdgeSet {
    build_edges_multi(ind, ds, idx, 1)
}

/// Connected components of the undirected graph, numbered by smallest member
/// instance id.
pub fn components(edges: &[(usize, usize)], n: usize) -> Partition {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut assignment = vec![usize::MAX; n];
    let mut k = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if assignment[start] != usize::MAX {
            continue;
        }
        stack.push(start);
        assignment[start] = k;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if assignment[w] == usize::MAX {
                    assignment[w] = k;
                    stack.push(w);
                }
            }
        }
        k += 1;
    }
    Partition { assignment, k }
}

/// Full Algorithm-1 pipeline: edge building then component extraction.
pub fn cluster(ind: &Individual, ds: &Dataset, idx: &NeighborIndex) -> Partition {
    let edges = build_edges(ind, ds, idx);
    components(&edges.edges, ds.n())
}
