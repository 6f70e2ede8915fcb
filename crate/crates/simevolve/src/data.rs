//! Dataset representation, min-max scaling, CSV I/O, and the precomputed
//! Euclidean neighbour index shared by the clustering engine and the fitness
//! function.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// An n x m matrix of feature values, optionally carrying gold cluster labels.
///
/// Feature values are stored row-major. Scaling to `[0,1]` is explicit via
/// [`Dataset::scale_unit`]; nothing here assumes it has happened.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n: usize,
    m: usize,
    gold_labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn from_rows(rows: Vec<Vec<f64>>, gold_labels: Option<Vec<usize>>) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::Config(format!("need at least 2 instances, got {n}")));
        }
        let m = rows[0].len();
        if m < 1 {
            return Err(Error::Config("need at least 1 feature".into()));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::Config(format!(
                "row {bad} has {} columns, expected {m}",
                rows[bad].len()
            )));
        }
        if let Some(labels) = &gold_labels {
            if labels.len() != n {
                return Err(Error::Config(format!(
                    "{} labels for {n} instances",
                    labels.len()
                )));
            }
        }
        let mut features = Vec::with_capacity(n * m);
        for row in rows {
            features.extend_from_slice(&row);
        }
        Ok(Dataset {
            features,
            n,
            m,
            gold_labels,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.m..(i + 1) * self.m]
    }

    pub fn gold_labels(&self) -> Option<&[usize]> {
        self.gold_labels.as_deref()
    }

    /// Euclidean distance between instances `a` and `b`.
    pub fn euclidean(&self, a: usize, b: usize) -> f64 {
        let (ra, rb) = (self.row(a), self.row(b));
        ra.iter()
            .zip(rb)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// Linearly maps every feature column onto `[0,1]`. Columns with zero
    /// range become all-zeros. Idempotent.
    pub fn scale_unit(&self) -> Dataset {
        let mut out = self.clone();
        for f in 0..self.m {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in 0..self.n {
                let v = self.features[i * self.m + f];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let range = hi - lo;
            for i in 0..self.n {
                let v = &mut out.features[i * self.m + f];
                *v = if range == 0.0 { 0.0 } else { (*v - lo) / range };
            }
        }
        out
    }

    /// Reads a comma-separated file. A non-numeric first line is treated as a
    /// header and skipped. With `has_labels`, the last column is parsed as
    /// integer gold labels.
    pub fn load_csv(path: impl AsRef<Path>, has_labels: bool) -> Result<Dataset> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let reader = BufReader::new(file);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut labels: Vec<usize> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            // Header detection: first line whose first cell is not numeric.
            if rows.is_empty() && lineno == 0 && cells[0].parse::<f64>().is_err() {
                continue;
            }
            let data_row = lineno + 1;
            let ncols = if has_labels { cells.len() - 1 } else { cells.len() };
            if has_labels && cells.len() < 2 {
                return Err(Error::parse(
                    format!("row {data_row}"),
                    "labelled row needs at least one feature and a label",
                ));
            }
            let mut row = Vec::with_capacity(ncols);
            for (col, cell) in cells[..ncols].iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::parse(
                        format!("row {data_row}, column {}", col + 1),
                        format!("expected a number, got {cell:?}"),
                    )
                })?;
                if !v.is_finite() {
                    return Err(Error::parse(
                        format!("row {data_row}, column {}", col + 1),
                        format!("non-finite value {cell:?}"),
                    ));
                }
                row.push(v);
            }
            if has_labels {
                let cell = cells[ncols];
                let label: usize = cell.parse().map_err(|_| {
                    Error::parse(
                        format!("row {data_row}, column {}", ncols + 1),
                        format!("expected an integer label, got {cell:?}"),
                    )
                })?;
                labels.push(label);
            }
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(Error::parse(
                        format!("row {data_row}"),
                        format!("ragged row: {} columns, expected {}", row.len(), first.len()),
                    ));
                }
            }
            rows.push(row);
        }
        Dataset::from_rows(rows, if has_labels { Some(labels) } else { None })
    }

    /// Writes the dataset as CSV with full round-trip float precision; the
    /// label column comes last when present.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let mut header: Vec<String> = (0..self.m).map(|f| format!("f{f}")).collect();
        if self.gold_labels.is_some() {
            header.push("label".to_string());
        }
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.n {
            let mut cells: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            if let Some(labels) = &self.gold_labels {
                cells.push(labels[i].to_string());
            }
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Smallest integer `l` with `l^3 >= n`, i.e. the ceiling of the cube root.
fn ceil_cbrt(n: usize) -> usize {
    let mut l = 1usize;
    while (l as u128).pow(3) < n as u128 {
        l += 1;
    }
    l
}

/// Candidate-neighbourhood size for edge building: `max(2, ceil(cbrt(n)))`,
/// clamped to `n - 1`.
pub fn neighborhood_size(n: usize) -> usize {
    ceil_cbrt(n).max(2).min(n - 1)
}

/// Neighbourhood size for the connectedness measure: `min(10, n - 1)`.
pub fn connectedness_size(n: usize) -> usize {
    10.min(n - 1)
}

/// Per-instance Euclidean nearest neighbours, sorted ascending by
/// `(distance, id)`. One list of length `max(l, c_eff)` serves both the edge
/// builder (first `l` entries) and connectedness (first `c_eff` entries).
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    l: usize,
    c_eff: usize,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl NeighborIndex {
    pub fn build(ds: &Dataset) -> NeighborIndex {
        let n = ds.n();
        let l = neighborhood_size(n);
        let c_eff = connectedness_size(n);
        let keep = l.max(c_eff);
        let mut neighbors = Vec::with_capacity(n);
        for i in 0..n {
            let mut all: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, ds.euclidean(i, j)))
                .collect();
            all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            all.truncate(keep);
            neighbors.push(all);
        }
        NeighborIndex { l, c_eff, neighbors }
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn c_eff(&self) -> usize {
        self.c_eff
    }

    /// First `l` neighbours of `i`, for edge building.
    pub fn edge_candidates(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i][..self.l.min(self.neighbors[i].len())]
    }

    /// First `c_eff` neighbours of `i`, for connectedness.
    pub fn connectedness_neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i][..self.c_eff.min(self.neighbors[i].len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[&[f64]]) -> Dataset {
        Dataset::from_rows(rows.iter().map(|r| r.to_vec()).collect(), None).unwrap()
    }

    #[test]
    fn scale_maps_column_linearly() {
        let d = ds(&[&[2.0], &[4.0], &[6.0]]).scale_unit();
        assert_eq!(d.row(0), &[0.0]);
        assert_eq!(d.row(1), &[0.5]);
        assert_eq!(d.row(2), &[1.0]);
    }

    #[test]
    fn scale_constant_column_to_zero() {
        let d = ds(&[&[5.0], &[5.0], &[5.0]]).scale_unit();
        for i in 0..3 {
            assert_eq!(d.row(i), &[0.0]);
        }
    }

    #[test]
    fn scale_is_idempotent_on_unit_column() {
        let d = ds(&[&[0.0], &[0.25], &[1.0]]);
        assert_eq!(d.scale_unit(), d);
    }

    #[test]
    fn euclidean_345() {
        let d = ds(&[&[0.0, 0.0], &[3.0, 4.0]]);
        assert_eq!(d.euclidean(0, 1), 5.0);
        assert_eq!(d.euclidean(1, 0), 5.0);
        assert_eq!(d.euclidean(0, 0), 0.0);
    }

    #[test]
    fn euclidean_1d() {
        let d = ds(&[&[0.1], &[0.4]]);
        assert!((d.euclidean(0, 1) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn neighborhood_size_examples() {
        assert_eq!(neighborhood_size(27), 3);
        assert_eq!(neighborhood_size(4), 2); // floor rule: l is at least 2
        assert_eq!(neighborhood_size(2), 1); // clamped to n-1
        assert_eq!(neighborhood_size(2903), 15);
    }

    #[test]
    fn load_csv_basic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "0,0\n1,1\n2,2\n").unwrap();
        let d = Dataset::load_csv(&path, false).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.m(), 2);
    }

    #[test]
    fn load_csv_bad_cell() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "a,b\n").unwrap();
        // A non-numeric sole line is taken as a header; with nothing after it
        // the dataset is empty and rejected.
        assert!(Dataset::load_csv(&path, false).is_err());
        std::fs::write(&path, "1,2\na,b\n").unwrap();
        let err = Dataset::load_csv(&path, false).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn load_csv_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "1,0\n2,0\n3,1\n4,1\n").unwrap();
        let d = Dataset::load_csv(&path, true).unwrap();
        assert_eq!(d.m(), 1);
        assert_eq!(d.gold_labels(), Some(&[0, 0, 1, 1][..]));
    }

    #[test]
    fn load_csv_header_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "x,y\n0,0\n1,1\n").unwrap();
        let d = Dataset::load_csv(&path, false).unwrap();
        assert_eq!(d.n(), 2);
    }

    #[test]
    fn neighbor_lists_match_brute_force() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let n = rng.random_range(2..60);
            let m = rng.random_range(1..4);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| rng.random::<f64>()).collect())
                .collect();
            let d = Dataset::from_rows(rows, None).unwrap();
            let idx = NeighborIndex::build(&d);
            let keep = idx.l().max(idx.c_eff());
            for i in 0..n {
                let mut full: Vec<(usize, f64)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (j, d.euclidean(i, j)))
                    .collect();
                full.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
                full.truncate(keep);
                let got: Vec<(usize, f64)> = idx.neighbors[i].clone();
                assert_eq!(got, full);
                assert!(got.iter().all(|&(j, _)| j != i));
            }
        }
    }
}
