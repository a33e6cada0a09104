use rayon::prelude::*;

use super::matrix::FeatureMatrix;

/// Quantised copy of a feature matrix.
///
/// Bin 0 holds missing values. Bin `b >= 1` holds values in
/// `(edges[b-2], edges[b-1]]`, so a split "bin <= b" is the raw test
/// `x <= edges[b-1]`. When a feature has at most `n_bins` distinct values
/// every distinct value gets its own bin.
#[derive(Clone, Debug)]
pub struct BinnedMatrix {
    pub(crate) bins: Vec<Vec<u16>>,
    pub(crate) edges: Vec<Vec<f64>>,
    n_rows: usize,
}

impl BinnedMatrix {
    pub fn new(x: &FeatureMatrix, n_bins: usize) -> Self {
        let n_bins = n_bins.clamp(2, usize::from(u16::MAX) - 1);
        let (bins, edges) = x
            .columns()
            .par_iter()
            .map(|col| {
                let edges = bin_edges(col, n_bins);
                let bins = col.iter().map(|&v| bin_of(&edges, v)).collect();
                (bins, edges)
            })
            .unzip();
        Self {
            bins,
            edges,
            n_rows: x.n_rows(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.bins.len()
    }

    /// Number of bins of feature `f`, including the missing bin.
    pub fn n_bins(&self, f: usize) -> usize {
        self.edges[f].len() + 1
    }

    pub fn edges(&self, f: usize) -> &[f64] {
        &self.edges[f]
    }

    pub fn bin(&self, f: usize, row: usize) -> u16 {
        self.bins[f][row]
    }
}

fn bin_of(edges: &[f64], v: f64) -> u16 {
    if v.is_nan() {
        0
    } else {
        (edges.partition_point(|&e| e < v).min(edges.len().saturating_sub(1)) + 1) as u16
    }
}

fn bin_edges(col: &[f64], n_bins: usize) -> Vec<f64> {
    let mut vals: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
    if vals.is_empty() {
        return Vec::new();
    }
    vals.sort_by(f64::total_cmp);
    let mut distinct = vals.clone();
    distinct.dedup();
    if distinct.len() <= n_bins {
        return distinct;
    }
    let n = vals.len();
    let mut edges: Vec<f64> = (1..n_bins).map(|j| vals[(j * n / n_bins).min(n - 1)]).collect();
    edges.push(vals[n - 1]);
    edges.dedup();
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_values_get_own_bins() {
        let x = FeatureMatrix::new(vec!["a".into()], vec![vec![3.0, 1.0, f64::NAN, 2.0, 3.0]]).unwrap();
        let b = BinnedMatrix::new(&x, 255);
        assert_eq!(b.edges(0), &[1.0, 2.0, 3.0]);
        let bins: Vec<u16> = (0..5).map(|r| b.bin(0, r)).collect();
        assert_eq!(bins, vec![3, 1, 0, 2, 3]);
    }

    #[test]
    fn quantile_bins_respect_limit() {
        let col: Vec<f64> = (0..1000).map(f64::from).collect();
        let x = FeatureMatrix::new(vec!["a".into()], vec![col.clone()]).unwrap();
        let b = BinnedMatrix::new(&x, 16);
        assert!(b.n_bins(0) <= 17);
        for (r, v) in col.iter().enumerate() {
            let bin = b.bin(0, r) as usize;
            let e = b.edges(0);
            assert!(*v <= e[bin - 1]);
            if bin >= 2 {
                assert!(*v > e[bin - 2]);
            }
        }
    }
}
