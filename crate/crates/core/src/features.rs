//! Covariance-derived UE features: the CMD dissimilarity matrix, raw CMD
//! rows, a Laplacian-Eigenmaps channel chart, and the true-position baseline.

use std::io::Write;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::channel::CovarianceSet;
use crate::config::PositionFeatureKind;
use crate::linalg::CMatrix;
use crate::scenario::Scenario;
use crate::{Error, Result};

/// Re tr(AᴴB) accumulated elementwise, without forming the product.
fn trace_inner(a: &[crate::linalg::C64], b: &[crate::linalg::C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Covariance matrix distance 1 − tr(AᴴB)/(‖A‖_F‖B‖_F), clamped to [0, 1].
pub fn cmd(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::domain("cmd: matrix shapes differ"));
    }
    // Squared norms use the same summation as the cross term, so cmd(A, A)
    // is exactly zero and the value is exactly symmetric.
    let sa = trace_inner(a.as_slice(), a.as_slice());
    let sb = trace_inner(b.as_slice(), b.as_slice());
    if sa == 0.0 || sb == 0.0 {
        return Err(Error::domain("cmd: zero matrix has no normalisation"));
    }
    Ok(clamp_unit(1.0 - trace_inner(a.as_slice(), b.as_slice()) / (sa * sb).sqrt()))
}

fn clamp_unit(d: f64) -> f64 {
    debug_assert!(d > -1e-9 && d < 1.0 + 1e-9, "cmd out of range before clamp: {d}");
    d.clamp(0.0, 1.0)
}

/// Symmetric N×N matrix of pairwise CMD values with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix(pub DMatrix<f64>);

impl DissimilarityMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::domain("dissimilarity matrix must be square"));
        }
        for i in 0..n {
            if m[(i, i)] != 0.0 {
                return Err(Error::domain(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = m[(i, j)];
                if !(0.0..=1.0).contains(&v) || v != m[(j, i)] {
                    return Err(Error::domain(format!("entry ({i},{j}) = {v} invalid")));
                }
            }
        }
        Ok(Self(m))
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

/// Pairwise CMD over every UE. Only the sector blocks enter the inner
/// products since the cross-sector blocks are structurally zero.
pub fn dissimilarity_matrix(covs: &CovarianceSet) -> Result<DissimilarityMatrix> {
    let n = covs.len();
    if n < 2 {
        return Err(Error::domain("dissimilarity matrix needs at least two UEs"));
    }
    let m = covs.antennas_per_sector;
    // Sector blocks, flattened column-major.
    let blocks: Vec<Vec<Vec<crate::linalg::C64>>> = covs
        .matrices
        .iter()
        .map(|r| {
            (0..covs.num_sectors)
                .map(|s| r.view((s * m, s * m), (m, m)).iter().copied().collect())
                .collect()
        })
        .collect();
    let norms: Vec<f64> = covs.matrices.iter().map(|r| r.norm()).collect();
    if let Some(i) = norms.iter().position(|&x| x == 0.0) {
        return Err(Error::domain(format!("cmd: covariance of UE {i} is zero")));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if j <= i {
                        return 0.0;
                    }
                    let inner: f64 = blocks[i]
                        .iter()
                        .zip(&blocks[j])
                        .map(|(a, b)| trace_inner(a, b))
                        .sum();
                    clamp_unit(1.0 - inner / (norms[i] * norms[j]))
                })
                .collect()
        })
        .collect();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            d[(i, j)] = rows[i][j];
            d[(j, i)] = rows[i][j];
        }
    }
    Ok(DissimilarityMatrix(d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    CmdRow,
    Chart,
    Position,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::CmdRow => "cmd-row",
            FeatureKind::Chart => "chart",
            FeatureKind::Position => "position",
        }
    }
}

/// One feature vector per UE, stored as the rows of `vectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub kind: FeatureKind,
    pub vectors: DMatrix<f64>,
}

impl FeatureSet {
    pub fn new(kind: FeatureKind, vectors: DMatrix<f64>) -> Result<Self> {
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("feature vectors must be finite"));
        }
        Ok(Self { kind, vectors })
    }

    /// Build from per-UE rows; every row must have the same length.
    pub fn from_rows(kind: FeatureKind, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::domain(format!(
                "feature dimension mismatch: UE {i} has {} entries, expected {dim}",
                rows[i].len()
            )));
        }
        Self::new(kind, DMatrix::from_fn(rows.len(), dim, |i, c| rows[i][c]))
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn sq_distance(&self, i: usize, j: usize) -> f64 {
        (0..self.dim())
            .map(|c| (self.vectors[(i, c)] - self.vectors[(j, c)]).powi(2))
            .sum()
    }

    /// Text export in the matrix format: header `features KIND N DIM`, then
    /// one line of DIM values per UE.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "features {} {} {}", self.kind.as_str(), self.len(), self.dim())?;
        for i in 0..self.len() {
            let row: Vec<String> = self.vectors.row(i).iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    /// CSV with header `ue_index,coord_1,...,coord_C`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|c| format!("coord_{c}")).collect();
        writeln!(w, "ue_index,{}", header.join(","))?;
        for i in 0..self.len() {
            let row: Vec<String> = self.vectors.row(i).iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{i},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// f_n = n-th row of D.
pub fn cmd_feature(d: &DissimilarityMatrix) -> FeatureSet {
    FeatureSet {
        kind: FeatureKind::CmdRow,
        vectors: d.0.clone(),
    }
}

pub fn position_feature(scenario: &Scenario, kind: PositionFeatureKind) -> FeatureSet {
    let vectors = DMatrix::from_fn(scenario.users.len(), 2, |i, c| {
        let u = &scenario.users[i];
        match kind {
            PositionFeatureKind::Cartesian => u.position[c],
            PositionFeatureKind::Azimuth => {
                let a = u.azimuth();
                if c == 0 {
                    a.cos()
                } else {
                    a.sin()
                }
            }
        }
    });
    FeatureSet {
        kind: FeatureKind::Position,
        vectors,
    }
}

/// Indices of the `k` nearest neighbours of `i` under row `i` of `d`,
/// excluding `i`; ties go to the lower index.
fn nearest(d: &DMatrix<f64>, i: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..d.nrows()).filter(|&j| j != i).collect();
    others.sort_by(|&a, &b| d[(i, a)].total_cmp(&d[(i, b)]).then(a.cmp(&b)));
    others.truncate(k);
    others
}

fn components(adj: &DMatrix<f64>) -> Vec<usize> {
    let n = adj.nrows();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        label[start] = next;
        while let Some(v) = stack.pop() {
            for w in 0..n {
                if adj[(v, w)] != 0.0 && label[w] == usize::MAX {
                    label[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    label
}

/// Laplacian Eigenmaps on a binary ν-nearest-neighbour graph built from `d`.
///
/// Solves Λf = μ·Deg·f with Λ = Deg − W and returns eigenvectors 2..=C+1
/// (ascending μ) as chart coordinates, each scaled to unit norm with its
/// first nonzero entry positive.
pub fn laplacian_eigenmaps(
    d: &DissimilarityMatrix,
    neighbors: usize,
    chart_dim: usize,
) -> Result<FeatureSet> {
    let n = d.len();
    if neighbors < 1 || neighbors >= n {
        return Err(Error::domain(format!("neighbour count {neighbors} outside 1..{n}")));
    }
    if chart_dim < 1 || chart_dim + 2 > n {
        return Err(Error::domain(format!("chart dimension {chart_dim} outside 1..={}", n - 2)));
    }

    let mut w = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in nearest(&d.0, i, neighbors) {
            w[(i, j)] = 1.0;
            w[(j, i)] = 1.0;
        }
    }

    let labels = components(&w);
    let num_comp = labels.iter().copied().max().map_or(0, |m| m + 1);
    if num_comp > 1 {
        let mut bridges = Vec::new();
        for a in 0..num_comp {
            for b in (a + 1)..num_comp {
                let mut best: Option<(f64, usize, usize)> = None;
                for i in (0..n).filter(|&i| labels[i] == a) {
                    for j in (0..n).filter(|&j| labels[j] == b) {
                        let v = d.get(i, j);
                        if best.is_none_or(|(bv, _, _)| v < bv) {
                            best = Some((v, i, j));
                        }
                    }
                }
                if let Some((v, i, j)) = best {
                    w[(i, j)] = 1.0;
                    w[(j, i)] = 1.0;
                    bridges.push((i, j, v));
                }
            }
        }
        log::info!(
            "neighbour graph had {num_comp} components; bridged with edges {:?}",
            bridges
        );
    }

    let degree: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    let inv_sqrt: Vec<f64> = degree.iter().map(|g| 1.0 / g.sqrt()).collect();
    // Deg^{-1/2} Λ Deg^{-1/2} = I − Deg^{-1/2} W Deg^{-1/2}.
    let sym = DMatrix::from_fn(n, n, |i, j| {
        let off = -w[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
        if i == j {
            1.0 + off
        } else {
            off
        }
    });
    let eig = SymmetricEigen::try_new(sym, 1e-14, 10_000).ok_or_else(|| {
        Error::Numerical(format!(
            "Laplacian eigen-solve did not converge (n = {n}, edges = {})",
            w.iter().filter(|&&x| x != 0.0).count() / 2
        ))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));

    let mut chart = DMatrix::zeros(n, chart_dim);
    for (c, &idx) in order[1..=chart_dim].iter().enumerate() {
        let mut f: Vec<f64> = (0..n).map(|i| eig.eigenvectors[(i, idx)] * inv_sqrt[i]).collect();
        let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
        let tol = 1e-12 * f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let sign = f
            .iter()
            .find(|x| x.abs() > tol)
            .map_or(1.0, |x| x.signum());
        for x in f.iter_mut() {
            *x *= sign / norm;
        }
        chart.set_column(c, &nalgebra::DVector::from_vec(f));
    }
    FeatureSet::new(FeatureKind::Chart, chart)
}

/// Trustworthiness of a chart's k-neighbourhoods against a reference
/// dissimilarity matrix; 1 means no intruders.
pub fn chart_quality(chart: &FeatureSet, reference: &DissimilarityMatrix, k: usize) -> f64 {
    let n = chart.len();
    if n < 2 || k == 0 {
        return 1.0;
    }
    let k = k.min(n - 1);
    let chart_d = DMatrix::from_fn(n, n, |i, j| chart.sq_distance(i, j));
    let penalty: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut ranked: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            ranked.sort_by(|&a, &b| reference.get(i, a).total_cmp(&reference.get(i, b)).then(a.cmp(&b)));
            let mut rank = vec![0usize; n];
            for (r, &j) in ranked.iter().enumerate() {
                rank[j] = r + 1;
            }
            nearest(&chart_d, i, k)
                .into_iter()
                .filter(|&j| rank[j] > k)
                .map(|j| (rank[j] - k) as f64)
                .sum::<f64>()
        })
        .sum();
    // Worst case: every point's intruders are its m farthest reference points.
    let m = k.min(n - 1 - k) as f64;
    let (nf, kf) = (n as f64, k as f64);
    let worst = nf * m * (2.0 * nf - m - 1.0 - 2.0 * kf) / 2.0;
    if worst <= 0.0 {
        return 1.0;
    }
    (1.0 - penalty / worst).clamp(0.0, 1.0)
}

/// Per-scenario state shared by every assignment method: the covariances
/// plus lazily computed dissimilarities and chart.
#[derive(Debug)]
pub struct FeatureContext {
    pub scenario: Scenario,
    pub covariances: CovarianceSet,
    dissimilarity: OnceLock<DissimilarityMatrix>,
    chart: OnceLock<FeatureSet>,
}

impl FeatureContext {
    pub fn new(scenario: Scenario, covariances: CovarianceSet) -> Self {
        Self {
            scenario,
            covariances,
            dissimilarity: OnceLock::new(),
            chart: OnceLock::new(),
        }
    }

    pub fn build(scenario: Scenario) -> Self {
        let covs = CovarianceSet::compute(&scenario);
        Self::new(scenario, covs)
    }

    pub fn dissimilarity(&self) -> Result<&DissimilarityMatrix> {
        if let Some(d) = self.dissimilarity.get() {
            return Ok(d);
        }
        let d = dissimilarity_matrix(&self.covariances)?;
        Ok(self.dissimilarity.get_or_init(|| d))
    }

    pub fn chart(&self) -> Result<&FeatureSet> {
        if let Some(c) = self.chart.get() {
            return Ok(c);
        }
        let cfg = &self.scenario.config;
        let c = laplacian_eigenmaps(self.dissimilarity()?, cfg.chart_neighbors, cfg.chart_dim)?;
        Ok(self.chart.get_or_init(|| c))
    }

    pub fn position(&self) -> FeatureSet {
        position_feature(&self.scenario, self.scenario.config.position_feature)
    }
}
