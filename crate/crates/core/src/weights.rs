//! Binary symmetric contiguity structures.
//!
//! A [`SpatialWeights`] holds the undirected neighbour graph behind the
//! 0/1 weight matrix `W` (zero diagonal, never row-standardised). The
//! eigenvalues of the dense matrix are computed lazily and cached, since
//! every log-determinant `ln|I - rho W| = sum ln(1 - rho * lambda_i)` is
//! evaluated from them.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative margin kept away from the singular endpoints `1/lambda`.
pub const ADMISSIBLE_MARGIN: f64 = 1e-6;

/// Ordered external unit identifiers with inverse lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitIndexMap {
    ids: Vec<String>,
    position: HashMap<String, usize>,
}

impl UnitIndexMap {
    pub fn new<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let ids: Vec<String> = ids.into_iter().map(Into::into).collect();
        let mut position = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if position.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateUnitId(id.clone()));
            }
        }
        Ok(Self { ids, position })
    }

    /// Identifiers `"0"`, `"1"`, ... for anonymous units.
    pub fn sequential(n: usize) -> Self {
        Self::new((0..n).map(|i| i.to_string())).expect("sequential ids are unique")
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.position.get(id).copied()
    }
}

#[derive(Debug, Clone)]
pub struct SpatialWeights {
    n: usize,
    neighbors: Vec<Vec<usize>>,
    n_edges: usize,
    spectrum: OnceLock<Vec<f64>>,
}

impl PartialEq for SpatialWeights {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.neighbors == other.neighbors
    }
}

impl SpatialWeights {
    /// Builds the graph from index pairs. Duplicates and both orientations
    /// collapse onto one unordered edge.
    pub fn from_index_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for (i, j) in pairs {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, len: n });
            }
            if i == j {
                return Err(Error::SelfLoop(i.to_string()));
            }
            sets[i].insert(j);
            sets[j].insert(i);
        }
        Ok(Self::from_sets(sets))
    }

    fn from_sets(sets: Vec<BTreeSet<usize>>) -> Self {
        let n = sets.len();
        let neighbors: Vec<Vec<usize>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let n_edges = neighbors.iter().map(Vec::len).sum::<usize>() / 2;
        Self {
            n,
            neighbors,
            n_edges,
            spectrum: OnceLock::new(),
        }
    }

    pub fn empty(n: usize) -> Self {
        Self::from_sets(vec![BTreeSet::new(); n])
    }

    /// Edges given as pairs of external identifiers.
    pub fn from_adjacency_list<S: AsRef<str>>(pairs: &[(S, S)], index: &UnitIndexMap) -> Result<Self> {
        let mut idx = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            let (a, b) = (a.as_ref(), b.as_ref());
            let i = index
                .position(a)
                .ok_or_else(|| Error::UnknownUnitId(a.to_owned()))?;
            let j = index
                .position(b)
                .ok_or_else(|| Error::UnknownUnitId(b.to_owned()))?;
            if i == j {
                return Err(Error::SelfLoop(a.to_owned()));
            }
            idx.push((i, j));
        }
        Self::from_index_pairs(index.len(), idx)
    }

    /// Reads a whitespace-separated adjacency list (`#` starts a comment line).
    pub fn read_adjacency_file(path: impl AsRef<Path>, index: &UnitIndexMap) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let pairs = parse_adjacency(&text)?;
        Self::from_adjacency_list(&pairs, index)
    }

    /// Symmetrised k-nearest-neighbour graph: `{i, j}` is an edge when either
    /// unit is among the other's `k` nearest. Distance ties are broken by
    /// index order; the second value lists coincident unit pairs, for which
    /// that tie-break decided the ranking.
    pub fn from_knn(coords: &[[f64; 2]], k: usize) -> Result<(Self, Vec<(usize, usize)>)> {
        let n = coords.len();
        if k == 0 || k >= n {
            return Err(Error::KTooLarge { k, n });
        }
        if let Some(i) = coords.iter().position(|c| !c[0].is_finite() || !c[1].is_finite()) {
            return Err(Error::NonFiniteCoordinate(i));
        }
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let mut coincident = Vec::new();
        let mut order: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
        for i in 0..n {
            order.clear();
            for j in (0..n).filter(|&j| j != i) {
                let dx = coords[i][0] - coords[j][0];
                let dy = coords[i][1] - coords[j][1];
                let d2 = dx * dx + dy * dy;
                if d2 == 0.0 && i < j {
                    coincident.push((i, j));
                }
                order.push((d2, j));
            }
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, j) in order.iter().take(k) {
                sets[i].insert(j);
                sets[j].insert(i);
            }
        }
        Ok((Self::from_sets(sets), coincident))
    }

    /// Rook contiguity on a `rows x cols` grid, unit index `r * cols + c`.
    pub fn lattice(rows: usize, cols: usize) -> Self {
        let mut pairs = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if c + 1 < cols {
                    pairs.push((i, i + 1));
                }
                if r + 1 < rows {
                    pairs.push((i, i + cols));
                }
            }
        }
        Self::from_index_pairs(rows * cols, pairs).expect("lattice pairs are valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn is_edgeless(&self) -> bool {
        self.n_edges == 0
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.n && self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Unordered edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// `W v`.
    pub fn lag(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "lag: vector length mismatch");
        self.neighbors
            .iter()
            .map(|nb| nb.iter().map(|&j| v[j]).sum())
            .collect()
    }

    /// `W X`, column by column.
    pub fn lag_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.n, "lag_matrix: row count mismatch");
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for c in 0..x.ncols() {
            for (i, nb) in self.neighbors.iter().enumerate() {
                out[(i, c)] = nb.iter().map(|&j| x[(j, c)]).sum();
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j) in self.edges() {
            m[(i, j)] = 1.0;
            m[(j, i)] = 1.0;
        }
        m
    }

    /// Principal subgraph on `members`, re-indexed in the given order.
    pub fn restrict(&self, members: &[usize]) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut local = vec![usize::MAX; self.n];
        for (pos, &g) in members.iter().enumerate() {
            if g >= self.n {
                return Err(Error::IndexOutOfRange { index: g, len: self.n });
            }
            local[g] = pos;
        }
        let sets = members
            .iter()
            .map(|&g| {
                self.neighbors[g]
                    .iter()
                    .filter_map(|&j| (local[j] != usize::MAX).then_some(local[j]))
                    .collect::<BTreeSet<usize>>()
            })
            .collect();
        Ok(Self::from_sets(sets))
    }

    /// Eigenvalues of the dense 0/1 matrix, ascending. Computed once.
    pub fn spectrum(&self) -> &[f64] {
        self.spectrum.get_or_init(|| {
            if self.n_edges == 0 {
                return vec![0.0; self.n];
            }
            let eig = SymmetricEigen::new(self.to_dense());
            let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            values.sort_by(f64::total_cmp);
            values
        })
    }

    /// Open interval `(1/lambda_min, 1/lambda_max)` in which `I - rho W` stays
    /// nonsingular, or `None` for an edgeless graph.
    pub fn admissible_interval(&self) -> Option<(f64, f64)> {
        if self.n_edges == 0 {
            return None;
        }
        let s = self.spectrum();
        Some((1.0 / s[0], 1.0 / s[s.len() - 1]))
    }

    /// The admissible interval shrunk by [`ADMISSIBLE_MARGIN`] at both ends.
    pub fn search_interval(&self) -> Option<(f64, f64)> {
        self.admissible_interval()
            .map(|(lo, hi)| (lo * (1.0 - ADMISSIBLE_MARGIN), hi * (1.0 - ADMISSIBLE_MARGIN)))
    }

    pub fn check_spatial_param(&self, rho: f64) -> Result<()> {
        let ok = match self.admissible_interval() {
            None => rho == 0.0,
            Some((lo, hi)) => rho > lo && rho < hi,
        };
        if ok && rho.is_finite() {
            Ok(())
        } else {
            let (lower, upper) = self.admissible_interval().unwrap_or((0.0, 0.0));
            Err(Error::SpatialParamOutOfRange { value: rho, lower, upper })
        }
    }

    /// `ln|det(I - rho W)|` from the cached spectrum.
    pub fn log_det(&self, rho: f64) -> Result<f64> {
        self.check_spatial_param(rho)?;
        if rho == 0.0 {
            return Ok(0.0);
        }
        Ok(self.spectrum().iter().map(|&l| (1.0 - rho * l).ln()).sum())
    }

    /// `d/drho ln|det(I - rho W)|` (caller guarantees admissibility).
    pub(crate) fn log_det_derivative(&self, rho: f64) -> f64 {
        if self.n_edges == 0 {
            return 0.0;
        }
        -self.spectrum().iter().map(|&l| l / (1.0 - rho * l)).sum::<f64>()
    }
}

/// Parses adjacency text into id pairs.
pub fn parse_adjacency(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => pairs.push((a.to_owned(), b.to_owned())),
            _ => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected two unit ids, got {line:?}"),
                })
            }
        }
    }
    Ok(pairs)
}

/// Writes the adjacency-list text format, one `i<j` edge per line.
pub fn format_adjacency(w: &SpatialWeights, index: &UnitIndexMap) -> String {
    let mut out = String::new();
    for (i, j) in w.edges() {
        out.push_str(index.id(i));
        out.push(' ');
        out.push_str(index.id(j));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[&str]) -> UnitIndexMap {
        UnitIndexMap::new(v.iter().copied()).unwrap()
    }

    #[test]
    fn adjacency_dedups_both_orientations() {
        let index = ids(&["A", "B", "C"]);
        let w = SpatialWeights::from_adjacency_list(&[("A", "B"), ("B", "A"), ("B", "C")], &index).unwrap();
        assert_eq!(w.n_edges(), 2);
        assert_eq!(w.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn adjacency_errors() {
        let index = ids(&["A", "B"]);
        let empty: [(&str, &str); 0] = [];
        assert_eq!(SpatialWeights::from_adjacency_list(&empty, &index).unwrap().n_edges(), 0);
        assert!(matches!(
            SpatialWeights::from_adjacency_list(&[("A", "A")], &index),
            Err(Error::SelfLoop(_))
        ));
        assert!(matches!(
            SpatialWeights::from_adjacency_list(&[("A", "Z")], &index),
            Err(Error::UnknownUnitId(id)) if id == "Z"
        ));
        assert!(matches!(UnitIndexMap::new(["A", "A"]), Err(Error::DuplicateUnitId(_))));
    }

    #[test]
    fn adjacency_text_skips_comments() {
        let pairs = parse_adjacency("# header\nA B\n\n  B   C  \n# end\n").unwrap();
        assert_eq!(pairs.len(), 2);
        assert!(matches!(parse_adjacency("A B C\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn knn_collinear() {
        let coords = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let (w, ties) = SpatialWeights::from_knn(&coords, 1).unwrap();
        assert!(ties.is_empty());
        // unit 1 is equidistant to 0 and 2; index order picks 0, but 2 picks 1
        assert_eq!(w.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn knn_unit_square() {
        // corners in order (0,0), (1,0), (1,1), (0,1); each has two adjacent
        // corners at distance 1 and the diagonal at sqrt 2
        let coords = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let (w, _) = SpatialWeights::from_knn(&coords, 1).unwrap();
        // 0 -> 1, 1 -> 0, 2 -> 1, 3 -> 0 under index tie-break
        assert_eq!(w.edges().collect::<Vec<_>>(), vec![(0, 1), (0, 3), (1, 2)]);
        for (i, j) in w.edges() {
            let d = ((coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2)).sqrt();
            assert_eq!(d, 1.0);
        }
    }

    #[test]
    fn knn_errors_and_coincident() {
        let coords = [[0.0, 0.0], [0.0, 0.0], [3.0, 0.0]];
        assert!(matches!(SpatialWeights::from_knn(&coords, 3), Err(Error::KTooLarge { .. })));
        let (_, ties) = SpatialWeights::from_knn(&coords, 1).unwrap();
        assert_eq!(ties, vec![(0, 1)]);
        assert!(matches!(
            SpatialWeights::from_knn(&[[0.0, f64::NAN], [1.0, 1.0]], 1),
            Err(Error::NonFiniteCoordinate(0))
        ));
    }

    #[test]
    fn restrict_path() {
        let w = SpatialWeights::from_index_pairs(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(w.restrict(&[0, 2]).unwrap().n_edges(), 0);
        assert_eq!(w.restrict(&[0, 1]).unwrap().n_edges(), 1);
        assert!(matches!(w.restrict(&[]), Err(Error::EmptySubset)));
        assert_eq!(w.restrict(&[0, 1, 2]).unwrap(), w);
    }

    #[test]
    fn restrict_lattice_columns_matches_enumeration() {
        let w = SpatialWeights::lattice(5, 5);
        let members: Vec<usize> = (0..25).filter(|i| i % 5 < 3).collect();
        let sub = w.restrict(&members).unwrap();
        // brute force: count rook pairs with both endpoints in the left 3 columns
        let mut expected = 0;
        for a in 0..25usize {
            for b in (a + 1)..25usize {
                let (ra, ca, rb, cb) = (a / 5, a % 5, b / 5, b % 5);
                let adjacent = ra.abs_diff(rb) + ca.abs_diff(cb) == 1;
                if adjacent && ca < 3 && cb < 3 {
                    expected += 1;
                }
            }
        }
        assert_eq!(expected, 22);
        assert_eq!(sub.n_edges(), expected);
    }

    #[test]
    fn spectra() {
        assert_eq!(SpatialWeights::empty(3).spectrum(), &[0.0, 0.0, 0.0]);
        let s = SpatialWeights::from_index_pairs(2, [(0, 1)]).unwrap();
        let v = s.spectrum();
        assert!((v[0] + 1.0).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12);
        // C3 adjacency: (x - 2)(x + 1)^2
        let c3 = SpatialWeights::from_index_pairs(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        let v = c3.spectrum();
        for (a, b) in v.iter().zip([-1.0, -1.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn admissible_interval_edges() {
        let w = SpatialWeights::from_index_pairs(2, [(0, 1)]).unwrap();
        let (lo, hi) = w.admissible_interval().unwrap();
        assert!((lo + 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        assert!(matches!(w.log_det(1.0), Err(Error::SpatialParamOutOfRange { .. })));
        assert!((w.log_det(0.5).unwrap() - 0.75f64.ln()).abs() < 1e-12);
        let e = SpatialWeights::empty(4);
        assert!(e.admissible_interval().is_none());
        assert_eq!(e.log_det(0.0).unwrap(), 0.0);
        assert!(e.log_det(0.1).is_err());
    }
}
