//! Alternating estimation of cluster memberships and per-cluster parameters.
//!
//! Each iteration fits the configured family on every cluster (with the
//! weight matrix restricted to the cluster) and then sweeps the units,
//! moving each to the cluster maximising its own log-likelihood
//! contribution plus `phi` times the number of neighbours already in that
//! cluster. The composite objective is
//! `sum_k loglik_k + phi * #{i < j : w_ij = 1, k_i = k_j}`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::{self, ClusterFit, FitOptions, ModelFamily};
use crate::weights::SpatialWeights;

pub const DEFAULT_ETA: f64 = 1e-6;
pub const DEFAULT_MAX_ITR: usize = 100;
const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITER: usize = 100;
/// Score improvement required to leave the incumbent label.
const MOVE_TOL: f64 = 1e-12;

/// Cluster label per unit. Labels are stored 0-based; reports print them
/// as `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if let Some(i) = labels.iter().position(|&l| l >= k) {
            return Err(Error::IndexOutOfRange { index: labels[i], len: k });
        }
        Ok(Self { labels, k })
    }

    /// Builds from labels in `1..=k`.
    pub fn from_one_based(labels: &[usize], k: usize) -> Result<Self> {
        if labels.contains(&0) {
            return Err(Error::InvalidConfig("one-based labels must be >= 1".into()));
        }
        Self::new(labels.iter().map(|l| l - 1).collect(), k)
    }

    pub fn uniform(n: usize, k: usize) -> Self {
        Self { labels: vec![0; n], k }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == cluster).collect()
    }

    fn set(&mut self, i: usize, cluster: usize) {
        self.labels[i] = cluster;
    }
}

/// How step B reads neighbour labels during a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepOrder {
    /// Ascending unit order, each move visible to later units.
    Sequential,
    /// Every unit sees the labels from the start of the sweep.
    Simultaneous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub family: ModelFamily,
    pub k: usize,
    pub phi: f64,
    pub max_itr: usize,
    pub eta: f64,
    pub seed: u64,
    /// Lower bound on cluster sizes; `None` uses the family default.
    pub min_cluster_size: Option<usize>,
    pub sweep: SweepOrder,
    pub slx_lag_intercept: bool,
}

impl EngineConfig {
    pub fn new(family: ModelFamily, k: usize, phi: f64) -> Self {
        Self {
            family,
            k,
            phi,
            max_itr: DEFAULT_MAX_ITR,
            eta: DEFAULT_ETA,
            seed: 0,
            min_cluster_size: None,
            sweep: SweepOrder::Sequential,
            slx_lag_intercept: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Effective minimum cluster size for a design with `p` columns.
    pub fn min_size(&self, p: usize) -> usize {
        self.min_cluster_size.unwrap_or(match self.family {
            ModelFamily::Slx => 2 * p + 2,
            _ => p + 3,
        })
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.phi >= 0.0) || !self.phi.is_finite() {
            return Err(Error::InvalidConfig(format!("phi must be >= 0, got {}", self.phi)));
        }
        if self.max_itr == 0 {
            return Err(Error::InvalidConfig("max_itr must be at least 1".into()));
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidConfig(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.k > n {
            return Err(Error::KExceedsN { k: self.k, n });
        }
        let min = self.min_size(p);
        if self.k * min > n {
            return Err(Error::InvalidConfig(format!(
                "{} clusters of at least {min} units need {} units, have {n}",
                self.k,
                self.k * min
            )));
        }
        Ok(())
    }

    fn fit_options(&self, std_errors: bool) -> FitOptions {
        FitOptions {
            lenient: true,
            std_errors,
            slx_lag_intercept: self.slx_lag_intercept,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergedBy {
    MembershipFixed,
    LoglikTol,
    MaxItr,
}

impl ConvergedBy {
    pub fn as_str(self) -> &'static str {
        match self {
            ConvergedBy::MembershipFixed => "membership_fixed",
            ConvergedBy::LoglikTol => "loglik_tol",
            ConvergedBy::MaxItr => "max_itr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub config: EngineConfig,
    pub assignment: ClusterAssignment,
    pub fits: Vec<ClusterFit>,
    /// Penalised objective after each step A.
    pub objective_trace: Vec<f64>,
    /// Total log-likelihood after each step A.
    pub loglik_trace: Vec<f64>,
    /// Iterations (1-based) whose objective fell below the previous one.
    pub non_monotone_iterations: Vec<usize>,
    pub penalized_objective: f64,
    pub total_loglik: f64,
    /// Neighbour pairs sharing a cluster.
    pub same_cluster_pairs: usize,
    pub iterations: usize,
    pub converged_by: ConvergedBy,
    pub n_params: usize,
    pub aic: f64,
    pub bic: f64,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn sizes(&self) -> Vec<usize> {
        self.assignment.sizes()
    }
}

/// Lloyd's k-means on the unit coordinates: random distinct units as
/// starting centres, best of several restarts by within-cluster sum of
/// squares. Deterministic for a given seed.
pub fn initialize(dataset: &Dataset, k: usize, seed: u64) -> Result<ClusterAssignment> {
    kmeans(dataset.coords(), k, seed)
}

pub fn kmeans(coords: &[[f64; 2]], k: usize, seed: u64) -> Result<ClusterAssignment> {
    let n = coords.len();
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::KExceedsN { k, n });
    }
    if k == 1 {
        return Ok(ClusterAssignment::uniform(n, 1));
    }
    let d2 = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let mut centers: Vec<[f64; 2]> = sample(&mut rng, n, k).iter().map(|i| coords[i]).collect();
        let mut labels = vec![usize::MAX; n];
        for _ in 0..KMEANS_MAX_ITER {
            let mut changed = false;
            for (i, &c) in coords.iter().enumerate() {
                let mut arg = 0;
                let mut min = f64::INFINITY;
                for (j, &ctr) in centers.iter().enumerate() {
                    let d = d2(c, ctr);
                    if d < min {
                        min = d;
                        arg = j;
                    }
                }
                if labels[i] != arg {
                    labels[i] = arg;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            let mut sums = vec![[0.0, 0.0, 0.0]; k];
            for (i, &l) in labels.iter().enumerate() {
                sums[l][0] += coords[i][0];
                sums[l][1] += coords[i][1];
                sums[l][2] += 1.0;
            }
            for (ctr, s) in centers.iter_mut().zip(&sums) {
                if s[2] > 0.0 {
                    *ctr = [s[0] / s[2], s[1] / s[2]];
                }
            }
        }
        let wcss: f64 = labels.iter().enumerate().map(|(i, &l)| d2(coords[i], centers[l])).sum();
        if best.as_ref().is_none_or(|(b, _)| wcss < *b) {
            best = Some((wcss, labels));
        }
    }
    ClusterAssignment::new(best.expect("at least one restart").1, k)
}

/// Number of `i`'s neighbours currently labelled `candidate`.
pub fn penalty_gain(w: &SpatialWeights, labels: &[usize], i: usize, candidate: usize) -> usize {
    w.neighbors(i).iter().filter(|&&j| labels[j] == candidate).count()
}

/// `#{i < j : w_ij = 1, labels_i = labels_j}`.
pub fn same_cluster_pairs(w: &SpatialWeights, labels: &[usize]) -> usize {
    w.edges().filter(|&(i, j)| labels[i] == labels[j]).count()
}

/// Result of step A.
#[derive(Debug, Clone)]
pub struct GroupFits {
    pub fits: Vec<ClusterFit>,
    /// Descriptions of units moved to satisfy the minimum cluster size.
    pub repairs: Vec<String>,
}

fn fit_cluster(
    dataset: &Dataset,
    w: &SpatialWeights,
    members: &[usize],
    config: &EngineConfig,
    std_errors: bool,
) -> Result<ClusterFit> {
    let sub_w = w.restrict(members)?;
    let (y, x) = dataset.subset(members);
    likelihood::fit(config.family, &y, &x, &sub_w, &config.fit_options(std_errors))
}

/// Step A: fits every cluster on its own units and restricted weights.
/// Clusters below the minimum size are first topped up from the largest
/// cluster with the units nearest to them in the plane.
pub fn step_a(
    dataset: &Dataset,
    w: &SpatialWeights,
    assignment: &mut ClusterAssignment,
    config: &EngineConfig,
) -> Result<GroupFits> {
    let min = config.min_size(dataset.p()).max(1);
    let repairs = repair_geometric(assignment, dataset.coords(), min)?;
    let fits = (0..assignment.k())
        .into_par_iter()
        .map(|c| fit_cluster(dataset, w, &assignment.members(c), config, false))
        .collect::<Result<Vec<_>>>()?;
    Ok(GroupFits { fits, repairs })
}

fn centroid(coords: &[[f64; 2]], members: &[usize]) -> [f64; 2] {
    let n = members.len() as f64;
    let (sx, sy) = members
        .iter()
        .fold((0.0, 0.0), |(a, b), &i| (a + coords[i][0], b + coords[i][1]));
    [sx / n, sy / n]
}

fn largest_cluster(sizes: &[usize]) -> usize {
    let mut best = 0;
    for (c, &s) in sizes.iter().enumerate() {
        if s > sizes[best] {
            best = c;
        }
    }
    best
}

/// Moves units from the largest cluster into undersized clusters, choosing
/// the donor units closest to the receiving cluster's centroid (or, for an
/// empty cluster, farthest from the donor's centroid first).
fn repair_geometric(assignment: &mut ClusterAssignment, coords: &[[f64; 2]], min: usize) -> Result<Vec<String>> {
    let mut log = Vec::new();
    loop {
        let sizes = assignment.sizes();
        let Some(small) = (0..assignment.k()).find(|&c| sizes[c] < min) else {
            return Ok(log);
        };
        let donor = largest_cluster(&sizes);
        if sizes[donor] <= min {
            return Err(Error::InvalidConfig(format!(
                "cannot give every cluster {min} units with {} units",
                assignment.n()
            )));
        }
        let donor_members = assignment.members(donor);
        let d2 = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
        let pick = if sizes[small] == 0 {
            let ctr = centroid(coords, &donor_members);
            *donor_members
                .iter()
                .max_by(|&&a, &&b| d2(coords[a], ctr).total_cmp(&d2(coords[b], ctr)).then(b.cmp(&a)))
                .expect("donor is nonempty")
        } else {
            let ctr = centroid(coords, &assignment.members(small));
            *donor_members
                .iter()
                .min_by(|&&a, &&b| d2(coords[a], ctr).total_cmp(&d2(coords[b], ctr)).then(a.cmp(&b)))
                .expect("donor is nonempty")
        };
        assignment.set(pick, small);
        log.push(format!("unit {pick} moved from cluster {} to cluster {}", donor + 1, small + 1));
    }
}

/// Moves the worst-fitting units of the largest cluster into undersized
/// clusters. `unit_ll[c][i]` is unit `i`'s contribution under cluster `c`.
fn repair_by_likelihood(assignment: &mut ClusterAssignment, unit_ll: &[Vec<f64>], min: usize) -> Result<Vec<String>> {
    let mut log = Vec::new();
    loop {
        let sizes = assignment.sizes();
        let Some(small) = (0..assignment.k()).find(|&c| sizes[c] < min) else {
            return Ok(log);
        };
        let donor = largest_cluster(&sizes);
        if sizes[donor] <= min {
            return Err(Error::InvalidConfig(format!(
                "cannot give every cluster {min} units with {} units",
                assignment.n()
            )));
        }
        let pick = *assignment
            .members(donor)
            .iter()
            .min_by(|&&a, &&b| unit_ll[donor][a].total_cmp(&unit_ll[donor][b]).then(a.cmp(&b)))
            .expect("donor is nonempty");
        assignment.set(pick, small);
        log.push(format!("unit {pick} moved from cluster {} to cluster {}", donor + 1, small + 1));
    }
}

/// One accepted relabelling in a membership sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub unit: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone)]
pub struct MembershipSweep {
    pub assignment: ClusterAssignment,
    pub moves: Vec<Move>,
}

/// Per-cluster unit log-likelihoods on the full sample and full weights.
fn unit_ll_matrix(dataset: &Dataset, w: &SpatialWeights, fits: &[ClusterFit]) -> Result<Vec<Vec<f64>>> {
    fits.par_iter()
        .map(|f| likelihood::unit_logliks(f, dataset.y(), dataset.x(), w))
        .collect()
}

fn sweep(
    w: &SpatialWeights,
    unit_ll: &[Vec<f64>],
    assignment: &ClusterAssignment,
    phi: f64,
    order: SweepOrder,
) -> MembershipSweep {
    let k = assignment.k();
    let before = assignment.labels().to_vec();
    let mut labels = before.clone();
    let mut moves = Vec::new();
    for i in 0..labels.len() {
        let seen = match order {
            SweepOrder::Sequential => &labels,
            SweepOrder::Simultaneous => &before,
        };
        let score = |c: usize| unit_ll[c][i] + phi * penalty_gain(w, seen, i, c) as f64;
        let incumbent = labels[i];
        let mut best = incumbent;
        let mut best_score = score(incumbent);
        for c in 0..k {
            if c == incumbent {
                continue;
            }
            let s = score(c);
            if s > best_score + MOVE_TOL {
                best = c;
                best_score = s;
            }
        }
        if best != incumbent {
            moves.push(Move {
                unit: i,
                from: incumbent,
                to: best,
            });
            labels[i] = best;
        }
    }
    MembershipSweep {
        assignment: ClusterAssignment { labels, k },
        moves,
    }
}

/// Step B: reassigns every unit to the cluster maximising its own
/// log-likelihood contribution (residual under the full weight matrix)
/// plus `phi` times its same-cluster neighbour count. Ties keep the
/// incumbent label, then favour the smallest cluster index.
pub fn step_b(
    dataset: &Dataset,
    w: &SpatialWeights,
    fits: &[ClusterFit],
    assignment: &ClusterAssignment,
    config: &EngineConfig,
) -> Result<MembershipSweep> {
    if fits.len() != assignment.k() {
        return Err(Error::LengthMismatch { left: fits.len(), right: assignment.k() });
    }
    let unit_ll = unit_ll_matrix(dataset, w, fits)?;
    Ok(sweep(w, &unit_ll, assignment, config.phi, config.sweep))
}

fn check_inputs(dataset: &Dataset, w: &SpatialWeights, config: &EngineConfig) -> Result<()> {
    if w.n() != dataset.n() {
        return Err(Error::Dimension(format!(
            "weights cover {} units, dataset has {}",
            w.n(),
            dataset.n()
        )));
    }
    config.validate(dataset.n(), dataset.p())
}

/// Runs the alternating algorithm from a k-means initial partition.
pub fn run(dataset: &Dataset, w: &SpatialWeights, config: &EngineConfig) -> Result<FitResult> {
    check_inputs(dataset, w, config)?;
    let init = initialize(dataset, config.k, config.seed)?;
    run_from(dataset, w, config, init)
}

/// Runs the alternating algorithm from a given partition.
pub fn run_from(
    dataset: &Dataset,
    w: &SpatialWeights,
    config: &EngineConfig,
    initial: ClusterAssignment,
) -> Result<FitResult> {
    check_inputs(dataset, w, config)?;
    if initial.n() != dataset.n() || initial.k() != config.k {
        return Err(Error::Dimension("initial assignment does not match dataset/config".into()));
    }
    let min = config.min_size(dataset.p()).max(1);
    let mut assignment = initial;
    let mut warnings = Vec::new();
    let mut objective_trace = Vec::new();
    let mut loglik_trace = Vec::new();
    let mut non_monotone = Vec::new();
    let mut iteration = 0;

    let (fits, converged_by) = loop {
        iteration += 1;
        let step = step_a(dataset, w, &mut assignment, config)?;
        for r in step.repairs {
            warnings.push(format!("iteration {iteration}: {r}"));
        }
        let fits = step.fits;
        let ll: f64 = fits.iter().map(|f| f.loglik).sum();
        let obj = ll + config.phi * same_cluster_pairs(w, assignment.labels()) as f64;
        if let Some(&prev) = objective_trace.last() {
            if obj < prev - 1e-9 * f64::abs(prev) {
                non_monotone.push(iteration);
            }
        }
        let prev_ll = loglik_trace.last().copied();
        objective_trace.push(obj);
        loglik_trace.push(ll);

        if let Some(prev) = prev_ll {
            let denom = f64::abs(prev).max(f64::MIN_POSITIVE);
            if ((ll - prev) / denom).abs() <= config.eta {
                break (fits, ConvergedBy::LoglikTol);
            }
        }
        if iteration >= config.max_itr {
            break (fits, ConvergedBy::MaxItr);
        }

        let unit_ll = unit_ll_matrix(dataset, w, &fits)?;
        let mut next = sweep(w, &unit_ll, &assignment, config.phi, config.sweep).assignment;
        for r in repair_by_likelihood(&mut next, &unit_ll, min)? {
            warnings.push(format!("iteration {iteration}: {r}"));
        }
        if next == assignment {
            break (fits, ConvergedBy::MembershipFixed);
        }
        assignment = next;
    };

    // standard errors for the final fits only
    let fits = fits
        .into_par_iter()
        .enumerate()
        .map(|(c, mut f)| {
            let members = assignment.members(c);
            let sub_w = w.restrict(&members)?;
            let (y, x) = dataset.subset(&members);
            f.std_errors = likelihood::std_errors(&f, &y, &x, &sub_w).ok();
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;
    for (c, f) in fits.iter().enumerate() {
        if f.degenerate {
            warnings.push(format!("cluster {} fit is degenerate (rank deficient or zero variance)", c + 1));
        }
        if f.spatial_pinned {
            warnings.push(format!("cluster {}: no internal edges, spatial parameter fixed at 0", c + 1));
        }
        if f.std_errors.is_none() {
            warnings.push(format!("cluster {}: standard errors unavailable (singular Hessian)", c + 1));
        }
    }

    let total_loglik: f64 = fits.iter().map(|f| f.loglik).sum();
    let pairs = same_cluster_pairs(w, assignment.labels());
    let n_params: usize = fits.iter().map(ClusterFit::n_params).sum();
    let n = dataset.n() as f64;
    Ok(FitResult {
        config: config.clone(),
        assignment,
        penalized_objective: total_loglik + config.phi * pairs as f64,
        total_loglik,
        same_cluster_pairs: pairs,
        iterations: iteration,
        converged_by,
        n_params,
        aic: 2.0 * n_params as f64 - 2.0 * total_loglik,
        bic: n_params as f64 * n.ln() - 2.0 * total_loglik,
        fits,
        objective_trace,
        loglik_trace,
        non_monotone_iterations: non_monotone,
        warnings,
    })
}

/// Runs once per seed and keeps the result with the highest penalised
/// objective (earliest seed on ties).
pub fn run_best_of(dataset: &Dataset, w: &SpatialWeights, config: &EngineConfig, seeds: &[u64]) -> Result<FitResult> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed required".into()));
    }
    let results: Vec<Result<FitResult>> = seeds
        .par_iter()
        .map(|&s| run(dataset, w, &config.clone().with_seed(s)))
        .collect();
    let mut best: Option<FitResult> = None;
    let mut first_err = None;
    for r in results {
        match r {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.penalized_objective > b.penalized_objective) {
                    best = Some(r);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("some run failed"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::UnitIndexMap;
    use nalgebra::DMatrix;

    #[test]
    fn gains() {
        let iso = SpatialWeights::empty(3);
        for c in 0..3 {
            assert_eq!(penalty_gain(&iso, &[0, 1, 2], 0, c), 0);
        }
        let star = SpatialWeights::from_index_pairs(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let labels = [0, 1, 1, 1];
        assert_eq!(penalty_gain(&star, &labels, 0, 1), 3);
        assert_eq!(penalty_gain(&star, &labels, 0, 0), 0);
        let c4 = SpatialWeights::from_index_pairs(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let labels = [0, 0, 1, 1];
        assert_eq!(penalty_gain(&c4, &labels, 0, 0), 1);
        assert_eq!(penalty_gain(&c4, &labels, 0, 1), 1);
        assert_eq!(same_cluster_pairs(&c4, &labels), 2);
    }

    #[test]
    fn kmeans_trivial_and_separated() {
        let mut coords = Vec::new();
        for i in 0..20 {
            let a = i as f64 * 0.3;
            coords.push([a.cos(), a.sin()]);
        }
        for i in 0..20 {
            let a = i as f64 * 0.3;
            coords.push([100.0 + a.cos(), a.sin()]);
        }
        let one = kmeans(&coords, 1, 3).unwrap();
        assert!(one.labels().iter().all(|&l| l == 0));
        let two = kmeans(&coords, 2, 3).unwrap();
        let l0 = two.label(0);
        assert!(two.labels()[..20].iter().all(|&l| l == l0));
        assert!(two.labels()[20..].iter().all(|&l| l != l0));
        assert_eq!(kmeans(&coords, 2, 3).unwrap(), two);
        assert!(matches!(kmeans(&coords[..2], 3, 0), Err(Error::KExceedsN { .. })));
    }

    fn tiny_dataset(n: usize) -> Dataset {
        let coords: Vec<[f64; 2]> = (0..n).map(|i| [i as f64, 0.0]).collect();
        let y: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64).collect();
        let x = DMatrix::from_fn(n, 1, |_, _| 1.0);
        Dataset::new(UnitIndexMap::sequential(n), coords, y, x, vec!["Intercept".into()]).unwrap()
    }

    #[test]
    fn empty_cluster_is_repaired() {
        let d = tiny_dataset(12);
        let w = SpatialWeights::from_index_pairs(12, (0..11).map(|i| (i, i + 1))).unwrap();
        let cfg = EngineConfig::new(ModelFamily::Ols, 2, 0.5);
        let mut a = ClusterAssignment::uniform(12, 2);
        let fits = step_a(&d, &w, &mut a, &cfg).unwrap();
        assert_eq!(fits.fits.len(), 2);
        assert!(a.sizes().iter().all(|&s| s >= cfg.min_size(1)));
        assert!(!fits.repairs.is_empty());
    }

    #[test]
    fn config_rejections() {
        let d = tiny_dataset(6);
        let w = SpatialWeights::empty(6);
        let cfg = EngineConfig::new(ModelFamily::Sar, 3, 0.5);
        assert!(matches!(run(&d, &w, &cfg), Err(Error::InvalidConfig(_))));
        let cfg = EngineConfig::new(ModelFamily::Sar, 7, 0.5);
        assert!(matches!(run(&d, &w, &cfg), Err(Error::KExceedsN { .. })));
        let mut cfg = EngineConfig::new(ModelFamily::Ols, 1, -1.0);
        assert!(run(&d, &w, &cfg).is_err());
        cfg.phi = 0.0;
        cfg.eta = 0.0;
        assert!(run(&d, &w, &cfg).is_err());
    }

    #[test]
    fn uniform_label_survives_dominant_penalty() {
        // connected path, one label, huge phi: nobody leaves
        let d = tiny_dataset(12);
        let w = SpatialWeights::from_index_pairs(12, (0..11).map(|i| (i, i + 1))).unwrap();
        let mut cfg = EngineConfig::new(ModelFamily::Ols, 2, 1e6);
        cfg.min_cluster_size = Some(1);
        let mut a = ClusterAssignment::new(vec![0; 12], 2).unwrap();
        // give cluster 1 one unit so both clusters can be fitted
        a.set(11, 1);
        let fits = step_a(&d, &w, &mut a, &cfg).unwrap().fits;
        let start = ClusterAssignment::new(vec![0; 12], 2).unwrap();
        let out = step_b(&d, &w, &fits, &start, &cfg).unwrap();
        assert!(out.moves.is_empty());
        assert_eq!(out.assignment, start);
    }
}
