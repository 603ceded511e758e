//! Simulated clustered spatial regressions with known ground truth.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::engine::ClusterAssignment;
use crate::error::{Error, Result};
use crate::likelihood::ModelFamily;
use crate::weights::{SpatialWeights, UnitIndexMap};

#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticGraph {
    /// Rook-contiguity lattice; unit `r * cols + c` sits at `(c, r)`.
    Lattice { rows: usize, cols: usize },
    Explicit { w: SpatialWeights, coords: Vec<[f64; 2]> },
}

impl SyntheticGraph {
    fn build(&self) -> Result<(SpatialWeights, Vec<[f64; 2]>)> {
        match self {
            SyntheticGraph::Lattice { rows, cols } => {
                let coords = (0..rows * cols).map(|i| [(i % cols) as f64, (i / cols) as f64]).collect();
                Ok((SpatialWeights::lattice(*rows, *cols), coords))
            }
            SyntheticGraph::Explicit { w, coords } => {
                if coords.len() != w.n() {
                    return Err(Error::LengthMismatch {
                        left: coords.len(),
                        right: w.n(),
                    });
                }
                Ok((w.clone(), coords.clone()))
            }
        }
    }
}

/// Data-generating parameters of one cluster. For SLX, `theta` holds the
/// `P` direct coefficients followed by one lag coefficient per
/// non-intercept covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub family: ModelFamily,
    pub spatial_param: f64,
    pub theta: Vec<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub graph: SyntheticGraph,
    /// Ground-truth labels; `None` splits a lattice into contiguous column
    /// bands.
    pub partition: Option<ClusterAssignment>,
    pub clusters: Vec<ClusterParams>,
    /// Standard-normal covariates besides the intercept.
    pub n_covariates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub weights: SpatialWeights,
    pub truth: ClusterAssignment,
    /// The drawn disturbances, already scaled by each cluster's sigma.
    pub noise: Vec<f64>,
}

/// Column bands of a `rows x cols` lattice: column `c` gets band `c * k / cols`.
pub fn lattice_bands(rows: usize, cols: usize, k: usize) -> Result<ClusterAssignment> {
    if k == 0 || k > cols {
        return Err(Error::InvalidConfig(format!("cannot cut {cols} columns into {k} bands")));
    }
    let labels = (0..rows * cols).map(|i| (i % cols) * k / cols).collect();
    ClusterAssignment::new(labels, k)
}

impl SyntheticSpec {
    fn truth(&self, n: usize) -> Result<ClusterAssignment> {
        let k = self.clusters.len();
        match (&self.partition, &self.graph) {
            (Some(p), _) => {
                if p.n() != n || p.k() != k {
                    return Err(Error::Dimension(format!(
                        "partition has {} units and {} clusters, expected {n} and {k}",
                        p.n(),
                        p.k()
                    )));
                }
                Ok(p.clone())
            }
            (None, SyntheticGraph::Lattice { rows, cols }) => lattice_bands(*rows, *cols, k),
            (None, SyntheticGraph::Explicit { .. }) => {
                Err(Error::InvalidConfig("explicit graphs need an explicit partition".into()))
            }
        }
    }
}

/// Draws covariates and disturbances and solves each cluster's structural
/// equation on its restricted weight matrix.
pub fn generate(spec: &SyntheticSpec) -> Result<Synthetic> {
    if spec.clusters.is_empty() {
        return Err(Error::InvalidConfig("at least one cluster required".into()));
    }
    let (w, coords) = spec.graph.build()?;
    let n = w.n();
    let truth = spec.truth(n)?;
    let p = spec.n_covariates + 1;
    for (c, cp) in spec.clusters.iter().enumerate() {
        let want = if cp.family == ModelFamily::Slx { 2 * p - 1 } else { p };
        if cp.theta.len() != want {
            return Err(Error::Dimension(format!(
                "cluster {} has {} coefficients, expected {want}",
                c + 1,
                cp.theta.len()
            )));
        }
        if !(cp.sigma > 0.0) || !cp.sigma.is_finite() {
            return Err(Error::InvalidConfig(format!("cluster {}: sigma must be > 0", c + 1)));
        }
        if !cp.family.has_spatial_param() && cp.spatial_param != 0.0 {
            return Err(Error::InvalidConfig(format!(
                "cluster {}: {} has no spatial parameter",
                c + 1,
                cp.family
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for j in 1..p {
            x[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    let noise: Vec<f64> = (0..n)
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            spec.clusters[truth.label(i)].sigma * z
        })
        .collect();

    let mut y = vec![0.0; n];
    for (c, cp) in spec.clusters.iter().enumerate() {
        let members = truth.members(c);
        if members.is_empty() {
            continue;
        }
        let wk = w.restrict(&members)?;
        if cp.spatial_param != 0.0 {
            wk.check_spatial_param(cp.spatial_param)?;
        }
        let xk = DMatrix::from_fn(members.len(), p, |r, j| x[(members[r], j)]);
        let eps = DVector::from_iterator(members.len(), members.iter().map(|&i| noise[i]));
        let mut mean = &xk * DVector::from_column_slice(&cp.theta[..p]);
        if cp.family == ModelFamily::Slx {
            let wx = wk.lag_matrix(&xk);
            for j in 1..p {
                mean += wx.column(j) * cp.theta[p + j - 1];
            }
        }
        let yk = match cp.family {
            ModelFamily::Sar if cp.spatial_param != 0.0 => solve_structural(&wk, cp.spatial_param, mean + eps)?,
            ModelFamily::Sem if cp.spatial_param != 0.0 => mean + solve_structural(&wk, cp.spatial_param, eps)?,
            _ => mean + eps,
        };
        for (r, &i) in members.iter().enumerate() {
            y[i] = yk[r];
        }
    }

    let mut names = vec![crate::dataset::INTERCEPT_NAME.to_owned()];
    names.extend((1..p).map(|j| format!("x{j}")));
    let dataset = Dataset::new(UnitIndexMap::sequential(n), coords, y, x, names)?;
    Ok(Synthetic {
        dataset,
        weights: w,
        truth,
        noise,
    })
}

/// Solves `(I - a W) z = rhs` densely.
fn solve_structural(w: &SpatialWeights, a: f64, rhs: DVector<f64>) -> Result<DVector<f64>> {
    let n = w.n();
    let m = DMatrix::identity(n, n) - w.to_dense() * a;
    m.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Dimension("structural system is singular".into()))
}

fn comb2(x: u64) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same units. Returns
/// 1 when both partitions are trivial in the same way.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len() as u64;
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&v| comb2(v)).sum();
    let sa: f64 = rows.values().map(|&v| comb2(v)).sum();
    let sb: f64 = cols.values().map(|&v| comb2(v)).sum();
    let total = comb2(n);
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = 0.5 * (sa + sb);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

pub fn score_recovery(truth: &ClusterAssignment, estimate: &ClusterAssignment) -> Result<f64> {
    adjusted_rand_index(truth.labels(), estimate.labels())
}

fn parse_list(s: &str, line: usize) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("`{}`: {e}", t.trim()),
            })
        })
        .collect()
}

/// Parses a `key = value` spec. Recognised keys: `rows`, `cols`, `k`,
/// `covariates`, `seed`, `family`, `sigma`, and per cluster
/// `cluster.<i>.{family,param,theta,sigma}` with `i` in `1..=k`. `theta`
/// is a comma-separated list. `#` starts a comment.
pub fn parse_spec(text: &str) -> Result<SyntheticSpec> {
    let mut kv: Vec<(usize, String, String)> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: ln + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        kv.push((ln + 1, k.trim().to_owned(), v.trim().to_owned()));
    }
    let get = |key: &str| kv.iter().find(|e| e.1 == key).map(|e| (e.0, e.2.as_str()));
    let num = |key: &str, default: Option<u64>| -> Result<u64> {
        match get(key) {
            Some((line, v)) => v.parse().map_err(|e| Error::Parse {
                line,
                message: format!("{key}: {e}"),
            }),
            None => default.ok_or_else(|| Error::InvalidConfig(format!("missing key `{key}`"))),
        }
    };
    let rows = num("rows", None)? as usize;
    let cols = num("cols", None)? as usize;
    let k = num("k", None)? as usize;
    let n_covariates = num("covariates", Some(1))? as usize;
    let seed = num("seed", Some(0))?;
    let family: ModelFamily = match get("family") {
        Some((_, v)) => v.parse()?,
        None => ModelFamily::Sar,
    };
    let sigma = match get("sigma") {
        Some((line, v)) => parse_list(v, line)?[0],
        None => 1.0,
    };
    for (line, key, _) in &kv {
        let known = ["rows", "cols", "k", "covariates", "seed", "family", "sigma"].contains(&key.as_str());
        let cluster_key = key
            .strip_prefix("cluster.")
            .and_then(|r| r.split_once('.'))
            .is_some_and(|(i, f)| {
                i.parse::<usize>().is_ok_and(|i| i >= 1 && i <= k) && ["family", "param", "theta", "sigma"].contains(&f)
            });
        if !known && !cluster_key {
            return Err(Error::Parse {
                line: *line,
                message: format!("unknown key `{key}`"),
            });
        }
    }
    let mut clusters = Vec::with_capacity(k);
    for c in 1..=k {
        let key = |f: &str| format!("cluster.{c}.{f}");
        let fam = match get(&key("family")) {
            Some((_, v)) => v.parse()?,
            None => family,
        };
        let param = match get(&key("param")) {
            Some((line, v)) => parse_list(v, line)?[0],
            None => 0.0,
        };
        let theta = match get(&key("theta")) {
            Some((line, v)) => parse_list(v, line)?,
            None => return Err(Error::InvalidConfig(format!("missing key `{}`", key("theta")))),
        };
        let s = match get(&key("sigma")) {
            Some((line, v)) => parse_list(v, line)?[0],
            None => sigma,
        };
        clusters.push(ClusterParams {
            family: fam,
            spatial_param: param,
            theta,
            sigma: s,
        });
    }
    Ok(SyntheticSpec {
        graph: SyntheticGraph::Lattice { rows, cols },
        partition: None,
        clusters,
        n_covariates,
        seed,
    })
}
