//! Grid search over `(K, phi)` and the BIC elbow rule.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::engine::{self, ConvergedBy, EngineConfig, FitResult};
use crate::error::{Error, Result};
use crate::likelihood::ModelFamily;
use crate::weights::SpatialWeights;

pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub k: usize,
    pub phi: f64,
    pub seed: u64,
    pub bic: f64,
    pub aic: f64,
    pub loglik: f64,
    pub penalized_objective: f64,
    pub sizes: Vec<usize>,
    pub converged_by: ConvergedBy,
}

impl GridEntry {
    fn from_result(r: &FitResult) -> Self {
        Self {
            k: r.config.k,
            phi: r.config.phi,
            seed: r.config.seed,
            bic: r.bic,
            aic: r.aic,
            loglik: r.total_loglik,
            penalized_objective: r.penalized_objective,
            sizes: r.sizes(),
            converged_by: r.converged_by,
        }
    }
}

/// A `(k, phi)` cell that produced no fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFailure {
    pub k: usize,
    pub phi: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowChoice {
    pub k: usize,
    pub phi: f64,
    /// Fewer than three distinct `K` values: the global BIC minimum was used.
    pub fallback: bool,
    /// Tied or non-positive curvature at the chosen `K`.
    pub ambiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionGrid {
    /// Best seed per `(k, phi)`, ordered by `k` then `phi`.
    pub entries: Vec<GridEntry>,
    pub failures: Vec<GridFailure>,
    pub chosen: Option<ElbowChoice>,
}

/// Runs the engine on every `(k, phi, seed)` and keeps, per `(k, phi)`, the
/// seed with the highest penalised objective (first seed on ties). Cells
/// whose configuration is rejected are recorded in `failures`.
pub fn grid_search(
    dataset: &Dataset,
    w: &SpatialWeights,
    family: ModelFamily,
    ks: &[usize],
    phis: &[f64],
    seeds: &[u64],
    defaults: &EngineConfig,
) -> Result<SelectionGrid> {
    if ks.is_empty() || phis.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidConfig("grid needs at least one k, phi and seed".into()));
    }
    let cells: Vec<(usize, f64)> = ks.iter().flat_map(|&k| phis.iter().map(move |&p| (k, p))).collect();
    let outcomes: Vec<(usize, f64, Result<FitResult>)> = cells
        .par_iter()
        .map(|&(k, phi)| {
            let cfg = EngineConfig {
                family,
                k,
                phi,
                ..defaults.clone()
            };
            (k, phi, engine::run_best_of(dataset, w, &cfg, seeds))
        })
        .collect();

    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (k, phi, out) in outcomes {
        match out {
            Ok(r) => entries.push(GridEntry::from_result(&r)),
            Err(e) => failures.push(GridFailure {
                k,
                phi,
                error: format!("{}: {e}", e.code()),
            }),
        }
    }
    entries.sort_by(|a, b| a.k.cmp(&b.k).then(a.phi.total_cmp(&b.phi)));
    let chosen = choose_elbow(&entries).ok();
    Ok(SelectionGrid {
        entries,
        failures,
        chosen,
    })
}

/// Picks `phi` with the smallest BIC over all `K`, then along that `phi`
/// the interior `K` with the largest second difference
/// `BIC(K-1) - 2 BIC(K) + BIC(K+1)`. Ties go to the smaller `K`.
pub fn choose_elbow(entries: &[GridEntry]) -> Result<ElbowChoice> {
    let best = entries
        .iter()
        .filter(|e| e.bic.is_finite())
        .min_by(|a, b| a.bic.total_cmp(&b.bic).then(a.k.cmp(&b.k)).then(a.phi.total_cmp(&b.phi)))
        .ok_or(Error::InsufficientGrid)?;
    let phi = best.phi;
    let mut curve: Vec<(usize, f64)> = entries
        .iter()
        .filter(|e| e.phi == phi && e.bic.is_finite())
        .map(|e| (e.k, e.bic))
        .collect();
    curve.sort_by_key(|c| c.0);
    curve.dedup_by_key(|c| c.0);
    if curve.len() < 3 {
        return Ok(ElbowChoice {
            k: best.k,
            phi,
            fallback: true,
            ambiguous: false,
        });
    }
    let mut arg = 1;
    let mut max = f64::NEG_INFINITY;
    let mut tied = false;
    for i in 1..curve.len() - 1 {
        let d2 = curve[i - 1].1 - 2.0 * curve[i].1 + curve[i + 1].1;
        if d2 > max {
            max = d2;
            arg = i;
            tied = false;
        } else if d2 == max {
            tied = true;
        }
    }
    Ok(ElbowChoice {
        k: curve[arg].0,
        phi,
        fallback: false,
        ambiguous: tied || max <= 0.0,
    })
}

/// Writes the grid as CSV with columns
/// `k,phi,seed,bic,aic,loglik,sizes,converged_by`; sizes are `;`-separated.
pub fn write_grid_csv<W: Write>(entries: &[GridEntry], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["k", "phi", "seed", "bic", "aic", "loglik", "sizes", "converged_by"])?;
    for e in entries {
        let sizes: Vec<String> = e.sizes.iter().map(usize::to_string).collect();
        wtr.write_record([
            e.k.to_string(),
            e.phi.to_string(),
            e.seed.to_string(),
            e.bic.to_string(),
            e.aic.to_string(),
            e.loglik.to_string(),
            sizes.join(";"),
            e.converged_by.as_str().to_owned(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(k: usize, phi: f64, bic: f64) -> GridEntry {
        GridEntry {
            k,
            phi,
            seed: 1,
            bic,
            aic: bic,
            loglik: -bic / 2.0,
            penalized_objective: 0.0,
            sizes: vec![],
            converged_by: ConvergedBy::MembershipFixed,
        }
    }

    #[test]
    fn elbow_arithmetic() {
        let g = [entry(2, 0.5, 100.0), entry(3, 0.5, 60.0), entry(4, 0.5, 55.0)];
        let c = choose_elbow(&g).unwrap();
        assert_eq!((c.k, c.phi), (3, 0.5));
        assert!(!c.ambiguous && !c.fallback);
    }

    #[test]
    fn linear_bic_is_ambiguous() {
        let g = [entry(2, 1.0, 90.0), entry(3, 1.0, 80.0), entry(4, 1.0, 70.0), entry(5, 1.0, 60.0)];
        let c = choose_elbow(&g).unwrap();
        assert_eq!(c.k, 3);
        assert!(c.ambiguous);
    }

    #[test]
    fn phi_by_minimum_bic() {
        let g = [
            entry(2, 0.5, 100.0),
            entry(3, 0.5, 60.0),
            entry(4, 0.5, 55.0),
            entry(2, 1.0, 101.0),
            entry(3, 1.0, 99.0),
            entry(4, 1.0, 50.0),
        ];
        let c = choose_elbow(&g).unwrap();
        assert_eq!(c.phi, 1.0);
        assert_eq!(c.k, 3);
    }

    #[test]
    fn short_grid_falls_back() {
        let c = choose_elbow(&[entry(2, 0.5, 10.0), entry(3, 0.5, 8.0)]).unwrap();
        assert!(c.fallback);
        assert_eq!(c.k, 3);
        assert!(matches!(choose_elbow(&[]), Err(Error::InsufficientGrid)));
    }

    #[test]
    fn csv_columns() {
        let mut buf = Vec::new();
        let mut e = entry(2, 0.5, 10.0);
        e.sizes = vec![3, 4];
        write_grid_csv(&[e], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), "k,phi,seed,bic,aic,loglik,sizes,converged_by");
        assert_eq!(lines.next().unwrap(), "2,0.5,1,10,10,-5,3;4,membership_fixed");
    }
}
