//! Gini index for farm output grouped by economic size class.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeClass {
    pub count: u64,
    pub total_output: f64,
}

/// Size classes of one region, ascending in output per farm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedDistribution {
    pub region_id: String,
    pub classes: Vec<SizeClass>,
}

impl GroupedDistribution {
    pub fn new(region_id: impl Into<String>, classes: Vec<SizeClass>) -> Self {
        Self {
            region_id: region_id.into(),
            classes,
        }
    }

    /// Builds from parallel `counts` and `outputs`.
    pub fn from_counts(region_id: impl Into<String>, counts: &[u64], outputs: &[f64]) -> Result<Self> {
        if counts.len() != outputs.len() {
            return Err(Error::LengthMismatch {
                left: counts.len(),
                right: outputs.len(),
            });
        }
        let classes = counts
            .iter()
            .zip(outputs)
            .map(|(&count, &total_output)| SizeClass { count, total_output })
            .collect();
        Ok(Self::new(region_id, classes))
    }

    pub fn farms(&self) -> u64 {
        self.classes.iter().map(|c| c.count).sum()
    }

    pub fn total_output(&self) -> f64 {
        self.classes.iter().map(|c| c.total_output).sum()
    }
}

/// Grouped Gini on a 0-100 scale:
/// `N/(N-1) * [1 - sum_j (Q_j + Q_{j-1})(F_j - F_{j-1})] * 100`, where `F`
/// and `Q` are cumulative farm and output shares.
pub fn gini_grouped(d: &GroupedDistribution) -> Result<f64> {
    let n = d.farms();
    if n < 2 {
        return Err(Error::TooFewFarms(n));
    }
    if d.classes.iter().any(|c| !(c.total_output >= 0.0) || !c.total_output.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "region {}: class outputs must be finite and non-negative",
            d.region_id
        )));
    }
    let total = d.total_output();
    if !(total > 0.0) {
        return Err(Error::ZeroTotalOutput);
    }
    let nf = n as f64;
    let mut sum = 0.0;
    let mut cum_q = 0.0;
    for c in &d.classes {
        if c.count == 0 {
            continue;
        }
        let q_prev = cum_q / total;
        cum_q += c.total_output;
        sum += (cum_q / total + q_prev) * (c.count as f64 / nf);
    }
    let g = nf / (nf - 1.0) * (1.0 - sum) * 100.0;
    Ok(g.clamp(0.0, 100.0))
}

#[derive(Debug, Deserialize)]
struct GroupedRow {
    region_id: String,
    class_rank: i64,
    farm_count: u64,
    total_output: f64,
}

/// Reads rows `region_id,class_rank,farm_count,total_output`. Regions keep
/// their order of first appearance; classes are sorted by rank.
pub fn read_grouped_csv<R: Read>(input: R) -> Result<Vec<GroupedDistribution>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    for col in ["region_id", "class_rank", "farm_count", "total_output"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::MissingColumn(col.into()));
        }
    }
    let mut order = Vec::new();
    let mut groups: BTreeMap<String, Vec<(i64, SizeClass)>> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row: GroupedRow = rec.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line: line + 2,
            message: e.to_string(),
        })?;
        if !groups.contains_key(&row.region_id) {
            order.push(row.region_id.clone());
        }
        groups.entry(row.region_id).or_default().push((
            row.class_rank,
            SizeClass {
                count: row.farm_count,
                total_output: row.total_output,
            },
        ));
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let mut cls = groups.remove(&id).unwrap_or_default();
            cls.sort_by_key(|c| c.0);
            GroupedDistribution::new(id, cls.into_iter().map(|c| c.1).collect())
        })
        .collect())
}

pub fn load_grouped_csv(path: impl AsRef<Path>) -> Result<Vec<GroupedDistribution>> {
    read_grouped_csv(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(counts: &[u64], outputs: &[f64]) -> f64 {
        gini_grouped(&GroupedDistribution::from_counts("r", counts, outputs).unwrap()).unwrap()
    }

    #[test]
    fn boundary_cases() {
        assert_eq!(g(&[5, 5], &[50.0, 50.0]), 0.0);
        assert_eq!(g(&[9, 1], &[0.0, 100.0]), 100.0);
    }

    #[test]
    fn errors() {
        let one = GroupedDistribution::from_counts("r", &[1, 0], &[5.0, 0.0]).unwrap();
        assert!(matches!(gini_grouped(&one), Err(Error::TooFewFarms(1))));
        let zero = GroupedDistribution::from_counts("r", &[3, 4], &[0.0, 0.0]).unwrap();
        assert!(matches!(gini_grouped(&zero), Err(Error::ZeroTotalOutput)));
    }

    #[test]
    fn csv_grouping() {
        let text = "region_id,class_rank,farm_count,total_output\nB,2,1,10\nA,1,2,2\nB,1,3,3\n";
        let regions = read_grouped_csv(text.as_bytes()).unwrap();
        assert_eq!(regions.len(), 2);
        assert_eq!(regions[0].region_id, "B");
        assert_eq!(regions[0].classes[0].count, 3);
        let bad = "region_id,class_rank,farm_count\nA,1,2\n";
        assert!(matches!(read_grouped_csv(bad.as_bytes()), Err(Error::MissingColumn(_))));
    }
}
