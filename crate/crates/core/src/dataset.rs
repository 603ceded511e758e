use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::select_rows;
use crate::weights::UnitIndexMap;

pub const INTERCEPT_NAME: &str = "Intercept";

/// Units with planar coordinates, a response and a design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    index: UnitIndexMap,
    coords: Vec<[f64; 2]>,
    y: Vec<f64>,
    x: DMatrix<f64>,
    names: Vec<String>,
}

impl Dataset {
    pub fn new(
        index: UnitIndexMap,
        coords: Vec<[f64; 2]>,
        y: Vec<f64>,
        x: DMatrix<f64>,
        names: Vec<String>,
    ) -> Result<Self> {
        let n = index.len();
        if n == 0 {
            return Err(Error::Dimension("dataset has no units".into()));
        }
        if x.ncols() == 0 {
            return Err(Error::Dimension("design matrix has no columns".into()));
        }
        for (what, len) in [("coords", coords.len()), ("y", y.len()), ("X rows", x.nrows())] {
            if len != n {
                return Err(Error::Dimension(format!("{what} has {len} entries for {n} units")));
            }
        }
        if names.len() != x.ncols() {
            return Err(Error::Dimension(format!(
                "{} column names for {} columns",
                names.len(),
                x.ncols()
            )));
        }
        let finite = y.iter().chain(x.iter()).chain(coords.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Dimension("dataset contains non-finite values".into()));
        }
        Ok(Self {
            index,
            coords,
            y,
            x,
            names,
        })
    }

    /// Prepends an all-ones column named [`INTERCEPT_NAME`] to `covariates`.
    pub fn with_intercept(
        index: UnitIndexMap,
        coords: Vec<[f64; 2]>,
        y: Vec<f64>,
        covariates: &DMatrix<f64>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = covariates.nrows();
        let x = DMatrix::from_fn(n, covariates.ncols() + 1, |r, c| {
            if c == 0 {
                1.0
            } else {
                covariates[(r, c - 1)]
            }
        });
        let mut names = Vec::with_capacity(x.ncols());
        names.push(INTERCEPT_NAME.to_owned());
        names.extend(covariate_names);
        Self::new(index, coords, y, x, names)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn index(&self) -> &UnitIndexMap {
        &self.index
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// `(y, X)` restricted to `rows`, in order.
    pub fn subset(&self, rows: &[usize]) -> (Vec<f64>, DMatrix<f64>) {
        (rows.iter().map(|&i| self.y[i]).collect(), select_rows(&self.x, rows))
    }

    /// Same units with rows permuted: new row `r` is old row `order[r]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let index = UnitIndexMap::new(order.iter().map(|&i| self.index.id(i).to_owned()))?;
        let coords = order.iter().map(|&i| self.coords[i]).collect();
        let (y, x) = self.subset(order);
        Self::new(index, coords, y, x, self.names.clone())
    }

    /// Replaces the response vector.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(self.index.clone(), self.coords.clone(), y, self.x.clone(), self.names.clone())
    }

    /// Replaces the design matrix.
    pub fn with_design(&self, x: DMatrix<f64>) -> Result<Self> {
        Self::new(self.index.clone(), self.coords.clone(), self.y.clone(), x, self.names.clone())
    }
}

/// Indices of columns that are identically one.
pub(crate) fn intercept_columns(x: &DMatrix<f64>) -> Vec<usize> {
    (0..x.ncols())
        .filter(|&c| x.column(c).iter().all(|&v| v == 1.0))
        .collect()
}
