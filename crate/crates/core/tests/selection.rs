mod common;

use scsar::engine::EngineConfig;
use scsar::likelihood::{self, ModelFamily};
use scsar::selection::{grid_search, write_grid_csv};

use common::*;

#[test]
fn single_cell_is_pooled_fit() {
    let (d, w) = single_regime(50, 2, ModelFamily::Sar, 0.1, 4, 1);
    let defaults = EngineConfig::new(ModelFamily::Sar, 1, 0.0);
    let g = grid_search(&d, &w, ModelFamily::Sar, &[1], &[0.0], &[1], &defaults).unwrap();
    assert_eq!(g.entries.len(), 1);
    let pooled = likelihood::fit_sar(d.y(), d.x(), &w).unwrap();
    assert!((g.entries[0].bic - pooled.bic()).abs() < 1e-8);
    assert!(g.chosen.as_ref().unwrap().fallback);
}

#[test]
fn grid_is_order_insensitive_and_records_failures() {
    let (d, w) = single_regime(60, 1, ModelFamily::Ols, 0.0, 4, 2);
    let defaults = EngineConfig::new(ModelFamily::Ols, 1, 0.0);
    let a = grid_search(&d, &w, ModelFamily::Ols, &[1, 2, 3, 40], &[0.0, 0.5], &[1, 2], &defaults).unwrap();
    let b = grid_search(&d, &w, ModelFamily::Ols, &[40, 3, 2, 1], &[0.5, 0.0], &[1, 2], &defaults).unwrap();
    assert_eq!(a.entries, b.entries);
    assert_eq!(a.chosen, b.chosen);
    assert_eq!(a.entries.len(), 6);
    assert_eq!(a.failures.len(), 2);
    assert!(a.failures.iter().all(|f| f.k == 40));
    let mut buf = Vec::new();
    write_grid_csv(&a.entries, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 7);
}
