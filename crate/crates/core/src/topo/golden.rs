//! Bundled reference panel and per-cell comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{InvariantReport, TrappingSet};
use crate::error::{Error, Result};

const GOLDEN_JSON: &str = include_str!("../../assets/invariants_golden.json");
const TS_4_2: &str = include_str!("../../assets/ts_4_2.txt");
const TS_4_6: &str = include_str!("../../assets/ts_4_6.txt");
const TS_9_2: &str = include_str!("../../assets/ts_9_2.txt");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldenCell {
    pub value: f64,
    pub tol: f64,
    /// Mismatches are reported but do not fail the comparison.
    #[serde(default)]
    pub advisory: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldenEntry {
    pub name: String,
    pub file: String,
    pub cells: BTreeMap<String, GoldenCell>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldenTable {
    pub version: u32,
    pub entries: Vec<GoldenEntry>,
    /// Published values for sets whose matrices are not available.
    #[serde(default)]
    pub reference_only: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCheck {
    pub field: String,
    pub expected: f64,
    pub got: f64,
    pub tol: f64,
    pub advisory: bool,
    pub pass: bool,
}

impl GoldenTable {
    pub fn bundled() -> Self {
        serde_json::from_str(GOLDEN_JSON).expect("bundled golden table is valid JSON")
    }

    /// Entry whose name or file name matches `key`.
    pub fn find(&self, key: &str) -> Option<&GoldenEntry> {
        self.entries.iter().find(|e| e.name == key || e.file == key)
    }
}

/// The three bundled trapping sets with their display names.
pub fn bundled_trapping_sets() -> Vec<(&'static str, TrappingSet)> {
    [("TS(4,2)", TS_4_2), ("TS(4,6)", TS_4_6), ("TS(9,2)", TS_9_2)]
        .into_iter()
        .map(|(name, text)| (name, TrappingSet::parse(text).expect("bundled trapping set parses")))
        .collect()
}

fn report_field(report: &InvariantReport, field: &str) -> Option<f64> {
    Some(match field {
        "rho" => report.rho,
        "r_crit" => report.r_crit,
        "neg_modes_r1" => report.neg_modes_r1 as f64,
        "genus" => report.genus,
        "k0" => report.k0 as f64,
        "k1" => report.k1 as f64,
        "kervaire" => report.kervaire as f64,
        "betti0" => report.betti0 as f64,
        "betti1_mod2" => report.betti1_mod2 as f64,
        "cycle_rank" => report.cycle_rank as f64,
        _ => return None,
    })
}

/// Checks every cell of `entry`; a cell passes when `|got - expected| <= tol`.
pub fn compare_golden(report: &InvariantReport, entry: &GoldenEntry) -> Result<Vec<CellCheck>> {
    entry
        .cells
        .iter()
        .map(|(field, cell)| {
            let got = report_field(report, field)
                .ok_or_else(|| Error::invalid(format!("golden entry {} names unknown field '{field}'", entry.name)))?;
            Ok(CellCheck {
                field: field.clone(),
                expected: cell.value,
                got,
                tol: cell.tol,
                advisory: cell.advisory,
                pass: (got - cell.value).abs() <= cell.tol,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::invariant_report;

    #[test]
    fn bundled_table_loads() {
        let t = GoldenTable::bundled();
        assert_eq!(t.entries.len(), 3);
        assert_eq!(t.reference_only.len(), 3);
        assert!(t.find("ts_9_2.txt").is_some());
        let sets = bundled_trapping_sets();
        assert_eq!(sets.iter().map(|(_, ts)| (ts.a(), ts.b())).collect::<Vec<_>>(), vec![(4, 2), (4, 6), (9, 2)]);
    }

    #[test]
    fn spectral_cells_match() {
        let table = GoldenTable::bundled();
        for (name, ts) in bundled_trapping_sets() {
            let checks = compare_golden(&invariant_report(&ts).unwrap(), table.find(name).unwrap()).unwrap();
            for c in checks.iter().filter(|c| ["rho", "r_crit", "genus", "betti0", "betti1_mod2"].contains(&c.field.as_str())) {
                assert!(c.pass, "{name} {c:?}");
            }
        }
    }
}
