//! Calibration guard: brute-force comparison of both controllers against
//! the reference qualitative results table.

use std::fmt;

use crate::ontology::Catalog;
use crate::reasoner::{Decision, Reasoner, ReasonerError};
use crate::simworld::{baseline_controller, BaselineAction, Category, ControllerKind, ScenarioKind};

/// Reference rows: object & restricted control & restricted experimental &
/// unrestricted control & unrestricted experimental.
pub const GOLDEN_TABLE: &str = "\
Construction cone       & Collide/Stop & Collide/Stop & Lane Change & Lane Change
Box 01                  & Collide/Stop & Collide/Stop & Lane Change & Lane Change
Creased box 02          & Collide/Stop & Collide/Stop & Collide/Stop & Collide/Stop
Cola can                & Collide/Stop & Collide/Stop & Collide/Stop & Collide/Stop
Garbage 01              & Collide/Stop & Collide/Stop & Collide/Stop & Collide/Stop
Garbage 05              & Collide/Stop & Collide/Stop & Collide/Stop & Collide/Stop
Garbage 06              & Collide/Stop & Collide/Stop & Collide/Stop & Collide/Stop
Trash can 03            & Collide/Stop & Collide/Stop & Collide/Stop & Lane Change
Plastic chair           & Collide/Stop & Sudden Braking & Lane Change & Lane Change
Gnome                   & Collide/Stop & Collide/Stop & Collide/Stop & Collide/Stop
Watering can            & Collide/Stop & Collide/Stop & Collide/Stop & Lane Change
Plastic bag             & Collide/Stop & Collide/Stop & Lane Change & Collide/Stop
Shopping bag            & Collide/Stop & Collide/Stop & Lane Change & Lane Change
Shopping cart           & Collide/Stop & Sudden Braking & Lane Change & Lane Change
Shopping trolley        & Collide/Stop & Collide/Stop & Lane Change & Lane Change
";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenRow {
    pub display_name: String,
    /// Restricted control, restricted experimental, unrestricted control,
    /// unrestricted experimental.
    pub cells: [Category; 4],
}

pub fn golden_rows() -> Vec<GoldenRow> {
    GOLDEN_TABLE
        .lines()
        .map(|line| {
            let fields: Vec<&str> = line.split('&').map(str::trim).collect();
            let cell = |i: usize| Category::from_label(fields[i]).expect("golden label");
            GoldenRow { display_name: fields[0].to_string(), cells: [cell(1), cell(2), cell(3), cell(4)] }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub obstacle: String,
    pub scenario: ScenarioKind,
    pub group: ControllerKind,
    pub expected: Category,
    pub actual: Category,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mismatch at ({}, {}) for {}: expected {}, got {}",
            self.obstacle,
            self.scenario.token(),
            self.group.token(),
            self.expected,
            self.actual
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleOutcome {
    Pass {
        checked: usize,
    },
    Fail(Mismatch),
    /// A catalog entry without a golden row, or vice versa.
    Uncovered(String),
    Reasoner(ReasonerError),
}

impl OracleOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, OracleOutcome::Pass { .. })
    }
}

impl fmt::Display for OracleOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleOutcome::Pass { checked } => write!(f, "PASS: {checked} cells match"),
            OracleOutcome::Fail(m) => write!(f, "FAIL: {m}"),
            OracleOutcome::Uncovered(name) => {
                write!(f, "FAIL: `{name}` is not covered by both catalog and golden table")
            }
            OracleOutcome::Reasoner(e) => write!(f, "FAIL: {e}"),
        }
    }
}

fn kg_category(d: Decision) -> Category {
    match d {
        Decision::LaneChange => Category::LaneChange,
        Decision::SuddenBrake => Category::SuddenBraking,
        Decision::Proceed => Category::CollideStop,
    }
}

fn baseline_category(a: BaselineAction) -> Category {
    match a {
        BaselineAction::LaneChange => Category::LaneChange,
        BaselineAction::Continue => Category::CollideStop,
    }
}

/// Checks the experimental cells against the reasoner first, then the
/// control cells against the baseline, stopping at the first mismatch.
pub fn calibration_oracle(catalog: &Catalog, min_frontal_area: f64) -> OracleOutcome {
    let golden = golden_rows();
    if golden.len() != catalog.len() {
        let missing = golden
            .iter()
            .find(|g| catalog.iter().all(|o| o.display_name != g.display_name))
            .map(|g| g.display_name.clone())
            .unwrap_or_else(|| "catalog size".to_string());
        return OracleOutcome::Uncovered(missing);
    }
    let mut pairs = Vec::with_capacity(golden.len());
    for row in &golden {
        match catalog.iter().find(|o| o.display_name == row.display_name) {
            Some(o) => pairs.push((o, row)),
            None => return OracleOutcome::Uncovered(row.display_name.clone()),
        }
    }

    let reasoner = match Reasoner::new(crate::ontology::build_graph(catalog)) {
        Ok(r) => r,
        Err(e) => return OracleOutcome::Reasoner(e),
    };
    let scenarios = [(ScenarioKind::LaneChangeRestricted, 0), (ScenarioKind::LaneChangeUnrestricted, 2)];
    let mut checked = 0;

    for &(obstacle, row) in &pairs {
        for (scenario, col) in scenarios {
            let actual = match reasoner.decide_obstacle(obstacle, scenario.lane_feasible()) {
                Ok((d, _)) => kg_category(d),
                Err(e) => return OracleOutcome::Reasoner(e),
            };
            let expected = row.cells[col + 1];
            if actual != expected {
                return OracleOutcome::Fail(Mismatch {
                    obstacle: obstacle.id.clone(),
                    scenario,
                    group: ControllerKind::Kg,
                    expected,
                    actual,
                });
            }
            checked += 1;
        }
    }
    for &(obstacle, row) in &pairs {
        for (scenario, col) in scenarios {
            let actual = baseline_category(baseline_controller(obstacle, scenario, min_frontal_area));
            let expected = row.cells[col];
            if actual != expected {
                return OracleOutcome::Fail(Mismatch {
                    obstacle: obstacle.id.clone(),
                    scenario,
                    group: ControllerKind::Baseline,
                    expected,
                    actual,
                });
            }
            checked += 1;
        }
    }
    OracleOutcome::Pass { checked }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::{catalog, UndersideRiskClass};
    use crate::simworld::DEFAULT_MIN_FRONTAL_AREA;

    #[test]
    fn golden_table_parses_in_catalog_order() {
        let rows = golden_rows();
        assert_eq!(rows.len(), 15);
        let names: Vec<_> = catalog().iter().map(|o| o.display_name.clone()).collect();
        let golden: Vec<_> = rows.iter().map(|r| r.display_name.clone()).collect();
        assert_eq!(names, golden);
    }

    #[test]
    fn shipped_calibration_passes() {
        assert_eq!(calibration_oracle(&catalog(), DEFAULT_MIN_FRONTAL_AREA), OracleOutcome::Pass { checked: 60 });
    }

    #[test]
    fn flipped_chair_risk_fails_at_restricted() {
        let mut cat = catalog();
        cat.get_mut("plastic_chair").unwrap().valuation.underside_risk = UndersideRiskClass::Low;
        let OracleOutcome::Fail(m) = calibration_oracle(&cat, DEFAULT_MIN_FRONTAL_AREA) else {
            panic!("expected mismatch");
        };
        assert_eq!(m.obstacle, "plastic_chair");
        assert_eq!(m.scenario, ScenarioKind::LaneChangeRestricted);
        assert_eq!(m.expected, Category::SuddenBraking);
        assert_eq!(m.actual, Category::CollideStop);
    }

    #[test]
    fn zero_threshold_fails_at_first_non_swerving_control_obstacle() {
        let OracleOutcome::Fail(m) = calibration_oracle(&catalog(), 0.0) else {
            panic!("expected mismatch");
        };
        assert_eq!(m.obstacle, "creased_box_02");
        assert_eq!(m.group, ControllerKind::Baseline);
        assert_eq!(m.scenario, ScenarioKind::LaneChangeUnrestricted);
        assert!(m.to_string().contains("creased_box_02"));
    }

    #[test]
    fn renamed_entry_is_uncovered() {
        let mut cat = catalog();
        cat.get_mut("gnome").unwrap().display_name = "Garden gnome".into();
        assert_eq!(calibration_oracle(&cat, DEFAULT_MIN_FRONTAL_AREA), OracleOutcome::Uncovered("Gnome".into()));
    }
}
