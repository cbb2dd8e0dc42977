//! Experiment matrix and its qualitative/quantitative tables.

use std::fmt;

use crate::simworld::{Category, ControllerKind, ScenarioKind, SimError, Simulator, TrialConfig};

/// Numeric trial settings shared by every cell of the matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialParams {
    pub speed: f64,
    pub detection_distance: f64,
    pub max_decel: f64,
    pub dt: f64,
}

impl Default for TrialParams {
    fn default() -> Self {
        Self {
            speed: TrialConfig::DEFAULT_SPEED,
            detection_distance: TrialConfig::DEFAULT_DETECTION_DISTANCE,
            max_decel: TrialConfig::DEFAULT_MAX_DECEL,
            dt: TrialConfig::DEFAULT_DT,
        }
    }
}

impl TrialParams {
    pub fn config(&self, obstacle: &str, scenario: ScenarioKind, controller: ControllerKind) -> TrialConfig {
        TrialConfig {
            speed: self.speed,
            detection_distance: self.detection_distance,
            max_decel: self.max_decel,
            dt: self.dt,
            ..TrialConfig::new(obstacle, scenario, controller)
        }
    }
}

/// A report column: scenario × controller group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Column {
    pub scenario: ScenarioKind,
    pub controller: ControllerKind,
}

impl Column {
    pub fn header(self) -> String {
        let scenario = match self.scenario {
            ScenarioKind::LaneChangeRestricted => "Restricted",
            ScenarioKind::LaneChangeUnrestricted => "Unrestricted",
        };
        let group = match self.controller {
            ControllerKind::Baseline => "Control",
            ControllerKind::Kg => "Experimental",
        };
        format!("{scenario} {group}")
    }

    fn csv_header(self) -> String {
        self.header().to_lowercase().replace(' ', "_")
    }
}

/// Column order of both tables.
pub const COLUMNS: [Column; 4] = [
    Column { scenario: ScenarioKind::LaneChangeRestricted, controller: ControllerKind::Baseline },
    Column { scenario: ScenarioKind::LaneChangeRestricted, controller: ControllerKind::Kg },
    Column { scenario: ScenarioKind::LaneChangeUnrestricted, controller: ControllerKind::Baseline },
    Column { scenario: ScenarioKind::LaneChangeUnrestricted, controller: ControllerKind::Kg },
];

/// A share in tenths of a percent, rounded half up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Percent(pub i64);

impl Percent {
    pub fn of(count: usize, total: usize) -> Self {
        assert!(total > 0, "percentage of an empty column");
        let (count, total) = (count as i64, total as i64);
        Percent((count * 2000 + total) / (2 * total))
    }

    /// Difference in tenths of a percentage point.
    pub fn minus(self, other: Percent) -> PointDelta {
        PointDelta(self.0 - other.0)
    }
}

/// Whole percentages print without a decimal: `0%`, `100%`, `46.7%`.
impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 10 == 0 {
            write!(f, "{}%", self.0 / 10)
        } else {
            write!(f, "{}.{}%", self.0 / 10, self.0 % 10)
        }
    }
}

/// Percentage-point difference in tenths; always printed with one decimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PointDelta(pub i64);

impl PointDelta {
    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 10.0
    }
}

impl fmt::Display for PointDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.abs();
        write!(f, "{sign}{}.{}", abs / 10, abs % 10)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixRow {
    pub obstacle: String,
    pub display_name: String,
    /// One category per entry of [`COLUMNS`].
    pub cells: [Category; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ColumnSummary {
    pub lane_changes: usize,
    pub sudden_brakes: usize,
    pub collide_or_stop: usize,
}

impl ColumnSummary {
    pub fn total(&self) -> usize {
        self.lane_changes + self.sudden_brakes + self.collide_or_stop
    }

    pub fn count(&self, category: Category) -> usize {
        match category {
            Category::LaneChange => self.lane_changes,
            Category::SuddenBraking => self.sudden_brakes,
            Category::CollideStop => self.collide_or_stop,
        }
    }

    pub fn percent(&self, category: Category) -> Percent {
        Percent::of(self.count(category), self.total())
    }

    /// `count (percent)`, as printed in the quantitative table.
    pub fn cell(&self, category: Category) -> String {
        format!("{} ({})", self.count(category), self.percent(category))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixReport {
    pub rows: Vec<MatrixRow>,
}

const METRICS: [(Category, &str); 3] = [
    (Category::LaneChange, "Total Lane Changes"),
    (Category::SuddenBraking, "Total Sudden Braking Incidents"),
    (Category::CollideStop, "Total Collide or Stop"),
];

impl MatrixReport {
    pub fn summary(&self, column: usize) -> ColumnSummary {
        let mut s = ColumnSummary::default();
        for row in &self.rows {
            match row.cells[column] {
                Category::LaneChange => s.lane_changes += 1,
                Category::SuddenBraking => s.sudden_brakes += 1,
                Category::CollideStop => s.collide_or_stop += 1,
            }
        }
        s
    }

    pub fn summaries(&self) -> [ColumnSummary; 4] {
        [0, 1, 2, 3].map(|c| self.summary(c))
    }

    pub fn cell(&self, obstacle: &str, column: Column) -> Option<Category> {
        let idx = COLUMNS.iter().position(|&c| c == column)?;
        self.rows.iter().find(|r| r.obstacle == obstacle).map(|r| r.cells[idx])
    }

    /// The same report with control and experimental groups exchanged.
    pub fn with_groups_swapped(&self) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| MatrixRow { cells: [r.cells[1], r.cells[0], r.cells[3], r.cells[2]], ..r.clone() })
            .collect();
        Self { rows }
    }

    pub fn render_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.display_name.len()).max().unwrap_or(0).max(6);
        let headers: Vec<String> = COLUMNS.iter().map(|c| c.header()).collect();
        let mut out = String::new();
        out.push_str("Table 1. Qualitative results\n");
        out.push_str(&format!("{:<width$} | {}\n", "Object", headers.join(" | ")));
        for row in &self.rows {
            let cells: Vec<&str> = row.cells.iter().map(|c| c.label()).collect();
            out.push_str(&format!("{:<width$} | {}\n", row.display_name, cells.join(" | ")));
        }

        let summaries = self.summaries();
        out.push_str("\nTable 2. Quantitative results\n");
        out.push_str(&format!("Metric | {}\n", headers.join(" | ")));
        for (category, name) in METRICS {
            let cells: Vec<String> = summaries.iter().map(|s| s.cell(category)).collect();
            out.push_str(&format!("{name} | {}\n", cells.join(" | ")));
        }

        let (brake, lane) = headline_deltas(self);
        out.push_str("\nHeadline deltas (experimental - control)\n");
        out.push_str(&format!("Sudden braking, lane change restricted: {brake} pp\n"));
        out.push_str(&format!("Lane changes, lane change unrestricted: {lane} pp\n"));
        out
    }

    pub fn render_csv(&self) -> String {
        let headers: Vec<String> = COLUMNS.iter().map(|c| c.csv_header()).collect();
        let block = |header: &[String], records: Vec<Vec<String>>| -> String {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(header).expect("in-memory write");
            for r in records {
                w.write_record(&r).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
        };

        let mut header = vec!["object".to_string()];
        header.extend(headers.iter().cloned());
        let table1 = block(
            &header,
            self.rows
                .iter()
                .map(|r| {
                    let mut rec = vec![r.display_name.clone()];
                    rec.extend(r.cells.iter().map(|c| c.label().to_string()));
                    rec
                })
                .collect(),
        );

        let summaries = self.summaries();
        header[0] = "metric".to_string();
        let table2 = block(
            &header,
            METRICS
                .iter()
                .map(|&(category, name)| {
                    let mut rec = vec![name.to_string()];
                    rec.extend(summaries.iter().map(|s| s.cell(category)));
                    rec
                })
                .collect(),
        );

        let (brake, lane) = headline_deltas(self);
        let deltas = block(
            &["delta".to_string(), "percentage_points".to_string()],
            vec![
                vec!["sudden_braking_restricted".to_string(), brake.to_string()],
                vec!["lane_change_unrestricted".to_string(), lane.to_string()],
            ],
        );
        format!("{table1}\n{table2}\n{deltas}")
    }
}

/// Runs all obstacle × scenario × controller trials.
pub fn run_matrix(sim: &Simulator, params: &TrialParams) -> Result<MatrixReport, SimError> {
    let mut rows = Vec::with_capacity(sim.catalog.len());
    for obstacle in &sim.catalog {
        let mut cells = [Category::CollideStop; 4];
        for (cell, column) in cells.iter_mut().zip(COLUMNS) {
            let config = params.config(&obstacle.id, column.scenario, column.controller);
            *cell = sim.run_trial(&config)?.category;
        }
        rows.push(MatrixRow { obstacle: obstacle.id.clone(), display_name: obstacle.display_name.clone(), cells });
    }
    Ok(MatrixReport { rows })
}

/// `(sudden-brake delta in the restricted scenario, lane-change delta in the
/// unrestricted scenario)`, experimental minus control, computed from the
/// rounded column percentages.
pub fn headline_deltas(report: &MatrixReport) -> (PointDelta, PointDelta) {
    let s = report.summaries();
    let brake = s[1].percent(Category::SuddenBraking).minus(s[0].percent(Category::SuddenBraking));
    let lane = s[3].percent(Category::LaneChange).minus(s[2].percent(Category::LaneChange));
    (brake, lane)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::catalog;

    #[test]
    fn percent_rounding() {
        assert_eq!(Percent::of(7, 15), Percent(467));
        assert_eq!(Percent::of(8, 15), Percent(533));
        assert_eq!(Percent::of(2, 15), Percent(133));
        assert_eq!(Percent::of(13, 15), Percent(867));
        assert_eq!(Percent::of(15, 15), Percent(1000));
        // exact half rounds up
        assert_eq!(Percent::of(1, 16), Percent(63));
        assert_eq!(Percent::of(0, 15).to_string(), "0%");
        assert_eq!(Percent::of(15, 15).to_string(), "100%");
        assert_eq!(Percent::of(7, 15).to_string(), "46.7%");
    }

    #[test]
    fn delta_formatting() {
        assert_eq!(PointDelta(66).to_string(), "6.6");
        assert_eq!(PointDelta(-133).to_string(), "-13.3");
        assert_eq!(PointDelta(-5).to_string(), "-0.5");
        assert_eq!(PointDelta(0).to_string(), "0.0");
    }

    fn report() -> MatrixReport {
        run_matrix(&Simulator::new(catalog()), &TrialParams::default()).unwrap()
    }

    #[test]
    fn matrix_headline_examples() {
        let r = report();
        let s = r.summaries();
        assert_eq!(s[1].cell(Category::SuddenBraking), "2 (13.3%)");
        assert_eq!(s[3].cell(Category::LaneChange), "8 (53.3%)");
        assert_eq!(s[0].cell(Category::CollideStop), "15 (100%)");
        assert!(s.iter().all(|c| c.total() == 15));
        assert_eq!(headline_deltas(&r), (PointDelta(133), PointDelta(66)));
    }

    #[test]
    fn identical_columns_give_zero_deltas() {
        let mut r = report();
        for row in &mut r.rows {
            row.cells[1] = row.cells[0];
            row.cells[3] = row.cells[2];
        }
        assert_eq!(headline_deltas(&r), (PointDelta(0), PointDelta(0)));
    }

    #[test]
    fn swapping_groups_negates_deltas() {
        let r = report();
        let (b, l) = headline_deltas(&r);
        let (sb, sl) = headline_deltas(&r.with_groups_swapped());
        assert_eq!((sb.0, sl.0), (-b.0, -l.0));
    }

    #[test]
    fn text_rendering_contains_table_rows() {
        let text = report().render_text();
        assert!(text.contains("Total Sudden Braking Incidents | 0 (0%) | 2 (13.3%) | 0 (0%) | 0 (0%)"));
        assert!(text.contains("Sudden braking, lane change restricted: 13.3 pp"));
        let t1 = text.find("Table 1").unwrap();
        let t2 = text.find("Table 2").unwrap();
        let d = text.find("Headline").unwrap();
        assert!(t1 < t2 && t2 < d);
    }

    #[test]
    fn csv_rendering_keeps_row_order() {
        let csv = report().render_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[0],
            "object,restricted_control,restricted_experimental,unrestricted_control,unrestricted_experimental"
        );
        assert!(lines[1].starts_with("Construction cone,"));
        assert!(lines[15].starts_with("Shopping trolley,"));
        assert_eq!(lines[16], "");
        assert!(csv.contains("sudden_braking_restricted,13.3\n"));
    }
}
