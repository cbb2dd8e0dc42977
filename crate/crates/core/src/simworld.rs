//! Deterministic three-lane kinematic world.
//!
//! The ego vehicle cruises in the center lane toward one static obstacle.
//! Once the obstacle is within detection distance the controller picks an
//! action, held for the rest of the trial. Kinematics are explicit Euler on
//! a fixed timestep.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::ontology::{Catalog, DensityClass, MalleabilityClass, ObstacleClass, PassUnderClass, PropertyValuation};
use crate::reasoner::{Decision, DecisionTrace, Reasoner, ReasonerError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneWorld {
    pub lane_count: usize,
    /// m
    pub lane_width: f64,
    /// m
    pub road_length: f64,
    /// Longitudinal position of the obstacle, m.
    pub obstacle_position: f64,
    /// Time to move one full lane width sideways, s.
    pub lane_change_duration: f64,
}

impl Default for LaneWorld {
    fn default() -> Self {
        Self { lane_count: 3, lane_width: 3.5, road_length: 200.0, obstacle_position: 50.0, lane_change_duration: 2.0 }
    }
}

impl LaneWorld {
    pub fn center_lane(&self) -> usize {
        self.lane_count / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneChangePhase {
    Idle,
    InProgress { target: usize },
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoState {
    /// Front bumper position along the road, m.
    pub position: f64,
    pub lane: usize,
    /// m/s, never negative.
    pub speed: f64,
    /// Lateral progress of the current lane change, m.
    pub lateral_offset: f64,
    pub lane_change: LaneChangePhase,
}

impl EgoState {
    pub fn start(world: &LaneWorld, speed: f64) -> Self {
        Self {
            position: 0.0,
            lane: world.center_lane(),
            speed,
            lateral_offset: 0.0,
            lane_change: LaneChangePhase::Idle,
        }
    }
}

/// Longitudinal/lateral command applied for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    /// Autopilot cruise before the obstacle is detected.
    Cruise,
    Continue,
    Proceed,
    LaneChange,
    SuddenBrake,
}

impl Action {
    pub fn token(self) -> &'static str {
        match self {
            Action::Cruise => "cruise",
            Action::Continue => "continue",
            Action::Proceed => "proceed",
            Action::LaneChange => "lane_change",
            Action::SuddenBrake => "sudden_brake",
        }
    }
}

/// Advances the ego one tick.
pub fn step(world: &LaneWorld, ego: EgoState, action: Action, dt: f64, max_decel: f64) -> EgoState {
    debug_assert!(dt > 0.0);
    let mut next = ego;
    next.position += ego.speed * dt;
    match action {
        Action::Cruise | Action::Continue | Action::Proceed => {}
        Action::SuddenBrake => next.speed = (ego.speed - max_decel * dt).max(0.0),
        Action::LaneChange => {
            let target = match ego.lane_change {
                LaneChangePhase::Idle => Some(if ego.lane > 0 { ego.lane - 1 } else { ego.lane + 1 }),
                LaneChangePhase::InProgress { target } => Some(target),
                LaneChangePhase::Done => None,
            };
            if let Some(target) = target {
                next.lateral_offset += world.lane_width / world.lane_change_duration * dt;
                if next.lateral_offset >= world.lane_width - 1e-9 {
                    next.lane = target;
                    next.lateral_offset = 0.0;
                    next.lane_change = LaneChangePhase::Done;
                } else {
                    next.lane_change = LaneChangePhase::InProgress { target };
                }
            }
        }
    }
    next
}

/// Distance covered braking from `speed` to rest under [`step`].
pub fn simulated_stopping_distance(speed: f64, max_decel: f64, dt: f64) -> f64 {
    let world = LaneWorld::default();
    let mut ego = EgoState::start(&world, speed);
    while ego.speed > 0.0 {
        ego = step(&world, ego, Action::SuddenBrake, dt, max_decel);
    }
    ego.position
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// Vehicles alongside the ego in both adjacent lanes for the whole trial.
    LaneChangeRestricted,
    LaneChangeUnrestricted,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 2] = [ScenarioKind::LaneChangeRestricted, ScenarioKind::LaneChangeUnrestricted];

    pub fn lane_feasible(self) -> bool {
        self == ScenarioKind::LaneChangeUnrestricted
    }

    pub fn token(self) -> &'static str {
        match self {
            ScenarioKind::LaneChangeRestricted => "restricted",
            ScenarioKind::LaneChangeUnrestricted => "unrestricted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControllerKind {
    /// Stock autopilot emulation (control group).
    Baseline,
    /// Knowledge-graph override at detection (experimental group).
    Kg,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 2] = [ControllerKind::Baseline, ControllerKind::Kg];

    pub fn token(self) -> &'static str {
        match self {
            ControllerKind::Baseline => "baseline",
            ControllerKind::Kg => "kg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineAction {
    Continue,
    LaneChange,
}

/// Minimum frontal area that makes the baseline autopilot swerve, m².
pub const DEFAULT_MIN_FRONTAL_AREA: f64 = 0.40;

/// Autopilot emulation: never leaves its lane when flanked, otherwise
/// swerves around obstacles presenting at least `min_frontal_area`.
pub fn baseline_controller(obstacle: &ObstacleClass, scenario: ScenarioKind, min_frontal_area: f64) -> BaselineAction {
    match scenario {
        ScenarioKind::LaneChangeRestricted => BaselineAction::Continue,
        ScenarioKind::LaneChangeUnrestricted => {
            if obstacle.dimensions.frontal_area() >= min_frontal_area {
                BaselineAction::LaneChange
            } else {
                BaselineAction::Continue
            }
        }
    }
}

pub fn kg_controller(
    reasoner: &Reasoner,
    obstacle: &ObstacleClass,
    scenario: ScenarioKind,
) -> Result<(Decision, DecisionTrace), ReasonerError> {
    reasoner.decide_obstacle(obstacle, scenario.lane_feasible())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub obstacle: String,
    pub scenario: ScenarioKind,
    pub controller: ControllerKind,
    /// Initial speed, m/s.
    pub speed: f64,
    /// m
    pub detection_distance: f64,
    /// m/s²
    pub max_decel: f64,
    /// s
    pub dt: f64,
}

impl TrialConfig {
    pub const DEFAULT_SPEED: f64 = 10.0;
    pub const DEFAULT_DETECTION_DISTANCE: f64 = 30.0;
    pub const DEFAULT_MAX_DECEL: f64 = 6.0;
    pub const DEFAULT_DT: f64 = 0.05;

    pub fn new(obstacle: impl Into<String>, scenario: ScenarioKind, controller: ControllerKind) -> Self {
        Self {
            obstacle: obstacle.into(),
            scenario,
            controller,
            speed: Self::DEFAULT_SPEED,
            detection_distance: Self::DEFAULT_DETECTION_DISTANCE,
            max_decel: Self::DEFAULT_MAX_DECEL,
            dt: Self::DEFAULT_DT,
        }
    }

    /// Closed-form braking distance `v² / 2a`, m.
    pub fn stopping_distance(&self) -> f64 {
        self.speed * self.speed / (2.0 * self.max_decel)
    }

    pub fn validate(&self, world: &LaneWorld) -> Result<(), SimError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(SimError::InvalidConfig(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("speed", self.speed)?;
        positive("detection distance", self.detection_distance)?;
        positive("max deceleration", self.max_decel)?;
        positive("timestep", self.dt)?;
        if self.stopping_distance() >= self.detection_distance {
            return Err(SimError::InvalidConfig(format!(
                "stopping distance {:.3} m is not shorter than detection distance {} m",
                self.stopping_distance(),
                self.detection_distance
            )));
        }
        if self.detection_distance > world.obstacle_position {
            return Err(SimError::InvalidConfig(format!(
                "detection distance {} m exceeds the obstacle's {} m lead",
                self.detection_distance, world.obstacle_position
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    LaneChanged,
    StoppedBeforeObstacle,
    DroveThrough,
    Collided,
}

impl Outcome {
    pub fn token(self) -> &'static str {
        match self {
            Outcome::LaneChanged => "lane_changed",
            Outcome::StoppedBeforeObstacle => "stopped_before_obstacle",
            Outcome::DroveThrough => "drove_through",
            Outcome::Collided => "collided",
        }
    }
}

/// Qualitative result category used in the reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    LaneChange,
    SuddenBraking,
    CollideStop,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::LaneChange, Category::SuddenBraking, Category::CollideStop];

    pub fn label(self) -> &'static str {
        match self {
            Category::LaneChange => "Lane Change",
            Category::SuddenBraking => "Sudden Braking",
            Category::CollideStop => "Collide/Stop",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Category::ALL.into_iter().find(|c| c.label() == label)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// What the controller chose at detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Response {
    Baseline(BaselineAction),
    Kg(Decision),
}

impl Response {
    pub fn action(self) -> Action {
        match self {
            Response::Baseline(BaselineAction::Continue) => Action::Continue,
            Response::Baseline(BaselineAction::LaneChange) | Response::Kg(Decision::LaneChange) => Action::LaneChange,
            Response::Kg(Decision::SuddenBrake) => Action::SuddenBrake,
            Response::Kg(Decision::Proceed) => Action::Proceed,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Response::Baseline(BaselineAction::Continue) => "CONTINUE",
            Response::Baseline(BaselineAction::LaneChange) => "LANE_CHANGE",
            Response::Kg(d) => d.token(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tick {
    pub time: f64,
    pub state: EgoState,
    pub action: Action,
}

impl fmt::Display for Tick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t={:.2} s={:.3} lane={} v={:.3} action={}",
            self.time,
            self.state.position,
            self.state.lane,
            self.state.speed,
            self.action.token()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub config: TrialConfig,
    /// `None` only if the obstacle was never detected.
    pub response: Option<Response>,
    pub outcome: Outcome,
    pub category: Category,
    /// KG controller only.
    pub trace: Option<DecisionTrace>,
    pub ticks: Vec<Tick>,
}

impl TrialResult {
    /// One `t=<s> s=<m> lane=<i> v=<m/s> action=<token>` line per tick.
    pub fn tick_log(&self) -> String {
        let mut out = String::new();
        for tick in &self.ticks {
            writeln!(out, "{tick}").unwrap();
        }
        out
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid trial config: {0}")]
    InvalidConfig(String),
    #[error("unknown obstacle `{0}`")]
    UnknownObstacle(String),
    #[error("lane change requested while both adjacent lanes are occupied")]
    BlockedLaneChange,
    #[error(transparent)]
    Reasoner(#[from] ReasonerError),
}

/// Real material behavior of an obstacle in the simulated world, which can
/// differ from what the ontology believes. The gnome prop is hard and dense
/// and lodges under the car instead of passing beneath it.
pub fn as_built(obstacle: &ObstacleClass) -> PropertyValuation {
    let mut v = obstacle.valuation;
    if obstacle.id == "gnome" {
        v.pass_under = PassUnderClass::CannotPass;
        v.density = DensityClass::High;
    }
    v
}

fn contact_outcome(v: PropertyValuation) -> Outcome {
    if v.pass_under == PassUnderClass::CanPass || v.malleability == MalleabilityClass::High {
        Outcome::DroveThrough
    } else {
        Outcome::Collided
    }
}

/// Runs trials against a shared catalog, reasoner and baseline threshold.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub world: LaneWorld,
    pub catalog: Catalog,
    pub reasoner: Reasoner,
    pub min_frontal_area: f64,
}

impl Simulator {
    pub fn new(catalog: Catalog) -> Self {
        let reasoner = Reasoner::from_catalog(&catalog);
        Self { world: LaneWorld::default(), catalog, reasoner, min_frontal_area: DEFAULT_MIN_FRONTAL_AREA }
    }

    pub fn with_min_frontal_area(mut self, area: f64) -> Self {
        self.min_frontal_area = area;
        self
    }

    pub fn run_trial(&self, config: &TrialConfig) -> Result<TrialResult, SimError> {
        config.validate(&self.world)?;
        let obstacle =
            self.catalog.get(&config.obstacle).ok_or_else(|| SimError::UnknownObstacle(config.obstacle.clone()))?;
        let world = &self.world;
        let obstacle_lane = world.center_lane();
        let obstacle_at = world.obstacle_position;

        let mut ego = EgoState::start(world, config.speed);
        let mut action = Action::Cruise;
        let mut response = None;
        let mut trace = None;
        let mut outcome = None;
        let mut ticks = vec![Tick { time: 0.0, state: ego, action }];
        let mut n: u64 = 0;

        loop {
            if response.is_none() && obstacle_at - ego.position <= config.detection_distance {
                let chosen = match config.controller {
                    ControllerKind::Baseline => {
                        Response::Baseline(baseline_controller(obstacle, config.scenario, self.min_frontal_area))
                    }
                    ControllerKind::Kg => {
                        let (decision, t) = kg_controller(&self.reasoner, obstacle, config.scenario)?;
                        trace = Some(t);
                        Response::Kg(decision)
                    }
                };
                action = chosen.action();
                if action == Action::LaneChange && !config.scenario.lane_feasible() {
                    return Err(SimError::BlockedLaneChange);
                }
                response = Some(chosen);
            }

            ego = step(world, ego, action, config.dt, config.max_decel);
            n += 1;
            ticks.push(Tick { time: n as f64 * config.dt, state: ego, action });

            if outcome.is_none() && ego.position >= obstacle_at {
                outcome = Some(if ego.lane != obstacle_lane {
                    Outcome::LaneChanged
                } else {
                    contact_outcome(as_built(obstacle))
                });
            }
            if ego.speed <= 0.0 {
                outcome.get_or_insert(Outcome::StoppedBeforeObstacle);
                break;
            }
            if ego.position >= obstacle_at + 10.0 || ego.position >= world.road_length {
                break;
            }
        }

        let outcome = outcome.expect("trial ends past the obstacle or stopped");
        let category = match (outcome, response) {
            (Outcome::LaneChanged, _) => Category::LaneChange,
            (Outcome::StoppedBeforeObstacle, Some(Response::Kg(Decision::SuddenBrake))) => Category::SuddenBraking,
            _ => Category::CollideStop,
        };
        Ok(TrialResult { config: config.clone(), response, outcome, category, trace, ticks })
    }
}
