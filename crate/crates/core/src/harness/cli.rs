//! Command-line entry point. Exit codes: 0 success, 1 usage or runtime
//! error, 2 oracle or validation failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::oracle::calibration_oracle;
use super::report::{run_matrix, TrialParams};
use crate::graphio::protocol::{parse_decide_response, Client, Server, DEFAULT_ENDPOINT};
use crate::graphio::{deserialize, segment, serialize, serialize_segment};
use crate::ontology::{build_graph, catalog, validate_graph, Catalog, KnowledgeGraph};
use crate::reasoner::Reasoner;
use crate::simworld::{ControllerKind, ScenarioKind, Simulator, DEFAULT_MIN_FRONTAL_AREA};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILED_CHECK: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "avkg", version, about = "Knowledge-graph obstacle reasoning and lane-world experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run individual trials.
    Run(RunArgs),
    /// Regenerate the result tables.
    Reproduce {
        #[arg(value_enum)]
        what: ReproduceTarget,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Inspect, segment or serve the knowledge graph.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// Ask the reasoner for a decision.
    Decide {
        obstacle: String,
        #[arg(value_enum)]
        lane: LaneFlag,
        /// Query a running server instead of the local reasoner.
        #[arg(long, value_name = "ADDR")]
        connect: Option<String>,
    },
    /// Check both controllers against the reference table.
    Oracle {
        #[arg(long, default_value_t = DEFAULT_MIN_FRONTAL_AREA)]
        min_frontal_area: f64,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Obstacle id, or `all`.
    #[arg(long, default_value = "all")]
    obstacle: String,
    #[arg(long, value_enum, default_value_t = ScenarioArg::Both)]
    scenario: ScenarioArg,
    #[arg(long, value_enum, default_value_t = ControllerArg::Both)]
    controller: ControllerArg,
    /// Include decision traces and per-tick logs.
    #[arg(long)]
    trace: bool,
    /// Write output to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    sim: SimArgs,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// Initial speed, m/s.
    #[arg(long, default_value_t = TrialParams::default().speed)]
    speed: f64,
    /// Detection distance, m.
    #[arg(long, default_value_t = TrialParams::default().detection_distance)]
    detection_distance: f64,
    /// Maximum braking deceleration, m/s².
    #[arg(long, default_value_t = TrialParams::default().max_decel)]
    max_decel: f64,
    /// Simulation timestep, s.
    #[arg(long, default_value_t = TrialParams::default().dt)]
    dt: f64,
    /// Baseline autopilot swerve threshold, m².
    #[arg(long, default_value_t = DEFAULT_MIN_FRONTAL_AREA)]
    min_frontal_area: f64,
}

impl SimArgs {
    fn params(&self) -> TrialParams {
        TrialParams {
            speed: self.speed,
            detection_distance: self.detection_distance,
            max_decel: self.max_decel,
            dt: self.dt,
        }
    }
}

#[derive(Debug, Subcommand)]
enum GraphCommand {
    /// Validate the catalog graph or a `.kg` file.
    Validate {
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Print the canonical serialization of the catalog graph.
    Dump {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split the catalog graph into segments.
    Segment {
        #[arg(long)]
        max_nodes: usize,
        /// Write `segment_<i>.kgseg` files here instead of printing.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Serve decisions and segment sync over TCP.
    Serve {
        #[arg(long, default_value = DEFAULT_ENDPOINT)]
        listen: String,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReproduceTarget {
    Tables,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LaneFlag {
    Feasible,
    Restricted,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Restricted,
    Unrestricted,
    Both,
}

impl ScenarioArg {
    fn expand(self) -> Vec<ScenarioKind> {
        match self {
            ScenarioArg::Restricted => vec![ScenarioKind::LaneChangeRestricted],
            ScenarioArg::Unrestricted => vec![ScenarioKind::LaneChangeUnrestricted],
            ScenarioArg::Both => ScenarioKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ControllerArg {
    Baseline,
    Kg,
    Both,
}

impl ControllerArg {
    fn expand(self) -> Vec<ControllerKind> {
        match self {
            ControllerArg::Baseline => vec![ControllerKind::Baseline],
            ControllerArg::Kg => vec![ControllerKind::Kg],
            ControllerArg::Both => ControllerKind::ALL.to_vec(),
        }
    }
}

enum Failure {
    Usage(String),
    Check(String),
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn unknown_obstacle(catalog: &Catalog, id: &str) -> Failure {
    let valid: Vec<&str> = catalog.ids().collect();
    usage(format!("unknown obstacle `{id}`; valid obstacles: {}", valid.join(", ")))
}

fn emit(out: &mut dyn Write, path: Option<&PathBuf>, text: &str) -> CmdResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("cannot write {}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(|e| usage(format!("write failed: {e}"))),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ =
                if e.use_stderr() { err.write_all(rendered.as_bytes()) } else { out.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Check(msg)) => {
            let _ = writeln!(err, "{msg}");
            EXIT_FAILED_CHECK
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> CmdResult {
    match command {
        Command::Run(args) => cmd_run(args, out),
        Command::Reproduce { what: ReproduceTarget::Tables, format, sim } => {
            let simulator = Simulator::new(catalog()).with_min_frontal_area(sim.min_frontal_area);
            let report = run_matrix(&simulator, &sim.params()).map_err(|e| usage(e.to_string()))?;
            let text = match format {
                Format::Text => report.render_text(),
                Format::Csv => report.render_csv(),
            };
            emit(out, None, &text)
        }
        Command::Graph { command } => cmd_graph(command, out),
        Command::Decide { obstacle, lane, connect } => cmd_decide(&obstacle, lane, connect.as_deref(), out),
        Command::Oracle { min_frontal_area } => {
            let outcome = calibration_oracle(&catalog(), min_frontal_area);
            if outcome.passed() {
                emit(out, None, &format!("{outcome}\n"))
            } else {
                Err(Failure::Check(outcome.to_string()))
            }
        }
    }
}

fn cmd_run(args: RunArgs, out: &mut dyn Write) -> CmdResult {
    let cat = catalog();
    let obstacles: Vec<String> = if args.obstacle == "all" {
        cat.ids().map(String::from).collect()
    } else if cat.get(&args.obstacle).is_some() {
        vec![args.obstacle.clone()]
    } else {
        return Err(unknown_obstacle(&cat, &args.obstacle));
    };
    let simulator = Simulator::new(cat).with_min_frontal_area(args.sim.min_frontal_area);
    let params = args.sim.params();

    let mut text = String::new();
    for id in &obstacles {
        for &scenario in &args.scenario.expand() {
            for &controller in &args.controller.expand() {
                let result =
                    simulator.run_trial(&params.config(id, scenario, controller)).map_err(|e| usage(e.to_string()))?;
                let response = result.response.map_or("NONE", |r| r.token());
                text.push_str(&format!(
                    "{id} {} {} response={response} outcome={} category=\"{}\"\n",
                    scenario.token(),
                    controller.token(),
                    result.outcome.token(),
                    result.category
                ));
                if args.trace {
                    if let Some(trace) = &result.trace {
                        text.push_str(&format!("trace: {}\n", trace.render()));
                    }
                    text.push_str(&result.tick_log());
                }
            }
        }
    }
    emit(out, args.out.as_ref(), &text)
}

fn cmd_graph(command: GraphCommand, out: &mut dyn Write) -> CmdResult {
    match command {
        GraphCommand::Validate { file } => {
            let graph: KnowledgeGraph = match file {
                Some(path) => {
                    let bytes = fs::read(&path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
                    deserialize(&bytes).map_err(|e| Failure::Check(format!("{}: {e}", path.display())))?
                }
                None => build_graph(&catalog()),
            };
            let report = validate_graph(&graph);
            if report.is_ok() {
                emit(out, None, &format!("ok: {} nodes, {} edges\n", graph.node_count(), graph.edge_count()))
            } else {
                Err(Failure::Check(report.to_string()))
            }
        }
        GraphCommand::Dump { out: path } => {
            let text = serialize(&build_graph(&catalog())).map_err(|e| Failure::Check(e.to_string()))?;
            emit(out, path.as_ref(), &text)
        }
        GraphCommand::Segment { max_nodes, out_dir } => {
            if max_nodes == 0 {
                return Err(usage("--max-nodes must be at least 1"));
            }
            let segments = segment(&build_graph(&catalog()), max_nodes);
            match out_dir {
                Some(dir) => {
                    fs::create_dir_all(&dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
                    for seg in &segments {
                        let path = dir.join(format!("segment_{}.kgseg", seg.index));
                        emit(out, Some(&path), &serialize_segment(seg))?;
                    }
                    emit(out, None, &format!("wrote {} segments to {}\n", segments.len(), dir.display()))
                }
                None => {
                    let text: String = segments.iter().map(serialize_segment).collect();
                    emit(out, None, &text)
                }
            }
        }
        GraphCommand::Serve { listen } => {
            let server = Server::bind(&listen, Reasoner::from_catalog(&catalog()))
                .map_err(|e| usage(format!("cannot listen on {listen}: {e}")))?;
            let addr = server.local_addr().map_err(|e| usage(e.to_string()))?;
            emit(out, None, &format!("listening on {addr}\n"))?;
            out.flush().ok();
            server.run().map_err(|e| usage(format!("server stopped: {e}")))
        }
    }
}

fn cmd_decide(obstacle: &str, lane: LaneFlag, connect: Option<&str>, out: &mut dyn Write) -> CmdResult {
    let feasible = matches!(lane, LaneFlag::Feasible);
    let (decision, trace) = match connect {
        None => {
            let cat = catalog();
            if cat.get(obstacle).is_none() {
                return Err(unknown_obstacle(&cat, obstacle));
            }
            let (decision, trace) =
                Reasoner::from_catalog(&cat).decide(obstacle, feasible).map_err(|e| usage(e.to_string()))?;
            (decision, trace.joined())
        }
        Some(addr) => {
            let mut client = Client::connect(addr).map_err(|e| usage(format!("cannot connect to {addr}: {e}")))?;
            let response = client.decide(obstacle, feasible).map_err(|e| usage(e.to_string()))?;
            if response.starts_with("ERR UNKNOWN_OBSTACLE") {
                return Err(unknown_obstacle(&catalog(), obstacle));
            }
            let (decision, ids) = parse_decide_response(&response).map_err(|e| usage(e.to_string()))?;
            (decision, ids.join(","))
        }
    };
    emit(out, None, &format!("{decision}\nTRACE {trace}\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("avkg").chain(args.iter().copied());
        let code = run_cli(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn decide_locally() {
        let (code, out, _) = run(&["decide", "plastic_chair", "restricted"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("SUDDEN_BRAKE\nTRACE in:plastic_chair,"));
        assert!(out.trim_end().ends_with("out:sudden_braking"));
    }

    #[test]
    fn unknown_obstacle_is_usage_error() {
        let (code, _, err) = run(&["decide", "unicorn", "feasible"]);
        assert_eq!(code, 1);
        assert!(err.contains("plastic_chair"), "{err}");
        let (code, _, _) = run(&["run", "--obstacle", "unicorn"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn bad_flag_is_usage_error() {
        let (code, _, err) = run(&["decide", "gnome", "sideways"]);
        assert_eq!(code, 1);
        assert!(err.contains("feasible"));
        assert_eq!(run(&[]).0, 1);
        assert_eq!(run(&["--help"]).0, 0);
    }

    #[test]
    fn oracle_and_validation() {
        let (code, out, _) = run(&["oracle"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("PASS"));
        let (code, _, err) = run(&["oracle", "--min-frontal-area", "0"]);
        assert_eq!(code, 2);
        assert!(err.contains("creased_box_02"));
        let (code, out, _) = run(&["graph", "validate"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("ok"));
    }

    #[test]
    fn run_single_trial_with_trace() {
        let (code, out, _) =
            run(&["run", "--obstacle", "plastic_chair", "--scenario", "restricted", "--controller", "kg", "--trace"]);
        assert_eq!(code, 0);
        let mut lines = out.lines();
        assert_eq!(
            lines.next().unwrap(),
            "plastic_chair restricted kg response=SUDDEN_BRAKE outcome=stopped_before_obstacle category=\"Sudden Braking\""
        );
        assert!(lines.next().unwrap().starts_with("trace: in:plastic_chair"));
        assert!(out.contains("action=sudden_brake"));
    }

    #[test]
    fn invalid_sim_flags_are_reported() {
        let (code, _, err) = run(&["run", "--speed", "40"]);
        assert_eq!(code, 1);
        assert!(err.contains("stopping distance"));
    }

    #[test]
    fn graph_dump_and_segment() {
        let (code, dump, _) = run(&["graph", "dump"]);
        assert_eq!(code, 0);
        assert!(dump.starts_with("KG v1\n"));
        let (code, segs, _) = run(&["graph", "segment", "--max-nodes", "10"]);
        assert_eq!(code, 0);
        assert_eq!(segs.matches("KGSEG v1").count(), 5);
        assert_eq!(run(&["graph", "segment", "--max-nodes", "0"]).0, 1);
    }
}
