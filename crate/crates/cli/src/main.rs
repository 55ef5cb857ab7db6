use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use pwa_core::control::{extend_with_controller, input_dependent_variables, synthesize_with, LawPolicy};
use pwa_core::cycle::{check_fast_controller, classify_cycle, start_spread, traverse_times, CycleError, CycleSequence};
use pwa_core::graph::{build_transition_graph, strongly_connected_cycles, ControlLaw, CycleBudget};
use pwa_core::io::{network_to_json, parse_network, parse_target, to_json, GraphExport};
use pwa_core::model::validate_network;
use pwa_core::sim::{sample_until, samples_to_csv, simulate_batch, SimBudget, Verdict};
use pwa_core::{BoxIndex, Network};

const EXIT_INPUT: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_ABORT: u8 = 4;

#[derive(Parser)]
#[command(name = "pwa", version, about = "Analysis and qualitative control of piecewise-affine gene networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a network file and report hypothesis violations.
    Check(NetArgs),
    /// Transition graph as JSON (or DOT), with its strongly connected components and cycles.
    Graph(GraphArgs),
    /// Event-driven simulation from one or more initial points.
    Simulate(SimulateArgs),
    /// Classify cyclic box sequences of the transition graph.
    Analyze(AnalyzeArgs),
    /// Compute input intervals realizing a target transition graph.
    Synthesize(SynthesizeArgs),
    /// Replace the input by a dynamic controller variable.
    Extend(ExtendArgs),
}

#[derive(Args)]
struct NetArgs {
    /// Network JSON file.
    network: PathBuf,
    /// Override the input bound U of the network.
    #[arg(long)]
    u_bound: Option<f64>,
}

#[derive(Args)]
struct LawArgs {
    /// Control law JSON file; the zero law when absent.
    #[arg(long)]
    law: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArgs {
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    law: LawArgs,
    /// Print DOT instead of JSON.
    #[arg(long)]
    dot: bool,
    /// Also write graph.json and graph.dot here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    law: LawArgs,
    /// Initial point `v1,v2,...`; repeat for a batch.
    #[arg(long, required = true, value_parser = parse_point)]
    x0: Vec<Point>,
    #[arg(long, default_value_t = SimBudget::default().max_events)]
    max_events: usize,
    #[arg(long, default_value_t = SimBudget::default().max_time)]
    max_time: f64,
    #[arg(long, default_value_t = SimBudget::default().zeno_eps)]
    zeno_eps: f64,
    /// Sampling step of the CSV series.
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Continue sampling up to this time when the run ends at an equilibrium.
    #[arg(long)]
    t_end: Option<f64>,
    /// Write trajectory_<k>.csv and events_<k>.json here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Exit with code 4 on tie, Zeno or sliding verdicts.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    net: NetArgs,
    #[command(flatten)]
    law: LawArgs,
    /// Cycle as box labels separated by `>` or spaces, e.g. `00>10>20>21>11>01`.
    /// All elementary cycles of the graph when absent.
    #[arg(long)]
    cycle: Option<String>,
    /// Random starts on the return wall used to check that the periodic point is unique.
    #[arg(long, default_value_t = 10)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[command(flatten)]
    net: NetArgs,
    /// Target graph JSON file.
    target: PathBuf,
    /// Use per-box interval midpoints instead of one common midpoint.
    #[arg(long, conflicts_with = "u")]
    per_box: bool,
    /// Use this input on every controlled box.
    #[arg(long)]
    u: Option<f64>,
    /// Write the suggested law here.
    #[arg(long)]
    law_out: Option<PathBuf>,
    /// Write synthesis.json (and law.json when feasible) here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ExtendArgs {
    #[command(flatten)]
    net: NetArgs,
    /// Synthesis JSON produced by `synthesize`.
    synthesis: PathBuf,
    #[arg(long)]
    theta_y: f64,
    #[arg(long)]
    gamma_y: f64,
    /// Controller input; defaults to the common value of the synthesized law.
    #[arg(long)]
    upsilon: Option<f64>,
    /// Write the extended network here instead of embedding it in the report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct Point(Vec<f64>);

fn parse_point(s: &str) -> Result<Point, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad coordinate {p:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()
        .map(Point)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check(a) => cmd_check(&a),
        Command::Graph(a) => cmd_graph(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Synthesize(a) => cmd_synthesize(&a),
        Command::Extend(a) => cmd_extend(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_network(a: &NetArgs) -> Result<Network> {
    let net = parse_network(&read(&a.network)?).with_context(|| format!("loading {}", a.network.display()))?;
    match a.u_bound {
        Some(u) => Ok(net.with_input_bound(u)?),
        None => Ok(net),
    }
}

fn load_law(a: &LawArgs) -> Result<ControlLaw> {
    match &a.law {
        Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("loading law {}", p.display())),
        None => Ok(ControlLaw::zero()),
    }
}

fn cmd_check(a: &NetArgs) -> Result<u8> {
    let net = load_network(a)?;
    let report = validate_network(&net, &[]);
    print!("{}", to_json(&json!({ "clean": report.is_clean(), "report": report })));
    Ok(0)
}

fn cmd_graph(a: &GraphArgs) -> Result<u8> {
    let net = load_network(&a.net)?;
    let law = load_law(&a.law)?;
    let tg = build_transition_graph(&net, &law)?;
    let cycles = strongly_connected_cycles(&tg, CycleBudget::for_dims(tg.dims()))?;
    let doc = to_json(&json!({ "graph": GraphExport::new(&tg), "cycles": cycles }));
    let dot = tg.to_dot();
    if let Some(dir) = &a.out_dir {
        write(&dir.join("graph.json"), &doc)?;
        write(&dir.join("graph.dot"), &dot)?;
    }
    print!("{}", if a.dot { &dot } else { &doc });
    Ok(0)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<u8> {
    let net = load_network(&a.net)?;
    let law = load_law(&a.law)?;
    let budget =
        SimBudget { max_events: a.max_events, max_time: a.max_time, zeno_eps: a.zeno_eps, ..SimBudget::default() };
    let starts: Vec<Vec<f64>> = a.x0.iter().map(|p| p.0.clone()).collect();
    let mut runs = Vec::new();
    let mut aborted = false;
    for (k, (x0, r)) in starts.iter().zip(simulate_batch(&net, &law, &starts, &budget)).enumerate() {
        let tr = r.with_context(|| format!("simulating from {x0:?}"))?;
        aborted |= matches!(tr.verdict, Verdict::TieAbort { .. } | Verdict::Zeno { .. } | Verdict::SlidingWall { .. });
        if let Some(dir) = &a.out_dir {
            let end = a.t_end.unwrap_or(0.0);
            let samples = sample_until(&net, &law, &tr, a.dt, end)?;
            write(&dir.join(format!("trajectory_{k}.csv")), &samples_to_csv(&net, &samples))?;
            write(&dir.join(format!("events_{k}.json")), &to_json(&tr.events))?;
        }
        let last = tr.events.last().expect("initial event");
        runs.push(json!({
            "x0": x0,
            "verdict": tr.verdict,
            "events": tr.events.len() - 1,
            "final_time": last.t,
            "final_box": last.box_index,
        }));
    }
    print!("{}", to_json(&json!({ "runs": runs })));
    Ok(if a.strict && aborted { EXIT_ABORT } else { 0 })
}

fn parse_cycle(s: &str) -> Result<CycleSequence> {
    let labels: Vec<&str> = s.split(|c: char| c == '>' || c.is_whitespace()).filter(|p| !p.is_empty()).collect();
    Ok(CycleSequence::from_labels(&labels)?)
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<u8> {
    let net = load_network(&a.net)?;
    let law = load_law(&a.law)?;
    let cycles = match &a.cycle {
        Some(s) => vec![parse_cycle(s)?],
        None => {
            let tg = build_transition_graph(&net, &law)?;
            strongly_connected_cycles(&tg, CycleBudget::for_dims(tg.dims()))?
                .cycles
                .into_iter()
                .map(CycleSequence::new)
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    let mut out = Vec::new();
    for cyc in &cycles {
        let verdict = classify_cycle(&net, &law, cyc)?;
        let spread = if verdict.periodic_point.is_some() && a.starts > 0 {
            match start_spread(&net, &law, cyc, a.starts, a.seed) {
                Ok(s) => json!(s),
                Err(e @ (CycleError::NoConvergence { .. } | CycleError::Deviation { .. })) => {
                    json!({ "error": e.to_string() })
                }
                Err(e) => return Err(e.into()),
            }
        } else {
            Value::Null
        };
        out.push(json!({ "verdict": verdict, "spread": spread }));
    }
    print!("{}", to_json(&json!({ "cycles": out })));
    Ok(0)
}

fn cmd_synthesize(a: &SynthesizeArgs) -> Result<u8> {
    let net = load_network(&a.net)?;
    let target =
        parse_target(net.dims(), &read(&a.target)?).with_context(|| format!("loading {}", a.target.display()))?;
    let policy = match (a.u, a.per_box) {
        (Some(u), _) => LawPolicy::Constant(u),
        (None, true) => LawPolicy::PerBoxMidpoint,
        (None, false) => LawPolicy::CommonMidpoint,
    };
    let res = synthesize_with(&net, &target, policy)?;
    let doc = to_json(&res);
    if let Some(dir) = &a.out_dir {
        write(&dir.join("synthesis.json"), &doc)?;
        if let Some(law) = &res.law {
            write(&dir.join("law.json"), &to_json(law))?;
        }
    }
    if let (Some(p), Some(law)) = (&a.law_out, &res.law) {
        write(p, &to_json(law))?;
    }
    print!("{doc}");
    Ok(if res.feasible { 0 } else { EXIT_INFEASIBLE })
}

fn cmd_extend(a: &ExtendArgs) -> Result<u8> {
    let net = load_network(&a.net)?;
    let syn: Value = serde_json::from_str(&read(&a.synthesis)?).context("parsing synthesis JSON")?;
    let a_star: Vec<BoxIndex> =
        serde_json::from_value(syn.get("a_star").cloned().ok_or_else(|| anyhow!("synthesis has no a_star"))?)?;
    let law: ControlLaw = match syn.get("law") {
        Some(v) if !v.is_null() => serde_json::from_value(v.clone())?,
        _ => bail!("synthesis has no law; the target was infeasible"),
    };
    let upsilon = match a.upsilon {
        Some(u) => u,
        None => {
            let mut values = a_star.iter().map(|b| law.get(b));
            let first = values.next().unwrap_or(0.0);
            if values.any(|u| u != first) {
                bail!("the synthesized law is not constant on A*; pass --upsilon");
            }
            first
        }
    };
    let controlled = input_dependent_variables(&net);
    let ext = extend_with_controller(&net, &a_star, upsilon, a.theta_y, a.gamma_y, &controlled)?;

    let y = net.n();
    let zero = ControlLaw::zero();
    let mut checks = Vec::new();
    for b in &a_star {
        let mut idx = b.0.clone();
        idx.push(0);
        let lifted = BoxIndex::new(idx);
        let traverses = traverse_times(&ext, &zero, &lifted)?;
        let satisfied = match check_fast_controller(&ext, &lifted, y) {
            Ok(s) => Some(s),
            Err(CycleError::Precondition(_)) => None,
            Err(e) => return Err(e.into()),
        };
        checks.push(json!({ "box": lifted, "satisfied": satisfied, "traverses": traverses }));
    }
    let applicable: Vec<bool> = checks.iter().filter_map(|c| c["satisfied"].as_bool()).collect();
    let all = !applicable.is_empty() && applicable.iter().all(|&s| s);

    let mut report = json!({
        "upsilon": upsilon,
        "theta_y": a.theta_y,
        "gamma_y": a.gamma_y,
        "controlled": controlled.iter().map(|&i| &net.variables()[i].name).collect::<Vec<_>>(),
        "fast_controller": { "satisfied": all, "boxes": checks },
    });
    let ext_json = network_to_json(&ext);
    match &a.out {
        Some(p) => {
            write(p, &ext_json)?;
            report["network_file"] = json!(p.display().to_string());
        }
        None => report["network"] = serde_json::from_str(&ext_json)?,
    }
    print!("{}", to_json(&report));
    Ok(0)
}
