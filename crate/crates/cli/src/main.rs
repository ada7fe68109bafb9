use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use levers_core::controllability::graph_ref;
use levers_core::decision::{
    compare_perspectives, compare_scenarios, rank_by_stored_scores, rank_configurations, ranked_csv,
};
use levers_core::dot::export_dot;
use levers_core::dynamics::{
    consistency_ranking, iterate_to_fixed_point, rank_factors, trajectory_csv, IterationOptions,
    MappingSpec,
};
use levers_core::model::parse_graph_with_warnings;
use levers_core::{
    analyze, classify_nodes, AnalysisReport, Budget, ControllabilityScale, FcmGraph, Labeling,
    Perspective, RankedConfiguration,
};

mod table;

use table::Table;

/// Exit status when the analysis ran out of budget before finishing.
const EXIT_TRUNCATED: u8 = 3;
/// Exit status when the graph has self-loops.
const EXIT_SELF_LOOPS: u8 = 2;

#[derive(Parser)]
#[command(name = "levers", version, about = "Find and rank the control levers of a cognitive map")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate every minimal control configuration.
    Analyze {
        graph: PathBuf,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Score with the labels of a perspective stored in the graph.
        #[arg(long)]
        perspective: Option<String>,
        #[command(flatten)]
        scale: ScaleArg,
        /// Write the report here; a summary goes to stdout instead.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify factors as always, never or sometimes in a control configuration.
    Classify {
        graph: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Rank the configurations of a report by ease of control.
    Rank {
        report: PathBuf,
        /// Re-score under this perspective; needs --graph.
        #[arg(long, requires = "graph")]
        perspective: Option<String>,
        /// Graph the report was computed from, for its labels.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[command(flatten)]
        scale: ScaleArg,
        #[arg(long)]
        csv: bool,
    },
    /// Iterate the map to a fixed point and rank factors by activation.
    Simulate {
        graph: PathBuf,
        #[arg(long, value_enum)]
        mapping: Mapping,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        /// Write the whole trajectory as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also report factors in the top/bottom K of both mappings.
        #[arg(long, value_name = "K")]
        consistency: Option<usize>,
    },
    /// Compare the configurations of two reports.
    CompareScenarios {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Rank one graph's configurations under two perspectives.
    ComparePerspectives {
        graph: PathBuf,
        first: String,
        second: String,
        #[command(flatten)]
        budget: BudgetArgs,
        #[command(flatten)]
        scale: ScaleArg,
        #[arg(long)]
        json: bool,
    },
    /// Render the map as Graphviz DOT.
    ExportDot {
        graph: PathBuf,
        /// Shade the best configuration and size nodes by frequency.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP API. Flags override LEVERS_* environment variables.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        max_jobs: Option<usize>,
    },
}

#[derive(Args)]
struct BudgetArgs {
    /// Stop after this many configurations.
    #[arg(long, default_value_t = Budget::DEFAULT_MAX_CONFIGS)]
    budget_configs: usize,
    /// Stop after this many milliseconds.
    #[arg(long, default_value_t = Budget::DEFAULT_MAX_MILLIS)]
    budget_ms: u64,
}

impl BudgetArgs {
    fn budget(&self) -> Result<Budget> {
        if self.budget_configs == 0 || self.budget_ms == 0 {
            bail!("budget limits must be positive");
        }
        Ok(Budget {
            max_configs: self.budget_configs,
            max_millis: self.budget_ms,
        })
    }
}

#[derive(Args)]
struct ScaleArg {
    /// JSON file with numeric "easy", "medium" and "hard" values.
    #[arg(long)]
    scale: Option<PathBuf>,
}

impl ScaleArg {
    fn load(&self) -> Result<ControllabilityScale> {
        let Some(path) = &self.scale else {
            return Ok(ControllabilityScale::default());
        };
        let scale: ControllabilityScale = serde_json::from_str(&read(path)?)
            .with_context(|| format!("{}: not a controllability scale", path.display()))?;
        scale.validate()?;
        Ok(scale)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mapping {
    Sigmoid,
    Linear,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<levers_core::Error>() {
                Some(levers_core::Error::SelfLoopPresent(_)) => ExitCode::from(EXIT_SELF_LOOPS),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Analyze {
            graph,
            budget,
            perspective,
            scale,
            out,
        } => {
            let graph = load_graph(&graph)?;
            let perspective = perspective.map(|l| named_perspective(&graph, &l)).transpose()?;
            let report = analyze(&graph, &budget.budget()?, perspective.as_ref(), &scale.load()?)?;
            match out {
                Some(path) => {
                    write(&path, &report.to_json())?;
                    print_summary(&report);
                }
                None => println!("{}", report.to_json()),
            }
            if let Some(reason) = report.truncation_reason {
                eprintln!("warning: enumeration truncated ({})", snake(&reason));
                return Ok(ExitCode::from(EXIT_TRUNCATED));
            }
        }
        Command::Classify { graph, json } => {
            let graph = load_graph(&graph)?;
            let classes = classify_nodes(&graph)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&classes)?);
            } else {
                let mut t = Table::new(["factor", "name", "class"]);
                for f in graph.factors() {
                    let class = if classes.always.contains(&f.id) {
                        "always"
                    } else if classes.never.contains(&f.id) {
                        "never"
                    } else {
                        "sometimes"
                    };
                    t.row([f.id.as_str(), f.name.as_str(), class]);
                }
                print!("{t}");
            }
        }
        Command::Rank {
            report,
            perspective,
            graph,
            scale,
            csv,
        } => {
            let report = load_report(&report)?;
            let ranked = match graph {
                Some(path) => {
                    let graph = load_graph(&path)?;
                    if graph_ref(&graph).digest != report.graph.digest {
                        eprintln!(
                            "warning: {} differs from the graph this report was computed on",
                            path.display()
                        );
                    }
                    let perspective = perspective.map(|l| named_perspective(&graph, &l)).transpose()?;
                    let labeling = Labeling::from_graph(&graph, perspective.as_ref())?;
                    rank_configurations(&report.configurations, &labeling, &scale.load()?)?
                }
                None => rank_by_stored_scores(&report),
            };
            if csv {
                print!("{}", ranked_csv(&ranked)?);
            } else {
                print!("{}", ranking_table(&ranked));
            }
            if report.truncated {
                eprintln!("warning: report is truncated; ranking covers only the configurations found");
            }
        }
        Command::Simulate {
            graph,
            mapping,
            lambda,
            tol,
            max_iter,
            csv,
            consistency,
        } => {
            let graph = load_graph(&graph)?;
            let spec = match mapping {
                Mapping::Sigmoid => MappingSpec::sigmoid(lambda),
                Mapping::Linear => MappingSpec::linear(),
            };
            let trajectory = iterate_to_fixed_point(&graph, &spec, None, &IterationOptions { tol, max_iter })?;
            if let Some(path) = csv {
                write(&path, &trajectory_csv(&graph, &trajectory)?)?;
            }
            let steps = trajectory.states.len() - 1;
            match &trajectory.fixed_point {
                Some(_) => println!("converged after {steps} steps"),
                None => println!("did not converge within {steps} steps; showing the last state"),
            }
            let last = trajectory.fixed_point.as_ref().or(trajectory.states.last()).expect("initial state");
            let mut t = Table::new(["rank", "factor", "name", "value"]);
            for (i, id) in rank_factors(last).iter().enumerate() {
                let name = graph.factor(id).map_or("", |f| f.name.as_str());
                t.row([(i + 1).to_string(), id.clone(), name.to_string(), format!("{:.6}", last.values[id])]);
            }
            print!("{t}");
            if let Some(k) = consistency {
                let c = consistency_ranking(&graph, k)?;
                println!("top {k} under both mappings: {}", c.top.join(", "));
                println!("bottom {k} under both mappings: {}", c.bottom.join(", "));
                if c.degenerate {
                    println!("note: a fixed point is uniform, so its order is only the id tie-break");
                }
                for w in &c.warnings {
                    eprintln!("warning: {w}");
                }
            }
        }
        Command::CompareScenarios { first, second, json } => {
            let diff = compare_scenarios(&load_report(&first)?, &load_report(&second)?);
            if json {
                println!("{}", serde_json::to_string_pretty(&diff)?);
            } else {
                let mut t = Table::new(["", "first", "second"]);
                t.row(["title", &diff.first.title, &diff.second.title]);
                t.row([
                    "configurations".to_string(),
                    diff.first.configuration_count.to_string(),
                    diff.second.configuration_count.to_string(),
                ]);
                t.row([
                    "size".to_string(),
                    diff.first.configuration_size.to_string(),
                    diff.second.configuration_size.to_string(),
                ]);
                t.row([
                    "truncated".to_string(),
                    diff.first.truncated.to_string(),
                    diff.second.truncated.to_string(),
                ]);
                print!("{t}");
                println!("only in first: {}", list_or_none(&diff.only_first));
                println!("only in second: {}", list_or_none(&diff.only_second));
                println!("in both: {}", list_or_none(&diff.shared));
            }
        }
        Command::ComparePerspectives {
            graph,
            first,
            second,
            budget,
            scale,
            json,
        } => {
            let graph = load_graph(&graph)?;
            let p1 = named_perspective(&graph, &first)?;
            let p2 = named_perspective(&graph, &second)?;
            let diff = compare_perspectives(&graph, &p1, &p2, &budget.budget()?, &scale.load()?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&diff)?);
            } else {
                let mut t = Table::new(["factor", first.as_str(), second.as_str()]);
                for d in &diff.disagreements {
                    t.row([d.factor.as_str(), d.first.as_str(), d.second.as_str()]);
                }
                if diff.disagreements.is_empty() {
                    println!("the perspectives agree on every label");
                } else {
                    print!("{t}");
                }
                for side in [&diff.first, &diff.second] {
                    println!("\n{}:", side.label);
                    print!("{}", ranking_table(&side.ranked));
                }
                println!(
                    "\nbest configuration {}",
                    if diff.shared_best { "is shared" } else { "differs" }
                );
            }
            if diff.truncated {
                eprintln!("warning: enumeration truncated; rankings cover only the configurations found");
                return Ok(ExitCode::from(EXIT_TRUNCATED));
            }
        }
        Command::ExportDot { graph, report, out } => {
            let graph = load_graph(&graph)?;
            let report = report.map(|p| load_report(&p)).transpose()?;
            if report.as_ref().is_some_and(|r| r.graph.digest != graph_ref(&graph).digest) {
                eprintln!("warning: the report was computed on a different graph");
            }
            let dot = export_dot(&graph, report.as_ref());
            match out {
                Some(path) => write(&path, &dot)?,
                None => print!("{dot}"),
            }
        }
        Command::Serve {
            port,
            data_dir,
            max_jobs,
        } => {
            let mut config = levers_service::Config::from_env().map_err(anyhow::Error::msg)?;
            if let Some(port) = port {
                config.port = port;
            }
            if let Some(dir) = data_dir {
                config.data_dir = dir;
            }
            if let Some(n) = max_jobs {
                config.max_jobs = n.max(1);
            }
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| "info".into()),
                )
                .init();
            tokio::runtime::Runtime::new()?.block_on(levers_service::serve(config))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn load_graph(path: &Path) -> Result<FcmGraph> {
    let (graph, warnings) = parse_graph_with_warnings(&read(path)?)
        .with_context(|| format!("{}: invalid graph", path.display()))?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(graph)
}

fn load_report(path: &Path) -> Result<AnalysisReport> {
    serde_json::from_str(&read(path)?).with_context(|| format!("{}: not an analysis report", path.display()))
}

fn named_perspective(graph: &FcmGraph, label: &str) -> Result<Perspective> {
    match graph.perspective(label) {
        Some(p) => Ok(p.clone()),
        None => {
            let known: Vec<&str> = graph.perspectives().iter().map(|p| p.label.as_str()).collect();
            bail!("no perspective {label:?} in graph (known: {})", known.join(", "))
        }
    }
}

fn ranking_table(ranked: &[RankedConfiguration]) -> Table {
    let mut t = Table::new(["rank", "score", "members", "warnings"]);
    for r in ranked {
        t.row([
            r.rank.to_string(),
            r.score.to_string(),
            r.members.join(", "),
            r.warnings.join("; "),
        ]);
    }
    t
}

fn print_summary(report: &AnalysisReport) {
    println!("matching size m = {}, configuration size D = {}", report.m, report.d);
    println!("{} configuration(s)", report.configurations.len());
    let c = &report.classification;
    println!("always: {}", list_or_none(&c.always));
    println!("never: {}", list_or_none(&c.never));
    for w in &report.warnings {
        println!("warning: {w}");
    }
}

fn list_or_none(ids: &[String]) -> String {
    if ids.is_empty() {
        "(none)".to_string()
    } else {
        ids.join(", ")
    }
}

fn snake<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_value(value)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}
