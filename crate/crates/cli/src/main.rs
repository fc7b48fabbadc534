//! `rcrs`: command-line front end of the simulation laboratory.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use rcrs::arrival::{Coins, TimeWindow};
use rcrs::diagnostics::{coupled_run, flipping_report, HardnessAlgorithm};
use rcrs::exec::Exec;
use rcrs::harness::report::{self, num, write_csv, write_csv_file, write_experiment};
use rcrs::harness::suite::{write_gap, write_hardness};
use rcrs::harness::{
    run_experiment, run_gap, run_hardness, run_suite, CheckOutcome, ExperimentConfig, GapConfig, HardnessConfig, InstanceSpec,
    SchemeName, SwitchTime,
};
use rcrs::recursive::{RecursiveParams, RecursiveVertex};
use rcrs::rng::{Purpose, StreamKey};
use rcrs::selection::{alpha_closed_form, EdgeKind, SelectionFunction};
use rcrs::{Family, Graph, OddGirth};

#[derive(Parser, Debug)]
#[command(name = "rcrs", version, about = "Random-order contention resolution schemes for matchings")]
struct Cli {
    /// Run every trial loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance family as a graph JSON file.
    Generate {
        #[command(flatten)]
        family: FamilyArgs,
        /// Output file; stdout if omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check that a graph file carries a fractional matching.
    Validate { graph: PathBuf },
    /// Estimate per-edge selectability.
    Simulate(SimulateArgs),
    /// Binned conditional acceptance against the exact-selection band.
    Profile(SimulateArgs),
    /// Coupling and trajectory diagnostics.
    Diag {
        #[command(subcommand)]
        which: Diag,
    },
    /// Run a suite file; exits with status 1 if an asserted check fails.
    Suite { config: PathBuf },
    /// Tabulate the vertex selection functions and their guarantees.
    Selection {
        /// Odd girths, e.g. `3,5,7,inf`.
        #[arg(long, value_delimiter = ',', default_value = "3,5,7,inf")]
        g: Vec<OddGirth>,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct FamilyArgs {
    /// single_edge, star, path, random_tree, double_star,
    /// complete_bipartite, complete, odd_cycle or cycle_blowup.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    edges: Option<usize>,
    /// Cycle length for odd_cycle and cycle_blowup.
    #[arg(long)]
    length: Option<usize>,
    /// Generator seed for random_tree.
    #[arg(long)]
    tree_seed: Option<u64>,
}

impl FamilyArgs {
    fn family(&self) -> Result<Option<Family>> {
        let Some(name) = &self.family else { return Ok(None) };
        let mut obj = Map::new();
        obj.insert("family".into(), json!(name));
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                obj.insert(k.into(), v);
            }
        };
        put("n", self.n.map(|v| json!(v)));
        put("k", self.k.map(|v| json!(v)));
        put("x", self.x.map(|v| json!(v)));
        put("edges", self.edges.map(|v| json!(v)));
        put("g", self.length.map(|v| json!(v)));
        put("seed", self.tree_seed.map(|v| json!(v)));
        let f: Family = serde_json::from_value(Value::Object(obj)).map_err(|e| anyhow!("family `{name}`: {e}"))?;
        Ok(Some(f))
    }
}

#[derive(Args, Debug, Clone)]
struct InstanceArgs {
    /// Graph JSON file.
    #[arg(long, conflicts_with = "family")]
    graph: Option<PathBuf>,
    #[command(flatten)]
    family: FamilyArgs,
}

impl InstanceArgs {
    fn spec(&self) -> Result<InstanceSpec> {
        match (&self.graph, self.family.family()?) {
            (Some(p), None) => Ok(InstanceSpec::File { file: p.clone() }),
            (None, Some(f)) => Ok(InstanceSpec::Family(f)),
            _ => bail!("give exactly one of --graph or --family"),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EdgeFn {
    Rank1,
    General,
    Tree,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Experiment JSON; the flags below are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<SchemeName>,
    /// Odd girth for the vertex selection function.
    #[arg(long)]
    g: Option<OddGirth>,
    #[arg(long = "T")]
    phases: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "Q")]
    samples: Option<usize>,
    /// Switch time: a number, `t0` or `peak`.
    #[arg(long, conflicts_with = "t0")]
    t: Option<SwitchTime>,
    /// Use the root `t0` as switch time.
    #[arg(long)]
    t0: bool,
    #[arg(long, value_enum)]
    edge_function: Option<EdgeFn>,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[arg(long, default_value = "experiment")]
    name: String,
    /// Report directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Two-phase only: also write the per-edge level-4 lower bounds.
    #[arg(long)]
    bounds: bool,
}

fn parse_scheme(s: &str) -> std::result::Result<SchemeName, String> {
    s.parse().map_err(|e: rcrs::Error| e.to_string())
}

impl SimulateArgs {
    fn config(&self, exec: Exec) -> Result<(ExperimentConfig, Option<PathBuf>)> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut cfg = ExperimentConfig::from_json(&text)?;
            if exec == Exec::Sequential {
                cfg.exec = exec;
            }
            if cfg.name.is_empty() {
                cfg.name = self.name.clone();
            }
            return Ok((cfg, path.parent().map(Path::to_path_buf)));
        }
        let instance = self.instance.spec()?;
        let scheme = self.scheme.ok_or_else(|| anyhow!("--scheme is required without --config"))?;
        let mut cfg = ExperimentConfig::new(instance, scheme, self.trials, self.seed);
        cfg.name = self.name.clone();
        cfg.g = self.g;
        cfg.phases = self.phases;
        cfg.delta = self.delta;
        cfg.samples = self.samples;
        cfg.t = if self.t0 { Some("t0".parse()?) } else { self.t };
        cfg.edge_function = self.edge_function.map(|e| match e {
            EdgeFn::Rank1 => EdgeKind::Rank1,
            EdgeFn::General => EdgeKind::General,
            EdgeFn::Tree => EdgeKind::Tree,
        });
        cfg.bins = self.bins;
        cfg.exec = exec;
        cfg.validate()?;
        Ok((cfg, None))
    }
}

#[derive(Subcommand, Debug)]
enum Diag {
    /// Classify coupled samples of the recursive vertex scheme.
    Flipping {
        #[command(flatten)]
        coupled: CoupledArgs,
        #[arg(long, default_value_t = 0.5)]
        tk: f64,
        /// Number of coupled samples.
        #[arg(long, default_value_t = 100)]
        count: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Estimate the correlation gap at several horizons.
    Gap {
        #[command(flatten)]
        coupled: CoupledArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.9")]
        horizons: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value = "gap")]
        name: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Matching-size trajectory on K_{n,n}.
    Hardness {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run the two-phase scheme with this switch time instead of greedy.
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value = "hardness")]
        name: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct CoupledArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    u: usize,
    #[arg(long)]
    v: usize,
    #[arg(long = "T", default_value_t = 20)]
    phases: usize,
    #[arg(long = "Q", default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn print_checks(name: &str, checks: &[CheckOutcome]) {
    for c in checks {
        let status = if c.passed { "PASS" } else if c.assert { "FAIL" } else { "fail (not asserted)" };
        println!("{status} {name} {}: {}", c.check, c.detail);
    }
}

fn all_passed(checks: &[CheckOutcome]) -> bool {
    checks.iter().all(|c| c.passed || !c.assert)
}

fn simulate(args: &SimulateArgs, exec: Exec, profile: bool) -> Result<bool> {
    let (cfg, base) = args.config(exec)?;
    if profile && !cfg.scheme.is_exact() {
        bail!("profile needs an exact-selection scheme (recursive-vertex, recursive-edge or rank1-closed)");
    }
    let (report, timing) = run_experiment(&cfg, base.as_deref())?;
    let mut files = write_experiment(&args.out, &cfg.name, &report, Some(&timing))?;
    if args.bounds {
        let t = report.resolved.t.ok_or_else(|| anyhow!("--bounds applies to scheme two-phase"))?;
        let g = cfg.instance.load(base.as_deref())?;
        let path = args.out.join(format!("{}.bounds.csv", cfg.name));
        write_csv_file(&path, report::BOUNDS_HEADER, &report::BOUNDS_COLUMNS, report::two_phase_bound_rows(&g, t, &report)?)?;
        files.push(path);
    }
    match (report.min_ratio, report.min_ratio_edge) {
        (Some(m), Some(e)) => println!("min ratio {m:.5} at edge {e}; pooled {:.5}", report.pooled_ratio.unwrap_or(f64::NAN)),
        _ => println!("no edge with data"),
    }
    if !report.insufficient_edges.is_empty() {
        println!("insufficient data for edges {:?}", report.insufficient_edges);
    }
    if profile {
        for b in &report.bins {
            println!(
                "bin {:>2} [{:.3}, {:.3}) active {:>8} rate {} band {} {}",
                b.bin,
                b.y_lo,
                b.y_hi,
                b.active,
                b.rate.map(|r| format!("{:.4}", r.estimate)).unwrap_or_else(|| "-".into()),
                b.band.map(|(lo, hi)| format!("[{lo:.4}, {hi:.4}]")).unwrap_or_else(|| "-".into()),
                b.status.as_str()
            );
        }
    }
    print_checks(&cfg.name, &report.checks);
    for f in files {
        log::info!("wrote {}", f.display());
    }
    Ok(report.passed())
}

fn flipping(coupled: &CoupledArgs, tk: f64, samples: u64, out: Option<&Path>, exec: Exec) -> Result<()> {
    let g = coupled.instance.spec()?.load(None)?;
    let params = RecursiveParams { phases: coupled.phases, delta: 0.0, samples: coupled.samples };
    let scheme = RecursiveVertex::new(&g, SelectionFunction::vertex(g.odd_girth())?, params)?;
    let master = StreamKey::new(coupled.seed);
    let table = scheme.build_table(master.purpose(Purpose::Estimates), exec)?;
    let key = master.purpose(Purpose::Diagnostics);
    let mut rows = Vec::new();
    for i in 0..samples {
        let mut rng = key.child(i).stream();
        let s = scheme.sampler().sample_with(&mut rng, &[(coupled.u, TimeWindow::Before(tk))]);
        let coins = Coins::draw(g.vertex_count(), &mut rng);
        let run = coupled_run(&scheme, &table, &s, &coins, coupled.u, coupled.v, tk)?;
        let r = flipping_report(&scheme, &table, &s, &coins, &run);
        let path = r.potential_path.as_ref().map(|p| p.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")).unwrap_or_default();
        rows.push(vec![
            i.to_string(),
            u8::from(run.m_u()).to_string(),
            u8::from(run.m_u_without_v()).to_string(),
            r.potential_path_count.to_string(),
            path,
            u8::from(r.badly_ordered).to_string(),
            u8::from(r.flipping).to_string(),
            u8::from(r.indicator_violation).to_string(),
            u8::from(r.selection_violation).to_string(),
        ]);
    }
    let cols = ["sample", "m_u", "m_u_without_v", "potential_paths", "potential_path", "badly_ordered", "flipping", "indicator_violation", "selection_violation"];
    write_csv(output(out)?, "# rcrs flipping v1", &cols, rows)?;
    Ok(())
}

fn selection(girths: &[OddGirth], points: usize, out: Option<&Path>) -> Result<()> {
    report::write_selection_table(output(out)?, girths, points)?;
    for &g in girths {
        eprintln!("alpha_{g} = {}", num(alpha_closed_form(g)?));
    }
    Ok(())
}

fn validate(path: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let g = Graph::from_json(&text)?;
    let rep = g.validate_fractional_matching();
    let summary = json!({
        "vertex_count": g.vertex_count(),
        "edge_count": g.edge_count(),
        "odd_girth": g.odd_girth(),
        "one_regular": g.is_one_regular(),
        "max_load": (0..g.vertex_count()).map(|v| g.load(v)).fold(0.0, f64::max),
        "violations": rep.violations,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(rep.is_ok())
}

fn run(cli: Cli) -> Result<bool> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Auto };
    match cli.command {
        Command::Generate { family, output: out } => {
            let f = family.family()?.ok_or_else(|| anyhow!("--family is required"))?;
            let g = f.generate()?;
            let mut w = output(out.as_deref())?;
            writeln!(w, "{}", g.to_json())?;
            Ok(true)
        }
        Command::Validate { graph } => validate(&graph),
        Command::Simulate(args) => simulate(&args, exec, false),
        Command::Profile(args) => simulate(&args, exec, true),
        Command::Diag { which } => match which {
            Diag::Flipping { coupled, tk, count, output: out } => flipping(&coupled, tk, count, out.as_deref(), exec).map(|_| true),
            Diag::Gap { coupled, horizons, trials, name, out } => {
                let cfg = GapConfig {
                    name: name.clone(),
                    instance: coupled.instance.spec()?,
                    u: coupled.u,
                    v: coupled.v,
                    horizons,
                    phases: Some(coupled.phases),
                    samples: coupled.samples,
                    trials,
                    seed: coupled.seed,
                    output: None,
                    exec,
                    checks: Vec::new(),
                };
                let (r, t) = run_gap(&cfg, None)?;
                write_gap(&out, &name, &r, Some(&t))?;
                for e in &r.estimates {
                    println!("t_k {} gap {:.5} se {:.5} bound {:.5} violations {}", e.t_k, e.gap, e.std_error, e.bound, e.indicator_violations);
                }
                Ok(true)
            }
            Diag::Hardness { n, trials, seed, t, name, out } => {
                let cfg = HardnessConfig {
                    name: name.clone(),
                    n,
                    algorithm: t.map_or(HardnessAlgorithm::Greedy, |t| HardnessAlgorithm::TwoPhase { t }),
                    trials,
                    seed,
                    output: None,
                    exec,
                    checks: Vec::new(),
                };
                let (r, t) = run_hardness(&cfg)?;
                write_hardness(&out, &name, &r, Some(&t))?;
                println!("final mean {:.5} (m(2) = {:.5}), sup distance {:.5}", r.trajectory.final_mean, r.limit, r.trajectory.max_deviation());
                Ok(true)
            }
        },
        Command::Suite { config } => {
            let o = run_suite(&config)?;
            for t in &o.tasks {
                print_checks(&t.name, &t.checks);
            }
            println!("reports in {}", o.output_dir.display());
            Ok(o.tasks.iter().all(|t| all_passed(&t.checks)))
        }
        Command::Selection { g, points, output: out } => selection(&g, points, out.as_deref()).map(|_| true),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

