use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use infodesign::design::{feasibility_tolerance, DesignSolution};
use infodesign::moments::{build_diagonal_sdp, build_gpm_fixed_y, export_sdpa, import_sdpa, solve_moment_sdp, TmsVerdict};
use infodesign::report::{private_lower_bound, sweep_report, SweepConfig};
use infodesign::{
    bne_indirect, canonical_policy, first_best, load_scenario, optimize_diagonal, optimize_private, optimize_public,
    public_residuals, social_cost, CanonicalKind, Error, PublicPolicy, RoutingScenario, SweepMode,
};

/// Optimal information design for Bayesian routing games.
#[derive(Parser)]
#[command(name = "infodesign", version)]
struct Cli {
    /// Worker threads for multistart solves (default: all cores; env INFODESIGN_THREADS).
    #[arg(long, global = true, env = "INFODESIGN_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bayes Nash flow under a public policy.
    Equilibrium {
        scenario: PathBuf,
        /// `no-info`, `full-info`, or a message matrix such as `0.9,0.1;0,1` (rows are states).
        #[arg(long, default_value = "no-info")]
        policy: String,
        #[arg(long, default_value_t = 0.0)]
        nu: f64,
        /// Also write the flows as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// State-wise system optimum.
    FirstBest { scenario: PathBuf },
    /// Optimize a signaling policy.
    Design {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Diagonal)]
        mode: Mode,
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
        /// Atoms (private) or messages (public).
        #[arg(long, default_value_t = 2)]
        atoms: usize,
        #[arg(long, default_value_t = 100)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report a moment lower bound and the optimality gap.
        #[arg(long)]
        certify: bool,
    },
    /// Costs across participation rates, written as CSV.
    Sweep {
        scenario: PathBuf,
        /// Comma-separated participation rates.
        #[arg(long, default_value = "0,0.25,0.5,0.75,1", value_delimiter = ',')]
        grid: Vec<f64>,
        /// Private family: `diagonal`, `private` or `none`.
        #[arg(long, default_value = "diagonal")]
        private: String,
        /// Public message count, 0 to skip.
        #[arg(long, default_value_t = 2)]
        messages: usize,
        #[arg(long, default_value_t = 2)]
        atoms: usize,
        #[arg(long, default_value_t = 100)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        certify: bool,
        /// Leave the wall_ms column empty so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Solve the moment relaxation and test its moment matrix for a single atom.
    Certify {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
        /// Multistart budget of the diagonal design the bound is compared with.
        #[arg(long, default_value_t = 100)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the moment relaxation in sparse SDPA format.
    ExportSdpa {
        scenario: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
        #[arg(long, short)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Private,
    Diagonal,
    Public,
}

enum Outcome {
    Ok,
    OutOfTolerance,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::OutOfTolerance) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> infodesign::Result<Outcome> {
    match command {
        Command::Equilibrium { scenario, policy, nu, csv } => equilibrium(&load_scenario(scenario)?, &policy, nu, csv),
        Command::FirstBest { scenario } => {
            let sc = load_scenario(scenario)?;
            let fb = first_best(&sc)?;
            for (w, (f, c)) in fb.flows.iter().zip(&fb.state_costs).enumerate() {
                println!("{:<12} flow {}  cost {c:.4}", sc.states()[w], fixed(f.values()));
            }
            println!("first best {:.4}", fb.cost);
            Ok(Outcome::Ok)
        }
        Command::Design { scenario, mode, nu, atoms, starts, seed, certify } => {
            design(&load_scenario(scenario)?, mode, nu, atoms, starts, seed, certify)
        }
        Command::Sweep { scenario, grid, private, messages, atoms, starts, seed, certify, no_timing, output } => {
            let sc = load_scenario(&scenario)?;
            let mut cfg = SweepConfig::new(grid, starts, seed);
            cfg.private = match private.as_str() {
                "diagonal" => Some(SweepMode::Diagonal),
                "private" => Some(SweepMode::Atomic(atoms)),
                "none" => None,
                other => return Err(Error::Validation(format!("unknown private family '{other}'"))),
            };
            cfg.public_messages = (messages > 0).then_some(messages);
            cfg.certify = certify;
            let name = scenario.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            let report = sweep_report(&sc, &cfg, &format!("sweep {name} --private {private} --messages {messages} --starts {starts} --seed {seed}"))?;
            let file = std::fs::File::create(&output)?;
            report.write_csv(std::io::BufWriter::new(file), !no_timing)?;
            println!("wrote {} rows to {}", report.rows.len(), output.display());
            for r in report.rows.iter().filter(|r| r.error.is_some()) {
                println!("failed: nu {} {}: {}", r.nu, r.mode, r.error.as_deref().unwrap_or(""));
            }
            let violations = report.first_best_violations(1e-3);
            for r in &violations {
                println!("below first best: nu {} {} cost {:.4}", r.nu, r.mode, r.cost);
            }
            Ok(if report.has_failures() || !violations.is_empty() { Outcome::OutOfTolerance } else { Outcome::Ok })
        }
        Command::Certify { scenario, nu, starts, seed } => certify(&load_scenario(scenario)?, nu, starts, seed),
        Command::ExportSdpa { scenario, nu, output } => {
            let sc = load_scenario(scenario)?;
            let program = if sc.degree() == 1 {
                build_diagonal_sdp(&sc, nu)?
            } else if nu == 1.0 {
                build_gpm_fixed_y(&sc, &vec![0.0; sc.num_routes()])?
            } else {
                return Err(Error::Unsupported("non-affine latencies are exported only at nu = 1".into()));
            };
            export_sdpa(&program, &output)?;
            let back = import_sdpa(&output)?;
            println!(
                "wrote {}: {} moment variables, blocks {:?}",
                output.display(),
                back.num_vars,
                back.block_sizes
            );
            Ok(Outcome::Ok)
        }
    }
}

fn parse_policy(spec: &str, s: usize) -> infodesign::Result<PublicPolicy> {
    match spec {
        "no-info" => canonical_policy(CanonicalKind::NoInformation, s, 1),
        "full-info" => canonical_policy(CanonicalKind::FullInformation, s, s),
        matrix => {
            let rows = matrix
                .split(';')
                .map(|r| {
                    r.split(',')
                        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("invalid weight '{v}'"))))
                        .collect::<infodesign::Result<Vec<f64>>>()
                })
                .collect::<infodesign::Result<Vec<_>>>()?;
            if rows.len() != s {
                return Err(Error::Dimension { expected: s, got: rows.len() });
            }
            PublicPolicy::new(rows)
        }
    }
}

fn equilibrium(sc: &RoutingScenario, spec: &str, nu: f64, csv: Option<PathBuf>) -> infodesign::Result<Outcome> {
    let policy = parse_policy(spec, sc.num_states())?;
    let eq = bne_indirect(sc, &policy, nu)?;
    let atoms = eq.atoms();
    let cost = social_cost(sc, &atoms, policy.weights(), eq.y())?;
    let res = public_residuals(sc, &policy, &atoms, eq.y())?;
    for (k, x) in atoms.iter().enumerate() {
        println!("message {k}: x = {}", fixed(x));
    }
    println!("non-participants: y = {}", fixed(eq.y()));
    println!("potential {:.6}", eq.potential);
    println!("social cost {cost:.4}");
    println!("residuals: obedience {:.2e}, nash {:.2e}, kkt {:.2e}", res.max_obedience(), res.max_nash(), eq.kkt_residual);
    if let Some(path) = csv {
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        let mut header = vec!["flow".to_string()];
        header.extend((0..sc.num_routes()).map(|i| format!("route_{i}")));
        w.write_record(&header).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        let mut rows: Vec<(String, &[f64])> = atoms.iter().enumerate().map(|(k, x)| (format!("x{k}"), x.as_slice())).collect();
        rows.push(("y".into(), eq.y()));
        for (name, v) in rows {
            let mut rec = vec![name];
            rec.extend(v.iter().map(|f| f.to_string()));
            w.write_record(&rec).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
    }
    let ok = res.max().max(eq.kkt_residual) <= feasibility_tolerance(cost);
    Ok(if ok { Outcome::Ok } else { Outcome::OutOfTolerance })
}

#[allow(clippy::too_many_arguments)]
fn design(
    sc: &RoutingScenario,
    mode: Mode,
    nu: f64,
    atoms: usize,
    starts: usize,
    seed: u64,
    certify: bool,
) -> infodesign::Result<Outcome> {
    let mut sol = match mode {
        Mode::Private => optimize_private(sc, nu, atoms, starts, seed)?,
        Mode::Diagonal => optimize_diagonal(sc, nu, starts, seed)?,
        Mode::Public => optimize_public(sc, nu, atoms, starts, seed)?,
    };
    if certify && !matches!(mode, Mode::Public) {
        match private_lower_bound(sc, nu)? {
            Some(b) => sol.certify(b),
            None => println!("no lower bound available for degree {} at nu = {nu}", sc.degree()),
        }
    }
    print_design(sc, &sol);
    let mut ok = sol.max_residual() <= feasibility_tolerance(sol.cost);
    if let Some(gap) = sol.gap {
        ok &= gap <= 1e-3 * sol.cost.abs().max(1.0);
    }
    Ok(if ok { Outcome::Ok } else { Outcome::OutOfTolerance })
}

fn print_design(sc: &RoutingScenario, sol: &DesignSolution) {
    println!("{} design, nu = {}, seed {}, {} starts", sol.mode.name(), sol.nu, sol.seed, sol.starts_used);
    println!("atoms (columns):");
    let atoms = sol.atom_values();
    for i in 0..sc.num_routes() {
        println!("  {}", fixed(&atoms.iter().map(|a| a[i]).collect::<Vec<_>>()));
    }
    println!("weights (rows are states):");
    for (w, row) in sol.weights.iter().enumerate() {
        println!("  {:<10} {}", sc.states()[w], fixed(row));
    }
    println!("non-participants: {}", fixed(sol.y.values()));
    println!("cost {:.4}", sol.cost);
    println!("residuals: obedience {:.2e}, nash {:.2e}", sol.max_obedience_residual, sol.max_nash_residual);
    if let (Some(b), Some(g)) = (sol.lower_bound, sol.gap) {
        println!("lower bound {b:.6}, gap {g:.2e}");
    }
}

fn certify(sc: &RoutingScenario, nu: f64, starts: usize, seed: u64) -> infodesign::Result<Outcome> {
    let program = build_diagonal_sdp(sc, nu)?;
    let sol = solve_moment_sdp(&program)?;
    println!("moment relaxation: dimension {}, value {:.6}, relative gap {:.1e}, {} iterations", program.dimension(), sol.value, sol.relative_gap, sol.iterations);
    if let Some(t) = &sol.tms {
        println!("moment matrix: {:?} ({})", t.verdict, t.reason);
    }
    if let Some(t) = &sol.rounded {
        println!("rounded matrix: {:?} ({})", t.verdict, t.reason);
    }
    let design = optimize_diagonal(sc, nu, starts, seed)?;
    let gap = design.cost - sol.value;
    println!("diagonal design cost {:.6}, gap {gap:.2e}", design.cost);
    match sol.extracted_point() {
        Some(p) => {
            let n = sc.num_routes();
            for (w, x) in p.chunks(n).enumerate() {
                let label = if w < sc.num_states() { format!("x[{}]", sc.states()[w]) } else { "y".into() };
                println!("  {label:<12} {}", fixed(x));
            }
            let admissible = sol.tms.iter().chain(&sol.rounded).any(|t| t.verdict == TmsVerdict::Rank1Admissible);
            let ok = admissible && gap.abs() <= 1e-3 * design.cost.abs().max(1.0);
            Ok(if ok { Outcome::Ok } else { Outcome::OutOfTolerance })
        }
        None => {
            println!("no single-atom extraction; the value is a lower bound only");
            Ok(Outcome::OutOfTolerance)
        }
    }
}

fn fixed(v: &[f64]) -> String {
    v.iter().map(|&x| format!("{:8.2}", if x.abs() < 5e-3 { 0.0 } else { x })).collect::<Vec<_>>().join(" ")
}
