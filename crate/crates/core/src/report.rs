//! Run reports: cost comparisons across participation rates, written as CSV.

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::time::Instant;

use crate::design::DesignSolution;
use crate::equilibrium::{self, first_best};
use crate::error::{Error, Result};
use crate::moments::{self, build_diagonal_sdp, build_gpm_fixed_y, build_two_link_univariate};
use crate::private_design::{sweep_nu, SweepMode};
use crate::public_design::{canonical_policy, evaluate_public, public_residuals, CanonicalKind};
use crate::scenario::RoutingScenario;

/// Column order of every report CSV.
pub const CSV_HEADER: [&str; 10] = [
    "nu",
    "mode",
    "cost",
    "lower_bound",
    "gap",
    "max_obedience_residual",
    "max_nash_residual",
    "starts",
    "seed",
    "wall_ms",
];

/// Hex SHA-256 of the scenario's canonical JSON.
pub fn scenario_digest(scenario: &RoutingScenario) -> String {
    Sha256::digest(scenario.to_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub nu: f64,
    pub mode: String,
    pub cost: f64,
    pub lower_bound: Option<f64>,
    pub gap: Option<f64>,
    pub max_obedience_residual: f64,
    pub max_nash_residual: f64,
    pub starts: usize,
    pub seed: u64,
    pub wall_ms: Option<u128>,
    /// Failure message when the row could not be computed.
    pub error: Option<String>,
}

impl ReportRow {
    fn failed(nu: f64, mode: &str, starts: usize, seed: u64, error: String) -> Self {
        Self {
            nu,
            mode: mode.to_string(),
            cost: f64::NAN,
            lower_bound: None,
            gap: None,
            max_obedience_residual: f64::NAN,
            max_nash_residual: f64::NAN,
            starts,
            seed,
            wall_ms: None,
            error: Some(error),
        }
    }

    fn from_design(sol: &DesignSolution, starts: usize) -> Self {
        Self {
            nu: sol.nu,
            mode: sol.mode.name().to_string(),
            cost: sol.cost,
            lower_bound: sol.lower_bound,
            gap: sol.gap,
            max_obedience_residual: sol.max_obedience_residual,
            max_nash_residual: sol.max_nash_residual,
            starts,
            seed: sol.seed,
            wall_ms: None,
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario_digest: String,
    pub command: String,
    pub seed: u64,
    pub version: String,
    pub rows: Vec<ReportRow>,
}

impl RunReport {
    pub fn new(scenario: &RoutingScenario, command: impl Into<String>, seed: u64) -> Self {
        Self {
            scenario_digest: scenario_digest(scenario),
            command: command.into(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            rows: Vec::new(),
        }
    }

    /// Rows of participation rate `nu`.
    pub fn rows_at(&self, nu: f64) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(move |r| r.nu == nu)
    }

    pub fn cost(&self, nu: f64, mode: &str) -> Option<f64> {
        self.rows_at(nu).find(|r| r.mode == mode && r.error.is_none()).map(|r| r.cost)
    }

    pub fn has_failures(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }

    /// Rows whose cost falls below the first best of the same `nu` by more than `tol`.
    pub fn first_best_violations(&self, tol: f64) -> Vec<&ReportRow> {
        self.rows
            .iter()
            .filter(|r| r.error.is_none() && r.mode != "first-best")
            .filter(|r| self.cost(r.nu, "first-best").is_some_and(|fb| r.cost < fb - tol))
            .collect()
    }

    /// Writes the CSV, preceded by `#` comment lines identifying the scenario and command.
    pub fn write_csv<W: Write>(&self, out: W, timing: bool) -> Result<()> {
        let mut out = out;
        writeln!(out, "# infodesign {}", self.version)?;
        writeln!(out, "# scenario_sha256 {}", self.scenario_digest)?;
        writeln!(out, "# command {}", self.command)?;
        writeln!(out, "# seed {}", self.seed)?;
        for r in self.rows.iter().filter(|r| r.error.is_some()) {
            writeln!(out, "# failed nu={} mode={}: {}", r.nu, r.mode, r.error.as_deref().unwrap_or(""))?;
        }
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for r in &self.rows {
            w.write_record([
                r.nu.to_string(),
                r.mode.clone(),
                r.cost.to_string(),
                opt(r.lower_bound),
                opt(r.gap),
                r.max_obedience_residual.to_string(),
                r.max_nash_residual.to_string(),
                r.starts.to_string(),
                r.seed.to_string(),
                if timing { r.wall_ms.map_or(String::new(), |t| t.to_string()) } else { String::new() },
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self, timing: bool) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, timing).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

/// Lower bound on the optimal private cost at `nu`, when one is available.
///
/// Affine latencies use the diagonal moment relaxation. Otherwise, at `nu = 1` nobody is outside
/// the scheme and the fixed-flow relaxation with `y = 0` applies (exact for two routes).
pub fn private_lower_bound(scenario: &RoutingScenario, nu: f64) -> Result<Option<f64>> {
    let program = if scenario.degree() == 1 {
        build_diagonal_sdp(scenario, nu)?
    } else if nu == 1.0 {
        let y = vec![0.0; scenario.num_routes()];
        if scenario.num_routes() == 2 {
            build_two_link_univariate(scenario, &y, 1.0)?
        } else {
            build_gpm_fixed_y(scenario, &y)?
        }
    } else {
        return Ok(None);
    };
    let sol = moments::solve_moment_sdp(&program)?;
    Ok(Some(sol.value.min(sol.dual_bound)))
}

/// Which rows a sweep produces.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub grid: Vec<f64>,
    /// Private family; `None` skips private rows.
    pub private: Option<SweepMode>,
    /// Public message count; `None` skips public rows.
    pub public_messages: Option<usize>,
    /// Full-information, no-information and first-best reference rows.
    pub references: bool,
    pub certify: bool,
    pub starts: usize,
    pub seed: u64,
}

impl SweepConfig {
    pub fn new(grid: Vec<f64>, starts: usize, seed: u64) -> Self {
        Self {
            grid,
            private: Some(SweepMode::Diagonal),
            public_messages: Some(2),
            references: true,
            certify: false,
            starts,
            seed,
        }
    }
}

/// Runs a participation sweep. Failures are recorded per row rather than aborting the report.
pub fn sweep_report(scenario: &RoutingScenario, config: &SweepConfig, command: &str) -> Result<RunReport> {
    if let Some(bad) = config.grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Validation(format!("grid value {bad} outside [0, 1]")));
    }
    let mut report = RunReport::new(scenario, command, config.seed);
    let (starts, seed) = (config.starts, config.seed);
    let mut design_rows: Vec<ReportRow> = Vec::new();
    for mode in [config.private, config.public_messages.map(SweepMode::Public)].into_iter().flatten() {
        let clock = Instant::now();
        let points = sweep_nu(scenario, &config.grid, mode, starts, seed)?;
        let per_point = clock.elapsed().as_millis() / config.grid.len().max(1) as u128;
        for p in points {
            let mut row = match p.solution {
                Ok(mut sol) => {
                    if config.certify && !matches!(mode, SweepMode::Public(_)) {
                        match private_lower_bound(scenario, p.nu) {
                            Ok(Some(b)) => sol.certify(b),
                            Ok(None) => {}
                            Err(e) => {
                                design_rows.push(ReportRow::failed(p.nu, "certificate", starts, seed, e.to_string()))
                            }
                        }
                    }
                    ReportRow::from_design(&sol, starts)
                }
                Err(e) => ReportRow::failed(p.nu, sweep_mode_name(mode), starts, seed, e),
            };
            row.wall_ms = Some(per_point);
            design_rows.push(row);
        }
    }
    let mut reference_rows: Vec<ReportRow> = Vec::new();
    if config.references {
        let clock = Instant::now();
        let fb = first_best(scenario);
        let fb_ms = clock.elapsed().as_millis();
        reference_rows = config
            .grid
            .par_iter()
            .flat_map_iter(|&nu| {
                let mut rows = vec![
                    canonical_row(scenario, nu, CanonicalKind::FullInformation, seed),
                    canonical_row(scenario, nu, CanonicalKind::NoInformation, seed),
                ];
                rows.push(match &fb {
                    Ok(fb) => ReportRow {
                        nu,
                        mode: "first-best".into(),
                        cost: fb.cost,
                        lower_bound: None,
                        gap: None,
                        max_obedience_residual: 0.0,
                        max_nash_residual: 0.0,
                        starts: 0,
                        seed,
                        wall_ms: Some(fb_ms),
                        error: None,
                    },
                    Err(e) => ReportRow::failed(nu, "first-best", 0, seed, e.to_string()),
                });
                rows
            })
            .collect();
    }
    let mut rows = design_rows;
    rows.extend(reference_rows);
    let order = |m: &str| ["diagonal", "private", "public", "full-info", "no-info", "first-best"].iter().position(|x| *x == m).unwrap_or(6);
    rows.sort_by(|a, b| a.nu.total_cmp(&b.nu).then(order(&a.mode).cmp(&order(&b.mode))));
    report.rows = rows;
    Ok(report)
}

fn sweep_mode_name(mode: SweepMode) -> &'static str {
    match mode {
        SweepMode::Diagonal => "diagonal",
        SweepMode::Atomic(_) => "private",
        SweepMode::Public(_) => "public",
    }
}

fn canonical_row(scenario: &RoutingScenario, nu: f64, kind: CanonicalKind, seed: u64) -> ReportRow {
    let name = match kind {
        CanonicalKind::FullInformation => "full-info",
        CanonicalKind::NoInformation => "no-info",
    };
    let clock = Instant::now();
    let s = scenario.num_states();
    let m = if kind == CanonicalKind::FullInformation { s } else { 1 };
    let run = || -> Result<ReportRow> {
        let policy = canonical_policy(kind, s, m)?;
        let eq = equilibrium::bne_indirect(scenario, &policy, nu)?;
        let res = public_residuals(scenario, &policy, &eq.atoms(), eq.y())?;
        Ok(ReportRow {
            nu,
            mode: name.into(),
            cost: evaluate_public(scenario, &policy, nu)?,
            lower_bound: None,
            gap: None,
            max_obedience_residual: res.max_obedience(),
            max_nash_residual: res.max_nash(),
            starts: 0,
            seed,
            wall_ms: None,
            error: None,
        })
    };
    let mut row = run().unwrap_or_else(|e| ReportRow::failed(nu, name, 0, seed, e.to_string()));
    row.wall_ms = Some(clock.elapsed().as_millis());
    row
}
