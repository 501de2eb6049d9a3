//! Batch front end for the `nlneumann` solvers.
//!
//! Every command returns an [`Outcome`]: the text for standard output, any
//! warnings, and an optional failure that decides the exit code. The binary
//! only does the printing.
//!
//! Floats are written with shortest round-trip digits (serde_json for JSON,
//! `{:?}` for CSV), so output is byte-identical across runs.

pub mod error;
pub mod spec;

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nlneumann::solvers::{
    analytic_spectrum, solve_strong, solve_strong_inhomogeneous, solve_weak, spectrum, EXTRA_SHELLS,
};
use nlneumann::verify::{residual_report, run_identity_suite_with, SuiteOptions, SPECTRAL_TOL};
use nlneumann::{lambda_n, FieldModel, Grid, IdentityReport, Method, Residuals, Solution};
use serde::Serialize;

pub use error::CliError;
pub use spec::ProblemSpec;

/// Largest number of rows `kernel` will print.
pub const KERNEL_ROW_CAP: usize = 100_000;

#[derive(Debug, Parser)]
#[command(
    name = "nlneumann",
    version,
    about = "Nonlocal Neumann problems on balls of a local field"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the problem described by a JSON spec and report residuals.
    Solve {
        #[arg(long)]
        spec: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run the identity suite on random locally constant functions.
    Verify {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Debug: corrupt one operator entry by this relative amount.
        #[arg(long)]
        perturb: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Eigenvalues of the restricted operator on `B_N`, compared with the closed form.
    Spectrum {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = nlneumann::solvers::DEFAULT_EIGEN_CAP)]
        cap: usize,
    },
    /// Radial resolvent kernel `r_mu(Q^s)` as CSV.
    Kernel {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(
            short = 'N',
            long = "domain-level",
            default_value_t = 1,
            allow_negative_numbers = true
        )]
        domain_level: i32,
        /// Spectral shift; defaults to the smallest eigenvalue `lambda_N`.
        #[arg(long, allow_negative_numbers = true)]
        mu: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        s_min: Option<i32>,
        #[arg(long, allow_negative_numbers = true)]
        s_max: Option<i32>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct FieldArgs {
    /// Residue field cardinality.
    #[arg(long, default_value_t = 2)]
    pub q: u32,
    /// Dimension `n` of `K^n`.
    #[arg(long, default_value_t = 1)]
    pub dim: u32,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    #[arg(
        short = 'N',
        long = "domain-level",
        default_value_t = 1,
        allow_negative_numbers = true
    )]
    pub domain_level: i32,
    #[arg(
        short = 'M',
        long = "outer-level",
        default_value_t = 2,
        allow_negative_numbers = true
    )]
    pub outer_level: i32,
    #[arg(long, default_value_t = 2, allow_negative_numbers = true)]
    pub nu: i32,
}

impl FieldArgs {
    fn model(&self, warnings: &mut Vec<String>) -> Result<FieldModel, CliError> {
        let field = FieldModel::effective_params(self.q, self.dim, self.alpha)?;
        warn_on_small_gamma(&field, warnings);
        Ok(field)
    }
}

impl GridArgs {
    fn grid(&self, warnings: &mut Vec<String>) -> Result<Grid, CliError> {
        let field = self.field.model(warnings)?;
        Ok(Grid::new(
            field,
            self.domain_level,
            self.outer_level,
            self.nu,
        )?)
    }
}

fn warn_on_small_gamma(field: &FieldModel, warnings: &mut Vec<String>) {
    if field.gamma() <= 1.0 {
        warnings.push(format!(
            "alpha/n = {} <= 1: the weak theory assumes alpha > n; results are computed but unsupported",
            field.gamma()
        ));
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub warnings: Vec<String>,
    /// Set when the command ran but a check failed; the output is still printed.
    pub failure: Option<CliError>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.failure.as_ref().map_or(0, CliError::exit_code)
    }
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Solve { spec, out, format } => cmd_solve(&spec, out.as_deref(), format),
        Command::Verify {
            grid,
            trials,
            seed,
            perturb,
            format,
        } => cmd_verify(&grid, trials, seed, perturb, format),
        Command::Spectrum { grid, cap } => cmd_spectrum(&grid, cap),
        Command::Kernel {
            field,
            domain_level,
            mu,
            s_min,
            s_max,
        } => cmd_kernel(&field, domain_level, mu, s_min, s_max),
    }
}

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub method: Method,
    /// Values on the cosets of `Omega`, tree order.
    pub u: Vec<f64>,
    /// Values on the cosets of `B_M \ B_N`, tree order.
    pub exterior: Vec<f64>,
    pub outer: f64,
    pub h: f64,
    pub residuals: Residuals,
    pub report: Vec<IdentityReport>,
    pub pass: bool,
}

pub fn cmd_solve(
    spec_path: &std::path::Path,
    out: Option<&std::path::Path>,
    format: Format,
) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(spec_path).map_err(|source| CliError::Io {
        path: spec_path.display().to_string(),
        source,
    })?;
    let spec = ProblemSpec::from_json(&text)?;
    let mut outcome = Outcome::default();
    warn_on_small_gamma(&spec.field_model()?, &mut outcome.warnings);
    let problem = spec.build()?;
    let solution: Solution = match spec.solver {
        spec::SolverKind::Galerkin => solve_weak(&problem)?,
        spec::SolverKind::Fredholm => solve_strong(&problem)?,
        spec::SolverKind::FredholmInhomogeneous => solve_strong_inhomogeneous(&problem)?,
    };
    let report = residual_report(&solution, &problem, EXTRA_SHELLS)?;
    let failed: Vec<String> = report
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.name.clone())
        .collect();
    let pass = failed.is_empty();
    let grid = *problem.grid();
    let omega = grid.omega_count();
    let body = match format {
        Format::Json => {
            let r = SolveReport {
                method: solution.method,
                u: solution.u.values()[..omega].to_vec(),
                exterior: solution.u.values()[omega..].to_vec(),
                outer: solution.u.outer(),
                h: solution.h,
                residuals: solution.residuals,
                report,
                pass,
            };
            serde_json::to_string_pretty(&r).expect("report serializes") + "\n"
        }
        Format::Csv => solution_csv(&grid, &solution, &report),
    };
    match out {
        Some(path) => std::fs::write(path, &body).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?,
        None => outcome.stdout = body,
    }
    if !pass {
        outcome.failure = Some(CliError::CheckFailed(format!(
            "residual checks failed: {}",
            failed.join(", ")
        )));
    }
    Ok(outcome)
}

fn solution_csv(grid: &Grid, solution: &Solution, report: &[IdentityReport]) -> String {
    let mut s = String::from("coset_id,level_region,value\n");
    for (i, v) in solution.u.values().iter().enumerate() {
        let region = match grid.region(i) {
            nlneumann::Region::Omega => "omega".to_string(),
            nlneumann::Region::Shell(k) => format!("shell{k}"),
        };
        writeln!(s, "{},{},{:?}", grid.coset_id(i), region, v).unwrap();
    }
    writeln!(s, "outer,{:?}", solution.u.outer()).unwrap();
    writeln!(s, "# h,{:?}", solution.h).unwrap();
    writeln!(s, "# pde_max,{:?}", solution.residuals.pde_max).unwrap();
    writeln!(s, "# neumann_max,{:?}", solution.residuals.neumann_max).unwrap();
    writeln!(s, "# compat,{:?}", solution.residuals.compat).unwrap();
    for r in report {
        writeln!(s, "# {}", report_row(r)).unwrap();
    }
    s
}

const REPORT_HEADER: &str = "name,trial,lhs,rhs,abs_defect,rel_defect,tolerance,pass";

fn report_row(r: &IdentityReport) -> String {
    let trial = r.trial.map(|t| t.to_string()).unwrap_or_default();
    format!(
        "{},{},{:?},{:?},{:?},{:?},{:?},{}",
        r.name, trial, r.lhs, r.rhs, r.abs_defect, r.rel_defect, r.tolerance, r.pass
    )
}

pub fn cmd_verify(
    grid: &GridArgs,
    trials: u64,
    seed: u64,
    perturb: Option<f64>,
    format: Format,
) -> Result<Outcome, CliError> {
    if trials == 0 {
        return Err(CliError::Validation("--trials must be at least 1".into()));
    }
    let mut outcome = Outcome::default();
    let grid = grid.grid(&mut outcome.warnings)?;
    let options = SuiteOptions {
        perturb,
        ..SuiteOptions::new(trials, seed)
    };
    let reports = run_identity_suite_with(&grid, &options)?;
    outcome.stdout = match format {
        Format::Json => serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n",
        Format::Csv => {
            let mut s = format!("{REPORT_HEADER}\n");
            for r in &reports {
                writeln!(s, "{}", report_row(r)).unwrap();
            }
            s
        }
    };
    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        outcome.failure = Some(CliError::CheckFailed(format!(
            "{failed} of {} identity checks failed",
            reports.len()
        )));
    }
    Ok(outcome)
}

pub fn cmd_spectrum(grid: &GridArgs, cap: usize) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let grid = grid.grid(&mut outcome.warnings)?;
    let spec = spectrum(&grid, cap)?;
    let lam = lambda_n(grid.field(), grid.domain_level());
    let mut s = String::from("eigenvalue,multiplicity\n");
    for (v, m) in &spec.clusters {
        writeln!(s, "{v:?},{m}").unwrap();
    }
    writeln!(s, "# lambda_N,{lam:?}").unwrap();
    let analytic = analytic_spectrum(&grid);
    let matches = analytic.len() == spec.clusters.len()
        && analytic
            .iter()
            .zip(&spec.clusters)
            .all(|((a, ma), (b, mb))| ma == mb && (a - b).abs() <= SPECTRAL_TOL * a.abs());
    writeln!(s, "# matches_closed_form,{matches}").unwrap();
    outcome.stdout = s;
    let floor = spec.eigenvalues[0];
    if (floor - lam).abs() > SPECTRAL_TOL * lam || !matches {
        outcome.failure = Some(CliError::CheckFailed(format!(
            "smallest eigenvalue {floor} vs lambda_N {lam}; closed-form spectrum match: {matches}"
        )));
    }
    Ok(outcome)
}

pub fn cmd_kernel(
    field: &FieldArgs,
    domain_level: i32,
    mu: Option<f64>,
    s_min: Option<i32>,
    s_max: Option<i32>,
) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let model = field.model(&mut outcome.warnings)?;
    let mu = mu.unwrap_or_else(|| lambda_n(&model, domain_level));
    let s_max = s_max.unwrap_or(domain_level);
    let s_min = s_min.unwrap_or(s_max - 10);
    if s_min > s_max {
        return Err(CliError::Validation(format!(
            "--s-min {s_min} exceeds --s-max {s_max}"
        )));
    }
    let rows = (s_max as i64 - s_min as i64 + 1) as usize;
    if rows > KERNEL_ROW_CAP {
        return Err(nlneumann::Error::CapExceeded {
            size: rows,
            cap: KERNEL_ROW_CAP,
        }
        .into());
    }
    let mut s = String::from("s,r\n");
    for level in (s_min..=s_max).rev() {
        let r = nlneumann::operators::resolvent_radial(&model, domain_level, mu, level)?;
        writeln!(s, "{level},{r:?}").unwrap();
    }
    outcome.stdout = s;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("nlneumann").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn kernel_table() {
        let out = run(parse(&["kernel", "-N", "1", "--s-min", "-1"])).unwrap();
        assert_eq!(out.stdout, "s,r\n1,-0.5\n0,0.25\n-1,0.625\n");
        assert_eq!(out.exit_code(), 0);
    }

    #[test]
    fn negative_levels_parse() {
        let cli = parse(&[
            "verify", "-N", "-1", "-M", "0", "--nu", "1", "--trials", "2",
        ]);
        let out = run(cli).unwrap();
        assert_eq!(out.exit_code(), 0, "{}", out.stdout);
    }

    #[test]
    fn spectrum_small_grid() {
        let out = run(parse(&["spectrum", "-N", "0", "-M", "0", "--nu", "1"])).unwrap();
        let rows: Vec<&str> = out.stdout.lines().skip(1).take(2).collect();
        let (a, b) = (
            rows[0].split_once(',').unwrap(),
            rows[1].split_once(',').unwrap(),
        );
        assert!((a.0.parse::<f64>().unwrap() - 4.0 / 7.0).abs() < 1e-12 && a.1 == "1");
        assert!((b.0.parse::<f64>().unwrap() - 4.0).abs() < 1e-12 && b.1 == "1");
        assert_eq!(out.exit_code(), 0);
        let capped = run(parse(&["spectrum", "--cap", "2"])).unwrap_err();
        assert_eq!(capped.exit_code(), 1);
    }

    #[test]
    fn verify_exit_codes() {
        assert_eq!(
            run(parse(&["verify", "--trials", "5"]))
                .unwrap()
                .exit_code(),
            0
        );
        let bad = run(parse(&["verify", "--trials", "5", "--perturb", "1e-6"])).unwrap();
        assert_eq!(bad.exit_code(), 3);
        assert_eq!(
            run(parse(&["verify", "--trials", "0"]))
                .unwrap_err()
                .exit_code(),
            1
        );
    }

    #[test]
    fn small_gamma_warns() {
        let out = run(parse(&["kernel", "--alpha", "0.5", "-N", "0"])).unwrap();
        assert_eq!(out.warnings.len(), 1);
    }
}
