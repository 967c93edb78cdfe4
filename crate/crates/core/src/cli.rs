//! Command-line front end: parameter sweeps written as CSV, a Fock-space
//! cross-check and a single-point decomposition dump.
//!
//! Exit codes are [`EXIT_OK`], [`EXIT_USAGE`], [`EXIT_TOLERANCE`] and
//! [`EXIT_LEAKAGE`].

use std::f64::consts::FRAC_PI_2;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::config::Tolerances;
use crate::decompose::{
    extract_ou_with, extract_zou_with, g_bound_check_with, Branch, ExtractionReport, OuScheme,
    ZouScheme,
};
use crate::device::{
    classify_regime_with, transfer_matrix_with, zou_transfer_matrix, ContinuousDevice, Regime,
    TransferMatrix, ZouDevice,
};
use crate::error::{Error, Result};
use crate::fock_oracle::{evolve_with, fock_observables, FockBasis, DEFAULT_N_MAX};
use crate::moments::{vacuum_moments, Coherence, Intensities};
use crate::whichway::{geometry, ou_gamma_with};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_TOLERANCE: i32 = 2;
pub const EXIT_LEAKAGE: i32 = 3;

/// Couplings `(Γ1, Γ2, κ)` shared by the length-sweep presets.
pub const FIG2_COUPLINGS: (f64, f64, f64) = (0.1, 0.3, 3.0);
/// Squeezings `(r1, r2)` of the alignment-sweep preset.
pub const FIG7_SQUEEZINGS: (f64, f64) = (0.1, 0.1);
/// Lengths probed by `oracle-check` unless a grid is given.
pub const ORACLE_LENGTHS: [f64; 4] = [0.5, 1.0, 1.5, 2.0];

pub const LENGTH_COLUMNS: &[(&str, &str)] = &[
    ("L", "interaction length"),
    ("gamma", "signed signal coherence, empty when undefined"),
    (
        "gamma_defined",
        "1 when both signal occupations exceed the floor, else 0",
    ),
    ("n_s1", "mean photon number in signal 1"),
    ("n_s2", "mean photon number in signal 2"),
    ("n_total_signal", "n_s1 + n_s2"),
    ("zou_g1", "Zou scheme squeezing on (s1,i1)"),
    ("zou_g2", "Zou scheme squeezing on (s2,i2)"),
    ("zou_g4", "Zou scheme squeezing on (s1,i2)"),
    ("zou_g5", "Zou scheme squeezing on (s2,i1)"),
    (
        "uv_angle",
        "oriented angle from u=(g1,g4) to v=(g5,-g2) in (-pi,pi]",
    ),
    ("ou_g1", "Ou scheme squeezing on (s1,i1)"),
    ("ou_g2", "Ou scheme squeezing on (s2,i2)"),
    ("ou_phis", "Ou scheme signal mixing angle"),
    ("ou_phii", "Ou scheme idler mixing angle"),
    (
        "zou_residual",
        "largest vacuum moment left after undoing the Zou scheme",
    ),
    (
        "ou_residual",
        "largest vacuum moment left after undoing the Ou scheme",
    ),
    ("status", "ok, or semicolon-separated stage:error codes"),
];

pub const PSI_COLUMNS: &[(&str, &str)] = &[
    ("psi", "idler alignment angle"),
    ("gamma", "signed signal coherence, empty when undefined"),
    ("ou_g1", "Ou scheme squeezing on (s1,i1)"),
    ("ou_g2", "Ou scheme squeezing on (s2,i2)"),
    ("ou_phis", "Ou scheme signal mixing angle"),
    ("ou_phii", "Ou scheme idler mixing angle"),
    (
        "ou_residual",
        "largest vacuum moment left after undoing the Ou scheme",
    ),
    ("status", "ok, or semicolon-separated stage:error codes"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Fig2,
    Fig4,
    Fig6,
    Fig7,
}

/// Which device a sweep runs over. The sweep variable follows from it:
/// length for a continuous device, alignment angle for a Zou device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeviceSpec {
    Continuous {
        gamma1: f64,
        gamma2: f64,
        kappa: f64,
    },
    Zou {
        r1: f64,
        r2: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub device: DeviceSpec,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    pub output: Option<PathBuf>,
    /// Subset and order of columns, all of them when `None`.
    pub columns: Option<Vec<String>>,
    pub tolerances: Tolerances,
    /// Worker threads, rayon's default when `None`.
    pub threads: Option<usize>,
}

impl SweepConfig {
    pub fn new(device: DeviceSpec, start: f64, stop: f64, steps: usize) -> Self {
        SweepConfig {
            device,
            start,
            stop,
            steps,
            output: None,
            columns: None,
            tolerances: Tolerances::DEFAULT,
            threads: None,
        }
    }

    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Fig2 | Preset::Fig4 | Preset::Fig6 => {
                let (gamma1, gamma2, kappa) = FIG2_COUPLINGS;
                SweepConfig::new(
                    DeviceSpec::Continuous {
                        gamma1,
                        gamma2,
                        kappa,
                    },
                    0.01,
                    20.0,
                    2000,
                )
            }
            Preset::Fig7 => {
                let (r1, r2) = FIG7_SQUEEZINGS;
                SweepConfig::new(DeviceSpec::Zou { r1, r2 }, 0.0, FRAC_PI_2, 100)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::InvalidParameter(
                "sweep bounds must be finite".into(),
            ));
        }
        if !(self.start < self.stop) {
            return Err(Error::InvalidParameter(format!(
                "sweep start {} must be below stop {}",
                self.start, self.stop
            )));
        }
        if self.steps < 2 {
            return Err(Error::InvalidParameter(format!(
                "steps must be at least 2, got {}",
                self.steps
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter("threads must be positive".into()));
        }
        let known = match self.device {
            DeviceSpec::Continuous { .. } => LENGTH_COLUMNS,
            DeviceSpec::Zou { .. } => PSI_COLUMNS,
        };
        for c in self.columns.iter().flatten() {
            if !known.iter().any(|(name, _)| name == c) {
                return Err(Error::InvalidParameter(format!("unknown column {c:?}")));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        grid(self.start, self.stop, self.steps)
    }
}

/// `steps` evenly spaced points whose last one is exactly `stop`.
pub fn grid(start: f64, stop: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let last = steps - 1;
            (0..steps)
                .map(|k| {
                    if k == last {
                        stop
                    } else {
                        start + (stop - start) * k as f64 / last as f64
                    }
                })
                .collect()
        }
    }
}

fn map_points<T: Send>(
    points: &[f64],
    threads: Option<usize>,
    f: impl Fn(f64) -> T + Sync + Send,
) -> Result<Vec<T>> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            Ok(pool.install(|| points.par_iter().map(|&x| f(x)).collect()))
        }
        None => Ok(points.par_iter().map(|&x| f(x)).collect()),
    }
}

fn status(problems: &[String]) -> String {
    if problems.is_empty() {
        "ok".to_string()
    } else {
        problems.join(";")
    }
}

fn coherence_of(m: &TransferMatrix, tol: &Tolerances) -> (Intensities, Option<f64>) {
    let moments = vacuum_moments(m);
    let n = moments.intensities();
    let gamma = Coherence::from_parts(moments.signal_cross(), n.s1, n.s2, tol)
        .ok()
        .map(|c| c.gamma);
    (n, gamma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthRow {
    pub length: f64,
    pub gamma: Option<f64>,
    pub intensities: Option<Intensities>,
    pub zou: Option<ExtractionReport<ZouScheme>>,
    pub uv_angle: Option<f64>,
    pub ou: Option<ExtractionReport<OuScheme>>,
    pub status: String,
}

impl LengthRow {
    pub fn cell(&self, column: &str) -> String {
        let zou = |f: fn(&ZouScheme) -> f64| opt(self.zou.as_ref().map(|r| f(&r.scheme)));
        let ou = |f: fn(&OuScheme) -> f64| opt(self.ou.as_ref().map(|r| f(&r.scheme)));
        let n = |f: fn(&Intensities) -> f64| opt(self.intensities.as_ref().map(f));
        match column {
            "L" => num(self.length),
            "gamma" => opt(self.gamma),
            "gamma_defined" => if self.gamma.is_some() { "1" } else { "0" }.to_string(),
            "n_s1" => n(|i| i.s1),
            "n_s2" => n(|i| i.s2),
            "n_total_signal" => n(|i| i.total_signal()),
            "zou_g1" => zou(ZouScheme::g1),
            "zou_g2" => zou(ZouScheme::g2),
            "zou_g4" => zou(ZouScheme::g4),
            "zou_g5" => zou(ZouScheme::g5),
            "uv_angle" => opt(self.uv_angle),
            "ou_g1" => ou(OuScheme::g1),
            "ou_g2" => ou(OuScheme::g2),
            "ou_phis" => ou(OuScheme::phi_s),
            "ou_phii" => ou(OuScheme::phi_i),
            "zou_residual" => opt(self.zou.as_ref().map(|r| r.residual)),
            "ou_residual" => opt(self.ou.as_ref().map(|r| r.residual)),
            "status" => self.status.clone(),
            other => panic!("unknown length-sweep column {other:?}"),
        }
    }
}

/// Everything the length sweep reports at one point.
pub fn length_row(
    gamma1: f64,
    gamma2: f64,
    kappa: f64,
    length: f64,
    tol: &Tolerances,
) -> LengthRow {
    let mut row = LengthRow {
        length,
        gamma: None,
        intensities: None,
        zou: None,
        uv_angle: None,
        ou: None,
        status: String::new(),
    };
    let m = match ContinuousDevice::new(gamma1, gamma2, kappa, length)
        .and_then(|d| transfer_matrix_with(&d, tol))
    {
        Ok(m) => m,
        Err(e) => {
            row.status = format!("transfer:{}", e.code());
            return row;
        }
    };
    let mut problems = Vec::new();
    let (n, gamma) = coherence_of(&m, tol);
    row.intensities = Some(n);
    row.gamma = gamma;
    match extract_zou_with(&m, tol) {
        Ok(r) => {
            row.uv_angle = geometry(&r.scheme)
                .ok()
                .filter(|g| !g.degenerate)
                .map(|g| g.angle);
            row.zou = Some(r);
        }
        Err(e) => problems.push(format!("zou:{}", e.code())),
    }
    match extract_ou_with(&m, tol) {
        Ok(r) => row.ou = Some(r),
        Err(e) => problems.push(format!("ou:{}", e.code())),
    }
    row.status = status(&problems);
    row
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiRow {
    pub psi: f64,
    pub gamma: Option<f64>,
    pub ou: Option<ExtractionReport<OuScheme>>,
    pub status: String,
}

impl PsiRow {
    pub fn cell(&self, column: &str) -> String {
        let ou = |f: fn(&OuScheme) -> f64| opt(self.ou.as_ref().map(|r| f(&r.scheme)));
        match column {
            "psi" => num(self.psi),
            "gamma" => opt(self.gamma),
            "ou_g1" => ou(OuScheme::g1),
            "ou_g2" => ou(OuScheme::g2),
            "ou_phis" => ou(OuScheme::phi_s),
            "ou_phii" => ou(OuScheme::phi_i),
            "ou_residual" => opt(self.ou.as_ref().map(|r| r.residual)),
            "status" => self.status.clone(),
            other => panic!("unknown psi-sweep column {other:?}"),
        }
    }
}

pub fn psi_row(r1: f64, r2: f64, psi: f64, tol: &Tolerances) -> PsiRow {
    let mut row = PsiRow {
        psi,
        gamma: None,
        ou: None,
        status: String::new(),
    };
    let m = match ZouDevice::new(r1, r2, psi).and_then(|d| zou_transfer_matrix(&d)) {
        Ok(m) => m,
        Err(e) => {
            row.status = format!("transfer:{}", e.code());
            return row;
        }
    };
    let mut problems = Vec::new();
    let (_, gamma) = coherence_of(&m, tol);
    row.gamma = gamma;
    if gamma.is_none() {
        problems.push("gamma:undefined_coherence".to_string());
    }
    match extract_ou_with(&m, tol) {
        Ok(r) => row.ou = Some(r),
        Err(e) => problems.push(format!("ou:{}", e.code())),
    }
    row.status = status(&problems);
    row
}

pub fn sweep_length(cfg: &SweepConfig) -> Result<Vec<LengthRow>> {
    cfg.validate()?;
    let DeviceSpec::Continuous {
        gamma1,
        gamma2,
        kappa,
    } = cfg.device
    else {
        return Err(Error::InvalidParameter(
            "a length sweep needs a continuous device".into(),
        ));
    };
    ContinuousDevice::new(gamma1, gamma2, kappa, 0.0)?;
    if cfg.start < 0.0 {
        return Err(Error::InvalidParameter(
            "lengths must be non-negative".into(),
        ));
    }
    let tol = cfg.tolerances;
    map_points(&cfg.grid(), cfg.threads, |l| {
        length_row(gamma1, gamma2, kappa, l, &tol)
    })
}

pub fn sweep_psi(cfg: &SweepConfig) -> Result<Vec<PsiRow>> {
    cfg.validate()?;
    let DeviceSpec::Zou { r1, r2 } = cfg.device else {
        return Err(Error::InvalidParameter(
            "an alignment sweep needs a Zou device".into(),
        ));
    };
    ZouDevice::new(r1, r2, cfg.start)?;
    ZouDevice::new(r1, r2, cfg.stop)?;
    let tol = cfg.tolerances;
    map_points(&cfg.grid(), cfg.threads, |psi| psi_row(r1, r2, psi, &tol))
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Header plus one line per row, LF terminated.
pub fn render_csv<R>(columns: &[&str], rows: &[R], cell: impl Fn(&R, &str) -> String) -> String {
    let mut out = columns.join(",");
    out.push('\n');
    for row in rows {
        let line: Vec<String> = columns.iter().map(|c| cell(row, c)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn selected<'a>(cfg: &'a SweepConfig, all: &'a [(&'a str, &'a str)]) -> Vec<&'a str> {
    match &cfg.columns {
        Some(cols) => cols.iter().map(String::as_str).collect(),
        None => all.iter().map(|(name, _)| *name).collect(),
    }
}

pub fn length_csv(cfg: &SweepConfig) -> Result<String> {
    let rows = sweep_length(cfg)?;
    Ok(render_csv(
        &selected(cfg, LENGTH_COLUMNS),
        &rows,
        LengthRow::cell,
    ))
}

pub fn psi_csv(cfg: &SweepConfig) -> Result<String> {
    let rows = sweep_psi(cfg)?;
    Ok(render_csv(&selected(cfg, PSI_COLUMNS), &rows, PsiRow::cell))
}

/// Gaussian against Fock results at one length.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePoint {
    pub length: f64,
    /// Largest intensity deviation, `None` when the evolution leaked.
    pub intensity_deviation: Option<f64>,
    /// `None` when γ is undefined in either picture or the evolution leaked.
    pub gamma_deviation: Option<f64>,
    pub leakage: f64,
    pub leaked: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub points: Vec<OraclePoint>,
    pub tolerance: f64,
    pub leakage_limit: f64,
}

impl OracleReport {
    pub fn max_intensity_deviation(&self) -> f64 {
        self.points
            .iter()
            .filter_map(|p| p.intensity_deviation)
            .fold(0.0, f64::max)
    }

    pub fn max_gamma_deviation(&self) -> Option<f64> {
        self.points
            .iter()
            .filter_map(|p| p.gamma_deviation)
            .reduce(f64::max)
    }

    pub fn max_leakage(&self) -> f64 {
        self.points.iter().map(|p| p.leakage).fold(0.0, f64::max)
    }

    pub fn exit_code(&self) -> i32 {
        if self.points.iter().any(|p| p.leaked) {
            EXIT_LEAKAGE
        } else if self.max_intensity_deviation() > self.tolerance
            || self
                .max_gamma_deviation()
                .is_some_and(|g| g > self.tolerance)
        {
            EXIT_TOLERANCE
        } else {
            EXIT_OK
        }
    }
}

/// Runs the Fock evolution at each length and compares with the moments.
/// Devices that are not below threshold are refused.
pub fn oracle_check(
    couplings: (f64, f64, f64),
    lengths: &[f64],
    n_max: usize,
    tol: &Tolerances,
    threads: Option<usize>,
) -> Result<OracleReport> {
    let (gamma1, gamma2, kappa) = couplings;
    let base = ContinuousDevice::new(gamma1, gamma2, kappa, 0.0)?;
    let regime = classify_regime_with(&base, tol);
    if regime != Regime::BelowThreshold {
        return Err(Error::InvalidParameter(format!(
            "device is {}; intensities grow without bound there and no fixed Fock cutoff can follow them",
            regime_label(regime)
        )));
    }
    let basis = FockBasis::new(n_max)?;
    for &l in lengths {
        base.with_length(l)?;
    }
    let results = map_points(lengths, threads, |l| -> Result<OraclePoint> {
        let dev = base.with_length(l)?;
        let m = transfer_matrix_with(&dev, tol)?;
        let (n, gamma) = coherence_of(&m, tol);
        match evolve_with(&dev, &basis, tol) {
            Ok(state) => {
                let obs = fock_observables(&state);
                let fock_gamma = obs.coherence_with(tol).ok().map(|c| c.gamma);
                Ok(OraclePoint {
                    length: l,
                    intensity_deviation: Some(obs.intensities.max_abs_diff(&n)),
                    gamma_deviation: gamma.zip(fock_gamma).map(|(a, b)| (a - b).abs()),
                    leakage: state.leakage(),
                    leaked: false,
                })
            }
            Err(Error::LeakageTooLarge { leakage, .. }) => Ok(OraclePoint {
                length: l,
                intensity_deviation: None,
                gamma_deviation: None,
                leakage,
                leaked: true,
            }),
            Err(e) => Err(e),
        }
    })?;
    Ok(OracleReport {
        points: results.into_iter().collect::<Result<_>>()?,
        tolerance: tol.oracle_agreement,
        leakage_limit: tol.max_leakage,
    })
}

fn regime_label(r: Regime) -> &'static str {
    match r {
        Regime::AboveThreshold => "above threshold",
        Regime::BelowThreshold => "below threshold",
        Regime::AtThreshold => "at threshold",
    }
}

pub fn render_oracle_report(report: &OracleReport) -> String {
    let mut out = String::from("L,intensity_deviation,gamma_deviation,leakage\n");
    for p in &report.points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            num(p.length),
            opt(p.intensity_deviation),
            opt(p.gamma_deviation),
            num(p.leakage)
        ));
    }
    out.push_str(&format!(
        "max intensity deviation: {:e}\n",
        report.max_intensity_deviation()
    ));
    match report.max_gamma_deviation() {
        Some(g) => out.push_str(&format!("max gamma deviation: {g:e}\n")),
        None => out.push_str("max gamma deviation: skipped (undefined)\n"),
    }
    out.push_str(&format!(
        "max leakage: {:e} (limit {:e})\n",
        report.max_leakage(),
        report.leakage_limit
    ));
    out.push_str(&format!("tolerance: {:e}\n", report.tolerance));
    let verdict = match report.exit_code() {
        EXIT_OK => "PASS",
        EXIT_LEAKAGE => "FAIL (truncation leakage)",
        _ => "FAIL (tolerance breach)",
    };
    out.push_str(&format!("result: {verdict}\n"));
    out
}

#[derive(Debug, Parser)]
#[command(
    name = "coupled-pdc",
    version,
    about = "Continuously coupled downconverters: sweeps, decompositions and oracle checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep the interaction length of a continuous device and write CSV.
    SweepLength(LengthArgs),
    /// Sweep the idler alignment angle of a Zou device and write CSV.
    SweepPsi(PsiArgs),
    /// Compare Gaussian results with a truncated Fock-space evolution.
    OracleCheck(OracleArgs),
    /// Print both decompositions of a single device.
    Decompose(DecomposeArgs),
}

#[derive(Debug, Args)]
struct CouplingArgs {
    /// fig2, fig4 and fig6 share κ=3, Γ1=0.1, Γ2=0.3; fig7 is the Zou device.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long, allow_negative_numbers = true)]
    gamma1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long, allow_negative_numbers = true)]
    from: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    to: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of columns, in output order.
    #[arg(long)]
    columns: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    /// List the CSV columns and exit.
    #[arg(long)]
    describe_columns: bool,
}

#[derive(Debug, Args)]
struct LengthArgs {
    #[command(flatten)]
    couplings: CouplingArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct PsiArgs {
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long, allow_negative_numbers = true)]
    r1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    r2: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    couplings: CouplingArgs,
    /// Lengths to probe; 0.5, 1, 1.5 and 2 when no grid is given.
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = DEFAULT_N_MAX)]
    nmax: usize,
    /// Largest accepted Gaussian–Fock deviation.
    #[arg(long)]
    oracle_tol: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    #[command(flatten)]
    couplings: CouplingArgs,
    /// Interaction length of a continuous device.
    #[arg(long)]
    length: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    r1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    r2: Option<f64>,
    /// Alignment angle; selects the Zou device.
    #[arg(long)]
    psi: Option<f64>,
}

struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        usage(format!("i/o: {e}"))
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::SweepLength(a) => cmd_sweep_length(a, out),
        Command::SweepPsi(a) => cmd_sweep_psi(a, out),
        Command::OracleCheck(a) => cmd_oracle_check(a, out),
        Command::Decompose(a) => cmd_decompose(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn describe(columns: &[(&str, &str)], out: &mut dyn Write) -> Result<i32, Failure> {
    for (name, text) in columns {
        writeln!(out, "{name}\t{text}")?;
    }
    Ok(EXIT_OK)
}

fn couplings(c: &CouplingArgs) -> Result<(f64, f64, f64), Failure> {
    let base = match c.preset {
        Some(Preset::Fig7) => {
            return Err(usage(
                "preset fig7 describes a Zou device; use sweep-psi or --psi",
            ))
        }
        Some(_) => Some(FIG2_COUPLINGS),
        None => None,
    };
    let pick = |v: Option<f64>, d: Option<f64>, flag: &str| {
        v.or(d)
            .ok_or_else(|| usage(format!("--{flag} is required without --preset")))
    };
    Ok((
        pick(c.gamma1, base.map(|b| b.0), "gamma1")?,
        pick(c.gamma2, base.map(|b| b.1), "gamma2")?,
        pick(c.kappa, base.map(|b| b.2), "kappa")?,
    ))
}

fn apply_grid(cfg: &mut SweepConfig, g: &GridArgs, preset: bool) -> Result<(), Failure> {
    if !preset && (g.from.is_none() || g.to.is_none() || g.steps.is_none()) {
        return Err(usage(
            "--from, --to and --steps are required without --preset",
        ));
    }
    cfg.start = g.from.unwrap_or(cfg.start);
    cfg.stop = g.to.unwrap_or(cfg.stop);
    cfg.steps = g.steps.unwrap_or(cfg.steps);
    Ok(())
}

fn apply_output(cfg: &mut SweepConfig, o: &OutputArgs) {
    cfg.output = o.out.clone();
    cfg.columns = o
        .columns
        .as_ref()
        .map(|c| c.split(',').map(|s| s.trim().to_string()).collect());
    cfg.threads = o.threads;
}

fn emit(cfg: &SweepConfig, csv: &str, out: &mut dyn Write) -> Result<i32, Failure> {
    match &cfg.output {
        Some(path) => std::fs::write(path, csv)?,
        None => out.write_all(csv.as_bytes())?,
    }
    Ok(EXIT_OK)
}

fn cmd_sweep_length(a: LengthArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    if a.output.describe_columns {
        return describe(LENGTH_COLUMNS, out);
    }
    let (gamma1, gamma2, kappa) = couplings(&a.couplings)?;
    let mut cfg = SweepConfig::preset(Preset::Fig2);
    cfg.device = DeviceSpec::Continuous {
        gamma1,
        gamma2,
        kappa,
    };
    apply_grid(&mut cfg, &a.grid, a.couplings.preset.is_some())?;
    apply_output(&mut cfg, &a.output);
    let csv = length_csv(&cfg)?;
    emit(&cfg, &csv, out)
}

fn cmd_sweep_psi(a: PsiArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    if a.output.describe_columns {
        return describe(PSI_COLUMNS, out);
    }
    let base = match a.preset {
        Some(Preset::Fig7) => Some(FIG7_SQUEEZINGS),
        Some(_) => {
            return Err(usage(
                "presets fig2, fig4 and fig6 describe a continuous device; use sweep-length",
            ))
        }
        None => None,
    };
    let r1 =
        a.r1.or(base.map(|b| b.0))
            .ok_or_else(|| usage("--r1 is required without --preset"))?;
    let r2 =
        a.r2.or(base.map(|b| b.1))
            .ok_or_else(|| usage("--r2 is required without --preset"))?;
    let mut cfg = SweepConfig::preset(Preset::Fig7);
    cfg.device = DeviceSpec::Zou { r1, r2 };
    apply_grid(&mut cfg, &a.grid, a.preset.is_some())?;
    apply_output(&mut cfg, &a.output);
    let csv = psi_csv(&cfg)?;
    emit(&cfg, &csv, out)
}

fn oracle_lengths(g: &GridArgs) -> Result<Vec<f64>, Failure> {
    let Some(from) = g.from else {
        if g.to.is_some() || g.steps.is_some() {
            return Err(usage("--to and --steps need --from"));
        }
        return Ok(ORACLE_LENGTHS.to_vec());
    };
    let to = g.to.unwrap_or(from);
    let steps = match g.steps {
        Some(s) => s,
        None if to == from => 1,
        None => return Err(usage("--steps is required when --to differs from --from")),
    };
    if steps == 1 && to == from {
        return Ok(vec![from]);
    }
    let mut cfg = SweepConfig::new(
        DeviceSpec::Continuous {
            gamma1: 0.0,
            gamma2: 0.0,
            kappa: 0.0,
        },
        from,
        to,
        steps,
    );
    cfg.columns = None;
    cfg.validate()?;
    Ok(cfg.grid())
}

fn cmd_oracle_check(a: OracleArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let c = couplings(&a.couplings)?;
    let lengths = oracle_lengths(&a.grid)?;
    let mut tol = Tolerances::DEFAULT;
    if let Some(t) = a.oracle_tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(usage("--oracle-tol must be positive"));
        }
        tol.oracle_agreement = t;
    }
    if a.threads == Some(0) {
        return Err(usage("--threads must be positive"));
    }
    let report = oracle_check(c, &lengths, a.nmax, &tol, a.threads)?;
    out.write_all(render_oracle_report(&report).as_bytes())?;
    Ok(report.exit_code())
}

fn branch_label(b: Branch) -> &'static str {
    match b {
        Branch::ClosedForm => "closed-form",
        Branch::Plus => "plus",
        Branch::Minus => "minus",
        Branch::Fallback => "fallback",
    }
}

fn cmd_decompose(a: DecomposeArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let tol = Tolerances::DEFAULT;
    let zou_device = a.psi.is_some() || a.couplings.preset == Some(Preset::Fig7);
    let mut text = String::new();
    let m = if zou_device {
        let base = (a.couplings.preset == Some(Preset::Fig7)).then_some(FIG7_SQUEEZINGS);
        let r1 =
            a.r1.or(base.map(|b| b.0))
                .ok_or_else(|| usage("--r1 is required without --preset fig7"))?;
        let r2 =
            a.r2.or(base.map(|b| b.1))
                .ok_or_else(|| usage("--r2 is required without --preset fig7"))?;
        let psi = a
            .psi
            .ok_or_else(|| usage("--psi is required for the Zou device"))?;
        let dev = ZouDevice::new(r1, r2, psi)?;
        text.push_str(&format!(
            "device: zou r1={} r2={} psi={}\n",
            num(r1),
            num(r2),
            num(psi)
        ));
        zou_transfer_matrix(&dev)?
    } else {
        let (g1, g2, k) = couplings(&a.couplings)?;
        let l = a.length.ok_or_else(|| usage("--length is required"))?;
        let dev = ContinuousDevice::new(g1, g2, k, l)?;
        text.push_str(&format!(
            "device: continuous gamma1={} gamma2={} kappa={} length={}\n",
            num(g1),
            num(g2),
            num(k),
            num(l)
        ));
        text.push_str(&format!(
            "regime: {}\n",
            regime_label(classify_regime_with(&dev, &tol))
        ));
        transfer_matrix_with(&dev, &tol)?
    };

    let (n, gamma) = coherence_of(&m, &tol);
    text.push_str(&format!(
        "intensities: s1={} s2={} i1={} i2={}\n",
        num(n.s1),
        num(n.s2),
        num(n.i1),
        num(n.i2)
    ));
    text.push_str(&format!(
        "gamma: {}\n",
        gamma.map(num).unwrap_or_else(|| "undefined".into())
    ));

    let mut code = EXIT_OK;
    match extract_zou_with(&m, &tol) {
        Ok(r) => {
            let s = r.scheme;
            text.push_str(&format!(
                "zou: g1={} g2={} g4={} g5={} residual={}\n",
                num(s.g1()),
                num(s.g2()),
                num(s.g4()),
                num(s.g5()),
                num(r.residual)
            ));
            if let Ok(g) = geometry(&s) {
                text.push_str(&format!(
                    "uv: dot={} cross={} angle={} gamma_sq={}{}\n",
                    num(g.dot),
                    num(g.cross),
                    num(g.angle),
                    num(g.gamma_sq),
                    if g.degenerate { " degenerate" } else { "" }
                ));
            }
            let b = g_bound_check_with(&m, &s, &tol);
            text.push_str(&format!(
                "g_bound: n_signal={} sum_sinh_sq={} g_max={} violated={}\n",
                num(b.lhs),
                num(b.rhs),
                num(b.g_max),
                b.violated
            ));
        }
        Err(e) => {
            text.push_str(&format!("zou: failed ({e})\n"));
            code = EXIT_TOLERANCE;
        }
    }
    match extract_ou_with(&m, &tol) {
        Ok(r) => {
            let s = r.scheme;
            text.push_str(&format!(
                "ou: g1={} g2={} phi_s={} phi_i={} residual={} branch={}\n",
                num(s.g1()),
                num(s.g2()),
                num(s.phi_s()),
                num(s.phi_i()),
                num(r.residual),
                branch_label(r.branch)
            ));
            let g = ou_gamma_with(&s, &tol)
                .map(num)
                .unwrap_or_else(|_| "undefined".into());
            text.push_str(&format!("ou_gamma: {g}\n"));
        }
        Err(e) => {
            text.push_str(&format!("ou: failed ({e})\n"));
            code = EXIT_TOLERANCE;
        }
    }
    out.write_all(text.as_bytes())?;
    Ok(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("coupled-pdc").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn grid_ends_exactly_at_stop() {
        let g = grid(0.0, FRAC_PI_2, 100);
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[99], FRAC_PI_2);
        assert_eq!(grid(0.01, 0.02, 2), vec![0.01, 0.02]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SweepConfig::preset(Preset::Fig2);
        assert!(cfg.validate().is_ok());
        cfg.steps = 1;
        assert!(cfg.validate().is_err());
        cfg.steps = 10;
        cfg.stop = cfg.start;
        assert!(cfg.validate().is_err());
        let mut cfg = SweepConfig::preset(Preset::Fig7);
        cfg.columns = Some(vec!["n_s1".into()]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn two_step_sweep_has_two_rows() {
        let (code, out, _) = run_capture(&[
            "sweep-length",
            "--gamma1",
            "0.1",
            "--gamma2",
            "0.3",
            "--kappa",
            "3",
            "--from",
            "0.01",
            "--to",
            "0.02",
            "--steps",
            "2",
        ]);
        assert_eq!(code, EXIT_OK);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), LENGTH_COLUMNS.len());
        assert!(lines[1].starts_with("0.01,") && lines[2].starts_with("0.02,"));
        assert!(!out.contains('\r'));
    }

    #[test]
    fn undefined_gamma_leaves_an_empty_field() {
        let (code, out, _) = run_capture(&[
            "sweep-length",
            "--gamma1",
            "0.1",
            "--gamma2",
            "0",
            "--kappa",
            "0",
            "--from",
            "0",
            "--to",
            "1",
            "--steps",
            "2",
            "--columns",
            "L,gamma,gamma_defined",
        ]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out.lines().nth(1), Some("0.0,,0"));
    }

    #[test]
    fn usage_errors() {
        assert_eq!(
            run_capture(&["sweep-length", "--gamma1", "0.1"]).0,
            EXIT_USAGE
        );
        assert_eq!(
            run_capture(&["sweep-length", "--preset", "fig7"]).0,
            EXIT_USAGE
        );
        assert_eq!(
            run_capture(&["sweep-length", "--preset", "fig2", "--steps", "1"]).0,
            EXIT_USAGE
        );
        assert_eq!(run_capture(&["no-such-command"]).0, EXIT_USAGE);
        assert_eq!(
            run_capture(&["sweep-psi", "--preset", "fig7", "--columns", "bogus"]).0,
            EXIT_USAGE
        );
    }

    #[test]
    fn describe_columns_lists_every_column() {
        let (code, out, _) = run_capture(&["sweep-psi", "--describe-columns"]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out.lines().count(), PSI_COLUMNS.len());
        let (_, out, _) = run_capture(&["sweep-length", "--describe-columns"]);
        assert!(out.lines().any(|l| l.starts_with("uv_angle\t")));
    }

    #[test]
    fn oracle_refuses_above_threshold() {
        let (code, _, err) = run_capture(&[
            "oracle-check",
            "--gamma1",
            "1",
            "--gamma2",
            "1",
            "--kappa",
            "0.5",
        ]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("above threshold"));
    }

    #[test]
    fn oracle_at_zero_length() {
        let (code, out, _) = run_capture(&["oracle-check", "--preset", "fig2", "--from", "0"]);
        assert_eq!(code, EXIT_OK, "{out}");
        assert!(out.contains("0.0,0.0,,0.0"));
        assert!(out.contains("skipped"));
    }

    #[test]
    fn oracle_reports_leakage() {
        let (code, out, _) = run_capture(&[
            "oracle-check",
            "--gamma1",
            "0.5",
            "--gamma2",
            "0.5",
            "--kappa",
            "1.1",
            "--nmax",
            "1",
        ]);
        assert_eq!(code, EXIT_LEAKAGE, "{out}");
    }

    #[test]
    fn oracle_tolerance_breach() {
        let (code, _, _) =
            run_capture(&["oracle-check", "--preset", "fig2", "--oracle-tol", "1e-12"]);
        assert_eq!(code, EXIT_TOLERANCE);
    }

    #[test]
    fn decompose_dump() {
        let (code, out, _) = run_capture(&["decompose", "--preset", "fig2", "--length", "1"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("regime: below threshold"));
        assert!(out.contains("zou: g1="));
        assert!(out.contains("ou: g1="));
        let (code, out, _) = run_capture(&["decompose", "--preset", "fig7", "--psi", "0.5"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.starts_with("device: zou"));
    }
}
