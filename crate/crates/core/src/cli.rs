//! `perforated` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid configuration or I/O, 3 numerical
//! failure. Errors are written to stderr as a one-line JSON object.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::certify::{self, CertifyError};
use crate::geometry::{self, BoxSpec, DisorderModel, GeometryError, MaskDocument, ObstacleMask, ObstacleShape};
use crate::ids::{self, EnsembleSpec, FitKind, IdsError, Side};
use crate::operators::{self, BoundaryCondition, OperatorError};
use crate::spectra::{self, CountMethod, SpectraError};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Numerical(_) => "numerical",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<OperatorError> for CliError {
    fn from(e: OperatorError) -> Self {
        match e {
            OperatorError::NegativeAmplitude(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SpectraError> for CliError {
    fn from(e: SpectraError) -> Self {
        match e {
            SpectraError::NonFiniteEnergy(_) | SpectraError::InvalidCount { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<IdsError> for CliError {
    fn from(e: IdsError) -> Self {
        match e {
            IdsError::Geometry(g) => g.into(),
            IdsError::Operator(o) => o.into(),
            IdsError::Spectra(s) => s.into(),
            IdsError::Io(io) => io.into(),
            IdsError::DegenerateWindow(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<CertifyError> for CliError {
    fn from(e: CertifyError) -> Self {
        match e {
            CertifyError::InvalidEnergy(_) | CertifyError::LengthMismatch { .. } => CliError::Config(e.to_string()),
            CertifyError::Operator(o) => o.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "perforated", version, about = "Spectra and IDS of Laplacians on randomly perforated boxes")]
struct Cli {
    /// Worker threads for ensemble runs (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Omit the timestamp from metadata files.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample and rasterize an obstacle mask.
    Sample {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export an assembled operator in coordinate format.
    Assemble {
        #[command(flatten)]
        source: MaskSource,
        #[arg(long, default_value = "DD")]
        bc: String,
        /// Assemble the full-grid operator with this potential on obstacles.
        #[arg(long)]
        potential: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Eigenvalue counts and lowest eigenvalues.
    Spectrum {
        #[command(flatten)]
        source: MaskSource,
        #[arg(long, default_value = "DD")]
        bc: String,
        /// Energies to count at, comma separated.
        #[arg(long = "E", value_delimiter = ',')]
        energies: Vec<f64>,
        /// Number of lowest eigenvalues to report.
        #[arg(long, default_value_t = 0)]
        lowest: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ensemble IDS curve (CSV) with a metadata sidecar.
    Ids {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long)]
        emin: Option<f64>,
        #[arg(long)]
        emax: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// JSON file with default values; flags take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trial-family certificate for the mixed operator.
    Certify {
        #[command(flatten)]
        source: MaskSource,
        #[arg(long = "E")]
        energy: f64,
        /// Also check the sampled cosine family against the discrete operator.
        #[arg(long)]
        discrete: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exponent fit on an IDS curve.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, value_enum, default_value_t = SideArg::Dirichlet)]
        side: SideArg,
        #[arg(long)]
        emin: Option<f64>,
        #[arg(long)]
        emax: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// End-to-end one-dimensional run writing every artifact to a directory.
    Demo {
        #[arg(long, default_value = "demo-out")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 40)]
        realizations: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModelKind {
    Bernoulli,
    Poisson,
    Periodic,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MethodArg {
    Auto,
    Inertia,
    Dense,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum KindArg {
    Lifshitz,
    Vanhove,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SideArg {
    Dirichlet,
    Neumann,
}

#[derive(Args, Debug, Clone, Default)]
struct ModelArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "L")]
    side: Option<f64>,
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Side of the cubic obstacle.
    #[arg(long)]
    shape_side: Option<f64>,
    /// Cells per unit length.
    #[arg(long = "M")]
    cells_per_unit: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
struct MaskSource {
    /// Read the mask from a JSON file instead of sampling it.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

/// Fully resolved run parameters; written next to every ensemble output.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub d: Option<usize>,
    pub L: Option<f64>,
    pub model: Option<String>,
    pub p: Option<f64>,
    pub c: Option<f64>,
    pub beta: Option<f64>,
    pub shape_side: Option<f64>,
    pub M: Option<u32>,
    pub seed: Option<u64>,
    pub realizations: Option<usize>,
    pub emin: Option<f64>,
    pub emax: Option<f64>,
    pub points: Option<usize>,
}

impl RunConfig {
    /// Fields of `self` take precedence over `base`.
    fn over(self, base: RunConfig) -> RunConfig {
        RunConfig {
            d: self.d.or(base.d),
            L: self.L.or(base.L),
            model: self.model.or(base.model),
            p: self.p.or(base.p),
            c: self.c.or(base.c),
            beta: self.beta.or(base.beta),
            shape_side: self.shape_side.or(base.shape_side),
            M: self.M.or(base.M),
            seed: self.seed.or(base.seed),
            realizations: self.realizations.or(base.realizations),
            emin: self.emin.or(base.emin),
            emax: self.emax.or(base.emax),
            points: self.points.or(base.points),
        }
    }

    fn defaults() -> RunConfig {
        RunConfig {
            d: Some(1),
            L: Some(8.0),
            model: Some("bernoulli".into()),
            p: Some(0.5),
            c: Some(1.0),
            beta: Some(0.4),
            shape_side: Some(0.5),
            M: Some(10),
            seed: Some(0),
            realizations: Some(10),
            emin: Some(0.05),
            emax: Some(5.0),
            points: Some(20),
        }
    }
}

impl From<&ModelArgs> for RunConfig {
    fn from(a: &ModelArgs) -> Self {
        RunConfig {
            d: a.d,
            L: a.side,
            model: a.model.map(|m| {
                match m {
                    ModelKind::Bernoulli => "bernoulli",
                    ModelKind::Poisson => "poisson",
                    ModelKind::Periodic => "periodic",
                }
                .to_string()
            }),
            p: a.p,
            c: a.c,
            beta: a.beta,
            shape_side: a.shape_side,
            M: a.cells_per_unit,
            seed: a.seed,
            ..RunConfig::default()
        }
    }
}

struct Resolved {
    config: RunConfig,
    bx: BoxSpec,
    model: DisorderModel,
    cells_per_unit: u32,
    seed: u64,
}

fn resolve(config: RunConfig) -> Result<Resolved, CliError> {
    let config = config.over(RunConfig::defaults());
    let d = config.d.unwrap();
    let bx = BoxSpec::new(d, config.L.unwrap())?;
    let shape = || ObstacleShape::cube(d, config.shape_side.unwrap());
    let model = match config.model.as_deref().unwrap() {
        "bernoulli" => DisorderModel::bernoulli(config.p.unwrap(), shape()?)?,
        "poisson" => DisorderModel::poisson(config.c.unwrap(), shape()?)?,
        "periodic" => DisorderModel::periodic(config.beta.unwrap())?,
        other => return Err(CliError::Config(format!("unknown model {other:?}"))),
    };
    let cells_per_unit = config.M.unwrap();
    ObstacleMask::empty(bx, cells_per_unit)?;
    Ok(Resolved { seed: config.seed.unwrap(), config, bx, model, cells_per_unit })
}

fn load_mask(source: &MaskSource) -> Result<(ObstacleMask, Option<RunConfig>), CliError> {
    match &source.mask {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let doc: MaskDocument = serde_json::from_str(&text)?;
            Ok((ObstacleMask::from_document(&doc)?, None))
        }
        None => {
            let r = resolve(RunConfig::from(&source.model))?;
            let mask = geometry::sample_mask(&r.model, &r.bx, r.cells_per_unit, r.seed)?;
            Ok((mask, Some(r.config)))
        }
    }
}

fn parse_bc(label: &str) -> Result<BoundaryCondition, CliError> {
    BoundaryCondition::parse(label).ok_or_else(|| CliError::Config(format!("unknown boundary condition {label:?}")))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            Ok(stdout.flush()?)
        }
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn stamp(meta: &mut serde_json::Value, no_timestamp: bool) {
    if !no_timestamp {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        meta["timestamp_unix"] = json!(secs);
    }
}

fn mask_document(mask: &ObstacleMask, config: &Option<RunConfig>) -> Result<MaskDocument, CliError> {
    let mut doc = mask.to_document();
    if let Some(cfg) = config {
        doc.model = Some(resolve(cfg.clone())?.model.descriptor());
    }
    Ok(doc)
}

fn cmd_sample(model: &ModelArgs, out: Option<&Path>) -> Result<(), CliError> {
    let r = resolve(model.into())?;
    let mask = geometry::sample_mask(&r.model, &r.bx, r.cells_per_unit, r.seed)?;
    emit(out, &json_bytes(&mask_document(&mask, &Some(r.config))?)?)
}

fn cmd_assemble(source: &MaskSource, bc: &str, potential: Option<f64>, out: Option<&Path>) -> Result<(), CliError> {
    let bc = parse_bc(bc)?;
    let (mask, _) = load_mask(source)?;
    let op = match potential {
        Some(b) => operators::assemble_potential(&mask, b, bc.on_box)?.operator().clone(),
        None => operators::assemble(&mask, bc)?,
    };
    let mut bytes = Vec::new();
    op.write_coordinate(&mut bytes)?;
    emit(out, &bytes)
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct SpectrumDocument {
    d: usize,
    L: f64,
    M: u32,
    bc: String,
    dimension: usize,
    seed: Option<u64>,
    config: Option<RunConfig>,
    counts: Vec<spectra::CountResult>,
    eigenvalues: Vec<f64>,
    residuals: Vec<f64>,
}

fn cmd_spectrum(
    source: &MaskSource,
    bc: &str,
    energies: &[f64],
    lowest: usize,
    method: MethodArg,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let bcv = parse_bc(bc)?;
    let (mask, config) = load_mask(source)?;
    let op = operators::assemble(&mask, bcv)?;
    let method = match method {
        MethodArg::Auto => CountMethod::Auto,
        MethodArg::Inertia => CountMethod::Inertia,
        MethodArg::Dense => CountMethod::Dense,
    };
    let counts = if energies.is_empty() { Vec::new() } else { spectra::count_below_many_with(&op, energies, method)? };
    let pairs = if lowest > 0 { spectra::lowest_k(&op, lowest.min(op.dim()))? } else { Vec::new() };
    let doc = SpectrumDocument {
        d: mask.box_spec().dim(),
        L: mask.box_spec().side(),
        M: mask.cells_per_unit(),
        bc: bcv.label(),
        dimension: op.dim(),
        seed: mask.seed(),
        config,
        counts,
        eigenvalues: pairs.iter().map(|p| p.value).collect(),
        residuals: pairs.iter().map(|p| p.residual).collect(),
    };
    emit(out, &json_bytes(&doc)?)
}

struct IdsRun {
    config: RunConfig,
    curve: ids::IdsCurve,
    bracketing_violations: usize,
}

fn run_ids(config: RunConfig) -> Result<IdsRun, CliError> {
    let r = resolve(config)?;
    let c = &r.config;
    let spec = EnsembleSpec::new(c.realizations.unwrap(), r.seed, r.bx, r.cells_per_unit, r.model.clone())?;
    let energies = ids::geometric_grid(c.emin.unwrap(), c.emax.unwrap(), c.points.unwrap())?;
    let counts = ids::ensemble_counts(&spec, &energies)?;
    let bracketing_violations = counts
        .iter()
        .map(|rc| rc.dirichlet.iter().zip(&rc.neumann).filter(|(d, n)| d > n).count())
        .sum();
    Ok(IdsRun { config: r.config, curve: ids::curve_from_counts(&spec, &energies, &counts), bracketing_violations })
}

fn write_ids(run: &IdsRun, out: Option<&Path>, no_timestamp: bool) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    ids::write_curve_csv(&run.curve, &mut bytes)?;
    emit(out, &bytes)?;
    if let Some(path) = out {
        let mut meta = json!({
            "config": run.config,
            "model": run.curve.model,
            "bracketing_violations": run.bracketing_violations,
            "floor": run.curve.floor,
        });
        stamp(&mut meta, no_timestamp);
        emit(Some(&sidecar(path)), &json_bytes(&meta)?)?;
    }
    Ok(())
}

fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn cmd_certify(
    source: &MaskSource,
    energy: f64,
    discrete: bool,
    out: Option<&Path>,
    no_timestamp: bool,
) -> Result<(), CliError> {
    let (mask, config) = load_mask(source)?;
    let cert = certify::certify_obstacle(&mask, energy)?;
    emit(out, &json_bytes(&cert.to_document())?)?;
    if let Some(path) = out {
        let mut meta = json!({
            "config": config,
            "seed": mask.seed(),
            "measured_volume": mask.measured_volume(),
            "fraction": mask.fraction(),
        });
        if let Some(cfg) = &config {
            let r = resolve(cfg.clone())?;
            meta["model"] = json!(r.model.descriptor());
            meta["van_hove_condition"] = json!(certify::van_hove_condition(&r.model, r.bx.dim()));
        }
        if discrete {
            let d = certify::discrete_cosine_certificate(&mask, energy)?;
            let row = d.row_sum.expect("lemma checks carry row sums");
            let count = spectra::count_below(&operators::assemble(&mask, BoundaryCondition::ND)?, row.certified_energy)
                .map(|c| c.count)
                .ok();
            meta["discrete"] = json!({
                "n_count": d.n_count,
                "eps1": d.eps1,
                "eps2": d.eps2,
                "certified_energy": d.certified_energy,
                "row_sum_eps1": row.eps1,
                "row_sum_eps2": row.eps2,
                "row_sum_certified_energy": row.certified_energy,
                "operator_count_at_row_sum_energy": count,
            });
        }
        stamp(&mut meta, no_timestamp);
        emit(Some(&sidecar(path)), &json_bytes(&meta)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct FitDocument<'a> {
    #[serde(flatten)]
    fit: &'a ids::FitResult,
    model: &'a str,
    master_seed: u64,
    realizations: usize,
    L: f64,
    d: usize,
    M: u32,
}

fn fit_document<'a>(fit: &'a ids::FitResult, curve: &'a ids::IdsCurve) -> FitDocument<'a> {
    FitDocument {
        fit,
        model: &curve.model,
        master_seed: curve.master_seed,
        realizations: curve.realizations,
        L: curve.side,
        d: curve.dim,
        M: curve.cells_per_unit,
    }
}

fn cmd_fit(
    input: &Path,
    kind: KindArg,
    side: SideArg,
    emin: Option<f64>,
    emax: Option<f64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let file = fs::File::open(input).map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?;
    let curve = ids::read_curve_csv(file)?;
    let kind = match kind {
        KindArg::Lifshitz => FitKind::Lifshitz,
        KindArg::Vanhove => FitKind::VanHove,
    };
    let side = match side {
        SideArg::Dirichlet => Side::Dirichlet,
        SideArg::Neumann => Side::Neumann,
    };
    let window = match (emin, emax) {
        (None, None) => None,
        (lo, hi) => Some([
            lo.unwrap_or(curve.energies[0]),
            hi.unwrap_or(*curve.energies.last().expect("curves have rows")),
        ]),
    };
    let fit = ids::fit_exponent(&curve, kind, side, window)?;
    emit(out, &json_bytes(&fit_document(&fit, &curve))?)
}

fn cmd_demo(out_dir: &Path, realizations: usize, seed: u64, no_timestamp: bool) -> Result<(), CliError> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let config = RunConfig {
        d: Some(1),
        L: Some(64.0),
        model: Some("bernoulli".into()),
        p: Some(0.5),
        shape_side: Some(0.5),
        M: Some(8),
        seed: Some(seed),
        realizations: Some(realizations),
        emin: Some(0.05),
        emax: Some(5.0),
        points: Some(40),
        ..RunConfig::default()
    };
    let run = run_ids(config.clone())?;
    let curve_path = out_dir.join("curve.csv");
    write_ids(&run, Some(&curve_path), no_timestamp)?;

    let lifshitz = ids::fit_exponent(&run.curve, FitKind::Lifshitz, Side::Dirichlet, None)?;
    emit(Some(&out_dir.join("fit_lifshitz.json")), &json_bytes(&fit_document(&lifshitz, &run.curve))?)?;
    let vanhove = ids::fit_exponent(&run.curve, FitKind::VanHove, Side::Neumann, None);
    if let Ok(fit) = &vanhove {
        emit(Some(&out_dir.join("fit_vanhove.json")), &json_bytes(&fit_document(fit, &run.curve))?)?;
    }

    let r = resolve(config)?;
    let mask = geometry::sample_mask(&r.model, &r.bx, r.cells_per_unit, r.seed)?;
    emit(Some(&out_dir.join("mask.json")), &json_bytes(&mask_document(&mask, &Some(r.config.clone()))?)?)?;
    let cert = certify::certify_obstacle(&mask, 1.0)?;
    emit(Some(&out_dir.join("certificate.json")), &json_bytes(&cert.to_document())?)?;

    let summary = json!({
        "bracketing_violations": run.bracketing_violations,
        "lifshitz_exponent": lifshitz.exponent,
        "lifshitz_preference": lifshitz.model_preference,
        "vanhove_exponent": vanhove.as_ref().ok().map(|f| f.exponent),
        "vanhove_preference": vanhove.as_ref().ok().map(|f| f.model_preference),
        "certified_count": cert.certified_count,
        "certified_energy": cert.certified_energy,
        "out_dir": out_dir.display().to_string(),
    });
    emit(None, &json_bytes(&summary)?)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let no_ts = cli.no_timestamp;
    match cli.command {
        Command::Sample { model, out } => cmd_sample(&model, out.as_deref()),
        Command::Assemble { source, bc, potential, out } => cmd_assemble(&source, &bc, potential, out.as_deref()),
        Command::Spectrum { source, bc, energies, lowest, method, out } => {
            cmd_spectrum(&source, &bc, &energies, lowest, method, out.as_deref())
        }
        Command::Ids { model, realizations, emin, emax, points, config, out } => {
            let flags = RunConfig { realizations, emin, emax, points, ..RunConfig::from(&model) };
            let file = match &config {
                Some(path) => read_config(path)?,
                None => RunConfig::default(),
            };
            let run = run_ids(flags.over(file))?;
            write_ids(&run, out.as_deref(), no_ts)
        }
        Command::Certify { source, energy, discrete, out } => {
            cmd_certify(&source, energy, discrete, out.as_deref(), no_ts)
        }
        Command::Fit { input, kind, side, emin, emax, out } => cmd_fit(&input, kind, side, emin, emax, out.as_deref()),
        Command::Demo { out_dir, realizations, seed } => cmd_demo(&out_dir, realizations, seed, no_ts),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(pool) => pool.install(|| dispatch(cli)),
        Err(e) => Err(CliError::Config(format!("thread pool: {e}"))),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let line = json!({ "error": e.kind(), "message": e.message(), "exit_code": e.exit_code() });
            eprintln!("{line}");
            e.exit_code()
        }
    }
}
