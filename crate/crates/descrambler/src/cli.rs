//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use descrambler_core::analysis::{
    band_medians, block_average, det_sign, fourier_conjugate, row_autocorrelation, svd_inspect,
};
use descrambler_core::cayley::{DescramblingProblem, Functional};
use descrambler_core::deer::{generate_dataset, DeerGridConfig};
use descrambler_core::descramble::{
    apply_descrambler, assemble_diagonal_problem, assemble_problem, optimize, Init, OptimizerConfig, WiretapPosition,
    WiretapSpec,
};
use descrambler_core::netlab::{train, TrainConfig};
use descrambler_core::replica::{
    apply_fir, design_fir, fit_transform, replica_pipeline, response_grid, FilterKind, RegularizedTransform,
};
use descrambler_core::spectral::{build_second_derivative, signed_bin, spectrum2d, DiffKind};
use descrambler_core::{Activation, DenseMatrix};

use crate::error::{AppError, AppResult};
use crate::io::{
    dataset_meta, filter_report, load_dataset, load_filter, load_matrix, load_network, save_dataset, save_filter,
    save_matrix, save_network, save_vector, write_csv, Report,
};
use crate::svg::heatmap;

#[derive(Debug, Parser)]
#[command(name = "descrambler", version, about = "Descramble and interpret small fully connected networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic DEER training set.
    GenDeer(GenDeerArgs),
    /// Train a bias-free network on a dataset.
    Train(TrainArgs),
    /// Optimize a descrambler at a layer wiretap.
    Descramble(DescrambleArgs),
    /// Inspect weight matrices.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Render a matrix as an SVG heatmap.
    Heatmap(HeatmapArgs),
    /// Filter-and-transform replica of a two-layer DEER network.
    #[command(subcommand)]
    Replica(ReplicaCommand),
    /// gen-deer → train → descramble → analyze in one run.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenDeerArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 64)]
    pub time_points: usize,
    /// Microseconds.
    #[arg(long, default_value_t = 3.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 64)]
    pub dist_points: usize,
    /// Nanometers.
    #[arg(long, default_value_t = 2.0)]
    pub r_min: f64,
    #[arg(long, default_value_t = 6.0)]
    pub r_max: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_min: f64,
    #[arg(long, default_value_t = 0.02)]
    pub noise_max: f64,
    #[arg(long, default_value_t = 0.2)]
    pub depth_min: f64,
    #[arg(long, default_value_t = 0.5)]
    pub depth_max: f64,
    /// Per microsecond.
    #[arg(long, default_value_t = 0.0)]
    pub background_min: f64,
    #[arg(long, default_value_t = 0.3)]
    pub background_max: f64,
    #[arg(long, default_value_t = 3)]
    pub gaussians: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl GenDeerArgs {
    fn config(&self) -> DeerGridConfig {
        DeerGridConfig {
            time_points: self.time_points,
            t_max: self.t_max,
            dist_points: self.dist_points,
            r_min: self.r_min,
            r_max: self.r_max,
            noise_sigma_range: (self.noise_min, self.noise_max),
            modulation_depth_range: (self.depth_min, self.depth_max),
            background_rate_range: (self.background_min, self.background_max),
            n_gaussians_max: self.gaussians,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated `<width>:<activation>` per layer, input excluded.
    #[arg(long, default_value = "64:tansig,64:logsig")]
    pub layers: String,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub validation_fraction: f64,
    /// Output directory for `net.net`, layer files and the report.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PositionArg {
    Pre,
    Post,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FunctionalArg {
    Tikhonov,
    Mds,
    Mdns,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DiffKindArg {
    Fourier,
    Fd,
}

#[derive(Debug, Clone, Args)]
pub struct DescrambleArgs {
    #[arg(long)]
    pub net: PathBuf,
    /// Dataset directory; required for the tikhonov functional.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// 1-based layer index.
    #[arg(long, default_value_t = 1)]
    pub layer: usize,
    #[arg(long, value_enum, default_value_t = PositionArg::Pre)]
    pub position: PositionArg,
    #[arg(long, value_enum, default_value_t = FunctionalArg::Tikhonov)]
    pub functional: FunctionalArg,
    /// Link-smoothing weight for post-activation wiretaps.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = DiffKindArg::Fourier)]
    pub d_kind: DiffKindArg,
    /// Use only the first N traces of the dataset.
    #[arg(long)]
    pub traces: Option<usize>,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 10)]
    pub memory: usize,
    /// Start from a random small rotation with this seed instead of P = I.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.01)]
    pub sigma: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct InOut {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// `F₊·W·F₋` as re/im/magnitude matrices plus a band report.
    FourierConjugate(InOut),
    /// Centered 2D spectrum magnitude.
    Spectrum2d(InOut),
    /// `U.dmat`, `S.csv`, `V.dmat`.
    Svd(InOut),
    /// Row-averaged autocorrelation as CSV.
    Autocorr(InOut),
    BlockAverage {
        #[command(flatten)]
        io: InOut,
        #[arg(long)]
        block_cols: usize,
        #[arg(long)]
        sv_keep: usize,
    },
    /// Prints `+1`, `-1` or `0`.
    DetSign {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Prints `‖WᵀW − I‖_F`.
    Orthogonality {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct HeatmapArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Cell edge in pixels.
    #[arg(long, default_value_t = 8)]
    pub cell: u32,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FilterKindArg {
    Lowpass,
    Notch,
}

#[derive(Debug, Subcommand)]
pub enum ReplicaCommand {
    /// Design a windowed-sinc FIR filter.
    Design {
        #[arg(long, value_enum)]
        kind: FilterKindArg,
        #[arg(long)]
        order: usize,
        /// Passband edge, cycles per sample.
        #[arg(long)]
        pass: f64,
        /// Stopband edge, cycles per sample.
        #[arg(long)]
        stop: f64,
        /// Tap file; the design echo goes to `<out>.spec`.
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV of the magnitude response on the 1024-point grid.
        #[arg(long)]
        response: Option<PathBuf>,
    },
    /// Fit the regularized time-to-distance transform on filtered traces.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        lowpass: PathBuf,
        #[arg(long)]
        notch: PathBuf,
        /// Comma-separated λ values; defaults to 40 log-spaced points over
        /// [1e-8, 1e2]·tr(FFᵀ)/n_t.
        #[arg(long)]
        lambda_grid: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one dataset trace through the replica.
    Run {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        trace: usize,
        #[arg(long)]
        lowpass: PathBuf,
        #[arg(long)]
        notch: PathBuf,
        #[arg(long)]
        transform: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            if code != 0 {
                eprintln!("error kind=usage code=2 message={:?}", e.kind().to_string());
            }
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command) -> AppResult<()> {
    match cmd {
        Command::GenDeer(a) => gen_deer(&a).map(|_| ()),
        Command::Train(a) => cmd_train(&a),
        Command::Descramble(a) => cmd_descramble(&a).map(|_| ()),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Heatmap(a) => cmd_heatmap(&a),
        Command::Replica(r) => cmd_replica(r),
        Command::Pipeline(p) => cmd_pipeline(&p),
    }
}

fn mkdir(dir: &Path) -> AppResult<()> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn gen_deer(a: &GenDeerArgs) -> AppResult<Vec<PathBuf>> {
    let cfg = a.config();
    let data = generate_dataset(&cfg, a.n)?;
    save_dataset(&data, &dataset_meta(&cfg, a.n), &a.out)?;
    println!("dataset = {} traces = {} time_points = {} dist_points = {}", a.out.display(), a.n, cfg.time_points, cfg.dist_points);
    Ok(["time.dmat", "dist.dmat", "inputs.dmat", "targets.dmat", "meta"].iter().map(|f| a.out.join(f)).collect())
}

pub fn parse_topology(spec: &str) -> AppResult<Vec<(usize, Activation)>> {
    spec.split(',')
        .map(|part| {
            let (w, a) = part
                .trim()
                .split_once(':')
                .ok_or_else(|| AppError::Usage(format!("layer `{part}` is not `<width>:<activation>`")))?;
            let width = w.parse().map_err(|_| AppError::Usage(format!("bad layer width `{w}`")))?;
            Ok((width, a.parse::<Activation>()?))
        })
        .collect()
}

fn cmd_train(a: &TrainArgs) -> AppResult<()> {
    let data = load_dataset(&a.data)?;
    let topology = parse_topology(&a.layers)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        seed: a.seed,
        validation_fraction: a.validation_fraction,
        ..TrainConfig::default()
    };
    let (net, report) = train(&topology, &data, &cfg)?;
    mkdir(&a.out)?;
    save_network(&net, a.out.join("net.net"))?;
    let mut r = Report::new();
    r.add("data", a.data.display())
        .add("layers", &a.layers)
        .add("epochs", cfg.epochs)
        .add("batch_size", cfg.batch_size)
        .add("learning_rate", num(cfg.learning_rate))
        .add("adam_beta1", num(cfg.adam_beta1))
        .add("adam_beta2", num(cfg.adam_beta2))
        .add("adam_eps", num(cfg.adam_eps))
        .add("seed", cfg.seed)
        .add("validation_fraction", num(cfg.validation_fraction))
        .add("n_train", report.n_train)
        .add("n_validation", report.n_validation)
        .add("initial_train_loss", num(report.initial_train_loss))
        .add("initial_validation_loss", num(report.initial_validation_loss))
        .add("final_validation_loss", num(report.final_validation_loss()));
    r.save(a.out.join("report.txt"))?;
    let rows: Vec<Vec<String>> = std::iter::once((0, report.initial_train_loss, report.initial_validation_loss))
        .chain(report.train_loss.iter().zip(&report.validation_loss).enumerate().map(|(i, (t, v))| (i + 1, *t, *v)))
        .map(|(e, t, v)| vec![e.to_string(), num(t), num(v)])
        .collect();
    write_csv(a.out.join("losses.csv"), &["epoch", "train_loss", "validation_loss"], &rows)?;
    println!(
        "net = {} initial_validation_loss = {} final_validation_loss = {}",
        a.out.join("net.net").display(),
        num(report.initial_validation_loss),
        num(report.final_validation_loss())
    );
    Ok(())
}

fn cmd_descramble(a: &DescrambleArgs) -> AppResult<Report> {
    let net = load_network(&a.net)?;
    let position = match a.position {
        PositionArg::Pre => WiretapPosition::PreActivation,
        PositionArg::Post => WiretapPosition::PostActivation,
    };
    let spec = WiretapSpec { layer: a.layer, position, link_smoothing: a.alpha };
    spec.validate(&net)?;
    let kind = match a.d_kind {
        DiffKindArg::Fourier => DiffKind::FourierSpectral,
        DiffKindArg::Fd => DiffKind::FiniteDifference,
    };
    let prob: DescramblingProblem = match a.functional {
        FunctionalArg::Tikhonov => {
            let dir = a.data.as_ref().ok_or_else(|| AppError::Usage("tikhonov needs --data".into()))?;
            let data = load_dataset(dir)?;
            let x = match a.traces {
                Some(n) if n == 0 || n > data.inputs.cols() => {
                    return Err(AppError::Usage(format!("--traces {n} outside 1..={}", data.inputs.cols())))
                }
                Some(n) => data.inputs.col_range(0, n)?,
                None => data.inputs,
            };
            let dim = net.layers()[a.layer - 1].output_dim();
            let d = build_second_derivative(dim, 1.0, kind)?;
            assemble_problem(&net, &x, &spec, &d)?
        }
        FunctionalArg::Mds => assemble_diagonal_problem(&net, &spec, Functional::Mds)?,
        FunctionalArg::Mdns => assemble_diagonal_problem(&net, &spec, Functional::Mdns)?,
    };
    let init = match a.seed {
        Some(seed) => Init::RandomSmall { sigma: a.sigma, seed },
        None => Init::Zero,
    };
    let cfg = OptimizerConfig { memory: a.memory, grad_tol: a.tol, max_iters: a.max_iters, init, ..OptimizerConfig::default() };
    let res = optimize(&prob, &cfg)?;
    let view = apply_descrambler(&net, &spec, &res.p)?;
    mkdir(&a.out)?;
    save_matrix(res.p.matrix(), a.out.join("P.dmat"))?;
    if !res.q.as_slice().is_empty() {
        save_vector(res.q.as_slice(), a.out.join("q.dmat"))?;
    }
    save_matrix(&view.weights, a.out.join("descrambled.dmat"))?;
    if let Some(c) = &view.next_conjugate {
        save_matrix(c, a.out.join("next_conjugate.dmat"))?;
    }
    let rows: Vec<Vec<String>> = res.objective_trace.iter().enumerate().map(|(i, v)| vec![i.to_string(), num(*v)]).collect();
    write_csv(a.out.join("trace.csv"), &["iteration", "objective"], &rows)?;
    let mut r = Report::new();
    r.add("net", a.net.display())
        .add("layer", a.layer)
        .add("position", format!("{:?}", a.position).to_lowercase())
        .add("functional", prob.functional().name())
        .add("alpha", num(a.alpha))
        .add("d_kind", format!("{:?}", a.d_kind).to_lowercase())
        .add("init", match init {
            Init::Zero => "zero".to_string(),
            Init::RandomSmall { sigma, seed } => format!("random-small sigma={} seed={seed}", num(sigma)),
        })
        .add("iterations", res.iterations)
        .add("converged", res.converged)
        .add("termination", format!("{:?}", res.termination))
        .add("eta_initial", num(res.objective_trace[0]))
        .add("eta_final", num(res.final_value()))
        .add("det_sign", det_sign(res.p.matrix())?)
        .add("orthogonality_defect", num(res.p.matrix().orthogonality_defect()));
    r.save(a.out.join("report.txt"))?;
    print!("{}", r.render());
    Ok(r)
}

fn offdiag_max(m: &DenseMatrix) -> f64 {
    let mut best = 0.0f64;
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if i != j {
                best = best.max(m.get(i, j));
            }
        }
    }
    best
}

fn fourier_report(w: &DenseMatrix, out: &Path) -> AppResult<Report> {
    let fc = fourier_conjugate(w);
    mkdir(out)?;
    save_matrix(&fc.matrix.re, out.join("re.dmat"))?;
    save_matrix(&fc.matrix.im, out.join("im.dmat"))?;
    save_matrix(&fc.magnitude, out.join("magnitude.dmat"))?;
    let mag = &fc.magnitude;
    // mean magnitude per input-frequency bin (columns), signed bin order
    let mut rows = Vec::new();
    for j in 0..mag.cols() {
        let mean = (0..mag.rows()).map(|i| mag.get(i, j)).sum::<f64>() / mag.rows() as f64;
        rows.push((signed_bin(j, mag.cols()), mean));
    }
    rows.sort_by_key(|r| r.0);
    let csv: Vec<Vec<String>> = rows.iter().map(|(k, v)| vec![k.to_string(), num(*v)]).collect();
    write_csv(out.join("input_frequency_profile.csv"), &["bin", "mean_magnitude"], &csv)?;
    let mut r = Report::new();
    r.add("shape", format!("{}x{}", mag.rows(), mag.cols())).add("offdiag_max", num(offdiag_max(mag)));
    if let Ok(b) = band_medians(mag) {
        r.add("median_zero_frequency", num(b.zero))
            .add("median_passband", num(b.passband))
            .add("median_top_quarter", num(b.top_quarter));
    }
    r.save(out.join("report.txt"))?;
    Ok(r)
}

fn cmd_analyze(cmd: AnalyzeCommand) -> AppResult<()> {
    match cmd {
        AnalyzeCommand::FourierConjugate(io) => {
            let r = fourier_report(&load_matrix(&io.input)?, &io.out)?;
            print!("{}", r.render());
        }
        AnalyzeCommand::Spectrum2d(io) => save_matrix(&spectrum2d(&load_matrix(&io.input)?), &io.out)?,
        AnalyzeCommand::Svd(io) => {
            let svd = svd_inspect(&load_matrix(&io.input)?);
            mkdir(&io.out)?;
            save_matrix(&svd.u, io.out.join("U.dmat"))?;
            save_matrix(&svd.v, io.out.join("V.dmat"))?;
            let rows: Vec<Vec<String>> = svd.s.iter().enumerate().map(|(i, s)| vec![i.to_string(), num(*s)]).collect();
            write_csv(io.out.join("S.csv"), &["index", "singular_value"], &rows)?;
        }
        AnalyzeCommand::Autocorr(io) => {
            let ac = row_autocorrelation(&load_matrix(&io.input)?)?;
            let rows: Vec<Vec<String>> = ac.iter().enumerate().map(|(i, v)| vec![i.to_string(), num(*v)]).collect();
            write_csv(&io.out, &["lag", "autocorrelation"], &rows)?;
        }
        AnalyzeCommand::BlockAverage { io, block_cols, sv_keep } => {
            let out = block_average(&load_matrix(&io.input)?, block_cols, sv_keep)?;
            if out.dropped_cols > 0 {
                eprintln!("warning kind=partial-block dropped_cols={}", out.dropped_cols);
            }
            save_matrix(&out.matrix, &io.out)?;
        }
        AnalyzeCommand::DetSign { input } => {
            let s = det_sign(&load_matrix(&input)?)?;
            println!("{}", if s > 0 { "+1" } else if s < 0 { "-1" } else { "0" });
        }
        AnalyzeCommand::Orthogonality { input } => {
            let m = load_matrix(&input)?;
            if !m.is_square() {
                return Err(descrambler_core::Error::Shape(format!("{}x{} is not square", m.rows(), m.cols())).into());
            }
            println!("{}", num(m.orthogonality_defect()));
        }
    }
    Ok(())
}

fn cmd_heatmap(a: &HeatmapArgs) -> AppResult<()> {
    if a.cell == 0 {
        return Err(AppError::Usage("--cell must be positive".into()));
    }
    let m = load_matrix(&a.input)?;
    let svg = heatmap(&m, a.cell);
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        mkdir(dir)?;
    }
    fs::write(&a.out, svg).map_err(|e| AppError::io(&a.out, e))
}

fn filter_all(data: &DenseMatrix, lowpass: &descrambler_core::replica::FirFilter, notch: &descrambler_core::replica::FirFilter) -> AppResult<DenseMatrix> {
    let cols: Vec<Vec<f64>> = (0..data.cols())
        .map(|j| Ok(apply_fir(notch, &apply_fir(lowpass, &data.col(j))?)?))
        .collect::<AppResult<_>>()?;
    Ok(DenseMatrix::from_columns(&cols)?)
}

fn cmd_replica(cmd: ReplicaCommand) -> AppResult<()> {
    match cmd {
        ReplicaCommand::Design { kind, order, pass, stop, out, response } => {
            let kind = match kind {
                FilterKindArg::Lowpass => FilterKind::LowPass,
                FilterKindArg::Notch => FilterKind::Notch,
            };
            let f = design_fir(kind, order, pass, stop)?;
            save_filter(&f, &out)?;
            if let Some(path) = response {
                let rows: Vec<Vec<String>> = response_grid().iter().map(|&x| vec![num(x), num(f.response(x))]).collect();
                write_csv(path, &["frequency", "magnitude"], &rows)?;
            }
            print!("{}", filter_report(&f).render());
        }
        ReplicaCommand::Fit { data, lowpass, notch, lambda_grid, out } => {
            let ds = load_dataset(&data)?;
            let (lp, nf) = (load_filter(&lowpass)?, load_filter(&notch)?);
            let f = filter_all(&ds.inputs, &lp, &nf)?;
            let user_grid = lambda_grid
                .map(|g| {
                    g.split(',')
                        .map(|t| t.trim().parse::<f64>().map_err(|_| AppError::Usage(format!("bad lambda `{t}`"))))
                        .collect::<AppResult<Vec<f64>>>()
                })
                .transpose()?;
            let fit = fit_transform(&f, &ds.targets, user_grid.as_deref())?;
            mkdir(&out)?;
            save_matrix(&fit.t, out.join("T.dmat"))?;
            let rows: Vec<Vec<String>> = fit
                .lcurve_trace
                .iter()
                .map(|p| vec![num(p.lambda), num(p.residual_norm), num(p.solution_norm), num(p.normal_residual)])
                .collect();
            write_csv(out.join("lcurve.csv"), &["lambda", "residual_norm", "solution_norm", "normal_residual"], &rows)?;
            let grid: Vec<String> = fit.lcurve_trace.iter().map(|p| num(p.lambda)).collect();
            let mut r = Report::new();
            r.add("n_traces", ds.inputs.cols())
                .add("lambda_grid_source", if user_grid.is_some() { "user" } else { "default: 40 log-spaced over [1e-8, 1e2]*tr(FF^T)/n_t" })
                .add("lambda_grid", grid.join(","))
                .add("lambda", num(fit.lambda));
            r.save(out.join("report.txt"))?;
            print!("{}", r.render());
        }
        ReplicaCommand::Run { data, trace, lowpass, notch, transform, out } => {
            let ds = load_dataset(&data)?;
            if trace >= ds.inputs.cols() {
                return Err(AppError::Usage(format!("trace {trace} outside 0..{}", ds.inputs.cols())));
            }
            let tr = RegularizedTransform { t: load_matrix(&transform)?, lambda: f64::NAN, lcurve_trace: Vec::new() };
            let res = replica_pipeline(&ds.inputs.col(trace), &load_filter(&lowpass)?, &load_filter(&notch)?, &tr)?;
            if res.distribution.len() != ds.dist_grid.len() {
                return Err(AppError::Usage(format!(
                    "transform yields {} points, dataset distance grid has {}",
                    res.distribution.len(),
                    ds.dist_grid.len()
                )));
            }
            let rows: Vec<Vec<String>> =
                ds.dist_grid.iter().zip(&res.distribution).map(|(r, p)| vec![num(*r), num(*p)]).collect();
            write_csv(&out, &["r_nm", "p"], &rows)?;
            println!("degenerate = {}", res.degenerate);
        }
    }
    Ok(())
}

fn cmd_pipeline(a: &PipelineArgs) -> AppResult<()> {
    mkdir(&a.out)?;
    let mut manifest = Vec::new();
    let data_dir = a.out.join("data");
    let gen = GenDeerArgs {
        n: a.n,
        time_points: a.points,
        t_max: 3.0,
        dist_points: a.points,
        r_min: 2.0,
        r_max: 6.0,
        noise_min: 0.0,
        noise_max: 0.02,
        depth_min: 0.2,
        depth_max: 0.5,
        background_min: 0.0,
        background_max: 0.3,
        gaussians: 3,
        seed: a.seed,
        out: data_dir.clone(),
    };
    manifest.extend(gen_deer(&gen)?);
    let net_dir = a.out.join("net");
    cmd_train(&TrainArgs {
        data: data_dir.clone(),
        layers: format!("{p}:tansig,{p}:logsig", p = a.points),
        epochs: a.epochs,
        batch_size: 32,
        lr: 1e-3,
        seed: a.seed,
        validation_fraction: 0.1,
        out: net_dir.clone(),
    })?;
    manifest.extend(["net.net", "net.layer1.dmat", "net.layer2.dmat", "report.txt", "losses.csv"].iter().map(|f| net_dir.join(f)));
    let desc_dir = a.out.join("descramble");
    cmd_descramble(&DescrambleArgs {
        net: net_dir.join("net.net"),
        data: Some(data_dir),
        layer: 1,
        position: PositionArg::Pre,
        functional: FunctionalArg::Tikhonov,
        alpha: 0.0,
        d_kind: DiffKindArg::Fourier,
        traces: None,
        max_iters: 5000,
        tol: 1e-8,
        memory: 10,
        seed: None,
        sigma: 0.01,
        out: desc_dir.clone(),
    })?;
    manifest.extend(["P.dmat", "q.dmat", "descrambled.dmat", "trace.csv", "report.txt"].iter().map(|f| desc_dir.join(f)));
    let analysis_dir = a.out.join("analysis");
    let raw = load_network(net_dir.join("net.net"))?.layers()[0].weights.clone();
    let descrambled = load_matrix(desc_dir.join("descrambled.dmat"))?;
    let fc_dir = analysis_dir.join("fourier_conjugate");
    let r = fourier_report(&descrambled, &fc_dir)?;
    manifest.extend(
        ["re.dmat", "im.dmat", "magnitude.dmat", "input_frequency_profile.csv", "report.txt"].iter().map(|f| fc_dir.join(f)),
    );
    for (name, m) in [
        ("raw_w1.svg", raw),
        ("descrambled_w1.svg", descrambled.clone()),
        ("fourier_conjugate.svg", load_matrix(fc_dir.join("magnitude.dmat"))?),
        ("spectrum2d.svg", spectrum2d(&descrambled)),
    ] {
        let path = analysis_dir.join(name);
        fs::write(&path, heatmap(&m, 8)).map_err(|e| AppError::io(&path, e))?;
        manifest.push(path);
    }
    let listing: String = manifest.iter().map(|p| format!("{}\n", p.display())).collect();
    let mpath = a.out.join("manifest.txt");
    fs::write(&mpath, listing).map_err(|e| AppError::io(&mpath, e))?;
    print!("{}", r.render());
    println!("manifest = {}", mpath.display());
    Ok(())
}
