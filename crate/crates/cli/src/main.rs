use std::f64::consts::TAU;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qiup_core::circuit::{compile, fig1_plan, Bindings, CircuitPlan, ExecOptions};
use qiup_core::elements::BsConvention;
use qiup_core::estimation::{
    calibrate, fit_calibrated, fit_with, simulate_measurement, ClosedFormModel, CountModel,
    EngineModel, FitOptions, Weighting,
};
use qiup_core::observables::{counts, fringe_scan, visibility, FringeScan, Sinusoid};
use qiup_core::reference;
use qiup_core::table::{read_measured_csv, write_counts_csv};

const EXIT_VALIDATION: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

/// Polarization-resolved induced-coherence interferometer simulator.
#[derive(Parser)]
#[command(name = "qiup", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a circuit file; exit 0 iff it has no errors.
    Check { file: PathBuf },
    /// Evaluate H/V counts at the detection path.
    Run {
        #[command(flatten)]
        circuit: CircuitArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sweep one parameter and write a scan table.
    Scan {
        #[command(flatten)]
        circuit: CircuitArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Parameter to sweep.
        #[arg(long, default_value = "phi")]
        sweep: String,
        /// First grid value (radians, or degrees with a `deg` suffix).
        #[arg(long, default_value = "0", value_parser = parse_angle)]
        from: f64,
        /// End of the half-open range [from, to). Defaults to 2π.
        #[arg(long, value_parser = parse_angle)]
        to: Option<f64>,
        /// Number of grid points (at least 2).
        #[arg(long, default_value_t = 64)]
        points: usize,
        /// Replace expectation values by Poisson counts for this many shots.
        #[arg(long)]
        shots: Option<u64>,
        /// Seed for the shot-noise generator.
        #[arg(long, env = "QIUP_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Fit (beta1, gamma) to a count or scan table; exit 0 iff converged.
    Fit {
        data: PathBuf,
        /// Table recorded at gamma = 0; its vertical maximum sets the phi origin.
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Count model to fit against.
        #[arg(long, value_enum, default_value_t = ModelKind::Closed)]
        model: ModelKind,
        #[arg(long, value_enum, default_value_t = WeightingArg::Equal)]
        weighting: WeightingArg,
        /// Merge rule for `--model engine`.
        #[arg(long)]
        no_merge: bool,
        /// Beamsplitter convention for `--model engine`.
        #[arg(long, value_enum, default_value_t = ConventionArg::Symmetric)]
        bs_convention: ConventionArg,
    },
    /// Compare the fig1 engine against the closed-form counts and visibility.
    Verify {
        /// Points per grid axis. Defaults to 11 beta1 x 8 gamma x 64 phi.
        #[arg(long)]
        grid_points: Option<usize>,
        /// Absolute tolerance for every reported deviation.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        #[arg(long, value_enum, default_value_t = ConventionArg::Symmetric)]
        bs_convention: ConventionArg,
    },
}

#[derive(Args)]
struct CircuitArgs {
    /// Circuit file. Omit when using --preset.
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    file: Option<PathBuf>,
    /// Built-in circuit.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Parameter binding `name=value`; radians, or degrees with a `deg`
    /// suffix. Repeatable. For the fig1 preset an unbound alphaN defaults to
    /// sqrt(1 - betaN^2).
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_binding)]
    params: Vec<(String, f64)>,
    /// Skip merge steps so source tags never become indistinguishable.
    #[arg(long)]
    no_merge: bool,
    #[arg(long, value_enum, default_value_t = ConventionArg::Symmetric)]
    bs_convention: ConventionArg,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the table here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Pretty)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Fig1,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Pretty,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Symmetric,
    Hadamard,
}

impl From<ConventionArg> for BsConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Symmetric => BsConvention::Symmetric,
            ConventionArg::Hadamard => BsConvention::Hadamard,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ModelKind {
    /// Closed-form counts for beta2 = 1, theta = 45 deg.
    Closed,
    /// The fig1 preset run through the engine, same regime.
    Engine,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Equal,
    InverseVariance,
}

fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let (num, deg) = match t.strip_suffix("deg") {
        Some(n) => (n.trim(), true),
        None => (t, false),
    };
    let x: f64 = num.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !x.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(if deg { x.to_radians() } else { x })
}

fn parse_binding(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let name = name.trim().trim_start_matches('$');
    if name.is_empty() {
        return Err(format!("empty parameter name in `{s}`"));
    }
    Ok((name.to_string(), parse_angle(value)?))
}

/// Error carrying the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { file } => cmd_check(&file),
        Command::Run { circuit, output } => cmd_run(&circuit, &output),
        Command::Scan {
            circuit,
            output,
            sweep,
            from,
            to,
            points,
            shots,
            seed,
        } => cmd_scan(
            &circuit,
            &output,
            &sweep,
            from,
            to.unwrap_or(TAU),
            points,
            shots,
            seed,
        ),
        Command::Fit {
            data,
            calibration,
            model,
            weighting,
            no_merge,
            bs_convention,
        } => cmd_fit(
            &data,
            calibration.as_deref(),
            model,
            weighting,
            no_merge,
            bs_convention,
        ),
        Command::Verify {
            grid_points,
            tolerance,
            bs_convention,
        } => cmd_verify(grid_points, tolerance, bs_convention),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("qiup: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| fail(EXIT_IO, format!("{}: {e}", p.display()))),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| fail(EXIT_IO, e.to_string())),
    }
}

fn cmd_check(file: &Path) -> CmdResult {
    let text = read(file)?;
    let name = file.display();
    let (diags, errors, warnings) = match compile(&text) {
        Ok((_, w)) => {
            let n = w.warning_count();
            (w, 0, n)
        }
        Err(d) => {
            let (e, w) = (d.error_count(), d.warning_count());
            (d, e, w)
        }
    };
    for d in diags.iter() {
        println!("{name}:{d}");
    }
    println!("{errors} errors, {warnings} warnings");
    Ok(if errors == 0 { 0 } else { EXIT_VALIDATION })
}

struct Loaded {
    plan: CircuitPlan,
    bindings: Bindings,
    opts: ExecOptions,
}

fn load(args: &CircuitArgs) -> Result<Loaded, Failure> {
    let mut bindings: Bindings = args.params.iter().cloned().collect();
    let plan = match (&args.file, args.preset) {
        (_, Some(Preset::Fig1)) => {
            for k in ["1", "2"] {
                let (a, b) = (format!("alpha{k}"), format!("beta{k}"));
                if let (None, Some(&beta)) = (bindings.get(&a), bindings.get(&b)) {
                    bindings.insert(a, (1.0 - beta * beta).max(0.0).sqrt());
                }
            }
            fig1_plan()
        }
        (Some(file), None) => {
            let text = read(file)?;
            match compile(&text) {
                Ok((plan, warnings)) => {
                    for w in warnings.iter() {
                        eprintln!("{}:{w}", file.display());
                    }
                    plan
                }
                Err(d) => {
                    for e in d.iter() {
                        eprintln!("{}:{e}", file.display());
                    }
                    return Err(fail(EXIT_VALIDATION, "circuit has errors"));
                }
            }
        }
        (None, None) => return Err(fail(EXIT_VALIDATION, "no circuit given")),
    };
    let opts = ExecOptions {
        bs_convention: args.bs_convention.into(),
        merge: !args.no_merge,
        ..ExecOptions::default()
    };
    Ok(Loaded {
        plan,
        bindings,
        opts,
    })
}

fn diag_failure(d: qiup_core::circuit::Diagnostics) -> Failure {
    let msgs: Vec<String> = d
        .iter()
        .map(|e| format!("error[{}]: {}", e.code, e.message))
        .collect();
    fail(EXIT_VALIDATION, msgs.join("\nqiup: "))
}

fn cmd_run(args: &CircuitArgs, output: &OutputArgs) -> CmdResult {
    let l = load(args)?;
    let bound = l.plan.bind(&l.bindings).map_err(diag_failure)?;
    let state = bound
        .execute(&l.opts)
        .map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?;
    let c = counts(&state, &l.plan.detect_path, l.plan.detect_band);
    let text = match output.format {
        Format::Pretty => format!("n_h={:.6} n_v={:.6}\n", c.n_h, c.n_v),
        Format::Csv => format!("index,n_h,n_v\n0,{:.16e},{:.16e}\n", c.n_h, c.n_v),
    };
    emit(&output.out, &text)?;
    Ok(0)
}

fn pretty_scan(scan: &FringeScan) -> String {
    let mut out = format!("{:>12} {:>12} {:>12}\n", scan.parameter, "n_h", "n_v");
    for (x, r) in scan.grid.iter().zip(&scan.records) {
        out.push_str(&format!("{x:>12.6} {:>12.6} {:>12.6}\n", r.n_h, r.n_v));
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_scan(
    args: &CircuitArgs,
    output: &OutputArgs,
    sweep: &str,
    from: f64,
    to: f64,
    points: usize,
    shots: Option<u64>,
    seed: u64,
) -> CmdResult {
    if points < 2 {
        return Err(fail(EXIT_VALIDATION, "--points must be at least 2"));
    }
    let l = load(args)?;
    let grid: Vec<f64> = (0..points)
        .map(|k| from + (to - from) * k as f64 / points as f64)
        .collect();
    let scan = fringe_scan(&l.plan, &l.bindings, sweep, &grid, &l.opts)
        .map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?;

    let text = match shots {
        Some(n) => {
            let noisy = simulate_measurement(&scan, n, seed)
                .map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?;
            write_counts_csv(&noisy)
        }
        None if output.format == Format::Pretty => pretty_scan(&scan),
        None => scan.to_csv(),
    };
    emit(&output.out, &text)?;

    if sweep == "phi" {
        if let Some(v) = scan.vertical_visibility() {
            let line = format!("visibility={:.6} phi_at_max={:.6}", v.value, v.phi_at_max);
            // Keep standard output a clean table when it carries one.
            if output.out.is_some() {
                println!("{line}");
            } else {
                eprintln!("{line}");
            }
        }
    }
    Ok(0)
}

fn cmd_fit(
    data: &Path,
    calibration: Option<&Path>,
    model: ModelKind,
    weighting: WeightingArg,
    no_merge: bool,
    bs_convention: ConventionArg,
) -> CmdResult {
    let load_table = |p: &Path| {
        read_measured_csv(&read(p)?).map_err(|e| fail(EXIT_IO, format!("{}:{e}", p.display())))
    };
    let scan = load_table(data)?;
    let opts = FitOptions {
        weighting: match weighting {
            WeightingArg::Equal => Weighting::Equal,
            WeightingArg::InverseVariance => Weighting::InverseVariance,
        },
        ..FitOptions::default()
    };
    let engine = EngineModel {
        opts: ExecOptions {
            bs_convention: bs_convention.into(),
            merge: !no_merge,
            ..ExecOptions::default()
        },
    };
    let m: &dyn CountModel = match model {
        ModelKind::Closed => &ClosedFormModel,
        ModelKind::Engine => &engine,
    };
    let r = match calibration {
        Some(p) => {
            let rec =
                calibrate(&load_table(p)?).map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?;
            println!(
                "calibration: phi_at_max_v={:.6} visibility={:.6}",
                rec.phi_at_max_v,
                rec.visibility()
            );
            fit_calibrated(&scan, &rec, m, &opts)
        }
        None => fit_with(&scan, m, &opts),
    }
    .map_err(|e| fail(EXIT_VALIDATION, e.to_string()))?;
    println!("{r}");
    Ok(if r.converged { 0 } else { EXIT_VALIDATION })
}

fn axis(n: usize, default: usize) -> usize {
    if n == 0 {
        default
    } else {
        n
    }
}

fn cmd_verify(grid_points: Option<usize>, tol: f64, conv: ConventionArg) -> CmdResult {
    let n = grid_points.unwrap_or(0);
    let (nb, ng, np) = (axis(n, 11), axis(n, 8), axis(n, 64));
    if nb < 2 || np < 3 {
        return Err(fail(EXIT_VALIDATION, "--grid-points must be at least 3"));
    }
    let betas: Vec<f64> = (0..nb).map(|k| k as f64 / (nb - 1) as f64).collect();
    let gammas: Vec<f64> = (0..ng).map(|k| TAU * k as f64 / ng as f64).collect();
    let phis: Vec<f64> = (0..np).map(|k| TAU * k as f64 / np as f64).collect();
    let model = EngineModel {
        opts: ExecOptions {
            bs_convention: conv.into(),
            ..ExecOptions::default()
        },
    };
    let mut dh: f64 = 0.0;
    let mut dv: f64 = 0.0;
    let mut dvis: f64 = 0.0;
    let mut dvis_grid: f64 = 0.0;
    let engine_err =
        |e: qiup_core::estimation::EstimationError| fail(EXIT_VALIDATION, e.to_string());
    for &b in &betas {
        for &g in &gammas {
            let mut nv = Vec::with_capacity(np);
            for &p in &phis {
                let c = model.predict(b, g, p).map_err(engine_err)?;
                let h = reference::nh_closed(b, g, p).expect("beta in range");
                let v = reference::nv_closed(b, g, p).expect("beta in range");
                dh = dh.max((c.n_h - h).abs());
                dv = dv.max((c.n_v - v).abs());
                nv.push(c.n_v);
            }
            if g == 0.0 {
                let want = reference::visibility_closed(b).expect("beta in range");
                if let Some(s) = Sinusoid::fit(&phis, &nv) {
                    dvis = dvis.max((s.visibility() - want).abs());
                }
                if let Some(v) = visibility(&phis, &nv) {
                    dvis_grid = dvis_grid.max((v.value - want).abs());
                }
            }
        }
    }
    println!("grid: {nb} beta1 x {ng} gamma x {np} phi, tolerance {tol:e}");
    println!("max|dN_H|={dh:.6e}");
    println!("max|dN_V|={dv:.6e}");
    println!("max|dV|={dvis:.6e} (sinusoid-refined; grid extrema {dvis_grid:.6e})");
    let ok = dh < tol && dv < tol && dvis < tol;
    println!("{}", if ok { "verify: ok" } else { "verify: MISMATCH" });
    Ok(if ok { 0 } else { EXIT_MISMATCH })
}
