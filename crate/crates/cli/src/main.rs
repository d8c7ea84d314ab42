use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use slsim_core::config::{ConfigFile, LatticeConfig};
use slsim_core::dynamics::{absorption_spectrum, superradiance_contrast};
use slsim_core::lattice::BrillouinZone;
use slsim_core::schema::{self, DiracFile};
use slsim_core::sweep::{self, linspace, parse_observables, SweepOptions};
use slsim_core::topology::{
    band_polarization, chern_bessel_default, chern_dp_counting, chern_fhs_with, chern_small_f, find_dirac_points_with,
    BandSource, DEFAULT_DIRAC_GRID, DEFAULT_FHS_GRID, MIN_GAP_GRID,
};
use slsim_core::SlError;

/// Floquet-modulated honeycomb superradiance lattice simulator
#[derive(Parser, Debug)]
#[command(name = "slsim", version, propagate_version = true)]
struct Cli {
    /// worker threads (default: all cores, or SLSIM_JOBS)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// JSON config file
    #[arg(long)]
    config: PathBuf,
    /// override omega_mhz (sweep-mod: comma-separated list of values)
    #[arg(long, value_delimiter = ',')]
    omega: Vec<f64>,
    /// override f
    #[arg(long)]
    f: Option<f64>,
    /// override delta_mhz
    #[arg(long)]
    delta: Option<f64>,
    /// override phi, three comma-separated values
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    phi: Option<Vec<f64>>,
    /// read --phi in degrees instead of radians
    #[arg(long)]
    degrees: bool,
    /// override gamma_b_mhz
    #[arg(long)]
    gamma_b: Option<f64>,
    /// override gamma_a_mhz
    #[arg(long)]
    gamma_a: Option<f64>,
    /// override n_max
    #[arg(long)]
    n_max: Option<usize>,
    /// override n_shells
    #[arg(long)]
    n_shells: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct SweepArgs {
    /// comma-separated subset of chern_fhs,chern_analytic_sign,min_gap,eta
    #[arg(long, default_value = "chern_fhs,chern_analytic_sign,min_gap,eta")]
    observables: String,
    /// FHS plaquette grid
    #[arg(long, default_value_t = DEFAULT_FHS_GRID)]
    fhs_grid: usize,
    /// evaluate chern_fhs only on every n-th row and column
    #[arg(long, default_value_t = 2)]
    fhs_stride: usize,
    /// gap scan grid
    #[arg(long, default_value_t = MIN_GAP_GRID)]
    gap_grid: usize,
    /// probe detuning for eta (MHz)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    delta_p: f64,
    /// atomic velocity for eta
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    velocity: f64,
    /// output JSON
    #[arg(long)]
    out: PathBuf,
    /// also write the cells as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl SweepArgs {
    fn options(&self) -> Result<SweepOptions, Failure> {
        Ok(SweepOptions {
            observables: parse_observables(&self.observables).map_err(Failure::Usage)?,
            fhs_grid: self.fhs_grid,
            fhs_stride: self.fhs_stride,
            gap_grid: self.gap_grid,
            delta_p_mhz: self.delta_p,
            velocity: self.velocity,
        })
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Fhs,
    Dp,
    SmallF,
    Bessel,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Band energies and sublattice polarization along a path
    Bands {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// high-symmetry labels (G, K, Kp, M)
        #[arg(long, value_delimiter = ',', default_value = "K,G,M,Kp")]
        path: Vec<String>,
        /// points per path segment
        #[arg(long, default_value_t = 100)]
        points: usize,
        /// output CSV (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate Dirac points of the effective Hamiltonian
    Dirac {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// seed grid per axis
        #[arg(long, default_value_t = DEFAULT_DIRAC_GRID)]
        grid: usize,
        /// output JSON (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Chern number of the lower band
    Chern {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value = "fhs")]
        method: Method,
        /// FHS plaquette grid
        #[arg(long, default_value_t = DEFAULT_FHS_GRID)]
        grid: usize,
        /// FHS on the exact Floquet central band instead of the effective model
        #[arg(long)]
        exact: bool,
    },
    /// Superradiance contrast of the driven steady state
    Eta {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// probe detuning (MHz)
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        delta_p: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        velocity: f64,
    },
    /// Probe absorption spectrum
    Spectrum {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, allow_negative_numbers = true)]
        delta_min: f64,
        #[arg(long, allow_negative_numbers = true)]
        delta_max: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        velocity: f64,
        /// output CSV (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Phase diagram over (phi2, phi3) at the configured phi1
    SweepPhase {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// grid points per phase axis
        #[arg(long, default_value_t = 24)]
        grid: usize,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Phase diagram over (omega, f) at the configured phases
    SweepMod {
        /// omega values come from --omega LIST
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        f_min: f64,
        #[arg(long)]
        f_max: f64,
        #[arg(long)]
        f_steps: usize,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Absorption map over (f, probe detuning)
    SpectrumVsF {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        f_min: f64,
        #[arg(long)]
        f_max: f64,
        #[arg(long)]
        f_steps: usize,
        #[arg(long, allow_negative_numbers = true)]
        delta_min: f64,
        #[arg(long, allow_negative_numbers = true)]
        delta_max: f64,
        #[arg(long)]
        delta_steps: usize,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        velocity: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate output files written by this tool
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

enum Failure {
    Usage(SlError),
    Numerical(SlError),
}

impl From<SlError> for Failure {
    fn from(e: SlError) -> Self {
        if e.is_config_error() {
            Failure::Usage(e)
        } else {
            Failure::Numerical(e)
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Numerical(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Numerical(e.into())
    }
}

fn load_config(a: &ConfigArgs) -> Result<LatticeConfig, Failure> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| Failure::Usage(SlError::Configuration(format!("{}: {e}", a.config.display()))))?;
    let mut file = ConfigFile::parse(&text).map_err(Failure::Usage)?;
    match a.omega.as_slice() {
        [] => {}
        [v] => file.omega_mhz = *v,
        _ => {
            return Err(Failure::Usage(SlError::InvalidParameter(
                "--omega takes a single value here".into(),
            )))
        }
    }
    if let Some(v) = a.f {
        file.f = v;
    }
    if let Some(v) = a.delta {
        file.delta_mhz = v;
    }
    if let Some(p) = &a.phi {
        if p.len() != 3 {
            return Err(Failure::Usage(SlError::InvalidParameter("--phi needs exactly three values".into())));
        }
        let scale = if a.degrees { std::f64::consts::PI / 180.0 } else { 1.0 };
        file.phi = [p[0] * scale, p[1] * scale, p[2] * scale];
    }
    if let Some(v) = a.gamma_b {
        file.gamma_b_mhz = v;
    }
    if let Some(v) = a.gamma_a {
        file.gamma_a_mhz = v;
    }
    if let Some(n) = a.n_max {
        file.n_max = slsim_core::config::NMaxFile::Fixed(n);
    }
    if let Some(n) = a.n_shells {
        file.n_shells = n;
    }
    file.into_config().map_err(Failure::Usage)
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn signed(v: i32) -> String {
    if v > 0 {
        format!("+{v}")
    } else {
        v.to_string()
    }
}

fn fixed6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        s[1..].to_string()
    } else {
        s
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Bands { cfg, path, points, out } => {
            let c = load_config(&cfg)?;
            let labels: Vec<&str> = path.iter().map(String::as_str).collect();
            let pts = BrillouinZone::new(&c.geometry).path(&labels, points).map_err(Failure::Usage)?;
            let samples = band_polarization(&c, &pts)?;
            schema::write_bands_csv(output(out.as_deref())?, &samples)?;
        }
        Command::Dirac { cfg, grid, out } => {
            let c = load_config(&cfg)?;
            let search = find_dirac_points_with(&c, grid)?;
            for u in &search.unresolved {
                eprintln!(
                    "warning: unresolved candidate near ({:.4}, {:.4}): {}",
                    u.position.x, u.position.y, u.reason
                );
            }
            eprintln!("{} Dirac points, total chirality {}", search.points.len(), search.total_chirality());
            let doc = DiracFile::new(c.to_file_format(), search);
            let mut w = output(out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
            w.flush()?;
        }
        Command::Chern { cfg, method, grid, exact } => {
            let c = load_config(&cfg)?;
            let r = match method {
                Method::SmallF => {
                    println!("{}", signed(chern_small_f(c.phi) as i32));
                    return Ok(());
                }
                Method::Bessel => {
                    println!("{}", signed(chern_bessel_default(c.phi, c.f)? as i32));
                    return Ok(());
                }
                Method::Dp => chern_dp_counting(&c)?,
                Method::Fhs => {
                    let source = if exact { BandSource::ExactFloquet } else { BandSource::Effective };
                    chern_fhs_with(&c, grid, source)?
                }
            };
            println!("{}", signed(r.value));
            eprintln!("reliable: {}, min gap {:.6} MHz", r.reliable, r.min_gap);
            if let Some(note) = r.note {
                eprintln!("note: {note}");
            }
        }
        Command::Eta { cfg, delta_p, velocity } => {
            let c = load_config(&cfg)?;
            match superradiance_contrast(&c, delta_p, velocity)? {
                Some(eta) => println!("{}", fixed6(eta)),
                None => {
                    return Err(Failure::Numerical(SlError::Solver(
                        "both emission channels are dark; eta undefined".into(),
                    )))
                }
            }
        }
        Command::Spectrum { cfg, delta_min, delta_max, steps, velocity, out } => {
            let c = load_config(&cfg)?;
            let grid = linspace(delta_min, delta_max, steps);
            let a = absorption_spectrum(&c, &grid, velocity)?;
            schema::write_spectrum_csv(output(out.as_deref())?, &grid, &a)?;
        }
        Command::SweepPhase { cfg, grid, sweep: s } => {
            let c = load_config(&cfg)?;
            let g = sweep::sweep_phase(&c, grid, &s.options()?)?;
            report_unreliable(&g);
            g.write_json(&s.out)?;
            if let Some(p) = &s.csv {
                g.write_csv(p)?;
            }
        }
        Command::SweepMod { mut cfg, f_min, f_max, f_steps, sweep: s } => {
            let omega_values = std::mem::take(&mut cfg.omega);
            if omega_values.is_empty() {
                return Err(Failure::Usage(SlError::InvalidParameter("sweep-mod needs --omega LIST".into())));
            }
            let c = load_config(&cfg)?;
            let fs = linspace(f_min, f_max, f_steps);
            let g = sweep::sweep_modulation(&c, c.phi, &omega_values, &fs, &s.options()?)?;
            report_unreliable(&g);
            g.write_json(&s.out)?;
            if let Some(p) = &s.csv {
                g.write_csv(p)?;
            }
        }
        Command::SpectrumVsF { cfg, f_min, f_max, f_steps, delta_min, delta_max, delta_steps, velocity, out } => {
            let c = load_config(&cfg)?;
            let fs = linspace(f_min, f_max, f_steps);
            let ds = linspace(delta_min, delta_max, delta_steps);
            let m = sweep::spectrum_vs_f(&c, c.phi, c.omega, &fs, &ds, velocity)?;
            for (f, n) in fs.iter().zip(&m.notes) {
                if let Some(n) = n {
                    eprintln!("warning: f = {f}: {n}");
                }
            }
            m.write_json(&out)?;
        }
        Command::Check { files } => {
            for f in files {
                let doc = schema::check_path(&f)?;
                println!("{}: ok ({})", f.display(), doc.kind());
            }
        }
    }
    Ok(())
}

fn report_unreliable(g: &sweep::PhaseDiagramGrid) {
    let n = g.cells.iter().flatten().filter(|c| !c.reliable).count();
    if n > 0 {
        eprintln!("{n} of {} cells unreliable", g.cells.iter().map(Vec::len).sum::<usize>());
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let jobs = cli
        .jobs
        .or_else(|| std::env::var("SLSIM_JOBS").ok().and_then(|s| s.parse().ok()));
    if let Some(n) = jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(signed(1), "+1");
        assert_eq!(signed(-2), "-2");
        assert_eq!(signed(0), "0");
        assert_eq!(fixed6(-1e-9), "0.000000");
        assert_eq!(fixed6(-0.25), "-0.250000");
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
