//! Batch front-end: simulate fields, analyze realizations, run the
//! anisotropy search, and execute the invariant self-test suite. All
//! outputs are files; exit codes are 0 success, 1 self-test failure,
//! 2 bad input, 3 I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use osgrf::besov;
use osgrf::estimate;
use osgrf::io::{self, IoError};
use osgrf::linalg;
use osgrf::selftest::{Fault, SelfTestOptions};
use osgrf::synthesis::{self, FieldRealization, SynthesisPlan};
use osgrf::wavelet::{self, DiagonalAnisotropy};

const EXIT_SELFTEST: u8 = 1;
const EXIT_BAD_INPUT: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "osgrf",
    about = "Simulate operator-scaling Gaussian random fields and estimate their anisotropy",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Output directory (created if missing); analyze/estimate also read
    /// realizations from it.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads ("auto" = one per core).
    #[arg(long, default_value = "auto")]
    parallelism: String,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize field realizations from a spec file.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Field spec JSON.
        #[arg(long)]
        spec: PathBuf,
        /// Number of replicates to synthesize.
        #[arg(long, default_value_t = 1)]
        replicates: u32,
        /// Overrides the seed recorded in the spec file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Wavelet-analyze realizations: coefficients, variogram, exponent.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// Integrability index of the per-scale statistic.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Summability index.
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        /// Scale fit range LO:HI (HI defaults to the finest usable scale).
        #[arg(long)]
        jrange: Option<String>,
        /// Analysis anisotropy "l1,l2,..." (default: the real
        /// diagonalizable part of the spec's E0).
        #[arg(long)]
        aniso: Option<String>,
    },
    /// Sweep a candidate family and report the maximizing anisotropy.
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
        /// Candidate family JSON.
        #[arg(long)]
        family: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
    },
    /// Run the reduced-scale invariant checks.
    Selftest {
        /// Optional report directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "auto")]
        parallelism: String,
        /// Test hook: inject a known fault and expect the suite to fail.
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    fn bad_input(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_BAD_INPUT,
            msg: msg.into(),
        }
    }

    fn io(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            msg: msg.into(),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io(_) => Self::io(e.to_string()),
            _ => Self::bad_input(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            common,
            spec,
            replicates,
            seed,
        } => in_pool(&common.parallelism, || {
            cmd_simulate(&common.out, &spec, replicates, seed)
        }),
        Command::Analyze {
            common,
            p,
            q,
            jrange,
            aniso,
        } => in_pool(&common.parallelism, || {
            cmd_analyze(&common.out, p, q, jrange.as_deref(), aniso.as_deref())
        }),
        Command::Estimate {
            common,
            family,
            p,
            q,
        } => in_pool(&common.parallelism, || {
            cmd_estimate(&common.out, &family, p, q)
        }),
        Command::Selftest {
            out,
            parallelism,
            inject_fault,
        } => in_pool(&parallelism, || {
            cmd_selftest(out.as_deref(), inject_fault.as_deref())
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

fn in_pool(
    parallelism: &str,
    run: impl FnOnce() -> Result<ExitCode, CliError> + Send,
) -> Result<ExitCode, CliError> {
    let threads = match parallelism {
        "auto" => 0,
        other => other
            .parse::<usize>()
            .map_err(|_| CliError::bad_input(format!("--parallelism must be a count or 'auto', got `{other}`")))?,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::io(format!("cannot build thread pool: {e}")))?;
    pool.install(run)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))
}

fn cmd_simulate(
    out: &Path,
    spec_path: &Path,
    replicates: u32,
    seed: Option<u64>,
) -> Result<ExitCode, CliError> {
    if replicates == 0 {
        return Err(CliError::bad_input("--replicates must be at least 1"));
    }
    let bytes = std::fs::read(spec_path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", spec_path.display())))?;
    let mut spec = io::field_spec_from_slice(&bytes)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    ensure_dir(out)?;
    let spec = Arc::new(spec);
    let plan = SynthesisPlan::new(Arc::clone(&spec)).map_err(|e| CliError::bad_input(e.to_string()))?;
    let mut files = Vec::with_capacity(replicates as usize);
    for rep in 0..replicates {
        let field = plan.realize(rep);
        let (header, payload) = io::write_realization(out, &field)?;
        files.push(io::ManifestEntryJson {
            replicate: rep,
            header,
            payload,
        });
    }
    let manifest = io::ManifestJson {
        spec_hash: io::spec_hash(&bytes),
        seed: spec.seed,
        replicates,
        files,
    };
    io::write_manifest(out, &manifest)?;
    println!(
        "simulated {replicates} replicate(s) of a {:?} grid into {}",
        spec.grid.n,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn load_realizations(dir: &Path) -> Result<Vec<FieldRealization>, CliError> {
    let headers = io::list_realization_headers(dir)?;
    if headers.is_empty() {
        return Err(CliError::bad_input(format!(
            "no realization files in {}",
            dir.display()
        )));
    }
    headers
        .iter()
        .map(|h| io::read_realization(h).map_err(CliError::from))
        .collect()
}

fn parse_jrange(s: &str) -> Result<(u32, u32), CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 2 {
        return Err(CliError::bad_input(format!("--jrange must be LO:HI, got `{s}`")));
    }
    let lo = parts[0]
        .parse::<u32>()
        .map_err(|_| CliError::bad_input(format!("bad jrange low `{}`", parts[0])))?;
    let hi = parts[1]
        .parse::<u32>()
        .map_err(|_| CliError::bad_input(format!("bad jrange high `{}`", parts[1])))?;
    if hi < lo {
        return Err(CliError::bad_input("--jrange HI must be >= LO"));
    }
    Ok((lo, hi))
}

fn parse_aniso(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::bad_input(format!("bad anisotropy entry `{t}`")))
        })
        .collect()
}

fn cmd_analyze(
    out: &Path,
    p: f64,
    q: f64,
    jrange: Option<&str>,
    aniso: Option<&str>,
) -> Result<ExitCode, CliError> {
    let realizations = load_realizations(out)?;
    let spec = Arc::clone(&realizations[0].spec);
    let lambda: Vec<f64> = match aniso {
        Some(s) => parse_aniso(s)?,
        None => {
            let d_part = &spec.e0.jordan().d;
            if !linalg::is_diagonal(d_part, 1e-8) {
                return Err(CliError::bad_input(
                    "the spec's anisotropy has a non-diagonal real part; pass --aniso explicitly",
                ));
            }
            (0..d_part.nrows()).map(|i| d_part[(i, i)]).collect()
        }
    };
    let analysis = DiagonalAnisotropy::new(&lambda)
        .map_err(|e| CliError::bad_input(format!("invalid analysis anisotropy: {e}")))?;

    // Wavelet coefficients of every realization; files for the first.
    let sets: Vec<wavelet::WaveletCoefficientSet> = realizations
        .iter()
        .map(|r| {
            wavelet::anisotropic_wavelet_transform(&r.values, &analysis, u32::MAX, 4)
                .map_err(|e| CliError::bad_input(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    io::write_coefficients_csv(&out.join("coefficients.csv"), &sets[0])?;
    io::write_coefficient_branches(out, "analysis", &sets[0])?;

    // Variogram over axis lags when enough replicates are present.
    if realizations.len() >= 2 {
        let d = spec.dim();
        let mut lags = Vec::new();
        for axis in 0..d {
            for m in [1i64, 2, 3, 4, 6, 8, 12, 16] {
                if (m as usize) < spec.grid.n[axis] / 2 {
                    let mut h = vec![0.0; d];
                    h[axis] = m as f64 * spec.grid.dx[axis];
                    lags.push(h);
                }
            }
        }
        let vg = synthesis::variogram_estimate(&realizations, &lags)
            .map_err(|e| CliError::bad_input(e.to_string()))?;
        io::write_variogram_csv(&out.join("variogram.csv"), &vg)?;
    } else {
        eprintln!("note: variogram needs at least 2 replicates; skipped");
    }

    // Critical exponent per realization, averaged.
    let j_max_common = sets
        .iter()
        .map(|s| s.max_canonical_scale())
        .min()
        .unwrap_or(0);
    let range = match jrange {
        Some(s) => parse_jrange(s)?,
        None => {
            if j_max_common < 5 {
                return Err(CliError::bad_input(format!(
                    "grid supports only {j_max_common} scales; too few for estimation"
                )));
            }
            (2, j_max_common - 1)
        }
    };
    let mut pooled: Option<besov::ExponentEstimate> = None;
    let mut alphas = Vec::new();
    for set in &sets {
        let est = besov::critical_exponent_estimate(set, p, q, range)
            .map_err(|e| CliError::bad_input(e.to_string()))?;
        alphas.push(est.alpha_hat);
        pooled = Some(match pooled.take() {
            None => est,
            Some(mut acc) => {
                for (slot, new) in acc.per_scale.iter_mut().zip(&est.per_scale) {
                    slot.1 += new.1;
                }
                for (slot, new) in acc.axis_exponents.iter_mut().zip(&est.axis_exponents) {
                    *slot += new;
                }
                acc
            }
        });
    }
    let mut pooled = pooled.expect("at least one realization");
    let n = sets.len() as f64;
    for slot in pooled.per_scale.iter_mut() {
        slot.1 /= n;
    }
    for slot in pooled.axis_exponents.iter_mut() {
        *slot /= n;
    }
    pooled.alpha_hat = alphas.iter().sum::<f64>() / n;
    if alphas.len() > 1 {
        pooled.slope_stderr = osgrf::stats::stderr_mean(&alphas);
    }
    io::write_estimate_json(&out.join("estimate.json"), &pooled)?;
    io::write_scale_table_csv(&out.join("scale_table.csv"), &pooled)?;

    // Normalized-coefficient report for the first realization.
    match estimate::normalized_coefficient_stats(&sets[0], p) {
        Ok(rows) => io::write_normalized_stats_csv(&out.join("normalized_stats.csv"), &rows)?,
        Err(e) => eprintln!("note: normalized statistics unavailable: {e}"),
    }

    println!(
        "analyzed {} realization(s): alpha = {:.4} +- {:.4} (analysis anisotropy {:?})",
        realizations.len(),
        pooled.alpha_hat,
        pooled.slope_stderr,
        lambda
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_estimate(out: &Path, family_path: &Path, p: f64, q: f64) -> Result<ExitCode, CliError> {
    let realizations = load_realizations(out)?;
    let family = io::load_family(family_path)?;
    let result = estimate::anisotropy_search(&realizations, &family, p, q)
        .map_err(|e| CliError::bad_input(e.to_string()))?;
    io::write_search_json(&out.join("search.json"), &result)?;
    io::write_curve_csv(&out.join("curve.csv"), &result)?;
    println!(
        "argmax lambda = {:?}, H = {:.4} (tent R2 {:.3})",
        result.argmax.lambda(),
        result.h_hat,
        result.tent_r2
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_selftest(out: Option<&Path>, inject: Option<&str>) -> Result<ExitCode, CliError> {
    let fault = match inject {
        None => None,
        Some("flip-filter-tap") => Some(Fault::FlipFilterTap),
        Some(other) => {
            return Err(CliError::bad_input(format!("unknown fault `{other}`")));
        }
    };
    let reports = osgrf::selftest::run_selftest(&SelfTestOptions { fault });
    let mut lines = String::new();
    let mut failed = Vec::new();
    for c in &reports {
        let line = format!(
            "[{}] {} - {}",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.detail
        );
        println!("{line}");
        lines.push_str(&line);
        lines.push('\n');
        if !c.passed {
            failed.push(c.name);
        }
    }
    if let Some(dir) = out {
        ensure_dir(dir)?;
        std::fs::write(dir.join("selftest_report.txt"), &lines)
            .map_err(|e| CliError::io(e.to_string()))?;
    }
    if failed.is_empty() {
        println!("selftest: all {} checks passed", reports.len());
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("selftest: failed checks: {}", failed.join(", "));
        Ok(ExitCode::from(EXIT_SELFTEST))
    }
}
