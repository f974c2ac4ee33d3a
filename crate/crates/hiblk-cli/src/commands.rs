use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use hiblk::certificates::{
    k_eldar, largest_sparsity_below, run_suite, sparsity_bounds, BoundParams, InequalityKind, SuiteSummary,
};
use hiblk::coherence::coherence_profile;
use hiblk::experiment::{presets, read_csv, sweep, write_csv, ExperimentConfig};
use hiblk::model::{gaussian_matrix, HierSignal, HierStructure, PriorSupport};
use hiblk::recovery::{bomp, default_eps, hibomp, hibomp_p, hiomp, omp};
use hiblk::{erc_certify, CoherenceStrategy, ErcOptions};
use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::args::*;
use crate::plot::render_svg;
use crate::CliError;

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Coherence(a) => coherence(a),
        Command::Bounds(a) => bounds(a),
        Command::Recover(a) => recover(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Verify(a) => verify(a),
        Command::Plot(a) => plot(a),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    Ok(BufReader::new(File::open(path).map_err(io_err(path))?))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_reader(open(path)?).map_err(|source| CliError::Json {
        path: path.display().to_string(),
        source,
    })
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    Ok(hiblk::io::read_matrix(open(path)?)?)
}

fn read_vector(path: &Path) -> Result<DVector<f64>, CliError> {
    let m = read_matrix(path)?;
    if m.nrows() != 1 && m.ncols() != 1 {
        return Err(CliError::Core(hiblk::Error::Format(format!(
            "{}: expected a single row or column, found {}x{}",
            path.display(),
            m.nrows(),
            m.ncols()
        ))));
    }
    Ok(DVector::from_iterator(m.len(), m.transpose().iter().copied()))
}

/// Writes `body` to `out`, or stdout without a path.
fn emit(out: Option<&PathBuf>, body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
    match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(io_err(p))?);
            body(&mut w)?;
            w.flush().map_err(io_err(p))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
            lock.flush().map_err(io_err(Path::new("<stdout>")))
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&PathBuf>, value: &T) -> Result<(), CliError> {
    emit(out, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|source| CliError::Json {
            path: "<output>".into(),
            source,
        })?;
        writeln!(w).map_err(io_err(Path::new("<output>")))
    })
}

fn parse_strategy(raw: &str, seed: Option<u64>) -> Result<CoherenceStrategy, CliError> {
    if raw == "exact" {
        return Ok(CoherenceStrategy::exact());
    }
    let count = raw
        .strip_prefix("sampled:")
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("--strategy must be `exact` or `sampled:N`, got `{raw}`")))?;
    let seed = seed.ok_or_else(|| CliError::Usage("--seed is required with a sampled strategy".into()))?;
    Ok(CoherenceStrategy::Sampled { count, seed })
}

fn require_seed(seed: Option<u64>, cmd: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Usage(format!("`{cmd}` is stochastic and needs --seed")))
}

fn coherence(a: CoherenceArgs) -> Result<(), CliError> {
    let dm = match (&a.matrix, &a.random) {
        (Some(p), None) => read_matrix(p)?,
        (None, Some(shape)) => {
            let (m, n) = shape
                .split_once('x')
                .and_then(|(m, n)| Some((m.parse().ok()?, n.parse().ok()?)))
                .ok_or_else(|| CliError::Usage(format!("--random expects MxN, got `{shape}`")))?;
            gaussian_matrix(m, n, require_seed(a.seed, "coherence --random")?)?.entries
        }
        _ => return Err(CliError::Usage("pass exactly one of --matrix or --random".into())),
    };
    let strategy = parse_strategy(&a.strategy, a.seed)?;
    let mode_block = a.mode_block.unwrap_or(dm.ncols());
    let nu: Vec<(usize, usize)> = a.d_star.iter().map(|&ds| (ds, mode_block)).collect();
    let profile = coherence_profile(&dm, a.d, &a.d_star, &nu, strategy)?;
    match a.format {
        Format::Json => emit_json(a.out.as_ref(), &profile),
        Format::Csv => emit(a.out.as_ref(), |w| {
            let mut lines = vec![
                ("mu".to_string(), profile.mu),
                ("mu_block".to_string(), profile.mu_block),
                ("nu_sub".to_string(), profile.nu_sub),
            ];
            for e in &profile.mu_hier {
                lines.push((format!("mu_hier_{}", e.d_star), e.value));
            }
            for e in &profile.nu_hier {
                lines.push((format!("nu_hier_{}_{}", e.d_star, e.mode_block), e.value));
            }
            let p = Path::new("<output>");
            writeln!(w, "quantity,value").map_err(io_err(p))?;
            for (k, v) in lines {
                writeln!(w, "{k},{v}").map_err(io_err(p))?;
            }
            Ok(())
        }),
    }
}

fn bounds(a: BoundsArgs) -> Result<(), CliError> {
    if a.eldar {
        let (Some(mu_b), Some(d)) = (a.mu_b, a.d) else {
            return Err(CliError::Usage("--eldar needs --mu-b and --d".into()));
        };
        let v = k_eldar(mu_b, d, a.nu.unwrap_or(0.0))?;
        let k = largest_sparsity_below(v, d);
        return emit(a.out.as_ref(), |w| {
            writeln!(w, "{v:.6}\nlargest block sparsity: {k}").map_err(io_err(Path::new("<output>")))
        });
    }
    let mut p: BoundParams = match &a.params {
        Some(path) => read_json(path)?,
        None => BoundParams::default(),
    };
    macro_rules! over {
        ($($f:ident),*) => { $( if a.$f.is_some() { p.$f = a.$f; } )* };
    }
    over!(
        mu,
        mu_b,
        nu,
        mu_hier,
        nu_hier,
        d,
        d_star,
        d_delta,
        d_star_delta,
        d_bar,
        prefix,
        alpha_bar,
        beta,
        k_n,
        r_units,
        m,
        n,
        omega
    );
    let set = sparsity_bounds(&p);
    emit_json(a.out.as_ref(), &set)
}

#[derive(Serialize)]
struct RecoverOutput {
    result: hiblk::RecoveryResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<hiblk::CertificateReport>,
}

fn recover(a: RecoverArgs) -> Result<(), CliError> {
    let dm = read_matrix(&a.matrix)?;
    let y = read_vector(&a.measurements)?;
    let s: HierStructure = read_json(&a.structure)?;
    let psi: PriorSupport = match &a.psi {
        Some(p) => read_json(p)?,
        None => PriorSupport::empty(s.n()),
    };
    if a.psi.is_some() && a.algorithm != Algorithm::HibompP {
        return Err(CliError::Usage("--psi only applies to --algorithm hibomp-p".into()));
    }
    if dm.ncols() != s.ambient_dim() {
        return Err(CliError::Core(hiblk::Error::Dimension(format!(
            "matrix has {} columns, structure needs {}",
            dm.ncols(),
            s.ambient_dim()
        ))));
    }
    let eps = a.eps.unwrap_or_else(|| default_eps(&y));
    let k = s.block_sparsity();
    let result = match a.algorithm {
        Algorithm::HibompP => hibomp_p(&dm, &y, &s, &psi, eps)?,
        Algorithm::Hibomp => hibomp(&dm, &y, &s, eps)?,
        Algorithm::Hiomp => hiomp(&dm, &y, &s, eps)?,
        Algorithm::Bomp => bomp(&dm, &y, s.unit_block(), k, eps)?,
        Algorithm::Omp => omp(&dm, &y, k * s.unit_block(), eps)?,
    };
    let certificate = match &a.truth {
        Some(path) => {
            if a.algorithm != Algorithm::HibompP {
                return Err(CliError::Usage("--truth certifies hibomp-p runs only".into()));
            }
            let truth = HierSignal::from_coeffs(&s, read_vector(path)?.as_slice().to_vec())?;
            let opts = ErcOptions {
                strategy: if a.coherence {
                    Some(parse_strategy(&a.strategy, a.seed)?)
                } else {
                    None
                },
                allow_sampled: a.allow_sampled,
                eps: Some(eps),
                ..Default::default()
            };
            Some(erc_certify(&dm, &y, &s, &psi, &truth, &opts)?)
        }
        None => None,
    };
    emit_json(a.out.as_ref(), &RecoverOutput { result, certificate })
}

fn resolve_config(a: &SweepArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&a.preset, &a.config) {
        (Some(name), None) => presets()
            .remove(name)
            .ok_or_else(|| CliError::Usage(format!("unknown preset `{name}`; see --list-presets")))?,
        (None, Some(path)) => read_json(path)?,
        _ => return Err(CliError::Usage("pass exactly one of --preset or --config".into())),
    };
    cfg.master_seed = require_seed(a.seed, "sweep")?;
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    Ok(cfg)
}

fn run_sweep(a: SweepArgs) -> Result<(), CliError> {
    if a.list_presets {
        return emit(a.out.as_ref(), |w| {
            for name in presets().keys() {
                writeln!(w, "{name}").map_err(io_err(Path::new("<output>")))?;
            }
            Ok(())
        });
    }
    let cfg = resolve_config(&a)?;
    if a.print_config {
        return emit_json(a.out.as_ref(), &cfg);
    }
    let rows = sweep(&cfg)?;
    match a.format {
        Format::Csv => emit(a.out.as_ref(), |w| Ok(write_csv(&rows, w)?)),
        Format::Json => emit_json(a.out.as_ref(), &rows),
    }
}

fn verify(a: VerifyArgs) -> Result<(), CliError> {
    let seed = require_seed(a.seed, "verify")?;
    let kinds: Vec<InequalityKind> = if a.suites.iter().any(|s| s == "all") {
        InequalityKind::all()
    } else {
        a.suites
            .iter()
            .map(|s| {
                InequalityKind::from_name(s).ok_or_else(|| {
                    let names: Vec<&str> = InequalityKind::ALL.iter().map(|k| k.name()).collect();
                    CliError::Usage(format!("unknown suite `{s}`; known: {}", names.join(", ")))
                })
            })
            .collect::<Result<_, _>>()?
    };
    let summaries: Vec<SuiteSummary> = kinds.iter().map(|&k| run_suite(k, a.count, seed)).collect();
    let counted = |s: &&SuiteSummary| s.kind != InequalityKind::Lemma3VectorPrinted;
    let violations: usize = summaries.iter().filter(counted).map(|s| s.violations).sum();
    let short: Vec<&SuiteSummary> = summaries.iter().filter(|s| s.premise_ok < a.count).collect();
    match a.format {
        Some(Format::Json) => emit_json(a.out.as_ref(), &summaries)?,
        Some(Format::Csv) => emit(a.out.as_ref(), |w| {
            let p = Path::new("<output>");
            writeln!(w, "suite,attempted,premise_ok,violations,errors,worst_margin").map_err(io_err(p))?;
            for s in &summaries {
                writeln!(
                    w,
                    "{},{},{},{},{},{:e}",
                    s.kind.name(),
                    s.attempted,
                    s.premise_ok,
                    s.violations,
                    s.errors,
                    s.worst_margin
                )
                .map_err(io_err(p))?;
            }
            Ok(())
        })?,
        None => emit(a.out.as_ref(), |w| {
            let p = Path::new("<output>");
            for s in &summaries {
                let tag = if s.kind == InequalityKind::Lemma3VectorPrinted {
                    " (informational)"
                } else {
                    ""
                };
                writeln!(
                    w,
                    "{:<22} {:>6} instances  {:>4} violations  worst margin {:+.3e}{tag}",
                    s.kind.name(),
                    s.premise_ok,
                    s.violations,
                    s.worst_margin
                )
                .map_err(io_err(p))?;
            }
            writeln!(w, "total violations: {violations}").map_err(io_err(p))
        })?,
    }
    if violations > 0 {
        return Err(CliError::Failed(format!("{violations} inequality violations")));
    }
    if let Some(s) = short.first() {
        return Err(CliError::Failed(format!(
            "suite {} reached only {} premise-satisfying instances",
            s.kind.name(),
            s.premise_ok
        )));
    }
    Ok(())
}

fn plot(a: PlotArgs) -> Result<(), CliError> {
    let rows = read_csv(open(&a.csv)?)?;
    let svg = render_svg(&rows, a.metric, a.log_y, a.title.as_deref())?;
    std::fs::write(&a.out, svg).map_err(io_err(&a.out))
}
