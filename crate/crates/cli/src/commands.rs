use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ctmc_bridge::complexity::{
    calibrate_coefficients, coefficient_size_model, monotonic_seconds, predict_and_select, CostCoefficients,
    CostPrediction, PredictionMode, SizeObservation, TimedProblem,
};
use ctmc_bridge::models::{
    build_gy, build_hky, build_hky_cpg, parse_codon_frequencies, random_reversible, random_sparse_codon, GeneticCode,
    GyParams, HkyCpgParams, HkyParams,
};
use ctmc_bridge::samplers::{sample_batch, RejectionConfig, SamplerKind};
use ctmc_bridge::validation::{validate_matrix, ValidationConfig};
use ctmc_bridge::{EndpointProblem, Error, RandomStream, RateMatrix};

use crate::args::*;
use crate::formats::{read_matrix, write_coefficient_rows, write_matrix, CoefficientRow, MatrixFormat, PathWriter};
use crate::{CliError, CliResult};
use clap::ValueEnum;

/// Environment variable naming a directory of `n<size>.toml` coefficient files.
pub const COEFFICIENTS_DIR_ENV: &str = "CTMC_BRIDGE_COEFFICIENTS_DIR";

/// Largest state space `validate` accepts.
const MAX_VALIDATE_STATES: usize = 10;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn positive(flag: &str, value: f64) -> CliResult<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(usage(format!("--{flag} must be a positive number, got {value}")))
    }
}

/// Rejects parameters the chosen model does not take.
fn check_applicable(name: ModelName, p: &ModelParams) -> CliResult<()> {
    use ModelName::*;
    let allowed: &[&str] = match name {
        Hky => &["kappa", "freqs", "calibrate"],
        HkyCpg => &["kappa", "freqs", "gamma", "calibrate"],
        Gy => &["kappa", "omega", "codon-freqs", "genetic-code", "calibrate"],
        RandomReversible => &["n"],
        RandomSparseCodon => &[],
    };
    let given = [
        ("kappa", p.kappa.is_some()),
        ("omega", p.omega.is_some()),
        ("gamma", p.gamma.is_some()),
        ("freqs", p.freqs.is_some()),
        ("codon-freqs", p.codon_freqs.is_some()),
        ("genetic-code", p.genetic_code.is_some()),
        ("n", p.n.is_some()),
        ("calibrate", p.calibrate),
    ];
    for (flag, set) in given {
        if set && !allowed.contains(&flag) {
            let model = name.to_possible_value().map(|v| v.get_name().to_owned()).unwrap_or_default();
            return Err(usage(format!("--{flag} does not apply to model {model}")));
        }
    }
    Ok(())
}

fn four_freqs(p: &ModelParams, default: [f64; 4]) -> CliResult<[f64; 4]> {
    match &p.freqs {
        None => Ok(default),
        Some(v) => <[f64; 4]>::try_from(v.as_slice())
            .map_err(|_| usage(format!("--freqs needs 4 values (A,G,C,T), got {}", v.len()))),
    }
}

pub fn build_model(name: ModelName, p: &ModelParams, seed: u64) -> CliResult<RateMatrix> {
    check_applicable(name, p)?;
    let kappa = positive("kappa", p.kappa.unwrap_or(2.0))?;
    let built = match name {
        ModelName::Hky => {
            build_hky(&HkyParams { kappa, base_freqs: four_freqs(p, [0.2, 0.3, 0.3, 0.2])?, calibrate: p.calibrate })
        }
        ModelName::HkyCpg => {
            let gamma = p.gamma.unwrap_or(20.0);
            if !(gamma >= 1.0 && gamma.is_finite()) {
                return Err(usage(format!("--gamma must be >= 1, got {gamma}")));
            }
            build_hky_cpg(&HkyCpgParams {
                kappa,
                nu: four_freqs(p, [0.3, 0.3, 0.2, 0.2])?,
                gamma,
                calibrate: p.calibrate,
            })
        }
        ModelName::Gy => {
            let genetic_code = match &p.genetic_code {
                None => GeneticCode::standard(),
                Some(t) => GeneticCode::from_table(t)
                    .ok_or_else(|| usage("--genetic-code must be 64 letters in TCAG order with `*` for stops"))?,
            };
            let codon_freqs = match &p.codon_freqs {
                Some(path) => parse_codon_frequencies(&read_text(path)?, &genetic_code)?,
                None if p.genetic_code.is_some() => {
                    return Err(usage("--genetic-code needs --codon-freqs for its sense codons"));
                }
                None => GyParams::default().codon_freqs,
            };
            let omega = positive("omega", p.omega.unwrap_or(0.01))?;
            build_gy(&GyParams { kappa, omega, codon_freqs, genetic_code, calibrate: p.calibrate })
        }
        ModelName::RandomReversible => {
            let n = p.n.ok_or_else(|| usage("random-reversible needs --n"))?;
            if n < 2 {
                return Err(usage(format!("--n must be >= 2, got {n}")));
            }
            random_reversible(n, &mut RandomStream::new(seed))
        }
        ModelName::RandomSparseCodon => random_sparse_codon(&mut RandomStream::new(seed)),
    };
    // bad values that pass the flag checks still count as usage errors
    built.map(|m| m.q).map_err(|e| match e {
        Error::InvalidFrequencyVector(msg) => {
            let flag = if name == ModelName::Gy { "codon-freqs" } else { "freqs" };
            usage(format!("--{flag}: {msg}"))
        }
        other => usage(format!("invalid model parameters: {other}")),
    })
}

pub fn load_matrix(src: &MatrixSource) -> CliResult<Arc<RateMatrix>> {
    let q = match (&src.matrix, src.model) {
        (Some(path), _) => {
            let format = src.matrix_format.unwrap_or_else(|| MatrixFormat::from_path(path));
            let mut file = File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            read_matrix(&mut file, format)?
        }
        (None, Some(name)) => build_model(name, &src.params, src.model_seed)?,
        (None, None) => return Err(usage("one of --matrix or --model is required")),
    };
    Ok(Arc::new(q))
}

fn problem(q: &Arc<RateMatrix>, e: &Endpoints) -> CliResult<EndpointProblem> {
    positive("horizon", e.horizon)?;
    Ok(EndpointProblem::from_labels(q.clone(), &e.from, &e.to, e.horizon)?)
}

fn coefficients(cost: &CostArgs, n: usize) -> CliResult<CostCoefficients> {
    if let Some(path) = &cost.coefficients {
        return Ok(CostCoefficients::from_toml_str(&read_text(path)?)?);
    }
    let (size, c) = match std::env::var_os(COEFFICIENTS_DIR_ENV) {
        Some(dir) => CostCoefficients::from_dir(Path::new(&dir), n)?,
        None => CostCoefficients::bundled(n),
    };
    eprintln!("using cost coefficients for n = {size}");
    Ok(c)
}

fn mode(m: ModeChoice) -> PredictionMode {
    match m {
        ModeChoice::Exact => PredictionMode::Exact,
        ModeChoice::LargeT => PredictionMode::LargeT,
    }
}

fn predict(problem: &EndpointProblem, cost: &CostArgs) -> CliResult<CostPrediction> {
    let c = coefficients(cost, problem.q.n())?;
    Ok(predict_and_select(&c, problem, mode(cost.mode))?)
}

pub fn cmd_model(cmd: &ModelCmd) -> CliResult<()> {
    let q = build_model(cmd.name, &cmd.params, cmd.seed)?;
    let mut out = open_output(cmd.output.as_deref())?;
    write_matrix(&q, cmd.format, &mut out)?;
    out.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn cmd_sample(cmd: &SampleCmd) -> CliResult<()> {
    if cmd.paths == 0 {
        return Err(usage("--paths must be >= 1"));
    }
    let q = load_matrix(&cmd.source)?;
    let problem = problem(&q, &cmd.endpoints)?;
    let kind = match cmd.sampler {
        SamplerChoice::Auto => {
            let prediction = predict(&problem, &cmd.cost)?;
            eprintln!("{}", serde_json::to_string(&prediction).map_err(|e| CliError::Io(e.to_string()))?);
            prediction.selected
        }
        SamplerChoice::Rejection => SamplerKind::Rejection,
        SamplerChoice::Direct => SamplerKind::Direct,
        SamplerChoice::Uniformization => SamplerKind::Uniformization,
    };
    let cfg = RejectionConfig::new(cmd.max_attempts)?;
    let outcome = sample_batch(kind, &problem, cmd.paths, &RandomStream::new(cmd.seed), cfg)?;

    let mut out = open_output(cmd.output.as_deref())?;
    let mut writer = PathWriter::new(q.states(), cmd.format, &mut out)?;
    for (id, report) in &outcome.reports {
        writer.write(*id, &report.path)?;
    }
    writer.finish()?;
    out.flush().map_err(|e| CliError::Io(e.to_string()))?;
    drop(out);

    let done = outcome.reports.len();
    let attempts: u64 = outcome.paths().map(|r| r.attempts).sum();
    let jumps: usize = outcome.paths().map(|r| r.path.jump_count()).sum();
    eprintln!(
        "paths={done} failed={} attempts={attempts} mean_jumps={:.6} sampler={kind}",
        outcome.failures.len(),
        jumps as f64 / done.max(1) as f64
    );
    match outcome.failures.first() {
        None => Ok(()),
        Some((id, err)) => {
            for (id, err) in &outcome.failures {
                eprintln!("path {id} failed: {err}");
            }
            eprintln!("{} of {} paths failed (first: path {id})", outcome.failures.len(), cmd.paths);
            Err(CliError::Core(err.clone()))
        }
    }
}

pub fn cmd_predict(cmd: &PredictCmd) -> CliResult<()> {
    let q = load_matrix(&cmd.source)?;
    let prediction = predict(&problem(&q, &cmd.endpoints)?, &cmd.cost)?;
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &prediction).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(out).map_err(|e| CliError::Io(e.to_string()))
}

fn parse_samplers(names: &[String]) -> CliResult<Vec<SamplerKind>> {
    let kinds = names
        .iter()
        .map(|s| s.trim().parse::<SamplerKind>().map_err(|e| usage(format!("--samplers: {e}"))))
        .collect::<CliResult<Vec<_>>>()?;
    if kinds.is_empty() {
        return Err(usage("--samplers is empty"));
    }
    Ok(kinds)
}

fn parse_pairs(q: &RateMatrix, pairs: &[String]) -> CliResult<Vec<(String, String)>> {
    if pairs.is_empty() {
        let labels = q.states().labels();
        return Ok(vec![(labels[0].clone(), labels[0].clone()), (labels[0].clone(), labels[1].clone())]);
    }
    pairs
        .iter()
        .map(|p| match p.split_once(':') {
            Some((a, b)) => Ok((a.trim().to_owned(), b.trim().to_owned())),
            None => Err(usage(format!("--pairs entries look like a:b, got `{p}`"))),
        })
        .collect()
}

const RAW_HEADER: [&str; 14] = [
    "sampler",
    "a",
    "b",
    "T",
    "rep",
    "init_time",
    "sample_time",
    "attempts",
    "recursion_steps",
    "n",
    "paths",
    "p_acc",
    "expected_recursions",
    "median_seconds_per_path",
];

fn write_raw(
    w: &mut csv::Writer<Box<dyn Write>>,
    kind: SamplerKind,
    q: &RateMatrix,
    timed: &[TimedProblem],
) -> CliResult<()> {
    let io = |e: csv::Error| CliError::Io(e.to_string());
    for t in timed {
        for (rep, block) in t.blocks.iter().enumerate() {
            w.write_record([
                kind.to_string(),
                q.states().label(t.a).to_owned(),
                q.states().label(t.b).to_owned(),
                t.horizon.to_string(),
                rep.to_string(),
                block.init_seconds.to_string(),
                block.sample_seconds.to_string(),
                block.attempts.to_string(),
                block.recursion_steps.to_string(),
                q.n().to_string(),
                block.paths.to_string(),
                t.p_acc.to_string(),
                t.expected_recursions.to_string(),
                t.seconds.to_string(),
            ])
            .map_err(io)?;
        }
    }
    Ok(())
}

pub fn cmd_bench(cmd: &BenchCmd) -> CliResult<()> {
    if cmd.horizons.is_empty() {
        return Err(usage("--horizons is empty"));
    }
    for &t in &cmd.horizons {
        positive("horizons", t)?;
    }
    if cmd.reps == 0 {
        return Err(usage("--reps must be >= 1"));
    }
    let kinds = parse_samplers(&cmd.samplers)?;
    let cfg = RejectionConfig::new(cmd.max_attempts)?;

    let matrices: Vec<Arc<RateMatrix>> = if cmd.sizes.is_empty() {
        vec![load_matrix(&cmd.source)?]
    } else {
        if cmd.source.model != Some(ModelName::RandomReversible) {
            return Err(usage("--sizes needs --model random-reversible"));
        }
        if cmd.source.params.n.is_some() {
            return Err(usage("--n conflicts with --sizes"));
        }
        let master = RandomStream::new(cmd.source.model_seed);
        cmd.sizes
            .iter()
            .map(|&n| {
                if n < 2 {
                    return Err(usage(format!("--sizes entries must be >= 2, got {n}")));
                }
                Ok(Arc::new(random_reversible(n, &mut master.substream(n as u64))?.q))
            })
            .collect::<CliResult<_>>()?
    };

    let mut raw = csv::Writer::from_writer(open_output(cmd.output.as_deref())?);
    raw.write_record(RAW_HEADER).map_err(|e| CliError::Io(e.to_string()))?;
    let mut fits = Vec::new();
    let mut observations = Vec::new();
    let rng = RandomStream::new(cmd.seed);
    for (mi, q) in matrices.iter().enumerate() {
        let mut problems = Vec::new();
        for (a, b) in parse_pairs(q, &cmd.pairs)? {
            for &t in &cmd.horizons {
                problems.push(EndpointProblem::from_labels(q.clone(), &a, &b, t)?);
            }
        }
        for (ki, &kind) in kinds.iter().enumerate() {
            let stream = rng.substream(mi as u64).substream(ki as u64);
            let mut clock = monotonic_seconds;
            let (fit, timed) = calibrate_coefficients(kind, &problems, cmd.reps, &stream, &mut clock, cfg)?;
            write_raw(&mut raw, kind, q, &timed)?;
            fits.push(CoefficientRow::new(kind, q.n(), &fit));
            observations.push(SizeObservation { sampler: kind, n: q.n(), alpha: fit.alpha, beta: fit.beta });
            eprintln!("n={} {kind}: alpha={:e} beta={:e} residual={:e}", q.n(), fit.alpha, fit.beta, fit.residual);
        }
    }
    raw.flush().map_err(|e| CliError::Io(e.to_string()))?;
    drop(raw);

    match &cmd.fits {
        Some(p) => {
            let mut out = open_output(Some(p))?;
            write_coefficient_rows(&fits, &mut out)?;
        }
        None => write_coefficient_rows(&fits, &mut io::stderr().lock())?,
    }
    if let Some(dir) = &cmd.coefficients_out {
        write_coefficient_files(dir, &fits)?;
    }
    if let Some(path) = &cmd.size_model {
        let model = coefficient_size_model(&observations)?;
        let mut out = open_output(Some(path))?;
        serde_json::to_writer_pretty(&mut out, &model).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(out).map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

fn write_coefficient_files(dir: &PathBuf, fits: &[CoefficientRow]) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut sizes: Vec<usize> = fits.iter().map(|f| f.n).collect();
    sizes.dedup();
    for n in sizes {
        let get = |k: SamplerKind| {
            fits.iter()
                .find(|f| f.n == n && f.sampler == k)
                .map(|f| (f.alpha, f.beta))
                .ok_or_else(|| usage(format!("--coefficients-out needs all three samplers, {k} missing")))
        };
        let (r, d, u) = (get(SamplerKind::Rejection)?, get(SamplerKind::Direct)?, get(SamplerKind::Uniformization)?);
        let c = CostCoefficients::new([r.0, r.1, d.0, d.1, u.0, u.1])?;
        let path = dir.join(format!("n{n}.toml"));
        std::fs::write(&path, c.to_toml_string()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

pub fn cmd_validate(cmd: &ValidateCmd) -> CliResult<()> {
    let q = load_matrix(&cmd.source)?;
    if q.n() > MAX_VALIDATE_STATES {
        return Err(usage(format!("validate supports at most {MAX_VALIDATE_STATES} states, got {}", q.n())));
    }
    if cmd.horizons.is_empty() {
        return Err(usage("--horizons is empty"));
    }
    for &t in &cmd.horizons {
        positive("horizons", t)?;
    }
    if cmd.paths < 2 {
        return Err(usage("--paths must be >= 2"));
    }
    let cfg = ValidationConfig {
        paths: cmd.paths,
        significance: cmd.significance,
        se_band: cmd.se_band,
        min_acceptance: cmd.min_acceptance,
        rejection: RejectionConfig::new(cmd.max_attempts)?,
        corrupt_uniformization: cmd.corrupt_uniformization,
    };
    let name = match (&cmd.source.matrix, cmd.source.model) {
        (Some(p), _) => p.display().to_string(),
        (None, Some(m)) => m.to_possible_value().map(|v| v.get_name().to_owned()).unwrap_or_default(),
        _ => String::new(),
    };
    let report = validate_matrix(&name, &q, &cmd.horizons, &cfg, &RandomStream::new(cmd.seed))?;

    let mut out = io::stdout().lock();
    let io_err = |e: io::Error| CliError::Io(e.to_string());
    writeln!(
        out,
        "{:<6} {:<14} {:<28} {:<50} {:>12} {:>10}",
        "result", "family", "cell", "check", "statistic", "threshold"
    )
    .map_err(io_err)?;
    for c in report.checks.iter().filter(|c| cmd.verbose || !c.passed) {
        writeln!(
            out,
            "{:<6} {:<14} {:<28} {:<50} {:>12.6} {:>10.4}",
            if c.passed { "PASS" } else { "FAIL" },
            format!("{:?}", c.family),
            c.cell,
            c.check,
            c.statistic,
            c.threshold
        )
        .map_err(io_err)?;
    }
    let failures: Vec<_> = report.failures().collect();
    writeln!(out, "{} cells, {} checks, {} failed", report.cells, report.checks.len(), failures.len())
        .map_err(io_err)?;
    if failures.is_empty() {
        return Ok(());
    }
    let names: Vec<String> =
        failures.iter().map(|c| format!("{} / {} (statistic {:.6})", c.cell, c.check, c.statistic)).collect();
    Err(CliError::Validation(names.join("; ")))
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}
