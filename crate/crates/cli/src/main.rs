mod args;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use bisr_core::factorization::{self, bisr, FactorizationKind};
use bisr_core::format::{sig, write_json};
use bisr_core::metrics::{
    dyadic_grid, expected_error, rmse_bandwidth_sweep, rmse_size_sweep, write_reports_csv, BandwidthRule,
};
use bisr_core::optimizer::{optimize_band, OptimizerConfig};
use bisr_core::privacy::{
    calibrate_sigma, dp_sgd_run, noise_offline, GradientOracle, LinearRegression, NoiseStreamState, PrivacyParams,
    QuadraticBowl, SgdConfig,
};
use bisr_core::sensitivity::sens_toeplitz;
use bisr_core::sensitivity::Monotonicity;
use bisr_core::toeplitz::{r_sequence, r_tilde_sequence};
use bisr_core::workload::{inv_sqrt_coeffs, sqrt_coeffs};
use bisr_core::{ParticipationSchema, WorkloadParams};
use clap::Parser;

use args::*;

enum Failure {
    /// Invalid flag combination; exit status 2.
    Usage(String),
    /// Anything that went wrong while computing or writing; exit status 1.
    Compute(String),
}

impl From<bisr_core::Error> for Failure {
    fn from(e: bisr_core::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn open_output(path: &Path) -> io::Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufWriter::new(io::stdout().lock())))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}

fn json_out<T: serde::Serialize + ?Sized>(out: &OutputArgs, value: &T) -> Outcome {
    let mut w = open_output(&out.output)?;
    write_json(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn workload(w: &WorkloadArgs) -> Result<WorkloadParams, Failure> {
    Ok(WorkloadParams::new(w.n, w.alpha, w.beta)?)
}

fn schema(n: usize, s: &SchemaArgs) -> Result<ParticipationSchema, Failure> {
    match (s.k, s.b) {
        (None, None) => Err(usage("one of --k or --b is required")),
        (Some(k), None) => Ok(ParticipationSchema::from_participations(n, k)?),
        (None, Some(b)) => {
            if b == 0 {
                return Err(usage("--b must be positive"));
            }
            Ok(ParticipationSchema::new(n, b, n.div_ceil(b))?)
        }
        (Some(k), Some(b)) => Ok(ParticipationSchema::new(n, b, k)?),
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn coeffs(a: &CoeffsArgs) -> Outcome {
    let params = workload(&a.workload)?;
    let n = params.n();
    let rows: [(&str, Vec<f64>); 4] = [
        ("r", r_sequence(n)),
        ("r_tilde", r_tilde_sequence(n)),
        ("c", sqrt_coeffs(&params).into_vec()),
        ("c_tilde", inv_sqrt_coeffs(&params).into_vec()),
    ];
    match a.out.format {
        None => {
            let mut w = open_output(&a.out.output)?;
            for (name, v) in &rows {
                writeln!(w, "{name}: {}", join(v))?;
            }
            w.flush()?;
        }
        Some(Format::Csv) => {
            let mut w = open_output(&a.out.output)?;
            writeln!(w, "index,r,r_tilde,c,c_tilde")?;
            for i in 0..n {
                writeln!(w, "{i},{},{},{},{}", rows[0].1[i], rows[1].1[i], rows[2].1[i], rows[3].1[i])?;
            }
            w.flush()?;
        }
        Some(Format::Json) => {
            let map: BTreeMap<&str, &Vec<f64>> = rows.iter().map(|(k, v)| (*k, v)).collect();
            json_out(&a.out, &map)?;
        }
    }
    Ok(())
}

fn factorize(a: &FactorizeArgs) -> Outcome {
    if a.out.format == Some(Format::Csv) {
        return Err(usage("factorize writes JSON only"));
    }
    if a.kind == Kind::Optimized {
        return Err(usage("use the optimize subcommand for optimized factorizations"));
    }
    let params = workload(&a.workload)?;
    let f = factorization::build(a.kind.into(), &params, a.p)?;
    let mut w = open_output(&a.out.output)?;
    f.write_json(&mut w)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn sweep(a: &SweepArgs) -> Outcome {
    let kind: FactorizationKind = a.kind.into();
    let reports = if a.sizes.is_empty() {
        let n = a.n.ok_or_else(|| usage("--n is required for bandwidth sweeps"))?;
        let params = WorkloadParams::new(n, a.alpha, a.beta)?;
        let schema = schema(n, &a.schema)?;
        let grid = if a.bandwidths.is_empty() { dyadic_grid(params.n()) } else { a.bandwidths.clone() };
        rmse_bandwidth_sweep(&params, &schema, kind, &grid)?
    } else {
        if !a.bandwidths.is_empty() {
            return Err(usage("--bandwidths and --sizes cannot be combined"));
        }
        let k = a.schema.k.ok_or_else(|| usage("size sweeps need --k"))?;
        if a.schema.b.is_some() {
            return Err(usage("size sweeps derive b from each size; drop --b"));
        }
        let rule = match a.rule {
            Rule::Selected => BandwidthRule::Selected,
            Rule::Separation => BandwidthRule::Separation,
        };
        rmse_size_sweep(a.alpha, a.beta, k, &a.sizes, kind, rule)?
    };
    match a.out.format {
        Some(Format::Json) => json_out(&a.out, &reports),
        _ => {
            let mut w = open_output(&a.out.output)?;
            write_reports_csv(&mut w, &reports)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn optimize(a: &OptimizeArgs) -> Outcome {
    if a.out.format == Some(Format::Csv) {
        return Err(usage("optimize writes JSON; use --trace for the CSV trace"));
    }
    let params = workload(&a.workload)?;
    let schema = schema(params.n(), &a.schema)?;
    let config = OptimizerConfig { steps: a.steps, ..OptimizerConfig::default() };
    let opt = optimize_band(&params, &schema, a.p, &config)?;
    if let Some(path) = &a.trace {
        let mut w = open_output(path)?;
        opt.write_trace_csv(&mut w)?;
        w.flush()?;
    }
    let mut w = open_output(&a.out.output)?;
    opt.factorization.write_json(&mut w)?;
    writeln!(w)?;
    w.flush()?;
    let report = expected_error(&opt.factorization, &schema)?;
    eprintln!(
        "loss {} -> {}, rmse {}, converged {}, positive decreasing {}",
        sig(opt.initial_loss, 12),
        sig(opt.final_loss, 12),
        sig(report.rmse, 12),
        opt.converged,
        opt.positive_decreasing
    );
    Ok(())
}

fn calibrate(a: &CalibrateArgs) -> Outcome {
    let pp = PrivacyParams::new(a.eps, a.delta, a.sens)?;
    let sigma = calibrate_sigma(&pp)?;
    match a.out.format {
        None => {
            let mut w = open_output(&a.out.output)?;
            writeln!(w, "{sigma}")?;
            w.flush()?;
        }
        Some(Format::Csv) => {
            let mut w = open_output(&a.out.output)?;
            writeln!(w, "epsilon,delta,sensitivity,sigma")?;
            writeln!(w, "{},{},{},{}", a.eps, a.delta, a.sens, sig(sigma, 17))?;
            w.flush()?;
        }
        Some(Format::Json) => {
            let map = BTreeMap::from([("epsilon", a.eps), ("delta", a.delta), ("sensitivity", a.sens), ("sigma", sigma)]);
            json_out(&a.out, &map)?;
        }
    }
    Ok(())
}

fn noise(a: &NoiseArgs) -> Outcome {
    if a.out.format == Some(Format::Json) {
        return Err(usage("noise writes CSV only"));
    }
    if a.dim == 0 {
        return Err(usage("--dim must be positive"));
    }
    let params = WorkloadParams::new(a.n, a.alpha, a.beta)?;
    let band = bisr(&params, a.p)?.c_inv_band().clone();
    let rows: Vec<Vec<f64>> = match a.mode {
        NoiseMode::Stream => {
            let mut stream = NoiseStreamState::new(&band, a.dim, a.seed);
            (0..a.n).map(|_| stream.next(a.sigma)).collect()
        }
        NoiseMode::Offline => {
            let block = noise_offline(&band, a.n, a.dim, a.sigma, a.seed);
            (0..a.n).map(|i| block.row(i).to_vec()).collect()
        }
    };
    let mut w = open_output(&a.out.output)?;
    let header: Vec<String> = (0..a.dim).map(|j| format!("x{j}")).collect();
    writeln!(w, "step,{}", header.join(","))?;
    for (i, row) in rows.iter().enumerate() {
        let values: Vec<String> = row.iter().map(|&x| sig(x, 17)).collect();
        writeln!(w, "{},{}", i + 1, values.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn sgd(a: &SgdArgs) -> Outcome {
    if a.out.format == Some(Format::Json) {
        return Err(usage("sgd writes CSV only"));
    }
    let params = WorkloadParams::new(a.n, a.alpha, a.beta)?;
    let band = bisr(&params, a.p)?;
    let sigma = match (a.sigma, a.eps, a.delta) {
        (Some(s), _, _) => s,
        (None, Some(eps), Some(delta)) => {
            // Unit-sensitivity calibration scaled by the strategy's sensitivity.
            let participation = schema(a.n, &a.schema)?;
            let sens = sens_toeplitz(band.c_coeffs(), &participation, Monotonicity::Majorize)?.value;
            calibrate_sigma(&PrivacyParams::new(eps, delta, 1.0)?)? * sens
        }
        _ => return Err(usage("give --sigma or both --eps and --delta")),
    };
    let oracle: Box<dyn GradientOracle> = match a.task {
        Task::Bowl => Box::new(QuadraticBowl { center: vec![1.0; a.dim] }),
        Task::Linreg => {
            if a.examples == 0 {
                return Err(usage("--examples must be positive"));
            }
            Box::new(LinearRegression::synthetic(a.examples, a.dim, 0.1, a.seed))
        }
    };
    let config = SgdConfig {
        dimension: a.dim,
        steps: a.n,
        batch_size: a.batch,
        clip_norm: a.clip,
        learning_rate: a.lr,
        weight_decay: a.alpha,
        momentum: a.beta,
        noise_multiplier: sigma,
        initial_params: vec![0.0; a.dim],
    };
    let outcome = dp_sgd_run(&config, band.c_inv_band(), oracle.as_ref(), a.seed)?;
    let mut w = open_output(&a.out.output)?;
    outcome.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Coeffs(a) => coeffs(a),
        Command::Factorize(a) => factorize(a),
        Command::Sweep(a) => sweep(a),
        Command::Optimize(a) => optimize(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Noise(a) => noise(a),
        Command::Sgd(a) => sgd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
