use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use maskcomp::bounds::{compare_bounds, dominance_report, BoundInputs, DominanceReport};
use maskcomp::codecs::{compression_error, compression_rate, decode, encode};
use maskcomp::slsim::{relu_bias_probe, train, RunSummary, TrainingTrace};
use maskcomp::wire::{deserialize, serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::sweep::{run_sweep, to_csv};
use crate::tensor_file::{read_tensor, write_tensor};

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io("create", dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io("write", path, e))
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

/// Runs the sweep and writes `error_sweep.csv`; returns the CSV text.
pub fn cmd_error_sweep(cfg: &ExperimentConfig) -> CliResult<String> {
    let rows = run_sweep(&cfg.sweep, cfg.seed())?;
    let csv = to_csv(&rows);
    cfg.write_resolved("error_sweep")?;
    write_file(&cfg.out_dir().join("error_sweep.csv"), csv.as_bytes())?;
    Ok(csv)
}

pub const SUMMARY_HEADER: &str = "final_loss,total_bytes_up,rounds_to_target";

pub fn summary_csv(summary: &RunSummary, trace: &TrainingTrace, target: Option<f64>) -> String {
    let reached = target.and_then(|t| trace.records.iter().find(|r| r.loss <= t).map(|r| r.round));
    format!(
        "{SUMMARY_HEADER}\n{},{},{}\n",
        summary.final_loss,
        summary.total_bytes_up,
        reached.map(|r| r.to_string()).unwrap_or_default()
    )
}

/// Trains, writing `trace.csv` and `summary.csv`. A diverged run still
/// writes its trace and then fails with a runtime error.
pub fn cmd_train(cfg: &ExperimentConfig) -> CliResult<String> {
    if let Some(t) = cfg.target_loss.filter(|t| !t.is_finite()) {
        return Err(CliError::Config(format!("target_loss = {t} must be finite")));
    }
    cfg.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let (trace, summary) = train(&cfg.train).map_err(|e| CliError::Runtime(e.to_string()))?;
    let dir = cfg.out_dir();
    cfg.write_resolved("train")?;
    write_file(&dir.join("trace.csv"), trace.to_csv().as_bytes())?;
    let text = summary_csv(&summary, &trace, cfg.target_loss);
    write_file(&dir.join("summary.csv"), text.as_bytes())?;
    if summary.diverged {
        let last = trace.records.last().map(|r| r.round).unwrap_or(0);
        return Err(CliError::Runtime(format!("training diverged at round {last}")));
    }
    Ok(text)
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn format_bounds(inputs: &BoundInputs, r: &DominanceReport, matched: bool) -> String {
    let mut s = String::new();
    let w = &mut s;
    let BoundInputs {
        d,
        k1,
        k2,
        q1,
        q2,
        f,
        alpha,
        norm_sq,
    } = *inputs;
    writeln!(w, "d = {d}, k1 = {k1}, k2 = {k2}, q1 = {q1}, q2 = {q2}, f = {f}, alpha = {alpha}, norm_sq = {norm_sq}").unwrap();
    if !matched {
        writeln!(w, "warning: compression rates are not matched").unwrap();
    }
    writeln!(w, "QU bound: {}", r.qu_bound).unwrap();
    writeln!(w, "SP bound: {}", r.sp_bound).unwrap();
    writeln!(w, "MS bound: {}", r.ms_bound).unwrap();
    writeln!(w, "MS < SP: {}", yes_no(r.ms_vs_sp)).unwrap();
    writeln!(w, "MS < QU: {}", yes_no(r.ms_vs_qu)).unwrap();
    writeln!(w, "alpha in (0, 1/2): {}", yes_no(r.conditions.alpha_lt_half)).unwrap();
    writeln!(w, "k2/d: {}", r.conditions.k2_over_d).unwrap();
    writeln!(w, "sufficient condition MS < QU: {}", yes_no(r.sufficient.ms_vs_qu)).unwrap();
    writeln!(w, "sufficient condition MS < SP: {}", yes_no(r.sufficient.ms_vs_sp)).unwrap();
    s
}

pub fn cmd_bounds(inputs: &BoundInputs, allow_unmatched: bool) -> CliResult<String> {
    let report = if allow_unmatched {
        compare_bounds(inputs)
    } else {
        dominance_report(inputs)
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    let matched = inputs.check_rate_matching().is_ok();
    Ok(format_bounds(inputs, &report, matched))
}

pub fn cmd_bias_demo(samples: usize, seed: u64) -> CliResult<String> {
    let r = relu_bias_probe(samples, seed).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(format!(
        "samples: {}\nE[ReLU(Z)] estimate: {}\nstandard error: {}\nReLU(E[Z]): {}\ngap: {}\nclosed form 1/sqrt(2*pi): {}\n",
        r.samples, r.mean_relu, r.std_error, r.relu_of_mean, r.gap, r.exact_mean_relu
    ))
}

fn error_line(x: &maskcomp::FeatureMap, decoded: &maskcomp::FeatureMap, rate: Option<f64>) -> CliResult<String> {
    let report = compression_error(x, decoded).map_err(|e| CliError::Config(e.to_string()))?;
    let mut line = format!("abs_error: {}\nrel_error: {}\n", report.abs_error, report.rel_error);
    if let Some(rate) = rate {
        writeln!(line, "compression_rate: {rate}").unwrap();
    }
    Ok(line)
}

/// Encodes a tensor file into a frame file and reports the codec error.
pub fn cmd_encode(cfg: &ExperimentConfig, input: &Path, output: &Path) -> CliResult<String> {
    let codec = cfg
        .codec
        .as_ref()
        .ok_or_else(|| CliError::Config("encode needs a [codec] section in the config".into()))?;
    let x = read_tensor(&read_file(input)?)?;
    let payload = encode(&x, codec).map_err(|e| CliError::Config(e.to_string()))?;
    let frame = serialize(&payload)?;
    write_file(output, &frame)?;
    let decoded = decode(&payload).map_err(|e| CliError::Runtime(e.to_string()))?;
    let rate = compression_rate(codec, x.len()).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(format!("frame_bytes: {}\n{}", frame.len(), error_line(&x, &decoded, Some(rate))?))
}

/// Decodes a frame file into a tensor file, reporting the error against
/// `reference` when given.
pub fn cmd_decode(input: &Path, output: &Path, reference: Option<&Path>) -> CliResult<String> {
    let payload = deserialize(&read_file(input)?)?;
    let x_hat = decode(&payload).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(output, &write_tensor(&x_hat)?)?;
    let mut out = format!("codec: {}\nshape: {:?}\n", payload.codec, payload.shape);
    if let Some(r) = reference {
        let x = read_tensor(&read_file(r)?)?;
        out.push_str(&error_line(&x, &x_hat, None)?);
    }
    Ok(out)
}
