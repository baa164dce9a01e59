use std::fmt::Write as _;

use maskcomp::codecs::{compression_error, compression_rate, roundtrip, CodecConfig, CodecKind, FLOAT_BITS, MAX_BITS};
use maskcomp::tensor::stats::{mean, std_dev};
use maskcomp::tensor::{mix_seed, post_relu_feature_map, SeededRng, Tensor};
use rayon::prelude::*;

use crate::config::SweepConfig;
use crate::error::{CliError, CliResult};

pub const SWEEP_HEADER: &str = "codec,compression_rate,mean_abs_error,std_abs_error,d,seed_count";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub codec: CodecKind,
    pub compression_rate: f64,
    pub mean_abs_error: f64,
    pub std_abs_error: f64,
    pub d: usize,
    pub seed_count: usize,
    pub config: CodecConfig,
}

/// Snaps values within `1e-9` of an integer onto it.
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

fn ratio_for(k: usize, d: usize) -> f64 {
    1.0 - k as f64 / d as f64
}

/// Codec settings whose compression rate on `d` values is `rate`.
///
/// With `f`-bit reals the bit budget per element is `β = f·(1 − rate)`; QU
/// uses `q = β`, SP and RT keep `(β − 1)·d/f` values, and MS spends `b` bits
/// on the mask and the remaining `(β − b)·d/f` on top values.
pub fn config_for_rate(
    codec: CodecKind,
    rate: f64,
    d: usize,
    ms_mask_bits: Option<u8>,
    tolerance: f64,
) -> CliResult<CodecConfig> {
    let name = format!("{codec} at compression rate {rate}");
    if !(rate.is_finite() && rate > 0.0 && rate < 1.0) {
        return Err(CliError::Config(format!("row {name}: rate must lie in (0, 1)")));
    }
    let f = FLOAT_BITS as f64;
    let budget = snap(f * (1.0 - rate));
    let keep = |bits_per_element: f64| -> CliResult<usize> {
        let k = (bits_per_element * d as f64 / f).round();
        if k < 1.0 || k > d as f64 {
            return Err(CliError::Config(format!(
                "row {name}: leaves room for {k} top values out of d = {d}"
            )));
        }
        Ok(k as usize)
    };
    let cfg = match codec {
        CodecKind::Qu => {
            let q = budget.round();
            if !(1.0..=MAX_BITS as f64).contains(&q) {
                return Err(CliError::Config(format!(
                    "row {name}: needs {budget} quantization bits, outside 1..={MAX_BITS}"
                )));
            }
            CodecConfig::qu(q as u8)
        }
        CodecKind::Sp => CodecConfig::sp(ratio_for(keep(budget - 1.0)?, d)),
        CodecKind::Rt => CodecConfig::rt(ratio_for(keep(budget - 1.0)?, d), 0),
        CodecKind::Ms => {
            let b = match ms_mask_bits {
                Some(b) => b as f64,
                None => budget.ceil() - 1.0,
            };
            if !(1.0..=MAX_BITS as f64).contains(&b) {
                return Err(CliError::Config(format!(
                    "row {name}: mask width {b} outside 1..={MAX_BITS}"
                )));
            }
            CodecConfig::ms(ratio_for(keep(budget - b)?, d), b as u8)
        }
    };
    let achieved = compression_rate(&cfg, d).map_err(|e| CliError::Config(format!("row {name}: {e}")))?;
    if (achieved - rate).abs() > tolerance {
        return Err(CliError::Config(format!(
            "row {name}: closest achievable rate on d = {d} is {achieved}, beyond tolerance {tolerance}"
        )));
    }
    Ok(cfg)
}

/// Expands the sweep section into one codec setting per row, validated.
pub fn plan(sweep: &SweepConfig) -> CliResult<Vec<CodecConfig>> {
    let d = sweep.channels * sweep.width;
    if d == 0 {
        return Err(CliError::Config("sweep.channels and sweep.width must be positive".into()));
    }
    if sweep.samples == 0 {
        return Err(CliError::Config("sweep.samples must be positive".into()));
    }
    if sweep.rates.is_empty() && sweep.cells.is_empty() {
        return Err(CliError::Config("sweep needs at least one entry in rates or cells".into()));
    }
    if !sweep.rates.is_empty() && sweep.codecs.is_empty() {
        return Err(CliError::Config("sweep.codecs must not be empty".into()));
    }
    let mut rows = Vec::new();
    for &rate in &sweep.rates {
        for &codec in &sweep.codecs {
            rows.push(config_for_rate(codec, rate, d, sweep.ms_mask_bits, sweep.rate_tolerance)?);
        }
    }
    for (i, cell) in sweep.cells.iter().enumerate() {
        let checked = cell.validate().and_then(|_| match cell.codec {
            CodecKind::Qu => Ok(()),
            _ => cell.retained(d).map(|_| ()),
        });
        checked.map_err(|e| CliError::Config(format!("row cells[{i}] ({}): {e}", cell.codec)))?;
        rows.push(cell.clone());
    }
    Ok(rows)
}

/// Seeded synthetic feature map number `sample`.
pub fn feature_map(sweep: &SweepConfig, seed: u64, sample: usize) -> Tensor<f32> {
    let mut rng = SeededRng::derive(seed, sample as u64);
    post_relu_feature_map(sweep.channels, sweep.width, &mut rng)
}

/// Mean and standard deviation of `‖C(x) − x‖₂` per row over the same set
/// of feature maps. Rows run in parallel; the result is sorted by rate and
/// codec.
pub fn run_sweep(sweep: &SweepConfig, seed: u64) -> CliResult<Vec<SweepRow>> {
    let configs = plan(sweep)?;
    let d = sweep.channels * sweep.width;
    let maps: Vec<Tensor<f32>> = (0..sweep.samples)
        .into_par_iter()
        .map(|s| feature_map(sweep, seed, s))
        .collect();
    let mut rows = configs
        .into_par_iter()
        .enumerate()
        .map(|(row, cfg)| {
            let errors = maps
                .iter()
                .enumerate()
                .map(|(s, x)| {
                    let cell = cfg.clone().with_seed(mix_seed(mix_seed(seed, row as u64), s as u64));
                    let decoded = roundtrip(x, &cell)?;
                    Ok(compression_error(x, &decoded)?.abs_error)
                })
                .collect::<Result<Vec<f64>, maskcomp::codecs::CodecError>>()
                .map_err(|e| CliError::Runtime(format!("row {row} ({}): {e}", cfg.codec)))?;
            Ok(SweepRow {
                codec: cfg.codec,
                compression_rate: compression_rate(&cfg, d).map_err(|e| CliError::Config(e.to_string()))?,
                mean_abs_error: mean(&errors),
                std_abs_error: if errors.len() > 1 { std_dev(&errors) } else { 0.0 },
                d,
                seed_count: errors.len(),
                config: cfg,
            })
        })
        .collect::<CliResult<Vec<SweepRow>>>()?;
    rows.sort_by(|a, b| {
        a.compression_rate
            .total_cmp(&b.compression_rate)
            .then(a.codec.id().cmp(&b.codec.id()))
    });
    Ok(rows)
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.codec, r.compression_rate, r.mean_abs_error, r.std_abs_error, r.d, r.seed_count
        )
        .expect("string write");
    }
    out
}
