use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::features::GraphInput;
use super::loss::LossConfig;
use super::model::ParamVars;
use super::params::EncoderParams;
use super::tape::Tape;
use super::train::triplet_terms;
use super::EncoderError;
use crate::dataset::rng;

/// Denominator floor for relative errors, so coordinates whose true gradient
/// is zero compare on absolute error.
pub const GRAD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Coordinates whose ±ε probes flipped a ReLU and were replaced.
    pub skipped_kinks: usize,
    pub max_abs_analytic: f64,
    pub max_abs_numeric: f64,
}

/// One triplet for checking: ground truth, masked positive, negative.
#[derive(Debug, Clone)]
pub struct CheckSample {
    pub gt: GraphInput,
    pub pos: GraphInput,
    pub neg: GraphInput,
}

fn loss_at(params: &EncoderParams, s: &CheckSample, lambda: f64, cfg: &LossConfig) -> Result<(f64, Vec<bool>), EncoderError> {
    let mut tape = Tape::new();
    let pv = ParamVars::frozen(&mut tape, params);
    let terms = triplet_terms(&mut tape, &pv, params, &s.gt, &s.pos, &s.neg, lambda, cfg)?;
    Ok((tape.scalar(terms.total), tape.relu_pattern()))
}

/// Compares the tape gradient of the total triplet loss with central
/// differences on a random `fraction` of parameter coordinates. A probe pair
/// that changes the ReLU activation pattern straddles a kink, where the
/// function is not differentiable; such coordinates are redrawn.
pub fn grad_check(
    params: &EncoderParams,
    sample_: &CheckSample,
    epsilon: f64,
    fraction: f64,
    lambda: f64,
    cfg: &LossConfig,
    seed: u64,
) -> Result<GradCheckReport, EncoderError> {
    let mut tape = Tape::new();
    let pv = ParamVars::trainable(&mut tape, params);
    let terms = triplet_terms(&mut tape, &pv, params, &sample_.gt, &sample_.pos, &sample_.neg, lambda, cfg)?;
    let base_pattern = tape.relu_pattern();
    let grads = tape.backward(terms.total);

    let total = params.count();
    let want = ((total as f64 * fraction).ceil() as usize).clamp(1, total);
    let mut r = rng(seed);
    let order = sample(&mut r, total, total);
    let offsets: Vec<usize> = params
        .tensors
        .iter()
        .scan(0, |acc, t| {
            let start = *acc;
            *acc += t.len();
            Some(start)
        })
        .collect();

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
        max_abs_analytic: 0.0,
        max_abs_numeric: 0.0,
    };
    let mut probe = params.clone();
    for flat in order.iter() {
        if report.checked == want {
            break;
        }
        let t = offsets.partition_point(|&o| o <= flat) - 1;
        let local = flat - offsets[t];
        let cols = params.tensors[t].ncols();
        let idx = [local / cols, local % cols];
        let x = params.tensors[t][idx];

        probe.tensors[t][idx] = x + epsilon;
        let (up, up_pattern) = loss_at(&probe, sample_, lambda, cfg)?;
        probe.tensors[t][idx] = x - epsilon;
        let (down, down_pattern) = loss_at(&probe, sample_, lambda, cfg)?;
        probe.tensors[t][idx] = x;
        if up_pattern != base_pattern || down_pattern != base_pattern {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * epsilon);
        let analytic = grads.get(pv.0[t]).map_or(0.0, |g| g[idx]);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR);
        report.max_relative_error = report.max_relative_error.max(rel);
        report.max_abs_analytic = report.max_abs_analytic.max(analytic.abs());
        report.max_abs_numeric = report.max_abs_numeric.max(numeric.abs());
        report.checked += 1;
    }
    Ok(report)
}

/// Central-difference estimate for one flat coordinate.
pub fn numeric_derivative(
    params: &EncoderParams,
    sample_: &CheckSample,
    flat: usize,
    epsilon: f64,
    lambda: f64,
    cfg: &LossConfig,
) -> Result<f64, EncoderError> {
    let mut probe = params.clone();
    let mut rest = flat;
    let t = probe
        .tensors
        .iter()
        .position(|x| {
            if rest < x.len() {
                true
            } else {
                rest -= x.len();
                false
            }
        })
        .ok_or(EncoderError::InvalidConfig(format!("coordinate {flat} out of range")))?;
    let cols = probe.tensors[t].ncols();
    let idx = [rest / cols, rest % cols];
    let x = probe.tensors[t][idx];
    probe.tensors[t][idx] = x + epsilon;
    let up = loss_at(&probe, sample_, lambda, cfg)?.0;
    probe.tensors[t][idx] = x - epsilon;
    let down = loss_at(&probe, sample_, lambda, cfg)?.0;
    Ok((up - down) / (2.0 * epsilon))
}
