//! Finite-difference verification of hand-derived gradients.

use std::fmt;

use super::ParamBlock;

/// Anything that owns a fixed, ordered set of parameter blocks.
pub trait ParamSet {
    fn blocks(&self) -> Vec<&ParamBlock>;
    fn blocks_mut(&mut self) -> Vec<&mut ParamBlock>;

    fn zero_grads(&mut self) {
        for b in self.blocks_mut() {
            b.zero_grad();
        }
    }

    fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|b| b.value.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub perturbation: f32,
    /// Lower bound on the relative-error denominator, so that entries whose
    /// true gradient is at the rounding-noise level are compared absolutely.
    pub denominator_floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            perturbation: 1e-3,
            denominator_floor: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub name: String,
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    /// Flat index of the worst entry, with its analytic and numeric values.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.max_relative_error)
            .fold(0.0, f64::max)
    }

    pub fn failing(&self, threshold: f64) -> Vec<&BlockReport> {
        self.blocks
            .iter()
            .filter(|b| !(b.max_relative_error < threshold))
            .collect()
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.failing(threshold).is_empty()
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.blocks {
            writeln!(
                f,
                "{:<32} rel={:.3e} abs={:.3e} (index {} analytic {:.6e} numeric {:.6e})",
                b.name, b.max_relative_error, b.max_absolute_error, b.worst_index, b.analytic, b.numeric
            )?;
        }
        Ok(())
    }
}

/// Compares the gradient written by `backward` against central differences of
/// `loss` for every scalar parameter.
///
/// `backward` must overwrite (not accumulate into) the gradient buffers; they
/// are zeroed before it is called. Parameter values are restored exactly
/// after each probe.
pub fn grad_check<P, L, B>(params: &mut P, options: GradCheckOptions, mut loss: L, mut backward: B) -> GradCheckReport
where
    P: ParamSet,
    L: FnMut(&P) -> f64,
    B: FnMut(&mut P),
{
    params.zero_grads();
    backward(params);
    let analytic: Vec<Vec<f32>> = params
        .blocks()
        .iter()
        .map(|b| b.grad.as_slice().to_vec())
        .collect();

    let h = options.perturbation;
    let mut reports = Vec::with_capacity(analytic.len());
    for (bi, grads) in analytic.iter().enumerate() {
        let name = params.blocks()[bi].name.clone();
        let mut report = BlockReport {
            name,
            max_relative_error: 0.0,
            max_absolute_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for (i, &a) in grads.iter().enumerate() {
            let original = params.blocks()[bi].value.as_slice()[i];
            let (up, down) = (original + h, original - h);
            set_value(params, bi, i, up);
            let plus = loss(params);
            set_value(params, bi, i, down);
            let minus = loss(params);
            set_value(params, bi, i, original);

            // Divide by the step actually taken after f32 rounding.
            let numeric = (plus - minus) / (up as f64 - down as f64);
            let a = a as f64;
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(options.denominator_floor);
            let rel = if rel.is_nan() { f64::INFINITY } else { rel };
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
            report.max_absolute_error = report.max_absolute_error.max(abs);
        }
        reports.push(report);
    }
    GradCheckReport { blocks: reports }
}

fn set_value<P: ParamSet>(params: &mut P, block: usize, index: usize, v: f32) {
    params.blocks_mut()[block].value.as_mut_slice()[index] = v;
}
