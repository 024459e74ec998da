//! Linear state estimation: phasor-domain least squares over `I = Y·V`
//! and time-domain least squares over the discretized line dynamics.

mod phasor;
mod spec;
mod trajectory;

use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};

pub use phasor::{
    estimate_phasor_state, min_norm_estimate, observability_check, BatchResidual, MeasurementSet,
    ObservabilityReport, PartitionedModel, StateEstimate,
};
pub use spec::{MeasurementSpec, SpecWeights};
pub use trajectory::{
    estimate_time_domain_state, TrajectoryEstimate, TrajectoryMeasurements, TrajectoryProblem,
};

/// Average normalized residual error.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    /// Mean of per-channel `‖measured − predicted‖ / ‖measured‖`, percent.
    pub percent: f64,
    /// Channels that entered the mean.
    pub channels: usize,
    /// Channels skipped because their measured norm is zero.
    pub excluded: Vec<usize>,
}

/// Residual over channels given as `(‖measured‖, ‖measured − predicted‖)`.
pub fn channel_residual(norms: impl IntoIterator<Item = (f64, f64)>) -> Residual {
    let mut sum = 0.0;
    let mut used = 0;
    let mut excluded = Vec::new();
    for (k, (m, e)) in norms.into_iter().enumerate() {
        if m == 0.0 {
            excluded.push(k);
        } else {
            sum += e / m;
            used += 1;
        }
    }
    if !excluded.is_empty() {
        log::warn!("{} zero-norm channel(s) excluded from the residual", excluded.len());
    }
    Residual {
        percent: if used == 0 { 0.0 } else { 100.0 * sum / used as f64 },
        channels: used,
        excluded,
    }
}

/// Residual between two `samples × channels` matrices; each column is one
/// channel.
pub fn residual_metric<T>(measured: &DMatrix<T>, predicted: &DMatrix<T>) -> Result<Residual>
where
    T: ComplexField<RealField = f64>,
{
    if measured.shape() != predicted.shape() {
        return Err(Error::Dimension(format!(
            "measured is {:?}, predicted is {:?}",
            measured.shape(),
            predicted.shape()
        )));
    }
    Ok(channel_residual((0..measured.ncols()).map(|j| {
        let m = measured.column(j);
        (m.norm(), (m - predicted.column(j)).norm())
    })))
}

#[cfg(test)]
mod tests;
