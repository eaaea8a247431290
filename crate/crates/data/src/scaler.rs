use serde::{Deserialize, Serialize};

use crate::{DataError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerKind {
    None,
    MinMax,
    ZScore,
}

/// Data transform parameters, always fitted on training-split statistics.
/// MinMax maps the training minimum to 0 and maximum to 1; ZScore uses the
/// population standard deviation sqrt(sum (y - mean)^2 / n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScalerParams {
    None,
    MinMax { min: f64, max: f64 },
    ZScore { mean: f64, std: f64 },
}

/// Fits transform statistics over every value of the supplied (training)
/// fields.
pub fn fit_scaler<'a, I>(train_fields: I, kind: ScalerKind) -> Result<ScalerParams>
where
    I: IntoIterator<Item = &'a [f32]>,
{
    match kind {
        ScalerKind::None => Ok(ScalerParams::None),
        ScalerKind::MinMax => {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for field in train_fields {
                for &v in field {
                    lo = lo.min(v as f64);
                    hi = hi.max(v as f64);
                }
            }
            if !(hi > lo) {
                return Err(DataError::DegenerateScaler(format!(
                    "minmax needs max > min, got [{lo}, {hi}]"
                )));
            }
            Ok(ScalerParams::MinMax { min: lo, max: hi })
        }
        ScalerKind::ZScore => {
            let mut n = 0usize;
            let mut sum = 0.0f64;
            let mut fields_copy = Vec::new();
            for field in train_fields {
                for &v in field {
                    sum += v as f64;
                    n += 1;
                }
                fields_copy.push(field);
            }
            if n == 0 {
                return Err(DataError::DegenerateScaler("no values".into()));
            }
            let mean = sum / n as f64;
            let mut sq = 0.0f64;
            for field in &fields_copy {
                for &v in *field {
                    let d = v as f64 - mean;
                    sq += d * d;
                }
            }
            let std = (sq / n as f64).sqrt();
            if std == 0.0 {
                return Err(DataError::DegenerateScaler(
                    "zscore needs std > 0 (constant field)".into(),
                ));
            }
            Ok(ScalerParams::ZScore { mean, std })
        }
    }
}

impl ScalerParams {
    pub fn apply(&self, y: f64) -> f64 {
        match *self {
            ScalerParams::None => y,
            ScalerParams::MinMax { min, max } => (y - min) / (max - min),
            ScalerParams::ZScore { mean, std } => (y - mean) / std,
        }
    }

    pub fn invert(&self, s: f64) -> f64 {
        match *self {
            ScalerParams::None => s,
            ScalerParams::MinMax { min, max } => s * (max - min) + min,
            ScalerParams::ZScore { mean, std } => s * std + mean,
        }
    }

    pub fn apply_f32(&self, values: &[f32]) -> Vec<f32> {
        values
            .iter()
            .map(|&v| self.apply(v as f64) as f32)
            .collect()
    }

    pub fn invert_f32(&self, values: &[f32]) -> Vec<f32> {
        values
            .iter()
            .map(|&v| self.invert(v as f64) as f32)
            .collect()
    }
}
