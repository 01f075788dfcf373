//! Dataset ingestion, synthetic data, autoscaling and report persistence.

pub mod artif;
pub mod csv_table;
pub mod report;

use ndarray::{Array1, Axis};

use crate::dataset::Dataset;
use crate::jacobian::WeightVector;

pub use artif::{generate_artif, ArtifConfig, ArtifData, ArtifTruth};
pub use csv_table::{load_dataset_csv, write_dataset_csv, CsvOptions};
pub use report::{read_report, write_report};

/// Sample standard deviation (denominator `m - 1`) of every channel.
pub fn channel_std(data: &Dataset) -> Array1<f64> {
    data.x.std_axis(Axis(0), 1.0)
}

/// Autoscaling start point `lambda_j = 1 / sd_j`. Constant channels get the
/// median of the other channels' values, or 1 when every channel is
/// constant.
pub fn autoscale_weights(data: &Dataset) -> WeightVector {
    let sd = channel_std(data);
    let mut finite: Vec<f64> = sd
        .iter()
        .filter(|&&s| s > 0.0)
        .map(|s| 1.0 / s)
        .filter(|v| v.is_finite())
        .collect();
    let guard = if finite.is_empty() {
        1.0
    } else {
        finite.sort_by(f64::total_cmp);
        let h = finite.len() / 2;
        if finite.len() % 2 == 1 {
            finite[h]
        } else {
            0.5 * (finite[h - 1] + finite[h])
        }
    };
    WeightVector(sd.mapv(|s| {
        let v = 1.0 / s;
        if s > 0.0 && v.is_finite() {
            v
        } else {
            guard
        }
    }))
}
