//! Measurement-side pipeline: sensor calibration, heat-integral extraction,
//! offset alignment and outlier handling.

pub mod calibration;
pub mod curve;
pub mod extraction;
pub mod sequence;
pub mod synthetic;

pub use calibration::{
    calibrate_sequences, loocv_check, CalibrationError, CalibrationOutcome, SensorCalibration,
    SensorSet,
};
pub use curve::{CurveError, HeatIntegralCurve, InterpolationSpace};
pub use extraction::{
    align_offsets, auto_flag_outliers, exclude_outliers, extract_heat_integral,
    pairwise_disagreement, ConvergenceReport, ExtractionError, ExtractionOptions,
    IterationDeviation, OutlierReport, SetpointExtraction,
};
pub use sequence::{
    CalibratedPoint, CalibratedSequence, MeasurementPoint, MeasurementSequence, ReadingUnit,
    SequenceError,
};
