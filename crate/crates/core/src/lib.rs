//! Phonon heat transport through Bragg-reflector stacks and the cryogenic
//! measurement analysis around it.
//!
//! * [`materials`]: acoustic and bulk-thermal material data.
//! * [`acoustics`]: transfer-matrix transmission and stack generators.
//! * [`thermal`]: spectral integration of the transmission into heat fluxes.
//! * [`analysis`]: sensor calibration and self-consistent heat-integral
//!   extraction from heater sweeps.
//! * [`budget`]: closed-form packaging heat-load estimates.
//! * [`optimizer`]: geometry search over graded bilayer stacks.

pub mod acoustics;
pub mod analysis;
pub mod budget;
pub mod interp;
pub mod io;
pub mod materials;
pub mod optimizer;
pub mod quadrature;
pub mod thermal;
pub mod units;

pub use acoustics::{
    fit_total_thickness, generate_stack, transmission, GeometryKind, Layer, LayerStack,
    StackConfig, StackGeometrySpec,
};
pub use analysis::{
    align_offsets, calibrate_sequences, exclude_outliers, extract_heat_integral, loocv_check,
    CalibratedSequence, ConvergenceReport, ExtractionOptions, HeatIntegralCurve,
    InterpolationSpace, MeasurementSequence, SensorCalibration,
};
pub use materials::{BulkConductivityTable, Material, MaterialRegistry, Polarization};
pub use thermal::{net_flux, one_sided_flux, simulate_curve, SimulatedHeatCurve, SpectralGrid};
