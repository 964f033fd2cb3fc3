//! Fixtures shared by the benchmarks.

use cryodbr::acoustics::{generate_stack, LayerStack, StackGeometrySpec};
use cryodbr::analysis::synthetic::SyntheticConfig;
use cryodbr::analysis::{calibrate_sequences, CalibratedSequence};
use cryodbr::materials::MaterialRegistry;

/// Periodic Ta/SiO2 stack with `n` bilayers of 30 nm + 30 nm between Si.
pub fn ta_sio2_stack(n: usize) -> LayerStack {
    let reg = MaterialRegistry::builtin();
    let get = |name: &str| reg.get(name).expect("builtin material").clone();
    let spec = StackGeometrySpec::periodic(get("Ta"), get("SiO2"), n, 30e-9, 30e-9);
    generate_stack(&spec, &get("Si"), &get("Si")).expect("valid stack")
}

/// Calibrated sweeps of the default synthetic measurement set.
pub fn synthetic_sweeps() -> Vec<CalibratedSequence> {
    let data = SyntheticConfig::default().generate().expect("default config");
    calibrate_sequences(&data.sequences, Some(&data.reference))
        .expect("synthetic calibration")
        .sequences
}
