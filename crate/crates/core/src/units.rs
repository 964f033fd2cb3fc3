//! Physical constants and unit conversions. Everything inside the crate is SI.

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Sommerfeld value of the Lorenz number, W·Ω/K².
pub const LORENZ_NUMBER: f64 = 2.44e-8;

/// 1 mW/cm² expressed in W/m².
pub const MW_PER_CM2: f64 = 10.0;

pub fn w_per_m2_to_mw_per_cm2(flux: f64) -> f64 {
    flux / MW_PER_CM2
}

pub fn mw_per_cm2_to_w_per_m2(flux: f64) -> f64 {
    flux * MW_PER_CM2
}

/// Phonon Stefan–Boltzmann coefficient for a single branch with speed `v`,
/// i.e. the one-sided flux of a fully transmitting interface is `sigma * T^4`.
pub fn phonon_stefan_boltzmann(speed: f64) -> f64 {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    pi2 * K_B.powi(4) / (120.0 * HBAR.powi(3) * speed * speed)
}
