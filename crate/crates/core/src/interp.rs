//! One-dimensional interpolants: monotone piecewise-cubic Hermite (PCHIP,
//! Fritsch–Carlson) and piecewise-linear. Both extrapolate linearly with the
//! slope of the end segment.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("need at least {needed} knots, got {got}")]
    TooFewKnots { needed: usize, got: usize },
    #[error("abscissae must be finite and strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("non-finite ordinate at index {0}")]
    NonFinite(usize),
    #[error("x and y lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

fn validate(xs: &[f64], ys: &[f64]) -> Result<(), InterpError> {
    if xs.len() != ys.len() {
        return Err(InterpError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(InterpError::TooFewKnots {
            needed: 2,
            got: xs.len(),
        });
    }
    for i in 0..xs.len() {
        if !xs[i].is_finite() || (i > 0 && xs[i] <= xs[i - 1]) {
            return Err(InterpError::NotIncreasing(i));
        }
        if !ys[i].is_finite() {
            return Err(InterpError::NonFinite(i));
        }
    }
    Ok(())
}

/// Which side of the knot range a query fell on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Below,
    Inside,
    Above,
}

fn locate(xs: &[f64], x: f64) -> (usize, Side) {
    let n = xs.len();
    if x < xs[0] {
        return (0, Side::Below);
    }
    if x > xs[n - 1] {
        return (n - 2, Side::Above);
    }
    // partition_point gives the first knot > x
    let i = xs.partition_point(|&k| k <= x);
    (i.saturating_sub(1).min(n - 2), Side::Inside)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, InterpError> {
        validate(&xs, &ys)?;
        Ok(PiecewiseLinear { xs, ys })
    }

    pub fn eval_with_side(&self, x: f64) -> (f64, Side) {
        let (i, side) = locate(&self.xs, x);
        let slope = (self.ys[i + 1] - self.ys[i]) / (self.xs[i + 1] - self.xs[i]);
        (self.ys[i] + slope * (x - self.xs[i]), side)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_side(x).0
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }
}

/// Monotone piecewise-cubic Hermite interpolant.
///
/// Knot derivatives start from the three-point estimate and are then limited
/// with the Fritsch–Carlson circle condition `α² + β² ≤ 9` so that monotone
/// data produce a monotone, C¹ interpolant without overshoot.
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl Pchip {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, InterpError> {
        validate(&xs, &ys)?;
        let ds = fritsch_carlson_slopes(&xs, &ys);
        Ok(Pchip { xs, ys, ds })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    pub fn slopes(&self) -> &[f64] {
        &self.ds
    }

    fn end_secant(&self, i: usize) -> f64 {
        (self.ys[i + 1] - self.ys[i]) / (self.xs[i + 1] - self.xs[i])
    }

    pub fn eval_with_side(&self, x: f64) -> (f64, Side) {
        let (i, side) = locate(&self.xs, x);
        let v = match side {
            Side::Below => self.ys[0] + self.end_secant(0) * (x - self.xs[0]),
            Side::Above => {
                let n = self.xs.len();
                self.ys[n - 1] + self.end_secant(n - 2) * (x - self.xs[n - 1])
            }
            Side::Inside => {
                let h = self.xs[i + 1] - self.xs[i];
                let t = (x - self.xs[i]) / h;
                let t2 = t * t;
                let t3 = t2 * t;
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = t3 - 2.0 * t2 + t;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = t3 - t2;
                h00 * self.ys[i] + h10 * h * self.ds[i] + h01 * self.ys[i + 1] + h11 * h * self.ds[i + 1]
            }
        };
        (v, side)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_side(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (i, side) = locate(&self.xs, x);
        match side {
            Side::Below => self.end_secant(0),
            Side::Above => self.end_secant(self.xs.len() - 2),
            Side::Inside => {
                let h = self.xs[i + 1] - self.xs[i];
                let t = (x - self.xs[i]) / h;
                let t2 = t * t;
                let dh00 = (6.0 * t2 - 6.0 * t) / h;
                let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
                let dh01 = (-6.0 * t2 + 6.0 * t) / h;
                let dh11 = 3.0 * t2 - 2.0 * t;
                dh00 * self.ys[i] + dh10 * self.ds[i] + dh01 * self.ys[i + 1] + dh11 * self.ds[i + 1]
            }
        }
    }
}

fn fritsch_carlson_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }

    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            // three-point (non-centred) estimate
            d[i] = (h[i] * delta[i - 1] + h[i - 1] * delta[i]) / (h[i - 1] + h[i]);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);

    for i in 0..n - 1 {
        if delta[i] == 0.0 {
            d[i] = 0.0;
            d[i + 1] = 0.0;
            continue;
        }
        let a = d[i] / delta[i];
        let b = d[i + 1] / delta[i];
        // a sign flip would already have zeroed the derivative; guard anyway
        if a < 0.0 {
            d[i] = 0.0;
        }
        if b < 0.0 {
            d[i + 1] = 0.0;
        }
        let r2 = a * a + b * b;
        if r2 > 9.0 {
            let tau = 3.0 / r2.sqrt();
            d[i] = tau * a * delta[i];
            d[i + 1] = tau * b * delta[i];
        }
    }
    d
}

/// Shape-preserving one-sided three-point end derivative.
fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_linear_data_exactly() {
        let xs: Vec<f64> = vec![0.0, 0.3, 1.0, 1.7, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let p = Pchip::new(xs, ys).unwrap();
        for x in [-1.0, 0.1, 0.5, 2.2, 3.9, 6.0] {
            assert!((p.eval(x) - (2.0 * x - 1.0)).abs() < 1e-12);
            assert!((p.derivative(x) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_segment_stays_flat() {
        let p = Pchip::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 1.0, 2.0]).unwrap();
        for k in 0..=20 {
            let x = 1.0 + k as f64 / 20.0;
            assert!((p.eval(x) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(matches!(
            Pchip::new(vec![1.0], vec![1.0]),
            Err(InterpError::TooFewKnots { .. })
        ));
        assert!(matches!(
            Pchip::new(vec![0.0, 0.0], vec![1.0, 2.0]),
            Err(InterpError::NotIncreasing(1))
        ));
        assert!(PiecewiseLinear::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn linear_extrapolation_flags_side() {
        let l = PiecewiseLinear::new(vec![0.0, 1.0, 3.0], vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(l.eval_with_side(5.0), (3.0, Side::Above));
        assert_eq!(l.eval_with_side(-1.0), (-1.0, Side::Below));
        assert_eq!(l.eval_with_side(2.0), (1.5, Side::Inside));
    }

    fn monotone_knots() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        prop::collection::vec((0.01f64..2.0, 0.0f64..3.0), 2..25).prop_map(|steps| {
            let mut x = 0.0;
            let mut y = -1.0;
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (dx, dy) in steps {
                x += dx;
                y += dy;
                xs.push(x);
                ys.push(y);
            }
            (xs, ys)
        })
    }

    proptest! {
        #[test]
        fn interpolates_knots((xs, ys) in monotone_knots()) {
            let p = Pchip::new(xs.clone(), ys.clone()).unwrap();
            for (x, y) in xs.iter().zip(&ys) {
                prop_assert!((p.eval(*x) - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn monotone_without_overshoot((xs, ys) in monotone_knots()) {
            let p = Pchip::new(xs.clone(), ys.clone()).unwrap();
            for i in 0..xs.len() - 1 {
                let mut prev = ys[i];
                for k in 1..=16 {
                    let x = xs[i] + (xs[i + 1] - xs[i]) * k as f64 / 16.0;
                    let v = p.eval(x);
                    prop_assert!(v >= prev - 1e-12);
                    prop_assert!(v >= ys[i] - 1e-12 && v <= ys[i + 1] + 1e-12);
                    prev = v;
                }
                prop_assert!(p.derivative(xs[i] + 0.5 * (xs[i + 1] - xs[i])) >= -1e-12);
            }
        }

        #[test]
        fn derivative_continuous_at_knots((xs, ys) in monotone_knots()) {
            let p = Pchip::new(xs.clone(), ys.clone()).unwrap();
            for i in 1..xs.len() - 1 {
                let h = (xs[i] - xs[i - 1]).min(xs[i + 1] - xs[i]);
                let eps = 1e-9 * h;
                let left = p.derivative(xs[i] - eps);
                let right = p.derivative(xs[i] + eps);
                let steepest = ((ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]))
                    .max((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]));
                let scale = 1.0 + steepest.abs();
                prop_assert!((left - right).abs() < 1e-5 * scale, "{} vs {}", left, right);
            }
        }
    }
}
