//! Monotone (shape-preserving) cubic interpolation on non-uniform grids,
//! Fritsch-Carlson node slopes. Used for arclength inversion, where the
//! interpolant must stay strictly monotone between data points.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    /// `x` strictly increasing, same length as `y`, at least 2 points.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::InvalidArgument(
                "interpolation needs >= 2 points with matching lengths".into(),
            ));
        }
        for w in x.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InversionFailure(format!(
                    "abscissae not strictly increasing near x = {}",
                    w[0]
                )));
            }
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];

        // Interior slopes: Fritsch-Carlson weighted harmonic mean, zero at
        // local extrema so each cubic piece stays monotone.
        for i in 1..n - 1 {
            if slope[i - 1] * slope[i] <= 0.0 {
                d[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / slope[i - 1] + w2 / slope[i]);
            }
        }
        d[0] = endpoint_slope(h[0], h.get(1).copied().unwrap_or(h[0]), slope[0], slope.get(1).copied().unwrap_or(slope[0]));
        d[n - 1] = endpoint_slope(
            h[n - 2],
            if n >= 3 { h[n - 3] } else { h[n - 2] },
            slope[n - 2],
            if n >= 3 { slope[n - 3] } else { slope[n - 2] },
        );
        Ok(Self { x, y, d })
    }

    fn cell(&self, xq: f64) -> usize {
        match self
            .x
            .binary_search_by(|v| v.partial_cmp(&xq).unwrap())
        {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        }
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let i = self.cell(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = ((xq - self.x[i]) / h).clamp(0.0, 1.0);
        let (y0, y1, d0, d1) = (self.y[i], self.y[i + 1], self.d[i], self.d[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    }

    pub fn derivative(&self, xq: f64) -> f64 {
        let i = self.cell(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = ((xq - self.x[i]) / h).clamp(0.0, 1.0);
        let (y0, y1, d0, d1) = (self.y[i], self.y[i + 1], self.d[i], self.d[i + 1]);
        let t2 = t * t;
        let dh00 = 6.0 * t2 - 6.0 * t;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = -6.0 * t2 + 6.0 * t;
        let dh11 = 3.0 * t2 - 2.0 * t;
        (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }
}

/// Standard PCHIP one-sided endpoint formula with monotonicity clamping.
fn endpoint_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d * s0 <= 0.0 {
        0.0
    } else if s0 * s1 < 0.0 && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}
