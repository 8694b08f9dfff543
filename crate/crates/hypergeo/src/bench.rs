//! Wall-clock timing of pulse synthesis, with the linear scaling fit
//! against anticrossing count.
//!
//! Timings are medians with interquartile ranges over repeated serial
//! runs after a warmup; absolute numbers depend on the host and are not
//! comparable across machines, but the scaling trends are.

use crate::error::{Error, Result};
use crate::models::{AllToAll, Model, PeriodicLz};
use crate::synthesis::synthesize_pulse;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

/// Repetition plan: `warmup` unmeasured runs, then `reps` measured ones.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BenchSpec {
    pub warmup: usize,
    pub reps: usize,
}

impl BenchSpec {
    fn validate(&self) -> Result<()> {
        if self.warmup < 1 {
            return Err(Error::InvalidArgument(format!(
                "warmup must be at least 1, got {}",
                self.warmup
            )));
        }
        if self.reps < 5 {
            return Err(Error::InvalidArgument(format!(
                "repetitions must be at least 5, got {}",
                self.reps
            )));
        }
        Ok(())
    }
}

/// Quantile by linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Timing {
    pub median_s: f64,
    pub iqr_s: f64,
}

fn time_runs(spec: &BenchSpec, mut work: impl FnMut() -> Result<()>) -> Result<Timing> {
    for _ in 0..spec.warmup {
        work()?;
    }
    let mut times = Vec::with_capacity(spec.reps);
    for _ in 0..spec.reps {
        let start = Instant::now();
        work()?;
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(Timing {
        median_s: quantile(&times, 0.5),
        iqr_s: quantile(&times, 0.75) - quantile(&times, 0.25),
    })
}

/// Least-squares line y = intercept + slope x with its coefficient of
/// determination.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "fit needs matching samples, at least 3, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidArgument(
            "fit abscissae are all identical".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(u, v)| {
            let e = v - (intercept + slope * u);
            e * e
        })
        .sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        r2,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PairTiming {
    pub alpha: f64,
    pub beta: f64,
    pub median_s: f64,
    pub iqr_s: f64,
}

/// Synthesis time per (alpha, beta) pair on a fixed model and window.
/// Runs are strictly serial so repetitions do not contend.
pub fn time_alpha_beta(
    model: &dyn Model,
    pairs: &[(f64, f64)],
    m: usize,
    lambda0: f64,
    lambda1: f64,
    n_samples: usize,
    spec: &BenchSpec,
) -> Result<Vec<PairTiming>> {
    spec.validate()?;
    pairs
        .iter()
        .map(|&(alpha, beta)| {
            let t = time_runs(spec, || {
                synthesize_pulse(model, alpha, beta, m, lambda0, lambda1, n_samples).map(|_| ())
            })?;
            Ok(PairTiming {
                alpha,
                beta,
                median_s: t.median_s,
                iqr_s: t.iqr_s,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AnticrossingTiming {
    pub anticrossings: usize,
    pub median_s: f64,
    pub iqr_s: f64,
}

/// Detuning window of the cosine-driven two-level model that contains
/// exactly `count` gap minima: the gap 2 sqrt(cos^2 z + x^2) bottoms out
/// at odd multiples of pi/2, and [-pi/4, count pi - pi/4] holds the first
/// `count` of them.
pub fn anticrossing_window(count: usize) -> (f64, f64) {
    (-PI / 4.0, count as f64 * PI - PI / 4.0)
}

/// Synthesis time against the number of anticrossings swept through, with
/// the least-squares line through the medians. Sample density is fixed per
/// anticrossing, not in total: the window grows with the count, and a
/// constant total budget would quietly degrade per-anticrossing resolution
/// instead of measuring the marginal cost of one more anticrossing.
pub fn time_anticrossings(
    x: f64,
    counts: &[usize],
    samples_per_anticrossing: usize,
    spec: &BenchSpec,
) -> Result<(Vec<AnticrossingTiming>, LinearFit)> {
    spec.validate()?;
    if counts.iter().any(|&k| k == 0) {
        return Err(Error::InvalidArgument(
            "anticrossing counts must be positive".into(),
        ));
    }
    let model = PeriodicLz { x };
    let rows = counts
        .iter()
        .map(|&k| {
            let (lo, hi) = anticrossing_window(k);
            let n_samples = (k * samples_per_anticrossing + 1).max(65);
            let t = time_runs(spec, || {
                synthesize_pulse(&model, 2.0, 2.0, 0, lo, hi, n_samples).map(|_| ())
            })?;
            Ok(AnticrossingTiming {
                anticrossings: k,
                median_s: t.median_s,
                iqr_s: t.iqr_s,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ks: Vec<f64> = rows.iter().map(|r| r.anticrossings as f64).collect();
    let ts: Vec<f64> = rows.iter().map(|r| r.median_s).collect();
    let fit = linear_fit(&ks, &ts)?;
    Ok((rows, fit))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SizeTiming {
    /// Full system size; sets the sweep span z0 = N (x + delta/3).
    pub n_states: usize,
    /// Retained states around the tracked one; the diagonalized dimension.
    pub k_max: usize,
    pub median_s: f64,
    pub iqr_s: f64,
}

/// All-to-all synthesis timed against the retained-state count k_max for
/// each full size N. The tracked state sits in the middle of the retained
/// window.
pub fn time_system_size(
    x: f64,
    delta: f64,
    scan: &[(usize, usize)],
    n_samples: usize,
    spec: &BenchSpec,
) -> Result<Vec<SizeTiming>> {
    spec.validate()?;
    scan.iter()
        .map(|&(n, k)| {
            if k < 2 || k > n {
                return Err(Error::InvalidArgument(format!(
                    "retained states must satisfy 2 <= k_max <= N, got k_max={k}, N={n}"
                )));
            }
            let model = AllToAll { x, delta, n: k };
            let z0 = n as f64 * (x + delta / 3.0);
            let t = time_runs(spec, || {
                synthesize_pulse(&model, 2.0, 2.0, k / 2, -z0, z0, n_samples).map(|_| ())
            })?;
            Ok(SizeTiming {
                n_states: n,
                k_max: k,
                median_s: t.median_s,
                iqr_s: t.iqr_s,
            })
        })
        .collect()
}

/// All scans in one serializable artifact; skipped scans stay empty.
#[derive(Clone, Serialize)]
pub struct BenchReport {
    pub warmup: usize,
    pub reps: usize,
    pub n_samples: usize,
    pub pairs: Vec<PairTiming>,
    pub anticrossings: Vec<AnticrossingTiming>,
    pub anticrossing_fit: Option<LinearFit>,
    pub sizes: Vec<SizeTiming>,
}

/// CSV rows (scan, param_a, param_b, median_s, iqr_s); the anticrossing
/// fit goes into header comments.
pub fn write_bench_csv(report: &BenchReport, w: &mut impl Write) -> Result<()> {
    writeln!(w, "# warmup={} reps={}", report.warmup, report.reps)?;
    if let Some(fit) = &report.anticrossing_fit {
        writeln!(
            w,
            "# anticrossing_fit: slope={} intercept={} r2={}",
            fit.slope, fit.intercept, fit.r2
        )?;
    }
    writeln!(w, "scan,param_a,param_b,median_s,iqr_s")?;
    for p in &report.pairs {
        writeln!(
            w,
            "alpha_beta,{},{},{},{}",
            p.alpha, p.beta, p.median_s, p.iqr_s
        )?;
    }
    for a in &report.anticrossings {
        writeln!(
            w,
            "anticrossings,{},,{},{}",
            a.anticrossings, a.median_s, a.iqr_s
        )?;
    }
    for s in &report.sizes {
        writeln!(
            w,
            "system_size,{},{},{},{}",
            s.n_states, s.k_max, s.median_s, s.iqr_s
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::spectrum;

    #[test]
    fn timing_plan_rejects_thin_sampling() {
        let thin = BenchSpec { warmup: 0, reps: 5 };
        assert!(matches!(
            thin.validate(),
            Err(Error::InvalidArgument(_))
        ));
        let few = BenchSpec { warmup: 1, reps: 4 };
        assert!(matches!(few.validate(), Err(Error::InvalidArgument(_))));
        assert!(BenchSpec { warmup: 1, reps: 5 }.validate().is_ok());
    }

    #[test]
    fn linear_fit_recovers_an_exact_line() {
        let x: Vec<f64> = (1..=6).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.23 + 0.04 * v).collect();
        let fit = linear_fit(&x, &y).unwrap();
        assert!((fit.slope - 0.04).abs() < 1e-12);
        assert!((fit.intercept - 0.23).abs() < 1e-12);
        assert!(fit.r2 > 1.0 - 1e-12);

        assert!(linear_fit(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(linear_fit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn quantiles_interpolate_order_statistics() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&v, 0.75), 4.0);
        let w = [1.0, 2.0, 4.0, 8.0];
        assert_eq!(quantile(&w, 0.5), 3.0);
    }

    #[test]
    fn anticrossing_windows_hold_exactly_the_advertised_minima() {
        let model = PeriodicLz { x: 0.5 };
        for count in [1usize, 3, 4] {
            let (lo, hi) = anticrossing_window(count);
            let n = 2048;
            let gaps: Vec<f64> = (0..=n)
                .map(|i| {
                    let z = lo + (hi - lo) * i as f64 / n as f64;
                    spectrum(&model, &[z], None).unwrap().gap(1, 0)
                })
                .collect();
            let minima = gaps
                .windows(3)
                .filter(|w| w[1] < w[0] && w[1] < w[2])
                .count();
            assert_eq!(minima, count, "window for count={count}");
        }
    }

    #[test]
    fn timings_come_back_finite_ordered_and_positive() {
        let spec = BenchSpec { warmup: 1, reps: 5 };
        let model = crate::models::LandauZener { x: 1.0 };
        let pairs = [(4.0, 0.0), (2.0, 2.0)];
        let rows = time_alpha_beta(&model, &pairs, 0, -10.0, 10.0, 128, &spec).unwrap();
        assert_eq!(rows.len(), 2);
        for (r, &(a, b)) in rows.iter().zip(pairs.iter()) {
            assert_eq!((r.alpha, r.beta), (a, b));
            assert!(r.median_s > 0.0 && r.median_s.is_finite());
            assert!(r.iqr_s >= 0.0);
        }
    }

    #[test]
    fn size_scan_validates_the_retained_window() {
        let spec = BenchSpec { warmup: 1, reps: 5 };
        assert!(matches!(
            time_system_size(1.0, 5.0, &[(4, 1)], 128, &spec),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            time_system_size(1.0, 5.0, &[(4, 5)], 128, &spec),
            Err(Error::InvalidArgument(_))
        ));
        let rows = time_system_size(1.0, 5.0, &[(4, 3)], 128, &spec).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].n_states, rows[0].k_max), (4, 3));
        assert!(rows[0].median_s > 0.0);
    }
}
