//! Control-electronics constraints on synthesized pulses: causal
//! Butterworth filtering, slew-rate extraction, and short-time-Fourier
//! bandwidth.
//!
//! Filtering is single-pass, magnitude and phase together. A hardware
//! filter delays the pulse, so a zero-phase forward-backward pass would
//! flatter the electronics; the delayed output here is the honest one.

use crate::dynamics::{eigenstate, evolve_lindblad};
use crate::error::{Error, Result};
use crate::hypergeometry::metric_single;
use crate::models::Model;
use crate::numerics::{special, C64};
use crate::synthesis::{synthesize_pulse, PulseKind, PulseProfile};
use ndarray::Array2;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;
use std::f64::consts::{PI, TAU};
use std::io::Write;

/// Low-pass Butterworth description. `f_c` is the cutoff in cycles per unit
/// time, in the same time units as the pulse duration.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FilterSpec {
    pub order: usize,
    pub f_c: f64,
}

impl FilterSpec {
    /// Third-order filter, the usual control-electronics model.
    pub fn new(f_c: f64) -> Self {
        FilterSpec { order: 3, f_c }
    }

    fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::InvalidArgument(format!(
                "filter order must be at least 1, got {}",
                self.order
            )));
        }
        if !(self.f_c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cutoff frequency must be positive, got {}",
                self.f_c
            )));
        }
        Ok(())
    }

    /// Complex response at signed angular frequency omega: 1 / B_n(i w) with
    /// w = omega/omega_c and the normalized Butterworth poles, so the gain is
    /// 1/sqrt(1 + w^(2n)) and the phase is the causal one. Unit DC gain.
    fn response(&self, omega: f64) -> C64 {
        let s = C64::new(0.0, omega / (TAU * self.f_c));
        let n = self.order;
        let mut denom = C64::new(1.0, 0.0);
        for k in 1..=n {
            let angle = PI * (2 * k + n - 1) as f64 / (2 * n) as f64;
            denom *= s - C64::new(angle.cos(), angle.sin());
        }
        C64::new(1.0, 0.0) / denom
    }

    /// Decay time of the slowest pole, which sets how long transients ring.
    fn settle_time(&self) -> f64 {
        1.0 / (TAU * self.f_c * (PI / (2 * self.order) as f64).sin())
    }
}

fn require_uniform(pulse: &PulseProfile) -> Result<usize> {
    let n = pulse.tau.len();
    if n != pulse.lambda.len() || n < 64 {
        return Err(Error::GridTooCoarse(format!(
            "pulse needs at least 64 matched samples, got {} tau / {} lambda",
            n,
            pulse.lambda.len()
        )));
    }
    let n1 = (n - 1) as f64;
    for (j, &t) in pulse.tau.iter().enumerate() {
        if (t - j as f64 / n1).abs() > 1e-9 {
            return Err(Error::InvalidArgument(
                "pulse must be sampled uniformly in time".into(),
            ));
        }
    }
    Ok(n)
}

/// Run the pulse through the filter at physical duration `t_f`.
///
/// The samples are padded on both sides with the boundary values (the
/// control sits at its endpoints before and after the sweep), transformed,
/// multiplied by the complex response, and transformed back; the pad is
/// sized so wrap-around transients decay below roundoff before reaching the
/// window. The output keeps the protocol boundaries in `lambda0`/`lambda1`
/// as intent metadata even though the delayed samples no longer reach them,
/// and drops the path-length metadata since the result is not a geodesic.
pub fn butterworth_apply(
    pulse: &PulseProfile,
    t_f: f64,
    spec: &FilterSpec,
) -> Result<PulseProfile> {
    spec.validate()?;
    if !(t_f > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "t_f must be positive, got {t_f}"
        )));
    }
    let n = require_uniform(pulse)?;
    let dt = t_f / (n - 1) as f64;
    let nyquist = 0.5 / dt;
    if spec.f_c > nyquist / 4.0 {
        return Err(Error::GridTooCoarse(format!(
            "cutoff {} above a quarter of the Nyquist frequency {:.3e}; refine the grid",
            spec.f_c, nyquist
        )));
    }

    let pad = ((25.0 * spec.settle_time() / dt).ceil() as usize).clamp(n / 2, 1 << 22);
    let total = n + 2 * pad;
    let mut buf: Vec<C64> = Vec::with_capacity(total);
    buf.extend(std::iter::repeat(C64::new(pulse.lambda[0], 0.0)).take(pad));
    buf.extend(pulse.lambda.iter().map(|&v| C64::new(v, 0.0)));
    buf.extend(std::iter::repeat(C64::new(pulse.lambda[n - 1], 0.0)).take(pad));

    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(total).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let cycles = if 2 * k <= total {
            k as f64
        } else {
            k as f64 - total as f64
        };
        *v *= spec.response(TAU * cycles / (total as f64 * dt));
    }
    planner.plan_fft_inverse(total).process(&mut buf);
    let scale = 1.0 / total as f64;
    let lambda: Vec<f64> = buf[pad..pad + n].iter().map(|v| v.re * scale).collect();

    Ok(PulseProfile {
        model: pulse.model.clone(),
        label: format!("{} (filtered)", pulse.label),
        kind: PulseKind::Geodesic,
        alpha: pulse.alpha,
        beta: pulse.beta,
        n_plus: pulse.n_plus,
        n_minus: pulse.n_minus,
        delta: f64::NAN,
        lambda0: pulse.lambda0,
        lambda1: pulse.lambda1,
        state_index: pulse.state_index,
        tau: pulse.tau.clone(),
        lambda,
    })
}

fn max_abs_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len();
    let mut best = ((y[1] - y[0]) / (t[1] - t[0])).abs();
    for j in 1..n - 1 {
        best = best.max(((y[j + 1] - y[j - 1]) / (t[j + 1] - t[j - 1])).abs());
    }
    best.max(((y[n - 1] - y[n - 2]) / (t[n - 1] - t[n - 2])).abs())
}

const SLEW_RESAMPLE: usize = 16385;

/// Largest control slope of the pulse over its duration: (numeric, analytic).
///
/// The numeric value is a central-difference maximum. Geodesic profiles are
/// re-tabulated uniformly in the control first, by cumulative quadrature of
/// the metric: time-uniform samples cannot resolve the entry boundary layer
/// of steep members, while control-uniform ones resolve it trivially.
/// Profiles without a finite path length (filtered or otherwise imported)
/// are differenced on their own samples.
///
/// The analytic value is the constant-speed law: path length over the
/// square-rooted metric at the control point minimizing the metric. For the
/// symmetric two-level sweep both factors have closed forms and no numeric
/// quadrature is involved.
pub fn slew_rate(
    pulse: &PulseProfile,
    t_f: f64,
    model: &dyn Model,
    alpha: f64,
    beta: f64,
) -> Result<(f64, f64)> {
    if !(t_f > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "t_f must be positive, got {t_f}"
        )));
    }
    if pulse.kind == PulseKind::PiPulse {
        return Err(Error::InvalidArgument(
            "the step comparator has unbounded slew".into(),
        ));
    }
    let m = pulse.state_index;
    let (l0, l1) = (pulse.lambda0, pulse.lambda1);

    let numeric = if pulse.delta.is_finite() {
        let k = SLEW_RESAMPLE;
        let lam: Vec<f64> = (0..k)
            .map(|j| l0 + (l1 - l0) * j as f64 / (k - 1) as f64)
            .collect();
        let w = lam
            .par_iter()
            .map(|&l| metric_single(model, &[l], alpha, beta, m).map(|g| g.max(0.0).sqrt()))
            .collect::<Result<Vec<f64>>>()?;
        let mut t = vec![0.0; k];
        for j in 1..k {
            t[j] = t[j - 1] + 0.5 * (w[j] + w[j - 1]) * (lam[j] - lam[j - 1]);
        }
        let delta = t[k - 1];
        if !(delta > 0.0) {
            return Err(Error::MetricSingular {
                lambda: l0,
                value: delta,
            });
        }
        for v in t.iter_mut() {
            *v *= t_f / delta;
        }
        max_abs_slope(&t, &lam)
    } else {
        let times: Vec<f64> = pulse.tau.iter().map(|&tau| tau * t_f).collect();
        max_abs_slope(&times, &pulse.lambda)
    };

    let analytic = if model.name() == "landau_zener" {
        let x = model
            .constants()
            .iter()
            .find(|(k, _)| *k == "x")
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::InvalidArgument("model does not expose x".into()))?;
        let n_plus = 0.5 * (alpha + beta);
        let delta = lz_closed_length(alpha, beta, x, l1) - lz_closed_length(alpha, beta, x, l0);
        // (x^2 + z^2)^(n+/2) peaks at the far boundary for n+ > 0 and at the
        // closest approach to the anticrossing for n+ < 0.
        let z2 = if n_plus >= 0.0 {
            (l0 * l0).max(l1 * l1)
        } else if l0 <= 0.0 && l1 >= 0.0 {
            0.0
        } else {
            (l0 * l0).min(l1 * l1)
        };
        2.0_f64.powf(0.5 * alpha) * delta * (x * x + z2).powf(0.5 * n_plus)
            / (x.powf(0.5 * beta) * t_f)
    } else {
        let delta = crate::synthesis::hyper_adiabaticity(model, alpha, beta, m, l0, l1)?;
        let k = SLEW_RESAMPLE;
        let g_min = (0..k)
            .into_par_iter()
            .map(|j| {
                let l = l0 + (l1 - l0) * j as f64 / (k - 1) as f64;
                metric_single(model, &[l], alpha, beta, m)
            })
            .try_reduce(|| f64::INFINITY, |a, b| Ok(a.min(b)))?;
        if !(g_min > 0.0) {
            return Err(Error::MetricSingular {
                lambda: l0,
                value: g_min,
            });
        }
        delta / (g_min.sqrt() * t_f)
    };
    Ok((numeric, analytic))
}

/// Signed arclength of the symmetric two-level metric from the anticrossing,
/// via the Gauss series: s(z) = 2F1(1, (3-n+)/2; 3/2; -z^2/x^2) z sqrt(G) (1+z^2/x^2).
fn lz_closed_length(alpha: f64, beta: f64, x: f64, z: f64) -> f64 {
    let n_plus = 0.5 * (alpha + beta);
    let w = z * z / (x * x);
    let g = x.powf(beta) / (2.0_f64.powf(alpha) * (x * x + z * z).powf(n_plus));
    special::hyp2f1_one(n_plus, w).map_or(f64::NAN, |h| h * z * g.sqrt() * (1.0 + w))
}

/// One short-time-Fourier sample: window center, frequency, intensity
/// relative to the spectrogram maximum.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StftSample {
    pub t: f64,
    pub f: f64,
    pub db: f64,
}

/// Hamming-windowed spectrogram of the control, from the derivative samples
/// divided by 2 pi f (the pulse itself has no closed transform, its speed
/// does). `window` is the window length in time units; hops are a quarter
/// window (75% overlap). Intensities are in dB relative to the global
/// maximum; an all-flat pulse yields an empty spectrogram.
pub fn spectrogram(pulse: &PulseProfile, t_f: f64, window: f64) -> Result<Vec<StftSample>> {
    if !(t_f > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "t_f must be positive, got {t_f}"
        )));
    }
    let n = require_uniform(pulse)?;
    let dt = t_f / (n - 1) as f64;
    let len = (window / dt).round() as usize + 1;
    if !(window > 0.0) || len < 16 {
        return Err(Error::GridTooCoarse(format!(
            "window of {window} time units spans fewer than 16 samples at dt {dt:.3e}"
        )));
    }
    if len > n {
        return Err(Error::GridTooCoarse(format!(
            "window of {len} samples exceeds the {n}-sample pulse"
        )));
    }

    // dlambda/dt, one-sided at the ends.
    let mut v = vec![0.0; n];
    v[0] = (pulse.lambda[1] - pulse.lambda[0]) / dt;
    for j in 1..n - 1 {
        v[j] = (pulse.lambda[j + 1] - pulse.lambda[j - 1]) / (2.0 * dt);
    }
    v[n - 1] = (pulse.lambda[n - 1] - pulse.lambda[n - 2]) / dt;

    let hamming: Vec<f64> = (0..len)
        .map(|k| 0.54 - 0.46 * (TAU * k as f64 / (len - 1) as f64).cos())
        .collect();
    let hop = ((len - 1) / 4).max(1);
    let fft = FftPlanner::new().plan_fft_forward(len);

    let mut raw: Vec<(f64, f64, f64)> = Vec::new();
    let mut start = 0;
    loop {
        let mut buf: Vec<C64> = (0..len)
            .map(|k| C64::new(v[start + k] * hamming[k], 0.0))
            .collect();
        fft.process(&mut buf);
        let t_center = (start as f64 + 0.5 * (len - 1) as f64) * dt;
        for k in 1..=len / 2 {
            let f = k as f64 / (len as f64 * dt);
            raw.push((t_center, f, buf[k].norm() / (TAU * f)));
        }
        if start + len >= n {
            break;
        }
        start = (start + hop).min(n - len);
    }

    let peak = raw.iter().fold(0.0f64, |m, &(_, _, a)| m.max(a));
    if peak == 0.0 {
        return Ok(Vec::new());
    }
    Ok(raw
        .into_iter()
        .map(|(t, f, a)| StftSample {
            t,
            f,
            db: 20.0 * (a / peak).max(1e-300).log10(),
        })
        .collect())
}

/// Largest frequency whose short-time intensity stays above `threshold_db`
/// (relative to the spectrogram maximum) in any window. A flat pulse has no
/// spectral content at all and reports zero.
pub fn bandwidth(pulse: &PulseProfile, t_f: f64, window: f64, threshold_db: f64) -> Result<f64> {
    if !(threshold_db < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be negative dB, got {threshold_db}"
        )));
    }
    let sg = spectrogram(pulse, t_f, window)?;
    Ok(sg
        .iter()
        .filter(|s| s.db >= threshold_db)
        .fold(0.0f64, |m, s| m.max(s.f)))
}

/// Hardware-facing summary of one pulse at one duration.
#[derive(Clone, Serialize)]
pub struct FeasibilityReport {
    pub slew_numeric: f64,
    pub slew_analytic: f64,
    pub f_max: f64,
    pub stft: Vec<StftSample>,
}

pub fn feasibility(
    pulse: &PulseProfile,
    t_f: f64,
    model: &dyn Model,
    alpha: f64,
    beta: f64,
    window: f64,
    threshold_db: f64,
) -> Result<FeasibilityReport> {
    let (slew_numeric, slew_analytic) = slew_rate(pulse, t_f, model, alpha, beta)?;
    let stft = spectrogram(pulse, t_f, window)?;
    if !(threshold_db < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be negative dB, got {threshold_db}"
        )));
    }
    let f_max = stft
        .iter()
        .filter(|s| s.db >= threshold_db)
        .fold(0.0f64, |m, s| m.max(s.f));
    Ok(FeasibilityReport {
        slew_numeric,
        slew_analytic,
        f_max,
        stft,
    })
}

/// One cell of the filtered-transfer map.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FilteredMapPoint {
    pub n_plus: f64,
    pub f_c: f64,
    pub min_infidelity: f64,
    pub t_opt: f64,
}

/// Minimum dephasing-limited infidelity of the filtered transfer for every
/// (family member, cutoff) pair. The filter acts in physical time, so each
/// duration on the grid filters the pulse anew before propagating it; the
/// reported optimum is the best duration per cell.
pub fn filtered_fidelity_map(
    model: &dyn Model,
    n_plus: &[f64],
    f_c: &[f64],
    order: usize,
    m: usize,
    lambda0: f64,
    lambda1: f64,
    tf_grid: &[f64],
    t2: f64,
) -> Result<Vec<FilteredMapPoint>> {
    if n_plus.is_empty() || f_c.is_empty() || tf_grid.is_empty() {
        return Err(Error::InvalidArgument(
            "family, cutoff, and duration grids must be non-empty".into(),
        ));
    }
    if tf_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidArgument(
            "filtered sweeps need positive durations".into(),
        ));
    }
    let psi = eigenstate(model, lambda0, m)?;
    let dim = psi.len();
    let mut rho0 = Array2::from_elem((dim, dim), C64::new(0.0, 0.0));
    for i in 0..dim {
        for j in 0..dim {
            rho0[(i, j)] = psi[i] * psi[j].conj();
        }
    }

    let mut map = Vec::with_capacity(n_plus.len() * f_c.len());
    for &np in n_plus {
        let pulse = synthesize_pulse(model, np, np, m, lambda0, lambda1, 2049)?;
        for &fc in f_c {
            let spec = FilterSpec { order, f_c: fc };
            let infs = tf_grid
                .par_iter()
                .map(|&tf| -> Result<f64> {
                    let filtered = butterworth_apply(&pulse, tf, &spec)?;
                    let run = evolve_lindblad(model, &filtered, tf, t2, &rho0)?;
                    Ok(1.0 - run.fidelity)
                })
                .collect::<Result<Vec<f64>>>()?;
            let mut best = 0;
            for (i, v) in infs.iter().enumerate() {
                if *v < infs[best] {
                    best = i;
                }
            }
            map.push(FilteredMapPoint {
                n_plus: np,
                f_c: fc,
                min_infidelity: infs[best],
                t_opt: tf_grid[best],
            });
        }
    }
    Ok(map)
}

pub fn write_filtered_map_csv(points: &[FilteredMapPoint], w: &mut impl Write) -> Result<()> {
    writeln!(w, "n_plus,f_c,min_infidelity,t_opt")?;
    for p in points {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e}",
            p.n_plus, p.f_c, p.min_infidelity, p.t_opt
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve_unitary, sweep_tf};
    use crate::models::build_model;
    use std::collections::BTreeMap;

    fn lz(x: f64) -> std::sync::Arc<dyn Model> {
        let mut cs: BTreeMap<String, f64> = BTreeMap::new();
        cs.insert("x".into(), x);
        build_model("landau_zener", &cs).unwrap()
    }

    fn manual_pulse(n: usize, f: impl Fn(f64) -> f64) -> PulseProfile {
        let tau: Vec<f64> = (0..n).map(|j| j as f64 / (n - 1) as f64).collect();
        let lambda: Vec<f64> = tau.iter().map(|&t| f(t)).collect();
        PulseProfile {
            model: "manual".into(),
            label: "manual".into(),
            kind: PulseKind::Geodesic,
            alpha: f64::NAN,
            beta: f64::NAN,
            n_plus: f64::NAN,
            n_minus: f64::NAN,
            delta: f64::NAN,
            lambda0: lambda[0],
            lambda1: lambda[n - 1],
            state_index: 0,
            tau,
            lambda,
        }
    }


    #[test]
    fn butterworth_keeps_dc_and_attenuates_by_the_book() {
        let t_f = 100.0;
        let n = 16385;
        let (al, ah, fl, fh, fc) = (1.0, 0.5, 0.08, 1.28, 0.5);
        let spec = FilterSpec::new(fc);
        let dt = t_f / (n - 1) as f64;
        // Complex projection over the second half of the window, where the
        // causal transient has decayed; both tones complete whole periods
        // there, so the projections are leakage-free.
        let project = |y: &[f64], f: f64| -> f64 {
            let mut acc = C64::new(0.0, 0.0);
            let lo = n / 2;
            for j in lo..n {
                let t = j as f64 * dt;
                let w = if j == lo || j == n - 1 { 0.5 } else { 1.0 };
                acc += C64::new(0.0, -TAU * f * t).exp() * y[j] * w * dt;
            }
            acc.norm()
        };

        let constant = manual_pulse(4097, |_| 3.25);
        let out = butterworth_apply(&constant, 10.0, &FilterSpec::new(1.0)).unwrap();
        for &v in &out.lambda {
            assert!((v - 3.25).abs() < 1e-10, "DC gain must be unity");
        }

        let tone = manual_pulse(n, |tau| (TAU * fc * tau * t_f).cos());
        let tout = butterworth_apply(&tone, t_f, &spec).unwrap();
        let gain = project(&tout.lambda, fc) / project(&tone.lambda, fc);
        assert!(
            (gain - 0.5f64.sqrt()).abs() < 1e-9,
            "cutoff tone must sit at -3 dB, gain {gain}"
        );

        // A decade above cutoff the third-order rolloff is 60 dB.
        let hi = manual_pulse(n, |tau| (TAU * 10.0 * fc * tau * t_f).cos());
        let hout = butterworth_apply(&hi, t_f, &spec).unwrap();
        let hgain = project(&hout.lambda, 10.0 * fc) / project(&hi.lambda, 10.0 * fc);
        let want = 1.0 / (1.0 + 10.0f64.powi(6)).sqrt();
        assert!(
            (hgain - want).abs() < 1e-6 * want,
            "decade-above gain {hgain} vs {want}"
        );

        let two = manual_pulse(n, |tau| {
            let t = tau * t_f;
            al * (TAU * fl * t).cos() + ah * (TAU * fh * t).cos()
        });
        let fout = butterworth_apply(&two, t_f, &spec).unwrap();
        let ratio = project(&fout.lambda, fh) / project(&fout.lambda, fl);
        let (wl, wh) = (fl / fc, fh / fc);
        let closed = (ah / al) * ((1.0 + wl.powi(6)) / (1.0 + wh.powi(6))).sqrt();
        assert!(
            (ratio - closed).abs() < 1e-6 * closed,
            "two-tone ratio {ratio:.9e} vs closed form {closed:.9e}"
        );
    }

    #[test]
    fn filtering_is_linear() {
        let t_f = 20.0;
        let p = manual_pulse(2049, |tau| (TAU * 0.7 * tau * t_f).sin() + 2.0 * tau);
        let q = manual_pulse(2049, |tau| (TAU * 2.3 * tau * t_f).cos() - tau * tau);
        let (a, b) = (1.7, -0.6);
        let combo = manual_pulse(2049, |tau| {
            let t = TAU * tau * t_f;
            a * ((0.7 * t).sin() + 2.0 * tau) + b * ((2.3 * t).cos() - tau * tau)
        });
        let spec = FilterSpec::new(1.0);
        let fp = butterworth_apply(&p, t_f, &spec).unwrap();
        let fq = butterworth_apply(&q, t_f, &spec).unwrap();
        let fc = butterworth_apply(&combo, t_f, &spec).unwrap();
        for j in 0..2049 {
            let lin = a * fp.lambda[j] + b * fq.lambda[j];
            assert!(
                (fc.lambda[j] - lin).abs() < 1e-10,
                "nonlinearity {:.3e} at sample {j}",
                (fc.lambda[j] - lin).abs()
            );
        }
    }

    #[test]
    fn filter_guards_inputs() {
        let p = manual_pulse(257, |tau| tau);
        // 257 samples over 10 time units: Nyquist 12.8, quarter 3.2.
        assert!(matches!(
            butterworth_apply(&p, 10.0, &FilterSpec::new(5.0)),
            Err(Error::GridTooCoarse(_))
        ));
        assert!(matches!(
            butterworth_apply(&p, 10.0, &FilterSpec { order: 0, f_c: 1.0 }),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            butterworth_apply(&p, 10.0, &FilterSpec { order: 3, f_c: -1.0 }),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            butterworth_apply(&p, -2.0, &FilterSpec::new(1.0)),
            Err(Error::InvalidArgument(_))
        ));
        let mut warped = manual_pulse(257, |tau| tau);
        warped.tau[100] += 1e-4;
        assert!(matches!(
            butterworth_apply(&warped, 10.0, &FilterSpec::new(1.0)),
            Err(Error::InvalidArgument(_))
        ));
        let short = manual_pulse(32, |tau| tau);
        assert!(matches!(
            butterworth_apply(&short, 10.0, &FilterSpec::new(0.2)),
            Err(Error::GridTooCoarse(_))
        ));
    }

    #[test]
    fn linear_sweep_slew_is_exact_and_the_family_matches_the_speed_law() {
        let model = lz(1.0);
        let t_f = 10.0;

        // The flat-metric member is a straight ramp with constant slope.
        let ramp = synthesize_pulse(model.as_ref(), 0.0, 0.0, 0, -10.0, 10.0, 2049).unwrap();
        let (num, ana) = slew_rate(&ramp, t_f, model.as_ref(), 0.0, 0.0).unwrap();
        let want = 2.0 * 10.0 / t_f;
        assert!((num - want).abs() < 1e-9 * want, "ramp numeric slew {num}");
        assert!((ana - want).abs() < 1e-9 * want, "ramp analytic slew {ana}");

        let mut slews = Vec::new();
        for np in [-4.0, -2.0, 1.0, 3.0, 4.0, 5.0, 6.0] {
            let p = synthesize_pulse(model.as_ref(), np, np, 0, -10.0, 10.0, 2049).unwrap();
            let (num, ana) = slew_rate(&p, t_f, model.as_ref(), np, np).unwrap();
            assert!(
                (num - ana).abs() < 1e-3 * ana,
                "n+ {np}: numeric {num:.6e} vs analytic {ana:.6e}"
            );
            slews.push((np, num));
        }

        // Steep members grow like the closed-form peak (x^2 + z0^2)^(n+/2):
        // successive ratios climb toward sqrt(101) as the path-length factor
        // flattens out.
        let ratios: Vec<f64> = slews[3..]
            .windows(2)
            .map(|w| w[1].1 / w[0].1)
            .collect();
        let asymptote = 101.0f64.sqrt();
        for (i, r) in ratios.iter().enumerate() {
            assert!(
                *r > 0.75 * asymptote && *r < asymptote,
                "growth ratio {r} out of range at step {i}"
            );
        }
        assert!(ratios.windows(2).all(|w| w[1] > w[0]));
        assert!(ratios.last().unwrap() / asymptote > 0.85);

        let step = crate::synthesis::pi_pulse_profile(10.0, 257);
        assert!(matches!(
            slew_rate(&step, t_f, model.as_ref(), 2.0, 2.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn spectrogram_localizes_tones_and_flat_pulses_are_silent() {
        let t_f = 64.0;
        let f0 = 1.0;
        let tone = manual_pulse(4097, |tau| (TAU * f0 * tau * t_f).sin());
        let window = 8.0;
        let bin = 1.0 / window;
        let fmax = bandwidth(&tone, t_f, window, -20.0).unwrap();
        assert!(
            (fmax - f0).abs() <= 1.5 * bin,
            "tone at {f0} localized to {fmax} (bin {bin})"
        );

        let flat = manual_pulse(4097, |_| 1.0);
        assert_eq!(bandwidth(&flat, t_f, window, -20.0).unwrap(), 0.0);
        assert!(spectrogram(&flat, t_f, window).unwrap().is_empty());

        assert!(matches!(
            bandwidth(&tone, t_f, window, 3.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            bandwidth(&tone, t_f, 0.01, -20.0),
            Err(Error::GridTooCoarse(_))
        ));
        assert!(matches!(
            bandwidth(&tone, t_f, 2.0 * t_f, -20.0),
            Err(Error::GridTooCoarse(_))
        ));
    }

    #[test]
    fn bandwidth_mirrors_the_slew_trend_across_the_family() {
        let model = lz(1.0);
        let t_f = 10.0;
        let window = t_f / 8.0;
        let mut last_f = 0.0;
        let mut last_s = 0.0;
        let mut fs = Vec::new();
        for np in [0.0, 1.0, 2.0, 3.0] {
            let p = synthesize_pulse(model.as_ref(), np, np, 0, -10.0, 10.0, 8193).unwrap();
            let fm = bandwidth(&p, t_f, window, -20.0).unwrap();
            let (slew, _) = slew_rate(&p, t_f, model.as_ref(), np, np).unwrap();
            assert!(fm >= last_f, "f_max dropped at n+ {np}");
            assert!(slew > last_s, "slew dropped at n+ {np}");
            last_f = fm;
            last_s = slew;
            fs.push(fm);
        }
        // Gentle members share a resolution floor (the lowest short-time
        // bin); the steep end must rise strictly above it.
        assert!(
            fs[3] > fs[0] * 2.0,
            "steep member bandwidth {} should clear the floor {}",
            fs[3],
            fs[0]
        );
        let report = feasibility(
            &synthesize_pulse(lz(1.0).as_ref(), 2.0, 2.0, 0, -10.0, 10.0, 8193).unwrap(),
            t_f,
            model.as_ref(),
            2.0,
            2.0,
            window,
            -20.0,
        )
        .unwrap();
        assert!((report.slew_numeric - report.slew_analytic).abs() < 1e-3 * report.slew_analytic);
        assert!(report.f_max > 0.0);
        assert!(!report.stft.is_empty());
        assert!(report.stft.iter().all(|s| s.db <= 1e-12));
    }

    #[test]
    fn filtered_transfer_optimum_sits_at_the_geometric_member() {
        let model = lz(1.0);
        let nps = [1.0, 1.5, 2.0, 2.5, 3.0];
        let tfs = [
            1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0, 26.0, 32.0, 40.0,
            50.0, 64.0, 80.0,
        ];
        let map =
            filtered_fidelity_map(model.as_ref(), &nps, &[1.0], 3, 0, -10.0, 10.0, &tfs, 100.0)
                .unwrap();
        assert_eq!(map.len(), nps.len());
        let best = map
            .iter()
            .min_by(|a, b| a.min_infidelity.partial_cmp(&b.min_infidelity).unwrap())
            .unwrap();
        assert_eq!(
            best.n_plus, 2.0,
            "cutoff-at-gap transfer should favor the geometric member, got n+ {}",
            best.n_plus
        );
        assert!(best.t_opt > tfs[0] && best.t_opt < tfs[tfs.len() - 1]);
        assert!(map.iter().all(|p| p.min_infidelity > 0.0));
    }

    #[test]
    fn wide_filters_approach_the_bare_protocol_and_smooth_the_response() {
        let model = lz(1.0);
        let nps = [1.5, 2.0, 2.5];
        let tfs = [1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0];
        let map =
            filtered_fidelity_map(model.as_ref(), &nps, &[5.0], 3, 0, -10.0, 10.0, &tfs, 100.0)
                .unwrap();
        for p in &map {
            let pulse =
                synthesize_pulse(model.as_ref(), p.n_plus, p.n_plus, 0, -10.0, 10.0, 2049)
                    .unwrap();
            let (_, opt) = sweep_tf(model.as_ref(), &pulse, &tfs, Some(100.0)).unwrap();
            assert!(
                (p.min_infidelity - opt.infidelity).abs() < 0.15 * opt.infidelity,
                "n+ {}: filtered {:.4e} vs bare {:.4e}",
                p.n_plus,
                p.min_infidelity,
                opt.infidelity
            );
        }

        // At matched cutoff the filtered response over duration is smoother
        // than the bare one: the resonance comb is rounded off.
        let p1 = synthesize_pulse(model.as_ref(), 1.0, 1.0, 0, -10.0, 10.0, 2049).unwrap();
        let grid: Vec<f64> = (4..=80).map(|i| 0.5 * i as f64).collect();
        let psi0 = eigenstate(model.as_ref(), -10.0, 0).unwrap();
        let mut tv_raw = 0.0;
        let mut tv_filt = 0.0;
        let mut last = (f64::NAN, f64::NAN);
        for &tfv in &grid {
            let raw = 1.0 - evolve_unitary(model.as_ref(), &p1, tfv, &psi0).unwrap().fidelity;
            let filt = butterworth_apply(&p1, tfv, &FilterSpec::new(1.0)).unwrap();
            let smooth =
                1.0 - evolve_unitary(model.as_ref(), &filt, tfv, &psi0).unwrap().fidelity;
            if last.0.is_finite() {
                tv_raw += (raw - last.0).abs();
                tv_filt += (smooth - last.1).abs();
            }
            last = (raw, smooth);
        }
        assert!(
            tv_filt < tv_raw,
            "filtered variation {tv_filt:.4e} vs bare {tv_raw:.4e}"
        );
    }
}
