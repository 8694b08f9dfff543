//! Adiabatic-perturbation-theory companions to a pulse: rescaled
//! adiabaticity traces, time-averaged gaps with their fidelity resonances,
//! the 1/t_f^2 infidelity bound, and the adiabatic-time threshold.

use crate::error::{Error, Result};
use crate::models::{matrix_element, spectrum, Model, Spectrum};
use crate::numerics::interp::MonotoneCubic;
use crate::numerics::{quad, QUAD_TOL};
use crate::synthesis::{PulseKind, PulseProfile};
use rayon::prelude::*;
use serde::Serialize;

/// Infidelity threshold defining "adiabatic enough": t_adiab = max a / 0.01.
const ADIABATIC_LEVEL: f64 = 0.01;

#[derive(Clone, Serialize)]
pub struct PairReport {
    /// The excited-manifold level paired with the tracked state.
    pub level: usize,
    /// |a(tau)| on the pulse grid.
    pub a_tilde: Vec<f64>,
    pub a_tilde_0: f64,
    pub a_tilde_end: f64,
    pub a_tilde_max: f64,
    /// Time-averaged gap over rescaled time.
    pub phi: f64,
    /// Resonant pulse times 2 pi k / phi, ascending in k.
    pub resonances: Vec<f64>,
}

#[derive(Clone, Serialize)]
pub struct AdiabaticReport {
    pub model: String,
    pub state_index: usize,
    pub tau: Vec<f64>,
    pub pairs: Vec<PairReport>,
    /// Worst endpoint adiabaticity over pairs; feeds the bound.
    pub a_tilde_0: f64,
    pub t_adiab: f64,
}

impl AdiabaticReport {
    /// 4 a0^2 (N-1) / t_f^2, monotone decreasing in t_f.
    pub fn bound(&self, t_f: f64, dim: usize) -> f64 {
        4.0 * self.a_tilde_0 * self.a_tilde_0 * (dim - 1) as f64 / (t_f * t_f)
    }
}

fn profile_curve(pulse: &PulseProfile) -> Result<MonotoneCubic> {
    if pulse.kind == PulseKind::PiPulse {
        return Err(Error::InvalidArgument(
            "the step comparator has no differentiable profile".into(),
        ));
    }
    MonotoneCubic::new(pulse.tau.clone(), pulse.lambda.clone())
}

fn spectra_along(model: &dyn Model, pulse: &PulseProfile) -> Result<Vec<Spectrum>> {
    let mut out: Vec<Spectrum> = Vec::with_capacity(pulse.lambda.len());
    for &lam in &pulse.lambda {
        let spec = spectrum(model, &[lam], out.last())?;
        out.push(spec);
    }
    Ok(out)
}

/// dlambda/dtau at the pulse samples. A synthesized geodesic obeys
/// dlambda/dtau = delta / sqrt(G) exactly, and sampled data cannot resolve
/// the steep endpoints of high-n+ profiles, so the speed law wins whenever
/// it applies; pchip differentiation covers imported or frozen profiles.
fn profile_speeds(
    model: &dyn Model,
    pulse: &PulseProfile,
    curve: &MonotoneCubic,
) -> Vec<f64> {
    let fallback = |tau: f64| curve.derivative(tau).abs();
    pulse
        .tau
        .iter()
        .zip(pulse.lambda.iter())
        .map(|(&tau, &lam)| {
            if pulse.kind == PulseKind::Geodesic && pulse.delta.is_finite() && pulse.delta > 0.0
            {
                match crate::hypergeometry::metric_single(
                    model,
                    &[lam],
                    pulse.alpha,
                    pulse.beta,
                    pulse.state_index,
                ) {
                    Ok(g) if g > 0.0 => {
                        let v = pulse.delta / g.sqrt();
                        if v.is_finite() {
                            return v;
                        }
                    }
                    _ => {}
                }
            }
            fallback(tau)
        })
        .collect()
}

/// |<psi_m| dH/dtau |psi_n>| / |E_n - E_m|^2 per excited level, on the
/// pulse grid with gauge continuity along the sweep.
pub fn adiabaticity_trace(
    model: &dyn Model,
    pulse: &PulseProfile,
    m: usize,
) -> Result<AdiabaticReport> {
    let curve = profile_curve(pulse)?;
    let specs = spectra_along(model, pulse)?;
    let dim = model.dim();
    if m >= dim {
        return Err(Error::IndexOutOfRange {
            what: "state index",
            index: m,
            limit: dim,
        });
    }
    let speeds = profile_speeds(model, pulse, &curve);
    let mut pairs = Vec::with_capacity(dim - 1);
    for n in (0..dim).filter(|&n| n != m) {
        let mut a = Vec::with_capacity(pulse.tau.len());
        for (j, spec) in specs.iter().enumerate() {
            let el = matrix_element(model, spec, &[pulse.lambda[j]], 0, n, m)?;
            let gap = spec.gap(n, m);
            a.push((el.norm() * speeds[j]) / (gap * gap));
        }
        let a0 = a[0];
        let aend = *a.last().unwrap();
        let amax = a.iter().cloned().fold(0.0, f64::max);
        pairs.push(PairReport {
            level: n,
            a_tilde: a,
            a_tilde_0: a0,
            a_tilde_end: aend,
            a_tilde_max: amax,
            phi: 0.0,
            resonances: Vec::new(),
        });
    }
    // Asymmetric boundaries have no canonical endpoint; use the worse one.
    let a0 = pairs
        .iter()
        .map(|p| p.a_tilde_0.max(p.a_tilde_end))
        .fold(0.0, f64::max);
    let t_adiab = pairs
        .iter()
        .map(|p| p.a_tilde_max)
        .fold(0.0, f64::max)
        / ADIABATIC_LEVEL;
    Ok(AdiabaticReport {
        model: model.name().to_string(),
        state_index: m,
        tau: pulse.tau.clone(),
        pairs,
        a_tilde_0: a0,
        t_adiab,
    })
}

#[derive(Clone, Serialize)]
pub struct PairResonances {
    pub level: usize,
    pub phi: f64,
    pub times: Vec<f64>,
}

/// Resonant pulse times t_f* = 2 pi k / phi with phi the gap averaged over
/// rescaled time, one series per level pair, k = 1..k_max.
pub fn resonance_times(
    model: &dyn Model,
    pulse: &PulseProfile,
    m: usize,
    k_max: usize,
) -> Result<Vec<PairResonances>> {
    if k_max < 1 {
        return Err(Error::InvalidArgument(format!(
            "k_max must be at least 1, got {k_max}"
        )));
    }
    let curve = profile_curve(pulse)?;
    let dim = model.dim();
    if m >= dim {
        return Err(Error::IndexOutOfRange {
            what: "state index",
            index: m,
            limit: dim,
        });
    }
    (0..dim)
        .filter(|&n| n != m)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&n| {
            let gap = |tau: f64| match spectrum(model, &[curve.eval(tau)], None) {
                Ok(s) => s.gap(n, m),
                Err(_) => f64::NAN,
            };
            // The interpolant is C1 with curvature kinks at every knot;
            // splitting there keeps each quadrature cell smooth.
            let knots = &pulse.tau[1..pulse.tau.len() - 1];
            let phi = quad::integrate_split(&gap, 0.0, 1.0, knots, QUAD_TOL)?;
            if !(phi > 0.0) {
                return Err(Error::NonConvergent(format!(
                    "time-averaged gap for pair ({n},{m}) is {phi}"
                )));
            }
            let times = (1..=k_max)
                .map(|k| 2.0 * std::f64::consts::PI * k as f64 / phi)
                .collect();
            Ok(PairResonances {
                level: n,
                phi,
                times,
            })
        })
        .collect()
}

/// 4 a0^2 (N-1) / t_f^2 with a0 the worst endpoint adiabaticity.
pub fn infidelity_bound(
    model: &dyn Model,
    pulse: &PulseProfile,
    m: usize,
    t_f: f64,
) -> Result<f64> {
    if !(t_f > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "t_f must be positive, got {t_f}"
        )));
    }
    let report = adiabaticity_trace(model, pulse, m)?;
    Ok(report.bound(t_f, model.dim()))
}

/// Pulse time above which the transfer counts as adiabatic:
/// max over tau and pairs of a(tau), divided by 0.01.
pub fn adiabatic_threshold(model: &dyn Model, pulse: &PulseProfile, m: usize) -> Result<f64> {
    Ok(adiabaticity_trace(model, pulse, m)?.t_adiab)
}

/// Trace and resonances in one serializable report.
pub fn adiabatic_report(
    model: &dyn Model,
    pulse: &PulseProfile,
    m: usize,
    k_max: usize,
) -> Result<AdiabaticReport> {
    let mut report = adiabaticity_trace(model, pulse, m)?;
    let res = resonance_times(model, pulse, m, k_max)?;
    for pair in report.pairs.iter_mut() {
        if let Some(r) = res.iter().find(|r| r.level == pair.level) {
            pair.phi = r.phi;
            pair.resonances = r.times.clone();
        }
    }
    Ok(report)
}
