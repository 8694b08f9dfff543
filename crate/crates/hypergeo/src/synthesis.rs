//! Single-parameter geodesic pulse generation by arclength inversion:
//! lambda(tau) = s^{-1}(delta * tau) where s is the cumulative metric
//! arclength and delta the total path length (the hyper-adiabaticity).

use crate::error::{Error, Result};
use crate::hypergeometry;
use crate::models::{self, Model};
use crate::numerics::interp::MonotoneCubic;
use crate::numerics::{quad, QUAD_TOL};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::sync::Arc;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    Geodesic,
    /// Formal n+ -> infinity comparator; not a geodesic and has no finite
    /// hyper-adiabaticity. Sampled as a step at tau = 1/2 for plotting;
    /// propagation holds the control at the anticrossing (see dynamics).
    PiPulse,
}

#[derive(Clone, Serialize)]
pub struct PulseProfile {
    pub model: String,
    pub label: String,
    pub kind: PulseKind,
    pub alpha: f64,
    pub beta: f64,
    pub n_plus: f64,
    pub n_minus: f64,
    /// Total path length; infinite for the pi-pulse comparator.
    pub delta: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub state_index: usize,
    pub tau: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl PulseProfile {
    /// Control value at arbitrary tau in [0,1] by monotone interpolation
    /// of the stored samples.
    pub fn lambda_at(&self, tau: f64) -> f64 {
        if self.kind == PulseKind::PiPulse {
            return if tau < 0.5 {
                self.lambda0
            } else if tau > 0.5 {
                self.lambda1
            } else {
                0.5 * (self.lambda0 + self.lambda1)
            };
        }
        match MonotoneCubic::new(self.tau.clone(), self.lambda.clone()) {
            Ok(c) => c.eval(tau),
            Err(_) => self.lambda0,
        }
    }
}

fn sqrt_metric<'a>(
    model: &'a dyn Model,
    alpha: f64,
    beta: f64,
    m: usize,
) -> impl Fn(f64) -> f64 + 'a {
    move |lambda: f64| match hypergeometry::metric_single(model, &[lambda], alpha, beta, m) {
        Ok(g) => g.max(0.0).sqrt(),
        Err(_) => f64::NAN,
    }
}

fn prevalidate_path(
    model: &dyn Model,
    alpha: f64,
    beta: f64,
    m: usize,
    l0: f64,
    l1: f64,
) -> Result<()> {
    // Interior spot checks give typed errors before quadrature turns a
    // divergence into an opaque convergence failure. Endpoints are allowed
    // integrable singularities and skipped. Power-of-two count lands one
    // sample on the exact midpoint, where symmetric sweeps cross.
    let n = 256;
    for i in 1..n {
        let lam = l0 + (l1 - l0) * i as f64 / n as f64;
        hypergeometry::metric_single(model, &[lam], alpha, beta, m)?;
    }
    Ok(())
}

/// Path length of the metric between the boundaries: the dimensionless
/// measure of how adiabatic the transfer can be.
pub fn hyper_adiabaticity(
    model: &dyn Model,
    alpha: f64,
    beta: f64,
    m: usize,
    lambda0: f64,
    lambda1: f64,
) -> Result<f64> {
    if !(lambda0 < lambda1) {
        return Err(Error::InvalidArgument(format!(
            "boundaries must satisfy lambda0 < lambda1, got [{lambda0}, {lambda1}]"
        )));
    }
    prevalidate_path(model, alpha, beta, m, lambda0, lambda1)?;
    let f = sqrt_metric(model, alpha, beta, m);
    let splits = model.metric_splits(lambda0, lambda1);
    quad::integrate_split(&f, lambda0, lambda1, &splits, QUAD_TOL)
}

/// Geodesic pulse by arclength inversion on a dense grid.
pub fn synthesize_pulse(
    model: &dyn Model,
    alpha: f64,
    beta: f64,
    m: usize,
    lambda0: f64,
    lambda1: f64,
    n_samples: usize,
) -> Result<PulseProfile> {
    if n_samples < 64 {
        return Err(Error::InvalidArgument(format!(
            "n_samples must be at least 64, got {n_samples}"
        )));
    }
    if !(lambda0 < lambda1) {
        return Err(Error::InvalidArgument(format!(
            "boundaries must satisfy lambda0 < lambda1, got [{lambda0}, {lambda1}]"
        )));
    }
    prevalidate_path(model, alpha, beta, m, lambda0, lambda1)?;
    let splits = model.metric_splits(lambda0, lambda1);
    let dense = (4096.max(4 * n_samples)) + 1;
    let mut grid: Vec<f64> = (0..dense)
        .map(|i| lambda0 + (lambda1 - lambda0) * i as f64 / (dense - 1) as f64)
        .collect();
    grid.extend(splits.iter().copied());
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    let f = sqrt_metric(model, alpha, beta, m);
    let s = quad::cumulative(&f, lambda0, &grid, &splits, QUAD_TOL)?;
    let (tau, lambda, delta) = invert_and_sample(&s, &grid, n_samples, lambda0, lambda1)?;
    let (n_plus, n_minus) = ((alpha + beta) / 2.0, (alpha - beta) / 2.0);
    Ok(PulseProfile {
        model: model.name().to_string(),
        label: format!("n_plus={n_plus}"),
        kind: PulseKind::Geodesic,
        alpha,
        beta,
        n_plus,
        n_minus,
        delta,
        lambda0,
        lambda1,
        state_index: m,
        tau,
        lambda,
    })
}

/// Inverts a cumulative arclength table and resamples the control at
/// uniform tau. Equal consecutive arclengths (metric zeros resolved below
/// grid resolution) collapse to one knot.
fn invert_and_sample(
    s: &[f64],
    grid: &[f64],
    n_samples: usize,
    lambda0: f64,
    lambda1: f64,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let delta = *s.last().unwrap();
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::MetricSingular {
            lambda: lambda1,
            value: delta,
        });
    }
    let mut sk = Vec::with_capacity(s.len());
    let mut lk = Vec::with_capacity(s.len());
    for (si, li) in s.iter().zip(grid.iter()) {
        match sk.last() {
            Some(&prev) if *si <= prev => {
                if *si < prev {
                    return Err(Error::InversionFailure(format!(
                        "arclength not monotone near lambda = {li}"
                    )));
                }
            }
            _ => {
                sk.push(*si);
                lk.push(*li);
            }
        }
    }
    if sk.len() < 2 {
        return Err(Error::InversionFailure(
            "arclength is flat across the whole path".into(),
        ));
    }
    let inverse = MonotoneCubic::new(sk, lk)?;
    let tau: Vec<f64> = (0..n_samples)
        .map(|j| j as f64 / (n_samples - 1) as f64)
        .collect();
    let mut lambda: Vec<f64> = tau.iter().map(|t| inverse.eval(delta * t)).collect();
    lambda[0] = lambda0;
    *lambda.last_mut().unwrap() = lambda1;
    Ok((tau, lambda, delta))
}

/// Arclength synthesis on a fixed uniform evaluation grid with the
/// midpoint rule: no adaptivity and no convergence guarantee. Sweeps whose
/// exact arclength diverges at an isolated interior point (a matrix
/// element crossing zero under beta < 0 turns the path length infinite,
/// and the adaptive path refuses with a quadrature error) come out with a
/// dwell near the divergence that grows with the cell count instead. The
/// result is grid-dependent by construction; callers own `n_cells`.
pub fn synthesize_pulse_fixed_grid(
    model: &dyn Model,
    alpha: f64,
    beta: f64,
    m: usize,
    lambda0: f64,
    lambda1: f64,
    n_cells: usize,
    n_samples: usize,
) -> Result<PulseProfile> {
    if n_samples < 64 {
        return Err(Error::InvalidArgument(format!(
            "n_samples must be at least 64, got {n_samples}"
        )));
    }
    if !(lambda0 < lambda1) {
        return Err(Error::InvalidArgument(format!(
            "boundaries must satisfy lambda0 < lambda1, got [{lambda0}, {lambda1}]"
        )));
    }
    if n_cells < 4 * (n_samples - 1) {
        return Err(Error::InvalidArgument(format!(
            "dense cell count {n_cells} must be at least 4x the output resolution"
        )));
    }
    let h = (lambda1 - lambda0) / n_cells as f64;
    let f = sqrt_metric(model, alpha, beta, m);
    let mut grid = Vec::with_capacity(n_cells + 1);
    let mut s = Vec::with_capacity(n_cells + 1);
    grid.push(lambda0);
    s.push(0.0);
    let mut acc = 0.0;
    for k in 0..n_cells {
        let center = lambda0 + (k as f64 + 0.5) * h;
        let w = f(center);
        if !w.is_finite() {
            return Err(Error::MetricSingular {
                lambda: center,
                value: w,
            });
        }
        acc += w * h;
        grid.push(lambda0 + (k + 1) as f64 * h);
        s.push(acc);
    }
    let (tau, lambda, delta) = invert_and_sample(&s, &grid, n_samples, lambda0, lambda1)?;
    let (n_plus, n_minus) = ((alpha + beta) / 2.0, (alpha - beta) / 2.0);
    Ok(PulseProfile {
        model: model.name().to_string(),
        label: format!("n_plus={n_plus} (fixed grid)"),
        kind: PulseKind::Geodesic,
        alpha,
        beta,
        n_plus,
        n_minus,
        delta,
        lambda0,
        lambda1,
        state_index: m,
        tau,
        lambda,
    })
}

fn family_label(n_plus: f64) -> String {
    if n_plus == 0.0 {
        "linear".into()
    } else if n_plus == 2.0 {
        "geometric fast-QUAD".into()
    } else if n_plus == 3.0 {
        "FAQUAD".into()
    } else {
        format!("n_plus={n_plus}")
    }
}

/// Step-at-midpoint comparator samples; the formal n+ -> infinity member.
pub fn pi_pulse_profile(z0: f64, n_samples: usize) -> PulseProfile {
    let tau: Vec<f64> = (0..n_samples)
        .map(|j| j as f64 / (n_samples - 1) as f64)
        .collect();
    let lambda: Vec<f64> = tau
        .iter()
        .map(|&t| {
            if t < 0.5 {
                -z0
            } else if t > 0.5 {
                z0
            } else {
                0.0
            }
        })
        .collect();
    PulseProfile {
        model: "landau_zener".into(),
        label: "pi-pulse".into(),
        kind: PulseKind::PiPulse,
        alpha: f64::INFINITY,
        beta: f64::INFINITY,
        n_plus: f64::INFINITY,
        n_minus: 0.0,
        delta: f64::INFINITY,
        lambda0: -z0,
        lambda1: z0,
        state_index: 0,
        tau,
        lambda,
    }
}

/// One geodesic per n+ (realized as alpha = beta = n+) over z in
/// [-z0, z0], plus the labeled pi-pulse comparator.
pub fn lz_pulse_family(
    x: f64,
    n_plus_values: &[f64],
    z0: f64,
    n_samples: usize,
) -> Result<Vec<PulseProfile>> {
    if !(z0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "z0 must be positive, got {z0}"
        )));
    }
    let model: Arc<dyn Model> = Arc::new(models::LandauZener { x });
    let mut out: Vec<PulseProfile> = n_plus_values
        .par_iter()
        .map(|&np| {
            let mut p = synthesize_pulse(model.as_ref(), np, np, 0, -z0, z0, n_samples)?;
            p.label = family_label(np);
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    out.push(pi_pulse_profile(z0, n_samples));
    Ok(out)
}

/// Comment-headed CSV: metadata lines then tau,lambda rows.
pub fn write_pulse_csv(p: &PulseProfile, w: &mut impl Write) -> Result<()> {
    writeln!(w, "# model={}", p.model)?;
    writeln!(w, "# alpha={}", p.alpha)?;
    writeln!(w, "# beta={}", p.beta)?;
    writeln!(w, "# delta={}", p.delta)?;
    writeln!(w, "# lambda0={}", p.lambda0)?;
    writeln!(w, "# lambda1={}", p.lambda1)?;
    writeln!(w, "# state_index={}", p.state_index)?;
    writeln!(w, "tau,lambda")?;
    for (t, l) in p.tau.iter().zip(p.lambda.iter()) {
        writeln!(w, "{t},{l}")?;
    }
    Ok(())
}

/// JSON mirror of the CSV fields plus the sample arrays.
pub fn pulse_json(p: &PulseProfile) -> serde_json::Value {
    serde_json::json!({
        "model": p.model,
        "label": p.label,
        "kind": p.kind,
        "alpha": p.alpha,
        "beta": p.beta,
        "n_plus": p.n_plus,
        "n_minus": p.n_minus,
        "delta": p.delta,
        "lambda0": p.lambda0,
        "lambda1": p.lambda1,
        "state_index": p.state_index,
        "tau": p.tau,
        "lambda": p.lambda,
    })
}
