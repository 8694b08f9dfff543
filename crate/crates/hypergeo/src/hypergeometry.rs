//! The (alpha, beta) tensor over control space: hypermetric, hyper-Berry
//! curvature, sphere closed forms, curvature invariants, and embedding
//! coordinates for plotting.

use crate::error::{Error, Result};
use crate::models::{self, Model, QubitSphere, Spectrum};
use crate::numerics::{quad, special, C64, QUAD_TOL};
use ndarray::Array2;
use serde::Serialize;
use std::f64::consts::PI;

/// Tensor Q at one control point: values[(mu, nu)] sums
/// <m|dH_mu|n>^{beta/2} <n|dH_nu|m>^{beta/2} / (E_n - E_m)^alpha over n != m,
/// principal-branch powers. Single-control models use the absolute-value
/// metric form, which is defined for every real beta.
pub struct HypergeoTensor {
    pub alpha: f64,
    pub beta: f64,
    pub state_index: usize,
    pub values: Array2<C64>,
}

impl HypergeoTensor {
    /// Symmetric real part.
    pub fn metric(&self) -> Array2<f64> {
        let p = self.values.nrows();
        Array2::from_shape_fn((p, p), |(i, j)| {
            0.5 * (self.values[(i, j)].re + self.values[(j, i)].re)
        })
    }

    /// Antisymmetric -2 Im part.
    pub fn berry(&self) -> Array2<f64> {
        let p = self.values.nrows();
        Array2::from_shape_fn((p, p), |(i, j)| {
            -(self.values[(i, j)].im - self.values[(j, i)].im)
        })
    }
}

fn check_state_index(model: &dyn Model, m: usize) -> Result<()> {
    if m >= model.dim() {
        return Err(Error::IndexOutOfRange {
            what: "state index",
            index: m,
            limit: model.dim(),
        });
    }
    Ok(())
}

fn even_half_exponent(beta: f64) -> Result<i32> {
    if beta.fract() == 0.0 && (beta as i64).rem_euclid(2) == 0 {
        Ok((beta / 2.0) as i32)
    } else {
        Err(Error::OddBetaMultiParam(beta))
    }
}

/// Absolute-value single-parameter sum; may overflow to infinity at metric
/// singularities, which callers either guard or integrate across.
fn single_param_sum(
    model: &dyn Model,
    spec: &Spectrum,
    lambda: &[f64],
    alpha: f64,
    beta: f64,
    m: usize,
) -> Result<f64> {
    let mut g = 0.0;
    for n in 0..model.dim() {
        if n == m {
            continue;
        }
        let el = models::matrix_element(model, spec, lambda, 0, n, m)?;
        g += el.norm().powf(beta) / spec.gap(n, m).powf(alpha);
    }
    Ok(g)
}

/// Single-parameter hypermetric G(lambda) for state m (Eq. with absolute
/// values; valid for every real beta).
pub fn metric_single(
    model: &dyn Model,
    lambda: &[f64],
    alpha: f64,
    beta: f64,
    m: usize,
) -> Result<f64> {
    check_state_index(model, m)?;
    let spec = models::spectrum(model, lambda, None)?;
    let g = single_param_sum(model, &spec, lambda, alpha, beta, m)?;
    if !g.is_finite() {
        return Err(Error::MetricSingular {
            lambda: lambda[0],
            value: g,
        });
    }
    Ok(g)
}

/// Tensor from an existing spectral decomposition (saves re-diagonalizing
/// inside sweeps; magnitudes are gauge-independent).
pub fn tensor_from_spectrum(
    model: &dyn Model,
    spec: &Spectrum,
    lambda: &[f64],
    alpha: f64,
    beta: f64,
    m: usize,
) -> Result<HypergeoTensor> {
    check_state_index(model, m)?;
    let p = model.control_count();
    let mut values = Array2::<C64>::zeros((p, p));
    if p == 1 {
        values[(0, 0)] = C64::new(single_param_sum(model, spec, lambda, alpha, beta, m)?, 0.0);
    } else {
        let k = even_half_exponent(beta)?;
        // elements[mu][n] = <m| dH_mu |n>
        let mut elements = vec![vec![C64::new(0.0, 0.0); model.dim()]; p];
        for (mu, row) in elements.iter_mut().enumerate() {
            for (n, slot) in row.iter_mut().enumerate() {
                if n != m {
                    *slot = models::matrix_element(model, spec, lambda, mu, n, m)?;
                }
            }
        }
        for mu in 0..p {
            for nu in 0..p {
                let mut q = C64::new(0.0, 0.0);
                for n in 0..model.dim() {
                    if n == m {
                        continue;
                    }
                    let gap = spec.energies[n] - spec.energies[m];
                    let denom = C64::new(gap, 0.0).powf(alpha);
                    q += elements[mu][n].powi(k) * elements[nu][n].conj().powi(k) / denom;
                }
                values[(mu, nu)] = q;
            }
        }
    }
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::MetricSingular {
            lambda: lambda[0],
            value: f64::NAN,
        });
    }
    Ok(HypergeoTensor {
        alpha,
        beta,
        state_index: m,
        values,
    })
}

/// Tensor at one control point in the canonical gauge.
pub fn hypergeo_tensor(
    model: &dyn Model,
    lambda: &[f64],
    alpha: f64,
    beta: f64,
    m: usize,
) -> Result<HypergeoTensor> {
    check_state_index(model, m)?;
    let spec = models::spectrum(model, lambda, None)?;
    tensor_from_spectrum(model, &spec, lambda, alpha, beta, m)
}

/// Antisymmetric hyper-Berry matrix -2 Im Q.
pub fn hyper_berry(
    model: &dyn Model,
    lambda: &[f64],
    alpha: f64,
    beta: f64,
    m: usize,
) -> Result<Array2<f64>> {
    if model.control_count() > 1 {
        even_half_exponent(beta)?;
    }
    Ok(hypergeo_tensor(model, lambda, alpha, beta, m)?.berry())
}

/// Sphere closed forms and topological invariants for one (alpha, beta).
#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    pub alpha: f64,
    pub beta: f64,
    /// Pole-to-pole meridian length.
    pub l_theta: f64,
    /// Equatorial circumference; scale by sin^{beta/2}(theta) off-equator.
    pub l_phi_equator: f64,
    pub volume: f64,
    /// Minimal-time-bound ratio against the (2,2) geometry.
    pub qsl_ratio: f64,
    pub chern_like_re: f64,
    pub chern_like_im: f64,
    pub chern_like_abs: f64,
    /// Integral of sqrt(g) R over the sphere; None where the pole
    /// contributions are non-integrable (beta < 2).
    pub euler_characteristic: Option<f64>,
}

impl GeometryReport {
    pub fn l_phi(&self, theta: f64) -> f64 {
        self.l_phi_equator * theta.sin().powf(self.beta / 2.0)
    }

    /// Curvature scalar exactly as the source closed form states it. Not
    /// constant at (2,2) even though the geometry there is the round
    /// radius-1/2 sphere; see `ricci_numeric` for the actual curvature.
    pub fn ricci_printed(&self, theta: f64) -> f64 {
        ricci_printed(self.alpha, self.beta, theta)
    }

    pub fn kretschmann(&self, theta: f64) -> f64 {
        self.ricci_printed(theta).powi(2)
    }
}

pub fn ricci_printed(alpha: f64, beta: f64, theta: f64) -> f64 {
    let s2 = theta.sin().powi(2);
    2.0_f64.powf(alpha - 2.0) * beta / s2 * (8.0 - beta * (1.0 + (2.0 * theta).cos()))
}

/// Gaussian-curvature route: R = 2K for the diagonal metric
/// diag(1, sin^beta) / 2^alpha. Used as the closed-form oracle for
/// `ricci_numeric` and as the Euler-characteristic integrand.
fn ricci_closed(alpha: f64, beta: f64, theta: f64) -> f64 {
    let s2 = theta.sin().powi(2);
    2.0_f64.powf(alpha - 2.0) * beta / s2 * (4.0 - beta * (1.0 + (2.0 * theta).cos()))
}

fn qubit_metric_diag(alpha: f64, beta: f64, theta: f64) -> Result<(f64, f64)> {
    let model = QubitSphere;
    let lambda = [theta, 0.3];
    let spec = models::spectrum(&model, &lambda, None)?;
    let el_t = models::matrix_element(&model, &spec, &lambda, 0, 1, 0)?;
    let el_p = models::matrix_element(&model, &spec, &lambda, 1, 1, 0)?;
    let gap = spec.gap(1, 0).powf(alpha);
    Ok((el_t.norm().powf(beta) / gap, el_p.norm().powf(beta) / gap))
}

/// Curvature scalar by second-order central differences (step 1e-4, one
/// Richardson pass) on the metric computed through the model path.
pub fn ricci_numeric(alpha: f64, beta: f64, theta: f64) -> Result<f64> {
    if theta <= 0.0 || theta >= PI {
        return Err(Error::PoleSingularity(theta));
    }
    let w = |t: f64| -> Result<f64> {
        let (gtt, gpp) = qubit_metric_diag(alpha, beta, t)?;
        Ok((gtt * gpp).sqrt())
    };
    let gpp = |t: f64| -> Result<f64> { Ok(qubit_metric_diag(alpha, beta, t)?.1) };
    // P(t) = G_pp'(t) / W(t), then K = -P'(theta) / (2 W(theta)).
    let d_of_h = |h: f64| -> Result<f64> {
        let p = |t: f64| -> Result<f64> {
            let d_gpp = (gpp(t + h)? - gpp(t - h)?) / (2.0 * h);
            Ok(d_gpp / w(t)?)
        };
        Ok((p(theta + h)? - p(theta - h)?) / (2.0 * h))
    };
    let h = 1e-4;
    let d = (4.0 * d_of_h(h / 2.0)? - d_of_h(h)?) / 3.0;
    Ok(-d / w(theta)?)
}

fn chern_like(alpha: f64, beta: f64) -> Result<C64> {
    if beta <= -2.0 {
        return Err(Error::BetaOutOfDomain(beta, "chern-like number needs beta > -2"));
    }
    let gamma_ratio = PI.sqrt() * special::gamma((2.0 + beta) / 4.0) / special::gamma(1.0 + beta / 4.0);
    Ok(C64::new(0.0, -1.0).powf(beta / 2.0) / 2.0_f64.powf(alpha) * gamma_ratio)
}

fn euler_characteristic(alpha: f64, beta: f64) -> Result<Option<f64>> {
    if beta < 2.0 {
        // sqrt(g) R ~ theta^{beta/2 - 2} near the poles: non-integrable
        // cone defects.
        return Ok(None);
    }
    let integrand =
        |t: f64| t.sin().abs().powf(beta / 2.0) / 2.0_f64.powf(alpha) * ricci_closed(alpha, beta, t);
    let chi = 2.0 * PI * quad::integrate(&integrand, 0.0, PI, QUAD_TOL)?;
    Ok(Some(chi))
}

/// Closed-form sphere report for one (alpha, beta).
pub fn sphere_lengths_volume(alpha: f64, beta: f64) -> Result<GeometryReport> {
    if beta <= -2.0 {
        return Err(Error::BetaOutOfDomain(beta, "sphere volume needs beta > -2"));
    }
    let gamma_ratio = PI.sqrt() * special::gamma((2.0 + beta) / 4.0) / special::gamma(1.0 + beta / 4.0);
    let volume = PI / 2.0_f64.powf(alpha - 1.0) * gamma_ratio;
    let qsl_ratio = 2.0_f64.powf(alpha - 1.0) / PI.sqrt() * special::gamma(1.0 + beta / 4.0)
        / special::gamma((2.0 + beta) / 4.0);
    let c = chern_like(alpha, beta)?;
    Ok(GeometryReport {
        alpha,
        beta,
        l_theta: PI / 2.0_f64.powf(alpha / 2.0),
        l_phi_equator: PI / 2.0_f64.powf(alpha / 2.0 - 1.0),
        volume,
        qsl_ratio,
        chern_like_re: c.re,
        chern_like_im: c.im,
        chern_like_abs: c.norm(),
        euler_characteristic: euler_characteristic(alpha, beta)?,
    })
}

/// Pointwise curvature invariants at theta in (0, pi).
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureSample {
    pub theta: f64,
    pub ricci_numeric: f64,
    pub ricci_printed: f64,
    pub kretschmann: f64,
    pub chern_like_re: f64,
    pub chern_like_im: f64,
    pub euler_characteristic: Option<f64>,
}

pub fn curvature_invariants(alpha: f64, beta: f64, theta: f64) -> Result<CurvatureSample> {
    if theta <= 0.0 || theta >= PI {
        return Err(Error::PoleSingularity(theta));
    }
    let c = chern_like(alpha, beta)?;
    Ok(CurvatureSample {
        theta,
        ricci_numeric: ricci_numeric(alpha, beta, theta)?,
        ricci_printed: ricci_printed(alpha, beta, theta),
        kretschmann: ricci_printed(alpha, beta, theta).powi(2),
        chern_like_re: c.re,
        chern_like_im: c.im,
        euler_characteristic: euler_characteristic(alpha, beta)?,
    })
}

fn embedding_validity(beta: f64, theta: f64) -> f64 {
    1.0 - beta * beta * theta.sin().abs().powf(beta - 2.0) * theta.cos().powi(2) / 4.0
}

/// Revolution-surface samples matching the sphere line element.
pub struct EmbeddingMesh {
    pub alpha: f64,
    pub beta: f64,
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    /// Radial profile f(theta).
    pub f: Vec<f64>,
    /// Height profile g(theta), anchored g(pi/2) = 0.
    pub g: Vec<f64>,
}

impl EmbeddingMesh {
    /// Flattened (theta, phi, x, y, z) samples.
    pub fn rows(&self) -> Vec<(f64, f64, f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.thetas.len() * self.phis.len());
        for (i, &th) in self.thetas.iter().enumerate() {
            for &ph in &self.phis {
                out.push((
                    th,
                    ph,
                    self.f[i] * ph.cos(),
                    self.f[i] * ph.sin(),
                    self.g[i],
                ));
            }
        }
        out
    }
}

const VALIDITY_SLACK: f64 = 1e-12;

/// Surface of revolution with f^2 = sin^beta(theta)/2^alpha and
/// g'^2 = (1 - beta^2 sin^beta/(4 tan^2))/2^alpha, g(pi/2) = 0.
pub fn embedding(alpha: f64, beta: f64, thetas: &[f64], n_phi: usize) -> Result<EmbeddingMesh> {
    if thetas.is_empty() || n_phi == 0 {
        return Err(Error::InvalidArgument(
            "embedding needs a non-empty theta grid and n_phi >= 1".into(),
        ));
    }
    let mut sorted = thetas.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted[0] < 0.0 || *sorted.last().unwrap() > PI {
        return Err(Error::InvalidArgument(
            "embedding theta grid must lie in [0, pi]".into(),
        ));
    }
    // Validity scan over the whole span the height integral crosses.
    let lo = sorted[0].min(PI / 2.0);
    let hi = sorted.last().unwrap().max(PI / 2.0);
    let mut bad: Option<(f64, f64)> = None;
    let scan = 4096;
    for i in 0..=scan {
        let t = lo + (hi - lo) * i as f64 / scan as f64;
        if embedding_validity(beta, t) < -VALIDITY_SLACK {
            bad = Some(match bad {
                None => (t, t),
                Some((a, b)) => (a.min(t), b.max(t)),
            });
        }
    }
    for &t in &sorted {
        if embedding_validity(beta, t) < -VALIDITY_SLACK {
            bad = Some(match bad {
                None => (t, t),
                Some((a, b)) => (a.min(t), b.max(t)),
            });
        }
    }
    if let Some((blo, bhi)) = bad {
        return Err(Error::EmbeddingUndefined { lo: blo, hi: bhi });
    }
    let scale = 2.0_f64.powf(-alpha / 2.0);
    let g_prime = |t: f64| embedding_validity(beta, t).max(0.0).sqrt() * scale;
    let cums = quad::cumulative(&g_prime, sorted[0], &sorted, &[], QUAD_TOL)?;
    let offset = if sorted[0] <= PI / 2.0 {
        quad::integrate(&g_prime, sorted[0], PI / 2.0, QUAD_TOL)?
    } else {
        -quad::integrate(&g_prime, PI / 2.0, sorted[0], QUAD_TOL)?
    };
    let g: Vec<f64> = cums.iter().map(|c| c - offset).collect();
    let f: Vec<f64> = sorted
        .iter()
        .map(|t| t.sin().abs().powf(beta / 2.0) * scale)
        .collect();
    let phis: Vec<f64> = (0..n_phi)
        .map(|k| 2.0 * PI * k as f64 / n_phi as f64)
        .collect();
    Ok(EmbeddingMesh {
        alpha,
        beta,
        thetas: sorted,
        phis,
        f,
        g,
    })
}

/// Largest contiguous window around theta = pi/2 where the embedding is
/// defined, found by scan plus bisection.
pub fn admissible_window(beta: f64) -> Option<(f64, f64)> {
    if embedding_validity(beta, PI / 2.0) <= 0.0 {
        return None;
    }
    let n = 1 << 14;
    let step = PI / n as f64;
    let mid = n / 2;
    let mut lo_idx = 0;
    for i in (0..mid).rev() {
        if embedding_validity(beta, i as f64 * step) <= 0.0 {
            lo_idx = i;
            break;
        }
    }
    let mut hi_idx = n;
    for i in mid..=n {
        if embedding_validity(beta, i as f64 * step) <= 0.0 {
            hi_idx = i;
            break;
        }
    }
    let bisect = |mut bad: f64, mut good: f64| -> f64 {
        for _ in 0..80 {
            let mid = 0.5 * (bad + good);
            if embedding_validity(beta, mid) > 0.0 {
                good = mid;
            } else {
                bad = mid;
            }
        }
        0.5 * (bad + good)
    };
    let lo = if lo_idx == 0 && embedding_validity(beta, 0.0) > 0.0 {
        0.0
    } else {
        bisect(lo_idx as f64 * step, (lo_idx + 1) as f64 * step)
    };
    let hi = if hi_idx == n && embedding_validity(beta, PI) > 0.0 {
        PI
    } else {
        bisect(hi_idx as f64 * step, (hi_idx - 1) as f64 * step)
    };
    Some((lo, hi))
}
