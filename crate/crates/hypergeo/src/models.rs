//! Parametric Hamiltonian families, their analytic control derivatives,
//! and gauge-fixed spectral decompositions.
//!
//! Every built-in model is immutable after construction and pure, so
//! models and spectra can be shared freely across sweep workers.

use crate::error::{Error, Result};
use crate::numerics::{eigen, C64, DEGENERACY_RTOL, HERMITICITY_RTOL, I};
use ndarray::{Array1, Array2};
use std::collections::BTreeMap;
use std::sync::Arc;

pub type Constants = BTreeMap<String, f64>;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub trait Model: Send + Sync {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn control_count(&self) -> usize {
        1
    }
    /// Hamiltonian at the given control values (`lambda.len()` must equal
    /// `control_count`).
    fn eval(&self, lambda: &[f64]) -> Array2<C64>;
    /// Analytic partial derivative of eval with respect to control `mu`.
    fn derivative(&self, lambda: &[f64], mu: usize) -> Array2<C64>;
    /// Interior points of (lo, hi) where metric integrands are singular or
    /// kinked; quadrature must place cell edges there.
    fn metric_splits(&self, _lo: f64, _hi: f64) -> Vec<f64> {
        Vec::new()
    }
    /// Resolved fixed constants, for artifact metadata.
    fn constants(&self) -> Vec<(&'static str, f64)>;
    /// Quasistatic noise coupling operators (detuning-like, coupling-like).
    /// Two-level models see Pauli z and x; larger models default to their
    /// control-derivative direction with no coupling channel.
    fn noise_channels(&self) -> (Array2<C64>, Array2<C64>) {
        let n = self.dim();
        if n == 2 {
            let mut z = Array2::from_elem((2, 2), r(0.0));
            z[(0, 0)] = r(1.0);
            z[(1, 1)] = r(-1.0);
            let mut x = Array2::from_elem((2, 2), r(0.0));
            x[(0, 1)] = r(1.0);
            x[(1, 0)] = r(1.0);
            (z, x)
        } else {
            let zeros = vec![0.0; self.control_count()];
            (
                self.derivative(&zeros, 0),
                Array2::from_elem((n, n), r(0.0)),
            )
        }
    }
}

fn require(cs: &Constants, key: &str, model: &'static str) -> Result<f64> {
    match cs.get(key) {
        Some(v) if v.is_finite() => Ok(*v),
        Some(v) => Err(Error::BadConstants {
            model: model.into(),
            detail: format!("constant {key} must be finite, got {v}"),
        }),
        None => Err(Error::BadConstants {
            model: model.into(),
            detail: format!("missing constant {key}"),
        }),
    }
}

fn optional(cs: &Constants, key: &str, default: f64) -> f64 {
    cs.get(key).copied().unwrap_or(default)
}

/// Single qubit on the sphere: H = [[cos t, e^{-ip} sin t], [e^{ip} sin t, -cos t]]
/// with controls (theta, phi).
pub struct QubitSphere;

impl Model for QubitSphere {
    fn name(&self) -> &'static str {
        "qubit_sphere"
    }
    fn dim(&self) -> usize {
        2
    }
    fn control_count(&self) -> usize {
        2
    }
    fn eval(&self, lambda: &[f64]) -> Array2<C64> {
        assert_eq!(lambda.len(), 2, "qubit_sphere takes (theta, phi)");
        let (th, ph) = (lambda[0], lambda[1]);
        let off = c(0.0, -ph).exp() * th.sin();
        ndarray::array![[r(th.cos()), off], [off.conj(), r(-th.cos())]]
    }
    fn derivative(&self, lambda: &[f64], mu: usize) -> Array2<C64> {
        assert_eq!(lambda.len(), 2, "qubit_sphere takes (theta, phi)");
        let (th, ph) = (lambda[0], lambda[1]);
        let phase = c(0.0, -ph).exp();
        match mu {
            0 => {
                let off = phase * th.cos();
                ndarray::array![[r(-th.sin()), off], [off.conj(), r(th.sin())]]
            }
            1 => {
                let off = -I * phase * th.sin();
                ndarray::array![[r(0.0), off], [off.conj(), r(0.0)]]
            }
            _ => panic!("qubit_sphere has controls 0 (theta) and 1 (phi)"),
        }
    }
    fn metric_splits(&self, lo: f64, hi: f64) -> Vec<f64> {
        // sin(theta) vanishes at multiples of pi, where the phi-metric has
        // zeros of fractional order.
        multiples_inside(std::f64::consts::PI, lo, hi)
    }
    fn constants(&self) -> Vec<(&'static str, f64)> {
        Vec::new()
    }
}

/// H = z sigma_z + x sigma_x with control z.
pub struct LandauZener {
    pub x: f64,
}

impl Model for LandauZener {
    fn name(&self) -> &'static str {
        "landau_zener"
    }
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, lambda: &[f64]) -> Array2<C64> {
        let z = lambda[0];
        ndarray::array![[r(z), r(self.x)], [r(self.x), r(-z)]]
    }
    fn derivative(&self, _lambda: &[f64], mu: usize) -> Array2<C64> {
        assert_eq!(mu, 0, "landau_zener has a single control z");
        ndarray::array![[r(1.0), r(0.0)], [r(0.0), r(-1.0)]]
    }
    fn constants(&self) -> Vec<(&'static str, f64)> {
        vec![("x", self.x)]
    }
}

/// H = tan(theta) sigma_z + sigma_x with control theta in (-pi/2, pi/2).
pub struct RescaledLz;

impl Model for RescaledLz {
    fn name(&self) -> &'static str {
        "rescaled_lz"
    }
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, lambda: &[f64]) -> Array2<C64> {
        let t = lambda[0].tan();
        ndarray::array![[r(t), r(1.0)], [r(1.0), r(-t)]]
    }
    fn derivative(&self, lambda: &[f64], mu: usize) -> Array2<C64> {
        assert_eq!(mu, 0, "rescaled_lz has a single control theta");
        let sec2 = 1.0 / lambda[0].cos().powi(2);
        ndarray::array![[r(sec2), r(0.0)], [r(0.0), r(-sec2)]]
    }
    fn metric_splits(&self, lo: f64, hi: f64) -> Vec<f64> {
        // |cos theta| vanishes at odd multiples of pi/2; the metric has a
        // fractional-power kink there (and the Hamiltonian leaves its
        // domain, but arclength integrals may end exactly on the edge).
        let pi = std::f64::consts::PI;
        multiples_inside(pi, lo - pi / 2.0, hi - pi / 2.0)
            .into_iter()
            .map(|v| v + pi / 2.0)
            .collect()
    }
    fn constants(&self) -> Vec<(&'static str, f64)> {
        Vec::new()
    }
}

/// Three-level system (1/tau0) [[0, tau1, 0], [tau1, 0, tau2], [0, tau2, eps]]
/// with control eps; anticrossings sit at eps = +-tau1.
pub struct LambdaSystem {
    pub tau0: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl Model for LambdaSystem {
    fn name(&self) -> &'static str {
        "lambda_system"
    }
    fn dim(&self) -> usize {
        3
    }
    fn eval(&self, lambda: &[f64]) -> Array2<C64> {
        let eps = lambda[0];
        let s = 1.0 / self.tau0;
        ndarray::array![
            [r(0.0), r(s * self.tau1), r(0.0)],
            [r(s * self.tau1), r(0.0), r(s * self.tau2)],
            [r(0.0), r(s * self.tau2), r(s * eps)]
        ]
    }
    fn derivative(&self, _lambda: &[f64], mu: usize) -> Array2<C64> {
        assert_eq!(mu, 0, "lambda_system has a single control eps");
        let mut d = Array2::<C64>::zeros((3, 3));
        d[(2, 2)] = r(1.0 / self.tau0);
        d
    }
    fn constants(&self) -> Vec<(&'static str, f64)> {
        vec![("tau0", self.tau0), ("tau1", self.tau1), ("tau2", self.tau2)]
    }
}

/// H = cos(z) sigma_z + x sigma_x with control z; anticrossings at odd
/// multiples of pi/2, one per pi of swept range.
pub struct PeriodicLz {
    pub x: f64,
}

impl Model for PeriodicLz {
    fn name(&self) -> &'static str {
        "periodic_lz"
    }
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, lambda: &[f64]) -> Array2<C64> {
        let zc = lambda[0].cos();
        ndarray::array![[r(zc), r(self.x)], [r(self.x), r(-zc)]]
    }
    fn derivative(&self, lambda: &[f64], mu: usize) -> Array2<C64> {
        assert_eq!(mu, 0, "periodic_lz has a single control z");
        let d = -lambda[0].sin();
        ndarray::array![[r(d), r(0.0)], [r(0.0), r(-d)]]
    }
    fn metric_splits(&self, lo: f64, hi: f64) -> Vec<f64> {
        // The metric vanishes with a fractional-power kink where sin z = 0.
        multiples_inside(std::f64::consts::PI, lo, hi)
    }
    fn constants(&self) -> Vec<(&'static str, f64)> {
        vec![("x", self.x)]
    }
}

/// N levels with on-site energies (-1)^k z + k*delta (k = 1..N) and
/// uniform all-to-all coupling x.
pub struct AllToAll {
    pub x: f64,
    pub delta: f64,
    pub n: usize,
}

impl Model for AllToAll {
    fn name(&self) -> &'static str {
        "all_to_all"
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, lambda: &[f64]) -> Array2<C64> {
        let z = lambda[0];
        let mut h = Array2::<C64>::from_elem((self.n, self.n), r(self.x));
        for i in 0..self.n {
            let k = (i + 1) as f64;
            let sign = if (i + 1) % 2 == 0 { 1.0 } else { -1.0 };
            h[(i, i)] = r(sign * z + k * self.delta);
        }
        h
    }
    fn derivative(&self, _lambda: &[f64], mu: usize) -> Array2<C64> {
        assert_eq!(mu, 0, "all_to_all has a single control z");
        let mut d = Array2::<C64>::zeros((self.n, self.n));
        for i in 0..self.n {
            let sign = if (i + 1) % 2 == 0 { 1.0 } else { -1.0 };
            d[(i, i)] = r(sign);
        }
        d
    }
    fn constants(&self) -> Vec<(&'static str, f64)> {
        vec![("x", self.x), ("delta", self.delta), ("N", self.n as f64)]
    }
}

/// Four-level orbital (x) valley shuttling Hamiltonian in the
/// valley-diagonal frame, with control eps (detuning):
///   diag: eps/2 +- |Delta_L|, -eps/2 +- |Delta_R|
///   orbital tunneling dressed by valley phases:
///   t_ee = t_gg^* = (t_c/2)(1 + e^{i(phi_L - phi_R)}),
///   t_eg = -t_ge^* = (t_c/2)(e^{i phi_L} - e^{i phi_R}).
pub struct Shuttling {
    pub t_c: f64,
    pub delta_l: f64,
    pub delta_r: f64,
    pub phi_l: f64,
    pub phi_r: f64,
}

impl Shuttling {
    fn couplings(&self) -> (C64, C64, C64, C64) {
        let half = self.t_c / 2.0;
        let e_l = c(0.0, self.phi_l).exp();
        let e_r = c(0.0, self.phi_r).exp();
        let t_ee = half * (r(1.0) + c(0.0, self.phi_l - self.phi_r).exp());
        let t_eg = half * (e_l - e_r);
        let t_gg = t_ee.conj();
        let t_ge = -t_eg.conj();
        (t_ee, t_eg, t_ge, t_gg)
    }
}

impl Model for Shuttling {
    fn name(&self) -> &'static str {
        "shuttling"
    }
    fn dim(&self) -> usize {
        4
    }
    fn eval(&self, lambda: &[f64]) -> Array2<C64> {
        let eps = lambda[0];
        let (t_ee, t_eg, t_ge, t_gg) = self.couplings();
        let dl = self.delta_l.abs();
        let dr = self.delta_r.abs();
        ndarray::array![
            [r(eps / 2.0 + dl), r(0.0), t_ee, t_eg],
            [r(0.0), r(eps / 2.0 - dl), t_ge, t_gg],
            [t_ee.conj(), t_ge.conj(), r(-eps / 2.0 + dr), r(0.0)],
            [t_eg.conj(), t_gg.conj(), r(0.0), r(-eps / 2.0 - dr)]
        ]
    }
    fn derivative(&self, _lambda: &[f64], mu: usize) -> Array2<C64> {
        assert_eq!(mu, 0, "shuttling has a single control eps");
        Array2::from_diag(&ndarray::arr1(&[r(0.5), r(0.5), r(-0.5), r(-0.5)]))
    }
    fn constants(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("t_c", self.t_c),
            ("delta_l", self.delta_l),
            ("delta_r", self.delta_r),
            ("phi_l", self.phi_l),
            ("phi_r", self.phi_r),
        ]
    }
}

/// Valley-averaged shuttling Hamiltonian:
/// (eps/2) tau_z (x) 1 + (t_c/2) tau_x (x) 1 + sigma sqrt(pi/2) 1 (x) gamma_z,
/// which decomposes into two decoupled orbital two-level sectors shifted
/// by +- sigma sqrt(pi/2).
pub struct ShuttlingAveraged {
    pub t_c: f64,
    pub sigma: f64,
}

impl ShuttlingAveraged {
    pub fn valley_shift(&self) -> f64 {
        self.sigma * (std::f64::consts::PI / 2.0).sqrt()
    }
}

impl Model for ShuttlingAveraged {
    fn name(&self) -> &'static str {
        "shuttling_averaged"
    }
    fn dim(&self) -> usize {
        4
    }
    fn eval(&self, lambda: &[f64]) -> Array2<C64> {
        let eps = lambda[0];
        let s = self.valley_shift();
        let (a, b) = (eps / 2.0, self.t_c / 2.0);
        // Basis |orbital, valley>: (e+, e-, g+, g-).
        ndarray::array![
            [r(a + s), r(0.0), r(b), r(0.0)],
            [r(0.0), r(a - s), r(0.0), r(b)],
            [r(b), r(0.0), r(-a + s), r(0.0)],
            [r(0.0), r(b), r(0.0), r(-a - s)]
        ]
    }
    fn derivative(&self, _lambda: &[f64], mu: usize) -> Array2<C64> {
        assert_eq!(mu, 0, "shuttling_averaged has a single control eps");
        Array2::from_diag(&ndarray::arr1(&[r(0.5), r(0.5), r(-0.5), r(-0.5)]))
    }
    fn constants(&self) -> Vec<(&'static str, f64)> {
        vec![("t_c", self.t_c), ("sigma", self.sigma)]
    }
}

/// Decoupled bond blocks with a staggered detuning control:
/// per bond j, H_j = z sigma_z + t_j sigma_x on levels (2j, 2j+1).
/// At z = 0 the block eigenstates are (|2j> +- |2j+1>)/sqrt(2), the
/// detuning matrix element between them is exactly 1, and the per-block
/// tensor is 1/(2 t_j)^alpha.
pub struct Chain {
    pub hoppings: Vec<f64>,
}

impl Model for Chain {
    fn name(&self) -> &'static str {
        "chain"
    }
    fn dim(&self) -> usize {
        2 * self.hoppings.len()
    }
    fn eval(&self, lambda: &[f64]) -> Array2<C64> {
        let z = lambda[0];
        let n = self.dim();
        let mut h = Array2::<C64>::zeros((n, n));
        for (j, &t) in self.hoppings.iter().enumerate() {
            h[(2 * j, 2 * j)] = r(z);
            h[(2 * j + 1, 2 * j + 1)] = r(-z);
            h[(2 * j, 2 * j + 1)] = r(t);
            h[(2 * j + 1, 2 * j)] = r(t);
        }
        h
    }
    fn derivative(&self, _lambda: &[f64], mu: usize) -> Array2<C64> {
        assert_eq!(mu, 0, "chain has a single control z");
        let n = self.dim();
        let mut d = Array2::<C64>::zeros((n, n));
        for j in 0..self.hoppings.len() {
            d[(2 * j, 2 * j)] = r(1.0);
            d[(2 * j + 1, 2 * j + 1)] = r(-1.0);
        }
        d
    }
    fn constants(&self) -> Vec<(&'static str, f64)> {
        // Serialized as bonds + t0..t{B-1}; values boxed as static names is
        // not possible, so report the count here and let callers read
        // `hoppings` directly for full metadata.
        vec![("bonds", self.hoppings.len() as f64)]
    }
}

fn multiples_inside(step: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = (lo / step).floor() as i64;
    loop {
        let v = k as f64 * step;
        if v > hi {
            break;
        }
        if v > lo && v < hi {
            out.push(v);
        }
        k += 1;
    }
    out
}

/// Instantiate a built-in model from its name and constants map.
pub fn build_model(name: &str, cs: &Constants) -> Result<Arc<dyn Model>> {
    match name {
        "qubit_sphere" => Ok(Arc::new(QubitSphere)),
        "landau_zener" => Ok(Arc::new(LandauZener {
            x: require(cs, "x", "landau_zener")?,
        })),
        "rescaled_lz" => Ok(Arc::new(RescaledLz)),
        "lambda_system" => {
            let tau0 = require(cs, "tau0", "lambda_system")?;
            if tau0 == 0.0 {
                return Err(Error::BadConstants {
                    model: "lambda_system".into(),
                    detail: "tau0 must be nonzero".into(),
                });
            }
            Ok(Arc::new(LambdaSystem {
                tau0,
                tau1: require(cs, "tau1", "lambda_system")?,
                tau2: require(cs, "tau2", "lambda_system")?,
            }))
        }
        "periodic_lz" => Ok(Arc::new(PeriodicLz {
            x: require(cs, "x", "periodic_lz")?,
        })),
        "all_to_all" => {
            let nf = require(cs, "N", "all_to_all")?;
            if nf < 2.0 || nf.fract() != 0.0 {
                return Err(Error::BadConstants {
                    model: "all_to_all".into(),
                    detail: format!("N must be an integer >= 2, got {nf}"),
                });
            }
            Ok(Arc::new(AllToAll {
                x: require(cs, "x", "all_to_all")?,
                delta: require(cs, "delta", "all_to_all")?,
                n: nf as usize,
            }))
        }
        "shuttling" => Ok(Arc::new(Shuttling {
            t_c: require(cs, "t_c", "shuttling")?,
            delta_l: require(cs, "delta_l", "shuttling")?,
            delta_r: require(cs, "delta_r", "shuttling")?,
            phi_l: optional(cs, "phi_l", 0.0),
            phi_r: optional(cs, "phi_r", 0.0),
        })),
        "shuttling_averaged" => Ok(Arc::new(ShuttlingAveraged {
            t_c: require(cs, "t_c", "shuttling_averaged")?,
            sigma: require(cs, "sigma", "shuttling_averaged")?,
        })),
        "chain" => {
            let bonds_f = require(cs, "bonds", "chain")?;
            if bonds_f < 1.0 || bonds_f.fract() != 0.0 {
                return Err(Error::BadConstants {
                    model: "chain".into(),
                    detail: format!("bonds must be an integer >= 1, got {bonds_f}"),
                });
            }
            let bonds = bonds_f as usize;
            let mut hoppings = Vec::with_capacity(bonds);
            for j in 0..bonds {
                let t = require(cs, &format!("t{j}"), "chain")?;
                if t == 0.0 {
                    return Err(Error::BadConstants {
                        model: "chain".into(),
                        detail: format!("t{j} must be nonzero"),
                    });
                }
                hoppings.push(t);
            }
            for j in 0..bonds {
                for k in j + 1..bonds {
                    if (hoppings[j].abs() - hoppings[k].abs()).abs() < 1e-12 {
                        return Err(Error::BadConstants {
                            model: "chain".into(),
                            detail: format!(
                                "|t{j}| and |t{k}| coincide; the spectrum would be degenerate"
                            ),
                        });
                    }
                }
            }
            Ok(Arc::new(Chain { hoppings }))
        }
        other => Err(Error::UnknownModel(other.into())),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GaugeTag {
    /// Largest-magnitude component of each eigenvector real and positive.
    Canonical,
    /// Phases chosen so overlaps with the previous sweep sample are
    /// real and non-negative.
    Continuity,
}

#[derive(Clone)]
pub struct Spectrum {
    pub energies: Array1<f64>,
    /// Eigenvectors as columns, same order as `energies`.
    pub states: Array2<C64>,
    pub gauge: GaugeTag,
}

impl Spectrum {
    pub fn gap(&self, n: usize, m: usize) -> f64 {
        (self.energies[n] - self.energies[m]).abs()
    }
}

fn apply_canonical_gauge(states: &mut Array2<C64>) {
    let (n, cols) = states.dim();
    for j in 0..cols {
        let max_mag = (0..n)
            .map(|i| states[(i, j)].norm())
            .fold(0.0_f64, f64::max);
        // Ties (within rounding noise) go to the lowest index so the gauge
        // is stable where components cross in magnitude.
        let best = (0..n)
            .find(|&i| states[(i, j)].norm() >= max_mag * (1.0 - 1e-9))
            .unwrap_or(0);
        let pivot = states[(best, j)];
        if pivot.norm() > 0.0 {
            let phase = pivot.conj() / pivot.norm();
            for i in 0..n {
                states[(i, j)] *= phase;
            }
        }
    }
}

fn apply_continuity_gauge(states: &mut Array2<C64>, previous: &Spectrum) -> Result<()> {
    let (n, cols) = states.dim();
    for j in 0..cols {
        let mut ov = C64::new(0.0, 0.0);
        for i in 0..n {
            ov += previous.states[(i, j)].conj() * states[(i, j)];
        }
        let mag = ov.norm();
        if mag < 1e-8 {
            return Err(Error::GridTooCoarse(format!(
                "eigenvector {j} lost track of its predecessor (overlap {mag:.2e}); \
                 refine the parameter sweep"
            )));
        }
        let phase = ov.conj() / mag;
        for i in 0..n {
            states[(i, j)] *= phase;
        }
    }
    Ok(())
}

/// Gauge-fixed eigendecomposition at one control point. With `previous`
/// the continuity gauge is applied; otherwise the canonical gauge.
pub fn spectrum(
    model: &dyn Model,
    lambda: &[f64],
    previous: Option<&Spectrum>,
) -> Result<Spectrum> {
    let h = model.eval(lambda);
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "{} Hamiltonian has non-finite entries at lambda={lambda:?}",
            model.name()
        )));
    }
    let scale = eigen::frobenius(&h).max(1e-300);
    let dev = eigen::hermiticity_deviation(&h);
    if dev > HERMITICITY_RTOL * scale {
        return Err(Error::NonHermitian {
            deviation: dev,
            tol: HERMITICITY_RTOL * scale,
        });
    }
    let (energies, mut states) = eigen::eigh(&h)?;
    for (i, w) in energies.as_slice().unwrap().windows(2).enumerate() {
        let gap = w[1] - w[0];
        if gap <= DEGENERACY_RTOL * scale {
            return Err(Error::DegenerateSpectrum {
                gap,
                tol: DEGENERACY_RTOL * scale,
                lower: i,
                upper: i + 1,
            });
        }
    }
    // Residual guard on the decomposition itself.
    let mut worst = 0.0_f64;
    for k in 0..model.dim() {
        for row in 0..model.dim() {
            let hv: C64 = (0..model.dim()).map(|j| h[(row, j)] * states[(j, k)]).sum();
            worst = worst.max((hv - energies[k] * states[(row, k)]).norm());
        }
    }
    if worst > 1e-10 * scale {
        return Err(Error::NonConvergent(format!(
            "eigendecomposition residual {worst:.3e} exceeds 1e-10 * scale"
        )));
    }
    let gauge = match previous {
        Some(prev) => {
            apply_continuity_gauge(&mut states, prev)?;
            GaugeTag::Continuity
        }
        None => {
            apply_canonical_gauge(&mut states);
            GaugeTag::Canonical
        }
    };
    Ok(Spectrum { energies, states, gauge })
}

/// <psi_m | dH/d(mu) | psi_n> in the spectrum's gauge; the magnitude is
/// gauge-independent.
pub fn matrix_element(
    model: &dyn Model,
    spec: &Spectrum,
    lambda: &[f64],
    mu: usize,
    n: usize,
    m: usize,
) -> Result<C64> {
    let dim = model.dim();
    for (what, idx) in [("state index n", n), ("state index m", m)] {
        if idx >= dim {
            return Err(Error::IndexOutOfRange {
                what: what.into(),
                index: idx,
                limit: dim,
            });
        }
    }
    if n == m {
        return Err(Error::InvalidArgument(
            "matrix_element requires distinct states n != m".into(),
        ));
    }
    if mu >= model.control_count() {
        return Err(Error::IndexOutOfRange {
            what: "control index".into(),
            index: mu,
            limit: model.control_count(),
        });
    }
    let dh = model.derivative(lambda, mu);
    let mut out = C64::new(0.0, 0.0);
    for i in 0..dim {
        for j in 0..dim {
            out += spec.states[(i, m)].conj() * dh[(i, j)] * spec.states[(j, n)];
        }
    }
    Ok(out)
}
