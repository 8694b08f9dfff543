//! The pulse family as an overcomplete function basis.
//!
//! Sweeps synthesized for different exponent sums have distinct shapes but
//! large mutual overlaps, so a grid of them spans a much smaller space than
//! its cardinality suggests. This module assembles the Gram matrix of a
//! family on a shared time grid, prunes it to a numerically independent
//! subset, and expands arbitrary target controls in the pruned set, either
//! globally or gated at the midpoint with two coefficient sets.

use crate::error::{Error, Result};
use crate::models::{LandauZener, Model};
use crate::numerics::linalg;
use crate::synthesis::{synthesize_pulse, PulseKind, PulseProfile};
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::Serialize;

/// Default number of uniform cells on the shared tau grid.
pub const DEFAULT_GRID_CELLS: usize = 2048;

/// Default cutoff on the R-diagonal of the Gram QR factorization.
pub const PRUNE_THRESHOLD: f64 = 1e-10;

/// Expansion refuses to solve normal systems worse-conditioned than this.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Family of control pulses sampled on one uniform tau grid, with the Gram
/// matrix of their mutual inner products and the pruned subset that is kept
/// for expansions.
#[derive(Clone)]
pub struct BasisSet {
    pub x: f64,
    pub z0: f64,
    /// Exponent-sum label of each member, parallel to `members`.
    pub n_plus: Vec<f64>,
    pub tau: Vec<f64>,
    pub members: Vec<Vec<f64>>,
    pub gram: Array2<f64>,
    /// Indices into `members` that survived pruning; all indices before any
    /// pruning has run.
    pub kept: Vec<usize>,
    pub threshold: f64,
    /// Condition number of the Gram restricted to `kept`.
    pub condition: f64,
}

/// Global expansion of a target in the kept members.
#[derive(Clone, Serialize)]
pub struct Expansion {
    pub coefficients: Vec<f64>,
    pub kept: Vec<usize>,
    /// Labels of the kept members, parallel to `coefficients`.
    pub n_plus: Vec<f64>,
    pub error: f64,
    pub condition: f64,
    #[serde(skip)]
    pub reconstruction: Vec<f64>,
}

/// Midpoint-gated expansion: `first` weights the members on tau < 1/2,
/// `second` on tau >= 1/2.
#[derive(Clone, Serialize)]
pub struct SplitExpansion {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub kept: Vec<usize>,
    pub n_plus: Vec<f64>,
    pub error: f64,
    pub condition: f64,
    /// Whether the continuity constraint was active (it is skipped when
    /// every kept member vanishes at the midpoint, where it is vacuous).
    pub constrained: bool,
    /// |g'(1/2^-) - g'(1/2^+)| of the reconstruction.
    pub continuity_gap: f64,
    #[serde(skip)]
    pub reconstruction: Vec<f64>,
}

/// Trapezoid inner product of `a` and `b` over the node range [lo, hi].
fn inner_between(tau: &[f64], a: &[f64], b: &[f64], lo: usize, hi: usize) -> f64 {
    let h = tau[1] - tau[0];
    let mut acc = 0.5 * (a[lo] * b[lo] + a[hi] * b[hi]);
    for j in lo + 1..hi {
        acc += a[j] * b[j];
    }
    acc * h
}

/// Trapezoid L1 norm over the whole grid.
pub fn l1_norm(tau: &[f64], y: &[f64]) -> f64 {
    let h = tau[1] - tau[0];
    let hi = tau.len() - 1;
    let mut acc = 0.5 * (y[0].abs() + y[hi].abs());
    for v in &y[1..hi] {
        acc += v.abs();
    }
    acc * h
}

fn condition_number(g: &Array2<f64>) -> f64 {
    let sv = linalg::singular_values(g);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(&hi), Some(_)) if hi > 0.0 => f64::INFINITY,
        _ => 1.0,
    }
}

/// Synthesizes one sweep per exponent sum (alpha = beta = n+) over
/// z in [-z0, z0] and assembles the Gram matrix on a shared uniform grid of
/// `n_cells` cells. The cell count must be even so the midpoint used by
/// split expansions falls exactly on a node.
pub fn build_basis(x: f64, n_plus: &[f64], z0: f64, n_cells: usize) -> Result<BasisSet> {
    if n_plus.is_empty() {
        return Err(Error::InvalidArgument(
            "basis needs at least one member".into(),
        ));
    }
    if !(z0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "z0 must be positive, got {z0}"
        )));
    }
    if n_cells < 64 || n_cells % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "grid cells must be even and at least 64, got {n_cells}"
        )));
    }
    let model = LandauZener { x };
    let members: Vec<Vec<f64>> = n_plus
        .par_iter()
        .map(|&np| Ok(synthesize_pulse(&model, np, np, 0, -z0, z0, n_cells + 1)?.lambda))
        .collect::<Result<_>>()?;
    let tau: Vec<f64> = (0..=n_cells).map(|j| j as f64 / n_cells as f64).collect();
    let k = members.len();
    let mut gram = Array2::zeros((k, k));
    for i in 0..k {
        for j in i..k {
            let v = inner_between(&tau, &members[i], &members[j], 0, n_cells);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let condition = condition_number(&gram);
    Ok(BasisSet {
        x,
        z0,
        n_plus: n_plus.to_vec(),
        tau,
        members,
        gram,
        kept: (0..k).collect(),
        threshold: 0.0,
        condition,
    })
}

impl BasisSet {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// Labels of the kept members.
    pub fn kept_n_plus(&self) -> Vec<f64> {
        self.kept.iter().map(|&i| self.n_plus[i]).collect()
    }

    /// Gram of the kept members restricted to the node range [lo, hi].
    fn restricted_gram(&self, lo: usize, hi: usize) -> Array2<f64> {
        let k = self.kept.len();
        let mut g = Array2::zeros((k, k));
        for a in 0..k {
            for b in a..k {
                let v = inner_between(
                    &self.tau,
                    &self.members[self.kept[a]],
                    &self.members[self.kept[b]],
                    lo,
                    hi,
                );
                g[(a, b)] = v;
                g[(b, a)] = v;
            }
        }
        g
    }

    fn target_inner(&self, g: &[f64], lo: usize, hi: usize) -> Array1<f64> {
        Array1::from(
            self.kept
                .iter()
                .map(|&i| inner_between(&self.tau, g, &self.members[i], lo, hi))
                .collect::<Vec<_>>(),
        )
    }

    fn check_target(&self, g: &[f64]) -> Result<()> {
        if g.len() != self.tau.len() {
            return Err(Error::InvalidArgument(format!(
                "target has {} samples, grid has {}",
                g.len(),
                self.tau.len()
            )));
        }
        Ok(())
    }

    /// Node index of tau = 1/2; exact because the cell count is even.
    fn mid(&self) -> usize {
        (self.tau.len() - 1) / 2
    }

    fn combine(&self, first: &[f64], second: &[f64]) -> Vec<f64> {
        let mid = self.mid();
        (0..self.tau.len())
            .map(|j| {
                let c = if j < mid { first } else { second };
                self.kept
                    .iter()
                    .zip(c.iter())
                    .map(|(&i, &ci)| ci * self.members[i][j])
                    .sum()
            })
            .collect()
    }

    /// Keeps the members whose diagonal entry in the column-pivoted QR
    /// factorization of the kept Gram exceeds the threshold. Pivoting makes
    /// the R-diagonal nonincreasing, so the kept set is the pivot-order
    /// prefix and its Gram stays invertible; plain QR can retain a subset
    /// that is itself numerically dependent. Re-pruning with a larger
    /// threshold shrinks the kept set further.
    pub fn prune(&self, threshold: f64) -> Result<BasisSet> {
        if !(threshold > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "prune threshold must be positive, got {threshold}"
            )));
        }
        let hi = self.tau.len() - 1;
        let g = self.restricted_gram(0, hi);
        let (_, r, perm) = linalg::qr_pivoted(&g);
        let count = (0..self.kept.len())
            .take_while(|&a| r[(a, a)].abs() > threshold)
            .count();
        if count == 0 {
            return Err(Error::EmptyBasis(threshold));
        }
        let mut kept: Vec<usize> = perm[..count].iter().map(|&p| self.kept[p]).collect();
        kept.sort_unstable();
        let mut out = self.clone();
        out.kept = kept;
        out.threshold = threshold;
        let khi = out.tau.len() - 1;
        out.condition = condition_number(&out.restricted_gram(0, khi));
        Ok(out)
    }

    /// Least-squares weights of the kept members for a target sampled on
    /// the shared grid, via the normal system; the reported error is the
    /// integrated absolute deviation of the reconstruction.
    pub fn expand(&self, g: &[f64]) -> Result<Expansion> {
        self.check_target(g)?;
        let hi = self.tau.len() - 1;
        let gram = self.restricted_gram(0, hi);
        let condition = condition_number(&gram);
        if condition > CONDITION_LIMIT {
            return Err(Error::IllConditioned(format!(
                "kept Gram condition number {condition:.3e} exceeds {CONDITION_LIMIT:.0e}; \
                 prune harder instead of regularizing"
            )));
        }
        let b = self.target_inner(g, 0, hi);
        let c = linalg::lstsq(&gram, &b, 1e-14)?;
        let coeff = c.to_vec();
        let reconstruction = self.combine(&coeff, &coeff);
        let diff: Vec<f64> = g
            .iter()
            .zip(reconstruction.iter())
            .map(|(a, b)| a - b)
            .collect();
        Ok(Expansion {
            coefficients: coeff,
            kept: self.kept.clone(),
            n_plus: self.kept_n_plus(),
            error: l1_norm(&self.tau, &diff),
            condition,
            reconstruction,
        })
    }

    /// Expansion with independent weights on the two halves of the sweep,
    /// gated by a step at tau = 1/2. With `continuity` the reconstruction
    /// is constrained to be continuous at the midpoint via one Lagrange
    /// multiplier; the constraint is dropped when every kept member
    /// vanishes there, which makes it vacuous.
    pub fn expand_split(&self, g: &[f64], continuity: bool) -> Result<SplitExpansion> {
        self.check_target(g)?;
        let hi = self.tau.len() - 1;
        let mid = self.mid();
        let k = self.kept.len();
        let g1 = self.restricted_gram(0, mid);
        let g2 = self.restricted_gram(mid, hi);
        let b1 = self.target_inner(g, 0, mid);
        let b2 = self.target_inner(g, mid, hi);
        let v: Vec<f64> = self.kept.iter().map(|&i| self.members[i][mid]).collect();
        let scale = self
            .kept
            .iter()
            .map(|&i| l1_norm(&self.tau, &self.members[i]))
            .fold(0.0, f64::max);
        let constrained = continuity && v.iter().any(|&vi| vi.abs() > 1e-9 * scale.max(1.0));
        let n = if constrained { 2 * k + 1 } else { 2 * k };
        let mut a = Array2::zeros((n, n));
        let mut rhs = Array1::zeros(n);
        for i in 0..k {
            for j in 0..k {
                a[(i, j)] = g1[(i, j)];
                a[(k + i, k + j)] = g2[(i, j)];
            }
            rhs[i] = b1[i];
            rhs[k + i] = b2[i];
        }
        if constrained {
            for i in 0..k {
                a[(i, 2 * k)] = v[i];
                a[(2 * k, i)] = v[i];
                a[(k + i, 2 * k)] = -v[i];
                a[(2 * k, k + i)] = -v[i];
            }
        }
        let condition = condition_number(&a);
        if condition > CONDITION_LIMIT {
            return Err(Error::IllConditioned(format!(
                "split system condition number {condition:.3e} exceeds {CONDITION_LIMIT:.0e}; \
                 prune harder instead of regularizing"
            )));
        }
        let sol = linalg::lstsq(&a, &rhs, 1e-14)?;
        let first: Vec<f64> = sol.iter().take(k).copied().collect();
        let second: Vec<f64> = sol.iter().skip(k).take(k).copied().collect();
        let reconstruction = self.combine(&first, &second);
        let diff: Vec<f64> = g
            .iter()
            .zip(reconstruction.iter())
            .map(|(a, b)| a - b)
            .collect();
        let gap: f64 = v
            .iter()
            .zip(first.iter().zip(second.iter()))
            .map(|(&vi, (&c1, &c2))| vi * (c1 - c2))
            .sum();
        Ok(SplitExpansion {
            first,
            second,
            kept: self.kept.clone(),
            n_plus: self.kept_n_plus(),
            error: l1_norm(&self.tau, &diff),
            condition,
            constrained,
            continuity_gap: gap.abs(),
            reconstruction,
        })
    }

    /// Samples a pulse of any model onto the shared grid for use as an
    /// expansion target. The profile must cover tau in [0, 1].
    pub fn sample_target(&self, p: &PulseProfile) -> Vec<f64> {
        self.tau.iter().map(|&t| p.lambda_at(t)).collect()
    }
}

/// Synthesizes a target pulse for a model on the basis grid.
pub fn model_target(
    basis: &BasisSet,
    model: &dyn Model,
    alpha: f64,
    beta: f64,
    m: usize,
    lambda0: f64,
    lambda1: f64,
) -> Result<Vec<f64>> {
    let p = synthesize_pulse(model, alpha, beta, m, lambda0, lambda1, basis.tau.len())?;
    Ok(p.lambda)
}

/// Basis summary for JSON artifacts: members, kept subset, conditioning,
/// and the singular values of the full Gram (the rank plot's raw data).
pub fn basis_json(b: &BasisSet) -> serde_json::Value {
    serde_json::json!({
        "x": b.x,
        "z0": b.z0,
        "size": b.size(),
        "n_plus": b.n_plus,
        "kept": b.kept,
        "kept_n_plus": b.kept_n_plus(),
        "threshold": b.threshold,
        "condition": b.condition,
        "gram_singular_values": linalg::singular_values(&b.gram),
    })
}

/// Wraps a reconstruction as a pulse profile so it can reuse the standard
/// pulse CSV writer. Family metadata does not apply and is NaN.
pub fn reconstruction_profile(basis: &BasisSet, recon: &[f64], label: &str) -> PulseProfile {
    PulseProfile {
        model: "expansion".into(),
        label: label.into(),
        kind: PulseKind::Geodesic,
        alpha: f64::NAN,
        beta: f64::NAN,
        n_plus: f64::NAN,
        n_minus: f64::NAN,
        delta: f64::NAN,
        lambda0: recon[0],
        lambda1: *recon.last().unwrap(),
        state_index: 0,
        tau: basis.tau.clone(),
        lambda: recon.to_vec(),
    }
}
