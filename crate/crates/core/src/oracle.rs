//! Brute-force reference models.
//!
//! [`FockModel`] diagonalizes the full light–matter Hamiltonian of two-level
//! emitters and a few modes in a truncated Fock basis, to compare against
//! the effective Hamiltonian with the photons traced out.
//! [`image_series_static`] sums the image dipoles of a planar two-mirror
//! cavity.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::direct::{assemble_heff, coupling_from_modes, DiscreteModeSet};
use crate::error::{Error, Result};
use crate::geometry::{Dyadic33, Emitter, Vec3};

/// Default cap on the Hilbert space dimension.
pub const DEFAULT_DIM_LIMIT: usize = 1 << 20;

/// Largest dimension diagonalized densely; Lanczos above.
pub const DENSE_LIMIT: usize = 1024;

/// Two-level emitters `H_le = Σ_i (ε_i/2) σ_z^i` with dipole operators
/// `μ_i σ_x^i`, coupled to harmonic modes:
///
/// ```text
/// H = H_le + Σ_n ω_n a_n†a_n + Σ_{i,n} g_in σ_x^i (a_n + a_n†),   g_in = μ_i·E_n(r_i)
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockModel {
    pub emitters: Vec<Emitter>,
    pub splittings: Vec<f64>,
    pub modes: DiscreteModeSet,
    pub n_max: usize,
    /// Add `Σ_n (Σ_i g_in)² / ω_n` to both the full and effective energies.
    pub self_energy: bool,
    pub dim_limit: usize,
}

impl FockModel {
    pub fn new(emitters: Vec<Emitter>, splittings: Vec<f64>, modes: DiscreteModeSet, n_max: usize) -> Result<Self> {
        let m = Self { emitters, splittings, modes, n_max, self_energy: false, dim_limit: DEFAULT_DIM_LIMIT };
        m.validate()?;
        Ok(m)
    }

    pub fn with_n_max(&self, n_max: usize) -> Self {
        Self { n_max, ..self.clone() }
    }

    pub fn with_splittings(&self, splittings: Vec<f64>) -> Self {
        Self { splittings, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.modes.validate()?;
        if self.n_max < 1 {
            return Err(Error::InvalidParameter("Fock cutoff must be at least 1".into()));
        }
        if self.splittings.len() != self.emitters.len() || self.modes.emitter_count != self.emitters.len() {
            return Err(Error::Dimension(format!(
                "{} emitters, {} splittings, modes sampled at {} sites",
                self.emitters.len(),
                self.splittings.len(),
                self.modes.emitter_count
            )));
        }
        if self.emitters.is_empty() {
            return Err(Error::InvalidParameter("model needs at least one emitter".into()));
        }
        if self.splittings.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter("splittings must be finite".into()));
        }
        for c in self.couplings_complex() {
            if c.im.abs() > 1e-12 * c.norm().max(f64::MIN_POSITIVE) {
                return Err(Error::Unsupported("Fock model needs real couplings μ·E".into()));
            }
        }
        let dim = self.dim()?;
        if dim > self.dim_limit {
            return Err(Error::DimensionOverflow { dim, limit: self.dim_limit });
        }
        Ok(())
    }

    fn couplings_complex(&self) -> Vec<num_complex::Complex64> {
        self.modes
            .modes
            .iter()
            .flat_map(|m| {
                self.emitters.iter().zip(&m.fields).map(|(e, f)| crate::geometry::CVec3::from_real(e.dipole).dot(f))
            })
            .collect()
    }

    /// `g[n][i] = μ_i·E_n(r_i)`.
    pub fn couplings(&self) -> Vec<Vec<f64>> {
        let n_em = self.emitters.len();
        let flat = self.couplings_complex();
        flat.chunks(n_em).map(|c| c.iter().map(|z| z.re).collect()).collect()
    }

    /// Hilbert-space dimension `2^N (n_max + 1)^M`; errors on overflow.
    pub fn dim(&self) -> Result<usize> {
        let overflow = || Error::DimensionOverflow { dim: usize::MAX, limit: self.dim_limit };
        let spins = 1usize.checked_shl(self.emitters.len() as u32).ok_or_else(overflow)?;
        let fock = (self.n_max + 1).checked_pow(self.modes.len() as u32).ok_or_else(overflow)?;
        spins.checked_mul(fock).ok_or_else(overflow)
    }

    fn self_energy_constant(&self) -> f64 {
        if !self.self_energy {
            return 0.0;
        }
        self.couplings().iter().zip(&self.modes.modes).map(|(g, m)| g.iter().sum::<f64>().powi(2) / m.frequency).sum()
    }
}

/// Matrix-free Hamiltonian in the product basis. Index layout: spins in the
/// low `N` bits (bit set = excited, `σ_z = +1`), then mode occupations in
/// mixed radix `n_max + 1`.
struct FockOperator {
    base: usize,
    stride: Vec<usize>,
    eps: Vec<f64>,
    omega: Vec<f64>,
    g: Vec<Vec<f64>>,
    dim: usize,
    shift: f64,
}

impl FockOperator {
    fn new(model: &FockModel) -> Result<Self> {
        model.validate()?;
        let n_spins = model.emitters.len();
        let base = model.n_max + 1;
        let m = model.modes.len();
        let stride = (0..m).map(|k| (1usize << n_spins) * base.pow(k as u32)).collect();
        Ok(Self {
            base,
            stride,
            eps: model.splittings.clone(),
            omega: model.modes.modes.iter().map(|x| x.frequency).collect(),
            g: model.couplings(),
            dim: model.dim()?,
            shift: model.self_energy_constant(),
        })
    }

    fn occupation(&self, idx: usize, k: usize) -> usize {
        (idx / self.stride[k]) % self.base
    }

    fn diagonal(&self, idx: usize) -> f64 {
        let mut d = self.shift;
        for (i, e) in self.eps.iter().enumerate() {
            let s = if idx >> i & 1 == 1 { 1.0 } else { -1.0 };
            d += 0.5 * e * s;
        }
        for (k, w) in self.omega.iter().enumerate() {
            d += w * self.occupation(idx, k) as f64;
        }
        d
    }

    /// Visit the off-diagonal elements `(col, value)` of row `idx`.
    fn for_each_offdiag(&self, idx: usize, mut f: impl FnMut(usize, f64)) {
        for (k, gk) in self.g.iter().enumerate() {
            let n = self.occupation(idx, k);
            for (i, &g) in gk.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let flipped = idx ^ (1 << i);
                if n > 0 {
                    f(flipped - self.stride[k], g * (n as f64).sqrt());
                }
                if n + 1 < self.base {
                    f(flipped + self.stride[k], g * ((n + 1) as f64).sqrt());
                }
            }
        }
    }

    fn dense(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            h[(r, r)] = self.diagonal(r);
            self.for_each_offdiag(r, |c, v| h[(r, c)] += v);
        }
        h
    }

    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        y.as_mut_slice().par_iter_mut().enumerate().for_each(|(r, out)| {
            let mut acc = self.diagonal(r) * x[r];
            self.for_each_offdiag(r, |c, v| acc += v * x[c]);
            *out = acc;
        });
    }
}

/// Lowest eigenvalue by Lanczos with full reorthogonalization.
fn lanczos_ground(op: &FockOperator, tol: f64, max_iter: usize) -> Result<f64> {
    let dim = op.dim;
    let mut v = DVector::from_fn(dim, |i, _| 1.0 + 0.5 * ((i as f64) * 0.7548776662466927).sin());
    v /= v.norm();
    let mut basis: Vec<DVector<f64>> = vec![v];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = DVector::zeros(dim);
    let mut last = f64::INFINITY;
    let steps = max_iter.min(dim);
    for j in 0..steps {
        op.apply(&basis[j], &mut w);
        let a = basis[j].dot(&w);
        alpha.push(a);
        // Two passes of classical Gram–Schmidt against the whole basis.
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let b = w.norm();
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (imin, theta) =
            eig.eigenvalues.iter().copied().enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty");
        let residual = b * eig.eigenvectors[(k - 1, imin)].abs();
        if residual <= tol * theta.abs().max(1.0) || b <= 1e-14 || k == dim {
            return Ok(theta);
        }
        if (theta - last).abs() <= 1e-15 * theta.abs().max(1.0) && residual <= 1e3 * tol {
            return Ok(theta);
        }
        last = theta;
        beta.push(b);
        basis.push(&w / b);
    }
    Err(Error::Eigensolver(format!("Lanczos did not converge in {steps} iterations")))
}

/// Ground-state energy of the full light–matter model.
pub fn exact_ground_energy(model: &FockModel) -> Result<f64> {
    let op = FockOperator::new(model)?;
    if op.dim <= DENSE_LIMIT {
        let eig = SymmetricEigen::new(op.dense());
        Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
    } else {
        lanczos_ground(&op, 1e-13, 600)
    }
}

/// Ground-state energy of `H_le − Σ_ij μ_i·λ_ij·μ_j σ_x^i σ_x^j` with `λ`
/// from the mode sum on the same modes.
pub fn effective_ground_energy(model: &FockModel) -> Result<f64> {
    model.validate()?;
    let lam = coupling_from_modes(&model.modes, &model.emitters)?;
    let heff = assemble_heff((), lam, &model.emitters)?;
    let c = heff.pair_coefficients()?;
    let n = model.emitters.len();
    let dim = 1usize << n;
    let shift = model.self_energy_constant();
    let h = DMatrix::from_fn(dim, dim, |r, col| {
        // ⟨r| σ_x^i σ_x^j |col⟩ is 1 when the two states differ exactly by
        // flipping i and j (nothing for i = j).
        let mut acc = 0.0;
        if r == col {
            acc += shift;
            for i in 0..n {
                let s = if r >> i & 1 == 1 { 1.0 } else { -1.0 };
                acc += 0.5 * model.splittings[i] * s;
                acc -= c[i][i];
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && r ^ col == (1 << i) | (1 << j) {
                    acc -= c[i][j];
                }
            }
        }
        acc
    });
    let eig = SymmetricEigen::new(h);
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceoutRow {
    pub eps_over_omega: f64,
    pub full_energy: f64,
    pub effective_energy: f64,
    pub energy_error: f64,
}

/// For each `x` in the grid set every splitting to `x · ω_min` and compare
/// full and effective ground energies.
pub fn traceout_error_sweep(model: &FockModel, eps_over_omega: &[f64]) -> Result<Vec<TraceoutRow>> {
    model.validate()?;
    let w_min = model.modes.modes.iter().map(|m| m.frequency).fold(f64::INFINITY, f64::min);
    if !w_min.is_finite() {
        return Err(Error::InvalidParameter("trace-out sweep needs at least one mode".into()));
    }
    eps_over_omega
        .iter()
        .map(|&x| {
            let m = model.with_splittings(vec![x * w_min; model.emitters.len()]);
            let full = exact_ground_energy(&m)?;
            let eff = effective_ground_energy(&m)?;
            Ok(TraceoutRow {
                eps_over_omega: x,
                full_energy: full,
                effective_energy: eff,
                energy_error: (full - eff).abs(),
            })
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Two horizontal mirrors at `z = lower` and `z = upper` with static
/// reflection strengths `f_lower`, `f_upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageSeriesConfig {
    pub lower: f64,
    pub upper: f64,
    pub f_lower: f64,
    pub f_upper: f64,
    /// Stop once an order contributes less than this fraction of the sum.
    pub threshold: f64,
    pub max_images: usize,
}

impl ImageSeriesConfig {
    pub fn new(lower: f64, upper: f64, f_lower: f64, f_upper: f64) -> Self {
        Self { lower, upper, f_lower, f_upper, threshold: 1e-12, max_images: 1_000_000 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.upper > self.lower) || !self.lower.is_finite() || !self.upper.is_finite() {
            return Err(Error::Geometry("mirror planes must be distinct and ordered".into()));
        }
        if self.f_lower.abs() > 1.0 || self.f_upper.abs() > 1.0 {
            return Err(Error::InvalidParameter("reflection strengths must satisfy |f| ≤ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummationOrder {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSeriesResult {
    pub value: Dyadic33,
    /// Highest reflection order included.
    pub orders: usize,
}

/// Contribution of reflection order `k ≥ 1`: the odd images
/// `2a − z' − 2(k−1)L`, `2a − z' + 2kL` and the even images `z' ± 2kL`.
fn image_order(cfg: &ImageSeriesConfig, r: &Vec3, rp: &Vec3, k: usize) -> Dyadic33 {
    let (a, l) = (cfg.lower, cfg.upper - cfg.lower);
    let (f1, f2) = (cfg.f_lower, cfg.f_upper);
    let kf = k as i32;
    let odd = Dyadic33::diag(-1.0, -1.0, 1.0);
    let at = |z: f64| Vec3::new(rp.x, rp.y, z);
    let term = |img: Vec3, coef: f64, sign: &Dyadic33| -> Dyadic33 {
        if coef == 0.0 {
            return Dyadic33::ZERO;
        }
        let d = *r - img;
        let rho = d.norm();
        let n = d * (1.0 / rho);
        let nn = Dyadic33::outer(&n, &n);
        let kern = (nn.scale(3.0) - Dyadic33::identity()).scale(1.0 / (4.0 * std::f64::consts::PI * rho.powi(3)));
        kern.matmul(sign).scale(0.5 * coef)
    };
    let id = Dyadic33::identity();
    let even = (f1 * f2).powi(kf);
    let mut acc = term(at(2.0 * a - rp.z - 2.0 * (k - 1) as f64 * l), f1.powi(kf) * f2.powi(kf - 1), &odd);
    acc += term(at(2.0 * a - rp.z + 2.0 * k as f64 * l), f2.powi(kf) * f1.powi(kf - 1), &odd);
    acc += term(at(rp.z + 2.0 * k as f64 * l), even, &id);
    acc += term(at(rp.z - 2.0 * k as f64 * l), even, &id);
    acc
}

/// Static scattered kernel `λ_S` of a two-mirror cavity by image summation.
pub fn image_series_static(cfg: &ImageSeriesConfig, r: &Vec3, rp: &Vec3) -> Result<Dyadic33> {
    Ok(image_series_ordered(cfg, r, rp, SummationOrder::Forward)?.value)
}

/// As [`image_series_static`], choosing the order in which the reflection
/// orders are accumulated. The truncation order is fixed by a forward pass
/// in both cases.
pub fn image_series_ordered(
    cfg: &ImageSeriesConfig,
    r: &Vec3,
    rp: &Vec3,
    order: SummationOrder,
) -> Result<ImageSeriesResult> {
    cfg.validate()?;
    for p in [r, rp] {
        if !(p.z > cfg.lower && p.z < cfg.upper) {
            return Err(Error::Geometry(format!(
                "point z = {} is not strictly between the mirrors ({}, {})",
                p.z, cfg.lower, cfg.upper
            )));
        }
    }
    let max_orders = (cfg.max_images / 4).max(1);
    let mut terms = Vec::new();
    let mut sum = Dyadic33::ZERO;
    let mut converged = false;
    for k in 1..=max_orders {
        let t = image_order(cfg, r, rp, k);
        sum += t;
        terms.push(t);
        let tn = t.norm();
        if tn == 0.0 && k > 1 || tn <= cfg.threshold * sum.norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        let last = terms.last().map_or(0.0, |t| t.norm());
        return Err(Error::Convergence {
            estimate: last / sum.norm().max(f64::MIN_POSITIVE),
            tolerance: cfg.threshold,
        });
    }
    let value = match order {
        SummationOrder::Forward => sum,
        SummationOrder::Reverse => terms.iter().rev().fold(Dyadic33::ZERO, |acc, t| acc + *t),
    };
    Ok(ImageSeriesResult { value, orders: terms.len() })
}
