//! Mediator-assisted coupling: localized bosonic modes (frequency `Ω_i`)
//! coupled to matter with strength `Γ_i` and to the field in the
//! rotating-wave approximation with `ζ_in = ν_i*·E_n(r_i)`.
//!
//! The quadratic mediator–photon Hamiltonian
//!
//! ```text
//! H_mp = [[Ω, ζ], [ζ†, ω]]
//! ```
//!
//! is diagonalized into polaritons. Eliminating them yields
//! `ξ_ij = Γ_i* D_ij Γ_j` with `D` the mediator block of `H_mp⁻¹`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::direct::{coupling_from_residue, DiscreteModeSet};
use crate::error::{Error, Result};
use crate::geometry::{CVec3, Emitter, Vec3};
use crate::greens::GreensEvaluator;

pub type CMatrix = DMatrix<Complex64>;

const HERMITIAN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mediator {
    pub position: Vec3,
    pub dipole: CVec3,
    pub frequency: f64,
    pub coupling: Complex64,
}

impl Mediator {
    pub fn validate(&self) -> Result<()> {
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mediator frequency must be positive, got {}",
                self.frequency
            )));
        }
        if !self.dipole.is_finite() || !self.coupling.is_finite() || !self.position.is_finite() {
            return Err(Error::InvalidParameter("mediator parameters must be finite".into()));
        }
        Ok(())
    }
}

/// `(N + M) × (N + M)` Hermitian block matrix, mediators first.
#[derive(Debug, Clone, PartialEq)]
pub struct HmpMatrix {
    pub n_mediators: usize,
    pub n_modes: usize,
    pub matrix: CMatrix,
}

impl HmpMatrix {
    /// Build directly from the blocks: `omega_med` (N), `omega_modes` (M)
    /// and the `N × M` coupling `zeta`.
    pub fn from_blocks(omega_med: &[f64], omega_modes: &[f64], zeta: &CMatrix) -> Result<Self> {
        let (n, m) = (omega_med.len(), omega_modes.len());
        if zeta.nrows() != n || zeta.ncols() != m {
            return Err(Error::Dimension(format!("ζ is {}×{}, expected {n}×{m}", zeta.nrows(), zeta.ncols())));
        }
        for &w in omega_med.iter().chain(omega_modes) {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter(format!("frequencies must be positive, got {w}")));
            }
        }
        let mut h = CMatrix::zeros(n + m, n + m);
        for (i, &w) in omega_med.iter().enumerate() {
            h[(i, i)] = w.into();
        }
        for (k, &w) in omega_modes.iter().enumerate() {
            h[(n + k, n + k)] = w.into();
        }
        for i in 0..n {
            for k in 0..m {
                h[(i, n + k)] = zeta[(i, k)];
                h[(n + k, i)] = zeta[(i, k)].conj();
            }
        }
        Ok(Self { n_mediators: n, n_modes: m, matrix: h })
    }

    pub fn dim(&self) -> usize {
        self.n_mediators + self.n_modes
    }

    pub fn omega_block(&self) -> CMatrix {
        let n = self.n_mediators;
        self.matrix.view((n, n), (self.n_modes, self.n_modes)).into_owned()
    }

    pub fn mediator_block(&self) -> CMatrix {
        let n = self.n_mediators;
        self.matrix.view((0, 0), (n, n)).into_owned()
    }

    pub fn zeta(&self) -> CMatrix {
        let n = self.n_mediators;
        self.matrix.view((0, n), (n, self.n_modes)).into_owned()
    }

    /// `‖H − H†‖ / ‖H‖`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = (&self.matrix - self.matrix.adjoint()).norm();
        d / self.matrix.norm().max(f64::MIN_POSITIVE)
    }
}

/// `ζ_in = ν_i*·E_n(r_i)`, with the mode fields sampled at the mediators.
pub fn assemble_hmp(mediators: &[Mediator], modes: &DiscreteModeSet) -> Result<HmpMatrix> {
    modes.validate()?;
    if modes.emitter_count != mediators.len() {
        return Err(Error::Dimension(format!(
            "modes sampled at {} sites, {} mediators given",
            modes.emitter_count,
            mediators.len()
        )));
    }
    for m in mediators {
        m.validate()?;
    }
    let zeta = CMatrix::from_fn(mediators.len(), modes.len(), |i, n| {
        mediators[i].dipole.conj().dot(&modes.modes[n].fields[i])
    });
    let om: Vec<f64> = mediators.iter().map(|m| m.frequency).collect();
    let ow: Vec<f64> = modes.modes.iter().map(|m| m.frequency).collect();
    HmpMatrix::from_blocks(&om, &ow, &zeta)
}

/// Eigenbasis of `H_mp`: ascending frequencies and unitary `U` whose
/// columns are the polaritons; rows `0..N` form the mediator block `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolaritonBasis {
    pub frequencies: Vec<f64>,
    pub u: CMatrix,
    pub n_mediators: usize,
}

impl PolaritonBasis {
    pub fn c_block(&self) -> CMatrix {
        self.u.rows(0, self.n_mediators).into_owned()
    }

    /// First polariton with non-positive frequency, if any.
    pub fn first_unstable(&self) -> Option<(usize, f64)> {
        self.frequencies.iter().copied().enumerate().find(|&(_, w)| w <= 0.0)
    }

    pub fn is_stable(&self) -> bool {
        self.first_unstable().is_none()
    }

    /// `D_ij = Σ_n C_in C_jn* / ω̃_n`.
    pub fn d_matrix(&self) -> Result<CMatrix> {
        if let Some((index, frequency)) = self.first_unstable() {
            return Err(Error::Instability { index, frequency });
        }
        let n = self.n_mediators;
        Ok(CMatrix::from_fn(n, n, |i, j| {
            self.frequencies.iter().enumerate().map(|(p, &w)| self.u[(i, p)] * self.u[(j, p)].conj() / w).sum()
        }))
    }

    /// `‖U†U − I‖`.
    pub fn unitarity_defect(&self) -> f64 {
        let k = self.u.ncols();
        (self.u.adjoint() * &self.u - CMatrix::identity(k, k)).norm()
    }
}

pub fn diagonalize_polaritons(h: &HmpMatrix) -> Result<PolaritonBasis> {
    let defect = h.hermiticity_defect();
    if defect > HERMITIAN_TOLERANCE {
        return Err(Error::NonHermitian(defect));
    }
    if !h.matrix.iter().all(|z| z.is_finite()) {
        return Err(Error::Eigensolver("matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(h.matrix.clone());
    let dim = h.dim();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let mut u = CMatrix::zeros(dim, dim);
    let mut freqs = Vec::with_capacity(dim);
    for (col, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).into_owned();
        // Phase convention: first non-negligible component real and positive.
        let vmax = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if let Some(z) = v.iter().find(|z| z.norm() > 1e-10 * vmax).copied() {
            v *= z.conj() / z.norm();
        }
        u.set_column(col, &v);
        freqs.push(eig.eigenvalues[src]);
    }
    Ok(PolaritonBasis { frequencies: freqs, u, n_mediators: h.n_mediators })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DMethod {
    Eigensum,
    InverseBlock,
    Schur,
}

/// Cholesky factor of a Hermitian positive-definite matrix. The complex
/// factorization does not fail on indefinite input (the square root of a
/// negative pivot is imaginary), so the pivots are checked explicitly.
fn hpd_cholesky(m: &CMatrix) -> Option<nalgebra::Cholesky<Complex64, nalgebra::Dyn>> {
    let c = m.clone().cholesky()?;
    let ok = c.l_dirty().diagonal().iter().all(|d| d.re > 0.0 && d.im.abs() <= 1e-12 * d.re);
    ok.then_some(c)
}

/// Diagnostic for a non-positive-definite `H_mp`: the lowest polariton.
fn instability_of(h: &CMatrix) -> Error {
    let eig = SymmetricEigen::new(h.clone());
    let frequency = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    Error::Instability { index: 0, frequency }
}

/// Mediator block `D` of `H_mp⁻¹`.
pub fn d_matrix(h: &HmpMatrix, method: DMethod) -> Result<CMatrix> {
    let defect = h.hermiticity_defect();
    if defect > HERMITIAN_TOLERANCE {
        return Err(Error::NonHermitian(defect));
    }
    let n = h.n_mediators;
    match method {
        DMethod::Eigensum => diagonalize_polaritons(h)?.d_matrix(),
        DMethod::InverseBlock => {
            // Positive definiteness is exactly the stability condition.
            let chol = hpd_cholesky(&h.matrix).ok_or_else(|| instability_of(&h.matrix))?;
            Ok(chol.inverse().view((0, 0), (n, n)).into_owned())
        }
        DMethod::Schur => {
            let omega = h.omega_block();
            let zeta = h.zeta();
            let winv = if h.n_modes == 0 {
                CMatrix::zeros(0, 0)
            } else {
                omega.clone().try_inverse().ok_or_else(|| Error::SingularMatrix("photon block is singular".into()))?
            };
            let s = h.mediator_block() - &zeta * winv * zeta.adjoint();
            let s = (&s + s.adjoint()) * Complex64::new(0.5, 0.0);
            match hpd_cholesky(&s) {
                Some(c) if h.n_modes == 0 || hpd_cholesky(&omega).is_some() => Ok(c.inverse()),
                _ => Err(instability_of(&h.matrix)),
            }
        }
    }
}

/// `K = ζ ω⁻¹ ζ†`, the mode-sum kernel `Σ_n ζ_in ζ_jn* / ω_n`.
pub fn mode_kernel(h: &HmpMatrix) -> CMatrix {
    let n = h.n_mediators;
    let zeta = h.zeta();
    CMatrix::from_fn(n, n, |i, j| {
        (0..h.n_modes).map(|k| zeta[(i, k)] * zeta[(j, k)].conj() / h.matrix[(n + k, n + k)].re).sum()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiMethod {
    Exact,
    Perturbative,
    Electrostatic,
}

/// Effective matter–matter coupling `ξ_ij`; only `Re ξ` enters energies.
#[derive(Debug, Clone, PartialEq)]
pub struct XiMatrix {
    pub matrix: CMatrix,
    pub method: XiMethod,
}

impl XiMatrix {
    /// `‖ξ − ξ†‖ / ‖ξ‖`.
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).norm() / self.matrix.norm().max(f64::MIN_POSITIVE)
    }
}

/// Field information for [`xi_matrix`].
#[derive(Clone, Copy)]
pub enum FieldSource<'a> {
    Modes(&'a DiscreteModeSet),
    Greens(&'a dyn GreensEvaluator),
}

fn common_frequency(mediators: &[Mediator]) -> Result<f64> {
    let w = mediators.first().ok_or_else(|| Error::InvalidParameter("no mediators".into()))?.frequency;
    if mediators.iter().any(|m| (m.frequency - w).abs() > 1e-12 * w) {
        return Err(Error::Unsupported("perturbative and electrostatic ξ need a single mediator frequency".into()));
    }
    Ok(w)
}

/// `Γ_i* Γ_j δ_ij / Ω + Γ_i* Γ_j K_ij / Ω²`.
fn xi_from_kernel(mediators: &[Mediator], omega: f64, k: &CMatrix) -> CMatrix {
    let n = mediators.len();
    CMatrix::from_fn(n, n, |i, j| {
        let gg = mediators[i].coupling.conj() * mediators[j].coupling;
        let first = if i == j { gg / omega } else { Complex64::new(0.0, 0.0) };
        first + gg * k[(i, j)] / (omega * omega)
    })
}

pub fn xi_matrix(mediators: &[Mediator], source: FieldSource<'_>, method: XiMethod) -> Result<XiMatrix> {
    for m in mediators {
        m.validate()?;
    }
    let n = mediators.len();
    let matrix = match (method, source) {
        (XiMethod::Exact, FieldSource::Modes(modes)) => {
            let d = d_matrix(&assemble_hmp(mediators, modes)?, DMethod::Eigensum)?;
            CMatrix::from_fn(n, n, |i, j| mediators[i].coupling.conj() * d[(i, j)] * mediators[j].coupling)
        }
        (XiMethod::Perturbative, FieldSource::Modes(modes)) => {
            let omega = common_frequency(mediators)?;
            xi_from_kernel(mediators, omega, &mode_kernel(&assemble_hmp(mediators, modes)?))
        }
        (XiMethod::Electrostatic, FieldSource::Greens(g)) => {
            let omega = common_frequency(mediators)?;
            let sites: Vec<Emitter> = mediators.iter().map(|m| Emitter::new(m.position, Vec3::ZERO)).collect();
            let lam = coupling_from_residue(g, &sites)?;
            let k = CMatrix::from_fn(n, n, |i, j| {
                lam.block(i, j).contract(&mediators[i].dipole.conj(), &mediators[j].dipole)
            });
            xi_from_kernel(mediators, omega, &k)
        }
        (m, _) => {
            return Err(Error::Unsupported(format!("ξ method {m:?} does not accept this field source")));
        }
    };
    Ok(XiMatrix { matrix, method })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub omega: f64,
    /// Exact `ξ_01`.
    pub xi_offdiag: Complex64,
    /// `Re(ξ_01 Ω² / Γ_0* Γ_1)`.
    pub xi_normalized: f64,
    /// Same normalization using only the polariton with the largest weight
    /// on the mode closest to `Ω`.
    pub xi_truncated_normalized: f64,
    pub polariton_frequencies: Vec<f64>,
    /// `max |ζ| / Ω > 0.05`.
    pub outside_perturbative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// `Re K_01`, the Ω-independent limit of the normalized coupling.
    pub mode_kernel_offdiag: f64,
}

/// `(max − min) / max |·|` of a series.
pub fn rel_variation(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        0.0
    } else {
        (max - min) / scale
    }
}

/// Sweep a common mediator frequency through the mode spectrum and record
/// the normalized off-diagonal coupling between mediators 0 and 1.
pub fn resonance_sweep(mediators: &[Mediator], modes: &DiscreteModeSet, omega_sweep: &[f64]) -> Result<SweepReport> {
    if mediators.len() < 2 {
        return Err(Error::InvalidParameter("resonance sweep needs at least two mediators".into()));
    }
    if modes.is_empty() {
        return Err(Error::InvalidParameter("resonance sweep needs at least one mode".into()));
    }
    let g0g1 = mediators[0].coupling.conj() * mediators[1].coupling;
    if g0g1.norm() == 0.0 {
        return Err(Error::InvalidParameter("mediator couplings Γ must be non-zero".into()));
    }
    let base = assemble_hmp(mediators, modes)?;
    let k01 = mode_kernel(&base)[(0, 1)].re;
    let zeta_max = base.zeta().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let rows = omega_sweep
        .par_iter()
        .map(|&omega| -> Result<SweepRow> {
            let mut h = base.clone();
            for i in 0..h.n_mediators {
                h.matrix[(i, i)] = omega.into();
            }
            if !(omega > 0.0) {
                return Err(Error::InvalidParameter(format!("sweep frequency must be positive, got {omega}")));
            }
            let basis = diagonalize_polaritons(&h)?;
            let d = basis.d_matrix()?;
            let xi = g0g1 * d[(0, 1)];
            let nearest = (0..h.n_modes)
                .min_by(|&a, &b| {
                    let da = (modes.modes[a].frequency - omega).abs();
                    let db = (modes.modes[b].frequency - omega).abs();
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .expect("non-empty modes");
            let row = h.n_mediators + nearest;
            let p = (0..basis.frequencies.len())
                .max_by(|&a, &b| basis.u[(row, a)].norm().total_cmp(&basis.u[(row, b)].norm()).then(b.cmp(&a)))
                .expect("non-empty basis");
            let d_trunc = basis.u[(0, p)] * basis.u[(1, p)].conj() / basis.frequencies[p];
            Ok(SweepRow {
                omega,
                xi_offdiag: xi,
                xi_normalized: (xi * omega * omega / g0g1).re,
                xi_truncated_normalized: (d_trunc * omega * omega).re,
                polariton_frequencies: basis.frequencies.clone(),
                outside_perturbative: zeta_max / omega > 0.05,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepReport { rows, mode_kernel_offdiag: k01 })
}
