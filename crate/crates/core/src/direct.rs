//! Direct vacuum-field coupling `λ_ij` between emitters by three routes:
//! a sum over discrete modes, a frequency integral of `Im G`, and the
//! zero-frequency residue of `ω² G`.
//!
//! Every [`CouplingMatrix`] holds the kernel that enters
//! `H_eff = H_le − Σ_{i,j} μ_i·λ_ij·μ_j` with the double sum over ordered
//! pairs, so the free-space static block between distinct emitters is the
//! halved dipole kernel `(3nn − I)/(8πρ³)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{interaction_energy, CVec3, Dyadic33, Emitter, Vec3};
use crate::greens::GreensEvaluator;
use crate::quad::{integrate_with_breakpoints, QuadSettings};

/// One normal mode: frequency and field sampled at each emitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMode {
    pub frequency: f64,
    pub fields: Vec<CVec3>,
}

/// A discrete set of modes sampled on a fixed emitter roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteModeSet {
    pub modes: Vec<DiscreteMode>,
    pub emitter_count: usize,
}

impl DiscreteModeSet {
    pub fn new(modes: Vec<DiscreteMode>, emitter_count: usize) -> Result<Self> {
        let set = Self { modes, emitter_count };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        for (n, m) in self.modes.iter().enumerate() {
            if !(m.frequency > 0.0 && m.frequency.is_finite()) {
                return Err(Error::InvalidParameter(format!("mode {n} has non-positive frequency {}", m.frequency)));
            }
            if m.fields.len() != self.emitter_count {
                return Err(Error::Dimension(format!(
                    "mode {n} is sampled at {} emitters, roster has {}",
                    m.fields.len(),
                    self.emitter_count
                )));
            }
            if m.fields.iter().any(|e| !e.is_finite()) {
                return Err(Error::InvalidParameter(format!("mode {n} has a non-finite field")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Discretize the spectral density `(ω²/π) Im G(r_i, r_j, ω)` of `g` on
    /// `bins` equal frequency bins over `[0, omega_max]`.
    ///
    /// In each bin the `3N × 3N` matrix of `Im G` at the bin centre is
    /// diagonalized; every positive eigenvalue becomes one real mode. The
    /// diagonal blocks include the free-space part `Im G₀(r, r) = ω/6π`.
    pub fn from_spectral_density(
        g: &dyn GreensEvaluator,
        positions: &[Vec3],
        omega_max: f64,
        bins: usize,
    ) -> Result<Self> {
        if !(omega_max > 0.0) || bins == 0 {
            return Err(Error::InvalidParameter("spectral window needs ω_max > 0 and at least one bin".into()));
        }
        let n = positions.len();
        let dw = omega_max / bins as f64;
        let per_bin: Vec<Vec<DiscreteMode>> = (0..bins)
            .into_par_iter()
            .map(|b| -> Result<Vec<DiscreteMode>> {
                let w = (b as f64 + 0.5) * dw;
                let mut m = DMatrix::<f64>::zeros(3 * n, 3 * n);
                for i in 0..n {
                    for j in i..n {
                        let block = if i == j {
                            crate::greens::free_space_im_g(&positions[i], &positions[i], w)?
                                + g.scattered(&positions[i], &positions[i], w)?.im()
                        } else {
                            g.total(&positions[i], &positions[j], w)?.im()
                        };
                        for k in 0..3 {
                            for kp in 0..3 {
                                m[(3 * i + k, 3 * j + kp)] = block[(k, kp)].re;
                                m[(3 * j + kp, 3 * i + k)] = block[(k, kp)].re;
                            }
                        }
                    }
                }
                let eig = SymmetricEigen::new(m);
                let scale = w * w * dw / PI;
                let top = eig.eigenvalues.amax();
                let mut modes = Vec::new();
                for (c, &ev) in eig.eigenvalues.iter().enumerate() {
                    if ev <= 1e-14 * top {
                        continue;
                    }
                    let amp = (ev * scale).sqrt();
                    let v = eig.eigenvectors.column(c);
                    let fields = (0..n)
                        .map(|i| CVec3::from_real(Vec3::new(v[3 * i], v[3 * i + 1], v[3 * i + 2]) * amp))
                        .collect();
                    modes.push(DiscreteMode { frequency: w, fields });
                }
                Ok(modes)
            })
            .collect::<Result<_>>()?;
        Self::new(per_bin.into_iter().flatten().collect(), n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Modes,
    Spectrum,
    Residue,
}

/// Frequency weighting of the spectral integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralCutoff {
    /// Weight `e^{−ω²/ω_c²}`.
    Gaussian { omega_c: f64 },
    /// Integrate `[0, ω_max]` with unit weight.
    Hard { omega_max: f64 },
}

impl SpectralCutoff {
    /// Gaussian cutoff at wavelength `Λ = ρ / ρ_Λ`, i.e. `ω_c = 2π ρ_Λ / ρ`.
    pub fn from_rho_over_lambda(rho: f64, rho_over_lambda: f64) -> Self {
        SpectralCutoff::Gaussian { omega_c: 2.0 * PI * rho_over_lambda / rho }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpectralCutoff::Gaussian { omega_c } if !(omega_c > 0.0 && omega_c.is_finite()) => {
                Err(Error::InvalidParameter(format!("cutoff frequency must be positive, got {omega_c}")))
            }
            SpectralCutoff::Hard { omega_max } if !(omega_max >= 0.0 && omega_max.is_finite()) => {
                Err(Error::InvalidParameter(format!("cutoff frequency must be non-negative, got {omega_max}")))
            }
            _ => Ok(()),
        }
    }

    fn weight(&self, omega: f64) -> f64 {
        match *self {
            SpectralCutoff::Gaussian { omega_c } => (-(omega / omega_c).powi(2)).exp(),
            SpectralCutoff::Hard { .. } => 1.0,
        }
    }
}

/// Controls for [`coupling_from_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSettings {
    pub quad: QuadSettings,
    /// Gaussian integrals are truncated at `gaussian_extent · ω_c`.
    pub gaussian_extent: f64,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        Self { quad: QuadSettings { rel_tol: 1e-12, abs_tol: 1e-15, max_subdivisions: 20000 }, gaussian_extent: 7.0 }
    }
}

/// `N × N` grid of coupling blocks `λ_ij`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    pub n: usize,
    pub blocks: Vec<Dyadic33>,
    pub route: Route,
    pub cutoff: Option<SpectralCutoff>,
    /// Largest quadrature error estimate over all blocks (0 for exact routes).
    pub error_estimate: f64,
}

impl CouplingMatrix {
    pub fn zeros(n: usize, route: Route) -> Self {
        Self { n, blocks: vec![Dyadic33::ZERO; n * n], route, cutoff: None, error_estimate: 0.0 }
    }

    pub fn block(&self, i: usize, j: usize) -> &Dyadic33 {
        &self.blocks[i * self.n + j]
    }

    fn set_pair(&mut self, i: usize, j: usize, b: Dyadic33) {
        self.blocks[j * self.n + i] = b.transpose();
        self.blocks[i * self.n + j] = b;
    }

    /// Frobenius norm over all blocks.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm().powi(2)).sum::<f64>().sqrt()
    }

    /// `‖self − other‖ / ‖other‖` over all blocks.
    pub fn rel_diff(&self, other: &CouplingMatrix) -> f64 {
        let num: f64 = self.blocks.iter().zip(&other.blocks).map(|(a, b)| (*a - *b).norm().powi(2)).sum::<f64>().sqrt();
        let den = other.norm();
        if den == 0.0 {
            if num == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            num / den
        }
    }

    /// `max_{ij} ‖λ_ji − λ_ijᵀ‖ / ‖λ‖`.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.norm().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((*self.block(j, i) - self.block(i, j).transpose()).norm());
            }
        }
        worst / scale
    }

    /// Imaginary part relative to the total norm.
    pub fn imag_defect(&self) -> f64 {
        let im: f64 = self.blocks.iter().map(|b| b.im().norm().powi(2)).sum::<f64>().sqrt();
        im / self.norm().max(f64::MIN_POSITIVE)
    }

    /// Drop the (negligible) imaginary parts.
    pub fn real_part(mut self) -> Self {
        for b in &mut self.blocks {
            *b = b.re();
        }
        self
    }
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

/// `λ_ij = Σ_n Re[E_n(r_i) ⊗ E_n*(r_j)] / ω_n`.
pub fn coupling_from_modes(modes: &DiscreteModeSet, emitters: &[Emitter]) -> Result<CouplingMatrix> {
    modes.validate()?;
    if modes.is_empty() {
        return Err(Error::InvalidParameter("mode set is empty".into()));
    }
    let n = emitters.len();
    if modes.emitter_count != n {
        return Err(Error::Dimension(format!("mode set sampled on {} emitters, roster has {n}", modes.emitter_count)));
    }
    let mut out = CouplingMatrix::zeros(n, Route::Modes);
    for (i, j) in pairs(n) {
        let mut acc = Dyadic33::ZERO;
        for m in &modes.modes {
            acc += Dyadic33::outer_c(&m.fields[i], &m.fields[j].conj()).re().scale(1.0 / m.frequency);
        }
        out.set_pair(i, j, acc);
    }
    Ok(out)
}

/// `λ_ij = (1/π) ∫₀^∞ dω w(ω) ω Im G(r_i, r_j, ω)` with cutoff weight `w`.
///
/// Self-blocks use the scattered part only; the divergent free-space
/// self-term belongs to the single-emitter Hamiltonian.
pub fn coupling_from_spectrum(
    g: &dyn GreensEvaluator,
    emitters: &[Emitter],
    cutoff: SpectralCutoff,
    settings: &SpectralSettings,
) -> Result<CouplingMatrix> {
    cutoff.validate()?;
    if let Err((i, j)) = crate::geometry::check_distinct(emitters) {
        return Err(Error::Geometry(format!("emitters {i} and {j} coincide")));
    }
    let n = emitters.len();
    let upper = match cutoff {
        SpectralCutoff::Gaussian { omega_c } => settings.gaussian_extent * omega_c,
        SpectralCutoff::Hard { omega_max } => omega_max,
    };
    let results: Vec<(Dyadic33, f64)> = pairs(n)
        .into_par_iter()
        .map(|(i, j)| {
            let (ri, rj) = (emitters[i].position, emitters[j].position);
            if upper == 0.0 {
                return Ok((Dyadic33::ZERO, 0.0));
            }
            // One initial panel per half oscillation of e^{iωρ}.
            let rho = (ri - rj).norm();
            let panels = ((upper * rho / PI).ceil() as usize).clamp(1, 4096);
            let points: Vec<f64> = (0..=panels).map(|p| upper * p as f64 / panels as f64).collect();
            let mut failure: Option<Error> = None;
            let integrand = |w: f64| -> Dyadic33 {
                if failure.is_some() {
                    return Dyadic33::ZERO;
                }
                let gw = if i == j { g.scattered(&ri, &rj, w) } else { g.total(&ri, &rj, w) };
                match gw {
                    Ok(v) => v.im().scale(w * cutoff.weight(w) / PI),
                    Err(e) => {
                        failure = Some(e);
                        Dyadic33::ZERO
                    }
                }
            };
            let res = integrate_with_breakpoints(integrand, &points, &settings.quad);
            if let Some(e) = failure {
                return Err(e);
            }
            let res = res?;
            Ok((res.value, res.error))
        })
        .collect::<Result<_>>()?;
    let mut out = CouplingMatrix::zeros(n, Route::Spectrum);
    out.cutoff = Some(cutoff);
    for ((i, j), (v, err)) in pairs(n).into_iter().zip(results) {
        out.set_pair(i, j, v);
        out.error_estimate = out.error_estimate.max(err);
    }
    Ok(out)
}

/// `λ_ij = ½ [ω² G(r_i, r_j, ω)]_{ω=0}`; self-blocks from `G_S` only.
pub fn coupling_from_residue(g: &dyn GreensEvaluator, emitters: &[Emitter]) -> Result<CouplingMatrix> {
    if let Err((i, j)) = crate::geometry::check_distinct(emitters) {
        return Err(Error::Geometry(format!("emitters {i} and {j} coincide")));
    }
    let n = emitters.len();
    let blocks: Vec<Dyadic33> = pairs(n)
        .into_par_iter()
        .map(|(i, j)| {
            let (ri, rj) = (&emitters[i].position, &emitters[j].position);
            if i == j {
                g.scattered_static(ri, rj)
            } else {
                g.total_static(ri, rj)
            }
        })
        .collect::<Result<_>>()?;
    let mut out = CouplingMatrix::zeros(n, Route::Residue);
    for ((i, j), b) in pairs(n).into_iter().zip(blocks) {
        out.set_pair(i, j, b);
    }
    Ok(out)
}

/// Free-space Gaussian-cutoff kernel normalized by `8πρ³`:
///
/// ```text
/// 4π^{5/2} x³ e^{−π²x²} (I − nn) + (erf(πx) − 2√π x e^{−π²x²}) (3nn − I),   x = ρ/Λ
/// ```
pub fn cutoff_kernel_closed_form(rho_over_lambda: f64, n: &Vec3) -> Dyadic33 {
    let x = rho_over_lambda;
    let g = (-(PI * x).powi(2)).exp();
    let nn = Dyadic33::outer(n, n);
    let id = Dyadic33::identity();
    let a = 4.0 * PI.powf(2.5) * x.powi(3) * g;
    let b = 1.0 - libm::erfc(PI * x) - 2.0 * PI.sqrt() * x * g;
    (id - nn).scale(a) + (nn.scale(3.0) - id).scale(b)
}

/// Un-normalized Gaussian-cutoff kernel between two points for cutoff
/// wavelength `lambda_c`.
pub fn cutoff_kernel(r: &Vec3, rp: &Vec3, lambda_c: f64) -> Result<Dyadic33> {
    let d = *r - *rp;
    let rho = d.norm();
    let n = d.normalized().ok_or(Error::CoincidentPoints(rho))?;
    if !(lambda_c > 0.0) {
        return Err(Error::InvalidParameter(format!("cutoff wavelength must be positive, got {lambda_c}")));
    }
    Ok(cutoff_kernel_closed_form(rho / lambda_c, &n).scale(1.0 / (8.0 * PI * rho.powi(3))))
}

/// `H_eff = H_le − Σ_{i,j} μ_i·λ_ij·μ_j` with an opaque matter part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveHamiltonianSpec<H> {
    pub matter: H,
    pub coupling: CouplingMatrix,
    pub emitters: Vec<Emitter>,
}

impl<H> EffectiveHamiltonianSpec<H> {
    /// `c_ij = μ_i·λ_ij·μ_j`; the induced term is `−Σ_ij c_ij μ̂_i μ̂_j` over
    /// ordered pairs with `μ̂_i` in units of `|μ_i|`.
    pub fn pair_coefficients(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.emitters.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        interaction_energy(
                            &self.emitters[i].dipole,
                            self.coupling.block(i, j),
                            &self.emitters[j].dipole,
                        )
                    })
                    .collect()
            })
            .collect()
    }

    /// Classical value `−Σ_ij c_ij` of the induced term for aligned dipoles.
    pub fn interaction_term(&self) -> Result<f64> {
        Ok(-self.pair_coefficients()?.iter().flatten().sum::<f64>())
    }
}

pub fn assemble_heff<H>(
    matter: H,
    coupling: CouplingMatrix,
    emitters: &[Emitter],
) -> Result<EffectiveHamiltonianSpec<H>> {
    if coupling.n != emitters.len() || coupling.blocks.len() != coupling.n * coupling.n {
        return Err(Error::Dimension(format!(
            "coupling matrix is {}×{}, roster has {} emitters",
            coupling.n,
            coupling.n,
            emitters.len()
        )));
    }
    if coupling.imag_defect() > 1e-10 {
        return Err(Error::InvalidCoupling(coupling.imag_defect()));
    }
    Ok(EffectiveHamiltonianSpec { matter, coupling: coupling.real_part(), emitters: emitters.to_vec() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationKind {
    /// Sharp upper limit at each grid frequency.
    Hard,
    /// Gaussian weight with `ω_c` equal to each grid frequency.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub omega_max: f64,
    pub lambda: CouplingMatrix,
    pub rel_error: f64,
}

/// Partial spectral couplings over an ascending frequency grid, each
/// compared with the residue in Frobenius norm.
pub fn truncation_report(
    g: &dyn GreensEvaluator,
    emitters: &[Emitter],
    omega_grid: &[f64],
    kind: TruncationKind,
    settings: &SpectralSettings,
) -> Result<Vec<TruncationRow>> {
    if omega_grid.is_empty() {
        return Err(Error::InvalidParameter("frequency grid is empty".into()));
    }
    if omega_grid.windows(2).any(|w| !(w[1] > w[0])) || omega_grid[0] < 0.0 {
        return Err(Error::InvalidParameter("frequency grid must be non-negative and ascending".into()));
    }
    let reference = coupling_from_residue(g, emitters)?;
    omega_grid
        .iter()
        .map(|&w| {
            let lambda = if w == 0.0 {
                let mut z = CouplingMatrix::zeros(emitters.len(), Route::Spectrum);
                z.cutoff = Some(SpectralCutoff::Hard { omega_max: 0.0 });
                z
            } else {
                let cutoff = match kind {
                    TruncationKind::Hard => SpectralCutoff::Hard { omega_max: w },
                    TruncationKind::Gaussian => SpectralCutoff::Gaussian { omega_c: w },
                };
                coupling_from_spectrum(g, emitters, cutoff, settings)?
            };
            let rel_error = lambda.rel_diff(&reference);
            Ok(TruncationRow { omega_max: w, lambda, rel_error })
        })
        .collect()
}

/// Real field vector as a `CVec3`.
pub fn cvec(x: f64, y: f64, z: f64) -> CVec3 {
    CVec3::new(Complex64::new(x, 0.0), Complex64::new(y, 0.0), Complex64::new(z, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::{electrostatic_kernel, FreeSpace, ImageMirror, MirrorSpec};
    use proptest::prelude::*;

    fn pair_z(rho: f64) -> Vec<Emitter> {
        vec![Emitter::new(Vec3::ZERO, Vec3::Z), Emitter::new(Vec3::new(0.0, 0.0, rho), Vec3::Z)]
    }

    #[test]
    fn single_mode_sum() {
        let m = DiscreteMode { frequency: 1.0, fields: vec![cvec(1.0, 0.0, 0.0), cvec(1.0, 0.0, 0.0)] };
        let set = DiscreteModeSet::new(vec![m], 2).unwrap();
        let lam = coupling_from_modes(&set, &pair_z(1.0)).unwrap();
        for b in &lam.blocks {
            assert_eq!(*b, Dyadic33::diag(1.0, 0.0, 0.0));
        }
    }

    #[test]
    fn uncoupled_emitter_has_zero_row() {
        let m = DiscreteMode { frequency: 2.0, fields: vec![cvec(0.3, 1.0, 0.0), CVec3::ZERO] };
        let set = DiscreteModeSet::new(vec![m], 2).unwrap();
        let lam = coupling_from_modes(&set, &pair_z(1.0)).unwrap();
        assert_eq!(*lam.block(1, 0), Dyadic33::ZERO);
        assert_eq!(*lam.block(0, 1), Dyadic33::ZERO);
        assert_eq!(*lam.block(1, 1), Dyadic33::ZERO);
    }

    #[test]
    fn roster_mismatch_is_rejected() {
        let m = DiscreteMode { frequency: 1.0, fields: vec![cvec(1.0, 0.0, 0.0)] };
        let set = DiscreteModeSet::new(vec![m], 1).unwrap();
        assert!(matches!(coupling_from_modes(&set, &pair_z(1.0)), Err(Error::Dimension(_))));
    }

    #[test]
    fn residue_free_space_is_static_kernel() {
        let e = pair_z(1.0);
        let lam = coupling_from_residue(&FreeSpace, &e).unwrap();
        assert_eq!(*lam.block(0, 1), electrostatic_kernel(&Vec3::ZERO, &Vec3::Z).unwrap());
        assert!((lam.block(0, 1)[(2, 2)].re - 2.0 / (8.0 * PI)).abs() < 1e-15);
        assert_eq!(*lam.block(0, 0), Dyadic33::ZERO);
    }

    #[test]
    fn residue_pec_mirror_self_block() {
        let g = ImageMirror::new(MirrorSpec::horizontal(0.0, 1.0)).unwrap();
        let e = vec![Emitter::new(Vec3::new(0.0, 0.0, 0.5), Vec3::Z)];
        let lam = coupling_from_residue(&g, &e).unwrap();
        assert!((lam.block(0, 0)[(2, 2)].re - 1.0 / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn hard_cutoff_at_zero_is_empty() {
        let lam = coupling_from_spectrum(
            &FreeSpace,
            &pair_z(1.0),
            SpectralCutoff::Hard { omega_max: 0.0 },
            &Default::default(),
        )
        .unwrap();
        assert_eq!(lam.norm(), 0.0);
    }

    #[test]
    fn invalid_cutoff_is_rejected() {
        let r = coupling_from_spectrum(
            &FreeSpace,
            &pair_z(1.0),
            SpectralCutoff::Gaussian { omega_c: -1.0 },
            &Default::default(),
        );
        assert!(matches!(r, Err(Error::InvalidParameter(m)) if m.contains("cutoff frequency must be positive")));
    }

    #[test]
    fn closed_form_limits() {
        let n = Vec3::new(1.0, 2.0, -0.5).normalized().unwrap();
        assert_eq!(cutoff_kernel_closed_form(0.0, &n).norm(), 0.0);
        let nn = Dyadic33::outer(&n, &n);
        let k = nn.scale(3.0) - Dyadic33::identity();
        assert!(cutoff_kernel_closed_form(3.0, &n).max_entry_rel_diff(&k) <= 1e-15);
    }

    #[test]
    fn spectral_matches_closed_form() {
        let e = vec![Emitter::new(Vec3::new(0.1, -0.2, 0.0), Vec3::Z), Emitter::new(Vec3::new(0.4, 0.5, 0.7), Vec3::X)];
        let rho = (e[0].position - e[1].position).norm();
        for x in [0.25, 0.5, 1.0, 2.0] {
            let lam = coupling_from_spectrum(
                &FreeSpace,
                &e,
                SpectralCutoff::from_rho_over_lambda(rho, x),
                &Default::default(),
            )
            .unwrap();
            let exact = cutoff_kernel(&e[0].position, &e[1].position, rho / x).unwrap();
            assert!(lam.block(0, 1).rel_diff(&exact) < 1e-9, "x={x}: {:e}", lam.block(0, 1).rel_diff(&exact));
            assert!(lam.symmetry_defect() == 0.0);
        }
    }

    #[test]
    fn discretized_modes_match_spectrum() {
        let e = pair_z(1.0);
        let w_max = 12.0;
        let set =
            DiscreteModeSet::from_spectral_density(&FreeSpace, &[e[0].position, e[1].position], w_max, 600).unwrap();
        let modes = coupling_from_modes(&set, &e).unwrap();
        let spectral =
            coupling_from_spectrum(&FreeSpace, &e, SpectralCutoff::Hard { omega_max: w_max }, &Default::default())
                .unwrap();
        let d = modes.block(0, 1).rel_diff(spectral.block(0, 1));
        assert!(d < 1e-2, "{d:e}");
    }

    #[test]
    fn heff_pair_term() {
        let e = pair_z(1.0);
        let lam = coupling_from_residue(&FreeSpace, &e).unwrap();
        let h = assemble_heff((), lam, &e).unwrap();
        let expected = -2.0 * 2.0 / (8.0 * PI);
        assert!((h.interaction_term().unwrap() - expected).abs() < 1e-15);
        let zero = assemble_heff((), CouplingMatrix::zeros(2, Route::Residue), &e).unwrap();
        assert_eq!(zero.interaction_term().unwrap(), 0.0);
        assert!(assemble_heff((), CouplingMatrix::zeros(3, Route::Residue), &e).is_err());
    }

    #[test]
    fn heff_single_mode() {
        let g = 0.3;
        let e = vec![Emitter::new(Vec3::ZERO, Vec3::X)];
        let set =
            DiscreteModeSet::new(vec![DiscreteMode { frequency: 2.0, fields: vec![cvec(g, 0.0, 0.0)] }], 1).unwrap();
        let h = assemble_heff((), coupling_from_modes(&set, &e).unwrap(), &e).unwrap();
        assert!((h.interaction_term().unwrap() + g * g / 2.0).abs() < 1e-15);
    }

    #[test]
    fn truncation_report_first_row() {
        let e = pair_z(1.0);
        let rows =
            truncation_report(&FreeSpace, &e, &[0.0, 4.0 * PI], TruncationKind::Gaussian, &Default::default()).unwrap();
        assert_eq!(rows[0].rel_error, 1.0);
        assert!(rows[1].rel_error < 1e-8);
        assert!(truncation_report(&FreeSpace, &e, &[1.0, 0.5], TruncationKind::Hard, &Default::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn mode_sums_are_symmetric(
            fields in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 9), 1..6),
            freqs in prop::collection::vec(0.1f64..3.0, 6),
        ) {
            let modes = fields
                .iter()
                .zip(&freqs)
                .map(|(f, &w)| DiscreteMode {
                    frequency: w,
                    fields: (0..3).map(|i| CVec3::new(
                        Complex64::new(f[3 * i], f[(3 * i + 4) % 9]),
                        Complex64::new(f[3 * i + 1], 0.0),
                        Complex64::new(f[3 * i + 2], -f[(3 * i + 1) % 9]),
                    )).collect(),
                })
                .collect();
            let set = DiscreteModeSet::new(modes, 3).unwrap();
            let e: Vec<Emitter> = (0..3).map(|i| Emitter::new(Vec3::new(i as f64, 0.0, 0.0), Vec3::Z)).collect();
            let lam = coupling_from_modes(&set, &e).unwrap();
            prop_assert!(lam.symmetry_defect() <= 1e-10);
            prop_assert!(lam.imag_defect() == 0.0);
        }
    }
}
