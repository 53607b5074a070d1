//! Scenario dispatch. Each runner fills tables row by row so that a failure
//! part-way through still leaves the completed rows behind.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use cavint::direct::{coupling_from_residue, coupling_from_spectrum, CouplingMatrix, SpectralCutoff};
use cavint::greens::{FreeSpace, GreensEvaluator, ImageMirror, LayerStack, Layered, MirrorSpec};
use cavint::mediator::{rel_variation, resonance_sweep};
use cavint::oracle::{loglog_slope, traceout_error_sweep};
use cavint::{interaction_energy, Emitter, UnitSystem, Vec3};

use crate::config::{CutoffConfig, CutoffKind, EnvironmentConfig, Prepared, ScenarioConfig, ScenarioKind};

/// A CSV table: header plus pre-formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }
}

/// Round-trip scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub estimates: BTreeMap<String, f64>,
    /// Index into `tables` of the table that was being filled when `failure` occurred.
    pub partial: Option<usize>,
    pub failure: Option<cavint::Error>,
}

impl Outcome {
    fn fail(&mut self, table: usize, err: cavint::Error) {
        self.partial = Some(table);
        self.failure = Some(err);
    }

    fn estimate(&mut self, key: &str, value: f64) {
        let e = self.estimates.entry(key.to_string()).or_insert(0.0);
        *e = e.max(value);
    }
}

pub fn run(cfg: &ScenarioConfig, prep: &Prepared) -> Outcome {
    match cfg.kind {
        ScenarioKind::DirectFreeSpace | ScenarioKind::DirectLayered => run_direct(cfg, prep),
        ScenarioKind::TruncationStudy => run_truncation(cfg, prep),
        ScenarioKind::MediatorSweep => run_mediator(cfg, prep),
        ScenarioKind::TraceoutValidation => run_traceout(cfg, prep),
    }
}

fn evaluator(env: &Option<EnvironmentConfig>) -> cavint::Result<Box<dyn GreensEvaluator>> {
    Ok(match env {
        None | Some(EnvironmentConfig::FreeSpace) => Box::new(FreeSpace),
        Some(EnvironmentConfig::Mirror { normal, offset, strength }) => Box::new(ImageMirror::new(MirrorSpec {
            normal: Vec3::from_array(*normal),
            offset: *offset,
            strength: *strength,
        })?),
        Some(EnvironmentConfig::Layered { first_interface, emitter_layer, layers }) => {
            Box::new(Layered::new(LayerStack {
                layers: layers.clone(),
                first_interface: *first_interface,
                emitter_layer: *emitter_layer,
            })?)
        }
    })
}

/// Natural-unit cutoff frequencies for the grid, with the matching `ρ/Λ`.
fn cutoff_grid(c: &CutoffConfig, rho: f64, units: &UnitSystem) -> Vec<(f64, f64)> {
    match (&c.omega, &c.rho_over_lambda) {
        (Some(g), _) => g
            .iter()
            .map(|&w| {
                let k = units.frequency_to_natural(w);
                (k, k * rho / (2.0 * PI))
            })
            .collect(),
        (None, Some(g)) => g.iter().map(|&x| (2.0 * PI * x / rho, x)).collect(),
        (None, None) => Vec::new(),
    }
}

fn spectral_cutoff(kind: CutoffKind, omega: f64) -> SpectralCutoff {
    match kind {
        CutoffKind::Gaussian => SpectralCutoff::Gaussian { omega_c: omega },
        CutoffKind::Hard => SpectralCutoff::Hard { omega_max: omega },
    }
}

fn coupling_table(lam: &CouplingMatrix, emitters: &[Emitter], units: &UnitSystem) -> cavint::Result<Table> {
    const AXES: [&str; 3] = ["x", "y", "z"];
    let mut header = vec!["i".to_string(), "j".to_string()];
    for a in AXES {
        for b in AXES {
            header.push(format!("lambda_{a}{b}"));
        }
    }
    header.push("pair_energy".into());
    let mut t = Table { name: "coupling_matrix.csv".into(), header, rows: Vec::new() };
    for i in 0..lam.n {
        for j in 0..lam.n {
            let b = lam.block(i, j);
            let mut row = vec![i.to_string(), j.to_string()];
            for r in 0..3 {
                for c in 0..3 {
                    row.push(num(units.coupling_from_natural(b.0[r][c].re)));
                }
            }
            let e = interaction_energy(&emitters[i].dipole, b, &emitters[j].dipole)?;
            row.push(num(units.coupling_from_natural(e)));
            t.rows.push(row);
        }
    }
    Ok(t)
}

fn run_direct(cfg: &ScenarioConfig, prep: &Prepared) -> Outcome {
    let mut out = Outcome::default();
    let units = &prep.units;
    let g = match evaluator(&cfg.environment) {
        Ok(g) => g,
        Err(e) => {
            out.failure = Some(e);
            return out;
        }
    };
    let residue = match coupling_from_residue(g.as_ref(), &prep.emitters)
        .and_then(|lam| coupling_table(&lam, &prep.emitters, units).map(|t| (lam, t)))
    {
        Ok((lam, t)) => {
            out.tables.push(t);
            out.estimate("residue_error_estimate", lam.error_estimate);
            out.estimate("residue_symmetry_defect", lam.symmetry_defect());
            lam
        }
        Err(e) => {
            out.failure = Some(e);
            return out;
        }
    };

    let Some(cut) = &cfg.cutoff else { return out };
    let [a, b] = cfg.pair_indices();
    let pair = [prep.emitters[a], prep.emitters[b]];
    let rho = (pair[0].position - pair[1].position).norm();
    let reference = *residue.block(a, b);
    let mut t =
        Table::new("cutoff_convergence.csv", &["rho_over_lambda", "lambda_zz", "lambda_xx", "rel_error_vs_residue"]);
    let settings = cfg.spectral_settings();
    let ti = out.tables.len();
    for (omega, x) in cutoff_grid(cut, rho, units) {
        match coupling_from_spectrum(g.as_ref(), &pair, spectral_cutoff(cut.kind, omega), &settings) {
            Ok(lam) => {
                let blk = lam.block(0, 1);
                out.estimate("spectral_error_estimate", lam.error_estimate);
                t.rows.push(vec![
                    num(x),
                    num(units.coupling_from_natural(blk.0[2][2].re)),
                    num(units.coupling_from_natural(blk.0[0][0].re)),
                    num(blk.max_entry_rel_diff(&reference)),
                ]);
            }
            Err(e) => {
                out.tables.push(t);
                out.fail(ti, e);
                return out;
            }
        }
    }
    out.tables.push(t);
    out
}

fn run_truncation(cfg: &ScenarioConfig, prep: &Prepared) -> Outcome {
    let mut out = Outcome::default();
    let units = &prep.units;
    let result =
        evaluator(&cfg.environment).and_then(|g| coupling_from_residue(g.as_ref(), &prep.emitters).map(|r| (g, r)));
    let (g, reference) = match result {
        Ok(v) => v,
        Err(e) => {
            out.failure = Some(e);
            return out;
        }
    };
    out.estimate("residue_error_estimate", reference.error_estimate);
    let cut = cfg.cutoff.as_ref().expect("validated");
    let [a, b] = cfg.pair_indices();
    let rho = (prep.emitters[a].position - prep.emitters[b].position).norm();
    let mut t = Table::new(
        "truncation.csv",
        &["omega_cut", "rho_over_lambda", "lambda_zz", "lambda_xx", "rel_error_vs_residue"],
    );
    let settings = cfg.spectral_settings();
    for (omega, x) in cutoff_grid(cut, rho, units) {
        match coupling_from_spectrum(g.as_ref(), &prep.emitters, spectral_cutoff(cut.kind, omega), &settings) {
            Ok(lam) => {
                out.estimate("spectral_error_estimate", lam.error_estimate);
                let blk = lam.block(a, b);
                t.rows.push(vec![
                    num(units.frequency_from_natural(omega)),
                    num(x),
                    num(units.coupling_from_natural(blk.0[2][2].re)),
                    num(units.coupling_from_natural(blk.0[0][0].re)),
                    num(lam.rel_diff(&reference)),
                ]);
            }
            Err(e) => {
                out.tables.push(t);
                out.fail(0, e);
                return out;
            }
        }
    }
    out.tables.push(t);
    out
}

fn run_mediator(cfg: &ScenarioConfig, prep: &Prepared) -> Outcome {
    let mut out = Outcome::default();
    let units = &prep.units;
    let modes = prep.modes.as_ref().expect("validated");
    let grid = cfg.sweep.expect("validated").grid();
    let n_pol = prep.mediators.len() + modes.len();
    let mut header = vec![
        "Omega".to_string(),
        "xi_offdiag_re".into(),
        "xi_offdiag_normalized".into(),
        "xi_truncated_normalized".into(),
    ];
    header.extend((0..n_pol).map(|k| format!("polariton_freq_{k}")));
    let mut t = Table { name: "resonance_sweep.csv".into(), header, rows: Vec::new() };
    let (mut exact, mut trunc) = (Vec::new(), Vec::new());
    let mut outside = 0usize;
    for w in grid {
        let omega = units.frequency_to_natural(w);
        match resonance_sweep(&prep.mediators, modes, &[omega]) {
            Ok(rep) => {
                let r = &rep.rows[0];
                out.estimates.insert("mode_kernel_offdiag".into(), rep.mode_kernel_offdiag);
                exact.push(r.xi_normalized);
                trunc.push(r.xi_truncated_normalized);
                outside += r.outside_perturbative as usize;
                let mut row = vec![
                    num(w),
                    num(units.energy_from_natural(r.xi_offdiag.re)),
                    num(r.xi_normalized),
                    num(r.xi_truncated_normalized),
                ];
                row.extend(r.polariton_frequencies.iter().map(|&f| num(units.frequency_from_natural(f))));
                t.rows.push(row);
            }
            Err(e) => {
                out.tables.push(t);
                out.fail(0, e);
                return out;
            }
        }
    }
    out.tables.push(t);
    out.estimates.insert("xi_normalized_variation".into(), rel_variation(&exact));
    out.estimates.insert("xi_truncated_variation".into(), rel_variation(&trunc));
    out.estimates.insert("rows_outside_perturbative".into(), outside as f64);
    out
}

fn run_traceout(cfg: &ScenarioConfig, prep: &Prepared) -> Outcome {
    let mut out = Outcome::default();
    let model = prep.fock.as_ref().expect("validated");
    let grid = &cfg.fock.as_ref().expect("validated").eps_over_omega;
    let mut t = Table::new("traceout_error.csv", &["eps_over_omega", "energy_error"]);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &x in grid {
        match traceout_error_sweep(model, &[x]) {
            Ok(rows) => {
                let err = prep.units.energy_from_natural(rows[0].energy_error);
                if x > 0.0 && err > 0.0 {
                    xs.push(x);
                    ys.push(err);
                }
                t.rows.push(vec![num(x), num(err)]);
            }
            Err(e) => {
                out.tables.push(t);
                out.fail(0, e);
                return out;
            }
        }
    }
    out.tables.push(t);
    if xs.len() >= 2 {
        out.estimates.insert("loglog_slope".into(), loglog_slope(&xs, &ys));
    }
    out
}
