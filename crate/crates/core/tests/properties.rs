use std::f64::consts::PI;

use cavint::direct::{
    coupling_from_residue, coupling_from_spectrum, truncation_report, SpectralCutoff, SpectralSettings, TruncationKind,
};
use cavint::direct::{DiscreteMode, DiscreteModeSet};
use cavint::greens::{
    layered_scattered_g, mirror_static_g, GreensEvaluator, ImageMirror, Layer, LayerStack, Layered, MirrorSpec,
    Permittivity, SommerfeldSettings,
};
use cavint::mediator::{d_matrix, xi_matrix, DMethod, FieldSource, HmpMatrix, Mediator, XiMethod};
use cavint::oracle::{image_series_static, ImageSeriesConfig};
use cavint::{CVec3, Dyadic33, Emitter, Vec3};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lossy_cavity() -> LayerStack {
    LayerStack::cavity(
        Permittivity::Drude { omega_p: 8.0, gamma: 0.4 },
        Permittivity::Complex { re: 2.5, im: 0.3 },
        0.0,
        1.0,
    )
}

fn inside(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.15..0.85))
}

#[test]
fn layered_reciprocity() {
    let stack = lossy_cavity();
    let s = SommerfeldSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let (a, b) = (inside(&mut rng), inside(&mut rng));
        let w = rng.random_range(0.3..4.0);
        let g = layered_scattered_g(&stack, &a, &b, w, &s).unwrap();
        let gt = layered_scattered_g(&stack, &b, &a, w, &s).unwrap().transpose();
        assert!((g - gt).norm() <= 1e-10 * g.norm(), "{:e}", (g - gt).norm() / g.norm());
    }
}

#[test]
fn layered_passivity() {
    let env = Layered::new(lossy_cavity()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let (a, b) = (inside(&mut rng), inside(&mut rng));
        let w = rng.random_range(0.3..4.0);
        let im = |r: &Vec3, rp: &Vec3| -> Dyadic33 {
            let free = if r == rp {
                Dyadic33::identity().scale(w / (6.0 * PI))
            } else {
                cavint::greens::free_space_g(r, rp, w).unwrap().im()
            };
            free + env.scattered(r, rp, w).unwrap().im()
        };
        let blocks = [[im(&a, &a), im(&a, &b)], [im(&b, &a), im(&b, &b)]];
        let m = DMatrix::from_fn(6, 6, |r, c| blocks[r / 3][c / 3][(r % 3, c % 3)].re);
        let scale = m.norm();
        let sym = (&m + m.transpose()) * 0.5;
        let min = SymmetricEigen::new(sym).eigenvalues.min();
        assert!(min >= -1e-10 * scale, "min eigenvalue {min:e}");
    }
}

#[test]
fn static_limit_error_decreases_with_frequency() {
    let stack = LayerStack::half_space(Permittivity::Constant { eps: 3.0 }, 0.0);
    let m = MirrorSpec::horizontal(0.0, 0.5);
    let (a, b) = (Vec3::new(0.0, 0.0, 0.5), Vec3::new(0.4, 0.0, 0.7));
    let target = mirror_static_g(&m, &a, &b).unwrap();
    let s = SommerfeldSettings::default();
    let errs: Vec<f64> = [0.1, 0.05, 0.02, 0.01]
        .iter()
        .map(|&w| {
            let g = layered_scattered_g(&stack, &a, &b, w, &s).unwrap();
            g.scale(0.5 * w * w).re().rel_diff(&target)
        })
        .collect();
    assert!(errs.windows(2).all(|e| e[1] < e[0]), "{errs:?}");
}

#[test]
fn scattered_field_decays_away_from_interface() {
    let stack = LayerStack::half_space(Permittivity::Drude { omega_p: 5.0, gamma: 0.2 }, 0.0);
    let s = SommerfeldSettings::default();
    let norms: Vec<f64> = [0.5, 2.0, 8.0, 32.0]
        .iter()
        .map(|&h| {
            let g = layered_scattered_g(&stack, &Vec3::new(0.0, 0.0, h), &Vec3::new(0.3, 0.0, h), 1.0, &s).unwrap();
            g.norm()
        })
        .collect();
    assert!(norms.windows(2).all(|n| n[1] < n[0]), "{norms:?}");
    assert!(norms[3] < 0.1 * norms[0]);
}

#[test]
fn pec_cavity_static_matches_image_series() {
    let stack = LayerStack::cavity(
        Permittivity::Drude { omega_p: 1e4, gamma: 0.0 },
        Permittivity::Drude { omega_p: 1e4, gamma: 0.0 },
        0.0,
        1.0,
    );
    let env = Layered::new(stack).unwrap();
    let cfg = ImageSeriesConfig::new(0.0, 1.0, 1.0, 1.0);
    for (a, b) in [
        (Vec3::new(0.0, 0.0, 0.3), Vec3::new(0.0, 0.0, 0.6)),
        (Vec3::new(0.0, 0.0, 0.4), Vec3::new(0.0, 0.0, 0.4)),
        (Vec3::new(0.1, 0.0, 0.25), Vec3::new(0.5, -0.3, 0.7)),
    ] {
        let num = env.scattered_static(&a, &b).unwrap();
        let img = image_series_static(&cfg, &a, &b).unwrap();
        assert!(num.rel_diff(&img) <= 1e-5, "{:e}", num.rel_diff(&img));
    }
}

#[test]
fn layered_cavity_with_interior_film() {
    // A thin film inside the lower mirror changes nothing for a perfect
    // conductor below it.
    let film = LayerStack {
        layers: vec![
            Layer::semi_infinite(Permittivity::Drude { omega_p: 1e4, gamma: 0.0 }),
            Layer::finite(Permittivity::Constant { eps: 1.0 }, 0.2),
            Layer::semi_infinite(Permittivity::VACUUM),
        ],
        first_interface: -0.2,
        emitter_layer: 2,
    };
    let plain = LayerStack::half_space(Permittivity::Drude { omega_p: 1e4, gamma: 0.0 }, -0.2);
    let s = SommerfeldSettings::default();
    let (a, b) = (Vec3::new(0.0, 0.0, 0.3), Vec3::new(0.2, 0.1, 0.5));
    let g1 = layered_scattered_g(&film, &a, &b, 1.5, &s).unwrap();
    let g2 = layered_scattered_g(&plain, &a, &b, 1.5, &s).unwrap();
    assert!(g1.rel_diff(&g2) <= 1e-8);
}

#[test]
fn spectrum_and_residue_agree_for_mirror() {
    let env = ImageMirror::new(MirrorSpec::horizontal(0.0, 1.0)).unwrap();
    let e = [Emitter::new(Vec3::new(0.0, 0.0, 0.5), Vec3::Z), Emitter::new(Vec3::new(0.6, 0.0, 0.8), Vec3::X)];
    let residue = coupling_from_residue(&env, &e).unwrap();
    // ρ_Λ = 2 for the shortest distance in the problem.
    let cutoff = SpectralCutoff::from_rho_over_lambda(0.6_f64.hypot(0.3), 2.0);
    let spectral = coupling_from_spectrum(&env, &e, cutoff, &SpectralSettings::default()).unwrap();
    assert!(spectral.rel_diff(&residue) <= 1e-8, "{:e}", spectral.rel_diff(&residue));
    assert!(spectral.symmetry_defect() <= 1e-10);
}

#[test]
fn hard_truncation_in_cavity_is_misleading() {
    let env = Layered::new(LayerStack::cavity(
        Permittivity::Drude { omega_p: 200.0, gamma: 2.0 },
        Permittivity::Drude { omega_p: 200.0, gamma: 2.0 },
        0.0,
        1.0,
    ))
    .unwrap();
    let e = [Emitter::new(Vec3::new(0.0, 0.0, 0.5), Vec3::Z)];
    // First cavity resonance near π for a unit gap.
    let rows = truncation_report(
        &env,
        &e,
        &[0.0, 1.2 * PI],
        TruncationKind::Hard,
        &SpectralSettings {
            quad: cavint::quad::QuadSettings { rel_tol: 1e-6, abs_tol: 1e-12, max_subdivisions: 2000 },
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(rows[0].rel_error, 1.0);
    assert!(rows[1].rel_error > 0.1, "{}", rows[1].rel_error);
}

fn random_mediators(rng: &mut ChaCha8Rng, n: usize, omega: f64) -> Vec<Mediator> {
    (0..n)
        .map(|i| Mediator {
            position: Vec3::new(i as f64, 0.0, 0.0),
            dipole: CVec3::from_real(Vec3::Z),
            frequency: omega,
            coupling: Complex64::new(rng.random_range(0.2..1.0), rng.random_range(-0.3..0.3)),
        })
        .collect()
}

fn random_modes(rng: &mut ChaCha8Rng, n: usize, m: usize, zeta: f64) -> DiscreteModeSet {
    DiscreteModeSet::new(
        (0..m)
            .map(|_| DiscreteMode {
                frequency: rng.random_range(0.5..2.0),
                fields: (0..n)
                    .map(|_| {
                        CVec3::new(Complex64::ZERO, Complex64::ZERO, Complex64::new(rng.random_range(-zeta..zeta), 0.0))
                    })
                    .collect(),
            })
            .collect(),
        n,
    )
    .unwrap()
}

#[test]
fn perturbative_remainder_scaling() {
    let levels = [0.001, 0.01, 0.05];
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..10 {
        let n = rng.random_range(2..=4);
        let m = rng.random_range(5..=12);
        let med = random_mediators(&mut rng, n, 1.0);
        let seed: u64 = rng.random();
        let mut full = Vec::new();
        let mut induced = Vec::new();
        for &z in &levels {
            // Same mode pattern at every level, only rescaled.
            let modes = random_modes(&mut ChaCha8Rng::seed_from_u64(seed), n, m, z);
            let ex = xi_matrix(&med, FieldSource::Modes(&modes), XiMethod::Exact).unwrap().matrix;
            let pt = xi_matrix(&med, FieldSource::Modes(&modes), XiMethod::Perturbative).unwrap().matrix;
            let bare =
                DMatrix::from_fn(n, n, |i, j| if i == j { med[i].coupling.norm_sqr().into() } else { Complex64::ZERO });
            let rem = (&ex - &pt).norm();
            full.push(rem / ex.norm());
            induced.push(rem / (&ex - &bare).norm());
        }
        for (k, &z) in levels.iter().enumerate() {
            assert!(full[k] <= 10.0 * z * z, "level {z}: {:e}", full[k]);
        }
        for k in 0..2 {
            let expected = (levels[k + 1] / levels[k]).powi(2);
            let got = induced[k + 1] / induced[k];
            assert!(got / expected < 3.0 && expected / got < 3.0, "ratio {got} vs {expected}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn d_matrix_routes_agree(
        om in prop::collection::vec(0.5f64..2.0, 1..5),
        ow in prop::collection::vec(0.3f64..3.0, 1..12),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zeta = DMatrix::from_fn(om.len(), ow.len(), |_, _| {
            Complex64::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1))
        });
        let h = HmpMatrix::from_blocks(&om, &ow, &zeta).unwrap();
        let a = d_matrix(&h, DMethod::Eigensum).unwrap();
        let b = d_matrix(&h, DMethod::InverseBlock).unwrap();
        let s = d_matrix(&h, DMethod::Schur).unwrap();
        prop_assert!((&a - &b).norm() <= 1e-12 * a.norm());
        prop_assert!((&a - &s).norm() <= 1e-12 * a.norm());
        prop_assert!((&a - a.adjoint()).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn mirror_coupling_is_symmetric(
        f in -1.0f64..1.0,
        h1 in 0.1f64..2.0, h2 in 0.1f64..2.0,
        x in -2.0f64..2.0, y in -2.0f64..2.0,
    ) {
        let env = ImageMirror::new(MirrorSpec::horizontal(0.0, f)).unwrap();
        let e = [
            Emitter::new(Vec3::new(0.0, 0.0, h1), Vec3::Z),
            Emitter::new(Vec3::new(x, y, h2), Vec3::X),
        ];
        let lam = coupling_from_residue(&env, &e).unwrap();
        prop_assert!(lam.symmetry_defect() <= 1e-10);
        let direct = env.total_static(&e[1].position, &e[0].position).unwrap();
        prop_assert!(lam.block(1, 0).rel_diff(&direct) <= 1e-12);
    }
}
