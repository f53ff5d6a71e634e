use qbd_poisson::linalg::{self, Mat};
use qbd_poisson::qme::{self, Classification, QmeOptions, QmeSolutions};
use qbd_poisson::spectral;
use qbd_poisson::verify;

const CLASSES: [Classification; 3] =
    [Classification::PositiveRecurrent, Classification::Transient, Classification::NullRecurrent];

fn models() -> impl Iterator<Item = (u64, usize, Classification, qbd_poisson::QbdModel)> {
    CLASSES.into_iter().flat_map(|class| {
        (0..100u64).map(move |seed| {
            let m = 1 + (seed as usize % 6);
            let model = verify::random_model(seed, m, class).unwrap();
            (seed, m, class, model)
        })
    })
}

#[test]
fn residuals_nonnegativity_and_row_sums() {
    for (seed, _, class, model) in models() {
        let s = QmeSolutions::compute(&model, &QmeOptions::default()).unwrap();
        assert!(s.residuals.max() <= 1e-10, "seed {seed} {class}: {:?}", s.residuals);
        for x in [&s.g, &s.g_hat, &s.r, &s.r_hat] {
            assert!(x.iter().all(|&v| v >= 0.0), "seed {seed} {class}: negative entry");
        }
        for x in [&s.g, &s.g_hat] {
            assert!(x.row_iter().all(|row| row.sum() <= 1.0 + 1e-10));
        }
        let id = linalg::identity(model.m());
        let u = model.a0() + model.a1() * &s.g;
        assert!(linalg::norm_inf(&(&u - &s.u)) <= 1e-10);
        assert!(linalg::norm_inf(&(&s.r * (&id - &s.u) - model.a1())) <= 1e-10);
        assert!(s.warnings.is_empty(), "seed {seed} {class}: {:?}", s.warnings);
        let (g_unit, g_hat_unit) = ((s.sp_g - 1.0).abs() < 1e-8, (s.sp_g_hat - 1.0).abs() < 1e-8);
        match class {
            Classification::PositiveRecurrent => assert!(g_unit && !g_hat_unit),
            Classification::Transient => assert!(!g_unit && g_hat_unit),
            Classification::NullRecurrent => assert!(g_unit && g_hat_unit),
        }
    }
}

#[test]
fn cyclic_reduction_agrees_with_functional_iteration() {
    for class in [Classification::PositiveRecurrent, Classification::Transient] {
        for seed in 0..20u64 {
            let m = 1 + (seed as usize % 4);
            let model = verify::random_model(seed, m, class).unwrap();
            let s = QmeSolutions::compute(&model, &QmeOptions::default()).unwrap();
            let fi = verify::functional_iteration(model.a_minus(), model.a0(), model.a1(), 1e-13, 2_000_000).unwrap();
            let diff = (&fi - &s.g).abs().max();
            assert!(diff <= 1e-6, "seed {seed} {class}: {diff}");
            assert!(fi.iter().zip(s.g.iter()).all(|(a, b)| *a <= b + 1e-12));
        }
    }
}

#[test]
fn roots_interlace() {
    for (seed, m, class, model) in models() {
        let s = QmeSolutions::compute(&model, &QmeOptions::default()).unwrap();
        let roots = qme::char_roots(&s);
        assert!(qme::roots_interlace(&roots, m, 1e-8), "seed {seed} {class}: {roots:?}");
    }
}

#[test]
fn split_of_g_hat() {
    for (seed, m, class, model) in models() {
        let s = QmeSolutions::compute(&model, &QmeOptions::default()).unwrap();
        let eps = spectral::default_eps_zero(&s.g_hat);
        let sp = spectral::split(&s.g_hat, eps).unwrap_or_else(|e| panic!("seed {seed} {class}: {e}"));
        let r = sp.residuals(&s.g_hat);
        assert!(r.max() <= 1e-10, "seed {seed} {class} m={m}: {r:?}");
        assert!(r.nilpotency_exact);
        assert!(sp.nu <= m - sp.p || sp.p == m);
        for z in linalg::eigenvalues(&sp.v1) {
            assert!(z.norm() > eps);
        }
        for k in 0..(m + 3) {
            let d = linalg::norm_inf(&(sp.power(k) - linalg::mat_pow(&s.g_hat, k)));
            assert!(d <= 1e-8, "seed {seed} {class} k={k}: {d}");
        }
        let gl: Mat = &s.g_hat * &sp.l - &sp.l * &sp.v1;
        let gk: Mat = &s.g_hat * &sp.k - &sp.k * &sp.v0;
        assert!(linalg::norm_inf(&gl) <= 1e-10 && linalg::norm_inf(&gk) <= 1e-10, "seed {seed} {class}");
    }
}
