use ep_encircle::model::{closed_form_energies, eigensystem, hamiltonian, path_point, NhParams, PathSpec};
use ep_encircle::numerics::{CMat2, CMat4};
use ep_encircle::nvcontrol::{reconstruct_hrot, synth_sample};
use ep_encircle::tomolab::{fidelity, invert_readout, is_physical, mle_project, simulate_readout, PlModel};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;

fn herm4() -> impl Strategy<Value = CMat4> {
    prop::collection::vec(-1.0f64..1.0, 32).prop_map(|v| {
        let mut m = CMat4::zeros();
        for k in 0..16 {
            m[(k / 4, k % 4)] = C64::new(v[2 * k], v[2 * k + 1]);
        }
        m.hermitian_part()
    })
}

fn density4() -> impl Strategy<Value = CMat4> {
    herm4().prop_map(|g| {
        let p = g * g.adjoint();
        p.scale_re(1.0 / p.trace().re)
    })
}

proptest! {
    #[test]
    fn vieta(delta in -2.0f64..2.0, g in -2.0f64..2.0, gamma in 0.0f64..2.0) {
        let p = NhParams { gamma, delta, g };
        let [a, b] = closed_form_energies(&p);
        prop_assert!((a + b).norm() < 1e-10);
        prop_assert!((a * b - hamiltonian(&p).det()).norm() < 1e-10);
        let e = eigensystem(&p);
        prop_assert!((e.e_alpha * e.e_beta - a * b).norm() < 1e-9);
    }

    #[test]
    fn path_is_periodic(theta0 in 0.0f64..6.3, radius in 0.1f64..0.9) {
        let path = PathSpec { theta0, radius, ..Default::default() };
        let (p0, p1) = (path_point(&path, 0.0), path_point(&path, path.period_t));
        prop_assert!((p0.delta - p1.delta).abs() < 1e-12 && (p0.g - p1.g).abs() < 1e-12);
    }

    #[test]
    fn readout_roundtrip(rho in density4()) {
        let pl = PlModel::default();
        let r = invert_readout(&simulate_readout::<ChaCha8Rng>(&rho, &pl, None), &pl).unwrap();
        prop_assert!((r[(0, 0)] - rho[(0, 0)]).norm() < 1e-10);
        prop_assert!((r[(0, 1)] - rho[(0, 2)]).norm() < 1e-10);
    }

    #[test]
    fn mle_is_physical_and_idempotent(x in herm4()) {
        let p = mle_project(&x);
        prop_assert!(is_physical(&p));
        prop_assert!((mle_project(&p) - p).max_abs() < 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric(a in density4(), b in density4()) {
        let (fab, fba) = (fidelity(&a, &b), fidelity(&b, &a));
        prop_assert!((fab - fba).abs() < 1e-10);
        prop_assert!((0.0..=1.0).contains(&fab));
        prop_assert!((fidelity(&a, &a) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pulse_roundtrip(c in prop::array::uniform8(-3.0f64..3.0), t in 0.0f64..15.0) {
        let (a, b) = ([c[0], c[1], c[2], c[3]], [c[4], c[5], c[6], c[7]]);
        let carriers = (1.0e4, 2.0e1);
        let w = synth_sample(t, &a, &b, carriers);
        let h = reconstruct_hrot(&w, a[0], a[3], b[0], b[3], carriers).unwrap();
        let lam = CMat2::from_real_rows([[a[0] + a[3], a[1]], [a[1], a[0] - a[3]]])
            + CMat2::from_rows([[C64::new(0.0, 0.0), C64::new(0.0, -a[2])], [C64::new(0.0, a[2]), C64::new(0.0, 0.0)]]);
        let gam = CMat2::from_real_rows([[b[0] + b[3], b[1]], [b[1], b[0] - b[3]]])
            + CMat2::from_rows([[C64::new(0.0, 0.0), C64::new(0.0, -b[2])], [C64::new(0.0, b[2]), C64::new(0.0, 0.0)]]);
        let z = CMat2::diag_real([1.0, -1.0]);
        let want = lam.kron(&CMat2::identity()) + gam.kron(&z);
        prop_assert!((h - want).max_abs() < 1e-10);
    }
}
