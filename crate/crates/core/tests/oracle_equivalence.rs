//! Full enumerated-record equivalence between the population engine and the
//! statevector engine, over every variant and chain sizes up to n = 4.

use eigencast::engine_eigen::Variant;
use eigencast::engine_statevector::cross_check_variant;
use eigencast::spectral::{build_zzxz, diagonalize, Boundary, SpinChainSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn weights(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() + 0.01).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

#[test]
fn engines_agree_on_every_record() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for n in 2..=4usize {
        let spec = SpinChainSpec {
            n,
            zz_coupling: 1.0,
            x_field: 0.9,
            z_field: 0.4,
            boundary: if n % 2 == 0 {
                Boundary::Open
            } else {
                Boundary::Periodic
            },
        };
        let ed = diagonalize(&build_zzxz(&spec).unwrap()).unwrap();
        let dim = 1 << n;
        for tau in [0.41, 1.7, 5.3] {
            let a = weights(&mut rng, dim);
            let b = weights(&mut rng, dim);
            let dev = cross_check_variant(Variant::Single, &ed, &[b.clone()], tau).unwrap();
            assert!(dev < TOL, "single n={n} tau={tau}: {dev:.2e}");
            for variant in [Variant::TwoBell, Variant::TwoSwap, Variant::Schmidt] {
                let dev =
                    cross_check_variant(variant, &ed, &[a.clone(), b.clone()], tau).unwrap();
                assert!(dev < TOL, "{variant:?} n={n} tau={tau}: {dev:.2e}");
            }
            let dev = cross_check_variant(
                Variant::MultiSymmetric,
                &ed,
                &[a.clone(), a.clone(), b.clone()],
                tau,
            )
            .unwrap();
            assert!(dev < TOL, "multi p=3 n={n} tau={tau}: {dev:.2e}");
        }
    }
}

#[test]
fn engines_agree_for_four_devices() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let spec = SpinChainSpec {
        n: 2,
        zz_coupling: 1.0,
        x_field: 0.7,
        z_field: 0.3,
        boundary: Boundary::Open,
    };
    let ed = diagonalize(&build_zzxz(&spec).unwrap()).unwrap();
    for tau in [0.8, 2.9] {
        let devs: Vec<Vec<f64>> = (0..4).map(|_| weights(&mut rng, 4)).collect();
        let dev = cross_check_variant(Variant::MultiSymmetric, &ed, &devs, tau).unwrap();
        assert!(dev < TOL, "multi p=4 tau={tau}: {dev:.2e}");
    }
}
