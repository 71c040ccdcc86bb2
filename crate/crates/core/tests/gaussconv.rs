use polyfront::gaussconv::{
    inner, psi0, rayleigh_quotient, run_decay, w_decompose, DecayConfig, InitialProfile,
};
use polyfront::{RadialField, RadialGrid};
use proptest::prelude::*;

fn cfg(d: usize) -> DecayConfig {
    DecayConfig {
        d,
        ..DecayConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    /// Radial functions orthogonal to the ground state sit above the gap.
    #[test]
    fn spectral_gap_holds_off_the_ground_state(
        d in 2usize..=4,
        coeffs in prop::collection::vec(-1.0f64..1.0, 4),
        widths in prop::collection::vec(0.5f64..3.0, 4),
    ) {
        let grid = RadialGrid::new(d, 16.0, 1600).unwrap();
        let p0 = psi0(grid);
        let mut f = RadialField::from_fn(grid, |r| {
            coeffs.iter().zip(&widths).map(|(c, w)| c * (-r * r / (4.0 * w)).exp()).sum()
        });
        let c = inner(&f, &p0);
        f.values.iter_mut().zip(&p0.values).for_each(|(v, p)| *v -= c * p);
        prop_assume!(inner(&f, &f) > 1e-12);
        let q = rayleigh_quotient(&f).unwrap();
        prop_assert!(q >= 0.5 - 1e-6, "Rayleigh quotient {}", q);
    }

    /// The projection on the ground state is the mass.
    #[test]
    fn projection_equals_mass(variance in 0.8f64..1.6, d in 2usize..=4) {
        let grid = RadialGrid::new(d, 12.0, 1200).unwrap();
        let g = InitialProfile::Gaussian { variance }.sample(grid).unwrap();
        let frame = w_decompose(&g).unwrap();
        prop_assert!((frame.projection - g.volume_integral()).abs() < 1e-10);
        prop_assert!(inner(&frame.w_perp, &frame.psi0).abs() < 1e-10);
    }
}

#[test]
fn decay_is_insensitive_to_the_outer_radius() {
    let base = cfg(4);
    let a = run_decay(&base).unwrap();
    let b = run_decay(&DecayConfig {
        r_max: 2.0 * base.r_max,
        ..base
    })
    .unwrap();
    assert!((a.rate - b.rate).abs() < 1e-3, "{} vs {}", a.rate, b.rate);
}

#[test]
fn gaussian_data_decays_monotonically_after_the_transient() {
    for d in [3, 4] {
        let rep = run_decay(&cfg(d)).unwrap();
        assert!(rep.eventually_decreasing(2.0), "d = {d}");
    }
}

#[test]
fn gaussian_envelope_stays_within_ten_times_its_start() {
    for d in [3, 4] {
        let rep = run_decay(&cfg(d)).unwrap();
        assert!(rep.max_envelope <= 10.0 * rep.initial_envelope, "d = {d}");
        assert!(rep.records.iter().all(|r| (r.mass - 1.0).abs() < 1e-6));
    }
}

#[test]
fn linear_relaxation_decays_at_the_second_hermite_rate() {
    // Radial data has no odd Hermite modes, so the slowest surviving linear
    // mode is |alpha| = 2 with eigenvalue 1.
    let rep = run_decay(&DecayConfig {
        nonlinearity: false,
        ..cfg(3)
    })
    .unwrap();
    assert!((rep.rate + 1.0).abs() < 0.02, "{}", rep.rate);
}

#[test]
fn d3_decay_is_frozen() {
    let rep = run_decay(&cfg(3)).unwrap();
    // Validated pipeline values for sigma^2 = 1.3, tau_max = 15.
    assert!((rep.rate + 0.5127).abs() < 2e-3, "{}", rep.rate);
    assert!((rep.sup_bound_ratio - 0.3898).abs() < 2e-3, "{}", rep.sup_bound_ratio);
}
