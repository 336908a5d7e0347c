use asip_core::observables::*;
use asip_core::quantmix::*;

/// `M_p` for `Q ≡ 1` and `α(n) = min(1, n^{−ρ})`: `α⁻¹ = q` on
/// `[q^{−ρ}, (q−1)^{−ρ})`, summed directly with an integral tail.
fn analytic_m_oracle(rho: f64, p: f64) -> f64 {
    let terms = 2_000_000u64;
    let mut sum = 0.0;
    for q in (2..=terms).rev() {
        let qf = q as f64;
        sum += qf.powf(p - 1.0) * ((qf - 1.0).powf(-rho) - qf.powf(-rho));
    }
    // q^{p−1}·ρ q^{−ρ−1} integrated past the cut
    let cut = terms as f64 + 0.5;
    sum + rho * cut.powf(p - 1.0 - rho) / (rho + 1.0 - p)
}

#[test]
fn alpha_inverse_examples() {
    let geo = MixingProfile::geometric(0.5).unwrap();
    assert_eq!(geo.alpha_inverse(0.25).unwrap().q, 2);
    assert_eq!(geo.alpha_inverse(1.0).unwrap().q, 0);
    let ana = MixingProfile::analytic(1.0, 3.0).unwrap();
    assert_eq!(ana.alpha_inverse(0.001).unwrap().q, 10);
    assert!(geo.alpha_inverse(0.0).is_err());
}

#[test]
fn rate_examples() {
    let one = QuantileFn::constant(1.0).unwrap();
    let geo = MixingProfile::geometric(0.5).unwrap();
    assert_eq!(rate_r(&geo, &one, 0.25).unwrap(), 2.0);
    assert_eq!(rate_r(&geo, &one, 1.0).unwrap(), 0.0);
    let q = QuantileFn::power(1.0, 3.0).unwrap();
    let ana = MixingProfile::analytic(1.0, 3.0).unwrap();
    assert!((rate_r(&ana, &q, 0.001).unwrap() - 100.0).abs() < 1e-9);
}

#[test]
fn geometric_moment_closed_form() {
    let one = QuantileFn::constant(1.0).unwrap();
    let m = moment_m(&MixingProfile::geometric(0.5).unwrap(), &one, 2.0).unwrap();
    assert!((m.value() - 2.0).abs() <= 1e-6, "{m:?}");
    let iid = moment_m(&MixingProfile::independent(), &one, 2.0).unwrap();
    assert!((iid.value() - 1.0).abs() <= 1e-9);
}

#[test]
fn analytic_moment_matches_direct_sum() {
    let one = QuantileFn::constant(1.0).unwrap();
    for (rho, p) in [(3.0, 2.5), (3.0, 2.0), (2.0, 2.5)] {
        let got = moment_m(&MixingProfile::analytic(1.0, rho).unwrap(), &one, p).unwrap().value();
        let want = analytic_m_oracle(rho, p);
        assert!((got - want).abs() <= 1e-4 * want, "rho={rho} p={p}: {got} vs {want}");
    }
}

#[test]
fn frozen_moment_values() {
    // direct sums above, frozen
    let one = QuantileFn::constant(1.0).unwrap();
    let m = moment_m(&MixingProfile::analytic(1.0, 3.0).unwrap(), &one, 2.5).unwrap().value();
    assert!((m - analytic_m_oracle(3.0, 2.5)).abs() < 1e-4 * m);
    assert!((m - 3.385_24).abs() < 1e-3, "{m}");
}

#[test]
fn divergent_moment_is_flagged() {
    let q = QuantileFn::power(1.0, 2.0).unwrap();
    let m = moment_m(&MixingProfile::analytic(1.0, 1.0).unwrap(), &q, 2.0).unwrap();
    assert_eq!(m, MomentValue::Infinite);
}

#[test]
fn truncated_moment_limits() {
    let q = QuantileFn::constant(1.0).unwrap();
    let geo = MixingProfile::geometric(0.5).unwrap();
    let full = moment_m(&geo, &q, 3.0).unwrap().value();
    let big = moment_m3_truncated(&geo, &q, 1e6).unwrap().value();
    assert!((big - full).abs() <= 0.005 * full);
    // R ≥ 1 on (0,1) for the iid profile, so λ ≤ 1 gives λ ∫ Q R
    let iid = MixingProfile::independent();
    let small = moment_m3_truncated(&iid, &q, 0.5).unwrap().value();
    assert!((small - 0.5).abs() < 1e-9);
}

#[test]
fn lambda_sup_examples() {
    let one = QuantileFn::constant(1.0).unwrap();
    let l = lambda_sup(&MixingProfile::independent(), &one, 2.5).unwrap();
    assert!((l.value() - 1.0).abs() < 1e-9);
    // critical tail u^{−1/p} |ln u|^{−1+1/p} against geometric mixing
    let p = 2.5;
    let crit = QuantileFn::power_log(1.0, p, 2.0, -1.0 + 1.0 / p).unwrap();
    assert!(lambda_sup(&MixingProfile::geometric(0.5).unwrap(), &crit, p).unwrap().is_finite());
}

#[test]
fn critical_power_tail_has_flat_rio_scaling() {
    // γ = 0.25, f(x) = x^{−0.15}: tail exponent b = 0.75/0.15 = 5 sits
    // exactly on the Λ threshold for p = 2.5
    let p = 2.5;
    let q = QuantileFn::power(1.0, 5.0).unwrap();
    let prof = MixingProfile::intermittent(0.25, 1.0).unwrap();
    assert!(lambda_sup(&prof, &q, p).unwrap().is_finite());
    let scaled: Vec<f64> = (0..=16)
        .map(|i| {
            let lambda = 10f64.powf(1.0 + i as f64 / 4.0);
            lambda.powf(p - 3.0) * moment_m3_truncated(&prof, &q, lambda).unwrap().value()
        })
        .collect();
    let hi = scaled.iter().cloned().fold(f64::MIN, f64::max);
    let lo = scaled.iter().cloned().fold(f64::MAX, f64::min);
    assert!(hi / lo <= 4.0, "{scaled:?}");
}

#[test]
fn moment_and_series_conditions_agree_on_analytic_families() {
    for rho in [1.5, 2.0, 3.0, 4.0] {
        for b in [3.0, 5.0, 8.0, 20.0] {
            for p in [2.2, 2.5, 3.0] {
                let prof = MixingProfile::analytic(1.0, rho).unwrap();
                let q = QuantileFn::power(1.0, b).unwrap();
                if p >= b {
                    continue;
                }
                let m = moment_m(&prof, &q, p).unwrap();
                let s = strong_mixing_series(&prof, &q, p).unwrap();
                assert_eq!(m.is_finite(), s.is_finite(), "rho={rho} b={b} p={p}: {m:?} vs {s:?}");
            }
        }
    }
}

#[test]
fn moment_condition_lattice_matches_closed_form() {
    let mut cases = 0;
    for gamma in [0.1, 0.2, 0.25, 0.3] {
        for p in [2.2, 2.5, 3.0] {
            if p * gamma >= 1.0 {
                continue;
            }
            for b in [3.0, 6.0, 9.5, 15.0] {
                let kappa = (1.0 - p * gamma) / (1.0 - gamma);
                let want = if b * kappa > p { Verdict::Holds } else { Verdict::Fails };
                let got = check_moment_condition(&TailFunction::power(1.0, b).unwrap(), gamma, p).unwrap();
                assert_eq!(got, want, "gamma={gamma} p={p} b={b}");
                cases += 1;
            }
        }
    }
    assert!(cases >= 20);
}

#[test]
fn condition_examples() {
    let t = |b| TailFunction::power(1.0, b).unwrap();
    assert_eq!(check_moment_condition(&t(9.5), 0.25, 3.0).unwrap(), Verdict::Holds);
    assert_eq!(check_moment_condition(&t(9.0), 0.25, 3.0).unwrap(), Verdict::Fails);
    assert!(check_moment_condition(&t(9.0), 0.45, 3.0).is_err());
    let ind = TailFunction::indicator(1.0).unwrap();
    assert_eq!(check_moment_condition(&ind, 0.25, 3.0).unwrap(), Verdict::Holds);
    assert_eq!(check_lambda_condition(&t(5.0), 0.25, 2.5).unwrap(), Verdict::Holds);
    assert_eq!(check_lambda_condition(&t(4.9), 0.25, 2.5).unwrap(), Verdict::Fails);
    assert_eq!(check_lambda_condition(&ind, 0.25, 4.0).unwrap(), Verdict::Holds);
}

#[test]
fn observable_examples() {
    let id = Observable::identity();
    assert_eq!(id.eval(0.3), 0.3);
    let pw = Observable::power(0.2).unwrap();
    assert!((pw.eval(0.5) - 1.148_698_354_997_035).abs() < 1e-12);
    let half = Observable::new(vec![Piece { lo: 0.0, hi: 0.5, kind: PieceKind::Identity, sign: 1.0 }]).unwrap();
    assert_eq!(half.eval(0.7), 0.0);
}

#[test]
fn bounded_observable_tail_vanishes_past_its_bound() {
    let m = asip_core::dynamics::MapModel::with_built_density(0.25, 1024, 1e-10, 100_000).unwrap();
    let key = asip_core::rng::StreamKey::new(1, asip_core::rng::tag::TAIL);
    let h = tail_of_observable(&Observable::identity(), &m, 100_000, key).unwrap();
    assert_eq!(h.eval(1.0), 0.0);
    assert!(h.eval(0.0) > 0.99);
}
