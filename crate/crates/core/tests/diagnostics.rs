use ccpb::diagnostics::{
    capacitance_numeric, delta_weight_estimate, inequality_suite, norm_decay_fit, pohozaev_check,
    validate_report, DeltaTarget, ValidationOptions,
};
use ccpb::solver::ladder_to;
use ccpb::{
    solve_continuation, validate_params, Error, MeshPolicy, ModelParams, NewtonOptions, RawParams,
    Seed, Solution,
};

fn solve_reference(eps: f64) -> Solution {
    solve_at(&ModelParams::reference(eps), eps, &MeshPolicy::default())
}

fn solve_at(params: &ModelParams, eps: f64, policy: &MeshPolicy) -> Solution {
    solve_continuation(
        params,
        &ladder_to(0.5, eps),
        policy,
        &NewtonOptions::default(),
        Seed::Zero,
    )
    .unwrap()
    .pop()
    .unwrap()
}

fn neutral(eps: f64) -> ModelParams {
    let mut raw = RawParams::reference(eps);
    raw.b = 1.0;
    validate_params(&raw).unwrap()
}

#[test]
fn neutral_identity_is_exact() {
    let params = neutral(0.05);
    let sol = solve_at(&params, 0.05, &MeshPolicy::default());
    let rep = pohozaev_check(&sol, 0.5).unwrap();
    // A/p + B/q with A = B = 1
    assert!((rep.lhs1 - 2.0).abs() < 1e-12);
    assert!(rep.residual1.abs() < 1e-12);
    assert!(rep.residual2.abs() < 1e-12);
}

#[test]
fn kappa_outside_unit_interval_is_rejected() {
    let sol = solve_reference(0.2);
    for kappa in [0.0, 1.0, -0.3] {
        assert!(matches!(
            pohozaev_check(&sol, kappa),
            Err(Error::KappaOutOfRange(_))
        ));
    }
}

#[test]
fn identity_residual_converges_under_refinement() {
    let params = ModelParams::reference(0.05);
    let res: Vec<f64> = (0..3)
        .map(|k| {
            let sol = solve_at(&params, 0.05, &MeshPolicy::default().refined(k));
            pohozaev_check(&sol, 0.5).unwrap().residual1
        })
        .collect();
    assert!(res[1] < 1e-3, "{res:?}");
    for w in res.windows(2) {
        assert!(w[0] / w[1] >= 3.0, "{res:?}");
    }
}

#[test]
fn reference_bounds_at_moderate_eps() {
    let sol = solve_reference(0.1);
    let ledger = inequality_suite(&sol);
    assert!(ledger.passed(), "{:?}", ledger.failures());
    let get = |name: &str| ledger.checks.iter().find(|c| c.name == name).unwrap();

    let holder = get("inverse_holder");
    assert!(holder.value >= 0.25 - 1e-9 && holder.value <= 0.5 + 1e-9);
    assert!((holder.lower - 0.25).abs() < 1e-12 && (holder.upper - 0.5).abs() < 1e-12);

    let center = get("center_value");
    assert!(center.value > 0.0 && center.value <= 2f64.ln());

    // N (p+q) min{A,B} / R^N with p = q
    assert!((get("pointwise_sum").lower - 4.0).abs() < 1e-12);
    assert!(get("pointwise_sum").value >= 4.0);
}

#[test]
fn weights_approach_limits() {
    let sol = solve_reference(2f64.powi(-10));
    let one = |_: f64| 1.0;
    let energy = delta_weight_estimate(&sol, &one, DeltaTarget::Energy);
    let rho = delta_weight_estimate(&sol, &one, DeltaTarget::Rho);
    let rho_r = delta_weight_estimate(&sol, &|r: f64| r, DeltaTarget::Rho);
    let exp = delta_weight_estimate(&sol, &one, DeltaTarget::Exp);
    let vanishing = delta_weight_estimate(&sol, &one, DeltaTarget::ExpComplement).abs();
    assert!((energy - 1.0).abs() < 0.05, "{energy}");
    assert!((rho - 0.5).abs() < 0.025, "{rho}");
    assert!((rho_r - 0.5).abs() < 0.025, "{rho_r}");
    assert!((exp - 0.5).abs() < 0.05, "{exp}");
    assert!(vanishing < 0.05, "{vanishing}");
}

#[test]
fn capacitance_in_layer_and_interior() {
    let eps = 2f64.powi(-10);
    let sol = solve_reference(eps);
    let limit = 1.0 / (8.0 * 2f64.ln());
    let layer = capacitance_numeric(&sol, 1.0 - 4.0 * eps * eps).unwrap();
    assert!((layer - limit).abs() / limit < 0.05);
    // bounded by C^b q / (2N) = 0.25 plus slack near the boundary
    let near = capacitance_numeric(&sol, 1.0 - 1e-3 * eps * eps).unwrap();
    assert!(near <= 0.275, "{near}");

    let coarse = capacitance_numeric(&solve_reference(2f64.powi(-6)), 0.5).unwrap();
    let fine = capacitance_numeric(&sol, 0.5).unwrap();
    assert!(fine < coarse);
}

#[test]
fn capacitance_rejects_bad_radius() {
    let sol = solve_reference(0.2);
    assert!(matches!(
        capacitance_numeric(&sol, 0.0),
        Err(Error::OutOfDomain { .. })
    ));
    assert!(matches!(
        capacitance_numeric(&sol, 1.0),
        Err(Error::OutOfDomain { .. })
    ));
    let flat = solve_at(&neutral(0.2), 0.2, &MeshPolicy::default());
    assert!(matches!(
        capacitance_numeric(&flat, 0.5),
        Err(Error::DegenerateDenominator)
    ));
}

#[test]
fn norm_fit_needs_four_points() {
    let sols = solve_continuation(
        &ModelParams::reference(0.5),
        &[0.5, 0.25, 0.125],
        &MeshPolicy::default(),
        &NewtonOptions::default(),
        Seed::Zero,
    )
    .unwrap();
    assert!(matches!(
        norm_decay_fit(&sols, 1.0),
        Err(Error::InsufficientData {
            needed: 4,
            found: 3
        })
    ));
    assert!(matches!(
        norm_decay_fit(&sols, 2.0),
        Err(Error::ThetaOutOfRange(_))
    ));
}

#[test]
fn single_rung_report() {
    let rep = validate_report(
        &ModelParams::reference(0.5),
        &[0.5],
        &ValidationOptions::default(),
    )
    .unwrap();
    assert_eq!(rep.rows.len(), 1);
    assert!(rep.fits.is_empty());
    assert!(!rep.neutral);
}

#[test]
fn neutral_report_is_flagged() {
    let ladder = [0.5, 0.25, 0.125, 0.0625];
    let rep = validate_report(&neutral(0.5), &ladder, &ValidationOptions::default()).unwrap();
    assert!(rep.neutral);
    assert!(rep.passed());
    assert!(rep
        .rows
        .iter()
        .all(|r| r.u_boundary == 0.0 && r.u_boundary_predicted.is_none()));
}

#[test]
fn reference_report_passes_with_defaults() {
    let ladder: Vec<f64> = (4..=12).map(|k| 2f64.powi(-k)).collect();
    let rep = validate_report(
        &ModelParams::reference(ladder[0]),
        &ladder,
        &ValidationOptions::default(),
    )
    .unwrap();
    let failed: Vec<_> = rep.checks.iter().filter(|c| !c.passed).collect();
    assert!(failed.is_empty(), "{failed:?}");
    assert!(rep.rows.windows(2).all(|w| w[0].epsilon > w[1].epsilon));

    let mut rows = Vec::new();
    rep.write_rows_csv(&mut rows).unwrap();
    let text = String::from_utf8(rows).unwrap();
    assert_eq!(text.lines().count(), ladder.len() + 1);
}
