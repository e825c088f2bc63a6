//! Named verification checks run against one built certificate.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::altsums::{convolution_residual, determinant_closed, odd_reduction_residual, truncation_determinant};
use crate::certificate::{
    b_tail_normal_check, eps0_tail_residual, middle_tail_residual, outer_face_residual,
    prefix_form_residual, right_conservation_residual, spurious_factor_margin,
    terminal_quadratic_residual, weighted_left_conservation_residual, Certificate,
};
use crate::dualcheck::{coefficient_ledger, dual_identity_residual, random_trajectory};
use crate::error::Result;
use crate::lower_bounds::minimax_report;
use crate::numerics::{max_abs, PrecisionConfig, Scalar, ScaledResidual};
use crate::reduced_solver::{crosscheck, face_sign_scan, solve_reduced};

/// Checks reported by every `verify` and `build` run, in output order.
pub const CORE_CHECKS: [&str; 11] = [
    "root_equation",
    "residuals",
    "positivity",
    "bridge",
    "margin_link",
    "tail_square",
    "conservation_right",
    "conservation_weighted_left",
    "terminal_quadratic",
    "ledger",
    "solver_crosscheck",
];

pub const RANDOM_D_SAMPLES: usize = 50;
pub const RANDOM_TRAJECTORIES: usize = 100;
pub const FACE_SAMPLES: usize = 1000;
pub const SEED: u64 = 7;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: impl Into<String>) -> CheckOutcome {
    CheckOutcome {
        name,
        passed,
        detail: detail.into(),
    }
}

fn residual_outcome(name: &'static str, check: &ScaledResidual, exponent: u32) -> CheckOutcome {
    outcome(
        name,
        check.passes(exponent),
        format!("relative residual {:.3e}", check.relative()),
    )
}

fn failed(name: &'static str, err: impl std::fmt::Display) -> CheckOutcome {
    outcome(name, false, err.to_string())
}

/// Seeded `d` of length `N - 1`; entries in `[-2, 4]`, or `[0, 4]` when
/// `nonnegative`.
pub fn random_d(n: usize, seed: u64, nonnegative: bool, prec: u32) -> Vec<Scalar> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = if nonnegative { 0.0 } else { -2.0 };
    let dist = Uniform::new_inclusive(lo, 4.0f64).expect("valid range");
    (0..n - 1)
        .map(|_| Scalar::from_f64(prec, dist.sample(&mut rng)).expect("finite sample"))
        .collect()
}

fn worst_over<F>(samples: usize, seed: u64, f: F) -> Result<ScaledResidual>
where
    F: Fn(u64) -> Result<ScaledResidual> + Sync + Send,
{
    let results = crate::par::map_range(0..samples, |k| f(seed.wrapping_add(k as u64)));
    let mut worst: Option<ScaledResidual> = None;
    for r in results {
        let r = r?;
        worst = Some(match worst {
            None => r,
            Some(w) => w.worst(r),
        });
    }
    Ok(worst.expect("at least one sample"))
}

/// The eleven core checks.
pub fn core_checks(cert: &Certificate, cfg: &PrecisionConfig) -> Vec<CheckOutcome> {
    let t = cfg.tolerance_exponent();
    let params = &cert.params;
    let one = Scalar::one(cfg.precision_bits());
    let mut out = Vec::with_capacity(CORE_CHECKS.len());

    let root = ScaledResidual::new(params.root_residual(), one.clone());
    let rate = ScaledResidual::new(params.rate_identity_residual(), one);
    let located = params.rho.to_f64() > 0.5 && params.rho < 1;
    out.push(outcome(
        "root_equation",
        root.passes(t) && rate.passes(t) && located,
        format!(
            "|phi-1| {:.3e}, |R(2N alpha+1)-1| {:.3e}",
            root.relative(),
            rate.relative()
        ),
    ));

    let eps = ScaledResidual::new(max_abs(cfg.precision_bits(), &cert.residuals), params.big_r.clone());
    out.push(residual_outcome("residuals", &eps, t));

    let negatives: Vec<&str> = cert
        .positivity()
        .into_iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| name)
        .collect();
    out.push(outcome(
        "positivity",
        negatives.is_empty(),
        if negatives.is_empty() {
            format!("min margin {:.3e}", cert.margins_min().to_f64())
        } else {
            format!("nonpositive entries in {}", negatives.join(", "))
        },
    ));

    out.push(residual_outcome("bridge", &cert.bridge_residual(), t));
    out.push(residual_outcome("margin_link", &cert.margin_link_residual(), t));
    let tails = cert.tail_square_residual().worst(cert.t0_residual());
    out.push(residual_outcome("tail_square", &tails, t));

    match right_conservation_residual(&cert.d, params) {
        Ok(r) => out.push(residual_outcome("conservation_right", &r, t)),
        Err(e) => out.push(failed("conservation_right", e)),
    }
    match weighted_left_conservation_residual(&cert.d, params) {
        Ok(r) => out.push(residual_outcome("conservation_weighted_left", &r, t)),
        Err(e) => out.push(failed("conservation_weighted_left", e)),
    }
    match terminal_quadratic_residual(&cert.d, params, &cert.table) {
        Ok(r) => out.push(residual_outcome("terminal_quadratic", &r, t)),
        Err(e) => out.push(failed("terminal_quadratic", e)),
    }
    match coefficient_ledger(cert) {
        Ok(ledger) => {
            let check = ScaledResidual::new(ledger.max_entry(), params.big_r.clone());
            out.push(outcome(
                "ledger",
                check.passes(t) && ledger.exhaustive,
                format!("max entry / R {:.3e}", check.relative()),
            ));
        }
        Err(e) => out.push(failed("ledger", e)),
    }
    let solver_exponent = (t / 2).max(1);
    match solve_reduced(params.n, cfg, None).and_then(|r| crosscheck(&r, cert).map(|dev| (r, dev))) {
        Ok((report, dev)) => out.push(outcome(
            "solver_crosscheck",
            dev <= cfg.tolerance_at(solver_exponent),
            format!(
                "{} in {} iterations, max relative deviation {:.3e}",
                report.method.name(),
                report.iterations,
                dev.to_f64()
            ),
        )),
        Err(e) => out.push(failed("solver_crosscheck", e)),
    }
    out
}

/// Identity checks at seeded random `d`, the alternating-sum suite, face
/// barriers, the dual identity on random trajectories and the minimax closure.
pub fn extended_checks(cert: &Certificate, cfg: &PrecisionConfig) -> Vec<CheckOutcome> {
    let t = cfg.tolerance_exponent();
    let params = &cert.params;
    let table = &cert.table;
    let n = params.n;
    let prec = cfg.precision_bits();
    let mut out = Vec::new();

    type Identity = fn(&[Scalar], &Certificate) -> Result<ScaledResidual>;
    let universal: [(&'static str, bool, Identity); 8] = [
        ("random_conservation_right", false, |d, c| right_conservation_residual(d, &c.params)),
        ("random_conservation_weighted_left", false, |d, c| {
            weighted_left_conservation_residual(d, &c.params)
        }),
        ("random_terminal_quadratic", false, |d, c| terminal_quadratic_residual(d, &c.params, &c.table)),
        ("random_prefix_form", false, |d, c| prefix_form_residual(d, &c.params)),
        ("random_outer_face_polynomial", false, |d, c| outer_face_residual(d, &c.params)),
        ("random_b_tail_normal_form", true, |d, c| b_tail_normal_check(d, &c.params)),
        ("random_eps0_tail_form", true, |d, c| eps0_tail_residual(d, &c.params, &c.table)),
        ("random_middle_tail_form", true, |d, c| middle_tail_residual(d, &c.params, &c.table)),
    ];
    for (name, nonnegative, f) in universal {
        let res = worst_over(RANDOM_D_SAMPLES, SEED, |seed| f(&random_d(n, seed, nonnegative, prec), cert));
        match res {
            Ok(r) => out.push(residual_outcome(name, &r, t)),
            Err(e) => out.push(failed(name, e)),
        }
    }

    let spurious: Result<bool> = (0..RANDOM_D_SAMPLES as u64)
        .map(|k| spurious_factor_margin(&random_d(n, SEED + k, true, prec), params, table).map(|m| m.is_positive()))
        .try_fold(true, |acc, ok| ok.map(|ok| acc && ok));
    let at_cert = spurious_factor_margin(&cert.d, params, table).map(|m| m.is_positive());
    match (spurious, at_cert) {
        (Ok(a), Ok(b)) => out.push(outcome("spurious_factor", a && b, "L_N + Psi_N > 0")),
        (Err(e), _) | (_, Err(e)) => out.push(failed("spurious_factor", e)),
    }

    let phi = ScaledResidual::new(table.phi_n.clone(), Scalar::one(prec));
    out.push(residual_outcome("phi_vanishes", &phi, t));

    let mut conv: Option<ScaledResidual> = None;
    for k in 1..n {
        match convolution_residual(k, table) {
            Ok(r) => conv = Some(conv.map_or(r.clone(), |w| w.worst(r))),
            Err(e) => out.push(failed("convolution", e)),
        }
    }
    if let Some(c) = conv {
        out.push(residual_outcome("convolution", &c, t));
    }

    let mut odd_ok = true;
    for r in 1..=n {
        odd_ok &= odd_reduction_residual(r, &params.rho).map(|x| x.passes(t)).unwrap_or(false);
    }
    out.push(outcome("odd_reduction", odd_ok, format!("1 <= r <= {n}")));

    let mut det_ok = true;
    for r in 1..=n {
        match truncation_determinant(r, params) {
            Ok(det) => {
                let closed = determinant_closed(r, &params.rho);
                det_ok &= ScaledResidual::new(&det - closed, Scalar::one(prec)).passes(t);
                det_ok &= if r < n {
                    det.is_positive()
                } else {
                    ScaledResidual::new(det, Scalar::one(prec)).passes(t)
                };
            }
            Err(_) => det_ok = false,
        }
    }
    out.push(outcome("determinant", det_ok, "positive below N, zero at N"));

    match face_sign_scan(n, FACE_SAMPLES, SEED, cfg) {
        Ok(report) => out.push(outcome(
            "face_signs",
            report.passed(),
            format!(
                "{} violations, outer min sum/R {:.3e}",
                report.violations.len(),
                report.outer_min_sum_over_r.to_f64()
            ),
        )),
        Err(e) => out.push(failed("face_signs", e)),
    }

    let dual = worst_over(RANDOM_TRAJECTORIES, SEED, |seed| {
        random_trajectory(cert, 4, seed).and_then(|data| dual_identity_residual(cert, &data)).map(|c| c.residual)
    });
    match dual {
        Ok(r) => out.push(residual_outcome("dual_identity", &r, t.saturating_sub(20))),
        Err(e) => out.push(failed("dual_identity", e)),
    }

    match minimax_report(n, cfg) {
        Ok(report) => out.push(outcome(
            "minimax",
            report.passed(),
            if report.passed() {
                format!("min envelope margin {:.3e}", report.grid_min_margin.to_f64())
            } else {
                format!("failed clauses: {}", report.failures.join(", "))
            },
        )),
        Err(e) => out.push(failed("minimax", e)),
    }
    out
}
