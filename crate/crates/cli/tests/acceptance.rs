use std::process::{Command, ExitCode};
use std::time::Instant;

use gswcert::altsums::{a_closed, a_poly, convolution_residual, odd_reduction_residual, truncation_determinant};
use gswcert::certificate::{
    b_tail_normal_check, build_certificate, eps0_tail_residual, middle_tail_residual,
    right_conservation_residual, terminal_quadratic_residual, weighted_left_conservation_residual,
    Certificate,
};
use gswcert::dualcheck::{coefficient_ledger, dual_identity_residual, random_trajectory};
use gswcert::lower_bounds::{minimax_report, GRID_POINTS};
use gswcert::numerics::{max_abs, within};
use gswcert::reduced_solver::{crosscheck, face_sign_scan, solve_reduced};
use gswcert::suite::random_d;
use gswcert::{PrecisionConfig, Scalar, ScaledResidual};

const PRECISION_BITS: u32 = 256;
const EXP_EXACT: u32 = 100;
const EXP_IDENTITY: u32 = 90;
const EXP_DUAL: u32 = 80;
const EXP_SOLVER: u32 = 50;
const CERT_RANGE: std::ops::RangeInclusive<usize> = 3..=100;
const SUITE_RANGE: std::ops::RangeInclusive<usize> = 3..=50;
const SOLVER_RANGE: std::ops::RangeInclusive<usize> = 3..=30;
const IDENTITY_HORIZONS: [usize; 4] = [3, 5, 10, 25];
const RANDOM_POINTS: u64 = 50;
const FACE_HORIZONS: [usize; 3] = [3, 5, 10];
const FACE_SAMPLES: usize = 1000;
const DUAL_HORIZONS: [usize; 2] = [3, 10];
const TRAJECTORIES: u64 = 100;
const TRAJECTORY_DIM: usize = 4;
const SEED: u64 = 2024;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn cfg() -> PrecisionConfig {
    gswcert::configure(PRECISION_BITS, EXP_EXACT).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn certs(range: std::ops::RangeInclusive<usize>) -> Result<Vec<Certificate>, String> {
    let cfg = cfg();
    range
        .map(|n| build_certificate(n, &cfg).map_err(|e| format!("N={n}: {e}")))
        .collect()
}

fn certificate_existence() -> Outcome {
    let start = Instant::now();
    let all = certs(CERT_RANGE)?;
    let elapsed = start.elapsed();
    let mut worst = 0.0f64;
    for cert in &all {
        let n = cert.n();
        let max_eps = max_abs(PRECISION_BITS, &cert.residuals);
        ensure(within(&max_eps, &cert.params.big_r, EXP_EXACT), || {
            format!("N={n}: max|eps|/R = {:e}", cert.residual_max_over_r().to_f64())
        })?;
        for (family, ok) in cert.positivity() {
            ensure(ok, || format!("N={n}: {family} not strictly positive"))?;
        }
        worst = worst.max(cert.residual_max_over_r().to_f64());
    }
    Ok(format!("N=3..100, worst max|eps|/R {worst:.2e}, {:.2}s", elapsed.as_secs_f64()))
}

fn root_law(all: &[Certificate]) -> Outcome {
    let one = Scalar::one(PRECISION_BITS);
    for cert in all {
        let p = &cert.params;
        let n = p.n as i64;
        let phi = p.rho.powi(2 * n as i32) * (&p.rho * (2 * n) + (2 * n + 1));
        ensure(within(&(phi - 1), &one, EXP_EXACT), || format!("N={n}: root equation"))?;
        let rate = &p.big_r * (&p.alpha * (2 * n) + 1);
        ensure(within(&(rate - 1), &one, EXP_EXACT), || format!("N={n}: rate identity"))?;
        ensure(p.rho.to_f64() > 0.5 && p.rho < 1, || format!("N={n}: rho outside (1/2, 1)"))?;
    }
    Ok("N=3..100".into())
}

fn terminal_value(all: &[Certificate]) -> Outcome {
    let one = Scalar::one(PRECISION_BITS);
    for cert in all {
        let n = cert.n();
        let rho = &cert.params.rho;
        let expected = 2 - (3 - rho * 2 + rho.square()).sqrt().unwrap();
        ensure(within(&(&cert.a[n - 1] - expected), &one, EXP_EXACT), || {
            format!("N={n}: a_(N-1) off closed form")
        })?;
    }
    Ok("N=3..100".into())
}

fn tail_square(all: &[Certificate]) -> Outcome {
    for cert in all {
        let n = cert.n();
        let rho = &cert.params.rho;
        for k in 0..n {
            let t = &cert.tails.t_values[n - 1 - k];
            let a = a_closed(2 * k, rho);
            let lhs = &cert.params.big_r * t.square();
            ensure(within(&(lhs - &a), &a, EXP_EXACT), || format!("N={n}, n={k}"))?;
        }
        let t0 = &cert.tails.t_values[0] - (2 * n) as i64;
        ensure(within(&t0, &Scalar::from_int(PRECISION_BITS, n as i64), EXP_IDENTITY), || {
            format!("N={n}: T_0 != 2N")
        })?;
    }
    Ok("N=3..100, 0<=n<=N-1".into())
}

fn universal_identities() -> Outcome {
    let cfg = cfg();
    let mut count = 0;
    for n in IDENTITY_HORIZONS {
        let cert = build_certificate(n, &cfg).map_err(|e| e.to_string())?;
        let (p, tab) = (&cert.params, &cert.table);
        for k in 0..RANDOM_POINTS {
            let real = random_d(n, SEED + k, false, PRECISION_BITS);
            let nonneg = random_d(n, SEED + k, true, PRECISION_BITS);
            let checks: [(&str, gswcert::Result<ScaledResidual>); 6] = [
                ("right conservation", right_conservation_residual(&real, p)),
                ("weighted-left conservation", weighted_left_conservation_residual(&real, p)),
                ("terminal quadratic", terminal_quadratic_residual(&real, p, tab)),
                ("b-tail normal form", b_tail_normal_check(&nonneg, p)),
                ("eps_0 tail form", eps0_tail_residual(&nonneg, p, tab)),
                ("middle eps tail form", middle_tail_residual(&nonneg, p, tab)),
            ];
            for (name, r) in checks {
                let r = r.map_err(|e| format!("N={n} {name}: {e}"))?;
                ensure(r.passes(EXP_IDENTITY), || {
                    format!("N={n} seed {}: {name} residual {:e}", SEED + k, r.relative())
                })?;
                count += 1;
            }
        }
    }
    Ok(format!("{count} evaluations at N in {IDENTITY_HORIZONS:?}"))
}

fn alternating_sums(all: &[Certificate]) -> Outcome {
    let one = Scalar::one(PRECISION_BITS);
    for cert in all.iter().filter(|c| SUITE_RANGE.contains(&c.n())) {
        let n = cert.n();
        let rho = &cert.params.rho;
        for l in 0..=2 * n {
            let poly = a_poly(l, rho);
            ensure(within(&(&poly - a_closed(l, rho)), &one, EXP_IDENTITY), || {
                format!("N={n}: A_{l} closed form")
            })?;
        }
        for r in 1..=n {
            let odd = odd_reduction_residual(r, rho).map_err(|e| e.to_string())?;
            ensure(odd.passes(EXP_IDENTITY), || format!("N={n}: odd reduction r={r}"))?;
        }
        for k in 1..n {
            let conv = convolution_residual(k, &cert.table).map_err(|e| e.to_string())?;
            ensure(conv.passes(EXP_IDENTITY), || format!("N={n}: convolution n={k}"))?;
        }
        for r in 1..=n {
            let det = truncation_determinant(r, &cert.params).map_err(|e| e.to_string())?;
            if r < n {
                ensure(det.is_positive(), || format!("N={n}: determinant r={r} not positive"))?;
            } else {
                ensure(within(&det, &one, EXP_IDENTITY), || format!("N={n}: determinant at r=N"))?;
            }
        }
    }
    Ok("N=3..50".into())
}

fn boundary_signs() -> Outcome {
    let cfg = cfg();
    let mut total = 0;
    for n in FACE_HORIZONS {
        let report = face_sign_scan(n, FACE_SAMPLES, SEED, &cfg).map_err(|e| e.to_string())?;
        ensure(report.passed(), || format!("N={n}: {} violations", report.violations.len()))?;
        ensure(report.faces.len() == n - 1, || format!("N={n}: missing faces"))?;
        total += report.samples * (report.faces.len() + 1);
    }
    Ok(format!("{total} samples, zero violations"))
}

fn solver_crossvalidation(all: &[Certificate]) -> Outcome {
    let cfg = cfg();
    let bound = cfg.tolerance_at(EXP_SOLVER);
    let mut worst = 0.0f64;
    for cert in all.iter().filter(|c| SOLVER_RANGE.contains(&c.n())) {
        let n = cert.n();
        let report = solve_reduced(n, &cfg, None).map_err(|e| format!("N={n}: {e}"))?;
        let dev = crosscheck(&report, cert).map_err(|e| e.to_string())?;
        ensure(dev <= bound, || format!("N={n}: relative deviation {:e}", dev.to_f64()))?;
        worst = worst.max(dev.to_f64());
    }
    Ok(format!("N=3..30, worst relative deviation {worst:.2e}"))
}

fn dual_identity_and_ledger(all: &[Certificate]) -> Outcome {
    for cert in all.iter().filter(|c| SUITE_RANGE.contains(&c.n())) {
        let n = cert.n();
        let ledger = coefficient_ledger(cert).map_err(|e| e.to_string())?;
        ensure(ledger.exhaustive, || format!("N={n}: ledger misses a slot family"))?;
        ensure(ledger.passes(&cert.params.big_r, EXP_IDENTITY), || {
            format!("N={n}: ledger entry {:e}", ledger.max_entry().to_f64())
        })?;
    }
    let mut worst = 0.0f64;
    for n in DUAL_HORIZONS {
        let cert = &all[n - 3];
        for k in 0..TRAJECTORIES {
            let data = random_trajectory(cert, TRAJECTORY_DIM, SEED + k).map_err(|e| e.to_string())?;
            let check = dual_identity_residual(cert, &data).map_err(|e| e.to_string())?;
            ensure(check.residual.passes(EXP_DUAL), || {
                format!("N={n} seed {}: residual {:e}", SEED + k, check.residual.relative())
            })?;
            worst = worst.max(check.residual.relative());
        }
    }
    Ok(format!("ledger N=3..50, dual identity worst {worst:.2e}"))
}

fn minimax_closure() -> Outcome {
    let cfg = cfg();
    let one = Scalar::one(PRECISION_BITS);
    for n in SUITE_RANGE {
        let report = minimax_report(n, &cfg).map_err(|e| format!("N={n}: {e}"))?;
        ensure(report.passed(), || format!("N={n}: failed {}", report.failures.join(", ")))?;
        ensure(report.balance.passes(EXP_EXACT), || format!("N={n}: balance"))?;
        for (name, gap) in [("quadratic", &report.quad_gap), ("huber", &report.huber_gap)] {
            ensure(within(&(gap - &report.rate), &one, EXP_IDENTITY), || {
                format!("N={n}: {name} gap off r_*")
            })?;
        }
        ensure(report.grid_points > GRID_POINTS, || format!("N={n}: grid too small"))?;
        ensure(report.negative_step_min.to_f64() > 0.5, || format!("N={n}: negative step"))?;
        let slack = &report.rate * cfg.tolerance_at(EXP_IDENTITY);
        ensure(report.grid_min_margin >= -slack, || format!("N={n}: envelope below r_*"))?;
    }
    Ok("N=3..50".into())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for run in 0..2 {
        let path = dir.path().join(format!("table{run}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_gswcert"))
            .args(["table", "--n-min", "3", "--n-max", "50", "--out"])
            .arg(&path)
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.success(), || format!("run {run} exited with {status}"))?;
        outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], || "outputs differ".into())?;
    Ok(format!("{} identical bytes", outputs[0].len()))
}

fn main() -> ExitCode {
    let all = certs(CERT_RANGE);
    let with_certs = |f: fn(&[Certificate]) -> Outcome| -> Outcome {
        match &all {
            Ok(certs) => f(certs),
            Err(e) => Err(format!("certificate construction failed: {e}")),
        }
    };
    let criteria: Vec<Criterion> = vec![
        ("certificate existence", Box::new(certificate_existence)),
        ("root law", Box::new(|| with_certs(root_law))),
        ("terminal value", Box::new(|| with_certs(terminal_value))),
        ("tail-square law", Box::new(|| with_certs(tail_square))),
        ("universal identities", Box::new(universal_identities)),
        ("alternating sums", Box::new(|| with_certs(alternating_sums))),
        ("boundary signs", Box::new(boundary_signs)),
        ("solver cross-validation", Box::new(|| with_certs(solver_crossvalidation))),
        ("dual identity and ledger", Box::new(|| with_certs(dual_identity_and_ledger))),
        ("minimax closure", Box::new(minimax_closure)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {:>2} {tag} {name}: {detail} [{:.1}s]",
            k + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
