//! Numerical solution of the reduced system `E_N(d) = 0` on the simplex
//! `{d >= 0, sum d <= 2N}` and sampled checks of its boundary signs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::certificate::{evaluate_systems, Certificate};
use crate::error::{Error, Result};
use crate::numerics::{max_abs, sum_at, PrecisionConfig, Scalar};
use crate::par;
use crate::rootfinding::{solve_root, RootParams};

const MAX_NEWTON_ITERATIONS: usize = 100;
const MAX_FIXED_POINT_ITERATIONS: usize = 20_000;
const MAX_BACKTRACKS: usize = 60;

/// A point of the simplex with its slack `2N - sum d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexPoint {
    pub n: usize,
    pub d: Vec<Scalar>,
    pub slack: Scalar,
}

impl SimplexPoint {
    pub fn new(n: usize, d: Vec<Scalar>) -> Result<SimplexPoint> {
        if n < 3 {
            return Err(Error::HorizonBelowThree(n));
        }
        if d.len() + 1 != n {
            return Err(Error::InvalidArgument(format!(
                "simplex point needs N - 1 = {} coordinates, got {}",
                n - 1,
                d.len()
            )));
        }
        if d.iter().any(Scalar::is_sign_negative) {
            return Err(Error::InvalidArgument("simplex point has a negative coordinate".into()));
        }
        let prec = d[0].precision();
        let slack = 2 * n as i64 - sum_at(prec, &d);
        if slack.is_sign_negative() {
            return Err(Error::InvalidArgument(format!(
                "simplex point has mass above 2N (slack {})",
                slack
            )));
        }
        Ok(SimplexPoint { n, d, slack })
    }

    /// `d_i = N/(N-1)`, total mass `N`.
    pub fn uniform(n: usize, cfg: &PrecisionConfig) -> Result<SimplexPoint> {
        if n < 3 {
            return Err(Error::HorizonBelowThree(n));
        }
        let value = cfg.ratio(n as i64, n as i64 - 1)?;
        SimplexPoint::new(n, vec![value; n - 1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMethod {
    DampedNewton,
    DampedFixedPoint,
}

impl SolverMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SolverMethod::DampedNewton => "damped_newton",
            SolverMethod::DampedFixedPoint => "damped_fixed_point",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub solution: Vec<Scalar>,
    pub iterations: usize,
    /// `max_i |eps_i(d)|` over the reduced equations.
    pub final_residual_norm: Scalar,
    pub method: SolverMethod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolverOptions {
    pub max_newton_iterations: usize,
    pub max_fixed_point_iterations: usize,
    /// Skip Newton and run only the fixed-point map.
    pub fixed_point_only: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_newton_iterations: MAX_NEWTON_ITERATIONS,
            max_fixed_point_iterations: MAX_FIXED_POINT_ITERATIONS,
            fixed_point_only: false,
        }
    }
}

/// `E_N(d) = (eps_0(d), ..., eps_{N-2}(d))`.
pub fn eval_reduced(d: &[Scalar], params: &RootParams) -> Result<Vec<Scalar>> {
    let mut eps = evaluate_systems(d, params)?.eps;
    eps.truncate(params.n - 1);
    Ok(eps)
}

fn norm(values: &[Scalar], prec: u32) -> Scalar {
    max_abs(prec, values)
}

struct Context<'a> {
    params: &'a RootParams,
    prec: u32,
    floor: Scalar,
    cap: Scalar,
    tolerance: Scalar,
}

impl Context<'_> {
    /// Clip each coordinate to `>= mu` and rescale the mass to `<= 2N - mu`.
    fn project(&self, mut d: Vec<Scalar>) -> Vec<Scalar> {
        for x in d.iter_mut() {
            if *x < self.floor {
                *x = self.floor.clone();
            }
        }
        let mass = sum_at(self.prec, &d);
        if mass > self.cap {
            let factor = &self.cap / &mass;
            for x in d.iter_mut() {
                *x *= &factor;
            }
        }
        d
    }

    fn residual(&self, d: &[Scalar]) -> Result<(Vec<Scalar>, Scalar)> {
        let f = eval_reduced(d, self.params)?;
        let size = norm(&f, self.prec);
        Ok((f, size))
    }

    fn jacobian(&self, d: &[Scalar]) -> Result<Vec<Vec<Scalar>>> {
        let m = d.len();
        let h = Scalar::pow2(self.prec, -(self.prec as i32 / 3));
        let two_h = h.mul_pow2(1);
        let columns = par::map_range(0..m, |j| -> Result<Vec<Scalar>> {
            let mut plus = d.to_vec();
            let mut minus = d.to_vec();
            plus[j] += &h;
            minus[j] -= &h;
            let fp = eval_reduced(&plus, self.params)?;
            let fm = eval_reduced(&minus, self.params)?;
            Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / &two_h).collect())
        });
        let columns = columns.into_iter().collect::<Result<Vec<_>>>()?;
        Ok((0..m)
            .map(|i| (0..m).map(|j| columns[j][i].clone()).collect())
            .collect())
    }
}

/// Gaussian elimination with partial pivoting.
fn solve_linear(mut a: Vec<Vec<Scalar>>, mut rhs: Vec<Scalar>) -> Result<Vec<Scalar>> {
    let m = rhs.len();
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("non-empty pivot range");
        if a[pivot][col].is_zero() {
            return Err(Error::Arithmetic("singular Jacobian".into()));
        }
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..m {
            let factor = &a[row][col] / &a[col][col];
            if factor.is_zero() {
                continue;
            }
            let (upper, lower) = a.split_at_mut(row);
            for (target, source) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *target -= &factor * source;
            }
            let delta = &factor * &rhs[col];
            rhs[row] -= delta;
        }
    }
    let mut x = vec![Scalar::zero(rhs[0].precision()); m];
    for row in (0..m).rev() {
        let mut acc = rhs[row].clone();
        for k in row + 1..m {
            acc -= &a[row][k] * &x[k];
        }
        x[row] = acc / &a[row][row];
    }
    Ok(x)
}

enum Outcome {
    Converged(SolveReport),
    Stalled { iterations: usize, point: Vec<Scalar>, norm: Scalar },
}

fn newton(ctx: &Context, start: Vec<Scalar>, max_iter: usize) -> Result<Outcome> {
    let mut d = ctx.project(start);
    let (mut f, mut size) = ctx.residual(&d)?;
    for iter in 0..max_iter {
        if size <= ctx.tolerance {
            return Ok(Outcome::Converged(SolveReport {
                solution: d,
                iterations: iter,
                final_residual_norm: size,
                method: SolverMethod::DampedNewton,
            }));
        }
        let jac = ctx.jacobian(&d)?;
        let step = match solve_linear(jac, f.iter().map(|x| -x).collect()) {
            Ok(step) => step,
            Err(_) => return Ok(Outcome::Stalled { iterations: iter, point: d, norm: size }),
        };
        let mut damping = Scalar::one(ctx.prec);
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<Scalar> = d.iter().zip(&step).map(|(x, s)| x + &damping * s).collect();
            let trial = ctx.project(trial);
            let (tf, tsize) = ctx.residual(&trial)?;
            if tsize < size {
                d = trial;
                f = tf;
                size = tsize;
                accepted = true;
                break;
            }
            damping = damping.mul_pow2(-1);
        }
        if !accepted {
            return Ok(Outcome::Stalled { iterations: iter, point: d, norm: size });
        }
    }
    if size <= ctx.tolerance {
        return Ok(Outcome::Converged(SolveReport {
            solution: d,
            iterations: max_iter,
            final_residual_norm: size,
            method: SolverMethod::DampedNewton,
        }));
    }
    Ok(Outcome::Stalled { iterations: max_iter, point: d, norm: size })
}

/// `d <- P(d - lambda F(d))`, halving `lambda` whenever the residual grows.
fn fixed_point(ctx: &Context, start: Vec<Scalar>, max_iter: usize) -> Result<Outcome> {
    let mut d = ctx.project(start);
    let (mut f, mut size) = ctx.residual(&d)?;
    if size.is_zero() {
        return Ok(Outcome::Converged(SolveReport {
            solution: d,
            iterations: 0,
            final_residual_norm: size,
            method: SolverMethod::DampedFixedPoint,
        }));
    }
    let n = ctx.params.n as i64;
    let mut lambda = (&size * n).recip()?;
    let lambda_floor = Scalar::pow2(ctx.prec, -(ctx.prec as i32));
    for iter in 0..max_iter {
        if size <= ctx.tolerance {
            return Ok(Outcome::Converged(SolveReport {
                solution: d,
                iterations: iter,
                final_residual_norm: size,
                method: SolverMethod::DampedFixedPoint,
            }));
        }
        let trial: Vec<Scalar> = d.iter().zip(&f).map(|(x, y)| x - &lambda * y).collect();
        let trial = ctx.project(trial);
        let (tf, tsize) = ctx.residual(&trial)?;
        if tsize > size {
            lambda = lambda.mul_pow2(-1);
            if lambda < lambda_floor {
                return Ok(Outcome::Stalled { iterations: iter, point: d, norm: size });
            }
            continue;
        }
        d = trial;
        f = tf;
        size = tsize;
    }
    Ok(Outcome::Stalled { iterations: max_iter, point: d, norm: size })
}

/// Damped Newton from `start` (uniform by default), falling back to the
/// damped fixed-point map. Success requires `max |E_N| <= 2^-t R` at an
/// interior point.
pub fn solve_reduced(
    n: usize,
    cfg: &PrecisionConfig,
    start: Option<&SimplexPoint>,
) -> Result<SolveReport> {
    solve_reduced_with(n, cfg, start, &SolverOptions::default())
}

pub fn solve_reduced_with(
    n: usize,
    cfg: &PrecisionConfig,
    start: Option<&SimplexPoint>,
    options: &SolverOptions,
) -> Result<SolveReport> {
    let params = solve_root(n, cfg)?;
    let start = match start {
        Some(point) if point.n != n => {
            return Err(Error::InvalidArgument(format!(
                "start point has N = {}, solver called with N = {n}",
                point.n
            )))
        }
        Some(point) => point.d.clone(),
        None => SimplexPoint::uniform(n, cfg)?.d,
    };
    let prec = cfg.precision_bits();
    let floor = cfg.pow2(-(cfg.tolerance_exponent() as i32 / 2));
    let ctx = Context {
        params: &params,
        prec,
        cap: 2 * n as i64 - &floor,
        floor,
        tolerance: cfg.tolerance() * &params.big_r,
    };

    let mut restart = start;
    let mut spent = 0;
    if !options.fixed_point_only {
        match newton(&ctx, restart, options.max_newton_iterations)? {
            Outcome::Converged(report) => return finish(report, n),
            Outcome::Stalled { iterations, point, .. } => {
                spent = iterations;
                restart = point;
            }
        }
    }
    match fixed_point(&ctx, restart, options.max_fixed_point_iterations)? {
        Outcome::Converged(mut report) => {
            report.iterations += spent;
            finish(report, n)
        }
        Outcome::Stalled { iterations, norm, .. } => Err(Error::NonConvergence {
            method: "damped fixed point",
            iterations: spent + iterations,
            residual: (norm / &params.big_r).to_f64(),
        }),
    }
}

fn finish(report: SolveReport, n: usize) -> Result<SolveReport> {
    let prec = report.final_residual_norm.precision();
    let interior = report.solution.iter().all(Scalar::is_positive)
        && sum_at(prec, &report.solution) < 2 * n as i64;
    if !interior {
        return Err(crate::error::invariant(
            "solver_interior",
            "converged point lies on the boundary of the simplex",
        ));
    }
    Ok(report)
}

/// `max_i |d_i - d*_i| / |d*_i|` against the closed-form certificate.
pub fn crosscheck(report: &SolveReport, cert: &Certificate) -> Result<Scalar> {
    if report.solution.len() != cert.d.len() {
        return Err(Error::InvalidArgument("solution length differs from certificate".into()));
    }
    let prec = cert.params.precision();
    let devs: Vec<Scalar> = report
        .solution
        .iter()
        .zip(&cert.d)
        .map(|(x, y)| (x - y).abs() / y.abs())
        .collect();
    Ok(max_abs(prec, &devs))
}

/// Which boundary piece a sample came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// `d_i = 0`.
    Face(usize),
    /// `sum d = 2N`.
    Outer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignViolation {
    pub boundary: Boundary,
    /// Which claim failed: `"sign"` or `"scalar_bound"`.
    pub claim: &'static str,
    pub point: Vec<Scalar>,
    pub value: Scalar,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaceSummary {
    pub face: usize,
    pub samples: usize,
    /// Largest `eps_i / R` seen on the face; negative when the barrier holds.
    pub max_eps_over_r: Scalar,
    /// Smallest `bound - value` for the scalar bound; nonnegative when it holds.
    pub scalar_margin: Scalar,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaceScanReport {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub faces: Vec<FaceSummary>,
    /// Smallest `sum_{i<=N-2} eps_i / R` on the outer face; positive when it holds.
    pub outer_min_sum_over_r: Scalar,
    pub violations: Vec<SignViolation>,
}

impl FaceScanReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `k` nonnegative values summing to `total`, uniform on that simplex.
fn simplex_draw(rng: &mut ChaCha8Rng, k: usize, total: i64, prec: u32) -> Result<Vec<Scalar>> {
    let raw: Vec<Scalar> = (0..k)
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            Scalar::from_f64(prec, e)
        })
        .collect::<Result<_>>()?;
    let mass = sum_at(prec, &raw);
    let factor = Scalar::from_int(prec, total) / mass;
    Ok(raw.into_iter().map(|x| x * &factor).collect())
}

struct FaceSample {
    boundary: Boundary,
    d: Vec<Scalar>,
}

struct FaceEval {
    eps: Vec<Scalar>,
}

/// Samples each lower face `d_i = 0` and the outer face `sum d = 2N`
/// (`samples` points each), checking the sign barriers and the scalar bounds
/// `eps_0/R <= -(2+rho)/2` and `eps_i/(R P_i^2) <= -(1+rho)`.
pub fn face_sign_scan(
    n: usize,
    samples: usize,
    seed: u64,
    cfg: &PrecisionConfig,
) -> Result<FaceScanReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("face scan needs at least one sample".into()));
    }
    let params = solve_root(n, cfg)?;
    let prec = cfg.precision_bits();
    let two_n = 2 * n as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut points = Vec::with_capacity(n * samples);
    for face in 0..n - 1 {
        for _ in 0..samples {
            // N-2 free coordinates plus the slack
            let mut draw = simplex_draw(&mut rng, n - 1, two_n, prec)?;
            draw.pop();
            draw.insert(face, Scalar::zero(prec));
            points.push(FaceSample { boundary: Boundary::Face(face), d: draw });
        }
    }
    for _ in 0..samples {
        let draw = simplex_draw(&mut rng, n - 1, two_n, prec)?;
        points.push(FaceSample { boundary: Boundary::Outer, d: draw });
    }

    let evals = par::map_slice(&points, |p| -> Result<FaceEval> {
        Ok(FaceEval { eps: eval_reduced(&p.d, &params)? })
    });

    let r = &params.big_r;
    let first_bound = -((&params.rho + 2).mul_pow2(-1));
    let middle_bound = -(&params.rho + 1);
    let mut faces: Vec<FaceSummary> = (0..n - 1)
        .map(|face| FaceSummary {
            face,
            samples,
            max_eps_over_r: Scalar::from_int(prec, i64::MIN / 2),
            scalar_margin: Scalar::from_int(prec, i64::MAX / 2),
        })
        .collect();
    let mut outer_min = Scalar::from_int(prec, i64::MAX / 2);
    let mut violations = Vec::new();

    for (sample, eval) in points.iter().zip(evals) {
        let eps = eval?.eps;
        match sample.boundary {
            Boundary::Face(i) => {
                let scaled = &eps[i] / r;
                if !scaled.is_sign_negative() {
                    violations.push(SignViolation {
                        boundary: sample.boundary,
                        claim: "sign",
                        point: sample.d.clone(),
                        value: scaled.clone(),
                    });
                }
                let (value, bound) = if i == 0 {
                    (scaled.clone(), first_bound.clone())
                } else {
                    let p = 1 + sum_at(prec, &sample.d[..i]);
                    (&scaled / p.square(), middle_bound.clone())
                };
                let margin = &bound - &value;
                if margin.is_sign_negative() {
                    violations.push(SignViolation {
                        boundary: sample.boundary,
                        claim: "scalar_bound",
                        point: sample.d.clone(),
                        value: value.clone(),
                    });
                }
                let summary = &mut faces[i];
                summary.max_eps_over_r = summary.max_eps_over_r.clone().max(scaled);
                summary.scalar_margin = summary.scalar_margin.clone().min(margin);
            }
            Boundary::Outer => {
                let total = sum_at(prec, &eps) / r;
                if !total.is_positive() {
                    violations.push(SignViolation {
                        boundary: sample.boundary,
                        claim: "sign",
                        point: sample.d.clone(),
                        value: total.clone(),
                    });
                }
                outer_min = outer_min.min(total);
            }
        }
    }

    Ok(FaceScanReport {
        n,
        samples,
        seed,
        faces,
        outer_min_sum_over_r: outer_min,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::build_certificate;

    #[test]
    fn simplex_point_validation() {
        let cfg = PrecisionConfig::default();
        assert!(SimplexPoint::new(3, vec![cfg.int(1), cfg.int(-1)]).is_err());
        assert!(SimplexPoint::new(3, vec![cfg.int(4), cfg.int(3)]).is_err());
        assert!(SimplexPoint::new(3, vec![cfg.int(1)]).is_err());
        let p = SimplexPoint::new(3, vec![cfg.int(2), cfg.int(1)]).unwrap();
        assert_eq!(p.slack, 3);
        let u = SimplexPoint::uniform(5, &cfg).unwrap();
        assert_eq!(sum_at(256, &u.d), 5);
    }

    #[test]
    fn certificate_is_a_reduced_zero() {
        let cfg = PrecisionConfig::default();
        let cert = build_certificate(6, &cfg).unwrap();
        let e = eval_reduced(&cert.d, &cert.params).unwrap();
        assert_eq!(e.len(), 5);
        assert!(norm(&e, 256) <= cfg.tolerance() * &cert.params.big_r);
    }

    #[test]
    fn newton_matches_closed_form_n3() {
        let cfg = PrecisionConfig::default();
        let report = solve_reduced(3, &cfg, None).unwrap();
        assert_eq!(report.method, SolverMethod::DampedNewton);
        let cert = build_certificate(3, &cfg).unwrap();
        assert!(crosscheck(&report, &cert).unwrap() <= cfg.pow2(-50));
    }

    #[test]
    fn start_on_face_moves_inside() {
        let cfg = PrecisionConfig::default();
        let start = SimplexPoint::new(3, vec![cfg.int(0), cfg.int(2)]).unwrap();
        let report = solve_reduced(3, &cfg, Some(&start)).unwrap();
        assert!(report.solution.iter().all(Scalar::is_positive));
    }

    #[test]
    fn fixed_point_fallback_small_horizon() {
        let cfg = PrecisionConfig::default();
        let options = SolverOptions {
            fixed_point_only: true,
            ..SolverOptions::default()
        };
        let report = solve_reduced_with(3, &cfg, None, &options).unwrap();
        assert_eq!(report.method, SolverMethod::DampedFixedPoint);
        let cert = build_certificate(3, &cfg).unwrap();
        assert!(crosscheck(&report, &cert).unwrap() <= cfg.pow2(-50));
    }

    #[test]
    fn fixed_point_reports_failure() {
        let cfg = PrecisionConfig::default();
        let options = SolverOptions {
            fixed_point_only: true,
            max_fixed_point_iterations: 50,
            ..SolverOptions::default()
        };
        match solve_reduced_with(5, &cfg, None, &options) {
            Err(Error::NonConvergence { method, .. }) => assert_eq!(method, "damped fixed point"),
            other => panic!("expected explicit non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn zero_d_is_on_every_lower_face() {
        let cfg = PrecisionConfig::default();
        let params = solve_root(5, &cfg).unwrap();
        let e = eval_reduced(&vec![cfg.int(0); 4], &params).unwrap();
        assert!(e.iter().all(Scalar::is_sign_negative));
    }

    #[test]
    fn face_scan_small() {
        let cfg = PrecisionConfig::default();
        let report = face_sign_scan(3, 200, 7, &cfg).unwrap();
        assert!(report.passed(), "{:?}", report.violations.first());
        assert!(report.outer_min_sum_over_r.is_positive());
        assert!(report.faces.iter().all(|f| f.max_eps_over_r.is_sign_negative()));
        assert!(face_sign_scan(3, 0, 7, &cfg).is_err());
    }
}
