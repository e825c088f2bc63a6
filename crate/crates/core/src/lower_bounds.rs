//! One-dimensional quadratic and Huber instances, the lower envelope over the
//! step, and the minimax check at the balanced step `alpha_* = 1 + rho_N`.

use crate::certificate::build_certificate;
use crate::dualcheck::{rate_bound, RateVerdict, TrajectoryData};
use crate::error::{Error, Result};
use crate::numerics::{PrecisionConfig, Scalar, ScaledResidual};
use crate::par;

pub const GRID_POINTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FunctionKind {
    Quadratic,
    Huber,
}

impl FunctionKind {
    pub fn name(&self) -> &'static str {
        match self {
            FunctionKind::Quadratic => "quadratic",
            FunctionKind::Huber => "huber",
        }
    }
}

/// A gradient-descent run from `x_0 = 1` on a one-dimensional instance.
#[derive(Clone, Debug, PartialEq)]
pub struct SimRun {
    pub function: FunctionKind,
    pub n: usize,
    pub alpha: Scalar,
    /// Huber width `delta = 1/(2N alpha + 1)`; absent for the quadratic.
    pub delta: Option<Scalar>,
    /// `x_0..x_N`.
    pub iterates: Vec<Scalar>,
    /// `f(x_N) - f_*` with `f_* = 0`.
    pub final_gap: Scalar,
}

impl SimRun {
    fn value(&self, x: &Scalar) -> Scalar {
        match &self.delta {
            None => x.square().mul_pow2(-1),
            Some(delta) => huber_value(x, delta),
        }
    }

    fn derivative(&self, x: &Scalar) -> Scalar {
        match &self.delta {
            None => x.clone(),
            Some(delta) => huber_derivative(x, delta),
        }
    }

    /// The run as dimension-one trajectory data with `x_* = 0`, `f_* = 0`.
    pub fn trajectory(&self) -> Result<TrajectoryData> {
        let prec = self.alpha.precision();
        let gradients = self.iterates.iter().map(|x| vec![self.derivative(x)]).collect();
        let values = self.iterates.iter().map(|x| self.value(x)).collect();
        TrajectoryData::from_gradients(
            vec![self.iterates[0].clone()],
            vec![Scalar::zero(prec)],
            gradients,
            values,
            Scalar::zero(prec),
            self.alpha.clone(),
        )
    }
}

/// `H_delta(x) = x^2/2` on `|x| <= delta`, `delta |x| - delta^2/2` outside.
pub fn huber_value(x: &Scalar, delta: &Scalar) -> Scalar {
    if x.abs() <= *delta {
        x.square().mul_pow2(-1)
    } else {
        delta * x.abs() - delta.square().mul_pow2(-1)
    }
}

/// `H'_delta(x) = clip(x, -delta, delta)`.
pub fn huber_derivative(x: &Scalar, delta: &Scalar) -> Scalar {
    if *x > *delta {
        delta.clone()
    } else if *x < -delta {
        -delta
    } else {
        x.clone()
    }
}

/// `f(x) = x^2/2` from `x_0 = 1`: `x_k = (1 - alpha)^k`.
pub fn quad_run(n: usize, alpha: &Scalar) -> SimRun {
    let prec = alpha.precision();
    let factor = 1 - alpha;
    let mut iterates = Vec::with_capacity(n + 1);
    let mut x = Scalar::one(prec);
    for _ in 0..n {
        let next = &x * &factor;
        iterates.push(x);
        x = next;
    }
    iterates.push(x.clone());
    SimRun {
        function: FunctionKind::Quadratic,
        n,
        alpha: alpha.clone(),
        delta: None,
        iterates,
        final_gap: x.square().mul_pow2(-1),
    }
}

fn huber_delta(n: usize, alpha: &Scalar) -> Result<Scalar> {
    if alpha.is_sign_negative() {
        return Err(Error::InvalidArgument(format!(
            "Huber instance needs alpha >= 0, got {}",
            alpha.to_f64()
        )));
    }
    (alpha * (2 * n as i64) + 1).recip()
}

/// Huber instance with `delta = 1/(2N alpha + 1)` from `x_0 = 1`, using the
/// closed-form iterates `x_k = 1 - k alpha delta`.
pub fn huber_run(n: usize, alpha: &Scalar) -> Result<SimRun> {
    let delta = huber_delta(n, alpha)?;
    let step = alpha * &delta;
    let iterates: Vec<Scalar> = (0..=n).map(|k| 1 - &step * k as i64).collect();
    let final_gap = huber_value(&iterates[n], &delta);
    Ok(SimRun {
        function: FunctionKind::Huber,
        n,
        alpha: alpha.clone(),
        delta: Some(delta),
        iterates,
        final_gap,
    })
}

/// Step-by-step gradient descent on the same Huber instance.
pub fn huber_simulation(n: usize, alpha: &Scalar) -> Result<SimRun> {
    let delta = huber_delta(n, alpha)?;
    let mut iterates = Vec::with_capacity(n + 1);
    let mut x = Scalar::one(alpha.precision());
    for _ in 0..n {
        let next = &x - alpha * huber_derivative(&x, &delta);
        iterates.push(x);
        x = next;
    }
    let final_gap = huber_value(&x, &delta);
    iterates.push(x);
    Ok(SimRun {
        function: FunctionKind::Huber,
        n,
        alpha: alpha.clone(),
        delta: Some(delta),
        iterates,
        final_gap,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowerEnvelopePoint {
    pub alpha: Scalar,
    /// `(1 - alpha)^(2N) / 2`.
    pub quad_value: Scalar,
    /// `1/(2(2N alpha + 1))`, only for `alpha >= 0`.
    pub huber_value: Option<Scalar>,
    pub envelope: Scalar,
}

pub fn envelope(n: usize, alpha: &Scalar) -> LowerEnvelopePoint {
    let quad_value = (1 - alpha).powi(2 * n as i32).mul_pow2(-1);
    let huber_value = if alpha.is_sign_negative() {
        None
    } else {
        Some((alpha * (2 * n as i64) + 1).recip().expect("positive").mul_pow2(-1))
    };
    let envelope = match &huber_value {
        Some(h) => quad_value.clone().max(h.clone()),
        None => quad_value.clone(),
    };
    LowerEnvelopePoint {
        alpha: alpha.clone(),
        quad_value,
        huber_value,
        envelope,
    }
}

/// Uniform grid of [`GRID_POINTS`] steps on `[lo, hi]`, with `extra` inserted in order.
pub fn alpha_grid(lo: &Scalar, hi: &Scalar, points: usize, extra: Option<&Scalar>) -> Vec<Scalar> {
    let width = hi - lo;
    let mut grid: Vec<Scalar> = match points {
        0 => Vec::new(),
        1 => vec![lo.clone()],
        _ => (0..points)
            .map(|k| lo + &width * k as i64 / (points as i64 - 1))
            .collect(),
    };
    if let Some(x) = extra {
        let at = grid.partition_point(|g| g < x);
        if grid.get(at) != Some(x) {
            grid.insert(at, x.clone());
        }
    }
    grid
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimaxReport {
    pub n: usize,
    pub alpha_star: Scalar,
    /// `r_* = rho^(2N) / 2`.
    pub rate: Scalar,
    /// `(alpha_* - 1)^(2N)/2 - 1/(2(2N alpha_* + 1))`.
    pub balance: ScaledResidual,
    pub quad_gap: Scalar,
    pub huber_gap: Scalar,
    pub quad_verdict: RateVerdict,
    pub huber_verdict: RateVerdict,
    pub grid_points: usize,
    /// Smallest `envelope - r_*` over the grid.
    pub grid_min_margin: Scalar,
    /// Smallest quadratic value over the negative part of the grid.
    pub negative_step_min: Scalar,
    /// Names of failed clauses, empty on success.
    pub failures: Vec<&'static str>,
}

impl MinimaxReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Certified rate at `alpha_*` against both lower-bound instances and the
/// envelope over `[-1, 2 alpha_*]`.
pub fn minimax_report(n: usize, cfg: &PrecisionConfig) -> Result<MinimaxReport> {
    let cert = build_certificate(n, cfg)?;
    let params = &cert.params;
    let prec = cfg.precision_bits();
    let t = cfg.tolerance_exponent();
    let alpha = &params.alpha;
    let rate = &params.rate;
    let one = Scalar::one(prec);
    let mut failures = Vec::new();

    let lhs = (alpha - 1).powi(2 * n as i32).mul_pow2(-1);
    let rhs = (alpha * (2 * n as i64) + 1).recip()?.mul_pow2(-1);
    let balance = ScaledResidual::new(lhs - rhs, one.clone());
    if !balance.passes(t) {
        failures.push("balance");
    }

    let quad = quad_run(n, alpha);
    let huber = huber_run(n, alpha)?;
    if !ScaledResidual::new(&quad.final_gap - rate, one.clone()).passes(t) {
        failures.push("quadratic_tightness");
    }
    if !ScaledResidual::new(&huber.final_gap - rate, one.clone()).passes(t) {
        failures.push("huber_tightness");
    }
    let quad_verdict = rate_bound(&cert, &quad.trajectory()?, cfg)?;
    let huber_verdict = rate_bound(&cert, &huber.trajectory()?, cfg)?;
    if !quad_verdict.holds || !huber_verdict.holds {
        failures.push("upper_bound");
    }

    let lo = Scalar::from_int(prec, -1);
    let hi = alpha.mul_pow2(1);
    let grid = alpha_grid(&lo, &hi, GRID_POINTS, Some(alpha));
    let points = par::map_slice(&grid, |a| envelope(n, a));
    let tol = cfg.tolerance() * rate;
    let mut grid_min_margin = &points[0].envelope - rate;
    let mut negative_step_min = Scalar::from_int(prec, i64::MAX / 2);
    for p in &points {
        grid_min_margin = grid_min_margin.min(&p.envelope - rate);
        if p.alpha.is_sign_negative() {
            negative_step_min = negative_step_min.min(p.quad_value.clone());
        }
    }
    if grid_min_margin < -&tol {
        failures.push("envelope");
    }
    let half = cfg.ratio(1, 2)?;
    if !(negative_step_min > half && negative_step_min > *rate) {
        failures.push("negative_step");
    }

    Ok(MinimaxReport {
        n,
        alpha_star: alpha.clone(),
        rate: rate.clone(),
        balance,
        quad_gap: quad.final_gap,
        huber_gap: huber.final_gap,
        quad_verdict,
        huber_verdict,
        grid_points: grid.len(),
        grid_min_margin,
        negative_step_min,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rootfinding::solve_root;

    fn cfg() -> PrecisionConfig {
        PrecisionConfig::default()
    }

    #[test]
    fn quadratic_examples() {
        let cfg = cfg();
        assert!(quad_run(3, &cfg.int(1)).final_gap.is_zero());
        let run = quad_run(3, &cfg.parse("-0.1").unwrap());
        let expected = cfg.parse("1.1").unwrap().powi(6).mul_pow2(-1);
        assert!(cfg.within(&(&run.final_gap - &expected), &cfg.int(1)));
        assert!((run.final_gap.to_f64() - 0.885_780_5).abs() < 1e-6);
        let params = solve_root(3, &cfg).unwrap();
        let tight = quad_run(3, &params.alpha);
        assert!(cfg.within(&(&tight.final_gap - &params.rate), &cfg.int(1)));
    }

    #[test]
    fn huber_examples() {
        let cfg = cfg();
        let run = huber_run(3, &cfg.int(0)).unwrap();
        assert_eq!(run.delta.clone().unwrap(), 1);
        assert!(run.iterates.iter().all(|x| *x == 1));
        assert_eq!(run.final_gap, cfg.ratio(1, 2).unwrap());
        assert!(huber_run(3, &cfg.int(-1)).is_err());
        let alpha = cfg.ratio(7, 5).unwrap();
        let run = huber_run(4, &alpha).unwrap();
        let delta = run.delta.clone().unwrap();
        let x_n = (&alpha * 4 + 1) / (&alpha * 8 + 1);
        assert!(cfg.within(&(&run.iterates[4] - x_n), &cfg.int(1)));
        assert!(run.iterates.iter().all(|x| *x >= delta));
        let sim = huber_simulation(4, &alpha).unwrap();
        for (a, b) in run.iterates.iter().zip(&sim.iterates) {
            assert!(cfg.within(&(a - b), &cfg.int(1)));
        }
    }

    #[test]
    fn envelope_examples() {
        let cfg = cfg();
        let params = solve_root(3, &cfg).unwrap();
        let at_star = envelope(3, &params.alpha);
        assert!(cfg.within(&(&at_star.envelope - &params.rate), &cfg.int(1)));
        let at_one = envelope(3, &cfg.int(1));
        assert_eq!(at_one.envelope, cfg.ratio(1, 14).unwrap());
        assert!(at_one.envelope > params.rate);
        let at_neg = envelope(3, &cfg.int(-1));
        assert_eq!(at_neg.envelope, 32);
        assert!(at_neg.huber_value.is_none());
    }

    #[test]
    fn grid_contains_extra_point() {
        let cfg = cfg();
        let extra = cfg.ratio(1, 3).unwrap();
        let grid = alpha_grid(&cfg.int(-1), &cfg.int(2), 10, Some(&extra));
        assert_eq!(grid.len(), 11);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        assert!(grid.contains(&extra));
        assert_eq!(grid[0], -1);
        assert_eq!(grid[10], 2);
    }

    #[test]
    fn minimax_small() {
        let report = minimax_report(3, &cfg()).unwrap();
        assert!(report.passed(), "{:?}", report.failures);
        assert_eq!(report.grid_points, GRID_POINTS + 1);
        assert!(report.negative_step_min > cfg().ratio(1, 2).unwrap());
    }
}
