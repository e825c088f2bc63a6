//! The balanced root `rho_N` of `rho^(2N) (2N rho + 2N + 1) = 1` and the
//! horizon constants derived from it.

use crate::error::{invariant, Error, Result};
use crate::numerics::{PrecisionConfig, Scalar};

const BISECTION_STEPS: usize = 32;
const MAX_NEWTON_STEPS: usize = 200;

/// Horizon constants: `alpha = 1 + rho`, `q = rho^N`, `R = q^2`, `r = R/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct RootParams {
    pub n: usize,
    pub rho: Scalar,
    pub alpha: Scalar,
    pub q: Scalar,
    pub big_r: Scalar,
    pub rate: Scalar,
}

impl RootParams {
    fn from_rho(n: usize, rho: Scalar) -> RootParams {
        let alpha = &rho + 1;
        let q = rho.powi(n as i32);
        let big_r = q.square();
        let rate = big_r.mul_pow2(-1);
        RootParams {
            n,
            rho,
            alpha,
            q,
            big_r,
            rate,
        }
    }

    pub fn precision(&self) -> u32 {
        self.rho.precision()
    }

    /// `|phi_N(rho) - 1|`.
    pub fn root_residual(&self) -> Scalar {
        (phi_unchecked(self.n, &self.rho) - 1).abs()
    }

    /// `|R (2N alpha + 1) - 1|`.
    pub fn rate_identity_residual(&self) -> Scalar {
        let n = self.n as i64;
        (&self.big_r * (&self.alpha * (2 * n) + 1) - 1).abs()
    }

    /// Checks every invariant at tolerance `2^-t`.
    pub fn verify(&self, cfg: &PrecisionConfig) -> Result<()> {
        let one = cfg.int(1);
        let half = cfg.ratio(1, 2)?;
        if !(self.rho > half && self.rho < one) {
            return Err(invariant(
                "root_location",
                format!("rho = {} outside (1/2, 1)", self.rho),
            ));
        }
        if !cfg.within(&self.root_residual(), &one) {
            return Err(invariant(
                "root_equation",
                format!("|phi_N(rho) - 1| = {:e}", self.root_residual().to_f64()),
            ));
        }
        if !cfg.within(&self.rate_identity_residual(), &one) {
            return Err(invariant(
                "rate_identity",
                format!("|R(2N alpha + 1) - 1| = {:e}", self.rate_identity_residual().to_f64()),
            ));
        }
        if !cfg.within(&(self.q.square() - &self.big_r), &self.big_r) {
            return Err(invariant("q_squared", "q^2 != R"));
        }
        if self.rate.mul_pow2(1) != self.big_r {
            return Err(invariant("rate_half", "r != R/2"));
        }
        Ok(())
    }
}

fn phi_unchecked(n: usize, rho: &Scalar) -> Scalar {
    let two_n = 2 * n as i64;
    rho.powi(2 * n as i32) * (rho * two_n + (two_n + 1))
}

fn phi_prime(n: usize, rho: &Scalar) -> Scalar {
    // d/drho [rho^2N (2N rho + 2N + 1)] = 2N rho^(2N-1) (2N rho + 2N + 1 + rho)
    let two_n = 2 * n as i64;
    rho.powi(2 * n as i32 - 1) * two_n * (rho * (two_n + 1) + (two_n + 1))
}

/// `phi_N(rho) = rho^(2N) (2N rho + 2N + 1)`.
pub fn phi(n: usize, rho: &Scalar) -> Result<Scalar> {
    if n < 1 {
        return Err(Error::InvalidArgument("phi requires N >= 1".into()));
    }
    if rho.is_sign_negative() {
        return Err(Error::InvalidArgument(format!(
            "phi requires rho >= 0, got {}",
            rho.to_f64()
        )));
    }
    Ok(phi_unchecked(n, rho))
}

/// Bisection to 32 bits on `[1/2, 1]`, then bracketed Newton to full precision.
pub fn solve_root(n: usize, cfg: &PrecisionConfig) -> Result<RootParams> {
    if n < 3 {
        return Err(Error::HorizonBelowThree(n));
    }
    let mut lo = cfg.ratio(1, 2)?;
    let mut hi = cfg.int(1);
    if !(phi_unchecked(n, &lo) < 1 && phi_unchecked(n, &hi) > 1) {
        return Err(Error::BracketFailure(n));
    }

    for _ in 0..BISECTION_STEPS {
        let mid = (&lo + &hi).mul_pow2(-1);
        if phi_unchecked(n, &mid) < 1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let tol = cfg.tolerance();
    let mut rho = (&lo + &hi).mul_pow2(-1);
    let mut polished = false;
    for _ in 0..MAX_NEWTON_STEPS {
        let value = phi_unchecked(n, &rho) - 1;
        if value.is_zero() {
            return finish(n, rho, cfg);
        }
        if value.is_sign_negative() {
            lo = rho.clone();
        } else {
            hi = rho.clone();
        }
        let step = &value / phi_prime(n, &rho);
        let candidate = &rho - &step;
        let small_step = step.abs() <= tol;
        rho = if candidate >= lo && candidate <= hi {
            candidate
        } else {
            (&lo + &hi).mul_pow2(-1)
        };
        if small_step && (phi_unchecked(n, &rho) - 1).abs() <= tol {
            // one extra quadratic step after the tolerance is met
            if polished {
                return finish(n, rho, cfg);
            }
            polished = true;
        }
    }
    Err(Error::NonConvergence {
        method: "root newton",
        iterations: MAX_NEWTON_STEPS,
        residual: (phi_unchecked(n, &rho) - 1).to_f64(),
    })
}

fn finish(n: usize, rho: Scalar, cfg: &PrecisionConfig) -> Result<RootParams> {
    let params = RootParams::from_rho(n, rho);
    params.verify(cfg)?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain bisection over [1/2, 1]; independent of the Newton path.
    fn bisection_oracle(n: usize, cfg: &PrecisionConfig) -> Scalar {
        let mut lo = cfg.ratio(1, 2).unwrap();
        let mut hi = cfg.int(1);
        for _ in 0..200 {
            let mid = (&lo + &hi).mul_pow2(-1);
            let two_n = 2 * n as i64;
            let v = mid.powi(2 * n as i32) * (&mid * two_n + (two_n + 1));
            if v < 1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn phi_examples() {
        let cfg = PrecisionConfig::default();
        assert_eq!(phi(3, &cfg.int(1)).unwrap(), 13);
        assert_eq!(phi(3, &cfg.ratio(1, 2).unwrap()).unwrap(), cfg.ratio(10, 64).unwrap());
        assert!(phi(3, &cfg.int(0)).unwrap().is_zero());
        assert!(phi(3, &cfg.int(-1)).is_err());
        assert!(phi(0, &cfg.int(1)).is_err());
    }

    #[test]
    fn root_n3_matches_bisection() {
        let cfg = PrecisionConfig::default();
        let params = solve_root(3, &cfg).unwrap();
        let oracle = bisection_oracle(3, &cfg);
        assert!((&params.rho - &oracle).abs() < cfg.pow2(-190));
        assert!((params.rho.to_f64() - 0.6703).abs() < 1e-4);
        assert!(params.rho > cfg.ratio(1, 2).unwrap() && params.rho < 1);
        assert!(cfg.within(&params.rate_identity_residual(), &cfg.int(1)));
    }

    #[test]
    fn small_horizons_rejected() {
        let cfg = PrecisionConfig::default();
        assert_eq!(solve_root(2, &cfg).unwrap_err(), Error::HorizonBelowThree(2));
        assert!(solve_root(0, &cfg).is_err());
    }

    #[test]
    fn deterministic_bits() {
        let cfg = PrecisionConfig::default();
        let a = solve_root(17, &cfg).unwrap();
        let b = solve_root(17, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rho.to_decimal_string(), b.rho.to_decimal_string());
    }

    #[test]
    fn bracket_valid_and_roots_increase() {
        let cfg = PrecisionConfig::default();
        let half = cfg.ratio(1, 2).unwrap();
        let mut previous = half.clone();
        for n in 3..=200 {
            assert!(phi(n, &half).unwrap() < 1);
            assert!(phi(n, &cfg.int(1)).unwrap() > 1);
            let params = solve_root(n, &cfg).unwrap();
            assert!(cfg.within(&params.root_residual(), &cfg.int(1)), "N={n}");
            assert!(params.rho > previous, "rho_N not increasing at N={n}");
            previous = params.rho;
        }
    }

    #[test]
    fn higher_precision() {
        let cfg = crate::numerics::configure(512, 200).unwrap();
        let params = solve_root(40, &cfg).unwrap();
        assert_eq!(params.rho.precision(), 512);
        assert!(params.root_residual() < cfg.pow2(-200));
    }
}
