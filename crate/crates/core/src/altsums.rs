//! Alternating truncations `A_L`, the weights `gamma_s`, capped sums `S_h`
//! and the terminal polynomials `Phi_N`, `Psi_N`, `Omega_{N,i}`.

use crate::error::{Error, Result};
use crate::numerics::{max_abs, sum_at, Scalar, ScaledResidual};
use crate::rootfinding::RootParams;

/// `A_L(rho) = sum_{s=0}^{L} (-1)^s (L+1-s) rho^s`, by direct summation.
pub fn a_poly(l: usize, rho: &Scalar) -> Scalar {
    // Horner in rho with alternating coefficients
    let mut acc = Scalar::zero(rho.precision());
    for s in (0..=l).rev() {
        let coeff = (l + 1 - s) as i64;
        let coeff = if s % 2 == 0 { coeff } else { -coeff };
        acc = acc * rho + coeff;
    }
    acc
}

/// `A_L(rho) = (L+1 + (L+2) rho + (-rho)^(L+2)) / (1+rho)^2`.
pub fn a_closed(l: usize, rho: &Scalar) -> Scalar {
    let l = l as i64;
    let neg = -rho;
    let num = rho * (l + 2) + (l + 1) + neg.powi((l + 2) as i32);
    num / (rho + 1).square()
}

/// `gamma_0 = -1`, `gamma_1 = rho^2-2rho+3`, `gamma_2 = (rho-2)(2rho^2-3rho+2)`,
/// `gamma_s = 4 (rho-1)^4 (2rho-1)^(s-3)` for `s >= 3`.
pub fn gamma_seq(s: usize, rho: &Scalar) -> Scalar {
    match s {
        0 => Scalar::from_int(rho.precision(), -1),
        1 => rho.square() - rho * 2 + 3,
        2 => (rho - 2) * (rho.square() * 2 - rho * 3 + 2),
        _ => {
            let u4 = (rho - 1).square().square();
            let v = rho * 2 - 1;
            u4 * 4 * v.powi((s - 3) as i32)
        }
    }
}

/// `S_h = sum_{m=0}^{2N-4} (-1)^m min(2N-3-m, 2h) rho^m`, with `S_0 = 0`.
pub fn capped_weight(h: usize, n: usize, rho: &Scalar) -> Result<Scalar> {
    if n < 3 {
        return Err(Error::HorizonBelowThree(n));
    }
    if h > n - 1 {
        return Err(Error::InvalidArgument(format!(
            "capped weight index h = {h} outside [0, {}]",
            n - 1
        )));
    }
    Ok(capped_weight_unchecked(h, n, rho))
}

fn capped_weight_unchecked(h: usize, n: usize, rho: &Scalar) -> Scalar {
    let mut acc = Scalar::zero(rho.precision());
    if h == 0 {
        return acc;
    }
    let top = 2 * n - 4;
    for m in (0..=top).rev() {
        let coeff = (2 * n - 3 - m).min(2 * h) as i64;
        let coeff = if m % 2 == 0 { coeff } else { -coeff };
        acc = acc * rho + coeff;
    }
    acc
}

/// First difference `S_h - S_{h-1} = (2 - (1-rho) rho^(2N-2-2h)) / (1+rho)`.
pub fn capped_difference_closed(h: usize, n: usize, rho: &Scalar) -> Scalar {
    let u = 1 - rho;
    let e = (2 * n - 2 - 2 * h) as i32;
    (2 - u * rho.powi(e)) / (rho + 1)
}

/// `Phi_N(rho) = sum_{m=0}^{2N-1} (-1)^m (m+1) rho^m`.
pub fn phi_poly(n: usize, rho: &Scalar) -> Scalar {
    let mut acc = Scalar::zero(rho.precision());
    for m in (0..2 * n).rev() {
        let coeff = (m + 1) as i64;
        let coeff = if m % 2 == 0 { coeff } else { -coeff };
        acc = acc * rho + coeff;
    }
    acc
}

/// `Phi_N(rho) = (1 - (2N+1) rho^(2N) - 2N rho^(2N+1)) / (1+rho)^2`.
pub fn phi_closed(n: usize, rho: &Scalar) -> Scalar {
    let two_n = 2 * n as i64;
    let r2n = rho.powi(two_n as i32);
    let num = 1 - &r2n * (two_n + 1) - r2n * rho * two_n;
    num / (rho + 1).square()
}

fn alternating_geometric(top: usize, rho: &Scalar) -> Scalar {
    let mut acc = Scalar::zero(rho.precision());
    let neg = -rho;
    for _ in 0..=top {
        acc = acc * &neg + 1;
    }
    acc
}

/// `Psi_N = 2 sum_{m<2N} (-rho)^m - (2N-3) rho^(2N) - rho^(2N+1) sum_{m<=2N-4} (-rho)^m`.
pub fn psi_poly(n: usize, rho: &Scalar) -> Scalar {
    let two_n = 2 * n;
    let r2n = rho.powi(two_n as i32);
    alternating_geometric(two_n - 1, rho) * 2
        - &r2n * (two_n as i64 - 3)
        - r2n * rho * alternating_geometric(two_n - 4, rho)
}

/// Precomputed alternating-sum data for one horizon and root.
#[derive(Clone, Debug, PartialEq)]
pub struct AltSumTable {
    pub n: usize,
    pub rho: Scalar,
    pub u: Scalar,
    pub v: Scalar,
    pub eta: Scalar,
    pub gamma1: Scalar,
    pub gamma2: Scalar,
    /// `A_0..A_{2N}`.
    pub a_values: Vec<Scalar>,
    /// `gamma_0..gamma_N`.
    pub gamma_values: Vec<Scalar>,
    /// `S_0..S_{N-1}`.
    pub s_values: Vec<Scalar>,
    pub phi_n: Scalar,
    pub psi_n: Scalar,
    /// `Omega_{N,0}..Omega_{N,N-2}`.
    pub omega: Vec<Scalar>,
}

impl AltSumTable {
    /// Table for an arbitrary `rho`; `Omega` uses `R = rho^(2N)`.
    pub fn from_rho(n: usize, rho: &Scalar) -> Result<AltSumTable> {
        if n < 3 {
            return Err(Error::HorizonBelowThree(n));
        }
        let big_r = rho.powi(2 * n as i32);
        let a_values = (0..=2 * n).map(|l| a_closed(l, rho)).collect();
        let gamma_values: Vec<Scalar> = (0..=n).map(|s| gamma_seq(s, rho)).collect();
        let s_values: Vec<Scalar> = (0..n).map(|h| capped_weight_unchecked(h, n, rho)).collect();
        let omega = (0..n - 1).map(|i| &big_r * &s_values[n - 1 - i]).collect();
        Ok(AltSumTable {
            n,
            rho: rho.clone(),
            u: 1 - rho,
            v: rho * 2 - 1,
            eta: rho.square() - rho * 2 + 2,
            gamma1: gamma_values[1].clone(),
            gamma2: gamma_values[2].clone(),
            a_values,
            gamma_values,
            s_values,
            phi_n: phi_poly(n, rho),
            psi_n: psi_poly(n, rho),
            omega,
        })
    }

    pub fn a(&self, l: usize) -> &Scalar {
        &self.a_values[l]
    }
}

/// Table at the root `rho_N`.
pub fn terminal_polynomials(params: &RootParams) -> Result<AltSumTable> {
    AltSumTable::from_rho(params.n, &params.rho)
}

/// `sum_{s=0}^{n} gamma_s A_{2n-2s}`, scaled by its largest term.
pub fn convolution_residual(n_idx: usize, table: &AltSumTable) -> Result<ScaledResidual> {
    if n_idx == 0 {
        return Err(Error::InvalidArgument(
            "convolution identity starts at n = 1".into(),
        ));
    }
    if n_idx > table.n {
        return Err(Error::InvalidArgument(format!(
            "convolution index {n_idx} exceeds table horizon {}",
            table.n
        )));
    }
    let prec = table.rho.precision();
    let terms: Vec<Scalar> = (0..=n_idx)
        .map(|s| &table.gamma_values[s] * table.a(2 * n_idx - 2 * s))
        .collect();
    Ok(ScaledResidual::new(sum_at(prec, &terms), max_abs(prec, &terms)))
}

fn check_r(r: usize, n: usize) -> Result<()> {
    if r == 0 || r > n {
        return Err(Error::InvalidArgument(format!(
            "determinant index r = {r} outside [1, {n}]"
        )));
    }
    Ok(())
}

/// `A_{2r-2} A_{2r} - A_{2r-1}^2` at `rho_N`.
pub fn truncation_determinant(r: usize, params: &RootParams) -> Result<Scalar> {
    check_r(r, params.n)?;
    let rho = &params.rho;
    Ok(a_closed(2 * r - 2, rho) * a_closed(2 * r, rho) - a_closed(2 * r - 1, rho).square())
}

/// `(rho^(2r) (2r+1+2r rho) - 1) / (1+rho)^2`.
pub fn determinant_closed(r: usize, rho: &Scalar) -> Scalar {
    let two_r = 2 * r as i64;
    let num = rho.powi(two_r as i32) * (rho * two_r + (two_r + 1)) - 1;
    num / (rho + 1).square()
}

/// `A_{2r} - rho A_{2r-2} - 1 - (1-rho) A_{2r-1}` for `r >= 1`.
pub fn odd_reduction_residual(r: usize, rho: &Scalar) -> Result<ScaledResidual> {
    if r == 0 {
        return Err(Error::InvalidArgument("odd reduction starts at r = 1".into()));
    }
    let lhs = a_poly(2 * r, rho) - rho * a_poly(2 * r - 2, rho) - 1;
    let rhs = (1 - rho) * a_poly(2 * r - 1, rho);
    let scale = lhs.abs().max(rhs.abs()).max(Scalar::one(rho.precision()));
    Ok(ScaledResidual::new(lhs - rhs, scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::PrecisionConfig;
    use crate::rootfinding::solve_root;

    #[test]
    fn a_poly_small_cases() {
        let cfg = PrecisionConfig::default();
        let rho = cfg.ratio(2, 3).unwrap();
        assert_eq!(a_poly(0, &rho), 1);
        assert!(cfg.within(&(a_poly(1, &rho) - (2 - &rho)), &cfg.int(1)));
        let a2 = 3 - &rho * 2 + rho.square();
        assert!(cfg.within(&(a_poly(2, &rho) - &a2), &cfg.int(1)));
        for l in 0..40 {
            assert!(cfg.within(&(a_poly(l, &rho) - a_closed(l, &rho)), &cfg.int(l as i64 + 1)));
        }
    }

    #[test]
    fn gamma_examples() {
        let cfg = PrecisionConfig::default();
        let rho = cfg.ratio(7, 10).unwrap();
        assert_eq!(gamma_seq(0, &rho), -1);
        let g2 = (&rho - 2) * (rho.square() * 2 - &rho * 3 + 2);
        assert!(cfg.within(&(gamma_seq(2, &rho) - g2), &cfg.int(1)));
        let g4 = (&rho - 1).powi(4) * 4 * (&rho * 2 - 1);
        assert!(cfg.within(&(gamma_seq(4, &rho) - g4), &cfg.int(1)));
        // gamma_1 equals A_2 identically
        assert!(cfg.within(&(gamma_seq(1, &rho) - a_poly(2, &rho)), &cfg.int(1)));
    }

    #[test]
    fn capped_weight_differences() {
        let cfg = PrecisionConfig::default();
        let params = solve_root(7, &cfg).unwrap();
        let (n, rho) = (params.n, &params.rho);
        assert!(capped_weight(0, n, rho).unwrap().is_zero());
        assert!(capped_weight(n, n, rho).is_err());
        let s = |h| capped_weight(h, n, rho).unwrap();
        assert!(cfg.within(&(s(n - 1) - s(n - 2) - 1), &cfg.int(1)));
        let eta = rho.square() - rho * 2 + 2;
        assert!(cfg.within(&(s(n - 2) - s(n - 3) - eta), &cfg.int(1)));
        for h in 1..n {
            let diff = s(h) - s(h - 1);
            assert!(cfg.within(&(diff - capped_difference_closed(h, n, rho)), &cfg.int(4)));
        }
    }

    #[test]
    fn table_at_root() {
        let cfg = PrecisionConfig::default();
        let params = solve_root(9, &cfg).unwrap();
        let table = terminal_polynomials(&params).unwrap();
        assert!(cfg.within(&table.phi_n, &cfg.int(1)));
        assert!(table.s_values[0].is_zero());
        for i in 0..params.n - 1 {
            let expected = &params.big_r * &table.s_values[params.n - 1 - i];
            assert!(cfg.within(&(&table.omega[i] - expected), &params.big_r));
        }
        assert_eq!(table.a_values.len(), 2 * params.n + 1);
        assert_eq!(table.gamma_values.len(), params.n + 1);
        assert_eq!(table.omega.len(), params.n - 1);
    }

    #[test]
    fn phi_closed_off_root() {
        let cfg = PrecisionConfig::default();
        for (num, den) in [(3, 5), (9, 10), (1, 2)] {
            let rho = cfg.ratio(num, den).unwrap();
            for n in 3..12 {
                assert!(cfg.within(&(phi_poly(n, &rho) - phi_closed(n, &rho)), &cfg.int(4 * n as i64)));
            }
        }
    }

    #[test]
    fn convolution_first_index_is_exact_cancellation() {
        let cfg = PrecisionConfig::default();
        let table = AltSumTable::from_rho(5, &cfg.ratio(3, 4).unwrap()).unwrap();
        let res = convolution_residual(1, &table).unwrap();
        assert!(res.passes(100));
        assert!(convolution_residual(0, &table).is_err());
        assert!(convolution_residual(6, &table).is_err());
    }

    #[test]
    fn determinant_vanishes_at_horizon() {
        let cfg = PrecisionConfig::default();
        let params = solve_root(10, &cfg).unwrap();
        for r in 1..params.n {
            let det = truncation_determinant(r, &params).unwrap();
            assert!(det.is_positive(), "r={r}");
            assert!(cfg.within(&(&det - determinant_closed(r, &params.rho)), &cfg.int(1)));
        }
        let last = truncation_determinant(params.n, &params).unwrap();
        assert!(cfg.within(&last, &cfg.int(1)));
        assert!(truncation_determinant(0, &params).is_err());
        assert!(truncation_determinant(11, &params).is_err());
    }

    #[test]
    fn odd_reduction_small() {
        let cfg = PrecisionConfig::default();
        let rho = cfg.ratio(5, 8).unwrap();
        for r in 1..30 {
            assert!(odd_reduction_residual(r, &rho).unwrap().passes(100));
        }
        assert!(odd_reduction_residual(0, &rho).is_err());
    }
}
