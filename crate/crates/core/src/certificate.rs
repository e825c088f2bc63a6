//! Closed-form certificate via the tail-square law, Systems C/A/B/D, and the
//! universal identities that hold for every `d`.
//!
//! Two tail conventions appear here. The abstract tails
//! `T_m = sum_{h>m} P_h` (with `P_N = 1/q`) are defined for any `d`; the
//! terminal-completed tails `T_m = 2N - Pi_m` only make sense once
//! `L_N(d) = 0`. [`tails_from_tail_square`] produces the second kind and
//! [`abstract_tails`] the first; at the built certificate they agree.

use crate::altsums::{terminal_polynomials, AltSumTable};
use crate::error::{invariant, Error, Result};
use crate::numerics::{max_abs, sum_at, PrecisionConfig, Scalar, ScaledResidual};
use crate::rootfinding::{solve_root, RootParams};

/// Prefix and tail variables for one `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct TailProfile {
    pub n: usize,
    /// `P_0..P_N`, with `P_N = 1/q`.
    pub p_values: Vec<Scalar>,
    /// `T_0..T_N`, with `T_N = 0`.
    pub t_values: Vec<Scalar>,
    /// `Pi_0..Pi_{N-1}`, `Pi_m = P_1 + ... + P_m`.
    pub pi_values: Vec<Scalar>,
    pub w_n: Scalar,
    pub l_n: Scalar,
}

/// The certificate coefficients and their residuals.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub params: RootParams,
    pub table: AltSumTable,
    pub tails: TailProfile,
    /// `d_0..d_{N-2}`.
    pub d: Vec<Scalar>,
    /// `c_0..c_N`.
    pub c: Vec<Scalar>,
    /// `a_0..a_{N-1}`.
    pub a: Vec<Scalar>,
    /// `b_0..b_{N-2}`.
    pub b: Vec<Scalar>,
    /// `eps_0..eps_N`.
    pub residuals: Vec<Scalar>,
    /// `K_0..K_{N-2}`.
    pub margins: Vec<Scalar>,
}

/// Every system evaluated at one `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemValues {
    pub c: Vec<Scalar>,
    pub a: Vec<Scalar>,
    pub b: Vec<Scalar>,
    pub eps: Vec<Scalar>,
}

fn check_len(d: &[Scalar], n: usize) -> Result<()> {
    if d.len() + 1 != n {
        return Err(Error::InvalidArgument(format!(
            "d has {} entries, expected N - 1 = {}",
            d.len(),
            n - 1
        )));
    }
    Ok(())
}

/// `P_0..P_{N-1}` with `P_i = 1 + d_0 + ... + d_{i-1}`.
fn prefixes(d: &[Scalar], prec: u32) -> Vec<Scalar> {
    let mut out = Vec::with_capacity(d.len() + 1);
    let mut acc = Scalar::one(prec);
    out.push(acc.clone());
    for x in d {
        acc += x;
        out.push(acc.clone());
    }
    out
}

/// `out[m] = values[m] + ... + values[last]`, with a trailing zero.
fn suffix_sums(values: &[Scalar], prec: u32) -> Vec<Scalar> {
    let mut out = vec![Scalar::zero(prec); values.len() + 1];
    for m in (0..values.len()).rev() {
        out[m] = &out[m + 1] + &values[m];
    }
    out
}

fn relative(lhs: Scalar, rhs: Scalar, floor: &Scalar) -> ScaledResidual {
    let scale = lhs.abs().max(rhs.abs()).max(floor.abs());
    ScaledResidual::new(lhs - rhs, scale)
}

fn worst(items: impl IntoIterator<Item = ScaledResidual>, prec: u32) -> ScaledResidual {
    items.into_iter().fold(
        ScaledResidual::new(Scalar::zero(prec), Scalar::one(prec)),
        ScaledResidual::worst,
    )
}

/// Terminal-completed tails `T_{N-1-n} = q^-1 sqrt(A_{2n})` at the root.
pub fn tails_from_tail_square(params: &RootParams, table: &AltSumTable) -> Result<TailProfile> {
    let n = params.n;
    let prec = params.precision();
    let q_inv = params.q.recip()?;
    let mut t_values = vec![Scalar::zero(prec); n + 1];
    for k in 0..n {
        let a = table.a(2 * k);
        if !a.is_positive() {
            return Err(invariant("tail_square", format!("A_{} <= 0 at the root", 2 * k)));
        }
        t_values[n - 1 - k] = &q_inv * a.sqrt()?;
    }
    let mut p_values = Vec::with_capacity(n + 1);
    p_values.push(Scalar::one(prec));
    for m in 1..=n {
        p_values.push(&t_values[m - 1] - &t_values[m]);
    }
    let pi_values = partial_sums(&p_values, n, prec);
    let d = d_from_p(&p_values, n);
    let w_n = weighted_mass(&d, n, prec);
    let l_n = terminal_l_from_w(&w_n, params);
    Ok(TailProfile {
        n,
        p_values,
        t_values,
        pi_values,
        w_n,
        l_n,
    })
}

/// `Pi_0..Pi_{N-1}`.
fn partial_sums(p_values: &[Scalar], n: usize, prec: u32) -> Vec<Scalar> {
    let mut out = Vec::with_capacity(n);
    let mut acc = Scalar::zero(prec);
    out.push(acc.clone());
    for p in &p_values[1..n] {
        acc += p;
        out.push(acc.clone());
    }
    out
}

fn d_from_p(p_values: &[Scalar], n: usize) -> Vec<Scalar> {
    (1..n).map(|m| &p_values[m] - &p_values[m - 1]).collect()
}

/// `d_{m-1} = P_m - P_{m-1}` for `1 <= m <= N-1`; every entry must be positive.
pub fn d_from_tails(tails: &TailProfile) -> Result<Vec<Scalar>> {
    let d = d_from_p(&tails.p_values, tails.n);
    if let Some(j) = d.iter().position(|x| !x.is_positive()) {
        return Err(invariant(
            "positivity",
            format!("d_{j} = {} is not positive", d[j]),
        ));
    }
    Ok(d)
}

/// `W_N(d) = sum_j (N-1-j) d_j`.
fn weighted_mass(d: &[Scalar], n: usize, prec: u32) -> Scalar {
    let mut acc = Scalar::zero(prec);
    for (j, x) in d.iter().enumerate() {
        acc += x * (n - 1 - j) as i64;
    }
    acc
}

fn terminal_l_from_w(w_n: &Scalar, params: &RootParams) -> Scalar {
    let r = &params.big_r;
    r * (w_n + (params.n as i64 - 1)) + (r - 1) / (&params.rho + 1) + &params.q
}

/// `L_N(d) = R (W_N(d) + N - 1) + (R - 1)/(1 + rho) + q`.
pub fn terminal_l(d: &[Scalar], params: &RootParams) -> Result<Scalar> {
    check_len(d, params.n)?;
    let w = weighted_mass(d, params.n, params.precision());
    Ok(terminal_l_from_w(&w, params))
}

/// Abstract tails `T_m = sum_{h=m+1}^{N} P_h` with `P_N = 1/q`, valid for any `d`.
pub fn abstract_tails(d: &[Scalar], params: &RootParams) -> Result<TailProfile> {
    let n = params.n;
    check_len(d, n)?;
    let prec = params.precision();
    let mut p_values = prefixes(d, prec);
    p_values.push(params.q.recip()?);
    let mut t_values = vec![Scalar::zero(prec); n + 1];
    for m in (0..n).rev() {
        t_values[m] = &t_values[m + 1] + &p_values[m + 1];
    }
    let pi_values = partial_sums(&p_values, n, prec);
    let w_n = weighted_mass(d, n, prec);
    let l_n = terminal_l_from_w(&w_n, params);
    Ok(TailProfile {
        n,
        p_values,
        t_values,
        pi_values,
        w_n,
        l_n,
    })
}

/// System C: `c_i = R(alpha sum_{k<=i} d_k - d_i + alpha)` for `i <= N-2`,
/// `c_{N-1} = R(1 + sum d + rho/q)`, `c_N = q`.
pub fn system_c(d: &[Scalar], params: &RootParams) -> Result<Vec<Scalar>> {
    let n = params.n;
    check_len(d, n)?;
    let (r, alpha) = (&params.big_r, &params.alpha);
    let mut c = Vec::with_capacity(n + 1);
    let mut mass = Scalar::zero(params.precision());
    for x in d {
        mass += x;
        c.push(r * (alpha * &mass - x + alpha));
    }
    c.push(r * (&mass + 1 + (&params.rho / &params.q)));
    c.push(params.q.clone());
    Ok(c)
}

/// Prefix form `c_i = R(P_i + rho P_{i+1})` with `P_N = 1/q`.
pub fn system_c_prefix(d: &[Scalar], params: &RootParams) -> Result<Vec<Scalar>> {
    let n = params.n;
    check_len(d, n)?;
    let mut p = prefixes(d, params.precision());
    p.push(params.q.recip()?);
    let mut c: Vec<Scalar> = (0..n)
        .map(|i| &params.big_r * (&p[i] + &params.rho * &p[i + 1]))
        .collect();
    c.push(params.q.clone());
    Ok(c)
}

/// Systems A and B by backward recursion from `a_{N-1}`.
pub fn system_ab(
    d: &[Scalar],
    c: &[Scalar],
    params: &RootParams,
) -> Result<(Vec<Scalar>, Vec<Scalar>)> {
    let n = params.n;
    check_len(d, n)?;
    if c.len() != n + 1 {
        return Err(Error::InvalidArgument(format!(
            "c has {} entries, expected N + 1 = {}",
            c.len(),
            n + 1
        )));
    }
    let prec = params.precision();
    let (r, rho, alpha) = (&params.big_r, &params.rho, &params.alpha);
    let p = prefixes(d, prec);
    let tail = suffix_sums(c, prec);
    let one_plus_alpha = alpha + 1;
    let two_alpha_minus_one = alpha * 2 - 1;

    let mut a = vec![Scalar::zero(prec); n];
    let mut b = vec![Scalar::zero(prec); n - 1];
    a[n - 1] = 1 - &c[n] * &p[n - 1];

    let i = n - 2;
    let sq = c[i + 1].square() / r;
    let cross = &c[i] * &c[i + 1] / r;
    let cp = &c[i + 1] * &p[i];
    a[i] = (&sq + &cross - &a[i + 1] - &one_plus_alpha * &cp) / alpha;
    b[i] = (rho * &sq - &cross - rho * &a[i + 1] + &cp) / alpha;

    for i in (0..n - 2).rev() {
        let sq = c[i + 1].square() / r;
        let cross = &c[i] * &c[i + 1] / r;
        let cp = &c[i + 1] * &p[i];
        let far = &d[i + 1] * &tail[i + 3];
        let carry = &two_alpha_minus_one * &b[i + 1];
        a[i] = (&sq + &cross - &a[i + 1] - &one_plus_alpha * &cp - &far + &carry) / alpha;
        b[i] = (rho * &sq - &cross - rho * &a[i + 1] + &cp - rho * &far + rho * &carry) / alpha;
    }
    Ok((a, b))
}

/// System D residuals `eps_0..eps_N`.
pub fn residuals(
    d: &[Scalar],
    c: &[Scalar],
    a: &[Scalar],
    b: &[Scalar],
    params: &RootParams,
) -> Result<Vec<Scalar>> {
    let n = params.n;
    check_len(d, n)?;
    if c.len() != n + 1 || a.len() != n || b.len() != n - 1 {
        return Err(Error::InvalidArgument(format!(
            "inconsistent lengths: c {}, a {}, b {} for N = {n}",
            c.len(),
            a.len(),
            b.len()
        )));
    }
    let prec = params.precision();
    let p = prefixes(d, prec);
    let tail = suffix_sums(c, prec);
    let mut eps = Vec::with_capacity(n + 1);
    let far0 = &d[0] * &tail[2];
    eps.push(&a[0] + &far0 - &b[0] - &c[0]);
    for i in 1..n - 1 {
        eps.push(
            &b[i - 1] + &a[i] + &d[i] * &tail[i + 2] - &a[i - 1] - &b[i] - &c[i] * &p[i - 1],
        );
    }
    eps.push(&b[n - 2] + &a[n - 1] - &a[n - 2] - &c[n - 1] * &p[n - 2]);
    let two_alpha_minus_one = &params.alpha * 2 - 1;
    eps.push(-&c[0] - &a[0] - far0 + two_alpha_minus_one * &b[0] + c[0].square() / &params.big_r);
    Ok(eps)
}

/// Systems C, A, B and D at one `d`.
pub fn evaluate_systems(d: &[Scalar], params: &RootParams) -> Result<SystemValues> {
    let c = system_c(d, params)?;
    let (a, b) = system_ab(d, &c, params)?;
    let eps = residuals(d, &c, &a, &b, params)?;
    Ok(SystemValues { c, a, b, eps })
}

/// `K_i = sum_{h<=i} c_h - (sum_{h<=i} d_h)(sum_{j>i} c_j)` for `0 <= i <= N-2`.
pub fn cumulative_margins(d: &[Scalar], c: &[Scalar], params: &RootParams) -> Result<Vec<Scalar>> {
    let n = params.n;
    check_len(d, n)?;
    if c.len() != n + 1 {
        return Err(Error::InvalidArgument("c must have N + 1 entries".into()));
    }
    let prec = params.precision();
    let tail = suffix_sums(c, prec);
    let mut c_mass = Scalar::zero(prec);
    let mut d_mass = Scalar::zero(prec);
    let mut out = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        c_mass += &c[i];
        d_mass += &d[i];
        out.push(&c_mass - &d_mass * &tail[i + 1]);
    }
    Ok(out)
}

/// `K_i = (1 - rho)(sqrt(A_{2r-2} A_{2r}) - A_{2r-1})` with `r = N-1-i`.
pub fn margin_closed_form(i: usize, table: &AltSumTable) -> Result<Scalar> {
    if i + 1 >= table.n {
        return Err(Error::InvalidArgument(format!("margin index {i} out of range")));
    }
    let r = table.n - 1 - i;
    let root = (table.a(2 * r - 2) * table.a(2 * r)).sqrt()?;
    Ok(&table.u * (root - table.a(2 * r - 1)))
}

fn eps_floor(params: &RootParams, terms: &[Scalar]) -> Scalar {
    max_abs(params.precision(), terms).max(params.big_r.clone())
}

/// `sum_{i<N} eps_i + (1 + rho) L_N(d)`.
pub fn right_conservation_residual(d: &[Scalar], params: &RootParams) -> Result<ScaledResidual> {
    let sys = evaluate_systems(d, params)?;
    let l = terminal_l(d, params)?;
    let n = params.n;
    let lhs = sum_at(params.precision(), &sys.eps[..n]);
    let rhs = -((&params.rho + 1) * l);
    let floor = eps_floor(params, &sys.eps);
    Ok(relative(lhs, rhs, &floor))
}

/// `eps_N + sum_{i<N} rho^(2i) eps_i`.
pub fn weighted_left_conservation_residual(
    d: &[Scalar],
    params: &RootParams,
) -> Result<ScaledResidual> {
    let sys = evaluate_systems(d, params)?;
    let n = params.n;
    let rho2 = params.rho.square();
    let mut weight = Scalar::one(params.precision());
    let mut acc = sys.eps[n].clone();
    for e in &sys.eps[..n] {
        acc += &weight * e;
        weight *= &rho2;
    }
    let floor = eps_floor(params, &sys.eps);
    Ok(ScaledResidual::new(acc, floor))
}

/// `L^2 + Psi L + Phi - sum_{i<=N-2} Omega_i eps_i`, scaled by `R^2`.
pub fn terminal_quadratic_residual(
    d: &[Scalar],
    params: &RootParams,
    table: &AltSumTable,
) -> Result<ScaledResidual> {
    let sys = evaluate_systems(d, params)?;
    let l = terminal_l(d, params)?;
    let lhs = l.square() + &table.psi_n * &l + &table.phi_n;
    let mut rhs = Scalar::zero(params.precision());
    for (omega, e) in table.omega.iter().zip(&sys.eps) {
        rhs += omega * e;
    }
    let r2 = params.big_r.square();
    let magnitude = l.square().abs().max((&table.psi_n * &l).abs()).max(rhs.abs());
    let scale = &r2 * magnitude.max(Scalar::one(params.precision()));
    Ok(ScaledResidual::new(lhs - rhs, scale))
}

/// `L_N(d) + Psi_N`, strictly positive on `d >= 0`.
pub fn spurious_factor_margin(
    d: &[Scalar],
    params: &RootParams,
    table: &AltSumTable,
) -> Result<Scalar> {
    if let Some(j) = d.iter().position(Scalar::is_sign_negative) {
        return Err(Error::InvalidArgument(format!(
            "spurious-factor bound needs d >= 0, d_{j} = {}",
            d[j]
        )));
    }
    Ok(terminal_l(d, params)? + &table.psi_n)
}

/// `sum_{l=from}^{N-1} v^(l-from) T_l^2`, indexed by `from`.
fn weighted_tail_squares(t: &[Scalar], n: usize, v: &Scalar, prec: u32) -> Vec<Scalar> {
    let mut out = vec![Scalar::zero(prec); n + 1];
    for from in (0..n).rev() {
        out[from] = t[from].square() + v * &out[from + 1];
    }
    out
}

/// Worst `|b_i/(rho R) - (T_i T_{i+1} + (rho-2) T_{i+1}^2 + 2u^2 sum v^(l-i-2) T_l^2)|`
/// over `i`, using abstract tails.
pub fn b_tail_normal_check(d: &[Scalar], params: &RootParams) -> Result<ScaledResidual> {
    let n = params.n;
    let prec = params.precision();
    let sys = evaluate_systems(d, params)?;
    let t = abstract_tails(d, params)?.t_values;
    let rho = &params.rho;
    let u = 1 - rho;
    let v = rho * 2 - 1;
    let tails = weighted_tail_squares(&t, n, &v, prec);
    let scale_b = rho * &params.big_r;
    let two_u2 = u.square() * 2;
    let one = Scalar::one(prec);
    let items = (0..n - 1).map(|i| {
        let lhs = &sys.b[i] / &scale_b;
        let rhs = &t[i] * &t[i + 1] + (rho - 2) * t[i + 1].square() + &two_u2 * &tails[i + 2];
        relative(lhs, rhs, &one)
    });
    Ok(worst(items.collect::<Vec<_>>(), prec))
}

/// `eps_0/R - (T_0^2 - (1+rho) T_0 - 1 - eta T_1^2 + 2u^3 sum v^(l-2) T_l^2)`.
pub fn eps0_tail_residual(
    d: &[Scalar],
    params: &RootParams,
    table: &AltSumTable,
) -> Result<ScaledResidual> {
    let n = params.n;
    let prec = params.precision();
    let sys = evaluate_systems(d, params)?;
    let t = abstract_tails(d, params)?.t_values;
    let tails = weighted_tail_squares(&t, n, &table.v, prec);
    let lhs = &sys.eps[0] / &params.big_r;
    let rhs = t[0].square() - (&params.rho + 1) * &t[0] - 1 - &table.eta * t[1].square()
        + table.u.powi(3) * 2 * &tails[2];
    Ok(relative(lhs, rhs, &Scalar::one(prec)))
}

/// Worst `eps_i/R - (-T_{i-1}^2 + gamma_1 T_i^2 + gamma_2 T_{i+1}^2 + 4u^4 sum v^(l-i-2) T_l^2)`
/// over `1 <= i <= N-1`.
pub fn middle_tail_residual(
    d: &[Scalar],
    params: &RootParams,
    table: &AltSumTable,
) -> Result<ScaledResidual> {
    let n = params.n;
    let prec = params.precision();
    let sys = evaluate_systems(d, params)?;
    let t = abstract_tails(d, params)?.t_values;
    let tails = weighted_tail_squares(&t, n, &table.v, prec);
    let four_u4 = table.u.powi(4) * 4;
    let one = Scalar::one(prec);
    let items: Vec<ScaledResidual> = (1..n)
        .map(|i| {
            let lhs = &sys.eps[i] / &params.big_r;
            let far = if i + 2 <= n { &tails[i + 2] } else { &tails[n] };
            let rhs = -t[i - 1].square()
                + &table.gamma1 * t[i].square()
                + &table.gamma2 * t[i + 1].square()
                + &four_u4 * far;
            relative(lhs, rhs, &one)
        })
        .collect();
    Ok(worst(items, prec))
}

/// `sum_{i<=N-2} eps_i` against its expansion in `R_d = sum d` and `sum j d_j`.
pub fn outer_face_residual(d: &[Scalar], params: &RootParams) -> Result<ScaledResidual> {
    let n = params.n as i64;
    let prec = params.precision();
    let sys = evaluate_systems(d, params)?;
    let lhs = sum_at(prec, &sys.eps[..params.n - 1]);
    let (q, rho) = (&params.q, &params.rho);
    let q2 = q.square();
    let mass = sum_at(prec, d);
    let mut moment = Scalar::zero(prec);
    for (j, x) in d.iter().enumerate() {
        moment += x * j as i64;
    }
    let u = 1 - rho;
    let rhs = &q2 * mass.square()
        + &mass * (q * 2 - &q2 * (rho * (n - 1) + (n - 3)))
        - &q2 * (rho + 1) * (n - 1)
        + q * &u
        - u.square()
        + &q2 * (rho + 1) * moment;
    let floor = eps_floor(params, &sys.eps);
    Ok(relative(lhs, rhs, &floor))
}

/// Worst gap between System C and its prefix form.
pub fn prefix_form_residual(d: &[Scalar], params: &RootParams) -> Result<ScaledResidual> {
    let direct = system_c(d, params)?;
    let prefix = system_c_prefix(d, params)?;
    let items: Vec<ScaledResidual> = direct
        .into_iter()
        .zip(prefix)
        .map(|(x, y)| relative(x, y, &params.big_r))
        .collect();
    Ok(worst(items, params.precision()))
}

impl Certificate {
    pub fn n(&self) -> usize {
        self.params.n
    }

    /// `max_i |eps_i| / R`.
    pub fn residual_max_over_r(&self) -> Scalar {
        max_abs(self.params.precision(), &self.residuals) / &self.params.big_r
    }

    pub fn margins_min(&self) -> Scalar {
        self.margins
            .iter()
            .cloned()
            .reduce(Scalar::min)
            .expect("N >= 3 gives at least one margin")
    }

    /// Worst `|rho a_i - b_i - rho d_i c_{i+1}|` against `R`.
    pub fn bridge_residual(&self) -> ScaledResidual {
        let rho = &self.params.rho;
        let items: Vec<ScaledResidual> = (0..self.n() - 1)
            .map(|i| {
                let gap = rho * &self.a[i] - &self.b[i] - rho * &self.d[i] * &self.c[i + 1];
                ScaledResidual::new(gap, self.params.big_r.clone())
            })
            .collect();
        worst(items, self.params.precision())
    }

    /// Worst `|b_i - rho/(1-rho) K_i|` against `R`.
    pub fn margin_link_residual(&self) -> ScaledResidual {
        let rho = &self.params.rho;
        let factor = rho / (1 - rho);
        let items: Vec<ScaledResidual> = (0..self.n() - 1)
            .map(|i| {
                let gap = &self.b[i] - &factor * &self.margins[i];
                ScaledResidual::new(gap, self.params.big_r.clone())
            })
            .collect();
        worst(items, self.params.precision())
    }

    /// Worst `|R T_{N-1-n}^2 - A_{2n}|` relative to `A_{2n}`.
    pub fn tail_square_residual(&self) -> ScaledResidual {
        let n = self.n();
        let items: Vec<ScaledResidual> = (0..n)
            .map(|k| {
                let lhs = &self.params.big_r * self.tails.t_values[n - 1 - k].square();
                relative(lhs, self.table.a(2 * k).clone(), &Scalar::one(self.params.precision()))
            })
            .collect();
        worst(items, self.params.precision())
    }

    /// `|T_0 - 2N|` against `N`.
    pub fn t0_residual(&self) -> ScaledResidual {
        let n = self.n() as i64;
        let gap = &self.tails.t_values[0] - 2 * n;
        ScaledResidual::new(gap, Scalar::from_int(self.params.precision(), n))
    }

    /// `|a_{N-1} - (2 - sqrt(3 - 2 rho + rho^2))|`.
    pub fn terminal_a_residual(&self) -> Result<ScaledResidual> {
        let rho = &self.params.rho;
        let expected = 2 - (3 - rho * 2 + rho.square()).sqrt()?;
        let gap = &self.a[self.n() - 1] - expected;
        Ok(ScaledResidual::new(gap, Scalar::one(self.params.precision())))
    }

    /// Worst gap between `K_i` and its closed form, against `R`.
    pub fn margin_closed_form_residual(&self) -> Result<ScaledResidual> {
        let mut items = Vec::with_capacity(self.n() - 1);
        for (i, k) in self.margins.iter().enumerate() {
            let closed = margin_closed_form(i, &self.table)?;
            items.push(ScaledResidual::new(k - closed, self.params.big_r.clone()));
        }
        Ok(worst(items, self.params.precision()))
    }

    /// Worst gap between the terminal-completed and abstract tails, against `2N`.
    pub fn tail_convention_residual(&self) -> Result<ScaledResidual> {
        let abs = abstract_tails(&self.d, &self.params)?;
        let scale = Scalar::from_int(self.params.precision(), 2 * self.n() as i64);
        let items: Vec<ScaledResidual> = abs
            .t_values
            .iter()
            .zip(&self.tails.t_values)
            .map(|(x, y)| ScaledResidual::new(x - y, scale.clone()))
            .collect();
        Ok(worst(items, self.params.precision()))
    }

    /// `(name, all entries > 0)` for each coefficient family.
    pub fn positivity(&self) -> Vec<(&'static str, bool)> {
        let pos = |v: &[Scalar]| v.iter().all(Scalar::is_positive);
        vec![
            ("d", pos(&self.d)),
            ("c", pos(&self.c)),
            ("a", pos(&self.a)),
            ("b", pos(&self.b)),
            ("margins", pos(&self.margins)),
        ]
    }
}

fn require(name: &'static str, check: &ScaledResidual, exponent: u32) -> Result<()> {
    if check.passes(exponent) {
        Ok(())
    } else {
        Err(invariant(
            name,
            format!("relative residual {:e} exceeds 2^-{exponent}", check.relative()),
        ))
    }
}

/// Root, tables, closed-form tails, all four systems and the margins, with
/// every certificate invariant checked at `2^-t`.
pub fn build_certificate(n: usize, cfg: &PrecisionConfig) -> Result<Certificate> {
    let params = solve_root(n, cfg)?;
    let table = terminal_polynomials(&params)?;
    let tails = tails_from_tail_square(&params, &table)?;
    let d = d_from_tails(&tails)?;
    let c = system_c(&d, &params)?;
    let (a, b) = system_ab(&d, &c, &params)?;
    let residuals = residuals(&d, &c, &a, &b, &params)?;
    let margins = cumulative_margins(&d, &c, &params)?;
    let cert = Certificate {
        params,
        table,
        tails,
        d,
        c,
        a,
        b,
        residuals,
        margins,
    };

    let t = cfg.tolerance_exponent();
    for (family, ok) in cert.positivity() {
        if !ok {
            return Err(invariant("positivity", format!("{family} has a nonpositive entry")));
        }
    }
    let eps = ScaledResidual::new(
        max_abs(cfg.precision_bits(), &cert.residuals),
        cert.params.big_r.clone(),
    );
    require("residuals", &eps, t)?;
    require("bridge", &cert.bridge_residual(), t)?;
    require("margin_link", &cert.margin_link_residual(), t)?;
    require("tail_square", &cert.tail_square_residual(), t)?;
    require("t0", &cert.t0_residual(), t)?;
    require("terminal_a", &cert.terminal_a_residual()?, t)?;
    require("margin_closed_form", &cert.margin_closed_form_residual()?, t)?;
    require("tail_conventions", &cert.tail_convention_residual()?, t)?;
    let l = ScaledResidual::new(cert.tails.l_n.clone(), Scalar::one(cfg.precision_bits()));
    require("terminal_l", &l, t)?;
    Ok(cert)
}
