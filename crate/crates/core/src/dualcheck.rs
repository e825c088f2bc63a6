//! Multiplier weights, the coefficient ledger of the dual identity, and
//! numerical checks of the identity and the rate bound on trajectories.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::certificate::Certificate;
use crate::error::{invariant, Error, Result};
use crate::numerics::{max_abs, PrecisionConfig, Scalar, ScaledResidual};

/// Low-rank multipliers `lambda_{*j} = c_j`, `lambda_{i,i+1} = a_i`,
/// `lambda_{i+1,i} = b_i`, `lambda_{ij} = d_i c_j` for `j >= i+2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualWeights {
    pub n: usize,
    pub lambda_star: Vec<Scalar>,
    pub lambda_fwd: Vec<Scalar>,
    pub lambda_rev: Vec<Scalar>,
    pub lambda_far: BTreeMap<(usize, usize), Scalar>,
}

impl DualWeights {
    /// Every nonzero `(from, to, weight)` triple.
    pub fn entries(&self) -> Vec<(Index, Index, &Scalar)> {
        let mut out = Vec::new();
        for (j, w) in self.lambda_star.iter().enumerate() {
            out.push((Index::Star, Index::Point(j), w));
        }
        for (i, w) in self.lambda_fwd.iter().enumerate() {
            out.push((Index::Point(i), Index::Point(i + 1), w));
        }
        for (i, w) in self.lambda_rev.iter().enumerate() {
            out.push((Index::Point(i + 1), Index::Point(i), w));
        }
        for (&(i, j), w) in &self.lambda_far {
            out.push((Index::Point(i), Index::Point(j), w));
        }
        out
    }

    pub fn get(&self, from: Index, to: Index) -> Option<&Scalar> {
        match (from, to) {
            (Index::Star, Index::Point(j)) => self.lambda_star.get(j),
            (Index::Point(i), Index::Point(j)) if j == i + 1 => self.lambda_fwd.get(i),
            (Index::Point(i), Index::Point(j)) if i == j + 1 => self.lambda_rev.get(j),
            (Index::Point(i), Index::Point(j)) => self.lambda_far.get(&(i, j)),
            _ => None,
        }
    }
}

/// A node of the interpolation graph: the minimizer or an iterate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Index {
    Star,
    Point(usize),
}

pub fn assemble_weights(cert: &Certificate) -> Result<DualWeights> {
    let n = cert.n();
    let mut lambda_far = BTreeMap::new();
    for (i, di) in cert.d.iter().enumerate() {
        for j in i + 2..=n {
            lambda_far.insert((i, j), di * &cert.c[j]);
        }
    }
    let weights = DualWeights {
        n,
        lambda_star: cert.c.clone(),
        lambda_fwd: cert.a.clone(),
        lambda_rev: cert.b.clone(),
        lambda_far,
    };
    if let Some((from, to, w)) = weights.entries().into_iter().find(|(_, _, w)| !w.is_positive()) {
        return Err(invariant(
            "weights_nonnegative",
            format!("lambda[{from:?} -> {to:?}] = {w} is not positive"),
        ));
    }
    Ok(weights)
}

/// A gradient-descent run `x_{k+1} = x_k - step g_k` with function values.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryData {
    pub dim: usize,
    pub x0: Vec<Scalar>,
    pub xstar: Vec<Scalar>,
    /// `x_0..x_N`.
    pub points: Vec<Vec<Scalar>>,
    /// `g_0..g_N`.
    pub gradients: Vec<Vec<Scalar>>,
    /// `f_0..f_N`.
    pub values: Vec<Scalar>,
    pub fstar: Scalar,
    pub step: Scalar,
}

fn dot(x: &[Scalar], y: &[Scalar]) -> Scalar {
    let mut acc = Scalar::zero(x[0].precision());
    for (a, b) in x.iter().zip(y) {
        acc += a * b;
    }
    acc
}

fn sub(x: &[Scalar], y: &[Scalar]) -> Vec<Scalar> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

impl TrajectoryData {
    /// Builds the points from `x0`, the gradients and the step.
    pub fn from_gradients(
        x0: Vec<Scalar>,
        xstar: Vec<Scalar>,
        gradients: Vec<Vec<Scalar>>,
        values: Vec<Scalar>,
        fstar: Scalar,
        step: Scalar,
    ) -> Result<TrajectoryData> {
        let dim = x0.len();
        if dim == 0 || xstar.len() != dim || gradients.iter().any(|g| g.len() != dim) {
            return Err(Error::InvalidArgument("trajectory vectors must share a positive dimension".into()));
        }
        if gradients.is_empty() || values.len() != gradients.len() {
            return Err(Error::InvalidArgument(
                "need one value per gradient and at least one iterate".into(),
            ));
        }
        let mut points = Vec::with_capacity(gradients.len());
        points.push(x0.clone());
        for g in &gradients[..gradients.len() - 1] {
            let last = points.last().expect("at least x0");
            points.push(last.iter().zip(g).map(|(x, gi)| x - &step * gi).collect());
        }
        Ok(TrajectoryData {
            dim,
            x0,
            xstar,
            points,
            gradients,
            values,
            fstar,
            step,
        })
    }

    pub fn horizon(&self) -> usize {
        self.points.len() - 1
    }

    /// Worst `|x_{k+1} - (x_k - step g_k)|`, relative to the largest coordinate.
    pub fn consistency_residual(&self) -> ScaledResidual {
        let prec = self.step.precision();
        let mut worst = Scalar::zero(prec);
        let mut scale = Scalar::one(prec);
        if self.points.first() != Some(&self.x0) {
            worst = max_abs(prec, &sub(&self.points[0], &self.x0));
        }
        for k in 0..self.horizon() {
            for (i, x) in self.points[k + 1].iter().enumerate() {
                let expected = &self.points[k][i] - &self.step * &self.gradients[k][i];
                worst = worst.max((x - &expected).abs());
                scale = scale.max(x.abs());
            }
        }
        ScaledResidual::new(worst, scale)
    }

    fn x(&self, i: Index) -> &[Scalar] {
        match i {
            Index::Star => &self.xstar,
            Index::Point(k) => &self.points[k],
        }
    }

    fn f(&self, i: Index) -> &Scalar {
        match i {
            Index::Star => &self.fstar,
            Index::Point(k) => &self.values[k],
        }
    }

    fn g(&self, i: Index) -> Vec<Scalar> {
        match i {
            Index::Star => vec![Scalar::zero(self.step.precision()); self.dim],
            Index::Point(k) => self.gradients[k].clone(),
        }
    }
}

/// `Q_ij = f_i - f_j - <g_j, x_i - x_j> - |g_i - g_j|^2 / 2`, with `g_* = 0`.
pub fn slack(i: Index, j: Index, data: &TrajectoryData) -> Result<Scalar> {
    if i == j {
        return Err(Error::InvalidArgument(format!("slack needs distinct indices, got {i:?} twice")));
    }
    for idx in [i, j] {
        if let Index::Point(k) = idx {
            if k > data.horizon() {
                return Err(Error::InvalidArgument(format!(
                    "index {k} beyond horizon {}",
                    data.horizon()
                )));
            }
        }
    }
    let gi = data.g(i);
    let gj = data.g(j);
    let dx = sub(data.x(i), data.x(j));
    let dg = sub(&gi, &gj);
    Ok(data.f(i) - data.f(j) - dot(&gj, &dx) - dot(&dg, &dg).mul_pow2(-1))
}

fn require_horizon(cert: &Certificate, data: &TrajectoryData) -> Result<()> {
    if data.horizon() != cert.n() {
        return Err(Error::InvalidArgument(format!(
            "trajectory has {} steps, certificate has N = {}",
            data.horizon(),
            cert.n()
        )));
    }
    let prec = cert.params.precision();
    let exponent = prec / 2;
    let step_gap = ScaledResidual::new(&data.step - &cert.params.alpha, Scalar::one(prec));
    if !step_gap.passes(exponent) {
        return Err(Error::InvalidArgument(format!(
            "trajectory step {} differs from alpha = {}",
            data.step, cert.params.alpha
        )));
    }
    if !data.consistency_residual().passes(exponent) {
        return Err(Error::InvalidArgument(
            "trajectory points do not follow x_(k+1) = x_k - alpha g_k".into(),
        ));
    }
    Ok(())
}

/// Both sides of the dual identity on one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct DualIdentityCheck {
    /// `sum lambda Q - rhs`, scaled by the largest term.
    pub residual: ScaledResidual,
    pub weighted_slack: Scalar,
    pub rhs: Scalar,
}

fn v_vector(cert: &Certificate, data: &TrajectoryData) -> Vec<Scalar> {
    let prec = cert.params.precision();
    let mut v = vec![Scalar::zero(prec); data.dim];
    for (c, g) in cert.c.iter().zip(&data.gradients) {
        for (vi, gi) in v.iter_mut().zip(g) {
            *vi += c * gi;
        }
    }
    v
}

/// `sum lambda_ij Q_ij` against
/// `f_* - f_N + <v, x_0 - x_*> - |v|^2/(4r) + sum eps_i (f_i - f_*) + eps_N |g_0|^2 / 2`.
pub fn dual_identity_residual(cert: &Certificate, data: &TrajectoryData) -> Result<DualIdentityCheck> {
    require_horizon(cert, data)?;
    let weights = assemble_weights(cert)?;
    let n = cert.n();
    let prec = cert.params.precision();

    let mut terms = Vec::new();
    for (from, to, w) in weights.entries() {
        terms.push(w * slack(from, to, data)?);
    }
    let mut lhs = Scalar::zero(prec);
    for t in &terms {
        lhs += t;
    }

    let v = v_vector(cert, data);
    let z = sub(&data.x0, &data.xstar);
    let mut rhs_terms = vec![
        &data.fstar - &data.values[n],
        dot(&v, &z),
        -(dot(&v, &v) / cert.params.rate.mul_pow2(2)),
        (&cert.residuals[n] * dot(&data.gradients[0], &data.gradients[0])).mul_pow2(-1),
    ];
    for i in 0..n {
        rhs_terms.push(&cert.residuals[i] * (&data.values[i] - &data.fstar));
    }
    let mut rhs = Scalar::zero(prec);
    for t in &rhs_terms {
        rhs += t;
    }
    terms.extend(rhs_terms);
    let scale = max_abs(prec, &terms).max(Scalar::one(prec).mul_pow2(-(prec as i32 / 2)));
    Ok(DualIdentityCheck {
        residual: ScaledResidual::new(&lhs - &rhs, scale),
        weighted_slack: lhs,
        rhs,
    })
}

/// Outcome of the rate bound on one convex instance.
#[derive(Clone, Debug, PartialEq)]
pub struct RateVerdict {
    /// `f_N - f_*`.
    pub gap: Scalar,
    /// `r |x_0 - x_*|^2`.
    pub bound: Scalar,
    /// `sum lambda Q`, nonnegative on convex data.
    pub weighted_slack: Scalar,
    /// `r |z|^2 - (<v, z> - |v|^2/(4r))`, nonnegative by completing the square.
    pub square_slack: Scalar,
    pub holds: bool,
}

/// `f_N - f_* <= r |x_0 - x_*|^2 + 2^-t`.
pub fn rate_bound(cert: &Certificate, data: &TrajectoryData, cfg: &PrecisionConfig) -> Result<RateVerdict> {
    let identity = dual_identity_residual(cert, data)?;
    let n = cert.n();
    let r = &cert.params.rate;
    let z = sub(&data.x0, &data.xstar);
    let zz = dot(&z, &z);
    let v = v_vector(cert, data);
    let bound = r * &zz;
    let linear = dot(&v, &z) - dot(&v, &v) / r.mul_pow2(2);
    let square_slack = &bound - linear;
    let gap = &data.values[n] - &data.fstar;
    let tol = cfg.tolerance();
    let holds = gap <= &bound + &tol
        && identity.weighted_slack >= -(&tol * &identity.residual.scale)
        && square_slack >= -(&tol * bound.clone().max(Scalar::one(cfg.precision_bits())));
    Ok(RateVerdict {
        gap,
        bound,
        weighted_slack: identity.weighted_slack,
        square_slack,
        holds,
    })
}

/// Coefficients of `D = sum lambda Q - rhs` in the formal variables
/// `f_i - f_*`, `y_i = <g_i, x_0 - x_*>` and `G_pq = <g_p, g_q>`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientLedger {
    pub n: usize,
    /// `[f_i - f_*] D`, `i = 0..N`.
    pub f_coeffs: Vec<Scalar>,
    /// Total `f_*` coefficient; zero because every slack is a difference.
    pub f_star: Scalar,
    /// `[y_i] D`.
    pub y_coeffs: Vec<Scalar>,
    /// Forward adjacent rows `[G_{i,i+1}] D`, `i = 0..N-1`, from Systems A.
    pub gram_fwd: Vec<Scalar>,
    /// Reversed adjacent rows `[G_{i+1,i}] D`, `i = 0..N-2`, from System B.
    pub gram_rev: Vec<Scalar>,
    /// `[G_kk] D`.
    pub gram_diag: Vec<Scalar>,
    /// Symmetrized adjacent coefficient `[G_{i,i+1}] + [G_{i+1,i}]` of the expansion.
    pub gram_adjacent: Vec<Scalar>,
    /// Symmetrized nonadjacent coefficients, keyed by `(p, q)` with `p + 2 <= q`.
    pub gram_far: BTreeMap<(usize, usize), Scalar>,
    /// Directed adjacent coefficients `([G_{i,i+1}], [G_{i+1,i}])` of the raw expansion.
    pub directed_adjacent: Vec<(Scalar, Scalar)>,
    /// Every slot touched by a weight lies in exactly one family.
    pub exhaustive: bool,
}

impl CoefficientLedger {
    /// Largest entry over all six families.
    pub fn max_entry(&self) -> Scalar {
        let prec = self.f_star.precision();
        let mut all: Vec<&Scalar> = Vec::new();
        all.extend(&self.f_coeffs);
        all.push(&self.f_star);
        all.extend(&self.y_coeffs);
        all.extend(&self.gram_fwd);
        all.extend(&self.gram_rev);
        all.extend(&self.gram_diag);
        all.extend(&self.gram_adjacent);
        all.extend(self.gram_far.values());
        max_abs(prec, all)
    }

    /// `max entry <= 2^-exponent R`.
    pub fn passes(&self, big_r: &Scalar, exponent: u32) -> bool {
        ScaledResidual::new(self.max_entry(), big_r.clone()).passes(exponent)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Slot {
    F(Index),
    Y(usize),
    G(usize, usize),
}

struct Accumulator {
    prec: u32,
    slots: BTreeMap<Slot, Scalar>,
}

impl Accumulator {
    fn add(&mut self, slot: Slot, value: Scalar) {
        let entry = self.slots.entry(slot).or_insert_with(|| Scalar::zero(self.prec));
        *entry += value;
    }

    fn get(&self, slot: Slot) -> Scalar {
        self.slots.get(&slot).cloned().unwrap_or_else(|| Scalar::zero(self.prec))
    }

    /// `w Q_ij` expanded with `x_k = x_0 - alpha H_k`, `H_k = g_0 + ... + g_{k-1}`.
    fn slack_term(&mut self, from: Index, to: Index, w: &Scalar, alpha: &Scalar) {
        let half = w.mul_pow2(-1);
        self.add(Slot::F(from), w.clone());
        self.add(Slot::F(to), -w);
        match (from, to) {
            (Index::Star, Index::Point(j)) => {
                // -<g_j, x_* - x_j> = <g_j, z> - alpha <g_j, H_j>
                self.add(Slot::Y(j), w.clone());
                for l in 0..j {
                    self.add(Slot::G(j, l), -(w * alpha));
                }
                self.add(Slot::G(j, j), -half);
            }
            (Index::Point(i), Index::Point(j)) => {
                // -<g_j, x_i - x_j> = alpha <g_j, H_i - H_j>
                let wa = w * alpha;
                if i > j {
                    for l in j..i {
                        self.add(Slot::G(j, l), wa.clone());
                    }
                } else {
                    for l in i..j {
                        self.add(Slot::G(j, l), -&wa);
                    }
                }
                self.add(Slot::G(i, i), -&half);
                self.add(Slot::G(j, j), -&half);
                self.add(Slot::G(i, j), half.clone());
                self.add(Slot::G(j, i), half);
            }
            _ => unreachable!("weights never point into the minimizer"),
        }
    }
}

/// Prefix `1 + d_0 + ... + d_{i-1}`.
fn prefix(cert: &Certificate, i: usize) -> Scalar {
    let mut acc = Scalar::one(cert.params.precision());
    for x in &cert.d[..i] {
        acc += x;
    }
    acc
}

fn tail_c(cert: &Certificate, from: usize) -> Scalar {
    let mut acc = Scalar::zero(cert.params.precision());
    for x in cert.c.iter().skip(from) {
        acc += x;
    }
    acc
}

/// Forward rows `[G_{i,i+1}] D`, `i = 0..N-1`.
fn forward_rows(cert: &Certificate) -> Vec<Scalar> {
    let n = cert.n();
    let (r, alpha) = (&cert.params.big_r, &cert.params.alpha);
    let (a, b, c, d) = (&cert.a, &cert.b, &cert.c, &cert.d);
    let one_plus_alpha = alpha + 1;
    let two_alpha_minus_one = alpha * 2 - 1;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n - 2 {
        rows.push(
            alpha * &a[i] - c[i + 1].square() / r - &c[i] * &c[i + 1] / r
                + &a[i + 1]
                + &one_plus_alpha * &c[i + 1] * prefix(cert, i)
                + &d[i + 1] * tail_c(cert, i + 3)
                - &two_alpha_minus_one * &b[i + 1],
        );
    }
    rows.push(
        alpha * &a[n - 2] - c[n - 1].square() / r - &c[n - 2] * &c[n - 1] / r
            + &a[n - 1]
            + &one_plus_alpha * &c[n - 1] * prefix(cert, n - 2),
    );
    rows.push(&a[n - 1] + &c[n] * prefix(cert, n - 1) - 1);
    rows
}

/// Reversed rows `[G_{i+1,i}] D`, `i = 0..N-2`.
fn reverse_rows(cert: &Certificate) -> Vec<Scalar> {
    let n = cert.n();
    let (r, alpha, rho) = (&cert.params.big_r, &cert.params.alpha, &cert.params.rho);
    let (a, b, c, d) = (&cert.a, &cert.b, &cert.c, &cert.d);
    let two_alpha_minus_one = alpha * 2 - 1;
    let mut rows = Vec::with_capacity(n - 1);
    for i in 0..n - 2 {
        rows.push(
            alpha * &b[i] - rho * c[i + 1].square() / r + &c[i] * &c[i + 1] / r + rho * &a[i + 1]
                - &c[i + 1] * prefix(cert, i)
                + rho * &d[i + 1] * tail_c(cert, i + 3)
                - rho * &two_alpha_minus_one * &b[i + 1],
        );
    }
    rows.push(
        alpha * &b[n - 2] - rho * c[n - 1].square() / r + &c[n - 2] * &c[n - 1] / r
            + rho * &a[n - 1]
            - &c[n - 1] * prefix(cert, n - 2),
    );
    rows
}

/// Symbolic slot accumulation of `D`, then the six coefficient families.
pub fn coefficient_ledger(cert: &Certificate) -> Result<CoefficientLedger> {
    let weights = assemble_weights(cert)?;
    let n = cert.n();
    let prec = cert.params.precision();
    let alpha = &cert.params.alpha;
    let mut acc = Accumulator { prec, slots: BTreeMap::new() };
    for (from, to, w) in weights.entries() {
        acc.slack_term(from, to, w, alpha);
    }
    let touched: BTreeSet<Slot> = acc.slots.keys().copied().collect();

    // subtract the right-hand side
    acc.add(Slot::F(Index::Star), -Scalar::one(prec));
    acc.add(Slot::F(Index::Point(n)), Scalar::one(prec));
    let two_r = cert.params.big_r.mul_pow2(1);
    for p in 0..=n {
        acc.add(Slot::Y(p), -&cert.c[p]);
        for q in 0..=n {
            acc.add(Slot::G(p, q), &cert.c[p] * &cert.c[q] / &two_r);
        }
    }
    for i in 0..n {
        acc.add(Slot::F(Index::Point(i)), -&cert.residuals[i]);
        acc.add(Slot::F(Index::Star), cert.residuals[i].clone());
    }
    acc.add(Slot::G(0, 0), -cert.residuals[n].mul_pow2(-1));

    let f_coeffs: Vec<Scalar> = (0..=n).map(|i| acc.get(Slot::F(Index::Point(i)))).collect();
    let y_coeffs: Vec<Scalar> = (0..=n).map(|i| acc.get(Slot::Y(i))).collect();
    let gram_diag: Vec<Scalar> = (0..=n).map(|k| acc.get(Slot::G(k, k))).collect();
    let directed_adjacent: Vec<(Scalar, Scalar)> = (0..n)
        .map(|i| (acc.get(Slot::G(i, i + 1)), acc.get(Slot::G(i + 1, i))))
        .collect();
    let gram_adjacent = directed_adjacent.iter().map(|(x, y)| x + y).collect();
    let mut gram_far = BTreeMap::new();
    for p in 0..=n {
        for q in p + 2..=n {
            gram_far.insert((p, q), acc.get(Slot::G(p, q)) + acc.get(Slot::G(q, p)));
        }
    }

    let mut covered: BTreeSet<Slot> = BTreeSet::new();
    for i in 0..=n {
        covered.insert(Slot::F(Index::Point(i)));
        covered.insert(Slot::Y(i));
        covered.insert(Slot::G(i, i));
    }
    covered.insert(Slot::F(Index::Star));
    for i in 0..n {
        covered.insert(Slot::G(i, i + 1));
        covered.insert(Slot::G(i + 1, i));
    }
    for &(p, q) in gram_far.keys() {
        covered.insert(Slot::G(p, q));
        covered.insert(Slot::G(q, p));
    }
    let exhaustive = touched.is_subset(&covered) && acc.slots.keys().all(|s| covered.contains(s));

    Ok(CoefficientLedger {
        n,
        f_coeffs,
        f_star: acc.get(Slot::F(Index::Star)),
        y_coeffs,
        gram_fwd: forward_rows(cert),
        gram_rev: reverse_rows(cert),
        gram_diag,
        gram_adjacent,
        gram_far,
        directed_adjacent,
        exhaustive,
    })
}

/// Seeded trajectory with gradients, values, `x_0` and `x_*` uniform in `[-1, 1]`.
pub fn random_trajectory(cert: &Certificate, dim: usize, seed: u64) -> Result<TrajectoryData> {
    if dim == 0 {
        return Err(Error::InvalidArgument("trajectory dimension must be positive".into()));
    }
    let prec = cert.params.precision();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new_inclusive(-1.0f64, 1.0).expect("valid range");
    let mut draw = |k: usize| -> Result<Vec<Scalar>> {
        (0..k).map(|_| Scalar::from_f64(prec, unit.sample(&mut rng))).collect()
    };
    let n = cert.n();
    let x0 = draw(dim)?;
    let xstar = draw(dim)?;
    let gradients = (0..=n).map(|_| draw(dim)).collect::<Result<Vec<_>>>()?;
    let values = draw(n + 1)?;
    let fstar = draw(1)?.remove(0);
    TrajectoryData::from_gradients(x0, xstar, gradients, values, fstar, cert.params.alpha.clone())
}
