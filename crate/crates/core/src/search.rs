//! Constrained search for the pure, ensemble and Hohenberg-Kohn functionals.
//!
//! Every start minimizes a quadratic-penalty objective built from Rayleigh
//! quotients with L-BFGS under a growing penalty, then polishes the result with
//! Newton steps on the first-order optimality system. Abelian theories are
//! searched in the weight basis restricted to the smallest face containing the
//! target density, with starts drawn from the classical fiber.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::abelian::{self, WeightDecomposition};
use crate::error::{Error, Result};
use crate::geometry::Polytope;
use crate::linalg::{self, c, CMatrix, CVector, C64};
use crate::theory::{DensityVector, FunctionalTheoryModel, HermitianOperator, QuantumState};

const ABELIAN_TOL: f64 = 1e-9;
const FACE_TOL: f64 = 1e-9;
const NEAR_FACET_FRACTION: f64 = 1e-2;
const MAX_NEAR_FACET_STARTS: usize = 256;
const PENALTY_ROUNDS: usize = 6;
const SADDLE_ESCAPES: usize = 4;
const SADDLE_TOL: f64 = 1e-8;
const SADDLE_STEP: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub multistarts: usize,
    pub max_iters: usize,
    pub constraint_tol: f64,
    pub value_tol: f64,
    pub penalty_growth: f64,
    pub seed: u64,
    /// Extra starting vectors on the full Hilbert space, tried before random starts.
    pub initial_states: Vec<CVector>,
    /// Potential directions `s` for which `⟨ρ,s⟩ = λ_min(ι(s))` restricts the search
    /// to the corresponding eigenspace.
    pub face_hints: Vec<Vec<f64>>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            multistarts: 32,
            max_iters: 500,
            constraint_tol: 1e-8,
            value_tol: 1e-9,
            penalty_growth: 10.0,
            seed: 0,
            initial_states: vec![],
            face_hints: vec![],
        }
    }
}

impl SearchOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.multistarts == 0 || self.max_iters == 0 || self.constraint_tol <= 0.0 || self.value_tol <= 0.0 {
            return Err(Error::InvalidArgument("search options must be positive".into()));
        }
        if self.constraint_tol >= 1e-3 {
            return Err(Error::InvalidArgument("constraint tolerance must be below 1e-3".into()));
        }
        if self.penalty_growth <= 1.0 {
            return Err(Error::InvalidArgument("penalty growth must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub value: f64,
    pub state: QuantumState,
    pub constraint_residual: f64,
    pub starts_converged: usize,
    pub best_start_index: usize,
}

/// Search problem on a subspace: minimize `⟨W⟩` subject to `⟨C_j⟩ = σ_j`.
struct Problem {
    w: CMatrix,
    cons: Vec<CMatrix>,
    targets: Vec<f64>,
}

impl Problem {
    fn dim(&self) -> usize {
        self.w.nrows()
    }

    fn constraint_residual(&self, c: &CVector) -> f64 {
        let nrm = c.norm_squared();
        self.cons
            .iter()
            .zip(&self.targets)
            .map(|(op, t)| (linalg::expectation(op, c).re / nrm - t).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn value(&self, c: &CVector) -> f64 {
        linalg::expectation(&self.w, c).re / c.norm_squared()
    }

    fn penalty(&self, x: &DVector<f64>, mu: f64) -> (f64, DVector<f64>) {
        let cv = linalg::from_real(x);
        let nrm = cv.norm_squared().max(1e-300);
        let rayleigh = |op: &CMatrix| {
            let ac = op * &cv;
            let q = cv.dotc(&ac).re / nrm;
            let g = (ac - &cv * c(q, 0.0)) * c(2.0 / nrm, 0.0);
            (q, g)
        };
        let (mut f, mut g) = rayleigh(&self.w);
        for (op, &t) in self.cons.iter().zip(&self.targets) {
            let (q, gq) = rayleigh(op);
            f += mu * (q - t).powi(2);
            g += gq * c(2.0 * mu * (q - t), 0.0);
        }
        (f, linalg::to_real(&g))
    }
}

/// Limited-memory BFGS with Armijo backtracking.
pub(crate) fn lbfgs<F>(mut f: F, x0: DVector<f64>, max_iters: usize, gtol: f64) -> DVector<f64>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    const MEMORY: usize = 8;
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut hist: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut stalls = 0;
    for _ in 0..max_iters {
        if g.norm() <= gtol * (1.0 + fx.abs()) {
            break;
        }
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, r) in hist.iter().rev() {
            let a = r * s.dot(&q);
            q -= y * a;
            alphas.push(a);
        }
        let gamma = match hist.back() {
            Some((s, y, _)) => s.dot(y) / y.dot(y),
            None => 1.0 / g.norm().max(1.0),
        };
        let mut r = q * gamma;
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * y.dot(&r);
            r += s * (a - b);
        }
        let mut d = -r;
        let mut dg = d.dot(&g);
        if dg >= 0.0 {
            hist.clear();
            d = -g.clone() / g.norm().max(1.0);
            dg = d.dot(&g);
        }
        let mut step = 1.0;
        let (xn, fnew, gn) = loop {
            let xn = &x + &d * step;
            let (fv, gv) = f(&xn);
            if fv.is_finite() && fv <= fx + 1e-4 * step * dg {
                break (xn, fv, gv);
            }
            step *= 0.5;
            if step < 1e-20 {
                return x;
            }
        };
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-14 * s.norm() * y.norm() {
            if hist.len() == MEMORY {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        stalls = if fx - fnew <= 1e-15 * (1.0 + fx.abs()) { stalls + 1 } else { 0 };
        x = xn;
        fx = fnew;
        g = gn;
        if stalls >= 3 {
            break;
        }
    }
    x
}

fn complex_block(h: &CMatrix) -> DMatrix<f64> {
    let n = h.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Newton iteration on `(W + Σ v_j C_j − λ)c = 0`, `⟨C_j⟩ = σ_j`, `‖c‖ = 1`
/// with minimum-norm steps.
fn kkt_polish(p: &Problem, c0: &CVector) -> CVector {
    let n = p.dim();
    let r = p.cons.len();
    let mut cv = c0.normalize();

    let (mut v, mut lam) = multipliers(p, &cv);

    let residual = |cv: &CVector, v: &[f64], lam: f64| -> DVector<f64> {
        let mut h = p.w.clone() - CMatrix::identity(n, n) * c(lam, 0.0);
        for (op, &vj) in p.cons.iter().zip(v) {
            h += op * c(vj, 0.0);
        }
        let r1 = linalg::to_real(&(h * cv));
        let mut out = DVector::zeros(2 * n + r + 1);
        out.rows_mut(0, 2 * n).copy_from(&r1);
        for (j, op) in p.cons.iter().enumerate() {
            out[2 * n + j] = linalg::expectation(op, cv).re - p.targets[j];
        }
        out[2 * n + r] = cv.norm_squared() - 1.0;
        out
    };

    let mut res = residual(&cv, &v, lam);
    for _ in 0..60 {
        let rn = res.norm();
        if rn < 1e-15 {
            break;
        }
        let mut h = p.w.clone() - CMatrix::identity(n, n) * c(lam, 0.0);
        for (op, &vj) in p.cons.iter().zip(&v) {
            h += op * c(vj, 0.0);
        }
        let m = 2 * n + r + 1;
        let mut jac = DMatrix::zeros(m, m);
        jac.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&complex_block(&h));
        for (j, op) in p.cons.iter().enumerate() {
            let oc = linalg::to_real(&(op * &cv));
            jac.view_mut((0, 2 * n + j), (2 * n, 1)).copy_from(&oc);
            jac.view_mut((2 * n + j, 0), (1, 2 * n)).copy_from(&(oc.transpose() * 2.0));
        }
        let xr = linalg::to_real(&cv);
        jac.view_mut((0, 2 * n + r), (2 * n, 1)).copy_from(&(-&xr));
        jac.view_mut((2 * n + r, 0), (1, 2 * n)).copy_from(&(xr.transpose() * 2.0));

        let step = -linalg::pinv(&jac, 1e-12) * &res;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let xn = &xr + step.rows(0, 2 * n) * alpha;
            let cn = linalg::from_real(&xn);
            let vn: Vec<f64> = (0..r).map(|j| v[j] + alpha * step[2 * n + j]).collect();
            let ln = lam + alpha * step[2 * n + r];
            let rn_new = residual(&cn, &vn, ln);
            if rn_new.norm() < rn * (1.0 - 1e-4 * alpha) {
                cv = cn;
                v = vn;
                lam = ln;
                res = rn_new;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    cv.normalize()
}

/// Gauss-Newton projection onto the constraint set alone.
fn project_onto_constraints(p: &Problem, c0: &CVector) -> CVector {
    let n = p.dim();
    let r = p.cons.len();
    let mut cv = c0.normalize();
    let res_of = |cv: &CVector| {
        let mut out = DVector::zeros(r + 1);
        for (j, op) in p.cons.iter().enumerate() {
            out[j] = linalg::expectation(op, cv).re - p.targets[j];
        }
        out[r] = cv.norm_squared() - 1.0;
        out
    };
    let mut res = res_of(&cv);
    for _ in 0..50 {
        let rn = res.norm();
        if rn < 1e-15 {
            break;
        }
        let mut jac = DMatrix::zeros(r + 1, 2 * n);
        for (j, op) in p.cons.iter().enumerate() {
            jac.row_mut(j).copy_from(&(linalg::to_real(&(op * &cv)).transpose() * 2.0));
        }
        let xr = linalg::to_real(&cv);
        jac.row_mut(r).copy_from(&(xr.transpose() * 2.0));
        let step = -linalg::pinv(&jac, 1e-12) * &res;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cn = linalg::from_real(&(&xr + &step * alpha));
            let rnew = res_of(&cn);
            if rnew.norm() < rn {
                cv = cn;
                res = rnew;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    cv.normalize()
}

struct LocalOutcome {
    value: f64,
    vector: CVector,
}

fn descend(p: &Problem, start: &CVector, opts: &SearchOptions) -> LocalOutcome {
    let w_scale = linalg::max_abs(&p.w).max(1.0);
    let c_scale = p.cons.iter().map(linalg::max_abs).fold(1.0, f64::max);
    let mut mu = 10.0 * w_scale / (c_scale * c_scale);
    let mut x = linalg::to_real(&start.normalize());
    for _ in 0..PENALTY_ROUNDS {
        x = lbfgs(|y| p.penalty(y, mu), x, opts.max_iters, 1e-11);
        let nrm = x.norm();
        if nrm > 0.0 {
            x /= nrm;
        }
        if p.constraint_residual(&linalg::from_real(&x)) < 1e-7 * c_scale {
            break;
        }
        mu *= opts.penalty_growth;
    }
    let rough = linalg::from_real(&x).normalize();
    let polished = kkt_polish(p, &rough);
    let mut best = if p.constraint_residual(&polished) <= p.constraint_residual(&rough) { polished } else { rough };
    if p.constraint_residual(&best) > opts.constraint_tol * 1e-2 {
        let projected = project_onto_constraints(p, &best);
        if p.constraint_residual(&projected) < p.constraint_residual(&best) {
            best = projected;
        }
    }
    LocalOutcome { value: p.value(&best), vector: best }
}

/// Multipliers `(v, λ)` of the stationarity condition at `c`.
fn multipliers(p: &Problem, cv: &CVector) -> (Vec<f64>, f64) {
    let n = p.dim();
    let r = p.cons.len();
    let lhs = DMatrix::from_fn(2 * n, r + 1, |i, j| {
        let col = if j < r { &p.cons[j] * cv } else { -cv.clone() };
        if i < n {
            col[i].re
        } else {
            col[i - n].im
        }
    });
    let mult = linalg::lstsq(&lhs, &-linalg::to_real(&(&p.w * cv)), 1e-12);
    (mult.iter().take(r).copied().collect(), mult[r])
}

/// Most negative curvature direction of the Lagrangian on the constraint manifold.
fn negative_curvature(p: &Problem, cv: &CVector) -> Option<(f64, CVector)> {
    let n = p.dim();
    let cv = cv.normalize();
    let (v, lam) = multipliers(p, &cv);
    let mut h = p.w.clone() - CMatrix::identity(n, n) * c(lam, 0.0);
    for (op, &vj) in p.cons.iter().zip(&v) {
        h += op * c(vj, 0.0);
    }
    let mut rows: Vec<DVector<f64>> = p.cons.iter().map(|op| linalg::to_real(&(op * &cv))).collect();
    rows.push(linalg::to_real(&cv));
    rows.push(linalg::to_real(&(&cv * linalg::I)));
    let jac = DMatrix::from_fn(rows.len(), 2 * n, |i, j| rows[i][j]);
    let tangent = linalg::null_space(&jac, 1e-9);
    if tangent.ncols() == 0 {
        return None;
    }
    let reduced = tangent.transpose() * complex_block(&h) * &tangent;
    let (vals, vecs) = linalg::eigh_real(&reduced);
    let (k, &low) = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    Some((low, linalg::from_real(&(&tangent * vecs.column(k)))))
}

/// Penalty descent followed by escapes from saddle points of the constrained problem.
fn local_search(p: &Problem, start: &CVector, opts: &SearchOptions) -> LocalOutcome {
    let scale = linalg::max_abs(&p.w).max(1.0);
    let mut best = descend(p, start, opts);
    for _ in 0..SADDLE_ESCAPES {
        if p.constraint_residual(&best.vector) > opts.constraint_tol {
            break;
        }
        let Some((low, dir)) = negative_curvature(p, &best.vector) else { break };
        if low >= -SADDLE_TOL * scale {
            break;
        }
        let base = best.vector.normalize();
        let candidates = [1.0, -1.0].map(|sign| descend(p, &(&base + &dir * c(sign * SADDLE_STEP, 0.0)), opts));
        let Some(next) = candidates
            .into_iter()
            .filter(|o| p.constraint_residual(&o.vector) <= opts.constraint_tol && o.value < best.value)
            .min_by(|a, b| a.value.total_cmp(&b.value))
        else {
            break;
        };
        best = next;
    }
    best
}

/// Orthonormal basis of directions in `V` not fixed by the subspace, plus a
/// consistency check of `ρ` against the fixed ones.
fn reduce_constraints(ops: &[CMatrix], rho: &[f64]) -> Result<(Vec<CMatrix>, Vec<f64>)> {
    let m = ops.len();
    if m == 0 {
        return Ok((vec![], vec![]));
    }
    let k = ops[0].nrows();
    let mut flat = DMatrix::zeros(2 * k * k, m + 1);
    for (a, op) in ops.iter().enumerate() {
        flat.set_column(a, &linalg::flatten_complex(op));
    }
    flat.set_column(m, &linalg::flatten_complex(&CMatrix::identity(k, k)));
    let ker = linalg::null_space(&flat, 1e-10);
    let scale =
        ops.iter().map(linalg::max_abs).fold(1.0, f64::max) * (1.0 + rho.iter().map(|x| x.abs()).fold(0.0, f64::max));
    for col in ker.column_iter() {
        let lhs: f64 = (0..m).map(|a| col[a] * rho[a]).sum();
        if (lhs + col[m]).abs() > 1e-8 * scale {
            return Err(Error::NotRepresentable((lhs + col[m]).abs()));
        }
    }
    let fixed = ker.rows(0, m).into_owned();
    let fixed = linalg::range_space(&fixed, 1e-10);
    let free = if fixed.ncols() == 0 { DMatrix::identity(m, m) } else { linalg::null_space(&fixed.transpose(), 1e-10) };
    let mut cons = Vec::with_capacity(free.ncols());
    let mut targets = Vec::with_capacity(free.ncols());
    for col in free.column_iter() {
        let mut op = CMatrix::zeros(k, k);
        for a in 0..m {
            op += &ops[a] * c(col[a], 0.0);
        }
        cons.push(op);
        targets.push((0..m).map(|a| col[a] * rho[a]).sum());
    }
    Ok((cons, targets))
}

type Starter = Box<dyn Fn(&mut ChaCha8Rng) -> CVector + Send + Sync>;

struct Setup {
    /// Isometry from the search subspace into the full Hilbert space.
    embed: CMatrix,
    starter: Starter,
    near_facet: bool,
}

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> CVector {
    CVector::from_fn(n, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal))).normalize()
}

fn abelian_setup(theory: &FunctionalTheoryModel, rho: &[f64]) -> Result<Setup> {
    let wd = abelian::weight_decomposition(theory)?;
    let poly = abelian::representable_polytope(&wd)?;
    let scale = 1.0 + rho.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let viol = poly.violation(rho);
    if viol > 1e-9 * scale {
        return Err(Error::NotRepresentable(viol));
    }
    let tight: Vec<_> = poly.inequalities.iter().filter(|f| f.slack(rho).abs() <= FACE_TOL * scale).collect();
    let face: Vec<usize> = (0..wd.num_weights())
        .filter(|&w| tight.iter().all(|f| f.slack(&wd.weights[w]).abs() <= FACE_TOL * scale))
        .collect();
    let points: Vec<Vec<f64>> = face.iter().map(|&w| wd.weights[w].components().to_vec()).collect();
    let face_poly = Polytope::from_points(&points)?;
    let diameter = points
        .iter()
        .flat_map(|p| points.iter().map(move |q| p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()))
        .fold(0.0, f64::max);
    let near_facet = face_poly.dim() > 0 && face_poly.boundary_distance(rho) < NEAR_FACET_FRACTION * diameter;

    let cols: Vec<(usize, usize)> =
        face.iter().enumerate().flat_map(|(fi, &w)| wd.columns_of(w).into_iter().map(move |col| (fi, col))).collect();
    let mut embed = CMatrix::zeros(wd.dim(), cols.len());
    for (j, &(_, col)) in cols.iter().enumerate() {
        embed.set_column(j, &wd.basis.column(col));
    }
    let owner: Vec<usize> = cols.iter().map(|&(fi, _)| fi).collect();
    let target = rho.to_vec();
    let starter: Starter = Box::new(move |rng: &mut ChaCha8Rng| {
        let lam = abelian::fiber_barycentric(&points, &target, &mut |n| {
            (0..n).map(|_| rng.sample::<f64, _>(Exp1) + 1e-3).collect()
        });
        let lam = match lam {
            Ok(l) => l,
            Err(_) => vec![1.0 / points.len() as f64; points.len()],
        };
        let mut split: Vec<f64> = owner.iter().map(|_| rng.sample::<f64, _>(Exp1) + 1e-3).collect();
        let mut totals = vec![0.0; points.len()];
        for (s, &o) in split.iter().zip(&owner) {
            totals[o] += s;
        }
        for (s, &o) in split.iter_mut().zip(&owner) {
            *s = lam[o].max(0.0) * *s / totals[o];
        }
        let v = CVector::from_iterator(
            split.len(),
            split.iter().map(|&y| c(0.0, rng.random::<f64>() * std::f64::consts::TAU).exp() * y.sqrt()),
        );
        if v.norm() > 0.0 {
            v.normalize()
        } else {
            random_vector(split.len(), rng)
        }
    });
    Ok(Setup { embed, starter, near_facet })
}

fn general_setup(theory: &FunctionalTheoryModel, rho: &[f64], hints: &[Vec<f64>]) -> Result<Setup> {
    let n = theory.hilbert_dim();
    let m = theory.basis_size();
    let mut directions: Vec<Vec<f64>> = Vec::new();
    for a in 0..m {
        for sign in [1.0, -1.0] {
            let mut s = vec![0.0; m];
            s[a] = sign;
            directions.push(s);
        }
    }
    for h in hints {
        if h.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: h.len() });
        }
        directions.push(h.clone());
    }
    let mut embed = CMatrix::identity(n, n);
    let scale = 1.0 + rho.iter().map(|x| x.abs()).fold(0.0, f64::max);
    loop {
        let mut changed = false;
        for s in &directions {
            let full = theory.apply_potential(s)?;
            let op = full.compress(&embed);
            let (vals, vecs) = op.eigh()?;
            let pairing: f64 = s.iter().zip(rho).map(|(a, b)| a * b).sum();
            let spread = (vals[vals.len() - 1] - vals[0]).max(1.0);
            if pairing < vals[0] - 1e-9 * spread * scale {
                return Err(Error::NotRepresentable(vals[0] - pairing));
            }
            if pairing - vals[0] <= FACE_TOL * spread * scale {
                let k = (0..vals.len()).take_while(|&i| vals[i] - vals[0] <= 1e-9 * spread).count();
                if k < vals.len() {
                    embed = &embed * vecs.columns(0, k);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let k = embed.ncols();
    Ok(Setup { embed, starter: Box::new(move |rng| random_vector(k, rng)), near_facet: false })
}

fn start_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// `F_p(ρ)`: minimum of `⟨Ψ|W|Ψ⟩` over unit vectors with density `ρ`.
pub fn pure_functional(
    theory: &FunctionalTheoryModel,
    rho: &DensityVector,
    opts: &SearchOptions,
) -> Result<SearchResult> {
    opts.validate()?;
    if rho.len() != theory.basis_size() {
        return Err(Error::DimensionMismatch { expected: theory.basis_size(), found: rho.len() });
    }
    let setup = if theory.max_commutator() <= ABELIAN_TOL {
        abelian_setup(theory, rho)?
    } else {
        general_setup(theory, rho, &opts.face_hints)?
    };
    let embed = &setup.embed;
    let ops: Vec<CMatrix> = theory.potential_basis().iter().map(|op| op.compress(embed).into_matrix()).collect();
    let (cons, targets) = reduce_constraints(&ops, rho)?;
    let problem = Problem { w: theory.interaction().compress(embed).into_matrix(), cons, targets };
    let k = problem.dim();

    let finish = |vector: CVector, index: usize, converged: usize| -> Result<SearchResult> {
        let full = (embed * vector).normalize();
        let density = theory.density_of_vector(&full);
        let residual = (density - rho.to_dvector()).norm();
        Ok(SearchResult {
            value: theory.interaction().expectation(&full),
            state: QuantumState::pure(full)?,
            constraint_residual: residual,
            starts_converged: converged,
            best_start_index: index,
        })
    };

    if problem.cons.is_empty() {
        let (_, vecs) = linalg::eigh(&problem.w)?;
        return finish(vecs.column(0).into_owned(), 0, 1);
    }

    let seeds: Vec<CVector> = opts
        .initial_states
        .iter()
        .filter(|s| s.len() == theory.hilbert_dim())
        .map(|s| embed.adjoint() * s)
        .filter(|s| s.norm() > 1e-12)
        .collect();
    let random_starts = if setup.near_facet {
        (opts.multistarts * 8).min(MAX_NEAR_FACET_STARTS).max(opts.multistarts)
    } else {
        opts.multistarts
    };
    let total = seeds.len() + random_starts;

    let outcomes: Vec<(f64, f64, CVector)> = (0..total)
        .into_par_iter()
        .map(|i| {
            let start = if i < seeds.len() {
                seeds[i].clone()
            } else {
                let mut rng = start_rng(opts.seed, i);
                (setup.starter)(&mut rng)
            };
            let start = if start.len() == k { start } else { random_vector(k, &mut start_rng(opts.seed, i)) };
            let out = local_search(&problem, &start, opts);
            let full = (embed * &out.vector).normalize();
            let residual = (theory.density_of_vector(&full) - rho.to_dvector()).norm();
            (out.value, residual, out.vector)
        })
        .collect();

    let converged: Vec<usize> = (0..total).filter(|&i| outcomes[i].1 <= opts.constraint_tol).collect();
    let Some(&best) = converged.iter().min_by(|&&a, &&b| outcomes[a].0.total_cmp(&outcomes[b].0).then(a.cmp(&b)))
    else {
        let best_res = outcomes.iter().map(|o| o.1).fold(f64::INFINITY, f64::min);
        return Err(Error::DidNotConverge(best_res));
    };
    finish(outcomes[best].2.clone(), best, converged.len())
}

/// Partial trace over a `k`-dimensional ancilla of a vector on `ℋ ⊗ ℂ^k`.
fn reduced_density(psi: &CVector, k: usize) -> CMatrix {
    let n = psi.len() / k;
    CMatrix::from_fn(n, n, |i, j| (0..k).map(|a| psi[i * k + a] * psi[j * k + a].conj()).sum::<C64>())
}

/// `F_e(ρ)` as the pure functional of the `k`-convexified theory.
pub fn ensemble_functional(
    theory: &FunctionalTheoryModel,
    rho: &DensityVector,
    opts: &SearchOptions,
    rank_bound: Option<usize>,
) -> Result<SearchResult> {
    let k = rank_bound.unwrap_or(theory.hilbert_dim()).clamp(1, theory.hilbert_dim());
    let lifted = theory.convexify(k)?;
    let res = pure_functional(&lifted, rho, opts)?;
    let psi = res.state.amplitudes().expect("pure search result");
    let gamma = HermitianOperator::new(reduced_density(psi, k))?;
    Ok(SearchResult { state: QuantumState::ensemble(gamma)?, ..res })
}

/// Density and interaction energy of the ground state at `v`.
pub fn hk_functional_sample(theory: &FunctionalTheoryModel, v: &[f64]) -> Result<(DensityVector, f64)> {
    let tol = theory.default_degeneracy_tol(v)?;
    let states = theory.ground_states(v, tol)?;
    let sample = |s: &QuantumState| -> Result<(DensityVector, f64)> {
        let rho = theory.density_of_state(s)?;
        let w = s.expectation(theory.interaction().matrix()).re;
        Ok((rho, w))
    };
    if states.len() > 1 {
        let branches =
            states.iter().map(|s| sample(s).map(|(r, w)| (r.into_inner(), w))).collect::<Result<Vec<_>>>()?;
        return Err(Error::DegenerateGroundState { branches });
    }
    sample(&states[0])
}

/// `|⟨E_i|W|Φ⟩|` for every weight-basis vector with `|⟨E_i|Φ⟩| ≤ 1e-8`.
pub fn no_mixing_residuals(
    theory: &FunctionalTheoryModel,
    wd: &WeightDecomposition,
    result: &SearchResult,
) -> Result<Vec<(usize, f64)>> {
    let phi =
        result.state.amplitudes().ok_or_else(|| Error::InvalidArgument("no-mixing check needs a pure state".into()))?;
    let rho = theory.density_of_vector(phi);
    let poly = abelian::representable_polytope(&wd.clone())?;
    if !poly.in_relative_interior(rho.as_slice(), 1e-9) {
        return Err(Error::NotInRelativeInterior);
    }
    let coeffs = wd.coefficients(phi);
    let w_coeffs = wd.coefficients(&(theory.interaction().matrix() * phi));
    Ok((0..coeffs.len()).filter(|&i| coeffs[i].norm() <= 1e-8).map(|i| (i, w_coeffs[i].norm())).collect())
}

/// Minimizes `Σ ξ̄_α ξ_β a_α a_β W_αβ` over unit phases by coordinate descent
/// from several random starts. Returns the value and the optimal amplitudes.
pub fn minimize_phases(w: &CMatrix, amps: &[f64], starts: usize, seed: u64) -> (f64, CVector) {
    let n = amps.len();
    let active: Vec<usize> = (0..n).filter(|&i| amps[i] > 0.0).collect();
    let eval = |v: &CVector| linalg::expectation(w, v).re;
    let mut best: Option<(f64, CVector)> = None;
    for s in 0..starts.max(1) {
        let mut rng = start_rng(seed, s);
        let mut v = CVector::from_iterator(
            n,
            amps.iter().map(|&a| {
                let phase = if s == 0 { 0.0 } else { rng.random::<f64>() * std::f64::consts::TAU };
                c(0.0, phase).exp() * a
            }),
        );
        let mut value = eval(&v);
        for _ in 0..20000 {
            for &a in &active {
                let z: C64 = active.iter().filter(|&&b| b != a).map(|&b| w[(a, b)] * v[b]).sum();
                if z.norm() > 0.0 {
                    v[a] = -z / z.norm() * amps[a];
                }
            }
            let next = eval(&v);
            let done = value - next <= 1e-16 * (1.0 + value.abs());
            value = next;
            if done {
                break;
            }
        }
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, v));
        }
    }
    best.expect("at least one start")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::qubit_theory;

    #[test]
    fn lbfgs_minimizes_rosenbrock() {
        let f = |x: &DVector<f64>| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = DVector::from_vec(vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]);
            (v, g)
        };
        let x = lbfgs(f, DVector::from_vec(vec![-1.2, 1.0]), 2000, 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn qubit_pure_functional() {
        let t = qubit_theory(1.0);
        let r = pure_functional(&t, &DensityVector::new(vec![0.6]), &SearchOptions::default()).unwrap();
        assert!((r.value + 0.8).abs() < 1e-9);
        assert!(r.constraint_residual < 1e-8);
        let e = ensemble_functional(&t, &DensityVector::new(vec![0.6]), &SearchOptions::default(), None).unwrap();
        assert!((e.value + 0.8).abs() < 1e-9);
    }

    #[test]
    fn vertex_density_fixes_the_state() {
        let t = qubit_theory(1.0);
        let r = pure_functional(&t, &DensityVector::new(vec![1.0]), &SearchOptions::default()).unwrap();
        assert!(r.value.abs() < 1e-12);
        assert!(matches!(
            pure_functional(&t, &DensityVector::new(vec![1.5]), &SearchOptions::default()),
            Err(Error::NotRepresentable(_))
        ));
    }

    #[test]
    fn hk_sample_for_qubit() {
        let t = qubit_theory(1.0);
        let v: f64 = 0.7;
        let (rho, w) = hk_functional_sample(&t, &[v]).unwrap();
        let s = (1.0 + v * v).sqrt();
        assert!((rho[0] + v / s).abs() < 1e-12);
        assert!((w + 1.0 / s).abs() < 1e-12);
        let free = qubit_theory(0.0);
        assert!(matches!(hk_functional_sample(&free, &[0.0]), Err(Error::DegenerateGroundState { .. })));
    }

    #[test]
    fn phase_minimization_of_a_triangle() {
        let w = CMatrix::from_fn(3, 3, |i, j| if i == j { c(0.0, 0.0) } else { c(1.0, 0.0) });
        let a = [0.5f64.sqrt(), 0.3f64.sqrt(), 0.2f64.sqrt()];
        let (v, _) = minimize_phases(&w, &a, 8, 1);
        assert!((v + 1.0).abs() < 1e-10);
    }

    #[test]
    fn results_are_deterministic_across_runs() {
        let t = crate::theory::spin_chain_theory(2, 0.8).unwrap();
        let rho = DensityVector::new(vec![0.3, -0.2]);
        let opts = SearchOptions { multistarts: 8, ..SearchOptions::with_seed(7) };
        let a = pure_functional(&t, &rho, &opts).unwrap();
        let b = pure_functional(&t, &rho, &opts).unwrap();
        assert_eq!(a.best_start_index, b.best_start_index);
        assert!((a.value - b.value).abs() <= 1e-12);
    }
}
