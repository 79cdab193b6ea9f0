//! Repulsion strength `G` of a functional near a facet, `F(ρ*+εη) ≈ F(ρ*) − G√ε`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::abelian::{facet_theory, is_critical_value, weight_decomposition, WeightDecomposition};
use crate::error::{Error, Result};
use crate::geometry::{FacetInequality, Polytope};
use crate::liegroup::FacetData;
use crate::linalg::{self, c, CMatrix, CVector};
use crate::search::{pure_functional, SearchOptions};
use crate::theory::{DensityVector, FunctionalTheoryModel, QuantumState};

const ON_FACET_TOL: f64 = 1e-9;
const GAP_TOL: f64 = 1e-8;
const SPREAD_TOL: f64 = 1e-8;
const PHASE_SAMPLES: usize = 8;

pub const DEFAULT_EPS: [f64; 5] = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2];

/// Facet, base point, inward direction and gauge point, with `⟨η,S⟩ = 1`.
#[derive(Debug, Clone)]
pub struct BoundaryForceQuery {
    pub facet: FacetInequality,
    pub rho_star: DensityVector,
    pub eta: DensityVector,
    pub gamma: DensityVector,
}

impl BoundaryForceQuery {
    pub fn new(
        facet: &FacetInequality,
        rho_star: DensityVector,
        eta: DensityVector,
        gamma: DensityVector,
    ) -> Result<Self> {
        let n = facet.normal.len();
        for v in [&rho_star, &eta, &gamma] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: v.len() });
            }
        }
        let facet = facet.rescaled_for(&eta)?;
        let scale = 1.0 + facet.offset.abs();
        for p in [&rho_star, &gamma] {
            let d = facet.slack(p).abs();
            if d > ON_FACET_TOL * scale {
                return Err(Error::NotOnFacet(d));
            }
        }
        Ok(Self { facet, rho_star, eta, gamma })
    }

    /// Uses `ρ*` itself as the gauge point.
    pub fn at(facet: &FacetInequality, rho_star: DensityVector, eta: DensityVector) -> Result<Self> {
        let gamma = rho_star.clone();
        Self::new(facet, rho_star, eta, gamma)
    }

    pub fn gauge_offset(&self) -> f64 {
        dot(self.facet.normal.as_slice(), &self.gamma)
    }

    /// `ρ* + εη`.
    pub fn displaced(&self, eps: f64) -> DensityVector {
        DensityVector::new(self.rho_star.iter().zip(self.eta.iter()).map(|(r, e)| r + eps * e).collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Contribution {
    pub omega: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct BoundaryForceResult {
    pub g: f64,
    pub contributions: Vec<Contribution>,
    pub minimizer_used: QuantumState,
    /// Optimal `v ∈ i𝔤^∤` in the basis of the facet data; empty when abelian.
    pub optimal_v: Vec<f64>,
    /// `Σ_ω Π_ω(τ(v)+W)Φ/gap_ω`; the first-order response direction.
    pub response: CVector,
    /// `Some(false)` when `ρ*` is a critical value of the facet density map.
    pub regular: Option<bool>,
    /// Largest change of `G` over torus translates of `Φ` that stay minimizers.
    pub phase_spread: f64,
    pub sufficiently_nice: bool,
}

impl BoundaryForceResult {
    pub fn radicand(&self) -> f64 {
        self.contributions.iter().map(|t| t.value).sum()
    }

    /// Normalized first-order state near `ρ* + εη`, a starting point for the search.
    pub fn seed_state(&self, eps: f64) -> Option<CVector> {
        let sigma = self.radicand();
        let phi = self.minimizer_used.amplitudes()?;
        if sigma <= 0.0 {
            return None;
        }
        let v = phi - &self.response * c((eps / sigma).sqrt(), 0.0);
        Some(&v / c(v.norm(), 0.0))
    }
}

/// Off-facet block of the state space with its distance to the facet.
struct Block {
    omega: Vec<f64>,
    proj: CMatrix,
    gap: f64,
}

struct Evaluation {
    radicand: f64,
    x: Vec<f64>,
    values: Vec<f64>,
    response: CVector,
}

fn evaluate(blocks: &[Block], m_ops: &[CMatrix], w: &CMatrix, phi: &CVector) -> Evaluation {
    let n = phi.len();
    let stacked = |op: &CMatrix| {
        let v = op * phi;
        let mut out = CVector::zeros(n * blocks.len());
        for (k, b) in blocks.iter().enumerate() {
            out.rows_mut(k * n, n).copy_from(&(&b.proj * &v / c(b.gap.sqrt(), 0.0)));
        }
        out
    };
    let bvec = stacked(w);
    let x: Vec<f64> = if m_ops.is_empty() {
        vec![]
    } else {
        let cols: Vec<CVector> = m_ops.iter().map(stacked).collect();
        let rows = 2 * bvec.len();
        let a = DMatrix::from_fn(rows, cols.len(), |i, j| {
            let z = cols[j][i / 2];
            if i % 2 == 0 {
                z.re
            } else {
                z.im
            }
        });
        let rhs = DVector::from_fn(rows, |i, _| {
            let z = bvec[i / 2];
            if i % 2 == 0 {
                -z.re
            } else {
                -z.im
            }
        });
        linalg::lstsq(&a, &rhs, 1e-12).iter().copied().collect()
    };
    let total = m_ops.iter().zip(&x).fold(w.clone(), |acc, (m, &xi)| acc + m * c(xi, 0.0));
    let tv = &total * phi;
    let mut response = CVector::zeros(n);
    let values = blocks
        .iter()
        .map(|b| {
            let p = &b.proj * &tv;
            response += &p / c(b.gap, 0.0);
            p.norm_squared() / b.gap
        })
        .collect::<Vec<_>>();
    Evaluation { radicand: values.iter().sum(), x, values, response }
}

fn normalized(phi: &QuantumState) -> Result<CVector> {
    let v = phi.amplitudes().ok_or_else(|| Error::InvalidArgument("boundary force needs pure minimizers".into()))?;
    Ok(v / c(v.norm(), 0.0))
}

/// Best evaluation over the supplied minimizers, plus the torus phase spread.
fn best_over(
    theory: &FunctionalTheoryModel,
    blocks: Vec<Block>,
    m_ops: &[CMatrix],
    torus: &[CMatrix],
    phis: &[QuantumState],
) -> Result<BoundaryForceResult> {
    if phis.is_empty() {
        return Err(Error::InvalidArgument("at least one minimizer is required".into()));
    }
    let w = theory.interaction().matrix();
    let mut best: Option<(Evaluation, CVector)> = None;
    for phi in phis {
        let v = normalized(phi)?;
        let ev = evaluate(&blocks, m_ops, w, &v);
        if best.as_ref().is_none_or(|(b, _)| ev.radicand < b.radicand) {
            best = Some((ev, v));
        }
    }
    let (ev, phi) = best.expect("non-empty minimizer list");
    let g = 2.0 * ev.radicand.sqrt();
    let phase_spread = torus_spread(theory, &blocks, m_ops, torus, &phi, g);
    Ok(BoundaryForceResult {
        g,
        contributions: blocks
            .iter()
            .zip(&ev.values)
            .map(|(b, &value)| Contribution { omega: b.omega.clone(), value })
            .collect(),
        minimizer_used: QuantumState::pure(phi)?,
        optimal_v: ev.x,
        response: ev.response,
        regular: None,
        phase_spread,
        sufficiently_nice: phase_spread <= SPREAD_TOL,
    })
}

/// Applies random torus elements `exp(i t·H)` that keep density and value fixed.
fn torus_spread(
    theory: &FunctionalTheoryModel,
    blocks: &[Block],
    m_ops: &[CMatrix],
    torus: &[CMatrix],
    phi: &CVector,
    g: f64,
) -> f64 {
    if torus.is_empty() {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x70_7275);
    let w = theory.interaction().matrix();
    let rho = theory.density_of_vector(phi);
    let value = linalg::expectation(w, phi).re;
    let n = phi.len();
    let mut spread: f64 = 0.0;
    for _ in 0..PHASE_SAMPLES {
        let gen = torus
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, h| acc + h * c(rng.random_range(0.0..std::f64::consts::TAU), 0.0));
        let Ok((vals, vecs)) = linalg::eigh(&gen) else { continue };
        let phases = CMatrix::from_diagonal(&vals.map(|t| c(0.0, t).exp()));
        let u = &vecs * phases * vecs.adjoint();
        let moved = &u * phi;
        let drho = (theory.density_of_vector(&moved) - &rho).amax();
        let dval = (linalg::expectation(w, &moved).re - value).abs();
        if drho > 1e-9 || dval > 1e-9 * (1.0 + value.abs()) {
            continue;
        }
        let gm = 2.0 * evaluate(blocks, m_ops, w, &moved).radicand.sqrt();
        spread = spread.max((gm - g).abs());
    }
    spread
}

/// Abelian force `G = 2[Σ_{ω∉Ω_F} ‖Π_ω WΦ‖²/(⟨ω,S⟩−⟨γ,S⟩)]^{1/2}`, minimized over `phis`.
pub fn abelian_boundary_force(
    theory: &FunctionalTheoryModel,
    wd: &WeightDecomposition,
    query: &BoundaryForceQuery,
    phis: &[QuantumState],
) -> Result<BoundaryForceResult> {
    let ft = facet_theory(theory, wd, &query.facet)?;
    let on_points: Vec<Vec<f64>> = ft.facet_weights.iter().map(|&w| wd.weights[w].components().to_vec()).collect();
    let facet_poly = Polytope::from_points(&on_points)?;
    if !facet_poly.contains(&query.rho_star, 1e-8) {
        return Err(Error::CriticalFacetPoint);
    }
    let regular = match weight_decomposition(&ft.model).and_then(|fwd| is_critical_value(&fwd, &query.rho_star)) {
        Ok(critical) => Some(!critical),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    let offset = query.gauge_offset();
    let blocks = ft
        .off_facet_weights
        .iter()
        .map(|&w| {
            let omega = wd.weights[w].components().to_vec();
            let gap = dot(query.facet.normal.as_slice(), &omega) - offset;
            if gap <= GAP_TOL {
                return Err(Error::ZeroDenominator);
            }
            Ok(Block { omega, proj: wd.projectors[w].matrix().clone(), gap })
        })
        .collect::<Result<Vec<_>>>()?;
    let torus: Vec<CMatrix> = theory.potential_basis().iter().map(|h| h.matrix().clone()).collect();
    let mut out = best_over(theory, blocks, &[], &torus, phis)?;
    out.regular = regular;
    Ok(out)
}

/// Closed form `2|⟨m|W|Φ⟩|/√L` when a single off-facet basis vector `m` sits at distance `L`.
pub fn simplex_boundary_force(
    theory: &FunctionalTheoryModel,
    wd: &WeightDecomposition,
    query: &BoundaryForceQuery,
    phi: &QuantumState,
) -> Result<f64> {
    let ft = facet_theory(theory, wd, &query.facet)?;
    let [w] = ft.off_facet_weights[..] else {
        return Err(Error::NotSimplexSetting);
    };
    let cols = wd.columns_of(w);
    let [col] = cols[..] else {
        return Err(Error::NotSimplexSetting);
    };
    let gap = dot(query.facet.normal.as_slice(), &wd.weights[w]) - query.gauge_offset();
    if gap <= GAP_TOL {
        return Err(Error::ZeroDenominator);
    }
    let phi = normalized(phi)?;
    let m = wd.basis.column(col).into_owned();
    let elem = m.dotc(&(theory.interaction().matrix() * phi));
    Ok(2.0 * elem.norm() / gap.sqrt())
}

/// Least-squares force over `v ∈ i𝔤^∤` on the spectral blocks of `τ(S)`.
pub fn nonabelian_boundary_force(
    theory: &FunctionalTheoryModel,
    facet: &FacetData,
    rho_star: &[f64],
    eta: &[f64],
    phis: &[QuantumState],
) -> Result<BoundaryForceResult> {
    let n = theory.basis_size();
    for v in [rho_star, eta, &facet.s_potential[..]] {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: v.len() });
        }
    }
    let pairing = dot(eta, &facet.s_potential);
    if pairing <= 0.0 {
        return Err(Error::InvalidArgument(format!("direction is not inward for the facet (pairing {pairing:.3e})")));
    }
    let s: Vec<f64> = facet.s_potential.iter().map(|x| x / pairing).collect();
    let c0 = facet.c / pairing;
    let d = (dot(rho_star, &s) - c0).abs();
    if d > ON_FACET_TOL * (1.0 + c0.abs()) {
        return Err(Error::NotOnFacet(d));
    }
    let (vals, vecs) = theory.apply_potential(&s)?.eigh()?;
    let mut blocks: Vec<Block> = Vec::new();
    let mut i = 0;
    while i < vals.len() {
        let mut j = i + 1;
        while j < vals.len() && vals[j] - vals[i] <= GAP_TOL * (1.0 + vals[i].abs()) {
            j += 1;
        }
        let lam = vals.rows(i, j - i).mean();
        let gap = lam - c0;
        if gap < -GAP_TOL * (1.0 + c0.abs()) {
            return Err(Error::ZeroDenominator);
        }
        if gap > GAP_TOL * (1.0 + c0.abs()) {
            let v = vecs.columns(i, j - i);
            blocks.push(Block { omega: vec![lam], proj: v * v.adjoint(), gap });
        }
        i = j;
    }
    let m_ops: Vec<CMatrix> = facet.g_nonparallel.iter().map(|g| g.matrix().clone()).collect();
    let torus: Vec<CMatrix> = facet.torus.iter().map(|h| h.matrix().clone()).collect();
    best_over(theory, blocks, &m_ops, &torus, phis)
}

/// Fit of `F_p(ρ*+εη) ≈ a − G√ε`.
#[derive(Debug, Clone, Serialize)]
pub struct ForceFit {
    pub g_fit: f64,
    pub intercept: f64,
    pub rms: f64,
    pub eps_points: Vec<(f64, f64)>,
}

/// Weighted least-squares fit with weights `1/ε²`; the neglected `O(ε)` term sets the error scale.
pub fn fit_sqrt_law(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("fit needs at least two points".into()));
    }
    let (mut sw, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(eps, f) in points {
        let w = 1.0 / (eps * eps);
        let x = eps.sqrt();
        sw += w;
        sx += w * x;
        sxx += w * x * x;
        sy += w * f;
        sxy += w * x * f;
    }
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return Err(Error::InvalidArgument("degenerate ε grid".into()));
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / sw;
    let rms = (points.iter().map(|&(eps, f)| (intercept + slope * eps.sqrt() - f).powi(2)).sum::<f64>()
        / points.len() as f64)
        .sqrt();
    Ok((-slope, intercept, rms))
}

/// Evaluates `F_p(ρ*+εη)` by constrained search and fits the √ε law.
/// `seeds(ε)` supplies extra starting vectors for each grid point.
pub fn finite_difference_force(
    theory: &FunctionalTheoryModel,
    rho_star: &[f64],
    eta: &[f64],
    eps_list: &[f64],
    opts: &SearchOptions,
    seeds: &dyn Fn(f64) -> Vec<CVector>,
) -> Result<ForceFit> {
    if eps_list.is_empty() || eps_list.iter().any(|&e| e <= 0.0) || eps_list.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::InvalidArgument("ε list must be positive and strictly increasing".into()));
    }
    let mut eps_points = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let rho = DensityVector::new(rho_star.iter().zip(eta).map(|(r, e)| r + eps * e).collect());
        let mut o = opts.clone();
        o.initial_states.extend(seeds(eps));
        let r = pure_functional(theory, &rho, &o)?;
        eps_points.push((eps, r.value));
    }
    let (g_fit, intercept, rms) = fit_sqrt_law(&eps_points)?;
    Ok(ForceFit { g_fit, intercept, rms, eps_points })
}

/// Parses `a,b,c` into a sorted ε grid.
pub fn parse_eps_list(text: &str) -> Result<Vec<f64>> {
    let mut v = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad ε value {t:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abelian::weight_decomposition;
    use crate::theory::{qubit_theory, HermitianOperator};

    fn qubit_query() -> BoundaryForceQuery {
        let f = FacetInequality::new(DVector::from_vec(vec![-1.0]), -1.0);
        BoundaryForceQuery::at(&f, DensityVector::new(vec![1.0]), DensityVector::new(vec![-1.0])).unwrap()
    }

    #[test]
    fn qubit_force_is_sqrt_two() {
        let t = qubit_theory(1.0);
        let wd = weight_decomposition(&t).unwrap();
        let up = QuantumState::pure(CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])).unwrap();
        let r = abelian_boundary_force(&t, &wd, &qubit_query(), std::slice::from_ref(&up)).unwrap();
        assert!((r.g - 2f64.sqrt()).abs() < 1e-12);
        assert!((r.g - 2.0 * r.radicand().sqrt()).abs() < 1e-12);
        assert_eq!(r.regular, Some(true));
        let s = simplex_boundary_force(&t, &wd, &qubit_query(), &up).unwrap();
        assert!((s - r.g).abs() < 1e-12);
    }

    #[test]
    fn zero_interaction_has_no_force() {
        let t = qubit_theory(1.0).with_interaction(HermitianOperator::zeros(2)).unwrap();
        let wd = weight_decomposition(&t).unwrap();
        let up = QuantumState::pure(CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])).unwrap();
        let r = abelian_boundary_force(&t, &wd, &qubit_query(), &[up]).unwrap();
        assert_eq!(r.g, 0.0);
    }

    #[test]
    fn off_facet_point_is_rejected() {
        let f = FacetInequality::new(DVector::from_vec(vec![-1.0]), -1.0);
        let q = BoundaryForceQuery::at(&f, DensityVector::new(vec![0.5]), DensityVector::new(vec![-1.0]));
        assert!(matches!(q, Err(Error::NotOnFacet(_))));
    }

    #[test]
    fn qubit_finite_difference_approaches_sqrt_two() {
        let t = qubit_theory(1.0);
        let fit =
            finite_difference_force(&t, &[1.0], &[-1.0], &DEFAULT_EPS, &SearchOptions::default(), &|_| vec![]).unwrap();
        assert!((fit.g_fit - 2f64.sqrt()).abs() / 2f64.sqrt() < 0.01, "{fit:?}");
    }

    #[test]
    fn sqrt_law_fit_recovers_exact_data() {
        let pts: Vec<(f64, f64)> = DEFAULT_EPS.iter().map(|&e| (e, 3.0 - 1.5 * e.sqrt())).collect();
        let (g, a, rms) = fit_sqrt_law(&pts).unwrap();
        assert!((g - 1.5).abs() < 1e-10 && (a - 3.0).abs() < 1e-10 && rms < 1e-12);
    }

    #[test]
    fn eps_list_parsing() {
        assert_eq!(parse_eps_list("1e-2, 1e-4").unwrap(), vec![1e-4, 1e-2]);
        assert!(matches!(parse_eps_list("x"), Err(Error::Config(_))));
    }
}
