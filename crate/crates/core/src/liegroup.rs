//! Lie-algebra data for momentum-map theories, Kirwan polytopes and nice facets.
//!
//! All pairings use the Hermitian convention: a Cartan element `S` is stored by
//! its coordinates in the chosen Cartan basis `H_j`, a point `x` of the dual
//! torus by `x_j = ⟨ψ|τ(H_j)|ψ⟩`, and inequalities read `⟨x, S⟩ ≥ c`.

use std::collections::BTreeSet;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::abelian::WeightDecomposition;
use crate::error::{Error, Result};
use crate::geometry::{FacetInequality, Polytope};
use crate::linalg::{self, c, CMatrix, CVector, I};
use crate::theory::{FunctionalTheoryModel, HermitianOperator, QuantumState};

const LIE_TOL: f64 = 1e-9;
const RANK_CUTOFF: f64 = 1e-9;
const WITNESSES: usize = 8;

/// Positive root with its represented ladder operators.
#[derive(Debug, Clone)]
pub struct Root {
    /// `α(H_j)` for each Cartan basis element.
    pub alpha: Vec<f64>,
    pub raising: CMatrix,
    pub lowering: CMatrix,
    /// Cartan coordinates of the coroot, normalized to `α(H_α) = 2`.
    pub coroot: Vec<f64>,
    pub simple: bool,
}

#[derive(Debug, Clone)]
pub struct LieAlgebraData {
    pub name: String,
    pub cartan_basis: Vec<HermitianOperator>,
    /// Row `j` holds the coordinates of `H_j` in the generator basis.
    pub cartan_in_generators: DMatrix<f64>,
    /// Hermitian basis of the represented algebra; the potentials of the
    /// associated momentum-map theory.
    pub generators: Vec<HermitianOperator>,
    pub generator_labels: Vec<String>,
    pub roots: Vec<Root>,
    /// `⟨x, H_α⟩ ≥ 0` for each simple root.
    pub weyl_chamber: Vec<FacetInequality>,
    /// `Tr(τ(A)τ(B))` on the generator basis.
    pub inner_product: DMatrix<f64>,
    /// `(X_α, Y_α) = (L⁺ + L⁻, −i(L⁺ − L⁻))` per positive root.
    pub xy_generators: Vec<(HermitianOperator, HermitianOperator)>,
}

impl LieAlgebraData {
    fn assemble(
        name: String,
        generators: Vec<CMatrix>,
        generator_labels: Vec<String>,
        cartan_in_generators: DMatrix<f64>,
        ladders: Vec<(CMatrix, CMatrix, bool)>,
    ) -> Result<Self> {
        let gens = generators.into_iter().map(HermitianOperator::new).collect::<Result<Vec<_>>>()?;
        let r = cartan_in_generators.nrows();
        let cartan: Vec<HermitianOperator> = (0..r)
            .map(|j| {
                let n = gens[0].dim();
                let mut m = CMatrix::zeros(n, n);
                for (g, op) in gens.iter().enumerate() {
                    m += op.matrix() * c(cartan_in_generators[(j, g)], 0.0);
                }
                HermitianOperator::new(m)
            })
            .collect::<Result<_>>()?;
        for a in 0..r {
            for b in a + 1..r {
                let comm = linalg::commutator(cartan[a].matrix(), cartan[b].matrix()).norm();
                if comm > 1e-10 {
                    return Err(Error::NotSimultaneouslyDiagonalizable(comm));
                }
            }
        }

        let mut roots = Vec::with_capacity(ladders.len());
        for (raising, lowering, simple) in ladders {
            let scale = raising.norm().max(1e-300);
            let alpha: Vec<f64> = cartan
                .iter()
                .map(|h| {
                    let comm = linalg::commutator(h.matrix(), &raising);
                    (comm.dotc(&raising) / c(scale * scale, 0.0)).re
                })
                .collect();
            for (h, &a) in cartan.iter().zip(&alpha) {
                let comm = linalg::commutator(h.matrix(), &raising);
                let dev = (comm - &raising * c(a, 0.0)).norm();
                if dev > LIE_TOL * scale.max(1.0) {
                    return Err(Error::UnsupportedAlgebra(format!(
                        "ladder is not a root vector (deviation {dev:.3e})"
                    )));
                }
            }
            let bracket = linalg::commutator(&raising, &lowering);
            let flat = DMatrix::from_fn(bracket.nrows() * bracket.ncols() * 2, r, |i, j| {
                let m = cartan[j].matrix();
                let k = i / 2;
                let z = m[(k / m.ncols(), k % m.ncols())];
                if i % 2 == 0 {
                    z.re
                } else {
                    z.im
                }
            });
            let rhs = DVector::from_fn(flat.nrows(), |i, _| {
                let k = i / 2;
                let z = bracket[(k / bracket.ncols(), k % bracket.ncols())];
                if i % 2 == 0 {
                    z.re
                } else {
                    z.im
                }
            });
            let h = linalg::lstsq(&flat, &rhs, 1e-12);
            let pairing: f64 = h.iter().zip(&alpha).map(|(x, y)| x * y).sum();
            if pairing.abs() < 1e-12 {
                return Err(Error::UnsupportedAlgebra("degenerate coroot".into()));
            }
            let coroot = h.iter().map(|x| 2.0 * x / pairing).collect();
            roots.push(Root { alpha, raising, lowering, coroot, simple });
        }

        let weyl_chamber = roots
            .iter()
            .filter(|rt| rt.simple)
            .map(|rt| FacetInequality::new(DVector::from_column_slice(&rt.coroot), 0.0))
            .collect();
        let inner_product =
            DMatrix::from_fn(gens.len(), gens.len(), |a, b| (gens[a].matrix() * gens[b].matrix()).trace().re);
        let xy_generators = roots
            .iter()
            .map(|rt| {
                let x = HermitianOperator::new(&rt.raising + &rt.lowering)?;
                let y = HermitianOperator::new((&rt.raising - &rt.lowering) * -I)?;
                Ok((x, y))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            name,
            cartan_basis: cartan,
            cartan_in_generators,
            generators: gens,
            generator_labels,
            roots,
            weyl_chamber,
            inner_product,
            xy_generators,
        })
    }

    pub fn rank(&self) -> usize {
        self.cartan_basis.len()
    }

    pub fn hilbert_dim(&self) -> usize {
        self.generators[0].dim()
    }

    /// Generator-basis coordinates of the Cartan element with coordinates `s`.
    pub fn cartan_to_generators(&self, s: &[f64]) -> Vec<f64> {
        (0..self.generators.len())
            .map(|g| (0..self.rank()).map(|j| s[j] * self.cartan_in_generators[(j, g)]).sum())
            .collect()
    }

    /// `τ(S)` for Cartan coordinates `s`.
    pub fn cartan_operator(&self, s: &[f64]) -> CMatrix {
        let n = self.hilbert_dim();
        self.cartan_basis.iter().zip(s).fold(CMatrix::zeros(n, n), |acc, (h, &x)| acc + h.matrix() * c(x, 0.0))
    }

    /// Cartan coordinates `⟨ψ|τ(H_j)|ψ⟩`.
    pub fn torus_point(&self, psi: &CVector) -> Vec<f64> {
        self.cartan_basis.iter().map(|h| h.expectation(psi) / psi.norm_squared()).collect()
    }

    /// Weyl-group representative in the dominant chamber.
    pub fn to_dominant(&self, x: &[f64]) -> Vec<f64> {
        let mut x = x.to_vec();
        for _ in 0..1000 {
            let Some(rt) = self.roots.iter().filter(|rt| rt.simple).find(|rt| dot(&rt.coroot, &x) < -1e-12) else {
                break;
            };
            let p = dot(&rt.coroot, &x);
            for (xi, a) in x.iter_mut().zip(&rt.alpha) {
                *xi -= p * a;
            }
        }
        x
    }

    /// Generator-basis coordinates of a represented element of the algebra.
    pub fn coordinates_of(&self, op: &HermitianOperator) -> Vec<f64> {
        let flat = |m: &CMatrix| linalg::flatten_complex(m);
        let cols: Vec<DVector<f64>> = self.generators.iter().map(|g| flat(g.matrix())).collect();
        let a = DMatrix::from_columns(&cols);
        linalg::lstsq(&a, &flat(op.matrix()), 1e-12).iter().copied().collect()
    }

    /// Pairing of a density (generator coordinates) with a represented element.
    pub fn pair_density(&self, rho: &[f64], op: &HermitianOperator) -> f64 {
        dot(&self.coordinates_of(op), rho)
    }

    /// Cartan coordinates of a density given in generator coordinates.
    pub fn torus_projection(&self, rho: &[f64]) -> Vec<f64> {
        (0..self.rank())
            .map(|j| (0..self.generators.len()).map(|g| self.cartan_in_generators[(j, g)] * rho[g]).sum())
            .collect()
    }

    pub fn in_chamber(&self, x: &[f64], tol: f64) -> bool {
        self.weyl_chamber.iter().all(|f| f.slack(x) >= -tol)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Spin matrices `(J₊, J_z)` on `ℂ^d`, basis ordered by descending `m`.
fn spin_matrices(d: usize) -> (CMatrix, CMatrix) {
    let j = (d as f64 - 1.0) / 2.0;
    let mut jp = CMatrix::zeros(d, d);
    let mut jz = CMatrix::zeros(d, d);
    for k in 0..d {
        let m = j - k as f64;
        jz[(k, k)] = c(m, 0.0);
        if k > 0 {
            jp[(k - 1, k)] = c((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
    }
    (jp, jz)
}

fn embed_factor(op: &CMatrix, dims: &[usize], site: usize) -> CMatrix {
    dims.iter().enumerate().fold(CMatrix::identity(1, 1), |acc, (s, &d)| {
        let f = if s == site { op.clone() } else { CMatrix::identity(d, d) };
        linalg::kron(&acc, &f)
    })
}

/// `su(2)^n` acting on `⊗ ℂ^{d_i}` with generators `X_i, Y_i, Z_i = 2J`.
pub fn su2_product(dims: &[usize]) -> Result<LieAlgebraData> {
    if dims.is_empty() || dims.iter().any(|&d| d < 2) {
        return Err(Error::UnsupportedAlgebra("su(2) irreps need dimension at least 2".into()));
    }
    let n = dims.len();
    let mut gens = Vec::with_capacity(3 * n);
    let mut labels = Vec::with_capacity(3 * n);
    let mut ladders = Vec::with_capacity(n);
    let mut cart = DMatrix::zeros(n, 3 * n);
    for (i, &d) in dims.iter().enumerate() {
        let (jp, jz) = spin_matrices(d);
        let jm = jp.adjoint();
        gens.push(embed_factor(&(&jp + &jm), dims, i));
        gens.push(embed_factor(&((&jp - &jm) * -I), dims, i));
        gens.push(embed_factor(&(jz * c(2.0, 0.0)), dims, i));
        labels.extend([format!("X{}", i + 1), format!("Y{}", i + 1), format!("Z{}", i + 1)]);
        cart[(i, 3 * i + 2)] = 1.0;
        ladders.push((embed_factor(&jp, dims, i), embed_factor(&jm, dims, i), true));
    }
    LieAlgebraData::assemble(format!("su2_product{dims:?}"), gens, labels, cart, ladders)
}

/// `su(2)` on `ℂ^d` with the Cartan direction rotated to `(sin θ, 0, cos θ)`.
pub fn su2_rotated(d: usize, theta: f64) -> Result<LieAlgebraData> {
    if d < 2 {
        return Err(Error::UnsupportedAlgebra("su(2) irreps need dimension at least 2".into()));
    }
    let (jp, jz) = spin_matrices(d);
    let jm = jp.adjoint();
    let x = &jp + &jm;
    let y = (&jp - &jm) * -I;
    let z = jz * c(2.0, 0.0);
    let (s, co) = theta.sin_cos();
    let e1 = &x * c(co, 0.0) - &z * c(s, 0.0);
    let raising = (&e1 + &y * I) * c(0.5, 0.0);
    let lowering = raising.adjoint();
    let cart = DMatrix::from_row_slice(1, 3, &[s, 0.0, co]);
    LieAlgebraData::assemble(
        format!("su2_rotated({d},{theta})"),
        vec![x, y, z],
        vec!["X".into(), "Y".into(), "Z".into()],
        cart,
        vec![(raising, lowering, true)],
    )
}

/// Adjoint representation of `su(3)` on `sl(3,ℂ)` with Cartan basis
/// `Z = diag(1,−1,0)`, `Z' = diag(0,1,−1)`.
pub fn su3_adjoint() -> Result<LieAlgebraData> {
    let unit = |i: usize, j: usize| {
        let mut m = CMatrix::zeros(3, 3);
        m[(i, j)] = c(1.0, 0.0);
        m
    };
    let mut onb: Vec<CMatrix> = Vec::new();
    for &(i, j) in &[(0, 1), (1, 2), (0, 2), (1, 0), (2, 1), (2, 0)] {
        onb.push(unit(i, j));
    }
    onb.push((unit(0, 0) - unit(1, 1)) * c(1.0 / 2f64.sqrt(), 0.0));
    onb.push((unit(0, 0) + unit(1, 1) - unit(2, 2) * c(2.0, 0.0)) * c(1.0 / 6f64.sqrt(), 0.0));
    let ad = |a: &CMatrix| {
        CMatrix::from_fn(8, 8, |k, l| {
            let br = a * &onb[l] - &onb[l] * a;
            (onb[k].adjoint() * br).trace()
        })
    };
    let z = unit(0, 0) - unit(1, 1);
    let zp = unit(1, 1) - unit(2, 2);
    let mut gens = vec![ad(&z), ad(&zp)];
    let mut labels = vec!["Z".to_string(), "Z'".to_string()];
    for &(i, j) in &[(0, 1), (1, 2), (0, 2)] {
        gens.push(ad(&(unit(i, j) + unit(j, i))));
        gens.push(ad(&((unit(i, j) - unit(j, i)) * -I)));
        labels.push(format!("X{}{}", i + 1, j + 1));
        labels.push(format!("Y{}{}", i + 1, j + 1));
    }
    let mut cart = DMatrix::zeros(2, 8);
    cart[(0, 0)] = 1.0;
    cart[(1, 1)] = 1.0;
    let ladders = vec![
        (ad(&unit(0, 1)), ad(&unit(1, 0)), true),
        (ad(&unit(1, 2)), ad(&unit(2, 1)), true),
        (ad(&unit(0, 2)), ad(&unit(2, 0)), false),
    ];
    LieAlgebraData::assemble("su3_adjoint".into(), gens, labels, cart, ladders)
}

/// Built-in algebra selection.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum AlgebraSpec {
    Su2Product { su2_product: usize, irreps: Vec<usize> },
    Su3Adjoint { su3_adjoint: serde_json::Value },
}

pub fn builtin_algebra(spec: &AlgebraSpec) -> Result<LieAlgebraData> {
    match spec {
        AlgebraSpec::Su2Product { su2_product: factors, irreps } => {
            if *factors != irreps.len() {
                return Err(Error::UnsupportedAlgebra(format!(
                    "{} factors declared but {} irreps given",
                    factors,
                    irreps.len()
                )));
            }
            su2_product(irreps)
        }
        AlgebraSpec::Su3Adjoint { .. } => su3_adjoint(),
    }
}

/// Momentum-map theory: the represented generators as potentials.
pub fn momentum_theory(alg: &LieAlgebraData, interaction: HermitianOperator) -> Result<FunctionalTheoryModel> {
    FunctionalTheoryModel::new(alg.generators.clone(), interaction)?.with_labels(alg.generator_labels.clone())
}

/// Two-mode bosons `Symᴺℂ²` with `τ(X,Y,Z)` from Schwinger bilinears and `W = n₁² + n₂²`.
pub fn dimer_theory(n: usize) -> Result<FunctionalTheoryModel> {
    if n == 0 {
        return Err(Error::Config("dimer needs at least one boson".into()));
    }
    let alg = su2_product(&[n + 1])?;
    let w: Vec<f64> = (0..=n).rev().map(|m| (m * m + (n - m) * (n - m)) as f64).collect();
    FunctionalTheoryModel::new(alg.generators.clone(), HermitianOperator::diagonal(&w))?.with_labels(vec![
        "X".into(),
        "Y".into(),
        "Z".into(),
    ])
}

/// Couplings of the `ℂ²⊗ℂ³` interaction with a single nice facet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitQutritCouplings {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub k1: f64,
    pub k3: f64,
}

/// Interaction on `ℂ²⊗ℂ³` in the kron basis `|s, m⟩`, `s ∈ {1,−1}`, `m ∈ {2,0,−2}`.
pub fn qubit_qutrit_interaction(p: &QubitQutritCouplings) -> HermitianOperator {
    let idx = |s: usize, m: usize| 3 * s + m;
    let mut w = DMatrix::<f64>::zeros(6, 6);
    let mut set = |a: usize, b: usize, v: f64| {
        w[(a, b)] = v;
        w[(b, a)] = v;
    };
    set(idx(0, 0), idx(1, 0), p.u1);
    set(idx(0, 1), idx(1, 1), p.u2);
    set(idx(0, 2), idx(1, 2), p.u3);
    set(idx(0, 0), idx(0, 0), p.k1);
    set(idx(0, 2), idx(0, 2), p.k3);
    set(idx(0, 0), idx(0, 1), 1.0);
    set(idx(0, 2), idx(0, 1), 1.0);
    HermitianOperator::from_real(&w).expect("symmetric by construction")
}

/// Lie data of the dimer with Cartan axis `(sin θ, 0, cos θ)`.
pub fn dimer_algebra(n: usize, theta: f64) -> Result<LieAlgebraData> {
    su2_rotated(n + 1, theta)
}

/// Weight decomposition with respect to the Cartan basis.
pub fn rep_weights(alg: &LieAlgebraData) -> Result<WeightDecomposition> {
    let ops: Vec<CMatrix> = alg.cartan_basis.iter().map(|h| h.matrix().clone()).collect();
    WeightDecomposition::from_operators(&ops, alg.hilbert_dim()).map_err(|e| match e {
        Error::NotAbelian(x) => Error::NotSimultaneouslyDiagonalizable(x),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accepted,
    Rejected,
}

/// Screened candidate `⟨x, S⟩ ≥ c` from a hyperplane through weights.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Candidate {
    #[serde(rename = "S")]
    pub normal: Vec<f64>,
    pub c: f64,
    pub dim_n_minus: usize,
    pub dim_h_below: usize,
    pub verdict: Verdict,
    pub witness_ranks: Vec<usize>,
    pub reason: String,
}

impl Candidate {
    pub fn as_inequality(&self) -> FacetInequality {
        FacetInequality::new(DVector::from_column_slice(&self.normal), self.c)
    }

    /// Same half-space up to positive scaling.
    pub fn same_halfspace(&self, normal: &[f64], c: f64) -> bool {
        let na = self.normal.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = normal.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.normal.iter().zip(normal).all(|(a, b)| (a / na - b / nb).abs() < 1e-9)
            && (self.c / na - c / nb).abs() < 1e-9
    }
}

#[derive(Debug, Clone)]
pub struct KirwanResult {
    /// `Λ` in Cartan coordinates.
    pub polytope: Polytope,
    pub accepted_inequalities: Vec<Candidate>,
    pub rejected_inequalities: Vec<Candidate>,
    /// Accepted inequalities that support a facet of `Λ`.
    pub bounding_inequalities: Vec<Candidate>,
    pub chamber: Vec<FacetInequality>,
    /// Convex hull of the weights in Cartan coordinates.
    pub weight_hull: Polytope,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KirwanReport {
    pub algebra: String,
    pub candidates: Vec<Candidate>,
    pub bounding: Vec<Candidate>,
    pub vertices: Vec<Vec<f64>>,
}

impl KirwanResult {
    pub fn report(&self, algebra: &str) -> KirwanReport {
        let mut candidates = self.accepted_inequalities.clone();
        candidates.extend(self.rejected_inequalities.iter().cloned());
        candidates.sort_by(|a, b| cmp_lex(&a.normal, &b.normal).then(a.c.total_cmp(&b.c)));
        KirwanReport {
            algebra: algebra.into(),
            candidates,
            bounding: self.bounding_inequalities.clone(),
            vertices: self.polytope.vertices.iter().map(|v| v.as_slice().to_vec()).collect(),
        }
    }
}

fn cmp_lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
}

fn affine_rank(points: &[Vec<f64>]) -> usize {
    if points.len() < 2 {
        return 0;
    }
    let d = points[0].len();
    let m = DMatrix::from_fn(points.len() - 1, d, |i, j| points[i + 1][j] - points[0][j]);
    linalg::absolute_rank(&m, 1e-9)
}

/// Dominant image points from weight vectors and superpositions of weight
/// vectors whose pairwise differences are not roots.
fn certify_full_dimension(alg: &LieAlgebraData, wd: &WeightDecomposition, rng: &mut ChaCha8Rng) -> Result<()> {
    let r = alg.rank();
    let is_root_difference = |a: &[f64], b: &[f64]| {
        alg.roots.iter().any(|rt| {
            rt.alpha.iter().zip(a.iter().zip(b)).all(|(al, (x, y))| (x - y - al).abs() < 1e-9)
                || rt.alpha.iter().zip(a.iter().zip(b)).all(|(al, (x, y))| (y - x - al).abs() < 1e-9)
        })
    };
    let weights = wd.weight_points();
    let mut points: Vec<Vec<f64>> = weights.iter().map(|w| alg.to_dominant(w)).collect();
    for (i, j) in (0..weights.len()).tuple_combinations() {
        if is_root_difference(&weights[i], &weights[j]) {
            continue;
        }
        for t in [0.5, rng.random::<f64>()] {
            let x: Vec<f64> = weights[i].iter().zip(&weights[j]).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            points.push(alg.to_dominant(&x));
        }
    }
    let found = affine_rank(&points);
    if found < r {
        return Err(Error::NotFullDimensional { expected: r, found });
    }
    Ok(())
}

fn candidate_hyperplanes(weights: &[Vec<f64>], r: usize) -> Vec<(Vec<f64>, f64)> {
    let ints: Option<Vec<Vec<i128>>> = weights.iter().map(|w| linalg::as_integral(w, 1e-9)).collect();
    let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
    if let Some(ints) = ints {
        let mut seen: BTreeSet<(Vec<i128>, i128)> = BTreeSet::new();
        for combo in (0..ints.len()).combinations(r) {
            let rows: Vec<Vec<i128>> =
                combo[1..].iter().map(|&i| ints[i].iter().zip(&ints[combo[0]]).map(|(a, b)| a - b).collect()).collect();
            if linalg::int_rank(&rows) < r - 1 {
                continue;
            }
            let n = linalg::int_kernel_vector(&rows, r);
            if n.iter().all(|&x| x == 0) {
                continue;
            }
            let h: i128 = n.iter().zip(&ints[combo[0]]).map(|(a, b)| a * b).sum();
            seen.insert((n.clone(), h));
            seen.insert((n.iter().map(|x| -x).collect(), -h));
        }
        out = seen.into_iter().map(|(n, h)| (n.iter().map(|&x| x as f64).collect(), h as f64)).collect();
    } else {
        for combo in (0..weights.len()).combinations(r) {
            let rows = DMatrix::from_fn(r - 1, r, |i, j| weights[combo[i + 1]][j] - weights[combo[0]][j]);
            let ker = linalg::null_space(&rows, 1e-9);
            if ker.ncols() != 1 {
                continue;
            }
            let mut n: Vec<f64> = ker.column(0).iter().copied().collect();
            if n.iter().find(|x| x.abs() > 1e-12).is_some_and(|&x| x < 0.0) {
                n.iter_mut().for_each(|x| *x = -*x);
            }
            let h = dot(&n, &weights[combo[0]]);
            for (nn, hh) in [(n.clone(), h), (n.iter().map(|x| -x).collect::<Vec<_>>(), -h)] {
                let dup = out
                    .iter()
                    .any(|(m, g)| m.iter().zip(&nn).all(|(a, b)| (a - b).abs() < 1e-9) && (g - hh).abs() < 1e-9);
                if !dup {
                    out.push((nn, hh));
                }
            }
        }
    }
    out
}

fn complex_rank(m: &CMatrix) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_CUTOFF * top.max(1.0)).count()
}

fn screen(
    alg: &LieAlgebraData,
    wd: &WeightDecomposition,
    normal: Vec<f64>,
    c0: f64,
    rng: &mut ChaCha8Rng,
) -> Candidate {
    let level = {
        let normal = normal.clone();
        move |w: &[f64]| dot(&normal, w) - c0
    };
    let dim_h_below: usize =
        (0..wd.num_weights()).filter(|&w| level(&wd.weights[w]) < -LIE_TOL).map(|w| wd.multiplicity(w)).sum();
    let lowering: Vec<&Root> = alg.roots.iter().filter(|rt| dot(&normal, &rt.alpha) > LIE_TOL).collect();
    let dim_n_minus = lowering.len();
    let mut cand = Candidate {
        normal,
        c: c0,
        dim_n_minus,
        dim_h_below,
        verdict: Verdict::Rejected,
        witness_ranks: vec![],
        reason: String::new(),
    };
    if dim_n_minus != dim_h_below {
        cand.reason = "dimension mismatch".into();
        return cand;
    }
    if dim_n_minus == 0 {
        cand.verdict = Verdict::Accepted;
        cand.reason = "trivially bijective".into();
        return cand;
    }
    let on: Vec<usize> = wd
        .weight_of_column
        .iter()
        .enumerate()
        .filter(|(_, &w)| level(&wd.weights[w]).abs() <= LIE_TOL)
        .map(|(i, _)| i)
        .collect();
    let mut k = WITNESSES;
    let ranks = loop {
        let ranks: Vec<usize> = (0..k)
            .map(|_| {
                let coeffs =
                    CVector::from_fn(on.len(), |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
                let psi = on
                    .iter()
                    .zip(coeffs.iter())
                    .fold(CVector::zeros(wd.dim()), |acc, (&i, &z)| acc + wd.basis.column(i) * z);
                let mut m = CMatrix::zeros(wd.dim(), lowering.len());
                for (j, rt) in lowering.iter().enumerate() {
                    m.set_column(j, &(&rt.lowering * &psi));
                }
                complex_rank(&m)
            })
            .collect();
        let consistent = ranks.iter().all(|&x| x == ranks[0]);
        if consistent || k > WITNESSES {
            break ranks;
        }
        k *= 2;
    };
    let generic = ranks.iter().copied().max().unwrap_or(0);
    cand.witness_ranks = ranks;
    if generic == dim_n_minus {
        cand.verdict = Verdict::Accepted;
        cand.reason = "isomorphism at generic witness".into();
    } else {
        cand.reason = format!("witness rank {generic} < {dim_n_minus}");
    }
    cand
}

/// `Λ = τ*(ℙ(ℋ)) ∩ i𝔱*₊` by screening hyperplanes through weights.
pub fn kirwan_polytope(alg: &LieAlgebraData) -> Result<KirwanResult> {
    kirwan_polytope_seeded(alg, 0x5eed)
}

pub fn kirwan_polytope_seeded(alg: &LieAlgebraData, seed: u64) -> Result<KirwanResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wd = rep_weights(alg)?;
    let r = alg.rank();
    certify_full_dimension(alg, &wd, &mut rng)?;
    let weights = wd.weight_points();
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for (n, h) in candidate_hyperplanes(&weights, r) {
        let cand = screen(alg, &wd, n, h, &mut rng);
        match cand.verdict {
            Verdict::Accepted => accepted.push(cand),
            Verdict::Rejected => rejected.push(cand),
        }
    }
    if accepted.is_empty() {
        return Err(Error::NoCandidates);
    }
    let mut halfspaces: Vec<FacetInequality> = accepted.iter().map(Candidate::as_inequality).collect();
    halfspaces.extend(alg.weyl_chamber.iter().cloned());
    let (polytope, facets) = Polytope::from_halfspaces(&halfspaces, r)?;
    let bounding = facets.iter().filter(|&&i| i < accepted.len()).map(|&i| accepted[i].clone()).collect();
    Ok(KirwanResult {
        polytope,
        accepted_inequalities: accepted,
        rejected_inequalities: rejected,
        bounding_inequalities: bounding,
        chamber: alg.weyl_chamber.clone(),
        weight_hull: Polytope::from_points(&weights)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FacetClass {
    Trivial,
    Nice,
    Other,
}

#[derive(Debug, Clone)]
pub struct ClassifiedFacet {
    pub inequality: FacetInequality,
    pub class: FacetClass,
}

/// Splits the facets of `Λ` into chamber walls, nice facets and the rest.
pub fn classify_facets(kirwan: &KirwanResult, weights: &WeightDecomposition) -> Vec<ClassifiedFacet> {
    let hull = Polytope::from_points(&weights.weight_points()).unwrap_or_else(|_| kirwan.weight_hull.clone());
    kirwan
        .polytope
        .inequalities
        .iter()
        .map(|f| {
            let verts: Vec<&DVector<f64>> =
                kirwan.polytope.vertices.iter().filter(|v| f.slack(v.as_slice()).abs() <= 1e-9).collect();
            let contained = |g: &FacetInequality| {
                let scale = g.normal.norm().max(1e-300);
                verts.iter().all(|v| (g.slack(v.as_slice()) / scale).abs() <= 1e-9)
            };
            let class = if kirwan.chamber.iter().any(contained) {
                FacetClass::Trivial
            } else if hull.inequalities.iter().any(contained) {
                FacetClass::Nice
            } else {
                FacetClass::Other
            };
            let inequality = kirwan
                .bounding_inequalities
                .iter()
                .find(|cand| contained(&cand.as_inequality()))
                .map(Candidate::as_inequality)
                .unwrap_or_else(|| f.clone());
            ClassifiedFacet { inequality, class }
        })
        .collect()
}

/// Normal direction data consumed by the boundary-force formula.
#[derive(Debug, Clone)]
pub struct FacetData {
    /// `S` in potential (generator) coordinates.
    pub s_potential: Vec<f64>,
    pub c: f64,
    /// Represented basis of `i𝔤^∤`.
    pub g_nonparallel: Vec<HermitianOperator>,
    /// Generators of the maximal torus, used for the phase-spread probe.
    pub torus: Vec<HermitianOperator>,
}

impl FacetData {
    /// Abelian facet: `𝔤^∤` is empty and every potential generates the torus.
    pub fn abelian(theory: &FunctionalTheoryModel, facet: &FacetInequality) -> Self {
        Self {
            s_potential: facet.normal.as_slice().to_vec(),
            c: facet.offset,
            g_nonparallel: vec![],
            torus: theory.potential_basis().to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NonabelianFacet {
    pub data: FacetData,
    /// Facet theory on `ℋ_F` with potentials from `𝔱 ⊕ 𝔤^∥`.
    pub model: FunctionalTheoryModel,
    pub embedding: CMatrix,
    pub g_parallel: Vec<HermitianOperator>,
}

/// Restricts the theory to the weight spaces on a nice facet `⟨x,S⟩ = c`.
pub fn facet_theory_nonabelian(
    alg: &LieAlgebraData,
    theory: &FunctionalTheoryModel,
    s: &[f64],
    c0: f64,
) -> Result<NonabelianFacet> {
    let wd = rep_weights(alg)?;
    let r = alg.rank();
    if s.len() != r {
        return Err(Error::DimensionMismatch { expected: r, found: s.len() });
    }
    let levels: Vec<f64> = wd.weights.iter().map(|w| dot(s, w) - c0).collect();
    if levels.iter().any(|&l| l < -LIE_TOL) {
        return Err(Error::NotNiceFacet);
    }
    let on: Vec<usize> = (0..levels.len()).filter(|&w| levels[w].abs() <= LIE_TOL).collect();
    let on_points: Vec<Vec<f64>> = on.iter().map(|&w| wd.weights[w].components().to_vec()).collect();
    if on.is_empty() || affine_rank(&on_points) + 2 != r + 1 || on.len() == wd.num_weights() {
        return Err(Error::NotNiceFacet);
    }
    let is_wall = c0.abs() <= LIE_TOL
        && alg.weyl_chamber.iter().any(|f| {
            let n = f.normal.norm();
            let sn = s.iter().map(|x| x * x).sum::<f64>().sqrt();
            f.normal.iter().zip(s).all(|(a, b)| (a / n - b / sn).abs() < 1e-9)
        });
    if is_wall {
        return Err(Error::NotNiceFacet);
    }

    let cols: Vec<usize> = on.iter().flat_map(|&w| wd.columns_of(w)).collect();
    let mut embedding = CMatrix::zeros(wd.dim(), cols.len());
    for (j, &i) in cols.iter().enumerate() {
        embedding.set_column(j, &wd.basis.column(i));
    }
    let mut g_parallel = Vec::new();
    let mut g_nonparallel = Vec::new();
    for (rt, (x, y)) in alg.roots.iter().zip(&alg.xy_generators) {
        if dot(s, &rt.alpha).abs() <= LIE_TOL {
            g_parallel.extend([x.clone(), y.clone()]);
        } else {
            g_nonparallel.extend([x.clone(), y.clone()]);
        }
    }
    let mut potentials: Vec<HermitianOperator> = alg.cartan_basis.iter().map(|h| h.compress(&embedding)).collect();
    potentials.extend(g_parallel.iter().map(|g| g.compress(&embedding)));
    let model = FunctionalTheoryModel::new_non_injective(potentials, theory.interaction().compress(&embedding))?;
    Ok(NonabelianFacet {
        data: FacetData {
            s_potential: alg.cartan_to_generators(s),
            c: c0,
            g_nonparallel,
            torus: alg.cartan_basis.clone(),
        },
        model,
        embedding,
        g_parallel,
    })
}

impl NonabelianFacet {
    /// Density of the facet theory induced by a density on the facet.
    pub fn facet_density(&self, alg: &LieAlgebraData, rho: &[f64]) -> Vec<f64> {
        let mut out = alg.torus_projection(rho);
        out.extend(self.g_parallel.iter().map(|g| alg.pair_density(rho, g)));
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionRuleReport {
    pub residual: f64,
    pub passed: bool,
}

/// `‖(τ(S) − c)ψ‖` for a state whose density lies on the facet.
pub fn selection_rule_check(
    theory: &FunctionalTheoryModel,
    facet: &FacetData,
    psi: &QuantumState,
) -> Result<SelectionRuleReport> {
    let v = psi.amplitudes().ok_or_else(|| Error::InvalidArgument("selection rule applies to pure states".into()))?;
    let rho = theory.density_of_vector(v);
    let pairing: f64 = rho.iter().zip(&facet.s_potential).map(|(a, b)| a * b).sum();
    let scale = facet.s_potential.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    if (pairing - facet.c).abs() > 1e-8 * scale {
        return Err(Error::NotOnFacet((pairing - facet.c).abs()));
    }
    let op = theory.apply_potential(&facet.s_potential)?;
    let residual = (op.matrix() * v - v * c(facet.c, 0.0)).norm() / v.norm();
    Ok(SelectionRuleReport { residual, passed: residual <= 1e-7 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn su2_pair_roots_and_weights() {
        let alg = su2_product(&[2, 3]).unwrap();
        assert_eq!(alg.roots.len(), 2);
        assert_eq!(alg.roots[0].alpha, vec![2.0, 0.0]);
        assert_eq!(alg.roots[1].alpha, vec![0.0, 2.0]);
        let wd = rep_weights(&alg).unwrap();
        assert_eq!(wd.num_weights(), 6);
        assert!((0..6).all(|w| wd.multiplicity(w) == 1));
        for h in &alg.cartan_basis {
            for rt in &alg.roots {
                let lhs = linalg::commutator(h.matrix(), &rt.lowering);
                let a: f64 = (lhs.dotc(&rt.lowering) / c(rt.lowering.norm_squared(), 0.0)).re;
                assert!((lhs - &rt.lowering * c(a, 0.0)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn su3_adjoint_weights() {
        let alg = su3_adjoint().unwrap();
        let wd = rep_weights(&alg).unwrap();
        assert_eq!(wd.num_weights(), 7);
        let zero = wd.weights.iter().position(|w| w.iter().all(|x| x.abs() < 1e-9)).unwrap();
        assert_eq!(wd.multiplicity(zero), 2);
        let mut alphas: Vec<Vec<f64>> = alg.roots.iter().map(|r| r.alpha.iter().map(|x| x.round()).collect()).collect();
        alphas.sort_by(|a, b| cmp_lex(a, b));
        assert_eq!(alphas, vec![vec![-1.0, 2.0], vec![1.0, 1.0], vec![2.0, -1.0]]);
        for rt in &alg.roots {
            assert!((dot(&rt.coroot, &rt.alpha) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_qubit_weights() {
        let alg = su2_product(&[2]).unwrap();
        let wd = rep_weights(&alg).unwrap();
        assert_eq!(wd.weight_points(), vec![vec![-1.0], vec![1.0]]);
    }

    #[test]
    fn dimer_weights_and_rotated_ladder() {
        let n = 4;
        let alg = dimer_algebra(n, 0.7).unwrap();
        let wd = rep_weights(&alg).unwrap();
        let got: Vec<f64> = wd.weights.iter().map(|w| w[0].round()).collect();
        assert_eq!(got, vec![-4.0, -2.0, 0.0, 2.0, 4.0]);
        assert!((alg.roots[0].alpha[0] - 2.0).abs() < 1e-12);
        let theory = dimer_theory(n).unwrap();
        assert_eq!(theory.hilbert_dim(), n + 1);
    }

    #[test]
    fn wrong_factor_count_is_unsupported() {
        let spec = AlgebraSpec::Su2Product { su2_product: 2, irreps: vec![2] };
        assert!(matches!(builtin_algebra(&spec), Err(Error::UnsupportedAlgebra(_))));
        assert!(matches!(su2_product(&[1]), Err(Error::UnsupportedAlgebra(_))));
    }

    #[test]
    fn dimer_lambda_is_an_interval() {
        let alg = dimer_algebra(3, 0.4).unwrap();
        let k = kirwan_polytope(&alg).unwrap();
        let mut xs: Vec<f64> = k.polytope.vertices.iter().map(|v| v[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0]).abs() < 1e-9 && (xs[1] - 3.0).abs() < 1e-9);
        let wd = rep_weights(&alg).unwrap();
        let classes = classify_facets(&k, &wd);
        let at = |x: f64| classes.iter().find(|f| f.inequality.slack(&[x]).abs() < 1e-9).unwrap().class;
        assert_eq!(at(3.0), FacetClass::Nice);
        assert_eq!(at(0.0), FacetClass::Trivial);
    }

    #[test]
    fn spin_half_dimer_is_not_full_dimensional() {
        let alg = dimer_algebra(1, 0.0).unwrap();
        assert!(matches!(kirwan_polytope(&alg), Err(Error::NotFullDimensional { .. })));
    }
}
