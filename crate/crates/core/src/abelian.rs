//! Abelian theories: weight decompositions, the representable polytope,
//! facet-restricted theories, critical values and the classical density map.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{FacetInequality, Polytope};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::theory::{DensityVector, FunctionalTheoryModel, HermitianOperator};

const COMMUTATOR_TOL: f64 = 1e-9;
const WEIGHT_CLUSTER_TOL: f64 = 1e-8;
const EIGEN_CHECK_TOL: f64 = 1e-9;
const MEMBERSHIP_TOL: f64 = 1e-9;
const SUBSET_LIMIT: u128 = 1_000_000;

/// Joint eigenspace decomposition of a commuting potential basis.
#[derive(Debug, Clone)]
pub struct WeightDecomposition {
    pub weights: Vec<DensityVector>,
    /// Unitary matrix whose columns form a weight-adapted orthonormal basis.
    pub basis: CMatrix,
    pub weight_of_column: Vec<usize>,
    pub projectors: Vec<HermitianOperator>,
}

impl WeightDecomposition {
    /// Builds a decomposition directly from commuting Hermitian matrices.
    pub fn from_operators(ops: &[CMatrix], dim: usize) -> Result<Self> {
        let mut worst: f64 = 0.0;
        for (a, x) in ops.iter().enumerate() {
            for y in &ops[a + 1..] {
                worst = worst.max(linalg::commutator(x, y).norm());
            }
        }
        if worst > COMMUTATOR_TOL {
            return Err(Error::NotAbelian(worst));
        }

        let all_diagonal =
            ops.iter().all(|op| (0..dim).all(|i| (0..dim).all(|j| i == j || op[(i, j)].norm() <= 1e-14)));
        let mut blocks: Vec<CMatrix> = vec![CMatrix::identity(dim, dim)];
        if all_diagonal {
            blocks = split_diagonal(ops, dim);
        } else {
            for op in ops {
                let scale = linalg::max_abs(op).max(1.0);
                let mut next = Vec::new();
                for q in &blocks {
                    let compressed = q.adjoint() * op * q;
                    let (vals, vecs) = linalg::eigh(&compressed)?;
                    let mut start = 0;
                    while start < vals.len() {
                        let mut end = start + 1;
                        while end < vals.len() && vals[end] - vals[end - 1] <= WEIGHT_CLUSTER_TOL * scale {
                            end += 1;
                        }
                        next.push(q * vecs.columns(start, end - start));
                        start = end;
                    }
                }
                blocks = next;
            }
        }

        let mut entries: Vec<(Vec<f64>, CMatrix)> = blocks
            .into_iter()
            .map(|q| {
                let w = ops
                    .iter()
                    .map(|op| {
                        let m = q.adjoint() * op * &q;
                        (0..m.nrows()).map(|i| m[(i, i)].re).sum::<f64>() / m.nrows() as f64
                    })
                    .collect();
                (w, q)
            })
            .collect();
        entries.sort_by(|a, b| {
            a.0.iter().zip(&b.0).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        });

        let mut basis = CMatrix::zeros(dim, dim);
        let mut weight_of_column = Vec::with_capacity(dim);
        let mut projectors = Vec::with_capacity(entries.len());
        let mut col = 0;
        for (idx, (_, q)) in entries.iter().enumerate() {
            for j in 0..q.ncols() {
                basis.set_column(col, &q.column(j));
                weight_of_column.push(idx);
                col += 1;
            }
            projectors.push(HermitianOperator::new(q * q.adjoint())?);
        }
        let weights: Vec<DensityVector> = entries.into_iter().map(|(w, _)| DensityVector::new(w)).collect();

        for (i, &w) in weight_of_column.iter().enumerate() {
            let e = basis.column(i).into_owned();
            for (a, op) in ops.iter().enumerate() {
                let r = (op * &e - &e * c(weights[w][a], 0.0)).norm();
                if r > EIGEN_CHECK_TOL * linalg::max_abs(op).max(1.0) {
                    return Err(Error::NotAbelian(r));
                }
            }
        }
        Ok(Self { weights, basis, weight_of_column, projectors })
    }

    pub fn num_weights(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn multiplicity(&self, w: usize) -> usize {
        self.weight_of_column.iter().filter(|&&x| x == w).count()
    }

    pub fn columns_of(&self, w: usize) -> Vec<usize> {
        (0..self.weight_of_column.len()).filter(|&i| self.weight_of_column[i] == w).collect()
    }

    pub fn weight_points(&self) -> Vec<Vec<f64>> {
        self.weights.iter().map(|w| w.components().to_vec()).collect()
    }

    /// Coordinates of a state vector in the weight-adapted basis.
    pub fn coefficients(&self, psi: &CVector) -> CVector {
        self.basis.adjoint() * psi
    }

    /// Classical density `𝒜(y) = Σ_i y_i ω(i)`.
    pub fn classical_density(&self, y: &[f64]) -> DensityVector {
        let k = self.weights.first().map_or(0, |w| w.len());
        let mut out = vec![0.0; k];
        for (i, &yi) in y.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(self.weights[self.weight_of_column[i]].iter()) {
                *o += yi * w;
            }
        }
        DensityVector::new(out)
    }

    /// Weight table as CSV: weight components followed by multiplicity.
    pub fn weight_table_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let k = self.weights.first().map_or(0, |w| w.len());
        let mut header: Vec<String> = (0..k).map(|a| format!("omega_{a}")).collect();
        header.push("multiplicity".into());
        wtr.write_record(&header)?;
        for (idx, w) in self.weights.iter().enumerate() {
            let mut row: Vec<String> = w.iter().map(|x| format!("{x:.16e}")).collect();
            row.push(self.multiplicity(idx).to_string());
            wtr.write_record(&row)?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

fn split_diagonal(ops: &[CMatrix], dim: usize) -> Vec<CMatrix> {
    let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    for i in 0..dim {
        let key: Vec<f64> = ops.iter().map(|op| op[(i, i)].re).collect();
        match groups
            .iter_mut()
            .find(|(k, _)| k.iter().zip(&key).all(|(a, b)| (a - b).abs() <= WEIGHT_CLUSTER_TOL * a.abs().max(1.0)))
        {
            Some((_, cols)) => cols.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    groups
        .into_iter()
        .map(|(_, cols)| {
            let mut q = CMatrix::zeros(dim, cols.len());
            for (j, &i) in cols.iter().enumerate() {
                q[(i, j)] = c(1.0, 0.0);
            }
            q
        })
        .collect()
}

/// Simultaneous diagonalization of the potential basis.
pub fn weight_decomposition(theory: &FunctionalTheoryModel) -> Result<WeightDecomposition> {
    let ops: Vec<CMatrix> = theory.potential_basis().iter().map(|op| op.matrix().clone()).collect();
    WeightDecomposition::from_operators(&ops, theory.hilbert_dim())
}

/// Convex hull of the weights. A single weight yields a 0-dimensional polytope.
pub fn representable_polytope(wd: &WeightDecomposition) -> Result<Polytope> {
    Polytope::from_points(&wd.weight_points())
}

/// Theory restricted to the weight spaces on a facet hyperplane.
#[derive(Debug, Clone)]
pub struct FacetTheory {
    pub model: FunctionalTheoryModel,
    /// Isometry `ℋ_F → ℋ` whose columns are weight-basis vectors on the facet.
    pub embedding: CMatrix,
    pub facet_weights: Vec<usize>,
    pub off_facet_weights: Vec<usize>,
}

impl FacetTheory {
    pub fn lift(&self, psi: &CVector) -> CVector {
        &self.embedding * psi
    }
}

/// Indices of weights lying on the hyperplane of `facet`, with validity checks.
pub fn weights_on_facet(wd: &WeightDecomposition, facet: &FacetInequality) -> Result<(Vec<usize>, Vec<usize>)> {
    let scale = facet.normal.norm().max(1e-300);
    let mut on = Vec::new();
    let mut off = Vec::new();
    for (i, w) in wd.weights.iter().enumerate() {
        let s = facet.slack(w) / scale;
        if s < -MEMBERSHIP_TOL {
            return Err(Error::InvalidArgument(format!("weight {i} violates the inequality by {:.3e}", -s)));
        }
        if s.abs() <= MEMBERSHIP_TOL {
            on.push(i);
        } else {
            off.push(i);
        }
    }
    if on.is_empty() || off.is_empty() {
        return Err(Error::EmptyFacet);
    }
    Ok((on, off))
}

/// Compresses the theory onto `ℋ_F = ⊕_{ω∈Ω_F} ℋ_ω`.
pub fn facet_theory(
    theory: &FunctionalTheoryModel,
    wd: &WeightDecomposition,
    facet: &FacetInequality,
) -> Result<FacetTheory> {
    let (on, off) = weights_on_facet(wd, facet)?;
    let cols: Vec<usize> = on.iter().flat_map(|&w| wd.columns_of(w)).collect();
    let mut embedding = CMatrix::zeros(wd.dim(), cols.len());
    for (j, &i) in cols.iter().enumerate() {
        embedding.set_column(j, &wd.basis.column(i));
    }
    let basis = theory.potential_basis().iter().map(|op| op.compress(&embedding)).collect();
    let model = FunctionalTheoryModel::new_non_injective(basis, theory.interaction().compress(&embedding))?
        .with_labels(theory.labels().to_vec())?;
    Ok(FacetTheory { model, embedding, facet_weights: on, off_facet_weights: off })
}

fn check_representable(poly: &Polytope, rho: &[f64]) -> Result<()> {
    if rho.len() != poly.ambient_dim {
        return Err(Error::DimensionMismatch { expected: poly.ambient_dim, found: rho.len() });
    }
    let v = poly.violation(rho);
    if v > MEMBERSHIP_TOL * (1.0 + rho.iter().map(|x| x.abs()).fold(0.0, f64::max)) {
        return Err(Error::NotRepresentable(v));
    }
    Ok(())
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k as u128).fold(1u128, |acc, i| acc * (n as u128 - i) / (i + 1))
}

/// True iff `rho` lies in the convex hull of at most `dim conv(Ω)` weights.
pub fn is_critical_value(wd: &WeightDecomposition, rho: &DensityVector) -> Result<bool> {
    let poly = representable_polytope(wd)?;
    check_representable(&poly, rho)?;
    let m = poly.dim();
    if m == 0 {
        return Ok(false);
    }
    let n = wd.num_weights();
    let count = binomial(n, m);
    if count > SUBSET_LIMIT {
        return Err(Error::Unsupported(count));
    }
    let coords: Vec<DVector<f64>> = wd.weights.iter().map(|w| poly.affine_hull.coordinates(w)).collect();
    let target = poly.affine_hull.coordinates(rho);
    let combos: Vec<Vec<usize>> = (0..n).combinations(m).collect();
    Ok(combos.par_iter().any(|combo| in_simplex(&coords, combo, &target)))
}

fn in_simplex(coords: &[DVector<f64>], combo: &[usize], target: &DVector<f64>) -> bool {
    let m = target.len();
    let k = combo.len();
    let a = DMatrix::from_fn(m + 1, k, |i, j| if i < m { coords[combo[j]][i] } else { 1.0 });
    if linalg::absolute_rank(&a, 1e-10) < k {
        return false;
    }
    let b = DVector::from_fn(m + 1, |i, _| if i < m { target[i] } else { 1.0 });
    let lam = linalg::lstsq(&a, &b, 1e-12);
    let resid = (&a * &lam - &b).norm();
    resid <= MEMBERSHIP_TOL * (1.0 + b.norm()) && lam.iter().all(|&x| x >= -MEMBERSHIP_TOL)
}

/// Classical state `y ≥ 0`, `Σ y_i = 1`, over the weight-adapted basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalState {
    pub y: Vec<f64>,
}

impl ClassicalState {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        let total: f64 = y.iter().sum();
        if y.iter().any(|&v| v < -1e-10) || (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState("classical state must be a probability vector".into()));
        }
        Ok(Self { y })
    }

    /// Pure state `Σ_i ξ_i √y_i E_i` for unit phases `ξ_i = e^{iφ_i}`.
    pub fn to_pure(&self, wd: &WeightDecomposition, phases: &[f64]) -> CVector {
        let coeffs = CVector::from_iterator(
            self.y.len(),
            self.y.iter().zip(phases).map(|(&y, &p)| c(0.0, p).exp() * y.max(0.0).sqrt()),
        );
        &wd.basis * coeffs
    }
}

/// Barycentric weights over `points` reproducing `target`, built by shooting a
/// ray from a center through the target to the boundary and recursing into the
/// facet that is hit. `center` returns positive weights over the current points.
pub fn fiber_barycentric(
    points: &[Vec<f64>],
    target: &[f64],
    center: &mut dyn FnMut(usize) -> Vec<f64>,
) -> Result<Vec<f64>> {
    let poly = Polytope::from_points(points)?;
    check_representable(&poly, target)?;
    if poly.dim() == 0 {
        let n = points.len() as f64;
        return Ok(vec![1.0 / n; points.len()]);
    }
    let mu = center(points.len());
    let total: f64 = mu.iter().sum();
    let mu: Vec<f64> = mu.iter().map(|x| x / total).collect();
    let d = target.len();
    let b: Vec<f64> = (0..d).map(|k| points.iter().zip(&mu).map(|(p, w)| p[k] * w).sum()).collect();
    let dir: Vec<f64> = target.iter().zip(&b).map(|(t, x)| t - x).collect();
    let scale = points.iter().flatten().map(|x| x.abs()).fold(1.0, f64::max);
    if dir.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-13 * scale {
        return Ok(mu);
    }
    let mut t_hit = f64::INFINITY;
    let mut hit = 0;
    for (k, f) in poly.inequalities.iter().enumerate() {
        let rate: f64 = f.normal.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if rate < 0.0 {
            let t = f.slack(&b) / -rate;
            if t < t_hit {
                t_hit = t;
                hit = k;
            }
        }
    }
    let t_hit = t_hit.max(1.0);
    let q: Vec<f64> = b.iter().zip(&dir).map(|(x, v)| x + t_hit * v).collect();
    let facet = &poly.inequalities[hit];
    let on: Vec<usize> = (0..points.len()).filter(|&i| facet.slack(&points[i]).abs() <= 1e-9 * scale).collect();
    let sub: Vec<Vec<f64>> = on.iter().map(|&i| points[i].clone()).collect();
    let inner = fiber_barycentric(&sub, &q, center)?;
    let s = 1.0 / t_hit;
    let mut out: Vec<f64> = mu.iter().map(|w| (1.0 - s) * w).collect();
    for (&i, w) in on.iter().zip(inner) {
        out[i] += s * w;
    }
    Ok(out)
}

/// Classical state with `𝒜(y) = ρ`; strictly positive when `ρ` is interior.
pub fn classical_fiber_point(wd: &WeightDecomposition, rho: &DensityVector) -> Result<ClassicalState> {
    let lam = fiber_barycentric(&wd.weight_points(), rho, &mut |n| vec![1.0; n])?;
    Ok(spread_over_columns(wd, &lam))
}

/// Distributes per-weight masses evenly over each weight's columns.
pub fn spread_over_columns(wd: &WeightDecomposition, lam: &[f64]) -> ClassicalState {
    let y = wd.weight_of_column.iter().map(|&w| lam[w].max(0.0) / wd.multiplicity(w) as f64).collect();
    ClassicalState { y }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::{qubit_theory, spin_chain_theory};

    fn diag_theory(weights: &[Vec<f64>]) -> FunctionalTheoryModel {
        let k = weights[0].len();
        let basis =
            (0..k).map(|a| HermitianOperator::diagonal(&weights.iter().map(|w| w[a]).collect::<Vec<_>>())).collect();
        FunctionalTheoryModel::new_non_injective(basis, HermitianOperator::zeros(weights.len())).unwrap()
    }

    #[test]
    fn spin_chain_weights_form_a_cube() {
        let t = spin_chain_theory(3, 0.7).unwrap();
        let wd = weight_decomposition(&t).unwrap();
        assert_eq!(wd.num_weights(), 8);
        for w in 0..8 {
            assert_eq!(wd.multiplicity(w), 1);
            assert!(wd.weights[w].iter().all(|x| (x.abs() - 1.0).abs() < 1e-12));
        }
        let poly = representable_polytope(&wd).unwrap();
        assert_eq!(poly.dim(), 3);
        assert_eq!(poly.inequalities.len(), 6);
    }

    #[test]
    fn qubit_weights() {
        let wd = weight_decomposition(&qubit_theory(1.0)).unwrap();
        assert_eq!(wd.weights.len(), 2);
        assert_eq!(wd.weights[0].components(), &[-1.0]);
        assert_eq!(wd.weights[1].components(), &[1.0]);
    }

    #[test]
    fn projectors_resolve_identity() {
        let t = spin_chain_theory(2, 0.3).unwrap();
        let wd = weight_decomposition(&t).unwrap();
        let sum = wd.projectors.iter().fold(CMatrix::zeros(4, 4), |acc, p| acc + p.matrix());
        assert!((sum - CMatrix::identity(4, 4)).norm() < 1e-10);
    }

    #[test]
    fn rotated_commuting_basis_is_diagonalized() {
        let t = spin_chain_theory(2, 0.0).unwrap();
        let u = {
            let h = crate::theory::HermitianOperator::new(CMatrix::from_fn(4, 4, |i, j| {
                c((i + j) as f64 * 0.1, (i as f64 - j as f64) * 0.2)
            }))
            .unwrap();
            let (_, v) = h.eigh().unwrap();
            v
        };
        let rotated: Vec<CMatrix> = t.potential_basis().iter().map(|op| &u * op.matrix() * u.adjoint()).collect();
        let wd = WeightDecomposition::from_operators(&rotated, 4).unwrap();
        assert_eq!(wd.num_weights(), 4);
        let y = vec![0.25; 4];
        let psi = ClassicalState::new(y.clone()).unwrap().to_pure(&wd, &[0.1, 0.2, 0.3, 0.4]);
        for (a, op) in rotated.iter().enumerate() {
            let rho = linalg::expectation(op, &psi).re;
            assert!((rho - wd.classical_density(&y)[a]).abs() < 1e-12);
        }
    }

    #[test]
    fn noncommuting_basis_is_rejected() {
        let [x, _, z] = crate::theory::pauli();
        let err = WeightDecomposition::from_operators(&[x, z], 2).unwrap_err();
        assert!(matches!(err, Error::NotAbelian(_)));
    }

    #[test]
    fn facet_theory_of_spin_chain() {
        let t = spin_chain_theory(3, 1.0).unwrap();
        let wd = weight_decomposition(&t).unwrap();
        let facet = FacetInequality::new(DVector::from_vec(vec![-1.0, 0.0, 0.0]), -1.0);
        let ft = facet_theory(&t, &wd, &facet).unwrap();
        assert_eq!(ft.model.hilbert_dim(), 4);
        let z0 = ft.model.potential_basis()[0].matrix();
        assert!((z0 - CMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn point_polytope_rejects_facets() {
        let t = diag_theory(&[vec![2.0], vec![2.0]]);
        let wd = weight_decomposition(&t).unwrap();
        let poly = representable_polytope(&wd).unwrap();
        assert_eq!(poly.dim(), 0);
        let facet = FacetInequality::new(DVector::from_vec(vec![1.0]), 2.0);
        assert!(matches!(facet_theory(&t, &wd, &facet), Err(Error::EmptyFacet)));
    }

    #[test]
    fn critical_values_by_brute_force() {
        let pts = vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 3.0]];
        let wd = weight_decomposition(&diag_theory(&pts)).unwrap();
        assert!(!is_critical_value(&wd, &DensityVector::new(vec![1.0, 1.0])).unwrap());
        assert!(is_critical_value(&wd, &DensityVector::new(vec![1.5, 0.0])).unwrap());
        assert!(is_critical_value(&wd, &DensityVector::new(vec![0.0, 3.0])).unwrap());
        assert!(matches!(is_critical_value(&wd, &DensityVector::new(vec![3.0, 3.0])), Err(Error::NotRepresentable(_))));
    }

    #[test]
    fn fiber_point_is_interior_and_exact() {
        let pts = vec![vec![3.0, 0.0, 0.0], vec![0.0, 3.0, 0.0], vec![0.0, 0.0, 3.0], vec![1.0, 1.0, 1.0]];
        let wd = weight_decomposition(&diag_theory(&pts)).unwrap();
        let rho = DensityVector::new(vec![1.0, 1.0, 1.0]);
        let y = classical_fiber_point(&wd, &rho).unwrap();
        assert!(y.y.iter().all(|&v| v > 0.0));
        let back = wd.classical_density(&y.y);
        assert!(back.iter().zip(rho.iter()).all(|(a, b)| (a - b).abs() < 1e-12));

        let rho = DensityVector::new(vec![2.0, 0.5, 0.5]);
        let y = classical_fiber_point(&wd, &rho).unwrap();
        assert!(y.y.iter().all(|&v| v > 0.0));
        let back = wd.classical_density(&y.y);
        assert!(back.iter().zip(rho.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn weight_csv_has_multiplicities() {
        let t = diag_theory(&[vec![1.0], vec![1.0], vec![-1.0]]);
        let wd = weight_decomposition(&t).unwrap();
        let csv = wd.weight_table_csv().unwrap();
        assert!(csv.starts_with("omega_0,multiplicity"));
        assert!(csv.contains(",2"));
    }
}
