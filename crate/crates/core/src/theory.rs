//! Generalized functional theories.
//!
//! A theory is a finite-dimensional Hilbert space together with an ordered
//! basis of Hermitian potential operators and a fixed Hermitian interaction.
//! Densities are expectation values of the potential basis; the ground-state
//! energy of `ι(v) + W` is the central object from which the universal
//! functionals are derived by constrained search or Legendre duality.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64};

const HERMITICITY_TOL: f64 = 1e-12;
const STATE_TOL: f64 = 1e-10;

/// Dense Hermitian matrix acting on the Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    /// Validates Hermiticity; round-off level asymmetry is symmetrized away.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        if matrix.nrows() == 0 {
            return Err(Error::InvalidArgument("operator dimension must be at least 1".into()));
        }
        let adjoint = matrix.adjoint();
        let asym = linalg::max_abs(&(&matrix - &adjoint));
        let scale = linalg::max_abs(&matrix).max(1.0);
        if asym > HERMITICITY_TOL * scale {
            return Err(Error::NonHermitianInput(asym));
        }
        let matrix = (&matrix + adjoint) * c(0.5, 0.0);
        Ok(Self { matrix })
    }

    pub fn from_real(matrix: &DMatrix<f64>) -> Result<Self> {
        Self::new(matrix.map(|x| c(x, 0.0)))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = c(v, 0.0);
        }
        Self { matrix: m }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { matrix: CMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: CMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { matrix: &self.matrix * c(s, 0.0) }
    }

    pub fn expectation(&self, psi: &CVector) -> f64 {
        linalg::expectation(&self.matrix, psi).re
    }

    /// Ascending eigenvalues with orthonormal eigenvectors as columns.
    pub fn eigh(&self) -> Result<(DVector<f64>, CMatrix)> {
        linalg::eigh(&self.matrix)
    }

    /// Compression `P A P†` onto the orthonormal columns of `basis` (given as `P†`).
    pub fn compress(&self, basis: &CMatrix) -> Self {
        let m = basis.adjoint() * &self.matrix * basis;
        Self { matrix: (&m + m.adjoint()) * c(0.5, 0.0) }
    }

    pub fn spectral_range(&self) -> Result<f64> {
        let (vals, _) = self.eigh()?;
        Ok(vals[vals.len() - 1] - vals[0])
    }
}

/// A pure state (unit vector) or an ensemble state (unit-trace PSD matrix).
#[derive(Debug, Clone)]
pub enum QuantumState {
    Pure(CVector),
    Ensemble(HermitianOperator),
}

impl QuantumState {
    pub fn pure(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("norm {norm} differs from 1")));
        }
        Ok(Self::Pure(amplitudes))
    }

    /// Normalizes a nonzero vector into a pure state.
    pub fn pure_normalized(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Ok(Self::Pure(amplitudes.unscale(norm)))
    }

    pub fn ensemble(matrix: HermitianOperator) -> Result<Self> {
        let trace = matrix.matrix().trace();
        if (trace.re - 1.0).abs() > STATE_TOL || trace.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {trace} differs from 1")));
        }
        let (vals, _) = matrix.eigh()?;
        if vals[0] < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {}", vals[0])));
        }
        Ok(Self::Ensemble(matrix))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::Ensemble(HermitianOperator::identity(dim).scaled(1.0 / dim as f64))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Pure(v) => v.len(),
            Self::Ensemble(m) => m.dim(),
        }
    }

    pub fn amplitudes(&self) -> Option<&CVector> {
        match self {
            Self::Pure(v) => Some(v),
            Self::Ensemble(_) => None,
        }
    }

    pub fn density_matrix(&self) -> CMatrix {
        match self {
            Self::Pure(v) => v * v.adjoint(),
            Self::Ensemble(m) => m.matrix().clone(),
        }
    }

    /// `Tr(Γ A)`.
    pub fn expectation(&self, op: &CMatrix) -> C64 {
        match self {
            Self::Pure(v) => linalg::expectation(op, v),
            Self::Ensemble(m) => (m.matrix() * op).trace(),
        }
    }
}

/// Vector of expectation values, indexed like the potential basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DensityVector(Vec<f64>);

impl DensityVector {
    pub fn new(components: Vec<f64>) -> Self {
        Self(components)
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for DensityVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for DensityVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<DVector<f64>> for DensityVector {
    fn from(v: DVector<f64>) -> Self {
        Self(v.as_slice().to_vec())
    }
}

/// The tuple of potential basis images, interaction and Hilbert dimension.
#[derive(Debug, Clone)]
pub struct FunctionalTheoryModel {
    potential_basis: Vec<HermitianOperator>,
    interaction: HermitianOperator,
    labels: Vec<String>,
}

impl FunctionalTheoryModel {
    /// Builds a theory whose potential map is injective.
    pub fn new(potential_basis: Vec<HermitianOperator>, interaction: HermitianOperator) -> Result<Self> {
        let model = Self::new_non_injective(potential_basis, interaction)?;
        let rank = model.potential_rank();
        if rank < model.basis_size() {
            return Err(Error::LinearlyDependentBasis { rank, count: model.basis_size() });
        }
        Ok(model)
    }

    /// Builds a theory without requiring the potential basis images to be independent.
    pub fn new_non_injective(potential_basis: Vec<HermitianOperator>, interaction: HermitianOperator) -> Result<Self> {
        let dim = interaction.dim();
        for op in &potential_basis {
            if op.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: op.dim() });
            }
        }
        let labels = (0..potential_basis.len()).map(|a| format!("v{a}")).collect();
        Ok(Self { potential_basis, interaction, labels })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.basis_size() {
            return Err(Error::DimensionMismatch { expected: self.basis_size(), found: labels.len() });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn hilbert_dim(&self) -> usize {
        self.interaction.dim()
    }

    pub fn basis_size(&self) -> usize {
        self.potential_basis.len()
    }

    pub fn potential_basis(&self) -> &[HermitianOperator] {
        &self.potential_basis
    }

    pub fn interaction(&self) -> &HermitianOperator {
        &self.interaction
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Same potentials with a different interaction.
    pub fn with_interaction(&self, interaction: HermitianOperator) -> Result<Self> {
        if interaction.dim() != self.hilbert_dim() {
            return Err(Error::DimensionMismatch { expected: self.hilbert_dim(), found: interaction.dim() });
        }
        Ok(Self { interaction, ..self.clone() })
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.basis_size() {
            return Err(Error::DimensionMismatch { expected: self.basis_size(), found: v.len() });
        }
        Ok(())
    }

    /// `Σ_a v_a ι(B_a)`.
    pub fn apply_potential(&self, v: &[f64]) -> Result<HermitianOperator> {
        self.check_len(v)?;
        Ok(HermitianOperator { matrix: self.potential_matrix(v) })
    }

    fn potential_matrix(&self, v: &[f64]) -> CMatrix {
        let n = self.hilbert_dim();
        let mut m = CMatrix::zeros(n, n);
        for (op, &va) in self.potential_basis.iter().zip(v) {
            if va != 0.0 {
                m += op.matrix() * c(va, 0.0);
            }
        }
        m
    }

    /// `ι(v) + W`.
    pub fn hamiltonian(&self, v: &[f64]) -> Result<HermitianOperator> {
        self.check_len(v)?;
        Ok(HermitianOperator { matrix: self.potential_matrix(v) + self.interaction.matrix() })
    }

    pub fn density_of_state(&self, state: &QuantumState) -> Result<DensityVector> {
        if state.dim() != self.hilbert_dim() {
            return Err(Error::DimensionMismatch { expected: self.hilbert_dim(), found: state.dim() });
        }
        let mut out = Vec::with_capacity(self.basis_size());
        for op in &self.potential_basis {
            let z = state.expectation(op.matrix());
            if z.im.abs() > 1e-10 * (1.0 + z.re.abs()) {
                return Err(Error::NonRealExpectation(z.im));
            }
            out.push(z.re);
        }
        Ok(DensityVector(out))
    }

    /// Density of an arbitrary (not necessarily normalized) vector divided by its norm squared.
    pub fn density_of_vector(&self, psi: &CVector) -> DVector<f64> {
        let nrm = psi.norm_squared();
        DVector::from_iterator(self.basis_size(), self.potential_basis.iter().map(|op| op.expectation(psi) / nrm))
    }

    pub fn ground_energy(&self, v: &[f64]) -> Result<f64> {
        let (vals, _) = self.hamiltonian(v)?.eigh()?;
        Ok(vals[0])
    }

    /// Default degeneracy threshold: `1e-8` times the spectral range of `ι(v)+W`.
    pub fn default_degeneracy_tol(&self, v: &[f64]) -> Result<f64> {
        let range = self.hamiltonian(v)?.spectral_range()?;
        Ok((1e-8 * range).max(1e-12))
    }

    /// Orthonormal basis of the ground eigenspace.
    pub fn ground_states(&self, v: &[f64], degeneracy_tol: f64) -> Result<Vec<QuantumState>> {
        if degeneracy_tol <= 0.0 {
            return Err(Error::InvalidArgument("degeneracy tolerance must be positive".into()));
        }
        let (vals, vecs) = self.hamiltonian(v)?.eigh()?;
        Ok((0..vals.len())
            .take_while(|&i| vals[i] - vals[0] <= degeneracy_tol)
            .map(|i| QuantumState::Pure(vecs.column(i).into_owned()))
            .collect())
    }

    /// Tensor every operator with the identity on a `k`-dimensional ancilla.
    pub fn convexify(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("ancilla dimension must be positive".into()));
        }
        let id = CMatrix::identity(k, k);
        let lift = |op: &HermitianOperator| HermitianOperator { matrix: linalg::kron(op.matrix(), &id) };
        Ok(Self {
            potential_basis: self.potential_basis.iter().map(lift).collect(),
            interaction: lift(&self.interaction),
            labels: self.labels.clone(),
        })
    }

    fn flattened_basis(&self) -> DMatrix<f64> {
        let n = self.hilbert_dim();
        let mut m = DMatrix::zeros(2 * n * n, self.basis_size());
        for (a, op) in self.potential_basis.iter().enumerate() {
            m.set_column(a, &linalg::flatten_complex(op.matrix()));
        }
        m
    }

    pub fn potential_rank(&self) -> usize {
        linalg::numerical_rank(&self.flattened_basis(), 1e-10)
    }

    /// Basis (columns) of potentials `v` with `ι(v)` proportional to the identity.
    pub fn identity_preimage(&self) -> DMatrix<f64> {
        let n = self.hilbert_dim();
        let k = self.basis_size();
        let mut m = self.flattened_basis().resize_horizontally(k + 1, 0.0);
        m.set_column(k, &linalg::flatten_complex(&CMatrix::identity(n, n)));
        let ker = linalg::null_space(&m, 1e-10);
        let coeffs = ker.rows(0, k).into_owned();
        linalg::range_space(&coeffs, 1e-10)
    }

    pub fn identity_preimage_dim(&self) -> usize {
        self.identity_preimage().ncols()
    }

    /// Largest norm of a pairwise commutator of potential basis images.
    pub fn max_commutator(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, x) in self.potential_basis.iter().enumerate() {
            for y in &self.potential_basis[a + 1..] {
                worst = worst.max(linalg::commutator(x.matrix(), y.matrix()).norm());
            }
        }
        worst
    }
}

/// Interaction selection for bosonic sectors.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum InteractionSpec {
    Named(String),
    Coefficients { coefficients: Vec<InteractionTerm> },
}

/// One coefficient `w_{k1 k2 k3 k4}` of `Σ w b†_{k1} b†_{k2} b_{k3} b_{k4}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InteractionTerm {
    pub modes: [usize; 4],
    pub value: [f64; 2],
}

/// Dense complex matrix as row-major `[re, im]` pairs.
pub type ComplexMatrixJson = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExplicitMatrices {
    pub potentials: Vec<ComplexMatrixJson>,
    pub interaction: ComplexMatrixJson,
    #[serde(default)]
    pub allow_dependent: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum TheoryKind {
    Explicit,
    Bosonic,
    Dimer,
    Spin,
    Qubit,
}

/// File-level description of a theory.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TheoryConfig {
    pub kind: TheoryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<ExplicitMatrices>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction: Option<InteractionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl TheoryConfig {
    pub fn qubit(lambda: f64) -> Self {
        Self { lambda: Some(lambda), ..Self::empty(TheoryKind::Qubit) }
    }

    pub fn bosonic(d: usize, n: usize, p: usize) -> Self {
        Self { d: Some(d), n: Some(n), p: Some(p), ..Self::empty(TheoryKind::Bosonic) }
    }

    pub fn dimer(n: usize, theta: f64) -> Self {
        Self { n: Some(n), theta: Some(theta), ..Self::empty(TheoryKind::Dimer) }
    }

    pub fn spin(sites: usize, lambda: f64) -> Self {
        Self { n: Some(sites), lambda: Some(lambda), ..Self::empty(TheoryKind::Spin) }
    }

    fn empty(kind: TheoryKind) -> Self {
        Self {
            kind,
            matrices: None,
            d: None,
            n: None,
            p: None,
            interaction: None,
            lambda: None,
            theta: None,
            labels: None,
        }
    }

    fn require<T: Copy>(value: Option<T>, key: &str) -> Result<T> {
        value.ok_or_else(|| Error::Config(format!("missing key \"{key}\"")))
    }
}

pub fn matrix_from_json(rows: &ComplexMatrixJson) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Config("empty matrix".into()));
    }
    let mut m = CMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: row.len() });
        }
        for (j, z) in row.iter().enumerate() {
            m[(i, j)] = c(z[0], z[1]);
        }
    }
    Ok(m)
}

pub fn matrix_to_json(m: &CMatrix) -> ComplexMatrixJson {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

/// Pauli matrices `(X, Y, Z)`.
pub fn pauli() -> [CMatrix; 3] {
    let o = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    [
        CMatrix::from_row_slice(2, 2, &[o, one, one, o]),
        CMatrix::from_row_slice(2, 2, &[o, c(0.0, -1.0), c(0.0, 1.0), o]),
        CMatrix::from_row_slice(2, 2, &[one, o, o, -one]),
    ]
}

/// Single qubit with `ι(v) = vZ` and `W = λX`.
pub fn qubit_theory(lambda: f64) -> FunctionalTheoryModel {
    let [x, _, z] = pauli();
    FunctionalTheoryModel {
        potential_basis: vec![HermitianOperator { matrix: z }],
        interaction: HermitianOperator { matrix: x * c(lambda, 0.0) },
        labels: vec!["Z".into()],
    }
}

/// `sites` qubits with `ι(v) = Σ v_i Z_i` and transverse interaction `λ Σ X_i`.
pub fn spin_chain_theory(sites: usize, lambda: f64) -> Result<FunctionalTheoryModel> {
    if sites == 0 || sites > 12 {
        return Err(Error::Config("spin chain needs between 1 and 12 sites".into()));
    }
    let [x, _, z] = pauli();
    let embed = |op: &CMatrix, site: usize| {
        (0..sites).fold(CMatrix::identity(1, 1), |acc, s| {
            let factor = if s == site { op.clone() } else { CMatrix::identity(2, 2) };
            linalg::kron(&acc, &factor)
        })
    };
    let dim = 1usize << sites;
    let mut w = CMatrix::zeros(dim, dim);
    for s in 0..sites {
        w += embed(&x, s) * c(lambda, 0.0);
    }
    let basis = (0..sites).map(|s| HermitianOperator { matrix: embed(&z, s) }).collect();
    let labels = (0..sites).map(|s| format!("Z{s}")).collect();
    FunctionalTheoryModel::new(basis, HermitianOperator { matrix: w })?.with_labels(labels)
}

/// Builds and validates a theory from its configuration.
pub fn build_theory(config: &TheoryConfig) -> Result<FunctionalTheoryModel> {
    let model = match config.kind {
        TheoryKind::Qubit => qubit_theory(config.lambda.unwrap_or(1.0)),
        TheoryKind::Spin => spin_chain_theory(TheoryConfig::require(config.n, "N")?, config.lambda.unwrap_or(0.0))?,
        TheoryKind::Bosonic => {
            let d = TheoryConfig::require(config.d, "d")?;
            let n = TheoryConfig::require(config.n, "N")?;
            let p = TheoryConfig::require(config.p, "P")?;
            if d == 0 || p >= d {
                return Err(Error::Config(format!("invalid sector (d={d}, P={p})")));
            }
            let interaction = crate::bosonic::interaction_from_spec(d, config.interaction.as_ref())?;
            crate::bosonic::build_bosonic_theory(d, n, p, &interaction)?
        }
        TheoryKind::Dimer => {
            let n = TheoryConfig::require(config.n, "N")?;
            crate::liegroup::dimer_theory(n)?
        }
        TheoryKind::Explicit => {
            let mats = config.matrices.as_ref().ok_or_else(|| Error::Config("missing key \"matrices\"".into()))?;
            let basis = mats
                .potentials
                .iter()
                .map(|m| HermitianOperator::new(matrix_from_json(m)?))
                .collect::<Result<Vec<_>>>()?;
            let w = HermitianOperator::new(matrix_from_json(&mats.interaction)?)?;
            if mats.allow_dependent {
                FunctionalTheoryModel::new_non_injective(basis, w)?
            } else {
                FunctionalTheoryModel::new(basis, w)?
            }
        }
    };
    match &config.labels {
        Some(labels) => model.with_labels(labels.clone()),
        None => Ok(model),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qubit_energy_matches_closed_form() {
        let t = qubit_theory(1.0);
        assert_eq!(t.basis_size(), 1);
        assert_eq!(t.hilbert_dim(), 2);
        let e = t.ground_energy(&[3.0]).unwrap();
        assert!((e + 10f64.sqrt()).abs() < 1e-12);
        let w0 = FunctionalTheoryModel::new(vec![], HermitianOperator::zeros(3)).unwrap();
        assert_eq!(w0.ground_energy(&[]).unwrap(), 0.0);
    }

    #[test]
    fn potential_is_linear() {
        let t = qubit_theory(0.3);
        let p = t.apply_potential(&[3.0]).unwrap();
        assert!((p.matrix() - pauli()[2].clone() * c(3.0, 0.0)).norm() < 1e-15);
        assert!(t.apply_potential(&[0.0]).unwrap().matrix().norm() == 0.0);
        assert!(matches!(t.apply_potential(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn density_of_up_state_is_one() {
        let t = qubit_theory(0.0);
        let up = QuantumState::pure(CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])).unwrap();
        assert_eq!(t.density_of_state(&up).unwrap().components(), &[1.0]);
        let mixed = QuantumState::maximally_mixed(2);
        assert!(t.density_of_state(&mixed).unwrap()[0].abs() < 1e-15);
    }

    #[test]
    fn ground_states_handle_degeneracy() {
        let t = qubit_theory(1.0);
        let gs = t.ground_states(&[0.0], 1e-9).unwrap();
        assert_eq!(gs.len(), 1);
        let psi = gs[0].amplitudes().unwrap();
        let expected = CVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]) / c(2f64.sqrt(), 0.0);
        assert!((psi.dotc(&expected).norm() - 1.0).abs() < 1e-12);

        let t0 = qubit_theory(0.0);
        let gs = t0.ground_states(&[-0.7], 1e-9).unwrap();
        assert_eq!(gs.len(), 1);
        assert!((gs[0].amplitudes().unwrap()[0].norm() - 1.0).abs() < 1e-12);
        assert_eq!(t0.ground_states(&[0.0], 1e-9).unwrap().len(), 2);
        assert!(t0.ground_states(&[0.0], 0.0).is_err());
    }

    #[test]
    fn rejects_non_hermitian_and_dependent_input() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(HermitianOperator::new(m), Err(Error::NonHermitianInput(_))));
        let z = HermitianOperator::new(pauli()[2].clone()).unwrap();
        let r = FunctionalTheoryModel::new(vec![z.clone(), z.scaled(2.0)], HermitianOperator::zeros(2));
        assert!(matches!(r, Err(Error::LinearlyDependentBasis { rank: 1, count: 2 })));
        let r = FunctionalTheoryModel::new(vec![z], HermitianOperator::zeros(3));
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn convexify_lifts_operators() {
        let t = qubit_theory(1.0);
        let t1 = t.convexify(1).unwrap();
        assert!((t1.interaction().matrix() - t.interaction().matrix()).norm() < 1e-15);
        let t2 = t.convexify(2).unwrap();
        assert_eq!(t2.hilbert_dim(), 4);
        assert!((t2.ground_energy(&[0.4]).unwrap() - t.ground_energy(&[0.4]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn identity_preimage_of_spin_chain_is_trivial() {
        let t = spin_chain_theory(3, 0.5).unwrap();
        assert_eq!(t.identity_preimage_dim(), 0);
        assert!(t.max_commutator() < 1e-12);
    }

    #[test]
    fn config_round_trip() {
        let cfg: TheoryConfig = serde_json::from_str(r#"{"kind":"qubit","lambda":2.0}"#).unwrap();
        assert_eq!(cfg, TheoryConfig::qubit(2.0));
        let t = build_theory(&cfg).unwrap();
        assert!((t.interaction().matrix()[(0, 1)].re - 2.0).abs() < 1e-15);
        let bad: TheoryConfig = serde_json::from_str(r#"{"kind":"bosonic","d":3}"#).unwrap();
        assert!(matches!(build_theory(&bad), Err(Error::Config(_))));
        let explicit = r#"{"kind":"explicit","matrices":{"potentials":[[[[1,0],[0,0]],[[0,0],[-1,0]]]],
            "interaction":[[[0,0],[1,0]],[[1,0],[0,0]]]}}"#;
        let t = build_theory(&serde_json::from_str(explicit).unwrap()).unwrap();
        assert_eq!(t.basis_size(), 1);
    }
}
