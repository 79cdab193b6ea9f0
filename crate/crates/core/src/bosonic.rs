//! Translation-invariant bosons on a ring of `d` sites in the momentum basis.
//!
//! A sector `(d, N, P)` is spanned by permanents with `N` bosons and total
//! momentum `P mod d`. The potentials are the momentum occupation numbers.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{FacetInequality, Polytope};
use crate::linalg::{self, c, CMatrix, C64};
use crate::search;
use crate::theory::{FunctionalTheoryModel, HermitianOperator, InteractionSpec};

/// Boson counts per momentum mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccupationVector(pub Vec<usize>);

impl OccupationVector {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn momentum(&self, d: usize) -> usize {
        self.0.iter().enumerate().map(|(k, &m)| k * m).sum::<usize>() % d
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&m| m as f64).collect()
    }
}

/// Two-body interaction in second quantization.
#[derive(Debug, Clone, PartialEq)]
pub enum BosonicInteraction {
    /// `(1/d) Σ δ_{k1+k2, k3+k4} b†_{k1} b†_{k2} b_{k3} b_{k4}`.
    Hubbard,
    Zero,
    /// `Σ w b†_{k1} b†_{k2} b_{k3} b_{k4}` with explicit coefficients.
    Coefficients(Vec<([usize; 4], C64)>),
}

pub fn interaction_from_spec(d: usize, spec: Option<&InteractionSpec>) -> Result<BosonicInteraction> {
    match spec {
        None => Ok(BosonicInteraction::Hubbard),
        Some(InteractionSpec::Named(name)) => match name.to_ascii_lowercase().as_str() {
            "hubbard" => Ok(BosonicInteraction::Hubbard),
            "zero" | "none" => Ok(BosonicInteraction::Zero),
            other => Err(Error::Config(format!("unknown interaction \"{other}\""))),
        },
        Some(InteractionSpec::Coefficients { coefficients }) => {
            let terms = coefficients
                .iter()
                .map(|t| {
                    if t.modes.iter().any(|&k| k >= d) {
                        return Err(Error::Config(format!("mode index out of range in {:?}", t.modes)));
                    }
                    Ok((t.modes, c(t.value[0], t.value[1])))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(BosonicInteraction::Coefficients(terms))
        }
    }
}

/// Permanents of the sector in descending lexicographic order.
pub fn enumerate_permanents(d: usize, n: usize, p: usize) -> Vec<OccupationVector> {
    fn rec(d: usize, remaining: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == d - 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for m in (0..=remaining).rev() {
            prefix.push(m);
            rec(d, remaining - m, prefix, out);
            prefix.pop();
        }
    }
    if d == 0 || p >= d {
        return vec![];
    }
    let mut all = Vec::new();
    rec(d, n, &mut Vec::with_capacity(d), &mut all);
    all.into_iter().map(OccupationVector).filter(|m| m.momentum(d) == p).collect()
}

/// Applies `b_k` (annihilate) or `b†_k` (create); returns the radicand of the
/// bosonic factor or `None` when the result vanishes.
fn ladder(m: &mut [usize], k: usize, create: bool) -> Option<u128> {
    if create {
        m[k] += 1;
        Some(m[k] as u128)
    } else if m[k] == 0 {
        None
    } else {
        let r = m[k] as u128;
        m[k] -= 1;
        Some(r)
    }
}

/// Matrix elements of `b†_{k1} b†_{k2} b_{k3} b_{k4}` on `m`: target occupation
/// and integer radicand of the amplitude.
fn two_body(m: &[usize], k: [usize; 4]) -> Option<(Vec<usize>, u128)> {
    let mut state = m.to_vec();
    let mut rad = 1u128;
    rad *= ladder(&mut state, k[3], false)?;
    rad *= ladder(&mut state, k[2], false)?;
    rad *= ladder(&mut state, k[1], true)?;
    rad *= ladder(&mut state, k[0], true)?;
    Some((state, rad))
}

fn interaction_matrix(d: usize, perms: &[OccupationVector], interaction: &BosonicInteraction) -> CMatrix {
    let dim = perms.len();
    let index: HashMap<&[usize], usize> = perms.iter().enumerate().map(|(i, m)| (m.0.as_slice(), i)).collect();
    let mut w = CMatrix::zeros(dim, dim);
    let terms: Vec<([usize; 4], C64)> = match interaction {
        BosonicInteraction::Zero => vec![],
        BosonicInteraction::Coefficients(t) => t.clone(),
        BosonicInteraction::Hubbard => {
            let mut t = Vec::new();
            for k1 in 0..d {
                for k2 in 0..d {
                    for k3 in 0..d {
                        let k4 = (k1 + k2 + 2 * d - k3) % d;
                        t.push(([k1, k2, k3, k4], c(1.0 / d as f64, 0.0)));
                    }
                }
            }
            t
        }
    };
    for (col, m) in perms.iter().enumerate() {
        for (k, coeff) in &terms {
            if let Some((target, rad)) = two_body(&m.0, *k) {
                if let Some(&row) = index.get(target.as_slice()) {
                    w[(row, col)] += coeff * (rad as f64).sqrt();
                }
            }
        }
    }
    w
}

/// Momentum-space Hubbard interaction on the sector.
pub fn hubbard_interaction(d: usize, n: usize, p: usize) -> Result<HermitianOperator> {
    let perms = enumerate_permanents(d, n, p);
    if perms.is_empty() {
        return Err(Error::InvalidArgument(format!("empty sector (d={d}, N={n}, P={p})")));
    }
    HermitianOperator::new(interaction_matrix(d, &perms, &BosonicInteraction::Hubbard))
}

/// Theory with occupation-number potentials on the sector.
pub fn build_bosonic_theory(
    d: usize,
    n: usize,
    p: usize,
    interaction: &BosonicInteraction,
) -> Result<FunctionalTheoryModel> {
    let perms = enumerate_permanents(d, n, p);
    if perms.is_empty() {
        return Err(Error::Config(format!("empty sector (d={d}, N={n}, P={p})")));
    }
    let w = HermitianOperator::new(interaction_matrix(d, &perms, interaction))?;
    let basis =
        (0..d).map(|k| HermitianOperator::diagonal(&perms.iter().map(|m| m.0[k] as f64).collect::<Vec<_>>())).collect();
    FunctionalTheoryModel::new_non_injective(basis, w)?.with_labels((0..d).map(|k| format!("n{k}")).collect())
}

/// `T`, its pseudo-inverse and kernel for the exact parametrization of the
/// classical fiber by facet distances.
#[derive(Debug, Clone)]
pub struct FunctionalFormModel {
    /// `T[j][α] = D^{(j)}(m^{(α)})`.
    pub t: DMatrix<f64>,
    pub t_plus: DMatrix<f64>,
    /// Columns span `ker T`.
    pub kernel_basis: DMatrix<f64>,
    pub constraints: Vec<FacetInequality>,
    /// Lattice-primitive normals and offsets `(n, h, g)` with `D = (⟨n,m⟩ − h)/g`.
    lattice: Vec<(Vec<f64>, f64, f64)>,
}

impl FunctionalFormModel {
    /// Facet distances `D^{(j)}(ρ)` in lattice units.
    pub fn distances(&self, rho: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.lattice.len(),
            self.lattice.iter().map(|(n, h, g)| (n.iter().zip(rho).map(|(a, b)| a * b).sum::<f64>() - h) / g),
        )
    }

    /// Classical weights `y = T⁺D(ρ) + Kx`.
    pub fn classical_weights(&self, rho: &[f64], x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.kernel_basis.ncols() {
            return Err(Error::DimensionMismatch { expected: self.kernel_basis.ncols(), found: x.len() });
        }
        Ok(&self.t_plus * self.distances(rho) + &self.kernel_basis * DVector::from_column_slice(x))
    }

    /// Value of the functional form for fixed kernel coordinates `x`, minimized
    /// over the phases.
    pub fn evaluate(&self, interaction: &HermitianOperator, rho: &[f64], x: &[f64], seed: u64) -> Result<f64> {
        let y = self.classical_weights(rho, x)?;
        if y.iter().any(|&v| v < -1e-12) {
            return Err(Error::NotRepresentable(-y.min()));
        }
        let amps: Vec<f64> = y.iter().map(|v| v.max(0.0).sqrt()).collect();
        Ok(search::minimize_phases(interaction.matrix(), &amps, 16, seed).0)
    }
}

/// Builds `T` with rows ordered descending lexicographically.
pub fn functional_form(domain: &Polytope, permanents: &[OccupationVector]) -> Result<FunctionalFormModel> {
    let mut rows: Vec<(Vec<f64>, FacetInequality, (Vec<f64>, f64, f64))> = Vec::new();
    for f in &domain.inequalities {
        let (n, h) =
            f.lattice.as_ref().ok_or_else(|| Error::InvalidArgument("domain lacks exact lattice normals".into()))?;
        let mut g = 0i128;
        for a in n {
            for b in n {
                g = linalg::gcd(g, a - b);
            }
        }
        if g == 0 {
            g = n.iter().fold(0, |acc, &x| linalg::gcd(acc, x)).max(1);
        }
        let nf: Vec<f64> = n.iter().map(|&x| x as f64).collect();
        let lat = (nf, *h as f64, g as f64);
        let row: Vec<f64> = permanents
            .iter()
            .map(|m| (lat.0.iter().zip(&m.0).map(|(a, &b)| a * b as f64).sum::<f64>() - lat.1) / lat.2)
            .collect();
        rows.push((row, f.clone(), lat));
    }
    rows.sort_by(|a, b| {
        b.0.iter().zip(&a.0).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let t = DMatrix::from_fn(rows.len(), permanents.len(), |i, j| rows[i].0[j]);
    let t_plus = linalg::pinv(&t, 1e-10);
    let kernel_basis = linalg::null_space(&t, 1e-10);
    Ok(FunctionalFormModel {
        t,
        t_plus,
        kernel_basis,
        constraints: rows.iter().map(|r| r.1.clone()).collect(),
        lattice: rows.into_iter().map(|r| r.2).collect(),
    })
}

/// Functional in the simplex setting: one permanent per vertex, so the fiber
/// is a point with `|c_β|² = D^{(β)}(ρ)/L_β` and only the phases are free.
pub fn simplex_functional(
    theory: &FunctionalTheoryModel,
    domain: &Polytope,
    permanents: &[OccupationVector],
    rho: &[f64],
    seed: u64,
) -> Result<f64> {
    let n = permanents.len();
    if domain.vertices.len() != n || theory.hilbert_dim() != n || domain.dim() + 1 != n {
        return Err(Error::NotSimplexSetting);
    }
    let form = functional_form(domain, permanents)?;
    let lengths: Vec<f64> = (0..n).map(|j| form.t[(j, j)]).collect();
    let off_diag = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j);
    if off_diag.clone().any(|(i, j)| form.t[(i, j)].abs() > 1e-12) || lengths.iter().any(|&l| l <= 0.0) {
        return Err(Error::NotSimplexSetting);
    }
    let dists = form.distances(rho);
    if dists.iter().any(|&v| v < -1e-9) {
        return Err(Error::NotRepresentable(-dists.min()));
    }
    let amps: Vec<f64> = dists.iter().zip(&lengths).map(|(dv, l)| (dv.max(0.0) / l).sqrt()).collect();
    Ok(search::minimize_phases(theory.interaction().matrix(), &amps, 16, seed).0)
}

/// Permanent table as CSV: row index followed by occupation numbers.
pub fn permanent_table_csv(perms: &[OccupationVector]) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let d = perms.first().map_or(0, |m| m.0.len());
    let mut header = vec!["index".to_string()];
    header.extend((0..d).map(|k| format!("m{k}")));
    wtr.write_record(&header)?;
    for (i, m) in perms.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(m.0.iter().map(|x| x.to_string()));
        wtr.write_record(&row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Nonzero matrix entries as CSV rows `(row, col, re, im)`.
pub fn coordinate_csv(op: &HermitianOperator) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["row", "col", "re", "im"])?;
    let m = op.matrix();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            if z.norm() > 0.0 {
                wtr.write_record([i.to_string(), j.to_string(), format!("{:.16e}", z.re), format!("{:.16e}", z.im)])?;
            }
        }
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abelian::{representable_polytope, weight_decomposition};

    fn occ(v: &[usize]) -> OccupationVector {
        OccupationVector(v.to_vec())
    }

    /// Hubbard matrix on the full `N`-boson space with float ladder factors.
    fn fock_hubbard(d: usize, n: usize) -> (Vec<Vec<usize>>, DMatrix<f64>) {
        let mut basis: Vec<Vec<usize>> = Vec::new();
        let mut stack = vec![(Vec::new(), n)];
        while let Some((pre, rem)) = stack.pop() {
            if pre.len() == d - 1 {
                let mut v: Vec<usize> = pre.clone();
                v.push(rem);
                basis.push(v);
                continue;
            }
            for m in 0..=rem {
                let mut p = pre.clone();
                p.push(m);
                stack.push((p, rem - m));
            }
        }
        let dim = basis.len();
        let idx = |v: &Vec<usize>| basis.iter().position(|b| b == v);
        let mut w = DMatrix::<f64>::zeros(dim, dim);
        for (col, m) in basis.iter().enumerate() {
            for k1 in 0..d {
                for k2 in 0..d {
                    for k3 in 0..d {
                        for k4 in 0..d {
                            if (k1 + k2) % d != (k3 + k4) % d {
                                continue;
                            }
                            let mut s = m.clone();
                            let mut amp = 1.0f64;
                            for &(k, create) in &[(k4, false), (k3, false), (k2, true), (k1, true)] {
                                if create {
                                    s[k] += 1;
                                    amp *= (s[k] as f64).sqrt();
                                } else {
                                    if s[k] == 0 {
                                        amp = 0.0;
                                        break;
                                    }
                                    amp *= (s[k] as f64).sqrt();
                                    s[k] -= 1;
                                }
                            }
                            if amp != 0.0 {
                                let row = idx(&s).unwrap();
                                w[(row, col)] += amp / d as f64;
                            }
                        }
                    }
                }
            }
        }
        (basis, w)
    }

    #[test]
    fn permanents_of_small_sectors() {
        let mut a = enumerate_permanents(3, 3, 0);
        a.sort();
        let mut want = vec![occ(&[3, 0, 0]), occ(&[0, 3, 0]), occ(&[0, 0, 3]), occ(&[1, 1, 1])];
        want.sort();
        assert_eq!(a, want);
        let mut b = enumerate_permanents(3, 3, 1);
        b.sort();
        let mut want = vec![occ(&[2, 1, 0]), occ(&[0, 2, 1]), occ(&[1, 0, 2])];
        want.sort();
        assert_eq!(b, want);
        assert_eq!(enumerate_permanents(2, 4, 0), vec![occ(&[4, 0]), occ(&[2, 2]), occ(&[0, 4])]);
    }

    #[test]
    fn sectors_partition_the_fock_space() {
        for d in 1..5 {
            for n in 0..7 {
                let total: usize = (0..d).map(|p| enumerate_permanents(d, n, p).len()).sum();
                let binom = (1..d).fold(1usize, |acc, i| acc * (n + i) / i);
                assert_eq!(total, binom, "d={d} n={n}");
            }
        }
    }

    #[test]
    fn hubbard_matches_fock_oracle_and_respects_momentum() {
        for (d, n) in [(3, 4), (2, 3), (4, 3), (3, 1)] {
            let (fock, wf) = fock_hubbard(d, n);
            for (i, a) in fock.iter().enumerate() {
                for (j, b) in fock.iter().enumerate() {
                    let pa = OccupationVector(a.clone()).momentum(d);
                    let pb = OccupationVector(b.clone()).momentum(d);
                    if pa != pb {
                        assert_eq!(wf[(i, j)], 0.0);
                    }
                }
            }
            for p in 0..d {
                let perms = enumerate_permanents(d, n, p);
                let w = hubbard_interaction(d, n, p).unwrap();
                for (i, a) in perms.iter().enumerate() {
                    for (j, b) in perms.iter().enumerate() {
                        let fi = fock.iter().position(|v| *v == a.0).unwrap();
                        let fj = fock.iter().position(|v| *v == b.0).unwrap();
                        assert!((w.matrix()[(i, j)].re - wf[(fi, fj)]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn hubbard_pair_hopping_element() {
        let n = 6;
        let perms = enumerate_permanents(3, n, 0);
        let w = hubbard_interaction(3, n, 0).unwrap();
        let row = perms.iter().position(|m| m.0 == [1, n - 2, 1]).unwrap();
        let col = perms.iter().position(|m| m.0 == [0, n, 0]).unwrap();
        let want = 2.0 / 3.0 * ((n * (n - 1)) as f64).sqrt();
        assert!((w.matrix()[(row, col)].re - want).abs() < 1e-12);
    }

    #[test]
    fn number_operators_sum_to_particle_number() {
        let t = build_bosonic_theory(3, 3, 0, &BosonicInteraction::Hubbard).unwrap();
        assert_eq!(t.hilbert_dim(), 4);
        let op = t.apply_potential(&[1.0, 1.0, 1.0]).unwrap();
        assert!((op.matrix() - CMatrix::identity(4, 4) * c(3.0, 0.0)).norm() < 1e-12);
        assert!(t.max_commutator() < 1e-14);
    }

    #[test]
    fn explicit_coefficients_reproduce_hubbard() {
        let d = 3;
        let mut terms = Vec::new();
        for k1 in 0..d {
            for k2 in 0..d {
                for k3 in 0..d {
                    let k4 = (k1 + k2 + 2 * d - k3) % d;
                    terms.push(([k1, k2, k3, k4], c(1.0 / 3.0, 0.0)));
                }
            }
        }
        let a = build_bosonic_theory(3, 5, 2, &BosonicInteraction::Coefficients(terms)).unwrap();
        let b = build_bosonic_theory(3, 5, 2, &BosonicInteraction::Hubbard).unwrap();
        assert!((a.interaction().matrix() - b.interaction().matrix()).norm() < 1e-12);
    }

    #[test]
    fn functional_form_constraint_recovery() {
        let perms = enumerate_permanents(3, 6, 1);
        let t = build_bosonic_theory(3, 6, 1, &BosonicInteraction::Hubbard).unwrap();
        let poly = representable_polytope(&weight_decomposition(&t).unwrap()).unwrap();
        let form = functional_form(&poly, &perms).unwrap();
        let y: Vec<f64> = (0..perms.len()).map(|i| (i + 1) as f64).collect();
        let total: f64 = y.iter().sum();
        let y: Vec<f64> = y.iter().map(|v| v / total).collect();
        let rho: Vec<f64> = (0..3).map(|k| perms.iter().zip(&y).map(|(m, w)| m.0[k] as f64 * w).sum()).collect();
        let lhs = &form.t * DVector::from_vec(y);
        let rhs = form.distances(&rho);
        assert!((lhs - rhs).norm() < 1e-10);
        let tt = &form.t * &form.t_plus * &form.t;
        assert!((tt - &form.t).norm() < 1e-9);
        assert!((&form.t * &form.kernel_basis).norm() < 1e-10);
    }
}
