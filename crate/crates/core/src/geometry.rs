//! Convex polytopes in dual representation.
//!
//! Hulls of integral point sets are computed exactly over the integers: facet
//! normals come from signed maximal minors, so facet identity never depends on
//! floating-point tolerances. Non-integral point sets use the same subset
//! enumeration in orthonormal affine coordinates with a merging tolerance.

use std::collections::BTreeSet;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

const POINT_MERGE_TOL: f64 = 1e-8;
const FACET_MERGE_TOL: f64 = 1e-7;
const INTEGRAL_TOL: f64 = 1e-9;

/// Inequality `⟨x, S⟩ − ν ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetInequality {
    pub normal: DVector<f64>,
    pub offset: f64,
    /// Unit normal tangent to the affine hull of the polytope.
    pub normalized: bool,
    /// Primitive integer normal and offset when the polytope was built exactly.
    pub lattice: Option<(Vec<i128>, i128)>,
}

impl FacetInequality {
    pub fn new(normal: DVector<f64>, offset: f64) -> Self {
        Self { normal, offset, normalized: false, lattice: None }
    }

    /// `D(x) = ⟨x, S⟩ − ν`.
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - self.offset
    }

    /// Rescales `(S, ν)` so that `⟨η, S⟩ = 1`.
    pub fn rescaled_for(&self, eta: &[f64]) -> Result<Self> {
        let pairing: f64 = self.normal.iter().zip(eta).map(|(a, b)| a * b).sum();
        if pairing <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "direction is not inward for the facet (pairing {pairing:.3e})"
            )));
        }
        Ok(Self {
            normal: &self.normal / pairing,
            offset: self.offset / pairing,
            normalized: false,
            lattice: self.lattice.clone(),
        })
    }

    /// Projects the normal onto the tangent space of `hull` and rescales to unit norm.
    pub fn normalized_in(&self, hull: &AffineHull) -> Result<Self> {
        let t = &hull.tangent;
        let projected = t * (t.transpose() * &self.normal);
        let norm = projected.norm();
        if norm < 1e-12 {
            return Err(Error::InvalidArgument("normal is orthogonal to the affine hull".into()));
        }
        let base: f64 = projected.dot(&hull.offset);
        let shift = self.normal.dot(&hull.offset) - self.offset;
        Ok(Self { normal: &projected / norm, offset: (base - shift) / norm, normalized: true, lattice: None })
    }
}

/// Affine subspace `offset + span(tangent)` with orthonormal tangent columns.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineHull {
    pub offset: DVector<f64>,
    pub tangent: DMatrix<f64>,
}

impl AffineHull {
    pub fn dim(&self) -> usize {
        self.tangent.ncols()
    }

    /// Distance of `x` from the affine subspace.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let d = DVector::from_column_slice(x) - &self.offset;
        let proj = &self.tangent * (self.tangent.transpose() * &d);
        (d - proj).norm()
    }

    pub fn coordinates(&self, x: &[f64]) -> DVector<f64> {
        self.tangent.transpose() * (DVector::from_column_slice(x) - &self.offset)
    }
}

/// Convex polytope with both vertex and inequality descriptions.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub ambient_dim: usize,
    pub vertices: Vec<DVector<f64>>,
    pub inequalities: Vec<FacetInequality>,
    pub affine_hull: AffineHull,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InequalityJson {
    #[serde(rename = "S")]
    pub normal: Vec<f64>,
    pub nu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolytopeJson {
    pub vertices: Vec<Vec<f64>>,
    pub inequalities: Vec<InequalityJson>,
}

impl Polytope {
    pub fn dim(&self) -> usize {
        self.affine_hull.dim()
    }

    /// Convex hull of a finite point set.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let ambient_dim = points.first().map(Vec::len).ok_or(Error::DegeneratePolytope)?;
        if points.iter().any(|p| p.len() != ambient_dim) {
            return Err(Error::InvalidArgument("points of mixed dimension".into()));
        }
        let distinct = dedup_points(points);
        let integral: Option<Vec<Vec<i128>>> = distinct.iter().map(|p| linalg::as_integral(p, INTEGRAL_TOL)).collect();
        match integral {
            Some(ints) => Ok(exact_hull(&distinct, &ints)),
            None => Ok(float_hull(&distinct)),
        }
    }

    pub fn to_json(&self) -> PolytopeJson {
        PolytopeJson {
            vertices: self.vertices.iter().map(|v| v.as_slice().to_vec()).collect(),
            inequalities: self
                .inequalities
                .iter()
                .map(|f| InequalityJson { normal: f.normal.as_slice().to_vec(), nu: f.offset })
                .collect(),
        }
    }

    /// Largest violation of the description at `x`: distance from the affine hull
    /// or the most negative slack.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst = self.affine_hull.distance(x);
        for f in &self.inequalities {
            worst = worst.max(-f.slack(x));
        }
        worst.max(0.0)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.violation(x) <= tol
    }

    /// Smallest slack over all facets (zero on the boundary).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        self.inequalities.iter().map(|f| f.slack(x)).fold(f64::INFINITY, f64::min)
    }

    pub fn in_relative_interior(&self, x: &[f64], tol: f64) -> bool {
        self.affine_hull.distance(x) <= tol && (self.inequalities.is_empty() || self.boundary_distance(x) > tol)
    }

    /// Polytope `{x : ⟨x, S_i⟩ ≥ ν_i}` for a full-dimensional system of inequalities.
    /// Returns the polytope together with the indices of the inequalities that
    /// define facets.
    pub fn from_halfspaces(halfspaces: &[FacetInequality], ambient_dim: usize) -> Result<(Self, Vec<usize>)> {
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        for combo in (0..halfspaces.len()).combinations(ambient_dim) {
            let a = DMatrix::from_fn(ambient_dim, ambient_dim, |i, j| halfspaces[combo[i]].normal[j]);
            let b = DVector::from_fn(ambient_dim, |i, _| halfspaces[combo[i]].offset);
            let Some(inv) = a.clone().try_inverse() else { continue };
            if a.norm() * inv.norm() > 1e12 {
                continue;
            }
            let x = inv * b;
            if halfspaces.iter().all(|h| h.slack(x.as_slice()) >= -1e-9) {
                vertices.push(x.as_slice().to_vec());
            }
        }
        if vertices.is_empty() {
            return Err(Error::NotFullDimensional { expected: ambient_dim, found: 0 });
        }
        let poly = Self::from_points(&vertices)?;
        if poly.dim() < ambient_dim {
            return Err(Error::NotFullDimensional { expected: ambient_dim, found: poly.dim() });
        }
        let facets: Vec<usize> = (0..halfspaces.len())
            .filter(|&i| {
                let tight: Vec<&DVector<f64>> =
                    poly.vertices.iter().filter(|v| halfspaces[i].slack(v.as_slice()).abs() <= 1e-9).collect();
                affine_rank(&tight) + 1 >= ambient_dim
            })
            .collect();
        Ok((poly, facets))
    }
}

fn affine_rank(points: &[&DVector<f64>]) -> usize {
    if points.len() < 2 {
        return 0;
    }
    let d = points[0].len();
    let m = DMatrix::from_fn(points.len() - 1, d, |i, j| points[i + 1][j] - points[0][j]);
    linalg::absolute_rank(&m, 1e-9)
}

fn dedup_points(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in points {
        let seen =
            out.iter().any(|q| q.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) <= POINT_MERGE_TOL);
        if !seen {
            out.push(p.clone());
        }
    }
    out
}

fn dot_i(a: &[i128], b: &[i128]) -> i128 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn to_f64(v: &[i128]) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().map(|&x| x as f64))
}

fn point_hull(points: &[Vec<f64>]) -> Polytope {
    let p = DVector::from_column_slice(&points[0]);
    Polytope {
        ambient_dim: p.len(),
        vertices: vec![p.clone()],
        inequalities: vec![],
        affine_hull: AffineHull { offset: p.clone(), tangent: DMatrix::zeros(p.len(), 0) },
    }
}

fn orthonormal_hull(points: &[Vec<f64>], directions: &[DVector<f64>]) -> AffineHull {
    let d = points[0].len();
    let m = DMatrix::from_fn(d, directions.len(), |i, j| directions[j][i]);
    AffineHull { offset: DVector::from_column_slice(&points[0]), tangent: linalg::range_space(&m, 1e-12) }
}

fn exact_hull(points: &[Vec<f64>], ints: &[Vec<i128>]) -> Polytope {
    let d = ints[0].len();
    let diffs: Vec<Vec<i128>> = ints.iter().map(|p| p.iter().zip(&ints[0]).map(|(a, b)| a - b).collect()).collect();
    let mut basis: Vec<Vec<i128>> = Vec::new();
    for v in diffs.iter().skip(1) {
        let mut trial = basis.clone();
        trial.push(v.clone());
        if linalg::int_rank(&trial) == trial.len() {
            basis = trial;
        }
    }
    let m = basis.len();
    if m == 0 {
        return point_hull(points);
    }
    let hull = orthonormal_hull(points, &basis.iter().map(|v| to_f64(v)).collect::<Vec<_>>());

    let mut found: BTreeSet<(Vec<i128>, i128)> = BTreeSet::new();
    for combo in (0..ints.len()).combinations(m) {
        let rows: Vec<Vec<i128>> = combo[1..]
            .iter()
            .map(|&i| {
                let diff: Vec<i128> = ints[i].iter().zip(&ints[combo[0]]).map(|(a, b)| a - b).collect();
                basis.iter().map(|t| dot_i(&diff, t)).collect()
            })
            .collect();
        if linalg::int_rank(&rows) < m - 1 {
            continue;
        }
        let coeffs = linalg::int_kernel_vector(&rows, m);
        let normal: Vec<i128> =
            linalg::primitive((0..d).map(|k| basis.iter().zip(&coeffs).map(|(t, c)| t[k] * c).sum()).collect());
        if normal.iter().all(|&x| x == 0) {
            continue;
        }
        let level = dot_i(&normal, &ints[combo[0]]);
        let values: Vec<i128> = ints.iter().map(|p| dot_i(&normal, p)).collect();
        if values.iter().all(|&v| v >= level) {
            found.insert((normal, level));
        } else if values.iter().all(|&v| v <= level) {
            found.insert((normal.iter().map(|x| -x).collect(), -level));
        }
    }

    let inequalities: Vec<FacetInequality> = found
        .into_iter()
        .map(|(n, h)| {
            let nf = to_f64(&n);
            let norm = nf.norm();
            FacetInequality { normal: nf / norm, offset: h as f64 / norm, normalized: true, lattice: Some((n, h)) }
        })
        .collect();

    let vertices = ints
        .iter()
        .zip(points)
        .filter(|(p, _)| {
            let tight: Vec<Vec<i128>> = inequalities
                .iter()
                .filter_map(|f| f.lattice.as_ref())
                .filter(|(n, h)| dot_i(n, p) == *h)
                .map(|(n, _)| n.clone())
                .collect();
            linalg::int_rank(&tight) == m
        })
        .map(|(_, p)| DVector::from_column_slice(p))
        .collect();

    Polytope { ambient_dim: d, vertices, inequalities, affine_hull: hull }
}

fn float_hull(points: &[Vec<f64>]) -> Polytope {
    let d = points[0].len();
    let diffs: Vec<DVector<f64>> = points
        .iter()
        .skip(1)
        .map(|p| DVector::from_iterator(d, p.iter().zip(&points[0]).map(|(a, b)| a - b)))
        .collect();
    if diffs.is_empty() {
        return point_hull(points);
    }
    let scale = diffs.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    let dm = DMatrix::from_fn(d, diffs.len(), |i, j| diffs[j][i]);
    let svd = dm.svd(true, false);
    let u = svd.u.expect("u");
    let keep: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > POINT_MERGE_TOL * scale).collect();
    let m = keep.len();
    if m == 0 {
        return point_hull(points);
    }
    let tangent = DMatrix::from_fn(d, m, |i, j| u[(i, keep[j])]);
    let offset = DVector::from_column_slice(&points[0]);
    let coords: Vec<DVector<f64>> =
        points.iter().map(|p| tangent.transpose() * (DVector::from_column_slice(p) - &offset)).collect();

    let mut found: Vec<(DVector<f64>, f64)> = Vec::new();
    for combo in (0..points.len()).combinations(m) {
        let rows = DMatrix::from_fn(m - 1, m, |i, j| coords[combo[i + 1]][j] - coords[combo[0]][j]);
        let ker = linalg::null_space(&rows, 1e-9);
        if ker.ncols() != 1 {
            continue;
        }
        let a = ker.column(0).into_owned();
        let level = a.dot(&coords[combo[0]]);
        let values: Vec<f64> = coords.iter().map(|q| a.dot(q)).collect();
        let (a, level) = if values.iter().all(|&v| v >= level - FACET_MERGE_TOL * scale) {
            (a, level)
        } else if values.iter().all(|&v| v <= level + FACET_MERGE_TOL * scale) {
            (-a, -level)
        } else {
            continue;
        };
        let dup =
            found.iter().any(|(b, l)| (b - &a).norm() < FACET_MERGE_TOL && (l - level).abs() < FACET_MERGE_TOL * scale);
        if !dup {
            found.push((a, level));
        }
    }

    let inequalities: Vec<FacetInequality> = found
        .into_iter()
        .map(|(a, _)| {
            let n = &tangent * &a;
            let nu = points.iter().map(|p| n.dot(&DVector::from_column_slice(p))).fold(f64::INFINITY, f64::min);
            FacetInequality { normal: n, offset: nu, normalized: true, lattice: None }
        })
        .collect();

    let vertices = points
        .iter()
        .filter(|p| {
            let tight: Vec<&FacetInequality> =
                inequalities.iter().filter(|f| f.slack(p).abs() <= FACET_MERGE_TOL * scale).collect();
            let nm = DMatrix::from_fn(tight.len(), d, |i, j| tight[i].normal[j]);
            linalg::absolute_rank(&nm, 1e-9) == m
        })
        .map(|p| DVector::from_column_slice(p))
        .collect();

    Polytope { ambient_dim: d, vertices, inequalities, affine_hull: AffineHull { offset, tangent } }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_in_plane() {
        let pts = vec![vec![4.0, 0.0], vec![2.0, 2.0], vec![0.0, 4.0]];
        let p = Polytope::from_points(&pts).unwrap();
        assert_eq!(p.dim(), 1);
        assert_eq!(p.vertices.len(), 2);
        assert_eq!(p.inequalities.len(), 2);
        for f in &p.inequalities {
            let (n, _) = f.lattice.as_ref().unwrap();
            assert_eq!(n.iter().sum::<i128>(), 0);
            assert!((f.normal.norm() - 1.0).abs() < 1e-12);
        }
        assert!(p.contains(&[1.0, 3.0], 1e-9));
        assert!(!p.contains(&[5.0, -1.0], 1e-9));
        assert!(!p.contains(&[1.0, 1.0], 1e-9));
    }

    #[test]
    fn cube_from_float_and_exact_paths_agree() {
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push((0..3).map(|b| if i >> b & 1 == 1 { 1.0 } else { -1.0 }).collect::<Vec<f64>>());
        }
        let exact = Polytope::from_points(&pts).unwrap();
        assert_eq!(exact.inequalities.len(), 6);
        assert_eq!(exact.vertices.len(), 8);
        let shifted: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|x| x * 0.5 + 0.1).collect()).collect();
        let float = Polytope::from_points(&shifted).unwrap();
        assert_eq!(float.inequalities.len(), 6);
        assert_eq!(float.vertices.len(), 8);
        assert!(float.contains(&[0.1, 0.1, 0.1], 1e-9));
    }

    #[test]
    fn interior_points_are_not_vertices() {
        let pts = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0], vec![0.5, 0.5]];
        let p = Polytope::from_points(&pts).unwrap();
        assert_eq!(p.vertices.len(), 3);
        assert_eq!(p.inequalities.len(), 3);
    }

    #[test]
    fn halfspace_intersection_reports_facets() {
        let hs = vec![
            FacetInequality::new(DVector::from_vec(vec![1.0, 0.0]), 0.0),
            FacetInequality::new(DVector::from_vec(vec![0.0, 1.0]), 0.0),
            FacetInequality::new(DVector::from_vec(vec![-1.0, 0.0]), -1.0),
            FacetInequality::new(DVector::from_vec(vec![1.0, -1.0]), -1.0),
            FacetInequality::new(DVector::from_vec(vec![0.0, -1.0]), -2.0),
        ];
        let (poly, facets) = Polytope::from_halfspaces(&hs, 2).unwrap();
        assert_eq!(poly.vertices.len(), 4);
        assert_eq!(facets, vec![0, 1, 2, 3]);
    }

    #[test]
    fn rescaling_sets_unit_pairing() {
        let f = FacetInequality::new(DVector::from_vec(vec![2.0, -1.0, -1.0]), -3.0);
        let g = f.rescaled_for(&[0.5, 0.0, 0.0]).unwrap();
        assert!((g.normal[0] * 0.5 - 1.0).abs() < 1e-15);
        assert!(f.rescaled_for(&[-1.0, 0.0, 0.0]).is_err());
    }
}
