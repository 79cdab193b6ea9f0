//! Dense linear-algebra helpers shared by the numerical modules.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues in ascending order.
pub fn eigh(m: &CMatrix) -> Result<(DVector<f64>, CMatrix)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((DVector::zeros(0), CMatrix::zeros(0, 0)));
    }
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigensolverFailure("non-finite eigenvalue".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Real eigen-decomposition of a symmetric matrix, ascending.
pub fn eigh_real(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

fn padded(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() >= m.ncols() {
        m.clone()
    } else {
        let mut p = DMatrix::zeros(m.ncols(), m.ncols());
        p.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
        p
    }
}

/// Singular values plus right singular vectors (columns) of `m`, padded so that
/// every column direction is represented.
fn full_svd(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let p = padded(m);
    if p.ncols() == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let svd = p.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    (svd.singular_values, vt.transpose())
}

/// Orthonormal basis (as columns) of the kernel of `m`; singular values below
/// `rel_cutoff * sigma_max` count as zero.
pub fn null_space(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let ncols = m.ncols();
    if ncols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(ncols, ncols);
    }
    let (sv, v) = full_svd(m);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let cut = if smax > 0.0 { rel_cutoff * smax } else { f64::INFINITY };
    let cols: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] <= cut).collect();
    let mut out = DMatrix::zeros(ncols, cols.len());
    for (k, &i) in cols.iter().enumerate() {
        out.set_column(k, &v.column(i));
    }
    out
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn range_space(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&i| smax > 0.0 && svd.singular_values[i] > rel_cutoff * smax).collect();
    let mut out = DMatrix::zeros(m.nrows(), cols.len());
    for (k, &i) in cols.iter().enumerate() {
        out.set_column(k, &u.column(i));
    }
    out
}

pub fn numerical_rank(m: &DMatrix<f64>, rel_cutoff: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_cutoff * smax).count()
}

/// Rank with an absolute singular-value cutoff.
pub fn absolute_rank(m: &DMatrix<f64>, cutoff: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    m.clone().svd(false, false).singular_values.iter().filter(|&&s| s > cutoff).count()
}

/// Moore-Penrose inverse with singular values below `rel_cutoff * sigma_max` dropped.
pub fn pinv(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u");
    let vt = svd.v_t.as_ref().expect("v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut out = DMatrix::zeros(c, r);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if smax > 0.0 && s > rel_cutoff * smax {
            out += (vt.row(k).transpose() * u.column(k).transpose()) / s;
        }
    }
    out
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel_cutoff: f64) -> DVector<f64> {
    pinv(a, rel_cutoff) * b
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Flattens a complex matrix into a real vector of (re, im) pairs.
pub fn flatten_complex(m: &CMatrix) -> DVector<f64> {
    let mut out = DVector::zeros(2 * m.len());
    for (k, z) in m.iter().enumerate() {
        out[2 * k] = z.re;
        out[2 * k + 1] = z.im;
    }
    out
}

/// Splits a complex vector into its real coordinates `(re..., im...)`.
pub fn to_real(v: &CVector) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

pub fn from_real(x: &DVector<f64>) -> CVector {
    let n = x.len() / 2;
    CVector::from_fn(n, |i, _| c(x[i], x[i + n]))
}

/// Expectation value `⟨ψ|A|ψ⟩` assuming `A` Hermitian, returned with its imaginary residue.
pub fn expectation(a: &CMatrix, psi: &CVector) -> C64 {
    psi.dotc(&(a * psi))
}

pub fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Exact determinant of a square integer matrix (fraction-free elimination).
pub fn int_det(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut a: Vec<Vec<i128>> = m.to_vec();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
            a[i][k] = 0;
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

/// Exact rank of an integer matrix given as rows.
pub fn int_rank(rows: &[Vec<i128>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let ncols = rows[0].len();
    let mut a: Vec<Vec<i128>> = rows.to_vec();
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) = (rank..a.len()).find(|&r| a[r][col] != 0) else {
            continue;
        };
        a.swap(rank, p);
        for r in 0..a.len() {
            if r != rank && a[r][col] != 0 {
                let f = a[rank][col];
                let g = a[r][col];
                let mut h = 0;
                for j in 0..ncols {
                    a[r][j] = a[r][j] * f - a[rank][j] * g;
                    h = gcd(h, a[r][j]);
                }
                if h > 1 {
                    a[r].iter_mut().for_each(|x| *x /= h);
                }
            }
        }
        rank += 1;
        if rank == a.len() {
            break;
        }
    }
    rank
}

/// Integer vector spanning the kernel of a `(k-1) x k` integer matrix of full
/// row rank, computed from signed maximal minors and reduced to primitive form.
pub fn int_kernel_vector(rows: &[Vec<i128>], k: usize) -> Vec<i128> {
    let mut out = vec![0i128; k];
    for (j, slot) in out.iter_mut().enumerate() {
        let minor: Vec<Vec<i128>> =
            rows.iter().map(|r| r.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, &x)| x).collect()).collect();
        let d = int_det(&minor);
        *slot = if j % 2 == 0 { d } else { -d };
    }
    primitive(out)
}

pub fn primitive(mut v: Vec<i128>) -> Vec<i128> {
    let g = v.iter().fold(0, |acc, &x| gcd(acc, x));
    if g > 1 {
        v.iter_mut().for_each(|x| *x /= g);
    }
    v
}

/// Returns the vector rounded to integers if every entry is within `tol` of one.
pub fn as_integral(v: &[f64], tol: f64) -> Option<Vec<i128>> {
    v.iter()
        .map(|&x| {
            let r = x.round();
            ((x - r).abs() <= tol && r.abs() < 1e15).then_some(r as i128)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_sorts_ascending() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, -2.0), c(0.0, 2.0), c(1.0, 0.0)]);
        let (vals, vecs) = eigh(&m).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-12 && (vals[1] - 3.0).abs() < 1e-12);
        let v0 = vecs.column(0).into_owned();
        let r = &m * &v0 - v0.clone() * c(vals[0], 0.0);
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn pinv_of_wide_matrix() {
        let t = DMatrix::from_row_slice(2, 3, &[4.0, 2.0, 0.0, 0.0, 2.0, 4.0]);
        let p = pinv(&t, 1e-10);
        let expected = DMatrix::from_row_slice(3, 2, &[5.0, -1.0, 2.0, 2.0, -1.0, 5.0]) / 24.0;
        assert!((p - expected).abs().max() < 1e-14);
        let k = null_space(&t, 1e-10);
        assert_eq!(k.ncols(), 1);
        assert!((&t * k).norm() < 1e-12);
    }

    #[test]
    fn integer_kernel_is_primitive() {
        let rows = vec![vec![1, 1, 1], vec![2, 0, -2]];
        let k = int_kernel_vector(&rows, 3);
        let dots: Vec<i128> = rows.iter().map(|r| r.iter().zip(&k).map(|(a, b)| a * b).sum()).collect();
        assert_eq!(dots, vec![0, 0]);
        assert_eq!(k.iter().fold(0, |a, &b| gcd(a, b)), 1);
        assert_eq!(int_rank(&rows), 2);
        assert_eq!(int_det(&[vec![2, 1], vec![4, 3]]), 2);
        assert_eq!(int_rank(&[vec![2, 4], vec![1, 2]]), 1);
    }
}
