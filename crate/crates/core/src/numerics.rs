//! Dense linear algebra shared by the rest of the crate: subspaces with
//! tolerance-based rank decisions, a Perron-Frobenius solver and
//! constrained minimum-norm solves.

use nalgebra::{Complex, DMatrix, DVector};
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::settings::Settings;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative rank tolerance used when a caller does not supply one.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// A linear subspace of R^n stored as an orthonormal basis.
#[derive(Debug, Clone)]
pub struct Subspace {
    basis: Matrix,
    tol: f64,
}

impl Subspace {
    pub fn zero(n: usize) -> Self {
        Subspace { basis: Matrix::zeros(n, 0), tol: DEFAULT_RANK_TOL }
    }

    pub fn full(n: usize) -> Self {
        Subspace { basis: Matrix::identity(n, n), tol: DEFAULT_RANK_TOL }
    }

    /// Column space of `m`; singular values at or below `tol * sigma_max` are dropped.
    pub fn span(m: &Matrix, tol: f64) -> Self {
        Self::span_scaled(m, tol, 0.0)
    }

    /// Column space of `m` with cutoff `tol * max(sigma_max, scale)`.
    ///
    /// A positive `scale` keeps rounding noise in an almost-zero matrix from
    /// being promoted to rank.
    pub fn span_scaled(m: &Matrix, tol: f64, scale: f64) -> Self {
        let n = m.nrows();
        if n == 0 || m.ncols() == 0 {
            return Subspace { basis: Matrix::zeros(n, 0), tol };
        }
        let reduced = reduce_wide(m);
        let Some(svd) = thin_svd(&reduced) else {
            return Subspace { basis: Matrix::zeros(n, 0), tol };
        };
        let u = svd.u;
        let smax = svd.singular_values.max();
        let cut = tol * smax.max(scale);
        if smax <= f64::MIN_POSITIVE {
            return Subspace { basis: Matrix::zeros(n, 0), tol };
        }
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > cut)
            .collect();
        let mut basis = Matrix::zeros(n, keep.len());
        for (j, &i) in keep.iter().enumerate() {
            basis.set_column(j, &u.column(i));
        }
        Subspace { basis, tol }
    }

    pub fn from_vectors(n: usize, vectors: &[Vector], tol: f64) -> Self {
        Self::span(&columns_to_matrix(n, vectors), tol)
    }

    /// Null space of `m` with relative cutoff `tol * sigma_max`.
    pub fn kernel(m: &Matrix, tol: f64) -> Self {
        Self::kernel_scaled(m, tol, 0.0)
    }

    /// Null space of `m` with cutoff `tol * max(sigma_max, scale)`.
    pub fn kernel_scaled(m: &Matrix, tol: f64, scale: f64) -> Self {
        let n = m.ncols();
        if n == 0 {
            return Subspace { basis: Matrix::zeros(0, 0), tol };
        }
        if m.nrows() == 0 {
            return Subspace { basis: Matrix::identity(n, n), tol };
        }
        let square = reduce_tall(m);
        let Some(svd) = thin_svd(&square) else {
            return Subspace { basis: Matrix::zeros(n, 0), tol };
        };
        let vt = svd.v_t;
        let smax = svd.singular_values.max();
        let cut = tol * smax.max(scale);
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] <= cut)
            .collect();
        let mut basis = Matrix::zeros(n, keep.len());
        for (j, &i) in keep.iter().enumerate() {
            basis.set_column(j, &vt.row(i).transpose());
        }
        Subspace { basis, tol }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn projector(&self) -> Matrix {
        &self.basis * self.basis.transpose()
    }

    pub fn project(&self, v: &Vector) -> Vector {
        &self.basis * (self.basis.transpose() * v)
    }

    /// Euclidean distance from `v` to the subspace.
    pub fn residual(&self, v: &Vector) -> f64 {
        (v - self.project(v)).norm()
    }

    pub fn contains(&self, v: &Vector) -> bool {
        let nv = v.norm();
        if nv == 0.0 {
            return true;
        }
        self.residual(v) <= self.tol * nv
    }

    pub fn contains_subspace(&self, other: &Subspace) -> Result<bool> {
        check_same_ambient(self, other)?;
        Ok((0..other.dim()).all(|j| self.contains(&other.basis.column(j).into_owned())))
    }

    /// Largest distance from a unit vector of `other` to `self`.
    pub fn containment_residual(&self, other: &Subspace) -> Result<f64> {
        check_same_ambient(self, other)?;
        if other.dim() == 0 {
            return Ok(0.0);
        }
        let diff = &other.basis - self.projector() * &other.basis;
        Ok(spectral_norm(&diff))
    }

    pub fn complement(&self) -> Subspace {
        let n = self.ambient_dim();
        if self.dim() == 0 {
            return Subspace::full(n).with_tol(self.tol);
        }
        Subspace::kernel_scaled(&self.basis.transpose(), self.tol, 1.0)
    }

    /// Coordinates of `v` in the stored orthonormal basis.
    pub fn coordinates(&self, v: &Vector) -> Vector {
        self.basis.transpose() * v
    }
}

fn check_same_ambient(a: &Subspace, b: &Subspace) -> Result<()> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "subspaces live in R^{} and R^{}",
            a.ambient_dim(),
            b.ambient_dim()
        )));
    }
    Ok(())
}

/// Sum of subspaces: concatenated bases, re-orthonormalized.
pub fn sum(spaces: &[&Subspace]) -> Result<Subspace> {
    let first = spaces
        .first()
        .ok_or_else(|| Error::InvalidArgument("sum of an empty list of subspaces".into()))?;
    let n = first.ambient_dim();
    let tol = spaces.iter().map(|s| s.tol).fold(0.0, f64::max);
    let mut cols = Vec::new();
    for s in spaces {
        check_same_ambient(first, s)?;
        for j in 0..s.dim() {
            cols.push(s.basis.column(j).into_owned());
        }
    }
    Ok(Subspace::span_scaled(&columns_to_matrix(n, &cols), tol, 1.0))
}

/// Intersection via the null space of the stacked complementary projectors.
pub fn intersect(a: &Subspace, b: &Subspace) -> Result<Subspace> {
    check_same_ambient(a, b)?;
    let n = a.ambient_dim();
    let tol = a.tol.max(b.tol);
    if a.dim() == 0 || b.dim() == 0 {
        return Ok(Subspace::zero(n).with_tol(tol));
    }
    let id = Matrix::identity(n, n);
    let stacked = vstack(&[&id - a.projector(), &id - b.projector()]);
    Ok(Subspace::kernel_scaled(&stacked, tol, 1.0))
}

pub fn equal(a: &Subspace, b: &Subspace) -> Result<bool> {
    check_same_ambient(a, b)?;
    Ok(a.dim() == b.dim() && a.contains_subspace(b)? && b.contains_subspace(a)?)
}

/// Null space of `m` with relative cutoff `tol * sigma_max`.
pub fn kernel(m: &Matrix, tol: f64) -> Subspace {
    Subspace::kernel(m, tol)
}

/// Numerical rank with relative cutoff `tol * sigma_max`.
pub fn rank(m: &Matrix, tol: f64) -> usize {
    Subspace::span(m, tol).dim()
}

/// Thin singular value decomposition `m = u diag(s) v_t`, singular values nonincreasing.
///
/// Computed with faer: nalgebra's bidiagonal SVD returns inaccurate factors for a
/// small fraction of rank-deficient inputs.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vector,
    pub v_t: Matrix,
}

pub fn thin_svd(m: &Matrix) -> Option<Svd> {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Some(Svd { u: Matrix::zeros(r, 0), singular_values: Vector::zeros(0), v_t: Matrix::zeros(0, c) });
    }
    if !m.iter().all(|x| x.is_finite()) {
        return None;
    }
    let svd = faer::Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)]).thin_svd().ok()?;
    let (u, v, s) = (svd.U(), svd.V(), svd.S().column_vector());
    Some(Svd {
        u: Matrix::from_fn(r, k, |i, j| u[(i, j)]),
        singular_values: Vector::from_fn(k, |i, _| s[i]),
        v_t: Matrix::from_fn(k, c, |i, j| v[(j, i)]),
    })
}

/// Right singular vector of a square matrix for its smallest singular value.
pub fn smallest_right_singular_vector(m: &Matrix) -> Option<Vector> {
    let svd = thin_svd(m)?;
    let last = svd.singular_values.len().checked_sub(1)?;
    Some(svd.v_t.row(last).transpose())
}

/// Complex counterpart of [`smallest_right_singular_vector`].
pub fn smallest_right_singular_vector_complex(m: &DMatrix<Complex<f64>>) -> Option<DVector<Complex<f64>>> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 || !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return None;
    }
    let svd = faer::Mat::<faer::c64>::from_fn(r, c, |i, j| m[(i, j)]).thin_svd().ok()?;
    let v = svd.V();
    let last = r.min(c) - 1;
    Some(DVector::from_fn(c, |i, _| v[(i, last)]))
}

/// Singular values of a complex matrix in decreasing order.
pub fn singular_values_complex(m: &DMatrix<Complex<f64>>) -> Vec<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 || !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Vec::new();
    }
    faer::Mat::<faer::c64>::from_fn(r, c, |i, j| m[(i, j)]).singular_values().unwrap_or_default()
}

/// Singular values in decreasing order.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    thin_svd(m).map(|svd| svd.singular_values.iter().copied().collect()).unwrap_or_default()
}

pub fn spectral_norm(m: &Matrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn columns_to_matrix(n: usize, cols: &[Vector]) -> Matrix {
    let mut m = Matrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

pub fn vstack(blocks: &[Matrix]) -> Matrix {
    let ncols = blocks.first().map_or(0, |b| b.ncols());
    let nrows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(nrows, ncols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), ncols)).copy_from(b);
        r += b.nrows();
    }
    out
}

pub fn hstack(blocks: &[Matrix]) -> Matrix {
    let nrows = blocks.first().map_or(0, |b| b.nrows());
    let ncols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(nrows, ncols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), (nrows, b.ncols())).copy_from(b);
        c += b.ncols();
    }
    out
}

// Replace a tall matrix by a square one with the same right singular structure.
fn reduce_tall(m: &Matrix) -> Matrix {
    let (r, c) = m.shape();
    if r < c {
        let mut padded = Matrix::zeros(c, c);
        padded.view_mut((0, 0), (r, c)).copy_from(m);
        padded
    } else if r > 2 * c {
        m.clone().qr().r()
    } else {
        m.clone()
    }
}

// Replace a wide matrix by one with the same column space and fewer columns.
fn reduce_wide(m: &Matrix) -> Matrix {
    let (r, c) = m.shape();
    if c > 2 * r {
        m.transpose().qr().r().transpose()
    } else {
        m.clone()
    }
}

/// An element (B_y)_{y in Y} of (R^{d x d})^{dY}: a function g(y, x, x') or its
/// m-representation. Flattened to R^{dY d^2} in (y, x, x') row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFamily {
    mats: Vec<Matrix>,
}

impl MatrixFamily {
    pub fn new(mats: Vec<Matrix>) -> Result<Self> {
        let Some(first) = mats.first() else {
            return Err(Error::InvalidArgument("empty matrix family".into()));
        };
        let d = first.nrows();
        if mats.iter().any(|m| m.shape() != (d, d)) {
            return Err(Error::DimensionMismatch("matrix family members must all be square of equal size".into()));
        }
        Ok(MatrixFamily { mats })
    }

    pub fn zeros(d: usize, dy: usize) -> Self {
        MatrixFamily { mats: vec![Matrix::zeros(d, d); dy] }
    }

    pub fn constant(d: usize, dy: usize, c: f64) -> Self {
        MatrixFamily { mats: vec![Matrix::from_element(d, d, c); dy] }
    }

    /// Indicator of the single point (y, x, x').
    pub fn delta(d: usize, dy: usize, y: usize, x: usize, xp: usize) -> Self {
        let mut f = Self::zeros(d, dy);
        f.mats[y][(x, xp)] = 1.0;
        f
    }

    /// Indicator of the output y, independent of the states.
    pub fn output_indicator(d: usize, dy: usize, y: usize) -> Self {
        let mut f = Self::zeros(d, dy);
        f.mats[y] = Matrix::from_element(d, d, 1.0);
        f
    }

    pub fn d(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn dy(&self) -> usize {
        self.mats.len()
    }

    pub fn get(&self, y: usize) -> &Matrix {
        &self.mats[y]
    }

    pub fn get_mut(&mut self, y: usize) -> &mut Matrix {
        &mut self.mats[y]
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.mats
    }

    pub fn flat_index(d: usize, y: usize, x: usize, xp: usize) -> usize {
        (y * d + x) * d + xp
    }

    pub fn flatten(&self) -> Vector {
        let d = self.d();
        let mut v = Vector::zeros(self.dy() * d * d);
        for (y, m) in self.mats.iter().enumerate() {
            for x in 0..d {
                for xp in 0..d {
                    v[Self::flat_index(d, y, x, xp)] = m[(x, xp)];
                }
            }
        }
        v
    }

    pub fn unflatten(v: &Vector, d: usize, dy: usize) -> Result<Self> {
        if v.len() != dy * d * d {
            return Err(Error::DimensionMismatch(format!("vector of length {} for dY={dy}, d={d}", v.len())));
        }
        let mats = (0..dy)
            .map(|y| Matrix::from_fn(d, d, |x, xp| v[Self::flat_index(d, y, x, xp)]))
            .collect();
        Ok(MatrixFamily { mats })
    }

    pub fn scale(&self, c: f64) -> Self {
        MatrixFamily { mats: self.mats.iter().map(|m| m * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        MatrixFamily { mats: self.mats.iter().zip(&other.mats).map(|(a, b)| a + b).collect() }
    }

    /// Sum of c_j F_j; `families` must be nonempty when `coeffs` is.
    pub fn combination(d: usize, dy: usize, families: &[MatrixFamily], coeffs: &[f64]) -> Self {
        let mut out = Self::zeros(d, dy);
        for (f, c) in families.iter().zip(coeffs) {
            for (o, m) in out.mats.iter_mut().zip(&f.mats) {
                *o += m * *c;
            }
        }
        out
    }

    pub fn amax(&self) -> f64 {
        self.mats.iter().map(|m| m.amax()).fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        self.mats.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
    }
}

/// Strongly connected components of the directed graph x' -> x for A(x|x') > tol.
/// Components are sorted internally and ordered by their smallest member.
pub fn strongly_connected_components(a: &Matrix, tol: f64) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut g = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for xp in 0..n {
        for x in 0..n {
            if a[(x, xp)] > tol {
                g.add_edge(nodes[xp], nodes[x], ());
            }
        }
    }
    let mut comps: Vec<Vec<usize>> = petgraph::algo::tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut v: Vec<usize> = c.into_iter().map(|i| i.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    comps.sort_by_key(|c| c[0]);
    comps
}

pub fn is_irreducible(a: &Matrix, tol: f64) -> bool {
    a.nrows() > 0 && strongly_connected_components(a, tol).len() == 1
}

/// Perron-Frobenius data of a nonnegative irreducible matrix.
#[derive(Debug, Clone)]
pub struct PerronData {
    pub lambda: f64,
    /// Right eigenvector, normalized to sum one.
    pub right: Vector,
    /// Left eigenvector, normalized so that `<left, right> = 1`.
    pub left: Vector,
}

impl PerronData {
    pub fn right_residual(&self, a: &Matrix) -> f64 {
        (a * &self.right - &self.right * self.lambda).amax()
    }

    pub fn left_residual(&self, a: &Matrix) -> f64 {
        (a.transpose() * &self.left - &self.left * self.lambda).amax()
    }
}

/// Perron eigenvalue and eigenvectors by shifted power iteration, with a dense
/// eigensolver fallback and Newton refinement to working precision.
pub fn perron(a: &Matrix, settings: &Settings) -> Result<PerronData> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::DimensionMismatch(format!("perron needs a nonempty square matrix, got {}x{}", n, a.ncols())));
    }
    if let Some(v) = a.iter().find(|v| !v.is_finite() || **v < -settings.support_tol) {
        return Err(Error::InvalidArgument(format!("perron needs a nonnegative finite matrix, found entry {v}")));
    }
    let comps = strongly_connected_components(a, settings.support_tol);
    if comps.len() != 1 {
        return Err(Error::Reducible { components: comps });
    }
    if n == 1 {
        let lambda = a[(0, 0)];
        if lambda <= 0.0 {
            return Err(Error::Precondition("1x1 matrix with zero Perron eigenvalue".into()));
        }
        let one = Vector::from_element(1, 1.0);
        return Ok(PerronData { lambda, right: one.clone(), left: one });
    }

    let scale = a.amax();
    let (lambda0, right0) = match power_iteration(a, scale, settings) {
        Some(found) => found,
        None => dense_perron(a)?,
    };
    let (lambda, right) = newton_refine(a, lambda0, right0);
    let at = a.transpose();
    let left0 = match left_guess(&at, lambda) {
        Some(v) => v,
        None => return Err(Error::NonConvergence { residual: f64::INFINITY }),
    };
    let (_, left) = newton_refine(&at, lambda, left0);

    let mut right = right;
    let rs = right.sum();
    right /= rs;
    let mut left = left;
    let ip = left.dot(&right);
    left /= ip;
    let data = PerronData { lambda, right, left };
    let residual = data.right_residual(a).max(data.left_residual(a));
    let bound = settings.residual_tol * scale.max(lambda).max(1.0);
    let positive = data.right.iter().chain(data.left.iter()).all(|v| *v > 0.0);
    if !(residual <= bound) || !positive || !(lambda > 0.0) {
        return Err(Error::NonConvergence { residual });
    }
    Ok(data)
}

fn power_iteration(a: &Matrix, shift: f64, settings: &Settings) -> Option<(f64, Vector)> {
    let n = a.nrows();
    let b = a + Matrix::identity(n, n) * shift;
    let mut x = Vector::from_element(n, 1.0 / n as f64);
    let stop = 1e-9 * shift.max(1.0);
    for it in 0..settings.perron_max_iter {
        let y = &b * &x;
        let mass = y.sum();
        if !(mass > 0.0) || !mass.is_finite() {
            return None;
        }
        x = y / mass;
        if it % 16 == 15 {
            let lambda = mass - shift;
            let res = (a * &x - &x * lambda).amax();
            if res <= stop {
                return Some((lambda, x));
            }
        }
    }
    None
}

fn dense_perron(a: &Matrix) -> Result<(f64, Vector)> {
    let eig = a.clone().complex_eigenvalues();
    let lambda = eig
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let n = a.nrows();
    let shifted = a - Matrix::identity(n, n) * lambda;
    let mut v = smallest_right_singular_vector(&shifted).ok_or(Error::NonConvergence { residual: f64::INFINITY })?;
    if v.sum() < 0.0 {
        v = -v;
    }
    let s = v.sum();
    if s == 0.0 {
        return Err(Error::NonConvergence { residual: f64::INFINITY });
    }
    Ok((lambda, v / s))
}

fn left_guess(at: &Matrix, lambda: f64) -> Option<Vector> {
    let n = at.nrows();
    let shifted = at - Matrix::identity(n, n) * lambda;
    let mut v = smallest_right_singular_vector(&shifted)?;
    if v.sum() < 0.0 {
        v = -v;
    }
    let s = v.sum();
    if s == 0.0 {
        None
    } else {
        Some(v / s)
    }
}

// Newton iteration on (A - lambda I) x = 0, sum(x) = 1.
fn newton_refine(a: &Matrix, mut lambda: f64, mut x: Vector) -> (f64, Vector) {
    let n = a.nrows();
    let s = x.sum();
    if s != 0.0 {
        x /= s;
    }
    let mut best = ((a * &x - &x * lambda).amax(), lambda, x.clone());
    for _ in 0..6 {
        let mut j = Matrix::zeros(n + 1, n + 1);
        j.view_mut((0, 0), (n, n)).copy_from(&(a - Matrix::identity(n, n) * lambda));
        for i in 0..n {
            j[(i, n)] = -x[i];
            j[(n, i)] = 1.0;
        }
        let mut rhs = Vector::zeros(n + 1);
        let r = a * &x - &x * lambda;
        for i in 0..n {
            rhs[i] = -r[i];
        }
        rhs[n] = 1.0 - x.sum();
        let Some(step) = j.lu().solve(&rhs) else { break };
        for i in 0..n {
            x[i] += step[i];
        }
        lambda += step[n];
        let res = (a * &x - &x * lambda).amax();
        if res < best.0 {
            best = (res, lambda, x.clone());
        }
        if res == 0.0 {
            break;
        }
    }
    (best.1, best.2)
}

/// Minimum-norm x with `m x = b` and `<c, x> = 0`.
pub fn solve_on_complement(
    m: &Matrix,
    b: &Vector,
    constraint: &Vector,
    rank_tol: f64,
    residual_tol: f64,
) -> Result<Vector> {
    let n = m.ncols();
    if m.nrows() != b.len() || constraint.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "system {}x{} with rhs {} and constraint {}",
            m.nrows(),
            n,
            b.len(),
            constraint.len()
        )));
    }
    let mut a = Matrix::zeros(m.nrows() + 1, n);
    a.view_mut((0, 0), m.shape()).copy_from(m);
    a.row_mut(m.nrows()).copy_from(&constraint.transpose());
    let mut rhs = Vector::zeros(m.nrows() + 1);
    rhs.rows_mut(0, b.len()).copy_from(b);
    let x = min_norm_solve(&a, &rhs, rank_tol);
    let residual = (&a * &x - &rhs).norm();
    if residual > residual_tol * b.norm().max(1.0) {
        return Err(Error::Inconsistent { residual });
    }
    Ok(x)
}

/// Minimum-norm least-squares solution through the pseudo-inverse.
pub fn min_norm_solve(a: &Matrix, b: &Vector, rank_tol: f64) -> Vector {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vector::zeros(a.ncols());
    }
    let Some(svd) = thin_svd(a) else {
        return Vector::zeros(a.ncols());
    };
    let eps = rank_tol * svd.singular_values.max();
    let utb = svd.u.transpose() * b;
    let scaled = Vector::from_fn(utb.len(), |i, _| {
        let s = svd.singular_values[i];
        if s > eps { utb[i] / s } else { 0.0 }
    });
    svd.v_t.transpose() * scaled
}

/// Stochastic-matrix helper: `1 - |W|` style operator `I - a`.
pub fn identity_minus(a: &Matrix) -> Matrix {
    Matrix::identity(a.nrows(), a.ncols()) - a
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use nalgebra::dvector;

    #[test]
    fn kernel_of_identity_is_zero() {
        assert_eq!(kernel(&Matrix::identity(3, 3), 1e-9).dim(), 0);
    }

    #[test]
    fn kernel_of_rank_one_block() {
        let k = kernel(&dmatrix![1.0, 1.0; 1.0, 1.0], 1e-9);
        assert_eq!(k.dim(), 1);
        let v = k.basis().column(0).into_owned();
        assert!((v[0] + v[1]).abs() < 1e-12);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_of_emission_matrix_is_zero() {
        let v = dmatrix![0.9, 0.2; 0.1, 0.8];
        assert_eq!(kernel(&v, 1e-9).dim(), 0);
    }

    #[test]
    fn kernel_of_wide_matrix() {
        let m = dmatrix![1.0, 0.0, 0.0];
        let k = kernel(&m, 1e-9);
        assert_eq!(k.dim(), 2);
        assert!(k.contains(&dvector![0.0, 3.0, -1.0]));
        assert!(!k.contains(&dvector![1.0, 0.0, 0.0]));
    }

    #[test]
    fn sum_with_zero_is_identity_op() {
        let s = Subspace::from_vectors(3, &[dvector![1.0, 1.0, 0.0]], 1e-9);
        let z = Subspace::zero(3);
        let t = sum(&[&s, &z]).unwrap();
        assert!(equal(&s, &t).unwrap());
    }

    #[test]
    fn intersect_coordinate_planes() {
        let a = Subspace::from_vectors(3, &[dvector![1.0, 0.0, 0.0], dvector![0.0, 1.0, 0.0]], 1e-9);
        let b = Subspace::from_vectors(3, &[dvector![0.0, 1.0, 0.0], dvector![0.0, 0.0, 1.0]], 1e-9);
        let c = intersect(&a, &b).unwrap();
        assert_eq!(c.dim(), 1);
        assert!(c.contains(&dvector![0.0, 2.0, 0.0]));
    }

    #[test]
    fn contains_scaled_vector() {
        let s = Subspace::from_vectors(2, &[dvector![1.0, 1.0] / 2f64.sqrt()], 1e-9);
        assert!(s.contains(&dvector![2.0, 2.0]));
        assert!(!s.contains(&dvector![2.0, 1.0]));
    }

    #[test]
    fn mismatched_ambient_dims_error() {
        let a = Subspace::full(2);
        let b = Subspace::full(3);
        assert!(matches!(intersect(&a, &b), Err(Error::DimensionMismatch(_))));
        assert!(matches!(sum(&[&a, &b]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn perron_of_stochastic_matrix() {
        let a = dmatrix![0.7, 0.4; 0.3, 0.6];
        let p = perron(&a, &Settings::default()).unwrap();
        assert!((p.lambda - 1.0).abs() < 1e-14);
        assert!((p.right[0] - 4.0 / 7.0).abs() < 1e-14);
        assert!((p.left[0] - p.left[1]).abs() < 1e-14);
    }

    #[test]
    fn perron_of_symmetric_circulant() {
        let a = dmatrix![2.0, 1.0; 1.0, 2.0];
        let p = perron(&a, &Settings::default()).unwrap();
        assert!((p.lambda - 3.0).abs() < 1e-13);
        assert!((p.right[0] - p.right[1]).abs() < 1e-14);
    }

    #[test]
    fn perron_of_periodic_matrix() {
        let a = dmatrix![0.0, 1.0; 1.0, 0.0];
        let p = perron(&a, &Settings::default()).unwrap();
        assert!((p.lambda - 1.0).abs() < 1e-14);
    }

    #[test]
    fn perron_rejects_reducible() {
        let a = Matrix::identity(2, 2);
        match perron(&a, &Settings::default()) {
            Err(Error::Reducible { components }) => assert_eq!(components, vec![vec![0], vec![1]]),
            other => panic!("expected reducible error, got {other:?}"),
        }
    }

    #[test]
    fn solve_zero_rhs() {
        let m = identity_minus(&dmatrix![0.7, 0.4; 0.3, 0.6]);
        let x = solve_on_complement(&m, &dvector![0.0, 0.0], &dvector![1.0, 1.0], 1e-9, 1e-10).unwrap();
        assert!(x.norm() < 1e-15);
    }

    #[test]
    fn solve_consistent_rhs() {
        let m = identity_minus(&dmatrix![0.7, 0.4; 0.3, 0.6]);
        let b = dvector![0.1, -0.1];
        let x = solve_on_complement(&m, &b, &dvector![1.0, 1.0], 1e-9, 1e-10).unwrap();
        // M = [[0.3,-0.4],[-0.3,0.4]], x0 + x1 = 0 gives 0.7 x0 = 0.1.
        assert!((x[0] - 1.0 / 7.0).abs() < 1e-13);
        assert!((x[1] + 1.0 / 7.0).abs() < 1e-13);
    }

    #[test]
    fn solve_inconsistent_rhs() {
        let m = identity_minus(&dmatrix![0.7, 0.4; 0.3, 0.6]);
        let r = solve_on_complement(&m, &dvector![0.1, 0.1], &dvector![1.0, 1.0], 1e-9, 1e-10);
        assert!(matches!(r, Err(Error::Inconsistent { .. })));
    }

    #[test]
    fn scc_ordering() {
        let a = dmatrix![0.5, 0.5, 0.0; 0.5, 0.5, 0.0; 0.0, 0.0, 1.0];
        assert_eq!(strongly_connected_components(&a, 1e-12), vec![vec![0, 1], vec![2]]);
    }
}
