//! Lattice indexing, discrete difference operators, the Dirichlet Laplacian and
//! the discrete Sobolev norms on the displacement space.
//!
//! A chain with half-length `N` has interior sites `j = -N+1 ..= N-1`, stored at
//! offset `j + N - 1`. Displacements vanish at `j = ±N`; every routine here
//! supplies those zeros implicitly.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{QcError, Result};
use crate::scalar::Real;

/// Lattice size `N`, atomistic half-width `K` and spacing `eps = 1/N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams<T> {
    n: usize,
    k: usize,
    eps: T,
}

impl<T: Real> ChainParams<T> {
    /// Chain with `2N+1` reference sites and atomistic region `{-K, ..., K}`.
    ///
    /// Requires `N >= 2` and `K <= N - 2`. `K = 0` is accepted here so that
    /// pure lattice operations can use small chains; the interface models
    /// reject it at assembly.
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n < 2 {
            return Err(QcError::InvalidParams(format!("N = {n} must be at least 2")));
        }
        if k + 2 > n {
            return Err(QcError::InvalidParams(format!("K = {k} must satisfy K <= N - 2 = {}", n - 2)));
        }
        Ok(Self { n, k, eps: T::one() / T::from_usize_lossy(n) })
    }

    /// Chain without an atomistic region, for lattice-only computations.
    pub fn lattice(n: usize) -> Result<Self> {
        Self::new(n, 0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    /// Number of interior unknowns, `2N - 1`.
    pub fn dim(&self) -> usize {
        2 * self.n - 1
    }

    /// Storage offset of interior site `j`. Panics outside `-N+1 ..= N-1`.
    #[inline]
    pub fn index(&self, j: isize) -> usize {
        let n = self.n as isize;
        assert!(j > -n && j < n, "site {j} is not interior for N = {n}");
        (j + n - 1) as usize
    }

    /// Interior storage offset of site `j`, or `None` for pinned/outside sites.
    #[inline]
    pub fn try_index(&self, j: isize) -> Option<usize> {
        let n = self.n as isize;
        (j > -n && j < n).then(|| (j + n - 1) as usize)
    }

    /// Inverse of [`index`](Self::index).
    #[inline]
    pub fn site(&self, idx: usize) -> isize {
        idx as isize - self.n as isize + 1
    }

    pub fn is_atomistic(&self, j: isize) -> bool {
        j.unsigned_abs() <= self.k
    }

    /// Interior sites in storage order.
    pub fn sites(&self) -> impl Iterator<Item = isize> {
        let n = self.n as isize;
        -n + 1..n
    }

    /// Reference position `x_j = j * eps`.
    pub fn position(&self, j: isize) -> T {
        T::from_isize(j).expect("site index representable") * self.eps
    }

    /// Same lattice, different scalar type.
    pub fn cast<U: Real>(&self) -> ChainParams<U> {
        ChainParams { n: self.n, k: self.k, eps: U::one() / U::from_usize_lossy(self.n) }
    }
}

/// Displacement `u` on the interior sites, with `u_{-N} = u_N = 0` implied.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorVector<T> {
    values: Array1<T>,
    params: ChainParams<T>,
}

impl<T: Real> InteriorVector<T> {
    pub fn new(params: ChainParams<T>, values: Array1<T>) -> Result<Self> {
        if values.len() != params.dim() {
            return Err(QcError::LengthMismatch { expected: params.dim(), got: values.len() });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(QcError::InvalidArgument(format!("non-finite entry at site {}", params.site(pos))));
        }
        Ok(Self { values, params })
    }

    pub fn zeros(params: ChainParams<T>) -> Self {
        Self { values: Array1::zeros(params.dim()), params }
    }

    /// Builds the vector from a function of the logical site index.
    pub fn from_fn(params: ChainParams<T>, mut f: impl FnMut(isize) -> T) -> Self {
        let values = params.sites().map(&mut f).collect();
        Self { values, params }
    }

    /// Unit vector at interior site `j`.
    pub fn unit(params: ChainParams<T>, j: isize) -> Self {
        let mut v = Self::zeros(params);
        v.values[params.index(j)] = T::one();
        v
    }

    pub fn params(&self) -> &ChainParams<T> {
        &self.params
    }

    pub fn values(&self) -> &Array1<T> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array1<T> {
        &mut self.values
    }

    pub fn into_values(self) -> Array1<T> {
        self.values
    }

    /// Value at site `j`, zero at the pinned sites `±N` and beyond.
    #[inline]
    pub fn at(&self, j: isize) -> T {
        self.params.try_index(j).map_or(T::zero(), |i| self.values[i])
    }

    pub fn view(&self) -> ArrayView1<'_, T> {
        self.values.view()
    }
}

/// Backward differences `v'_l = (v_l - v_{l-1}) / eps`, `l = -N+1 ..= N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector<T> {
    values: Array1<T>,
    params: ChainParams<T>,
}

impl<T: Real> GradientVector<T> {
    pub fn values(&self) -> &Array1<T> {
        &self.values
    }

    pub fn params(&self) -> &ChainParams<T> {
        &self.params
    }

    /// `v'_l` for `l = -N+1 ..= N`.
    pub fn at(&self, l: isize) -> T {
        self.values[(l + self.params.n() as isize - 1) as usize]
    }

    /// Differences of consecutive gradient entries, `(v'_{l+1} - v'_l) / eps`,
    /// which coincide with the centred second difference of the displacement.
    pub fn difference(&self) -> CurvatureVector<T> {
        let inv = T::one() / self.params.eps();
        let values = self.values.windows(2).into_iter().map(|w| (w[1] - w[0]) * inv).collect();
        CurvatureVector { values, params: self.params }
    }
}

/// Centred second differences `v''_l`, `l = -N+1 ..= N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureVector<T> {
    values: Array1<T>,
    params: ChainParams<T>,
}

impl<T: Real> CurvatureVector<T> {
    pub fn values(&self) -> &Array1<T> {
        &self.values
    }

    pub fn params(&self) -> &ChainParams<T> {
        &self.params
    }
}

pub fn forward_difference<T: Real>(u: &InteriorVector<T>) -> GradientVector<T> {
    let p = *u.params();
    let inv = T::one() / p.eps();
    let n = p.n() as isize;
    let values = (-n + 1..=n).map(|l| (u.at(l) - u.at(l - 1)) * inv).collect();
    GradientVector { values, params: p }
}

pub fn second_difference<T: Real>(u: &InteriorVector<T>) -> CurvatureVector<T> {
    let p = *u.params();
    let inv2 = T::one() / (p.eps() * p.eps());
    let two = T::lit(2.0);
    let values = p.sites().map(|l| (u.at(l + 1) - two * u.at(l) + u.at(l - 1)) * inv2).collect();
    CurvatureVector { values, params: p }
}

/// Weighted norm `(eps * sum |v_l|^p)^(1/p)`; `p = inf` gives the unweighted max norm.
pub fn lp_norm<T: Real>(v: &[T], p: f64, eps: T) -> Result<T> {
    if p.is_nan() || p < 1.0 {
        return Err(QcError::InvalidArgument(format!("norm exponent p = {p} must satisfy p >= 1")));
    }
    if p.is_infinite() {
        return Ok(v.iter().fold(T::zero(), |m, x| m.max(x.abs())));
    }
    if p == 1.0 {
        return Ok(eps * v.iter().map(|x| x.abs()).sum::<T>());
    }
    if p == 2.0 {
        return Ok((eps * v.iter().map(|x| *x * *x).sum::<T>()).sqrt());
    }
    let pt = T::lit(p);
    Ok((eps * v.iter().map(|x| x.abs().powf(pt)).sum::<T>()).powf(T::one() / pt))
}

/// `eps * sum v_l w_l`.
pub fn inner_l2<T: Real>(v: &[T], w: &[T], eps: T) -> Result<T> {
    if v.len() != w.len() {
        return Err(QcError::LengthMismatch { expected: v.len(), got: w.len() });
    }
    Ok(eps * v.iter().zip(w).map(|(a, b)| *a * *b).sum::<T>())
}

/// Dense `(2N-1) x (2N-1)` Dirichlet Laplacian `eps^-2 tridiag(-1, 2, -1)`.
pub fn laplacian_matrix<T: Real>(params: &ChainParams<T>) -> Array2<T> {
    let d = params.dim();
    let inv2 = T::one() / (params.eps() * params.eps());
    let mut m = Array2::zeros((d, d));
    for i in 0..d {
        m[[i, i]] = T::lit(2.0) * inv2;
        if i + 1 < d {
            m[[i, i + 1]] = -inv2;
            m[[i + 1, i]] = -inv2;
        }
    }
    m
}

/// `L u` without forming the matrix.
pub fn apply_laplacian<T: Real>(u: &InteriorVector<T>) -> InteriorVector<T> {
    let curv = second_difference(u);
    InteriorVector { values: curv.values.mapv(|x| -x), params: *u.params() }
}

/// Tridiagonal LU of the Laplacian (no pivoting; the matrix is SPD), reused
/// across solves.
#[derive(Debug, Clone)]
pub struct LaplacianSolver<T> {
    params: ChainParams<T>,
    /// Pivots of `tridiag(-1, 2, -1)`: `d_0 = 2`, `d_i = 2 - 1/d_{i-1}`.
    pivots: Vec<T>,
}

impl<T: Real> LaplacianSolver<T> {
    pub fn new(params: ChainParams<T>) -> Self {
        let two = T::lit(2.0);
        let mut pivots = Vec::with_capacity(params.dim());
        let mut d = two;
        for i in 0..params.dim() {
            if i > 0 {
                d = two - d.recip();
            }
            pivots.push(d);
        }
        Self { params, pivots }
    }

    pub fn params(&self) -> &ChainParams<T> {
        &self.params
    }

    /// Pivots of the unscaled tridiagonal factorization.
    pub fn pivots(&self) -> &[T] {
        &self.pivots
    }

    /// Solves `L x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.pivots.len();
        assert_eq!(b.len(), n, "right-hand side has wrong length");
        for i in 1..n {
            let prev = b[i - 1] / self.pivots[i - 1];
            b[i] += prev;
        }
        let h2 = self.params.eps() * self.params.eps();
        b[n - 1] /= self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            b[i] = (b[i] + b[i + 1]) / self.pivots[i];
        }
        for x in b.iter_mut() {
            *x *= h2;
        }
    }

    pub fn solve_array(&self, b: &Array1<T>) -> Array1<T> {
        let mut x = b.clone();
        self.solve_in_place(x.as_slice_mut().expect("contiguous"));
        x
    }

    pub fn solve(&self, f: &InteriorVector<T>) -> InteriorVector<T> {
        InteriorVector { values: self.solve_array(f.values()), params: self.params }
    }

    /// `L^{-1} B` column by column.
    pub fn solve_columns(&self, b: &Array2<T>) -> Array2<T> {
        let mut out = b.clone();
        let mut col = vec![T::zero(); b.nrows()];
        for j in 0..b.ncols() {
            for (i, c) in col.iter_mut().enumerate() {
                *c = b[[i, j]];
            }
            self.solve_in_place(&mut col);
            for (i, c) in col.iter().enumerate() {
                out[[i, j]] = *c;
            }
        }
        out
    }
}

/// `L^{-1} f` with a fresh factorization.
pub fn laplacian_solve<T: Real>(f: &InteriorVector<T>) -> InteriorVector<T> {
    LaplacianSolver::new(*f.params()).solve(f)
}

/// `||u||_{U^{1,2}} = ||u'||_{l^2_eps}`.
pub fn norm_u12<T: Real>(u: &InteriorVector<T>) -> T {
    let g = forward_difference(u);
    let eps = u.params().eps();
    (eps * g.values().iter().map(|x| *x * *x).sum::<T>()).sqrt()
}

/// `||f||_{U^{-1,2}} = <L^{-1} f, f>^{1/2}`, via a tridiagonal solve.
pub fn norm_u_neg12<T: Real>(f: &InteriorVector<T>) -> T {
    norm_u_neg12_with(&LaplacianSolver::new(*f.params()), f)
}

pub fn norm_u_neg12_with<T: Real>(solver: &LaplacianSolver<T>, f: &InteriorVector<T>) -> T {
    let z = solver.solve_array(f.values());
    let eps = f.params().eps();
    let q = eps * z.iter().zip(f.values()).map(|(a, b)| *a * *b).sum::<T>();
    q.max(T::zero()).sqrt()
}

/// `||u||_{U^{2,p}} = ||u''||_{l^p_eps}`.
pub fn norm_u2p<T: Real>(u: &InteriorVector<T>, p: f64) -> Result<T> {
    let c = second_difference(u);
    lp_norm(c.values().as_slice().expect("contiguous"), p, u.params().eps())
}

/// `<v', v'> / <v, v>`.
pub fn rayleigh_quotient<T: Real>(v: &InteriorVector<T>) -> T {
    let num = norm_u12(v);
    let den = lp_norm(v.values().as_slice().expect("contiguous"), 2.0, v.params().eps()).expect("p = 2 is valid");
    (num * num) / (den * den)
}

/// Minimal Rayleigh quotient of the Dirichlet Laplacian, `4 N^2 sin^2(pi / 4N)`.
pub fn laplacian_min_rayleigh<T: Real>(n: usize) -> T {
    let nt = T::from_usize_lossy(n);
    let s = (T::lit(std::f64::consts::PI) / (T::lit(4.0) * nt)).sin();
    T::lit(4.0) * nt * nt * s * s
}

/// The minimizer `v_l = sin((N - l) pi / 2N)`.
pub fn laplacian_ground_mode<T: Real>(params: ChainParams<T>) -> InteriorVector<T> {
    let n = T::from_usize_lossy(params.n());
    let pi = T::lit(std::f64::consts::PI);
    InteriorVector::from_fn(params, |l| ((n - T::from_isize(l).unwrap()) * pi / (T::lit(2.0) * n)).sin())
}
