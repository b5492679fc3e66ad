//! Spectra, coercivity infima and eigenbasis conditioning of the chain operators.
//!
//! Everything here works in `f64` on top of the LAPACK wrappers in
//! [`crate::linalg`].

use std::cmp::Ordering;

use ndarray::{s, Array1, Array2, Axis};
use ndarray_linalg::c64;

use crate::chain::{ChainParams, InteriorVector, LaplacianSolver};
use crate::csv::{fmt17, CsvTable};
use crate::error::{QcError, Result};
use crate::linalg::{self, LuFactors};
use crate::operators::{assemble, ModelKind, QcOperator};
use crate::potentials::HomogeneousState;

type Params = ChainParams<f64>;
type State = HomogeneousState<f64>;

/// Eigendecomposition with eigenvalues sorted by real part (imaginary part
/// breaks ties) and unit-norm eigenvector columns.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub eigenvalues: Array1<c64>,
    pub eigenvectors: Array2<c64>,
    /// `s_max / s_min` of the eigenvector matrix.
    pub basis_condition: f64,
    pub max_imag: f64,
}

impl SpectralReport {
    pub fn real_parts(&self) -> Array1<f64> {
        self.eigenvalues.mapv(|z| z.re)
    }
}

fn cmp_complex(a: &c64, b: &c64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn is_exactly_symmetric(a: &Array2<f64>) -> bool {
    a.indexed_iter().all(|((i, j), v)| *v == a[[j, i]])
}

/// Full eigendecomposition of a dense real matrix.
///
/// Exactly symmetric input goes through the symmetric solver, so its basis is
/// orthonormal. Every pair must satisfy `||A v - lambda v|| <= 1e-10 ||A||_F`.
pub fn eig_dense(a: &Array2<f64>) -> Result<SpectralReport> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(QcError::InvalidArgument(format!("matrix is {}x{}, not square", n, a.ncols())));
    }
    let (values, vectors) = if n > 0 && is_exactly_symmetric(a) {
        let (w, v) = linalg::eigh(a)?;
        (w.mapv(|x| c64::new(x, 0.0)), v.mapv(|x| c64::new(x, 0.0)))
    } else {
        linalg::eig(a)?
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| cmp_complex(&values[i], &values[j]));
    let eigenvalues: Array1<c64> = order.iter().map(|&i| values[i]).collect();
    let mut eigenvectors = vectors.select(Axis(1), &order);
    for mut col in eigenvectors.columns_mut() {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            col.mapv_inplace(|z| z / norm);
        }
    }

    let scale = frobenius(a);
    let ac = a.mapv(|x| c64::new(x, 0.0));
    let av = ac.dot(&eigenvectors);
    for (i, lambda) in eigenvalues.iter().enumerate() {
        let r = (&av.column(i) - &eigenvectors.column(i).mapv(|z| z * lambda))
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if r > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            let mut buf = Vec::new();
            let _ = crate::operators::write_matrix_csv(a, &mut buf);
            return Err(QcError::Eigensolver {
                reason: format!("residual {r:e} for eigenvalue {lambda} exceeds 1e-10 ||A||"),
                matrix_csv: String::from_utf8_lossy(&buf).into_owned(),
            });
        }
    }
    let basis_condition = linalg::condition_number_complex(&eigenvectors)?;
    let max_imag = eigenvalues.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    Ok(SpectralReport { eigenvalues, eigenvectors, basis_condition, max_imag })
}

/// `L^{-1} A`, formed by tridiagonal solves against each column of `A`.
pub fn preconditioned_matrix(op: &QcOperator<f64>) -> Array2<f64> {
    LaplacianSolver::new(*op.params()).solve_columns(op.matrix())
}

/// Spectrum of `L^{-1} A`; the eigenvector matrix is the basis `V~`.
pub fn generalized_spectrum(op: &QcOperator<f64>) -> Result<SpectralReport> {
    eig_dense(&preconditioned_matrix(op))
}

/// Closed-form spectrum of `L^{-1} L^qnl`, ascending: the interface values
/// `A_F - 4 phi''(2F) sin^2(j pi / (4K + 4))`, `j = 1..=2K+1`, and `A_F` with
/// multiplicity `2N - 2K - 2`.
pub fn qnl_u12_spectrum_closed_form(params: &Params, state: &State) -> Result<Array1<f64>> {
    state.check_stable()?;
    if params.k() < 1 {
        return Err(QcError::InvalidParams("QNL requires K >= 1".into()));
    }
    let k = params.k();
    let mut out: Vec<f64> = (1..=2 * k + 1)
        .map(|j| {
            let s = (j as f64 * std::f64::consts::PI / (4 * k + 4) as f64).sin();
            state.a_f - 4.0 * state.phi2_2f * s * s
        })
        .collect();
    out.extend(std::iter::repeat_n(state.a_f, 2 * params.n() - 2 * k - 2));
    out.sort_by(f64::total_cmp);
    Ok(Array1::from(out))
}

/// Upper Cholesky factor of the unscaled Dirichlet Laplacian `tridiag(-1, 2, -1)`,
/// stored as its diagonal and superdiagonal.
fn laplacian_cholesky(dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut diag = Vec::with_capacity(dim);
    let mut sup = Vec::with_capacity(dim.saturating_sub(1));
    let mut pivot = 2.0f64;
    for i in 0..dim {
        if i > 0 {
            pivot = 2.0 - 1.0 / pivot;
        }
        let r = pivot.sqrt();
        diag.push(r);
        if i + 1 < dim {
            sup.push(-1.0 / r);
        }
    }
    (diag, sup)
}

/// Solves `R^T x = b` in place for each column of `b`.
fn solve_rt_columns(diag: &[f64], sup: &[f64], b: &mut Array2<f64>) {
    for mut col in b.columns_mut() {
        col[0] /= diag[0];
        for i in 1..diag.len() {
            col[i] = (col[i] - sup[i - 1] * col[i - 1]) / diag[i];
        }
    }
}

/// Solves `R x = b`.
fn solve_r(diag: &[f64], sup: &[f64], b: &Array1<f64>) -> Array1<f64> {
    let n = diag.len();
    let mut x = b.clone();
    x[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (x[i] - sup[i] * x[i + 1]) / diag[i];
    }
    x
}

/// Eigenvalues (ascending) and vectors of the pencil `(S, L)` for symmetric `S`,
/// reduced to the standard problem `eps^2 R^-T S R^-1`. Vectors are returned
/// in the original variables and scaled to `||u'||_{l2_eps} = 1`.
fn symmetric_pencil(s: &Array2<f64>, params: &Params, vectors: bool) -> Result<(Array1<f64>, Option<Array2<f64>>)> {
    let (diag, sup) = laplacian_cholesky(params.dim());
    let mut y = s.clone();
    solve_rt_columns(&diag, &sup, &mut y);
    let mut c = y.t().to_owned();
    solve_rt_columns(&diag, &sup, &mut c);
    let e2 = params.eps() * params.eps();
    c.mapv_inplace(|x| x * e2);
    // symmetrize away the rounding of the two triangular sweeps
    let c = (&c + &c.t()) * 0.5;
    if !vectors {
        return Ok((linalg::eigvalsh(&c)?, None));
    }
    let (w, v) = linalg::eigh(&c)?;
    let mut u = Array2::zeros(v.raw_dim());
    let scale = params.eps().sqrt();
    for (i, col) in v.columns().into_iter().enumerate() {
        // ||u'||^2 = eps^-1 |R u|^2 = eps^-1 |w|^2
        let x = solve_r(&diag, &sup, &col.to_owned()) * scale;
        u.column_mut(i).assign(&x);
    }
    Ok((w, Some(u)))
}

/// Model-specific constant read off the coercivity infimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StabilityConstant {
    /// atomistic: `(A_F - inf) / (eps^2 phi''(2F))`
    NuEps(f64),
    /// QCE: `(inf - A_F) / phi''(2F)`
    LambdaK(f64),
}

impl StabilityConstant {
    pub fn value(self) -> f64 {
        match self {
            StabilityConstant::NuEps(v) | StabilityConstant::LambdaK(v) => v,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// `min <A u, u> / ||u'||^2` over the displacement space.
    pub infimum: f64,
    pub extracted_constant: Option<StabilityConstant>,
    /// Minimizer with `||u'||_{l2_eps} = 1`.
    pub minimizer: InteriorVector<f64>,
}

/// Smallest eigenvalue of the pencil `(sym(A), L)` and its minimizer.
pub fn coercivity_infimum(op: &QcOperator<f64>) -> Result<StabilityReport> {
    let params = *op.params();
    let (w, v) = symmetric_pencil(&op.symmetric_part(), &params, true)?;
    let v = v.expect("vectors requested");
    let infimum = w[0];
    let minimizer = InteriorVector::new(params, v.column(0).to_owned())?;
    let st = op.state();
    let extracted_constant = if st.phi2_2f == 0.0 {
        None
    } else {
        match op.kind() {
            ModelKind::Atomistic => {
                let e2 = params.eps() * params.eps();
                Some(StabilityConstant::NuEps((st.a_f - infimum) / (e2 * st.phi2_2f)))
            }
            ModelKind::Qce => Some(StabilityConstant::LambdaK((infimum - st.a_f) / st.phi2_2f)),
            _ => None,
        }
    };
    Ok(StabilityReport { infimum, extracted_constant, minimizer })
}

/// Extreme eigenvalues and vectors of the pencil `(sym(A), L)`: `(min, u_min, max, u_max)`.
pub fn pencil_extremes(op: &QcOperator<f64>) -> Result<(f64, InteriorVector<f64>, f64, InteriorVector<f64>)> {
    let params = *op.params();
    let (w, v) = symmetric_pencil(&op.symmetric_part(), &params, true)?;
    let v = v.expect("vectors requested");
    let last = w.len() - 1;
    Ok((
        w[0],
        InteriorVector::new(params, v.column(0).to_owned())?,
        w[last],
        InteriorVector::new(params, v.column(last).to_owned())?,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumComparison {
    pub kind_a: ModelKind,
    pub kind_b: ModelKind,
    pub generalized: bool,
    pub params: Params,
    pub state: State,
    /// `l_inf` distance between the ascending real parts.
    pub linf_diff: f64,
    pub max_imag_a: f64,
    pub max_imag_b: f64,
}

/// `sum a_j x_j - shift x` with error-free products and compensated summation.
fn residual_entry(row: &[(f64, f64)], shift: f64, x: f64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &(a, b) in row.iter().chain(std::iter::once(&(-shift, x))) {
        let p = a * b;
        let t = sum + p;
        comp += if sum.abs() >= p.abs() { (sum - t) + p } else { (p - t) + sum };
        comp += a.mul_add(b, -p);
        sum = t;
    }
    sum + comp
}

/// Refines simple real eigenvalues of a banded operator with the two-sided
/// Rayleigh quotient `lambda + y^T (A x - lambda x)`, where `y^T` is the
/// matching row of `V^{-1}` and the residual is formed in doubled precision.
/// The update is second order in the eigenvector errors, so it removes most
/// of the `eps ||A||` error a dense solver leaves on large-norm operators.
///
/// Returns the input unchanged when any eigenvalue is complex.
pub fn refine_real_eigenvalues(op: &QcOperator<f64>, values: &Array1<c64>, vectors: &Array2<c64>) -> Result<Vec<f64>> {
    let raw: Vec<f64> = values.iter().map(|z| z.re).collect();
    if values.iter().any(|z| z.im != 0.0) || vectors.iter().any(|z| z.im != 0.0) {
        return Ok(raw);
    }
    let v = vectors.mapv(|z| z.re);
    let y = linalg::inverse(&v)?;
    Ok(refine_with_left(op, &raw, &v, &y))
}

/// [`refine_real_eigenvalues`] for a symmetric operator with orthonormal
/// eigenvector columns, where `V^{-1} = V^T`.
pub fn refine_symmetric_eigenvalues(op: &QcOperator<f64>, values: &Array1<f64>, vectors: &Array2<f64>) -> Vec<f64> {
    refine_with_left(op, values.as_slice().expect("contiguous"), vectors, &vectors.t().to_owned())
}

/// `lambda_i + sum_r y[i, r] (A x_i - lambda_i x_i)_r` for every column `x_i` of `v`.
fn refine_with_left(op: &QcOperator<f64>, raw: &[f64], v: &Array2<f64>, y: &Array2<f64>) -> Vec<f64> {
    let n = v.nrows();
    let a = op.matrix();
    let bw = op.bandwidth();
    let mut out = Vec::with_capacity(n);
    let mut row = Vec::with_capacity(2 * bw + 1);
    for (i, &lambda) in raw.iter().enumerate() {
        let x = v.column(i);
        let mut corr = 0.0;
        for r in 0..n {
            row.clear();
            for c in r.saturating_sub(bw)..(r + bw + 1).min(n) {
                row.push((a[[r, c]], x[c]));
            }
            corr += y[[i, r]] * residual_entry(&row, lambda, x[r]);
        }
        out.push(lambda + corr);
    }
    out
}

/// Sorted eigenvalue real parts and the largest imaginary part.
fn sorted_spectrum(kind: ModelKind, params: &Params, state: &State, generalized: bool) -> Result<(Vec<f64>, f64)> {
    let op = assemble(kind, params, state)?;
    let mut re: Vec<f64>;
    let mut imag = 0.0;
    if kind.is_symmetric() {
        re = if generalized {
            symmetric_pencil(op.matrix(), params, false)?.0.to_vec()
        } else {
            let (w, v) = linalg::eigh(op.matrix())?;
            refine_symmetric_eigenvalues(&op, &w, &v)
        };
    } else {
        if generalized {
            let w = linalg::eigvals(&preconditioned_matrix(&op))?;
            imag = w.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
            re = w.iter().map(|z| z.re).collect();
        } else {
            let (w, v) = linalg::eig(op.matrix())?;
            imag = w.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
            re = refine_real_eigenvalues(&op, &w, &v)?;
        }
    }
    re.sort_by(f64::total_cmp);
    Ok((re, imag))
}

/// `l_inf` distance between the sorted spectra of two models, either of the
/// operators themselves or of `L^{-1}` times them.
pub fn spectrum_diff(
    kind_a: ModelKind,
    kind_b: ModelKind,
    params: &Params,
    state: &State,
    generalized: bool,
) -> Result<SpectrumComparison> {
    let (a, ia) = sorted_spectrum(kind_a, params, state, generalized)?;
    let (b, ib) = sorted_spectrum(kind_b, params, state, generalized)?;
    let linf_diff = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    Ok(SpectrumComparison {
        kind_a,
        kind_b,
        generalized,
        params: *params,
        state: *state,
        linf_diff,
        max_imag_a: ia,
        max_imag_b: ib,
    })
}

/// `cond(V)` for the eigenvector basis of `L^qcf`.
pub fn eigbasis_condition_standard(params: &Params, state: &State) -> Result<f64> {
    if !(state.a_f > 0.0) {
        return Err(QcError::Domain(format!("A_F = {} must be positive", state.a_f)));
    }
    Ok(eig_dense(assemble(ModelKind::Qcf, params, state)?.matrix())?.basis_condition)
}

/// Relative distance below which an interface eigenvalue counts as `A_F`.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Blocked eigenbasis of `L^{-1} L^qcf`.
#[derive(Debug, Clone)]
pub struct PreconditionedBasis {
    /// Eigenvalues in column order of `vectors`.
    pub eigenvalues: Array1<c64>,
    /// Unit-norm columns `V~`.
    pub vectors: Array2<c64>,
    pub cond_v_tilde: f64,
    /// `cond(D V~)` with `D` the forward-difference map.
    pub cond_w_tilde: f64,
    /// Largest `||X_i v_2|| / ||X_2||_F` over eigenvalues classified as `A_F`.
    pub degenerate_leak: f64,
}

/// Forward-difference map `R^{2N-1} -> R^{2N}` without the `1/eps` factor.
pub fn difference_matrix(dim: usize) -> Array2<f64> {
    let mut d = Array2::zeros((dim + 1, dim));
    for l in 0..=dim {
        if l < dim {
            d[[l, l]] += 1.0;
        }
        if l > 0 {
            d[[l, l - 1]] -= 1.0;
        }
    }
    d
}

/// Orthonormalizes the given columns of `v` in place (modified Gram-Schmidt).
fn orthonormalize(v: &mut Array2<c64>, cols: &[usize]) {
    for (a, &i) in cols.iter().enumerate() {
        for &j in &cols[..a] {
            let proj: c64 = v.column(j).iter().zip(v.column(i)).map(|(x, y)| x.conj() * y).sum();
            let qj = v.column(j).to_owned();
            let mut ci = v.column_mut(i);
            ci.zip_mut_with(&qj, |y, x| *y -= *x * proj);
        }
        let norm = v.column(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.column_mut(i).mapv_inplace(|z| z / norm);
    }
}

/// Eigenbasis of `L^{-1} L^qcf` through its block structure.
///
/// Columns with `|j| >= K+3` of the preconditioned matrix equal `A_F e_j`, so
/// with the index split (left, centre `|j| <= K+2`, right) it reads
/// `[[A_F I, X1, 0], [0, X2, 0], [0, X3, A_F I]]`. The outer unit vectors are
/// eigenvectors; the central ones come from `X2 v2 = lambda v2` extended by
/// `(lambda - A_F)^{-1} X_i v2`. Central eigenvalues within
/// [`DEGENERACY_TOL`] of `A_F` must have `X_i v2 = 0`; their extensions are
/// zero and the cluster is orthonormalized.
pub fn eigbasis_condition_preconditioned(params: &Params, state: &State) -> Result<PreconditionedBasis> {
    if !(state.a_f > 0.0) {
        return Err(QcError::Domain(format!("A_F = {} must be positive", state.a_f)));
    }
    let op = assemble(ModelKind::Qcf, params, state)?;
    let m = preconditioned_matrix(&op);
    let n = params.dim();
    let k = params.k();
    let c0 = params.index(-(k as isize) - 2);
    let c1 = params.index(k as isize + 2) + 1;
    let af = state.a_f;

    let x2 = m.slice(s![c0..c1, c0..c1]).to_owned();
    let x1 = m.slice(s![..c0, c0..c1]).to_owned();
    let x3 = m.slice(s![c1.., c0..c1]).to_owned();
    let x2_norm = frobenius(&x2).max(f64::MIN_POSITIVE);
    let central = eig_dense(&x2)?;

    let mut vectors = Array2::<c64>::zeros((n, n));
    let mut eigenvalues = Array1::<c64>::zeros(n);
    let mut col = 0;
    for i in (0..c0).chain(c1..n) {
        vectors[[i, col]] = c64::new(1.0, 0.0);
        eigenvalues[col] = c64::new(af, 0.0);
        col += 1;
    }
    let x1c = x1.mapv(|x| c64::new(x, 0.0));
    let x3c = x3.mapv(|x| c64::new(x, 0.0));
    let mut degenerate = Vec::new();
    let mut leak = 0.0f64;
    for (lambda, v2) in central.eigenvalues.iter().zip(central.eigenvectors.columns()) {
        let e1 = x1c.dot(&v2);
        let e3 = x3c.dot(&v2);
        let shift = lambda - c64::new(af, 0.0);
        if shift.norm() <= DEGENERACY_TOL * af.abs() {
            let l = e1.iter().chain(e3.iter()).map(|z| z.norm_sqr()).sum::<f64>().sqrt() / x2_norm;
            leak = leak.max(l);
            if l > DEGENERACY_TOL {
                return Err(QcError::Degeneracy(format!(
                    "eigenvalue {lambda} equals A_F = {af} but ||X_i v2|| / ||X2|| = {l:e}"
                )));
            }
            vectors.slice_mut(s![c0..c1, col]).assign(&v2);
            degenerate.push(col);
        } else {
            vectors.slice_mut(s![..c0, col]).assign(&e1.mapv(|z| z / shift));
            vectors.slice_mut(s![c0..c1, col]).assign(&v2);
            vectors.slice_mut(s![c1.., col]).assign(&e3.mapv(|z| z / shift));
        }
        eigenvalues[col] = *lambda;
        col += 1;
    }
    for mut c in vectors.columns_mut() {
        let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        c.mapv_inplace(|z| z / norm);
    }
    orthonormalize(&mut vectors, &degenerate);

    let cond_v_tilde = linalg::condition_number_complex(&vectors)?;
    let d = difference_matrix(n).mapv(|x| c64::new(x, 0.0));
    let cond_w_tilde = linalg::condition_number_complex(&d.dot(&vectors))?;
    Ok(PreconditionedBasis { eigenvalues, vectors, cond_v_tilde, cond_w_tilde, degenerate_leak: leak })
}

/// `(2 A_F, 4 phi''(F) N^2)`, enclosing the spectrum of `L^qnl`.
///
/// The lower end combines `<L^qnl v, v> >= A_F ||v'||^2` with the smallest
/// Laplacian Rayleigh quotient; the upper end uses
/// `<L^qnl v, v> <= phi''(F) ||v'||^2 <= 4 phi''(F) eps^-2 ||v||^2`.
pub fn qnl_eigenvalue_bounds(params: &Params, state: &State) -> Result<(f64, f64)> {
    state.check_regime()?;
    if params.k() + 1 >= params.n() {
        return Err(QcError::InvalidParams("bounds need K < N - 1".into()));
    }
    let n = params.n() as f64;
    Ok((2.0 * state.a_f, 4.0 * state.phi2_f * n * n))
}

/// `||(L^qcf)^{-1}||` from `l_inf` data to `l_inf` second differences: the
/// largest absolute row sum of `L (L^qcf)^{-1}`.
///
/// Forming `L (L^qcf)^{-1}` from a dense inverse loses about
/// `cond(L^qcf) * 1e-16` to cancellation. Instead this inverts
/// `C = L^qcf L^{-1} = A_F I + R L^{-1}`, where `R = L^qcf - A_F L` lives on the
/// atomistic rows `a`. `C` is block upper triangular, so the continuum rows of
/// `C^{-1}` are exactly `e_i / A_F` and the atomistic rows are
/// `C_aa^{-1} [I, -C_ac / A_F]`.
///
/// On the atomistic rows `R = -phi''(2F) eps^2 L^2` (checked against the
/// assembled operator), so `R L^{-1} = -phi''(2F) eps^2 L` there and `C` is
/// formed without any solve.
pub fn qcf_inverse_norm_0inf_2inf(params: &Params, state: &State) -> Result<f64> {
    state.check_regime()?;
    if !(state.a_f > 0.0) {
        return Err(QcError::Domain(format!("A_F = {} must be positive", state.a_f)));
    }
    if params.k() + 2 > params.n() {
        return Err(QcError::InvalidParams("inverse norm needs K <= N - 2".into()));
    }
    let op = assemble(ModelKind::Qcf, params, state)?;
    let lap = crate::chain::laplacian_matrix(params);
    let e2 = params.eps() * params.eps();
    let scale = op.matrix().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut atom = Vec::new();
    for j in params.sites() {
        let i = params.index(j);
        let mut expected = lap.row(i).to_owned() * state.a_f;
        if params.is_atomistic(j) {
            expected -= &(lap.row(i).dot(&lap) * (state.phi2_2f * e2));
            atom.push(i);
        }
        let off = (&op.matrix().row(i) - &expected).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if off > 1e-12 * scale {
            return Err(QcError::InvalidArgument(format!(
                "row {j} of L^qcf has an unexpected stencil (off by {off:e})"
            )));
        }
    }
    let dim = params.dim();
    let mut c_rows = Array2::zeros((atom.len(), dim));
    for (r, &i) in atom.iter().enumerate() {
        let mut row = lap.row(i).to_owned() * (-state.phi2_2f * e2);
        row[i] += state.a_f;
        c_rows.row_mut(r).assign(&row);
    }
    let mut c_aa = Array2::zeros((atom.len(), atom.len()));
    let mut rhs = c_rows.mapv(|x| -x / state.a_f);
    for r in 0..atom.len() {
        for (c, &k) in atom.iter().enumerate() {
            c_aa[[r, c]] = c_rows[[r, k]];
            rhs[[r, k]] = if r == c { 1.0 } else { 0.0 };
        }
    }
    let b = LuFactors::new(&c_aa)?.solve_columns(&rhs);
    let atomistic_max = b.rows().into_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    Ok(atomistic_max.max(1.0 / state.a_f))
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(QcError::LengthMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(QcError::InvalidArgument("slope fit needs two or more positive points".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

/// One `(N, K, A_F, phi2F, quantity, value)` line of a parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub n: usize,
    pub k: usize,
    pub a_f: f64,
    pub phi2_f: f64,
    pub quantity: String,
    pub value: f64,
}

impl SweepRecord {
    pub fn new(params: &Params, state: &State, quantity: impl Into<String>, value: f64) -> Self {
        Self { n: params.n(), k: params.k(), a_f: state.a_f, phi2_f: state.phi2_f, quantity: quantity.into(), value }
    }
}

pub const SWEEP_HEADER: [&str; 6] = ["N", "K", "A_F", "phi2F", "quantity", "value"];

pub fn sweep_table(records: &[SweepRecord]) -> CsvTable {
    let mut t = CsvTable::new(SWEEP_HEADER);
    for r in records {
        t.push_row([
            r.n.to_string(),
            r.k.to_string(),
            fmt17(r.a_f),
            fmt17(r.phi2_f),
            r.quantity.clone(),
            fmt17(r.value),
        ]);
    }
    t
}
