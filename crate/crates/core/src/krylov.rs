//! Full GMRES in three inner-product/preconditioner configurations, the
//! ghost-force-correction stationary iteration, the modified-CG step-size
//! probe and a dense reference solve.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use ndarray::{Array1, Array2};

use crate::chain::{ChainParams, InteriorVector, LaplacianSolver};
use crate::csv::{fmt17, CsvTable};
use crate::error::{QcError, Result};
use crate::linalg::{self, LuFactors};
use crate::operators::{assemble, rhs_cosine, ModelKind, QcOperator};
use crate::potentials::HomogeneousState;
use crate::scalar::Real;
use crate::spectral::pencil_extremes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// operator `A`, `l2_eps` inner product
    Plain,
    /// operator `L^{-1} A`, `l2_eps` inner product
    PrecondL2,
    /// operator `L^{-1} A`, `U^{1,2}` inner product `<L a, b>`
    PrecondU12,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Plain, Variant::PrecondL2, Variant::PrecondU12];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::PrecondL2 => "precond-l2",
            Variant::PrecondU12 => "precond-u12",
        }
    }

    pub fn is_preconditioned(self) -> bool {
        self != Variant::Plain
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = QcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Variant::Plain),
            "precond-l2" => Ok(Variant::PrecondL2),
            "precond-u12" => Ok(Variant::PrecondU12),
            other => Err(QcError::InvalidArgument(format!(
                "unknown variant '{other}' (expected plain, precond-l2 or precond-u12)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresConfig<T> {
    pub variant: Variant,
    /// Defaults to the problem dimension `2N - 1`.
    pub max_iter: Option<usize>,
    pub rel_tol: T,
    /// Reference solution for error traces.
    pub record_error_against: Option<InteriorVector<T>>,
}

impl<T: Real> GmresConfig<T> {
    pub fn new(variant: Variant) -> Self {
        Self { variant, max_iter: None, rel_tol: T::lit(1e-12), record_error_against: None }
    }

    pub fn max_iter(mut self, m: usize) -> Self {
        self.max_iter = Some(m);
        self
    }

    pub fn rel_tol(mut self, tol: T) -> Self {
        self.rel_tol = tol;
        self
    }

    pub fn with_reference(mut self, u: InteriorVector<T>) -> Self {
        self.record_error_against = Some(u);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_iter == Some(0) {
            return Err(QcError::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.rel_tol > T::zero()) {
            return Err(QcError::InvalidArgument("rel_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Per-iteration history; entry 0 belongs to the initial iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace<T> {
    /// Residual norms in the variant's native norm.
    pub residual_norms: Vec<T>,
    pub error_norms: Option<Vec<T>>,
    pub converged: bool,
    pub iterations: usize,
}

impl<T: Real> IterationTrace<T> {
    /// `||r^(m)|| / ||r^(0)||`.
    pub fn relative_residuals(&self) -> Vec<T> {
        let r0 = self.residual_norms[0];
        self.residual_norms.iter().map(|r| if r0 == T::zero() { T::zero() } else { *r / r0 }).collect()
    }

    /// Columns `iteration, residual_norm, error_norm` (error empty when not recorded).
    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(["iteration", "residual_norm", "error_norm"]);
        for (m, r) in self.residual_norms.iter().enumerate() {
            let e = self.error_norms.as_ref().map(|e| fmt17(e[m].as_f64())).unwrap_or_default();
            t.push_row([m.to_string(), fmt17(r.as_f64()), e]);
        }
        t
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        self.to_table().write_to(w)
    }
}

fn dot_l2<T: Real>(a: &Array1<T>, b: &Array1<T>, eps: T) -> T {
    eps * a.dot(b)
}

/// `eps * sum a'_l b'_l` over the `2N` bonds, i.e. `<L a, b>_{l2_eps}`.
fn dot_u12<T: Real>(a: &Array1<T>, b: &Array1<T>, eps: T) -> T {
    let n = a.len();
    let mut s = T::zero();
    let mut prev_a = T::zero();
    let mut prev_b = T::zero();
    for i in 0..=n {
        let (ca, cb) = if i < n { (a[i], b[i]) } else { (T::zero(), T::zero()) };
        s += (ca - prev_a) * (cb - prev_b);
        prev_a = ca;
        prev_b = cb;
    }
    s / eps
}

struct KrylovSystem<'a, T: Real> {
    op: &'a QcOperator<T>,
    variant: Variant,
    solver: Option<LaplacianSolver<T>>,
    eps: T,
}

impl<T: Real> KrylovSystem<'_, T> {
    fn apply(&self, v: &Array1<T>) -> Array1<T> {
        let av = self.op.apply_array(v);
        match &self.solver {
            Some(s) => s.solve_array(&av),
            None => av,
        }
    }

    fn rhs(&self, f: &Array1<T>) -> Array1<T> {
        match &self.solver {
            Some(s) => s.solve_array(f),
            None => f.clone(),
        }
    }

    fn dot(&self, a: &Array1<T>, b: &Array1<T>) -> T {
        match self.variant {
            Variant::PrecondU12 => dot_u12(a, b, self.eps),
            _ => dot_l2(a, b, self.eps),
        }
    }

    fn norm(&self, a: &Array1<T>) -> T {
        self.dot(a, a).max(T::zero()).sqrt()
    }
}

fn givens<T: Real>(a: T, b: T) -> (T, T) {
    if b == T::zero() {
        (T::one(), T::zero())
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Minimizer `y` of the rotated least-squares problem: back substitution on
/// the leading `m x m` triangle.
fn back_substitute<T: Real>(h: &[Vec<T>], g: &[T], m: usize) -> Vec<T> {
    let mut y = vec![T::zero(); m];
    for i in (0..m).rev() {
        let mut s = g[i];
        for j in i + 1..m {
            s -= h[j][i] * y[j];
        }
        y[i] = s / h[i][i];
    }
    y
}

fn combine<T: Real>(u0: &Array1<T>, basis: &[Array1<T>], y: &[T]) -> Array1<T> {
    let mut u = u0.clone();
    for (v, c) in basis.iter().zip(y) {
        u.scaled_add(*c, v);
    }
    u
}

/// Full (unrestarted) GMRES for `A u = f` starting from `u0`.
///
/// Arnoldi uses modified Gram-Schmidt in the variant's inner product with a
/// second pass whenever the orthogonalized norm falls below `1/sqrt(2)` of its
/// initial value. The least-squares problem is updated with Givens rotations.
/// A subdiagonal entry at most `1e-14` times the largest `||A v_j||` seen so
/// far ends the iteration with the exact subspace solution.
pub fn gmres_solve<T: Real>(
    op: &QcOperator<T>,
    f: &InteriorVector<T>,
    cfg: &GmresConfig<T>,
    u0: &InteriorVector<T>,
) -> Result<(InteriorVector<T>, IterationTrace<T>)> {
    cfg.validate()?;
    let params = *op.params();
    for v in [f, u0] {
        if v.values().len() != params.dim() {
            return Err(QcError::LengthMismatch { expected: params.dim(), got: v.values().len() });
        }
    }
    let sys = KrylovSystem {
        op,
        variant: cfg.variant,
        solver: cfg.variant.is_preconditioned().then(|| LaplacianSolver::new(params)),
        eps: params.eps(),
    };
    let max_iter = cfg.max_iter.unwrap_or(params.dim());
    let error_norm = |u: &Array1<T>| -> Option<T> {
        cfg.record_error_against.as_ref().map(|r| {
            let e = u - r.values();
            match cfg.variant {
                Variant::PrecondU12 => dot_u12(&e, &e, params.eps()).sqrt(),
                _ => dot_l2(&e, &e, params.eps()).sqrt(),
            }
        })
    };

    let x0 = u0.values().clone();
    let r0 = &sys.rhs(f.values()) - &sys.apply(&x0);
    let beta = sys.norm(&r0);
    let mut residuals = vec![beta];
    let mut errors: Option<Vec<T>> = error_norm(&x0).map(|e| vec![e]);
    let finish = |u: Array1<T>, residuals: Vec<T>, errors: Option<Vec<T>>, converged: bool| {
        let iterations = residuals.len() - 1;
        Ok((
            InteriorVector::new(params, u)?,
            IterationTrace { residual_norms: residuals, error_norms: errors, converged, iterations },
        ))
    };
    if beta == T::zero() {
        return finish(x0, residuals, errors, true);
    }
    let target = cfg.rel_tol * beta;

    let mut basis: Vec<Array1<T>> = vec![r0.mapv(|x| x / beta)];
    // h[j] holds column j of the Hessenberg matrix, rotated in place
    let mut h: Vec<Vec<T>> = Vec::new();
    let mut cs: Vec<(T, T)> = Vec::new();
    let mut g: Vec<T> = vec![beta];
    let mut scale = T::zero();
    let reorth = T::one() / T::lit(2.0).sqrt();

    for j in 0..max_iter {
        let mut w = sys.apply(&basis[j]);
        let initial = sys.norm(&w);
        scale = scale.max(initial);
        let mut col = vec![T::zero(); j + 2];
        for (i, v) in basis.iter().enumerate() {
            let c = sys.dot(&w, v);
            col[i] = c;
            w.scaled_add(-c, v);
        }
        let mut hn = sys.norm(&w);
        if hn < reorth * initial {
            for (i, v) in basis.iter().enumerate() {
                let c = sys.dot(&w, v);
                col[i] += c;
                w.scaled_add(-c, v);
            }
            hn = sys.norm(&w);
        }
        let breakdown = hn <= T::lit(1e-14) * scale;
        col[j + 1] = if breakdown { T::zero() } else { hn };

        for (i, (c, s)) in cs.iter().enumerate() {
            let (a, b) = (col[i], col[i + 1]);
            col[i] = *c * a + *s * b;
            col[i + 1] = -*s * a + *c * b;
        }
        let (c, s) = givens(col[j], col[j + 1]);
        col[j] = c * col[j] + s * col[j + 1];
        col[j + 1] = T::zero();
        cs.push((c, s));
        let gj = g[j];
        g[j] = c * gj;
        g.push(-s * gj);
        h.push(col);

        let res = g[j + 1].abs();
        residuals.push(res);
        let done = breakdown || res <= target;
        if errors.is_some() || done || j + 1 == max_iter {
            let y = back_substitute(&h, &g, j + 1);
            let u = combine(&x0, &basis[..j + 1], &y);
            if let (Some(errs), Some(e)) = (errors.as_mut(), error_norm(&u)) {
                errs.push(e);
            }
            if done || j + 1 == max_iter {
                return finish(u, residuals, errors, res <= target || breakdown);
            }
        }
        basis.push(w.mapv(|x| x / hn));
    }
    unreachable!("loop returns at max_iter")
}

/// Residual of `u` in the variant's native norm.
pub fn native_residual<T: Real>(
    op: &QcOperator<T>,
    f: &InteriorVector<T>,
    u: &InteriorVector<T>,
    variant: Variant,
) -> T {
    let params = *op.params();
    let sys = KrylovSystem {
        op,
        variant,
        solver: variant.is_preconditioned().then(|| LaplacianSolver::new(params)),
        eps: params.eps(),
    };
    let r = &sys.rhs(f.values()) - &sys.apply(u.values());
    sys.norm(&r)
}

/// Contraction factor `q = (1 - sqrt(A_F/phi''_F)) / (1 + sqrt(A_F/phi''_F))`.
pub fn preconditioned_rate<T: Real>(state: &HomogeneousState<T>) -> T {
    let r = (state.a_f / state.phi2_f).sqrt();
    (T::one() - r) / (T::one() + r)
}

/// Contraction factor `(1 - rho) / (1 + rho)`, `rho = N^{-1} sqrt(2 A_F / phi''_F)`.
pub fn plain_rate<T: Real>(params: &ChainParams<T>, state: &HomogeneousState<T>) -> T {
    let rho = params.eps() * (T::lit(2.0) * state.a_f / state.phi2_f).sqrt();
    (T::one() - rho) / (T::one() + rho)
}

/// Residual-reduction bound `2 cond rate^m` for iteration `m`.
pub fn theoretical_envelope<T: Real>(
    variant: Variant,
    m: usize,
    state: &HomogeneousState<T>,
    params: &ChainParams<T>,
    cond_basis: T,
) -> T {
    let rate = match variant {
        Variant::Plain => plain_rate(params, state),
        _ => preconditioned_rate(state),
    };
    let power = if m == 0 { T::one() } else { rate.powi(m as i32) };
    T::lit(2.0) * cond_basis * power
}

#[derive(Debug, Clone)]
pub struct StationaryResult<T> {
    /// Spectral radius of `I - (L^qce)^{-1} L^qcf`.
    pub spectral_radius: f64,
    /// Smallest eigenvalue of `L^qce`.
    pub qce_min_eigenvalue: f64,
    pub trace: IterationTrace<T>,
    pub solution: InteriorVector<T>,
    pub converged: bool,
}

/// `u <- u + (L^qce)^{-1} (f - L^qcf u)`, run for at most `max_iter` steps or
/// until `||f - L^qcf u||_{l2_eps} <= tol ||f||_{l2_eps}`. Divergence is
/// reported through `converged = false`, not as an error.
pub fn gfc_stationary_solve<T: Real>(
    params: &ChainParams<T>,
    state: &HomogeneousState<T>,
    f: &InteriorVector<T>,
    u0: &InteriorVector<T>,
    max_iter: usize,
    tol: T,
) -> Result<StationaryResult<T>> {
    let qce = assemble(ModelKind::Qce, params, state)?;
    let qcf = assemble(ModelKind::Qcf, params, state)?;
    let qce64 = qce.matrix().mapv(|x| x.as_f64());
    let qcf64 = qcf.matrix().mapv(|x| x.as_f64());
    let evs = linalg::eigvalsh(&qce64)?;
    let qce_min = evs[0];
    let norm = evs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let abs_min = evs.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if abs_min <= 1e-12 * norm {
        return Err(QcError::Singular(format!("L^qce is numerically singular, smallest eigenvalue {qce_min:e}")));
    }
    let iteration = Array2::eye(params.dim()) - LuFactors::new(&qce64)?.solve_columns(&qcf64);
    let spectral_radius = linalg::eigvals(&iteration)?.iter().fold(0.0f64, |m, z| m.max(z.norm()));

    let lu = LuFactors::new(qce.matrix())?;
    let eps = params.eps();
    let fnorm = dot_l2(f.values(), f.values(), eps).sqrt();
    let mut u = u0.values().clone();
    let residual = |u: &Array1<T>| f.values() - &qcf.apply_array(u);
    let mut r = residual(&u);
    let mut norms = vec![dot_l2(&r, &r, eps).sqrt()];
    let mut converged = norms[0] <= tol * fnorm;
    while !converged && norms.len() <= max_iter {
        u += &lu.solve(&r);
        r = residual(&u);
        let rn = dot_l2(&r, &r, eps).sqrt();
        norms.push(rn);
        if !rn.is_finite() {
            break;
        }
        converged = rn <= tol * fnorm;
    }
    let iterations = norms.len() - 1;
    let solution =
        if u.iter().all(|x| x.is_finite()) { InteriorVector::new(*params, u)? } else { InteriorVector::zeros(*params) };
    Ok(StationaryResult {
        spectral_radius,
        qce_min_eigenvalue: qce_min,
        trace: IterationTrace { residual_norms: norms, error_norms: None, converged, iterations },
        solution,
        converged,
    })
}

/// Linearized step size for one residual direction.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSize {
    pub label: String,
    /// `<r, d>_{l2_eps}` for a residual with `||r||_{l2_eps} = 1`.
    pub numerator: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct CgProbeReport {
    /// Direction with `||d||_{U^{1,2}} = 1` and `<L^qcf d, d>` near zero.
    pub direction: InteriorVector<f64>,
    /// Blend parameter of `d(t) = (1 - t) v_+ + t v_-`.
    pub t: f64,
    /// `<L^qcf d, d>_{l2_eps}` after normalization.
    pub rayleigh: f64,
    /// `<L^qcf d(0), d(0)>` and `<L^qcf d(1), d(1)>`.
    pub bracket: (f64, f64),
    pub steps: Vec<StepSize>,
}

impl CgProbeReport {
    pub fn alpha_magnitudes(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.alpha.abs()).collect()
    }
}

/// Finds a direction on which the QCF quadratic form vanishes and reports the
/// resulting modified-CG step sizes `alpha = <r, d> / <L^qcf d, d>`.
pub fn modified_cg_probe(params: &ChainParams<f64>, state: &HomogeneousState<f64>) -> Result<CgProbeReport> {
    let op = assemble(ModelKind::Qcf, params, state)?;
    let (lo, v_minus, _hi, v_plus) = pencil_extremes(&op)?;
    if lo >= 0.0 {
        return Err(QcError::NoSingularDirection);
    }
    let eps = params.eps();
    let blend = |t: f64| v_plus.values() * (1.0 - t) + v_minus.values() * t;
    let form = |d: &Array1<f64>| dot_l2(&op.apply_array(d), d, eps);
    let u12 = |d: &Array1<f64>| dot_u12(d, d, eps);
    let (q0, q1) = (form(&blend(0.0)), form(&blend(1.0)));
    if !(q0 > 0.0 && q1 < 0.0) {
        return Err(QcError::NoSingularDirection);
    }
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut t = 0.5;
    for _ in 0..200 {
        t = 0.5 * (a + b);
        let d = blend(t);
        let q = form(&d);
        if q.abs() <= 1e-10 * u12(&d) || t <= a || t >= b {
            break;
        }
        if q > 0.0 {
            a = t;
        } else {
            b = t;
        }
    }
    let d = blend(t);
    let d = &d / u12(&d).sqrt();
    let rayleigh = form(&d);
    let direction = InteriorVector::new(*params, d.clone())?;

    let unit = |v: Array1<f64>| {
        let n = dot_l2(&v, &v, eps).sqrt();
        v / n
    };
    let mut family: Vec<(String, Array1<f64>)> = vec![("rhs_cosine".into(), unit(rhs_cosine(params).into_values()))];
    for k in 1..=3 {
        let mode = InteriorVector::from_fn(*params, |j| {
            (k as f64 * std::f64::consts::PI * (params.position(j) + 1.0) / 2.0).sin()
        });
        family.push((format!("sine_{k}"), unit(mode.into_values())));
    }
    family.push(("direction".into(), unit(d.clone())));
    let steps = family
        .into_iter()
        .map(|(label, r)| {
            let numerator = dot_l2(&r, &d, eps);
            StepSize { label, numerator, alpha: numerator / rayleigh }
        })
        .collect();
    Ok(CgProbeReport { direction, t, rayleigh, bracket: (q0, q1), steps })
}

/// Dense pivoted-LU solve of `A u = f`.
pub fn direct_solve<T: Real>(op: &QcOperator<T>, f: &InteriorVector<T>) -> Result<InteriorVector<T>> {
    let u = linalg::dense_solve(op.matrix(), f.values())?;
    InteriorVector::new(*op.params(), u)
}
