//! The five chain models: nonlinear energies and forces, their linearizations
//! about the uniform state `y^F`, the QCE ghost forces and the experiment
//! right-hand side.
//!
//! Every energy-based model is described by a list of weighted bond terms
//! `w * eps * phi(s * (y_r - y_l) / eps)`. Energies, forces and the exact
//! Hessians at `y^F` are all derived from that one list, so the linear
//! operators are second derivatives of the same energies that produce the
//! forces. QCF has no energy; its forces and matrix are spliced row-wise from
//! the atomistic model (inside `|j| <= K`) and the local model (outside).

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use ndarray::{Array1, Array2};

use crate::chain::{ChainParams, InteriorVector};
use crate::csv::fmt17;
use crate::error::{QcError, Result};
use crate::potentials::{HomogeneousState, PairPotential};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Atomistic,
    Qcl,
    Qcf,
    Qce,
    Qnl,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] =
        [ModelKind::Atomistic, ModelKind::Qcl, ModelKind::Qcf, ModelKind::Qce, ModelKind::Qnl];

    /// QCF forces are not the gradient of any energy.
    pub fn has_energy(self) -> bool {
        self != ModelKind::Qcf
    }

    /// Whether the linearized operator is symmetric.
    pub fn is_symmetric(self) -> bool {
        self != ModelKind::Qcf
    }

    /// Whether the model needs an atomistic region (`K >= 1`).
    pub fn needs_interface(self) -> bool {
        matches!(self, ModelKind::Qcf | ModelKind::Qce | ModelKind::Qnl)
    }

    /// Number of sites of a deformation array: `2N+3` for the atomistic
    /// chain (two padding atoms per side), `2N+1` otherwise.
    pub fn site_count(self, n: usize) -> usize {
        match self {
            ModelKind::Atomistic => 2 * n + 3,
            _ => 2 * n + 1,
        }
    }

    fn first_site(self, n: usize) -> isize {
        match self {
            ModelKind::Atomistic => -(n as isize) - 1,
            _ => -(n as isize),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Atomistic => "atomistic",
            ModelKind::Qcl => "qcl",
            ModelKind::Qcf => "qcf",
            ModelKind::Qce => "qce",
            ModelKind::Qnl => "qnl",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = QcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "atomistic" | "a" => Ok(ModelKind::Atomistic),
            "qcl" => Ok(ModelKind::Qcl),
            "qcf" => Ok(ModelKind::Qcf),
            "qce" => Ok(ModelKind::Qce),
            "qnl" => Ok(ModelKind::Qnl),
            other => Err(QcError::InvalidArgument(format!("unknown model kind '{other}'"))),
        }
    }
}

/// Which reference modulus a bond linearizes with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Reach {
    /// nearest-neighbour bond, reference length `F`
    Near,
    /// next-nearest bond, reference length `2F`
    Next,
    /// Cauchy-Born bond `phi(2 y'_l)`, reference length `2F`
    CauchyBorn,
}

impl Reach {
    fn stretch(self) -> f64 {
        match self {
            Reach::CauchyBorn => 2.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Bond {
    left: isize,
    right: isize,
    reach: Reach,
    weight: f64,
}

/// Bond list for an energy-based model; merged so each (pair, reach) appears once.
fn bonds(kind: ModelKind, n: usize, k: usize) -> Vec<Bond> {
    let n = n as isize;
    let k = k as isize;
    let mut acc: BTreeMap<(isize, isize, Reach), f64> = BTreeMap::new();
    let mut add = |l: isize, r: isize, reach: Reach, w: f64| {
        *acc.entry((l, r, reach)).or_insert(0.0) += w;
    };
    match kind {
        ModelKind::Atomistic => {
            for j in -n..=n + 1 {
                add(j - 1, j, Reach::Near, 1.0);
            }
            for j in -n + 1..=n + 1 {
                add(j - 2, j, Reach::Next, 1.0);
            }
        }
        ModelKind::Qcl => {
            for j in -n + 1..=n {
                add(j - 1, j, Reach::Near, 1.0);
                add(j - 1, j, Reach::CauchyBorn, 1.0);
            }
        }
        ModelKind::Qce => {
            for j in -n + 1..=n {
                add(j - 1, j, Reach::Near, 1.0);
            }
            // Site energies for every site -N..=N; bonds that would leave the
            // chain are dropped, so the pinned sites carry only their inward half.
            for m in -n..=n {
                if m.abs() <= k {
                    add(m - 2, m, Reach::Next, 0.5);
                    add(m, m + 2, Reach::Next, 0.5);
                } else {
                    for b in [m, m + 1] {
                        if b > -n && b <= n {
                            add(b - 1, b, Reach::CauchyBorn, 0.5);
                        }
                    }
                }
            }
        }
        ModelKind::Qnl => {
            for j in -n + 1..=n {
                add(j - 1, j, Reach::Near, 1.0);
            }
            for l in -n..=n {
                if l.abs() <= k {
                    add(l - 1, l + 1, Reach::Next, 1.0);
                } else {
                    for b in [l, l + 1] {
                        if b > -n && b <= n {
                            add(b - 1, b, Reach::CauchyBorn, 0.5);
                        }
                    }
                }
            }
        }
        ModelKind::Qcf => unreachable!("QCF is not an energy-based model"),
    }
    acc.into_iter().map(|((left, right, reach), weight)| Bond { left, right, reach, weight }).collect()
}

/// A linearized chain operator on the interior displacements.
#[derive(Debug, Clone, PartialEq)]
pub struct QcOperator<T> {
    kind: ModelKind,
    params: ChainParams<T>,
    state: HomogeneousState<T>,
    matrix: Array2<T>,
}

impl<T: Real> QcOperator<T> {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn params(&self) -> &ChainParams<T> {
        &self.params
    }

    pub fn state(&self) -> &HomogeneousState<T> {
        &self.state
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest `|i - j|` with a nonzero entry.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0;
        for ((i, j), v) in self.matrix.indexed_iter() {
            if *v != T::zero() {
                bw = bw.max(i.abs_diff(j));
            }
        }
        bw
    }

    /// `max |A - A^T|` relative to `max |A|`.
    pub fn asymmetry(&self) -> T {
        let scale = self.matrix.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        if scale == T::zero() {
            return T::zero();
        }
        let mut d = T::zero();
        for ((i, j), v) in self.matrix.indexed_iter() {
            d = d.max((*v - self.matrix[[j, i]]).abs());
        }
        d / scale
    }

    /// Banded product `A v`, exploiting bandwidth two.
    pub fn apply_array(&self, v: &Array1<T>) -> Array1<T> {
        let d = self.dim();
        let mut out = Array1::zeros(d);
        for i in 0..d {
            let lo = i.saturating_sub(2);
            let hi = (i + 2).min(d - 1);
            let mut s = T::zero();
            for j in lo..=hi {
                s += self.matrix[[i, j]] * v[j];
            }
            out[i] = s;
        }
        out
    }

    pub fn apply(&self, v: &InteriorVector<T>) -> InteriorVector<T> {
        InteriorVector::new(self.params, self.apply_array(v.values()))
            .expect("product of finite operator and finite vector")
    }

    /// `(A + A^T) / 2`.
    pub fn symmetric_part(&self) -> Array2<T> {
        let half = T::lit(0.5);
        (&self.matrix + &self.matrix.t()) * half
    }

    /// Dense dump: one row per line, comma separated, 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_matrix_csv(&self.matrix, w)
    }

    pub fn cast<U: Real>(&self) -> QcOperator<U> {
        QcOperator {
            kind: self.kind,
            params: self.params.cast(),
            state: self.state.cast(),
            matrix: self.matrix.mapv(|x| U::lit(x.as_f64())),
        }
    }
}

pub fn write_matrix_csv<T: Real, W: Write>(m: &Array2<T>, w: &mut W) -> io::Result<()> {
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|x| fmt17(x.as_f64())).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

fn hessian_from_bonds<T: Real>(bonds: &[Bond], params: &ChainParams<T>, state: &HomogeneousState<T>) -> Array2<T> {
    let d = params.dim();
    let inv2 = T::one() / (params.eps() * params.eps());
    let mut m = Array2::zeros((d, d));
    for b in bonds {
        let modulus = match b.reach {
            Reach::Near => state.phi2_f,
            Reach::Next | Reach::CauchyBorn => state.phi2_2f,
        };
        let s = b.reach.stretch();
        let c = T::lit(b.weight * s * s) * modulus * inv2;
        let l = params.try_index(b.left);
        let r = params.try_index(b.right);
        // c (e_r - e_l)(e_r - e_l)^T restricted to the interior
        if let Some(r) = r {
            m[[r, r]] += c;
        }
        if let Some(l) = l {
            m[[l, l]] += c;
        }
        if let (Some(l), Some(r)) = (l, r) {
            m[[l, r]] -= c;
            m[[r, l]] -= c;
        }
    }
    m
}

/// Linearized operator of `kind` about `y^F`.
pub fn assemble<T: Real>(
    kind: ModelKind,
    params: &ChainParams<T>,
    state: &HomogeneousState<T>,
) -> Result<QcOperator<T>> {
    if kind.needs_interface() && params.k() < 1 {
        return Err(QcError::InvalidParams(format!("{kind} requires K >= 1")));
    }
    let matrix = match kind {
        ModelKind::Qcf => {
            let atom = hessian_from_bonds(&bonds(ModelKind::Atomistic, params.n(), params.k()), params, state);
            let mut local = hessian_from_bonds(&bonds(ModelKind::Qcl, params.n(), params.k()), params, state);
            for j in -(params.k() as isize)..=params.k() as isize {
                let i = params.index(j);
                local.row_mut(i).assign(&atom.row(i));
            }
            local
        }
        _ => hessian_from_bonds(&bonds(kind, params.n(), params.k()), params, state),
    };
    Ok(QcOperator { kind, params: *params, state: *state, matrix })
}

/// Uniform deformation `y_j = F j eps` on the sites of `kind`.
pub fn uniform_deformation<T: Real>(kind: ModelKind, params: &ChainParams<T>, strain: T) -> Array1<T> {
    let first = kind.first_site(params.n());
    (0..kind.site_count(params.n())).map(|i| strain * params.position(first + i as isize)).collect()
}

/// `y^F + u` on the sites of `kind`.
pub fn displaced<T: Real>(kind: ModelKind, params: &ChainParams<T>, strain: T, u: &InteriorVector<T>) -> Array1<T> {
    let mut y = uniform_deformation(kind, params, strain);
    let first = kind.first_site(params.n());
    for j in params.sites() {
        y[(j - first) as usize] += u.at(j);
    }
    y
}

/// Extends a `2N+1`-site deformation with the uniform padding atoms `±(N+1)`.
pub fn pad_to_atomistic<T: Real>(params: &ChainParams<T>, strain: T, y: &[T]) -> Result<Array1<T>> {
    let n = params.n();
    if y.len() != 2 * n + 1 {
        return Err(QcError::LengthMismatch { expected: 2 * n + 1, got: y.len() });
    }
    let edge = strain * params.position(n as isize + 1);
    let mut out = Array1::zeros(2 * n + 3);
    out[0] = -edge;
    out[2 * n + 2] = edge;
    for (i, v) in y.iter().enumerate() {
        out[i + 1] = *v;
    }
    Ok(out)
}

/// Drops the padding atoms of a `2N+3`-site deformation.
pub fn truncate_to_qc<T: Real>(params: &ChainParams<T>, y: &[T]) -> Result<Array1<T>> {
    let n = params.n();
    if y.len() != 2 * n + 3 {
        return Err(QcError::LengthMismatch { expected: 2 * n + 3, got: y.len() });
    }
    Ok(y[1..2 * n + 2].iter().copied().collect())
}

fn check_deformation<T: Real>(kind: ModelKind, params: &ChainParams<T>, strain: T, y: &[T]) -> Result<()> {
    let expected = kind.site_count(params.n());
    if y.len() != expected {
        return Err(QcError::LengthMismatch { expected, got: y.len() });
    }
    let n = params.n() as isize;
    let first = kind.first_site(params.n());
    let pinned: &[isize] = match kind {
        ModelKind::Atomistic => &[-n - 1, -n, n, n + 1],
        _ => &[-n, n],
    };
    for &j in pinned {
        let want = strain * params.position(j);
        let got = y[(j - first) as usize];
        let tol = T::epsilon() * T::lit(64.0) * want.abs().max(T::one());
        if (got - want).abs() > tol {
            return Err(QcError::BoundaryViolation { site: j, expected: want.as_f64(), got: got.as_f64() });
        }
    }
    Ok(())
}

/// Bond strain written as `F (r - l) + (u_r - u_l) / eps` with `u = y - y^F`,
/// so a uniform deformation yields exactly `F (r - l)`.
fn bond_strain<T: Real>(b: &Bond, y: &[T], first: isize, params: &ChainParams<T>, strain: T) -> T {
    let disp = |j: isize| y[(j - first) as usize] - strain * params.position(j);
    let span = T::lit((b.right - b.left) as f64);
    T::lit(b.reach.stretch()) * (strain * span + (disp(b.right) - disp(b.left)) / params.eps())
}

/// Total energy of the deformation `y` (length `2N+3` for the atomistic
/// model, `2N+1` otherwise, pinned entries equal to `y^F`).
pub fn energy<T: Real, P: PairPotential<T> + ?Sized>(
    kind: ModelKind,
    params: &ChainParams<T>,
    pot: &P,
    strain: T,
    y: &[T],
) -> Result<T> {
    if !kind.has_energy() {
        return Err(QcError::Domain("the force-based model has no energy".into()));
    }
    if kind.needs_interface() && params.k() < 1 {
        return Err(QcError::InvalidParams(format!("{kind} requires K >= 1")));
    }
    check_deformation(kind, params, strain, y)?;
    let eps = params.eps();
    let first = kind.first_site(params.n());
    let mut e = T::zero();
    for b in bonds(kind, params.n(), params.k()) {
        e += T::lit(b.weight) * eps * pot.phi(bond_strain(&b, y, first, params, strain))?;
    }
    if kind == ModelKind::Qcl {
        let two_f = T::lit(2.0) * strain;
        e += eps * (T::lit(2.0) * pot.phi(strain)? + pot.phi(two_f)?);
    }
    Ok(e)
}

fn energy_force<T: Real, P: PairPotential<T> + ?Sized>(
    kind: ModelKind,
    params: &ChainParams<T>,
    pot: &P,
    strain: T,
    y: &[T],
) -> Result<InteriorVector<T>> {
    let eps = params.eps();
    let first = kind.first_site(params.n());
    let mut grad = Array1::<T>::zeros(params.dim());
    for b in bonds(kind, params.n(), params.k()) {
        let g = T::lit(b.weight * b.reach.stretch()) * pot.phi_prime(bond_strain(&b, y, first, params, strain))?;
        if let Some(r) = params.try_index(b.right) {
            grad[r] += g;
        }
        if let Some(l) = params.try_index(b.left) {
            grad[l] -= g;
        }
    }
    // bond derivatives already carry the eps of the energy; force is -eps^-1 dE/dy
    let inv = -T::one() / eps;
    InteriorVector::new(*params, grad.mapv(|x| x * inv))
}

/// Forces `-eps^-1 dE/dy_j` at the interior sites; for QCF, the atomistic
/// force inside `|j| <= K` and the local force elsewhere.
pub fn force<T: Real, P: PairPotential<T> + ?Sized>(
    kind: ModelKind,
    params: &ChainParams<T>,
    pot: &P,
    strain: T,
    y: &[T],
) -> Result<InteriorVector<T>> {
    if kind.needs_interface() && params.k() < 1 {
        return Err(QcError::InvalidParams(format!("{kind} requires K >= 1")));
    }
    check_deformation(kind, params, strain, y)?;
    match kind {
        ModelKind::Qcf => {
            let atom = energy_force(
                ModelKind::Atomistic,
                params,
                pot,
                strain,
                pad_to_atomistic(params, strain, y)?.as_slice().unwrap(),
            )?;
            let mut out = energy_force(ModelKind::Qcl, params, pot, strain, y)?;
            for j in -(params.k() as isize)..=params.k() as isize {
                let i = params.index(j);
                out.values_mut()[i] = atom.values()[i];
            }
            Ok(out)
        }
        _ => energy_force(kind, params, pot, strain, y),
    }
}

/// QCE ghost forces `g = F^qcf(y^F) - F^qce(y^F)`, supported on `±(K-1) .. ±(K+2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GhostForceVector<T> {
    pub values: InteriorVector<T>,
}

/// Closed-form ghost forces: `+phi'(2F)/(2 eps)` at `K-1, K+2`,
/// `-phi'(2F)/(2 eps)` at `K, K+1`, mirrored antisymmetrically. Contributions
/// from the two interfaces are summed, which matters when `K = 1`.
pub fn ghost_force_vector<T: Real>(
    params: &ChainParams<T>,
    state: &HomogeneousState<T>,
) -> Result<GhostForceVector<T>> {
    if params.k() < 1 {
        return Err(QcError::InvalidParams("ghost forces require K >= 1".into()));
    }
    let k = params.k() as isize;
    let c = state.phi1_2f / (T::lit(2.0) * params.eps());
    let mut g = InteriorVector::zeros(*params);
    let pattern = [(k - 1, c), (k, -c), (k + 1, -c), (k + 2, c)];
    for (j, v) in pattern {
        if let Some(i) = params.try_index(j) {
            g.values_mut()[i] += v;
        }
        if let Some(i) = params.try_index(-j) {
            g.values_mut()[i] -= v;
        }
    }
    Ok(GhostForceVector { values: g })
}

/// `f_j = h(x_j) cos(3 pi x_j)` with `h = 1` for `x >= 0` and `-1` otherwise.
pub fn rhs_cosine<T: Real>(params: &ChainParams<T>) -> InteriorVector<T> {
    let three_pi = T::lit(3.0 * std::f64::consts::PI);
    InteriorVector::from_fn(*params, |j| {
        let x = params.position(j);
        let h = if j >= 0 { T::one() } else { -T::one() };
        h * (three_pi * x).cos()
    })
}
