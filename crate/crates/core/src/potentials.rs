//! Pair potentials, homogeneous-state moduli and critical-strain root finding.

use std::fmt;

use crate::error::{QcError, Result};
use crate::scalar::Real;

/// Scaled two-body interaction `phi(r)` with closed-form first and second derivatives.
pub trait PairPotential<T: Real> {
    fn phi(&self, r: T) -> Result<T>;
    fn phi_prime(&self, r: T) -> Result<T>;
    fn phi_double_prime(&self, r: T) -> Result<T>;

    fn name(&self) -> String {
        "custom".to_string()
    }
}

impl<T: Real, P: PairPotential<T> + ?Sized> PairPotential<T> for &P {
    fn phi(&self, r: T) -> Result<T> {
        (**self).phi(r)
    }
    fn phi_prime(&self, r: T) -> Result<T> {
        (**self).phi_prime(r)
    }
    fn phi_double_prime(&self, r: T) -> Result<T> {
        (**self).phi_double_prime(r)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

fn check_distance<T: Real>(r: T) -> Result<()> {
    if r > T::zero() && r.is_finite() {
        Ok(())
    } else {
        Err(QcError::NonPositiveDistance(r.as_f64()))
    }
}

/// Normalized Lennard-Jones `phi(r) = r^-12 - 2 r^-6`, minimum `-1` at `r = 1`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LennardJones;

pub fn lennard_jones() -> LennardJones {
    LennardJones
}

impl<T: Real> PairPotential<T> for LennardJones {
    fn phi(&self, r: T) -> Result<T> {
        check_distance(r)?;
        let r6 = r.powi(-6);
        Ok(r6 * r6 - T::lit(2.0) * r6)
    }

    fn phi_prime(&self, r: T) -> Result<T> {
        check_distance(r)?;
        Ok(T::lit(-12.0) * r.powi(-13) + T::lit(12.0) * r.powi(-7))
    }

    fn phi_double_prime(&self, r: T) -> Result<T> {
        check_distance(r)?;
        Ok(T::lit(156.0) * r.powi(-14) - T::lit(84.0) * r.powi(-8))
    }

    fn name(&self) -> String {
        "lj".to_string()
    }
}

/// Normalized Morse `phi(r) = e^{-2a(r-1)} - 2 e^{-a(r-1)}`, minimum `-1` at `r = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Morse {
    pub alpha: f64,
}

impl<T: Real> PairPotential<T> for Morse {
    fn phi(&self, r: T) -> Result<T> {
        check_distance(r)?;
        let e = (-T::lit(self.alpha) * (r - T::one())).exp();
        Ok(e * e - T::lit(2.0) * e)
    }

    fn phi_prime(&self, r: T) -> Result<T> {
        check_distance(r)?;
        let a = T::lit(self.alpha);
        let e = (-a * (r - T::one())).exp();
        Ok(T::lit(2.0) * a * (e - e * e))
    }

    fn phi_double_prime(&self, r: T) -> Result<T> {
        check_distance(r)?;
        let a = T::lit(self.alpha);
        let e = (-a * (r - T::one())).exp();
        Ok(T::lit(2.0) * a * a * (T::lit(2.0) * e * e - e))
    }

    fn name(&self) -> String {
        format!("morse:{}", self.alpha)
    }
}

type ScalarFn<T> = Box<dyn Fn(T) -> T + Send + Sync>;

/// Potential assembled from user closures; the caller vouches for the derivatives.
pub struct FnPotential<T> {
    name: String,
    phi: ScalarFn<T>,
    d1: ScalarFn<T>,
    d2: ScalarFn<T>,
}

impl<T> FnPotential<T> {
    pub fn new(
        name: impl Into<String>,
        phi: impl Fn(T) -> T + Send + Sync + 'static,
        d1: impl Fn(T) -> T + Send + Sync + 'static,
        d2: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), phi: Box::new(phi), d1: Box::new(d1), d2: Box::new(d2) }
    }
}

impl<T> fmt::Debug for FnPotential<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPotential").field("name", &self.name).finish_non_exhaustive()
    }
}

impl<T: Real> PairPotential<T> for FnPotential<T> {
    fn phi(&self, r: T) -> Result<T> {
        check_distance(r)?;
        Ok((self.phi)(r))
    }
    fn phi_prime(&self, r: T) -> Result<T> {
        check_distance(r)?;
        Ok((self.d1)(r))
    }
    fn phi_double_prime(&self, r: T) -> Result<T> {
        check_distance(r)?;
        Ok((self.d2)(r))
    }
    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Moduli of the uniformly strained chain that drive every linearized operator.
///
/// `a_f` is stored as `phi2_f + 4 phi2_2f` and never set independently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousState<T> {
    /// Macroscopic strain `F`; `None` for states built directly from moduli.
    pub strain: Option<T>,
    pub phi2_f: T,
    pub phi2_2f: T,
    pub a_f: T,
    /// `phi'(2F)`, the magnitude of the QCE ghost forces.
    pub phi1_2f: T,
}

impl<T: Real> HomogeneousState<T> {
    /// State from raw moduli `phi''(F)`, `phi''(2F)`, `phi'(2F)`.
    pub fn from_second_derivatives(phi2_f: T, phi2_2f: T, phi1_2f: T) -> Self {
        Self { strain: None, phi2_f, phi2_2f, a_f: phi2_f + T::lit(4.0) * phi2_2f, phi1_2f }
    }

    /// State parameterized by `phi''(F)` and the continuum modulus `A_F`;
    /// `phi''(2F) = (A_F - phi''(F)) / 4`. Ghost-force magnitude is zero.
    pub fn from_moduli(phi2_f: T, a_f: T) -> Self {
        Self::from_second_derivatives(phi2_f, (a_f - phi2_f) / T::lit(4.0), T::zero())
    }

    pub fn with_phi1_2f(mut self, phi1_2f: T) -> Self {
        self.phi1_2f = phi1_2f;
        self
    }

    /// Requires `phi''(F) > 0` and `phi''(2F) <= 0`.
    pub fn check_regime(&self) -> Result<()> {
        if !(self.phi2_f > T::zero()) {
            return Err(QcError::Domain(format!("phi''(F) = {} must be positive", self.phi2_f)));
        }
        if self.phi2_2f > T::zero() {
            return Err(QcError::Domain(format!("phi''(2F) = {} must be non-positive", self.phi2_2f)));
        }
        Ok(())
    }

    /// Regime check plus `A_F > 0`.
    pub fn check_stable(&self) -> Result<()> {
        self.check_regime()?;
        if !(self.a_f > T::zero()) {
            return Err(QcError::Domain(format!("A_F = {} must be positive", self.a_f)));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> HomogeneousState<U> {
        HomogeneousState {
            strain: self.strain.map(|s| U::lit(s.as_f64())),
            phi2_f: U::lit(self.phi2_f.as_f64()),
            phi2_2f: U::lit(self.phi2_2f.as_f64()),
            a_f: U::lit(self.a_f.as_f64()),
            phi1_2f: U::lit(self.phi1_2f.as_f64()),
        }
    }
}

pub fn moduli<T: Real, P: PairPotential<T> + ?Sized>(pot: &P, strain: T) -> Result<HomogeneousState<T>> {
    if !(strain > T::zero()) {
        return Err(QcError::Domain(format!("strain F = {strain} must be positive")));
    }
    let two_f = T::lit(2.0) * strain;
    let mut s = HomogeneousState::from_second_derivatives(
        pot.phi_double_prime(strain)?,
        pot.phi_double_prime(two_f)?,
        pot.phi_prime(two_f)?,
    );
    s.strain = Some(strain);
    Ok(s)
}

/// Bracketing window for the critical-strain searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    /// Bisection stops once `|g(F)|` drops below this.
    pub tol: f64,
}

impl Default for RootBracket {
    fn default() -> Self {
        Self { lo: 1.0, hi: 2.0, step: 0.01, tol: 1e-12 }
    }
}

/// First sign change of `g` on the scan grid, refined by bisection until
/// `|g| <= tol` (or the bracket collapses to adjacent floats).
pub fn scan_bisect<T: Real>(mut g: impl FnMut(T) -> Result<T>, bracket: RootBracket) -> Result<T> {
    let steps = ((bracket.hi - bracket.lo) / bracket.step).round() as usize;
    let at = |i: usize| T::lit(bracket.lo + i as f64 * bracket.step);
    let mut a = at(0);
    let mut ga = g(a)?;
    if ga == T::zero() {
        return Ok(a);
    }
    for i in 1..=steps {
        let b = at(i);
        let gb = g(b)?;
        if gb == T::zero() {
            return Ok(b);
        }
        if (ga < T::zero()) != (gb < T::zero()) {
            let (mut lo, mut hi, mut glo) = (a, b, ga);
            let tol = T::lit(bracket.tol);
            for _ in 0..400 {
                let mid = (lo + hi) / T::lit(2.0);
                if mid <= lo || mid >= hi {
                    break;
                }
                let gm = g(mid)?;
                if gm.abs() <= tol {
                    return Ok(mid);
                }
                if (gm < T::zero()) == (glo < T::zero()) {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            return Ok((lo + hi) / T::lit(2.0));
        }
        a = b;
        ga = gb;
    }
    Err(QcError::NoSignChange { lo: bracket.lo, hi: bracket.hi })
}

/// `A_F = phi''(F) + 4 phi''(2F)`.
pub fn continuum_modulus<T: Real, P: PairPotential<T> + ?Sized>(pot: &P, strain: T) -> Result<T> {
    Ok(pot.phi_double_prime(strain)? + T::lit(4.0) * pot.phi_double_prime(T::lit(2.0) * strain)?)
}

/// Strain `F_*` at which `A_F` vanishes.
pub fn critical_strain_atomistic<T: Real, P: PairPotential<T> + ?Sized>(pot: &P) -> Result<T> {
    critical_strain_atomistic_in(pot, RootBracket::default())
}

pub fn critical_strain_atomistic_in<T: Real, P: PairPotential<T> + ?Sized>(pot: &P, bracket: RootBracket) -> Result<T> {
    scan_bisect(|f| continuum_modulus(pot, f), bracket)
}

/// Strain at which the linearized QCE operator loses positivity:
/// root of `A_F + lambda_k phi''(2F)`.
pub fn critical_strain_gfc<T: Real, P: PairPotential<T> + ?Sized>(pot: &P, lambda_k: T) -> Result<T> {
    critical_strain_gfc_in(pot, lambda_k, RootBracket::default())
}

pub fn critical_strain_gfc_in<T: Real, P: PairPotential<T> + ?Sized>(
    pot: &P,
    lambda_k: T,
    bracket: RootBracket,
) -> Result<T> {
    if lambda_k < T::zero() || lambda_k > T::one() {
        return Err(QcError::InvalidArgument(format!("lambda_K = {lambda_k} outside [0, 1]")));
    }
    scan_bisect(|f| gfc_modulus(pot, f, lambda_k), bracket)
}

/// `A_F + lambda_k phi''(2F)`.
pub fn gfc_modulus<T: Real, P: PairPotential<T> + ?Sized>(pot: &P, strain: T, lambda_k: T) -> Result<T> {
    Ok(continuum_modulus(pot, strain)? + lambda_k * pot.phi_double_prime(T::lit(2.0) * strain)?)
}
