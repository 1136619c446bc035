//! Material laws: Neo-Hookean hyperelasticity (plane strain), the poroelastic
//! skeleton energy with its power-term hardening, the algebraic porosity
//! closure, deformation-dependent Kozeny-Carman permeability, and the
//! Beavers-Joseph slip coefficient.
//!
//! All in-plane tensors are 2x2; the plane-strain embedding fixes F_33 = 1 so
//! the 3D invariants are tr(C) = tr(C_2x2) + 1 and J = det(F_2x2).

use crate::error::{Error, Result};
use crate::math::{Mat2, Scalar, Vec2};

/// Deformation state at a quadrature point (plane strain).
#[derive(Clone, Copy, Debug)]
pub struct KinematicState {
    /// In-plane deformation gradient.
    pub f: Mat2<f64>,
    /// det of the embedded 3D gradient = det of the in-plane block.
    pub j: f64,
    /// Green-Lagrange strain (in-plane block).
    pub e: Mat2<f64>,
}

impl KinematicState {
    pub fn from_grad_u(grad_u: &Mat2<f64>) -> Result<Self> {
        let f = Mat2::identity().add(grad_u);
        Self::from_f(f)
    }

    pub fn from_f(f: Mat2<f64>) -> Result<Self> {
        let j = f.det();
        if j <= 0.0 {
            return Err(Error::InvalidKinematics { j });
        }
        let c = f.transpose().matmul(&f);
        let e = c.sub(&Mat2::identity()).scale(0.5);
        Ok(Self { f, j, e })
    }

    pub fn identity() -> Self {
        Self {
            f: Mat2::identity(),
            j: 1.0,
            e: Mat2::zero(),
        }
    }
}

/// Compressible Neo-Hookean solid.
#[derive(Clone, Copy, Debug, serde::Deserialize, serde::Serialize)]
pub struct SolidMaterial {
    /// Young's modulus.
    pub e_mod: f64,
    /// Poisson ratio, -1 < nu < 0.5.
    pub nu: f64,
    /// Initial density.
    pub rho0: f64,
}

impl SolidMaterial {
    pub fn validate(&self) -> Result<()> {
        if self.e_mod <= 0.0 || self.nu <= -1.0 || self.nu >= 0.5 || self.rho0 < 0.0 {
            return Err(Error::Config(format!(
                "invalid solid material: E = {}, nu = {}, rho0 = {}",
                self.e_mod, self.nu, self.rho0
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn c_coef(&self) -> f64 {
        self.e_mod / (4.0 * (1.0 + self.nu))
    }

    #[inline]
    pub fn beta_coef(&self) -> f64 {
        self.nu / (1.0 - 2.0 * self.nu)
    }
}

/// Homogenized poroelastic layer material.
#[derive(Clone, Copy, Debug, serde::Deserialize, serde::Serialize)]
pub struct PoroMaterial {
    pub e_mod: f64,
    pub nu: f64,
    /// Power-term coefficient of the skeleton energy.
    pub c_tilde: f64,
    /// Power-term exponent, >= 1.
    pub alpha: f64,
    /// Volumetric coupling modulus kappa^P.
    pub kappa_vol: f64,
    /// Penalty modulus eta^P keeping the porosity positive.
    pub eta_pen: f64,
    /// Initial porosity in (0, 1).
    pub phi0: f64,
    /// Initial material permeability (length^2).
    pub k0: f64,
    /// Beavers-Joseph constant.
    pub alpha_bj: f64,
    /// Initial density of the solid phase.
    pub rho0_solid: f64,
}

impl PoroMaterial {
    pub fn validate(&self) -> Result<()> {
        let ok = self.e_mod > 0.0
            && self.nu > -1.0
            && self.nu < 0.5
            && self.c_tilde >= 0.0
            && self.alpha >= 1.0
            && self.kappa_vol > 0.0
            && self.eta_pen > 0.0
            && self.phi0 > 0.0
            && self.phi0 < 1.0
            && self.k0 > 0.0
            && self.alpha_bj > 0.0;
        if !ok {
            return Err(Error::Config("invalid poroelastic material".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn c_coef(&self) -> f64 {
        self.e_mod / (4.0 * (1.0 + self.nu))
    }

    #[inline]
    pub fn beta_coef(&self) -> f64 {
        self.nu / (1.0 - 2.0 * self.nu)
    }

    /// Macro-averaged initial mixture density (1 - phi0) * rho0_solid.
    #[inline]
    pub fn rho0_mixture(&self) -> f64 {
        (1.0 - self.phi0) * self.rho0_solid
    }
}

// ---------------------------------------------------------------------------
// Neo-Hooke, generic over the kernel scalar
// ---------------------------------------------------------------------------

/// Neo-Hookean strain energy, plane-strain embedded:
/// psi = c [tr(C_3d) - 3] + (c / beta) (J^(-2 beta) - 1).
///
/// For nu = 0 (beta = 0) the volumetric term degenerates to its limit
/// -2 c ln(J).
pub fn neo_hooke_psi<S: Scalar>(f: &Mat2<S>, c: f64, beta: f64) -> S {
    let cmat = f.transpose().matmul(f);
    let tr_c3 = cmat.trace() + 1.0;
    let j = f.det();
    let iso = (tr_c3 - 3.0) * c;
    if beta.abs() < 1e-14 {
        iso - j.ln() * (2.0 * c)
    } else {
        iso + (j.powf(-2.0 * beta) - 1.0) * (c / beta)
    }
}

/// 2nd Piola-Kirchhoff stress of [`neo_hooke_psi`] (in-plane block):
/// S = 2 c [I - J^(-2 beta) C^{-1}].
pub fn neo_hooke_pk2_generic<S: Scalar>(f: &Mat2<S>, c: f64, beta: f64) -> Mat2<S> {
    let cmat = f.transpose().matmul(f);
    let cinv = cmat.inverse();
    let j = f.det();
    let jfac = if beta.abs() < 1e-14 {
        S::from_f64(1.0)
    } else {
        j.powf(-2.0 * beta)
    };
    Mat2::identity().sub(&cinv.scale(jfac)).scale(S::from_f64(2.0 * c))
}

/// Solid 2nd Piola-Kirchhoff stress.
pub fn neo_hooke_pk2(kin: &KinematicState, mat: &SolidMaterial) -> Result<Mat2<f64>> {
    if kin.j <= 0.0 {
        return Err(Error::InvalidKinematics { j: kin.j });
    }
    Ok(neo_hooke_pk2_generic(&kin.f, mat.c_coef(), mat.beta_coef()))
}

/// Skeleton strain energy of the poroelastic layer: Neo-Hooke plus the
/// power hardening term c_tilde [tr(C_3d) - 3]^alpha.
pub fn poro_skel_psi<S: Scalar>(f: &Mat2<S>, mat: &PoroMaterial) -> S {
    let base = neo_hooke_psi(f, mat.c_coef(), mat.beta_coef());
    let cmat = f.transpose().matmul(f);
    let x = cmat.trace() + 1.0 - 3.0;
    base + x.powf(mat.alpha) * mat.c_tilde
}

/// d(psi_skel)/dE = 2 c [I - J^(-2 beta) C^{-1}] + 2 alpha c_tilde x^(alpha-1) I.
pub fn poro_skel_pk2<S: Scalar>(f: &Mat2<S>, mat: &PoroMaterial) -> Mat2<S> {
    let base = neo_hooke_pk2_generic(f, mat.c_coef(), mat.beta_coef());
    let cmat = f.transpose().matmul(f);
    let x = cmat.trace() + 1.0 - 3.0;
    let coef = x.powf(mat.alpha - 1.0) * (2.0 * mat.alpha * mat.c_tilde);
    base.add(&Mat2::identity().scale(coef))
}

/// Full poroelastic 2nd Piola-Kirchhoff stress at constant J(1-phi):
/// S^P = d(psi_skel)/dE + [eta (1/phi0 - 1/(J phi)) - p] J C^{-1}.
///
/// The eta term is the penalty energy's E-dependence through J(E); the last
/// term is the pore-pressure contribution -p J C^{-1}.
pub fn poro_pk2_generic<S: Scalar>(f: &Mat2<S>, phi: S, p: S, mat: &PoroMaterial) -> Mat2<S> {
    let skel = poro_skel_pk2(f, mat);
    let cmat = f.transpose().matmul(f);
    let cinv = cmat.inverse();
    let j = f.det();
    let jphi = j * phi;
    let pen = (S::from_f64(1.0 / mat.phi0) - S::from_f64(1.0) / jphi) * mat.eta_pen;
    skel.add(&cinv.scale((pen - p) * j))
}

/// Poroelastic PK2 for a plain kinematic state (used by tests and QoI).
pub fn poro_pk2(kin: &KinematicState, phi: f64, p: f64, mat: &PoroMaterial) -> Result<Mat2<f64>> {
    if kin.j <= 0.0 {
        return Err(Error::InvalidKinematics { j: kin.j });
    }
    if phi <= 0.0 || phi >= 1.0 {
        return Err(Error::InvalidPorosity { jphi: kin.j * phi });
    }
    Ok(poro_pk2_generic(&kin.f, phi, p, mat))
}

// ---------------------------------------------------------------------------
// Porosity closure
// ---------------------------------------------------------------------------

/// Pore pressure as a function of (J, phi):
/// p = kappa [1/(J(1-phi)) - 1/(1-phi0)] + eta [1/phi0 - 1/(J phi)],
/// which is -d(psi_vol + psi_pen)/d(J(1-phi)) at constant E.
///
/// Strictly increasing in phi on (0, 1) for any J > 0.
pub fn closure_pressure(j: f64, phi: f64, mat: &PoroMaterial) -> f64 {
    mat.kappa_vol * (1.0 / (j * (1.0 - phi)) - 1.0 / (1.0 - mat.phi0))
        + mat.eta_pen * (1.0 / mat.phi0 - 1.0 / (j * phi))
}

fn closure_dp_dphi(j: f64, phi: f64, mat: &PoroMaterial) -> f64 {
    mat.kappa_vol / (j * (1.0 - phi) * (1.0 - phi)) + mat.eta_pen / (j * phi * phi)
}

fn closure_dp_dj(j: f64, phi: f64, mat: &PoroMaterial) -> f64 {
    -mat.kappa_vol / (j * j * (1.0 - phi)) + mat.eta_pen / (j * j * phi)
}

/// Porosity solve result with the partial derivatives needed by the
/// linearization chain rule.
#[derive(Clone, Copy, Debug)]
pub struct PorositySolution {
    pub phi: f64,
    pub dphi_dj: f64,
    pub dphi_dp: f64,
}

/// Invert the porosity closure: find phi in (0,1) with
/// closure_pressure(J, phi) = p. Scalar Newton from phi0 with a bracketed
/// bisection fallback; residual below 1e-10 * max(1, |p|, kappa, eta).
pub fn solve_porosity(j: f64, p: f64, mat: &PoroMaterial) -> Result<PorositySolution> {
    if j <= 0.0 {
        return Err(Error::InvalidKinematics { j });
    }
    let scale = p.abs().max(mat.kappa_vol.abs()).max(mat.eta_pen.abs()).max(1.0);
    let tol = 1e-12 * scale;
    let (mut lo, mut hi) = (1e-8, 1.0 - 1e-8);
    let f_lo = closure_pressure(j, lo, mat) - p;
    let f_hi = closure_pressure(j, hi, mat) - p;
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(Error::PorosityClosure {
            j,
            p,
            reason: format!("no root bracketed in (0,1): f(lo) = {f_lo:.3e}, f(hi) = {f_hi:.3e}"),
        });
    }
    let mut phi = mat.phi0.clamp(lo, hi);
    let mut converged = false;
    for _ in 0..50 {
        let r = closure_pressure(j, phi, mat) - p;
        if r.abs() <= tol {
            converged = true;
            break;
        }
        if r > 0.0 {
            hi = phi;
        } else {
            lo = phi;
        }
        let step = r / closure_dp_dphi(j, phi, mat);
        let mut next = phi - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        phi = next;
    }
    if !converged {
        // Monotone bisection polish.
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let r = closure_pressure(j, mid, mat) - p;
            if r.abs() <= tol {
                phi = mid;
                converged = true;
                break;
            }
            if r > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            phi = mid;
        }
    }
    if !converged {
        return Err(Error::PorosityClosure {
            j,
            p,
            reason: "iteration cap exceeded".into(),
        });
    }
    let dp_dphi = closure_dp_dphi(j, phi, mat);
    Ok(PorositySolution {
        phi,
        dphi_dj: -closure_dp_dj(j, phi, mat) / dp_dphi,
        dphi_dp: 1.0 / dp_dphi,
    })
}

/// Porosity as a kernel scalar: solves the closure at the point values and
/// lifts the result with the implicit-function derivatives.
pub fn porosity_lifted<S: Scalar>(j: S, p: S, mat: &PoroMaterial) -> Result<S> {
    let sol = solve_porosity(j.value(), p.value(), mat)?;
    Ok(S::lift(sol.phi, &[(j, sol.dphi_dj), (p, sol.dphi_dp)]))
}

// ---------------------------------------------------------------------------
// Permeability and slip coefficient
// ---------------------------------------------------------------------------

/// Deformation-dependent material permeability:
/// K = K0 (1 - phi0^2)/phi0^3 * (J phi)^3 / (1 - (J phi)^2).
pub fn kozeny_carman_generic<S: Scalar>(jphi: S, mat: &PoroMaterial) -> S {
    let pre = mat.k0 * (1.0 - mat.phi0 * mat.phi0) / (mat.phi0 * mat.phi0 * mat.phi0);
    let jp2 = jphi * jphi;
    jp2 * jphi / (S::from_f64(1.0) - jp2) * pre
}

/// Scalar entry point with domain checks; spatial permeability follows as
/// the push-forward k = J^{-1} F K F^T assembled in the poro weak form.
pub fn kozeny_carman(j: f64, phi: f64, mat: &PoroMaterial) -> Result<f64> {
    let jphi = j * phi;
    if !(jphi > 0.0 && jphi < 1.0) {
        return Err(Error::InvalidPorosity { jphi });
    }
    Ok(kozeny_carman_generic(jphi, mat))
}

/// Beavers-Joseph slip coefficient for isotropic spatial permeability:
/// kappa = sqrt(tr(K I_3)) / (sqrt(3) alpha_BJ mu) = sqrt(K) / (alpha_BJ mu).
pub fn beavers_joseph_kappa(k_spatial: f64, mu: f64, alpha_bj: f64) -> Result<f64> {
    if k_spatial <= 0.0 || mu <= 0.0 || alpha_bj <= 0.0 {
        return Err(Error::Config(format!(
            "beavers_joseph_kappa needs positive arguments, got K = {k_spatial}, mu = {mu}, alpha_BJ = {alpha_bj}"
        )));
    }
    Ok(k_spatial.sqrt() / (alpha_bj * mu))
}

/// Full strain energy of the poroelastic mixture at a state (J from F,
/// phi from the closure). Used by the finite-difference oracles.
pub fn poro_total_psi(f: &Mat2<f64>, phi: f64, mat: &PoroMaterial) -> f64 {
    let j = f.det();
    let x = j * (1.0 - phi);
    let x0 = 1.0 - mat.phi0;
    let vol = mat.kappa_vol * (x / x0 - 1.0 - (x / x0).ln());
    let y = j * phi;
    let pen = mat.eta_pen * (y / mat.phi0 - 1.0 / mat.phi0 - (y / mat.phi0).ln());
    poro_skel_psi(f, mat) + vol + pen
}

pub fn deformation_from_vec(v: &Vec2<f64>) -> Mat2<f64> {
    Mat2::new(v.x, 0.0, 0.0, v.y)
}
