//! Incompressible MHD fluid state and its pseudo-spectral stepper.
//!
//! State is kept spectrally. The momentum nonlinearity is assembled in
//! divergence form d_j(u_i u_j - B_i B_j), which equals
//! -u.grad u + B.grad B for divergence-free fields and conserves the mean
//! velocity exactly; the induction nonlinearity is the spectral curl of the
//! dealiased product u x B, which keeps B divergence-free and its mean
//! exactly constant. Diffusion is applied through exact per-mode
//! integrating factors exp(-mu |k|^2 dt) wrapped around a Heun (order 2)
//! predictor-corrector for the nonlinear terms.

use num_complex::Complex64;

use crate::error::Result;
use crate::fields::{
    l2_norm_spec, leray_project_spec, spectral_divergence_rel, SpecField, VectorField,
};
use crate::spectral::{Real, SpectralWorkspace};

/// How the magnetic force enters the velocity equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MagneticForceForm {
    /// B . grad B - (1/2) grad |B|^2, the equations as written.
    GradPressure,
    /// (curl B) x B, the equivalent curl form.
    CurlForm,
}

#[derive(Debug, Clone, Copy)]
pub struct MhdParams {
    /// Viscosity.
    pub mu1: f64,
    /// Magnetic diffusivity.
    pub mu2: f64,
    pub force_form: MagneticForceForm,
}

impl Default for MhdParams {
    fn default() -> Self {
        Self {
            mu1: 1.0,
            mu2: 1.0,
            force_form: MagneticForceForm::GradPressure,
        }
    }
}

/// Velocity and magnetic field, stored spectrally and kept divergence-free.
#[derive(Debug, Clone)]
pub struct FluidState {
    pub uh: SpecField,
    pub bh: SpecField,
}

impl FluidState {
    pub fn zeros(ws: &SpectralWorkspace) -> Self {
        Self {
            uh: SpecField::zeros(ws),
            bh: SpecField::zeros(ws),
        }
    }

    /// Build from real-space fields: transform, dealias, project.
    pub fn from_real(ws: &mut SpectralWorkspace, u: &VectorField, b: &VectorField) -> Result<Self> {
        ws.check_finite(&u.c[0], "initial u")?;
        ws.check_finite(&u.c[1], "initial u")?;
        ws.check_finite(&u.c[2], "initial u")?;
        ws.check_finite(&b.c[0], "initial B")?;
        ws.check_finite(&b.c[1], "initial B")?;
        ws.check_finite(&b.c[2], "initial B")?;
        let mut uh = u.to_spec(ws);
        let mut bh = b.to_spec(ws);
        for comp in uh.c.iter_mut().chain(bh.c.iter_mut()) {
            ws.dealias(comp);
        }
        leray_project_spec(ws, &mut uh);
        leray_project_spec(ws, &mut bh);
        Ok(Self { uh, bh })
    }

    pub fn u_real(&self, ws: &mut SpectralWorkspace) -> VectorField {
        self.uh.to_real(ws)
    }

    pub fn b_real(&self, ws: &mut SpectralWorkspace) -> VectorField {
        self.bh.to_real(ws)
    }

    /// Mean magnetic field (the k = 0 mode).
    pub fn mean_b(&self) -> [f64; 3] {
        [
            self.bh.c[0][[0, 0, 0]].re,
            self.bh.c[1][[0, 0, 0]].re,
            self.bh.c[2][[0, 0, 0]].re,
        ]
    }

    /// Mean velocity (the k = 0 mode).
    pub fn mean_u(&self) -> [f64; 3] {
        [
            self.uh.c[0][[0, 0, 0]].re,
            self.uh.c[1][[0, 0, 0]].re,
            self.uh.c[2][[0, 0, 0]].re,
        ]
    }

    pub fn energy_u(&self, ws: &SpectralWorkspace) -> f64 {
        0.5 * self.uh.c.iter().map(|c| ws.l2_norm_sq_spec(c)).sum::<f64>()
    }

    pub fn energy_b(&self, ws: &SpectralWorkspace) -> f64 {
        0.5 * self.bh.c.iter().map(|c| ws.l2_norm_sq_spec(c)).sum::<f64>()
    }

    pub fn divergence_u(&self, ws: &SpectralWorkspace) -> f64 {
        spectral_divergence_rel(ws, &self.uh)
    }

    pub fn divergence_b(&self, ws: &SpectralWorkspace) -> f64 {
        spectral_divergence_rel(ws, &self.bh)
    }

    pub fn l2_norm_ub(&self, ws: &SpectralWorkspace) -> f64 {
        (self.uh.c.iter().chain(self.bh.c.iter()))
            .map(|c| ws.l2_norm_sq_spec(c))
            .sum::<f64>()
            .sqrt()
    }

    fn is_b_zero(&self) -> bool {
        self.bh
            .c
            .iter()
            .all(|c| c.iter().all(|v| v.re == 0.0 && v.im == 0.0))
    }
}

/// The force the particles exert on the fluid, evaluated on the nodes:
/// S = rho_f (u x B) - j_f x B. The same nodal u x B field also feeds the
/// particle pusher, which is what makes the exchange antisymmetric.
#[derive(Debug, Clone)]
pub struct CouplingSource {
    pub s: VectorField,
}

/// Pointwise cross product of two vector fields on the nodes.
pub fn cross_fields(a: &VectorField, b: &VectorField) -> VectorField {
    let mut out = VectorField {
        c: [a.c[0].clone(), a.c[1].clone(), a.c[2].clone()],
    };
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        ndarray::Zip::from(&mut out.c[i])
            .and(&a.c[j])
            .and(&b.c[k])
            .and(&a.c[k])
            .and(&b.c[j])
            .for_each(|o, &aj, &bk, &ak, &bj| *o = aj * bk - ak * bj);
    }
    out
}

/// Assemble S from deposited moments and the nodal drift product u x B.
pub fn coupling_source(
    rho: &Real,
    j: &VectorField,
    uxb: &VectorField,
    b: &VectorField,
) -> CouplingSource {
    let jxb = cross_fields(j, b);
    let mut s = VectorField {
        c: [uxb.c[0].clone(), uxb.c[1].clone(), uxb.c[2].clone()],
    };
    for i in 0..3 {
        ndarray::Zip::from(&mut s.c[i])
            .and(rho)
            .and(&uxb.c[i])
            .and(&jxb.c[i])
            .for_each(|o, &r, &w, &f| *o = r * w - f);
    }
    CouplingSource { s }
}

/// Exact per-mode diffusion factors for a fixed time step.
pub struct DiffusionFactors {
    dt: f64,
    e_u: Vec<f64>,
    e_b: Vec<f64>,
}

impl DiffusionFactors {
    pub fn new(ws: &SpectralWorkspace, params: &MhdParams, dt: f64) -> Self {
        let [n0, n1, nr] = ws.spec_shape();
        let mut e_u = Vec::with_capacity(n0 * n1 * nr);
        let mut e_b = Vec::with_capacity(n0 * n1 * nr);
        for i0 in 0..n0 {
            for i1 in 0..n1 {
                for i2 in 0..nr {
                    let ksq = ws.ksq_at(i0, i1, i2);
                    e_u.push((-params.mu1 * ksq * dt).exp());
                    e_b.push((-params.mu2 * ksq * dt).exp());
                }
            }
        }
        Self { dt, e_u, e_b }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

struct RhsOutput {
    du: SpecField,
    db: SpecField,
    max_u: f64,
}

/// Nonlinear and coupling terms only (no diffusion): the part the Heun
/// stages integrate explicitly.
fn nonlinear_terms(
    ws: &mut SpectralWorkspace,
    uh: &SpecField,
    bh: &SpecField,
    source: Option<&CouplingSource>,
    params: &MhdParams,
    b_zero: bool,
) -> RhsOutput {
    let u = uh.to_real(ws);
    let max_u = u.max_abs();
    let b = if b_zero { None } else { Some(bh.to_real(ws)) };

    let mut du = SpecField::zeros(ws);
    let mut db = SpecField::zeros(ws);

    // Momentum: -d_j T_ij with T_ij = u_i u_j (- B_i B_j unless the curl
    // form carries the magnetic part separately).
    let tensor_has_b = !b_zero && params.force_form == MagneticForceForm::GradPressure;
    let mut prod = ws.zeros_real();
    for i in 0..3 {
        for j in i..3 {
            ndarray::Zip::from(&mut prod)
                .and(&u.c[i])
                .and(&u.c[j])
                .for_each(|o, &a, &c| *o = a * c);
            if tensor_has_b {
                let bb = b.as_ref().unwrap();
                ndarray::Zip::from(&mut prod)
                    .and(&bb.c[i])
                    .and(&bb.c[j])
                    .for_each(|o, &a, &c| *o -= a * c);
            }
            let mut t = ws.forward(&prod);
            ws.dealias(&mut t);
            let di = ws.deriv(&t, j);
            du.c[i].zip_mut_with(&di, |a, v| *a -= v);
            if i != j {
                let dj = ws.deriv(&t, i);
                du.c[j].zip_mut_with(&dj, |a, v| *a -= v);
            }
        }
    }

    if !b_zero {
        let bb = b.as_ref().unwrap();
        match params.force_form {
            MagneticForceForm::GradPressure => {
                // Subtract (1/2) grad |B|^2.
                ndarray::Zip::from(&mut prod)
                    .and(&bb.c[0])
                    .and(&bb.c[1])
                    .and(&bb.c[2])
                    .for_each(|o, &x, &y, &z| *o = x * x + y * y + z * z);
                let mut bsq = ws.forward(&prod);
                ws.dealias(&mut bsq);
                for i in 0..3 {
                    let g = ws.deriv(&bsq, i);
                    du.c[i].zip_mut_with(&g, |a, v| *a -= 0.5 * v);
                }
            }
            MagneticForceForm::CurlForm => {
                // Add (curl B) x B.
                let mut curl = VectorField::zeros(ws);
                for i in 0..3 {
                    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                    let mut s = ws.deriv(&bh.c[k], j);
                    let t = ws.deriv(&bh.c[j], k);
                    s.zip_mut_with(&t, |a, v| *a -= v);
                    curl.c[i] = ws.inverse(&s);
                }
                let force = cross_fields(&curl, bb);
                for i in 0..3 {
                    let mut f = ws.forward(&force.c[i]);
                    ws.dealias(&mut f);
                    du.c[i].zip_mut_with(&f, |a, v| *a += v);
                }
            }
        }

        // Induction: curl of the dealiased product u x B.
        let w = cross_fields(&u, bb);
        let wh = SpecField {
            c: [0, 1, 2].map(|i| {
                let mut s = ws.forward(&w.c[i]);
                ws.dealias(&mut s);
                s
            }),
        };
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let mut s = ws.deriv(&wh.c[k], j);
            let t = ws.deriv(&wh.c[j], k);
            s.zip_mut_with(&t, |a, v| *a -= v);
            db.c[i] = s;
        }
    }

    if let Some(src) = source {
        for i in 0..3 {
            let mut s = ws.forward(&src.s.c[i]);
            ws.dealias(&mut s);
            du.c[i].zip_mut_with(&s, |a, v| *a += v);
        }
    }

    leray_project_spec(ws, &mut du);
    RhsOutput { du, db, max_u }
}

/// The full right-hand side, diffusion included:
/// du = Leray[-u.grad u + B.grad B - (1/2) grad |B|^2 + S] + mu1 lap u,
/// dB = -u.grad B + B.grad u + mu2 lap B.
/// The stepper does not call this (it applies diffusion exactly); it is the
/// assembled field for inspection and tests.
pub fn mhd_rhs(
    ws: &mut SpectralWorkspace,
    state: &FluidState,
    source: Option<&CouplingSource>,
    params: &MhdParams,
) -> (SpecField, SpecField) {
    let b_zero = state.is_b_zero();
    let mut out = nonlinear_terms(ws, &state.uh, &state.bh, source, params, b_zero);
    let [n0, n1, nr] = ws.spec_shape();
    for i0 in 0..n0 {
        for i1 in 0..n1 {
            for i2 in 0..nr {
                let ksq = ws.ksq_at(i0, i1, i2);
                let idx = [i0, i1, i2];
                for c in 0..3 {
                    out.du.c[c][idx] -= params.mu1 * ksq * state.uh.c[c][idx];
                    out.db.c[c][idx] -= params.mu2 * ksq * state.bh.c[c][idx];
                }
            }
        }
    }
    (out.du, out.db)
}

#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    /// dt * max|u| * n / l, the advisory advection CFL ratio.
    pub cfl_ratio: f64,
    /// True when the ratio exceeds 1; the step still proceeds.
    pub cfl_exceeded: bool,
}

/// Advance the fluid one step of size `factors.dt()` with the coupling
/// source held frozen: integrating-factor Heun, exact per-mode diffusion.
pub fn step_mhd(
    ws: &mut SpectralWorkspace,
    state: &mut FluidState,
    source: Option<&CouplingSource>,
    params: &MhdParams,
    factors: &DiffusionFactors,
) -> StepReport {
    let dt = factors.dt;
    let b_zero = state.is_b_zero() && source.is_none();
    let stage1 = nonlinear_terms(ws, &state.uh, &state.bh, source, params, b_zero);

    let apply = |out: &mut SpecField, base: &SpecField, n: &SpecField, e: &[f64]| {
        for c in 0..3 {
            let ob = out.c[c].as_slice_mut().unwrap();
            let bb = base.c[c].as_slice().unwrap();
            let nn = n.c[c].as_slice().unwrap();
            for i in 0..ob.len() {
                ob[i] = e[i] * (bb[i] + dt * nn[i]);
            }
        }
    };
    let mut pred = FluidState::zeros(ws);
    apply(&mut pred.uh, &state.uh, &stage1.du, &factors.e_u);
    apply(&mut pred.bh, &state.bh, &stage1.db, &factors.e_b);

    let pred_b_zero = b_zero && pred.is_b_zero();
    let stage2 = nonlinear_terms(ws, &pred.uh, &pred.bh, source, params, pred_b_zero);

    let correct = |cur: &mut SpecField, n1: &SpecField, n2: &SpecField, e: &[f64]| {
        for c in 0..3 {
            let cc = cur.c[c].as_slice_mut().unwrap();
            let a1 = n1.c[c].as_slice().unwrap();
            let a2 = n2.c[c].as_slice().unwrap();
            for i in 0..cc.len() {
                cc[i] = e[i] * (cc[i] + 0.5 * dt * a1[i]) + 0.5 * dt * a2[i];
            }
        }
    };
    correct(&mut state.uh, &stage1.du, &stage2.du, &factors.e_u);
    correct(&mut state.bh, &stage1.db, &stage2.db, &factors.e_b);
    leray_project_spec(ws, &mut state.uh);
    leray_project_spec(ws, &mut state.bh);

    let grid = ws.grid();
    let mut n_over_l: f64 = 0.0;
    for j in 0..3 {
        if grid.is_active(j) {
            n_over_l = n_over_l.max(grid.shape()[j] as f64 / grid.lengths()[j]);
        }
    }
    let cfl_ratio = dt * stage1.max_u * n_over_l;
    StepReport {
        cfl_ratio,
        cfl_exceeded: cfl_ratio > 1.0,
    }
}

/// Instantaneous dissipation rates (mu1 ||grad u||^2, mu2 ||grad B||^2).
pub fn dissipation_rates(ws: &SpectralWorkspace, state: &FluidState) -> (f64, f64) {
    let [n0, n1, nr] = ws.spec_shape();
    let mut grad_u = 0.0;
    let mut grad_b = 0.0;
    for i0 in 0..n0 {
        for i1 in 0..n1 {
            for i2 in 0..nr {
                let kx = ws.k_deriv_at(0, i0);
                let ky = ws.k_deriv_at(1, i1);
                let kz = ws.k_deriv_at(2, i2);
                let ksq = kx * kx + ky * ky + kz * kz;
                if ksq == 0.0 {
                    continue;
                }
                let w = ws.hermitian_weight(i2) * ksq;
                let idx = [i0, i1, i2];
                for c in 0..3 {
                    grad_u += w * state.uh.c[c][idx].norm_sqr();
                    grad_b += w * state.bh.c[c][idx].norm_sqr();
                }
            }
        }
    }
    let v = ws.grid().volume();
    (grad_u * v, grad_b * v)
}

/// Dissipation rates scaled by the viscosities.
pub fn dissipation_rates_scaled(
    ws: &SpectralWorkspace,
    state: &FluidState,
    params: &MhdParams,
) -> (f64, f64) {
    let (gu, gb) = dissipation_rates(ws, state);
    (params.mu1 * gu, params.mu2 * gb)
}

/// Largest |S . B| over the nodes, scaled by max|S| max|B|: the coupling
/// force is orthogonal to B pointwise up to round-off.
pub fn coupling_orthogonality(source: &CouplingSource, b: &VectorField) -> f64 {
    let mut num = 0.0f64;
    ndarray::Zip::from(&source.s.c[0])
        .and(&source.s.c[1])
        .and(&source.s.c[2])
        .and(&b.c[0])
        .and(&b.c[1])
        .and(&b.c[2])
        .for_each(|&s0, &s1, &s2, &b0, &b1, &b2| {
            num = num.max((s0 * b0 + s1 * b1 + s2 * b2).abs());
        });
    let den = source.s.max_abs() * b.max_abs();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Energy drained by viscosity and resistivity is all that total fluid
/// energy can lose without coupling; handy for tests.
pub fn fluid_energy(ws: &SpectralWorkspace, state: &FluidState) -> f64 {
    state.energy_u(ws) + state.energy_b(ws)
}

pub use crate::fields::l2_norm_spec as spec_l2_norm;
