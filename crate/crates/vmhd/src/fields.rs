//! Vector fields on the grid and the spectral calculus on them:
//! Leray projection, Sobolev norms, and the exact vector identities the
//! nonlinear terms rely on.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::spectral::{Real, Spec, SpectralWorkspace};

/// Three scalar components on the grid, real space. Fields always carry
/// three components; on a 2-d grid they simply do not vary along x3.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub c: [Real; 3],
}

/// Spectral counterpart of [`VectorField`].
#[derive(Debug, Clone)]
pub struct SpecField {
    pub c: [Spec; 3],
}

impl VectorField {
    pub fn zeros(ws: &SpectralWorkspace) -> Self {
        Self {
            c: [ws.zeros_real(), ws.zeros_real(), ws.zeros_real()],
        }
    }

    /// Fill from a pointwise function of position.
    pub fn from_fn(ws: &SpectralWorkspace, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let grid = ws.grid();
        let [n0, n1, n2] = grid.shape();
        let mut out = Self::zeros(ws);
        for i0 in 0..n0 {
            for i1 in 0..n1 {
                for i2 in 0..n2 {
                    let v = f(grid.node([i0, i1, i2]));
                    for (comp, val) in out.c.iter_mut().zip(v) {
                        comp[[i0, i1, i2]] = val;
                    }
                }
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|a| a.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.c
            .iter()
            .map(|a| a.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .fold(0.0, f64::max)
    }

    pub fn to_spec(&self, ws: &mut SpectralWorkspace) -> SpecField {
        SpecField {
            c: [
                ws.forward(&self.c[0]),
                ws.forward(&self.c[1]),
                ws.forward(&self.c[2]),
            ],
        }
    }

    /// Pointwise value at a node.
    pub fn at(&self, idx: [usize; 3]) -> [f64; 3] {
        [self.c[0][idx], self.c[1][idx], self.c[2][idx]]
    }
}

impl SpecField {
    pub fn zeros(ws: &SpectralWorkspace) -> Self {
        Self {
            c: [ws.zeros_spec(), ws.zeros_spec(), ws.zeros_spec()],
        }
    }

    pub fn to_real(&self, ws: &mut SpectralWorkspace) -> VectorField {
        VectorField {
            c: [
                ws.inverse(&self.c[0]),
                ws.inverse(&self.c[1]),
                ws.inverse(&self.c[2]),
            ],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.c
            .iter()
            .map(|a| a.iter().fold(0.0f64, |m, v| m.max(v.norm())))
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for comp in &mut out.c {
            for v in comp.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    /// self - other, componentwise.
    pub fn diff(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (comp, o) in out.c.iter_mut().zip(&other.c) {
            for (v, w) in comp.iter_mut().zip(o.iter()) {
                *v -= w;
            }
        }
        out
    }
}

/// Project a spectral vector field onto its divergence-free part:
/// vhat(k) -> vhat(k) - k (k . vhat(k)) / |k|^2, with the k = 0 mode
/// left untouched.
pub fn leray_project_spec(ws: &SpectralWorkspace, field: &mut SpecField) {
    let [n0, n1, nr] = ws.spec_shape();
    for i0 in 0..n0 {
        for i1 in 0..n1 {
            for i2 in 0..nr {
                let k = [ws.k_at(0, i0), ws.k_at(1, i1), ws.k_at(2, i2)];
                let ksq = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                if ksq == 0.0 {
                    continue;
                }
                let idx = [i0, i1, i2];
                let kv = k[0] * field.c[0][idx] + k[1] * field.c[1][idx] + k[2] * field.c[2][idx];
                let f = kv / ksq;
                for (j, comp) in field.c.iter_mut().enumerate() {
                    comp[idx] -= k[j] * f;
                }
            }
        }
    }
}

/// Leray projection of a real-space field. Rejects non-finite input.
pub fn leray_project(ws: &mut SpectralWorkspace, v: &VectorField) -> Result<VectorField> {
    if !v.is_finite() {
        return Err(Error::NonFiniteField("leray_project input".into()));
    }
    let mut spec = v.to_spec(ws);
    leray_project_spec(ws, &mut spec);
    Ok(spec.to_real(ws))
}

/// Relative spectral divergence: ||div v||_{L2} / ||grad v||_{L2}.
/// Zero for a constant (or zero) field.
pub fn spectral_divergence_rel(ws: &SpectralWorkspace, field: &SpecField) -> f64 {
    let [n0, n1, nr] = ws.spec_shape();
    let mut div_sq = 0.0;
    let mut grad_sq = 0.0;
    for i0 in 0..n0 {
        for i1 in 0..n1 {
            for i2 in 0..nr {
                let k = [
                    ws.k_deriv_at(0, i0),
                    ws.k_deriv_at(1, i1),
                    ws.k_deriv_at(2, i2),
                ];
                let ksq = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                let w = ws.hermitian_weight(i2);
                let idx = [i0, i1, i2];
                let kv = k[0] * field.c[0][idx] + k[1] * field.c[1][idx] + k[2] * field.c[2][idx];
                div_sq += w * kv.norm_sqr();
                for comp in &field.c {
                    grad_sq += w * ksq * comp[idx].norm_sqr();
                }
            }
        }
    }
    if grad_sq == 0.0 {
        0.0
    } else {
        (div_sq / grad_sq).sqrt()
    }
}

/// Discrete H^s norm: (sum over multi-indices |alpha| <= s of
/// ||d^alpha v||^2_{L2})^{1/2}, accumulated in spectral space with the same
/// wavenumber tables the derivative operator uses. Supports s in 0..=3.
pub fn sobolev_norm_spec(ws: &SpectralWorkspace, field: &SpecField, s: usize) -> Result<f64> {
    if s > 3 {
        return Err(Error::InvalidArgument(format!(
            "sobolev_norm supports s in 0..=3, got {s}"
        )));
    }
    let [n0, n1, nr] = ws.spec_shape();
    let mut acc = 0.0;
    for i0 in 0..n0 {
        for i1 in 0..n1 {
            for i2 in 0..nr {
                let kx2 = ws.k_deriv_at(0, i0).powi(2);
                let ky2 = ws.k_deriv_at(1, i1).powi(2);
                let kz2 = ws.k_deriv_at(2, i2).powi(2);
                let mut weight = 0.0;
                for a in 0..=s {
                    for b in 0..=(s - a) {
                        for c in 0..=(s - a - b) {
                            weight += kx2.powi(a as i32) * ky2.powi(b as i32) * kz2.powi(c as i32);
                        }
                    }
                }
                let idx = [i0, i1, i2];
                let w = ws.hermitian_weight(i2);
                let mag: f64 = field.c.iter().map(|comp| comp[idx].norm_sqr()).sum();
                acc += w * weight * mag;
            }
        }
    }
    Ok((acc * ws.grid().volume()).sqrt())
}

pub fn sobolev_norm(ws: &mut SpectralWorkspace, v: &VectorField, s: usize) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::NonFiniteField("sobolev_norm input".into()));
    }
    let spec = v.to_spec(ws);
    sobolev_norm_spec(ws, &spec, s)
}

/// L2 norm of a vector field from its spectrum.
pub fn l2_norm_spec(ws: &SpectralWorkspace, field: &SpecField) -> f64 {
    field
        .c
        .iter()
        .map(|comp| ws.l2_norm_sq_spec(comp))
        .sum::<f64>()
        .sqrt()
}

/// Real-space gradient components of a spectral scalar.
fn grad_real(ws: &mut SpectralWorkspace, spec: &Spec) -> [Real; 3] {
    let d0 = ws.deriv(spec, 0);
    let d1 = ws.deriv(spec, 1);
    let d2 = ws.deriv(spec, 2);
    [ws.inverse(&d0), ws.inverse(&d1), ws.inverse(&d2)]
}

/// Real-space curl of a spectral vector field.
fn curl_real(ws: &mut SpectralWorkspace, f: &SpecField) -> [Real; 3] {
    let mut out = [ws.zeros_real(), ws.zeros_real(), ws.zeros_real()];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let mut s = ws.deriv(&f.c[k], j);
        let t = ws.deriv(&f.c[j], k);
        s.zip_mut_with(&t, |a, b| *a -= b);
        out[i] = ws.inverse(&s);
    }
    out
}

/// Forward transform a real product and apply the 2/3 mask, then return to
/// real space: the dealiased version of the product.
fn dealiased(ws: &mut SpectralWorkspace, prod: &Real) -> Real {
    let mut spec = ws.forward(prod);
    ws.dealias(&mut spec);
    ws.inverse(&spec)
}

fn max_abs_real(a: &Real) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Residuals of the vector identities behind the nonlinear terms, each a
/// relative max-norm difference between the two sides with every product
/// dealiased the same way the solver dealiases:
///
/// r1: (curl B) x B   versus   B . grad B - (1/2) grad |B|^2
/// r2: curl (u x B)   versus   u div B - u . grad B + B . grad u - B div u
/// r3: pointwise u . (u x B), which vanishes identically.
pub fn identity_residuals(
    ws: &mut SpectralWorkspace,
    u: &VectorField,
    b: &VectorField,
) -> Result<(f64, f64, f64)> {
    if !u.is_finite() || !b.is_finite() {
        return Err(Error::NonFiniteField("identity_residuals input".into()));
    }
    let uh = u.to_spec(ws);
    let bh = b.to_spec(ws);

    // Velocity and magnetic gradients in real space.
    let grad_b: [[Real; 3]; 3] = [
        grad_real(ws, &bh.c[0]),
        grad_real(ws, &bh.c[1]),
        grad_real(ws, &bh.c[2]),
    ];
    let grad_u: [[Real; 3]; 3] = [
        grad_real(ws, &uh.c[0]),
        grad_real(ws, &uh.c[1]),
        grad_real(ws, &uh.c[2]),
    ];
    let div_b = {
        let mut d = ws.zeros_real();
        for j in 0..3 {
            d += &grad_b[j][j];
        }
        d
    };
    let div_u = {
        let mut d = ws.zeros_real();
        for j in 0..3 {
            d += &grad_u[j][j];
        }
        d
    };

    // r1 left side: (curl B) x B.
    let curl_b = curl_real(ws, &bh);
    let mut r1_lhs: [Real; 3] = [ws.zeros_real(), ws.zeros_real(), ws.zeros_real()];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        ndarray::Zip::from(&mut r1_lhs[i])
            .and(&curl_b[j])
            .and(&b.c[k])
            .and(&curl_b[k])
            .and(&b.c[j])
            .for_each(|o, &aj, &bk, &ak, &bj| *o = aj * bk - ak * bj);
    }
    for comp in &mut r1_lhs {
        *comp = dealiased(ws, comp);
    }

    // r1 right side: B . grad B - (1/2) grad |B|^2.
    let mut bsq = ws.zeros_real();
    ndarray::Zip::from(&mut bsq)
        .and(&b.c[0])
        .and(&b.c[1])
        .and(&b.c[2])
        .for_each(|o, &x, &y, &z| *o = x * x + y * y + z * z);
    let mut bsq_spec = ws.forward(&bsq);
    ws.dealias(&mut bsq_spec);
    let mut r1_rhs: [Real; 3] = [ws.zeros_real(), ws.zeros_real(), ws.zeros_real()];
    for i in 0..3 {
        let mut conv = ws.zeros_real();
        for j in 0..3 {
            ndarray::Zip::from(&mut conv)
                .and(&b.c[j])
                .and(&grad_b[i][j])
                .for_each(|o, &bj, &g| *o += bj * g);
        }
        let conv = dealiased(ws, &conv);
        let dp = ws.deriv(&bsq_spec, i);
        let grad_p = ws.inverse(&dp);
        ndarray::Zip::from(&mut r1_rhs[i])
            .and(&conv)
            .and(&grad_p)
            .for_each(|o, &c, &g| *o = c - 0.5 * g);
    }

    let diff_rel = |lhs: &[Real; 3], rhs: &[Real; 3]| -> f64 {
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..3 {
            ndarray::Zip::from(&lhs[i]).and(&rhs[i]).for_each(|&a, &b| {
                num = num.max((a - b).abs());
                den = den.max(a.abs()).max(b.abs());
            });
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    };
    let r1 = diff_rel(&r1_lhs, &r1_rhs);

    // r2 left side: curl (u x B) with the product dealiased before the curl.
    let mut uxb: [Real; 3] = [ws.zeros_real(), ws.zeros_real(), ws.zeros_real()];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        ndarray::Zip::from(&mut uxb[i])
            .and(&u.c[j])
            .and(&b.c[k])
            .and(&u.c[k])
            .and(&b.c[j])
            .for_each(|o, &uj, &bk, &uk, &bj| *o = uj * bk - uk * bj);
    }
    let wspec = SpecField {
        c: [0, 1, 2].map(|i| {
            let mut s = ws.forward(&uxb[i]);
            ws.dealias(&mut s);
            s
        }),
    };
    let r2_lhs = curl_real(ws, &wspec);

    // r2 right side: u div B - u . grad B + B . grad u - B div u.
    let mut r2_rhs: [Real; 3] = [ws.zeros_real(), ws.zeros_real(), ws.zeros_real()];
    for i in 0..3 {
        let mut sum = ws.zeros_real();
        ndarray::Zip::from(&mut sum)
            .and(&u.c[i])
            .and(&div_b)
            .and(&b.c[i])
            .and(&div_u)
            .for_each(|o, &ui, &db, &bi, &du| *o = ui * db - bi * du);
        for j in 0..3 {
            ndarray::Zip::from(&mut sum)
                .and(&u.c[j])
                .and(&grad_b[i][j])
                .and(&b.c[j])
                .and(&grad_u[i][j])
                .for_each(|o, &uj, &gb, &bj, &gu| *o += -uj * gb + bj * gu);
        }
        r2_rhs[i] = dealiased(ws, &sum);
    }
    let r2 = diff_rel(&r2_lhs, &r2_rhs);

    // r3: scalar triple product u . (u x B), identically zero.
    let mut r3_num = 0.0f64;
    let mut u_max = 0.0f64;
    let mut b_max = 0.0f64;
    ndarray::Zip::from(&u.c[0])
        .and(&u.c[1])
        .and(&u.c[2])
        .and(&uxb[0])
        .and(&uxb[1])
        .and(&uxb[2])
        .for_each(|&u0, &u1, &u2, &w0, &w1, &w2| {
            r3_num = r3_num.max((u0 * w0 + u1 * w1 + u2 * w2).abs());
            u_max = u_max.max(u0.abs()).max(u1.abs()).max(u2.abs());
        });
    b_max = b_max.max(max_abs_real(&b.c[0]));
    b_max = b_max.max(max_abs_real(&b.c[1]));
    b_max = b_max.max(max_abs_real(&b.c[2]));
    let r3_den = u_max * u_max * b_max;
    let r3 = if r3_den == 0.0 { 0.0 } else { r3_num / r3_den };

    Ok((r1, r2, r3))
}

/// Random real vector field band-limited to |m_j| <= kmax per axis.
/// With kmax at or below half the dealias cutoff, products of two such
/// fields stay inside the retained band and the identities above hold to
/// round-off.
pub fn random_band_limited(
    ws: &mut SpectralWorkspace,
    rng: &mut SeededRng,
    kmax: usize,
    amplitude: f64,
) -> VectorField {
    let mut out = VectorField::zeros(ws);
    let [n0, n1, nr] = ws.spec_shape();
    let grid = ws.grid().clone();
    for comp in &mut out.c {
        let mut f = ws.zeros_real();
        for v in f.iter_mut() {
            *v = rng.gaussian();
        }
        let mut spec = ws.forward(&f);
        let keep = |m: f64, unit: f64| (m / unit).abs().round() as usize <= kmax;
        for i0 in 0..n0 {
            for i1 in 0..n1 {
                for i2 in 0..nr {
                    let ok = keep(ws.k_at(0, i0), grid.k_unit(0))
                        && keep(ws.k_at(1, i1), grid.k_unit(1))
                        && keep(ws.k_at(2, i2), grid.k_unit(2));
                    if !ok {
                        spec[[i0, i1, i2]] = Complex64::new(0.0, 0.0);
                    } else {
                        spec[[i0, i1, i2]] *= amplitude;
                    }
                }
            }
        }
        *comp = ws.inverse(&spec);
    }
    out
}
