//! Particle ensembles and their dynamics along characteristics:
//! dX/ds = V, dV/ds = (V - u) x B, with fields interpolated from the grid.
//!
//! Interpolation and deposition share one multilinear (cloud-in-cell)
//! stencil. The drift part of the force interpolates the nodal product
//! u x B as a single field; together with the shared stencil this makes the
//! discrete momentum and energy exchange with the fluid exactly
//! antisymmetric while the fields are frozen, so coupled-run drifts are
//! purely time-discretization errors.

use crate::error::{Error, Result};
use crate::fields::VectorField;
use crate::grid::Grid;
use crate::rng::SeededRng;
use crate::spectral::Real;
use crate::vec3;

#[derive(Debug, Clone, Copy)]
pub struct Particle {
    pub x: [f64; 3],
    pub v: [f64; 3],
    pub w: f64,
}

/// Weighted particles sampling the distribution function. Weights are set
/// at construction and never modified afterwards, so the total mass
/// sum(w_i) is exactly constant across a run.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    particles: Vec<Particle>,
}

impl ParticleEnsemble {
    pub fn new(particles: Vec<Particle>) -> Self {
        Self { particles }
    }

    pub fn empty() -> Self {
        Self {
            particles: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    /// Total mass sum(w_i), summed in storage order.
    pub fn total_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.w).sum()
    }

    /// Total particle momentum sum(w_i V_i).
    pub fn total_momentum(&self) -> [f64; 3] {
        let mut m = [0.0; 3];
        for p in &self.particles {
            for j in 0..3 {
                m[j] += p.w * p.v[j];
            }
        }
        m
    }

    /// Kinetic energy (1/2) sum(w_i |V_i|^2).
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self
            .particles
            .iter()
            .map(|p| p.w * vec3::dot(p.v, p.v))
            .sum::<f64>()
    }
}

/// Extent of the ensemble: largest distance from the box center over the
/// grid's active dimensions, and largest speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportRadii {
    pub r_x: f64,
    pub r_v: f64,
}

pub fn support_radii(ensemble: &ParticleEnsemble, grid: &Grid) -> Result<SupportRadii> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble("support radii undefined".into()));
    }
    let center = grid.center();
    let mut r_x: f64 = 0.0;
    let mut r_v: f64 = 0.0;
    for p in ensemble.particles() {
        let mut dsq = 0.0;
        for j in 0..3 {
            if grid.is_active(j) {
                let d = p.x[j] - center[j];
                dsq += d * d;
            }
        }
        r_x = r_x.max(dsq.sqrt());
        r_v = r_v.max(vec3::norm(p.v));
    }
    Ok(SupportRadii { r_x, r_v })
}

/// Acceleration of one particle: (v - u_loc) x B_loc.
pub fn lorentz_acceleration(v: [f64; 3], u_loc: [f64; 3], b_loc: [f64; 3]) -> [f64; 3] {
    vec3::cross(vec3::sub(v, u_loc), b_loc)
}

/// One axis of the cloud-in-cell stencil: two bracketing nodes and their
/// linear weights. Trivial axes collapse to a single node with weight 1.
#[derive(Debug, Clone, Copy)]
struct AxisStencil {
    i0: usize,
    i1: usize,
    w0: f64,
    w1: f64,
}

#[inline]
fn axis_stencil(grid: &Grid, axis: usize, x: f64) -> AxisStencil {
    let n = grid.shape()[axis];
    if n == 1 {
        return AxisStencil {
            i0: 0,
            i1: 0,
            w0: 1.0,
            w1: 0.0,
        };
    }
    let h = grid.spacing(axis);
    let pos = x.rem_euclid(grid.lengths()[axis]) / h;
    let mut i0 = pos.floor() as usize;
    let mut frac = pos - i0 as f64;
    if i0 >= n {
        // x sat exactly at the box length after rounding.
        i0 = 0;
        frac = 0.0;
    }
    AxisStencil {
        i0,
        i1: if i0 + 1 == n { 0 } else { i0 + 1 },
        w0: 1.0 - frac,
        w1: frac,
    }
}

/// The full multilinear stencil at position x. This is the single kernel
/// both interpolation and deposition use.
#[inline]
fn stencil(grid: &Grid, x: [f64; 3]) -> [AxisStencil; 3] {
    [
        axis_stencil(grid, 0, x[0]),
        axis_stencil(grid, 1, x[1]),
        axis_stencil(grid, 2, x[2]),
    ]
}

#[inline]
fn gather_vec(field: &VectorField, grid: &Grid, st: &[AxisStencil; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    let [_, n1, n2] = grid.shape();
    let nodes0 = [(st[0].i0, st[0].w0), (st[0].i1, st[0].w1)];
    let nodes1 = [(st[1].i0, st[1].w0), (st[1].i1, st[1].w1)];
    let nodes2 = [(st[2].i0, st[2].w0), (st[2].i1, st[2].w1)];
    for &(i0, w0) in &nodes0 {
        if w0 == 0.0 {
            continue;
        }
        for &(i1, w1) in &nodes1 {
            if w1 == 0.0 {
                continue;
            }
            let w01 = w0 * w1;
            for &(i2, w2) in &nodes2 {
                if w2 == 0.0 {
                    continue;
                }
                let w = w01 * w2;
                let flat = (i0 * n1 + i1) * n2 + i2;
                for c in 0..3 {
                    let data = field.c[c].as_slice().unwrap();
                    out[c] += w * data[flat];
                }
            }
        }
    }
    out
}

/// Interpolate a vector field at an arbitrary point.
pub fn interpolate(field: &VectorField, grid: &Grid, x: [f64; 3]) -> [f64; 3] {
    gather_vec(field, grid, &stencil(grid, x))
}

#[derive(Debug, Clone, Copy)]
pub struct PushReport {
    /// True if any particle crossed the periodic boundary this step.
    pub wrapped: bool,
}

/// One RK4 step of every particle with frozen fields. `b` is the magnetic
/// field and `uxb` the nodal product u x B; the acceleration is
/// v x B(x) - (u x B)(x) with both fields interpolated by the shared
/// stencil.
pub fn push_with_drift(
    ensemble: &mut ParticleEnsemble,
    grid: &Grid,
    b: &VectorField,
    uxb: &VectorField,
    dt: f64,
    step: u64,
) -> Result<PushReport> {
    let mut wrapped = false;
    let mut all_finite = true;
    let accel = |x: [f64; 3], v: [f64; 3]| -> [f64; 3] {
        let st = stencil(grid, x);
        let b_loc = gather_vec(b, grid, &st);
        let w_loc = gather_vec(uxb, grid, &st);
        vec3::sub(vec3::cross(v, b_loc), w_loc)
    };
    for p in &mut ensemble.particles {
        let (x0, v0) = (p.x, p.v);
        let a1 = accel(x0, v0);
        let x2 = vec3::add(x0, vec3::scale(v0, dt / 2.0));
        let v2 = vec3::add(v0, vec3::scale(a1, dt / 2.0));
        let a2 = accel(x2, v2);
        let x3 = vec3::add(x0, vec3::scale(v2, dt / 2.0));
        let v3 = vec3::add(v0, vec3::scale(a2, dt / 2.0));
        let a3 = accel(x3, v3);
        let x4 = vec3::add(x0, vec3::scale(v3, dt));
        let v4 = vec3::add(v0, vec3::scale(a3, dt));
        let a4 = accel(x4, v4);

        let mut xn = x0;
        let mut vn = v0;
        for j in 0..3 {
            xn[j] += dt / 6.0 * (v0[j] + 2.0 * v2[j] + 2.0 * v3[j] + v4[j]);
            vn[j] += dt / 6.0 * (a1[j] + 2.0 * a2[j] + 2.0 * a3[j] + a4[j]);
            all_finite &= xn[j].is_finite() && vn[j].is_finite();
        }
        let l = grid.lengths();
        if xn.iter().zip(l).any(|(c, lj)| *c < 0.0 || *c >= lj) {
            wrapped = true;
            xn = grid.wrap(xn);
        }
        p.x = xn;
        p.v = vn;
    }
    if !all_finite {
        return Err(Error::NanInPush { step });
    }
    Ok(PushReport { wrapped })
}

/// One RK4 step with fluid fields u and B; forms the nodal drift product
/// u x B and delegates to [`push_with_drift`].
pub fn push_particles(
    ensemble: &mut ParticleEnsemble,
    grid: &Grid,
    u: &VectorField,
    b: &VectorField,
    dt: f64,
    step: u64,
) -> Result<PushReport> {
    let mut uxb = VectorField {
        c: [u.c[0].clone(), u.c[1].clone(), u.c[2].clone()],
    };
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        ndarray::Zip::from(&mut uxb.c[i])
            .and(&u.c[j])
            .and(&b.c[k])
            .and(&u.c[k])
            .and(&b.c[j])
            .for_each(|o, &uj, &bk, &uk, &bj| *o = uj * bk - uk * bj);
    }
    push_with_drift(ensemble, grid, b, &uxb, dt, step)
}

/// Deposit mass and current densities onto the grid with the shared
/// stencil: rho(x_g) = sum w_i W_g(X_i) / cellvol and
/// j(x_g) = sum w_i V_i W_g(X_i) / cellvol.
pub fn deposit_moments(ensemble: &ParticleEnsemble, grid: &Grid) -> (Real, VectorField) {
    let [n0, n1, n2] = grid.shape();
    let mut rho = Real::zeros((n0, n1, n2));
    let mut j = VectorField {
        c: [
            Real::zeros((n0, n1, n2)),
            Real::zeros((n0, n1, n2)),
            Real::zeros((n0, n1, n2)),
        ],
    };
    {
        let rho_s = rho.as_slice_mut().unwrap();
        let (j0, rest) = j.c.split_at_mut(1);
        let (j1, j2) = rest.split_at_mut(1);
        let j0 = j0[0].as_slice_mut().unwrap();
        let j1 = j1[0].as_slice_mut().unwrap();
        let j2 = j2[0].as_slice_mut().unwrap();
        for p in ensemble.particles() {
            let st = stencil(grid, p.x);
            let nodes0 = [(st[0].i0, st[0].w0), (st[0].i1, st[0].w1)];
            let nodes1 = [(st[1].i0, st[1].w0), (st[1].i1, st[1].w1)];
            let nodes2 = [(st[2].i0, st[2].w0), (st[2].i1, st[2].w1)];
            for &(i0, w0) in &nodes0 {
                if w0 == 0.0 {
                    continue;
                }
                for &(i1, w1) in &nodes1 {
                    if w1 == 0.0 {
                        continue;
                    }
                    let w01 = w0 * w1;
                    for &(i2, w2) in &nodes2 {
                        if w2 == 0.0 {
                            continue;
                        }
                        let flat = (i0 * n1 + i1) * n2 + i2;
                        let w = p.w * w01 * w2;
                        rho_s[flat] += w;
                        j0[flat] += w * p.v[0];
                        j1[flat] += w * p.v[1];
                        j2[flat] += w * p.v[2];
                    }
                }
            }
        }
    }
    let inv_cv = 1.0 / grid.cell_volume();
    for v in rho.iter_mut() {
        *v *= inv_cv;
    }
    for comp in &mut j.c {
        for v in comp.iter_mut() {
            *v *= inv_cv;
        }
    }
    (rho, j)
}

/// Draw an ensemble from the Maxwellian M(v) = (2 pi)^{-3/2} exp(-|v|^2/2)
/// times a uniform spatial density, truncated at |v| <= vmax by rejection.
/// Weights are uniform with total mass density * volume.
pub fn sample_maxwellian(
    grid: &Grid,
    np: usize,
    density: f64,
    vmax: f64,
    rng: &mut SeededRng,
) -> ParticleEnsemble {
    let w = density * grid.volume() / np as f64;
    let l = grid.lengths();
    let mut particles = Vec::with_capacity(np);
    for _ in 0..np {
        let x = [
            rng.uniform_in(0.0, l[0]),
            rng.uniform_in(0.0, l[1]),
            rng.uniform_in(0.0, l[2]),
        ];
        let v = loop {
            let v = [rng.gaussian(), rng.gaussian(), rng.gaussian()];
            if vec3::norm(v) <= vmax {
                break v;
            }
        };
        particles.push(Particle { x, v, w });
    }
    ParticleEnsemble::new(particles)
}

/// Draw a compactly supported blob: positions uniform in a ball of radius
/// `x_radius` around the box center (active dimensions only), velocities
/// uniform in a ball of radius `v_radius`. Total mass is `mass`.
pub fn sample_blob(
    grid: &Grid,
    np: usize,
    mass: f64,
    x_radius: f64,
    v_radius: f64,
    rng: &mut SeededRng,
) -> ParticleEnsemble {
    let w = mass / np as f64;
    let center = grid.center();
    let l = grid.lengths();
    let active = [grid.is_active(0), grid.is_active(1), grid.is_active(2)];
    let n_active = active.iter().filter(|a| **a).count();
    fn ball(rng: &mut SeededRng, r: f64, dims: usize) -> [f64; 3] {
        loop {
            let mut p = [0.0; 3];
            for (d, slot) in p.iter_mut().enumerate() {
                if d < dims {
                    *slot = rng.uniform_in(-r, r);
                }
            }
            if vec3::norm(p) <= r {
                return p;
            }
        }
    }
    let mut particles = Vec::with_capacity(np);
    for _ in 0..np {
        let dx = ball(rng, x_radius, n_active.max(1));
        let mut x = [0.0; 3];
        let mut a = 0;
        for j in 0..3 {
            if active[j] {
                x[j] = (center[j] + dx[a]).rem_euclid(l[j]);
                a += 1;
            } else {
                x[j] = rng.uniform_in(0.0, l[j]);
            }
        }
        let v = ball(rng, v_radius, 3);
        particles.push(Particle { x, v, w });
    }
    ParticleEnsemble::new(particles)
}

/// Layout of the coarse phase-space histogram.
#[derive(Debug, Clone, Copy)]
pub struct HistogramSpec {
    /// Bins per active spatial dimension.
    pub nx: usize,
    /// Bins per velocity component over [-vmax, vmax].
    pub nv: usize,
    pub vmax: f64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self {
            nx: 8,
            nv: 8,
            vmax: 6.0,
        }
    }
}

/// Nearest-cell phase-space histogram: density per cell plus one overflow
/// bin for weight with any |v_c| beyond vmax.
#[derive(Debug, Clone)]
pub struct Histogram {
    pub spec: HistogramSpec,
    /// Number of active spatial dimensions.
    pub d_active: usize,
    /// Densities, x-major then v, length nx^d_active * nv^3.
    pub density: Vec<f64>,
    /// Weight that fell outside the velocity box.
    pub overflow: f64,
    /// Phase-space cell volume.
    pub cell_volume: f64,
}

pub fn phase_space_histogram(
    ensemble: &ParticleEnsemble,
    grid: &Grid,
    spec: HistogramSpec,
) -> Histogram {
    let active: Vec<usize> = (0..3).filter(|&j| grid.is_active(j)).collect();
    let d_active = active.len();
    let nx_cells = spec.nx.pow(d_active as u32);
    let nv_cells = spec.nv.pow(3);
    let mut density = vec![0.0; nx_cells * nv_cells];
    let mut overflow = 0.0;
    let mut x_cell = 1.0;
    for &j in &active {
        x_cell *= grid.lengths()[j] / spec.nx as f64;
    }
    let dv = 2.0 * spec.vmax / spec.nv as f64;
    let cell_volume = x_cell * dv * dv * dv;
    'outer: for p in ensemble.particles() {
        let mut xi = 0usize;
        for &j in &active {
            let b = (p.x[j] / grid.lengths()[j] * spec.nx as f64).floor() as usize;
            xi = xi * spec.nx + b.min(spec.nx - 1);
        }
        let mut vi = 0usize;
        for c in 0..3 {
            let b = ((p.v[c] + spec.vmax) / dv).floor();
            if b < 0.0 || b >= spec.nv as f64 {
                overflow += p.w;
                continue 'outer;
            }
            vi = vi * spec.nv + b as usize;
        }
        density[xi * nv_cells + vi] += p.w / cell_volume;
    }
    Histogram {
        spec,
        d_active,
        density,
        overflow,
        cell_volume,
    }
}

/// Which reference state the perturbation is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationMode {
    /// Distance from vacuum: the plain L2 norm of the histogram.
    Vacuum,
    /// Distance from the unit Maxwellian: subtract M(v_center) first.
    Maxwellian,
}

/// L2 norm of (histogram - reference) over the phase-space cells. The
/// overflow bin is excluded; it is reported separately on the histogram.
pub fn perturbation_norm(hist: &Histogram, mode: PerturbationMode) -> f64 {
    let nv_cells = hist.spec.nv.pow(3);
    let nx_cells = hist.density.len() / nv_cells;
    let dv = 2.0 * hist.spec.vmax / hist.spec.nv as f64;
    let norm_m = (2.0 * std::f64::consts::PI).powf(-1.5);
    let mut acc = 0.0;
    for xi in 0..nx_cells {
        for vi in 0..nv_cells {
            let mut rest = vi;
            let mut vsq = 0.0;
            for _ in 0..3 {
                let b = rest % hist.spec.nv;
                rest /= hist.spec.nv;
                let vc = -hist.spec.vmax + (b as f64 + 0.5) * dv;
                vsq += vc * vc;
            }
            let reference = match mode {
                PerturbationMode::Vacuum => 0.0,
                PerturbationMode::Maxwellian => norm_m * (-0.5 * vsq).exp(),
            };
            let d = hist.density[xi * nv_cells + vi] - reference;
            acc += d * d;
        }
    }
    (acc * hist.cell_volume).sqrt()
}

/// Worst-case slack of the velocity-support bound
/// R_v(t) <= exp(beta t) R_v(0) + (gamma / beta)(exp(beta t) - 1),
/// with beta = sup_t ||B||_inf and gamma = sup_t ||u||_inf ||B||_inf;
/// for beta = 0 the bound degenerates to R_v(0) + gamma t. A nonnegative
/// return means the bound held at every sample.
pub fn support_bound_check(samples: &[(f64, f64)], r_v0: f64, beta: f64, gamma: f64) -> f64 {
    let mut slack = f64::INFINITY;
    for &(t, r_v) in samples {
        let bound = if beta > 0.0 {
            let e = (beta * t).exp();
            e * r_v0 + gamma / beta * (e - 1.0)
        } else {
            r_v0 + gamma * t
        };
        slack = slack.min(bound - r_v);
    }
    slack
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralWorkspace;

    fn uniform_b_field(ws: &SpectralWorkspace, b: [f64; 3]) -> VectorField {
        VectorField::from_fn(ws, |_| b)
    }

    #[test]
    fn lorentz_acceleration_basics() {
        assert_eq!(
            lorentz_acceleration([1.0, 0.0, 0.0], [0.0; 3], [0.0, 0.0, 1.0]),
            [0.0, -1.0, 0.0]
        );
        assert_eq!(
            lorentz_acceleration([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [0.5, 0.5, 0.5]),
            [0.0, 0.0, 0.0]
        );
        // a is orthogonal to (v - u).
        let v = [0.4, -1.0, 2.0];
        let u = [0.1, 0.2, 0.3];
        let b = [1.0, -2.0, 0.5];
        let a = lorentz_acceleration(v, u, b);
        assert!(vec3::dot(a, vec3::sub(v, u)).abs() < 1e-14);
    }

    #[test]
    fn gyromotion_matches_exact_circle() {
        // Uniform B = (0, 0, 1), u = 0: V(t) = (cos t, -sin t, 0) from
        // V(0) = (1, 0, 0). RK4 at dt = 1e-3 must track it to 1e-8 at
        // t = pi/2.
        let grid = Grid::cubic(3, 8).unwrap();
        let ws = SpectralWorkspace::new(&grid);
        let b = uniform_b_field(&ws, [0.0, 0.0, 1.0]);
        let u = VectorField::zeros(&ws);
        let c = grid.center();
        let mut ens = ParticleEnsemble::new(vec![Particle {
            x: c,
            v: [1.0, 0.0, 0.0],
            w: 1.0,
        }]);
        let dt = 1e-3;
        let t_end = std::f64::consts::FRAC_PI_2;
        let steps = (t_end / dt).round() as usize;
        for s in 0..steps {
            push_particles(&mut ens, &grid, &u, &b, dt, s as u64).unwrap();
        }
        let t = steps as f64 * dt;
        let p = ens.particles()[0];
        let want = [t.cos(), -t.sin(), 0.0];
        let err = vec3::norm(vec3::sub(p.v, want));
        assert!(err < 1e-8, "velocity error {err:.3e} at t = pi/2");
    }

    #[test]
    fn speed_is_preserved_with_zero_u() {
        let grid = Grid::cubic(3, 8).unwrap();
        let ws = SpectralWorkspace::new(&grid);
        let b = uniform_b_field(&ws, [0.3, -0.4, 0.9]);
        let u = VectorField::zeros(&ws);
        let c = grid.center();
        let mut ens = ParticleEnsemble::new(vec![Particle {
            x: c,
            v: [1.0, 0.5, -0.25],
            w: 2.0,
        }]);
        let speed0 = vec3::norm(ens.particles()[0].v);
        for s in 0..1000 {
            push_particles(&mut ens, &grid, &u, &b, 1e-3, s).unwrap();
        }
        let drift = (vec3::norm(ens.particles()[0].v) - speed0).abs();
        assert!(drift < 1e-10, "speed drift {drift:.3e} over 1000 steps");
    }

    #[test]
    fn free_transport_keeps_velocity_bits() {
        let grid = Grid::cubic(2, 8).unwrap();
        let ws = SpectralWorkspace::new(&grid);
        let z = VectorField::zeros(&ws);
        let mut ens = ParticleEnsemble::new(vec![Particle {
            x: [1.0, 2.0, 0.5],
            v: [0.7, -0.2, 0.1],
            w: 1.0,
        }]);
        let v0 = ens.particles()[0].v;
        for s in 0..100 {
            push_particles(&mut ens, &grid, &z, &z, 0.05, s).unwrap();
        }
        let v1 = ens.particles()[0].v;
        for j in 0..3 {
            assert_eq!(v0[j].to_bits(), v1[j].to_bits());
        }
    }

    #[test]
    fn push_reports_wrap_and_rejects_nan() {
        let grid = Grid::cubic(2, 8).unwrap();
        let ws = SpectralWorkspace::new(&grid);
        let z = VectorField::zeros(&ws);
        let l = grid.lengths()[0];
        let mut ens = ParticleEnsemble::new(vec![Particle {
            x: [l - 0.01, 1.0, 0.5],
            v: [1.0, 0.0, 0.0],
            w: 1.0,
        }]);
        let rep = push_particles(&mut ens, &grid, &z, &z, 0.1, 0).unwrap();
        assert!(rep.wrapped, "particle should have wrapped");
        assert!(ens.particles()[0].x[0] < l);

        let mut bad = ParticleEnsemble::new(vec![Particle {
            x: [1.0, 1.0, 0.5],
            v: [f64::NAN, 0.0, 0.0],
            w: 1.0,
        }]);
        let err = push_particles(&mut bad, &grid, &z, &z, 0.1, 17).unwrap_err();
        assert_eq!(err.to_string(), "NaN in particle push at step 17");
    }

    #[test]
    fn deposition_conserves_mass_and_current() {
        let grid = Grid::cubic(2, 16).unwrap();
        let mut rng = SeededRng::new(21);
        let mut particles = Vec::new();
        for _ in 0..500 {
            particles.push(Particle {
                x: [
                    rng.uniform_in(0.0, grid.lengths()[0]),
                    rng.uniform_in(0.0, grid.lengths()[1]),
                    0.0,
                ],
                v: [rng.gaussian(), rng.gaussian(), rng.gaussian()],
                w: rng.uniform_in(0.5, 1.5),
            });
        }
        let ens = ParticleEnsemble::new(particles);
        let (rho, j) = deposit_moments(&ens, &grid);
        let cv = grid.cell_volume();
        let mass_grid: f64 = rho.iter().sum::<f64>() * cv;
        let mass = ens.total_weight();
        assert!(
            (mass_grid - mass).abs() < 1e-12 * mass,
            "grid mass {mass_grid} vs particle mass {mass}"
        );
        let mom = ens.total_momentum();
        for c in 0..3 {
            let jc: f64 = j.c[c].iter().sum::<f64>() * cv;
            assert!(
                (jc - mom[c]).abs() < 1e-12 * (1.0 + mom[c].abs()),
                "current component {c}: {jc} vs {}",
                mom[c]
            );
        }
    }

    #[test]
    fn deposit_two_particles_force_example() {
        // Two particles with w = 3, velocities (0, 2, 0) and (0, 0, 3),
        // uniform B = (0, 0, 1): the Lorentz force on the fluid,
        // -int j x B, integrates to (-6, 0, 0).
        let grid = Grid::cubic(2, 8).unwrap();
        let ws = SpectralWorkspace::new(&grid);
        let ens = ParticleEnsemble::new(vec![
            Particle {
                x: [1.0, 1.0, 0.0],
                v: [0.0, 2.0, 0.0],
                w: 3.0,
            },
            Particle {
                x: [2.2, 1.0, 0.0],
                v: [0.0, 0.0, 3.0],
                w: 3.0,
            },
        ]);
        let (_, j) = deposit_moments(&ens, &grid);
        let b = uniform_b_field(&ws, [0.0, 0.0, 1.0]);
        let cv = grid.cell_volume();
        let mut force = [0.0; 3];
        for i0 in 0..grid.shape()[0] {
            for i1 in 0..grid.shape()[1] {
                let idx = [i0, i1, 0];
                let jv = j.at(idx);
                let f = vec3::cross(jv, b.at(idx));
                for c in 0..3 {
                    force[c] -= f[c] * cv;
                }
            }
        }
        let want = [-6.0, 0.0, 0.0];
        for c in 0..3 {
            assert!(
                (force[c] - want[c]).abs() < 1e-12,
                "force {force:?} vs {want:?}"
            );
        }
    }

    #[test]
    fn interpolation_recovers_linear_field_at_nodes() {
        let grid = Grid::cubic(2, 8).unwrap();
        let ws = SpectralWorkspace::new(&grid);
        let f = VectorField::from_fn(&ws, |x| [x[0].sin(), x[1].cos(), 1.0]);
        // At a node the stencil weight concentrates on that node.
        let x = grid.node([3, 5, 0]);
        let got = interpolate(&f, &grid, x);
        let want = f.at([3, 5, 0]);
        for c in 0..3 {
            assert!((got[c] - want[c]).abs() < 1e-14);
        }
        // Halfway between two nodes the result is their average.
        let h = grid.spacing(0);
        let mid = [x[0] + 0.5 * h, x[1], x[2]];
        let got = interpolate(&f, &grid, mid);
        let want0 = 0.5 * (f.at([3, 5, 0])[0] + f.at([4, 5, 0])[0]);
        assert!((got[0] - want0).abs() < 1e-14);
    }

    #[test]
    fn maxwellian_sample_statistics() {
        let grid = Grid::cubic(2, 8).unwrap();
        let np = 100_000;
        let mut rng = SeededRng::new(7);
        let ens = sample_maxwellian(&grid, np, 1.0, 6.0, &mut rng);
        assert_eq!(ens.len(), np);
        let mass = ens.total_weight();
        // Summation round-off over 1e5 terms, not a modeling error.
        assert!(((mass - grid.volume()) / grid.volume()).abs() < 1e-9);
        assert_eq!(
            mass.to_bits(),
            ens.total_weight().to_bits(),
            "repeated mass sums must agree bitwise"
        );
        let mom = ens.total_momentum();
        let mean_v = vec3::norm(mom) / mass;
        let bound = 5.0 / (np as f64).sqrt();
        assert!(mean_v < bound, "mean velocity {mean_v:.3e} above {bound:.3e}");
        let vmax = ens
            .particles()
            .iter()
            .map(|p| vec3::norm(p.v))
            .fold(0.0f64, f64::max);
        assert!(vmax <= 6.0, "truncation violated: {vmax}");
    }

    #[test]
    fn sampling_is_bit_reproducible() {
        let grid = Grid::cubic(3, 8).unwrap();
        let mut r1 = SeededRng::new(99);
        let mut r2 = SeededRng::new(99);
        let a = sample_maxwellian(&grid, 1000, 1.0, 6.0, &mut r1);
        let b = sample_maxwellian(&grid, 1000, 1.0, 6.0, &mut r2);
        for (p, q) in a.particles().iter().zip(b.particles()) {
            for j in 0..3 {
                assert_eq!(p.x[j].to_bits(), q.x[j].to_bits());
                assert_eq!(p.v[j].to_bits(), q.v[j].to_bits());
            }
        }
    }

    #[test]
    fn support_radii_and_empty_error() {
        let grid = Grid::cubic(2, 8).unwrap();
        let c = grid.center();
        let ens = ParticleEnsemble::new(vec![
            Particle {
                x: [c[0] + 1.0, c[1], 0.2],
                v: [0.0, 3.0, 4.0],
                w: 1.0,
            },
            Particle {
                x: [c[0], c[1] - 2.0, 0.9],
                v: [1.0, 0.0, 0.0],
                w: 1.0,
            },
        ]);
        let r = support_radii(&ens, &grid).unwrap();
        assert!((r.r_x - 2.0).abs() < 1e-14, "r_x = {}", r.r_x);
        assert!((r.r_v - 5.0).abs() < 1e-14, "r_v = {}", r.r_v);
        assert!(support_radii(&ParticleEnsemble::empty(), &grid).is_err());
    }

    #[test]
    fn histogram_single_particle_norm() {
        let grid = Grid::cubic(2, 8).unwrap();
        let spec = HistogramSpec {
            nx: 4,
            nv: 4,
            vmax: 2.0,
        };
        let ens = ParticleEnsemble::new(vec![Particle {
            x: [1.0, 1.0, 0.1],
            v: [0.3, -0.2, 0.1],
            w: 1.0,
        }]);
        let hist = phase_space_histogram(&ens, &grid, spec);
        let norm = perturbation_norm(&hist, PerturbationMode::Vacuum);
        let want = 1.0 / hist.cell_volume.sqrt();
        assert!(
            ((norm - want) / want).abs() < 1e-12,
            "norm {norm} vs cellvol^-1/2 = {want}"
        );
        assert_eq!(hist.overflow, 0.0);
    }

    #[test]
    fn histogram_overflow_bin_catches_fast_particles() {
        let grid = Grid::cubic(2, 8).unwrap();
        let spec = HistogramSpec {
            nx: 4,
            nv: 4,
            vmax: 1.0,
        };
        let ens = ParticleEnsemble::new(vec![Particle {
            x: [1.0, 1.0, 0.1],
            v: [5.0, 0.0, 0.0],
            w: 2.5,
        }]);
        let hist = phase_space_histogram(&ens, &grid, spec);
        assert_eq!(hist.overflow, 2.5);
        assert!(hist.density.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn maxwellian_perturbation_norm_is_small_for_maxwellian_data() {
        let grid = Grid::cubic(2, 8).unwrap();
        let mut rng = SeededRng::new(31);
        let ens = sample_maxwellian(&grid, 200_000, 1.0, 6.0, &mut rng);
        let hist = phase_space_histogram(&ens, &grid, HistogramSpec::default());
        let pert = perturbation_norm(&hist, PerturbationMode::Maxwellian);
        let vacuum = perturbation_norm(&hist, PerturbationMode::Vacuum);
        assert!(
            pert < 0.5 * vacuum,
            "Maxwellian-referenced norm {pert} should sit well below vacuum norm {vacuum}"
        );
    }

    #[test]
    fn support_bound_slack() {
        // Free transport: beta = gamma = 0, R_v constant, slack exactly 0.
        let samples: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 * 0.1, 2.0)).collect();
        assert_eq!(support_bound_check(&samples, 2.0, 0.0, 0.0), 0.0);
        // A growing bound with constant R_v leaves positive slack away
        // from t = 0 (where the bound is tight by construction).
        let slack = support_bound_check(&samples, 2.0, 0.5, 0.1);
        assert!(slack >= 0.0);
        let late: Vec<(f64, f64)> = samples[1..].to_vec();
        assert!(support_bound_check(&late, 2.0, 0.5, 0.1) > 0.0);
        // A sample above the bound goes negative.
        let bad = vec![(1.0, 10.0)];
        assert!(support_bound_check(&bad, 2.0, 0.0, 0.0) < 0.0);
    }
}
