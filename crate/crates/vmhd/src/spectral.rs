//! FFT workspace: transforms, wavenumber tables, dealiasing.
//!
//! Real fields live on the periodic grid; spectral fields store the
//! half-spectrum of a real-to-complex transform along the last active axis
//! and full complex spectra along the first two. Forward transforms are
//! normalized by 1/N so spectral entries are Fourier coefficients of
//! v(x) = sum_k vhat(k) exp(i k.x), which makes Parseval read
//! ||v||^2_{L2} = V * sum_k w(k) |vhat(k)|^2 with Hermitian weight w.
//!
//! The 2/3-rule mask drops |m| > floor(n/3) per axis and is applied to every
//! nonlinear product formed in real space. Differentiation multiplies by i*k
//! with the Nyquist entry zeroed.

use ndarray::Array3;
use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub type Spec = Array3<Complex64>;
pub type Real = Array3<f64>;

pub struct SpectralWorkspace {
    grid: Grid,
    nspec: [usize; 3],
    fwd01: [Option<Arc<dyn Fft<f64>>>; 2],
    inv01: [Option<Arc<dyn Fft<f64>>>; 2],
    r2c: Option<Arc<dyn RealToComplex<f64>>>,
    c2r: Option<Arc<dyn ComplexToReal<f64>>>,
    k: [Vec<f64>; 3],
    kderiv: [Vec<f64>; 3],
    keep: [Vec<bool>; 3],
    herm: Vec<f64>,
    lane: Vec<Complex64>,
    lane_re: Vec<f64>,
    lane_half: Vec<Complex64>,
    scratch_fft: Vec<Complex64>,
    scratch_r2c: Vec<Complex64>,
    scratch_c2r: Vec<Complex64>,
}

fn signed_freqs(n: usize, k_unit: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let m = if i <= n / 2 { i as i64 } else { i as i64 - n as i64 };
            m as f64 * k_unit
        })
        .collect()
}

impl SpectralWorkspace {
    pub fn new(grid: &Grid) -> Self {
        let [n0, n1, n2] = grid.shape();
        let nr = if n2 > 1 { n2 / 2 + 1 } else { 1 };
        let mut planner = FftPlanner::<f64>::new();
        let mut rplanner = RealFftPlanner::<f64>::new();

        let plan_pair = |p: &mut FftPlanner<f64>, n: usize| {
            if n > 1 {
                (
                    Some(p.plan_fft_forward(n)),
                    Some(p.plan_fft_inverse(n)),
                )
            } else {
                (None, None)
            }
        };
        let (f0, i0) = plan_pair(&mut planner, n0);
        let (f1, i1) = plan_pair(&mut planner, n1);
        let (r2c, c2r) = if n2 > 1 {
            (
                Some(rplanner.plan_fft_forward(n2)),
                Some(rplanner.plan_fft_inverse(n2)),
            )
        } else {
            (None, None)
        };

        let mut k = [
            signed_freqs(n0, grid.k_unit(0)),
            signed_freqs(n1, grid.k_unit(1)),
            (0..nr).map(|i| i as f64 * grid.k_unit(2)).collect::<Vec<_>>(),
        ];
        if n2 == 1 {
            k[2] = vec![0.0];
        }
        let mut kderiv = k.clone();
        // Differentiation has no well-defined sign at the Nyquist frequency;
        // zero it there.
        if n0 > 1 {
            kderiv[0][n0 / 2] = 0.0;
        }
        if n1 > 1 {
            kderiv[1][n1 / 2] = 0.0;
        }
        if n2 > 1 {
            kderiv[2][nr - 1] = 0.0;
        }

        let keep_axis = |n: usize, half: bool| -> Vec<bool> {
            if n == 1 {
                return vec![true];
            }
            let cut = n / 3;
            if half {
                (0..n / 2 + 1).map(|m| m <= cut).collect()
            } else {
                (0..n)
                    .map(|i| {
                        let m = if i <= n / 2 { i } else { n - i };
                        m <= cut
                    })
                    .collect()
            }
        };
        let keep = [
            keep_axis(n0, false),
            keep_axis(n1, false),
            keep_axis(n2, true),
        ];

        let herm = if n2 > 1 {
            (0..nr)
                .map(|i| if i == 0 || i == nr - 1 { 1.0 } else { 2.0 })
                .collect()
        } else {
            vec![1.0]
        };

        let scratch_len = |p: &Option<Arc<dyn Fft<f64>>>| {
            p.as_ref().map_or(0, |p| p.get_inplace_scratch_len())
        };
        let scratch_fft = vec![
            Complex64::default();
            scratch_len(&f0)
                .max(scratch_len(&i0))
                .max(scratch_len(&f1))
                .max(scratch_len(&i1))
        ];
        let scratch_r2c =
            vec![Complex64::default(); r2c.as_ref().map_or(0, |p| p.get_scratch_len())];
        let scratch_c2r =
            vec![Complex64::default(); c2r.as_ref().map_or(0, |p| p.get_scratch_len())];

        Self {
            grid: grid.clone(),
            nspec: [n0, n1, nr],
            fwd01: [f0, f1],
            inv01: [i0, i1],
            r2c,
            c2r,
            k,
            kderiv,
            keep,
            herm,
            lane: vec![Complex64::default(); n0.max(n1)],
            lane_re: vec![0.0; n2],
            lane_half: vec![Complex64::default(); nr],
            scratch_fft,
            scratch_r2c,
            scratch_c2r,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Spectral array shape [n0, n1, n2/2 + 1].
    pub fn spec_shape(&self) -> [usize; 3] {
        self.nspec
    }

    pub fn zeros_spec(&self) -> Spec {
        Array3::zeros((self.nspec[0], self.nspec[1], self.nspec[2]))
    }

    pub fn zeros_real(&self) -> Real {
        let [n0, n1, n2] = self.grid.shape();
        Array3::zeros((n0, n1, n2))
    }

    /// Wavenumber along `axis` at spectral index `i`.
    pub fn k_at(&self, axis: usize, i: usize) -> f64 {
        self.k[axis][i]
    }

    /// Wavenumber used for differentiation (Nyquist zeroed).
    pub fn k_deriv_at(&self, axis: usize, i: usize) -> f64 {
        self.kderiv[axis][i]
    }

    pub fn ksq_at(&self, i0: usize, i1: usize, i2: usize) -> f64 {
        let kx = self.k[0][i0];
        let ky = self.k[1][i1];
        let kz = self.k[2][i2];
        kx * kx + ky * ky + kz * kz
    }

    /// Parseval weight of spectral index `i2` on the half-spectrum axis.
    pub fn hermitian_weight(&self, i2: usize) -> f64 {
        self.herm[i2]
    }

    pub fn kept(&self, i0: usize, i1: usize, i2: usize) -> bool {
        self.keep[0][i0] && self.keep[1][i1] && self.keep[2][i2]
    }

    fn c2c_pass(&mut self, spec: &mut Spec, axis: usize, forward: bool) {
        let plan = match if forward {
            &self.fwd01[axis]
        } else {
            &self.inv01[axis]
        } {
            Some(p) => p.clone(),
            None => return,
        };
        let [n0, n1, nr] = self.nspec;
        let data = spec.as_slice_mut().expect("spectral array must be contiguous");
        let n = if axis == 0 { n0 } else { n1 };
        let lane = &mut self.lane[..n];
        match axis {
            0 => {
                let stride = n1 * nr;
                for i1 in 0..n1 {
                    for i2 in 0..nr {
                        let base = i1 * nr + i2;
                        for (j, slot) in lane.iter_mut().enumerate() {
                            *slot = data[base + j * stride];
                        }
                        plan.process_with_scratch(lane, &mut self.scratch_fft);
                        for (j, slot) in lane.iter().enumerate() {
                            data[base + j * stride] = *slot;
                        }
                    }
                }
            }
            1 => {
                for i0 in 0..n0 {
                    for i2 in 0..nr {
                        let base = i0 * n1 * nr + i2;
                        for (j, slot) in lane.iter_mut().enumerate() {
                            *slot = data[base + j * nr];
                        }
                        plan.process_with_scratch(lane, &mut self.scratch_fft);
                        for (j, slot) in lane.iter().enumerate() {
                            data[base + j * nr] = *slot;
                        }
                    }
                }
            }
            _ => unreachable!("c2c passes only run on axes 0 and 1"),
        }
    }

    /// Forward transform into `out`, normalized by 1/N.
    pub fn forward_into(&mut self, real: &Real, out: &mut Spec) {
        let [n0, n1, n2] = self.grid.shape();
        let nr = self.nspec[2];
        {
            let src = real.as_slice().expect("real array must be contiguous");
            let dst = out.as_slice_mut().expect("spectral array must be contiguous");
            if let Some(r2c) = self.r2c.clone() {
                for i01 in 0..n0 * n1 {
                    self.lane_re.copy_from_slice(&src[i01 * n2..(i01 + 1) * n2]);
                    r2c.process_with_scratch(
                        &mut self.lane_re,
                        &mut self.lane_half,
                        &mut self.scratch_r2c,
                    )
                    .expect("r2c lengths are fixed by the plan");
                    dst[i01 * nr..(i01 + 1) * nr].copy_from_slice(&self.lane_half);
                }
            } else {
                for (d, s) in dst.iter_mut().zip(src.iter()) {
                    *d = Complex64::new(*s, 0.0);
                }
            }
        }
        self.c2c_pass(out, 1, true);
        self.c2c_pass(out, 0, true);
        let scale = 1.0 / self.grid.total_points() as f64;
        for v in out.as_slice_mut().unwrap() {
            *v *= scale;
        }
    }

    /// Inverse transform; `spec` is passed by value because the passes work
    /// in place (clone at the call site to keep the original).
    pub fn inverse_into(&mut self, mut spec: Spec, out: &mut Real) {
        self.c2c_pass(&mut spec, 0, false);
        self.c2c_pass(&mut spec, 1, false);
        let [n0, n1, n2] = self.grid.shape();
        let nr = self.nspec[2];
        let src = spec.as_slice_mut().expect("spectral array must be contiguous");
        let dst = out.as_slice_mut().expect("real array must be contiguous");
        if let Some(c2r) = self.c2r.clone() {
            for i01 in 0..n0 * n1 {
                self.lane_half.copy_from_slice(&src[i01 * nr..(i01 + 1) * nr]);
                // Round-off can leave stray imaginary parts where the
                // half-spectrum must be purely real; c2r ignores length-valid
                // input otherwise.
                self.lane_half[0].im = 0.0;
                self.lane_half[nr - 1].im = 0.0;
                c2r.process_with_scratch(
                    &mut self.lane_half,
                    &mut self.lane_re,
                    &mut self.scratch_c2r,
                )
                .expect("c2r lengths are fixed by the plan");
                dst[i01 * n2..(i01 + 1) * n2].copy_from_slice(&self.lane_re);
            }
        } else {
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d = s.re;
            }
        }
    }

    pub fn forward(&mut self, real: &Real) -> Spec {
        let mut out = self.zeros_spec();
        self.forward_into(real, &mut out);
        out
    }

    pub fn inverse(&mut self, spec: &Spec) -> Real {
        let mut out = self.zeros_real();
        self.inverse_into(spec.clone(), &mut out);
        out
    }

    /// Zero every mode outside the 2/3 ball.
    pub fn dealias(&self, spec: &mut Spec) {
        let [n0, n1, nr] = self.nspec;
        let data = spec.as_slice_mut().unwrap();
        for i0 in 0..n0 {
            let k0 = self.keep[0][i0];
            for i1 in 0..n1 {
                let k01 = k0 && self.keep[1][i1];
                let base = (i0 * n1 + i1) * nr;
                if !k01 {
                    for v in &mut data[base..base + nr] {
                        *v = Complex64::new(0.0, 0.0);
                    }
                } else {
                    for i2 in 0..nr {
                        if !self.keep[2][i2] {
                            data[base + i2] = Complex64::new(0.0, 0.0);
                        }
                    }
                }
            }
        }
    }

    /// Spectral derivative along `axis`: multiply by i k, Nyquist zeroed.
    pub fn deriv_into(&self, spec: &Spec, axis: usize, out: &mut Spec) {
        let [n0, n1, nr] = self.nspec;
        let src = spec.as_slice().unwrap();
        let dst = out.as_slice_mut().unwrap();
        for i0 in 0..n0 {
            for i1 in 0..n1 {
                let base = (i0 * n1 + i1) * nr;
                for i2 in 0..nr {
                    let kk = match axis {
                        0 => self.kderiv[0][i0],
                        1 => self.kderiv[1][i1],
                        _ => self.kderiv[2][i2],
                    };
                    let v = src[base + i2];
                    dst[base + i2] = Complex64::new(-kk * v.im, kk * v.re);
                }
            }
        }
    }

    pub fn deriv(&self, spec: &Spec, axis: usize) -> Spec {
        let mut out = self.zeros_spec();
        self.deriv_into(spec, axis, &mut out);
        out
    }

    /// L2 norm squared of a scalar field given spectrally (Parseval).
    pub fn l2_norm_sq_spec(&self, spec: &Spec) -> f64 {
        let [n0, n1, nr] = self.nspec;
        let data = spec.as_slice().unwrap();
        let mut acc = 0.0;
        for i0 in 0..n0 {
            for i1 in 0..n1 {
                let base = (i0 * n1 + i1) * nr;
                for i2 in 0..nr {
                    acc += self.herm[i2] * data[base + i2].norm_sqr();
                }
            }
        }
        acc * self.grid.volume()
    }

    /// L2 norm squared of a real-space scalar field (nodal quadrature).
    pub fn l2_norm_sq_real(&self, real: &Real) -> f64 {
        let sum: f64 = real.iter().map(|v| v * v).sum();
        sum * self.grid.cell_volume()
    }

    pub fn check_finite(&self, real: &Real, what: &str) -> Result<()> {
        if real.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteField(what.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random_real(ws: &SpectralWorkspace, rng: &mut SeededRng) -> Real {
        let mut f = ws.zeros_real();
        for v in f.iter_mut() {
            *v = rng.gaussian();
        }
        f
    }

    #[test]
    fn round_trip_3d() {
        let grid = Grid::cubic(3, 16).unwrap();
        let mut ws = SpectralWorkspace::new(&grid);
        let mut rng = SeededRng::new(3);
        let f = random_real(&ws, &mut rng);
        let spec = ws.forward(&f);
        let back = ws.inverse(&spec);
        let scale = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let err = f
            .iter()
            .zip(back.iter())
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err / scale < 1e-12, "round trip error {err:.3e}");
    }

    #[test]
    fn round_trip_2d() {
        let grid = Grid::cubic(2, 32).unwrap();
        let mut ws = SpectralWorkspace::new(&grid);
        let mut rng = SeededRng::new(4);
        let f = random_real(&ws, &mut rng);
        let spec = ws.forward(&f);
        let back = ws.inverse(&spec);
        let err = f
            .iter()
            .zip(back.iter())
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err < 1e-12, "round trip error {err:.3e}");
    }

    #[test]
    fn parseval_matches_nodal_quadrature() {
        for (d, n) in [(2usize, 16usize), (3, 12)] {
            let grid = Grid::cubic(d, n).unwrap();
            let mut ws = SpectralWorkspace::new(&grid);
            let mut rng = SeededRng::new(5);
            let f = random_real(&ws, &mut rng);
            let spec = ws.forward(&f);
            let a = ws.l2_norm_sq_real(&f);
            let b = ws.l2_norm_sq_spec(&spec);
            assert!(
                ((a - b) / a).abs() < 1e-12,
                "Parseval mismatch d={d}: nodal {a}, spectral {b}"
            );
        }
    }

    #[test]
    fn derivative_of_single_mode() {
        // f(x) = sin(3 x2) on a 2 pi box: d/dx2 f = 3 cos(3 x2),
        // second derivative -9 sin(3 x2).
        let grid = Grid::cubic(3, 16).unwrap();
        let mut ws = SpectralWorkspace::new(&grid);
        let mut f = ws.zeros_real();
        let [n0, n1, n2] = grid.shape();
        for i0 in 0..n0 {
            for i1 in 0..n1 {
                for i2 in 0..n2 {
                    let x = grid.node([i0, i1, i2]);
                    f[[i0, i1, i2]] = (3.0 * x[1]).sin();
                }
            }
        }
        let spec = ws.forward(&f);
        let d1 = ws.deriv(&spec, 1);
        let d2 = ws.deriv(&d1, 1);
        let d2r = ws.inverse(&d2);
        let mut err = 0.0f64;
        for i0 in 0..n0 {
            for i1 in 0..n1 {
                for i2 in 0..n2 {
                    let x = grid.node([i0, i1, i2]);
                    let exact = -9.0 * (3.0 * x[1]).sin();
                    err = err.max((d2r[[i0, i1, i2]] - exact).abs());
                }
            }
        }
        assert!(err < 1e-10, "second derivative error {err:.3e}");
    }

    #[test]
    fn nyquist_mode_derivative_is_zero() {
        let grid = Grid::cubic(2, 8).unwrap();
        let mut ws = SpectralWorkspace::new(&grid);
        let [n0, n1, _] = grid.shape();
        let mut f = ws.zeros_real();
        // Pure Nyquist oscillation along axis 0: (-1)^{i0}.
        for i0 in 0..n0 {
            for i1 in 0..n1 {
                f[[i0, i1, 0]] = if i0 % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
        let spec = ws.forward(&f);
        let d = ws.deriv(&spec, 0);
        let dr = ws.inverse(&d);
        let max = dr.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(max < 1e-12, "Nyquist derivative leaked: {max:.3e}");
    }

    #[test]
    fn dealias_drops_high_modes_only() {
        let grid = Grid::cubic(2, 12).unwrap();
        let ws = SpectralWorkspace::new(&grid);
        let mut spec = ws.zeros_spec();
        // Mode m = (1, 0) is kept, m = (5, 0) is outside 12/3 = 4.
        spec[[1, 0, 0]] = Complex64::new(1.0, 0.0);
        spec[[5, 0, 0]] = Complex64::new(1.0, 0.0);
        ws.dealias(&mut spec);
        assert_eq!(spec[[1, 0, 0]], Complex64::new(1.0, 0.0));
        assert_eq!(spec[[5, 0, 0]], Complex64::new(0.0, 0.0));
    }
}
