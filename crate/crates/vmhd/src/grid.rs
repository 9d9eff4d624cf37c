//! Periodic grid description.
//!
//! Fields always carry three components, but the spatial grid may be two- or
//! three-dimensional. A 2-d grid ("2.5-d" runs) is stored internally as a
//! [n1, n2, 1] array with unit box length along the trivial axis, so all
//! array code paths are shared; the trivial axis carries wavenumber zero.

use crate::error::{Error, Result};

pub const DEFAULT_BOX: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    d: usize,
    n: [usize; 3],
    l: [f64; 3],
}

impl Grid {
    /// Build a grid with `d` spatial dimensions, `n[j]` points and box
    /// length `l[j]` along each real dimension. Each active extent must be
    /// even and at least 8.
    pub fn new(d: usize, n: &[usize], l: &[f64]) -> Result<Self> {
        if d != 2 && d != 3 {
            return Err(Error::InvalidGrid(format!("d must be 2 or 3, got {d}")));
        }
        if n.len() != d || l.len() != d {
            return Err(Error::InvalidGrid(format!(
                "expected {d} grid extents and box lengths, got {} and {}",
                n.len(),
                l.len()
            )));
        }
        let mut nn = [1usize; 3];
        let mut ll = [1.0f64; 3];
        for j in 0..d {
            if n[j] < 8 || n[j] % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "n[{j}] = {} must be even and >= 8",
                    n[j]
                )));
            }
            if !(l[j].is_finite() && l[j] > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "box length l[{j}] = {} must be positive and finite",
                    l[j]
                )));
            }
            nn[j] = n[j];
            ll[j] = l[j];
        }
        Ok(Self { d, n: nn, l: ll })
    }

    /// Cubic grid with n points per active dimension and box length 2 pi.
    pub fn cubic(d: usize, n: usize) -> Result<Self> {
        let ns = vec![n; d];
        let ls = vec![DEFAULT_BOX; d];
        Self::new(d, &ns, &ls)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Array shape, always three entries (trailing 1 for 2-d grids).
    pub fn shape(&self) -> [usize; 3] {
        self.n
    }

    /// Box lengths, always three entries (trailing 1.0 for 2-d grids).
    pub fn lengths(&self) -> [f64; 3] {
        self.l
    }

    pub fn total_points(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    /// Box measure: area for d = 2, volume for d = 3.
    pub fn volume(&self) -> f64 {
        self.l[0] * self.l[1] * self.l[2]
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.total_points() as f64
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.l[axis] / self.n[axis] as f64
    }

    /// True for axes that carry more than one point.
    pub fn is_active(&self, axis: usize) -> bool {
        self.n[axis] > 1
    }

    /// Box center, used as the origin for particle support radii.
    pub fn center(&self) -> [f64; 3] {
        [self.l[0] / 2.0, self.l[1] / 2.0, self.l[2] / 2.0]
    }

    /// Wrap a point into [0, l) per axis.
    pub fn wrap(&self, x: [f64; 3]) -> [f64; 3] {
        let mut out = x;
        for j in 0..3 {
            out[j] = x[j].rem_euclid(self.l[j]);
            // rem_euclid can return l itself when x is a tiny negative number.
            if out[j] >= self.l[j] {
                out[j] = 0.0;
            }
        }
        out
    }

    /// Integer angular wavenumber scale 2 pi / l per axis.
    pub fn k_unit(&self, axis: usize) -> f64 {
        2.0 * std::f64::consts::PI / self.l[axis]
    }

    /// Grid coordinate of node (i0, i1, i2).
    pub fn node(&self, idx: [usize; 3]) -> [f64; 3] {
        [
            idx[0] as f64 * self.spacing(0),
            idx[1] as f64 * self.spacing(1),
            idx[2] as f64 * self.spacing(2),
        ]
    }
}
