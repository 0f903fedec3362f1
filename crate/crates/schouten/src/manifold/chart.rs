use serde::Serialize;

use crate::error::{Error, Result};

/// What sits at each end of a warped radial interval: a smooth pole of the
/// warping profile or a totally geodesic boundary face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EndKind {
    Pole,
    Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Backend {
    /// All axes periodic.
    Torus,
    /// One non-periodic axis carrying the two totally geodesic boundary
    /// faces (Fermi normal coordinate); the remaining axes are periodic.
    Slab { boundary_axis: usize },
    /// One radial axis for metrics `dr² + φ(r)² g_{S^{n-1}}`.
    Warped { r_min: f64, r_max: f64, ends: [EndKind; 2] },
}

/// A structured cell-centered grid: node `i` of an axis with spacing `h`
/// sits at `(i + 1/2) h`. Ghost values outside a non-periodic axis are the
/// even reflection of the interior, which realizes both the Neumann
/// condition and pole regularity of radial scalar fields.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridChart {
    pub n: usize,
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
    pub backend: Backend,
}

impl GridChart {
    pub fn torus(n: usize, resolution: usize, extent: &[f64]) -> Result<Self> {
        Self::grid(n, resolution, extent, Backend::Torus)
    }

    pub fn slab(n: usize, resolution: usize, extent: &[f64], boundary_axis: usize) -> Result<Self> {
        if boundary_axis >= n {
            return Err(Error::Argument(format!(
                "boundary axis {boundary_axis} out of range for dimension {n}"
            )));
        }
        Self::grid(n, resolution, extent, Backend::Slab { boundary_axis })
    }

    fn grid(n: usize, resolution: usize, extent: &[f64], backend: Backend) -> Result<Self> {
        if n < 3 {
            return Err(Error::Argument(format!("dimension must be >= 3, got {n}")));
        }
        if resolution < 8 {
            return Err(Error::Argument(format!("resolution must be >= 8, got {resolution}")));
        }
        if extent.len() != n || extent.iter().any(|&e| e <= 0.0) {
            return Err(Error::Argument("extent must have n positive entries".into()));
        }
        let spacing = extent.iter().map(|e| e / resolution as f64).collect();
        Ok(Self { n, shape: vec![resolution; n], spacing, backend })
    }

    pub fn warped(
        n: usize,
        resolution: usize,
        r_min: f64,
        r_max: f64,
        ends: [EndKind; 2],
    ) -> Result<Self> {
        if n < 3 {
            return Err(Error::Argument(format!("dimension must be >= 3, got {n}")));
        }
        if resolution < 8 {
            return Err(Error::Argument(format!("resolution must be >= 8, got {resolution}")));
        }
        if !(r_max > r_min) || r_min < 0.0 {
            return Err(Error::Argument(format!("bad radial interval [{r_min}, {r_max}]")));
        }
        if ends[0] == EndKind::Pole && r_min != 0.0 {
            return Err(Error::Argument("a pole end requires r_min = 0".into()));
        }
        let h = (r_max - r_min) / resolution as f64;
        Ok(Self {
            n,
            shape: vec![resolution],
            spacing: vec![h],
            backend: Backend::Warped { r_min, r_max, ends },
        })
    }

    /// Number of grid axes (the manifold dimension for grid backends, 1 for
    /// the radial reduction).
    pub fn axes(&self) -> usize {
        self.shape.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_periodic_axis(&self, axis: usize) -> bool {
        match &self.backend {
            Backend::Torus => true,
            Backend::Slab { boundary_axis } => axis != *boundary_axis,
            Backend::Warped { .. } => false,
        }
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.shape[axis] as f64 * self.spacing[axis]
    }

    pub fn multi(&self, idx: usize) -> Vec<usize> {
        let mut rem = idx;
        let mut out = vec![0; self.axes()];
        for a in (0..self.axes()).rev() {
            out[a] = rem % self.shape[a];
            rem /= self.shape[a];
        }
        out
    }

    pub fn flat(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for a in 0..self.axes() {
            idx = idx * self.shape[a] + multi[a];
        }
        idx
    }

    /// Physical coordinates of a node (warped charts report the radius).
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let multi = self.multi(idx);
        let origin = match &self.backend {
            Backend::Warped { r_min, .. } => *r_min,
            _ => 0.0,
        };
        multi
            .iter()
            .zip(&self.spacing)
            .map(|(&i, &h)| origin + (i as f64 + 0.5) * h)
            .collect()
    }

    /// Axis coordinate after one step, with periodic wrap or even-mirror
    /// reflection; valid for compositions of unit steps.
    fn step_axis(&self, axis: usize, coord: isize) -> usize {
        let len = self.shape[axis] as isize;
        if self.is_periodic_axis(axis) {
            coord.rem_euclid(len) as usize
        } else if coord < 0 {
            (-coord - 1) as usize
        } else if coord >= len {
            (2 * len - 1 - coord) as usize
        } else {
            coord as usize
        }
    }

    /// Index of the node one step along an axis, resolving ghosts.
    pub fn neighbor(&self, idx: usize, axis: usize, step: isize) -> usize {
        let mut multi = self.multi(idx);
        multi[axis] = self.step_axis(axis, multi[axis] as isize + step);
        self.flat(&multi)
    }

    /// Node reached by an offset vector, resolving ghosts axis by axis.
    pub fn offset(&self, idx: usize, offsets: &[isize]) -> usize {
        let mut multi = self.multi(idx);
        for (a, &d) in offsets.iter().enumerate() {
            multi[a] = self.step_axis(a, multi[a] as isize + d);
        }
        self.flat(&multi)
    }

    /// Whether the full symmetric stencil of half-width `w` around a node
    /// stays inside the chart without touching ghosts.
    pub fn stencil_interior(&self, idx: usize, w: usize) -> bool {
        let multi = self.multi(idx);
        for a in 0..self.axes() {
            if self.is_periodic_axis(a) {
                continue;
            }
            if multi[a] < w || multi[a] + w >= self.shape[a] {
                return false;
            }
        }
        true
    }

    /// Distance between nodes in chart units. Torus axes use wrapped flat
    /// distance; the slab boundary axis uses the doubled picture, so balls
    /// near a face are full balls; warped charts use the radial separation
    /// along the axis through the center.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let xi = self.coords(i);
        let xj = self.coords(j);
        match &self.backend {
            Backend::Warped { .. } => (xi[0] - xj[0]).abs(),
            Backend::Torus => {
                let mut s = 0.0;
                for a in 0..self.axes() {
                    let l = self.extent(a);
                    let d = (xi[a] - xj[a]).abs();
                    let d = d.min(l - d);
                    s += d * d;
                }
                s.sqrt()
            }
            Backend::Slab { boundary_axis } => {
                let mut s = 0.0;
                for a in 0..self.axes() {
                    let l = self.extent(a);
                    let d = if a == *boundary_axis {
                        // Images of x_j on the doubled 2L-torus: x_j and -x_j.
                        let direct = (xi[a] - xj[a]).abs();
                        let lower = xi[a] + xj[a];
                        let upper = 2.0 * l - xi[a] - xj[a];
                        direct.min(lower).min(upper)
                    } else {
                        let d = (xi[a] - xj[a]).abs();
                        d.min(l - d)
                    };
                    s += d * d;
                }
                s.sqrt()
            }
        }
    }

    /// Largest radius for which metric balls are safe to enumerate on this
    /// chart without wrapping onto themselves.
    pub fn injectivity_safe_radius(&self) -> f64 {
        match &self.backend {
            Backend::Warped { r_min, r_max, .. } => r_max - r_min,
            _ => {
                (0..self.axes())
                    .map(|a| self.extent(a))
                    .fold(f64::INFINITY, f64::min)
                    / 2.0
            }
        }
    }

    /// All nodes within `radius` of `center`, paired with their distance.
    pub fn ball(&self, center: usize, radius: f64) -> Vec<(usize, f64)> {
        // Desk-scale charts: a plain scan keeps reflection and wrap handling
        // in one place.
        (0..self.num_nodes())
            .filter_map(|i| {
                let d = self.distance(center, i);
                (d <= radius).then_some((i, d))
            })
            .collect()
    }
}
