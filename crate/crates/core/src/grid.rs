//! Uniform Cartesian grid over the unit square, cell- and edge-centred
//! storage, and exact layer averaging of piecewise-constant profiles.
//!
//! Cells are indexed `(i, j)` with `i` along the horizontal (flow) direction
//! and `j` along the vertical, bottom layer first. Storage is row-major by
//! layer: `k = j * nx + i`.

use crate::error::{FlowError, Result};

/// Uniform grid with `nx` horizontal and `nz` vertical cells on `(0,1)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub nz: usize,
    pub dx: f64,
    pub dz: f64,
}

impl Grid {
    pub fn new(nx: usize, nz: usize) -> Result<Self> {
        if nx == 0 || nz == 0 {
            return Err(FlowError::InvalidGrid(format!(
                "cell counts must be positive, got {nx}x{nz}"
            )));
        }
        Ok(Grid {
            nx,
            nz,
            dx: 1.0 / nx as f64,
            dz: 1.0 / nz as f64,
        })
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.nx * self.nz
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn unflatten(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    /// Index of the vertical edge at `x = i*dx` in layer `j`, `0 <= i <= nx`.
    #[inline]
    pub fn x_edge(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// Index of the horizontal edge at `z = j*dz` in column `i`, `0 <= j <= nz`.
    #[inline]
    pub fn z_edge(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn z_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dz
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dz
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.nx != other.nx || self.nz != other.nz {
            return Err(FlowError::GridMismatch(format!(
                "{}x{} vs {}x{}",
                self.nx, self.nz, other.nx, other.nz
            )));
        }
        Ok(())
    }
}

/// One value per cell centre.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(grid: Grid, value: f64) -> Self {
        ScalarField {
            grid,
            values: vec![value; grid.cells()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(FlowError::Dimension(format!(
                "field has {} values, grid {}x{} needs {}",
                values.len(),
                grid.nx,
                grid.nz,
                grid.cells()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.cells());
        for j in 0..grid.nz {
            for i in 0..grid.nx {
                values.push(f(i, j));
            }
        }
        ScalarField { grid, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn layer(&self, j: usize) -> &[f64] {
        let nx = self.grid.nx;
        &self.values[j * nx..(j + 1) * nx]
    }

    /// Integral over the unit square, `dx*dz*sum(values)`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_area() * self.values.iter().sum::<f64>()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Vertical average of each column, one value per `i`.
    pub fn column_average(&self) -> Vec<f64> {
        let g = self.grid;
        let mut avg = vec![0.0; g.nx];
        for j in 0..g.nz {
            for (a, v) in avg.iter_mut().zip(self.layer(j)) {
                *a += v;
            }
        }
        avg.iter_mut().for_each(|a| *a *= g.dz);
        avg
    }
}

/// Normal velocities on cell edges.
///
/// `x_edges` holds `u` on the `(nx+1)*nz` vertical edges, `z_edges` holds `w`
/// on the `nx*(nz+1)` horizontal edges. Indexing follows [`Grid::x_edge`] and
/// [`Grid::z_edge`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField {
    pub grid: Grid,
    pub x_edges: Vec<f64>,
    pub z_edges: Vec<f64>,
}

impl EdgeField {
    pub fn zeros(grid: Grid) -> Self {
        EdgeField {
            grid,
            x_edges: vec![0.0; (grid.nx + 1) * grid.nz],
            z_edges: vec![0.0; grid.nx * (grid.nz + 1)],
        }
    }

    #[inline]
    pub fn u(&self, i: usize, j: usize) -> f64 {
        self.x_edges[self.grid.x_edge(i, j)]
    }

    #[inline]
    pub fn w(&self, i: usize, j: usize) -> f64 {
        self.z_edges[self.grid.z_edge(i, j)]
    }

    pub fn max_abs_u(&self) -> f64 {
        self.x_edges.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_w(&self) -> f64 {
        self.z_edges.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Net outward flux `sum_l |E_l| n_l . v_l` of every cell.
    pub fn net_outflow(&self) -> Vec<f64> {
        let g = self.grid;
        let mut div = vec![0.0; g.cells()];
        for j in 0..g.nz {
            for i in 0..g.nx {
                div[g.idx(i, j)] = g.dz * (self.u(i + 1, j) - self.u(i, j))
                    + g.dx * (self.w(i, j + 1) - self.w(i, j));
            }
        }
        div
    }

    /// Total flux through the inflow boundary `x = 0`.
    pub fn inflow_rate(&self) -> f64 {
        let g = self.grid;
        (0..g.nz).map(|j| g.dz * self.u(0, j)).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        self.x_edges.iter_mut().for_each(|v| *v *= factor);
        self.z_edges.iter_mut().for_each(|v| *v *= factor);
    }
}

/// Anything that can be integrated over a sub-interval of `[0,1]`.
pub trait Integrable1d {
    fn integral(&self, a: f64, b: f64) -> f64;
}

/// A constant value on the half-open interval `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

/// Piecewise-constant function on `[0,1]`; points not covered by a piece
/// take `default`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseProfile {
    pub pieces: Vec<Piece>,
    pub default: f64,
}

impl PiecewiseProfile {
    pub fn new(pieces: Vec<Piece>, default: f64) -> Result<Self> {
        for (n, p) in pieces.iter().enumerate() {
            if !(p.lo < p.hi) || p.lo < 0.0 || p.hi > 1.0 {
                return Err(FlowError::Validation {
                    field: "profile".into(),
                    message: format!("interval ({}, {}] is not a sub-interval of [0,1]", p.lo, p.hi),
                });
            }
            for q in &pieces[..n] {
                if p.lo.max(q.lo) < p.hi.min(q.hi) {
                    return Err(FlowError::Validation {
                        field: "profile".into(),
                        message: format!(
                            "intervals ({}, {}] and ({}, {}] overlap",
                            q.lo, q.hi, p.lo, p.hi
                        ),
                    });
                }
            }
        }
        Ok(PiecewiseProfile { pieces, default })
    }

    pub fn constant(value: f64) -> Self {
        PiecewiseProfile {
            pieces: Vec::new(),
            default: value,
        }
    }

    /// Value `value` on `(lo, hi]`, `outside` elsewhere.
    pub fn band(lo: f64, hi: f64, value: f64, outside: f64) -> Result<Self> {
        Self::new(vec![Piece { lo, hi, value }], outside)
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.pieces
            .iter()
            .find(|p| z > p.lo && z <= p.hi)
            .map_or(self.default, |p| p.value)
    }

    pub fn max_value(&self) -> f64 {
        let covered: f64 = self.pieces.iter().map(|p| p.hi - p.lo).sum();
        let mut m = self.pieces.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max);
        if covered < 1.0 {
            m = m.max(self.default);
        }
        m
    }
}

impl Integrable1d for PiecewiseProfile {
    fn integral(&self, a: f64, b: f64) -> f64 {
        let mut covered = 0.0;
        let mut total = 0.0;
        for p in &self.pieces {
            let len = (p.hi.min(b) - p.lo.max(a)).max(0.0);
            covered += len;
            total += len * p.value;
        }
        total + ((b - a) - covered).max(0.0) * self.default
    }
}

/// General profile integrated by the composite midpoint rule.
pub struct Sampled<F>(pub F);

/// Subsamples per layer used for [`Sampled`] profiles.
pub const MIDPOINT_SUBSAMPLES: usize = 64;

impl<F: Fn(f64) -> f64> Integrable1d for Sampled<F> {
    fn integral(&self, a: f64, b: f64) -> f64 {
        let h = (b - a) / MIDPOINT_SUBSAMPLES as f64;
        (0..MIDPOINT_SUBSAMPLES)
            .map(|m| (self.0)(a + (m as f64 + 0.5) * h))
            .sum::<f64>()
            * h
    }
}

/// Mean of `profile` over each of `nz` equal layers of `[0,1]`.
pub fn layer_average(profile: &impl Integrable1d, nz: usize) -> Vec<f64> {
    let dz = 1.0 / nz as f64;
    (0..nz)
        .map(|j| {
            let lo = j as f64 * dz;
            let hi = if j + 1 == nz { 1.0 } else { (j + 1) as f64 * dz };
            profile.integral(lo, hi) / (hi - lo)
        })
        .collect()
}

/// A constant value on the rectangle `(x0,x1] x (z0,z1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectPiece {
    pub x0: f64,
    pub x1: f64,
    pub z0: f64,
    pub z1: f64,
    pub value: f64,
}

/// Piecewise-constant function on the unit square, used for permeability.
#[derive(Debug, Clone, PartialEq)]
pub struct RectProfile {
    pub pieces: Vec<RectPiece>,
    pub default: f64,
}

impl RectProfile {
    pub fn new(pieces: Vec<RectPiece>, default: f64) -> Result<Self> {
        for (n, p) in pieces.iter().enumerate() {
            let inside = |lo: f64, hi: f64| lo < hi && lo >= 0.0 && hi <= 1.0;
            if !inside(p.x0, p.x1) || !inside(p.z0, p.z1) {
                return Err(FlowError::Validation {
                    field: "permeability".into(),
                    message: format!(
                        "rectangle ({}, {}] x ({}, {}] is not inside the unit square",
                        p.x0, p.x1, p.z0, p.z1
                    ),
                });
            }
            for q in &pieces[..n] {
                let ox = p.x1.min(q.x1) - p.x0.max(q.x0);
                let oz = p.z1.min(q.z1) - p.z0.max(q.z0);
                if ox > 0.0 && oz > 0.0 {
                    return Err(FlowError::Validation {
                        field: "permeability".into(),
                        message: "rectangles overlap".into(),
                    });
                }
            }
        }
        Ok(RectProfile { pieces, default })
    }

    pub fn constant(value: f64) -> Self {
        RectProfile {
            pieces: Vec::new(),
            default: value,
        }
    }

    /// Layered profile, constant in `x`.
    pub fn layered(profile: &PiecewiseProfile) -> Result<Self> {
        let pieces = profile
            .pieces
            .iter()
            .map(|p| RectPiece {
                x0: 0.0,
                x1: 1.0,
                z0: p.lo,
                z1: p.hi,
                value: p.value,
            })
            .collect();
        Self::new(pieces, profile.default)
    }

    fn integral(&self, x0: f64, x1: f64, z0: f64, z1: f64) -> f64 {
        let mut covered = 0.0;
        let mut total = 0.0;
        for p in &self.pieces {
            let ox = (p.x1.min(x1) - p.x0.max(x0)).max(0.0);
            let oz = (p.z1.min(z1) - p.z0.max(z0)).max(0.0);
            covered += ox * oz;
            total += ox * oz * p.value;
        }
        total + ((x1 - x0) * (z1 - z0) - covered).max(0.0) * self.default
    }

    /// Exact cell averages on `grid`.
    pub fn cell_averages(&self, grid: Grid) -> ScalarField {
        ScalarField::from_fn(grid, |i, j| {
            let (x0, x1) = (i as f64 * grid.dx, (i + 1) as f64 * grid.dx);
            let (z0, z1) = (j as f64 * grid.dz, (j + 1) as f64 * grid.dz);
            self.integral(x0, x1, z0, z1) / ((x1 - x0) * (z1 - z0))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn build_grid_spacings() {
        let g = Grid::new(1, 1).unwrap();
        assert_eq!((g.dx, g.dz), (1.0, 1.0));
        let g = Grid::new(200, 200).unwrap();
        assert_eq!((g.dx, g.dz), (0.005, 0.005));
        let g = Grid::new(100, 50).unwrap();
        assert_eq!((g.dx, g.dz), (0.01, 0.02));
        assert!((g.dx * g.nx as f64 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(matches!(Grid::new(0, 3), Err(FlowError::InvalidGrid(_))));
        assert!(matches!(Grid::new(3, 0), Err(FlowError::InvalidGrid(_))));
    }

    #[test]
    fn layered_permeability_averages() {
        let kappa = PiecewiseProfile::band(0.5, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(layer_average(&kappa, 1), vec![0.75]);
        let five = layer_average(&kappa, 5);
        for (got, want) in five.iter().zip([0.5, 0.5, 0.75, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-15, "{five:?}");
        }
    }

    #[test]
    fn partial_injection_average() {
        let inflow = PiecewiseProfile::band(0.0, 0.2, 1.0, 0.0).unwrap();
        let one = layer_average(&inflow, 1);
        assert!((one[0] - 0.2).abs() < 1e-15);
        let two = layer_average(&inflow, 2);
        assert!((two[0] - 0.4).abs() < 1e-15 && two[1] == 0.0);
        let five = layer_average(&inflow, 5);
        assert!((five[0] - 1.0).abs() < 1e-15);
        assert!(five[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sampled_profile_uses_midpoint_rule() {
        // exact for linear functions
        let avg = layer_average(&Sampled(|z: f64| 2.0 * z), 4);
        for (j, a) in avg.iter().enumerate() {
            assert!((a - (2.0 * (j as f64 + 0.5) / 4.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn overlapping_pieces_rejected() {
        let pieces = vec![
            Piece { lo: 0.0, hi: 0.5, value: 1.0 },
            Piece { lo: 0.4, hi: 0.6, value: 2.0 },
        ];
        assert!(PiecewiseProfile::new(pieces, 0.0).is_err());
    }

    #[test]
    fn rect_profile_cell_average() {
        let p = RectProfile::new(
            vec![RectPiece { x0: 0.0, x1: 0.5, z0: 0.0, z1: 0.5, value: 3.0 }],
            1.0,
        )
        .unwrap();
        let f = p.cell_averages(Grid::new(1, 1).unwrap());
        assert!((f.values[0] - 1.5).abs() < 1e-15);
        let f = p.cell_averages(Grid::new(4, 4).unwrap());
        assert_eq!(f.at(0, 0), 3.0);
        assert_eq!(f.at(3, 3), 1.0);
    }

    #[test]
    fn edge_field_net_outflow_of_uniform_flow() {
        let g = Grid::new(3, 2).unwrap();
        let mut e = EdgeField::zeros(g);
        e.x_edges.iter_mut().for_each(|u| *u = 1.0);
        assert!(e.net_outflow().iter().all(|d| d.abs() < 1e-15));
        assert!((e.inflow_rate() - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn flatten_round_trip(nx in 1usize..50, nz in 1usize..50, seed in 0usize..10_000) {
            let g = Grid::new(nx, nz).unwrap();
            let k = seed % g.cells();
            let (i, j) = g.unflatten(k);
            prop_assert_eq!(g.idx(i, j), k);
            prop_assert!(i < nx && j < nz);
        }

        #[test]
        fn layer_sums_recover_integral(
            cuts in proptest::collection::vec(1u32..20, 1..4),
            vals in proptest::collection::vec(0.0f64..2.0, 4),
            nz_factor in 1usize..5,
        ) {
            // breakpoints on multiples of 1/20, resolved by nz = 20 * factor
            let mut bps: Vec<f64> = cuts.iter().map(|&c| c as f64 / 20.0).collect();
            bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            bps.dedup();
            let mut edges = vec![0.0];
            edges.extend(bps);
            edges.push(1.0);
            let pieces: Vec<Piece> = edges
                .windows(2)
                .zip(vals.iter().cycle())
                .map(|(w, &v)| Piece { lo: w[0], hi: w[1], value: v })
                .collect();
            let exact: f64 = pieces.iter().map(|p| (p.hi - p.lo) * p.value).sum();
            let profile = PiecewiseProfile::new(pieces, 0.0).unwrap();
            let nz = 20 * nz_factor;
            let avg = layer_average(&profile, nz);
            let total: f64 = avg.iter().sum::<f64>() / nz as f64;
            prop_assert!((total - exact).abs() < 1e-13);
        }
    }
}
