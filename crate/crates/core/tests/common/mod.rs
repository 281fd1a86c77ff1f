//! Independent reference implementations shared by the integration tests.
//! Everything here works on plain `[column][layer]` arrays and re-derives
//! the discrete formulas directly instead of calling into the library.

#![allow(dead_code)]

pub type Field = Vec<Vec<f64>>;

/// Fluid closures written out from their definitions. Saturations outside
/// `[0,1]` take the value at the nearest end point.
#[derive(Clone, Copy)]
pub struct Fluid {
    pub m: f64,
}

impl Fluid {
    pub fn mobility(&self, s: f64) -> f64 {
        let s = s.max(0.0).min(1.0);
        self.m * s * s + (1.0 - s) * (1.0 - s)
    }

    pub fn frac(&self, s: f64) -> f64 {
        let s = s.max(0.0).min(1.0);
        self.m * s * s / self.mobility(s)
    }

    /// Analytic derivative of the fractional flow.
    pub fn frac_prime(&self, s: f64) -> f64 {
        let lam = self.mobility(s);
        let dlam = 2.0 * self.m * s - 2.0 * (1.0 - s);
        (2.0 * self.m * s * lam - self.m * s * s * dlam) / (lam * lam)
    }

    pub fn diffusion(&self, s: f64, kappa: f64) -> f64 {
        let s = s.max(0.0).min(1.0);
        kappa * self.m * s * s * (1.0 - s) * (1.0 - s) / self.mobility(s)
    }

    /// Upper bound of `|f'|` on `[0,1]` from a fine scan.
    pub fn slope_max(&self) -> f64 {
        (0..=20_000)
            .map(|k| self.frac_prime(k as f64 / 20_000.0).abs())
            .fold(0.0, f64::max)
    }
}

pub struct Velocities {
    /// `u[i][j]`, `i` in `0..=nx`: vertical edge left of cell `i`.
    pub u: Field,
    /// `w[i][j]`, `j` in `0..=nz`: horizontal edge below cell `j`.
    pub w: Field,
}

/// Column-normalized velocity of the reduced model.
pub fn nonlocal_velocity(s: &Field, kappa: &Field, fluid: Fluid, dx: f64, dz: f64) -> Velocities {
    let nx = s.len();
    let nz = s[0].len();
    let mut cell = vec![vec![0.0; nz]; nx];
    for i in 0..nx {
        let mut column = 0.0;
        for j in 0..nz {
            column += dz * fluid.mobility(s[i][j]) * kappa[i][j];
        }
        for j in 0..nz {
            cell[i][j] = fluid.mobility(s[i][j]) * kappa[i][j] / column;
        }
    }
    let mut u = vec![vec![0.0; nz]; nx + 1];
    for j in 0..nz {
        u[0][j] = cell[0][j];
        u[nx][j] = cell[nx - 1][j];
        for i in 1..nx {
            u[i][j] = 0.5 * (cell[i - 1][j] + cell[i][j]);
        }
    }
    let mut w = vec![vec![0.0; nz + 1]; nx];
    for i in 0..nx {
        for j in 0..nz - 1 {
            w[i][j + 1] = w[i][j] - dz / dx * (u[i + 1][j] - u[i][j]);
        }
    }
    Velocities { u, w }
}

/// Advective divergence `sum over faces of |E| (v+ f(own) + v- f(other))`
/// evaluated face by face for every cell.
pub fn advective_divergence(
    s: &Field,
    vel: &Velocities,
    inflow: &[f64],
    fluid: Fluid,
    dx: f64,
    dz: f64,
) -> Field {
    let nx = s.len();
    let nz = s[0].len();
    let face = |v: f64, own: f64, other: f64, len: f64| {
        len * (v.max(0.0) * fluid.frac(own) + v.min(0.0) * fluid.frac(other))
    };
    let mut out = vec![vec![0.0; nz]; nx];
    for i in 0..nx {
        for j in 0..nz {
            let own = s[i][j];
            let west = if i == 0 { inflow[j] } else { s[i - 1][j] };
            let east = if i + 1 == nx { own } else { s[i + 1][j] };
            let south = if j == 0 { own } else { s[i][j - 1] };
            let north = if j + 1 == nz { own } else { s[i][j + 1] };
            out[i][j] = face(vel.u[i + 1][j], own, east, dz)
                + face(-vel.u[i][j], own, west, dz)
                + face(vel.w[i][j + 1], own, north, dx)
                + face(-vel.w[i][j], own, south, dx);
        }
    }
    out
}

/// Largest stable explicit step for the given velocities.
pub fn advective_limit(vel: &Velocities, fluid: Fluid, dx: f64, dz: f64, cfl: f64) -> f64 {
    let umax = vel.u.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let wmax = vel.w.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let l = fluid.slope_max();
    let mut lim = f64::INFINITY;
    if umax > 0.0 {
        lim = lim.min(dx / (umax * l));
    }
    if wmax > 0.0 {
        lim = lim.min(dz / (wmax * l));
    }
    cfl * lim
}

/// One explicit step of the reduced model.
pub fn ve_step_oracle(s: &Field, kappa: &Field, inflow: &[f64], fluid: Fluid, dt: f64) -> Field {
    let (nx, nz) = (s.len(), s[0].len());
    let (dx, dz) = (1.0 / nx as f64, 1.0 / nz as f64);
    let vel = nonlocal_velocity(s, kappa, fluid, dx, dz);
    let div = advective_divergence(s, &vel, inflow, fluid, dx, dz);
    let mut next = s.clone();
    for i in 0..nx {
        for j in 0..nz {
            next[i][j] -= dt / (dx * dz) * div[i][j];
        }
    }
    next
}

/// Dense `I - bx D_xx - bz D_zz` with mirror ends in `x` and wrap-around in `z`.
pub fn helmholtz_dense(nx: usize, nz: usize, bx: f64, bz: f64) -> Vec<Vec<f64>> {
    let n = nx * nz;
    let at = |i: usize, j: usize| j * nx + i;
    let mut a = vec![vec![0.0; n]; n];
    for j in 0..nz {
        for i in 0..nx {
            let k = at(i, j);
            a[k][k] += 1.0;
            let mut link = |other: usize, c: f64| {
                a[k][k] += c;
                a[k][other] -= c;
            };
            if i > 0 {
                link(at(i - 1, j), bx);
            }
            if i + 1 < nx {
                link(at(i + 1, j), bx);
            }
            if nz > 1 {
                link(at(i, (j + 1) % nz), bz);
                link(at(i, (j + nz - 1) % nz), bz);
            }
        }
    }
    a
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m = a.to_vec();
    let mut r = b.to_vec();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))
            .unwrap();
        m.swap(c, p);
        r.swap(c, p);
        for row in c + 1..n {
            let f = m[row][c] / m[c][c];
            for col in c..n {
                m[row][col] -= f * m[c][col];
            }
            r[row] -= f * r[c];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let acc: f64 = (row + 1..n).map(|c| m[row][c] * x[c]).sum();
        x[row] = (r[row] - acc) / m[row][row];
    }
    x
}

pub struct Regularization {
    pub beta_x: f64,
    pub beta_z: f64,
    pub eps_x: f64,
    pub eps_z: f64,
}

/// One step of the regularized reduced model with a dense implicit solve.
pub fn bve_step_oracle(
    s: &Field,
    kappa: &Field,
    inflow: &[f64],
    fluid: Fluid,
    reg: &Regularization,
    dt: f64,
) -> Field {
    let (nx, nz) = (s.len(), s[0].len());
    let (dx, dz) = (1.0 / nx as f64, 1.0 / nz as f64);
    let vel = nonlocal_velocity(s, kappa, fluid, dx, dz);
    let div = advective_divergence(s, &vel, inflow, fluid, dx, dz);
    let mut rhs = vec![0.0; nx * nz];
    for j in 0..nz {
        for i in 0..nx {
            let mut diff = 0.0;
            let mut edge = |a: (usize, usize), b: (usize, usize), eps: f64, h2: f64| {
                let sm = 0.5 * (s[a.0][a.1] + s[b.0][b.1]);
                let km = 0.5 * (kappa[a.0][a.1] + kappa[b.0][b.1]);
                diff += eps / h2 * fluid.diffusion(sm, km) * (s[b.0][b.1] - s[a.0][a.1]);
            };
            if i > 0 {
                edge((i, j), (i - 1, j), reg.eps_x, dx * dx);
            }
            if i + 1 < nx {
                edge((i, j), (i + 1, j), reg.eps_x, dx * dx);
            }
            if j > 0 {
                edge((i, j), (i, j - 1), reg.eps_z, dz * dz);
            }
            if j + 1 < nz {
                edge((i, j), (i, j + 1), reg.eps_z, dz * dz);
            }
            rhs[j * nx + i] = dt * (diff - div[i][j] / (dx * dz));
        }
    }
    let bx = if nx > 1 { reg.beta_x / (dx * dx) } else { 0.0 };
    let bz = if nz > 1 { reg.beta_z / (dz * dz) } else { 0.0 };
    let delta = dense_solve(&helmholtz_dense(nx, nz, bx, bz), &rhs);
    let mut next = s.clone();
    for j in 0..nz {
        for i in 0..nx {
            next[i][j] += delta[j * nx + i];
        }
    }
    next
}

/// Shock saturation and speed of the Buckley-Leverett problem from zero
/// initial saturation with unit inflow saturation and unit total velocity:
/// the tangent from the origin to the fractional-flow curve.
pub fn welge_tangent(fluid: Fluid) -> (f64, f64) {
    // g(s) = s f'(s) - f(s) changes sign exactly once on (0, 1].
    let g = |s: f64| s * fluid.frac_prime(s) - fluid.frac(s);
    let (mut lo, mut hi) = (1e-6, 1.0);
    assert!(g(lo) > 0.0 && g(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s_star = 0.5 * (lo + hi);
    (s_star, fluid.frac(s_star) / s_star)
}

/// `[column][layer]` view of a row-major (`x` fastest) vector.
pub fn to_columns(values: &[f64], nx: usize, nz: usize) -> Field {
    (0..nx)
        .map(|i| (0..nz).map(|j| values[j * nx + i]).collect())
        .collect()
}

pub fn max_abs_diff(a: &Field, b: &Field) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Small deterministic generator for fixtures.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_unit(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64) / ((1u64 << 53) as f64)
    }
}
