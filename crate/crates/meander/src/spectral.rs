//! Discrete transforms and diagonal operators for the shear-model grid:
//! Fourier in the periodic `z` direction, cosine-I or sine-I series in the
//! wall-bounded `y` direction depending on each field's boundary condition,
//! spectral derivatives, Helmholtz/Poisson inversion and the 2/3 dealiasing
//! rule.
//!
//! Both `y` bases live on the same equidistributed grid including the
//! walls: cosine fields (Neumann, `d/dy = 0` at the walls) carry modes
//! `0..n_y-1`; sine fields (Dirichlet, zero at the walls) vanish at the
//! endpoints and carry modes `1..n_y-2`, stored in the matching rows of the
//! same-size coefficient array. At `n = 32` the transforms are plain
//! matrix products, exact to round-off.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// Even extension about the walls; Neumann boundary conditions.
    Cos,
    /// Odd extension about the walls; Dirichlet boundary conditions.
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Repr {
    Physical,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Y,
    Z,
}

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("expected {expected:?} representation, found {found:?}")]
    WrongRepr { expected: Repr, found: Repr },
    #[error("field shape {found:?} does not match the grid {expected:?}")]
    SizeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("derivatives above order 2 are not supported (requested {0})")]
    UnsupportedOrder(usize),
    #[error("Poisson compatibility violated: mean-mode amplitude {0:.3e}")]
    Compatibility(f64),
}

/// A scalar field on the grid, either as collocation values or as
/// coefficients of the parity-matched basis.
#[derive(Debug, Clone)]
pub struct Field2D {
    pub data: Array2<Complex64>,
    pub repr: Repr,
    pub parity: Parity,
}

impl Field2D {
    pub fn zeros(grid: &SpectralGrid, parity: Parity, repr: Repr) -> Self {
        Field2D {
            data: Array2::zeros((grid.n_y, grid.n_z)),
            repr,
            parity,
        }
    }

    pub fn from_physical(data: Array2<Complex64>, parity: Parity) -> Self {
        Field2D {
            data,
            repr: Repr::Physical,
            parity,
        }
    }

    fn expect(&self, repr: Repr) -> Result<(), SpectralError> {
        if self.repr != repr {
            return Err(SpectralError::WrongRepr {
                expected: repr,
                found: self.repr,
            });
        }
        Ok(())
    }
}

/// Grid geometry, wavenumber tables and cached transform plans.
pub struct SpectralGrid {
    pub n_y: usize,
    pub n_z: usize,
    pub l_y: f64,
    pub l_z: f64,
    /// Collocation points, walls included: `y_j = y_min + j l_y/(n_y-1)`.
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// `y` wavenumbers `k pi / l_y` for mode `k`.
    pub ky: Vec<f64>,
    /// Signed `z` wavenumbers in FFT index order, Nyquist zeroed (used for
    /// odd derivatives).
    pub kz_deriv: Vec<f64>,
    /// Unsigned `z` wavenumber magnitudes including Nyquist (used for even
    /// derivatives and Helmholtz denominators).
    pub kz_mag: Vec<f64>,
    cos_fwd: Array2<Complex64>,
    cos_inv: Array2<Complex64>,
    sin_fwd: Array2<Complex64>,
    sin_inv: Array2<Complex64>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n_y", &self.n_y)
            .field("n_z", &self.n_z)
            .field("l_y", &self.l_y)
            .field("l_z", &self.l_z)
            .finish()
    }
}

impl SpectralGrid {
    /// Grid on `[y_min, y_min + l_y] x [0, l_z)` with `n_y` wall-inclusive
    /// points in `y` and `n_z` periodic points in `z`.
    pub fn new(n_y: usize, n_z: usize, y_min: f64, l_y: f64, l_z: f64) -> Arc<Self> {
        assert!(n_y >= 4 && n_z >= 4, "grid too small");
        assert!(n_z % 2 == 0, "n_z must be even");
        let hy = l_y / (n_y - 1) as f64;
        let y: Vec<f64> = (0..n_y).map(|j| y_min + j as f64 * hy).collect();
        let z: Vec<f64> = (0..n_z).map(|j| j as f64 * l_z / n_z as f64).collect();
        let ky: Vec<f64> = (0..n_y)
            .map(|k| k as f64 * std::f64::consts::PI / l_y)
            .collect();
        let mut kz_deriv = vec![0.0; n_z];
        let mut kz_mag = vec![0.0; n_z];
        for i in 0..n_z {
            let k = if i <= n_z / 2 {
                i as f64
            } else {
                i as f64 - n_z as f64
            };
            kz_mag[i] = (2.0 * std::f64::consts::PI / l_z) * k.abs();
            kz_deriv[i] = if i == n_z / 2 {
                0.0
            } else {
                (2.0 * std::f64::consts::PI / l_z) * k
            };
        }

        let nm1 = (n_y - 1) as f64;
        let c = |j: usize, k: usize| {
            Complex64::new((std::f64::consts::PI * (j * k) as f64 / nm1).cos(), 0.0)
        };
        let s = |j: usize, k: usize| {
            Complex64::new((std::f64::consts::PI * (j * k) as f64 / nm1).sin(), 0.0)
        };
        // inverse matrices hold the basis functions; the forward ones are
        // the exact discrete inverses of the type-I transforms
        let mut cos_inv = Array2::zeros((n_y, n_y));
        let mut cos_fwd = Array2::zeros((n_y, n_y));
        let mut sin_inv = Array2::zeros((n_y, n_y));
        let mut sin_fwd = Array2::zeros((n_y, n_y));
        let w = |i: usize| if i == 0 || i == n_y - 1 { 0.5 } else { 1.0 };
        for j in 0..n_y {
            for k in 0..n_y {
                cos_inv[[j, k]] = c(j, k);
                cos_fwd[[k, j]] = c(j, k) * (2.0 / nm1) * w(j) * w(k);
            }
        }
        for j in 1..n_y - 1 {
            for k in 1..n_y - 1 {
                sin_inv[[j, k]] = s(j, k);
                sin_fwd[[k, j]] = s(j, k) * (2.0 / nm1);
            }
        }

        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(n_z);
        let fft_inv = planner.plan_fft_inverse(n_z);

        Arc::new(SpectralGrid {
            n_y,
            n_z,
            l_y,
            l_z,
            y,
            z,
            ky,
            kz_deriv,
            kz_mag,
            cos_fwd,
            cos_inv,
            sin_fwd,
            sin_inv,
            fft_fwd,
            fft_inv,
        })
    }

    fn check_shape(&self, field: &Field2D) -> Result<(), SpectralError> {
        let found = (field.data.nrows(), field.data.ncols());
        if found != (self.n_y, self.n_z) {
            return Err(SpectralError::SizeMismatch {
                expected: (self.n_y, self.n_z),
                found,
            });
        }
        Ok(())
    }

    /// Physical values -> spectral coefficients.
    pub fn forward(&self, field: &Field2D) -> Result<Field2D, SpectralError> {
        self.check_shape(field)?;
        field.expect(Repr::Physical)?;
        let mut data = field.data.clone();
        for mut row in data.rows_mut() {
            self.fft_fwd
                .process(row.as_slice_mut().expect("contiguous row"));
        }
        let scale = Complex64::new(1.0 / self.n_z as f64, 0.0);
        data.mapv_inplace(|v| v * scale);
        let m = match field.parity {
            Parity::Cos => &self.cos_fwd,
            Parity::Sin => &self.sin_fwd,
        };
        Ok(Field2D {
            data: m.dot(&data),
            repr: Repr::Spectral,
            parity: field.parity,
        })
    }

    /// Spectral coefficients -> physical values.
    pub fn inverse(&self, field: &Field2D) -> Result<Field2D, SpectralError> {
        self.check_shape(field)?;
        field.expect(Repr::Spectral)?;
        let m = match field.parity {
            Parity::Cos => &self.cos_inv,
            Parity::Sin => &self.sin_inv,
        };
        let mut data = m.dot(&field.data);
        for mut row in data.rows_mut() {
            self.fft_inv
                .process(row.as_slice_mut().expect("contiguous row"));
        }
        Ok(Field2D {
            data,
            repr: Repr::Physical,
            parity: field.parity,
        })
    }

    /// Spectral derivative. Odd `y` derivatives flip the parity; the top
    /// cosine mode has no sine image and is dropped (it lies in the
    /// dealiased range).
    pub fn derivative(
        &self,
        field: &Field2D,
        dir: Direction,
        order: usize,
    ) -> Result<Field2D, SpectralError> {
        self.check_shape(field)?;
        field.expect(Repr::Spectral)?;
        if order == 0 || order > 2 {
            return Err(SpectralError::UnsupportedOrder(order));
        }
        let mut out = Field2D {
            data: Array2::zeros((self.n_y, self.n_z)),
            repr: Repr::Spectral,
            parity: field.parity,
        };
        match (dir, order) {
            (Direction::Z, 1) => {
                for j in 0..self.n_y {
                    for i in 0..self.n_z {
                        out.data[[j, i]] =
                            field.data[[j, i]] * Complex64::new(0.0, self.kz_deriv[i]);
                    }
                }
            }
            (Direction::Z, 2) => {
                for j in 0..self.n_y {
                    for i in 0..self.n_z {
                        out.data[[j, i]] =
                            field.data[[j, i]] * (-self.kz_mag[i] * self.kz_mag[i]);
                    }
                }
            }
            (Direction::Y, 1) => match field.parity {
                // d/dy cos(k theta) = -k' sin(k theta)
                Parity::Cos => {
                    out.parity = Parity::Sin;
                    for k in 1..self.n_y - 1 {
                        for i in 0..self.n_z {
                            out.data[[k, i]] = field.data[[k, i]] * (-self.ky[k]);
                        }
                    }
                }
                // d/dy sin(k theta) = +k' cos(k theta)
                Parity::Sin => {
                    out.parity = Parity::Cos;
                    for k in 1..self.n_y - 1 {
                        for i in 0..self.n_z {
                            out.data[[k, i]] = field.data[[k, i]] * self.ky[k];
                        }
                    }
                }
            },
            (Direction::Y, 2) => {
                for k in 0..self.n_y {
                    for i in 0..self.n_z {
                        out.data[[k, i]] = field.data[[k, i]] * (-self.ky[k] * self.ky[k]);
                    }
                }
            }
            _ => unreachable!(),
        }
        Ok(out)
    }

    /// Transverse Laplacian `d^2/dy^2 + d^2/dz^2`, diagonal in spectral
    /// space.
    pub fn laplacian(&self, field: &Field2D) -> Result<Field2D, SpectralError> {
        self.check_shape(field)?;
        field.expect(Repr::Spectral)?;
        let mut out = field.clone();
        for k in 0..self.n_y {
            for i in 0..self.n_z {
                let k2 = self.ky[k] * self.ky[k] + self.kz_mag[i] * self.kz_mag[i];
                out.data[[k, i]] *= -k2;
            }
        }
        Ok(out)
    }

    /// Solve `(sigma - laplacian) x = rhs` diagonally. For `sigma = 0` the
    /// cosine mean mode is a null mode: the rhs must not carry it (beyond
    /// round-off) and the output mean is pinned to zero.
    pub fn solve_helmholtz(&self, rhs: &Field2D, sigma: f64) -> Result<Field2D, SpectralError> {
        self.check_shape(rhs)?;
        rhs.expect(Repr::Spectral)?;
        debug_assert!(sigma >= 0.0);
        let mut out = rhs.clone();
        if sigma == 0.0 && rhs.parity == Parity::Cos {
            let mean = rhs.data[[0, 0]];
            let scale: f64 = rhs.data.iter().map(|v| v.norm()).sum::<f64>().max(1.0);
            if mean.norm() > 1e-10 * scale {
                return Err(SpectralError::Compatibility(mean.norm()));
            }
            out.data[[0, 0]] = Complex64::new(0.0, 0.0);
        }
        for k in 0..self.n_y {
            for i in 0..self.n_z {
                let denom = sigma + self.ky[k] * self.ky[k] + self.kz_mag[i] * self.kz_mag[i];
                if denom != 0.0 {
                    out.data[[k, i]] /= denom;
                }
            }
        }
        Ok(out)
    }

    /// Highest retained mode index in `y` under the 2/3 rule (inclusive).
    pub fn dealias_max_ky(&self) -> usize {
        (2 * (self.n_y - 1)).div_ceil(3) - 1
    }

    /// Highest retained |mode| in `z` under the 2/3 rule (inclusive).
    pub fn dealias_max_kz(&self) -> usize {
        (2 * (self.n_z / 2)).div_ceil(3) - 1
    }

    /// Zero every mode at or above two thirds of the resolvable range in
    /// either direction. Idempotent.
    pub fn dealias(&self, field: &Field2D) -> Result<Field2D, SpectralError> {
        self.check_shape(field)?;
        field.expect(Repr::Spectral)?;
        let max_ky = self.dealias_max_ky();
        let max_kz = self.dealias_max_kz();
        let mut out = field.clone();
        for k in 0..self.n_y {
            for i in 0..self.n_z {
                let kz = if i <= self.n_z / 2 { i } else { self.n_z - i };
                if k > max_ky || kz > max_kz {
                    out.data[[k, i]] = Complex64::new(0.0, 0.0);
                }
            }
        }
        Ok(out)
    }

    /// Forward transform followed by dealiasing; the standard treatment of
    /// a pointwise product formed in physical space.
    pub fn forward_dealiased(&self, field: &Field2D) -> Result<Field2D, SpectralError> {
        let f = self.forward(field)?;
        self.dealias(&f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid() -> Arc<SpectralGrid> {
        SpectralGrid::new(32, 32, -1.0, 2.0, PI)
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn physical_from<F: Fn(f64, f64) -> Complex64>(
        g: &SpectralGrid,
        parity: Parity,
        f: F,
    ) -> Field2D {
        let mut data = Array2::zeros((g.n_y, g.n_z));
        for (j, &y) in g.y.iter().enumerate() {
            for (i, &z) in g.z.iter().enumerate() {
                data[[j, i]] = f(y, z);
            }
        }
        Field2D::from_physical(data, parity)
    }

    fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn constant_field_concentrates_in_mode_zero() {
        let g = grid();
        let f = physical_from(&g, Parity::Cos, |_, _| c(3.5));
        let spec = g.forward(&f).unwrap();
        assert!((spec.data[[0, 0]] - c(3.5)).norm() < 1e-12);
        let energy: f64 = spec
            .data
            .iter()
            .enumerate()
            .filter(|(idx, _)| *idx != 0)
            .map(|(_, v)| v.norm())
            .sum();
        assert!(energy < 1e-12);
    }

    #[test]
    fn sine_eigenfunction_is_a_single_coefficient() {
        // sin(pi (y+1)/2) is sine mode 1 on [-1, 1]
        let g = grid();
        let f = physical_from(&g, Parity::Sin, |y, _| c((PI * (y + 1.0) / 2.0).sin()));
        let spec = g.forward(&f).unwrap();
        assert!((spec.data[[1, 0]] - c(1.0)).norm() < 1e-12);
        let rest: f64 = spec
            .data
            .iter()
            .enumerate()
            .filter(|(idx, _)| *idx != g.n_z) // flat index of [1, 0]
            .map(|(_, v)| v.norm())
            .sum();
        assert!(rest < 1e-11);
    }

    #[test]
    fn round_trip_is_exact_on_random_fields() {
        let g = grid();
        for parity in [Parity::Cos, Parity::Sin] {
            let mut data = Array2::zeros((g.n_y, g.n_z));
            let mut seed = 1234u64;
            let mut rnd = || {
                seed = seed
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            };
            for j in 0..g.n_y {
                for i in 0..g.n_z {
                    data[[j, i]] = Complex64::new(rnd(), rnd());
                }
            }
            if parity == Parity::Sin {
                for i in 0..g.n_z {
                    data[[0, i]] = c(0.0);
                    data[[g.n_y - 1, i]] = c(0.0);
                }
            }
            let f = Field2D::from_physical(data.clone(), parity);
            let back = g.inverse(&g.forward(&f).unwrap()).unwrap();
            let scale = data.iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(
                max_abs_diff(&back.data, &data) < 1e-12 * scale.max(1.0),
                "{parity:?} round trip"
            );
        }
    }

    #[test]
    fn parseval_discrete_weighted_norm() {
        let g = grid();
        let f = physical_from(&g, Parity::Cos, |y, z| {
            c((PI * (y + 1.0)).cos() + 0.3 * (2.0 * z).cos() * (PI * (y + 1.0) / 2.0).cos())
        });
        let spec = g.forward(&f).unwrap();
        // physical side: endpoint-halved weights in y, plain sum over z
        let mut phys = 0.0;
        for j in 0..g.n_y {
            let w = if j == 0 || j == g.n_y - 1 { 0.5 } else { 1.0 };
            for i in 0..g.n_z {
                phys += w * f.data[[j, i]].norm_sqr();
            }
        }
        // spectral side from type-I cosine and Fourier orthogonality
        let nm1 = (g.n_y - 1) as f64;
        let mut specside = 0.0;
        for k in 0..g.n_y {
            let nu = if k == 0 || k == g.n_y - 1 {
                nm1
            } else {
                nm1 / 2.0
            };
            for i in 0..g.n_z {
                specside += nu * g.n_z as f64 * spec.data[[k, i]].norm_sqr();
            }
        }
        assert!((phys - specside).abs() < 1e-12 * phys.max(1.0));
    }

    #[test]
    fn z_derivative_multiplies_by_the_imaginary_wavenumber() {
        let g = grid();
        // e^{i 4 z} on l_z = pi is z mode 2, kappa_z = 4
        let f = physical_from(&g, Parity::Cos, |_, z| (Complex64::i() * 4.0 * z).exp());
        let spec = g.forward(&f).unwrap();
        let dz = g.derivative(&spec, Direction::Z, 1).unwrap();
        let expect = physical_from(&g, Parity::Cos, |_, z| {
            Complex64::i() * 4.0 * (Complex64::i() * 4.0 * z).exp()
        });
        let back = g.inverse(&dz).unwrap();
        assert!(max_abs_diff(&back.data, &expect.data) < 1e-10);
    }

    #[test]
    fn y_derivative_flips_parity_with_the_right_sign() {
        let g = grid();
        // d/dy cos(pi(y+1)/2) = -(pi/2) sin(pi(y+1)/2)
        let f = physical_from(&g, Parity::Cos, |y, _| c((PI * (y + 1.0) / 2.0).cos()));
        let spec = g.forward(&f).unwrap();
        let dy = g.derivative(&spec, Direction::Y, 1).unwrap();
        assert_eq!(dy.parity, Parity::Sin);
        let back = g.inverse(&dy).unwrap();
        let expect = physical_from(&g, Parity::Sin, |y, _| {
            c(-(PI / 2.0) * (PI * (y + 1.0) / 2.0).sin())
        });
        assert!(max_abs_diff(&back.data, &expect.data) < 1e-10);
    }

    #[test]
    fn laplacian_of_a_single_mode_is_minus_k_squared() {
        let g = grid();
        let f = physical_from(&g, Parity::Sin, |y, z| {
            c((PI * (y + 1.0)).sin() * (2.0 * z).cos())
        });
        let spec = g.forward(&f).unwrap();
        let lap = g.laplacian(&spec).unwrap();
        let k2 = PI.powi(2) + 4.0; // ky = 2 pi/2 = pi, kz = 2
        let expect = spec.data.mapv(|v| v * (-k2));
        assert!(max_abs_diff(&lap.data, &expect) < 1e-10);
    }

    #[test]
    fn helmholtz_single_mode_division() {
        let g = grid();
        let mut rhs = Field2D::zeros(&g, Parity::Cos, Repr::Spectral);
        rhs.data[[2, 1]] = c(1.0);
        let sigma = 0.25;
        let x = g.solve_helmholtz(&rhs, sigma).unwrap();
        let k2 = g.ky[2] * g.ky[2] + g.kz_mag[1] * g.kz_mag[1];
        assert!((x.data[[2, 1]] - c(1.0 / (sigma + k2))).norm() < 1e-14);
    }

    #[test]
    fn poisson_inverts_the_laplacian_on_zero_mean_fields() {
        let g = grid();
        let f = physical_from(&g, Parity::Cos, |y, z| {
            c((PI * (y + 1.0) / 2.0).cos() * (2.0 * z).sin() + 0.2 * (PI * (y + 1.0)).cos())
        });
        let spec = g.forward(&f).unwrap();
        let rhs = g.laplacian(&spec).unwrap();
        let minus_rhs = Field2D {
            data: rhs.data.mapv(|v| -v),
            ..rhs
        };
        let x = g.solve_helmholtz(&minus_rhs, 0.0).unwrap();
        // (0 - lap)^-1 (-lap f) = f
        assert!(max_abs_diff(&x.data, &spec.data) < 1e-11);
    }

    #[test]
    fn poisson_rejects_incompatible_rhs() {
        let g = grid();
        let mut rhs = Field2D::zeros(&g, Parity::Cos, Repr::Spectral);
        rhs.data[[0, 0]] = c(1.0);
        assert!(matches!(
            g.solve_helmholtz(&rhs, 0.0),
            Err(SpectralError::Compatibility(_))
        ));
    }

    #[test]
    fn helmholtz_zero_rhs_gives_zero() {
        let g = grid();
        let rhs = Field2D::zeros(&g, Parity::Sin, Repr::Spectral);
        let x = g.solve_helmholtz(&rhs, 1.0).unwrap();
        assert!(x.data.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn dealias_keeps_low_modes_and_kills_the_top() {
        let g = grid();
        assert_eq!(g.dealias_max_ky(), 20);
        assert_eq!(g.dealias_max_kz(), 10);
        let mut f = Field2D::zeros(&g, Parity::Cos, Repr::Spectral);
        f.data[[3, 2]] = c(1.0);
        f.data[[31, 0]] = c(1.0); // top y mode
        f.data[[0, 16]] = c(1.0); // z Nyquist
        let d = g.dealias(&f).unwrap();
        assert_eq!(d.data[[3, 2]], c(1.0));
        assert_eq!(d.data[[31, 0]], c(0.0));
        assert_eq!(d.data[[0, 16]], c(0.0));
    }

    proptest! {
        #[test]
        fn dealias_is_idempotent(seed in 0u64..1000) {
            let g = grid();
            let mut state = seed.wrapping_add(7);
            let mut rnd = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            };
            let mut f = Field2D::zeros(&g, Parity::Cos, Repr::Spectral);
            for j in 0..g.n_y {
                for i in 0..g.n_z {
                    f.data[[j, i]] = Complex64::new(rnd(), rnd());
                }
            }
            let once = g.dealias(&f).unwrap();
            let twice = g.dealias(&once).unwrap();
            prop_assert!(max_abs_diff(&once.data, &twice.data) == 0.0);
        }
    }

    #[test]
    fn wrong_representation_is_rejected() {
        let g = grid();
        let f = Field2D::zeros(&g, Parity::Cos, Repr::Physical);
        assert!(matches!(
            g.derivative(&f, Direction::Z, 1),
            Err(SpectralError::WrongRepr { .. })
        ));
        assert!(matches!(
            g.derivative(&g.forward(&f).unwrap(), Direction::Y, 3),
            Err(SpectralError::UnsupportedOrder(3))
        ));
    }
}
