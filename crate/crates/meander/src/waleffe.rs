//! The reduced plane-Waleffe shear-flow model.
//!
//! A streamwise-invariant mean (streamwise velocity `u0` and vorticity
//! `omega1`, with streamfunction `phi1` derived from `omega1`) is coupled to
//! a single streamwise Fourier fluctuation (`v1p`, `w1p`, complex, at
//! wavenumber `alpha`) with `epsilon = 1/Re`. The fluctuating pressure
//! `p1p` is solved as a preliminary step. The mean equations evolve in the
//! slow time `epsilon t`, so their right-hand side carries a factor
//! `epsilon`; the fluctuation equations keep their fast-time form. Both
//! blocks share the transverse Laplacian as linear operator, shifted by
//! their own preconditioning steps `dt1` (mean, set equal to `Re` by
//! default) and `dt2` (fluctuation).
//!
//! Boundary conditions are carried by the expansion parities:
//! `d u0/dy = omega1 = phi1 = v1p = d w1p/dy = 0` at the walls, periodic
//! in `z`.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;

use crate::precond::{BlockPrecond, DtRule, KappaRule, PreconditionerSpec};
use crate::problem::{BlockDts, Problem};
use crate::spectral::{Direction, Field2D, Parity, Repr, SpectralGrid};
use crate::state::{BlockLayout, SolutionVector};

#[derive(Debug, Clone)]
pub struct WaleffeParams {
    pub re: f64,
    pub alpha: f64,
    pub n_y: usize,
    pub n_z: usize,
    pub l_y: f64,
    pub l_z: f64,
    /// Fluctuation-block preconditioning step `dt2`.
    pub dt2: f64,
}

impl Default for WaleffeParams {
    fn default() -> Self {
        WaleffeParams {
            re: 400.0,
            alpha: 0.5,
            n_y: 32,
            n_z: 32,
            l_y: 2.0,
            l_z: PI,
            dt2: 2.0,
        }
    }
}

/// The four state fields as grid arrays (physical space).
#[derive(Debug, Clone)]
pub struct WaleffeFields {
    pub u0: Field2D,
    pub omega1: Field2D,
    pub v1p: Field2D,
    pub w1p: Field2D,
}

struct LinBase {
    u0_phys: Array2<Complex64>,
    v_phys: Array2<Complex64>,
    w_phys: Array2<Complex64>,
    du0_dy: Array2<Complex64>,
    du0_dz: Array2<Complex64>,
    phi_y: Array2<Complex64>,
    phi_z: Array2<Complex64>,
    om_y: Array2<Complex64>,
    om_z: Array2<Complex64>,
}

pub struct WaleffeProblem {
    pub grid: Arc<SpectralGrid>,
    alpha: f64,
    re: f64,
    dt2: f64,
    layout: Arc<BlockLayout>,
    /// Spectral coefficients of the body force `(sqrt(2) pi^2/4) sin(pi y/2)`.
    forcing: Field2D,
    lin_base: Option<LinBase>,
}

impl WaleffeProblem {
    pub fn new(params: WaleffeParams) -> Self {
        assert!(params.re > 0.0, "Reynolds number must be positive");
        let grid = SpectralGrid::new(
            params.n_y,
            params.n_z,
            -params.l_y / 2.0,
            params.l_y,
            params.l_z,
        );
        let n = params.n_y * params.n_z;
        let layout = Arc::new(BlockLayout::new(&[
            ("u0", n),
            ("omega1", n),
            ("v1p", 2 * n),
            ("w1p", 2 * n),
        ]));
        // sin(pi y / 2) = -cos(pi (y + 1)/2): cosine mode 1 with amplitude -1
        let mut forcing = Field2D::zeros(&grid, Parity::Cos, Repr::Spectral);
        forcing.data[[1, 0]] = Complex64::new(-2.0_f64.sqrt() * PI * PI / 4.0, 0.0);
        WaleffeProblem {
            grid,
            alpha: params.alpha,
            re: params.re,
            dt2: params.dt2,
            layout,
            forcing,
            lin_base: None,
        }
    }

    pub fn epsilon(&self) -> f64 {
        1.0 / self.re
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Mean block stepped at `dt1 = Re`, fluctuation block at the fixed
    /// `dt2`; the metric weight `kappa = epsilon` for both.
    pub fn default_spec(&self) -> PreconditionerSpec {
        PreconditionerSpec {
            blocks: vec![
                BlockPrecond {
                    block: "u0".into(),
                    dt: DtRule::Parameter,
                    kappa: KappaRule::InverseParameter,
                },
                BlockPrecond {
                    block: "omega1".into(),
                    dt: DtRule::Parameter,
                    kappa: KappaRule::InverseParameter,
                },
                BlockPrecond {
                    block: "v1p".into(),
                    dt: DtRule::Fixed(self.dt2),
                    kappa: KappaRule::InverseParameter,
                },
                BlockPrecond {
                    block: "w1p".into(),
                    dt: DtRule::Fixed(self.dt2),
                    kappa: KappaRule::InverseParameter,
                },
            ],
        }
    }

    pub fn unpack(&self, state: &[f64]) -> WaleffeFields {
        let (ny, nz) = (self.grid.n_y, self.grid.n_z);
        let n = ny * nz;
        let real_field = |offset: usize, parity: Parity| {
            let data = Array2::from_shape_fn((ny, nz), |(j, i)| {
                Complex64::new(state[offset + j * nz + i], 0.0)
            });
            Field2D::from_physical(data, parity)
        };
        let complex_field = |offset: usize, parity: Parity| {
            let data = Array2::from_shape_fn((ny, nz), |(j, i)| {
                Complex64::new(state[offset + j * nz + i], state[offset + n + j * nz + i])
            });
            Field2D::from_physical(data, parity)
        };
        let r = |name: &str| self.layout.range(name).unwrap().start;
        WaleffeFields {
            u0: real_field(r("u0"), Parity::Cos),
            omega1: real_field(r("omega1"), Parity::Sin),
            v1p: complex_field(r("v1p"), Parity::Sin),
            w1p: complex_field(r("w1p"), Parity::Cos),
        }
    }

    pub fn pack(&self, fields: &WaleffeFields) -> Vec<f64> {
        let (ny, nz) = (self.grid.n_y, self.grid.n_z);
        let n = ny * nz;
        let mut out = vec![0.0; self.layout.len()];
        let r = |name: &str| self.layout.range(name).unwrap().start;
        for (name, f, complex) in [
            ("u0", &fields.u0, false),
            ("omega1", &fields.omega1, false),
            ("v1p", &fields.v1p, true),
            ("w1p", &fields.w1p, true),
        ] {
            let base = r(name);
            for j in 0..ny {
                for i in 0..nz {
                    out[base + j * nz + i] = f.data[[j, i]].re;
                    if complex {
                        out[base + n + j * nz + i] = f.data[[j, i]].im;
                    }
                }
            }
        }
        out
    }

    /// Laminar state `u0 = sqrt(2) sin(pi y/2)`, everything else zero.
    pub fn laminar_state(&self) -> SolutionVector {
        let mut v = SolutionVector::zeros(Arc::clone(&self.layout));
        let nz = self.grid.n_z;
        let ys = self.grid.y.clone();
        let block = v.block_mut("u0");
        for (j, &y) in ys.iter().enumerate() {
            let val = 2.0_f64.sqrt() * (PI * y / 2.0).sin();
            for i in 0..nz {
                block[j * nz + i] = val;
            }
        }
        v
    }

    /// `N_u = D^-1 int u0^2 dy dz`: trapezoid in `y`, rectangle rule in
    /// the periodic `z`.
    pub fn n_u(&self, state: &[f64]) -> f64 {
        let g = &self.grid;
        let nz = g.n_z;
        let u0 = &state[self.layout.range("u0").unwrap()];
        let hy = g.l_y / (g.n_y - 1) as f64;
        let hz = g.l_z / nz as f64;
        let mut acc = 0.0;
        for j in 0..g.n_y {
            let wy = if j == 0 || j == g.n_y - 1 { 0.5 } else { 1.0 };
            for i in 0..nz {
                let u = u0[j * nz + i];
                acc += wy * u * u;
            }
        }
        acc * hy * hz / (g.l_y * g.l_z)
    }

    /// Preliminary solves: `phi1 = laplacian^-1 omega1` (sine parity, no
    /// null mode) and
    /// `p1p = 2 i alpha (alpha^2 - laplacian)^-1 (v1p du0/dy + w1p du0/dz)`
    /// with the product formed in physical space and dealiased.
    pub fn preliminary(&self, fields: &WaleffeFields) -> (Field2D, Field2D) {
        let g = &self.grid;
        let om_s = g.forward(&fields.omega1).expect("omega transform");
        let mut phi_s = g.solve_helmholtz(&om_s, 0.0).expect("phi solve");
        phi_s.data.mapv_inplace(|v| -v);

        let u0_s = g.forward(&fields.u0).expect("u0 transform");
        let du0_dy = g
            .inverse(&g.derivative(&u0_s, Direction::Y, 1).unwrap())
            .unwrap();
        let du0_dz = g
            .inverse(&g.derivative(&u0_s, Direction::Z, 1).unwrap())
            .unwrap();
        let mut prod = Array2::zeros(fields.u0.data.raw_dim());
        for j in 0..g.n_y {
            for i in 0..g.n_z {
                prod[[j, i]] = fields.v1p.data[[j, i]] * du0_dy.data[[j, i]]
                    + fields.w1p.data[[j, i]] * du0_dz.data[[j, i]];
            }
        }
        let rhs = g
            .forward_dealiased(&Field2D::from_physical(prod, Parity::Cos))
            .unwrap();
        let mut p_s = g
            .solve_helmholtz(&rhs, self.alpha * self.alpha)
            .expect("pressure solve");
        let two_i_alpha = Complex64::new(0.0, 2.0 * self.alpha);
        p_s.data.mapv_inplace(|v| v * two_i_alpha);
        (phi_s, p_s)
    }

    /// Block nonlinear terms in spectral space:
    /// `N11 = -J(phi1, u0) + forcing`,
    /// `N12 = -J(phi1, omega1) - 2(dyy - dzz) Re(v1p conj(w1p))
    ///        - 2 dy dz (|w1p|^2 - |v1p|^2)`,
    /// `N2 = -i alpha u0 v1perp - grad p1p`.
    fn nonlinear_spectral(&self, fields: &WaleffeFields) -> (Field2D, Field2D, Field2D, Field2D) {
        let g = &self.grid;
        let (phi_s, p_s) = self.preliminary(fields);
        let u0_s = g.forward(&fields.u0).unwrap();
        let om_s = g.forward(&fields.omega1).unwrap();

        let inv_d = |f: &Field2D, dir, ord| g.inverse(&g.derivative(f, dir, ord).unwrap()).unwrap();
        let du0_dy = inv_d(&u0_s, Direction::Y, 1);
        let du0_dz = inv_d(&u0_s, Direction::Z, 1);
        let phi_y = inv_d(&phi_s, Direction::Y, 1);
        let phi_z = inv_d(&phi_s, Direction::Z, 1);
        let om_y = inv_d(&om_s, Direction::Y, 1);
        let om_z = inv_d(&om_s, Direction::Z, 1);

        let dim = fields.u0.data.raw_dim();

        // J(phi, f) = phi_y f_z - phi_z f_y
        let mut j_u0 = Array2::zeros(dim.clone());
        let mut j_om = Array2::zeros(dim.clone());
        let mut rvw = Array2::zeros(dim.clone());
        let mut aniso = Array2::zeros(dim.clone());
        let mut adv_v = Array2::zeros(dim.clone());
        let mut adv_w = Array2::zeros(dim);
        let i_alpha = Complex64::new(0.0, self.alpha);
        for j in 0..g.n_y {
            for i in 0..g.n_z {
                let idx = [j, i];
                j_u0[idx] = phi_y.data[idx] * du0_dz.data[idx] - phi_z.data[idx] * du0_dy.data[idx];
                j_om[idx] = phi_y.data[idx] * om_z.data[idx] - phi_z.data[idx] * om_y.data[idx];
                let v = fields.v1p.data[idx];
                let w = fields.w1p.data[idx];
                rvw[idx] = Complex64::new((v * w.conj()).re, 0.0);
                aniso[idx] = Complex64::new(w.norm_sqr() - v.norm_sqr(), 0.0);
                let u0 = fields.u0.data[idx];
                adv_v[idx] = -i_alpha * u0 * v;
                adv_w[idx] = -i_alpha * u0 * w;
            }
        }

        let fwd = |data: Array2<Complex64>, parity| {
            g.forward_dealiased(&Field2D::from_physical(data, parity))
                .unwrap()
        };
        let j_u0_s = fwd(j_u0, Parity::Cos);
        let j_om_s = fwd(j_om, Parity::Sin);
        let rvw_s = fwd(rvw, Parity::Sin);
        let aniso_s = fwd(aniso, Parity::Cos);
        let adv_v_s = fwd(adv_v, Parity::Sin);
        let adv_w_s = fwd(adv_w, Parity::Cos);

        let d2 = |f: &Field2D, dir| g.derivative(f, dir, 2).unwrap();
        let d1 = |f: &Field2D, dir| g.derivative(f, dir, 1).unwrap();

        let mut n11 = Field2D::zeros(g, Parity::Cos, Repr::Spectral);
        for (o, (a, f)) in n11
            .data
            .iter_mut()
            .zip(j_u0_s.data.iter().zip(self.forcing.data.iter()))
        {
            *o = -a + f;
        }

        let rvw_yy = d2(&rvw_s, Direction::Y);
        let rvw_zz = d2(&rvw_s, Direction::Z);
        let aniso_yz = d1(&d1(&aniso_s, Direction::Y), Direction::Z);
        let mut n12 = Field2D::zeros(g, Parity::Sin, Repr::Spectral);
        for j in 0..g.n_y {
            for i in 0..g.n_z {
                let idx = [j, i];
                n12.data[idx] = -j_om_s.data[idx]
                    - 2.0 * (rvw_yy.data[idx] - rvw_zz.data[idx])
                    - 2.0 * aniso_yz.data[idx];
            }
        }

        let p_y = d1(&p_s, Direction::Y);
        let p_z = d1(&p_s, Direction::Z);
        let mut n2v = Field2D::zeros(g, Parity::Sin, Repr::Spectral);
        let mut n2w = Field2D::zeros(g, Parity::Cos, Repr::Spectral);
        for j in 0..g.n_y {
            for i in 0..g.n_z {
                let idx = [j, i];
                n2v.data[idx] = adv_v_s.data[idx] - p_y.data[idx];
                n2w.data[idx] = adv_w_s.data[idx] - p_z.data[idx];
            }
        }
        (n11, n12, n2v, n2w)
    }

    /// Linearized counterparts of `nonlinear_spectral` about the cached
    /// base, applied to the perturbation fields (including the linearized
    /// preliminary solves for `phi1` and `p1p`).
    fn linearized_spectral(&self, dirs: &WaleffeFields) -> (Field2D, Field2D, Field2D, Field2D) {
        let g = &self.grid;
        let base = self
            .lin_base
            .as_ref()
            .expect("set_linearization_base before apply_linearized_n");

        let dom_s = g.forward(&dirs.omega1).unwrap();
        let mut dphi_s = g.solve_helmholtz(&dom_s, 0.0).unwrap();
        dphi_s.data.mapv_inplace(|v| -v);
        let du_s = g.forward(&dirs.u0).unwrap();

        let inv_d = |f: &Field2D, dir, ord| g.inverse(&g.derivative(f, dir, ord).unwrap()).unwrap();
        let ddu_dy = inv_d(&du_s, Direction::Y, 1);
        let ddu_dz = inv_d(&du_s, Direction::Z, 1);
        let dphi_y = inv_d(&dphi_s, Direction::Y, 1);
        let dphi_z = inv_d(&dphi_s, Direction::Z, 1);
        let dom_y = inv_d(&dom_s, Direction::Y, 1);
        let dom_z = inv_d(&dom_s, Direction::Z, 1);

        let dim = dirs.u0.data.raw_dim();
        let mut dp_rhs = Array2::zeros(dim.clone());
        let mut dj_u0 = Array2::zeros(dim.clone());
        let mut dj_om = Array2::zeros(dim.clone());
        let mut drvw = Array2::zeros(dim.clone());
        let mut daniso = Array2::zeros(dim.clone());
        let mut dadv_v = Array2::zeros(dim.clone());
        let mut dadv_w = Array2::zeros(dim);
        let i_alpha = Complex64::new(0.0, self.alpha);
        for j in 0..g.n_y {
            for i in 0..g.n_z {
                let idx = [j, i];
                let (v, w, u0) = (base.v_phys[idx], base.w_phys[idx], base.u0_phys[idx]);
                let (dv, dw, du0) = (dirs.v1p.data[idx], dirs.w1p.data[idx], dirs.u0.data[idx]);
                dp_rhs[idx] = dv * base.du0_dy[idx]
                    + v * ddu_dy.data[idx]
                    + dw * base.du0_dz[idx]
                    + w * ddu_dz.data[idx];
                dj_u0[idx] = dphi_y.data[idx] * base.du0_dz[idx]
                    + base.phi_y[idx] * ddu_dz.data[idx]
                    - dphi_z.data[idx] * base.du0_dy[idx]
                    - base.phi_z[idx] * ddu_dy.data[idx];
                dj_om[idx] = dphi_y.data[idx] * base.om_z[idx]
                    + base.phi_y[idx] * dom_z.data[idx]
                    - dphi_z.data[idx] * base.om_y[idx]
                    - base.phi_z[idx] * dom_y.data[idx];
                drvw[idx] = Complex64::new((dv * w.conj() + v * dw.conj()).re, 0.0);
                daniso[idx] =
                    Complex64::new(2.0 * ((dw * w.conj()).re - (dv * v.conj()).re), 0.0);
                dadv_v[idx] = -i_alpha * (du0 * v + u0 * dv);
                dadv_w[idx] = -i_alpha * (du0 * w + u0 * dw);
            }
        }

        let fwd = |data: Array2<Complex64>, parity| {
            g.forward_dealiased(&Field2D::from_physical(data, parity))
                .unwrap()
        };
        let dp_rhs_s = fwd(dp_rhs, Parity::Cos);
        let mut dp_s = g
            .solve_helmholtz(&dp_rhs_s, self.alpha * self.alpha)
            .unwrap();
        let two_i_alpha = Complex64::new(0.0, 2.0 * self.alpha);
        dp_s.data.mapv_inplace(|v| v * two_i_alpha);

        let dj_u0_s = fwd(dj_u0, Parity::Cos);
        let dj_om_s = fwd(dj_om, Parity::Sin);
        let drvw_s = fwd(drvw, Parity::Sin);
        let daniso_s = fwd(daniso, Parity::Cos);
        let dadv_v_s = fwd(dadv_v, Parity::Sin);
        let dadv_w_s = fwd(dadv_w, Parity::Cos);

        let d2 = |f: &Field2D, dir| g.derivative(f, dir, 2).unwrap();
        let d1 = |f: &Field2D, dir| g.derivative(f, dir, 1).unwrap();

        let mut dn11 = Field2D::zeros(g, Parity::Cos, Repr::Spectral);
        for (o, a) in dn11.data.iter_mut().zip(dj_u0_s.data.iter()) {
            *o = -a;
        }

        let rvw_yy = d2(&drvw_s, Direction::Y);
        let rvw_zz = d2(&drvw_s, Direction::Z);
        let aniso_yz = d1(&d1(&daniso_s, Direction::Y), Direction::Z);
        let mut dn12 = Field2D::zeros(g, Parity::Sin, Repr::Spectral);
        for j in 0..g.n_y {
            for i in 0..g.n_z {
                let idx = [j, i];
                dn12.data[idx] = -dj_om_s.data[idx]
                    - 2.0 * (rvw_yy.data[idx] - rvw_zz.data[idx])
                    - 2.0 * aniso_yz.data[idx];
            }
        }

        let p_y = d1(&dp_s, Direction::Y);
        let p_z = d1(&dp_s, Direction::Z);
        let mut dn2v = Field2D::zeros(g, Parity::Sin, Repr::Spectral);
        let mut dn2w = Field2D::zeros(g, Parity::Cos, Repr::Spectral);
        for j in 0..g.n_y {
            for i in 0..g.n_z {
                let idx = [j, i];
                dn2v.data[idx] = dadv_v_s.data[idx] - p_y.data[idx];
                dn2w.data[idx] = dadv_w_s.data[idx] - p_z.data[idx];
            }
        }
        (dn11, dn12, dn2v, dn2w)
    }

    fn pack_spectral_blocks(
        &self,
        n11: &Field2D,
        n12: &Field2D,
        n2v: &Field2D,
        n2w: &Field2D,
        mean_scale: f64,
    ) -> Vec<f64> {
        let g = &self.grid;
        let to_phys = |f: &Field2D| g.inverse(f).unwrap();
        let fields = WaleffeFields {
            u0: scale_field(&to_phys(n11), mean_scale),
            omega1: scale_field(&to_phys(n12), mean_scale),
            v1p: to_phys(n2v),
            w1p: to_phys(n2w),
        };
        self.pack(&fields)
    }

    /// One split implicit-Euler step written in the plain Euler form
    /// `(I - eps dt lap)^-1 [u + c dt N]`; the preconditioned-residual path
    /// computes the identical update through the subtract-the-initial-
    /// condition identity.
    pub fn step(&mut self, state: &[f64], dt1: f64, dt2: f64) -> Vec<f64> {
        let g = Arc::clone(&self.grid);
        let eps = self.epsilon();
        let fields = self.unpack(state);
        let (n11, n12, n2v, n2w) = self.nonlinear_spectral(&fields);
        let step_block = |f: &Field2D, n: &Field2D, dt: f64, c: f64| {
            let f_s = g.forward(f).unwrap();
            let mut out = f_s.clone();
            for j in 0..g.n_y {
                for i in 0..g.n_z {
                    let k2 = g.ky[j] * g.ky[j] + g.kz_mag[i] * g.kz_mag[i];
                    out.data[[j, i]] =
                        (f_s.data[[j, i]] + c * dt * n.data[[j, i]]) / (1.0 + eps * dt * k2);
                }
            }
            g.inverse(&out).unwrap()
        };
        let next = WaleffeFields {
            u0: step_block(&fields.u0, &n11, dt1, eps),
            omega1: step_block(&fields.omega1, &n12, dt1, eps),
            v1p: step_block(&fields.v1p, &n2v, dt2, 1.0),
            w1p: step_block(&fields.w1p, &n2w, dt2, 1.0),
        };
        self.pack(&next)
    }

    #[cfg(test)]
    fn mean_block_imag_junk(&self, state: &[f64]) -> f64 {
        let fields = self.unpack(state);
        let (n11, n12, _, _) = self.nonlinear_spectral(&fields);
        let g = &self.grid;
        [n11, n12]
            .iter()
            .flat_map(|f| g.inverse(f).unwrap().data.into_iter())
            .map(|v| v.im.abs())
            .fold(0.0, f64::max)
    }
}

fn scale_field(f: &Field2D, s: f64) -> Field2D {
    let mut out = f.clone();
    out.data.mapv_inplace(|v| v * s);
    out
}

impl Problem for WaleffeProblem {
    fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    fn name(&self) -> &str {
        "waleffe"
    }

    fn lambda(&self) -> f64 {
        self.re
    }

    fn set_lambda(&mut self, lambda: f64) {
        assert!(lambda > 0.0, "Reynolds number must be positive");
        self.re = lambda;
    }

    fn eval_n(&mut self, state: &[f64]) -> Vec<f64> {
        let fields = self.unpack(state);
        let (n11, n12, n2v, n2w) = self.nonlinear_spectral(&fields);
        self.pack_spectral_blocks(&n11, &n12, &n2v, &n2w, self.epsilon())
    }

    fn apply_l(&mut self, v: &[f64]) -> Vec<f64> {
        let g = Arc::clone(&self.grid);
        let eps = self.epsilon();
        let fields = self.unpack(v);
        let lap = |f: &Field2D| {
            let s = g.forward(f).unwrap();
            let mut l = g.laplacian(&s).unwrap();
            l.data.mapv_inplace(|x| x * eps);
            g.inverse(&l).unwrap()
        };
        let out = WaleffeFields {
            u0: lap(&fields.u0),
            omega1: lap(&fields.omega1),
            v1p: lap(&fields.v1p),
            w1p: lap(&fields.w1p),
        };
        self.pack(&out)
    }

    fn solve_shifted(&mut self, dts: &BlockDts, rhs: &[f64]) -> Vec<f64> {
        let g = Arc::clone(&self.grid);
        let eps = self.epsilon();
        let fields = self.unpack(rhs);
        let solve = |f: &Field2D, dt: f64| {
            let s = g.forward(f).unwrap();
            let mut out = s.clone();
            for j in 0..g.n_y {
                for i in 0..g.n_z {
                    let k2 = g.ky[j] * g.ky[j] + g.kz_mag[i] * g.kz_mag[i];
                    out.data[[j, i]] = s.data[[j, i]] / (1.0 + dt * eps * k2);
                }
            }
            g.inverse(&out).unwrap()
        };
        let out = WaleffeFields {
            u0: solve(&fields.u0, dts.0[0]),
            omega1: solve(&fields.omega1, dts.0[1]),
            v1p: solve(&fields.v1p, dts.0[2]),
            w1p: solve(&fields.w1p, dts.0[3]),
        };
        self.pack(&out)
    }

    fn set_linearization_base(&mut self, base: &[f64]) {
        let g = Arc::clone(&self.grid);
        let fields = self.unpack(base);
        let (phi_s, _) = self.preliminary(&fields);
        let u0_s = g.forward(&fields.u0).unwrap();
        let om_s = g.forward(&fields.omega1).unwrap();
        let inv_d =
            |f: &Field2D, dir| g.inverse(&g.derivative(f, dir, 1).unwrap()).unwrap().data;
        self.lin_base = Some(LinBase {
            u0_phys: fields.u0.data.clone(),
            v_phys: fields.v1p.data.clone(),
            w_phys: fields.w1p.data.clone(),
            du0_dy: inv_d(&u0_s, Direction::Y),
            du0_dz: inv_d(&u0_s, Direction::Z),
            phi_y: inv_d(&phi_s, Direction::Y),
            phi_z: inv_d(&phi_s, Direction::Z),
            om_y: inv_d(&om_s, Direction::Y),
            om_z: inv_d(&om_s, Direction::Z),
        });
    }

    fn apply_linearized_n(&mut self, dir: &[f64]) -> Vec<f64> {
        let dirs = self.unpack(dir);
        let (dn11, dn12, dn2v, dn2w) = self.linearized_spectral(&dirs);
        self.pack_spectral_blocks(&dn11, &dn12, &dn2v, &dn2w, self.epsilon())
    }

    /// Branch diagnostic: `N_u`.
    fn norm(&self, state: &[f64]) -> f64 {
        self.n_u(state)
    }
}

/// Smooth random state with the correct parities; used by the verification
/// checks.
pub fn random_smooth_state(problem: &WaleffeProblem, seed: u64, amplitude: f64) -> SolutionVector {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = Arc::clone(&problem.grid);
    let mut v = SolutionVector::zeros(Arc::clone(&problem.layout));
    let n = g.n_y * g.n_z;
    let two_pi_over_lz = 2.0 * PI / g.l_z;
    let mut add_modes = |block: &mut [f64], parity: Parity, complex: bool| {
        for ky in 0..=4usize {
            for kz in 0..=4usize {
                if parity == Parity::Sin && ky == 0 {
                    continue;
                }
                let a = amplitude * rng.gen_range(-1.0..1.0);
                let b = amplitude * rng.gen_range(-1.0..1.0);
                let phase: f64 = rng.gen_range(0.0..2.0 * PI);
                for (j, &y) in g.y.iter().enumerate() {
                    let theta = ky as f64 * PI * (y - g.y[0]) / g.l_y;
                    let fy = match parity {
                        Parity::Cos => theta.cos(),
                        Parity::Sin => theta.sin(),
                    };
                    for (i, &z) in g.z.iter().enumerate() {
                        let fz = (two_pi_over_lz * kz as f64 * z + phase).cos();
                        block[j * g.n_z + i] += a * fy * fz;
                        if complex {
                            let fz_im = (two_pi_over_lz * kz as f64 * z + phase).sin();
                            block[n + j * g.n_z + i] += b * fy * fz_im;
                        }
                    }
                }
            }
        }
    };
    add_modes(v.block_mut("u0"), Parity::Cos, false);
    add_modes(v.block_mut("omega1"), Parity::Sin, false);
    add_modes(v.block_mut("v1p"), Parity::Sin, true);
    add_modes(v.block_mut("w1p"), Parity::Cos, true);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precond::{convergence_metric, jacobian_action, residual_action};
    use crate::state::norm;

    fn problem() -> WaleffeProblem {
        WaleffeProblem::new(WaleffeParams::default())
    }

    fn add(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + s * y).collect()
    }

    #[test]
    fn laminar_is_an_exact_fixed_point_for_admissible_steps() {
        for dt2 in [0.5, 2.0, 10.0] {
            let mut p = WaleffeProblem::new(WaleffeParams {
                dt2,
                ..WaleffeParams::default()
            });
            let spec = p.default_spec();
            let laminar = p.laminar_state();
            let m = convergence_metric(&mut p, &spec, &laminar.data).unwrap();
            assert!(m < 1e-12, "dt2 = {dt2}: metric {m:.3e}");
        }
    }

    #[test]
    fn laminar_norm_is_one_and_re_independent() {
        let p = problem();
        let laminar = p.laminar_state();
        assert!((p.n_u(&laminar.data) - 1.0).abs() < 1e-13);
        let p2 = WaleffeProblem::new(WaleffeParams {
            re: 1700.0,
            ..WaleffeParams::default()
        });
        assert_eq!(p.laminar_state().data, p2.laminar_state().data);
    }

    #[test]
    fn n_u_of_simple_fields() {
        let p = problem();
        let zero = SolutionVector::zeros(Arc::clone(p.layout()));
        assert_eq!(p.n_u(&zero.data), 0.0);
        let mut two = SolutionVector::zeros(Arc::clone(p.layout()));
        two.block_mut("u0").fill(2.0);
        assert!((p.n_u(&two.data) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn preliminary_zero_fields_give_zero() {
        let p = problem();
        let zero = SolutionVector::zeros(Arc::clone(p.layout()));
        let fields = p.unpack(&zero.data);
        let (phi, pp) = p.preliminary(&fields);
        assert!(phi.data.iter().all(|v| v.norm() == 0.0));
        assert!(pp.data.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn preliminary_single_mode_poisson() {
        // omega a single sine mode: phi = omega / (-k^2)
        let p = problem();
        let g = Arc::clone(&p.grid);
        let mut state = SolutionVector::zeros(Arc::clone(p.layout()));
        let (ky, kz) = (2usize, 1usize);
        {
            let block = state.block_mut("omega1");
            for (j, &y) in g.y.iter().enumerate() {
                let fy = (ky as f64 * PI * (y + 1.0) / 2.0).sin();
                for (i, &z) in g.z.iter().enumerate() {
                    block[j * g.n_z + i] = fy * (2.0 * kz as f64 * z).cos();
                }
            }
        }
        let fields = p.unpack(&state.data);
        let (phi, _) = p.preliminary(&fields);
        let k2 = g.ky[ky].powi(2) + (2.0 * kz as f64).powi(2);
        let expect = -1.0 / k2;
        // cos(kz z) splits into the +-kz Fourier pair
        assert!((phi.data[[ky, kz]].re - expect / 2.0).abs() < 1e-12);
        assert!((phi.data[[ky, g.n_z - kz]].re - expect / 2.0).abs() < 1e-12);
    }

    #[test]
    fn fluctuating_pressure_matches_the_hand_solved_modes() {
        // u0 = sin(pi y/2), v1p = sin(pi (y+1)/2) e^{i 2 z}:
        // v1p du0/dy = (pi/2) sin^2(pi(y+1)/2) e^{i2z}
        //            = (pi/4) (1 - cos(pi (y+1))) e^{i2z},
        // so p1p = 2 i alpha [ (pi/4)/(a^2+kz^2)
        //          - (pi/4)/(a^2+pi^2+kz^2) cos(pi(y+1)) ] e^{i2z}
        let p = problem();
        let g = Arc::clone(&p.grid);
        let alpha = p.alpha();
        let mut state = SolutionVector::zeros(Arc::clone(p.layout()));
        {
            let block = state.block_mut("u0");
            for (j, &y) in g.y.iter().enumerate() {
                let val = (PI * y / 2.0).sin();
                for i in 0..g.n_z {
                    block[j * g.n_z + i] = val;
                }
            }
        }
        {
            let n = g.n_y * g.n_z;
            let block = state.block_mut("v1p");
            for (j, &y) in g.y.iter().enumerate() {
                let fy = (PI * (y + 1.0) / 2.0).sin();
                for (i, &z) in g.z.iter().enumerate() {
                    block[j * g.n_z + i] = fy * (2.0 * z).cos();
                    block[n + j * g.n_z + i] = fy * (2.0 * z).sin();
                }
            }
        }
        let fields = p.unpack(&state.data);
        let (_, pp) = p.preliminary(&fields);
        let kz2 = 4.0; // e^{i 2 z} has kappa_z = 2
        let c0 = PI / 4.0 / (alpha * alpha + kz2);
        let c2 = -PI / 4.0 / (alpha * alpha + PI * PI + kz2);
        let expect0 = Complex64::new(0.0, 2.0 * alpha) * c0;
        let expect2 = Complex64::new(0.0, 2.0 * alpha) * c2;
        // z mode index 1 carries e^{i 2 z} (l_z = pi)
        assert!((pp.data[[0, 1]] - expect0).norm() < 1e-12);
        assert!((pp.data[[2, 1]] - expect2).norm() < 1e-12);
        let total: f64 = pp.data.iter().map(|v| v.norm()).sum();
        assert!((total - expect0.norm() - expect2.norm()).abs() < 1e-10);
    }

    #[test]
    fn zero_state_grows_by_the_forcing_alone() {
        let mut p = problem();
        let eps = p.epsilon();
        let zero = SolutionVector::zeros(Arc::clone(p.layout()));
        let (dt1, dt2) = (3.0, 2.0);
        let next = p.step(&zero.data, dt1, dt2);
        let g = Arc::clone(&p.grid);
        let amp = 2.0_f64.sqrt() * PI * PI / 4.0;
        let k2 = (PI / 2.0).powi(2);
        let coeff = eps * dt1 * amp / (1.0 + eps * dt1 * k2);
        let u0 = &next[p.layout().range("u0").unwrap()];
        for (j, &y) in g.y.iter().enumerate() {
            let expect = coeff * (PI * y / 2.0).sin();
            for i in 0..g.n_z {
                assert!((u0[j * g.n_z + i] - expect).abs() < 1e-12);
            }
        }
        // every other block stays zero
        let rest = &next[p.layout().range("omega1").unwrap().start..];
        assert!(rest.iter().all(|&x| x.abs() < 1e-14));
    }

    #[test]
    fn fluctuations_decay_diffusively_without_mean_flow() {
        // u0 = 0 and p1p = 0: N2 vanishes, so a single v mode decays by
        // 1/(1 + eps dt2 k^2)
        let mut p = problem();
        let g = Arc::clone(&p.grid);
        let eps = p.epsilon();
        let mut state = SolutionVector::zeros(Arc::clone(p.layout()));
        let (ky, kz) = (1usize, 2usize);
        {
            let n = g.n_y * g.n_z;
            let block = state.block_mut("v1p");
            for (j, &y) in g.y.iter().enumerate() {
                let fy = (ky as f64 * PI * (y + 1.0) / 2.0).sin();
                for (i, &z) in g.z.iter().enumerate() {
                    block[j * g.n_z + i] = fy * (2.0 * kz as f64 * z).cos();
                    block[n + j * g.n_z + i] = fy * (2.0 * kz as f64 * z).sin();
                }
            }
        }
        let dt2 = 2.0;
        let next = p.step(&state.data, 1.0, dt2);
        let k2 = g.ky[ky].powi(2) + (2.0 * kz as f64).powi(2);
        let decay = 1.0 / (1.0 + eps * dt2 * k2);
        let r = p.layout().range("v1p").unwrap();
        for (a, b) in next[r.clone()].iter().zip(&state.data[r]) {
            assert!((a - b * decay).abs() < 1e-12);
        }
    }

    #[test]
    fn step_agrees_with_the_preconditioned_residual_route() {
        // Euler form (I - eps dt L)^-1 [u + c dt N] versus
        // u + c dt (I - eps dt L)^-1 [N + L u]: algebraically identical
        let mut p = problem();
        let spec = p.default_spec();
        let state = random_smooth_state(&p, 42, 0.5);
        let dt1 = p.lambda();
        let dt2 = 2.0;
        let stepped = p.step(&state.data, dt1, dt2);
        let resid = residual_action(&mut p, &spec, &state.data).unwrap();
        let scale = norm(&state.data).max(1.0);
        for ((s, u), r) in stepped.iter().zip(&state.data).zip(&resid) {
            assert!(((s - u) - r).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn linearized_action_matches_finite_differences() {
        let mut p = problem();
        let spec = p.default_spec();
        let base = random_smooth_state(&p, 7, 0.4);
        let dir = random_smooth_state(&p, 8, 1.0);
        let eps_fd = 1e-6;

        p.set_linearization_base(&base.data);
        let jv = jacobian_action(&mut p, &spec, &dir.data).unwrap();

        let plus = add(&base.data, eps_fd, &dir.data);
        let minus = add(&base.data, -eps_fd, &dir.data);
        let rp = residual_action(&mut p, &spec, &plus).unwrap();
        let rm = residual_action(&mut p, &spec, &minus).unwrap();
        let fd: Vec<f64> = rp
            .iter()
            .zip(&rm)
            .map(|(a, b)| (a - b) / (2.0 * eps_fd))
            .collect();
        let err = jv
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / norm(&jv).max(1e-300);
        assert!(err < 1e-7, "relative error {err:.3e}");
    }

    #[test]
    fn linearized_action_is_linear_in_the_direction() {
        let mut p = problem();
        let base = random_smooth_state(&p, 3, 0.4);
        let dir = random_smooth_state(&p, 4, 1.0);
        p.set_linearization_base(&base.data);
        let j1 = p.apply_linearized_n(&dir.data);
        let doubled: Vec<f64> = dir.data.iter().map(|x| 2.0 * x).collect();
        let j2 = p.apply_linearized_n(&doubled);
        for (a, b) in j1.iter().zip(&j2) {
            assert!((2.0 * a - b).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn parity_and_reality_survive_stepping() {
        let mut p = problem();
        let mut state = random_smooth_state(&p, 11, 0.3).data;
        for _ in 0..5 {
            state = p.step(&state, p.lambda(), 2.0);
        }
        let g = Arc::clone(&p.grid);
        let nz = g.n_z;
        // sine-parity fields vanish on the walls
        let om = &state[p.layout().range("omega1").unwrap()];
        for i in 0..nz {
            assert!(om[i].abs() < 1e-12);
            assert!(om[(g.n_y - 1) * nz + i].abs() < 1e-12);
        }
        let n = g.n_y * nz;
        let v = &state[p.layout().range("v1p").unwrap()];
        for i in 0..nz {
            for plane in [0, n] {
                assert!(v[plane + i].abs() < 1e-12);
                assert!(v[plane + (g.n_y - 1) * nz + i].abs() < 1e-12);
            }
        }
        // the complex pipeline leaves only round-off in the mean blocks
        // (machine epsilon amplified by the k^2 of the stress derivatives)
        let junk = p.mean_block_imag_junk(&state);
        assert!(junk < 1e-10, "imag junk {junk:.3e}");
    }

    #[test]
    fn reynolds_stress_terms_match_both_printed_forms() {
        // RHS form: -2 (dyy - dzz) R(v w*) - 2 dydz (|w|^2 - |v|^2)
        // Euler-scheme form: +2 (dzz - dyy) R(v w*) + 2 dydz (|v|^2 - |w|^2)
        let p = problem();
        let g = Arc::clone(&p.grid);
        let state = random_smooth_state(&p, 21, 0.8);
        let fields = p.unpack(&state.data);
        let dim = fields.u0.data.raw_dim();
        let mut rvw = Array2::zeros(dim.clone());
        let mut aniso_a = Array2::zeros(dim.clone());
        let mut aniso_b = Array2::zeros(dim);
        for j in 0..g.n_y {
            for i in 0..g.n_z {
                let v = fields.v1p.data[[j, i]];
                let w = fields.w1p.data[[j, i]];
                rvw[[j, i]] = Complex64::new((v * w.conj()).re, 0.0);
                aniso_a[[j, i]] = Complex64::new(w.norm_sqr() - v.norm_sqr(), 0.0);
                aniso_b[[j, i]] = Complex64::new(v.norm_sqr() - w.norm_sqr(), 0.0);
            }
        }
        let fwd = |d: Array2<Complex64>, par| {
            g.forward_dealiased(&Field2D::from_physical(d, par)).unwrap()
        };
        let rvw_s = fwd(rvw, Parity::Sin);
        let a_s = fwd(aniso_a, Parity::Cos);
        let b_s = fwd(aniso_b, Parity::Cos);
        let d2 = |f: &Field2D, dir| g.derivative(f, dir, 2).unwrap();
        let d1 = |f: &Field2D, dir| g.derivative(f, dir, 1).unwrap();
        let ryy = d2(&rvw_s, Direction::Y);
        let rzz = d2(&rvw_s, Direction::Z);
        let ayz = d1(&d1(&a_s, Direction::Y), Direction::Z);
        let byz = d1(&d1(&b_s, Direction::Y), Direction::Z);
        for j in 0..g.n_y {
            for i in 0..g.n_z {
                let idx = [j, i];
                let rhs_form = -2.0 * (ryy.data[idx] - rzz.data[idx]) - 2.0 * ayz.data[idx];
                let euler_form = 2.0 * (rzz.data[idx] - ryy.data[idx]) + 2.0 * byz.data[idx];
                assert!((rhs_form - euler_form).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn shifted_solve_inverts_the_shift() {
        let mut p = problem();
        let state = random_smooth_state(&p, 33, 0.7);
        let dts = BlockDts(vec![400.0, 400.0, 2.0, 2.0]);
        let lx = p.apply_l(&state.data);
        let mut rhs = vec![0.0; state.data.len()];
        for (b, &dt) in p.layout().blocks().iter().zip(&dts.0) {
            for idx in b.range() {
                rhs[idx] = state.data[idx] - dt * lx[idx];
            }
        }
        let back = p.solve_shifted(&dts, &rhs);
        let scale = norm(&state.data);
        for (a, b) in back.iter().zip(&state.data) {
            assert!((a - b).abs() < 1e-10 * scale.max(1.0));
        }
    }
}
