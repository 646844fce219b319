//! Brute-force reference: the same master equation in the full 2^N-dimensional
//! Hilbert space, built from single-site Pauli matrices with nalgebra and
//! stepped with classical fixed-step RK4.

#![allow(dead_code)]

use btc_sense::SimParams;
use nalgebra::DMatrix;
use num_complex::Complex64 as C;

type M = DMatrix<C>;

pub struct FullSpace {
    pub n: usize,
    pub sx: M,
    pub sy: M,
    pub sz: M,
    pub s_plus: M,
    pub s_minus: M,
}

fn site_operator(op: &M, site: usize, n: usize) -> M {
    let id = M::identity(2, 2);
    let mut out = M::identity(1, 1);
    for k in 0..n {
        out = out.kronecker(if k == site { op } else { &id });
    }
    out
}

impl FullSpace {
    pub fn new(n: usize) -> Self {
        let c = |re: f64, im: f64| C::new(re, im);
        // single site, |0> = up
        let sx1 = M::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.0, 0.0)]);
        let sy1 = M::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(0.0, 0.0)]);
        let sz1 = M::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)]);
        let sp1 = M::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let dim = 1 << n;
        let total = |op: &M| (0..n).fold(M::zeros(dim, dim), |acc, i| acc + site_operator(op, i, n));
        let s_plus = total(&sp1);
        Self {
            n,
            sx: total(&sx1),
            sy: total(&sy1),
            sz: total(&sz1),
            s_minus: s_plus.adjoint(),
            s_plus,
        }
    }

    fn dim(&self) -> usize {
        1 << self.n
    }

    fn liouvillian(&self, p: &SimParams, x: &M) -> M {
        let i = C::new(0.0, 1.0);
        let rate = if p.kappa == 0.0 { 0.0 } else { p.kappa / (self.n as f64 / 2.0) };
        let comm = &self.sx * x - x * &self.sx;
        let spsm = &self.s_plus * &self.s_minus;
        let diss = &self.s_minus * x * &self.s_plus - (&spsm * x + x * &spsm) * C::new(0.5, 0.0);
        comm * (-i * p.omega0) + diss * C::new(rate, 0.0)
    }

    fn field(&self, p: &SimParams, t: f64, x: &M) -> M {
        let s = if p.ac_enabled { (p.omega_ac * t + p.phi).sin() } else { 0.0 };
        (&self.sz * x - x * &self.sz) * C::new(0.0, -s)
    }

    fn rhs(&self, p: &SimParams, t: f64, rho: &M, drho: &M) -> (M, M) {
        let a_rho = self.field(p, t, rho);
        let d_rho = self.liouvillian(p, rho) + &a_rho * C::new(p.g, 0.0);
        let d_drho = self.liouvillian(p, drho) + a_rho + self.field(p, t, drho) * C::new(p.g, 0.0);
        (d_rho, d_drho)
    }

    pub fn all_up(&self) -> M {
        let mut rho = M::zeros(self.dim(), self.dim());
        rho[(0, 0)] = C::new(1.0, 0.0);
        rho
    }

    /// Observables at the output times of `p`, with `substeps` RK4 steps
    /// between consecutive outputs.
    pub fn run(&self, p: &SimParams, initial: M, substeps: usize) -> Vec<Record> {
        let times = p.output_times();
        let mut rho = initial;
        let mut drho = M::zeros(self.dim(), self.dim());
        let mut out = vec![self.observe(times[0], &rho, &drho)];
        for w in times.windows(2) {
            let h = (w[1] - w[0]) / substeps as f64;
            let mut t = w[0];
            for _ in 0..substeps {
                let (k1r, k1d) = self.rhs(p, t, &rho, &drho);
                let (k2r, k2d) = self.rhs(p, t + h / 2.0, &(&rho + &k1r * C::from(h / 2.0)), &(&drho + &k1d * C::from(h / 2.0)));
                let (k3r, k3d) = self.rhs(p, t + h / 2.0, &(&rho + &k2r * C::from(h / 2.0)), &(&drho + &k2d * C::from(h / 2.0)));
                let (k4r, k4d) = self.rhs(p, t + h, &(&rho + &k3r * C::from(h)), &(&drho + &k3d * C::from(h)));
                let sixth = C::from(h / 6.0);
                rho += (k1r + k2r * C::from(2.0) + k3r * C::from(2.0) + k4r) * sixth;
                drho += (k1d + k2d * C::from(2.0) + k3d * C::from(2.0) + k4d) * sixth;
                t += h;
            }
            out.push(self.observe(w[1], &rho, &drho));
        }
        out
    }

    fn observe(&self, t: f64, rho: &M, drho: &M) -> Record {
        let ev = |op: &M| (op * rho).trace().re;
        let sz = ev(&self.sz);
        let sz2 = ev(&(&self.sz * &self.sz));
        Record {
            t,
            sz,
            sy: ev(&self.sy),
            var_sz: sz2 - sz * sz,
            purity: (rho * rho).trace().re,
            qfi: spectral_qfi(rho, drho),
        }
    }
}

/// `2 sum |<i|drho|j>|^2 / (l_i + l_j)` over pairs with `l_i + l_j > 1e-12`.
pub fn spectral_qfi(rho: &M, drho: &M) -> f64 {
    let herm = (rho + rho.adjoint()) * C::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let u = &eig.eigenvectors;
    let d = u.adjoint() * drho * u;
    let lam: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let mut total = 0.0;
    for i in 0..lam.len() {
        for j in 0..lam.len() {
            let s = lam[i] + lam[j];
            if s > 1e-12 {
                total += 2.0 * d[(i, j)].norm_sqr() / s;
            }
        }
    }
    total
}

#[derive(Debug, Clone, Copy)]
pub struct Record {
    pub t: f64,
    pub sz: f64,
    pub sy: f64,
    pub var_sz: f64,
    pub purity: f64,
    pub qfi: f64,
}

/// Resonant parameters for the oracle comparison.
pub fn oracle_params(n: usize) -> SimParams {
    let mut p = SimParams::resonant(n, 4.0).unwrap();
    p.t_max = 5.0;
    p.n_out = 50;
    p.rtol = 1e-11;
    p.atol = 1e-13;
    p
}

/// Largest deviation between the Dicke-sector run and the oracle over all
/// compared observables, and the observable it occurs in.
pub fn oracle_deviation(n: usize) -> (f64, &'static str) {
    let p = oracle_params(n);
    let dicke = btc_sense::integrate(&p).unwrap();
    let full = FullSpace::new(n);
    let reference = full.run(&p, full.all_up(), 200);
    let mut worst = (0.0, "none");
    for (a, b) in dicke.records.iter().zip(&reference) {
        assert!((a.t - b.t).abs() < 1e-12);
        for (name, x, y) in [
            ("sz", a.sz, b.sz),
            ("sy", a.sy, b.sy),
            ("var_sz", a.var_sz, b.var_sz),
            ("purity", a.purity, b.purity),
            ("qfi", a.qfi, b.qfi),
        ] {
            let d = (x - y).abs();
            if d > worst.0 {
                worst = (d, name);
            }
        }
    }
    worst
}
