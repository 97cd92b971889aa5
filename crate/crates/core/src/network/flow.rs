use nalgebra::{DMatrix, DVector};

use super::{BusKind, Complex64, LoadModel, NetworkModel};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 50;

/// Active power injected at every bus,
/// `P_i = Σ_j V_i V_j (G_ij cos θ_ij + B_ij sin θ_ij)`.
pub fn power_injections(theta: &[f64], v_mag: &[f64], y: &DMatrix<Complex64>) -> Vec<f64> {
    let n = theta.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let yij = y[(i, j)];
                    let d = theta[i] - theta[j];
                    v_mag[i] * v_mag[j] * (yij.re * d.cos() + yij.im * d.sin())
                })
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    /// Angles of every bus, network order, rad.
    pub theta: Vec<f64>,
    /// Voltage magnitudes of every bus, V.
    pub v_mag: Vec<f64>,
    /// Active power injected into the network at every bus, W.
    pub p_inj: Vec<f64>,
    pub losses: f64,
    /// Largest load-bus power mismatch left by the Newton solve, W.
    pub load_mismatch: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
struct Kron {
    /// Maps inverter voltage phasors to load-bus voltage phasors.
    recover: DMatrix<Complex64>,
}

/// Algebraic part of the network: given inverter angles, find the load-bus
/// state such that every load draws its scheduled power.
#[derive(Debug, Clone)]
pub struct LoadFlow {
    y: DMatrix<Complex64>,
    v: Vec<f64>,
    inv: Vec<usize>,
    load: Vec<usize>,
    lines: Vec<(usize, usize, Complex64)>,
    model: LoadModel,
    spec: Vec<f64>,
    warm: Vec<f64>,
    kron: Option<Kron>,
    pub tol: f64,
    pub max_iter: usize,
}

impl LoadFlow {
    /// `inverter_ids` fixes the order of the inverter angles passed to [`solve`](Self::solve).
    pub fn new(net: &NetworkModel, inverter_ids: &[usize]) -> Result<Self> {
        let y = net.admittance_matrix()?;
        let inv = inverter_ids
            .iter()
            .map(|&id| net.index_of(id).ok_or(Error::MissingNetwork))
            .collect::<Result<Vec<_>>>()?;
        let load: Vec<usize> = (0..net.buses.len())
            .filter(|i| net.buses[*i].kind == BusKind::Load && !inv.contains(i))
            .collect();
        let lines = net
            .lines
            .iter()
            .map(|l| {
                (
                    net.index_of(l.from).unwrap(),
                    net.index_of(l.to).unwrap(),
                    l.z,
                )
            })
            .collect();
        let mut flow = Self {
            y,
            v: net.v_mag(),
            spec: load.iter().map(|&i| net.buses[i].p_load).collect(),
            warm: vec![0.0; load.len()],
            inv,
            load,
            lines,
            model: net.load_model,
            kron: None,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        };
        flow.rebuild()?;
        Ok(flow)
    }

    pub fn load_buses(&self) -> &[usize] {
        &self.load
    }

    /// Scheduled injection of each load bus, in [`load_buses`](Self::load_buses) order.
    pub fn set_load_injections(&mut self, spec: &[f64]) -> Result<()> {
        self.spec.copy_from_slice(spec);
        self.rebuild()
    }

    fn rebuild(&mut self) -> Result<()> {
        if self.model != LoadModel::ConstantImpedance || self.load.is_empty() {
            self.kron = None;
            return Ok(());
        }
        let nl = self.load.len();
        let ni = self.inv.len();
        let mut yll = DMatrix::from_fn(nl, nl, |a, b| self.y[(self.load[a], self.load[b])]);
        for (a, &k) in self.load.iter().enumerate() {
            let g = -self.spec[a] / (self.v[k] * self.v[k]);
            yll[(a, a)] += Complex64::new(g, 0.0);
        }
        let yli = DMatrix::from_fn(nl, ni, |a, b| self.y[(self.load[a], self.inv[b])]);
        let recover = yll
            .lu()
            .solve(&yli)
            .ok_or(Error::NoConvergence {
                iterations: 0,
                mismatch: f64::INFINITY,
            })?
            .map(|c| -c);
        self.kron = Some(Kron { recover });
        Ok(())
    }

    fn full_theta(&self, theta_inv: &[f64], theta_load: &[f64]) -> Vec<f64> {
        let mut theta = vec![0.0; self.v.len()];
        for (k, &i) in self.inv.iter().enumerate() {
            theta[i] = theta_inv[k];
        }
        for (k, &i) in self.load.iter().enumerate() {
            theta[i] = theta_load[k];
        }
        theta
    }

    fn losses(&self, v_mag: &[f64], theta: &[f64]) -> f64 {
        self.lines
            .iter()
            .map(|&(a, b, z)| {
                let va = Complex64::from_polar(v_mag[a], theta[a]);
                let vb = Complex64::from_polar(v_mag[b], theta[b]);
                ((va - vb) / z).norm_sqr() * z.re
            })
            .sum()
    }

    pub fn solve(&mut self, theta_inv: &[f64]) -> Result<FlowSolution> {
        match &self.kron {
            Some(k) => Ok(self.solve_kron(theta_inv, &k.recover.clone())),
            None => self.solve_newton(theta_inv),
        }
    }

    fn solve_kron(&self, theta_inv: &[f64], recover: &DMatrix<Complex64>) -> FlowSolution {
        let vi = DVector::from_fn(self.inv.len(), |k, _| {
            Complex64::from_polar(self.v[self.inv[k]], theta_inv[k])
        });
        let vl = recover * vi;
        let mut v_mag = self.v.clone();
        let mut theta = vec![0.0; self.v.len()];
        for (k, &i) in self.inv.iter().enumerate() {
            theta[i] = theta_inv[k];
        }
        for (k, &i) in self.load.iter().enumerate() {
            v_mag[i] = vl[k].norm();
            theta[i] = vl[k].arg();
        }
        let p_inj = power_injections(&theta, &v_mag, &self.y);
        let losses = self.losses(&v_mag, &theta);
        FlowSolution {
            theta,
            v_mag,
            p_inj,
            losses,
            load_mismatch: 0.0,
            iterations: 0,
        }
    }

    fn jacobian(&self, theta: &[f64]) -> DMatrix<f64> {
        let nl = self.load.len();
        let n = self.v.len();
        let v = &self.v;
        let mut jac = DMatrix::zeros(nl, nl);
        for (a, &k) in self.load.iter().enumerate() {
            let mut diag = 0.0;
            for j in 0..n {
                if j == k {
                    continue;
                }
                let y = self.y[(k, j)];
                let d = theta[k] - theta[j];
                diag += v[k] * v[j] * (-y.re * d.sin() + y.im * d.cos());
            }
            jac[(a, a)] = diag;
            for (b, &m) in self.load.iter().enumerate() {
                if b != a {
                    let y = self.y[(k, m)];
                    let d = theta[k] - theta[m];
                    jac[(a, b)] = v[k] * v[m] * (y.re * d.sin() - y.im * d.cos());
                }
            }
        }
        jac
    }

    fn mismatch(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = power_injections(theta, &self.v, &self.y);
        let m = self
            .load
            .iter()
            .zip(&self.spec)
            .map(|(&k, s)| p[k] - s)
            .collect();
        (p, m)
    }

    fn solve_newton(&mut self, theta_inv: &[f64]) -> Result<FlowSolution> {
        let max_abs = |m: &[f64]| m.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        // The warm start is kept relative to the first inverter angle so a
        // uniform rotation of the inverters does not change the iterates.
        let reference = theta_inv.first().copied().unwrap_or(0.0);
        let mut x: Vec<f64> = self.warm.iter().map(|w| w + reference).collect();
        let mut iterations = 0;
        let mut polished = false;
        loop {
            let theta = self.full_theta(theta_inv, &x);
            let (p_inj, m) = self.mismatch(&theta);
            let worst = max_abs(&m);
            if !worst.is_finite() {
                return Err(Error::NoConvergence {
                    iterations,
                    mismatch: worst,
                });
            }
            // One extra Newton step past the tolerance drives the residual to
            // round-off; the secondary integrators amplify any leftover.
            let converged = worst < self.tol;
            if self.load.is_empty() || (converged && (polished || worst < 1e-9)) {
                self.warm = x.iter().map(|v| v - reference).collect();
                let losses = self.losses(&self.v, &theta);
                return Ok(FlowSolution {
                    theta,
                    v_mag: self.v.clone(),
                    p_inj,
                    losses,
                    load_mismatch: worst,
                    iterations,
                });
            }
            if iterations >= self.max_iter {
                return Err(Error::NoConvergence {
                    iterations,
                    mismatch: worst,
                });
            }
            polished = converged;
            let jac = self.jacobian(&theta);
            let rhs = DVector::from_iterator(m.len(), m.iter().map(|v| -v));
            let dx = jac.lu().solve(&rhs).ok_or(Error::NoConvergence {
                iterations,
                mismatch: worst,
            })?;
            for (xi, d) in x.iter_mut().zip(dx.iter()) {
                *xi += d;
            }
            iterations += 1;
        }
    }
}
