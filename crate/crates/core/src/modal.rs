//! Closed-form eigenstructure and steady states of the secondary-control
//! models.
//!
//! The adhoc system matrix `A = −k_s 1ᵀ / 1ᵀk_p` is rank one. Scaling the
//! state by `1/√k_s` makes it symmetric (`Ã = −k̃_s k̃_sᵀ / 1ᵀk_p`), which
//! splits `P̃_s = α k̃_s + P̂_s` into a component along `k̃_s` and one
//! orthogonal to it. The clock offsets split as `γ = γ̄ 1 + γ̂` with
//! `k_sᵀγ̂ = 0`; that basis is oblique, so `γ̄` can be nonzero even when the
//! offsets sum to zero.
//!
//! With uniform damping `k̄_t` the two parts decouple:
//!
//! ```text
//! dα/dt  = −(k̄_t + 1ᵀk_s/1ᵀk_p) α − 1ᵀP_0/1ᵀk_p + γ̄
//! dP̂_s/dt = −k̄_t P̂_s + diag(k̃_s) γ̂
//! ```
//!
//! The structured formulas here are exact and O(N); a dense eigensolver is
//! only used by the tests as an oracle.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::InverterParams;

/// Default threshold for `ρ = k̄_t 1ᵀk_p / 1ᵀk_s ≪ 1`.
pub const DEFAULT_TUNING_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Adhoc,
    Damped,
    AdhocTransformed,
}

fn sum(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().sum()
}

fn k_p_sum(fleet: &[InverterParams]) -> Result<f64> {
    let s = sum(fleet.iter().map(|i| i.k_p));
    if s > 0.0 {
        Ok(s)
    } else {
        Err(Error::ZeroDroopSum)
    }
}

pub fn system_matrix(fleet: &[InverterParams], kind: SystemKind) -> Result<DMatrix<f64>> {
    let n = fleet.len();
    let kp = k_p_sum(fleet)?;
    let m = match kind {
        SystemKind::Adhoc => DMatrix::from_fn(n, n, |i, _| -fleet[i].k_s / kp),
        SystemKind::Damped => DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { fleet[i].k_t } else { 0.0 };
            -(d + fleet[i].k_s / kp)
        }),
        SystemKind::AdhocTransformed => {
            let kt: Vec<f64> = fleet.iter().map(|i| i.k_s.sqrt()).collect();
            DMatrix::from_fn(n, n, |i, j| -(kt[i] * kt[j]) / kp)
        }
    };
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenStructure {
    /// The eigenvalue carried by the `k_s` direction (1/s).
    pub nonzero_eigenvalue: f64,
    pub nonzero_eigenvector: Vec<f64>,
    pub zero_multiplicity: usize,
    /// Distinct eigenvalues with their multiplicities, ascending.
    pub eigenvalue_set: Vec<(f64, usize)>,
}

impl EigenStructure {
    /// All eigenvalues with repetition, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .eigenvalue_set
            .iter()
            .flat_map(|&(l, m)| std::iter::repeat_n(l, m))
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

fn eigen_set(pairs: &[(f64, usize)]) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &(l, m) in pairs {
        if m == 0 {
            continue;
        }
        match out.iter_mut().find(|(x, _)| *x == l) {
            Some(e) => e.1 += m,
            None => out.push((l, m)),
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Eigenstructure of the adhoc matrix: `−1ᵀk_s/1ᵀk_p` along `k_s`, zero
/// with multiplicity `N − 1` elsewhere.
pub fn adhoc_eigenstructure(fleet: &[InverterParams]) -> Result<EigenStructure> {
    let kp = k_p_sum(fleet)?;
    let n = fleet.len();
    let ks = sum(fleet.iter().map(|i| i.k_s));
    if ks == 0.0 {
        return Err(Error::ZeroSecondaryGains {
            zero_multiplicity: n,
        });
    }
    let lambda = -ks / kp;
    Ok(EigenStructure {
        nonzero_eigenvalue: lambda,
        nonzero_eigenvector: fleet.iter().map(|i| i.k_s).collect(),
        zero_multiplicity: n - 1,
        eigenvalue_set: eigen_set(&[(lambda, 1), (0.0, n - 1)]),
    })
}

/// Common damping gain, or `NonUniformDamping`.
pub fn uniform_damping(fleet: &[InverterParams]) -> Result<f64> {
    let (min, max) = fleet
        .iter()
        .map(|i| i.k_t)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), k| {
            (a.min(k), b.max(k))
        });
    if fleet.is_empty() {
        return Err(Error::DimensionMismatch {
            what: "fleet",
            expected: 1,
            found: 0,
        });
    }
    if max - min > 1e-12 * max.abs() {
        return Err(Error::NonUniformDamping { min, max });
    }
    Ok(fleet[0].k_t)
}

/// Eigenvalues of the damped matrix under uniform damping:
/// `−k̄_t` (×N−1) and `−(k̄_t + 1ᵀk_s/1ᵀk_p)` (×1).
pub fn damped_eigenvalues_uniform(fleet: &[InverterParams]) -> Result<EigenStructure> {
    let kt = uniform_damping(fleet)?;
    if kt == 0.0 {
        return adhoc_eigenstructure(fleet);
    }
    let kp = k_p_sum(fleet)?;
    let n = fleet.len();
    let ks = sum(fleet.iter().map(|i| i.k_s));
    let lambda = -(kt + ks / kp);
    Ok(EigenStructure {
        nonzero_eigenvalue: lambda,
        nonzero_eigenvector: fleet.iter().map(|i| i.k_s).collect(),
        zero_multiplicity: 0,
        eigenvalue_set: eigen_set(&[(lambda, 1), (-kt, n - 1)]),
    })
}

fn check_gains(k_s: &[f64]) -> Result<()> {
    match k_s.iter().position(|&k| !(k > 0.0)) {
        Some(index) => Err(Error::ZeroGainComponent { index }),
        None => Ok(()),
    }
}

fn check_dims(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}

/// `P̃_s,i = P_s,i / √k_s,i`.
pub fn transform(p_s: &[f64], k_s: &[f64]) -> Result<Vec<f64>> {
    check_dims("P_s", k_s.len(), p_s.len())?;
    check_gains(k_s)?;
    Ok(p_s.iter().zip(k_s).map(|(p, k)| p / k.sqrt()).collect())
}

/// `P_s,i = √k_s,i · P̃_s,i`.
pub fn untransform(p_tilde: &[f64], k_s: &[f64]) -> Result<Vec<f64>> {
    check_dims("P_tilde", k_s.len(), p_tilde.len())?;
    check_gains(k_s)?;
    Ok(p_tilde.iter().zip(k_s).map(|(p, k)| p * k.sqrt()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalDecomposition {
    /// Coordinate along `k̃_s` (transformed space, no physical unit).
    pub alpha: f64,
    /// Component of `P̃_s` orthogonal to `k̃_s`.
    pub p_hat_s: Vec<f64>,
    /// `k_s`-weighted mean clock offset, rad/s.
    pub gamma_bar: f64,
    /// Offset remainder with `k_sᵀγ̂ = 0`, rad/s.
    pub gamma_hat: Vec<f64>,
}

/// Splits a transformed state and the clock offsets into their modal parts.
pub fn decompose(p_tilde: &[f64], gamma: &[f64], k_s: &[f64]) -> Result<ModalDecomposition> {
    check_dims("P_tilde", k_s.len(), p_tilde.len())?;
    check_dims("gamma", k_s.len(), gamma.len())?;
    check_gains(k_s)?;
    let kt: Vec<f64> = k_s.iter().map(|k| k.sqrt()).collect();
    let kt_sq = dot(&kt, &kt);
    let mut alpha = 0.0;
    let mut p_hat_s = p_tilde.to_vec();
    let ks_sum = sum(k_s.iter().copied());
    let mut gamma_bar = 0.0;
    let mut gamma_hat = gamma.to_vec();
    // Two projection passes keep the orthogonality residual at round-off
    // relative to the remainder, not to the full vector.
    for _ in 0..2 {
        let a = dot(&kt, &p_hat_s) / kt_sq;
        p_hat_s.iter_mut().zip(&kt).for_each(|(p, k)| *p -= a * k);
        alpha += a;
        let g = dot(k_s, &gamma_hat) / ks_sum;
        gamma_hat.iter_mut().for_each(|x| *x -= g);
        gamma_bar += g;
    }
    // A remainder at the rounding level of its input has no direction; it is
    // reported as exactly zero so the orthogonality invariants stay sharp.
    let noise = 8.0 * k_s.len() as f64 * f64::EPSILON;
    if norm(&p_hat_s) <= noise * norm(p_tilde) {
        p_hat_s.fill(0.0);
    }
    if norm(&gamma_hat) <= noise * norm(gamma) {
        gamma_hat.fill(0.0);
    }
    Ok(ModalDecomposition {
        alpha,
        p_hat_s,
        gamma_bar,
        gamma_hat,
    })
}

/// Decomposition of an untransformed state `P_s`.
pub fn decompose_state(p_s: &[f64], fleet: &[InverterParams]) -> Result<ModalDecomposition> {
    let k_s: Vec<f64> = fleet.iter().map(|i| i.k_s).collect();
    let gamma: Vec<f64> = fleet.iter().map(|i| i.gamma).collect();
    decompose(&transform(p_s, &k_s)?, &gamma, &k_s)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStatePrediction {
    pub delta_omega: f64,
    pub p_s: Vec<f64>,
    pub total_p_s: f64,
    /// Modal coordinates of `P_s`; `None` when some `k_s,i` is zero.
    pub alpha: Option<f64>,
    pub p_hat_s: Option<Vec<f64>>,
}

impl SteadyStatePrediction {
    fn new(delta_omega: f64, p_s: Vec<f64>, total_p_s: f64, fleet: &[InverterParams]) -> Self {
        let modal = decompose_state(&p_s, fleet).ok();
        Self {
            delta_omega,
            total_p_s,
            alpha: modal.as_ref().map(|m| m.alpha),
            p_hat_s: modal.map(|m| m.p_hat_s),
            p_s,
        }
    }
}

/// Steady state of the damped model for arbitrary positive damping gains.
///
/// With `k_st,i = k_s,i / k_t,i` and `D = 1ᵀk_p + 1ᵀk_st`:
/// `Δω = (1ᵀP_0 + k_stᵀγ) / D` and `P_s,i = k_st,i (γ_i − Δω)`.
pub fn steady_state_general(
    fleet: &[InverterParams],
    p0_total: f64,
) -> Result<SteadyStatePrediction> {
    let kp = k_p_sum(fleet)?;
    let undamped: Vec<usize> = fleet
        .iter()
        .filter(|i| !(i.k_t > 0.0))
        .map(|i| i.id)
        .collect();
    if !undamped.is_empty() {
        return Err(Error::ZeroDamping { ids: undamped });
    }
    let k_st: Vec<f64> = fleet.iter().map(|i| i.k_s / i.k_t).collect();
    let gamma: Vec<f64> = fleet.iter().map(|i| i.gamma).collect();
    let k_st_sum = sum(k_st.iter().copied());
    let k_st_gamma = dot(&k_st, &gamma);
    let denom = kp + k_st_sum;

    let delta_omega = (p0_total + k_st_gamma) / denom;
    let p_s = k_st
        .iter()
        .zip(&gamma)
        .map(|(k, g)| k * (-p0_total / denom - k_st_gamma / denom + g))
        .collect();
    let total = -k_st_sum / denom * p0_total + kp * k_st_gamma / denom;
    Ok(SteadyStatePrediction::new(delta_omega, p_s, total, fleet))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformSteadyState {
    pub prediction: SteadyStatePrediction,
    /// Steady-state modal coordinate `α*`.
    pub alpha: f64,
    /// `P̂_s* = diag(k̃_s) γ̂ / k̄_t`.
    pub p_hat_s: Vec<f64>,
    pub gamma_bar: f64,
    pub gamma_hat: Vec<f64>,
    /// `k̄_t 1ᵀP_0 / (k̄_t 1ᵀk_p + 1ᵀk_s)`, which neglects `γ̄`.
    pub delta_omega_approx: f64,
}

/// Steady state under uniform damping through the modal separation.
pub fn steady_state_uniform(fleet: &[InverterParams], p0_total: f64) -> Result<UniformSteadyState> {
    let kt = uniform_damping(fleet)?;
    if !(kt > 0.0) {
        return Err(Error::ZeroDamping {
            ids: fleet.iter().map(|i| i.id).collect(),
        });
    }
    let kp = k_p_sum(fleet)?;
    let k_s: Vec<f64> = fleet.iter().map(|i| i.k_s).collect();
    check_gains(&k_s)?;
    let gamma: Vec<f64> = fleet.iter().map(|i| i.gamma).collect();
    let ks = sum(k_s.iter().copied());

    let gamma_bar = dot(&k_s, &gamma) / ks;
    let gamma_hat: Vec<f64> = gamma.iter().map(|g| g - gamma_bar).collect();
    let alpha = -(p0_total / kp - gamma_bar) / (kt + ks / kp);
    let p_hat_s: Vec<f64> = k_s
        .iter()
        .zip(&gamma_hat)
        .map(|(k, g)| k.sqrt() * g / kt)
        .collect();
    let total = -(ks * kp) / (kt * kp + ks) * (p0_total / kp - gamma_bar);
    let delta_omega = (p0_total + total) / kp;
    let delta_omega_approx = kt * p0_total / (kt * kp + ks);
    let p_s: Vec<f64> = k_s
        .iter()
        .zip(&gamma_hat)
        .map(|(k, g)| k * alpha + k * g / kt)
        .collect();

    Ok(UniformSteadyState {
        prediction: SteadyStatePrediction {
            delta_omega,
            p_s,
            total_p_s: total,
            alpha: Some(alpha),
            p_hat_s: Some(p_hat_s.clone()),
        },
        alpha,
        p_hat_s,
        gamma_bar,
        gamma_hat,
        delta_omega_approx,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningReport {
    pub k_t: f64,
    /// `ρ = k̄_t 1ᵀk_p / 1ᵀk_s`.
    pub ratio: f64,
    pub threshold: f64,
    pub criterion_met: bool,
    /// Approximate steady-state frequency deviation, rad/s.
    pub delta_omega: f64,
    /// `‖diag(k_s) γ̂‖₂ / k̄_t`, W.
    pub unbalance: f64,
    /// Time constants of the two modes, s: `1/k̄_t` and `1/(k̄_t + 1ᵀk_s/1ᵀk_p)`.
    pub settling_times: [f64; 2],
}

pub fn tuning_report(
    fleet: &[InverterParams],
    p0_total: f64,
    threshold: f64,
) -> Result<TuningReport> {
    let kt = uniform_damping(fleet)?;
    if !(kt > 0.0) {
        return Err(Error::ZeroDamping {
            ids: fleet.iter().map(|i| i.id).collect(),
        });
    }
    let kp = k_p_sum(fleet)?;
    let k_s: Vec<f64> = fleet.iter().map(|i| i.k_s).collect();
    let gamma: Vec<f64> = fleet.iter().map(|i| i.gamma).collect();
    let ks = sum(k_s.iter().copied());
    if !(ks > 0.0) {
        return Err(Error::ZeroSecondaryGains {
            zero_multiplicity: fleet.len(),
        });
    }
    let ratio = kt * kp / ks;
    let gamma_bar = dot(&k_s, &gamma) / ks;
    let unbalance = norm(
        &k_s.iter()
            .zip(&gamma)
            .map(|(k, g)| k * (g - gamma_bar) / kt)
            .collect::<Vec<_>>(),
    );
    Ok(TuningReport {
        k_t: kt,
        ratio,
        threshold,
        criterion_met: ratio <= threshold,
        delta_omega: kt * p0_total / (kt * kp + ks),
        unbalance,
        settling_times: [1.0 / kt, 1.0 / (kt + ks / kp)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fleet(k_p: &[f64], k_s: &[f64], k_t: &[f64], gamma: &[f64]) -> Vec<InverterParams> {
        (0..k_p.len())
            .map(|i| {
                InverterParams::new(i + 1, k_p[i])
                    .with_gains(k_s[i], k_t[i])
                    .with_gamma(gamma[i])
            })
            .collect()
    }

    #[test]
    fn system_matrices() {
        let f = fleet(&[100.0; 2], &[10.0; 2], &[0.1; 2], &[0.0; 2]);
        let a = system_matrix(&f, SystemKind::Adhoc).unwrap();
        assert!(a.iter().all(|&x| (x + 0.05).abs() < 1e-15));
        let d = system_matrix(&f, SystemKind::Damped).unwrap();
        assert_relative_eq!(d[(0, 0)], -0.15, epsilon = 1e-15);
        assert_relative_eq!(d[(1, 1)], -0.15, epsilon = 1e-15);
        assert_relative_eq!(d[(0, 1)], -0.05, epsilon = 1e-15);
        let z = system_matrix(
            &fleet(&[1.0; 3], &[0.0; 3], &[0.0; 3], &[0.0; 3]),
            SystemKind::Adhoc,
        )
        .unwrap();
        assert!(z.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn transformed_matrix_is_symmetric() {
        let f = fleet(&[3.0, 5.0, 7.0], &[2.0, 11.0, 0.3], &[0.0; 3], &[0.0; 3]);
        let m = system_matrix(&f, SystemKind::AdhocTransformed).unwrap();
        assert_eq!(m, m.transpose());
    }

    #[test]
    fn adhoc_eigen() {
        let f = fleet(&[100.0; 2], &[10.0; 2], &[0.0; 2], &[0.0; 2]);
        let e = adhoc_eigenstructure(&f).unwrap();
        assert_relative_eq!(e.nonzero_eigenvalue, -0.1, epsilon = 1e-15);
        assert_eq!(e.zero_multiplicity, 1);
        assert_eq!(e.eigenvalues(), vec![-0.1, 0.0]);

        let single = fleet(&[4.0], &[2.0], &[0.0], &[0.0]);
        let e = adhoc_eigenstructure(&single).unwrap();
        assert_eq!(e.nonzero_eigenvalue, -0.5);
        assert_eq!(e.zero_multiplicity, 0);
        assert_eq!(e.eigenvalue_set, vec![(-0.5, 1)]);

        let zero = fleet(&[1.0; 3], &[0.0; 3], &[0.0; 3], &[0.0; 3]);
        assert!(matches!(
            adhoc_eigenstructure(&zero),
            Err(Error::ZeroSecondaryGains {
                zero_multiplicity: 3
            })
        ));
    }

    #[test]
    fn damped_eigen_uniform() {
        let f = fleet(&[100.0; 2], &[10.0; 2], &[0.1; 2], &[0.0; 2]);
        let e = damped_eigenvalues_uniform(&f).unwrap();
        assert_eq!(e.eigenvalue_set.len(), 2);
        assert_relative_eq!(e.eigenvalue_set[0].0, -0.2, epsilon = 1e-15);
        assert_relative_eq!(e.eigenvalue_set[1].0, -0.1, epsilon = 1e-15);

        let undamped = fleet(&[100.0; 2], &[10.0; 2], &[0.0; 2], &[0.0; 2]);
        assert_eq!(
            damped_eigenvalues_uniform(&undamped).unwrap(),
            adhoc_eigenstructure(&undamped).unwrap()
        );

        let uneven = fleet(&[100.0; 2], &[10.0; 2], &[0.1, 0.2], &[0.0; 2]);
        assert!(matches!(
            damped_eigenvalues_uniform(&uneven),
            Err(Error::NonUniformDamping { .. })
        ));
    }

    #[test]
    fn transform_examples() {
        assert_eq!(
            transform(&[100.0, 400.0], &[4.0, 16.0]).unwrap(),
            vec![50.0, 100.0]
        );
        assert!(matches!(
            transform(&[1.0, 1.0], &[1.0, 0.0]),
            Err(Error::ZeroGainComponent { index: 1 })
        ));
        assert!(untransform(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn decompose_examples() {
        let d = decompose(&[0.0, 0.0], &[0.01, 0.02], &[10.0, 30.0]).unwrap();
        assert_relative_eq!(d.gamma_bar, 0.0175, epsilon = 1e-15);
        assert_relative_eq!(d.gamma_hat[0], -0.0075, epsilon = 1e-15);
        assert_relative_eq!(d.gamma_hat[1], 0.0025, epsilon = 1e-15);
        assert!((10.0 * d.gamma_hat[0] + 30.0 * d.gamma_hat[1]).abs() < 1e-15);

        let d = decompose(&[0.0; 3], &[0.3; 3], &[1.0, 2.0, 5.0]).unwrap();
        assert_relative_eq!(d.gamma_bar, 0.3, epsilon = 1e-15);
        assert!(d.gamma_hat.iter().all(|g| g.abs() < 1e-15));

        let k_s = [4.0, 9.0, 16.0];
        let aligned: Vec<f64> = k_s.iter().map(|k: &f64| 2.5 * k.sqrt()).collect();
        let d = decompose(&aligned, &[0.0; 3], &k_s).unwrap();
        assert_relative_eq!(d.alpha, 2.5, epsilon = 1e-15);
        assert!(d.p_hat_s.iter().all(|p| p.abs() < 1e-14));
    }

    #[test]
    fn general_steady_state_example() {
        // k_st = 100 from k_s = 10, k_t = 0.1
        let f = fleet(&[100.0; 2], &[10.0; 2], &[0.1; 2], &[0.0; 2]);
        let ss = steady_state_general(&f, 1000.0).unwrap();
        assert_relative_eq!(ss.delta_omega, 2.5, epsilon = 1e-13);
        assert_relative_eq!(ss.p_s[0], -250.0, epsilon = 1e-11);
        assert_relative_eq!(ss.p_s[1], -250.0, epsilon = 1e-11);
        assert_relative_eq!(ss.total_p_s, -500.0, epsilon = 1e-11);

        let zero = steady_state_general(&f, 0.0).unwrap();
        assert_eq!(zero.delta_omega, 0.0);
        assert!(zero.p_s.iter().all(|&p| p == 0.0));

        let partly = fleet(&[100.0; 3], &[10.0; 3], &[0.1, 0.0, 0.0], &[0.0; 3]);
        assert!(matches!(
            steady_state_general(&partly, 1.0),
            Err(Error::ZeroDamping { ids }) if ids == vec![2, 3]
        ));
    }

    #[test]
    fn general_steady_state_homogeneous_offset() {
        let c = 0.04;
        let f = fleet(&[100.0, 200.0], &[10.0, 30.0], &[0.1, 0.3], &[c, c]);
        let ss = steady_state_general(&f, 1000.0).unwrap();
        let k_st_sum = 100.0 + 100.0;
        assert_relative_eq!(
            ss.delta_omega,
            (1000.0 + c * k_st_sum) / (300.0 + k_st_sum),
            max_relative = 1e-14
        );
    }

    #[test]
    fn general_is_self_consistent() {
        let f = fleet(
            &[120.0, 80.0, 310.0],
            &[5.0, 40.0, 17.0],
            &[0.2, 0.05, 1.3],
            &[0.03, -0.08, 0.01],
        );
        let ss = steady_state_general(&f, -2345.0).unwrap();
        let recomputed = (-2345.0 + ss.p_s.iter().sum::<f64>()) / 510.0;
        assert_relative_eq!(recomputed, ss.delta_omega, max_relative = 1e-12);
        assert_relative_eq!(
            ss.total_p_s,
            ss.p_s.iter().sum::<f64>(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn uniform_matches_general_and_reduces_without_offsets() {
        let g = 2.0 * std::f64::consts::PI * 0.015;
        let f = fleet(
            &[353.71; 4],
            &[1000.0; 4],
            &[0.25; 4],
            &[g, -g, g / 2.0, -g / 2.0],
        );
        let u = steady_state_uniform(&f, 9500.0).unwrap();
        let ss = steady_state_general(&f, 9500.0).unwrap();
        for (a, b) in u.prediction.p_s.iter().zip(&ss.p_s) {
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
        assert_relative_eq!(
            u.prediction.delta_omega,
            ss.delta_omega,
            max_relative = 1e-10
        );

        let no_gamma = fleet(&[100.0; 2], &[10.0, 30.0], &[0.1; 2], &[0.0; 2]);
        let u = steady_state_uniform(&no_gamma, 1000.0).unwrap();
        assert!(u.p_hat_s.iter().all(|&p| p == 0.0));
        assert_eq!(u.prediction.p_s, vec![10.0 * u.alpha, 30.0 * u.alpha]);
    }

    #[test]
    fn approximate_frequency_example() {
        let f = fleet(&[100.0; 2], &[10.0; 2], &[0.1; 2], &[0.0; 2]);
        let u = steady_state_uniform(&f, 1000.0).unwrap();
        assert_relative_eq!(u.delta_omega_approx, 2.5, epsilon = 1e-14);
        assert_relative_eq!(u.prediction.delta_omega, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn tuning_report_fig4_gains() {
        let k_p = 2000.0 / (0.015 * 377.0);
        let f = fleet(&[k_p; 4], &[1000.0; 4], &[0.25; 4], &[0.0; 4]);
        let r = tuning_report(&f, 500.0, DEFAULT_TUNING_THRESHOLD).unwrap();
        assert_relative_eq!(r.ratio, 0.25 * 4.0 * k_p / 4000.0, max_relative = 1e-14);
        assert!((r.ratio - 0.0884).abs() < 1e-4);
        assert!(r.criterion_met);
        assert_eq!(r.unbalance, 0.0);
        assert_relative_eq!(r.settling_times[0], 4.0);

        let undamped = fleet(&[k_p; 4], &[1000.0; 4], &[0.0; 4], &[0.0; 4]);
        assert!(matches!(
            tuning_report(&undamped, 500.0, 0.1),
            Err(Error::ZeroDamping { .. })
        ));
    }

    #[test]
    fn tuning_tradeoff_is_monotone() {
        let g = 0.09;
        let mut last: Option<TuningReport> = None;
        for kt in [0.01, 0.05, 0.1, 0.25, 1.0, 5.0] {
            let f = fleet(
                &[350.0; 3],
                &[1000.0, 500.0, 800.0],
                &[kt; 3],
                &[g, -g, 0.0],
            );
            let r = tuning_report(&f, 700.0, 0.1).unwrap();
            if let Some(prev) = &last {
                assert!(r.delta_omega.abs() >= prev.delta_omega.abs());
                assert!(r.unbalance < prev.unbalance);
                assert_relative_eq!(
                    r.unbalance * r.k_t,
                    prev.unbalance * prev.k_t,
                    max_relative = 1e-12
                );
            }
            last = Some(r);
        }
    }
}
