//! Distance budgets for replacing a tunnel by a thread: the filling-volume
//! bound on the flat distance and the vertical-path bound on the
//! Gromov-Hausdorff distance, for one tunnel and iterated over a thread system.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{cap_volume, unit_sphere_measure};
use crate::threads::ThreadSystem;
use crate::tunnel::{profile_volume, radial_moment, TunnelBend, TunnelProfile};

pub const BUDGET_SCHEMA: &str = "budget/1";

/// Heights of the filling slab above and below the tunnel:
/// `h = sqrt(2 rho diam - rho^2)` and `h0 = sqrt(2 pi rho diam + 8 rho)`.
pub fn heights(rho: f64, diam: f64) -> Result<(f64, f64)> {
    if !(rho > 0.0 && diam > 0.0 && rho.is_finite() && diam.is_finite()) {
        return Err(Error::Parameter(format!(
            "heights need rho > 0 and diam > 0 (got rho = {rho}, diam = {diam})"
        )));
    }
    if rho > 2.0 * diam {
        return Err(Error::Parameter(format!(
            "upper height h = sqrt(2 rho diam - rho^2) is imaginary: rho = {rho} > 2 diam = {}",
            2.0 * diam
        )));
    }
    let h = (2.0 * rho * diam - rho * rho).sqrt();
    let h0 = (2.0 * PI * rho * diam + 8.0 * rho).sqrt();
    Ok((h, h0))
}

/// The volume and distance budget for one tunnel-to-thread replacement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FillingBudget {
    pub m: usize,
    pub rho: f64,
    pub rho0: f64,
    #[serde(rename = "L")]
    pub length: f64,
    pub diam: f64,
    pub vol: f64,
    pub h: f64,
    pub h0: f64,
    /// Volume of the tunnel itself, which is also the slice of the pipe at
    /// height zero.
    pub tunnel_vol: f64,
    /// Slab under the manifold with the tunnel.
    pub vol_bottom: f64,
    /// Slab of thickness rho over the host, plus the pipe; the cusp region
    /// sits inside the slab over the removed caps.
    pub vol_mid: f64,
    /// Slab of thickness h on top.
    pub vol_top: f64,
    pub pipe_vol: f64,
    /// `pipe_vol / (L rho0^m)`.
    pub pipe_constant: f64,
    #[serde(rename = "dF_bound")]
    pub df_bound: f64,
    #[serde(rename = "dGH_bound")]
    pub dgh_bound: f64,
}

impl FillingBudget {
    /// Assembles the budget from the tunnel and pipe volumes. The removed
    /// balls are geodesic balls of radius rho in a unit round host.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        m: usize,
        rho: f64,
        rho0: f64,
        length: f64,
        vol: f64,
        diam: f64,
        tunnel_vol: f64,
        pipe_vol: f64,
    ) -> Result<Self> {
        if !(vol > 0.0) {
            return Err(Error::Parameter(format!(
                "host volume {vol} must be positive"
            )));
        }
        let (h, h0) = heights(rho, diam)?;
        let vol_bottom = h0 * (vol - 2.0 * cap_volume(m, rho) + tunnel_vol);
        let vol_mid = rho * vol + pipe_vol;
        let vol_top = h * vol;
        Ok(Self {
            m,
            rho,
            rho0,
            length,
            diam,
            vol,
            h,
            h0,
            tunnel_vol,
            vol_bottom,
            vol_mid,
            vol_top,
            pipe_vol,
            pipe_constant: pipe_vol / (length * rho0.powi(m as i32)),
            df_bound: vol_bottom + vol_mid + vol_top,
            dgh_bound: h0 + 2.0 * PI * rho + h,
        })
    }
}

/// Volume of the pipe: half of the tunnel rotated once more,
/// `omega_m / 2 * integral of r^m ds`.
pub fn pipe_volume(profile: &TunnelProfile) -> f64 {
    let m = profile.m();
    0.5 * unit_sphere_measure(m) * radial_moment(profile, m as i32)
}

/// Budget for replacing `profile` in a host of volume `vol` and diameter
/// `diam`.
pub fn filling_budget(profile: &TunnelProfile, vol: f64, diam: f64) -> Result<FillingBudget> {
    if !(profile.rho() < diam) {
        return Err(Error::Parameter(format!(
            "cap radius {} must be below the host diameter {diam}",
            profile.rho()
        )));
    }
    FillingBudget::from_parts(
        profile.m(),
        profile.rho(),
        profile.rho0(),
        profile.length(),
        vol,
        diam,
        profile_volume(profile),
        pipe_volume(profile),
    )
}

/// How each thread's tunnel length is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LengthPolicy {
    /// Exactly the thread length; short threads are a construction error.
    ThreadLength,
    /// The thread length, raised to the shortest tunnel the bend allows.
    #[default]
    AtLeastMinimal,
}

/// Tunnel parameters shared by every thread of a system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    /// Neck radius as a fraction of the tunnel radius rho.
    pub rho0_factor: f64,
    pub length_policy: LengthPolicy,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self {
            rho0_factor: 0.25,
            length_policy: LengthPolicy::AtLeastMinimal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedConstants {
    /// max tunnel volume / rho^{m-1}
    #[serde(rename = "C1")]
    pub c1: f64,
    /// total tunnel volume / eps^{m-1}
    #[serde(rename = "C2")]
    pub c2: f64,
    /// max per-step flat budget / rho
    #[serde(rename = "C3")]
    pub c3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IteratedBudget {
    pub schema: String,
    pub eps: f64,
    pub m: usize,
    #[serde(rename = "N")]
    pub count: usize,
    #[serde(rename = "K")]
    pub thread_count: usize,
    pub rho: f64,
    pub params: ProfileParams,
    pub per_step: Vec<FillingBudget>,
    /// Host volume before each step.
    pub host_volumes: Vec<f64>,
    #[serde(rename = "total_dF")]
    pub total_df: f64,
    #[serde(rename = "total_dGH")]
    pub total_dgh: f64,
    pub fitted_constants: FittedConstants,
}

/// Chains the single-tunnel budget over the replacement sequence.
///
/// Step k replaces tunnel k by its thread while tunnels k+1..K are still in
/// place, so its host has volume `Vol(S^m) + sum_{j>k} (Vol(U_j) - 2 Vol(B(rho)))`
/// and diameter at most pi.
pub fn iterated_budget(system: &ThreadSystem, params: ProfileParams) -> Result<IteratedBudget> {
    let m = system.net().m();
    let eps = system.eps();
    let rho = system.rho();
    let k = system.thread_count();
    let rho0 = params.rho0_factor * rho;
    if !(params.rho0_factor > 0.0 && params.rho0_factor < 1.0) {
        return Err(Error::Parameter(format!(
            "neck factor {} must lie in (0, 1)",
            params.rho0_factor
        )));
    }
    let mut per_step = Vec::with_capacity(k);
    let mut host_volumes = Vec::with_capacity(k);
    if k > 0 {
        let bend = Arc::new(TunnelBend::new(m, rho0, rho)?);
        let base = TunnelProfile::new(Arc::clone(&bend), bend.minimal_length())?;
        // tunnel and pipe volumes are affine in the neck length
        let (u0, p0) = (profile_volume(&base), pipe_volume(&base));
        let neck = bend.neck_radius();
        let du = unit_sphere_measure(m - 1) * neck.powi(m as i32 - 1);
        let dp = 0.5 * unit_sphere_measure(m) * neck.powi(m as i32);

        let lengths: Vec<f64> = system
            .pairs()
            .iter()
            .map(|t| match params.length_policy {
                LengthPolicy::ThreadLength => {
                    if t.length < bend.minimal_length() {
                        Err(Error::Construction(format!(
                            "thread ({}, {}) of length {} is shorter than the minimal tunnel {}",
                            t.i,
                            t.j,
                            t.length,
                            bend.minimal_length()
                        )))
                    } else {
                        Ok(t.length)
                    }
                }
                LengthPolicy::AtLeastMinimal => Ok(t.length.max(bend.minimal_length())),
            })
            .collect::<Result<_>>()?;
        let tunnel_vols: Vec<f64> = lengths
            .iter()
            .map(|&l| u0 + du * (l - bend.minimal_length()))
            .collect();
        let pipe_vols: Vec<f64> = lengths
            .iter()
            .map(|&l| p0 + dp * (l - bend.minimal_length()))
            .collect();

        let removed = 2.0 * cap_volume(m, rho);
        let mut host = unit_sphere_measure(m);
        let mut hosts = vec![0.0; k];
        for step in (0..k).rev() {
            hosts[step] = host;
            host += tunnel_vols[step] - removed;
        }
        per_step = (0..k)
            .into_par_iter()
            .map(|s| {
                FillingBudget::from_parts(
                    m,
                    rho,
                    rho0,
                    lengths[s],
                    hosts[s],
                    PI,
                    tunnel_vols[s],
                    pipe_vols[s],
                )
            })
            .collect::<Result<Vec<_>>>()?;
        host_volumes = hosts;
    }
    let total_df = per_step.iter().map(|b| b.df_bound).sum();
    let total_dgh = per_step.iter().map(|b| b.dgh_bound).sum();
    let max_u = per_step.iter().map(|b| b.tunnel_vol).fold(0.0, f64::max);
    let sum_u: f64 = per_step.iter().map(|b| b.tunnel_vol).sum();
    let max_df = per_step.iter().map(|b| b.df_bound).fold(0.0, f64::max);
    Ok(IteratedBudget {
        schema: BUDGET_SCHEMA.to_string(),
        eps,
        m,
        count: system.net().count(),
        thread_count: k,
        rho,
        params,
        per_step,
        host_volumes,
        total_df,
        total_dgh,
        fitted_constants: FittedConstants {
            c1: max_u / rho.powi(m as i32 - 1),
            c2: sum_u / eps.powi(m as i32 - 1),
            c3: max_df / rho,
        },
    })
}

impl IteratedBudget {
    pub fn validate(&self) -> Result<()> {
        if self.schema != BUDGET_SCHEMA {
            return Err(Error::Schema {
                expected: BUDGET_SCHEMA.into(),
                found: self.schema.clone(),
            });
        }
        if self.thread_count != self.count * self.count.saturating_sub(1) / 2
            || self.per_step.len() != self.thread_count
        {
            return Err(Error::Validation(format!(
                "{} steps for {} centers",
                self.per_step.len(),
                self.count
            )));
        }
        let sum: f64 = self.per_step.iter().map(|b| b.df_bound).sum();
        if (sum - self.total_df).abs() > 1e-12 * sum.abs().max(1.0) {
            return Err(Error::Validation(
                "total flat budget is not the sum of its steps".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::build_net;
    use crate::tunnel::generate_profile;

    #[test]
    fn height_identities() {
        let (h, h0) = heights(0.7, 0.7).unwrap();
        assert!((h - 0.7).abs() < 1e-15);
        assert!((h0 * h0 - (2.0 * PI * 0.49 + 5.6)).abs() < 1e-12);
        let (h, h0) = heights(1e-14, 1.0).unwrap();
        assert!(h < 1e-6 && h0 < 1e-6);
        match heights(2.5, 1.0) {
            Err(Error::Parameter(msg)) => assert!(msg.contains("h = sqrt(2 rho diam - rho^2)")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn budget_vanishes_with_rho_and_grows_with_diam() {
        let p = generate_profile(3, 0.01, 0.05, 1.0).unwrap();
        let a = filling_budget(&p, 4.0 * PI, PI).unwrap();
        let b = filling_budget(&p, 4.0 * PI, 2.0 * PI).unwrap();
        assert!(b.df_bound > a.df_bound && b.dgh_bound > a.dgh_bound);
        let tiny =
            FillingBudget::from_parts(3, 1e-12, 2.5e-13, 1.0, 4.0 * PI, PI, 0.0, 0.0).unwrap();
        assert!(tiny.df_bound < 1e-4 && tiny.dgh_bound < 1e-4);
        assert_eq!(a.dgh_bound, a.h0 + 2.0 * PI * a.rho + a.h);
        assert_eq!(a.df_bound, a.vol_bottom + a.vol_mid + a.vol_top);
    }

    #[test]
    fn single_thread_total_is_single_budget() {
        let net = build_net(2, 1.2, 0).unwrap();
        let sys = ThreadSystem::from_net(&net).unwrap();
        assert_eq!(sys.thread_count(), 1);
        let it = iterated_budget(&sys, ProfileParams::default()).unwrap();
        assert_eq!(it.total_df, it.per_step[0].df_bound);
        assert_eq!(it.host_volumes[0], 4.0 * PI);
        it.validate().unwrap();
    }

    #[test]
    fn affine_volumes_match_quadrature() {
        let p = generate_profile(2, 0.01, 0.04, 0.3).unwrap();
        let longer = p.with_length(0.9).unwrap();
        let du = 2.0 * PI * p.bend().neck_radius() * 0.6;
        assert!((profile_volume(&longer) - profile_volume(&p) - du).abs() < 1e-12);
        let dp = 0.5 * 4.0 * PI * p.bend().neck_radius().powi(2) * 0.6;
        assert!((pipe_volume(&longer) - pipe_volume(&p) - dp).abs() < 1e-12);
    }

    #[test]
    fn hosts_stay_under_sphere_plus_tunnels() {
        let net = build_net(2, 0.7, 1).unwrap();
        let sys = ThreadSystem::from_net(&net).unwrap();
        let it = iterated_budget(&sys, ProfileParams::default()).unwrap();
        let bound = 4.0 * PI + it.fitted_constants.c2 * 0.7;
        assert!(it.host_volumes.iter().all(|&v| v <= bound));
        assert_eq!(it.thread_count, it.count * (it.count - 1) / 2);
    }
}
