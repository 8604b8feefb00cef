//! Full mean-field dynamics: split-step Fourier propagation of ψ(z, t)
//! in the intracavity lattice, coupled to the cavity field ODE.
//!
//! One step of length dt:
//!
//! 1. half kinetic step (merged with the previous step's second half);
//! 2. C is measured, the field is advanced by two RK4 half steps with Δ_f
//!    taken from a linear model of C(t) through the last two midpoints;
//! 3. potential phase with |α|² at the midpoint;
//! 4. half kinetic step.
//!
//! The potential step only changes phases, so C after step 1 is the
//! midpoint value to second order.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::units::ScaledParams;
use crate::wannier_stark::WsBasis;

#[derive(Clone, Debug, PartialEq)]
pub struct WaveFunction {
    pub grid: SpatialGrid,
    pub values: Vec<Complex64>,
    pub time: f64,
}

impl WaveFunction {
    pub fn new(grid: SpatialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_points {
            return Err(Error::param("values", "length does not match the grid"));
        }
        Ok(Self {
            grid,
            values,
            time: 0.0,
        })
    }

    pub fn from_real(grid: SpatialGrid, values: &[f64]) -> Self {
        Self {
            values: values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            grid,
            time: 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dz
    }

    pub fn normalize(&mut self) {
        let s = 1.0 / self.norm().sqrt();
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    fn weighted(&self, f: impl Fn(f64) -> f64) -> f64 {
        let g = &self.grid;
        self.values
            .iter()
            .enumerate()
            .map(|(j, v)| v.norm_sqr() * f(g.z(j)))
            .sum::<f64>()
            * g.dz
    }

    /// C = ⟨cos²z⟩.
    pub fn overlap(&self) -> f64 {
        self.weighted(|z| z.cos().powi(2))
    }

    pub fn centroid(&self) -> f64 {
        self.weighted(|z| z)
    }

    /// RMS width of the density.
    pub fn width(&self) -> f64 {
        let c = self.centroid();
        self.weighted(|z| (z - c) * (z - c)).sqrt()
    }

    pub fn sin2_mean(&self) -> f64 {
        self.weighted(|z| (2.0 * z).sin())
    }

    /// Largest density in the outer 2% of the box on either side, relative
    /// to the peak density.
    pub fn edge_density_ratio(&self) -> f64 {
        let n = self.values.len();
        let edge = (n / 50).max(1);
        let peak = self.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        let outer = self.values[..edge]
            .iter()
            .chain(&self.values[n - edge..])
            .map(|v| v.norm_sqr())
            .fold(0.0, f64::max);
        if peak > 0.0 {
            outer / peak
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityField {
    pub alpha: Complex64,
}

impl CavityField {
    pub fn photons(&self) -> f64 {
        self.alpha.norm_sqr()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    /// Gaussian superposition of WS states; `width_sites` is the full width
    /// of the site populations at 1/e.
    Delocalized { center_site: i64, width_sites: f64 },
    /// A single WS state.
    Localized { center_site: i64 },
    /// The Wannier function of the untilted lattice at one site: confined
    /// to one well but a superposition of many WS rungs, so it breathes.
    Wannier { center_site: i64 },
}

impl InitialState {
    pub fn center_site(&self) -> i64 {
        match *self {
            InitialState::Delocalized { center_site, .. }
            | InitialState::Localized { center_site }
            | InitialState::Wannier { center_site } => center_site,
        }
    }

    /// Sites whose amplitude exceeds 1e-6 of the peak.
    pub fn support(&self) -> std::ops::RangeInclusive<i64> {
        let c = self.center_site();
        match *self {
            InitialState::Delocalized { width_sites, .. } => {
                // exp(-2 n²/W²) > 1e-6
                let r = (width_sites * (6.0 * 10f64.ln() / 2.0).sqrt()).floor() as i64;
                c - r..=c + r
            }
            _ => c - 12..=c + 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub scaled: ScaledParams,
    pub grid: SpatialGrid,
    pub dt: f64,
    pub t_final: f64,
    /// Steps between recorded samples.
    pub sample_stride: usize,
    pub initial_state: InitialState,
    /// Freeze the field and hold the lattice at this depth (E_r): the
    /// limit of vanishing backaction.
    pub static_depth: Option<f64>,
    /// Override the adiabatic initial field.
    pub initial_alpha: Option<Complex64>,
    /// Abort when the edge density exceeds this fraction of the peak.
    pub edge_tolerance: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        let kmax = PI / self.grid.dz;
        if self.dt * kmax * kmax >= 0.5 {
            return Err(Error::param(
                "dt",
                format!(
                    "dt * max kinetic eigenvalue = {:.3} must stay below 0.5",
                    self.dt * kmax * kmax
                ),
            ));
        }
        if self.sample_stride == 0 {
            return Err(Error::param("sample_stride", "must be at least 1"));
        }
        let per_period = self.scaled.bloch_period() / (self.dt * self.sample_stride as f64);
        if per_period < 20.0 - 1e-9 {
            return Err(Error::param(
                "sample_stride",
                format!("only {per_period:.1} samples per Bloch period, need at least 20"),
            ));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::param("t_final", "must be positive"));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceRecord {
    pub times: Vec<f64>,
    pub alpha: Vec<Complex64>,
    pub n_photons: Vec<f64>,
    pub overlap: Vec<f64>,
    pub centroid: Vec<f64>,
    pub force: Vec<f64>,
    pub depth: Vec<f64>,
    pub norm: Vec<f64>,
    pub width: Vec<f64>,
    /// Largest edge-to-peak density ratio seen at any sample.
    pub max_edge_density: f64,
}

impl TraceRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Sampling interval, assumed uniform.
    pub fn sample_dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    fn push(&mut self, psi: &WaveFunction, alpha: Complex64, depth: f64) {
        self.times.push(psi.time);
        self.alpha.push(alpha);
        self.n_photons.push(alpha.norm_sqr());
        self.overlap.push(psi.overlap());
        self.centroid.push(psi.centroid());
        self.force.push(depth * psi.sin2_mean());
        self.depth.push(depth);
        self.norm.push(psi.norm());
        self.width.push(psi.width());
    }
}

/// Initial wavefunction on the basis grid.
pub fn init_wavepacket(kind: &InitialState, basis: &WsBasis) -> Result<WaveFunction> {
    let grid = basis.grid.clone();
    let missing = |s: i64| Error::param("initial_state", format!("site {s} is not covered by the basis"));
    let mut values = vec![Complex64::new(0.0, 0.0); grid.n_points];
    match *kind {
        InitialState::Localized { center_site } => {
            let phi = basis.state(center_site).ok_or_else(|| missing(center_site))?;
            for (v, p) in values.iter_mut().zip(phi) {
                v.re = *p;
            }
        }
        InitialState::Delocalized {
            center_site,
            width_sites,
        } => {
            if !(width_sites > 0.0) {
                return Err(Error::param("width_sites", "must be positive"));
            }
            for s in kind.support() {
                let phi = basis.state(s).ok_or_else(|| {
                    Error::param(
                        "width_sites",
                        format!("packet of width {width_sites} sites does not fit in the usable basis"),
                    )
                })?;
                let x = (s - center_site) as f64;
                let w = (-2.0 * x * x / (width_sites * width_sites)).exp();
                for (v, p) in values.iter_mut().zip(phi) {
                    v.re += w * p;
                }
            }
        }
        InitialState::Wannier { center_site } => {
            let (small, w) = crate::wannier_stark::wannier_function(basis.s0, grid.points_per_site, 32)?;
            if basis.state(center_site).is_none() {
                return Err(missing(center_site));
            }
            let base = ((small.z_min - grid.z_min) / grid.dz).round() as i64
                + center_site * grid.points_per_site as i64;
            for (i, x) in w.iter().enumerate() {
                let j = base + i as i64;
                if (0..grid.n_points as i64).contains(&j) {
                    values[j as usize].re = *x;
                }
            }
        }
    }
    let mut psi = WaveFunction::new(grid, values)?;
    psi.normalize();
    Ok(psi)
}

/// Δ_f = Δ_c − N U₀ C[ψ].
pub fn effective_detuning(psi: &WaveFunction, scaled: &ScaledParams) -> f64 {
    scaled.delta_c - scaled.n_u0() * psi.overlap()
}

/// Lattice force ⟨−∂_z V⟩ = U₀|α|²⟨sin 2z⟩ for V = U₀|α|²cos²z.
pub fn lattice_force(psi: &WaveFunction, field: &CavityField, scaled: &ScaledParams) -> f64 {
    scaled.u0 * field.photons() * psi.sin2_mean()
}

fn field_rhs(alpha: Complex64, scaled: &ScaledParams, c: f64) -> Complex64 {
    let delta_f = scaled.delta_c - scaled.n_u0() * c;
    -Complex64::new(scaled.kappa, -delta_f) * alpha + scaled.eta
}

/// One RK4 step of dα/dt = −(κ − iΔ_f)α + η over [t0, t0 + h], where the
/// overlap is supplied as a function of the offset from t0.
pub fn rk4_field(alpha: Complex64, scaled: &ScaledParams, h: f64, overlap: impl Fn(f64) -> f64) -> Complex64 {
    let (c0, c1, c2) = (overlap(0.0), overlap(h / 2.0), overlap(h));
    let k1 = field_rhs(alpha, scaled, c0);
    let k2 = field_rhs(alpha + k1 * (h / 2.0), scaled, c1);
    let k3 = field_rhs(alpha + k2 * (h / 2.0), scaled, c1);
    let k4 = field_rhs(alpha + k3 * h, scaled, c2);
    alpha + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Split-step propagator with precomputed phase tables.
pub struct Propagator {
    scaled: ScaledParams,
    grid: SpatialGrid,
    dt: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    /// exp(−ik²dt/2)/N and exp(−ik²dt)/N; the 1/N undoes the unnormalised FFT pair.
    half_kick: Vec<Complex64>,
    full_kick: Vec<Complex64>,
    tilt_phase: Vec<Complex64>,
    /// cos²z over one lattice period of grid points.
    cos2: Vec<f64>,
    static_depth: Option<f64>,
    /// C at the previous midpoint.
    prev_mid: Option<f64>,
}

impl Propagator {
    pub fn new(scaled: &ScaledParams, grid: &SpatialGrid, dt: f64, static_depth: Option<f64>) -> Self {
        let n = grid.n_points;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        let kick = |tau: f64| -> Vec<Complex64> {
            grid.wavenumbers()
                .iter()
                .map(|k| Complex64::from_polar(1.0 / n as f64, -k * k * tau))
                .collect()
        };
        let slope = scaled.omega_b / PI;
        Self {
            scaled: scaled.clone(),
            grid: grid.clone(),
            dt,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            half_kick: kick(dt / 2.0),
            full_kick: kick(dt),
            tilt_phase: (0..n).map(|j| Complex64::from_polar(1.0, -slope * grid.z(j) * dt)).collect(),
            cos2: (0..grid.points_per_site).map(|r| (r as f64 * grid.dz).cos().powi(2)).collect(),
            fwd,
            inv,
            static_depth,
            prev_mid: None,
        }
    }

    fn kick(&mut self, psi: &mut [Complex64], full: bool) {
        self.fwd.process_with_scratch(psi, &mut self.scratch);
        let k = if full { &self.full_kick } else { &self.half_kick };
        psi.iter_mut().zip(k).for_each(|(v, f)| *v *= f);
        self.inv.process_with_scratch(psi, &mut self.scratch);
    }

    fn overlap_of(&self, psi: &[Complex64]) -> f64 {
        let pps = self.cos2.len();
        psi.chunks_exact(pps)
            .map(|cell| cell.iter().zip(&self.cos2).map(|(v, c)| v.norm_sqr() * c).sum::<f64>())
            .sum::<f64>()
            * self.grid.dz
    }

    /// Potential step and field update, between the kinetic halves.
    /// `psi` must already carry the first half kick.
    fn middle(&mut self, psi: &mut [Complex64], alpha: Complex64, c_start: f64) -> (Complex64, f64) {
        let dt = self.dt;
        let c_mid = self.overlap_of(psi);
        let (alpha_end, depth) = match self.static_depth {
            Some(d) => (alpha, d),
            None => {
                // Linear model through the previous midpoint, or through the
                // start value on the first step.
                let slope = match self.prev_mid {
                    Some(prev) => (c_mid - prev) / dt,
                    None => (c_mid - c_start) / (dt / 2.0),
                };
                let c_at = |tau: f64| c_mid + slope * (tau - dt / 2.0);
                let h = dt / 2.0;
                let a_mid = rk4_field(alpha, &self.scaled, h, |s| c_at(s));
                let a_end = rk4_field(a_mid, &self.scaled, h, |s| c_at(h + s));
                (a_end, self.scaled.u0 * a_mid.norm_sqr())
            }
        };
        self.prev_mid = Some(c_mid);
        let pps = self.cos2.len();
        let lattice: Vec<Complex64> = self
            .cos2
            .iter()
            .map(|c| Complex64::from_polar(1.0, -depth * c * dt))
            .collect();
        for (cell, tilt) in psi.chunks_exact_mut(pps).zip(self.tilt_phase.chunks_exact(pps)) {
            for ((v, l), t) in cell.iter_mut().zip(&lattice).zip(tilt) {
                *v *= l * t;
            }
        }
        (alpha_end, depth)
    }

    /// A single full step from real-space ψ(t) to ψ(t + dt).
    pub fn step(&mut self, psi: &mut WaveFunction, field: &mut CavityField) -> f64 {
        let c_start = self.overlap_of(&psi.values);
        self.kick(&mut psi.values, false);
        let (alpha, depth) = self.middle(&mut psi.values, field.alpha, c_start);
        self.kick(&mut psi.values, false);
        field.alpha = alpha;
        psi.time += self.dt;
        depth
    }
}

/// One standalone Strang step. Runs use [`run`], which keeps the
/// propagator and merges adjacent half kicks.
pub fn step(psi: &WaveFunction, field: &CavityField, scaled: &ScaledParams, dt: f64) -> Result<(WaveFunction, CavityField)> {
    let mut p = Propagator::new(scaled, &psi.grid, dt, None);
    let mut psi = psi.clone();
    let mut field = *field;
    p.step(&mut psi, &mut field);
    check_finite(&psi, &field)?;
    Ok((psi, field))
}

fn check_finite(psi: &WaveFunction, field: &CavityField) -> Result<()> {
    if !field.alpha.re.is_finite() || !field.alpha.im.is_finite() {
        return Err(Error::numerical(psi.time, "cavity field is not finite"));
    }
    let n = psi.norm();
    if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
        return Err(Error::numerical(psi.time, format!("wavefunction norm {n}")));
    }
    Ok(())
}

/// Adiabatic steady-state field for the current atomic state.
pub fn adiabatic_field(psi: &WaveFunction, scaled: &ScaledParams) -> Complex64 {
    Complex64::new(scaled.eta, 0.0) / Complex64::new(scaled.kappa, -effective_detuning(psi, scaled))
}

/// Integrate from the initial state in `config`. `basis` must live on the
/// simulation grid.
pub fn run(config: &SimConfig, basis: &WsBasis) -> Result<TraceRecord> {
    config.validate()?;
    if basis.grid != config.grid {
        return Err(Error::param("grid", "basis must be embedded on the simulation grid"));
    }
    let mut psi = init_wavepacket(&config.initial_state, basis)?;
    let mut field = CavityField {
        alpha: config.initial_alpha.unwrap_or_else(|| adiabatic_field(&psi, &config.scaled)),
    };
    let depth0 = config.static_depth.unwrap_or(config.scaled.u0 * field.photons());
    let mut prop = Propagator::new(&config.scaled, &config.grid, config.dt, config.static_depth);
    let n_steps = config.n_steps();
    let stride = config.sample_stride;
    let mut trace = TraceRecord::default();
    let mut max_edge: f64 = 0.0;
    trace.push(&psi, field.alpha, depth0);

    let mut c_start = prop.overlap_of(&psi.values);
    prop.kick(&mut psi.values, false);
    for k in 1..=n_steps {
        let (alpha, depth) = prop.middle(&mut psi.values, field.alpha, c_start);
        field.alpha = alpha;
        psi.time = k as f64 * config.dt;
        if k % stride == 0 || k == n_steps {
            prop.kick(&mut psi.values, false);
            check_finite(&psi, &field)?;
            let edge = psi.edge_density_ratio();
            max_edge = max_edge.max(edge);
            if edge > config.edge_tolerance {
                return Err(Error::numerical(
                    psi.time,
                    format!("density at the box edge is {edge:.2e} of the peak; enlarge the box"),
                ));
            }
            if k % stride == 0 {
                trace.push(&psi, field.alpha, depth);
            }
            if k < n_steps {
                c_start = prop.overlap_of(&psi.values);
                prop.kick(&mut psi.values, false);
            }
        } else {
            prop.kick(&mut psi.values, true);
        }
    }
    log::info!("largest relative edge density {max_edge:.2e}");
    trace.max_edge_density = max_edge;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(u0: f64, eta: f64, delta_c: f64) -> ScaledParams {
        ScaledParams::new(0.15575, 0.20921, eta, delta_c, u0, 1000.0, 1.0).unwrap()
    }

    fn gaussian(grid: &SpatialGrid, z0: f64, sigma: f64) -> WaveFunction {
        let v: Vec<f64> = grid
            .positions()
            .iter()
            .map(|z| (-(z - z0).powi(2) / (4.0 * sigma * sigma)).exp())
            .collect();
        let mut psi = WaveFunction::from_real(grid.clone(), &v);
        psi.normalize();
        psi
    }

    #[test]
    fn uniform_density_has_half_overlap() {
        let g = SpatialGrid::new(16, 16).unwrap();
        let psi = WaveFunction::from_real(g.clone(), &vec![1.0 / (g.z_max - g.z_min).sqrt(); g.n_points]);
        assert!((psi.overlap() - 0.5).abs() < 1e-12);
        let s = params(-2e-4, 1.0, 0.1);
        assert!((effective_detuning(&psi, &s) - (0.1 - s.n_u0() / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn symmetric_packet_feels_no_force() {
        let g = SpatialGrid::new(16, 16).unwrap();
        let psi = gaussian(&g, 0.0, 0.4);
        let f = lattice_force(&psi, &CavityField { alpha: Complex64::new(100.0, 3.0) }, &params(-2e-4, 1.0, 0.0));
        assert!(f.abs() < 1e-12);
        let off = gaussian(&g, 0.3, 0.4);
        assert!(lattice_force(&off, &CavityField { alpha: Complex64::new(0.0, 0.0) }, &params(-2e-4, 1.0, 0.0)) == 0.0);
        // Red detuned lattice pulls an off-centre packet back to the antinode.
        assert!(lattice_force(&off, &CavityField { alpha: Complex64::new(100.0, 0.0) }, &params(-2e-4, 1.0, 0.0)) < 0.0);
    }

    #[test]
    fn free_packet_keeps_its_momentum_distribution() {
        let g = SpatialGrid::new(64, 16).unwrap();
        let mut s = params(0.0, 0.0, 0.0);
        s.omega_b = 0.0;
        s.f = 0.0;
        let psi0 = gaussian(&g, 0.0, 2.0);
        let mut p = Propagator::new(&s, &g, 0.001, None);
        let mut psi = psi0.clone();
        let mut field = CavityField { alpha: Complex64::new(0.0, 0.0) };
        for _ in 0..500 {
            p.step(&mut psi, &mut field);
        }
        assert!(psi.width() > psi0.width());
        let spectrum = |w: &WaveFunction| -> Vec<f64> {
            let mut v = w.values.clone();
            FftPlanner::new().plan_fft_forward(v.len()).process(&mut v);
            v.iter().map(|c| c.norm_sqr()).collect()
        };
        let (a, b) = (spectrum(&psi0), spectrum(&psi));
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let peak = a.iter().cloned().fold(0.0, f64::max);
        assert!(err / peak < 1e-10);
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn field_ode_with_constant_overlap_matches_closed_form() {
        let s = params(-2e-4, 30.0, 0.15);
        let c = 0.7;
        let lam = Complex64::new(s.kappa, -(s.delta_c - s.n_u0() * c));
        let exact = |t: f64| s.eta / lam * (Complex64::new(1.0, 0.0) - (-lam * t).exp());
        let h = 0.01;
        let mut a = Complex64::new(0.0, 0.0);
        for k in 1..=2000 {
            a = rk4_field(a, &s, h, |_| c);
            let t = k as f64 * h;
            assert!((a - exact(t)).norm() < 1e-8 * exact(t).norm().max(1.0));
        }
    }

    #[test]
    fn stability_bound_is_enforced() {
        let g = SpatialGrid::new(16, 16).unwrap();
        let cfg = SimConfig {
            scaled: params(-2e-4, 1.0, 0.0),
            grid: g,
            dt: 0.002,
            t_final: 1.0,
            sample_stride: 1,
            initial_state: InitialState::Localized { center_site: 0 },
            static_depth: None,
            initial_alpha: None,
            edge_tolerance: 1e-6,
        };
        assert!(cfg.validate().is_err());
    }
}
