//! The run pipeline: basis → full and/or ladder dynamics → analysis, for
//! every point of a sweep.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analysis::{self, AnalyticVelocity, LoopWork, MetrologyEstimate, SidebandPowers, Spectrum, VelocityFit};
use crate::config::{PhysicalSection, RunConfig};
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::ladder::{self, LadderState, LadderTrace};
use crate::meanfield::{self, SimConfig, TraceRecord};
use crate::units::{self, PhysicalParams, ScaledParams};
use crate::wannier_stark::{self, MatrixElements, WsBasis};

/// Largest ladder step; the ladder has no fast dynamics left to resolve.
const LADDER_MAX_DT: f64 = 0.02;

/// Parameters of one sweep point after η and Δ_c have been solved for.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSetup {
    pub label: String,
    pub section: PhysicalSection,
    pub physical: PhysicalParams,
    pub scaled: ScaledParams,
    /// δ₀ = Δ_c − NU₀γ₀, scaled.
    pub delta0: f64,
    pub alpha0: Complex64,
    /// Lattice frozen at the target depth, no backaction.
    pub static_lattice: bool,
}

/// Solve for Δ_c and η so that the static field holds `target_depth`.
pub fn resolve_point(section: &PhysicalSection, elements: &MatrixElements, static_lattice: bool) -> Result<PointSetup> {
    section.validate()?;
    let bare = section.physical(0.0, 0.0)?;
    let wr = units::recoil_frequency(&bare);
    let kappa = bare.cavity_decay / wr;
    let u0 = bare.atom_light_shift / wr;
    let n_u0 = section.atom_number * u0;
    let delta0 = match (section.offset_kappa, section.delta0_kappa) {
        (Some(o), _) => o * kappa + n_u0 * (1.0 - elements.gamma0),
        (None, Some(d)) => d * kappa,
        (None, None) => unreachable!("validated"),
    };
    let delta_c = delta0 + n_u0 * elements.gamma0;
    let static_lattice = static_lattice || section.static_lattice_limit();
    let eta = if u0 == 0.0 {
        0.0
    } else {
        (section.target_depth / u0).sqrt() * (kappa * kappa + delta0 * delta0).sqrt()
    };
    let physical = section.physical(eta * wr, delta_c * wr)?;
    let scaled = units::scale(&physical)?;
    let label = match (section.offset_kappa, section.delta0_kappa) {
        (Some(o), _) => format!("offset_kappa_{o:+.3}"),
        (_, Some(d)) => format!("delta0_kappa_{d:+.3}"),
        _ => unreachable!("validated"),
    };
    Ok(PointSetup {
        label,
        section: section.clone(),
        alpha0: ladder::static_field(scaled.eta, scaled.kappa, delta0),
        physical,
        scaled,
        delta0,
        static_lattice,
    })
}

/// First-band basis of the tilted lattice at the target depth.
pub fn prepare_basis(cfg: &RunConfig) -> Result<(WsBasis, MatrixElements)> {
    let bare = cfg.physical.physical(0.0, 0.0)?;
    let wr = units::recoil_frequency(&bare);
    let omega_b = units::bloch_frequency(&bare) / wr;
    let n = &cfg.numerics;
    let grid = SpatialGrid::new(n.basis_sites, n.points_per_site)?;
    let usable = n.basis_sites.saturating_sub(2 * wannier_stark::EDGE_MARGIN_SITES as usize);
    let basis = wannier_stark::compute_ws_basis(cfg.physical.target_depth, omega_b, &grid, usable)?;
    let elements = wannier_stark::matrix_elements(&basis)?;
    Ok((basis, elements))
}

#[derive(Clone, Debug)]
pub struct FullAnalysis {
    pub velocity: VelocityFit,
    pub spectrum: Spectrum,
    pub sidebands: SidebandPowers,
    pub loop_work: LoopWork,
    /// Dominant modulation frequency of C(t).
    pub overlap_peak: f64,
    pub mean_photons: f64,
    /// Time-averaged Δ_f, scaled.
    pub mean_delta_f: f64,
    /// Tilt energy gained per period, ω_B × drift in sites.
    pub tilt_energy_per_period: f64,
}

#[derive(Clone, Debug)]
pub struct LadderAnalysis {
    pub velocity: VelocityFit,
    /// Dominant modulation frequency of ⟨b_M + b_M†⟩.
    pub coherence_peak: f64,
}

#[derive(Clone, Debug)]
pub struct PointResult {
    pub setup: PointSetup,
    pub dt: f64,
    pub stride: usize,
    pub sigma1: f64,
    pub theta1: f64,
    pub projection_residual: f64,
    pub analytic: Option<AnalyticVelocity>,
    pub trace: Option<TraceRecord>,
    pub full: Option<FullAnalysis>,
    pub ladder_trace: Option<LadderTrace>,
    pub ladder: Option<LadderAnalysis>,
    pub metrology: MetrologyEstimate,
}

#[derive(Clone, Debug)]
pub struct ScenarioReport {
    pub config: RunConfig,
    pub elements: MatrixElements,
    pub e0: f64,
    pub points: Vec<PointResult>,
}

/// Index of the first sample at or after `t`.
fn first_at(times: &[f64], t: f64) -> usize {
    times.iter().position(|x| *x >= t - 1e-9).unwrap_or(times.len())
}

fn analyse_full(trace: &TraceRecord, setup: &PointSetup, t_start: f64) -> Result<FullAnalysis> {
    let s = &setup.scaled;
    let w = s.omega_b;
    let velocity = analysis::numeric_transport_velocity(&trace.times, &trace.centroid, w, t_start)?;
    let spp = analysis::samples_per_period(trace.sample_dt(), w)?;
    let first = first_at(&trace.times, t_start);
    let periods = (trace.len() - first) / spp;
    if periods == 0 {
        return Err(Error::InsufficientData("no complete Bloch period after the transient".into()));
    }
    let end = first + periods * spp;
    let dt = trace.sample_dt();
    let natural = 2.0 * PI / ((end - first) as f64 * dt);
    let target = w / 100.0;
    if natural > target * (1.0 + 1e-9) {
        log::warn!(
            "{periods} periods give a spectral resolution of omega_B/{:.0}; 100 are needed for omega_B/100",
            w / natural
        );
    }
    let spectrum = analysis::psd(&trace.alpha[first..end], dt, natural.max(target))?;
    let sidebands = analysis::sideband_powers(&spectrum, w)?;
    let loop_work = analysis::loop_work(&trace.times, &trace.centroid, &trace.force, w, t_start)?;
    let overlap_peak = analysis::dominant_frequency(&trace.overlap[first..end], dt)?;
    let window = (end - first) as f64;
    let mean_photons = trace.n_photons[first..end].iter().sum::<f64>() / window;
    let mean_c = trace.overlap[first..end].iter().sum::<f64>() / window;
    Ok(FullAnalysis {
        tilt_energy_per_period: w * velocity.velocity,
        velocity,
        spectrum,
        sidebands,
        loop_work,
        overlap_peak,
        mean_photons,
        mean_delta_f: s.delta_c - s.n_u0() * mean_c,
    })
}

fn analyse_ladder(trace: &LadderTrace, omega_b: f64, t_start: f64) -> Result<LadderAnalysis> {
    let velocity = analysis::numeric_transport_velocity(&trace.times, &trace.centroid, omega_b, t_start)?;
    let spp = analysis::samples_per_period(trace.times[1] - trace.times[0], omega_b)?;
    let first = first_at(&trace.times, t_start);
    let whole = (trace.len() - first) / spp * spp;
    let x: Vec<f64> = trace.b_m[first..first + whole].iter().map(|b| 2.0 * b.re).collect();
    let coherence_peak = analysis::dominant_frequency(&x, trace.times[1] - trace.times[0])?;
    Ok(LadderAnalysis {
        velocity,
        coherence_peak,
    })
}

/// Run one sweep point.
pub fn run_point(cfg: &RunConfig, basis: &WsBasis, elements: &MatrixElements, section: &PhysicalSection) -> Result<PointResult> {
    let setup = resolve_point(section, elements, cfg.scenario.static_lattice).map_err(|e| e.in_stage("parameters"))?;
    let n = &cfg.numerics;
    let s = &setup.scaled;
    let tb = s.bloch_period();
    let (dt, stride) = n.snapped_step(tb);
    let t_final = n.periods * tb;
    let t_start = n.transient_kappa / s.kappa;
    let kind = &cfg.scenario.initial_state;

    let analytic_for = |sigma1: f64| -> Result<Option<AnalyticVelocity>> {
        if setup.static_lattice {
            return Ok(None);
        }
        let a = analysis::analytic_transport_velocity(s, elements, sigma1, setup.alpha0)?;
        if !a.in_regime && n.strict {
            return Err(Error::Regime(format!(
                "u1/omega_B = {:.3} at {}",
                a.u1 / s.omega_b,
                setup.label
            )));
        }
        Ok(Some(a))
    };

    // Initial state on the simulation grid and its first-band projection.
    let grid = SpatialGrid::new(n.box_sites, n.points_per_site)?;
    let support = kind.support();
    let h = n.box_sites as i64 / 2 - wannier_stark::EDGE_MARGIN_SITES;
    let big = basis.translated(&grid, -h..=h - 1).map_err(|e| e.in_stage("basis"))?;
    let psi0 = meanfield::init_wavepacket(kind, &big).map_err(|e| e.in_stage("initial state"))?;
    let proj = wannier_stark::project_onto_ws(&psi0, &big)?;
    let coherence = proj.coherence() / proj.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let (sigma1, theta1) = (coherence.norm(), coherence.arg());
    let analytic = analytic_for(sigma1).map_err(|e| e.in_stage("analytic velocity"))?;

    // Keep the packet and its expected drift 8 sites from the walls.
    let drift = analytic.map_or(0.0, |a| 2.0 * a.drift_from_c1.abs() * n.periods).ceil() as i64;
    let (lo, hi) = grid.site_range();
    let margin = wannier_stark::EDGE_MARGIN_SITES;
    if cfg.scenario.model.full() && (support.start() - drift < lo + margin || support.end() + drift > hi - margin) {
        return Err(Error::param(
            "box_sites",
            format!(
                "packet sites {support:?} plus an expected drift of {drift} sites do not stay {margin} sites inside the box"
            ),
        )
        .in_stage(setup.label.clone()));
    }

    let (trace, full) = if cfg.scenario.model.full() {
        let sim = SimConfig {
            scaled: s.clone(),
            grid: grid.clone(),
            dt,
            t_final,
            sample_stride: stride,
            initial_state: kind.clone(),
            static_depth: setup.static_lattice.then_some(section.target_depth),
            initial_alpha: None,
            edge_tolerance: n.edge_tolerance,
        };
        log::info!("{}: full simulation, {} steps", setup.label, sim.n_steps());
        let trace = meanfield::run(&sim, &big).map_err(|e| e.in_stage(format!("{} simulation", setup.label)))?;
        let full = analyse_full(&trace, &setup, t_start).map_err(|e| e.in_stage(format!("{} analysis", setup.label)))?;
        (Some(trace), Some(full))
    } else {
        (None, None)
    };

    let (ladder_trace, ladder_result) = if cfg.scenario.model.ladder() && !setup.static_lattice {
        let expected = analytic.map_or(0.0, |a| 2.0 * a.drift_from_c1.abs());
        let sites = ladder::ladder_sites(support.clone(), expected, n.periods);
        let amps: Vec<Complex64> = sites
            .clone()
            .map(|site| {
                proj.sites
                    .iter()
                    .position(|k| *k == site)
                    .map_or(Complex64::new(0.0, 0.0), |i| proj.coeffs[i])
            })
            .collect();
        let state = LadderState::new(*sites.start(), &amps, s, elements)?;
        let per_sample = tb / n.samples_per_period as f64;
        let sub = (per_sample / LADDER_MAX_DT).ceil() as usize;
        let ldt = per_sample / sub as f64;
        let steps = (t_final / ldt).round() as usize;
        log::info!("{}: ladder model over sites {sites:?}", setup.label);
        let lt = ladder::run_ladder(state, ldt, steps, sub).map_err(|e| e.in_stage(format!("{} ladder", setup.label)))?;
        let la = analyse_ladder(&lt, s.omega_b, t_start).map_err(|e| e.in_stage(format!("{} ladder analysis", setup.label)))?;
        (Some(lt), Some(la))
    } else {
        (None, None)
    };

    let wr = s.recoil_freq;
    let (photons, delta_f) = match &full {
        Some(f) => (f.mean_photons, f.mean_delta_f),
        None => {
            let dn = ladder_trace
                .as_ref()
                .map_or(0.0, |t| t.delta_n.iter().sum::<f64>() / t.len() as f64);
            (setup.alpha0.norm_sqr() + dn, setup.delta0)
        }
    };
    let metrology = analysis::coherence_time(&setup.physical, photons, delta_f * wr)?;

    Ok(PointResult {
        dt,
        stride,
        sigma1,
        theta1,
        projection_residual: proj.residual,
        analytic,
        trace,
        full,
        ladder_trace,
        ladder: ladder_result,
        metrology,
        setup,
    })
}

/// Run every point, `threads` at a time. Results keep the sweep order.
pub fn run_scenario(cfg: &RunConfig, threads: usize) -> Result<ScenarioReport> {
    cfg.validate()?;
    let (basis, elements) = prepare_basis(cfg).map_err(|e| e.in_stage("basis"))?;
    log::info!(
        "basis: gamma0 {:.6} gamma1 {:.6} Z0 {:.6} Z1 {:.6}",
        elements.gamma0,
        elements.gamma1,
        elements.z0,
        elements.z1
    );
    let points = cfg.points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::param("threads", e.to_string()))?;
    let results: Vec<Result<PointResult>> =
        pool.install(|| points.par_iter().map(|p| run_point(cfg, &basis, &elements, p)).collect());
    Ok(ScenarioReport {
        config: cfg.clone(),
        elements,
        e0: basis.e0,
        points: results.into_iter().collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn elements() -> MatrixElements {
        MatrixElements {
            gamma0: 0.7142860,
            gamma1: -0.0284008,
            z0: -0.0308,
            z1: 2.2514,
        }
    }

    #[test]
    fn point_holds_the_target_depth() {
        let p = resolve_point(&PhysicalSection::sr88(1.3), &elements(), false).unwrap();
        let s = &p.scaled;
        assert!((s.u0 * p.alpha0.norm_sqr() - -3.0).abs() < 1e-10);
        assert!((s.n_u0() + s.kappa).abs() < 1e-12);
        // Δc − NU0 = 1.3κ
        assert!(((s.delta_c - s.n_u0()) / s.kappa - 1.3).abs() < 1e-12);
        assert!((p.delta0 - (s.delta_c - s.n_u0() * 0.714286)).abs() < 1e-7);
        assert!((s.omega_b - 744.5 / 4780.0).abs() < 2e-4);
    }

    #[test]
    fn delta0_sweep_points() {
        let mut sec = PhysicalSection::sr88(0.0);
        sec.offset_kappa = None;
        sec.delta0_kappa = Some(-2.5);
        let p = resolve_point(&sec, &elements(), false).unwrap();
        assert!((p.delta0 / p.scaled.kappa + 2.5).abs() < 1e-12);
        assert!((p.scaled.u0 * p.alpha0.norm_sqr() + 3.0).abs() < 1e-10);
        assert_eq!(p.label, "delta0_kappa_-2.500");
    }

    #[test]
    fn zero_light_shift_is_the_static_limit() {
        let mut sec = PhysicalSection::sr88(1.0);
        sec.light_shift_hz = 0.0;
        let p = resolve_point(&sec, &elements(), false).unwrap();
        assert!(p.static_lattice);
        assert_eq!(p.scaled.eta, 0.0);
    }
}
