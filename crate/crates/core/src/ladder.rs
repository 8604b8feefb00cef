//! Reduced model: first-band Wannier–Stark amplitudes coupled to the field
//! fluctuation Δα = α − α₀.
//!
//! ```text
//! dΔα/dt = (−κ + iδ₀)Δα − iU₀γ₁(α₀ + Δα) Σₙ (dₙ d*ₙ₊₁ + c.c.)
//! i ḋₙ   = nω_B dₙ + U₀γ₁ Δn (dₙ₊₁ + dₙ₋₁)
//! ```
//!
//! The ladder term nω_B dₙ is removed exactly by working with rotating
//! amplitudes aₙ = dₙ e^{inω_B t}, so only the slow coupling is integrated.
//! The global phase ∫U₀γ₀Δn dt drops out of every observable and is not
//! tracked.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::meanfield::InitialState;
use crate::units::ScaledParams;
use crate::wannier_stark::{MatrixElements, Projection};

/// Outer-site population (relative to N) above which a run aborts.
pub const EDGE_POPULATION_LIMIT: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LadderState {
    /// Site of `d[0]`.
    pub first_site: i64,
    /// Rotating amplitudes dₙ e^{inω_B t}, normalised to Σ|dₙ|² = N.
    pub d: Vec<Complex64>,
    pub delta_alpha: Complex64,
    pub time: f64,
    pub alpha0: Complex64,
    pub elements: MatrixElements,
    pub scaled: ScaledParams,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochOscillatorObservables {
    /// ⟨n_M⟩ = Σ n|dₙ|².
    pub n_m: f64,
    /// ⟨b_M⟩ = Σ dₙ* dₙ₊₁ with lab-frame amplitudes.
    pub b_m: Complex64,
    pub sigma1: f64,
    pub theta1: f64,
}

impl BlochOscillatorObservables {
    /// u₁ = 2NU₀γ₁σ₁.
    pub fn u1(&self, scaled: &ScaledParams, elements: &MatrixElements) -> f64 {
        2.0 * scaled.n_u0() * elements.gamma1 * self.sigma1
    }
}

/// α₀ = η/(κ − iδ₀).
pub fn static_field(eta: f64, kappa: f64, delta0: f64) -> Complex64 {
    eta / Complex64::new(kappa, -delta0)
}

/// δ₀ = Δ_c − NU₀γ₀.
pub fn static_detuning(scaled: &ScaledParams, elements: &MatrixElements) -> f64 {
    scaled.delta_c - scaled.n_u0() * elements.gamma0
}

/// Δn = α₀*Δα + α₀Δα* + |Δα|².
pub fn photon_fluctuation(state: &LadderState) -> f64 {
    fluctuation(state.alpha0, state.delta_alpha)
}

fn fluctuation(alpha0: Complex64, da: Complex64) -> f64 {
    2.0 * (alpha0.conj() * da).re + da.norm_sqr()
}

/// Σ aₙ* aₙ₊₁ over the stored (rotating) amplitudes.
fn rotating_coherence(d: &[Complex64]) -> Complex64 {
    d.windows(2).map(|w| w[0].conj() * w[1]).sum()
}

impl LadderState {
    /// Ladder state with Δα = 0 and α₀ from the static field.
    pub fn new(
        first_site: i64,
        amplitudes: &[Complex64],
        scaled: &ScaledParams,
        elements: &MatrixElements,
    ) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::param("amplitudes", "must have finite, non-zero norm"));
        }
        let s = (scaled.n_atoms / norm).sqrt();
        let delta0 = static_detuning(scaled, elements);
        Ok(Self {
            first_site,
            d: amplitudes.iter().map(|c| c * s).collect(),
            delta_alpha: Complex64::new(0.0, 0.0),
            time: 0.0,
            alpha0: static_field(scaled.eta, scaled.kappa, delta0),
            elements: *elements,
            scaled: scaled.clone(),
        })
    }

    /// Ladder state from a projection of ψ onto the WS basis, padded with
    /// `pad` empty sites on each side.
    pub fn from_projection(
        proj: &Projection,
        pad: usize,
        scaled: &ScaledParams,
        elements: &MatrixElements,
    ) -> Result<Self> {
        let first = *proj
            .sites
            .first()
            .ok_or_else(|| Error::InsufficientData("empty projection".into()))?;
        let mut amps = vec![Complex64::new(0.0, 0.0); pad];
        amps.extend_from_slice(&proj.coeffs);
        amps.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), pad));
        Self::new(first - pad as i64, &amps, scaled, elements)
    }

    pub fn last_site(&self) -> i64 {
        self.first_site + self.d.len() as i64 - 1
    }

    pub fn atom_number(&self) -> f64 {
        self.d.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Lab-frame amplitudes dₙ(t).
    pub fn lab_amplitudes(&self) -> Vec<Complex64> {
        let w = self.scaled.omega_b;
        self.d
            .iter()
            .enumerate()
            .map(|(i, a)| a * Complex64::from_polar(1.0, -((self.first_site + i as i64) as f64) * w * self.time))
            .collect()
    }

    pub fn observables(&self, initial: Complex64) -> BlochOscillatorObservables {
        let n_m = self
            .d
            .iter()
            .enumerate()
            .map(|(i, a)| (self.first_site + i as i64) as f64 * a.norm_sqr())
            .sum();
        let b_m = rotating_coherence(&self.d) * Complex64::from_polar(1.0, -self.scaled.omega_b * self.time);
        BlochOscillatorObservables {
            n_m,
            b_m,
            sigma1: initial.norm(),
            theta1: initial.arg(),
        }
    }

    fn outer_population(&self) -> f64 {
        let n = self.d.len();
        let edge = |r: std::ops::Range<usize>| self.d[r].iter().map(|c| c.norm_sqr()).sum::<f64>();
        edge(0..2.min(n)).max(edge(n.saturating_sub(2)..n))
    }
}

/// Rotating-frame amplitudes for a delocalised or localised initial state,
/// unnormalised, together with the first site.
pub fn initial_amplitudes(kind: &InitialState) -> Result<(i64, Vec<Complex64>)> {
    let support = kind.support();
    let first = *support.start();
    match *kind {
        InitialState::Delocalized {
            center_site,
            width_sites,
        } => {
            if !(width_sites > 0.0) {
                return Err(Error::param("width_sites", "must be positive"));
            }
            let amps = support
                .map(|s| {
                    let x = (s - center_site) as f64;
                    Complex64::new((-2.0 * x * x / (width_sites * width_sites)).exp(), 0.0)
                })
                .collect();
            Ok((first, amps))
        }
        InitialState::Localized { center_site } => {
            let amps = support
                .map(|s| Complex64::new(if s == center_site { 1.0 } else { 0.0 }, 0.0))
                .collect();
            Ok((first, amps))
        }
        InitialState::Wannier { .. } => Err(Error::param(
            "initial_state",
            "a Wannier function has no closed-form ladder amplitudes; project it onto the WS basis instead",
        )),
    }
}

/// Site range for a ladder run: the initial support widened by the
/// expected drift plus 10 sites on each side.
pub fn ladder_sites(
    support: std::ops::RangeInclusive<i64>,
    drift_per_period: f64,
    periods: f64,
) -> std::ops::RangeInclusive<i64> {
    let pad = (drift_per_period.abs() * periods).ceil() as i64 + 10;
    support.start() - pad..=support.end() + pad
}

/// Time derivative of (Δα, a) in the rotating frame.
fn rhs(state: &LadderState, t: f64, da: Complex64, a: &[Complex64], dda: &mut Complex64, out: &mut [Complex64]) {
    let g = state.scaled.u0 * state.elements.gamma1;
    let w = state.scaled.omega_b;
    let rot = Complex64::from_polar(1.0, -w * t);
    let x = 2.0 * (rotating_coherence(a) * rot).re;
    let delta0 = static_detuning(&state.scaled, &state.elements);
    let i = Complex64::i();
    *dda = Complex64::new(-state.scaled.kappa, delta0) * da - i * g * x * (state.alpha0 + da);

    let c = g * fluctuation(state.alpha0, da);
    let up = c * rot;
    let down = c * rot.conj();
    let n = a.len();
    for k in 0..n {
        let mut s = Complex64::new(0.0, 0.0);
        if k + 1 < n {
            s += up * a[k + 1];
        }
        if k > 0 {
            s += down * a[k - 1];
        }
        out[k] = -i * s;
    }
}

/// One RK4 step of length dt.
pub fn evolve_ladder(state: &LadderState, dt: f64) -> Result<LadderState> {
    let n_max = state.first_site.abs().max(state.last_site().abs()) as f64;
    if dt * state.scaled.omega_b * n_max >= 0.5 {
        return Err(Error::param(
            "dt",
            format!("dt * omega_B * n_max = {:.3} must stay below 0.5", dt * state.scaled.omega_b * n_max),
        ));
    }
    let n = state.d.len();
    let t0 = state.time;
    let zero = Complex64::new(0.0, 0.0);
    let (mut k1, mut k2, mut k3, mut k4) = (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
    let (mut q1, mut q2, mut q3, mut q4) = (zero, zero, zero, zero);
    let mut tmp = vec![zero; n];

    rhs(state, t0, state.delta_alpha, &state.d, &mut q1, &mut k1);
    for j in 0..n {
        tmp[j] = state.d[j] + 0.5 * dt * k1[j];
    }
    rhs(state, t0 + 0.5 * dt, state.delta_alpha + 0.5 * dt * q1, &tmp, &mut q2, &mut k2);
    for j in 0..n {
        tmp[j] = state.d[j] + 0.5 * dt * k2[j];
    }
    rhs(state, t0 + 0.5 * dt, state.delta_alpha + 0.5 * dt * q2, &tmp, &mut q3, &mut k3);
    for j in 0..n {
        tmp[j] = state.d[j] + dt * k3[j];
    }
    rhs(state, t0 + dt, state.delta_alpha + dt * q3, &tmp, &mut q4, &mut k4);

    let mut next = state.clone();
    for j in 0..n {
        next.d[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    next.delta_alpha += dt / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4);
    next.time = t0 + dt;
    if !next.delta_alpha.is_finite() || next.d.iter().any(|c| !c.is_finite()) {
        return Err(Error::numerical(next.time, "non-finite ladder amplitude"));
    }
    Ok(next)
}

/// ⟨z⟩ = Z₀ + π Σ n|dₙ|²/N + Z₁ Σ (aₙ* aₙ₊₁ e^{−iω_B t} + c.c.)/N.
///
/// The stored amplitudes rotate with e^{inω_B t}, so the explicit phase
/// factor turns the rotating coherence back into the lab-frame one.
pub fn position_from_ladder(state: &LadderState, elements: &MatrixElements) -> f64 {
    let n = state.atom_number();
    let n_m: f64 = state
        .d
        .iter()
        .enumerate()
        .map(|(i, a)| (state.first_site + i as i64) as f64 * a.norm_sqr())
        .sum();
    let coh = rotating_coherence(&state.d) * Complex64::from_polar(1.0, -state.scaled.omega_b * state.time);
    elements.z0 + PI * n_m / n + elements.z1 * 2.0 * coh.re / n
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LadderTrace {
    pub times: Vec<f64>,
    pub n_m: Vec<f64>,
    pub b_m: Vec<Complex64>,
    pub delta_alpha: Vec<Complex64>,
    pub delta_n: Vec<f64>,
    pub centroid: Vec<f64>,
    pub atom_number: Vec<f64>,
}

impl LadderTrace {
    fn push(&mut self, s: &LadderState) {
        let obs = s.observables(Complex64::new(0.0, 0.0));
        self.times.push(s.time);
        self.n_m.push(obs.n_m / s.scaled.n_atoms);
        self.b_m.push(obs.b_m);
        self.delta_alpha.push(s.delta_alpha);
        self.delta_n.push(photon_fluctuation(s));
        self.centroid.push(position_from_ladder(s, &s.elements));
        self.atom_number.push(s.atom_number());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Integrate for `n_steps`, sampling every `stride` steps (and at t = 0).
pub fn run_ladder(initial: LadderState, dt: f64, n_steps: usize, stride: usize) -> Result<LadderTrace> {
    if stride == 0 {
        return Err(Error::param("sample_stride", "must be at least 1"));
    }
    let mut trace = LadderTrace::default();
    let mut state = initial;
    trace.push(&state);
    for k in 1..=n_steps {
        state = evolve_ladder(&state, dt)?;
        if k % stride == 0 {
            let edge = state.outer_population() / state.scaled.n_atoms;
            if edge > EDGE_POPULATION_LIMIT {
                return Err(Error::numerical(
                    state.time,
                    format!("outer ladder sites hold {edge:.2e} of the atoms; widen the site range"),
                ));
            }
            trace.push(&state);
        }
    }
    Ok(trace)
}
