//! Laboratory units to recoil units.
//!
//! Lengths are measured in 1/k_r, energies in E_r = ħω_r and times in 1/ω_r.
//! The lattice period is then π.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const STANDARD_GRAVITY: f64 = 9.80665;
/// Mass of ⁸⁸Sr in kg.
pub const SR88_MASS: f64 = 87.905_612_257_1 * ATOMIC_MASS_UNIT;
pub const SR_INTERCOMBINATION_WAVELENGTH: f64 = 689e-9;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Parameters in SI units. All rates are angular (rad/s).
///
/// `cavity_decay` is the field amplitude decay rate κ; the energy decays at 2κ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub atom_mass: f64,
    /// λ; the lattice period is λ/2.
    pub lattice_wavelength: f64,
    /// F < 0, pointing down the lattice.
    pub bias_force: f64,
    pub cavity_decay: f64,
    /// η = √(Jκ) for an incident photon flux J.
    pub pump_rate: f64,
    pub cavity_detuning: f64,
    /// U₀ = Ω₀²/Δ_a.
    pub atom_light_shift: f64,
    pub atom_number: f64,
    pub atomic_linewidth: f64,
    pub atom_detuning: f64,
    pub pump_frequency: f64,
}

impl PhysicalParams {
    pub fn lattice_period(&self) -> f64 {
        self.lattice_wavelength / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("atom_mass", self.atom_mass),
            ("lattice_wavelength", self.lattice_wavelength),
            ("cavity_decay", self.cavity_decay),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.atom_number >= 1.0) {
            return Err(Error::param("atom_number", "must be at least 1"));
        }
        if !(self.bias_force < 0.0) {
            return Err(Error::param(
                "bias_force",
                format!("must be negative (force down the lattice), got {}", self.bias_force),
            ));
        }
        for (name, v) in [
            ("pump_rate", self.pump_rate),
            ("cavity_detuning", self.cavity_detuning),
            ("atom_light_shift", self.atom_light_shift),
            ("atomic_linewidth", self.atomic_linewidth),
            ("atom_detuning", self.atom_detuning),
            ("pump_frequency", self.pump_frequency),
        ] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        Ok(())
    }

    /// Single-photon Rabi frequency squared, Ω₀² = U₀Δ_a.
    pub fn rabi_frequency_sq(&self) -> f64 {
        self.atom_light_shift * self.atom_detuning
    }

    /// Δ_a → rΔ_a, U₀ → U₀/r, N → rN, η → √r η. The mean-field dynamics is
    /// unchanged by this.
    pub fn rescaled(&self, r: f64) -> Self {
        Self {
            atom_detuning: self.atom_detuning * r,
            atom_light_shift: self.atom_light_shift / r,
            atom_number: self.atom_number * r,
            pump_rate: self.pump_rate * r.sqrt(),
            ..self.clone()
        }
    }
}

/// Bloch frequency |F| d / ħ.
pub fn bloch_frequency(physical: &PhysicalParams) -> f64 {
    physical.bias_force.abs() * physical.lattice_period() / HBAR
}

/// Recoil frequency ħ k_r² / 2m with k_r = 2π/λ.
pub fn recoil_frequency(physical: &PhysicalParams) -> f64 {
    let k = 2.0 * PI / physical.lattice_wavelength;
    HBAR * k * k / (2.0 * physical.atom_mass)
}

/// Bias force that produces the Bloch frequency `omega_b` (rad/s) on a lattice of period `d`.
pub fn force_for_bloch_frequency(omega_b: f64, period: f64) -> f64 {
    -HBAR * omega_b / period
}

/// Dimensionless simulation constants in recoil units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    pub omega_b: f64,
    /// Tilt, always −ω_B/π.
    pub f: f64,
    pub kappa: f64,
    pub eta: f64,
    pub delta_c: f64,
    pub u0: f64,
    pub n_atoms: f64,
    /// ω_r in rad/s, kept for converting results back.
    pub recoil_freq: f64,
}

impl ScaledParams {
    pub fn new(
        omega_b: f64,
        kappa: f64,
        eta: f64,
        delta_c: f64,
        u0: f64,
        n_atoms: f64,
        recoil_freq: f64,
    ) -> Result<Self> {
        if !(omega_b > 0.0) {
            return Err(Error::param("omega_b", "Bloch frequency must be positive"));
        }
        if !(kappa > 0.0) {
            return Err(Error::param("kappa", "cavity decay must be positive"));
        }
        if !(n_atoms >= 1.0) {
            return Err(Error::param("n_atoms", "must be at least 1"));
        }
        Ok(Self {
            omega_b,
            f: -omega_b / PI,
            kappa,
            eta,
            delta_c,
            u0,
            n_atoms,
            recoil_freq,
        })
    }

    pub fn bloch_period(&self) -> f64 {
        2.0 * PI / self.omega_b
    }

    /// N·U₀, the maximal dispersive cavity shift.
    pub fn n_u0(&self) -> f64 {
        self.n_atoms * self.u0
    }
}

pub fn scale(physical: &PhysicalParams) -> Result<ScaledParams> {
    physical.validate()?;
    let wr = recoil_frequency(physical);
    ScaledParams::new(
        bloch_frequency(physical) / wr,
        physical.cavity_decay / wr,
        physical.pump_rate / wr,
        physical.cavity_detuning / wr,
        physical.atom_light_shift / wr,
        physical.atom_number,
        wr,
    )
}

/// Inverse of [`scale`]. Quantities the scaled set does not carry (mass,
/// wavelength, γ, Δ_a, ω_L) are taken from `reference`, whose recoil
/// frequency must match the one stored in `scaled`. Δ_a is adjusted so that
/// Ω₀² of the reference is kept.
pub fn unscale(scaled: &ScaledParams, reference: &PhysicalParams) -> Result<PhysicalParams> {
    let wr = recoil_frequency(reference);
    if ((wr - scaled.recoil_freq) / wr).abs() > 1e-12 {
        return Err(Error::param(
            "recoil_freq",
            "reference parameters have a different recoil frequency",
        ));
    }
    let d = reference.lattice_period();
    Ok(PhysicalParams {
        bias_force: force_for_bloch_frequency(scaled.omega_b * wr, d),
        cavity_decay: scaled.kappa * wr,
        pump_rate: scaled.eta * wr,
        cavity_detuning: scaled.delta_c * wr,
        atom_light_shift: scaled.u0 * wr,
        atom_number: scaled.n_atoms,
        ..reference.clone()
    })
}

/// ⁸⁸Sr on the 689 nm line with the cavity parameters used for the figure
/// presets. The bias force gives ω_B = 2π×744.5 Hz; Δ_c and η are left at
/// zero for the caller to set.
pub fn sr88_reference() -> PhysicalParams {
    let wavelength = SR_INTERCOMBINATION_WAVELENGTH;
    PhysicalParams {
        atom_mass: SR88_MASS,
        lattice_wavelength: wavelength,
        bias_force: force_for_bloch_frequency(2.0 * PI * 744.5, wavelength / 2.0),
        cavity_decay: 2.0 * PI * 1e3,
        pump_rate: 0.0,
        cavity_detuning: 0.0,
        atom_light_shift: -2.0 * PI * 1.0,
        atom_number: 1000.0,
        atomic_linewidth: 2.0 * PI * 7.6e3,
        atom_detuning: -2.0 * PI * 10e6,
        pump_frequency: 2.0 * PI * SPEED_OF_LIGHT / wavelength,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sr_recoil_frequency() {
        let p = sr88_reference();
        let wr = recoil_frequency(&p) / (2.0 * PI);
        assert!((wr - 4.78e3).abs() / 4.78e3 < 0.01, "{wr}");
    }

    #[test]
    fn gravity_bloch_frequency() {
        let mut p = sr88_reference();
        p.bias_force = -SR88_MASS * STANDARD_GRAVITY;
        let wb = bloch_frequency(&p) / (2.0 * PI);
        assert!((wb - 745.0).abs() < 1.0, "{wb}");
    }

    #[test]
    fn trivial_scalings() {
        let p = sr88_reference();
        let mut q = p.clone();
        q.atom_mass *= 4.0;
        assert_relative_eq!(recoil_frequency(&q), recoil_frequency(&p) / 4.0, max_relative = 1e-14);
        let mut q = p.clone();
        q.lattice_wavelength *= 2.0;
        assert_relative_eq!(recoil_frequency(&q), recoil_frequency(&p) / 4.0, max_relative = 1e-14);
        assert_relative_eq!(bloch_frequency(&q), 2.0 * bloch_frequency(&p), max_relative = 1e-14);
        q.bias_force = 0.0;
        assert_eq!(bloch_frequency(&q), 0.0);
    }

    #[test]
    fn figure_values_in_recoil_units() {
        // Ratios of the quoted lab values, ω_r taken as exactly 2π×4.78 kHz.
        let s = scale(&sr88_reference()).unwrap();
        let tol = 0.01;
        assert!((s.omega_b - 744.5 / 4780.0).abs() / 0.15575 < tol);
        assert!((s.kappa - 1000.0 / 4780.0).abs() / 0.20921 < tol);
        assert!((s.u0 + 1.0 / 4780.0).abs() / 2.0921e-4 < tol);
        assert_eq!(s.f, -s.omega_b / PI);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let mut p = sr88_reference();
        p.bias_force = 1e-30;
        assert!(scale(&p).is_err());
        let mut p = sr88_reference();
        p.cavity_decay = 0.0;
        assert!(scale(&p).is_err());
        let mut p = sr88_reference();
        p.atom_number = 0.5;
        assert!(scale(&p).is_err());
    }
}
