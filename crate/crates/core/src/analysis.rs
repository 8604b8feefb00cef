//! Post-processing of traces and the closed-form results of the
//! sideband picture.
//!
//! Spectra use the optical convention: α(t) is the slowly varying
//! amplitude of a field oscillating as e^{−iω_L t}, so a component
//! α ∝ e^{−iωt} is light at ω_L + ω and is plotted at +ω.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::special::bessel_j;
use crate::units::{PhysicalParams, ScaledParams};
use crate::wannier_stark::MatrixElements;

/// Two-sided power spectral density of a complex series.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    /// Angular frequency offsets from the pump, ascending.
    pub frequencies: Vec<f64>,
    /// |X_k|²/(N²Δω), so that Σ psd·Δω is the mean power.
    pub psd: Vec<f64>,
    pub bin_width: f64,
}

impl Spectrum {
    /// Index of the bin nearest to `omega`.
    pub fn bin(&self, omega: f64) -> usize {
        let f0 = self.frequencies[0];
        (((omega - f0) / self.bin_width).round().max(0.0) as usize).min(self.psd.len() - 1)
    }

    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.bin_width
    }
}

/// Periodogram with a rectangular window. `resolution` is the required bin
/// width; the series must be long enough to reach it.
pub fn psd(series: &[Complex64], dt: f64, resolution: f64) -> Result<Spectrum> {
    let n = series.len();
    if !(dt > 0.0) || !(resolution > 0.0) {
        return Err(Error::param("psd", "dt and resolution must be positive"));
    }
    let needed = (2.0 * PI / (resolution * dt) * (1.0 - 1e-9)).ceil() as usize;
    if n < needed.max(2) {
        return Err(Error::InsufficientData(format!(
            "{n} samples give a resolution of {:.3e}, need {needed} for {resolution:.3e}",
            2.0 * PI / (n as f64 * dt)
        )));
    }
    // e^{−iωt} must land at +ω: an inverse transform does exactly that.
    let mut buf = series.to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let dw = 2.0 * PI / (n as f64 * dt);
    let scale = 1.0 / (n as f64 * n as f64 * dw);
    let half = n / 2;
    let mut frequencies = Vec::with_capacity(n);
    let mut power = Vec::with_capacity(n);
    // negative frequencies first
    for k in half + 1..n {
        frequencies.push((k as f64 - n as f64) * dw);
        power.push(buf[k].norm_sqr() * scale);
    }
    for k in 0..=half {
        frequencies.push(k as f64 * dw);
        power.push(buf[k].norm_sqr() * scale);
    }
    Ok(Spectrum {
        frequencies,
        psd: power,
        bin_width: dw,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SidebandPowers {
    pub plus: f64,
    pub minus: f64,
    /// Both sidebands stand clear of the median floor.
    pub resolved: bool,
}

impl SidebandPowers {
    /// (P₊ − P₋)/(P₊ + P₋).
    pub fn asymmetry(&self) -> f64 {
        (self.plus - self.minus) / (self.plus + self.minus)
    }
}

/// Power within ±2 bins of ±ω_B.
pub fn sideband_powers(spec: &Spectrum, omega_b: f64) -> Result<SidebandPowers> {
    if omega_b < 3.0 * spec.bin_width {
        return Err(Error::InsufficientData(format!(
            "bin width {:.3e} does not resolve omega_B = {omega_b:.3e}",
            spec.bin_width
        )));
    }
    let window = |c: usize| {
        let lo = c.saturating_sub(2);
        let hi = (c + 2).min(spec.psd.len() - 1);
        spec.psd[lo..=hi].iter().sum::<f64>() * spec.bin_width
    };
    let plus = window(spec.bin(omega_b));
    let minus = window(spec.bin(-omega_b));
    let mut sorted = spec.psd.clone();
    sorted.sort_by(f64::total_cmp);
    let floor = sorted[sorted.len() / 2] * 5.0 * spec.bin_width;
    let resolved = plus > 10.0 * floor && minus > 10.0 * floor;
    if !resolved {
        log::warn!("sidebands at ±omega_B are within a decade of the noise floor");
    }
    Ok(SidebandPowers { plus, minus, resolved })
}

/// Angular frequency of the strongest non-DC component of a real series.
pub fn dominant_frequency(series: &[f64], dt: f64) -> Result<f64> {
    if series.len() < 4 {
        return Err(Error::InsufficientData("need at least 4 samples".into()));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let z: Vec<Complex64> = series.iter().map(|x| Complex64::new(x - mean, 0.0)).collect();
    let spec = psd(&z, dt, 2.0 * PI / (series.len() as f64 * dt))?;
    let (k, _) = spec
        .psd
        .iter()
        .enumerate()
        .filter(|(k, _)| spec.frequencies[*k] > 0.0)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::InsufficientData("empty spectrum".into()))?;
    Ok(spec.frequencies[k])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityFit {
    /// Drift per Bloch period in lattice sites.
    pub velocity: f64,
    pub stderr: f64,
    pub periods: usize,
    /// RMS residual of the period means about the fit stays within 20% of
    /// the drift per period.
    pub steady: bool,
}

/// Samples per Bloch period, which must be an integer.
pub fn samples_per_period(sample_dt: f64, omega_b: f64) -> Result<usize> {
    let spp = 2.0 * PI / omega_b / sample_dt;
    let r = spp.round();
    if r < 1.0 || (spp - r).abs() > 1e-6 * spp {
        return Err(Error::param(
            "sample_stride",
            format!("{spp:.4} samples per Bloch period is not an integer"),
        ));
    }
    Ok(r as usize)
}

/// Period means of `series`, starting at the first sample at or after
/// `t_start`.
pub fn period_means(times: &[f64], series: &[f64], omega_b: f64, t_start: f64) -> Result<Vec<f64>> {
    if times.len() < 2 || times.len() != series.len() {
        return Err(Error::InsufficientData("series too short or mismatched".into()));
    }
    let spp = samples_per_period(times[1] - times[0], omega_b)?;
    let first = times.iter().position(|t| *t >= t_start - 1e-9).unwrap_or(times.len());
    Ok(series[first..]
        .chunks_exact(spp)
        .map(|c| c.iter().sum::<f64>() / spp as f64)
        .collect())
}

/// Linear fit of the period-averaged centroid against period index,
/// divided by the lattice period π.
pub fn numeric_transport_velocity(times: &[f64], centroid: &[f64], omega_b: f64, t_start: f64) -> Result<VelocityFit> {
    let means = period_means(times, centroid, omega_b, t_start)?;
    let m = means.len();
    if m < 5 {
        return Err(Error::InsufficientData(format!(
            "{m} complete Bloch periods after the transient, need 5"
        )));
    }
    let xm = (m as f64 - 1.0) / 2.0;
    let ym = means.iter().sum::<f64>() / m as f64;
    let sxx: f64 = (0..m).map(|i| (i as f64 - xm).powi(2)).sum();
    let sxy: f64 = means.iter().enumerate().map(|(i, y)| (i as f64 - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let ss: f64 = means
        .iter()
        .enumerate()
        .map(|(i, y)| (y - ym - slope * (i as f64 - xm)).powi(2))
        .sum();
    let rms = (ss / m as f64).sqrt();
    let stderr = (ss / (m as f64 - 2.0) / sxx).sqrt();
    let steady = rms <= 0.2 * slope.abs();
    if !steady {
        log::debug!("period-mean residual {rms:.3e} exceeds 20% of the drift {slope:.3e}");
    }
    Ok(VelocityFit {
        velocity: slope / PI,
        stderr: stderr / PI,
        periods: m,
        steady,
    })
}

/// Closed-form transport velocity of the sideband picture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticVelocity {
    /// s₀γ₁σ₁J₀J₁·8κω_B δ₀/((κ²+δ₁²)(κ²+δ₋₁²)), the detuning form.
    pub v_detuning_form: f64,
    /// s₀γ₁σ₁J₀J₁·2κ[1/(κ²+δ₁²) − 1/(κ²+δ₋₁²)], the sideband form.
    pub v_sideband_form: f64,
    /// Drift per period 2πc₁/ω_B with c₁ the constant part of d⟨n_M⟩/dt/N
    /// obtained by averaging the centroid equation over a period. It is
    /// 2π times the two forms above.
    pub drift_from_c1: f64,
    pub c1: f64,
    pub u1: f64,
    pub delta0: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    /// u₁/ω_B < 1.
    pub in_regime: bool,
}

/// δ₀ recovered from the static field: κ − iδ₀ = η/α₀.
pub fn detuning_from_field(scaled: &ScaledParams, alpha0: Complex64) -> f64 {
    -(scaled.eta / alpha0).im
}

pub fn analytic_transport_velocity(
    scaled: &ScaledParams,
    elements: &MatrixElements,
    sigma1: f64,
    alpha0: Complex64,
) -> Result<AnalyticVelocity> {
    let w = scaled.omega_b;
    let k = scaled.kappa;
    let s0 = scaled.u0 * alpha0.norm_sqr();
    let delta0 = detuning_from_field(scaled, alpha0);
    let dp = delta0 - w;
    let dm = delta0 + w;
    let u1 = 2.0 * scaled.n_u0() * elements.gamma1 * sigma1;
    let y = u1 / w;
    let in_regime = y.abs() < 1.0;
    if !in_regime {
        log::warn!("u1/omega_B = {y:.3} is outside the perturbative regime");
    }
    let pre = s0 * elements.gamma1 * sigma1 * bessel_j(0, y) * bessel_j(1, y);
    let lp = 1.0 / (k * k + dp * dp);
    let lm = 1.0 / (k * k + dm * dm);
    let v26 = pre * 2.0 * k * (lp - lm);
    let v27 = pre * 8.0 * k * w * delta0 * lp * lm;
    let scale = v26.abs().max(v27.abs());
    if (v26 - v27).abs() > 1e-12 * scale {
        return Err(Error::numerical(
            0.0,
            format!("sideband and detuning forms disagree: {v26:e} vs {v27:e}"),
        ));
    }
    let c1 = w * v26;
    Ok(AnalyticVelocity {
        v_detuning_form: v27,
        v_sideband_form: v26,
        drift_from_c1: 2.0 * PI * c1 / w,
        c1,
        u1,
        delta0,
        delta_plus: dp,
        delta_minus: dm,
        in_regime,
    })
}

/// Smallest order whose Bessel weight falls below 1e-10.
fn bessel_cutoff(y: f64) -> i32 {
    let mut n = 1;
    while bessel_j(n, y).abs() >= 1e-10 && n < 200 {
        n += 1;
    }
    n
}

/// Asymptotic field fluctuation under a coherence drive
/// Σ(dₙdₙ₊₁* + c.c.) = 2Nσ₁cos(ω_B t + θ₁):
///
/// Δα(t) = −α₀ e^{−iy sin φ} Σₙ inω_B Jₙ(y) e^{inφ}/(κ − iδₙ),
/// φ = ω_B t + θ₁, y = u₁/ω_B, δₙ = δ₀ − nω_B.
pub fn jacobi_anger_field(scaled: &ScaledParams, u1: f64, theta1: f64, alpha0: Complex64, t: f64) -> Complex64 {
    let w = scaled.omega_b;
    let y = u1 / w;
    let delta0 = detuning_from_field(scaled, alpha0);
    let phi = w * t + theta1;
    let n_max = bessel_cutoff(y);
    let i = Complex64::i();
    let sum: Complex64 = (-n_max..=n_max)
        .map(|n| {
            let dn = delta0 - n as f64 * w;
            i * (n as f64) * w * bessel_j(n, y) * Complex64::from_polar(1.0, n as f64 * phi)
                / Complex64::new(scaled.kappa, -dn)
        })
        .sum();
    -alpha0 * Complex64::from_polar(1.0, -y * phi.sin()) * sum
}

/// |α₀|²J₁(y)²ω_B²[1/(κ²+δ₁²) + 1/(κ²+δ₋₁²)], the period average of |Δα|²
/// with the series cut at |n| ≤ 1.
pub fn mean_fluctuation_photons(scaled: &ScaledParams, u1: f64, alpha0: Complex64) -> f64 {
    let w = scaled.omega_b;
    let k2 = scaled.kappa * scaled.kappa;
    let d0 = detuning_from_field(scaled, alpha0);
    let j1 = bessel_j(1, u1 / w);
    alpha0.norm_sqr() * j1 * j1 * w * w * (1.0 / (k2 + (d0 - w).powi(2)) + 1.0 / (k2 + (d0 + w).powi(2)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopWork {
    /// ∫F d⟨z⟩ along each complete period, positive when the lattice does
    /// work on the atoms.
    pub per_period: Vec<f64>,
    /// Shoelace area of each period's loop, closed by a straight segment;
    /// negative for clockwise traversal.
    pub signed_area: Vec<f64>,
    /// Largest endpoint gap relative to the loop extent.
    pub max_gap: f64,
}

impl LoopWork {
    pub fn mean_work(&self) -> f64 {
        self.per_period.iter().sum::<f64>() / self.per_period.len() as f64
    }

    pub fn mean_area(&self) -> f64 {
        self.signed_area.iter().sum::<f64>() / self.signed_area.len() as f64
    }

    pub fn clockwise(&self) -> bool {
        self.mean_area() < 0.0
    }
}

/// Work and loop orientation in the (centroid, force) plane, one loop per
/// Bloch period. Loops start on period boundaries (t a multiple of 2π/ω_B),
/// the first one at or after `t_start`. The drift leaves each loop open and
/// the closing segment decides its orientation, so the cut has to sit at a
/// fixed Bloch phase.
pub fn loop_work(times: &[f64], centroid: &[f64], force: &[f64], omega_b: f64, t_start: f64) -> Result<LoopWork> {
    if centroid.len() != force.len() || times.len() != force.len() || times.len() < 2 {
        return Err(Error::InsufficientData("mismatched or empty series".into()));
    }
    let spp = samples_per_period(times[1] - times[0], omega_b)?;
    let period = 2.0 * PI / omega_b;
    let boundary = (t_start / period - 1e-9).ceil() * period;
    let first = times.iter().position(|t| *t >= boundary - 1e-9 * period).unwrap_or(times.len());
    let mut out = LoopWork {
        per_period: Vec::new(),
        signed_area: Vec::new(),
        max_gap: 0.0,
    };
    let mut start = first;
    while start + spp < centroid.len() {
        let z = &centroid[start..=start + spp];
        let f = &force[start..=start + spp];
        let work: f64 = (0..spp).map(|i| 0.5 * (f[i] + f[i + 1]) * (z[i + 1] - z[i])).sum();
        let area: f64 = (0..spp)
            .map(|i| {
                let j = (i + 1) % spp;
                z[i] * f[j] - z[j] * f[i]
            })
            .sum::<f64>()
            / 2.0;
        let extent = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - z.iter().cloned().fold(f64::INFINITY, f64::min);
        if extent > 0.0 {
            out.max_gap = out.max_gap.max((z[spp] - z[0]).abs() / extent);
        }
        out.per_period.push(work);
        out.signed_area.push(area);
        start += spp;
    }
    if out.per_period.is_empty() {
        return Err(Error::InsufficientData("no complete Bloch period".into()));
    }
    if out.max_gap > 0.05 {
        log::warn!("loops are open: endpoints differ by {:.1}% of the extent", 100.0 * out.max_gap);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetrologyEstimate {
    /// τ in seconds.
    pub coherence_time: f64,
    /// Ω₀²/(2κγ).
    pub cooperativity: f64,
    pub tau_sp: f64,
    /// 1 + 2C⟨sin²2kz⟩κ²/(κ²+Δ̄_f²) with ⟨sin²2kz⟩ = 1/2.
    pub enhancement: f64,
    pub chi_prime: f64,
    pub wavelength_shift_fraction: f64,
}

/// Momentum-diffusion coherence time. `mean_delta_f` is in rad/s.
pub fn coherence_time(physical: &PhysicalParams, mean_photons: f64, mean_delta_f: f64) -> Result<MetrologyEstimate> {
    if physical.atom_detuning == 0.0 {
        return Err(Error::param("atom_detuning", "must be non-zero"));
    }
    let omega0_sq = physical.rabi_frequency_sq();
    let gamma = physical.atomic_linewidth;
    let kappa = physical.cavity_decay;
    let cooperativity = omega0_sq / (2.0 * kappa * gamma);
    let rate = 2.0 * gamma * mean_photons * omega0_sq / physical.atom_detuning.powi(2);
    let tau_sp = 1.0 / rate;
    let enhancement = 1.0 + 2.0 * cooperativity * 0.5 * kappa * kappa / (kappa * kappa + mean_delta_f * mean_delta_f);
    let (chi_prime, wavelength_shift_fraction) = refractive_estimate(physical, mean_photons);
    Ok(MetrologyEstimate {
        coherence_time: tau_sp / enhancement,
        cooperativity,
        tau_sp,
        enhancement,
        chi_prime,
        wavelength_shift_fraction,
    })
}

/// χ′ = −N U₀/ω_c with the atoms filling the mode volume, and the
/// linewidth-equivalent index shift 2κ/ω_L. The photon number does not
/// enter at large detuning.
pub fn refractive_estimate(physical: &PhysicalParams, _mean_photons: f64) -> (f64, f64) {
    let chi = -physical.atom_number * physical.atom_light_shift / physical.pump_frequency;
    (chi, 2.0 * physical.cavity_decay / physical.pump_frequency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::sr88_reference;
    use approx::assert_relative_eq;

    fn scaled(delta_c: f64) -> ScaledParams {
        let kappa = 1000.0 / 4780.0;
        ScaledParams::new(744.5 / 4780.0, kappa, 25.0, delta_c, -kappa / 1000.0, 1000.0, 1.0).unwrap()
    }

    fn tone(a: Complex64, w: f64, n: usize, dt: f64) -> Vec<Complex64> {
        (0..n).map(|j| a * Complex64::from_polar(1.0, -w * j as f64 * dt)).collect()
    }

    #[test]
    fn constant_series_is_dc_only() {
        let s = psd(&vec![Complex64::new(2.0, 1.0); 256], 0.1, 0.25).unwrap();
        let dc = s.bin(0.0);
        assert_relative_eq!(s.psd[dc] * s.bin_width, 5.0, max_relative = 1e-12);
        let rest: f64 = s.psd.iter().enumerate().filter(|(k, _)| *k != dc).map(|(_, p)| p).sum();
        assert!(rest < 1e-20);
    }

    #[test]
    fn optical_sideband_lands_at_positive_offset() {
        let dt = 0.5;
        let n = 1000;
        let w = 2.0 * PI / (n as f64 * dt) * 10.0;
        let mut x = tone(Complex64::new(0.3, 0.0), w, n, dt);
        for v in &mut x {
            *v += 1.0;
        }
        let s = psd(&x, dt, w / 10.0).unwrap();
        let sb = sideband_powers(&s, w).unwrap();
        assert_relative_eq!(sb.plus, 0.09, max_relative = 1e-10);
        assert!(sb.minus < 1e-20);
        assert_relative_eq!(s.total_power(), 1.09, max_relative = 1e-10);
    }

    #[test]
    fn symmetric_modulation_has_equal_sidebands() {
        let dt = 0.5;
        let n = 1000;
        let w = 2.0 * PI / (n as f64 * dt) * 10.0;
        let x: Vec<Complex64> = (0..n).map(|j| Complex64::new(2.0 * 0.2 * (w * j as f64 * dt).cos(), 0.0)).collect();
        let sb = sideband_powers(&psd(&x, dt, w / 10.0).unwrap(), w).unwrap();
        assert_relative_eq!(sb.plus, sb.minus, max_relative = 1e-10);
    }

    #[test]
    fn psd_rejects_short_series() {
        assert!(matches!(psd(&[Complex64::new(1.0, 0.0); 10], 0.1, 0.5), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn parseval_on_noise_like_series() {
        let x: Vec<Complex64> = (0..777)
            .map(|j| Complex64::new((j as f64 * 0.37).sin() * (j as f64).sqrt(), (j as f64 * 1.1).cos()))
            .collect();
        let s = psd(&x, 0.2, 0.05).unwrap();
        let mean: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64;
        assert_relative_eq!(s.total_power(), mean, max_relative = 1e-10);
    }

    #[test]
    fn dominant_frequency_of_cosine() {
        let dt = 0.1;
        let n = 4000;
        let w = 2.0 * PI / (n as f64 * dt) * 37.0;
        let x: Vec<f64> = (0..n).map(|j| 0.7 + (w * j as f64 * dt + 0.4).cos()).collect();
        assert_relative_eq!(dominant_frequency(&x, dt).unwrap(), w, max_relative = 1e-12);
    }

    #[test]
    fn linear_drift_is_recovered() {
        let w = 0.15;
        let tb = 2.0 * PI / w;
        let spp = 32;
        let dt = tb / spp as f64;
        let times: Vec<f64> = (0..spp * 12).map(|j| j as f64 * dt).collect();
        let z: Vec<f64> = times.iter().map(|t| 0.3 * PI * t / tb + 4.0 * (w * t).cos()).collect();
        let fit = numeric_transport_velocity(&times, &z, w, 0.0).unwrap();
        assert_relative_eq!(fit.velocity, 0.3, max_relative = 1e-12);
        assert_eq!(fit.periods, 12);
        assert!(fit.steady);
        assert!(numeric_transport_velocity(&times[..spp * 4], &z[..spp * 4], w, 0.0).is_err());
    }

    #[test]
    fn velocity_forms_and_limits() {
        let s = scaled(-0.05);
        let el = MatrixElements {
            gamma0: 0.714,
            gamma1: -0.0284,
            z0: 0.0,
            z1: 2.25,
        };
        // α₀ with δ₀ = 0 has zero transport
        let a0 = Complex64::new(s.eta / s.kappa, 0.0);
        let v = analytic_transport_velocity(&s, &el, 0.99, a0).unwrap();
        assert!(v.v_detuning_form.abs() < 1e-18);
        assert!(v.delta0.abs() < 1e-15);
        let a1 = s.eta / Complex64::new(s.kappa, -0.2);
        let v = analytic_transport_velocity(&s, &el, 0.0, a1).unwrap();
        assert_eq!(v.v_detuning_form, 0.0);
        let v = analytic_transport_velocity(&s, &el, 0.9, a1).unwrap();
        assert_relative_eq!(v.delta0, 0.2, max_relative = 1e-12);
        assert_relative_eq!(v.drift_from_c1, 2.0 * PI * v.v_sideband_form, max_relative = 1e-12);
        assert!(v.in_regime);
    }

    #[test]
    fn field_vanishes_without_coupling() {
        let s = scaled(0.1);
        let a0 = s.eta / Complex64::new(s.kappa, -0.1);
        assert_eq!(jacobi_anger_field(&s, 0.0, 0.3, a0, 50.0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn bessel_series_solves_driven_field() {
        // dΔα/dt = [−κ + i(δ₀ − u₁cos φ)]Δα − iu₁cos φ α₀, integrated directly
        let s = scaled(0.0);
        let d0 = 0.13;
        let a0 = s.eta / Complex64::new(s.kappa, -d0);
        let (u1, th) = (0.05, 0.7);
        let i = Complex64::i();
        let f = |t: f64, x: Complex64| {
            let c = u1 * (s.omega_b * t + th).cos();
            Complex64::new(-s.kappa, d0 - c) * x - i * c * a0
        };
        let (mut x, mut t, h) = (Complex64::new(0.0, 0.0), 0.0, 0.01);
        while t < 200.0 {
            let k1 = f(t, x);
            let k2 = f(t + h / 2.0, x + h / 2.0 * k1);
            let k3 = f(t + h / 2.0, x + h / 2.0 * k2);
            let k4 = f(t + h, x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        let want = jacobi_anger_field(&s, u1, th, a0, t);
        assert!((x - want).norm() < 1e-3 * want.norm(), "{x} vs {want}");
    }

    #[test]
    fn static_and_drifting_loops() {
        let w = 0.2;
        let spp = 64;
        let dt = 2.0 * PI / w / spp as f64;
        let times: Vec<f64> = (0..=spp * 3).map(|j| j as f64 * dt).collect();
        let z: Vec<f64> = times.iter().map(|t| (w * t).cos()).collect();
        // force in phase with position: no area
        let f0: Vec<f64> = times.iter().map(|t| 0.5 * (w * t).cos()).collect();
        let lw = loop_work(&times, &z, &f0, w, 0.0).unwrap();
        assert!(lw.mean_work().abs() < 1e-12);
        // force leading position by a quarter period: z = cos, F = −sin
        let f1: Vec<f64> = times.iter().map(|t| -(w * t).sin()).collect();
        let lw = loop_work(&times, &z, &f1, w, 0.0).unwrap();
        // (cos, −sin) runs clockwise and ∮F dz = ∫ sin² = π
        assert!(lw.clockwise());
        assert_relative_eq!(lw.mean_work(), PI, max_relative = 1e-2);
        assert_relative_eq!(lw.mean_area(), -PI, max_relative = 1e-2);
    }

    #[test]
    fn loops_are_cut_on_period_boundaries() {
        let w = 0.2;
        let spp = 64;
        let dt = 2.0 * PI / w / spp as f64;
        let times: Vec<f64> = (0..=spp * 4).map(|j| j as f64 * dt).collect();
        // drifting zigzag: the orientation only exists through the cut
        let z: Vec<f64> = times.iter().map(|t| (w * t).cos() + 0.01 * t).collect();
        let f: Vec<f64> = times.iter().map(|t| -(w * t).cos()).collect();
        let a = loop_work(&times, &z, &f, w, 0.3 * 2.0 * PI / w).unwrap();
        let b = loop_work(&times, &z, &f, w, 2.0 * PI / w).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.per_period.len(), 3);
        assert!(a.clockwise());
    }

    #[test]
    fn coherence_time_limits() {
        let p = sr88_reference();
        let est = coherence_time(&p, 14_000.0, 0.0).unwrap();
        assert_relative_eq!(est.cooperativity, 1e7 / (2.0 * 1e3 * 7.6e3), max_relative = 1e-9);
        let mut none = p.clone();
        none.atomic_linewidth = 1e12;
        let est = coherence_time(&none, 14_000.0, 0.0).unwrap();
        assert_relative_eq!(est.coherence_time, est.tau_sp, max_relative = 1e-3);
        let mut dark = p.clone();
        dark.atom_light_shift = 0.0;
        assert_eq!(refractive_estimate(&dark, 1.0).0, 0.0);
    }
}
