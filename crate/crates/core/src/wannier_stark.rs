//! Wannier–Stark states of the tilted lattice −∂² + s₀cos²z + (ω_B/π)z.
//!
//! The Hamiltonian is diagonalised densely on a periodic box with a spectral
//! (Fourier) kinetic term, the same kinetic operator the split-step
//! propagator uses. The tilt jumps back at the box boundary, which acts as a
//! wall; states near it are distorted and dropped. First-band states are
//! picked out by their local energy E − (ω_B/π)⟨z⟩, which is the same for
//! every rung of one band.
//!
//! Phases follow translation: φ_{n}(z) = φ_0(z − nπ), with φ_0 positive at
//! its centroid. γ₁ and Z₁ are then real and carry their natural sign.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::meanfield::WaveFunction;

/// Sites this close to the box edge are never handed out.
pub const EDGE_MARGIN_SITES: i64 = 8;

#[derive(Clone, Debug)]
pub struct WsBasis {
    pub grid: SpatialGrid,
    /// Real-valued φ_n sampled on `grid`, in the order of `site_indices`.
    pub states: Vec<Vec<f64>>,
    pub site_indices: Vec<i64>,
    /// E_n − e₀.
    pub energies: Vec<f64>,
    /// Eigenvalue of the site-0 state before it is zeroed.
    pub e0: f64,
    pub s0: f64,
    pub omega_b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixElements {
    pub gamma0: f64,
    pub gamma1: f64,
    pub z0: f64,
    pub z1: f64,
}

/// Expansion of a wavefunction in the first band.
#[derive(Clone, Debug)]
pub struct Projection {
    pub sites: Vec<i64>,
    pub coeffs: Vec<Complex64>,
    /// 1 − Σ|c_n|².
    pub residual: f64,
}

impl Projection {
    /// Σ c_n* c_{n+1}, the site-to-site coherence σ₁e^{iθ₁} per atom.
    pub fn coherence(&self) -> Complex64 {
        self.coeffs
            .windows(2)
            .map(|w| w[0].conj() * w[1])
            .sum()
    }
}

/// Real-space row of the periodic spectral second-derivative operator:
/// t[r] = (1/N) Σ_m k_m² cos(k_m r dz).
pub fn spectral_kinetic_row(grid: &SpatialGrid) -> Vec<f64> {
    let n = grid.n_points;
    let k = grid.wavenumbers();
    (0..n)
        .map(|r| {
            k.iter()
                .map(|&km| km * km * (km * r as f64 * grid.dz).cos())
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

fn well_offset(s0: f64) -> f64 {
    if s0 < 0.0 {
        0.0
    } else {
        PI / 2.0
    }
}

/// Diagonalise on `grid` and return `n_sites` first-band states centred on
/// site 0 (sites −n_sites/2 .. n_sites − n_sites/2 − 1).
pub fn compute_ws_basis(s0: f64, omega_b: f64, grid: &SpatialGrid, n_sites: usize) -> Result<WsBasis> {
    compute_ws_basis_in(s0, omega_b, grid, n_sites, None)
}

/// [`compute_ws_basis`] with a choice of space. `None` uses the whole grid;
/// the states are then true eigenstates of the box, including a weak
/// downhill Landau–Zener tail (amplitude ~3e-5 per site at s0 = −3) that
/// differs from rung to rung. `Some(k)` diagonalises the tilt inside the
/// lowest k bands of the untilted lattice; `Some(1)` is the single-band
/// model without interband polarisation.
pub fn compute_ws_basis_in(
    s0: f64,
    omega_b: f64,
    grid: &SpatialGrid,
    n_sites: usize,
    bands: Option<usize>,
) -> Result<WsBasis> {
    if !s0.is_finite() || s0.abs() < 1.0 {
        return Err(Error::param(
            "s0",
            format!("lattice depth {s0} too shallow for localised Wannier-Stark states (need |s0| >= 1)"),
        ));
    }
    if !(omega_b > 0.0) || !omega_b.is_finite() {
        return Err(Error::param("omega_b", "a positive tilt is required"));
    }
    if grid.points_per_site < 16 {
        return Err(Error::param("points_per_site", "need at least 16 points per period"));
    }
    let n = grid.n_points;
    let z = grid.positions();
    let slope = omega_b / PI;
    let (eigenvalues, eigenvectors): (Vec<f64>, DMatrix<f64>) = match bands {
        None => {
            let t = spectral_kinetic_row(grid);
            let h = DMatrix::from_fn(n, n, |i, j| {
                let r = if i >= j { i - j } else { j - i };
                let mut v = t[r];
                if i == j {
                    v += s0 * z[i].cos().powi(2) + slope * z[i];
                }
                v
            });
            log::debug!("diagonalising {n}x{n} Wannier-Stark Hamiltonian");
            let eig = SymmetricEigen::new(h);
            (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
        }
        Some(nb) => {
            // Lowest `nb` bands of the untilted lattice, then the tilt inside them.
            let m = nb * grid.n_sites();
            if nb == 0 || m > n {
                return Err(Error::param("bands", "must be between 1 and points_per_site"));
            }
            let (u, band_energies) = untilted_bands(s0, grid, nb);
            let mut uz = u.clone();
            for (i, mut row) in uz.row_iter_mut().enumerate() {
                row *= slope * z[i];
            }
            let mut hp = u.transpose() * uz;
            for (k, e) in band_energies.iter().enumerate() {
                hp[(k, k)] += e;
            }
            log::debug!("diagonalising {m}x{m} band-projected Wannier-Stark Hamiltonian");
            let eig = SymmetricEigen::new(hp);
            let vecs = &u * &eig.eigenvectors;
            (eig.eigenvalues.iter().copied().collect(), vecs)
        }
    };

    let offset = well_offset(s0);
    let half_width = (grid.z_max - grid.z_min) / 2.0;
    let centre = grid.z_min + half_width;
    struct Cand {
        energy: f64,
        centroid: f64,
        col: usize,
    }
    let mut cands: Vec<Cand> = (0..eigenvalues.len())
        .map(|c| {
            let v = eigenvectors.column(c);
            let norm: f64 = v.iter().map(|x| x * x).sum();
            let centroid = v.iter().zip(&z).map(|(x, zz)| x * x * zz).sum::<f64>() / norm;
            Cand {
                energy: eigenvalues[c],
                centroid,
                col: c,
            }
        })
        .collect();
    let local = |c: &Cand| c.energy - slope * c.centroid;
    let reference = cands
        .iter()
        .filter(|c| (c.centroid - centre).abs() < half_width / 2.0)
        .map(|c| local(c))
        .fold(f64::INFINITY, f64::min);
    if !reference.is_finite() {
        return Err(Error::Basis("no states in the central region".into()));
    }
    cands.retain(|c| (local(c) - reference).abs() < 0.5 * omega_b);
    cands.sort_by(|a, b| a.centroid.total_cmp(&b.centroid));

    let (lo, hi) = grid.site_range();
    let (use_lo, use_hi) = (lo + EDGE_MARGIN_SITES, hi - EDGE_MARGIN_SITES);
    let mut band: Vec<(i64, &Cand)> = cands
        .iter()
        .map(|c| (((c.centroid - offset) / PI).round() as i64, c))
        .filter(|(s, _)| (use_lo..=use_hi).contains(s))
        .collect();
    band.dedup_by_key(|(s, _)| *s);
    for w in band.windows(2) {
        if w[1].0 != w[0].0 + 1 {
            return Err(Error::Basis(format!(
                "first band is not a contiguous ladder (sites {} and {})",
                w[0].0, w[1].0
            )));
        }
        let spacing = w[1].1.energy - w[0].1.energy;
        if ((spacing - omega_b) / omega_b).abs() > 0.05 {
            return Err(Error::Basis(format!(
                "level spacing {spacing:.6} between sites {} and {} deviates from omega_B = {omega_b:.6} by more than 5%; lattice too shallow or box too small",
                w[0].0, w[1].0
            )));
        }
    }

    let first = -((n_sites / 2) as i64);
    let last = first + n_sites as i64 - 1;
    if band.is_empty() || band[0].0 > first || band[band.len() - 1].0 < last {
        return Err(Error::Basis(format!(
            "requested sites {first}..={last} are not all at least {EDGE_MARGIN_SITES} sites inside the box"
        )));
    }
    band.retain(|(s, _)| (first..=last).contains(s));

    let column = |c: usize| -> Vec<f64> { eigenvectors.column(c).iter().map(|x| x / grid.dz.sqrt()).collect() };
    let centre_pos = band.iter().position(|(s, _)| *s == 0).expect("site 0 in range");
    let mut phi0 = column(band[centre_pos].1.col);
    let peak = ((band[centre_pos].1.centroid - grid.z_min) / grid.dz).round() as usize;
    if phi0[peak] < 0.0 {
        phi0.iter_mut().for_each(|x| *x = -*x);
    }
    let e0 = band[centre_pos].1.energy;

    let mut states = Vec::with_capacity(band.len());
    let mut site_indices = Vec::with_capacity(band.len());
    let mut energies = Vec::with_capacity(band.len());
    for (s, c) in &band {
        let mut phi = if *s == 0 { phi0.clone() } else { column(c.col) };
        let shift = *s * grid.points_per_site as i64;
        let overlap: f64 = (0..n as i64)
            .filter_map(|j| {
                let src = j - shift;
                (0..n as i64).contains(&src).then(|| phi[j as usize] * phi0[src as usize])
            })
            .sum();
        if overlap < 0.0 {
            phi.iter_mut().for_each(|x| *x = -*x);
        }
        states.push(phi);
        site_indices.push(*s);
        energies.push(c.energy - e0);
    }
    Ok(WsBasis {
        grid: grid.clone(),
        states,
        site_indices,
        energies,
        e0,
        s0,
        omega_b,
    })
}

impl WsBasis {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, site: i64) -> Option<&[f64]> {
        let first = *self.site_indices.first()?;
        let k = site.checked_sub(first)?;
        self.states.get(usize::try_from(k).ok()?).map(|v| v.as_slice())
    }

    /// Copies of φ_0 translated to each of `sites` on a (typically larger)
    /// grid with the same spacing. Tails beyond this basis' box are cut off.
    pub fn translated(&self, target: &SpatialGrid, sites: std::ops::RangeInclusive<i64>) -> Result<WsBasis> {
        if target.points_per_site != self.grid.points_per_site {
            return Err(Error::param(
                "points_per_site",
                "basis and simulation grids must have the same resolution",
            ));
        }
        let (lo, hi) = target.site_range();
        if *sites.start() < lo + EDGE_MARGIN_SITES || *sites.end() > hi - EDGE_MARGIN_SITES {
            return Err(Error::param(
                "box_sites",
                format!("sites {sites:?} reach within {EDGE_MARGIN_SITES} sites of the box edge"),
            ));
        }
        let phi0 = self.state(0).ok_or_else(|| Error::Basis("basis has no site-0 state".into()))?;
        let pps = target.points_per_site as i64;
        // Offset between grid index 0 of the two boxes, in points.
        let base = ((self.grid.z_min - target.z_min) / target.dz).round() as i64;
        let mut states = Vec::new();
        let mut site_indices = Vec::new();
        let mut energies = Vec::new();
        for s in sites {
            let mut phi = vec![0.0; target.n_points];
            let start = base + s * pps;
            for (i, &v) in phi0.iter().enumerate() {
                let j = start + i as i64;
                if (0..target.n_points as i64).contains(&j) {
                    phi[j as usize] = v;
                }
            }
            states.push(phi);
            site_indices.push(s);
            energies.push(s as f64 * self.omega_b);
        }
        Ok(WsBasis {
            grid: target.clone(),
            states,
            site_indices,
            energies,
            e0: self.e0,
            s0: self.s0,
            omega_b: self.omega_b,
        })
    }

    /// Columnar text export: z followed by one column per state, then a
    /// commented footer with energies and matrix elements.
    pub fn write_columns<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "# z")?;
        for s in &self.site_indices {
            write!(out, ",phi_{s}")?;
        }
        writeln!(out)?;
        for j in 0..self.grid.n_points {
            write!(out, "{:.12e}", self.grid.z(j))?;
            for st in &self.states {
                write!(out, ",{:.12e}", st[j])?;
            }
            writeln!(out)?;
        }
        writeln!(out, "# e0 = {:.15e}, s0 = {}, omega_B = {}", self.e0, self.s0, self.omega_b)?;
        for (s, e) in self.site_indices.iter().zip(&self.energies) {
            writeln!(out, "# E_{s} - e0 = {e:.15e}")?;
        }
        if let Ok(m) = matrix_elements(self) {
            writeln!(
                out,
                "# gamma0 = {:.15e}, gamma1 = {:.15e}, Z0 = {:.15e}, Z1 = {:.15e}",
                m.gamma0, m.gamma1, m.z0, m.z1
            )?;
        }
        Ok(())
    }
}

/// Eigenvectors (columns, unit Euclidean norm) and energies of the lowest
/// `nb` bands of −∂² + s₀cos²z on the periodic grid, ascending.
fn untilted_bands(s0: f64, grid: &SpatialGrid, nb: usize) -> (DMatrix<f64>, Vec<f64>) {
    let n = grid.n_points;
    let z = grid.positions();
    let t = spectral_kinetic_row(grid);
    let h = DMatrix::from_fn(n, n, |i, j| {
        let r = if i >= j { i - j } else { j - i };
        t[r] + if i == j { s0 * z[i].cos().powi(2) } else { 0.0 }
    });
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let m = nb * grid.n_sites();
    let cols: Vec<_> = order[..m].iter().map(|&c| eig.eigenvectors.column(c).into_owned()).collect();
    (DMatrix::from_columns(&cols), order[..m].iter().map(|&c| eig.eigenvalues[c]).collect())
}

/// Wannier function of the untilted lattice at site 0: a narrow Gaussian
/// in the well, projected onto the first band of a periodic box of
/// `box_sites` periods. Returns the box grid and the normalised function.
pub fn wannier_function(s0: f64, points_per_site: usize, box_sites: usize) -> Result<(SpatialGrid, Vec<f64>)> {
    if !s0.is_finite() || s0 == 0.0 {
        return Err(Error::param("s0", "a nonzero lattice depth is required"));
    }
    let grid = SpatialGrid::new(box_sites, points_per_site)?;
    let z = grid.positions();
    let (u, _) = untilted_bands(s0, &grid, 1);
    let offset = well_offset(s0);
    let seed = DVector::from_iterator(
        grid.n_points,
        z.iter().map(|zz| (-(zz - offset).powi(2) / (2.0 * 0.3f64.powi(2))).exp()),
    );
    let proj = &u * (u.transpose() * seed);
    let mut w: Vec<f64> = proj.iter().copied().collect();
    let norm = (w.iter().map(|x| x * x).sum::<f64>() * grid.dz).sqrt();
    w.iter_mut().for_each(|x| *x /= norm);
    Ok((grid, w))
}

/// γ₀, γ₁, Z₀, Z₁ evaluated on sites 0 and 1.
pub fn matrix_elements(basis: &WsBasis) -> Result<MatrixElements> {
    matrix_elements_at(basis, 0)
}

/// Same as [`matrix_elements`] on sites `n`, `n + 1`, with Z₀ shifted back
/// by nπ so all interior choices agree.
pub fn matrix_elements_at(basis: &WsBasis, n: i64) -> Result<MatrixElements> {
    let a = basis
        .state(n)
        .ok_or_else(|| Error::Basis(format!("no state for site {n}")))?;
    let b = basis
        .state(n + 1)
        .ok_or_else(|| Error::Basis(format!("no state for site {}", n + 1)))?;
    let g = &basis.grid;
    let (mut g0, mut g1, mut z0, mut z1) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..g.n_points {
        let z = g.z(j);
        let c2 = z.cos().powi(2);
        g0 += a[j] * a[j] * c2;
        g1 += a[j] * b[j] * c2;
        z0 += a[j] * a[j] * z;
        z1 += a[j] * b[j] * z;
    }
    let dz = g.dz;
    Ok(MatrixElements {
        gamma0: g0 * dz,
        gamma1: g1 * dz,
        z0: z0 * dz - n as f64 * PI,
        z1: z1 * dz,
    })
}

/// c_n = ∫φ_n ψ dz over all sites of the basis.
pub fn project_onto_ws(psi: &WaveFunction, basis: &WsBasis) -> Result<Projection> {
    if psi.grid != basis.grid {
        return Err(Error::param("grid", "wavefunction and basis live on different grids"));
    }
    let dz = basis.grid.dz;
    let coeffs: Vec<Complex64> = basis
        .states
        .iter()
        .map(|phi| phi.iter().zip(&psi.values).map(|(p, v)| v * *p).sum::<Complex64>() * dz)
        .collect();
    let captured: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let residual = psi.norm() - captured;
    if residual > 1e-3 {
        log::warn!("{:.2e} of the population lies outside the first-band basis", residual);
    }
    Ok(Projection {
        sites: basis.site_indices.clone(),
        coeffs,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis() -> WsBasis {
        let g = SpatialGrid::new(32, 16).unwrap();
        compute_ws_basis(-3.0, 0.15575, &g, 14).unwrap()
    }

    #[test]
    fn kinetic_row_is_minus_second_derivative() {
        // Acting on cos(kz) with k on the grid gives k² cos(kz).
        let g = SpatialGrid::new(4, 16).unwrap();
        let t = spectral_kinetic_row(&g);
        let k = 3.0 * 2.0 * PI / (g.n_points as f64 * g.dz);
        let n = g.n_points;
        for i in [0, 5, 17] {
            let v: f64 = (0..n).map(|j| t[(i + n - j) % n] * (k * g.z(j)).cos()).sum();
            assert!((v - k * k * (k * g.z(i)).cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let g = SpatialGrid::new(32, 16).unwrap();
        assert!(compute_ws_basis(0.0, 0.15575, &g, 4).is_err());
        assert!(compute_ws_basis(-0.5, 0.15575, &g, 4).is_err());
        assert!(compute_ws_basis(-3.0, 0.0, &g, 4).is_err());
    }

    #[test]
    fn centroids_step_by_pi() {
        let b = basis();
        let m0 = matrix_elements_at(&b, -2).unwrap();
        let m1 = matrix_elements_at(&b, 1).unwrap();
        assert!((m0.z0 - m1.z0).abs() < 1e-6);
    }

    #[test]
    fn projecting_a_basis_state() {
        let b = basis();
        let phi = b.state(0).unwrap();
        let psi = WaveFunction::from_real(b.grid.clone(), phi);
        let p = project_onto_ws(&psi, &b).unwrap();
        for (s, c) in p.sites.iter().zip(&p.coeffs) {
            let expect = if *s == 0 { 1.0 } else { 0.0 };
            assert!((c - expect).norm() < 1e-8, "site {s}: {c}");
        }
        assert!(p.coherence().norm() < 1e-8);
    }

    #[test]
    fn two_site_superposition_has_half_coherence() {
        let b = basis();
        let v: Vec<f64> = b
            .state(0)
            .unwrap()
            .iter()
            .zip(b.state(1).unwrap())
            .map(|(x, y)| (x + y) / 2f64.sqrt())
            .collect();
        let p = project_onto_ws(&WaveFunction::from_real(b.grid.clone(), &v), &b).unwrap();
        assert!((p.coherence().norm() - 0.5).abs() < 1e-8);
    }
}
