//! Rician channel synthesis over the preset lattice.
//!
//! Each link mixes a plane-wave line-of-sight response with a spatially
//! correlated scattered field. The scattered field is colored with the
//! eigendecomposition of a sinc (Jakes) correlation matrix built from the
//! lattice geometry, so one decomposition serves all three links.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Placement, Point, SurfaceGeometry};

/// Eigenvalues below this magnitude are treated as zero.
pub const EIGEN_CLAMP_TOL: f64 = 1e-10;

/// Large-scale and angular parameters of one link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// Linear Rician factor; `f64::INFINITY` gives a pure line-of-sight link.
    pub rician_k: f64,
    /// Link length in meters.
    pub distance: f64,
    pub path_loss_exponent: f64,
    /// Azimuth angle at the surface, radians.
    pub azimuth: f64,
    /// Elevation angle at the surface, radians.
    pub elevation: f64,
}

impl LinkParams {
    fn validate(&self, name: &str) -> Result<()> {
        if !(self.rician_k >= 0.0) {
            return Err(Error::Channel(format!(
                "{name}: Rician factor must be non-negative, got {}",
                self.rician_k
            )));
        }
        if !(self.path_loss_exponent > 0.0 && self.path_loss_exponent.is_finite()) {
            return Err(Error::Channel(format!(
                "{name}: path-loss exponent must be positive, got {}",
                self.path_loss_exponent
            )));
        }
        if !self.azimuth.is_finite() || !self.elevation.is_finite() {
            return Err(Error::Channel(format!("{name}: angles must be finite")));
        }
        path_loss(self.distance, self.path_loss_exponent).map(|_| ())
    }

    /// Amplitude weights of the line-of-sight and scattered parts.
    pub fn rician_weights(&self) -> (f64, f64) {
        if self.rician_k.is_infinite() {
            (1.0, 0.0)
        } else {
            let k = self.rician_k;
            ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
        }
    }
}

/// Parameters for the BS→surface, surface→reflect-user and
/// surface→transmit-user links.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Departure angle at the base station, radians.
    pub bs_departure: f64,
    pub incident: LinkParams,
    pub reflect: LinkParams,
    pub transmit: LinkParams,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !self.bs_departure.is_finite() {
            return Err(Error::Channel("BS departure angle must be finite".into()));
        }
        self.incident.validate("incident link")?;
        self.reflect.validate("reflect link")?;
        self.transmit.validate("transmit link")
    }
}

/// Plane-wave response of the surface at `positions`.
pub fn surface_steering(
    azimuth: f64,
    elevation: f64,
    positions: &[Point],
    wavelength: f64,
) -> Vec<Complex64> {
    let k = 2.0 * PI / wavelength;
    let (ux, uy) = (azimuth.sin() * elevation.cos(), elevation.sin());
    positions
        .iter()
        .map(|p| Complex64::from_polar(1.0, k * (p.x * ux + p.y * uy)))
        .collect()
}

/// Half-wavelength uniform linear array response at the base station.
pub fn bs_steering(departure: f64, n_antennas: usize) -> Vec<Complex64> {
    let phase = PI * departure.sin();
    (0..n_antennas)
        .map(|k| Complex64::from_polar(1.0, k as f64 * phase))
        .collect()
}

/// `sin(πt)/(πt)` with `sinc(0) = 1`.
pub fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        let a = PI * t;
        a.sin() / a
    }
}

/// `distance^(-alpha)`.
pub fn path_loss(distance: f64, alpha: f64) -> Result<f64> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::Channel(format!(
            "link distance must be positive, got {distance}"
        )));
    }
    Ok(distance.powf(-alpha))
}

/// Spatial correlation of the lattice and its eigendecomposition.
#[derive(Clone, Debug)]
pub struct CorrelationModel {
    pub matrix: DMatrix<f64>,
    pub eigvecs: DMatrix<f64>,
    /// Clamped eigenvalues, all non-negative.
    pub eigvals: DVector<f64>,
    /// `U Λ^{1/2}`, maps white samples onto the correlated field.
    coloring: DMatrix<f64>,
}

impl CorrelationModel {
    /// Builds the model from a symmetric correlation matrix.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::Channel("correlation matrix must be square".into()));
        }
        let eig = SymmetricEigen::new(matrix.clone());
        let eigvals = eig
            .eigenvalues
            .map(|v| if v < EIGEN_CLAMP_TOL { 0.0 } else { v });
        let mut coloring = eig.eigenvectors.clone();
        for (mut col, &v) in coloring.column_iter_mut().zip(eigvals.iter()) {
            col *= v.sqrt();
        }
        Ok(Self {
            matrix,
            eigvecs: eig.eigenvectors,
            eigvals,
            coloring,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `U Λ Uᵀ` from the clamped spectrum.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.coloring * self.coloring.transpose()
    }

    /// Relative Frobenius error of [`Self::reconstruct`] against the matrix.
    pub fn reconstruction_error(&self) -> f64 {
        (self.reconstruct() - &self.matrix).norm() / self.matrix.norm()
    }
}

/// Sinc correlation over the full preset lattice.
pub fn correlation_matrix(geom: &SurfaceGeometry) -> Result<CorrelationModel> {
    let (cols, rows) = (geom.lattice_cols(), geom.lattice_rows());
    if cols < 2 || rows < 2 {
        return Err(Error::Geometry(format!(
            "correlation needs at least 2 lattice points per axis, got {cols} x {rows}"
        )));
    }
    let (pitch_h, pitch_v) = geom.lattice_pitch();
    let scale = 2.0 / geom.wavelength();
    // entries depend only on the index offsets
    let table: Vec<f64> = (0..rows)
        .flat_map(|dv| {
            (0..cols).map(move |dh| sinc(scale * (dh as f64 * pitch_h).hypot(dv as f64 * pitch_v)))
        })
        .collect();
    let n = cols * rows;
    let matrix = DMatrix::from_fn(n, n, |a, b| {
        let dh = (a % cols).abs_diff(b % cols);
        let dv = (a / cols).abs_diff(b / cols);
        table[dv * cols + dh]
    });
    CorrelationModel::from_matrix(matrix)
}

/// Draws `U Λ^{1/2} h̄` with `h̄` i.i.d. CN(0, 1).
pub fn correlated_nlos<R: Rng + ?Sized>(corr: &CorrelationModel, rng: &mut R) -> Vec<Complex64> {
    let n = corr.dim();
    let mut re = DVector::zeros(n);
    let mut im = DVector::zeros(n);
    for i in 0..n {
        re[i] = rng.sample::<f64, _>(StandardNormal) * FRAC_1_SQRT_2;
        im[i] = rng.sample::<f64, _>(StandardNormal) * FRAC_1_SQRT_2;
    }
    let re = &corr.coloring * re;
    let im = &corr.coloring * im;
    re.iter()
        .zip(im.iter())
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect()
}

/// One draw of all three channels over the full lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub h_f: Vec<Complex64>,
    pub h_r: Vec<Complex64>,
    pub h_t: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn len(&self) -> usize {
        self.h_f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h_f.is_empty()
    }
}

/// Channels seen by the placed elements.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementChannels {
    pub h_f: Vec<Complex64>,
    pub h_r: Vec<Complex64>,
    pub h_t: Vec<Complex64>,
}

/// Geometry together with its precomputed correlation model.
#[derive(Clone, Debug)]
pub struct ChannelModel {
    geometry: SurfaceGeometry,
    correlation: CorrelationModel,
    lattice: Vec<Point>,
}

impl ChannelModel {
    pub fn new(geometry: SurfaceGeometry) -> Result<Self> {
        let correlation = correlation_matrix(&geometry)?;
        let lattice = (0..geometry.num_presets())
            .map(|i| geometry.lattice_point(i))
            .collect();
        Ok(Self {
            geometry,
            correlation,
            lattice,
        })
    }

    pub fn geometry(&self) -> &SurfaceGeometry {
        &self.geometry
    }

    pub fn correlation(&self) -> &CorrelationModel {
        &self.correlation
    }

    fn link<R: Rng + ?Sized>(
        &self,
        link: &LinkParams,
        bs_gain: Complex64,
        rng: &mut R,
    ) -> Result<Vec<Complex64>> {
        let amp = path_loss(link.distance, link.path_loss_exponent)?.sqrt();
        let (w_los, w_nlos) = link.rician_weights();
        let los = surface_steering(
            link.azimuth,
            link.elevation,
            &self.lattice,
            self.geometry.wavelength(),
        );
        let nlos = correlated_nlos(&self.correlation, rng);
        Ok(los
            .into_iter()
            .zip(nlos)
            .map(|(a, s)| amp * (w_los * a * bs_gain + w_nlos * s))
            .collect())
    }

    /// Synthesizes `h_f`, `h_r`, `h_t` in that order from `rng`.
    pub fn synthesize<R: Rng + ?Sized>(
        &self,
        params: &ChannelParams,
        rng: &mut R,
    ) -> Result<ChannelRealization> {
        params.validate()?;
        // single-antenna BS: the transmit steering vector is the scalar 1
        let bs_gain = bs_steering(params.bs_departure, 1)[0].conj();
        let one = Complex64::new(1.0, 0.0);
        Ok(ChannelRealization {
            h_f: self.link(&params.incident, bs_gain, rng)?,
            h_r: self.link(&params.reflect, one, rng)?,
            h_t: self.link(&params.transmit, one, rng)?,
        })
    }
}

/// Convenience wrapper that builds the correlation model on every call.
pub fn synthesize_channel<R: Rng + ?Sized>(
    geom: &SurfaceGeometry,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<ChannelRealization> {
    ChannelModel::new(geom.clone())?.synthesize(params, rng)
}

/// Lattice indices used by `placement`: each element snaps to the nearest
/// preset of its own subarea.
pub fn placement_indices(placement: &Placement, geom: &SurfaceGeometry) -> Result<Vec<usize>> {
    if placement.len() != geom.num_elements() {
        return Err(Error::LengthMismatch {
            expected: geom.num_elements(),
            actual: placement.len(),
        });
    }
    placement
        .positions
        .iter()
        .enumerate()
        .map(|(m, p)| geom.snap_to_subarea(p, m))
        .collect()
}

pub fn channel_at_indices(
    realization: &ChannelRealization,
    indices: &[usize],
) -> Result<ElementChannels> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= realization.len()) {
        return Err(Error::Index(format!(
            "lattice index {bad} out of range for {} presets",
            realization.len()
        )));
    }
    let pick = |h: &[Complex64]| indices.iter().map(|&i| h[i]).collect();
    Ok(ElementChannels {
        h_f: pick(&realization.h_f),
        h_r: pick(&realization.h_r),
        h_t: pick(&realization.h_t),
    })
}

pub fn channel_at(
    realization: &ChannelRealization,
    placement: &Placement,
    geom: &SurfaceGeometry,
) -> Result<ElementChannels> {
    if realization.len() != geom.num_presets() {
        return Err(Error::LengthMismatch {
            expected: geom.num_presets(),
            actual: realization.len(),
        });
    }
    channel_at_indices(realization, &placement_indices(placement, geom)?)
}

/// Serialized realization for regression fixtures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelDump {
    pub seed: u64,
    pub geometry: SurfaceGeometry,
    pub params: ChannelParams,
    pub realization: ChannelRealization,
}

impl ChannelDump {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).map_err(|e| Error::Serialization {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        std::fs::write(path, json).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Serialization {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }
}
