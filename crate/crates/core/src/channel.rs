//! Downlink channel generation: path loss with log-normal shadowing,
//! i.i.d. Rayleigh fading, and a norm-bounded CSI estimation error.

use crate::error::{Error, Result};
use crate::linalg::CVec;
use crate::rng::SeededRng;

pub const MIN_DISTANCE_KM: f64 = 0.02;
pub const MAX_DISTANCE_KM: f64 = 0.5;
pub const SHADOWING_STD_DB: f64 = 8.0;

/// Location-dependent large-scale parameters of one device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceGeometry {
    distance_km: f64,
    shadowing_db: f64,
}

impl DeviceGeometry {
    pub fn new(distance_km: f64, shadowing_db: f64) -> Result<Self> {
        if !(distance_km > MIN_DISTANCE_KM && distance_km < MAX_DISTANCE_KM) {
            return Err(Error::invalid(format!(
                "distance {distance_km} km outside ({MIN_DISTANCE_KM}, {MAX_DISTANCE_KM})"
            )));
        }
        if !shadowing_db.is_finite() {
            return Err(Error::invalid("non-finite shadowing"));
        }
        Ok(Self {
            distance_km,
            shadowing_db,
        })
    }

    /// One "drop": uniform distance in the cell annulus, Gaussian shadowing in dB.
    pub fn sample(rng: &mut SeededRng) -> Self {
        loop {
            let d = rng.uniform_range(MIN_DISTANCE_KM, MAX_DISTANCE_KM);
            if d > MIN_DISTANCE_KM {
                return Self {
                    distance_km: d,
                    shadowing_db: SHADOWING_STD_DB * rng.normal(),
                };
            }
        }
    }

    pub fn sample_drop(n_devices: usize, rng: &mut SeededRng) -> Vec<Self> {
        (0..n_devices).map(|_| Self::sample(rng)).collect()
    }

    pub fn distance_km(&self) -> f64 {
        self.distance_km
    }

    pub fn shadowing_db(&self) -> f64 {
        self.shadowing_db
    }

    pub fn path_gain_db(&self) -> f64 {
        path_gain_db(self.distance_km, self.shadowing_db)
    }

    pub fn path_gain(&self) -> f64 {
        db_to_linear(self.path_gain_db())
    }
}

/// `-136.3 - 35 log10(d_km) - shadowing_db`
pub fn path_gain_db(distance_km: f64, shadowing_db: f64) -> f64 {
    -136.3 - 35.0 * distance_km.log10() - shadowing_db
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// True channels, BS-side estimates, and error radii for one round.
#[derive(Debug, Clone)]
pub struct ChannelRound {
    pub h_true: Vec<CVec>,
    pub h_hat: Vec<CVec>,
    pub epsilon: Vec<f64>,
}

impl ChannelRound {
    /// A round with perfect CSI.
    pub fn perfect(h: Vec<CVec>) -> Self {
        let epsilon = vec![0.0; h.len()];
        Self {
            h_hat: h.clone(),
            h_true: h,
            epsilon,
        }
    }

    pub fn n_devices(&self) -> usize {
        self.h_true.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.h_true.first().map_or(0, CVec::len)
    }

    /// `Δh_k = h_k − ĥ_k`
    pub fn delta_h(&self, k: usize) -> CVec {
        self.h_true[k].sub(&self.h_hat[k])
    }

    pub fn delta_h_all(&self) -> Vec<CVec> {
        (0..self.n_devices()).map(|k| self.delta_h(k)).collect()
    }
}

/// Draws one round of channels.
///
/// The true channel is generated first; the estimation error is uniform in the
/// ball of radius `γ‖h_k‖` and the estimate is `ĥ_k = h_k − Δh_k`.
pub fn gen_channel_round(
    geoms: &[DeviceGeometry],
    n_antennas: usize,
    gamma: f64,
    rng: &mut SeededRng,
) -> Result<ChannelRound> {
    if n_antennas == 0 {
        return Err(Error::invalid("n_antennas must be at least 1"));
    }
    if geoms.is_empty() {
        return Err(Error::invalid("at least one device is required"));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma {gamma} outside [0, 1)")));
    }
    let mut h_true = Vec::with_capacity(geoms.len());
    let mut h_hat = Vec::with_capacity(geoms.len());
    let mut epsilon = Vec::with_capacity(geoms.len());
    for g in geoms {
        let h = rng.complex_normal_vec(n_antennas).scaled(g.path_gain().sqrt());
        let eps = gamma * h.norm();
        let hat = if eps > 0.0 {
            h.sub(&rng.uniform_in_ball(n_antennas, eps))
        } else {
            h.clone()
        };
        h_true.push(h);
        h_hat.push(hat);
        epsilon.push(eps);
    }
    Ok(ChannelRound {
        h_true,
        h_hat,
        epsilon,
    })
}
