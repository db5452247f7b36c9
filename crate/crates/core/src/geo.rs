//! Spherical geodesy on a mean-Earth sphere.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bsm::Timeframe;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("empty or inverted rectangle: lat [{lat_min}, {lat_max}], lon [{lon_min}, {lon_max}]")]
    DegenerateRect {
        lat_min: f64,
        lat_max: f64,
        lon_min: f64,
        lon_max: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    latitude: f64,
    longitude: f64,
}

impl GeoPoint {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(GeoError::Latitude(latitude));
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(GeoError::Longitude(longitude));
        }
        Ok(Self {
            latitude,
            longitude,
        })
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }

    pub fn longitude(&self) -> f64 {
        self.longitude
    }
}

/// Great-circle distance in meters.
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.latitude.to_radians();
    let lat2 = b.latitude.to_radians();
    let dlat = lat2 - lat1;
    let dlon = (b.longitude - a.longitude).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Latitude/longitude box. Rectangles crossing the antimeridian are not
/// representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoRect {
    lat_min: f64,
    lat_max: f64,
    lon_min: f64,
    lon_max: f64,
}

impl GeoRect {
    /// The Ann Arbor, Michigan rectangle used for synthetic performance data.
    pub const ANN_ARBOR: GeoRect = GeoRect {
        lat_min: 42.226673,
        lat_max: 42.356186,
        lon_min: -83.816270,
        lon_max: -83.522030,
    };

    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self, GeoError> {
        GeoPoint::new(lat_min, lon_min)?;
        GeoPoint::new(lat_max, lon_max)?;
        if !(lat_min < lat_max && lon_min < lon_max) {
            return Err(GeoError::DegenerateRect {
                lat_min,
                lat_max,
                lon_min,
                lon_max,
            });
        }
        Ok(Self {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
        })
    }

    pub fn lat_range(&self) -> (f64, f64) {
        (self.lat_min, self.lat_max)
    }

    pub fn lon_range(&self) -> (f64, f64) {
        (self.lon_min, self.lon_max)
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.lat_min..=self.lat_max).contains(&p.latitude)
            && (self.lon_min..=self.lon_max).contains(&p.longitude)
    }

    /// Area in km², as east-west span at the mean latitude times the
    /// north-south span.
    pub fn area_km2(&self) -> f64 {
        let mid = (self.lat_min + self.lat_max) / 2.0;
        let width = haversine_distance(
            GeoPoint::new(mid, self.lon_min).unwrap(),
            GeoPoint::new(mid, self.lon_max).unwrap(),
        );
        let height = haversine_distance(
            GeoPoint::new(self.lat_min, self.lon_min).unwrap(),
            GeoPoint::new(self.lat_max, self.lon_min).unwrap(),
        );
        width * height / 1.0e6
    }
}

pub fn rectangle_area(r: &GeoRect) -> f64 {
    r.area_km2()
}

/// Symmetric matrix of pairwise distances in meters, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Fills the upper triangle with `metric`, calling it exactly
    /// `n(n-1)/2` times, and mirrors it into the lower triangle.
    pub fn from_points_with<F>(points: &[GeoPoint], mut metric: F) -> Self
    where
        F: FnMut(GeoPoint, GeoPoint) -> f64,
    {
        let n = points.len();
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = metric(points[i], points[j]);
                entries[i * n + j] = d;
                entries[j * n + i] = d;
            }
        }
        Self { n, entries }
    }

    pub fn from_points(points: &[GeoPoint]) -> Self {
        Self::from_points_with(points, haversine_distance)
    }

    /// Builds a matrix from a row-major `n*n` buffer, checking symmetry,
    /// zero diagonal, and non-negative entries.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Option<Self> {
        if entries.len() != n * n {
            return None;
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return None;
            }
            for j in 0..n {
                let d = entries[i * n + j];
                if d.is_nan() || d < 0.0 || d != entries[j * n + i] {
                    return None;
                }
            }
        }
        Some(Self { n, entries })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }
}

pub fn distance_matrix(frame: &Timeframe) -> DistanceMatrix {
    DistanceMatrix::from_points(&frame.positions())
}
