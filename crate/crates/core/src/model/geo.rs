//! Great-circle distance and the 250 m analysis grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
/// Side of a grid cell in the projected frame, meters.
pub const CELL_SIZE_M: f64 = 250.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = LatLon { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidCoordinate {
                lat: self.lat,
                lon: self.lon,
            })
        }
    }
}

/// Haversine distance in kilometers on a sphere of radius 6371 km.
pub fn haversine_km(a: LatLon, b: LatLon) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    // rounding can push h a hair past 1 for antipodal points
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// A 250 m x 250 m square of the local planar frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridCell {
    pub ix: i64,
    pub iy: i64,
}

impl GridCell {
    pub const fn new(ix: i64, iy: i64) -> Self {
        GridCell { ix, iy }
    }
}

/// Equirectangular local frame anchored at a reference origin.
///
/// `x = R * dlon * cos(lat0)`, `y = R * dlat`, both in meters with angles in
/// radians. Distortion stays well under 1% across a metropolitan area, which
/// is all the grid needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionFrame {
    pub lat0: f64,
    pub lon0: f64,
}

impl ProjectionFrame {
    pub fn new(lat0: f64, lon0: f64) -> Result<Self> {
        LatLon::new(lat0, lon0)?;
        if lat0.abs() >= 89.0 {
            return Err(Error::Config(format!(
                "frame origin latitude {lat0} too close to a pole"
            )));
        }
        Ok(ProjectionFrame { lat0, lon0 })
    }

    pub fn to_planar(&self, p: LatLon) -> (f64, f64) {
        let x = EARTH_RADIUS_M * (p.lon - self.lon0).to_radians() * self.lat0.to_radians().cos();
        let y = EARTH_RADIUS_M * (p.lat - self.lat0).to_radians();
        (x, y)
    }

    pub fn from_planar(&self, x: f64, y: f64) -> LatLon {
        let lat = self.lat0 + (y / EARTH_RADIUS_M).to_degrees();
        let lon = self.lon0 + (x / (EARTH_RADIUS_M * self.lat0.to_radians().cos())).to_degrees();
        LatLon { lat, lon }
    }

    pub fn snap_to_cell(&self, p: LatLon) -> Result<GridCell> {
        p.validate()?;
        let (x, y) = self.to_planar(p);
        Ok(GridCell {
            ix: (x / CELL_SIZE_M).floor() as i64,
            iy: (y / CELL_SIZE_M).floor() as i64,
        })
    }

    pub fn cell_centroid(&self, cell: GridCell) -> LatLon {
        self.from_planar(
            (cell.ix as f64 + 0.5) * CELL_SIZE_M,
            (cell.iy as f64 + 0.5) * CELL_SIZE_M,
        )
    }
}

/// Free-function form of [`ProjectionFrame::snap_to_cell`].
pub fn snap_to_cell(lat: f64, lon: f64, frame: &ProjectionFrame) -> Result<GridCell> {
    frame.snap_to_cell(LatLon { lat, lon })
}
