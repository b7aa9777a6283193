use serde::{Deserialize, Serialize};

use super::{GeoError, LocalPoint};
use crate::scalar::{normalize_degrees, Scalar};

/// Mean Earth radius used by every spherical formula in the crate.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Largest distance from the origin the local tangent plane accepts.
pub const PROJECTION_RADIUS_M: f64 = 2_000.0;

/// WGS84 latitude/longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint<T = f64> {
    pub lat: T,
    pub lon: T,
}

impl<T: Scalar> GeoPoint<T> {
    /// Latitude must lie in `[-90, 90]` and longitude in `[-180, 180)`.
    pub fn new(lat: T, lon: T) -> Result<Self, GeoError> {
        let ok = lat.is_finite()
            && lon.is_finite()
            && lat >= T::lit(-90.0)
            && lat <= T::lit(90.0)
            && lon >= T::lit(-180.0)
            && lon < T::lit(180.0);
        if ok {
            Ok(Self { lat, lon })
        } else {
            Err(GeoError::InvalidCoordinate {
                lat: lat.as_f64(),
                lon: lon.as_f64(),
            })
        }
    }

    pub fn is_valid(&self) -> bool {
        Self::new(self.lat, self.lon).is_ok()
    }
}

pub fn haversine_distance<T: Scalar>(a: GeoPoint<T>, b: GeoPoint<T>) -> T {
    let two = T::lit(2.0);
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / two).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / two).sin().powi(2);
    let h = h.min(T::one()).max(T::zero());
    T::lit(EARTH_RADIUS_M) * two * h.sqrt().asin()
}

/// Forward azimuth from `from` to `to`, in `[0, 360)`.
pub fn initial_bearing<T: Scalar>(from: GeoPoint<T>, to: GeoPoint<T>) -> Result<T, GeoError> {
    if from.lat == to.lat && from.lon == to.lon {
        return Err(GeoError::CoincidentPoints);
    }
    let phi1 = from.lat.to_radians();
    let phi2 = to.lat.to_radians();
    let dlambda = (to.lon - from.lon).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    Ok(normalize_degrees(y.atan2(x).to_degrees()))
}

fn wrap_longitude_delta<T: Scalar>(dlon: T) -> T {
    let half = T::lit(180.0);
    let full = T::lit(360.0);
    if dlon >= half {
        dlon - full
    } else if dlon < -half {
        dlon + full
    } else {
        dlon
    }
}

/// Equirectangular projection onto the tangent plane at `origin`.
pub fn project_local<T: Scalar>(
    origin: GeoPoint<T>,
    p: GeoPoint<T>,
) -> Result<LocalPoint<T>, GeoError> {
    let d = haversine_distance(origin, p);
    if d > T::lit(PROJECTION_RADIUS_M) {
        return Err(GeoError::OutOfProjectionRange {
            distance_m: d.as_f64(),
            limit_m: PROJECTION_RADIUS_M,
        });
    }
    let r = T::lit(EARTH_RADIUS_M);
    let dlon = wrap_longitude_delta(p.lon - origin.lon).to_radians();
    let dlat = (p.lat - origin.lat).to_radians();
    Ok(LocalPoint::new(
        r * dlon * origin.lat.to_radians().cos(),
        r * dlat,
    ))
}

/// Inverse of [`project_local`].
pub fn unproject_local<T: Scalar>(origin: GeoPoint<T>, p: LocalPoint<T>) -> GeoPoint<T> {
    let r = T::lit(EARTH_RADIUS_M);
    let lat = origin.lat + (p.y / r).to_degrees();
    let lon = origin.lon + (p.x / (r * origin.lat.to_radians().cos())).to_degrees();
    let lon = normalize_degrees(lon + T::lit(180.0)) - T::lit(180.0);
    GeoPoint { lat, lon }
}
